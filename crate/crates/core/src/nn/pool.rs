use alloc::vec::Vec;

use crate::matrix::Matrix;

/// Max pooling over time with width 2, stride 1 and same padding:
/// `y[t] = max(x[t], x[t+1])`, `y[T-1] = x[T-1]`. The returned mask marks
/// entries taken from `x[t+1]`.
pub fn max_pool2_forward(x: &Matrix) -> (Matrix, Vec<bool>) {
    let (t_len, c) = (x.rows(), x.cols());
    let mut y = x.clone();
    let mut from_next = alloc::vec![false; t_len * c];
    for t in 0..t_len.saturating_sub(1) {
        let next = x.row(t + 1);
        let row = y.row_mut(t);
        for j in 0..c {
            if next[j] > row[j] {
                row[j] = next[j];
                from_next[t * c + j] = true;
            }
        }
    }
    (y, from_next)
}

pub fn max_pool2_backward(dy: &Matrix, from_next: &[bool]) -> Matrix {
    let c = dy.cols();
    let mut dx = Matrix::zeros(dy.rows(), c);
    let d = dx.as_mut_slice();
    for (i, (&g, &nxt)) in dy.as_slice().iter().zip(from_next).enumerate() {
        d[if nxt { i + c } else { i }] += g;
    }
    dx
}
