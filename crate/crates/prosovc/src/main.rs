use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prosovc::checkpoint::save_classifier;
use prosovc::config::RunConfig;
use prosovc::core::augment::expand_manifest;
use prosovc::core::corpus::Split;
use prosovc::core::models::Mode;
use prosovc::pipeline::{extract, speaker_stats, train, train_ppg, write_toy_corpus, Converter, Corpus, PpgProvider};
use prosovc::report::{bench_vocoder, check_thresholds, evaluate_dirs, format_table, write_report};
use prosovc::stats::{format_stats, load_stats, save_stats};
use prosovc::{Error, Result};

/// Any-to-one voice conversion from posteriorgrams, pitch and prosody embeddings.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 threshold failure.
/// Flags override keys of the --config file, which override built-in defaults.
#[derive(Parser)]
#[command(name = "prosovc", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `paths.manifest`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Overrides `paths.cache`.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Overrides `paths.run_dir`.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    /// Overrides `ppg.classifier`.
    #[arg(long, global = true)]
    classifier: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labelled corpus (wavs, labels, manifest.txt).
    ToyCorpus {
        #[arg(long)]
        out: PathBuf,
        /// Preset speakers, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
        speakers: Vec<String>,
        /// Utterances per speaker.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Seconds per utterance.
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
    },
    /// Train the frame phone classifier from `<labels>/<id>.lab` files.
    TrainPpg {
        /// Overrides `paths.labels_dir`.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Overrides `ppg.toy.steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fill the feature cache for every manifest entry and speed factor.
    Extract,
    /// Print the manifest expanded by the configured speed factors.
    Augment {
        /// Comma-separated factors; defaults to `augment.factors`.
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<f32>>,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the conversion model on the target speaker's cached features.
    Train {
        /// Overrides `model.mode`.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Overrides `train.max_steps`.
        #[arg(long)]
        steps: Option<u64>,
        /// Overrides `target_speaker`.
        #[arg(long)]
        speaker: Option<String>,
        /// Continue from `<run_dir>/model.pvck`.
        #[arg(long)]
        resume: bool,
    },
    /// Compute a speaker's pitch statistics, or print a stats file.
    Stats {
        #[arg(long, required_unless_present = "print")]
        speaker: Option<String>,
        #[arg(long, requires = "speaker")]
        out: Option<PathBuf>,
        /// Print an existing stats file.
        #[arg(long, conflicts_with = "speaker")]
        print: Option<PathBuf>,
    },
    /// Convert one wav to the target speaker.
    Convert {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Source speaker statistics.
        #[arg(long)]
        src_stats: PathBuf,
        /// Target speaker statistics.
        #[arg(long)]
        tgt_stats: PathBuf,
        /// Overrides `model.mode`; must match the checkpoint.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Compare same-named wavs in two directories and write a report.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit 3 when an aggregate metric exceeds its `eval` threshold.
        #[arg(long)]
        check: bool,
    },
    /// Stream toy copy-synthesis features through the vocoder and report the real-time factor.
    Bench {
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    Proposed,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::Proposed => Mode::Proposed,
        }
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = &c.manifest {
        cfg.paths.manifest = p.clone();
    }
    if let Some(p) = &c.cache {
        cfg.paths.cache = p.clone();
    }
    if let Some(p) = &c.run_dir {
        cfg.paths.run_dir = p.clone();
    }
    if let Some(p) = &c.classifier {
        cfg.ppg.classifier = p.clone();
    }
    Ok(cfg.resolved())
}

fn finish(cfg: &RunConfig, origin: &Path) -> Result<RunConfig> {
    let cfg = cfg.clone().resolved();
    cfg.validate(origin)?;
    Ok(cfg)
}

fn parent_dir(p: &Path) -> &Path {
    p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    let origin = cli.common.config.clone().unwrap_or_else(|| PathBuf::from("<flags>"));
    match cli.command {
        Command::ToyCorpus { out, speakers, count, duration } => {
            let m = write_toy_corpus(&out, &speakers, count, duration, cfg.seed, cfg.frame.sample_rate)?;
            println!("wrote {}", m.display());
        }
        Command::TrainPpg { labels, steps } => {
            if let Some(s) = steps {
                cfg.ppg.toy.steps = s;
            }
            let labels = labels.unwrap_or_else(|| cfg.paths.labels_dir.clone());
            let cfg = finish(&cfg, &origin)?;
            let corpus = Corpus::load(&cfg.paths.manifest, Split::Train)?;
            let (model, trace) = train_ppg(&cfg, &corpus, &labels)?;
            save_classifier(&cfg.ppg.classifier, &model)?;
            cfg.write_resolved(parent_dir(&cfg.ppg.classifier))?;
            let (first, last) = (trace.losses.first().copied().unwrap_or(0.0), trace.losses.last().copied().unwrap_or(0.0));
            println!("classifier {} trained: loss {first:.4} -> {last:.4}", cfg.ppg.classifier.display());
        }
        Command::Extract => {
            let cfg = finish(&cfg, &origin)?;
            let corpus = Corpus::load(&cfg.paths.manifest, Split::Train)?;
            let provider = PpgProvider::from_config(&cfg)?;
            let s = extract(&cfg, &corpus, &provider)?;
            cfg.write_resolved(&cfg.paths.cache)?;
            println!("computed {}, skipped {}, failed {}", s.computed, s.skipped, s.failures.len());
            for (id, e) in &s.failures {
                eprintln!("{id}: {e}");
            }
            if !s.failures.is_empty() {
                return Err(Error::Partial { failed: s.failures.len(), total: s.computed + s.skipped + s.failures.len() });
            }
        }
        Command::Augment { factors, out } => {
            if let Some(f) = factors {
                cfg.augment.factors = f;
            }
            let cfg = finish(&cfg, &origin)?;
            let corpus = Corpus::load(&cfg.paths.manifest, Split::Train)?;
            let text = expand_manifest(&corpus.manifest, &cfg.speed_factors()?)?.to_text();
            match out {
                Some(p) => prosovc::cache::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Train { mode, steps, speaker, resume } => {
            if let Some(m) = mode {
                cfg.model.mode = m.into();
            }
            if let Some(s) = steps {
                cfg.train.max_steps = s;
            }
            if speaker.is_some() {
                cfg.target_speaker = speaker;
            }
            let cfg = finish(&cfg, &origin)?;
            let corpus = Corpus::load(&cfg.paths.manifest, Split::Train)?;
            let provider = PpgProvider::from_config(&cfg)?;
            let every = cfg.train.log_every.max(1);
            let out = train(&cfg, &corpus, &provider, resume, |s| {
                if s.step % every == 0 {
                    eprintln!("step {:>6}  loss {:.5}  grad {:.4}", s.step, s.loss, s.grad_norm);
                }
            })?;
            println!(
                "trained {} steps on {} utterances; final loss {:.5}; wrote {} and {}",
                out.losses.len(),
                out.examples,
                out.losses.last().copied().unwrap_or(f32::NAN),
                out.checkpoint.display(),
                out.stats_path.display()
            );
        }
        Command::Stats { speaker, out, print } => {
            if let Some(p) = print {
                let (name, s) = load_stats(&p)?;
                print!("{}", format_stats(&name, &s));
                return Ok(());
            }
            let speaker = speaker.expect("clap enforces --speaker");
            let cfg = finish(&cfg, &origin)?;
            let corpus = Corpus::load(&cfg.paths.manifest, Split::Train)?;
            let s = speaker_stats(&cfg, &corpus, &speaker)?;
            if let Some(p) = out {
                save_stats(&p, &speaker, &s)?;
            }
            print!("{}", format_stats(&speaker, &s));
        }
        Command::Convert { checkpoint, src_stats, tgt_stats, mode, input, output } => {
            if let Some(m) = mode {
                cfg.model.mode = m.into();
            }
            let cfg = finish(&cfg, &origin)?;
            let (_, src) = load_stats(&src_stats)?;
            let (_, tgt) = load_stats(&tgt_stats)?;
            let provider = PpgProvider::from_config(&cfg)?;
            let conv = Converter::new(&cfg, &checkpoint, src, tgt, provider)?;
            let c = conv.convert_file(&input, &output)?;
            cfg.write_resolved(parent_dir(&output))?;
            println!("wrote {} ({:.3} s)", output.display(), c.wave.duration_s());
        }
        Command::Eval { reference, hyp, out, check } => {
            let cfg = finish(&cfg, &origin)?;
            let report = evaluate_dirs(&cfg, &reference, &hyp)?;
            let run_dir = cli.common.run_dir.is_some().then_some(cfg.paths.run_dir.as_path());
            write_report(&out, &report, run_dir)?;
            cfg.write_resolved(&out)?;
            print!("{}", format_table(&report));
            if check {
                check_thresholds(&report, &cfg.eval)?;
            }
        }
        Command::Bench { seconds } => {
            let cfg = finish(&cfg, &origin)?;
            let b = bench_vocoder(&cfg, seconds)?;
            println!(
                "streamed {:.2} s of audio in {:.4} s: real-time factor {:.4}; stream equals batch: {}",
                b.audio_s, b.elapsed_s, b.rtf, b.bit_identical
            );
            if !b.bit_identical {
                return Err(Error::Threshold("streamed output differs from batch synthesis".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
