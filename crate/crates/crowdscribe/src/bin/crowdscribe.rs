//! Command-line front end. All real work lives in the library; this file
//! only maps arguments onto `PipelineConfig`, calls one library entry point
//! per subcommand, and prints the result.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crowdscribe::confidence::Decision;
use crowdscribe::fusion::{AlignmentOrder, FusionConfig};
use crowdscribe::metrics::{corpus_twer, raw_corpus_twer, CorpusTwer, ErrorBreakdown};
use crowdscribe::pipeline::{
    aggregate_corpus, end_to_end, load_models, read_confidences, read_hypotheses, score_corpus,
    train_models, AlphaSetting, EmissionProvider, PipelineConfig,
};
use crowdscribe::report::{parse_tsv, render_markdown, render_tsv};
use crowdscribe::{Error, Result};

#[derive(Parser)]
#[command(
    name = "crowdscribe",
    version,
    about = "Quality control for crowdsourced speech transcription"
)]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory of per-utterance emission matrices.
    #[arg(long, global = true)]
    emissions_dir: Option<PathBuf>,
    /// Directory of per-utterance wav files for SNR features.
    #[arg(long, global = true)]
    wav_dir: Option<PathBuf>,
    /// Where artifacts are written (default: out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Corpus file locations; each overrides the config file.
#[derive(Args)]
struct CorpusArgs {
    /// Response TSV: utterance_id, worker_id, submit_order, spend_time, raw_text.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Reference TSV: utterance_id, subset, duration_s, reference_text.
    #[arg(long)]
    references: Option<PathBuf>,
    /// Optional utterance metadata TSV (emission file references).
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Score transcripts against references, pooled per subset.
    Twer {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Hypothesis TSV (utterance_id, text); omit to pool all raw responses.
        #[arg(long)]
        hypotheses: Option<PathBuf>,
    },
    /// Fuse each utterance's responses into one hypothesis by weighted voting.
    Aggregate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Per-word confidence TSV: utterance_id, worker_id, word_index, confidence.
        #[arg(long)]
        confidences: Option<PathBuf>,
        /// Voting weight in [0, 1]; 1 ignores confidences entirely.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Train the word and utterance confidence models and calibrate the gate.
    CemTrain {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Score responses with trained models.
    CemScore {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Directory holding the trained models (default: <out-dir>/models).
        #[arg(long)]
        models_dir: Option<PathBuf>,
        /// Emit per-word confidences instead of per-response verdicts.
        #[arg(long)]
        words: bool,
    },
    /// Grid-search the voting weight on the training subsets.
    TuneAlpha {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Run the full pipeline: train, gate, fuse, evaluate, write artifacts.
    Simulate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Final-selection strategy: ecm, rover, random, longest, best-worker, oracle.
        #[arg(long)]
        strategy: Option<String>,
        /// Voting weight in [0, 1], or "tune".
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Re-render a stored report TSV.
    Report {
        /// Stored report (default: <out-dir>/report.tsv).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output format: markdown or tsv.
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1 per the contract; help and version are
            // not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn build_config(cli: &Cli, corpus_args: Option<&CorpusArgs>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.merge_file(path)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.emissions_dir {
        cfg.emissions_dir = Some(dir.clone());
    }
    if let Some(dir) = &cli.wav_dir {
        cfg.wav_dir = Some(dir.clone());
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(args) = corpus_args {
        if let Some(p) = &args.responses {
            cfg.response_path = Some(p.clone());
        }
        if let Some(p) = &args.references {
            cfg.reference_path = Some(p.clone());
        }
        if let Some(p) = &args.meta {
            cfg.meta_path = Some(p.clone());
        }
    }
    Ok(cfg)
}

fn print_twer(result: &CorpusTwer) {
    println!("subset\tref_words\tdel\tins\tsub\ttwer");
    let row = |name: &str, b: &ErrorBreakdown| {
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            name,
            b.ref_words,
            100.0 * b.del_rate(),
            100.0 * b.ins_rate(),
            100.0 * b.sub_rate(),
            100.0 * b.twer()
        );
    };
    for (subset, b) in &result.per_subset {
        row(subset.name(), b);
    }
    row("all", &result.total);
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Twer { corpus, hypotheses } => {
            let cfg = build_config(&cli, Some(corpus))?;
            let corpus = cfg.load_corpus()?;
            let result = match hypotheses {
                Some(path) => corpus_twer(&corpus, &read_hypotheses(path)?)?,
                None => raw_corpus_twer(&corpus)?,
            };
            print_twer(&result);
        }
        Command::Aggregate { corpus, confidences, alpha } => {
            let cfg = build_config(&cli, Some(corpus))?;
            let corpus = cfg.load_corpus()?;
            let conf_map = confidences.as_deref().map(read_confidences).transpose()?;
            let alpha = match alpha {
                Some(a) if (0.0..=1.0).contains(a) => *a,
                Some(a) => return Err(Error::Config(format!("alpha {a} outside [0, 1]"))),
                None => match cfg.alpha {
                    AlphaSetting::Fixed(a) => a,
                    AlphaSetting::Tune => FusionConfig::default().alpha,
                },
            };
            let fusion_cfg = FusionConfig {
                alpha,
                gap_confidence: cfg.gap_confidence,
                alignment_order: AlignmentOrder::ConfidenceDesc,
            };
            let fused = aggregate_corpus(&corpus, conf_map.as_ref(), &fusion_cfg)?;
            println!("utterance_id\thypothesis");
            for (id, hyp) in &fused {
                println!("{id}\t{}", hyp.joined());
            }
        }
        Command::CemTrain { corpus } => {
            let mut cfg = build_config(&cli, Some(corpus))?;
            // Alpha tuning belongs to tune-alpha; skip it here.
            if cfg.alpha == AlphaSetting::Tune {
                cfg.alpha = AlphaSetting::Fixed(FusionConfig::default().alpha);
            }
            let corpus = cfg.load_corpus()?;
            let emissions = EmissionProvider::from_dir(cfg.emissions_dir.as_deref());
            let models = train_models(&corpus, &cfg, &emissions)?;
            let models_dir = cfg.out_dir.join("models");
            std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
            let word_path = models_dir.join("word_cem.model");
            crowdscribe::confidence::save_word_cem(&word_path, &models.word_model)?;
            let utt_path = models_dir.join("utterance_gbm.model");
            crowdscribe::confidence::save_utterance_model(&utt_path, &models.utterance_model)?;
            let lex_path = models_dir.join("lexicon.tsv");
            models.lexicon.save(&lex_path)?;
            println!("wrote {}", word_path.display());
            println!("wrote {}", utt_path.display());
            println!("wrote {}", lex_path.display());
            println!(
                "threshold\t{:.6}\ttarget_reject_rate\t{}",
                models.utterance_model.threshold, cfg.target_reject_rate
            );
        }
        Command::CemScore { corpus, models_dir, words } => {
            let cfg = build_config(&cli, Some(corpus))?;
            let corpus = cfg.load_corpus()?;
            let emissions = EmissionProvider::from_dir(cfg.emissions_dir.as_deref());
            let dir = models_dir.clone().unwrap_or_else(|| cfg.out_dir.join("models"));
            let models = load_models(&dir, &corpus, &cfg)?;
            let scored = score_corpus(&corpus, &cfg.eval_subsets, &cfg, &models, &emissions)?;
            if *words {
                println!("utterance_id\tworker_id\tword_index\tconfidence");
                for s in &scored {
                    for (i, c) in s.word_confidences.iter().enumerate() {
                        println!("{}\t{}\t{}\t{:.6}", s.utterance_id, s.worker_id, i, c);
                    }
                }
            } else {
                println!("utterance_id\tworker_id\tsubmit_order\tpredicted_errors\tdecision");
                for s in &scored {
                    let verdict = match s.decision {
                        Decision::Accept => "accept",
                        Decision::Reject => "reject",
                    };
                    println!(
                        "{}\t{}\t{}\t{:.6}\t{}",
                        s.utterance_id, s.worker_id, s.submit_order, s.predicted_errors, verdict
                    );
                }
            }
        }
        Command::TuneAlpha { corpus } => {
            let mut cfg = build_config(&cli, Some(corpus))?;
            cfg.alpha = AlphaSetting::Tune;
            let corpus = cfg.load_corpus()?;
            let emissions = EmissionProvider::from_dir(cfg.emissions_dir.as_deref());
            let models = train_models(&corpus, &cfg, &emissions)?;
            println!("alpha\ttwer");
            if let Some(grid) = &models.alpha_grid {
                for (a, t) in grid {
                    println!("{:.2}\t{:.4}", a, 100.0 * t);
                }
            }
            println!("best\t{}", models.alpha);
        }
        Command::Simulate { corpus, strategy, alpha } => {
            let mut cfg = build_config(&cli, Some(corpus))?;
            if let Some(s) = strategy {
                cfg.strategy = FromStr::from_str(s)?;
            }
            if let Some(a) = alpha {
                cfg.alpha = a.parse()?;
            }
            let artifacts = end_to_end(&cfg)?;
            for f in &artifacts.files {
                println!("wrote {}", f.display());
            }
            let report = &artifacts.report;
            println!("subset\traw_twer\tpost_cem_twer\tfinal_twer\treject_rate");
            for (subset, o) in &report.per_subset {
                println!(
                    "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                    subset.name(),
                    100.0 * o.raw.breakdown.twer(),
                    100.0 * o.post_cem.breakdown.twer(),
                    100.0 * o.final_output.twer(),
                    100.0 * o.reject_rate()
                );
            }
            let o = &report.overall;
            println!(
                "all\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                100.0 * o.raw.breakdown.twer(),
                100.0 * o.post_cem.breakdown.twer(),
                100.0 * o.final_output.twer(),
                100.0 * o.reject_rate()
            );
        }
        Command::Report { input, format } => {
            if !matches!(format.as_str(), "markdown" | "md" | "tsv") {
                return Err(Error::Config(format!(
                    "unknown report format {format:?} (expected markdown or tsv)"
                )));
            }
            let cfg = build_config(&cli, None)?;
            let path = input.clone().unwrap_or_else(|| cfg.out_dir.join("report.tsv"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let (meta, rows) = parse_tsv(&text)?;
            if format == "tsv" {
                print!("{}", render_tsv(&meta, &rows));
            } else {
                print!("{}", render_markdown(&meta, &rows));
            }
        }
    }
    Ok(())
}
