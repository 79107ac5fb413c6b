//! The whole pipeline, file to file.
//!
//! Writes a small synthetic corpus release to disk, points the pipeline at
//! it, and runs data loading, model training, threshold calibration, fusion
//! tuning, and the quality-control simulation in one call. Prints where the
//! artifacts landed plus the final per-subset numbers; running it again with
//! the same seed writes byte-identical files.
//!
//! ```bash
//! cargo run --example full_pipeline
//! ```

use crowdscribe::pipeline::{end_to_end, PipelineConfig};
use crowdscribe::synth::{generate, write_corpus, SynthConfig};

fn main() -> crowdscribe::Result<()> {
    let root = std::env::temp_dir().join("crowdscribe-demo");
    let data_dir = root.join("data");
    let synth = generate(&SynthConfig {
        seed: 5,
        scale: 0.12,
        ..SynthConfig::default()
    })?;
    let files = write_corpus(&synth, &data_dir)?;
    println!("corpus release written under {}", data_dir.display());

    let cfg = PipelineConfig {
        response_path: Some(files.response_path),
        reference_path: Some(files.reference_path),
        meta_path: Some(files.meta_path),
        emissions_dir: Some(files.emissions_dir),
        out_dir: root.join("out"),
        seed: 23,
        ..PipelineConfig::default()
    };
    let run = end_to_end(&cfg)?;

    println!("\nartifacts:");
    for f in &run.files {
        println!("  {}", f.display());
    }

    let r = &run.report;
    println!(
        "\nstrategy {:?}, alpha {:.2}, reject threshold {:.2} predicted errors",
        r.strategy, r.alpha, r.threshold
    );
    println!("\n  subset            raw twer   final twer   rejected");
    for (subset, outcome) in &r.per_subset {
        println!(
            "  {:<16} {:>8.2}%   {:>8.2}%   {:>5.1}%",
            format!("{subset:?}"),
            100.0 * outcome.raw.breakdown.twer(),
            100.0 * outcome.final_output.twer(),
            100.0 * outcome.reject_rate()
        );
    }
    let overall = &r.overall;
    println!(
        "  {:<16} {:>8.2}%   {:>8.2}%   {:>5.1}%",
        "pooled",
        100.0 * overall.raw.breakdown.twer(),
        100.0 * overall.final_output.twer(),
        100.0 * overall.reject_rate()
    );
    println!("\nfull tables live in {}", cfg.out_dir.join("report.md").display());
    Ok(())
}
