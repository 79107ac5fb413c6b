//! Predicting transcription errors before seeing a reference.
//!
//! Trains the utterance-level regressor on a small synthetic corpus, then
//! scores unseen submissions: each gets a predicted word-error count and an
//! accept or reject decision against the calibrated threshold. Rejected
//! submissions turn out to be far worse than accepted ones.
//!
//! ```bash
//! cargo run --example expected_errors
//! ```

use std::collections::BTreeMap;

use crowdscribe::confidence::Decision;
use crowdscribe::corpus::Subset;
use crowdscribe::metrics::{breakdown, ErrorBreakdown};
use crowdscribe::pipeline::{score_corpus, train_models, EmissionProvider, PipelineConfig};
use crowdscribe::synth::{generate, SynthConfig};

fn main() -> crowdscribe::Result<()> {
    let synth = generate(&SynthConfig {
        seed: 41,
        scale: 0.2,
        ..SynthConfig::default()
    })?;
    let cfg = PipelineConfig::default();
    let emissions = EmissionProvider::Memory(synth.emissions.clone());

    let models = train_models(&synth.corpus, &cfg, &emissions)?;
    let gbm = &models.utterance_model.gbm;
    println!(
        "utterance regressor: {} trees, training MSE {:.2} -> {:.2}",
        gbm.trees.len(),
        gbm.training_loss.first().unwrap_or(&f64::NAN),
        gbm.training_loss.last().unwrap_or(&f64::NAN)
    );
    println!(
        "reject threshold: {:.2} predicted errors (calibrated to a {:.1}% reject rate)",
        models.utterance_model.threshold,
        100.0 * cfg.target_reject_rate
    );

    // Score a subset the models never trained on.
    let eval = [Subset::TestOther];
    let scored = score_corpus(&synth.corpus, &eval, &cfg, &models, &emissions)?;
    let split = synth.corpus.split(&eval);

    // Compare predictions against the actual error counts hiding in the
    // references.
    let mut pools: BTreeMap<&str, (ErrorBreakdown, usize, f64)> = BTreeMap::new();
    let mut sample = Vec::new();
    for s in &scored {
        let utt = split.utterance(&s.utterance_id).expect("scored utterance exists");
        let reference = utt.reference.as_ref().expect("synthetic data is fully referenced");
        let response = split
            .responses_for(&s.utterance_id)
            .iter()
            .find(|r| r.worker_id == s.worker_id && r.submit_order == s.submit_order)
            .expect("scored response exists");
        let b = breakdown(&response.text, reference)?;
        let key = match s.decision {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        };
        let entry = pools.entry(key).or_default();
        entry.0.merge(&b);
        entry.1 += 1;
        entry.2 += s.predicted_errors;
        if sample.len() < 4 && s.decision == Decision::Reject {
            sample.push((s.predicted_errors, b.errors(), s.utterance_id.clone()));
        }
    }

    println!("\ndecision pools on {:?}:", eval[0]);
    for (key, (pool, n, pred_sum)) in &pools {
        println!(
            "  {key:<7} {n:>4} responses  predicted {:>5.2} errors/response  actual twer {:>5.2}%",
            pred_sum / *n as f64,
            100.0 * pool.twer()
        );
    }

    println!("\na few rejected submissions:");
    for (pred, actual, utt) in &sample {
        println!("  {utt}: predicted {pred:.1} errors, reference shows {actual}");
    }
    Ok(())
}
