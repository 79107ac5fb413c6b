//! Blind signal-to-noise estimation from raw samples.
//!
//! Synthesizes speech-shaped signals (gamma-distributed amplitudes) buried
//! in gaussian noise at known levels, then recovers the SNR with the
//! waveform-amplitude-distribution estimator. No reference signal is needed,
//! which is exactly the situation with crowdsourced recordings; `wav_snr`
//! applies the same estimator straight to a wav file.
//!
//! ```bash
//! cargo run --example wada_snr
//! ```

use crowdscribe::snr::wada_snr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gamma(0.4, 1) draw; speech amplitudes are well modeled by this shape.
fn sample_gamma04(rng: &mut ChaCha8Rng) -> f64 {
    let a = 0.4f64;
    let c = (std::f64::consts::E + a) / std::f64::consts::E;
    loop {
        let u: f64 = rng.gen_range(1e-16..1.0);
        let v: f64 = rng.gen_range(1e-16..1.0);
        let p = c * u;
        if p <= 1.0 {
            let x = p.powf(1.0 / a);
            if v <= (-x).exp() {
                return x;
            }
        } else {
            let x = -((c - p) / a).ln();
            if v <= x.powf(a - 1.0) {
                return x;
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-16..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Speech-plus-noise samples mixed at a chosen SNR.
fn mixture(snr_db: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Signed gamma amplitudes have E[x^2] = a(a + 1) = 0.56.
    let speech_power = 0.4 * 1.4;
    let noise_sigma = (speech_power / 10f64.powf(snr_db / 10.0)).sqrt();
    (0..n)
        .map(|_| {
            let s = sample_gamma04(rng) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            s + gaussian(rng) * noise_sigma
        })
        .collect()
}

fn main() -> crowdscribe::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let seconds = 12.5;
    let sample_rate = 16_000;
    let n = (seconds * sample_rate as f64) as usize;

    println!("{seconds} s of synthetic speech at {sample_rate} Hz, five noise levels:\n");
    println!("  nominal SNR   estimated");
    for nominal in [-5.0, 0.0, 5.0, 10.0, 20.0] {
        let samples = mixture(nominal, n, &mut rng);
        let estimate = wada_snr(&samples, sample_rate)?;
        println!("  {nominal:>8.1} dB   {estimate:>6.1} dB");
    }

    println!("\npure noise, with no speech-shaped component at all:");
    let noise: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
    println!("  noise only    {:>6.1} dB", wada_snr(&noise, sample_rate)?);
    Ok(())
}
