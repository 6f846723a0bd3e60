//! Paired bootstrap confidence intervals for stability metrics.
//!
//! ```text
//! cargo run --example bootstrap_ci
//! ```
//!
//! The flip rate over N perturbation cases is a mean of paired 0/1
//! outcomes, so its uncertainty is estimated by resampling whole cases with
//! replacement — each resampled case keeps both of its sides — and taking
//! nearest-rank percentiles of the resampled statistic. The bootstrap is
//! seeded: the same records and seed give the same interval on every
//! platform, every time.

use exstab::metrics::{paired_bootstrap_ci, BootstrapParams};
use exstab::seed::rng_from_seed;
use rand::Rng;

fn main() -> exstab::Result<()> {
    // Simulate 200 evaluated cases from a process whose true flip
    // probability is 0.15. Each item is one case's (flipped?, label
    // consistent?) pair — resampling items preserves the pairing.
    let mut rng = rng_from_seed(7);
    let cases: Vec<(f64, bool)> = (0..200)
        .map(|_| {
            let flipped = rng.random_range(0.0..1.0) < 0.15;
            let consistent = rng.random_range(0.0..1.0) < 0.95;
            (if flipped { 1.0 } else { 0.0 }, consistent)
        })
        .collect();
    let point = cases.iter().map(|(f, _)| f).sum::<f64>() / cases.len() as f64;
    println!("cases          : {}", cases.len());
    println!("observed rate  : {point:.4} (true rate 0.15)\n");

    let params = BootstrapParams::default();
    let flip_rate = |sample: &[&(f64, bool)]| {
        Some(sample.iter().map(|(f, _)| *f).sum::<f64>() / sample.len() as f64)
    };
    let (lo, hi) = paired_bootstrap_ci(&cases, flip_rate, params.iterations, params.level, 42)?;
    println!(
        "bootstrap CI   : [{lo:.4}, {hi:.4}] at {:.0}% with {} resamples",
        params.level * 100.0,
        params.iterations
    );
    assert!(lo <= point && point <= hi, "interval brackets the estimate");

    // Deterministic: same data, same seed, same interval.
    let (lo2, hi2) = paired_bootstrap_ci(&cases, flip_rate, params.iterations, params.level, 42)?;
    assert_eq!((lo, hi), (lo2, hi2));
    println!("same seed      : identical interval (checked)");

    // A different seed moves the interval a little; the point estimate is
    // untouched because only the resampling changes.
    let (lo3, hi3) = paired_bootstrap_ci(&cases, flip_rate, params.iterations, params.level, 43)?;
    println!("other seed     : [{lo3:.4}, {hi3:.4}]\n");

    // Statistics can be partial: a conditional rate is undefined on
    // resamples with an empty subset, and those resamples are redrawn. Here,
    // the flip rate among label-consistent cases only.
    let consistent_flip_rate = |sample: &[&(f64, bool)]| {
        let subset: Vec<f64> = sample
            .iter()
            .filter(|(_, c)| *c)
            .map(|(f, _)| *f)
            .collect();
        if subset.is_empty() {
            None // undefined on this resample; the bootstrap redraws
        } else {
            Some(subset.iter().sum::<f64>() / subset.len() as f64)
        }
    };
    let (clo, chi) =
        paired_bootstrap_ci(&cases, consistent_flip_rate, params.iterations, params.level, 42)?;
    println!("conditional    : flip rate among consistent cases in [{clo:.4}, {chi:.4}]");

    // Narrow data, wide honesty: with very few cases the interval widens.
    let few = &cases[..12];
    let (wlo, whi) = paired_bootstrap_ci(few, flip_rate, params.iterations, params.level, 42)?;
    println!("only 12 cases  : [{wlo:.4}, {whi:.4}] — small samples stay visibly uncertain");
    Ok(())
}
