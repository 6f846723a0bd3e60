//! Query-cost accounting and deployment tier assignment.
//!
//! ```text
//! cargo run --example cost_tiers
//! ```
//!
//! Explaining one prediction with leave-one-out occlusion costs `n + 1`
//! model calls for an `n`-word document, so deploying explanations
//! multiplies inference cost by roughly the mean document length. The tier
//! map turns a measured flip rate into an operating recommendation:
//! stability below 10% qualifies for regulatory use, below 20% for balanced
//! production use, and anything flakier should only be deployed where speed
//! matters more than explanation stability.

use exstab::cost::{assign_tier, cost_multiplier, cost_profile, Tier, TierThresholds};
use exstab::explain::{explanation_query_cost, ExplainerMethod, SurrogateParams};

fn main() -> exstab::Result<()> {
    // Per-explanation query budgets. Occlusion scales with document length;
    // the sampled surrogate is flat.
    let params = SurrogateParams::default();
    println!("queries per explanation:");
    println!("  words   occlusion   surrogate");
    for words in [5usize, 15, 40, 120] {
        println!(
            "  {words:>5}   {:>9}   {:>9}",
            explanation_query_cost(ExplainerMethod::Loo, words, &params),
            explanation_query_cost(ExplainerMethod::Surrogate, words, &params),
        );
    }

    // The deployment multiplier: explaining every prediction on a corpus
    // averaging 19 words costs 20x plain inference; with a model priced at
    // 4x per call, 80x.
    println!("\ncost multipliers ((mean words + 1) * per-call cost):");
    for (mean_words, per_call) in [(19.0, 1.0), (19.0, 4.0), (59.0, 1.0)] {
        println!(
            "  mean {mean_words:>4} words @ {per_call}x/call -> {:.0}x",
            cost_multiplier(mean_words, per_call)?
        );
    }

    // Tier boundaries are strict upper bounds: a flip rate of exactly 0.10
    // is already out of the regulatory tier.
    let thresholds = TierThresholds::default();
    println!(
        "\ntiers (regulatory < {}, balanced < {}, speed_first otherwise):",
        thresholds.regulatory_max, thresholds.balanced_max
    );
    for rate in [0.05, 0.0999, 0.10, 0.15, 0.20, 0.47] {
        println!("  flip rate {rate:<6} -> {}", assign_tier(rate, &thresholds)?);
    }
    assert_eq!(assign_tier(0.10, &thresholds)?, Tier::Balanced);
    assert_eq!(assign_tier(0.20, &thresholds)?, Tier::SpeedFirst);

    // Three models as they would appear in a report: same corpus, very
    // different stability and price points.
    println!("\nexample fleet on a 19-word corpus:");
    for (name, per_call, flip_rate) in [
        ("compact-classifier", 1.0, 0.083),
        ("mid-tier-classifier", 4.0, 0.149),
        ("completion-model", 20.0, 0.470),
    ] {
        let profile = cost_profile(name, 19.0, per_call, flip_rate, thresholds)?;
        println!(
            "  {:<20} flip {:>5.3}  cost {:>4.0}x  tier {}",
            profile.model, profile.flip_rate, profile.cost_multiplier, profile.tier
        );
    }
    Ok(())
}
