//! Leave-one-out occlusion explanations, verified against a closed form.
//!
//! ```text
//! cargo run --example loo_explain
//! ```
//!
//! The explainer queries the model once with the full text (fixing the
//! predicted class and its probability `p`), then once per word with that
//! word removed; word `i` scores `p - P(class | text without i)`. For the
//! builtin toy model — `P(label_0) = sigmoid(sum of word weights)` — those
//! scores have an exact closed form, so this example can check the
//! explainer to machine precision.

use exstab::core::{Document, LabelSet};
use exstab::explain::{explain_loo, loo_query_texts};
use exstab::modelclient::{sigmoid, TextClassifier, ToyModel};

fn main() -> exstab::Result<()> {
    let model = ToyModel::new(
        "toy-sentiment",
        LabelSet::new(["positive", "negative"])?,
        [
            ("good".to_string(), 1.5),
            ("camera".to_string(), 0.4),
            ("slow".to_string(), -0.8),
        ],
    )?;

    let doc = Document::new("demo", "good camera but slow screen")?;
    let full = model.predict(&doc.text)?;
    println!("text      : {:?}", doc.text);
    println!(
        "prediction: {} (p = {:.6})\n",
        model.label_set().label(full.predicted_index),
        full.confidence()
    );

    // One query for the full text, one per occlusion. For the 5-word
    // document that is 6 queries; a single-word document would occlude to
    // the literal placeholder "[EMPTY]" instead of an empty string.
    let queries = loo_query_texts(&doc);
    println!("queries sent ({}):", queries.len());
    for q in &queries {
        println!("  {q:?}");
    }

    let explanation = explain_loo(&model, &doc)?;
    println!("\nword importances (score = p_full - p_occluded):");
    for &i in explanation.ranking() {
        println!("  {:<8} {:+.6}", doc.words[i], explanation.scores()[i]);
    }

    // Closed form: the full logit is 1.5 + 0.4 - 0.8 = 1.1; removing word i
    // subtracts its weight, so score_i = sigmoid(1.1) - sigmoid(1.1 - w_i).
    let weights = [1.5, 0.4, 0.0, -0.8, 0.0];
    let p_full = sigmoid(1.1);
    println!("\nclosed-form check:");
    for (i, w) in weights.iter().enumerate() {
        let expected = p_full - sigmoid(1.1 - w);
        let got = explanation.scores()[i];
        assert!(
            (expected - got).abs() < 1e-12,
            "word {i}: {expected} vs {got}"
        );
        println!(
            "  {:<8} expected {:+.6}, explainer {:+.6}  (diff < 1e-12)",
            doc.words[i], expected, got
        );
    }

    // The most important word is the one whose removal hurts the predicted
    // class most — here "good", carrying the largest positive weight.
    let (top_index, top_score) = explanation.top1();
    println!(
        "\ntop word  : {:?} ({:+.6})",
        doc.words[top_index], top_score
    );
    assert_eq!(doc.words[top_index], "good");
    Ok(())
}
