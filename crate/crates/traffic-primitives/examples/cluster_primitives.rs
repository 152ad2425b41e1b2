//! Featurize a synthetic corpus's primitives and group them with k-means;
//! report cluster shares and the within/between distances.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example cluster_primitives
//! ```

use traffic_primitives::clustering::{cluster_distribution, kmeans_fit_features};
use traffic_primitives::features::featurize_primitive;
use traffic_primitives::hdphmm::{extract_primitives, StateSequence};
use traffic_primitives::synth::generate_mixed_corpus;

fn main() -> anyhow::Result<()> {
    let corpus = generate_mixed_corpus(24, 11, 0.4, 0.2);

    // Segment along ground-truth phases and featurize every primitive.
    let mut features = Vec::new();
    for labeled in &corpus {
        let seq = StateSequence {
            encounter_id: labeled.encounter.id.clone(),
            labels: labeled.truth_labels.clone(),
            log_joint: 0.0,
        };
        for prim in extract_primitives(&seq, &labeled.encounter, 0.2)? {
            features.push(featurize_primitive(&prim, 20)?);
        }
    }
    println!(
        "{} primitives from {} encounters, feature dimension {}",
        features.len(),
        corpus.len(),
        features[0].phi.len()
    );

    let model = kmeans_fit_features(&features, 6, 99)?;
    println!(
        "k = {} clusters, objective {:.3}, lambda_w {:.5}, lambda_b {:.3}",
        model.k,
        model.objective,
        model.lambda_w.unwrap_or(f64::NAN),
        model.lambda_b.unwrap_or(f64::NAN)
    );
    println!("\ncluster shares:");
    for (cluster, count, fraction) in cluster_distribution(&model) {
        let bar: String = "#".repeat((fraction * 60.0).round() as usize);
        println!("  #{cluster:<2} {count:>4} ({:>5.1}%) {bar}", fraction * 100.0);
    }
    Ok(())
}
