//! Sweep the cluster count k and locate the elbow where the within and
//! between distances stop improving.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example elbow_sweep
//! ```

use traffic_primitives::clustering::{detect_elbow, elbow_sweep};
use traffic_primitives::features::featurize_primitive;
use traffic_primitives::hdphmm::{extract_primitives, StateSequence};
use traffic_primitives::synth::generate_mixed_corpus;

fn main() -> anyhow::Result<()> {
    let corpus = generate_mixed_corpus(30, 21, 0.4, 0.2);
    let mut points = Vec::new();
    for labeled in &corpus {
        let seq = StateSequence {
            encounter_id: labeled.encounter.id.clone(),
            labels: labeled.truth_labels.clone(),
            log_joint: 0.0,
        };
        for prim in extract_primitives(&seq, &labeled.encounter, 0.2)? {
            points.push(featurize_primitive(&prim, 16)?.phi);
        }
    }

    let rows = elbow_sweep(&points, 2, 12, 5, 5)?;
    println!("{:>3} {:>12} {:>12} {:>12} {:>12} {:>12}", "k", "lambda_w", "lambda_b", "objective", "d_lambda_w", "d_lambda_b");
    for r in &rows {
        println!(
            "{:>3} {:>12.5} {:>12.4} {:>12.3} {:>12.5} {:>12.4}",
            r.k, r.lambda_w, r.lambda_b, r.objective, r.d_lambda_w, r.d_lambda_b
        );
    }
    match detect_elbow(&rows) {
        Some(k) => println!("\nobjective elbow detected at k = {k}"),
        None => println!("\nsweep too short to detect an elbow"),
    }
    Ok(())
}
