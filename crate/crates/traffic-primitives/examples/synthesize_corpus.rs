//! Generate a labeled synthetic corpus covering all six scenario families
//! and write it as encounter CSVs with ground-truth sidecars.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example synthesize_corpus
//! ```

use traffic_primitives::encounter::write_encounter_csv;
use traffic_primitives::synth::{
    generate_encounter, write_truth_csv, ScenarioFamily, ScenarioSpec,
};

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("traffic-primitives-example-corpus");
    std::fs::create_dir_all(&out)?;

    for (i, family) in ScenarioFamily::ALL.into_iter().enumerate() {
        let spec = ScenarioSpec::new(family, 100 + i as u64);
        let labeled = generate_encounter(&spec)?;
        let enc = &labeled.encounter;
        write_encounter_csv(enc, out.join(format!("{}.csv", enc.id)))?;
        write_truth_csv(&labeled, out.join(format!("{}.truth.csv", enc.id)))?;
        println!(
            "{:<22} T = {:>3}, duration {:>5.1} s, {} ground-truth phases, min mutual distance {:>6.1} m",
            enc.id,
            enc.len(),
            enc.duration_s(),
            labeled.truth_boundaries.len() + 1,
            enc.min_mutual_distance(),
        );
    }

    println!("\ncorpus written to {}", out.display());
    Ok(())
}
