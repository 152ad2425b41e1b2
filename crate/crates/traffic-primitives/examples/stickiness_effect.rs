//! Show how the self-transition mass kappa controls state persistence: on
//! noisy single-phase data, larger kappa means fewer spurious change
//! points.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example stickiness_effect
//! ```

use traffic_primitives::hdphmm::{change_point_count, fit_segmentation, HdpHmmConfig};
use traffic_primitives::synth::{generate_encounter, ScenarioFamily, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    // Two parked vehicles, GPS jitter plus slow random-walk drift: a single
    // behavioral phase that tempts the sampler into splitting states.
    let spec = ScenarioSpec::new(ScenarioFamily::BothStill, 42)
        .with_noise(0.5, 0.2)
        .with_drift(0.15);
    let labeled = generate_encounter(&spec)?;

    println!("{:>8} {:>16} {:>16}", "kappa", "change points", "occupied states");
    for kappa in [0.0, 0.1, 1.0, 10.0, 100.0] {
        let mut changes = Vec::new();
        let mut states = Vec::new();
        for seed in 0..5 {
            let cfg = HdpHmmConfig {
                kappa,
                seed,
                iterations: 100,
                ..HdpHmmConfig::default()
            };
            let (_, seq) = fit_segmentation(&labeled.encounter, &cfg)?;
            changes.push(change_point_count(&seq.labels));
            let occupied: std::collections::BTreeSet<_> = seq.labels.iter().collect();
            states.push(occupied.len());
        }
        changes.sort_unstable();
        states.sort_unstable();
        println!(
            "{kappa:>8.1} {:>16} {:>16}   (medians over 5 seeds)",
            changes[2], states[2]
        );
    }
    Ok(())
}
