//! Segment one encounter into driving primitives with the sticky HDP-HMM
//! blocked Gibbs sampler and compare against the planted ground truth.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example segment_encounter
//! ```

use traffic_primitives::hdphmm::{
    extract_primitives, fit_segmentation_traced, HdpHmmConfig,
};
use traffic_primitives::synth::{generate_gaussian_phase_encounter, segmentation_accuracy};

fn main() -> anyhow::Result<()> {
    // Three behavioral phases with well-separated observation statistics.
    let phases = [
        ([0.0, 0.0, 20.0, 0.0, 3.0, 14.0], 120usize),
        ([15.0, -10.0, 35.0, 8.0, 12.0, 6.0], 90),
        ([-10.0, 15.0, 5.0, -8.0, 22.0, 26.0], 90),
    ];
    let labeled = generate_gaussian_phase_encounter("demo", &phases, 10.0, 1.0, 7)?;

    let cfg = HdpHmmConfig {
        seed: 11,
        ..HdpHmmConfig::default()
    };
    let (model, seq, trace) = fit_segmentation_traced(&labeled.encounter, &cfg)?;

    println!(
        "fit {} sweeps (burn-in {}), selected sweep {} with log joint {:.2}",
        trace.records.len(),
        trace.burn_in_sweeps,
        trace.selected_sweep,
        seq.log_joint
    );
    println!(
        "occupied states at selection: {}, gamma = {:.3}, alpha = {:.3}, kappa = {:.1}",
        trace.records[trace.selected_sweep].occupied_states,
        model.gamma,
        model.alpha,
        model.kappa
    );

    let primitives = extract_primitives(&seq, &labeled.encounter, 0.2)?;
    println!("\nextracted {} primitives:", primitives.len());
    for p in &primitives {
        println!(
            "  samples [{:>3}, {:>3}]  state {:>2}  duration {:>5.1} s",
            p.start,
            p.end,
            p.label,
            p.duration_s()
        );
    }

    let accuracy = segmentation_accuracy(&seq, &labeled)?;
    println!(
        "\nlabel accuracy vs planted truth (optimal label matching): {:.1}%",
        accuracy * 100.0
    );
    Ok(())
}
