//! Turn a driving primitive into its fixed-size feature representation:
//! rescale to l samples, build the position/speed cross-distance matrices,
//! normalize, flatten. Also exports the matrices as plain-text grids for
//! heatmap plotting.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example featurize_primitive
//! ```

use traffic_primitives::features::{
    cross_distance_matrices, flatten_features, normalize_matrices, rescale_primitive,
    write_matrix_grids,
};
use traffic_primitives::hdphmm::{extract_primitives, StateSequence};
use traffic_primitives::synth::{generate_encounter, ScenarioFamily, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let labeled = generate_encounter(&ScenarioSpec::new(ScenarioFamily::VerticalCross, 5))?;
    // Use the ground-truth phases as the segmentation for this demo.
    let seq = StateSequence {
        encounter_id: labeled.encounter.id.clone(),
        labels: labeled.truth_labels.clone(),
        log_joint: 0.0,
    };
    let primitive = extract_primitives(&seq, &labeled.encounter, 0.2)?
        .into_iter()
        .next()
        .expect("one primitive per phase");

    println!(
        "primitive: encounter {}, samples [{}, {}], {:.1} s",
        primitive.encounter_id,
        primitive.start,
        primitive.end,
        primitive.duration_s()
    );

    let l = 50;
    let rescaled = rescale_primitive(&primitive, l)?;
    let raw = cross_distance_matrices(&rescaled);
    println!(
        "cross-distance matrices {l}x{l}: max position distance {:.1} m, max speed gap {:.2} m/s",
        raw.m_p.max(),
        raw.m_v.max()
    );

    let normalized = normalize_matrices(raw);
    let vector = flatten_features(&normalized)?;
    println!(
        "feature vector length 2*l^2 = {} (first entries: {:.3}, {:.3}, {:.3})",
        vector.phi.len(),
        vector.phi[0],
        vector.phi[1],
        vector.phi[2]
    );

    let dir = std::env::temp_dir().join("traffic-primitives-example-features");
    std::fs::create_dir_all(&dir)?;
    let (mp_path, mv_path) = write_matrix_grids(&normalized, &dir)?;
    println!("\nheatmap grids written to:\n  {}\n  {}", mp_path.display(), mv_path.display());
    Ok(())
}
