//! Run the whole pipeline — ingest, segment, featurize, cluster, report —
//! over a generated corpus and walk through the report.
//!
//! ```bash
//! cargo run --release -p traffic-primitives --example full_pipeline
//! ```

use traffic_primitives::encounter::write_encounter_csv;
use traffic_primitives::hdphmm::HdpHmmConfig;
use traffic_primitives::pipeline::{run_pipeline, PipelineConfig, SweepConfig};
use traffic_primitives::synth::generate_mixed_corpus;

fn main() -> anyhow::Result<()> {
    let base = std::env::temp_dir().join("traffic-primitives-example-pipeline");
    let input = base.join("input");
    let output = base.join("output");
    std::fs::create_dir_all(&input)?;

    for labeled in generate_mixed_corpus(18, 3, 0.3, 0.15) {
        write_encounter_csv(
            &labeled.encounter,
            input.join(format!("{}.csv", labeled.encounter.id)),
        )?;
    }

    let cfg = PipelineConfig {
        input_dir: input,
        output_dir: output.clone(),
        rescale_l: 16,
        hdphmm: HdpHmmConfig {
            truncation_l: 12,
            iterations: 100,
            ..HdpHmmConfig::default()
        },
        cluster_k: 6,
        sweep: Some(SweepConfig {
            k_min: 2,
            k_max: 10,
            seeds_per_k: 3,
        }),
        global_seed: 7,
        jobs: 0,
        ..PipelineConfig::default()
    };

    let report = run_pipeline(&cfg)?;

    println!(
        "{} of {} encounters qualified; {} primitives extracted",
        report.qualified_encounters, report.corpus_size, report.distributions.primitive_count
    );
    println!(
        "primitives per encounter: mean {:.2}, median {:.1}",
        report.distributions.mean_primitives_per_encounter,
        report.distributions.median_primitives_per_encounter
    );
    println!(
        "clustering: k = {}, objective {:.3}, lambda_w {:.5}, lambda_b {:.3}",
        report.cluster_k,
        report.cluster_objective,
        report.lambda_w.unwrap_or(f64::NAN),
        report.lambda_b.unwrap_or(f64::NAN)
    );
    if let Some(k) = report.elbow_k {
        println!("sweep elbow at k = {k}");
    }
    println!("\ncluster distribution:");
    for share in &report.cluster_distribution {
        println!(
            "  #{:<2} {:>4} primitives ({:>5.1}%)",
            share.cluster,
            share.count,
            share.fraction * 100.0
        );
    }
    println!("\nartifacts in {}:", output.display());
    for name in [
        "encounters/",
        "primitives.jsonl",
        "features.csv",
        "centroids.csv",
        "assignments.csv",
        "sweep.csv",
        "duration_histogram.csv",
        "primitives_per_encounter.csv",
        "cluster_distribution.csv",
        "run_meta.json",
        "report.json",
    ] {
        println!("  {name}");
    }
    Ok(())
}
