//! Thin CLI over the traffic-primitives library. Each subcommand maps to
//! one pipeline stage; `run` executes the whole pipeline from a JSON
//! config.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use traffic_primitives::clustering;
use traffic_primitives::encounter::{
    load_encounter_csv, project_to_local_frame, qualify_encounter, write_encounter_csv, Frame,
};
use traffic_primitives::features;
use traffic_primitives::hdphmm::{self, HdpHmmConfig};
use traffic_primitives::pipeline::{self, PipelineConfig};
use traffic_primitives::synth;

#[derive(Parser)]
#[command(
    name = "traffic-primitives",
    about = "Decompose two-vehicle driving encounters into clustered driving primitives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load raw encounter CSVs, project to the local metric frame, qualify,
    /// and write the survivors.
    Ingest {
        #[command(flatten)]
        common: CommonOpts,
        /// Directory of encounter CSVs.
        #[arg(long)]
        input: PathBuf,
        /// Directory for projected encounter CSVs.
        #[arg(long)]
        output: PathBuf,
        /// Linearly resample irregular inputs to this rate instead of
        /// rejecting them.
        #[arg(long)]
        resample_hz: Option<f64>,
    },
    /// Generate a labeled synthetic corpus (encounter CSVs plus
    /// `.truth.csv` sidecars).
    Synth {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        output: PathBuf,
        /// Number of encounters, cycling through the six families.
        #[arg(long, default_value_t = 30)]
        count: usize,
        /// Position noise std in meters.
        #[arg(long, default_value_t = synth::DEFAULT_NOISE_STD_POS)]
        noise_pos: f64,
        /// Speed noise std in m/s.
        #[arg(long, default_value_t = synth::DEFAULT_NOISE_STD_SPEED)]
        noise_speed: f64,
    },
    /// Segment projected encounters into primitives (writes
    /// `primitives.jsonl`).
    Segment {
        #[command(flatten)]
        common: CommonOpts,
        /// Directory of projected encounter CSVs.
        #[arg(long)]
        input: PathBuf,
        /// Output JSONL path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Rescale and featurize primitives (writes `features.csv`).
    Featurize {
        #[command(flatten)]
        common: CommonOpts,
        /// Directory of projected encounter CSVs.
        #[arg(long)]
        encounters: PathBuf,
        /// Primitives JSONL from `segment`.
        #[arg(long)]
        primitives: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Also export per-primitive feature matrices as plain-text grids
        /// into this directory.
        #[arg(long)]
        matrices: Option<PathBuf>,
    },
    /// Cluster feature vectors with k-means (writes centroid and
    /// assignment CSVs).
    Cluster {
        #[command(flatten)]
        common: CommonOpts,
        /// Features CSV from `featurize`.
        #[arg(long)]
        features: PathBuf,
        /// Output directory for `centroids.csv` and `assignments.csv`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Sweep k and report median quality metrics (writes `sweep.csv`).
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        seeds_per_k: Option<usize>,
    },
    /// Run the full pipeline from a JSON config.
    Run {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Rebuild `report.json` and the histogram CSVs from run artifacts.
    Report {
        #[command(flatten)]
        common: CommonOpts,
        /// Output directory of a previous `run`.
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn load_config(common: &CommonOpts) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.global_seed = seed;
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    // Die quietly when stdout closes early (e.g. piped into `head`),
    // like other line-oriented Unix tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest {
            common,
            input,
            output,
            resample_hz,
        } => {
            let cfg = load_config(&common)?;
            std::fs::create_dir_all(&output)?;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|e| e == "csv")
                        && !p
                            .file_name()
                            .is_some_and(|n| n.to_string_lossy().ends_with(".truth.csv"))
                })
                .collect();
            files.sort();
            if files.is_empty() {
                bail!("ingest: no encounter CSV files in {}", input.display());
            }
            let mut kept = 0usize;
            for path in &files {
                let mut enc = match (load_encounter_csv(path), resample_hz) {
                    (Ok(enc), _) => enc,
                    (Err(err), Some(hz)) => {
                        // Irregular input: retry through the resampler.
                        resample_from_csv(path, hz)
                            .with_context(|| format!("ingest: {err}"))?
                    }
                    (Err(err), None) => return Err(anyhow::Error::new(err).context("ingest")),
                };
                if enc.frame == Frame::GeographicDegrees {
                    enc = project_to_local_frame(&enc).context("ingest")?;
                }
                let verdict = qualify_encounter(&enc, cfg.min_encounter_s, cfg.max_mutual_m);
                match verdict.reason() {
                    None => {
                        write_encounter_csv(&enc, output.join(format!("{}.csv", enc.id)))
                            .context("ingest")?;
                        kept += 1;
                    }
                    Some(reason) => {
                        eprintln!("disqualified {} ({reason})", enc.id);
                    }
                }
            }
            println!("ingested {kept}/{} encounters into {}", files.len(), output.display());
            Ok(())
        }
        Command::Synth {
            common,
            output,
            count,
            noise_pos,
            noise_speed,
        } => {
            let cfg = load_config(&common)?;
            std::fs::create_dir_all(&output)?;
            let corpus =
                synth::generate_mixed_corpus(count, cfg.global_seed, noise_pos, noise_speed);
            for labeled in &corpus {
                let id = &labeled.encounter.id;
                write_encounter_csv(&labeled.encounter, output.join(format!("{id}.csv")))
                    .context("synth")?;
                synth::write_truth_csv(labeled, output.join(format!("{id}.truth.csv")))
                    .context("synth")?;
            }
            println!("wrote {count} encounters to {}", output.display());
            Ok(())
        }
        Command::Segment {
            common,
            input,
            output,
        } => {
            let cfg = load_config(&common)?;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|e| e == "csv")
                        && !p
                            .file_name()
                            .is_some_and(|n| n.to_string_lossy().ends_with(".truth.csv"))
                })
                .collect();
            files.sort();
            if files.is_empty() {
                bail!("segment: no encounter CSV files in {}", input.display());
            }
            let mut primitives = Vec::new();
            for path in &files {
                let enc = load_encounter_csv(path).context("segment")?;
                let mut hdp: HdpHmmConfig = cfg.hdphmm.clone();
                hdp.seed =
                    pipeline::derive_seed(cfg.global_seed, &format!("segment/{}", enc.id));
                let (_, seq) = hdphmm::fit_segmentation(&enc, &hdp)
                    .with_context(|| format!("segment: encounter {}", enc.id))?;
                primitives.extend(hdphmm::extract_primitives(&seq, &enc, cfg.min_primitive_s)?);
            }
            hdphmm::write_primitives_jsonl(&primitives, &output).context("segment")?;
            println!(
                "segmented {} encounters into {} primitives ({})",
                files.len(),
                primitives.len(),
                output.display()
            );
            Ok(())
        }
        Command::Featurize {
            common,
            encounters,
            primitives,
            output,
            matrices,
        } => {
            let cfg = load_config(&common)?;
            let records = hdphmm::read_primitives_jsonl(&primitives).context("featurize")?;
            let mut cache: std::collections::BTreeMap<String, traffic_primitives::encounter::DrivingEncounter> =
                std::collections::BTreeMap::new();
            let mut vectors = Vec::with_capacity(records.len());
            for record in &records {
                if !cache.contains_key(&record.encounter_id) {
                    let loaded = load_encounter_csv(
                        encounters.join(format!("{}.csv", record.encounter_id)),
                    )
                    .with_context(|| format!("featurize: encounter {}", record.encounter_id))?;
                    cache.insert(record.encounter_id.clone(), loaded);
                }
                let enc = &cache[&record.encounter_id];
                if record.n >= enc.len() || record.m > record.n {
                    bail!(
                        "featurize: primitive [{}, {}] out of range for encounter {}",
                        record.m,
                        record.n,
                        record.encounter_id
                    );
                }
                let prim = traffic_primitives::encounter::DrivingPrimitive {
                    encounter_id: record.encounter_id.clone(),
                    start: record.m,
                    end: record.n,
                    label: record.label,
                    samples: enc.samples[record.m..=record.n].to_vec(),
                    rate_hz: enc.rate_hz,
                };
                let rescaled = features::rescale_primitive(&prim, cfg.rescale_l)
                    .with_context(|| format!("featurize: encounter {}", record.encounter_id))?;
                let fm = features::normalize_matrices(features::cross_distance_matrices(&rescaled));
                if let Some(dir) = &matrices {
                    std::fs::create_dir_all(dir)?;
                    features::write_matrix_grids(&fm, dir).context("featurize")?;
                }
                vectors.push(features::flatten_features(&fm).context("featurize")?);
            }
            features::write_feature_csv(&vectors, &output).context("featurize")?;
            println!("featurized {} primitives into {}", vectors.len(), output.display());
            Ok(())
        }
        Command::Cluster {
            common,
            features: features_path,
            output,
            k,
        } => {
            let cfg = load_config(&common)?;
            let k = k.unwrap_or(cfg.cluster_k);
            let vectors = features::read_feature_csv(&features_path).context("cluster")?;
            let model = clustering::kmeans_fit_features(
                &vectors,
                k,
                pipeline::derive_seed(cfg.global_seed, "cluster"),
            )
            .context("cluster")?;
            std::fs::create_dir_all(&output)?;
            clustering::write_centroids_csv(&model, output.join("centroids.csv"))
                .context("cluster")?;
            let sources: Vec<_> = vectors.iter().map(|v| v.source.clone()).collect();
            clustering::write_assignments_csv(&model, &sources, output.join("assignments.csv"))
                .context("cluster")?;
            println!(
                "clustered {} primitives into k = {k} (objective {:.6})",
                vectors.len(),
                model.objective
            );
            for (cluster, count, fraction) in clustering::cluster_distribution(&model) {
                println!("cluster {cluster}: {count} ({:.2}%)", fraction * 100.0);
            }
            Ok(())
        }
        Command::Sweep {
            common,
            features: features_path,
            output,
            k_min,
            k_max,
            seeds_per_k,
        } => {
            let cfg = load_config(&common)?;
            let sweep_cfg = cfg.sweep.clone().unwrap_or_default();
            let k_min = k_min.unwrap_or(sweep_cfg.k_min);
            let seeds = seeds_per_k.unwrap_or(sweep_cfg.seeds_per_k);
            let vectors = features::read_feature_csv(&features_path).context("sweep")?;
            let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.phi.clone()).collect();
            let k_max = k_max
                .unwrap_or(sweep_cfg.k_max)
                .min(points.len().saturating_sub(1));
            let rows = clustering::elbow_sweep(&points, k_min, k_max, seeds, cfg.global_seed)
                .context("sweep")?;
            clustering::write_sweep_csv(&rows, &output).context("sweep")?;
            if let Some(elbow) = clustering::detect_elbow(&rows) {
                println!("elbow at k = {elbow}");
            }
            println!("swept k = {k_min}..={k_max} into {}", output.display());
            Ok(())
        }
        Command::Run { common } => {
            if common.config.is_none() {
                bail!("run: --config is required");
            }
            let cfg = load_config(&common)?;
            let report = pipeline::run_pipeline(&cfg)?;
            println!(
                "{} encounters -> {} primitives -> k = {} clusters",
                report.qualified_encounters,
                report.distributions.primitive_count,
                report.cluster_k
            );
            println!("report written to {}", cfg.output_dir.join("report.json").display());
            Ok(())
        }
        Command::Report { common: _, run_dir } => {
            let report = pipeline::rebuild_report(&run_dir)?;
            println!(
                "rebuilt report for {} primitives in {} encounters ({})",
                report.distributions.primitive_count,
                report.qualified_encounters,
                run_dir.join("report.json").display()
            );
            Ok(())
        }
    }
}

fn resample_from_csv(
    path: &std::path::Path,
    rate_hz: f64,
) -> anyhow::Result<traffic_primitives::encounter::DrivingEncounter> {
    // Permissive re-read: take the raw rows without the uniformity check,
    // then interpolate onto the requested grid.
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines.next().context("empty file")??;
    let frame = match header.trim_end() {
        "t,lat1,lon1,v1,lat2,lon2,v2" => Frame::GeographicDegrees,
        "t,x1,y1,v1,x2,y2,v2" => Frame::LocalMeters,
        other => bail!("unrecognized header `{other}`"),
    };
    let mut samples = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        if vals.len() != 7 {
            bail!("expected 7 fields in {}", path.display());
        }
        samples.push(traffic_primitives::encounter::TrajectorySample {
            t: vals[0],
            p1: [vals[1], vals[2]],
            v1: vals[3],
            p2: [vals[4], vals[5]],
            v2: vals[6],
        });
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "encounter".to_owned());
    Ok(traffic_primitives::encounter::resample_uniform(
        id, &samples, rate_hz, frame,
    )?)
}
