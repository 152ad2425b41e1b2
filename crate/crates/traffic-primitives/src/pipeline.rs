//! End-to-end pipeline: ingest → segment → featurize → cluster → report.
//!
//! Every stage writes its artifacts under the configured output directory
//! and the whole run is deterministic given the configuration: encounter
//! files are processed in sorted order, per-encounter sampler seeds derive
//! from the global seed and the encounter id, and all float output uses
//! shortest round-trip formatting. Failures abort with the stage name and
//! the offending encounter id.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::clustering::{
    self, cluster_distribution, detect_elbow, elbow_sweep, kmeans_fit_features, ClusterModel,
    SweepRow,
};
use crate::encounter::{
    load_encounter_csv, project_to_local_frame, qualify_encounter, write_encounter_csv,
    DrivingEncounter, DrivingPrimitive, Frame,
};
use crate::error::{Error, Result};
use crate::features::{featurize_primitive, write_feature_csv, FeatureVector};
use crate::hdphmm::{
    extract_primitives, fit_segmentation, write_primitives_jsonl, HdpHmmConfig, PrimitiveRecord,
};

/// Stable FNV-1a hash for reproducible per-task seeds.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in base.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(PRIME);
    }
    for b in tag.as_bytes() {
        h = (h ^ *b as u64).wrapping_mul(PRIME);
    }
    h
}

/// Elbow-sweep stage settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seeds_per_k: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 50,
            seeds_per_k: 5,
        }
    }
}

/// Full pipeline configuration. Mirrors the JSON accepted by `--config`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Minimum encounter duration in seconds.
    pub min_encounter_s: f64,
    /// Maximum closest-approach distance in meters.
    pub max_mutual_m: f64,
    /// Minimum primitive duration in seconds.
    pub min_primitive_s: f64,
    /// Common rescaled primitive length l.
    pub rescale_l: usize,
    pub hdphmm: HdpHmmConfig,
    pub cluster_k: usize,
    /// Optional elbow sweep over k.
    pub sweep: Option<SweepConfig>,
    pub global_seed: u64,
    /// Worker threads for the parallel stages; 0 uses all cores.
    pub jobs: usize,
    /// Bin width of the primitive-duration histogram.
    pub duration_bin_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: PathBuf::new(),
            output_dir: PathBuf::new(),
            min_encounter_s: 10.0,
            max_mutual_m: 100.0,
            min_primitive_s: 0.2,
            rescale_l: 50,
            hdphmm: HdpHmmConfig::default(),
            cluster_k: 20,
            sweep: None,
            global_seed: 0,
            jobs: 1,
            duration_bin_s: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.input_dir.as_os_str().is_empty() || self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config(
                "input_dir and output_dir are required".to_owned(),
            ));
        }
        if !(self.min_encounter_s > 0.0)
            || !(self.max_mutual_m > 0.0)
            || !(self.min_primitive_s > 0.0)
            || !(self.duration_bin_s > 0.0)
        {
            return Err(Error::Config("thresholds must be positive".to_owned()));
        }
        if self.rescale_l < 2 {
            return Err(Error::Config("rescale_l must be at least 2".to_owned()));
        }
        if self.cluster_k == 0 {
            return Err(Error::Config("cluster_k must be positive".to_owned()));
        }
        self.hdphmm.validate()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisqualifiedEncounter {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DurationBin {
    pub start_s: f64,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CountBin {
    pub primitives: usize,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClusterShare {
    pub cluster: usize,
    pub count: usize,
    pub fraction: f64,
}

/// Histogram sections of the run report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Distributions {
    pub primitive_count: usize,
    pub mean_primitives_per_encounter: f64,
    pub median_primitives_per_encounter: f64,
    pub duration_histogram: Vec<DurationBin>,
    pub primitives_per_encounter: Vec<CountBin>,
}

/// Final artifact of a pipeline run, also serialized to `report.json`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunReport {
    pub corpus_size: usize,
    pub qualified_encounters: usize,
    pub disqualified: Vec<DisqualifiedEncounter>,
    #[serde(flatten)]
    pub distributions: Distributions,
    pub cluster_k: usize,
    pub cluster_objective: f64,
    pub lambda_w: Option<f64>,
    pub lambda_b: Option<f64>,
    pub cluster_distribution: Vec<ClusterShare>,
    pub sweep: Option<Vec<SweepRow>>,
    pub elbow_k: Option<usize>,
}

/// Metadata sidecar that lets `report` rebuild a report from artifacts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
struct RunMeta {
    corpus_size: usize,
    qualified: Vec<String>,
    disqualified: Vec<DisqualifiedEncounter>,
    cluster_k: usize,
    rescale_l: usize,
    duration_bin_s: f64,
}

/// Builds the primitive-count and duration histograms for a set of
/// primitive records over the qualified encounters.
pub fn report_distributions(
    records: &[PrimitiveRecord],
    qualified_ids: &[String],
    duration_bin_s: f64,
) -> Distributions {
    let primitive_count = records.len();

    let mut per_encounter: BTreeMap<&str, usize> = BTreeMap::new();
    for id in qualified_ids {
        per_encounter.insert(id.as_str(), 0);
    }
    for r in records {
        *per_encounter.entry(r.encounter_id.as_str()).or_insert(0) += 1;
    }
    let mut counts: Vec<usize> = per_encounter.values().copied().collect();
    counts.sort_unstable();
    let n_enc = counts.len();
    let mean = if n_enc == 0 {
        0.0
    } else {
        counts.iter().sum::<usize>() as f64 / n_enc as f64
    };
    let median = if n_enc == 0 {
        0.0
    } else if n_enc % 2 == 1 {
        counts[n_enc / 2] as f64
    } else {
        0.5 * (counts[n_enc / 2 - 1] + counts[n_enc / 2]) as f64
    };

    let max_count = counts.last().copied().unwrap_or(0);
    let min_count = counts.first().copied().unwrap_or(0);
    let mut count_bins = Vec::new();
    if n_enc > 0 {
        for c in min_count..=max_count {
            let hits = counts.iter().filter(|&&x| x == c).count();
            count_bins.push(CountBin {
                primitives: c,
                count: hits,
                fraction: hits as f64 / n_enc as f64,
            });
        }
    }

    let mut duration_bins = Vec::new();
    if primitive_count > 0 {
        let idx_of = |d: f64| (d / duration_bin_s).floor() as usize;
        let max_idx = records
            .iter()
            .map(|r| idx_of(r.duration_s))
            .max()
            .unwrap_or(0);
        let mut by_bin = vec![0usize; max_idx + 1];
        for r in records {
            by_bin[idx_of(r.duration_s)] += 1;
        }
        for (i, count) in by_bin.into_iter().enumerate() {
            duration_bins.push(DurationBin {
                start_s: i as f64 * duration_bin_s,
                count,
                fraction: count as f64 / primitive_count as f64,
            });
        }
    }

    Distributions {
        primitive_count,
        mean_primitives_per_encounter: mean,
        median_primitives_per_encounter: median,
        duration_histogram: duration_bins,
        primitives_per_encounter: count_bins,
    }
}

struct IngestOutcome {
    qualified: Vec<DrivingEncounter>,
    disqualified: Vec<DisqualifiedEncounter>,
    corpus_size: usize,
}

fn list_encounter_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
        let Some(name) = name else { continue };
        if name.ends_with(".csv") && !name.ends_with(".truth.csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn ingest_stage(cfg: &PipelineConfig) -> Result<IngestOutcome> {
    const STAGE: &str = "ingest";
    let files = list_encounter_files(&cfg.input_dir).map_err(|e| e.in_stage(STAGE, None))?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no encounter CSV files in {}",
            cfg.input_dir.display()
        ))
        .in_stage(STAGE, None));
    }
    let mut qualified = Vec::new();
    let mut disqualified = Vec::new();
    for path in &files {
        let enc = load_encounter_csv(path)
            .map_err(|e| e.in_stage(STAGE, path.file_stem().and_then(|s| s.to_str())))?;
        let id = enc.id.clone();
        let local = match enc.frame {
            Frame::GeographicDegrees => {
                project_to_local_frame(&enc).map_err(|e| e.in_stage(STAGE, Some(&id)))?
            }
            Frame::LocalMeters => enc,
        };
        let verdict = qualify_encounter(&local, cfg.min_encounter_s, cfg.max_mutual_m);
        match verdict.reason() {
            None => qualified.push(local),
            Some(reason) => disqualified.push(DisqualifiedEncounter {
                id,
                reason: reason.to_string(),
            }),
        }
    }
    if qualified.is_empty() {
        return Err(
            Error::Config("no encounter qualified for segmentation".to_owned())
                .in_stage(STAGE, None),
        );
    }
    Ok(IngestOutcome {
        qualified,
        disqualified,
        corpus_size: files.len(),
    })
}

fn segment_one(
    enc: &DrivingEncounter,
    cfg: &PipelineConfig,
) -> Result<Vec<DrivingPrimitive>> {
    let mut hdp = cfg.hdphmm.clone();
    hdp.seed = derive_seed(cfg.global_seed, &format!("segment/{}", enc.id));
    let (_, seq) = fit_segmentation(enc, &hdp)?;
    extract_primitives(&seq, enc, cfg.min_primitive_s)
}

/// Runs the full pipeline and writes all artifacts under
/// `cfg.output_dir`: projected encounters, `primitives.jsonl`,
/// `features.csv`, `centroids.csv`, `assignments.csv`, histogram CSVs,
/// optional `sweep.csv`, `run_meta.json` and `report.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::io(&cfg.output_dir, e).in_stage("setup", None))?;

    let ingest = ingest_stage(cfg)?;

    let enc_dir = cfg.output_dir.join("encounters");
    std::fs::create_dir_all(&enc_dir)
        .map_err(|e| Error::io(&enc_dir, e).in_stage("ingest", None))?;
    for enc in &ingest.qualified {
        write_encounter_csv(enc, enc_dir.join(format!("{}.csv", enc.id)))
            .map_err(|e| e.in_stage("ingest", Some(&enc.id)))?;
    }

    // Segment: embarrassingly parallel across encounters, merged in input
    // order.
    let per_encounter: Vec<Vec<DrivingPrimitive>> = run_parallel(
        cfg.jobs,
        &ingest.qualified,
        |enc| segment_one(enc, cfg).map_err(|e| e.in_stage("segment", Some(&enc.id))),
    )?;
    let primitives: Vec<DrivingPrimitive> = per_encounter.into_iter().flatten().collect();
    write_primitives_jsonl(&primitives, cfg.output_dir.join("primitives.jsonl"))
        .map_err(|e| e.in_stage("segment", None))?;

    // Featurize.
    let features: Vec<FeatureVector> = run_parallel(cfg.jobs, &primitives, |prim| {
        featurize_primitive(prim, cfg.rescale_l)
            .map_err(|e| e.in_stage("featurize", Some(&prim.encounter_id)))
    })?;
    write_feature_csv(&features, cfg.output_dir.join("features.csv"))
        .map_err(|e| e.in_stage("featurize", None))?;

    // Cluster.
    let k = cfg.cluster_k;
    let model = kmeans_fit_features(&features, k, derive_seed(cfg.global_seed, "cluster"))
        .map_err(|e| e.in_stage("cluster", None))?;
    clustering::write_centroids_csv(&model, cfg.output_dir.join("centroids.csv"))
        .map_err(|e| e.in_stage("cluster", None))?;
    let sources: Vec<_> = features.iter().map(|f| f.source.clone()).collect();
    clustering::write_assignments_csv(&model, &sources, cfg.output_dir.join("assignments.csv"))
        .map_err(|e| e.in_stage("cluster", None))?;

    // Optional sweep.
    let points: Vec<Vec<f64>> = features.iter().map(|f| f.phi.clone()).collect();
    let sweep_rows = match &cfg.sweep {
        Some(sc) => {
            let rows = elbow_sweep(
                &points,
                sc.k_min,
                sc.k_max.min(points.len().saturating_sub(1)),
                sc.seeds_per_k,
                cfg.global_seed,
            )
            .map_err(|e| e.in_stage("sweep", None))?;
            clustering::write_sweep_csv(&rows, cfg.output_dir.join("sweep.csv"))
                .map_err(|e| e.in_stage("sweep", None))?;
            Some(rows)
        }
        None => None,
    };

    // Report.
    let records: Vec<PrimitiveRecord> = primitives.iter().map(PrimitiveRecord::of).collect();
    let qualified_ids: Vec<String> = ingest.qualified.iter().map(|e| e.id.clone()).collect();
    let meta = RunMeta {
        corpus_size: ingest.corpus_size,
        qualified: qualified_ids.clone(),
        disqualified: ingest.disqualified.clone(),
        cluster_k: k,
        rescale_l: cfg.rescale_l,
        duration_bin_s: cfg.duration_bin_s,
    };
    write_json(&meta, cfg.output_dir.join("run_meta.json"))
        .map_err(|e| e.in_stage("report", None))?;

    let report = build_report(
        &meta,
        &records,
        &model,
        sweep_rows,
        &cfg.output_dir,
    )
    .map_err(|e| e.in_stage("report", None))?;
    Ok(report)
}

fn build_report(
    meta: &RunMeta,
    records: &[PrimitiveRecord],
    model: &ClusterModel,
    sweep: Option<Vec<SweepRow>>,
    output_dir: &Path,
) -> Result<RunReport> {
    let distributions = report_distributions(records, &meta.qualified, meta.duration_bin_s);
    let shares: Vec<ClusterShare> = cluster_distribution(model)
        .into_iter()
        .map(|(cluster, count, fraction)| ClusterShare {
            cluster,
            count,
            fraction,
        })
        .collect();
    let elbow_k = sweep.as_deref().and_then(detect_elbow);
    let report = RunReport {
        corpus_size: meta.corpus_size,
        qualified_encounters: meta.qualified.len(),
        disqualified: meta.disqualified.clone(),
        distributions,
        cluster_k: model.k,
        cluster_objective: model.objective,
        lambda_w: model.lambda_w,
        lambda_b: model.lambda_b,
        cluster_distribution: shares,
        sweep,
        elbow_k,
    };

    write_duration_histogram_csv(
        &report.distributions.duration_histogram,
        output_dir.join("duration_histogram.csv"),
    )?;
    write_count_histogram_csv(
        &report.distributions.primitives_per_encounter,
        output_dir.join("primitives_per_encounter.csv"),
    )?;
    write_cluster_distribution_csv(
        &report.cluster_distribution,
        output_dir.join("cluster_distribution.csv"),
    )?;
    write_json(&report, output_dir.join("report.json"))?;
    Ok(report)
}

/// Rebuilds the report from the artifacts of a previous run.
pub fn rebuild_report(output_dir: impl AsRef<Path>) -> Result<RunReport> {
    let dir = output_dir.as_ref();
    let meta: RunMeta = read_json(dir.join("run_meta.json"))?;
    let records = crate::hdphmm::read_primitives_jsonl(dir.join("primitives.jsonl"))?;
    let features = crate::features::read_feature_csv(dir.join("features.csv"))?;
    let assignments = clustering::read_assignments_csv(dir.join("assignments.csv"))?;
    if assignments.len() != features.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: features.len(),
        });
    }
    let points: Vec<Vec<f64>> = features.iter().map(|f| f.phi.clone()).collect();
    let labels: Vec<usize> = assignments.iter().map(|(_, c)| *c).collect();
    let model = clustering::model_from_assignments(&points, &labels, meta.cluster_k)?;
    let sweep_path = dir.join("sweep.csv");
    let sweep = if sweep_path.exists() {
        Some(clustering::read_sweep_csv(&sweep_path)?)
    } else {
        None
    };
    build_report(&meta, &records, &model, sweep, dir)
}

fn run_parallel<I, O>(
    jobs: usize,
    items: &[I],
    op: impl Fn(&I) -> Result<O> + Sync,
) -> Result<Vec<O>>
where
    I: Sync,
    O: Send,
{
    if jobs == 1 || items.len() <= 1 {
        return items.iter().map(op).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&op).collect())
}

fn write_json<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_duration_histogram_csv(bins: &[DurationBin], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "bin_start_s,count,fraction").map_err(|e| Error::io(path, e))?;
    for b in bins {
        writeln!(w, "{},{},{}", b.start_s, b.count, b.fraction).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn write_count_histogram_csv(bins: &[CountBin], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "primitives,count,fraction").map_err(|e| Error::io(path, e))?;
    for b in bins {
        writeln!(w, "{},{},{}", b.primitives, b.count, b.fraction)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn write_cluster_distribution_csv(shares: &[ClusterShare], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "cluster,count,fraction").map_err(|e| Error::io(path, e))?;
    for s in shares {
        writeln!(w, "{},{},{}", s.cluster, s.count, s.fraction)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
