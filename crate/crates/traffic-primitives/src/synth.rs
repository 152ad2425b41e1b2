//! Labeled synthetic encounters and brute-force oracles.
//!
//! Real encounter corpora carry no ground truth, so testing the
//! segmentation and clustering stages needs generated data with known
//! answers. Two generators live here: piecewise-kinematic scenario families
//! mirroring common two-vehicle situations (each phase analytic, so plan
//! oracles are closed-form), and a direct Gaussian-phase generator whose
//! observations come straight from a hidden-state sequence. Alongside them
//! sit the measurement and oracle routines: optimal-assignment label
//! accuracy and exhaustive-enumeration k-means.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::encounter::{DrivingEncounter, Frame, TrajectorySample};
use crate::error::{Error, Result};
use crate::hdphmm::StateSequence;

/// The six scenario families of two-vehicle encounters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ScenarioFamily {
    /// Both vehicles hold position for the whole encounter.
    BothStill,
    /// The vehicles cross perpendicular paths, timed to meet mid-encounter.
    VerticalCross,
    /// One vehicle follows the other, cruising then braking together.
    SameDirection,
    /// The vehicles pass each other head-on in adjacent lanes.
    OppositeDirection,
    /// One vehicle drives past (straight, turn, straight) a parked one.
    OneMovingOneStill,
    /// Leader goes straight; the follower goes straight and then turns off.
    FollowThenTurn,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 6] = [
        ScenarioFamily::BothStill,
        ScenarioFamily::VerticalCross,
        ScenarioFamily::SameDirection,
        ScenarioFamily::OppositeDirection,
        ScenarioFamily::OneMovingOneStill,
        ScenarioFamily::FollowThenTurn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioFamily::BothStill => "both_still",
            ScenarioFamily::VerticalCross => "vertical_cross",
            ScenarioFamily::SameDirection => "same_direction",
            ScenarioFamily::OppositeDirection => "opposite_direction",
            ScenarioFamily::OneMovingOneStill => "one_moving_one_still",
            ScenarioFamily::FollowThenTurn => "follow_then_turn",
        }
    }
}

/// Motion of one vehicle during one phase.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum MotionPhase {
    /// Hold position with zero speed.
    Stationary,
    /// Constant speed along the current heading.
    Cruise,
    /// Constant acceleration (m/s²) along the current heading; speed clamps
    /// at zero and the vehicle then holds position.
    Accelerate { rate: f64 },
    /// Constant-radius turn at constant speed. Positive radius, `left`
    /// selects the turn direction.
    Turn { radius: f64, left: bool },
}

/// One ground-truth segment: simultaneous motion phases for both vehicles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhasePlan {
    pub duration_s: f64,
    pub veh1: MotionPhase,
    pub veh2: MotionPhase,
}

/// Initial kinematic state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VehicleStart {
    pub position: [f64; 2],
    /// Heading in radians, counterclockwise from east.
    pub heading: f64,
    /// Initial speed, m/s.
    pub speed: f64,
}

/// Full recipe for one synthetic encounter.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioSpec {
    pub family: ScenarioFamily,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Std of i.i.d. Gaussian noise added to each position coordinate (m).
    pub noise_std_pos: f64,
    /// Std of i.i.d. Gaussian noise added to each speed (m/s).
    pub noise_std_speed: f64,
    /// Per-step std of a random-walk position drift (m); models slow GPS
    /// wander. Zero keeps plan oracles exact.
    pub drift_std_pos: f64,
    pub start1: VehicleStart,
    pub start2: VehicleStart,
    /// Ground-truth segments; durations must sum to `duration_s`.
    pub segment_plan: Vec<PhasePlan>,
    pub seed: u64,
}

/// Default sensor-scale noise: 0.5 m position, 0.2 m/s speed.
pub const DEFAULT_NOISE_STD_POS: f64 = 0.5;
pub const DEFAULT_NOISE_STD_SPEED: f64 = 0.2;

impl ScenarioSpec {
    /// Canonical 12 s, 10 Hz scenario of the given family with default
    /// noise. Plans stay within 100 m of mutual distance at some point, so
    /// zero-noise instances always qualify.
    pub fn new(family: ScenarioFamily, seed: u64) -> Self {
        use MotionPhase::*;
        let duration_s = 12.0;
        let (start1, start2, segment_plan): (VehicleStart, VehicleStart, Vec<PhasePlan>) =
            match family {
                ScenarioFamily::BothStill => (
                    VehicleStart { position: [-7.5, 0.0], heading: 0.0, speed: 0.0 },
                    VehicleStart { position: [7.5, 0.0], heading: 0.0, speed: 0.0 },
                    vec![PhasePlan { duration_s, veh1: Stationary, veh2: Stationary }],
                ),
                ScenarioFamily::VerticalCross => (
                    VehicleStart { position: [-48.0, 0.0], heading: 0.0, speed: 8.0 },
                    VehicleStart {
                        position: [0.0, -48.0],
                        heading: std::f64::consts::FRAC_PI_2,
                        speed: 8.0,
                    },
                    vec![PhasePlan { duration_s, veh1: Cruise, veh2: Cruise }],
                ),
                ScenarioFamily::SameDirection => (
                    VehicleStart { position: [0.0, 0.0], heading: 0.0, speed: 10.0 },
                    VehicleStart { position: [-20.0, 3.5], heading: 0.0, speed: 10.0 },
                    vec![
                        PhasePlan { duration_s: 6.0, veh1: Cruise, veh2: Cruise },
                        PhasePlan {
                            duration_s: 6.0,
                            veh1: Accelerate { rate: -0.8 },
                            veh2: Accelerate { rate: -0.8 },
                        },
                    ],
                ),
                ScenarioFamily::OppositeDirection => (
                    VehicleStart { position: [-60.0, 2.0], heading: 0.0, speed: 12.0 },
                    VehicleStart {
                        position: [40.0, -2.0],
                        heading: std::f64::consts::PI,
                        speed: 4.0,
                    },
                    vec![PhasePlan { duration_s, veh1: Cruise, veh2: Cruise }],
                ),
                ScenarioFamily::OneMovingOneStill => (
                    VehicleStart { position: [-40.0, 0.0], heading: 0.0, speed: 6.0 },
                    VehicleStart { position: [0.0, 10.0], heading: 0.0, speed: 0.0 },
                    vec![
                        PhasePlan { duration_s: 4.0, veh1: Cruise, veh2: Stationary },
                        PhasePlan {
                            duration_s: 4.0,
                            veh1: Turn { radius: 12.0, left: true },
                            veh2: Stationary,
                        },
                        PhasePlan { duration_s: 4.0, veh1: Cruise, veh2: Stationary },
                    ],
                ),
                ScenarioFamily::FollowThenTurn => (
                    VehicleStart { position: [10.0, 0.0], heading: 0.0, speed: 8.0 },
                    VehicleStart { position: [-10.0, 0.0], heading: 0.0, speed: 8.0 },
                    vec![
                        PhasePlan { duration_s: 6.0, veh1: Cruise, veh2: Cruise },
                        PhasePlan {
                            duration_s: 6.0,
                            veh1: Cruise,
                            veh2: Turn { radius: 20.0, left: false },
                        },
                    ],
                ),
            };
        Self {
            family,
            duration_s,
            rate_hz: 10.0,
            noise_std_pos: DEFAULT_NOISE_STD_POS,
            noise_std_speed: DEFAULT_NOISE_STD_SPEED,
            drift_std_pos: 0.0,
            start1,
            start2,
            segment_plan,
            seed,
        }
    }

    pub fn with_noise(mut self, pos: f64, speed: f64) -> Self {
        self.noise_std_pos = pos;
        self.noise_std_speed = speed;
        self
    }

    pub fn with_drift(mut self, drift_std_pos: f64) -> Self {
        self.drift_std_pos = drift_std_pos;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.rate_hz > 0.0) {
            return Err(Error::Scenario("duration and rate must be positive".into()));
        }
        if self.segment_plan.is_empty() {
            return Err(Error::Scenario("empty segment plan".into()));
        }
        if self.segment_plan.iter().any(|p| !(p.duration_s > 0.0)) {
            return Err(Error::Scenario("phase durations must be positive".into()));
        }
        let total: f64 = self.segment_plan.iter().map(|p| p.duration_s).sum();
        if (total - self.duration_s).abs() > 1e-9 {
            return Err(Error::Scenario(format!(
                "segment plan sums to {total} s, expected {} s",
                self.duration_s
            )));
        }
        if self.noise_std_pos < 0.0 || self.noise_std_speed < 0.0 || self.drift_std_pos < 0.0 {
            return Err(Error::Scenario("noise stds must be nonnegative".into()));
        }
        for p in &self.segment_plan {
            for phase in [p.veh1, p.veh2] {
                if let MotionPhase::Turn { radius, .. } = phase {
                    if !(radius > 0.0) {
                        return Err(Error::Scenario("turn radius must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A synthetic encounter with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEncounter {
    pub encounter: DrivingEncounter,
    /// Sample indices at which the phase id changes; strictly increasing,
    /// within `[1, T-1]`.
    pub truth_boundaries: Vec<usize>,
    /// Per-sample phase id.
    pub truth_labels: Vec<usize>,
}

#[derive(Clone, Copy)]
struct VehicleState {
    position: [f64; 2],
    heading: f64,
    speed: f64,
}

/// Closed-form state after `tau` seconds inside one phase.
fn advance(state: VehicleState, phase: MotionPhase, tau: f64) -> VehicleState {
    let dir = [state.heading.cos(), state.heading.sin()];
    match phase {
        MotionPhase::Stationary => VehicleState {
            speed: 0.0,
            ..state
        },
        MotionPhase::Cruise => VehicleState {
            position: [
                state.position[0] + state.speed * tau * dir[0],
                state.position[1] + state.speed * tau * dir[1],
            ],
            ..state
        },
        MotionPhase::Accelerate { rate } => {
            // Clamp at zero speed; the vehicle holds position afterwards.
            let stop_tau = if rate < 0.0 { -state.speed / rate } else { f64::INFINITY };
            let tau_moving = tau.min(stop_tau);
            let dist = state.speed * tau_moving + 0.5 * rate * tau_moving * tau_moving;
            VehicleState {
                position: [
                    state.position[0] + dist * dir[0],
                    state.position[1] + dist * dir[1],
                ],
                heading: state.heading,
                speed: (state.speed + rate * tau).max(0.0),
            }
        }
        MotionPhase::Turn { radius, left } => {
            let sign = if left { 1.0 } else { -1.0 };
            let omega = sign * state.speed / radius;
            let center = [
                state.position[0] - sign * radius * state.heading.sin(),
                state.position[1] + sign * radius * state.heading.cos(),
            ];
            let heading = state.heading + omega * tau;
            VehicleState {
                position: [
                    center[0] + sign * radius * heading.sin(),
                    center[1] - sign * radius * heading.cos(),
                ],
                heading,
                speed: state.speed,
            }
        }
    }
}

/// Generates the labeled encounter described by `spec`: exact piecewise
/// kinematics, then additive Gaussian noise (and optional random-walk
/// drift). Deterministic given the spec, including its seed.
pub fn generate_encounter(spec: &ScenarioSpec) -> Result<LabeledEncounter> {
    spec.validate()?;
    let t_count = (spec.duration_s * spec.rate_hz).round() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pos_noise = Normal::new(0.0, spec.noise_std_pos.max(1e-300)).unwrap();
    let speed_noise = Normal::new(0.0, spec.noise_std_speed.max(1e-300)).unwrap();
    let drift_noise = Normal::new(0.0, spec.drift_std_pos.max(1e-300)).unwrap();

    // Phase start times and entry states for both vehicles.
    let mut phase_starts = Vec::with_capacity(spec.segment_plan.len());
    let mut entry1 = VehicleState {
        position: spec.start1.position,
        heading: spec.start1.heading,
        speed: spec.start1.speed,
    };
    let mut entry2 = VehicleState {
        position: spec.start2.position,
        heading: spec.start2.heading,
        speed: spec.start2.speed,
    };
    let mut t0 = 0.0;
    for plan in &spec.segment_plan {
        phase_starts.push((t0, entry1, entry2));
        entry1 = advance(entry1, plan.veh1, plan.duration_s);
        entry2 = advance(entry2, plan.veh2, plan.duration_s);
        t0 += plan.duration_s;
    }

    let phase_of = |t: f64| -> usize {
        let mut idx = 0;
        for (i, (start, _, _)) in phase_starts.iter().enumerate() {
            if t >= start - 1e-9 {
                idx = i;
            }
        }
        idx
    };

    let mut drift1 = [0.0f64; 2];
    let mut drift2 = [0.0f64; 2];
    let mut samples = Vec::with_capacity(t_count);
    let mut truth_labels = Vec::with_capacity(t_count);
    for k in 0..t_count {
        let t = k as f64 / spec.rate_hz;
        let idx = phase_of(t);
        let (start, s1, s2) = phase_starts[idx];
        let plan = &spec.segment_plan[idx];
        let a = advance(s1, plan.veh1, t - start);
        let b = advance(s2, plan.veh2, t - start);
        if spec.drift_std_pos > 0.0 {
            for d in 0..2 {
                drift1[d] += drift_noise.sample(&mut rng);
                drift2[d] += drift_noise.sample(&mut rng);
            }
        }
        let jitter = |rng: &mut ChaCha8Rng, std: f64, dist: &Normal<f64>| {
            if std > 0.0 {
                dist.sample(rng)
            } else {
                0.0
            }
        };
        let p1 = [
            a.position[0] + drift1[0] + jitter(&mut rng, spec.noise_std_pos, &pos_noise),
            a.position[1] + drift1[1] + jitter(&mut rng, spec.noise_std_pos, &pos_noise),
        ];
        let p2 = [
            b.position[0] + drift2[0] + jitter(&mut rng, spec.noise_std_pos, &pos_noise),
            b.position[1] + drift2[1] + jitter(&mut rng, spec.noise_std_pos, &pos_noise),
        ];
        let v1 = (a.speed + jitter(&mut rng, spec.noise_std_speed, &speed_noise)).max(0.0);
        let v2 = (b.speed + jitter(&mut rng, spec.noise_std_speed, &speed_noise)).max(0.0);
        samples.push(TrajectorySample { t, p1, p2, v1, v2 });
        truth_labels.push(idx);
    }

    let truth_boundaries = boundaries_of(&truth_labels);
    let id = format!("{}_{:04}", spec.family.name(), spec.seed);
    let encounter = DrivingEncounter::new(id, samples, Frame::LocalMeters)?;
    Ok(LabeledEncounter {
        encounter,
        truth_boundaries,
        truth_labels,
    })
}

/// Generates an encounter whose 6-D observations are drawn i.i.d. within
/// planted phases from per-phase Gaussians: observation means are given per
/// phase as `[x1, y1, x2, y2, v1, v2]`, shared isotropic std `noise_std`.
/// This is exactly the emission structure the segmentation stage assumes,
/// which makes it the recovery oracle's generator. Speeds clamp at zero, so
/// keep speed means a few sigma above it.
pub fn generate_gaussian_phase_encounter(
    id: impl Into<String>,
    phases: &[([f64; 6], usize)],
    rate_hz: f64,
    noise_std: f64,
    seed: u64,
) -> Result<LabeledEncounter> {
    if phases.is_empty() || phases.iter().any(|(_, len)| *len == 0) {
        return Err(Error::Scenario("phases must be nonempty".into()));
    }
    let total: usize = phases.iter().map(|(_, len)| len).sum();
    if total < 2 {
        return Err(Error::Scenario("need at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std.max(1e-300)).unwrap();
    let mut samples = Vec::with_capacity(total);
    let mut truth_labels = Vec::with_capacity(total);
    let mut k = 0usize;
    for (phase_id, (mean, len)) in phases.iter().enumerate() {
        for _ in 0..*len {
            let mut obs = *mean;
            if noise_std > 0.0 {
                for o in &mut obs {
                    *o += noise.sample(&mut rng);
                }
            }
            samples.push(TrajectorySample {
                t: k as f64 / rate_hz,
                p1: [obs[0], obs[1]],
                p2: [obs[2], obs[3]],
                v1: obs[4].max(0.0),
                v2: obs[5].max(0.0),
            });
            truth_labels.push(phase_id);
            k += 1;
        }
    }
    let truth_boundaries = boundaries_of(&truth_labels);
    let encounter = DrivingEncounter::new(id, samples, Frame::LocalMeters)?;
    Ok(LabeledEncounter {
        encounter,
        truth_boundaries,
        truth_labels,
    })
}

fn boundaries_of(labels: &[usize]) -> Vec<usize> {
    labels
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i + 1)
        .collect()
}

/// Generates `count` encounters cycling through all six families with
/// per-encounter seeds derived from `base_seed`.
pub fn generate_mixed_corpus(
    count: usize,
    base_seed: u64,
    noise_std_pos: f64,
    noise_std_speed: f64,
) -> Vec<LabeledEncounter> {
    (0..count)
        .map(|i| {
            let family = ScenarioFamily::ALL[i % ScenarioFamily::ALL.len()];
            let spec = ScenarioSpec::new(family, base_seed.wrapping_add(i as u64))
                .with_noise(noise_std_pos, noise_std_speed);
            generate_encounter(&spec).expect("canonical scenario specs are valid")
        })
        .collect()
}

/// Writes the ground-truth sidecar `sample_index,phase_id` for a labeled
/// encounter.
pub fn write_truth_csv(
    labeled: &LabeledEncounter,
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("sample_index,phase_id\n");
    for (i, phase) in labeled.truth_labels.iter().enumerate() {
        out.push_str(&format!("{i},{phase}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a truth sidecar back as per-sample phase ids.
pub fn read_truth_csv(path: impl AsRef<std::path::Path>) -> Result<Vec<usize>> {
    use std::io::BufRead;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        labels.push(fields[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid phase id `{}`", fields[1]),
        })?);
    }
    Ok(labels)
}

/// Fraction of samples on which the prediction agrees with the truth under
/// the best injective mapping of predicted labels to truth labels.
pub fn segmentation_accuracy(pred: &StateSequence, truth: &LabeledEncounter) -> Result<f64> {
    let t = truth.truth_labels.len();
    if pred.labels.len() != t {
        return Err(Error::LengthMismatch {
            left: pred.labels.len(),
            right: t,
        });
    }
    let pred_max = pred.labels.iter().copied().max().unwrap_or(0);
    let truth_max = truth.truth_labels.iter().copied().max().unwrap_or(0);
    let mut weights = vec![vec![0.0f64; truth_max + 1]; pred_max + 1];
    for (&p, &q) in pred.labels.iter().zip(&truth.truth_labels) {
        weights[p][q] += 1.0;
    }
    let matched = max_weight_assignment(&weights);
    Ok(matched / t as f64)
}

/// Maximum-weight bipartite assignment via the Hungarian algorithm with
/// potentials. Rows and columns may differ; unmatched rows contribute zero.
pub(crate) fn max_weight_assignment(weights: &[Vec<f64>]) -> f64 {
    let rows = weights.len();
    if rows == 0 {
        return 0.0;
    }
    let cols = weights[0].len();
    if cols == 0 {
        return 0.0;
    }
    // Orient so rows <= cols, pad implicitly, and minimize negated weights.
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| -> f64 {
        if transpose {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    // Assignment problem with potentials, 1-based internal indexing.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut total = 0.0;
    for j in 1..=m {
        let i = matched_row[j];
        if i > 0 {
            total += if transpose {
                weights[j - 1][i - 1]
            } else {
                weights[i - 1][j - 1]
            };
        }
    }
    total
}

/// Globally optimal k-means by exhaustive enumeration of assignments.
/// Only for tiny test instances: at most 12 points and 3 clusters.
/// Returns the optimal assignment (clusters relabeled by first occurrence)
/// and its objective.
pub fn oracle_kmeans(points: &[Vec<f64>], k: usize) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n == 0 || k == 0 {
        return Err(Error::Cluster("empty oracle instance".to_owned()));
    }
    if n > 12 || k > 3 {
        return Err(Error::InstanceTooLarge { n, k });
    }
    if k > n {
        return Err(Error::Cluster(format!("k = {k} exceeds N = {n}")));
    }
    let dim = points[0].len();
    let mut assignment = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut objective = 0.0;
        for (p, &a) in points.iter().zip(&assignment) {
            for (d, x) in p.iter().enumerate() {
                let mean = sums[a][d] / counts[a] as f64;
                let diff = x - mean;
                objective += diff * diff;
            }
        }
        if best.as_ref().map(|(_, o)| objective < *o).unwrap_or(true) {
            best = Some((assignment.clone(), objective));
        }
        // Next assignment in base-k counting order.
        let mut pos = 0;
        loop {
            if pos == n {
                let (raw, objective) = best.unwrap();
                return Ok((canonicalize_labels(&raw), objective));
            }
            assignment[pos] += 1;
            if assignment[pos] < k {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

/// Relabels clusters in order of first appearance.
fn canonicalize_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map(|m| m + 1).unwrap_or(0)];
    let mut next = 0usize;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}
