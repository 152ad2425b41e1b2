//! Two-vehicle encounter data model and ingestion.
//!
//! An encounter is a uniformly sampled time series of both vehicles'
//! planar positions and speeds. Raw data arrives as latitude/longitude
//! degrees and is projected onto a local east-north tangent plane before
//! any inference; all downstream stages require the metric frame.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Coordinate convention of an encounter's position channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Frame {
    /// Raw GPS positions stored as `[latitude, longitude]` in decimal degrees.
    GeographicDegrees,
    /// Local tangent-plane positions stored as `[east, north]` in meters.
    LocalMeters,
}

/// One time step of a two-vehicle encounter.
///
/// Position channels follow the convention of the owning encounter's
/// [`Frame`]; speeds are nonnegative magnitudes in m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds relative to the encounter start.
    pub t: f64,
    /// Vehicle 1 position.
    pub p1: [f64; 2],
    /// Vehicle 2 position.
    pub p2: [f64; 2],
    /// Vehicle 1 speed, m/s.
    pub v1: f64,
    /// Vehicle 2 speed, m/s.
    pub v2: f64,
}

impl TrajectorySample {
    fn validate(&self, describe: impl Fn() -> String) -> Result<()> {
        let finite = self.t.is_finite()
            && self.p1.iter().all(|c| c.is_finite())
            && self.p2.iter().all(|c| c.is_finite())
            && self.v1.is_finite()
            && self.v2.is_finite();
        if !finite {
            return Err(Error::InvalidEncounter(format!(
                "non-finite value at {}",
                describe()
            )));
        }
        if self.v1 < 0.0 || self.v2 < 0.0 {
            return Err(Error::InvalidEncounter(format!(
                "negative speed at {}",
                describe()
            )));
        }
        Ok(())
    }
}

/// Spacing jitter tolerated before an encounter is rejected as non-uniform.
pub const UNIFORM_SPACING_TOL_S: f64 = 1e-6;

/// A qualified two-vehicle time series: strictly increasing, uniformly
/// spaced timestamps and at least two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingEncounter {
    pub id: String,
    pub samples: Vec<TrajectorySample>,
    pub rate_hz: f64,
    pub frame: Frame,
}

impl DrivingEncounter {
    /// Builds an encounter, inferring the sample rate from the median
    /// inter-sample spacing and validating all invariants.
    pub fn new(id: impl Into<String>, samples: Vec<TrajectorySample>, frame: Frame) -> Result<Self> {
        let id = id.into();
        if samples.len() < 2 {
            return Err(Error::InvalidEncounter(format!(
                "encounter {id} has {} samples, need at least 2",
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            s.validate(|| format!("sample {i} of encounter {id}"))?;
        }
        let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        for (i, dt) in dts.iter().enumerate() {
            if *dt <= 0.0 {
                return Err(Error::InvalidEncounter(format!(
                    "non-monotonic time at sample {} of encounter {id}",
                    i + 1
                )));
            }
        }
        dts.sort_by(f64::total_cmp);
        let median_dt = dts[dts.len() / 2];
        for (i, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if (dt - median_dt).abs() > UNIFORM_SPACING_TOL_S {
                return Err(Error::InvalidEncounter(format!(
                    "non-uniform sampling at sample {} of encounter {id}: dt {dt:.6} s vs median {median_dt:.6} s",
                    i + 1
                )));
            }
        }
        Ok(Self {
            id,
            samples,
            rate_hz: 1.0 / median_dt,
            frame,
        })
    }

    /// Number of samples T.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Elapsed time between the first and last sample.
    pub fn duration_s(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }

    /// The 6-D observation `[x1, y1, x2, y2, v1, v2]` at sample `t`.
    pub fn observation(&self, t: usize) -> [f64; 6] {
        let s = &self.samples[t];
        [s.p1[0], s.p1[1], s.p2[0], s.p2[1], s.v1, s.v2]
    }

    /// Minimum Euclidean distance between the two vehicles over the
    /// encounter. Meaningful only in the metric frame.
    pub fn min_mutual_distance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| euclidean(s.p1, s.p2))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A maximal run of samples sharing one hidden state: the building block
/// the rest of the pipeline operates on.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPrimitive {
    pub encounter_id: String,
    /// First sample index (inclusive) in the parent encounter.
    pub start: usize,
    /// Last sample index (inclusive) in the parent encounter.
    pub end: usize,
    /// Hidden-state label shared by all samples of the run.
    pub label: usize,
    /// Copy of the parent's samples over `[start, end]`.
    pub samples: Vec<TrajectorySample>,
    pub rate_hz: f64,
}

impl DrivingPrimitive {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }
}

fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

const GEO_HEADER: &str = "t,lat1,lon1,v1,lat2,lon2,v2";
const LOCAL_HEADER: &str = "t,x1,y1,v1,x2,y2,v2";

/// Loads an encounter from CSV.
///
/// Two headers are accepted: `t,lat1,lon1,v1,lat2,lon2,v2` (decimal
/// degrees, yields [`Frame::GeographicDegrees`]) and
/// `t,x1,y1,v1,x2,y2,v2` (meters, yields [`Frame::LocalMeters`]). The
/// encounter id is the file stem. Line numbers in errors are physical
/// file lines, header included.
pub fn load_encounter_csv(path: impl AsRef<Path>) -> Result<DrivingEncounter> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "encounter".to_owned());
    read_encounter_csv(BufReader::new(file), id)
}

/// Reader-based variant of [`load_encounter_csv`].
pub fn read_encounter_csv(reader: impl BufRead, id: impl Into<String>) -> Result<DrivingEncounter> {
    let id = id.into();
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(Error::Parse { line: 1, message: e.to_string() }),
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".to_owned(),
            })
        }
    };
    let frame = match header.trim_end() {
        GEO_HEADER => Frame::GeographicDegrees,
        LOCAL_HEADER => Frame::LocalMeters,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unrecognized header `{other}`"),
            })
        }
    };

    let mut samples: Vec<TrajectorySample> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 7];
        for (i, raw) in fields.iter().enumerate() {
            vals[i] = raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number `{}` in field {}", raw.trim(), i + 1),
            })?;
        }
        let sample = TrajectorySample {
            t: vals[0],
            p1: [vals[1], vals[2]],
            v1: vals[3],
            p2: [vals[4], vals[5]],
            v2: vals[6],
        };
        sample.validate(|| format!("line {line_no}"))?;
        if let Some(prev) = samples.last() {
            if sample.t <= prev.t {
                return Err(Error::NonMonotonicTime { line: line_no });
            }
        }
        samples.push(sample);
    }

    if samples.len() < 2 {
        return Err(Error::InvalidEncounter(format!(
            "encounter {id} has {} samples, need at least 2",
            samples.len()
        )));
    }

    // Uniformity check against the median spacing, with file lines in errors.
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    dts.sort_by(f64::total_cmp);
    let median_dt = dts[dts.len() / 2];
    for (i, w) in samples.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if (dt - median_dt).abs() > UNIFORM_SPACING_TOL_S {
            return Err(Error::NonUniformSampling {
                line: i + 3,
                expected: median_dt,
                actual: dt,
            });
        }
    }

    Ok(DrivingEncounter {
        id,
        samples,
        rate_hz: 1.0 / median_dt,
        frame,
    })
}

/// Writes an encounter back to CSV with the header matching its frame.
/// Numbers are printed in shortest round-trip form, so load → write → load
/// reproduces the values bit-identically.
pub fn write_encounter_csv(enc: &DrivingEncounter, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    write_encounter_string(enc, &mut out);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_encounter_string(enc: &DrivingEncounter, out: &mut String) {
    use fmt::Write as _;
    let header = match enc.frame {
        Frame::GeographicDegrees => GEO_HEADER,
        Frame::LocalMeters => LOCAL_HEADER,
    };
    out.push_str(header);
    out.push('\n');
    for s in &enc.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t, s.p1[0], s.p1[1], s.v1, s.p2[0], s.p2[1], s.v2
        )
        .expect("string write cannot fail");
    }
}

/// IUGG mean Earth radius, meters.
const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Projects a geographic encounter onto a local east-north tangent plane.
///
/// The origin is the midpoint of the two vehicles at the first sample and
/// the projection is equirectangular about the origin latitude, which is
/// accurate well below 0.1% at the ≤ 100 m scale of an encounter. Speeds
/// are unchanged.
pub fn project_to_local_frame(enc: &DrivingEncounter) -> Result<DrivingEncounter> {
    if enc.frame == Frame::LocalMeters {
        return Err(Error::AlreadyProjected);
    }
    let first = &enc.samples[0];
    let lat0 = 0.5 * (first.p1[0] + first.p2[0]);
    let lon0 = 0.5 * (first.p1[1] + first.p2[1]);
    let cos_lat0 = lat0.to_radians().cos();
    let project = |p: [f64; 2]| -> [f64; 2] {
        let east = EARTH_RADIUS_M * (p[1] - lon0).to_radians() * cos_lat0;
        let north = EARTH_RADIUS_M * (p[0] - lat0).to_radians();
        [east, north]
    };
    let samples = enc
        .samples
        .iter()
        .map(|s| TrajectorySample {
            t: s.t,
            p1: project(s.p1),
            p2: project(s.p2),
            v1: s.v1,
            v2: s.v2,
        })
        .collect();
    Ok(DrivingEncounter {
        id: enc.id.clone(),
        samples,
        rate_hz: enc.rate_hz,
        frame: Frame::LocalMeters,
    })
}

/// Why an encounter failed qualification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DisqualifyReason {
    /// Shorter than the minimum duration.
    Duration,
    /// The vehicles never came within the mutual-distance threshold.
    Distance,
}

impl fmt::Display for DisqualifyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisqualifyReason::Duration => f.write_str("duration"),
            DisqualifyReason::Distance => f.write_str("distance"),
        }
    }
}

/// Outcome of [`qualify_encounter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Qualification {
    Qualified,
    Rejected(DisqualifyReason),
}

impl Qualification {
    pub fn is_qualified(&self) -> bool {
        matches!(self, Qualification::Qualified)
    }

    pub fn reason(&self) -> Option<DisqualifyReason> {
        match self {
            Qualification::Qualified => None,
            Qualification::Rejected(r) => Some(*r),
        }
    }
}

/// Checks whether a projected encounter is long enough and whether the
/// vehicles ever came close enough to count as an encounter. Duration is
/// checked first. Expects the metric frame.
pub fn qualify_encounter(
    enc: &DrivingEncounter,
    min_duration_s: f64,
    max_mutual_distance_m: f64,
) -> Qualification {
    debug_assert_eq!(enc.frame, Frame::LocalMeters, "qualify expects meters");
    if enc.duration_s() < min_duration_s {
        return Qualification::Rejected(DisqualifyReason::Duration);
    }
    if enc.min_mutual_distance() > max_mutual_distance_m {
        return Qualification::Rejected(DisqualifyReason::Distance);
    }
    Qualification::Qualified
}

/// Linearly resamples an encounter onto a uniform grid at `rate_hz`,
/// spanning the original time range. Escape hatch for sources with
/// slightly irregular timestamps, which `DrivingEncounter::new` rejects.
pub fn resample_uniform(
    id: impl Into<String>,
    samples: &[TrajectorySample],
    rate_hz: f64,
    frame: Frame,
) -> Result<DrivingEncounter> {
    if samples.len() < 2 {
        return Err(Error::InvalidEncounter(
            "resampling needs at least 2 samples".to_owned(),
        ));
    }
    if !(rate_hz > 0.0) {
        return Err(Error::Config(format!("invalid rate {rate_hz}")));
    }
    for w in samples.windows(2) {
        if w[1].t <= w[0].t {
            return Err(Error::InvalidEncounter(
                "non-monotonic time in resampling input".to_owned(),
            ));
        }
    }
    let t0 = samples[0].t;
    let t1 = samples[samples.len() - 1].t;
    let steps = ((t1 - t0) * rate_hz).floor() as usize;
    if steps < 1 {
        return Err(Error::InvalidEncounter(
            "time range too short for the requested rate".to_owned(),
        ));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut seg = 0usize;
    for k in 0..=steps {
        let t = t0 + k as f64 / rate_hz;
        while seg + 2 < samples.len() && samples[seg + 1].t < t {
            seg += 1;
        }
        let a = &samples[seg];
        let b = &samples[seg + 1];
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        out.push(TrajectorySample {
            t: k as f64 / rate_hz,
            p1: [lerp(a.p1[0], b.p1[0]), lerp(a.p1[1], b.p1[1])],
            p2: [lerp(a.p2[0], b.p2[0]), lerp(a.p2[1], b.p2[1])],
            v1: lerp(a.v1, b.v1).max(0.0),
            v2: lerp(a.v2, b.v2).max(0.0),
        });
    }
    DrivingEncounter::new(id, out, frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn geo_csv(rows: &[(f64, f64, f64, f64, f64, f64, f64)]) -> String {
        let mut s = String::from("t,lat1,lon1,v1,lat2,lon2,v2\n");
        for r in rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.0, r.1, r.2, r.3, r.4, r.5, r.6
            ));
        }
        s
    }

    fn load_str(s: &str) -> Result<DrivingEncounter> {
        read_encounter_csv(Cursor::new(s.as_bytes()), "test")
    }

    #[test]
    fn two_row_file_reads_at_10_hz() {
        let csv = geo_csv(&[
            (0.0, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
        ]);
        let enc = load_str(&csv).unwrap();
        assert_eq!(enc.len(), 2);
        assert_eq!(enc.frame, Frame::GeographicDegrees);
        assert_relative_eq!(enc.rate_hz, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn repeated_timestamp_names_its_line() {
        let csv = geo_csv(&[
            (0.0, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
        ]);
        let err = load_str(&csv).unwrap_err();
        assert_eq!(err.to_string(), "non-monotonic time at line 4");
    }

    #[test]
    fn long_file_duration_arithmetic() {
        let rows: Vec<_> = (0..120)
            .map(|k| (k as f64 / 10.0, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0))
            .collect();
        let enc = load_str(&geo_csv(&rows)).unwrap();
        assert_eq!(enc.len(), 120);
        assert_relative_eq!(enc.duration_s(), 11.9, max_relative = 1e-12);
        assert_relative_eq!(enc.rate_hz, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn malformed_row_names_line_and_field() {
        let mut csv = geo_csv(&[(0.0, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0)]);
        csv.push_str("0.1,42.0,-83.0,oops,42.0005,-83.0,6.0\n");
        let err = load_str(&csv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("oops"), "{msg}");
    }

    #[test]
    fn missing_field_rejected() {
        let mut csv = String::from("t,lat1,lon1,v1,lat2,lon2,v2\n");
        csv.push_str("0.0,42.0,-83.0,5.0,42.0005,-83.0\n");
        let err = load_str(&csv).unwrap_err();
        assert!(err.to_string().contains("expected 7 fields"), "{err}");
    }

    #[test]
    fn non_uniform_spacing_rejected() {
        let csv = geo_csv(&[
            (0.0, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.2, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.4, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
        ]);
        let err = load_str(&csv).unwrap_err();
        assert!(matches!(err, Error::NonUniformSampling { line: 5, .. }), "{err}");
    }

    #[test]
    fn negative_speed_rejected() {
        let csv = geo_csv(&[
            (0.0, 42.0, -83.0, -1.0, 42.0005, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
        ]);
        assert!(load_str(&csv).is_err());
    }

    #[test]
    fn load_write_load_round_trips() {
        let csv = geo_csv(&[
            (0.0, 42.279501, -83.732, 5.125, 42.280013, -83.731442, 6.25),
            (0.1, 42.279511, -83.73199, 5.0, 42.280003, -83.731456, 6.125),
        ]);
        let enc = load_str(&csv).unwrap();
        let mut rewritten = String::new();
        write_encounter_string(&enc, &mut rewritten);
        let reloaded = load_str(&rewritten).unwrap();
        assert_eq!(enc, reloaded);
    }

    #[test]
    fn projection_maps_origin_to_zero() {
        let csv = geo_csv(&[
            (0.0, 42.0, -83.0, 5.0, 42.0, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0, -83.0, 6.0),
        ]);
        let enc = load_str(&csv).unwrap();
        let local = project_to_local_frame(&enc).unwrap();
        assert_eq!(local.frame, Frame::LocalMeters);
        assert_relative_eq!(local.samples[0].p1[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(local.samples[0].p1[1], 0.0, epsilon = 1e-9);
        assert_eq!(local.samples[0].v1, 5.0);
    }

    /// Great-circle distance, the independent oracle for projection scale.
    fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let (la1, lo1, la2, lo2) = (
            lat1.to_radians(),
            lon1.to_radians(),
            lat2.to_radians(),
            lon2.to_radians(),
        );
        let dlat = la2 - la1;
        let dlon = lo2 - lo1;
        let a = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().asin()
    }

    #[test]
    fn projection_matches_great_circle_at_equator() {
        // Both vehicles at the origin, vehicle 1 moves 0.001 deg north.
        let csv = geo_csv(&[
            (0.0, 0.0, 10.0, 5.0, 0.0, 10.0, 6.0),
            (0.1, 0.001, 10.0, 5.0, 0.0, 10.0, 6.0),
        ]);
        let enc = load_str(&csv).unwrap();
        let local = project_to_local_frame(&enc).unwrap();
        let p = local.samples[1].p1;
        let oracle = haversine_m(0.0, 10.0, 0.001, 10.0);
        assert_relative_eq!(oracle, 111.19, max_relative = 5e-3);
        assert!((p[0]).abs() < 1e-6);
        assert!((p[1] - oracle).abs() < 0.5, "north {} vs oracle {}", p[1], oracle);
    }

    #[test]
    fn projection_is_deterministic() {
        let csv = geo_csv(&[
            (0.0, 42.1, -83.2, 3.0, 42.1004, -83.2003, 4.0),
            (0.1, 42.1001, -83.2001, 3.0, 42.1005, -83.2004, 4.0),
        ]);
        let enc = load_str(&csv).unwrap();
        let a = project_to_local_frame(&enc).unwrap();
        let b = project_to_local_frame(&enc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn double_projection_errors() {
        let csv = geo_csv(&[
            (0.0, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
            (0.1, 42.0, -83.0, 5.0, 42.0005, -83.0, 6.0),
        ]);
        let enc = load_str(&csv).unwrap();
        let local = project_to_local_frame(&enc).unwrap();
        assert!(matches!(
            project_to_local_frame(&local),
            Err(Error::AlreadyProjected)
        ));
    }

    fn local_encounter(duration_s: f64, gap_m: f64) -> DrivingEncounter {
        let t_count = (duration_s * 10.0) as usize + 1;
        let samples: Vec<_> = (0..t_count)
            .map(|k| TrajectorySample {
                t: k as f64 / 10.0,
                p1: [0.0, 0.0],
                p2: [gap_m, 0.0],
                v1: 0.0,
                v2: 0.0,
            })
            .collect();
        DrivingEncounter::new("local", samples, Frame::LocalMeters).unwrap()
    }

    #[test]
    fn qualify_accepts_long_close_encounter() {
        let enc = local_encounter(11.0, 40.0);
        assert!(qualify_encounter(&enc, 10.0, 100.0).is_qualified());
    }

    #[test]
    fn qualify_rejects_short_encounter_for_duration() {
        let enc = local_encounter(9.0, 40.0);
        let q = qualify_encounter(&enc, 10.0, 100.0);
        assert_eq!(q.reason(), Some(DisqualifyReason::Duration));
        assert_eq!(q.reason().unwrap().to_string(), "duration");
    }

    #[test]
    fn qualify_rejects_distant_encounter_for_distance() {
        let enc = local_encounter(15.0, 150.0);
        let q = qualify_encounter(&enc, 10.0, 100.0);
        assert_eq!(q.reason(), Some(DisqualifyReason::Distance));
    }

    #[test]
    fn resample_interpolates_to_uniform_grid() {
        let samples = vec![
            TrajectorySample { t: 0.0, p1: [0.0, 0.0], p2: [4.0, 0.0], v1: 0.0, v2: 2.0 },
            TrajectorySample { t: 0.15, p1: [3.0, 0.0], p2: [4.0, 0.0], v1: 3.0, v2: 2.0 },
            TrajectorySample { t: 0.2, p1: [4.0, 0.0], p2: [4.0, 0.0], v1: 4.0, v2: 2.0 },
        ];
        let enc = resample_uniform("r", &samples, 10.0, Frame::LocalMeters).unwrap();
        assert_eq!(enc.len(), 3);
        assert_relative_eq!(enc.samples[1].p1[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(enc.samples[1].v1, 2.0, max_relative = 1e-12);
    }

    proptest! {
        /// Projected inter-vehicle distances match the great-circle oracle
        /// within 0.1% in the small-extent regime.
        #[test]
        fn projection_preserves_mutual_distance(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            dx1 in -900.0f64..900.0,
            dy1 in -900.0f64..900.0,
            dx2 in -900.0f64..900.0,
            dy2 in -900.0f64..900.0,
        ) {
            // Offsets in meters converted to degrees at the base latitude.
            let m_per_deg_lat = EARTH_RADIUS_M.to_radians();
            let m_per_deg_lon = m_per_deg_lat * lat.to_radians().cos();
            let p1 = [lat + dy1 / m_per_deg_lat, lon + dx1 / m_per_deg_lon];
            let p2 = [lat + dy2 / m_per_deg_lat, lon + dx2 / m_per_deg_lon];
            let samples = vec![
                TrajectorySample { t: 0.0, p1, p2, v1: 0.0, v2: 0.0 },
                TrajectorySample { t: 0.1, p1, p2, v1: 0.0, v2: 0.0 },
            ];
            let enc = DrivingEncounter::new("p", samples, Frame::GeographicDegrees).unwrap();
            let local = project_to_local_frame(&enc).unwrap();
            let s = &local.samples[0];
            let projected = euclidean(s.p1, s.p2);
            let oracle = haversine_m(p1[0], p1[1], p2[0], p2[1]);
            prop_assume!(oracle > 1.0);
            prop_assert!((projected - oracle).abs() / oracle < 1e-3,
                "projected {projected} oracle {oracle}");
        }

        /// Qualification only looks at durations and relative geometry, so a
        /// rigid translation of the local frame cannot change it.
        #[test]
        fn qualify_invariant_under_translation(
            gap in 1.0f64..200.0,
            len_s in 5.0f64..15.0,
            shift_x in -1e4f64..1e4,
            shift_y in -1e4f64..1e4,
        ) {
            // Stay off the distance threshold so float jitter in the
            // translated coordinates cannot flip the verdict.
            prop_assume!((gap - 100.0).abs() > 1e-3);
            let enc = local_encounter(len_s, gap);
            let shifted_samples: Vec<_> = enc
                .samples
                .iter()
                .map(|s| TrajectorySample {
                    t: s.t,
                    p1: [s.p1[0] + shift_x, s.p1[1] + shift_y],
                    p2: [s.p2[0] + shift_x, s.p2[1] + shift_y],
                    v1: s.v1,
                    v2: s.v2,
                })
                .collect();
            let shifted = DrivingEncounter::new("s", shifted_samples, Frame::LocalMeters).unwrap();
            let a = qualify_encounter(&enc, 10.0, 100.0);
            let b = qualify_encounter(&shifted, 10.0, 100.0);
            prop_assert_eq!(a.is_qualified(), b.is_qualified());
            prop_assert_eq!(a.reason(), b.reason());
        }
    }
}
