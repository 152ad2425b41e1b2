//! Fixed-size feature representation of driving primitives.
//!
//! Every primitive is linearly rescaled to a common length `l`, turned into
//! two `l × l` cross-distance matrices — Euclidean distances between the
//! vehicles' positions and absolute differences between their speeds — and
//! normalized by each matrix's own maximum. The pair flattens row-major
//! into a single feature vector of length `2 l²`. The matrices are local
//! distance grids only; no warping path is ever computed, the grid itself
//! is the feature.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::encounter::DrivingPrimitive;
use crate::error::{Error, Result};

/// Identity of the primitive a feature artifact was derived from.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PrimitiveSource {
    pub encounter_id: String,
    pub m: usize,
    pub n: usize,
    pub label: usize,
}

impl PrimitiveSource {
    pub fn of(prim: &DrivingPrimitive) -> Self {
        Self {
            encounter_id: prim.encounter_id.clone(),
            m: prim.start,
            n: prim.end,
            label: prim.label,
        }
    }
}

/// A primitive resampled to exactly `l` points per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledPrimitive {
    pub p1: Vec<[f64; 2]>,
    pub p2: Vec<[f64; 2]>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub source: PrimitiveSource,
}

impl RescaledPrimitive {
    pub fn len(&self) -> usize {
        self.v1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty()
    }
}

/// Dense square grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] = v;
    }

    /// Row-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Position and speed cross-distance matrices of one primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrices {
    /// `m_p[i][j] = ‖p1[i] − p2[j]‖₂`, meters.
    pub m_p: SquareMatrix,
    /// `m_v[i][j] = |v1[i] − v2[j]|`, m/s.
    pub m_v: SquareMatrix,
    pub normalized: bool,
    pub source: PrimitiveSource,
}

/// Flattened feature vector: row-major `m_p` then row-major `m_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub phi: Vec<f64>,
    pub source: PrimitiveSource,
}

/// Rescales a primitive to `l` samples per channel by linear interpolation
/// at `l` uniformly spaced query points spanning the primitive.
///
/// The encounter invariants guarantee uniform sampling, so interpolation is
/// done in index space; endpoints, and any query landing exactly on a source
/// sample, reproduce the source values exactly.
pub fn rescale_primitive(prim: &DrivingPrimitive, l: usize) -> Result<RescaledPrimitive> {
    if prim.samples.len() < 2 {
        return Err(Error::DegeneratePrimitive);
    }
    if l < 2 {
        return Err(Error::Config(format!("rescale length {l} must be >= 2")));
    }
    let src_len = prim.samples.len();
    let mut p1 = Vec::with_capacity(l);
    let mut p2 = Vec::with_capacity(l);
    let mut v1 = Vec::with_capacity(l);
    let mut v2 = Vec::with_capacity(l);
    for q in 0..l {
        // Fractional source index of query point q.
        let u = q as f64 * (src_len - 1) as f64 / (l - 1) as f64;
        let i = (u.floor() as usize).min(src_len - 2);
        let w = u - i as f64;
        let a = &prim.samples[i];
        let b = &prim.samples[i + 1];
        let lerp = |x: f64, y: f64| if w == 0.0 { x } else { x + w * (y - x) };
        p1.push([lerp(a.p1[0], b.p1[0]), lerp(a.p1[1], b.p1[1])]);
        p2.push([lerp(a.p2[0], b.p2[0]), lerp(a.p2[1], b.p2[1])]);
        v1.push(lerp(a.v1, b.v1));
        v2.push(lerp(a.v2, b.v2));
    }
    // The last query index is exactly src_len - 1; force bit-exact endpoints.
    *p1.last_mut().unwrap() = prim.samples[src_len - 1].p1;
    *p2.last_mut().unwrap() = prim.samples[src_len - 1].p2;
    *v1.last_mut().unwrap() = prim.samples[src_len - 1].v1;
    *v2.last_mut().unwrap() = prim.samples[src_len - 1].v2;
    Ok(RescaledPrimitive {
        p1,
        p2,
        v1,
        v2,
        source: PrimitiveSource::of(prim),
    })
}

/// Computes the unnormalized cross-distance matrices: Euclidean distance
/// between vehicle 1's position at step `i` and vehicle 2's position at step
/// `j`, and the absolute speed difference likewise. Both grids compare
/// vehicle 1 against vehicle 2, so neither is symmetric in general.
pub fn cross_distance_matrices(rp: &RescaledPrimitive) -> FeatureMatrices {
    let l = rp.len();
    let mut m_p = SquareMatrix::zeros(l);
    let mut m_v = SquareMatrix::zeros(l);
    for i in 0..l {
        for j in 0..l {
            let dx = rp.p1[i][0] - rp.p2[j][0];
            let dy = rp.p1[i][1] - rp.p2[j][1];
            m_p.set(i, j, (dx * dx + dy * dy).sqrt());
            m_v.set(i, j, (rp.v1[i] - rp.v2[j]).abs());
        }
    }
    FeatureMatrices {
        m_p,
        m_v,
        normalized: false,
        source: rp.source.clone(),
    }
}

/// Divides each matrix by its own maximum so every entry lands in `[0, 1]`.
/// An all-zero matrix (coincident vehicles, equal speeds) passes through
/// unchanged instead of producing NaNs.
pub fn normalize_matrices(mut fm: FeatureMatrices) -> FeatureMatrices {
    if fm.normalized {
        return fm;
    }
    for m in [&mut fm.m_p, &mut fm.m_v] {
        let max = m.max();
        if max > 0.0 {
            for v in &mut m.data {
                *v /= max;
            }
        }
    }
    fm.normalized = true;
    fm
}

/// Concatenates row-major `m_p` then row-major `m_v` into a `2 l²` vector.
pub fn flatten_features(fm: &FeatureMatrices) -> Result<FeatureVector> {
    if !fm.normalized {
        return Err(Error::UnnormalizedFeatures);
    }
    let l = fm.m_p.size();
    let mut phi = Vec::with_capacity(2 * l * l);
    phi.extend_from_slice(fm.m_p.as_slice());
    phi.extend_from_slice(fm.m_v.as_slice());
    debug_assert_eq!(phi.len(), 2 * l * l);
    Ok(FeatureVector {
        phi,
        source: fm.source.clone(),
    })
}

/// Inverse of [`flatten_features`] given the side length `l`.
pub fn unflatten_features(fv: &FeatureVector, l: usize) -> Result<FeatureMatrices> {
    if fv.phi.len() != 2 * l * l {
        return Err(Error::LengthMismatch {
            left: fv.phi.len(),
            right: 2 * l * l,
        });
    }
    let m_p = SquareMatrix {
        size: l,
        data: fv.phi[..l * l].to_vec(),
    };
    let m_v = SquareMatrix {
        size: l,
        data: fv.phi[l * l..].to_vec(),
    };
    Ok(FeatureMatrices {
        m_p,
        m_v,
        normalized: true,
        source: fv.source.clone(),
    })
}

/// Full featurization of one primitive: rescale, cross-distance, normalize,
/// flatten.
pub fn featurize_primitive(prim: &DrivingPrimitive, l: usize) -> Result<FeatureVector> {
    let rescaled = rescale_primitive(prim, l)?;
    let matrices = normalize_matrices(cross_distance_matrices(&rescaled));
    flatten_features(&matrices)
}

/// Writes feature vectors as CSV: identity columns, then the `2 l²` feature
/// columns.
pub fn write_feature_csv(vectors: &[FeatureVector], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let dim = vectors.first().map(|v| v.phi.len()).unwrap_or(0);
    let mut header = String::from("encounter_id,m,n,label");
    for i in 0..dim {
        header.push_str(&format!(",f{i}"));
    }
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for v in vectors {
        let mut row = format!(
            "{},{},{},{}",
            v.source.encounter_id, v.source.m, v.source.n, v.source.label
        );
        for x in &v.phi {
            row.push(',');
            row.push_str(&format!("{x}"));
        }
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads a feature CSV back. The inverse of [`write_feature_csv`].
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least 5 fields, found {}", fields.len()),
            });
        }
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let source = PrimitiveSource {
            encounter_id: fields[0].to_owned(),
            m: parse_usize(fields[1], "m")?,
            n: parse_usize(fields[2], "n")?,
            label: parse_usize(fields[3], "label")?,
        };
        let mut phi = Vec::with_capacity(fields.len() - 4);
        for raw in &fields[4..] {
            phi.push(raw.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature value `{raw}`"),
            })?);
        }
        out.push(FeatureVector { phi, source });
    }
    Ok(out)
}

/// Exports both matrices of one primitive as plain-text `l × l` grids
/// (space-separated rows) for external heatmap plotting. Returns the two
/// file paths written.
pub fn write_matrix_grids(
    fm: &FeatureMatrices,
    dir: impl AsRef<Path>,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let dir = dir.as_ref();
    let base = format!(
        "{}_{}_{}",
        fm.source.encounter_id, fm.source.m, fm.source.n
    );
    let write_grid = |m: &SquareMatrix, suffix: &str| -> Result<std::path::PathBuf> {
        let path = dir.join(format!("{base}_{suffix}.txt"));
        let mut out = String::new();
        for i in 0..m.size() {
            for j in 0..m.size() {
                if j > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{}", m.get(i, j)));
            }
            out.push('\n');
        }
        std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    Ok((write_grid(&fm.m_p, "Mp")?, write_grid(&fm.m_v, "Mv")?))
}
