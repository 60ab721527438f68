//! Ground samples: finite indexed point sets with a validated base distance.
//!
//! A sample is the universe every other module quantifies over. Points are
//! either coordinate vectors of a common dimension or opaque labels; the
//! base distance comes from a coordinate norm or an explicit matrix. Loading
//! validates the full set of metric axioms up front, so downstream checkers
//! may treat index equality as point equality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coordinate norms usable as base distances without an explicit matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordMetric {
    Euclidean,
    L1,
    Linf,
}

impl CoordMetric {
    /// Distance between two coordinate points of equal dimension.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Self::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Self::Linf => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

/// Base distance choices for a ground sample.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSource {
    /// Euclidean norm on coordinate points.
    Euclidean,
    /// Sum of absolute coordinate differences.
    L1,
    /// Maximum absolute coordinate difference.
    Linf,
    /// Explicit symmetric distance matrix indexed like the points.
    Explicit(Vec<Vec<f64>>),
}

/// Point payloads: coordinate vectors of one dimension, or opaque labels
/// (labels require an explicit matrix).
#[derive(Debug, Clone, PartialEq)]
pub enum Points {
    Vectors(Vec<Vec<f64>>),
    Labels(Vec<String>),
}

/// A finite indexed point set with a base distance satisfying the metric
/// axioms. All validation happens in the constructors; accessors never fail
/// on in-range indices.
#[derive(Debug, Clone)]
pub struct GroundSample {
    points: Points,
    source: MetricSource,
}

/// Errors from sample construction and JSON loading.
#[derive(Debug, Error)]
pub enum SampleError {
    #[error("sample JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("sample must contain at least one point")]
    Empty,
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("points {a} and {b} are identical; indices must name distinct points")]
    DuplicatePoint { a: usize, b: usize },
    #[error("label points require an explicit distance matrix")]
    LabelsNeedMatrix,
    #[error("distance matrix is {rows}x{cols}, expected {size}x{size} for {size} points")]
    MatrixShape { rows: usize, cols: usize, size: usize },
    #[error("distance matrix is asymmetric at ({i},{j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("distance matrix has negative entry {value} at ({i},{j})")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("distance matrix has nonzero diagonal entry {value} at ({i},{i})")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("distance matrix has zero off-diagonal entry at ({i},{j}); distinct points need positive distance")]
    ZeroOffDiagonal { i: usize, j: usize },
    #[error("distance matrix violates the triangle inequality: d({i},{j}) > d({i},{k}) + d({k},{j})")]
    TriangleViolation { i: usize, k: usize, j: usize },
    #[error("tuple needs at least two entries (order >= 1), got {0}")]
    TupleTooShort(usize),
}

#[derive(Deserialize)]
struct SampleDoc {
    points: PointsDoc,
    metric: MetricDoc,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsDoc {
    Vectors(Vec<Vec<f64>>),
    Labels(Vec<String>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MetricDoc {
    Name(String),
    Matrix { matrix: Vec<Vec<f64>> },
}

// Headroom for triangle validation: embedded distances may miss exact
// inequalities by a few ulps.
const TRIANGLE_SLACK: f64 = 1e-12;

impl GroundSample {
    /// Validates and assembles a sample. See [`SampleError`] for everything
    /// that can be rejected.
    pub fn new(points: Points, source: MetricSource) -> Result<Self, SampleError> {
        let sample = Self::structural(points, source)?;
        if let MetricSource::Explicit(matrix) = &sample.source {
            validate_matrix(matrix)?;
        }
        Ok(sample)
    }

    /// Assembles a sample whose matrix entries are taken as-is: shape and
    /// symmetry are still enforced, but the value-level metric axioms
    /// (zero diagonal, positivity, triangle inequality) are not. This exists
    /// so the axiom checkers can be pointed at deliberately broken inputs.
    pub fn from_matrix_unvalidated(points: Points, matrix: Vec<Vec<f64>>) -> Result<Self, SampleError> {
        let size = points_len(&points);
        check_matrix_shape(&matrix, size)?;
        check_matrix_symmetric(&matrix)?;
        Self::structural(points, MetricSource::Explicit(matrix))
    }

    /// Parses the sample JSON schema:
    /// `{"points": [[x, ...], ...] | ["label", ...], "metric": "euclidean" | "l1" | "linf" | {"matrix": [[d, ...], ...]}}`.
    pub fn from_json(text: &str) -> Result<Self, SampleError> {
        let doc: SampleDoc = serde_json::from_str(text)?;
        let points = match doc.points {
            PointsDoc::Vectors(v) => Points::Vectors(v),
            PointsDoc::Labels(l) => Points::Labels(l),
        };
        let source = match doc.metric {
            MetricDoc::Name(name) => match name.as_str() {
                "euclidean" => MetricSource::Euclidean,
                "l1" => MetricSource::L1,
                "linf" => MetricSource::Linf,
                other => {
                    return Err(SampleError::Parse(serde::de::Error::custom(format!(
                        "unknown metric {other:?}, expected euclidean, l1, linf, or a matrix"
                    ))))
                }
            },
            MetricDoc::Matrix { matrix } => MetricSource::Explicit(matrix),
        };
        Self::new(points, source)
    }

    /// Convenience constructor for one-dimensional coordinate samples.
    pub fn scalars(values: &[f64], source: MetricSource) -> Result<Self, SampleError> {
        let points = values.iter().map(|&v| vec![v]).collect();
        Self::new(Points::Vectors(points), source)
    }

    fn structural(points: Points, source: MetricSource) -> Result<Self, SampleError> {
        let size = points_len(&points);
        if size == 0 {
            return Err(SampleError::Empty);
        }
        match &points {
            Points::Vectors(vs) => {
                let dim = vs[0].len();
                if dim == 0 {
                    return Err(SampleError::DimensionMismatch { index: 0, expected: 1, got: 0 });
                }
                for (i, v) in vs.iter().enumerate() {
                    if v.len() != dim {
                        return Err(SampleError::DimensionMismatch { index: i, expected: dim, got: v.len() });
                    }
                    if v.iter().any(|c| !c.is_finite()) {
                        return Err(SampleError::NonFinite { index: i });
                    }
                }
                for a in 0..size {
                    for b in a + 1..size {
                        if vs[a] == vs[b] {
                            return Err(SampleError::DuplicatePoint { a, b });
                        }
                    }
                }
            }
            Points::Labels(ls) => {
                if !matches!(source, MetricSource::Explicit(_)) {
                    return Err(SampleError::LabelsNeedMatrix);
                }
                for a in 0..size {
                    for b in a + 1..size {
                        if ls[a] == ls[b] {
                            return Err(SampleError::DuplicatePoint { a, b });
                        }
                    }
                }
            }
        }
        if let MetricSource::Explicit(matrix) = &source {
            check_matrix_shape(matrix, size)?;
            check_matrix_symmetric(matrix)?;
        }
        Ok(Self { points, source })
    }

    /// Number of points.
    pub fn size(&self) -> usize {
        points_len(&self.points)
    }

    /// Coordinate dimension, or `None` for label points.
    pub fn dim(&self) -> Option<usize> {
        match &self.points {
            Points::Vectors(vs) => Some(vs[0].len()),
            Points::Labels(_) => None,
        }
    }

    /// Base distance between points `i` and `j`. Panics on out-of-range
    /// indices; callers validate tuples first.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let norm = match &self.source {
            MetricSource::Explicit(m) => return m[i][j],
            MetricSource::Euclidean => CoordMetric::Euclidean,
            MetricSource::L1 => CoordMetric::L1,
            MetricSource::Linf => CoordMetric::Linf,
        };
        let (a, b) = self.coord_pair(i, j);
        norm.distance(a, b)
    }

    fn coord_pair(&self, i: usize, j: usize) -> (&[f64], &[f64]) {
        match &self.points {
            Points::Vectors(vs) => (&vs[i], &vs[j]),
            Points::Labels(_) => unreachable!("label samples always carry an explicit matrix"),
        }
    }

    /// Coordinates of point `i`, or `None` for label points.
    pub fn coords(&self, i: usize) -> Option<&[f64]> {
        match &self.points {
            Points::Vectors(vs) => Some(&vs[i]),
            Points::Labels(_) => None,
        }
    }

    /// Scalar value of point `i` for one-dimensional samples.
    pub fn scalar(&self, i: usize) -> Option<f64> {
        match &self.points {
            Points::Vectors(vs) if vs[0].len() == 1 => Some(vs[i][0]),
            _ => None,
        }
    }

    /// Label of point `i`, or `None` for coordinate points.
    pub fn label(&self, i: usize) -> Option<&str> {
        match &self.points {
            Points::Labels(ls) => Some(&ls[i]),
            Points::Vectors(_) => None,
        }
    }

    /// The distance source this sample was built with.
    pub fn source(&self) -> &MetricSource {
        &self.source
    }

    /// Raw explicit matrix, when the sample carries one.
    pub fn matrix(&self) -> Option<&Vec<Vec<f64>>> {
        match &self.source {
            MetricSource::Explicit(m) => Some(m),
            _ => None,
        }
    }
}

fn points_len(points: &Points) -> usize {
    match points {
        Points::Vectors(v) => v.len(),
        Points::Labels(l) => l.len(),
    }
}

fn check_matrix_shape(matrix: &[Vec<f64>], size: usize) -> Result<(), SampleError> {
    if matrix.len() != size || matrix.iter().any(|r| r.len() != size) {
        let cols = matrix.first().map_or(0, Vec::len);
        return Err(SampleError::MatrixShape { rows: matrix.len(), cols, size });
    }
    Ok(())
}

fn check_matrix_symmetric(matrix: &[Vec<f64>]) -> Result<(), SampleError> {
    let n = matrix.len();
    for i in 0..n {
        for j in i + 1..n {
            if matrix[i][j] != matrix[j][i] {
                return Err(SampleError::Asymmetric { i, j, a: matrix[i][j], b: matrix[j][i] });
            }
        }
    }
    Ok(())
}

fn validate_matrix(matrix: &[Vec<f64>]) -> Result<(), SampleError> {
    let n = matrix.len();
    for i in 0..n {
        if matrix[i][i] != 0.0 {
            return Err(SampleError::NonzeroDiagonal { i, value: matrix[i][i] });
        }
        for j in 0..n {
            let d = matrix[i][j];
            if !d.is_finite() || d < 0.0 {
                return Err(SampleError::NegativeEntry { i, j, value: d });
            }
            if i != j && d == 0.0 {
                return Err(SampleError::ZeroOffDiagonal { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let direct = matrix[i][j];
                let via = matrix[i][k] + matrix[k][j];
                if direct - via > TRIANGLE_SLACK * direct.max(via).max(1.0) {
                    return Err(SampleError::TriangleViolation { i, k, j });
                }
            }
        }
    }
    Ok(())
}

/// An ordered selection of sample indices; `order + 1` entries. Repetition is
/// allowed and meaningful: multiplicity matters to some functionals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointTuple {
    indices: Vec<usize>,
}

impl PointTuple {
    /// Builds a tuple; rejects fewer than two entries.
    pub fn new(indices: Vec<usize>) -> Result<Self, SampleError> {
        if indices.len() < 2 {
            return Err(SampleError::TupleTooShort(indices.len()));
        }
        Ok(Self { indices })
    }

    /// The order `n` of a tuple with `n + 1` entries.
    pub fn order(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The same multiset of indices in sorted order. Evaluation canonicalizes
    /// through this, which is what makes permutation invariance bit-exact.
    pub fn canonical(&self) -> Self {
        let mut indices = self.indices.clone();
        indices.sort_unstable();
        Self { indices }
    }

    /// Distinct indices, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Largest index referenced; used for bounds checks against a sample.
    pub fn max_index(&self) -> usize {
        *self.indices.iter().max().expect("tuples are never empty")
    }
}

impl From<&[usize]> for PointTuple {
    fn from(indices: &[usize]) -> Self {
        Self::new(indices.to_vec()).expect("tuple literals have at least two entries")
    }
}

/// One way of splitting a tuple for the triangle axiom: a leading block of
/// `s + 1` entries, a trailing block of `t + 1` entries with `s + t + 1 = n`,
/// and the mediator point both halves are padded with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub s: usize,
    pub t: usize,
    pub w_index: usize,
}

impl SplitSpec {
    /// All `(s, t)` shapes for a given order, mediator left to the caller.
    pub fn shapes(order: usize) -> Vec<(usize, usize)> {
        (0..order).map(|s| (s, order - 1 - s)).collect()
    }
}
