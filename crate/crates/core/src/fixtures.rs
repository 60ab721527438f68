//! Seeded generators for ground samples, metric matrices, corrupted
//! matrices, and random self-map tables. Everything here is a pure
//! function of its seed, so test failures replay exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

use crate::space::{GroundSample, MetricSource, Points};

/// Nonnegative scalar sample on a hundredths grid: `size` distinct values
/// drawn from {0, 0.01, .., 10·size/100}. The grid keeps base distances
/// exact in binary-friendly decimals and guarantees distinctness.
pub fn scalar_sample(seed: u64, size: usize) -> GroundSample {
    assert!(size >= 2, "samples need at least two points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    while picked.len() < size {
        picked.insert(rng.gen_range(0..=10 * size as u64));
    }
    let values: Vec<f64> = picked.into_iter().map(|v| v as f64 * 0.01).collect();
    GroundSample::scalars(&values, MetricSource::L1).expect("grid values are distinct")
}

/// Vector sample of the given dimension (1 to 3) on the same hundredths
/// grid, with distinct points.
pub fn vector_sample(seed: u64, size: usize, dim: usize, source: MetricSource) -> GroundSample {
    assert!(size >= 2, "samples need at least two points");
    assert!((1..=3).contains(&dim), "vector fixtures cover dimensions 1-3");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut points = Vec::with_capacity(size);
    while points.len() < size {
        let grid: Vec<u64> = (0..dim).map(|_| rng.gen_range(0..=100u64)).collect();
        if seen.insert(grid.clone()) {
            points.push(grid.into_iter().map(|v| v as f64 * 0.01).collect());
        }
    }
    GroundSample::new(Points::Vectors(points), source).expect("grid points are distinct")
}

/// Random metric matrix: distances of scalar points embedded on the grid,
/// plus a flat 0.5 off the diagonal. The offset keeps the triangle
/// inequality strict, so single-entry corruptions stay detectable.
pub fn metric_matrix(seed: u64, size: usize) -> Vec<Vec<f64>> {
    assert!(size >= 2, "matrices need at least two points");
    let embedded = scalar_sample(seed, size);
    let mut matrix = vec![vec![0.0; size]; size];
    for a in 0..size {
        for b in 0..size {
            if a != b {
                matrix[a][b] = embedded.distance(a, b) + 0.5;
            }
        }
    }
    matrix
}

/// Labelled sample carrying [`metric_matrix`]'s distances.
pub fn label_sample(seed: u64, size: usize) -> GroundSample {
    let labels = (0..size).map(|i| format!("p{i}")).collect();
    GroundSample::new(Points::Labels(labels), MetricSource::Explicit(metric_matrix(seed, size)))
        .expect("offset embedded distances form a metric")
}

/// Ways to break exactly one metric axiom in an otherwise valid matrix.
/// Asymmetry is excluded: samples refuse asymmetric matrices outright, so
/// it can never reach the axiom checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    /// One off-diagonal entry inflated past every two-leg detour.
    TriangleInflate,
    /// One off-diagonal entry zeroed: two distinct points at distance 0.
    ZeroOffDiag,
    /// One off-diagonal entry made negative.
    NegativeEntry,
    /// One diagonal entry made positive.
    DiagShift,
}

pub const ALL_CORRUPTIONS: [Corruption; 4] = [
    Corruption::TriangleInflate,
    Corruption::ZeroOffDiag,
    Corruption::NegativeEntry,
    Corruption::DiagShift,
];

/// Returns a copy of `matrix` with one seeded defect of the given kind.
/// The result stays symmetric, so it still loads via the unvalidated
/// constructor; only the value-level axioms break.
pub fn corrupt_matrix(matrix: &[Vec<f64>], kind: Corruption, seed: u64) -> Vec<Vec<f64>> {
    let size = matrix.len();
    assert!(size >= 2, "matrices need at least two points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = matrix.to_vec();
    let a = rng.gen_range(0..size);
    let b = (a + rng.gen_range(1..size)) % size;
    match kind {
        Corruption::TriangleInflate => {
            let detour = (0..size)
                .map(|w| out[a][w] + out[w][b])
                .fold(0.0f64, f64::max);
            let v = 1.5 * detour + 1.0;
            out[a][b] = v;
            out[b][a] = v;
        }
        Corruption::ZeroOffDiag => {
            out[a][b] = 0.0;
            out[b][a] = 0.0;
        }
        Corruption::NegativeEntry => {
            let v = -rng.gen_range(0.1..1.0);
            out[a][b] = v;
            out[b][a] = v;
        }
        Corruption::DiagShift => {
            out[a][a] = rng.gen_range(0.1..1.0);
        }
    }
    out
}

/// Random self-map table over `size` indices, biased toward constant maps
/// (half the seeds): constant maps always pass strict-decrease validation,
/// so downstream suites get a steady supply of positive cases.
pub fn random_table(seed: u64, size: usize) -> Vec<usize> {
    assert!(size >= 1, "tables need at least one entry");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if rng.gen_bool(0.5) {
        vec![rng.gen_range(0..size); size]
    } else {
        (0..size).map(|_| rng.gen_range(0..size)).collect()
    }
}
