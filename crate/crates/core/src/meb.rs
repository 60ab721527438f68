//! Exact smallest enclosing balls in dimensions 1 through 3 via Welzl's
//! move-to-front recursion. Point counts here are tiny (tuple arity), so the
//! usual random shuffle is skipped; correctness does not depend on order and
//! determinism is required by the evaluation contract.

// Containment slack: points that sit exactly on the boundary must count as
// inside despite rounding in the circumcenter solve.
const EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn none(dim: usize) -> Self {
        Self { center: vec![0.0; dim], radius: -1.0 }
    }

    fn contains(&self, p: &[f64]) -> bool {
        if self.radius < 0.0 {
            return false;
        }
        let d2: f64 = self.center.iter().zip(p).map(|(c, x)| (c - x) * (c - x)).sum();
        let r2 = self.radius * self.radius;
        d2 <= r2 + EPS * r2.max(1e-30)
    }
}

/// Smallest ball containing all points. `points` must be nonempty with a
/// common dimension of at most 3.
pub(crate) fn smallest_enclosing_ball(points: &[&[f64]]) -> Ball {
    debug_assert!(!points.is_empty());
    let dim = points[0].len();
    debug_assert!((1..=3).contains(&dim));
    let mut boundary: Vec<&[f64]> = Vec::with_capacity(dim + 1);
    welzl(points, points.len(), &mut boundary, dim)
}

fn welzl<'a>(points: &[&'a [f64]], n: usize, boundary: &mut Vec<&'a [f64]>, dim: usize) -> Ball {
    if n == 0 || boundary.len() == dim + 1 {
        return ball_of_boundary(boundary, dim);
    }
    let p = points[n - 1];
    let b = welzl(points, n - 1, boundary, dim);
    if b.contains(p) {
        return b;
    }
    boundary.push(p);
    let b = welzl(points, n - 1, boundary, dim);
    boundary.pop();
    b
}

/// Smallest ball with every boundary point on its surface: the circumball
/// inside the boundary's affine hull. Degenerate (affinely dependent)
/// boundaries yield the sentinel, which contains nothing and forces the
/// recursion to keep refining.
fn ball_of_boundary(boundary: &[&[f64]], dim: usize) -> Ball {
    match boundary.len() {
        0 => Ball::none(dim),
        1 => Ball { center: boundary[0].to_vec(), radius: 0.0 },
        k => {
            let a0 = boundary[0];
            // Solve 2 G x = rhs with G the Gram matrix of the edge vectors
            // v_i = a_i - a0 and rhs_i = |v_i|^2; the center is a0 + V x.
            let vs: Vec<Vec<f64>> = boundary[1..].iter().map(|a| sub(a, a0)).collect();
            let m = k - 1;
            let mut gram = vec![vec![0.0; m]; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    gram[i][j] = 2.0 * dot(&vs[i], &vs[j]);
                }
                rhs[i] = dot(&vs[i], &vs[i]);
            }
            let Some(x) = solve(&mut gram, &mut rhs) else {
                return Ball::none(dim);
            };
            let mut center = a0.to_vec();
            for i in 0..m {
                for (c, v) in center.iter_mut().zip(&vs[i]) {
                    *c += x[i] * v;
                }
            }
            let radius = dist(&center, a0);
            Ball { center, radius }
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    dot(&sub(a, b), &sub(a, b)).sqrt()
}

/// Gaussian elimination with partial pivoting on systems of size <= 3.
fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut v = b[row];
        for c in row + 1..n {
            v -= a[row][c] * x[c];
        }
        x[row] = v / a[row][row];
    }
    Some(x)
}
