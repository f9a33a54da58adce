//! Dense fundamental-matrix computations on an evaluated kernel.

use nalgebra::{DMatrix, DVector};

use super::MonteCarloError;

/// Relative residual allowed for a dense solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// `I - Q` for the block of `p` on `set`.
fn i_minus_q(p: &[Vec<f64>], set: &[usize]) -> DMatrix<f64> {
    let n = set.len();
    DMatrix::from_fn(n, n, |a, b| {
        let id = if a == b { 1.0 } else { 0.0 };
        id - p[set[a]][set[b]]
    })
}

fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, MonteCarloError> {
    let x = a.clone().lu().solve(b).ok_or(MonteCarloError::Singular)?;
    let residual = (a * &x - b).amax();
    let scale = b.amax().max(1.0) * x.amax().max(1.0);
    if residual.is_nan() || residual > RESIDUAL_TOL * scale {
        return Err(MonteCarloError::Singular);
    }
    Ok(x)
}

fn position(set: &[usize], start: usize) -> Result<usize, MonteCarloError> {
    set.iter()
        .position(|&s| s == start)
        .ok_or_else(|| MonteCarloError::BadRequest("start must lie in the set".into()))
}

/// Expected visits to each state of `set` (in set order) before leaving it,
/// starting from `start` and counting the start itself.
pub fn oracle_visits(
    p: &[Vec<f64>],
    set: &[usize],
    start: usize,
) -> Result<Vec<f64>, MonteCarloError> {
    let a = position(set, start)?;
    let n = set.len();
    // row a of (I - Q)^-1 solves (I - Q)^T x = e_a
    let mut e = DMatrix::zeros(n, 1);
    e[(a, 0)] = 1.0;
    let x = solve(&i_minus_q(p, set).transpose(), &e)?;
    Ok(x.column(0).iter().copied().collect())
}

/// Distribution of the first state outside `set`, as `(state, probability)`
/// over the complement in state order.
pub fn oracle_hitting(
    p: &[Vec<f64>],
    set: &[usize],
    start: usize,
) -> Result<Vec<(usize, f64)>, MonteCarloError> {
    let a = position(set, start)?;
    let outside: Vec<usize> = (0..p.len()).filter(|s| !set.contains(s)).collect();
    let r = DMatrix::from_fn(set.len(), outside.len(), |i, j| p[set[i]][outside[j]]);
    let h = solve(&i_minus_q(p, set), &r)?;
    Ok(outside
        .iter()
        .enumerate()
        .map(|(j, &s)| (s, h[(a, j)]))
        .collect())
}

/// Expected time to leave `set` from `start`.
pub fn oracle_mean_exit(
    p: &[Vec<f64>],
    means: &[f64],
    set: &[usize],
    start: usize,
) -> Result<f64, MonteCarloError> {
    let a = position(set, start)?;
    let b = DVector::from_iterator(set.len(), set.iter().map(|&s| means[s]));
    let x = solve(
        &i_minus_q(p, set),
        &DMatrix::from_column_slice(set.len(), 1, b.as_slice()),
    )?;
    Ok(x[(a, 0)])
}
