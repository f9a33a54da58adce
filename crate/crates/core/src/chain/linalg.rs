use num_traits::{One, Zero};

use crate::asymptotics::Rational;

/// Solve `a x = b` exactly by Gaussian elimination over the rationals.
///
/// Returns `None` when `a` is singular.
pub fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = a.len();
    assert_eq!(b.len(), n, "right-hand side length mismatch");
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] * &inv;
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Exact absorption probabilities of a finite chain.
///
/// `q` is the transient-to-transient block and `r` the transient-to-absorbing
/// block; returns `(I - Q)^-1 R` row for `start`.
pub fn absorption_row(
    q: &[Vec<Rational>],
    r: &[Vec<Rational>],
    start: usize,
) -> Option<Vec<Rational>> {
    let n = q.len();
    let absorbing = r.first().map_or(0, Vec::len);
    let i_minus_q: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let id = if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    };
                    id - &q[i][j]
                })
                .collect()
        })
        .collect();
    // h_a = (I - Q)^-1 R e_a, one solve per absorbing column
    let mut row = Vec::with_capacity(absorbing);
    for a in 0..absorbing {
        let rhs: Vec<Rational> = (0..n).map(|i| r[i][a].clone()).collect();
        let h = solve(i_minus_q.clone(), rhs)?;
        row.push(h[start].clone());
    }
    Some(row)
}
