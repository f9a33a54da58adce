//! Embedded-chain analysis at a single rank: limit matrices, ergodic
//! decomposition, exact invariant measures and leading-order exit asymptotics.

mod graph;
pub mod linalg;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::asymptotics::{AsymptoticScalar, RatioLimit, Rational};

pub use graph::{is_strongly_connected, strongly_connected_components};

pub type ScalarMatrix = Vec<Vec<AsymptoticScalar>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("row {row} of the transition matrix does not have leading sum 1")]
    NotStochastic { row: usize },
    #[error("state {0} is not in the class")]
    NotInClass(usize),
    #[error("class {0:?} is not closed under the limit chain")]
    NotClosed(Vec<usize>),
    #[error("balance equations for class {0:?} are singular")]
    Singular(Vec<usize>),
    #[error("anchor state {0} has zero invariant weight")]
    ZeroAnchorWeight(usize),
    #[error("target set is empty or overlaps the class")]
    InvalidTarget,
    #[error("the class has no exit transitions")]
    NoExit,
}

/// Exact-rational limit of a leading-order kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LimitMatrix {
    rows: Vec<Vec<Rational>>,
}

impl LimitMatrix {
    /// Entry `(i, j)` is the coefficient of `P_ij` when it is a pure constant and
    /// zero when it vanishes as `eps -> 0`.
    pub fn from_scalars(p: &ScalarMatrix) -> Result<Self, ChainError> {
        let mut rows = Vec::with_capacity(p.len());
        for (i, row) in p.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for entry in row {
                match entry.limit() {
                    RatioLimit::Infinite => return Err(ChainError::NotStochastic { row: i }),
                    lim => out.push(lim.as_rational().expect("finite limit")),
                }
            }
            if out.iter().sum::<Rational>() != Rational::one() {
                return Err(ChainError::NotStochastic { row: i });
            }
            rows.push(out);
        }
        Ok(LimitMatrix { rows })
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        LimitMatrix { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_positive())
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

/// Shorthand for [`LimitMatrix::from_scalars`].
pub fn limit_matrix(p: &ScalarMatrix) -> Result<LimitMatrix, ChainError> {
    LimitMatrix::from_scalars(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateClass {
    Closed(usize),
    Transient,
}

/// Closed classes and transient singletons of a limit chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErgodicDecomposition {
    /// Closed communicating classes, each sorted, ordered by smallest member.
    pub closed: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
    pub class_of: Vec<StateClass>,
}

impl ErgodicDecomposition {
    /// All groups of the partition: closed classes and transient singletons,
    /// ordered by smallest member.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = self
            .closed
            .iter()
            .cloned()
            .chain(self.transient.iter().map(|&t| vec![t]))
            .collect();
        groups.sort_by_key(|g| g[0]);
        groups
    }
}

/// Condense the positive-entry digraph; closed classes are the sink components.
pub fn ergodic_decomposition(p0: &LimitMatrix) -> ErgodicDecomposition {
    let adj = p0.adjacency();
    let comps = strongly_connected_components(&adj);
    let mut comp_of = vec![0usize; adj.len()];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    let mut closed = Vec::new();
    let mut transient = Vec::new();
    for (c, comp) in comps.iter().enumerate() {
        let is_sink = comp
            .iter()
            .all(|&v| adj[v].iter().all(|&w| comp_of[w] == c));
        if is_sink {
            closed.push(comp.clone());
        } else {
            transient.extend(comp.iter().copied());
        }
    }
    closed.sort_by_key(|c| c[0]);
    transient.sort_unstable();
    let mut class_of = vec![StateClass::Transient; adj.len()];
    for (k, class) in closed.iter().enumerate() {
        for &v in class {
            class_of[v] = StateClass::Closed(k);
        }
    }
    ErgodicDecomposition {
        closed,
        transient,
        class_of,
    }
}

/// Probability vector over one class of states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantMeasure {
    states: Vec<usize>,
    weights: Vec<Rational>,
}

impl InvariantMeasure {
    pub fn point_mass(state: usize) -> Self {
        InvariantMeasure {
            states: vec![state],
            weights: vec![Rational::one()],
        }
    }

    /// Build from explicit weights; used when the caller already knows the measure.
    pub fn from_weights(states: Vec<usize>, weights: Vec<Rational>) -> Self {
        assert_eq!(states.len(), weights.len());
        InvariantMeasure { states, weights }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, state: usize) -> Option<&Rational> {
        self.states
            .iter()
            .position(|&s| s == state)
            .map(|i| &self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.states.iter().copied().zip(self.weights.iter())
    }

    /// `max_j |(lambda P)_j - lambda_j|` over the class.
    pub fn residual(&self, p0: &LimitMatrix) -> Rational {
        self.states
            .iter()
            .enumerate()
            .map(|(jj, &j)| {
                let flow: Rational = self.iter().map(|(i, w)| w * p0.get(i, j)).sum();
                (flow - &self.weights[jj]).abs()
            })
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

/// Unique stationary vector of the limit chain restricted to a closed class,
/// solved exactly.
pub fn invariant_measure(
    p0: &LimitMatrix,
    class: &[usize],
) -> Result<InvariantMeasure, ChainError> {
    let mut states = class.to_vec();
    states.sort_unstable();
    states.dedup();
    for &i in &states {
        let inside: Rational = states.iter().map(|&j| p0.get(i, j).clone()).sum();
        if inside != Rational::one() {
            return Err(ChainError::NotClosed(states));
        }
    }
    let n = states.len();
    // Row j of the system: sum_i lambda_i (P_ij - delta_ij) = 0; the last row is
    // replaced by the normalization.
    let mut a = vec![vec![Rational::zero(); n]; n];
    let mut b = vec![Rational::zero(); n];
    for (jj, &j) in states.iter().enumerate().take(n - 1) {
        for (ii, &i) in states.iter().enumerate() {
            let mut v = p0.get(i, j).clone();
            if i == j {
                v -= Rational::one();
            }
            a[jj][ii] = v;
        }
    }
    a[n - 1] = vec![Rational::one(); n];
    b[n - 1] = Rational::one();
    let weights = linalg::solve(a, b).ok_or_else(|| ChainError::Singular(states.clone()))?;
    if weights.iter().any(|w| w.is_negative()) {
        return Err(ChainError::Singular(states));
    }
    Ok(InvariantMeasure { states, weights })
}

/// `sum_{j in set, k in target} lambda(j) P_jk` at leading order.
fn weighted_flow(
    set: &[usize],
    lambda: &InvariantMeasure,
    p: &ScalarMatrix,
    target: impl Fn(usize) -> bool,
) -> AsymptoticScalar {
    let mut total = AsymptoticScalar::Zero;
    for &j in set {
        let w = match lambda.weight(j) {
            Some(w) if w.is_positive() => w,
            _ => continue,
        };
        for (k, pjk) in p[j].iter().enumerate() {
            if target(k) {
                total = total.add(&pjk.scale(w));
            }
        }
    }
    total
}

/// Leading-order probability of leaving `set` before returning to `anchor`:
/// `(1/lambda(anchor)) sum_{j in set, k not in set} lambda(j) P_jk`.
///
/// Its reciprocal is the expected number of visits to `anchor` before exit. A
/// set without exits yields the zero scalar.
pub fn exit_rate(
    set: &[usize],
    lambda: &InvariantMeasure,
    p: &ScalarMatrix,
    anchor: usize,
) -> Result<AsymptoticScalar, ChainError> {
    if !set.contains(&anchor) {
        return Err(ChainError::NotInClass(anchor));
    }
    let anchor_weight = match lambda.weight(anchor) {
        Some(w) if w.is_positive() => w.clone(),
        _ => return Err(ChainError::ZeroAnchorWeight(anchor)),
    };
    let flow = weighted_flow(set, lambda, p, |k| !set.contains(&k));
    Ok(flow.scale(&anchor_weight.recip()))
}

/// Limit probability that the first exit from `set` lands in `target`.
pub fn exit_distribution(
    set: &[usize],
    lambda: &InvariantMeasure,
    p: &ScalarMatrix,
    target: &[usize],
) -> Result<RatioLimit, ChainError> {
    if target.is_empty() || target.iter().any(|t| set.contains(t)) {
        return Err(ChainError::InvalidTarget);
    }
    let num = weighted_flow(set, lambda, p, |k| target.contains(&k));
    let den = weighted_flow(set, lambda, p, |k| !set.contains(&k));
    num.limit_ratio(&den).map_err(|_| ChainError::NoExit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{parse, rational as q, ScaleBasis};

    fn matrix(entries: &[&[&str]]) -> ScalarMatrix {
        let b = ScaleBasis::standard();
        entries
            .iter()
            .map(|row| row.iter().map(|e| parse(&b, e).unwrap()).collect())
            .collect()
    }

    #[test]
    fn limit_matrix_examples() {
        let p = matrix(&[
            &["0", "1", "eps"],
            &["1/2", "0", "1/2"],
            &["1", "2*eps*log_inv_eps", "0"],
        ]);
        let l = limit_matrix(&p).unwrap();
        assert_eq!(l.rows()[0], vec![q(0, 1), q(1, 1), q(0, 1)]);
        assert_eq!(l.rows()[1], vec![q(1, 2), q(0, 1), q(1, 2)]);
        assert_eq!(l.rows()[2], vec![q(1, 1), q(0, 1), q(0, 1)]);
        let bad = matrix(&[&["0", "eps^-1"], &["1", "0"]]);
        assert_eq!(
            limit_matrix(&bad),
            Err(ChainError::NotStochastic { row: 0 })
        );
    }

    #[test]
    fn decomposition_examples() {
        // 2-cycle with transient 3
        let p = matrix(&[&["0", "1", "0"], &["1", "0", "0"], &["1", "0", "0"]]);
        let d = ergodic_decomposition(&limit_matrix(&p).unwrap());
        assert_eq!(d.closed, vec![vec![0, 1]]);
        assert_eq!(d.transient, vec![2]);
        assert_eq!(d.groups(), vec![vec![0, 1], vec![2]]);

        // two disjoint 2-cycles, leakage vanishes in the limit
        let p = matrix(&[
            &["0", "1", "eps", "0"],
            &["1", "0", "0", "eps^2"],
            &["eps^2", "0", "0", "1"],
            &["0", "eps^3", "1", "0"],
        ]);
        let d = ergodic_decomposition(&limit_matrix(&p).unwrap());
        assert_eq!(d.closed, vec![vec![0, 1], vec![2, 3]]);
        assert!(d.transient.is_empty());

        let p = matrix(&[&["0", "1", "0"], &["0", "0", "1"], &["1", "0", "0"]]);
        let d = ergodic_decomposition(&limit_matrix(&p).unwrap());
        assert_eq!(d.closed, vec![vec![0, 1, 2]]);
    }

    fn balance_oracle(p: &[Vec<f64>]) -> Vec<f64> {
        // power iteration on the lazy chain, independent of the exact solver
        let n = p.len();
        let mut v = vec![1.0 / n as f64; n];
        for _ in 0..20_000 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                next[i] += 0.5 * v[i];
                for j in 0..n {
                    next[j] += 0.5 * v[i] * p[i][j];
                }
            }
            v = next;
        }
        v
    }

    #[test]
    fn invariant_measure_examples() {
        let cyc2 = matrix(&[&["0", "1"], &["1", "0"]]);
        let l = limit_matrix(&cyc2).unwrap();
        assert_eq!(
            invariant_measure(&l, &[0, 1]).unwrap().weights(),
            &[q(1, 2), q(1, 2)]
        );

        let cyc3 = matrix(&[&["0", "1", "0"], &["0", "0", "1"], &["1", "0", "0"]]);
        let l = limit_matrix(&cyc3).unwrap();
        assert_eq!(
            invariant_measure(&l, &[0, 1, 2]).unwrap().weights(),
            &[q(1, 3), q(1, 3), q(1, 3)]
        );

        let p = matrix(&[&["0", "1", "0"], &["1/2", "0", "1/2"], &["1", "0", "0"]]);
        let l = limit_matrix(&p).unwrap();
        let lam = invariant_measure(&l, &[0, 1, 2]).unwrap();
        assert_eq!(lam.weights(), &[q(2, 5), q(2, 5), q(1, 5)]);
        assert!(lam.residual(&l).is_zero());
        let oracle = balance_oracle(&[
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![1.0, 0.0, 0.0],
        ]);
        for (o, e) in oracle.iter().zip([0.4, 0.4, 0.2]) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_measure_rejects_open_class() {
        let p = matrix(&[&["0", "1", "0"], &["1", "0", "0"], &["1", "0", "0"]]);
        let l = limit_matrix(&p).unwrap();
        assert!(matches!(
            invariant_measure(&l, &[0, 2]),
            Err(ChainError::NotClosed(_))
        ));
    }

    #[test]
    fn exit_rate_examples() {
        let b = ScaleBasis::standard();
        let p = matrix(&[
            &["0", "1", "eps", "0"],
            &["1", "0", "0", "eps^2"],
            &["0", "0", "0", "1"],
            &["0", "0", "1", "0"],
        ]);
        let half = InvariantMeasure::from_weights(vec![0, 1], vec![q(1, 2), q(1, 2)]);
        let rate = exit_rate(&[0, 1], &half, &p, 0).unwrap();
        assert_eq!(rate, parse(&b, "eps").unwrap());
        assert_eq!(rate.recip().unwrap(), parse(&b, "eps^-1").unwrap());

        let closed = matrix(&[&["0", "1"], &["1", "0"]]);
        assert!(exit_rate(&[0, 1], &half, &closed, 0).unwrap().is_zero());

        let p = matrix(&[&["0", "1", "eps"], &["1", "0", "eps"], &["1", "0", "0"]]);
        let skew = InvariantMeasure::from_weights(vec![0, 1], vec![q(2, 3), q(1, 3)]);
        assert_eq!(
            exit_rate(&[0, 1], &skew, &p, 0).unwrap(),
            parse(&b, "3/2*eps").unwrap()
        );
        let zero_anchor = InvariantMeasure::from_weights(vec![0, 1], vec![q(0, 1), q(1, 1)]);
        assert_eq!(
            exit_rate(&[0, 1], &zero_anchor, &p, 0),
            Err(ChainError::ZeroAnchorWeight(0))
        );
    }

    #[test]
    fn exit_distribution_examples() {
        let half = InvariantMeasure::from_weights(vec![0, 1], vec![q(1, 2), q(1, 2)]);
        let p = matrix(&[
            &["0", "1", "eps", "0"],
            &["1", "0", "0", "eps^2"],
            &["0", "0", "0", "1"],
            &["0", "0", "1", "0"],
        ]);
        assert_eq!(
            exit_distribution(&[0, 1], &half, &p, &[2]).unwrap(),
            RatioLimit::Finite(q(1, 1))
        );
        assert_eq!(
            exit_distribution(&[0, 1], &half, &p, &[3]).unwrap(),
            RatioLimit::Zero
        );

        let p = matrix(&[
            &["0", "1", "eps", "eps"],
            &["1", "0", "0", "0"],
            &["0", "0", "0", "1"],
            &["0", "0", "1", "0"],
        ]);
        let p_sym = {
            let mut p = p.clone();
            p[0][3] = AsymptoticScalar::Zero;
            p[1][3] = parse(&ScaleBasis::standard(), "eps").unwrap();
            p
        };
        assert_eq!(
            exit_distribution(&[0, 1], &half, &p_sym, &[2]).unwrap(),
            RatioLimit::Finite(q(1, 2))
        );

        let p = matrix(&[
            &["0", "1", "2*eps", "0"],
            &["1", "0", "eps", "eps"],
            &["0", "0", "0", "1"],
            &["0", "0", "1", "0"],
        ]);
        assert_eq!(
            exit_distribution(&[0, 1], &half, &p, &[2]).unwrap(),
            RatioLimit::Finite(q(3, 4))
        );
        assert_eq!(
            exit_distribution(&[0, 1], &half, &p, &[3]).unwrap(),
            RatioLimit::Finite(q(1, 4))
        );
        assert_eq!(
            exit_distribution(&[0, 1], &half, &p, &[1]),
            Err(ChainError::InvalidTarget)
        );
        let closed = matrix(&[&["0", "1", "0"], &["1", "0", "0"], &["1", "0", "0"]]);
        assert_eq!(
            exit_distribution(&[0, 1], &half, &closed, &[2]),
            Err(ChainError::NoExit)
        );
    }
}
