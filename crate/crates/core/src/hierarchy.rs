//! Cluster hierarchy: rank kernels, invariant measures, visit counts and
//! time scales, built by repeatedly merging ergodic classes of the limit chain.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::asymptotics::{AsymptoticScalar, RatioLimit, Rational, ScaleBasis};
use crate::chain::{
    ergodic_decomposition, exit_rate, invariant_measure, limit_matrix, ChainError,
    ErgodicDecomposition, InvariantMeasure, LimitMatrix, ScalarMatrix, StateClass,
};
use crate::model::{Diagnostic, ReducedSpec, SpecError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("rank {rank} is out of range (top rank {top})")]
    RankOutOfRange { rank: usize, top: usize },
    #[error("no cluster {cluster} at rank {rank}")]
    NoSuchCluster { rank: usize, cluster: usize },
    #[error("no base state {0}")]
    NoSuchState(usize),
    #[error("no transition from cluster {from} to cluster {to} at rank {rank}")]
    NoTransition { rank: usize, from: usize, to: usize },
}

/// Expected exit time of a cluster; the top cluster never exits.
#[derive(Clone, Debug, PartialEq)]
pub enum ClusterTime {
    Finite(AsymptoticScalar),
    Infinity,
}

impl ClusterTime {
    pub fn finite(&self) -> Option<&AsymptoticScalar> {
        match self {
            ClusterTime::Finite(s) => Some(s),
            ClusterTime::Infinity => None,
        }
    }
}

/// Passage from rank `r` to rank `r + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    /// `P^r` over rank-`r` clusters.
    pub kernel: ScalarMatrix,
    pub limit: LimitMatrix,
    pub decomposition: ErgodicDecomposition,
    /// Rank-`r` cluster ids making up each rank-`r+1` cluster.
    pub groups: Vec<Vec<usize>>,
    /// Rank-`r+1` cluster of each rank-`r` cluster.
    pub parent: Vec<usize>,
    /// Invariant measure of each group; a point mass for transient singletons.
    pub measures: Vec<InvariantMeasure>,
}

impl Level {
    /// Whether rank-`r+1` cluster `k` is a closed class of the limit chain.
    pub fn is_closed(&self, k: usize) -> bool {
        matches!(
            self.decomposition.class_of[self.groups[k][0]],
            StateClass::Closed(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTree {
    basis: ScaleBasis,
    labels: Vec<String>,
    tau: Vec<AsymptoticScalar>,
    /// `clusters[r][k]`: base states, sorted.
    clusters: Vec<Vec<Vec<usize>>>,
    /// `membership[r][i]`: rank-`r` cluster of base state `i`.
    membership: Vec<Vec<usize>>,
    levels: Vec<Level>,
    times: Vec<Vec<ClusterTime>>,
    /// `visits[r][i]` for `r < R`.
    visits: Vec<Vec<AsymptoticScalar>>,
}

/// Leading-order kernel of the next rank:
/// `P_kl = sum_{i in k, j in l} lambda(i) P_ij / sum_{i in k, j not in k} lambda(i) P_ij`.
fn next_kernel(
    kernel: &ScalarMatrix,
    groups: &[Vec<usize>],
    parent: &[usize],
    measures: &[InvariantMeasure],
) -> ScalarMatrix {
    let n = groups.len();
    let mut out = vec![vec![AsymptoticScalar::Zero; n]; n];
    for (k, group) in groups.iter().enumerate() {
        let mut flows = vec![AsymptoticScalar::Zero; n];
        for &i in group {
            let w = measures[k]
                .weight(i)
                .cloned()
                .unwrap_or_else(Rational::zero);
            if !w.is_positive() {
                continue;
            }
            for (j, pij) in kernel[i].iter().enumerate() {
                let l = parent[j];
                if l != k && !pij.is_zero() {
                    flows[l] = flows[l].add(&pij.scale(&w));
                }
            }
        }
        let total = AsymptoticScalar::sum(&flows);
        for (l, flow) in flows.into_iter().enumerate() {
            if !flow.is_zero() {
                out[k][l] = flow.div(&total).expect("positive exit flow");
            }
        }
    }
    out
}

impl ClusterTree {
    /// Build the hierarchy of a reduced family. Rows are normalized first.
    pub fn build(spec: &ReducedSpec) -> Result<ClusterTree, HierarchyError> {
        let diags = spec.validate();
        if diags.iter().any(Diagnostic::is_error) {
            return Err(SpecError::Invalid(diags).into());
        }
        let spec = spec.normalized();
        let m = spec.len();

        let mut clusters: Vec<Vec<Vec<usize>>> = vec![(0..m).map(|i| vec![i]).collect()];
        let mut membership: Vec<Vec<usize>> = vec![(0..m).collect()];
        let mut levels: Vec<Level> = Vec::new();
        let mut kernel = spec.p.clone();

        while clusters.last().expect("rank 0").len() > 1 {
            assert!(levels.len() < m, "hierarchy failed to contract");
            let limit = limit_matrix(&kernel)?;
            let decomposition = ergodic_decomposition(&limit);
            let groups = decomposition.groups();
            let mut parent = vec![0usize; kernel.len()];
            for (k, g) in groups.iter().enumerate() {
                for &c in g {
                    parent[c] = k;
                }
            }
            let measures = groups
                .iter()
                .map(|g| {
                    if g.len() == 1 {
                        Ok(InvariantMeasure::point_mass(g[0]))
                    } else {
                        invariant_measure(&limit, g)
                    }
                })
                .collect::<Result<Vec<_>, ChainError>>()?;

            let prev = clusters.last().expect("rank r");
            let next_clusters: Vec<Vec<usize>> = groups
                .iter()
                .map(|g| {
                    let mut base: Vec<usize> =
                        g.iter().flat_map(|&c| prev[c].iter().copied()).collect();
                    base.sort_unstable();
                    base
                })
                .collect();
            let next_membership: Vec<usize> = membership
                .last()
                .expect("rank r")
                .iter()
                .map(|&c| parent[c])
                .collect();

            let next = if groups.len() > 1 {
                next_kernel(&kernel, &groups, &parent, &measures)
            } else {
                Vec::new()
            };
            levels.push(Level {
                kernel: std::mem::replace(&mut kernel, next),
                limit,
                decomposition,
                groups,
                parent,
                measures,
            });
            clusters.push(next_clusters);
            membership.push(next_membership);
        }

        let top = levels.len();
        // EN(i, r + 1) = EN(i, r) / exit_rate of pi^{r+1}(i) anchored at pi^r(i)
        let mut visits: Vec<Vec<AsymptoticScalar>> = Vec::with_capacity(top);
        if top > 0 {
            visits.push(vec![AsymptoticScalar::one(); m]);
        }
        for r in 0..top.saturating_sub(1) {
            let level = &levels[r];
            let row = (0..m)
                .map(|i| {
                    let anchor = membership[r][i];
                    let k = level.parent[anchor];
                    let rate =
                        exit_rate(&level.groups[k], &level.measures[k], &level.kernel, anchor)?;
                    let inv = rate.recip().map_err(|_| ChainError::NoExit)?;
                    Ok(visits[r][i].mul(&inv))
                })
                .collect::<Result<Vec<_>, ChainError>>()?;
            visits.push(row);
        }

        let mut times: Vec<Vec<ClusterTime>> = (0..top)
            .map(|r| {
                clusters[r]
                    .iter()
                    .map(|members| {
                        let terms: Vec<AsymptoticScalar> = members
                            .iter()
                            .map(|&i| spec.tau[i].mul(&visits[r][i]))
                            .collect();
                        ClusterTime::Finite(AsymptoticScalar::sum(&terms))
                    })
                    .collect()
            })
            .collect();
        times.push(vec![ClusterTime::Infinity]);

        Ok(ClusterTree {
            basis: spec.basis.clone(),
            labels: spec.states.clone(),
            tau: spec.tau.clone(),
            clusters,
            membership,
            levels,
            times,
            visits,
        })
    }

    pub fn basis(&self) -> &ScaleBasis {
        &self.basis
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn base_times(&self) -> &[AsymptoticScalar] {
        &self.tau
    }

    pub fn state_count(&self) -> usize {
        self.labels.len()
    }

    /// `R`: the rank at which a single cluster remains.
    pub fn top_rank(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, r: usize) -> Result<&Level, HierarchyError> {
        self.levels.get(r).ok_or(HierarchyError::RankOutOfRange {
            rank: r,
            top: self.top_rank(),
        })
    }

    pub fn clusters(&self, r: usize) -> Result<&[Vec<usize>], HierarchyError> {
        self.clusters
            .get(r)
            .map(Vec::as_slice)
            .ok_or(HierarchyError::RankOutOfRange {
                rank: r,
                top: self.top_rank(),
            })
    }

    /// Base states of cluster `(r, k)`.
    pub fn members(&self, r: usize, k: usize) -> Result<&[usize], HierarchyError> {
        self.clusters(r)?
            .get(k)
            .map(Vec::as_slice)
            .ok_or(HierarchyError::NoSuchCluster {
                rank: r,
                cluster: k,
            })
    }

    /// `pi^r(i)`.
    pub fn cluster_of(&self, i: usize, r: usize) -> Result<usize, HierarchyError> {
        if i >= self.state_count() {
            return Err(HierarchyError::NoSuchState(i));
        }
        self.membership
            .get(r)
            .map(|m| m[i])
            .ok_or(HierarchyError::RankOutOfRange {
                rank: r,
                top: self.top_rank(),
            })
    }

    /// Rank-`(r-1)` clusters inside cluster `(r, k)`; empty at rank 0.
    pub fn subclusters(&self, r: usize, k: usize) -> Result<&[usize], HierarchyError> {
        self.members(r, k)?;
        if r == 0 {
            return Ok(&[]);
        }
        Ok(&self.levels[r - 1].groups[k])
    }

    /// Expected visits to base state `i` before leaving `pi^r(i)`, to leading order.
    pub fn visit_count(&self, i: usize, r: usize) -> Result<&AsymptoticScalar, HierarchyError> {
        if i >= self.state_count() {
            return Err(HierarchyError::NoSuchState(i));
        }
        self.visits
            .get(r)
            .map(|row| &row[i])
            .ok_or(HierarchyError::RankOutOfRange {
                rank: r,
                top: self.top_rank(),
            })
    }

    pub fn time_scale(&self, r: usize, k: usize) -> Result<&ClusterTime, HierarchyError> {
        self.times
            .get(r)
            .ok_or(HierarchyError::RankOutOfRange {
                rank: r,
                top: self.top_rank(),
            })?
            .get(k)
            .ok_or(HierarchyError::NoSuchCluster {
                rank: r,
                cluster: k,
            })
    }

    /// Base-state landing law when rank-`r` cluster `k` jumps to cluster `l`.
    ///
    /// Each base edge `a -> j` with `a` in `k` and `j` in `l` is weighted by the
    /// visit count `EN(a, r)`; the weights are the limits of the normalized sums.
    pub fn entry_weights(
        &self,
        r: usize,
        k: usize,
        l: usize,
    ) -> Result<Vec<(usize, Rational)>, HierarchyError> {
        let level = self.level(r)?;
        let from = self.members(r, k)?;
        let to = self.members(r, l)?;
        if k == l || level.kernel[k][l].is_zero() {
            return Err(HierarchyError::NoTransition {
                rank: r,
                from: k,
                to: l,
            });
        }
        let base = &self.levels[0].kernel;
        let flow = |j: usize| {
            let terms: Vec<AsymptoticScalar> = from
                .iter()
                .map(|&a| self.visits[r][a].mul(&base[a][j]))
                .collect();
            AsymptoticScalar::sum(&terms)
        };
        let flows: Vec<AsymptoticScalar> = to.iter().map(|&j| flow(j)).collect();
        let total = AsymptoticScalar::sum(&flows);
        if total.is_zero() {
            return Err(HierarchyError::NoTransition {
                rank: r,
                from: k,
                to: l,
            });
        }
        Ok(to
            .iter()
            .zip(&flows)
            .map(|(&j, f)| {
                let w = f
                    .limit_ratio(&total)
                    .expect("nonzero total")
                    .as_rational()
                    .expect("part of a leading sum is finite");
                (j, w)
            })
            .collect())
    }

    /// Structural invariants of a built tree; returns a description of each violation.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        let one = AsymptoticScalar::one();
        for (r, level) in self.levels.iter().enumerate() {
            let (m_r, m_next) = (self.clusters[r].len(), self.clusters[r + 1].len());
            if m_next >= m_r {
                out.push(format!(
                    "rank {r}: {m_r} clusters do not contract (next has {m_next})"
                ));
            }
            for (k, row) in level.kernel.iter().enumerate() {
                if !row[k].is_zero() {
                    out.push(format!("rank {r}: nonzero diagonal at cluster {k}"));
                }
                if AsymptoticScalar::sum(row) != one {
                    out.push(format!(
                        "rank {r}: row {k} does not sum to 1 at leading order"
                    ));
                }
            }
            for (k, mu) in level.measures.iter().enumerate() {
                if level.is_closed(k) && !mu.residual(&level.limit).is_zero() {
                    out.push(format!(
                        "rank {r}: invariant measure of group {k} has nonzero residual"
                    ));
                }
                let total: Rational = mu.weights().iter().sum();
                if total != Rational::from_integer(1.into()) {
                    out.push(format!("rank {r}: measure of group {k} sums to {total}"));
                }
            }
            // cross-cluster entries are negligible against the next-rank kernel
            if r + 2 <= self.top_rank() {
                let next = &self.levels[r + 1].kernel;
                for s in 0..=r {
                    let lower = &self.levels[s].kernel;
                    for (a, row) in lower.iter().enumerate() {
                        let k = self.lift(s, a, r + 1);
                        if !level.is_closed(k) {
                            continue;
                        }
                        for (b, pab) in row.iter().enumerate() {
                            let l = self.lift(s, b, r + 1);
                            if k == l || pab.is_zero() || next[k][l].is_zero() {
                                continue;
                            }
                            if pab.limit_ratio(&next[k][l]) != Ok(RatioLimit::Zero) {
                                out.push(format!(
                                    "rank {s} entry ({a},{b}) is not negligible against rank {} entry ({k},{l})",
                                    r + 1
                                ));
                            }
                        }
                    }
                }
            }
            for k in 0..m_next {
                if level.groups[k].len() == 1 {
                    let c = level.groups[k][0];
                    if r + 1 < self.top_rank() && self.times[r][c] != self.times[r + 1][k] {
                        out.push(format!(
                            "rank {r}: transient promotion of cluster {c} changed its time"
                        ));
                    }
                }
            }
        }
        for r in 1..self.visits.len() {
            for i in 0..self.state_count() {
                let c = self.membership[r - 1][i];
                let k = self.levels[r - 1].parent[c];
                if self.levels[r - 1].groups[k].len() == 1
                    && self.visits[r][i] != self.visits[r - 1][i]
                {
                    out.push(format!(
                        "rank {r}: transient promotion changed EN of state {i}"
                    ));
                }
            }
        }
        out
    }

    /// Rank-`to` cluster containing rank-`from` cluster `c`.
    fn lift(&self, from: usize, c: usize, to: usize) -> usize {
        let base = self.clusters[from][c][0];
        self.membership[to][base]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{parse, rational as q};
    use crate::generate::{random_reduced_spec, RandomSpecOptions};
    use crate::model::SojournFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn reduced(p: &[&[&str]], tau: &[&str]) -> ReducedSpec {
        let b = ScaleBasis::standard();
        let m = p.len();
        ReducedSpec {
            basis: b.clone(),
            states: (1..=m).map(|i| i.to_string()).collect(),
            p: p.iter()
                .map(|row| row.iter().map(|e| parse(&b, e).unwrap()).collect())
                .collect(),
            tau: tau.iter().map(|e| parse(&b, e).unwrap()).collect(),
            sojourn: vec![SojournFamily::Exponential; m],
            origin: None,
        }
    }

    fn two_well() -> ReducedSpec {
        reduced(
            &[
                &["0", "1", "eps", "0"],
                &["1", "0", "0", "eps^2"],
                &["eps^2", "0", "0", "1"],
                &["0", "eps^3", "1", "0"],
            ],
            &["1", "1", "1", "1"],
        )
    }

    fn s(text: &str) -> AsymptoticScalar {
        parse(&ScaleBasis::standard(), text).unwrap()
    }

    #[test]
    fn two_well_hierarchy() {
        let tree = ClusterTree::build(&two_well()).unwrap();
        assert_eq!(tree.top_rank(), 2);
        assert_eq!(tree.clusters(1).unwrap(), &[vec![0, 1], vec![2, 3]]);
        assert_eq!(tree.clusters(2).unwrap(), &[vec![0, 1, 2, 3]]);
        let k1 = &tree.level(1).unwrap().kernel;
        assert_eq!(k1[0][1], s("1"));
        assert_eq!(k1[1][0], s("1"));
        assert_eq!(tree.visit_count(0, 0).unwrap(), &s("1"));
        assert_eq!(tree.visit_count(0, 1).unwrap(), &s("eps^-1"));
        assert_eq!(tree.visit_count(2, 1).unwrap(), &s("eps^-2"));
        assert!(matches!(
            tree.visit_count(0, 2),
            Err(HierarchyError::RankOutOfRange { .. })
        ));
        assert_eq!(
            tree.time_scale(1, 0).unwrap(),
            &ClusterTime::Finite(s("2*eps^-1"))
        );
        assert_eq!(
            tree.time_scale(1, 1).unwrap(),
            &ClusterTime::Finite(s("2*eps^-2"))
        );
        assert_eq!(tree.time_scale(0, 3).unwrap(), &ClusterTime::Finite(s("1")));
        assert_eq!(tree.time_scale(2, 0).unwrap(), &ClusterTime::Infinity);
        assert_eq!(
            tree.entry_weights(1, 0, 1).unwrap(),
            vec![(2, q(1, 1)), (3, q(0, 1))]
        );
        assert_eq!(
            tree.entry_weights(1, 1, 0).unwrap(),
            vec![(0, q(1, 1)), (1, q(0, 1))]
        );
        assert!(
            tree.check_invariants().is_empty(),
            "{:?}",
            tree.check_invariants()
        );
    }

    #[test]
    fn small_hierarchies() {
        let two = reduced(&[&["0", "1"], &["1", "0"]], &["1", "eps"]);
        let tree = ClusterTree::build(&two).unwrap();
        assert_eq!(tree.top_rank(), 1);
        assert_eq!(tree.clusters(1).unwrap(), &[vec![0, 1]]);

        let cyc = reduced(
            &[&["0", "1", "eps"], &["eps", "0", "1"], &["1", "eps", "0"]],
            &["1", "1", "1"],
        );
        let tree = ClusterTree::build(&cyc).unwrap();
        assert_eq!(tree.top_rank(), 1);
    }

    #[test]
    fn symmetric_leaks_split_entry_evenly() {
        let spec = reduced(
            &[
                &["0", "1", "eps", "0"],
                &["1", "0", "0", "eps"],
                &["eps^2", "0", "0", "1"],
                &["0", "eps^2", "1", "0"],
            ],
            &["1", "1", "1", "1"],
        );
        let tree = ClusterTree::build(&spec).unwrap();
        assert_eq!(
            tree.entry_weights(1, 0, 1).unwrap(),
            vec![(2, q(1, 2)), (3, q(1, 2))]
        );
    }

    #[test]
    fn single_state_target_gets_full_weight() {
        // 1 <-> 2 fast, both leak to 3, 3 returns to 1
        let spec = reduced(
            &[&["0", "1", "eps"], &["1", "0", "eps"], &["1", "0", "0"]],
            &["1", "1", "1"],
        );
        let tree = ClusterTree::build(&spec).unwrap();
        assert_eq!(tree.top_rank(), 2);
        assert_eq!(tree.clusters(1).unwrap(), &[vec![0, 1], vec![2]]);
        assert_eq!(tree.entry_weights(1, 0, 1).unwrap(), vec![(2, q(1, 1))]);
        // transient singleton {3} keeps its time across the promotion
        assert_eq!(
            tree.time_scale(1, 1).unwrap(),
            tree.time_scale(0, 2).unwrap()
        );
        assert!(tree.check_invariants().is_empty());
    }

    #[test]
    fn random_trees_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let spec = random_reduced_spec(&mut rng, &RandomSpecOptions::default());
            let tree = ClusterTree::build(&spec).unwrap();
            assert!(tree.top_rank() < spec.len());
            let problems = tree.check_invariants();
            assert!(problems.is_empty(), "{problems:?}");
        }
    }
}
