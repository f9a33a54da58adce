//! Time-scale lattice and metastable distributions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::asymptotics::{AsymptoticScalar, Order, Rational, ScaleBasis};
use crate::chain::linalg::absorption_row;
use crate::hierarchy::{ClusterTime, ClusterTree, HierarchyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetastableError {
    #[error(
        "time scale {time} is commensurate with lattice scale {scale}; no limit is defined there"
    )]
    Commensurate {
        time: String,
        scale: String,
        class: usize,
    },
    #[error("the time scale must be positive")]
    ZeroTime,
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// One commensurability class of cluster time scales.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeClass {
    pub scale: AsymptoticScalar,
    /// Smallest `(rank, cluster)` whose time scale lies in the class.
    pub rank: usize,
    pub cluster: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LatticePoint {
    Zero,
    Class(usize),
    Infinity,
}

/// Sorted commensurability classes of all finite cluster time scales.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeScaleLattice {
    basis: ScaleBasis,
    classes: Vec<LatticeClass>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TimeClass {
    /// Strictly between points `index` and `index + 1` of `[0, c_1, .., c_n, inf]`.
    Interval(usize),
    Commensurate(usize),
}

impl TimeScaleLattice {
    pub fn new(tree: &ClusterTree) -> TimeScaleLattice {
        let mut classes: Vec<LatticeClass> = Vec::new();
        for r in 0..tree.top_rank() {
            for k in 0..tree.clusters(r).expect("rank in range").len() {
                let scale = match tree.time_scale(r, k).expect("cluster exists") {
                    ClusterTime::Finite(s) => s.clone(),
                    ClusterTime::Infinity => continue,
                };
                if !classes.iter().any(|c| c.scale.is_commensurate(&scale)) {
                    classes.push(LatticeClass {
                        scale,
                        rank: r,
                        cluster: k,
                    });
                }
            }
        }
        classes.sort_by(|a, b| a.scale.cmp_order(&b.scale));
        TimeScaleLattice {
            basis: tree.basis().clone(),
            classes,
        }
    }

    pub fn classes(&self) -> &[LatticeClass] {
        &self.classes
    }

    /// Number of open intervals between consecutive points.
    pub fn interval_count(&self) -> usize {
        self.classes.len() + 1
    }

    pub fn bounds(&self, interval: usize) -> (LatticePoint, LatticePoint) {
        let n = self.classes.len();
        assert!(interval <= n, "interval out of range");
        let lower = if interval == 0 {
            LatticePoint::Zero
        } else {
            LatticePoint::Class(interval - 1)
        };
        let upper = if interval == n {
            LatticePoint::Infinity
        } else {
            LatticePoint::Class(interval)
        };
        (lower, upper)
    }

    pub fn classify(&self, t: &AsymptoticScalar) -> Result<TimeClass, MetastableError> {
        if t.is_zero() {
            return Err(MetastableError::ZeroTime);
        }
        let mut below = 0;
        for (idx, c) in self.classes.iter().enumerate() {
            match t.compare(&c.scale) {
                Order::MuchLarger => below = idx + 1,
                Order::Commensurate => return Ok(TimeClass::Commensurate(idx)),
                Order::MuchSmaller => break,
            }
        }
        Ok(TimeClass::Interval(below))
    }

    /// Deterministic time scale inside an interval. `variant` 0 is the default
    /// (mean exponents); other variants give distinct points of the same interval.
    pub fn representative(&self, interval: usize, variant: u32) -> AsymptoticScalar {
        let n = self.classes.len();
        assert!(interval <= n, "interval out of range");
        let g = self.basis.stepping_generator();
        let steps = i64::from(variant) + 1;
        let step = |base: &AsymptoticScalar, dir: i64| {
            base.mul(&AsymptoticScalar::power(
                g,
                Rational::from_integer((dir * steps).into()),
            ))
        };
        if n == 0 {
            return AsymptoticScalar::one();
        }
        if interval == 0 {
            return step(&self.classes[0].scale, -1);
        }
        if interval == n {
            return step(&self.classes[n - 1].scale, 1);
        }
        let a = &self.classes[interval - 1].scale;
        let b = &self.classes[interval].scale;
        // point at fraction w of the way from a to b in exponent space
        let w = Rational::new(1.into(), (i64::from(variant) + 2).into());
        let coeff = if variant == 0 {
            Rational::one()
        } else {
            Rational::new(7.into(), 3.into())
        };
        let exps = |s: &AsymptoticScalar| {
            s.monomial()
                .map(|m| m.exponents().clone())
                .unwrap_or_default()
        };
        let (ea, eb) = (exps(a), exps(b));
        let mut out = BTreeMap::new();
        for key in ea.keys().chain(eb.keys()) {
            let x = ea.get(key).cloned().unwrap_or_else(Rational::zero);
            let y = eb.get(key).cloned().unwrap_or_else(Rational::zero);
            out.insert(*key, &x + (&y - &x) * &w);
        }
        AsymptoticScalar::new(coeff, out).expect("positive coefficient")
    }

    pub fn point_text(&self, p: &LatticePoint) -> String {
        match p {
            LatticePoint::Zero => "0".into(),
            LatticePoint::Class(i) => self.classes[*i].scale.display(&self.basis).to_string(),
            LatticePoint::Infinity => "inf".into(),
        }
    }
}

/// Probability measure over base states with exact weights.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateDistribution {
    weights: BTreeMap<usize, Rational>,
}

impl StateDistribution {
    pub fn point(state: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(state, Rational::one());
        StateDistribution { weights }
    }

    /// Add `w * other`; zero weights are dropped.
    pub fn add_scaled(&mut self, w: &Rational, other: &StateDistribution) {
        if w.is_zero() {
            return;
        }
        for (s, v) in &other.weights {
            let e = self.weights.entry(*s).or_insert_with(Rational::zero);
            *e += w * v;
        }
    }

    pub fn get(&self, state: usize) -> Rational {
        self.weights
            .get(&state)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.weights.iter().map(|(s, w)| (*s, w))
    }

    pub fn total(&self) -> Rational {
        self.weights.values().sum()
    }

    /// Dense vector over `n` states.
    pub fn to_dense(&self, n: usize) -> Vec<Rational> {
        (0..n).map(|i| self.get(i)).collect()
    }
}

impl fmt::Display for StateDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(s, w)| format!("{s}: {w}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Limit-weight mixture over sibling clusters: `lambda(k) * c_k`, normalized, with
/// `c_k = lim tau_k / max tau`.
fn slow_weights(
    tree: &ClusterTree,
    r: usize,
    group: usize,
    siblings: &[usize],
) -> Vec<(usize, Rational)> {
    let level = tree.level(r).expect("rank below top");
    let times: Vec<&AsymptoticScalar> = siblings
        .iter()
        .map(|&k| {
            tree.time_scale(r, k)
                .expect("cluster")
                .finite()
                .expect("finite below top")
        })
        .collect();
    let max = times
        .iter()
        .copied()
        .max_by(|a, b| a.cmp_order(b))
        .expect("nonempty group");
    let raw: Vec<(usize, Rational)> = siblings
        .iter()
        .zip(&times)
        .map(|(&k, t)| {
            let c = t
                .limit_ratio(max)
                .expect("nonzero max")
                .as_rational()
                .expect("bounded by the max");
            let lam = level.measures[group]
                .weight(k)
                .cloned()
                .unwrap_or_else(Rational::zero);
            (k, lam * c)
        })
        .collect();
    let total: Rational = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(k, w)| (k, w / &total)).collect()
}

/// Limiting within-cluster law at times long enough to mix the cluster but
/// short of leaving it.
pub fn internal_equilibrium(
    tree: &ClusterTree,
    r: usize,
    k: usize,
) -> Result<StateDistribution, MetastableError> {
    let members = tree.members(r, k)?;
    if members.len() == 1 {
        return Ok(StateDistribution::point(members[0]));
    }
    // descend through ranks where the cluster is a single promoted subcluster
    let (mut rank, mut c) = (r, k);
    while tree.subclusters(rank, c)?.len() == 1 {
        c = tree.subclusters(rank, c)?[0];
        rank -= 1;
    }
    let sub_rank = rank - 1;
    let subs = tree.subclusters(rank, c)?.to_vec();
    let mut out = StateDistribution::default();
    for (l, w) in slow_weights(tree, sub_rank, c, &subs) {
        if !w.is_zero() {
            out.add_scaled(&w, &internal_equilibrium(tree, sub_rank, l)?);
        }
    }
    Ok(out)
}

/// Resolves metastable distributions for one time scale, memoized per state.
struct Resolver<'a> {
    tree: &'a ClusterTree,
    t: &'a AsymptoticScalar,
    memo: HashMap<usize, StateDistribution>,
}

impl Resolver<'_> {
    fn time(&self, r: usize, k: usize) -> Option<&AsymptoticScalar> {
        self.tree.time_scale(r, k).expect("cluster exists").finite()
    }

    fn faster(&self, r: usize, k: usize) -> bool {
        self.time(r, k)
            .is_some_and(|tau| self.t.compare(tau) == Order::MuchLarger)
    }

    /// `rank_bound`: the resolved rank must be strictly below it.
    fn resolve(
        &mut self,
        i: usize,
        rank_bound: usize,
    ) -> Result<StateDistribution, MetastableError> {
        if let Some(d) = self.memo.get(&i) {
            return Ok(d.clone());
        }
        let tree = self.tree;
        if !self.faster(0, i) {
            let d = StateDistribution::point(i);
            self.memo.insert(i, d.clone());
            return Ok(d);
        }
        let r = (0..tree.top_rank())
            .filter(|&r| self.faster(r, tree.cluster_of(i, r).expect("state")))
            .max()
            .expect("rank 0 qualifies");
        assert!(r < rank_bound, "metastable recursion did not descend");
        let own = tree.cluster_of(i, r)?;
        let group = tree.cluster_of(i, r + 1)?;
        let level = tree.level(r)?;
        let siblings = level.groups[group].clone();
        let (fast, slow): (Vec<usize>, Vec<usize>) =
            siblings.iter().partition(|&&k| self.faster(r, k));

        let mut out = StateDistribution::default();
        if slow.is_empty() {
            for (k, w) in slow_weights(tree, r, group, &siblings) {
                if !w.is_zero() {
                    out.add_scaled(&w, &internal_equilibrium(tree, r, k)?);
                }
            }
        } else {
            // absorbing chain: fast clusters are transient, base states of slow
            // clusters absorb through the entry weights
            let targets: Vec<usize> = slow
                .iter()
                .flat_map(|&l| tree.members(r, l).expect("cluster").iter().copied())
                .collect();
            let col = |j: usize| targets.iter().position(|&x| x == j).expect("target");
            let n = fast.len();
            let mut q = vec![vec![Rational::zero(); n]; n];
            let mut rm = vec![vec![Rational::zero(); targets.len()]; n];
            for (a, &k) in fast.iter().enumerate() {
                for (b, &l) in fast.iter().enumerate() {
                    q[a][b] = level.limit.get(k, l).clone();
                }
                for &l in &slow {
                    let p = level.limit.get(k, l);
                    if p.is_zero() {
                        continue;
                    }
                    for (j, w) in tree.entry_weights(r, k, l)? {
                        rm[a][col(j)] += p * &w;
                    }
                }
            }
            let start = fast
                .iter()
                .position(|&k| k == own)
                .expect("own cluster is fast");
            let nu = absorption_row(&q, &rm, start).expect("slow clusters are reachable");
            for (j, w) in targets.iter().zip(&nu) {
                if !w.is_zero() {
                    let sub = self.resolve(*j, r)?;
                    out.add_scaled(w, &sub);
                }
            }
        }
        self.memo.insert(i, out.clone());
        Ok(out)
    }
}

/// Limit law of the state at time `t` from base state `i`.
pub fn metastable_distribution(
    tree: &ClusterTree,
    lattice: &TimeScaleLattice,
    i: usize,
    t: &AsymptoticScalar,
) -> Result<StateDistribution, MetastableError> {
    if let TimeClass::Commensurate(c) = lattice.classify(t)? {
        let basis = tree.basis();
        return Err(MetastableError::Commensurate {
            time: t.display(basis).to_string(),
            scale: lattice.classes()[c].scale.display(basis).to_string(),
            class: c,
        });
    }
    if i >= tree.state_count() {
        return Err(HierarchyError::NoSuchState(i).into());
    }
    Resolver {
        tree,
        t,
        memo: HashMap::new(),
    }
    .resolve(i, tree.top_rank() + 1)
}

/// Mixture of metastable laws over an initial distribution.
pub fn metastable_mixture(
    tree: &ClusterTree,
    lattice: &TimeScaleLattice,
    start: &[(usize, Rational)],
    t: &AsymptoticScalar,
) -> Result<StateDistribution, MetastableError> {
    let mut out = StateDistribution::default();
    for (i, w) in start {
        if !w.is_zero() {
            out.add_scaled(w, &metastable_distribution(tree, lattice, *i, t)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub interval: usize,
    pub lower: LatticePoint,
    pub upper: LatticePoint,
    pub representative: AsymptoticScalar,
    pub mu: StateDistribution,
}

/// Metastable law in every lattice interval from an initial distribution.
pub fn full_report(
    tree: &ClusterTree,
    lattice: &TimeScaleLattice,
    start: &[(usize, Rational)],
) -> Result<Vec<ReportRow>, MetastableError> {
    (0..lattice.interval_count())
        .map(|interval| {
            let t = lattice.representative(interval, 0);
            let (lower, upper) = lattice.bounds(interval);
            Ok(ReportRow {
                interval,
                lower,
                upper,
                mu: metastable_mixture(tree, lattice, start, &t)?,
                representative: t,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{parse, rational as q};
    use crate::generate::{random_reduced_spec, RandomSpecOptions};
    use crate::model::{ReducedSpec, SojournFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reduced(p: &[&[&str]], tau: &[&str]) -> ReducedSpec {
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

    fn s(text: &str) -> AsymptoticScalar {
        parse(&ScaleBasis::standard(), text).unwrap()
    }

    fn dense(d: &StateDistribution, n: usize) -> Vec<Rational> {
        d.to_dense(n)
    }

    fn two_well_tree() -> ClusterTree {
        ClusterTree::build(&reduced(
            &[
                &["0", "1", "eps", "0"],
                &["1", "0", "0", "eps^2"],
                &["eps^2", "0", "0", "1"],
                &["0", "eps^3", "1", "0"],
            ],
            &["1", "1", "1", "1"],
        ))
        .unwrap()
    }

    #[test]
    fn two_well_lattice() {
        let tree = two_well_tree();
        let lat = TimeScaleLattice::new(&tree);
        let scales: Vec<_> = lat.classes().iter().map(|c| c.scale.clone()).collect();
        assert_eq!(scales, vec![s("1"), s("2*eps^-1"), s("2*eps^-2")]);
        assert_eq!(
            lat.classify(&s("eps^-1/2")).unwrap(),
            TimeClass::Interval(1)
        );
        assert_eq!(
            lat.classify(&s("3*eps^-1")).unwrap(),
            TimeClass::Commensurate(1)
        );
        assert_eq!(lat.classify(&s("eps^-3")).unwrap(), TimeClass::Interval(3));
        assert_eq!(lat.representative(1, 0), s("eps^-1/2"));
        assert_eq!(lat.representative(2, 0), s("eps^-3/2"));
        assert_eq!(lat.representative(3, 0), s("2*eps^-3"));
        assert_eq!(lat.representative(0, 0), s("eps"));
        assert_eq!(lat.representative(1, 1), s("7/3*eps^-1/3"));
    }

    #[test]
    fn small_lattices() {
        let two = ClusterTree::build(&reduced(&[&["0", "1"], &["1", "0"]], &["1", "eps"])).unwrap();
        let lat = TimeScaleLattice::new(&two);
        let scales: Vec<_> = lat.classes().iter().map(|c| c.scale.clone()).collect();
        assert_eq!(scales, vec![s("eps"), s("1")]);

        let flat = ClusterTree::build(&reduced(
            &[&["0", "1", "0"], &["0", "0", "1"], &["1", "0", "0"]],
            &["2", "1", "1/2"],
        ))
        .unwrap();
        assert_eq!(TimeScaleLattice::new(&flat).classes().len(), 1);
    }

    #[test]
    fn two_well_distributions() {
        let tree = two_well_tree();
        let lat = TimeScaleLattice::new(&tree);
        let half = q(1, 2);
        let zero = q(0, 1);
        let mu = metastable_distribution(&tree, &lat, 0, &s("eps^-1/2")).unwrap();
        assert_eq!(
            dense(&mu, 4),
            vec![half.clone(), half.clone(), zero.clone(), zero.clone()]
        );
        let mu = metastable_distribution(&tree, &lat, 0, &s("eps^-3/2")).unwrap();
        assert_eq!(
            dense(&mu, 4),
            vec![zero.clone(), zero.clone(), half.clone(), half.clone()]
        );
        let mu = metastable_distribution(&tree, &lat, 0, &s("eps")).unwrap();
        assert_eq!(mu, StateDistribution::point(0));
        assert!(matches!(
            metastable_distribution(&tree, &lat, 0, &s("3*eps^-1")),
            Err(MetastableError::Commensurate { class: 1, .. })
        ));

        let report = full_report(&tree, &lat, &[(0, q(1, 1))]).unwrap();
        let mus: Vec<_> = report.iter().map(|row| dense(&row.mu, 4)).collect();
        assert_eq!(mus.len(), 4);
        assert_eq!(
            mus[0],
            vec![q(1, 1), zero.clone(), zero.clone(), zero.clone()]
        );
        assert_eq!(
            mus[1],
            vec![half.clone(), half.clone(), zero.clone(), zero.clone()]
        );
        assert_eq!(
            mus[2],
            vec![zero.clone(), zero.clone(), half.clone(), half.clone()]
        );
        assert_eq!(mus[3], mus[2]);
    }

    #[test]
    fn internal_equilibrium_examples() {
        let tree = two_well_tree();
        assert_eq!(
            internal_equilibrium(&tree, 0, 2).unwrap(),
            StateDistribution::point(2)
        );
        let a = internal_equilibrium(&tree, 1, 0).unwrap();
        assert_eq!(a.to_dense(2), vec![q(1, 2), q(1, 2)]);

        let skew =
            ClusterTree::build(&reduced(&[&["0", "1"], &["1", "0"]], &["1", "eps"])).unwrap();
        assert_eq!(
            internal_equilibrium(&skew, 1, 0).unwrap(),
            StateDistribution::point(0)
        );
    }

    #[test]
    fn two_state_report() {
        let tree =
            ClusterTree::build(&reduced(&[&["0", "1"], &["1", "0"]], &["1", "eps"])).unwrap();
        let lat = TimeScaleLattice::new(&tree);
        let report = full_report(&tree, &lat, &[(1, q(1, 1))]).unwrap();
        let mus: Vec<_> = report.iter().map(|row| row.mu.clone()).collect();
        assert_eq!(
            mus,
            vec![
                StateDistribution::point(1),
                StateDistribution::point(0),
                StateDistribution::point(0)
            ]
        );
    }

    #[test]
    fn single_rank_matches_weighted_equilibrium() {
        // lambda = (2/5, 2/5, 1/5), tau = (1, 3, 2): lambda*tau / sum = (2, 6, 2) / 10
        let tree = ClusterTree::build(&reduced(
            &[&["0", "1", "0"], &["1/2", "0", "1/2"], &["1", "0", "0"]],
            &["1", "3", "2"],
        ))
        .unwrap();
        let lat = TimeScaleLattice::new(&tree);
        let t = lat.representative(lat.interval_count() - 1, 0);
        for i in 0..3 {
            let mu = metastable_distribution(&tree, &lat, i, &t).unwrap();
            assert_eq!(mu.to_dense(3), vec![q(1, 5), q(3, 5), q(1, 5)]);
        }
    }

    #[test]
    fn random_reports_are_probability_measures_and_interval_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let spec = random_reduced_spec(&mut rng, &RandomSpecOptions::default());
            let tree = ClusterTree::build(&spec).unwrap();
            let lat = TimeScaleLattice::new(&tree);
            for i in 0..spec.len() {
                for interval in 0..lat.interval_count() {
                    let a = lat.representative(interval, 0);
                    let b = lat.representative(interval, 1);
                    assert_eq!(lat.classify(&a).unwrap(), TimeClass::Interval(interval));
                    assert_eq!(lat.classify(&b).unwrap(), TimeClass::Interval(interval));
                    let mu_a = metastable_distribution(&tree, &lat, i, &a).unwrap();
                    let mu_b = metastable_distribution(&tree, &lat, i, &b).unwrap();
                    assert_eq!(mu_a.total(), q(1, 1));
                    assert_eq!(mu_a, mu_b);
                }
            }
        }
    }
}
