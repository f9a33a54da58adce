//! Random valid families over polynomial scales, for fuzzing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::asymptotics::{rational, AsymptoticScalar, Rational, ScaleBasis};
use crate::model::{RawSpec, ReducedSpec, SojournFamily};

/// Shape of generated families.
#[derive(Clone, Debug)]
pub struct RandomSpecOptions {
    pub min_states: usize,
    pub max_states: usize,
    /// Probability of an extra edge beyond the spanning cycle.
    pub edge_density: f64,
    /// Transition probabilities are `c * eps^k` with `k` in `0..=max_p_order`.
    pub max_p_order: i64,
    /// Times are `c * eps^k` with `k` in `time_orders`.
    pub time_orders: (i64, i64),
}

impl Default for RandomSpecOptions {
    fn default() -> Self {
        RandomSpecOptions {
            min_states: 2,
            max_states: 8,
            edge_density: 0.35,
            max_p_order: 3,
            time_orders: (-2, 1),
        }
    }
}

fn eps_power(coeff: Rational, order: i64) -> AsymptoticScalar {
    let basis = ScaleBasis::standard();
    let (idx, _) = basis.power_generator().expect("standard basis has inv_eps");
    // eps^order = inv_eps^-order
    AsymptoticScalar::power(idx, rational(-order, 1)).scale(&coeff)
}

fn random_scale<R: Rng + ?Sized>(rng: &mut R, orders: (i64, i64)) -> AsymptoticScalar {
    let coeff = rational(rng.random_range(1..=4), rng.random_range(1..=3));
    eps_power(coeff, rng.random_range(orders.0..=orders.1))
}

/// Strongly connected raw family with per-edge times; rows are not normalized.
pub fn random_raw_spec<R: Rng + ?Sized>(rng: &mut R, opts: &RandomSpecOptions) -> RawSpec {
    let m = rng.random_range(opts.min_states..=opts.max_states);
    let mut edges = vec![vec![false; m]; m];
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    for w in 0..m {
        edges[order[w]][order[(w + 1) % m]] = true;
    }
    for (i, row) in edges.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            if i != j && rng.random_bool(opts.edge_density) {
                *e = true;
            }
        }
    }
    let mut p = vec![vec![AsymptoticScalar::Zero; m]; m];
    let mut t = vec![vec![None; m]; m];
    for i in 0..m {
        let targets: Vec<usize> = (0..m).filter(|&j| edges[i][j]).collect();
        // at least one order-one entry per row keeps the family in the regime
        let lead = targets[rng.random_range(0..targets.len())];
        for &j in &targets {
            let k = if j == lead {
                0
            } else {
                rng.random_range(0..=opts.max_p_order)
            };
            let coeff = rational(rng.random_range(1..=4), rng.random_range(1..=3));
            p[i][j] = eps_power(coeff, k);
            t[i][j] = Some(random_scale(rng, opts.time_orders));
        }
    }
    RawSpec {
        basis: ScaleBasis::standard(),
        states: (1..=m).map(|i| i.to_string()).collect(),
        p,
        t,
        sojourn: vec![vec![SojournFamily::Exponential; m]; m],
    }
}

/// Random family with source-only times.
pub fn random_reduced_spec<R: Rng + ?Sized>(rng: &mut R, opts: &RandomSpecOptions) -> ReducedSpec {
    let raw = random_raw_spec(rng, opts);
    let tau = (0..raw.len())
        .map(|_| random_scale(rng, opts.time_orders))
        .collect();
    ReducedSpec {
        basis: raw.basis,
        states: raw.states,
        p: raw.p,
        tau,
        sojourn: vec![SojournFamily::Exponential; raw.t.len()],
        origin: None,
    }
    .normalized()
}
