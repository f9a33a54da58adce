use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::kernel::{pick, ConcreteKernel};
use super::stats::{wilson_interval, Interval};
use super::MonteCarloError;

pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9)";

/// Generator for one path: the batch seed picks the key, the path index the stream.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Fans paths out over the rayon pool; sequential without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Path simulation unless the expected jump count exceeds the budget and
    /// every sojourn law is exponential.
    #[default]
    Auto,
    Path,
    /// Exact state-at-time sampling for exponential sojourns by uniformization.
    Uniformized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub execution: Execution,
    pub sampler: Sampler,
    /// Expected total jumps above which `Auto` switches to uniformization.
    pub jump_budget: f64,
    /// Cap on embedded steps across a batch of exit-time paths.
    pub max_steps: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            execution: Execution::default(),
            sampler: Sampler::Auto,
            jump_budget: 2e9,
            max_steps: 1_000_000_000,
        }
    }
}

/// Run `f` for path indices `0..n`; results come back in index order.
pub fn run_paths<T, F>(n: u64, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Initial law: a point or a finite mixture.
#[derive(Clone, Debug, PartialEq)]
pub enum Start {
    State(usize),
    Mixture(Vec<(usize, f64)>),
}

impl Start {
    fn cumulative(&self) -> Vec<(usize, f64)> {
        match self {
            Start::State(i) => vec![(*i, 1.0)],
            Start::Mixture(w) => {
                let total: f64 = w.iter().map(|(_, x)| x).sum();
                let mut acc = 0.0;
                let mut out: Vec<(usize, f64)> = w
                    .iter()
                    .filter(|(_, x)| *x > 0.0)
                    .map(|&(i, x)| {
                        acc += x / total;
                        (i, acc)
                    })
                    .collect();
                if let Some(last) = out.last_mut() {
                    last.1 = 1.0;
                }
                out
            }
        }
    }

    fn draw<R: Rng + ?Sized>(cumulative: &[(usize, f64)], rng: &mut R) -> usize {
        if cumulative.len() == 1 {
            cumulative[0].0
        } else {
            pick(cumulative, rng.random::<f64>())
        }
    }
}

/// One simulated trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    pub seed: u64,
    pub stream: u64,
    /// `(state, sojourn)` pairs; the last sojourn reaches past the horizon.
    pub steps: Vec<(usize, f64)>,
}

/// Simulate until the clock passes `horizon`.
pub fn sample_path(
    kernel: &ConcreteKernel,
    start: usize,
    horizon: f64,
    seed: u64,
    stream: u64,
) -> PathSample {
    let mut rng = path_rng(seed, stream);
    let mut steps = Vec::new();
    let (mut state, mut clock) = (start, 0.0);
    loop {
        let d = kernel.sojourn(state, &mut rng);
        steps.push((state, d));
        clock += d;
        if clock > horizon {
            break;
        }
        state = kernel.next_state(state, &mut rng);
    }
    PathSample {
        seed,
        stream,
        steps,
    }
}

fn state_at_by_path<R: Rng + ?Sized>(
    kernel: &ConcreteKernel,
    start: usize,
    t: f64,
    rng: &mut R,
) -> usize {
    let (mut state, mut clock) = (start, 0.0);
    loop {
        clock += kernel.sojourn(state, rng);
        if clock > t {
            return state;
        }
        state = kernel.next_state(state, rng);
    }
}

/// Powers `U^(2^k)` of the uniformized jump matrix `U = I + Q / rate`.
struct Uniformization {
    rate: f64,
    powers: Vec<Vec<Vec<(usize, f64)>>>,
}

impl Uniformization {
    fn new(kernel: &ConcreteKernel, max_jumps: u64) -> Uniformization {
        let m = kernel.len();
        let rates: Vec<f64> = kernel.means().iter().map(|mean| 1.0 / mean).collect();
        let rate = rates.iter().cloned().fold(0.0, f64::max);
        let mut u = vec![vec![0.0; m]; m];
        for i in 0..m {
            let leave = rates[i] / rate;
            for (j, pij) in kernel.probabilities()[i].iter().enumerate() {
                u[i][j] = leave * pij;
            }
            u[i][i] += 1.0 - leave;
        }
        let levels = (64 - max_jumps.leading_zeros()).max(1) as usize;
        let mut dense = vec![u];
        for _ in 1..levels {
            let prev = dense.last().expect("one power");
            let mut sq = vec![vec![0.0; m]; m];
            for i in 0..m {
                for k in 0..m {
                    let a = prev[i][k];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        sq[i][j] += a * prev[k][j];
                    }
                }
                let total: f64 = sq[i].iter().sum();
                sq[i].iter_mut().for_each(|v| *v /= total);
            }
            dense.push(sq);
        }
        let powers = dense
            .iter()
            .map(|mat| {
                mat.iter()
                    .map(|row| {
                        let mut acc = 0.0;
                        let mut out: Vec<(usize, f64)> = row
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| **v > 0.0)
                            .map(|(j, v)| {
                                acc += v;
                                (j, acc)
                            })
                            .collect();
                        if let Some(last) = out.last_mut() {
                            last.1 = 1.0;
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Uniformization { rate, powers }
    }

    fn state_at<R: Rng + ?Sized>(&self, start: usize, t: f64, rng: &mut R) -> usize {
        let jumps = Poisson::new(self.rate * t)
            .map(|d| d.sample(rng) as u64)
            .unwrap_or(0);
        let mut state = start;
        for (k, power) in self.powers.iter().enumerate() {
            if jumps >> k & 1 == 1 {
                state = pick(&power[state], rng.random::<f64>());
            }
        }
        state
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationResult {
    pub eps: f64,
    pub time: f64,
    pub samples: u64,
    pub seed: u64,
    pub rng: String,
    pub sampler: Sampler,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub intervals: Vec<Interval>,
}

/// Which sampler `Auto` resolves to for a batch.
pub fn choose_sampler(kernel: &ConcreteKernel, t: f64, n: u64, opts: &SimOptions) -> Sampler {
    match opts.sampler {
        Sampler::Auto => {
            let min_mean = kernel.means().iter().cloned().fold(f64::INFINITY, f64::min);
            let expected = t / min_mean * n as f64;
            if expected > opts.jump_budget && kernel.all_exponential() {
                Sampler::Uniformized
            } else {
                Sampler::Path
            }
        }
        s => s,
    }
}

/// State occupied at clock time `t` on `n` independent paths.
pub fn occupation_distribution(
    kernel: &ConcreteKernel,
    start: &Start,
    t: f64,
    n: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<OccupationResult, MonteCarloError> {
    if n == 0 || !(t > 0.0 && t.is_finite()) {
        return Err(MonteCarloError::BadRequest(
            "need n >= 1 and a positive finite time".into(),
        ));
    }
    let starts = start.cumulative();
    if starts.iter().any(|(i, _)| *i >= kernel.len()) || starts.is_empty() {
        return Err(MonteCarloError::BadRequest(
            "start state out of range".into(),
        ));
    }
    let sampler = choose_sampler(kernel, t, n, opts);
    let finals = match sampler {
        Sampler::Uniformized => {
            if !kernel.all_exponential() {
                return Err(MonteCarloError::BadRequest(
                    "uniformization needs exponential sojourns".into(),
                ));
            }
            let rate_t = kernel.means().iter().map(|m| t / m).fold(0.0, f64::max);
            // Poisson tail far beyond the mean still fits the precomputed powers
            let cap = (rate_t + 50.0 * rate_t.sqrt() + 100.0).min(1.8e19) as u64;
            let uni = Uniformization::new(kernel, cap);
            run_paths(n, opts.execution, |p| {
                let mut rng = path_rng(seed, p);
                let s = Start::draw(&starts, &mut rng);
                uni.state_at(s, t, &mut rng)
            })
        }
        _ => run_paths(n, opts.execution, |p| {
            let mut rng = path_rng(seed, p);
            let s = Start::draw(&starts, &mut rng);
            state_at_by_path(kernel, s, t, &mut rng)
        }),
    };
    let mut counts = vec![0u64; kernel.len()];
    for s in finals {
        counts[s] += 1;
    }
    let frequencies = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let intervals = counts.iter().map(|&c| wilson_interval(c, n)).collect();
    Ok(OccupationResult {
        eps: kernel.eps(),
        time: t,
        samples: n,
        seed,
        rng: RNG_NAME.into(),
        sampler,
        counts,
        frequencies,
        intervals,
    })
}

/// Outcome of one path run until it leaves a set.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitPath {
    pub time: f64,
    pub landing: usize,
    /// Visits to each state of the set, in set order, counting the start.
    pub visits: Vec<u64>,
}

fn exit_path<R: Rng + ?Sized>(
    kernel: &ConcreteKernel,
    inside: &[bool],
    index: &[usize],
    start: usize,
    cap: u64,
    rng: &mut R,
    visits: usize,
) -> Result<ExitPath, MonteCarloError> {
    let mut counts = vec![0u64; visits];
    let (mut state, mut clock, mut steps) = (start, 0.0, 0u64);
    loop {
        counts[index[state]] += 1;
        clock += kernel.sojourn(state, rng);
        state = kernel.next_state(state, rng);
        steps += 1;
        if !inside[state] {
            return Ok(ExitPath {
                time: clock,
                landing: state,
                visits: counts,
            });
        }
        if steps >= cap {
            return Err(MonteCarloError::StepLimit(cap));
        }
    }
}

fn exit_setup(
    kernel: &ConcreteKernel,
    set: &[usize],
    start: usize,
) -> Result<(Vec<bool>, Vec<usize>), MonteCarloError> {
    let m = kernel.len();
    if set.iter().any(|&s| s >= m) || !set.contains(&start) {
        return Err(MonteCarloError::BadRequest(
            "start must lie in the set".into(),
        ));
    }
    let mut inside = vec![false; m];
    let mut index = vec![usize::MAX; m];
    for (k, &s) in set.iter().enumerate() {
        inside[s] = true;
        index[s] = k;
    }
    // exit must be reachable from the start
    let mut seen = vec![false; m];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reachable = false;
    while let Some(v) = stack.pop() {
        for (w, p) in kernel.probabilities()[v].iter().enumerate() {
            if *p > 0.0 && !seen[w] {
                seen[w] = true;
                if inside[w] {
                    stack.push(w);
                } else {
                    reachable = true;
                }
            }
        }
    }
    if !reachable {
        return Err(MonteCarloError::BadRequest(
            "no exit is reachable from the start".into(),
        ));
    }
    Ok((inside, index))
}

/// Simulate `n` paths from `start` until they leave `set`.
pub fn exit_paths(
    kernel: &ConcreteKernel,
    set: &[usize],
    start: usize,
    n: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<ExitPath>, MonteCarloError> {
    let (inside, index) = exit_setup(kernel, set, start)?;
    let cap = (opts.max_steps / n.max(1)).max(1);
    run_paths(n, opts.execution, |p| {
        let mut rng = path_rng(seed, p);
        exit_path(kernel, &inside, &index, start, cap, &mut rng, set.len())
    })
    .into_iter()
    .collect()
}

/// Exit times from a cluster of at least two states.
pub fn exit_time_samples(
    kernel: &ConcreteKernel,
    cluster: &[usize],
    start: usize,
    n: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<f64>, MonteCarloError> {
    if cluster.len() < 2 {
        return Err(MonteCarloError::BadRequest(
            "exit-time law needs a cluster of at least two states".into(),
        ));
    }
    Ok(exit_paths(kernel, cluster, start, n, seed, opts)?
        .into_iter()
        .map(|p| p.time)
        .collect())
}
