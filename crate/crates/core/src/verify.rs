//! Verification battery: asymptotic predictions against dense oracles and
//! Monte Carlo at concrete `eps`.

use std::fmt::Write as _;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticScalar;
use crate::hierarchy::{ClusterTime, ClusterTree};
use crate::metastable::{full_report, TimeScaleLattice};
use crate::model::ReducedSpec;
use crate::montecarlo::{
    choose_sampler, occupation_distribution, oracle_hitting, oracle_mean_exit, oracle_visits,
    ConcreteKernel, Sampler, SimOptions, Start, RNG_NAME,
};
use crate::report::{marginal_map, start_distribution, table, LabelMap, Presentation};

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub eps_list: Vec<f64>,
    /// `eps` for the Monte Carlo checks; the smallest listed value by default.
    pub mc_eps: Option<f64>,
    pub samples: u64,
    pub seed: u64,
    /// Start labels for the occupancy checks; the first state by default.
    pub starts: Vec<String>,
    pub oracle_tol: f64,
    pub hitting_tol: f64,
    pub occupancy_tol: f64,
    /// Expected path jumps above which a non-uniformizable occupancy check is skipped.
    pub path_jump_limit: f64,
    pub sim: SimOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            eps_list: vec![1e-1, 1e-2, 1e-3],
            mc_eps: None,
            samples: 20_000,
            seed: 0,
            starts: Vec::new(),
            oracle_tol: 0.05,
            hitting_tol: 0.01,
            occupancy_tol: 0.03,
            path_jump_limit: 5e9,
            sim: SimOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Untestable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckDoc {
    pub kind: String,
    pub subject: String,
    pub eps: Vec<f64>,
    /// Error at each `eps`; `None` where the comparison is not testable.
    pub errors: Vec<Option<f64>>,
    pub tolerance: f64,
    /// Errors shrink along the listed `eps` (largest first), over testable values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decreasing: Option<bool>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub checks: Vec<CheckDoc>,
    pub passed: usize,
    pub failed: usize,
    pub untestable: usize,
    pub rng: String,
    pub seed: u64,
}

impl VerifyDoc {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn to_text(&self) -> String {
        let fmt_err = |e: &Option<f64>| e.map_or("-".into(), |x| format!("{x:.3e}"));
        let rows: Vec<Vec<String>> = self
            .checks
            .iter()
            .map(|c| {
                vec![
                    format!("{:?}", c.status).to_uppercase(),
                    c.kind.clone(),
                    c.subject.clone(),
                    c.eps
                        .iter()
                        .zip(&c.errors)
                        .map(|(e, x)| format!("{e}:{}", fmt_err(x)))
                        .collect::<Vec<_>>()
                        .join(" "),
                    c.tolerance.to_string(),
                    c.notes.join("; "),
                ]
            })
            .collect();
        let mut out = table(
            &["status", "check", "subject", "eps:error", "tol", "notes"],
            &rows,
        );
        let _ = writeln!(
            out,
            "\n{} passed, {} failed, {} untestable (seed {}, {})",
            self.passed, self.failed, self.untestable, self.seed, self.rng
        );
        out
    }
}

fn decreasing(errors: &[Option<f64>]) -> Option<bool> {
    let xs: Vec<f64> = errors.iter().flatten().copied().collect();
    (xs.len() >= 2).then(|| xs.windows(2).all(|w| w[1] < w[0]))
}

fn finish(mut c: CheckDoc) -> CheckDoc {
    c.decreasing = decreasing(&c.errors);
    // the smallest testable eps decides
    let last = c
        .eps
        .iter()
        .zip(&c.errors)
        .filter_map(|(e, x)| x.map(|x| (*e, x)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    c.status = match last {
        None => Status::Untestable,
        Some((_, x)) if x < c.tolerance => Status::Pass,
        Some(_) => Status::Fail,
    };
    c
}

/// Kernel at `eps`, or the reason the comparison cannot be made there.
fn kernel_at(spec: &ReducedSpec, eps: f64) -> Result<ConcreteKernel, String> {
    let k = ConcreteKernel::instantiate(spec, eps).map_err(|e| e.to_string())?;
    if let Some(&(i, j)) = k.underflowed().first() {
        return Err(format!(
            "eps={eps}: {} -> {} underflows to 0",
            spec.states[i], spec.states[j]
        ));
    }
    Ok(k)
}

fn evaluate(tree: &ClusterTree, s: &AsymptoticScalar, eps: f64) -> Result<f64, String> {
    match s.evaluate(tree.basis(), eps) {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!(
            "eps={eps}: {} evaluates to {v}",
            s.display(tree.basis())
        )),
        Err(e) => Err(format!("eps={eps}: {e}")),
    }
}

/// Composite clusters, each at the lowest rank where its member set appears.
fn composite_clusters(tree: &ClusterTree) -> Vec<(usize, usize)> {
    let mut seen: Vec<&[usize]> = Vec::new();
    let mut out = Vec::new();
    for r in 1..=tree.top_rank() {
        for (k, members) in tree.clusters(r).expect("rank in range").iter().enumerate() {
            if members.len() >= 2 && !seen.contains(&members.as_slice()) {
                seen.push(members);
                out.push((r, k));
            }
        }
    }
    out
}

fn subject(tree: &ClusterTree, r: usize, k: usize) -> String {
    let members = tree.members(r, k).expect("cluster exists");
    let labels: Vec<&str> = members.iter().map(|&i| tree.labels()[i].as_str()).collect();
    format!("rank {r} cluster {k} {{{}}}", labels.join(","))
}

pub fn verify(
    spec: &ReducedSpec,
    tree: &ClusterTree,
    lattice: &TimeScaleLattice,
    opts: &VerifyOptions,
) -> VerifyDoc {
    let mut eps_list = opts.eps_list.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    let kernels: Vec<Result<ConcreteKernel, String>> =
        eps_list.iter().map(|&e| kernel_at(spec, e)).collect();
    let mut checks = Vec::new();

    for (r, k) in composite_clusters(tree) {
        let members = tree.members(r, k).expect("cluster exists").to_vec();
        let start = members[0];
        let blank = |kind: &str, subject: String, tolerance: f64| CheckDoc {
            kind: kind.into(),
            subject,
            eps: eps_list.clone(),
            errors: Vec::new(),
            tolerance,
            decreasing: None,
            status: Status::Untestable,
            notes: Vec::new(),
        };

        if let ClusterTime::Finite(tau) = tree.time_scale(r, k).expect("cluster exists") {
            let mut c = blank("mean_exit", subject(tree, r, k), opts.oracle_tol);
            for (eps, kernel) in eps_list.iter().zip(&kernels) {
                let err = kernel.clone().and_then(|kernel| {
                    let predicted = evaluate(tree, tau, *eps)?;
                    let exact =
                        oracle_mean_exit(kernel.probabilities(), kernel.means(), &members, start)
                            .map_err(|e| format!("eps={eps}: {e}"))?;
                    Ok((exact / predicted - 1.0).abs())
                });
                push(&mut c, err);
            }
            checks.push(finish(c));
        }

        if r < tree.top_rank() {
            for (pos, &i) in members.iter().enumerate() {
                let en = tree.visit_count(i, r).expect("rank below top").clone();
                let mut c = blank(
                    "visits",
                    format!("state {} in {}", tree.labels()[i], subject(tree, r, k)),
                    opts.oracle_tol,
                );
                for (eps, kernel) in eps_list.iter().zip(&kernels) {
                    let err = kernel.clone().and_then(|kernel| {
                        let predicted = evaluate(tree, &en, *eps)?;
                        let exact = oracle_visits(kernel.probabilities(), &members, i)
                            .map_err(|e| format!("eps={eps}: {e}"))?;
                        Ok((exact[pos] / predicted - 1.0).abs())
                    });
                    push(&mut c, err);
                }
                checks.push(finish(c));
            }

            let predicted = landing_law(tree, r, k);
            let mut c = blank("hitting", subject(tree, r, k), opts.hitting_tol);
            for (eps, kernel) in eps_list.iter().zip(&kernels) {
                let err = kernel.clone().and_then(|kernel| {
                    let exact = oracle_hitting(kernel.probabilities(), &members, start)
                        .map_err(|e| format!("eps={eps}: {e}"))?;
                    Ok(exact
                        .iter()
                        .map(|(j, p)| (p - predicted[*j]).abs())
                        .fold(0.0, f64::max))
                });
                push(&mut c, err);
            }
            checks.push(finish(c));
        }
    }

    checks.extend(occupancy_checks(spec, tree, lattice, opts, &eps_list));

    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    VerifyDoc {
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        untestable: count(Status::Untestable),
        checks,
        rng: RNG_NAME.into(),
        seed: opts.seed,
    }
}

fn push(c: &mut CheckDoc, err: Result<f64, String>) {
    match err {
        Ok(x) => c.errors.push(Some(x)),
        Err(note) => {
            c.errors.push(None);
            c.notes.push(note);
        }
    }
}

/// Limit law of the first base state reached outside rank-`r` cluster `k`.
fn landing_law(tree: &ClusterTree, r: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; tree.state_count()];
    let level = tree.level(r).expect("rank below top");
    for (l, p) in level.kernel[k].iter().enumerate() {
        if l == k || p.is_zero() {
            continue;
        }
        let Some(p) = p.limit().as_rational().and_then(|q| q.to_f64()) else {
            continue;
        };
        if p == 0.0 {
            continue;
        }
        for (j, w) in tree.entry_weights(r, k, l).expect("transition exists") {
            out[j] += p * w.to_f64().unwrap_or(0.0);
        }
    }
    out
}

fn occupancy_checks(
    spec: &ReducedSpec,
    tree: &ClusterTree,
    lattice: &TimeScaleLattice,
    opts: &VerifyOptions,
    eps_list: &[f64],
) -> Vec<CheckDoc> {
    let eps = opts
        .mc_eps
        .unwrap_or_else(|| eps_list.iter().copied().fold(f64::INFINITY, f64::min));
    let labels: Vec<String> = if opts.starts.is_empty() {
        let first = spec
            .origin
            .as_ref()
            .map_or(&spec.states[0], |o| &o.states[0]);
        vec![first.clone()]
    } else {
        opts.starts.clone()
    };
    let how = Presentation::for_spec(spec, false);
    let kernel = kernel_at(spec, eps);
    let mut out = Vec::new();
    for label in labels {
        let Some(start) = start_distribution(spec, &label) else {
            out.push(CheckDoc {
                kind: "occupancy".into(),
                subject: format!("start {label}"),
                eps: vec![eps],
                errors: vec![None],
                tolerance: opts.occupancy_tol,
                decreasing: None,
                status: Status::Untestable,
                notes: vec![format!("unknown start state {label}")],
            });
            continue;
        };
        let rows = match full_report(tree, lattice, &start) {
            Ok(rows) => rows,
            Err(e) => {
                out.push(CheckDoc {
                    kind: "occupancy".into(),
                    subject: format!("start {label}"),
                    eps: vec![eps],
                    errors: vec![None],
                    tolerance: opts.occupancy_tol,
                    decreasing: None,
                    status: Status::Untestable,
                    notes: vec![e.to_string()],
                });
                continue;
            }
        };
        for row in rows {
            let t_text = row.representative.display(tree.basis()).to_string();
            let mut c = CheckDoc {
                kind: "occupancy".into(),
                subject: format!("start {label}, interval {} at t = {t_text}", row.interval),
                eps: vec![eps],
                errors: Vec::new(),
                tolerance: opts.occupancy_tol,
                decreasing: None,
                status: Status::Untestable,
                notes: Vec::new(),
            };
            let err = kernel.clone().and_then(|kernel| {
                let t = evaluate(tree, &row.representative, eps)?;
                let mc_start = mc_start(spec, &label, eps)?;
                let sampler = choose_sampler(&kernel, t, opts.samples, &opts.sim);
                let min_mean = kernel.means().iter().cloned().fold(f64::INFINITY, f64::min);
                if sampler == Sampler::Path
                    && t / min_mean * opts.samples as f64 > opts.path_jump_limit
                {
                    return Err(format!(
                        "eps={eps}: about {:.1e} path jumps needed",
                        t / min_mean * opts.samples as f64
                    ));
                }
                let sim = occupation_distribution(
                    &kernel,
                    &mc_start,
                    t,
                    opts.samples,
                    opts.seed,
                    &opts.sim,
                )
                .map_err(|e| e.to_string())?;
                let predicted = match how {
                    Presentation::Marginal => marginal_map(spec, &row.mu),
                    _ => LabelMap(
                        row.mu
                            .iter()
                            .map(|(s, w)| (spec.states[s].clone(), w.to_string()))
                            .collect(),
                    ),
                };
                let mut empirical: Vec<(String, f64)> = Vec::new();
                for (s, f) in sim.frequencies.iter().enumerate() {
                    let l = match how {
                        Presentation::Marginal => spec.marginal_label(s).to_string(),
                        _ => spec.states[s].clone(),
                    };
                    match empirical.iter_mut().find(|(x, _)| *x == l) {
                        Some((_, acc)) => *acc += f,
                        None => empirical.push((l, *f)),
                    }
                }
                Ok(empirical
                    .iter()
                    .map(|(l, f)| {
                        let p = predicted
                            .get(l)
                            .and_then(crate::asymptotics::parse_rational)
                            .and_then(|q| q.to_f64())
                            .unwrap_or(0.0);
                        (f - p).abs()
                    })
                    .fold(0.0, f64::max))
            });
            push(&mut c, err);
            out.push(finish(c));
        }
    }
    out
}

/// Initial law at `eps` for a start label.
pub fn mc_start(spec: &ReducedSpec, label: &str, eps: f64) -> Result<Start, String> {
    let weights = spec
        .start_weights(label)
        .ok_or_else(|| format!("unknown start state {label}"))?;
    if let [(i, _)] = weights.as_slice() {
        return Ok(Start::State(*i));
    }
    let evaluated: Result<Vec<(usize, f64)>, String> = weights
        .iter()
        .map(|(i, w)| {
            w.evaluate(&spec.basis, eps)
                .map(|v| (*i, v))
                .map_err(|e| format!("eps={eps}: {e}"))
        })
        .collect();
    Ok(Start::Mixture(evaluated?))
}
