//! Semi-Markov family declarations: validation, row normalization and the
//! reduction to source-only transition times on pair states.

mod document;
mod reduce;
mod sojourn;

use std::fmt;

use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::asymptotics::{AsymptoticScalar, Rational, ScaleBasis};
use crate::chain::{is_strongly_connected, ScalarMatrix};

pub use document::{load, Mode, OriginRecord, SojournRecord, SpecDocument, TransitionRecord};
pub use reduce::reduce_to_extended;
pub use sojourn::SojournFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// What a diagnostic is about. Indices are zero-based positions in `states`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    TooFewStates,
    EmptyLabel,
    DuplicateState {
        label: String,
    },
    UnknownState {
        label: String,
    },
    DuplicateTransition {
        from: usize,
        to: usize,
    },
    InvalidBasis {
        error: String,
    },
    Expression {
        from: usize,
        to: usize,
        field: String,
        error: String,
    },
    InvalidSojourn {
        from: usize,
        to: usize,
        error: String,
    },
    InvalidOrigin {
        error: String,
    },
    NonzeroDiagonal {
        state: usize,
    },
    MissingTime {
        from: usize,
        to: usize,
    },
    EmptyRow {
        state: usize,
    },
    RowNormalized {
        state: usize,
        leading_sum: String,
    },
    NotStronglyConnected {
        components: usize,
    },
    InconsistentSourceTime {
        state: usize,
    },
    InconsistentSourceSojourn {
        state: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    #[serde(flatten)]
    pub issue: Issue,
    pub message: String,
}

impl Diagnostic {
    pub fn error(issue: Issue, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            issue,
            message: message.into(),
        }
    }

    pub fn warning(issue: Issue, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            issue,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SpecError {
    #[error("invalid spec: {}", summarize(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("malformed spec document: {0}")]
    Malformed(String),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.is_error())
        .map(|d| d.message.clone())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Family with per-edge transition times `T_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSpec {
    pub basis: ScaleBasis,
    pub states: Vec<String>,
    pub p: ScalarMatrix,
    /// `None` where no time was given.
    pub t: Vec<Vec<Option<AsymptoticScalar>>>,
    pub sojourn: Vec<Vec<SojournFamily>>,
}

/// Where the pair states of a reduced spec came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Origin {
    pub states: Vec<String>,
    /// `(a, b)` for every reduced state, indices into `states`.
    pub pairs: Vec<(usize, usize)>,
}

/// Family whose transition time depends only on the source state.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSpec {
    pub basis: ScaleBasis,
    pub states: Vec<String>,
    pub p: ScalarMatrix,
    pub tau: Vec<AsymptoticScalar>,
    pub sojourn: Vec<SojournFamily>,
    pub origin: Option<Origin>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProcessSpec {
    Raw(RawSpec),
    Reduced(ReducedSpec),
}

fn label(states: &[String], i: usize) -> &str {
    states.get(i).map(String::as_str).unwrap_or("?")
}

/// Checks shared by both spec kinds: state count, zero diagonal, empty rows,
/// leading row sums and strong connectivity.
fn check_kernel(basis: &ScaleBasis, states: &[String], p: &ScalarMatrix) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let m = states.len();
    if m < 2 {
        out.push(Diagnostic::error(
            Issue::TooFewStates,
            "a family needs at least two states",
        ));
    }
    for (i, row) in p.iter().enumerate() {
        if !row[i].is_zero() {
            out.push(Diagnostic::error(
                Issue::NonzeroDiagonal { state: i },
                format!("nonzero diagonal at state {}", label(states, i)),
            ));
        }
        let off: Vec<&AsymptoticScalar> = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .collect();
        let sum = AsymptoticScalar::sum(off);
        if sum.is_zero() {
            out.push(Diagnostic::error(
                Issue::EmptyRow { state: i },
                format!("state {} has no outgoing transitions", label(states, i)),
            ));
        } else if sum != AsymptoticScalar::one() {
            let text = sum.display(basis).to_string();
            out.push(Diagnostic::warning(
                Issue::RowNormalized {
                    state: i,
                    leading_sum: text.clone(),
                },
                format!(
                    "row of state {} has leading sum {text}; normalized by dividing by it",
                    label(states, i)
                ),
            ));
        }
    }
    if m >= 2 {
        let adj: Vec<Vec<usize>> = p
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(j, v)| j != i && !v.is_zero())
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        if !is_strongly_connected(&adj) {
            let components = crate::chain::strongly_connected_components(&adj).len();
            out.push(Diagnostic::error(
                Issue::NotStronglyConnected { components },
                format!("not strongly connected ({components} components)"),
            ));
        }
    }
    out
}

/// Divide each row by its leading off-diagonal sum so that it becomes exactly 1.
fn normalize_rows(p: &ScalarMatrix) -> ScalarMatrix {
    p.iter()
        .enumerate()
        .map(|(i, row)| {
            let sum = AsymptoticScalar::sum(
                row.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v),
            );
            if sum.is_zero() || sum == AsymptoticScalar::one() {
                row.clone()
            } else {
                row.iter()
                    .map(|v| v.div(&sum).expect("nonzero row sum"))
                    .collect()
            }
        })
        .collect()
}

impl RawSpec {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = check_kernel(&self.basis, &self.states, &self.p);
        for (i, row) in self.p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                let has_time = self.t[i][j].as_ref().is_some_and(|t| !t.is_zero());
                if !pij.is_zero() && !has_time {
                    out.push(Diagnostic::error(
                        Issue::MissingTime { from: i, to: j },
                        format!(
                            "transition {} -> {} has positive probability but no time",
                            label(&self.states, i),
                            label(&self.states, j)
                        ),
                    ));
                }
            }
        }
        out
    }

    /// Copy with every row divided by its leading sum.
    pub fn normalized(&self) -> RawSpec {
        RawSpec {
            p: normalize_rows(&self.p),
            ..self.clone()
        }
    }
}

impl ReducedSpec {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = check_kernel(&self.basis, &self.states, &self.p);
        for (i, tau) in self.tau.iter().enumerate() {
            if tau.is_zero() {
                out.push(Diagnostic::error(
                    Issue::MissingTime { from: i, to: i },
                    format!("state {} has no transition time", label(&self.states, i)),
                ));
            }
        }
        if let Some(origin) = &self.origin {
            if origin.pairs.len() != self.states.len()
                || origin
                    .pairs
                    .iter()
                    .any(|&(a, b)| a >= origin.states.len() || b >= origin.states.len())
            {
                out.push(Diagnostic::error(
                    Issue::InvalidOrigin {
                        error: "pair list does not match the states".into(),
                    },
                    "origin pair list does not match the states",
                ));
            }
        }
        out
    }

    pub fn normalized(&self) -> ReducedSpec {
        ReducedSpec {
            p: normalize_rows(&self.p),
            ..self.clone()
        }
    }

    /// Raw view with `T_ij = tau_i` on every positive edge.
    pub fn to_raw(&self) -> RawSpec {
        let m = self.len();
        let t = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (!self.p[i][j].is_zero()).then(|| self.tau[i].clone()))
                    .collect()
            })
            .collect();
        let sojourn = (0..m).map(|i| vec![self.sojourn[i].clone(); m]).collect();
        RawSpec {
            basis: self.basis.clone(),
            states: self.states.clone(),
            p: self.p.clone(),
            t,
            sojourn,
        }
    }

    /// Original-state label of a reduced state: the current state `a` of pair
    /// `(a, b)`, or the state's own label when the spec has no origin.
    pub fn marginal_label(&self, state: usize) -> &str {
        match &self.origin {
            Some(o) => &o.states[o.pairs[state].0],
            None => &self.states[state],
        }
    }

    /// Initial law for a start label, as leading-order weights over states.
    ///
    /// A reduced state label is a point mass. An original label `a` of a
    /// reduced spec is the mixture over pairs `(a, b)` weighted by `P_ab`.
    pub fn start_weights(&self, label: &str) -> Option<Vec<(usize, AsymptoticScalar)>> {
        if let Some(i) = self.state_index(label) {
            return Some(vec![(i, AsymptoticScalar::one())]);
        }
        let origin = self.origin.as_ref()?;
        let a = origin.states.iter().position(|s| s == label)?;
        // P_ab is the kernel entry from any pair ending in a to the pair (a, b).
        let into_a = origin.pairs.iter().position(|&(_, y)| y == a)?;
        let weights: Vec<(usize, AsymptoticScalar)> = origin
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, &(x, _))| x == a)
            .map(|(idx, _)| (idx, self.p[into_a][idx].clone()))
            .filter(|(_, w)| !w.is_zero())
            .collect();
        (!weights.is_empty()).then_some(weights)
    }
}

impl ProcessSpec {
    pub fn basis(&self) -> &ScaleBasis {
        match self {
            ProcessSpec::Raw(s) => &s.basis,
            ProcessSpec::Reduced(s) => &s.basis,
        }
    }

    pub fn states(&self) -> &[String] {
        match self {
            ProcessSpec::Raw(s) => &s.states,
            ProcessSpec::Reduced(s) => &s.states,
        }
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        match self {
            ProcessSpec::Raw(s) => s.validate(),
            ProcessSpec::Reduced(s) => s.validate(),
        }
    }

    pub fn normalized(&self) -> ProcessSpec {
        match self {
            ProcessSpec::Raw(s) => ProcessSpec::Raw(s.normalized()),
            ProcessSpec::Reduced(s) => ProcessSpec::Reduced(s.normalized()),
        }
    }

    /// Reduced form: raw specs go through the pair-state reduction, reduced
    /// specs pass through normalized but otherwise unchanged.
    pub fn into_reduced(self) -> Result<ReducedSpec, SpecError> {
        match self {
            ProcessSpec::Raw(s) => reduce_to_extended(&s),
            ProcessSpec::Reduced(s) => {
                let diags = s.validate();
                if diags.iter().any(Diagnostic::is_error) {
                    return Err(SpecError::Invalid(diags));
                }
                Ok(s.normalized())
            }
        }
    }
}

/// Evaluate a kernel exactly at a rational `eps` and renormalize every row to
/// sum to one. `None` if some entry has no exact value at `eps`.
pub fn exact_kernel(
    basis: &ScaleBasis,
    p: &ScalarMatrix,
    eps: &Rational,
) -> Option<Vec<Vec<Rational>>> {
    p.iter()
        .map(|row| {
            let vals: Option<Vec<Rational>> =
                row.iter().map(|v| v.evaluate_exact(basis, eps)).collect();
            let vals = vals?;
            let total: Rational = vals.iter().sum();
            if total.is_one() {
                return Some(vals);
            }
            if total == Rational::from_integer(0.into()) {
                return None;
            }
            Some(vals.into_iter().map(|v| v / &total).collect())
        })
        .collect()
}
