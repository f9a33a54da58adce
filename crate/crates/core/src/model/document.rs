//! JSON spec file format.

use std::collections::{BTreeMap, HashMap};

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymptotics::{parse, parse_rational, AsymptoticScalar, Generator, ScaleBasis};

use super::{
    Diagnostic, Issue, Origin, ProcessSpec, RawSpec, ReducedSpec, SojournFamily, SpecError,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Raw,
    Reduced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SojournRecord {
    pub family: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub from: String,
    pub to: String,
    pub p: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sojourn: Option<SojournRecord>,
}

/// Provenance of pair states in a reduced document; `pairs[i]` belongs to
/// `states[i]` of the enclosing document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginRecord {
    pub states: Vec<String>,
    pub pairs: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Generator>>,
    pub states: Vec<String>,
    pub transitions: Vec<TransitionRecord>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<OriginRecord>,
}

impl SojournRecord {
    pub fn to_family(&self) -> Result<SojournFamily, String> {
        let param = |name: &str| -> Result<&Value, String> {
            self.params
                .get(name)
                .ok_or_else(|| format!("{} sojourn needs parameter `{name}`", self.family))
        };
        let allow_only = |names: &[&str]| -> Result<(), String> {
            match self.params.keys().find(|k| !names.contains(&k.as_str())) {
                Some(k) => Err(format!("unknown sojourn parameter `{k}`")),
                None => Ok(()),
            }
        };
        match self.family.as_str() {
            "exponential" => {
                allow_only(&[])?;
                Ok(SojournFamily::Exponential)
            }
            "gamma" => {
                allow_only(&["shape"])?;
                let text = value_text(param("shape")?);
                let shape = parse_rational(&text)
                    .filter(|s| s.is_positive())
                    .ok_or_else(|| format!("gamma shape `{text}` is not a positive rational"))?;
                Ok(SojournFamily::Gamma { shape })
            }
            "lognormal" => {
                allow_only(&["sigma"])?;
                let text = value_text(param("sigma")?);
                let sigma: f64 = text
                    .parse()
                    .ok()
                    .filter(|s: &f64| s.is_finite() && *s > 0.0)
                    .ok_or_else(|| format!("lognormal sigma `{text}` is not a positive real"))?;
                Ok(SojournFamily::LogNormal { sigma })
            }
            other => Err(format!("unknown sojourn family `{other}`")),
        }
    }

    pub fn from_family(family: &SojournFamily) -> Option<SojournRecord> {
        let mut params = BTreeMap::new();
        match family {
            SojournFamily::Exponential => return None,
            SojournFamily::Gamma { shape } => {
                params.insert("shape".into(), Value::String(shape.to_string()));
            }
            SojournFamily::LogNormal { sigma } => {
                params.insert("sigma".into(), serde_json::json!(sigma));
            }
        }
        Some(SojournRecord {
            family: family.name().into(),
            params,
        })
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SpecDocument {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        serde_json::from_str(text).map_err(|e| SpecError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Resolve labels and expressions. Structural problems come back as error
    /// diagnostics; semantic checks are left to `validate`.
    pub fn to_spec(&self) -> Result<ProcessSpec, Vec<Diagnostic>> {
        let mut errors = Vec::new();
        let basis = match &self.basis {
            None => ScaleBasis::standard(),
            Some(gens) => match ScaleBasis::new(gens.clone()) {
                Ok(b) => b,
                Err(e) => {
                    return Err(vec![Diagnostic::error(
                        Issue::InvalidBasis {
                            error: e.to_string(),
                        },
                        format!("invalid basis: {e}"),
                    )])
                }
            },
        };

        let mut index = HashMap::new();
        for (i, s) in self.states.iter().enumerate() {
            if s.trim().is_empty() {
                errors.push(Diagnostic::error(Issue::EmptyLabel, "empty state label"));
            } else if index.insert(s.as_str(), i).is_some() {
                errors.push(Diagnostic::error(
                    Issue::DuplicateState { label: s.clone() },
                    format!("duplicate state `{s}`"),
                ));
            }
        }

        let m = self.states.len();
        let mut p = vec![vec![AsymptoticScalar::Zero; m]; m];
        let mut t: Vec<Vec<Option<AsymptoticScalar>>> = vec![vec![None; m]; m];
        let mut soj = vec![vec![SojournFamily::Exponential; m]; m];
        let mut seen = vec![vec![false; m]; m];

        for tr in &self.transitions {
            let lookup = |l: &str| {
                index.get(l).copied().ok_or_else(|| {
                    Diagnostic::error(
                        Issue::UnknownState { label: l.into() },
                        format!("unknown state `{l}`"),
                    )
                })
            };
            let (i, j) = match (lookup(&tr.from), lookup(&tr.to)) {
                (Ok(i), Ok(j)) => (i, j),
                (a, b) => {
                    errors.extend(a.err());
                    errors.extend(b.err());
                    continue;
                }
            };
            if std::mem::replace(&mut seen[i][j], true) {
                errors.push(Diagnostic::error(
                    Issue::DuplicateTransition { from: i, to: j },
                    format!("duplicate transition {} -> {}", tr.from, tr.to),
                ));
                continue;
            }
            let expr = |field: &str, text: &str| {
                parse(&basis, text).map_err(|e| {
                    Diagnostic::error(
                        Issue::Expression {
                            from: i,
                            to: j,
                            field: field.into(),
                            error: e.to_string(),
                        },
                        format!("{} -> {}: bad {field} `{text}`: {e}", tr.from, tr.to),
                    )
                })
            };
            match expr("p", &tr.p) {
                Ok(v) => p[i][j] = v,
                Err(d) => errors.push(d),
            }
            if let Some(text) = &tr.tau {
                match expr("tau", text) {
                    Ok(v) => t[i][j] = Some(v),
                    Err(d) => errors.push(d),
                }
            }
            if let Some(rec) = &tr.sojourn {
                match rec.to_family() {
                    Ok(f) => soj[i][j] = f,
                    Err(e) => errors.push(Diagnostic::error(
                        Issue::InvalidSojourn {
                            from: i,
                            to: j,
                            error: e.clone(),
                        },
                        format!("{} -> {}: {e}", tr.from, tr.to),
                    )),
                }
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        let raw = RawSpec {
            basis,
            states: self.states.clone(),
            p,
            t,
            sojourn: soj,
        };
        match self.mode {
            Mode::Raw => {
                if self.origin.is_some() {
                    return Err(vec![Diagnostic::error(
                        Issue::InvalidOrigin {
                            error: "origin is only allowed in reduced mode".into(),
                        },
                        "origin is only allowed in reduced mode",
                    )]);
                }
                Ok(ProcessSpec::Raw(raw))
            }
            Mode::Reduced => self.to_reduced(raw).map(ProcessSpec::Reduced),
        }
    }

    fn to_reduced(&self, raw: RawSpec) -> Result<ReducedSpec, Vec<Diagnostic>> {
        let m = raw.len();
        let mut errors = Vec::new();
        let mut tau = vec![AsymptoticScalar::Zero; m];
        let mut sojourn = vec![SojournFamily::Exponential; m];
        for i in 0..m {
            let edges: Vec<usize> = (0..m).filter(|&j| !raw.p[i][j].is_zero()).collect();
            let Some(&first) = edges.first() else {
                continue;
            };
            let t0 = raw.t[i][first].clone();
            if edges.iter().any(|&j| raw.t[i][j] != t0) {
                errors.push(Diagnostic::error(
                    Issue::InconsistentSourceTime { state: i },
                    format!(
                        "state {} has destination-dependent times in reduced mode",
                        raw.states[i]
                    ),
                ));
            }
            if edges
                .iter()
                .any(|&j| raw.sojourn[i][j] != raw.sojourn[i][first])
            {
                errors.push(Diagnostic::error(
                    Issue::InconsistentSourceSojourn { state: i },
                    format!(
                        "state {} has destination-dependent sojourn laws in reduced mode",
                        raw.states[i]
                    ),
                ));
            }
            tau[i] = t0.unwrap_or(AsymptoticScalar::Zero);
            sojourn[i] = raw.sojourn[i][first].clone();
        }
        let origin = match &self.origin {
            None => None,
            Some(rec) => match resolve_origin(rec, m) {
                Ok(o) => Some(o),
                Err(e) => {
                    errors.push(Diagnostic::error(
                        Issue::InvalidOrigin { error: e.clone() },
                        format!("invalid origin: {e}"),
                    ));
                    None
                }
            },
        };
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(ReducedSpec {
            basis: raw.basis,
            states: raw.states,
            p: raw.p,
            tau,
            sojourn,
            origin,
        })
    }

    pub fn from_spec(spec: &ProcessSpec) -> SpecDocument {
        match spec {
            ProcessSpec::Raw(s) => Self::from_raw(s),
            ProcessSpec::Reduced(s) => Self::from_reduced(s),
        }
    }

    pub fn from_raw(spec: &RawSpec) -> SpecDocument {
        let basis = &spec.basis;
        let mut transitions = Vec::new();
        for i in 0..spec.len() {
            for j in 0..spec.len() {
                if spec.p[i][j].is_zero() {
                    continue;
                }
                transitions.push(TransitionRecord {
                    from: spec.states[i].clone(),
                    to: spec.states[j].clone(),
                    p: spec.p[i][j].display(basis).to_string(),
                    tau: spec.t[i][j].as_ref().map(|t| t.display(basis).to_string()),
                    sojourn: SojournRecord::from_family(&spec.sojourn[i][j]),
                });
            }
        }
        SpecDocument {
            basis: basis_field(basis),
            states: spec.states.clone(),
            transitions,
            mode: Mode::Raw,
            origin: None,
        }
    }

    pub fn from_reduced(spec: &ReducedSpec) -> SpecDocument {
        let mut doc = Self::from_raw(&spec.to_raw());
        doc.mode = Mode::Reduced;
        doc.origin = spec.origin.as_ref().map(|o| OriginRecord {
            states: o.states.clone(),
            pairs: o
                .pairs
                .iter()
                .map(|&(a, b)| [o.states[a].clone(), o.states[b].clone()])
                .collect(),
        });
        doc
    }
}

fn basis_field(basis: &ScaleBasis) -> Option<Vec<Generator>> {
    (*basis != ScaleBasis::standard()).then(|| basis.generators().to_vec())
}

fn resolve_origin(rec: &OriginRecord, m: usize) -> Result<Origin, String> {
    if rec.pairs.len() != m {
        return Err(format!("{} pairs listed for {m} states", rec.pairs.len()));
    }
    let find = |l: &str| {
        rec.states
            .iter()
            .position(|s| s == l)
            .ok_or_else(|| format!("unknown original state `{l}`"))
    };
    let pairs = rec
        .pairs
        .iter()
        .map(|[a, b]| Ok((find(a)?, find(b)?)))
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Origin {
        states: rec.states.clone(),
        pairs,
    })
}

/// Parse, resolve and validate a JSON spec. On success the spec is row
/// normalized and returned with its warnings.
pub fn load(text: &str) -> Result<(ProcessSpec, Vec<Diagnostic>), SpecError> {
    let doc = SpecDocument::from_json(text)?;
    let spec = doc.to_spec().map_err(SpecError::Invalid)?;
    let diags = spec.validate();
    if diags.iter().any(Diagnostic::is_error) {
        return Err(SpecError::Invalid(diags));
    }
    Ok((spec.normalized(), diags))
}
