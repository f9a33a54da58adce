use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How a generator grows as `eps` decreases to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Growth {
    /// `exp(eps^-power)`
    ExpInvEpsPow { power: f64 },
    /// `eps^-power`
    InvEpsPow { power: f64 },
    /// `ln(1/eps)`
    LogInvEps,
}

impl Growth {
    /// Natural log of the growth function at `eps`.
    pub fn ln_value(&self, eps: f64) -> f64 {
        match *self {
            Growth::ExpInvEpsPow { power } => eps.powf(-power),
            Growth::InvEpsPow { power } => -power * eps.ln(),
            Growth::LogInvEps => (-eps.ln()).ln(),
        }
    }

    /// Supremum of the `eps` range on which the growth value is finite and above one.
    pub fn eps_max(&self) -> f64 {
        match self {
            Growth::ExpInvEpsPow { .. } => f64::INFINITY,
            Growth::InvEpsPow { .. } => 1.0,
            Growth::LogInvEps => (-1.0f64).exp(),
        }
    }

    // Lower tier dominates higher tiers.
    fn tier(&self) -> u8 {
        match self {
            Growth::ExpInvEpsPow { .. } => 0,
            Growth::InvEpsPow { .. } => 1,
            Growth::LogInvEps => 2,
        }
    }

    fn power(&self) -> Option<f64> {
        match *self {
            Growth::ExpInvEpsPow { power } | Growth::InvEpsPow { power } => Some(power),
            Growth::LogInvEps => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub growth: Growth,
}

impl Generator {
    pub fn new(name: impl Into<String>, growth: Growth) -> Self {
        Generator {
            name: name.into(),
            growth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("scale basis must declare at least one generator")]
    Empty,
    #[error("generator name `{0}` is not a valid identifier")]
    InvalidName(String),
    #[error("generator name `{0}` is reserved")]
    ReservedName(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateName(String),
    #[error("generator `{0}` has a non-positive or non-finite power")]
    InvalidPower(String),
    #[error("generator `{later}` is not strictly dominated by `{earlier}`; list generators from fastest to slowest")]
    NotStrictlyOrdered { earlier: String, later: String },
}

/// Ordered list of scale generators, fastest growth first.
///
/// Any positive power of an earlier generator dominates every power of a later one,
/// which is what makes lexicographic comparison of exponent vectors meaningful.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Generator>", into = "Vec<Generator>")]
pub struct ScaleBasis {
    generators: Vec<Generator>,
}

impl ScaleBasis {
    /// `exp_inv_eps_sq` ≻ `exp_inv_eps` ≻ `inv_eps` ≻ `log_inv_eps`.
    pub fn standard() -> Self {
        ScaleBasis {
            generators: vec![
                Generator::new("exp_inv_eps_sq", Growth::ExpInvEpsPow { power: 2.0 }),
                Generator::new("exp_inv_eps", Growth::ExpInvEpsPow { power: 1.0 }),
                Generator::new("inv_eps", Growth::InvEpsPow { power: 1.0 }),
                Generator::new("log_inv_eps", Growth::LogInvEps),
            ],
        }
    }

    pub fn new(generators: Vec<Generator>) -> Result<Self, BasisError> {
        if generators.is_empty() {
            return Err(BasisError::Empty);
        }
        for (idx, g) in generators.iter().enumerate() {
            if !is_identifier(&g.name) {
                return Err(BasisError::InvalidName(g.name.clone()));
            }
            if g.name == "eps" {
                return Err(BasisError::ReservedName(g.name.clone()));
            }
            if generators[..idx].iter().any(|h| h.name == g.name) {
                return Err(BasisError::DuplicateName(g.name.clone()));
            }
            if let Some(p) = g.growth.power() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(BasisError::InvalidPower(g.name.clone()));
                }
            }
        }
        for pair in generators.windows(2) {
            let (a, b) = (&pair[0].growth, &pair[1].growth);
            let strictly_faster = match a.tier().cmp(&b.tier()) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                // Two power generators (or two logs) are powers of each other, so
                // neither dominates every power of the other. Exponentials with
                // different powers do.
                std::cmp::Ordering::Equal => {
                    a.tier() == 0 && a.power().unwrap_or(0.0) > b.power().unwrap_or(0.0)
                }
            };
            if !strictly_faster {
                return Err(BasisError::NotStrictlyOrdered {
                    earlier: pair[0].name.clone(),
                    later: pair[1].name.clone(),
                });
            }
        }
        Ok(ScaleBasis { generators })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.generators[idx].name
    }

    pub fn growth(&self, idx: usize) -> &Growth {
        &self.generators[idx].growth
    }

    /// The power-law generator `eps^-p`, if the basis has one, with its power `p`.
    pub fn power_generator(&self) -> Option<(usize, f64)> {
        self.generators
            .iter()
            .enumerate()
            .find_map(|(i, g)| match g.growth {
                Growth::InvEpsPow { power } => Some((i, power)),
                _ => None,
            })
    }

    /// Generator used to step outside the finite part of a lattice: `inv_eps`
    /// when present, else the slowest generator.
    pub fn stepping_generator(&self) -> usize {
        self.power_generator()
            .map(|(i, _)| i)
            .unwrap_or(self.generators.len() - 1)
    }
}

impl Default for ScaleBasis {
    fn default() -> Self {
        ScaleBasis::standard()
    }
}

impl TryFrom<Vec<Generator>> for ScaleBasis {
    type Error = BasisError;

    fn try_from(value: Vec<Generator>) -> Result<Self, Self::Error> {
        ScaleBasis::new(value)
    }
}

impl From<ScaleBasis> for Vec<Generator> {
    fn from(value: ScaleBasis) -> Self {
        value.generators
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_basis_is_valid() {
        let b = ScaleBasis::standard();
        assert_eq!(ScaleBasis::new(b.generators().to_vec()).unwrap(), b);
        assert_eq!(b.position("inv_eps"), Some(2));
        assert_eq!(b.stepping_generator(), 2);
    }

    #[test]
    fn rejects_two_power_generators() {
        let err = ScaleBasis::new(vec![
            Generator::new("a", Growth::InvEpsPow { power: 2.0 }),
            Generator::new("b", Growth::InvEpsPow { power: 1.0 }),
        ])
        .unwrap_err();
        assert!(matches!(err, BasisError::NotStrictlyOrdered { .. }));
    }

    #[test]
    fn rejects_wrong_order_and_duplicates() {
        assert!(ScaleBasis::new(vec![
            Generator::new("lg", Growth::LogInvEps),
            Generator::new("e", Growth::ExpInvEpsPow { power: 1.0 }),
        ])
        .is_err());
        assert_eq!(
            ScaleBasis::new(vec![
                Generator::new("e", Growth::ExpInvEpsPow { power: 2.0 }),
                Generator::new("e", Growth::ExpInvEpsPow { power: 1.0 }),
            ]),
            Err(BasisError::DuplicateName("e".into()))
        );
        assert!(matches!(
            ScaleBasis::new(vec![Generator::new("eps", Growth::LogInvEps)]),
            Err(BasisError::ReservedName(_))
        ));
    }

    #[test]
    fn eps_domains() {
        let b = ScaleBasis::standard();
        assert!(b.growth(3).eps_max() < 0.37);
        assert_eq!(b.growth(2).eps_max(), 1.0);
        assert!((b.growth(1).ln_value(0.5) - 2.0).abs() < 1e-15);
    }
}
