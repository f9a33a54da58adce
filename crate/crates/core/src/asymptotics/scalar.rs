use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::basis::{Growth, ScaleBasis};
use super::Rational;

/// Asymptotic relation between two scalars as `eps` decreases to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    MuchSmaller,
    Commensurate,
    MuchLarger,
}

/// Limit of a ratio of two scalars.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RatioLimit {
    Zero,
    /// Always strictly positive.
    Finite(Rational),
    Infinite,
}

impl RatioLimit {
    /// Product of two limits; `None` for the indeterminate `0 * inf`.
    pub fn mul(&self, other: &RatioLimit) -> Option<RatioLimit> {
        use RatioLimit::*;
        match (self, other) {
            (Zero, Infinite) | (Infinite, Zero) => None,
            (Zero, _) | (_, Zero) => Some(Zero),
            (Infinite, _) | (_, Infinite) => Some(Infinite),
            (Finite(a), Finite(b)) => Some(Finite(a * b)),
        }
    }

    /// The limit as a rational, treating `Zero` as 0. `None` when infinite.
    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            RatioLimit::Zero => Some(Rational::zero()),
            RatioLimit::Finite(r) => Some(r.clone()),
            RatioLimit::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticError {
    #[error("division by the zero scalar")]
    DivisionByZero,
    #[error("coefficient must be positive")]
    NonPositiveCoefficient,
    #[error("eps = {eps} is outside the domain of generator `{generator}` (requires 0 < eps < {eps_max})")]
    EpsOutOfDomain {
        eps: f64,
        generator: String,
        eps_max: f64,
    },
    #[error("value at eps = {eps} overflows (ln = {ln_value:.3})")]
    Overflow { eps: f64, ln_value: f64 },
    #[error("value at eps = {eps} underflows (ln = {ln_value:.3})")]
    Underflow { eps: f64, ln_value: f64 },
    #[error("exponent of generator {0} is out of range")]
    UnknownGenerator(usize),
}

/// A positive leading-order monomial `coeff * prod g_k^e_k`, or exact zero.
///
/// Exponents are keyed by generator position in a [`ScaleBasis`]; position 0 is
/// the fastest-growing generator. Scalars only make sense relative to the basis
/// they were built against.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AsymptoticScalar {
    Zero,
    Monomial(Monomial),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    coeff: Rational,
    exponents: BTreeMap<usize, Rational>,
}

impl Monomial {
    pub fn coeff(&self) -> &Rational {
        &self.coeff
    }

    pub fn exponents(&self) -> &BTreeMap<usize, Rational> {
        &self.exponents
    }
}

fn cleaned(mut exponents: BTreeMap<usize, Rational>) -> BTreeMap<usize, Rational> {
    exponents.retain(|_, e| !e.is_zero());
    exponents
}

/// Lexicographic comparison of exponent maps in basis order.
fn cmp_exponents(a: &BTreeMap<usize, Rational>, b: &BTreeMap<usize, Rational>) -> Ordering {
    let zero = Rational::zero();
    let keys: std::collections::BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    for k in keys {
        let ea = a.get(&k).unwrap_or(&zero);
        let eb = b.get(&k).unwrap_or(&zero);
        match ea.cmp(eb) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl AsymptoticScalar {
    pub fn zero() -> Self {
        AsymptoticScalar::Zero
    }

    pub fn one() -> Self {
        Self::constant(Rational::one()).expect("one is positive")
    }

    pub fn constant(coeff: Rational) -> Result<Self, AsymptoticError> {
        Self::new(coeff, BTreeMap::new())
    }

    pub fn new(
        coeff: Rational,
        exponents: BTreeMap<usize, Rational>,
    ) -> Result<Self, AsymptoticError> {
        if !coeff.is_positive() {
            return Err(AsymptoticError::NonPositiveCoefficient);
        }
        Ok(AsymptoticScalar::Monomial(Monomial {
            coeff,
            exponents: cleaned(exponents),
        }))
    }

    /// `coeff * g^exponent` for a single generator.
    pub fn power(generator: usize, exponent: Rational) -> Self {
        let mut map = BTreeMap::new();
        map.insert(generator, exponent);
        Self::new(Rational::one(), map).expect("unit coefficient")
    }

    pub fn from_integer(n: i64) -> Self {
        if n == 0 {
            AsymptoticScalar::Zero
        } else {
            Self::constant(Rational::from_integer(BigInt::from(n))).expect("positive integer")
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, AsymptoticScalar::Zero)
    }

    pub fn monomial(&self) -> Option<&Monomial> {
        match self {
            AsymptoticScalar::Zero => None,
            AsymptoticScalar::Monomial(m) => Some(m),
        }
    }

    pub fn coeff(&self) -> Option<&Rational> {
        self.monomial().map(|m| &m.coeff)
    }

    /// Exponent of one generator; zero when absent (or for the zero scalar).
    pub fn exponent(&self, generator: usize) -> Rational {
        self.monomial()
            .and_then(|m| m.exponents.get(&generator).cloned())
            .unwrap_or_else(Rational::zero)
    }

    /// Whether the scalar is a pure constant (tends to a positive finite limit).
    pub fn is_constant(&self) -> bool {
        self.monomial().is_some_and(|m| m.exponents.is_empty())
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (AsymptoticScalar::Monomial(a), AsymptoticScalar::Monomial(b)) => {
                let mut exps = a.exponents.clone();
                for (k, e) in &b.exponents {
                    *exps.entry(*k).or_insert_with(Rational::zero) += e;
                }
                AsymptoticScalar::Monomial(Monomial {
                    coeff: &a.coeff * &b.coeff,
                    exponents: cleaned(exps),
                })
            }
            _ => AsymptoticScalar::Zero,
        }
    }

    pub fn recip(&self) -> Result<Self, AsymptoticError> {
        match self {
            AsymptoticScalar::Zero => Err(AsymptoticError::DivisionByZero),
            AsymptoticScalar::Monomial(m) => Ok(AsymptoticScalar::Monomial(Monomial {
                coeff: m.coeff.recip(),
                exponents: m.exponents.iter().map(|(k, e)| (*k, -e)).collect(),
            })),
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self, AsymptoticError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Multiply by a non-negative rational; zero gives the zero scalar.
    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            return AsymptoticScalar::Zero;
        }
        assert!(factor.is_positive(), "scale factor must be non-negative");
        match self {
            AsymptoticScalar::Zero => AsymptoticScalar::Zero,
            AsymptoticScalar::Monomial(m) => AsymptoticScalar::Monomial(Monomial {
                coeff: &m.coeff * factor,
                exponents: m.exponents.clone(),
            }),
        }
    }

    /// Leading-order sum: the dominant term, with coefficients of tied terms added.
    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (AsymptoticScalar::Zero, x) | (x, AsymptoticScalar::Zero) => x.clone(),
            (AsymptoticScalar::Monomial(a), AsymptoticScalar::Monomial(b)) => {
                match cmp_exponents(&a.exponents, &b.exponents) {
                    Ordering::Greater => self.clone(),
                    Ordering::Less => other.clone(),
                    Ordering::Equal => AsymptoticScalar::Monomial(Monomial {
                        coeff: &a.coeff + &b.coeff,
                        exponents: a.exponents.clone(),
                    }),
                }
            }
        }
    }

    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a AsymptoticScalar>) -> Self {
        terms
            .into_iter()
            .fold(AsymptoticScalar::Zero, |acc, t| acc.add(t))
    }

    /// Asymptotic comparison. The zero scalar is much smaller than any positive one.
    pub fn compare(&self, other: &Self) -> Order {
        match self.cmp_order(other) {
            Ordering::Less => Order::MuchSmaller,
            Ordering::Equal => Order::Commensurate,
            Ordering::Greater => Order::MuchLarger,
        }
    }

    /// Total preorder by growth; commensurate scalars compare equal.
    pub fn cmp_order(&self, other: &Self) -> Ordering {
        match (self, other) {
            (AsymptoticScalar::Zero, AsymptoticScalar::Zero) => Ordering::Equal,
            (AsymptoticScalar::Zero, _) => Ordering::Less,
            (_, AsymptoticScalar::Zero) => Ordering::Greater,
            (AsymptoticScalar::Monomial(a), AsymptoticScalar::Monomial(b)) => {
                cmp_exponents(&a.exponents, &b.exponents)
            }
        }
    }

    pub fn is_commensurate(&self, other: &Self) -> bool {
        self.cmp_order(other) == Ordering::Equal
    }

    /// `lim self / other` as `eps -> 0`.
    pub fn limit_ratio(&self, other: &Self) -> Result<RatioLimit, AsymptoticError> {
        let b = other.monomial().ok_or(AsymptoticError::DivisionByZero)?;
        let a = match self.monomial() {
            None => return Ok(RatioLimit::Zero),
            Some(a) => a,
        };
        Ok(match cmp_exponents(&a.exponents, &b.exponents) {
            Ordering::Less => RatioLimit::Zero,
            Ordering::Greater => RatioLimit::Infinite,
            Ordering::Equal => RatioLimit::Finite(&a.coeff / &b.coeff),
        })
    }

    /// Limit of the scalar itself (ratio against the unit scalar).
    pub fn limit(&self) -> RatioLimit {
        self.limit_ratio(&AsymptoticScalar::one())
            .expect("one is nonzero")
    }

    /// Natural log of the value at `eps`; `-inf` for the zero scalar.
    pub fn ln_evaluate(&self, basis: &ScaleBasis, eps: f64) -> Result<f64, AsymptoticError> {
        let m = match self.monomial() {
            None => return Ok(f64::NEG_INFINITY),
            Some(m) => m,
        };
        let mut ln = ln_rational(&m.coeff);
        for (&k, e) in &m.exponents {
            if k >= basis.len() {
                return Err(AsymptoticError::UnknownGenerator(k));
            }
            let growth = basis.growth(k);
            let eps_max = growth.eps_max();
            if !(eps > 0.0 && eps < eps_max) {
                return Err(AsymptoticError::EpsOutOfDomain {
                    eps,
                    generator: basis.name(k).to_string(),
                    eps_max,
                });
            }
            ln += e.to_f64().unwrap_or(f64::NAN) * growth.ln_value(eps);
        }
        Ok(ln)
    }

    /// Value at a concrete `eps`. Computed as a direct product, falling back
    /// to log space when the product leaves the normal range.
    pub fn evaluate(&self, basis: &ScaleBasis, eps: f64) -> Result<f64, AsymptoticError> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let ln_value = self.ln_evaluate(basis, eps)?;
        let m = self.monomial().expect("nonzero");
        let direct =
            m.exponents
                .iter()
                .fold(m.coeff.to_f64().unwrap_or(f64::NAN), |acc, (&k, e)| {
                    let e = e.to_f64().unwrap_or(f64::NAN);
                    acc * match *basis.growth(k) {
                        Growth::InvEpsPow { power } => eps.powf(-power * e),
                        Growth::LogInvEps => (-eps.ln()).powf(e),
                        Growth::ExpInvEpsPow { power } => (e * eps.powf(-power)).exp(),
                    }
                });
        if direct.is_finite() && direct >= f64::MIN_POSITIVE {
            return Ok(direct);
        }
        if ln_value > f64::MAX.ln() || ln_value.is_nan() {
            return Err(AsymptoticError::Overflow { eps, ln_value });
        }
        let v = ln_value.exp();
        if v < f64::MIN_POSITIVE {
            return Err(AsymptoticError::Underflow { eps, ln_value });
        }
        Ok(v)
    }

    /// Exact value at a rational `eps` when only integer exponents of the power
    /// generator occur.
    pub fn evaluate_exact(&self, basis: &ScaleBasis, eps: &Rational) -> Option<Rational> {
        let m = match self.monomial() {
            None => return Some(Rational::zero()),
            Some(m) => m,
        };
        let (pow_idx, power) = basis.power_generator()?;
        if power != 1.0 || !eps.is_positive() {
            return None;
        }
        let mut value = m.coeff.clone();
        for (&k, e) in &m.exponents {
            if k != pow_idx || !e.is_integer() {
                return None;
            }
            let n = e.to_integer().to_i32()?;
            // generator is 1/eps
            value *= num_traits::pow::Pow::pow(eps.recip(), n);
        }
        Some(value)
    }

    pub fn display<'a>(&'a self, basis: &'a ScaleBasis) -> ScalarDisplay<'a> {
        ScalarDisplay {
            scalar: self,
            basis,
        }
    }
}

fn ln_rational(r: &Rational) -> f64 {
    let ln_big = |n: &BigInt| -> f64 {
        match n.to_f64() {
            Some(v) if v.is_finite() => v.ln(),
            _ => {
                let bits = n.bits();
                let shift = bits.saturating_sub(60);
                let top = (n >> shift).to_f64().unwrap_or(f64::NAN);
                top.ln() + shift as f64 * std::f64::consts::LN_2
            }
        }
    };
    ln_big(r.numer()) - ln_big(r.denom())
}

/// Renders a scalar in the monomial expression grammar; `inv_eps`-type factors
/// use the `eps` sugar.
pub struct ScalarDisplay<'a> {
    scalar: &'a AsymptoticScalar,
    basis: &'a ScaleBasis,
}

impl fmt::Display for ScalarDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.scalar.monomial() {
            None => return f.write_str("0"),
            Some(m) => m,
        };
        let mut factors = Vec::new();
        if !m.coeff.is_one() || m.exponents.is_empty() {
            factors.push(m.coeff.to_string());
        }
        let pow_gen = self.basis.power_generator();
        for (&k, e) in &m.exponents {
            let (name, exp) = match pow_gen {
                Some((idx, power)) if idx == k => {
                    // g = eps^-power, so g^e = eps^(-e*power)
                    let p = Rational::from_float(power).unwrap_or_else(Rational::one);
                    ("eps".to_string(), -(e * p))
                }
                _ if k < self.basis.len() => (self.basis.name(k).to_string(), e.clone()),
                _ => (format!("g{k}"), e.clone()),
            };
            if exp.is_one() {
                factors.push(name);
            } else {
                factors.push(format!("{name}^{exp}"));
            }
        }
        f.write_str(&factors.join("*"))
    }
}
