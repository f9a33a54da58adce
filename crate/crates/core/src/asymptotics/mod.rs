//! Exact leading-order calculus on positive `eps`-dependent scales.
//!
//! Every quantity is a single monomial `c * prod g_k^e_k` over an ordered
//! [`ScaleBasis`], so all ratio limits exist and are decided exactly.

mod basis;
mod parse;
mod scalar;

pub use basis::{BasisError, Generator, Growth, ScaleBasis};
pub use parse::{parse, ParseError};
pub use scalar::{AsymptoticError, AsymptoticScalar, Monomial, Order, RatioLimit, ScalarDisplay};

pub type Rational = num_rational::BigRational;

/// Shorthand for a small rational literal.
pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(numer.into(), denom.into())
}

/// Parse a rational written as `p/q`, an integer, or a decimal literal.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let basis = ScaleBasis::standard();
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix('-') {
        return parse_rational(rest).map(|r| -r);
    }
    match parse(&basis, trimmed).ok()? {
        AsymptoticScalar::Zero => Some(Rational::from_integer(0.into())),
        s if s.is_constant() => s.coeff().cloned(),
        _ => None,
    }
}
