//! Parser for the monomial expression grammar:
//!
//! ```text
//! expr     := rational ( '*' factor )* | factor ( '*' factor )*
//! factor   := ident ( '^' rational )?
//! rational := '-'? digits ( '/' digits | '.' digits )?
//! ```
//!
//! `ident` is a generator name or `eps`, which stands for the power generator
//! raised to `-1` (for the standard basis, `eps = inv_eps^-1`). The expression
//! `0` is the zero scalar.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::basis::ScaleBasis;
use super::scalar::AsymptoticScalar;
use super::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("coefficient must be positive")]
    NonPositiveCoefficient,
    #[error("malformed rational at byte {0}")]
    MalformedRational(usize),
    #[error("unexpected `{found}` at byte {pos}")]
    Unexpected { pos: usize, found: String },
    #[error("`eps` requires a basis with a power generator")]
    NoPowerGenerator,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let negative = if self.peek() == Some('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let int_part = self.digits();
        if int_part.is_empty() {
            return Err(ParseError::MalformedRational(start));
        }
        let mut value = Rational::from_integer(int_part.parse::<BigInt>().expect("digits"));
        if self.peek() == Some('/') {
            self.pos += 1;
            let den = self.digits();
            if den.is_empty() {
                return Err(ParseError::MalformedRational(start));
            }
            let den: BigInt = den.parse().expect("digits");
            if den.is_zero() {
                return Err(ParseError::MalformedRational(start));
            }
            value /= Rational::from_integer(den);
        } else if self.peek() == Some('.') {
            self.pos += 1;
            let frac = self.digits();
            if frac.is_empty() {
                return Err(ParseError::MalformedRational(start));
            }
            let scale = num_traits::pow::pow(BigInt::from(10), frac.len());
            value += Rational::new(frac.parse::<BigInt>().expect("digits"), scale);
        }
        if matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '.' || c == '/') {
            return Err(ParseError::MalformedRational(start));
        }
        Ok(if negative { -value } else { value })
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Some(&self.src[start..self.pos])
    }

    fn unexpected(&mut self) -> ParseError {
        self.skip_ws();
        ParseError::Unexpected {
            pos: self.pos,
            found: self
                .peek()
                .map(String::from)
                .unwrap_or_else(|| "end of input".into()),
        }
    }
}

/// Parse a scale expression against `basis`.
pub fn parse(basis: &ScaleBasis, text: &str) -> Result<AsymptoticScalar, ParseError> {
    let mut cur = Cursor { src: text, pos: 0 };
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(ParseError::Empty);
    }

    let mut coeff = Rational::one();
    let mut exponents: BTreeMap<usize, Rational> = BTreeMap::new();
    let mut expect_factor = true;

    if matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '-' || c == '.') {
        coeff = cur.rational()?;
        cur.skip_ws();
        if cur.peek().is_none() && coeff.is_zero() {
            return Ok(AsymptoticScalar::Zero);
        }
        if !coeff.is_positive() {
            return Err(ParseError::NonPositiveCoefficient);
        }
        expect_factor = cur.eat('*');
        if !expect_factor {
            cur.skip_ws();
            if cur.peek().is_some() {
                return Err(cur.unexpected());
            }
        }
    }

    while expect_factor {
        let name = cur.ident().ok_or_else(|| cur.unexpected())?;
        let exponent = if cur.eat('^') {
            cur.rational()?
        } else {
            Rational::one()
        };
        let (idx, scaled) = resolve(basis, name, exponent)?;
        *exponents.entry(idx).or_insert_with(Rational::zero) += scaled;
        expect_factor = cur.eat('*');
        if !expect_factor {
            cur.skip_ws();
            if cur.peek().is_some() {
                return Err(cur.unexpected());
            }
        }
    }

    AsymptoticScalar::new(coeff, exponents).map_err(|_| ParseError::NonPositiveCoefficient)
}

fn resolve(
    basis: &ScaleBasis,
    name: &str,
    exponent: Rational,
) -> Result<(usize, Rational), ParseError> {
    if name == "eps" {
        let (idx, power) = basis
            .power_generator()
            .ok_or(ParseError::NoPowerGenerator)?;
        // eps = g^(-1/power) where g = eps^-power
        let p = Rational::from_float(power).ok_or(ParseError::NoPowerGenerator)?;
        return Ok((idx, -exponent / p));
    }
    basis
        .position(name)
        .map(|idx| (idx, exponent))
        .ok_or_else(|| ParseError::UnknownIdentifier(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn exps(pairs: &[(usize, Rational)]) -> BTreeMap<usize, Rational> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn grammar_examples() {
        let b = ScaleBasis::standard();
        assert_eq!(
            parse(&b, "2*eps^2").unwrap(),
            AsymptoticScalar::new(q(2, 1), exps(&[(2, q(-2, 1))])).unwrap()
        );
        assert_eq!(
            parse(&b, "exp_inv_eps_sq^1/2 * eps").unwrap(),
            AsymptoticScalar::new(q(1, 1), exps(&[(0, q(1, 2)), (2, q(-1, 1))])).unwrap()
        );
        assert_eq!(parse(&b, "0").unwrap(), AsymptoticScalar::Zero);
        assert_eq!(parse(&b, " 0.0 ").unwrap(), AsymptoticScalar::Zero);
    }

    #[test]
    fn decimals_and_signs() {
        let b = ScaleBasis::standard();
        assert_eq!(
            parse(&b, "0.25").unwrap(),
            AsymptoticScalar::constant(q(1, 4)).unwrap()
        );
        assert_eq!(
            parse(&b, "3*eps^-3/2").unwrap(),
            AsymptoticScalar::new(q(3, 1), exps(&[(2, q(3, 2))])).unwrap()
        );
        assert_eq!(
            parse(&b, "eps*eps").unwrap(),
            AsymptoticScalar::new(q(1, 1), exps(&[(2, q(-2, 1))])).unwrap()
        );
        assert_eq!(parse(&b, "inv_eps*eps").unwrap(), AsymptoticScalar::one());
    }

    #[test]
    fn errors() {
        let b = ScaleBasis::standard();
        assert_eq!(
            parse(&b, "2*foo"),
            Err(ParseError::UnknownIdentifier("foo".into()))
        );
        assert_eq!(parse(&b, "-2*eps"), Err(ParseError::NonPositiveCoefficient));
        assert_eq!(parse(&b, "0*eps"), Err(ParseError::NonPositiveCoefficient));
        assert!(matches!(
            parse(&b, "1/0"),
            Err(ParseError::MalformedRational(_))
        ));
        assert!(matches!(
            parse(&b, "eps^"),
            Err(ParseError::MalformedRational(_))
        ));
        assert!(matches!(
            parse(&b, "1.*eps"),
            Err(ParseError::MalformedRational(_))
        ));
        assert!(matches!(
            parse(&b, "2 eps"),
            Err(ParseError::Unexpected { .. })
        ));
        assert!(matches!(
            parse(&b, "eps*"),
            Err(ParseError::Unexpected { .. })
        ));
        assert!(matches!(
            parse(&b, "2*3"),
            Err(ParseError::Unexpected { .. })
        ));
        assert_eq!(parse(&b, "   "), Err(ParseError::Empty));
    }

    #[test]
    fn display_round_trips() {
        let b = ScaleBasis::standard();
        for text in [
            "1",
            "2*eps^-1",
            "7/3*exp_inv_eps^2*eps^1/2*log_inv_eps^-1",
            "eps",
            "exp_inv_eps_sq^-3/4",
        ] {
            let s = parse(&b, text).unwrap();
            assert_eq!(s.display(&b).to_string(), text);
            assert_eq!(parse(&b, &s.display(&b).to_string()).unwrap(), s);
        }
    }
}
