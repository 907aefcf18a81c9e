//! Recursive-descent parser for polynomial expression strings.
//!
//! Grammar (standard precedence, `^` binds tightest):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-')* power
//! power  := atom ('^' uint)?
//! atom   := number | 's' | 'th' | '(' expr ')'
//! ```
//!
//! Numbers are integer or decimal literals and are converted to exact
//! rationals (`3.25` becomes `13/4`). Division requires a nonzero constant
//! divisor. The only admitted identifiers are the spatial variables `s`
//! and `th`.

use super::poly::{Poly, Rat, Var};
use num_bigint::BigInt;
use num_traits::{One, Zero};

/// Parse failure with the byte position where it occurred.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

/// Parses an expression string into its expanded canonical polynomial.
pub fn parse_poly(text: &str) -> Result<Poly, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let poly = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(poly)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expr(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.term()?;
        while let Some(op) = self.peek() {
            match op {
                b'+' => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                b'-' => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.unary()?;
        while let Some(op) = self.peek() {
            match op {
                b'*' => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                b'/' => {
                    self.bump();
                    let div_pos = self.pos;
                    let rhs = self.unary()?;
                    let c = rhs.coeff(0, 0);
                    if rhs.deg_s().unwrap_or(0) != 0 || rhs.deg_th().unwrap_or(0) != 0 || c.is_zero()
                    {
                        return Err(ParseError {
                            pos: div_pos,
                            msg: "division requires a nonzero constant divisor".into(),
                        });
                    }
                    acc = acc.scale(&(Rat::one() / c));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Poly, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.bump();
            let exp = self.uint()?;
            Ok(base.pow(exp))
        } else {
            Ok(base)
        }
    }

    fn uint(&mut self) -> Result<usize, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("exponent must be a nonnegative integer literal"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<usize>()
            .map_err(|_| self.err("exponent out of range"))
    }

    fn atom(&mut self) -> Result<Poly, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.bump();
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, variable, or '('")),
        }
    }

    fn number(&mut self) -> Result<Poly, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.src[start..self.pos];
        let mut frac_part: &[u8] = b"";
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let fstart = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_part = &self.src[fstart..self.pos];
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(self.err("malformed number"));
        }
        let digits: String = int_part
            .iter()
            .chain(frac_part.iter())
            .map(|&b| b as char)
            .collect();
        let numer: BigInt = digits.parse().map_err(|_| self.err("malformed number"))?;
        let denom = BigInt::from(10).pow(frac_part.len() as u32);
        Ok(Poly::constant(Rat::new(numer, denom)))
    }

    fn ident(&mut self) -> Result<Poly, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "s" => Ok(Poly::var(Var::S)),
            "th" => Ok(Poly::var(Var::Th)),
            other => Err(ParseError {
                pos: start,
                msg: format!("unknown identifier '{other}' (only 's' and 'th' are allowed)"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::poly::{rat, rint};

    #[test]
    fn expands_canonically() {
        let p = parse_poly("3*s^2 - s*th + 1").unwrap();
        assert_eq!(p.coeff(0, 0), rint(1));
        assert_eq!(p.coeff(1, 1), rint(-1));
        assert_eq!(p.coeff(2, 0), rint(3));
        assert_eq!(p.terms().count(), 3);
    }

    #[test]
    fn zero_literal() {
        assert!(parse_poly("0").unwrap().is_zero());
        assert!(parse_poly("s - s").unwrap().is_zero());
    }

    #[test]
    fn division_and_products() {
        // (1-s)*(s/4) = s/4 - s^2/4
        let p = parse_poly("(1-s)*(s/4)").unwrap();
        assert_eq!(p.coeff(1, 0), rat(1, 4));
        assert_eq!(p.coeff(2, 0), rat(-1, 4));
        assert_eq!(p.terms().count(), 2);
    }

    #[test]
    fn decimal_literals_are_exact() {
        let p = parse_poly("-9.39*s^10 + 6.61").unwrap();
        assert_eq!(p.coeff(10, 0), rat(-939, 100));
        assert_eq!(p.coeff(0, 0), rat(661, 100));
    }

    #[test]
    fn reports_position_on_syntax_error() {
        let e = parse_poly("3*s^2 +* th").unwrap_err();
        assert_eq!(e.pos, 7); // the offending '*'
    }

    #[test]
    fn rejects_unknown_identifier() {
        let e = parse_poly("2*x").unwrap_err();
        assert!(e.msg.contains("unknown identifier"));
    }

    #[test]
    fn rejects_non_integer_exponent() {
        assert!(parse_poly("s^(2)").is_err());
        assert!(parse_poly("s^-1").is_err());
    }

    #[test]
    fn rejects_polynomial_divisor() {
        assert!(parse_poly("1/s").is_err());
        assert!(parse_poly("s/0").is_err());
    }

    #[test]
    fn display_parse_roundtrip() {
        for src in ["(1-s)*(s/4 - th)", "s^3*th^2 - 7/2", "-s + th - 1"] {
            let p = parse_poly(src).unwrap();
            let q = parse_poly(&p.to_string()).unwrap();
            assert_eq!(p, q);
        }
    }
}
