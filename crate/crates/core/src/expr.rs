//! Inline disc expressions.
//!
//! Grammar (one component per `;`-separated part):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary ('*' unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' integer)?
//! atom  := number ['i'] | 'i' | 'zeta' | 'z' | 'conj' '(' expr ')' | '(' expr ')'
//! ```

use crate::basis::DiscMap;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, C};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Polynomial in `ζ`, `ζ̄`: `(j, k) ↦ coefficient of ζʲζ̄ᵏ`.
type Poly = BTreeMap<(usize, usize), Complex64>;

const MAX_DEGREE: usize = 64;

fn constant(c: Complex64) -> Poly {
    let mut p = Poly::new();
    if c != Complex64::new(0.0, 0.0) {
        p.insert((0, 0), c);
    }
    p
}

fn add(mut a: Poly, b: &Poly, sign: f64) -> Poly {
    for (&key, &v) in b {
        *a.entry(key).or_default() += v * sign;
    }
    a.retain(|_, v| *v != Complex64::new(0.0, 0.0));
    a
}

fn mul(a: &Poly, b: &Poly) -> Result<Poly> {
    let mut out = Poly::new();
    for (&(j1, k1), &v1) in a {
        for (&(j2, k2), &v2) in b {
            let key = (j1 + j2, k1 + k2);
            if key.0 + key.1 > MAX_DEGREE {
                return Err(Error::Parse(format!("expression degree exceeds {MAX_DEGREE}")));
            }
            *out.entry(key).or_default() += v1 * v2;
        }
    }
    out.retain(|_, v| *v != Complex64::new(0.0, 0.0));
    Ok(out)
}

fn conj(a: &Poly) -> Poly {
    a.iter().map(|(&(j, k), v)| ((k, j), v.conj())).collect()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in {:?}", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_alphanumeric() && c != '_').unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = add(acc, &self.term()?, 1.0);
            } else if self.eat('-') {
                acc = add(acc, &self.term()?, -1.0);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.unary()?;
        while self.eat('*') {
            acc = mul(&acc, &self.unary()?)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Poly> {
        if self.eat('-') {
            return Ok(add(Poly::new(), &self.unary()?, -1.0));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected a non-negative integer exponent"));
        }
        let e: usize = rest[..len].parse().map_err(|_| self.err("bad exponent"))?;
        self.pos += len;
        if e > MAX_DEGREE {
            return Err(self.err("exponent too large"));
        }
        let mut out = constant(Complex64::new(1.0, 0.0));
        for _ in 0..e {
            out = mul(&out, &base)?;
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let bytes = rest.as_bytes();
        let mut len = 0;
        while len < bytes.len() && (bytes[len].is_ascii_digit() || bytes[len] == b'.') {
            len += 1;
        }
        if len < bytes.len() && (bytes[len] == b'e' || bytes[len] == b'E') {
            let mut k = len + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                len = k;
            }
        }
        let v = rest[..len].parse::<f64>().map_err(|_| self.err("bad number"))?;
        self.pos += len;
        Ok(v)
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let v = self.number()?;
                // imaginary literal: digits immediately followed by `i`
                let rest = &self.src[self.pos..];
                if rest.starts_with('i') && !rest[1..].starts_with(|c: char| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                    return Ok(constant(Complex64::new(0.0, v)));
                }
                Ok(constant(Complex64::new(v, 0.0)))
            }
            Some(c) if c.is_ascii_alphabetic() => match self.ident() {
                "i" => Ok(constant(Complex64::new(0.0, 1.0))),
                "zeta" | "z" => Ok(Poly::from([((1, 0), Complex64::new(1.0, 0.0))])),
                "conj" => {
                    if !self.eat('(') {
                        return Err(self.err("expected '(' after conj"));
                    }
                    let e = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.err("expected ')'"));
                    }
                    Ok(conj(&e))
                }
                other => Err(self.err(&format!("unknown identifier {other:?}"))),
            },
            Some(c) => Err(self.err(&format!("unexpected character {c:?}"))),
        }
    }
}

fn parse_component(src: &str) -> Result<Poly> {
    let mut p = Parser { src, pos: 0 };
    let out = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(out)
}

/// Parses `expr (; expr)*` into a map with one component per part.
pub fn parse_disc<S: Scalar>(src: &str) -> Result<DiscMap<S>> {
    let parts: Vec<Poly> = src.split(';').map(parse_component).collect::<Result<_>>()?;
    let degree = parts
        .iter()
        .flat_map(|p| p.keys())
        .map(|&(j, k)| j + k)
        .max()
        .unwrap_or(0);
    let mut m = DiscMap::zeros(parts.len(), degree);
    for (a, p) in parts.iter().enumerate() {
        for (&(j, k), v) in p {
            m.set(a, j, k, C::new(S::lit(v.re), S::lit(v.im)));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn standard_initial_disc() {
        let m = parse_disc::<f64>("zeta + 0.05*conj(zeta)^2").unwrap();
        assert_eq!(m.coeff(0, 1, 0), c(1.0, 0.0));
        assert_eq!(m.coeff(0, 0, 2), c(0.05, 0.0));
        assert_eq!(m.degree(), 2);
    }

    #[test]
    fn complex_literals_and_products() {
        let m = parse_disc::<f64>("(1 + 2i)*z*conj(z) - i; 3e-2*conj(i*z)").unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.coeff(0, 1, 1), c(1.0, 2.0));
        assert_eq!(m.coeff(0, 0, 0), c(0.0, -1.0));
        assert_eq!(m.coeff(1, 0, 1), c(0.0, -0.03));
        let e = parse_disc::<f64>("(zeta - 1)^2").unwrap();
        assert_eq!(e.coeff(0, 1, 0), c(-2.0, 0.0));
    }

    #[test]
    fn errors() {
        for bad in ["zeta +", "exp(zeta)", "zeta^x", "(zeta", "zeta)", "1..2"] {
            assert!(matches!(parse_disc::<f64>(bad), Err(Error::Parse(_))), "{bad}");
        }
    }
}
