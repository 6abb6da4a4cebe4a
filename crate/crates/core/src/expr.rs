//! Parser and evaluator for rational expressions in the dynamical
//! variable `z` and the parameter `lambda` (alias `c`).
//!
//! Grammar (LL, Pratt-parsed):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?          exponent: nonnegative integer
//! atom    := number | number 'i' | 'i' | 'z' | 'lambda' | 'c' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, which binds tighter than `*` `/`,
//! which bind tighter than `+` `-`. Binary operators associate left,
//! `^` associates right. There is no implicit multiplication.

pub mod ratpoly;

use num_complex::Complex64;
use std::fmt;

use crate::error::{BifError, Result};
use crate::numerics::Jet;

/// AST of a rational expression in `z` and `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Z,
    Lambda,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool), // value, imaginary flag
    Z,
    Lambda,
    ImagUnit,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token together with its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let b = self.src[self.pos];
        let simple = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((t, start));
        }
        if b.is_ascii_digit() || b == b'.' {
            let mut end = self.pos;
            while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'.')
            {
                end += 1;
            }
            // Optional exponent part, careful not to eat an identifier.
            if end < self.src.len()
                && (self.src[end] == b'e' || self.src[end] == b'E')
                && end + 1 < self.src.len()
                && (self.src[end + 1].is_ascii_digit()
                    || ((self.src[end + 1] == b'+' || self.src[end + 1] == b'-')
                        && end + 2 < self.src.len()
                        && self.src[end + 2].is_ascii_digit()))
            {
                end += 2;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            let value: f64 = text.parse().map_err(|_| BifError::Syntax {
                pos: start,
                expected: "number".into(),
            })?;
            self.pos = end;
            let imag = self.pos < self.src.len() && self.src[self.pos] == b'i' && {
                // `i` must not start a longer identifier
                self.pos + 1 >= self.src.len() || !self.src[self.pos + 1].is_ascii_alphanumeric()
            };
            if imag {
                self.pos += 1;
            }
            return Ok((Tok::Num(value, imag), start));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = self.pos;
            while end < self.src.len()
                && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
            {
                end += 1;
            }
            let name = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_string();
            self.pos = end;
            return match name.as_str() {
                "z" => Ok((Tok::Z, start)),
                "lambda" | "c" => Ok((Tok::Lambda, start)),
                "i" => Ok((Tok::ImagUnit, start)),
                _ => Err(BifError::UnknownIdentifier { pos: start, name }),
            };
        }
        Err(BifError::Syntax { pos: start, expected: "token".into() })
    }
}

// --------------------------------------------------------------- parser

struct Parser<'a> {
    lexer: Lexer<'a>,
    cur: (Tok, usize),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let cur = lexer.next()?;
        Ok(Parser { lexer, cur })
    }

    fn bump(&mut self) -> Result<(Tok, usize)> {
        let prev = std::mem::replace(&mut self.cur, (Tok::Eof, 0));
        self.cur = self.lexer.next()?;
        Ok(prev)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.cur.0 {
                Tok::Plus => {
                    self.bump()?;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump()?;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.cur.0 {
                Tok::Star => {
                    self.bump()?;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump()?;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.cur.0 == Tok::Minus {
            self.bump()?;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.cur.0 == Tok::Caret {
            self.bump()?;
            let exp = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), exp));
        }
        Ok(base)
    }

    /// Exponent: nonnegative integer literal; `a^b^c` nests to the right.
    fn exponent(&mut self) -> Result<u32> {
        let (tok, pos) = self.bump()?;
        let n = match tok {
            Tok::Num(v, false) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => v as u32,
            Tok::Minus | Tok::Num(..) => return Err(BifError::NonIntegerExponent { pos }),
            _ => {
                return Err(BifError::Syntax { pos, expected: "nonnegative integer exponent".into() })
            }
        };
        if self.cur.0 == Tok::Caret {
            let caret_pos = self.cur.1;
            self.bump()?;
            let rhs = self.exponent()?;
            return n
                .checked_pow(rhs)
                .ok_or(BifError::NonIntegerExponent { pos: caret_pos });
        }
        Ok(n)
    }

    fn atom(&mut self) -> Result<Expr> {
        let (tok, pos) = self.bump()?;
        match tok {
            Tok::Num(v, false) => Ok(Expr::Const(Complex64::new(v, 0.0))),
            Tok::Num(v, true) => Ok(Expr::Const(Complex64::new(0.0, v))),
            Tok::ImagUnit => Ok(Expr::Const(Complex64::new(0.0, 1.0))),
            Tok::Z => Ok(Expr::Z),
            Tok::Lambda => Ok(Expr::Lambda),
            Tok::LParen => {
                let inner = self.expr()?;
                let (close, cpos) = self.bump()?;
                if close != Tok::RParen {
                    return Err(BifError::Syntax { pos: cpos, expected: "`)`".into() });
                }
                Ok(inner)
            }
            _ => Err(BifError::Syntax { pos, expected: "number, identifier or `(`".into() }),
        }
    }
}

/// Parse an expression source into an AST.
pub fn parse(source: &str) -> Result<Expr> {
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    if p.cur.0 != Tok::Eof {
        return Err(BifError::Syntax { pos: p.cur.1, expected: "end of input".into() });
    }
    Ok(e)
}

// ----------------------------------------------------------- evaluation

/// Scalar types an expression can be evaluated over.
pub trait EvalScalar: Copy {
    fn from_const(c: Complex64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn is_exact_zero(&self) -> bool;
}

impl EvalScalar for Complex64 {
    fn from_const(c: Complex64) -> Self {
        c
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn is_exact_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

impl EvalScalar for Jet {
    fn from_const(c: Complex64) -> Self {
        Jet::constant(c)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn is_exact_zero(&self) -> bool {
        self.v.re == 0.0 && self.v.im == 0.0
    }
}

/// Evaluate over any scalar, in the arithmetic order given by the AST.
/// Division by an exact complex zero is an [`BifError::EvaluationPole`].
pub fn eval_scalar<T: EvalScalar>(e: &Expr, z: T, lam: T) -> Result<T> {
    Ok(match e {
        Expr::Const(c) => T::from_const(*c),
        Expr::Z => z,
        Expr::Lambda => lam,
        Expr::Add(a, b) => eval_scalar(a, z, lam)?.add(eval_scalar(b, z, lam)?),
        Expr::Sub(a, b) => eval_scalar(a, z, lam)?.sub(eval_scalar(b, z, lam)?),
        Expr::Mul(a, b) => eval_scalar(a, z, lam)?.mul(eval_scalar(b, z, lam)?),
        Expr::Div(a, b) => {
            let den = eval_scalar(b, z, lam)?;
            if den.is_exact_zero() {
                return Err(BifError::EvaluationPole);
            }
            eval_scalar(a, z, lam)?.div(den)
        }
        Expr::Neg(a) => eval_scalar(a, z, lam)?.neg(),
        Expr::Pow(a, n) => {
            let base = eval_scalar(a, z, lam)?;
            let mut acc = T::from_const(Complex64::new(1.0, 0.0));
            for _ in 0..*n {
                acc = acc.mul(base);
            }
            acc
        }
    })
}

/// Plain complex evaluation.
pub fn eval(e: &Expr, z: Complex64, lam: Complex64) -> Result<Complex64> {
    eval_scalar(e, z, lam)
}

// ------------------------------------------------------------- printing

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    if c.re < 0.0 {
                        write!(f, "(0-{})", -c.re)
                    } else {
                        write!(f, "{}", c.re)
                    }
                } else if c.re == 0.0 {
                    if c.im < 0.0 {
                        write!(f, "(0-{}i)", -c.im)
                    } else {
                        write!(f, "{}i", c.im)
                    }
                } else {
                    let (op, im) = if c.im < 0.0 { ("-", -c.im) } else { ("+", c.im) };
                    if c.re < 0.0 {
                        write!(f, "(0-{}{op}{im}i)", -c.re)
                    } else {
                        write!(f, "({}{op}{im}i)", c.re)
                    }
                }
            }
            Expr::Z => write!(f, "z"),
            Expr::Lambda => write!(f, "lambda"),
            Expr::Add(a, b) => {
                child(f, a, 1)?;
                write!(f, "+")?;
                child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, "-")?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, "*")?;
                child(f, b, 3)
            }
            Expr::Div(a, b) => {
                child(f, a, 2)?;
                write!(f, "/")?;
                child(f, b, 3)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 3)
            }
            Expr::Pow(a, n) => {
                child(f, a, 5)?;
                write!(f, "^{n}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parse_quadratic_family() {
        let e = parse("z^2 + c").unwrap();
        assert_eq!(
            e,
            Expr::Add(Box::new(Expr::Pow(Box::new(Expr::Z), 2)), Box::new(Expr::Lambda))
        );
    }

    #[test]
    fn parse_lattes_family() {
        let e = parse("(z^2-c)^2/(4*z*(z-1)*(z-c))").unwrap();
        // Well-formed: top level is a division of a power by a product.
        match e {
            Expr::Div(n, d) => {
                assert!(matches!(*n, Expr::Pow(..)));
                assert!(matches!(*d, Expr::Mul(..)));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn parse_dangling_caret() {
        match parse("z^") {
            Err(BifError::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parse_negative_exponent_rejected() {
        assert!(matches!(parse("z^-1"), Err(BifError::NonIntegerExponent { .. })));
        assert!(matches!(parse("z^1.5"), Err(BifError::NonIntegerExponent { .. })));
    }

    #[test]
    fn parse_unknown_identifier() {
        match parse("z + w") {
            Err(BifError::UnknownIdentifier { pos, name }) => {
                assert_eq!(pos, 4);
                assert_eq!(name, "w");
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
    }

    #[test]
    fn parse_complex_literals() {
        assert_eq!(parse("2i").unwrap(), Expr::Const(c(0.0, 2.0)));
        let e = parse("(0.5+0.5i)").unwrap();
        assert_eq!(eval(&e, c(0.0, 0.0), c(0.0, 0.0)).unwrap(), c(0.5, 0.5));
        assert_eq!(parse("i").unwrap(), Expr::Const(c(0.0, 1.0)));
    }

    #[test]
    fn eval_quadratic() {
        let e = parse("z^2+c").unwrap();
        assert_eq!(eval(&e, c(2.0, 0.0), c(0.0, 0.0)).unwrap(), c(4.0, 0.0));
        assert_eq!(eval(&e, c(0.0, 0.0), c(-2.0, 0.0)).unwrap(), c(-2.0, 0.0));
    }

    #[test]
    fn eval_pole() {
        let e = parse("1/z").unwrap();
        assert!(matches!(eval(&e, c(0.0, 0.0), c(0.0, 0.0)), Err(BifError::EvaluationPole)));
    }

    #[test]
    fn precedence_unary_minus_vs_pow() {
        // ^ binds tighter than unary minus: -z^2 = -(z^2).
        let e = parse("-z^2").unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Z), 2))));
        // unary minus binds tighter than *: -2*z = (-2)*z.
        let e = parse("-2*z").unwrap();
        assert!(matches!(e, Expr::Mul(..)));
    }

    #[test]
    fn pow_right_associative() {
        let e = parse("z^2^3").unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Z), 8));
    }

    #[test]
    fn print_parse_roundtrip() {
        for src in [
            "z^2+c",
            "(z^2-c)^2/(4*z*(z-1)*(z-c))",
            "z+1/z",
            "-z^2-2*c",
            "1.5*z-2i",
            "z/(c*z-1)/c",
            "z-(c-z)",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap_or_else(|err| {
                panic!("reparse of `{printed}` failed: {err}");
            });
            assert_eq!(e, reparsed, "roundtrip of `{src}` via `{printed}`");
        }
    }
}
