//! Scalar time functions written as text, e.g. `0.5*exp(-t)*cos(2*pi*t)`.
//!
//! Grammar: numbers, `t`, `i`, `pi`, `e`, `+ - * / ^`, unary minus,
//! parentheses and the functions `exp ln sin cos sqrt abs sign re im conj`.
//! Values are complex; derivatives with respect to `t` are symbolic.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::timefn::TimeFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Sign,
    Re,
    Im,
    Conj,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "re" => Func::Re,
            "im" => Func::Im,
            "conj" => Func::Conj,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Re => "re",
            Func::Im => "im",
            Func::Conj => "conj",
        }
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Exp => z.exp(),
            Func::Ln => z.ln(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Sqrt => z.sqrt(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
            Func::Sign => {
                let r = z.norm();
                if r == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    z / r
                }
            }
            Func::Re => Complex64::new(z.re, 0.0),
            Func::Im => Complex64::new(z.im, 0.0),
            Func::Conj => z.conj(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    T,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn real(x: f64) -> Expr {
    Expr::Const(Complex64::new(x, 0.0))
}

fn is_const(e: &Expr, x: f64) -> bool {
    matches!(e, Expr::Const(z) if *z == Complex64::new(x, 0.0))
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, b) if is_const(&a, 0.0) => b,
        (a, b) if is_const(&b, 0.0) => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, b) if is_const(&b, 0.0) => a,
        (a, b) if is_const(&a, 0.0) => neg(b),
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if is_const(&a, 0.0) => real(0.0),
        (_, b) if is_const(&b, 0.0) => real(0.0),
        (a, b) if is_const(&a, 1.0) => b,
        (a, b) if is_const(&b, 1.0) => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if is_const(&a, 0.0) => real(0.0),
        (a, b) if is_const(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => Expr::Const(-x),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Const(z) => Expr::Const(f.apply(z)),
        a => Expr::Call(f, Box::new(a)),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            src,
            tokens: tokenize(src)?,
            pos: 0,
        };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(tok) => Err(Error::Expression {
                position: tok.pos,
                message: format!("unexpected {:?}", tok.kind),
            }),
        }
    }

    pub fn constant(z: Complex64) -> Self {
        Expr::Const(z)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            Expr::Const(z) => *z,
            Expr::T => Complex64::new(t, 0.0),
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, b) => pow(a.eval(t), b.eval(t)),
            Expr::Call(f, a) => f.apply(a.eval(t)),
        }
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::T => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on_t(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on_t() || b.depends_on_t(),
        }
    }

    /// Symbolic `d/dt`.
    pub fn derivative(&self) -> Expr {
        if !self.depends_on_t() {
            return real(0.0);
        }
        match self {
            Expr::Const(_) => real(0.0),
            Expr::T => real(1.0),
            Expr::Neg(a) => neg(a.derivative()),
            Expr::Add(a, b) => add(a.derivative(), b.derivative()),
            Expr::Sub(a, b) => sub(a.derivative(), b.derivative()),
            Expr::Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                ),
                mul((**b).clone(), (**b).clone()),
            ),
            Expr::Pow(a, b) if !b.depends_on_t() => {
                let exponent = (**b).clone();
                let lowered = Expr::Pow(a.clone(), Box::new(sub(exponent.clone(), real(1.0))));
                mul(mul(exponent, lowered), a.derivative())
            }
            Expr::Pow(a, b) => {
                let inner = add(
                    mul(b.derivative(), call(Func::Ln, (**a).clone())),
                    div(mul((**b).clone(), a.derivative()), (**a).clone()),
                );
                mul(self.clone(), inner)
            }
            Expr::Call(f, a) => {
                let a0 = (**a).clone();
                let da = a.derivative();
                match f {
                    Func::Exp => mul(self.clone(), da),
                    Func::Ln => div(da, a0),
                    Func::Sin => mul(call(Func::Cos, a0), da),
                    Func::Cos => neg(mul(call(Func::Sin, a0), da)),
                    Func::Sqrt => div(da, mul(real(2.0), self.clone())),
                    Func::Abs => div(
                        call(Func::Re, mul(call(Func::Conj, a0), da)),
                        self.clone(),
                    ),
                    Func::Sign => real(0.0),
                    Func::Re => call(Func::Re, da),
                    Func::Im => call(Func::Im, da),
                    Func::Conj => call(Func::Conj, da),
                }
            }
        }
    }

    pub fn to_timefn(&self) -> TimeFn<Complex64> {
        let v = self.clone();
        let d = self.derivative();
        TimeFn::with_derivative(move |t| v.eval(t), move |t| d.eval(t))
    }

    /// Real part as a time function.
    pub fn to_real_timefn(&self) -> TimeFn<f64> {
        let v = self.clone();
        let d = self.derivative();
        TimeFn::with_derivative(move |t| v.eval(t).re, move |t| d.eval(t).re)
    }
}

fn pow(a: Complex64, b: Complex64) -> Complex64 {
    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= i32::MAX as f64 {
        a.powi(b.re as i32)
    } else if a.im == 0.0 && a.re >= 0.0 && b.im == 0.0 {
        Complex64::new(a.re.powf(b.re), 0.0)
    } else {
        a.powc(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(z) if z.im == 0.0 => write!(f, "{}", z.re),
            Expr::Const(z) => write!(f, "({}+{}*i)", z.re, z.im),
            Expr::T => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if ch.is_ascii_digit() || ch == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value = text.parse::<f64>().map_err(|_| Error::Expression {
                position: start,
                message: format!("malformed number {text:?}"),
            })?;
            TokenKind::Number(value)
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            TokenKind::Ident(src[start..i].to_string())
        } else {
            i += ch.len_utf8();
            match ch {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(ch),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                _ => {
                    return Err(Error::Expression {
                        position: start,
                        message: format!("unexpected character {ch:?}"),
                    })
                }
            }
        };
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokenKind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        Error::Expression {
            position: self.peek().map_or(self.src.len(), |t| t.pos),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.next() else {
            return Err(Error::Expression {
                position: self.src.len(),
                message: "unexpected end of expression".into(),
            });
        };
        match tok.kind {
            TokenKind::Number(x) => Ok(real(x)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::T),
                "i" => Ok(Expr::Const(Complex64::new(0.0, 1.0))),
                "pi" => Ok(real(std::f64::consts::PI)),
                "e" => Ok(real(std::f64::consts::E)),
                _ => {
                    let func = Func::from_name(&name).ok_or_else(|| Error::Expression {
                        position: tok.pos,
                        message: format!("unknown identifier {name:?}"),
                    })?;
                    match self.next() {
                        Some(Token {
                            kind: TokenKind::LParen,
                            ..
                        }) => {}
                        _ => {
                            return Err(Error::Expression {
                                position: tok.pos,
                                message: format!("{name} must be followed by '('"),
                            })
                        }
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            },
            other => Err(Error::Expression {
                position: tok.pos,
                message: format!("unexpected {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here("expected ')'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64) -> Complex64 {
        Expr::parse(src).unwrap().eval(t)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", 0.0).re, 7.0);
        assert_eq!(ev("-2^2", 0.0).re, -4.0);
        assert_eq!(ev("2^3^2", 0.0).re, 512.0);
        assert_eq!(ev("8/2/2", 0.0).re, 2.0);
        assert_eq!(ev("(1+2)*t", 2.0).re, 6.0);
        assert_eq!(ev("2e-1*10", 0.0).re, 2.0);
    }

    #[test]
    fn complex_constants() {
        let z = ev("i*sin(t)", std::f64::consts::FRAC_PI_2);
        assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let z = ev("exp(i*pi)", 0.0);
        assert!((z + 1.0).norm() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let cases = [
            "exp(-t)*cos(t)^2",
            "sqrt(1+t^2)",
            "0.3*exp(i*2*t)/(1+t)",
            "abs(cos(t))",
            "t^t",
            "ln(2+sin(t))",
            "conj(exp(i*t))",
        ];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative();
            for &t in &[0.3, 1.1, 2.7] {
                let h = 1e-6;
                let fd = (e.eval(t + h) - e.eval(t - h)) / (2.0 * h);
                let an = d.eval(t);
                assert!((fd - an).norm() < 1e-6, "{src} at {t}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + foo(t)") {
            Err(Error::Expression { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1+t").is_err());
        assert!(Expr::parse("1+").is_err());
        assert!(Expr::parse("2 $ 3").is_err());
        assert!(Expr::parse("sin t").is_err());
    }

    #[test]
    fn constant_expressions_have_zero_derivative() {
        let e = Expr::parse("3*pi+i").unwrap();
        assert!(!e.depends_on_t());
        assert_eq!(e.derivative(), real(0.0));
    }
}
