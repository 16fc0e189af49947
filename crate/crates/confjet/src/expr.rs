//! Rational-function expressions for metric components.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := "-" factor | atom ("^" int)?
//! atom   := rational | ident | "(" expr ")"
//! ```

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::jet::{Jet, JetError, VarSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Num(Scalar),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at byte {}: {}", self.offset, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UnknownVar(String),
    DenominatorVanishes,
    Jet(JetError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownVar(v) => write!(f, "unknown variable `{}`", v),
            EvalError::DenominatorVanishes => write!(f, "denominator vanishes at the base point"),
            EvalError::Jet(e) => write!(f, "{}", e),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, at: usize, msg: &str) -> Result<T, ParseError> {
        Err(ParseError { offset: at, message: msg.to_string() })
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == b'*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(self.factor()?.into()));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.int()?;
            return Ok(Expr::Pow(base.into(), e));
        }
        Ok(base)
    }

    fn int(&mut self) -> Result<i32, ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        let mut end = start;
        if self.src.get(end) == Some(&b'-') {
            end += 1;
        }
        let digits = end;
        while end < self.src.len() && self.src[end].is_ascii_digit() {
            end += 1;
        }
        let next = self.src.get(end).copied();
        if end == digits || matches!(next, Some(b'.')) || matches!(next, Some(c) if c.is_ascii_alphabetic() || c == b'_') {
            return self.err(start, "non-integer exponent");
        }
        let text = core::str::from_utf8(&self.src[start..end]).unwrap();
        let v: i32 = match text.parse() {
            Ok(v) => v,
            Err(_) => return self.err(start, "exponent out of range"),
        };
        self.pos = end;
        Ok(v)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = match self.peek() {
            Some(_) => self.pos,
            None => return self.err(self.pos, "unexpected end of input"),
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err(self.pos, "expected `)`");
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'.') {
                end += 1;
            }
            let text = core::str::from_utf8(&self.src[start..end]).unwrap();
            let v: Scalar = match text.parse() {
                Ok(v) => v,
                Err(_) => return self.err(start, "malformed number"),
            };
            self.pos = end;
            return Ok(Expr::Num(v));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < self.src.len() && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok(Expr::Var(core::str::from_utf8(&self.src[start..end]).unwrap().to_string()));
        }
        self.err(start, "unexpected character")
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        if p.peek().is_some() {
            return p.err(p.pos, "unexpected trailing input");
        }
        Ok(e)
    }

    /// Point evaluation with an environment for the variables.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Scalar>) -> Result<Scalar, EvalError> {
        Ok(match self {
            Expr::Num(v) => v.clone(),
            Expr::Var(n) => env(n).ok_or_else(|| EvalError::UnknownVar(n.clone()))?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Expr::Div(a, b) => {
                let d = b.eval(env)?;
                a.eval(env)? * d.recip().ok_or(EvalError::DenominatorVanishes)?
            }
            Expr::Pow(a, e) => {
                let v = a.eval(env)?;
                if *e < 0 && v.is_zero() {
                    return Err(EvalError::DenominatorVanishes);
                }
                v.pow(*e)
            }
        })
    }

    /// Taylor jet about `base` in displacement coordinates: the variable
    /// named `vars[i]` is replaced by `base[i] + vars[i]`.
    pub fn to_jet(&self, vars: &Arc<VarSet>, base: &[Scalar], order: u32) -> Result<Jet, EvalError> {
        Ok(match self {
            Expr::Num(v) => Jet::constant(vars, order, v.clone()),
            Expr::Var(n) => {
                let i = vars.index(n).ok_or_else(|| EvalError::UnknownVar(n.clone()))?;
                let b = base.get(i).cloned().unwrap_or_else(Scalar::zero);
                &Jet::var(vars, order, i) + &Jet::constant(vars, order, b)
            }
            Expr::Neg(a) => -a.to_jet(vars, base, order)?,
            Expr::Add(a, b) => &a.to_jet(vars, base, order)? + &b.to_jet(vars, base, order)?,
            Expr::Sub(a, b) => &a.to_jet(vars, base, order)? - &b.to_jet(vars, base, order)?,
            Expr::Mul(a, b) => &a.to_jet(vars, base, order)? * &b.to_jet(vars, base, order)?,
            Expr::Div(a, b) => {
                let d = b.to_jet(vars, base, order)?.invert().map_err(|_| EvalError::DenominatorVanishes)?;
                &a.to_jet(vars, base, order)? * &d
            }
            Expr::Pow(a, e) => {
                let v = a.to_jet(vars, base, order)?;
                if *e >= 0 {
                    v.powi(*e as u32)
                } else {
                    v.invert().map_err(|_| EvalError::DenominatorVanishes)?.powi(e.unsigned_abs())
                }
            }
        })
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if !v.is_integer() => 2,
            Expr::Num(v) if v.is_negative() => 3,
            _ => 5,
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "({})", self)
        } else {
            write!(f, "{}", self)
        }
    }

    /// Variable names in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(n) => {
                    if !out.contains(n) {
                        out.push(n.clone())
                    }
                }
                Expr::Neg(a) | Expr::Pow(a, _) => walk(a, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

impl fmt::Display for Expr {
    /// Minimal parenthesization that reparses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_integer() {
                    write!(f, "{}", v.numer())
                } else {
                    write!(f, "{}/{}", v.numer(), v.denom())
                }
            }
            Expr::Var(n) => write!(f, "{}", n),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_wrapped(f, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_wrapped(f, 1)?;
                write!(f, " {} ", if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                b.write_wrapped(f, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_wrapped(f, 2)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                b.write_wrapped(f, 3)
            }
            Expr::Pow(a, e) => {
                a.write_wrapped(f, 5)?;
                write!(f, "^{}", e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::mono_from_exps;
    use alloc::boxed::Box;
    use alloc::format;
    use proptest::prelude::*;

    fn n(v: i64) -> Box<Expr> {
        Box::new(Expr::Num(Scalar::from_int(v)))
    }
    fn v(s: &str) -> Box<Expr> {
        Box::new(Expr::Var(s.into()))
    }

    #[test]
    fn stereographic_shape() {
        let e = Expr::parse("4/(1+x^2+y^2)^2").unwrap();
        let inner = Expr::Add(Box::new(Expr::Add(n(1), Box::new(Expr::Pow(v("x"), 2)))), Box::new(Expr::Pow(v("y"), 2)));
        assert_eq!(e, Expr::Div(n(4), Box::new(Expr::Pow(Box::new(inner), 2))));
    }

    #[test]
    fn evaluates_mixed_signs() {
        let e = Expr::parse("-x*y + 1/3").unwrap();
        let one = |_: &str| Some(Scalar::one());
        assert_eq!(e.eval(&one).unwrap(), Scalar::ratio(-2, 3));
    }

    #[test]
    fn rejects_symbolic_exponent() {
        let err = Expr::parse("x^y").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.message.contains("non-integer exponent"));
        assert!(Expr::parse("x^1.5").is_err());
        assert!(Expr::parse("(x+1").is_err());
        assert_eq!(Expr::parse("x $ y").unwrap_err().offset, 2);
    }

    #[test]
    fn unary_minus_binds_below_power() {
        let e = Expr::parse("-x^2").unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(v("x"), 2))));
    }

    #[test]
    fn geometric_series_jet() {
        let vars = VarSet::new(["x"]).unwrap();
        let j = Expr::parse("1/(1-x)").unwrap().to_jet(&vars, &[Scalar::zero()], 2).unwrap();
        let want = Jet::from_terms(&vars, 2, (0..3).map(|k| (mono_from_exps(&[k]), Scalar::one())));
        assert_eq!(j, want);
        let c = Expr::parse("7/2").unwrap().to_jet(&vars, &[Scalar::zero()], 2).unwrap();
        assert_eq!(c, Jet::constant(&vars, 2, Scalar::ratio(7, 2)));
    }

    #[test]
    fn stereographic_jet() {
        // oracle: 4(1+s)^-2 = 4 - 8s + 12 s^2 - ..., s = x^2 + y^2
        let vars = VarSet::new(["x", "y"]).unwrap();
        let j = Expr::parse("4/(1+x^2+y^2)^2").unwrap().to_jet(&vars, &[Scalar::zero(), Scalar::zero()], 2).unwrap();
        let want = Jet::from_terms(
            &vars,
            2,
            [
                (mono_from_exps(&[0, 0]), Scalar::from_int(4)),
                (mono_from_exps(&[2, 0]), Scalar::from_int(-8)),
                (mono_from_exps(&[0, 2]), Scalar::from_int(-8)),
            ],
        );
        assert_eq!(j, want);
    }

    #[test]
    fn recentred_base_point() {
        let vars = VarSet::new(["x"]).unwrap();
        let j = Expr::parse("x^2").unwrap().to_jet(&vars, &[Scalar::from_int(3)], 3).unwrap();
        let want =
            Jet::from_terms(&vars, 3, [(0, Scalar::from_int(9)), (mono_from_exps(&[1]), Scalar::from_int(6)), (mono_from_exps(&[2]), Scalar::one())]);
        assert_eq!(j, want);
        let err = Expr::parse("1/(x-3)").unwrap().to_jet(&vars, &[Scalar::from_int(3)], 3).unwrap_err();
        assert_eq!(err, EvalError::DenominatorVanishes);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0i64..20).prop_map(|k| Expr::Num(Scalar::from_int(k))),
            prop_oneof![Just("x"), Just("y"), Just("z1")].prop_map(|s| Expr::Var(s.into())),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(a.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
                (inner, -3i32..4).prop_map(|(a, e)| Expr::Pow(a.into(), e)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_reparse_identity(e in arb_expr()) {
            let s = format!("{}", e);
            prop_assert_eq!(Expr::parse(&s).unwrap(), e);
        }
    }
}
