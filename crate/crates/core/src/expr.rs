//! Arithmetic expressions for user-supplied reaction terms.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, `ln(..)`, `exp(..)`,
//! numeric literals, parameter names and state variables `u1..um`.
//! `^` is right associative and binds tighter than unary minus.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token {token:?} at offset {pos}")]
    UnexpectedToken { token: String, pos: usize },
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("state variable {name} out of range (m = {m})")]
    StateOutOfRange { name: String, m: usize },
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    State(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Ln(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::State(i) => u[*i],
            Expr::Neg(a) => -a.eval(u),
            Expr::Add(a, b) => a.eval(u) + b.eval(u),
            Expr::Sub(a, b) => a.eval(u) - b.eval(u),
            Expr::Mul(a, b) => a.eval(u) * b.eval(u),
            Expr::Div(a, b) => a.eval(u) / b.eval(u),
            Expr::Pow(a, b) => a.eval(u).powf(b.eval(u)),
            Expr::Ln(a) => a.eval(u).ln(),
            Expr::Exp(a) => a.eval(u).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == '+' || bytes[i] == '-') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = bytes[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ExprError::UnexpectedChar { ch: c, pos: start })?;
            out.push((Tok::Num(v), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(bytes[start..i].iter().collect()), start));
        } else if "+-*/^".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else if c == '(' {
            out.push((Tok::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, i));
            i += 1;
        } else {
            return Err(ExprError::UnexpectedChar { ch: c, pos: i });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
    m: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn unexpected(&self) -> ExprError {
        match self.toks.get(self.pos) {
            Some((t, p)) => ExprError::UnexpectedToken {
                token: format!("{t:?}"),
                pos: *p,
            },
            None => ExprError::UnexpectedEnd,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return Err(ExprError::UnexpectedEnd);
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.unexpected()),
                }
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(Tok::LParen) = self.peek() {
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !matches!(self.peek(), Some(Tok::RParen)) {
                        return Err(self.unexpected());
                    }
                    self.pos += 1;
                    return match name.as_str() {
                        "ln" => Ok(Expr::Ln(Box::new(arg))),
                        "exp" => Ok(Expr::Exp(Box::new(arg))),
                        _ => Err(ExprError::UnknownFunction(name)),
                    };
                }
                if let Some(v) = self.params.get(&name) {
                    return Ok(Expr::Const(*v));
                }
                if let Some(idx) = name.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
                    if idx >= 1 && idx <= self.m {
                        return Ok(Expr::State(idx - 1));
                    }
                    return Err(ExprError::StateOutOfRange { name, m: self.m });
                }
                Err(ExprError::UnknownIdentifier(name))
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses `src` with parameter values inlined and `u1..um` bound to state slots.
pub fn parse(src: &str, params: &BTreeMap<String, f64>, m: usize) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        params,
        m,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BTreeMap<String, f64> {
        [("a", 2.0), ("beta", 3.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn precedence_and_associativity() {
        let p = params();
        let e = parse("1 + 2 * 3 ^ 2 ^ 0.5 - -u1", &p, 1).unwrap();
        let want = 1.0 + 2.0 * 3f64.powf(2f64.powf(0.5)) + 4.0;
        assert!((e.eval(&[4.0]) - want).abs() < 1e-12);
        let e = parse("-u1^2", &p, 1).unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
        let e = parse("8 / 2 / 2", &p, 0).unwrap();
        assert_eq!(e.eval(&[]), 2.0);
    }

    #[test]
    fn functions_params_and_states() {
        let p = params();
        let e = parse("-a*u1 + a*u2/(1+beta*u1) + ln(u2+1) - exp(0)", &p, 2).unwrap();
        let u = [0.5, 1.5];
        let want = -2.0 * 0.5 + 2.0 * 1.5 / (1.0 + 1.5) + 2.5f64.ln() - 1.0;
        assert!((e.eval(&u) - want).abs() < 1e-14);
        assert_eq!(parse("1.5e-3", &p, 0).unwrap().eval(&[]), 1.5e-3);
    }

    #[test]
    fn errors() {
        let p = params();
        assert_eq!(parse("u3", &p, 2), Err(ExprError::StateOutOfRange { name: "u3".into(), m: 2 }));
        assert_eq!(parse("gamma*u1", &p, 2), Err(ExprError::UnknownIdentifier("gamma".into())));
        assert_eq!(parse("sin(u1)", &p, 2), Err(ExprError::UnknownFunction("sin".into())));
        assert_eq!(parse("(u1", &p, 2), Err(ExprError::UnexpectedEnd));
        assert!(matches!(parse("u1 $", &p, 2), Err(ExprError::UnexpectedChar { ch: '$', .. })));
        assert!(matches!(parse("u1 u2", &p, 2), Err(ExprError::UnexpectedToken { .. })));
    }
}
