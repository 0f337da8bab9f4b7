//! Small arithmetic expression language for state-dependent matrix entries
//! A_j(u). Variables are u1..uN; functions sin, cos, exp, sqrt; operators
//! + - * / ^ with the usual precedence. Expressions compile to a flat
//! postfix program; a tree-walking interpreter doubles as the reference
//! evaluator in tests.

use crate::error::{CoreError, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based state index: `u3` parses to `Var(2)`.
    Var(usize),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_tok(&mut self) -> Result<Option<(Tok, usize)>> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                let mut seen_e = false;
                while end < self.src.len() {
                    let b = self.src[end];
                    if b.is_ascii_digit() || b == b'.' {
                        end += 1;
                    } else if (b == b'e' || b == b'E') && !seen_e {
                        seen_e = true;
                        end += 1;
                        if end < self.src.len() && (self.src[end] == b'+' || self.src[end] == b'-')
                        {
                            end += 1;
                        }
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let val: f64 = text.parse().map_err(|_| CoreError::SyntaxError {
                    offset: start,
                    msg: format!("bad number `{text}`"),
                })?;
                self.pos = end;
                Tok::Num(val)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                self.pos = end;
                Tok::Ident(text.to_string())
            }
            other => {
                return Err(CoreError::SyntaxError {
                    offset: start,
                    msg: format!("unexpected byte `{}`", other as char),
                })
            }
        };
        Ok(Some((tok, start)))
    }
}

// --------------------------------------------------------------- parser

pub struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
    n_state: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.idx)
    }
    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }
    fn err_here(&self, msg: &str) -> CoreError {
        let offset = self.peek().map(|t| t.1).unwrap_or(self.end);
        CoreError::SyntaxError {
            offset,
            msg: msg.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some((Tok::Plus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some((Tok::Minus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Some((Tok::Star, _)) => {
                    self.bump();
                    let rhs = self.power()?;
                    lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some((Tok::Slash, _)) => {
                    self.bump();
                    let rhs = self.power()?;
                    lhs = Expr::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    // right-associative
    fn power(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.bump();
            let exp = self.power()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(inner)));
        }
        if let Some((Tok::Plus, _)) = self.peek() {
            self.bump();
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.bump() {
            Some((Tok::Num(v), _)) => Ok(Expr::Const(v)),
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    _ => Err(self.err_here("expected `)`")),
                }
            }
            Some((Tok::Ident(name), offset)) => {
                let func = match name.as_str() {
                    "sin" => Some(UnOp::Sin),
                    "cos" => Some(UnOp::Cos),
                    "exp" => Some(UnOp::Exp),
                    "sqrt" => Some(UnOp::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    match self.bump() {
                        Some((Tok::LParen, _)) => {}
                        _ => return Err(self.err_here("expected `(` after function name")),
                    }
                    let arg = self.expr()?;
                    match self.bump() {
                        Some((Tok::RParen, _)) => {}
                        _ => return Err(self.err_here("expected `)`")),
                    }
                    return Ok(Expr::Unary(f, Box::new(arg)));
                }
                // state variable u<k>, 1-based
                if let Some(rest) = name.strip_prefix('u') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k >= 1 && k <= self.n_state {
                            return Ok(Expr::Var(k - 1));
                        }
                    }
                }
                Err(CoreError::UnknownIdentifier { name, offset })
            }
            Some((tok, offset)) => Err(CoreError::SyntaxError {
                offset,
                msg: format!("unexpected token {tok:?}"),
            }),
            None => Err(self.err_here("unexpected end of input")),
        }
    }
}

/// Parse an expression over states u1..u<n_state>.
pub fn parse_expr(text: &str, n_state: usize) -> Result<Expr> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    while let Some(t) = lexer.next_tok()? {
        toks.push(t);
    }
    let end = text.len();
    let mut p = Parser {
        toks,
        idx: 0,
        end,
        n_state,
    };
    let e = p.expr()?;
    if p.idx != p.toks.len() {
        return Err(p.err_here("trailing input"));
    }
    Ok(e)
}

// ----------------------------------------------------------- printing

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(_) | Expr::Var(_) => 4,
        Expr::Unary(UnOp::Neg, _) => 3,
        Expr::Unary(_, _) => 4,
        Expr::Binary(BinOp::Pow, _, _) => 3,
        Expr::Binary(BinOp::Mul | BinOp::Div, _, _) => 2,
        Expr::Binary(BinOp::Add | BinOp::Sub, _, _) => 1,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
            if precedence(e) < min_prec {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(k) => write!(f, "u{}", k + 1),
            Expr::Unary(UnOp::Neg, inner) => {
                write!(f, "-")?;
                child(f, inner, 4)
            }
            Expr::Unary(op, inner) => {
                let name = match op {
                    UnOp::Sin => "sin",
                    UnOp::Cos => "cos",
                    UnOp::Exp => "exp",
                    UnOp::Sqrt => "sqrt",
                    UnOp::Neg => unreachable!(),
                };
                write!(f, "{name}({inner})")
            }
            Expr::Binary(op, a, b) => {
                // left/right minimum precedences: +-*/ are left-associative,
                // ^ is right-associative (its left child needs the bump).
                let (sym, left_min, right_min) = match op {
                    BinOp::Add => ("+", 1, 2),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 4, 3),
                };
                child(f, a, left_min)?;
                write!(f, " {sym} ")?;
                child(f, b, right_min)
            }
        }
    }
}

// --------------------------------------------------------- evaluation

fn guard_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CoreError::EvalError(format!("non-finite result in {what}")))
    }
}

fn guarded_div(num: f64, den: f64) -> Result<f64> {
    if den.abs() < 1e-12 * (1.0 + num.abs()) {
        return Err(CoreError::EvalError(format!(
            "guarded division: |denominator| = {:.3e}",
            den.abs()
        )));
    }
    guard_finite(num / den, "division")
}

fn guarded_sqrt(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(CoreError::EvalError(format!("sqrt of negative {x}")));
    }
    Ok(x.sqrt())
}

/// Reference tree-walking evaluator.
pub fn eval_tree(e: &Expr, u: &[f64]) -> Result<f64> {
    match e {
        Expr::Const(v) => Ok(*v),
        Expr::Var(k) => u
            .get(*k)
            .copied()
            .ok_or_else(|| CoreError::EvalError(format!("state u{} out of range", k + 1))),
        Expr::Unary(op, inner) => {
            let x = eval_tree(inner, u)?;
            let v = match op {
                UnOp::Neg => -x,
                UnOp::Sin => x.sin(),
                UnOp::Cos => x.cos(),
                UnOp::Exp => x.exp(),
                UnOp::Sqrt => return guarded_sqrt(x),
            };
            guard_finite(v, "unary op")
        }
        Expr::Binary(op, a, b) => {
            let x = eval_tree(a, u)?;
            let y = eval_tree(b, u)?;
            match op {
                BinOp::Add => guard_finite(x + y, "+"),
                BinOp::Sub => guard_finite(x - y, "-"),
                BinOp::Mul => guard_finite(x * y, "*"),
                BinOp::Div => guarded_div(x, y),
                BinOp::Pow => guard_finite(x.powf(y), "^"),
            }
        }
    }
}

/// Flat postfix program; the production evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    PushConst(f64),
    PushVar(usize),
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    pub source: Expr,
    program: Vec<Instr>,
    max_stack: usize,
}

impl CompiledExpr {
    pub fn compile(e: Expr) -> Self {
        fn emit(e: &Expr, out: &mut Vec<Instr>) {
            match e {
                Expr::Const(v) => out.push(Instr::PushConst(*v)),
                Expr::Var(k) => out.push(Instr::PushVar(*k)),
                Expr::Unary(op, inner) => {
                    emit(inner, out);
                    out.push(match op {
                        UnOp::Neg => Instr::Neg,
                        UnOp::Sin => Instr::Sin,
                        UnOp::Cos => Instr::Cos,
                        UnOp::Exp => Instr::Exp,
                        UnOp::Sqrt => Instr::Sqrt,
                    });
                }
                Expr::Binary(op, a, b) => {
                    emit(a, out);
                    emit(b, out);
                    out.push(match op {
                        BinOp::Add => Instr::Add,
                        BinOp::Sub => Instr::Sub,
                        BinOp::Mul => Instr::Mul,
                        BinOp::Div => Instr::Div,
                        BinOp::Pow => Instr::Pow,
                    });
                }
            }
        }
        let mut program = Vec::new();
        emit(&e, &mut program);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for ins in &program {
            match ins {
                Instr::PushConst(_) | Instr::PushVar(_) => {
                    depth += 1;
                    max_stack = max_stack.max(depth);
                }
                Instr::Add | Instr::Sub | Instr::Mul | Instr::Div | Instr::Pow => depth -= 1,
                _ => {}
            }
        }
        Self {
            source: e,
            program,
            max_stack,
        }
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        for ins in &self.program {
            match ins {
                Instr::PushConst(v) => stack.push(*v),
                Instr::PushVar(k) => stack.push(*u.get(*k).ok_or_else(|| {
                    CoreError::EvalError(format!("state u{} out of range", k + 1))
                })?),
                Instr::Neg => {
                    let x = stack.pop().unwrap();
                    stack.push(-x);
                }
                Instr::Sin => {
                    let x = stack.pop().unwrap();
                    stack.push(x.sin());
                }
                Instr::Cos => {
                    let x = stack.pop().unwrap();
                    stack.push(x.cos());
                }
                Instr::Exp => {
                    let x = stack.pop().unwrap();
                    stack.push(guard_finite(x.exp(), "exp")?);
                }
                Instr::Sqrt => {
                    let x = stack.pop().unwrap();
                    stack.push(guarded_sqrt(x)?);
                }
                Instr::Add => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    stack.push(guard_finite(x + y, "+")?);
                }
                Instr::Sub => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    stack.push(guard_finite(x - y, "-")?);
                }
                Instr::Mul => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    stack.push(guard_finite(x * y, "*")?);
                }
                Instr::Div => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    stack.push(guarded_div(x, y)?);
                }
                Instr::Pow => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    stack.push(guard_finite(x.powf(y), "^")?);
                }
            }
        }
        debug_assert_eq!(stack.len(), 1);
        Ok(stack[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let e = parse_expr("1 + u1^2/10", 1).unwrap();
        let c = CompiledExpr::compile(e);
        assert_eq!(c.eval(&[0.0]).unwrap(), 1.0);
        assert!((c.eval(&[2.0]).unwrap() - 1.4).abs() < 1e-15);
    }

    #[test]
    fn sound_speed_style_entry() {
        // c = sqrt(u3 ... ) at the sample state: sqrt(5/3) with u = (1, 1, 1, 1.5)
        let e = parse_expr("sqrt(u1*u2 + u1*u1/u4)", 4).unwrap();
        let c = CompiledExpr::compile(e);
        let val = c.eval(&[1.0, 1.0, 1.0, 1.5]).unwrap();
        assert!((val - (5.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((val - 1.29099).abs() < 1e-4);
    }

    #[test]
    fn guarded_division_errors() {
        let e = parse_expr("1/(u1-u1)", 1).unwrap();
        let c = CompiledExpr::compile(e);
        assert!(matches!(c.eval(&[3.0]), Err(CoreError::EvalError(_))));
    }

    #[test]
    fn syntax_error_carries_offset() {
        match parse_expr("1 + $", 1) {
            Err(CoreError::SyntaxError { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_expr("1 + vq", 1) {
            Err(CoreError::UnknownIdentifier { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        // u out of range counts as unknown
        assert!(matches!(
            parse_expr("u5", 2),
            Err(CoreError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn print_reparse_roundtrip() {
        for src in [
            "1 + u1^2/10",
            "-u1 * (u2 - 3) ^ 2",
            "sin(u1) + cos(u2)*exp(-u1)",
            "2 ^ 3 ^ 2",
            "1 - 2 - 3",
            "1 - (2 - 3)",
            "sqrt(u1*u2 + u1*u1/ 1.5)",
        ] {
            let e = parse_expr(src, 4).unwrap();
            let printed = e.to_string();
            let e2 = parse_expr(&printed, 4).unwrap();
            assert_eq!(e, e2, "round trip failed for `{src}` -> `{printed}`");
        }
    }
}
