//! System composition function `h` over component responses.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | power
//! power  := atom ('^' integer)?            (limit-state expressions only)
//! atom   := number | ident | 'min(' expr (',' expr)+ ')'
//!         | 'max(' expr (',' expr)+ ')' | '(' expr ')'
//! ```
//!
//! In composition mode identifiers are `g<digits>` (1-based component ids).
//! The same parser reads synthetic limit-state expressions, where identifiers
//! are input names and integer powers are allowed.

use std::fmt;

use crate::error::{Error, Result};

/// Expression tree. `Var` indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => z[*i],
            Expr::Neg(a) => -a.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Pow(a, n) => a.eval(z).powi(*n as i32),
            Expr::Min(args) => args.iter().map(|e| e.eval(z)).fold(f64::INFINITY, f64::min),
            Expr::Max(args) => args.iter().map(|e| e.eval(z)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_var().max(b.max_var()),
            Expr::Min(args) | Expr::Max(args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => 1 + a.size() + b.size(),
            Expr::Min(args) | Expr::Max(args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }

    fn collect_vars(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(i) => {
                if !out.contains(i) {
                    out.push(*i)
                }
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out)
            }
            Expr::Min(args) | Expr::Max(args) => args.iter().for_each(|e| e.collect_vars(out)),
        }
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, name: &dyn Fn(usize) -> String) -> fmt::Result {
        let wrap = |e: &Expr, f: &mut fmt::Formatter<'_>, parens: bool| -> fmt::Result {
            if parens {
                write!(f, "(")?;
                e.fmt_with(f, name)?;
                write!(f, ")")
            } else {
                e.fmt_with(f, name)
            }
        };
        let additive = |e: &Expr| matches!(e, Expr::Add(..) | Expr::Sub(..));
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "{}", name(*i)),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(a, f, matches!(**a, Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..)))
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let op = if matches!(self, Expr::Add(..)) { " + " } else { " - " };
                wrap(a, f, false)?;
                write!(f, "{op}")?;
                wrap(b, f, additive(b))
            }
            Expr::Mul(a, b) => {
                wrap(a, f, additive(a))?;
                write!(f, " * ")?;
                wrap(b, f, additive(b) || matches!(**b, Expr::Mul(..)))
            }
            Expr::Pow(a, n) => {
                wrap(a, f, !matches!(**a, Expr::Num(_) | Expr::Var(_) | Expr::Min(_) | Expr::Max(_)))?;
                write!(f, "^{n}")
            }
            Expr::Min(args) | Expr::Max(args) => {
                write!(f, "{}(", if matches!(self, Expr::Min(_)) { "min" } else { "max" })?;
                for (k, e) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    e.fmt_with(f, name)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A parsed composition function over component responses `g1 … gm`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionExpr {
    root: Expr,
    n_components: usize,
}

impl CompositionExpr {
    /// Checks the expression against a system of `m` components.
    pub fn bind(self, m: usize) -> Result<Self> {
        if self.n_components > m {
            return Err(Error::argument(format!(
                "composition references g{} but the system has {m} components",
                self.n_components
            )));
        }
        Ok(Self { root: self.root, n_components: m })
    }

    /// Number of components (the highest referenced id, or the bound `m`).
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Evaluates `h(z)`; `z` holds one response per component.
    #[inline]
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.root.eval(z)
    }

    /// Component indices (0-based) the expression actually reads.
    pub fn referenced_components(&self) -> Vec<usize> {
        let mut v = Vec::new();
        self.root.collect_vars(&mut v);
        v.sort_unstable();
        v
    }
}

impl fmt::Display for CompositionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_with(f, &|i| format!("g{}", i + 1))
    }
}

/// Parses a composition function such as `min(g1, g2, max(g3, g4))`.
pub fn parse_composition(text: &str) -> Result<CompositionExpr> {
    let root = Parser::new(text, Mode::Composition).parse()?;
    let n_components = root.max_var().map_or(0, |i| i + 1);
    Ok(CompositionExpr { root, n_components })
}

/// A synthetic limit state written over named inputs, e.g. `3 - x1 + 0.1*(x1 - x2)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitStateExpr {
    root: Expr,
    names: Vec<String>,
}

impl LimitStateExpr {
    /// `x` is ordered like the names given to [`parse_limit_state`].
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl fmt::Display for LimitStateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_with(f, &|i| self.names[i].clone())
    }
}

/// Parses a limit-state expression whose identifiers are drawn from `names`.
pub fn parse_limit_state(text: &str, names: &[String]) -> Result<LimitStateExpr> {
    let root = Parser::new(text, Mode::LimitState(names)).parse()?;
    Ok(LimitStateExpr { root, names: names.to_vec() })
}

#[derive(Clone, Copy)]
enum Mode<'a> {
    Composition,
    LimitState(&'a [String]),
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    mode: Mode<'a>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, mode: Mode<'a>) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0, mode }
    }

    fn parse(mut self) -> Result<Expr> {
        self.skip_ws();
        if self.pos == self.bytes.len() {
            return Err(self.error("empty expression"));
        }
        let e = self.expr()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.error(format!("unexpected `{}`", self.bytes[self.pos] as char)));
        }
        Ok(e)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            if matches!(self.mode, Mode::Composition) {
                return Err(self.error("powers are not allowed in composition functions"));
            }
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let n: u32 = self.src[start..self.pos].parse().map_err(|_| {
                self.pos = start;
                self.error("expected a non-negative integer exponent")
            })?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident_or_call(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Expr::Num).map_err(|_| {
            self.pos = start;
            self.error(format!("malformed number `{text}`"))
        })
    }

    fn ident_or_call(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if (name == "min" || name == "max") && self.peek() == Some(b'(') {
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                args.push(self.expr()?);
            }
            self.expect(b')')?;
            if args.len() < 2 {
                return Err(self.error(format!("{name} needs at least two arguments")));
            }
            return Ok(if name == "min" { Expr::Min(args) } else { Expr::Max(args) });
        }
        match self.mode {
            Mode::Composition => {
                let id = name
                    .strip_prefix('g')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&j| j >= 1);
                match id {
                    Some(j) => Ok(Expr::Var(j - 1)),
                    None => Err(Error::UnknownIdentifier(name.to_string())),
                }
            }
            Mode::LimitState(names) => names
                .iter()
                .position(|n| n == name)
                .map(Expr::Var)
                .ok_or_else(|| Error::UnknownIdentifier(name.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn series_system() {
        let h = parse_composition("min(g1,g2,g3,g4)").unwrap();
        assert_eq!(h.root(), &Expr::Min((0..4).map(Expr::Var).collect()));
        assert_eq!(h.n_components(), 4);
        let s = 7.0 / 2f64.sqrt();
        assert_eq!(h.eval(&[3.0, 3.0, s, s]), 3.0);
        assert_eq!(h.eval(&[3.0, 4.9497, 4.9497, 4.9497]), 3.0);
    }

    #[test]
    fn nested_tree() {
        let h = parse_composition("max(min(g1,g2),g3)").unwrap();
        assert_eq!(
            h.root(),
            &Expr::Max(vec![Expr::Min(vec![Expr::Var(0), Expr::Var(1)]), Expr::Var(2)])
        );
        assert_eq!(h.eval(&[1.0, 2.0, -5.0]), 1.0);
    }

    #[test]
    fn syntax_error_offset() {
        match parse_composition("min(g1,)") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_composition(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_composition("min(g1)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_composition("g1 g2"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse_composition("g1^2"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_composition("g1 / g2"), Err(Error::Syntax { offset: 3, .. })));
    }

    #[test]
    fn unknown_and_out_of_range() {
        assert!(matches!(parse_composition("min(g1, x)"), Err(Error::UnknownIdentifier(s)) if s == "x"));
        assert!(matches!(parse_composition("g0"), Err(Error::UnknownIdentifier(_))));
        let h = parse_composition("g1 + g5").unwrap();
        assert!(h.clone().bind(4).is_err());
        assert_eq!(h.bind(5).unwrap().n_components(), 5);
    }

    #[test]
    fn cancellation_and_arithmetic() {
        let h = parse_composition("g1 - g2").unwrap();
        assert_eq!(h.eval(&[0.3, 0.3]), 0.0);
        let h = parse_composition("2 * (g1 + 1.5e1) - -g2").unwrap();
        assert_eq!(h.eval(&[1.0, 2.0]), 34.0);
    }

    #[test]
    fn limit_state_expression() {
        let names = vec!["x1".to_string(), "x2".to_string()];
        let g = parse_limit_state("3 + 0.1*(x1 - x2)^2 - 0.7071067811865476*(x1 + x2)", &names).unwrap();
        assert!((g.eval(&[0.0, 0.0]) - 3.0).abs() < 1e-15);
        assert!((g.eval(&[1.0, -1.0]) - 3.4).abs() < 1e-12);
        assert!(parse_limit_state("y + 1", &names).is_err());
        let back = parse_limit_state(&g.to_string(), &names).unwrap();
        assert_eq!(back, g);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            (0usize..5).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Min),
                prop::collection::vec(inner, 2..4).prop_map(Expr::Max),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(root in arb_expr()) {
            let n_components = root.max_var().map_or(0, |i| i + 1);
            let h = CompositionExpr { root, n_components };
            let back = parse_composition(&h.to_string()).unwrap();
            prop_assert_eq!(back, h);
        }

        #[test]
        fn min_is_monotone(z in prop::collection::vec(-10.0f64..10.0, 3), j in 0usize..3, d in 0.0f64..5.0) {
            let h = parse_composition("min(g1, max(g2, g3), g3)").unwrap();
            let mut up = z.clone();
            up[j] += d;
            prop_assert!(h.eval(&up) >= h.eval(&z));
        }
    }
}
