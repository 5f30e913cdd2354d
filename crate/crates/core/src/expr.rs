//! Expression trees for the smooth coefficients of vector fields.
//!
//! The grammar is deliberately small (see [`parse_expr`]); the simplifier
//! does constant folding, 0/1 identities and sum/product flattening only.

use crate::error::{Error, Result};

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

/// A scalar expression over variables `x1..xn`.
///
/// Variable indices are stored zero-based; the surface syntax is one-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Evaluate at a point. Non-finite results are errors: the declared
    /// domain is required to exclude singularities of `log`, `sqrt` and `/`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval_raw(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: x.to_vec() })
        }
    }

    /// Evaluation without the finiteness check (hot path; callers check once).
    pub fn eval_raw(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval_raw(x),
            Expr::Sum(terms) => terms.iter().map(|t| t.eval_raw(x)).sum(),
            Expr::Prod(factors) => factors.iter().map(|f| f.eval_raw(x)).product(),
            Expr::Div(a, b) => a.eval_raw(x) / b.eval_raw(x),
            Expr::Pow(b, k) => b.eval_raw(x).powi(*k),
            Expr::Func(f, e) => f.apply(e.eval_raw(x)),
        }
    }

    /// Symbolic partial derivative with respect to `x{var+1}` (not simplified).
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Neg(e) => Expr::Neg(Box::new(e.diff(var))),
            Expr::Sum(terms) => Expr::Sum(terms.iter().map(|t| t.diff(var)).collect()),
            Expr::Prod(factors) => {
                let mut terms = Vec::with_capacity(factors.len());
                for i in 0..factors.len() {
                    let mut fs: Vec<Expr> = factors.clone();
                    fs[i] = factors[i].diff(var);
                    terms.push(Expr::Prod(fs));
                }
                Expr::Sum(terms)
            }
            Expr::Div(a, b) => {
                let num = Expr::Sum(vec![
                    Expr::Prod(vec![a.diff(var), (**b).clone()]),
                    Expr::Neg(Box::new(Expr::Prod(vec![(**a).clone(), b.diff(var)]))),
                ]);
                Expr::Div(Box::new(num), Box::new(Expr::Pow(b.clone(), 2)))
            }
            Expr::Pow(b, k) => Expr::Prod(vec![
                Expr::Const(*k as f64),
                Expr::Pow(b.clone(), k - 1),
                b.diff(var),
            ]),
            Expr::Func(f, e) => {
                let inner = e.diff(var);
                let outer = match f {
                    Func::Sin => Expr::Func(Func::Cos, e.clone()),
                    Func::Cos => Expr::Neg(Box::new(Expr::Func(Func::Sin, e.clone()))),
                    Func::Exp => Expr::Func(Func::Exp, e.clone()),
                    Func::Log => {
                        return Expr::Div(Box::new(inner), e.clone());
                    }
                    Func::Sqrt => {
                        return Expr::Div(
                            Box::new(inner),
                            Box::new(Expr::Prod(vec![
                                Expr::Const(2.0),
                                Expr::Func(Func::Sqrt, e.clone()),
                            ])),
                        );
                    }
                    Func::Abs => Expr::Div(e.clone(), Box::new(Expr::Func(Func::Abs, e.clone()))),
                };
                Expr::Prod(vec![outer, inner])
            }
        }
    }

    /// Constant folding, 0/1 identities and sum/product flattening.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => match e.simplify() {
                Expr::Const(c) => Expr::Const(-c),
                Expr::Neg(inner) => *inner,
                s => Expr::Neg(Box::new(s)),
            },
            Expr::Sum(terms) => {
                let mut flat = Vec::new();
                let mut acc = 0.0;
                for t in terms {
                    match t.simplify() {
                        Expr::Const(c) => acc += c,
                        Expr::Sum(inner) => {
                            for e in inner {
                                match e {
                                    Expr::Const(c) => acc += c,
                                    other => flat.push(other),
                                }
                            }
                        }
                        other => flat.push(other),
                    }
                }
                if acc != 0.0 || flat.is_empty() {
                    flat.insert(0, Expr::Const(acc));
                }
                if flat.len() == 1 {
                    flat.pop().unwrap()
                } else {
                    Expr::Sum(flat)
                }
            }
            Expr::Prod(factors) => {
                let mut flat = Vec::new();
                let mut acc = 1.0;
                for f in factors {
                    match f.simplify() {
                        Expr::Const(c) => acc *= c,
                        Expr::Prod(inner) => {
                            for e in inner {
                                match e {
                                    Expr::Const(c) => acc *= c,
                                    other => flat.push(other),
                                }
                            }
                        }
                        other => flat.push(other),
                    }
                }
                if acc == 0.0 {
                    return Expr::Const(0.0);
                }
                if flat.is_empty() {
                    return Expr::Const(acc);
                }
                let body = if flat.len() == 1 {
                    flat.pop().unwrap()
                } else {
                    Expr::Prod(flat)
                };
                if acc == 1.0 {
                    body
                } else if acc == -1.0 {
                    Expr::Neg(Box::new(body))
                } else {
                    match body {
                        Expr::Prod(mut fs) => {
                            fs.insert(0, Expr::Const(acc));
                            Expr::Prod(fs)
                        }
                        other => Expr::Prod(vec![Expr::Const(acc), other]),
                    }
                }
            }
            Expr::Div(a, b) => {
                let (sa, sb) = (a.simplify(), b.simplify());
                if sa.is_zero() {
                    return Expr::Const(0.0);
                }
                match (&sa, &sb) {
                    (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
                    (_, Expr::Const(c)) if *c == 1.0 => sa,
                    _ => Expr::Div(Box::new(sa), Box::new(sb)),
                }
            }
            Expr::Pow(b, k) => {
                let sb = b.simplify();
                match (&sb, *k) {
                    (_, 0) => Expr::Const(1.0),
                    (_, 1) => sb,
                    (Expr::Const(c), k) => Expr::Const(c.powi(k)),
                    _ => Expr::Pow(Box::new(sb), *k),
                }
            }
            Expr::Func(f, e) => {
                let se = e.simplify();
                if let Expr::Const(c) = se {
                    let v = f.apply(c);
                    if v.is_finite() {
                        return Expr::Const(v);
                    }
                }
                Expr::Func(*f, Box::new(se))
            }
        }
    }

    /// Largest variable index used, if any (zero-based).
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Func(_, e) => e.max_var(),
            Expr::Sum(v) | Expr::Prod(v) => v.iter().filter_map(|e| e.max_var()).max(),
            Expr::Div(a, b) => a.max_var().max(b.max_var()),
        }
    }
}

// Printing with minimal parentheses; `parse_expr(print(e))` reproduces the
// printed form.
impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn atom(e: &Expr) -> bool {
            matches!(e, Expr::Const(c) if *c >= 0.0)
                || matches!(e, Expr::Var(_) | Expr::Func(_, _))
        }
        match self {
            Expr::Const(c) => write!(f, "{}", c),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => {
                if atom(e) {
                    write!(f, "-{}", e)
                } else {
                    write!(f, "-({})", e)
                }
            }
            Expr::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    match t {
                        Expr::Neg(inner) if atom(inner) => {
                            write!(f, "{}{}", if i == 0 { "-" } else { " - " }, inner)?;
                        }
                        _ => {
                            if i > 0 {
                                write!(f, " + ")?;
                            }
                            match t {
                                Expr::Sum(_) => write!(f, "({})", t)?,
                                _ => write!(f, "{}", t)?,
                            }
                        }
                    }
                }
                Ok(())
            }
            Expr::Prod(factors) => {
                for (i, x) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    match x {
                        Expr::Sum(_) | Expr::Div(_, _) => write!(f, "({})", x)?,
                        Expr::Neg(_) if i > 0 => write!(f, "({})", x)?,
                        _ => write!(f, "{}", x)?,
                    }
                }
                Ok(())
            }
            Expr::Div(a, b) => {
                match &**a {
                    Expr::Sum(_) | Expr::Div(_, _) => write!(f, "({})", a)?,
                    _ => write!(f, "{}", a)?,
                }
                write!(f, "/")?;
                match &**b {
                    Expr::Const(c) if *c >= 0.0 => write!(f, "{}", b),
                    Expr::Var(_) | Expr::Func(_, _) => write!(f, "{}", b),
                    _ => write!(f, "({})", b),
                }
            }
            Expr::Pow(b, k) => {
                match &**b {
                    Expr::Const(c) if *c >= 0.0 => write!(f, "{}", b)?,
                    Expr::Var(_) | Expr::Func(_, _) => write!(f, "{}", b)?,
                    _ => write!(f, "({})", b)?,
                }
                write!(f, "^{}", k)
            }
            Expr::Func(func, e) => write!(f, "{}({})", func.name(), e),
        }
    }
}

/// Parse `text` against the expression grammar for ambient dimension `n`.
///
/// Grammar: `expr := term (('+'|'-') term)*`, `term := factor (('*'|'/') factor)*`,
/// `factor := base ('^' integer)?`, `base := number | 'x' integer |
/// func '(' expr ')' | '(' expr ')' | '-' base`, `func` one of
/// `sin cos exp log sqrt abs`. Whitespace is insignificant.
pub fn parse_expr(text: &str, n: usize) -> Result<Expr> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        dim: n,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            msg: msg.to_string(),
        }
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

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    terms.push(Expr::Neg(Box::new(self.term()?)));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = match acc {
                        Expr::Prod(mut v) => {
                            v.push(f);
                            Expr::Prod(v)
                        }
                        other => Expr::Prod(vec![other, f]),
                    };
                }
                Some(b'/') => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = Expr::Div(Box::new(acc), Box::new(f));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        let b = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.integer()?;
            return Ok(Expr::Pow(Box::new(b), k));
        }
        Ok(b)
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let neg = if self.bytes.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected integer exponent"));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: i32 = s
            .parse()
            .map_err(|_| self.err("integer exponent out of range"))?;
        Ok(if neg { -v } else { v })
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.base()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            _ => Err(self.err("expected number, variable, function or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let ds = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == ds {
                // not an exponent after all (e.g. `2*exp(x1)` never hits this,
                // but `2e` alone should fail cleanly)
                self.pos = mark;
            }
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: f64 = s.parse().map_err(|_| Error::Syntax {
            offset: start,
            msg: format!("invalid number `{}`", s),
        })?;
        Ok(Expr::Const(v))
    }

    fn identifier(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        if name == "x" {
            let ds = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == ds {
                return Err(Error::Syntax {
                    offset: ds,
                    msg: "expected variable index after `x`".to_string(),
                });
            }
            let idx: usize = std::str::from_utf8(&self.bytes[ds..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Syntax {
                    offset: ds,
                    msg: "variable index out of range".to_string(),
                })?;
            if idx == 0 || idx > self.dim {
                return Err(Error::VariableOutOfRange {
                    index: idx,
                    dim: self.dim,
                });
            }
            return Ok(Expr::Var(idx - 1));
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return Err(Error::UnknownIdentifier(name.to_string())),
        };
        if self.peek() != Some(b'(') {
            return Err(self.err("expected `(` after function name"));
        }
        self.pos += 1;
        let e = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(self.err("expected `)`"));
        }
        self.pos += 1;
        Ok(Expr::Func(func, Box::new(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_zero_constant() {
        let e = parse_expr("0", 3).unwrap();
        assert_eq!(e, Expr::Const(0.0));
    }

    #[test]
    fn parse_product_node() {
        let e = parse_expr("2*x2", 3).unwrap();
        assert_eq!(e, Expr::Prod(vec![Expr::Const(2.0), Expr::Var(1)]));
    }

    #[test]
    fn parse_heisenberg_coefficient() {
        // third coefficient of Y = d/dy - 2x d/dt
        let e = parse_expr("-2*x1", 3).unwrap();
        assert_eq!(e.eval(&[0.3, 0.0, 0.0]).unwrap(), -0.6);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_expr("1 + @", 2) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {:?}", other),
        }
        assert!(matches!(
            parse_expr("x5", 3),
            Err(Error::VariableOutOfRange { index: 5, dim: 3 })
        ));
        assert!(matches!(
            parse_expr("tanh(x1)", 1),
            Err(Error::UnknownIdentifier(_))
        ));
    }

    #[test]
    fn eval_matches_arithmetic() {
        let e = parse_expr("2*x1^2 - x2/4 + sin(x1)*cos(x2)", 2).unwrap();
        let (a, b): (f64, f64) = (0.7, -1.3);
        let expect = 2.0 * a * a - b / 4.0 + a.sin() * b.cos();
        assert!((e.eval(&[a, b]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_error() {
        let e = parse_expr("log(x1)", 1).unwrap();
        assert!(e.eval(&[-1.0]).is_err());
        let d = parse_expr("1/x1", 1).unwrap();
        assert!(d.eval(&[0.0]).is_err());
    }

    #[test]
    fn print_parse_round_trip_is_stable() {
        for src in [
            "0",
            "2*x2",
            "-2*x1",
            "x1 + x2*x3 - 4",
            "sin(x1)*exp(x2) - sqrt(x3^2 + 1)",
            "(x1 + x2)/(1 + x3^2)",
            "2*x1^2 - x2/4",
        ] {
            let e = parse_expr(src, 3).unwrap();
            let printed = format!("{}", e);
            let reparsed = parse_expr(&printed, 3).unwrap();
            assert_eq!(format!("{}", reparsed), printed, "src {:?}", src);
            for pt in [[0.3, -0.2, 0.1], [1.0, 2.0, -0.5]] {
                assert!((e.eval(&pt).unwrap() - reparsed.eval(&pt).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn simplify_folds_and_flattens() {
        let e = parse_expr("0*x1 + 1*x2 + 0 + 2*3", 2).unwrap();
        let s = e.simplify();
        assert_eq!(s, Expr::Sum(vec![Expr::Const(6.0), Expr::Var(1)]));
        let z = parse_expr("x1 - x1", 1).unwrap();
        // no cancellation of symbolic terms: only constants fold
        assert!(!z.simplify().is_zero());
        let p = parse_expr("(2*x1)*(3*x2)", 2).unwrap();
        assert_eq!(
            p.simplify(),
            Expr::Prod(vec![Expr::Const(6.0), Expr::Var(0), Expr::Var(1)])
        );
    }

    #[test]
    fn diff_simple_cases() {
        let e = parse_expr("x1^3", 1).unwrap();
        let d = e.diff(0).simplify();
        assert!((d.eval(&[2.0]).unwrap() - 12.0).abs() < 1e-14);
        let f = parse_expr("sin(x1)", 1).unwrap();
        let df = f.diff(0).simplify();
        assert!((df.eval(&[0.4]).unwrap() - 0.4f64.cos()).abs() < 1e-14);
    }
}
