//! Closed-form scalar functions of one variable `t`.
//!
//! Metric coefficients and the reparametrization `γ` are supplied as text in
//! a small grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | 't' | 'pi' | 'e' | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Power binds tighter than unary minus, so `-t^2` is `-(t^2)` and `2^-1`
//! is `0.5`. Every expression carries an exact symbolic first derivative.
//!
//! ```
//! use warpembed::expr::FnExpr;
//!
//! let f: FnExpr = "exp(2*t)".parse().unwrap();
//! assert_eq!(f.deriv().eval(0.0).unwrap(), 2.0);
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while parsing or evaluating an [`FnExpr`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdent { name: String, pos: usize },
    #[error("domain error in `{subexpr}` at t={t}: {reason}")]
    Domain {
        subexpr: String,
        t: f64,
        reason: &'static str,
    },
}

/// Elementary functions accepted by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 10] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// An immutable expression tree in the variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnExpr {
    root: Node,
}

impl FnExpr {
    pub fn parse(source: &str) -> Result<FnExpr, ExprError> {
        let mut p = Parser::new(source);
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.syntax("unexpected trailing input"));
        }
        Ok(FnExpr { root })
    }

    /// The constant function.
    pub fn constant(value: f64) -> FnExpr {
        FnExpr {
            root: Node::Const(value),
        }
    }

    /// The identity `t ↦ t`.
    pub fn var() -> FnExpr {
        FnExpr { root: Node::Var }
    }

    pub fn eval(&self, t: f64) -> Result<f64, ExprError> {
        eval_node(&self.root, t)
    }

    /// Exact symbolic first derivative with respect to `t`.
    pub fn deriv(&self) -> FnExpr {
        FnExpr {
            root: deriv_node(&self.root),
        }
    }

    /// True when the tree does not reference `t`.
    pub fn is_constant(&self) -> bool {
        !mentions_var(&self.root)
    }
}

impl FromStr for FnExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FnExpr::parse(s)
    }
}

impl fmt::Display for FnExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn mentions_var(node: &Node) -> bool {
    match node {
        Node::Const(_) => false,
        Node::Var => true,
        Node::Neg(a) | Node::Call(_, a) => mentions_var(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            mentions_var(a) || mentions_var(b)
        }
    }
}

// ---------------------------------------------------------------------------
// Printing. Fully parenthesized so that re-parsing never depends on precedence.

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Const(c) => {
            if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                write!(f, "(-{:?})", -c)
            } else {
                write!(f, "{:?}", c)
            }
        }
        Node::Var => f.write_str("t"),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(a, f)?;
            f.write_str(")")
        }
        Node::Add(a, b) => write_bin(a, "+", b, f),
        Node::Sub(a, b) => write_bin(a, "-", b, f),
        Node::Mul(a, b) => write_bin(a, "*", b, f),
        Node::Div(a, b) => write_bin(a, "/", b, f),
        Node::Pow(a, b) => write_bin(a, "^", b, f),
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, f)?;
            f.write_str(")")
        }
    }
}

fn write_bin(a: &Node, op: &str, b: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str("(")?;
    write_node(a, f)?;
    write!(f, " {} ", op)?;
    write_node(b, f)?;
    f.write_str(")")
}

fn show(node: &Node) -> String {
    FnExpr { root: node.clone() }.to_string()
}

// ---------------------------------------------------------------------------
// Evaluation

fn domain(node: &Node, t: f64, reason: &'static str) -> ExprError {
    ExprError::Domain {
        subexpr: show(node),
        t,
        reason,
    }
}

fn eval_node(node: &Node, t: f64) -> Result<f64, ExprError> {
    let v = match node {
        Node::Const(c) => *c,
        Node::Var => t,
        Node::Neg(a) => -eval_node(a, t)?,
        Node::Add(a, b) => eval_node(a, t)? + eval_node(b, t)?,
        Node::Sub(a, b) => eval_node(a, t)? - eval_node(b, t)?,
        Node::Mul(a, b) => eval_node(a, t)? * eval_node(b, t)?,
        Node::Div(a, b) => {
            let num = eval_node(a, t)?;
            let den = eval_node(b, t)?;
            if den == 0.0 {
                return Err(domain(node, t, "division by zero"));
            }
            num / den
        }
        Node::Pow(a, b) => {
            let base = eval_node(a, t)?;
            let exp = eval_node(b, t)?;
            if base < 0.0 && exp.fract() != 0.0 {
                return Err(domain(node, t, "negative base with non-integer exponent"));
            }
            if base == 0.0 && exp < 0.0 {
                return Err(domain(node, t, "zero raised to a negative power"));
            }
            if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
                base.powi(exp as i32)
            } else {
                base.powf(exp)
            }
        }
        Node::Call(func, a) => {
            let x = eval_node(a, t)?;
            match func {
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain(node, t, "log of a nonpositive value"));
                    }
                    x.ln()
                }
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    let c = x.cos();
                    if c == 0.0 {
                        return Err(domain(node, t, "tan at a pole"));
                    }
                    x.tan()
                }
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(node, t, "sqrt of a negative value"));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
    };
    if v.is_nan() {
        return Err(domain(node, t, "result is not a number"));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Differentiation. Smart constructors fold the obvious zeros and ones so the
// derivative trees stay small.

fn c(v: f64) -> Node {
    Node::Const(v)
}

fn is_const(n: &Node, v: f64) -> bool {
    matches!(n, Node::Const(x) if *x == v)
}

fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => c(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => c(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => c(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => c(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    if is_const(&a, 0.0) {
        return c(0.0);
    }
    if is_const(&b, 1.0) {
        return a;
    }
    Node::Div(Box::new(a), Box::new(b))
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(x) => c(-x),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn pow(a: Node, b: Node) -> Node {
    if is_const(&b, 1.0) {
        return a;
    }
    if is_const(&b, 0.0) {
        return c(1.0);
    }
    Node::Pow(Box::new(a), Box::new(b))
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

fn deriv_node(node: &Node) -> Node {
    match node {
        Node::Const(_) => c(0.0),
        Node::Var => c(1.0),
        Node::Neg(a) => neg(deriv_node(a)),
        Node::Add(a, b) => add(deriv_node(a), deriv_node(b)),
        Node::Sub(a, b) => sub(deriv_node(a), deriv_node(b)),
        Node::Mul(a, b) => add(
            mul(deriv_node(a), (**b).clone()),
            mul((**a).clone(), deriv_node(b)),
        ),
        Node::Div(a, b) => {
            // (a'b - ab') / b^2
            let num = sub(
                mul(deriv_node(a), (**b).clone()),
                mul((**a).clone(), deriv_node(b)),
            );
            div(num, pow((**b).clone(), c(2.0)))
        }
        Node::Pow(a, b) => {
            let da = deriv_node(a);
            if !mentions_var(b) {
                // b * a^(b-1) * a'
                let lowered = match **b {
                    Node::Const(e) => c(e - 1.0),
                    _ => sub((**b).clone(), c(1.0)),
                };
                mul(mul((**b).clone(), pow((**a).clone(), lowered)), da)
            } else {
                // a^b * (b' ln a + b a'/a)
                let db = deriv_node(b);
                let inner = add(
                    mul(db, call(Func::Log, (**a).clone())),
                    div(mul((**b).clone(), da), (**a).clone()),
                );
                mul(node.clone(), inner)
            }
        }
        Node::Call(func, a) => {
            let da = deriv_node(a);
            let x = (**a).clone();
            let outer = match func {
                Func::Exp => node.clone(),
                Func::Log => div(c(1.0), x),
                Func::Sin => call(Func::Cos, x),
                Func::Cos => neg(call(Func::Sin, x)),
                Func::Tan => div(c(1.0), pow(call(Func::Cos, x), c(2.0))),
                Func::Sinh => call(Func::Cosh, x),
                Func::Cosh => call(Func::Sinh, x),
                Func::Tanh => sub(c(1.0), pow(node.clone(), c(2.0))),
                Func::Sqrt => div(c(0.5), node.clone()),
                // sign(x) written as x/abs(x); undefined at 0 like abs' itself
                Func::Abs => div(x.clone(), call(Func::Abs, x)),
            };
            mul(outer, da)
        }
    }
}

// ---------------------------------------------------------------------------
// Recursive-descent parser

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn syntax(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
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

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let exp = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(inner)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() || ch == b'_' => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        // exponent only when a digit follows, so `2e` is not swallowed
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mut look = self.pos + 1;
            if look < self.src.len() && matches!(self.src[look], b'+' | b'-') {
                look += 1;
            }
            if look < self.src.len() && self.src[look].is_ascii_digit() {
                self.pos = look;
                digits(self);
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Node::Const(v)),
            _ => Err(ExprError::Syntax {
                pos: start,
                msg: format!("malformed number `{}`", text),
            }),
        }
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "t" => return Ok(Node::Var),
            "pi" => return Ok(Node::Const(std::f64::consts::PI)),
            "e" => return Ok(Node::Const(std::f64::consts::E)),
            _ => {}
        }
        let Some(func) = Func::from_name(name) else {
            return Err(ExprError::UnknownIdent {
                name: name.to_string(),
                pos: start,
            });
        };
        if !self.eat(b'(') {
            return Err(self.syntax("expected `(` after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.syntax("expected `)`"));
        }
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, t: f64) -> f64 {
        FnExpr::parse(s).unwrap().eval(t).unwrap()
    }

    fn dev(s: &str, t: f64) -> f64 {
        FnExpr::parse(s).unwrap().deriv().eval(t).unwrap()
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("2*t+1", 3.0), 7.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("1-2-3", 0.0), -4.0);
        assert_eq!(ev("1.5e2 + .5", 0.0), 150.5);
        assert!((ev("pi", 0.0) - std::f64::consts::PI).abs() < 1e-15);
        assert!((ev("2*e", 0.0) - 2.0 * std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(ev("exp(t)", 0.0), 1.0);
        assert!((ev("cosh(t)^2 - sinh(t)^2", 1.7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(dev("exp(2*t)", 0.0), 2.0);
        assert_eq!(dev("t^3", 2.0), 12.0);
        assert_eq!(dev("exp(t)*sin(t)", 0.0), 1.0);
        assert_eq!(dev("tanh(t)", 0.0), 1.0);
        assert!((dev("t^t", 2.0) - 4.0 * (2f64.ln() + 1.0)).abs() < 1e-12);
        assert_eq!(dev("abs(t)", -3.0), -1.0);
    }

    #[test]
    fn unbalanced_parenthesis_reports_position() {
        let err = FnExpr::parse("sin(").unwrap_err();
        assert!(matches!(err, ExprError::Syntax { pos: 4, .. }), "{err:?}");
        assert!(matches!(
            FnExpr::parse("(t+1"),
            Err(ExprError::Syntax { pos: 4, .. })
        ));
    }

    #[test]
    fn unknown_identifier() {
        let err = FnExpr::parse("2*foo(t)").unwrap_err();
        assert_eq!(
            err,
            ExprError::UnknownIdent {
                name: "foo".into(),
                pos: 2
            }
        );
        assert!(matches!(
            FnExpr::parse("x+1"),
            Err(ExprError::UnknownIdent { .. })
        ));
    }

    #[test]
    fn trailing_garbage_and_implicit_products_rejected() {
        assert!(FnExpr::parse("2 t").is_err());
        assert!(FnExpr::parse("2e").is_err());
        assert!(FnExpr::parse("sin t").is_err());
        assert!(FnExpr::parse("").is_err());
    }

    #[test]
    fn domain_errors() {
        let f = FnExpr::parse("1/t").unwrap();
        let err = f.eval(0.0).unwrap_err();
        match err {
            ExprError::Domain { subexpr, .. } => assert_eq!(subexpr, "(1.0 / t)"),
            other => panic!("{other:?}"),
        }
        assert!(FnExpr::parse("log(t)").unwrap().eval(-1.0).is_err());
        assert!(FnExpr::parse("sqrt(t)").unwrap().eval(-1.0).is_err());
        assert!(FnExpr::parse("t^0.5").unwrap().eval(-1.0).is_err());
        // abs' is undefined at 0
        assert!(FnExpr::parse("abs(t)").unwrap().deriv().eval(0.0).is_err());
        assert_eq!(FnExpr::parse("abs(t)").unwrap().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn printing_round_trips() {
        for s in ["-t^2", "2^-1*t", "exp(-1.5e-3*t)/(1+t^2)", "(-2)*t", "abs(t-3)"] {
            let f = FnExpr::parse(s).unwrap();
            let g = FnExpr::parse(&f.to_string()).unwrap();
            for t in [0.3, 1.7, 2.9] {
                assert_eq!(f.eval(t).unwrap(), g.eval(t).unwrap(), "{s}");
            }
        }
    }

    #[test]
    fn constant_detection() {
        assert!(FnExpr::parse("2*pi").unwrap().is_constant());
        assert!(!FnExpr::parse("t*0").unwrap().is_constant());
    }
}
