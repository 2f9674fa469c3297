//! GP expression trees over the displacement function and terminal sets.
//!
//! A tree evaluates to one scalar per vertex. The interpreter here is the
//! reference semantics: the GLSL emitter in [`crate::codegen`] mirrors it
//! operator for operator, including protected division.

mod gen;
mod ops;
mod sexpr;

use std::fmt;

pub use gen::{random_tree, ramped_half_and_half, Method};
pub use ops::{crossover, crossover_at, crossover_detailed, mutate, CrossoverOutcome};
pub use sexpr::{deserialize, serialize, ParseError};

/// Hard ceiling on tree depth, counted in nodes along the longest path.
pub const MAX_DEPTH: usize = 10;

/// Denominators with magnitude below this make `div` return 1.0.
pub const DIV_EPSILON: f64 = 1e-6;

/// How many extra times crossover/mutation re-draw their points before giving up.
pub const DEPTH_RETRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    Z,
    T,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => protected_div(a, b),
        }
    }
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 3] = [UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
        }
    }

    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Neg => -a,
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
        }
    }
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Z, Var::T];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::T => "t",
        }
    }
}

/// `a / b`, or 1.0 when `|b| < DIV_EPSILON`.
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() < DIV_EPSILON {
        1.0
    } else {
        a / b
    }
}

/// Clamps an intermediate result into the finite range.
///
/// Operands are always finite, so the only non-finite results an operator
/// can produce are overflows to ±inf; those saturate to ±`f64::MAX`.
#[inline]
pub fn saturate(v: f64) -> f64 {
    v.clamp(-f64::MAX, f64::MAX)
}

/// One vertex sample: model-space position plus animation time in seconds.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl EvalPoint {
    pub const fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        EvalPoint { x, y, z, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.t.is_finite()
    }

    pub fn get(&self, var: Var) -> f64 {
        match var {
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
            Var::T => self.t,
        }
    }
}

/// A GP tree node. Constants are ephemeral: fixed when the node is created.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Var(Var),
    Const(f64),
}

impl Expr {
    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Neg, a)
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Sin, a)
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Cos, a)
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    pub fn z() -> Expr {
        Expr::Var(Var::Z)
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    /// Constant terminal. Panics if `v` is outside `[-1, 1)`; use
    /// [`Expr::try_constant`] for untrusted input.
    pub fn constant(v: f64) -> Expr {
        Expr::try_constant(v).unwrap_or_else(|| panic!("constant {v} outside [-1, 1)"))
    }

    pub fn try_constant(v: f64) -> Option<Expr> {
        constant_in_range(v).then_some(Expr::Const(v))
    }

    /// Evaluates the tree at `p`. Total for finite points: protected division
    /// guards zero denominators and overflow saturates at ±`f64::MAX`.
    pub fn evaluate(&self, p: &EvalPoint) -> f64 {
        match self {
            Expr::Binary(op, a, b) => saturate(op.apply(a.evaluate(p), b.evaluate(p))),
            Expr::Unary(op, a) => saturate(op.apply(a.evaluate(p))),
            Expr::Var(v) => p.get(*v),
            Expr::Const(c) => *c,
        }
    }

    /// Longest root-to-leaf path, counted in nodes.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
            Expr::Unary(_, a) => 1 + a.depth(),
            Expr::Var(_) | Expr::Const(_) => 1,
        }
    }

    /// Total node count.
    pub fn size(&self) -> usize {
        match self {
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
            Expr::Unary(_, a) => 1 + a.size(),
            Expr::Var(_) | Expr::Const(_) => 1,
        }
    }

    /// True iff the tree reads the time terminal, i.e. the displacement animates.
    pub fn is_dynamic(&self) -> bool {
        match self {
            Expr::Binary(_, a, b) => a.is_dynamic() || b.is_dynamic(),
            Expr::Unary(_, a) => a.is_dynamic(),
            Expr::Var(v) => *v == Var::T,
            Expr::Const(_) => false,
        }
    }

    pub fn contains_div(&self) -> bool {
        match self {
            Expr::Binary(op, a, b) => *op == BinaryOp::Div || a.contains_div() || b.contains_div(),
            Expr::Unary(_, a) => a.contains_div(),
            Expr::Var(_) | Expr::Const(_) => false,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Expr::Var(_) | Expr::Const(_))
    }

    /// Checks the structural invariants: constant range and depth bound.
    /// Arity is enforced by the type.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let depth = self.depth();
        if depth > MAX_DEPTH {
            return Err(InvariantViolation::TooDeep(depth));
        }
        self.check_constants()
    }

    fn check_constants(&self) -> Result<(), InvariantViolation> {
        match self {
            Expr::Binary(_, a, b) => {
                a.check_constants()?;
                b.check_constants()
            }
            Expr::Unary(_, a) => a.check_constants(),
            Expr::Var(_) => Ok(()),
            Expr::Const(c) if constant_in_range(*c) => Ok(()),
            Expr::Const(c) => Err(InvariantViolation::ConstantOutOfRange(*c)),
        }
    }

    /// Subtree rooted at preorder position `index` (root is 0).
    pub fn node(&self, index: usize) -> Option<&Expr> {
        let mut remaining = index;
        self.node_inner(&mut remaining)
    }

    fn node_inner(&self, remaining: &mut usize) -> Option<&Expr> {
        if *remaining == 0 {
            return Some(self);
        }
        *remaining -= 1;
        match self {
            Expr::Binary(_, a, b) => a.node_inner(remaining).or_else(|| b.node_inner(remaining)),
            Expr::Unary(_, a) => a.node_inner(remaining),
            Expr::Var(_) | Expr::Const(_) => None,
        }
    }

    /// Depth (root = 1) of the node at preorder position `index`.
    pub fn node_level(&self, index: usize) -> Option<usize> {
        let mut remaining = index;
        self.level_inner(&mut remaining, 1)
    }

    fn level_inner(&self, remaining: &mut usize, level: usize) -> Option<usize> {
        if *remaining == 0 {
            return Some(level);
        }
        *remaining -= 1;
        match self {
            Expr::Binary(_, a, b) => a
                .level_inner(remaining, level + 1)
                .or_else(|| b.level_inner(remaining, level + 1)),
            Expr::Unary(_, a) => a.level_inner(remaining, level + 1),
            Expr::Var(_) | Expr::Const(_) => None,
        }
    }

    /// Returns a copy with the subtree at preorder position `index` replaced.
    pub fn replace_node(&self, index: usize, replacement: Expr) -> Option<Expr> {
        let mut remaining = index;
        let mut replacement = Some(replacement);
        let out = self.replace_inner(&mut remaining, &mut replacement);
        replacement.is_none().then_some(out)
    }

    fn replace_inner(&self, remaining: &mut usize, replacement: &mut Option<Expr>) -> Expr {
        if replacement.is_none() {
            return self.clone();
        }
        if *remaining == 0 {
            return replacement.take().expect("checked above");
        }
        *remaining -= 1;
        match self {
            Expr::Binary(op, a, b) => {
                let a = a.replace_inner(remaining, replacement);
                let b = b.replace_inner(remaining, replacement);
                Expr::binary(*op, a, b)
            }
            Expr::Unary(op, a) => Expr::unary(*op, a.replace_inner(remaining, replacement)),
            leaf => leaf.clone(),
        }
    }
}

fn constant_in_range(v: f64) -> bool {
    (-1.0..1.0).contains(&v)
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("tree depth {0} exceeds the maximum of {MAX_DEPTH}")]
    TooDeep(usize),
    #[error("constant {0} is outside [-1, 1)")]
    ConstantOutOfRange(f64),
}

/// Shortest decimal that round-trips to the same `f64`, always with a
/// decimal point. Shared by the s-expression writer and the GLSL emitter.
pub fn format_real(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Human-readable infix with minimal parentheses, e.g. `x / (x + z)`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_infix(self, f, 0)
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Expr::Unary(UnaryOp::Neg, _) => 3,
        _ => 4,
    }
}

fn write_infix(e: &Expr, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
    let own = precedence(e);
    let wrap = own < parent;
    if wrap {
        f.write_str("(")?;
    }
    match e {
        Expr::Binary(op, a, b) => {
            let sym = match op {
                BinaryOp::Add => "+",
                BinaryOp::Sub => "-",
                BinaryOp::Mul => "*",
                BinaryOp::Div => "/",
            };
            // Left-associative: the right operand of equal precedence needs parens.
            write_infix(a, f, own)?;
            write!(f, " {sym} ")?;
            write_infix(b, f, own + 1)?;
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            write_infix(a, f, own + 1)?;
        }
        Expr::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_infix(a, f, 0)?;
            f.write_str(")")?;
        }
        Expr::Var(v) => f.write_str(v.name())?,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => write!(f, "({})", format_real(*c))?,
        Expr::Const(c) => f.write_str(&format_real(*c))?,
    }
    if wrap {
        f.write_str(")")?;
    }
    Ok(())
}

/// Serialized as the canonical s-expression string.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&serialize(self))
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        deserialize(&text).map_err(serde::de::Error::custom)
    }
}
