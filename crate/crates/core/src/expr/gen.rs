use rand::Rng;

use super::{BinaryOp, Expr, UnaryOp, Var, MAX_DEPTH};

/// Tree-building strategy for [`random_tree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Operator or terminal at every interior position.
    Grow,
    /// Operators everywhere above the leaf level.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("depth limit {0} is outside 1..={MAX_DEPTH}")]
pub struct DepthLimitError(pub usize);

const OPERATOR_KINDS: usize = BinaryOp::ALL.len() + UnaryOp::ALL.len();
const TERMINAL_KINDS: usize = Var::ALL.len() + 1;

/// Builds a random tree no deeper than `depth_limit`.
pub fn random_tree<R: Rng + ?Sized>(
    method: Method,
    depth_limit: usize,
    rng: &mut R,
) -> Result<Expr, DepthLimitError> {
    if !(1..=MAX_DEPTH).contains(&depth_limit) {
        return Err(DepthLimitError(depth_limit));
    }
    Ok(build(method, depth_limit, rng))
}

fn build<R: Rng + ?Sized>(method: Method, remaining: usize, rng: &mut R) -> Expr {
    let leaf = remaining == 1 || (method == Method::Grow && rng.gen_bool(0.5));
    if leaf {
        return random_terminal(rng);
    }
    let k = rng.gen_range(0..OPERATOR_KINDS);
    if k < BinaryOp::ALL.len() {
        let a = build(method, remaining - 1, rng);
        let b = build(method, remaining - 1, rng);
        Expr::binary(BinaryOp::ALL[k], a, b)
    } else {
        let op = UnaryOp::ALL[k - BinaryOp::ALL.len()];
        Expr::unary(op, build(method, remaining - 1, rng))
    }
}

fn random_terminal<R: Rng + ?Sized>(rng: &mut R) -> Expr {
    let k = rng.gen_range(0..TERMINAL_KINDS);
    match Var::ALL.get(k) {
        Some(v) => Expr::Var(*v),
        None => Expr::Const(rng.gen_range(-1.0..1.0)),
    }
}

/// Depth limits cycled through by [`ramped_half_and_half`].
pub const RAMP_DEPTHS: std::ops::RangeInclusive<usize> = 2..=6;

/// `count` trees cycling through depth limits 2..=6; within each depth limit,
/// individuals alternate between grow and full.
pub fn ramped_half_and_half<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<Expr> {
    let depths: Vec<usize> = RAMP_DEPTHS.collect();
    (0..count)
        .map(|i| {
            let depth = depths[i % depths.len()];
            let method = if (i / depths.len()) % 2 == 0 { Method::Grow } else { Method::Full };
            build(method, depth, rng)
        })
        .collect()
}
