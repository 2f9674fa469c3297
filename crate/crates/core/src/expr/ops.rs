use rand::Rng;

use super::gen::{random_tree, Method};
use super::{Expr, DEPTH_RETRIES, MAX_DEPTH};

/// Depth limit of the fresh subtree grafted in by [`mutate`].
pub const MUTATION_SUBTREE_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct CrossoverOutcome {
    pub offspring: (Expr, Expr),
    /// Every attempt broke the depth bound; the offspring are parent copies.
    pub fell_back: bool,
}

/// Swaps the subtree at preorder `i` of `a` with the subtree at preorder `j`
/// of `b`. Returns `None` if either index is out of range. No depth check.
pub fn crossover_at(a: &Expr, b: &Expr, i: usize, j: usize) -> Option<(Expr, Expr)> {
    let sub_a = a.node(i)?.clone();
    let sub_b = b.node(j)?.clone();
    let child_a = a.replace_node(i, sub_b)?;
    let child_b = b.replace_node(j, sub_a)?;
    Some((child_a, child_b))
}

/// Subtree crossover with uniform point selection in each parent.
pub fn crossover<R: Rng + ?Sized>(a: &Expr, b: &Expr, rng: &mut R) -> (Expr, Expr) {
    crossover_detailed(a, b, rng).offspring
}

pub fn crossover_detailed<R: Rng + ?Sized>(a: &Expr, b: &Expr, rng: &mut R) -> CrossoverOutcome {
    let (size_a, size_b) = (a.size(), b.size());
    for _ in 0..=DEPTH_RETRIES {
        let i = rng.gen_range(0..size_a);
        let j = rng.gen_range(0..size_b);
        if fits(a, i, b, j) && fits(b, j, a, i) {
            let offspring = crossover_at(a, b, i, j).expect("indices drawn within size");
            return CrossoverOutcome { offspring, fell_back: false };
        }
    }
    CrossoverOutcome { offspring: (a.clone(), b.clone()), fell_back: true }
}

/// Would grafting `donor`'s node `j` at `host`'s node `i` stay within MAX_DEPTH?
fn fits(host: &Expr, i: usize, donor: &Expr, j: usize) -> bool {
    match (host.node_level(i), donor.node(j)) {
        (Some(level), Some(sub)) => level - 1 + sub.depth() <= MAX_DEPTH,
        _ => false,
    }
}

/// Subtree mutation: a uniformly chosen node is replaced by a fresh grow tree
/// of depth at most 3. Returns an unchanged copy if every attempt would
/// break the depth bound.
pub fn mutate<R: Rng + ?Sized>(e: &Expr, rng: &mut R) -> Expr {
    let size = e.size();
    for _ in 0..=DEPTH_RETRIES {
        let i = rng.gen_range(0..size);
        let fresh = random_tree(Method::Grow, MUTATION_SUBTREE_DEPTH, rng)
            .expect("constant depth limit is valid");
        let level = e.node_level(i).expect("index drawn within size");
        if level - 1 + fresh.depth() <= MAX_DEPTH {
            return e.replace_node(i, fresh).expect("index drawn within size");
        }
    }
    e.clone()
}
