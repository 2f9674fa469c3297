use serde::{Deserialize, Serialize};

use crate::expr::{EvalPoint, Expr};

/// Per-point squared-error ceiling in [`distance`].
pub const SQUARED_ERROR_CAP: f64 = 1e6;

/// Coordinates of the default lattice along x, y and z.
pub const LATTICE_AXIS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
/// Animation times of the default lattice, in seconds.
pub const LATTICE_TIMES: [f64; 3] = [0.0, 1.0, 2.0];

/// Ordered sample points over which two expressions are compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EvalPoint>", into = "Vec<EvalPoint>")]
pub struct SampleLattice(Vec<EvalPoint>);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("sample lattice is empty")]
    Empty,
    #[error("sample point {0} is not finite")]
    NonFinite(usize),
}

impl SampleLattice {
    pub fn new(points: Vec<EvalPoint>) -> Result<Self, LatticeError> {
        if points.is_empty() {
            return Err(LatticeError::Empty);
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(LatticeError::NonFinite(i));
        }
        Ok(SampleLattice(points))
    }

    pub fn points(&self) -> &[EvalPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Evaluates `e` at every lattice point, in lattice order.
    pub fn sample(&self, e: &Expr) -> Vec<f64> {
        self.0.iter().map(|p| e.evaluate(p)).collect()
    }
}

/// x, y, z over {-1, -0.5, 0, 0.5, 1} crossed with t over {0, 1, 2}: 375
/// points, x varying slowest and t fastest.
impl Default for SampleLattice {
    fn default() -> Self {
        let mut points = Vec::with_capacity(375);
        for &x in &LATTICE_AXIS {
            for &y in &LATTICE_AXIS {
                for &z in &LATTICE_AXIS {
                    for &t in &LATTICE_TIMES {
                        points.push(EvalPoint::new(x, y, z, t));
                    }
                }
            }
        }
        SampleLattice(points)
    }
}

impl TryFrom<Vec<EvalPoint>> for SampleLattice {
    type Error = LatticeError;

    fn try_from(points: Vec<EvalPoint>) -> Result<Self, Self::Error> {
        SampleLattice::new(points)
    }
}

impl From<SampleLattice> for Vec<EvalPoint> {
    fn from(lattice: SampleLattice) -> Self {
        lattice.0
    }
}

/// Capped least-squares distance between two expressions over `lattice`.
pub fn distance(a: &Expr, b: &Expr, lattice: &SampleLattice) -> f64 {
    lattice
        .points()
        .iter()
        .map(|p| capped_square(a.evaluate(p) - b.evaluate(p)))
        .sum()
}

/// Same as [`distance`] over pre-sampled value vectors.
pub fn sampled_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(u, v)| capped_square(u - v)).sum()
}

#[inline]
fn capped_square(diff: f64) -> f64 {
    // diff may be ±inf when both sides saturated at opposite extremes.
    (diff * diff).min(SQUARED_ERROR_CAP)
}

/// Fitness in (0, 1] from a distance: 1 / (1 + d).
pub fn fitness_from_distance(d: f64) -> f64 {
    1.0 / (1.0 + d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{random_tree, Method};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_lattice_shape() {
        let l = SampleLattice::default();
        assert_eq!(l.len(), 375);
        assert_eq!(l.points()[0], EvalPoint::new(-1.0, -1.0, -1.0, 0.0));
        assert_eq!(l.points()[1], EvalPoint::new(-1.0, -1.0, -1.0, 1.0));
        assert_eq!(l.points()[374], EvalPoint::new(1.0, 1.0, 1.0, 2.0));
    }

    #[test]
    fn lattice_rejects_empty_and_nonfinite() {
        assert_eq!(SampleLattice::new(vec![]), Err(LatticeError::Empty));
        let bad = vec![EvalPoint::new(0.0, 0.0, 0.0, 0.0), EvalPoint::new(f64::NAN, 0.0, 0.0, 0.0)];
        assert_eq!(SampleLattice::new(bad), Err(LatticeError::NonFinite(1)));
        assert!(serde_json::from_str::<SampleLattice>("[]").is_err());
    }

    #[test]
    fn constant_gap_counts_every_point() {
        let l = SampleLattice::default();
        assert_eq!(distance(&Expr::constant(0.0), &Expr::Const(0.5), &l), 375.0 * 0.25);
        // const(1) is outside the terminal range, but distance is defined for any tree.
        assert_eq!(distance(&Expr::constant(0.0), &Expr::Const(1.0), &l), 375.0);
    }

    #[test]
    fn cap_bounds_each_point() {
        let l = SampleLattice::new(vec![EvalPoint::new(0.0, 0.0, 0.0, 0.0)]).unwrap();
        // pdiv(1, 0) is 1 but pdiv(0.5, 1e-6)-style blowups are capped.
        let big = Expr::div(Expr::Const(0.5), Expr::Const(2e-6));
        assert_eq!(distance(&big, &Expr::constant(0.0), &l), SQUARED_ERROR_CAP);
    }

    #[test]
    fn symmetric_and_zero_on_self() {
        let l = SampleLattice::default();
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_tree(Method::Grow, 6, &mut rng).unwrap();
            let b = random_tree(Method::Full, 4, &mut rng).unwrap();
            let d = distance(&a, &b, &l);
            assert!(d >= 0.0 && d.is_finite());
            assert_eq!(d, distance(&b, &a, &l));
            assert_eq!(distance(&a, &a, &l), 0.0);
            assert_eq!(sampled_distance(&l.sample(&a), &l.sample(&b)), d);
        }
    }
}
