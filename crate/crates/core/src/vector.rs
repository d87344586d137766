//! Penalized problems on spaces represented by plain vectors with a weighted
//! Euclidean distance `d(a, b)^2 = weight * sum((a_i - b_i)^2)`.

use std::cell::RefCell;

use crate::model::{Anchors, PenalizedProblem};
use crate::prox::{self, SolveError, SolveSpec};

/// An energy on a weighted Euclidean space, given as one or more smooth pieces.
///
/// Each piece is a closed convex set (described by its projection) on which
/// the energy agrees with a smooth function. Piecewise-smooth convex energies
/// such as `max(u, 0)` are minimized piece by piece.
pub trait VectorEnergy: Sync {
    /// Weight of the inner product.
    fn weight(&self) -> f64;

    fn piece_count(&self) -> usize {
        1
    }

    /// Smooth energy of `piece` at `x`, writing its gradient with respect to
    /// the weighted inner product. `+inf` outside the smooth domain.
    fn piece_value_and_gradient(&self, piece: usize, x: &[f64], grad: &mut [f64]) -> f64;

    fn project_piece(&self, piece: usize, x: &mut [f64]);
}

/// Anchor states of a penalized problem in vector form.
#[derive(Debug, Clone, Copy)]
pub struct VectorAnchors<'a> {
    pub tau: f64,
    pub previous: &'a [f64],
    /// Present for BDF2 problems.
    pub two_back: Option<&'a [f64]>,
}

impl<'a> VectorAnchors<'a> {
    pub fn from_problem<P>(problem: &PenalizedProblem<'a, P>, view: impl Fn(&'a P) -> &'a [f64]) -> Self {
        match problem.anchors {
            Anchors::Single { previous } => Self {
                tau: problem.tau,
                previous: view(previous),
                two_back: None,
            },
            Anchors::Double { two_back, previous } => Self {
                tau: problem.tau,
                previous: view(previous),
                two_back: Some(view(two_back)),
            },
        }
    }

    fn convexity_modulus(&self, lambda: f64) -> f64 {
        match self.two_back {
            None => 1.0 / self.tau + lambda,
            Some(_) => 1.5 / self.tau + lambda,
        }
    }

    /// Penalty value; writes its gradient with respect to the weighted inner product.
    pub fn penalty(&self, weight: f64, x: &[f64], grad: &mut [f64]) -> f64 {
        let tau = self.tau;
        let v = self.previous;
        match self.two_back {
            None => {
                let mut sq = 0.0;
                for i in 0..x.len() {
                    let d = x[i] - v[i];
                    sq += d * d;
                    grad[i] = d / tau;
                }
                weight * sq / (2.0 * tau)
            }
            Some(u) => {
                let mut sq_prev = 0.0;
                let mut sq_back = 0.0;
                for i in 0..x.len() {
                    let dv = x[i] - v[i];
                    let du = x[i] - u[i];
                    sq_prev += dv * dv;
                    sq_back += du * du;
                    grad[i] = (3.0 * x[i] - 4.0 * v[i] + u[i]) / (2.0 * tau);
                }
                weight * (sq_prev / tau - sq_back / (4.0 * tau))
            }
        }
    }
}

/// Minimizes a penalized problem over each smooth piece and returns the best
/// stationary point.
pub fn solve_penalized<E: VectorEnergy + ?Sized>(
    energy: &E,
    anchors: &VectorAnchors<'_>,
    start: &[f64],
    tolerance: f64,
    lambda: f64,
) -> Result<Vec<f64>, SolveError> {
    let weight = energy.weight();
    let mu = anchors.convexity_modulus(lambda);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_err = None;
    for piece in 0..energy.piece_count() {
        let scratch = RefCell::new(vec![0.0; start.len()]);
        let objective = |x: &[f64], grad: &mut [f64]| {
            let mut scratch = scratch.borrow_mut();
            let e = energy.piece_value_and_gradient(piece, x, &mut scratch);
            if e == f64::INFINITY {
                return e;
            }
            let p = anchors.penalty(weight, x, grad);
            for (g, s) in grad.iter_mut().zip(scratch.iter()) {
                *g += s;
            }
            p + e
        };
        let projection = |x: &mut [f64]| energy.project_piece(piece, x);
        let mut begin = start.to_vec();
        energy.project_piece(piece, &mut begin);
        let spec = SolveSpec::new(&objective, begin)
            .projection(&projection)
            .tolerance(tolerance)
            .weight(weight);
        let spec = if mu > 0.0 { spec.strong_convexity(mu) } else { spec };
        match prox::minimize(&spec) {
            Ok(out) => {
                if best.as_ref().map_or(true, |(v, _)| out.value < *v) {
                    best = Some((out.value, out.point));
                }
            }
            Err(SolveError::NonFiniteObjective) if energy.piece_count() > 1 => {}
            Err(e) => last_err = Some(e),
        }
    }
    match (last_err, best) {
        (Some(e), _) => Err(e),
        (None, Some((_, point))) => Ok(point),
        (None, None) => Err(SolveError::NonFiniteObjective),
    }
}

pub(crate) fn weighted_distance(weight: f64, a: &[f64], b: &[f64]) -> f64 {
    (weight * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
}
