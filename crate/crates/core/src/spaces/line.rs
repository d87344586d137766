//! The real line with two scalar energies: the quadratic `u^2 / 2` and the
//! convex kink `max(u, 0)`.

use crate::error::{FlowError, Result};
use crate::model::{EnergyModel, MetricSpace, PenalizedProblem, SemiConvexity, WitnessSampler};
use crate::vector::{solve_penalized, VectorAnchors, VectorEnergy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineEnergy {
    /// `E(u) = u^2 / 2`
    Quadratic,
    /// `E(u) = max(u, 0)`
    HalfLine,
}

#[derive(Debug, Clone, Copy)]
pub struct RealLine {
    energy: LineEnergy,
}

impl RealLine {
    pub fn new(energy: LineEnergy) -> Self {
        Self { energy }
    }

    pub fn energy_kind(&self) -> LineEnergy {
        self.energy
    }
}

impl MetricSpace for RealLine {
    type Point = f64;

    fn distance(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    fn base_point(&self) -> f64 {
        0.0
    }

    fn coordinate_count(&self) -> usize {
        1
    }

    fn coordinates(&self, p: &f64) -> Vec<f64> {
        vec![*p]
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<f64> {
        match coords {
            [x] if x.is_finite() => Ok(*x),
            _ => Err(FlowError::InvalidState(format!("expected one finite coordinate, got {coords:?}"))),
        }
    }
}

impl VectorEnergy for RealLine {
    fn weight(&self) -> f64 {
        1.0
    }

    fn piece_count(&self) -> usize {
        match self.energy {
            LineEnergy::Quadratic => 1,
            LineEnergy::HalfLine => 2,
        }
    }

    fn piece_value_and_gradient(&self, piece: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        match (self.energy, piece) {
            (LineEnergy::Quadratic, _) => {
                grad[0] = x[0];
                0.5 * x[0] * x[0]
            }
            // u >= 0: E = u
            (LineEnergy::HalfLine, 0) => {
                grad[0] = 1.0;
                x[0]
            }
            // u <= 0: E = 0
            (LineEnergy::HalfLine, _) => {
                grad[0] = 0.0;
                0.0
            }
        }
    }

    fn project_piece(&self, piece: usize, x: &mut [f64]) {
        match (self.energy, piece) {
            (LineEnergy::Quadratic, _) => {}
            (LineEnergy::HalfLine, 0) => x[0] = x[0].max(0.0),
            (LineEnergy::HalfLine, _) => x[0] = x[0].min(0.0),
        }
    }
}

impl EnergyModel for RealLine {
    fn energy(&self, p: &f64) -> f64 {
        match self.energy {
            LineEnergy::Quadratic => 0.5 * p * p,
            LineEnergy::HalfLine => p.max(0.0),
        }
    }

    fn is_admissible(&self, p: &f64) -> bool {
        p.is_finite()
    }

    fn semi_convexity(&self) -> SemiConvexity {
        SemiConvexity::maximal(0.0).expect("convex energy")
    }

    fn minimize_penalized(
        &self,
        problem: &PenalizedProblem<'_, f64>,
        start: &f64,
        tolerance: f64,
    ) -> Result<f64> {
        let anchors = VectorAnchors::from_problem(problem, std::slice::from_ref);
        let x = solve_penalized(self, &anchors, std::slice::from_ref(start), tolerance, 0.0)?;
        Ok(x[0])
    }

    fn prescribed_prehistory(&self, tau: f64, u0: &f64) -> Option<f64> {
        // the exact solution continued backwards: slope -1 on the positive side
        match self.energy {
            LineEnergy::HalfLine if *u0 > 0.0 => Some(u0 + tau),
            _ => None,
        }
    }
}

impl WitnessSampler for RealLine {
    fn sample_witness(&self, rng: &mut dyn rand::RngCore) -> f64 {
        use rand::Rng;
        rng.gen_range(-2.0..2.0)
    }
}
