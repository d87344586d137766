//! Abstract metric-space and energy interfaces shared by every model problem.

use std::fmt;

use crate::error::{FlowError, Result};

/// A complete metric space with a designated base point.
///
/// Implementations are immutable after construction and may be shared
/// between threads.
pub trait MetricSpace: Send + Sync {
    type Point: Clone + fmt::Debug + Send + Sync;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// Base point used in the coercivity and distance bounds.
    fn base_point(&self) -> Self::Point;

    /// Number of scalar coordinates in the serialized representation of a point.
    fn coordinate_count(&self) -> usize;

    fn coordinates(&self, p: &Self::Point) -> Vec<f64>;

    fn from_coordinates(&self, coords: &[f64]) -> Result<Self::Point>;
}

/// Semi-convexity modulus and coercivity horizon of an energy, normalized so
/// that `lambda <= 0` and `-lambda * tau_star <= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiConvexity {
    lambda: f64,
    tau_star: f64,
}

impl SemiConvexity {
    pub fn new(lambda: f64, tau_star: f64) -> Result<Self> {
        if !(lambda <= 0.0) {
            return Err(FlowError::PreconditionViolated(format!(
                "semi-convexity modulus must be <= 0, got {lambda}"
            )));
        }
        if !(tau_star > 0.0) || -lambda * tau_star > 0.5 {
            return Err(FlowError::PreconditionViolated(format!(
                "coercivity horizon {tau_star} incompatible with modulus {lambda}"
            )));
        }
        Ok(Self { lambda, tau_star })
    }

    /// Largest horizon allowed for a given modulus.
    pub fn maximal(lambda: f64) -> Result<Self> {
        let tau_star = if lambda == 0.0 {
            f64::INFINITY
        } else {
            0.5 / -lambda
        };
        Self::new(lambda, tau_star)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau_star(&self) -> f64 {
        self.tau_star
    }

    pub fn admits(&self, tau: f64) -> bool {
        tau > 0.0 && tau < self.tau_star
    }
}

/// Which variational scheme produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Minimizing movement (implicit Euler).
    MinimizingMovement,
    /// Variational second-order backward differentiation formula.
    Bdf2,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::MinimizingMovement => "mm",
            Scheme::Bdf2 => "bdf2",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "mm" | "euler" => Some(Scheme::MinimizingMovement),
            "bdf2" => Some(Scheme::Bdf2),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Anchors<'a, P> {
    /// `d^2(previous, w) / (2 tau) + E(w)`
    Single { previous: &'a P },
    /// `d^2(previous, w) / tau - d^2(two_back, w) / (4 tau) + E(w)`
    Double { two_back: &'a P, previous: &'a P },
}

/// One penalized minimization problem of either scheme.
#[derive(Debug, Clone, Copy)]
pub struct PenalizedProblem<'a, P> {
    pub tau: f64,
    pub anchors: Anchors<'a, P>,
}

impl<'a, P> PenalizedProblem<'a, P> {
    pub fn minimizing_movement(tau: f64, previous: &'a P) -> Self {
        Self {
            tau,
            anchors: Anchors::Single { previous },
        }
    }

    pub fn bdf2(tau: f64, two_back: &'a P, previous: &'a P) -> Self {
        Self {
            tau,
            anchors: Anchors::Double { two_back, previous },
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.anchors {
            Anchors::Single { .. } => Scheme::MinimizingMovement,
            Anchors::Double { .. } => Scheme::Bdf2,
        }
    }

    pub fn previous(&self) -> &'a P {
        match self.anchors {
            Anchors::Single { previous } | Anchors::Double { previous, .. } => previous,
        }
    }

    /// Convexity modulus of the penalized functional for an energy of modulus `lambda`.
    pub fn convexity_modulus(&self, lambda: f64) -> f64 {
        match self.anchors {
            Anchors::Single { .. } => 1.0 / self.tau + lambda,
            Anchors::Double { .. } => 1.5 / self.tau + lambda,
        }
    }

    /// Evaluates the penalized functional at `w`.
    pub fn value<M>(&self, model: &M, w: &P) -> f64
    where
        M: EnergyModel<Point = P> + ?Sized,
    {
        let tau = self.tau;
        match self.anchors {
            Anchors::Single { previous } => {
                model.distance(previous, w).powi(2) / (2.0 * tau) + model.energy(w)
            }
            Anchors::Double { two_back, previous } => {
                model.distance(previous, w).powi(2) / tau
                    - model.distance(two_back, w).powi(2) / (4.0 * tau)
                    + model.energy(w)
            }
        }
    }
}

/// An energy on a metric space together with a solver for its penalized problems.
pub trait EnergyModel: MetricSpace {
    /// Energy value, `+inf` outside the effective domain.
    fn energy(&self, p: &Self::Point) -> f64;

    fn is_admissible(&self, p: &Self::Point) -> bool;

    fn semi_convexity(&self) -> SemiConvexity;

    /// Minimizes the penalized functional starting from `start`, to
    /// projected-gradient stationarity `tolerance`.
    fn minimize_penalized(
        &self,
        problem: &PenalizedProblem<'_, Self::Point>,
        start: &Self::Point,
        tolerance: f64,
    ) -> Result<Self::Point>;

    /// An explicit state `u^{-1}` for BDF2 runs. `None` selects the implicit
    /// Euler startup.
    fn prescribed_prehistory(&self, _tau: f64, _u0: &Self::Point) -> Option<Self::Point> {
        None
    }
}

/// Deterministic generation of admissible test points.
pub trait WitnessSampler: EnergyModel {
    fn sample_witness(&self, rng: &mut dyn rand::RngCore) -> Self::Point;
}
