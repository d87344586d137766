//! Obstacle-constrained reaction-diffusion flow on L^2(0, 1).
//!
//! Energy `1/2 int u_x^2 - 15 int u^4` restricted to `|u| <= 1`, discretized on
//! `K` interior nodes `x_i = i h`, `h = 1 / (K + 1)`, with homogeneous Neumann
//! differences at the boundary. The L^2 distance uses uniform weights `h`.

use std::f64::consts::PI;

use crate::error::{FlowError, Result};
use crate::model::{Anchors, EnergyModel, MetricSpace, PenalizedProblem, SemiConvexity, WitnessSampler};
use crate::prox::project_box_in_place;
use crate::vector::{solve_penalized, weighted_distance, VectorAnchors, VectorEnergy};

/// Lower bound of the second variation: `D^2 E >= -180 |phi|^2`.
pub const RD_LAMBDA: f64 = -180.0;
/// Modulus quoted alongside the second-variation bound; kept for reference only.
pub const RD_LAMBDA_QUOTED: f64 = -90.0;

/// Values at the interior nodes of a uniform grid on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(FlowError::InvalidState("grid needs at least two interior nodes".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        spacing(self.values.len())
    }

    pub fn is_feasible(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= 1.0)
    }
}

pub fn spacing(k: usize) -> f64 {
    1.0 / (k as f64 + 1.0)
}

/// Node coordinates `x_i = i h` for `i = 1..=K`.
pub fn nodes(k: usize) -> impl Iterator<Item = f64> {
    let h = spacing(k);
    (1..=k).map(move |i| i as f64 * h)
}

pub fn l2_distance(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FlowError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(weighted_distance(a.spacing(), &a.values, &b.values))
}

/// Both sides of the identity
/// `|g_s - v|^2 - |g_s - u|^2 / 4 = (1 - s) P(g_0) + s P(g_1) - (3/4) s (1 - s) |g_0 - g_1|^2`
/// for `P(g) = |g - v|^2 - |g - u|^2 / 4` along the segment `g_s = (1 - s) g_0 + s g_1`.
pub fn segment_identity_sides(
    g0: &GridFunction,
    g1: &GridFunction,
    u: &GridFunction,
    v: &GridFunction,
    s: f64,
) -> Result<(f64, f64)> {
    for other in [g1, u, v] {
        if other.len() != g0.len() {
            return Err(FlowError::DimensionMismatch {
                left: g0.len(),
                right: other.len(),
            });
        }
    }
    let h = g0.spacing();
    let sq = |a: &[f64], b: &[f64]| weighted_distance(h, a, b).powi(2);
    let gs: Vec<f64> = g0.values.iter().zip(&g1.values).map(|(a, b)| (1.0 - s) * a + s * b).collect();
    let penalty = |g: &[f64]| sq(g, &v.values) - 0.25 * sq(g, &u.values);
    let lhs = penalty(&gs);
    let rhs = (1.0 - s) * penalty(&g0.values) + s * penalty(&g1.values) - 0.75 * s * (1.0 - s) * sq(&g0.values, &g1.values);
    Ok((lhs, rhs))
}

fn energy_values(u: &[f64]) -> f64 {
    if u.iter().any(|v| v.abs() > 1.0) {
        return f64::INFINITY;
    }
    let h = spacing(u.len());
    let dirichlet: f64 = u.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>() / h;
    let quartic: f64 = u.iter().map(|v| v.powi(4)).sum::<f64>() * h;
    0.5 * dirichlet - 15.0 * quartic
}

fn gradient_values(u: &[f64], out: &mut [f64]) {
    let k = u.len();
    let inv_h2 = 1.0 / (spacing(k) * spacing(k));
    for i in 0..k {
        let left = if i == 0 { u[0] } else { u[i - 1] };
        let right = if i + 1 == k { u[k - 1] } else { u[i + 1] };
        out[i] = -(left - 2.0 * u[i] + right) * inv_h2 - 60.0 * u[i].powi(3);
    }
}

/// Discrete energy; `+inf` if the obstacle `|u| <= 1` is violated.
pub fn rd_energy(u: &GridFunction) -> f64 {
    energy_values(&u.values)
}

/// L^2 gradient `-Delta_h u - 60 u^3`.
pub fn rd_grad(u: &GridFunction) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    gradient_values(&u.values, &mut out);
    out
}

/// Samples `sin(2 pi x) / 2 + 1/4` at the interior nodes.
pub fn rd_initial(k: usize) -> Result<GridFunction> {
    GridFunction::new(nodes(k).map(|x| 0.5 * (2.0 * PI * x).sin() + 0.25).collect())
}

/// The reaction-diffusion model on `K` interior nodes.
#[derive(Debug, Clone)]
pub struct ReactionDiffusion {
    k: usize,
    semi_convexity: SemiConvexity,
}

impl ReactionDiffusion {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(FlowError::PreconditionViolated(format!("grid size {k} < 2")));
        }
        Ok(Self {
            k,
            semi_convexity: SemiConvexity::maximal(RD_LAMBDA)?,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.k
    }

    pub fn initial(&self) -> GridFunction {
        rd_initial(self.k).expect("k >= 2")
    }

    /// L^2 gradient of the penalized functional at `w`.
    pub fn penalized_gradient(&self, problem: &PenalizedProblem<'_, GridFunction>, w: &GridFunction) -> Vec<f64> {
        let anchors = VectorAnchors::from_problem(problem, |g: &GridFunction| g.values());
        let mut penalty = vec![0.0; self.k];
        anchors.penalty(self.weight(), &w.values, &mut penalty);
        let grad = rd_grad(w);
        penalty.iter().zip(grad).map(|(p, g)| p + g).collect()
    }

    /// Largest violation of the first-order conditions at `w`: the L^2 norm
    /// of the penalized gradient on inactive nodes, and the largest
    /// outward-pointing component on nodes touching the obstacle.
    pub fn stationarity_violation(&self, problem: &PenalizedProblem<'_, GridFunction>, w: &GridFunction) -> (f64, f64) {
        let g = self.penalized_gradient(problem, w);
        let h = spacing(self.k);
        let mut inactive = 0.0;
        let mut outward: f64 = 0.0;
        for (x, gi) in w.values.iter().zip(&g) {
            if *x >= 1.0 {
                outward = outward.max(*gi);
            } else if *x <= -1.0 {
                outward = outward.max(-gi);
            } else {
                inactive += h * gi * gi;
            }
        }
        (inactive.sqrt(), outward)
    }
}

impl MetricSpace for ReactionDiffusion {
    type Point = GridFunction;

    fn distance(&self, a: &GridFunction, b: &GridFunction) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        weighted_distance(spacing(self.k), &a.values, &b.values)
    }

    fn base_point(&self) -> GridFunction {
        GridFunction {
            values: vec![0.0; self.k],
        }
    }

    fn coordinate_count(&self) -> usize {
        self.k
    }

    fn coordinates(&self, p: &GridFunction) -> Vec<f64> {
        p.values.clone()
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<GridFunction> {
        if coords.len() != self.k {
            return Err(FlowError::DimensionMismatch {
                left: coords.len(),
                right: self.k,
            });
        }
        GridFunction::new(coords.to_vec())
    }
}

impl VectorEnergy for ReactionDiffusion {
    fn weight(&self) -> f64 {
        spacing(self.k)
    }

    fn piece_value_and_gradient(&self, _piece: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let e = energy_values(x);
        if e.is_finite() {
            gradient_values(x, grad);
        }
        e
    }

    fn project_piece(&self, _piece: usize, x: &mut [f64]) {
        project_box_in_place(x, -1.0, 1.0);
    }
}

impl EnergyModel for ReactionDiffusion {
    fn energy(&self, p: &GridFunction) -> f64 {
        rd_energy(p)
    }

    fn is_admissible(&self, p: &GridFunction) -> bool {
        p.len() == self.k && p.is_feasible()
    }

    fn semi_convexity(&self) -> SemiConvexity {
        self.semi_convexity
    }

    fn minimize_penalized(
        &self,
        problem: &PenalizedProblem<'_, GridFunction>,
        start: &GridFunction,
        tolerance: f64,
    ) -> Result<GridFunction> {
        if let Anchors::Double { two_back, .. } = problem.anchors {
            if two_back.len() != self.k {
                return Err(FlowError::DimensionMismatch {
                    left: two_back.len(),
                    right: self.k,
                });
            }
        }
        let anchors = VectorAnchors::from_problem(problem, |g: &GridFunction| g.values());
        let x = solve_penalized(self, &anchors, &start.values, tolerance, self.semi_convexity.lambda())?;
        GridFunction::new(x)
    }
}

impl WitnessSampler for ReactionDiffusion {
    fn sample_witness(&self, rng: &mut dyn rand::RngCore) -> GridFunction {
        use rand::Rng;
        let offset: f64 = rng.gen_range(-0.5..0.5);
        let amps: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let values = nodes(self.k)
            .map(|x| {
                let s: f64 = amps
                    .iter()
                    .enumerate()
                    .map(|(m, a)| a * ((m as f64 + 1.0) * PI * x).cos())
                    .sum();
                (offset + s).clamp(-1.0, 1.0)
            })
            .collect();
        GridFunction { values }
    }
}
