//! The unit sphere in R^3 with the great-circle distance and the potential
//! `sum_i (u_i - 1/2)(u_i + 1/2)^2` restricted to it.
//!
//! Inner problems are solved in the tangent plane at the previous state,
//! parametrized through the exponential map. The chart variable is bounded by
//! `pi - 0.1` so the cut locus is never reached.

use std::f64::consts::PI;

use crate::error::{FlowError, Result};
use crate::model::{Anchors, EnergyModel, MetricSpace, PenalizedProblem, SemiConvexity, WitnessSampler};
use crate::prox::{self, SolveSpec};

pub type Vec3 = [f64; 3];

const CHART_RADIUS: f64 = PI - 0.1;
const ANTIPODAL_SLACK: f64 = 1e-12;

/// Semi-convexity modulus used for slack scaling and the discrete EVI.
pub const SPHERE_LAMBDA: f64 = -10.0;

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn axpy(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// A unit vector in R^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Normalizes `v`; fails for the zero vector or non-finite input.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = norm(&v);
        if !(n.is_finite() && n > 0.0) {
            return Err(FlowError::InvalidState(format!("cannot normalize {v:?}")));
        }
        Ok(Self(scale(&v, 1.0 / n)))
    }

    fn renormalized(v: Vec3) -> Self {
        Self(scale(&v, 1.0 / norm(&v)))
    }

    /// `(1, 2, 5) / sqrt(30)`
    pub fn initial_datum() -> Self {
        Self::renormalized([1.0, 2.0, 5.0])
    }

    pub fn coords(&self) -> &Vec3 {
        &self.0
    }
}

/// Great-circle distance, computed as `atan2(|a x b|, <a, b>)`.
pub fn sphere_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    norm(&cross(&a.0, &b.0)).atan2(dot(&a.0, &b.0))
}

pub fn sphere_energy(u: &SpherePoint) -> f64 {
    u.0.iter().map(|&x| (x - 0.5) * (x + 0.5) * (x + 0.5)).sum()
}

/// Euclidean gradient of the ambient potential, `3 u_i^2 + u_i - 1/4`.
pub fn ambient_gradient(u: &SpherePoint) -> Vec3 {
    u.0.map(|x| 3.0 * x * x + x - 0.25)
}

/// Tangential projection `v - <u, v> u`.
pub fn project_tangent(u: &SpherePoint, v: &Vec3) -> Vec3 {
    axpy(v, -dot(&u.0, v), &u.0)
}

/// Riemannian gradient of the restricted potential.
pub fn sphere_grad(u: &SpherePoint) -> Vec3 {
    project_tangent(u, &ambient_gradient(u))
}

pub fn sphere_exp(u: &SpherePoint, xi: &Vec3) -> SpherePoint {
    let r = norm(xi);
    if r == 0.0 {
        return *u;
    }
    SpherePoint::renormalized(axpy(&scale(&u.0, r.cos()), r.sin() / r, xi))
}

/// Inverse of [`sphere_exp`] away from the antipode.
pub fn sphere_log(u: &SpherePoint, w: &SpherePoint) -> Result<Vec3> {
    let c = dot(&u.0, &w.0).clamp(-1.0, 1.0);
    if c <= -1.0 + ANTIPODAL_SLACK {
        return Err(FlowError::AntipodalPoint);
    }
    let p = axpy(&w.0, -c, &u.0);
    let s = norm(&p);
    if s == 0.0 {
        return Ok([0.0; 3]);
    }
    let theta = s.atan2(c);
    Ok(scale(&p, theta / s))
}

/// Orthonormal basis of the tangent plane at `u`.
fn tangent_basis(u: &SpherePoint) -> (Vec3, Vec3) {
    let v = &u.0;
    let mut axis = [0.0; 3];
    let i = (0..3)
        .min_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
        .unwrap_or(0);
    axis[i] = 1.0;
    let e1 = project_tangent(u, &axis);
    let e1 = scale(&e1, 1.0 / norm(&e1));
    let e2 = cross(v, &e1);
    (e1, e2)
}

/// Chart `xi -> exp_v(xi1 e1 + xi2 e2)` around a fixed point.
struct Chart {
    center: SpherePoint,
    e1: Vec3,
    e2: Vec3,
}

impl Chart {
    fn new(center: SpherePoint) -> Self {
        let (e1, e2) = tangent_basis(&center);
        Self { center, e1, e2 }
    }

    fn tangent(&self, xi: &[f64]) -> Vec3 {
        axpy(&scale(&self.e1, xi[0]), xi[1], &self.e2)
    }

    fn point(&self, xi: &[f64]) -> SpherePoint {
        sphere_exp(&self.center, &self.tangent(xi))
    }

    fn local(&self, tangent: &Vec3) -> [f64; 2] {
        [dot(tangent, &self.e1), dot(tangent, &self.e2)]
    }

    /// Adjoint of the differential of the exponential map at `xi`, applied to
    /// a tangent vector `g` at `exp(xi)`.
    fn pull_back(&self, xi: &[f64], g: &Vec3) -> [f64; 2] {
        let t3 = self.tangent(xi);
        let r = norm(&t3);
        if r == 0.0 {
            return self.local(g);
        }
        let dir = scale(&t3, 1.0 / r);
        let velocity = axpy(&scale(&dir, r.cos()), -r.sin(), &self.center.0);
        let normal = cross(&self.center.0, &dir);
        let radial = dot(g, &velocity);
        let transversal = dot(g, &normal) * r.sin() / r;
        self.local(&axpy(&scale(&dir, radial), transversal, &normal))
    }
}

/// The sphere gradient-flow model problem.
#[derive(Debug, Clone)]
pub struct Sphere {
    semi_convexity: SemiConvexity,
}

impl Sphere {
    pub fn new() -> Self {
        Self {
            semi_convexity: SemiConvexity::maximal(SPHERE_LAMBDA).expect("valid modulus"),
        }
    }

    /// Riemannian gradient of the penalized functional at `w`.
    pub fn penalized_gradient(&self, problem: &PenalizedProblem<'_, SpherePoint>, w: &SpherePoint) -> Result<Vec3> {
        let tau = problem.tau;
        let grad_e = sphere_grad(w);
        match problem.anchors {
            Anchors::Single { previous } => Ok(axpy(&grad_e, -1.0 / tau, &sphere_log(w, previous)?)),
            Anchors::Double { two_back, previous } => {
                let g = axpy(&grad_e, -2.0 / tau, &sphere_log(w, previous)?);
                Ok(axpy(&g, 0.5 / tau, &sphere_log(w, two_back)?))
            }
        }
    }
}

impl Default for Sphere {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricSpace for Sphere {
    type Point = SpherePoint;

    fn distance(&self, a: &SpherePoint, b: &SpherePoint) -> f64 {
        sphere_distance(a, b)
    }

    fn base_point(&self) -> SpherePoint {
        SpherePoint([0.0, 0.0, 1.0])
    }

    fn coordinate_count(&self) -> usize {
        3
    }

    fn coordinates(&self, p: &SpherePoint) -> Vec<f64> {
        p.0.to_vec()
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<SpherePoint> {
        let v: Vec3 = coords
            .try_into()
            .map_err(|_| FlowError::InvalidState(format!("expected 3 coordinates, got {}", coords.len())))?;
        if (norm(&v) - 1.0).abs() > 1e-9 {
            return Err(FlowError::InvalidState(format!("{v:?} is not a unit vector")));
        }
        SpherePoint::new(v)
    }
}

impl EnergyModel for Sphere {
    fn energy(&self, p: &SpherePoint) -> f64 {
        sphere_energy(p)
    }

    fn is_admissible(&self, p: &SpherePoint) -> bool {
        (norm(&p.0) - 1.0).abs() <= 1e-12
    }

    fn semi_convexity(&self) -> SemiConvexity {
        self.semi_convexity
    }

    fn minimize_penalized(
        &self,
        problem: &PenalizedProblem<'_, SpherePoint>,
        start: &SpherePoint,
        tolerance: f64,
    ) -> Result<SpherePoint> {
        let tau = problem.tau;
        let chart = Chart::new(*problem.previous());
        let two_back = match problem.anchors {
            Anchors::Single { .. } => None,
            Anchors::Double { two_back, .. } => {
                if dot(&two_back.0, &chart.center.0) <= -1.0 + ANTIPODAL_SLACK {
                    return Err(FlowError::AntipodalPoint);
                }
                Some(*two_back)
            }
        };
        let quadratic = match two_back {
            None => 1.0 / tau,
            Some(_) => 2.0 / tau,
        };
        let objective = |xi: &[f64], grad: &mut [f64]| {
            let w = chart.point(xi);
            let r_sq = xi[0] * xi[0] + xi[1] * xi[1];
            let mut value = 0.5 * quadratic * r_sq + sphere_energy(&w);
            let mut g = sphere_grad(&w);
            if let Some(u) = &two_back {
                let Ok(log_u) = sphere_log(&w, u) else {
                    return f64::INFINITY;
                };
                value -= sphere_distance(u, &w).powi(2) / (4.0 * tau);
                g = axpy(&g, 0.5 / tau, &log_u);
            }
            let pulled = chart.pull_back(xi, &g);
            grad[0] = quadratic * xi[0] + pulled[0];
            grad[1] = quadratic * xi[1] + pulled[1];
            value
        };
        let projection = |xi: &mut [f64]| {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            if r > CHART_RADIUS {
                xi[0] *= CHART_RADIUS / r;
                xi[1] *= CHART_RADIUS / r;
            }
        };
        let initial = chart.local(&sphere_log(&chart.center, start)?).to_vec();
        let mu = problem.convexity_modulus(self.semi_convexity.lambda());
        let spec = SolveSpec::new(&objective, initial)
            .projection(&projection)
            .tolerance(tolerance)
            .strong_convexity(mu.max(1.0));
        let out = prox::minimize(&spec)?;
        Ok(chart.point(&out.point))
    }
}

impl WitnessSampler for Sphere {
    fn sample_witness(&self, rng: &mut dyn rand::RngCore) -> SpherePoint {
        use rand::Rng;
        loop {
            let v: Vec3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = norm(&v);
            if n > 0.1 && n <= 1.0 {
                return SpherePoint::renormalized(v);
            }
        }
    }
}
