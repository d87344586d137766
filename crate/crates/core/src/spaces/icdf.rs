//! Aggregation-diffusion on probability measures over `[-1, 1]`, represented
//! through inverse distribution functions.
//!
//! A measure is stored as `X_i = X(xi_i)` at the midpoints `xi_i = (i - 1/2) / K`.
//! The Wasserstein distance becomes the L^2(0, 1) distance of the samples, and
//! the energy reads
//!
//! ```text
//! E(X) = -1/(K-1) sum_i log(K (X_{i+1} - X_i)) + 1/(2 K^2) sum_{i,j} W(X_i - X_j)
//! ```
//!
//! with the interaction kernel `W(x) = 2 x^4 - x^2`.

use std::f64::consts::PI;

use crate::error::{FlowError, Result};
use crate::model::{EnergyModel, MetricSpace, PenalizedProblem, SemiConvexity, WitnessSampler};
use crate::vector::{solve_penalized, weighted_distance, VectorAnchors, VectorEnergy};

/// Minimal separation of consecutive samples after projection.
pub const DELTA_MIN: f64 = 1e-12;
/// `W'' >= -2` gives a modulus of `-2` for the interaction energy; the entropy is convex.
pub const ICDF_LAMBDA: f64 = -2.0;

pub fn kernel(x: f64) -> f64 {
    let x2 = x * x;
    2.0 * x2 * x2 - x2
}

pub fn kernel_derivative(x: f64) -> f64 {
    8.0 * x * x * x - 2.0 * x
}

/// Samples of an inverse distribution function at the midpoints `(i - 1/2) / K`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCdf {
    values: Vec<f64>,
}

impl InverseCdf {
    /// Wraps samples, requiring `X_{i+1} >= X_i + DELTA_MIN` and `|X_i| <= 1`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(FlowError::InvalidState("need at least two samples".into()));
        }
        if !is_valid(&values) {
            return Err(FlowError::NonMonotone);
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
}

fn is_valid(x: &[f64]) -> bool {
    x.iter().all(|v| (-1.0..=1.0).contains(v)) && x.windows(2).all(|w| w[1] >= w[0] + DELTA_MIN)
}

/// Quantile levels `(i - 1/2) / K`.
pub fn midpoints(k: usize) -> impl Iterator<Item = f64> {
    (1..=k).map(move |i| (i as f64 - 0.5) / k as f64)
}

pub fn w2_distance(a: &InverseCdf, b: &InverseCdf) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FlowError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(weighted_distance(1.0 / a.len() as f64, &a.values, &b.values))
}

fn entropy_values(x: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mut sum = 0.0;
    for w in x.windows(2) {
        let d = w[1] - w[0];
        if !(d > 0.0) {
            return f64::INFINITY;
        }
        sum += (k * d).ln();
    }
    -sum / (k - 1.0)
}

fn interaction_values(x: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mut sum = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            sum += kernel(x[i] - x[j]);
        }
    }
    // the double sum counts each unordered pair twice and W(0) = 0
    sum / (k * k)
}

fn energy_values(x: &[f64]) -> f64 {
    if x.iter().any(|v| v.abs() > 1.0) {
        return f64::INFINITY;
    }
    let entropy = entropy_values(x);
    if entropy == f64::INFINITY {
        return entropy;
    }
    entropy + interaction_values(x)
}

/// Writes the gradient with respect to the weighted inner product `(1/K) sum`.
fn gradient_values(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let k = n as f64;
    let entropy_scale = k / (k - 1.0);
    for i in 0..n {
        let mut g = 0.0;
        if i + 1 < n {
            g += 1.0 / (x[i + 1] - x[i]);
        }
        if i > 0 {
            g -= 1.0 / (x[i] - x[i - 1]);
        }
        let mut inter = 0.0;
        for j in 0..n {
            inter += kernel_derivative(x[i] - x[j]);
        }
        out[i] = entropy_scale * g + inter / k;
    }
}

/// Discrete energy; `+inf` unless strictly increasing and inside `[-1, 1]`.
pub fn icdf_energy(x: &InverseCdf) -> f64 {
    energy_values(&x.values)
}

/// Entropy and interaction parts of the energy, in that order.
pub fn icdf_energy_parts(x: &InverseCdf) -> (f64, f64) {
    (entropy_values(&x.values), interaction_values(&x.values))
}

/// Exact gradient of [`icdf_energy`] with respect to the L^2(0, 1) inner product.
pub fn icdf_grad(x: &InverseCdf) -> Result<Vec<f64>> {
    if x.values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FlowError::NonMonotone);
    }
    let mut out = vec![0.0; x.len()];
    gradient_values(&x.values, &mut out);
    Ok(out)
}

/// The initial quantile function
/// `2 xi - 1 + sin(8 pi xi) (10 xi (xi - 1/2)(xi - 1) + 1) / (8 pi)`.
pub fn initial_quantile(xi: f64) -> f64 {
    2.0 * xi - 1.0 + (8.0 * PI * xi).sin() * (10.0 * xi * (xi - 0.5) * (xi - 1.0) + 1.0) / (8.0 * PI)
}

pub fn icdf_initial(k: usize) -> Result<InverseCdf> {
    if k < 4 {
        return Err(FlowError::PreconditionViolated(format!("grid size {k} < 4")));
    }
    let values: Vec<f64> = midpoints(k).map(initial_quantile).collect();
    if !is_valid(&values) {
        return Err(FlowError::InitialNotMonotone);
    }
    Ok(InverseCdf { values })
}

/// Unweighted isotonic regression (nondecreasing) by pool-adjacent-violators.
pub fn isotonic_regression(x: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(x.len());
    for &v in x {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 > s1 / c1 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(x.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat(s / c as f64).take(c));
    }
    out
}

/// Projection onto nondecreasing vectors in `[-1, 1]` with consecutive gaps of
/// at least [`DELTA_MIN`]: isotonic regression, clamping, then separation.
pub fn project_monotone(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_monotone_in_place(&mut out);
    out
}

pub fn project_monotone_in_place(x: &mut [f64]) {
    if x.windows(2).any(|w| w[1] < w[0]) {
        let fitted = isotonic_regression(x);
        x.copy_from_slice(&fitted);
    }
    for v in x.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    for i in 1..x.len() {
        if x[i] < x[i - 1] + DELTA_MIN {
            x[i] = x[i - 1] + DELTA_MIN;
        }
    }
    let n = x.len();
    if n > 0 && x[n - 1] > 1.0 {
        x[n - 1] = 1.0;
        for i in (0..n - 1).rev() {
            if x[i] > x[i + 1] - DELTA_MIN {
                x[i] = x[i + 1] - DELTA_MIN;
            }
        }
    }
}

/// Density samples `(location, density)` obtained by differentiating the
/// quantile function between consecutive samples.
pub fn density_profile(x: &InverseCdf) -> Vec<(f64, f64)> {
    let k = x.len() as f64;
    x.values
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1]), 1.0 / (k * (w[1] - w[0]))))
        .collect()
}

/// The aggregation-diffusion model with `K` quantile samples.
#[derive(Debug, Clone)]
pub struct AggregationDiffusion {
    k: usize,
    semi_convexity: SemiConvexity,
}

impl AggregationDiffusion {
    pub fn new(k: usize) -> Result<Self> {
        if k < 4 {
            return Err(FlowError::PreconditionViolated(format!("grid size {k} < 4")));
        }
        Ok(Self {
            k,
            semi_convexity: SemiConvexity::maximal(ICDF_LAMBDA)?,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.k
    }

    pub fn initial(&self) -> Result<InverseCdf> {
        icdf_initial(self.k)
    }

    /// Uniform measure on `[-1, 1]`.
    pub fn uniform(&self) -> InverseCdf {
        InverseCdf {
            values: midpoints(self.k).map(|xi| 2.0 * xi - 1.0).collect(),
        }
    }
}

impl MetricSpace for AggregationDiffusion {
    type Point = InverseCdf;

    fn distance(&self, a: &InverseCdf, b: &InverseCdf) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        weighted_distance(1.0 / self.k as f64, &a.values, &b.values)
    }

    fn base_point(&self) -> InverseCdf {
        self.uniform()
    }

    fn coordinate_count(&self) -> usize {
        self.k
    }

    fn coordinates(&self, p: &InverseCdf) -> Vec<f64> {
        p.values.clone()
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<InverseCdf> {
        if coords.len() != self.k {
            return Err(FlowError::DimensionMismatch {
                left: coords.len(),
                right: self.k,
            });
        }
        InverseCdf::new(coords.to_vec())
    }
}

impl VectorEnergy for AggregationDiffusion {
    fn weight(&self) -> f64 {
        1.0 / self.k as f64
    }

    fn piece_value_and_gradient(&self, _piece: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let e = energy_values(x);
        if e.is_finite() {
            gradient_values(x, grad);
        }
        e
    }

    fn project_piece(&self, _piece: usize, x: &mut [f64]) {
        project_monotone_in_place(x);
    }
}

impl EnergyModel for AggregationDiffusion {
    fn energy(&self, p: &InverseCdf) -> f64 {
        icdf_energy(p)
    }

    fn is_admissible(&self, p: &InverseCdf) -> bool {
        p.len() == self.k && is_valid(&p.values)
    }

    fn semi_convexity(&self) -> SemiConvexity {
        self.semi_convexity
    }

    fn minimize_penalized(
        &self,
        problem: &PenalizedProblem<'_, InverseCdf>,
        start: &InverseCdf,
        tolerance: f64,
    ) -> Result<InverseCdf> {
        let anchors = VectorAnchors::from_problem(problem, |x: &InverseCdf| x.values());
        let x = solve_penalized(self, &anchors, &start.values, tolerance, self.semi_convexity.lambda())?;
        InverseCdf::new(x)
    }
}

impl WitnessSampler for AggregationDiffusion {
    fn sample_witness(&self, rng: &mut dyn rand::RngCore) -> InverseCdf {
        use rand::Rng;
        let lo: f64 = rng.gen_range(-1.0..-0.3);
        let hi: f64 = rng.gen_range(0.3..1.0);
        let steps: Vec<f64> = (0..=self.k).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = steps.iter().sum();
        let mut acc = 0.0;
        let values = steps[..self.k]
            .iter()
            .map(|s| {
                acc += s;
                lo + (hi - lo) * acc / total
            })
            .collect();
        InverseCdf { values }
    }
}
