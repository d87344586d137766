//! Projected-gradient minimization of strongly convex objectives.
//!
//! Every inner problem of the stepping schemes is a strongly convex minimization
//! over a closed convex set that admits a cheap projection (a box, a ball in a
//! tangent chart, or the cone of nondecreasing vectors). The solver below is a
//! monotone projected gradient method with Barzilai-Borwein trial steps and
//! halving backtracking.
//!
//! Vectors are measured in a weighted Euclidean inner product
//! `<a, b> = weight * sum(a_i * b_i)`; the objective callback must return the
//! gradient with respect to that inner product.

use thiserror::Error;

/// Objective callback: writes the gradient into the second argument and returns the value.
pub type Objective<'a> = dyn Fn(&[f64], &mut [f64]) -> f64 + 'a;
/// In-place projection onto the feasible set.
pub type Projection<'a> = dyn Fn(&mut [f64]) + 'a;

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

const MAX_HALVINGS: usize = 200;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("no stationary point after {iterations} iterations (residual {residual:e})")]
    MaxIterations {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },
    #[error("line search stalled after {iterations} iterations (residual {residual:e})")]
    Stalled {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },
    #[error("objective is not finite at a feasible point")]
    NonFiniteObjective,
    #[error("invalid solve specification: {0}")]
    InvalidSpec(String),
    #[error("model error during inner solve: {0}")]
    Model(String),
}

/// Everything the solver needs for one minimization.
pub struct SolveSpec<'a> {
    objective: &'a Objective<'a>,
    projection: Option<&'a Projection<'a>>,
    initial: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
    strong_convexity: Option<f64>,
    weight: f64,
}

impl<'a> SolveSpec<'a> {
    pub fn new(objective: &'a Objective<'a>, initial: Vec<f64>) -> Self {
        Self {
            objective,
            projection: None,
            initial,
            tolerance: 1e-10,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            strong_convexity: None,
            weight: 1.0,
        }
    }

    pub fn projection(mut self, projection: &'a Projection<'a>) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = cap;
        self
    }

    /// Lower bound on the strong-convexity modulus; used to size the first step.
    pub fn strong_convexity(mut self, mu: f64) -> Self {
        self.strong_convexity = Some(mu);
        self
    }

    pub fn weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    fn project(&self, x: &mut [f64]) {
        if let Some(p) = self.projection {
            p(x);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Projected-gradient stationarity `|x - P(x - eta g)| / eta` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Objective values of the accepted iterates, starting with the initial point.
    pub values: Vec<f64>,
}

fn dot(weight: f64, a: &[f64], b: &[f64]) -> f64 {
    weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Minimizes the objective over the feasible set described by `spec`.
///
/// The returned point satisfies projected-gradient stationarity to
/// `spec.tolerance`. The accepted objective values never increase beyond
/// floating-point resolution.
pub fn minimize(spec: &SolveSpec<'_>) -> Result<SolveOutcome, SolveError> {
    if !(spec.tolerance > 0.0) {
        return Err(SolveError::InvalidSpec("tolerance must be positive".into()));
    }
    if spec.max_iterations == 0 {
        return Err(SolveError::InvalidSpec("iteration cap must be at least 1".into()));
    }
    if !(spec.weight > 0.0) {
        return Err(SolveError::InvalidSpec("inner-product weight must be positive".into()));
    }
    let n = spec.initial.len();
    let w = spec.weight;

    let mut x = spec.initial.clone();
    spec.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = (spec.objective)(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFiniteObjective);
    }

    let mut eta = match spec.strong_convexity {
        Some(mu) if mu > 0.0 => 1.0 / mu,
        _ => 1.0,
    };
    let mut trial = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut values = vec![f];
    let mut residual = f64::INFINITY;

    for iteration in 0..spec.max_iterations {
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            for i in 0..n {
                trial[i] = x[i] - eta * g[i];
            }
            spec.project(&mut trial);
            for i in 0..n {
                step[i] = trial[i] - x[i];
            }
            let step_sq = dot(w, &step, &step);
            residual = step_sq.sqrt() / eta;
            if residual <= spec.tolerance {
                return Ok(SolveOutcome {
                    point: x,
                    value: f,
                    residual,
                    iterations: iteration,
                    values,
                });
            }

            let f_trial = (spec.objective)(&trial, &mut g_trial);
            if f_trial.is_nan() || g_trial.iter().any(|v| v.is_nan()) {
                return Err(SolveError::NonFiniteObjective);
            }
            if f_trial == f64::INFINITY {
                // left the effective domain (barrier or obstacle)
                eta *= 0.5;
                continue;
            }

            let predicted = dot(w, &g, &step);
            let noise = 1e3 * f64::EPSILON * (1.0 + f.abs());
            let ok = if -predicted > noise {
                f_trial <= f + ARMIJO * predicted
            } else {
                // Function differences are below resolution; fall back to a
                // curvature test, which implies descent for convex objectives.
                let mut curvature = 0.0;
                for i in 0..n {
                    curvature += (g_trial[i] - g[i]) * step[i];
                }
                w * curvature <= 0.5 * step_sq / eta && f_trial <= f + noise
            };
            if !ok {
                eta *= 0.5;
                continue;
            }

            // Barzilai-Borwein trial step for the next iteration.
            let mut sy = 0.0;
            for i in 0..n {
                sy += step[i] * (g_trial[i] - g[i]);
            }
            sy *= w;
            eta = if sy > 0.0 { step_sq / sy } else { 2.0 * eta };
            eta = eta.clamp(1e-300, 1e300);

            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut g, &mut g_trial);
            f = f_trial;
            values.push(f);
            accepted = true;
            break;
        }
        if !accepted {
            return Err(SolveError::Stalled {
                best: x,
                residual,
                iterations: iteration,
            });
        }
    }
    Err(SolveError::MaxIterations {
        best: x,
        residual,
        iterations: spec.max_iterations,
    })
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box(x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    debug_assert!(lo <= hi);
    x.iter().map(|v| v.clamp(lo, hi)).collect()
}

/// In-place variant of [`project_box`].
pub fn project_box_in_place(x: &mut [f64], lo: f64, hi: f64) {
    for v in x.iter_mut() {
        *v = v.clamp(lo, hi);
    }
}
