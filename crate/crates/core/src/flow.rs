//! Variational time stepping: minimizing movement and BDF2.

use crate::error::{FlowError, Result};
use crate::model::{EnergyModel, PenalizedProblem, Scheme};

/// Relative accuracy of every inner minimization.
pub const INNER_TOLERANCE: f64 = 1e-10;

/// Stationarity tolerance for an inner solve started at a point of energy `energy`.
pub fn inner_tolerance(energy: f64) -> f64 {
    INNER_TOLERANCE * (1.0 + energy.abs())
}

fn snapped_ratio(t: f64, tau: f64) -> (f64, bool) {
    let r = t / tau;
    let nearest = r.round();
    let on_grid = (r - nearest).abs() <= 1e-9 * nearest.max(1.0);
    (if on_grid { nearest } else { r }, on_grid)
}

/// Number of full steps of size `tau` that fit into `[0, horizon]`.
pub fn step_count(horizon: f64, tau: f64) -> usize {
    let (r, _) = snapped_ratio(horizon, tau);
    r.floor().max(0.0) as usize
}

/// Index `k` with `t` in `((k-1) tau, k tau]`, and 0 for `t = 0`.
pub fn interval_index(t: f64, tau: f64) -> usize {
    let (r, _) = snapped_ratio(t, tau);
    r.ceil().max(0.0) as usize
}

/// `Some(n)` if `a / b` is the natural number `n` up to rounding.
pub fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let (r, on_grid) = snapped_ratio(a, b);
    (on_grid && r >= 1.0).then_some(r as usize)
}

fn check_step_size<M: EnergyModel + ?Sized>(model: &M, tau: f64) -> Result<()> {
    let sc = model.semi_convexity();
    if sc.admits(tau) {
        Ok(())
    } else {
        Err(FlowError::StepTooLarge {
            tau,
            tau_star: sc.tau_star(),
        })
    }
}

/// One minimizing-movement step: the minimizer of `d^2(v, w) / (2 tau) + E(w)`.
pub fn mm_step<M: EnergyModel + ?Sized>(model: &M, tau: f64, v: &M::Point) -> Result<M::Point> {
    check_step_size(model, tau)?;
    let problem = PenalizedProblem::minimizing_movement(tau, v);
    model.minimize_penalized(&problem, v, inner_tolerance(model.energy(v)))
}

/// One BDF2 step: the minimizer of `d^2(v, w) / tau - d^2(u, w) / (4 tau) + E(w)`,
/// with `u` the state two steps back and `v` the previous state.
pub fn bdf2_step<M: EnergyModel + ?Sized>(
    model: &M,
    tau: f64,
    u: &M::Point,
    v: &M::Point,
) -> Result<M::Point> {
    check_step_size(model, tau)?;
    let problem = PenalizedProblem::bdf2(tau, u, v);
    model.minimize_penalized(&problem, v, inner_tolerance(model.energy(v)))
}

/// The BDF2 history `(u^0, u^1)`: the datum and one implicit Euler step.
pub fn startup_pair<M: EnergyModel + ?Sized>(
    model: &M,
    tau: f64,
    u0: &M::Point,
) -> Result<(M::Point, M::Point)> {
    let u1 = mm_step(model, tau, u0)?;
    Ok((u0.clone(), u1))
}

/// How the BDF2 history was initialized.
#[derive(Debug, Clone)]
pub enum Startup<P> {
    /// Minimizing movement trajectory; no history needed.
    None,
    /// `u^1` is an implicit Euler step from `u^0`.
    EulerStep,
    /// An explicit `u^{-1}` was supplied.
    Pair(P),
}

/// Discrete states `u^0, ..., u^N` of one run, with `N tau <= T < (N + 1) tau`.
#[derive(Debug, Clone)]
pub struct Trajectory<P> {
    scheme: Scheme,
    tau: f64,
    horizon: f64,
    startup: Startup<P>,
    states: Vec<P>,
}

impl<P> Trajectory<P> {
    /// Assembles a trajectory from precomputed states; `states[0]` is `u^0`.
    pub fn from_parts(
        scheme: Scheme,
        tau: f64,
        horizon: f64,
        startup: Startup<P>,
        states: Vec<P>,
    ) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(FlowError::PreconditionViolated(format!("step size {tau} must be positive")));
        }
        if states.len() != step_count(horizon, tau) + 1 {
            return Err(FlowError::PreconditionViolated(format!(
                "{} states do not match horizon {horizon} at step {tau}",
                states.len()
            )));
        }
        match (scheme, &startup) {
            (Scheme::MinimizingMovement, Startup::None) => {}
            (Scheme::Bdf2, Startup::EulerStep | Startup::Pair(_)) => {}
            _ => {
                return Err(FlowError::PreconditionViolated(
                    "startup does not match the scheme".into(),
                ))
            }
        }
        Ok(Self {
            scheme,
            tau,
            horizon,
            startup,
            states,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn startup(&self) -> &Startup<P> {
        &self.startup
    }

    /// All states `u^0..=u^N`.
    pub fn states(&self) -> &[P] {
        &self.states
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, k: usize) -> &P {
        &self.states[k]
    }

    pub fn initial(&self) -> &P {
        &self.states[0]
    }

    pub fn last(&self) -> &P {
        self.states.last().expect("trajectory is never empty")
    }

    /// Index of the first state produced by a BDF2 step.
    pub fn first_bdf2_step(&self) -> Option<usize> {
        match self.startup {
            Startup::None => None,
            Startup::EulerStep => Some(2),
            Startup::Pair(_) => Some(1),
        }
    }

    /// `u^{k-2}`, which is the supplied `u^{-1}` when `k = 1`.
    pub fn two_back(&self, k: usize) -> Option<&P> {
        match (k, &self.startup) {
            (0, _) => None,
            (1, Startup::Pair(p)) => Some(p),
            (1, _) => None,
            (k, _) => Some(&self.states[k - 2]),
        }
    }

    /// Piecewise-constant interpolation: `u^0` at 0 and `u^k` on `((k-1) tau, k tau]`.
    pub fn interpolate(&self, t: f64) -> Result<&P> {
        let end = self.steps() as f64 * self.tau;
        let k = interval_index(t, self.tau);
        if t < 0.0 || k > self.steps() {
            return Err(FlowError::OutOfRange { t, end });
        }
        Ok(&self.states[k])
    }
}

fn wrap_step<T>(k: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| FlowError::StepFailed {
        k,
        source: Box::new(e),
    })
}

fn push_checked<M: EnergyModel + ?Sized>(model: &M, states: &mut Vec<M::Point>, p: M::Point) -> Result<()> {
    let k = states.len();
    if !model.is_admissible(&p) {
        return Err(FlowError::Inadmissible { k });
    }
    states.push(p);
    Ok(())
}

fn check_run_inputs<M: EnergyModel + ?Sized>(model: &M, tau: f64, u0: &M::Point, horizon: f64) -> Result<usize> {
    check_step_size(model, tau)?;
    if !model.is_admissible(u0) {
        return Err(FlowError::Inadmissible { k: 0 });
    }
    let n = step_count(horizon, tau);
    if n == 0 {
        return Err(FlowError::PreconditionViolated(format!(
            "horizon {horizon} is shorter than one step {tau}"
        )));
    }
    Ok(n)
}

/// Runs either scheme from `u0` up to `horizon`.
///
/// BDF2 runs use the model's prescribed `u^{-1}` when it has one, and the
/// implicit Euler startup otherwise.
pub fn run_trajectory<M: EnergyModel + ?Sized>(
    model: &M,
    scheme: Scheme,
    tau: f64,
    u0: &M::Point,
    horizon: f64,
) -> Result<Trajectory<M::Point>> {
    let n = check_run_inputs(model, tau, u0, horizon)?;
    match scheme {
        Scheme::MinimizingMovement => {
            let mut states = Vec::with_capacity(n + 1);
            states.push(u0.clone());
            for k in 1..=n {
                let next = wrap_step(k, mm_step(model, tau, &states[k - 1]))?;
                wrap_step(k, push_checked(model, &mut states, next))?;
            }
            Trajectory::from_parts(scheme, tau, horizon, Startup::None, states)
        }
        Scheme::Bdf2 => match model.prescribed_prehistory(tau, u0) {
            Some(prehistory) => run_bdf2_from_pair(model, tau, &prehistory, u0, horizon),
            None => {
                let (_, u1) = wrap_step(1, startup_pair(model, tau, u0))?;
                let mut states = Vec::with_capacity(n + 1);
                states.push(u0.clone());
                wrap_step(1, push_checked(model, &mut states, u1))?;
                for k in 2..=n {
                    let next = wrap_step(k, bdf2_step(model, tau, &states[k - 2], &states[k - 1]))?;
                    wrap_step(k, push_checked(model, &mut states, next))?;
                }
                Trajectory::from_parts(scheme, tau, horizon, Startup::EulerStep, states)
            }
        },
    }
}

/// Runs BDF2 from an explicit history pair `(u^{-1}, u^0)`.
pub fn run_bdf2_from_pair<M: EnergyModel + ?Sized>(
    model: &M,
    tau: f64,
    prehistory: &M::Point,
    u0: &M::Point,
    horizon: f64,
) -> Result<Trajectory<M::Point>> {
    let n = check_run_inputs(model, tau, u0, horizon)?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(u0.clone());
    for k in 1..=n {
        let two_back = if k == 1 { prehistory } else { &states[k - 2] };
        let next = wrap_step(k, bdf2_step(model, tau, two_back, &states[k - 1]))?;
        wrap_step(k, push_checked(model, &mut states, next))?;
    }
    Trajectory::from_parts(
        Scheme::Bdf2,
        tau,
        horizon,
        Startup::Pair(prehistory.clone()),
        states,
    )
}
