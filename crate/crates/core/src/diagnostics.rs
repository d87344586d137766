//! A posteriori checks of discrete trajectories and error measurement.
//!
//! The inequalities below hold exactly for exact minimizers. Computed states
//! are minimizers up to the inner tolerance, so every check allows an additive
//! slack proportional to it.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FlowError, Result};
use crate::flow::{integer_ratio, step_count, Startup, Trajectory, INNER_TOLERANCE};
use crate::model::{EnergyModel, MetricSpace, Scheme, WitnessSampler};

/// Number of comparison points used by the EVI check.
pub const WITNESS_COUNT: usize = 16;
/// Fits with a lower coefficient of determination are flagged as unreliable.
pub const MIN_R_SQUARED: f64 = 0.99;

/// The inequalities verified on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inequality {
    /// `E(u^k) + d^2(u^{k-1}, u^k) / (2 tau) <= E(u^{k-1}) + d^2(u^{k-2}, u^{k-1}) / (4 tau)`
    EnergyDim,
    /// `E(u^k) <= E(u^{k-1})` for minimizing movement.
    MonotoneEnergy,
    /// The sum of the `EnergyDim` inequalities up to every step.
    Telescoped,
    /// The discrete evolution variational inequality against fixed witnesses.
    Evi,
}

impl Inequality {
    pub fn name(&self) -> &'static str {
        match self {
            Inequality::EnergyDim => "EnergyDim",
            Inequality::MonotoneEnergy => "MonotoneEnergy",
            Inequality::Telescoped => "Telescoped",
            Inequality::Evi => "EVI",
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Left-hand side minus right-hand side of one inequality instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub step: usize,
    pub witness: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub inequality: Inequality,
    pub slack: f64,
    pub residuals: Vec<Residual>,
}

impl InequalityReport {
    /// The largest residual, which decides the verdict.
    pub fn worst(&self) -> Option<Residual> {
        self.residuals
            .iter()
            .copied()
            .fold(None, |acc: Option<Residual>, r| match acc {
                Some(a) if !(r.value > a.value) && !r.value.is_nan() => Some(a),
                _ => Some(r),
            })
    }

    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.value <= self.slack)
    }
}

/// `10 eps (1 + max |E|)` over the states of the trajectory.
pub fn default_slack<M: EnergyModel + ?Sized>(model: &M, traj: &Trajectory<M::Point>) -> f64 {
    let max_abs = traj
        .states()
        .iter()
        .map(|p| model.energy(p).abs())
        .fold(0.0, f64::max);
    10.0 * INNER_TOLERANCE * (1.0 + max_abs)
}

fn sq<M: MetricSpace + ?Sized>(model: &M, a: &M::Point, b: &M::Point) -> f64 {
    let d = model.distance(a, b);
    d * d
}

/// `u^{-1}`, or `u^0` when the history was started with an Euler step.
fn prehistory<P>(traj: &Trajectory<P>) -> &P {
    match traj.startup() {
        Startup::Pair(p) => p,
        _ => traj.initial(),
    }
}

/// Per-step residuals of the almost-dissipation inequality on the BDF2 steps.
pub fn check_energy_dissipation<M: EnergyModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    slack: f64,
) -> InequalityReport {
    let tau = traj.tau();
    let first = traj.first_bdf2_step().unwrap_or(usize::MAX);
    let residuals = (first..=traj.steps())
        .map(|k| {
            let u = traj.two_back(k).expect("BDF2 steps have a history");
            let v = traj.state(k - 1);
            let w = traj.state(k);
            let value = model.energy(w) + sq(model, v, w) / (2.0 * tau) - model.energy(v) - sq(model, u, v) / (4.0 * tau);
            Residual {
                step: k,
                witness: None,
                value,
            }
        })
        .collect();
    InequalityReport {
        inequality: Inequality::EnergyDim,
        slack,
        residuals,
    }
}

/// Per-step residuals `E(u^k) - E(u^{k-1})`.
pub fn check_monotone_energy<M: EnergyModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    slack: f64,
) -> InequalityReport {
    let energies: Vec<f64> = traj.states().iter().map(|p| model.energy(p)).collect();
    let residuals = energies
        .windows(2)
        .enumerate()
        .map(|(i, e)| Residual {
            step: i + 1,
            witness: None,
            value: e[1] - e[0],
        })
        .collect();
    InequalityReport {
        inequality: Inequality::MonotoneEnergy,
        slack,
        residuals,
    }
}

/// Residuals of
/// `E(u^N) + sum_{k <= N} d^2(u^{k-1}, u^k) / (4 tau) <= E(u^0) + d^2(u^{-1}, u^0) / (4 tau)`
/// for every `N`, with the slack scaled by `N`.
///
/// For an Euler startup `u^{-1} = u^0`, which is valid because the Euler step
/// dissipates at least `d^2(u^0, u^1) / (2 tau)`.
pub fn check_telescoped_bound<M: EnergyModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    slack: f64,
) -> InequalityReport {
    let tau = traj.tau();
    let bound = model.energy(traj.initial()) + sq(model, prehistory(traj), traj.initial()) / (4.0 * tau);
    let mut kinetic = 0.0;
    let residuals = (1..=traj.steps())
        .map(|n| {
            kinetic += sq(model, traj.state(n - 1), traj.state(n)) / (4.0 * tau);
            Residual {
                step: n,
                witness: None,
                // dividing by N turns the N-fold slack into the common one
                value: (model.energy(traj.state(n)) + kinetic - bound) / n as f64,
            }
        })
        .collect();
    InequalityReport {
        inequality: Inequality::Telescoped,
        slack,
        residuals,
    }
}

/// Discrete EVI residuals for every step and witness.
///
/// BDF2 steps use the two-step inequality with modulus `3/(4 tau) + lambda/2`;
/// minimizing-movement steps (including an Euler startup) use
/// `(1/(2 tau) + lambda/2) d^2(u^k, w) - d^2(u^{k-1}, w)/(2 tau)
///  <= E(w) - E(u^k) - d^2(u^{k-1}, u^k)/(2 tau)`.
pub fn check_evi<M: EnergyModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    witnesses: &[M::Point],
    lambda: f64,
    slack: f64,
) -> InequalityReport {
    let tau = traj.tau();
    let first_bdf2 = traj.first_bdf2_step().unwrap_or(usize::MAX);
    let witness_energy: Vec<f64> = witnesses.iter().map(|w| model.energy(w)).collect();
    let witness_energy = &witness_energy;
    let residuals = (1..=traj.steps())
        .into_par_iter()
        .flat_map_iter(|k| {
            let cur = traj.state(k);
            let prev = traj.state(k - 1);
            let e_cur = model.energy(cur);
            let history = (k >= first_bdf2).then(|| traj.two_back(k).expect("BDF2 steps have a history"));
            let d_prev_cur = sq(model, prev, cur);
            let d_back_cur = history.map(|u| sq(model, u, cur));
            witnesses.iter().enumerate().map(move |(j, w)| {
                let value = match (history, d_back_cur) {
                    (Some(u), Some(d_back_cur)) => {
                        let lhs = (0.75 / tau + 0.5 * lambda) * sq(model, cur, w) - sq(model, prev, w) / tau
                            + sq(model, u, w) / (4.0 * tau);
                        let rhs = witness_energy[j] - e_cur - d_prev_cur / tau + d_back_cur / (4.0 * tau);
                        lhs - rhs
                    }
                    _ => {
                        let lhs = (0.5 / tau + 0.5 * lambda) * sq(model, cur, w) - sq(model, prev, w) / (2.0 * tau);
                        let rhs = witness_energy[j] - e_cur - d_prev_cur / (2.0 * tau);
                        lhs - rhs
                    }
                };
                Residual {
                    step: k,
                    witness: Some(j),
                    value,
                }
            })
        })
        .collect();
    InequalityReport {
        inequality: Inequality::Evi,
        slack,
        residuals,
    }
}

/// Deterministic admissible comparison points.
pub fn witnesses<M: WitnessSampler + ?Sized>(model: &M, seed: u64) -> Vec<M::Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..WITNESS_COUNT).map(|_| model.sample_witness(&mut rng)).collect()
}

/// Runs every inequality that applies to the trajectory's scheme.
pub fn check_all<M: EnergyModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    witnesses: &[M::Point],
) -> Vec<InequalityReport> {
    let slack = default_slack(model, traj);
    let lambda = model.semi_convexity().lambda();
    let mut reports = Vec::with_capacity(3);
    match traj.scheme() {
        Scheme::MinimizingMovement => reports.push(check_monotone_energy(model, traj, slack)),
        Scheme::Bdf2 => reports.push(check_energy_dissipation(model, traj, slack)),
    }
    reports.push(check_telescoped_bound(model, traj, slack));
    reports.push(check_evi(model, traj, witnesses, lambda, slack));
    reports
}

/// Per-step quantities and the a priori bounds on energy and distance.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    /// `E(u^k)` for `k = 0..=N`.
    pub energies: Vec<f64>,
    /// `d(u^{k-1}, u^k)` for `k = 1..=N`.
    pub step_distances: Vec<f64>,
    /// Running sums of `d^2(u^{k-1}, u^k) / (2 tau)`; the last entry is the total.
    pub kinetic_partial_sums: Vec<f64>,
    pub max_abs_energy: f64,
    /// `max_k d(u_*, u^k)`.
    pub max_base_distance: f64,
}

impl DiagnosticsRecord {
    pub fn kinetic_sum(&self) -> f64 {
        self.kinetic_partial_sums.last().copied().unwrap_or(0.0)
    }

    /// All aggregates finite and the running kinetic sums nondecreasing.
    pub fn passed(&self) -> bool {
        self.kinetic_sum().is_finite()
            && self.max_abs_energy.is_finite()
            && self.max_base_distance.is_finite()
            && self.kinetic_partial_sums.windows(2).all(|w| w[1] >= w[0])
    }
}

pub fn classical_bounds<M: EnergyModel + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    base: &M::Point,
) -> DiagnosticsRecord {
    let tau = traj.tau();
    let energies: Vec<f64> = traj.states().iter().map(|p| model.energy(p)).collect();
    let step_distances: Vec<f64> = traj
        .states()
        .windows(2)
        .map(|w| model.distance(&w[0], &w[1]))
        .collect();
    let mut total = 0.0;
    let kinetic_partial_sums = step_distances
        .iter()
        .map(|d| {
            total += d * d / (2.0 * tau);
            total
        })
        .collect();
    DiagnosticsRecord {
        max_abs_energy: energies.iter().map(|e| e.abs()).fold(0.0, f64::max),
        max_base_distance: traj
            .states()
            .iter()
            .map(|p| model.distance(base, p))
            .fold(0.0, f64::max),
        energies,
        step_distances,
        kinetic_partial_sums,
    }
}

fn coarse_times(tau_coarse: f64, horizon: f64, taus: &[f64]) -> Result<Vec<f64>> {
    if !(tau_coarse > 0.0) || horizon < tau_coarse {
        return Err(FlowError::GridMismatch(format!(
            "coarse step {tau_coarse} does not fit into horizon {horizon}"
        )));
    }
    for &tau in taus {
        if integer_ratio(tau_coarse, tau).is_none() {
            return Err(FlowError::GridMismatch(format!(
                "coarse step {tau_coarse} is not a multiple of {tau}"
            )));
        }
    }
    let n = step_count(horizon, tau_coarse);
    Ok((1..=n).map(|k| k as f64 * tau_coarse).collect())
}

/// Mean distance between two trajectories at the coarse times `k tau_coarse <= T`.
pub fn mean_error<M: MetricSpace + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    reference: &Trajectory<M::Point>,
    tau_coarse: f64,
    horizon: f64,
) -> Result<f64> {
    let times = coarse_times(tau_coarse, horizon, &[traj.tau(), reference.tau()])?;
    let mut sum = 0.0;
    for &t in &times {
        sum += model.distance(traj.interpolate(t)?, reference.interpolate(t)?);
    }
    Ok(sum / times.len() as f64)
}

/// Mean distance to an exact solution at the coarse times `k tau_coarse <= T`.
pub fn mean_error_against<M: MetricSpace + ?Sized>(
    model: &M,
    traj: &Trajectory<M::Point>,
    exact: impl Fn(f64) -> M::Point,
    tau_coarse: f64,
    horizon: f64,
) -> Result<f64> {
    let times = coarse_times(tau_coarse, horizon, &[traj.tau()])?;
    let mut sum = 0.0;
    for &t in &times {
        sum += model.distance(traj.interpolate(t)?, &exact(t));
    }
    Ok(sum / times.len() as f64)
}

/// Least-squares line through `(log tau, log error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl OrderFit {
    pub fn reliable(&self) -> bool {
        self.r_squared >= MIN_R_SQUARED
    }
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(FlowError::DegenerateInput(format!("{} points, need at least 3", points.len())));
    }
    if let Some((tau, err)) = points.iter().find(|(tau, err)| !(*err > 0.0) || !(*tau > 0.0)) {
        return Err(FlowError::DegenerateInput(format!(
            "error {err:e} at step {tau:e} is below the solver floor"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(FlowError::DegenerateInput("all step sizes coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
    })
}
