//! Convergence studies: runs on a ladder of step sizes compared against a
//! fine reference at coarse-grid times.

use rayon::prelude::*;

use crate::diagnostics::{fit_order, mean_error, mean_error_against, OrderFit};
use crate::error::{FlowError, Result};
use crate::flow::{integer_ratio, run_trajectory, Trajectory};
use crate::model::{EnergyModel, Scheme};

/// Step-size ladder of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyGrid {
    pub tau_ref: f64,
    /// Strictly decreasing.
    pub taus: Vec<f64>,
    pub tau_coarse: f64,
    pub horizon: f64,
}

impl StudyGrid {
    /// Every `tau` must be a multiple of `tau_ref` and divide `tau_coarse`.
    pub fn validate(&self) -> Result<()> {
        if self.taus.len() < 3 {
            return Err(FlowError::GridMismatch(format!(
                "{} step sizes, need at least 3",
                self.taus.len()
            )));
        }
        if self.taus.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(FlowError::GridMismatch("step sizes must be strictly decreasing".into()));
        }
        for &tau in &self.taus {
            if integer_ratio(tau, self.tau_ref).is_none() {
                return Err(FlowError::GridMismatch(format!(
                    "step {tau} is not a multiple of the reference step {}",
                    self.tau_ref
                )));
            }
            if integer_ratio(self.tau_coarse, tau).is_none() {
                return Err(FlowError::GridMismatch(format!(
                    "coarse step {} is not a multiple of {tau}",
                    self.tau_coarse
                )));
            }
        }
        if self.horizon < self.tau_coarse {
            return Err(FlowError::GridMismatch(format!(
                "horizon {} is shorter than the coarse step {}",
                self.horizon, self.tau_coarse
            )));
        }
        Ok(())
    }
}

/// What the runs are compared against.
pub enum Reference<'a, P> {
    /// BDF2 at the grid's reference step.
    Bdf2,
    /// A known exact solution.
    Exact(&'a (dyn Fn(f64) -> P + Sync)),
}

#[derive(Debug, Clone)]
pub struct StudyRun<P> {
    pub scheme: Scheme,
    pub tau: f64,
    pub mean_error: f64,
    pub trajectory: Trajectory<P>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub scheme: Scheme,
    /// `(tau, mean error)` in the order of the grid.
    pub points: Vec<(f64, f64)>,
    /// The fit, or why none is possible.
    pub fit: std::result::Result<OrderFit, String>,
    pub tau_ref: f64,
    pub tau_coarse: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct Study<P> {
    pub reference: Option<Trajectory<P>>,
    pub runs: Vec<StudyRun<P>>,
    pub reports: Vec<ConvergenceReport>,
}

enum Job {
    Reference,
    Run(Scheme, f64),
}

/// Runs every `(scheme, tau)` pair and the reference concurrently on the
/// current rayon pool, then fits one order per scheme.
pub fn run_study<M: EnergyModel>(
    model: &M,
    u0: &M::Point,
    schemes: &[Scheme],
    grid: &StudyGrid,
    reference: Reference<'_, M::Point>,
) -> Result<Study<M::Point>> {
    grid.validate()?;
    let mut jobs = Vec::new();
    if matches!(reference, Reference::Bdf2) {
        jobs.push(Job::Reference);
    }
    for &scheme in schemes {
        for &tau in &grid.taus {
            jobs.push(Job::Run(scheme, tau));
        }
    }
    let outputs: Vec<Result<(Option<Scheme>, Trajectory<M::Point>)>> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Reference => run_trajectory(model, Scheme::Bdf2, grid.tau_ref, u0, grid.horizon)
                .map(|t| (None, t))
                .map_err(|e| with_context(Scheme::Bdf2, grid.tau_ref, e)),
            Job::Run(scheme, tau) => run_trajectory(model, scheme, tau, u0, grid.horizon)
                .map(|t| (Some(scheme), t))
                .map_err(|e| with_context(scheme, tau, e)),
        })
        .collect();

    let mut reference_traj = None;
    let mut trajectories = Vec::new();
    for out in outputs {
        match out? {
            (None, t) => reference_traj = Some(t),
            (Some(scheme), t) => trajectories.push((scheme, t)),
        }
    }

    let runs = trajectories
        .into_par_iter()
        .map(|(scheme, trajectory)| {
            let err = match (&reference, &reference_traj) {
                (Reference::Exact(f), _) => mean_error_against(model, &trajectory, f, grid.tau_coarse, grid.horizon)?,
                (Reference::Bdf2, Some(r)) => mean_error(model, &trajectory, r, grid.tau_coarse, grid.horizon)?,
                (Reference::Bdf2, None) => unreachable!("reference job always runs"),
            };
            Ok(StudyRun {
                scheme,
                tau: trajectory.tau(),
                mean_error: err,
                trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let reports = schemes
        .iter()
        .map(|&scheme| report_for(scheme, &runs, grid))
        .collect();
    Ok(Study {
        reference: reference_traj,
        runs,
        reports,
    })
}

fn with_context(scheme: Scheme, tau: f64, source: FlowError) -> FlowError {
    FlowError::RunFailed {
        scheme,
        tau,
        source: Box::new(source),
    }
}

fn report_for<P>(scheme: Scheme, runs: &[StudyRun<P>], grid: &StudyGrid) -> ConvergenceReport {
    let points: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.scheme == scheme)
        .map(|r| (r.tau, r.mean_error))
        .collect();
    ConvergenceReport {
        scheme,
        fit: fit_order(&points).map_err(|e| e.to_string()),
        points,
        tau_ref: grid.tau_ref,
        tau_coarse: grid.tau_coarse,
        horizon: grid.horizon,
    }
}
