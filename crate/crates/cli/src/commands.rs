//! The `run`, `converge` and `check` subcommands.

use std::path::{Path, PathBuf};

use gflow_core::convergence::{run_study, Reference, StudyGrid};
use gflow_core::diagnostics::{check_all, classical_bounds, witnesses, InequalityReport};
use gflow_core::error::FlowError;
use gflow_core::flow::{run_trajectory, Startup, Trajectory};
use gflow_core::halfline::true_solution;
use gflow_core::model::{EnergyModel, Scheme, WitnessSampler};
use gflow_core::spaces::hilbert::ReactionDiffusion;
use gflow_core::spaces::icdf::AggregationDiffusion;
use gflow_core::spaces::line::{LineEnergy, RealLine};
use gflow_core::spaces::sphere::{Sphere, SpherePoint};
use rayon::prelude::*;

use crate::chart::{loglog_chart, Series};
use crate::config::{ExperimentConfig, Space};
use crate::error::CliError;
use crate::table::{
    convergence_csv, diagnostics_csv, float, read_trajectory, trajectory_csv, write_atomic, DiagnosticsRow,
};

/// Work that is generic over the model of the configured space.
pub trait Task {
    type Output;

    fn visit<M: EnergyModel + WitnessSampler>(
        self,
        model: &M,
        u0: M::Point,
        exact: Option<&(dyn Fn(f64) -> M::Point + Sync)>,
    ) -> Result<Self::Output, CliError>;
}

fn model_error(e: FlowError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn dispatch<T: Task>(cfg: &ExperimentConfig, task: T) -> Result<T::Output, CliError> {
    let grid_k = || cfg.grid_k.ok_or_else(|| CliError::Config("grid_k is required".into()));
    match cfg.space {
        Space::Sphere => task.visit(&Sphere::new(), SpherePoint::initial_datum(), None),
        Space::HilbertRd => {
            let model = ReactionDiffusion::new(grid_k()?).map_err(model_error)?;
            let u0 = model.initial();
            task.visit(&model, u0, None)
        }
        Space::WassersteinIcdf => {
            let model = AggregationDiffusion::new(grid_k()?).map_err(model_error)?;
            let u0 = model.initial().map_err(model_error)?;
            task.visit(&model, u0, None)
        }
        Space::HalfLine => task.visit(&RealLine::new(LineEnergy::HalfLine), 1.0, Some(&true_solution)),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

fn solver_error(space: Space, scheme: Scheme, tau: f64, e: FlowError) -> CliError {
    CliError::Solver(format!("space {space}, scheme {scheme}, tau {tau:?}: {e}"))
}

pub fn trajectory_path(out: &Path, space: Space, scheme: Scheme, tau: f64) -> PathBuf {
    out.join(format!("trajectory_{space}_{scheme}_tau{}.csv", float(tau)))
}

/// Writes one trajectory file per `(scheme, tau)`.
pub struct RunTask<'a> {
    pub cfg: &'a ExperimentConfig,
}

impl Task for RunTask<'_> {
    type Output = Vec<PathBuf>;

    fn visit<M: EnergyModel + WitnessSampler>(
        self,
        model: &M,
        u0: M::Point,
        _exact: Option<&(dyn Fn(f64) -> M::Point + Sync)>,
    ) -> Result<Vec<PathBuf>, CliError> {
        let cfg = self.cfg;
        let jobs: Vec<(Scheme, f64)> = cfg
            .schemes
            .iter()
            .flat_map(|&s| cfg.taus.iter().map(move |&t| (s, t)))
            .collect();
        pool(cfg.jobs)?.install(|| {
            jobs.par_iter()
                .map(|&(scheme, tau)| {
                    let traj = run_trajectory(model, scheme, tau, &u0, cfg.t_final)
                        .map_err(|e| solver_error(cfg.space, scheme, tau, e))?;
                    let path = trajectory_path(&cfg.out, cfg.space, scheme, tau);
                    write_atomic(&path, &trajectory_csv(model, cfg.space, &traj)?)?;
                    Ok(path)
                })
                .collect()
        })
    }
}

fn diagnostics_rows<M: EnergyModel>(
    model: &M,
    label: &str,
    traj: &Trajectory<M::Point>,
    witnesses: &[M::Point],
) -> Vec<DiagnosticsRow> {
    let mut rows: Vec<DiagnosticsRow> = check_all(model, traj, witnesses)
        .iter()
        .map(|report: &InequalityReport| {
            let worst = report.worst();
            DiagnosticsRow {
                scheme: label.to_string(),
                tau: traj.tau(),
                check: report.inequality.name().to_string(),
                worst_step: worst.map(|r| r.step),
                worst_residual: worst.map(|r| r.value),
                slack: Some(report.slack),
                passed: report.passed(),
            }
        })
        .collect();
    let record = classical_bounds(model, traj, &model.base_point());
    rows.push(DiagnosticsRow {
        scheme: label.to_string(),
        tau: traj.tau(),
        check: "KineticSum".into(),
        worst_step: Some(traj.steps()),
        worst_residual: Some(record.kinetic_sum()),
        slack: None,
        passed: record.passed(),
    });
    rows
}

/// Mean errors at or below this are treated as exact up to rounding.
const ROUNDING_FLOOR: f64 = 1e-12;

/// Outcome of a convergence study, one line per scheme.
#[derive(Debug, Clone)]
pub struct ConvergeSummary {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub diagnostics_passed: bool,
}

pub struct ConvergeTask<'a> {
    pub cfg: &'a ExperimentConfig,
}

impl Task for ConvergeTask<'_> {
    type Output = ConvergeSummary;

    fn visit<M: EnergyModel + WitnessSampler>(
        self,
        model: &M,
        u0: M::Point,
        exact: Option<&(dyn Fn(f64) -> M::Point + Sync)>,
    ) -> Result<ConvergeSummary, CliError> {
        let cfg = self.cfg;
        cfg.validate_study()?;
        let grid = StudyGrid {
            tau_ref: cfg.tau_ref,
            taus: cfg.taus.clone(),
            tau_coarse: cfg.tau_coarse,
            horizon: cfg.t_final,
        };
        let reference = match exact {
            Some(f) => Reference::Exact(f),
            None => Reference::Bdf2,
        };
        let w = witnesses(model, cfg.seed);
        let (study, diagnostics) = pool(cfg.jobs)?.install(|| {
            let study = run_study(model, &u0, &cfg.schemes, &grid, reference).map_err(|e| match e {
                FlowError::RunFailed { scheme, tau, source } => solver_error(cfg.space, scheme, tau, *source),
                FlowError::GridMismatch(msg) => CliError::Config(msg),
                other => CliError::Solver(format!("space {}: {other}", cfg.space)),
            })?;
            let mut labelled: Vec<(String, &Trajectory<M::Point>)> = Vec::new();
            if let Some(r) = &study.reference {
                labelled.push(("bdf2-reference".into(), r));
            }
            labelled.extend(study.runs.iter().map(|r| (r.scheme.tag().to_string(), &r.trajectory)));
            let diagnostics: Vec<DiagnosticsRow> = labelled
                .par_iter()
                .flat_map_iter(|(label, traj)| diagnostics_rows(model, label, traj, &w))
                .collect();
            Ok::<_, CliError>((study, diagnostics))
        })?;

        let mut rows = Vec::new();
        let mut series = Vec::new();
        let mut lines = Vec::new();
        for report in &study.reports {
            let tag = report.scheme.tag();
            rows.extend(report.points.iter().map(|(tau, err)| (tag.to_string(), *tau, *err)));
            let at_floor = report.points.iter().all(|(_, e)| *e <= ROUNDING_FLOOR);
            let label = match &report.fit {
                _ if at_floor => format!("{tag} (errors at rounding level)"),
                Ok(fit) if fit.reliable() => format!("{tag} (slope {:.2})", fit.slope),
                Ok(fit) => format!("{tag} (slope {:.2}, unreliable)", fit.slope),
                Err(_) => format!("{tag} (below solver floor)"),
            };
            lines.push(match &report.fit {
                _ if at_floor => format!("{tag}: errors at rounding level, no order to fit"),
                Ok(fit) => format!(
                    "{tag}: slope {:.4}, intercept {:.4}, R2 {:.5}{}",
                    fit.slope,
                    fit.intercept,
                    fit.r_squared,
                    if fit.reliable() { "" } else { " (unreliable fit)" }
                ),
                Err(e) => format!("{tag}: no fit, {e}"),
            });
            series.push(Series {
                label,
                points: report.points.clone(),
            });
        }
        let title = format!("{}: mean error at T = {}", cfg.space, float(cfg.t_final));
        let files = vec![
            cfg.out.join("convergence.csv"),
            cfg.out.join("convergence.svg"),
            cfg.out.join("diagnostics.csv"),
        ];
        write_atomic(&files[0], &convergence_csv(&rows)?)?;
        write_atomic(&files[1], loglog_chart(&title, "tau", "mean error", &series).as_bytes())?;
        write_atomic(&files[2], &diagnostics_csv(&diagnostics)?)?;
        Ok(ConvergeSummary {
            lines,
            files,
            diagnostics_passed: diagnostics.iter().all(|r| r.passed),
        })
    }
}

pub struct CheckTask<'a> {
    pub cfg: &'a ExperimentConfig,
    pub trajectory: Option<&'a Path>,
}

/// Rebuilds a trajectory from a file written by `run`.
fn load_trajectory<M: EnergyModel>(
    model: &M,
    scheme: Scheme,
    path: &Path,
) -> Result<Trajectory<M::Point>, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let table = read_trajectory(path)?;
    let tau = table.tau().ok_or_else(|| bad("no steps".into()))?;
    let states = table
        .states
        .iter()
        .enumerate()
        .map(|(k, coords)| model.from_coordinates(coords).map_err(|e| bad(format!("row {k}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let horizon = *table.times.last().expect("at least two rows");
    let startup = match scheme {
        Scheme::MinimizingMovement => Startup::None,
        Scheme::Bdf2 => match model.prescribed_prehistory(tau, &states[0]) {
            Some(p) => Startup::Pair(p),
            None => Startup::EulerStep,
        },
    };
    Trajectory::from_parts(scheme, tau, horizon, startup, states).map_err(|e| bad(e.to_string()))
}

/// Result of `check`: printable table and the first failure, if any.
#[derive(Debug, Clone)]
pub struct CheckSummary {
    pub rows: Vec<DiagnosticsRow>,
}

impl CheckSummary {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<8} {:>10} {:<15} {:>8} {:>14} {:>12}  {}\n",
            "scheme", "tau", "check", "step", "worst", "slack", "verdict"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>10} {:<15} {:>8} {:>14} {:>12}  {}\n",
                r.scheme,
                format!("{:e}", r.tau),
                r.check,
                r.worst_step.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
                r.worst_residual.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
                r.slack.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "-".into()),
                if r.passed { "PASS" } else { "FAIL" }
            ));
        }
        out
    }

    pub fn first_failure(&self) -> Option<String> {
        self.rows.iter().find(|r| !r.passed).map(|r| {
            format!(
                "{} violated for {} at tau {:?}, step {}: residual {:e}",
                r.check,
                r.scheme,
                r.tau,
                r.worst_step.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
                r.worst_residual.unwrap_or(f64::NAN),
            )
        })
    }
}

impl Task for CheckTask<'_> {
    type Output = CheckSummary;

    fn visit<M: EnergyModel + WitnessSampler>(
        self,
        model: &M,
        u0: M::Point,
        _exact: Option<&(dyn Fn(f64) -> M::Point + Sync)>,
    ) -> Result<CheckSummary, CliError> {
        let cfg = self.cfg;
        let w = witnesses(model, cfg.seed);
        let mut rows = Vec::new();
        match self.trajectory {
            Some(path) => {
                let [scheme] = cfg.schemes[..] else {
                    return Err(CliError::Config("checking a file needs exactly one --scheme".into()));
                };
                let traj = load_trajectory(model, scheme, path)?;
                rows.extend(diagnostics_rows(model, scheme.tag(), &traj, &w));
            }
            None => {
                let tau = cfg.taus[0];
                let trajectories: Vec<(Scheme, Trajectory<M::Point>)> = pool(cfg.jobs)?.install(|| {
                    cfg.schemes
                        .par_iter()
                        .map(|&scheme| {
                            run_trajectory(model, scheme, tau, &u0, cfg.t_final)
                                .map(|t| (scheme, t))
                                .map_err(|e| solver_error(cfg.space, scheme, tau, e))
                        })
                        .collect::<Result<_, _>>()
                })?;
                for (scheme, traj) in &trajectories {
                    rows.extend(diagnostics_rows(model, scheme.tag(), traj, &w));
                }
            }
        }
        Ok(CheckSummary { rows })
    }
}
