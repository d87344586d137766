//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits with a nonzero status if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gflow_core::convergence::{run_study, ConvergenceReport, Reference, Study, StudyGrid};
use gflow_core::diagnostics::{check_all, fit_order, mean_error_against, witnesses, InequalityReport};
use gflow_core::flow::{bdf2_step, inner_tolerance, Trajectory};
use gflow_core::halfline::{exact_bdf2_step, exact_trajectory, scaled_residual, third_case_holds, true_solution};
use gflow_core::model::{EnergyModel, Scheme, WitnessSampler};
use gflow_core::spaces::hilbert::{rd_energy, rd_grad, segment_identity_sides, GridFunction, ReactionDiffusion};
use gflow_core::spaces::icdf::{icdf_energy, icdf_grad, AggregationDiffusion, InverseCdf};
use gflow_core::spaces::line::{LineEnergy, RealLine};
use gflow_core::spaces::sphere::{sphere_energy, sphere_exp, sphere_grad, Sphere, SpherePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WITNESS_SEED: u64 = 2024;
const MIN_SLOPE: f64 = 0.5;

type Outcome = Result<String, String>;

/// Verdicts of the inequality suite gathered from the convergence criteria.
#[derive(Default)]
struct InequalityLedger {
    trajectories: usize,
    checks: usize,
    failures: Vec<String>,
}

impl InequalityLedger {
    fn record<M: EnergyModel + WitnessSampler>(&mut self, label: &str, model: &M, traj: &Trajectory<M::Point>) {
        let w = witnesses(model, WITNESS_SEED);
        self.trajectories += 1;
        for report in check_all(model, traj, &w) {
            self.checks += 1;
            if !report.passed() {
                self.failures.push(describe_failure(label, traj, &report));
            }
        }
    }

    fn record_study<M: EnergyModel + WitnessSampler>(&mut self, space: &str, model: &M, study: &Study<M::Point>) {
        if let Some(r) = &study.reference {
            self.record(&format!("{space} reference"), model, r);
        }
        for run in &study.runs {
            self.record(&format!("{space} {}", run.scheme), model, &run.trajectory);
        }
    }
}

fn describe_failure<P>(label: &str, traj: &Trajectory<P>, report: &InequalityReport) -> String {
    let worst = report.worst().expect("failed reports have residuals");
    format!(
        "{label} tau={:e}: {} at step {} residual {:e} > slack {:e}",
        traj.tau(),
        report.inequality,
        worst.step,
        worst.value,
        report.slack
    )
}

fn check_reports(reports: &[ConvergenceReport], bands: &[(Scheme, f64, f64)], min_r2: Option<f64>) -> Outcome {
    let mut summary = Vec::new();
    let mut problems = Vec::new();
    for report in reports {
        let fit = match &report.fit {
            Ok(fit) => fit,
            Err(e) => {
                problems.push(format!("{}: {e}", report.scheme));
                continue;
            }
        };
        summary.push(format!("{} slope {:.3} R2 {:.4}", report.scheme, fit.slope, fit.r_squared));
        if let Some(&(_, lo, hi)) = bands.iter().find(|(s, _, _)| *s == report.scheme) {
            if !(lo..=hi).contains(&fit.slope) {
                problems.push(format!("{} slope {:.3} outside [{lo}, {hi}]", report.scheme, fit.slope));
            }
        }
        if fit.slope < MIN_SLOPE {
            problems.push(format!("{} slope {:.3} below {MIN_SLOPE}", report.scheme, fit.slope));
        }
        if let Some(r2) = min_r2 {
            if fit.r_squared < r2 {
                problems.push(format!("{} R2 {:.4} below {r2}", report.scheme, fit.r_squared));
            }
        }
        let errors: Vec<String> = report.points.iter().map(|(t, e)| format!("{t:e}:{e:.3e}")).collect();
        summary.push(format!("[{}]", errors.join(" ")));
    }
    if problems.is_empty() {
        Ok(summary.join(", "))
    } else {
        Err(format!("{}; {}", problems.join("; "), summary.join(", ")))
    }
}

fn criterion_1() -> Outcome {
    let tau = 1.0 / 100.0;
    let traj = exact_trajectory(tau, 1.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        worst = worst.max((traj.state(k) - (1.0 - k as f64 * tau)).abs());
    }
    if worst <= 1e-14 {
        Ok(format!("max deviation {worst:e}"))
    } else {
        Err(format!("max deviation {worst:e} > 1e-14"))
    }
}

fn criterion_2(ledger: &mut InequalityLedger) -> Outcome {
    let model = RealLine::new(LineEnergy::HalfLine);
    let mut points = Vec::new();
    let mut notes = Vec::new();
    for tau in [1e-2, 1e-3, 1e-4] {
        if !third_case_holds(tau) {
            notes.push(format!("skipped tau={tau:e}"));
            continue;
        }
        let traj = exact_trajectory(tau, 2.0).map_err(|e| e.to_string())?;
        let err = mean_error_against(&model, &traj, true_solution, 1e-2, 2.0).map_err(|e| e.to_string())?;
        let residual = scaled_residual(tau, 2.0).map_err(|e| e.to_string())?;
        if !(0.14..=0.52).contains(&residual) {
            return Err(format!("scaled residual {residual:.4} at tau={tau:e} outside [0.14, 0.52]"));
        }
        notes.push(format!("tau={tau:e} residual {residual:.4}"));
        points.push((tau, err));
        ledger.record("halfline bdf2", &model, &traj);
    }
    let fit = fit_order(&points).map_err(|e| e.to_string())?;
    notes.push(format!("slope {:.4}", fit.slope));
    if (0.8..=1.2).contains(&fit.slope) && fit.slope >= MIN_SLOPE {
        Ok(notes.join(", "))
    } else {
        Err(format!("slope {:.4} outside [0.8, 1.2]", fit.slope))
    }
}

fn convergence_ladder() -> Vec<f64> {
    vec![1.28e-3, 6.4e-4, 3.2e-4, 1.6e-4, 8e-5]
}

fn criterion_3(ledger: &mut InequalityLedger) -> Outcome {
    let model = Sphere::new();
    let grid = StudyGrid {
        tau_ref: 1e-5,
        taus: vec![1.6e-3, 8e-4, 4e-4, 2e-4, 1e-4],
        tau_coarse: 1.6e-3,
        horizon: 0.5,
    };
    let schemes = [Scheme::MinimizingMovement, Scheme::Bdf2];
    let study = run_study(&model, &SpherePoint::initial_datum(), &schemes, &grid, Reference::Bdf2)
        .map_err(|e| e.to_string())?;
    ledger.record_study("sphere", &model, &study);
    check_reports(
        &study.reports,
        &[(Scheme::MinimizingMovement, 0.9, 1.1), (Scheme::Bdf2, 1.85, 2.2)],
        Some(0.99),
    )
}

fn criterion_4(ledger: &mut InequalityLedger) -> Outcome {
    let model = ReactionDiffusion::new(100).map_err(|e| e.to_string())?;
    let grid = StudyGrid {
        tau_ref: 2e-5,
        taus: convergence_ladder(),
        tau_coarse: 1.28e-3,
        horizon: 0.05,
    };
    let schemes = [Scheme::MinimizingMovement, Scheme::Bdf2];
    let study = run_study(&model, &model.initial(), &schemes, &grid, Reference::Bdf2).map_err(|e| e.to_string())?;
    ledger.record_study("hilbert-rd", &model, &study);
    check_reports(
        &study.reports,
        &[(Scheme::MinimizingMovement, 0.8, 1.2), (Scheme::Bdf2, 1.6, 2.3)],
        None,
    )
}

fn criterion_5(ledger: &mut InequalityLedger) -> Outcome {
    let model = AggregationDiffusion::new(50).map_err(|e| e.to_string())?;
    let grid = StudyGrid {
        tau_ref: 2e-5,
        taus: convergence_ladder(),
        tau_coarse: 1.28e-3,
        horizon: 0.05,
    };
    let schemes = [Scheme::MinimizingMovement, Scheme::Bdf2];
    let u0 = model.initial().map_err(|e| e.to_string())?;
    let study = run_study(&model, &u0, &schemes, &grid, Reference::Bdf2).map_err(|e| e.to_string())?;
    ledger.record_study("wasserstein-icdf", &model, &study);
    check_reports(
        &study.reports,
        &[(Scheme::MinimizingMovement, 0.8, 1.2), (Scheme::Bdf2, 1.7, 2.3)],
        None,
    )
}

fn criterion_6(ledger: &InequalityLedger) -> Outcome {
    if ledger.trajectories == 0 {
        return Err("no trajectories were produced".into());
    }
    let summary = format!("{} trajectories, {} checks", ledger.trajectories, ledger.checks);
    if ledger.failures.is_empty() {
        Ok(summary)
    } else {
        let shown: Vec<&str> = ledger.failures.iter().take(5).map(String::as_str).collect();
        Err(format!("{summary}, {} failures: {}", ledger.failures.len(), shown.join("; ")))
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in [10usize, 100] {
        for _ in 0..10_000 {
            let mut draw = || {
                GridFunction::new((0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("grid of size >= 2")
            };
            let (g0, g1, u, v) = (draw(), draw(), draw(), draw());
            let s = [0.25, 0.5, 0.9][rng.gen_range(0..3)];
            let (lhs, rhs) = segment_identity_sides(&g0, &g1, &u, &v, s).map_err(|e| e.to_string())?;
            let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max relative defect {worst:e}"))
    } else {
        Err(format!("max relative defect {worst:e} > 1e-10"))
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let quadratic = RealLine::new(LineEnergy::Quadratic);
    let halfline = RealLine::new(LineEnergy::HalfLine);
    let mut worst_quadratic: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let u: f64 = rng.gen_range(-2.0..2.0);
        let v: f64 = rng.gen_range(-2.0..2.0);
        let tau: f64 = rng.gen_range(1e-4..1.0);
        let w = bdf2_step(&quadratic, tau, &u, &v).map_err(|e| e.to_string())?;
        worst_quadratic = worst_quadratic.max((w - (4.0 * v - u) / (3.0 + 2.0 * tau)).abs());
        let w = bdf2_step(&halfline, tau, &u, &v).map_err(|e| e.to_string())?;
        let eps = inner_tolerance(halfline.energy(&v));
        worst_ratio = worst_ratio.max((w - exact_bdf2_step(u, v, tau)).abs() / eps);
    }
    let summary = format!("quadratic {worst_quadratic:e}, halfline {worst_ratio:.3} eps");
    if worst_quadratic <= 1e-9 && worst_ratio <= 10.0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn relative_defect(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = [0.0f64; 3];

    let sphere = Sphere::new();
    let h = 1e-5;
    for _ in 0..100 {
        let p = sphere.sample_witness(&mut rng);
        let g = sphere_grad(&p);
        // central differences along geodesics in an orthonormal tangent frame
        let a = p.coords();
        let seed = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let dot = seed[0] * a[0] + seed[1] * a[1] + seed[2] * a[2];
        let mut e1 = [seed[0] - dot * a[0], seed[1] - dot * a[1], seed[2] - dot * a[2]];
        let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
        let e2 = [
            a[1] * e1[2] - a[2] * e1[1],
            a[2] * e1[0] - a[0] * e1[2],
            a[0] * e1[1] - a[1] * e1[0],
        ];
        let mut numeric = [0.0; 3];
        for e in [e1, e2] {
            let plus = sphere_exp(&p, &[h * e[0], h * e[1], h * e[2]]);
            let minus = sphere_exp(&p, &[-h * e[0], -h * e[1], -h * e[2]]);
            let slope = (sphere_energy(&plus) - sphere_energy(&minus)) / (2.0 * h);
            for i in 0..3 {
                numeric[i] += slope * e[i];
            }
        }
        worst[0] = worst[0].max(relative_defect(&g, &numeric));
    }

    let rd = ReactionDiffusion::new(50).map_err(|e| e.to_string())?;
    let spacing = 1.0 / 51.0;
    let h = 1e-6;
    for _ in 0..100 {
        let raw = rd.sample_witness(&mut rng);
        let p = GridFunction::new(raw.values().iter().map(|v| 0.9 * v).collect()).map_err(|e| e.to_string())?;
        let g = rd_grad(&p);
        let numeric: Vec<f64> = (0..50)
            .map(|i| {
                let mut plus = p.values().to_vec();
                let mut minus = p.values().to_vec();
                plus[i] += h;
                minus[i] -= h;
                let fp = rd_energy(&GridFunction::new(plus).expect("same size"));
                let fm = rd_energy(&GridFunction::new(minus).expect("same size"));
                (fp - fm) / (2.0 * h) / spacing
            })
            .collect();
        worst[1] = worst[1].max(relative_defect(&g, &numeric));
    }

    let icdf = AggregationDiffusion::new(50).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let p = icdf.sample_witness(&mut rng);
        let g = icdf_grad(&p).map_err(|e| e.to_string())?;
        let numeric: Vec<f64> = (0..50)
            .map(|i| {
                let mut plus = p.values().to_vec();
                let mut minus = p.values().to_vec();
                plus[i] += h;
                minus[i] -= h;
                let fp = icdf_energy(&InverseCdf::new(plus).expect("still monotone"));
                let fm = icdf_energy(&InverseCdf::new(minus).expect("still monotone"));
                (fp - fm) / (2.0 * h) * 50.0
            })
            .collect();
        worst[2] = worst[2].max(relative_defect(&g, &numeric));
    }

    let summary = format!("sphere {:e}, rd {:e}, icdf {:e}", worst[0], worst[1], worst[2]);
    if worst.iter().all(|w| *w <= 1e-6) {
        Ok(summary)
    } else {
        Err(summary)
    }
}

struct Verdict {
    passed: bool,
}

fn report(number: u32, name: &str, limit: Duration, run: impl FnOnce() -> Outcome) -> Verdict {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let (passed, detail) = match outcome {
        Ok(detail) if elapsed <= limit => (true, detail),
        Ok(detail) => (false, format!("{detail}; took longer than {limit:?}")),
        Err(detail) => (false, detail),
    };
    println!(
        "criterion {number} [{name}] {} ({detail}; {:.2}s)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    Verdict { passed }
}

fn main() -> ExitCode {
    let mut ledger = InequalityLedger::default();
    let secs = Duration::from_secs;
    let verdicts = [
        report(1, "halfline exactness", secs(1), criterion_1),
        report(2, "halfline order", secs(10), || criterion_2(&mut ledger)),
        report(3, "sphere convergence", secs(120), || criterion_3(&mut ledger)),
        report(4, "obstacle convergence", secs(900), || criterion_4(&mut ledger)),
        report(5, "aggregation-diffusion convergence", secs(1200), || criterion_5(&mut ledger)),
        report(6, "inequality suite", secs(u64::MAX / 4), || criterion_6(&ledger)),
        report(7, "hilbert segment identity", secs(5), criterion_7),
        report(8, "closed-form steps", secs(10), criterion_8),
        report(9, "gradient checks", secs(10), criterion_9),
    ];
    if verdicts.iter().all(|v| v.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
