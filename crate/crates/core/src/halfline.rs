//! The flow of `E(u) = max(u, 0)` on the real line started at `u0 = 1`.
//!
//! The exact solution `max(1 - t, 0)` has a kink at `t = 1`. BDF2 reproduces
//! it exactly before the kink and then settles at a negative value of order
//! `tau`, so the scheme converges with order one only.

use crate::error::{FlowError, Result};
use crate::flow::{interval_index, step_count, Startup, Trajectory};
use crate::model::Scheme;

/// Closed-form BDF2 step for `max(u, 0)` with history `u^{k-2}`, `u^{k-1}`.
pub fn exact_bdf2_step(u_km2: f64, u_km1: f64, tau: f64) -> f64 {
    // increment form of (4/3) u_{k-1} - (1/3) u_{k-2}; keeps rounding from accumulating
    let increment = u_km1 - u_km2;
    let free = u_km1 + increment / 3.0;
    let shifted = u_km1 + (increment - 2.0 * tau) / 3.0;
    if shifted > 0.0 {
        shifted
    } else if free < 0.0 {
        free
    } else {
        0.0
    }
}

/// Exact flow from `u0 = 1`.
pub fn true_solution(t: f64) -> f64 {
    if t <= 1.0 {
        1.0 - t
    } else {
        0.0
    }
}

/// Smallest `k >= 1` with `k tau >= 1`.
pub fn kink_index(tau: f64) -> usize {
    interval_index(1.0, tau).max(1)
}

/// Whether the step onto the kink lands exactly on zero, which holds iff
/// `1 - N tau` lies in `[-2 tau / 3, 0]` for `N` the kink index.
pub fn third_case_holds(tau: f64) -> bool {
    let n = kink_index(tau);
    let r = 1.0 - n as f64 * tau;
    let slack = 1e-9 * tau;
    (-2.0 / 3.0 * tau - slack..=slack).contains(&r)
}

/// Closed form `-(1 - 3^{-(k - N)}) u_pre / 2` of the states after the kink,
/// where `u_pre = u^{N-1}` is the last positive state.
pub fn post_kink_asymptote(k: usize, n_tau: usize, u_pre: f64, tau: f64) -> Result<f64> {
    if k < n_tau {
        return Err(FlowError::PreconditionViolated(format!("index {k} precedes the kink {n_tau}")));
    }
    let slack = 1e-9 * tau;
    if !(tau / 3.0 - slack..=tau + slack).contains(&u_pre) {
        return Err(FlowError::PreconditionViolated(format!(
            "last positive state {u_pre} outside [tau/3, tau] for tau = {tau}"
        )));
    }
    let decay = 3f64.powi(-((k - n_tau) as i32));
    Ok(-0.5 * (1.0 - decay) * u_pre)
}

/// BDF2 trajectory from the history pair `(1 + tau, 1)` computed with the
/// closed-form recursion.
pub fn exact_trajectory(tau: f64, horizon: f64) -> Result<Trajectory<f64>> {
    if !(tau > 0.0) {
        return Err(FlowError::PreconditionViolated(format!("step size {tau} must be positive")));
    }
    let n = step_count(horizon, tau);
    if n == 0 {
        return Err(FlowError::PreconditionViolated(format!(
            "horizon {horizon} is shorter than one step {tau}"
        )));
    }
    let prehistory = 1.0 + tau;
    let mut states = Vec::with_capacity(n + 1);
    states.push(1.0);
    let mut two_back = prehistory;
    for k in 1..=n {
        let next = exact_bdf2_step(two_back, states[k - 1], tau);
        two_back = states[k - 1];
        states.push(next);
    }
    Trajectory::from_parts(Scheme::Bdf2, tau, horizon, Startup::Pair(prehistory), states)
}

/// `|u_*(t) - u_tau(t)| / tau` for the exact recursion.
pub fn scaled_residual(tau: f64, t: f64) -> Result<f64> {
    let traj = exact_trajectory(tau, t)?;
    Ok((true_solution(t) - traj.interpolate(t)?).abs() / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{bdf2_step, inner_tolerance};
    use crate::model::EnergyModel;
    use crate::spaces::line::{LineEnergy, RealLine};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_examples() {
        assert!((exact_bdf2_step(1.01, 1.0, 0.01) - 0.99).abs() < 1e-15);
        assert_eq!(exact_bdf2_step(-1.0, -1.0, 0.1), -1.0);
        // (4/3) 0.05 - (1/3) 0.1 = 1/30 lies in [0, 2 tau / 3]
        assert_eq!(exact_bdf2_step(0.1, 0.05, 0.1), 0.0);
    }

    #[test]
    fn true_solution_examples() {
        assert_eq!(true_solution(0.0), 1.0);
        assert_eq!(true_solution(0.5), 0.5);
        assert_eq!(true_solution(3.0), 0.0);
    }

    #[test]
    fn asymptote_examples() {
        let tau = 0.01;
        assert_eq!(post_kink_asymptote(100, 100, tau, tau).unwrap(), 0.0);
        assert!((post_kink_asymptote(101, 100, tau, tau).unwrap() + tau / 3.0).abs() < 1e-17);
        let far = post_kink_asymptote(10_000, 100, 0.5 * tau, tau).unwrap();
        assert!((far + 0.25 * tau).abs() < 1e-17);
        assert!(post_kink_asymptote(101, 100, 2.0 * tau, tau).is_err());
        assert!(post_kink_asymptote(99, 100, tau, tau).is_err());
    }

    #[test]
    fn exact_before_the_kink() {
        for m in [10usize, 100, 1000] {
            let tau = 1.0 / m as f64;
            let traj = exact_trajectory(tau, 1.0).unwrap();
            for k in 0..m {
                assert!((traj.state(k) - (1.0 - k as f64 * tau)).abs() < 1e-14, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn recursion_matches_closed_form_after_the_kink() {
        for m in [10usize, 100, 1000] {
            let tau = 1.0 / m as f64;
            assert!(third_case_holds(tau));
            let n = kink_index(tau);
            let traj = exact_trajectory(tau, 2.0).unwrap();
            let u_pre = *traj.state(n - 1);
            for k in n..=traj.steps() {
                let closed = post_kink_asymptote(k, n, u_pre, tau).unwrap();
                assert!((traj.state(k) - closed).abs() < 1e-14, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn residual_is_first_order() {
        for tau in [1e-2, 1e-3, 1e-4] {
            assert!(third_case_holds(tau));
            let r = scaled_residual(tau, 2.0).unwrap();
            assert!((1.0 / 6.0 - 0.02..=0.5 + 0.02).contains(&r), "tau={tau} residual={r}");
        }
    }

    #[test]
    fn third_case_detection() {
        // tau = 0.3: N = 4, 1 - 1.2 = -0.2 lies in [-0.2, 0]
        assert!(third_case_holds(0.3));
        // tau = 0.4: N = 3, 1 - 1.2 = -0.2 lies in [-4/15, 0]
        assert!(third_case_holds(0.4));
        // tau = 0.45: N = 3, 1 - 1.35 = -0.35 < -0.3
        assert!(!third_case_holds(0.45));
    }

    #[test]
    fn generic_solver_matches_closed_form() {
        let model = RealLine::new(LineEnergy::HalfLine);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..1000 {
            let u: f64 = rng.gen_range(-2.0..2.0);
            let v: f64 = rng.gen_range(-2.0..2.0);
            let tau: f64 = rng.gen_range(1e-3..0.5);
            let generic = bdf2_step(&model, tau, &u, &v).unwrap();
            let exact = exact_bdf2_step(u, v, tau);
            let eps = inner_tolerance(model.energy(&v));
            assert!((generic - exact).abs() <= 10.0 * eps, "u={u} v={v} tau={tau}: {generic} vs {exact}");
        }
    }
}
