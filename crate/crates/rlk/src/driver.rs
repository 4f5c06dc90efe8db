//! Step-loop driver: RK4 startup, one scheme step per node, overflow
//! detection, and the one-evaluation-per-step bookkeeping.
//!
//! A k-step scheme needs k records before its recurrence applies. The first
//! k−1 states come from RK4 with the same step h (order 4 ≥ k keeps the
//! scheme's order); every accepted node stores exactly one (a, b) evaluation,
//! reused for both the next coefficients and the RK4 first stage.

use crate::error::{Error, Result};
use crate::history::{History, Record};
use crate::problems::SplitProblem;
use crate::schemes::{rk4_step_with_k1, scheme_step, SchemeFamily, SchemeSpec};

/// States with any non-finite component or max-norm beyond this bound count
/// as overflowed; the critical-time-step search is defined by this signal.
pub const OVERFLOW_BOUND: f64 = 1e6;

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// Overflow detected while producing this node index; the trajectory is
    /// truncated to the last finite node.
    Overflow { step: usize },
}

/// Fixed-step trajectory on t_n = n h.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn overflowed(&self) -> bool {
        matches!(self.termination, Termination::Overflow { .. })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    /// Column of the last (stiffest) component, the membrane potential for
    /// membrane problems.
    pub fn potential(&self) -> Vec<f64> {
        self.states.iter().map(|y| *y.last().unwrap()).collect()
    }
}

fn state_ok(y: &[f64]) -> bool {
    y.iter().all(|v| v.is_finite() && v.abs() <= OVERFLOW_BOUND)
}

fn eval_ok(a: &[f64], b: &[f64]) -> bool {
    a.iter().chain(b.iter()).all(|v| v.is_finite())
}

fn plan_steps(spec: &SchemeSpec, h: f64, t_end: f64) -> Result<usize> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
    }
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "horizon T = {t_end} must be positive"
        )));
    }
    spec.validate()?;
    let n_steps = (t_end / h + 1e-9).floor() as usize;
    let need = spec.required_history();
    if n_steps < need {
        return Err(Error::InvalidArgument(format!(
            "horizon T = {t_end} shorter than {need} steps of h = {h}"
        )));
    }
    Ok(n_steps)
}

/// Integrate the problem from its initial state to T with fixed step h.
///
/// Terminates early with an overflow marker if any state goes non-finite or
/// beyond [`OVERFLOW_BOUND`] in max norm; overflow is a result, not an error,
/// so the critical-step search can bracket it.
pub fn integrate(
    problem: &SplitProblem,
    spec: &SchemeSpec,
    h: f64,
    t_end: f64,
) -> Result<Trajectory> {
    integrate_inner(problem, spec, h, t_end, None)
}

/// Same as [`integrate`], but after the RK4 startup every history record is
/// offset by `delta` in every component (with (a, b) re-evaluated at the
/// shifted states). Exercises stability under startup perturbation.
pub fn integrate_perturbed(
    problem: &SplitProblem,
    spec: &SchemeSpec,
    h: f64,
    t_end: f64,
    delta: f64,
) -> Result<Trajectory> {
    integrate_inner(problem, spec, h, t_end, Some(delta))
}

fn integrate_inner(
    problem: &SplitProblem,
    spec: &SchemeSpec,
    h: f64,
    t_end: f64,
    startup_delta: Option<f64>,
) -> Result<Trajectory> {
    let n_steps = plan_steps(spec, h, t_end)?;
    if spec.family == SchemeFamily::Rk4Reference {
        return integrate_rk4(problem, h, n_steps);
    }

    let k = spec.required_history();
    let dim = problem.dim();
    let mut traj = Trajectory {
        h,
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        termination: Termination::Completed,
    };
    let mut hist: History<f64> = History::new(k);

    // startup: node 0 plus k-1 RK4 steps, one stored evaluation per node
    let y0 = problem.initial_state().to_vec();
    if !state_ok(&y0) {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    push_node(problem, &mut hist, &mut traj, 0.0, y0)?;
    for j in 0..k - 1 {
        let t = j as f64 * h;
        let (y_next, ok) = {
            let rec = hist.newest();
            let k1: Vec<f64> = (0..dim).map(|i| rec.a[i] * rec.y[i] + rec.b[i]).collect();
            let y_next = rk4_step_with_k1(|t, y| problem.rhs(t, y), t, &rec.y, h, &k1);
            let ok = state_ok(&y_next);
            (y_next, ok)
        };
        if !ok {
            traj.termination = Termination::Overflow { step: j + 1 };
            return Ok(traj);
        }
        if !push_node(problem, &mut hist, &mut traj, (j + 1) as f64 * h, y_next)? {
            traj.termination = Termination::Overflow { step: j + 1 };
            return Ok(traj);
        }
    }

    if let Some(delta) = startup_delta {
        if delta != 0.0 {
            perturb_history(problem, &mut hist, &mut traj, delta);
        }
    }

    // multistep phase: nodes k..n_steps
    for n in (k - 1)..n_steps {
        let y_next = scheme_step(spec, &hist, h)?;
        if !state_ok(&y_next) {
            traj.termination = Termination::Overflow { step: n + 1 };
            return Ok(traj);
        }
        let t_next = (n + 1) as f64 * h;
        if n + 1 < n_steps {
            if !push_node(problem, &mut hist, &mut traj, t_next, y_next)? {
                traj.termination = Termination::Overflow { step: n + 1 };
                return Ok(traj);
            }
        } else {
            // final node: nothing steps from here, skip its evaluation
            traj.times.push(t_next);
            traj.states.push(y_next);
        }
    }
    Ok(traj)
}

/// Evaluate (a, b) at the node, append to history and trajectory. Returns
/// false when the evaluation itself is non-finite.
fn push_node(
    problem: &SplitProblem,
    hist: &mut History<f64>,
    traj: &mut Trajectory,
    t: f64,
    y: Vec<f64>,
) -> Result<bool> {
    let dim = problem.dim();
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    problem.eval_into(t, &y, &mut a, &mut b);
    traj.times.push(t);
    traj.states.push(y.clone());
    if !eval_ok(&a, &b) {
        return Ok(false);
    }
    hist.push(Record { t, y, a, b })?;
    Ok(true)
}

fn perturb_history(
    problem: &SplitProblem,
    hist: &mut History<f64>,
    traj: &mut Trajectory,
    delta: f64,
) {
    let dim = problem.dim();
    let records: Vec<Record<f64>> = hist.iter().cloned().collect();
    hist.clear();
    for (idx, rec) in records.into_iter().enumerate() {
        let y: Vec<f64> = rec.y.iter().map(|v| v + delta).collect();
        let mut a = vec![0.0; dim];
        let mut b = vec![0.0; dim];
        problem.eval_into(rec.t, &y, &mut a, &mut b);
        traj.states[idx] = y.clone();
        hist.push(Record { t: rec.t, y, a, b }).expect("uniform grid");
    }
}

fn integrate_rk4(problem: &SplitProblem, h: f64, n_steps: usize) -> Result<Trajectory> {
    let mut traj = Trajectory {
        h,
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        termination: Termination::Completed,
    };
    let mut y = problem.initial_state().to_vec();
    if !state_ok(&y) {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    traj.times.push(0.0);
    traj.states.push(y.clone());
    for n in 0..n_steps {
        let t = n as f64 * h;
        let k1 = problem.rhs(t, &y);
        y = rk4_step_with_k1(|t, y| problem.rhs(t, y), t, &y, h, &k1);
        traj.times.push((n + 1) as f64 * h);
        traj.states.push(y.clone());
        if !state_ok(&y) {
            traj.termination = Termination::Overflow { step: n + 1 };
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// Evaluations [`integrate`] performs for a k-step scheme over `n_steps`
/// accepted steps: one per stored node plus three extra RK4 stage calls per
/// startup step, with no evaluation at the final node.
pub fn expected_eval_count(spec: &SchemeSpec, n_steps: usize) -> u64 {
    match spec.family {
        SchemeFamily::Rk4Reference => 4 * n_steps as u64,
        _ => {
            let k = spec.required_history() as u64;
            n_steps as u64 + 3 * k - 3
        }
    }
}
