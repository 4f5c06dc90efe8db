//! Split ODE problems y' = a(t,y)∘y + b(t,y) with a diagonal stabilizer a.
//!
//! A problem owns its evaluation callback, initial state and horizon, and
//! counts every (a, b) evaluation so tests can assert the one-evaluation-per-
//! step contract of the driver.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

type EvalFn = dyn Fn(f64, &[f64], &mut [f64], &mut [f64]) + Send + Sync;

/// A stiff split problem: diagonal stabilizer, remainder, initial state,
/// horizon. Evaluation callbacks must be pure and reentrant.
pub struct SplitProblem {
    name: String,
    dim: usize,
    y0: Vec<f64>,
    t_end: f64,
    units: Vec<String>,
    eval_fn: Arc<EvalFn>,
    evals: AtomicU64,
}

impl Clone for SplitProblem {
    fn clone(&self) -> Self {
        SplitProblem {
            name: self.name.clone(),
            dim: self.dim,
            y0: self.y0.clone(),
            t_end: self.t_end,
            units: self.units.clone(),
            eval_fn: Arc::clone(&self.eval_fn),
            evals: AtomicU64::new(0),
        }
    }
}

impl std::fmt::Debug for SplitProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("t_end", &self.t_end)
            .finish()
    }
}

impl SplitProblem {
    pub fn new<F>(name: impl Into<String>, y0: Vec<f64>, t_end: f64, eval: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64], &mut [f64]) + Send + Sync + 'static,
    {
        let dim = y0.len();
        SplitProblem {
            name: name.into(),
            dim,
            y0,
            t_end,
            units: vec!["-".to_string(); dim],
            eval_fn: Arc::new(eval),
            evals: AtomicU64::new(0),
        }
    }

    pub fn with_units(mut self, units: &[&str]) -> Self {
        assert_eq!(units.len(), self.dim);
        self.units = units.iter().map(|u| u.to_string()).collect();
        self
    }

    pub fn with_horizon(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_initial_state(mut self, y0: Vec<f64>) -> Self {
        assert_eq!(y0.len(), self.dim);
        self.y0 = y0;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.y0
    }

    pub fn horizon(&self) -> f64 {
        self.t_end
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    /// Evaluate (a, b) at (t, y) into the provided buffers. Counts one call.
    pub fn eval_into(&self, t: f64, y: &[f64], a: &mut [f64], b: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim);
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.eval_fn)(t, y, a, b);
    }

    /// Evaluate (a, b) at (t, y). Counts one call.
    pub fn eval(&self, t: f64, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        self.eval_into(t, y, &mut a, &mut b);
        (a, b)
    }

    /// Full right-hand side f = a∘y + b. Counts one call.
    pub fn rhs(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let (a, b) = self.eval(t, y);
        (0..self.dim).map(|i| a[i] * y[i] + b[i]).collect()
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_eval_count(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    /// The same problem with the stabilizer folded into the remainder
    /// (a ≡ 0), turning every exponential scheme into its plain Adams
    /// counterpart.
    pub fn unstabilized(&self) -> SplitProblem {
        let inner = Arc::clone(&self.eval_fn);
        let dim = self.dim;
        SplitProblem::new(
            format!("{}-unstabilized", self.name),
            self.y0.clone(),
            self.t_end,
            move |t, y, a, b| {
                let mut ai = vec![0.0; dim];
                inner(t, y, &mut ai, b);
                for i in 0..dim {
                    b[i] += ai[i] * y[i];
                    a[i] = 0.0;
                }
            },
        )
    }
}

/// Exact solution of the manufactured smooth problem.
pub fn manufactured_smooth_exact(t: f64) -> f64 {
    t.sin().exp()
}

/// Scalar manufactured problem with closed-form solution y*(t) = exp(sin t):
/// a(t) = −(2 + cos t), b(t) = y*'(t) − a(t) y*(t). Mildly stabilized, smooth,
/// used for convergence-order verification. y0 = 1, T = 6.
pub fn manufactured_smooth() -> SplitProblem {
    SplitProblem::new("manufactured-smooth", vec![1.0], 6.0, |t, _y, a, b| {
        let ystar = manufactured_smooth_exact(t);
        let astar = -(2.0 + t.cos());
        a[0] = astar;
        b[0] = t.cos() * ystar - astar * ystar;
    })
}

/// Two-component membrane-like problem with tunable gate stiffness: one
/// gating variable relaxing toward w_∞(v) at rate 1/τ(v) with
/// τ(v) = τ_min + 1/(1+v²), and a potential driven by −w(v−E) plus a square
/// stimulation pulse on t ∈ [0, 1]. Layout (w, v), potential last.
pub fn manufactured_membrane(tau_min: f64) -> SplitProblem {
    assert!(tau_min > 0.0, "gate time constant must be positive");
    let rest = -1.0;
    SplitProblem::new(
        "manufactured-membrane",
        vec![0.0, -0.5],
        10.0,
        move |t, y, a, b| {
            let (w, v) = (y[0], y[1]);
            let w_inf = 1.0 / (1.0 + (-4.0 * v).exp());
            let tau = tau_min + 1.0 / (1.0 + v * v);
            let stim = if (0.0..1.0).contains(&t) { 2.0 } else { 0.0 };
            a[0] = -1.0 / tau;
            a[1] = 0.0;
            b[0] = w_inf / tau;
            b[1] = -w * (v - rest) + stim;
        },
    )
    .with_units(&["-", "mV"])
}

/// Dahlquist test problem y' = λy split into a = θλ, b = (1−θ)λ y.
pub fn theta_split(lambda: f64, theta: f64) -> SplitProblem {
    // no commas in the name: it lands in CSV columns
    SplitProblem::new(
        format!("theta-split(lambda={lambda}; theta={theta})"),
        vec![1.0],
        10.0,
        move |_t, y, a, b| {
            a[0] = theta * lambda;
            b[0] = (1.0 - theta) * lambda * y[0];
        },
    )
}

/// Membrane state split into its (gates, concentrations, potential) layout;
/// the potential is always the last and stiffest component.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub gates: Vec<f64>,
    pub concentrations: Vec<f64>,
    pub potential: f64,
}

impl MembraneState {
    pub fn from_flat(p: usize, q: usize, y: &[f64]) -> Result<Self> {
        if y.len() != p + q + 1 {
            return Err(Error::InvalidArgument(format!(
                "state length {} does not match p+q+1 = {}",
                y.len(),
                p + q + 1
            )));
        }
        Ok(MembraneState {
            gates: y[..p].to_vec(),
            concentrations: y[p..p + q].to_vec(),
            potential: y[p + q],
        })
    }

    pub fn into_flat(self) -> Vec<f64> {
        let mut y = self.gates;
        y.extend_from_slice(&self.concentrations);
        y.push(self.potential);
        y
    }
}
