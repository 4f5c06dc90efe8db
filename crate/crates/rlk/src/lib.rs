//! Exponential multistep integrators for stiff split ODEs
//! y' = a(t,y)∘y + b(t,y) with a diagonal stabilizer a.
//!
//! The crate provides
//!
//! - [`phi`]: stable evaluation of the φ functions (φ_0 = exp,
//!   φ_{j+1}(z) = (φ_j(z) − 1/j!)/z) for real and complex scalars,
//! - [`schemes`]: Rush-Larsen steppers of orders 2-4, exponential-Adams
//!   steppers of orders 2-4, and the classical RK4 reference,
//! - [`driver`]: the fixed-step loop with RK4 startup and overflow detection,
//! - [`problems`]: manufactured smooth and membrane-like fixtures plus the
//!   θ-split Dahlquist test problem,
//! - [`ionic`]: Hodgkin-Huxley-style membrane models loaded from a parameter
//!   document (the shipped data file carries the ventricular myocyte model of
//!   Beeler and Reuter),
//! - [`stability`]: Dahlquist stability grids, real-axis crossings and the
//!   companion-matrix spectral radius behind them,
//! - [`harness`]: convergence studies against RK4 references with the
//!   piecewise-cubic projection error metric, and the critical-time-step
//!   bisection.
//!
//! ```
//! use rlk::{integrate, manufactured_smooth, manufactured_smooth_exact, SchemeSpec};
//!
//! let problem = manufactured_smooth();
//! let scheme = SchemeSpec::rl(3).unwrap();
//! let traj = rlk::integrate(&problem, &scheme, 1e-2, 6.0).unwrap();
//! let err = (traj.last_state()[0] - manufactured_smooth_exact(6.0)).abs();
//! assert!(err < 1e-6);
//! ```

pub mod driver;
pub mod error;
pub mod harness;
pub mod history;
pub mod ionic;
pub mod phi;
pub mod problems;
pub mod schemes;
pub mod stability;

mod polyroot;
mod scalar;

pub use driver::{integrate, integrate_perturbed, Termination, Trajectory, OVERFLOW_BOUND};
pub use error::{Error, Result};
pub use harness::{
    convergence_study, critical_dt, error_metric, project_cubic, reference_solution,
    ConvergenceReport, CriticalDt, CriticalDtReport, ReferenceSolution,
};
pub use history::{History, Record};
pub use ionic::{br_model, br_model_from_path, MembraneModelDoc};
pub use phi::{phi, phi_diag};
pub use problems::{
    manufactured_membrane, manufactured_smooth, manufactured_smooth_exact, theta_split,
    MembraneState, SplitProblem,
};
pub use scalar::Scalar;
pub use schemes::{
    eab_gamma, eab_step, rk4_step, rl_coefficients, rl_step, scheme_step, SchemeFamily, SchemeSpec,
};
pub use stability::{
    probe_recurrence, real_axis_crossing, rho_at, scan, spectral_radius, Crossing, GridRect,
    RecurrenceMatrix, StabilityGrid,
};
