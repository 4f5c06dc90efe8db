//! Time-stepping engines.
//!
//! Rush-Larsen schemes advance with a single φ_1 evaluation,
//!
//! ```text
//! y_{n+1} = y_n + h φ_1(α_n h) (α_n y_n + β_n),
//! ```
//!
//! where the order-k coefficient pair (α_n, β_n) combines the k stored
//! stabilizer/remainder evaluations. Exponential-Adams schemes re-center the
//! equation at a_n each step and integrate the interpolated remainder exactly
//! through φ_1..φ_k. Both step maps work elementwise on diagonal stabilizers
//! and are generic over real and complex scalars so the Dahlquist prober can
//! reuse them verbatim.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::History;
use crate::phi::phi;
use crate::scalar::Scalar;

/// Scheme families the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeFamily {
    #[serde(rename = "rl")]
    RushLarsen,
    #[serde(rename = "eab")]
    ExponentialAdams,
    #[serde(rename = "rk4")]
    Rk4Reference,
}

/// A scheme selection: family, order, and whether the constant-stabilizer
/// simplification of the β coefficients applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub family: SchemeFamily,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub constant_a: bool,
}

fn default_order() -> usize {
    4
}

impl SchemeSpec {
    pub fn rl(order: usize) -> Result<Self> {
        let spec = SchemeSpec {
            family: SchemeFamily::RushLarsen,
            order,
            constant_a: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn eab(order: usize) -> Result<Self> {
        let spec = SchemeSpec {
            family: SchemeFamily::ExponentialAdams,
            order,
            constant_a: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Classical RK4, used as reference generator and startup engine.
    pub fn rk4_reference() -> Self {
        SchemeSpec {
            family: SchemeFamily::Rk4Reference,
            order: 4,
            constant_a: false,
        }
    }

    /// Opt into the simplified β of the constant-stabilizer case.
    pub fn with_constant_stabilizer(mut self) -> Self {
        self.constant_a = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            SchemeFamily::Rk4Reference => {
                if self.order != 4 {
                    return Err(Error::InvalidArgument(format!(
                        "rk4 reference is fixed at order 4, got {}",
                        self.order
                    )));
                }
            }
            _ => {
                if !(2..=4).contains(&self.order) {
                    return Err(Error::InvalidArgument(format!(
                        "{} order must be 2, 3 or 4, got {}",
                        self.family_label(),
                        self.order
                    )));
                }
            }
        }
        Ok(())
    }

    /// Records the stepper must see before it can advance. RK4 needs only the
    /// current state.
    pub fn required_history(&self) -> usize {
        match self.family {
            SchemeFamily::Rk4Reference => 1,
            _ => self.order,
        }
    }

    pub fn family_label(&self) -> &'static str {
        match self.family {
            SchemeFamily::RushLarsen => "rl",
            SchemeFamily::ExponentialAdams => "eab",
            SchemeFamily::Rk4Reference => "rk4",
        }
    }

    /// Short identifier like `rl3`, `eab4`, `rk4`.
    pub fn label(&self) -> String {
        match self.family {
            SchemeFamily::Rk4Reference => "rk4".to_string(),
            _ => format!("{}{}", self.family_label(), self.order),
        }
    }
}

/// Adams-Bashforth-style combination weights, newest first, as integer
/// numerators over a common denominator. Numerators sum to the denominator,
/// so constant data is reproduced up to a single rounding.
pub(crate) fn combination_weights(k: usize) -> (&'static [f64], f64) {
    match k {
        2 => (&[3.0, -1.0], 2.0),
        3 => (&[23.0, -16.0, 5.0], 12.0),
        4 => (&[55.0, -59.0, 37.0, -9.0], 24.0),
        _ => unreachable!("order checked by callers"),
    }
}

/// Backward-difference stencils (newest first) for the scaled derivatives of
/// the interpolated remainder: entry d-1 approximates h^d f^(d) at t_n.
pub(crate) fn derivative_stencils(k: usize) -> &'static [(&'static [f64], f64)] {
    match k {
        2 => &[(&[1.0, -1.0], 1.0)],
        3 => &[(&[3.0, -4.0, 1.0], 2.0), (&[1.0, -2.0, 1.0], 1.0)],
        4 => &[
            (&[11.0, -18.0, 9.0, -2.0], 6.0),
            (&[2.0, -5.0, 4.0, -1.0], 1.0),
            (&[1.0, -3.0, 3.0, -1.0], 1.0),
        ],
        _ => unreachable!("order checked by callers"),
    }
}

fn check_multistep_args<S: Scalar>(k: usize, hist: &History<S>, h: f64) -> Result<usize> {
    if !(2..=4).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "multistep order must be 2, 3 or 4, got {k}"
        )));
    }
    if hist.len() < k {
        return Err(Error::InsufficientHistory {
            need: k,
            got: hist.len(),
        });
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
    }
    if let Some(s) = hist.spacing() {
        if (s - h).abs() > 1e-9 * h {
            return Err(Error::InvalidArgument(format!(
                "history spacing {s} does not match step {h}"
            )));
        }
    }
    Ok(hist.newest().y.len())
}

fn weighted_records<S: Scalar, F>(hist: &History<S>, k: usize, dim: usize, field: F) -> Vec<S>
where
    F: Fn(&crate::history::Record<S>) -> &[S],
{
    let (nums, den) = combination_weights(k);
    let mut out = vec![S::zero(); dim];
    for (age, &w) in nums.iter().enumerate() {
        let v = field(hist.ago(age));
        for i in 0..dim {
            out[i] = out[i] + v[i] * w;
        }
    }
    for x in &mut out {
        *x = *x / den;
    }
    out
}

/// Order-k Rush-Larsen coefficient pair (α_n, β_n) from the stored history.
///
/// With `constant_a` set, α_n is taken as a_n directly and β_n uses the
/// simplified cross terms valid when the stabilizer does not vary.
pub fn rl_coefficients<S: Scalar>(
    k: usize,
    constant_a: bool,
    hist: &History<S>,
    h: f64,
) -> Result<(Vec<S>, Vec<S>)> {
    let dim = check_multistep_args(k, hist, h)?;
    let alpha = if constant_a {
        hist.newest().a.clone()
    } else {
        weighted_records(hist, k, dim, |r| &r.a)
    };
    let mut beta = weighted_records(hist, k, dim, |r| &r.b);

    let q = h / 12.0;
    match (k, constant_a) {
        (2, _) => {}
        (3, false) => {
            let (r0, r1) = (hist.ago(0), hist.ago(1));
            for i in 0..dim {
                beta[i] = beta[i] + (r0.a[i] * r1.b[i] - r1.a[i] * r0.b[i]) * q;
            }
        }
        (3, true) => {
            let (r0, r1) = (hist.ago(0), hist.ago(1));
            for i in 0..dim {
                beta[i] = beta[i] - r0.a[i] * (r0.b[i] - r1.b[i]) * q;
            }
        }
        (4, false) => {
            let (r0, r1, r2) = (hist.ago(0), hist.ago(1), hist.ago(2));
            for i in 0..dim {
                let lagged_b = r1.b[i] * 3.0 - r2.b[i];
                let lagged_a = r1.a[i] * 3.0 - r2.a[i];
                beta[i] = beta[i] + (r0.a[i] * lagged_b - lagged_a * r0.b[i]) * q;
            }
        }
        (4, true) => {
            let (r0, r1, r2) = (hist.ago(0), hist.ago(1), hist.ago(2));
            for i in 0..dim {
                beta[i] = beta[i] - r0.a[i] * (r0.b[i] * 2.0 - r1.b[i] * 3.0 + r2.b[i]) * q;
            }
        }
        _ => unreachable!(),
    }
    Ok((alpha, beta))
}

/// One Rush-Larsen step: y_{n+1} = y_n + h φ_1(α_n h)∘(α_n∘y_n + β_n).
pub fn rl_step<S: Scalar>(
    k: usize,
    constant_a: bool,
    hist: &History<S>,
    h: f64,
) -> Result<Vec<S>> {
    let (alpha, beta) = rl_coefficients(k, constant_a, hist, h)?;
    let yn = &hist.newest().y;
    let mut out = Vec::with_capacity(yn.len());
    for i in 0..yn.len() {
        let p1 = phi(1, alpha[i] * h)?;
        out.push(yn[i] + p1 * (alpha[i] * yn[i] + beta[i]) * h);
    }
    Ok(out)
}

/// Scaled interpolation coefficients γ_1..γ_k of the re-centered remainder.
///
/// `c_hist` holds (c_{n-k+1}, ..., c_n) oldest first, with
/// c_j = (a_j − a_n)∘y_j + b_j. γ_1 is c_n itself; γ_{d+1} applies the order-d
/// backward-difference stencil, i.e. γ_{d+1} = h^d p^(d)(t_n) for the
/// degree-(k−1) interpolant p of the c values.
pub fn eab_gamma<S: Scalar>(k: usize, c_hist: &[Vec<S>]) -> Result<Vec<Vec<S>>> {
    if !(2..=4).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "multistep order must be 2, 3 or 4, got {k}"
        )));
    }
    if c_hist.len() != k {
        return Err(Error::InvalidArgument(format!(
            "need {k} remainder records, got {}",
            c_hist.len()
        )));
    }
    let dim = c_hist[0].len();
    let mut gamma = Vec::with_capacity(k);
    gamma.push(c_hist[k - 1].clone());
    for (nums, den) in derivative_stencils(k) {
        let mut g = vec![S::zero(); dim];
        for (age, &w) in nums.iter().enumerate() {
            let c = &c_hist[k - 1 - age];
            for i in 0..dim {
                g[i] = g[i] + c[i] * w;
            }
        }
        if *den != 1.0 {
            for x in &mut g {
                *x = *x / *den;
            }
        }
        gamma.push(g);
    }
    Ok(gamma)
}

/// One exponential-Adams step:
/// y_{n+1} = y_n + h (φ_1(a_n h)∘(a_n∘y_n + γ_1) + Σ_{j=2..k} φ_j(a_n h)∘γ_j).
pub fn eab_step<S: Scalar>(k: usize, hist: &History<S>, h: f64) -> Result<Vec<S>> {
    let dim = check_multistep_args(k, hist, h)?;
    let newest = hist.newest();
    let an = &newest.a;

    let mut c_hist = Vec::with_capacity(k);
    for age in (0..k).rev() {
        let r = hist.ago(age);
        let mut c = vec![S::zero(); dim];
        for i in 0..dim {
            c[i] = (r.a[i] - an[i]) * r.y[i] + r.b[i];
        }
        c_hist.push(c);
    }
    let gamma = eab_gamma(k, &c_hist)?;

    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        let zh = an[i] * h;
        let mut acc = phi(1, zh)? * (an[i] * newest.y[i] + gamma[0][i]);
        for j in 2..=k {
            acc = acc + phi(j, zh)? * gamma[j - 1][i];
        }
        out.push(newest.y[i] + acc * h);
    }
    Ok(out)
}

/// One multistep step of the selected scheme. RK4 is not a multistep map and
/// is rejected here; the driver integrates it directly.
pub fn scheme_step<S: Scalar>(spec: &SchemeSpec, hist: &History<S>, h: f64) -> Result<Vec<S>> {
    match spec.family {
        SchemeFamily::RushLarsen => rl_step(spec.order, spec.constant_a, hist, h),
        SchemeFamily::ExponentialAdams => eab_step(spec.order, hist, h),
        SchemeFamily::Rk4Reference => Err(Error::InvalidArgument(
            "rk4 reference has no multistep recurrence".into(),
        )),
    }
}

/// Classical 4-stage explicit Runge-Kutta step on the full right-hand side.
pub fn rk4_step<F>(mut rhs: F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let k1 = rhs(t, y);
    rk4_step_with_k1(rhs, t, y, h, &k1)
}

/// RK4 step with the first stage slope supplied by the caller, so a stored
/// node evaluation can be reused instead of recomputed.
pub(crate) fn rk4_step_with_k1<F>(mut rhs: F, t: f64, y: &[f64], h: f64, k1: &[f64]) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let n = y.len();
    let half = 0.5 * h;
    let mut stage = vec![0.0; n];

    for i in 0..n {
        stage[i] = y[i] + half * k1[i];
    }
    let k2 = rhs(t + half, &stage);
    for i in 0..n {
        stage[i] = y[i] + half * k2[i];
    }
    let k3 = rhs(t + half, &stage);
    for i in 0..n {
        stage[i] = y[i] + h * k3[i];
    }
    let k4 = rhs(t + h, &stage);

    let sixth = h / 6.0;
    (0..n)
        .map(|i| y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}
