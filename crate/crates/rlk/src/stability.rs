//! Dahlquist stability domains for the θ-split test equation.
//!
//! y' = λy is split into a = θλ, b = (1−θ)λy. For fixed (scheme, θ, z = λh)
//! one scheme step is a linear map on the k-deep history, so probing the step
//! with the k canonical unit histories recovers the companion-form recurrence
//! matrix without deriving characteristic polynomials per scheme. The
//! spectral radius of that matrix classifies z; grids, real-axis crossings
//! and domain-width ratios follow.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::history::{History, Record};
use crate::polyroot::max_root_modulus;
use crate::schemes::{scheme_step, SchemeFamily, SchemeSpec};

/// Companion-form one-step map on the history (y_n, ..., y_{n-k+1}), newest
/// first: top row holds the step coefficients, the subdiagonal shifts.
#[derive(Debug, Clone)]
pub struct RecurrenceMatrix {
    k: usize,
    entries: Vec<Complex64>,
}

impl RecurrenceMatrix {
    pub fn order(&self) -> usize {
        self.k
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.k + col]
    }

    /// Step coefficients: y_{n+1} = Σ_j top_row[j] · y_{n-j}.
    pub fn top_row(&self) -> &[Complex64] {
        &self.entries[..self.k]
    }

    /// Apply the map to a newest-first history vector.
    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(state.len(), self.k);
        (0..self.k)
            .map(|r| {
                (0..self.k)
                    .map(|c| self.entry(r, c) * state[c])
                    .sum::<Complex64>()
            })
            .collect()
    }
}

/// Build the recurrence matrix for (scheme, θ, z) by probing the actual step
/// map with unit histories; linearity of the test problem makes this exact.
pub fn probe_recurrence(spec: &SchemeSpec, theta: f64, z: Complex64) -> Result<RecurrenceMatrix> {
    if spec.family == SchemeFamily::Rk4Reference {
        return Err(Error::InvalidArgument(
            "stability probing applies to the multistep schemes only".into(),
        ));
    }
    spec.validate()?;
    if !theta.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFinite(format!("probe at theta={theta}, z={z}")));
    }

    // h = 1 and λ = z: the scheme only sees θz and (1−θ)z y, so the
    // recurrence depends on z alone.
    let k = spec.order;
    let a = Complex64::from(theta) * z;
    let bfac = Complex64::from(1.0 - theta) * z;

    let mut entries = vec![Complex64::ZERO; k * k];
    for unit in 0..k {
        let mut hist: History<Complex64> = History::new(k);
        for j in 0..k {
            let y = if j == unit {
                Complex64::ONE
            } else {
                Complex64::ZERO
            };
            hist.push(Record {
                t: j as f64,
                y: vec![y],
                a: vec![a],
                b: vec![bfac * y],
            })?;
        }
        let stepped = scheme_step(spec, &hist, 1.0)?[0];
        // oldest-first slot `unit` sits `k-1-unit` steps behind the newest
        entries[k - 1 - unit] = stepped;
    }
    for r in 1..k {
        entries[r * k + (r - 1)] = Complex64::ONE;
    }
    Ok(RecurrenceMatrix { k, entries })
}

/// Spectral radius of the companion matrix, via the characteristic roots.
pub fn spectral_radius(m: &RecurrenceMatrix) -> Result<f64> {
    for e in &m.entries {
        if !e.re.is_finite() || !e.im.is_finite() {
            return Err(Error::NonFinite(format!("recurrence entry {e}")));
        }
    }
    // char poly: ζ^k − c_0 ζ^{k-1} − ... − c_{k-1}; ascending coefficients
    let top = m.top_row();
    let coeffs: Vec<Complex64> = (0..m.k).map(|j| -top[m.k - 1 - j]).collect();
    Ok(max_root_modulus(&coeffs))
}

/// Radius at a single point of the z-plane.
pub fn rho_at(spec: &SchemeSpec, theta: f64, z: Complex64) -> Result<f64> {
    spectral_radius(&probe_recurrence(spec, theta, z)?)
}

/// Rectangle in the complex z-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// Per-point spectral radii over a rectangle, row-major from
/// (re_min, im_min): the real coordinate varies fastest.
#[derive(Debug, Clone)]
pub struct StabilityGrid {
    pub rect: GridRect,
    pub n_re: usize,
    pub n_im: usize,
    pub rho: Vec<f64>,
    pub stable: Vec<bool>,
}

impl StabilityGrid {
    pub fn point(&self, i_re: usize, i_im: usize) -> Complex64 {
        let re = self.rect.re_min
            + (self.rect.re_max - self.rect.re_min) * i_re as f64 / (self.n_re - 1) as f64;
        let im = self.rect.im_min
            + (self.rect.im_max - self.rect.im_min) * i_im as f64 / (self.n_im - 1) as f64;
        Complex64::new(re, im)
    }

    pub fn rho_at(&self, i_re: usize, i_im: usize) -> f64 {
        self.rho[i_im * self.n_re + i_re]
    }

    pub fn stable_at(&self, i_re: usize, i_im: usize) -> bool {
        self.stable[i_im * self.n_re + i_re]
    }

    /// CSV body: header `re,im,rho,stable`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,rho,stable\n");
        for i_im in 0..self.n_im {
            for i_re in 0..self.n_re {
                let z = self.point(i_re, i_im);
                let idx = i_im * self.n_re + i_re;
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    z.re,
                    z.im,
                    self.rho[idx],
                    if self.stable[idx] { 1 } else { 0 }
                ));
            }
        }
        out
    }
}

/// Scan the rectangle pointwise. Points are independent, so the scan runs in
/// parallel; assembly is index-ordered and deterministic regardless of the
/// worker count.
pub fn scan(
    spec: &SchemeSpec,
    theta: f64,
    rect: GridRect,
    n_re: usize,
    n_im: usize,
) -> Result<StabilityGrid> {
    if n_re < 2 || n_im < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution {n_re}x{n_im} must be at least 2x2"
        )));
    }
    if !(rect.re_min < rect.re_max) || !(rect.im_min < rect.im_max) {
        return Err(Error::InvalidArgument("empty grid rectangle".into()));
    }
    let rho: Vec<f64> = (0..n_re * n_im)
        .into_par_iter()
        .map(|idx| {
            let (i_im, i_re) = (idx / n_re, idx % n_re);
            let re = rect.re_min + (rect.re_max - rect.re_min) * i_re as f64 / (n_re - 1) as f64;
            let im = rect.im_min + (rect.im_max - rect.im_min) * i_im as f64 / (n_im - 1) as f64;
            rho_at(spec, theta, Complex64::new(re, im))
        })
        .collect::<Result<_>>()?;
    let stable = rho.iter().map(|&r| r < 1.0).collect();
    Ok(StabilityGrid {
        rect,
        n_re,
        n_im,
        rho,
        stable,
    })
}

/// Result of the leftward crossing search on the negative real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    /// Stable on (x*, 0) with ρ crossing 1 at x*.
    At(f64),
    /// ρ ≤ 1 down to the search limit.
    NoneWithin { search_limit: f64 },
    /// ρ > 1 already at the first probe left of the origin.
    UnstableAtOrigin,
}

impl Crossing {
    /// Value column for the crossings CSV.
    pub fn csv_value(&self) -> String {
        match self {
            Crossing::At(x) => format!("{x}"),
            Crossing::NoneWithin { .. } => "none".to_string(),
            Crossing::UnstableAtOrigin => "degenerate".to_string(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Crossing::At(x) => Some(*x),
            _ => None,
        }
    }
}

/// Find where the stability domain leaves the negative real axis: march left
/// from −1e-3 with step doubling until ρ > 1, then bisect the bracket down to
/// a relative width of 1e-4. Domains span several orders of magnitude over θ,
/// hence the geometric march.
pub fn real_axis_crossing(spec: &SchemeSpec, theta: f64, search_limit: f64) -> Result<Crossing> {
    if !(search_limit < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "search limit {search_limit} must be negative"
        )));
    }
    let rho = |x: f64| rho_at(spec, theta, Complex64::new(x, 0.0));

    let start = (-1e-3f64).max(search_limit);
    if rho(start)? > 1.0 {
        return Ok(Crossing::UnstableAtOrigin);
    }
    let mut stable_x = start;
    let mut unstable_x = None;
    let mut x = start * 2.0;
    while x >= search_limit {
        if rho(x)? > 1.0 {
            unstable_x = Some(x);
            break;
        }
        stable_x = x;
        x *= 2.0;
    }
    let mut lo = match unstable_x {
        Some(u) => u,
        None => {
            if rho(search_limit)? > 1.0 {
                search_limit
            } else {
                return Ok(Crossing::NoneWithin { search_limit });
            }
        }
    };
    let mut hi = stable_x;
    while (hi - lo).abs() > 1e-4 * hi.abs() {
        let mid = 0.5 * (hi + lo);
        if rho(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Crossing::At(hi))
}

/// One row of the crossing report.
#[derive(Debug, Clone)]
pub struct CrossingRow {
    pub scheme: String,
    pub k: usize,
    pub theta: f64,
    pub crossing: Crossing,
}

/// CSV body: header `scheme,k,theta,crossing`.
pub fn crossings_to_csv(rows: &[CrossingRow]) -> String {
    let mut out = String::from("scheme,k,theta,crossing\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.scheme,
            r.k,
            r.theta,
            r.crossing.csv_value()
        ));
    }
    out
}
