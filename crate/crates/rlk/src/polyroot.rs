//! Roots of monic complex polynomials of degree ≤ 4.
//!
//! Degree 1 and 2 are closed-form (with the cancellation-free quadratic);
//! degrees 3 and 4 use Durand-Kerner iteration followed by a Newton polish.
//! Enough for companion matrices of k-step recurrences.

use num_complex::Complex64;

/// Roots of z^n + c[n-1] z^{n-1} + ... + c[1] z + c[0], coefficients given in
/// ascending order of power (monic leading coefficient implied).
pub(crate) fn monic_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    match coeffs.len() {
        0 => Vec::new(),
        1 => vec![-coeffs[0]],
        2 => quadratic(coeffs[1], coeffs[0]),
        _ => durand_kerner(coeffs),
    }
}

/// Largest root modulus.
pub(crate) fn max_root_modulus(coeffs: &[Complex64]) -> f64 {
    monic_roots(coeffs)
        .iter()
        .map(|r| r.norm())
        .fold(0.0, f64::max)
}

/// z² + b z + c = 0 via the Vieta pairing to avoid cancellation.
fn quadratic(b: Complex64, c: Complex64) -> Vec<Complex64> {
    if c == Complex64::ZERO {
        return vec![Complex64::ZERO, -b];
    }
    let disc = (b * b - c * 4.0).sqrt();
    // pick the sign that grows |b ± disc|
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    vec![q, c / q]
}

fn eval_monic(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut p = Complex64::ONE;
    for c in coeffs.iter().rev() {
        p = p * z + c;
    }
    p
}

fn eval_monic_derivative(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let n = coeffs.len();
    let mut p = Complex64::from(n as f64);
    for (j, c) in coeffs.iter().enumerate().skip(1).rev() {
        p = p * z + *c * j as f64;
    }
    p
}

fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let bound = 1.0 + coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut w: Vec<Complex64> = (0..n)
        .map(|i| seed.powu(i as u32 + 1) * bound)
        .collect();

    for _ in 0..200 {
        let mut max_update = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::ONE;
            for j in 0..n {
                if j != i {
                    den *= w[i] - w[j];
                }
            }
            if den.norm() == 0.0 {
                // coincident iterates: nudge and retry next sweep
                w[i] += Complex64::new(1e-8 * bound, 1e-8 * bound);
                max_update = f64::MAX;
                continue;
            }
            let delta = eval_monic(coeffs, w[i]) / den;
            w[i] -= delta;
            max_update = max_update.max(delta.norm());
        }
        if max_update <= 1e-14 * bound.max(1.0) {
            break;
        }
    }

    // Newton polish sharpens simple roots to machine precision
    for r in &mut w {
        for _ in 0..3 {
            let d = eval_monic_derivative(coeffs, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = eval_monic(coeffs, *r) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
        // expand prod (z - r_i) into ascending coefficients
        let mut coeffs = vec![Complex64::ONE];
        for &r in roots {
            let mut next = vec![Complex64::ZERO; coeffs.len() + 1];
            for (i, &a) in coeffs.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            coeffs = next;
        }
        coeffs.pop();
        coeffs
    }

    fn assert_same_roots(got: &[Complex64], want: &[Complex64], tol: f64) {
        assert_eq!(got.len(), want.len());
        let mut used = vec![false; want.len()];
        for g in got {
            let (best, dist) = want
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, w)| (i, (g - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(dist <= tol, "root {g} off by {dist:e}");
            used[best] = true;
        }
    }

    #[test]
    fn quadratic_closed_form() {
        let roots = monic_roots(&from_roots(&[c(0.5, 0.0), c(-1.0, 0.0)]));
        assert_same_roots(&roots, &[c(0.5, 0.0), c(-1.0, 0.0)], 1e-15);

        // heavy cancellation case: tiny root next to large root
        let roots = monic_roots(&from_roots(&[c(1e-12, 0.0), c(1e3, 0.0)]));
        assert_same_roots(&roots, &[c(1e-12, 0.0), c(1e3, 0.0)], 1e-9);
        let small = roots.iter().map(|r| r.norm()).fold(f64::MAX, f64::min);
        assert!((small - 1e-12).abs() <= 1e-26, "small root lost: {small:e}");
    }

    #[test]
    fn cubic_and_quartic_random_roots() {
        let mut seed = 0xfeed_beefu64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for n in [3usize, 4] {
            for _ in 0..300 {
                let want: Vec<Complex64> = (0..n).map(|_| c(next(), next())).collect();
                let got = monic_roots(&from_roots(&want));
                assert_same_roots(&got, &want, 1e-9);
            }
        }
    }

    #[test]
    fn companion_style_with_zero_tail() {
        // z^4 - s z^3: roots s, 0, 0, 0 — the θ=1 probing shape
        let s = c(-0.3, 0.7).exp();
        let coeffs = vec![Complex64::ZERO, Complex64::ZERO, Complex64::ZERO, -s];
        let got = monic_roots(&coeffs);
        let maxmod = got.iter().map(|r| r.norm()).fold(0.0, f64::max);
        assert!((maxmod - s.norm()).abs() <= 1e-12 * s.norm());
    }

    #[test]
    fn max_modulus_of_adams_bashforth_boundary() {
        // AB2 at z = -1: ζ² - (1 + 3z/2) ζ + z/2 has roots 0.5 and -1
        let z = c(-1.0, 0.0);
        let coeffs = vec![z * 0.5, -(Complex64::ONE + z * 1.5)];
        let rho = max_root_modulus(&coeffs);
        assert!((rho - 1.0).abs() < 1e-12);
    }
}
