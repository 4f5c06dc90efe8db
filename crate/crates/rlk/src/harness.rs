//! Experiment protocols: RK4 reference solutions, piecewise-cubic projection
//! onto the reference grid, the relative potential error e(h), convergence
//! studies, and the critical-time-step bisection.

use rayon::prelude::*;

use crate::driver::integrate;
use crate::error::{Error, Result};
use crate::problems::SplitProblem;
use crate::schemes::SchemeSpec;

/// Fine fixed-step RK4 solution used as the comparison baseline.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub h_ref: f64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ReferenceSolution {
    /// Column of the last (stiffest) component.
    pub fn potential(&self) -> Vec<f64> {
        self.values.iter().map(|y| *y.last().unwrap()).collect()
    }
}

/// Generate the RK4 reference; a reference that overflows is unusable and
/// fails loudly.
pub fn reference_solution(
    problem: &SplitProblem,
    h_ref: f64,
    t_end: f64,
) -> Result<ReferenceSolution> {
    let traj = integrate(problem, &SchemeSpec::rk4_reference(), h_ref, t_end)?;
    if let crate::driver::Termination::Overflow { step } = traj.termination {
        return Err(Error::ReferenceOverflow { h_ref, step });
    }
    Ok(ReferenceSolution {
        h_ref,
        times: traj.times,
        values: traj.states,
    })
}

/// Piecewise-cubic projection of a coarse trajectory onto a finer grid.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Projected states on the first `covered` reference nodes.
    pub values: Vec<Vec<f64>>,
    /// Reference nodes covered by complete cubic windows.
    pub covered: usize,
    /// Trailing trajectory nodes dropped to make the length ≡ 1 (mod 3).
    pub dropped_nodes: usize,
}

/// Interpolate the trajectory through cubics on consecutive windows of three
/// steps and evaluate at every reference node inside each window. The step
/// ratio h / h_ref must be a positive integer; up to two trailing nodes are
/// dropped so complete windows remain.
pub fn project_cubic(states: &[Vec<f64>], h: f64, ref_times: &[f64]) -> Result<Projection> {
    if states.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 4 trajectory nodes, got {}",
            states.len()
        )));
    }
    if ref_times.len() < 2 {
        return Err(Error::GridMismatch("reference grid too short".into()));
    }
    let h_ref = ref_times[1] - ref_times[0];
    if !(h_ref > 0.0) {
        return Err(Error::GridMismatch("reference grid not increasing".into()));
    }
    let ratio_f = h / h_ref;
    let ratio = ratio_f.round();
    if ratio < 1.0 || (ratio_f - ratio).abs() > 1e-9 * ratio {
        return Err(Error::GridMismatch(format!(
            "step ratio h/h_ref = {ratio_f} is not a positive integer"
        )));
    }
    let r = ratio as usize;

    let usable = states.len() - (states.len() - 1) % 3;
    let dropped_nodes = states.len() - usable;
    let windows = (usable - 1) / 3;
    let covered = windows * 3 * r + 1;
    if ref_times.len() < covered {
        return Err(Error::GridMismatch(format!(
            "reference grid has {} nodes, projection covers {covered}",
            ref_times.len()
        )));
    }

    let dim = states[0].len();
    let mut values = Vec::with_capacity(covered);
    for w in 0..windows {
        let base = 3 * w;
        let last_window = w == windows - 1;
        let s_end = if last_window { 3 * r + 1 } else { 3 * r };
        for s in 0..s_end {
            // position in node units on [0, 3]
            let u = s as f64 / r as f64;
            let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
            let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
            let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
            let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
            let mut v = vec![0.0; dim];
            for i in 0..dim {
                v[i] = l0 * states[base][i]
                    + l1 * states[base + 1][i]
                    + l2 * states[base + 2][i]
                    + l3 * states[base + 3][i];
            }
            values.push(v);
        }
    }
    Ok(Projection {
        values,
        covered,
        dropped_nodes,
    })
}

/// Relative error max|v_ref − v| / max|v_ref| over the shared nodes.
pub fn error_metric(v: &[f64], v_ref: &[f64]) -> Result<f64> {
    if v.len() != v_ref.len() {
        return Err(Error::GridMismatch(format!(
            "value column has {} nodes, reference {}",
            v.len(),
            v_ref.len()
        )));
    }
    let denom = v_ref.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = v
        .iter()
        .zip(v_ref)
        .fold(0.0f64, |m, (a, b)| m.max((b - a).abs()));
    Ok(num / denom)
}

/// One row of a convergence study: step, relative error (`None` marks an
/// overflowed run), and the observed order against the previous coarser row.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: Option<f64>,
    pub observed_order: Option<f64>,
    pub dropped_nodes: usize,
}

/// Error-vs-step table for one scheme on one problem.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub scheme: String,
    pub family: &'static str,
    pub k: usize,
    pub problem: String,
    pub rows: Vec<ConvergenceRow>,
    /// Disagreement between the h_ref and 2 h_ref references; must stay below
    /// 1% of the coarsest scheme error for the table to be meaningful.
    pub reference_check: f64,
}

impl ConvergenceReport {
    /// Least-squares slope of log2(error) against log2(h) over stable rows.
    pub fn fitted_order(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.error.map(|e| (r.h.log2(), e.log2())))
            .filter(|(_, e)| e.is_finite())
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    }
}

/// Run the §-style convergence protocol: RK4 reference at h_ref (verified
/// against a 2·h_ref reference), scheme runs at h = 2^m·h_ref for every m in
/// `m_list`, errors through the cubic projection of the potential column.
pub fn convergence_study(
    problem: &SplitProblem,
    spec: &SchemeSpec,
    h_ref: f64,
    m_list: &[u32],
    t_end: Option<f64>,
) -> Result<ConvergenceReport> {
    if m_list.is_empty() {
        return Err(Error::InvalidArgument("empty m list".into()));
    }
    let t_end = t_end.unwrap_or_else(|| problem.horizon());
    let reference = reference_solution(problem, h_ref, t_end)?;
    let coarse = reference_solution(problem, 2.0 * h_ref, t_end)?;

    let v_ref = reference.potential();
    let v_coarse = coarse.potential();
    let shared: Vec<f64> = v_ref.iter().step_by(2).copied().collect();
    let n_shared = shared.len().min(v_coarse.len());
    let reference_check = error_metric(&v_coarse[..n_shared], &shared[..n_shared])?;

    let mut ms: Vec<u32> = m_list.to_vec();
    ms.sort_unstable_by(|a, b| b.cmp(a));
    ms.dedup();

    // independent (h, scheme) runs execute in parallel; rows assemble in
    // descending-h order deterministically
    let runs: Vec<(f64, Result<(Option<f64>, usize)>)> = ms
        .par_iter()
        .map(|&m| {
            let h = 2f64.powi(m as i32) * h_ref;
            let outcome = (|| {
                let traj = integrate(problem, spec, h, t_end)?;
                if traj.overflowed() {
                    return Ok((None, 0));
                }
                let proj = project_cubic(&traj.states, h, &reference.times)?;
                let v: Vec<f64> = proj.values.iter().map(|y| *y.last().unwrap()).collect();
                let e = error_metric(&v, &v_ref[..proj.covered])?;
                Ok((Some(e), proj.dropped_nodes))
            })();
            (h, outcome)
        })
        .collect();

    let mut rows = Vec::with_capacity(runs.len());
    let mut prev: Option<(f64, f64)> = None;
    for (h, outcome) in runs {
        let (error, dropped_nodes) = outcome?;
        let observed_order = match (prev, error) {
            (Some((ph, pe)), Some(e)) if (ph / h - 2.0).abs() < 1e-9 && e > 0.0 => {
                Some((pe / e).log2())
            }
            _ => None,
        };
        if let Some(e) = error {
            prev = Some((h, e));
        } else {
            prev = None;
        }
        rows.push(ConvergenceRow {
            h,
            error,
            observed_order,
            dropped_nodes,
        });
    }

    // disagreement at the rounding level cannot indicate an unconverged
    // reference, so the 1% gate only applies above a small absolute floor
    let coarsest = rows.iter().find_map(|r| r.error);
    if let Some(ce) = coarsest {
        if ce > 0.0 && reference_check > 0.01 * ce && reference_check > 1e-13 {
            return Err(Error::ReferenceNotConverged {
                check: reference_check,
                coarsest: ce,
            });
        }
    }

    Ok(ConvergenceReport {
        scheme: spec.label(),
        family: spec.family_label(),
        k: spec.order,
        problem: problem.name().to_string(),
        rows,
        reference_check,
    })
}

/// CSV body: header `scheme,k,h,error,observed_order`; overflowed rows carry
/// the literal `unstable` in the error column.
pub fn convergence_csv(reports: &[ConvergenceReport]) -> String {
    let mut out = String::from("scheme,k,h,error,observed_order\n");
    for rep in reports {
        for row in &rep.rows {
            let error = row
                .error
                .map(|e| e.to_string())
                .unwrap_or_else(|| "unstable".to_string());
            let order = row
                .observed_order
                .map(|o| o.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rep.scheme, rep.k, row.h, error, order
            ));
        }
    }
    out
}

/// Outcome of the critical step search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalDt {
    /// Bracketed threshold: `dt0` (the stable end) finishes finite, the
    /// overflowing end does not, and the bracket is within tolerance.
    Bracketed {
        dt0: f64,
        stable: f64,
        overflowing: f64,
    },
    /// No overflow up to the largest step the horizon admits.
    UnconditionallyStable { tested_up_to: f64 },
}

/// Critical step report for one (scheme, problem) pair.
#[derive(Debug, Clone)]
pub struct CriticalDtReport {
    pub scheme: String,
    pub k: usize,
    pub problem: String,
    pub outcome: CriticalDt,
}

/// Bisect for the critical time step: the largest h whose run completes
/// without overflow. Starts from `h_hi` (doubled until it overflows, capped
/// by the horizon) and narrows the finite/overflow bracket to a relative
/// width of `tol`.
pub fn critical_dt(
    problem: &SplitProblem,
    spec: &SchemeSpec,
    h_hi: f64,
    tol: f64,
    t_end: Option<f64>,
) -> Result<CriticalDtReport> {
    if !(h_hi > 0.0) || !h_hi.is_finite() {
        return Err(Error::InvalidArgument(format!("h_hi = {h_hi} must be positive")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must lie in (0, 1)")));
    }
    let t_end = t_end.unwrap_or_else(|| problem.horizon());
    let k = spec.required_history();
    let h_cap = t_end / k as f64;

    let finishes = |h: f64| -> Result<bool> {
        Ok(!integrate(problem, spec, h, t_end)?.overflowed())
    };

    let mut hi = h_hi.min(h_cap);
    let mut lo = None;
    if finishes(hi)? {
        // widen upward until overflow or the horizon cap
        loop {
            lo = Some(hi);
            if hi >= h_cap {
                return Ok(CriticalDtReport {
                    scheme: spec.label(),
                    k: spec.order,
                    problem: problem.name().to_string(),
                    outcome: CriticalDt::UnconditionallyStable { tested_up_to: hi },
                });
            }
            hi = (hi * 2.0).min(h_cap);
            if !finishes(hi)? {
                break;
            }
        }
    }
    // ensure a finite lower end
    let mut lo = match lo {
        Some(l) => l,
        None => {
            let mut l = hi / 2.0;
            let floor = hi * 2f64.powi(-60);
            while !finishes(l)? {
                l /= 2.0;
                if l < floor {
                    return Err(Error::InvalidArgument(format!(
                        "no finite run found down to h = {l}"
                    )));
                }
            }
            l
        }
    };

    while (hi - lo) > tol * lo {
        let mid = 0.5 * (lo + hi);
        if finishes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalDtReport {
        scheme: spec.label(),
        k: spec.order,
        problem: problem.name().to_string(),
        outcome: CriticalDt::Bracketed {
            dt0: lo,
            stable: lo,
            overflowing: hi,
        },
    })
}

/// CSV body: header `scheme,k,problem,dt0,bracket_lo,bracket_hi`.
pub fn critical_dt_csv(reports: &[CriticalDtReport]) -> String {
    let mut out = String::from("scheme,k,problem,dt0,bracket_lo,bracket_hi\n");
    for rep in reports {
        match rep.outcome {
            CriticalDt::Bracketed {
                dt0,
                stable,
                overflowing,
            } => out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rep.scheme, rep.k, rep.problem, dt0, stable, overflowing
            )),
            CriticalDt::UnconditionallyStable { tested_up_to } => out.push_str(&format!(
                "{},{},{},inf,{},inf\n",
                rep.scheme, rep.k, rep.problem, tested_up_to
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{manufactured_smooth, theta_split, SplitProblem};
    use crate::schemes::SchemeSpec;

    fn cubic_traj(h: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
        (0..=n).map(|i| vec![f(i as f64 * h)]).collect()
    }

    #[test]
    fn projection_reproduces_cubics_exactly() {
        let f = |t: f64| 2.0 - 3.0 * t + 0.5 * t * t - 0.25 * t * t * t;
        let h = 0.25;
        let states = cubic_traj(h, 9, f);
        let ref_times: Vec<f64> = (0..=72).map(|i| i as f64 * h / 8.0).collect();
        let proj = project_cubic(&states, h, &ref_times).unwrap();
        assert_eq!(proj.covered, 73);
        assert_eq!(proj.dropped_nodes, 0);
        for (i, v) in proj.values.iter().enumerate() {
            let want = f(ref_times[i]);
            assert!((v[0] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn projection_identity_when_grids_match() {
        let f = |t: f64| (1.3 * t).sin() + t;
        let h = 0.1;
        let states = cubic_traj(h, 12, f);
        let ref_times: Vec<f64> = (0..=12).map(|i| i as f64 * h).collect();
        let proj = project_cubic(&states, h, &ref_times).unwrap();
        for (i, v) in proj.values.iter().enumerate() {
            assert_eq!(v[0], states[i][0], "node {i} must be exact");
        }
    }

    #[test]
    fn projection_quartic_remainder_is_the_node_polynomial() {
        // for f = t^4 the cubic interpolation error is exactly ∏(t - t_i)
        let h = 0.5;
        let states = cubic_traj(h, 3, |t| t * t * t * t);
        let r = 4usize;
        let ref_times: Vec<f64> = (0..=3 * r).map(|i| i as f64 * h / r as f64).collect();
        let proj = project_cubic(&states, h, &ref_times).unwrap();
        for (i, v) in proj.values.iter().enumerate() {
            let t = ref_times[i];
            let exact = t * t * t * t;
            let remainder = (t - 0.0) * (t - h) * (t - 2.0 * h) * (t - 3.0 * h);
            assert!(
                ((exact - v[0]) - remainder).abs() <= 1e-12,
                "t={t}: {} vs {remainder}",
                exact - v[0]
            );
        }
    }

    #[test]
    fn projection_drops_trailing_nodes() {
        let states = cubic_traj(0.1, 8, |t| t); // 9 nodes -> drop 2
        let ref_times: Vec<f64> = (0..=8).map(|i| i as f64 * 0.1).collect();
        let proj = project_cubic(&states, 0.1, &ref_times).unwrap();
        assert_eq!(proj.dropped_nodes, 2);
        assert_eq!(proj.covered, 7);
    }

    #[test]
    fn projection_rejects_mismatched_grids() {
        let states = cubic_traj(0.1, 6, |t| t);
        let ref_times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.03).collect();
        assert!(matches!(
            project_cubic(&states, 0.1, &ref_times),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn metric_extremes() {
        let v_ref = [1.0, -4.0, 2.0];
        assert_eq!(error_metric(&v_ref, &v_ref).unwrap(), 0.0);
        assert_eq!(error_metric(&[0.0, 0.0, 0.0], &v_ref).unwrap(), 1.0);
        assert!(matches!(
            error_metric(&[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroReference)
        ));
        assert!(error_metric(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn cubic_solution_passes_through_the_pipeline_unpolluted() {
        // a problem whose trajectory the scheme reproduces exactly and whose
        // solution is a polynomial of degree ≤ 3: any reported error is
        // projection/metric pollution and must stay below 1e-12
        for (k, b_coeffs) in [
            (2usize, [1.0, -2.0, 0.0]),  // quadratic solution for the 2-step scheme
            (3, [1.0, -2.0, 0.9]),       // cubic solution
            (4, [1.0, -2.0, 0.9]),
        ] {
            let p = SplitProblem::new("poly", vec![1.0], 4.0, move |t, _y, a, b| {
                a[0] = 0.0;
                b[0] = b_coeffs[0] + t * (b_coeffs[1] + t * b_coeffs[2]);
            });
            let rep = convergence_study(&p, &SchemeSpec::rl(k).unwrap(), 0.0125, &[3, 2], None)
                .unwrap();
            for row in &rep.rows {
                let e = row.error.unwrap();
                assert!(e <= 1e-12, "k={k}, h={}: e = {e:e}", row.h);
            }
        }
    }

    #[test]
    fn rk4_against_itself_is_an_exact_zero_row() {
        let p = manufactured_smooth();
        let rep = convergence_study(&p, &SchemeSpec::rk4_reference(), 0.01, &[0], None).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].error, Some(0.0));
    }

    #[test]
    fn smooth_problem_orders_match_scheme_orders() {
        let p = manufactured_smooth();
        let h_ref = 6.0 * 2f64.powi(-11);
        for k in 2..=3 {
            let rep = convergence_study(
                &p,
                &SchemeSpec::rl(k).unwrap(),
                h_ref,
                &[7, 6, 5, 4],
                None,
            )
            .unwrap();
            let slope = rep.fitted_order().unwrap();
            assert!(
                (slope - k as f64).abs() < 0.3,
                "rl{k} slope {slope}"
            );
        }
    }

    #[test]
    fn convergence_rows_mark_unstable_runs() {
        // θ=0 split far beyond the explicit window overflows at the coarse h
        let p = theta_split(-60.0, 0.0).with_horizon(8.0);
        let rep = convergence_study(
            &p,
            &SchemeSpec::rl(2).unwrap(),
            2f64.powi(-10),
            &[8, 3],
            None,
        )
        .unwrap();
        assert_eq!(rep.rows[0].error, None, "coarse run must overflow");
        assert!(rep.rows[1].error.is_some());
    }

    #[test]
    fn critical_dt_matches_dahlquist_prediction() {
        // λ=-100, θ=0, RL2 is plain AB2: interval [-1, 0] ⇒ Δt0 ≈ 1/100
        let p = theta_split(-100.0, 0.0).with_horizon(500.0);
        let rep = critical_dt(&p, &SchemeSpec::rl(2).unwrap(), 0.05, 1e-2, None).unwrap();
        match rep.outcome {
            CriticalDt::Bracketed {
                dt0,
                stable,
                overflowing,
            } => {
                assert!((dt0 - 0.01).abs() <= 0.02 * 0.01 + 2e-4, "dt0 = {dt0}");
                assert!(stable < overflowing);
                assert!((overflowing - stable) <= 1e-2 * stable * 1.0001);
            }
            other => panic!("expected bracket, got {other:?}"),
        }
    }

    #[test]
    fn exact_split_is_unconditionally_stable() {
        // θ = 1 makes the scheme itself exact; the RK4 startup is the only
        // explicit piece left, so keep |λ h| inside its stability region up
        // to the horizon cap.
        let p = theta_split(-0.5, 1.0);
        let rep = critical_dt(&p, &SchemeSpec::rl(3).unwrap(), 0.1, 1e-2, None).unwrap();
        assert!(matches!(
            rep.outcome,
            CriticalDt::UnconditionallyStable { .. }
        ));
    }

    #[test]
    fn critical_dt_widens_and_narrows_from_any_start() {
        let p = theta_split(-100.0, 0.0).with_horizon(500.0);
        // start below the threshold: must widen first
        let from_low = critical_dt(&p, &SchemeSpec::rl(2).unwrap(), 1e-3, 1e-2, None).unwrap();
        // start far above: must halve to find a finite end
        let from_high = critical_dt(&p, &SchemeSpec::rl(2).unwrap(), 3.0, 1e-2, None).unwrap();
        let (CriticalDt::Bracketed { dt0: a, .. }, CriticalDt::Bracketed { dt0: b, .. }) =
            (from_low.outcome, from_high.outcome)
        else {
            panic!("expected brackets");
        };
        assert!((a - b).abs() <= 0.03 * a, "{a} vs {b}");
    }

    #[test]
    fn csv_formats() {
        let reports = vec![CriticalDtReport {
            scheme: "rl2".into(),
            k: 2,
            problem: "x".into(),
            outcome: CriticalDt::Bracketed {
                dt0: 0.01,
                stable: 0.01,
                overflowing: 0.0101,
            },
        }];
        let csv = critical_dt_csv(&reports);
        assert!(csv.starts_with("scheme,k,problem,dt0,bracket_lo,bracket_hi\n"));
        assert!(csv.contains("rl2,2,x,0.01,0.01,0.0101"));

        let p = manufactured_smooth();
        let rep = convergence_study(&p, &SchemeSpec::rl(2).unwrap(), 0.01, &[0], None);
        // single-row table: no order column value
        let rep = rep.unwrap();
        let csv = convergence_csv(&[rep]);
        let second = csv.lines().nth(1).unwrap();
        assert!(second.ends_with(','), "no observed order on a lone row: {second}");
    }

    #[test]
    fn reference_must_be_finite() {
        let p = theta_split(-100.0, 0.0).with_horizon(10.0);
        // RK4 at h = 0.1 on λ=-100 is way outside the stability region
        assert!(matches!(
            reference_solution(&p, 0.1, 10.0),
            Err(Error::ReferenceOverflow { .. })
        ));
    }

    #[test]
    fn unconverged_reference_is_rejected() {
        // exact scheme against a reference so coarse that the measured
        // "error" is really the reference's own error
        let p = theta_split(-1.0, 1.0).with_horizon(8.0);
        let err = convergence_study(&p, &SchemeSpec::rl(3).unwrap(), 0.8, &[1], None);
        assert!(
            matches!(err, Err(Error::ReferenceNotConverged { .. })),
            "got {err:?}"
        );
    }
}
