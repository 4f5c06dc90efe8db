//! The φ functions of exponential integrators: φ_0 = exp and
//! φ_{j+1}(z) = (φ_j(z) − 1/j!)/z, with φ_j(0) = 1/j!.
//!
//! The recurrence divides by z and cancels catastrophically near the origin,
//! so small arguments are evaluated with a truncated power series
//! Σ_m z^m/(m+j)! instead. Both branches work for real and complex scalars.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported φ order.
pub const MAX_ORDER: usize = 4;

/// Switch radius between the power series and the exp-based recurrence.
const SERIES_CUTOFF: f64 = 1.0;

/// Series length; truncation below 1e-17 relative for |z| ≤ cutoff.
const SERIES_TERMS: usize = 26;

const INV_FACTORIAL: [f64; 5] = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];

/// Evaluate φ_j(z) for 0 ≤ j ≤ 4 and finite real or complex z.
pub fn phi<S: Scalar>(j: usize, z: S) -> Result<S> {
    if j > MAX_ORDER {
        return Err(Error::PhiOrder(j));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite(format!("phi argument {z}")));
    }
    if z.modulus() < SERIES_CUTOFF {
        Ok(phi_series(j, z))
    } else {
        Ok(phi_recurrence(j, z))
    }
}

/// Elementwise φ_j(d_i·h) over the entries of a diagonal stabilizer.
pub fn phi_diag(j: usize, d: &[f64], h: f64) -> Result<Vec<f64>> {
    d.iter().map(|&di| phi(j, di * h)).collect()
}

fn phi_series<S: Scalar>(j: usize, z: S) -> S {
    let mut term = S::from_f64(INV_FACTORIAL[j]);
    let mut sum = term;
    for m in 1..SERIES_TERMS {
        term = term * z / (m + j) as f64;
        sum = sum + term;
    }
    sum
}

fn phi_recurrence<S: Scalar>(j: usize, z: S) -> S {
    let mut p = z.exp();
    for i in 1..=j {
        p = (p - S::from_f64(INV_FACTORIAL[i - 1])) / z;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    // High-precision reference values, 60-digit series/recurrence evaluation.
    const REAL_FIXTURES: &[(usize, f64, f64)] = &[
        (0, 0.05, 1.051271096376024042615),
        (0, -0.3, 0.7408182206817178742916),
        (0, 0.499999, 1.648719621979681851193),
        (0, -0.5, 0.6065306597126334236038),
        (0, 0.99, 2.691234472349262265197),
        (0, -1.01, 0.3642189795715233165221),
        (0, 2.0, 7.38905609893065022723),
        (0, -10.0, 0.00004539992976248485153559),
        (0, 100.0, 2.688117141816135448413e43),
        (0, -700.0, 9.859676543759770856705e-305),
        (1, 0.05, 1.025421927520480795385),
        (1, -0.05, 0.9754115099857198168291),
        (1, 0.3, 1.166196025253343673149),
        (1, -0.49, 0.7905583792154774134526),
        (1, 0.499999, 1.297441838843041319042),
        (1, -0.499999, 0.7869390413908899687898),
        (1, 0.5, 1.297442541400256293697),
        (1, -0.5, 0.7869386805747331527924),
        (1, 0.500001, 1.297443243957958520059),
        (1, -0.500001, 0.7869383197588065196132),
        (1, 0.7, 1.448218153529252137871),
        (1, -0.7, 0.7191638517265578502567),
        (1, 0.99, 1.70831764883763866704),
        (1, -0.99, 0.6347710191696508200062),
        (1, 1.0, 1.71828182845904523536),
        (1, -1.0, 0.6321205588285576784045),
        (1, 1.01, 1.728317836650412379233),
        (1, -1.01, 0.6294861588400759186999),
        (1, 2.0, 3.194528049465325113615),
        (1, -2.0, 0.432332358381693654053),
        (1, -5.0, 0.1986524106001829065807),
        (1, 10.0, 2202.546579480671651696),
        (1, -30.0, 0.03333333333333021412568),
        (1, -100.0, 0.01),
        (1, 700.0, 1.448902935335720727793e301),
        (1, -700.0, 0.001428571428571428571429),
        (1, -1.0e4, 0.0001),
        (1, -1.0e6, 0.000001),
        (2, 0.05, 0.5084385504096158794814),
        (2, -0.3, 0.4535357853524207356726),
        (2, 0.49, 0.5927372759491002485031),
        (2, -0.499999, 0.4261227694637589671361),
        (2, 0.5, 0.5948850828005125873946),
        (2, -0.5, 0.4261226388505336944152),
        (2, 0.500001, 0.5948852981453207152647),
        (2, -0.51, 0.4248196032766856689683),
        (2, 0.99, 0.7154723725632713872676),
        (2, -1.0, 0.3678794411714423215955),
        (2, 1.01, 0.7211067689608043295327),
        (2, -2.0, 0.2838338208091531729735),
        (2, 5.0, 5.696526364103064136845),
        (2, -10.0, 0.09000045399929762484852),
        (2, -100.0, 0.0099),
        (2, -700.0, 0.001426530612244897959184),
        (2, -1.0e6, 9.99999e-7),
        (3, 0.05, 0.1687710081923175802591),
        (3, -0.05, 0.1646039942879272684841),
        (3, 0.3, 0.1799558361482631099865),
        (3, -0.49, 0.1480982058120675147887),
        (3, 0.499999, 0.1897701144518639293454),
        (3, -0.499999, 0.1477547565819952218118),
        (3, 0.5, 0.1897701656010251747892),
        (3, -0.5, 0.1477547222989326111696),
        (3, 0.500001, 0.1897702167502079191996),
        (3, -0.7, 0.1411507178093017078121),
        (3, 0.99, 0.2176488611750216052532),
        (3, -0.99, 0.1324058965102038750064),
        (3, 1.0, 0.2182818284590452353603),
        (3, -1.0, 0.1321205588285576784045),
        (3, 1.01, 0.2189175930304993342459),
        (3, -1.01, 0.1318362502108380754588),
        (3, 2.0, 0.2986320123663312784038),
        (3, -2.0, 0.1080830895954234135133),
        (3, -5.0, 0.06794609642400731626323),
        (3, 10.0, 21.96546579480671651696),
        (3, -30.0, 0.01559259259259258912681),
        (3, -100.0, 0.004901),
        (3, -700.0, 0.0007122478134110787172012),
        (3, -1.0e4, 0.000049990001),
        (4, 0.05, 0.042086830513018269512),
        (4, -0.05, 0.04125344757478796136175),
        (4, 0.3, 0.04429723160532147937221),
        (4, -0.3, 0.03928650391578593426578),
        (4, 0.49, 0.04610832687394245613523),
        (4, -0.49, 0.03789481807061051472348),
        (4, 0.499999, 0.0462069879843704916258),
        (4, -0.499999, 0.03782389581713452195481),
        (4, 0.5, 0.04620699786871701624508),
        (4, -0.5, 0.03782388873546811099413),
        (4, 0.500001, 0.04620700775306699627452),
        (4, -0.51, 0.03775318445476997349715),
        (4, 0.7, 0.0482550637393163467088),
        (4, -0.7, 0.03645135551052137210482),
        (4, 0.99, 0.05149716617005549398377),
        (4, -0.99, 0.03460683854188160804813),
        (4, 1.0, 0.05161516179237856869362),
        (4, -1.0, 0.03454610783810898826219),
        (4, 1.01, 0.05173359045924026447496),
        (4, -1.01, 0.03448556084735504049663),
        (4, 2.0, 0.06598267284983230586857),
        (4, -2.0, 0.02929178853562162657671),
        (4, 5.0, 0.1745277212307892321405),
        (4, -5.0, 0.01974411404853187008069),
        (4, 10.0, 2.179879912814004985029),
        (4, -10.0, 0.01256667120665964291515),
        (4, 30.0, 13193178.4895598298111),
        (4, -30.0, 0.005035802469135802584662),
        (4, 100.0, 2.688117141816135448413e35),
        (4, -100.0, 0.001617656666666666666667),
        (4, 700.0, 4.224206808558952559164e292),
        (4, -700.0, 0.0002370777412189365542135),
        (4, -1.0e4, 0.00001666166766656666666667),
        (4, -1.0e6, 1.666661666676666656667e-7),
    ];

    const COMPLEX_FIXTURES: &[(usize, f64, f64, f64, f64)] = &[
        (0, 0.3, 0.4, 1.243302295069502578453, 0.5256597791969787741495),
        (0, -2.0, 1.0, 0.07312196559805963236599, 0.1138807140643680892286),
        (0, 0.0, 10.0, -0.8390715290764524522589, -0.5440211108893698134047),
        (1, 0.3, 0.4, 1.13301840079856911835, 0.2415080629251703477757),
        (1, -0.3, 0.4, 0.8427746054600076600116, 0.1620721291136149233307),
        (1, -0.3, -0.4, 0.8427746054600076600116, -0.1620721291136149233307),
        (1, 0.04, 0.03, 1.020114788981552991776, 0.01540490296502141870535),
        (1, -2.0, 1.0, 0.3935273565736497648993, 0.1398233212546408378354),
        (1, -5.0, 12.0, 0.02916086381753775921556, 0.07070915313861693476284),
        (1, 0.0, 1.0, 0.8414709848078965066525, 0.4596976941318602825991),
        (1, -30.0, 40.0, 0.01200000000000186451267, 0.01600000000000016185422),
        (1, -100.0, 5.0, 0.009975062344139650872818, 0.0004987531172069825436409),
        (1, 3.0, 4.0, -4.127579483866331699592, 0.436511157465790745388),
        (1, -0.49, 0.1, 0.7893994792454912110531, 0.03628441196957619009291),
        (1, -700.0, 100.0, 0.0014, 0.0002),
        (2, 0.3, 0.4, 0.5460349816385554897554, 0.07698023423249380201279),
        (2, -2.0, 1.0, 0.2705537216214682616073, 0.06536520018341371188599),
        (2, 0.0, 10.0, 0.01839071529076452452259, 0.105440211108893698134),
        (2, -100.0, 5.0, 0.009875809230042101728223, 0.0004888029303300352609747),
        (2, -0.49, 0.1, 0.4271199374916710402548, 0.01311751383589982942872),
        (2, 2.0, 2.0, 0.5898562121785312464085, 0.7593665400799198583891),
        (3, 0.3, 0.4, 0.1784103527382566677967, 0.01872031045730377046809),
        (3, -2.0, 1.0, 0.1048515513880954377343, 0.01974317560234086292413),
        (3, -5.0, 12.0, 0.01854083396341441036665, 0.03112933421219877160705),
        (3, 0.0, 1.0, 0.1585290151921034933475, 0.04030230586813971740094),
        (3, -30.0, 40.0, 0.006104511999999999729023, 0.007618816000000000697845),
        (3, 3.0, 4.0, 0.01419091866598927965833, 0.272010127216850280916),
        (3, -700.0, 100.0, 0.000698082576, 0.000099441168),
        (4, 0.3, 0.4, 0.04404492001759403329022, 0.003674474834220520716009),
        (4, 0.04, 0.03, 0.04200096336049719810779, 0.0002533566308842135702628),
        (4, -2.0, 1.0, 0.02867468123189666415779, 0.004465752814777900616827),
        (4, -5.0, 12.0, 0.00659278801220500911707, 0.009596824386852267559556),
        (4, 0.0, 10.0, 0.004816092847092354754774, 0.01561226455557772968533),
        (4, -30.0, 40.0, 0.002048646912000000014417, 0.002477568682666666662628),
        (4, -100.0, 5.0, 0.001613859174780979454235, 0.00007829720745643871239729),
        (4, 3.0, 4.0, 0.02522453059461475850556, 0.05703733494613041563125),
        (4, -700.0, 100.0, 0.0002323759059605333333333, 0.00003305449918293333333333),
        (4, 2.0, 2.0, 0.05325415084332331563197, 0.0304346401443502608656),
    ];

    #[test]
    fn limit_values_at_zero() {
        for j in 0..=MAX_ORDER {
            assert_eq!(phi(j, 0.0).unwrap(), INV_FACTORIAL[j]);
        }
        assert_eq!(phi(1, 0.0).unwrap(), 1.0);
        assert_eq!(phi(2, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn matches_real_reference_values() {
        for &(j, z, want) in REAL_FIXTURES {
            let got = phi(j, z).unwrap();
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-13, "phi({j}, {z}) = {got:e}, want {want:e}, rel {rel:e}");
        }
    }

    #[test]
    fn matches_complex_reference_values() {
        for &(j, re, im, wre, wim) in COMPLEX_FIXTURES {
            let got = phi(j, Complex64::new(re, im)).unwrap();
            let want = Complex64::new(wre, wim);
            let rel = (got - want).norm() / want.norm();
            assert!(rel <= 1e-13, "phi({j}, {re}+{im}i) = {got}, want {want}, rel {rel:e}");
        }
    }

    #[test]
    fn closed_forms_low_order() {
        // phi_1(1) = e - 1
        let e1 = phi(1, 1.0).unwrap();
        assert!((e1 - (1.0f64.exp() - 1.0)).abs() < 1e-15);
        // phi_3(-2) against the series oracle value
        let p32 = phi(3, -2.0).unwrap();
        assert!((p32 - 0.1080830895954234135133).abs() < 1e-15);
    }

    #[test]
    fn diagonal_is_elementwise_bit_for_bit() {
        let d = [0.0, -10.0, 2.0, 0.3, -123.4];
        let h = 0.1;
        let out = phi_diag(1, &d, h).unwrap();
        for (i, &di) in d.iter().enumerate() {
            assert_eq!(out[i], phi(1, di * h).unwrap());
        }
        assert_eq!(phi_diag(1, &[0.0, 0.0], 0.1).unwrap(), vec![1.0, 1.0]);
        let v = phi_diag(1, &[-10.0], 0.1).unwrap();
        assert!((v[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let e = phi_diag(0, &[2.0], 0.5).unwrap();
        assert!((e[0] - 1.0f64.exp()).abs() < 4e-16);
    }

    #[test]
    fn recurrence_identity_random_arguments() {
        // |z phi_{j+1}(z) - phi_j(z) + 1/j!| <= 1e-12 max(1, |phi_j|)
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..10_000 {
            let r = 100.0 * next();
            let (re, im) = if trial % 2 == 0 {
                (r * (2.0 * next() - 1.0), 0.0)
            } else {
                let ang = std::f64::consts::TAU * next();
                (r * ang.cos(), r * ang.sin())
            };
            let z = Complex64::new(re, im);
            for j in 0..MAX_ORDER {
                let pj = phi(j, z).unwrap();
                let pj1 = phi(j + 1, z).unwrap();
                let resid = (z * pj1 - pj + INV_FACTORIAL[j]).norm();
                let scale = pj.norm().max(1.0);
                assert!(
                    resid <= 1e-12 * scale,
                    "recurrence residual {resid:e} at j={j}, z={z}"
                );
            }
        }
    }

    #[test]
    fn branches_agree_at_the_switch() {
        // Series and recurrence evaluated on both sides of the cutoff agree,
        // so the piecewise definition has no seam.
        for &sign in &[1.0f64, -1.0] {
            for &eps in &[1e-6f64, -1e-6] {
                let z = sign * SERIES_CUTOFF * (1.0 + eps);
                for j in 0..=MAX_ORDER {
                    let s = phi_series(j, z);
                    let r = phi_recurrence(j, z);
                    let rel = ((s - r) / s).abs();
                    assert!(rel <= 1e-12, "seam mismatch j={j} z={z}: {rel:e}");
                }
                let zc = Complex64::from_polar(SERIES_CUTOFF * (1.0 + eps), 0.7 * sign);
                for j in 0..=MAX_ORDER {
                    let s = phi_series(j, zc);
                    let r = phi_recurrence(j, zc);
                    let rel = (s - r).norm() / s.norm();
                    assert!(rel <= 1e-12, "complex seam mismatch j={j} z={zc}: {rel:e}");
                }
            }
        }
    }

    #[test]
    fn deep_negative_asymptote() {
        // phi_1(z) -> -1/z for z -> -inf
        for &z in &[-1e4f64, -3.7e4, -1e5, -1e6] {
            let p = phi(1, z).unwrap();
            assert!((p + 1.0 / z).abs() <= 1e-10, "phi_1({z}) = {p}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(phi(5, 1.0), Err(Error::PhiOrder(5))));
        assert!(matches!(phi(1, f64::NAN), Err(Error::NonFinite(_))));
        assert!(matches!(phi(0, f64::INFINITY), Err(Error::NonFinite(_))));
        assert!(matches!(
            phi(2, Complex64::new(1.0, f64::NAN)),
            Err(Error::NonFinite(_))
        ));
    }
}
