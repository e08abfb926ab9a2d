//! Adaptive 7/15-point Gauss–Kronrod quadrature for vector-valued integrands.
//!
//! Intervals are bisected in order of their error estimate (largest first)
//! until every component satisfies `err ≤ max(abs_tol, rel_tol·|I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 0.0,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn kronrod<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    let mut nodes = [([0.0; N], [0.0; N]); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        nodes[j] = (f1, f2);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut abs_k = [0.0; N];
    let mut err = [0.0; N];
    for i in 0..N {
        k[i] *= half;
        g[i] *= half;
        abs_k[i] = k[i] / (2.0 * half);
    }
    // QUADPACK-style scaling: |K − G| overstates the error of a smooth
    // integrand, so it is rescaled against the integrand's variation (resasc).
    let mut resasc = [0.0; N];
    let mut resabs = [0.0; N];
    for i in 0..N {
        resasc[i] = WGK[7] * (fc[i] - abs_k[i]).abs();
        resabs[i] = WGK[7] * fc[i].abs();
    }
    for (j, (f1, f2)) in nodes.iter().enumerate() {
        for i in 0..N {
            resasc[i] += WGK[j] * ((f1[i] - abs_k[i]).abs() + (f2[i] - abs_k[i]).abs());
            resabs[i] += WGK[j] * (f1[i].abs() + f2[i].abs());
        }
    }
    for i in 0..N {
        resasc[i] *= half.abs();
        resabs[i] *= half.abs();
        let mut e = (k[i] - g[i]).abs();
        if resasc[i] != 0.0 && e != 0.0 {
            e = resasc[i] * (200.0 * e / resasc[i]).powf(1.5).min(1.0);
        }
        let floor = 50.0 * f64::EPSILON * resabs[i];
        err[i] = e.max(floor);
    }
    (k, err)
}

/// Integrates `f` over the consecutive panels defined by `breakpoints`
/// (at least two increasing values).
pub fn integrate<const N: usize, F>(mut f: F, breakpoints: &[f64], tol: Tolerance) -> Result<Estimate<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];
    let mut evaluations = 0;

    let priority = |err: &[f64; N], total: &[f64; N]| -> f64 {
        (0..N)
            .map(|i| err[i] / total[i].abs().max(tol.abs).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    };

    let mut raw = Vec::with_capacity(breakpoints.len() - 1);
    for w in breakpoints.windows(2) {
        let (value, error) = kronrod(&mut f, w[0], w[1]);
        evaluations += 15;
        for i in 0..N {
            total[i] += value[i];
            total_err[i] += error[i];
        }
        raw.push((w[0], w[1], value, error));
    }
    for (a, b, value, error) in raw {
        heap.push(Segment {
            a,
            b,
            value,
            error,
            priority: priority(&error, &total),
        });
    }

    let converged = |total: &[f64; N], err: &[f64; N]| {
        (0..N).all(|i| err[i] <= tol.abs.max(tol.rel * total[i].abs()))
    };

    let mut previous = total;
    while !converged(&total, &total_err) {
        if heap.len() >= tol.max_intervals {
            let worst = (0..N)
                .max_by(|&i, &j| {
                    (total_err[i] / total[i].abs().max(f64::MIN_POSITIVE))
                        .total_cmp(&(total_err[j] / total[j].abs().max(f64::MIN_POSITIVE)))
                })
                .unwrap_or(0);
            return Err(Error::Quadrature {
                previous: previous[worst],
                last: total[worst],
            });
        }
        let seg = heap.pop().expect("heap holds every panel");
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = kronrod(&mut f, seg.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, seg.b);
        evaluations += 30;
        previous = total;
        for i in 0..N {
            total[i] += v1[i] + v2[i] - seg.value[i];
            total_err[i] += e1[i] + e2[i] - seg.error[i];
        }
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
            priority: priority(&e1, &total),
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
            priority: priority(&e2, &total),
        });
    }

    // re-sum from the segments to shed accumulated rounding from the updates
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for s in heap.iter() {
        for i in 0..N {
            value[i] += s.value[i];
            error[i] += s.error[i];
        }
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| [f(x)], &[a, b], tol).map(|e| e.value[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        // K15 integrates degree-22 polynomials exactly
        let v = integrate_scalar(|x| x.powi(10), 0.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, 2f64.powi(11) / 11.0, max_relative = 1e-14);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_scalar(|u| u * (-u).exp(), 0.0, 60.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn log_endpoint_singularity() {
        // ∫₀^∞ u² ln(1 − e^{−u}) du = −2ζ(4) = −π⁴/45
        let tol = Tolerance {
            rel: 1e-12,
            ..Default::default()
        };
        let est = integrate(
            |u: f64| [u * u * (-(-u).exp()).ln_1p()],
            &[0.0, 1.0, 5.0, 45.0],
            tol,
        )
        .unwrap();
        let pi4 = std::f64::consts::PI.powi(4);
        assert_relative_eq!(est.value[0], -pi4 / 45.0, max_relative = 1e-11);
    }

    #[test]
    fn vector_components_converge_together() {
        let tol = Tolerance {
            abs: 1e-13,
            ..Default::default()
        };
        let est = integrate(|x: f64| [x.sin(), x.cos(), 1.0], &[0.0, std::f64::consts::PI], tol).unwrap();
        assert_relative_eq!(est.value[0], 2.0, max_relative = 1e-12);
        assert!(est.value[1].abs() < 1e-12);
        assert_relative_eq!(est.value[2], std::f64::consts::PI, max_relative = 1e-14);
    }

    #[test]
    fn reports_last_two_estimates_on_failure() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-14,
            max_intervals: 4,
        };
        let err = integrate_scalar(|x| 1.0 / x.sqrt(), 0.0, 1.0, tol).unwrap_err();
        match err {
            Error::Quadrature { previous, last } => {
                assert!(previous.is_finite() && last.is_finite());
                assert!(previous != last);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
