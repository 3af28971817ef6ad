//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7/15-point Gauss–Kronrod pair drives a globally adaptive bisection
//! scheme: the interval with the largest error estimate is split until the
//! summed error estimate meets `max(abs_tol, rel_tol·|I|)`. Semi-infinite and
//! infinite ranges are mapped onto `(0, 1]` with `x = a + (1 - t)/t`.
//!
//! Cosine transforms with slowly decaying envelopes are handled by summing
//! half-period panels and accelerating the alternating partial sums with
//! Wynn's epsilon algorithm.

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

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// Integral estimate with its error bound and evaluation count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One application of the 15-point Kronrod rule with the embedded 7-point
/// Gauss rule; returns `(kronrod, |kronrod - gauss|)` after QUADPACK-style
/// error rescaling.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, optionally pre-split at `breakpoints`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("finite limits required, got [{a}, {b}]")));
    }
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges: Vec<f64> = std::iter::once(lo)
        .chain(breakpoints.iter().copied().filter(|&x| x > lo && x < hi))
        .chain(std::iter::once(hi))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numeric {
                message: format!(
                    "adaptive quadrature did not converge on [{lo:e}, {hi:e}] within {} intervals",
                    opts.max_intervals
                ),
                estimate: sign * total,
                error: total_err,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to machine resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed accumulated rounding from the incremental updates.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value: sign * value,
        error,
        evaluations,
    })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Integrates `f` over `[a, ∞)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    let g = |t: f64| {
        let x = a + (1.0 - t) / t;
        f(x) / (t * t)
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Integrates `f` over the whole real line.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, opts: QuadOptions) -> Result<QuadResult> {
    let g = |t: f64| {
        let x = (1.0 - t) / t;
        (f(x) + f(-x)) / (t * t)
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Wynn epsilon acceleration of a sequence of partial sums.
///
/// Returns the extrapolated limit using the highest even column available.
pub fn wynn_epsilon(partial_sums: &[f64]) -> f64 {
    let n = partial_sums.len();
    if n < 3 {
        return partial_sums.last().copied().unwrap_or(0.0);
    }
    // eps[k] holds column k of the epsilon table for the current diagonal.
    let mut prev: Vec<f64> = partial_sums.to_vec();
    let mut prev_prev: Vec<f64> = vec![0.0; n + 1];
    let mut best = partial_sums[n - 1];
    let mut column = 0;
    while prev.len() > 1 {
        let mut next = Vec::with_capacity(prev.len() - 1);
        for i in 0..prev.len() - 1 {
            let diff = prev[i + 1] - prev[i];
            let base = if column == 0 { 0.0 } else { prev_prev[i + 1] };
            if diff == 0.0 {
                // Converged at this depth; odd columns hold reciprocals, not estimates.
                return if column % 2 == 0 { prev[i + 1] } else { best };
            }
            next.push(base + 1.0 / diff);
        }
        column += 1;
        prev_prev = prev;
        prev = next;
        if column % 2 == 0 {
            if let Some(&last) = prev.last() {
                if last.is_finite() {
                    best = last;
                }
            }
        }
    }
    best
}

/// Computes `∫_0^∞ g(x) cos(ω x) dx` for a smooth, monotonically decaying
/// envelope `g`, by integrating between consecutive zeros of the cosine and
/// extrapolating the alternating partial sums.
pub fn cosine_transform_tail<F: Fn(f64) -> f64>(g: F, omega: f64, opts: QuadOptions) -> Result<QuadResult> {
    if omega == 0.0 {
        return integrate_to_infinity(g, 0.0, opts);
    }
    let omega = omega.abs();
    let half_period = std::f64::consts::PI / omega;
    let integrand = |x: f64| g(x) * (omega * x).cos();
    let panel_opts = QuadOptions {
        abs_tol: opts.abs_tol * 1e-3,
        ..opts
    };

    let first = integrate(&integrand, 0.0, 0.5 * half_period, panel_opts)?;
    let mut evaluations = first.evaluations;
    let mut partial = first.value;
    let mut sums = Vec::with_capacity(64);
    let mut last_estimate = f64::NAN;
    let mut start = 0.5 * half_period;
    for panel in 0..4000 {
        let end = start + half_period;
        let r = integrate(&integrand, start, end, panel_opts)?;
        evaluations += r.evaluations;
        partial += r.value;
        sums.push(partial);
        start = end;
        if sums.len() >= 12 && panel % 2 == 1 {
            let window = &sums[sums.len().saturating_sub(40)..];
            let estimate = wynn_epsilon(window);
            let delta = (estimate - last_estimate).abs();
            if delta <= opts.abs_tol.max(opts.rel_tol * estimate.abs()) {
                return Ok(QuadResult {
                    value: estimate,
                    error: delta,
                    evaluations,
                });
            }
            last_estimate = estimate;
        }
    }
    Err(Error::Numeric {
        message: "oscillatory tail extrapolation did not converge".into(),
        estimate: last_estimate,
        error: f64::NAN,
        evaluations,
    })
}
