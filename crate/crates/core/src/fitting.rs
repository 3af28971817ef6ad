//! Least-squares fits of Lorentzian processes to tabulated PSD points.
//!
//! The objective is the RMS error in dB over the supplied points. Each
//! process is parameterized as `(log10 f3db, ℓ100 dB, ℓ∞ dB)` and optimized
//! with Nelder–Mead.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::points::{validate_points, PsdPoint};
use crate::psd_models::{OscillatorParams, F_REF_DEFAULT};

/// Evaluation cap per optimizer run.
pub const MAX_EVALUATIONS: usize = 20_000;
/// Relative spread of simplex values at which the optimizer stops.
pub const REL_TOL: f64 = 1e-6;
/// Largest number of processes accepted by [`fit_composite`].
pub const MAX_PROCESSES: usize = 4;

const LOG_F3_RANGE: (f64, f64) = (-8.0, 12.0);
const LEVEL_RANGE: (f64, f64) = (-300.0, 60.0);
/// Parameters of a process too weak to change any point.
const NEGLIGIBLE: [f64; 3] = [0.0, -300.0, -300.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted processes, sorted by increasing `f3db`.
    pub params: Vec<OscillatorParams>,
    pub residual_rms_db: f64,
    /// Objective evaluations over all optimizer runs.
    pub iterations: usize,
    pub converged: bool,
    /// Some process has `f3db` below the lowest supplied frequency.
    pub free_running_like: bool,
    /// Residual after each greedy stage (the last one includes the joint polish).
    pub stage_residuals_db: Vec<f64>,
}

struct NmResult {
    x: Vec<f64>,
    fx: f64,
    evals: usize,
    converged: bool,
}

/// Nelder–Mead with standard coefficients (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2). Stops when the spread of simplex values
/// is within `rel_tol` of the best value, or after `max_evals` evaluations.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], steps: &[f64], max_evals: usize, rel_tol: f64) -> NmResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        if (worst - best).abs() <= rel_tol * best.abs() + 1e-12 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            (xc.clone(), f(&xc))
        } else {
            let xc = along(0.5);
            (xc.clone(), f(&xc))
        };
        evals += 1;
        if fc < fr.min(values[n]) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
            }
            values[i] = f(&simplex[i]);
        }
        evals += n;
    }
    let i = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NmResult {
        x: simplex[i].clone(),
        fx: values[i],
        evals,
        converged,
    }
}

fn clamp_process(v: &[f64]) -> [f64; 3] {
    [
        v[0].clamp(LOG_F3_RANGE.0, LOG_F3_RANGE.1),
        v[1].clamp(LEVEL_RANGE.0, LEVEL_RANGE.1),
        v[2].clamp(LEVEL_RANGE.0, LEVEL_RANGE.1),
    ]
}

/// Linear PSD of one process from its `(log10 f3db, ℓ100 dB, ℓ∞ dB)` vector.
fn process_linear(v: &[f64], f: f64) -> f64 {
    let [lf3, l100, linf] = clamp_process(v);
    let f3 = 10f64.powf(lf3);
    F_REF_DEFAULT * F_REF_DEFAULT * 10f64.powf(l100 / 10.0) / (f3 * f3 + f * f) + 10f64.powf(linf / 10.0)
}

fn model_db(x: &[f64], f: f64) -> f64 {
    10.0 * x.chunks(3).map(|p| process_linear(p, f)).sum::<f64>().log10()
}

fn rms_db(x: &[f64], points: &[PsdPoint]) -> f64 {
    let ss: f64 = points.iter().map(|p| (model_db(x, p.freq_hz) - p.level_db).powi(2)).sum();
    let r = (ss / points.len() as f64).sqrt();
    if r.is_finite() {
        r
    } else {
        f64::MAX
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Deterministic starting point.
///
/// * ℓ100: from the point of the −20 dB/dec segment (local slope in
///   [−25, −15] dB/dec) closest to `f_ref`, carried along the slope to `f_ref`.
/// * f3db: where the median of the low-frequency plateau (|slope| < 5 dB/dec
///   before the segment) meets that line.
/// * ℓ∞: median of the high-frequency plateau after the segment.
fn initial_guess(points: &[PsdPoint]) -> [f64; 3] {
    let n = points.len();
    // slope around point i: backward difference for the last point, forward otherwise
    let slope = |i: usize| {
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
        (points[b].level_db - points[a].level_db) / (points[b].freq_hz / points[a].freq_hz).log10()
    };
    let slopes: Vec<f64> = (0..n).map(slope).collect();
    let segment: Vec<usize> = (0..n).filter(|&i| (-25.0..=-15.0).contains(&slopes[i])).collect();
    let anchor = if segment.is_empty() {
        (0..n).min_by(|&a, &b| (slopes[a] + 20.0).abs().total_cmp(&(slopes[b] + 20.0).abs())).unwrap()
    } else {
        *segment
            .iter()
            .min_by(|&&a, &&b| {
                (points[a].freq_hz / F_REF_DEFAULT).log10().abs().total_cmp(&(points[b].freq_hz / F_REF_DEFAULT).log10().abs())
            })
            .unwrap()
    };
    let first = segment.first().copied().unwrap_or(anchor);
    let last = segment.last().copied().unwrap_or(anchor);
    let l100 = points[anchor].level_db + 20.0 * (points[anchor].freq_hz / F_REF_DEFAULT).log10();

    let low = median((0..first).filter(|&i| slopes[i].abs() < 5.0).map(|i| points[i].level_db).collect());
    let lf3 = match low {
        Some(l0) => (F_REF_DEFAULT.log10() + (l100 - l0) / 20.0).min((points[first].freq_hz).log10()),
        None => points[0].freq_hz.log10() - 1.0,
    };
    let high = median((last + 1..n).filter(|&i| slopes[i].abs() < 5.0).map(|i| points[i].level_db).collect());
    let linf = high.unwrap_or_else(|| points.iter().map(|p| p.level_db).fold(f64::INFINITY, f64::min) - 20.0);
    clamp_process(&[lf3, l100, linf])
}

fn check_points(points: &[PsdPoint]) -> Result<()> {
    validate_points(points)?;
    if points.len() < 4 {
        return invalid(format!("need at least 4 points, got {}", points.len()));
    }
    if points[points.len() - 1].freq_hz / points[0].freq_hz < 100.0 {
        return invalid("points must span at least two decades");
    }
    Ok(())
}

/// Repeats Nelder–Mead from the previous optimum until it stops improving.
fn polish(x0: &[f64], points: &[PsdPoint]) -> NmResult {
    let steps: Vec<f64> = (0..x0.len()).map(|j| [0.5, 3.0, 5.0][j % 3]).collect();
    let mut res = nelder_mead(|x| rms_db(x, points), x0, &steps, MAX_EVALUATIONS, REL_TOL);
    let mut total = res.evals;
    for _ in 0..4 {
        let again = nelder_mead(|x| rms_db(x, points), &res.x, &steps, MAX_EVALUATIONS, REL_TOL);
        total += again.evals;
        let improved = again.fx < res.fx * (1.0 - REL_TOL) - 1e-12;
        let converged = again.converged;
        if again.fx <= res.fx {
            res = again;
        }
        res.converged = converged;
        if !improved {
            break;
        }
    }
    res.evals = total;
    res
}

fn to_result(x: &[f64], points: &[PsdPoint], evals: usize, converged: bool, stages: Vec<f64>) -> Result<FitResult> {
    let mut params = x
        .chunks(3)
        .map(|v| {
            let [lf3, l100, linf] = clamp_process(v);
            OscillatorParams::new(10f64.powf(lf3), 10f64.powf(l100 / 10.0), 10f64.powf(linf / 10.0))
        })
        .collect::<Result<Vec<_>>>()?;
    params.sort_by(|a, b| a.f3db().total_cmp(&b.f3db()));
    let fmin = points[0].freq_hz;
    let residual = rms_db(x, points);
    Ok(FitResult {
        free_running_like: params.iter().any(|p| p.f3db() < fmin),
        params,
        residual_rms_db: residual,
        iterations: evals,
        converged,
        stage_residuals_db: stages,
    })
}

/// Fits one Lorentzian process with floor.
pub fn fit_single(points: &[PsdPoint]) -> Result<FitResult> {
    check_points(points)?;
    let res = polish(&initial_guess(points), points);
    to_result(&res.x, points, res.evals, res.converged, vec![res.fx])
}

/// Starting points for an added process: the residual-stage candidate plus
/// one corner per half decade across the data, each with its level set from
/// the data just above the corner. Every start gets a short search with the
/// existing processes held fixed; the best one wins.
fn scan_added_process(x: &[f64], residual_fit: &[f64], points: &[PsdPoint]) -> (Vec<f64>, usize) {
    let lo = points[0].freq_hz.log10() - 1.0;
    let hi = points[points.len() - 1].freq_hz.log10();
    let n_corners = ((hi - lo) * 2.0).ceil() as usize + 1;
    let floor = points.iter().map(|p| p.level_db).fold(f64::INFINITY, f64::min) - 20.0;
    let mut starts = vec![clamp_process(residual_fit)];
    for j in 0..n_corners {
        let lf3 = lo + 0.5 * j as f64;
        let near: Vec<f64> = points
            .iter()
            .filter(|p| (lf3..lf3 + 1.0).contains(&p.freq_hz.log10()))
            .map(|p| p.level_db + 20.0 * (p.freq_hz.max(10f64.powf(lf3)) / F_REF_DEFAULT).log10())
            .collect();
        if let Some(l100) = median(near) {
            starts.push(clamp_process(&[lf3, l100, floor]));
        }
    }
    let objective = |c: &[f64]| {
        let full: Vec<f64> = x.iter().chain(c).copied().collect();
        rms_db(&full, points)
    };
    let mut evals = 0;
    let mut best = (starts[0].to_vec(), f64::INFINITY);
    for s in &starts {
        let r = nelder_mead(objective, s, &[0.5, 3.0, 5.0], 2000, REL_TOL);
        evals += r.evals;
        if r.fx < best.1 {
            best = (r.x, r.fx);
        }
    }
    (best.0, evals)
}

/// Greedy stagewise fit of `k` independent processes.
///
/// Stage `j` fits a single process to what the first `j − 1` leave
/// unexplained (linear difference, floored at 10% of each point), then
/// jointly re-optimizes all `j` processes. The polish starts from the better
/// of the stagewise candidate and the previous solution padded with a
/// negligible process, so stage residuals never increase.
pub fn fit_composite(points: &[PsdPoint], k: usize) -> Result<FitResult> {
    check_points(points)?;
    if !(1..=MAX_PROCESSES).contains(&k) {
        return invalid(format!("k must be in 1..={MAX_PROCESSES}, got {k}"));
    }
    let first = polish(&initial_guess(points), points);
    let mut x = first.x;
    let mut fx = first.fx;
    let mut evals = first.evals;
    let mut converged = first.converged;
    let mut stages = vec![fx];

    for _ in 1..k {
        let residual_points: Vec<PsdPoint> = points
            .iter()
            .map(|p| {
                let target = 10f64.powf(p.level_db / 10.0);
                let explained = 10f64.powf(model_db(&x, p.freq_hz) / 10.0);
                PsdPoint {
                    freq_hz: p.freq_hz,
                    level_db: 10.0 * (target - explained).max(0.1 * target).log10(),
                }
            })
            .collect();
        let cand = polish(&initial_guess(&residual_points), &residual_points);
        evals += cand.evals;
        let (best_added, scan_evals) = scan_added_process(&x, &cand.x, points);
        evals += scan_evals;

        let with_cand: Vec<f64> = x.iter().chain(&best_added).copied().collect();
        let with_null: Vec<f64> = x.iter().chain(&NEGLIGIBLE).copied().collect();
        let start = if rms_db(&with_cand, points) <= rms_db(&with_null, points) { with_cand } else { with_null };
        let start_fx = rms_db(&start, points);
        let joint = polish(&start, points);
        evals += joint.evals;
        converged = joint.converged;
        if joint.fx <= start_fx {
            x = joint.x;
            fx = joint.fx;
        } else {
            x = start;
            fx = start_fx;
        }
        stages.push(fx);
    }
    to_result(&x, points, evals, converged, stages)
}

/// Points sampled from a fitted model at the given frequencies.
pub fn model_points(params: &[OscillatorParams], freqs: &[f64]) -> Result<Vec<PsdPoint>> {
    freqs
        .iter()
        .map(|&f| {
            let s: f64 = params.iter().map(|p| crate::psd_models::pn_psd(p, f)).sum::<Result<f64>>()?;
            Ok(PsdPoint {
                freq_hz: f,
                level_db: 10.0 * s.log10(),
            })
        })
        .collect()
}
