//! Root-raised-cosine pulse taps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};

/// Minimum filter span, symbols.
pub const MIN_SPAN: usize = 16;

/// RRC pulse with unit symbol period, before normalization.
fn rrc(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
        let a = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// `span·osf + 1` symmetric taps sampled at `Ts/osf`, scaled so that
/// `Σ p² / osf = 1` (unit pulse energy with `Ts = 1`).
pub fn rrc_taps(rolloff: f64, span_symbols: usize, osf: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rolloff) {
        return domain(format!("roll-off must lie in [0, 1], got {rolloff}"));
    }
    if span_symbols < MIN_SPAN {
        return domain(format!("filter span must be at least {MIN_SPAN} symbols, got {span_symbols}"));
    }
    if osf < 2 {
        return domain(format!("oversampling factor must be ≥ 2, got {osf}"));
    }
    let n = span_symbols * osf + 1;
    let mid = n / 2;
    let mut taps = vec![0.0; n];
    for i in 0..=mid {
        let v = rrc((mid - i) as f64 / osf as f64, rolloff);
        taps[i] = v;
        taps[n - 1 - i] = v;
    }
    let energy = taps.iter().map(|p| p * p).sum::<f64>() / osf as f64;
    let scale = energy.sqrt().recip();
    for p in &mut taps {
        *p *= scale;
    }
    Ok(taps)
}

/// Taps rescaled to `Σ h² = 1`, the form used by the simulator.
pub(crate) fn unit_norm_taps(rolloff: f64, span_symbols: usize, osf: usize) -> Result<Vec<f64>> {
    let scale = (osf as f64).sqrt().recip();
    Ok(rrc_taps(rolloff, span_symbols, osf)?.into_iter().map(|p| p * scale).collect())
}

/// Raised-cosine cascade sampled at symbol instants, peak normalized to 1.
pub fn symbol_rate_cascade(taps: &[f64], osf: usize) -> Vec<f64> {
    let n = taps.len();
    let full: Vec<f64> = (0..2 * n - 1)
        .map(|m| {
            let lo = m.saturating_sub(n - 1);
            let hi = m.min(n - 1);
            (lo..=hi).map(|i| taps[i] * taps[n - 1 - (m - i)]).sum()
        })
        .collect();
    let centre = n - 1;
    let peak = full[centre];
    let first = centre % osf;
    full[first..].iter().step_by(osf).map(|v| v / peak).collect()
}
