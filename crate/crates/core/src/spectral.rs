//! PSD estimation from sample streams and model-versus-estimate comparison.
//!
//! Internally every model PSD is two-sided (rad²/Hz over `(-∞, ∞)`); the
//! Welch estimator returns a one-sided density over `[0, fs/2]`. The only
//! place where the two conventions meet is [`one_sided_from_two_sided`].

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Linear power ratio to decibels.
pub fn db(linear: f64) -> Result<f64> {
    if linear > 0.0 && linear.is_finite() {
        Ok(10.0 * linear.log10())
    } else {
        domain(format!("db() needs a positive finite value, got {linear}"))
    }
}

/// Decibels to linear power ratio.
pub fn undb(level_db: f64) -> f64 {
    10f64.powf(level_db / 10.0)
}

/// Converts a two-sided density into the one-sided value at the same `f > 0`.
pub fn one_sided_from_two_sided(two_sided: f64) -> f64 {
    2.0 * two_sided
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // Periodic Hann, the usual choice for spectral averaging.
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fractional overlap in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 1 << 14,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

/// One-sided PSD estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    /// One-sided linear density, units²/Hz.
    pub psd: Vec<f64>,
    pub n_segments: usize,
    pub window: Window,
    /// Bin spacing `fs / segment_len`.
    pub resolution: f64,
    /// Set when segment means drift more than a stationary input allows.
    pub nonstationary: bool,
}

impl PsdEstimate {
    /// Rectangle-rule integral of the density over `[0, fs/2]`.
    pub fn total_power(&self) -> f64 {
        let n = self.psd.len();
        self.psd
            .iter()
            .enumerate()
            .map(|(i, p)| if i == 0 || i == n - 1 { 0.5 * p } else { *p })
            .sum::<f64>()
            * self.resolution
    }
}

/// Averaged modified periodogram.
///
/// Normalized so that a white input of variance σ² reads `2σ²/fs` in every
/// interior bin, i.e. the density integrates to the variance over `[0, fs/2]`.
pub fn welch_psd(samples: &[f64], fs: f64, cfg: WelchConfig) -> Result<PsdEstimate> {
    let n = cfg.segment_len;
    if n < 8 || !n.is_power_of_two() {
        return domain(format!("segment length must be a power of two ≥ 8, got {n}"));
    }
    if samples.len() < 4 * n {
        return Err(Error::InsufficientSamples {
            needed: 4 * n,
            got: samples.len(),
        });
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return domain(format!("overlap must lie in [0, 1), got {}", cfg.overlap));
    }
    if !(fs > 0.0) {
        return domain(format!("sample rate must be positive, got {fs}"));
    }

    let window = cfg.window.coefficients(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let step = ((n as f64) * (1.0 - cfg.overlap)).round().max(1.0) as usize;
    let fft = FftPlanner::new().plan_fft_forward(n);

    let bins = n / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut segments = 0;
    let mut start = 0;
    while start + n <= samples.len() {
        let seg = &samples[start..start + n];
        for (b, (&x, &w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let scale = 1.0 / (fs * window_power * segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let resolution = fs / n as f64;
    let freqs = (0..bins).map(|k| k as f64 * resolution).collect();

    Ok(PsdEstimate {
        freqs,
        psd,
        n_segments: segments,
        window: cfg.window,
        resolution,
        nonstationary: drift_detected(samples),
    })
}

/// Drift test over 16 blocks: for a stationary record whose correlation time
/// is short against a block, the overall variance matches the mean
/// within-block variance; for a random walk it is about 16 times larger.
fn drift_detected(samples: &[f64]) -> bool {
    const BLOCKS: usize = 16;
    let q = samples.len() / BLOCKS;
    if q < 2 {
        return false;
    }
    let var = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    let within = (0..BLOCKS).map(|i| var(&samples[i * q..(i + 1) * q])).sum::<f64>() / BLOCKS as f64;
    var(&samples[..BLOCKS * q]) > 4.0 * within
}

/// Per-bin deviation statistics of an estimate against a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdComparison {
    pub max_abs_dev_db: f64,
    pub rms_dev_db: f64,
    pub mean_dev_db: f64,
    pub n_bins: usize,
    /// `(freq_hz, est_db, model_db, dev_db)` for every compared bin.
    pub rows: Vec<(f64, f64, f64, f64)>,
}

/// Compares a one-sided estimate with a two-sided model over `band` (Hz).
///
/// The DC and Nyquist bins are skipped: they are not folded, and their
/// periodogram has half the degrees of freedom of the others.
pub fn compare_psd<M>(est: &PsdEstimate, model_two_sided: M, band: (f64, f64)) -> Result<PsdComparison>
where
    M: Fn(f64) -> f64,
{
    let (lo, hi) = band;
    let nyquist = est.freqs.last().copied().unwrap_or(0.0);
    if !(lo < hi) || lo < 0.0 || hi > nyquist * (1.0 + 1e-12) {
        return domain(format!("band [{lo}, {hi}] is not within the estimate support [0, {nyquist}]"));
    }
    let mut rows = Vec::new();
    for (&f, &p) in est.freqs.iter().zip(&est.psd) {
        if f < lo || f > hi || f == 0.0 || f == nyquist {
            continue;
        }
        let est_db = db(p)?;
        let model_db = db(one_sided_from_two_sided(model_two_sided(f)))?;
        rows.push((f, est_db, model_db, est_db - model_db));
    }
    if rows.is_empty() {
        return domain(format!("no estimate bins inside [{lo}, {hi}]"));
    }
    let n = rows.len() as f64;
    let max_abs_dev_db = rows.iter().map(|r| r.3.abs()).fold(0.0, f64::max);
    let rms_dev_db = (rows.iter().map(|r| r.3 * r.3).sum::<f64>() / n).sqrt();
    let mean_dev_db = rows.iter().map(|r| r.3).sum::<f64>() / n;
    Ok(PsdComparison {
        max_abs_dev_db,
        rms_dev_db,
        mean_dev_db,
        n_bins: rows.len(),
        rows,
    })
}
