//! Signal-to-interference measurement on symbol-rate samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest symbols accepted by the SIR estimators.
pub const MIN_SIR_SYMBOLS: usize = 10_000;
/// Reported ceiling, dB.
pub const SIR_CAP_DB: f64 = 80.0;
const BATCHES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirEstimate {
    pub sir_db: f64,
    /// Standard error from batch means, dB.
    pub se_db: f64,
    pub n_symbols: usize,
    /// The interference was at or below the cap.
    pub capped: bool,
}

/// SIR with the wanted signal given explicitly per symbol:
/// `E|ref|² / (E|rx − ref|² − noise_var)`.
pub fn measure_sir_against(reference: &[Complex64], rx: &[Complex64], noise_var: f64) -> Result<SirEstimate> {
    if reference.len() != rx.len() {
        return Err(Error::InvalidParameter("reference and rx lengths differ".into()));
    }
    let n = rx.len();
    if n < MIN_SIR_SYMBOLS {
        return Err(Error::InsufficientSamples {
            needed: MIN_SIR_SYMBOLS,
            got: n,
        });
    }
    let ratio_db = |r: &[Complex64], y: &[Complex64]| {
        let s = r.iter().map(|v| v.norm_sqr()).sum::<f64>() / r.len() as f64;
        let i = y.iter().zip(r).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / r.len() as f64 - noise_var;
        if i <= s * 10f64.powf(-SIR_CAP_DB / 10.0) {
            SIR_CAP_DB
        } else {
            10.0 * (s / i).log10()
        }
    };
    let sir_db = ratio_db(reference, rx);
    let b = n / BATCHES;
    let batch: Vec<f64> = (0..BATCHES)
        .map(|k| ratio_db(&reference[k * b..(k + 1) * b], &rx[k * b..(k + 1) * b]))
        .collect();
    let mean = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(SirEstimate {
        sir_db,
        se_db: (var / BATCHES as f64).sqrt(),
        n_symbols: n,
        capped: sir_db >= SIR_CAP_DB,
    })
}

/// SIR with the wanted signal `g·x`, `g = Σ y·x* / Σ|x|²` fitted by least squares.
pub fn measure_sir(tx: &[Complex64], rx: &[Complex64], noise_var: f64) -> Result<SirEstimate> {
    if tx.len() != rx.len() {
        return Err(Error::InvalidParameter("tx and rx lengths differ".into()));
    }
    let num: Complex64 = rx.iter().zip(tx).map(|(y, x)| y * x.conj()).sum();
    let den: f64 = tx.iter().map(|x| x.norm_sqr()).sum();
    let g = num / den;
    let reference: Vec<Complex64> = tx.iter().map(|x| g * x).collect();
    measure_sir_against(&reference, rx, noise_var)
}
