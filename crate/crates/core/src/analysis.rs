//! Closed-form error metrics of the symbol-rate phase-noise channel.
//!
//! For a free-running oscillator seen through an ideal sinc matched filter,
//! all metrics depend on the single ratio `ρ = π·f_ref²·ℓ100²·Ts` between the
//! phasor bandwidth and the signal bandwidth. The closed forms are rewritten
//! so that no expression cancels catastrophically at small or large `ρ`.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::psd_models::OscillatorParams;

/// Phasor-to-signal bandwidth ratio, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Rho(f64);

impl Rho {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            domain(format!("rho must be finite and > 0, got {value}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Rho {
    type Error = crate::error::Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Rho> for f64 {
    fn from(r: Rho) -> f64 {
        r.0
    }
}

/// `η = η_D + η_ISI` together with the resulting SIR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub rho: f64,
    pub eta: f64,
    pub eta_d: f64,
    pub eta_isi: f64,
    pub sir_linear: f64,
}

impl ErrorBreakdown {
    pub fn new(rho: Rho) -> Self {
        Self {
            rho: rho.0,
            eta: eta(rho),
            eta_d: eta_d(rho),
            eta_isi: eta_isi(rho),
            sir_linear: sir_from_rho(rho),
        }
    }

    pub fn sir_db(&self) -> f64 {
        10.0 * self.sir_linear.log10()
    }
}

/// `ρ = π·f_ref²·ℓ100²·ts`. Only the Lorentzian level enters; `f3db` is ignored.
pub fn rho(params: &OscillatorParams, ts: f64) -> Result<Rho> {
    Rho::new(params.phasor_bandwidth() * ts)
}

fn alias_inputs(params: &OscillatorParams, ts: f64) -> Result<f64> {
    if params.f3db() == 0.0 {
        return domain("aliasing variance needs f3db > 0");
    }
    if !(ts > 0.0 && ts.is_finite()) {
        return domain(format!("sampling period must be finite and > 0, got {ts}"));
    }
    Ok(2.0 * ts * params.f3db())
}

/// Phase power folded into the band by sampling at `ts`, rad².
pub fn aliasing_variance(params: &OscillatorParams, ts: f64) -> Result<f64> {
    let x = alias_inputs(params, ts)?;
    // 1 − (2/π)·atan(1/x) = (2/π)·atan(x) for x > 0
    Ok(params.phasor_bandwidth() / params.f3db() * FRAC_2_PI * x.atan())
}

/// Aliased power relative to the in-band power.
pub fn normalized_aliasing(params: &OscillatorParams, ts: f64) -> Result<f64> {
    let x = alias_inputs(params, ts)?;
    Ok(x.atan() / x.recip().atan())
}

/// `(atan(x) − x)/x²`, accurate for small `x`.
fn atan_defect(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // −x/3 + x³/5 − x⁵/7 + …
        let x2 = x * x;
        let mut pow = x;
        let mut sum = 0.0f64;
        let mut k = 3.0;
        let mut sign = -1.0;
        loop {
            let term = sign * pow / k;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break sum;
            }
            pow *= x2;
            k += 2.0;
            sign = -sign;
        }
    } else {
        (x.atan() - x) / (x * x)
    }
}

struct Parts {
    rho: f64,
    /// atan(1/ρ)
    a: f64,
    /// ln(1 + 1/ρ²)
    l: f64,
}

impl Parts {
    fn new(r: Rho) -> Self {
        let rho = r.0;
        let x = rho.recip();
        Self {
            rho,
            a: x.atan(),
            // ln(1 + x²) loses nothing for small x via ln_1p; for tiny ρ, x² overflows,
            // so use 2·ln(x) + ln(1 + ρ²) instead.
            l: if rho < 1e-150 { -2.0 * rho.ln() + (rho * rho).ln_1p() } else { (x * x).ln_1p() },
        }
    }
}

/// Total mean-square error `E|e^{jθ_k} − y_k|²` for unit-power symbols.
pub fn eta(r: Rho) -> f64 {
    let p = Parts::new(r);
    // 1 − (2/π)·atan(1/ρ) = (2/π)·atan(ρ)
    FRAC_2_PI * (p.rho.atan() + 0.5 * p.rho * p.l)
}

/// Mean-square error of the direct (ℓ = 0) term.
pub fn eta_d(r: Rho) -> f64 {
    let p = Parts::new(r);
    if p.rho <= 1.0 {
        FRAC_2_PI * (p.rho.atan() + p.rho - p.a * p.rho * p.rho)
    } else {
        let x = p.rho.recip();
        FRAC_2_PI * (p.rho.atan() - atan_defect(x))
    }
}

/// Power of the intersymbol interference terms (ℓ ≠ 0).
pub fn eta_isi(r: Rho) -> f64 {
    let p = Parts::new(r);
    if p.rho <= 1.0 {
        FRAC_2_PI * (p.a * p.rho * p.rho + 0.5 * p.rho * p.l - p.rho)
    } else {
        let x = p.rho.recip();
        FRAC_2_PI * (atan_defect(x) + 0.5 * (x * x).ln_1p() / x)
    }
}

/// `E|g_0|²`, the mean power of the direct gain.
pub fn gamma0(r: Rho) -> f64 {
    let p = Parts::new(r);
    if p.rho <= 1.0 {
        FRAC_2_PI * (p.a * (1.0 - p.rho) * (1.0 + p.rho) - p.rho * p.l + p.rho)
    } else {
        let x = p.rho.recip();
        FRAC_2_PI * (x.atan() - atan_defect(x) - (x * x).ln_1p() / x)
    }
}

/// `Σ_ℓ E|g_ℓ|²`, the received signal power; equals `E{e^{−jθ_k} g_{0,k}}`.
pub fn sum_gamma(r: Rho) -> f64 {
    let p = Parts::new(r);
    FRAC_2_PI * (p.a - 0.5 * p.rho * p.l)
}

/// `γ0 / Σ_{ℓ≠0} γℓ`.
pub fn sir_from_rho(r: Rho) -> f64 {
    gamma0(r) / eta_isi(r)
}

/// SIR parameterized by the random-walk increment standard deviation, rad.
pub fn sir_from_sigma_u(sigma_u: f64) -> Result<f64> {
    if !(sigma_u > 0.0 && sigma_u.is_finite()) {
        return domain(format!("sigma_u must be finite and > 0, got {sigma_u}"));
    }
    Ok(sir_from_rho(Rho::new(sigma_u * sigma_u / (4.0 * PI))?))
}

pub fn sir_db(r: Rho) -> f64 {
    10.0 * sir_from_rho(r).log10()
}
