//! Closed-form phase-noise and phasor spectra.
//!
//! A single oscillator is described by a one-pole Lorentzian phase PSD
//!
//! ```text
//! S(f) = f_ref²·ℓ100² / (f3db² + f²) + ℓ∞²
//! ```
//!
//! All densities are two-sided, in rad²/Hz over `(-∞, ∞)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::spectral::{db, undb};

/// Default calibration offset frequency, Hz.
pub const F_REF_DEFAULT: f64 = 1e5;

/// Ratio `f3db / f_ref` above which the ℓ0 ↔ ℓ100 approximation is flagged.
pub const VALIDITY_RATIO: f64 = 0.1;

/// Ratio `f3db / B` at and above which the phase-locked phasor form is used.
pub const PLL_BRANCH_RATIO: f64 = 10.0;

/// Largest floor bandwidth accepted by [`phasor_psd_with_floor`], Hz.
pub const MAX_FLOOR_BANDWIDTH: f64 = 1e10;

/// Largest `ℓ∞²·Bθ` accepted by [`phasor_psd_with_floor`].
pub const MAX_FLOOR_POWER: f64 = 0.1;

/// Parameters of one Lorentzian phase-noise process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOscillatorParams")]
pub struct OscillatorParams {
    f3db: f64,
    l100_sq: f64,
    linf_sq: f64,
    f_ref: f64,
}

/// Accepts either linear (`l100_sq`, `linf_sq`) or dB (`l100_db`, `linf_db`) levels.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOscillatorParams {
    f3db: f64,
    l100_sq: Option<f64>,
    l100_db: Option<f64>,
    linf_sq: Option<f64>,
    linf_db: Option<f64>,
    f_ref: Option<f64>,
}

impl TryFrom<RawOscillatorParams> for OscillatorParams {
    type Error = Error;

    fn try_from(raw: RawOscillatorParams) -> Result<Self> {
        let l100_sq = match (raw.l100_sq, raw.l100_db) {
            (Some(v), None) => v,
            (None, Some(d)) => undb(d),
            (Some(_), Some(_)) => return invalid("give l100_sq or l100_db, not both"),
            (None, None) => return invalid("missing l100_sq / l100_db"),
        };
        let linf_sq = match (raw.linf_sq, raw.linf_db) {
            (Some(v), None) => v,
            (None, Some(d)) => undb(d),
            (Some(_), Some(_)) => return invalid("give linf_sq or linf_db, not both"),
            (None, None) => 0.0,
        };
        Self::with_f_ref(raw.f3db, l100_sq, linf_sq, raw.f_ref.unwrap_or(F_REF_DEFAULT))
    }
}

impl OscillatorParams {
    /// Builds a parameter set with the default `f_ref`.
    pub fn new(f3db: f64, l100_sq: f64, linf_sq: f64) -> Result<Self> {
        Self::with_f_ref(f3db, l100_sq, linf_sq, F_REF_DEFAULT)
    }

    pub fn with_f_ref(f3db: f64, l100_sq: f64, linf_sq: f64, f_ref: f64) -> Result<Self> {
        if !(f3db >= 0.0 && f3db.is_finite()) {
            return invalid(format!("f3db must be finite and ≥ 0, got {f3db}"));
        }
        if !(l100_sq > 0.0 && l100_sq.is_finite()) {
            return invalid(format!("l100_sq must be finite and > 0, got {l100_sq}"));
        }
        if !(linf_sq >= 0.0 && linf_sq.is_finite()) {
            return invalid(format!("linf_sq must be finite and ≥ 0, got {linf_sq}"));
        }
        if !(f_ref > 0.0 && f_ref.is_finite()) {
            return invalid(format!("f_ref must be finite and > 0, got {f_ref}"));
        }
        let p = Self {
            f3db,
            l100_sq,
            linf_sq,
            f_ref,
        };
        if !p.is_valid_approximation() {
            log::warn!(
                "f3db = {f3db} Hz is not well below f_ref = {f_ref} Hz; the level at f_ref no longer sits on the 1/f² slope"
            );
        }
        Ok(p)
    }

    /// Levels in dB (`10·log10` of the linear density); `linf_db = None` means no floor.
    pub fn from_db(f3db: f64, l100_db: f64, linf_db: Option<f64>) -> Result<Self> {
        Self::new(f3db, undb(l100_db), linf_db.map_or(0.0, undb))
    }

    pub fn f3db(&self) -> f64 {
        self.f3db
    }

    pub fn l100_sq(&self) -> f64 {
        self.l100_sq
    }

    pub fn linf_sq(&self) -> f64 {
        self.linf_sq
    }

    pub fn f_ref(&self) -> f64 {
        self.f_ref
    }

    pub fn l100_db(&self) -> f64 {
        10.0 * self.l100_sq.log10()
    }

    /// `None` when there is no floor.
    pub fn linf_db(&self) -> Option<f64> {
        (self.linf_sq > 0.0).then(|| 10.0 * self.linf_sq.log10())
    }

    pub fn is_free_running(&self) -> bool {
        self.f3db == 0.0
    }

    /// `f3db ≤ f_ref / 10`.
    pub fn is_valid_approximation(&self) -> bool {
        self.f3db <= VALIDITY_RATIO * self.f_ref
    }

    /// Copy with the floor removed.
    pub fn without_floor(&self) -> Self {
        Self {
            linf_sq: 0.0,
            ..*self
        }
    }

    /// `B = π·f_ref²·ℓ100²`: Lorentzian half-width of a free-running phasor, Hz.
    pub fn phasor_bandwidth(&self) -> f64 {
        PI * self.f_ref * self.f_ref * self.l100_sq
    }

    /// `f_ref²·ℓ100²`, the numerator of the Lorentzian term.
    pub fn numerator(&self) -> f64 {
        self.f_ref * self.f_ref * self.l100_sq
    }
}

/// Phase PSD at `f` (two-sided, rad²/Hz).
pub fn pn_psd(params: &OscillatorParams, f: f64) -> Result<f64> {
    if !f.is_finite() {
        return domain(format!("frequency must be finite, got {f}"));
    }
    if params.f3db == 0.0 && f == 0.0 {
        return domain("free-running PSD singular at f=0");
    }
    Ok(params.numerator() / (params.f3db * params.f3db + f * f) + params.linf_sq)
}

/// Low-frequency plateau `ℓ0² ≈ f_ref²·ℓ100²/f3db²`.
pub fn l0_sq_from_l100(params: &OscillatorParams) -> Result<f64> {
    if params.f3db == 0.0 {
        return domain("free-running process has no finite low-frequency plateau");
    }
    Ok(params.numerator() / (params.f3db * params.f3db))
}

/// Plateau from the measured level `ℓ100²` at `f_ref` without the
/// `f3db ≪ f_ref` and `ℓ0 ≫ ℓ∞` approximations.
pub fn l0_sq_exact(params: &OscillatorParams) -> Result<f64> {
    if params.f3db == 0.0 {
        return domain("free-running process has no finite low-frequency plateau");
    }
    let (f3, fr) = (params.f3db, params.f_ref);
    Ok(params.l100_sq * (fr * fr + f3 * f3) / (f3 * f3) - params.linf_sq)
}

fn require_no_floor(params: &OscillatorParams, what: &str) -> Result<()> {
    if params.linf_sq != 0.0 {
        return domain(format!(
            "{what} is defined for linf_sq = 0; drop the floor with without_floor()"
        ));
    }
    Ok(())
}

/// Phase autocorrelation `R(τ) = (B/f3db)·exp(−2π·f3db·|τ|)`, rad².
pub fn pn_autocorr(params: &OscillatorParams, tau: f64) -> Result<f64> {
    require_no_floor(params, "pn_autocorr")?;
    if params.f3db == 0.0 {
        return domain("free-running phase is nonstationary; describe it by its Wiener increments");
    }
    if !tau.is_finite() {
        return domain(format!("lag must be finite, got {tau}"));
    }
    let c = params.phasor_bandwidth() / params.f3db;
    Ok(c * (-2.0 * PI * params.f3db * tau.abs()).exp())
}

/// Phasor autocorrelation `E{e^{j(θ(t+τ)−θ(t))}}`.
pub fn phasor_autocorr(params: &OscillatorParams, tau: f64) -> Result<f64> {
    require_no_floor(params, "phasor_autocorr")?;
    if !tau.is_finite() {
        return domain(format!("lag must be finite, got {tau}"));
    }
    let b = params.phasor_bandwidth();
    let t = tau.abs();
    if params.f3db == 0.0 {
        return Ok((-2.0 * b * PI * t).exp());
    }
    let f3 = params.f3db;
    let c = b / f3;
    // 1 − e^{−x} via expm1 keeps small lags accurate.
    Ok((c * (-2.0 * PI * f3 * t).exp_m1()).exp())
}

/// Phasor PSD sample: a symbolic delta at DC plus a continuous density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorPsdValue {
    pub delta_weight: f64,
    pub continuous: f64,
}

/// Which closed form a phasor spectrum is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasorBranch {
    FreeRunning,
    PhaseLocked,
    General,
}

/// Branch used for `params` by [`phasor_psd`].
pub fn phasor_branch(params: &OscillatorParams) -> PhasorBranch {
    if params.f3db == 0.0 {
        PhasorBranch::FreeRunning
    } else if params.f3db >= PLL_BRANCH_RATIO * params.phasor_bandwidth() {
        PhasorBranch::PhaseLocked
    } else {
        PhasorBranch::General
    }
}

/// Phasor spectrum as a weighted sum of Lorentzians `w·γ/(π(γ²+f²))`.
///
/// In the general branch, expanding `exp(c·e^{−2πf3|τ|})` gives a Poisson
/// mixture: weight `e^{−c}cⁿ/n!` on a Lorentzian of half-width `n·f3db`.
#[derive(Debug, Clone, PartialEq)]
struct LorentzianMixture {
    delta_weight: f64,
    /// `(weight, half_width)` pairs.
    terms: Vec<(f64, f64)>,
}

fn poisson_window(c: f64) -> (u64, u64) {
    let s = c.sqrt();
    let lo = (c - 12.0 * s - 10.0).floor().max(1.0) as u64;
    let hi = (c + 12.0 * s + 30.0).ceil() as u64;
    (lo, hi)
}

fn mixture(params: &OscillatorParams) -> LorentzianMixture {
    let b = params.phasor_bandwidth();
    let f3 = params.f3db;
    match phasor_branch(params) {
        PhasorBranch::FreeRunning => LorentzianMixture {
            delta_weight: 0.0,
            terms: vec![(1.0, b)],
        },
        PhasorBranch::PhaseLocked => {
            let c = b / f3;
            LorentzianMixture {
                delta_weight: 1.0 - c,
                terms: vec![(c, f3)],
            }
        }
        PhasorBranch::General => {
            let c = b / f3;
            let (lo, hi) = poisson_window(c);
            let ln_c = c.ln();
            let terms = (lo..=hi)
                .map(|n| {
                    let nf = n as f64;
                    let w = (nf * ln_c - c - libm::lgamma(nf + 1.0)).exp();
                    (w, nf * f3)
                })
                .filter(|(w, _)| *w > 0.0)
                .collect();
            LorentzianMixture {
                delta_weight: (-c).exp(),
                terms,
            }
        }
    }
}

impl LorentzianMixture {
    fn density(&self, f: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(w, g)| w * g / (PI * (g * g + f * f)))
            .sum()
    }

    /// Density convolved with the unit-height box of width `bw` centred at 0.
    fn boxed(&self, f: f64, bw: f64) -> f64 {
        let h = 0.5 * bw;
        let lorentz: f64 = self
            .terms
            .iter()
            .map(|&(w, g)| w / PI * atan_diff((f + h) / g, (f - h) / g))
            .sum();
        let delta = if f.abs() < h {
            self.delta_weight
        } else if f.abs() == h {
            0.5 * self.delta_weight
        } else {
            0.0
        };
        lorentz + delta
    }
}

/// `atan(a) − atan(b)` for `a ≥ b` without cancellation when both are large.
fn atan_diff(a: f64, b: f64) -> f64 {
    let prod = a * b;
    if prod > -1.0 {
        ((a - b) / (1.0 + prod)).atan()
    } else {
        // a > 0 > b with |ab| > 1: the difference exceeds π/2.
        ((a - b) / (1.0 + prod)).atan() + PI
    }
}

/// Phasor PSD (floor must be zero).
pub fn phasor_psd(params: &OscillatorParams, f: f64) -> Result<PhasorPsdValue> {
    require_no_floor(params, "phasor_psd")?;
    if !f.is_finite() {
        return domain(format!("frequency must be finite, got {f}"));
    }
    let m = mixture(params);
    Ok(PhasorPsdValue {
        delta_weight: m.delta_weight,
        continuous: m.density(f),
    })
}

/// Continuous part of the general-branch phasor PSD via numerical cosine
/// transform of the autocorrelation minus its limit `e^{−c}`.
pub fn phasor_psd_quadrature(params: &OscillatorParams, f: f64) -> Result<PhasorPsdValue> {
    require_no_floor(params, "phasor_psd_quadrature")?;
    if params.f3db == 0.0 {
        return domain("quadrature route needs f3db > 0");
    }
    if !f.is_finite() {
        return domain(format!("frequency must be finite, got {f}"));
    }
    let f3 = params.f3db;
    let c = params.phasor_bandwidth() / f3;
    let floor = (-c).exp();
    // R_h(τ) − e^{−c} = e^{−c}·(exp(c·e^{−2πf3τ}) − 1), evaluated stably.
    let excess = |t: f64| floor * (c * (-2.0 * PI * f3 * t).exp()).exp_m1();
    // Envelope ≈ e^{−c}·c·e^{−2πf3τ} once cr is small; cut where it is < 1e-12.
    let tau_max = {
        let target = 1e-12f64;
        let scale = (floor * c).max(target);
        ((scale / target).ln() / (2.0 * PI * f3)).max(1.0 / f3) + 5.0 / (2.0 * PI * f3)
    };
    let omega = 2.0 * PI * f;
    let opts = QuadOptions::with_tolerances(1e-15, 1e-11);
    let integrand = |t: f64| excess(t) * (omega * t).cos();
    // The excess falls from e^{−c}(e^c − 1) over a lag of order 1/(2π·f3·c).
    let knee = 1.0 / (2.0 * PI * f3 * c.max(1.0));
    let breaks: Vec<f64> = (1..=8)
        .map(|k| knee * 4f64.powi(k))
        .filter(|t| *t < tau_max)
        .collect();
    let value = integrate_with_breaks(integrand, 0.0, tau_max, &breaks, opts)?.value;
    Ok(PhasorPsdValue {
        delta_weight: floor,
        continuous: 2.0 * value,
    })
}

/// Phasor PSD with a white floor `ℓ∞²` band-limited to `|f| < b_theta/2`.
///
/// First-order in `ℓ∞²·Bθ`: the phasor spectrum is scaled by `1 − ℓ∞²Bθ` and
/// the floor adds its convolution with the floor-free phasor spectrum.
pub fn phasor_psd_with_floor(params: &OscillatorParams, f: f64, b_theta: f64) -> Result<PhasorPsdValue> {
    if !f.is_finite() {
        return domain(format!("frequency must be finite, got {f}"));
    }
    if !(b_theta > 0.0) {
        return domain(format!("floor bandwidth must be positive, got {b_theta}"));
    }
    if b_theta >= MAX_FLOOR_BANDWIDTH {
        return Err(Error::Validity(format!(
            "floor bandwidth {b_theta:e} Hz must stay below {MAX_FLOOR_BANDWIDTH:e} Hz"
        )));
    }
    let floor_power = params.linf_sq * b_theta;
    if floor_power >= MAX_FLOOR_POWER {
        return Err(Error::Validity(format!(
            "floor power linf_sq·b_theta = {floor_power:.3e} ≥ {MAX_FLOOR_POWER}; first-order floor expansion invalid"
        )));
    }
    let m = mixture(&params.without_floor());
    let scale = 1.0 - floor_power;
    Ok(PhasorPsdValue {
        delta_weight: scale * m.delta_weight,
        continuous: scale * m.density(f) + params.linf_sq * m.boxed(f, b_theta),
    })
}

/// Upper bound `ℓ∞⁴·Bθ²` on the variance of the first-order floor expansion error.
pub fn floor_error_bound(params: &OscillatorParams, b_theta: f64) -> f64 {
    let p = params.linf_sq * b_theta;
    p * p
}

/// Sum of independent Lorentzian processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<OscillatorParams>", into = "Vec<OscillatorParams>")]
pub struct CompositeModel {
    processes: Vec<OscillatorParams>,
}

impl TryFrom<Vec<OscillatorParams>> for CompositeModel {
    type Error = Error;

    fn try_from(processes: Vec<OscillatorParams>) -> Result<Self> {
        Self::new(processes)
    }
}

impl From<CompositeModel> for Vec<OscillatorParams> {
    fn from(m: CompositeModel) -> Self {
        m.processes
    }
}

impl From<OscillatorParams> for CompositeModel {
    fn from(p: OscillatorParams) -> Self {
        Self { processes: vec![p] }
    }
}

impl CompositeModel {
    pub fn new(processes: Vec<OscillatorParams>) -> Result<Self> {
        if processes.is_empty() {
            return invalid("composite model needs at least one process");
        }
        Ok(Self { processes })
    }

    pub fn processes(&self) -> &[OscillatorParams] {
        &self.processes
    }

    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }

    /// Two-process approximation of the 45 GHz millimetre-wave mask.
    pub fn mmwave_45ghz() -> Self {
        let low = OscillatorParams::from_db(7e2, -105.0, Some(-200.0)).expect("valid constants");
        let high = OscillatorParams::from_db(2e6, -65.0, Some(-140.0)).expect("valid constants");
        Self {
            processes: vec![low, high],
        }
    }
}

pub fn composite_psd(model: &CompositeModel, f: f64) -> Result<f64> {
    model.processes.iter().map(|p| pn_psd(p, f)).sum()
}

/// Pole/zero PSD `PSD0·Π(1+(f/fz)^αz) / Π(1+(f/fp)^αp)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThreeGpp")]
pub struct ThreeGppParams {
    psd0: f64,
    zeros: Vec<(f64, f64)>,
    poles: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct RawThreeGpp {
    psd0: f64,
    zeros: Vec<(f64, f64)>,
    poles: Vec<(f64, f64)>,
}

impl TryFrom<RawThreeGpp> for ThreeGppParams {
    type Error = Error;

    fn try_from(r: RawThreeGpp) -> Result<Self> {
        Self::new(r.psd0, r.zeros, r.poles)
    }
}

impl ThreeGppParams {
    pub fn new(psd0: f64, zeros: Vec<(f64, f64)>, poles: Vec<(f64, f64)>) -> Result<Self> {
        if !(psd0 > 0.0 && psd0.is_finite()) {
            return invalid(format!("psd0 must be positive, got {psd0}"));
        }
        if zeros.is_empty() || poles.is_empty() {
            return invalid("need at least one zero and one pole");
        }
        for &(fc, alpha) in zeros.iter().chain(&poles) {
            if !(fc > 0.0 && fc.is_finite()) {
                return invalid(format!("corner frequency must be positive, got {fc}"));
            }
            if !alpha.is_finite() {
                return invalid(format!("exponent must be finite, got {alpha}"));
            }
        }
        Ok(Self { psd0, zeros, poles })
    }

    /// 45 GHz carrier mask.
    pub fn carrier_45ghz() -> Self {
        Self {
            psd0: 3675.0,
            zeros: vec![(3e3, 2.37), (451e3, 2.7), (458e6, 2.53)],
            poles: vec![(1.0, 3.3), (1.54e6, 3.3), (30e6, 1.0)],
        }
    }

    pub fn psd0(&self) -> f64 {
        self.psd0
    }

    pub fn zeros(&self) -> &[(f64, f64)] {
        &self.zeros
    }

    pub fn poles(&self) -> &[(f64, f64)] {
        &self.poles
    }
}

pub fn threegpp_psd(p: &ThreeGppParams, f: f64) -> Result<f64> {
    if !(f > 0.0 && f.is_finite()) {
        return domain(format!("pole/zero PSD needs finite f > 0, got {f}"));
    }
    // Accumulate in the log domain; (f/fc)^α spans hundreds of decades.
    let term = |&(fc, alpha): &(f64, f64)| (alpha * (f / fc).ln()).exp().ln_1p();
    let num: f64 = p.zeros.iter().map(term).sum();
    let den: f64 = p.poles.iter().map(term).sum();
    Ok(p.psd0 * (num - den).exp())
}

/// `threegpp_psd` in dB.
pub fn threegpp_psd_db(p: &ThreeGppParams, f: f64) -> Result<f64> {
    db(threegpp_psd(p, f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{cosine_transform_tail, integrate_real_line};

    fn osc(f3: f64, l100_db: f64) -> OscillatorParams {
        OscillatorParams::from_db(f3, l100_db, None).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn calibration_and_plateau() {
        let p = osc(10.0, -88.0);
        assert!(rel(pn_psd(&p, 1e5).unwrap(), undb(-88.0)) < 1e-7);
        assert!(rel(pn_psd(&p, 0.0).unwrap(), 0.158_489_319_246_111_36) < 1e-12);
        let floored = OscillatorParams::from_db(10.0, -88.0, Some(-114.0)).unwrap();
        assert!(rel(pn_psd(&floored, 1e12).unwrap(), 10f64.powf(-11.4)) < 1e-6);
    }

    #[test]
    fn free_running_singular_at_dc() {
        let p = osc(0.0, -88.0);
        assert!(matches!(pn_psd(&p, 0.0), Err(Error::Domain(_))));
        assert!(pn_psd(&p, 1.0).is_ok());
        assert!(l0_sq_from_l100(&p).is_err());
        assert!(pn_autocorr(&p, 0.0).is_err());
    }

    #[test]
    fn plateau_relation() {
        let p = osc(10.0, -88.0);
        assert!(rel(l0_sq_from_l100(&p).unwrap(), 0.158_489_319_246_111_36) < 1e-12);
        let q = OscillatorParams::new(1e5, 2.5e-9, 0.0).unwrap();
        assert!(rel(l0_sq_from_l100(&q).unwrap(), 2.5e-9) < 1e-15);
        let f = OscillatorParams::from_db(10.0, -88.0, Some(-114.0)).unwrap();
        let gap = rel(l0_sq_from_l100(&f).unwrap(), l0_sq_exact(&f).unwrap());
        assert!(gap < 1e-4, "{gap}");
    }

    #[test]
    fn pn_autocorr_values() {
        let p = osc(10.0, -88.0);
        let r0 = pn_autocorr(&p, 0.0).unwrap();
        assert!(rel(r0, PI * 1e10 * undb(-88.0) / 10.0) < 1e-14);
        assert!((r0 - 4.979).abs() < 1e-3);
        assert!(pn_autocorr(&p, 10.0).unwrap() < 1e-200);
        assert_eq!(pn_autocorr(&p, 0.013).unwrap(), pn_autocorr(&p, -0.013).unwrap());
        let with_floor = OscillatorParams::from_db(10.0, -88.0, Some(-120.0)).unwrap();
        assert!(pn_autocorr(&with_floor, 0.0).is_err());
    }

    #[test]
    fn pn_autocorr_is_inverse_transform_of_psd() {
        for (f3, l) in [(10.0, -88.0), (1e3, -95.0), (3e4, -80.0)] {
            let p = osc(f3, l);
            let exact0 = pn_autocorr(&p, 0.0).unwrap();
            let opts = QuadOptions::with_tolerances(0.0, 1e-12);
            let num0 = integrate_real_line(|f| pn_psd(&p, f).unwrap(), opts).unwrap().value;
            assert!(rel(num0, exact0) < 1e-9, "f3={f3}: {num0} vs {exact0}");
            for tau in [0.1 / f3, 0.5 / f3] {
                let num = 2.0
                    * cosine_transform_tail(|f| pn_psd(&p, f).unwrap(), 2.0 * PI * tau, opts)
                        .unwrap()
                        .value;
                let exact = pn_autocorr(&p, tau).unwrap();
                assert!(rel(num, exact) < 1e-9, "f3={f3} tau={tau}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn psd_is_cosine_transform_of_autocorr() {
        for (f3, l) in [(10.0, -88.0), (1e3, -95.0)] {
            let p = osc(f3, l);
            let tau_max = 40.0 / (2.0 * PI * f3);
            for k in 0..=20 {
                let f = 0.5 * k as f64 * f3;
                let num = 2.0
                    * integrate_with_breaks(
                        |t| pn_autocorr(&p, t).unwrap() * (2.0 * PI * f * t).cos(),
                        0.0,
                        tau_max,
                        &[0.1 * tau_max, 0.3 * tau_max],
                        QuadOptions::with_tolerances(0.0, 1e-12),
                    )
                    .unwrap()
                    .value;
                let exact = pn_psd(&p, f).unwrap();
                assert!(rel(num, exact) < 1e-6, "f={f}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn phasor_autocorr_limits() {
        let p = osc(10.0, -88.0);
        assert_eq!(phasor_autocorr(&p, 0.0).unwrap(), 1.0);
        let lim = phasor_autocorr(&p, 1e3).unwrap();
        let c = p.phasor_bandwidth() / 10.0;
        assert!(rel(lim, (-c).exp()) < 1e-12);
        assert!((lim - 6.87e-3).abs() < 2e-5);
        let fr = osc(0.0, -88.0);
        let v = phasor_autocorr(&fr, 1e-3).unwrap();
        assert!(rel(v, (-2.0 * PI * PI * 1e10 * undb(-88.0) * 1e-3).exp()) < 1e-14);
    }

    #[test]
    fn phasor_autocorr_approaches_free_running() {
        let fr = osc(0.0, -88.0);
        let nearly = osc(1e-4, -88.0);
        for tau in [1e-4, 1e-3, 1e-2] {
            let a = phasor_autocorr(&fr, tau).unwrap();
            let b = phasor_autocorr(&nearly, tau).unwrap();
            assert!(rel(b, a) < 1e-3);
        }
    }

    #[test]
    fn phasor_branches() {
        let fr = osc(0.0, -88.0);
        assert_eq!(phasor_branch(&fr), PhasorBranch::FreeRunning);
        let v = phasor_psd(&fr, 0.0).unwrap();
        let b = fr.phasor_bandwidth();
        assert_eq!(v.delta_weight, 0.0);
        assert!(rel(v.continuous, 1.0 / (PI * b)) < 1e-14);
        assert!(rel(v.continuous, 1e10 * undb(-88.0) / (PI * PI * 1e20 * undb(-88.0).powi(2))) < 1e-12);

        let pll = osc(1e4, -88.0);
        assert_eq!(phasor_branch(&pll), PhasorBranch::PhaseLocked);
        let v = phasor_psd(&pll, 123.0).unwrap();
        assert!((v.delta_weight - 0.99502).abs() < 1e-5);
        assert!(rel(v.continuous, pn_psd(&pll, 123.0).unwrap()) < 1e-14);

        assert_eq!(phasor_branch(&osc(10.0, -88.0)), PhasorBranch::General);
    }

    fn phasor_power(p: &OscillatorParams) -> f64 {
        let v0 = phasor_psd(p, 0.0).unwrap();
        let mut breaks: Vec<f64> = vec![p.f3db.max(1e-3), p.phasor_bandwidth()];
        breaks.sort_by(f64::total_cmp);
        let head = integrate_with_breaks(
            |f| phasor_psd(p, f).unwrap().continuous,
            0.0,
            10.0 * breaks[1],
            &breaks,
            QuadOptions::with_tolerances(1e-13, 1e-12),
        )
        .unwrap();
        let tail = crate::quadrature::integrate_to_infinity(
            |f| phasor_psd(p, f).unwrap().continuous,
            10.0 * breaks[1],
            QuadOptions::with_tolerances(1e-13, 1e-12),
        )
        .unwrap();
        v0.delta_weight + 2.0 * (head.value + tail.value)
    }

    #[test]
    fn phasor_power_is_unity() {
        for p in [osc(0.0, -88.0), osc(1e4, -88.0), osc(10.0, -88.0), osc(100.0, -85.0), osc(3.0, -80.0)] {
            let total = phasor_power(&p);
            assert!((total - 1.0).abs() < 1e-6, "{p:?}: {total}");
        }
    }

    #[test]
    fn general_branch_matches_quadrature_route() {
        for (f3, l) in [(10.0, -88.0), (20.0, -90.0), (100.0, -88.0)] {
            let p = osc(f3, l);
            for f in [0.0, 0.3 * f3, f3, 7.0 * f3, p.phasor_bandwidth()] {
                let a = phasor_psd(&p, f).unwrap();
                let b = phasor_psd_quadrature(&p, f).unwrap();
                assert!(rel(b.continuous, a.continuous) < 1e-6, "f3={f3} f={f}: {} vs {}", b.continuous, a.continuous);
                assert_eq!(a.delta_weight, b.delta_weight);
            }
        }
    }

    #[test]
    fn general_branch_limits() {
        let b = osc(0.0, -88.0).phasor_bandwidth();
        // near free-running
        let near_fr = osc(b / 100.0, -88.0);
        let fr = osc(0.0, -88.0);
        for f in [b, 3.0 * b, 10.0 * b] {
            let g = phasor_psd(&near_fr, f).unwrap().continuous;
            let e = phasor_psd(&fr, f).unwrap().continuous;
            assert!(rel(g, e) < 0.02, "f={f}: {g} vs {e}");
        }
        // near PLL: force the general mixture at f3 = 100·B
        let pll = osc(100.0 * b, -88.0);
        let c = b / pll.f3db();
        let (lo, hi) = poisson_window(c);
        let general: f64 = (lo..=hi)
            .map(|n| {
                let nf = n as f64;
                let w = (nf * c.ln() - c - libm::lgamma(nf + 1.0)).exp();
                let g = nf * pll.f3db();
                w * g / (PI * (g * g + 1e4))
            })
            .sum();
        let closed = phasor_psd(&pll, 100.0).unwrap().continuous;
        assert!(rel(general, closed) < 0.02);
    }

    #[test]
    fn high_frequency_overlap() {
        for p in [osc(0.0, -88.0), osc(10.0, -88.0), osc(1e4, -88.0), osc(200.0, -80.0)] {
            let fmin = 100.0 * p.f3db().max(p.phasor_bandwidth());
            for k in 0..5 {
                let f = fmin * 10f64.powi(k);
                let h = phasor_psd(&p, f).unwrap().continuous;
                let s = pn_psd(&p, f).unwrap();
                assert!(rel(h, s) < 0.02, "{p:?} f={f}");
            }
        }
    }

    #[test]
    fn floor_term() {
        let p = OscillatorParams::from_db(0.0, -90.0, Some(-120.0)).unwrap();
        let plain = phasor_psd(&p.without_floor(), 2e3).unwrap();
        let zero_floor = phasor_psd_with_floor(&p.without_floor(), 2e3, 1e6).unwrap();
        assert_eq!(plain, zero_floor);
        let v = phasor_psd_with_floor(&p, 2e3, 1e6).unwrap();
        let flat = v.continuous - (1.0 - 1e-6) * plain.continuous;
        assert!(rel(flat, 1e-12) < 0.01);
        assert!(floor_error_bound(&p, 1e6) <= 1e-12 * (1.0 + 1e-12));
        // far outside the band the floor contribution vanishes
        let out = phasor_psd_with_floor(&p, 1e8, 1e6).unwrap();
        assert!(out.continuous < 1.001 * phasor_psd(&p.without_floor(), 1e8).unwrap().continuous);
    }

    #[test]
    fn floor_in_band_simplification() {
        let ts = 1e-7;
        for p in [
            OscillatorParams::from_db(0.0, -90.0, Some(-140.0)).unwrap(),
            OscillatorParams::from_db(10.0, -88.0, Some(-130.0)).unwrap(),
            OscillatorParams::from_db(1e4, -88.0, Some(-140.0)).unwrap(),
        ] {
            let bt = 10.0 / ts;
            for f in [1e3, 1e5, 0.5 / ts] {
                let v = phasor_psd_with_floor(&p, f, bt).unwrap().continuous;
                let simple = phasor_psd(&p.without_floor(), f).unwrap().continuous + p.linf_sq();
                assert!(rel(v, simple) < 0.01, "{p:?} f={f}: {v} vs {simple}");
            }
        }
    }

    #[test]
    fn floor_validity_guard() {
        let p = OscillatorParams::from_db(10.0, -88.0, Some(-60.0)).unwrap();
        assert!(matches!(phasor_psd_with_floor(&p, 0.0, 2e5), Err(Error::Validity(_))));
        assert!(matches!(phasor_psd_with_floor(&p.without_floor(), 0.0, 1e10), Err(Error::Validity(_))));
    }

    #[test]
    fn composite_sum() {
        let m = CompositeModel::mmwave_45ghz();
        let [low, high] = [m.processes()[0], m.processes()[1]];
        let s = composite_psd(&m, 100.0).unwrap();
        let sl = pn_psd(&low, 100.0).unwrap();
        let sh = pn_psd(&high, 100.0).unwrap();
        assert!(sl > sh);
        assert!(s >= sl && s >= sh);
        assert!(rel(s, sl + sh) < 1e-15);
        let single = CompositeModel::from(low);
        assert_eq!(composite_psd(&single, 55.0).unwrap(), pn_psd(&low, 55.0).unwrap());
        assert!(CompositeModel::new(vec![]).is_err());
    }

    #[test]
    fn threegpp_values() {
        let p = ThreeGppParams::carrier_45ghz();
        assert!(rel(threegpp_psd(&p, 1e-9).unwrap(), 3675.0) < 1e-9);
        assert!((db(3675.0).unwrap() - 35.65).abs() < 0.01);
        let at1 = threegpp_psd_db(&p, 1.0).unwrap();
        assert!((at1 - 32.64).abs() < 0.01, "{at1}");
        assert!(threegpp_psd(&p, 0.0).is_err());
        let flat = ThreeGppParams::new(2.0, vec![(1e3, 2.5)], vec![(1e3, 2.5)]).unwrap();
        for f in [1e-3, 1.0, 1e3, 1e9] {
            assert!(rel(threegpp_psd(&flat, f).unwrap(), 2.0) < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip_and_db_input() {
        let p = OscillatorParams::from_db(700.0, -105.0, Some(-200.0)).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        let back: OscillatorParams = serde_json::from_str(&js).unwrap();
        assert_eq!(p, back);
        let q: OscillatorParams =
            serde_json::from_str(r#"{"f3db": 700, "l100_db": -105, "linf_db": -200}"#).unwrap();
        assert!(rel(q.l100_sq(), p.l100_sq()) < 1e-14);
        assert!(serde_json::from_str::<OscillatorParams>(r#"{"f3db": -1, "l100_sq": 1e-9}"#).is_err());
        assert!(serde_json::from_str::<OscillatorParams>(r#"{"f3db": 1, "l100_sq": 0}"#).is_err());
        let m = CompositeModel::mmwave_45ghz();
        let back: CompositeModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn validity_flag() {
        assert!(osc(1e4, -88.0).is_valid_approximation());
        assert!(!osc(5e4, -88.0).is_valid_approximation());
        assert!(OscillatorParams::with_f_ref(5e4, 1e-9, 0.0, 1e6).unwrap().is_valid_approximation());
    }
}
