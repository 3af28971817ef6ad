//! Seedable discrete-time phase-noise generators.
//!
//! Every stream is driven by a ChaCha12 generator seeded from a 64-bit seed
//! and Gaussian variates from `rand_distr::StandardNormal` (ziggurat). For a
//! fixed seed the output is bit-identical across platforms.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::psd_models::{CompositeModel, OscillatorParams};

/// `f3db·ts` above which generation is refused.
pub const MAX_F3DB_TS: f64 = 0.1;
/// `f3db·ts` above which a warning is logged.
pub const WARN_F3DB_TS: f64 = 0.01;

/// Coefficients of `θ_k = a·θ_{k−1} + u_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArCoefficients {
    pub a: f64,
    pub sigma_u_sq: f64,
    pub ts: f64,
    /// `a = 1`: random walk, no stationary distribution.
    pub wiener: bool,
}

impl ArCoefficients {
    pub fn wiener(sigma_u_sq: f64, ts: f64) -> Self {
        Self {
            a: 1.0,
            sigma_u_sq,
            ts,
            wiener: true,
        }
    }

    /// `σu²/(1 − a²)`; infinite in Wiener mode.
    pub fn stationary_variance(&self) -> f64 {
        if self.a >= 1.0 {
            return if self.sigma_u_sq == 0.0 { 0.0 } else { f64::INFINITY };
        }
        self.sigma_u_sq / ((1.0 - self.a) * (1.0 + self.a))
    }

    /// Exact two-sided PSD of the sampled process, rad²/Hz, for `|f| ≤ 1/(2ts)`.
    pub fn psd(&self, f: f64) -> f64 {
        let s = (PI * f * self.ts).sin();
        let one_minus_a = 1.0 - self.a;
        self.ts * self.sigma_u_sq / (one_minus_a * one_minus_a + 4.0 * self.a * s * s)
    }
}

/// AR(1) coefficients matching a Lorentzian PSD sampled at `ts`.
pub fn ar_coefficients(params: &OscillatorParams, ts: f64) -> Result<ArCoefficients> {
    if params.f3db() == 0.0 {
        return domain("free-running oscillator: use wiener_sigma for a random-walk generator");
    }
    if !(ts >= 0.0 && ts.is_finite()) {
        return domain(format!("sampling period must be finite and ≥ 0, got {ts}"));
    }
    let x = params.f3db() * ts;
    if x > MAX_F3DB_TS {
        return Err(Error::Validity(format!(
            "f3db·ts = {x:.3e} exceeds {MAX_F3DB_TS}; the sampled process no longer follows the Lorentzian"
        )));
    }
    if x > WARN_F3DB_TS {
        log::warn!("f3db·ts = {x:.3e} is not small; in-band PSD deviates from the continuous model");
    }
    let c = params.phasor_bandwidth() / params.f3db();
    Ok(ArCoefficients {
        a: (-2.0 * PI * x).exp(),
        sigma_u_sq: -c * (-4.0 * PI * x).exp_m1(),
        ts,
        wiener: false,
    })
}

/// Random-walk increment variance `4π²·f_ref²·ℓ100²·ts`.
pub fn wiener_sigma(params: &OscillatorParams, ts: f64) -> f64 {
    4.0 * PI * params.phasor_bandwidth() * ts
}

/// What produced a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamModel {
    Ar { coeffs: ArCoefficients },
    Wiener { sigma_u_sq: f64 },
    WhiteFloor { variance: f64 },
    Oscillator { params: OscillatorParams },
    Composite { model: CompositeModel },
}

/// Phase samples in rad with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnStream {
    pub samples: Vec<f64>,
    pub ts: f64,
    pub seed: u64,
    pub model: StreamModel,
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for sub-stream `index`: `splitmix64(master ^ splitmix64(index))`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub(crate) fn normal(rng: &mut ChaCha12Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 {
        return domain("stream length must be ≥ 1");
    }
    Ok(())
}

/// Stationary AR(1) stream: `θ_0 ~ N(0, σu²/(1−a²))`.
pub fn gen_ar(coeffs: &ArCoefficients, n: usize, seed: u64) -> Result<PnStream> {
    check_len(n)?;
    if coeffs.wiener || coeffs.a >= 1.0 {
        return domain("a = 1 has no stationary start; use gen_wiener");
    }
    if !(0.0..1.0).contains(&coeffs.a) || !(coeffs.sigma_u_sq >= 0.0) {
        return domain(format!("need 0 ≤ a < 1 and σu² ≥ 0, got a = {}, σu² = {}", coeffs.a, coeffs.sigma_u_sq));
    }
    let mut rng = rng_from_seed(seed);
    let su = coeffs.sigma_u_sq.sqrt();
    let mut samples = Vec::with_capacity(n);
    let mut theta = coeffs.stationary_variance().sqrt() * normal(&mut rng);
    samples.push(theta);
    for _ in 1..n {
        theta = coeffs.a * theta + su * normal(&mut rng);
        samples.push(theta);
    }
    Ok(PnStream {
        samples,
        ts: coeffs.ts,
        seed,
        model: StreamModel::Ar { coeffs: *coeffs },
    })
}

/// Random walk from `θ_0 = 0` with `N(0, σu²)` increments.
pub fn gen_wiener(sigma_u_sq: f64, ts: f64, n: usize, seed: u64) -> Result<PnStream> {
    check_len(n)?;
    if !(sigma_u_sq >= 0.0 && sigma_u_sq.is_finite()) {
        return domain(format!("increment variance must be finite and ≥ 0, got {sigma_u_sq}"));
    }
    let mut rng = rng_from_seed(seed);
    let su = sigma_u_sq.sqrt();
    let mut samples = Vec::with_capacity(n);
    let mut theta = 0.0;
    samples.push(theta);
    for _ in 1..n {
        theta += su * normal(&mut rng);
        samples.push(theta);
    }
    Ok(PnStream {
        samples,
        ts,
        seed,
        model: StreamModel::Wiener { sigma_u_sq },
    })
}

/// White floor: i.i.d. `N(0, ℓ∞²/ts)`.
pub fn gen_white_floor(linf_sq: f64, ts: f64, n: usize, seed: u64) -> Result<PnStream> {
    check_len(n)?;
    if !(linf_sq >= 0.0) || !(ts > 0.0) {
        return domain(format!("need linf_sq ≥ 0 and ts > 0, got {linf_sq}, {ts}"));
    }
    let variance = linf_sq / ts;
    let sd = variance.sqrt();
    let mut rng = rng_from_seed(seed);
    let samples = (0..n).map(|_| sd * normal(&mut rng)).collect();
    Ok(PnStream {
        samples,
        ts,
        seed,
        model: StreamModel::WhiteFloor { variance },
    })
}

/// One oscillator: AR (or random walk when `f3db = 0`) on sub-seed 0, plus
/// the white floor on sub-seed 1 when `ℓ∞² > 0`.
pub fn gen_member(params: &OscillatorParams, ts: f64, n: usize, seed: u64) -> Result<PnStream> {
    let mut samples = if params.f3db() == 0.0 {
        gen_wiener(wiener_sigma(params, ts), ts, n, derive_seed(seed, 0))?.samples
    } else {
        gen_ar(&ar_coefficients(params, ts)?, n, derive_seed(seed, 0))?.samples
    };
    if params.linf_sq() > 0.0 {
        let floor = gen_white_floor(params.linf_sq(), ts, n, derive_seed(seed, 1))?;
        for (s, w) in samples.iter_mut().zip(&floor.samples) {
            *s += w;
        }
    }
    Ok(PnStream {
        samples,
        ts,
        seed,
        model: StreamModel::Oscillator { params: *params },
    })
}

/// Sum of independent members; member `i` uses `derive_seed(seed, i)`.
pub fn gen_composite(model: &CompositeModel, ts: f64, n: usize, seed: u64) -> Result<PnStream> {
    check_len(n)?;
    let mut samples = vec![0.0; n];
    for (i, p) in model.processes().iter().enumerate() {
        let member = gen_member(p, ts, n, derive_seed(seed, i as u64))?;
        for (s, m) in samples.iter_mut().zip(&member.samples) {
            *s += m;
        }
    }
    Ok(PnStream {
        samples,
        ts,
        seed,
        model: StreamModel::Composite { model: model.clone() },
    })
}

/// Writes `k,theta_rad` rows.
pub fn write_csv<W: Write>(stream: &PnStream, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "theta_rad"])?;
    for (k, v) in stream.samples.iter().enumerate() {
        w.write_record([k.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Binary dump magic.
pub const BINARY_MAGIC: &[u8; 8] = b"PNSTREAM";
pub const BINARY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    ts: f64,
    seed: u64,
    n: usize,
    model: StreamModel,
}

/// Layout: magic `PNSTREAM`, u32 version, u32 header length, JSON header
/// `{ts, seed, n, model}`, then `n` little-endian f64 samples.
pub fn write_binary<W: Write>(stream: &PnStream, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&BinaryHeader {
        ts: stream.ts,
        seed: stream.seed,
        n: stream.samples.len(),
        model: stream.model.clone(),
    })?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    let len = u32::try_from(header.len()).map_err(|_| Error::Format("header too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&header)?;
    for v in &stream.samples {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<PnStream> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("not a phase-noise stream dump".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported stream version {version}")));
    }
    r.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut header)?;
    let header: BinaryHeader = serde_json::from_slice(&header)?;
    let mut samples = Vec::with_capacity(header.n);
    let mut buf = [0u8; 8];
    for _ in 0..header.n {
        r.read_exact(&mut buf)?;
        samples.push(f64::from_le_bytes(buf));
    }
    Ok(PnStream {
        samples,
        ts: header.ts,
        seed: header.seed,
        model: header.model,
    })
}
