use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use phasenoise::analysis::{self, aliasing_variance, normalized_aliasing, sir_from_rho, ErrorBreakdown, Rho};
use phasenoise::fitting::fit_composite;
use phasenoise::linksim::{simulate_many, Constellation, LinkConfig, PnModel};
use phasenoise::points::{log_grid, read_points_file, PsdPoint};
use phasenoise::psd_models::{composite_psd, phasor_autocorr, pn_autocorr, threegpp_psd_db};
use phasenoise::spectral::{compare_psd, welch_psd, WelchConfig};
use phasenoise::timegen::{ar_coefficients, gen_composite, wiener_sigma, write_binary, write_csv};
use phasenoise::{CompositeModel, OscillatorParams, ThreeGppParams};
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{emit_json, emit_table, num, open, Header, Table};
use crate::Usage;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn load_model(osc: &OscArgs) -> Result<CompositeModel> {
    if let Some(path) = &osc.config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        if let Ok(m) = serde_json::from_str::<CompositeModel>(&text) {
            return Ok(m);
        }
        let p: OscillatorParams =
            serde_json::from_str(&text).with_context(|| format!("{} is neither an oscillator nor a list of them", path.display()))?;
        return Ok(p.into());
    }
    let Some(l100) = osc.l100_db else {
        return usage("give --l100-db or --config");
    };
    Ok(OscillatorParams::from_db(osc.f3db, l100, osc.linf_db)?.into())
}

fn single(model: &CompositeModel) -> Result<OscillatorParams> {
    match model.processes() {
        [p] => Ok(*p),
        _ => usage(format!("this command takes one process, the model has {}", model.len())),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let parsed = s.split_once(':').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
    match parsed {
        Some((lo, hi)) if lo > 0.0 && hi > lo => Ok((lo, hi)),
        _ => usage(format!("expected a range `lo:hi` with 0 < lo < hi, got `{s}`")),
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return usage(format!("need 0 < min < max and at least 2 points, got [{lo}, {hi}] with {n}"));
    }
    Ok(log_grid(lo, hi, n))
}

fn to_db(x: f64) -> Value {
    num(10.0 * x.log10())
}

fn out(c: &Common) -> Option<&Path> {
    c.output.as_deref()
}

/// `freq_hz,pn_db[,input_db][,mask_db]`
pub fn psd(a: &PsdArgs) -> Result<()> {
    let model = load_model(&a.osc)?;
    let mask = ThreeGppParams::carrier_45ghz();
    let input = a.points.as_deref().map(read_points_file).transpose()?;
    let freqs = match &input {
        Some(pts) => pts.iter().map(|p| p.freq_hz).collect(),
        None => grid(a.fmin, a.fmax, a.n_points)?,
    };
    let mut cols = vec!["freq_hz", "pn_db"];
    if input.is_some() {
        cols.push("input_db");
    }
    if a.mask {
        cols.push("mask_db");
    }
    let mut t = Table::new(&cols);
    for (i, &f) in freqs.iter().enumerate() {
        let mut row = vec![num(f), to_db(composite_psd(&model, f)?)];
        if let Some(pts) = &input {
            row.push(num(pts[i].level_db));
        }
        if a.mask {
            row.push(num(threegpp_psd_db(&mask, f)?));
        }
        t.push(row);
    }
    let mut h = Header::new("psd", None, serde_json::to_value(&model)?);
    if let Some(p) = &a.points {
        h = h.with("points", p.display().to_string());
    }
    emit_table(&h, &t, a.common.format, out(&a.common))
}

/// `tau_s,pn_autocorr,phasor_autocorr`; floors are dropped.
pub fn autocorr(a: &AutocorrArgs) -> Result<()> {
    let model = load_model(&a.osc)?;
    if !(a.tau_max > 0.0 && a.n_points >= 2) {
        return usage("need --tau-max > 0 and at least 2 points");
    }
    let procs: Vec<OscillatorParams> = model.processes().iter().map(|p| p.without_floor()).collect();
    let mut t = Table::new(&["tau_s", "pn_autocorr", "phasor_autocorr"]);
    for i in 0..a.n_points {
        let tau = a.tau_max * i as f64 / (a.n_points - 1) as f64;
        // the phase of a free-running oscillator has no autocorrelation
        let pn = if procs.iter().any(|p| p.is_free_running()) {
            Value::Null
        } else {
            num(procs.iter().map(|p| pn_autocorr(p, tau)).sum::<phasenoise::Result<f64>>()?)
        };
        let phasor = procs.iter().map(|p| phasor_autocorr(p, tau)).product::<phasenoise::Result<f64>>()?;
        t.push(vec![num(tau), pn, num(phasor)]);
    }
    let h = Header::new("autocorr", None, serde_json::to_value(&model)?).with("floor", "excluded");
    emit_table(&h, &t, a.common.format, out(&a.common))
}

/// `k,theta_rad`
pub fn gen(a: &GenArgs) -> Result<()> {
    let model = load_model(&a.osc)?;
    let stream = gen_composite(&model, a.ts, a.n, a.seed)?;
    let h = Header::new("gen", Some(a.seed), serde_json::to_value(&model)?)
        .with("ts", a.ts)
        .with("n", a.n);
    if a.binary {
        let mut w = open(out(&a.common))?;
        write_binary(&stream, &mut w)?;
        w.flush()?;
        return Ok(());
    }
    match a.common.format {
        Format::Csv => {
            let mut w = open(out(&a.common))?;
            h.write_comment(&mut w)?;
            write_csv(&stream, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Format::Json => emit_json(&h, serde_json::to_value(&stream)?, out(&a.common)),
    }
}

/// `freq_hz,est_db,model_db,dev_db`
pub fn validate(a: &ValidateArgs) -> Result<()> {
    let model = load_model(&a.osc)?;
    let stream = gen_composite(&model, a.ts, a.n, a.seed)?;
    let cfg = WelchConfig {
        segment_len: a.segment,
        ..WelchConfig::default()
    };
    // a random walk has no PSD estimate; its increments are stationary
    let on_increments = model.processes().iter().any(|p| p.is_free_running());
    let series: Vec<f64> = if on_increments {
        stream.samples.windows(2).map(|w| w[1] - w[0]).collect()
    } else {
        stream.samples
    };
    let est = welch_psd(&series, 1.0 / a.ts, cfg)?;
    let band = (a.fmin.unwrap_or(10.0 * est.resolution), a.fmax.unwrap_or(0.4 / a.ts));
    let cmp = if on_increments {
        compare_psd(&est, |f| increment_psd(&model, a.ts, f).unwrap_or(f64::NAN), band)?
    } else {
        compare_psd(&est, |f| composite_psd(&model, f).unwrap_or(f64::NAN), band)?
    };
    let mut t = Table::new(&["freq_hz", "est_db", "model_db", "dev_db"]);
    for &(f, e, m, d) in &cmp.rows {
        t.push(vec![num(f), num(e), num(m), num(d)]);
    }
    let h = Header::new("validate", Some(a.seed), serde_json::to_value(&model)?)
        .with("ts", a.ts)
        .with("n", a.n)
        .with("segment", a.segment)
        .with("validated_on", if on_increments { "increments" } else { "samples" })
        .with("band_hz", json!([band.0, band.1]))
        .with("n_segments", est.n_segments)
        .with("max_abs_dev_db", num(cmp.max_abs_dev_db))
        .with("rms_dev_db", num(cmp.rms_dev_db))
        .with("mean_dev_db", num(cmp.mean_dev_db))
        .with("nonstationary", est.nonstationary);
    emit_table(&h, &t, a.common.format, out(&a.common))
}

/// Two-sided PSD of `θ_k − θ_{k−1}` for the sampled model: white `σu²·ts`
/// for random walks, `4·sin²(π·f·ts)` times the exact AR and floor spectra otherwise.
fn increment_psd(model: &CompositeModel, ts: f64, f: f64) -> Result<f64> {
    let gain = 4.0 * (PI * f * ts).sin().powi(2);
    let mut total = 0.0;
    for p in model.processes() {
        total += if p.is_free_running() {
            wiener_sigma(p, ts) * ts
        } else {
            gain * ar_coefficients(p, ts)?.psd(f)
        };
        total += gain * p.linf_sq();
    }
    Ok(total)
}

fn breakdown_row(r: Rho) -> Vec<Value> {
    let b = ErrorBreakdown::new(r);
    vec![num(b.rho), num(b.eta), num(b.eta_d), num(b.eta_isi), num(b.sir_db())]
}

/// `rho,eta,eta_d,eta_isi,sir_db`; aliasing goes to the header.
pub fn errors(a: &ErrorsArgs) -> Result<()> {
    let cols = ["rho", "eta", "eta_d", "eta_isi", "sir_db"];
    let mut t = Table::new(&cols);
    let h = if let Some(range) = &a.sweep_rho {
        let (lo, hi) = parse_range(range)?;
        for r in grid(lo, hi, a.n_points)? {
            t.push(breakdown_row(Rho::new(r)?));
        }
        Header::new("errors", None, json!({ "sweep_rho": [lo, hi], "n_points": a.n_points }))
    } else {
        let model = load_model(&a.osc)?;
        let p = single(&model)?;
        let ts = a.ts.expect("clap requires --ts without --sweep-rho");
        t.push(breakdown_row(analysis::rho(&p, ts)?));
        let (var, norm) = if p.is_free_running() {
            (Value::Null, Value::Null)
        } else {
            (num(aliasing_variance(&p, ts)?), num(normalized_aliasing(&p, ts)?))
        };
        Header::new("errors", None, serde_json::to_value(p)?)
            .with("ts", ts)
            .with("aliasing_variance_rad2", var)
            .with("normalized_aliasing", norm)
    };
    emit_table(&h, &t, a.common.format, out(&a.common))
}

/// `rolloff,rho,sir_db,se,closed_form_db`
pub fn sir(a: &SirArgs) -> Result<()> {
    let (lo, hi) = parse_range(&a.sweep_rho)?;
    let rhos = grid(lo, hi, a.n_points)?;
    let ts = 1e-7;
    let mut cfgs = Vec::new();
    for &rolloff in &a.rolloffs {
        for &rho in &rhos {
            let mut c = LinkConfig::new(a.n_symbols, ts, a.seed);
            c.rolloff = rolloff;
            c.osf = a.osf;
            c.span_symbols = a.span;
            c.pilot_len = 0;
            c.pn_model = PnModel::ct_free_running(rho, ts)?;
            c.validate()?;
            cfgs.push((rolloff, rho, c));
        }
    }
    let runs: Vec<LinkConfig> = cfgs.iter().map(|c| c.2.clone()).collect();
    let mut t = Table::new(&["rolloff", "rho", "sir_db", "se", "closed_form_db"]);
    for ((rolloff, rho, _), stats) in cfgs.iter().zip(simulate_many(&runs)) {
        let s = stats?;
        let closed = 10.0 * sir_from_rho(Rho::new(*rho)?).log10();
        t.push(vec![num(*rolloff), num(*rho), num(s.sir_db), num(s.sir_se_db), num(closed)]);
    }
    let h = Header::new(
        "sir",
        Some(a.seed),
        json!({
            "sweep_rho": [lo, hi],
            "n_points": a.n_points,
            "rolloffs": a.rolloffs,
            "n_symbols": a.n_symbols,
            "osf": a.osf,
            "span_symbols": a.span,
            "pn_model": "ct free-running",
        }),
    );
    emit_table(&h, &t, a.common.format, out(&a.common))
}

fn base_link(a: &BerArgs) -> Result<LinkConfig> {
    if let Some(path) = &a.link_config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        return serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())).into());
    }
    let mut c = LinkConfig::new(a.n_symbols, a.ts, a.seed);
    c.constellation = match a.constellation {
        ConstellationArg::Qpsk => Constellation::Qpsk,
        ConstellationArg::Qam16 => Constellation::Qam16,
    };
    c.rolloff = a.rolloff;
    c.pilot_len = a.pilot_len;
    c.pilot_period = a.pilot_period;
    c.pn_model = match a.pn {
        PnKind::None => PnModel::None,
        PnKind::Ct => PnModel::CtComposite { model: load_model(&a.osc)? },
        PnKind::Dt => PnModel::DtAr { model: load_model(&a.osc)? },
    };
    Ok(c)
}

/// `esn0_db,ber,se,n_errors,n_bits`
pub fn ber(a: &BerArgs) -> Result<()> {
    let base = base_link(a)?;
    let cfgs: Vec<LinkConfig> = a
        .esn0
        .iter()
        .map(|&e| {
            let mut c = base.clone();
            c.esn0_db = Some(e);
            c
        })
        .collect();
    for c in &cfgs {
        c.validate()?;
    }
    let mut t = Table::new(&["esn0_db", "ber", "se", "n_errors", "n_bits"]);
    for (c, s) in cfgs.iter().zip(simulate_many(&cfgs)) {
        let s = s?;
        t.push(vec![num(c.esn0_db.unwrap_or(f64::NAN)), num(s.ber), num(s.ber_se), s.n_errors.into(), s.n_bits.into()]);
    }
    let mut params = serde_json::to_value(&base)?;
    params["esn0_db"] = json!(a.esn0);
    let h = Header::new("ber", Some(base.seed), params);
    emit_table(&h, &t, a.common.format, out(&a.common))
}

/// JSON fit result, or CSV `f3db_hz,l100_db,linf_db`.
pub fn fit(a: &FitArgs) -> Result<()> {
    let (points, source): (Vec<PsdPoint>, Value) = if a.mask {
        let mask = ThreeGppParams::carrier_45ghz();
        let pts = grid(a.fmin, a.fmax, a.n_points)?
            .into_iter()
            .map(|f| Ok(PsdPoint { freq_hz: f, level_db: threegpp_psd_db(&mask, f)? }))
            .collect::<Result<Vec<_>>>()?;
        (pts, json!({ "mask": "45ghz", "band_hz": [a.fmin, a.fmax], "n_points": a.n_points, "k": a.k }))
    } else {
        let path = a.points.as_ref().expect("clap requires --points without --mask");
        (read_points_file(path)?, json!({ "points": path.display().to_string(), "k": a.k }))
    };
    let fit = fit_composite(&points, a.k)?;
    let h = Header::new("fit", None, source)
        .with("residual_rms_db", num(fit.residual_rms_db))
        .with("stage_residuals_db", json!(fit.stage_residuals_db))
        .with("iterations", fit.iterations)
        .with("converged", fit.converged)
        .with("free_running_like", fit.free_running_like);
    let dest = a.output.as_deref();
    match a.format {
        Format::Json => emit_json(&h, serde_json::to_value(&fit)?, dest),
        Format::Csv => {
            let mut t = Table::new(&["f3db_hz", "l100_db", "linf_db"]);
            for p in &fit.params {
                t.push(vec![num(p.f3db()), num(p.l100_db()), p.linf_db().map_or(Value::Null, num)]);
            }
            emit_table(&h, &t, Format::Csv, dest)
        }
    }
}
