//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives a readable summary.

use std::f64::consts::PI;

use phasenoise::analysis::{self, eta, eta_d, eta_isi, gamma0, normalized_aliasing, sir_from_rho, sir_from_sigma_u, sum_gamma, Rho};
use phasenoise::fitting::fit_composite;
use phasenoise::linksim::{qpsk_ber, simulate_link, simulate_many, LinkConfig, LinkStats, PnModel};
use phasenoise::points::{log_grid, PsdPoint};
use phasenoise::psd_models::{phasor_psd, pn_psd, threegpp_psd_db};
use phasenoise::quadrature::{integrate_to_infinity, integrate_with_breaks, QuadOptions};
use phasenoise::spectral::{compare_psd, welch_psd, WelchConfig};
use phasenoise::timegen::{gen_member, write_binary};
use phasenoise::{CompositeModel, OscillatorParams, ThreeGppParams};

const GEN_SEED: u64 = 20_240_401;
const SIR_SEED: u64 = 5;
const BER_SEED: u64 = 77;
const AWGN_SEED: u64 = 9;

fn report(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn reference_oscillator() -> OscillatorParams {
    OscillatorParams::from_db(10.0, -88.0, Some(-114.0)).unwrap()
}

// 1: error figures at 10 and 100 MBaud

#[test]
fn criterion_1_error_figures() {
    let p = reference_oscillator();
    let mut ok = true;
    let mut detail = String::new();
    for (ts, want_eta, want_alias) in [(1e-7, 4.2e-5, 1.3e-6), (1e-8, 4.9e-6, 1.3e-7)] {
        let e = eta(analysis::rho(&p, ts).unwrap());
        let a = normalized_aliasing(&p, ts).unwrap();
        ok &= rel(e, want_eta) <= 0.02 && rel(a, want_alias) <= 0.05;
        detail += &format!("[ts={ts:e}: eta={e:.4e} alias={a:.4e}] ");
    }
    report(1, ok, &detail);
}

// 2: SIR at sigma_u = 0.1 rad

#[test]
fn criterion_2_sir_anchor() {
    let s = 10.0 * sir_from_sigma_u(0.1).unwrap().log10();
    report(2, (s - 25.0).abs() <= 0.1, &format!("sir={s:.4} dB"));
}

// 3: closed-form identities and quadrature oracle

#[test]
fn criterion_3_identities() {
    let mut worst_split = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut worst_sum_abs = 0.0f64;
    let mut largest_bad_rho = None;
    for r in log_grid(1e-9, 1e3, 1000) {
        let rr = Rho::new(r).unwrap();
        worst_split = worst_split.max(rel(eta_d(rr) + eta_isi(rr), eta(rr)));
        let e = rel(sum_gamma(rr) - gamma0(rr), eta_isi(rr));
        worst_sum = worst_sum.max(e);
        worst_sum_abs = worst_sum_abs.max((sum_gamma(rr) - gamma0(rr) - eta_isi(rr)).abs());
        if e > 1e-12 {
            largest_bad_rho = Some(r);
        }
    }
    // both terms sit near 1 at small rho, so their difference carries an
    // absolute rounding error of a few ulp of 1
    println!("  sum_gamma - gamma0: worst abs err {worst_sum_abs:.2e}, above 1e-12 relative up to rho={largest_bad_rho:?}");
    let mut worst_quad = 0.0f64;
    for rho in [1e-4, 1e-2, 1.0] {
        let lor = |u: f64| rho / PI / (rho * rho + u * u);
        let breaks: Vec<f64> = [rho, 10.0 * rho, 100.0 * rho].into_iter().filter(|b| *b < 1.0).collect();
        let g0 = 2.0
            * integrate_with_breaks(|u| (1.0 - u).powi(2) * lor(u), 0.0, 1.0, &breaks, QuadOptions::with_tolerances(0.0, 1e-12))
                .unwrap()
                .value;
        worst_quad = worst_quad.max(rel(gamma0(Rho::new(rho).unwrap()), g0));
    }
    let ok = worst_split <= 1e-12 && worst_sum <= 1e-12 && worst_quad <= 1e-6;
    report(
        3,
        ok,
        &format!("split={worst_split:.2e} sum={worst_sum:.2e} quad={worst_quad:.2e}"),
    );
}

// 4: generator spectrum and phasor power

fn phasor_power(p: &OscillatorParams) -> f64 {
    let delta = phasor_psd(p, 0.0).unwrap().delta_weight;
    let mut breaks = vec![p.f3db().max(1e-3), p.phasor_bandwidth()];
    breaks.sort_by(f64::total_cmp);
    let top = 10.0 * breaks[1];
    let opts = QuadOptions::with_tolerances(1e-13, 1e-12);
    let cont = |f: f64| phasor_psd(p, f).unwrap().continuous;
    let head = integrate_with_breaks(cont, 0.0, top, &breaks, opts).unwrap().value;
    let tail = integrate_to_infinity(cont, top, opts).unwrap().value;
    delta + 2.0 * (head + tail)
}

#[test]
fn criterion_4_generator_spectrum() {
    let p = reference_oscillator();
    let ts = 1e-7;
    let stream = gen_member(&p, ts, 1 << 22, GEN_SEED).unwrap();
    let cfg = WelchConfig::default();
    let est = welch_psd(&stream.samples, 1.0 / ts, cfg).unwrap();
    let band = (10.0 * est.resolution, 0.4 / ts);
    let cmp = compare_psd(&est, |f| pn_psd(&p, f).unwrap(), band).unwrap();

    // free-running, PLL-like, and intermediate branches
    let branches = [
        OscillatorParams::from_db(0.0, -88.0, None).unwrap(),
        OscillatorParams::from_db(1e4, -88.0, None).unwrap(),
        OscillatorParams::from_db(10.0, -88.0, None).unwrap(),
        OscillatorParams::from_db(3.0, -80.0, None).unwrap(),
    ];
    let worst_power = branches.iter().map(|b| (phasor_power(b) - 1.0).abs()).fold(0.0, f64::max);

    let ok = cmp.max_abs_dev_db <= 1.5 && worst_power <= 1e-6;
    report(
        4,
        ok,
        &format!(
            "max|dev|={:.3} dB rms={:.3} dB over {} bins, phasor power err={worst_power:.2e}",
            cmp.max_abs_dev_db, cmp.rms_dev_db, cmp.n_bins
        ),
    );
}

// 5: SIR against roll-off with a continuous-time free-running oscillator

const ROLLOFFS: [f64; 3] = [0.05, 0.1, 0.5];
const RHOS: [f64; 3] = [1e-4, 1e-3, 1e-2];

fn sir_configs() -> Vec<LinkConfig> {
    let ts = 1e-7;
    let mut cfgs = Vec::new();
    for &rho in &RHOS {
        for &rolloff in &ROLLOFFS {
            let mut c = LinkConfig::new(200_000, ts, SIR_SEED);
            c.rolloff = rolloff;
            c.osf = 5;
            c.span_symbols = 128;
            c.pilot_len = 0;
            c.pn_model = PnModel::ct_free_running(rho, ts).unwrap();
            cfgs.push(c);
        }
    }
    cfgs
}

#[test]
fn criterion_5_sir_against_rolloff() {
    let stats: Vec<LinkStats> = simulate_many(&sir_configs()).into_iter().map(|r| r.unwrap()).collect();
    let mut ok = true;
    for (i, &rho) in RHOS.iter().enumerate() {
        let closed = 10.0 * sir_from_rho(Rho::new(rho).unwrap()).log10();
        let row = &stats[i * ROLLOFFS.len()..(i + 1) * ROLLOFFS.len()];
        let mut line = format!("  rho={rho:e} closed={closed:.2} dB:");
        for (j, s) in row.iter().enumerate() {
            let gap = s.sir_db - closed;
            let limit = if ROLLOFFS[j] == 0.05 { 1.0 } else { 2.0 };
            ok &= gap >= 0.0 && gap <= limit;
            if j > 0 {
                ok &= s.sir_db >= row[j - 1].sir_db;
            }
            line += &format!(" r{}={:.2}±{:.2}", ROLLOFFS[j], s.sir_db, s.sir_se_db);
        }
        println!("{line}");
    }
    report(5, ok, "measured SIR >= closed form, gap <= 2 dB (1 dB at roll-off 0.05), ordered in roll-off");
}

// 6: discrete-time versus continuous-time BER

fn ber_pair(ts: f64, esn0: f64, n_symbols: usize) -> (LinkConfig, LinkConfig) {
    let model: CompositeModel = reference_oscillator().into();
    let mut ct = LinkConfig::new(n_symbols, ts, BER_SEED);
    ct.rolloff = 0.3;
    ct.esn0_db = Some(esn0);
    ct.pn_model = PnModel::CtComposite { model: model.clone() };
    let mut dt = ct.clone();
    dt.pn_model = PnModel::DtAr { model };
    (ct, dt)
}

#[test]
fn criterion_6_discrete_matches_continuous() {
    let mut cfgs = Vec::new();
    for ts in [1e-7, 1e-8] {
        for esn0 in [6.0, 8.0, 10.0] {
            let (ct, dt) = ber_pair(ts, esn0, 400_000);
            cfgs.push(ct);
            cfgs.push(dt);
        }
    }
    let stats: Vec<LinkStats> = simulate_many(&cfgs).into_iter().map(|r| r.unwrap()).collect();
    let mut ok = true;
    for (pair, cfg) in stats.chunks(2).zip(cfgs.chunks(2)) {
        let (ct, dt) = (&pair[0], &pair[1]);
        let se = (ct.ber_se.powi(2) + dt.ber_se.powi(2)).sqrt();
        let diff = (ct.ber - dt.ber).abs();
        let enough = ct.n_errors >= 100 && dt.n_errors >= 100;
        ok &= enough && diff < 3.0 * se;
        println!(
            "  ts={:e} EsN0={} dB: ct={:.4e} ({} err) dt={:.4e} ({} err) |diff|/se={:.2}",
            cfg[0].ts,
            cfg[0].esn0_db.unwrap(),
            ct.ber,
            ct.n_errors,
            dt.ber,
            dt.n_errors,
            diff / se
        );
    }
    report(6, ok, "|BER_ct - BER_dt| < 3 combined SE with >= 100 errors");
}

// 7: AWGN calibration

fn awgn_configs() -> Vec<LinkConfig> {
    [4.0, 6.0, 8.0]
        .iter()
        .map(|&ebn0| {
            let mut c = LinkConfig::new(400_000, 1e-7, AWGN_SEED);
            c.pilot_len = 0;
            c.esn0_db = Some(ebn0 + 10.0 * 2f64.log10());
            c
        })
        .collect()
}

#[test]
fn criterion_7_awgn_calibration() {
    let cfgs = awgn_configs();
    let mut ok = true;
    let mut detail = String::new();
    for (c, s) in cfgs.iter().zip(simulate_many(&cfgs)) {
        let s = s.unwrap();
        let ebn0 = c.esn0_db.unwrap() - 10.0 * 2f64.log10();
        let want = qpsk_ber(ebn0);
        let z = (s.ber - want).abs() / s.ber_se;
        ok &= z < 3.0;
        detail += &format!("[EbN0={ebn0:.0}: {:.4e} vs {want:.4e}, z={z:.2}] ", s.ber);
    }
    report(7, ok, &detail);
}

// 8: two-process fit of the 45 GHz mask

fn mask_points(lo: f64, hi: f64) -> Vec<PsdPoint> {
    let mask = ThreeGppParams::carrier_45ghz();
    log_grid(lo, hi, 81)
        .into_iter()
        .map(|f| PsdPoint {
            freq_hz: f,
            level_db: threegpp_psd_db(&mask, f).unwrap(),
        })
        .collect()
}

#[test]
fn criterion_8_mask_fit() {
    let fit = fit_composite(&mask_points(10.0, 1e9), 2).unwrap();
    let reference = CompositeModel::mmwave_45ghz();
    let within_decade = fit
        .params
        .iter()
        .zip(reference.processes())
        .all(|(a, b)| (a.f3db() / b.f3db()).log10().abs() <= 1.0);
    let corners: Vec<String> = fit.params.iter().map(|p| format!("{:.3e}", p.f3db())).collect();
    let narrow = fit_composite(&mask_points(1e3, 1e9), 2).unwrap();
    println!("  over [1e3, 1e9] Hz: rms={:.3} dB", narrow.residual_rms_db);
    report(
        8,
        fit.residual_rms_db < 3.0 && within_decade,
        &format!("rms={:.3} dB over [10, 1e9] Hz, corners {corners:?}", fit.residual_rms_db),
    );
}

// 9: determinism

#[test]
fn criterion_9_determinism() {
    let p = reference_oscillator();
    let dump = || {
        let mut buf = Vec::new();
        write_binary(&gen_member(&p, 1e-7, 1 << 22, GEN_SEED).unwrap(), &mut buf).unwrap();
        buf
    };
    let same_stream = dump() == dump();

    let (ct, dt) = ber_pair(1e-7, 8.0, 50_000);
    let mut sir = sir_configs()[4].clone();
    sir.n_symbols = 50_000;
    let picks = vec![ct, dt, sir, awgn_configs()[1].clone()];
    let run = || serde_json::to_string(&simulate_many(&picks).into_iter().map(|r| r.unwrap()).collect::<Vec<_>>()).unwrap();
    let same_links = run() == run();
    let serial: Vec<String> = picks.iter().map(|c| serde_json::to_string(&simulate_link(c).unwrap()).unwrap()).collect();
    let parallel: Vec<String> = simulate_many(&picks).into_iter().map(|r| serde_json::to_string(&r.unwrap()).unwrap()).collect();

    let pts = mask_points(10.0, 1e9);
    let same_fit = serde_json::to_string(&fit_composite(&pts, 2).unwrap()).unwrap()
        == serde_json::to_string(&fit_composite(&pts, 2).unwrap()).unwrap();

    let ok = same_stream && same_links && serial == parallel && same_fit;
    report(
        9,
        ok,
        &format!("stream={same_stream} links={same_links} serial==parallel={} fit={same_fit}", serial == parallel),
    );
}
