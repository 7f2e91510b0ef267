//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use isobeat::dynamics::{run_two_pulse, run_two_pulse_sampled, IntegratorConfig};
use isobeat::hilbert::{DensityMatrix, HilbertSpace};
use isobeat::measurement::{coincidences, detection_operator, log_negativity, Channel, DetectorModel};
use isobeat::model::{canonical_space, phonon_space, SystemParams};
use isobeat::spectra::{synthesize, FitOptions, Spectrum, VoigtPeak};
use isobeat::C64;
use isobeat_cli::analysis::{extrema, extrema_shift, fit_biexponential, is_strictly_decreasing, oscillation_period};
use isobeat_cli::config::RunConfig;
use isobeat_cli::fit::{run_fit, Guess};
use isobeat_cli::herald::run_herald;
use isobeat_cli::sweep::{run_sweep, series, SweepRecord, Variant};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn beat_frequency(p: &SystemParams<f64>) -> f64 {
    (p.phonons[0].delta - p.phonons[1].delta).abs()
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn g2(dt: f64, params: &SystemParams<f64>, space: &HilbertSpace, integrator: &IntegratorConfig<f64>, det: &DetectorModel<f64>) -> f64 {
    let rho = run_two_pulse(dt, params, space, integrator).expect("protocol run").rho_final;
    let d_s = detection_operator(Channel::Stokes, det, space).unwrap();
    let d_a = detection_operator(Channel::AntiStokes, det, space).unwrap();
    coincidences(&rho, &d_s, &d_a).unwrap().g2().unwrap()
}

fn criterion_1(cfg: &RunConfig, rows: &[SweepRecord]) -> Verdict {
    let expected = 2.0 * PI / beat_frequency(&cfg.system);
    let ext = extrema(&series(rows, Variant::Noisy));
    match oscillation_period(&ext) {
        Some(p) => verdict(
            within(p, expected, 0.05),
            format!("period {p:.3} ps from {} extrema, expected {expected:.3} ps +/- 5%", ext.len()),
        ),
        None => verdict(false, format!("fewer than two same-kind extrema ({} found)", ext.len())),
    }
}

fn criterion_2(cfg: &RunConfig, rows: &[SweepRecord]) -> Verdict {
    let omega = beat_frequency(&cfg.system);
    let sweep_at = |theta: f64| {
        let mut c = cfg.clone();
        c.system = c.system.clone().with_theta(theta);
        let rows = run_sweep(&c, &[Variant::Noisy]).expect("theta sweep");
        extrema(&series(&rows, Variant::Noisy))
    };
    let reference = sweep_at(0.0);
    let mid = sweep_at(PI / 12.0);
    let full = if (cfg.system.theta - PI / 6.0).abs() < 1e-12 && (cfg.system.theta_write - cfg.system.theta).abs() < 1e-12 {
        extrema(&series(rows, Variant::Noisy))
    } else {
        sweep_at(PI / 6.0)
    };
    let expected = (PI / 6.0) / omega;
    let (Some(s_mid), Some(s_full)) = (extrema_shift(&reference, &mid, 1.0), extrema_shift(&reference, &full, 1.0)) else {
        return verdict(false, "extrema could not be matched between phases".into());
    };
    let monotone = s_mid.signum() == s_full.signum() && s_mid.abs() > 0.0 && s_mid.abs() < s_full.abs();
    verdict(
        (s_full.abs() - expected).abs() <= 0.05 && monotone,
        format!("shift pi/12: {s_mid:+.3} ps, pi/6: {s_full:+.3} ps (expected |{expected:.3}| +/- 0.05), monotone {monotone}"),
    )
}

fn criterion_3(cfg: &RunConfig, rows: &[SweepRecord]) -> Verdict {
    let s: Vec<(f64, f64)> = series(rows, Variant::Mixture).into_iter().map(|(t, g)| (t, g - 1.0)).collect();
    let decreasing = is_strictly_decreasing(&s.iter().map(|p| p.1).collect::<Vec<_>>());
    let n_ext = extrema(&s).len();
    let [t1, t2] = [cfg.system.phonons[0].tau(), cfg.system.phonons[1].tau()];
    let Some(fit) = fit_biexponential(&s, (t1, t2)) else {
        return verdict(false, "bi-exponential fit failed".into());
    };
    verdict(
        decreasing && n_ext == 0 && fit.r_squared > 0.999 && within(fit.tau_slow, t1, 0.3) && within(fit.tau_fast, t2, 0.3),
        format!(
            "strictly decreasing {decreasing}, {n_ext} extrema, R^2 {:.6}, tau {:.2} / {:.2} ps vs {t1} / {t2} ps +/- 30%",
            fit.r_squared, fit.tau_slow, fit.tau_fast
        ),
    )
}

fn criterion_4(cfg: &RunConfig, rows: &[SweepRecord]) -> Verdict {
    let bound = 1.0 + 1.0 / cfg.system.n_th;
    let ideal: Vec<(f64, f64)> = series(rows, Variant::Ideal).into_iter().filter(|p| p.0 > 0.5).collect();
    let lo = ideal.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = ideal.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let noisy = series(rows, Variant::Noisy);
    let dominates = ideal.iter().all(|&(t, g)| noisy.iter().find(|n| n.0 == t).is_none_or(|n| g >= n.1));
    verdict(
        !ideal.is_empty() && lo >= 1.0 && hi <= bound + 1e-6,
        format!("ideal g2 in [{lo:.4}, {hi:.4}] over {} delays, bound {bound:.4}; ideal >= noisy everywhere: {dominates}", ideal.len()),
    )
}

fn criterion_5(rows: &[SweepRecord]) -> Verdict {
    let noisy: Vec<&SweepRecord> = rows.iter().filter(|r| r.variant == Variant::Noisy.tag()).collect();
    let range = |f: fn(&SweepRecord) -> f64| {
        noisy.iter().map(|r| f(r)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (s_lo, s_hi) = range(|r| r.p_s);
    let (a_lo, a_hi) = range(|r| r.p_a);
    verdict(
        !noisy.is_empty() && s_lo >= 1.8e-4 && s_hi <= 4e-4 && a_lo >= 0.6e-5 && a_hi <= 3.6e-5,
        format!("p_S in [{s_lo:.3e}, {s_hi:.3e}] (band 1.8e-4..4e-4), p_A in [{a_lo:.3e}, {a_hi:.3e}] (band 0.6e-5..3.6e-5)"),
    )
}

fn criterion_6(cfg: &RunConfig) -> Verdict {
    let rows = match run_herald(cfg) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("herald run failed: {e}")),
    };
    let e0 = rows[0].e_n;
    let crossing = rows.iter().find(|r| r.e_n < 0.05 * e0).map(|r| r.t_ps);
    let lifetime_ok = crossing.is_some_and(|t| (t - 4.5).abs() <= 1.0);

    let mut blind = cfg.clone();
    blind.detectors.eta_s = 0.0;
    let blind_max = run_herald(&blind).map(|r| r.iter().map(|x| x.e_n.abs()).fold(0.0, f64::max)).unwrap_or(f64::INFINITY);

    let mut ideal = cfg.clone();
    ideal.detectors = DetectorModel::ideal();
    let ideal_note = match run_herald(&ideal) {
        Ok(r) => {
            let e0 = r[0].e_n;
            let t = r.iter().find(|x| x.e_n < 0.05 * e0).map_or("none".into(), |x| format!("{:.1} ps", x.t_ps));
            format!("; ideal detectors: E_N(0) {e0:.3}, below 5% at {t}")
        }
        Err(e) => format!("; ideal detectors failed: {e}"),
    };
    verdict(
        e0 > 0.3 && lifetime_ok && blind_max <= 1e-9,
        format!(
            "E_N(0) {e0:.4} (need > 0.3), below 5% at {}, eta=0 max |E_N| {blind_max:.1e}{ideal_note}",
            crossing.map_or("never".into(), |t| format!("{t:.1} ps"))
        ),
    )
}

fn criterion_7() -> Verdict {
    let space = phonon_space(&canonical_space([3, 3, 3, 3]).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let phi: f64 = rng.random_range(0.0..PI / 2.0);
        let (b1, b2) = (phi.cos(), phi.sin());
        let mut psi = DVector::from_element(space.total_dim(), C64::new(0.0, 0.0));
        psi[space.index_of(&[1, 0]).unwrap()] = C64::new(b1, 0.0);
        psi[space.index_of(&[0, 1]).unwrap()] = C64::new(b2, 0.0);
        let rho = DensityMatrix::pure(&space, &psi).unwrap();
        worst = worst.max((log_negativity(&rho).unwrap() - (1.0 + 2.0 * b1 * b2).log2()).abs());
    }
    verdict(worst <= 1e-6, format!("max |E_N - log2(1 + 2 b1 b2)| = {worst:.2e} over 10 random pairs"))
}

fn criterion_8() -> Verdict {
    const SIGMA_G: f64 = 0.25;
    let truth = [
        VoigtPeak { center: 655.3, gamma_l: 0.632, sigma_g: SIGMA_G, area: 0.5 },
        VoigtPeak { center: 646.7, gamma_l: 3.123, sigma_g: SIGMA_G, area: 1.0 },
    ];
    let grid: Vec<f64> = (0..=600).map(|i| 620.0 + 0.1 * i as f64).collect();
    let clean = synthesize(&truth, &grid, 0.0);
    let peak = clean.iter().copied().fold(0.0, f64::max);
    let guesses: Vec<Guess> = ["655.0,1.0,0.3,0.3", "647.0,2.0,0.3,1.5"].iter().map(|g| g.parse().unwrap()).collect();
    let beta1 = (1.0f64 / 3.0).sqrt();
    let mut passed = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01 * peak).unwrap();
        let counts: Vec<f64> = clean.iter().map(|c| (c + 0.05 * peak + noise.sample(&mut rng)).max(0.0)).collect();
        let spec = Spectrum::new(grid.clone(), counts).unwrap();
        let Ok(out) = run_fit(Path::new("synthetic"), &spec, &guesses, &FitOptions::default()) else { continue };
        let Some(d) = out.derived else { continue };
        let [t1, t2] = d.tau();
        if (d.beta[0] - beta1).abs() <= 0.012 && within(t1, 8.4, 0.05) && within(t2, 1.7, 0.05) {
            passed += 1;
        }
    }
    verdict(passed >= 18, format!("{passed}/20 seeds recover beta1 +/- 0.012, tau1 and tau2 +/- 5% (need 18)"))
}

fn criterion_9(cfg: &RunConfig) -> Verdict {
    let space = cfg.space().unwrap();
    let (mut drift, mut min_eig) = (0.0f64, f64::INFINITY);
    for dt in [1.0, 3.9] {
        let res = run_two_pulse_sampled(dt, &cfg.system, &space, &cfg.integrator, Some(0.25)).expect("sampled run");
        for (_, rho) in &res.timeline {
            drift = drift.max((rho.trace() - C64::new(1.0, 0.0)).norm());
            min_eig = min_eig.min(rho.min_eigenvalue());
        }
    }
    let big = canonical_space([4, 4, 4, 4]).unwrap();
    let mut trunc: f64 = 0.0;
    for dt in [0.5, 1.0, 2.0, 3.9, 6.0] {
        let a = g2(dt, &cfg.system, &space, &cfg.integrator, &cfg.detectors);
        let b = g2(dt, &cfg.system, &big, &cfg.integrator, &cfg.detectors);
        trunc = trunc.max((a / b - 1.0).abs());
    }
    let mut halving: f64 = 0.0;
    for dt in [1.0, 3.9] {
        let fine = g2(dt, &cfg.system, &space, &IntegratorConfig::rk4(0.001), &cfg.detectors);
        let coarse = g2(dt, &cfg.system, &space, &IntegratorConfig::rk4(0.002), &cfg.detectors);
        halving = halving.max((coarse / fine - 1.0).abs());
    }
    verdict(
        drift < 1e-8 && min_eig >= -1e-8 && trunc < 5e-3 && halving < 1e-4,
        format!("trace drift {drift:.1e}, min eigenvalue {min_eig:.1e}, dim 3 vs 4 {trunc:.2e}, rk4 halving {halving:.1e}"),
    )
}

fn criterion_10(cfg: &RunConfig) -> Verdict {
    let space = cfg.space().unwrap();
    let shift = 2.0;
    let mut framed = cfg.system.clone();
    for p in &mut framed.phonons {
        p.delta += shift;
    }
    framed.delta_s -= shift;
    framed.delta_a += shift;
    let split = cfg.system.clone().with_theta_split(0.0);
    let (mut frame_dev, mut split_dev) = (0.0f64, 0.0f64);
    for dt in [1.1, 3.0] {
        let base = g2(dt, &cfg.system, &space, &cfg.integrator, &cfg.detectors);
        frame_dev = frame_dev.max((g2(dt, &framed, &space, &cfg.integrator, &cfg.detectors) / base - 1.0).abs());
        split_dev = split_dev.max((g2(dt, &split, &space, &cfg.integrator, &cfg.detectors) / base - 1.0).abs());
    }
    verdict(
        frame_dev <= 1e-6 && split_dev <= 1e-6,
        format!("frame offset {shift} rad/ps: {frame_dev:.1e}, theta moved to read term: {split_dev:.1e}"),
    )
}

fn main() {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let mut failed = Vec::new();
    let mut report = |id: u32, v: Verdict| {
        println!("criterion {id}: {}  {}  [{:.0} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail, start.elapsed().as_secs_f64());
        let _ = std::io::stdout().flush();
        if !v.pass {
            failed.push(id);
        }
    };

    let rows = run_sweep(&cfg, &Variant::ALL).expect("default sweep");
    report(1, criterion_1(&cfg, &rows));
    report(2, criterion_2(&cfg, &rows));
    report(3, criterion_3(&cfg, &rows));
    report(4, criterion_4(&cfg, &rows));
    report(5, criterion_5(&rows));
    report(6, criterion_6(&cfg));
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9(&cfg));
    report(10, criterion_10(&cfg));

    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
