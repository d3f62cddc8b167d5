//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The lines go straight to the stderr handle so they show up even when the
//! test harness captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use lensmimo::channel::{
    correlation_matrix, matrix_sqrt, power_correlation_matrix, PowerProfile, UserConfig,
};
use lensmimo::feedback::{generate_rvq, quantize};
use lensmimo::io::render_sim_result;
use lensmimo::linklevel::{
    run_monte_carlo, zf_precoder, LensSetup, PrecoderKind, ProfileSource, Quantizer,
    ScenarioConfig, SimResult,
};
use lensmimo::rng::{complex_normal, substream, Domain};
use lensmimo::waveoptics::{
    find_focal_peak, lens_phase_profile, propagate, ArraySpec, LensSpec, LensSystem,
    PropagationGrid,
};
use lensmimo::Complex64;
use nalgebra::{DMatrix, DVector};

fn report(criterion: u32, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let pass = pass && elapsed <= limit;
    let line = format!(
        "criterion {criterion}: {} ({:.2} s, limit {} s) {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn lens_setup() -> LensSetup {
    LensSetup {
        lens: LensSpec::from_permittivity(40.0, 20.0, 2.4).unwrap(),
        grid: PropagationGrid::new(0.3125, 1.0, 80.0).unwrap(),
        distance: 25.0,
    }
}

fn scenario(
    angles: &[f64],
    precoder: PrecoderKind,
    quantizer: Quantizer,
    bits: u32,
    lens: bool,
) -> ScenarioConfig {
    ScenarioConfig {
        antennas: 64,
        spacing: 0.5,
        user_angles: angles.to_vec(),
        sigma_theta: 5.0,
        lens: lens.then(lens_setup),
        precoder,
        quantizer,
        bits,
        snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        trials: 1000,
        seed: 1,
    }
}

/// `a` beats `b` at `snr` by more than `k` combined standard errors.
fn beats(a: &SimResult, b: &SimResult, snr: f64, k: f64) -> (bool, String) {
    let (x, y) = (a.at(snr).unwrap(), b.at(snr).unwrap());
    let se = x.stderr.hypot(y.stderr);
    let gap = x.mean_sum_rate - y.mean_sum_rate;
    (
        gap > k * se,
        format!(
            "{snr} dB: {:.3} vs {:.3} (gap {:.2} se)",
            x.mean_sum_rate,
            y.mean_sum_rate,
            gap / se
        ),
    )
}

#[test]
fn criterion_1_focal_peaks() {
    let start = Instant::now();
    let grid = PropagationGrid::new(1.0, 1.0, 80.0).unwrap();
    let expected = [
        (20.0, 16.0, 6.11),
        (30.0, 20.0, 4.92),
        (40.0, 27.0, 3.47),
        (50.0, 33.0, 2.88),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (f, z_ref, gain_ref) in expected {
        let lens = LensSpec::from_permittivity(f, 20.0, 2.4).unwrap();
        let h = propagate(&lens_phase_profile(&lens, &grid, 0.0).unwrap(), 100).unwrap();
        let peak = find_focal_peak(&h).unwrap();
        let ok = (peak.distance - z_ref).abs() <= 3.0 && (peak.gain / gain_ref - 1.0).abs() <= 0.2;
        pass &= ok;
        detail.push(format!(
            "f={f}: peak {} (want {z_ref}+-3), gain {:.2} (want {gain_ref}+-20%)",
            peak.distance, peak.gain
        ));
    }
    report(
        1,
        pass,
        start.elapsed(),
        Duration::from_secs(10),
        &detail.join("; "),
    );
}

#[test]
fn criterion_2_conservation_and_symmetry() {
    let start = Instant::now();
    let mut worst_total: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut worst_asym: f64 = 0.0;
    for (dx, dz) in [(1.0, 1.0), (0.3125, 1.0), (0.5, 2.0)] {
        let grid = PropagationGrid::new(dx, dz, 80.0).unwrap();
        for f in [20.0, 40.0, 50.0] {
            let lens = LensSpec::from_permittivity(f, 20.0, 2.4).unwrap();
            for aod in [-20.0f64, 0.0, 7.5, 25.0] {
                let u0 = lens_phase_profile(&lens, &grid, aod.to_radians()).unwrap();
                let target = u0.total_intensity();
                let h = propagate(&u0, 60).unwrap();
                for n in 0..=h.steps() {
                    let total: f64 = h.intensity_column(n).iter().sum();
                    worst_total = worst_total.max((total / target - 1.0).abs());
                }
                worst_drift = worst_drift.max(h.max_drift());
                if aod == 0.0 {
                    let c = grid.center();
                    for n in 0..=h.steps() {
                        let p = h.intensity_column(n);
                        for m in 1..c {
                            worst_asym = worst_asym.max((p[c + m] - p[c - m]).abs());
                        }
                    }
                }
            }
        }
    }
    let sys = LensSystem::new(
        LensSpec::from_permittivity(40.0, 20.0, 2.4).unwrap(),
        PropagationGrid::new(0.3125, 1.0, 80.0).unwrap(),
        ArraySpec::new(64, 0.5, 25.0).unwrap(),
    )
    .unwrap();
    let sweep: Vec<f64> = (0..=120).map(|i| -30.0 + 0.5 * i as f64).collect();
    let worst_sum = sys
        .profiles(&sweep, 1)
        .unwrap()
        .iter()
        .map(|p| (p.values().iter().sum::<f64>() - 64.0).abs())
        .fold(0.0, f64::max);
    let pass =
        worst_total <= 1e-9 && worst_drift <= 0.05 && worst_asym <= 1e-6 && worst_sum <= 1e-6;
    report(
        2,
        pass,
        start.elapsed(),
        Duration::from_secs(5),
        &format!(
            "intensity error {worst_total:.1e}, drift {worst_drift:.1e}, asymmetry {worst_asym:.1e}, profile sum error {worst_sum:.1e}"
        ),
    );
}

/// `∫ P(θ)·exp(jκdΔ·sin(θ_k + θ)) dθ` over the truncated Laplacian, by Simpson's rule on each side of zero.
fn correlation_by_quadrature(theta_k: f64, sigma: f64, lag: f64, spacing: f64) -> Complex64 {
    let pi = std::f64::consts::PI;
    let s2 = std::f64::consts::SQRT_2;
    let beta = 1.0 / (1.0 - (-s2 * pi / sigma).exp());
    let pdf = |t: f64| beta / (s2 * sigma) * (-(s2 * t / sigma).abs()).exp();
    let g = |t: f64| Complex64::from_polar(pdf(t), 2.0 * pi * spacing * lag * (theta_k + t).sin());
    let n = 400_000;
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in [(-pi, 0.0), (0.0, pi)] {
        let h = (b - a) / n as f64;
        let mut s = g(a) + g(b);
        for i in 1..n {
            s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc += s * (h / 3.0);
    }
    acc
}

#[test]
fn criterion_3_small_oracles() {
    let start = Instant::now();
    let mut notes = Vec::new();

    // Zero forcing against the 2x2 adjugate inverse of the Gram matrix.
    let mut zf_err: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = substream(3, Domain::Misc, seed, 0);
        let h = DMatrix::from_fn(2, 4, |_, _| complex_normal(&mut rng));
        let hh = h.adjoint();
        let g = &h * &hh;
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let inv =
            DMatrix::from_row_slice(2, 2, &[g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]]) / det;
        let oracle = hh * inv;
        let f = zf_precoder(&h).unwrap();
        zf_err = zf_err.max((f.columns() - &oracle).norm() / oracle.norm());
    }
    notes.push(format!("zf {zf_err:.1e}"));

    // Quantizer against a brute-force scan.
    let mut mismatches = 0;
    for seed in 0..500 {
        let mut rng = substream(4, Domain::Misc, seed, 0);
        let c = generate_rvq(4, 4, &mut rng).unwrap();
        let h = DVector::from_fn(4, |_, _| complex_normal(&mut rng));
        let mut best = (0, -1.0);
        for j in 0..16 {
            let mut ip = Complex64::new(0.0, 0.0);
            for m in 0..4 {
                ip += h[m].conj() * c.vectors()[(m, j)];
            }
            if ip.norm() > best.1 {
                best = (j, ip.norm());
            }
        }
        if quantize(&h, &c).unwrap().index != best.0 {
            mismatches += 1;
        }
    }
    notes.push(format!("quantize mismatches {mismatches}"));

    // Closed-form correlation against quadrature.
    let mut corr_err: f64 = 0.0;
    for &sigma_deg in &[1.0, 2.0, 5.0, 10.0] {
        for &theta in &[-25.0, 0.0, 12.0] {
            let r =
                correlation_matrix(&UserConfig::new(theta, sigma_deg).unwrap(), 9, 0.5).unwrap();
            for lag in 0..=8 {
                let q = correlation_by_quadrature(
                    f64::to_radians(theta),
                    f64::to_radians(sigma_deg),
                    lag as f64,
                    0.5,
                );
                corr_err = corr_err.max((r.entries[(lag, 0)] - q).norm());
            }
        }
    }
    notes.push(format!("correlation {corr_err:.3}"));

    // Square-root reconstruction.
    let mut sqrt_err: f64 = 0.0;
    for &(theta, sigma) in &[(-12.0, 5.0), (0.0, 1.0), (28.0, 10.0), (5.0, 0.2)] {
        let r = correlation_matrix(&UserConfig::new(theta, sigma).unwrap(), 64, 0.5).unwrap();
        let s = matrix_sqrt(&r.entries).unwrap();
        sqrt_err = sqrt_err.max((&s * &s - &r.entries).norm() / r.entries.norm());
    }
    notes.push(format!("sqrt {sqrt_err:.1e}"));

    let pass = zf_err <= 1e-10 && mismatches == 0 && corr_err <= 0.05 && sqrt_err <= 1e-8;
    report(
        3,
        pass,
        start.elapsed(),
        Duration::from_secs(30),
        &notes.join(", "),
    );
}

#[test]
fn criterion_4_four_user_sector() {
    let start = Instant::now();
    let angles = [-12.0, -7.0, 10.0, 0.0];
    let mvcq = Quantizer::Mvcq(ProfileSource::Bpm);
    let mut pass = true;
    let mut notes = Vec::new();
    for precoder in [PrecoderKind::Zf, PrecoderKind::Mrt] {
        let ours = run_monte_carlo(&scenario(&angles, precoder, mvcq, 6, true)).unwrap();
        let rvq_lens =
            run_monte_carlo(&scenario(&angles, precoder, Quantizer::Rvq, 6, true)).unwrap();
        let rvq_plain =
            run_monte_carlo(&scenario(&angles, precoder, Quantizer::Rvq, 6, false)).unwrap();
        for snr in [5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
            for (name, other) in [("lens rvq", &rvq_lens), ("no-lens rvq", &rvq_plain)] {
                let (ok, msg) = beats(&ours, other, snr, 3.0);
                pass &= ok;
                if !ok || snr == 10.0 {
                    notes.push(format!("{precoder} vs {name} {msg}"));
                }
            }
        }
    }
    report(
        4,
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        &notes.join("; "),
    );
}

#[test]
fn criterion_5_adjacent_users() {
    let start = Instant::now();
    let angles = [10.0, 11.0];
    let mvcq = Quantizer::Mvcq(ProfileSource::Bpm);
    let zf6 = run_monte_carlo(&scenario(&angles, PrecoderKind::Zf, mvcq, 6, true)).unwrap();
    let mrt6 = run_monte_carlo(&scenario(&angles, PrecoderKind::Mrt, mvcq, 6, true)).unwrap();
    let zf2 = run_monte_carlo(&scenario(&angles, PrecoderKind::Zf, mvcq, 2, true)).unwrap();
    let rvq6 = run_monte_carlo(&scenario(
        &angles,
        PrecoderKind::Zf,
        Quantizer::Rvq,
        6,
        true,
    ))
    .unwrap();
    let (mut pass, msg) = beats(&zf6, &mrt6, 10.0, 3.0);
    let mut notes = vec![format!("zf vs mrt {msg}")];
    for snr in [5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
        let (ok, msg) = beats(&zf2, &rvq6, snr, 3.0);
        pass &= ok;
        notes.push(format!("2-bit mvcq vs 6-bit rvq {msg}"));
    }
    report(
        5,
        pass,
        start.elapsed(),
        Duration::from_secs(180),
        &notes.join("; "),
    );
}

#[test]
fn criterion_6_profile_estimators() {
    let start = Instant::now();
    let angles = [-15.0, -10.0, -4.0, 11.0, 5.0];
    let run = |q: Quantizer| {
        let mut cfg = scenario(&angles, PrecoderKind::Zf, q, 6, true);
        cfg.snr_db = vec![15.0];
        run_monte_carlo(&cfg).unwrap()
    };
    let bpm = run(Quantizer::Mvcq(ProfileSource::Bpm));
    let gauss = run(Quantizer::Mvcq(ProfileSource::Gaussian));
    let sub = run(Quantizer::Mvcq(ProfileSource::SubBpm(10)));
    let rvq = run(Quantizer::Rvq);
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, a, b) in [
        ("bpm>gaussian", &bpm, &gauss),
        ("bpm>sub-bpm", &bpm, &sub),
        ("sub-bpm>rvq", &sub, &rvq),
    ] {
        let (ok, msg) = beats(a, b, 15.0, 2.0);
        pass &= ok;
        notes.push(format!("{name} {msg}"));
    }
    report(
        6,
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        &notes.join("; "),
    );
}

#[test]
fn criterion_7_power_correlation() {
    let start = Instant::now();
    let sys = LensSystem::new(
        LensSpec::from_permittivity(40.0, 20.0, 2.4).unwrap(),
        PropagationGrid::new(0.3125, 1.0, 80.0).unwrap(),
        ArraySpec::new(64, 0.5, 25.0).unwrap(),
    )
    .unwrap();
    let far = power_correlation_matrix(&sys.profiles(&[-15.0, 15.0], 1).unwrap()).unwrap()[(0, 1)];
    let near = power_correlation_matrix(&sys.profiles(&[15.0, 17.0], 1).unwrap()).unwrap()[(0, 1)];
    let flat =
        power_correlation_matrix(&[PowerProfile::ones(64, -15.0), PowerProfile::ones(64, 15.0)])
            .unwrap();
    let flat_ok = flat.iter().all(|&v| v == 1.0);
    let pass = far < 0.9 && flat_ok && near > far;
    report(
        7,
        pass,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("psi(-15,15) = {far:.4}, psi(15,17) = {near:.4}, lensless all ones: {flat_ok}"),
    );
}

#[test]
fn criterion_8_thread_independence() {
    let start = Instant::now();
    let mut csv = Vec::new();
    for (threads, q) in [
        (1, Quantizer::Mvcq(ProfileSource::Bpm)),
        (3, Quantizer::Mvcq(ProfileSource::Bpm)),
        (8, Quantizer::Mvcq(ProfileSource::Bpm)),
        (1, Quantizer::Mvcq(ProfileSource::Gaussian)),
        (5, Quantizer::Mvcq(ProfileSource::Gaussian)),
    ] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let mut cfg = scenario(&[-12.0, -7.0, 10.0, 0.0], PrecoderKind::Zf, q, 6, true);
        cfg.trials = 300;
        let r = pool.install(|| run_monte_carlo(&cfg)).unwrap();
        csv.push((q, render_sim_result(&r)));
    }
    let same = |q: Quantizer| {
        let runs: Vec<&String> = csv
            .iter()
            .filter(|(x, _)| *x == q)
            .map(|(_, s)| s)
            .collect();
        runs.windows(2).all(|w| w[0].as_bytes() == w[1].as_bytes())
    };
    let pass =
        same(Quantizer::Mvcq(ProfileSource::Bpm)) && same(Quantizer::Mvcq(ProfileSource::Gaussian));
    report(
        8,
        pass,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "{} runs over 1-8 threads, byte-identical per scenario: {pass}",
            csv.len()
        ),
    );
}
