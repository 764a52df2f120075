//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Criteria 6c and 8 encode targets the estimation chain cannot meet under
//! this transmission model (see the failure anatomy printed by the tests);
//! they are asserted as stated rather than loosened, so they are expected to
//! stay red.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otfs_core::detection::{map_indices, Constellation};
use otfs_core::dictionary::{
    data_dictionary, joint_dictionary, mimo_pilot_dictionary, pilot_dictionary, zeta_matrix,
};
use otfs_core::estimators::{
    dd_noise_diag, lmmse_channel_estimate, pa_bl_mimo, per_block_vecs,
    xi_matrix, EmSettings,
};
use otfs_core::grid::{effective_dd_channel, ChannelSupport, DelayDopplerPath, OtfsGrid};
use otfs_core::linalg::{unvec, vec_of};
use otfs_core::modem::{
    apply_td_channel, complex_gaussian_matrix, otfs_demodulate, otfs_modulate, simulate_mimo_frame,
    MimoChannel, MimoConfig,
};
use otfs_core::precoding::{
    decouple, fourier_matrix, make_precoders, random_pilot_matrix, superimpose, DdFrame,
    UnitarySource,
};

use otfs_sim::channel::{generate_channel, GeneratedChannel};
use otfs_sim::config::{ExperimentConfig, Scheme};
use otfs_sim::metrics::efficiency;
use otfs_sim::trial::{run_trial, trial_rng, TrialResult};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&configs_dir().join(name)).expect("config parses")
}

fn report(criterion: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {criterion}: {status} ({detail})");
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_unit_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

// --- criterion 1 ------------------------------------------------------

#[test]
fn criterion_01_efficiency_reproduction() {
    let cases = [
        ("system1.cfg", "0.9688", "0.7178"),
        ("system2.cfg", "0.9375", "0.4355"),
        ("system3.cfg", "0.9688", "0.7178"),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, ap_sip, ep_siso) in cases {
        let eff = efficiency(&load_config(name));
        let got_ap = format!("{:.4}", eff.ap_sip);
        let got_ep = format!("{:.4}", eff.ep_siso);
        ok &= got_ap == ap_sip && got_ep == ep_siso;
        details.push(format!("{name}: ap_sip {got_ap} ep_siso {got_ep}"));
    }
    // Table row three needs the MIMO antenna counts.
    let mimo_cases = [
        ("system1_mimo.cfg", "0.7842"),
        ("system2_mimo.cfg", "0.5684"),
        ("system3_mimo.cfg", "0.8174"),
    ];
    for (name, ep_mimo) in mimo_cases {
        let eff = efficiency(&load_config(name));
        let got = format!("{:.4}", eff.ep_mimo);
        ok &= got == ep_mimo;
        details.push(format!("{name}: ep_mimo {got}"));
    }
    report("01 efficiency", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

// --- criterion 2 ------------------------------------------------------

#[test]
fn criterion_02_dd_profile_mapping() {
    let cfg = load_config("system1.cfg");
    let mut rng = trial_rng(cfg.seed, 0, 0);
    let GeneratedChannel::Siso(paths) = generate_channel(&cfg, &mut rng).expect("channel draws") else {
        panic!("system1 is a SISO config");
    };
    let taps: Vec<(usize, i64)> = paths
        .iter()
        .map(|p| (p.delay_tap, p.doppler_index.round() as i64))
        .collect();
    let expected = vec![(1usize, 0i64), (2, 1), (3, 2), (4, 4), (5, 6)];
    let ok = taps == expected;
    report("02 dd-profile mapping", ok, &format!("taps {taps:?}"));
    assert_eq!(taps, expected);
}

// --- criterion 3 ------------------------------------------------------

#[test]
fn criterion_03_pipeline_equivalence() {
    let grid = OtfsGrid::rectangular(8, 8, 15_000.0).unwrap();
    let f_n = fourier_matrix(8);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let paths: Vec<DelayDopplerPath> = (0..3)
            .map(|_| {
                DelayDopplerPath::new(
                    rng.random_range(0..8),
                    rng.random_range(0.0..4.0),
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let x_dd = random_unit_matrix(8, 8, &mut rng);
        let sigma = 0.3;

        // matched noise: replay the same generator stream for the draw
        let mut noise_rng = rng.clone();
        let w = complex_gaussian_matrix(8, 8, sigma, &mut noise_rng);

        let s = otfs_modulate(&x_dd, &grid).unwrap();
        let r = apply_td_channel(&s, &paths, &grid, sigma, &mut rng).unwrap();
        let y_chain = otfs_demodulate(&r, &grid).unwrap();

        let h_dd = effective_dd_channel(&grid, &paths).unwrap();
        let w_dd = &w * &f_n; // P_rx = I for rectangular pulses
        let y_model = &h_dd * &x_dd + w_dd;

        let diff = (&y_chain - &y_model)
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        worst = worst.max(diff);
    }
    let ok = worst < 1e-10;
    report("03 pipeline equivalence", ok, &format!("max |err| {worst:.3e}"));
    assert!(ok, "max elementwise error {worst}");
}

// --- criterion 4 ------------------------------------------------------

#[test]
fn criterion_04_decoupling_exactness() {
    let grid = OtfsGrid::rectangular(8, 8, 15_000.0).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let k2 = 1 + (seed as usize % 3);
        let pc = make_precoders(8, k2, UnitarySource::Fourier).unwrap();
        let paths: Vec<DelayDopplerPath> = (0..3)
            .map(|_| {
                DelayDopplerPath::new(
                    rng.random_range(0..8),
                    rng.random_range(0.0..4.0),
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let frame = DdFrame::new(
            random_unit_matrix(8, 8 - k2, &mut rng),
            random_unit_matrix(8, k2, &mut rng),
            0.5,
            0.5,
        )
        .unwrap();
        let x_dd = superimpose(&frame, &pc).unwrap();
        let s = otfs_modulate(&x_dd, &grid).unwrap();
        let r = apply_td_channel(&s, &paths, &grid, 0.0, &mut rng).unwrap();
        let y = otfs_demodulate(&r, &grid).unwrap();
        let h_dd = effective_dd_channel(&grid, &paths).unwrap();
        let data_residual = (decouple(&y, pc.data()).unwrap() - &h_dd * &frame.data).norm();
        let pilot_residual = (decouple(&y, pc.pilot()).unwrap() - &h_dd * &frame.pilot).norm();
        worst = worst.max(data_residual).max(pilot_residual);
    }
    let ok = worst < 1e-9;
    report("04 decoupling exactness", ok, &format!("max residual {worst:.3e}"));
    assert!(ok, "max residual {worst}");
}

// --- criterion 5 ------------------------------------------------------

#[test]
fn criterion_05_dictionary_oracles() {
    let grid = OtfsGrid::rectangular(8, 8, 15_000.0).unwrap();
    let support = ChannelSupport::new(4, 4, 4).unwrap();
    let pc = make_precoders(8, 2, UnitarySource::Fourier).unwrap();
    let mut worst = 0.0f64;

    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        // grid-supported channel with random coefficients
        let h = DVector::from_fn(support.grid_size(), |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let paths: Vec<DelayDopplerPath> = (0..h.len())
            .map(|idx| {
                let (i, j) = support.cell_coords(idx);
                DelayDopplerPath::new(i, support.doppler_exponent(j), h[idx])
            })
            .collect();
        let frame = DdFrame::new(
            random_unit_matrix(8, 6, &mut rng),
            random_unit_matrix(8, 2, &mut rng),
            0.5,
            0.5,
        )
        .unwrap();
        let x_dd = superimpose(&frame, &pc).unwrap();
        let s = otfs_modulate(&x_dd, &grid).unwrap();
        let r = apply_td_channel(&s, &paths, &grid, 0.0, &mut rng).unwrap();
        let y = otfs_demodulate(&r, &grid).unwrap();
        let y_d = decouple(&y, pc.data()).unwrap();
        let y_p = decouple(&y, pc.pilot()).unwrap();

        let omega_p = pilot_dictionary(&frame.pilot, &grid, &support).unwrap();
        let omega_d = data_dictionary(&frame.data, &grid, &support).unwrap();
        let phi = joint_dictionary(&omega_d, &omega_p).unwrap();
        worst = worst.max((&omega_p * &h - vec_of(&y_p)).norm());
        worst = worst.max((&omega_d * &h - vec_of(&y_d)).norm());
        let mut y_joint = DVector::zeros(y_d.len() + y_p.len());
        y_joint.rows_mut(0, y_d.len()).copy_from(&vec_of(&y_d));
        y_joint.rows_mut(y_d.len(), y_p.len()).copy_from(&vec_of(&y_p));
        worst = worst.max((&phi * &h - y_joint).norm());
    }

    // MIMO 2x2: stacked pilot dictionary against the simulated chain
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let mimo = MimoConfig::new(2, 2).unwrap();
        let taps: Vec<(usize, f64)> = (0..3)
            .map(|_| {
                let i = rng.random_range(0..support.max_delay);
                let j = rng.random_range(0..support.doppler_grid_points);
                (i, support.doppler_exponent(j))
            })
            .collect();
        let gains: Vec<DMatrix<Complex64>> =
            (0..3).map(|_| random_unit_matrix(2, 2, &mut rng)).collect();
        let channel = MimoChannel::new(taps.clone(), gains).unwrap();
        let frames: Vec<DdFrame> = (0..2)
            .map(|_| {
                DdFrame::new(
                    random_unit_matrix(8, 6, &mut rng),
                    random_pilot_matrix(8, 2, 0.5, &mut rng),
                    0.5,
                    0.5,
                )
                .unwrap()
            })
            .collect();
        let y = simulate_mimo_frame(&frames, &pc, &channel, &grid, &mimo, 0.0, &mut rng).unwrap();
        let y_p = decouple(&y, pc.pilot()).unwrap();
        let y_p_vecs = per_block_vecs(&y_p, 8, 2).unwrap();

        let pilots: Vec<DMatrix<Complex64>> = frames.iter().map(|f| f.pilot.clone()).collect();
        let omega = mimo_pilot_dictionary(&pilots, &grid, &support).unwrap();
        for r in 0..2usize {
            let mut h_r = DVector::zeros(2 * support.grid_size());
            for t in 0..2usize {
                for (tap_idx, &(i, k)) in taps.iter().enumerate() {
                    let j = (k * support.doppler_grid_points as f64 / support.max_doppler as f64)
                        .round() as usize;
                    let cell = support.cell_index(i, j);
                    h_r[t * support.grid_size() + cell] += channel.paths_for(r, t)[tap_idx].gain;
                }
            }
            worst = worst.max((&omega * &h_r - y_p_vecs.column(r)).norm());
        }
    }

    let ok = worst < 1e-10;
    report("05 dictionary oracles", ok, &format!("max residual {worst:.3e}"));
    assert!(ok, "max residual {worst}");
}

// --- criterion 6 ------------------------------------------------------

#[test]
fn criterion_06a_first_em_iteration_is_lmmse() {
    let grid = OtfsGrid::rectangular(16, 8, 15_000.0).unwrap();
    let support = ChannelSupport::new(4, 4, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let pilot = random_pilot_matrix(16, 1, 0.5, &mut rng);
    let omega = pilot_dictionary(&pilot, &grid, &support).unwrap();
    let y = random_unit_matrix(16, 1, &mut rng);
    let noise = dd_noise_diag(&grid, 1, 0.05);
    let one_shot = EmSettings {
        max_iters: 1,
        ..EmSettings::default()
    };
    let posterior = pa_bl_mimo(&y, &omega, &noise, &one_shot, 1).unwrap();
    let prior = DVector::from_element(support.grid_size(), 1.0);
    let lmmse = lmmse_channel_estimate(&y, &omega, &noise, &prior).unwrap();
    let gap = (&posterior.mean - lmmse).norm();
    let ok = gap < 1e-10;
    report("06a EM first step = LMMSE", ok, &format!("gap {gap:.3e}"));
    assert!(ok, "gap {gap}");
}

#[test]
fn criterion_06b_m_step_matches_numeric_maximizer() {
    // 4-coefficient instance; golden-section maximization of the prior term.
    let grid = OtfsGrid::rectangular(8, 8, 15_000.0).unwrap();
    let support = ChannelSupport::new(2, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let pilot = random_pilot_matrix(8, 1, 0.5, &mut rng);
    let omega = pilot_dictionary(&pilot, &grid, &support).unwrap();
    let y = random_unit_matrix(8, 1, &mut rng);
    let noise = dd_noise_diag(&grid, 1, 0.1);
    let one_shot = EmSettings {
        max_iters: 1,
        ..EmSettings::default()
    };
    let posterior = pa_bl_mimo(&y, &omega, &noise, &one_shot, 1).unwrap();
    let maximize = |f: &dyn Fn(f64) -> f64| {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (1e-9f64, 10.0f64);
        for _ in 0..200 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if f(x1) < f(x2) {
                a = x1;
            } else {
                b = x2;
            }
        }
        0.5 * (a + b)
    };
    let mut worst = 0.0f64;
    for i in 0..4 {
        let second_moment = posterior.covariance[(i, i)].re + posterior.mean[(i, 0)].norm_sqr();
        let q = move |lambda: f64| -lambda.ln() - second_moment / lambda;
        let numeric = maximize(&q);
        worst = worst.max((numeric - posterior.hyperparams[i]).abs());
    }
    let ok = worst < 1e-6;
    report("06b M-step numeric oracle", ok, &format!("max gap {worst:.3e}"));
    assert!(ok, "max gap {worst}");
}

#[test]
fn criterion_06c_support_recovery_at_30db() {
    // As stated: the three largest hyperparameters must sit exactly on the
    // true cells in at least 95% of 200 seeds at 30 dB. The per-column
    // channel model makes same-delay Doppler atoms ~0.994-coherent, and the
    // EM settles on midpoint cells for a large fraction of draws no matter
    // the SNR, so this target is not reachable; the criterion is asserted
    // unchanged.
    let mut cfg = load_config("system1_small.cfg");
    cfg.snr_db = vec![30.0];
    let grid = OtfsGrid::rectangular(cfg.m, cfg.n, cfg.subcarrier_spacing_hz).unwrap();
    let support = ChannelSupport::new(cfg.m_tau, cfg.n_nu, cfg.g_nu).unwrap();
    let pc = make_precoders(cfg.n, cfg.k2, cfg.precoder).unwrap();
    let constellation = Constellation::new(cfg.modulation);
    let sigma2 = cfg.noise_variance(30.0);
    let mut hits = 0usize;
    let trials = 200usize;
    for t in 0..trials {
        let mut rng = trial_rng(cfg.seed, 0, t);
        let GeneratedChannel::Siso(paths) = generate_channel(&cfg, &mut rng).unwrap() else {
            panic!("SISO config expected");
        };
        let idx = constellation.random_indices(cfg.m, cfg.k1, &mut rng);
        let data = map_indices(&idx, &constellation, cfg.sigma_d2.sqrt());
        let pilot = random_pilot_matrix(cfg.m, cfg.k2, cfg.sigma_p2, &mut rng);
        let frame = DdFrame::new(data, pilot, cfg.sigma_d2, cfg.sigma_p2).unwrap();
        let y =
            otfs_core::modem::simulate_frame(&frame, &pc, &paths, &grid, sigma2.sqrt(), &mut rng)
                .unwrap();
        let y_p = decouple(&y, pc.pilot()).unwrap();
        let omega = pilot_dictionary(&frame.pilot, &grid, &support).unwrap();
        let noise = dd_noise_diag(&grid, cfg.k2, sigma2);
        let y_vec = DMatrix::from_column_slice(y_p.len(), 1, vec_of(&y_p).as_slice());
        let posterior = pa_bl_mimo(&y_vec, &omega, &noise, &cfg.em, 1).unwrap();

        let mut true_cells: Vec<usize> = paths
            .iter()
            .map(|p| {
                let j = (p.doppler_index * cfg.g_nu as f64 / cfg.n_nu as f64).round() as usize;
                support.cell_index(p.delay_tap, j)
            })
            .collect();
        true_cells.sort_unstable();
        let mut order: Vec<usize> = (0..posterior.hyperparams.len()).collect();
        order.sort_by(|&a, &b| {
            posterior.hyperparams[b]
                .partial_cmp(&posterior.hyperparams[a])
                .unwrap()
        });
        let mut top: Vec<usize> = order[..true_cells.len()].to_vec();
        top.sort_unstable();
        if top == true_cells {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    let ok = rate >= 0.95;
    report(
        "06c exact support recovery",
        ok,
        &format!("{hits}/{trials} = {rate:.3}, required >= 0.95"),
    );
    assert!(ok, "support recovery rate {rate:.3} < 0.95");
}

// --- criterion 7 ------------------------------------------------------

#[test]
fn criterion_07_xi_sampling_oracle() {
    let start = std::time::Instant::now();
    let grid = OtfsGrid::rectangular(8, 8, 15_000.0).unwrap();
    let support = ChannelSupport::new(4, 4, 4).unwrap();
    let zeta = zeta_matrix(&grid, &support).unwrap();
    let g = support.grid_size();
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let l = DMatrix::from_fn(g, g, |_, _| {
        Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
    });
    let sigma = &l * l.adjoint() * c(0.05, 0.0);
    let h_hat = DVector::from_fn(g, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let xi = xi_matrix(&sigma, &zeta, 8).unwrap();
    let root = nalgebra::Cholesky::new(sigma.clone()).unwrap().l();

    let samples = 100_000usize;
    let mut acc = DMatrix::<Complex64>::zeros(8, 8);
    let scale = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for _ in 0..samples {
        let z = DVector::from_fn(g, |_, _| {
            Complex64::new(
                rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng),
                rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng),
            )
        }) * scale;
        let h = &h_hat + &root * z;
        let h_mat = unvec(&(&zeta * h), 8, 8).unwrap();
        acc += h_mat.adjoint() * h_mat;
    }
    let mean = acc / c(samples as f64, 0.0);
    let base = unvec(&(&zeta * &h_hat), 8, 8).unwrap();
    let empirical = mean - base.adjoint() * base;
    let rel = (&empirical - &xi).norm() / xi.norm();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = rel < 0.03 && elapsed < 30.0;
    report(
        "07 Xi sampling oracle",
        ok,
        &format!("relative error {rel:.4}, {elapsed:.1} s"),
    );
    assert!(ok, "relative error {rel}, elapsed {elapsed}");
}

// --- criteria 8 and 9 share one Monte Carlo sweep ----------------------

struct SweepStats {
    snr_db: Vec<f64>,
    /// median NMSE per (snr, scheme)
    nmse_median: Vec<Vec<f64>>,
    /// mean absolute MSE of the da_bl_lmmse channel estimate per snr
    da_bl_mse_mean: Vec<f64>,
    bcrb_mean: Vec<f64>,
    schemes: Vec<Scheme>,
}

fn collect_stats(cfg: &ExperimentConfig) -> SweepStats {
    use rayon::prelude::*;
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(s, t)| run_trial(cfg, s, t).expect("trial runs"))
        .collect();

    let da_pos = cfg
        .schemes
        .iter()
        .position(|s| *s == Scheme::DaBlLmmse)
        .expect("da_bl_lmmse configured");
    let mut nmse_median = Vec::new();
    let mut da_bl_mse_mean = Vec::new();
    let mut bcrb_mean = Vec::new();
    for s in 0..cfg.snr_db.len() {
        let trials: Vec<&TrialResult> = results.iter().filter(|r| r.snr_index == s).collect();
        let mut per_scheme = Vec::new();
        for pos in 0..cfg.schemes.len() {
            let mut v: Vec<f64> = trials.iter().map(|r| r.schemes[pos].1.nmse).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = v.len() / 2;
            per_scheme.push(if v.len() % 2 == 1 {
                v[mid]
            } else {
                0.5 * (v[mid - 1] + v[mid])
            });
        }
        nmse_median.push(per_scheme);
        da_bl_mse_mean.push(
            trials
                .iter()
                .map(|r| r.schemes[da_pos].1.nmse * r.dd_channel_energy)
                .sum::<f64>()
                / trials.len() as f64,
        );
        bcrb_mean.push(trials.iter().map(|r| r.bcrb).sum::<f64>() / trials.len() as f64);
    }
    SweepStats {
        snr_db: cfg.snr_db.clone(),
        nmse_median,
        da_bl_mse_mean,
        bcrb_mean,
        schemes: cfg.schemes.clone(),
    }
}

fn siso_stats() -> &'static SweepStats {
    static STATS: OnceLock<SweepStats> = OnceLock::new();
    STATS.get_or_init(|| collect_stats(&load_config("system1_small.cfg")))
}

fn mimo_stats() -> &'static SweepStats {
    static STATS: OnceLock<SweepStats> = OnceLock::new();
    STATS.get_or_init(|| collect_stats(&load_config("system1_small_mimo.cfg")))
}

fn ordering_holds(stats: &SweepStats, label: &str, failures: &mut Vec<String>) {
    let pos = |scheme: Scheme| stats.schemes.iter().position(|s| *s == scheme).unwrap();
    let (i_mmse, i_pa, i_da) = (pos(Scheme::Mmse), pos(Scheme::PaBl), pos(Scheme::DaBlLmmse));
    for (s, &snr) in stats.snr_db.iter().enumerate() {
        let m = &stats.nmse_median[s];
        if !(m[i_da] <= m[i_pa] && m[i_pa] <= m[i_mmse]) {
            failures.push(format!(
                "{label} @ {snr} dB: da {:.3e}, pa {:.3e}, mmse {:.3e}",
                m[i_da], m[i_pa], m[i_mmse]
            ));
        }
    }
}

#[test]
fn criterion_08_estimator_ordering() {
    // Expected red at the SISO 0 dB point: the bootstrap detection there is
    // ~44% wrong, and the data-aided loop trusting those symbols lands above
    // PA-BL; every other (config, SNR) combination satisfies the ordering.
    let mut failures = Vec::new();
    ordering_holds(siso_stats(), "siso", &mut failures);
    ordering_holds(mimo_stats(), "mimo 2x2", &mut failures);
    let ok = failures.is_empty();
    report(
        "08 estimator ordering",
        ok,
        &if ok {
            "da_bl_lmmse <= pa_bl <= mmse at all 8 points".to_string()
        } else {
            failures.join("; ")
        },
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_09_bcrb_consistency() {
    let stats = siso_stats();
    let mut ok = true;
    let mut details = Vec::new();
    for (s, &snr) in stats.snr_db.iter().enumerate() {
        let ratio = stats.da_bl_mse_mean[s] / stats.bcrb_mean[s];
        details.push(format!("{snr} dB: mse/bcrb {ratio:.2}"));
        if stats.da_bl_mse_mean[s] < 0.8 * stats.bcrb_mean[s] {
            ok = false;
        }
    }
    let first = stats.da_bl_mse_mean[0] / stats.bcrb_mean[0];
    let last = stats.da_bl_mse_mean[stats.snr_db.len() - 1] / stats.bcrb_mean[stats.snr_db.len() - 1];
    if !(last < first) {
        ok = false;
    }
    details.push(format!("gap shrink {first:.2} -> {last:.2}"));
    report("09 BCRB consistency", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

// --- criterion 10 -----------------------------------------------------

#[test]
fn criterion_10_ser_benchmark() {
    // locate the SNR where perfect-CSI SER is closest to 1e-2, then compare
    // da_bl_lmmse against it with at least 1e5 detected symbols.
    let mut cfg = load_config("system1_small.cfg");
    cfg.schemes = vec![Scheme::PerfectCsi];
    cfg.snr_db = vec![11.0, 13.0, 15.0, 17.0];
    cfg.trials = 120;
    let probe = collect_ser(&cfg);
    let (best_idx, _) = probe
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (a.ln() - (1e-2f64).ln())
                .abs()
                .partial_cmp(&(b.ln() - (1e-2f64).ln()).abs())
                .unwrap()
        })
        .unwrap();
    let snr_star = cfg.snr_db[best_idx];

    let mut cfg2 = load_config("system1_small.cfg");
    cfg2.schemes = vec![Scheme::PerfectCsi, Scheme::DaBlLmmse];
    cfg2.snr_db = vec![snr_star];
    cfg2.trials = 450; // 450 * 240 = 108_000 data symbols
    let sers = collect_scheme_sers(&cfg2);
    let (ser_perfect, ser_da) = (sers[0], sers[1]);
    let symbols = cfg2.trials * cfg2.m * cfg2.k1;
    let ok = ser_da <= 3.0 * ser_perfect && symbols >= 100_000;
    report(
        "10 SER benchmark",
        ok,
        &format!(
            "snr* {snr_star} dB, perfect {ser_perfect:.3e}, da_bl {ser_da:.3e}, ratio {:.2}, {symbols} symbols",
            ser_da / ser_perfect
        ),
    );
    assert!(ok, "perfect {ser_perfect}, da {ser_da}");
}

fn collect_ser(cfg: &ExperimentConfig) -> Vec<f64> {
    use rayon::prelude::*;
    (0..cfg.snr_db.len())
        .map(|s| {
            let total: f64 = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, s, t).expect("trial runs").schemes[0].1.ser)
                .sum();
            total / cfg.trials as f64
        })
        .collect()
}

fn collect_scheme_sers(cfg: &ExperimentConfig) -> Vec<f64> {
    use rayon::prelude::*;
    let results: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, 0, t).expect("trial runs"))
        .collect();
    (0..cfg.schemes.len())
        .map(|pos| results.iter().map(|r| r.schemes[pos].1.ser).sum::<f64>() / results.len() as f64)
        .collect()
}

// --- criterion 11 -----------------------------------------------------

#[test]
fn criterion_11_determinism_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("tiny.cfg");
    std::fs::write(
        &config_path,
        "\
m = 16
n = 16
subcarrier_spacing_hz = 15000
k2 = 1
m_tau = 4
n_nu = 4
g_nu = 4
channel = random_on_grid
l_p = 3
snr_db = 0, 10
trials = 8
schemes = mmse, pa_bl, da_bl_lmmse, perfect_csi
seed = 9
",
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_otfs-sim");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_path = dir.path().join(format!("out_{threads}.csv"));
        let status = std::process::Command::new(bin)
            .args([
                "run",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out_path.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .status()
            .expect("binary runs");
        assert!(status.success(), "run exited with {status}");
        outputs.push(std::fs::read(&out_path).unwrap());
    }
    let ok = outputs[0] == outputs[1];
    report(
        "11 determinism",
        ok,
        &format!("{} bytes, identical across thread counts: {ok}", outputs[0].len()),
    );
    assert!(ok);
}
