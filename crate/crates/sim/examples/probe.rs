//! Scratch probe for tuning the Monte Carlo acceptance thresholds.
//! Not part of the test suite.

use nalgebra::DMatrix;
use otfs_core::detection::Constellation;
use otfs_core::dictionary::pilot_dictionary;
use otfs_core::estimators::{dd_noise_diag, pa_bl_mimo};
use otfs_core::linalg::vec_of;
use otfs_core::modem::simulate_frame;
use otfs_core::precoding::decouple;
use otfs_sim::channel::{generate_channel, GeneratedChannel};
use otfs_sim::config::ExperimentConfig;
use otfs_sim::trial::{run_trial, trial_rng};

fn small_cfg() -> ExperimentConfig {
    std::fs::read_to_string("configs/system1_small.cfg")
        .unwrap()
        .parse()
        .unwrap()
}

fn support_recovery_probe() {
    let mut cfg = small_cfg();
    cfg.snr_db = vec![30.0];
    if let Ok(v) = std::env::var("PROBE_SNR") {
        cfg.snr_db = vec![v.parse().unwrap()];
    }
    let use_da = std::env::var("PROBE_DA").is_ok();
    if let Ok(v) = std::env::var("PROBE_MAX_ITERS") {
        cfg.em.max_iters = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("PROBE_EPS") {
        cfg.em.epsilon = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("PROBE_FLOOR") {
        cfg.em.lambda_floor = v.parse().unwrap();
    }
    eprintln!("em settings: eps {} max {}", cfg.em.epsilon, cfg.em.max_iters);
    let grid = otfs_core::grid::OtfsGrid::rectangular(cfg.m, cfg.n, cfg.subcarrier_spacing_hz).unwrap();
    let support = otfs_core::grid::ChannelSupport::new(cfg.m_tau, cfg.n_nu, cfg.g_nu).unwrap();
    let pc = otfs_core::precoding::make_precoders(cfg.n, cfg.k2, cfg.precoder).unwrap();
    let constellation = Constellation::new(cfg.modulation);
    let sigma2 = cfg.noise_variance(30.0);
    let mut hits = 0;
    let trials = 200;
    for t in 0..trials {
        let mut rng = trial_rng(cfg.seed, 0, t);
        let GeneratedChannel::Siso(paths) = generate_channel(&cfg, &mut rng).unwrap() else {
            panic!()
        };
        let idx = constellation.random_indices(cfg.m, cfg.k1, &mut rng);
        let data = otfs_core::detection::map_indices(&idx, &constellation, cfg.sigma_d2.sqrt());
        let pilot = otfs_core::precoding::random_pilot_matrix(cfg.m, cfg.k2, cfg.sigma_p2, &mut rng);
        let frame = otfs_core::precoding::DdFrame::new(data, pilot, cfg.sigma_d2, cfg.sigma_p2).unwrap();
        let y = simulate_frame(&frame, &pc, &paths, &grid, sigma2.sqrt(), &mut rng).unwrap();
        let y_p = decouple(&y, pc.pilot()).unwrap();
        let omega = pilot_dictionary(&frame.pilot, &grid, &support).unwrap();
        let noise = dd_noise_diag(&grid, cfg.k2, sigma2);
        let y_vec = DMatrix::from_column_slice(y_p.len(), 1, vec_of(&y_p).as_slice());
        let post = pa_bl_mimo(&y_vec, &omega, &noise, &cfg.em, 1).unwrap();
        let lambda_final = if use_da {
            let zeta = otfs_core::dictionary::zeta_matrix(&grid, &support).unwrap();
            let y_d = decouple(&y, pc.data()).unwrap();
            let coeffs = nalgebra::DVector::from_column_slice(post.mean.as_slice());
            let h_pa = otfs_core::estimators::reconstruct_dd_channel(&coeffs, &grid, &support).unwrap();
            let xi_pa = otfs_core::estimators::xi_matrix(&post.covariance, &zeta, cfg.m).unwrap();
            let rx_gram = nalgebra::DVector::from_element(cfg.m, 1.0);
            let soft = otfs_core::detection::lmmse_uncertainty_detect(&y_d, &h_pa, &xi_pa, sigma2, cfg.sigma_d2, &rx_gram).unwrap();
            let init = otfs_core::detection::slice_to_constellation(&soft, &constellation, cfg.sigma_d2.sqrt());
            let input = otfs_core::estimators::DaBlSisoInput {
                y_data: &y_d, y_pilot: &y_p, pilot_dict: &omega,
                data_init: init, lambda_init: post.hyperparams.clone(),
                rule: otfs_core::estimators::UncertaintyRule::Lmmse,
                constellation: &constellation, sigma_d2: cfg.sigma_d2, noise_var: sigma2,
            };
            let out = otfs_core::estimators::da_bl_siso(&input, &grid, &support, &zeta, &cfg.em).unwrap();
            out.hyperparams
        } else {
            post.hyperparams.clone()
        };

        let mut true_cells: Vec<usize> = paths
            .iter()
            .map(|p| {
                let j = (p.doppler_index * cfg.g_nu as f64 / cfg.n_nu as f64).round() as usize;
                support.cell_index(p.delay_tap, j)
            })
            .collect();
        true_cells.sort_unstable();
        let mut order: Vec<usize> = (0..lambda_final.len()).collect();
        order.sort_by(|&a, &b| lambda_final[b].partial_cmp(&lambda_final[a]).unwrap());
        let mut top: Vec<usize> = order[..true_cells.len()].to_vec();
        top.sort_unstable();
        if top == true_cells {
            hits += 1;
        } else if std::env::var("PROBE_VERBOSE").is_ok() {
            let gains: Vec<String> = paths.iter().map(|p| format!("{:.3}", p.gain.norm_sqr())).collect();
            let top4: Vec<String> = order[..5].iter().map(|&i| format!("{}:{:.2e}", i, lambda_final[i])).collect();
            let true_l: Vec<String> = true_cells.iter().map(|&i| format!("{}:{:.2e}", i, lambda_final[i])).collect();
            eprintln!("t{t}: true {true_cells:?} |h|2 {gains:?} top5 {top4:?} true-lam {true_l:?}");
        }
    }
    println!("support recovery at {} dB (da={}): {hits}/{trials}", cfg.snr_db[0], use_da);
}

fn ordering_probe(config_path: &str, label: &str) {
    let mut cfg: ExperimentConfig = std::fs::read_to_string(config_path).unwrap().parse().unwrap();
    if let Ok(v) = std::env::var("PROBE_SIGMA_P2") {
        cfg.sigma_p2 = v.parse().unwrap();
        cfg.sigma_d2 = 1.0 - cfg.sigma_p2;
    }
    if let Ok(v) = std::env::var("PROBE_TRIALS") {
        cfg.trials = v.parse().unwrap();
    }
    if std::env::var("PROBE_SNR0").is_ok() {
        cfg.snr_db = vec![0.0];
    }
    if let Ok(v) = std::env::var("PROBE_MAX_ITERS") {
        cfg.em.max_iters = v.parse().unwrap();
    }
    println!("--- {label} ({} trials/point) ---", cfg.trials);
    for (s, &snr) in cfg.snr_db.iter().enumerate() {
        let mut nmse: Vec<Vec<f64>> = vec![Vec::new(); cfg.schemes.len()];
        let mut ser: Vec<Vec<f64>> = vec![Vec::new(); cfg.schemes.len()];
                let mut bcrb = Vec::new();
        let mut iters: Vec<Vec<f64>> = vec![Vec::new(); cfg.schemes.len()];
        for t in 0..cfg.trials {
            let r = run_trial(&cfg, s, t).unwrap();
            for (pos, (_, o)) in r.schemes.iter().enumerate() {
                nmse[pos].push(o.nmse);
                ser[pos].push(o.ser);
                if let Some(i) = o.em_iterations {
                    iters[pos].push(i as f64);
                }
            }
            bcrb.push(r.bcrb);
        }
        let med = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        print!("snr {snr:>4}: ");
        for (pos, scheme) in cfg.schemes.iter().enumerate() {
            let m = med(&mut nmse[pos]);
            let sm = ser[pos].iter().sum::<f64>() / ser[pos].len() as f64;
            let it = if iters[pos].is_empty() {
                0.0
            } else {
                iters[pos].iter().sum::<f64>() / iters[pos].len() as f64
            };
            print!("{scheme}: nmse_med {m:.3e} ser {sm:.3e} it {it:.0} | ");
        }
        println!("bcrb {:.3e}", bcrb.iter().sum::<f64>() / bcrb.len() as f64);
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    if what == "support" || what == "all" {
        support_recovery_probe();
    }
    if what == "ordering" || what == "all" {
        ordering_probe("configs/system1_small.cfg", "system1-small SISO");
        ordering_probe("configs/system1_small_mimo.cfg", "system1-small 2x2 MIMO");
    }
}
