//! Invariant suite behind `validate --config`: structural identities checked
//! at the configured sizes, printing one pass/fail line each.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use otfs_core::detection::Constellation;
use otfs_core::dictionary::{pilot_dictionary, zeta_matrix};
use otfs_core::estimators::{dd_noise_diag, lmmse_channel_estimate, pa_bl_mimo, EmSettings};
use otfs_core::grid::{effective_dd_channel, permutation_matrix, td_basis_matrix, DelayDopplerPath};
use otfs_core::linalg::{unvec, vec_of};
use otfs_core::modem::{apply_td_channel, otfs_demodulate, otfs_modulate};
use otfs_core::precoding::{decouple, random_pilot_matrix, superimpose, DdFrame};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::trial::{build_grid, build_precoders, build_support};

struct Check {
    name: &'static str,
    worst: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// Run the structural checks at the configured dimensions; returns `Ok(true)`
/// when every check passes. Prints one line per check to stdout.
pub fn run_validation(cfg: &ExperimentConfig) -> Result<bool> {
    cfg.validate()?;
    let grid = build_grid(cfg)?;
    let support = build_support(cfg)?;
    let pc = build_precoders(cfg)?;
    let constellation = Constellation::new(cfg.modulation);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut checks: Vec<Check> = Vec::new();

    // cyclic shift has order M
    {
        let pi = permutation_matrix(cfg.m);
        let mut power = DMatrix::<Complex64>::identity(cfg.m, cfg.m);
        for _ in 0..cfg.m {
            power = &power * &pi;
        }
        checks.push(Check {
            name: "permutation_order",
            worst: (&power - DMatrix::<Complex64>::identity(cfg.m, cfg.m)).norm(),
            tolerance: 0.0,
        });
    }

    // fractional Doppler powers stay unit-modulus
    {
        let mut worst = 0.0f64;
        for l in [0usize, 1, cfg.m_tau.saturating_sub(1)] {
            let b = td_basis_matrix(&grid, l, 0.37).unwrap();
            for q in 0..cfg.m {
                let entry = b[((q + l) % cfg.m, q)];
                worst = worst.max((entry.norm() - 1.0).abs());
            }
        }
        checks.push(Check {
            name: "unit_modulus_basis",
            worst,
            tolerance: 1e-12,
        });
    }

    // precoder semi-orthogonality
    checks.push(Check {
        name: "precoder_orthogonality",
        worst: pc.orthogonality_defect(),
        tolerance: 1e-10,
    });

    let random_paths = |rng: &mut ChaCha8Rng| -> Vec<DelayDopplerPath> {
        use rand::Rng;
        (0..3)
            .map(|_| {
                DelayDopplerPath::new(
                    rng.random_range(0..cfg.m_tau),
                    support.doppler_exponent(rng.random_range(0..cfg.g_nu)),
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            })
            .collect()
    };
    let random_frame = |rng: &mut ChaCha8Rng| -> DdFrame {
        use rand::Rng;
        let indices = DMatrix::from_fn(cfg.m, cfg.k1, |_, _| rng.random_range(0..constellation.len()));
        let data = otfs_core::detection::map_indices(&indices, &constellation, cfg.sigma_d2.sqrt());
        let pilot = random_pilot_matrix(cfg.m, cfg.k2, cfg.sigma_p2, rng);
        DdFrame::new(data, pilot, cfg.sigma_d2, cfg.sigma_p2).unwrap()
    };

    // noise-free chain equals the DD-domain matrix model, and decoupling is
    // exact
    {
        let mut worst_chain = 0.0f64;
        let mut worst_decouple = 0.0f64;
        for _ in 0..5 {
            let paths = random_paths(&mut rng);
            let frame = random_frame(&mut rng);
            let x_dd = superimpose(&frame, &pc).unwrap();
            let s = otfs_modulate(&x_dd, &grid).unwrap();
            let r = apply_td_channel(&s, &paths, &grid, 0.0, &mut rng).unwrap();
            let y = otfs_demodulate(&r, &grid).unwrap();
            let h_dd = effective_dd_channel(&grid, &paths).unwrap();
            worst_chain = worst_chain.max((&y - &h_dd * &x_dd).norm());
            let data = decouple(&y, pc.data()).unwrap();
            let pilot = decouple(&y, pc.pilot()).unwrap();
            worst_decouple = worst_decouple
                .max((&data - &h_dd * &frame.data).norm())
                .max((&pilot - &h_dd * &frame.pilot).norm());
        }
        checks.push(Check {
            name: "modem_matrix_model",
            worst: worst_chain,
            tolerance: 1e-10,
        });
        checks.push(Check {
            name: "decoupling_exactness",
            worst: worst_decouple,
            tolerance: 1e-9,
        });
    }

    // dictionary and reconstruction oracles
    {
        use rand::Rng;
        let zeta = zeta_matrix(&grid, &support).unwrap();
        let mut worst_dict = 0.0f64;
        let mut worst_zeta = 0.0f64;
        for _ in 0..5 {
            let frame = random_frame(&mut rng);
            let omega = pilot_dictionary(&frame.pilot, &grid, &support).unwrap();
            let h = DVector::from_fn(support.grid_size(), |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let paths: Vec<DelayDopplerPath> = (0..h.len())
                .map(|idx| {
                    let (i, j) = support.cell_coords(idx);
                    DelayDopplerPath::new(i, support.doppler_exponent(j), h[idx])
                })
                .collect();
            let h_dd = effective_dd_channel(&grid, &paths).unwrap();
            worst_dict = worst_dict.max((&omega * &h - vec_of(&(&h_dd * &frame.pilot))).norm());
            let rebuilt = unvec(&(&zeta * &h), cfg.m, cfg.m).unwrap();
            worst_zeta = worst_zeta.max((rebuilt - h_dd).norm());
        }
        checks.push(Check {
            name: "pilot_dictionary_oracle",
            worst: worst_dict,
            tolerance: 1e-10,
        });
        checks.push(Check {
            name: "zeta_reconstruction",
            worst: worst_zeta,
            tolerance: 1e-12,
        });
    }

    // one EM iteration from a unit prior is the identity-prior LMMSE estimate
    {
        let frame = random_frame(&mut rng);
        let paths = random_paths(&mut rng);
        let sigma2 = 0.01f64;
        let x_dd = superimpose(&frame, &pc).unwrap();
        let s = otfs_modulate(&x_dd, &grid).unwrap();
        let r = apply_td_channel(&s, &paths, &grid, sigma2.sqrt(), &mut rng).unwrap();
        let y = otfs_demodulate(&r, &grid).unwrap();
        let y_p = decouple(&y, pc.pilot()).unwrap();
        let omega = pilot_dictionary(&frame.pilot, &grid, &support).unwrap();
        let noise = dd_noise_diag(&grid, cfg.k2, sigma2);
        let y_vec = DMatrix::from_column_slice(y_p.len(), 1, vec_of(&y_p).as_slice());
        let one_shot = EmSettings {
            max_iters: 1,
            ..cfg.em
        };
        let posterior = pa_bl_mimo(&y_vec, &omega, &noise, &one_shot, 1).unwrap();
        let prior = DVector::from_element(support.grid_size(), 1.0);
        let lmmse = lmmse_channel_estimate(&y_vec, &omega, &noise, &prior).unwrap();
        checks.push(Check {
            name: "em_first_step_identity",
            worst: (&posterior.mean - lmmse).norm(),
            tolerance: 1e-10,
        });
    }

    let mut all_passed = true;
    for check in &checks {
        let status = if check.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {name}: worst {worst:.3e} (tolerance {tol:.1e})",
            name = check.name,
            worst = check.worst,
            tol = check.tolerance
        );
        all_passed &= check.passed();
    }
    Ok(all_passed)
}
