use bloch_core::fieldsim::{
    decorrelation_residual, phase_autocorrelation, DecorrelationConfig, PhaseDiffusionPaths,
};
use bloch_core::kinetics::integrate_effective_bloch;
use bloch_core::spectrum::{half_max_width, wk_estimate, WkConfig, WkEstimate};
use bloch_core::{run_ensemble, EnsembleConfig, SystemParams};

#[test]
fn ensemble_mean_follows_effective_bloch() {
    let p = SystemParams::resonant(5.0, 11f64.sqrt()).unwrap();
    let dt = 2e-3;
    let tr = run_ensemble(&p, &EnsembleConfig::new(2000, 3.0, dt, 11).record_every(10)).unwrap();
    let eb = integrate_effective_bloch(&p, 3.0, dt, -1.0, 0.0).unwrap();
    for (i, &t) in tr.t.iter().enumerate() {
        let k = (t / dt).round() as usize;
        let diff = (tr.n_mean[i] - eb.n[k]).abs();
        assert!(diff <= (4.0 * tr.n_stderr[i]).max(0.01), "t = {t}: diff {diff}");
    }
}

#[test]
fn phase_autocorrelation_decays_at_half_delta() {
    let delta = 2.0;
    let tau: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
    let ac = phase_autocorrelation(delta, 20_000, &tau, 5).unwrap();
    for (i, &t) in tau.iter().enumerate() {
        let want = (-0.5 * delta * t).exp();
        assert!((ac.mean[i].re - want).abs() <= 4.0 * ac.re_stderr[i] + 1e-12, "tau {t}");
        assert!(ac.mean[i].im.abs() <= 4.0 * ac.im_stderr[i] + 1e-12, "tau {t}");
    }
}

fn estimate(delta: f64, n_paths: usize, seed: u64) -> WkEstimate {
    let paths = PhaseDiffusionPaths {
        delta,
        dt: 0.01,
        n_samples: 4096,
        n_paths,
        seed,
    };
    let cfg = WkConfig {
        omega0: 2.0,
        b: 1.0,
        omega21: 0.0,
        omega: (-200..=200).map(|i| i as f64 * 0.05).collect(),
        window: 20.0 / delta * 2.0,
        delta_hint: Some(delta),
        batches: 50,
    };
    wk_estimate(&paths, &cfg).unwrap()
}

#[test]
fn wk_recovers_the_lorentzian() {
    let delta = 2.0;
    let est = estimate(delta, 2000, 3);
    assert!(est.truncation_warning.is_none());
    let fwhm = half_max_width(&est.omega, &est.density).unwrap();
    assert!((fwhm / delta - 1.0).abs() < 0.05, "fwhm {fwhm}");
    let peak = est.density[200];
    assert!((peak / (4.0 / delta) - 1.0).abs() < 0.05, "peak {peak}");
    for (w, se) in est.density.iter().zip(&est.stderr) {
        assert!(*w >= -3.0 * se);
    }
}

#[test]
fn wk_error_scales_as_inverse_sqrt_n() {
    let small = estimate(2.0, 400, 8);
    let large = estimate(2.0, 1600, 9);
    let ratio = small.stderr[200] / large.stderr[200];
    assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "ratio {ratio}");
}

#[test]
fn decorrelation_holds_in_the_incoherent_regime() {
    let p = SystemParams::resonant(10.0, 2.0).unwrap();
    let cfg = DecorrelationConfig {
        n_traj: 5000,
        t_obs: 2.0,
        t_prime: (0..=10).map(|i| i as f64 * 0.2).collect(),
        dt: 1e-3,
        seed: 21,
    };
    let rep = decorrelation_residual(&p, &cfg).unwrap();
    assert!(rep.holds(4.0), "max sigma {}", rep.max_sigma_vs_k());
    let last = rep.points.last().unwrap();
    assert_eq!(last.residual, 0.0);
}
