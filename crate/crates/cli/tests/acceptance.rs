//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bloch_cli::output::parse_trace_csv;
use bloch_core::analysis::{fit_power_law, steady_state, thresholds, zeta_lorentzian, zeta_numeric};
use bloch_core::fieldsim::{
    decorrelation_residual, phase_autocorrelation, DecorrelationConfig, PhaseDiffusionPaths,
};
use bloch_core::kinetics::{
    integrate_effective_bloch, integrate_ere, integrate_memory_kernel, integrate_modified_ere,
};
use bloch_core::spectrum::{half_max_width, wk_estimate, WkConfig};
use bloch_core::{SpectrumModel, SystemParams};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn blochsim(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_blochsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BLOCHSIM_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!(
            "blochsim {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&status.stderr).trim()
        ))
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sde_matches_bloch() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    blochsim(&["figure", "fig1b", "--set", "dt=0.001", "--set", "n_traj=10000", "--set", "t_end=6"], dir.path())?;
    let sde = parse_trace_csv(&read(&dir.path().join("fig1b_sde.csv"))?)?;
    let eb = parse_trace_csv(&read(&dir.path().join("fig1b_bloch.csv"))?)?;
    if sde.t.len() != eb.t.len() {
        return Err(format!("grid mismatch {} vs {}", sde.t.len(), eb.t.len()));
    }
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in 0..sde.t.len() {
        if (sde.t[k] - eb.t[k]).abs() > 1e-9 {
            return Err(format!("time mismatch at row {k}"));
        }
        let diff = (sde.n_mean[k] - eb.n_mean[k]).abs();
        let tol = (3.0 * sde.n_stderr[k]).max(0.01);
        ok &= diff <= tol;
        worst = worst.max(diff / tol);
    }
    check(ok, format!("max |diff| / tolerance = {worst:.3} over {} points", sde.t.len()))
}

fn steady_state_grid() -> Outcome {
    let mut worst: f64 = 0.0;
    for delta in [10.0, 20.0, 50.0, 100.0, 200.0] {
        for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let bound = (delta - 1.0_f64).powi(2) / (16.0 * delta);
            let p = SystemParams::resonant(delta, (frac * bound * delta).sqrt()).unwrap();
            if !thresholds(&p).rate_eq_valid {
                return Err(format!("grid point delta {delta}, fraction {frac} outside the rate-equation regime"));
            }
            let want = steady_state(&p);
            let dt = (0.05 / delta).min(1e-3);
            let eb = integrate_effective_bloch(&p, 50.0, dt, -1.0, 0.0).map_err(|e| e.to_string())?;
            let ere = integrate_ere(&p, 50.0, dt, -1.0).map_err(|e| e.to_string())?;
            worst = worst.max((eb.last().n_bar - want).abs()).max((ere.last().n_bar - want).abs());
        }
    }
    check(worst <= 1e-6, format!("max endpoint error {worst:.2e} over 25 points"))
}

fn oscillation_classification() -> Outcome {
    let quiet = SystemParams::resonant(10.0, 2.0).unwrap();
    let ringing = SystemParams::resonant(1.0, 6.0).unwrap();
    if thresholds(&quiet).oscillation || !thresholds(&ringing).oscillation {
        return Err("regime flags do not match".into());
    }
    let dt = 1e-3;
    let tr = integrate_effective_bloch(&ringing, 6.0, dt, -1.0, 0.0).map_err(|e| e.to_string())?;
    let peaks: Vec<f64> = (1..tr.len() - 1)
        .filter(|&k| tr.n[k] > tr.n[k - 1] && tr.n[k] >= tr.n[k + 1])
        .map(|k| {
            let (y0, y1, y2) = (tr.n[k - 1], tr.n[k], tr.n[k + 1]);
            tr.t[k] + 0.5 * dt * (y0 - y2) / (y0 - 2.0 * y1 + y2)
        })
        .collect();
    if peaks.len() < 3 {
        return Err(format!("only {} maxima found", peaks.len()));
    }
    let spacing = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
    let omega = 2.0 * std::f64::consts::PI / spacing;
    check((omega / 6.0 - 1.0).abs() <= 0.02, format!("measured frequency {omega:.4}"))
}

fn zeta_consistency() -> Outcome {
    let gamma_perp = 0.5;
    let zeta_at = |ratio: f64| -> Result<(f64, f64), String> {
        let delta = ratio * gamma_perp;
        let s = SpectrumModel::phase_diffusion(1.0, delta, 1.0, 0.0).map_err(|e| e.to_string())?;
        let z = zeta_numeric(&s, gamma_perp, 0.0).map_err(|e| e.to_string())?;
        Ok((delta, z))
    };
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let ratio = 10f64.powf(-3.0 + 6.0 * i as f64 / 19.0);
        let (delta, z) = zeta_at(ratio)?;
        worst = worst.max((z - zeta_lorentzian(delta, gamma_perp)).abs());
    }
    let (_, broad) = zeta_at(1e4)?;
    let (delta, narrow) = zeta_at(1e-3)?;
    let broad_err = (broad - 1.0).abs();
    let narrow_err = (narrow / (delta / (2.0 * gamma_perp)) - 1.0).abs();
    check(
        worst <= 1e-6 && broad_err <= 1e-3 && narrow_err <= 1e-3,
        format!("max |numeric - closed form| {worst:.2e}; limit errors {broad_err:.2e}, {narrow_err:.2e}"),
    )
}

fn memory_kernel_matches_bloch() -> Outcome {
    let dt = 1e-4;
    let mut worst: f64 = 0.0;
    for (delta, omega0) in [(10.0, 2.0), (5.0, 11f64.sqrt())] {
        let p = SystemParams::resonant(delta, omega0).unwrap();
        let s = SpectrumModel::phase_diffusion(omega0, delta, 1.0, 0.0).unwrap();
        let mk = integrate_memory_kernel(&s, 0.0, (&p).into(), 10.0, dt, -1.0).map_err(|e| e.to_string())?;
        let eb = integrate_effective_bloch(&p, 10.0, dt, -1.0, 0.0).map_err(|e| e.to_string())?;
        for (a, b) in mk.n.iter().zip(&eb.n) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-5, format!("max grid difference {worst:.2e}"))
}

fn phase_statistics() -> Outcome {
    let delta = 2.0;
    let tau: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25 / delta).collect();
    let ac = phase_autocorrelation(delta, 100_000, &tau, 2024).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (i, &t) in tau.iter().enumerate() {
        let want = (-0.5 * delta * t).exp();
        let re = (ac.mean[i].re - want).abs() / (ac.re_stderr[i] + 1e-15);
        let im = ac.mean[i].im.abs() / (ac.im_stderr[i] + 1e-15);
        worst = worst.max(re).max(im);
    }
    let paths = PhaseDiffusionPaths {
        delta,
        dt: 0.01,
        n_samples: 4096,
        n_paths: 2000,
        seed: 3,
    };
    let cfg = WkConfig {
        omega0: 2.0,
        b: 1.0,
        omega21: 0.0,
        omega: (-200..=200).map(|i| i as f64 * 0.05).collect(),
        window: 40.0 / delta,
        delta_hint: Some(delta),
        batches: 50,
    };
    let est = wk_estimate(&paths, &cfg).map_err(|e| e.to_string())?;
    let fwhm = half_max_width(&est.omega, &est.density).ok_or("no half-maximum crossing")?;
    let fwhm_err = (fwhm / delta - 1.0).abs();
    check(
        worst <= 3.0 && fwhm_err <= 0.05,
        format!("max autocorrelation deviation {worst:.2} se; FWHM {fwhm:.4} (delta {delta})"),
    )
}

fn decorrelation() -> Outcome {
    let p = SystemParams::resonant(10.0, 2.0).unwrap();
    let cfg = DecorrelationConfig {
        n_traj: 100_000,
        t_obs: 2.0,
        t_prime: (0..=20).map(|i| i as f64 * 0.1).collect(),
        dt: 1e-3,
        seed: 7,
    };
    let rep = decorrelation_residual(&p, &cfg).map_err(|e| e.to_string())?;
    check(rep.holds(3.0), format!("max |R| / se(K) = {:.3}", rep.max_sigma_vs_k()))
}

fn short_time_laws() -> Outcome {
    let p = SystemParams::default();
    let dt: f64 = 1e-5;
    let t_end = 1e-2;
    let slope = |n: &[f64], t: &[f64]| -> Result<f64, String> {
        let lo = (1e-3 / dt).round() as usize;
        let y: Vec<f64> = n[lo..].iter().map(|v| v + 1.0).collect();
        fit_power_law(&t[lo..], &y).map(|f| f.0).ok_or_else(|| "fit failed".to_string())
    };
    let ere = integrate_ere(&p, t_end, dt, -1.0).map_err(|e| e.to_string())?;
    let eb = integrate_effective_bloch(&p, t_end, dt, -1.0, 0.0).map_err(|e| e.to_string())?;
    let me = integrate_modified_ere(&p, t_end, dt, -1.0).map_err(|e| e.to_string())?;
    let (s_ere, s_eb, s_me) = (slope(&ere.n, &ere.t)?, slope(&eb.n, &eb.t)?, slope(&me.n, &me.t)?);
    check(
        (s_ere - 1.0).abs() <= 0.1 && (s_eb - 2.0).abs() <= 0.1 && (s_me - 2.0).abs() <= 0.1,
        format!("exponents ere {s_ere:.3}, effective-bloch {s_eb:.3}, modified-ere {s_me:.3}"),
    )
}

fn stderr_scaling() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    blochsim(&["figure", "fig3a", "--set", "n_values=100,1000,10000"], dir.path())?;
    let text = read(&dir.path().join("fig3a_steady.csv"))?;
    let (mut n, mut se) = (Vec::new(), Vec::new());
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        n.push(cols[0].parse::<f64>().map_err(|e| e.to_string())?);
        se.push(cols[4].parse::<f64>().map_err(|e| e.to_string())?);
    }
    let (slope, _) = fit_power_law(&n, &se).ok_or("fit failed")?;
    check((slope + 0.5).abs() <= 0.1, format!("log-log slope {slope:.3}"))
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["simulate", "--set", "model=sde", "--set", "n_traj=3000", "--set", "t_end=2"],
        &["simulate", "--set", "model=memory-kernel", "--set", "t_end=2"],
        &["figure", "fig3b", "--set", "n_values=10,100,1000"],
        &["decorrelate", "--set", "n_traj=2000", "--set", "t_end=1", "--set", "decorrelation_points=6"],
    ];
    let mut compared = 0;
    for args in runs {
        let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        for (dir, threads) in dirs.iter().zip(["1", "4", "4"]) {
            let mut a = args.to_vec();
            a.extend(["--seed", "99", "--threads", threads]);
            blochsim(&a, dir.path())?;
        }
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let reference = std::fs::read(dirs[0].path().join(&name)).map_err(|e| e.to_string())?;
            for other in &dirs[1..] {
                let bytes = std::fs::read(other.path().join(&name)).map_err(|e| e.to_string())?;
                if bytes != reference {
                    return Err(format!("{} differs between runs", name.to_string_lossy()));
                }
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across 1 and 4 threads and repeated runs"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("sde matches effective bloch", sde_matches_bloch),
        ("steady state grid", steady_state_grid),
        ("oscillation classification", oscillation_classification),
        ("zeta consistency", zeta_consistency),
        ("memory kernel matches effective bloch", memory_kernel_matches_bloch),
        ("phase diffusion statistics", phase_statistics),
        ("decorrelation hypothesis", decorrelation),
        ("short-time laws", short_time_laws),
        ("standard error scaling", stderr_scaling),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {}: {name} ({detail}; {secs:.1} s)", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
