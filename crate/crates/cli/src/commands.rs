use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bloch_core::analysis::{analyze, zeta_numeric, AnalysisReport};
use bloch_core::fieldsim::{decorrelation_residual, AtomState, DecorrelationConfig, DecorrelationReport};
use bloch_core::kinetics::{
    integrate_effective_bloch, integrate_ere, integrate_generalized_ere, integrate_memory_kernel,
    integrate_modified_ere, KineticTrace,
};
use bloch_core::{run_ensemble, EnsembleConfig, SpectrumModel, SystemParams};

use crate::config::{ModelKind, RunConfig};
use crate::error::CliError;
use crate::output::{num, write_atomic, TraceTable};
use crate::plot::{Plot, Series};

/// Files written and text for standard output.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub text: String,
}

impl Report {
    pub(crate) fn write(&mut self, path: PathBuf, contents: &str) -> Result<(), CliError> {
        self.files.push(write_atomic(&path, contents)?);
        Ok(())
    }
}

pub(crate) fn spectrum_for(cfg: &RunConfig) -> Result<SpectrumModel, CliError> {
    match &cfg.spectrum_file {
        Some(path) => Ok(SpectrumModel::read_table(path)?),
        None => {
            let p = &cfg.params;
            if p.delta <= 0.0 {
                return Err(CliError::config(
                    "memory-kernel",
                    "a phase-diffusion spectrum needs delta > 0; set delta or spectrum_file",
                ));
            }
            Ok(SpectrumModel::phase_diffusion(p.omega0, p.delta, 1.0, cfg.omega21)?)
        }
    }
}

/// Solve one deterministic model on the configuration's grid.
pub fn solve_kinetic(model: ModelKind, cfg: &RunConfig, params: &SystemParams) -> Result<KineticTrace, CliError> {
    let (t, dt, n0) = (cfg.t_end, cfg.dt, cfg.n0);
    Ok(match model {
        ModelKind::Ere => integrate_ere(params, t, dt, n0)?,
        ModelKind::ModifiedEre => integrate_modified_ere(params, t, dt, n0)?,
        ModelKind::EffectiveBloch => integrate_effective_bloch(params, t, dt, n0, cfg.q0)?,
        ModelKind::GeneralizedEre => integrate_generalized_ere(params, &cfg.collisions, t, dt, n0)?,
        ModelKind::MemoryKernel => {
            let s = spectrum_for(cfg)?;
            integrate_memory_kernel(&s, cfg.omega21, params.into(), t, dt, n0)?
        }
        ModelKind::Sde => unreachable!("stochastic model has no deterministic trace"),
    })
}

/// Trace table for any model, stochastic or not.
pub fn model_table(model: ModelKind, cfg: &RunConfig, params: &SystemParams, n_traj: u64) -> Result<TraceTable, CliError> {
    if model == ModelKind::Sde {
        let initial = AtomState {
            n: cfg.n0,
            ..AtomState::ground()
        };
        let ens = EnsembleConfig::new(n_traj, cfg.t_end, cfg.dt, cfg.seed)
            .record_every(cfg.record_every)
            .initial(initial);
        let trace = run_ensemble(params, &ens)?;
        Ok(TraceTable::from_ensemble(&trace, params, cfg.seed))
    } else {
        let trace = solve_kinetic(model, cfg, params)?;
        Ok(TraceTable::from_kinetic(&trace, cfg.record_every, cfg.seed))
    }
}

pub(crate) fn trace_plot(title: &str, tables: &[(String, &TraceTable)]) -> Plot {
    Plot {
        title: title.into(),
        x_label: "t".into(),
        y_label: "mean inversion".into(),
        log_x: false,
        series: tables
            .iter()
            .map(|(label, t)| Series {
                label: label.clone(),
                x: t.t.clone(),
                y: t.n_mean.clone(),
            })
            .collect(),
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path, plot: bool) -> Result<Report, CliError> {
    let table = model_table(cfg.model, cfg, &cfg.params, cfg.n_traj)?;
    let name = cfg.model.name();
    let mut report = Report::default();
    report.write(out.join(format!("{name}.csv")), &table.to_csv())?;
    if plot {
        let svg = trace_plot(name, &[(name.to_string(), &table)]).to_svg();
        report.write(out.join(format!("{name}.svg")), &svg)?;
    }
    let last = table.t.len() - 1;
    let _ = writeln!(
        report.text,
        "{name}: {} rows, n_mean(t = {}) = {}",
        table.t.len(),
        table.t[last],
        table.n_mean[last]
    );
    Ok(report)
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn analyze_cmd(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let rep = analyze(&cfg.params);
    let mut report = Report::default();
    report.text.push_str(&rep.to_key_value());
    let t = &rep.thresholds;
    let _ = writeln!(report.text, "regime rate-equations-valid: {}", flag(t.rate_eq_valid));
    let _ = writeln!(report.text, "regime einstein-rate-equations: {}", flag(t.ere_regime));
    let _ = writeln!(report.text, "regime no-relaxation-oscillations: {}", flag(!t.oscillation));
    if cfg.spectrum_file.is_some() {
        let s = spectrum_for(cfg)?;
        let z = zeta_numeric(&s, rep.gamma_perp, cfg.omega21)?;
        let bw21 = s.bw21(1.0, cfg.omega21)?;
        let _ = writeln!(report.text, "spectrum_zeta = {}", num(z));
        let _ = writeln!(report.text, "spectrum_bw21 = {}", num(bw21));
        let _ = writeln!(report.text, "spectrum_zeta_bw21 = {}", num(z * bw21));
    }
    let csv = format!("{}\n{}\n", AnalysisReport::csv_header(), rep.csv_row());
    report.write(out.join("analysis.csv"), &csv)?;
    Ok(report)
}

pub const DECORRELATION_HEADER: &str = "t_prime,k,k_stderr,c,c_stderr,n_mean,residual,residual_stderr";

pub fn decorrelation_csv(rep: &DecorrelationReport) -> String {
    let mut s = String::from(DECORRELATION_HEADER);
    s.push('\n');
    for p in &rep.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(p.t_prime),
            num(p.k),
            num(p.k_stderr),
            num(p.c),
            num(p.c_stderr),
            num(p.n_mean),
            num(p.residual),
            num(p.residual_stderr)
        );
    }
    s
}

pub fn decorrelate(cfg: &RunConfig, out: &Path, plot: bool) -> Result<Report, CliError> {
    let m = cfg.decorrelation_points - 1;
    let dcfg = DecorrelationConfig {
        n_traj: cfg.n_traj,
        t_obs: cfg.t_obs,
        t_prime: (0..=m).map(|i| cfg.t_obs * i as f64 / m as f64).collect(),
        dt: cfg.dt,
        seed: cfg.seed,
    };
    let rep = decorrelation_residual(&cfg.params, &dcfg)?;
    let mut report = Report::default();
    report.write(out.join("decorrelation.csv"), &decorrelation_csv(&rep))?;
    if plot {
        let t: Vec<f64> = rep.points.iter().map(|p| p.t_prime).collect();
        let series = |label: &str, f: &dyn Fn(&bloch_core::fieldsim::DecorrelationPoint) -> f64| Series {
            label: label.into(),
            x: t.clone(),
            y: rep.points.iter().map(f).collect(),
        };
        let svg = Plot {
            title: format!("decorrelation residual, t = {}", rep.t_obs),
            x_label: "t'".into(),
            y_label: "kernel".into(),
            log_x: false,
            series: vec![
                series("R", &|p| p.residual),
                series("+3 se(K)", &|p| 3.0 * p.k_stderr),
                series("-3 se(K)", &|p| -3.0 * p.k_stderr),
            ],
        }
        .to_svg();
        report.write(out.join("decorrelation.svg"), &svg)?;
    }
    let _ = writeln!(report.text, "t_obs = {}", num(rep.t_obs));
    let _ = writeln!(report.text, "n_traj = {}", rep.n_traj);
    let _ = writeln!(report.text, "max |R| / se(K) = {:.3}", rep.max_sigma_vs_k());
    let _ = writeln!(report.text, "max |R| / se(R) = {:.3}", rep.max_sigma_vs_residual());
    if rep.low_statistics {
        let _ = writeln!(report.text, "warning: low statistics, se(K) exceeds 1% of omega0^2");
    }
    let verdict = if rep.holds(3.0) { "HOLDS" } else { "VIOLATED" };
    let _ = writeln!(report.text, "DECORRELATION {verdict} at 3\u{3c3}");
    Ok(report)
}
