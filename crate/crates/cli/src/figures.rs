//! Data bundles for the standard figure set.
//!
//! Figure-specific parameters are fixed; `t_end`, `dt`, `seed`, `n_traj`,
//! `record_every`, `deltas` and `n_values` may be overridden from the
//! configuration.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use bloch_core::analysis::steady_state;
use bloch_core::fieldsim::step_count;
use bloch_core::{run_ensemble, EnsembleConfig, SystemParams};

use crate::commands::{model_table, trace_plot, Report};
use crate::config::{ModelKind, RawConfig, RunConfig};
use crate::error::CliError;
use crate::output::{num, TraceTable};
use crate::plot::{Plot, Series};

pub const FIG1A_DELTAS: [f64; 3] = [1.0, 5.0, 25.0];
pub const FIG2_N: [u64; 4] = [1, 10, 100, 1000];
pub const FIG3_N: [u64; 4] = [10, 100, 1000, 10_000];
pub const FIG3_HEADER: &str = "n_traj,t,n_mean,n_std,n_stderr,n_infinity,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
        }
    }

    /// `(delta, omega0)` of the "a" and "b" panels of figures 2 and 3.
    fn panel_params(self) -> (f64, f64) {
        match self {
            Figure::Fig2a | Figure::Fig3a => (10.0, 2.0),
            _ => (1.0, 6.0),
        }
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fig1a" => Figure::Fig1a,
            "fig1b" => Figure::Fig1b,
            "fig2a" => Figure::Fig2a,
            "fig2b" => Figure::Fig2b,
            "fig3a" => Figure::Fig3a,
            "fig3b" => Figure::Fig3b,
            other => return Err(format!("unknown figure `{other}` (fig1a|fig1b|fig2a|fig2b|fig3a|fig3b)")),
        })
    }
}

fn with_defaults(raw: &RawConfig, cfg: &RunConfig, t_end: f64, n_traj: u64) -> RunConfig {
    let mut c = cfg.clone();
    if !raw.contains("t_end") {
        c.t_end = t_end;
    }
    if !raw.contains("n_traj") {
        c.n_traj = n_traj;
    }
    c.n0 = -1.0;
    c.q0 = 0.0;
    c
}

fn params(cfg: &RunConfig, delta: f64, omega0: f64) -> Result<SystemParams, CliError> {
    Ok(SystemParams::new(cfg.params.a, cfg.params.gamma_dc, delta, omega0)?)
}

pub fn figure(fig: Figure, raw: &RawConfig, cfg: &RunConfig, out: &Path, plot: bool) -> Result<Report, CliError> {
    let name = fig.name();
    let mut report = Report::default();
    match fig {
        Figure::Fig1a | Figure::Fig1b => {
            let c = with_defaults(raw, cfg, 6.0, 10_000);
            let runs: Vec<(f64, f64, Vec<ModelKind>)> = if fig == Figure::Fig1a {
                c.deltas
                    .clone()
                    .unwrap_or(FIG1A_DELTAS.to_vec())
                    .into_iter()
                    .map(|d| (d, 4.0, vec![ModelKind::Sde, ModelKind::EffectiveBloch]))
                    .collect()
            } else {
                vec![(
                    5.0,
                    11f64.sqrt(),
                    vec![ModelKind::Sde, ModelKind::EffectiveBloch, ModelKind::Ere, ModelKind::ModifiedEre],
                )]
            };
            let mut tables = Vec::new();
            for (delta, omega0, models) in runs {
                let p = params(&c, delta, omega0)?;
                for m in models {
                    let curve = match (fig, m) {
                        (Figure::Fig1a, ModelKind::Sde) => format!("sde_delta{delta}"),
                        (Figure::Fig1a, _) => format!("bloch_delta{delta}"),
                        (_, ModelKind::EffectiveBloch) => "bloch".into(),
                        (_, m) => m.name().into(),
                    };
                    let table = model_table(m, &c, &p, c.n_traj)?;
                    report.write(out.join(format!("{name}_{curve}.csv")), &table.to_csv())?;
                    tables.push((curve, table));
                }
            }
            if plot {
                let refs: Vec<(String, &TraceTable)> = tables.iter().map(|(l, t)| (l.clone(), t)).collect();
                report.write(out.join(format!("{name}.svg")), &trace_plot(name, &refs).to_svg())?;
            }
            let _ = writeln!(report.text, "{name}: {} curves", tables.len());
        }
        Figure::Fig2a | Figure::Fig2b => {
            let c = with_defaults(raw, cfg, 10.0, 1);
            let (delta, omega0) = fig.panel_params();
            let p = params(&c, delta, omega0)?;
            let mut tables = Vec::new();
            for n in c.n_values.clone().unwrap_or(FIG2_N.to_vec()) {
                let table = model_table(ModelKind::Sde, &c, &p, n)?;
                report.write(out.join(format!("{name}_n{n}.csv")), &table.to_csv())?;
                tables.push((format!("N = {n}"), table));
            }
            let bloch = model_table(ModelKind::EffectiveBloch, &c, &p, 1)?;
            report.write(out.join(format!("{name}_bloch.csv")), &bloch.to_csv())?;
            tables.push(("bloch".into(), bloch));
            if plot {
                let refs: Vec<(String, &TraceTable)> = tables.iter().map(|(l, t)| (l.clone(), t)).collect();
                report.write(out.join(format!("{name}.svg")), &trace_plot(name, &refs).to_svg())?;
            }
            let _ = writeln!(report.text, "{name}: {} curves", tables.len());
        }
        Figure::Fig3a | Figure::Fig3b => {
            let c = with_defaults(raw, cfg, 10.0, 1);
            let (delta, omega0) = fig.panel_params();
            let p = params(&c, delta, omega0)?;
            let n_inf = steady_state(&p);
            let steps = step_count(c.t_end, c.dt)?;
            let mut csv = String::from(FIG3_HEADER);
            csv.push('\n');
            let mut rows = Vec::new();
            for n in c.n_values.clone().unwrap_or(FIG3_N.to_vec()) {
                let ens = EnsembleConfig::new(n, c.t_end, c.dt, c.seed).record_every(steps);
                let tr = run_ensemble(&p, &ens)?;
                let k = tr.t.len() - 1;
                let std = tr.n_var[k].sqrt();
                let _ = writeln!(
                    csv,
                    "{n},{},{},{},{},{},{}",
                    num(tr.t[k]),
                    num(tr.n_mean[k]),
                    num(std),
                    num(tr.n_stderr[k]),
                    num(n_inf),
                    c.seed
                );
                rows.push((n as f64, tr.n_mean[k], std, tr.n_stderr[k]));
            }
            report.write(out.join(format!("{name}_steady.csv")), &csv)?;
            if plot {
                let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let s = |label: &str, y: Vec<f64>| Series {
                    label: label.into(),
                    x: x.clone(),
                    y,
                };
                let svg = Plot {
                    title: format!("{name}: steady state vs N"),
                    x_label: "N".into(),
                    y_label: "inversion".into(),
                    log_x: true,
                    series: vec![
                        s("mean", rows.iter().map(|r| r.1).collect()),
                        s("mean + std", rows.iter().map(|r| r.1 + r.2).collect()),
                        s("mean - std", rows.iter().map(|r| r.1 - r.2).collect()),
                        s("n_infinity", vec![n_inf; rows.len()]),
                    ],
                }
                .to_svg();
                report.write(out.join(format!("{name}.svg")), &svg)?;
            }
            let _ = writeln!(report.text, "{name}: {} ensemble sizes", rows.len());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in [Figure::Fig1a, Figure::Fig1b, Figure::Fig2a, Figure::Fig2b, Figure::Fig3a, Figure::Fig3b] {
            assert_eq!(f.name().parse::<Figure>().unwrap(), f);
        }
        assert!("fig1c".parse::<Figure>().is_err());
    }

    #[test]
    fn figure_defaults_yield_to_explicit_keys() {
        let raw = RawConfig::parse("t_end = 2\nn0 = 0.3\n", "test").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        let c = with_defaults(&raw, &cfg, 6.0, 10_000);
        assert_eq!(c.t_end, 2.0);
        assert_eq!(c.n_traj, 10_000);
        assert_eq!(c.n0, -1.0);
    }

    #[test]
    fn panels() {
        assert_eq!(Figure::Fig2a.panel_params(), (10.0, 2.0));
        assert_eq!(Figure::Fig3b.panel_params(), (1.0, 6.0));
    }
}
