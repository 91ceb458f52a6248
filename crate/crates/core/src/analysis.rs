//! Closed-form and quadrature evaluation of the derived quantities: the
//! spectral overlap `zeta`, steady state, relaxation eigenvalues and the
//! regime thresholds.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{zeta_closed_form, SystemParams};
use crate::quadrature::{integrate, QuadratureError};
use crate::spectrum::{linear_fourier_integral, SpectrumError, SpectrumModel};

/// Ratio used to read "much greater than" in the validity conditions.
pub const DOMINANCE_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("spectral density vanishes at omega21, zeta is not normalizable")]
    ZeroNormalization,
    #[error("gamma_perp = {0} must be > 0")]
    GammaPerp(f64),
    #[error("tau = {0} must be >= 0")]
    NegativeLag(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

type Result<T> = std::result::Result<T, AnalysisError>;

/// Normalized atomic line shape `1 / (pi (1 + x^2))`.
pub fn atomic_lineshape(x: f64) -> f64 {
    1.0 / (PI * (1.0 + x * x))
}

/// `Delta / (Delta + 2 gamma_perp)`.
pub fn zeta_lorentzian(delta: f64, gamma_perp: f64) -> f64 {
    zeta_closed_form(delta, gamma_perp)
}

/// Overlap of the light spectrum with the atomic line, normalized to `W(omega21)`.
///
/// Uses `omega = omega21 + gamma_perp tan(theta)`, which maps the real
/// line onto `(-pi/2, pi/2)` and turns the atomic Lorentzian into a
/// constant weight.
pub fn zeta_numeric(spectrum: &SpectrumModel, gamma_perp: f64, omega21: f64) -> Result<f64> {
    if !(gamma_perp > 0.0 && gamma_perp.is_finite()) {
        return Err(AnalysisError::GammaPerp(gamma_perp));
    }
    spectrum.validate()?;
    let w21 = spectrum.value_at(omega21);
    if !(w21 > 0.0) {
        return Err(AnalysisError::ZeroNormalization);
    }
    let to_theta = |w: f64| ((w - omega21) / gamma_perp).atan();
    let breakpoints: Vec<f64> = match spectrum {
        SpectrumModel::Lorentzian { fwhm, center, .. } => {
            let hw = 0.5 * fwhm;
            [0.0, 1.0, -1.0, 10.0, -10.0]
                .iter()
                .map(|k| to_theta(center + k * hw))
                .collect()
        }
        SpectrumModel::Tabulated { omega, .. } => omega.iter().map(|&w| to_theta(w)).collect(),
    };
    let f = |theta: f64| spectrum.value_at(omega21 + gamma_perp * theta.tan()) / w21;
    let half = 0.5 * PI;
    let (v, _) = integrate(f, -half, half, &breakpoints, 1e-8, 1e-14)?;
    Ok(v / PI)
}

/// Limit of `zeta` for a spectrum much narrower than the atomic line,
/// centred at `omega0` and carrying energy density `u`.
pub fn zeta_peaked(u: f64, w21: f64, gamma_perp: f64, omega0: f64, omega21: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    u / (gamma_perp * w21) * atomic_lineshape((omega0 - omega21) / gamma_perp)
}

/// `-A / (A + 2 zeta BW21)`.
pub fn steady_state(params: &SystemParams) -> f64 {
    let d = params.derive();
    -params.a / (params.a + 2.0 * d.zeta_bw21)
}

/// Eigenvalues of the linearized effective Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalues {
    pub plus: Complex64,
    pub minus: Complex64,
    /// `R = (gamma_eff - A)^2 - 4 Omega0^2`; negative for damped oscillations.
    pub discriminant: f64,
}

impl Eigenvalues {
    /// Angular frequency `sqrt(-R) / 2` of the relaxation oscillations.
    pub fn oscillation_frequency(&self) -> Option<f64> {
        (self.discriminant < 0.0).then(|| 0.5 * (-self.discriminant).sqrt())
    }
}

pub fn eigenvalues(params: &SystemParams) -> Eigenvalues {
    let g = params.gamma_eff();
    let a = params.a;
    let r = (g - a).powi(2) - 4.0 * params.omega0 * params.omega0;
    let root = Complex64::new(r, 0.0).sqrt();
    let base = Complex64::new(-(g + a), 0.0);
    Eigenvalues {
        plus: (base + root) * 0.5,
        minus: (base - root) * 0.5,
        discriminant: r,
    }
}

/// Regime flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Damped relaxation oscillations (`R < 0`).
    pub oscillation: bool,
    /// `BW21` below the oscillation bound and `Delta + 2 Gamma_dc >= 10 A`.
    pub rate_eq_valid: bool,
    /// Additionally `Delta >= 10 max(A, 2 Gamma_dc)`.
    pub ere_regime: bool,
    /// `Delta = 0`: no `BW21`, the bound is undefined.
    pub coherent_limit: bool,
    /// `(Delta + 2 Gamma_dc - A)^2 / (16 Delta)`.
    pub oscillation_bound: Option<f64>,
    /// Oscillating with frequency at least half the damping rate.
    pub oscillations_observable: bool,
}

pub fn thresholds(params: &SystemParams) -> Thresholds {
    let ev = eigenvalues(params);
    let oscillation = ev.discriminant < 0.0;
    let oscillations_observable = ev
        .oscillation_frequency()
        .is_some_and(|w| 0.5 * (params.gamma_eff() + params.a) <= 2.0 * w);
    let d = params.derive();
    let spread = params.delta + 2.0 * params.gamma_dc;
    let bound = (params.delta > 0.0).then(|| (spread - params.a).powi(2) / (16.0 * params.delta));
    let (rate_eq_valid, ere_regime) = match (d.bw21, bound) {
        (Some(bw), Some(b)) => {
            let rate = bw < b && spread >= DOMINANCE_RATIO * params.a;
            let ere = rate && params.delta >= DOMINANCE_RATIO * params.a.max(2.0 * params.gamma_dc);
            (rate, ere)
        }
        _ => (false, false),
    };
    Thresholds {
        oscillation,
        rate_eq_valid,
        ere_regime,
        coherent_limit: params.delta == 0.0,
        oscillation_bound: bound,
        oscillations_observable,
    }
}

/// Frequency-shifted field autocorrelation
/// `I(tau) = (1/pi) Re int W(omega) e^{i (omega - omega21) tau} domega`.
///
/// Exact for Lorentzians; tabulated spectra are transformed exactly as
/// their piecewise-linear interpolant.
pub fn kernel_i(spectrum: &SpectrumModel, omega21: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(AnalysisError::NegativeLag(tau));
    }
    spectrum.validate()?;
    Ok(match spectrum {
        SpectrumModel::Lorentzian { peak, fwhm, center } => {
            let hw = 0.5 * fwhm;
            peak * hw * (-hw * tau).exp() * ((center - omega21) * tau).cos()
        }
        SpectrumModel::Tabulated { omega, density } => {
            let x: Vec<f64> = omega.iter().map(|w| w - omega21).collect();
            let f: Vec<Complex64> = density.iter().map(|&w| Complex64::new(w, 0.0)).collect();
            linear_fourier_integral(&x, &f, tau).re / PI
        }
    })
}

/// Least-squares exponent and prefactor of `y = c t^p` on the points with
/// `t > 0` and `y > 0` (straight-line fit in log-log coordinates).
pub fn fit_power_law(t: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, y)| **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, (my - slope * mx).exp()))
}

/// Coefficient `a` of the least-squares fit `y = a t^p + b t^(p+1)`.
pub fn fit_leading_coefficient(t: &[f64], y: &[f64], p: i32) -> Option<f64> {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in t.iter().zip(y) {
        let (u, v) = (t.powi(p), t.powi(p + 1));
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        r1 += u * y;
        r2 += v * y;
    }
    let det = s11 * s22 - s12 * s12;
    (det != 0.0).then(|| (r1 * s22 - r2 * s12) / det)
}

/// Everything `analyze` reports for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisReport {
    pub params: SystemParams,
    pub gamma_perp: f64,
    pub gamma_eff: f64,
    pub zeta: f64,
    pub bw21: Option<f64>,
    pub zeta_bw21: f64,
    pub n_infinity: f64,
    pub eigenvalues: Eigenvalues,
    pub oscillation_frequency: Option<f64>,
    pub thresholds: Thresholds,
}

pub fn analyze(params: &SystemParams) -> AnalysisReport {
    let d = params.derive();
    let ev = eigenvalues(params);
    AnalysisReport {
        params: *params,
        gamma_perp: d.gamma_perp,
        gamma_eff: d.gamma_eff,
        zeta: d.zeta,
        bw21: d.bw21,
        zeta_bw21: d.zeta_bw21,
        n_infinity: steady_state(params),
        eigenvalues: ev,
        oscillation_frequency: ev.oscillation_frequency(),
        thresholds: thresholds(params),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "nan".into())
}

impl AnalysisReport {
    fn fields(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let t = &self.thresholds;
        let ev = &self.eigenvalues;
        vec![
            ("a", num(p.a)),
            ("gamma_dc", num(p.gamma_dc)),
            ("delta", num(p.delta)),
            ("omega0", num(p.omega0)),
            ("gamma_perp", num(self.gamma_perp)),
            ("gamma_eff", num(self.gamma_eff)),
            ("zeta", num(self.zeta)),
            ("bw21", opt(self.bw21)),
            ("zeta_bw21", num(self.zeta_bw21)),
            ("n_infinity", num(self.n_infinity)),
            ("lambda_plus_re", num(ev.plus.re)),
            ("lambda_plus_im", num(ev.plus.im)),
            ("lambda_minus_re", num(ev.minus.re)),
            ("lambda_minus_im", num(ev.minus.im)),
            ("discriminant", num(ev.discriminant)),
            ("oscillation", t.oscillation.to_string()),
            ("oscillation_frequency", opt(self.oscillation_frequency)),
            ("oscillation_bound", opt(t.oscillation_bound)),
            ("oscillations_observable", t.oscillations_observable.to_string()),
            ("rate_eq_valid", t.rate_eq_valid.to_string()),
            ("ere_regime", t.ere_regime.to_string()),
            ("coherent_limit", t.coherent_limit.to_string()),
        ]
    }

    /// One `key = value` line per field.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn csv_header() -> String {
        Self::fields(&analyze(&SystemParams::default()))
            .iter()
            .map(|(k, _)| *k)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields().into_iter().map(|(_, v)| v).collect::<Vec<_>>().join(",")
    }
}
