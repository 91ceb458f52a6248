//! Light spectra and the Wiener-Khintchine estimator.
//!
//! Spectral densities are carried in units of `B W(omega)` (a rate), the
//! only combination the dynamics depend on. With `b = 1` every function
//! below works directly in these simulation units.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::fieldsim::PhasePaths;
use crate::stats::RunningStats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("invalid spectrum: {0}")]
    Invalid(String),
    #[error("omega21 = {omega21} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { omega21: f64, lo: f64, hi: f64 },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

type Result<T> = std::result::Result<T, SpectrumError>;

/// Spectral energy density `W(omega)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumModel {
    /// `peak (fwhm/2)^2 / ((fwhm/2)^2 + (omega - center)^2)`.
    Lorentzian { peak: f64, fwhm: f64, center: f64 },
    /// Linear interpolation between samples, zero outside the table.
    Tabulated { omega: Vec<f64>, density: Vec<f64> },
}

impl SpectrumModel {
    pub fn lorentzian(peak: f64, fwhm: f64, center: f64) -> Result<Self> {
        let s = Self::Lorentzian { peak, fwhm, center };
        s.validate()?;
        Ok(s)
    }

    /// Spectrum of a field `Omega0 e^{-i phi}` whose phase diffuses with coefficient `delta`:
    /// a Lorentzian of FWHM `delta` and peak `Omega0^2 / (delta b)` centred on `omega21`.
    pub fn phase_diffusion(omega0: f64, delta: f64, b: f64, omega21: f64) -> Result<Self> {
        if !(delta > 0.0 && b > 0.0) {
            return Err(SpectrumError::Invalid(
                "phase-diffusion spectrum needs delta > 0 and b > 0".into(),
            ));
        }
        Self::lorentzian(omega0 * omega0 / (delta * b), delta, omega21)
    }

    pub fn tabulated(omega: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let s = Self::Tabulated { omega, density };
        s.validate()?;
        Ok(s)
    }

    /// Check the invariants; needed when a variant was built directly.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Lorentzian { peak, fwhm, center } => {
                if peak >= &0.0 && peak.is_finite() && fwhm >= &0.0 && fwhm.is_finite() && center.is_finite() {
                    Ok(())
                } else {
                    Err(SpectrumError::Invalid(format!(
                        "Lorentzian needs peak >= 0 and fwhm >= 0 (got peak = {peak}, fwhm = {fwhm})"
                    )))
                }
            }
            Self::Tabulated { omega, density } => {
                if omega.len() != density.len() || omega.len() < 2 {
                    return Err(SpectrumError::Invalid(
                        "a tabulated spectrum needs at least two (omega, W) samples".into(),
                    ));
                }
                if omega.iter().any(|x| !x.is_finite()) || omega.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(SpectrumError::Invalid("omega grid must be strictly increasing".into()));
                }
                if density.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(SpectrumError::Invalid("spectral density must be finite and >= 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Parse two whitespace- or comma-separated columns `(omega, W)`; `#` starts a comment.
    pub fn parse_table(text: &str, origin: &str) -> Result<Self> {
        let mut omega = Vec::new();
        let mut density = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let err = |reason: String| SpectrumError::Parse {
                path: origin.to_string(),
                line: i + 1,
                reason,
            };
            if cols.len() != 2 {
                return Err(err(format!("expected 2 columns, found {}", cols.len())));
            }
            let x: f64 = cols[0].parse().map_err(|_| err(format!("bad number `{}`", cols[0])))?;
            let w: f64 = cols[1].parse().map_err(|_| err(format!("bad number `{}`", cols[1])))?;
            omega.push(x);
            density.push(w);
        }
        Self::tabulated(omega, density)
    }

    pub fn read_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SpectrumError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse_table(&text, &path.display().to_string())
    }

    pub fn value_at(&self, omega: f64) -> f64 {
        match self {
            Self::Lorentzian { peak, fwhm, center } => {
                let hw = 0.5 * fwhm;
                if hw == 0.0 {
                    return if omega == *center { *peak } else { 0.0 };
                }
                let x = omega - center;
                peak * hw * hw / (hw * hw + x * x)
            }
            Self::Tabulated { omega: xs, density } => interpolate(xs, density, omega).unwrap_or(0.0),
        }
    }

    /// Average energy density `u = integral of W`.
    pub fn energy_density(&self) -> f64 {
        match self {
            Self::Lorentzian { peak, fwhm, .. } => 0.5 * PI * fwhm * peak,
            Self::Tabulated { omega, density } => omega
                .windows(2)
                .zip(density.windows(2))
                .map(|(x, w)| 0.5 * (w[0] + w[1]) * (x[1] - x[0]))
                .sum(),
        }
    }

    /// `b W(omega21)`; for the phase-diffusion field this is `Omega0^2 / delta`.
    pub fn bw21(&self, b: f64, omega21: f64) -> Result<f64> {
        match self {
            Self::Lorentzian { .. } => Ok(b * self.value_at(omega21)),
            Self::Tabulated { omega, density } => interpolate(omega, density, omega21)
                .map(|w| b * w)
                .ok_or(SpectrumError::OutOfRange {
                    omega21,
                    lo: omega[0],
                    hi: *omega.last().unwrap(),
                }),
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if x < xs[0] || x > *xs.last()? {
        return None;
    }
    let j = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let s = (x - x0) / (x1 - x0);
    Some(ys[j - 1] + s * (ys[j] - ys[j - 1]))
}

/// `sin(x) / x`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Spherical Bessel `j1(x) = (sin x - x cos x) / x^2`.
fn j1(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0))
    } else {
        (x.sin() - x * x.cos()) / (x * x)
    }
}

/// `integral of f(x) e^{i k x} dx` over the grid, with `f` linear between
/// samples. Exact for the interpolant at every `k`.
pub(crate) fn linear_fourier_integral(x: &[f64], f: &[Complex64], k: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (xs, fs) in x.windows(2).zip(f.windows(2)) {
        let c = 0.5 * (xs[1] - xs[0]);
        let m = 0.5 * (xs[1] + xs[0]);
        let mean = (fs[0] + fs[1]) * 0.5;
        let slope = (fs[1] - fs[0]) / (xs[1] - xs[0]);
        let kc = k * c;
        let inner = mean * sinc(kc) + Complex64::i() * slope * (c * j1(kc));
        acc += Complex64::from_polar(2.0 * c, k * m) * inner;
    }
    acc
}

/// Settings for [`wk_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct WkConfig {
    pub omega0: f64,
    /// Einstein `B`; `1.0` reports `B W`.
    pub b: f64,
    pub omega21: f64,
    /// Angular frequencies at which to evaluate the estimate.
    pub omega: Vec<f64>,
    /// Lag window `T`; the autocorrelation is used on `[0, T]`.
    pub window: f64,
    /// Phase diffusion coefficient, if known, for the truncation-bias check.
    pub delta_hint: Option<f64>,
    /// Number of batches used for the statistical error.
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WkEstimate {
    pub omega: Vec<f64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Lags and mean autocorrelation `<e^{i[phi(t+tau) - phi(t)]}>`.
    pub lag: Vec<f64>,
    pub autocorrelation: Vec<Complex64>,
    /// Set when the window is shorter than `20 / delta`: estimated relative
    /// truncation error `exp(-delta T / 2)`.
    pub truncation_warning: Option<f64>,
}

/// Spectral density from a mean autocorrelation sampled at lags `lag`
/// (starting at zero): `W = Omega0^2/(4B) Re int C(tau) e^{i(omega21 - omega) tau} dtau`
/// over `|tau| <= T`, using `C(-tau) = C(tau)*`.
pub fn spectrum_from_autocorrelation(
    lag: &[f64],
    autocorrelation: &[Complex64],
    omega0: f64,
    b: f64,
    omega21: f64,
    omega: &[f64],
) -> Vec<f64> {
    let scale = omega0 * omega0 / (4.0 * b);
    omega
        .iter()
        .map(|&w| scale * 2.0 * linear_fourier_integral(lag, autocorrelation, omega21 - w).re)
        .collect()
}

/// Wiener-Khintchine estimate of `W(omega)` from phase paths.
///
/// The autocorrelation is averaged over time origins (stationarity) and
/// paths, then cosine-transformed over the lag window. Errors come from
/// equal-size batches of paths.
pub fn wk_estimate<P: PhasePaths>(paths: &P, cfg: &WkConfig) -> Result<WkEstimate> {
    let n_paths = paths.n_paths();
    let m = paths.n_samples();
    let dt = paths.dt();
    if n_paths == 0 || m < 2 || !(dt > 0.0) {
        return Err(SpectrumError::Invalid("need at least one path with two samples".into()));
    }
    if !(cfg.b > 0.0) || !(cfg.window > 0.0) {
        return Err(SpectrumError::Invalid("b and window must be > 0".into()));
    }
    let lags = ((cfg.window / dt).round() as usize).min(m - 1);
    if lags == 0 {
        return Err(SpectrumError::Invalid("window shorter than one sample".into()));
    }
    let window = lags as f64 * dt;
    let batches = cfg.batches.clamp(1, n_paths);
    let fft_len = (2 * m).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let batch_acf: Vec<Vec<Complex64>> = (0..batches)
        .into_par_iter()
        .map(|bi| {
            let lo = bi * n_paths / batches;
            let hi = (bi + 1) * n_paths / batches;
            let mut phase = vec![0.0; m];
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            let mut sum = vec![Complex64::new(0.0, 0.0); lags + 1];
            for idx in lo..hi {
                paths.fill_path(idx, &mut phase);
                for (b, &p) in buf.iter_mut().zip(&phase) {
                    *b = Complex64::from_polar(1.0, p);
                }
                buf[m..].fill(Complex64::new(0.0, 0.0));
                fwd.process(&mut buf);
                buf.iter_mut().for_each(|z| *z = Complex64::new(z.norm_sqr(), 0.0));
                inv.process(&mut buf);
                // buf[l] = fft_len * sum_k z_k^* z_{k+l}
                for (l, s) in sum.iter_mut().enumerate() {
                    *s += buf[l] / (fft_len as f64 * (m - l) as f64);
                }
            }
            let count = (hi - lo) as f64;
            let mut acf: Vec<Complex64> = sum.into_iter().map(|s| s / count).collect();
            acf[0] = Complex64::new(1.0, 0.0);
            acf
        })
        .collect();

    let lag: Vec<f64> = (0..=lags).map(|l| l as f64 * dt).collect();
    let mut stats = vec![RunningStats::new(); cfg.omega.len()];
    let mut acf_mean = vec![Complex64::new(0.0, 0.0); lags + 1];
    for (bi, acf) in batch_acf.iter().enumerate() {
        let weight = ((bi + 1) * n_paths / batches - bi * n_paths / batches) as f64 / n_paths as f64;
        acf_mean.iter_mut().zip(acf).for_each(|(a, c)| *a += c * weight);
        let w = spectrum_from_autocorrelation(&lag, acf, cfg.omega0, cfg.b, cfg.omega21, &cfg.omega);
        stats.iter_mut().zip(w).for_each(|(s, v)| s.push(v));
    }
    let density =
        spectrum_from_autocorrelation(&lag, &acf_mean, cfg.omega0, cfg.b, cfg.omega21, &cfg.omega);
    let stderr = stats
        .iter()
        .map(|s| if batches > 1 { s.std_error() } else { f64::NAN })
        .collect();
    let truncation_warning = cfg
        .delta_hint
        .filter(|&d| d > 0.0 && window < 20.0 / d)
        .map(|d| (-0.5 * d * window).exp());
    Ok(WkEstimate {
        omega: cfg.omega.clone(),
        density,
        stderr,
        lag,
        autocorrelation: acf_mean,
        truncation_warning,
    })
}

/// Full width at half maximum of a sampled single-peaked curve, with linear
/// interpolation of the half-maximum crossings.
pub fn half_max_width(x: &[f64], y: &[f64]) -> Option<f64> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * ymax;
    let cross = |i0: usize, i1: usize| x[i0] + (half - y[i0]) / (y[i1] - y[i0]) * (x[i1] - x[i0]);
    let left = (1..=imax).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i))?;
    let right = (imax..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1))?;
    Some(right - left)
}
