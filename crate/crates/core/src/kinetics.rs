//! Deterministic solvers for the reduced ensemble models.
//!
//! Every ODE model is integrated with fixed-step classical RK4 on the grid
//! `t_k = k dt`; the memory-kernel equation uses the trapezoidal rule for
//! both the time step and the history integral on the same grid. All
//! solvers start from `sigma(0) = 0`.

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{eigenvalues, kernel_i, AnalysisError};
use crate::params::{ParamsError, SystemParams, HBAR, K_BOLTZMANN};
use crate::spectrum::SpectrumModel;

/// Largest allowed `dt` times the fastest rate of the model.
pub const MAX_STEP_RATE: f64 = 0.1;
/// Relative kernel magnitude below which memory is discarded.
pub const KERNEL_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("dt = {dt} too large for the {model} model: fastest rate {rate} needs dt <= {max_dt}")]
    StepTooLarge {
        model: &'static str,
        dt: f64,
        rate: f64,
        max_dt: f64,
    },
    #[error("memory window is unbounded: the field autocorrelation does not decay and gamma_perp = 0")]
    UnboundedMemory,
    #[error("solution became non-finite at step {0}")]
    NonFinite(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

type Result<T> = std::result::Result<T, KineticsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Ere,
    ModifiedEre,
    EffectiveBloch,
    MemoryKernel,
    GeneralizedEre,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ere => "ere",
            Model::ModifiedEre => "modified-ere",
            Model::EffectiveBloch => "effective-bloch",
            Model::MemoryKernel => "memory-kernel",
            Model::GeneralizedEre => "generalized-ere",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ensemble-mean inversion and effective coherence at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticState {
    pub n_bar: f64,
    pub q_bar: f64,
}

/// Solution on the uniform grid `t_k = k dt`.
///
/// `q` is the effective coherence for the effective Bloch and memory-kernel
/// models and the quantity multiplying the stimulated term otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticTrace {
    pub model: Model,
    pub t: Vec<f64>,
    pub n: Vec<f64>,
    pub q: Vec<f64>,
}

impl KineticTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, k: usize) -> KineticState {
        KineticState {
            n_bar: self.n[k],
            q_bar: self.q[k],
        }
    }

    pub fn last(&self) -> KineticState {
        self.state(self.len() - 1)
    }
}

/// Radiative-collision rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    /// Downward (de-exciting) rate.
    pub gamma_21: f64,
    /// Upward (exciting) rate.
    pub gamma_12: f64,
}

impl CollisionParams {
    pub fn new(gamma_21: f64, gamma_12: f64) -> Result<Self> {
        if !(gamma_12 >= 0.0 && gamma_12 <= gamma_21 && gamma_21.is_finite()) {
            return Err(KineticsError::InvalidInput(format!(
                "collision rates need 0 <= gamma_12 <= gamma_21 (got gamma_21 = {gamma_21}, gamma_12 = {gamma_12})"
            )));
        }
        Ok(Self { gamma_21, gamma_12 })
    }

    /// Upward rate from detailed balance at temperature `temperature` [K],
    /// with `omega21` in rad/s.
    pub fn from_temperature(gamma_21: f64, omega21: f64, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && omega21 >= 0.0) {
            return Err(KineticsError::InvalidInput(
                "temperature must be > 0 and omega21 >= 0".into(),
            ));
        }
        let ratio = (-HBAR * omega21 / (K_BOLTZMANN * temperature)).exp();
        Self::new(gamma_21, gamma_21 * ratio)
    }

    pub fn none() -> Self {
        Self {
            gamma_21: 0.0,
            gamma_12: 0.0,
        }
    }

    /// `A + gamma_21 + gamma_12`.
    pub fn gamma_parallel(&self, a: f64) -> f64 {
        a + self.gamma_21 + self.gamma_12
    }

    /// Inversion reached without radiation, `-1 + 2 gamma_12 / gamma_parallel`.
    pub fn n_eq(&self, a: f64) -> f64 {
        -1.0 + 2.0 * self.gamma_12 / self.gamma_parallel(a)
    }
}

fn zeta_bw21(omega0: f64, delta: f64, gamma_perp: f64) -> f64 {
    omega0 * omega0 / (delta + 2.0 * gamma_perp)
}

fn check_run(t_end: f64, dt: f64, n0: f64) -> Result<usize> {
    if !(t_end > 0.0 && t_end.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(KineticsError::InvalidInput(format!(
            "t_end and dt must be finite and > 0 (got t_end = {t_end}, dt = {dt})"
        )));
    }
    if !(-1.0..=1.0).contains(&n0) {
        return Err(KineticsError::InvalidInput(format!("n0 = {n0} must lie in [-1, 1]")));
    }
    Ok((t_end / dt - 1e-9).ceil() as usize)
}

fn check_step(model: Model, dt: f64, rate: f64) -> Result<()> {
    if dt * rate > MAX_STEP_RATE {
        return Err(KineticsError::StepTooLarge {
            model: model.name(),
            dt,
            rate,
            max_dt: MAX_STEP_RATE / rate,
        });
    }
    Ok(())
}

#[inline]
fn rk4<F: Fn(f64, [f64; 2]) -> [f64; 2]>(f: &F, t: f64, y: [f64; 2], dt: f64) -> [f64; 2] {
    let add = |y: [f64; 2], k: [f64; 2], h: f64| [y[0] + h * k[0], y[1] + h * k[1]];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, add(y, k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, add(y, k2, 0.5 * dt));
    let k4 = f(t + dt, add(y, k3, dt));
    [
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn run_rk4<F, Q>(model: Model, steps: usize, dt: f64, y0: [f64; 2], f: F, q_of: Q) -> Result<KineticTrace>
where
    F: Fn(f64, [f64; 2]) -> [f64; 2],
    Q: Fn(f64, [f64; 2]) -> f64,
{
    let mut tr = KineticTrace {
        model,
        t: Vec::with_capacity(steps + 1),
        n: Vec::with_capacity(steps + 1),
        q: Vec::with_capacity(steps + 1),
    };
    let mut y = y0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k > 0 {
            y = rk4(&f, t - dt, y, dt);
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(KineticsError::NonFinite(k));
            }
        }
        tr.t.push(t);
        tr.n.push(y[0]);
        tr.q.push(q_of(t, y));
    }
    Ok(tr)
}

/// `dn/dt = -decay (n - n_eq) - 2 coupling n`, optionally with the coupling
/// switched on as `1 - e^{-ramp t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEquation {
    pub decay: f64,
    pub n_eq: f64,
    /// `zeta B W21`.
    pub coupling: f64,
    pub ramp: Option<f64>,
}

impl RateEquation {
    pub fn steady_state(&self) -> f64 {
        self.decay * self.n_eq / (self.decay + 2.0 * self.coupling)
    }

    /// Closed-form solution of the unramped equation.
    pub fn exact(&self, n0: f64, t: f64) -> f64 {
        let n_inf = self.steady_state();
        n_inf + (n0 - n_inf) * (-(self.decay + 2.0 * self.coupling) * t).exp()
    }

    pub fn integrate(&self, model: Model, t_end: f64, dt: f64, n0: f64) -> Result<KineticTrace> {
        let steps = check_run(t_end, dt, n0)?;
        check_step(model, dt, self.decay + 2.0 * self.coupling)?;
        let (decay, n_eq, c) = (self.decay, self.n_eq, self.coupling);
        match self.ramp {
            None => run_rk4(
                model,
                steps,
                dt,
                [n0, 0.0],
                |_, y| [-decay * (y[0] - n_eq) - 2.0 * c * y[0], 0.0],
                |_, y| y[0],
            ),
            Some(g) => run_rk4(
                model,
                steps,
                dt,
                [n0, 0.0],
                |t, y| [-decay * (y[0] - n_eq) - 2.0 * c * y[0] * (1.0 - (-g * t).exp()), 0.0],
                |t, y| (1.0 - (-g * t).exp()) * y[0],
            ),
        }
    }
}

fn ere_equation(params: &SystemParams, coll: &CollisionParams) -> Result<RateEquation> {
    params.validate()?;
    let gamma_par = coll.gamma_parallel(params.a);
    let gamma_perp = 0.5 * gamma_par + params.gamma_dc;
    Ok(RateEquation {
        decay: gamma_par,
        n_eq: coll.n_eq(params.a),
        coupling: zeta_bw21(params.omega0, params.delta, gamma_perp),
        ramp: None,
    })
}

/// Einstein rate equation with the spectral overlap `zeta`.
pub fn integrate_ere(params: &SystemParams, t_end: f64, dt: f64, n0: f64) -> Result<KineticTrace> {
    ere_equation(params, &CollisionParams::none())?.integrate(Model::Ere, t_end, dt, n0)
}

/// Closed-form ERE solution at time `t`.
pub fn ere_exact(params: &SystemParams, n0: f64, t: f64) -> f64 {
    RateEquation {
        decay: params.a,
        n_eq: -1.0,
        coupling: params.derive().zeta_bw21,
        ramp: None,
    }
    .exact(n0, t)
}

/// ERE whose stimulated term is switched on as `1 - e^{-gamma_eff t}`.
pub fn integrate_modified_ere(params: &SystemParams, t_end: f64, dt: f64, n0: f64) -> Result<KineticTrace> {
    let mut eq = ere_equation(params, &CollisionParams::none())?;
    eq.ramp = Some(params.gamma_eff());
    eq.integrate(Model::ModifiedEre, t_end, dt, n0)
}

/// ERE with radiative collisions; `gamma_parallel` replaces `A` both as the
/// decay rate and inside `gamma_perp`.
pub fn integrate_generalized_ere(
    params: &SystemParams,
    coll: &CollisionParams,
    t_end: f64,
    dt: f64,
    n0: f64,
) -> Result<KineticTrace> {
    CollisionParams::new(coll.gamma_21, coll.gamma_12)?;
    ere_equation(params, coll)?.integrate(Model::GeneralizedEre, t_end, dt, n0)
}

/// `dn/dt = -A (n + 1) - 2 zeta BW21 q`, `dq/dt = gamma_eff (n - q)`.
pub fn integrate_effective_bloch(
    params: &SystemParams,
    t_end: f64,
    dt: f64,
    n0: f64,
    q0: f64,
) -> Result<KineticTrace> {
    params.validate()?;
    let steps = check_run(t_end, dt, n0)?;
    if !q0.is_finite() {
        return Err(KineticsError::InvalidInput(format!("q0 = {q0} must be finite")));
    }
    let d = params.derive();
    let ev = eigenvalues(params);
    let rate = d.gamma_eff.max(ev.plus.norm()).max(ev.minus.norm());
    check_step(Model::EffectiveBloch, dt, rate)?;
    let (a, g, c) = (params.a, d.gamma_eff, d.zeta_bw21);
    run_rk4(
        Model::EffectiveBloch,
        steps,
        dt,
        [n0, q0],
        |_, y| [-a * (y[0] + 1.0) - 2.0 * c * y[1], g * (y[0] - y[1])],
        |_, y| y[1],
    )
}

/// Atomic relaxation rates entering the memory-kernel equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicDecay {
    pub a: f64,
    pub gamma_perp: f64,
}

impl From<&SystemParams> for AtomicDecay {
    fn from(p: &SystemParams) -> Self {
        Self {
            a: p.a,
            gamma_perp: p.gamma_perp(),
        }
    }
}

/// Samples `k_j = 2 I(j dt) e^{-gamma_perp j dt}` of the memory kernel,
/// truncated where it falls below `KERNEL_CUTOFF` of its peak.
pub fn memory_kernel(
    spectrum: &SpectrumModel,
    omega21: f64,
    gamma_perp: f64,
    dt: f64,
    max_len: usize,
) -> Result<Vec<f64>> {
    spectrum.validate().map_err(AnalysisError::from)?;
    let envelope = match spectrum {
        SpectrumModel::Lorentzian { fwhm, .. } => gamma_perp + 0.5 * fwhm,
        SpectrumModel::Tabulated { .. } => gamma_perp,
    };
    if !(envelope > 0.0) {
        return Err(KineticsError::UnboundedMemory);
    }
    let k0 = 2.0 * kernel_i(spectrum, omega21, 0.0)?;
    if k0 == 0.0 {
        return Ok(vec![0.0]);
    }
    let horizon = (-KERNEL_CUTOFF.ln() / envelope / dt).ceil() as usize;
    let len = horizon.min(max_len) + 1;
    let value = |j: usize| -> Result<f64> {
        let tau = j as f64 * dt;
        Ok(2.0 * kernel_i(spectrum, omega21, tau)? * (-gamma_perp * tau).exp())
    };
    let mut k: Vec<f64> = match spectrum {
        SpectrumModel::Lorentzian { .. } => (0..len).map(value).collect::<Result<_>>()?,
        SpectrumModel::Tabulated { .. } => (0..len).into_par_iter().map(value).collect::<Result<_>>()?,
    };
    let cut = KERNEL_CUTOFF * k0.abs();
    while k.len() > 1 && k.last().is_some_and(|v| v.abs() < cut) {
        k.pop();
    }
    Ok(k)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `dn/dt = -A (n + 1) - int_0^t k(t - t') n(t') dt'` with the kernel from
/// [`memory_kernel`]; spectrum values are `B W(omega)`.
///
/// The reported `q` is the history integral divided by the kernel area, the
/// quantity that plays the role of the effective coherence.
pub fn integrate_memory_kernel(
    spectrum: &SpectrumModel,
    omega21: f64,
    decay: AtomicDecay,
    t_end: f64,
    dt: f64,
    n0: f64,
) -> Result<KineticTrace> {
    let steps = check_run(t_end, dt, n0)?;
    if !(decay.a >= 0.0 && decay.gamma_perp >= 0.0) {
        return Err(KineticsError::InvalidInput("decay rates must be >= 0".into()));
    }
    check_step(Model::MemoryKernel, dt, decay.a)?;
    let k = memory_kernel(spectrum, omega21, decay.gamma_perp, dt, steps)?;
    let window = k.len() - 1;
    let k0 = k[0];
    let area = if window == 0 {
        0.0
    } else {
        dt * (0.5 * (k[0] + k[window]) + k[1..window].iter().sum::<f64>())
    };
    // krev[r] = k[window - r], so krev[window - len..] = k[len], ..., k[1]
    let krev: Vec<f64> = k[1..].iter().rev().copied().collect();
    let a = decay.a;
    let mut n = Vec::with_capacity(steps + 1);
    let mut q = Vec::with_capacity(steps + 1);
    n.push(n0);
    q.push(0.0);
    let mut f_prev = -a * (n0 + 1.0);
    let denom = 1.0 + 0.5 * dt * a + 0.25 * dt * dt * k0;
    for j in 1..=steps {
        let len = window.min(j - 1);
        let mut hist = dot(&krev[window - len..], &n[j - len..j]);
        if j <= window {
            hist += 0.5 * k[j] * n0;
        }
        let partial = dt * hist;
        let nj = (n[j - 1] + 0.5 * dt * (f_prev - a - partial)) / denom;
        if !nj.is_finite() {
            return Err(KineticsError::NonFinite(j));
        }
        let full = partial + 0.5 * dt * k0 * nj;
        f_prev = -a * (nj + 1.0) - full;
        n.push(nj);
        q.push(if area == 0.0 { 0.0 } else { full / area });
    }
    Ok(KineticTrace {
        model: Model::MemoryKernel,
        t: (0..=steps).map(|j| j as f64 * dt).collect(),
        n,
        q,
    })
}

/// Size of the first correction to adiabatic elimination along a trace:
/// `||d(dn)/dt|| / (gamma_eff ||dn||)` with `dn = n - n_inf`, derivatives by
/// central differences over the interior points.
pub fn adiabatic_series_check(params: &SystemParams, trace: &KineticTrace) -> f64 {
    let n = &trace.n;
    if n.len() < 3 {
        return 0.0;
    }
    let n_inf = crate::analysis::steady_state(params);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 1..n.len() - 1 {
        let d = (n[k + 1] - n[k - 1]) / (trace.t[k + 1] - trace.t[k - 1]);
        let dn = n[k] - n_inf;
        num += d * d;
        den += dn * dn;
    }
    if den == 0.0 {
        0.0
    } else {
        num.sqrt() / (params.gamma_eff() * den.sqrt())
    }
}
