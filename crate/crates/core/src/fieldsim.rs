//! Stochastic Bloch equations for atoms driven by a phase-diffusing field.
//!
//! Each atom carries `(n, sigma, phi)` with
//!
//! ```text
//! dn/dt     = -A (n + 1) - i Omega0 (sigma e^{i phi} - c.c.)
//! dsigma/dt = -gamma_perp sigma - (i/2) Omega0 n e^{-i phi}
//! dphi      = sqrt(Delta) dW
//! ```
//!
//! The phase is sampled exactly (two half-step Wiener increments per step,
//! which also yields the exact Brownian midpoint). `(n, sigma)` then take an
//! implicit-midpoint step with the field frozen at the midpoint phase, solved
//! by fixed-point iteration. Noise only enters through the phase, so there is
//! no Ito/Stratonovich ambiguity.
//!
//! Ensemble statistics are reduced over a binary tree of fixed-size
//! trajectory chunks whose shape depends only on the trajectory count, so
//! results are bit-identical for any number of worker threads.

use num_complex::Complex64;
use thiserror::Error;

use crate::params::SystemParams;
use crate::rng::RngStream;
use crate::stats::{JointStats, RunningStats};

/// Trajectories per leaf of the reduction tree.
const CHUNK: u64 = 64;
const MAX_FIXED_POINT_ITERS: usize = 8;
const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldSimError {
    #[error("integrator failure at step {step} (t = {time}): {reason}")]
    IntegratorFailure {
        step: usize,
        time: f64,
        reason: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

type Result<T> = std::result::Result<T, FieldSimError>;

/// Instantaneous state of one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    /// Population inversion.
    pub n: f64,
    /// Slowly varying coherence.
    pub sigma: Complex64,
    /// Field phase.
    pub phi: f64,
}

impl AtomState {
    /// Ground state, no coherence, zero phase.
    pub fn ground() -> Self {
        Self {
            n: -1.0,
            sigma: Complex64::new(0.0, 0.0),
            phi: 0.0,
        }
    }

    /// `n^2 + 4 |sigma|^2`, equal to one on the surface of the Bloch sphere.
    pub fn bloch_norm_sqr(&self) -> f64 {
        self.n * self.n + 4.0 * self.sigma.norm_sqr()
    }

    /// `sigma e^{i phi}`, the coherence in the frame co-moving with the field phase.
    pub fn comoving_coherence(&self) -> Complex64 {
        self.sigma * Complex64::from_polar(1.0, self.phi)
    }
}

impl Default for AtomState {
    fn default() -> Self {
        Self::ground()
    }
}

/// Rates entering the single-atom equations.
///
/// Normally built from [`SystemParams`]; constructing it directly allows
/// switching damping off, which the validated parameters forbid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochRates {
    pub a: f64,
    pub gamma_perp: f64,
    pub delta: f64,
    pub omega0: f64,
}

impl From<&SystemParams> for BlochRates {
    fn from(p: &SystemParams) -> Self {
        Self {
            a: p.a,
            gamma_perp: p.gamma_perp(),
            delta: p.delta,
            omega0: p.omega0,
        }
    }
}

impl From<SystemParams> for BlochRates {
    fn from(p: SystemParams) -> Self {
        Self::from(&p)
    }
}

impl BlochRates {
    fn rhs(&self, n: f64, sigma: Complex64, field_phase: Complex64) -> (f64, Complex64) {
        let dn = -self.a * (n + 1.0) + 2.0 * self.omega0 * (sigma * field_phase).im;
        let dsigma = -self.gamma_perp * sigma
            - Complex64::new(0.0, 0.5 * self.omega0 * n) * field_phase.conj();
        (dn, dsigma)
    }
}

/// Advance one step given the two half-step phase increments.
///
/// The midpoint phase is `phi + dphi_first`, the new phase
/// `phi + dphi_first + dphi_second`. `step` only labels errors.
pub fn step_with_increments(
    state: &AtomState,
    rates: &BlochRates,
    dt: f64,
    dphi_first: f64,
    dphi_second: f64,
    step: usize,
) -> Result<AtomState> {
    let phi_mid = state.phi + dphi_first;
    let field = Complex64::from_polar(1.0, phi_mid);
    let h = 0.5 * dt;

    // Solve y_mid = y0 + (dt/2) f(y_mid); the step is y1 = 2 y_mid - y0.
    let (dn0, ds0) = rates.rhs(state.n, state.sigma, field);
    let mut n_mid = state.n + h * dn0;
    let mut s_mid = state.sigma + ds0 * h;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let (dn, ds) = rates.rhs(n_mid, s_mid, field);
        let n_next = state.n + h * dn;
        let s_next = state.sigma + ds * h;
        residual = (n_next - n_mid).abs().max((s_next - s_mid).norm());
        n_mid = n_next;
        s_mid = s_next;
        if residual < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FieldSimError::IntegratorFailure {
            step,
            time: step as f64 * dt,
            reason: format!(
                "implicit midpoint iteration did not converge (residual {residual:.3e}); reduce dt"
            ),
        });
    }

    let next = AtomState {
        n: 2.0 * n_mid - state.n,
        sigma: s_mid * 2.0 - state.sigma,
        phi: phi_mid + dphi_second,
    };
    let bound = 1.0 + 10.0 * dt;
    if !(next.n.is_finite() && next.sigma.is_finite() && next.phi.is_finite())
        || next.n.abs() > bound
        || next.bloch_norm_sqr() > bound
    {
        return Err(FieldSimError::IntegratorFailure {
            step,
            time: (step + 1) as f64 * dt,
            reason: format!("state left the Bloch sphere: n = {}, |sigma| = {}", next.n, next.sigma.norm()),
        });
    }
    Ok(next)
}

/// Advance one trajectory by `dt`, drawing the phase increment from `rng`.
pub fn step_trajectory(
    state: &AtomState,
    rates: &BlochRates,
    dt: f64,
    rng: &mut RngStream,
    step: usize,
) -> Result<AtomState> {
    let (z1, z2) = rng.normal_pair();
    let half = (0.5 * rates.delta * dt).sqrt();
    step_with_increments(state, rates, dt, half * z1, half * z2, step)
}

/// Number of steps of size `dt` needed to reach `t_end`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FieldSimError::InvalidInput(format!("dt = {dt} must be > 0")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(FieldSimError::InvalidInput(format!("t_end = {t_end} must be >= 0")));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Full path of trajectory `index`, recording every `record_every` steps.
pub fn simulate_trajectory(
    rates: &BlochRates,
    initial: AtomState,
    t_end: f64,
    dt: f64,
    seed: u64,
    index: u64,
    record_every: usize,
) -> Result<Vec<(f64, AtomState)>> {
    let steps = step_count(t_end, dt)?;
    let every = record_every.max(1);
    let mut rng = RngStream::new(seed, index);
    let mut state = initial;
    let mut out = vec![(0.0, state)];
    for k in 0..steps {
        state = step_trajectory(&state, rates, dt, &mut rng, k)?;
        if (k + 1) % every == 0 || k + 1 == steps {
            out.push(((k + 1) as f64 * dt, state));
        }
    }
    Ok(out)
}

/// Deterministic divide-and-conquer reduction over trajectory chunks.
///
/// `leaf` processes trajectories `[lo, hi)` sequentially; `merge` combines a
/// left (lower-index) accumulator with its right neighbour.
fn tree_reduce<T, L, M>(n_traj: u64, leaf: &L, merge: &M) -> Result<T>
where
    T: Send,
    L: Fn(u64, u64) -> Result<T> + Sync,
    M: Fn(T, T) -> T + Sync,
{
    fn go<T, L, M>(lo: u64, hi: u64, n_traj: u64, leaf: &L, merge: &M) -> Result<T>
    where
        T: Send,
        L: Fn(u64, u64) -> Result<T> + Sync,
        M: Fn(T, T) -> T + Sync,
    {
        if hi - lo == 1 {
            return leaf(lo * CHUNK, (hi * CHUNK).min(n_traj));
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = rayon::join(
            || go(lo, mid, n_traj, leaf, merge),
            || go(mid, hi, n_traj, leaf, merge),
        );
        Ok(merge(a?, b?))
    }
    let chunks = n_traj.div_ceil(CHUNK);
    go(0, chunks, n_traj, leaf, merge)
}

/// Settings for [`run_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: u64,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    /// Record statistics every this many steps (the final step is always recorded).
    pub record_every: usize,
    pub initial: AtomState,
}

impl EnsembleConfig {
    pub fn new(n_traj: u64, t_end: f64, dt: f64, seed: u64) -> Self {
        Self {
            n_traj,
            t_end,
            dt,
            seed,
            record_every: 1,
            initial: AtomState::ground(),
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn initial(mut self, initial: AtomState) -> Self {
        self.initial = initial;
        self
    }
}

/// Per-time ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrace {
    pub t: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub n_var: Vec<f64>,
    pub n_stderr: Vec<f64>,
    /// Ensemble mean of `sigma e^{i phi}`.
    pub coherence_mean: Vec<Complex64>,
    pub n_traj: u64,
}

impl EnsembleTrace {
    pub fn n_std(&self) -> Vec<f64> {
        self.n_var.iter().map(|v| v.sqrt()).collect()
    }

    /// Effective coherence `q` of the averaged model, from
    /// `dn/dt = -A (n + 1) + 2 Omega0 Im<sigma e^{i phi}> = -A (n + 1) - 2 zeta BW21 q`.
    pub fn q_mean(&self, params: &SystemParams) -> Vec<f64> {
        let coupling = params.derive().zeta_bw21;
        self.coherence_mean
            .iter()
            .map(|c| {
                if coupling > 0.0 {
                    -params.omega0 * c.im / coupling
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Clone)]
struct TraceAcc {
    n: Vec<RunningStats>,
    re: Vec<RunningStats>,
    im: Vec<RunningStats>,
}

impl TraceAcc {
    fn new(len: usize) -> Self {
        Self {
            n: vec![RunningStats::new(); len],
            re: vec![RunningStats::new(); len],
            im: vec![RunningStats::new(); len],
        }
    }

    fn push(&mut self, slot: usize, s: &AtomState) {
        let c = s.comoving_coherence();
        self.n[slot].push(s.n);
        self.re[slot].push(c.re);
        self.im[slot].push(c.im);
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in [
            (&mut self.n, &other.n),
            (&mut self.re, &other.re),
            (&mut self.im, &other.im),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        self
    }
}

/// Simulate `n_traj` independent atoms and reduce per-time statistics.
pub fn run_ensemble(params: &SystemParams, cfg: &EnsembleConfig) -> Result<EnsembleTrace> {
    run_ensemble_with_rates(&BlochRates::from(params), cfg)
}

pub fn run_ensemble_with_rates(rates: &BlochRates, cfg: &EnsembleConfig) -> Result<EnsembleTrace> {
    if cfg.n_traj == 0 {
        return Err(FieldSimError::InvalidInput("n_traj must be >= 1".into()));
    }
    let steps = step_count(cfg.t_end, cfg.dt)?;
    let every = cfg.record_every.max(1);
    let mut record_steps: Vec<usize> = (0..=steps).step_by(every).collect();
    if *record_steps.last().unwrap() != steps {
        record_steps.push(steps);
    }
    let slots = record_steps.len();

    let leaf = |lo: u64, hi: u64| -> Result<TraceAcc> {
        let mut acc = TraceAcc::new(slots);
        for idx in lo..hi {
            let mut rng = RngStream::new(cfg.seed, idx);
            let mut state = cfg.initial;
            acc.push(0, &state);
            let mut slot = 1;
            for k in 0..steps {
                state = step_trajectory(&state, rates, cfg.dt, &mut rng, k)?;
                if slot < slots && record_steps[slot] == k + 1 {
                    acc.push(slot, &state);
                    slot += 1;
                }
            }
        }
        Ok(acc)
    };
    let acc = tree_reduce(cfg.n_traj, &leaf, &|a: TraceAcc, b| a.merge(b))?;

    let trace = EnsembleTrace {
        t: record_steps.iter().map(|&k| k as f64 * cfg.dt).collect(),
        n_mean: acc.n.iter().map(RunningStats::mean).collect(),
        n_var: acc.n.iter().map(RunningStats::variance).collect(),
        n_stderr: acc.n.iter().map(RunningStats::std_error).collect(),
        coherence_mean: acc
            .re
            .iter()
            .zip(&acc.im)
            .map(|(r, i)| Complex64::new(r.mean(), i.mean()))
            .collect(),
        n_traj: cfg.n_traj,
    };
    if let Some(k) = trace
        .n_mean
        .iter()
        .zip(&trace.n_var)
        .position(|(m, v)| !m.is_finite() || !v.is_finite())
    {
        return Err(FieldSimError::IntegratorFailure {
            step: record_steps[k],
            time: trace.t[k],
            reason: "non-finite ensemble statistic".into(),
        });
    }
    Ok(trace)
}

/// Settings for [`decorrelation_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelationConfig {
    pub n_traj: u64,
    /// Observation time `t`.
    pub t_obs: f64,
    /// Earlier times `t' <= t`, snapped to the `dt` grid.
    pub t_prime: Vec<f64>,
    pub dt: f64,
    pub seed: u64,
}

/// Estimates at one `t'`; all kernels include the `Omega0^2` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelationPoint {
    pub t_prime: f64,
    /// `K(t, t') = Re <Omega(t) Omega*(t') n(t')>`.
    pub k: f64,
    pub k_stderr: f64,
    /// `C(t, t') = Re <Omega*(t) Omega(t')>`.
    pub c: f64,
    pub c_stderr: f64,
    pub n_mean: f64,
    /// `R = K - C n(t')`.
    pub residual: f64,
    /// Delta-method standard error of `R`.
    pub residual_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelationReport {
    pub t_obs: f64,
    pub n_traj: u64,
    pub points: Vec<DecorrelationPoint>,
    /// Set when the K estimator cannot resolve 1% of the kernel scale `Omega0^2`.
    pub low_statistics: bool,
}

impl DecorrelationReport {
    /// `max |R| / stderr(K)` over the `t'` grid (zero where both vanish).
    pub fn max_sigma_vs_k(&self) -> f64 {
        self.points
            .iter()
            .map(|p| ratio(p.residual.abs(), p.k_stderr))
            .fold(0.0, f64::max)
    }

    /// `max |R| / stderr(R)` over the `t'` grid.
    pub fn max_sigma_vs_residual(&self) -> f64 {
        self.points
            .iter()
            .map(|p| ratio(p.residual.abs(), p.residual_stderr))
            .fold(0.0, f64::max)
    }

    /// Residual consistent with zero at `n_sigma` standard errors of the K estimator.
    pub fn holds(&self, n_sigma: f64) -> bool {
        self.max_sigma_vs_k() <= n_sigma
    }
}

fn ratio(x: f64, se: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if se > 0.0 {
        x / se
    } else {
        f64::INFINITY
    }
}

/// Estimate `K(t, t')`, `C(t, t')` and the decorrelation residual over the ensemble.
pub fn decorrelation_residual(
    params: &SystemParams,
    cfg: &DecorrelationConfig,
) -> Result<DecorrelationReport> {
    let rates = BlochRates::from(params);
    if cfg.n_traj == 0 {
        return Err(FieldSimError::InvalidInput("n_traj must be >= 1".into()));
    }
    let steps = step_count(cfg.t_obs, cfg.dt)?;
    let mut slot_steps = Vec::with_capacity(cfg.t_prime.len());
    for &tp in &cfg.t_prime {
        if !(tp >= 0.0 && tp <= cfg.t_obs + 1e-12) {
            return Err(FieldSimError::InvalidInput(format!(
                "t' = {tp} must lie in [0, t = {}]",
                cfg.t_obs
            )));
        }
        slot_steps.push(((tp / cfg.dt).round() as usize).min(steps));
    }
    // visit slots in step order
    let mut order: Vec<usize> = (0..slot_steps.len()).collect();
    order.sort_by_key(|&i| slot_steps[i]);

    let leaf = |lo: u64, hi: u64| -> Result<Vec<JointStats<3>>> {
        let mut acc = vec![JointStats::<3>::new(); slot_steps.len()];
        let mut snap = vec![(0.0, 0.0); slot_steps.len()];
        for idx in lo..hi {
            let mut rng = RngStream::new(cfg.seed, idx);
            let mut state = AtomState::ground();
            let mut next = 0;
            for k in 0..=steps {
                while next < order.len() && slot_steps[order[next]] == k {
                    snap[order[next]] = (state.n, state.phi);
                    next += 1;
                }
                if k < steps {
                    state = step_trajectory(&state, &rates, cfg.dt, &mut rng, k)?;
                }
            }
            for (a, &(n, phi)) in acc.iter_mut().zip(&snap) {
                let c = (state.phi - phi).cos();
                a.push([c * n, c, n]);
            }
        }
        Ok(acc)
    };
    let merge = |mut a: Vec<JointStats<3>>, b: Vec<JointStats<3>>| {
        a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y));
        a
    };
    let acc = tree_reduce(cfg.n_traj, &leaf, &merge)?;

    let w = params.omega0 * params.omega0;
    let points: Vec<DecorrelationPoint> = acc
        .iter()
        .zip(&slot_steps)
        .map(|(s, &k)| {
            let (mx, mc, mn) = (s.mean(0), s.mean(1), s.mean(2));
            DecorrelationPoint {
                t_prime: k as f64 * cfg.dt,
                k: w * mx,
                k_stderr: w * s.std_error_of([1.0, 0.0, 0.0]),
                c: w * mc,
                c_stderr: w * s.std_error_of([0.0, 1.0, 0.0]),
                n_mean: mn,
                residual: w * (mx - mc * mn),
                residual_stderr: w * s.std_error_of([1.0, -mn, -mc]),
            }
        })
        .collect();
    let low_statistics = points.iter().any(|p| p.k_stderr > 0.01 * w);
    Ok(DecorrelationReport {
        t_obs: steps as f64 * cfg.dt,
        n_traj: cfg.n_traj,
        points,
        low_statistics,
    })
}

/// Ensemble estimate of `<exp(i [phi(t + tau) - phi(t)])>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAutocorrelation {
    pub tau: Vec<f64>,
    pub mean: Vec<Complex64>,
    pub re_stderr: Vec<f64>,
    pub im_stderr: Vec<f64>,
}

/// Sample the phase-diffusion autocorrelation on a non-decreasing `tau` grid.
pub fn phase_autocorrelation(
    delta: f64,
    n_traj: u64,
    tau: &[f64],
    seed: u64,
) -> Result<PhaseAutocorrelation> {
    if !(delta >= 0.0) || n_traj == 0 {
        return Err(FieldSimError::InvalidInput(
            "delta must be >= 0 and n_traj >= 1".into(),
        ));
    }
    if tau.first().is_some_and(|&t| t < 0.0) || tau.windows(2).any(|w| w[1] < w[0]) {
        return Err(FieldSimError::InvalidInput(
            "tau grid must be non-negative and non-decreasing".into(),
        ));
    }
    let leaf = |lo: u64, hi: u64| -> Result<Vec<[RunningStats; 2]>> {
        let mut acc = vec![[RunningStats::new(); 2]; tau.len()];
        for idx in lo..hi {
            let mut rng = RngStream::new(seed, idx);
            let mut spare: Option<f64> = None;
            let mut phi = 0.0;
            let mut prev = 0.0;
            for (a, &t) in acc.iter_mut().zip(tau) {
                let z = match spare.take() {
                    Some(z) => z,
                    None => {
                        let (z1, z2) = rng.normal_pair();
                        spare = Some(z2);
                        z1
                    }
                };
                phi += (delta * (t - prev)).sqrt() * z;
                prev = t;
                let (s, c) = phi.sin_cos();
                a[0].push(c);
                a[1].push(s);
            }
        }
        Ok(acc)
    };
    let merge = |mut a: Vec<[RunningStats; 2]>, b: Vec<[RunningStats; 2]>| {
        for (x, y) in a.iter_mut().zip(&b) {
            x[0].merge(&y[0]);
            x[1].merge(&y[1]);
        }
        a
    };
    let acc = tree_reduce(n_traj, &leaf, &merge)?;
    Ok(PhaseAutocorrelation {
        tau: tau.to_vec(),
        mean: acc.iter().map(|a| Complex64::new(a[0].mean(), a[1].mean())).collect(),
        re_stderr: acc.iter().map(|a| a[0].std_error()).collect(),
        im_stderr: acc.iter().map(|a| a[1].std_error()).collect(),
    })
}

/// A collection of sampled phase paths on a uniform time grid.
pub trait PhasePaths: Sync {
    fn n_paths(&self) -> usize;
    fn n_samples(&self) -> usize;
    fn dt(&self) -> f64;
    /// Fill `out` (length `n_samples`) with path `index`.
    fn fill_path(&self, index: usize, out: &mut [f64]);
}

/// Wiener phase paths `phi(k dt)` generated on demand from `(seed, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDiffusionPaths {
    pub delta: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl PhasePaths for PhaseDiffusionPaths {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn n_samples(&self) -> usize {
        self.n_samples
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn fill_path(&self, index: usize, out: &mut [f64]) {
        let mut rng = RngStream::new(self.seed, index as u64);
        let scale = (self.delta * self.dt).sqrt();
        let mut phi = 0.0;
        let mut k = 0;
        while k < out.len() {
            out[k] = phi;
            let (z1, z2) = rng.normal_pair();
            phi += scale * z1;
            if k + 1 < out.len() {
                out[k + 1] = phi;
            }
            phi += scale * z2;
            k += 2;
        }
    }
}

/// Phase paths held in memory, e.g. recorded from full trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedPaths {
    pub dt: f64,
    pub paths: Vec<Vec<f64>>,
}

impl PhasePaths for RecordedPaths {
    fn n_paths(&self) -> usize {
        self.paths.len()
    }

    fn n_samples(&self) -> usize {
        self.paths.iter().map(Vec::len).min().unwrap_or(0)
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn fill_path(&self, index: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.paths[index][..out.len()]);
    }
}
