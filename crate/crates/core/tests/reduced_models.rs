use bloch_core::analysis::{eigenvalues, kernel_i, steady_state, thresholds};
use bloch_core::kinetics::{
    ere_exact, integrate_effective_bloch, integrate_ere, integrate_generalized_ere,
    integrate_memory_kernel, integrate_modified_ere, CollisionParams,
};
use bloch_core::spectrum::spectrum_from_autocorrelation;
use bloch_core::{SpectrumModel, SystemParams};
use num_complex::Complex64;
use proptest::prelude::*;

/// Lorentzian of FWHM `delta` sampled finely near the centre with
/// geometrically growing spacing far out in the wings.
fn tabulated_lorentzian(peak: f64, delta: f64) -> (SpectrumModel, SpectrumModel) {
    let exact = SpectrumModel::lorentzian(peak, delta, 0.0).unwrap();
    let h = delta / 200.0;
    let mut right: Vec<f64> = (0..=1000).map(|i| i as f64 * h).collect();
    let mut step = h;
    while *right.last().unwrap() < 1e6 * delta {
        step *= 1.005;
        right.push(right.last().unwrap() + step);
    }
    let mut omega: Vec<f64> = right.iter().skip(1).rev().map(|x| -x).collect();
    omega.extend(&right);
    let density = omega.iter().map(|&w| exact.value_at(w)).collect();
    (SpectrumModel::tabulated(omega, density).unwrap(), exact)
}

#[test]
fn tabulated_kernel_matches_closed_form() {
    let delta = 2.0;
    let (tab, exact) = tabulated_lorentzian(1.5, delta);
    let i0 = kernel_i(&exact, 0.0, 0.0).unwrap();
    for j in 0..=200 {
        let tau = j as f64 * 0.1 / delta;
        let a = kernel_i(&tab, 0.0, tau).unwrap();
        let b = kernel_i(&exact, 0.0, tau).unwrap();
        assert!((a - b).abs() < 1e-5 * i0, "tau {tau}: {a} vs {b}");
    }
}

#[test]
fn kernel_and_spectrum_form_a_fourier_pair() {
    let (delta, peak) = (2.0, 0.7);
    let s = SpectrumModel::lorentzian(peak, delta, 0.0).unwrap();
    let dtau = 1e-3 / delta;
    let lag: Vec<f64> = (0..=40_000).map(|j| j as f64 * dtau).collect();
    let i: Vec<f64> = lag.iter().map(|&t| kernel_i(&s, 0.0, t).unwrap()).collect();
    let i0 = i[0];
    let acf: Vec<Complex64> = i.iter().map(|&v| Complex64::new(v / i0, 0.0)).collect();
    // Omega0^2 / (2B) = I(0) turns the estimator into W = int_0^inf I cos
    let omega0 = (2.0 * i0).sqrt();
    let omega: Vec<f64> = (-50..=50).map(|k| k as f64 * 0.1 * delta).collect();
    let w = spectrum_from_autocorrelation(&lag, &acf, omega0, 1.0, 0.0, &omega);
    for (x, v) in omega.iter().zip(&w) {
        let want = s.value_at(*x);
        assert!((v - want).abs() < 1e-5 * want, "omega {x}: {v} vs {want}");
    }
}

#[test]
fn tabulated_memory_kernel_follows_effective_bloch() {
    let p = SystemParams::resonant(5.0, 11f64.sqrt()).unwrap();
    let (tab, _) = tabulated_lorentzian(p.omega0 * p.omega0 / p.delta, p.delta);
    let dt = 1e-3;
    let mk = integrate_memory_kernel(&tab, 0.0, (&p).into(), 3.0, dt, -1.0).unwrap();
    let eb = integrate_effective_bloch(&p, 3.0, dt, -1.0, 0.0).unwrap();
    let diff = mk.n.iter().zip(&eb.n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-4, "{diff}");
}

#[test]
fn slow_eigenvalue_governs_late_relaxation() {
    for (delta, omega0) in [(10.0, 2.0), (40.0, 3.0), (100.0, 1.0)] {
        let p = SystemParams::resonant(delta, omega0).unwrap();
        assert!(!thresholds(&p).oscillation);
        let tr = integrate_effective_bloch(&p, 8.0, 1e-3, -1.0, 0.0).unwrap();
        let n_inf = steady_state(&p);
        let (t0, t1) = (4000, 8000);
        let slope = ((tr.n[t1] - n_inf).abs().ln() - (tr.n[t0] - n_inf).abs().ln()) / (tr.t[t1] - tr.t[t0]);
        let lambda = eigenvalues(&p).plus.re;
        assert!((slope / lambda - 1.0).abs() < 0.02, "delta {delta}: {slope} vs {lambda}");
    }
}

#[test]
fn steady_states_agree_where_rate_equations_hold() {
    for delta in [10.0, 20.0, 50.0] {
        for frac in [0.2, 0.5, 0.8] {
            let base = SystemParams::resonant(delta, 1.0).unwrap();
            let bound = thresholds(&base).oscillation_bound.unwrap();
            let p = base.with_bw21(frac * bound).unwrap();
            assert!(thresholds(&p).rate_eq_valid);
            let want = steady_state(&p);
            let ere = integrate_ere(&p, 50.0, 1e-3, -1.0).unwrap();
            let eb = integrate_effective_bloch(&p, 50.0, 1e-3, -1.0, 0.0).unwrap();
            assert!((ere.last().n_bar - want).abs() < 1e-6);
            assert!((eb.last().n_bar - want).abs() < 1e-6);
        }
    }
}

fn params() -> impl Strategy<Value = SystemParams> {
    (0.5f64..2.0, 0.0f64..2.0, 0.0f64..30.0, 0.0f64..6.0)
        .prop_map(|(a, g, d, o)| SystemParams::new(a, g, d, o).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ere_matches_closed_form(p in params(), n0 in -1.0f64..1.0) {
        let tr = integrate_ere(&p, 3.0, 1e-3, n0).unwrap();
        for (t, n) in tr.t.iter().zip(&tr.n).step_by(100) {
            prop_assert!((n - ere_exact(&p, n0, *t)).abs() < 1e-8);
        }
    }

    #[test]
    fn solvers_keep_inversion_bounded(p in params(), n0 in -1.0f64..1.0) {
        let dt = 1e-3;
        let tol = 1.0 + 10.0 * dt;
        let traces = [
            integrate_ere(&p, 4.0, dt, n0).unwrap(),
            integrate_modified_ere(&p, 4.0, dt, n0).unwrap(),
            integrate_effective_bloch(&p, 4.0, dt, n0, 0.0).unwrap(),
        ];
        for tr in &traces {
            prop_assert!(tr.n.iter().all(|n| n.abs() <= tol), "{}", tr.model);
        }
    }

    #[test]
    fn generalized_ere_without_collisions_is_ere(p in params(), n0 in -1.0f64..1.0) {
        let a = integrate_ere(&p, 2.0, 1e-3, n0).unwrap();
        let b = integrate_generalized_ere(&p, &CollisionParams::none(), 2.0, 1e-3, n0).unwrap();
        prop_assert_eq!(a.n, b.n);
    }

    #[test]
    fn generalized_ere_reaches_its_fixed_point(p in params(), g21 in 0.0f64..3.0, frac in 0.0f64..1.0) {
        let coll = CollisionParams::new(g21, frac * g21).unwrap();
        let tr = integrate_generalized_ere(&p, &coll, 40.0, 1e-3, -1.0).unwrap();
        let gpar = coll.gamma_parallel(p.a);
        let c = p.omega0 * p.omega0 / (p.delta + gpar + 2.0 * p.gamma_dc);
        let want = gpar * coll.n_eq(p.a) / (gpar + 2.0 * c);
        prop_assert!((tr.last().n_bar - want).abs() < 1e-6);
    }
}
