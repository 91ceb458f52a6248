//! Physical parameters of the driven two-level ensemble and the closed-form
//! algebra relating them.
//!
//! Simulation quantities are rates in units of the inversion decay rate
//! (`A = 1` unless stated otherwise); SI units only appear in
//! [`DipoleParams`]. The light spectrum is always centred on the atomic
//! resonance here; detuned spectra go through tabulated
//! [`crate::spectrum::SpectrumModel`]s.

use std::f64::consts::PI;

use thiserror::Error;

/// Reduced Planck constant [J s] (exact SI value of `h / 2π`).
pub const HBAR: f64 = 6.626_070_15e-34 / (2.0 * PI);
/// Vacuum permittivity [F/m].
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant [J/K].
pub const K_BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// `BW21 = Omega0^2 / Delta` is undefined for a fully coherent field.
    #[error("coherent limit (delta = 0): BW21 is undefined, use omega0 directly")]
    CoherentLimit,
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ParamsError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamsError::Invalid { name, value, reason })
    }
}

/// Rates describing the atoms and the (resonant, phase-diffusing) light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Inversion decay rate `A`.
    pub a: f64,
    /// Dephasing-collision rate.
    pub gamma_dc: f64,
    /// Light-spectrum FWHM (phase diffusion coefficient).
    pub delta: f64,
    /// Rabi-frequency magnitude.
    pub omega0: f64,
}

/// Quantities derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub gamma_perp: f64,
    pub gamma_eff: f64,
    pub zeta: f64,
    /// `None` in the coherent limit.
    pub bw21: Option<f64>,
    /// `zeta * BW21 = Omega0^2 / (Delta + 2 gamma_perp)`, finite even when `Delta = 0`.
    pub zeta_bw21: f64,
}

impl DerivedParams {
    pub fn bw21(&self) -> Result<f64, ParamsError> {
        self.bw21.ok_or(ParamsError::CoherentLimit)
    }
}

impl SystemParams {
    /// Validated constructor.
    pub fn new(a: f64, gamma_dc: f64, delta: f64, omega0: f64) -> Result<Self, ParamsError> {
        let p = Self {
            a,
            gamma_dc,
            delta,
            omega0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `A = 1`, no dephasing collisions.
    pub fn resonant(delta: f64, omega0: f64) -> Result<Self, ParamsError> {
        Self::new(1.0, 0.0, delta, omega0)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        check("a", self.a, self.a > 0.0, "must be > 0")?;
        check("gamma_dc", self.gamma_dc, self.gamma_dc >= 0.0, "must be >= 0")?;
        check("delta", self.delta, self.delta >= 0.0, "must be >= 0")?;
        check("omega0", self.omega0, self.omega0 >= 0.0, "must be >= 0")?;
        Ok(())
    }

    pub fn gamma_perp(&self) -> f64 {
        0.5 * self.a + self.gamma_dc
    }

    pub fn gamma_eff(&self) -> f64 {
        self.gamma_perp() + 0.5 * self.delta
    }

    pub fn derive(&self) -> DerivedParams {
        let gamma_perp = self.gamma_perp();
        let bw21 = (self.delta > 0.0).then(|| self.omega0 * self.omega0 / self.delta);
        DerivedParams {
            gamma_perp,
            gamma_eff: gamma_perp + 0.5 * self.delta,
            zeta: zeta_closed_form(self.delta, gamma_perp),
            bw21,
            zeta_bw21: self.omega0 * self.omega0 / (self.delta + 2.0 * gamma_perp),
        }
    }

    /// Same parameters with the Rabi frequency chosen so that `BW21` takes the given value.
    pub fn with_bw21(&self, bw21: f64) -> Result<Self, ParamsError> {
        if self.delta <= 0.0 {
            return Err(ParamsError::CoherentLimit);
        }
        check("bw21", bw21, bw21 >= 0.0, "must be >= 0")?;
        Ok(Self {
            omega0: (bw21 * self.delta).sqrt(),
            ..*self
        })
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            gamma_dc: 0.0,
            delta: 10.0,
            omega0: 2.0,
        }
    }
}

/// `Delta / (Delta + 2 gamma_perp)`.
pub(crate) fn zeta_closed_form(delta: f64, gamma_perp: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else {
        delta / (delta + 2.0 * gamma_perp)
    }
}

/// Microscopic dipole data; only used to convert to Einstein's `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleParams {
    /// Transition dipole magnitude [C m].
    pub mu: f64,
    /// Bohr angular frequency [rad/s].
    pub omega21: f64,
}

impl DipoleParams {
    pub fn new(mu: f64, omega21: f64) -> Result<Self, ParamsError> {
        check("mu", mu, mu >= 0.0, "must be >= 0")?;
        check("omega21", omega21, omega21 > 0.0, "must be > 0")?;
        Ok(Self { mu, omega21 })
    }

    /// Einstein's stimulated-emission coefficient `B = pi mu^2 / (3 hbar^2 eps0)`.
    pub fn einstein_b(&self) -> f64 {
        PI * self.mu * self.mu / (3.0 * HBAR * HBAR * EPSILON_0)
    }
}
