//! Stochastic optical Bloch equations for atoms in phase-diffusing light and
//! the reduced kinetic models (Einstein rate equations, effective Bloch
//! equations, memory-kernel equation) derived from them.
//!
//! Rates are in units of the inversion decay rate unless stated otherwise.

pub mod analysis;
pub mod fieldsim;
pub mod kinetics;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod spectrum;
pub mod stats;

pub use analysis::{analyze, AnalysisReport};
pub use fieldsim::{run_ensemble, EnsembleConfig, EnsembleTrace};
pub use kinetics::{CollisionParams, KineticTrace, Model};
pub use params::{DerivedParams, SystemParams};
pub use spectrum::SpectrumModel;
