//! Generalized Pauli channels built from mutually unbiased bases: finite
//! field arithmetic, MUB construction, time-dependent mixtures of input
//! maps, invertibility analysis and the measure of invertible outputs.

pub mod dynmaps;
pub mod finite_field;
pub mod invertibility;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod mub;

pub use dynmaps::{
    DecoherenceFunction, DensityMatrix, KrausSet, MapError, MixtureMap, Ramp, Superoperator,
};
pub use finite_field::{factor_prime_power, GaloisField, PrimePowerDim};
pub use invertibility::{classify_regime, InvertibilityReport, RegimeKind};
pub use measure::{delta_closed_form, delta_monte_carlo, delta_quadrature, MeasureResult};
pub use mub::{build_mub, build_unitaries, verify_mub, MubSet, WeylUnitaries};
