//! Classical simulator for time-domain vibronic spectroscopy on mixed
//! qudit-boson (MQB) hardware.
//!
//! The crate models an analog simulation pipeline end to end:
//!
//! - composite qudit ⊗ Fock-mode Hilbert spaces and operator algebra
//!   ([`hilbert`], [`operators`]),
//! - quadratic vibronic-coupling Hamiltonians and the bundled single-mode
//!   SO₂ model ([`model`]),
//! - unitary, Trotterised, and Lindblad time evolution with a trapped-ion
//!   noise model ([`dynamics`]),
//! - the autocorrelation measurement circuits, pulse sequences, and
//!   finite-shot sampling ([`protocol`]),
//! - spectral reconstruction via Fourier–Padé or direct quadrature
//!   ([`spectrum`]),
//! - frequency-domain eigenstate oracles for validation ([`oracle`]),
//! - emulated laser-calibration experiments with nonlinear least-squares
//!   fitting ([`calibration`], [`fit`]).
//!
//! Internally ħ = 1 and every frequency is angular (rad/s); physical units
//! appear only at the file-format boundaries.

pub mod calibration;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod oracle;
pub mod protocol;
pub mod spectrum;

pub use error::{Error, Result};
pub use hilbert::{HilbertSpec, OperatorMatrix, QuantumState};
pub use model::{MoleculeFile, QvcModel, So2Family, So2Params, UnitMap};
pub use dynamics::{Method, NoiseSpec, PropagationPlan, SpectralPropagator};
// TEMP: re-exports restored as modules land
// pub use protocol::{Autocorrelation, ReadoutPart, SdfParams, ShotPlan, TraceKind};
// pub use spectrum::{AxisFrame, SpectrumMethod, SpectrumResult};
// pub use oracle::{StickOrigin, StickSpectrum};
// pub use calibration::{FitResult, LaserParams};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
