//! Open-quantum-system model of time-resolved Stokes/anti-Stokes Raman
//! correlations from two vibrational modes sharing the same optical fields.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the simulator uses
//! in practice.

pub mod dynamics;
pub mod error;
pub mod faddeeva;
pub mod hilbert;
pub mod lsq;
pub mod measurement;
pub mod model;
pub mod scalar;
pub mod spectra;

pub use error::{Error, Result};
pub use dynamics::{run_two_pulse, IntegratorConfig, Method, ProtocolResult};
pub use hilbert::{DensityMatrix, HilbertSpace, Op};
pub use measurement::{Channel, Coincidences, DetectorModel, HeraldedState};
pub use model::{canonical_space, PhononMode, PulseRole, PulseSpec, SystemParams};
pub use scalar::{CMatrix, Cplx, Real};
pub use spectra::{DerivedParams, FitOptions, FitReport, Spectrum, VoigtPeak};

pub type C64 = Cplx<f64>;
pub type CMatrix64 = CMatrix<f64>;
pub type Op64 = Op<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type SystemParams64 = SystemParams<f64>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type DetectorModel64 = DetectorModel<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type VoigtPeak64 = VoigtPeak<f64>;
