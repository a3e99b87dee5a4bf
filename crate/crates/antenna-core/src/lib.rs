//! Simulation toolkit for a planar dielectric antenna around a single
//! vertically-oriented dipole emitter.
//!
//! The crate is organized around the physical pipeline:
//!
//! * [`stack`] — planar multilayer primitives: layer geometry, out-of-plane
//!   wavenumbers, p-polarization Fresnel coefficients and effective
//!   reflection/transmission of the sub-stacks above and below the emitter.
//! * [`emission`] — angular emission spectra into both half-spaces, total
//!   radiated power (dissipated-power integral) and collection efficiency.
//! * [`design`] — efficiency maps over the (t, h) design plane, local
//!   optimization and fabrication-tolerance analysis.
//! * [`bfp`] — back-focal-plane intensity profiles, instrument-resolution
//!   smoothing and raster images.
//! * [`photophysics`] — three-level rate equations, g²(τ) model and fitting,
//!   stochastic photon-stream simulation and the photon-budget accounting.
//!
//! All numerics are generic over the scalar type through the [`Real`] trait;
//! concrete `f64` (and a few `f32`) aliases are exported at the crate root.
//! Lengths are nanometers, wavenumbers nm⁻¹, rates s⁻¹; angles are radians
//! everywhere inside the crate.

pub mod bfp;
pub mod design;
pub mod emission;
mod error;
pub mod photophysics;
mod quad;
mod real;
mod special;
pub mod stack;

pub use error::Error;
pub use quad::QuadConfig;
pub use real::{convert, Real};

pub type Result<T> = std::result::Result<T, Error>;

pub type Layer64 = stack::Layer<f64>;
pub type HalfSpace64 = stack::HalfSpace<f64>;
pub type LayerStack64 = stack::LayerStack<f64>;
pub type PlaneWaveState64 = stack::PlaneWaveState<f64>;
pub type AngularSpectrum64 = emission::AngularSpectrum<f64>;
pub type RadiatedPower64 = emission::RadiatedPower<f64>;
pub type ObjectiveGeometry64 = emission::ObjectiveGeometry<f64>;
pub type AntennaTemplate64 = design::AntennaTemplate<f64>;
pub type EfficiencyMap64 = design::EfficiencyMap<f64>;
pub type DesignOptimum64 = design::DesignOptimum<f64>;
pub type BfpProfile64 = bfp::BfpProfile<f64>;
pub type BfpImage64 = bfp::BfpImage<f64>;
pub type ThreeLevelRates64 = photophysics::ThreeLevelRates<f64>;
pub type Populations64 = photophysics::Populations<f64>;
pub type G2Curve64 = photophysics::G2Curve<f64>;
pub type G2Fit64 = photophysics::G2Fit<f64>;
pub type TimeTrace64 = photophysics::TimeTrace<f64>;
pub type PhotonBudget64 = photophysics::PhotonBudget<f64>;

pub type LayerStack32 = stack::LayerStack<f32>;
pub type AngularSpectrum32 = emission::AngularSpectrum<f32>;
pub type ThreeLevelRates32 = photophysics::ThreeLevelRates<f32>;
