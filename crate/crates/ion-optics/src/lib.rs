//! Simulation toolkit for a compact ion-optical correlation detector.
//!
//! The library covers the full chain from a declarative electrode geometry to
//! detector-plane statistics:
//!
//! * [`geometry`] — electrode stack description, validation and rasterization
//!   into a labeled voxel domain with Dirichlet boundary flags.
//! * [`fieldsolve`] — finite-difference Laplace solver producing one
//!   unit-voltage basis potential per electrode, superposition and field
//!   interpolation, and a binary basis cache.
//! * [`multipole`] — exact algebra between four segment voltages and
//!   monopole/dipole/quadrupole terms, plus ideal near-axis field formulas.
//! * [`tracer`] — charged-particle integration through static or time-ramped
//!   electric fields and uniform magnetic fields.
//! * [`imaging`] — characterization scans: magnification, deflection,
//!   extraction region, single-axis magnification, image alignment, depth of
//!   field, magnetic-field distortions and stray-field compensation.
//! * [`coincidence`] — electron-then-ion coincidence sequences with switched
//!   voltage ramps and detection-efficiency estimation.
//!
//! All quantities are SI (meters, seconds, volts, kilograms, tesla) unless a
//! field name says otherwise. The optical axis is `z`, the chip surface sits
//! at `z = 0` and the detector lies at negative `z`.
//!
//! Data-parallel inner loops (relaxation sweeps, batch traces, scan cells) run
//! on rayon when the default `parallel` feature is enabled and fall back to
//! sequential loops otherwise. Results are identical either way.

pub mod coincidence;
pub mod constants;
pub mod error;
pub mod exec;
pub mod fieldsolve;
pub mod geometry;
pub mod imaging;
pub mod multipole;
pub mod svg;
pub mod tracer;

pub use error::{Error, Result};
