//! Physical constants (CODATA 2018) and species data.

/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Electron mass [kg].
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Unified atomic mass unit [kg].
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Rb-87 ion mass [kg], taken as 86.909 u.
pub const RB87_ION_MASS: f64 = 86.909 * ATOMIC_MASS_UNIT;

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Gauss to tesla.
pub const GAUSS: f64 = 1e-4;

/// Electron volt [J].
pub const ELECTRON_VOLT: f64 = ELEMENTARY_CHARGE;
