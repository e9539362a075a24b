//! Physical constants shared by the geometry and link-budget code.

/// Mean Earth radius (m), spherical Earth.
pub const EARTH_RADIUS_M: f64 = 6.371e6;
/// Gravitational constant (m^3 kg^-1 s^-2).
pub const GRAVITATIONAL_CONSTANT: f64 = 6.674e-11;
/// Earth mass (kg).
pub const EARTH_MASS_KG: f64 = 5.972e24;
/// G * M_E (m^3/s^2).
pub const EARTH_MU: f64 = GRAVITATIONAL_CONSTANT * EARTH_MASS_KG;
/// Sidereal rotation rate of the Earth (rad/s).
pub const EARTH_ROTATION_RATE: f64 = 7.2921159e-5;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.998e8;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380649e-23;
