//! Physical constants in SI units.

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Speed of light in vacuum (m/s), consistent with [`EPS0`] and [`MU0`].
pub fn light_speed() -> f64 {
    1.0 / (EPS0 * MU0).sqrt()
}

/// Free-space wave impedance (ohms).
pub fn free_space_impedance() -> f64 {
    (MU0 / EPS0).sqrt()
}
