//! Physical constants carried through a computation.

use crate::error::{Error, Result};

/// Reduced Planck constant, particle mass and light speed.
///
/// The numerical core is unit-agnostic; natural units `hbar = mass = 1` are
/// the default. `light_speed` is only consulted by the scales calculator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
    pub light_speed: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            hbar: 1.0,
            mass: 1.0,
            light_speed: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64, light_speed: f64) -> Result<Self> {
        let p = PhysicalParams {
            hbar,
            mass,
            light_speed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("light_speed", self.light_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Nelson diffusivity `hbar / 2m`.
    pub fn diffusivity(&self) -> f64 {
        self.hbar / (2.0 * self.mass)
    }
}
