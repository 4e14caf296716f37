//! Graded split-field PML conductivities.

use crate::constants::{free_space_impedance, EPS0, MU0};
use crate::error::{Error, Result};
use crate::lattice::{NodeLattice, PmlDepthTag};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmlSpec {
    /// Polynomial grading order.
    pub order: u32,
    /// Theoretical normal-incidence reflection coefficient.
    pub reflection: f64,
    /// Background wave impedance (ohms).
    pub impedance: f64,
}

impl Default for PmlSpec {
    fn default() -> Self {
        Self { order: 2, reflection: 1e-3, impedance: free_space_impedance() }
    }
}

impl PmlSpec {
    pub fn new(order: u32, reflection: f64, impedance: f64) -> Result<Self> {
        if !(reflection > 0.0 && reflection < 1.0) {
            return Err(Error::InvalidArgument(format!("reflection coefficient must lie in (0, 1), got {reflection}")));
        }
        if !(impedance > 0.0) {
            return Err(Error::InvalidArgument(format!("impedance must be positive, got {impedance}")));
        }
        Ok(Self { order, reflection, impedance })
    }

    /// Peak electric conductivity (S/m) for a layer of `thickness` meters.
    pub fn sigma_max(&self, thickness: f64) -> f64 {
        -((self.order + 1) as f64) * self.reflection.ln() / (2.0 * self.impedance * thickness)
    }

    /// Electric conductivity at `depth` into a layer of `thickness`.
    pub fn graded_sigma(&self, thickness: f64, depth: f64) -> Result<f64> {
        if depth == 0.0 {
            return Ok(0.0);
        }
        if !(thickness > 0.0) || depth < 0.0 || depth > thickness * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("PML depth {depth} outside [0, {thickness}]")));
        }
        Ok(self.sigma_max(thickness) * (depth / thickness).powi(self.order as i32))
    }
}

/// Per-node electric (S/m) and magnetic (ohm/m) conductivities per axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConductivityField {
    pub electric: Vec<[f64; 3]>,
    pub magnetic: Vec<[f64; 3]>,
}

impl ConductivityField {
    pub fn zeros(len: usize) -> Self {
        Self { electric: vec![[0.0; 3]; len], magnetic: vec![[0.0; 3]; len] }
    }

    pub fn len(&self) -> usize {
        self.electric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electric.is_empty()
    }
}

/// Matched magnetic conductivity `sigma_m = sigma_e * mu / eps`.
pub fn matched_magnetic(sigma_e: f64) -> f64 {
    sigma_e * MU0 / EPS0
}

/// Conductivities from depth tags. Along each axis only the conductivity of
/// that axis departs from `interior`, so faces grade one component, edges
/// two and corners three.
pub fn assign_conductivities(tags: &[PmlDepthTag], spec: &PmlSpec, interior: [f64; 3]) -> Result<ConductivityField> {
    let mut field = ConductivityField::zeros(tags.len());
    for (n, tag) in tags.iter().enumerate() {
        let mut se = interior;
        for a in 0..3 {
            if tag.depth[a] > 0.0 {
                se[a] = spec.graded_sigma(tag.thickness[a], tag.depth[a])?;
            }
        }
        field.electric[n] = se;
        field.magnetic[n] = se.map(matched_magnetic);
    }
    Ok(field)
}

/// Convenience wrapper over a lattice's own tags with a free-space interior.
pub fn lattice_conductivities(lattice: &NodeLattice, spec: &PmlSpec) -> Result<ConductivityField> {
    assign_conductivities(lattice.tags(), spec, [0.0; 3])
}
