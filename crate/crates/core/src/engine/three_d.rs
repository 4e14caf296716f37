use rayon::prelude::*;

use super::{Propagate, UpdateCoefficients};
use crate::error::{Error, Result};
use crate::excitation::SoftSource;

const MIN_CHUNK: usize = 256;

/// Derivative axes of the two split parts of each component.
pub const SUB_AXES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

/// Levi-Civita symbol for a permutation of (0, 1, 2).
fn levi(c: usize, k: usize, f: usize) -> f64 {
    match (c, k, f) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        _ => -1.0,
    }
}

/// Full 3D split-field state. `e[c][s]` is the part of component `c` driven
/// by the derivative along `SUB_AXES[c][s]` and damped by the conductivity of
/// that axis; `h`, `j` and `m` follow the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitFieldState3D {
    pub e: [[Vec<f64>; 2]; 3],
    pub j: [[Vec<f64>; 2]; 3],
    pub h: [[Vec<f64>; 2]; 3],
    pub m: [[Vec<f64>; 2]; 3],
    pub step: u64,
}

fn zeros(n: usize) -> [[Vec<f64>; 2]; 3] {
    std::array::from_fn(|_| [vec![0.0; n], vec![0.0; n]])
}

impl SplitFieldState3D {
    pub fn zeros(electric: usize, magnetic: usize) -> Self {
        Self { e: zeros(electric), j: zeros(electric), h: zeros(magnetic), m: zeros(magnetic), step: 0 }
    }

    pub fn for_coefficients(c: &UpdateCoefficients) -> Self {
        Self::zeros(c.electric_len(), c.magnetic_len())
    }

    /// Physical electric component `c` at a node.
    pub fn e_at(&self, c: usize, node: usize) -> f64 {
        self.e[c][0][node] + self.e[c][1][node]
    }

    pub fn h_at(&self, c: usize, node: usize) -> f64 {
        self.h[c][0][node] + self.h[c][1][node]
    }

    fn all_finite(&self) -> bool {
        [&self.e, &self.j, &self.h, &self.m]
            .iter()
            .all(|fam| fam.iter().flatten().all(|a| a.iter().all(|v| v.is_finite())))
    }
}

/// Advances the 3D state by one step with the same phase order as the TM
/// kernel: six H parts, six M parts, six E parts, six J parts, source.
pub fn step_3d(state: &mut SplitFieldState3D, c: &UpdateCoefficients, source: Option<&SoftSource>) -> Result<()> {
    let hc = &c.magnetic;
    let ec = &c.electric;

    for comp in 0..3 {
        for s in 0..2 {
            let k = SUB_AXES[comp][s];
            let f = 3 - comp - k;
            let sign = -levi(comp, k, f);
            let (ef0, ef1) = (&state.e[f][0], &state.e[f][1]);
            let m = &state.m[comp][s];
            state.h[comp][s].par_iter_mut().enumerate().with_min_len(MIN_CHUNK).for_each(|(i, h)| {
                let curl = c.e_to_h.apply_pair(i, k, ef0, ef1);
                *h = hc.a_minus[k][i] * *h + hc.a_plus[k][i] * hc.dt_over_xi * (sign * curl - m[i]);
            });
        }
    }

    for comp in 0..3 {
        for s in 0..2 {
            let h = &state.h[comp][s];
            state.m[comp][s].par_iter_mut().enumerate().with_min_len(MIN_CHUNK).for_each(|(i, m)| {
                *m = hc.c1[i] * *m + hc.c2[i] * h[i];
            });
        }
    }

    for comp in 0..3 {
        for s in 0..2 {
            let k = SUB_AXES[comp][s];
            let f = 3 - comp - k;
            let sign = levi(comp, k, f);
            let (hf0, hf1) = (&state.h[f][0], &state.h[f][1]);
            let j = &state.j[comp][s];
            state.e[comp][s].par_iter_mut().enumerate().with_min_len(MIN_CHUNK).for_each(|(i, e)| {
                if c.fixed_electric[i] {
                    return;
                }
                let curl = c.h_to_e.apply_pair(i, k, hf0, hf1);
                *e = ec.a_minus[k][i] * *e + ec.a_plus[k][i] * ec.dt_over_xi * (sign * curl - j[i]);
            });
        }
    }

    for comp in 0..3 {
        for s in 0..2 {
            let e = &state.e[comp][s];
            state.j[comp][s].par_iter_mut().enumerate().with_min_len(MIN_CHUNK).for_each(|(i, j)| {
                *j = ec.c1[i] * *j + ec.c2[i] * e[i];
            });
        }
    }

    state.step += 1;
    if let Some(src) = source {
        let [ezx, ezy] = &mut state.e[2];
        src.inject(ezx, ezy, state.step as f64 * c.dt, c.dt);
    }

    if !state.all_finite() {
        return Err(Error::NonFinite { step: state.step });
    }
    Ok(())
}

impl Propagate for SplitFieldState3D {
    fn advance(&mut self, coeffs: &UpdateCoefficients, source: Option<&SoftSource>) -> Result<()> {
        step_3d(self, coeffs, source)
    }

    fn e_z_at(&self, node: usize) -> f64 {
        self.e_at(2, node)
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
