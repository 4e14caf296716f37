use rayon::prelude::*;

use super::{all_finite, Propagate, UpdateCoefficients};
use crate::error::{Error, Result};
use crate::excitation::SoftSource;

const MIN_CHUNK: usize = 256;

/// 2D TM state: split `E_z` with its currents on electric nodes, `H_x`, `H_y`
/// with magnetic currents on magnetic nodes.
///
/// `E_zx` is driven by `dH_y/dx` and damped by `sigma_ex`; `E_zy` by
/// `-dH_x/dy` and `sigma_ey`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitFieldStateTM {
    pub e_zx: Vec<f64>,
    pub e_zy: Vec<f64>,
    pub j_zx: Vec<f64>,
    pub j_zy: Vec<f64>,
    pub h_x: Vec<f64>,
    pub h_y: Vec<f64>,
    pub m_x: Vec<f64>,
    pub m_y: Vec<f64>,
    pub step: u64,
}

impl SplitFieldStateTM {
    pub fn zeros(electric: usize, magnetic: usize) -> Self {
        Self {
            e_zx: vec![0.0; electric],
            e_zy: vec![0.0; electric],
            j_zx: vec![0.0; electric],
            j_zy: vec![0.0; electric],
            h_x: vec![0.0; magnetic],
            h_y: vec![0.0; magnetic],
            m_x: vec![0.0; magnetic],
            m_y: vec![0.0; magnetic],
            step: 0,
        }
    }

    pub fn for_coefficients(c: &UpdateCoefficients) -> Self {
        Self::zeros(c.electric_len(), c.magnetic_len())
    }

    /// Physical `E_z = E_zx + E_zy` at every electric node.
    pub fn e_z(&self) -> Vec<f64> {
        self.e_zx.iter().zip(&self.e_zy).map(|(a, b)| a + b).collect()
    }

    /// Sets `E_z` at a node, split evenly between the two components.
    pub fn set_e_z(&mut self, node: usize, value: f64) {
        self.e_zx[node] = 0.5 * value;
        self.e_zy[node] = 0.5 * value;
    }

    pub fn time(&self, dt: f64) -> f64 {
        self.step as f64 * dt
    }
}

/// Advances the state from step `q` to `q + 1`:
/// H (q-1/2 -> q+1/2), M (q -> q+1), E (q -> q+1), J (q+1/2 -> q+3/2), then
/// the soft source at `t = (q+1) dt`.
pub fn step_tm(state: &mut SplitFieldStateTM, c: &UpdateCoefficients, source: Option<&SoftSource>) -> Result<()> {
    let SplitFieldStateTM { e_zx, e_zy, j_zx, j_zy, h_x, h_y, m_x, m_y, step } = state;
    let hc = &c.magnetic;
    let ec = &c.electric;

    // magnetic field
    {
        let (e_zx, e_zy) = (&*e_zx, &*e_zy);
        let (m_x, m_y) = (&*m_x, &*m_y);
        h_x.par_iter_mut()
            .zip(h_y.par_iter_mut())
            .enumerate()
            .with_min_len(MIN_CHUNK)
            .for_each(|(i, (hx, hy))| {
                let dez_dx = c.e_to_h.apply_pair(i, 0, e_zx, e_zy);
                *hy = hc.a_minus[0][i] * *hy + hc.a_plus[0][i] * hc.dt_over_xi * (dez_dx - m_y[i]);
                let dez_dy = c.e_to_h.apply_pair(i, 1, e_zx, e_zy);
                *hx = hc.a_minus[1][i] * *hx + hc.a_plus[1][i] * hc.dt_over_xi * (-dez_dy - m_x[i]);
            });
    }

    // magnetic currents
    {
        let (h_x, h_y) = (&*h_x, &*h_y);
        m_x.par_iter_mut()
            .zip(m_y.par_iter_mut())
            .enumerate()
            .with_min_len(MIN_CHUNK)
            .for_each(|(i, (mx, my))| {
                *my = hc.c1[i] * *my + hc.c2[i] * h_y[i];
                *mx = hc.c1[i] * *mx + hc.c2[i] * h_x[i];
            });
    }

    // electric field
    {
        let (h_x, h_y) = (&*h_x, &*h_y);
        let (j_zx, j_zy) = (&*j_zx, &*j_zy);
        e_zx.par_iter_mut()
            .zip(e_zy.par_iter_mut())
            .enumerate()
            .with_min_len(MIN_CHUNK)
            .for_each(|(i, (ex, ey))| {
                if c.fixed_electric[i] {
                    return;
                }
                let dhy_dx = c.h_to_e.apply(i, 0, h_y);
                *ex = ec.a_minus[0][i] * *ex + ec.a_plus[0][i] * ec.dt_over_xi * (dhy_dx - j_zx[i]);
                let dhx_dy = c.h_to_e.apply(i, 1, h_x);
                *ey = ec.a_minus[1][i] * *ey + ec.a_plus[1][i] * ec.dt_over_xi * (-dhx_dy - j_zy[i]);
            });
    }

    // electric currents
    {
        let (e_zx, e_zy) = (&*e_zx, &*e_zy);
        j_zx.par_iter_mut()
            .zip(j_zy.par_iter_mut())
            .enumerate()
            .with_min_len(MIN_CHUNK)
            .for_each(|(i, (jx, jy))| {
                *jx = ec.c1[i] * *jx + ec.c2[i] * e_zx[i];
                *jy = ec.c1[i] * *jy + ec.c2[i] * e_zy[i];
            });
    }

    *step += 1;
    if let Some(src) = source {
        src.inject(e_zx, e_zy, *step as f64 * c.dt, c.dt);
    }

    if !all_finite(&[e_zx, e_zy, h_x, h_y, j_zx, j_zy, m_x, m_y]) {
        return Err(Error::NonFinite { step: *step });
    }
    Ok(())
}

impl Propagate for SplitFieldStateTM {
    fn advance(&mut self, coeffs: &UpdateCoefficients, source: Option<&SoftSource>) -> Result<()> {
        step_tm(self, coeffs, source)
    }

    fn e_z_at(&self, node: usize) -> f64 {
        self.e_zx[node] + self.e_zy[node]
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
