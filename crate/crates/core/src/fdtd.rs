//! Dispersive 2D TM Yee-grid FDTD used as the reference solution.
//!
//! `E_z` (split into `E_zx + E_zy`) and the electric currents live at cell
//! centres `((i + 1/2) dx, (j + 1/2) dy)`; `H_x` sits on horizontal edges
//! `((i + 1/2) dx, j dy)` and `H_y` on vertical edges `(i dx, (j + 1/2) dy)`.
//! The outer walls are perfect conductors placed exactly on the domain
//! boundary: ghost cells hold the mirrored, negated `E_z`. The x axis may
//! instead be periodic. The phase order matches the meshless engine: H, M, E, J, source.
//!
//! Only the PML grading, the Drude parameters and the source waveform are
//! shared with the meshless solver; curls and update factors are computed
//! here independently.

use rayon::prelude::*;

use crate::constants::{light_speed, EPS0, MU0};
use crate::error::{Error, Result};
use crate::excitation::{WindowedSine, FOOTPRINT_CUTOFF};
use crate::media::{DrudeMedium, SlabGeometry};
use crate::pml::{matched_magnetic, PmlSpec};

const MIN_ROWS: usize = 8;

/// Grid and material description of a reference run.
#[derive(Clone, Debug, PartialEq)]
pub struct YeeSetup {
    /// Domain size `[Lx, Ly]` (m).
    pub extents: [f64; 2],
    /// Target cell size; each axis uses the largest size not above it that
    /// divides the extent evenly.
    pub cell: f64,
    /// Fraction of the 2D Courant limit.
    pub courant: f64,
    pub pml: PmlSpec,
    /// PML thickness along x and y (m); zero disables the layer on that axis.
    pub pml_thickness: [f64; 2],
    pub slab: Option<SlabGeometry>,
    pub medium: DrudeMedium,
    pub periodic_x: bool,
}

impl YeeSetup {
    pub fn vacuum(extents: [f64; 2], cell: f64) -> Self {
        Self {
            extents,
            cell,
            courant: 0.95,
            pml: PmlSpec::default(),
            pml_thickness: [0.0; 2],
            slab: None,
            medium: DrudeMedium::vacuum(),
            periodic_x: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Lossy {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl Lossy {
    fn from_sigma(sigma: &[f64], xi: f64, dt: f64) -> Self {
        let mut out = Lossy::default();
        for &s in sigma {
            let r = s * dt / (2.0 * xi);
            out.plus.push(1.0 / (1.0 + r));
            out.minus.push((1.0 - r) / (1.0 + r));
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Ade {
    c1: Vec<f64>,
    c2: Vec<f64>,
}

impl Ade {
    /// `fill` is the fraction of each node's cell occupied by the medium;
    /// partially filled cells get a proportionally weaker plasma term.
    fn from_fill(fill: &[f64], medium: &DrudeMedium, xi: f64, dt: f64) -> Self {
        let g = medium.collision_frequency * dt / 2.0;
        let wp2 = medium.plasma_frequency * medium.plasma_frequency;
        let mut out = Ade::default();
        for &f in fill {
            if f > 0.0 {
                out.c1.push((1.0 - g) / (1.0 + g));
                out.c2.push(f * xi * dt * wp2 / (1.0 + g));
            } else {
                out.c1.push(1.0);
                out.c2.push(0.0);
            }
        }
        out
    }
}

/// 2D TM Yee grid with split `E_z`, ADE Drude currents and split-field PML.
#[derive(Clone, Debug)]
pub struct YeeGridTM {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub periodic_x: bool,
    /// Cell-centred arrays, index `i + nx * j`.
    pub e_zx: Vec<f64>,
    pub e_zy: Vec<f64>,
    pub j_zx: Vec<f64>,
    pub j_zy: Vec<f64>,
    /// `nx * (ny + 1)` values, index `i + nx * j`.
    pub h_x: Vec<f64>,
    pub m_x: Vec<f64>,
    /// `(nx + 1) * ny` values, index `i + (nx + 1) * j`.
    pub h_y: Vec<f64>,
    pub m_y: Vec<f64>,
    pub step: u64,
    ex_loss: Lossy,
    ey_loss: Lossy,
    e_ade: Ade,
    hx_loss: Lossy,
    hx_ade: Ade,
    hy_loss: Lossy,
    hy_ade: Ade,
}

/// Distance into the layer of thickness `t` at coordinate `u` of `[0, l]`.
fn layer_depth(u: f64, l: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (t - u).max(u - (l - t)).clamp(0.0, t)
}

fn cells(extent: f64, target: f64) -> Result<usize> {
    if !(extent > 0.0 && target > 0.0) {
        return Err(Error::InvalidArgument(format!("grid extent {extent} and cell size {target} must be positive")));
    }
    let n = (extent / target * (1.0 - 1e-12)).ceil() as usize;
    Ok(n.max(1))
}

impl YeeGridTM {
    pub fn new(setup: &YeeSetup) -> Result<Self> {
        let [lx, ly] = setup.extents;
        let nx = cells(lx, setup.cell)?;
        let ny = cells(ly, setup.cell)?;
        let (dx, dy) = (lx / nx as f64, ly / ny as f64);
        if !(setup.courant > 0.0 && setup.courant <= 1.0) {
            return Err(Error::InvalidArgument(format!("Courant factor {} outside (0, 1]", setup.courant)));
        }
        let limit = 1.0 / (light_speed() * (1.0 / (dx * dx) + 1.0 / (dy * dy)).sqrt());
        let dt = setup.courant * limit;
        let [tx, ty] = setup.pml_thickness;
        if setup.periodic_x && tx > 0.0 {
            return Err(Error::InvalidArgument("a periodic x axis cannot carry a PML".into()));
        }
        if 2.0 * tx >= lx || 2.0 * ty >= ly || tx < 0.0 || ty < 0.0 {
            return Err(Error::InvalidArgument(format!("PML thickness {tx}, {ty} does not fit the domain")));
        }
        let sigma = |u: f64, l: f64, t: f64| -> Result<f64> {
            let d = layer_depth(u, l, t);
            if d > 0.0 { setup.pml.graded_sigma(t, d) } else { Ok(0.0) }
        };
        // share of the dual cell `[y - dy/2, y + dy/2]` covered by the slab
        let in_slab = |y: f64| -> f64 {
            match setup.slab {
                Some(s) => {
                    let lo = (y - 0.5 * dy).max(s.y_min);
                    let hi = (y + 0.5 * dy).min(s.y_max);
                    ((hi - lo) / dy).clamp(0.0, 1.0)
                }
                _ => 0.0,
            }
        };

        let xc = |i: usize| (i as f64 + 0.5) * dx;
        let yc = |j: usize| (j as f64 + 0.5) * dy;

        let mut sx = Vec::with_capacity(nx * ny);
        let mut sy = Vec::with_capacity(nx * ny);
        let mut e_in = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                sx.push(sigma(xc(i), lx, tx)?);
                sy.push(sigma(yc(j), ly, ty)?);
                e_in.push(in_slab(yc(j)));
            }
        }
        let mut shx = Vec::with_capacity(nx * (ny + 1));
        let mut hx_in = Vec::with_capacity(nx * (ny + 1));
        for j in 0..=ny {
            for _ in 0..nx {
                let y = j as f64 * dy;
                shx.push(matched_magnetic(sigma(y, ly, ty)?));
                hx_in.push(in_slab(y));
            }
        }
        let mut shy = Vec::with_capacity((nx + 1) * ny);
        let mut hy_in = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            for i in 0..=nx {
                let x = i as f64 * dx;
                shy.push(matched_magnetic(sigma(x, lx, tx)?));
                hy_in.push(in_slab(yc(j)));
            }
        }

        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            dt,
            periodic_x: setup.periodic_x,
            e_zx: vec![0.0; nx * ny],
            e_zy: vec![0.0; nx * ny],
            j_zx: vec![0.0; nx * ny],
            j_zy: vec![0.0; nx * ny],
            h_x: vec![0.0; nx * (ny + 1)],
            m_x: vec![0.0; nx * (ny + 1)],
            h_y: vec![0.0; (nx + 1) * ny],
            m_y: vec![0.0; (nx + 1) * ny],
            step: 0,
            ex_loss: Lossy::from_sigma(&sx, EPS0, dt),
            ey_loss: Lossy::from_sigma(&sy, EPS0, dt),
            e_ade: Ade::from_fill(&e_in, &setup.medium, EPS0, dt),
            hx_loss: Lossy::from_sigma(&shx, MU0, dt),
            hx_ade: Ade::from_fill(&hx_in, &setup.medium, MU0, dt),
            hy_loss: Lossy::from_sigma(&shy, MU0, dt),
            hy_ade: Ade::from_fill(&hy_in, &setup.medium, MU0, dt),
        })
    }

    pub fn extents(&self) -> [f64; 2] {
        [self.nx as f64 * self.dx, self.ny as f64 * self.dy]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy]
    }

    /// `E_z` at cell `(i, j)`.
    pub fn e_z(&self, i: usize, j: usize) -> f64 {
        let k = i + self.nx * j;
        self.e_zx[k] + self.e_zy[k]
    }

    /// `E_z` with the boundary rule applied one cell outside the grid.
    fn e_z_ext(&self, i: isize, j: isize) -> f64 {
        let ez = |i: usize, j: usize| self.e_z(i, j);
        ghosted(&ez, self.nx, self.ny, self.periodic_x, i, j)
    }

    /// Writes `f(x, y)` into `E_z` (split evenly) at every cell centre.
    pub fn set_e_z_with(&mut self, f: impl Fn(f64, f64) -> f64) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let [x, y] = self.cell_center(i, j);
                let k = i + self.nx * j;
                let v = f(x, y);
                self.e_zx[k] = 0.5 * v;
                self.e_zy[k] = 0.5 * v;
            }
        }
    }

    /// Writes `f(x, y)` into `H_x` at every horizontal edge.
    pub fn set_h_x_with(&mut self, f: impl Fn(f64, f64) -> f64) {
        for j in 0..=self.ny {
            for i in 0..self.nx {
                self.h_x[i + self.nx * j] = f((i as f64 + 0.5) * self.dx, j as f64 * self.dy);
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Bilinear interpolation of `E_z` at each point. Points between the
    /// outermost cell centres and the walls interpolate towards the wall
    /// value of the boundary rule.
    pub fn sample_at(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let [lx, ly] = self.extents();
        points
            .iter()
            .map(|&[x, y]| {
                let tol = 1e-12 * lx.max(ly);
                if !(x >= -tol && x <= lx + tol && y >= -tol && y <= ly + tol) {
                    return Err(Error::OutOfDomain { x, y });
                }
                let u = x / self.dx - 0.5;
                let v = y / self.dy - 0.5;
                let i0 = (u.floor() as isize).clamp(-1, self.nx as isize - 1);
                let j0 = (v.floor() as isize).clamp(-1, self.ny as isize - 1);
                let (fx, fy) = (u - i0 as f64, v - j0 as f64);
                Ok((1.0 - fx) * (1.0 - fy) * self.e_z_ext(i0, j0)
                    + fx * (1.0 - fy) * self.e_z_ext(i0 + 1, j0)
                    + (1.0 - fx) * fy * self.e_z_ext(i0, j0 + 1)
                    + fx * fy * self.e_z_ext(i0 + 1, j0 + 1))
            })
            .collect()
    }

    /// Source footprint centred at `center`: the containing cell for zero
    /// `width`, otherwise normalized Gaussian weights of standard deviation
    /// `width` (m).
    pub fn source(&self, center: [f64; 2], width: f64, signal: WindowedSine) -> Result<GridSource> {
        let [lx, ly] = self.extents();
        let [x, y] = center;
        if !(x >= 0.0 && x <= lx && y >= 0.0 && y <= ly) {
            return Err(Error::OutOfDomain { x, y });
        }
        let mut footprint = Vec::new();
        if width == 0.0 {
            let i = ((x / self.dx) as usize).min(self.nx - 1);
            let j = ((y / self.dy) as usize).min(self.ny - 1);
            footprint.push((i + self.nx * j, 1.0));
        } else if width > 0.0 {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let [cx, cy] = self.cell_center(i, j);
                    let w = (-((cx - x).powi(2) + (cy - y).powi(2)) / (2.0 * width * width)).exp();
                    if w >= FOOTPRINT_CUTOFF {
                        footprint.push((i + self.nx * j, w));
                    }
                }
            }
            let total: f64 = footprint.iter().map(|f| f.1).sum();
            footprint.iter_mut().for_each(|f| f.1 /= total);
        } else {
            return Err(Error::InvalidArgument(format!("source width must be non-negative, got {width}")));
        }
        Ok(GridSource { footprint, signal })
    }
}

/// Applies the wall rule to a cell index at most one cell outside the grid.
fn ghosted(ez: &impl Fn(usize, usize) -> f64, nx: usize, ny: usize, periodic_x: bool, i: isize, j: isize) -> f64 {
    let (n, m) = (nx as isize, ny as isize);
    let mut sign = 1.0;
    let i = if periodic_x {
        i.rem_euclid(n)
    } else if i < 0 {
        sign = -sign;
        -1 - i
    } else if i >= n {
        sign = -sign;
        2 * n - 1 - i
    } else {
        i
    };
    let j = if j < 0 {
        sign = -sign;
        -1 - j
    } else if j >= m {
        sign = -sign;
        2 * m - 1 - j
    } else {
        j
    };
    sign * ez(i as usize, j as usize)
}

/// Soft source on cell centres with weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSource {
    pub footprint: Vec<(usize, f64)>,
    pub signal: WindowedSine,
}

/// Advances the grid one step: H, M, E, J, then the source at the new time.
pub fn fdtd_step(g: &mut YeeGridTM, source: Option<&GridSource>) -> Result<()> {
    let (nx, ny) = (g.nx, g.ny);
    let (dx, dy, dt) = (g.dx, g.dy, g.dt);
    let ez: Vec<f64> = g.e_zx.iter().zip(&g.e_zy).map(|(a, b)| a + b).collect();
    let periodic = g.periodic_x;
    let cell = |i: usize, j: usize| ez[i + nx * j];
    let ez_at = |i: isize, j: isize| ghosted(&cell, nx, ny, periodic, i, j);
    let kh = dt / MU0;
    let ke = dt / EPS0;

    {
        let (loss, m) = (&g.hx_loss, &g.m_x);
        g.h_x.par_chunks_mut(nx).enumerate().with_min_len(MIN_ROWS).for_each(|(j, row)| {
            for (i, h) in row.iter_mut().enumerate() {
                let k = i + nx * j;
                let dez = (ez_at(i as isize, j as isize) - ez_at(i as isize, j as isize - 1)) / dy;
                *h = loss.minus[k] * *h + loss.plus[k] * kh * (-dez - m[k]);
            }
        });
    }
    {
        let (loss, m) = (&g.hy_loss, &g.m_y);
        g.h_y.par_chunks_mut(nx + 1).enumerate().with_min_len(MIN_ROWS).for_each(|(j, row)| {
            for (i, h) in row.iter_mut().enumerate() {
                let k = i + (nx + 1) * j;
                let dez = (ez_at(i as isize, j as isize) - ez_at(i as isize - 1, j as isize)) / dx;
                *h = loss.minus[k] * *h + loss.plus[k] * kh * (dez - m[k]);
            }
        });
    }

    for (m, h, ade) in [(&mut g.m_x, &g.h_x, &g.hx_ade), (&mut g.m_y, &g.h_y, &g.hy_ade)] {
        m.par_iter_mut().enumerate().with_min_len(256).for_each(|(k, m)| *m = ade.c1[k] * *m + ade.c2[k] * h[k]);
    }

    {
        let (hx, hy) = (&g.h_x, &g.h_y);
        let (lx, ly) = (&g.ex_loss, &g.ey_loss);
        let (jx, jy) = (&g.j_zx, &g.j_zy);
        g.e_zx
            .par_chunks_mut(nx)
            .zip(g.e_zy.par_chunks_mut(nx))
            .enumerate()
            .with_min_len(MIN_ROWS)
            .for_each(|(j, (rx, ry))| {
                for i in 0..nx {
                    let k = i + nx * j;
                    let dhy = (hy[i + 1 + (nx + 1) * j] - hy[i + (nx + 1) * j]) / dx;
                    let dhx = (hx[i + nx * (j + 1)] - hx[i + nx * j]) / dy;
                    rx[i] = lx.minus[k] * rx[i] + lx.plus[k] * ke * (dhy - jx[k]);
                    ry[i] = ly.minus[k] * ry[i] + ly.plus[k] * ke * (-dhx - jy[k]);
                }
            });
    }

    {
        let ade = &g.e_ade;
        for (j, e) in [(&mut g.j_zx, &g.e_zx), (&mut g.j_zy, &g.e_zy)] {
            j.par_iter_mut().enumerate().with_min_len(256).for_each(|(k, j)| *j = ade.c1[k] * *j + ade.c2[k] * e[k]);
        }
    }

    g.step += 1;
    if let Some(src) = source {
        let t = g.step as f64 * dt;
        let inc = src.signal.evaluate(t) * src.signal.angular_frequency() * dt;
        for &(k, w) in &src.footprint {
            g.e_zx[k] += 0.5 * w * inc;
            g.e_zy[k] += 0.5 * w * inc;
        }
    }

    let finite = [&g.e_zx, &g.e_zy, &g.j_zx, &g.j_zy, &g.h_x, &g.h_y, &g.m_x, &g.m_y]
        .iter()
        .all(|a| a.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(Error::NonFinite { step: g.step });
    }
    Ok(())
}
