//! Drude dispersion for the left-handed slab.
//!
//! Time dependence is `exp(+j w t)`, so the Drude denominator is
//! `w^2 - j gamma w`.

use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::lattice::{NodeLattice, Point};

/// Minimal complex number for constitutive parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    pub fn div(self, o: Complex) -> Self {
        let d = o.re * o.re + o.im * o.im;
        Self::new((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrudeMedium {
    /// Plasma frequency (rad/s).
    pub plasma_frequency: f64,
    /// Collision frequency (1/s).
    pub collision_frequency: f64,
    pub eps0: f64,
    pub mu0: f64,
}

impl DrudeMedium {
    pub fn new(plasma_frequency: f64, collision_frequency: f64) -> Result<Self> {
        if !(plasma_frequency >= 0.0) || !(collision_frequency >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Drude frequencies must be non-negative (omega_p = {plasma_frequency}, gamma = {collision_frequency})"
            )));
        }
        Ok(Self { plasma_frequency, collision_frequency, eps0: EPS0, mu0: MU0 })
    }

    pub fn vacuum() -> Self {
        Self { plasma_frequency: 0.0, collision_frequency: 0.0, eps0: EPS0, mu0: MU0 }
    }

    /// `1 - w_p^2 / (w^2 - j gamma w)`.
    fn relative(&self, omega: f64) -> Result<Complex> {
        if self.plasma_frequency == 0.0 {
            return Ok(Complex::new(1.0, 0.0));
        }
        if omega == 0.0 && self.collision_frequency == 0.0 {
            return Err(Error::DispersionPole);
        }
        let wp2 = self.plasma_frequency * self.plasma_frequency;
        let term = Complex::new(wp2, 0.0).div(Complex::new(omega * omega, -self.collision_frequency * omega));
        Ok(Complex::new(1.0 - term.re, -term.im))
    }

    /// Complex permittivity (F/m).
    pub fn permittivity(&self, omega: f64) -> Result<Complex> {
        Ok(self.relative(omega)?.scale(self.eps0))
    }

    /// Complex permeability (H/m); same Drude law as the permittivity.
    pub fn permeability(&self, omega: f64) -> Result<Complex> {
        Ok(self.relative(omega)?.scale(self.mu0))
    }

    pub fn is_dispersive(&self) -> bool {
        self.plasma_frequency > 0.0
    }
}

/// Plasma frequency giving relative permittivity `target` at `omega0` for a
/// lossless Drude medium.
pub fn lh_plasma_frequency_for(omega0: f64, target: f64) -> Result<f64> {
    if !(target < 1.0) {
        return Err(Error::InvalidArgument(format!("target relative permittivity must be < 1, got {target}")));
    }
    Ok(omega0 * (1.0 - target).sqrt())
}

/// Slab occupying `y in [y_min, y_max]` across the full domain width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabGeometry {
    pub y_min: f64,
    pub y_max: f64,
}

impl SlabGeometry {
    pub fn centered(center_y: f64, thickness: f64) -> Self {
        Self { y_min: center_y - 0.5 * thickness, y_max: center_y + 0.5 * thickness }
    }

    pub fn thickness(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Boundary-coincident points count as inside.
    pub fn contains(&self, p: &Point) -> bool {
        // tolerance absorbs rounding of lattice coordinates
        let eps = 1e-9 * self.thickness().abs().max(1e-12);
        p[1] >= self.y_min - eps && p[1] <= self.y_max + eps
    }
}

/// Medium assignment for every electric and magnetic node as the fraction of
/// the node's cell filled by the slab medium.
#[derive(Clone, Debug)]
pub struct MaterialMap {
    pub slab: Option<SlabGeometry>,
    pub medium: DrudeMedium,
    pub electric: Vec<f64>,
    pub magnetic: Vec<f64>,
}

impl MaterialMap {
    pub fn vacuum(electric: &NodeLattice, magnetic: &NodeLattice) -> Self {
        Self { slab: None, medium: DrudeMedium::vacuum(), electric: vec![0.0; electric.len()], magnetic: vec![0.0; magnetic.len()] }
    }

    /// Marks slab nodes, including those in the side absorber columns so the
    /// slab never ends against vacuum. Nodes lying on a slab face get fill
    /// `face_fill`, all other slab nodes 1.
    pub fn with_slab(
        electric: &NodeLattice,
        magnetic: &NodeLattice,
        slab: SlabGeometry,
        medium: DrudeMedium,
        face_fill: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&face_fill) {
            return Err(Error::InvalidArgument(format!("face fill {face_fill} outside [0, 1]")));
        }
        let eps = 1e-9 * slab.thickness().abs().max(1e-12);
        let mark = |l: &NodeLattice| -> Vec<f64> {
            l.positions()
                .iter()
                .map(|p| {
                    if !slab.contains(p) {
                        0.0
                    } else if (p[1] - slab.y_min).abs() <= eps || (p[1] - slab.y_max).abs() <= eps {
                        face_fill
                    } else {
                        1.0
                    }
                })
                .collect()
        };
        Ok(Self { slab: Some(slab), medium, electric: mark(electric), magnetic: mark(magnetic) })
    }

    fn medium_for(&self, fill: f64) -> DrudeMedium {
        if fill <= 0.0 {
            DrudeMedium::vacuum()
        } else {
            // a partly filled cell carries the volume-weighted susceptibility
            DrudeMedium { plasma_frequency: self.medium.plasma_frequency * fill.sqrt(), ..self.medium }
        }
    }

    /// Medium at an electric node.
    pub fn electric_medium(&self, node: usize) -> DrudeMedium {
        self.medium_for(self.electric[node])
    }

    pub fn magnetic_medium(&self, node: usize) -> DrudeMedium {
        self.medium_for(self.magnetic[node])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::StaggeredLattice;
    use std::f64::consts::PI;

    const W0: f64 = 2.0 * PI * 30e9;

    #[test]
    fn lens_plasma_frequency_gives_minus_one() {
        let m = DrudeMedium::new(2.666e11, 0.0).unwrap();
        let eps = m.permittivity(W0).unwrap();
        let mu = m.permeability(W0).unwrap();
        assert!((eps.re / EPS0 + 1.0).abs() < 0.01);
        assert!((mu.re / MU0 + 1.0).abs() < 0.01);
        assert_eq!(eps.im, 0.0);
    }

    #[test]
    fn vacuum_medium_is_background() {
        let m = DrudeMedium::new(0.0, 1e9).unwrap();
        for w in [1.0, 1e9, 1e15] {
            assert_eq!(m.permittivity(w).unwrap(), Complex::new(EPS0, 0.0));
            assert_eq!(m.permeability(w).unwrap(), Complex::new(MU0, 0.0));
        }
    }

    #[test]
    fn ten_times_plasma_frequency() {
        let m = DrudeMedium::new(1e10, 0.0).unwrap();
        let e = m.permittivity(1e11).unwrap();
        assert!((e.re / EPS0 - 0.99).abs() < 1e-12);
    }

    #[test]
    fn pole_is_an_error() {
        let m = DrudeMedium::new(1e10, 0.0).unwrap();
        assert!(matches!(m.permittivity(0.0), Err(Error::DispersionPole)));
        let lossy = DrudeMedium::new(1e10, 1e9).unwrap();
        assert!(lossy.permittivity(0.0).is_ok());
        assert!(DrudeMedium::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn loss_gives_negative_imaginary_part() {
        // exp(+jwt) convention: passive media have Im(eps) < 0
        let m = DrudeMedium::new(2.666e11, 1e9).unwrap();
        assert!(m.permittivity(W0).unwrap().im < 0.0);
    }

    #[test]
    fn plasma_frequency_inversion() {
        let wp = lh_plasma_frequency_for(W0, -1.0).unwrap();
        assert!((wp / 2.666e11 - 1.0).abs() < 1e-3);
        assert!((wp - 2f64.sqrt() * W0).abs() < 1e-3);
        assert_eq!(lh_plasma_frequency_for(W0, 0.0).unwrap(), W0);
        assert!((lh_plasma_frequency_for(1.0, 0.99).unwrap() - 0.1).abs() < 1e-12);
        assert!(lh_plasma_frequency_for(1.0, 1.0).is_err());
    }

    #[test]
    fn lossless_reality_and_matched_impedance() {
        let lossless = DrudeMedium::new(2.666e11, 0.0).unwrap();
        let lossy = DrudeMedium::new(2.666e11, 3e9).unwrap();
        for k in 1..200 {
            let w = k as f64 * 2e9 * PI;
            if (w - 2.666e11).abs() < 1.0 {
                continue;
            }
            assert_eq!(lossless.permittivity(w).unwrap().im, 0.0);
            assert_eq!(lossless.permeability(w).unwrap().im, 0.0);
            for m in [lossless, lossy] {
                let e = m.permittivity(w).unwrap();
                let u = m.permeability(w).unwrap();
                let ratio = u.div(e);
                assert!((ratio.re / (MU0 / EPS0) - 1.0).abs() < 1e-12);
                assert!(ratio.im.abs() / (MU0 / EPS0) < 1e-12);
            }
        }
    }

    #[test]
    fn high_frequency_limit() {
        let m = DrudeMedium::new(2.666e11, 1e9).unwrap();
        let e = m.permittivity(1e3 * 2.666e11).unwrap();
        assert!((e.re / EPS0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn slab_assignment_includes_faces_and_side_pml_columns() {
        let lat = StaggeredLattice::build(&[0.03, 0.03], 61, 3).unwrap();
        let slab = SlabGeometry::centered(0.015, 0.01);
        let m = DrudeMedium::new(1.0, 0.0).unwrap();
        let map = MaterialMap::with_slab(&lat.electric, &lat.magnetic, slab, m, 1.0).unwrap();
        let e = &lat.electric;
        assert_eq!(map.electric[e.index_of(3, 20, 0)], 1.0);
        assert_eq!(map.electric[e.index_of(57, 40, 0)], 1.0);
        assert_eq!(map.electric[e.index_of(0, 30, 0)], 1.0);
        assert_eq!(map.electric[e.index_of(58, 30, 0)], 1.0);
        assert_eq!(map.electric[e.index_of(30, 19, 0)], 0.0);
        assert_eq!(map.electric[e.index_of(30, 41, 0)], 0.0);
        let h = &lat.magnetic;
        assert_eq!(map.magnetic[h.index_of(30, 20, 0)], 1.0);
        assert_eq!(map.magnetic[h.index_of(30, 39, 0)], 1.0);
        assert_eq!(map.magnetic[h.index_of(30, 19, 0)], 0.0);
        assert_eq!(map.magnetic[h.index_of(30, 40, 0)], 0.0);
        assert_eq!(map.electric_medium(e.index_of(30, 30, 0)), m);
        assert_eq!(map.electric_medium(e.index_of(30, 10, 0)), DrudeMedium::vacuum());
    }

    #[test]
    fn face_nodes_take_the_face_fill() {
        let lat = StaggeredLattice::build(&[0.03, 0.03], 61, 3).unwrap();
        let slab = SlabGeometry::centered(0.015, 0.01);
        let m = DrudeMedium::new(2.666e11, 1e9).unwrap();
        let map = MaterialMap::with_slab(&lat.electric, &lat.magnetic, slab, m, 0.5).unwrap();
        let e = &lat.electric;
        assert_eq!(map.electric[e.index_of(30, 20, 0)], 0.5);
        assert_eq!(map.electric[e.index_of(30, 40, 0)], 0.5);
        assert_eq!(map.electric[e.index_of(30, 21, 0)], 1.0);
        // half the plasma term: wp^2 scales with the fill
        let face = map.electric_medium(e.index_of(30, 20, 0));
        assert!((face.plasma_frequency.powi(2) - 0.5 * m.plasma_frequency.powi(2)).abs() < 1e-6 * m.plasma_frequency.powi(2));
        assert_eq!(face.collision_frequency, m.collision_frequency);
        assert!(MaterialMap::with_slab(&lat.electric, &lat.magnetic, slab, m, 1.5).is_err());
    }
}
