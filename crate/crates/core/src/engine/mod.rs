//! Dispersive meshless leapfrog time stepping.
//!
//! Fields are split per derivative axis (Berenger). Each split component
//! carries its own Drude current density, advanced with the trapezoidal ADE
//! update. Magnetic quantities live at half steps, electric ones at integer
//! steps; electric currents sit at half steps and magnetic currents at
//! integer steps.
//!
//! Every phase writes one array family and reads only families finished in an
//! earlier phase, so node updates within a phase are independent and run in
//! parallel without affecting results.

mod operator;
mod three_d;
mod tm;

pub use operator::{StencilMode, StencilOperator, StencilRow};
pub use three_d::{step_3d, SplitFieldState3D};
pub use tm::{step_tm, SplitFieldStateTM};

use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::excitation::SoftSource;
use crate::lattice::StaggeredLattice;
use crate::media::{DrudeMedium, MaterialMap};
use crate::pml::ConductivityField;
use crate::rbf::RbfKernel;

/// Leapfrog step `(d_min / divisor) * sqrt(eps0 mu0)`. A divisor of 1 is the
/// stability bound itself.
pub fn step_size(d_min: f64, divisor: f64) -> Result<f64> {
    if !(d_min > 0.0) {
        return Err(Error::InvalidArgument(format!("node spacing must be positive, got {d_min}")));
    }
    if !(divisor >= 1.0) {
        return Err(Error::InvalidArgument(format!("time-step divisor {divisor} < 1 violates the stability bound")));
    }
    Ok(d_min / divisor * (EPS0 * MU0).sqrt())
}

/// `(a_plus, a_minus)` for a lossy leapfrog update with conductivity `sigma`
/// and material constant `xi` (eps0 or mu0).
pub fn loss_factors(sigma: f64, xi: f64, dt: f64) -> (f64, f64) {
    let s = sigma * dt / (2.0 * xi);
    (1.0 / (1.0 + s), (1.0 - s) / (1.0 + s))
}

/// `(c1, c2)` of the Drude current update `K' = c1 K + c2 F`, with `xi` the
/// background constant multiplying the driving field.
pub fn current_factors(medium: &DrudeMedium, xi: f64, dt: f64) -> (f64, f64) {
    let g = medium.collision_frequency * dt / 2.0;
    let wp = medium.plasma_frequency;
    ((1.0 - g) / (1.0 + g), xi * dt * wp * wp / (1.0 + g))
}

/// One trapezoidal ADE step.
#[inline]
pub fn advance_current(c1: f64, c2: f64, current: f64, drive: f64) -> f64 {
    c1 * current + c2 * drive
}

/// Per-node update factors of one field family.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldCoefficients {
    /// `a_plus[axis][node]`.
    pub a_plus: [Vec<f64>; 3],
    pub a_minus: [Vec<f64>; 3],
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    /// `dt / eps0` or `dt / mu0`.
    pub dt_over_xi: f64,
}

impl FieldCoefficients {
    fn build(sigma: &[[f64; 3]], media: &[DrudeMedium], xi: f64, dt: f64) -> Self {
        let n = sigma.len();
        let mut c = FieldCoefficients { dt_over_xi: dt / xi, ..Default::default() };
        for a in 0..3 {
            let (p, m): (Vec<f64>, Vec<f64>) = sigma.iter().map(|s| loss_factors(s[a], xi, dt)).unzip();
            c.a_plus[a] = p;
            c.a_minus[a] = m;
        }
        let (c1, c2): (Vec<f64>, Vec<f64>) = media.iter().map(|m| current_factors(m, xi, dt)).unzip();
        c.c1 = c1;
        c.c2 = c2;
        debug_assert_eq!(c.c1.len(), n);
        c
    }

    pub fn len(&self) -> usize {
        self.c1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c1.is_empty()
    }
}

/// Everything frozen for a run: step, per-node factors and derivative rows.
#[derive(Clone, Debug)]
pub struct UpdateCoefficients {
    pub dt: f64,
    pub electric: FieldCoefficients,
    pub magnetic: FieldCoefficients,
    /// Rows at magnetic nodes over electric values.
    pub e_to_h: StencilOperator,
    /// Rows at electric nodes over magnetic values.
    pub h_to_e: StencilOperator,
    /// Electric nodes held at zero (perfectly conducting outer wall).
    pub fixed_electric: Vec<bool>,
}

impl UpdateCoefficients {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dt: f64,
        electric_sigma: &[[f64; 3]],
        magnetic_sigma: &[[f64; 3]],
        electric_media: &[DrudeMedium],
        magnetic_media: &[DrudeMedium],
        e_to_h: StencilOperator,
        h_to_e: StencilOperator,
        fixed_electric: Vec<bool>,
    ) -> Result<Self> {
        let (ne, nh) = (electric_sigma.len(), magnetic_sigma.len());
        for (what, got, want) in [
            ("electric media", electric_media.len(), ne),
            ("magnetic media", magnetic_media.len(), nh),
            ("fixed flags", fixed_electric.len(), ne),
            ("E->H rows", e_to_h.rows(), nh),
            ("H->E rows", h_to_e.rows(), ne),
        ] {
            if got != want {
                return Err(Error::InvalidArgument(format!("{what}: expected {want} entries, got {got}")));
            }
        }
        Ok(Self {
            dt,
            // electric currents are driven through eps0, magnetic ones through mu0
            electric: FieldCoefficients::build(electric_sigma, electric_media, EPS0, dt),
            magnetic: FieldCoefficients::build(magnetic_sigma, magnetic_media, MU0, dt),
            e_to_h,
            h_to_e,
            fixed_electric,
        })
    }

    pub fn electric_len(&self) -> usize {
        self.electric.len()
    }

    pub fn magnetic_len(&self) -> usize {
        self.magnetic.len()
    }
}

/// Builds stencils and coefficient tables for a staggered lattice.
/// `conductivities` are `(electric nodes, magnetic nodes)`; each
/// [`ConductivityField`] supplies `electric` sigma for E-nodes and `magnetic`
/// sigma for H-nodes.
pub fn precompute(
    lattice: &StaggeredLattice,
    mode: StencilMode,
    kernel: &RbfKernel,
    electric_pml: &ConductivityField,
    magnetic_pml: &ConductivityField,
    materials: &MaterialMap,
    dt: f64,
) -> Result<UpdateCoefficients> {
    let e = &lattice.electric;
    let h = &lattice.magnetic;
    let e_to_h = StencilOperator::build(e, h.positions(), mode, kernel)?;
    let h_to_e = StencilOperator::build(h, e.positions(), mode, kernel)?;
    let em: Vec<DrudeMedium> = (0..e.len()).map(|n| materials.electric_medium(n)).collect();
    let hm: Vec<DrudeMedium> = (0..h.len()).map(|n| materials.magnetic_medium(n)).collect();
    let fixed = (0..e.len()).map(|n| e.on_boundary(n)).collect();
    UpdateCoefficients::from_parts(dt, &electric_pml.electric, &magnetic_pml.magnetic, &em, &hm, e_to_h, h_to_e, fixed)
}

/// A field state that can be advanced one leapfrog step.
pub trait Propagate {
    fn advance(&mut self, coeffs: &UpdateCoefficients, source: Option<&SoftSource>) -> Result<()>;
    /// Physical `E_z` at an electric node.
    fn e_z_at(&self, node: usize) -> f64;
    fn steps_taken(&self) -> u64;
}

/// Probe time series produced by [`run`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSeries {
    pub times: Vec<f64>,
    /// `values[probe][sample]`.
    pub values: Vec<Vec<f64>>,
}

/// Advances `steps` steps, recording `E_z` at each probe node after every step.
pub fn run<S: Propagate>(
    state: &mut S,
    coeffs: &UpdateCoefficients,
    source: Option<&SoftSource>,
    steps: u64,
    probes: &[usize],
) -> Result<ProbeSeries> {
    let mut series = ProbeSeries { times: Vec::new(), values: vec![Vec::new(); probes.len()] };
    for _ in 0..steps {
        state.advance(coeffs, source)?;
        series.times.push(state.steps_taken() as f64 * coeffs.dt);
        for (p, &node) in probes.iter().enumerate() {
            series.values[p].push(state.e_z_at(node));
        }
    }
    Ok(series)
}

pub(crate) fn all_finite(arrays: &[&[f64]]) -> bool {
    arrays.iter().all(|a| a.iter().all(|v| v.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lens_step_size() {
        let dt = step_size(0.0005, 2.0).unwrap();
        assert!((dt - 8.339e-13).abs() < 1e-16, "{dt}");
        let bound = step_size(0.0005, 1.0).unwrap();
        assert!((bound - 0.0005 * (EPS0 * MU0).sqrt()).abs() < 1e-25);
        assert!((step_size(0.00025, 2.0).unwrap() - dt / 2.0).abs() < 1e-25);
        assert!(step_size(0.0005, 0.9).is_err());
        assert!(step_size(0.0, 2.0).is_err());
        // 691 steps reach the lens snapshot epoch
        assert!((691.0 * dt - 5.7623e-10).abs() < 5e-14);
    }

    #[test]
    fn coefficient_degeneration() {
        assert_eq!(loss_factors(0.0, MU0, 1e-12), (1.0, 1.0));
        let dt = 1e-12;
        let sigma = 2.0 * MU0 / dt;
        assert_eq!(loss_factors(sigma, MU0, dt).1, 0.0);

        let (c1, c2) = current_factors(&DrudeMedium::vacuum(), EPS0, dt);
        assert_eq!((c1, c2), (1.0, 0.0));
        let slab = DrudeMedium::new(2.666e11, 0.0).unwrap();
        let (c1, c2) = current_factors(&slab, EPS0, dt);
        assert_eq!(c1, 1.0);
        assert!((c2 - EPS0 * dt * 2.666e11f64.powi(2)).abs() < 1e-12 * c2);
    }

    /// Analytic solution of dK/dt = -gamma K + xi wp^2 sin(w t), K(0) = 0.
    fn analytic(t: f64, gamma: f64, w: f64, drive: f64) -> f64 {
        drive * (gamma * (w * t).sin() - w * (w * t).cos() + w * (-gamma * t).exp()) / (gamma * gamma + w * w)
    }

    fn ade_error(dt: f64, gamma: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * 30e9;
        let medium = DrudeMedium::new(2.666e11, gamma).unwrap();
        let (c1, c2) = current_factors(&medium, MU0, dt);
        let drive = MU0 * 2.666e11f64.powi(2);
        let t_end = 4.0 / 30e9;
        let steps = (t_end / dt).round() as usize;
        let mut k = 0.0;
        let mut worst = 0.0f64;
        for q in 0..steps {
            let h = ((q as f64 + 0.5) * dt * w).sin();
            k = advance_current(c1, c2, k, h);
            worst = worst.max((k - analytic((q + 1) as f64 * dt, gamma, w, drive)).abs());
        }
        worst / drive * w
    }

    #[test]
    fn ade_update_is_second_order() {
        for gamma in [0.0, 5e9, 1e11] {
            let coarse = ade_error(1e-12, gamma);
            let fine = ade_error(0.5e-12, gamma);
            assert!(coarse / fine >= 3.5, "gamma {gamma}: ratio {}", coarse / fine);
        }
    }

    use crate::constants::{free_space_impedance, light_speed};
    use crate::excitation::WindowedSine;
    use crate::pml::{lattice_conductivities, PmlSpec};

    fn vacuum_setup(extents: &[f64], nodes: usize, layers: usize) -> (StaggeredLattice, UpdateCoefficients) {
        let lat = StaggeredLattice::build(extents, nodes, layers).unwrap();
        let d = lat.d_min();
        let kernel = RbfKernel::new(0.5, d).unwrap();
        let spec = PmlSpec::new(2, 1e-3, free_space_impedance()).unwrap();
        let ce = lattice_conductivities(&lat.electric, &spec).unwrap();
        let ch = lattice_conductivities(&lat.magnetic, &spec).unwrap();
        let mat = MaterialMap::vacuum(&lat.electric, &lat.magnetic);
        let c = precompute(&lat, StencilMode::Local(12), &kernel, &ce, &ch, &mat, step_size(d, 2.0).unwrap()).unwrap();
        (lat, c)
    }

    #[test]
    fn zero_state_stays_zero() {
        let (_, c) = vacuum_setup(&[0.01, 0.01], 11, 2);
        let mut s = SplitFieldStateTM::for_coefficients(&c);
        let zero = s.clone();
        let series = run(&mut s, &c, None, 20, &[0, 60]).unwrap();
        assert_eq!(series.times.len(), 20);
        assert_eq!(SplitFieldStateTM { step: 0, ..s }, zero);

        let (_, c3) = vacuum_setup(&[0.01, 0.01, 0.01], 6, 1);
        let mut s3 = SplitFieldState3D::for_coefficients(&c3);
        let zero3 = s3.clone();
        run(&mut s3, &c3, None, 5, &[]).unwrap();
        assert_eq!(SplitFieldState3D { step: 0, ..s3 }, zero3);
    }

    #[test]
    fn zero_steps_leave_the_state_alone() {
        let (_, c) = vacuum_setup(&[0.01, 0.01], 11, 2);
        let mut s = SplitFieldStateTM::for_coefficients(&c);
        s.set_e_z(60, 1.0);
        let before = s.clone();
        let series = run(&mut s, &c, None, 0, &[60]).unwrap();
        assert!(series.times.is_empty() && series.values[0].is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn one_step_touches_only_stencil_neighbours() {
        let (lat, c) = vacuum_setup(&[0.01, 0.01], 21, 0);
        let node = lat.electric.index_of(9, 12, 0);
        let mut s = SplitFieldStateTM::for_coefficients(&c);
        s.set_e_z(node, 1.0);
        s.advance(&c, None).unwrap();
        for m in 0..lat.magnetic.len() {
            let uses = c.e_to_h.row_nodes(m).contains(&(node as u32));
            let changed = s.h_x[m] != 0.0 || s.h_y[m] != 0.0;
            assert!(!changed || uses, "H node {m} changed without {node} in its stencil");
        }
        assert!(s.h_x.iter().any(|v| *v != 0.0));
    }

    fn setup_with_alpha(alpha_c: f64, extents: &[f64], nodes: usize) -> (StaggeredLattice, UpdateCoefficients) {
        let lat = StaggeredLattice::build(extents, nodes, 0).unwrap();
        let d = lat.d_min();
        let kernel = RbfKernel::new(alpha_c, d).unwrap();
        let zero_e = ConductivityField::zeros(lat.electric.len());
        let zero_h = ConductivityField::zeros(lat.magnetic.len());
        let mat = MaterialMap::vacuum(&lat.electric, &lat.magnetic);
        let c = precompute(&lat, StencilMode::Local(12), &kernel, &zero_e, &zero_h, &mat, step_size(d, 2.0).unwrap()).unwrap();
        (lat, c)
    }

    /// `sum_j w_j sin(k (y_j - y_t)) / k` for one operator row: the factor by
    /// which the row scales `d/dy` of a plane wave of wavenumber `k`.
    fn gain(op: &StencilOperator, row: usize, target: f64, nodes: &[crate::lattice::Point], k: f64) -> f64 {
        op.row_nodes(row).iter().zip(op.row_weights(row, 1)).map(|(&n, w)| w * (k * (nodes[n as usize][1] - target)).sin()).sum::<f64>() / k
    }

    /// Centroid speed of a Gaussian pulse of width `sigma` predicted from the
    /// leapfrog dispersion relation of the two interior derivative rows.
    fn predicted_speed(lat: &StaggeredLattice, c: &UpdateCoefficients, sigma: f64) -> f64 {
        let d = lat.d_min();
        let mid = lat.magnetic.counts()[0] / 2;
        let (n, m) = (lat.electric.index_of(mid, mid, 0), lat.magnetic.index_of(mid, mid, 0));
        let (ye, yh) = (lat.electric.position(n)[1], lat.magnetic.position(m)[1]);
        let omega = |k: f64| {
            let g = gain(&c.e_to_h, m, yh, lat.electric.positions(), k) * gain(&c.h_to_e, n, ye, lat.magnetic.positions(), k);
            2.0 / c.dt * (0.5 * light_speed() * c.dt * k * g.sqrt()).asin()
        };
        let (mut num, mut den) = (0.0, 0.0);
        let steps = 2000;
        for i in 1..steps {
            let k = i as f64 / steps as f64 * std::f64::consts::PI / d;
            let h = 1e-3 / d;
            let weight = (-(k * sigma).powi(2)).exp();
            num += weight * (omega(k + h) - omega(k - h)) / (2.0 * h);
            den += weight;
        }
        num / den
    }

    fn pulse_speed(alpha_c: f64) -> (f64, f64) {
        let (lat, c) = setup_with_alpha(alpha_c, &[0.05, 0.05], 101);
        let eta = free_space_impedance();
        let (y0, width) = (0.015, 0.002);
        let g = |y: f64| (-(y - y0).powi(2) / (2.0 * width * width)).exp();
        let mut s = SplitFieldStateTM::for_coefficients(&c);
        for n in 0..lat.electric.len() {
            s.set_e_z(n, g(lat.electric.position(n)[1]));
        }
        // H_x trails E_z by half a step for a wave moving towards +y
        let shift = 0.5 * light_speed() * c.dt;
        for n in 0..lat.magnetic.len() {
            s.h_x[n] = g(lat.magnetic.position(n)[1] + shift) / eta;
        }
        let centroid = |s: &SplitFieldStateTM| {
            let (mut num, mut den) = (0.0, 0.0);
            for (n, p) in lat.electric.positions().iter().enumerate() {
                if (p[0] - 0.025).abs() <= 0.005 {
                    let w = s.e_z_at(n).powi(2);
                    num += w * p[1];
                    den += w;
                }
            }
            num / den
        };
        let start = centroid(&s);
        let steps = 60;
        for _ in 0..steps {
            s.advance(&c, None).unwrap();
        }
        let measured = (centroid(&s) - start) / (steps as f64 * c.dt);
        // |E|^2 of a Gaussian of width `width` has spectrum exp(-k^2 width^2)
        (measured, predicted_speed(&lat, &c, width))
    }

    #[test]
    fn plane_pulse_moves_at_the_dispersion_limited_speed() {
        for alpha_c in [0.5, 4.0] {
            let (measured, predicted) = pulse_speed(alpha_c);
            assert!((measured / predicted - 1.0).abs() < 0.01, "alpha_c {alpha_c}: measured {measured}, predicted {predicted}");
        }
        // wide Gaussians reproduce linear fields closely and recover c
        let (measured, _) = pulse_speed(4.0);
        assert!((measured / light_speed() - 1.0).abs() < 0.01, "{measured}");
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let (lat, c) = vacuum_setup(&[0.02, 0.02], 41, 3);
        let node = lat.electric.nearest([0.01, 0.01, 0.0]).unwrap();
        let signal = WindowedSine::new(30e9, 1, 1, 1.0).unwrap();
        let src = SoftSource::gaussian(&lat.electric, node, signal, 5e-4).unwrap();
        let go = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut s = SplitFieldStateTM::for_coefficients(&c);
                run(&mut s, &c, Some(&src), 80, &[node]).unwrap();
                s
            })
        };
        let one = go(1);
        assert!(one.e_zx.iter().any(|v| *v != 0.0));
        for threads in [2, 4, 7] {
            assert_eq!(go(threads), one);
        }
    }

    #[test]
    fn three_dimensional_smoke_run_stays_finite() {
        let (lat, c) = vacuum_setup(&[0.01, 0.01, 0.004], 11, 2);
        let lat3 = StaggeredLattice::with_counts(&[0.01, 0.01, 0.004], &[11, 11, 5], &[2, 2, 1]).unwrap();
        let _ = lat;
        let d = lat3.d_min();
        let kernel = RbfKernel::new(0.5, d).unwrap();
        let spec = PmlSpec::new(2, 1e-3, free_space_impedance()).unwrap();
        let ce = lattice_conductivities(&lat3.electric, &spec).unwrap();
        let ch = lattice_conductivities(&lat3.magnetic, &spec).unwrap();
        let mat = MaterialMap::vacuum(&lat3.electric, &lat3.magnetic);
        let c3 = precompute(&lat3, StencilMode::Local(20), &kernel, &ce, &ch, &mat, step_size(d, 2.0).unwrap()).unwrap();
        let node = lat3.electric.index_of(5, 5, 2);
        let src = SoftSource::point(node, WindowedSine::new(30e9, 1, 1, 1.0).unwrap());
        let mut s = SplitFieldState3D::for_coefficients(&c3);
        let series = run(&mut s, &c3, Some(&src), 40, &[node]).unwrap();
        assert!(series.values[0].iter().any(|v| *v != 0.0));
        assert!(s.h[0].iter().flatten().any(|v| *v != 0.0));
        let _ = c;
    }
}
