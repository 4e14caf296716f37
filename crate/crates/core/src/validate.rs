//! Invariant suites run by `validate`: shape-function delta property,
//! analytic-vs-numeric derivatives, PML absorption against an enlarged
//! domain, the free-space reduction of the update coefficients, 3D/2D
//! consistency and the engine-vs-reference image-plane error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::constants::{free_space_impedance, light_speed};
use crate::engine::{precompute, step_size, Propagate, SplitFieldState3D, SplitFieldStateTM, StencilMode, StencilOperator, StencilRow, UpdateCoefficients};
use crate::error::{Error, Result};
use crate::excitation::{SoftSource, WindowedSine};
use crate::lattice::{Point, StaggeredLattice};
use crate::media::{DrudeMedium, MaterialMap, SlabGeometry};
use crate::pml::{lattice_conductivities, PmlSpec};
use crate::rbf::{build_stencil, MomentSystem, RbfKernel};
use crate::scenario::run_scenario;

pub const DELTA_TOLERANCE: f64 = 1e-8;
pub const DERIVATIVE_TOLERANCE: f64 = 1e-5;
pub const DERIVATIVE_CASES: usize = 128;
pub const PML_TOLERANCE: f64 = 1e-2;
pub const EXTRUSION_TOLERANCE: f64 = 1e-10;
/// Ceiling on the time-averaged image-plane L² of the default scenario
/// against the λ0/100 reference. The 61-node default measures 1.88 and the
/// 31-node lattice 3.03; the ceiling sits between the two.
pub const ORACLE_THRESHOLD: f64 = 2.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Delta,
    Derivative,
    Pml,
    FreeSpace,
    ThreeD,
    Oracle,
    /// Every suite except `oracle`, which needs a full reference run.
    Default,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delta" => Self::Delta,
            "derivative" => Self::Derivative,
            "pml" => Self::Pml,
            "free-space" | "free_space" => Self::FreeSpace,
            "3d2d" | "3d" => Self::ThreeD,
            "oracle" => Self::Oracle,
            "default" => Self::Default,
            "all" => Self::All,
            _ => {
                return Err(Error::Config(vec![format!(
                    "unknown suite {s:?}; expected delta, derivative, pml, free-space, 3d2d, oracle, default or all"
                )]))
            }
        })
    }
}

impl Suite {
    fn members(self) -> Vec<Suite> {
        use Suite::*;
        match self {
            Default => vec![Delta, Derivative, Pml, FreeSpace, ThreeD],
            All => vec![Delta, Derivative, Pml, FreeSpace, ThreeD, Oracle],
            s => vec![s],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Check {
    Check { name: name.into(), passed: value <= threshold, value, threshold, detail }
}

/// Runs the selected suites; `cfg` supplies the default scenario.
pub fn run_suite(suite: Suite, cfg: &ScenarioConfig) -> Result<Report> {
    let mut checks = Vec::new();
    for s in suite.members() {
        checks.push(match s {
            Suite::Delta => {
                let v = delta_property(cfg)?;
                at_most("delta", v, DELTA_TOLERANCE, "max |Phi_j(x_i) - delta_ij| over all stencils".into())
            }
            Suite::Derivative => {
                let v = derivative_check(cfg.seed, DERIVATIVE_CASES, cfg.rbf.alpha_c)?;
                at_most("derivative", v, DERIVATIVE_TOLERANCE, format!("{DERIVATIVE_CASES} random stencils vs central differences"))
            }
            Suite::Pml => {
                let r = pml_comparison(cfg)?;
                at_most("pml", r.max_relative_deviation, PML_TOLERANCE, format!("{} steps before the enlarged domain's boundary is felt", r.window_steps))
            }
            Suite::FreeSpace => {
                let v = free_space_reduction(cfg)?;
                at_most("free-space", v, 0.0, "coefficient identities and currents after 200 vacuum steps".into())
            }
            Suite::ThreeD => {
                let v = extruded_tm_difference(11, 5, 60)?;
                at_most("3d2d", v, EXTRUSION_TOLERANCE, "11x11x5 z-invariant run vs 2D TM, max per-step difference".into())
            }
            Suite::Oracle => {
                let v = oracle_l2(cfg)?;
                at_most("oracle", v, ORACLE_THRESHOLD, "time-averaged image-plane L2 vs the reference grid".into())
            }
            Suite::Default | Suite::All => unreachable!("expanded by members()"),
        });
    }
    let name = format!("{suite:?}").to_lowercase();
    Ok(Report { suite: name, passed: checks.iter().all(|c| c.passed), checks })
}

fn lattice_and_kernel(cfg: &ScenarioConfig) -> Result<(StaggeredLattice, RbfKernel)> {
    let lattice = StaggeredLattice::build(&cfg.domain.extent_m, cfg.domain.nodes_per_axis, cfg.pml.layers)?;
    let kernel = RbfKernel::new(cfg.rbf.alpha_c, lattice.d_min())?;
    Ok((lattice, kernel))
}

/// Largest `|Phi_j(x_i) - delta_ij|` over every stencil of both derivative
/// operators of the scenario.
pub fn delta_property(cfg: &ScenarioConfig) -> Result<f64> {
    use rayon::prelude::*;
    let (lattice, kernel) = lattice_and_kernel(cfg)?;
    let size = cfg.rbf.stencil_size;
    let mut worst = 0.0f64;
    for (source, targets) in [(&lattice.electric, &lattice.magnetic), (&lattice.magnetic, &lattice.electric)] {
        let w = targets
            .positions()
            .par_iter()
            .map(|&p| -> Result<f64> {
                let st = build_stencil(source, p, size, &kernel)?;
                let coords: Vec<Point> = st.nodes.iter().map(|&n| source.position(n)).collect();
                let sys = MomentSystem::new(&coords, &kernel)?;
                let mut m = 0.0f64;
                for (i, &x) in coords.iter().enumerate() {
                    for (j, v) in sys.evaluate(x).values.iter().enumerate() {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        m = m.max((v - delta).abs());
                    }
                }
                Ok(m)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        worst = worst.max(w);
    }
    Ok(worst)
}

/// Largest relative mismatch between analytic shape-function gradients and
/// central differences (step `1e-6 d_min`) over `cases` random stencils of
/// 12 jittered nodes. Each case is normalized by its largest gradient entry.
pub fn derivative_check(seed: u64, cases: usize, alpha_c: f64) -> Result<f64> {
    let d = 1.0e-3;
    let kernel = RbfKernel::new(alpha_c, d)?;
    let h = 1e-6 * d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let mut nodes: Vec<Point> = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                let jx = rng.random_range(-0.3..0.3) * d;
                let jy = rng.random_range(-0.3..0.3) * d;
                nodes.push([(i as f64 - 1.5) * d + jx, (j as f64 - 1.0) * d + jy, 0.0]);
            }
        }
        let eval: Point = [rng.random_range(-1.0..1.0) * d, rng.random_range(-0.8..0.8) * d, 0.0];
        let sys = MomentSystem::new(&nodes, &kernel)?;
        let sf = sys.evaluate(eval);
        for axis in 0..2 {
            let (mut plus, mut minus) = (eval, eval);
            plus[axis] += h;
            minus[axis] -= h;
            let (vp, vm) = (sys.evaluate(plus).values, sys.evaluate(minus).values);
            let scale = sf.gradient[axis].iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for j in 0..nodes.len() {
                let fd = (vp[j] - vm[j]) / (2.0 * h);
                worst = worst.max((sf.gradient[axis][j] - fd).abs() / scale);
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmlComparison {
    pub truncated: Vec<f64>,
    pub enlarged: Vec<f64>,
    pub window_steps: u64,
    pub max_relative_deviation: f64,
}

/// Probe trace of a vacuum run on a square domain with a short pulse at
/// `source` and a probe at `probe`.
fn vacuum_trace(cfg: &ScenarioConfig, extent: f64, nodes: usize, source: [f64; 2], probe: [f64; 2], steps: u64) -> Result<Vec<f64>> {
    let lattice = StaggeredLattice::build(&[extent, extent], nodes, cfg.pml.layers)?;
    let d = lattice.d_min();
    let kernel = RbfKernel::new(cfg.rbf.alpha_c, d)?;
    let spec = PmlSpec::new(cfg.pml.order, cfg.pml.reflection, free_space_impedance())?;
    let ce = lattice_conductivities(&lattice.electric, &spec)?;
    let ch = lattice_conductivities(&lattice.magnetic, &spec)?;
    let materials = MaterialMap::vacuum(&lattice.electric, &lattice.magnetic);
    let dt = step_size(d, cfg.time.dt_divisor)?;
    let coeffs = precompute(&lattice, StencilMode::Local(cfg.rbf.stencil_size), &kernel, &ce, &ch, &materials, dt)?;
    let pulse = WindowedSine::new(cfg.source.frequency_hz, 1, 0, 1.0)?;
    let node = lattice.electric.nearest([source[0], source[1], 0.0])?;
    let src = SoftSource::gaussian(&lattice.electric, node, pulse, cfg.source.width_m)?;
    let p = lattice.electric.nearest([probe[0], probe[1], 0.0])?;
    let mut state = SplitFieldStateTM::for_coefficients(&coeffs);
    let series = crate::engine::run(&mut state, &coeffs, Some(&src), steps, &[p])?;
    Ok(series.values.into_iter().next().unwrap_or_default())
}

/// Pulse launched at the centre of the scenario's empty domain, probed
/// 1 cm off-centre (3.5 mm inside the PML on the default grid), compared
/// with the same run on a 3x enlarged domain of identical spacing.
pub fn pml_comparison(cfg: &ScenarioConfig) -> Result<PmlComparison> {
    let extent = cfg.domain.extent_m[0];
    let n = cfg.domain.nodes_per_axis;
    let d = extent / (n - 1) as f64;
    let offset = [extent / 3.0, 0.0];
    let big = 3.0 * extent;
    let thickness = cfg.pml.layers as f64 * d;
    // the enlarged domain's PML is felt once a wave has gone source -> wall -> probe
    let path = (big / 2.0 - thickness) + (big / 2.0 - thickness - offset[0]);
    let dt = step_size(d, cfg.time.dt_divisor)?;
    let window_steps = (path / light_speed() / dt).floor() as u64;
    let centre = |l: f64| [l / 2.0, l / 2.0];
    let at = |c: [f64; 2]| [c[0] + offset[0], c[1] + offset[1]];
    let truncated = vacuum_trace(cfg, extent, n, centre(extent), at(centre(extent)), window_steps)?;
    let enlarged = vacuum_trace(cfg, big, 3 * (n - 1) + 1, centre(big), at(centre(big)), window_steps)?;
    let peak = enlarged.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = truncated.iter().zip(&enlarged).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(PmlComparison { truncated, enlarged, window_steps, max_relative_deviation: dev / peak })
}

/// Zero when vacuum interior coefficients reduce to the plain curl update
/// (`a_plus = a_minus = 1`, `c1 = 1`, `c2 = 0`) and Drude currents stay
/// identically zero over 200 driven steps; otherwise the largest violation.
pub fn free_space_reduction(cfg: &ScenarioConfig) -> Result<f64> {
    let mut c = cfg.clone();
    c.slab.enabled = false;
    c.time.steps = 0;
    c.output.snapshot_times_s.clear();
    let p = crate::scenario::prepare(&c)?;
    let e = &p.lattice.electric;
    let h = &p.lattice.magnetic;
    let mut worst = 0.0f64;
    for (fc, lat) in [(&p.coefficients.electric, e), (&p.coefficients.magnetic, h)] {
        for n in (0..lat.len()).filter(|&n| lat.tag(n).is_interior()) {
            for a in 0..2 {
                worst = worst.max((fc.a_plus[a][n] - 1.0).abs()).max((fc.a_minus[a][n] - 1.0).abs());
            }
            worst = worst.max((fc.c1[n] - 1.0).abs()).max(fc.c2[n].abs());
        }
    }
    let mut state = SplitFieldStateTM::for_coefficients(&p.coefficients);
    for _ in 0..200 {
        state.advance(&p.coefficients, Some(&p.source))?;
    }
    for v in state.j_zx.iter().chain(&state.j_zy).chain(&state.m_x).chain(&state.m_y) {
        worst = worst.max(v.abs());
    }
    Ok(worst)
}

/// Coefficients for a z-periodic extrusion of a 2D problem over `layers`
/// planes. In-plane rows reuse the 2D stencils on the same plane; `d/dz`
/// is a central difference of the 2D interpolant between neighbouring
/// planes, written so that a z-constant field gives exactly zero.
#[allow(clippy::too_many_arguments)]
fn extrude(
    lattice: &StaggeredLattice,
    kernel: &RbfKernel,
    size: usize,
    coeffs2d: &UpdateCoefficients,
    e_sigma: &[[f64; 3]],
    h_sigma: &[[f64; 3]],
    e_media: &[DrudeMedium],
    h_media: &[DrudeMedium],
    layers: usize,
    dz: f64,
) -> Result<UpdateCoefficients> {
    let rows = |source: &crate::lattice::NodeLattice, targets: &crate::lattice::NodeLattice| -> Result<StencilOperator> {
        let n2 = source.len();
        let mut out = Vec::with_capacity(targets.len() * layers);
        let stencils: Vec<_> = targets.positions().iter().map(|&p| build_stencil(source, p, size, kernel)).collect::<Result<_>>()?;
        for k in 0..layers {
            let up = (k + 1) % layers;
            let down = (k + layers - 1) % layers;
            for st in &stencils {
                let mut row = StencilRow { condition: st.shape.condition, ..Default::default() };
                for (j, &n) in st.nodes.iter().enumerate() {
                    let phi = st.shape.values[j] / (2.0 * dz);
                    for (node, wz, in_plane) in [(k * n2 + n, 0.0, true), (up * n2 + n, phi, false), (down * n2 + n, -phi, false)] {
                        row.nodes.push(node);
                        for a in 0..2 {
                            row.weights[a].push(if in_plane { st.shape.gradient[a][j] } else { 0.0 });
                        }
                        row.weights[2].push(wz);
                    }
                }
                out.push(row);
            }
        }
        Ok(StencilOperator::from_rows(out))
    };
    let tile = |v: &[[f64; 3]]| -> Vec<[f64; 3]> { (0..layers).flat_map(|_| v.iter().map(|s| [s[0], s[1], 0.0])).collect() };
    let tile_m = |v: &[DrudeMedium]| -> Vec<DrudeMedium> { (0..layers).flat_map(|_| v.iter().copied()).collect() };
    let fixed = (0..layers).flat_map(|_| coeffs2d.fixed_electric.iter().copied()).collect();
    UpdateCoefficients::from_parts(
        coeffs2d.dt,
        &tile(e_sigma),
        &tile(h_sigma),
        &tile_m(e_media),
        &tile_m(h_media),
        rows(&lattice.electric, &lattice.magnetic)?,
        rows(&lattice.magnetic, &lattice.electric)?,
        fixed,
    )
}

/// Largest per-step difference between a z-invariant 3D run on an
/// `nodes x nodes x layers` z-periodic lattice and the 2D TM run on the
/// `nodes x nodes` lattice, with a PML, a Drude slab and a driven source.
pub fn extruded_tm_difference(nodes: usize, layers: usize, steps: u64) -> Result<f64> {
    let extent = 0.03;
    let lattice = StaggeredLattice::build(&[extent, extent], nodes, 2)?;
    let d = lattice.d_min();
    let kernel = RbfKernel::new(0.5, d)?;
    let size = 12;
    let spec = PmlSpec::new(2, 1e-3, free_space_impedance())?;
    let ce = lattice_conductivities(&lattice.electric, &spec)?;
    let ch = lattice_conductivities(&lattice.magnetic, &spec)?;
    let medium = DrudeMedium::new(2.666e11, 1e9)?;
    let slab = SlabGeometry::centered(0.012, 0.012);
    let materials = MaterialMap::with_slab(&lattice.electric, &lattice.magnetic, slab, medium, 0.5)?;
    let dt = step_size(d, 2.0)?;
    let c2 = precompute(&lattice, StencilMode::Local(size), &kernel, &ce, &ch, &materials, dt)?;
    let em: Vec<DrudeMedium> = (0..lattice.electric.len()).map(|n| materials.electric_medium(n)).collect();
    let hm: Vec<DrudeMedium> = (0..lattice.magnetic.len()).map(|n| materials.magnetic_medium(n)).collect();
    let c3 = extrude(&lattice, &kernel, size, &c2, &ce.electric, &ch.magnetic, &em, &hm, layers, d)?;

    let signal = WindowedSine::new(30e9, 1, 1, 1.0)?;
    let node = lattice.electric.nearest([0.015, 0.021, 0.0])?;
    let src2 = SoftSource::gaussian(&lattice.electric, node, signal, 0.3 * d)?;
    let (ne, nh) = (lattice.electric.len(), lattice.magnetic.len());
    let src3 = SoftSource {
        node,
        signal,
        footprint: (0..layers).flat_map(|k| src2.footprint.iter().map(move |&(n, w)| (k * ne + n, w))).collect(),
    };
    let mut s2 = SplitFieldStateTM::for_coefficients(&c2);
    let mut s3 = SplitFieldState3D::for_coefficients(&c3);
    let mut worst = 0.0f64;
    let diff = |a: &[f64], b: &[f64], n: usize| -> f64 {
        (0..b.len()).fold(0.0f64, |m, i| m.max((a[i % n] - b[i]).abs()))
    };
    for _ in 0..steps {
        s2.advance(&c2, Some(&src2))?;
        s3.advance(&c3, Some(&src3))?;
        let ez3: Vec<f64> = (0..ne * layers).map(|i| s3.e_at(2, i)).collect();
        let hx3: Vec<f64> = (0..nh * layers).map(|i| s3.h_at(0, i)).collect();
        let hy3: Vec<f64> = (0..nh * layers).map(|i| s3.h_at(1, i)).collect();
        let jz3: Vec<f64> = (0..ne * layers).map(|i| s3.j[2][0][i] + s3.j[2][1][i]).collect();
        let jz2: Vec<f64> = s2.j_zx.iter().zip(&s2.j_zy).map(|(a, b)| a + b).collect();
        worst = worst
            .max(diff(&s2.e_z(), &ez3, ne))
            .max(diff(&s2.h_x, &hx3, nh))
            .max(diff(&s2.h_y, &hy3, nh))
            .max(diff(&jz2, &jz3, ne));
        for c in [0, 1] {
            for s in 0..2 {
                worst = worst.max(s3.e[c][s].iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
        for s in 0..2 {
            worst = worst.max(s3.h[2][s].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    Ok(worst)
}

/// Time-averaged image-plane L² of the scenario against the reference grid.
pub fn oracle_l2(cfg: &ScenarioConfig) -> Result<f64> {
    let mut c = cfg.clone();
    c.reference.enabled = true;
    c.output.snapshot_times_s.clear();
    c.output.dir = std::env::temp_dir().join(format!("lhm-oracle-{}", std::process::id()));
    let out = run_scenario(&c)?;
    let _ = std::fs::remove_dir_all(&c.output.dir);
    out.time_averaged_l2(c.analysis.average_from_s)
        .ok_or_else(|| Error::InvalidArgument("no reference samples inside the averaging window".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_parse_and_expand() {
        assert_eq!("pml".parse::<Suite>().unwrap().members(), vec![Suite::Pml]);
        assert_eq!("default".parse::<Suite>().unwrap().members().len(), 5);
        assert!(!Suite::Default.members().contains(&Suite::Oracle));
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn derivative_check_is_tight() {
        assert!(derivative_check(7, 16, 0.5).unwrap() < DERIVATIVE_TOLERANCE);
    }

    #[test]
    fn extrusion_matches_on_a_short_run() {
        assert!(extruded_tm_difference(11, 3, 10).unwrap() < EXTRUSION_TOLERANCE);
    }

    #[test]
    fn report_serializes_to_json() {
        let r = Report { suite: "x".into(), passed: false, checks: vec![at_most("a", 2.0, 1.0, String::new())] };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["checks"][0]["passed"], false);
    }
}
