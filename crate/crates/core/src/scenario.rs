//! End-to-end scenario runs: build the solver from a configuration, advance
//! it, compare with the reference grid and write artifacts plus a manifest.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::analysis::{image_plane, l2_error, locate_foci, snapshot_csv, snapshot_pgm, ErrorSeries, FocalReport};
use crate::config::ScenarioConfig;
use crate::constants::{free_space_impedance, light_speed};
use crate::engine::{precompute, step_size, Propagate, SplitFieldStateTM, StencilMode, UpdateCoefficients};
use crate::error::{Error, Result};
use crate::excitation::{SoftSource, WindowedSine};
use crate::fdtd::{fdtd_step, YeeGridTM, YeeSetup};
use crate::lattice::StaggeredLattice;
use crate::media::{DrudeMedium, MaterialMap, SlabGeometry};
use crate::pml::{lattice_conductivities, PmlSpec};
use crate::rbf::RbfKernel;

/// Everything built from a configuration before time stepping.
pub struct Prepared {
    pub lattice: StaggeredLattice,
    pub materials: MaterialMap,
    pub coefficients: UpdateCoefficients,
    pub source: SoftSource,
    pub kernel: RbfKernel,
    pub dt: f64,
}

pub fn slab_geometry(cfg: &ScenarioConfig) -> SlabGeometry {
    SlabGeometry::centered(cfg.slab.center_y_m, cfg.slab.thickness_m)
}

pub fn slab_medium(cfg: &ScenarioConfig) -> Result<DrudeMedium> {
    DrudeMedium::new(cfg.slab.plasma_frequency_rad_s, cfg.slab.collision_frequency_rad_s)
}

pub fn signal(cfg: &ScenarioConfig) -> Result<WindowedSine> {
    let s = &cfg.source;
    WindowedSine::new(s.frequency_hz, s.ramp_cycles, s.hold_cycles, s.amplitude_v_m)
}

pub fn pml_spec(cfg: &ScenarioConfig) -> Result<PmlSpec> {
    PmlSpec::new(cfg.pml.order, cfg.pml.reflection, free_space_impedance())
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let lattice = StaggeredLattice::build(&cfg.domain.extent_m, cfg.domain.nodes_per_axis, cfg.pml.layers)?;
    let d = lattice.d_min();
    let kernel = RbfKernel::new(cfg.rbf.alpha_c, d)?;
    let spec = pml_spec(cfg)?;
    let ce = lattice_conductivities(&lattice.electric, &spec)?;
    let ch = lattice_conductivities(&lattice.magnetic, &spec)?;
    let materials = if cfg.slab.enabled {
        MaterialMap::with_slab(&lattice.electric, &lattice.magnetic, slab_geometry(cfg), slab_medium(cfg)?, cfg.slab.face_fill)?
    } else {
        MaterialMap::vacuum(&lattice.electric, &lattice.magnetic)
    };
    let dt = step_size(d, cfg.time.dt_divisor)?;
    let mode = if cfg.rbf.global { StencilMode::Global } else { StencilMode::Local(cfg.rbf.stencil_size) };
    let coefficients = precompute(&lattice, mode, &kernel, &ce, &ch, &materials, dt)?;
    let [sx, sy] = cfg.source.position_m;
    let node = lattice.electric.nearest([sx, sy, 0.0])?;
    let source = SoftSource::gaussian(&lattice.electric, node, signal(cfg)?, cfg.source.width_m)?;
    Ok(Prepared { lattice, materials, coefficients, source, kernel, dt })
}

/// Field captured at a requested time, snapped to the nearest step.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub requested: f64,
    pub step: u64,
    pub e_z: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Simulation {
    pub snapshots: Vec<Snapshot>,
    pub probe_nodes: Vec<usize>,
    pub probe_times: Vec<f64>,
    /// `probe_values[probe][step]`.
    pub probe_values: Vec<Vec<f64>>,
    /// `(step, E_z on the sampled nodes)`.
    pub samples: Vec<(u64, Vec<f64>)>,
    /// Largest `|E_z|` while the source is on.
    pub source_era_max: f64,
    /// Largest `|E_z|` after the source has switched off.
    pub late_max: f64,
}

pub fn snapshot_step(time: f64, dt: f64, steps: u64) -> u64 {
    ((time / dt).round() as u64).min(steps)
}

/// Advances the prepared state for the configured number of steps,
/// collecting snapshots, probe traces and `E_z` on `sample_nodes` at each
/// step in `sample_steps`.
pub fn simulate(cfg: &ScenarioConfig, p: &Prepared, sample_nodes: &[usize], sample_steps: &[u64]) -> Result<Simulation> {
    let steps = cfg.time.steps;
    let e = &p.lattice.electric;
    let mut sim = Simulation::default();
    for pr in &cfg.output.probes_m {
        sim.probe_nodes.push(e.nearest([pr[0], pr[1], 0.0])?);
    }
    sim.probe_values = vec![Vec::new(); sim.probe_nodes.len()];
    let mut wanted: HashMap<u64, Vec<f64>> = HashMap::new();
    for &t in &cfg.output.snapshot_times_s {
        wanted.entry(snapshot_step(t, p.dt, steps)).or_default().push(t);
    }
    let mut sample_iter = sample_steps.iter().peekable();
    let mut state = SplitFieldStateTM::for_coefficients(&p.coefficients);
    let source_end = p.source.signal.duration();

    let capture = |state: &SplitFieldStateTM, sim: &mut Simulation| {
        if let Some(times) = wanted.get(&state.step) {
            let e_z = state.e_z();
            for &t in times {
                sim.snapshots.push(Snapshot { requested: t, step: state.step, e_z: e_z.clone() });
            }
        }
    };
    capture(&state, &mut sim);
    for _ in 0..steps {
        state.advance(&p.coefficients, Some(&p.source))?;
        let t = state.time(p.dt);
        sim.probe_times.push(t);
        for (k, &n) in sim.probe_nodes.iter().enumerate() {
            sim.probe_values[k].push(state.e_z_at(n));
        }
        let m = state.e_zx.iter().zip(&state.e_zy).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        if t <= source_end {
            sim.source_era_max = sim.source_era_max.max(m);
        } else {
            sim.late_max = sim.late_max.max(m);
        }
        while sample_iter.peek().is_some_and(|&&s| s < state.step) {
            sample_iter.next();
        }
        if sample_iter.peek() == Some(&&state.step) {
            sim.samples.push((state.step, sample_nodes.iter().map(|&n| state.e_z_at(n)).collect()));
        }
        capture(&state, &mut sim);
    }
    sim.snapshots.sort_by(|a, b| a.requested.total_cmp(&b.requested));
    Ok(sim)
}

/// Reference-grid `E_z` at `points` for each time in `times` (increasing),
/// using the nearest reference step to each time.
pub fn reference_trace(cfg: &ScenarioConfig, d_min: f64, source_center: [f64; 2], times: &[f64], points: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
    let lambda = light_speed() / cfg.source.frequency_hz;
    let thickness = cfg.pml.layers as f64 * d_min;
    let setup = YeeSetup {
        extents: cfg.domain.extent_m,
        cell: lambda / cfg.reference.cells_per_wavelength,
        courant: cfg.reference.courant,
        pml: pml_spec(cfg)?,
        pml_thickness: [thickness; 2],
        slab: cfg.slab.enabled.then(|| slab_geometry(cfg)),
        medium: if cfg.slab.enabled { slab_medium(cfg)? } else { DrudeMedium::vacuum() },
        periodic_x: false,
    };
    let mut grid = YeeGridTM::new(&setup)?;
    let src = grid.source(source_center, cfg.source.width_m, signal(cfg)?)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let target = (t / grid.dt).round() as u64;
        while grid.step < target {
            fdtd_step(&mut grid, Some(&src))?;
        }
        out.push(grid.sample_at(points)?);
    }
    Ok(out)
}

/// Reference traces shared between runs that would compute identical ones.
#[derive(Default)]
pub struct ReferenceCache {
    traces: HashMap<String, Vec<Vec<f64>>>,
}

impl ReferenceCache {
    fn get(&mut self, cfg: &ScenarioConfig, d_min: f64, center: [f64; 2], times: &[f64], points: &[[f64; 2]]) -> Result<&Vec<Vec<f64>>> {
        let key = format!(
            "{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}|{:?}",
            cfg.reference, cfg.domain.extent_m, cfg.pml, cfg.slab, d_min, cfg.source, center, (times, points)
        );
        if !self.traces.contains_key(&key) {
            let trace = reference_trace(cfg, d_min, center, times, points)?;
            self.traces.insert(key.clone(), trace);
        }
        Ok(&self.traces[&key])
    }
}

/// Result of one scenario run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub focal: Vec<(f64, FocalReport)>,
    pub l2: Option<ErrorSeries>,
    pub source_era_max: f64,
    pub late_max: f64,
    pub max_condition: f64,
    pub wall_time_s: f64,
}

impl RunOutput {
    pub fn time_averaged_l2(&self, from: f64) -> Option<f64> {
        self.l2.as_ref()?.time_average(from)
    }
}

struct Usage {
    cpu_s: f64,
    peak_kib: i64,
}

fn usage() -> Usage {
    // SAFETY: getrusage only writes into the zero-initialized struct we own.
    let mut ru: libc::rusage = unsafe { std::mem::zeroed() };
    let ok = unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut ru) } == 0;
    if !ok {
        return Usage { cpu_s: f64::NAN, peak_kib: -1 };
    }
    let secs = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
    Usage { cpu_s: secs(ru.ru_utime) + secs(ru.ru_stime), peak_kib: ru.ru_maxrss as i64 }
}

fn time_label(t: f64) -> String {
    format!("{t:e}")
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn probes_csv(sim: &Simulation) -> String {
    let mut s = String::from("time_s");
    for k in 0..sim.probe_nodes.len() {
        let _ = write!(s, ",e_z_p{k}");
    }
    s.push('\n');
    for (q, t) in sim.probe_times.iter().enumerate() {
        let _ = write!(s, "{t:e}");
        for v in &sim.probe_values {
            let _ = write!(s, ",{:e}", v[q]);
        }
        s.push('\n');
    }
    s
}

/// Runs a configuration and writes its artifacts into `cfg.output.dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    run_with_cache(cfg, &mut ReferenceCache::default())
}

pub fn run_with_cache(cfg: &ScenarioConfig, cache: &mut ReferenceCache) -> Result<RunOutput> {
    let wall = Instant::now();
    let before = usage();
    let p = prepare(cfg)?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let e = &p.lattice.electric;
    let d = p.lattice.d_min();
    let steps = cfg.time.steps;

    let image_nodes = image_plane(e, cfg.image_plane_y())?;
    let sample_steps: Vec<u64> = if cfg.reference.enabled { (1..=steps).filter(|q| q % cfg.analysis.l2_stride == 0).collect() } else { Vec::new() };
    let sim = simulate(cfg, &p, &image_nodes, &sample_steps)?;

    let mut files = Vec::new();
    let mut focal = Vec::new();
    let mut l2 = None;
    if steps > 0 {
        for snap in &sim.snapshots {
            let label = time_label(snap.requested);
            write_file(&dir, &format!("snapshot_{label}.csv"), snapshot_csv(e, &snap.e_z).as_bytes(), &mut files)?;
            write_file(&dir, &format!("snapshot_{label}.pgm"), &snapshot_pgm(e, &snap.e_z), &mut files)?;
            if cfg.slab.enabled {
                let [sx, sy] = cfg.source.position_m;
                focal.push((snap.requested, locate_foci(e, &snap.e_z, &slab_geometry(cfg), [sx, sy, 0.0])?));
            }
        }
        write_file(&dir, "probes.csv", probes_csv(&sim).as_bytes(), &mut files)?;
        if !focal.is_empty() {
            let mut text = String::new();
            for (t, r) in &focal {
                let _ = writeln!(text, "[snapshot {}]", time_label(*t));
                text.push_str(&r.to_text());
            }
            write_file(&dir, "focal_report.txt", text.as_bytes(), &mut files)?;
        }
        if cfg.reference.enabled {
            let times: Vec<f64> = sim.samples.iter().map(|(q, _)| *q as f64 * p.dt).collect();
            let points: Vec<[f64; 2]> = image_nodes.iter().map(|&n| [e.position(n)[0], e.position(n)[1]]).collect();
            let c = e.position(p.source.node);
            let reference = cache.get(cfg, d, [c[0], c[1]], &times, &points)?;
            let mut series = ErrorSeries {
                points: points.len(),
                nodes_per_axis: cfg.domain.nodes_per_axis,
                alpha_c: cfg.rbf.alpha_c,
                reference_cell: light_speed() / cfg.source.frequency_hz / cfg.reference.cells_per_wavelength,
                ..Default::default()
            };
            for ((_, profile), (t, r)) in sim.samples.iter().zip(times.iter().zip(reference)) {
                match l2_error(profile, r) {
                    Ok(v) => series.push(*t, v),
                    Err(Error::ZeroProfile) => {}
                    Err(err) => return Err(err),
                }
            }
            write_file(&dir, "l2_error.csv", series.to_csv().as_bytes(), &mut files)?;
            l2 = Some(series);
        }
    }

    let max_condition = p.coefficients.e_to_h.max_condition().max(p.coefficients.h_to_e.max_condition());
    let wall_time_s = wall.elapsed().as_secs_f64();
    let after = usage();
    let mut m = String::new();
    let _ = writeln!(m, "lhm-meshless {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "worker_threads {}", rayon::current_num_threads());
    let _ = writeln!(m, "wall_time_s {wall_time_s:.3}");
    let _ = writeln!(m, "cpu_time_s {:.3}", after.cpu_s - before.cpu_s);
    let _ = writeln!(m, "peak_memory_kib {}", after.peak_kib);
    let _ = writeln!(m, "d_min_m {d:e}");
    let _ = writeln!(m, "dt_s {:e}", p.dt);
    let _ = writeln!(m, "steps {steps}");
    let _ = writeln!(m, "max_condition {max_condition:e}");
    let _ = writeln!(m, "source_footprint_nodes {}", p.source.footprint.len());
    for (k, n) in sim.probe_nodes.iter().enumerate() {
        let q = e.position(*n);
        let _ = writeln!(m, "probe p{k} node {n} at {:e} {:e}", q[0], q[1]);
    }
    for s in &sim.snapshots {
        let _ = writeln!(m, "snapshot {} step {} realized_time_s {:e}", time_label(s.requested), s.step, s.step as f64 * p.dt);
    }
    if let Some(avg) = l2.as_ref().and_then(|s| s.time_average(cfg.analysis.average_from_s)) {
        let _ = writeln!(m, "time_averaged_l2 {avg:e}");
    }
    m.push_str("\n[checksums sha256]\n");
    for f in &files {
        let bytes = std::fs::read(f).map_err(|err| Error::io(f, err))?;
        let name = f.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = writeln!(m, "{}  {name}", hex::encode(Sha256::digest(&bytes)));
    }
    m.push_str("\n[config]\n");
    m.push_str(&cfg.to_toml_string());
    write_file(&dir, "manifest.txt", m.as_bytes(), &mut files)?;

    Ok(RunOutput { dir, files, focal, l2, source_era_max: sim.source_era_max, late_max: sim.late_max, max_condition, wall_time_s })
}

/// Parameters a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Nodes,
    AlphaC,
    DtDivisor,
    StencilSize,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" | "nodes_per_axis" => Ok(Self::Nodes),
            "alpha_c" | "alpha" => Ok(Self::AlphaC),
            "dt_divisor" | "divisor" => Ok(Self::DtDivisor),
            "stencil_size" | "stencil" => Ok(Self::StencilSize),
            _ => Err(Error::Config(vec![format!("unknown sweep parameter {s:?}; expected nodes, alpha_c, dt_divisor or stencil_size")])),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nodes => "nodes_per_axis",
            Self::AlphaC => "alpha_c",
            Self::DtDivisor => "dt_divisor",
            Self::StencilSize => "stencil_size",
        }
    }

    /// Copy of `cfg` with the parameter set to `value`. Step counts and the
    /// snapshot times stay at the same physical times.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let integral = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(vec![format!("{} needs a positive integer, got {value}", self.name())]))
            }
        };
        let horizon = cfg.horizon();
        let mut c = cfg.clone();
        match self {
            Self::Nodes => c.domain.nodes_per_axis = integral()?,
            Self::AlphaC => c.rbf.alpha_c = value,
            Self::DtDivisor => c.time.dt_divisor = value,
            Self::StencilSize => c.rbf.stencil_size = integral()?,
        }
        if matches!(self, Self::Nodes | Self::DtDivisor) && c.dt() > 0.0 && c.dt().is_finite() {
            c.time.steps = (horizon / c.dt()).round() as u64;
        }
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: f64,
    pub time_averaged_l2: Option<f64>,
    pub final_l2: Option<f64>,
    pub output: RunOutput,
}

/// One run per value with the reference comparison enabled, each in its own
/// subdirectory, plus `sweep_summary.csv`.
pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config(vec!["sweep needs at least one value".into()]));
    }
    let root = cfg.output.dir.clone();
    let mut cache = ReferenceCache::default();
    let mut rows = Vec::new();
    for &v in values {
        let mut c = param.apply(cfg, v)?;
        c.reference.enabled = true;
        c.output.dir = root.join(format!("{}_{v}", param.name()));
        let out = run_with_cache(&c, &mut cache)?;
        let series = out.l2.as_ref();
        rows.push(SweepRow {
            value: v,
            time_averaged_l2: series.and_then(|s| s.time_average(c.analysis.average_from_s)),
            final_l2: series.and_then(|s| s.values.last().copied()),
            output: out,
        });
    }
    let mut csv = format!("{},time_averaged_l2,final_l2\n", param.name());
    let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:e}"));
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.value, opt(r.time_averaged_l2), opt(r.final_l2));
    }
    let path = root.join("sweep_summary.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path) -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.domain.nodes_per_axis = 31;
        c.source.position_m = [0.015, 0.023];
        c.source.width_m = 5e-4;
        c.time.steps = 40;
        c.output.snapshot_times_s = vec![20.0 * c.dt(), 40.0 * c.dt()];
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn zero_steps_write_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(dir.path());
        c.time.steps = 0;
        c.output.snapshot_times_s.clear();
        let out = run_scenario(&c).unwrap();
        assert_eq!(out.files.len(), 1);
        assert!(out.files[0].ends_with("manifest.txt"));
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn run_writes_snapshots_probes_and_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny(dir.path());
        let out = run_scenario(&c).unwrap();
        let label = time_label(c.output.snapshot_times_s[0]);
        for name in [format!("snapshot_{label}.csv"), format!("snapshot_{label}.pgm"), "probes.csv".into(), "focal_report.txt".into()] {
            assert!(dir.path().join(&name).exists(), "{name} missing");
        }
        let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        let probes = std::fs::read(dir.path().join("probes.csv")).unwrap();
        assert!(manifest.contains(&format!("{}  probes.csv", hex::encode(Sha256::digest(&probes)))));
        assert!(manifest.contains("nodes_per_axis = 31"));
        assert!(manifest.contains("peak_memory_kib"));
        let csv = std::fs::read_to_string(dir.path().join(format!("snapshot_{label}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 31 * 31 + 1);
        assert_eq!(out.focal.len(), 2);
        assert_eq!(std::fs::read_to_string(dir.path().join("probes.csv")).unwrap().lines().count(), 41);
    }

    #[test]
    fn snapshot_times_snap_to_the_nearest_step() {
        assert_eq!(snapshot_step(5.7623e-10, 8.339e-13, 1000), 691);
        assert_eq!(snapshot_step(1.0, 1e-3, 10), 10);
        assert_eq!(snapshot_step(0.0, 1e-3, 10), 0);
    }

    #[test]
    fn sweep_parameters_parse_and_keep_the_horizon() {
        let c = ScenarioConfig::default();
        let p: SweepParam = "nodes".parse().unwrap();
        let c31 = p.apply(&c, 31.0).unwrap();
        assert_eq!(c31.domain.nodes_per_axis, 31);
        assert!((c31.horizon() - c.horizon()).abs() <= c31.dt());
        assert!(p.apply(&c, 30.5).is_err());
        assert!("bogus".parse::<SweepParam>().is_err());
        let a = "alpha_c".parse::<SweepParam>().unwrap().apply(&c, 2.0).unwrap();
        assert_eq!((a.rbf.alpha_c, a.time.steps), (2.0, c.time.steps));
    }

    #[test]
    fn reference_comparison_writes_an_error_series() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(dir.path());
        c.time.steps = 120;
        c.reference.enabled = true;
        c.reference.cells_per_wavelength = 30.0;
        c.analysis.l2_stride = 10;
        let out = run_scenario(&c).unwrap();
        let series = out.l2.unwrap();
        assert!(!series.values.is_empty());
        assert!(series.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
        assert_eq!(series.points, 31);
        assert!(dir.path().join("l2_error.csv").exists());
    }
}
