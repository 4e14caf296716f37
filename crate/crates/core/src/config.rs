//! Scenario configuration (TOML). The defaults reproduce the perfect-lens
//! run: a 3 cm square domain with 61 nodes per axis, a 3-layer PML, a 1 cm
//! Drude slab centred at y = 1.5 cm and a 30 GHz source half a slab
//! thickness above it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for randomized validation suites; the solver itself is
    /// deterministic.
    pub seed: u64,
    pub domain: DomainConfig,
    pub pml: PmlConfig,
    pub slab: SlabConfig,
    pub source: SourceConfig,
    pub rbf: RbfConfig,
    pub time: TimeConfig,
    pub output: OutputConfig,
    pub analysis: AnalysisConfig,
    pub reference: ReferenceConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub extent_m: [f64; 2],
    pub nodes_per_axis: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmlConfig {
    pub layers: usize,
    pub order: u32,
    pub reflection: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlabConfig {
    pub enabled: bool,
    pub center_y_m: f64,
    pub thickness_m: f64,
    pub plasma_frequency_rad_s: f64,
    pub collision_frequency_rad_s: f64,
    /// Medium fraction given to nodes lying exactly on a slab face.
    pub face_fill: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub position_m: [f64; 2],
    pub frequency_hz: f64,
    pub ramp_cycles: u32,
    pub hold_cycles: u32,
    pub amplitude_v_m: f64,
    /// Standard deviation of the Gaussian footprint (m); 0 gives a
    /// single-node source.
    pub width_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfConfig {
    pub alpha_c: f64,
    pub stencil_size: usize,
    /// Use every node in every stencil instead of the nearest ones.
    pub global: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt_divisor: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshot_times_s: Vec<f64>,
    pub probes_m: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Image-plane height; defaults to half a slab thickness beyond the
    /// slab's back face.
    pub image_plane_y_m: Option<f64>,
    /// Start of the L² time-averaging window.
    pub average_from_s: f64,
    /// Compare with the reference every this many steps.
    pub l2_stride: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub enabled: bool,
    pub cells_per_wavelength: f64,
    pub courant: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domain: DomainConfig::default(),
            pml: PmlConfig::default(),
            slab: SlabConfig::default(),
            source: SourceConfig::default(),
            rbf: RbfConfig::default(),
            time: TimeConfig::default(),
            output: OutputConfig::default(),
            analysis: AnalysisConfig::default(),
            reference: ReferenceConfig::default(),
        }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { extent_m: [0.03, 0.03], nodes_per_axis: 61 }
    }
}

impl Default for PmlConfig {
    fn default() -> Self {
        Self { layers: 3, order: 2, reflection: 1e-3 }
    }
}

impl Default for SlabConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            center_y_m: 0.015,
            thickness_m: 0.01,
            plasma_frequency_rad_s: 2.666e11,
            collision_frequency_rad_s: 0.0,
            face_fill: 0.5,
        }
    }
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            position_m: [0.015, 0.025],
            frequency_hz: 30e9,
            ramp_cycles: 5,
            hold_cycles: 10,
            amplitude_v_m: 1.0,
            width_m: 5e-4,
        }
    }
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self { alpha_c: 0.5, stencil_size: 12, global: false }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt_divisor: 2.0, steps: 691 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshot_times_s: vec![5.7623e-10], probes_m: vec![[0.015, 0.015], [0.015, 0.005]] }
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { image_plane_y_m: None, average_from_s: 2e-10, l2_stride: 1 }
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { enabled: false, cells_per_wavelength: 100.0, courant: 0.95 }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Node spacing of the default square lattice.
    pub fn d_min(&self) -> f64 {
        let n = self.domain.nodes_per_axis.max(2) - 1;
        self.domain.extent_m.iter().fold(f64::INFINITY, |m, &l| m.min(l / n as f64))
    }

    pub fn dt(&self) -> f64 {
        self.d_min() / self.time.dt_divisor * (EPS0 * MU0).sqrt()
    }

    /// Time reached after the configured number of steps.
    pub fn horizon(&self) -> f64 {
        self.time.steps as f64 * self.dt()
    }

    pub fn slab_bounds(&self) -> (f64, f64) {
        let h = 0.5 * self.slab.thickness_m;
        (self.slab.center_y_m - h, self.slab.center_y_m + h)
    }

    /// Height of the image plane used for L² comparisons.
    pub fn image_plane_y(&self) -> f64 {
        if let Some(y) = self.analysis.image_plane_y_m {
            return y;
        }
        let (lo, hi) = self.slab_bounds();
        let half = 0.5 * self.slab.thickness_m;
        if self.source.position_m[1] > hi { lo - half } else { hi + half }
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                bad.push(msg);
            }
        };
        let [lx, ly] = self.domain.extent_m;
        need(lx > 0.0 && ly > 0.0, format!("domain.extent_m must be positive, got [{lx}, {ly}]"));
        let n = self.domain.nodes_per_axis;
        need(n >= 2, format!("domain.nodes_per_axis must be at least 2, got {n}"));
        let layers = self.pml.layers;
        need(layers == 0 || 2 * layers < n, format!("pml.layers = {layers} leaves no interior for {n} nodes"));
        let r = self.pml.reflection;
        need(r > 0.0 && r < 1.0, format!("pml.reflection must lie in (0, 1), got {r}"));

        let d = self.d_min();
        let pml_t = layers as f64 * d;
        let inside = |x: f64, y: f64| x >= 0.0 && x <= lx && y >= 0.0 && y <= ly;
        let interior = |x: f64, y: f64| x >= pml_t && x <= lx - pml_t && y >= pml_t && y <= ly - pml_t;

        if self.slab.enabled {
            let s = &self.slab;
            need(s.thickness_m > 0.0, format!("slab.thickness_m must be positive, got {}", s.thickness_m));
            let (lo, hi) = self.slab_bounds();
            need(lo >= 0.0 && hi <= ly, format!("slab [{lo}, {hi}] does not fit the domain height {ly}"));
            need(s.plasma_frequency_rad_s >= 0.0, format!("slab.plasma_frequency_rad_s must be non-negative, got {}", s.plasma_frequency_rad_s));
            need(
                s.collision_frequency_rad_s >= 0.0,
                format!("slab.collision_frequency_rad_s must be non-negative, got {}", s.collision_frequency_rad_s),
            );
            need((0.0..=1.0).contains(&s.face_fill), format!("slab.face_fill must lie in [0, 1], got {}", s.face_fill));
            let y = self.source.position_m[1];
            need(!(y >= lo && y <= hi), format!("source.position_m y = {y} lies inside the slab"));
        }

        let src = &self.source;
        let [sx, sy] = src.position_m;
        need(inside(sx, sy), format!("source.position_m [{sx}, {sy}] lies outside the domain"));
        need(!inside(sx, sy) || interior(sx, sy), format!("source.position_m [{sx}, {sy}] lies inside the PML"));
        need(src.frequency_hz > 0.0, format!("source.frequency_hz must be positive, got {}", src.frequency_hz));
        need(src.ramp_cycles >= 1, "source.ramp_cycles must be at least 1".to_string());
        need(src.amplitude_v_m.is_finite(), format!("source.amplitude_v_m must be finite, got {}", src.amplitude_v_m));
        need(src.width_m >= 0.0, format!("source.width_m must be non-negative, got {}", src.width_m));

        need(self.rbf.alpha_c > 0.0, format!("rbf.alpha_c must be positive, got {}", self.rbf.alpha_c));
        let sz = self.rbf.stencil_size;
        need(self.rbf.global || (3..=n * n).contains(&sz), format!("rbf.stencil_size must lie in [3, {}], got {sz}", n * n));

        let div = self.time.dt_divisor;
        need(div >= 1.0, format!("time.dt_divisor must be at least 1 (stability bound), got {div}"));

        let horizon = self.horizon();
        for &t in &self.output.snapshot_times_s {
            need(t >= 0.0 && t <= horizon * (1.0 + 1e-9), format!("output.snapshot_times_s entry {t} outside [0, {horizon:e}]"));
        }
        for p in &self.output.probes_m {
            need(inside(p[0], p[1]), format!("output.probes_m entry [{}, {}] lies outside the domain", p[0], p[1]));
        }

        let yi = self.image_plane_y();
        need(yi >= 0.0 && yi <= ly, format!("image plane y = {yi} lies outside the domain"));
        need(self.analysis.l2_stride >= 1, "analysis.l2_stride must be at least 1".to_string());
        need(self.analysis.average_from_s >= 0.0, format!("analysis.average_from_s must be non-negative, got {}", self.analysis.average_from_s));

        let rf = &self.reference;
        need(rf.cells_per_wavelength > 0.0, format!("reference.cells_per_wavelength must be positive, got {}", rf.cells_per_wavelength));
        need(rf.courant > 0.0 && rf.courant <= 1.0, format!("reference.courant must lie in (0, 1], got {}", rf.courant));

        if bad.is_empty() { Ok(()) } else { Err(Error::Config(bad)) }
    }
}
