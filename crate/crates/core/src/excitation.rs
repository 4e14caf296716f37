//! Windowed sinusoidal point source.
//!
//! The signal ramps on over `m` cycles with the quintic smoothstep
//! `10x^3 - 15x^4 + 6x^5`, holds for `n` cycles, ramps off over `m` cycles and
//! stays zero afterwards.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::NodeLattice;

/// Relative weight below which a Gaussian footprint is cut off.
pub const FOOTPRINT_CUTOFF: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowedSine {
    pub frequency: f64,
    pub ramp_cycles: u32,
    pub hold_cycles: u32,
    pub amplitude: f64,
}

fn smoothstep(x: f64) -> f64 {
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

impl WindowedSine {
    pub fn new(frequency: f64, ramp_cycles: u32, hold_cycles: u32, amplitude: f64) -> Result<Self> {
        if !(frequency > 0.0) {
            return Err(Error::InvalidArgument(format!("source frequency must be positive, got {frequency}")));
        }
        Ok(Self { frequency, ramp_cycles, hold_cycles, amplitude })
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    /// Length of the nonzero part of the signal (s).
    pub fn duration(&self) -> f64 {
        (2 * self.ramp_cycles + self.hold_cycles) as f64 * self.period()
    }

    /// Turn-on window value.
    pub fn g_on(&self, t: f64) -> f64 {
        let mt = self.ramp_cycles as f64 * self.period();
        smoothstep(1.0 - (mt - t) / mt)
    }

    /// Turn-off window value.
    pub fn g_off(&self, t: f64) -> f64 {
        let tp = self.period();
        let mt = self.ramp_cycles as f64 * tp;
        let start = (self.ramp_cycles + self.hold_cycles) as f64 * tp;
        1.0 - smoothstep((t - start) / mt)
    }

    /// Unit-amplitude waveform at time `t`.
    pub fn waveform(&self, t: f64) -> f64 {
        let tp = self.period();
        let on_end = self.ramp_cycles as f64 * tp;
        let hold_end = (self.ramp_cycles + self.hold_cycles) as f64 * tp;
        let off_end = self.duration();
        let s = (self.angular_frequency() * t).sin();
        if t < 0.0 || t >= off_end {
            0.0
        } else if t < on_end {
            self.g_on(t) * s
        } else if t < hold_end {
            s
        } else {
            self.g_off(t) * s
        }
    }

    /// Source signal `amplitude * waveform(t)` in V/m.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.amplitude * self.waveform(t)
    }
}

/// Additive soft source centred on one electric node.
///
/// `footprint` lists `(node, weight)` pairs with weights summing to one. A
/// point source has the single entry `(node, 1.0)`; a Gaussian footprint
/// spreads the same total increment over nearby nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftSource {
    pub node: usize,
    pub signal: WindowedSine,
    pub footprint: Vec<(usize, f64)>,
}

impl SoftSource {
    pub fn point(node: usize, signal: WindowedSine) -> Self {
        Self { node, signal, footprint: vec![(node, 1.0)] }
    }

    /// Gaussian footprint of standard deviation `width` (m) around `node`,
    /// truncated where the weight falls below 1e-6 of the peak. A zero width
    /// gives a point source.
    pub fn gaussian(lattice: &NodeLattice, node: usize, signal: WindowedSine, width: f64) -> Result<Self> {
        if node >= lattice.len() {
            return Err(Error::InvalidArgument(format!("source node {node} outside a lattice of {} nodes", lattice.len())));
        }
        if !lattice.tag(node).is_interior() {
            return Err(Error::SourceInPml(node));
        }
        if width == 0.0 {
            return Ok(Self::point(node, signal));
        }
        if !(width > 0.0) {
            return Err(Error::InvalidArgument(format!("source width must be non-negative, got {width}")));
        }
        let c = lattice.position(node);
        let mut footprint = Vec::new();
        for (m, p) in lattice.positions().iter().enumerate() {
            let r2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
            let w = (-r2 / (2.0 * width * width)).exp();
            if w >= FOOTPRINT_CUTOFF {
                if !lattice.tag(m).is_interior() {
                    return Err(Error::SourceInPml(m));
                }
                footprint.push((m, w));
            }
        }
        let total: f64 = footprint.iter().map(|f| f.1).sum();
        for f in &mut footprint {
            f.1 /= total;
        }
        Ok(Self { node, signal, footprint })
    }

    /// Per-step `E_z` increment for a unit signal, `w0 * dt`; the injected
    /// rate per unit time does not depend on the step size.
    pub fn gain(&self, dt: f64) -> f64 {
        self.signal.angular_frequency() * dt
    }

    /// Adds the source contribution at time `t` to the split `E_z` arrays.
    pub fn inject(&self, e_zx: &mut [f64], e_zy: &mut [f64], t: f64, dt: f64) {
        let value = self.signal.evaluate(t);
        let w0 = self.signal.angular_frequency();
        for &(n, w) in &self.footprint {
            inject_soft_source(&mut e_zx[n], &mut e_zy[n], w * value, w0, dt);
        }
    }
}

/// Adds `signal * w0 * dt` to `E_z`, half to each split component so that
/// `E_zx + E_zy` carries the full increment.
pub fn inject_soft_source(e_zx: &mut f64, e_zy: &mut f64, signal: f64, omega0: f64, dt: f64) {
    let half = 0.5 * signal * omega0 * dt;
    *e_zx += half;
    *e_zy += half;
}
