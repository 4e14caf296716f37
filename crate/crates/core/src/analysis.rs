//! Post-processing: normalized L² errors, focus localization and snapshot
//! export.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{NodeLattice, Point};
use crate::media::SlabGeometry;

/// Divides a profile by its largest magnitude.
pub fn normalize(profile: &[f64]) -> Result<Vec<f64>> {
    let peak = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::ZeroProfile);
    }
    Ok(profile.iter().map(|v| v / peak).collect())
}

/// Sum of squared differences between the normalized profiles.
pub fn l2_error(profile: &[f64], reference: &[f64]) -> Result<f64> {
    if profile.len() != reference.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), got: profile.len() });
    }
    let a = normalize(profile)?;
    let b = normalize(reference)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// L² error against time for one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Number of image-plane points per comparison.
    pub points: usize,
    pub nodes_per_axis: usize,
    pub alpha_c: f64,
    /// Cell size of the reference grid (m).
    pub reference_cell: f64,
}

impl ErrorSeries {
    pub fn push(&mut self, time: f64, value: f64) {
        self.times.push(time);
        self.values.push(value);
    }

    /// Mean of the samples taken at or after `from` seconds.
    pub fn time_average(&self, from: f64) -> Option<f64> {
        let picked: Vec<f64> = self.times.iter().zip(&self.values).filter(|(t, _)| **t >= from).map(|(_, v)| *v).collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# points={} nodes_per_axis={} alpha_c={} reference_cell_m={}",
            self.points, self.nodes_per_axis, self.alpha_c, self.reference_cell
        );
        s.push_str("time_s,l2\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:e},{v:e}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FocalReport {
    /// Detected focus nearest the front face (m along the scan line).
    pub inside: Option<f64>,
    pub beyond: Option<f64>,
    pub expected_inside: f64,
    pub expected_beyond: f64,
    pub d_min: f64,
    /// False when fewer than two local maxima were found.
    pub formed: bool,
}

impl FocalReport {
    /// Localization errors in units of `d_min`.
    pub fn errors(&self) -> Option<(f64, f64)> {
        Some(((self.inside? - self.expected_inside).abs() / self.d_min, (self.beyond? - self.expected_beyond).abs() / self.d_min))
    }

    /// True when both foci exist and lie within `tolerance` spacings.
    pub fn within(&self, tolerance: f64) -> bool {
        self.errors().is_some_and(|(a, b)| a <= tolerance && b <= tolerance)
    }

    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.6e}"));
        let mut s = String::new();
        let _ = writeln!(s, "formed {}", self.formed);
        let _ = writeln!(s, "inside_m {}", fmt(self.inside));
        let _ = writeln!(s, "expected_inside_m {:.6e}", self.expected_inside);
        let _ = writeln!(s, "beyond_m {}", fmt(self.beyond));
        let _ = writeln!(s, "expected_beyond_m {:.6e}", self.expected_beyond);
        let _ = writeln!(s, "d_min_m {:.6e}", self.d_min);
        match self.errors() {
            Some((a, b)) => {
                let _ = writeln!(s, "error_inside_dmin {a:.4}");
                let _ = writeln!(s, "error_beyond_dmin {b:.4}");
            }
            None => s.push_str("error_inside_dmin none\nerror_beyond_dmin none\n"),
        }
        s
    }
}

/// Vertex of the parabola through three equally spaced samples, as an
/// offset from the middle one in units of the spacing.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * mid + right;
    if curvature == 0.0 {
        0.0
    } else {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    }
}

/// Finds the two strongest local maxima of `|values|` on the side of the
/// slab's front face away from the source and compares them with the
/// images expected at half the slab thickness inside and beyond the slab.
///
/// `coords` must be increasing and equally spaced with step `spacing`.
pub fn locate_foci_on_line(coords: &[f64], values: &[f64], slab: &SlabGeometry, source: f64, spacing: f64) -> Result<FocalReport> {
    if coords.len() != values.len() {
        return Err(Error::LengthMismatch { expected: coords.len(), got: values.len() });
    }
    let half = 0.5 * slab.thickness();
    let above = source > slab.y_max;
    let (front, back) = if above { (slab.y_max, slab.y_min) } else { (slab.y_min, slab.y_max) };
    let dir = if above { -1.0 } else { 1.0 };
    let expected_inside = front + dir * half;
    let expected_beyond = back + dir * half;

    let mag: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let tol = 1e-9 * spacing;
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for k in 1..mag.len().saturating_sub(1) {
        let past_front = if above { coords[k] < front - tol } else { coords[k] > front + tol };
        if !past_front {
            continue;
        }
        if mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] > 0.0 {
            let pos = coords[k] + parabolic_offset(mag[k - 1], mag[k], mag[k + 1]) * spacing;
            peaks.push((mag[k], pos));
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let mut report = FocalReport { inside: None, beyond: None, expected_inside, expected_beyond, d_min: spacing, formed: false };
    if peaks.len() >= 2 {
        let (p, q) = (peaks[0].1, peaks[1].1);
        // the focus nearer the front face is the one inside the slab
        let (near, far) = if (p - front).abs() <= (q - front).abs() { (p, q) } else { (q, p) };
        report.inside = Some(near);
        report.beyond = Some(far);
        report.formed = true;
    }
    Ok(report)
}

/// Column of electric nodes through the source, normal to the slab.
pub fn source_line(lattice: &NodeLattice, source: Point) -> Result<Vec<usize>> {
    let [nx, ny, _] = lattice.counts();
    let anchor = lattice.nearest(source)?;
    let [i, _, k] = lattice.grid_index(anchor);
    debug_assert!(i < nx);
    Ok((0..ny).map(|j| lattice.index_of(i, j, k)).collect())
}

/// [`locate_foci_on_line`] along the lattice column through `source`.
pub fn locate_foci(lattice: &NodeLattice, e_z: &[f64], slab: &SlabGeometry, source: Point) -> Result<FocalReport> {
    if e_z.len() != lattice.len() {
        return Err(Error::LengthMismatch { expected: lattice.len(), got: e_z.len() });
    }
    let line = source_line(lattice, source)?;
    let coords: Vec<f64> = line.iter().map(|&n| lattice.position(n)[1]).collect();
    let values: Vec<f64> = line.iter().map(|&n| e_z[n]).collect();
    locate_foci_on_line(&coords, &values, slab, source[1], lattice.spacing()[1])
}

/// Electric nodes on the lattice row closest to height `y`.
pub fn image_plane(lattice: &NodeLattice, y: f64) -> Result<Vec<usize>> {
    let [nx, _, _] = lattice.counts();
    let anchor = lattice.nearest([lattice.position(0)[0], y, 0.0])?;
    let [_, j, k] = lattice.grid_index(anchor);
    Ok((0..nx).map(|i| lattice.index_of(i, j, k)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Pgm,
}

/// CSV text with header `x_m,y_m,e_z`, one row per node in lattice order.
pub fn snapshot_csv(lattice: &NodeLattice, e_z: &[f64]) -> String {
    let mut s = String::with_capacity(40 * e_z.len() + 16);
    s.push_str("x_m,y_m,e_z\n");
    for (p, v) in lattice.positions().iter().zip(e_z) {
        let _ = writeln!(s, "{:e},{:e},{:e}", p[0], p[1], v);
    }
    s
}

/// Binary 8-bit PGM of a 2D lattice field, top row at the largest y.
/// Values map linearly from the field minimum (0) to its maximum (255); a
/// constant field maps to 128.
pub fn snapshot_pgm(lattice: &NodeLattice, e_z: &[f64]) -> Vec<u8> {
    let [nx, ny, _] = lattice.counts();
    let lo = e_z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = e_z[lattice.index_of(i, j, 0)];
            let g = if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() as u8 } else { 128 };
            out.push(g);
        }
    }
    out
}

pub fn export_snapshot(lattice: &NodeLattice, e_z: &[f64], path: &Path, format: SnapshotFormat) -> Result<()> {
    if e_z.is_empty() || e_z.len() != lattice.len() {
        return Err(Error::LengthMismatch { expected: lattice.len(), got: e_z.len() });
    }
    let bytes = match format {
        SnapshotFormat::Csv => snapshot_csv(lattice, e_z).into_bytes(),
        SnapshotFormat::Pgm => snapshot_pgm(lattice, e_z),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
