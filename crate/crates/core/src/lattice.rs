//! Staggered electric/magnetic node sets on a rectangular domain.
//!
//! Electric nodes sit on the closed uniform grid `x_i = i * h` (boundary
//! included). Magnetic nodes are offset by `h/2` along every active axis, so
//! they lie strictly inside the outermost electric ring and every interior
//! magnetic node is surrounded by its `2^dim` nearest electric nodes.

use crate::error::{Error, Result};

/// Cartesian coordinates in meters. Inactive axes are zero.
pub type Point = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Electric,
    Magnetic,
}

/// Per-axis depth of a node inside the PML, measured from the interior/PML
/// interface (zero for interior nodes).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmlDepthTag {
    pub depth: [f64; 3],
    pub thickness: [f64; 3],
}

impl PmlDepthTag {
    pub fn is_interior(&self) -> bool {
        self.depth.iter().all(|&d| d == 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct NodeLattice {
    kind: NodeKind,
    dim: usize,
    extents: [f64; 3],
    spacing: [f64; 3],
    counts: [usize; 3],
    offset: f64,
    positions: Vec<Point>,
    tags: Vec<PmlDepthTag>,
    bins: SpatialBins,
}

/// The electric and magnetic lattices of one domain.
#[derive(Clone, Debug)]
pub struct StaggeredLattice {
    pub electric: NodeLattice,
    pub magnetic: NodeLattice,
}

impl StaggeredLattice {
    /// Uniform staggered lattice with the same node count and PML depth on
    /// every axis. `extents` has two or three entries.
    pub fn build(extents: &[f64], nodes_per_axis: usize, pml_layers: usize) -> Result<Self> {
        let counts = vec![nodes_per_axis; extents.len()];
        let layers = vec![pml_layers; extents.len()];
        Self::with_counts(extents, &counts, &layers)
    }

    /// General form with per-axis node counts and PML layer counts.
    pub fn with_counts(extents: &[f64], counts: &[usize], pml_layers: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if !(2..=3).contains(&dim) || counts.len() != dim || pml_layers.len() != dim {
            return Err(Error::Lattice("lattice needs 2 or 3 axes with matching counts".into()));
        }
        let mut problems = Vec::new();
        for a in 0..dim {
            if !(extents[a] > 0.0) || !extents[a].is_finite() {
                problems.push(format!("extent on axis {a} must be positive, got {}", extents[a]));
            }
            if counts[a] < 2 {
                problems.push(format!("axis {a} needs at least 2 nodes, got {}", counts[a]));
            }
            if pml_layers[a] > 0 && 2 * pml_layers[a] >= counts[a] {
                problems.push(format!(
                    "{} PML layers on axis {a} would consume all {} nodes",
                    pml_layers[a], counts[a]
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Lattice(problems.join("; ")));
        }

        let mut ext = [0.0; 3];
        let mut spacing = [0.0; 3];
        let mut e_counts = [1usize; 3];
        let mut h_counts = [1usize; 3];
        let mut layers = [0usize; 3];
        for a in 0..dim {
            ext[a] = extents[a];
            e_counts[a] = counts[a];
            h_counts[a] = counts[a] - 1;
            spacing[a] = extents[a] / (counts[a] - 1) as f64;
            layers[a] = pml_layers[a];
        }

        let electric = NodeLattice::generate(NodeKind::Electric, dim, ext, spacing, e_counts, 0.0, counts_as_f64(&e_counts), layers);
        let magnetic = NodeLattice::generate(NodeKind::Magnetic, dim, ext, spacing, h_counts, 0.5, counts_as_f64(&e_counts), layers);
        Ok(Self { electric, magnetic })
    }

    /// Smallest node spacing over all axes.
    pub fn d_min(&self) -> f64 {
        self.electric.d_min()
    }
}

fn counts_as_f64(c: &[usize; 3]) -> [f64; 3] {
    [c[0] as f64, c[1] as f64, c[2] as f64]
}

impl NodeLattice {
    #[allow(clippy::too_many_arguments)]
    fn generate(
        kind: NodeKind,
        dim: usize,
        extents: [f64; 3],
        spacing: [f64; 3],
        counts: [usize; 3],
        offset: f64,
        e_counts: [f64; 3],
        layers: [usize; 3],
    ) -> Self {
        let total: usize = counts.iter().product();
        let mut positions = Vec::with_capacity(total);
        let mut tags = Vec::with_capacity(total);
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let idx = [i, j, k];
                    let mut p = [0.0; 3];
                    let mut tag = PmlDepthTag { depth: [0.0; 3], thickness: [0.0; 3] };
                    for a in 0..dim {
                        // position in units of the spacing
                        let s = idx[a] as f64 + offset;
                        p[a] = s * spacing[a];
                        let l = layers[a] as f64;
                        let last = e_counts[a] - 1.0;
                        let steps = (l - s).max(s - (last - l)).max(0.0);
                        tag.depth[a] = steps * spacing[a];
                        tag.thickness[a] = l * spacing[a];
                    }
                    positions.push(p);
                    tags.push(tag);
                }
            }
        }
        let bins = SpatialBins::new(&positions, dim, extents, spacing);
        Self { kind, dim, extents, spacing, counts, offset, positions, tags, bins }
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, node: usize) -> Point {
        self.positions[node]
    }

    pub fn tags(&self) -> &[PmlDepthTag] {
        &self.tags
    }

    pub fn tag(&self, node: usize) -> PmlDepthTag {
        self.tags[node]
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn d_min(&self) -> f64 {
        self.spacing[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Node counts per axis (1 on inactive axes).
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    /// Offset of the first node from the origin, in units of the spacing.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn index_of(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    pub fn grid_index(&self, node: usize) -> [usize; 3] {
        let i = node % self.counts[0];
        let rest = node / self.counts[0];
        [i, rest % self.counts[1], rest / self.counts[1]]
    }

    /// True when the node touches the outer boundary of the domain.
    pub fn on_boundary(&self, node: usize) -> bool {
        if self.kind == NodeKind::Magnetic {
            return false;
        }
        let g = self.grid_index(node);
        (0..self.dim).any(|a| g[a] == 0 || g[a] + 1 == self.counts[a])
    }

    /// Node closest to `p` (ties to the lowest index).
    pub fn nearest(&self, p: Point) -> Result<usize> {
        Ok(self.nearest_neighbors(p, 1)?[0])
    }

    /// Exactly `count` node indices sorted by ascending distance from `query`,
    /// ties broken by ascending index.
    pub fn nearest_neighbors(&self, query: Point, count: usize) -> Result<Vec<usize>> {
        if self.positions.is_empty() {
            return Err(Error::EmptyLattice);
        }
        if count > self.positions.len() {
            return Err(Error::TooManyNeighbors { requested: count, available: self.positions.len() });
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let h = self.d_min();
        let key = |n: usize| -> (u64, usize) {
            let d2 = dist2(&self.positions[n], &query);
            // quantized so geometric ties compare equal despite rounding
            (((d2 / (h * h)) * 1e9).round() as u64, n)
        };

        let center = self.bins.bin_of(&query);
        let max_ring = self.bins.dims.iter().copied().max().unwrap_or(1);
        let mut candidates: Vec<(u64, usize)> = Vec::new();
        for ring in 0..=max_ring {
            self.bins.visit_ring(center, ring, |n| candidates.push(key(n)));
            let radius = ring as f64 * h;
            let limit = ((radius * radius / (h * h)) * 1e9).round() as u64;
            let within = candidates.iter().filter(|c| c.0 <= limit).count();
            if within >= count || candidates.len() == self.positions.len() {
                break;
            }
        }
        candidates.sort_unstable();
        Ok(candidates.into_iter().take(count).map(|c| c.1).collect())
    }
}

pub(crate) fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Uniform bins of side equal to the lattice spacing.
#[derive(Clone, Debug)]
struct SpatialBins {
    dim: usize,
    cell: [f64; 3],
    dims: [usize; 3],
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl SpatialBins {
    fn new(positions: &[Point], dim: usize, extents: [f64; 3], cell: [f64; 3]) -> Self {
        let mut dims = [1usize; 3];
        for a in 0..dim {
            dims[a] = (extents[a] / cell[a]).floor() as usize + 1;
        }
        let mut this = Self { dim, cell, dims, starts: Vec::new(), items: Vec::new() };
        let nbins: usize = dims.iter().product();
        let mut counts = vec![0usize; nbins + 1];
        let owners: Vec<usize> = positions.iter().map(|p| this.flat(this.bin_of(p))).collect();
        for &b in &owners {
            counts[b + 1] += 1;
        }
        for b in 0..nbins {
            counts[b + 1] += counts[b];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; positions.len()];
        for (n, &b) in owners.iter().enumerate() {
            items[fill[b]] = n;
            fill[b] += 1;
        }
        this.starts = counts;
        this.items = items;
        this
    }

    fn bin_of(&self, p: &Point) -> [usize; 3] {
        let mut b = [0usize; 3];
        for a in 0..self.dim {
            let f = (p[a] / self.cell[a]).floor();
            b[a] = if f <= 0.0 { 0 } else { (f as usize).min(self.dims[a] - 1) };
        }
        b
    }

    fn flat(&self, b: [usize; 3]) -> usize {
        b[0] + self.dims[0] * (b[1] + self.dims[1] * b[2])
    }

    fn visit_ring(&self, center: [usize; 3], ring: usize, mut f: impl FnMut(usize)) {
        let r = ring as isize;
        let lo = |a: usize| if a < self.dim { -r } else { 0 };
        let hi = |a: usize| if a < self.dim { r } else { 0 };
        for dz in lo(2)..=hi(2) {
            for dy in lo(1)..=hi(1) {
                for dx in lo(0)..=hi(0) {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                        continue;
                    }
                    let c = [center[0] as isize + dx, center[1] as isize + dy, center[2] as isize + dz];
                    if (0..3).any(|a| c[a] < 0 || c[a] >= self.dims[a] as isize) {
                        continue;
                    }
                    let b = self.flat([c[0] as usize, c[1] as usize, c[2] as usize]);
                    for &n in &self.items[self.starts[b]..self.starts[b + 1]] {
                        f(n);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lens_lattice() -> StaggeredLattice {
        StaggeredLattice::build(&[0.03, 0.03], 61, 3).unwrap()
    }

    fn brute_force(lat: &NodeLattice, q: Point, count: usize) -> Vec<usize> {
        let h = lat.d_min();
        let mut all: Vec<(u64, usize)> = (0..lat.len())
            .map(|n| ((dist2(&lat.position(n), &q) / (h * h) * 1e9).round() as u64, n))
            .collect();
        all.sort();
        all.into_iter().take(count).map(|x| x.1).collect()
    }

    #[test]
    fn spacing_matches_node_count() {
        let lat = lens_lattice();
        assert!((lat.d_min() - 0.0005).abs() < 1e-15);
        assert_eq!(lat.electric.len(), 61 * 61);
        assert_eq!(lat.magnetic.len(), 60 * 60);
    }

    #[test]
    fn outermost_node_depth_is_three_layers() {
        let lat = lens_lattice();
        let tag = lat.electric.tag(0);
        assert!((tag.depth[0] - 0.0015).abs() < 1e-15);
        assert!((tag.depth[1] - 0.0015).abs() < 1e-15);
        let interface = lat.electric.index_of(3, 30, 0);
        assert_eq!(lat.electric.tag(interface).depth[0], 0.0);
        assert!(lat.electric.tag(lat.electric.index_of(30, 30, 0)).is_interior());
        // magnetic nodes inside the layer sit at half-integer depths
        let h0 = lat.magnetic.tag(lat.magnetic.index_of(0, 30, 0));
        assert!((h0.depth[0] - 2.5 * 0.0005).abs() < 1e-15);
    }

    #[test]
    fn two_node_lattice_is_all_interior() {
        let lat = StaggeredLattice::build(&[1.0, 1.0], 2, 0).unwrap();
        assert_eq!(lat.electric.len(), 4);
        assert_eq!(lat.magnetic.len(), 1);
        assert!(lat.electric.tags().iter().all(|t| t.is_interior()));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(StaggeredLattice::build(&[0.0, 1.0], 10, 0).is_err());
        assert!(StaggeredLattice::build(&[1.0, 1.0], 10, 5).is_err());
        assert!(StaggeredLattice::build(&[1.0, 1.0], 1, 0).is_err());
    }

    #[test]
    fn stagger_offset_is_half_spacing() {
        let lat = lens_lattice();
        let p = lat.magnetic.position(lat.magnetic.index_of(7, 11, 0));
        assert!((p[0] - 7.5 * 0.0005).abs() < 1e-15);
        assert!((p[1] - 11.5 * 0.0005).abs() < 1e-15);
    }

    #[test]
    fn query_at_own_position_returns_self() {
        let lat = lens_lattice();
        for n in [0, 17, 1830, 3720] {
            let got = lat.electric.nearest_neighbors(lat.electric.position(n), 1).unwrap();
            assert_eq!(got, vec![n]);
        }
    }

    #[test]
    fn interior_magnetic_node_sees_four_equidistant_electric_nodes() {
        let lat = lens_lattice();
        let h = lat.d_min();
        for j in 1..59 {
            for i in 1..59 {
                let q = lat.magnetic.position(lat.magnetic.index_of(i, j, 0));
                let nb = lat.electric.nearest_neighbors(q, 4).unwrap();
                for n in nb {
                    let d = dist2(&lat.electric.position(n), &q).sqrt();
                    assert!((d / (h / 2f64.sqrt()) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_count_returns_whole_lattice_sorted() {
        let lat = StaggeredLattice::build(&[1.0, 1.0], 7, 1).unwrap();
        let q = [0.31, 0.77, 0.0];
        let got = lat.electric.nearest_neighbors(q, lat.electric.len()).unwrap();
        assert_eq!(got, brute_force(&lat.electric, q, lat.electric.len()));
    }

    #[test]
    fn errors_on_oversized_request() {
        let lat = StaggeredLattice::build(&[1.0, 1.0], 3, 0).unwrap();
        assert!(matches!(
            lat.magnetic.nearest_neighbors([0.5, 0.5, 0.0], 5),
            Err(Error::TooManyNeighbors { .. })
        ));
    }

    #[test]
    fn depth_monotone_toward_faces() {
        let lat = lens_lattice();
        let e = &lat.electric;
        for j in 0..61 {
            for i in 0..30 {
                let a = e.tag(e.index_of(i, j, 0)).depth[0];
                let b = e.tag(e.index_of(i + 1, j, 0)).depth[0];
                assert!(a >= b);
                let c = e.tag(e.index_of(60 - i, j, 0)).depth[0];
                let d = e.tag(e.index_of(59 - i, j, 0)).depth[0];
                assert!(c >= d);
            }
        }
    }

    #[test]
    fn three_dimensional_counts() {
        let lat = StaggeredLattice::with_counts(&[0.01, 0.01, 0.004], &[11, 11, 5], &[2, 2, 0]).unwrap();
        assert_eq!(lat.electric.len(), 11 * 11 * 5);
        assert_eq!(lat.magnetic.len(), 10 * 10 * 4);
        assert_eq!(lat.electric.grid_index(lat.electric.index_of(3, 4, 2)), [3, 4, 2]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn binned_search_matches_brute_force(
                x in -0.1f64..1.1, y in -0.1f64..1.1, count in 1usize..40, n in 4usize..12,
            ) {
                let lat = StaggeredLattice::build(&[1.0, 1.0], n, 1).unwrap();
                let q = [x, y, 0.0];
                for l in [&lat.electric, &lat.magnetic] {
                    let c = count.min(l.len());
                    let a = l.nearest_neighbors(q, c).unwrap();
                    prop_assert_eq!(&a, &brute_force(l, q, c));
                    prop_assert_eq!(a, l.nearest_neighbors(q, c).unwrap());
                }
            }
        }
    }
}
