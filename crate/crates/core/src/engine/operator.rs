use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{NodeLattice, Point};
use crate::rbf::{build_stencil, MomentSystem, RbfKernel};

/// How the source nodes of a stencil are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilMode {
    /// The `n` nearest source nodes.
    Local(usize),
    /// Every source node; one factorization shared by all targets.
    Global,
}

/// Sparse derivative rows: for each target node, the contributing source
/// nodes and their `d/dx`, `d/dy`, `d/dz` shape-function weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StencilOperator {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: [Vec<f64>; 3],
    conditions: Vec<f64>,
}

/// One row of a [`StencilOperator`] under construction.
#[derive(Clone, Debug, Default)]
pub struct StencilRow {
    pub nodes: Vec<usize>,
    pub weights: [Vec<f64>; 3],
    pub condition: f64,
}

impl StencilOperator {
    pub fn from_rows(rows: Vec<StencilRow>) -> Self {
        let mut op = StencilOperator { row_ptr: vec![0], ..Default::default() };
        for row in rows {
            let n = row.nodes.len();
            assert!(row.weights.iter().all(|w| w.len() == n), "stencil row weights do not match node list");
            op.cols.extend(row.nodes.iter().map(|&c| c as u32));
            for a in 0..3 {
                op.weights[a].extend_from_slice(&row.weights[a]);
            }
            op.conditions.push(row.condition);
            op.row_ptr.push(op.cols.len());
        }
        op
    }

    /// RBF derivative rows of `source` evaluated at each target point.
    pub fn build(source: &NodeLattice, targets: &[Point], mode: StencilMode, kernel: &RbfKernel) -> Result<Self> {
        let rows: Result<Vec<StencilRow>> = match mode {
            StencilMode::Local(size) => targets
                .par_iter()
                .enumerate()
                .map(|(node, &p)| {
                    let st = build_stencil(source, p, size, kernel)
                        .map_err(|e| Error::Stencil { node, source: Box::new(e) })?;
                    Ok(StencilRow { nodes: st.nodes, weights: st.shape.gradient, condition: st.shape.condition })
                })
                .collect(),
            StencilMode::Global => {
                let system = MomentSystem::new(source.positions(), kernel)
                    .map_err(|e| Error::Stencil { node: 0, source: Box::new(e) })?;
                let all: Vec<usize> = (0..source.len()).collect();
                Ok(targets
                    .par_iter()
                    .map(|&p| {
                        let sf = system.evaluate(p);
                        StencilRow { nodes: all.clone(), weights: sf.gradient, condition: sf.condition }
                    })
                    .collect())
            }
        };
        Ok(Self::from_rows(rows?))
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row_nodes(&self, row: usize) -> &[u32] {
        &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn row_weights(&self, row: usize, axis: usize) -> &[f64] {
        &self.weights[axis][self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn condition(&self, row: usize) -> f64 {
        self.conditions[row]
    }

    pub fn max_condition(&self) -> f64 {
        self.conditions.iter().copied().fold(0.0, f64::max)
    }

    /// `sum_j w_j v_j` along `axis` for one row.
    #[inline]
    pub fn apply(&self, row: usize, axis: usize, values: &[f64]) -> f64 {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        let mut s = 0.0;
        for (c, w) in self.cols[lo..hi].iter().zip(&self.weights[axis][lo..hi]) {
            s += w * values[*c as usize];
        }
        s
    }

    /// `sum_j w_j (a_j + b_j)`: the derivative of a split field's physical sum.
    #[inline]
    pub fn apply_pair(&self, row: usize, axis: usize, a: &[f64], b: &[f64]) -> f64 {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        let mut s = 0.0;
        for (c, w) in self.cols[lo..hi].iter().zip(&self.weights[axis][lo..hi]) {
            let c = *c as usize;
            s += w * (a[c] + b[c]);
        }
        s
    }
}
