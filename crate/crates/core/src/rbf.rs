//! Gaussian radial-basis shape functions and their first derivatives.
//!
//! For stencil nodes `x_1..x_N` the moment matrix is `A_ij = phi(|x_i - x_j|)`
//! and the shape functions at an evaluation point `x` are `Phi = B(x) A^-1`
//! with `B_j(x) = phi(|x - x_j|)`. Derivatives follow analytically as
//! `dPhi/dk = (dB/dk) A^-1`; both reuse one factorization of `A`.

use crate::error::{Error, Result};
use crate::lattice::{dist2, NodeLattice, Point};
use crate::linalg::{condition_1, Lu};

/// Stencils whose moment matrix condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Default number of source nodes per stencil.
pub const DEFAULT_STENCIL_SIZE: usize = 12;

/// Gaussian kernel `exp(-alpha r^2)` with `alpha = alpha_c / d_min^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbfKernel {
    alpha: f64,
    alpha_c: f64,
    d_min: f64,
}

impl RbfKernel {
    pub fn new(alpha_c: f64, d_min: f64) -> Result<Self> {
        if !(alpha_c > 0.0) || !(d_min > 0.0) || !alpha_c.is_finite() || !d_min.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "shape parameter and spacing must be positive (alpha_c = {alpha_c}, d_min = {d_min})"
            )));
        }
        Ok(Self { alpha: alpha_c / (d_min * d_min), alpha_c, d_min })
    }

    /// Shape parameter in 1/m^2.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_c(&self) -> f64 {
        self.alpha_c
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    #[inline]
    fn eval_r2(&self, r2: f64) -> f64 {
        (-self.alpha * r2).exp()
    }
}

/// Kernel value at distance `r >= 0`.
pub fn gaussian(r: f64, kernel: &RbfKernel) -> f64 {
    debug_assert!(r >= 0.0);
    kernel.eval_r2(r * r)
}

/// Shape function values and gradient rows at one evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeFunctions {
    pub values: Vec<f64>,
    /// `gradient[k][j]` is `dPhi_j / d x_k`.
    pub gradient: [Vec<f64>; 3],
    /// 1-norm condition number of the moment matrix.
    pub condition: f64,
}

impl ShapeFunctions {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A stencil: which source nodes contribute, and their shape functions at
/// the evaluation point.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub center: Point,
    pub nodes: Vec<usize>,
    pub shape: ShapeFunctions,
}

fn moment_matrix(nodes: &[Point], kernel: &RbfKernel) -> Vec<f64> {
    let n = nodes.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = kernel.eval_r2(dist2(&nodes[i], &nodes[j]));
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// Factored moment matrix of a node set, reusable across evaluation points.
#[derive(Clone, Debug)]
pub struct MomentSystem {
    nodes: Vec<Point>,
    kernel: RbfKernel,
    lu: Lu,
    condition: f64,
}

impl MomentSystem {
    pub fn new(nodes: &[Point], kernel: &RbfKernel) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("stencil needs at least one node".into()));
        }
        let n = nodes.len();
        let a = moment_matrix(nodes, kernel);
        let lu = Lu::factor(a.clone(), n)?;
        let condition = condition_1(&a, &lu);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::IllConditioned { condition, threshold: MAX_CONDITION });
        }
        Ok(Self { nodes: nodes.to_vec(), kernel: *kernel, lu, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Shape functions and gradient rows at `eval`. `A` is symmetric, so
    /// `Phi^T = A^-1 B^T`.
    pub fn evaluate(&self, eval: Point) -> ShapeFunctions {
        let alpha = self.kernel.alpha();
        let b: Vec<f64> = self.nodes.iter().map(|x| self.kernel.eval_r2(dist2(&eval, x))).collect();
        let values = self.lu.solve(&b);
        let gradient = [0, 1, 2].map(|k| {
            let db: Vec<f64> = self
                .nodes
                .iter()
                .zip(&b)
                .map(|(x, &phi)| -2.0 * alpha * (eval[k] - x[k]) * phi)
                .collect();
            if db.iter().all(|&v| v == 0.0) {
                vec![0.0; db.len()]
            } else {
                self.lu.solve(&db)
            }
        });
        ShapeFunctions { values, gradient, condition: self.condition }
    }
}

/// Shape functions of the stencil `nodes` evaluated at `eval`.
pub fn build_shape_functions(nodes: &[Point], eval: Point, kernel: &RbfKernel) -> Result<ShapeFunctions> {
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if dist2(&nodes[i], &nodes[j]) == 0.0 {
                return Err(Error::InvalidArgument(format!("stencil nodes {i} and {j} coincide")));
            }
        }
    }
    Ok(MomentSystem::new(nodes, kernel)?.evaluate(eval))
}

/// Stencil of the `size` nearest nodes of `source` around `eval`.
pub fn build_stencil(source: &NodeLattice, eval: Point, size: usize, kernel: &RbfKernel) -> Result<Stencil> {
    let nodes = source.nearest_neighbors(eval, size)?;
    let coords: Vec<Point> = nodes.iter().map(|&n| source.position(n)).collect();
    let shape = build_shape_functions(&coords, eval, kernel)?;
    Ok(Stencil { center: eval, nodes, shape })
}

/// `sum_j Phi_j * values_j`.
pub fn interpolate(stencil: &Stencil, values: &[f64]) -> Result<f64> {
    let phi = &stencil.shape.values;
    if values.len() != phi.len() {
        return Err(Error::LengthMismatch { expected: phi.len(), got: values.len() });
    }
    Ok(phi.iter().zip(values).map(|(p, v)| p * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::StaggeredLattice;

    fn line(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| [x, 0.0, 0.0]).collect()
    }

    #[test]
    fn gaussian_values() {
        let k = RbfKernel::new(0.5, 1.0).unwrap();
        assert_eq!(gaussian(0.0, &k), 1.0);
        assert!((gaussian(1.0, &k) - 0.606_530_659_712_633_4).abs() < 1e-15);
        let mut last = 1.0;
        for r in 1..200 {
            let v = gaussian(r as f64 * 0.5, &k);
            assert!(v <= last && v >= 0.0);
            last = v;
        }
        assert_eq!(gaussian(1e3, &k), 0.0);
    }

    #[test]
    fn kernel_normalization() {
        let k = RbfKernel::new(0.5, 0.0005).unwrap();
        assert!((k.alpha() - 0.5 / 0.0005f64.powi(2)).abs() < 1e-6);
        assert!(RbfKernel::new(0.0, 1.0).is_err());
        assert!(RbfKernel::new(1.0, -1.0).is_err());
    }

    /// Cramer's rule for a 3x3 system, independent of the LU path.
    fn cramer3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let mut x = [0.0; 3];
        for c in 0..3 {
            let mut m = a;
            for r in 0..3 {
                m[r][c] = b[r];
            }
            x[c] = det(m) / d;
        }
        x
    }

    #[test]
    fn three_node_line_matches_cramer() {
        let k = RbfKernel::new(0.5, 1.0).unwrap();
        let xs = [0.0, 1.0, 2.0];
        let sf = build_shape_functions(&line(&xs), [0.5, 0.0, 0.0], &k).unwrap();
        let g = |r: f64| (-0.5 * r * r).exp();
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = g(xs[i] - xs[j]);
            }
        }
        let b = [g(0.5), g(0.5), g(1.5)];
        let want = cramer3(a, b);
        for j in 0..3 {
            assert!((sf.values[j] - want[j]).abs() < 1e-10, "{j}: {} vs {}", sf.values[j], want[j]);
        }
    }

    #[test]
    fn delta_property_at_nodes() {
        let k = RbfKernel::new(0.5, 1.0).unwrap();
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.2, 0.0], [0.3, 1.1, 0.0], [1.4, 1.3, 0.0], [-0.8, 0.6, 0.0]];
        for i in 0..nodes.len() {
            let sf = build_shape_functions(&nodes, nodes[i], &k).unwrap();
            for j in 0..nodes.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((sf.values[j] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reproduces_functions_in_the_native_span() {
        let k = RbfKernel::new(0.5, 1.0).unwrap();
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.5, 1.7, 0.0]];
        let stencil = Stencil { center: [0.0; 3], nodes: (0..5).collect(), shape: build_shape_functions(&nodes, [0.3, 0.4, 0.0], &k).unwrap() };
        let centre = nodes[3];
        let f = |p: &Point| (-k.alpha() * dist2(p, &centre)).exp();
        let vals: Vec<f64> = nodes.iter().map(f).collect();
        let got = interpolate(&stencil, &vals).unwrap();
        assert!((got - f(&[0.3, 0.4, 0.0])).abs() < 1e-9);
        assert_eq!(interpolate(&stencil, &[0.0; 5]).unwrap(), 0.0);
        assert!(matches!(interpolate(&stencil, &[0.0; 4]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn indicator_at_node_interpolates_to_one() {
        let lat = StaggeredLattice::build(&[0.01, 0.01], 21, 0).unwrap();
        let k = RbfKernel::new(0.5, lat.d_min()).unwrap();
        let p = lat.electric.position(lat.electric.index_of(10, 10, 0));
        let st = build_stencil(&lat.electric, p, 12, &k).unwrap();
        let pos = st.nodes.iter().position(|&n| lat.electric.position(n) == p).unwrap();
        let mut vals = vec![0.0; st.nodes.len()];
        vals[pos] = 1.0;
        assert!((interpolate(&st, &vals).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let k = RbfKernel::new(0.5, 1.0).unwrap();
        assert!(build_shape_functions(&line(&[0.0, 0.0]), [0.0; 3], &k).is_err());
        assert!(build_shape_functions(&[], [0.0; 3], &k).is_err());
    }

    #[test]
    fn tiny_shape_parameter_is_ill_conditioned() {
        let k = RbfKernel::new(1e-4, 1.0).unwrap();
        let nodes = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(matches!(build_shape_functions(&nodes, [0.5, 0.0, 0.0], &k), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn condition_improves_with_shape_parameter() {
        let lat = StaggeredLattice::build(&[0.03, 0.03], 61, 3).unwrap();
        let q = lat.magnetic.position(lat.magnetic.index_of(29, 29, 0));
        let mut last = f64::INFINITY;
        for ac in [0.5, 1.0, 2.0, 4.0] {
            let k = RbfKernel::new(ac, lat.d_min()).unwrap();
            let st = build_stencil(&lat.electric, q, 12, &k).unwrap();
            assert!(st.shape.condition <= last);
            last = st.shape.condition;
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn jittered(seed: &[i32]) -> Vec<Point> {
            // 3x3 grid with bounded dyadic jitter: nodes stay distinct and
            // coordinates stay exactly representable under dyadic shifts
            (0..9)
                .map(|n| {
                    let (i, j) = ((n % 3) as f64, (n / 3) as f64);
                    [i + seed[2 * n] as f64 / 1024.0, j + seed[2 * n + 1] as f64 / 1024.0, 0.0]
                })
                .collect()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn gradients_match_central_differences(
                seed in prop::collection::vec(-300i32..300, 18),
                ex in -0.9f64..2.9, ey in -0.9f64..2.9, alpha_c in 0.3f64..4.0,
            ) {
                let d = 1e-3;
                let k = RbfKernel::new(alpha_c, d).unwrap();
                let nodes: Vec<Point> = jittered(&seed).iter().map(|p| [p[0] * d, p[1] * d, 0.0]).collect();
                let sys = MomentSystem::new(&nodes, &k).unwrap();
                let eval = [ex * d, ey * d, 0.0];
                let sf = sys.evaluate(eval);
                let h = 1e-6 * d;
                for ax in 0..2 {
                    let (mut p, mut m) = (eval, eval);
                    p[ax] += h;
                    m[ax] -= h;
                    let (vp, vm) = (sys.evaluate(p).values, sys.evaluate(m).values);
                    let scale = sf.gradient[ax].iter().fold(0.0f64, |a, g| a.max(g.abs()));
                    for j in 0..nodes.len() {
                        let fd = (vp[j] - vm[j]) / (2.0 * h);
                        prop_assert!((sf.gradient[ax][j] - fd).abs() <= 1e-5 * scale, "node {j} axis {ax}: {} vs {fd}", sf.gradient[ax][j]);
                    }
                }
            }

            #[test]
            fn translation_invariance(
                seed in prop::collection::vec(-300i32..300, 18),
                ex in 0i32..32, ey in 0i32..32,
                sx in -800i32..800, sy in -800i32..800,
            ) {
                let k = RbfKernel::new(0.5, 1.0).unwrap();
                let nodes = jittered(&seed);
                let (ex, ey) = (ex as f64 / 16.0, ey as f64 / 16.0);
                let (sx, sy) = (sx as f64 / 16.0, sy as f64 / 16.0);
                let a = build_shape_functions(&nodes, [ex, ey, 0.0], &k).unwrap();
                let shifted: Vec<Point> = nodes.iter().map(|p| [p[0] + sx, p[1] + sy, 0.0]).collect();
                let b = build_shape_functions(&shifted, [ex + sx, ey + sy, 0.0], &k).unwrap();
                for j in 0..9 {
                    prop_assert!((a.values[j] - b.values[j]).abs() <= 1e-12);
                    for ax in 0..2 {
                        prop_assert!((a.gradient[ax][j] - b.gradient[ax][j]).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
