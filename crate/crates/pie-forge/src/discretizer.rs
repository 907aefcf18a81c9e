//! Dense-matrix realization of PI operators on a Chebyshev collocation
//! basis.
//!
//! Values-at-nodes representation: a distributed channel is the vector of
//! its samples at the M+1 Chebyshev-Gauss-Lobatto points. Column (j, l) of
//! a distributed block is the image of the l-th Lagrange cardinal
//! polynomial in channel j, sampled back at the nodes. The partial
//! integrals are assembled with Gauss-Legendre rules whose degree of
//! exactness covers the full polynomial integrand (kernel degree plus M),
//! so for polynomial kernels the assembled matrix agrees with exact
//! symbolic application up to floating-point rounding; the cardinal values
//! themselves come from the numerically stable barycentric form.

use crate::converter::PieSystem;
use crate::gpde::ContinuityVector;
use crate::piops::{OpError, PiOp4};
use crate::polyalg::{PolyMat, Rat};
use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use std::f64::consts::PI;

/// Chebyshev-Gauss-Lobatto collocation basis on `[a, b]`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub degree: usize,
    pub a: f64,
    pub b: f64,
    /// Strictly increasing nodes, `degree + 1` of them.
    pub nodes: Vec<f64>,
    /// Barycentric interpolation weights for the node set.
    pub bary_weights: Vec<f64>,
    /// Clenshaw-Curtis quadrature weights on `[a, b]`.
    pub quad_weights: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(degree: usize, a: f64, b: f64) -> SpectralBasis {
        assert!(degree >= 1, "basis degree must be at least 1");
        assert!(a < b, "domain must satisfy a < b");
        let m = degree;
        // Gauss-Lobatto angles; cos is decreasing, so flip for increasing
        // nodes, then map [-1, 1] -> [a, b].
        let nodes: Vec<f64> = (0..=m)
            .map(|j| {
                let x = -(PI * j as f64 / m as f64).cos();
                a + (b - a) * (x + 1.0) / 2.0
            })
            .collect();
        let bary_weights: Vec<f64> = (0..=m)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let scale = if j == 0 || j == m { 0.5 } else { 1.0 };
                sign * scale
            })
            .collect();
        let quad_weights = clenshaw_curtis(m, a, b);
        SpectralBasis {
            degree,
            a,
            b,
            nodes,
            bary_weights,
            quad_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature of node samples.
    pub fn integrate_samples(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .zip(&self.quad_weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Discrete L2 inner product of two node-sample vectors.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.quad_weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Barycentric evaluation of the interpolant of `samples` at `x`.
    pub fn eval_interpolant(&self, samples: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in self.nodes.iter().zip(&self.bary_weights).zip(samples) {
            let d = x - xj;
            if d.abs() < 1e-300 {
                return fj;
            }
            let t = wj / d;
            num += t * fj;
            den += t;
        }
        num / den
    }

    /// Values of all cardinal polynomials at `x`: column `l` of the
    /// interpolation operator.
    pub fn cardinal_values(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut den = 0.0;
        for (j, (&xj, &wj)) in self.nodes.iter().zip(&self.bary_weights).enumerate() {
            let d = x - xj;
            if d.abs() < 1e-300 {
                let mut exact = vec![0.0; n];
                exact[j] = 1.0;
                return exact;
            }
            let t = wj / d;
            out[j] = t;
            den += t;
        }
        for v in &mut out {
            *v /= den;
        }
        out
    }
}

/// Clenshaw-Curtis weights on `[a, b]` for M+1 Gauss-Lobatto nodes.
/// Exact for polynomials of degree <= M.
fn clenshaw_curtis(m: usize, a: f64, b: f64) -> Vec<f64> {
    let n = m;
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        w[0] = 2.0;
    } else {
        let thetas: Vec<f64> = (0..=n).map(|k| PI * k as f64 / n as f64).collect();
        for (k, &theta) in thetas.iter().enumerate() {
            let mut v = 1.0;
            if n.is_multiple_of(2) {
                for j in 1..n / 2 {
                    v -= 2.0 * (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
                }
                v -= ((n as f64) * theta).cos() / ((n * n) as f64 - 1.0);
            } else {
                for j in 1..=(n - 1) / 2 {
                    v -= 2.0 * (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
                }
            }
            let c = if k == 0 || k == n { 1.0 } else { 2.0 };
            w[k] = c * v / n as f64;
        }
    }
    // Nodes were flipped to be increasing; the weights are symmetric, so
    // only the interval length matters.
    let scale = (b - a) / 2.0;
    w.iter().map(|x| x * scale).collect()
}

/// Floating-point kernel table for matrix assembly.
struct KernelGrid {
    cols: usize,
    grids: Vec<Vec<Vec<f64>>>, // row-major entries; grid[i][j] of s^i th^j
    deg_s: usize,
    deg_th: usize,
}

impl KernelGrid {
    fn new(m: &PolyMat) -> KernelGrid {
        let mut grids = Vec::with_capacity(m.rows() * m.cols());
        let mut deg_s = 0;
        let mut deg_th = 0;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let p = &m[(i, j)];
                deg_s = deg_s.max(p.deg_s().unwrap_or(0));
                deg_th = deg_th.max(p.deg_th().unwrap_or(0));
                let rows = p.deg_s().map_or(0, |d| d + 1);
                let cols = p.deg_th().map_or(0, |d| d + 1);
                let mut grid = vec![vec![0.0; cols]; rows];
                for (a, b, c) in p.terms() {
                    grid[a][b] = c.to_f64().unwrap_or(f64::NAN);
                }
                grids.push(grid);
            }
        }
        KernelGrid {
            cols: m.cols(),
            grids,
            deg_s,
            deg_th,
        }
    }

    fn eval(&self, i: usize, j: usize, s: f64, th: f64) -> f64 {
        let grid = &self.grids[i * self.cols + j];
        let mut acc = 0.0;
        for row in grid.iter().rev() {
            let mut inner = 0.0;
            for c in row.iter().rev() {
                inner = inner * th + c;
            }
            acc = acc * s + inner;
        }
        acc
    }
}

/// Gauss-Legendre nodes and weights mapped to `[lo, hi]`.
fn gl_rule(order: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = crate::oracle::gauss_legendre(order);
    let mid = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    (
        nodes.iter().map(|x| mid + half * x).collect(),
        weights.iter().map(|w| w * half).collect(),
    )
}

/// Dense realization of a 4-PI operator: a matrix on
/// `R^n ⊕ (R^{M+1})^q  ->  R^m ⊕ (R^{M+1})^p` with channel-major layout.
pub fn discretize(op: &PiOp4, basis: &SpectralBasis) -> Result<DMatrix<f64>, OpError> {
    let d = op.dims();
    let nn = basis.len();
    let rows = d.m + d.p * nn;
    let cols = d.n + d.q * nn;
    let mut out = DMatrix::zeros(rows, cols);
    let (a, b) = (basis.a, basis.b);

    // Finite input columns: P on top, Q2 sampled at the nodes below.
    for k in 0..d.n {
        for i in 0..d.m {
            out[(i, k)] = op.p[(i, k)].to_f64().unwrap_or(f64::NAN);
        }
        for ch in 0..d.p {
            for (l, &x) in basis.nodes.iter().enumerate() {
                out[(d.m + ch * nn + l, k)] = op.q2[(ch, k)].eval_f64(x, 0.0);
            }
        }
    }
    if d.q == 0 {
        return Ok(out);
    }

    let q1 = KernelGrid::new(&op.q1);
    let r0 = KernelGrid::new(&op.r.r0);
    let r1 = KernelGrid::new(&op.r.r1);
    let r2 = KernelGrid::new(&op.r.r2);

    // A single-panel rule of this order integrates (kernel x cardinal)
    // products exactly.
    let max_deg = q1
        .deg_s
        .max(r1.deg_th)
        .max(r2.deg_th)
        .max(r0.deg_s);
    let order = (max_deg + basis.degree) / 2 + 2;

    // R0 multiplier: block-diagonal samples.
    for i in 0..d.p {
        for j in 0..d.q {
            for (l, &x) in basis.nodes.iter().enumerate() {
                out[(d.m + i * nn + l, d.n + j * nn + l)] += r0.eval(i, j, x, 0.0);
            }
        }
    }

    // Q1 row block: int_a^b Q1(th) v(th) dth.
    {
        let (ts, ws) = gl_rule(order, a, b);
        for (&t, &w) in ts.iter().zip(&ws) {
            let card = basis.cardinal_values(t);
            for i in 0..d.m {
                for j in 0..d.q {
                    let kv = q1.eval(i, j, t, 0.0) * w;
                    if kv == 0.0 {
                        continue;
                    }
                    for (l, &cl) in card.iter().enumerate() {
                        out[(i, d.n + j * nn + l)] += kv * cl;
                    }
                }
            }
        }
    }

    // Volterra blocks: for each output node s0, integrate the kernels
    // against every cardinal over [a, s0] and [s0, b].
    for (lp, &s0) in basis.nodes.iter().enumerate() {
        for (kernel, lo, hi) in [(&r1, a, s0), (&r2, s0, b)] {
            if (hi - lo).abs() < 1e-300 {
                continue;
            }
            let (ts, ws) = gl_rule(order, lo, hi);
            for (&t, &w) in ts.iter().zip(&ws) {
                let card = basis.cardinal_values(t);
                for i in 0..d.p {
                    for j in 0..d.q {
                        let kv = kernel.eval(i, j, s0, t) * w;
                        if kv == 0.0 {
                            continue;
                        }
                        for (l, &cl) in card.iter().enumerate() {
                            out[(d.m + i * nn + lp, d.n + j * nn + l)] += kv * cl;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// First-order Chebyshev collocation differentiation matrix on `[a, b]`.
fn diff_matrix_order1(basis: &SpectralBasis) -> DMatrix<f64> {
    let n = basis.degree;
    let x = &basis.nodes;
    let c: Vec<f64> = (0..=n)
        .map(|i| {
            let ci = if i == 0 || i == n { 2.0 } else { 1.0 };
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            ci * sign
        })
        .collect();
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = (c[i] / c[j]) / (x[i] - x[j]);
            }
        }
    }
    // Negative sum trick for the diagonal.
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                row_sum += d[(i, j)];
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// `k`-th order spectral differentiation matrix (power of the first-order
/// matrix); `k = 0` is the identity.
pub fn differentiation_matrix(basis: &SpectralBasis, k: usize) -> DMatrix<f64> {
    assert!(k <= basis.degree, "derivative order exceeds basis degree");
    let n = basis.len();
    let mut acc = DMatrix::identity(n, n);
    if k == 0 {
        return acc;
    }
    let d1 = diff_matrix_order1(basis);
    for _ in 0..k {
        acc = &d1 * acc;
    }
    acc
}

/// Block-diagonal differentiation map taking sampled primal-state channels
/// to sampled fundamental-state channels (order `i` per block-`i` state).
pub fn fundamental_projection(n: &ContinuityVector, basis: &SpectralBasis) -> DMatrix<f64> {
    let nn = basis.len();
    let total = n.n_xhat() * nn;
    let mut out = DMatrix::zeros(total, total);
    let mut ch = 0usize;
    for (block, &count) in n.n.iter().enumerate() {
        let d = differentiation_matrix(basis, block);
        for _ in 0..count {
            out.view_mut((ch * nn, ch * nn), (nn, nn)).copy_from(&d);
            ch += 1;
        }
    }
    out
}

/// Dense realization of all twelve PIE operators on one basis.
#[derive(Debug, Clone)]
pub struct DiscretePie {
    pub basis: SpectralBasis,
    pub n_x: usize,
    pub n_xhat: usize,
    pub n_w: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
    pub m_t: DMatrix<f64>,
    pub m_tw: DMatrix<f64>,
    pub m_tu: DMatrix<f64>,
    pub m_a: DMatrix<f64>,
    pub m_b1: DMatrix<f64>,
    pub m_b2: DMatrix<f64>,
    pub m_c1: DMatrix<f64>,
    pub m_c2: DMatrix<f64>,
    pub m_d11: DMatrix<f64>,
    pub m_d12: DMatrix<f64>,
    pub m_d21: DMatrix<f64>,
    pub m_d22: DMatrix<f64>,
}

impl DiscretePie {
    pub fn new(pie: &PieSystem, degree: usize) -> Result<DiscretePie, OpError> {
        let a = rat_to_f64(&pie.dom.0);
        let b = rat_to_f64(&pie.dom.1);
        let basis = SpectralBasis::new(degree, a, b);
        Ok(DiscretePie {
            n_x: pie.dims.n_x,
            n_xhat: pie.dims.n_xhat,
            n_w: pie.dims.n_w,
            n_u: pie.dims.n_u,
            n_z: pie.dims.n_z,
            n_y: pie.dims.n_y,
            m_t: discretize(&pie.t, &basis)?,
            m_tw: discretize(&pie.tw, &basis)?,
            m_tu: discretize(&pie.tu, &basis)?,
            m_a: discretize(&pie.a, &basis)?,
            m_b1: discretize(&pie.b1, &basis)?,
            m_b2: discretize(&pie.b2, &basis)?,
            m_c1: discretize(&pie.c1, &basis)?,
            m_c2: discretize(&pie.c2, &basis)?,
            m_d11: discretize(&pie.d11, &basis)?,
            m_d12: discretize(&pie.d12, &basis)?,
            m_d21: discretize(&pie.d21, &basis)?,
            m_d22: discretize(&pie.d22, &basis)?,
            basis,
        })
    }

    /// Length of the discrete state vector.
    pub fn state_len(&self) -> usize {
        self.n_x + self.n_xhat * self.basis.len()
    }

    /// Energy norm `||T x||^2` of a discrete state.
    pub fn t_norm_sq(&self, x: &DVector<f64>) -> f64 {
        let tx = &self.m_t * x;
        self.rl2_norm_sq(&tx)
    }

    /// `R x L2` norm of a discrete state vector.
    pub fn rl2_norm_sq(&self, x: &DVector<f64>) -> f64 {
        let nn = self.basis.len();
        let mut acc = 0.0;
        for i in 0..self.n_x {
            acc += x[i] * x[i];
        }
        for ch in 0..self.n_xhat {
            for l in 0..nn {
                let v = x[self.n_x + ch * nn + l];
                acc += v * v * self.basis.quad_weights[l];
            }
        }
        acc
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piops::{apply_exact, OpDims, PiOp3, RlPoly};
    use crate::polyalg::{parse_poly, rint, Poly, RatMat, Var};

    fn dom01() -> (Rat, Rat) {
        (rint(0), rint(1))
    }

    #[test]
    fn quadrature_is_exact_for_low_degree() {
        for m in [4, 9, 16, 32] {
            let basis = SpectralBasis::new(m, 0.0, 1.0);
            for deg in 0..=m {
                let samples: Vec<f64> = basis.nodes.iter().map(|&x| x.powi(deg as i32)).collect();
                let got = basis.integrate_samples(&samples);
                let want = 1.0 / (deg as f64 + 1.0);
                assert!(
                    (got - want).abs() <= 1e-13 * want.abs().max(1.0),
                    "m={m} deg={deg}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn cardinal_values_are_kronecker_at_nodes() {
        let basis = SpectralBasis::new(12, 0.0, 1.0);
        for (j, &x) in basis.nodes.iter().enumerate() {
            let vals = basis.cardinal_values(x);
            for (l, &v) in vals.iter().enumerate() {
                let want = if l == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14, "l={l} j={j}: {v}");
            }
        }
        // And they reproduce a degree-M polynomial anywhere.
        let samples: Vec<f64> = basis.nodes.iter().map(|&x| x.powi(12)).collect();
        let x = 0.377;
        let v = basis.eval_interpolant(&samples, x);
        assert!((v - x.powi(12)).abs() < 1e-13);
    }

    #[test]
    fn identity_operator_discretizes_to_identity() {
        let basis = SpectralBasis::new(8, 0.0, 1.0);
        let id = PiOp4::identity(dom01(), 2, 1);
        let m = discretize(&id, &basis).unwrap();
        let n = m.nrows();
        let err = (&m - DMatrix::<f64>::identity(n, n)).abs().max();
        assert!(err <= 1e-13, "err = {err}");
    }

    #[test]
    fn multiplier_discretizes_to_node_diagonal() {
        let basis = SpectralBasis::new(10, 0.0, 1.0);
        let op = PiOp4::from_kernels(
            dom01(),
            PiOp3::new(
                crate::polyalg::PolyMat::from_fn(1, 1, |_, _| Poly::var(Var::S)),
                crate::polyalg::PolyMat::zeros(1, 1),
                crate::polyalg::PolyMat::zeros(1, 1),
            )
            .unwrap(),
        );
        let m = discretize(&op, &basis).unwrap();
        for (l, &x) in basis.nodes.iter().enumerate() {
            assert!((m[(l, l)] - x).abs() <= 1e-13);
        }
    }

    #[test]
    fn differentiation_matrix_differentiates_squares() {
        let basis = SpectralBasis::new(12, 0.0, 1.0);
        let d = differentiation_matrix(&basis, 1);
        let samples = DVector::from_iterator(
            basis.len(),
            basis.nodes.iter().map(|&x| x * x),
        );
        let ds = d * samples;
        for (l, &x) in basis.nodes.iter().enumerate() {
            assert!((ds[l] - 2.0 * x).abs() <= 1e-11, "at {x}: {}", ds[l]);
        }
        let d0 = differentiation_matrix(&basis, 0);
        assert_eq!(d0, DMatrix::identity(basis.len(), basis.len()));
    }

    #[test]
    fn discretize_is_linear() {
        let basis = SpectralBasis::new(6, 0.0, 1.0);
        let mk = |r0: &str, r1: &str| {
            PiOp4::from_kernels(
                dom01(),
                PiOp3::new(
                    crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly(r0).unwrap()),
                    crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly(r1).unwrap()),
                    crate::polyalg::PolyMat::zeros(1, 1),
                )
                .unwrap(),
            )
        };
        let x = mk("s", "s-th");
        let y = mk("1-s", "th^2");
        let sum = crate::piops::add4(&x, &y).unwrap();
        let lhs = discretize(&sum, &basis).unwrap();
        let rhs = discretize(&x, &basis).unwrap() + discretize(&y, &basis).unwrap();
        assert!((lhs - rhs).abs().max() <= 1e-13);
    }

    #[test]
    fn exactness_against_symbolic_application() {
        // Discretized application of a full operator to samples of a
        // polynomial input equals the exact symbolic image at the nodes.
        let basis = SpectralBasis::new(16, 0.0, 1.0);
        let op = PiOp4::new(
            dom01(),
            RatMat::from_rows(vec![vec![rint(2)]]),
            crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("s^2 - s/2").unwrap()),
            crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("1 - s").unwrap()),
            PiOp3::new(
                crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("s").unwrap()),
                crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("s - th").unwrap()),
                crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("-s*th^2").unwrap()),
            )
            .unwrap(),
        )
        .unwrap();
        let m = discretize(&op, &basis).unwrap();

        let vpoly = parse_poly("1 - 2*s + 3*s^4").unwrap();
        let arg = RlPoly::new(
            RatMat::from_rows(vec![vec![rint(3)]]),
            crate::polyalg::PolyMat::column(vec![vpoly.clone()]),
        );
        let exact = apply_exact(&op, &arg).unwrap();

        let nn = basis.len();
        let mut xvec = DVector::zeros(1 + nn);
        xvec[0] = 3.0;
        for (l, &x) in basis.nodes.iter().enumerate() {
            xvec[1 + l] = vpoly.eval_f64(x, 0.0);
        }
        let got = &m * xvec;
        let want_fin = exact.fin[(0, 0)].to_f64().unwrap();
        assert!((got[0] - want_fin).abs() <= 1e-12 * want_fin.abs().max(1.0));
        for (l, &x) in basis.nodes.iter().enumerate() {
            let want = exact.dist[(0, 0)].eval_f64(x, 0.0);
            assert!(
                (got[1 + l] - want).abs() <= 1e-12 * want.abs().max(1.0),
                "node {l}: {} vs {want}",
                got[1 + l]
            );
        }
    }

    #[test]
    fn heat_state_map_matches_exact_application_at_nodes() {
        // Kernels R1 = -th, R2 = -s applied to v = 1: s^2/2 - s.
        let basis = SpectralBasis::new(16, 0.0, 1.0);
        let op = PiOp4::from_kernels(
            dom01(),
            PiOp3::new(
                crate::polyalg::PolyMat::zeros(1, 1),
                crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("-th").unwrap()),
                crate::polyalg::PolyMat::from_fn(1, 1, |_, _| parse_poly("-s").unwrap()),
            )
            .unwrap(),
        );
        let m = discretize(&op, &basis).unwrap();
        let ones = DVector::from_element(basis.len(), 1.0);
        let got = m * ones;
        for (l, &x) in basis.nodes.iter().enumerate() {
            let want = x * x / 2.0 - x;
            assert!((got[l] - want).abs() <= 1e-12, "at node {l}");
        }
        let _ = PiOp4::zero(dom01(), OpDims { m: 0, n: 0, p: 1, q: 1 });
    }
}
