//! Data model, dimension bookkeeping, and validation for coupled ODE-PDE
//! (GPDE) parameter tuples `{n, G_o, G_b, G_p}`.
//!
//! The continuity vector `n = {n_0, ..., n_N}` partitions the distributed
//! state by required differentiability order, ordered by increasing order.
//! From it every signal layout is derived: the list of well-defined
//! distributed terms `F x`, the absolutely continuous terms `C x`, and the
//! boundary values `B x = [C x(a); C x(b)]`.

use crate::polyalg::{PolyMat, Rat, RatMat, Var};

/// Continuity vector plus the spatial domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityVector {
    pub n: Vec<usize>,
    pub a: Rat,
    pub b: Rat,
}

impl ContinuityVector {
    pub fn new(n: Vec<usize>, a: Rat, b: Rat) -> ContinuityVector {
        assert!(!n.is_empty(), "continuity vector must be non-empty");
        assert!(a < b, "domain must satisfy a < b");
        ContinuityVector { n, a, b }
    }

    /// Highest differentiability order N.
    pub fn order(&self) -> usize {
        self.n.len() - 1
    }

    /// Total number of distributed states.
    pub fn n_xhat(&self) -> usize {
        self.n.iter().sum()
    }

    /// Number of at-least-`i`-times differentiable states.
    pub fn n_si(&self, i: usize) -> usize {
        self.n[i..].iter().sum()
    }

    /// Total number of possible partial derivatives.
    pub fn n_s(&self) -> usize {
        (1..=self.order()).map(|i| self.n_si(i)).sum()
    }

    /// Width of the full distributed-term vector `F x`.
    pub fn n_f(&self) -> usize {
        self.n_xhat() + self.n_s()
    }

    /// Width of the boundary-value vector `B x`.
    pub fn n_b(&self) -> usize {
        2 * self.n_s()
    }

    /// Sum n_i + ... + n_j (inclusive, saturating at N).
    pub fn n_range(&self, i: usize, j: usize) -> usize {
        if i > j || i > self.order() {
            return 0;
        }
        self.n[i..=j.min(self.order())].iter().sum()
    }
}

/// One scalar row of a derived signal: which state block and component it
/// came from and which derivative order it carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowInfo {
    pub block: usize,
    pub component: usize,
    pub order: usize,
}

/// Index maps for the derived vectors `F x`, `C x`, and `B x`.
#[derive(Debug, Clone)]
pub struct LayoutTable {
    /// Rows of `F x`: all blocks `d^i S^i x` for i = 0..=N.
    pub f_rows: Vec<RowInfo>,
    /// Rows of `C x`: blocks `d^{i-1} S^i x` for i = 1..=N.
    pub c_rows: Vec<RowInfo>,
    /// Rows of the fundamental state: `x_i` differentiated i times.
    pub d_rows: Vec<RowInfo>,
}

impl LayoutTable {
    /// Rows of `B x`: `C x` evaluated at a, then at b.
    pub fn b_rows(&self) -> Vec<(RowInfo, bool)> {
        self.c_rows
            .iter()
            .map(|r| (*r, false))
            .chain(self.c_rows.iter().map(|r| (*r, true)))
            .collect()
    }
}

/// Builds the deterministic layout of all derived signal vectors.
pub fn layout(n: &ContinuityVector) -> LayoutTable {
    let nn = n.order();
    let mut f_rows = Vec::with_capacity(n.n_f());
    for i in 0..=nn {
        for block in i..=nn {
            for component in 0..n.n[block] {
                f_rows.push(RowInfo {
                    block,
                    component,
                    order: i,
                });
            }
        }
    }
    let mut c_rows = Vec::with_capacity(n.n_s());
    for i in 1..=nn {
        for block in i..=nn {
            for component in 0..n.n[block] {
                c_rows.push(RowInfo {
                    block,
                    component,
                    order: i - 1,
                });
            }
        }
    }
    let mut d_rows = Vec::with_capacity(n.n_xhat());
    for block in 0..=nn {
        for component in 0..n.n[block] {
            d_rows.push(RowInfo {
                block,
                component,
                order: block,
            });
        }
    }
    LayoutTable {
        f_rows,
        c_rows,
        d_rows,
    }
}

/// Signal dimensions of the ODE subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SignalDims {
    pub n_x: usize,
    pub n_w: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
    pub n_v: usize,
    pub n_r: usize,
}

/// The 15 ODE parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeParams {
    pub dims: SignalDims,
    pub a: RatMat,
    pub b_xw: RatMat,
    pub b_xu: RatMat,
    pub b_xr: RatMat,
    pub c_z: RatMat,
    pub d_zw: RatMat,
    pub d_zu: RatMat,
    pub d_zr: RatMat,
    pub c_y: RatMat,
    pub d_yw: RatMat,
    pub d_yu: RatMat,
    pub d_yr: RatMat,
    pub c_v: RatMat,
    pub d_vw: RatMat,
    pub d_vu: RatMat,
}

impl OdeParams {
    /// All-zero ODE parameters for the given signal dimensions.
    pub fn zero(dims: SignalDims) -> OdeParams {
        let d = dims;
        OdeParams {
            dims,
            a: RatMat::zeros(d.n_x, d.n_x),
            b_xw: RatMat::zeros(d.n_x, d.n_w),
            b_xu: RatMat::zeros(d.n_x, d.n_u),
            b_xr: RatMat::zeros(d.n_x, d.n_r),
            c_z: RatMat::zeros(d.n_z, d.n_x),
            d_zw: RatMat::zeros(d.n_z, d.n_w),
            d_zu: RatMat::zeros(d.n_z, d.n_u),
            d_zr: RatMat::zeros(d.n_z, d.n_r),
            c_y: RatMat::zeros(d.n_y, d.n_x),
            d_yw: RatMat::zeros(d.n_y, d.n_w),
            d_yu: RatMat::zeros(d.n_y, d.n_u),
            d_yr: RatMat::zeros(d.n_y, d.n_r),
            c_v: RatMat::zeros(d.n_v, d.n_x),
            d_vw: RatMat::zeros(d.n_v, d.n_w),
            d_vu: RatMat::zeros(d.n_v, d.n_u),
        }
    }
}

/// Boundary-condition parameters `{B, B_I, B_v}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcParams {
    pub b: RatMat,    // n_bc x 2 n_s
    pub b_i: PolyMat, // n_bc x (n_s + n_xhat), univariate in s
    pub b_v: RatMat,  // n_bc x n_v
}

impl BcParams {
    pub fn n_bc(&self) -> usize {
        self.b.rows()
    }
}

/// In-domain PDE parameters `{A_0, A_1, A_2, B_xv, B_xb, C_r, D_rb}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeParams {
    pub a0: PolyMat,   // n_xhat x n_f, univariate in s
    pub a1: PolyMat,   // n_xhat x n_f, in (s, th)
    pub a2: PolyMat,   // n_xhat x n_f, in (s, th)
    pub b_xv: PolyMat, // n_xhat x n_v, univariate in s
    pub b_xb: PolyMat, // n_xhat x 2 n_s, univariate in s
    pub c_r: PolyMat,  // n_r x n_f, univariate in s
    pub d_rb: RatMat,  // n_r x 2 n_s
}

impl PdeParams {
    pub fn zero(n: &ContinuityVector, n_v: usize, n_r: usize) -> PdeParams {
        PdeParams {
            a0: PolyMat::zeros(n.n_xhat(), n.n_f()),
            a1: PolyMat::zeros(n.n_xhat(), n.n_f()),
            a2: PolyMat::zeros(n.n_xhat(), n.n_f()),
            b_xv: PolyMat::zeros(n.n_xhat(), n_v),
            b_xb: PolyMat::zeros(n.n_xhat(), n.n_b()),
            c_r: PolyMat::zeros(n_r, n.n_f()),
            d_rb: RatMat::zeros(n_r, n.n_b()),
        }
    }
}

/// The full GPDE model tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct GpdeModel {
    pub name: String,
    pub n: ContinuityVector,
    pub ode: OdeParams,
    pub bc: BcParams,
    pub pde: PdeParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

/// A single validation finding; validation never mutates the model.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: String) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            field: field.to_string(),
            message,
        }
    }

    fn warning(field: &str, message: String) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            field: field.to_string(),
            message,
        }
    }
}

/// Checks every parameter shape against the layout implied by `n` and the
/// signal dimensions. Returns diagnostics instead of failing.
pub fn validate(model: &GpdeModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = &model.n;
    let d = model.ode.dims;
    let (n_f, n_b, n_s, n_xhat) = (n.n_f(), n.n_b(), n.n_s(), n.n_xhat());

    fn check_rat(out: &mut Vec<Diagnostic>, name: &str, m: &RatMat, rows: usize, cols: usize) {
        if m.rows() != rows || m.cols() != cols {
            out.push(Diagnostic::error(
                name,
                format!(
                    "shape {}x{} does not match expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                ),
            ));
        }
    }

    fn check_poly(
        out: &mut Vec<Diagnostic>,
        name: &str,
        m: &PolyMat,
        rows: usize,
        cols: usize,
        univ: bool,
    ) {
        if m.rows() != rows || m.cols() != cols {
            out.push(Diagnostic::error(
                name,
                format!(
                    "shape {}x{} does not match expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                ),
            ));
        }
        if univ && !m.is_free_of(Var::Th) {
            out.push(Diagnostic::error(
                name,
                "entries must be univariate in s".to_string(),
            ));
        }
    }

    check_rat(&mut out, "ode.A", &model.ode.a, d.n_x, d.n_x);
    check_rat(&mut out, "ode.Bxw", &model.ode.b_xw, d.n_x, d.n_w);
    check_rat(&mut out, "ode.Bxu", &model.ode.b_xu, d.n_x, d.n_u);
    check_rat(&mut out, "ode.Bxr", &model.ode.b_xr, d.n_x, d.n_r);
    check_rat(&mut out, "ode.Cz", &model.ode.c_z, d.n_z, d.n_x);
    check_rat(&mut out, "ode.Dzw", &model.ode.d_zw, d.n_z, d.n_w);
    check_rat(&mut out, "ode.Dzu", &model.ode.d_zu, d.n_z, d.n_u);
    check_rat(&mut out, "ode.Dzr", &model.ode.d_zr, d.n_z, d.n_r);
    check_rat(&mut out, "ode.Cy", &model.ode.c_y, d.n_y, d.n_x);
    check_rat(&mut out, "ode.Dyw", &model.ode.d_yw, d.n_y, d.n_w);
    check_rat(&mut out, "ode.Dyu", &model.ode.d_yu, d.n_y, d.n_u);
    check_rat(&mut out, "ode.Dyr", &model.ode.d_yr, d.n_y, d.n_r);
    check_rat(&mut out, "ode.Cv", &model.ode.c_v, d.n_v, d.n_x);
    check_rat(&mut out, "ode.Dvw", &model.ode.d_vw, d.n_v, d.n_w);
    check_rat(&mut out, "ode.Dvu", &model.ode.d_vu, d.n_v, d.n_u);

    let n_bc = model.bc.n_bc();
    check_rat(&mut out, "bc.B", &model.bc.b, n_bc, n_b);
    check_rat(&mut out, "bc.Bv", &model.bc.b_v, n_bc, d.n_v);

    check_poly(&mut out, "bc.BI", &model.bc.b_i, n_bc, n_f, true);
    check_poly(&mut out, "pde.A0", &model.pde.a0, n_xhat, n_f, true);
    check_poly(&mut out, "pde.A1", &model.pde.a1, n_xhat, n_f, false);
    check_poly(&mut out, "pde.A2", &model.pde.a2, n_xhat, n_f, false);
    check_poly(&mut out, "pde.Bxv", &model.pde.b_xv, n_xhat, d.n_v, true);
    check_poly(&mut out, "pde.Bxb", &model.pde.b_xb, n_xhat, n_b, true);
    check_poly(&mut out, "pde.Cr", &model.pde.c_r, d.n_r, n_f, true);
    check_rat(&mut out, "pde.Drb", &model.pde.d_rb, d.n_r, n_b);

    if n_bc != n_s {
        out.push(Diagnostic::warning(
            "bc.B",
            format!("n_BC ({n_bc}) != n_S ({n_s}); the state map requires n_BC = n_S"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{parse_poly, rint};

    fn cv(n: Vec<usize>) -> ContinuityVector {
        ContinuityVector::new(n, rint(0), rint(1))
    }

    #[test]
    fn derived_counts_for_mixed_orders() {
        // Three states of orders 1, 1, 2.
        let n = cv(vec![0, 2, 1]);
        assert_eq!(n.n_xhat(), 3);
        assert_eq!(n.n_si(0), 3);
        assert_eq!(n.n_si(1), 3);
        assert_eq!(n.n_si(2), 1);
        assert_eq!(n.n_s(), 4);
        assert_eq!(n.n_f(), 7);
        assert_eq!(n.n_b(), 8);
        let lt = layout(&n);
        assert_eq!(lt.f_rows.len(), 7);
        assert_eq!(lt.b_rows().len(), 8);
        // Increasing differentiability: first all states at order 0, then
        // the order-1 derivatives, then the order-2 derivative.
        let orders: Vec<usize> = lt.f_rows.iter().map(|r| r.order).collect();
        assert_eq!(orders, vec![0, 0, 0, 1, 1, 1, 2]);
    }

    #[test]
    fn single_second_order_state() {
        let n = cv(vec![0, 0, 1]);
        assert_eq!(n.n_xhat(), 1);
        assert_eq!(n.n_si(1), 1);
        assert_eq!(n.n_si(2), 1);
        assert_eq!(n.n_s(), 2);
        assert_eq!(n.n_f(), 3);
        let lt = layout(&n);
        let c_orders: Vec<usize> = lt.c_rows.iter().map(|r| r.order).collect();
        assert_eq!(c_orders, vec![0, 1]);
    }

    #[test]
    fn no_derivatives_means_no_boundary_values() {
        let n = cv(vec![1]);
        assert_eq!(n.n_s(), 0);
        assert_eq!(n.n_b(), 0);
        let lt = layout(&n);
        assert!(lt.c_rows.is_empty());
        assert_eq!(lt.f_rows.len(), 1);
    }

    #[test]
    fn layout_partitions_without_gaps() {
        for n in [vec![1, 2, 0, 3], vec![2, 1], vec![0, 0, 0, 1], vec![3]] {
            let n = cv(n);
            let lt = layout(&n);
            assert_eq!(lt.f_rows.len(), n.n_f());
            assert_eq!(lt.c_rows.len(), n.n_s());
            assert_eq!(lt.d_rows.len(), n.n_xhat());
            // Each fundamental row carries its own block order.
            for r in &lt.d_rows {
                assert_eq!(r.order, r.block);
            }
        }
    }

    fn entropy_model() -> GpdeModel {
        let n = cv(vec![0, 0, 1]);
        let dims = SignalDims::default();
        let mut a0 = PolyMat::zeros(1, 3);
        a0[(0, 2)] = parse_poly("1").unwrap();
        let mut pde = PdeParams::zero(&n, 0, 0);
        pde.a0 = a0;
        let b = RatMat::from_fn(2, 4, |i, j| {
            if (i == 0 && j == 0) || (i == 1 && j == 2) {
                rint(1)
            } else {
                rint(0)
            }
        });
        let b_i = PolyMat::from_fn(2, 3, |_, j| {
            if j == 0 {
                parse_poly("-1").unwrap()
            } else {
                parse_poly("0").unwrap()
            }
        });
        GpdeModel {
            name: "entropy".into(),
            n,
            ode: OdeParams::zero(dims),
            bc: BcParams {
                b,
                b_i,
                b_v: RatMat::zeros(2, 0),
            },
            pde,
        }
    }

    #[test]
    fn entropy_model_validates_clean() {
        let diags = validate(&entropy_model());
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn truncated_bc_matrix_warns_on_count() {
        let mut m = entropy_model();
        m.bc.b = m.bc.b.submatrix(0, 0, 1, 4);
        m.bc.b_i = m.bc.b_i.submatrix(0, 0, 1, 3);
        m.bc.b_v = RatMat::zeros(1, 0);
        let diags = validate(&m);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning && d.message.contains("n_BC (1) != n_S (2)")));
    }

    #[test]
    fn wrong_width_names_offending_field() {
        let mut m = entropy_model();
        m.pde.a0 = PolyMat::zeros(1, 2);
        let diags = validate(&m);
        assert!(diags
            .iter()
            .any(|d| d.field == "pde.A0" && d.severity == Severity::Error));
    }
}
