//! Conversion of an admissible GPDE model into an equivalent PIE system.
//!
//! The construction proceeds in three layers:
//!
//! 1. The shape matrices `T`, `Q`, `U1`, `U2` derived from the continuity
//!    vector alone. `T` and `Q` express every absolutely continuous term as
//!    repeated integrals of the fundamental state anchored at the left
//!    boundary; `U1`, `U2` split the full term vector into fundamental and
//!    continuous parts.
//! 2. The boundary elimination: the matrix `B_T`, whose invertibility is
//!    the admissibility condition, and the kernel `B_Q` that resolves the
//!    left-boundary values into integrals of the fundamental state. From
//!    these come the state-map kernels `G0`, `G1`, `G2`, `G_v`.
//! 3. The operator assembly: a single 4-PI composition turns the in-domain
//!    parameters into the subsystem operators, and block concatenation with
//!    the ODE parameters yields the 12 operators of the full PIE system.
//!
//! All arithmetic here is exact rational.

use crate::gpde::{BcParams, ContinuityVector, GpdeModel};
use crate::piops::{
    apply_exact, compose4, hconcat4, piop4_from_value, piop4_to_value, vconcat4, OpDims,
    OpError, PiOp3, PiOp4, RlPoly,
};
use crate::polyalg::serde_io::{self, DecodeError};
use crate::polyalg::{MatError, Poly, PolyMat, Rat, RatMat, Var};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde_json::{json, Value};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConvertError {
    #[error("boundary conditions are not square: n_BC = {n_bc}, n_S = {n_s}")]
    NonSquareBc { n_bc: usize, n_s: usize },
    #[error("boundary conditions are inadmissible: det(B_T) = 0")]
    Inadmissible,
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// `tau_k(x) = x^k / k!`, the repeated-integration monomials.
pub fn tau(k: usize) -> Poly {
    let mut fact = BigInt::one();
    for i in 2..=k {
        fact *= BigInt::from(i);
    }
    Poly::monomial(k, 0, Rat::new(BigInt::one(), fact))
}

/// The block matrices `T(x)` and `Q(x)` in an abstract argument stored in
/// the `s` slot, plus their first block rows `T1`, `Q1`.
pub struct ShapeMats {
    pub t: PolyMat,  // n_s x n_s
    pub t1: PolyMat, // n_{S_1} x n_s
    pub q: PolyMat,  // n_s x n_xhat
    pub q1: PolyMat, // n_{S_1} x n_xhat
}

/// Builds `T(x)` (block upper triangular with `tau_{j-i}` blocks) and
/// `Q(x)` (block rows with `tau` diagonals after a leading zero block).
pub fn build_t_q(n: &ContinuityVector) -> ShapeMats {
    let nn = n.order();
    let n_s = n.n_s();
    let n_xhat = n.n_xhat();
    let mut t = PolyMat::zeros(n_s, n_s);
    let mut row0 = 0usize;
    for i in 1..=nn {
        let rows = n.n_si(i);
        let mut col0 = 0usize;
        for j in 1..=nn {
            let cols = n.n_si(j);
            if j >= i && cols > 0 {
                // tau_{j-i}(x) * [0; I_{n_{S_j}}], zero rows on top.
                let pad = rows - cols;
                let tau_ji = tau(j - i);
                for k in 0..cols {
                    t[(row0 + pad + k, col0 + k)] = tau_ji.clone();
                }
            }
            col0 += cols;
        }
        row0 += rows;
    }

    let mut q = PolyMat::zeros(n_s, n_xhat);
    let mut row0 = 0usize;
    for i in 1..=nn {
        // Q_i: leading zero block of width n_{0:i-1}, then
        // diag(tau_0 I_{n_i}, ..., tau_{N-i} I_{n_N}).
        let mut col0: usize = n.n[..i].iter().sum();
        let mut r = row0;
        for k in i..=nn {
            let tk = tau(k - i);
            for c in 0..n.n[k] {
                q[(r + c, col0 + c)] = tk.clone();
            }
            r += n.n[k];
            col0 += n.n[k];
        }
        row0 += n.n_si(i);
    }

    let ns1 = if nn >= 1 { n.n_si(1) } else { 0 };
    let t1 = t.submatrix(0, 0, ns1, n_s);
    let q1 = q.submatrix(0, 0, ns1, n_xhat);
    ShapeMats { t, t1, q, q1 }
}

/// The permutation-decomposition matrices `U1`, `U2` with
/// `F x = U1 (D x) + U2 (C x)`.
pub fn build_u(n: &ContinuityVector) -> (RatMat, RatMat) {
    let nn = n.order();
    let n_f = n.n_f();
    let mut u1 = RatMat::zeros(n_f, n.n_xhat());
    let mut row0 = 0usize;
    let mut col0 = 0usize;
    for i in 0..=nn {
        // U1_i = [I_{n_i}; 0] of shape n_{S_i} x n_i
        for k in 0..n.n[i] {
            u1[(row0 + k, col0 + k)] = Rat::one();
        }
        row0 += n.n_si(i);
        col0 += n.n[i];
    }

    let mut u2 = RatMat::zeros(n_f, n.n_s());
    let mut row0 = 0usize;
    let mut col0 = 0usize;
    for i in 0..nn.max(1) {
        if i >= nn {
            break;
        }
        // U2_i = [0; I_{n_{i+1:N}}] of shape n_{S_i} x n_{S_{i+1}}
        let width = n.n_si(i + 1);
        for k in 0..width {
            u2[(row0 + n.n[i] + k, col0 + k)] = Rat::one();
        }
        row0 += n.n_si(i);
        col0 += width;
    }
    (u1, u2)
}

/// Admissibility summary for a boundary-condition set.
#[derive(Debug, Clone)]
pub struct Admissibility {
    pub n_bc: usize,
    pub n_s: usize,
    pub det: Rat,
    pub admissible: bool,
    pub cond: f64,
    pub warnings: Vec<String>,
}

/// `B_T = B [T(0); T(b-a)] - int_a^b B_I(s) U2 T(s-a) ds`, exact.
pub fn build_bt(n: &ContinuityVector, bc: &BcParams) -> Result<RatMat, ConvertError> {
    let shapes = build_t_q(n);
    let (_, u2) = build_u(n);
    let zero = Rat::zero();
    let width = &n.b - &n.a;
    let t0 = shapes.t.eval(&zero, &zero);
    let tw = shapes.t.eval(&width, &zero);
    let endpoint = bc.b.mul(&t0.vstack(&tw)?)?;

    // T(s - a) as a polynomial in s, then B_I(s) U2 T(s-a) integrated.
    let s_minus_a = Poly::var(Var::S).sub(&Poly::constant(n.a.clone()));
    let t_shift = shapes.t.substitute(Var::S, &s_minus_a);
    let integrand = bc.b_i.mul_rat_right(&u2)?.mul(&t_shift)?;
    let integral = integrand
        .integrate(
            Var::S,
            &crate::polyalg::Bound::Const(n.a.clone()),
            &crate::polyalg::Bound::Const(n.b.clone()),
        )?
        .to_rat()
        .expect("definite integral of univariate matrix is constant");
    Ok(endpoint.sub(&integral)?)
}

/// Evaluates admissibility: `B_T` square with nonzero determinant.
pub fn check_admissible(n: &ContinuityVector, bc: &BcParams) -> Result<Admissibility, ConvertError> {
    let n_bc = bc.n_bc();
    let n_s = n.n_s();
    if n_bc != n_s {
        return Err(ConvertError::NonSquareBc { n_bc, n_s });
    }
    let bt = build_bt(n, bc)?;
    let det = bt.det()?;
    let cond = bt.cond_f64();
    let mut warnings = Vec::new();
    if !det.is_zero() && cond > 1e12 {
        warnings.push(format!(
            "B_T is invertible but ill-conditioned (cond ~ {cond:.3e}); conversion proceeds"
        ));
    }
    Ok(Admissibility {
        n_bc,
        n_s,
        det: det.clone(),
        admissible: !det.is_zero(),
        cond,
        warnings,
    })
}

/// `B_Q(s) = B_T^{-1} (B_I(s) U1 + int_s^b B_I(th) U2 Q(th-s) dth - B [0; Q(b-s)])`.
pub fn build_bq(
    n: &ContinuityVector,
    bc: &BcParams,
    bt_inv: &RatMat,
) -> Result<PolyMat, ConvertError> {
    let shapes = build_t_q(n);
    let (u1, u2) = build_u(n);
    let n_s = n.n_s();
    let n_xhat = n.n_xhat();

    let term1 = bc.b_i.mul_rat_right(&u1)?;

    // int_s^b B_I(th) U2 Q(th - s) dth
    let th_minus_s = Poly::var(Var::Th).sub(&Poly::var(Var::S));
    let u2q_shift = shapes
        .q
        .mul_rat_left(&u2)?
        .substitute(Var::S, &th_minus_s);
    let bi_in_th = bc.b_i.swap_vars();
    let term2 = bi_in_th.mul(&u2q_shift)?.integrate(
        Var::Th,
        &crate::polyalg::Bound::Var(Var::S),
        &crate::polyalg::Bound::Const(n.b.clone()),
    )?;

    // B [0; Q(b - s)]
    let b_minus_s = Poly::constant(n.b.clone()).sub(&Poly::var(Var::S));
    let q_bs = shapes.q.substitute(Var::S, &b_minus_s);
    let stacked = PolyMat::zeros(n_s, n_xhat).vstack(&q_bs)?;
    let term3 = stacked.mul_rat_left(&bc.b)?;

    let inner = term1.add(&term2)?.sub(&term3)?;
    Ok(inner.mul_rat_left(bt_inv)?)
}

/// Everything derived from `{n, G_b}`: the unitary state map and its
/// building blocks.
#[derive(Debug, Clone)]
pub struct TMapBundle {
    pub dom: (Rat, Rat),
    pub t: PolyMat,
    pub t1: PolyMat,
    pub q: PolyMat,
    pub q1: PolyMat,
    pub u1: RatMat,
    pub u2: RatMat,
    pub bt: RatMat,
    pub bt_inv: RatMat,
    pub bq: PolyMat,
    pub g0: RatMat,
    pub g1: PolyMat,
    pub g2: PolyMat,
    pub gv: PolyMat,
    /// The fundamental-to-primal state map (a pure 3-PI operator).
    pub that: PiOp4,
    /// The input lift mapping `v` into the primal state.
    pub tv: PiOp4,
}

/// Builds the state-map bundle for an admissible `{n, G_b}` pair.
pub fn build_tmaps(n: &ContinuityVector, bc: &BcParams) -> Result<TMapBundle, ConvertError> {
    let adm = check_admissible(n, bc)?;
    if !adm.admissible {
        return Err(ConvertError::Inadmissible);
    }
    let shapes = build_t_q(n);
    let (u1, u2) = build_u(n);
    let bt = build_bt(n, bc)?;
    let bt_inv = bt.inverse().map_err(|_| ConvertError::Inadmissible)?;
    let bq = build_bq(n, bc, &bt_inv)?;

    let n0 = n.n[0];
    let n_xhat = n.n_xhat();
    let n_v = bc.b_v.cols();

    // G0 = diag(I_{n_0}, 0)
    let mut g0 = RatMat::zeros(n_xhat, n_xhat);
    for i in 0..n0 {
        g0[(i, i)] = Rat::one();
    }

    let s_minus_a = Poly::var(Var::S).sub(&Poly::constant(n.a.clone()));
    let t1_shift = shapes.t1.substitute(Var::S, &s_minus_a);

    // G2(s,th) = [0; T1(s-a) B_Q(th)]
    let bq_in_th = bq.swap_vars();
    let g2_lower = t1_shift.mul(&bq_in_th)?;
    let g2 = PolyMat::zeros(n0, n_xhat).vstack(&g2_lower)?;

    // G1(s,th) = [0; Q1(s-th)] + G2(s,th)
    let s_minus_th = Poly::var(Var::S).sub(&Poly::var(Var::Th));
    let q1_shift = shapes.q1.substitute(Var::S, &s_minus_th);
    let g1 = PolyMat::zeros(n0, n_xhat).vstack(&q1_shift)?.add(&g2)?;

    // G_v(s) = [0; T1(s-a) B_T^{-1} B_v]
    let gv_lower = t1_shift.mul_rat_right(&bt_inv.mul(&bc.b_v)?)?;
    let gv = PolyMat::zeros(n0, n_v).vstack(&gv_lower)?;

    let dom = (n.a.clone(), n.b.clone());
    let that = PiOp4::from_kernels(
        dom.clone(),
        PiOp3::new(PolyMat::from_rat(&g0), g1.clone(), g2.clone())?,
    );
    let tv = PiOp4::new(
        dom.clone(),
        RatMat::zeros(0, n_v),
        PolyMat::zeros(0, 0),
        gv.clone(),
        PiOp3::zero(n_xhat, 0),
    )?;

    Ok(TMapBundle {
        dom,
        t: shapes.t,
        t1: shapes.t1,
        q: shapes.q,
        q1: shapes.q1,
        u1,
        u2,
        bt,
        bt_inv,
        bq,
        g0,
        g1,
        g2,
        gv,
        that,
        tv,
    })
}

/// The PDE-subsystem operators and the two composition factors that
/// produced them.
#[derive(Debug, Clone)]
pub struct Subsystem {
    pub upsilon: PiOp4,
    pub xi: PiOp4,
    pub a_hat: PiOp4,
    pub b_v: PiOp4,
    pub c_r: PiOp4,
    pub d_rv: PiOp4,
    pub rd1: PolyMat,
    pub rd2: PolyMat,
}

/// Builds the PDE-subsystem operators by composing the in-domain parameter
/// block with the state-resolution block.
pub fn convert_subsystem(model: &GpdeModel, bundle: &TMapBundle) -> Result<Subsystem, ConvertError> {
    let n = &model.n;
    let n_s = n.n_s();
    let n_xhat = n.n_xhat();
    let n_v = model.ode.dims.n_v;
    let n_r = model.ode.dims.n_r;
    let n_f = n.n_f();
    let dom = bundle.dom.clone();

    let s_minus_a = Poly::var(Var::S).sub(&Poly::constant(n.a.clone()));
    let s_minus_th = Poly::var(Var::S).sub(&Poly::var(Var::Th));
    let b_minus_s = Poly::constant(n.b.clone()).sub(&Poly::var(Var::S));

    // R_{D,2}(s,th) = U2 T(s-a) B_Q(th); R_{D,1} = R_{D,2} + U2 Q(s-th)
    let u2t = bundle.t.substitute(Var::S, &s_minus_a).mul_rat_left(&bundle.u2)?;
    let rd2 = u2t.mul(&bundle.bq.swap_vars())?;
    let rd1 = rd2.add(&bundle.q.substitute(Var::S, &s_minus_th).mul_rat_left(&bundle.u2)?)?;

    // Upsilon maps (v, fundamental state) to (v, boundary values, full
    // distributed-term vector).
    let btinv_bv = bundle.bt_inv.mul(&model.bc.b_v)?;
    let t_width = bundle
        .t
        .eval(&(&n.b - &n.a), &Rat::zero());
    let ups_p = RatMat::identity(n_v)
        .vstack(&btinv_bv)?
        .vstack(&t_width.mul(&btinv_bv)?)?;
    let ups_q1 = PolyMat::zeros(n_v, n_xhat)
        .vstack(&bundle.bq)?
        .vstack(
            &bundle
                .bq
                .mul_rat_left(&t_width)?
                .add(&bundle.q.substitute(Var::S, &b_minus_s))?,
        )?;
    let ups_q2 = u2t.mul_rat_right(&btinv_bv)?;
    let upsilon = PiOp4::new(
        dom.clone(),
        ups_p,
        ups_q1,
        ups_q2,
        PiOp3::new(
            PolyMat::from_rat(&bundle.u1),
            rd1.clone(),
            rd2.clone(),
        )?,
    )?;

    // Xi carries the in-domain parameters.
    let xi_p = RatMat::zeros(n_r, n_v).hstack(&model.pde.d_rb)?;
    let xi_q2 = model.pde.b_xv.hstack(&model.pde.b_xb)?;
    let xi = PiOp4::new(
        dom.clone(),
        xi_p,
        model.pde.c_r.clone(),
        xi_q2,
        PiOp3::new(
            model.pde.a0.clone(),
            model.pde.a1.clone(),
            model.pde.a2.clone(),
        )?,
    )?;
    debug_assert_eq!(xi.dims().n, n_v + 2 * n_s);
    debug_assert_eq!(xi.dims().q, n_f);

    let composed = compose4(&xi, &upsilon)?;

    let a_hat = PiOp4::from_kernels(dom.clone(), composed.r.clone());
    let b_v = PiOp4::new(
        dom.clone(),
        RatMat::zeros(0, n_v),
        PolyMat::zeros(0, 0),
        composed.q2.clone(),
        PiOp3::zero(n_xhat, 0),
    )?;
    let c_r = PiOp4::new(
        dom.clone(),
        RatMat::zeros(n_r, 0),
        composed.q1.clone(),
        PolyMat::zeros(0, 0),
        PiOp3::zero(0, n_xhat),
    )?;
    let d_rv = PiOp4::from_matrix(dom, composed.p.clone());

    Ok(Subsystem {
        upsilon,
        xi,
        a_hat,
        b_v,
        c_r,
        d_rv,
        rd1,
        rd2,
    })
}

/// Dimension record of a PIE system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PieDims {
    pub n_x: usize,
    pub n_xhat: usize,
    pub n_w: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
}

/// The 12 operators of a PIE system on the state space `R^{n_x} x L2^{n_xhat}`.
#[derive(Debug, Clone)]
pub struct PieSystem {
    pub dims: PieDims,
    pub dom: (Rat, Rat),
    pub t: PiOp4,
    pub tw: PiOp4,
    pub tu: PiOp4,
    pub a: PiOp4,
    pub b1: PiOp4,
    pub b2: PiOp4,
    pub c1: PiOp4,
    pub c2: PiOp4,
    pub d11: PiOp4,
    pub d12: PiOp4,
    pub d21: PiOp4,
    pub d22: PiOp4,
}

/// Full conversion result with all intermediates kept for inspection.
#[derive(Debug, Clone)]
pub struct Conversion {
    pub continuity: ContinuityVector,
    pub admissibility: Admissibility,
    pub bundle: TMapBundle,
    pub subsystem: Subsystem,
    pub pie: PieSystem,
}

/// Converts an admissible GPDE model into its PIE system.
pub fn convert_gpde(model: &GpdeModel) -> Result<Conversion, ConvertError> {
    let admissibility = check_admissible(&model.n, &model.bc)?;
    if !admissibility.admissible {
        return Err(ConvertError::Inadmissible);
    }
    let bundle = build_tmaps(&model.n, &model.bc)?;
    let subsystem = convert_subsystem(model, &bundle)?;
    let dom = bundle.dom.clone();
    let o = &model.ode;
    let d = o.dims;
    let n_xhat = model.n.n_xhat();
    let drv = &subsystem.d_rv.p;

    let mat = |m: &RatMat| PiOp4::from_matrix(dom.clone(), m.clone());
    let zero_op =
        |dm: usize, dn: usize, dp: usize, dq: usize| PiOp4::zero(dom.clone(), OpDims { m: dm, n: dn, p: dp, q: dq });

    // T = [[I, 0], [Tv Cv, That]]
    let top = hconcat4(&mat(&RatMat::identity(d.n_x)), &zero_op(d.n_x, 0, 0, n_xhat))?;
    let bl = compose4(&bundle.tv, &mat(&o.c_v))?;
    let bottom = hconcat4(&bl, &bundle.that)?;
    let t = vconcat4(&top, &bottom)?;

    // Tw = [[0, 0], [Tv Dvw, 0]], Tu likewise with Dvu.
    let tw = vconcat4(
        &zero_op(d.n_x, d.n_w, 0, 0),
        &compose4(&bundle.tv, &mat(&o.d_vw))?,
    )?;
    let tu = vconcat4(
        &zero_op(d.n_x, d.n_u, 0, 0),
        &compose4(&bundle.tv, &mat(&o.d_vu))?,
    )?;

    // A = [[A + Bxr Drv Cv, Bxr Cr], [Bv Cv, Ahat]]
    let tl = mat(&o.a.add(&o.b_xr.mul(drv)?.mul(&o.c_v)?)?);
    let tr = compose4(&mat(&o.b_xr), &subsystem.c_r)?;
    let bl = compose4(&subsystem.b_v, &mat(&o.c_v))?;
    let a = vconcat4(&hconcat4(&tl, &tr)?, &hconcat4(&bl, &subsystem.a_hat)?)?;

    // B1 = [Bxw + Bxr Drv Dvw; Bv Dvw], B2 likewise with u.
    let b1 = vconcat4(
        &mat(&o.b_xw.add(&o.b_xr.mul(drv)?.mul(&o.d_vw)?)?),
        &compose4(&subsystem.b_v, &mat(&o.d_vw))?,
    )?;
    let b2 = vconcat4(
        &mat(&o.b_xu.add(&o.b_xr.mul(drv)?.mul(&o.d_vu)?)?),
        &compose4(&subsystem.b_v, &mat(&o.d_vu))?,
    )?;

    // C1 = [Cz + Dzr Drv Cv, Dzr Cr], C2 likewise with y.
    let c1 = hconcat4(
        &mat(&o.c_z.add(&o.d_zr.mul(drv)?.mul(&o.c_v)?)?),
        &compose4(&mat(&o.d_zr), &subsystem.c_r)?,
    )?;
    let c2 = hconcat4(
        &mat(&o.c_y.add(&o.d_yr.mul(drv)?.mul(&o.c_v)?)?),
        &compose4(&mat(&o.d_yr), &subsystem.c_r)?,
    )?;

    let d11 = mat(&o.d_zw.add(&o.d_zr.mul(drv)?.mul(&o.d_vw)?)?);
    let d12 = mat(&o.d_zu.add(&o.d_zr.mul(drv)?.mul(&o.d_vu)?)?);
    let d21 = mat(&o.d_yw.add(&o.d_yr.mul(drv)?.mul(&o.d_vw)?)?);
    let d22 = mat(&o.d_yu.add(&o.d_yr.mul(drv)?.mul(&o.d_vu)?)?);

    let pie = PieSystem {
        dims: PieDims {
            n_x: d.n_x,
            n_xhat,
            n_w: d.n_w,
            n_u: d.n_u,
            n_z: d.n_z,
            n_y: d.n_y,
        },
        dom,
        t,
        tw,
        tu,
        a,
        b1,
        b2,
        c1,
        c2,
        d11,
        d12,
        d21,
        d22,
    };

    Ok(Conversion {
        continuity: model.n.clone(),
        admissibility,
        bundle,
        subsystem,
        pie,
    })
}

/// Applies the block-order differentiation map to a polynomial primal
/// state, recovering its fundamental state.
pub fn apply_d(n: &ContinuityVector, xhat: &PolyMat) -> PolyMat {
    assert_eq!(xhat.rows(), n.n_xhat());
    let mut out = xhat.clone();
    let mut row = 0usize;
    for (block, &count) in n.n.iter().enumerate() {
        for k in 0..count {
            out[(row + k, 0)] = xhat[(row + k, 0)].diff_n(Var::S, block);
        }
        row += count;
    }
    out
}

/// Reconstructs the GPDE state from a polynomial PIE state and constant
/// inputs: `x = T x_pie + Tw w + Tu u`.
pub fn reconstruct(
    pie: &PieSystem,
    state: &RlPoly,
    w: &RatMat,
    u: &RatMat,
) -> Result<RlPoly, ConvertError> {
    let mut out = apply_exact(&pie.t, state)?;
    if pie.dims.n_w > 0 {
        let lifted = apply_exact(
            &pie.tw,
            &RlPoly::new(w.clone(), PolyMat::zeros(0, 1)),
        )?;
        out = RlPoly::new(out.fin.add(&lifted.fin)?, out.dist.add(&lifted.dist)?);
    }
    if pie.dims.n_u > 0 {
        let lifted = apply_exact(
            &pie.tu,
            &RlPoly::new(u.clone(), PolyMat::zeros(0, 1)),
        )?;
        out = RlPoly::new(out.fin.add(&lifted.fin)?, out.dist.add(&lifted.dist)?);
    }
    Ok(out)
}

/// Reconstructs the primal state from a fundamental state and input `v`
/// using the subsystem map alone: `xhat = That xi + Tv v`.
pub fn reconstruct_primal(
    bundle: &TMapBundle,
    xi: &PolyMat,
    v: &RatMat,
) -> Result<PolyMat, ConvertError> {
    let arg = RlPoly::new(RatMat::zeros(0, 1), xi.clone());
    let mut out = apply_exact(&bundle.that, &arg)?.dist;
    if v.rows() > 0 {
        let lift = apply_exact(&bundle.tv, &RlPoly::new(v.clone(), PolyMat::zeros(0, 1)))?;
        out = out.add(&lift.dist)?;
    }
    Ok(out)
}

pub fn pie_to_value(pie: &PieSystem) -> Value {
    json!({
        "dims": {
            "n_x": pie.dims.n_x, "n_xhat": pie.dims.n_xhat,
            "n_w": pie.dims.n_w, "n_u": pie.dims.n_u,
            "n_z": pie.dims.n_z, "n_y": pie.dims.n_y,
        },
        "domain": [serde_io::rat_to_string(&pie.dom.0), serde_io::rat_to_string(&pie.dom.1)],
        "T": piop4_to_value(&pie.t),
        "Tw": piop4_to_value(&pie.tw),
        "Tu": piop4_to_value(&pie.tu),
        "A": piop4_to_value(&pie.a),
        "B1": piop4_to_value(&pie.b1),
        "B2": piop4_to_value(&pie.b2),
        "C1": piop4_to_value(&pie.c1),
        "C2": piop4_to_value(&pie.c2),
        "D11": piop4_to_value(&pie.d11),
        "D12": piop4_to_value(&pie.d12),
        "D21": piop4_to_value(&pie.d21),
        "D22": piop4_to_value(&pie.d22),
    })
}

pub fn pie_from_value(v: &Value) -> Result<PieSystem, DecodeError> {
    let get = |k: &str| -> Result<&Value, DecodeError> {
        v.get(k).ok_or_else(|| DecodeError::Shape {
            expected: format!("field '{k}'"),
            got: "missing".into(),
        })
    };
    let dims_v = get("dims")?;
    let dim = |k: &str| -> Result<usize, DecodeError> {
        dims_v
            .get(k)
            .and_then(Value::as_u64)
            .map(|x| x as usize)
            .ok_or_else(|| DecodeError::Shape {
                expected: format!("dims.{k}"),
                got: "missing".into(),
            })
    };
    let dims = PieDims {
        n_x: dim("n_x")?,
        n_xhat: dim("n_xhat")?,
        n_w: dim("n_w")?,
        n_u: dim("n_u")?,
        n_z: dim("n_z")?,
        n_y: dim("n_y")?,
    };
    let dom_v = get("domain")?
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| DecodeError::Shape {
            expected: "domain [a, b]".into(),
            got: get("domain").unwrap().to_string(),
        })?;
    let dom = (
        serde_io::rat_from_value(&dom_v[0])?,
        serde_io::rat_from_value(&dom_v[1])?,
    );
    Ok(PieSystem {
        dims,
        dom,
        t: piop4_from_value(get("T")?)?,
        tw: piop4_from_value(get("Tw")?)?,
        tu: piop4_from_value(get("Tu")?)?,
        a: piop4_from_value(get("A")?)?,
        b1: piop4_from_value(get("B1")?)?,
        b2: piop4_from_value(get("B2")?)?,
        c1: piop4_from_value(get("C1")?)?,
        c2: piop4_from_value(get("C2")?)?,
        d11: piop4_from_value(get("D11")?)?,
        d12: piop4_from_value(get("D12")?)?,
        d21: piop4_from_value(get("D21")?)?,
        d22: piop4_from_value(get("D22")?)?,
    })
}

/// Direct (non-concatenation) assembly of the state-dynamics operator,
/// used as an independent cross-check of the block assembly path.
pub fn assemble_a_direct(model: &GpdeModel, sub: &Subsystem) -> Result<PiOp4, ConvertError> {
    let o = &model.ode;
    let drv = &sub.d_rv.p;
    let p = o.a.add(&o.b_xr.mul(drv)?.mul(&o.c_v)?)?;
    let q1 = sub.c_r.q1.mul_rat_left(&o.b_xr)?;
    let q2 = sub.b_v.q2.mul_rat_right(&o.c_v)?;
    Ok(PiOp4::new(
        sub.a_hat.dom.clone(),
        p,
        q1,
        q2,
        sub.a_hat.r.clone(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpde::{OdeParams, PdeParams, SignalDims};
    use crate::polyalg::{parse_poly, rat, rint};

    fn cv(n: Vec<usize>) -> ContinuityVector {
        ContinuityVector::new(n, rint(0), rint(1))
    }

    pub(crate) fn entropy_model() -> GpdeModel {
        let n = cv(vec![0, 0, 1]);
        let mut a0 = PolyMat::zeros(1, 3);
        a0[(0, 2)] = Poly::one();
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
                Poly::zero()
            }
        });
        GpdeModel {
            name: "entropy".into(),
            n,
            ode: OdeParams::zero(SignalDims::default()),
            bc: BcParams {
                b,
                b_i,
                b_v: RatMat::zeros(2, 0),
            },
            pde,
        }
    }

    fn heat_model() -> GpdeModel {
        // u_t = u_ss on [0,1], u(0) = 0, u_s(1) = 0.
        let n = cv(vec![0, 0, 1]);
        let mut a0 = PolyMat::zeros(1, 3);
        a0[(0, 2)] = Poly::one();
        let mut pde = PdeParams::zero(&n, 0, 0);
        pde.a0 = a0;
        let b = RatMat::from_fn(2, 4, |i, j| {
            if (i == 0 && j == 0) || (i == 1 && j == 3) {
                rint(1)
            } else {
                rint(0)
            }
        });
        GpdeModel {
            name: "heat".into(),
            n,
            ode: OdeParams::zero(SignalDims::default()),
            bc: BcParams {
                b,
                b_i: PolyMat::zeros(2, 3),
                b_v: RatMat::zeros(2, 0),
            },
            pde,
        }
    }

    #[test]
    fn shape_mats_single_second_order_state() {
        let n = cv(vec![0, 0, 1]);
        let sh = build_t_q(&n);
        assert_eq!(sh.t[(0, 0)], Poly::one());
        assert_eq!(sh.t[(0, 1)], Poly::var(Var::S));
        assert!(sh.t[(1, 0)].is_zero());
        assert_eq!(sh.t[(1, 1)], Poly::one());
        assert_eq!(sh.q[(0, 0)], Poly::var(Var::S));
        assert_eq!(sh.q[(1, 0)], Poly::one());
        let (u1, u2) = build_u(&n);
        assert_eq!(u1, RatMat::from_fn(3, 1, |i, _| if i == 2 { rint(1) } else { rint(0) }));
        assert_eq!(
            u2,
            RatMat::from_fn(3, 2, |i, j| if i == j { rint(1) } else { rint(0) })
        );
    }

    #[test]
    fn shape_mats_mixed_orders() {
        // n = {0,2,1}: T is 4x4, identity except an s in the upper block.
        let n = cv(vec![0, 2, 1]);
        let sh = build_t_q(&n);
        for i in 0..4 {
            assert_eq!(sh.t[(i, i)], Poly::one());
        }
        assert_eq!(sh.t[(2, 3)], Poly::var(Var::S));
        for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)] {
            assert!(sh.t[(i, j)].is_zero(), "({i},{j})");
        }
        let (u1, u2) = build_u(&n);
        // [U1 U2] is a permutation of the 7 distributed terms.
        let joined = u1.hstack(&u2).unwrap();
        for i in 0..7 {
            let row_sum: i64 = (0..7)
                .map(|j| if joined[(i, j)] == rint(1) { 1 } else { 0 })
                .sum();
            assert_eq!(row_sum, 1);
        }
        // U2 as printed: I3 block then a lone 1 in row 5, col 3.
        assert_eq!(u2[(5, 3)], rint(1));
        assert_eq!(u2.rows(), 7);
        assert_eq!(u2.cols(), 4);
    }

    #[test]
    fn t_at_zero_is_identity() {
        for n in [vec![0, 0, 1], vec![0, 2, 1], vec![1, 1, 1, 1], vec![2, 0, 1, 0, 1]] {
            let n = cv(n);
            let sh = build_t_q(&n);
            let t0 = sh.t.eval(&rint(0), &rint(0));
            assert_eq!(t0, RatMat::identity(n.n_s()));
        }
    }

    #[test]
    fn entropy_bt_and_bq_are_exact() {
        let m = entropy_model();
        let bt = build_bt(&m.n, &m.bc).unwrap();
        assert_eq!(
            bt,
            RatMat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) | (1, 0) => rint(2),
                (0, 1) => rat(1, 2),
                (1, 1) => rat(3, 2),
                _ => unreachable!(),
            })
        );
        let adm = check_admissible(&m.n, &m.bc).unwrap();
        assert!(adm.admissible);
        assert_eq!(adm.det, rint(2));

        let bundle = build_tmaps(&m.n, &m.bc).unwrap();
        // B_Q(s) = (1-s) [s/4; -1]
        assert_eq!(bundle.bq[(0, 0)], parse_poly("(1-s)*(s/4)").unwrap());
        assert_eq!(bundle.bq[(1, 0)], parse_poly("-(1-s)").unwrap());
        // B_T B_T^{-1} = I exactly.
        assert_eq!(bundle.bt.mul(&bundle.bt_inv).unwrap(), RatMat::identity(2));
    }

    #[test]
    fn entropy_state_map_kernels() {
        let m = entropy_model();
        let bundle = build_tmaps(&m.n, &m.bc).unwrap();
        assert!(bundle.g0.is_zero());
        // G2(s,th) = T1(s) B_Q(th) = (1-th)(th/4) - s(1-th)
        let expected_g2 = parse_poly("(1-th)*(th/4) - s*(1-th)").unwrap();
        assert_eq!(bundle.g2[(0, 0)], expected_g2);
        // G1 - G2 = Q1(s - th) = s - th
        let diff = bundle.g1[(0, 0)].sub(&bundle.g2[(0, 0)]);
        assert_eq!(diff, parse_poly("s - th").unwrap());
    }

    #[test]
    fn heat_state_map_matches_known_kernels() {
        let m = heat_model();
        let bundle = build_tmaps(&m.n, &m.bc).unwrap();
        assert_eq!(bundle.bt, RatMat::identity(2));
        assert_eq!(bundle.g1[(0, 0)], parse_poly("-th").unwrap());
        assert_eq!(bundle.g2[(0, 0)], parse_poly("-s").unwrap());
        assert!(bundle.g0.is_zero());
        // The converted dynamics operator is the pure multiplier 1.
        let conv = convert_gpde(&m).unwrap();
        assert_eq!(conv.subsystem.a_hat.r.r0[(0, 0)], Poly::one());
        assert!(conv.subsystem.a_hat.r.r1.is_zero());
        assert!(conv.subsystem.a_hat.r.r2.is_zero());
    }

    #[test]
    fn roundtrip_differentiation_recovers_state() {
        // D(That xi) = xi exactly for polynomial xi, and the reconstruction
        // satisfies the boundary conditions.
        let m = entropy_model();
        let bundle = build_tmaps(&m.n, &m.bc).unwrap();
        let xi = PolyMat::column(vec![parse_poly("3 - 2*s + s^2/2").unwrap()]);
        let xhat = reconstruct_primal(&bundle, &xi, &RatMat::zeros(0, 1)).unwrap();
        let back = apply_d(&m.n, &xhat);
        assert_eq!(back, xi);
        // BC residual, exactly: eta(0) + int eta = 0 and eta(1) + int eta = 0.
        let eta = &xhat[(0, 0)];
        let integral = eta
            .integrate(
                Var::S,
                &crate::polyalg::Bound::Const(rint(0)),
                &crate::polyalg::Bound::Const(rint(1)),
            )
            .unwrap();
        let at0 = eta.eval(&rint(0), &rint(0));
        let at1 = eta.eval(&rint(1), &rint(0));
        assert_eq!(at0 + integral.coeff(0, 0).clone(), rint(0));
        assert_eq!(at1 + integral.coeff(0, 0), rint(0));
    }

    #[test]
    fn decoupled_model_produces_block_diagonal_dynamics() {
        // An ODE next to a PDE with no coupling: the assembled operators
        // reduce to the bare ODE matrices and the bare subsystem kernels.
        let n = cv(vec![0, 0, 1]);
        let mut pde = PdeParams::zero(&n, 0, 0);
        let mut a0 = PolyMat::zeros(1, 3);
        a0[(0, 2)] = Poly::one();
        pde.a0 = a0;
        let dims = SignalDims {
            n_x: 1,
            n_w: 1,
            n_z: 1,
            ..Default::default()
        };
        let mut ode = OdeParams::zero(dims);
        ode.a = RatMat::from_rows(vec![vec![rint(-3)]]);
        ode.b_xw = RatMat::from_rows(vec![vec![rint(1)]]);
        ode.c_z = RatMat::from_rows(vec![vec![rint(2)]]);
        ode.d_zw = RatMat::from_rows(vec![vec![rat(1, 2)]]);
        let b = RatMat::from_fn(2, 4, |i, j| {
            if (i == 0 && j == 0) || (i == 1 && j == 3) {
                rint(1)
            } else {
                rint(0)
            }
        });
        let model = GpdeModel {
            name: "decoupled".into(),
            n,
            ode,
            bc: BcParams {
                b,
                b_i: PolyMat::zeros(2, 3),
                b_v: RatMat::zeros(2, 0),
            },
            pde,
        };
        let conv = convert_gpde(&model).unwrap();
        assert_eq!(conv.pie.a.p[(0, 0)], rint(-3));
        assert!(conv.pie.a.q1.is_zero());
        assert!(conv.pie.a.q2.is_zero());
        assert_eq!(conv.pie.d11.p[(0, 0)], rat(1, 2));
        assert_eq!(conv.pie.b1.p[(0, 0)], rint(1));
        assert_eq!(conv.pie.c1.p[(0, 0)], rint(2));
        // A block assembled by concatenation equals direct assembly.
        let direct = assemble_a_direct(&model, &conv.subsystem).unwrap();
        assert_eq!(conv.pie.a, direct);
    }

    #[test]
    fn shifted_domain_produces_shifted_kernels() {
        // The diffusion model on [1, 3]: the same boundary structure gives
        // kernels in (s - a) and (th - a).
        let n = ContinuityVector::new(vec![0, 0, 1], rint(1), rint(3));
        let b = RatMat::from_fn(2, 4, |i, j| {
            if (i == 0 && j == 0) || (i == 1 && j == 3) {
                rint(1)
            } else {
                rint(0)
            }
        });
        let bc = BcParams {
            b,
            b_i: PolyMat::zeros(2, 3),
            b_v: RatMat::zeros(2, 0),
        };
        let bundle = build_tmaps(&n, &bc).unwrap();
        assert_eq!(bundle.bt, RatMat::identity(2));
        assert_eq!(bundle.g1[(0, 0)], parse_poly("-(th - 1)").unwrap());
        assert_eq!(bundle.g2[(0, 0)], parse_poly("-(s - 1)").unwrap());

        // Round trip still exact off the unit interval.
        let xi = PolyMat::column(vec![parse_poly("2 - s + s^3").unwrap()]);
        let xhat = reconstruct_primal(&bundle, &xi, &RatMat::zeros(0, 1)).unwrap();
        assert_eq!(apply_d(&n, &xhat), xi);
        // Reconstructed boundary values: u(1) = 0 and u_s(3) = 0.
        let u = &xhat[(0, 0)];
        assert!(u.eval(&rint(1), &rint(0)).is_zero());
        assert!(u.diff(Var::S).eval(&rint(3), &rint(0)).is_zero());
    }

    #[test]
    fn block_assembly_matches_direct_assembly() {
        // The concatenation-built dynamics operator equals direct
        // parameter assembly on models with and without ODE coupling.
        for loader in [entropy_model as fn() -> GpdeModel, heat_model] {
            let model = loader();
            let conv = convert_gpde(&model).unwrap();
            let direct = assemble_a_direct(&model, &conv.subsystem).unwrap();
            assert_eq!(conv.pie.a, direct, "{}", model.name);
        }
        let loaded = crate::models::load_builtin("datko").unwrap();
        let conv = convert_gpde(&loaded.model).unwrap();
        let direct = assemble_a_direct(&loaded.model, &conv.subsystem).unwrap();
        assert_eq!(conv.pie.a, direct);
    }

    #[test]
    fn zero_state_reconstructs_to_zero() {
        let m = entropy_model();
        let conv = convert_gpde(&m).unwrap();
        let zero = RlPoly::new(RatMat::zeros(0, 1), PolyMat::zeros(1, 1));
        let out = reconstruct(&conv.pie, &zero, &RatMat::zeros(0, 1), &RatMat::zeros(0, 1))
            .unwrap();
        assert!(out.fin.is_zero());
        assert!(out.dist.is_zero());
    }

    #[test]
    fn core_values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Poly>();
        assert_send_sync::<PolyMat>();
        assert_send_sync::<RatMat>();
        assert_send_sync::<PiOp4>();
        assert_send_sync::<GpdeModel>();
        assert_send_sync::<PieSystem>();
        assert_send_sync::<TMapBundle>();
    }

    #[test]
    fn non_square_bc_is_an_error() {
        let mut m = entropy_model();
        m.bc.b = m.bc.b.submatrix(0, 0, 1, 4);
        m.bc.b_i = m.bc.b_i.submatrix(0, 0, 1, 3);
        m.bc.b_v = RatMat::zeros(1, 0);
        assert!(matches!(
            check_admissible(&m.n, &m.bc),
            Err(ConvertError::NonSquareBc { n_bc: 1, n_s: 2 })
        ));
    }

    #[test]
    fn dirichlet_everything_is_admissible_with_identity_bt() {
        // B selects all left boundary values: B_T = T(0) = I.
        let n = cv(vec![0, 1, 1]);
        let n_s = n.n_s();
        let b = RatMat::identity(n_s).hstack(&RatMat::zeros(n_s, n_s)).unwrap();
        let bc = BcParams {
            b,
            b_i: PolyMat::zeros(n_s, n.n_f()),
            b_v: RatMat::zeros(n_s, 0),
        };
        let bt = build_bt(&n, &bc).unwrap();
        assert_eq!(bt, RatMat::identity(n_s));
    }
}
