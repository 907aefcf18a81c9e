//! The 3-PI and 4-PI operator types and their parametric *-algebra:
//! addition, composition, adjoint, concatenation, and exact application to
//! polynomial arguments.
//!
//! A 3-PI operator acts on `L2^q[a,b]` by
//!
//! ```text
//! (P v)(s) = R0(s) v(s) + int_a^s R1(s,th) v(th) dth + int_s^b R2(s,th) v(th) dth
//! ```
//!
//! and a 4-PI operator extends it to `R^n x L2^q` with a matrix block `P`,
//! a row-integral block `Q1`, and a column-multiplier block `Q2`. All
//! parameter arithmetic is exact; every integral below is evaluated
//! symbolically.

use crate::polyalg::serde_io::{self, DecodeError};
use crate::polyalg::{Bound, MatError, Poly, PolyMat, Rat, RatMat, Var};
use num_traits::Zero;
use serde_json::{json, Value};

#[derive(Debug, Clone, thiserror::Error)]
pub enum OpError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error("kernel parameter {0} must be univariate in s")]
    KernelNotUnivariate(&'static str),
}

/// Operator dimensions: maps `R^n x L2^q` to `R^m x L2^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpDims {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

/// The three kernels of a 3-PI operator, all of shape `p x q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiOp3 {
    pub r0: PolyMat,
    pub r1: PolyMat,
    pub r2: PolyMat,
}

impl PiOp3 {
    pub fn new(r0: PolyMat, r1: PolyMat, r2: PolyMat) -> Result<PiOp3, OpError> {
        if r0.rows() != r1.rows()
            || r0.rows() != r2.rows()
            || r0.cols() != r1.cols()
            || r0.cols() != r2.cols()
        {
            return Err(OpError::DimMismatch(
                "3-PI kernels must share dimensions".into(),
            ));
        }
        if !r0.is_free_of(Var::Th) {
            return Err(OpError::KernelNotUnivariate("R0"));
        }
        Ok(PiOp3 { r0, r1, r2 })
    }

    pub fn zero(p: usize, q: usize) -> PiOp3 {
        PiOp3 {
            r0: PolyMat::zeros(p, q),
            r1: PolyMat::zeros(p, q),
            r2: PolyMat::zeros(p, q),
        }
    }

    pub fn rows(&self) -> usize {
        self.r0.rows()
    }

    pub fn cols(&self) -> usize {
        self.r0.cols()
    }
}

/// A 4-PI operator together with the domain `[a, b]` it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct PiOp4 {
    pub dom: (Rat, Rat),
    pub p: RatMat,   // m x n
    pub q1: PolyMat, // m x q, univariate in s
    pub q2: PolyMat, // p x n, univariate in s
    pub r: PiOp3,    // p x q
}

impl PiOp4 {
    pub fn new(
        dom: (Rat, Rat),
        p: RatMat,
        q1: PolyMat,
        q2: PolyMat,
        r: PiOp3,
    ) -> Result<PiOp4, OpError> {
        let (m, n) = (p.rows(), p.cols());
        let (pp, qq) = (r.rows(), r.cols());
        if q1.rows() != m || q1.cols() != qq {
            return Err(OpError::DimMismatch(format!(
                "Q1 is {}x{}, expected {}x{}",
                q1.rows(),
                q1.cols(),
                m,
                qq
            )));
        }
        if q2.rows() != pp || q2.cols() != n {
            return Err(OpError::DimMismatch(format!(
                "Q2 is {}x{}, expected {}x{}",
                q2.rows(),
                q2.cols(),
                pp,
                n
            )));
        }
        if !q1.is_free_of(Var::Th) {
            return Err(OpError::KernelNotUnivariate("Q1"));
        }
        if !q2.is_free_of(Var::Th) {
            return Err(OpError::KernelNotUnivariate("Q2"));
        }
        Ok(PiOp4 { dom, p, q1, q2, r })
    }

    pub fn dims(&self) -> OpDims {
        OpDims {
            m: self.p.rows(),
            n: self.p.cols(),
            p: self.r.rows(),
            q: self.r.cols(),
        }
    }

    pub fn zero(dom: (Rat, Rat), d: OpDims) -> PiOp4 {
        PiOp4 {
            dom,
            p: RatMat::zeros(d.m, d.n),
            q1: PolyMat::zeros(d.m, d.q),
            q2: PolyMat::zeros(d.p, d.n),
            r: PiOp3::zero(d.p, d.q),
        }
    }

    /// Identity on `R^m x L2^p`.
    pub fn identity(dom: (Rat, Rat), m: usize, p: usize) -> PiOp4 {
        PiOp4 {
            dom,
            p: RatMat::identity(m),
            q1: PolyMat::zeros(m, p),
            q2: PolyMat::zeros(p, m),
            r: PiOp3 {
                r0: PolyMat::identity(p),
                r1: PolyMat::zeros(p, p),
                r2: PolyMat::zeros(p, p),
            },
        }
    }

    /// Purely finite-dimensional operator (a matrix).
    pub fn from_matrix(dom: (Rat, Rat), m: RatMat) -> PiOp4 {
        let (rows, cols) = (m.rows(), m.cols());
        PiOp4 {
            dom,
            p: m,
            q1: PolyMat::zeros(rows, 0),
            q2: PolyMat::zeros(0, cols),
            r: PiOp3::zero(0, 0),
        }
    }

    /// Purely distributed multiplier-and-kernel operator.
    pub fn from_kernels(dom: (Rat, Rat), r: PiOp3) -> PiOp4 {
        let (p, q) = (r.rows(), r.cols());
        PiOp4 {
            dom,
            p: RatMat::zeros(0, 0),
            q1: PolyMat::zeros(0, q),
            q2: PolyMat::zeros(p, 0),
            r,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero()
            && self.q1.is_zero()
            && self.q2.is_zero()
            && self.r.r0.is_zero()
            && self.r.r1.is_zero()
            && self.r.r2.is_zero()
    }

    pub fn scale(&self, c: &Rat) -> PiOp4 {
        PiOp4 {
            dom: self.dom.clone(),
            p: self.p.scale(c),
            q1: self.q1.scale(c),
            q2: self.q2.scale(c),
            r: PiOp3 {
                r0: self.r.r0.scale(c),
                r1: self.r.r1.scale(c),
                r2: self.r.r2.scale(c),
            },
        }
    }

    pub fn neg(&self) -> PiOp4 {
        self.scale(&-Rat::from_integer(1.into()))
    }
}

fn check_same_domain(x: &PiOp4, y: &PiOp4) -> Result<(), OpError> {
    if x.dom != y.dom {
        return Err(OpError::DimMismatch("operators on different domains".into()));
    }
    Ok(())
}

/// Parameter-wise sum of two 4-PI operators with equal dimensions.
pub fn add4(x: &PiOp4, y: &PiOp4) -> Result<PiOp4, OpError> {
    check_same_domain(x, y)?;
    if x.dims() != y.dims() {
        return Err(OpError::DimMismatch(format!(
            "add4 {:?} vs {:?}",
            x.dims(),
            y.dims()
        )));
    }
    Ok(PiOp4 {
        dom: x.dom.clone(),
        p: x.p.add(&y.p)?,
        q1: x.q1.add(&y.q1)?,
        q2: x.q2.add(&y.q2)?,
        r: PiOp3 {
            r0: x.r.r0.add(&y.r.r0)?,
            r1: x.r.r1.add(&y.r.r1)?,
            r2: x.r.r2.add(&y.r.r2)?,
        },
    })
}

pub fn sub4(x: &PiOp4, y: &PiOp4) -> Result<PiOp4, OpError> {
    add4(x, &y.neg())
}

/// Adjoint with respect to the `R x L2` inner product.
pub fn adjoint4(x: &PiOp4) -> PiOp4 {
    PiOp4 {
        dom: x.dom.clone(),
        p: x.p.transpose(),
        q1: x.q2.transpose(),
        q2: x.q1.transpose(),
        r: PiOp3 {
            r0: x.r.r0.transpose(),
            r1: x.r.r2.transpose().swap_vars(),
            r2: x.r.r1.transpose().swap_vars(),
        },
    }
}

/// Block-wise horizontal concatenation `[X Y]` (same output space).
pub fn hconcat4(x: &PiOp4, y: &PiOp4) -> Result<PiOp4, OpError> {
    check_same_domain(x, y)?;
    let (dx, dy) = (x.dims(), y.dims());
    if dx.m != dy.m || dx.p != dy.p {
        return Err(OpError::DimMismatch(format!(
            "hconcat4 output dims {:?} vs {:?}",
            dx, dy
        )));
    }
    Ok(PiOp4 {
        dom: x.dom.clone(),
        p: x.p.hstack(&y.p)?,
        q1: x.q1.hstack(&y.q1)?,
        q2: x.q2.hstack(&y.q2)?,
        r: PiOp3 {
            r0: x.r.r0.hstack(&y.r.r0)?,
            r1: x.r.r1.hstack(&y.r.r1)?,
            r2: x.r.r2.hstack(&y.r.r2)?,
        },
    })
}

/// Block-wise vertical concatenation `[X; Y]` (same input space).
pub fn vconcat4(x: &PiOp4, y: &PiOp4) -> Result<PiOp4, OpError> {
    check_same_domain(x, y)?;
    let (dx, dy) = (x.dims(), y.dims());
    if dx.n != dy.n || dx.q != dy.q {
        return Err(OpError::DimMismatch(format!(
            "vconcat4 input dims {:?} vs {:?}",
            dx, dy
        )));
    }
    Ok(PiOp4 {
        dom: x.dom.clone(),
        p: x.p.vstack(&y.p)?,
        q1: x.q1.vstack(&y.q1)?,
        q2: x.q2.vstack(&y.q2)?,
        r: PiOp3 {
            r0: x.r.r0.vstack(&y.r.r0)?,
            r1: x.r.r1.vstack(&y.r.r1)?,
            r2: x.r.r2.vstack(&y.r.r2)?,
        },
    })
}

// ---------------------------------------------------------------------------
// Trivariate scratch polynomials for composition integrals.
//
// Composition of two PI operators produces integrals over a dummy variable
// with three symbols in flight: the output variable s, the kernel argument
// eta, and the dummy theta. `Tri` holds such intermediates; the dummy is
// always integrated out before returning to `Poly`, whose two slots then
// carry (s, eta).
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    S,
    Eta,
    Theta,
}

#[derive(Clone)]
struct Tri {
    // coeffs[i][j][k]: s^i eta^j theta^k
    coeffs: Vec<Vec<Vec<Rat>>>,
}

#[derive(Clone)]
enum TriBound {
    Const(Rat),
    S,
    Eta,
}

impl Tri {
    fn zero() -> Tri {
        Tri { coeffs: Vec::new() }
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Injects a bivariate polynomial, routing its `s` slot to `to_x` and
    /// its `th` slot to `to_y`.
    fn inject(p: &Poly, to_x: Slot, to_y: Slot) -> Tri {
        assert!(to_x != to_y, "slots must differ");
        if p.is_zero() {
            return Tri::zero();
        }
        let (ds, dt) = (p.deg_s().unwrap(), p.deg_th().unwrap());
        let dims = |slot: Slot, dx: usize, dy: usize| -> usize {
            match slot {
                s if s == to_x => dx,
                s if s == to_y => dy,
                _ => 0,
            }
        };
        let (di, dj, dk) = (
            dims(Slot::S, ds, dt),
            dims(Slot::Eta, ds, dt),
            dims(Slot::Theta, ds, dt),
        );
        let mut coeffs = vec![vec![vec![Rat::zero(); dk + 1]; dj + 1]; di + 1];
        for (i, j, c) in p.terms() {
            let mut idx = [0usize; 3];
            let pos = |slot: Slot| -> usize {
                match slot {
                    Slot::S => 0,
                    Slot::Eta => 1,
                    Slot::Theta => 2,
                }
            };
            idx[pos(to_x)] = i;
            idx[pos(to_y)] = j;
            coeffs[idx[0]][idx[1]][idx[2]] = c.clone();
        }
        Tri { coeffs }
    }

    fn mul(&self, other: &Tri) -> Tri {
        if self.is_zero() || other.is_zero() {
            return Tri::zero();
        }
        let (a1, b1, c1) = (
            self.coeffs.len(),
            self.coeffs[0].len(),
            self.coeffs[0][0].len(),
        );
        let (a2, b2, c2) = (
            other.coeffs.len(),
            other.coeffs[0].len(),
            other.coeffs[0][0].len(),
        );
        let mut out = vec![vec![vec![Rat::zero(); c1 + c2 - 1]; b1 + b2 - 1]; a1 + a2 - 1];
        for i1 in 0..a1 {
            for j1 in 0..b1 {
                for k1 in 0..c1 {
                    let c = &self.coeffs[i1][j1][k1];
                    if c.is_zero() {
                        continue;
                    }
                    for i2 in 0..a2 {
                        for j2 in 0..b2 {
                            for k2 in 0..c2 {
                                let d = &other.coeffs[i2][j2][k2];
                                if d.is_zero() {
                                    continue;
                                }
                                out[i1 + i2][j1 + j2][k1 + k2] += c * d;
                            }
                        }
                    }
                }
            }
        }
        Tri { coeffs: out }
    }

    /// Integrates theta out between the given bounds; the result lives in
    /// `(s, eta)` mapped to the two `Poly` slots.
    fn integrate_theta(&self, lo: &TriBound, hi: &TriBound) -> Poly {
        let mut acc = Poly::zero();
        for (i, plane) in self.coeffs.iter().enumerate() {
            for (j, line) in plane.iter().enumerate() {
                for (k, c) in line.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    // antiderivative term: c * theta^{k+1} / (k+1)
                    let scaled = c / Rat::from_integer(((k + 1) as i64).into());
                    let eval = |bnd: &TriBound| -> Poly {
                        match bnd {
                            TriBound::Const(v) => {
                                let mut pw = Rat::from_integer(1.into());
                                for _ in 0..k + 1 {
                                    pw *= v;
                                }
                                Poly::monomial(i, j, &scaled * pw)
                            }
                            TriBound::S => Poly::monomial(i + k + 1, j, scaled.clone()),
                            TriBound::Eta => Poly::monomial(i, j + k + 1, scaled.clone()),
                        }
                    };
                    acc = acc.add(&eval(hi)).sub(&eval(lo));
                }
            }
        }
        acc
    }
}

/// Matrix-level composition integral:
/// `out[r][c] = sum_t int_lo^hi f[r][t] * g[t][c] dtheta`
/// where `f` entries are injected with `fmap` and `g` entries with `gmap`.
fn kernel_int(
    f: &PolyMat,
    fmap: (Slot, Slot),
    g: &PolyMat,
    gmap: (Slot, Slot),
    lo: &TriBound,
    hi: &TriBound,
) -> Result<PolyMat, OpError> {
    if f.cols() != g.rows() {
        return Err(OpError::DimMismatch(format!(
            "kernel integral {}x{} vs {}x{}",
            f.rows(),
            f.cols(),
            g.rows(),
            g.cols()
        )));
    }
    let mut out = PolyMat::zeros(f.rows(), g.cols());
    for r in 0..f.rows() {
        for c in 0..g.cols() {
            let mut acc = Poly::zero();
            for t in 0..f.cols() {
                let fe = &f[(r, t)];
                let ge = &g[(t, c)];
                if fe.is_zero() || ge.is_zero() {
                    continue;
                }
                let prod = Tri::inject(fe, fmap.0, fmap.1).mul(&Tri::inject(ge, gmap.0, gmap.1));
                acc = acc.add(&prod.integrate_theta(lo, hi));
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Composition `X ∘ Y` of two 4-PI operators at the parameter level.
///
/// With X = {A, B1, B2, C0, C1, C2} and Y = {P, Q1, Q2, R0, R1, R2}, the
/// composed parameters are
///
/// ```text
/// P^ = A P + int_a^b B1 Q2
/// Q1^(s)   = A Q1(s) + B1(s) R0(s) + int_s^b B1 R1(.,s) + int_a^s B1 R2(.,s)
/// Q2^(s)   = B2(s) P + C0(s) Q2(s) + int_a^s C1(s,.) Q2 + int_s^b C2(s,.) Q2
/// R0^(s)   = C0(s) R0(s)
/// R1^(s,e) = B2(s) Q1(e) + C0(s) R1(s,e) + C1(s,e) R0(e)
///            + int_a^e C1 R2 + int_e^s C1 R1 + int_s^b C2 R1
/// R2^(s,e) = B2(s) Q1(e) + C0(s) R2(s,e) + C2(s,e) R0(e)
///            + int_a^s C1 R2 + int_s^e C2 R2 + int_e^b C2 R1
/// ```
pub fn compose4(x: &PiOp4, y: &PiOp4) -> Result<PiOp4, OpError> {
    check_same_domain(x, y)?;
    let (dx, dy) = (x.dims(), y.dims());
    if dx.n != dy.m || dx.q != dy.p {
        return Err(OpError::DimMismatch(format!(
            "compose4 inner dims {:?} vs {:?}",
            dx, dy
        )));
    }
    let (a_lo, b_hi) = (TriBound::Const(x.dom.0.clone()), TriBound::Const(x.dom.1.clone()));
    let (amat, b1, b2) = (&x.p, &x.q1, &x.q2);
    let (c0, c1, c2) = (&x.r.r0, &x.r.r1, &x.r.r2);
    let (pmat, q1, q2) = (&y.p, &y.q1, &y.q2);
    let (r0, r1, r2) = (&y.r.r0, &y.r.r1, &y.r.r2);

    // P^ = A P + int_a^b B1(th) Q2(th) dth
    let int_b1q2 = kernel_int(
        b1,
        (Slot::Theta, Slot::Eta),
        q2,
        (Slot::Theta, Slot::Eta),
        &a_lo,
        &b_hi,
    )?;
    let int_b1q2 = int_b1q2
        .to_rat()
        .expect("definite integral over both variables is constant");
    let p_hat = amat.mul(pmat)?.add(&int_b1q2)?;

    // Q1^ is formed in the eta slot, then renamed to s.
    // A Q1 + B1 R0 are plain univariate products.
    let q1_hat_direct = PolyMat::from_rat(amat).mul(q1)?.add(&b1.mul(r0)?)?;
    // int_{eta}^{b} B1(th) R1(th, eta) dth, then eta -> s
    let t1 = kernel_int(
        b1,
        (Slot::Theta, Slot::S),
        r1,
        (Slot::Theta, Slot::Eta),
        &TriBound::Eta,
        &b_hi,
    )?;
    // int_{a}^{eta} B1(th) R2(th, eta) dth, then eta -> s
    let t2 = kernel_int(
        b1,
        (Slot::Theta, Slot::S),
        r2,
        (Slot::Theta, Slot::Eta),
        &a_lo,
        &TriBound::Eta,
    )?;
    let q1_hat = q1_hat_direct.add(&t1.add(&t2)?.swap_vars())?;

    // Q2^ = B2 P + C0 Q2 + int_a^s C1(s,th) Q2(th) + int_s^b C2(s,th) Q2(th)
    let q2_direct = b2.mul_rat_right(pmat)?.add(&c0.mul(q2)?)?;
    let t3 = kernel_int(
        c1,
        (Slot::S, Slot::Theta),
        q2,
        (Slot::Theta, Slot::Eta),
        &a_lo,
        &TriBound::S,
    )?;
    let t4 = kernel_int(
        c2,
        (Slot::S, Slot::Theta),
        q2,
        (Slot::Theta, Slot::Eta),
        &TriBound::S,
        &b_hi,
    )?;
    let q2_hat = q2_direct.add(&t3.add(&t4)?)?;

    // R0^ = C0 R0
    let r0_hat = c0.mul(r0)?;

    // Shared direct term: B2(s) Q1(eta)
    let b2q1 = b2.mul(&q1.swap_vars())?;
    // C1(s,eta) R0(eta) and C2(s,eta) R0(eta)
    let c1r0 = c1.mul(&r0.swap_vars())?;
    let c2r0 = c2.mul(&r0.swap_vars())?;

    let smap = (Slot::S, Slot::Theta);
    let gmap = (Slot::Theta, Slot::Eta);
    // R1^ integrals
    let i11 = kernel_int(c1, smap, r2, gmap, &a_lo, &TriBound::Eta)?;
    let i12 = kernel_int(c1, smap, r1, gmap, &TriBound::Eta, &TriBound::S)?;
    let i13 = kernel_int(c2, smap, r1, gmap, &TriBound::S, &b_hi)?;
    let r1_hat = b2q1
        .add(&c0.mul(r1)?)?
        .add(&c1r0)?
        .add(&i11)?
        .add(&i12)?
        .add(&i13)?;

    // R2^ integrals
    let i21 = kernel_int(c1, smap, r2, gmap, &a_lo, &TriBound::S)?;
    let i22 = kernel_int(c2, smap, r2, gmap, &TriBound::S, &TriBound::Eta)?;
    let i23 = kernel_int(c2, smap, r1, gmap, &TriBound::Eta, &b_hi)?;
    let r2_hat = b2q1
        .add(&c0.mul(r2)?)?
        .add(&c2r0)?
        .add(&i21)?
        .add(&i22)?
        .add(&i23)?;

    Ok(PiOp4 {
        dom: x.dom.clone(),
        p: p_hat,
        q1: q1_hat,
        q2: q2_hat,
        r: PiOp3 {
            r0: r0_hat,
            r1: r1_hat,
            r2: r2_hat,
        },
    })
}

/// An element of `R^n x L2^q` with a polynomial distributed part.
#[derive(Debug, Clone, PartialEq)]
pub struct RlPoly {
    pub fin: RatMat,     // n x 1
    pub dist: PolyMat,   // q x 1, univariate in s
}

impl RlPoly {
    pub fn new(fin: RatMat, dist: PolyMat) -> RlPoly {
        assert_eq!(fin.cols().min(1), fin.cols(), "fin must be a column");
        assert!(dist.cols() <= 1, "dist must be a column");
        RlPoly { fin, dist }
    }

    pub fn zero(n: usize, q: usize) -> RlPoly {
        RlPoly {
            fin: RatMat::zeros(n, 1),
            dist: PolyMat::zeros(q, 1),
        }
    }
}

/// Exact application of a 4-PI operator to a polynomial argument.
pub fn apply_exact(op: &PiOp4, z: &RlPoly) -> Result<RlPoly, OpError> {
    let d = op.dims();
    if z.fin.rows() != d.n || z.dist.rows() != d.q {
        return Err(OpError::DimMismatch(format!(
            "apply_exact: argument ({}, {}) vs operator input ({}, {})",
            z.fin.rows(),
            z.dist.rows(),
            d.n,
            d.q
        )));
    }
    if !z.dist.is_free_of(Var::Th) {
        return Err(OpError::KernelNotUnivariate("argument"));
    }
    let (a, b) = (&op.dom.0, &op.dom.1);
    let a_bnd = Bound::Const(a.clone());
    let b_bnd = Bound::Const(b.clone());

    // Finite part: P x + int_a^b Q1(s) v(s) ds
    let mut fin = op.p.mul(&z.fin)?;
    if d.q > 0 {
        let q1v = op.q1.mul(&z.dist)?;
        let integ = q1v.integrate(Var::S, &a_bnd, &b_bnd)?;
        fin = fin.add(&integ.to_rat().expect("definite integral is constant"))?;
    }

    // Distributed part: Q2(s) x + R0(s) v(s) + int_a^s R1 v + int_s^b R2 v
    let mut dist = op.q2.mul_rat_right(&z.fin)?;
    if d.q > 0 {
        dist = dist.add(&op.r.r0.mul(&z.dist)?)?;
        let tri_a = TriBound::Const(a.clone());
        let tri_b = TriBound::Const(b.clone());
        let v_in_theta = (Slot::Theta, Slot::Eta);
        let lower = kernel_int(
            &op.r.r1,
            (Slot::S, Slot::Theta),
            &z.dist,
            v_in_theta,
            &tri_a,
            &TriBound::S,
        )?;
        let upper = kernel_int(
            &op.r.r2,
            (Slot::S, Slot::Theta),
            &z.dist,
            v_in_theta,
            &TriBound::S,
            &tri_b,
        )?;
        dist = dist.add(&lower)?.add(&upper)?;
    }
    Ok(RlPoly { fin, dist })
}

/// JSON encoding of a 4-PI operator.
pub fn piop4_to_value(op: &PiOp4) -> Value {
    let d = op.dims();
    json!({
        "dims": { "m": d.m, "n": d.n, "p": d.p, "q": d.q },
        "domain": [serde_io::rat_to_string(&op.dom.0), serde_io::rat_to_string(&op.dom.1)],
        "P": serde_io::ratmat_to_value(&op.p),
        "Q1": serde_io::polymat_to_value(&op.q1),
        "Q2": serde_io::polymat_to_value(&op.q2),
        "R0": serde_io::polymat_to_value(&op.r.r0),
        "R1": serde_io::polymat_to_value(&op.r.r1),
        "R2": serde_io::polymat_to_value(&op.r.r2),
    })
}

pub fn piop4_from_value(v: &Value) -> Result<PiOp4, DecodeError> {
    let get = |k: &str| -> Result<&Value, DecodeError> {
        v.get(k).ok_or_else(|| DecodeError::Shape {
            expected: format!("field '{k}'"),
            got: "missing".into(),
        })
    };
    let dom_v = get("domain")?
        .as_array()
        .ok_or_else(|| DecodeError::Shape {
            expected: "domain [a, b]".into(),
            got: get("domain").unwrap().to_string(),
        })?;
    if dom_v.len() != 2 {
        return Err(DecodeError::Shape {
            expected: "domain [a, b]".into(),
            got: format!("{} entries", dom_v.len()),
        });
    }
    let dom = (
        serde_io::rat_from_value(&dom_v[0])?,
        serde_io::rat_from_value(&dom_v[1])?,
    );
    let p = serde_io::ratmat_from_value(get("P")?)?;
    let q1 = serde_io::polymat_from_value(get("Q1")?)?;
    let q2 = serde_io::polymat_from_value(get("Q2")?)?;
    let r0 = serde_io::polymat_from_value(get("R0")?)?;
    let r1 = serde_io::polymat_from_value(get("R1")?)?;
    let r2 = serde_io::polymat_from_value(get("R2")?)?;
    let r = PiOp3::new(r0, r1, r2).map_err(|e| DecodeError::Shape {
        expected: "consistent 3-PI kernels".into(),
        got: e.to_string(),
    })?;
    PiOp4::new(dom, p, q1, q2, r).map_err(|e| DecodeError::Shape {
        expected: "consistent 4-PI parameters".into(),
        got: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{parse_poly, rat, rint};

    fn dom01() -> (Rat, Rat) {
        (rint(0), rint(1))
    }

    fn kernel_op(r0: &str, r1: &str, r2: &str) -> PiOp4 {
        let mk = |s: &str| PolyMat::from_fn(1, 1, |_, _| parse_poly(s).unwrap());
        PiOp4::from_kernels(dom01(), PiOp3::new(mk(r0), mk(r1), mk(r2)).unwrap())
    }

    fn const_fun(c: i64) -> RlPoly {
        RlPoly {
            fin: RatMat::zeros(0, 1),
            dist: PolyMat::column(vec![Poly::constant(rint(c))]),
        }
    }

    #[test]
    fn add_with_negation_is_zero() {
        // The heat-equation state map has kernels R1 = -th, R2 = -s.
        let t = kernel_op("0", "-th", "-s");
        let sum = add4(&t, &t.neg()).unwrap();
        assert!(sum.is_zero());
        let out = apply_exact(&sum, &const_fun(1)).unwrap();
        assert!(out.dist.is_zero());
    }

    #[test]
    fn identity_composes_neutrally() {
        let y = kernel_op("s", "s-th", "2*th");
        let id = PiOp4::identity(dom01(), 0, 1);
        let left = compose4(&id, &y).unwrap();
        let right = compose4(&y, &id).unwrap();
        assert_eq!(left, y);
        assert_eq!(right, y);
    }

    #[test]
    fn multiplier_composition_is_pointwise_product() {
        let x = kernel_op("s", "0", "0");
        let c = compose4(&x, &x).unwrap();
        assert_eq!(c.r.r0[(0, 0)], parse_poly("s^2").unwrap());
        assert!(c.r.r1.is_zero() && c.r.r2.is_zero());
    }

    #[test]
    fn volterra_composition_gives_cauchy_kernel() {
        // Two nested lower-limit integrations collapse to the kernel (s - th).
        let v = kernel_op("0", "1", "0");
        let c = compose4(&v, &v).unwrap();
        assert_eq!(c.r.r1[(0, 0)], parse_poly("s-th").unwrap());
        assert!(c.r.r0.is_zero() && c.r.r2.is_zero());
    }

    #[test]
    fn heat_state_map_applied_to_constant() {
        // (T v)(s) for v = 1 on [0,1] with R1 = -th, R2 = -s:
        // -int_0^s th dth - int_s^1 s dth = -s^2/2 - s(1-s) = s^2/2 - s.
        let t = kernel_op("0", "-th", "-s");
        let out = apply_exact(&t, &const_fun(1)).unwrap();
        assert_eq!(out.dist[(0, 0)], parse_poly("s^2/2 - s").unwrap());
    }

    #[test]
    fn zero_input_zero_output() {
        let t = kernel_op("s", "s*th", "-s");
        let out = apply_exact(&t, &const_fun(0)).unwrap();
        assert!(out.dist.is_zero());
    }

    #[test]
    fn adjoint_swaps_kernels() {
        let x = kernel_op("0", "s", "0");
        let adj = adjoint4(&x);
        assert!(adj.r.r1.is_zero());
        assert_eq!(adj.r.r2[(0, 0)], parse_poly("th").unwrap());
        assert_eq!(adjoint4(&adj), x);
    }

    #[test]
    fn adjoint_of_symmetric_operator_is_itself() {
        // R0 symmetric multiplier, R1(s,th) = R2(th,s).
        let x = kernel_op("s^2", "s*th^2", "s^2*th");
        assert_eq!(adjoint4(&x), x);
    }

    #[test]
    fn hconcat_with_empty_operand_is_identity() {
        let x = kernel_op("s", "1", "th");
        let empty = PiOp4::zero(
            dom01(),
            OpDims {
                m: 0,
                n: 0,
                p: 1,
                q: 0,
            },
        );
        let cat = hconcat4(&x, &empty).unwrap();
        assert_eq!(cat, x);
    }

    #[test]
    fn vconcat_then_select_recovers_blocks() {
        let x = kernel_op("s", "1", "th");
        let y = kernel_op("2", "s-th", "0");
        let cat = vconcat4(&x, &y).unwrap();
        assert_eq!(cat.r.r0.submatrix(0, 0, 1, 1), x.r.r0);
        assert_eq!(cat.r.r1.submatrix(1, 0, 1, 1), y.r.r1);
        assert_eq!(cat.dims().p, 2);
    }

    #[test]
    fn composition_through_zero_width_channel_annihilates() {
        // R^0-valued middle space: X maps R^0 -> L2, Y maps L2 -> R^0.
        let x = PiOp4::zero(
            dom01(),
            OpDims {
                m: 0,
                n: 0,
                p: 1,
                q: 0,
            },
        );
        let y = PiOp4::zero(
            dom01(),
            OpDims {
                m: 0,
                n: 0,
                p: 0,
                q: 1,
            },
        );
        let c = compose4(&x, &y).unwrap();
        assert_eq!(
            c.dims(),
            OpDims {
                m: 0,
                n: 0,
                p: 1,
                q: 1
            }
        );
        assert!(c.is_zero());
    }

    #[test]
    fn composition_associates_exactly() {
        let x = kernel_op("s", "s-th", "th^2");
        let y = kernel_op("1-s", "2*th", "s*th");
        let z = kernel_op("s^2", "1", "s+th");
        let left = compose4(&compose4(&x, &y).unwrap(), &z).unwrap();
        let right = compose4(&x, &compose4(&y, &z).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn adjoint_reverses_composition() {
        let x = kernel_op("s", "s-th", "th^2");
        let y = kernel_op("1-s", "2*th", "s*th");
        let lhs = adjoint4(&compose4(&x, &y).unwrap());
        let rhs = compose4(&adjoint4(&y), &adjoint4(&x)).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn composed_parameters_match_nested_application() {
        // Parameter-level composition agrees with applying the factors in
        // sequence, on a polynomial argument, exactly.
        let x = kernel_op("s^2", "s-th", "1");
        let y = kernel_op("1", "th^2", "s");
        let arg = RlPoly {
            fin: RatMat::zeros(0, 1),
            dist: PolyMat::column(vec![parse_poly("1 - 2*s + s^3").unwrap()]),
        };
        let nested = apply_exact(&x, &apply_exact(&y, &arg).unwrap()).unwrap();
        let direct = apply_exact(&compose4(&x, &y).unwrap(), &arg).unwrap();
        assert_eq!(nested, direct);
    }

    #[test]
    fn full_4pi_composition_with_finite_channels() {
        let dom = dom01();
        // X: R^1 x L2^1 -> R^1 x L2^1 with every block populated.
        let x = PiOp4::new(
            dom.clone(),
            RatMat::from_rows(vec![vec![rint(2)]]),
            PolyMat::from_fn(1, 1, |_, _| parse_poly("s").unwrap()),
            PolyMat::from_fn(1, 1, |_, _| parse_poly("1-s").unwrap()),
            PiOp3::new(
                PolyMat::from_fn(1, 1, |_, _| parse_poly("1").unwrap()),
                PolyMat::from_fn(1, 1, |_, _| parse_poly("s-th").unwrap()),
                PolyMat::from_fn(1, 1, |_, _| parse_poly("th").unwrap()),
            )
            .unwrap(),
        )
        .unwrap();
        let y = PiOp4::new(
            dom.clone(),
            RatMat::from_rows(vec![vec![rat(1, 2)]]),
            PolyMat::from_fn(1, 1, |_, _| parse_poly("th*0 + 1").unwrap()),
            PolyMat::from_fn(1, 1, |_, _| parse_poly("s^2").unwrap()),
            PiOp3::new(
                PolyMat::from_fn(1, 1, |_, _| parse_poly("s").unwrap()),
                PolyMat::from_fn(1, 1, |_, _| parse_poly("1").unwrap()),
                PolyMat::from_fn(1, 1, |_, _| parse_poly("s*th").unwrap()),
            )
            .unwrap(),
        )
        .unwrap();
        let arg = RlPoly {
            fin: RatMat::from_rows(vec![vec![rat(3, 2)]]),
            dist: PolyMat::column(vec![parse_poly("s^2 - 1/3").unwrap()]),
        };
        let nested = apply_exact(&x, &apply_exact(&y, &arg).unwrap()).unwrap();
        let direct = apply_exact(&compose4(&x, &y).unwrap(), &arg).unwrap();
        assert_eq!(nested, direct);
    }

    #[test]
    fn json_roundtrip() {
        let x = PiOp4::new(
            dom01(),
            RatMat::from_rows(vec![vec![rat(-1, 3), rint(2)]]),
            PolyMat::from_fn(1, 1, |_, _| parse_poly("s^2/2").unwrap()),
            PolyMat::from_fn(1, 2, |_, j| {
                parse_poly(if j == 0 { "1-s" } else { "0" }).unwrap()
            }),
            PiOp3::new(
                PolyMat::from_fn(1, 1, |_, _| parse_poly("1").unwrap()),
                PolyMat::from_fn(1, 1, |_, _| parse_poly("s-th").unwrap()),
                PolyMat::from_fn(1, 1, |_, _| parse_poly("-s").unwrap()),
            )
            .unwrap(),
        )
        .unwrap();
        let v = piop4_to_value(&x);
        let y = piop4_from_value(&v).unwrap();
        assert_eq!(x, y);
    }
}
