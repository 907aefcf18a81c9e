//! Independent brute-force verification layer.
//!
//! Everything here evaluates operators numerically from their coefficient
//! tables with its own Horner code and composite Gauss-Legendre panels; it
//! shares no kernel-evaluation code with the exact symbolic path, so
//! agreement between the two is evidence rather than tautology.

use crate::converter::{apply_d, reconstruct_primal, Conversion};
use crate::discretizer::{fundamental_projection, DiscretePie, SpectralBasis};
use crate::gpde::GpdeModel;
use crate::models::{self, reference};
use crate::piops::PiOp4;
use crate::polyalg::{Poly, PolyMat, RatMat};
use nalgebra::DVector;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

// ---------------------------------------------------------------------------
// Gauss-Legendre panels
// ---------------------------------------------------------------------------

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Initial guess (Chebyshev-like).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre integral of `f` over `[lo, hi]` using at least
/// `n_quad` total nodes in fixed-order panels.
pub fn integrate_panels(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, n_quad: usize) -> f64 {
    const ORDER: usize = 10;
    if (hi - lo).abs() < 1e-300 {
        return 0.0;
    }
    let panels = n_quad.div_ceil(ORDER);
    let (nodes, weights) = gauss_legendre(ORDER);
    let h = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let mid = a + h / 2.0;
        let half = h / 2.0;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * half * f(mid + half * x);
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Independent floating-point operator evaluation
// ---------------------------------------------------------------------------

/// A bivariate coefficient table evaluated with the oracle's own Horner
/// loop.
#[derive(Debug, Clone)]
pub struct F64Kernel {
    grid: Vec<Vec<f64>>,
}

impl F64Kernel {
    pub fn from_poly(p: &Poly) -> F64Kernel {
        let rows = p.deg_s().map_or(0, |d| d + 1);
        let cols = p.deg_th().map_or(0, |d| d + 1);
        let mut grid = vec![vec![0.0; cols]; rows];
        for (i, j, c) in p.terms() {
            grid[i][j] = c.to_f64().unwrap_or(f64::NAN);
        }
        F64Kernel { grid }
    }

    pub fn eval(&self, s: f64, th: f64) -> f64 {
        let mut acc = 0.0;
        for row in self.grid.iter().rev() {
            let mut inner = 0.0;
            for c in row.iter().rev() {
                inner = inner * th + c;
            }
            acc = acc * s + inner;
        }
        acc
    }
}

/// Floating-point snapshot of a 4-PI operator's parameters.
#[derive(Debug, Clone)]
pub struct F64Op {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub pmat: Vec<Vec<f64>>,
    pub q1: Vec<Vec<F64Kernel>>,
    pub q2: Vec<Vec<F64Kernel>>,
    pub r0: Vec<Vec<F64Kernel>>,
    pub r1: Vec<Vec<F64Kernel>>,
    pub r2: Vec<Vec<F64Kernel>>,
}

fn kernel_grid(m: &PolyMat) -> Vec<Vec<F64Kernel>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| F64Kernel::from_poly(&m[(i, j)])).collect())
        .collect()
}

impl F64Op {
    pub fn from_op(op: &PiOp4) -> F64Op {
        let d = op.dims();
        F64Op {
            a: op.dom.0.to_f64().unwrap(),
            b: op.dom.1.to_f64().unwrap(),
            m: d.m,
            n: d.n,
            p: d.p,
            q: d.q,
            pmat: (0..d.m)
                .map(|i| {
                    (0..d.n)
                        .map(|j| op.p[(i, j)].to_f64().unwrap_or(f64::NAN))
                        .collect()
                })
                .collect(),
            q1: kernel_grid(&op.q1),
            q2: kernel_grid(&op.q2),
            r0: kernel_grid(&op.r.r0),
            r1: kernel_grid(&op.r.r1),
            r2: kernel_grid(&op.r.r2),
        }
    }
}

/// Numerical application of a 4-PI operator by quadrature: the defining
/// integrals are split at each output point and evaluated with composite
/// Gauss-Legendre panels.
///
/// `x` is the finite part of the argument; `v(s)` returns the distributed
/// part. The distributed output is returned at `out_points`. The blanket
/// accuracy claims assume `n_quad >= 200`; smaller counts are fine when
/// the rule's degree of exactness is known to cover the integrand.
pub fn quad_apply(
    op: &F64Op,
    x: &[f64],
    v: &dyn Fn(f64) -> Vec<f64>,
    out_points: &[f64],
    n_quad: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert!(x.len() == op.n, "finite argument length");
    // Finite output: P x + int_a^b Q1(th) v(th) dth
    let mut fin = vec![0.0; op.m];
    for i in 0..op.m {
        for j in 0..op.n {
            fin[i] += op.pmat[i][j] * x[j];
        }
    }
    if op.q > 0 {
        for i in 0..op.m {
            let row = &op.q1[i];
            let mut f = |th: f64| -> f64 {
                let vv = v(th);
                row.iter()
                    .zip(&vv)
                    .map(|(k, val)| k.eval(th, 0.0) * val)
                    .sum()
            };
            fin[i] += integrate_panels(&mut f, op.a, op.b, n_quad);
        }
    }

    // Distributed output at each requested point.
    let mut dist = vec![vec![0.0; out_points.len()]; op.p];
    for (col, &s) in out_points.iter().enumerate() {
        let vs = if op.q > 0 { v(s) } else { Vec::new() };
        for i in 0..op.p {
            let mut acc = 0.0;
            for j in 0..op.n {
                acc += op.q2[i][j].eval(s, 0.0) * x[j];
            }
            if op.q > 0 {
                for j in 0..op.q {
                    acc += op.r0[i][j].eval(s, 0.0) * vs[j];
                }
                let r1row = &op.r1[i];
                let mut f_lower = |th: f64| -> f64 {
                    let vv = v(th);
                    r1row
                        .iter()
                        .zip(&vv)
                        .map(|(k, val)| k.eval(s, th) * val)
                        .sum()
                };
                acc += integrate_panels(&mut f_lower, op.a, s, n_quad);
                let r2row = &op.r2[i];
                let mut f_upper = |th: f64| -> f64 {
                    let vv = v(th);
                    r2row
                        .iter()
                        .zip(&vv)
                        .map(|(k, val)| k.eval(s, th) * val)
                        .sum()
                };
                acc += integrate_panels(&mut f_upper, s, op.b, n_quad);
            }
            dist[i][col] = acc;
        }
    }
    (fin, dist)
}

/// `R x L2` inner product of two sampled elements by quadrature.
pub fn rl2_inner(
    x1: &[f64],
    f1: &dyn Fn(f64) -> Vec<f64>,
    x2: &[f64],
    f2: &dyn Fn(f64) -> Vec<f64>,
    a: f64,
    b: f64,
    n_quad: usize,
) -> f64 {
    let finite: f64 = x1.iter().zip(x2).map(|(p, q)| p * q).sum();
    let mut f = |s: f64| -> f64 {
        let v1 = f1(s);
        let v2 = f2(s);
        v1.iter().zip(&v2).map(|(p, q)| p * q).sum()
    };
    finite + integrate_panels(&mut f, a, b, n_quad)
}

// ---------------------------------------------------------------------------
// Boundary-condition residual
// ---------------------------------------------------------------------------

/// Evaluates the boundary-condition residual
/// `int_a^b B_I(s) (F xhat)(s) ds + B_v v - B (B xhat)`
/// for a polynomial primal state, by quadrature and endpoint evaluation.
pub fn bc_residual(model: &GpdeModel, xhat: &PolyMat, v: &[f64], n_quad: usize) -> Vec<f64> {
    let n = &model.n;
    let lt = crate::gpde::layout(n);
    let a = n.a.to_f64().unwrap();
    let b = n.b.to_f64().unwrap();

    // Channel offsets of the primal state per (block, component).
    let mut chan = std::collections::HashMap::new();
    {
        let mut idx = 0usize;
        for (block, &count) in n.n.iter().enumerate() {
            for component in 0..count {
                chan.insert((block, component), idx);
                idx += 1;
            }
        }
    }

    // Derivative tables for every required (channel, order).
    let mut deriv_kernels: Vec<Vec<F64Kernel>> = Vec::new();
    for ch in 0..n.n_xhat() {
        let mut per_order = Vec::new();
        let mut p = xhat[(ch, 0)].clone();
        per_order.push(F64Kernel::from_poly(&p));
        for _ in 0..n.order() {
            p = p.diff(crate::polyalg::Var::S);
            per_order.push(F64Kernel::from_poly(&p));
        }
        deriv_kernels.push(per_order);
    }
    let f_row_value = |row: &crate::gpde::RowInfo, s: f64| -> f64 {
        let ch = chan[&(row.block, row.component)];
        deriv_kernels[ch][row.order].eval(s, 0.0)
    };

    let n_bc = model.bc.n_bc();
    let bi = kernel_grid(&model.bc.b_i);
    let mut residual = vec![0.0; n_bc];
    for i in 0..n_bc {
        let row = &bi[i];
        let mut f = |s: f64| -> f64 {
            lt.f_rows
                .iter()
                .enumerate()
                .map(|(j, info)| row[j].eval(s, 0.0) * f_row_value(info, s))
                .sum()
        };
        residual[i] = integrate_panels(&mut f, a, b, n_quad);
    }
    for i in 0..n_bc {
        for (jj, vj) in v.iter().enumerate() {
            residual[i] += model.bc.b_v[(i, jj)].to_f64().unwrap() * vj;
        }
    }
    for (j, (info, at_b)) in lt.b_rows().iter().enumerate() {
        let s = if *at_b { b } else { a };
        let val = f_row_value(info, s);
        for i in 0..n_bc {
            residual[i] -= model.bc.b[(i, j)].to_f64().unwrap() * val;
        }
    }
    residual
}

// ---------------------------------------------------------------------------
// Analytic reference for the insulated-end diffusion benchmark
// ---------------------------------------------------------------------------

/// Truncated eigenfunction-series solution of `u_t = u_ss` on [0, 1] with
/// `u(0) = 0`, `u_s(1) = 0`: eigenvalues `lambda_k = ((k + 1/2) pi)^2`,
/// eigenfunctions `sin(sqrt(lambda_k) s)`. Coefficients are obtained by
/// quadrature projection of the initial profile.
pub fn heat_reference(
    t: f64,
    s_points: &[f64],
    init: &dyn Fn(f64) -> f64,
    n_terms: usize,
    n_quad: usize,
) -> Vec<f64> {
    let coeffs: Vec<(f64, f64)> = (0..n_terms)
        .map(|k| {
            let root = (k as f64 + 0.5) * std::f64::consts::PI;
            let mut f = |s: f64| init(s) * (root * s).sin();
            // ||sin(root s)||^2 = 1/2 on [0,1]
            let c = 2.0 * integrate_panels(&mut f, 0.0, 1.0, n_quad);
            (root, c)
        })
        .collect();
    s_points
        .iter()
        .map(|&s| {
            coeffs
                .iter()
                .map(|(root, c)| c * (-root * root * t).exp() * (root * s).sin())
                .sum()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Verification reports
// ---------------------------------------------------------------------------

/// One verification record.
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub case: String,
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub status: bool,
}

impl CheckRecord {
    pub fn new(case: &str, check: &str, residual: f64, tolerance: f64) -> CheckRecord {
        CheckRecord {
            case: case.to_string(),
            check: check.to_string(),
            residual,
            tolerance,
            status: residual.is_finite() && residual <= tolerance,
        }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "case": self.case,
            "check": self.check,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "status": if self.status { "PASS" } else { "FAIL" },
        })
    }
}

/// Aggregated verification report.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub seed: Option<u64>,
    pub records: Vec<CheckRecord>,
    pub deviations: Vec<reference::Deviation>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.status)
    }

    pub fn to_value(&self) -> Value {
        json!({
            "seed": self.seed,
            "checks": self.records.iter().map(CheckRecord::to_value).collect::<Vec<_>>(),
            "deviations": self.deviations.iter().map(reference::Deviation::to_value).collect::<Vec<_>>(),
        })
    }
}

/// Verifies the state-map round trip and boundary residual for one model
/// on a set of deterministic polynomial states, recording residuals.
pub fn verify_model(model: &GpdeModel, report: &mut Report) {
    let case = model.name.clone();
    let conv = match crate::converter::convert_gpde(model) {
        Ok(c) => c,
        Err(e) => {
            report.records.push(CheckRecord::new(
                &case,
                &format!("conversion ({e})"),
                f64::INFINITY,
                0.0,
            ));
            return;
        }
    };
    report
        .records
        .push(CheckRecord::new(&case, "conversion admissible", 0.0, 0.0));

    let bundle = &conv.bundle;
    let n_xhat = model.n.n_xhat();
    let n_v = model.ode.dims.n_v;

    // Deterministic polynomial fundamental states.
    for (case_idx, seeds) in [[1i64, -2, 3], [2, 1, -1]].iter().enumerate() {
        let xi = PolyMat::from_fn(n_xhat, 1, |r, _| {
            let k = (r + case_idx) % 3;
            Poly::from_terms(&[
                (0, 0, crate::polyalg::rint(seeds[k])),
                (1, 0, crate::polyalg::rint(seeds[(k + 1) % 3])),
                (2, 0, crate::polyalg::rint(seeds[(k + 2) % 3])),
            ])
        });
        let v = RatMat::from_fn(n_v, 1, |r, _| crate::polyalg::rint(1 + r as i64));
        let xhat = match reconstruct_primal(bundle, &xi, &v) {
            Ok(x) => x,
            Err(e) => {
                report.records.push(CheckRecord::new(
                    &case,
                    &format!("reconstruction ({e})"),
                    f64::INFINITY,
                    0.0,
                ));
                continue;
            }
        };
        // Exact round trip.
        let back = apply_d(&model.n, &xhat);
        let exact = back == xi;
        report.records.push(CheckRecord::new(
            &case,
            &format!("state round trip (exact), case {case_idx}"),
            if exact { 0.0 } else { f64::INFINITY },
            0.0,
        ));
        // Numerical boundary residual.
        let vf: Vec<f64> = (0..n_v).map(|r| 1.0 + r as f64).collect();
        let res = bc_residual(model, &xhat, &vf, 200);
        let max_res = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        report.records.push(CheckRecord::new(
            &case,
            &format!("boundary residual, case {case_idx}"),
            max_res,
            1e-10,
        ));
    }

    // Isometry of the state map on two sampled pairs, checked through
    // spectral differentiation and quadrature.
    let iso = isometry_residual(&conv, 12);
    report
        .records
        .push(CheckRecord::new(&case, "state-map isometry", iso, 1e-8));
}

/// Largest isometry defect `|<D T xi, D T eta> - <xi, eta>|` over a few
/// deterministic pairs, evaluated with spectral differentiation on a
/// collocation grid (no exact-path shortcuts).
pub fn isometry_residual(conv: &Conversion, degree: usize) -> f64 {
    let pie = &conv.pie;
    let a = pie.dom.0.to_f64().unwrap();
    let b = pie.dom.1.to_f64().unwrap();
    let basis = SpectralBasis::new(degree, a, b);
    let disc = match DiscretePie::new(pie, degree) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    let nn = basis.len();
    let n_ch = pie.dims.n_xhat;
    let n_x = pie.dims.n_x;
    let dmap = fundamental_projection(&conv.continuity, &basis);

    let mk_state = |variant: usize| -> DVector<f64> {
        DVector::from_fn(n_x + n_ch * nn, |i, _| {
            if i < n_x {
                (i + variant + 1) as f64 * 0.5
            } else {
                let l = (i - n_x) % nn;
                let ch = (i - n_x) / nn;
                let s = basis.nodes[l];
                match variant {
                    0 => (1.0 + ch as f64) * (s * s - 0.5 * s + 0.25),
                    _ => s * s * s - (ch as f64 + 1.0) * s + 0.5,
                }
            }
        })
    };
    let inner = |x: &DVector<f64>, y: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..n_x {
            acc += x[i] * y[i];
        }
        for ch in 0..n_ch {
            for l in 0..nn {
                acc += x[n_x + ch * nn + l] * y[n_x + ch * nn + l] * basis.quad_weights[l];
            }
        }
        acc
    };
    let mut worst = 0.0f64;
    for (i, j) in [(0usize, 0usize), (0, 1), (1, 1)] {
        let xi = mk_state(i);
        let eta = mk_state(j);
        let txi = &disc.m_t * &xi;
        let teta = &disc.m_t * &eta;
        // Differentiate the distributed part back to the fundamental space;
        // the finite part passes through unchanged.
        let mut dtxi = txi.clone();
        let mut dteta = teta.clone();
        let dist_xi = &dmap * txi.rows(n_x, n_ch * nn).clone_owned();
        let dist_eta = &dmap * teta.rows(n_x, n_ch * nn).clone_owned();
        dtxi.rows_mut(n_x, n_ch * nn).copy_from(&dist_xi);
        dteta.rows_mut(n_x, n_ch * nn).copy_from(&dist_eta);
        let lhs = inner(&dtxi, &dteta);
        let rhs = inner(&xi, &eta);
        let scale = inner(&xi, &xi).sqrt() * inner(&eta, &eta).sqrt();
        worst = worst.max((lhs - rhs).abs() / scale.max(1e-300));
    }
    worst
}

/// Runs the boundary-residual and round-trip verification over seeded
/// random admissible models, in parallel when allowed.
pub fn verify_random_batch(seed: u64, cases: usize, report: &mut Report) {
    report.seed = Some(seed);
    let threads = crate::models::thread_cap();
    let models: Vec<GpdeModel> = (0..cases)
        .map(|k| models::random_admissible_model(seed.wrapping_add(k as u64)))
        .collect();
    if threads <= 1 || models.len() <= 1 {
        for m in &models {
            verify_model(m, report);
        }
        return;
    }
    let chunks: Vec<Vec<GpdeModel>> = models
        .chunks(models.len().div_ceil(threads))
        .map(|c| c.to_vec())
        .collect();
    let mut partials: Vec<Report> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    let mut local = Report::default();
                    for m in &chunk {
                        verify_model(m, &mut local);
                    }
                    local
                })
            })
            .collect();
        for h in handles {
            partials.push(h.join().expect("verification thread panicked"));
        }
    });
    // Aggregation is order-independent: sort by (case, check).
    let mut all: Vec<CheckRecord> = partials.into_iter().flat_map(|r| r.records).collect();
    all.sort_by_key(|x| (x.case.clone(), x.check.clone()));
    report.records.extend(all);
}

/// Full verification entry point: a builtin example (with its reference
/// comparisons) or a seeded random batch.
pub fn verify_all(target: VerifyTarget) -> Report {
    let mut report = Report::default();
    match target {
        VerifyTarget::Builtin(id) => {
            match models::load_builtin(&id) {
                Ok(loaded) => {
                    verify_model(&loaded.model, &mut report);
                    report
                        .deviations
                        .extend(reference::compare(&loaded.model, &id));
                }
                Err(e) => {
                    report.records.push(CheckRecord::new(
                        &id,
                        &format!("load ({e})"),
                        f64::INFINITY,
                        0.0,
                    ));
                }
            }
        }
        VerifyTarget::Random { seed, cases } => {
            verify_random_batch(seed, cases, &mut report);
        }
    }
    report
}

/// Verification target selector.
pub enum VerifyTarget {
    Builtin(String),
    Random { seed: u64, cases: usize },
}
