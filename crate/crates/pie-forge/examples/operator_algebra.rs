//! The PI-operator *-algebra: addition, composition, adjoints, and exact
//! application, cross-checked against brute-force quadrature.
//!
//! ```bash
//! cargo run -p pie-forge --example operator_algebra
//! ```

use pie_forge::oracle::{quad_apply, F64Op};
use pie_forge::piops::{adjoint4, apply_exact, compose4, PiOp3, PiOp4, RlPoly};
use pie_forge::polyalg::{parse_poly, rint, PolyMat, RatMat};

fn kernel_op(r0: &str, r1: &str, r2: &str) -> PiOp4 {
    let col = |s: &str| PolyMat::column(vec![parse_poly(s).unwrap()]);
    PiOp4::from_kernels(
        (rint(0), rint(1)),
        PiOp3::new(col(r0), col(r1), col(r2)).unwrap(),
    )
}

fn main() {
    // Two lower-Volterra integrations compose into the repeated-integration
    // kernel (s - th).
    let volterra = kernel_op("0", "1", "0");
    let twice = compose4(&volterra, &volterra).unwrap();
    println!("Volterra^2 kernel R1(s,th) = {}", twice.r.r1[(0, 0)]);

    // A full operator with multiplier and both kernels.
    let x = kernel_op("s", "s - th", "2*th");
    let y = kernel_op("1 - s", "th^2", "s*th");
    let xy = compose4(&x, &y).unwrap();
    println!("\ncomposed parameters:");
    println!("  R0 = {}", xy.r.r0[(0, 0)]);
    println!("  R1 = {}", xy.r.r1[(0, 0)]);
    println!("  R2 = {}", xy.r.r2[(0, 0)]);

    // Adjoint: parameters transpose and the kernels swap with their
    // arguments exchanged.
    let adj = adjoint4(&x);
    println!("\nadjoint of R1 = s - th is R2 = {}", adj.r.r2[(0, 0)]);

    // Exact application to a polynomial argument.
    let arg = RlPoly::new(
        RatMat::zeros(0, 1),
        PolyMat::column(vec![parse_poly("1 - 2*s + s^3").unwrap()]),
    );
    let exact = apply_exact(&xy, &arg).unwrap();
    println!("\n(X Y) applied to 1 - 2s + s^3:");
    println!("  exact image = {}", exact.dist[(0, 0)]);

    // Quadrature cross-check: apply X after Y numerically and compare.
    let fx = F64Op::from_op(&x);
    let fy = F64Op::from_op(&y);
    let pts: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
    let arg_fn = |s: f64| vec![1.0 - 2.0 * s + s * s * s];
    let mid = |s: f64| -> Vec<f64> {
        let (_, d) = quad_apply(&fy, &[], &arg_fn, &[s], 60);
        vec![d[0][0]]
    };
    let (_, nested) = quad_apply(&fx, &[], &mid, &pts, 60);
    println!("  s      exact         nested quadrature");
    for (i, &s) in pts.iter().enumerate() {
        let want = exact.dist[(0, 0)].eval_f64(s, 0.0);
        println!("  {s:<5}  {want:<12.8}  {:.8}", nested[0][i]);
    }
}
