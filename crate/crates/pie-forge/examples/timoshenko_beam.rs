//! Fourth-order beam model: conversion with a five-entry continuity vector
//! and the beam-kernel comparison for the displacement channel.
//!
//! ```bash
//! cargo run -p pie-forge --example timoshenko_beam
//! ```

use pie_forge::converter::{apply_d, convert_gpde, reconstruct_primal};
use pie_forge::models::{load_builtin, reference};
use pie_forge::polyalg::{rint, Poly, PolyMat, RatMat};

fn main() {
    let model = load_builtin("timoshenko").unwrap().model;
    println!(
        "n = {:?}: n_xhat = {}, n_S = {} (so {} boundary conditions are needed)",
        model.n.n,
        model.n.n_xhat(),
        model.n.n_s(),
        model.n.n_s()
    );
    let conv = convert_gpde(&model).unwrap();
    println!("det(B_T) = {}", conv.admissibility.det);

    println!("\nstate-map kernels on the displacement channel:");
    println!("  G1[3][3] = {}", conv.bundle.g1[(3, 3)]);
    println!("  G2[3][3] = {}", conv.bundle.g2[(3, 3)]);
    // G1 - G2 must be the repeated-integration kernel tau_3(s - th).
    let diff = conv.bundle.g1[(3, 3)].sub(&conv.bundle.g2[(3, 3)]);
    println!("  G1 - G2  = {} (the cubic Cauchy kernel)", diff);

    let xi = PolyMat::from_fn(4, 1, |r, _| {
        Poly::from_terms(&[(0, 0, rint(1)), (1, 0, rint(r as i64 - 1)), (3, 0, rint(1))])
    });
    let xhat = reconstruct_primal(&conv.bundle, &xi, &RatMat::zeros(0, 1)).unwrap();
    println!(
        "\nround trip with a cubic state: exact = {}",
        apply_d(&model.n, &xhat) == xi
    );

    println!("\nreference-kernel comparison:");
    for d in reference::compare_conversion(&conv, "timoshenko") {
        println!("  [{}] {}", if d.matches { "match " } else { "DIFFERS" }, d.object);
        if !d.matches {
            println!("      computed:  {}", d.computed);
            println!("      reference: {}", d.reference);
        }
    }
}
