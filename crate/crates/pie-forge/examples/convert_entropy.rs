//! Converting the entropy model (diffusion with integral boundary
//! conditions) and inspecting the state map, including the reference-kernel
//! comparison report.
//!
//! ```bash
//! cargo run -p pie-forge --example convert_entropy
//! ```

use pie_forge::converter::{apply_d, convert_gpde, reconstruct_primal};
use pie_forge::models::{load_builtin, reference};
use pie_forge::polyalg::{parse_poly, PolyMat, RatMat};

fn main() {
    let model = load_builtin("entropy").unwrap().model;
    let conv = convert_gpde(&model).unwrap();

    println!("boundary-elimination matrix B_T = {:?}", conv.bundle.bt);
    println!("det(B_T) = {}", conv.admissibility.det);
    println!("B_Q(s) = {:?}", conv.bundle.bq);
    println!("state-map kernels:");
    println!("  G1(s,th) = {}", conv.bundle.g1[(0, 0)]);
    println!("  G2(s,th) = {}", conv.bundle.g2[(0, 0)]);

    // The defining property of the state map: differentiate the
    // reconstruction and recover the fundamental state, exactly.
    let xi = PolyMat::column(vec![parse_poly("24").unwrap()]);
    let eta = reconstruct_primal(&conv.bundle, &xi, &RatMat::zeros(0, 1)).unwrap();
    println!("\nreconstruction of the constant state 24: eta(s) = {}", eta[(0, 0)]);
    println!("second derivative of eta: {}", apply_d(&model.n, &eta)[(0, 0)]);

    println!("\nreference-kernel comparison:");
    for d in reference::compare_conversion(&conv, "entropy") {
        println!(
            "  [{}] {}\n      computed:  {}\n      reference: {}",
            if d.matches { "match " } else { "DIFFERS" },
            d.object,
            d.computed,
            d.reference
        );
        if !d.matches {
            println!("      note: {}", d.note);
        }
    }
}
