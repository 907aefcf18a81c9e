//! Batch verification on randomly generated admissible models: the
//! differentiate-after-reconstruct round trip is exact in rational
//! arithmetic, and the reconstructed states satisfy their boundary
//! conditions to quadrature accuracy.
//!
//! ```bash
//! cargo run -p pie-forge --example random_roundtrip
//! ```

use pie_forge::converter::{apply_d, build_tmaps, reconstruct_primal};
use pie_forge::models::random_admissible_model;
use pie_forge::oracle::bc_residual;
use pie_forge::polyalg::{rint, Poly, PolyMat, RatMat};

fn main() {
    let mut exact = 0usize;
    let mut worst_residual = 0.0f64;
    for seed in 0..25u64 {
        let model = random_admissible_model(seed);
        let bundle = build_tmaps(&model.n, &model.bc).unwrap();
        let n_xhat = model.n.n_xhat();
        let n_v = model.ode.dims.n_v;
        let xi = PolyMat::from_fn(n_xhat, 1, |r, _| {
            Poly::from_terms(&[
                (0, 0, rint(seed as i64 % 5 - 2)),
                (1, 0, rint(1 + r as i64)),
                (3, 0, rint(-1)),
            ])
        });
        let v = RatMat::from_fn(n_v, 1, |_, _| rint(2));
        let xhat = reconstruct_primal(&bundle, &xi, &v).unwrap();
        if apply_d(&model.n, &xhat) == xi {
            exact += 1;
        }
        let vf: Vec<f64> = (0..n_v).map(|_| 2.0).collect();
        let res = bc_residual(&model, &xhat, &vf, 200);
        let r = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst_residual = worst_residual.max(r);
        println!(
            "seed {seed:>2}: n = {:?}  det(B_T) = {:>8}  residual {r:.2e}",
            model.n.n,
            bundle.bt.det().unwrap().to_string(),
        );
    }
    println!("\nexact round trips: {exact}/25");
    println!("worst boundary residual: {worst_residual:.3e}");
}
