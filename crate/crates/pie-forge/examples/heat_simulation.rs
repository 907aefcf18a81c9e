//! Full pipeline on the heat equation: convert, discretize, integrate in
//! time, reconstruct, and compare against the analytic eigenfunction
//! series.
//!
//! ```bash
//! cargo run -p pie-forge --example heat_simulation
//! ```

use pie_forge::converter::convert_gpde;
use pie_forge::discretizer::DiscretePie;
use pie_forge::models::load_builtin;
use pie_forge::oracle::heat_reference;
use pie_forge::simulator::{reconstruct_trajectory, run_discrete, Signals};

fn main() {
    let loaded = load_builtin("heat").unwrap();
    let conv = convert_gpde(&loaded.model).unwrap();
    println!(
        "state-map kernels: R1 = {}, R2 = {}",
        conv.bundle.g1[(0, 0)],
        conv.bundle.g2[(0, 0)]
    );

    let mut cfg = loaded.sim.clone().unwrap();
    cfg.output_stride = 10;
    let disc = DiscretePie::new(&conv.pie, cfg.modes).unwrap();
    let traj = run_discrete(&disc, &cfg, &Signals::default()).unwrap();
    let rec = reconstruct_trajectory(&disc, &traj, &Signals::default());

    println!("\n   t        ||T x||^2      L2 error vs series");
    let init = |s: f64| (std::f64::consts::PI / 2.0 * s).sin();
    for (k, &t) in traj.t.iter().enumerate() {
        let energy = disc.t_norm_sq(&traj.states[k]);
        let u_ref = heat_reference(t, &disc.basis.nodes, &init, 40, 800);
        let mut err = 0.0;
        for (l, w) in disc.basis.quad_weights.iter().enumerate() {
            let d = rec.states[k][l] - u_ref[l];
            err += d * d * w;
        }
        println!("  {t:<8.3} {energy:<14.8e} {:.3e}", err.sqrt());
    }

    // The reconstructed solution honors the boundary conditions it was
    // converted from: u(t,0) = 0 and u_s(t,1) = 0.
    let d1 = pie_forge::discretizer::differentiation_matrix(&disc.basis, 1);
    let last = rec.states.last().unwrap();
    let du = &d1 * last;
    println!(
        "\nboundary check at t = {}: u(0) = {:.2e}, u_s(1) = {:.2e}",
        traj.t.last().unwrap(),
        last[0],
        du[disc.basis.degree]
    );
}
