//! Implicit trapezoidal time integration of a discretized PIE
//! `T x' = A x + B1 w + B2 u - Tw w' - Tu u'`, with output evaluation and
//! reconstruction of the original model's trajectories.
//!
//! The step matrix is factored once; the system is a constant-coefficient
//! descriptor system. `T` is typically rank-deficient (its kernel rows are
//! the boundary constraints), so the discrete system is a DAE; the initial
//! state should satisfy the constraint rows of `A x + f`, which holds
//! automatically for fundamental states of boundary-compatible profiles.
//! Input derivatives are never approximated internally: whenever the
//! corresponding lift operator is nonzero, the caller must supply the
//! derivative signal explicitly.

use crate::converter::PieSystem;
use crate::discretizer::DiscretePie;
use crate::expr::Expr;
use crate::piops::OpError;
use nalgebra::{DMatrix, DVector};
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("step matrix is singular or ill-conditioned (cond ~ {0:.3e})")]
    IllConditioned(f64),
    #[error(
        "the collocated equations are trivial (0 = 0) at {0}: the state map, the \
         dynamics, and every input column vanish there, so the collocation pencil \
         is structurally singular; this occurs when chained boundary conditions \
         annihilate one channel's equation at a boundary node"
    )]
    DegenerateRows(String),
    #[error("signal '{0}' requires a derivative: the corresponding lift operator is nonzero")]
    MissingDerivative(&'static str),
    #[error("bad simulation setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Discretize(#[from] OpError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One scalar signal channel: an expression in `t` with an optional
/// derivative expression, or a sampled series with linear interpolation.
#[derive(Debug, Clone)]
pub enum SignalSpec {
    Zero,
    Expr {
        value: Expr,
        derivative: Option<Expr>,
    },
    Series {
        ts: Vec<f64>,
        values: Vec<f64>,
        derivatives: Option<Vec<f64>>,
    },
}

impl SignalSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SignalSpec::Zero => 0.0,
            SignalSpec::Expr { value, .. } => value.eval(t),
            SignalSpec::Series { ts, values, .. } => interp(ts, values, t),
        }
    }

    pub fn eval_derivative(&self, t: f64) -> Option<f64> {
        match self {
            SignalSpec::Zero => Some(0.0),
            SignalSpec::Expr { derivative, .. } => derivative.as_ref().map(|d| d.eval(t)),
            SignalSpec::Series {
                ts, derivatives, ..
            } => derivatives.as_ref().map(|d| interp(ts, d, t)),
        }
    }

    fn has_derivative(&self) -> bool {
        match self {
            SignalSpec::Zero => true,
            SignalSpec::Expr { derivative, .. } => derivative.is_some(),
            SignalSpec::Series { derivatives, .. } => derivatives.is_some(),
        }
    }
}

fn interp(ts: &[f64], vals: &[f64], t: f64) -> f64 {
    if ts.is_empty() {
        return 0.0;
    }
    if t <= ts[0] {
        return vals[0];
    }
    if t >= ts[ts.len() - 1] {
        return vals[vals.len() - 1];
    }
    let k = ts.partition_point(|&x| x <= t).saturating_sub(1);
    let (t0, t1) = (ts[k], ts[k + 1]);
    let w = (t - t0) / (t1 - t0);
    vals[k] * (1.0 - w) + vals[k + 1] * w
}

/// Static state-feedback law `u = K_ode x + int k(s) xi(s) ds` applied per
/// step; the distributed kernels act on the fundamental state through
/// quadrature.
#[derive(Debug, Clone)]
pub struct Feedback {
    /// `n_u x n_x` gains on the finite state.
    pub gain_ode: Vec<Vec<f64>>,
    /// `n_u x n_xhat` kernels in `s` on the distributed channels.
    pub gain_kernel: Vec<Vec<Expr>>,
}

/// Simulation configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub modes: usize,
    pub output_stride: usize,
    /// Initial distributed (fundamental-state) profiles, one per channel.
    pub initial: Vec<Expr>,
    /// Initial finite-dimensional state.
    pub initial_ode: Vec<f64>,
    pub feedback: Option<Feedback>,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, modes: usize) -> SimConfig {
        assert!(dt > 0.0 && t_end >= 0.0);
        SimConfig {
            dt,
            t_end,
            modes,
            output_stride: 1,
            initial: Vec::new(),
            initial_ode: Vec::new(),
            feedback: None,
        }
    }
}

/// Exogenous signals, one spec per scalar channel.
#[derive(Debug, Clone, Default)]
pub struct Signals {
    pub w: Vec<SignalSpec>,
    pub u: Vec<SignalSpec>,
}

/// Recorded simulation history (decimated by `output_stride`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub u_applied: Vec<DVector<f64>>,
}

fn signal_vec(specs: &[SignalSpec], dim: usize, t: f64) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| specs.get(i).map_or(0.0, |s| s.eval(t)))
}

fn signal_deriv_vec(
    specs: &[SignalSpec],
    dim: usize,
    t: f64,
    name: &'static str,
) -> Result<DVector<f64>, SimError> {
    let mut out = DVector::zeros(dim);
    for i in 0..dim {
        out[i] = specs
            .get(i)
            .map_or(Some(0.0), |s| s.eval_derivative(t))
            .ok_or(SimError::MissingDerivative(name))?;
    }
    Ok(out)
}

/// Builds the discrete feedback gain row(s) from the kernel expressions.
fn feedback_matrix(disc: &DiscretePie, fb: &Feedback) -> Result<DMatrix<f64>, SimError> {
    let n_u = disc.n_u;
    if fb.gain_ode.len() != n_u || fb.gain_kernel.len() != n_u {
        return Err(SimError::Setup(format!(
            "feedback rows ({}, {}) do not match n_u = {n_u}",
            fb.gain_ode.len(),
            fb.gain_kernel.len()
        )));
    }
    let nn = disc.basis.len();
    let mut k = DMatrix::zeros(n_u, disc.state_len());
    for i in 0..n_u {
        if fb.gain_ode[i].len() != disc.n_x || fb.gain_kernel[i].len() != disc.n_xhat {
            return Err(SimError::Setup("feedback gain shape mismatch".into()));
        }
        for j in 0..disc.n_x {
            k[(i, j)] = fb.gain_ode[i][j];
        }
        for ch in 0..disc.n_xhat {
            for l in 0..nn {
                let s = disc.basis.nodes[l];
                k[(i, disc.n_x + ch * nn + l)] =
                    fb.gain_kernel[i][ch].eval(s) * disc.basis.quad_weights[l];
            }
        }
    }
    Ok(k)
}

/// Builds the initial discrete state from the configured profiles.
pub fn initial_state(disc: &DiscretePie, cfg: &SimConfig) -> Result<DVector<f64>, SimError> {
    if cfg.initial_ode.len() != disc.n_x {
        return Err(SimError::Setup(format!(
            "initial_ode has {} entries, expected {}",
            cfg.initial_ode.len(),
            disc.n_x
        )));
    }
    if cfg.initial.len() != disc.n_xhat {
        return Err(SimError::Setup(format!(
            "initial has {} profiles, expected {}",
            cfg.initial.len(),
            disc.n_xhat
        )));
    }
    let nn = disc.basis.len();
    let mut x0 = DVector::zeros(disc.state_len());
    for (i, v) in cfg.initial_ode.iter().enumerate() {
        x0[i] = *v;
    }
    for (ch, prof) in cfg.initial.iter().enumerate() {
        for (l, &s) in disc.basis.nodes.iter().enumerate() {
            x0[disc.n_x + ch * nn + l] = prof.eval(s);
        }
    }
    Ok(x0)
}

/// Discretizes the system and integrates it over `[0, t_end]`.
pub fn run(pie: &PieSystem, cfg: &SimConfig, signals: &Signals) -> Result<Trajectory, SimError> {
    let disc = DiscretePie::new(pie, cfg.modes)?;
    run_discrete(&disc, cfg, signals)
}

/// Integrates a prebuilt discrete system with the trapezoidal rule.
pub fn run_discrete(
    disc: &DiscretePie,
    cfg: &SimConfig,
    signals: &Signals,
) -> Result<Trajectory, SimError> {
    let n = disc.state_len();
    let dt = cfg.dt;
    let steps = (cfg.t_end / dt).round() as usize;

    let fb = cfg
        .feedback
        .as_ref()
        .map(|f| feedback_matrix(disc, f))
        .transpose()?;

    // Closed-loop correction: u = K x turns T x' = A x + B2 u - Tu u' into
    // (T + Tu K) x' = (A + B2 K) x.
    let (m_t, m_a) = match &fb {
        Some(k) => (
            &disc.m_t + &disc.m_tu * k,
            &disc.m_a + &disc.m_b2 * k,
        ),
        None => (disc.m_t.clone(), disc.m_a.clone()),
    };

    // Rows where every system matrix vanishes carry no equation at all;
    // report them by channel and node rather than as a bare singularity.
    let mut trivially_zero = Vec::new();
    for r in 0..n {
        let all_zero = [&m_t, &m_a, &disc.m_b1, &disc.m_b2, &disc.m_tw, &disc.m_tu]
            .iter()
            .all(|m| m.row(r).amax() < 1e-14);
        if all_zero {
            let label = if r < disc.n_x {
                format!("finite state {r}")
            } else {
                let nn = disc.basis.len();
                let ch = (r - disc.n_x) / nn;
                let node = (r - disc.n_x) % nn;
                format!("channel {ch}, node s = {:.4}", disc.basis.nodes[node])
            };
            trivially_zero.push(label);
        }
    }
    if !trivially_zero.is_empty() {
        return Err(SimError::DegenerateRows(trivially_zero.join("; ")));
    }

    let s_minus = &m_t - &m_a * (dt / 2.0);
    let s_plus = &m_t + &m_a * (dt / 2.0);
    let svd = s_minus.clone().svd(false, false);
    let cond = svd.singular_values.max() / svd.singular_values.min();
    if !cond.is_finite() || cond > 1e13 {
        return Err(SimError::IllConditioned(cond));
    }
    let lu = s_minus.lu();

    let need_wdot = disc.m_tw.amax() > 0.0;
    let need_udot = fb.is_none() && disc.m_tu.amax() > 0.0;
    if need_wdot && !signals.w.iter().all(SignalSpec::has_derivative) {
        return Err(SimError::MissingDerivative("w"));
    }
    if need_udot && !signals.u.iter().all(SignalSpec::has_derivative) {
        return Err(SimError::MissingDerivative("u"));
    }

    let forcing = |t: f64| -> Result<DVector<f64>, SimError> {
        let w = signal_vec(&signals.w, disc.n_w, t);
        let mut f = &disc.m_b1 * &w;
        if need_wdot {
            let wd = signal_deriv_vec(&signals.w, disc.n_w, t, "w")?;
            f -= &disc.m_tw * wd;
        }
        if fb.is_none() {
            let u = signal_vec(&signals.u, disc.n_u, t);
            f += &disc.m_b2 * &u;
            if need_udot {
                let ud = signal_deriv_vec(&signals.u, disc.n_u, t, "u")?;
                f -= &disc.m_tu * ud;
            }
        }
        Ok(f)
    };

    let applied_u = |t: f64, x: &DVector<f64>| -> DVector<f64> {
        match &fb {
            Some(k) => k * x,
            None => signal_vec(&signals.u, disc.n_u, t),
        }
    };

    let mut traj = Trajectory {
        t: Vec::new(),
        states: Vec::new(),
        z: Vec::new(),
        y: Vec::new(),
        u_applied: Vec::new(),
    };
    let mut record = |t: f64, x: &DVector<f64>| {
        let w = signal_vec(&signals.w, disc.n_w, t);
        let u = applied_u(t, x);
        let z = &disc.m_c1 * x + &disc.m_d11 * &w + &disc.m_d12 * &u;
        let y = &disc.m_c2 * x + &disc.m_d21 * &w + &disc.m_d22 * &u;
        traj.t.push(t);
        traj.states.push(x.clone());
        traj.z.push(z);
        traj.y.push(y);
        traj.u_applied.push(u);
    };

    let mut x = DVector::zeros(n);
    let given = initial_state(disc, cfg)?;
    x.copy_from(&given);
    record(0.0, &x);

    let stride = cfg.output_stride.max(1);
    let mut f_prev = forcing(0.0)?;
    for k in 0..steps {
        let t_next = (k + 1) as f64 * dt;
        let f_next = forcing(t_next)?;
        let rhs = &s_plus * &x + (&f_prev + &f_next) * (dt / 2.0);
        x = lu
            .solve(&rhs)
            .ok_or(SimError::IllConditioned(f64::INFINITY))?;
        f_prev = f_next;
        if (k + 1) % stride == 0 || k + 1 == steps {
            record(t_next, &x);
        }
    }
    Ok(traj)
}

/// Reconstructed model trajectory: the finite state and the sampled
/// distributed state per recorded time.
#[derive(Debug, Clone)]
pub struct ReconstructedTrajectory {
    pub t: Vec<f64>,
    /// Per step: `[x; xhat(nodes) per channel]`.
    pub states: Vec<DVector<f64>>,
}

/// Applies the discretized state maps per recorded step:
/// `x_model = T x + Tw w + Tu u`.
pub fn reconstruct_trajectory(
    disc: &DiscretePie,
    traj: &Trajectory,
    signals: &Signals,
) -> ReconstructedTrajectory {
    let mut out = ReconstructedTrajectory {
        t: traj.t.clone(),
        states: Vec::with_capacity(traj.t.len()),
    };
    for (k, t) in traj.t.iter().enumerate() {
        let w = signal_vec(&signals.w, disc.n_w, *t);
        let u = &traj.u_applied[k];
        let rec = &disc.m_t * &traj.states[k] + &disc.m_tw * &w + &disc.m_tu * u;
        out.states.push(rec);
    }
    out
}

/// Writes the output history as CSV.
///
/// Header: `t,z0,...,z{n_z-1},y0,...,y{n_y-1},u0,...,energy` where
/// `energy` is the state norm `||T x||^2`.
pub fn write_outputs_csv<W: Write>(
    disc: &DiscretePie,
    traj: &Trajectory,
    mut w: W,
) -> std::io::Result<()> {
    let n_z = traj.z.first().map_or(0, DVector::len);
    let n_y = traj.y.first().map_or(0, DVector::len);
    let n_u = traj.u_applied.first().map_or(0, DVector::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..n_z).map(|i| format!("z{i}")));
    header.extend((0..n_y).map(|i| format!("y{i}")));
    header.extend((0..n_u).map(|i| format!("u{i}")));
    header.push("energy".to_string());
    writeln!(w, "{}", header.join(","))?;
    for k in 0..traj.t.len() {
        let mut row = vec![format!("{:.12e}", traj.t[k])];
        row.extend(traj.z[k].iter().map(|v| format!("{v:.12e}")));
        row.extend(traj.y[k].iter().map(|v| format!("{v:.12e}")));
        row.extend(traj.u_applied[k].iter().map(|v| format!("{v:.12e}")));
        row.push(format!("{:.12e}", disc.t_norm_sq(&traj.states[k])));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes state snapshots as CSV in long form.
///
/// Header: `t,s,channel,value`; one row per (time, node, channel). The
/// finite state uses `channel = ode{i}` with an empty `s` field.
pub fn write_states_csv<W: Write>(
    disc: &DiscretePie,
    t: &[f64],
    states: &[DVector<f64>],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "t,s,channel,value")?;
    let nn = disc.basis.len();
    for (k, tk) in t.iter().enumerate() {
        let x = &states[k];
        for i in 0..disc.n_x {
            writeln!(w, "{tk:.12e},,ode{i},{:.12e}", x[i])?;
        }
        for ch in 0..disc.n_xhat {
            for l in 0..nn {
                writeln!(
                    w,
                    "{tk:.12e},{:.12e},pde{ch},{:.12e}",
                    disc.basis.nodes[l],
                    x[disc.n_x + ch * nn + l]
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::convert_gpde;
    use crate::gpde::{BcParams, ContinuityVector, GpdeModel, OdeParams, PdeParams, SignalDims};
    use crate::polyalg::{rint, Poly, PolyMat, RatMat};

    fn heat_model() -> GpdeModel {
        let n = ContinuityVector::new(vec![0, 0, 1], rint(0), rint(1));
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
    fn zero_dynamics_keeps_state_constant() {
        // A = 0 on an order-0 state (no boundary conditions, so the mass
        // operator is the identity): the state must not move.
        let n = ContinuityVector::new(vec![1], rint(0), rint(1));
        let pde = PdeParams::zero(&n, 0, 0);
        let model = GpdeModel {
            name: "static".into(),
            n,
            ode: OdeParams::zero(SignalDims::default()),
            bc: BcParams {
                b: RatMat::zeros(0, 0),
                b_i: PolyMat::zeros(0, 1),
                b_v: RatMat::zeros(0, 0),
            },
            pde,
        };
        let conv = convert_gpde(&model).unwrap();
        let mut cfg = SimConfig::new(1e-2, 0.1, 8);
        cfg.initial = vec![Expr::parse("s^2 - 1", "s").unwrap()];
        let traj = run(&conv.pie, &cfg, &Signals::default()).unwrap();
        let first = &traj.states[0];
        let last = &traj.states[traj.states.len() - 1];
        assert!((first - last).amax() <= 1e-12);
    }

    #[test]
    fn heat_energy_decays() {
        let conv = convert_gpde(&heat_model()).unwrap();
        let disc = DiscretePie::new(&conv.pie, 16).unwrap();
        let mut cfg = SimConfig::new(1e-3, 0.05, 16);
        cfg.initial = vec![Expr::parse("-(pi/2)^2*sin(pi*s/2)", "s").unwrap()];
        let traj = run_discrete(&disc, &cfg, &Signals::default()).unwrap();
        let mut prev = f64::INFINITY;
        for x in &traj.states {
            let e = disc.t_norm_sq(x);
            assert!(e <= prev + 1e-10, "energy rose: {prev} -> {e}");
            prev = e;
        }
        // Around exp(-2 * (pi/2)^2 * 0.05) ~ 0.78 of the initial energy.
        let ratio = disc.t_norm_sq(traj.states.last().unwrap())
            / disc.t_norm_sq(&traj.states[0]);
        assert!((ratio - (-2.0f64 * (std::f64::consts::PI / 2.0).powi(2) * 0.05).exp()).abs() < 1e-2);
    }

    #[test]
    fn missing_derivative_is_rejected_when_lift_is_nonzero() {
        // Reuse the heat model but attach a boundary input: u(0) = v.
        let mut model = heat_model();
        let dims = SignalDims {
            n_v: 1,
            n_w: 1,
            ..Default::default()
        };
        model.ode = OdeParams::zero(dims);
        model.ode.d_vw = RatMat::from_rows(vec![vec![rint(1)]]);
        model.bc.b_v = RatMat::from_fn(2, 1, |i, _| if i == 0 { rint(1) } else { rint(0) });
        let mut pde = PdeParams::zero(&model.n, 1, 0);
        pde.a0 = model.pde.a0.clone();
        model.pde = pde;
        let conv = convert_gpde(&model).unwrap();
        let mut cfg = SimConfig::new(1e-2, 0.02, 8);
        cfg.initial = vec![Expr::parse("0", "s").unwrap()];
        let signals = Signals {
            w: vec![SignalSpec::Expr {
                value: Expr::parse("sin(t)", "t").unwrap(),
                derivative: None,
            }],
            u: vec![],
        };
        let err = run(&conv.pie, &cfg, &signals).unwrap_err();
        assert!(matches!(err, SimError::MissingDerivative("w")));
    }

    #[test]
    fn chained_zero_boundary_conditions_are_reported_as_degenerate() {
        // In the wave-with-motor model, zeta1(0) = 0 and zeta2(0) = 0
        // together annihilate the zeta1 equation at the left node: the
        // collocation pencil has a 0 = 0 row, which must surface as a
        // structured diagnostic rather than a bare singular matrix.
        let loaded = crate::models::load_builtin("datko").unwrap();
        let conv = convert_gpde(&loaded.model).unwrap();
        let mut cfg = loaded.sim.clone().unwrap();
        cfg.t_end = 0.1;
        cfg.modes = 12;
        let err = run(&conv.pie, &cfg, &loaded.signals).unwrap_err();
        match err {
            SimError::DegenerateRows(rows) => {
                assert!(rows.contains("node s = 0.0000"), "{rows}");
            }
            other => panic!("expected a degenerate-rows diagnostic, got {other}"),
        }
    }

    #[test]
    fn shifted_domain_simulates_and_dissipates() {
        // Diffusion on [1, 3]: basis, quadrature, and energy all follow the
        // operator's own domain.
        let n = ContinuityVector::new(vec![0, 0, 1], rint(1), rint(3));
        let b = RatMat::from_fn(2, 4, |i, j| {
            if (i == 0 && j == 0) || (i == 1 && j == 3) {
                rint(1)
            } else {
                rint(0)
            }
        });
        let mut pde = PdeParams::zero(&n, 0, 0);
        let mut a0 = PolyMat::zeros(1, 3);
        a0[(0, 2)] = Poly::one();
        pde.a0 = a0;
        let model = GpdeModel {
            name: "heat-shifted".into(),
            n,
            ode: OdeParams::zero(SignalDims::default()),
            bc: BcParams {
                b,
                b_i: PolyMat::zeros(2, 3),
                b_v: RatMat::zeros(2, 0),
            },
            pde,
        };
        let conv = convert_gpde(&model).unwrap();
        let disc = crate::discretizer::DiscretePie::new(&conv.pie, 12).unwrap();
        assert!((disc.basis.a - 1.0).abs() < 1e-14 && (disc.basis.b - 3.0).abs() < 1e-14);
        let mut cfg = SimConfig::new(1e-3, 0.2, 12);
        // First eigenmode of the shifted problem: sin(pi (s-1) / 4).
        cfg.initial = vec![Expr::parse("-(pi/4)^2*sin(pi*(s-1)/4)", "s").unwrap()];
        let traj = run_discrete(&disc, &cfg, &Signals::default()).unwrap();
        let e0 = disc.t_norm_sq(&traj.states[0]);
        let e1 = disc.t_norm_sq(traj.states.last().unwrap());
        let expected = (-2.0 * (std::f64::consts::PI / 4.0).powi(2) * 0.2).exp();
        assert!((e1 / e0 - expected).abs() < 1e-3, "{} vs {expected}", e1 / e0);
    }

    #[test]
    fn series_signals_interpolate() {
        let spec = SignalSpec::Series {
            ts: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 2.0, 0.0],
            derivatives: None,
        };
        assert_eq!(spec.eval(0.5), 1.0);
        assert_eq!(spec.eval(1.5), 1.0);
        assert_eq!(spec.eval(5.0), 0.0);
    }
}
