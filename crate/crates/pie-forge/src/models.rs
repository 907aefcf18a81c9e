//! Model file format, bundled example registry, and reference-kernel
//! comparison tables.
//!
//! A model file is JSON with the sections `domain`, `n`, `ode`, `bc`,
//! `pde`, and optionally `sim`. Matrix entries are numbers or polynomial
//! strings in `s`/`th` (parsed exactly); missing matrices default to zero
//! blocks of the layout-implied shape. Unknown keys are rejected.

use crate::converter::{convert_gpde, Conversion};
use crate::expr::Expr;
use crate::gpde::{
    validate, BcParams, ContinuityVector, Diagnostic, GpdeModel, OdeParams, PdeParams, Severity,
    SignalDims,
};
use crate::polyalg::serde_io::{poly_from_value, rat_from_value};
use crate::polyalg::{rint, Poly, PolyMat, RatMat};
use crate::simulator::{Feedback, SignalSpec, Signals, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error("inconsistent dimension {dim}: {a} vs {b}")]
    DimConflict { dim: String, a: usize, b: usize },
    #[error("model validation failed:\n{}", summarize(.0))]
    Validation(Vec<Diagnostic>),
    #[error("unknown builtin model '{0}'")]
    UnknownBuiltin(String),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  {}: {}", d.field, d.message))
        .collect::<Vec<_>>()
        .join("\n")
}

type MatRaw = Vec<Vec<Value>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileRaw {
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    domain: (Value, Value),
    n: Vec<usize>,
    dims: Option<DimsRaw>,
    ode: Option<OdeRaw>,
    bc: Option<BcRaw>,
    pde: Option<PdeRaw>,
    sim: Option<SimRaw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimsRaw {
    #[serde(default)]
    nx: Option<usize>,
    #[serde(default)]
    nw: Option<usize>,
    #[serde(default)]
    nu: Option<usize>,
    #[serde(default)]
    nz: Option<usize>,
    #[serde(default)]
    ny: Option<usize>,
    #[serde(default)]
    nv: Option<usize>,
    #[serde(default)]
    nr: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeRaw {
    #[serde(rename = "A")]
    a: Option<MatRaw>,
    #[serde(rename = "Bxw")]
    b_xw: Option<MatRaw>,
    #[serde(rename = "Bxu")]
    b_xu: Option<MatRaw>,
    #[serde(rename = "Bxr")]
    b_xr: Option<MatRaw>,
    #[serde(rename = "Cz")]
    c_z: Option<MatRaw>,
    #[serde(rename = "Dzw")]
    d_zw: Option<MatRaw>,
    #[serde(rename = "Dzu")]
    d_zu: Option<MatRaw>,
    #[serde(rename = "Dzr")]
    d_zr: Option<MatRaw>,
    #[serde(rename = "Cy")]
    c_y: Option<MatRaw>,
    #[serde(rename = "Dyw")]
    d_yw: Option<MatRaw>,
    #[serde(rename = "Dyu")]
    d_yu: Option<MatRaw>,
    #[serde(rename = "Dyr")]
    d_yr: Option<MatRaw>,
    #[serde(rename = "Cv")]
    c_v: Option<MatRaw>,
    #[serde(rename = "Dvw")]
    d_vw: Option<MatRaw>,
    #[serde(rename = "Dvu")]
    d_vu: Option<MatRaw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BcRaw {
    #[serde(rename = "B")]
    b: Option<MatRaw>,
    #[serde(rename = "BI")]
    b_i: Option<MatRaw>,
    #[serde(rename = "Bv")]
    b_v: Option<MatRaw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeRaw {
    #[serde(rename = "A0")]
    a0: Option<MatRaw>,
    #[serde(rename = "A1")]
    a1: Option<MatRaw>,
    #[serde(rename = "A2")]
    a2: Option<MatRaw>,
    #[serde(rename = "Bxv")]
    b_xv: Option<MatRaw>,
    #[serde(rename = "Bxb")]
    b_xb: Option<MatRaw>,
    #[serde(rename = "Cr")]
    c_r: Option<MatRaw>,
    #[serde(rename = "Drb")]
    d_rb: Option<MatRaw>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimRaw {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_tend")]
    tend: f64,
    #[serde(default = "default_modes")]
    modes: usize,
    #[serde(default)]
    stride: Option<usize>,
    #[serde(default)]
    initial: Vec<String>,
    #[serde(default)]
    initial_ode: Vec<f64>,
    #[serde(default)]
    signals: Option<SignalsRaw>,
    #[serde(default)]
    feedback: Option<FeedbackRaw>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_tend() -> f64 {
    1.0
}
fn default_modes() -> usize {
    32
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalsRaw {
    #[serde(default)]
    w: Vec<SignalRaw>,
    #[serde(default)]
    u: Vec<SignalRaw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalRaw {
    expr: Option<String>,
    derivative: Option<String>,
    ts: Option<Vec<f64>>,
    values: Option<Vec<f64>>,
    derivatives: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackRaw {
    gain_ode: Vec<Vec<f64>>,
    gain_kernel: Vec<Vec<String>>,
}

/// A parsed model plus its optional simulation setup.
#[derive(Debug)]
pub struct LoadedModel {
    pub model: GpdeModel,
    pub sim: Option<SimConfig>,
    pub signals: Signals,
    pub warnings: Vec<Diagnostic>,
}

fn parse_polymat(field: &str, raw: &MatRaw) -> Result<PolyMat, LoadError> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, Vec::len);
    if raw.iter().any(|r| r.len() != cols) {
        return Err(LoadError::Field {
            field: field.into(),
            message: "ragged matrix rows".into(),
        });
    }
    let mut grid = Vec::with_capacity(rows);
    for (i, row) in raw.iter().enumerate() {
        let mut prow = Vec::with_capacity(cols);
        for (j, v) in row.iter().enumerate() {
            prow.push(poly_from_value(v).map_err(|e| LoadError::Field {
                field: format!("{field}[{i}][{j}]"),
                message: e.to_string(),
            })?);
        }
        grid.push(prow);
    }
    Ok(PolyMat::from_fn(rows, cols, |i, j| grid[i][j].clone()))
}

fn parse_ratmat(field: &str, raw: &MatRaw) -> Result<RatMat, LoadError> {
    let pm = parse_polymat(field, raw)?;
    pm.to_rat().ok_or_else(|| LoadError::Field {
        field: field.into(),
        message: "matrix must be constant (no s/th entries)".into(),
    })
}

/// Tracks a dimension inferred from matrix shapes, rejecting conflicts.
#[derive(Default)]
struct DimClaim {
    name: &'static str,
    value: Option<usize>,
}

impl DimClaim {
    fn claim(&mut self, v: usize) -> Result<(), LoadError> {
        match self.value {
            None => {
                self.value = Some(v);
                Ok(())
            }
            Some(old) if old == v => Ok(()),
            Some(old) => Err(LoadError::DimConflict {
                dim: self.name.into(),
                a: old,
                b: v,
            }),
        }
    }

    fn get(&self) -> usize {
        self.value.unwrap_or(0)
    }
}

/// Parses a model from its JSON value.
pub fn load_model_value(v: &Value) -> Result<LoadedModel, LoadError> {
    let raw: ModelFileRaw = serde_json::from_value(v.clone())?;
    let a = rat_from_value(&raw.domain.0).map_err(|e| LoadError::Field {
        field: "domain[0]".into(),
        message: e.to_string(),
    })?;
    let b = rat_from_value(&raw.domain.1).map_err(|e| LoadError::Field {
        field: "domain[1]".into(),
        message: e.to_string(),
    })?;
    if raw.n.is_empty() {
        return Err(LoadError::Field {
            field: "n".into(),
            message: "continuity vector must be non-empty".into(),
        });
    }
    if a >= b {
        return Err(LoadError::Field {
            field: "domain".into(),
            message: "domain must satisfy a < b".into(),
        });
    }
    let n = ContinuityVector::new(raw.n.clone(), a, b);

    // Infer the signal dimensions from whichever matrices are present.
    let mut nx = DimClaim { name: "nx", value: None };
    let mut nw = DimClaim { name: "nw", value: None };
    let mut nu = DimClaim { name: "nu", value: None };
    let mut nz = DimClaim { name: "nz", value: None };
    let mut ny = DimClaim { name: "ny", value: None };
    let mut nv = DimClaim { name: "nv", value: None };
    let mut nr = DimClaim { name: "nr", value: None };
    if let Some(d) = &raw.dims {
        for (claim, v) in [
            (&mut nx, d.nx),
            (&mut nw, d.nw),
            (&mut nu, d.nu),
            (&mut nz, d.nz),
            (&mut ny, d.ny),
            (&mut nv, d.nv),
            (&mut nr, d.nr),
        ] {
            if let Some(v) = v {
                claim.claim(v)?;
            }
        }
    }
    let shape = |m: &Option<MatRaw>| m.as_ref().map(|r| (r.len(), r.first().map_or(0, Vec::len)));
    let ode_raw = raw.ode.unwrap_or_default();
    let bc_raw = raw.bc.unwrap_or_default();
    let pde_raw = raw.pde.unwrap_or_default();
    fn claim_opt(claim: &mut DimClaim, v: Option<usize>) -> Result<(), LoadError> {
        if let Some(v) = v {
            claim.claim(v)?;
        }
        Ok(())
    }
    claim_opt(&mut nx, shape(&ode_raw.a).map(|s| s.0))?;
    claim_opt(&mut nx, shape(&ode_raw.a).map(|s| s.1))?;
    claim_opt(&mut nz, shape(&ode_raw.c_z).map(|s| s.0))?;
    claim_opt(&mut ny, shape(&ode_raw.c_y).map(|s| s.0))?;
    claim_opt(&mut nv, shape(&ode_raw.c_v).map(|s| s.0))?;
    claim_opt(&mut nw, shape(&ode_raw.b_xw).map(|s| s.1))?;
    claim_opt(&mut nu, shape(&ode_raw.b_xu).map(|s| s.1))?;
    claim_opt(&mut nr, shape(&ode_raw.b_xr).map(|s| s.1))?;
    claim_opt(&mut nz, shape(&ode_raw.d_zw).map(|s| s.0))?;
    claim_opt(&mut nw, shape(&ode_raw.d_zw).map(|s| s.1))?;
    claim_opt(&mut nz, shape(&ode_raw.d_zu).map(|s| s.0))?;
    claim_opt(&mut nu, shape(&ode_raw.d_zu).map(|s| s.1))?;
    claim_opt(&mut nz, shape(&ode_raw.d_zr).map(|s| s.0))?;
    claim_opt(&mut nr, shape(&ode_raw.d_zr).map(|s| s.1))?;
    claim_opt(&mut ny, shape(&ode_raw.d_yw).map(|s| s.0))?;
    claim_opt(&mut nw, shape(&ode_raw.d_yw).map(|s| s.1))?;
    claim_opt(&mut ny, shape(&ode_raw.d_yu).map(|s| s.0))?;
    claim_opt(&mut nu, shape(&ode_raw.d_yu).map(|s| s.1))?;
    claim_opt(&mut ny, shape(&ode_raw.d_yr).map(|s| s.0))?;
    claim_opt(&mut nr, shape(&ode_raw.d_yr).map(|s| s.1))?;
    claim_opt(&mut nv, shape(&ode_raw.d_vw).map(|s| s.0))?;
    claim_opt(&mut nw, shape(&ode_raw.d_vw).map(|s| s.1))?;
    claim_opt(&mut nv, shape(&ode_raw.d_vu).map(|s| s.0))?;
    claim_opt(&mut nu, shape(&ode_raw.d_vu).map(|s| s.1))?;
    claim_opt(&mut nv, shape(&bc_raw.b_v).map(|s| s.1))?;
    claim_opt(&mut nv, shape(&pde_raw.b_xv).map(|s| s.1))?;
    claim_opt(&mut nr, shape(&pde_raw.c_r).map(|s| s.0))?;
    claim_opt(&mut nr, shape(&pde_raw.d_rb).map(|s| s.0))?;
    let dims = SignalDims {
        n_x: nx.get(),
        n_w: nw.get(),
        n_u: nu.get(),
        n_z: nz.get(),
        n_y: ny.get(),
        n_v: nv.get(),
        n_r: nr.get(),
    };

    let mut ode = OdeParams::zero(dims);
    let rat_field = |slot: &mut RatMat, name: &str, raw: &Option<MatRaw>| -> Result<(), LoadError> {
        if let Some(m) = raw {
            *slot = parse_ratmat(name, m)?;
        }
        Ok(())
    };
    rat_field(&mut ode.a, "ode.A", &ode_raw.a)?;
    rat_field(&mut ode.b_xw, "ode.Bxw", &ode_raw.b_xw)?;
    rat_field(&mut ode.b_xu, "ode.Bxu", &ode_raw.b_xu)?;
    rat_field(&mut ode.b_xr, "ode.Bxr", &ode_raw.b_xr)?;
    rat_field(&mut ode.c_z, "ode.Cz", &ode_raw.c_z)?;
    rat_field(&mut ode.d_zw, "ode.Dzw", &ode_raw.d_zw)?;
    rat_field(&mut ode.d_zu, "ode.Dzu", &ode_raw.d_zu)?;
    rat_field(&mut ode.d_zr, "ode.Dzr", &ode_raw.d_zr)?;
    rat_field(&mut ode.c_y, "ode.Cy", &ode_raw.c_y)?;
    rat_field(&mut ode.d_yw, "ode.Dyw", &ode_raw.d_yw)?;
    rat_field(&mut ode.d_yu, "ode.Dyu", &ode_raw.d_yu)?;
    rat_field(&mut ode.d_yr, "ode.Dyr", &ode_raw.d_yr)?;
    rat_field(&mut ode.c_v, "ode.Cv", &ode_raw.c_v)?;
    rat_field(&mut ode.d_vw, "ode.Dvw", &ode_raw.d_vw)?;
    rat_field(&mut ode.d_vu, "ode.Dvu", &ode_raw.d_vu)?;

    let n_bc = bc_raw.b.as_ref().map_or(n.n_s(), Vec::len);
    let b = match &bc_raw.b {
        Some(m) => parse_ratmat("bc.B", m)?,
        None => RatMat::zeros(n_bc, n.n_b()),
    };
    let b_i = match &bc_raw.b_i {
        Some(m) => parse_polymat("bc.BI", m)?,
        None => PolyMat::zeros(n_bc, n.n_f()),
    };
    let b_v = match &bc_raw.b_v {
        Some(m) => parse_ratmat("bc.Bv", m)?,
        None => RatMat::zeros(n_bc, dims.n_v),
    };
    let bc = BcParams { b, b_i, b_v };

    let mut pde = PdeParams::zero(&n, dims.n_v, dims.n_r);
    let poly_field =
        |slot: &mut PolyMat, name: &str, raw: &Option<MatRaw>| -> Result<(), LoadError> {
            if let Some(m) = raw {
                *slot = parse_polymat(name, m)?;
            }
            Ok(())
        };
    poly_field(&mut pde.a0, "pde.A0", &pde_raw.a0)?;
    poly_field(&mut pde.a1, "pde.A1", &pde_raw.a1)?;
    poly_field(&mut pde.a2, "pde.A2", &pde_raw.a2)?;
    poly_field(&mut pde.b_xv, "pde.Bxv", &pde_raw.b_xv)?;
    poly_field(&mut pde.b_xb, "pde.Bxb", &pde_raw.b_xb)?;
    poly_field(&mut pde.c_r, "pde.Cr", &pde_raw.c_r)?;
    rat_field(&mut pde.d_rb, "pde.Drb", &pde_raw.d_rb)?;

    let model = GpdeModel {
        name: raw.name.unwrap_or_else(|| "model".into()),
        n,
        ode,
        bc,
        pde,
    };
    let diags = validate(&model);
    let (errors, warnings): (Vec<_>, Vec<_>) = diags
        .into_iter()
        .partition(|d| d.severity == Severity::Error);
    if !errors.is_empty() {
        return Err(LoadError::Validation(errors));
    }

    let (sim, signals) = match raw.sim {
        Some(s) => {
            let mut cfg = SimConfig::new(s.dt, s.tend, s.modes);
            cfg.output_stride = s.stride.unwrap_or(1);
            cfg.initial_ode = s.initial_ode.clone();
            for (i, src) in s.initial.iter().enumerate() {
                cfg.initial
                    .push(Expr::parse(src, "s").map_err(|e| LoadError::Field {
                        field: format!("sim.initial[{i}]"),
                        message: e.to_string(),
                    })?);
            }
            if let Some(fb) = &s.feedback {
                let mut kernels = Vec::new();
                for (i, row) in fb.gain_kernel.iter().enumerate() {
                    let mut out = Vec::new();
                    for (j, src) in row.iter().enumerate() {
                        out.push(Expr::parse(src, "s").map_err(|e| LoadError::Field {
                            field: format!("sim.feedback.gain_kernel[{i}][{j}]"),
                            message: e.to_string(),
                        })?);
                    }
                    kernels.push(out);
                }
                cfg.feedback = Some(Feedback {
                    gain_ode: fb.gain_ode.clone(),
                    gain_kernel: kernels,
                });
            }
            let mut signals = Signals::default();
            if let Some(sig) = &s.signals {
                for (list, out, name) in [
                    (&sig.w, &mut signals.w, "w"),
                    (&sig.u, &mut signals.u, "u"),
                ] {
                    for (i, raw_sig) in list.iter().enumerate() {
                        out.push(parse_signal(raw_sig, &format!("sim.signals.{name}[{i}]"))?);
                    }
                }
            }
            (Some(cfg), signals)
        }
        None => (None, Signals::default()),
    };

    Ok(LoadedModel {
        model,
        sim,
        signals,
        warnings,
    })
}

fn parse_signal(raw: &SignalRaw, field: &str) -> Result<SignalSpec, LoadError> {
    match (&raw.expr, &raw.ts) {
        (Some(src), None) => {
            let value = Expr::parse(src, "t").map_err(|e| LoadError::Field {
                field: field.into(),
                message: e.to_string(),
            })?;
            let derivative = raw
                .derivative
                .as_ref()
                .map(|d| Expr::parse(d, "t"))
                .transpose()
                .map_err(|e| LoadError::Field {
                    field: format!("{field}.derivative"),
                    message: e.to_string(),
                })?;
            Ok(SignalSpec::Expr { value, derivative })
        }
        (None, Some(ts)) => {
            let values = raw.values.clone().ok_or_else(|| LoadError::Field {
                field: field.into(),
                message: "sampled signal requires 'values'".into(),
            })?;
            if values.len() != ts.len() {
                return Err(LoadError::Field {
                    field: field.into(),
                    message: "'ts' and 'values' lengths differ".into(),
                });
            }
            Ok(SignalSpec::Series {
                ts: ts.clone(),
                values,
                derivatives: raw.derivatives.clone(),
            })
        }
        (None, None) => Ok(SignalSpec::Zero),
        (Some(_), Some(_)) => Err(LoadError::Field {
            field: field.into(),
            message: "give either 'expr' or a sampled series, not both".into(),
        }),
    }
}

/// Parses a model from JSON text.
pub fn load_model_str(text: &str) -> Result<LoadedModel, LoadError> {
    let v: Value = serde_json::from_str(text)?;
    load_model_value(&v)
}

/// Loads a model file from disk.
pub fn load_model_file(path: &std::path::Path) -> Result<LoadedModel, LoadError> {
    let text = std::fs::read_to_string(path)?;
    load_model_str(&text)
}

/// Writes a converted operator tuple as JSON.
pub fn save_pie(pie: &crate::converter::PieSystem, path: &std::path::Path) -> std::io::Result<()> {
    let doc = crate::converter::pie_to_value(pie);
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("serializable"))
}

/// The bundled example models. These ship as files under `models/` so they
/// can be inspected, diffed, and edited; the binary embeds the same text.
pub const BUILTIN_IDS: &[&str] = &[
    "entropy",
    "heat",
    "datko",
    "timoshenko",
    "reaction_diffusion",
    "chemical_reactor",
    "wave_sturm_liouville",
];

pub fn builtin_source(id: &str) -> Option<&'static str> {
    match id {
        "entropy" => Some(include_str!("../models/entropy.json")),
        "heat" => Some(include_str!("../models/heat.json")),
        "datko" => Some(include_str!("../models/datko.json")),
        "timoshenko" => Some(include_str!("../models/timoshenko.json")),
        "reaction_diffusion" => Some(include_str!("../models/reaction_diffusion.json")),
        "chemical_reactor" => Some(include_str!("../models/chemical_reactor.json")),
        "wave_sturm_liouville" => Some(include_str!("../models/wave_sturm_liouville.json")),
        _ => None,
    }
}

pub fn load_builtin(id: &str) -> Result<LoadedModel, LoadError> {
    let src = builtin_source(id).ok_or_else(|| LoadError::UnknownBuiltin(id.to_string()))?;
    load_model_str(src)
}

/// Verification thread cap from `PIE_FORGE_THREADS` (default: available
/// parallelism, at most 8).
pub fn thread_cap() -> usize {
    if let Ok(s) = std::env::var("PIE_FORGE_THREADS") {
        if let Ok(v) = s.parse::<usize>() {
            return v.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|v| v.get().min(8))
        .unwrap_or(1)
}

// ---------------------------------------------------------------------------
// Random admissible models for batch verification
// ---------------------------------------------------------------------------

/// Generates a seeded random admissible model: canonical left-boundary
/// selection plus random integer perturbations and a random integral term,
/// rejection-checked through the exact determinant.
pub fn random_admissible_model(seed: u64) -> GpdeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let order = rng.gen_range(1..=4usize);
        let mut counts: Vec<usize> = (0..=order).map(|_| rng.gen_range(0..=2usize)).collect();
        if counts[order] == 0 {
            counts[order] = rng.gen_range(1..=2usize);
        }
        if counts.iter().sum::<usize>() == 0 || counts.iter().sum::<usize>() > 4 {
            continue;
        }
        let n = ContinuityVector::new(counts, rint(0), rint(1));
        let n_s = n.n_s();
        if n_s == 0 || n_s > 6 {
            continue;
        }
        let n_v = rng.gen_range(0..=1usize);

        // Left-boundary selection keeps the admissibility matrix close to
        // the identity; small perturbations keep it generic.
        let mut b = RatMat::zeros(n_s, 2 * n_s);
        for i in 0..n_s {
            b[(i, i)] = rint(1);
            if rng.gen_bool(0.4) {
                let j = rng.gen_range(0..2 * n_s);
                b[(i, j)] = &b[(i, j)] + rint(rng.gen_range(-1..=1i64));
            }
        }
        let b_i = PolyMat::from_fn(n_s, n.n_f(), |_, _| {
            if rng.gen_bool(0.25) {
                Poly::from_terms(&[
                    (0, 0, rint(rng.gen_range(-1..=1i64))),
                    (rng.gen_range(0..=2usize), 0, rint(rng.gen_range(-1..=1i64))),
                ])
            } else {
                Poly::zero()
            }
        });
        let b_v = RatMat::from_fn(n_s, n_v, |_, _| rint(rng.gen_range(-1..=1i64)));
        let bc = BcParams { b, b_i, b_v };
        match crate::converter::check_admissible(&n, &bc) {
            Ok(adm) if adm.admissible => {
                let dims = SignalDims {
                    n_v,
                    ..Default::default()
                };
                let ode = OdeParams::zero(dims);
                let mut pde = PdeParams::zero(&n, n_v, 0);
                pde.a0 = PolyMat::from_fn(n.n_xhat(), n.n_f(), |_, _| {
                    if rng.gen_bool(0.3) {
                        Poly::from_terms(&[(rng.gen_range(0..=1usize), 0, rint(rng.gen_range(-2..=2i64)))])
                    } else {
                        Poly::zero()
                    }
                });
                return GpdeModel {
                    name: format!("random-{seed}"),
                    n,
                    ode,
                    bc,
                    pde,
                };
            }
            _ => continue,
        }
    }
}

// ---------------------------------------------------------------------------
// Reference-kernel comparisons
// ---------------------------------------------------------------------------

/// Comparison of computed operator parameters against reference-kernel
/// tables recorded for the bundled examples.
pub mod reference {
    use super::*;
    use crate::polyalg::parse_poly;
    use serde_json::json;

    /// One reference comparison: the formulas are authoritative; a
    /// mismatch documents a deviation of the recorded reference value.
    #[derive(Debug, Clone)]
    pub struct Deviation {
        pub example: String,
        pub object: String,
        pub computed: String,
        pub reference: String,
        pub matches: bool,
        pub note: String,
    }

    impl Deviation {
        pub fn to_value(&self) -> Value {
            json!({
                "example": self.example,
                "object": self.object,
                "computed": self.computed,
                "reference": self.reference,
                "matches": self.matches,
                "note": self.note,
            })
        }
    }

    fn fmt_polymat(m: &PolyMat) -> String {
        let rows: Vec<String> = (0..m.rows())
            .map(|i| {
                let cols: Vec<String> = (0..m.cols()).map(|j| m[(i, j)].to_string()).collect();
                format!("[{}]", cols.join(", "))
            })
            .collect();
        format!("[{}]", rows.join("; "))
    }

    fn parse_ref(rows: &[&[&str]]) -> PolyMat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        PolyMat::from_fn(r, c, |i, j| parse_poly(rows[i][j]).expect("reference entry"))
    }

    fn compare_mat(
        out: &mut Vec<Deviation>,
        example: &str,
        object: &str,
        computed: &PolyMat,
        reference_rows: &[&[&str]],
        note: &str,
    ) {
        let reference = parse_ref(reference_rows);
        let matches = *computed == reference;
        out.push(Deviation {
            example: example.to_string(),
            object: object.to_string(),
            computed: fmt_polymat(computed),
            reference: fmt_polymat(&reference),
            matches,
            note: note.to_string(),
        });
    }

    /// Builds the deviation report for a bundled example id.
    pub fn compare(model: &GpdeModel, id: &str) -> Vec<Deviation> {
        let conv = match convert_gpde(model) {
            Ok(c) => c,
            Err(_) => return Vec::new(),
        };
        compare_conversion(&conv, id)
    }

    pub fn compare_conversion(conv: &Conversion, id: &str) -> Vec<Deviation> {
        let mut out = Vec::new();
        let bundle = &conv.bundle;
        match id {
            "entropy" => {
                out.push(Deviation {
                    example: id.to_string(),
                    object: "n (continuity vector)".to_string(),
                    computed: "{0,0,1}: one order-2 state, n_S = 2, B is 2x4, B_I is 2x3"
                        .to_string(),
                    reference: "{0,0,2}: would give n_S = 4, requiring B 2x8 and B_I 2x6"
                        .to_string(),
                    matches: false,
                    note: "the recorded continuity vector {0,0,2} is inconsistent with the \
                           displayed 2x4 B and 2x3 B_I and with n_BC = n_S; the single-state \
                           reading {0,0,1} reproduces every displayed shape and the 2x2 B_T."
                        .to_string(),
                });
                compare_mat(
                    &mut out,
                    id,
                    "B_T",
                    &PolyMat::from_rat(&bundle.bt),
                    &[&["2", "1/2"], &["2", "3/2"]],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "B_Q",
                    &bundle.bq,
                    &[&["(1-s)*(s/4)"], &["-(1-s)"]],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "G2",
                    &bundle.g2,
                    &[&["3*s*(s-1)/4"]],
                    "recorded value depends on s only; it equals the formula kernel \
                     T1(s)*B_Q(th) evaluated on the diagonal th = s. The state round \
                     trip holds only for the formula kernel, so the recorded display \
                     is treated as a typo.",
                );
                compare_mat(
                    &mut out,
                    id,
                    "G1",
                    &bundle.g1,
                    &[&["s^2 + s/4 - th"]],
                    "recorded final kernel; fails the round-trip check (apply the map \
                     to the second derivative of a boundary-compatible profile and \
                     compare), so the formula kernel is kept.",
                );
            }
            "heat" => {
                compare_mat(
                    &mut out,
                    id,
                    "T.R1",
                    &bundle.g1,
                    &[&["-th"]],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "T.R2",
                    &bundle.g2,
                    &[&["-s"]],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "A.R0",
                    &conv.subsystem.a_hat.r.r0,
                    &[&["1"]],
                    "exact match expected",
                );
            }
            "datko" => {
                compare_mat(
                    &mut out,
                    id,
                    "B_T",
                    &PolyMat::from_rat(&bundle.bt),
                    &[
                        &["0", "0", "1", "0"],
                        &["1", "0", "0", "0"],
                        &["0", "1", "0", "0"],
                        &["0", "-1", "0", "1"],
                    ],
                    "exact match expected (mu = 1)",
                );
                compare_mat(
                    &mut out,
                    id,
                    "T.R1",
                    &bundle.g1,
                    &[
                        &["1", "0", "0"],
                        &["0", "0", "0"],
                        &["0", "-s*th", "-th"],
                    ],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "T.R2",
                    &bundle.g2,
                    &[
                        &["0", "0", "0"],
                        &["0", "-1", "0"],
                        &["0", "-s*th", "-s"],
                    ],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "T.Q2",
                    &conv.pie.t.q2,
                    &[&["0"], &["-1"], &["-s"]],
                    "recorded display carries a sign flip on the finite-state lift; \
                     the boundary condition zeta3(1) = K_t x forces the positive sign \
                     (cross-checked against the w-lift column, which the recorded \
                     display prints with the matching positive sign).",
                );
                compare_mat(
                    &mut out,
                    id,
                    "Tw.Q2",
                    &conv.pie.tw.q2,
                    &[&["0"], &["0"], &["s"]],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "A.R0",
                    &conv.subsystem.a_hat.r.r0,
                    &[
                        &["0", "0", "1"],
                        &["0", "1", "0"],
                        &["0", "0", "0"],
                    ],
                    "exact match expected (tau = 1)",
                );
                compare_mat(
                    &mut out,
                    id,
                    "A.R1",
                    &conv.subsystem.a_hat.r.r1,
                    &[
                        &["0", "0", "0"],
                        &["0", "0", "0"],
                        &["0", "0", "0"],
                    ],
                    "recorded display drops the Volterra block that reconstructs \
                     zeta2 from its derivative; the displacement equation needs it.",
                );
                compare_mat(
                    &mut out,
                    id,
                    "C1.Q1",
                    &conv.pie.c1.q1,
                    &[
                        &["0", "-s/2", "-s^2/2 - s"],
                        &["0", "0", "0"],
                    ],
                    "recorded display flips the sign of the quadratic term; the \
                     integral of the reconstructed displacement fixes +s^2/2 - s.",
                );
                compare_mat(
                    &mut out,
                    id,
                    "D11",
                    &PolyMat::from_rat(&conv.pie.d11.p),
                    &[&["1/2"], &["0"]],
                    "exact match expected",
                );
            }
            "timoshenko" => {
                // Recorded kernels built from
                // f0 = -s^3 th^3/39 + s^2 th^2 (3s - th - 2)/26.
                let f0 = "-(1/39)*s^3*th^3 + (s^2*th^2/26)*(3*s - th - 2)";
                let g1_ref = format!("{f0} + (th^2/6)*(3*s - th)");
                let g2_ref = format!("{f0} - (s^2/6)*(s + 3*th)");
                compare_mat(
                    &mut out,
                    id,
                    "T.R1[2][2]",
                    &bundle.g1.submatrix(2, 2, 1, 1),
                    &[&["s - th"]],
                    "exact match expected",
                );
                compare_mat(
                    &mut out,
                    id,
                    "T.R1[3][3]",
                    &bundle.g1.submatrix(3, 3, 1, 1),
                    &[&[&g1_ref]],
                    "recorded beam kernel for the displacement channel",
                );
                compare_mat(
                    &mut out,
                    id,
                    "T.R2[3][3]",
                    &bundle.g2.submatrix(3, 3, 1, 1),
                    &[&[&g2_ref]],
                    "recorded beam kernel for the displacement channel",
                );
            }
            "chemical_reactor" => {
                compare_mat(
                    &mut out,
                    id,
                    "T.R1",
                    &bundle.g1,
                    &[&["s"]],
                    "recorded display; the first-order reconstruction kernel must \
                     be the constant 1 (fundamental theorem of calculus), and only \
                     that kernel passes the quadrature application check.",
                );
                compare_mat(
                    &mut out,
                    id,
                    "A.R0",
                    &conv.subsystem.a_hat.r.r0,
                    &[&["-1"]],
                    "exact match expected (c = 1)",
                );
                compare_mat(
                    &mut out,
                    id,
                    "A.R1",
                    &conv.subsystem.a_hat.r.r1,
                    &[&["-1"]],
                    "exact match expected (zeta = 1)",
                );
                compare_mat(
                    &mut out,
                    id,
                    "C_r.Q1",
                    &conv.subsystem.c_r.q1,
                    &[&["1 - s"]],
                    "exact match expected (mu = 1)",
                );
            }
            _ => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::rat;

    #[test]
    fn builtin_models_load_and_validate() {
        for id in BUILTIN_IDS {
            let loaded = load_builtin(id).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert_eq!(&loaded.model.name, id);
            assert!(
                loaded.warnings.is_empty(),
                "{id} warnings: {:?}",
                loaded.warnings
            );
        }
    }

    #[test]
    fn entropy_file_produces_expected_shapes() {
        let loaded = load_builtin("entropy").unwrap();
        let m = &loaded.model;
        assert_eq!(m.n.n, vec![0, 0, 1]);
        assert_eq!(m.bc.b.rows(), 2);
        assert_eq!(m.bc.b.cols(), 4);
        assert_eq!(m.bc.b_i[(0, 0)].coeff(0, 0), rat(-1, 1));
        assert_eq!(m.pde.a0.cols(), 3);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = r#"{"domain": [0, 1], "n": [0, 1], "unknown_key": 3}"#;
        let err = load_model_str(text).unwrap_err();
        assert!(matches!(err, LoadError::Json(_)), "{err}");
    }

    #[test]
    fn conflicting_dims_are_rejected() {
        let text = r#"{
            "domain": [0, 1], "n": [0, 1],
            "ode": { "Cv": [[1]], "Dvw": [[1], [1]] },
            "bc": { "B": [[1, 0]] }
        }"#;
        let err = load_model_str(text).unwrap_err();
        assert!(matches!(err, LoadError::DimConflict { .. }), "{err}");
    }

    #[test]
    fn wrong_shape_is_a_validation_error() {
        let text = r#"{
            "domain": [0, 1], "n": [0, 1],
            "bc": { "B": [[1, 0]] },
            "pde": { "A0": [[1, 2, 3]] }
        }"#;
        let err = load_model_str(text).unwrap_err();
        assert!(matches!(err, LoadError::Validation(_)), "{err}");
    }

    #[test]
    fn random_models_are_admissible_and_fast() {
        for seed in 0..10u64 {
            let m = random_admissible_model(seed);
            let adm = crate::converter::check_admissible(&m.n, &m.bc).unwrap();
            assert!(adm.admissible, "seed {seed}");
        }
    }

    #[test]
    fn entropy_reference_comparison_flags_known_typos() {
        let loaded = load_builtin("entropy").unwrap();
        let devs = reference::compare(&loaded.model, "entropy");
        let by_name = |n: &str| devs.iter().find(|d| d.object == n).unwrap();
        assert!(by_name("B_T").matches);
        assert!(by_name("B_Q").matches);
        assert!(!by_name("G2").matches);
        assert!(!by_name("G1").matches);
    }

    #[test]
    fn coefficient_list_entries_are_accepted() {
        // Matrix entries may be numbers, expression strings, or coefficient
        // lists [[deg_s, deg_th, coeff], ...]; all three parse exactly.
        let text = r#"{
            "domain": [0, 1], "n": [0, 1],
            "bc": { "B": [[1, 0]], "BI": [[ [[0, 0, "-1"], [1, 0, "1/2"]], 0 ]] },
            "pde": { "A0": [["-1/2", -1]] }
        }"#;
        let loaded = load_model_str(text).unwrap();
        let p = &loaded.model.bc.b_i[(0, 0)];
        assert_eq!(p.coeff(0, 0), rat(-1, 1));
        assert_eq!(p.coeff(1, 0), rat(1, 2));
    }

    #[test]
    fn reactor_reference_comparison_resolves_reconstruction_kernel() {
        // The recorded first-order reconstruction kernel "s" is rejected in
        // favor of the constant 1; the dynamics kernels all match.
        let loaded = load_builtin("chemical_reactor").unwrap();
        let devs = reference::compare(&loaded.model, "chemical_reactor");
        let by_name = |n: &str| devs.iter().find(|d| d.object == n).unwrap();
        assert!(!by_name("T.R1").matches);
        assert!(by_name("A.R0").matches);
        assert!(by_name("A.R1").matches);
        assert!(by_name("C_r.Q1").matches);
    }
}
