//! JSON forms for polynomials and matrices.
//!
//! A polynomial serializes either as its expression string or as a
//! coefficient list `[[deg_s, deg_th, "num/den"], ...]`. Both are accepted
//! on input; output uses the coefficient list for operator files and the
//! expression string in reports.

use super::{parse_poly, Poly, PolyMat, Rat, RatMat};
use num_traits::One;
use serde_json::{json, Value};

#[derive(Debug, Clone, thiserror::Error)]
pub enum DecodeError {
    #[error("expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("bad rational literal '{0}'")]
    BadRational(String),
    #[error("bad polynomial: {0}")]
    BadPoly(String),
}

pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_from_str(s: &str) -> Result<Rat, DecodeError> {
    let s = s.trim();
    // Accept "num", "num/den", and decimal literals through the parser.
    if let Ok(p) = parse_poly(s) {
        if p.is_constant_scalar() {
            return Ok(p.coeff(0, 0));
        }
    }
    Err(DecodeError::BadRational(s.to_string()))
}

impl Poly {
    fn is_constant_scalar(&self) -> bool {
        self.deg_s().unwrap_or(0) == 0 && self.deg_th().unwrap_or(0) == 0
    }
}

/// Exact rational from a JSON number or string.
pub fn rat_from_value(v: &Value) -> Result<Rat, DecodeError> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Rat::from_integer(i.into()))
            } else {
                // Rendered form of a JSON float is a decimal literal; the
                // polynomial parser converts it exactly.
                rat_from_str(&n.to_string())
            }
        }
        Value::String(s) => rat_from_str(s),
        other => Err(DecodeError::Shape {
            expected: "number or rational string".into(),
            got: other.to_string(),
        }),
    }
}

pub fn poly_to_coeff_list(p: &Poly) -> Value {
    let terms: Vec<Value> = p
        .terms()
        .map(|(i, j, c)| json!([i, j, rat_to_string(c)]))
        .collect();
    Value::Array(terms)
}

/// Polynomial from an expression string, a JSON number, or a coefficient
/// list `[[i, j, "c"], ...]`.
pub fn poly_from_value(v: &Value) -> Result<Poly, DecodeError> {
    match v {
        Value::String(s) => parse_poly(s).map_err(|e| DecodeError::BadPoly(e.to_string())),
        Value::Number(_) => Ok(Poly::constant(rat_from_value(v)?)),
        Value::Array(terms) => {
            let mut acc = Poly::zero();
            for t in terms {
                let triple = t.as_array().ok_or_else(|| DecodeError::Shape {
                    expected: "[deg_s, deg_th, coeff] triple".into(),
                    got: t.to_string(),
                })?;
                if triple.len() != 3 {
                    return Err(DecodeError::Shape {
                        expected: "[deg_s, deg_th, coeff] triple".into(),
                        got: t.to_string(),
                    });
                }
                let i = triple[0].as_u64().ok_or_else(|| DecodeError::Shape {
                    expected: "nonnegative degree".into(),
                    got: triple[0].to_string(),
                })? as usize;
                let j = triple[1].as_u64().ok_or_else(|| DecodeError::Shape {
                    expected: "nonnegative degree".into(),
                    got: triple[1].to_string(),
                })? as usize;
                let c = rat_from_value(&triple[2])?;
                acc = acc.add(&Poly::monomial(i, j, c));
            }
            Ok(acc)
        }
        other => Err(DecodeError::Shape {
            expected: "polynomial string, number, or coefficient list".into(),
            got: other.to_string(),
        }),
    }
}

pub fn polymat_to_value(m: &PolyMat) -> Value {
    let rows: Vec<Value> = (0..m.rows())
        .map(|i| {
            let row: Vec<Value> = (0..m.cols())
                .map(|j| poly_to_coeff_list(&m[(i, j)]))
                .collect();
            Value::Array(row)
        })
        .collect();
    json!({ "rows": m.rows(), "cols": m.cols(), "entries": rows })
}

pub fn polymat_from_value(v: &Value) -> Result<PolyMat, DecodeError> {
    let obj = v.as_object().ok_or_else(|| DecodeError::Shape {
        expected: "{rows, cols, entries}".into(),
        got: v.to_string(),
    })?;
    let rows = obj
        .get("rows")
        .and_then(Value::as_u64)
        .ok_or_else(|| DecodeError::Shape {
            expected: "rows".into(),
            got: v.to_string(),
        })? as usize;
    let cols = obj
        .get("cols")
        .and_then(Value::as_u64)
        .ok_or_else(|| DecodeError::Shape {
            expected: "cols".into(),
            got: v.to_string(),
        })? as usize;
    let entries = obj
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| DecodeError::Shape {
            expected: "entries".into(),
            got: v.to_string(),
        })?;
    if entries.len() != rows {
        return Err(DecodeError::Shape {
            expected: format!("{rows} rows"),
            got: format!("{} rows", entries.len()),
        });
    }
    let mut grid = Vec::with_capacity(rows);
    for row in entries {
        let row = row.as_array().ok_or_else(|| DecodeError::Shape {
            expected: "entry row".into(),
            got: row.to_string(),
        })?;
        if row.len() != cols {
            return Err(DecodeError::Shape {
                expected: format!("{cols} columns"),
                got: format!("{} columns", row.len()),
            });
        }
        let mut prow = Vec::with_capacity(cols);
        for e in row {
            prow.push(poly_from_value(e)?);
        }
        grid.push(prow);
    }
    Ok(PolyMat::from_fn(rows, cols, |i, j| grid[i][j].clone()))
}

pub fn ratmat_to_value(m: &RatMat) -> Value {
    let rows: Vec<Value> = (0..m.rows())
        .map(|i| {
            let row: Vec<Value> = (0..m.cols())
                .map(|j| Value::String(rat_to_string(&m[(i, j)])))
                .collect();
            Value::Array(row)
        })
        .collect();
    json!({ "rows": m.rows(), "cols": m.cols(), "entries": rows })
}

pub fn ratmat_from_value(v: &Value) -> Result<RatMat, DecodeError> {
    let pm = polymat_from_value(v)?;
    pm.to_rat().ok_or_else(|| DecodeError::Shape {
        expected: "constant matrix".into(),
        got: "polynomial entries".into(),
    })
}
