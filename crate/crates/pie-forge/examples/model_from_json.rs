//! Declaring a model as a JSON document and driving the whole pipeline
//! from it: parse, validate, check admissibility, convert, and export the
//! operator tuple.
//!
//! ```bash
//! cargo run -p pie-forge --example model_from_json
//! ```

use pie_forge::converter::{check_admissible, convert_gpde, pie_to_value};
use pie_forge::models::load_model_str;

const MODEL: &str = r#"{
  "name": "damped-transport",
  "description": "transport with decay: x_t = -x_s - x/2, inflow x(0) = 0",
  "domain": [0, 1],
  "n": [0, 1],
  "bc": {
    "B": [[1, 0]]
  },
  "pde": {
    "A0": [["-1/2", "-1"]]
  }
}"#;

fn main() {
    let loaded = load_model_str(MODEL).unwrap();
    println!("loaded '{}' with n = {:?}", loaded.model.name, loaded.model.n.n);
    for w in &loaded.warnings {
        println!("warning: {}: {}", w.field, w.message);
    }

    let adm = check_admissible(&loaded.model.n, &loaded.model.bc).unwrap();
    println!("det(B_T) = {}, admissible: {}", adm.det, adm.admissible);

    let conv = convert_gpde(&loaded.model).unwrap();
    println!("\nsystem operators:");
    println!("  T.R1 = {:?}", conv.pie.t.r.r1);
    println!("  A.R0 = {:?}", conv.pie.a.r.r0);
    println!("  A.R1 = {:?}", conv.pie.a.r.r1);

    let doc = pie_to_value(&conv.pie);
    let text = serde_json::to_string(&doc).unwrap();
    println!("\nserialized operator tuple: {} bytes of JSON", text.len());
    let back = pie_forge::converter::pie_from_value(&doc).unwrap();
    println!("reloads identically: {}", back.a == conv.pie.a && back.t == conv.pie.t);
}
