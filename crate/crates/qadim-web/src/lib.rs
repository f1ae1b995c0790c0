//! Browser bindings. Each export takes a preset name or a JSON system spec
//! and returns a JSON string; errors come back as a JS string exception.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qadim::dims::qn::{q_sequence_graph, q_sequence_tree, qa_upper_bound};
use qadim::dims::{endpoint_dims, local_dim};
use qadim::field::{parse_decimal, FieldElement, Rational};
use qadim::finite_type::{detect_finite_type, FiniteTypeVerdict};
use qadim::ifs::WeightedIfs;
use qadim::net::NetTree;
use qadim::presets;
use qadim::spec::{parse_spec, System};

const WORD_BUDGET: usize = 200_000;
const STATE_BUDGET: usize = 20_000;
pub const MAX_NET_DEPTH: usize = 8;
pub const MAX_DIM_DEPTH: usize = 24;
const GRAPH_LEVELS: usize = 10;

fn load(system: &str) -> Result<(WeightedIfs, Option<String>), String> {
    let trimmed = system.trim();
    let parsed = if trimmed.starts_with('{') {
        parse_spec(trimmed).map_err(|e| e.to_string())?
    } else {
        presets::by_name(trimmed).ok_or_else(|| format!("unknown preset {trimmed:?}"))?
    };
    match parsed {
        System::Ifs(ifs) => Ok((ifs, (!trimmed.starts_with('{')).then(|| trimmed.to_string()))),
        System::Moran(_) => Err("Moran measures are not supported in the demo; use the CLI".into()),
    }
}

fn check_depth(depth: usize, max: usize) -> Result<(), String> {
    if (1..=max).contains(&depth) {
        Ok(())
    } else {
        Err(format!("depth must be between 1 and {max}"))
    }
}

/// Net intervals of levels 0..=depth as floats for drawing, with exact Pₙ.
pub fn net_levels_json(system: &str, depth: usize) -> Result<String, String> {
    check_depth(depth, MAX_NET_DEPTH)?;
    let (ifs, _) = load(system)?;
    let tree = NetTree::build(&ifs, depth, WORD_BUDGET).map_err(|e| e.to_string())?;
    let levels: Vec<Value> = (0..=depth)
        .map(|n| {
            tree.level(n)
                .iter()
                .map(|iv| {
                    let p = iv.p_n();
                    json!({
                        "left": iv.left.to_f64(),
                        "right": iv.right.to_f64(),
                        "left_exact": iv.left.to_string(),
                        "right_exact": iv.right.to_string(),
                        "p_n": p.to_string(),
                        "p_n_float": qadim::field::rational_to_f64(&p),
                        "maps": iv.neighbors.len(),
                    })
                })
                .collect()
        })
        .collect();
    Ok(json!({ "depth": depth, "levels": levels }).to_string())
}

/// Endpoint dimensions, the local dimension at `x` and the Qₙ upper bound.
pub fn dimensions_json(system: &str, x: &str, depth: usize) -> Result<String, String> {
    check_depth(depth, MAX_DIM_DEPTH)?;
    let (ifs, _) = load(system)?;
    let xr = parse_decimal(x)?;
    if xr < Rational::from_integer(0.into()) || xr > Rational::from_integer(1.into()) {
        return Err("x must lie in [0, 1]".into());
    }
    let e = endpoint_dims(&ifs, depth);
    let l = local_dim(&ifs, &FieldElement::from_rational(ifs.field(), xr), depth, WORD_BUDGET).map_err(|e| e.to_string())?;
    let (qseq, mode) = match detect_finite_type(&ifs, GRAPH_LEVELS, STATE_BUDGET) {
        FiniteTypeVerdict::Closed(g) => (q_sequence_graph(&g, depth, STATE_BUDGET), "graph"),
        _ => {
            let d = depth.min(MAX_NET_DEPTH);
            let tree = NetTree::build(&ifs, d, WORD_BUDGET).map_err(|e| e.to_string())?;
            (q_sequence_tree(&tree, d), "tree")
        }
    };
    let qa = qa_upper_bound(&qseq, ifs.lambda());
    Ok(json!({
        "endpoint": e,
        "local": l,
        "q_mode": mode,
        "q": qseq,
        "qa_upper": qa,
    })
    .to_string())
}

/// Transition graph with signatures, or the reason it did not close.
pub fn finite_type_json(system: &str) -> Result<String, String> {
    let (ifs, preset) = load(system)?;
    match detect_finite_type(&ifs, GRAPH_LEVELS, STATE_BUDGET) {
        FiniteTypeVerdict::Closed(g) => {
            let g = if preset.as_deref() == Some("notfull") { g.with_aliases(&presets::notfull_aliases()) } else { g };
            let mut v = g.to_json();
            v["signatures"] = (0..g.len()).map(|i| json!({ "vertex": g.label(i), "children": g.signature_labels(i) })).collect();
            v["closed"] = json!(true);
            Ok(v.to_string())
        }
        FiniteTypeVerdict::NotClosed(nc) => Ok(json!({ "closed": false, "levels_explored": nc.levels_explored, "growth": nc.growth, "reason": nc.reason }).to_string()),
    }
}

#[wasm_bindgen]
pub fn presets_list() -> String {
    json!(presets::NAMES.iter().filter(|n| **n != "cantor-strictex").collect::<Vec<_>>()).to_string()
}

#[wasm_bindgen]
pub fn net_levels(system: &str, depth: usize) -> Result<String, JsValue> {
    net_levels_json(system, depth).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn dimensions(system: &str, x: &str, depth: usize) -> Result<String, JsValue> {
    dimensions_json(system, x, depth).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn finite_type(system: &str) -> Result<String, JsValue> {
    finite_type_json(system).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn thirds_local_dimension_at_half() {
        let v = parse(&dimensions_json("thirds-255", "0.5", 12).unwrap());
        let want = 5f64.ln() / 3f64.ln();
        assert!((v["local"]["upper"].as_f64().unwrap() - want).abs() < 1e-12);
        assert_eq!(v["q_mode"], "graph");
    }

    #[test]
    fn net_levels_partition_the_unit_interval() {
        let v = parse(&net_levels_json("osc", 4).unwrap());
        let last = v["levels"][4].as_array().unwrap();
        assert_eq!(last.len(), 16);
        assert_eq!(last[0]["left_exact"], "0");
        assert_eq!(last[15]["right_exact"], "1");
    }

    #[test]
    fn notfull_graph_carries_signatures() {
        let v = parse(&finite_type_json("notfull").unwrap());
        assert_eq!(v["closed"], true);
        let sig = v["signatures"].as_array().unwrap().iter().find(|s| s["vertex"] == "3").unwrap();
        assert_eq!(sig["children"], json!(["3a", "3b", "4", "2", "3c"]));
    }

    #[test]
    fn spec_text_and_bad_input() {
        let spec = r#"{"maps": [{"r": "1/2", "d": "0"}, {"r": "1/2", "d": "1/2"}], "probs": ["1/2", "1/2"]}"#;
        assert!(net_levels_json(spec, 3).is_ok());
        assert!(net_levels_json("osc", 0).is_err());
        assert!(net_levels_json("osc", MAX_NET_DEPTH + 1).is_err());
        assert!(dimensions_json("osc", "1.5", 4).is_err());
        assert!(finite_type_json("cantor-strictex").is_err());
        assert!(finite_type_json("nope").is_err());
    }
}
