//! JSON input: a weighted IFS or a Moran measure, with every number written
//! as an exact string literal.
//!
//! ```json
//! {"field": {"min_poly": [-1, 1, 1], "root_interval": ["3/5", "7/10"]},
//!  "maps": [{"r": ["0", "1"], "d": "0"}, {"r": ["0", "1"], "d": ["1", "-1"]}],
//!  "probs": ["1/2", "1/2"]}
//! ```
//! A field element is either a rational string or a list of rational strings
//! (coefficients of 1, t, t², … where t is the field generator).

use std::sync::Arc;

use num_bigint::BigInt;
use serde_json::Value;
use thiserror::Error;

use crate::field::{parse_rational, FieldElement, NumberField, Rational};
use crate::ifs::WeightedIfs;
use crate::measure::moran::{IndexRule, MoranMeasure};

#[derive(Clone, Debug)]
pub enum System {
    Ifs(WeightedIfs),
    Moran(MoranMeasure),
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("JSON syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("{path}: {msg}")]
    Field { path: String, msg: String },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("cannot read {0}: {1}")]
    Io(String, String),
}

fn field_err(path: &str, msg: impl Into<String>) -> SpecError {
    SpecError::Field { path: path.to_string(), msg: msg.into() }
}

fn literal(v: &Value, path: &str) -> Result<Rational, SpecError> {
    match v {
        Value::String(s) => parse_rational(s).map_err(|e| field_err(path, e)),
        Value::Number(n) if n.is_i64() || n.is_u64() => Ok(Rational::from_integer(n.to_string().parse::<BigInt>().unwrap())),
        Value::Number(n) => Err(field_err(path, format!("float literal {n} is not allowed; write an exact string like \"2/5\""))),
        _ => Err(field_err(path, "expected an exact rational string")),
    }
}

fn element(k: &Arc<NumberField>, v: &Value, path: &str) -> Result<FieldElement, SpecError> {
    match v {
        Value::Array(items) => {
            let coeffs = items.iter().enumerate().map(|(i, c)| literal(c, &format!("{path}[{i}]"))).collect::<Result<Vec<_>, _>>()?;
            FieldElement::from_coeffs(k, coeffs).map_err(|e| field_err(path, e.to_string()))
        }
        other => Ok(FieldElement::from_rational(k, literal(other, path)?)),
    }
}

fn pair(v: &Value, path: &str) -> Result<(Rational, Rational), SpecError> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([a, b]) => Ok((literal(a, &format!("{path}[0]"))?, literal(b, &format!("{path}[1]"))?)),
        _ => Err(field_err(path, "expected a pair of exact literals")),
    }
}

pub fn parse_spec(text: &str) -> Result<System, SpecError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| SpecError::Syntax { line: e.line(), column: e.column(), msg: e.to_string() })?;
    let obj = doc.as_object().ok_or_else(|| field_err("$", "expected a JSON object"))?;
    if let Some(m) = obj.get("moran") {
        return parse_moran(m).map(System::Moran);
    }
    let field = match obj.get("field") {
        None => NumberField::rationals(),
        Some(f) => {
            let poly = f
                .get("min_poly")
                .and_then(Value::as_array)
                .ok_or_else(|| field_err("field.min_poly", "expected a list of integers"))?
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let path = format!("field.min_poly[{i}]");
                    let q = literal(c, &path)?;
                    if !q.is_integer() {
                        return Err(field_err(&path, "coefficients must be integers"));
                    }
                    Ok(q.to_integer())
                })
                .collect::<Result<Vec<BigInt>, _>>()?;
            let (lo, hi) = pair(f.get("root_interval").unwrap_or(&Value::Null), "field.root_interval")?;
            NumberField::new(&poly, lo, hi).map_err(|e| field_err("field", e.to_string()))?
        }
    };
    let maps = obj.get("maps").and_then(Value::as_array).ok_or_else(|| field_err("maps", "expected a list of {r, d} objects"))?;
    let mut parsed = Vec::with_capacity(maps.len());
    for (i, m) in maps.iter().enumerate() {
        let r = element(&field, m.get("r").unwrap_or(&Value::Null), &format!("maps[{i}].r"))?;
        let d = element(&field, m.get("d").unwrap_or(&Value::Null), &format!("maps[{i}].d"))?;
        parsed.push((r, d));
    }
    let probs = obj
        .get("probs")
        .and_then(Value::as_array)
        .ok_or_else(|| field_err("probs", "expected a list of exact literals"))?
        .iter()
        .enumerate()
        .map(|(i, p)| literal(p, &format!("probs[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    WeightedIfs::new(parsed, probs).map(System::Ifs).map_err(|e| SpecError::Invalid(e.to_string()))
}

fn parse_moran(m: &Value) -> Result<MoranMeasure, SpecError> {
    let default = match m.get("default") {
        Some(v) => pair(v, "moran.default")?,
        None => (Rational::new(1.into(), 3.into()), Rational::new(2.into(), 3.into())),
    };
    let mut overrides = Vec::new();
    if let Some(list) = m.get("overrides") {
        let list = list.as_array().ok_or_else(|| field_err("moran.overrides", "expected a list"))?;
        for (i, o) in list.iter().enumerate() {
            let path = format!("moran.overrides[{i}]");
            let rule = match o.get("index_rule") {
                Some(Value::String(s)) if s == "powers_of_2" => IndexRule::PowersOf2,
                Some(Value::Array(v)) => IndexRule::Explicit(
                    v.iter()
                        .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| field_err(&format!("{path}.index_rule"), "expected level numbers")))
                        .collect::<Result<_, _>>()?,
                ),
                _ => return Err(field_err(&format!("{path}.index_rule"), "expected \"powers_of_2\" or a list of levels")),
            };
            overrides.push((rule, pair(o.get("pair").unwrap_or(&Value::Null), &format!("{path}.pair"))?));
        }
    }
    MoranMeasure::new(default, overrides).map_err(SpecError::Invalid)
}

pub fn load_spec(path: &std::path::Path) -> Result<System, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io(path.display().to_string(), e.to_string()))?;
    parse_spec(&text)
}
