//! Serialization helpers shared by every report. Exact values are written as
//! strings and floats as JSON numbers, so a reader can tell them apart.

use serde::Serializer;

use crate::field::{FieldElement, Rational};

/// Header placed at the top of every report bundle.
pub const CLAIMS_HEADER: &str = "\
claims discipline:
  exact      values computed in exact rational / number-field arithmetic
  certified  rigorous lower/upper bounds from the measure oracle at the stated depth
  trend      finite-depth evidence about a limit; never a proof of the limit";

/// Shortest round-trip decimal; non-finite values as words.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn ser_rational<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

pub fn ser_rationals<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|q| q.to_string()))
}

pub fn ser_opt_rational<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match q {
        Some(q) => s.serialize_some(&q.to_string()),
        None => s.serialize_none(),
    }
}

pub fn ser_field<S: Serializer>(x: &FieldElement, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Finite floats as JSON numbers, the rest as strings (JSON has no infinity).
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&fmt_f64(*x))
    }
}

pub fn ser_f64s<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if x.is_finite() {
            seq.serialize_element(x)?;
        } else {
            seq.serialize_element(&fmt_f64(*x))?;
        }
    }
    seq.end()
}
