//! JSON density files.
//!
//! ```json
//! {"domain": "real", "kind": "pwl", "breakpoints": [0, 1], "pieces": [[0, 1]]}
//! {"domain": "integer", "kind": "pwexp", "breakpoints": [3, 4], "log_levels": [0, -0.5], "scale": 1.5}
//! ```
//!
//! Finite values round-trip bit-exactly; −∞ is written as `"neg_inf"`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{AnyDensity, DomainKind, IntegerCodedLevels, PiecewiseExpDensity, PiecewiseLinearDensity};

#[cfg(test)]
const NEG_INF: &str = "neg_inf";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Value {
    Num(f64),
    Tag(Tag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Tag {
    NegInf,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            Value::Tag(Tag::NegInf)
        } else {
            Value::Num(x)
        }
    }
}

impl From<Value> for f64 {
    fn from(v: Value) -> f64 {
        match v {
            Value::Num(x) => x,
            Value::Tag(Tag::NegInf) => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Pwl,
    Pwexp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DensityFile {
    domain: DomainKind,
    kind: Kind,
    breakpoints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pieces: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_levels: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    /// Integer level codes and their unit, kept for exact concavity checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level_codes: Option<Vec<Option<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level_step: Option<f64>,
}

fn to_f64s<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.f64()).collect()
}

fn from_f64s<T: Scalar>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::lit(x)).collect()
}

pub fn to_json<T: Scalar>(density: &AnyDensity<T>) -> String {
    let file = match density {
        AnyDensity::Linear(d) => DensityFile {
            domain: d.domain(),
            kind: Kind::Pwl,
            breakpoints: to_f64s(d.breakpoints()),
            pieces: Some(d.pieces().iter().map(|(a, b)| [a.f64(), b.f64()]).collect()),
            log_levels: None,
            scale: None,
            level_codes: None,
            level_step: None,
        },
        AnyDensity::Exp(d) => DensityFile {
            domain: d.domain(),
            kind: Kind::Pwexp,
            breakpoints: to_f64s(d.breakpoints()),
            pieces: None,
            log_levels: Some(d.log_levels().iter().map(|a| Value::from(a.f64())).collect()),
            scale: Some(d.scale().f64()),
            level_codes: d.codes().map(|c| c.codes.clone()),
            level_step: d.codes().map(|c| c.step),
        },
    };
    serde_json::to_string_pretty(&file).expect("density file serializes")
}

pub fn from_json<T: Scalar>(text: &str) -> Result<AnyDensity<T>> {
    let file: DensityFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let breakpoints = from_f64s(&file.breakpoints);
    match file.kind {
        Kind::Pwl => {
            let pieces = file
                .pieces
                .ok_or_else(|| Error::Parse("pwl density without pieces".into()))?
                .iter()
                .map(|[a, b]| (T::lit(*a), T::lit(*b)))
                .collect();
            Ok(AnyDensity::Linear(PiecewiseLinearDensity::new(file.domain, breakpoints, pieces)?))
        }
        Kind::Pwexp => {
            let levels: Vec<f64> = file
                .log_levels
                .ok_or_else(|| Error::Parse("pwexp density without log_levels".into()))?
                .into_iter()
                .map(f64::from)
                .collect();
            if levels.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidDensity("infinite log-level inside the support".into()));
            }
            let scale = file.scale.ok_or_else(|| Error::Parse("pwexp density without scale".into()))?;
            let d = PiecewiseExpDensity::from_parts(file.domain, breakpoints, from_f64s(&levels), T::lit(scale))?;
            let d = match (file.level_codes, file.level_step) {
                (Some(codes), Some(step)) => d.with_codes(IntegerCodedLevels::new(codes, step))?,
                (None, None) => d,
                _ => return Err(Error::Parse("level_codes and level_step go together".into())),
            };
            Ok(AnyDensity::Exp(d))
        }
    }
}
