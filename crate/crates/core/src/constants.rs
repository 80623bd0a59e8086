//! The constants ledger: every implicit Θ(·)/O(·) constant used by the
//! fitting pipeline, loadable from a flat `key = value` text file.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How cell errors are attributed to lattice points on ℤ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteAccounting {
    /// Cells are `[x_i, x_{i+1} - 1]`, the last one closed. Each lattice
    /// point is charged exactly once.
    #[default]
    LeftClosed,
    /// Cells are closed on both sides and interior endpoints are charged
    /// twice.
    DoubleCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Stage-1 piece count multiplier: `t = ceil(c_t / sqrt(eps))`.
    pub c_t: f64,
    /// Sample complexity multiplier used for warnings.
    pub c_n: f64,
    /// Window half-width in units of `sigma~`: `ceil(c_i * ln(1/eps))`.
    pub c_i: f64,
    /// Cell count multiplier: `k >= c_k * ln(1/eps) / eps`.
    pub c_k: f64,
    /// Lowest level is `-c_lo * ln(1/eps)`.
    pub c_lo: f64,
    /// Highest level.
    pub c_hi: f64,
    /// Slope exponent range: `0 <= c <= ceil(c_slope * log2(1/eps))`.
    pub c_slope: f64,
    /// Discrete small-scale branch threshold: `sigma~ <= c_disc / eps`.
    pub c_disc: f64,
    /// Cell error tolerance multiplier: `c_tol * eps^2 / ln(1/eps)`.
    pub c_tol: f64,
    /// Crossing localization: bracket width `c_bis * eps * L / ln(1/eps)`.
    pub c_bis: f64,
    /// Smallest standard deviation for which the discrete lower bound on the
    /// mode height is asserted.
    pub disc_sigma_min: f64,
    /// Tail distance multiplier for the tail-mass check.
    pub c_tail: f64,
    /// Cap on partition intervals per monotone half: `c_m * ln(1/eps) + 4`.
    pub c_m: f64,
    /// Linearization runs at `eps / c_lin`.
    pub c_lin: f64,
    pub accounting: DiscreteAccounting,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c_t: 4.0,
            c_n: 1.0,
            c_i: 1.0,
            c_k: 1.0,
            c_lo: 2.0,
            c_hi: 2.0,
            c_slope: 2.0,
            c_disc: 1.0,
            c_tol: 1.0,
            c_bis: 1.0,
            disc_sigma_min: 4.0,
            c_tail: 1.0,
            c_m: 4.0,
            c_lin: 2.0,
            accounting: DiscreteAccounting::LeftClosed,
        }
    }
}

const KEYS: &[&str] = &[
    "c_t",
    "c_n",
    "c_i",
    "c_k",
    "c_lo",
    "c_hi",
    "c_slope",
    "c_disc",
    "c_tol",
    "c_bis",
    "disc_sigma_min",
    "c_tail",
    "c_m",
    "c_lin",
    "accounting",
];

impl Constants {
    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "c_t" => &mut self.c_t,
            "c_n" => &mut self.c_n,
            "c_i" => &mut self.c_i,
            "c_k" => &mut self.c_k,
            "c_lo" => &mut self.c_lo,
            "c_hi" => &mut self.c_hi,
            "c_slope" => &mut self.c_slope,
            "c_disc" => &mut self.c_disc,
            "c_tol" => &mut self.c_tol,
            "c_bis" => &mut self.c_bis,
            "disc_sigma_min" => &mut self.disc_sigma_min,
            "c_tail" => &mut self.c_tail,
            "c_m" => &mut self.c_m,
            "c_lin" => &mut self.c_lin,
            _ => return None,
        })
    }

    /// Overrides defaults with the `key = value` lines of `text`.
    /// Blank lines and `#` comments are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "accounting" {
                out.accounting = match value {
                    "left_closed" => DiscreteAccounting::LeftClosed,
                    "double_count" => DiscreteAccounting::DoubleCount,
                    other => return Err(Error::Parse(format!("line {}: unknown accounting {other}", lineno + 1))),
                };
                continue;
            }
            let slot = out.slot(key).ok_or_else(|| Error::Parse(format!("line {}: unknown key {key}", lineno + 1)))?;
            *slot = f64::from_str(value).map_err(|e| Error::Parse(format!("line {}: {key}: {e}", lineno + 1)))?;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_t", self.c_t),
            ("c_i", self.c_i),
            ("c_k", self.c_k),
            ("c_lo", self.c_lo),
            ("c_slope", self.c_slope),
            ("c_disc", self.c_disc),
            ("c_tol", self.c_tol),
            ("c_bis", self.c_bis),
            ("c_tail", self.c_tail),
            ("c_m", self.c_m),
            ("c_lin", self.c_lin),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c_hi.is_finite() && self.c_hi >= 0.0) || !(self.c_n >= 0.0) {
            return Err(Error::InvalidParameter("c_hi and c_n must be non-negative".into()));
        }
        Ok(())
    }

    /// Serializes to the ledger text format; `parse` reads it back exactly.
    pub fn to_ledger(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for key in KEYS {
            if *key == "accounting" {
                let v = match self.accounting {
                    DiscreteAccounting::LeftClosed => "left_closed",
                    DiscreteAccounting::DoubleCount => "double_count",
                };
                let _ = writeln!(out, "accounting = {v}");
            } else {
                let v = *copy.slot(key).expect("known key");
                let _ = writeln!(out, "{key} = {v:?}");
            }
        }
        out
    }
}
