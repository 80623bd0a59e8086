//! Benchmark scenarios: every combination of target, epsilon, sample size
//! and seed is fitted once and reported as one CSV row.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::families::{tv_to_reference, Contaminated};
use crate::proper_fit::learn_logconcave;
use crate::pwfunc::PiecewiseExpDensity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Target specs such as `gaussian:0,1` or `gaussian:0,1+0.1*uniform:-10,10`.
    /// Distances are measured to the uncontaminated base.
    pub families: Vec<String>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))
    }

    pub fn len(&self) -> usize {
        self.families.len() * self.eps.len() * self.n.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub family: String,
    pub eps: f64,
    pub n: usize,
    pub seed: u64,
    pub tv: Option<f64>,
    /// Seconds; left empty when timings are switched off.
    pub wall_time: Option<f64>,
    #[serde(rename = "V")]
    pub vertices: Option<u64>,
    #[serde(rename = "E")]
    pub edges: Option<u64>,
    /// `ok`, `warn` or `error: <message>`.
    pub status: String,
}

/// Fits one configuration.
pub fn run_one(target: &Contaminated, eps: f64, n: usize, seed: u64, constants: &Constants) -> BenchRow {
    let mut row = BenchRow {
        family: target.to_string(),
        eps,
        n,
        seed,
        tv: None,
        wall_time: None,
        vertices: None,
        edges: None,
        status: String::new(),
    };
    let samples = target.sample(n, seed);
    let t = Instant::now();
    let fit = learn_logconcave::<f64>(&samples, eps, target.domain(), constants);
    row.wall_time = Some(t.elapsed().as_secs_f64());
    let outcome = fit.and_then(|(h, report): (PiecewiseExpDensity<f64>, _)| {
        row.vertices = Some(report.vertices);
        row.edges = Some(report.edges);
        let tv = tv_to_reference(&h, &target.base)?;
        Ok((tv, report.flags.any_warning()))
    });
    match outcome {
        Ok((tv, warn)) => {
            row.tv = Some(tv);
            row.status = if warn { "warn" } else { "ok" }.into();
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Runs the scenario in canonical order (families, then eps, n, seeds).
/// Without `timings` the output depends only on the scenario and constants.
pub fn run_scenario(scenario: &Scenario, constants: &Constants, timings: bool) -> Result<Vec<BenchRow>> {
    let targets: Vec<Contaminated> = scenario.families.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(scenario.len());
    for target in &targets {
        for &eps in &scenario.eps {
            for &n in &scenario.n {
                for &seed in &scenario.seeds {
                    let mut row = run_one(target, eps, n, seed, constants);
                    if !timings {
                        row.wall_time = None;
                    }
                    log::info!("{} eps={eps} n={n} seed={seed}: {}", row.family, row.status);
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv: {e}")))
}

pub fn read_csv(text: &str) -> Result<Vec<BenchRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::Parse(format!("csv: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        Scenario::parse(
            r#"{"families": ["gaussian:0,1", "poisson:20"], "eps": [0.2, 0.3], "n": [200, 400], "seeds": [1, 2, 3]}"#,
        )
        .unwrap()
    }

    #[test]
    fn row_count_and_order() {
        let s = small();
        assert_eq!(s.len(), 24);
        let rows = run_scenario(&s, &Constants::default(), false).unwrap();
        assert_eq!(rows.len(), 24);
        assert_eq!((rows[0].family.as_str(), rows[0].seed), ("gaussian:0,1", 1));
        assert_eq!((rows[23].family.as_str(), rows[23].eps, rows[23].n), ("poisson:20", 0.3, 400));
        assert!(rows.iter().all(|r| r.tv.is_some_and(|t| (0.0..=1.0).contains(&t))));
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let s =
            Scenario::parse(r#"{"families": ["laplace:0,1+0.1*point:5"], "eps": [0.25], "n": [300], "seeds": [7, 8]}"#)
                .unwrap();
        let a = write_csv(&run_scenario(&s, &Constants::default(), false).unwrap()).unwrap();
        let b = write_csv(&run_scenario(&s, &Constants::default(), false).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("family,eps,n,seed,tv,wall_time,V,E,status\n"));
        assert_eq!(write_csv(&read_csv(&a).unwrap()).unwrap(), a);
    }

    #[test]
    fn failures_are_rows() {
        let s = Scenario::parse(r#"{"families": ["gaussian:0,1"], "eps": [0.7], "n": [100], "seeds": [1]}"#).unwrap();
        let rows = run_scenario(&s, &Constants::default(), true).unwrap();
        assert!(rows[0].status.starts_with("error"));
        assert!(rows[0].tv.is_none());
    }

    #[test]
    fn unknown_family_is_rejected() {
        let s = Scenario::parse(r#"{"families": ["cauchy:0,1"], "eps": [0.1], "n": [100], "seeds": [1]}"#).unwrap();
        assert!(run_scenario(&s, &Constants::default(), true).is_err());
    }
}
