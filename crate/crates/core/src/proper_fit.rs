//! End-to-end fitting: stage-1 density, robust moments, grid, shortest
//! path, decoding and renormalization.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::dp::{shortest_path, OracleWeights};
use crate::error::{Error, Result};
use crate::grid::FitGrid;
use crate::interval_error::tolerance;
use crate::nonproper::{learn_pwl, LearnerConfig};
use crate::pwfunc::{tv_distance, DomainKind, Piecewise, PiecewiseExpDensity, PiecewiseLinearDensity};
use crate::robust_stats::robust_location_scale;
use crate::scalar::Scalar;

/// Wall time per phase, in seconds. Not part of the reproducible record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub learn: f64,
    pub moments: f64,
    pub grid: f64,
    pub dp: f64,
    pub decode: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.learn + self.moments + self.grid + self.dp + self.decode
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// Integer domain with unit cells (small scale).
    pub unit_cells: bool,
    /// The support reaches the right end of the window.
    pub boundary_closure: bool,
    /// The empty hypothesis won; a narrow density at the median was returned.
    pub empty_fit: bool,
    /// A single finite level on ℝ was widened to one cell.
    pub widened: bool,
    /// Fewer samples than recommended.
    pub few_samples: bool,
    /// The robust scale hit its degenerate guard.
    pub scale_guarded: bool,
}

impl FitFlags {
    pub fn any_warning(&self) -> bool {
        self.empty_fit || self.few_samples || self.scale_guarded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub eps: f64,
    pub n: Option<usize>,
    pub domain: DomainKind,
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub cell_length: f64,
    pub levels: usize,
    pub slopes: usize,
    pub stage1_pieces: usize,
    pub dp_cost: f64,
    pub vertices: u64,
    pub edges: u64,
    pub visited: u64,
    pub weight_queries: u64,
    pub skipped_edges: u64,
    pub elementary_evals: u64,
    /// Mass of the decoded hypothesis before rescaling.
    pub normalization: f64,
    /// Mass of the stage-1 density outside the window.
    pub out_of_window: f64,
    pub tv_to_stage1: f64,
    /// `(dp_cost + k * tol + out_of_window + |Z - 1|) / 2`.
    pub tv_bound: f64,
    pub support: (f64, f64),
    pub flags: FitFlags,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

impl FitReport {
    /// The report with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self { timings: Timings::default(), ..self.clone() }
    }
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Projects the stage-1 density `g` onto the grid hypotheses and returns
/// the renormalized log-concave result.
pub fn fit_proper<T: Scalar>(
    g: &PiecewiseLinearDensity<T>,
    eps: f64,
    constants: &Constants,
) -> Result<(PiecewiseExpDensity<T>, FitReport)> {
    constants.validate()?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let mut timings = Timings::default();
    let mut warnings = Vec::new();
    let domain = g.domain();

    let t = Instant::now();
    let moments = robust_location_scale(g)?;
    timings.moments = seconds(t);
    if moments.guarded {
        warnings.push(format!("degenerate scale, using {}", moments.sigma));
    }

    let t = Instant::now();
    let grid = FitGrid::build(&moments, eps, domain, constants)?;
    timings.grid = seconds(t);

    let t = Instant::now();
    let mut weights = OracleWeights::new(g, &grid, moments.sigma, constants)?;
    let dp = shortest_path(&grid, &mut weights);
    timings.dp = seconds(t);

    let t = Instant::now();
    let mut flags = FitFlags { unit_cells: grid.unit_cells, scale_guarded: moments.guarded, ..FitFlags::default() };
    let h = match dp.levels.finite_span() {
        None => {
            flags.empty_fit = true;
            warnings.push("no level sequence beats the empty hypothesis; returning a narrow density".into());
            narrow_density(domain, moments.mu, grid.cell_length, grid.level_step, moments.sigma)?
        }
        Some((l, r)) => {
            let codes: Vec<i64> = dp.levels.codes[l..=r].iter().map(|c| c.expect("finite span")).collect();
            let (lo, codes) = if domain == DomainKind::Real && l == r {
                flags.widened = true;
                (if r < grid.k { l } else { l - 1 }, vec![codes[0], codes[0]])
            } else {
                (l, codes)
            };
            PiecewiseExpDensity::from_grid_levels(
                domain,
                T::lit(grid.alpha),
                T::lit(grid.cell_length),
                lo,
                &codes,
                grid.level_step,
                T::lit(moments.sigma),
            )?
        }
    };
    if !h.is_log_concave() {
        return Err(Error::InvalidDensity("decoded levels are not concave".into()));
    }
    flags.boundary_closure = dp.closed_at_boundary;
    let (a, b) = (T::lit(grid.alpha), T::lit(grid.beta));
    let out_of_window = (g.total_mass() - g.mass(a, b)).max(T::zero()).f64();
    let z = h.normalization().f64();
    let tv_hg = tv_distance(&h, g)?.f64();
    let tol = tolerance(eps, constants.c_tol);
    // The narrow and widened fallbacks are not the path's hypothesis: the
    // former gets the trivial bound, the latter pays for its added mass.
    let widened = if flags.widened { z } else { 0.0 };
    let tv_bound = if flags.empty_fit {
        1.0
    } else {
        (0.5 * (dp.cost.f64() + grid.k as f64 * tol + out_of_window + widened + (z - 1.0).abs())).min(1.0)
    };
    timings.decode = seconds(t);

    let report = FitReport {
        eps,
        n: None,
        domain,
        mu: moments.mu,
        sigma: moments.sigma,
        alpha: grid.alpha,
        beta: grid.beta,
        k: grid.k,
        cell_length: grid.cell_length,
        levels: grid.level_count(),
        slopes: grid.slope_count(),
        stage1_pieces: g.piece_count(),
        dp_cost: dp.cost.f64(),
        vertices: dp.stats.vertices,
        edges: dp.stats.edges,
        visited: dp.stats.visited,
        weight_queries: dp.stats.weight_queries,
        skipped_edges: dp.stats.skipped,
        elementary_evals: weights.elementary_evals(),
        normalization: z,
        out_of_window,
        tv_to_stage1: tv_hg,
        tv_bound,
        support: (h.support().0.f64(), h.support().1.f64()),
        flags,
        warnings,
        timings,
    };
    Ok((h, report))
}

/// A one-cell flat density at `mu` (one point on ℤ).
fn narrow_density<T: Scalar>(
    domain: DomainKind,
    mu: f64,
    width: f64,
    step: f64,
    scale: f64,
) -> Result<PiecewiseExpDensity<T>> {
    match domain {
        DomainKind::Integer => {
            PiecewiseExpDensity::from_grid_levels(domain, T::lit(mu.round()), T::one(), 0, &[0], step, T::lit(scale))
        }
        DomainKind::Real => PiecewiseExpDensity::from_grid_levels(
            domain,
            T::lit(mu - 0.5 * width),
            T::lit(width),
            0,
            &[0, 0],
            step,
            T::lit(scale),
        ),
    }
}

/// Recommended sample size `c_n * eps^(-5/2)`.
pub fn recommended_samples(eps: f64, constants: &Constants) -> usize {
    (constants.c_n * eps.powf(-2.5)).ceil() as usize
}

/// Samples to a log-concave density: the stage-1 learner followed by
/// [`fit_proper`].
pub fn learn_logconcave<T: Scalar>(
    samples: &[f64],
    eps: f64,
    domain: DomainKind,
    constants: &Constants,
) -> Result<(PiecewiseExpDensity<T>, FitReport)> {
    let t = Instant::now();
    let mut config = LearnerConfig::new(eps, constants)?;
    let n = samples.len();
    let mut warnings = Vec::new();
    if n < 2 * config.pieces {
        config.pieces = (n / 2).max(1);
        warnings.push(format!("only {n} samples, stage 1 reduced to {} pieces", config.pieces));
    }
    let few = n < recommended_samples(eps, constants);
    if few {
        warnings.push(format!("{n} samples, {} recommended", recommended_samples(eps, constants)));
    }
    let g: PiecewiseLinearDensity<T> = learn_pwl(samples, domain, &config)?;
    let learn = seconds(t);
    let (h, mut report) = fit_proper(&g, eps, constants)?;
    report.n = Some(n);
    report.timings.learn = learn;
    report.flags.few_samples = few;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    Ok((h, report))
}
