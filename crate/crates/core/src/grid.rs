//! Fitting window, grid endpoints, the level set `S` and the slope set `T`.
//!
//! Levels and slopes are integer codes in units of `level_step = eps / k`:
//! level code `m` stands for `m * level_step`, slope code `d` for a level
//! difference of `d * level_step`. `S` is the contiguous code range
//! `level_lo..=level_hi`.

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::pwfunc::DomainKind;
use crate::robust_stats::RobustMoments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    pub domain: DomainKind,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Number of cells; there are `k + 1` endpoints.
    pub k: usize,
    pub cell_length: f64,
    pub level_step: f64,
    pub level_lo: i64,
    pub level_hi: i64,
    /// Sorted ascending, duplicate free.
    pub slopes: Vec<i64>,
    /// The integer small-scale branch (unit cells) was taken.
    pub unit_cells: bool,
}

/// `sum` over `c = 0..=max_exp` of `|{b 2^c : |b| <= max_b}|`, deduplicated:
/// `2 (B + C (B - floor(B/2))) + 1`.
pub fn slope_count(max_b: i64, max_exp: u32) -> usize {
    let b = max_b.max(0);
    (2 * (b + i64::from(max_exp) * (b - b / 2)) + 1) as usize
}

/// All values `b * 2^c` with `|b| <= max_b` and `0 <= c <= max_exp`.
pub fn slope_set(max_b: i64, max_exp: u32) -> Vec<i64> {
    let mut out: Vec<i64> = (0..=max_exp).flat_map(|c| (-max_b..=max_b).map(move |b| b << c)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9).ceil()
}

fn floor_tol(x: f64) -> f64 {
    (x + 1e-9).floor()
}

impl FitGrid {
    /// Grid from robust moments, following the window/cell rules of the
    /// constants ledger.
    pub fn build(moments: &RobustMoments, eps: f64, domain: DomainKind, c: &Constants) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidEpsilon(eps));
        }
        let ln = (1.0 / eps).ln();
        let sigma = moments.sigma;
        let (alpha, k, cell_length, unit_cells) = if domain.is_integer() && sigma <= c.c_disc / eps {
            let half = ceil_tol(c.c_i * ln / eps).max(1.0);
            (moments.mu.round() - half, 2 * half as usize, 1.0, true)
        } else {
            let k = ceil_tol(c.c_k * ln / eps).max(2.0) as usize;
            let k = k + k % 2;
            let window = 2.0 * ceil_tol(c.c_i * ln).max(1.0) * sigma;
            match domain {
                DomainKind::Real => (moments.mu - 0.5 * window, k, window / k as f64, false),
                DomainKind::Integer => {
                    let l = (window / k as f64).ceil().max(1.0);
                    (moments.mu.round() - (k / 2) as f64 * l, k, l, false)
                }
            }
        };
        let level_step = eps / k as f64;
        let level_lo = ceil_tol(-c.c_lo * ln / level_step) as i64;
        let level_hi = floor_tol(c.c_hi / level_step) as i64;
        let max_b = ceil_tol(ln / eps) as i64;
        let max_exp = ceil_tol(c.c_slope * (1.0 / eps).log2()).max(0.0) as u32;
        Ok(Self {
            domain,
            eps,
            alpha,
            beta: alpha + k as f64 * cell_length,
            k,
            cell_length,
            level_step,
            level_lo,
            level_hi,
            slopes: slope_set(max_b, max_exp),
            unit_cells,
        })
    }

    /// A grid with explicit parts, for small exhaustive instances.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        domain: DomainKind,
        eps: f64,
        alpha: f64,
        cell_length: f64,
        k: usize,
        level_step: f64,
        levels: (i64, i64),
        mut slopes: Vec<i64>,
    ) -> Result<Self> {
        if k == 0 || !(cell_length > 0.0) || !(level_step > 0.0) || levels.0 > levels.1 || slopes.is_empty() {
            return Err(Error::InvalidParameter("degenerate custom grid".into()));
        }
        if domain.is_integer() && (alpha.fract() != 0.0 || cell_length.fract() != 0.0) {
            return Err(Error::InvalidParameter("integer grid needs integer endpoints".into()));
        }
        slopes.sort_unstable();
        slopes.dedup();
        Ok(Self {
            domain,
            eps,
            alpha,
            beta: alpha + k as f64 * cell_length,
            k,
            cell_length,
            level_step,
            level_lo: levels.0,
            level_hi: levels.1,
            slopes,
            unit_cells: false,
        })
    }

    /// Endpoint `x_i`, `i` in `0..=k`.
    pub fn endpoint(&self, i: usize) -> f64 {
        self.alpha + i as f64 * self.cell_length
    }

    pub fn endpoints(&self) -> Vec<f64> {
        (0..=self.k).map(|i| self.endpoint(i)).collect()
    }

    /// Number of finite levels.
    pub fn level_count(&self) -> usize {
        (self.level_hi - self.level_lo + 1) as usize
    }

    pub fn slope_count(&self) -> usize {
        self.slopes.len()
    }

    /// Nearest level code of `a`; `None` for `-inf`. Codes outside `S` are
    /// returned as is; use [`FitGrid::value_of`] to range-check.
    pub fn level_of(&self, a: f64) -> Option<i64> {
        if a == f64::NEG_INFINITY {
            None
        } else {
            Some((a / self.level_step).round() as i64)
        }
    }

    pub fn value_of(&self, code: Option<i64>) -> Result<f64> {
        match code {
            None => Ok(f64::NEG_INFINITY),
            Some(m) if (self.level_lo..=self.level_hi).contains(&m) => Ok(m as f64 * self.level_step),
            Some(m) => Err(Error::OutOfRange(m)),
        }
    }

    /// Number of lattice points charged to cell `i` under left-closed
    /// accounting (the last cell also owns `x_k`); the cell length on ℝ.
    pub fn cell_points(&self, i: usize) -> f64 {
        self.cell_length + if self.domain.is_integer() && i + 1 == self.k { 1.0 } else { 0.0 }
    }
}

pub fn build_grid(moments: &RobustMoments, eps: f64, domain: DomainKind, constants: &Constants) -> Result<FitGrid> {
    FitGrid::build(moments, eps, domain, constants)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(mu: f64, sigma: f64) -> RobustMoments {
        RobustMoments { mu, sigma, guarded: false }
    }

    #[test]
    fn real_example() {
        let g = build_grid(&moments(0.5, 1.0), 0.1, DomainKind::Real, &Constants::default()).unwrap();
        assert_eq!(g.k, 24);
        assert!((g.cell_length - 0.25).abs() < 1e-15);
        assert!((g.alpha - (0.5 - 3.0)).abs() < 1e-15 && (g.beta - 3.5).abs() < 1e-12);
        assert_eq!((g.level_lo, g.level_hi), (-1105, 480));
        assert_eq!(g.level_count(), 1586);
        assert_eq!(g.slope_count(), slope_count(24, 7));
    }

    #[test]
    fn integer_example() {
        let g = build_grid(&moments(20.0, 5.0), 0.1, DomainKind::Integer, &Constants::default()).unwrap();
        assert!(g.unit_cells);
        assert_eq!((g.alpha, g.beta, g.k, g.cell_length), (-4.0, 44.0, 48, 1.0));
        let wide = build_grid(&moments(1000.0, 300.0), 0.1, DomainKind::Integer, &Constants::default()).unwrap();
        assert!(!wide.unit_cells);
        assert_eq!(wide.k, 24);
        assert_eq!(wide.cell_length, 75.0);
        assert_eq!(wide.beta - wide.alpha, 24.0 * 75.0);
    }

    #[test]
    fn level_codes() {
        let g = build_grid(&moments(0.0, 1.0), 0.1, DomainKind::Real, &Constants::default()).unwrap();
        assert_eq!(g.level_of(0.0), Some(0));
        assert_eq!(g.level_of(0.0021), Some(1));
        assert!((g.value_of(Some(1)).unwrap() - 0.1 / 24.0).abs() < 1e-18);
        assert_eq!(g.value_of(g.level_of(f64::NEG_INFINITY)).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(g.value_of(Some(481)), Err(Error::OutOfRange(481))));
    }

    #[test]
    fn slope_closed_form() {
        for b in 0..30 {
            for c in 0..8 {
                assert_eq!(slope_set(b, c).len(), slope_count(b, c));
            }
        }
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(build_grid(&moments(0.0, 1.0), 0.5, DomainKind::Real, &Constants::default()).is_err());
    }
}
