//! Shortest path over the layered graph of concave level sequences.
//!
//! Vertices carry `(endpoint j, level p, slope slot q)`; slot `q < |T|`
//! means the next difference is `slopes[q]`, slot `|T|` is the "unbounded"
//! tag reached only when the support begins. Two chains of `-inf` vertices
//! (before and after the support) complete the graph. The sweep runs
//! layer by layer, and within a layer from the largest slope down so that
//! tightening edges always point to unfinished vertices.

use serde::Serialize;

use crate::constants::{Constants, DiscreteAccounting};
use crate::error::{Error, Result};
use crate::grid::FitGrid;
use crate::interval_error::{lin_exp_l1, LinExpCell};
use crate::pwfunc::{check_log_concave, DomainKind, IntegerCodedLevels, PiecewiseLinearDensity};
use crate::scalar::Scalar;

/// Edge weights of the graph. Levels are indices into the grid's level
/// range (`0` is `level_lo`), cells are `0..k`.
pub trait EdgeWeights<T: Scalar> {
    /// Cost of the exponential piece joining `from` and `to` on `cell`.
    fn advance(&mut self, cell: usize, from: usize, to: usize) -> T;

    /// A value never above [`EdgeWeights::advance`].
    fn advance_lower_bound(&self, _cell: usize, _from: usize, _to: usize) -> T {
        T::zero()
    }

    /// Cost of `cell` when the support starts at its right end with `to`.
    fn enter(&mut self, cell: usize, to: usize) -> T;

    /// Cost of `cell` when the support ends at its left end with `from`.
    fn exit(&mut self, cell: usize, from: usize) -> T;

    /// Cost of `cell` outside the support.
    fn stay(&mut self, cell: usize) -> T;

    /// Optional lower bounds on the cost of every continuation to the
    /// sink that only uses differences from `slopes` (sorted).
    fn cost_to_go(&self, _slopes: &[i64]) -> Option<CostToGo> {
        None
    }
}

/// Levels per block in [`CostToGo`].
const REACH_BLOCK: usize = 64;

/// Lower bounds on the cost to go, per endpoint, slope row and block of
/// `REACH_BLOCK` levels.
///
/// Row `q` bounds vertices whose later differences are at most
/// `slopes[q]`. The table solves the same recursion as the sweep on the
/// coarser state space, with every cell cost replaced by a bound that
/// holds for all levels of a block, so each entry is below the cost of
/// every continuation it stands for. Values are stored rounded down.
#[derive(Debug, Clone)]
pub struct CostToGo {
    n_rows: usize,
    n_blocks: usize,
    values: Vec<f32>,
}

impl CostToGo {
    /// Bound at `endpoint` for level index `p`; `row = None` means no slope
    /// restriction.
    #[inline]
    pub fn at(&self, endpoint: usize, row: Option<usize>, p: usize) -> f64 {
        let r = row.unwrap_or(self.n_rows - 1);
        f64::from(self.values[(endpoint * self.n_rows + r) * self.n_blocks + p / REACH_BLOCK])
    }
}

/// `x` as an `f32` not above `x` (for `x >= 0`).
fn f32_below(x: f64) -> f32 {
    let y = x as f32;
    if f64::from(y) > x {
        (x * (1.0 - 1e-6)) as f32
    } else {
        y
    }
}

/// One linear stretch of `g` inside a cell, in local coordinates.
#[derive(Debug, Clone, Copy)]
struct Part<T> {
    offset: T,
    /// Length on ℝ, point count on ℤ.
    width: T,
    g0: T,
    slope: T,
}

/// Sub-intervals per cell used by the lower bound.
const CHUNKS: usize = 4;

/// Chunk boundaries of a cell of `width` (length on ℝ, points on ℤ).
fn chunk_bounds<T: Scalar>(domain: DomainKind, width: T) -> [T; CHUNKS + 1] {
    let mut out = [T::zero(); CHUNKS + 1];
    for (i, o) in out.iter_mut().enumerate() {
        let x = width * T::of_usize(i) / T::of_usize(CHUNKS);
        *o = if domain.is_integer() { x.floor() } else { x };
    }
    out[CHUNKS] = width;
    out
}

/// Weights computed on demand with the cell error oracle.
#[derive(Debug, Clone)]
pub struct OracleWeights<T> {
    domain: DomainKind,
    n_levels: usize,
    step: T,
    cell_length: T,
    bracket: T,
    parts: Vec<Vec<Part<T>>>,
    mass: Vec<T>,
    left_value: Vec<T>,
    right_value: Vec<T>,
    /// Whether the cell also owns its right endpoint (ℤ).
    owns_right: Vec<bool>,
    height: Vec<T>,
    /// Mass of `g` on each of the `CHUNKS` sub-intervals of every cell.
    chunk_mass: Vec<[T; CHUNKS]>,
    /// Indexed by `d + n_levels - 1`: mass of `e^{rate t}` on each chunk, for
    /// ordinary cells (`[0]`) and cells owning their right endpoint (`[1]`).
    chunk_factor: [Vec<[T; CHUNKS]>; 2],
    end_factor: [Vec<T>; 2],
    evals: u64,
}

impl<T: Scalar> OracleWeights<T> {
    pub fn new(g: &PiecewiseLinearDensity<T>, grid: &FitGrid, scale: f64, constants: &Constants) -> Result<Self> {
        if g.domain() != grid.domain {
            return Err(Error::DomainMismatch);
        }
        let domain = grid.domain;
        let n_levels = grid.level_count();
        let step = T::lit(grid.level_step);
        let cell_length = T::lit(grid.cell_length);
        let eps = grid.eps.clamp(1e-12, 0.5);
        let bracket = T::lit(constants.c_bis * eps * grid.cell_length / (1.0 / eps).ln());
        let double = domain.is_integer() && constants.accounting == DiscreteAccounting::DoubleCount;
        let owns_right: Vec<bool> = (0..grid.k).map(|c| domain.is_integer() && (double || c + 1 == grid.k)).collect();

        let bps = g.breakpoints();
        let pieces = g.pieces();
        let mut parts = Vec::with_capacity(grid.k);
        let mut mass = Vec::with_capacity(grid.k);
        let mut left_value = Vec::with_capacity(grid.k);
        let mut right_value = Vec::with_capacity(grid.k);
        let mut chunk_mass = Vec::with_capacity(grid.k);
        for (c, &owns) in owns_right.iter().enumerate() {
            let s = T::lit(grid.endpoint(c));
            let e = match domain {
                DomainKind::Real => T::lit(grid.endpoint(c + 1)),
                DomainKind::Integer => s + cell_length + if owns { T::one() } else { T::zero() },
            };
            let mut cuts = vec![s];
            cuts.extend(bps.iter().copied().filter(|&b| b > s && b < e));
            cuts.push(e);
            let mut cell_parts = Vec::with_capacity(cuts.len() - 1);
            for w in cuts.windows(2) {
                let (u, v) = (w[0], w[1]);
                let (g0, slope) = if u >= bps[0] && u < bps[bps.len() - 1] {
                    let i = bps.partition_point(|b| *b <= u) - 1;
                    let (a, b) = pieces[i];
                    (a * u + b, a)
                } else {
                    (T::zero(), T::zero())
                };
                cell_parts.push(Part { offset: u - s, width: v - u, g0, slope });
            }
            let m: T = cell_parts
                .iter()
                .map(|p| crate::pwfunc::Shape::Linear { v0: p.g0, slope: p.slope }.mass(domain, p.width))
                .sum();
            mass.push(m);
            let width = e - s;
            let cb = chunk_bounds(domain, width);
            let mut cm = [T::zero(); CHUNKS];
            for (i, slot) in cm.iter_mut().enumerate() {
                *slot = cell_parts
                    .iter()
                    .map(|p| {
                        let a = p.offset.max(cb[i]);
                        let b = (p.offset + p.width).min(cb[i + 1]);
                        if b <= a {
                            T::zero()
                        } else {
                            let v0 = p.g0 + p.slope * (a - p.offset);
                            crate::pwfunc::Shape::Linear { v0, slope: p.slope }.mass(domain, b - a)
                        }
                    })
                    .sum();
            }
            chunk_mass.push(cm);
            left_value.push(g.eval(s));
            right_value.push(g.eval(T::lit(grid.endpoint(c + 1))));
            parts.push(cell_parts);
        }

        let height: Vec<T> =
            (0..n_levels).map(|p| (T::of_i64(grid.level_lo + p as i64) * step).exp() / T::lit(scale)).collect();
        let span = 2 * n_levels - 1;
        let rate_of = |i: usize| T::of_i64(i as i64 - (n_levels as i64 - 1)) * step / cell_length;
        let chunks = |width: T| -> Vec<[T; CHUNKS]> {
            let cb = chunk_bounds(domain, width);
            (0..span)
                .map(|i| {
                    let r = rate_of(i);
                    let mut f = [T::zero(); CHUNKS];
                    for (c, slot) in f.iter_mut().enumerate() {
                        let len = cb[c + 1] - cb[c];
                        *slot =
                            (r * cb[c]).exp() * crate::pwfunc::Shape::Exp { v0: T::one(), rate: r }.mass(domain, len);
                    }
                    f
                })
                .collect()
        };
        let ends = |points: T| -> Vec<T> { (0..span).map(|i| (rate_of(i) * (points - T::one())).exp()).collect() };
        let (chunk_factor, end_factor) = match domain {
            DomainKind::Real => {
                let f = chunks(cell_length);
                ([f.clone(), f], [Vec::new(), Vec::new()])
            }
            DomainKind::Integer => {
                let l = cell_length;
                ([chunks(l), chunks(l + T::one())], [ends(l), ends(l + T::one())])
            }
        };
        Ok(Self {
            domain,
            n_levels,
            step,
            cell_length,
            bracket,
            parts,
            mass,
            left_value,
            right_value,
            owns_right,
            height,
            chunk_mass,
            chunk_factor,
            end_factor,
            evals: 0,
        })
    }

    /// Elementary function evaluations spent in exact cell errors so far.
    pub fn elementary_evals(&self) -> u64 {
        self.evals
    }

    /// Mass of `g` charged to `cell`.
    pub fn cell_mass(&self, cell: usize) -> T {
        self.mass[cell]
    }

    #[inline]
    fn slot(&self, from: usize, to: usize) -> usize {
        to + self.n_levels - 1 - from
    }
}

impl<T: Scalar> EdgeWeights<T> for OracleWeights<T> {
    fn advance(&mut self, cell: usize, from: usize, to: usize) -> T {
        let h0 = self.height[from];
        let d = T::of_i64(to as i64 - from as i64);
        let rate = d * self.step / self.cell_length;
        let which = usize::from(self.owns_right[cell]);
        let parts = &self.parts[cell];
        let mut evals = 0u32;
        let value = if parts.len() == 1 {
            let p = parts[0];
            let h1 = match self.domain {
                DomainKind::Real => self.height[to],
                DomainKind::Integer => h0 * self.end_factor[which][self.slot(from, to)],
            };
            let c = LinExpCell { g0: p.g0, g_slope: p.slope, h0, h1, rate, width: p.width };
            lin_exp_l1(self.domain, &c, self.bracket, &mut evals)
        } else {
            let mut total = T::zero();
            for p in parts {
                let last = match self.domain {
                    DomainKind::Real => p.width,
                    DomainKind::Integer => p.width - T::one(),
                };
                let hs = h0 * (rate * p.offset).exp();
                let he = h0 * (rate * (p.offset + last)).exp();
                evals += 2;
                let c = LinExpCell { g0: p.g0, g_slope: p.slope, h0: hs, h1: he, rate, width: p.width };
                total = total + lin_exp_l1(self.domain, &c, self.bracket, &mut evals);
            }
            total
        };
        self.evals += u64::from(evals);
        value
    }

    #[inline]
    fn advance_lower_bound(&self, cell: usize, from: usize, to: usize) -> T {
        let which = usize::from(self.owns_right[cell]);
        let f = &self.chunk_factor[which][self.slot(from, to)];
        let g = &self.chunk_mass[cell];
        let h0 = self.height[from];
        (g[0] - h0 * f[0]).abs() + (g[1] - h0 * f[1]).abs() + (g[2] - h0 * f[2]).abs() + (g[3] - h0 * f[3]).abs()
    }

    fn enter(&mut self, cell: usize, to: usize) -> T {
        if self.owns_right[cell] {
            let r = self.right_value[cell];
            self.mass[cell] - r + (r - self.height[to]).abs()
        } else {
            self.mass[cell]
        }
    }

    fn exit(&mut self, cell: usize, from: usize) -> T {
        match self.domain {
            DomainKind::Real => self.mass[cell],
            DomainKind::Integer => {
                let l = self.left_value[cell];
                self.mass[cell] - l + (l - self.height[from]).abs()
            }
        }
    }

    fn stay(&mut self, cell: usize) -> T {
        self.mass[cell]
    }

    fn cost_to_go(&self, slopes: &[i64]) -> Option<CostToGo> {
        let k = self.mass.len();
        let n = self.n_levels;
        let n_t = slopes.len();
        if n_t == 0 {
            return None;
        }
        let n_blocks = n.div_ceil(REACH_BLOCK);
        let stride = n_t * n_blocks;
        let lo: Vec<T> = (0..n_blocks).map(|b| self.height[b * REACH_BLOCK]).collect();
        let hi: Vec<T> = (0..n_blocks).map(|b| self.height[((b + 1) * REACH_BLOCK).min(n) - 1]).collect();
        let mut values = vec![0f32; (k + 1) * stride];
        let mut after = vec![T::zero(); stride];
        let mut here = vec![T::zero(); stride];
        let mut rest = T::zero();
        for j in (0..k).rev() {
            rest = rest + self.mass[j];
            let exit = match self.domain {
                DomainKind::Real => rest,
                DomainKind::Integer => (rest - self.left_value[j]).max(T::zero()),
            };
            let g = &self.chunk_mass[j];
            let which = usize::from(self.owns_right[j]);
            for (q, &d) in slopes.iter().enumerate() {
                let usable = (d.unsigned_abs() as usize) < n;
                let f =
                    if usable { self.chunk_factor[which][(d + n as i64 - 1) as usize] } else { [T::zero(); CHUNKS] };
                for b in 0..n_blocks {
                    // Levels reached from the block, clipped to the grid.
                    let first = (b * REACH_BLOCK) as i64 + d;
                    let last = (((b + 1) * REACH_BLOCK).min(n) - 1) as i64 + d;
                    let term = if usable && last >= 0 && first < n as i64 {
                        let b0 = first.max(0) as usize / REACH_BLOCK;
                        let b1 = last.min(n as i64 - 1) as usize / REACH_BLOCK;
                        let mut go = after[q * n_blocks + b0];
                        for bb in b0 + 1..=b1 {
                            go = go.min(after[q * n_blocks + bb]);
                        }
                        let mut cell = T::zero();
                        for i in 0..CHUNKS {
                            cell = cell + (lo[b] * f[i] - g[i]).max(g[i] - hi[b] * f[i]).max(T::zero());
                        }
                        cell + go
                    } else {
                        T::infinity()
                    };
                    let prev = if q == 0 { exit } else { here[(q - 1) * n_blocks + b] };
                    here[q * n_blocks + b] = prev.min(term);
                }
            }
            for (v, h) in values[j * stride..(j + 1) * stride].iter_mut().zip(&here) {
                *v = f32_below(h.f64());
            }
            std::mem::swap(&mut here, &mut after);
        }
        Some(CostToGo { n_rows: n_t, n_blocks, values })
    }
}

/// Weights read from explicit tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TableWeights<T> {
    n_levels: usize,
    /// `[cell][from][to]`, flattened.
    pub advance: Vec<T>,
    /// `[cell][to]`.
    pub enter: Vec<T>,
    /// `[cell][from]`.
    pub exit: Vec<T>,
    pub stay: Vec<T>,
}

impl<T: Scalar> TableWeights<T> {
    /// Tabulates every weight of `k` cells and `n_levels` levels.
    pub fn tabulate(k: usize, n_levels: usize, mut w: impl EdgeWeights<T>) -> Self {
        let mut advance = Vec::with_capacity(k * n_levels * n_levels);
        for c in 0..k {
            for from in 0..n_levels {
                for to in 0..n_levels {
                    advance.push(w.advance(c, from, to));
                }
            }
        }
        let enter = (0..k).flat_map(|c| (0..n_levels).map(move |p| (c, p))).map(|(c, p)| w.enter(c, p)).collect();
        let exit = (0..k).flat_map(|c| (0..n_levels).map(move |p| (c, p))).map(|(c, p)| w.exit(c, p)).collect();
        let stay = (0..k).map(|c| w.stay(c)).collect();
        Self { n_levels, advance, enter, exit, stay }
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }
}

impl<T: Scalar> EdgeWeights<T> for TableWeights<T> {
    fn advance(&mut self, cell: usize, from: usize, to: usize) -> T {
        self.advance[(cell * self.n_levels + from) * self.n_levels + to]
    }

    fn enter(&mut self, cell: usize, to: usize) -> T {
        self.enter[cell * self.n_levels + to]
    }

    fn exit(&mut self, cell: usize, from: usize) -> T {
        self.exit[cell * self.n_levels + from]
    }

    fn stay(&mut self, cell: usize) -> T {
        self.stay[cell]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DpStats {
    pub vertices: u64,
    pub edges: u64,
    /// Vertices that received a finite cost.
    pub visited: u64,
    /// Exact advance weights computed.
    pub weight_queries: u64,
    /// Advance edges settled by the lower bound alone.
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpResult<T> {
    /// One entry per endpoint, level codes (not indices).
    pub levels: IntegerCodedLevels,
    /// Slope codes of the advance edges, in path order.
    pub slopes: Vec<i64>,
    pub cost: T,
    /// Edges on the optimal path.
    pub path_len: usize,
    /// The path leaves the last endpoint through the zero-cost closer.
    pub closed_at_boundary: bool,
    pub stats: DpStats,
}

impl<T> DpResult<T> {
    pub fn is_empty(&self) -> bool {
        self.levels.finite_span().is_none()
    }
}

/// True iff the finite levels are concave (exact integer check) and the
/// slope tags never increase along the path.
pub fn concavity_audit(levels: &IntegerCodedLevels, slopes: &[i64]) -> bool {
    check_log_concave(levels) && slopes.windows(2).all(|w| w[1] <= w[0])
}

/// Closed-form vertex and edge counts of the graph over `grid`.
pub fn graph_size(grid: &FitGrid) -> (u64, u64) {
    let k = grid.k as u64;
    let n_s = grid.level_count() as u64;
    let n_t = grid.slope_count() as u64;
    let vertices = (k + 1) * n_s * (n_t + 1) + (k + 1) + k + 2;
    let advance: u64 = grid.slopes.iter().map(|&d| n_s.saturating_sub(d.unsigned_abs())).sum::<u64>() * k;
    let edges = advance
        + (k + 1) * n_s * n_t // tighten
        + (k + 1) * n_s // enter
        + k * n_s // exit
        + 1 + k + k.saturating_sub(1) // source to pre chain, stays
        + n_s + 2; // closers into the sink
    (vertices, edges)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PostFrom {
    Stay,
    Exit(usize),
}

/// A sub-lattice of the level range: local level `p` is grid index
/// `offset + stride * p`; `slopes` are in grid index units and all
/// divisible by `stride`.
struct Lattice {
    n_s: usize,
    offset: usize,
    stride: usize,
    slopes: Vec<i64>,
}

/// Levels per side below which no coarse bound is computed first.
const COARSE_MIN_LEVELS: usize = 256;
const COARSE_FACTOR: usize = 8;

impl Lattice {
    fn full(grid: &FitGrid) -> Self {
        Self { n_s: grid.level_count(), offset: 0, stride: 1, slopes: grid.slopes.clone() }
    }

    /// Every `factor`-th level (keeping level code 0 when in range) and the
    /// slopes compatible with that spacing.
    fn coarsen(&self, grid: &FitGrid, factor: usize) -> Self {
        let stride = self.stride * factor;
        let total = grid.level_count();
        let zero = (-grid.level_lo).clamp(0, total as i64 - 1) as usize;
        let offset = zero % stride;
        let n_s = (total - offset).div_ceil(stride);
        let slopes = self.slopes.iter().copied().filter(|d| d % stride as i64 == 0).collect();
        Self { n_s, offset, stride, slopes }
    }

    #[inline]
    fn index(&self, p: usize) -> usize {
        self.offset + self.stride * p
    }
}

/// Minimum-cost concave level sequence on `grid` under `weights`.
///
/// On large grids the optimum over a strided sub-lattice is computed first;
/// every such path is a path of the full graph, so its cost bounds the
/// optimum and vertices whose prefix cost already exceeds it are not
/// expanded. The result is the same as without the bound.
pub fn shortest_path<T: Scalar, W: EdgeWeights<T>>(grid: &FitGrid, weights: &mut W) -> DpResult<T> {
    let full = Lattice::full(grid);
    let mut chain = vec![full];
    while chain[chain.len() - 1].n_s > COARSE_MIN_LEVELS {
        let next = chain[chain.len() - 1].coarsen(grid, COARSE_FACTOR);
        chain.push(next);
    }
    let mut bound = T::infinity();
    let mut extra = DpStats::default();
    while chain.len() > 1 {
        let lattice = chain.pop().expect("non-empty");
        let r = sweep(grid, &lattice, weights, bound);
        bound = bound.min(r.cost);
        extra.weight_queries += r.stats.weight_queries;
        extra.skipped += r.stats.skipped;
    }
    let mut out = sweep(grid, &chain[0], weights, bound);
    out.stats.weight_queries += extra.weight_queries;
    out.stats.skipped += extra.skipped;
    out
}

fn sweep<T: Scalar, W: EdgeWeights<T>>(grid: &FitGrid, lat: &Lattice, weights: &mut W, bound: T) -> DpResult<T> {
    let k = grid.k;
    let n_s = lat.n_s;
    let n_t = lat.slopes.len();
    let stride = lat.stride as i64;
    let steps: Vec<i64> = lat.slopes.iter().map(|d| d / stride).collect();
    let inf = T::infinity();
    // Slack keeps vertices whose cost ties the bound up to rounding.
    let bound = if bound < inf { bound + T::lit(1e-9) * (T::one() + bound) } else { inf };
    let layer = (n_t + 1) * n_s;
    let mut cur = vec![T::zero(); layer];
    let mut next = vec![inf; layer];
    // One bit per (endpoint >= 1, q < n_t, p): set when the advance edge won.
    let bits_per_layer = n_t * n_s;
    let mut advanced = vec![0u64; (k * bits_per_layer).div_ceil(64)];
    let mut stats = DpStats::default();
    let (v, e) = graph_size(grid);
    stats.vertices = v;
    stats.edges = e;
    stats.visited = layer as u64;

    let mut pre = vec![T::zero(); k + 1];
    let mut post = vec![inf; k + 1];
    let mut post_from = vec![PostFrom::Stay; k + 1];
    // Half-open range of live levels per slot row; values outside are
    // never read.
    let mut cur_live = vec![(0usize, n_s); n_t + 1];
    let mut next_live = vec![(0usize, 0usize); n_t + 1];
    let ctg = if bound < inf { weights.cost_to_go(&lat.slopes) } else { None };

    for cell in 0..k {
        let stay = weights.stay(cell);
        pre[cell + 1] = pre[cell] + stay;

        // Support ends inside this cell.
        let mut exit_best = (inf, 0usize);
        let (lo, hi) = cur_live[0];
        for (p, &w) in cur.iter().enumerate().take(hi).skip(lo) {
            if w < inf {
                let c = w + weights.exit(cell, lat.index(p));
                if c < exit_best.0 {
                    exit_best = (c, p);
                }
            }
        }
        let stay_post = post[cell] + stay;
        if exit_best.0 <= stay_post {
            post[cell + 1] = exit_best.0;
            post_from[cell + 1] = PostFrom::Exit(exit_best.1);
        } else {
            post[cell + 1] = stay_post;
            post_from[cell + 1] = PostFrom::Stay;
        }

        // Support starts at the right end of this cell.
        let top = n_t * n_s;
        let (mut first, mut last) = (usize::MAX, 0usize);
        for p in 0..n_s {
            let w = pre[cell] + weights.enter(cell, lat.index(p));
            let ahead = ctg.as_ref().map_or(T::zero(), |c| T::lit(c.at(cell + 1, None, lat.index(p))));
            if w + ahead <= bound {
                next[top + p] = w;
                first = first.min(p);
                last = p;
            } else {
                next[top + p] = inf;
            }
        }
        next_live[n_t] = if first <= last { (first, last + 1) } else { (0, 0) };
        let bit_base = cell * bits_per_layer;
        for q in (0..n_t).rev() {
            let d = steps[q];
            let row = q * n_s;
            let above = row + n_s;
            let (ua, ub) = next_live[q + 1];
            // Advance targets reachable from the live part of this row.
            let (ca, cb) = cur_live[q];
            let (ta, tb) = if ca < cb {
                (((ca as i64 + d).max(0) as usize).min(n_s), ((cb as i64 + d).max(0) as usize).min(n_s))
            } else {
                (0, 0)
            };
            let (ha, hb) = match (ua < ub, ta < tb) {
                (true, true) => (ua.min(ta), ub.max(tb)),
                (true, false) => (ua, ub),
                (false, true) => (ta, tb),
                (false, false) => (0, 0),
            };
            let (mut first, mut last) = (usize::MAX, 0usize);
            for p2 in ha..hb {
                let ahead = ctg.as_ref().map_or(T::zero(), |c| T::lit(c.at(cell + 1, Some(q), lat.index(p2))));
                let mut best = if p2 >= ua && p2 < ub { next[above + p2] } else { inf };
                if p2 >= ta && p2 < tb {
                    let p = (p2 as i64 - d) as usize;
                    let w = cur[row + p];
                    if w < best && w <= bound {
                        let (i, i2) = (lat.index(p), lat.index(p2));
                        let lb = w + weights.advance_lower_bound(cell, i, i2);
                        if lb < best && lb + ahead <= bound {
                            stats.weight_queries += 1;
                            let cand = w + weights.advance(cell, i, i2);
                            if cand < best {
                                best = cand;
                                let bit = bit_base + row + p2;
                                advanced[bit >> 6] |= 1u64 << (bit & 63);
                            }
                        } else {
                            stats.skipped += 1;
                        }
                    }
                }
                let live = best < inf && best + ahead <= bound;
                if live {
                    next[row + p2] = best;
                    first = first.min(p2);
                    last = p2;
                } else {
                    next[row + p2] = inf;
                }
            }
            next_live[q] = if first <= last { (first, last + 1) } else { (0, 0) };
            stats.visited += (next_live[q].1 - next_live[q].0) as u64;
        }
        std::mem::swap(&mut cur_live, &mut next_live);
        std::mem::swap(&mut cur, &mut next);
    }

    // Sink: on ties prefer the empty hypothesis, then a support reaching
    // the boundary, then one that ended earlier.
    let mut fin_best = (inf, 0usize);
    let (lo, hi) = cur_live[0];
    for (p, &w) in cur.iter().enumerate().take(hi).skip(lo) {
        if w < fin_best.0 {
            fin_best = (w, p);
        }
    }
    let mut levels: Vec<Option<i64>> = vec![None; k + 1];
    let mut used = Vec::new();
    let mut path_len = 1;
    let code = |p: usize| grid.level_lo + lat.index(p) as i64;
    let mut walk = |mut j: usize, mut p: usize, levels: &mut Vec<Option<i64>>, path_len: &mut usize| {
        let mut q = 0usize;
        loop {
            levels[j] = Some(code(p));
            if q == n_t {
                // Entered here: from the source (j = 0) or the pre chain.
                *path_len += j + 1;
                break;
            }
            let advanced_here = j > 0 && {
                let bit = (j - 1) * bits_per_layer + q * n_s + p;
                advanced[bit >> 6] >> (bit & 63) & 1 == 1
            };
            *path_len += 1;
            if advanced_here {
                used.push(lat.slopes[q]);
                p = (p as i64 - steps[q]) as usize;
                j -= 1;
            } else {
                q += 1;
            }
        }
    };
    let (cost, closed) = if pre[k] <= fin_best.0 && pre[k] <= post[k] {
        path_len += k + 1;
        (pre[k], false)
    } else if fin_best.0 <= post[k] {
        walk(k, fin_best.1, &mut levels, &mut path_len);
        (fin_best.0, true)
    } else {
        let mut j = k;
        while post_from[j] == PostFrom::Stay {
            j -= 1;
            path_len += 1;
        }
        let PostFrom::Exit(p) = post_from[j] else { unreachable!() };
        path_len += 1;
        walk(j - 1, p, &mut levels, &mut path_len);
        (post[k], false)
    };
    used.reverse();
    DpResult {
        levels: IntegerCodedLevels::new(levels, grid.level_step),
        slopes: used,
        cost,
        path_len,
        closed_at_boundary: closed,
        stats,
    }
}

/// Runs the sweep with oracle weights for `g` on `grid`.
pub fn shortest_path_fit<T: Scalar>(
    g: &PiecewiseLinearDensity<T>,
    grid: &FitGrid,
    scale: f64,
    constants: &Constants,
) -> Result<DpResult<T>> {
    let mut w = OracleWeights::new(g, grid, scale, constants)?;
    Ok(shortest_path(grid, &mut w))
}

/// Sum of the edge weights along the level sequence `levels` (codes), using
/// the same edge kinds as the sweep. Useful to audit a reported cost.
pub fn path_cost<T: Scalar, W: EdgeWeights<T>>(grid: &FitGrid, levels: &IntegerCodedLevels, weights: &mut W) -> T {
    let idx = |c: Option<i64>| c.map(|c| (c - grid.level_lo) as usize);
    let codes: Vec<Option<usize>> = levels.codes.iter().map(|&c| idx(c)).collect();
    let mut total = T::zero();
    for cell in 0..grid.k {
        total = total
            + match (codes[cell], codes[cell + 1]) {
                (Some(a), Some(b)) => weights.advance(cell, a, b),
                (None, Some(b)) => weights.enter(cell, b),
                (Some(a), None) => weights.exit(cell, a),
                (None, None) => weights.stay(cell),
            };
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid(domain: DomainKind) -> FitGrid {
        FitGrid::custom(domain, 0.1, 0.0, 1.0, 3, 0.5, (-4, 1), vec![-2, -1, 0, 1]).unwrap()
    }

    #[test]
    fn empty_target() {
        let grid = tiny_grid(DomainKind::Real);
        // g vanishes on the window: it lives on [10, 11].
        let g = PiecewiseLinearDensity::<f64>::new(DomainKind::Real, vec![10.0, 11.0], vec![(0.0, 1.0)]).unwrap();
        let r = shortest_path_fit(&g, &grid, 1.0, &Constants::default()).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.is_empty());
        let n = TableWeights::tabulate(3, 6, OracleWeights::new(&g, &grid, 1.0, &Constants::default()).unwrap());
        assert_eq!(n.stay, vec![0.0; 3]);
    }

    #[test]
    fn audit_examples() {
        let ok = IntegerCodedLevels::new(vec![Some(0), Some(5), Some(8), Some(9)], 1.0);
        assert!(concavity_audit(&ok, &[5, 3, 1]));
        let bad = IntegerCodedLevels::new(vec![Some(0), Some(1), Some(3)], 1.0);
        assert!(!concavity_audit(&bad, &[1, 2]));
        assert!(concavity_audit(&IntegerCodedLevels::new(vec![None; 4], 1.0), &[]));
    }

    #[test]
    fn reported_cost_matches_path() {
        for domain in [DomainKind::Real, DomainKind::Integer] {
            let grid = tiny_grid(domain);
            let g = PiecewiseLinearDensity::<f64>::new(
                domain,
                vec![0.0, 1.0, 2.0, 3.0],
                vec![(0.2, 0.1), (0.0, 0.3), (-0.2, 0.7)],
            )
            .unwrap()
            .normalized()
            .unwrap();
            let c = Constants::default();
            let r = shortest_path_fit(&g, &grid, 1.0, &c).unwrap();
            let mut w = OracleWeights::new(&g, &grid, 1.0, &c).unwrap();
            let again = path_cost(&grid, &r.levels, &mut w);
            assert!((again - r.cost).abs() < 1e-12, "{domain:?}: {again} vs {}", r.cost);
            assert!(concavity_audit(&r.levels, &r.slopes));
        }
    }

    #[test]
    fn graph_counts_bounded() {
        let grid = tiny_grid(DomainKind::Real);
        let (v, e) = graph_size(&grid);
        let bound = (grid.k + 1) * grid.level_count() * (grid.slope_count() + 1) + 2 * (grid.k + 2);
        assert!(v as usize <= bound);
        assert!(e <= 5 * v);
    }

    #[test]
    fn pruning_keeps_the_optimum() {
        use crate::families::Family;
        use crate::nonproper::{learn_pwl, LearnerConfig};
        use crate::robust_stats::robust_location_scale;
        let c = Constants::default();
        for (fam, domain) in
            [("gaussian:0,1", DomainKind::Real), ("laplace:0,1", DomainKind::Real), ("poisson:30", DomainKind::Integer)]
        {
            let f: Family = fam.parse().unwrap();
            let xs = f.sample(2000, 11);
            let g = learn_pwl::<f64>(&xs, domain, &LearnerConfig::new(0.15, &c).unwrap()).unwrap();
            let m = robust_location_scale(&g).unwrap();
            let grid = FitGrid::build(&m, 0.15, domain, &c).unwrap();
            assert!(grid.level_count() > COARSE_MIN_LEVELS);
            let mut w = OracleWeights::new(&g, &grid, m.sigma, &c).unwrap();
            let fast = shortest_path(&grid, &mut w);
            let plain = sweep(&grid, &Lattice::full(&grid), &mut w, f64::INFINITY);
            assert!(
                (fast.cost - plain.cost).abs() <= 1e-12 * (1.0 + plain.cost),
                "{fam}: {} vs {}",
                fast.cost,
                plain.cost
            );
            assert!(fast.stats.visited < plain.stats.visited);
        }
    }
}
