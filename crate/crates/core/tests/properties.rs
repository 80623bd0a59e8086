use proptest::prelude::*;

use logcave::dp::{concavity_audit, graph_size, shortest_path, DpResult};
use logcave::grid::slope_set;
use logcave::interval_error::{cell_error, CellErrorQuery, ExpPiece, LinearPiece};
use logcave::oracle::{brute_force_best, TinyInstance};
use logcave::{
    fit_proper, learn_logconcave, learn_pwl, riemann_l1, tv_distance, Constants, DiscreteAccounting, DomainKind,
    FitGrid, LearnerConfig, Piecewise, PiecewiseExpDensity, PiecewiseLinearDensity,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// Random normalized piecewise linear density with nonnegative ends.
fn pwl(domain: DomainKind) -> impl Strategy<Value = PiecewiseLinearDensity<f64>> {
    (-5.0..5.0f64, prop::collection::vec((1u8..6, 0.0..2.0f64, 0.0..2.0f64), 1..7)).prop_filter_map(
        "zero mass",
        move |(start, cells)| {
            let mut bps = vec![start.round()];
            let mut coeffs = Vec::new();
            for (w, y0, y1) in cells {
                let u = *bps.last().unwrap();
                let v = u + f64::from(w);
                let last = if domain.is_integer() { v - 1.0 } else { v };
                let a = if last > u { (y1 - y0) / (last - u) } else { 0.0 };
                coeffs.push((a, y0 - a * u));
                bps.push(v);
            }
            PiecewiseLinearDensity::new(domain, bps, coeffs).ok()?.normalized().ok()
        },
    )
}

fn any_domain() -> impl Strategy<Value = DomainKind> {
    prop_oneof![Just(DomainKind::Real), Just(DomainKind::Integer)]
}

/// Concave integer codes: a start value followed by non-increasing steps.
fn concave_codes() -> impl Strategy<Value = Vec<i64>> {
    (-20i64..5, prop::collection::vec(-6i64..6, 0..8)).prop_map(|(a0, mut steps)| {
        steps.sort_unstable_by(|a, b| b.cmp(a));
        let mut out = vec![a0];
        for d in steps {
            out.push(out.last().unwrap() + d);
        }
        out
    })
}

/// `h` on ℤ read off level codes on the grid, `-inf` ends allowed.
fn h_on_integers(grid: &FitGrid, levels: &[Option<i64>], scale: f64, x: f64) -> f64 {
    let i = (((x - grid.alpha) / grid.cell_length).floor() as usize).min(grid.k);
    let t = x - grid.endpoint(i);
    let at = |j: usize| levels[j].map(|c| (c as f64 * grid.level_step).exp() / scale);
    if t == 0.0 {
        return at(i).unwrap_or(0.0);
    }
    match (levels[i], levels.get(i + 1).copied().flatten()) {
        (Some(a), Some(b)) => {
            let rate = (b - a) as f64 * grid.level_step / grid.cell_length;
            at(i).unwrap() * (rate * t).exp()
        }
        _ => 0.0,
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn pwl_mass_is_one_and_additive(g in any_domain().prop_flat_map(pwl), cut in 0.0..1.0f64) {
        prop_assert!((g.total_mass() - 1.0).abs() < 1e-9);
        let (lo, hi) = g.support();
        let mut c = lo + cut * (hi - lo);
        if g.domain().is_integer() {
            c = c.round();
        }
        // `mass` is over the closed interval: on ℤ the right part starts after `c`.
        let right = if g.domain().is_integer() { c + 1.0 } else { c };
        let sum = g.mass(lo, c) + g.mass(right, hi);
        prop_assert!((sum - g.mass(lo, hi)).abs() < 1e-12);
    }

    #[test]
    fn tv_symmetric_and_triangle(
        (f, g, h) in any_domain().prop_flat_map(|d| (pwl(d), pwl(d), pwl(d))),
    ) {
        let fg: f64 = tv_distance(&f, &g).unwrap();
        let gf: f64 = tv_distance(&g, &f).unwrap();
        prop_assert!((fg - gf).abs() < 1e-12);
        let fh: f64 = tv_distance(&f, &h).unwrap();
        let gh: f64 = tv_distance(&g, &h).unwrap();
        prop_assert!(fh <= fg + gh + 1e-6);
        prop_assert!((0.0..=1.0).contains(&fg));
    }

    #[test]
    fn quantile_inverts_cdf(g in pwl(DomainKind::Real), u in 0.0..1.0f64) {
        let (lo, hi) = g.support();
        let x = lo + u * (hi - lo);
        let p = g.cdf(x);
        prop_assume!(p > 1e-9 && p < 1.0 - 1e-9);
        let back = g.quantile(p).unwrap();
        let widest = g.breakpoints().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        prop_assert!((back - x).abs() <= widest + 1e-9, "{x} -> {p} -> {back}");
    }

    #[test]
    fn pwexp_from_concave_codes(codes in concave_codes(), domain in any_domain(), len in 1u8..4) {
        prop_assume!(codes.len() > 1 || domain.is_integer());
        let h = PiecewiseExpDensity::<f64>::from_grid_levels(domain, -3.0, f64::from(len), 0, &codes, 0.25, 1.0).unwrap();
        prop_assert!(h.is_log_concave());
        prop_assert!((h.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nonproper_output_is_a_density(
        samples in prop::collection::vec(-50.0..50.0f64, 2..400),
        integer in any::<bool>(),
        eps in 0.05..0.4f64,
    ) {
        let domain = if integer { DomainKind::Integer } else { DomainKind::Real };
        let samples: Vec<f64> = if integer { samples.iter().map(|x| x.round()).collect() } else { samples };
        let mut config = LearnerConfig::new(eps, &Constants::default()).unwrap();
        config.pieces = config.pieces.min(samples.len() / 2);
        let g: PiecewiseLinearDensity<f64> = learn_pwl(&samples, domain, &config).unwrap();
        prop_assert!((g.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!(g.piece_count() <= 2 * config.pieces);
        for w in g.breakpoints().windows(2) {
            let last = if integer { w[1] - 1.0 } else { w[1] };
            prop_assert!(g.eval(w[0]) >= -1e-12 && g.eval(last) >= -1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn cell_error_dominates_mass_difference_and_matches_quadrature(
        slope in -1.0..1.0f64,
        intercept in 0.0..1.5f64,
        coef in 0.01..2.0f64,
        rate in -3.0..3.0f64,
        length in 0.1..2.0f64,
        integer in any::<bool>(),
        eps in prop_oneof![Just(0.1), Just(0.05)],
    ) {
        let domain = if integer { DomainKind::Integer } else { DomainKind::Real };
        let length = if integer { (length * 5.0).ceil() } else { length };
        let g = LinearPiece { slope, intercept };
        let h = ExpPiece { coef, rate };
        let q = CellErrorQuery { g, h, start: 0.0, length, domain, eps };
        let got = cell_error(&q).unwrap().value;
        let gf = |x: f64| g.eval(x);
        let hf = |x: f64| coef * (rate * x).exp();
        let truth = riemann_l1(gf, hf, domain, 0.0, length, 200_000);
        let tol = eps * eps / (1.0 / eps).ln();
        prop_assert!((got - truth).abs() <= tol, "{got} vs {truth}");
        let mass_g = riemann_l1(gf, |_| 0.0, domain, 0.0, length, 200_000);
        let mass_h = riemann_l1(hf, |_| 0.0, domain, 0.0, length, 200_000);
        prop_assert!(got >= (mass_g - mass_h).abs() - tol);
    }

    #[test]
    fn dp_is_optimal_and_concave(seed in any::<u64>(), domain in any_domain()) {
        let c = Constants::default();
        let inst = TinyInstance::random(seed, domain, 1000, &c).unwrap();
        let (_, brute) = brute_force_best(&inst).unwrap();
        let dp: DpResult<f64> = shortest_path(&inst.grid, &mut inst.table.clone());
        prop_assert!((dp.cost - brute).abs() <= 1e-9);
        prop_assert!(concavity_audit(&dp.levels, &dp.slopes));
        let (v, e) = graph_size(&inst.grid);
        let (k, s, t) = (inst.grid.k as u64, inst.grid.level_count() as u64, inst.grid.slope_count() as u64);
        prop_assert!(v <= (k + 1) * s * (t + 1) + 2 * (k + 2));
        prop_assert!(e <= 5 * v);
        prop_assert!(dp.stats.vertices <= v);
    }

    #[test]
    fn refining_levels_or_slopes_never_hurts(seed in any::<u64>(), domain in any_domain(), extra in -4i64..=4) {
        let c = Constants::default();
        let inst = TinyInstance::random(seed, domain, 1000, &c).unwrap();
        let base = shortest_path::<f64, _>(&inst.grid, &mut inst.table.clone()).cost;
        let mut grid = inst.grid.clone();
        grid.slopes.push(extra);
        grid.slopes.sort_unstable();
        grid.slopes.dedup();
        prop_assume!(grid.slopes.len() <= 5);
        if grid.level_count() < 8 {
            grid.level_lo -= 1;
        }
        let finer = TinyInstance::new(grid, inst.g.clone(), inst.scale, 1000, &c).unwrap();
        let cost = shortest_path::<f64, _>(&finer.grid, &mut finer.table.clone()).cost;
        prop_assert!(cost <= base + 1e-9, "{cost} > {base}");
    }

    #[test]
    fn integer_double_counting_bound(seed in any::<u64>()) {
        let c = Constants { accounting: DiscreteAccounting::DoubleCount, ..Constants::default() };
        let inst = TinyInstance::random(seed, DomainKind::Integer, 0, &c).unwrap();
        let dp: DpResult<f64> = shortest_path(&inst.grid, &mut inst.table.clone());
        let grid = &inst.grid;
        let window: f64 = (grid.alpha as i64..=grid.beta as i64)
            .map(|x| {
                let x = x as f64;
                (inst.g.eval(x) - h_on_integers(grid, &dp.levels.codes, inst.scale, x)).abs()
            })
            .sum();
        prop_assert!(dp.cost >= window - 1e-9, "{} < {window}", dp.cost);
        prop_assert!(dp.cost <= 2.0 * window + 1e-9, "{} > 2 * {window}", dp.cost);
    }

    #[test]
    fn proper_fit_is_always_proper(
        body in prop::collection::vec(-3.0..3.0f64, 0..300),
        outliers in prop::collection::vec(prop_oneof![Just(1e6), Just(-1e6), Just(0.0), -1e3..1e3f64], 0..40),
        integer in any::<bool>(),
        eps in 0.08..0.3f64,
    ) {
        let domain = if integer { DomainKind::Integer } else { DomainKind::Real };
        let mut samples: Vec<f64> = body.into_iter().chain(outliers).collect();
        if integer {
            samples.iter_mut().for_each(|x| *x = x.round());
        }
        prop_assume!(samples.len() >= 2);
        let (h, report) = learn_logconcave::<f64>(&samples, eps, domain, &Constants::default()).unwrap();
        prop_assert!(h.is_log_concave());
        prop_assert!((h.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!(report.tv_to_stage1 <= report.tv_bound + 1e-6);
    }
}

#[test]
fn slope_sets_are_sorted_and_counted() {
    for b in 0..30 {
        for c in 0..9 {
            let t = slope_set(b, c);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(t.len(), logcave::grid::slope_count(b, c));
        }
    }
}

#[test]
fn error_decomposition_holds_on_stage1_densities() {
    let c = Constants::default();
    for seed in 0..5 {
        let samples = logcave::Family::Laplace { mu: 0.0, b: 1.0 }.sample(2000, seed);
        let config = LearnerConfig::new(0.15, &c).unwrap();
        let g: PiecewiseLinearDensity<f64> = learn_pwl(&samples, DomainKind::Real, &config).unwrap();
        let (h, report) = fit_proper(&g, 0.15, &c).unwrap();
        let tv: f64 = tv_distance(&h, &g).unwrap();
        assert!((tv - report.tv_to_stage1).abs() < 1e-9);
        assert!(tv <= report.tv_bound + 1e-6);
    }
}
