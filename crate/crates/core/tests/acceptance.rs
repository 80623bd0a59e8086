//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Run with `cargo test --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use logcave::interval_error::{cell_error, CellErrorQuery, ExpPiece, LinearPiece};
use logcave::oracle::{brute_force_best, TinyInstance};
use logcave::{
    learn_logconcave, learn_pwl, pwl_approximate, riemann_l1, robust_location_scale, shortest_path, tv_to_reference,
    verify_lc_facts, Constants, Contaminated, DomainKind, Family, LearnerConfig, OracleWeights, Piecewise,
    PiecewiseExpDensity, PiecewiseLinearDensity,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn samples_for(eps: f64) -> usize {
    (10.0 * eps.powf(-2.5)).round() as usize
}

/// Every fit made by the suite, for the properness audit.
#[derive(Default)]
struct Audit {
    fits: usize,
    bad: Vec<String>,
}

impl Audit {
    fn check(&mut self, label: &str, h: &PiecewiseExpDensity<f64>) {
        self.fits += 1;
        let mass = Piecewise::total_mass(h);
        if !h.is_log_concave() || (mass - 1.0).abs() > 1e-9 {
            self.bad.push(format!("{label}: mass {mass}"));
        }
    }
}

fn fit(
    audit: &mut Audit,
    label: &str,
    samples: &[f64],
    eps: f64,
    domain: DomainKind,
) -> (PiecewiseExpDensity<f64>, f64) {
    let t = Instant::now();
    let (h, _) = learn_logconcave::<f64>(samples, eps, domain, &Constants::default()).expect("fit succeeds");
    let secs = t.elapsed().as_secs_f64();
    audit.check(label, &h);
    (h, secs)
}

fn dp_optimality() -> Outcome {
    let t = Instant::now();
    let c = Constants::default();
    let (mut exact_worst, mut approx_worst_ratio, mut count) = (0.0f64, 0.0f64, 0);
    for seed in 0..100 {
        for domain in [DomainKind::Real, DomainKind::Integer] {
            let inst = TinyInstance::random(seed, domain, 4000, &c).expect("instance");
            let (_, brute) = brute_force_best(&inst).expect("small enough");
            let exact: f64 = shortest_path(&inst.grid, &mut inst.table.clone()).cost;
            let mut w = OracleWeights::new(&inst.g, &inst.grid, inst.scale, &c).expect("weights");
            let approx: f64 = shortest_path(&inst.grid, &mut w).cost;
            exact_worst = exact_worst.max((exact - brute).abs());
            approx_worst_ratio = approx_worst_ratio.max((approx - brute).abs() / inst.grid.eps);
            count += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        exact_worst <= 1e-9 && approx_worst_ratio <= 1.0 && secs < 60.0,
        format!("{count} instances, exact max diff {exact_worst:.1e}, approx max diff {approx_worst_ratio:.3} eps, {secs:.1} s"),
    )
}

fn cell_accuracy() -> Outcome {
    let eps = 0.05f64;
    let tol = eps * eps / (1.0 / eps).ln();
    let budget = 8.0 * (1.0 / eps).ln().powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut max_evals) = (0.0f64, 0u32);
    for i in 0..500 {
        let integer = i % 2 == 1;
        let domain = if integer { DomainKind::Integer } else { DomainKind::Real };
        let length: f64 = if integer { f64::from(rng.random_range(1..40u32)) } else { rng.random_range(0.05..2.0) };
        let last = if integer { length - 1.0 } else { length };
        // g nonnegative on the cell, h an exponential of comparable height.
        let (y0, y1): (f64, f64) = (rng.random_range(0.0..1.5), rng.random_range(0.0..1.5));
        let slope = if last > 0.0 { (y1 - y0) / last } else { 0.0 };
        let g = LinearPiece { slope, intercept: y0 };
        let h = ExpPiece { coef: rng.random_range(0.02..1.5), rate: rng.random_range(-4.0..4.0) / length };
        let q = CellErrorQuery { g, h, start: 0.0, length, domain, eps };
        let r = cell_error(&q).expect("valid query");
        let truth = riemann_l1(|x| g.eval(x), |x| h.coef * (h.rate * x).exp(), domain, 0.0, length, 1_000_000);
        worst = worst.max((r.value - truth).abs());
        max_evals = max_evals.max(r.elementary_evals);
    }
    outcome(
        worst <= tol && f64::from(max_evals) <= budget,
        format!("max |err| {worst:.2e} (tol {tol:.2e}), max evals {max_evals} (8 ln^2(1/eps) = {budget:.0})"),
    )
}

fn approximation() -> Outcome {
    let epsilons = [0.1, 0.05, 0.02, 0.01];
    let mut pass = true;
    let mut parts = Vec::new();
    for fam in [Family::Gaussian { mu: 0.0, sigma: 1.0 }, Family::Laplace { mu: 0.0, b: 1.0 }] {
        let mut pieces = Vec::new();
        for &eps in &epsilons {
            let g: PiecewiseLinearDensity<f64> =
                pwl_approximate(&fam, eps, &Constants::default()).expect("approximation");
            let tv = tv_to_reference(&g, &fam).expect("tv");
            pass &= tv <= eps && (Piecewise::total_mass(&g) - 1.0).abs() < 1e-9;
            pieces.push(g.piece_count() as f64);
        }
        let slope = log_log_slope(&epsilons, &pieces);
        pass &= (-0.65..=-0.35).contains(&slope);
        parts.push(format!("{} pieces {:?} slope {slope:.3}", fam.name(), pieces));
    }
    outcome(pass, parts.join("; "))
}

fn learning(audit: &mut Audit) -> Outcome {
    let eps = 0.1;
    let n = samples_for(eps);
    let mut pass = true;
    let mut parts = Vec::new();
    let targets = [
        (Family::Gaussian { mu: 0.0, sigma: 1.0 }, DomainKind::Real),
        (Family::Poisson { lambda: 20.0 }, DomainKind::Integer),
    ];
    for (fam, domain) in targets {
        let mut tvs = Vec::new();
        let mut slowest: f64 = 0.0;
        for seed in 0..20 {
            let (h, secs) = fit(audit, "learning", &fam.sample(n, seed), eps, domain);
            tvs.push(tv_to_reference(&h, &fam).expect("tv"));
            slowest = slowest.max(secs);
        }
        let m = median(tvs);
        pass &= m <= 0.15 && slowest < 120.0;
        parts.push(format!("{fam} n={n} median tv {m:.4}, slowest fit {slowest:.2} s"));
    }
    // Monotone improvement in n for the Gaussian target.
    let fam = Family::Gaussian { mu: 0.0, sigma: 1.0 };
    let mut medians = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        let tvs = (0..20)
            .map(|seed| {
                tv_to_reference(&fit(audit, "monotone", &fam.sample(n, 100 + seed), eps, DomainKind::Real).0, &fam)
                    .expect("tv")
            })
            .collect();
        medians.push(median(tvs));
    }
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    pass &= monotone;
    parts.push(format!("gaussian medians over n=1e3,1e4,1e5: {medians:.4?}"));
    outcome(pass, parts.join("; "))
}

fn robustness(audit: &mut Audit) -> Outcome {
    let eps = 0.05;
    let n = samples_for(eps);
    let target: Contaminated = "gaussian:0,1+0.1*uniform:-10,10".parse().expect("spec");
    let mut tvs = Vec::new();
    let mut concave = true;
    for seed in 0..20 {
        let (h, _) = fit(audit, "robustness", &target.sample(n, seed), eps, DomainKind::Real);
        concave &= h.is_log_concave();
        tvs.push(tv_to_reference(&h, &target.base).expect("tv"));
    }
    let m = median(tvs);
    outcome(m <= 0.5 && concave, format!("n={n}, median tv to N(0,1) {m:.4}"))
}

fn adversarial(audit: &mut Audit) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut inputs: Vec<(Vec<f64>, DomainKind)> = vec![
        (vec![0.0; 500], DomainKind::Real),
        (vec![7.0; 500], DomainKind::Integer),
        ((0..500).map(|i| if i % 2 == 0 { -1e6 } else { 1e6 }).collect(), DomainKind::Real),
        ((0..300).map(|i| f64::from(i % 3)).collect(), DomainKind::Integer),
        (vec![1.0, 2.0], DomainKind::Real),
    ];
    // Bimodal, heavy tailed and point-contaminated inputs.
    inputs.push((
        (0..2000).map(|i| if i % 2 == 0 { -8.0 } else { 8.0 } + rng.random_range(-0.1..0.1)).collect(),
        DomainKind::Real,
    ));
    inputs.push(((0..2000).map(|_| rng.random_range(0.0f64..1.0).powi(-2)).collect(), DomainKind::Real));
    inputs.push((
        (0..2000).map(|i| if i % 5 == 0 { 50.0 } else { f64::from(rng.random_range(0..10)) }).collect(),
        DomainKind::Integer,
    ));
    for (samples, domain) in inputs {
        for eps in [0.05, 0.2] {
            fit(audit, "adversarial", &samples, eps, domain);
        }
    }
}

fn runtime_scaling() -> Outcome {
    let ns = [1_000usize, 3_000, 10_000, 30_000];
    let fam = Family::Gaussian { mu: 0.0, sigma: 1.0 };
    let mut times = Vec::new();
    for &n in &ns {
        let eps = (10.0 / n as f64).powf(0.4);
        let samples = fam.sample(n, 1);
        let best = (0..3)
            .map(|_| {
                let t = Instant::now();
                learn_logconcave::<f64>(&samples, eps, DomainKind::Real, &Constants::default()).expect("fit");
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min);
        times.push(best);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&x, &times);
    outcome(slope < 2.0, format!("times {times:.3?} s, log-log slope {slope:.3}"))
}

fn structural() -> Outcome {
    let c = Constants::default();
    let families = [
        "gaussian:0,1",
        "gaussian:5,0.1",
        "laplace:0,1",
        "laplace:-3,4",
        "exponential:1",
        "exponential:0.2",
        "logistic:0,1",
        "uniform:0,1",
        "uniform:-5,20",
        "poisson:2",
        "poisson:20",
        "poisson:200",
        "binomial:40,0.3",
        "binomial:1000,0.5",
        "geometric:0.2",
        "geometric:0.02",
    ];
    let mut failures = Vec::new();
    for spec in families {
        let fam: Family = spec.parse().expect("family");
        if !verify_lc_facts(&fam, &c).passed() {
            failures.push(format!("{spec}: lemma 1"));
        }
        let (mu, sigma) = (fam.mean(), fam.std_dev());
        let g: PiecewiseLinearDensity<f64> = fam.render_pwl(4000).expect("render");
        let m = robust_location_scale(&g).expect("moments");
        if !lemma2(m.mu, m.sigma, mu, sigma) {
            failures.push(format!("{spec}: lemma 2 ({:.3}, {:.3})", m.mu, m.sigma));
        }
        // 10% contamination, read through the stage-1 learner.
        let noise = if fam.domain().is_integer() { "point:0" } else { "uniform:-10,10" };
        let mixed: Contaminated = format!("{spec}+0.1*{noise}").parse().expect("mixture");
        let config = LearnerConfig::new(0.02, &c).expect("config");
        let gm: PiecewiseLinearDensity<f64> =
            learn_pwl(&mixed.sample(100_000, 5), fam.domain(), &config).expect("stage 1");
        let mm = robust_location_scale(&gm).expect("moments");
        if !lemma2(mm.mu, mm.sigma, mu, sigma) {
            failures.push(format!("{spec} contaminated: lemma 2 ({:.3}, {:.3})", mm.mu, mm.sigma));
        }
    }
    let detail = if failures.is_empty() { format!("{} families", families.len()) } else { failures.join("; ") };
    outcome(failures.is_empty(), detail)
}

fn lemma2(mu_hat: f64, sigma_hat: f64, mu: f64, sigma: f64) -> bool {
    (mu_hat - mu).abs() <= 2.0 * sigma && (0.3 * sigma..=6.0 * sigma).contains(&sigma_hat)
}

fn main() -> ExitCode {
    let mut audit = Audit::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        eprintln!("  ({name}: {:.1} s)", t.elapsed().as_secs_f64());
        results.push((name, o));
    };
    run("1 dp optimality", &mut dp_optimality);
    run("3 cell error accuracy", &mut cell_accuracy);
    run("4 pwl approximation", &mut approximation);
    run("5 end-to-end learning", &mut || learning(&mut audit));
    run("6 agnostic robustness", &mut || robustness(&mut audit));
    run("7 runtime scaling", &mut runtime_scaling);
    run("8 structural lemmas", &mut structural);
    adversarial(&mut audit);
    let proper = outcome(
        audit.bad.is_empty(),
        format!(
            "{} fits audited{}",
            audit.fits,
            if audit.bad.is_empty() { String::new() } else { format!(", bad: {:?}", audit.bad) }
        ),
    );
    results.insert(1, ("2 unconditional properness", proper));

    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
