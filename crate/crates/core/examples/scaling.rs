//! Wall time of the full learner on Gaussian samples with `eps = (10/n)^(2/5)`.
//!
//! `cargo run --release -p logcave --example scaling`

use logcave::families::{tv_to_reference, Family};
use logcave::proper_fit::learn_logconcave;
use logcave::{Constants, DomainKind};
use std::time::Instant;

fn main() {
    let f = Family::Gaussian { mu: 0.0, sigma: 1.0 };
    let mut pts = Vec::new();
    for n in [1000usize, 3000, 10_000, 30_000] {
        let eps = (10.0 / n as f64).powf(0.4);
        let xs = f.sample(n, 1);
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t = Instant::now();
            let (h, r) = learn_logconcave::<f64>(&xs, eps, DomainKind::Real, &Constants::default()).unwrap();
            let secs = t.elapsed().as_secs_f64();
            best = best.min(secs);
            if best == secs {
                let tv = tv_to_reference(&h, &f).unwrap();
                println!(
                    "n={n} eps={eps:.4} t={secs:.3}s k={} |S|={} |T|={} queries={} visited={}/{} tv={tv:.4}",
                    r.k, r.levels, r.slopes, r.weight_queries, r.visited, r.vertices
                );
            }
        }
        pts.push(((n as f64).ln(), best.ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    println!("log-log slope {:.3}", sxy / sxx);
}
