//! Piece counts and total variation of the piecewise linear approximation.
//!
//! `cargo run --release -p logcave --example approx_table`

use logcave::families::{tv_to_reference, Family};
use logcave::pwl_approx::pwl_approximate;
use logcave::{Constants, PwlDensity};

fn main() {
    for spec in ["gaussian:0,1", "laplace:0,1", "logistic:0,1", "exponential:1", "poisson:30", "binomial:200,0.3"] {
        let f: Family = spec.parse().unwrap();
        for eps in [0.1, 0.05, 0.02, 0.01] {
            let g: PwlDensity = pwl_approximate(&f, eps, &Constants::default()).unwrap();
            let tv = tv_to_reference(&g, &f).unwrap();
            println!("{spec:<18} eps={eps:<5} pieces={:<4} tv={tv:.5}", g.piece_count());
        }
    }
}
