// Scratch calibration: m_plus sensitivity of null-sup quantiles.
use pilate_core::cv::{quantile_type7, simulate_null_sup};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let reps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let q: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1);
    println!("n={} reps={} q={}", n, reps, q);
    for pi_l in [0.5f64, 0.6, 1.0] {
        for m_plus in [1usize, 2, 3, 4, 5, 6] {
            let t0 = Instant::now();
            let mut v = simulate_null_sup(q, pi_l, m_plus, 0.05, n, reps, 42).unwrap();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q90 = quantile_type7(&v, 0.90);
            let q95 = quantile_type7(&v, 0.95);
            let q99 = quantile_type7(&v, 0.99);
            println!(
                "pi_l={:.2} m+={} q90={:.3} q95={:.3} q99={:.3}  ({:.1} ms/rep)",
                pi_l,
                m_plus,
                q90,
                q95,
                q99,
                t0.elapsed().as_secs_f64() * 1000.0 / reps as f64
            );
            if pi_l == 1.0 {
                break;
            }
        }
    }
}
