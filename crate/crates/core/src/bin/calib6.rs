// Scratch: cross-check candidate configs against q=2 and q=5 table columns.
use pilate_core::cv::{quantile_type7, simulate_null_sup};

fn main() {
    let reps = 20000usize;
    // printed cells (q90, q95, q99) per (q, pi_l)
    let targets = [
        (1usize, 0.6, (6.92, 8.28, 11.63)),
        (1, 0.5, (7.44, 8.90, 12.27)),
        (2, 0.6, (4.76, 5.60, 7.28)),
        (2, 0.5, (5.18, 6.03, 7.91)),
        (5, 0.6, (3.14, 3.51, 4.37)),
        (5, 0.5, (3.35, 3.74, 4.56)),
        (2, 1.0, (2.32, 3.00, 4.60)),
        (5, 1.0, (1.80, 2.16, 2.99)),
    ];
    for (nb, m_plus) in [(80usize, 2usize), (50, 6), (60, 6)] {
        println!("== nb={} m+={}", nb, m_plus);
        let mut tot = 0.0;
        for &(q, pi_l, (t90, t95, t99)) in &targets {
            let mut v = simulate_null_sup(q, pi_l, m_plus, 0.05, nb, reps, 99).unwrap();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let d90 = quantile_type7(&v, 0.90) - t90;
            let d95 = quantile_type7(&v, 0.95) - t95;
            let d99 = quantile_type7(&v, 0.99) - t99;
            tot += d90.abs() + d95.abs() + d99.abs();
            println!("  q={} pi={:.1}: ({:+.2},{:+.2},{:+.2})", q, pi_l, d90, d95, d99);
        }
        println!("  total_abs_err={:.2}", tot);
    }
}
