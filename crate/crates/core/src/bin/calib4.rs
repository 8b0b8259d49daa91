// Scratch: hypothesis — table simulated with break dates on the eps-grid
// (boundaries at multiples of eps). Law = class-A on n' = 1/eps steps.
use pilate_core::cv::{quantile_type7, simulate_null_sup};

fn main() {
    let reps = 30000usize;
    println!("targets  @0.6:(6.92,8.28,11.63) @0.5:(7.44,8.90,12.27) @1.0:(2.70,3.85,6.68)");
    let n = 20usize; // 1/eps with eps = 0.05
    for m_plus in [1usize, 2, 3, 4, 6] {
        let mut line = format!("n'={} m+={} :", n, m_plus);
        for pi_l in [0.6f64, 0.5, 1.0] {
            // eps on the coarse grid: one step
            let mut v = simulate_null_sup(1, pi_l, m_plus, 1.0 / n as f64, n, reps, 123).unwrap();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            line += &format!(
                "  @{:.1}:({:.2},{:.2},{:.2})",
                pi_l,
                quantile_type7(&v, 0.90),
                quantile_type7(&v, 0.95),
                quantile_type7(&v, 0.99)
            );
        }
        println!("{}", line);
    }
    // q anchors at pi_l = 1 for q = 2, 5 (chi2_q/q check)
    for q in [2usize, 5] {
        let mut v = simulate_null_sup(q, 1.0, 1, 0.05, n, reps, 7).unwrap();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "q={} @1.0: q95={:.3} (chi2_q(0.95)/q = {:.3})",
            q,
            quantile_type7(&v, 0.95),
            match q { 2 => 5.991 / 2.0, 5 => 11.07 / 5.0, _ => 0.0 }
        );
    }
}
