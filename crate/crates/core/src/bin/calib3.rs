// Scratch: sweep (n, eps, m_plus) against printed anchors.
use pilate_core::cv::{quantile_type7, simulate_null_sup};

fn main() {
    let reps = 2000usize;
    println!("target @0.6:(6.92,8.28,11.63) @0.5:(7.44,8.90,12.27)");
    for n in [60usize, 100, 200] {
        for eps in [0.05f64, 0.10, 0.15] {
            for m_plus in [2usize, 6] {
                let mut line = format!("n={:4} eps={:.2} m+={} :", n, eps, m_plus);
                for pi_l in [0.6f64, 0.5] {
                    let mut v = simulate_null_sup(1, pi_l, m_plus, eps, n, reps, 42).unwrap();
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
        }
    }
}
