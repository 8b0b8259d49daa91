// Scratch: refined calibration of the boundary grid against the full table.
use pilate_core::cv::{quantile_type7, simulate_null_sup};

fn main() {
    let reps = 20000usize;
    let printed_q1 = [
        (0.5, (7.44, 8.90, 12.27)),
        (0.6, (6.92, 8.28, 11.63)),
        (0.8, (5.51, 6.84, 9.73)),
        (1.0, (2.70, 3.85, 6.68)),
    ];
    for nb in [80usize, 100, 120] {
        for m_plus in [1usize, 2, 3] {
            let mut err_sum = 0.0;
            let mut lines = Vec::new();
            for &(pi_l, (t90, t95, t99)) in &printed_q1 {
                let mut v = simulate_null_sup(1, pi_l, m_plus, 0.05, nb, reps, 99).unwrap();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let (a, b, c) = (
                    quantile_type7(&v, 0.90),
                    quantile_type7(&v, 0.95),
                    quantile_type7(&v, 0.99),
                );
                err_sum += (a - t90).abs() + (b - t95).abs() + (c - t99).abs();
                lines.push(format!(
                    "   pi={:.1}: ({:+.2},{:+.2},{:+.2})",
                    pi_l, a - t90, b - t95, c - t99
                ));
            }
            println!("nb={} m+={} total_abs_err={:.2}", nb, m_plus, err_sum);
            for l in lines {
                println!("{}", l);
            }
        }
    }
}
