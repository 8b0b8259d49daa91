// Scratch: criterion-7 pilot — LM/CLR null size with estimated subsample, T=400.
use pilate_core::montecarlo::{size_power_robust, DgpSpec};
use pilate_core::robust::RobustConfig;
use std::time::Instant;

fn main() {
    let reps: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    for d in [4.0f64, 16.0] {
        let mut spec = DgpSpec::linear_three_regime(400, 0.6, 424242).with_outer_strength(d);
        spec.rho = 0.25;
        spec.gamma1 = 0.0;
        spec.gamma2 = 0.0;
        spec.beta = 0.0;
        let rcfg = RobustConfig::default();
        let t0 = Instant::now();
        let rep = size_power_robust(&spec, 0.0, reps, &rcfg).unwrap();
        let c = &rep.cells[0];
        println!(
            "d={}: lm_full={:.3} lm_shat={:.3} (tgt {}) clr_shat={:.3} (tgt {})  [{:.0}ms/rep]",
            d,
            c.estimates["lm_full"],
            c.estimates["lm_shat"],
            if d == 4.0 { "0.061" } else { "0.050" },
            c.estimates["clr_shat"],
            if d == 4.0 { "0.072" } else { "0.050" },
            t0.elapsed().as_secs_f64() * 1000.0 / reps as f64
        );
    }
}
