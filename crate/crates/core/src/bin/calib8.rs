// Scratch: criterion 5 (power) and criterion 6 (bias/MSE) pilots.
use pilate_core::estimate::EstimateConfig;
use pilate_core::fstar::SearchConfig;
use pilate_core::montecarlo::{bias_mse_beta, simulate_f_pair, size_power_f, DgpSpec};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(800);
    let which: String = args.get(2).cloned().unwrap_or_else(|| "power".into());

    if which == "power" {
        let mut null_spec = DgpSpec::linear_three_regime(200, 0.6, 20250808);
        null_spec.rho = 0.25;
        null_spec.rho_e = 0.25;
        null_spec.rho_u = 0.25;
        let mut alt = null_spec.with_outer_strength(12.0);
        alt.theta2 = -0.5;
        let search = SearchConfig { pi_l: 0.6, eps: 0.05, m_plus: 5, ..Default::default() };
        let t0 = Instant::now();
        let rep = size_power_f(
            &null_spec,
            &[("d12_theta2_neg0.5".to_string(), alt)],
            reps,
            &search,
            3.85,
            8.28,
            0.05,
        )
        .unwrap();
        println!("{}", rep.render_text());
        println!("targets: power_full 0.478, power_fstar 0.847  [{:.0} s]", t0.elapsed().as_secs_f64());
    } else {
        for d in [16.0f64, 32.0] {
            let mut spec = DgpSpec::linear_three_regime(200, 0.6, 99991).with_outer_strength(d);
            spec.rho = 0.25;
            spec.x_random = true;
            let est = EstimateConfig { pi0: 0.6, m0: 2, eps: 0.05, ..Default::default() };
            let t0 = Instant::now();
            let rep = bias_mse_beta(&spec, reps, &est).unwrap();
            let c = &rep.cells[0];
            println!(
                "d={}: mse_full={:.5} (tgt {}) mse_ols={:.5} (tgt {}) mse_fgls={:.5} bias_ols={:.5} [{:.0} s]",
                d,
                c.estimates["mse_full"],
                if d == 16.0 { "0.0119" } else { "0.0029" },
                c.estimates["mse_shat_ols"],
                if d == 16.0 { "0.0070" } else { "0.0016" },
                c.estimates["mse_shat_fgls"],
                c.estimates["bias_shat_ols"],
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
