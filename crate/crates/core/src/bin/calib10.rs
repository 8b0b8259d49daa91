// Scratch: beta on subsample via selected-rows IV vs zero-filled IV.
use pilate_core::data::SelectionView;
use pilate_core::estimate::{beta_on_subsample, shat_ols, EstimateConfig};
use pilate_core::linalg::{tsls, HacConfig};
use pilate_core::montecarlo::{gen_dataset_with, DgpSpec};
use pilate_core::rng::stream_rng;
use rayon::prelude::*;
use ndarray::{Array1, Array2};

fn main() {
    let reps = 800usize;
    for d in [16.0f64, 32.0] {
        let mut spec = DgpSpec::linear_three_regime(200, 0.6, 99991).with_outer_strength(d);
        spec.rho = 0.25;
        spec.x_random = true;
        let est = EstimateConfig { pi0: 0.6, m0: 2, eps: 0.05, ..Default::default() };
        let rows: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(spec.seed, r as u64);
                let ds = gen_dataset_with(&spec, &mut rng).unwrap();
                let fit = shat_ols(&ds, &est).unwrap();
                let zf = beta_on_subsample(&ds, &fit.partition, &HacConfig::default()).unwrap().0;
                // selected-rows variant
                let view = SelectionView::new(&ds, &fit.partition).unwrap();
                let rows_idx = fit.partition.selected_rows();
                let n = rows_idx.len();
                let mut y = Array1::zeros(n);
                let mut dd = Array1::zeros(n);
                let mut x = Array2::zeros((n, ds.p()));
                let mut z = Array2::zeros((n, 1));
                for (i, &ri) in rows_idx.iter().enumerate() {
                    y[i] = ds.y[ri];
                    dd[i] = ds.d[ri];
                    for j in 0..ds.p() { x[[i, j]] = ds.x[[ri, j]]; }
                    z[[i, 0]] = ds.z[[ri, 0]];
                }
                let _ = view;
                let sel = tsls(&y, &dd, &x, &z, &HacConfig::default()).unwrap().beta;
                (zf, sel)
            })
            .collect();
        let mse = |get: &dyn Fn(&(f64, f64)) -> f64| {
            rows.iter().map(|r| (get(r) - 1.0) * (get(r) - 1.0)).sum::<f64>() / reps as f64
        };
        println!(
            "d={}: zero_filled={:.5} selected_rows={:.5} (paper {})",
            d,
            mse(&|r| r.0),
            mse(&|r| r.1),
            if d == 16.0 { "0.0070" } else { "0.0016" }
        );
    }
}
