// Scratch: F* null machinery on an exactly-Brownian moment series.
use ndarray::{Array1, Array2};
use pilate_core::cv::{quantile_type7, standard_normal};
use pilate_core::data::Dataset;
use pilate_core::fstar::{fstar_search, SearchConfig};
use pilate_core::rng::stream_rng;
use rayon::prelude::*;

fn main() {
    let reps = 2000usize;
    let t = 200usize;
    let cfg = SearchConfig { pi_l: 0.6, eps: 0.05, m_plus: 5, ..Default::default() };
    let mut vals: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(31337, r as u64);
            let mut z = Array2::zeros((t, 1));
            for i in 0..t {
                z[[i, 0]] = standard_normal(&mut rng);
            }
            let d = Array1::from_elem(t, 1.0);
            let y = d.clone();
            let x = Array2::zeros((t, 0));
            let ds = Dataset::new(y, d, x, z, None).unwrap();
            fstar_search(&ds, &cfg).unwrap().value
        })
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "iid-moment F*: q90={:.2} q95={:.2} q99={:.2} P(>8.28)={:.3}  (Brownian n=200 analog: q95=9.28)",
        quantile_type7(&vals, 0.90),
        quantile_type7(&vals, 0.95),
        quantile_type7(&vals, 0.99),
        vals.iter().filter(|v| **v > 8.28).count() as f64 / reps as f64
    );
}
