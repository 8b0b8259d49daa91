// Scratch: micro-timing of the search components.
use pilate_core::data::{count_partitions, Partition, PartitionClass};
use pilate_core::dp::run_dp;
use pilate_core::fstar::{f_stat_exact, fstar_search, segment_score_table, LrvMode, SearchConfig};
use pilate_core::montecarlo::{gen_dataset_with, DgpSpec};
use pilate_core::rng::stream_rng;
use std::time::Instant;

fn main() {
    let mut spec = DgpSpec::linear_three_regime(200, 0.6, 20250808);
    spec.rho = 0.25; spec.rho_e = 0.25; spec.rho_u = 0.25;
    let mut rng = stream_rng(1, 1);
    let ds = gen_dataset_with(&spec, &mut rng).unwrap();
    let cfg = SearchConfig { pi_l: 0.6, eps: 0.05, m_plus: 5, lrv_mode: LrvMode::FullSample, center_lrv: true, ..Default::default() };

    let t0 = Instant::now();
    for _ in 0..50 { let _ = count_partitions(200, 0.05, 0.6, 5).unwrap(); }
    println!("count_partitions: {:.2} ms", t0.elapsed().as_secs_f64() * 20.0);

    let t0 = Instant::now();
    let scores = segment_score_table(&ds, 0.05, &cfg).unwrap();
    println!("segment_score_table: {:.2} ms", t0.elapsed().as_secs_f64() * 1000.0);

    let class = PartitionClass::new(200, 0.05, 0.6, 5).unwrap();
    let t0 = Instant::now();
    let dp = run_dp(&scores, &class, None);
    println!("run_dp: {:.2} ms", t0.elapsed().as_secs_f64() * 1000.0);

    let t0 = Instant::now();
    let profile = dp.length_profile();
    println!("length_profile ({} entries): {:.2} ms", profile.len(), t0.elapsed().as_secs_f64() * 1000.0);

    let t0 = Instant::now();
    for _ in 0..20 { let _ = f_stat_exact(&ds, &Partition::full(200), &cfg).unwrap(); }
    println!("f_stat_exact(full): {:.3} ms", t0.elapsed().as_secs_f64() * 50.0);

    let t0 = Instant::now();
    let r = fstar_search(&ds, &cfg).unwrap();
    println!("fstar_search: {:.2} ms (value {:.3})", t0.elapsed().as_secs_f64() * 1000.0, r.value);
}
