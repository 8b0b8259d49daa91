use pilate_core::data::count_partitions;
fn main() {
    for t in [16usize, 20, 24] {
        let eps = 2.0 / t as f64;
        for m in [1usize, 2] {
            let c_m2 = count_partitions(t, eps, eps, m).unwrap();   // pi in (eps,1]
            let c_f = count_partitions(t, eps, 0.5, m).unwrap();    // pi_l = 0.5
            println!("t={} m+={}: m2-class={} fstar-class={}", t, m, c_m2, c_f);
        }
    }
}
