// Scratch: null-sup with interior gap blocks also constrained to >= eps*n.
// Variant B: leading/trailing gaps free; Variant C: leading/trailing in {0} or >= eps*n.
use pilate_core::cv::quantile_type7;
use pilate_core::rng::stream_rng;
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

const NEG: f64 = f64::NEG_INFINITY;

fn sup_variant(cum: &[f64], n: usize, eps: usize, lmin: usize, m: usize, gmin: usize, edge_free: bool) -> f64 {
    let width = n + 1;
    let hmax = n - lmin;
    // ring of h-slabs for gap-run shifts of gmin
    let depth = gmin.max(1) + 1;
    let mut end_ring = vec![vec![NEG; (m + 1) * width]; depth];
    let mut ready_ring = vec![vec![NEG; (m + 1) * width]; depth];
    let sq: Vec<f64> = cum.iter().map(|c| c * c).collect();
    let mut best = NEG;
    let mut scratch = vec![NEG; width];
    for h in 0..=hmax {
        let cur = h % depth;
        // split borrows of the ring
        let (ready_cur, ready_prev, end_prev_old) = {
            // clone needed values (experiment-grade simplicity)
            let rp = if h >= 1 { ready_ring[(h - 1) % depth].clone() } else { vec![NEG; (m + 1) * width] };
            let eo = if h >= gmin { end_ring[(h - gmin) % depth].clone() } else { vec![NEG; (m + 1) * width] };
            (&mut ready_ring[cur], rp, eo)
        };
        let end_cur = &mut end_ring[cur];
        for v in ready_cur.iter_mut() { *v = NEG; }
        for v in end_cur.iter_mut() { *v = NEG; }
        // ready[s][j]: may start a new segment at s+1.
        // leading gap: j=0 with h=s (edge_free) else h=s and (s==0 or s>=eps... for variant C)
        if h == 0 {
            ready_cur[0] = 0.0;
        }
        for j in 0..=m {
            let row = j * width;
            for s in h.max(1)..=n {
                let mut v = NEG;
                if j == 0 {
                    // pure leading gap of length s (=h)
                    if s == h && (edge_free || s >= gmin) { v = 0.0; }
                } else {
                    // extend an existing qualified gap by one more uncovered point
                    let a = ready_prev[row + s - 1];
                    if a > v { v = a; }
                    // or close a gap run of exactly gmin after a segment end
                    if h >= gmin && s >= gmin {
                        let b = end_prev_old[row + s - gmin];
                        if b > v { v = b; }
                    }
                }
                ready_cur[row + s] = v;
            }
        }
        for j in 1..=m {
            let prow = (j - 1) * width;
            let row = j * width;
            let mut s_lo = width;
            for s in 0..width {
                let g = ready_cur[prow + s];
                scratch[s] = if g > NEG { if s_lo == width { s_lo = s; } g + sq[s] } else { NEG };
            }
            if s_lo == width { continue; }
            for t in (s_lo + eps)..=n {
                let ct = cum[t];
                let mut acc = NEG;
                for s in s_lo..=(t - eps) {
                    let v = scratch[s] - 2.0 * ct * cum[s];
                    if v > acc { acc = v; }
                }
                if acc > NEG {
                    let val = acc + sq[t];
                    end_cur[row + t] = val;
                    let trail = n - t;
                    let ok_trail = trail == 0 || edge_free || trail >= gmin;
                    let len = t - h;
                    if ok_trail && len >= lmin && n - len == h + trail {
                        // h counts uncovered among 1..t; total gaps = h + trail
                        let tot_h = h + trail;
                        if tot_h <= hmax {
                            let obj = val / len as f64;
                            if obj > best { best = obj; }
                        }
                    }
                }
            }
        }
    }
    best
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let reps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let edge_free: bool = args.get(3).map(|s| s == "B").unwrap_or(true);
    let eps = (0.05 * n as f64).ceil() as usize;
    println!("n={} reps={} variant={}", n, reps, if edge_free { "B" } else { "C" });
    for pi_l in [0.5f64, 0.6] {
        for m_plus in [2usize, 3, 5, 6] {
            let lmin = (pi_l * n as f64).floor() as usize;
            let t0 = Instant::now();
            let mut v: Vec<f64> = (0..reps).into_par_iter().map(|r| {
                let mut rng = stream_rng(42, r as u64);
                let mut cum = vec![0.0f64; n + 1];
                let mut acc = 0.0;
                for t in 1..=n {
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen::<f64>();
                    acc += (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    cum[t] = acc;
                }
                sup_variant(&cum, n, eps, lmin, m_plus, eps, edge_free)
            }).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!(
                "pi_l={:.2} m+={} q90={:.3} q95={:.3} q99={:.3} ({:.1} ms/rep)",
                pi_l, m_plus,
                quantile_type7(&v, 0.90), quantile_type7(&v, 0.95), quantile_type7(&v, 0.99),
                t0.elapsed().as_secs_f64() * 1000.0 / reps as f64
            );
        }
    }
}
