//! Dynamic program over gapped partitions with precomputed per-segment
//! scores.
//!
//! States are (position, segments-used, uncovered-count). Tracking the
//! uncovered count rather than the covered length keeps the segment
//! transition within one slab: covering points never changes the number of
//! uncovered ones. The DP maximizes the sum of segment scores for every
//! reachable (covered-length, segment-count) cell; ratio objectives and
//! degrees-of-freedom scalings are applied by the callers on the per-length
//! profile.
//!
//! Exact sample statistics couple segments through a joint annihilator and a
//! joint long-run variance, so the additive score is a surrogate; callers
//! re-score the best per-length candidates exactly and keep the winner.

use crate::data::{Partition, PartitionClass};
use crate::error::{Error, Result};

pub const NEG: f64 = f64::NEG_INFINITY;

/// Per-segment scores for half-open 0-based segments `[start, end)`.
/// `NEG` marks inadmissible segments.
#[derive(Debug, Clone)]
pub struct SegmentScores {
    t_len: usize,
    min_seg: usize,
    flat: Vec<f64>, // [end * (t_len + 1) + start]
}

impl SegmentScores {
    pub fn new(t_len: usize, min_seg: usize) -> Self {
        SegmentScores { t_len, min_seg, flat: vec![NEG; (t_len + 1) * (t_len + 1)] }
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }
    pub fn min_seg(&self) -> usize {
        self.min_seg
    }

    #[inline]
    pub fn set(&mut self, start: usize, end: usize, score: f64) {
        self.flat[end * (self.t_len + 1) + start] = score;
    }

    #[inline]
    pub fn get(&self, start: usize, end: usize) -> f64 {
        self.flat[end * (self.t_len + 1) + start]
    }

    fn row(&self, end: usize) -> &[f64] {
        let w = self.t_len + 1;
        &self.flat[end * w..end * w + w]
    }

    /// Fill from a closure; segments shorter than `min_seg` stay inadmissible.
    pub fn fill(t_len: usize, min_seg: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = SegmentScores::new(t_len, min_seg);
        for end in min_seg..=t_len {
            for start in 0..=(end - min_seg) {
                s.set(start, end, f(start, end));
            }
        }
        s
    }

    /// Total score of a partition under these scores; `NEG` if any segment
    /// is inadmissible.
    pub fn partition_score(&self, p: &Partition) -> f64 {
        let mut tot = 0.0;
        for &(s1, e1) in p.segments() {
            let v = self.get(s1 - 1, e1 - 1);
            if v == NEG {
                return NEG;
            }
            tot += v;
        }
        tot
    }
}

/// One admissible optimum extracted from the DP tables.
#[derive(Debug, Clone)]
pub struct DpCandidate {
    pub partition: Partition,
    pub segments_used: usize,
    pub covered: usize,
    pub score_sum: f64,
}

/// Result tables of a DP run.
pub struct DpRun {
    class: PartitionClass,
    min_seg: usize,
    h_max: usize,
    m_max: usize,
    width: usize,
    /// end[h][j][pos]: best config whose last segment ends exactly at pos
    end_vals: Vec<f64>,
    /// chosen segment start for each end state
    end_parent: Vec<u32>,
    /// optional retained gap-value slice for one fixed j: [h][pos]
    gap_slice_j: Option<usize>,
    gap_slice: Vec<f64>,
}

/// Run the DP. `keep_gap_for_j` retains the gap-value slice for one segment
/// count, enabling exact-cell candidate queries for m0 = that count + 1.
pub fn run_dp(
    scores: &SegmentScores,
    class: &PartitionClass,
    keep_gap_for_j: Option<usize>,
) -> DpRun {
    let t = class.t_len;
    let width = t + 1;
    let m_max = class.m_plus;
    let h_max = t - class.min_total;
    let min_seg = class.min_seg.max(scores.min_seg());

    let mut end_vals = vec![NEG; (h_max + 1) * (m_max + 1) * width];
    let mut end_parent = vec![0u32; (h_max + 1) * (m_max + 1) * width];
    let mut gap_slice =
        if keep_gap_for_j.is_some() { vec![NEG; (h_max + 1) * width] } else { Vec::new() };

    let mut gap_prev = vec![NEG; (m_max + 1) * width];
    let mut gap_cur = vec![NEG; (m_max + 1) * width];

    let eindex = |h: usize, j: usize, pos: usize| (h * (m_max + 1) + j) * width + pos;

    for h in 0..=h_max {
        for v in gap_cur.iter_mut() {
            *v = NEG;
        }
        if h == 0 {
            gap_cur[0] = 0.0; // j = 0, pos = 0: virtual origin
        } else {
            for j in 0..=m_max {
                let row = j * width;
                for pos in h..=t {
                    let g = gap_prev[row + pos - 1];
                    let e = end_vals[eindex(h - 1, j, pos - 1)];
                    gap_cur[row + pos] = if g >= e { g } else { e };
                }
            }
        }
        if let Some(jk) = keep_gap_for_j {
            if jk <= m_max {
                let row = jk * width;
                gap_slice[h * width..(h + 1) * width]
                    .copy_from_slice(&gap_cur[row..row + width]);
            }
        }
        for j in 1..=m_max {
            let prow = (j - 1) * width;
            let mut a_lo = width;
            for a in 0..width {
                if gap_cur[prow + a] != NEG {
                    a_lo = a;
                    break;
                }
            }
            if a_lo == width || a_lo + min_seg > t {
                continue;
            }
            for pos in (a_lo + min_seg)..=t {
                let wrow = scores.row(pos);
                let gaps = &gap_cur[prow..prow + width];
                let mut best = NEG;
                let mut arg = 0usize;
                for a in a_lo..=(pos - min_seg) {
                    let v = gaps[a] + wrow[a];
                    if v > best {
                        best = v;
                        arg = a;
                    }
                }
                if best != NEG {
                    let idx = eindex(h, j, pos);
                    end_vals[idx] = best;
                    end_parent[idx] = arg as u32;
                }
            }
        }
        std::mem::swap(&mut gap_prev, &mut gap_cur);
    }

    DpRun {
        class: *class,
        min_seg,
        h_max,
        m_max,
        width,
        end_vals,
        end_parent,
        gap_slice_j: keep_gap_for_j,
        gap_slice,
    }
}

impl DpRun {
    #[inline]
    fn eidx(&self, h: usize, j: usize, pos: usize) -> usize {
        (h * (self.m_max + 1) + j) * self.width + pos
    }

    #[inline]
    fn end_val(&self, h: usize, j: usize, pos: usize) -> f64 {
        self.end_vals[self.eidx(h, j, pos)]
    }

    /// Best score for exactly `covered` points over all m <= m_plus.
    pub fn best_for_length(&self, covered: usize) -> Option<DpCandidate> {
        let t = self.class.t_len;
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for j in 1..=self.m_max {
            for pos in covered..=t {
                let h = pos - covered;
                if h > self.h_max {
                    break;
                }
                let v = self.end_val(h, j, pos);
                if v == NEG {
                    continue;
                }
                if best.map_or(true, |(bv, _, _, _)| v > bv) {
                    best = Some((v, h, j, pos));
                }
            }
        }
        best.map(|(v, h, j, pos)| DpCandidate {
            partition: self.traceback(h, j, pos),
            segments_used: j,
            covered,
            score_sum: v,
        })
    }

    /// Per-length profile: best candidate for every admissible covered
    /// length at or above the class minimum.
    pub fn length_profile(&self) -> Vec<DpCandidate> {
        (self.class.min_total..=self.class.t_len)
            .filter_map(|covered| self.best_for_length(covered))
            .collect()
    }

    /// Top-k configurations with exactly `m0` segments and exactly
    /// `covered0` points, diversified over the last segment. Requires the
    /// retained gap slice for `m0 - 1`.
    pub fn exact_cell_candidates(
        &self,
        scores: &SegmentScores,
        m0: usize,
        covered0: usize,
        k: usize,
    ) -> Result<Vec<DpCandidate>> {
        if m0 == 0 || self.gap_slice_j != Some(m0 - 1) {
            return Err(Error::config("gap slice for m0 - 1 was not retained"));
        }
        let t = self.class.t_len;
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for pos in covered0..=t {
            let h = pos - covered0;
            if h > self.h_max {
                break;
            }
            if pos < self.min_seg {
                continue;
            }
            let grow = &self.gap_slice[h * self.width..(h + 1) * self.width];
            let wrow = scores.row(pos);
            for a in 0..=(pos - self.min_seg) {
                let g = grow[a];
                if g == NEG {
                    continue;
                }
                let v = g + wrow[a];
                if v != NEG {
                    cands.push((v, a, pos));
                }
            }
        }
        cands.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
        cands.truncate(k);
        let mut out = Vec::new();
        for (v, a, pos) in cands {
            let h = pos - covered0;
            let mut segs = vec![(a, pos)];
            self.extend_via_gap(h, m0 - 1, a, &mut segs)?;
            segs.reverse();
            let partition =
                Partition::new(segs.iter().map(|&(s, e)| (s + 1, e + 1)).collect(), t)?;
            out.push(DpCandidate {
                partition,
                segments_used: m0,
                covered: covered0,
                score_sum: v,
            });
        }
        Ok(out)
    }

    /// Predecessor end state realizing gap value at (h, j, a): scans the
    /// unrolled recurrence `gap[h][j][a] = max_e end[h-(a-e)][j][e]`, with
    /// the pure-leading-gap base case for j = 0. Max chains copy values
    /// verbatim, so the realizing state matches bitwise.
    fn gap_argmax(&self, h: usize, j: usize, a: usize) -> Option<(usize, usize)> {
        let mut best = NEG;
        let mut arg = None;
        let e_lo = a.saturating_sub(h);
        for e in (e_lo..a).rev() {
            let dh = a - e;
            if dh > h {
                break;
            }
            let v = self.end_val(h - dh, j, e);
            if v > best {
                best = v;
                arg = Some((h - dh, e));
            }
        }
        if j == 0 && h == a && 0.0 > best {
            return None; // chain terminates at the origin
        }
        arg
    }

    fn traceback(&self, h: usize, j: usize, pos: usize) -> Partition {
        let mut segs: Vec<(usize, usize)> = Vec::new();
        let mut h = h;
        let mut j = j;
        let mut pos = pos;
        loop {
            let a = self.end_parent[self.eidx(h, j, pos)] as usize;
            segs.push((a, pos));
            if j == 1 {
                break;
            }
            match self.gap_argmax(h, j - 1, a) {
                Some((h2, e)) => {
                    h = h2;
                    j -= 1;
                    pos = e;
                }
                None => break,
            }
        }
        segs.reverse();
        let segments = segs.iter().map(|&(s, e)| (s + 1, e + 1)).collect();
        Partition::new(segments, self.class.t_len).expect("traceback yields a valid partition")
    }

    fn extend_via_gap(
        &self,
        h: usize,
        j: usize,
        a: usize,
        segs: &mut Vec<(usize, usize)>,
    ) -> Result<()> {
        if j == 0 {
            if h != a {
                return Err(Error::config("inconsistent gap chain"));
            }
            return Ok(());
        }
        match self.gap_argmax(h, j, a) {
            Some((h2, e)) => {
                let p = self.traceback(h2, j, e);
                for &(s1, e1) in p.segments().iter().rev() {
                    segs.push((s1 - 1, e1 - 1));
                }
                Ok(())
            }
            None => Err(Error::config("gap chain predecessor not found")),
        }
    }
}
