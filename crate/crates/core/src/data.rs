//! Data model for aligned time-series regression inputs and subsample
//! partitions.
//!
//! A `Partition` is an ordered set of disjoint 1-based half-open index
//! intervals over {1..T}. Partitions produced by constrained searches keep
//! every segment at least `floor(eps T)` long and the covered total at least
//! `floor(pi_l T)`; consecutive segments are separated by at least one
//! excluded point, otherwise they would describe the same subsample as their
//! union.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Aligned input series: outcome, endogenous policy variable, exogenous
/// regressors (may be empty), instruments, and an optional 0/1 policy
/// indicator marking announcement dates.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Array1<f64>,
    pub d: Array1<f64>,
    pub x: Array2<f64>,
    pub z: Array2<f64>,
    pub policy_indicator: Option<Vec<bool>>,
    /// column names as ingested, for diagnostics and round-tripping
    pub names: ColumnNames,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ColumnNames {
    pub outcome: String,
    pub endogenous: String,
    pub exogenous: Vec<String>,
    pub instruments: Vec<String>,
    pub policy: Option<String>,
}

impl ColumnNames {
    fn synthetic(p: usize, q: usize, policy: bool) -> Self {
        ColumnNames {
            outcome: "y".into(),
            endogenous: "d".into(),
            exogenous: (0..p).map(|j| format!("x{}", j + 1)).collect(),
            instruments: (0..q).map(|j| format!("z{}", j + 1)).collect(),
            policy: if policy { Some("policy".into()) } else { None },
        }
    }
}

impl Dataset {
    pub fn new(
        y: Array1<f64>,
        d: Array1<f64>,
        x: Array2<f64>,
        z: Array2<f64>,
        policy_indicator: Option<Vec<bool>>,
    ) -> Result<Self> {
        let t = y.len();
        let names = ColumnNames::synthetic(x.ncols(), z.ncols(), policy_indicator.is_some());
        let ds = Dataset { y, d, x, z, policy_indicator, names };
        ds.validate(t)?;
        Ok(ds)
    }

    fn validate(&self, t: usize) -> Result<()> {
        if self.d.len() != t
            || self.x.nrows() != t
            || self.z.nrows() != t
            || self.policy_indicator.as_ref().map_or(false, |p| p.len() != t)
        {
            return Err(Error::ingestion("series lengths differ"));
        }
        if self.z.ncols() == 0 {
            return Err(Error::ingestion("at least one instrument column is required"));
        }
        if t < self.p() + self.q() + 2 {
            return Err(Error::ingestion(format!(
                "sample too small: T = {} < p + q + 2 = {}",
                t,
                self.p() + self.q() + 2
            )));
        }
        let finite = self.y.iter().all(|v| v.is_finite())
            && self.d.iter().all(|v| v.is_finite())
            && self.x.iter().all(|v| v.is_finite())
            && self.z.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::ingestion("non-finite value in input series"));
        }
        Ok(())
    }

    pub fn t_len(&self) -> usize {
        self.y.len()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    /// Indices (0-based) of policy and control dates.
    pub fn policy_split(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let ind = self
            .policy_indicator
            .as_ref()
            .ok_or_else(|| Error::config("dataset has no policy-indicator column"))?;
        let mut pol = Vec::new();
        let mut ctl = Vec::new();
        for (i, &b) in ind.iter().enumerate() {
            if b {
                pol.push(i)
            } else {
                ctl.push(i)
            }
        }
        Ok((pol, ctl))
    }
}

/// Ordered list of disjoint half-open segments `[start, end)`, 1-based over
/// `{1..T}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    segments: Vec<(usize, usize)>,
    t_len: usize,
}

impl Partition {
    pub fn new(segments: Vec<(usize, usize)>, t_len: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::config("partition needs at least one segment"));
        }
        let mut prev_end = 0usize;
        for &(s, e) in &segments {
            if s < 1 || e > t_len + 1 || s >= e {
                return Err(Error::config(format!(
                    "segment [{}, {}) out of bounds for T = {}",
                    s, e, t_len
                )));
            }
            if s < prev_end {
                return Err(Error::config("segments must be increasing and disjoint"));
            }
            prev_end = e;
        }
        Ok(Partition { segments, t_len })
    }

    /// The single segment `[1, T+1)`; always admissible.
    pub fn full(t_len: usize) -> Self {
        Partition { segments: vec![(1, t_len + 1)], t_len }
    }

    pub fn segments(&self) -> &[(usize, usize)] {
        &self.segments
    }
    pub fn t_len(&self) -> usize {
        self.t_len
    }
    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }
    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|&(s, e)| e - s).sum()
    }
    pub fn is_full(&self) -> bool {
        self.segments.len() == 1 && self.segments[0] == (1, self.t_len + 1)
    }

    /// Covered fraction pi = |S|/T.
    pub fn pi(&self) -> f64 {
        self.total_len() as f64 / self.t_len as f64
    }

    /// Segment boundaries as fractions (start/T, end/T).
    pub fn lambda_bounds(&self) -> Vec<(f64, f64)> {
        let t = self.t_len as f64;
        self.segments.iter().map(|&(s, e)| ((s - 1) as f64 / t, (e - 1) as f64 / t)).collect()
    }

    /// 0-based row indices of the selected subsample, in time order.
    pub fn selected_rows(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.total_len());
        for &(s, e) in &self.segments {
            rows.extend(s - 1..e - 1);
        }
        rows
    }

    /// Membership mask over 0-based rows.
    pub fn mask(&self, t_len: usize) -> Vec<bool> {
        let mut m = vec![false; t_len];
        for &(s, e) in &self.segments {
            for i in s - 1..e - 1 {
                m[i] = true;
            }
        }
        m
    }

    /// Number of time points covered by exactly one of the two partitions.
    pub fn symmetric_difference(&self, other: &Partition) -> usize {
        let a = self.mask(self.t_len);
        let b = other.mask(self.t_len);
        a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        for (i, &(a, b)) in self.segments.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "[{},{})", a, b);
        }
        write!(f, "{}", s)
    }
}

/// Search-class constraints at sample scale. Floors are applied once here;
/// all downstream code works with the integer lengths.
#[derive(Debug, Clone, Copy)]
pub struct PartitionClass {
    pub t_len: usize,
    /// minimum segment length, floor(eps T), at least 1
    pub min_seg: usize,
    /// minimum covered total, floor(pi_l T)
    pub min_total: usize,
    /// maximum number of segments
    pub m_plus: usize,
}

impl PartitionClass {
    pub fn new(t_len: usize, eps: f64, pi_l: f64, m_plus: usize) -> Result<Self> {
        if !(eps > 0.0 && eps <= pi_l && pi_l <= 1.0) {
            return Err(Error::config("need 0 < eps <= pi_l <= 1"));
        }
        if m_plus == 0 {
            return Err(Error::config("m_plus must be >= 1"));
        }
        let min_seg = ((eps * t_len as f64).floor() as usize).max(1);
        let min_total = (pi_l * t_len as f64).floor() as usize;
        if min_total > t_len {
            return Err(Error::infeasible("floor(pi_l T) exceeds T"));
        }
        if min_total < min_seg {
            return Err(Error::infeasible("covered total below one admissible segment"));
        }
        Ok(PartitionClass { t_len, min_seg, min_total, m_plus })
    }
}

/// Enumerate every partition in the class exactly once (brute-force oracle).
/// Segments are separated by at least one excluded point. Fails when the
/// count exceeds `cap`, to keep oracle usage honest about feasibility.
pub fn enumerate_partitions(
    t_len: usize,
    eps: f64,
    pi_l: f64,
    m_plus: usize,
    cap: usize,
) -> Result<Vec<Partition>> {
    let class = PartitionClass::new(t_len, eps, pi_l, m_plus)?;
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    visit(&class, 1, 0, &mut stack, &mut |segs| {
        if out.len() >= cap {
            return Err(Error::config(format!("partition count exceeds cap {}", cap)));
        }
        out.push(Partition { segments: segs.to_vec(), t_len });
        Ok(())
    })?;
    Ok(out)
}

/// Enumerate partitions with exactly `m0` segments and exactly `total0`
/// covered points (the estimation class with pi_0 and m_0 known).
pub fn enumerate_partitions_exact(
    t_len: usize,
    min_seg: usize,
    m0: usize,
    total0: usize,
    cap: usize,
) -> Result<Vec<Partition>> {
    if m0 == 0 || min_seg == 0 {
        return Err(Error::config("m0 and min_seg must be >= 1"));
    }
    let class = PartitionClass { t_len, min_seg, min_total: total0, m_plus: m0 };
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    visit(&class, 1, 0, &mut stack, &mut |segs| {
        if segs.len() != m0 {
            return Ok(());
        }
        let tot: usize = segs.iter().map(|&(s, e)| e - s).sum();
        if tot != total0 {
            return Ok(());
        }
        if out.len() >= cap {
            return Err(Error::config(format!("partition count exceeds cap {}", cap)));
        }
        out.push(Partition { segments: segs.to_vec(), t_len });
        Ok(())
    })?;
    Ok(out)
}

fn visit(
    class: &PartitionClass,
    from: usize,
    covered: usize,
    stack: &mut Vec<(usize, usize)>,
    f: &mut impl FnMut(&[(usize, usize)]) -> Result<()>,
) -> Result<()> {
    if !stack.is_empty() && covered >= class.min_total {
        f(stack)?;
    }
    if stack.len() == class.m_plus {
        return Ok(());
    }
    // next segment [s, s+len), preceded by a gap if a segment exists
    let gap = if stack.is_empty() { 0 } else { 1 };
    let lo = from + gap;
    for s in lo..=class.t_len {
        for e in (s + class.min_seg)..=(class.t_len + 1) {
            stack.push((s, e));
            visit(class, e, covered + (e - s), stack, f)?;
            stack.pop();
        }
    }
    Ok(())
}

/// Count the class without materializing it.
pub fn count_partitions(t_len: usize, eps: f64, pi_l: f64, m_plus: usize) -> Result<u128> {
    let class = PartitionClass::new(t_len, eps, pi_l, m_plus)?;
    Ok(count_class(&class, false))
}

/// Count the exact-(m0, total0) estimation class.
pub fn count_partitions_exact(t_len: usize, min_seg: usize, m0: usize, total0: usize) -> u128 {
    let class = PartitionClass { t_len, min_seg, min_total: total0, m_plus: m0 };
    count_class(&class, true)
}

fn count_class(class: &PartitionClass, exact: bool) -> u128 {
    // forward DP over (uncovered h, segments j, position), with running
    // prefix sums making the segment transition O(1); each partition is
    // counted once at its last segment end
    let t = class.t_len;
    let m_max = class.m_plus;
    let h_max = t.saturating_sub(class.min_total);
    let min_seg = class.min_seg;
    let width = t + 1;
    // cnt_gap[j][pos] for the current h slab; cum_gap accumulates over pos
    let mut gap_prev = vec![0u128; (m_max + 1) * width];
    let mut gap_cur = vec![0u128; (m_max + 1) * width];
    let mut end_prev = vec![0u128; (m_max + 1) * width];
    let mut end_cur = vec![0u128; (m_max + 1) * width];
    let mut total: u128 = 0;
    for h in 0..=h_max {
        for v in gap_cur.iter_mut() {
            *v = 0;
        }
        for v in end_cur.iter_mut() {
            *v = 0;
        }
        if h == 0 {
            gap_cur[0] = 1;
        } else {
            for j in 0..=m_max {
                let row = j * width;
                for pos in h..=t {
                    gap_cur[row + pos] =
                        gap_prev[row + pos - 1].saturating_add(end_prev[row + pos - 1]);
                }
            }
        }
        for j in 1..=m_max {
            let prow = (j - 1) * width;
            let row = j * width;
            let mut cum: u128 = 0;
            for pos in min_seg..=t {
                cum = cum.saturating_add(gap_cur[prow + pos - min_seg]);
                end_cur[row + pos] = cum;
                if pos < h {
                    continue; // unreachable states; cum is zero here anyway
                }
                let covered = pos - h;
                let ok = if exact {
                    j == class.m_plus && covered == class.min_total
                } else {
                    covered >= class.min_total
                };
                if ok {
                    total = total.saturating_add(cum);
                }
            }
        }
        std::mem::swap(&mut gap_prev, &mut gap_cur);
        std::mem::swap(&mut end_prev, &mut end_cur);
    }
    total
}

/// Column blocks addressable through a `SelectionView`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Outcome,
    Endogenous,
    Exogenous,
    Instruments,
}

/// A partition paired with its dataset; exposes selected rows and the
/// within-subsample annihilator `M_{S X} S A`.
pub struct SelectionView<'a> {
    pub ds: &'a Dataset,
    pub partition: &'a Partition,
}

impl<'a> SelectionView<'a> {
    pub fn new(ds: &'a Dataset, partition: &'a Partition) -> Result<Self> {
        if partition.t_len() != ds.t_len() {
            return Err(Error::config("partition length does not match dataset"));
        }
        Ok(SelectionView { ds, partition })
    }

    fn block(&self, block: Block) -> Array2<f64> {
        match block {
            Block::Outcome => self.ds.y.view().insert_axis(ndarray::Axis(1)).to_owned(),
            Block::Endogenous => self.ds.d.view().insert_axis(ndarray::Axis(1)).to_owned(),
            Block::Exogenous => self.ds.x.clone(),
            Block::Instruments => self.ds.z.clone(),
        }
    }

    /// Selected rows of a column block, in time order.
    pub fn select(&self, block: Block) -> Array2<f64> {
        let a = self.block(block);
        let rows = self.partition.selected_rows();
        let mut out = Array2::zeros((rows.len(), a.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&a.row(r));
        }
        out
    }

    /// `M_{S X} S A`: selected rows of the block with the within-subsample
    /// least-squares projection onto the selected exogenous columns removed.
    /// Identity when p = 0; idempotent.
    pub fn residualize(&self, block: Block) -> Result<Array2<f64>> {
        let a = self.select(block);
        if self.ds.p() == 0 {
            return Ok(a);
        }
        let xs = self.select(Block::Exogenous);
        let (_, resid) = linalg::ols(&a, &xs).map_err(|_| {
            Error::singular(format!(
                "exogenous block rank-deficient on subsample {}",
                self.partition
            ))
        })?;
        Ok(resid)
    }
}

/// Column-role map for CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub outcome: String,
    pub endogenous: String,
    #[serde(default)]
    pub exogenous: Vec<String>,
    pub instruments: Vec<String>,
    #[serde(default)]
    pub policy: Option<String>,
}

/// Load a dataset from a UTF-8, comma-separated file with a header row.
/// Decimal point '.', no thousands separators; the policy column, when
/// declared, must contain only 0/1.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::ingestion(format!("{}: {}", path.as_ref().display(), e)))?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::ingestion("empty file"))?;
    let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    let find = |name: &str| -> Result<usize> {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::ingestion(format!("missing column '{}'", name)))
    };
    let iy = find(&schema.outcome)?;
    let id = find(&schema.endogenous)?;
    let ix: Vec<usize> = schema.exogenous.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let iz: Vec<usize> = schema.instruments.iter().map(|c| find(c)).collect::<Result<_>>()?;
    if iz.is_empty() {
        return Err(Error::ingestion("schema must declare at least one instrument column"));
    }
    let ip = schema.policy.as_ref().map(|c| find(c)).transpose()?;

    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut xs: Vec<Vec<f64>> = vec![Vec::new(); ix.len()];
    let mut zs: Vec<Vec<f64>> = vec![Vec::new(); iz.len()];
    let mut pol: Vec<bool> = Vec::new();

    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        let get = |idx: usize, role: &str| -> Result<f64> {
            let raw = fields.get(idx).copied().unwrap_or("");
            if raw.is_empty() {
                return Err(Error::ingestion(format!(
                    "row {}, column '{}': missing value",
                    lineno + 1,
                    cols.get(idx).copied().unwrap_or(role)
                )));
            }
            raw.parse::<f64>().map_err(|_| {
                Error::ingestion(format!(
                    "row {}, column '{}': non-numeric cell '{}'",
                    lineno + 1,
                    cols.get(idx).copied().unwrap_or(role),
                    raw
                ))
            })
        };
        y.push(get(iy, "outcome")?);
        d.push(get(id, "endogenous")?);
        for (k, &idx) in ix.iter().enumerate() {
            xs[k].push(get(idx, "exogenous")?);
        }
        for (k, &idx) in iz.iter().enumerate() {
            zs[k].push(get(idx, "instrument")?);
        }
        if let Some(idx) = ip {
            let v = get(idx, "policy")?;
            if v == 0.0 {
                pol.push(false);
            } else if v == 1.0 {
                pol.push(true);
            } else {
                return Err(Error::ingestion(format!(
                    "row {}, column '{}': policy indicator must be 0 or 1, got {}",
                    lineno + 1,
                    cols.get(idx).copied().unwrap_or("policy"),
                    v
                )));
            }
        }
    }

    let t = y.len();
    let x = columns_to_matrix(t, &xs);
    let z = columns_to_matrix(t, &zs);
    let names = ColumnNames {
        outcome: schema.outcome.clone(),
        endogenous: schema.endogenous.clone(),
        exogenous: schema.exogenous.clone(),
        instruments: schema.instruments.clone(),
        policy: schema.policy.clone(),
    };
    let ds = Dataset {
        y: Array1::from(y),
        d: Array1::from(d),
        x,
        z,
        policy_indicator: ip.map(|_| pol),
        names,
    };
    ds.validate(t)?;
    Ok(ds)
}

fn columns_to_matrix(t: usize, cols: &[Vec<f64>]) -> Array2<f64> {
    let mut m = Array2::zeros((t, cols.len()));
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}

/// Write a dataset back out in the ingestion format. Floats print in the
/// shortest representation that round-trips, so write -> load -> write is
/// byte-identical.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(&path, format_csv(ds))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sample_is_forced_when_pi_l_is_one() {
        let parts = enumerate_partitions(4, 0.25, 1.0, 1, 100).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], Partition::full(4));
    }

    #[test]
    fn single_segment_count_by_hand() {
        // contiguous segments of length >= 2 in {1..4}: six of them
        let parts = enumerate_partitions(4, 0.25, 0.5, 1, 100).unwrap();
        assert_eq!(parts.len(), 6);
    }

    #[test]
    fn dp_count_matches_enumeration() {
        for t in [6usize, 8, 10, 12] {
            for m_plus in [1usize, 2, 3] {
                for pi_l in [0.5f64, 0.75] {
                    let eps = 1.0 / t as f64;
                    let parts = enumerate_partitions(t, eps, pi_l, m_plus, 5_000_000).unwrap();
                    let count = count_partitions(t, eps, pi_l, m_plus).unwrap();
                    assert_eq!(parts.len() as u128, count, "t={} m+={} pi={}", t, m_plus, pi_l);
                }
            }
        }
    }

    #[test]
    fn exact_count_matches_exact_enumeration() {
        for t in [8usize, 10] {
            for m0 in [1usize, 2] {
                let total0 = t / 2;
                let parts = enumerate_partitions_exact(t, 2, m0, total0, 5_000_000).unwrap();
                let count = count_partitions_exact(t, 2, m0, total0);
                assert_eq!(parts.len() as u128, count, "t={} m0={}", t, m0);
            }
        }
    }

    #[test]
    fn partitions_are_unique_and_admissible() {
        let t = 10;
        let parts = enumerate_partitions(t, 0.2, 0.5, 2, 5_000_000).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in &parts {
            assert!(p.total_len() >= 5);
            assert!(p.num_segments() <= 2);
            for &(s, e) in p.segments() {
                assert!(e - s >= 2);
            }
            for w in p.segments().windows(2) {
                assert!(w[0].1 < w[1].0, "segments must leave a gap: {}", p);
            }
            assert!(seen.insert(format!("{}", p)), "duplicate {}", p);
        }
    }
}

pub fn format_csv(ds: &Dataset) -> String {
    let n = &ds.names;
    let mut header = vec![n.outcome.clone(), n.endogenous.clone()];
    header.extend(n.exogenous.iter().cloned());
    header.extend(n.instruments.iter().cloned());
    if let Some(p) = &n.policy {
        header.push(p.clone());
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..ds.t_len() {
        let mut fields = vec![ds.y[i].to_string(), ds.d[i].to_string()];
        for j in 0..ds.p() {
            fields.push(ds.x[[i, j]].to_string());
        }
        for j in 0..ds.q() {
            fields.push(ds.z[[i, j]].to_string());
        }
        if let Some(pol) = &ds.policy_indicator {
            fields.push(if pol[i] { "1".into() } else { "0".into() });
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod view_tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array1, Array2};

    fn toy() -> Dataset {
        let y = array![1.0, 2.0, 3.0, 4.0, 5.0];
        let d = array![2.0, 1.0, 2.0, 3.0, 2.0];
        let x = Array2::from_elem((5, 1), 1.0);
        let z = array![[1.0], [2.0], [3.0], [4.0], [5.0]];
        Dataset::new(y, d, x, z, None).unwrap()
    }

    #[test]
    fn residualize_demeans_against_intercept() {
        let ds = toy();
        let full = Partition::full(5);
        let view = SelectionView::new(&ds, &full).unwrap();
        let zt = view.residualize(Block::Instruments).unwrap();
        let want = [-2.0, -1.0, 0.0, 1.0, 2.0];
        for i in 0..5 {
            assert_relative_eq!(zt[[i, 0]], want[i], epsilon = 1e-12);
        }
        // annihilator property: x against x is zero
        let xt = view.residualize(Block::Exogenous).unwrap();
        assert!(xt.iter().all(|v| v.abs() < 1e-10));
        // idempotence through a second projection of the residual
        let (_, twice) = crate::linalg::ols(&zt, &view.select(Block::Exogenous)).unwrap();
        for i in 0..5 {
            assert_relative_eq!(twice[[i, 0]], zt[[i, 0]], epsilon = 1e-10);
        }
    }

    #[test]
    fn residualize_without_exogenous_is_identity() {
        let y = array![1.0, 2.0, 3.0, 4.0];
        let d = array![1.0, 0.0, 1.0, 0.0];
        let x = Array2::<f64>::zeros((4, 0));
        let z = array![[2.0], [3.0], [4.0], [5.0]];
        let ds = Dataset::new(y, d, x, z, None).unwrap();
        let p = Partition::new(vec![(2, 4)], 4).unwrap();
        let view = SelectionView::new(&ds, &p).unwrap();
        let zt = view.residualize(Block::Instruments).unwrap();
        assert_eq!(zt.nrows(), 2);
        assert_eq!(zt[[0, 0]], 3.0);
        assert_eq!(zt[[1, 0]], 4.0);
    }

    #[test]
    fn residualize_invariant_to_column_recombination() {
        let mut rng = crate::rng::stream_rng(11, 0);
        let t = 30;
        let mut x = Array2::<f64>::zeros((t, 2));
        let mut z = Array2::<f64>::zeros((t, 1));
        let mut y = Array1::<f64>::zeros(t);
        let mut d = Array1::<f64>::zeros(t);
        for i in 0..t {
            x[[i, 0]] = 1.0;
            x[[i, 1]] = crate::cv::standard_normal(&mut rng);
            z[[i, 0]] = crate::cv::standard_normal(&mut rng);
            y[i] = crate::cv::standard_normal(&mut rng);
            d[i] = crate::cv::standard_normal(&mut rng);
        }
        // invertible recombination of x columns
        let mut x2 = Array2::<f64>::zeros((t, 2));
        for i in 0..t {
            x2[[i, 0]] = 2.0 * x[[i, 0]] - x[[i, 1]];
            x2[[i, 1]] = 0.5 * x[[i, 0]] + 3.0 * x[[i, 1]];
        }
        let ds1 = Dataset::new(y.clone(), d.clone(), x, z.clone(), None).unwrap();
        let ds2 = Dataset::new(y, d, x2, z, None).unwrap();
        let p = Partition::new(vec![(3, 14), (18, 29)], t).unwrap();
        let v1 = SelectionView::new(&ds1, &p).unwrap().residualize(Block::Instruments).unwrap();
        let v2 = SelectionView::new(&ds2, &p).unwrap().residualize(Block::Instruments).unwrap();
        for i in 0..v1.nrows() {
            assert_relative_eq!(v1[[i, 0]], v2[[i, 0]], epsilon = 1e-8);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "y,d,z\n1.5,2.0,0.25\n-0.5,1.0,0.5\n2.5,0.0,0.75\n0.5,1.0,1.0\n1.0,2.0,1.25\n";
        let schema = CsvSchema {
            outcome: "y".into(),
            endogenous: "d".into(),
            exogenous: vec![],
            instruments: vec!["z".into()],
            policy: None,
        };
        let ds = parse_csv(text, &schema).unwrap();
        assert_eq!(ds.t_len(), 5);
        assert_eq!(ds.p(), 0);
        assert_eq!(ds.q(), 1);
        // write -> parse -> write is byte-identical
        let once = format_csv(&ds);
        let again = format_csv(&parse_csv(&once, &schema).unwrap());
        assert_eq!(once, again);

        let missing = "y,d,z\n1.0,,0.5\n";
        let err = parse_csv(missing, &schema).unwrap_err();
        assert!(format!("{}", err).contains("row 2"));
        assert!(format!("{}", err).contains("'d'"));

        let nonnum = "y,d,z\n1.0,2.0,abc\n";
        let err = parse_csv(nonnum, &schema).unwrap_err();
        assert!(format!("{}", err).contains("non-numeric"));

        let nocol = "y,d\n1.0,2.0\n";
        assert!(parse_csv(nocol, &schema).is_err());

        let schema_pol = CsvSchema { policy: Some("pol".into()), ..schema.clone() };
        let badpol = "y,d,z,pol\n1.0,2.0,0.5,2\n";
        assert!(parse_csv(badpol, &schema_pol).is_err());
    }

    #[test]
    fn too_small_sample_is_rejected() {
        let text = "y,d,z\n1.0,2.0,0.5\n2.0,1.0,0.25\n";
        let schema = CsvSchema {
            outcome: "y".into(),
            endogenous: "d".into(),
            exogenous: vec![],
            instruments: vec!["z".into()],
            policy: None,
        };
        let err = parse_csv(text, &schema).unwrap_err();
        assert!(format!("{}", err).contains("too small"));
    }
}
