//! Estimation of the most strongly-identified subsample and of the
//! structural coefficient on it.
//!
//! The OLS criterion minimizes the reduced-form sum of squared residuals of
//! the endogenous variable on the zero-filled instruments and the exogenous
//! block. The FGLS criterion weights the stacked two-equation residuals by
//! the inverse of the error covariance estimated from an OLS pilot stage.
//! With the weight restricted to Sigma (x) I_T and identical regressors in
//! both equations, the GLS estimator reduces to equation-by-equation OLS,
//! so the criterion is the Sigma^{-1}-weighted trace of the residual
//! cross-product matrix.
//!
//! Both criteria couple segments through the common first-stage coefficient
//! and the jointly fitted exogenous block. The search therefore uses a
//! segment-additive surrogate (per-segment fit decrements after a one-shot
//! global partialling of x) and re-scores the leading candidates exactly.

use crate::data::{
    count_partitions_exact, enumerate_partitions_exact, Dataset, Partition, PartitionClass,
};
use crate::dp::{run_dp, SegmentScores, NEG};
use crate::error::{Error, Result};
use crate::linalg::{self, HacConfig};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimationMethod {
    Ols,
    Fgls,
}

/// Configuration of the subsample estimators. The class has exactly `m0`
/// segments and exactly floor(pi0 T) covered points unless `exact_length`
/// is cleared, in which case the covered total may exceed the floor.
#[derive(Debug, Clone)]
pub struct EstimateConfig {
    pub pi0: f64,
    pub m0: usize,
    pub eps: f64,
    pub hac: HacConfig,
    pub top_k: usize,
    pub enumeration_cap: u128,
    pub exact_length: bool,
    /// override of the FGLS weight (testing hook); estimated from the OLS
    /// pilot when absent
    pub sigma_override: Option<Array2<f64>>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            pi0: 0.6,
            m0: 2,
            eps: 0.05,
            hac: HacConfig::default(),
            top_k: 10,
            enumeration_cap: 20_000,
            exact_length: true,
            sigma_override: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub partition: Partition,
    pub criterion_value: f64,
    pub method: EstimationMethod,
    pub sigma_eps: Option<Array2<f64>>,
    pub warnings: Vec<String>,
}

/// Zero-filled instrument block: rows outside the partition are zero.
pub fn zero_filled_instruments(ds: &Dataset, p: &Partition) -> Array2<f64> {
    let mask = p.mask(ds.t_len());
    let mut z = ds.z.clone();
    for (i, &keep) in mask.iter().enumerate() {
        if !keep {
            for j in 0..z.ncols() {
                z[[i, j]] = 0.0;
            }
        }
    }
    z
}

/// Exact reduced-form SSR of d on [C_S z : x] over the full sample.
pub fn ols_criterion(ds: &Dataset, p: &Partition) -> Result<f64> {
    let zf = zero_filled_instruments(ds, p);
    let w = concat_cols(&zf, &ds.x);
    let dmat = ds.d.view().insert_axis(Axis(1)).to_owned();
    let (_, resid) = linalg::ols(&dmat, &w)?;
    Ok(resid.iter().map(|v| v * v).sum())
}

/// Exact FGLS criterion: Sigma^{-1}-weighted residual cross-products of the
/// stacked [y : d] system on [C_S z : x].
pub fn fgls_criterion(ds: &Dataset, p: &Partition, sigma_inv: &Array2<f64>) -> Result<f64> {
    let zf = zero_filled_instruments(ds, p);
    let w = concat_cols(&zf, &ds.x);
    let ymat = stack_yd(ds);
    let (_, resid) = linalg::ols(&ymat, &w)?;
    let mut e = [[0.0f64; 2]; 2];
    for t in 0..resid.nrows() {
        let r0 = resid[[t, 0]];
        let r1 = resid[[t, 1]];
        e[0][0] += r0 * r0;
        e[0][1] += r0 * r1;
        e[1][1] += r1 * r1;
    }
    e[1][0] = e[0][1];
    let mut crit = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            crit += sigma_inv[[i, j]] * e[i][j];
        }
    }
    Ok(crit)
}

fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut out = Array2::<f64>::zeros((n, a.ncols() + b.ncols()));
    for j in 0..a.ncols() {
        out.column_mut(j).assign(&a.column(j));
    }
    for j in 0..b.ncols() {
        out.column_mut(a.ncols() + j).assign(&b.column(j));
    }
    out
}

fn stack_yd(ds: &Dataset) -> Array2<f64> {
    let t = ds.t_len();
    let mut out = Array2::<f64>::zeros((t, 2));
    out.column_mut(0).assign(&ds.y);
    out.column_mut(1).assign(&ds.d);
    out
}

/// Globally partial x out of a block (identity when p = 0).
fn partial_x(ds: &Dataset, block: &Array2<f64>) -> Result<Array2<f64>> {
    if ds.p() == 0 {
        return Ok(block.clone());
    }
    let (_, r) = linalg::ols(block, &ds.x)?;
    Ok(r)
}

/// Prefix sums of z-bar cross-moments with a set of response columns.
/// Entry layout per boundary: q*q for the Gram block, then q per response.
struct Prefixes {
    q: usize,
    resp: usize,
    stride: usize,
    data: Vec<f64>,
}

impl Prefixes {
    fn build(zbar: &Array2<f64>, responses: &[&Array1<f64>]) -> Self {
        let t = zbar.nrows();
        let q = zbar.ncols();
        let resp = responses.len();
        let stride = q * q + q * resp;
        let mut data = vec![0.0f64; (t + 1) * stride];
        for row in 0..t {
            let (prev, cur) = data.split_at_mut((row + 1) * stride);
            let prev = &prev[row * stride..];
            let cur = &mut cur[..stride];
            cur.copy_from_slice(&prev[..stride]);
            for i in 0..q {
                let zi = zbar[[row, i]];
                for j in 0..q {
                    cur[i * q + j] += zi * zbar[[row, j]];
                }
                for (r, y) in responses.iter().enumerate() {
                    cur[q * q + r * q + i] += zi * y[row];
                }
            }
        }
        Prefixes { q, resp, stride, data }
    }

    fn gram(&self, a: usize, b: usize, out: &mut [f64]) {
        let pa = &self.data[a * self.stride..];
        let pb = &self.data[b * self.stride..];
        for k in 0..self.q * self.q {
            out[k] = pb[k] - pa[k];
        }
    }

    fn moment(&self, a: usize, b: usize, r: usize, out: &mut [f64]) {
        let off = self.q * self.q + r * self.q;
        let pa = &self.data[a * self.stride..];
        let pb = &self.data[b * self.stride..];
        for k in 0..self.q {
            out[k] = pb[off + k] - pa[off + k];
        }
    }

    fn check(&self) -> Result<()> {
        if self.resp == 0 {
            return Err(Error::config("prefix table needs at least one response"));
        }
        Ok(())
    }
}

/// Per-segment OLS fit decrements on globally x-partialled series:
/// `w(a,b) = s' G^{-1} s` with `s = sum z-bar d-bar` and `G = sum z-bar z-bar'`.
fn ols_decrement_scores(ds: &Dataset, min_seg: usize) -> Result<SegmentScores> {
    let zbar = partial_x(ds, &ds.z)?;
    let dbar = partial_x(ds, &ds.d.view().insert_axis(Axis(1)).to_owned())?.column(0).to_owned();
    let t = ds.t_len();
    let q = ds.q();
    let pref = Prefixes::build(&zbar, &[&dbar]);
    pref.check()?;
    let mut scores = SegmentScores::new(t, min_seg);
    let mut g = vec![0.0f64; q * q];
    let mut s = vec![0.0f64; q];
    for end in min_seg..=t {
        for start in 0..=(end - min_seg) {
            if end - start <= q {
                continue;
            }
            pref.gram(start, end, &mut g);
            pref.moment(start, end, 0, &mut s);
            if q == 1 {
                if g[0] > 0.0 {
                    scores.set(start, end, s[0] * s[0] / g[0]);
                }
                continue;
            }
            if let Some(u) = linalg::chol_solve_small(&g, &s, q) {
                let v: f64 = s.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                scores.set(start, end, v);
            }
        }
    }
    Ok(scores)
}

/// FGLS surrogate scores: Sigma^{-1}-weighted decrements for the stacked
/// system.
fn fgls_decrement_scores(
    ds: &Dataset,
    min_seg: usize,
    sigma_inv: &Array2<f64>,
) -> Result<SegmentScores> {
    let zbar = partial_x(ds, &ds.z)?;
    let ybar = partial_x(ds, &stack_yd(ds))?;
    let y0 = ybar.column(0).to_owned();
    let y1 = ybar.column(1).to_owned();
    let t = ds.t_len();
    let q = ds.q();
    let pref = Prefixes::build(&zbar, &[&y0, &y1]);
    pref.check()?;
    let mut scores = SegmentScores::new(t, min_seg);
    let mut g = vec![0.0f64; q * q];
    let mut s1 = vec![0.0f64; q];
    let mut s2 = vec![0.0f64; q];
    for end in min_seg..=t {
        for start in 0..=(end - min_seg) {
            if end - start <= q {
                continue;
            }
            pref.gram(start, end, &mut g);
            pref.moment(start, end, 0, &mut s1);
            pref.moment(start, end, 1, &mut s2);
            let (d11, d12, d22) = if q == 1 {
                if g[0] <= 0.0 {
                    continue;
                }
                (s1[0] * s1[0] / g[0], s1[0] * s2[0] / g[0], s2[0] * s2[0] / g[0])
            } else {
                let u1 = match linalg::chol_solve_small(&g, &s1, q) {
                    Some(u) => u,
                    None => continue,
                };
                let u2 = match linalg::chol_solve_small(&g, &s2, q) {
                    Some(u) => u,
                    None => continue,
                };
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                (dot(&s1, &u1), dot(&s1, &u2), dot(&s2, &u2))
            };
            let v = sigma_inv[[0, 0]] * d11
                + 2.0 * sigma_inv[[0, 1]] * d12
                + sigma_inv[[1, 1]] * d22;
            scores.set(start, end, v);
        }
    }
    Ok(scores)
}

fn class_for(ds: &Dataset, cfg: &EstimateConfig) -> Result<(PartitionClass, usize)> {
    let t = ds.t_len();
    let min_seg = ((cfg.eps * t as f64).floor() as usize).max(1);
    let total0 = (cfg.pi0 * t as f64).floor() as usize;
    if cfg.m0 == 0 {
        return Err(Error::config("m0 must be >= 1"));
    }
    if total0 < cfg.m0 * min_seg {
        return Err(Error::infeasible(format!(
            "cannot cover {} points with {} segments of length >= {}",
            total0, cfg.m0, min_seg
        )));
    }
    if total0 + (cfg.m0 - 1) > t {
        return Err(Error::infeasible("segments plus interior gaps exceed T"));
    }
    let class = PartitionClass { t_len: t, min_seg, min_total: total0, m_plus: cfg.m0 };
    Ok((class, total0))
}

/// Search the class by exact enumeration (small instances) or surrogate DP
/// plus exact re-scoring, minimizing `criterion`.
fn search_minimum(
    ds: &Dataset,
    cfg: &EstimateConfig,
    scores: &SegmentScores,
    criterion: &dyn Fn(&Partition) -> Result<f64>,
) -> Result<(Partition, f64)> {
    let (class, total0) = class_for(ds, cfg)?;
    let candidates: Vec<Partition> = if cfg.exact_length {
        let count = count_partitions_exact(ds.t_len(), class.min_seg, cfg.m0, total0);
        if count <= cfg.enumeration_cap {
            enumerate_partitions_exact(ds.t_len(), class.min_seg, cfg.m0, total0, usize::MAX)?
        } else {
            let dp = run_dp(scores, &class, Some(cfg.m0 - 1));
            let cands = dp.exact_cell_candidates(scores, cfg.m0, total0, cfg.top_k)?;
            cands.into_iter().map(|c| c.partition).collect()
        }
    } else {
        // relaxed option: covered total at least the floor, still m0 segments
        let eps_frac = class.min_seg as f64 / ds.t_len() as f64;
        let count =
            crate::data::count_partitions(ds.t_len(), eps_frac, cfg.pi0, cfg.m0).unwrap_or(u128::MAX);
        if count <= cfg.enumeration_cap {
            crate::data::enumerate_partitions(ds.t_len(), eps_frac, cfg.pi0, cfg.m0, usize::MAX)?
                .into_iter()
                .filter(|p| p.num_segments() == cfg.m0)
                .collect()
        } else {
            let dp = run_dp(scores, &class, None);
            let mut cands: Vec<_> = dp
                .length_profile()
                .into_iter()
                .filter(|c| c.score_sum != NEG)
                .collect();
            cands.sort_by(|a, b| b.score_sum.partial_cmp(&a.score_sum).unwrap());
            cands.truncate(cfg.top_k);
            cands.into_iter().map(|c| c.partition).collect()
        }
    };
    if candidates.is_empty() {
        return Err(Error::infeasible("no admissible partition in the class"));
    }
    let mut best: Option<(f64, Partition)> = None;
    for part in candidates {
        let v = match criterion(&part) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let better = match &best {
            None => true,
            Some((bv, bp)) => {
                v < *bv || (v == *bv && part.segments()[0].0 < bp.segments()[0].0)
            }
        };
        if better {
            best = Some((v, part));
        }
    }
    best.map(|(v, p)| (p, v)).ok_or_else(|| Error::singular("every candidate was inadmissible"))
}

/// Reduced-form OLS estimator of the identified subsample.
pub fn shat_ols(ds: &Dataset, cfg: &EstimateConfig) -> Result<EstimationResult> {
    let min_seg = ((cfg.eps * ds.t_len() as f64).floor() as usize).max(1);
    let scores = ols_decrement_scores(ds, min_seg)?;
    let (partition, criterion_value) =
        search_minimum(ds, cfg, &scores, &|p| ols_criterion(ds, p))?;
    Ok(EstimationResult {
        partition,
        criterion_value,
        method: EstimationMethod::Ols,
        sigma_eps: None,
        warnings: Vec::new(),
    })
}

/// Error covariance of the stacked system at a partition, from OLS
/// residuals: Sigma_{ij} = eps_i' eps_j / (T - q - p).
pub fn sigma_eps_at(ds: &Dataset, p: &Partition) -> Result<Array2<f64>> {
    let zf = zero_filled_instruments(ds, p);
    let w = concat_cols(&zf, &ds.x);
    let ymat = stack_yd(ds);
    let (_, resid) = linalg::ols(&ymat, &w)?;
    let dof = ds.t_len() as f64 - ds.q() as f64 - ds.p() as f64;
    let mut sig = Array2::<f64>::zeros((2, 2));
    for t in 0..resid.nrows() {
        for i in 0..2 {
            for j in 0..2 {
                sig[[i, j]] += resid[[t, i]] * resid[[t, j]];
            }
        }
    }
    sig.mapv_inplace(|v| v / dof);
    Ok(sig)
}

/// FGLS estimator of the identified subsample. The pilot OLS stage supplies
/// the error covariance unless one is injected; a singular covariance falls
/// back to the OLS criterion with a warning.
pub fn shat_fgls(
    ds: &Dataset,
    cfg: &EstimateConfig,
    pilot: Option<&EstimationResult>,
) -> Result<EstimationResult> {
    let pilot_res;
    let pilot_ref = match pilot {
        Some(p) => p,
        None => {
            pilot_res = shat_ols(ds, cfg)?;
            &pilot_res
        }
    };
    let sigma = match &cfg.sigma_override {
        Some(s) => s.clone(),
        None => sigma_eps_at(ds, &pilot_ref.partition)?,
    };
    let det = sigma[[0, 0]] * sigma[[1, 1]] - sigma[[0, 1]] * sigma[[1, 0]];
    let scale = sigma[[0, 0]].abs().max(sigma[[1, 1]].abs());
    if !(det.is_finite() && det.abs() > 1e-12 * scale * scale) {
        let mut res = pilot_ref.clone();
        res.method = EstimationMethod::Fgls;
        res.sigma_eps = Some(sigma);
        res.warnings.push(
            "error covariance singular; FGLS fell back to the OLS criterion".to_string(),
        );
        return Ok(res);
    }
    let mut sigma_inv = Array2::<f64>::zeros((2, 2));
    sigma_inv[[0, 0]] = sigma[[1, 1]] / det;
    sigma_inv[[1, 1]] = sigma[[0, 0]] / det;
    sigma_inv[[0, 1]] = -sigma[[0, 1]] / det;
    sigma_inv[[1, 0]] = -sigma[[1, 0]] / det;

    let min_seg = ((cfg.eps * ds.t_len() as f64).floor() as usize).max(1);
    let scores = fgls_decrement_scores(ds, min_seg, &sigma_inv)?;
    let (partition, criterion_value) =
        search_minimum(ds, cfg, &scores, &|p| fgls_criterion(ds, p, &sigma_inv))?;
    Ok(EstimationResult {
        partition,
        criterion_value,
        method: EstimationMethod::Fgls,
        sigma_eps: Some(sigma),
        warnings: Vec::new(),
    })
}

/// beta on a given subsample: two-stage least squares on the selected rows,
/// with the instruments restricted to the subsample. Returns the estimate
/// and its HAC standard error (window = subsample length).
pub fn beta_on_subsample(ds: &Dataset, p: &Partition, hac: &HacConfig) -> Result<(f64, f64)> {
    let rows = p.selected_rows();
    let n = rows.len();
    let mut y = Array1::<f64>::zeros(n);
    let mut d = Array1::<f64>::zeros(n);
    let mut x = Array2::<f64>::zeros((n, ds.p()));
    let mut z = Array2::<f64>::zeros((n, ds.q()));
    for (i, &r) in rows.iter().enumerate() {
        y[i] = ds.y[r];
        d[i] = ds.d[r];
        for j in 0..ds.p() {
            x[[i, j]] = ds.x[[r, j]];
        }
        for j in 0..ds.q() {
            z[[i, j]] = ds.z[[r, j]];
        }
    }
    let fit = linalg::tsls(&y, &d, &x, &z, hac)?;
    Ok((fit.beta, fit.se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{gen_dataset_with, DgpSpec};
    use crate::rng::stream_rng;
    use ndarray::array;

    #[test]
    fn strong_constant_theta_with_full_class_returns_full_sample() {
        let mut spec = DgpSpec::linear_three_regime(40, 1.0, 31).with_outer_strength(20.0);
        spec.theta2 = spec.theta1;
        let mut rng = stream_rng(spec.seed, 0);
        let ds = gen_dataset_with(&spec, &mut rng).unwrap();
        let cfg = EstimateConfig { pi0: 1.0, m0: 1, eps: 0.1, ..Default::default() };
        let res = shat_ols(&ds, &cfg).unwrap();
        assert!(res.partition.is_full());
    }

    #[test]
    fn three_regime_recovery_matches_enumeration() {
        // theta nonzero on the outer regimes, dead middle block
        let t = 30;
        let mut spec = DgpSpec::linear_three_regime(t, 0.6, 77).with_outer_strength(40.0);
        let mut rng = stream_rng(spec.seed, 1);
        let ds = gen_dataset_with(&spec, &mut rng).unwrap();
        let cfg = EstimateConfig { pi0: 0.6, m0: 2, eps: 2.0 / t as f64, ..Default::default() };
        let res = shat_ols(&ds, &cfg).unwrap();
        // brute force over the exact class
        let total0 = (0.6 * t as f64).floor() as usize;
        let parts = enumerate_partitions_exact(t, 2, 2, total0, 1_000_000).unwrap();
        let mut best: Option<(f64, &Partition)> = None;
        for p in &parts {
            if let Ok(v) = ols_criterion(&ds, p) {
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, p));
                }
            }
        }
        let (bv, bp) = best.unwrap();
        assert_eq!(&res.partition, bp);
        assert!((res.criterion_value - bv).abs() <= 1e-9 * (1.0 + bv.abs()));
        // the dead middle block is excluded: segments avoid [t/4, t/4+dead)
        let s0 = spec.true_subsample().unwrap();
        assert!(res.partition.symmetric_difference(&s0) <= 4, "{} vs {}", res.partition, s0);
    }

    #[test]
    fn fgls_matches_enumeration_and_identity_weight_reduces_to_ols() {
        let t = 30;
        let mut spec = DgpSpec::linear_three_regime(t, 0.6, 78).with_outer_strength(30.0);
        spec.rho = 0.6;
        let mut rng = stream_rng(spec.seed, 2);
        let mut ds = gen_dataset_with(&spec, &mut rng).unwrap();
        let cfg = EstimateConfig { pi0: 0.6, m0: 2, eps: 2.0 / t as f64, ..Default::default() };
        let res = shat_fgls(&ds, &cfg, None).unwrap();
        assert_eq!(res.method, EstimationMethod::Fgls);
        let sigma_inv = {
            let s = res.sigma_eps.clone().unwrap();
            let det = s[[0, 0]] * s[[1, 1]] - s[[0, 1]] * s[[1, 0]];
            array![[s[[1, 1]] / det, -s[[0, 1]] / det], [-s[[1, 0]] / det, s[[0, 0]] / det]]
        };
        let total0 = (0.6 * t as f64).floor() as usize;
        let parts = enumerate_partitions_exact(t, 2, 2, total0, 1_000_000).unwrap();
        let mut best: Option<f64> = None;
        for p in &parts {
            if let Ok(v) = fgls_criterion(&ds, p, &sigma_inv) {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        assert!((res.criterion_value - best.unwrap()).abs() <= 1e-9);

        // identity weight on a dataset whose outcome is spanned by x: the
        // outcome equation contributes nothing, so the partition matches
        // the reduced-form criterion
        for i in 0..t {
            ds.y[i] = 2.0 * ds.x[[i, 0]];
        }
        let cfg_id = EstimateConfig {
            sigma_override: Some(ndarray::Array2::eye(2)),
            ..cfg.clone()
        };
        let ols_res = shat_ols(&ds, &cfg_id).unwrap();
        let fgls_res = shat_fgls(&ds, &cfg_id, None).unwrap();
        assert_eq!(ols_res.partition, fgls_res.partition);
    }

    #[test]
    fn singular_error_covariance_falls_back_to_ols() {
        let t = 30;
        let spec = DgpSpec::linear_three_regime(t, 0.6, 79).with_outer_strength(30.0);
        let mut rng = stream_rng(spec.seed, 3);
        let mut ds = gen_dataset_with(&spec, &mut rng).unwrap();
        // outcome an exact multiple of the endogenous variable: the stacked
        // residuals are collinear and the covariance is singular
        for i in 0..t {
            ds.y[i] = 3.0 * ds.d[i];
        }
        let cfg = EstimateConfig { pi0: 0.6, m0: 2, eps: 2.0 / t as f64, ..Default::default() };
        let res = shat_fgls(&ds, &cfg, None).unwrap();
        assert!(!res.warnings.is_empty());
        let ols_res = shat_ols(&ds, &cfg).unwrap();
        assert_eq!(res.partition, ols_res.partition);
    }

    #[test]
    fn beta_on_subsample_noiseless_and_weak_id() {
        let t = 24;
        let mut z = ndarray::Array2::zeros((t, 1));
        let mut d = ndarray::Array1::zeros(t);
        let mut rng = stream_rng(80, 0);
        for i in 0..t {
            z[[i, 0]] = crate::cv::standard_normal(&mut rng);
            d[i] = if i < 12 { z[[i, 0]] } else { 0.0 };
        }
        let y = d.clone();
        let x = ndarray::Array2::zeros((t, 0));
        let ds = Dataset::new(y, d, x, z, None).unwrap();
        let strong = Partition::new(vec![(1, 13)], t).unwrap();
        let (beta, _) = beta_on_subsample(&ds, &strong, &HacConfig::default()).unwrap();
        assert!((beta - 1.0).abs() < 1e-10);
        // subsample with no instrument-relevant rows: d is constant zero
        let dead = Partition::new(vec![(13, 25)], t).unwrap();
        assert!(beta_on_subsample(&ds, &dead, &HacConfig::default()).is_err());
    }

    #[test]
    fn infeasible_class_is_reported() {
        let spec = DgpSpec::linear_three_regime(30, 0.6, 81);
        let mut rng = stream_rng(spec.seed, 0);
        let ds = gen_dataset_with(&spec, &mut rng).unwrap();
        let cfg = EstimateConfig { pi0: 0.9, m0: 9, eps: 0.2, ..Default::default() };
        assert!(matches!(shat_ols(&ds, &cfg), Err(crate::error::Error::Infeasible(_))));
    }
}
