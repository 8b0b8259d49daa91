//! Data-generating processes and experiment harnesses for the simulation
//! studies: size and power of the F tests, bias and MSE of the subsample
//! estimators, and null rejection rates of the robust tests.
//!
//! Replications are embarrassingly parallel; replication r draws from a
//! stream derived from (seed, r), so reports are bit-identical for a fixed
//! seed regardless of thread count.

use crate::cv::standard_normal;
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::estimate::{beta_on_subsample, shat_fgls, shat_ols, EstimateConfig};
use crate::fstar::{f_stat_exact, fstar_search, SearchConfig};
use crate::linalg::tsls;
use crate::rng::stream_rng;
use crate::robust::{robust_test, RobustConfig, RobustMode};
use ndarray::{Array1, Array2};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const AR_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DgpKind {
    /// heteroskedasticity-based first stage D = e / (1 - theta Z) with a
    /// policy/control calendar instrument
    Calibrated,
    /// linear IV with a three-regime first stage
    LinearThreeRegime,
}

/// Three-regime simulation design. Regime boundaries sit at floor(T/4) and
/// floor(T/4) + floor((1 - pi0) T); the middle block carries theta2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub t_len: usize,
    pub pi0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub beta: f64,
    /// innovation correlation between the structural and first-stage errors
    pub rho: f64,
    /// AR(1) coefficients of the errors; zero gives i.i.d. errors
    pub rho_e: f64,
    pub rho_u: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// innovation variance of the calibrated first-stage error
    pub sigma_v2: f64,
    /// exogenous regressor: constant one, or N(1,1) draws
    pub x_random: bool,
    /// calibrated calendar: one policy date every this many observations
    pub policy_period: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn linear_three_regime(t_len: usize, pi0: f64, seed: u64) -> Self {
        DgpSpec {
            kind: DgpKind::LinearThreeRegime,
            t_len,
            pi0,
            theta1: 0.0,
            theta2: 0.0,
            theta3: 0.0,
            beta: 1.0,
            rho: 0.25,
            rho_e: 0.0,
            rho_u: 0.0,
            gamma1: 1.0,
            gamma2: 1.0,
            sigma_v2: 1.0,
            x_random: false,
            policy_period: 31,
            seed,
        }
    }

    pub fn calibrated(t_len: usize, pi0: f64, seed: u64) -> Self {
        DgpSpec { kind: DgpKind::Calibrated, ..Self::linear_three_regime(t_len, pi0, seed) }
    }

    /// theta scaling d / sqrt(T) applied to the outer regimes.
    pub fn with_outer_strength(mut self, d: f64) -> Self {
        let th = d / (self.t_len as f64).sqrt();
        self.theta1 = th;
        self.theta3 = th;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.t_len < 16 {
            return Err(Error::config("DGP needs T >= 16"));
        }
        if !(self.pi0 > 0.0 && self.pi0 <= 1.0) {
            return Err(Error::config("pi0 must lie in (0, 1]"));
        }
        for r in [self.rho, self.rho_e, self.rho_u] {
            if r.abs() >= 1.0 {
                return Err(Error::config("correlation parameters must lie in (-1, 1)"));
            }
        }
        if self.sigma_v2 <= 0.0 {
            return Err(Error::config("sigma_v2 must be positive"));
        }
        if self.kind == DgpKind::Calibrated && self.policy_period < 2 {
            return Err(Error::config("policy_period must be >= 2"));
        }
        Ok(())
    }

    /// Regime of 0-based index i: 0, 1 (dead block), or 2.
    pub fn regime_of(&self, i: usize) -> usize {
        let t = self.t_len;
        let r1 = t / 4;
        let dead = ((1.0 - self.pi0) * t as f64).floor() as usize;
        if i < r1 {
            0
        } else if i < r1 + dead {
            1
        } else {
            2
        }
    }

    /// The strongly-identified subsample implied by the regime layout
    /// (outer regimes), as a partition.
    pub fn true_subsample(&self) -> Result<Partition> {
        let t = self.t_len;
        let r1 = t / 4;
        let dead = ((1.0 - self.pi0) * t as f64).floor() as usize;
        if dead == 0 {
            return Partition::new(vec![(1, t + 1)], t);
        }
        Partition::new(vec![(1, r1 + 1), (r1 + dead + 1, t + 1)], t)
    }

    fn theta_of(&self, regime: usize) -> f64 {
        match regime {
            0 => self.theta1,
            1 => self.theta2,
            _ => self.theta3,
        }
    }
}

/// Draw one synthetic dataset; deterministic given the spec (seed included).
pub fn gen_dataset(spec: &DgpSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0x6d63 /* "mc" */);
    gen_dataset_with(spec, &mut rng)
}

/// Draw using an externally managed stream (harness use).
pub fn gen_dataset_with(spec: &DgpSpec, rng: &mut ChaCha12Rng) -> Result<Dataset> {
    spec.validate()?;
    let t = spec.t_len;
    match spec.kind {
        DgpKind::LinearThreeRegime => {
            let ch = (1.0 - spec.rho * spec.rho).sqrt();
            let mut u = 0.0f64;
            let mut e = 0.0f64;
            for _ in 0..AR_BURN_IN {
                let vu = standard_normal(rng);
                let ve_raw = standard_normal(rng);
                let ve = spec.rho * vu + ch * ve_raw;
                u = spec.rho_u * u + vu;
                e = spec.rho_e * e + ve;
            }
            // with a stochastic exogenous regressor the estimated model also
            // carries an intercept, as in standard IV practice
            let p_cols = if spec.x_random { 2 } else { 1 };
            let mut y = Array1::<f64>::zeros(t);
            let mut d = Array1::<f64>::zeros(t);
            let mut x = Array2::<f64>::zeros((t, p_cols));
            let mut z = Array2::<f64>::zeros((t, 1));
            for i in 0..t {
                let vu = standard_normal(rng);
                let ve_raw = standard_normal(rng);
                let ve = spec.rho * vu + ch * ve_raw;
                u = spec.rho_u * u + vu;
                e = spec.rho_e * e + ve;
                let zi = 1.0 + standard_normal(rng);
                let xi = if spec.x_random { 1.0 + standard_normal(rng) } else { 1.0 };
                let th = spec.theta_of(spec.regime_of(i));
                let di = th * zi + spec.gamma2 * xi + e;
                y[i] = spec.beta * di + spec.gamma1 * xi + u;
                d[i] = di;
                x[[i, 0]] = 1.0;
                if spec.x_random {
                    x[[i, 1]] = xi;
                }
                z[[i, 0]] = zi;
            }
            Dataset::new(y, d, x, z, None)
        }
        DgpKind::Calibrated => {
            // deterministic policy calendar: one policy date per period,
            // placed mid-cycle
            let offset = spec.policy_period / 2;
            let policy: Vec<bool> = (0..t).map(|i| i % spec.policy_period == offset).collect();
            let t_p = policy.iter().filter(|&&b| b).count();
            let t_c = t - t_p;
            if t_p == 0 || t_c == 0 {
                return Err(Error::config("calibrated calendar needs both samples non-empty"));
            }
            let z_pol = t as f64 / t_p as f64;
            let z_ctl = -(t as f64) / t_c as f64;
            let sig = spec.sigma_v2.sqrt();
            let mut e = 0.0f64;
            for _ in 0..AR_BURN_IN {
                e = spec.rho_e * e + sig * standard_normal(rng);
            }
            let mut d = Array1::<f64>::zeros(t);
            let mut zcol = Array1::<f64>::zeros(t);
            for i in 0..t {
                e = spec.rho_e * e + sig * standard_normal(rng);
                let zi = if policy[i] { z_pol } else { z_ctl };
                let th = spec.theta_of(spec.regime_of(i));
                let denom = 1.0 - th * zi;
                if denom.abs() < 1e-8 {
                    return Err(Error::config(
                        "calibrated DGP: theta Z too close to 1; reduce theta",
                    ));
                }
                d[i] = e / denom;
                // the identification-strength instrument is Z_t D_t
                zcol[i] = zi * d[i];
            }
            let y = d.clone();
            let x = Array2::<f64>::zeros((t, 0));
            let z = zcol.insert_axis(ndarray::Axis(1));
            Dataset::new(y, d, x, z, Some(policy))
        }
    }
}

/// Report cell: named scalars plus their Monte Carlo standard errors.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct CellReport {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub estimates: BTreeMap<String, f64>,
    pub mc_se: BTreeMap<String, f64>,
    pub reps: usize,
}

/// Aggregated experiment output. The wall-clock time is reported on the
/// text rendering only, keeping the serialized report byte-deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub suite: String,
    pub seed: u64,
    pub cells: Vec<CellReport>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn render_text(&self) -> String {
        let mut out = format!("suite: {} (seed {})\n", self.suite, self.seed);
        for c in &self.cells {
            out.push_str(&format!("[{}] reps={}\n", c.label, c.reps));
            for (k, v) in &c.estimates {
                let se = c.mc_se.get(k).copied();
                match se {
                    Some(se) => out.push_str(&format!("  {} = {:.4} (mc se {:.4})\n", k, v, se)),
                    None => out.push_str(&format!("  {} = {:.4}\n", k, v)),
                }
            }
        }
        if self.wall_time_s > 0.0 {
            out.push_str(&format!("wall time: {:.1}s\n", self.wall_time_s));
        }
        out
    }
}

fn rate_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Per-replication full-sample F and F-star values under a spec; one
/// convention (the search configuration) drives both statistics.
pub fn simulate_f_pair(
    spec: &DgpSpec,
    reps: usize,
    search: &SearchConfig,
) -> Result<Vec<(f64, f64)>> {
    let out: Result<Vec<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(spec.seed, r as u64);
            let ds = gen_dataset_with(spec, &mut rng)?;
            let full = f_stat_exact(&ds, &Partition::full(ds.t_len()), search)?;
            let star = fstar_search(&ds, search)?;
            Ok((full.value, star.value))
        })
        .collect();
    out
}

/// Size and size-adjusted power of the full-sample F and F-star tests.
/// `alt_builders` maps a label to a spec; the null spec fixes the critical
/// values for size-adjusted power.
pub fn size_power_f(
    null_spec: &DgpSpec,
    alts: &[(String, DgpSpec)],
    reps: usize,
    search: &SearchConfig,
    cv_full: f64,
    cv_star: f64,
    alpha: f64,
) -> Result<ExperimentReport> {
    let t0 = std::time::Instant::now();
    let null_vals = simulate_f_pair(null_spec, reps, search)?;
    let mut cells = Vec::new();

    let reject = |vals: &[(f64, f64)], cf: f64, cs: f64| -> (f64, f64) {
        let rf = vals.iter().filter(|v| v.0 > cf).count() as f64 / vals.len() as f64;
        let rs = vals.iter().filter(|v| v.1 > cs).count() as f64 / vals.len() as f64;
        (rf, rs)
    };

    let (size_full, size_star) = reject(&null_vals, cv_full, cv_star);
    let mut null_cell = CellReport {
        label: "null".to_string(),
        reps,
        ..Default::default()
    };
    null_cell.estimates.insert("size_full_f".into(), size_full);
    null_cell.estimates.insert("size_fstar".into(), size_star);
    null_cell.mc_se.insert("size_full_f".into(), rate_se(size_full, reps));
    null_cell.mc_se.insert("size_fstar".into(), rate_se(size_star, reps));
    null_cell.params.insert("cv_full".into(), cv_full);
    null_cell.params.insert("cv_star".into(), cv_star);
    cells.push(null_cell);

    // empirical critical values for size-adjusted power
    let mut fulls: Vec<f64> = null_vals.iter().map(|v| v.0).collect();
    let mut stars: Vec<f64> = null_vals.iter().map(|v| v.1).collect();
    fulls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let adj_cv_full = crate::cv::quantile_type7(&fulls, 1.0 - alpha);
    let adj_cv_star = crate::cv::quantile_type7(&stars, 1.0 - alpha);

    for (label, alt) in alts {
        let vals = simulate_f_pair(alt, reps, search)?;
        let (pf, ps) = reject(&vals, adj_cv_full, adj_cv_star);
        let mut cell = CellReport { label: label.clone(), reps, ..Default::default() };
        cell.estimates.insert("power_full_f".into(), pf);
        cell.estimates.insert("power_fstar".into(), ps);
        cell.mc_se.insert("power_full_f".into(), rate_se(pf, reps));
        cell.mc_se.insert("power_fstar".into(), rate_se(ps, reps));
        cell.params.insert("adj_cv_full".into(), adj_cv_full);
        cell.params.insert("adj_cv_star".into(), adj_cv_star);
        cells.push(cell);
    }

    Ok(ExperimentReport {
        suite: "fstar-size".to_string(),
        seed: null_spec.seed,
        cells,
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

/// Bias and MSE of the full-sample IV estimator and the subsample
/// estimators of beta.
pub fn bias_mse_beta(
    spec: &DgpSpec,
    reps: usize,
    est: &EstimateConfig,
) -> Result<ExperimentReport> {
    let t0 = std::time::Instant::now();
    let rows: Result<Vec<(f64, f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(spec.seed, r as u64);
            let ds = gen_dataset_with(spec, &mut rng)?;
            let full_fit = tsls(&ds.y, &ds.d, &ds.x, &ds.z, &est.hac)?;
            let ols_part = shat_ols(&ds, est)?;
            let b_ols = beta_on_subsample(&ds, &ols_part.partition, &est.hac)?;
            let fgls_part = shat_fgls(&ds, est, None)?;
            let b_fgls = beta_on_subsample(&ds, &fgls_part.partition, &est.hac)?;
            Ok((full_fit.beta, b_ols.0, b_fgls.0))
        })
        .collect();
    let rows = rows?;
    let beta0 = spec.beta;
    let stat = |get: &dyn Fn(&(f64, f64, f64)) -> f64| -> (f64, f64, f64, f64) {
        let n = rows.len() as f64;
        let mut mean = 0.0;
        let mut mse = 0.0;
        for row in &rows {
            let v = get(row);
            mean += v;
            mse += (v - beta0) * (v - beta0);
        }
        mean /= n;
        mse /= n;
        // MC standard errors: se of the mean and of the mse
        let mut var_mean = 0.0;
        let mut var_sq = 0.0;
        for row in &rows {
            let v = get(row);
            var_mean += (v - mean) * (v - mean);
            let sq = (v - beta0) * (v - beta0);
            var_sq += (sq - mse) * (sq - mse);
        }
        ((mean - beta0), mse, (var_mean / n).sqrt() / n.sqrt(), (var_sq / n).sqrt() / n.sqrt())
    };
    let (b_fs, m_fs, seb_fs, sem_fs) = stat(&|r| r.0);
    let (b_ols, m_ols, seb_ols, sem_ols) = stat(&|r| r.1);
    let (b_fgls, m_fgls, seb_fgls, sem_fgls) = stat(&|r| r.2);

    // paired MSE difference (full vs subsample-OLS) for ordering checks
    let n = rows.len() as f64;
    let diffs: Vec<f64> = rows
        .iter()
        .map(|r| (r.0 - beta0) * (r.0 - beta0) - (r.1 - beta0) * (r.1 - beta0))
        .collect();
    let dmean = diffs.iter().sum::<f64>() / n;
    let dvar = diffs.iter().map(|d| (d - dmean) * (d - dmean)).sum::<f64>() / n;

    let mut cell = CellReport { label: "beta-estimators".to_string(), reps, ..Default::default() };
    cell.estimates.insert("bias_full".into(), b_fs);
    cell.estimates.insert("bias_shat_ols".into(), b_ols);
    cell.estimates.insert("bias_shat_fgls".into(), b_fgls);
    cell.estimates.insert("mse_full".into(), m_fs);
    cell.estimates.insert("mse_shat_ols".into(), m_ols);
    cell.estimates.insert("mse_shat_fgls".into(), m_fgls);
    cell.estimates.insert("mse_diff_full_minus_ols".into(), dmean);
    cell.mc_se.insert("bias_full".into(), seb_fs);
    cell.mc_se.insert("bias_shat_ols".into(), seb_ols);
    cell.mc_se.insert("bias_shat_fgls".into(), seb_fgls);
    cell.mc_se.insert("mse_full".into(), sem_fs);
    cell.mc_se.insert("mse_shat_ols".into(), sem_ols);
    cell.mc_se.insert("mse_shat_fgls".into(), sem_fgls);
    cell.mc_se.insert("mse_diff_full_minus_ols".into(), (dvar / n).sqrt());
    Ok(ExperimentReport {
        suite: "beta-mse".to_string(),
        seed: spec.seed,
        cells: vec![cell],
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

/// Null rejection rates of the identification-robust tests, full-sample and
/// estimated-subsample modes.
pub fn size_power_robust(
    spec: &DgpSpec,
    beta0: f64,
    reps: usize,
    rcfg: &RobustConfig,
) -> Result<ExperimentReport> {
    let t0 = std::time::Instant::now();
    let rows: Result<Vec<(bool, bool, bool, bool)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(spec.seed, r as u64);
            let ds = gen_dataset_with(spec, &mut rng)?;
            let full = robust_test(&ds, beta0, RobustMode::Full, rcfg)?;
            let est = robust_test(&ds, beta0, RobustMode::Estimated, rcfg)?;
            Ok((
                full.lm_reject.unwrap_or(false),
                full.clr_reject,
                est.lm_reject.unwrap_or(false),
                est.clr_reject,
            ))
        })
        .collect();
    let rows = rows?;
    let n = rows.len();
    let rate = |f: &dyn Fn(&(bool, bool, bool, bool)) -> bool| {
        rows.iter().filter(|r| f(r)).count() as f64 / n as f64
    };
    let lm_full = rate(&|r| r.0);
    let clr_full = rate(&|r| r.1);
    let lm_est = rate(&|r| r.2);
    let clr_est = rate(&|r| r.3);
    let mut cell = CellReport { label: "robust-null".to_string(), reps, ..Default::default() };
    for (k, v) in [
        ("lm_full", lm_full),
        ("clr_full", clr_full),
        ("lm_shat", lm_est),
        ("clr_shat", clr_est),
    ] {
        cell.estimates.insert(k.to_string(), v);
        cell.mc_se.insert(k.to_string(), rate_se(v, n));
    }
    Ok(ExperimentReport {
        suite: "robust-size".to_string(),
        seed: spec.seed,
        cells: vec![cell],
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_bounds_by_index_arithmetic() {
        // pi0 = 0.6, T = 200: dead block is 1-based [51, 130]
        let spec = DgpSpec::linear_three_regime(200, 0.6, 1);
        assert_eq!(spec.regime_of(49), 0);
        assert_eq!(spec.regime_of(50), 1);
        assert_eq!(spec.regime_of(129), 1);
        assert_eq!(spec.regime_of(130), 2);
        let s0 = spec.true_subsample().unwrap();
        assert_eq!(s0.segments(), &[(1, 51), (131, 201)]);
    }

    #[test]
    fn null_design_has_uncorrelated_instrument_and_treatment() {
        let spec = DgpSpec::linear_three_regime(400, 0.6, 2);
        let ds = gen_dataset(&spec).unwrap();
        let t = ds.t_len() as f64;
        let mz = ds.z.column(0).sum() / t;
        let md = ds.d.sum() / t;
        let mut num = 0.0;
        let mut vz = 0.0;
        let mut vd = 0.0;
        for i in 0..ds.t_len() {
            let a = ds.z[[i, 0]] - mz;
            let b = ds.d[i] - md;
            num += a * b;
            vz += a * a;
            vd += b * b;
        }
        let corr = num / (vz.sqrt() * vd.sqrt());
        assert!(corr.abs() < 3.0 / t.sqrt(), "corr {}", corr);
    }

    #[test]
    fn ar1_autocorrelation_is_near_rho() {
        let mut spec = DgpSpec::linear_three_regime(4000, 1.0, 3);
        spec.rho_e = 0.5;
        spec.gamma2 = 0.0;
        let ds = gen_dataset(&spec).unwrap();
        // with all thetas zero and gamma2 = 0, d is the AR(1) error itself
        let t = ds.t_len();
        let mean = ds.d.sum() / t as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..t {
            num += (ds.d[i] - mean) * (ds.d[i - 1] - mean);
        }
        for i in 0..t {
            den += (ds.d[i] - mean) * (ds.d[i] - mean);
        }
        let rho_hat = num / den;
        assert!((rho_hat - 0.5).abs() < 3.0 / (t as f64).sqrt(), "rho_hat {}", rho_hat);
    }

    #[test]
    fn calibrated_dgp_calendar_and_instrument() {
        let spec = DgpSpec::calibrated(400, 0.6, 4);
        let ds = gen_dataset(&spec).unwrap();
        let (pol, ctl) = ds.policy_split().unwrap();
        assert!(!pol.is_empty() && !ctl.is_empty());
        // policy dates are evenly spaced
        for w in pol.windows(2) {
            assert_eq!(w[1] - w[0], spec.policy_period);
        }
        // the identification instrument is Z_t D_t: its sign flips with D
        for i in 0..ds.t_len() {
            let z_raw = if ds.policy_indicator.as_ref().unwrap()[i] {
                400.0 / pol.len() as f64
            } else {
                -400.0 / ctl.len() as f64
            };
            approx::assert_relative_eq!(ds.z[[i, 0]], z_raw * ds.d[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut spec = DgpSpec::linear_three_regime(100, 0.8, 5).with_outer_strength(8.0);
        spec.rho_e = 0.25;
        let a = gen_dataset(&spec).unwrap();
        let b = gen_dataset(&spec).unwrap();
        assert_eq!(a.y.as_slice().unwrap(), b.y.as_slice().unwrap());
        assert_eq!(a.d.as_slice().unwrap(), b.d.as_slice().unwrap());
        assert_eq!(a.z.as_slice().unwrap(), b.z.as_slice().unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = DgpSpec::linear_three_regime(100, 0.6, 6);
        spec.rho = 1.0;
        assert!(gen_dataset(&spec).is_err());
        let mut spec = DgpSpec::calibrated(400, 0.6, 7);
        // theta * Z = 1 exactly on policy dates: 13 policy dates in T = 400
        spec.theta1 = 13.0 / 400.0;
        assert!(gen_dataset(&spec).is_err());
    }
}
