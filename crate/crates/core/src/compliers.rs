//! Individual complier classification from rolling-window treatment means,
//! and the exclusion-restriction test on non-complier outcomes.
//!
//! A date is classified a complier when the nearby policy-sample mean of
//! the treatment exceeds the nearby control-sample mean by more than
//! sampling noise; under heteroskedasticity-based identification the means
//! are rolling variances (the square transform). Dates whose windows do
//! not fit are left undetermined.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fstar::TestReport;
use crate::linalg::{floor_cbrt, newey_west, BandwidthRule, HacConfig, Kernel};
use crate::stats::normal_quantile;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowSide {
    /// windows extend backward in time only
    OneSidedLeft,
    /// windows take the nearest dates on both sides
    TwoSided,
}

/// Rolling-window specification. `n0` is the control window, `n1` the
/// policy window; the variance lag rule is floor(n0^{1/3}).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n0: usize,
    pub n1: usize,
    pub sided: WindowSide,
    /// account for the sampling noise of the policy-window mean as well
    /// (not part of the printed statistic)
    pub welch: bool,
}

impl WindowSpec {
    pub fn empirical() -> Self {
        WindowSpec { n0: 101, n1: 15, sided: WindowSide::TwoSided, welch: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 || self.n1 < 2 {
            return Err(Error::config("windows must have at least 2 observations"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplierStatus {
    Complier,
    NonComplier,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// treatment levels
    Level,
    /// squared treatment (rolling variances; heteroskedasticity-based
    /// identification)
    Square,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DateClassification {
    /// 0-based index
    pub index: usize,
    pub is_policy: bool,
    pub t_stat: Option<f64>,
    pub mean_policy: Option<f64>,
    pub mean_control: Option<f64>,
    pub status: ComplierStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplierReport {
    pub alpha: f64,
    pub transform: Transform,
    pub spec: WindowSpec,
    pub dates: Vec<DateClassification>,
}

impl ComplierReport {
    pub fn complier_share(&self) -> f64 {
        let det: Vec<_> =
            self.dates.iter().filter(|d| d.status != ComplierStatus::Undetermined).collect();
        if det.is_empty() {
            return f64::NAN;
        }
        det.iter().filter(|d| d.status == ComplierStatus::Complier).count() as f64
            / det.len() as f64
    }

    pub fn non_compliers(&self) -> Vec<&DateClassification> {
        self.dates.iter().filter(|d| d.status == ComplierStatus::NonComplier).collect()
    }

    /// One CSV row per date: index (1-based), policy flag, t, status.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("index,policy,t_stat,status\n");
        for d in &self.dates {
            let t = d.t_stat.map(|v| v.to_string()).unwrap_or_default();
            let status = match d.status {
                ComplierStatus::Complier => "complier",
                ComplierStatus::NonComplier => "non_complier",
                ComplierStatus::Undetermined => "undetermined",
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                d.index + 1,
                if d.is_policy { 1 } else { 0 },
                t,
                status
            ));
        }
        out
    }
}

/// Indices of the `n` nearest members of `pool` to `t0` under the window
/// side rule; `None` when the window does not fit. For one-sided windows
/// the pool entries must be strictly before `t0` for the control sample
/// (the `strictly_before` flag).
fn window_indices(
    pool: &[usize],
    t0: usize,
    n: usize,
    sided: WindowSide,
    strictly_before: bool,
) -> Option<Vec<usize>> {
    match sided {
        WindowSide::OneSidedLeft => {
            let hi = pool.partition_point(|&s| if strictly_before { s < t0 } else { s <= t0 });
            if hi < n {
                return None;
            }
            Some(pool[hi - n..hi].to_vec())
        }
        WindowSide::TwoSided => {
            if pool.len() < n {
                return None;
            }
            // nearest n by |s - t0| via two-pointer expansion
            let start = pool.partition_point(|&s| s < t0);
            let mut lo = start;
            let mut hi = start;
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let left = if lo > 0 { Some(t0 - pool[lo - 1]) } else { None };
                let right = if hi < pool.len() { Some(pool[hi].max(t0) - t0.min(pool[hi])) } else { None };
                match (left, right) {
                    (Some(dl), Some(dr)) => {
                        if dl <= dr {
                            lo -= 1;
                            out.push(pool[lo]);
                        } else {
                            out.push(pool[hi]);
                            hi += 1;
                        }
                    }
                    (Some(_), None) => {
                        lo -= 1;
                        out.push(pool[lo]);
                    }
                    (None, Some(_)) => {
                        out.push(pool[hi]);
                        hi += 1;
                    }
                    (None, None) => return None,
                }
            }
            out.sort_unstable();
            Some(out)
        }
    }
}

/// Rolling means of the (transformed) treatment around date `t0` (0-based):
/// the policy-window mean and the control-window mean. `None` components
/// mark incomplete windows.
pub fn rolling_means(
    ds: &Dataset,
    spec: &WindowSpec,
    transform: Transform,
    t0: usize,
) -> Result<(Option<f64>, Option<f64>)> {
    spec.validate()?;
    let (pol, ctl) = ds.policy_split()?;
    if t0 >= ds.t_len() {
        return Err(Error::config("date index out of range"));
    }
    let val = |i: usize| match transform {
        Transform::Level => ds.d[i],
        Transform::Square => ds.d[i] * ds.d[i],
    };
    let is_policy = ds.policy_indicator.as_ref().unwrap()[t0];
    // policy window: anchored at t0 itself when t0 is a policy date, else
    // at the nearest policy date
    let anchor = if is_policy {
        t0
    } else {
        match nearest(&pol, t0) {
            Some(a) => a,
            None => return Ok((None, None)),
        }
    };
    let pwin = window_indices(&pol, anchor, spec.n1, spec.sided, false);
    // control window: for policy dates, one-sided windows end strictly
    // before t0
    let cwin = window_indices(&ctl, t0, spec.n0, spec.sided, is_policy);
    let mean = |win: &Option<Vec<usize>>| {
        win.as_ref().map(|w| w.iter().map(|&i| val(i)).sum::<f64>() / w.len() as f64)
    };
    Ok((mean(&pwin), mean(&cwin)))
}

fn nearest(pool: &[usize], t0: usize) -> Option<usize> {
    if pool.is_empty() {
        return None;
    }
    let pos = pool.partition_point(|&s| s < t0);
    let mut best = None;
    for cand in [pos.checked_sub(1).and_then(|i| pool.get(i)), pool.get(pos)].into_iter().flatten()
    {
        let dist = cand.abs_diff(t0);
        match best {
            None => best = Some((dist, *cand)),
            Some((bd, _)) if dist < bd => best = Some((dist, *cand)),
            _ => {}
        }
    }
    best.map(|(_, c)| c)
}

/// One-sided complier t-test at date `t0`:
/// `t = sqrt(n0) (mean_P - mean_C) / sqrt(J_HAC)` with `J_HAC` the
/// Newey-West variance (floor(n0^{1/3}) lags) of the demeaned
/// control-window series. The Welch option adds the policy-window variance
/// contribution `n0/n1 * J_P`.
pub fn complier_ttest(
    ds: &Dataset,
    spec: &WindowSpec,
    transform: Transform,
    t0: usize,
    alpha: f64,
) -> Result<(Option<f64>, ComplierStatus)> {
    spec.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha must lie in (0, 1)"));
    }
    let (pol, ctl) = ds.policy_split()?;
    let val = |i: usize| match transform {
        Transform::Level => ds.d[i],
        Transform::Square => ds.d[i] * ds.d[i],
    };
    let is_policy = ds.policy_indicator.as_ref().unwrap()[t0];
    let anchor = if is_policy { Some(t0) } else { nearest(&pol, t0) };
    let pwin = anchor.and_then(|a| window_indices(&pol, a, spec.n1, spec.sided, false));
    let cwin = window_indices(&ctl, t0, spec.n0, spec.sided, is_policy);
    let (pwin, cwin) = match (pwin, cwin) {
        (Some(p), Some(c)) => (p, c),
        _ => return Ok((None, ComplierStatus::Undetermined)),
    };
    let mean_p = pwin.iter().map(|&i| val(i)).sum::<f64>() / pwin.len() as f64;
    let mean_c = cwin.iter().map(|&i| val(i)).sum::<f64>() / cwin.len() as f64;
    let j_c = window_lrv(&cwin, &val)?;
    let mut var_scaled = j_c; // variance of sqrt(n0) * mean difference, control side
    if spec.welch {
        let j_p = window_lrv(&pwin, &val)?;
        var_scaled += spec.n0 as f64 / spec.n1 as f64 * j_p;
    }
    if !(var_scaled > 0.0) {
        return Ok((None, ComplierStatus::Undetermined));
    }
    let t = (spec.n0 as f64).sqrt() * (mean_p - mean_c) / var_scaled.sqrt();
    let status = if t > normal_quantile(1.0 - alpha) {
        ComplierStatus::Complier
    } else {
        ComplierStatus::NonComplier
    };
    Ok((Some(t), status))
}

fn window_lrv(win: &[usize], val: &dyn Fn(usize) -> f64) -> Result<f64> {
    let n = win.len();
    let mean = win.iter().map(|&i| val(i)).sum::<f64>() / n as f64;
    let mut u = Array2::<f64>::zeros((n, 1));
    for (k, &i) in win.iter().enumerate() {
        u[[k, 0]] = val(i) - mean;
    }
    let cfg = HacConfig {
        kernel: Kernel::Bartlett,
        bandwidth: BandwidthRule::Fixed(floor_cbrt(n).min(n - 1)),
        prewhiten: false,
    };
    Ok(newey_west(&u.view(), &cfg)?.matrix[[0, 0]])
}

/// Classify every date; dates too near the boundary stay undetermined.
pub fn classify_all(
    ds: &Dataset,
    spec: &WindowSpec,
    transform: Transform,
    alpha: f64,
) -> Result<ComplierReport> {
    let pol_flags = ds
        .policy_indicator
        .as_ref()
        .ok_or_else(|| Error::config("dataset has no policy-indicator column"))?
        .clone();
    let mut dates = Vec::with_capacity(ds.t_len());
    for t0 in 0..ds.t_len() {
        let (t_stat, status) = complier_ttest(ds, spec, transform, t0, alpha)?;
        let (mp, mc) = rolling_means(ds, spec, transform, t0)?;
        dates.push(DateClassification {
            index: t0,
            is_policy: pol_flags[t0],
            t_stat,
            mean_policy: mp,
            mean_control: mc,
            status,
        });
    }
    Ok(ComplierReport { alpha, transform, spec: *spec, dates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NonComplierSubset {
    All,
    /// treatment at or above the non-complier mean ("always-takers")
    AboveMean,
    /// treatment below the non-complier mean ("never-takers")
    BelowMean,
}

/// Exclusion-restriction test: compare mean outcomes of non-compliers
/// across instrument values with a two-sided normal decision. `outcomes`
/// supplies the series to compare (levels, or the product d~ y~ under
/// heteroskedasticity-based identification).
pub fn exclusion_test(
    ds: &Dataset,
    report: &ComplierReport,
    outcomes: &[f64],
    subset: NonComplierSubset,
    alpha: f64,
    min_per_side: usize,
) -> Result<TestReport> {
    if outcomes.len() != ds.t_len() {
        return Err(Error::config("outcome series length mismatch"));
    }
    let nc: Vec<usize> = report.non_compliers().iter().map(|d| d.index).collect();
    if nc.is_empty() {
        return Err(Error::config("no non-compliers identified"));
    }
    let dbar = nc.iter().map(|&i| ds.d[i]).sum::<f64>() / nc.len() as f64;
    let keep = |i: usize| match subset {
        NonComplierSubset::All => true,
        NonComplierSubset::AboveMean => ds.d[i] >= dbar,
        NonComplierSubset::BelowMean => ds.d[i] < dbar,
    };
    let flags = ds.policy_indicator.as_ref().unwrap();
    let pol: Vec<usize> = nc.iter().copied().filter(|&i| flags[i] && keep(i)).collect();
    let ctl: Vec<usize> = nc.iter().copied().filter(|&i| !flags[i] && keep(i)).collect();
    if pol.len() < min_per_side {
        return Err(Error::config(format!(
            "policy-side non-compliers {} below the minimum {}",
            pol.len(),
            min_per_side
        )));
    }
    if ctl.len() < min_per_side {
        return Err(Error::config(format!(
            "control-side non-compliers {} below the minimum {}",
            ctl.len(),
            min_per_side
        )));
    }
    let out = |i: usize| outcomes[i];
    let mean_p = pol.iter().map(|&i| out(i)).sum::<f64>() / pol.len() as f64;
    let mean_c = ctl.iter().map(|&i| out(i)).sum::<f64>() / ctl.len() as f64;
    let j_c = window_lrv(&ctl, &out)?;
    let j_p = window_lrv(&pol, &out)?;
    // two-sample comparison with both sampling variances
    let var = j_c / ctl.len() as f64 + j_p / pol.len() as f64;
    if !(var > 0.0) {
        return Err(Error::singular("degenerate outcome variance in the exclusion test"));
    }
    let t = (mean_p - mean_c) / var.sqrt();
    let cv = normal_quantile(1.0 - alpha / 2.0);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("mean_policy_side".into(), mean_p);
    diagnostics.insert("mean_control_side".into(), mean_c);
    diagnostics.insert("n_policy_side".into(), pol.len() as f64);
    diagnostics.insert("n_control_side".into(), ctl.len() as f64);
    Ok(TestReport {
        statistic: t,
        critical_value: cv,
        alpha,
        reject: t.abs() > cv,
        partition: None,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn ds_with(d: Vec<f64>, policy: Vec<bool>) -> Dataset {
        let t = d.len();
        let y = Array1::from(vec![0.0; t]);
        let x = Array2::zeros((t, 0));
        let z: Array2<f64> = Array2::from_shape_fn((t, 1), |(i, _)| if policy[i] { 1.0 } else { 0.0 });
        Dataset::new(y, Array1::from(d), x, z, Some(policy)).unwrap()
    }

    #[test]
    fn constant_treatment_is_undetermined() {
        let policy: Vec<bool> = (0..24).map(|i| i % 4 == 0).collect();
        let ds = ds_with(vec![3.0; 24], policy);
        let spec = WindowSpec { n0: 4, n1: 2, sided: WindowSide::TwoSided, welch: false };
        let (mp, mc) = rolling_means(&ds, &spec, Transform::Level, 8).unwrap();
        assert_eq!(mp.unwrap(), 3.0);
        assert_eq!(mc.unwrap(), 3.0);
        let (t, status) = complier_ttest(&ds, &spec, Transform::Level, 8, 0.05).unwrap();
        assert!(t.is_none());
        assert_eq!(status, ComplierStatus::Undetermined);
    }

    #[test]
    fn alternating_policy_with_indicator_treatment_separates() {
        let policy: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
        let d: Vec<f64> = policy.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let ds = ds_with(d, policy);
        let spec = WindowSpec { n0: 5, n1: 3, sided: WindowSide::TwoSided, welch: false };
        let (mp, mc) = rolling_means(&ds, &spec, Transform::Level, 15).unwrap();
        assert_eq!(mp.unwrap(), 1.0);
        assert_eq!(mc.unwrap(), 0.0);
    }

    #[test]
    fn one_sided_window_indices_by_hand() {
        // control indices (1-based in the narrative): {1,2,3,5,6,7,9,10};
        // at t0 = 8 (1-based) a one-sided window of three control dates
        // takes {5,6,7}
        let policy: Vec<bool> = vec![
            false, false, false, true, false, false, false, true, false, false,
        ];
        let d: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let ds = ds_with(d, policy);
        let spec = WindowSpec { n0: 3, n1: 2, sided: WindowSide::OneSidedLeft, welch: false };
        // t0 index 7 (0-based) is the policy date "8"
        let (_, mc) = rolling_means(&ds, &spec, Transform::Level, 7).unwrap();
        // control values at 0-based {4,5,6} are 5,6,7
        assert_eq!(mc.unwrap(), 6.0);
    }

    #[test]
    fn level_shift_invariance_and_square_sign_invariance() {
        let policy: Vec<bool> = (0..61).map(|i| i % 5 == 2).collect();
        let mut rng = crate::rng::stream_rng(99, 0);
        let d: Vec<f64> = (0..61).map(|_| crate::cv::standard_normal(&mut rng)).collect();
        let ds1 = ds_with(d.clone(), policy.clone());
        let ds2 = ds_with(d.iter().map(|v| v + 11.0).collect(), policy.clone());
        let ds3 = ds_with(d.iter().map(|v| -v).collect(), policy.clone());
        let spec = WindowSpec { n0: 8, n1: 3, sided: WindowSide::TwoSided, welch: false };
        for t0 in 20..40 {
            let (a, _) = complier_ttest(&ds1, &spec, Transform::Level, t0, 0.05).unwrap();
            let (b, _) = complier_ttest(&ds2, &spec, Transform::Level, t0, 0.05).unwrap();
            if let (Some(a), Some(b)) = (a, b) {
                assert!((a - b).abs() < 1e-9, "level shift changed t: {} vs {}", a, b);
            }
            let (s1, _) = complier_ttest(&ds1, &spec, Transform::Square, t0, 0.05).unwrap();
            let (s3, _) = complier_ttest(&ds3, &spec, Transform::Square, t0, 0.05).unwrap();
            if let (Some(s1), Some(s3)) = (s1, s3) {
                assert!((s1 - s3).abs() < 1e-9, "sign flip changed square t");
            }
        }
    }

    #[test]
    fn alpha_extremes_classify_nothing_or_everything() {
        let policy: Vec<bool> = (0..81).map(|i| i % 4 == 1).collect();
        let mut rng = crate::rng::stream_rng(100, 0);
        let d: Vec<f64> = (0..81).map(|_| crate::cv::standard_normal(&mut rng)).collect();
        let ds = ds_with(d, policy);
        let spec = WindowSpec { n0: 8, n1: 4, sided: WindowSide::TwoSided, welch: false };
        let strict = classify_all(&ds, &spec, Transform::Level, 1e-12).unwrap();
        assert!(strict.dates.iter().all(|c| c.status != ComplierStatus::Complier));
        let loose = classify_all(&ds, &spec, Transform::Level, 1.0 - 1e-12).unwrap();
        assert!(loose
            .dates
            .iter()
            .filter(|c| c.status != ComplierStatus::Undetermined)
            .all(|c| c.status == ComplierStatus::Complier));
    }

    #[test]
    fn exclusion_guard_sizes() {
        let policy: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let mut rng = crate::rng::stream_rng(101, 0);
        let d: Vec<f64> = (0..40).map(|_| crate::cv::standard_normal(&mut rng)).collect();
        let ds = ds_with(d, policy);
        let spec = WindowSpec { n0: 6, n1: 3, sided: WindowSide::TwoSided, welch: true };
        let report = classify_all(&ds, &spec, Transform::Level, 0.05).unwrap();
        let outcomes: Vec<f64> = (0..40).map(|_| crate::cv::standard_normal(&mut rng)).collect();
        // with the default minimum of five per side this may or may not
        // error depending on classification; with minimum one it must run
        let res1 = exclusion_test(&ds, &report, &outcomes, NonComplierSubset::All, 0.05, 1);
        assert!(res1.is_ok());
        let res_big = exclusion_test(&ds, &report, &outcomes, NonComplierSubset::All, 0.05, 1000);
        assert!(res_big.is_err());
    }
}
