//! Heteroskedasticity-based identification: the policy/control
//! covariance-difference ratio and its just-identified IV reformulation.

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::linalg::{tsls, HacConfig};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Demeaned event-study frame: outcome and policy-variable changes with
/// full-sample means removed, plus the derived product and square series
/// used by the IV reformulation.
#[derive(Debug, Clone)]
pub struct EventStudyFrame {
    pub y_tilde: Array1<f64>,
    pub d_tilde: Array1<f64>,
    pub policy: Vec<bool>,
    /// d-tilde * y-tilde
    pub y_star: Array1<f64>,
    /// d-tilde squared
    pub d_star: Array1<f64>,
}

impl EventStudyFrame {
    /// Demeaning uses full-sample means, also when a subsample is analyzed
    /// later.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let policy = ds
            .policy_indicator
            .clone()
            .ok_or_else(|| Error::config("event-study frame needs a policy indicator"))?;
        let t = ds.t_len();
        let my = ds.y.sum() / t as f64;
        let md = ds.d.sum() / t as f64;
        let y_tilde = ds.y.mapv(|v| v - my);
        let d_tilde = ds.d.mapv(|v| v - md);
        let y_star = &y_tilde * &d_tilde;
        let d_star = d_tilde.mapv(|v| v * v);
        Ok(EventStudyFrame { y_tilde, d_tilde, policy, y_star, d_star })
    }

    pub fn t_len(&self) -> usize {
        self.y_tilde.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigobonDiagnostics {
    pub cov_policy: f64,
    pub cov_control: f64,
    pub var_policy: f64,
    pub var_control: f64,
    pub denominator: f64,
    pub n_policy: usize,
    pub n_control: usize,
}

/// Covariance-difference ratio over a (sub)sample:
/// `(Cov_P - Cov_C) / (Var_P - Var_C)` with raw-product sample moments of
/// the globally demeaned series. A near-zero variance difference is the
/// weak-identification failure mode of this estimand.
pub fn rigobon_estimand(
    frame: &EventStudyFrame,
    subsample: Option<&Partition>,
) -> Result<(f64, RigobonDiagnostics)> {
    let t = frame.t_len();
    let mask: Vec<bool> = match subsample {
        Some(p) => p.mask(t),
        None => vec![true; t],
    };
    let mut cov_p = 0.0;
    let mut cov_c = 0.0;
    let mut var_p = 0.0;
    let mut var_c = 0.0;
    let mut n_p = 0usize;
    let mut n_c = 0usize;
    let mut var_full = 0.0;
    for i in 0..t {
        let d = frame.d_tilde[i];
        var_full += d * d;
        if !mask[i] {
            continue;
        }
        let prod = frame.y_tilde[i] * d;
        if frame.policy[i] {
            cov_p += prod;
            var_p += d * d;
            n_p += 1;
        } else {
            cov_c += prod;
            var_c += d * d;
            n_c += 1;
        }
    }
    if n_p == 0 || n_c == 0 {
        return Err(Error::config(
            "both policy and control dates are needed inside the subsample",
        ));
    }
    cov_p /= n_p as f64;
    var_p /= n_p as f64;
    cov_c /= n_c as f64;
    var_c /= n_c as f64;
    var_full /= t as f64;
    let denom = var_p - var_c;
    let diag = RigobonDiagnostics {
        cov_policy: cov_p,
        cov_control: cov_c,
        var_policy: var_p,
        var_control: var_c,
        denominator: denom,
        n_policy: n_p,
        n_control: n_c,
    };
    if denom.abs() < 1e-8 * var_full {
        return Err(Error::weak_id(format!(
            "variance difference {:.3e} is numerically zero; the estimand is unidentified",
            denom
        )));
    }
    Ok(((cov_p - cov_c) / denom, diag))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IvReformulation {
    pub beta: f64,
    pub se: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

/// IV reformulation: regress `d~ y~` on `d~^2` with an intercept, using the
/// announcement dummy (restricted to the subsample) as the instrument.
/// Just-identified dummy IV equals the group-mean Wald ratio.
pub fn iv_reformulation(
    frame: &EventStudyFrame,
    subsample: Option<&Partition>,
    hac: &HacConfig,
) -> Result<IvReformulation> {
    let t = frame.t_len();
    let mask: Vec<bool> = match subsample {
        Some(p) => p.mask(t),
        None => vec![true; t],
    };
    let mut x = Array2::<f64>::zeros((t, 1));
    let mut z = Array2::<f64>::zeros((t, 1));
    for i in 0..t {
        x[[i, 0]] = 1.0;
        z[[i, 0]] = if mask[i] && frame.policy[i] { 1.0 } else { 0.0 };
    }
    let fit = tsls(&frame.y_star, &frame.d_star, &x, &z, hac)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("first_stage_condition".into(), fit.first_stage_condition);
    Ok(IvReformulation { beta: fit.beta, se: fit.se, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;

    fn frame_from(y: Vec<f64>, d: Vec<f64>, policy: Vec<bool>) -> EventStudyFrame {
        let t = y.len();
        let z: Array2<f64> =
            Array2::from_shape_fn((t, 1), |(i, _)| if policy[i] { 1.0 } else { 0.0 });
        let x = Array2::zeros((t, 0));
        let ds = Dataset::new(y.into(), d.into(), x, z, Some(policy)).unwrap();
        EventStudyFrame::from_dataset(&ds).unwrap()
    }

    #[test]
    fn four_point_hand_ratio() {
        // demeaned by construction: y and d sum to zero
        let y = vec![2.0, -2.0, 1.0, -1.0];
        let d = vec![2.0, -2.0, 1.0, -1.0];
        let policy = vec![true, true, false, false];
        let frame = frame_from(y, d, policy);
        // policy: cov = (4+4)/2 = 4, var = 4; control: cov = 1, var = 1
        // beta = (4-1)/(4-1) = 1
        let (beta, diag) = rigobon_estimand(&frame, None).unwrap();
        assert_relative_eq!(beta, 1.0, epsilon = 1e-12);
        assert_relative_eq!(diag.var_policy, 4.0, epsilon = 1e-12);
        assert_relative_eq!(diag.var_control, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equal_variances_fail_with_weak_identification() {
        let y = vec![1.0, -1.0, 0.5, -0.5];
        let d = vec![1.0, -1.0, 1.0, -1.0];
        let policy = vec![true, true, false, false];
        let frame = frame_from(y, d, policy);
        match rigobon_estimand(&frame, None) {
            Err(crate::error::Error::WeakIdentification(_)) => {}
            other => panic!("expected weak identification, got {:?}", other.map(|v| v.0)),
        }
    }

    #[test]
    fn scale_equivariance_and_label_swap_invariance() {
        let mut rng = crate::rng::stream_rng(55, 0);
        let t = 200;
        let policy: Vec<bool> = (0..t).map(|i| i % 4 == 0).collect();
        let mut y = Vec::with_capacity(t);
        let mut d = Vec::with_capacity(t);
        for &pol in &policy {
            let e = if pol { 2.0 } else { 1.0 } * crate::cv::standard_normal(&mut rng);
            let eta = crate::cv::standard_normal(&mut rng);
            let dd = e + 0.2 * eta;
            d.push(dd);
            y.push(1.5 * dd + eta);
        }
        let frame = frame_from(y.clone(), d.clone(), policy.clone());
        let (beta, _) = rigobon_estimand(&frame, None).unwrap();
        let frame_scaled = frame_from(y.iter().map(|v| 3.0 * v).collect(), d.clone(), policy.clone());
        let (beta3, _) = rigobon_estimand(&frame_scaled, None).unwrap();
        assert_relative_eq!(beta3, 3.0 * beta, max_relative = 1e-10);
        // swapping the labels flips the sign of numerator and denominator
        let swapped: Vec<bool> = policy.iter().map(|b| !b).collect();
        let frame_swapped = frame_from(y, d, swapped);
        let (beta_sw, _) = rigobon_estimand(&frame_swapped, None).unwrap();
        assert_relative_eq!(beta_sw, beta, max_relative = 1e-10);
    }

    #[test]
    fn dummy_iv_equals_group_mean_wald_on_the_full_sample() {
        let mut rng = crate::rng::stream_rng(56, 0);
        let t = 120;
        let policy: Vec<bool> = (0..t).map(|i| i % 3 == 1).collect();
        let mut y = Vec::with_capacity(t);
        let mut d = Vec::with_capacity(t);
        for &pol in &policy {
            let e = if pol { 1.8 } else { 0.9 } * crate::cv::standard_normal(&mut rng);
            let eta = crate::cv::standard_normal(&mut rng);
            let dd = e + 0.3 * eta;
            d.push(dd);
            y.push(0.7 * dd + eta);
        }
        let frame = frame_from(y, d, policy);
        let iv = iv_reformulation(&frame, None, &HacConfig::default()).unwrap();
        // group-mean Wald ratio of the derived series
        let (mut sp, mut np, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
        let (mut vp, mut vc) = (0.0, 0.0);
        for i in 0..frame.t_len() {
            if frame.policy[i] {
                sp += frame.y_star[i];
                vp += frame.d_star[i];
                np += 1;
            } else {
                sc += frame.y_star[i];
                vc += frame.d_star[i];
                nc += 1;
            }
        }
        let wald = (sp / np as f64 - sc / nc as f64) / (vp / np as f64 - vc / nc as f64);
        assert_relative_eq!(iv.beta, wald, max_relative = 1e-9);
        // and the Wald form matches the covariance-difference ratio exactly
        let (rig, _) = rigobon_estimand(&frame, None).unwrap();
        assert_relative_eq!(rig, wald, max_relative = 1e-9);
    }

    #[test]
    fn zero_variance_treatment_errors() {
        let y = vec![0.5, -0.5, 0.25, -0.25, 0.1, -0.1];
        let d = vec![1.0; 6];
        let policy = vec![true, false, true, false, true, false];
        let frame = frame_from(y, d, policy);
        assert!(iv_reformulation(&frame, None, &HacConfig::default()).is_err());
    }
}
