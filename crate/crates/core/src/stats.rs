//! Distribution helpers used by the decision rules.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn chi2_quantile(df: usize, p: f64) -> f64 {
    ChiSquared::new(df as f64).expect("valid dof").inverse_cdf(p)
}

pub fn chi2_cdf(df: usize, x: f64) -> f64 {
    ChiSquared::new(df as f64).expect("valid dof").cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_anchors() {
        assert!((chi2_quantile(1, 0.95) - 3.8415).abs() < 1e-3);
        assert!((chi2_quantile(2, 0.95) - 5.9915).abs() < 1e-3);
        assert!((normal_quantile(0.975) - 1.9600).abs() < 1e-3);
    }
}
