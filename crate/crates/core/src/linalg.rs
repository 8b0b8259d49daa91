//! Shared numerical kernels: least-squares solves, the Bartlett/Newey-West
//! long-run variance estimator, and small symmetric-matrix utilities.
//!
//! All solves go through a column-pivoted Householder QR rather than normal
//! equations; near-collinear subsample designs are the normal case here, not
//! the exception.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Relative pivot tolerance for rank decisions.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Bartlett,
}

/// Bandwidth rule for the long-run variance window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthRule {
    Fixed(usize),
    /// b = floor(n^{1/3}) of the estimation window actually used.
    CubeRoot,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HacConfig {
    pub kernel: Kernel,
    pub bandwidth: BandwidthRule,
    pub prewhiten: bool,
}

impl Default for HacConfig {
    fn default() -> Self {
        HacConfig { kernel: Kernel::Bartlett, bandwidth: BandwidthRule::CubeRoot, prewhiten: false }
    }
}

impl HacConfig {
    pub fn fixed(b: usize) -> Self {
        HacConfig { bandwidth: BandwidthRule::Fixed(b), ..Default::default() }
    }

    pub fn bandwidth_for(&self, n: usize) -> usize {
        match self.bandwidth {
            BandwidthRule::Fixed(b) => b,
            BandwidthRule::CubeRoot => floor_cbrt(n),
        }
    }
}

/// floor(n^{1/3}) computed exactly for integer n.
pub fn floor_cbrt(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut b = (n as f64).cbrt().floor() as usize;
    while (b + 1) * (b + 1) * (b + 1) <= n {
        b += 1;
    }
    while b * b * b > n {
        b -= 1;
    }
    b
}

#[derive(Debug, Clone)]
pub struct LrvEstimate {
    pub matrix: Array2<f64>,
    pub bandwidth_used: usize,
    pub window_length: usize,
}

/// Newey-West long-run variance of a moment series (rows of `u`):
/// `(1/n) [G_0 + sum_{j=1..b} (1 - j/(b+1)) (G_j + G_j')]` with
/// `G_j = sum_{t>j} u_t u_{t-j}'`. No internal demeaning.
pub fn newey_west(u: &ArrayView2<f64>, cfg: &HacConfig) -> Result<LrvEstimate> {
    let n = u.nrows();
    if n < 2 {
        return Err(Error::config("newey_west needs at least 2 observations"));
    }
    let b = cfg.bandwidth_for(n);
    if b >= n {
        return Err(Error::config(format!("bandwidth {} must be < window length {}", b, n)));
    }
    if cfg.prewhiten {
        return newey_west_prewhitened(u, cfg, b);
    }
    Ok(LrvEstimate { matrix: nw_matrix(u, b), bandwidth_used: b, window_length: n })
}

fn nw_matrix(u: &ArrayView2<f64>, b: usize) -> Array2<f64> {
    let n = u.nrows();
    let k = u.ncols();
    let mut j0 = Array2::<f64>::zeros((k, k));
    for t in 0..n {
        let r = u.row(t);
        for i in 0..k {
            let ri = r[i];
            for jj in 0..k {
                j0[[i, jj]] += ri * r[jj];
            }
        }
    }
    for lag in 1..=b {
        let w = 1.0 - lag as f64 / (b as f64 + 1.0);
        let mut g = Array2::<f64>::zeros((k, k));
        for t in lag..n {
            let rt = u.row(t);
            let rl = u.row(t - lag);
            for i in 0..k {
                let ri = rt[i];
                for jj in 0..k {
                    g[[i, jj]] += ri * rl[jj];
                }
            }
        }
        for i in 0..k {
            for jj in 0..k {
                j0[[i, jj]] += w * (g[[i, jj]] + g[[jj, i]]);
            }
        }
    }
    j0.mapv_inplace(|v| v / n as f64);
    // enforce exact symmetry against accumulation order effects
    for i in 0..k {
        for jj in (i + 1)..k {
            let s = 0.5 * (j0[[i, jj]] + j0[[jj, i]]);
            j0[[i, jj]] = s;
            j0[[jj, i]] = s;
        }
    }
    j0
}

/// VAR(1) prewhitening: filter, estimate on innovations, recolor.
fn newey_west_prewhitened(u: &ArrayView2<f64>, _cfg: &HacConfig, b: usize) -> Result<LrvEstimate> {
    let n = u.nrows();
    let k = u.ncols();
    if n < k + 2 {
        return Err(Error::config("window too short to prewhiten"));
    }
    let lagged = u.slice(ndarray::s![..n - 1, ..]).to_owned();
    let lead = u.slice(ndarray::s![1.., ..]).to_owned();
    let (a_t, innov) = ols(&lead, &lagged)?; // lead = lagged * A' + innov
    let b_in = b.min(innov.nrows() - 1);
    let j_in = nw_matrix(&innov.view(), b_in);
    // recolor: J = (I - A)^{-1} J_in (I - A)^{-T}
    let mut ima = Array2::<f64>::eye(k);
    for i in 0..k {
        for jj in 0..k {
            ima[[i, jj]] -= a_t[[jj, i]];
        }
    }
    let inv = inv_via_qr(&ima)
        .map_err(|_| Error::singular("prewhitening filter (I - A) is singular"))?;
    let m = inv.dot(&j_in).dot(&inv.t());
    let mut sym = m.clone();
    for i in 0..k {
        for jj in 0..k {
            sym[[i, jj]] = 0.5 * (m[[i, jj]] + m[[jj, i]]);
        }
    }
    Ok(LrvEstimate { matrix: sym, bandwidth_used: b_in, window_length: n })
}

/// Column-pivoted Householder QR in compact form: reflector tails live below
/// the diagonal of `factors`, reflector heads and the scaling betas in side
/// vectors, R on and above the diagonal.
struct Qr {
    factors: Array2<f64>,
    heads: Vec<f64>,
    betas: Vec<f64>,
    perm: Vec<usize>,
    rank_ok: bool,
}

fn qr_decompose(x: &Array2<f64>) -> Qr {
    let n = x.nrows();
    let r = x.ncols();
    let mut a = x.clone();
    let steps = r.min(n);
    let mut heads = vec![0.0f64; steps];
    let mut betas = vec![0.0f64; steps];
    let mut perm: Vec<usize> = (0..r).collect();
    let mut col_norms: Vec<f64> = (0..r).map(|j| a.column(j).dot(&a.column(j))).collect();
    for k in 0..steps {
        let (pivot, _) = col_norms
            .iter()
            .enumerate()
            .skip(k)
            .fold((k, f64::MIN), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        if pivot != k {
            perm.swap(k, pivot);
            col_norms.swap(k, pivot);
            for i in 0..n {
                let tmp = a[[i, k]];
                a[[i, k]] = a[[i, pivot]];
                a[[i, pivot]] = tmp;
            }
        }
        let mut norm = 0.0;
        for i in k..n {
            norm += a[[i, k]] * a[[i, k]];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[[k, k]] >= 0.0 { -norm } else { norm };
        let beta = alpha * (alpha - a[[k, k]]);
        let head = a[[k, k]] - alpha;
        for j in (k + 1)..r {
            let mut dot = head * a[[k, j]];
            for i in (k + 1)..n {
                dot += a[[i, k]] * a[[i, j]];
            }
            let scale = dot / beta;
            a[[k, j]] -= scale * head;
            for i in (k + 1)..n {
                a[[i, j]] -= scale * a[[i, k]];
            }
            col_norms[j] -= a[[k, j]] * a[[k, j]];
            if col_norms[j] < 0.0 {
                col_norms[j] = 0.0;
            }
        }
        a[[k, k]] = alpha;
        heads[k] = head;
        betas[k] = beta;
    }
    let rank_ok = {
        let lead = a[[0, 0]].abs();
        let mut ok = n >= r && lead > 0.0;
        if ok {
            for k in 0..steps {
                if a[[k, k]].abs() < RANK_TOL * lead {
                    ok = false;
                    break;
                }
            }
        }
        ok
    };
    Qr { factors: a, heads, betas, perm, rank_ok }
}

impl Qr {
    /// y <- Q' y, in place, column by column.
    fn apply_qt(&self, y: &mut Array2<f64>) {
        let n = self.factors.nrows();
        let r = self.factors.ncols().min(n);
        for k in 0..r {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let head = self.heads[k];
            for c in 0..y.ncols() {
                let mut dot = head * y[[k, c]];
                for i in (k + 1)..n {
                    dot += self.factors[[i, k]] * y[[i, c]];
                }
                let scale = dot / beta;
                y[[k, c]] -= scale * head;
                for i in (k + 1)..n {
                    y[[i, c]] -= scale * self.factors[[i, k]];
                }
            }
        }
    }

    /// Solve R (P' w) = rhs_top for the permuted coefficients.
    fn back_substitute(&self, rhs: &Array2<f64>) -> Array2<f64> {
        let r = self.factors.ncols();
        let mut out = Array2::<f64>::zeros((r, rhs.ncols()));
        for c in 0..rhs.ncols() {
            for k in (0..r).rev() {
                let mut v = rhs[[k, c]];
                for j in (k + 1)..r {
                    v -= self.factors[[k, j]] * out[[j, c]];
                }
                out[[k, c]] = v / self.factors[[k, k]];
            }
        }
        // undo the column permutation
        let mut unperm = Array2::<f64>::zeros((r, rhs.ncols()));
        for (pos, &orig) in self.perm.iter().enumerate() {
            for c in 0..rhs.ncols() {
                unperm[[orig, c]] = out[[pos, c]];
            }
        }
        unperm
    }

    fn condition_proxy(&self) -> f64 {
        let r = self.factors.ncols().min(self.factors.nrows());
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for k in 0..r {
            let d = self.factors[[k, k]].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

/// Least-squares fit of each column of `yblock` on `xblock`.
/// Returns coefficients (r x k) and residuals (n x k); residuals are
/// orthogonal to the regressors up to roundoff.
pub fn ols(yblock: &Array2<f64>, xblock: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = xblock.nrows();
    let r = xblock.ncols();
    if yblock.nrows() != n {
        return Err(Error::config("ols: row mismatch"));
    }
    if n < r || r == 0 {
        return Err(Error::singular(format!("ols: {} rows for {} regressors", n, r)));
    }
    let qr = qr_decompose(xblock);
    if !qr.rank_ok {
        return Err(Error::singular("ols: rank-deficient design"));
    }
    let mut qty = yblock.clone();
    qr.apply_qt(&mut qty);
    let top = qty.slice(ndarray::s![..r, ..]).to_owned();
    let coef = qr.back_substitute(&top);
    let fitted = xblock.dot(&coef);
    let resid = yblock - &fitted;
    Ok((coef, resid))
}

/// Convenience wrapper for a single response vector.
pub fn ols_vec(y: &Array1<f64>, xblock: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let ymat = y.view().insert_axis(Axis(1)).to_owned();
    let (c, r) = ols(&ymat, xblock)?;
    Ok((c.column(0).to_owned(), r.column(0).to_owned()))
}

fn inv_via_qr(a: &Array2<f64>) -> Result<Array2<f64>> {
    let k = a.nrows();
    let eye = Array2::<f64>::eye(k);
    let (inv_t, _) = ols(&eye, a)?;
    Ok(inv_t)
}

/// Two-stage least squares of `y` on `[d : x]` with instruments `[z : x]`.
/// `z` is expected to be zero-filled outside the active subsample when a
/// subsample restriction applies. The standard error is HAC.
#[derive(Debug, Clone)]
pub struct TslsFit {
    pub beta: f64,
    pub se: f64,
    pub coef: Array1<f64>,
    pub residuals: Array1<f64>,
    pub first_stage_condition: f64,
}

pub fn tsls(
    y: &Array1<f64>,
    d: &Array1<f64>,
    x: &Array2<f64>,
    z: &Array2<f64>,
    hac: &HacConfig,
) -> Result<TslsFit> {
    let n = y.len();
    let p = x.ncols();
    let k = 1 + p;
    if d.len() != n || x.nrows() != n || z.nrows() != n {
        return Err(Error::config("tsls: row mismatch"));
    }
    if z.ncols() < 1 {
        return Err(Error::config("tsls: needs at least one instrument"));
    }
    if n <= k + z.ncols() {
        return Err(Error::singular("tsls: not enough observations"));
    }
    // regressors R = [d : x], instruments W = [z : x]
    let mut regs = Array2::<f64>::zeros((n, k));
    regs.column_mut(0).assign(d);
    for j in 0..p {
        regs.column_mut(1 + j).assign(&x.column(j));
    }
    let mut w = Array2::<f64>::zeros((n, z.ncols() + p));
    for j in 0..z.ncols() {
        w.column_mut(j).assign(&z.column(j));
    }
    for j in 0..p {
        w.column_mut(z.ncols() + j).assign(&x.column(j));
    }
    let (fs_coef, _) = ols(&regs, &w).map_err(|_| Error::singular("tsls: first stage singular"))?;
    let rhat = w.dot(&fs_coef);
    let qr = qr_decompose(&rhat);
    let cond = qr.condition_proxy();
    if !qr.rank_ok || cond > 1e12 {
        return Err(Error::weak_id(format!(
            "projected design condition {:.3e}; robust inference advised",
            cond
        )));
    }
    let ymat = y.view().insert_axis(Axis(1)).to_owned();
    let mut qty = ymat.clone();
    qr.apply_qt(&mut qty);
    let top = qty.slice(ndarray::s![..k, ..]).to_owned();
    let coef = qr.back_substitute(&top).column(0).to_owned();
    let fitted = regs.dot(&coef);
    let resid = y - &fitted;

    // HAC sandwich on the projected design
    let mut moments = Array2::<f64>::zeros((n, k));
    for t in 0..n {
        for j in 0..k {
            moments[[t, j]] = rhat[[t, j]] * resid[t];
        }
    }
    let lrv = newey_west(&moments.view(), hac)?;
    let rtr = rhat.t().dot(&rhat);
    let rtr_inv = inv_via_qr(&rtr)?;
    let nf = n as f64;
    let dof_adj = nf / (nf - k as f64);
    // meat = n * J, so cov = (R'R)^{-1} (n J) (R'R)^{-1} with a dof correction
    let cov = rtr_inv.dot(&lrv.matrix).dot(&rtr_inv) * nf * dof_adj;
    let var_beta = cov[[0, 0]];
    if !(var_beta.is_finite() && var_beta >= 0.0) {
        return Err(Error::singular("tsls: covariance not PSD"));
    }
    Ok(TslsFit {
        beta: coef[0],
        se: var_beta.sqrt(),
        coef,
        residuals: resid,
        first_stage_condition: cond,
    })
}

/// Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// (ascending) and the orthonormal eigenvectors as columns.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frob(&m)) {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let apq = m[[i, j]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[i, i]];
                let aqq = m[[j, j]];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mik = m[[i, k]];
                    let mjk = m[[j, k]];
                    m[[i, k]] = c * mik - s * mjk;
                    m[[j, k]] = s * mik + c * mjk;
                }
                for k in 0..n {
                    let mki = m[[k, i]];
                    let mkj = m[[k, j]];
                    m[[k, i]] = c * mki - s * mkj;
                    m[[k, j]] = s * mki + c * mkj;
                }
                for k in 0..n {
                    let vki = v[[k, i]];
                    let vkj = v[[k, j]];
                    v[[k, i]] = c * vki - s * vkj;
                    v[[k, j]] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a_, &b_| m[[a_, a_]].partial_cmp(&m[[b_, b_]]).unwrap());
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (pos, &idx) in order.iter().enumerate() {
        vals[pos] = m[[idx, idx]];
        vecs.column_mut(pos).assign(&v.column(idx));
    }
    (vals, vecs)
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Symmetric inverse square root with an eigenvalue floor relative to the
/// trace; errors when the matrix is essentially zero.
pub fn sym_inv_sqrt(a: &Array2<f64>) -> Result<Array2<f64>> {
    sym_power(a, -0.5)
}

pub fn sym_sqrt(a: &Array2<f64>) -> Result<Array2<f64>> {
    sym_power(a, 0.5)
}

pub fn sym_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    sym_power(a, -1.0)
}

fn sym_power(a: &Array2<f64>, pow: f64) -> Result<Array2<f64>> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let trace: f64 = vals.iter().sum::<f64>().abs();
    if trace <= 0.0 {
        return Err(Error::singular("symmetric matrix has zero trace"));
    }
    let floor = 1e-12 * trace;
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        let lam = vals[k];
        if pow < 0.0 && lam <= floor {
            if lam < -floor {
                return Err(Error::singular("matrix is indefinite"));
            }
            // floored eigenvalue
            let lp = floor.powf(pow);
            accumulate_outer(&mut out, &vecs, k, lp);
            continue;
        }
        let lam_eff = lam.max(if pow < 0.0 { floor } else { 0.0 });
        let lp = if lam_eff <= 0.0 && pow > 0.0 { 0.0 } else { lam_eff.powf(pow) };
        accumulate_outer(&mut out, &vecs, k, lp);
    }
    Ok(out)
}

fn accumulate_outer(out: &mut Array2<f64>, vecs: &Array2<f64>, k: usize, scale: f64) {
    let n = out.nrows();
    for i in 0..n {
        let vi = vecs[[i, k]] * scale;
        for j in 0..n {
            out[[i, j]] += vi * vecs[[j, k]];
        }
    }
}

/// Quadratic form `s' A^{-1} s` for symmetric positive definite `A`.
pub fn quad_form_inv(a: &Array2<f64>, s: &Array1<f64>) -> Result<f64> {
    if a.nrows() == 1 {
        let denom = a[[0, 0]];
        if denom <= 0.0 {
            return Err(Error::singular("scalar long-run variance is not positive"));
        }
        return Ok(s[0] * s[0] / denom);
    }
    let inv = sym_inverse(a)?;
    Ok(s.dot(&inv.dot(s)))
}

/// Clip negative eigenvalues at zero (optional PSD repair).
pub fn psd_repair(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        if vals[k] > 0.0 {
            accumulate_outer(&mut out, &vecs, k, vals[k]);
        }
    }
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Array2<f64>) -> f64 {
    let (vals, _) = sym_eigen(a);
    vals[0]
}

/// Solve `A u = b` for a small symmetric positive definite `A` stored
/// row-major; `None` when the Cholesky factorization breaks down.
pub fn chol_solve_small(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    for k in 0..n {
        let mut d = l[k * n + k];
        for m in 0..k {
            d -= l[k * n + m] * l[k * n + m];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dk = d.sqrt();
        l[k * n + k] = dk;
        for i in (k + 1)..n {
            let mut v = l[i * n + k];
            for m in 0..k {
                v -= l[i * n + m] * l[k * n + m];
            }
            l[i * n + k] = v / dk;
        }
    }
    let mut u = b.to_vec();
    for i in 0..n {
        for m in 0..i {
            let t = u[m];
            u[i] -= l[i * n + m] * t;
        }
        u[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for m in (i + 1)..n {
            let t = u[m];
            u[i] -= l[m * n + i] * t;
        }
        u[i] /= l[i * n + i];
    }
    Some(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn newey_west_hand_values() {
        // zeros in, zeros out
        let z = Array2::<f64>::zeros((5, 1));
        let j = newey_west(&z.view(), &HacConfig::fixed(1)).unwrap();
        assert_eq!(j.matrix[[0, 0]], 0.0);

        // (1, -1) with no lags: (1 + 1)/2 = 1
        let u = array![[1.0], [-1.0]];
        let j = newey_west(&u.view(), &HacConfig::fixed(0)).unwrap();
        assert_relative_eq!(j.matrix[[0, 0]], 1.0);

        // (1, 2, 3) with one lag: 14/3 + 2*(1/2)*(8/3) = 22/3
        let u = array![[1.0], [2.0], [3.0]];
        let j = newey_west(&u.view(), &HacConfig::fixed(1)).unwrap();
        assert_relative_eq!(j.matrix[[0, 0]], 22.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn newey_west_bandwidth_must_fit() {
        let u = array![[1.0], [2.0], [3.0]];
        assert!(newey_west(&u.view(), &HacConfig::fixed(3)).is_err());
    }

    #[test]
    fn newey_west_quadratic_scaling_and_psd() {
        let mut rng = crate::rng::stream_rng(5, 0);
        for _ in 0..50 {
            let n = 30;
            let k = 3;
            let mut u = Array2::<f64>::zeros((n, k));
            for i in 0..n {
                for j in 0..k {
                    u[[i, j]] = crate::cv::standard_normal(&mut rng);
                }
            }
            let j1 = newey_west(&u.view(), &HacConfig::default()).unwrap();
            assert!(min_eigenvalue(&j1.matrix) >= -1e-10);
            let u2 = u.mapv(|v| 2.5 * v);
            let j2 = newey_west(&u2.view(), &HacConfig::default()).unwrap();
            for a in 0..k {
                for b in 0..k {
                    assert_relative_eq!(
                        j2.matrix[[a, b]],
                        6.25 * j1.matrix[[a, b]],
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn ols_hand_cases() {
        // y = x exactly
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]];
        let (coef, resid) = ols(&x.clone(), &x).unwrap();
        assert_relative_eq!(coef[[0, 0]], 1.0, epsilon = 1e-12);
        assert_relative_eq!(coef[[1, 1]], 1.0, epsilon = 1e-12);
        assert_relative_eq!(coef[[0, 1]], 0.0, epsilon = 1e-12);
        assert!(resid.iter().all(|v| v.abs() < 1e-12));

        // (1,2,3) on an intercept: coefficient 2, residuals (-1, 0, 1)
        let y = array![[1.0], [2.0], [3.0]];
        let ones = Array2::from_elem((3, 1), 1.0);
        let (coef, resid) = ols(&y, &ones).unwrap();
        assert_relative_eq!(coef[[0, 0]], 2.0, epsilon = 1e-12);
        assert_relative_eq!(resid[[0, 0]], -1.0, epsilon = 1e-12);
        assert_relative_eq!(resid[[1, 0]], 0.0, epsilon = 1e-12);
        assert_relative_eq!(resid[[2, 0]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_underdetermined_is_singular() {
        let y = array![[1.0], [2.0]];
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert!(ols(&y, &x).is_err());
    }

    #[test]
    fn ols_residuals_orthogonal_to_design() {
        let mut rng = crate::rng::stream_rng(6, 0);
        let n = 40;
        let mut x = Array2::<f64>::zeros((n, 3));
        let mut y = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            x[[i, 1]] = crate::cv::standard_normal(&mut rng);
            x[[i, 2]] = crate::cv::standard_normal(&mut rng);
            y[[i, 0]] = 2.0 * x[[i, 1]] - x[[i, 2]] + crate::cv::standard_normal(&mut rng);
        }
        let (_, resid) = ols(&y, &x).unwrap();
        let xt_r = x.t().dot(&resid);
        let scale: f64 = y.iter().map(|v| v.abs()).sum();
        for v in xt_r.iter() {
            assert!(v.abs() < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn tsls_noiseless_unit_coefficient() {
        let n = 24;
        let mut z = Array2::<f64>::zeros((n, 1));
        let mut d = Array1::<f64>::zeros(n);
        for i in 0..n {
            z[[i, 0]] = (i as f64 * 0.7).sin() + 0.1 * i as f64;
            d[i] = z[[i, 0]];
        }
        let y = d.clone();
        let x = Array2::<f64>::zeros((n, 0));
        let fit = tsls(&y, &d, &x, &z, &HacConfig::default()).unwrap();
        assert_relative_eq!(fit.beta, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn tsls_equivariance_and_instrument_scaling() {
        let mut rng = crate::rng::stream_rng(7, 0);
        let n = 60;
        let mut z = Array2::<f64>::zeros((n, 1));
        let mut d = Array1::<f64>::zeros(n);
        let mut y = Array1::<f64>::zeros(n);
        let mut x = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            z[[i, 0]] = crate::cv::standard_normal(&mut rng);
            d[i] = 0.8 * z[[i, 0]] + crate::cv::standard_normal(&mut rng);
            y[i] = 1.5 * d[i] + crate::cv::standard_normal(&mut rng);
        }
        let base = tsls(&y, &d, &x, &z, &HacConfig::default()).unwrap();
        let y2 = y.mapv(|v| 3.0 * v);
        let up = tsls(&y2, &d, &x, &z, &HacConfig::default()).unwrap();
        assert_relative_eq!(up.beta, 3.0 * base.beta, max_relative = 1e-10);
        let d2 = d.mapv(|v| 2.0 * v);
        let down = tsls(&y, &d2, &x, &z, &HacConfig::default()).unwrap();
        assert_relative_eq!(down.beta, base.beta / 2.0, max_relative = 1e-10);
        let z2 = z.mapv(|v| -4.0 * v);
        let zs = tsls(&y, &d, &x, &z2, &HacConfig::default()).unwrap();
        assert_relative_eq!(zs.beta, base.beta, max_relative = 1e-10);
        assert_relative_eq!(zs.se, base.se, max_relative = 1e-8);
    }

    #[test]
    fn sym_eigen_and_inverse_sqrt() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let (vals, vecs) = sym_eigen(&a);
        // reconstruct
        let mut rec = Array2::<f64>::zeros((2, 2));
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    rec[[i, j]] += vals[k] * vecs[[i, k]] * vecs[[j, k]];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(rec[[i, j]], a[[i, j]], epsilon = 1e-10);
            }
        }
        let hinv = sym_inv_sqrt(&a).unwrap();
        let prod = hinv.dot(&a).dot(&hinv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(prod[[i, j]], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn chol_solve_matches_direct() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let b = [5.0, 4.0];
        let u = chol_solve_small(&a, &b, 2).unwrap();
        // A u = b
        assert_relative_eq!(4.0 * u[0] + u[1], 5.0, epsilon = 1e-12);
        assert_relative_eq!(u[0] + 3.0 * u[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn prewhitened_lrv_recovers_ar1_scale() {
        // AR(1) with rho 0.6: long-run variance sigma^2/(1-rho)^2
        let mut rng = crate::rng::stream_rng(8, 0);
        let n = 4000;
        let mut u = Array2::<f64>::zeros((n, 1));
        let mut e = 0.0;
        for i in 0..n {
            e = 0.6 * e + crate::cv::standard_normal(&mut rng);
            u[[i, 0]] = e;
        }
        let cfg = HacConfig { prewhiten: true, ..Default::default() };
        let j = newey_west(&u.view(), &cfg).unwrap();
        let want = 1.0 / (0.4f64 * 0.4);
        assert!((j.matrix[[0, 0]] - want).abs() < 0.25 * want, "{} vs {}", j.matrix[[0, 0]], want);
    }
}
