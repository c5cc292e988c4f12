//! Co-array MUSIC estimators: the enhanced weighted-least-squares version
//! (EOCAB) and the two baselines, one-bit (OCAB) and unquantised (ICAB)
//! co-array averaging.

use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covariance::{sample_covariance, CovarianceBundle};
use crate::error::{DoaError, Result};
use crate::geometry::SelectionSet;
use crate::linalg::{c, eigh, hermitian_condition, CMat, CVec};
use crate::moments::SigmaSource;
use crate::signal::one_bit_quantize;

/// Eigenvalue floor (relative to the largest) when projecting `R̄̃` onto the PSD cone.
const PSD_FLOOR: f64 = 1e-6;
/// `Σ̂` is ridge-regularised above this condition number.
const SIGMA_MAX_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Eocab,
    Ocab,
    Icab,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Eocab, Estimator::Ocab, Estimator::Icab];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Eocab => "eocab",
            Estimator::Ocab => "ocab",
            Estimator::Icab => "icab",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = DoaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eocab" => Ok(Estimator::Eocab),
            "ocab" => Ok(Estimator::Ocab),
            "icab" => Ok(Estimator::Icab),
            _ => Err(DoaError::Config(format!("unknown estimator '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusicOptions {
    /// Search grid spacing in degrees.
    pub grid_step_deg: f64,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self { grid_step_deg: 0.005 }
    }
}

/// MUSIC output, angles in radians sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicResult {
    pub thetas: Vec<f64>,
    /// Fewer than `K` local maxima were found; the missing angles were
    /// filled with the largest remaining grid values.
    pub flagged: bool,
}

/// `v x v` Hermitian Toeplitz matrix with first column `r(0), .., r(v-1)`.
pub fn augmented_covariance(lags: &[Complex64]) -> CMat {
    let v = lags.len();
    CMat::from_fn(v, v, |i, j| if i >= j { lags[i - j] } else { lags[j - i].conj() })
}

/// Lag values `r(0..v-1)` of the structured normalised covariance defined by `φ = [Re u; Im u]`.
pub fn lags_from_phi(phi: &[f64], sel: &SelectionSet) -> Vec<Complex64> {
    let h = phi.len() / 2;
    std::iter::once(c(1.0, 0.0))
        .chain((0..sel.v - 1).map(|n| c(phi[n], phi[h + n])))
        .collect()
}

/// Rebuilds the unit-diagonal `M x M` covariance from `φ`.
pub fn rebuild_rbar(phi: &[f64], sel: &SelectionSet) -> CMat {
    let h = phi.len() / 2;
    let u: Vec<Complex64> = (0..h).map(|n| c(phi[n], phi[h + n])).collect();
    sel.structured_matrix(&u)
}

/// `φ` from `ξ = Ψφ`, dropping the round-off imaginary residue.
fn phi_from_xi(xi: &CVec, sel: &SelectionSet) -> Vec<f64> {
    let phi = &sel.psi_inv * xi;
    let resid = phi.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if resid > 1e-8 {
        debug!("imaginary residue {resid:.3e} in φ");
    }
    phi.iter().map(|z| z.re).collect()
}

/// Unweighted co-array averaging `Ψ⁻¹ J̄† r̃̈`.
pub fn ocab_phi(r_ddot: &CVec, sel: &SelectionSet) -> Vec<f64> {
    let n = sel.jbar.ncols();
    let mut sum = CVec::zeros(n);
    let mut cnt = vec![0.0; n];
    for (row, z) in r_ddot.iter().enumerate() {
        let col = (0..n).find(|&cidx| sel.jbar[(row, cidx)] != 0.0).expect("each row hits one lag");
        sum[col] += z;
        cnt[col] += 1.0;
    }
    for (s, k) in sum.iter_mut().zip(&cnt) {
        *s /= *k;
    }
    phi_from_xi(&sum, sel)
}

/// The `F⁻¹ diag(b) F` factor that maps `Δr̈ₓ`-space to `Δr̃̈`-space weights.
fn weight_factor(b: &[f64], sel: &SelectionSet) -> CMat {
    let mut bf = sel.f.clone();
    for (mut row, &bi) in bf.row_iter_mut().zip(b) {
        row *= c(bi, 0.0);
    }
    &sel.f_inv * bf
}

/// Weighted least squares `Ψ⁻¹(J̄ᴴWJ̄)⁻¹J̄ᴴW r̃̈` with
/// `W = Fᴴdiag(b)F⁻ᴴ Σ⁻¹ F⁻¹diag(b)F`.
pub fn wls_phi(r_ddot: &CVec, b: &[f64], sigma: &CMat, sel: &SelectionSet) -> Result<Vec<f64>> {
    let a = weight_factor(b, sel);
    let cond = hermitian_condition(sigma);
    let sigma = if cond > SIGMA_MAX_COND {
        let n = sigma.nrows();
        let ridge = 1e-8 * sigma.trace().re / n as f64;
        warn!("Σ̂ condition number {cond:.3e}; adding ridge {ridge:.3e}");
        sigma + CMat::identity(n, n) * c(ridge, 0.0)
    } else {
        sigma.clone()
    };
    let chol = sigma
        .cholesky()
        .ok_or(DoaError::IllConditioned { what: "sigma", cond })?;
    let aj = &a * sel.jbar_c();
    let ar = &a * r_ddot;
    let wj = chol.solve(&aj);
    let wr = chol.solve(&ar);
    let lhs = aj.adjoint() * &wj;
    let rhs = aj.adjoint() * &wr;
    let lchol = lhs.clone().cholesky().ok_or(DoaError::IllConditioned {
        what: "J̄ᴴWJ̄",
        cond: hermitian_condition(&lhs),
    })?;
    let xi = lchol.solve(&rhs);
    Ok(phi_from_xi(&xi.column(0).into_owned(), sel))
}

/// Projects a unit-diagonal Hermitian matrix onto the PSD cone and restores the unit diagonal.
pub fn project_correlation(r: &CMat) -> CMat {
    let (vals, vecs) = eigh(r);
    let max = vals.iter().copied().fold(0.0, f64::max);
    if vals[0] >= PSD_FLOOR * max {
        return r.clone();
    }
    let d = CVec::from_iterator(vals.len(), vals.iter().map(|&l| c(l.max(PSD_FLOOR * max), 0.0)));
    let p = &vecs * CMat::from_diagonal(&d) * vecs.adjoint();
    let s: Vec<f64> = (0..p.nrows()).map(|i| 1.0 / p[(i, i)].re.sqrt()).collect();
    let mut out = CMat::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] * (s[i] * s[j]));
    for i in 0..out.nrows() {
        out[(i, i)] = c(1.0, 0.0);
    }
    out
}

/// Enhanced lag estimate from one-bit data, with `Σ` evaluated at the plug-in `R̄̃`.
pub fn enhanced_phi(bundle: &CovarianceBundle, sel: &SelectionSet) -> Result<Vec<f64>> {
    enhanced_phi_with(bundle, sel, &SigmaSource::default(), (0, 0))
}

/// [`enhanced_phi`] with an explicit `Σ` source and Monte-Carlo substream.
pub fn enhanced_phi_with(
    bundle: &CovarianceBundle,
    sel: &SelectionSet,
    sigma_src: &SigmaSource,
    stream: (usize, usize),
) -> Result<Vec<f64>> {
    let plug = project_correlation(&bundle.rbar_tilde);
    let sigma = sigma_src.evaluate(&plug, sel, stream)?;
    wls_phi(&bundle.offdiag.r_ddot, &bundle.offdiag.b, &sigma, sel)
}

/// MUSIC on a `v x v` covariance of a virtual ULA with half-wavelength spacing.
pub fn music(r: &CMat, k: usize, opts: &MusicOptions) -> Result<MusicResult> {
    let v = r.nrows();
    if k == 0 || k >= v {
        return Err(DoaError::Identifiability { sources: k, v });
    }
    if !(opts.grid_step_deg > 0.0 && opts.grid_step_deg <= 1.0) {
        return Err(DoaError::Config(format!("grid step {} deg must be in (0, 1]", opts.grid_step_deg)));
    }
    let (_, vecs) = eigh(r);
    let us = vecs.columns(v - k, k);
    let ps = &us * us.adjoint();
    // aᴴ P a = c_0 + 2 Re Σ_{d>0} c_d w^d with c_d = Σ_{j-i=d} P_ij.
    let coef: Vec<Complex64> = (0..v)
        .map(|d| (0..v - d).map(|i| ps[(i, i + d)]).sum())
        .collect();
    let noise = |theta_deg: f64| -> f64 {
        let w = Complex64::from_polar(1.0, PI * theta_deg.to_radians().sin());
        let mut acc = c(0.0, 0.0);
        for d in (1..v).rev() {
            acc = (acc + coef[d]) * w;
        }
        (v as f64 - coef[0].re - 2.0 * acc.re).max(1e-300)
    };
    let n = (180.0 / opts.grid_step_deg).round() as usize + 1;
    let step = 180.0 / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| -90.0 + i as f64 * step).collect();
    let spec: Vec<f64> = grid.iter().map(|&t| 1.0 / noise(t)).collect();

    let mut peaks: Vec<(f64, f64)> = (1..n - 1)
        .filter(|&i| spec[i] > spec[i - 1] && spec[i] > spec[i + 1])
        .map(|i| (golden_min(&noise, grid[i] - step, grid[i] + step), spec[i]))
        .collect();
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1));
    let flagged = peaks.len() < k;
    let mut thetas: Vec<f64> = peaks.iter().take(k).map(|p| p.0.to_radians()).collect();
    if flagged {
        warn!("MUSIC found {} of {k} peaks; filling from the spectrum", peaks.len());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| spec[j].total_cmp(&spec[i]));
        for i in order {
            if thetas.len() == k {
                break;
            }
            let t = grid[i].to_radians();
            if thetas.iter().all(|&s| (s - t).abs() > 1e-12) {
                thetas.push(t);
            }
        }
    }
    thetas.sort_by(f64::total_cmp);
    Ok(MusicResult { thetas, flagged })
}

/// Golden-section minimum of a unimodal function on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Lag values `r(0..v-1)` for one estimator from unquantised snapshots `y`.
pub fn estimate_lags(est: Estimator, y: &CMat, sel: &SelectionSet) -> Result<Vec<Complex64>> {
    estimate_lags_with(est, y, sel, &SigmaSource::default(), (0, 0))
}

/// [`estimate_lags`] with an explicit `Σ` source for the enhanced estimator.
pub fn estimate_lags_with(
    est: Estimator,
    y: &CMat,
    sel: &SelectionSet,
    sigma_src: &SigmaSource,
    stream: (usize, usize),
) -> Result<Vec<Complex64>> {
    match est {
        Estimator::Icab => {
            let n = y.ncols().max(1) as f64;
            let r = (y * y.adjoint()) / c(n, 0.0);
            let scale = r.trace().re / r.nrows() as f64;
            if !(scale > 0.0) {
                return Err(DoaError::DegenerateScene("zero snapshot power".into()));
            }
            let rv = crate::linalg::vec_of(&r);
            let mut sum = vec![c(0.0, 0.0); sel.j.ncols()];
            let mut cnt = vec![0.0; sel.j.ncols()];
            for (row, &col) in sel.lag_col.iter().enumerate() {
                sum[col] += rv[row];
                cnt[col] += 1.0;
            }
            let zero = sel.d_count - 1;
            Ok((0..sel.v).map(|d| sum[zero + d] / (cnt[zero + d] * scale)).collect())
        }
        Estimator::Ocab | Estimator::Eocab => {
            let bundle = CovarianceBundle::from_signs(&one_bit_quantize(y), sel)?;
            let phi = if est == Estimator::Ocab {
                ocab_phi(&bundle.offdiag.r_ddot, sel)
            } else {
                enhanced_phi_with(&bundle, sel, sigma_src, stream)?
            };
            Ok(lags_from_phi(&phi, sel))
        }
    }
}

/// Full pipeline: snapshots -> lag estimate -> augmented covariance -> MUSIC.
pub fn estimate_doas(
    est: Estimator,
    y: &CMat,
    k: usize,
    sel: &SelectionSet,
    opts: &MusicOptions,
) -> Result<MusicResult> {
    if k >= sel.v {
        return Err(DoaError::Identifiability { sources: k, v: sel.v });
    }
    estimate_doas_with(est, y, k, sel, opts, &SigmaSource::default(), (0, 0))
}

/// [`estimate_doas`] with an explicit `Σ` source for the enhanced estimator.
pub fn estimate_doas_with(
    est: Estimator,
    y: &CMat,
    k: usize,
    sel: &SelectionSet,
    opts: &MusicOptions,
    sigma_src: &SigmaSource,
    stream: (usize, usize),
) -> Result<MusicResult> {
    if k >= sel.v {
        return Err(DoaError::Identifiability { sources: k, v: sel.v });
    }
    let lags = estimate_lags_with(est, y, sel, sigma_src, stream)?;
    music(&augmented_covariance(&lags), k, opts)
}

/// One-bit sample covariance of `y` (convenience for callers holding raw snapshots).
pub fn sign_covariance(y: &CMat) -> CMat {
    sample_covariance(&one_bit_quantize(y))
}
