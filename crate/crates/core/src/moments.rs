//! Sign moments of Gaussian vectors and the asymptotic covariance `Σ` of the
//! off-diagonal one-bit sample covariance.
//!
//! `Σ = (π²N/4) E{(r̂̈ₓ - r̈ₓ)(r̂̈ₓ - r̈ₓ)ᴴ}` is evaluated from first principles:
//! every entry is a fourth moment of the sign data, expanded into products of
//! real sign components. Four-variable sign moments come from Price's theorem,
//! integrating along `R(t) = (1-t)I + tR` from the independent case.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::arcsine_law;
use crate::error::{DoaError, Result};
use crate::geometry::SelectionSet;
use crate::linalg::{c, eigh, hermitian_part, psd_sqrt, CMat, CVec, RMat};
use crate::signal::{complex_normal, one_bit_quantize, trial_rng};

/// Absolute accuracy of the four-variable quadrature.
pub const QUAD_TOL: f64 = 1e-9;

/// `E{sgn z1 sgn z2} = (2/π) asin ρ`.
pub fn sign_moment2(rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0 + 1e-12) {
        return Err(DoaError::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(2.0 / PI * rho.clamp(-1.0, 1.0).asin())
}

/// `E{sgn z1 sgn z2 sgn z3 sgn z4}` for a zero-mean Gaussian with the given
/// correlation matrix (symmetric, unit diagonal, positive semidefinite).
pub fn sign_moment4(corr: &[[f64; 4]; 4]) -> Result<f64> {
    for i in 0..4 {
        if (corr[i][i] - 1.0).abs() > 1e-12 {
            return Err(DoaError::Domain(format!("diagonal entry {} is not one", corr[i][i])));
        }
        for j in 0..4 {
            if (corr[i][j] - corr[j][i]).abs() > 1e-12 || corr[i][j].abs() > 1.0 + 1e-12 {
                return Err(DoaError::Domain("correlation matrix is not symmetric in [-1, 1]".into()));
            }
        }
    }
    let m = RMat::from_fn(4, 4, |i, j| corr[i][j]);
    let min_eig = m.symmetric_eigenvalues().min();
    if min_eig < -1e-10 {
        return Err(DoaError::Domain(format!("correlation matrix not PSD (eigenvalue {min_eig:.3e})")));
    }
    Ok(price_moment4(corr))
}

/// Orthant probability `P(z > 0)` of a zero-mean four-variate Gaussian.
pub fn orthant_probability4(corr: &[[f64; 4]; 4]) -> Result<f64> {
    let mut pair_sum = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            pair_sum += sign_moment2(corr[i][j])?;
        }
    }
    Ok((1.0 + pair_sum + sign_moment4(corr)?) / 16.0)
}

/// Price-theorem integrand `dE/dt` at path parameter `t`.
fn price_rate(r: &[[f64; 4]; 4], t: f64) -> f64 {
    const PAIRS: [(usize, usize, usize, usize); 6] =
        [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2), (1, 2, 0, 3), (1, 3, 0, 2), (2, 3, 0, 1)];
    let mut acc = 0.0;
    for &(i, j, k, l) in &PAIRS {
        let rho = r[i][j];
        if rho == 0.0 {
            continue;
        }
        let a = t * rho;
        let den = (1.0 - a * a).max(1e-300);
        let (rki, rkj, rli, rlj, rkl) = (t * r[k][i], t * r[k][j], t * r[l][i], t * r[l][j], t * r[k][l]);
        let skk = 1.0 - (rki * rki + rkj * rkj - 2.0 * a * rki * rkj) / den;
        let sll = 1.0 - (rli * rli + rlj * rlj - 2.0 * a * rli * rlj) / den;
        let skl = rkl - (rki * rli + rkj * rlj - a * (rki * rlj + rkj * rli)) / den;
        let norm = (skk.max(0.0) * sll.max(0.0)).sqrt();
        let partial = if norm > 1e-300 { (skl / norm).clamp(-1.0, 1.0) } else { 0.0 };
        acc += rho * 4.0 * partial.asin() / (PI * PI * den.sqrt());
    }
    acc
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss-Kronrod 7/15 on `[a, b]`; returns `(integral, error estimate)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (idx, &x) in XGK.iter().take(7).enumerate() {
        let s = f(center - half * x) + f(center + half * x);
        kron += WGK[idx] * s;
        if idx % 2 == 1 {
            gauss += WG[idx / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod integration to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth >= 30 {
            return val;
        }
        let mid = 0.5 * (a + b);
        rec(f, a, mid, tol / 2.0, depth + 1) + rec(f, mid, b, tol / 2.0, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// Four-variable sign moment without input validation.
fn price_moment4(r: &[[f64; 4]; 4]) -> f64 {
    // t = 1 - s² removes the square-root endpoint singularity at t = 1.
    let g = |s: f64| 2.0 * s * price_rate(r, 1.0 - s * s);
    integrate(&g, 0.0, 1.0, QUAD_TOL).clamp(-1.0, 1.0)
}

/// Provenance of a `Σ` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Analytic,
    MonteCarlo,
}

/// `Σ` with its provenance; Monte-Carlo estimates carry standard errors.
#[derive(Debug, Clone)]
pub struct SigmaMatrix {
    pub sigma: CMat,
    pub provenance: SigmaMode,
    pub mc_trials: Option<usize>,
    /// Standard errors of `Re Σ` and `Im Σ` (Monte-Carlo only).
    pub se_re: Option<RMat>,
    pub se_im: Option<RMat>,
}

/// How `Σ` is obtained: quadrature, or Monte-Carlo resampling at `R̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSource {
    pub mode: SigmaMode,
    #[serde(default = "default_mc_trials")]
    pub mc_trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_mc_trials() -> usize {
    1_000_000
}

impl Default for SigmaSource {
    fn default() -> Self {
        Self { mode: SigmaMode::Analytic, mc_trials: default_mc_trials(), seed: 0 }
    }
}

impl SigmaSource {
    /// `Σ(R̄)`; Monte-Carlo draws use the substream `(point, trial)` of `seed`.
    pub fn evaluate(&self, rbar: &CMat, sel: &SelectionSet, stream: (usize, usize)) -> Result<CMat> {
        Ok(match self.mode {
            SigmaMode::Analytic => sigma_matrix(rbar, sel)?.sigma,
            SigmaMode::MonteCarlo => {
                let mut rng = trial_rng(self.seed, stream.0, stream.1);
                sigma_monte_carlo(rbar, sel, self.mc_trials, &mut rng)?.sigma
            }
        })
    }
}

/// Correlation between real sign components; variable `2i` is `Re y_i`, `2i+1` is `Im y_i`.
fn component_corr(rbar: &CMat, a: usize, b: usize) -> f64 {
    let (i, ca, j, cb) = (a / 2, a % 2, b / 2, b % 2);
    if a == b {
        return 1.0;
    }
    if i == j {
        return 0.0;
    }
    let z = rbar[(i, j)];
    match (ca, cb) {
        (0, 0) | (1, 1) => z.re,
        (1, 0) => z.im,
        _ => -z.im,
    }
}

/// Memoised `E{∏ sgn}` over sets of real sign components.
struct MomentTable<'a> {
    rbar: &'a CMat,
    memo: HashMap<[u16; 4], f64>,
}

impl<'a> MomentTable<'a> {
    fn new(rbar: &'a CMat) -> Self {
        Self { rbar, memo: HashMap::new() }
    }

    fn moment(&mut self, vars: [u16; 4]) -> f64 {
        // Squares of signs are one: cancel repeated components.
        let mut v = vars;
        v.sort_unstable();
        let mut left: [u16; 4] = [u16::MAX; 4];
        let mut n = 0;
        let mut idx = 0;
        while idx < 4 {
            if idx + 1 < 4 && v[idx] == v[idx + 1] {
                idx += 2;
            } else {
                left[n] = v[idx];
                n += 1;
                idx += 1;
            }
        }
        match n {
            0 => 1.0,
            2 => {
                let rho = component_corr(self.rbar, left[0] as usize, left[1] as usize);
                2.0 / PI * rho.clamp(-1.0, 1.0).asin()
            }
            4 => {
                if let Some(&val) = self.memo.get(&left) {
                    return val;
                }
                let mut r = [[0.0; 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        r[a][b] = component_corr(self.rbar, left[a] as usize, left[b] as usize);
                    }
                }
                let val = price_moment4(&r);
                self.memo.insert(left, val);
                val
            }
            _ => 0.0,
        }
    }
}

/// Checks the unit-diagonal Hermitian precondition shared by the `Σ` routines.
fn check_normalized(rbar: &CMat) -> Result<()> {
    let (_, asym) = hermitian_part(rbar);
    if asym > 1e-10 {
        return Err(DoaError::Domain(format!("matrix is not Hermitian (asymmetry {asym:.3e})")));
    }
    if let Some(i) = (0..rbar.nrows()).find(|&i| (rbar[(i, i)] - c(1.0, 0.0)).norm() > 1e-10) {
        return Err(DoaError::Domain(format!(
            "expected unit diagonal, entry {i} is {}",
            rbar[(i, i)]
        )));
    }
    Ok(())
}

/// Analytic `Σ(R̄)` from fourth-order sign moments.
pub fn sigma_matrix(rbar: &CMat, sel: &SelectionSet) -> Result<SigmaMatrix> {
    check_normalized(rbar)?;
    let (vals, _) = eigh(rbar);
    if vals[0] < -1e-10 {
        return Err(DoaError::Domain(format!("R̄ is not PSD (eigenvalue {:.3e})", vals[0])));
    }
    let rx = arcsine_law(rbar)?;
    let mut table = MomentTable::new(rbar);
    let n = sel.n_offdiag();
    let mut sigma = CMat::zeros(n, n);
    // Component choices: (variable offset, coefficient) for x and conj(x).
    let plain = [(0u16, c(FRAC_1_SQRT_2, 0.0)), (1u16, c(0.0, FRAC_1_SQRT_2))];
    let conj = [(0u16, c(FRAC_1_SQRT_2, 0.0)), (1u16, c(0.0, -FRAC_1_SQRT_2))];
    for pidx in 0..n {
        let (i, j) = sel.offdiag[pidx];
        for qidx in pidx..n {
            let (k, l) = sel.offdiag[qidx];
            // E{x_i x_j* x_k* x_l}
            let mut acc = c(0.0, 0.0);
            for &(oi, ci) in &plain {
                for &(oj, cj) in &conj {
                    for &(ok, ck) in &conj {
                        for &(ol, cl) in &plain {
                            let vars = [
                                2 * i as u16 + oi,
                                2 * j as u16 + oj,
                                2 * k as u16 + ok,
                                2 * l as u16 + ol,
                            ];
                            let mom = table.moment(vars);
                            if mom != 0.0 {
                                acc += ci * cj * ck * cl * mom;
                            }
                        }
                    }
                }
            }
            let val = (acc - rx[(i, j)] * rx[(k, l)].conj()) * (PI * PI / 4.0);
            sigma[(pidx, qidx)] = val;
            sigma[(qidx, pidx)] = val.conj();
        }
    }
    Ok(SigmaMatrix { sigma, provenance: SigmaMode::Analytic, mc_trials: None, se_re: None, se_im: None })
}

/// Monte-Carlo estimate of `Σ(R̄)` from `trials` simulated sign snapshots.
///
/// Snapshots are processed in batches of 1000; each batch yields an unbiased
/// covariance estimate, and the spread of the batch estimates gives the
/// standard errors. `trials` is rounded down to whole batches.
pub fn sigma_monte_carlo<R: Rng + ?Sized>(
    rbar: &CMat,
    sel: &SelectionSet,
    trials: usize,
    rng: &mut R,
) -> Result<SigmaMatrix> {
    check_normalized(rbar)?;
    if trials < 10_000 {
        return Err(DoaError::Domain(format!("need at least 1e4 trials, got {trials}")));
    }
    let m = rbar.nrows();
    let root = psd_sqrt(rbar);
    let n = sel.n_offdiag();
    // Batches of 1000: enough batches that the spread-based standard errors
    // stay calibrated even where a batch estimate is strongly skewed.
    let bsize = 1000;
    let nb = trials / bsize;
    let scale = PI * PI / 4.0;

    let mut mean_est = CMat::zeros(n, n);
    let mut sq_re = RMat::zeros(n, n);
    let mut sq_im = RMat::zeros(n, n);
    let mut y = CMat::zeros(m, bsize);
    let mut z = CMat::zeros(n, bsize);
    for _ in 0..nb {
        for col in 0..bsize {
            for row in 0..m {
                y[(row, col)] = complex_normal(rng, 1.0);
            }
        }
        let x = one_bit_quantize(&(&root * &y));
        for col in 0..bsize {
            for (p, &(i, j)) in sel.offdiag.iter().enumerate() {
                z[(p, col)] = x[(i, col)] * x[(j, col)].conj();
            }
        }
        let mu: CVec = z.column_mean();
        for col in 0..bsize {
            for p in 0..n {
                z[(p, col)] -= mu[p];
            }
        }
        let cov = (&z * z.adjoint()) * c(scale / (bsize as f64 - 1.0), 0.0);
        mean_est += &cov;
        for (idx, v) in cov.iter().enumerate() {
            sq_re[idx] += v.re * v.re;
            sq_im[idx] += v.im * v.im;
        }
    }
    let nbf = nb as f64;
    let sigma = mean_est / c(nbf, 0.0);
    let se = |sq: &RMat, part: fn(&Complex64) -> f64| {
        RMat::from_fn(n, n, |p, q| {
            let mu = part(&sigma[(p, q)]);
            ((sq[(p, q)] / nbf - mu * mu).max(0.0) * nbf / (nbf - 1.0) / nbf).sqrt()
        })
    };
    let se_re = se(&sq_re, |z| z.re);
    let se_im = se(&sq_im, |z| z.im);
    Ok(SigmaMatrix {
        sigma,
        provenance: SigmaMode::MonteCarlo,
        mc_trials: Some(nb * bsize),
        se_re: Some(se_re),
        se_im: Some(se_im),
    })
}

/// `Γ` exactly as displayed for the asymptotic error covariance:
/// the `Re Σ` and `Im Σ` parts weighted by the square-root factors of `r̈`.
pub fn gamma_matrix(sigma: &CMat, r_ddot: &CVec) -> Result<CMat> {
    let root = |x: f64| -> Result<f64> {
        let arg = 1.0 - x * x;
        if arg < -1e-12 {
            return Err(DoaError::Domain(format!("square-root argument {arg} is negative")));
        }
        Ok(arg.max(0.0).sqrt())
    };
    let n = r_ddot.len();
    let cr: Vec<f64> = r_ddot.iter().map(|z| root(z.re)).collect::<Result<_>>()?;
    let ci: Vec<f64> = r_ddot.iter().map(|z| root(z.im)).collect::<Result<_>>()?;
    let mut g = CMat::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let s = sigma[(p, q)];
            let re = 0.5 * (cr[p] * cr[q] + ci[p] * ci[q]) * s.re;
            let im = 0.5 * (ci[p] * cr[q] + cr[p] * ci[q]) * s.im;
            g[(p, q)] = c(re, im);
        }
    }
    Ok(g)
}

/// Delta-method covariance `N·Cov(r̃̈)` without assuming properness:
/// `F⁻¹ D F Σ Fᴴ D F⁻ᴴ` with `D = diag(sqrt(1 - γ²))`.
pub fn gamma_matrix_exact(sigma: &CMat, gamma: &[f64], sel: &SelectionSet) -> CMat {
    let d = CMat::from_diagonal(&CVec::from_iterator(
        gamma.len(),
        gamma.iter().map(|g| c((1.0 - g * g).max(0.0).sqrt(), 0.0)),
    ));
    let left = &sel.f_inv * &d * &sel.f;
    let g = &left * sigma * left.adjoint();
    hermitian_part(&g).0
}
