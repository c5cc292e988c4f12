//! Closed-form asymptotic error covariance of co-array MUSIC on one-bit data,
//! its high-SNR limit, and the resolution-probability lower bound.
//!
//! Two evaluations are provided. [`ErrorForm::Theorem`] is the published
//! closed form verbatim (properness-based `Γ`, `Re{zᵀ T̄ C T̄ᴴ z*}` with a
//! `1/(Nπ²)` prefactor). [`ErrorForm::Derived`] propagates the exact delta-method
//! covariance of `r̃̈` through the first-order MUSIC perturbation
//! `δθ_k = -Im(z_kᵀ T̄ Ψ δφ) / (π cosθ_k p̄_k q_k)`, with `δφ` real.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::covariance::{normalized_from_pbar, offdiag_and_gamma};
use crate::error::{DoaError, Result};
use crate::estimators::Estimator;
use crate::geometry::{steering_matrix, ArrayGeometry, SelectionSet};
use crate::linalg::{c, pinv, proj_perp, rank, CMat, RMat};
use crate::moments::{gamma_matrix, gamma_matrix_exact, SigmaSource};
use crate::signal::SourceScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorForm {
    Theorem,
    Derived,
}

/// Asymptotic error covariance, radians².
#[derive(Debug, Clone)]
pub struct AsymptoticErrorModel {
    pub e: RMat,
    pub mse: Vec<f64>,
    pub q: Vec<f64>,
    pub estimator: Estimator,
    pub form: ErrorForm,
}

impl AsymptoticErrorModel {
    pub fn rmse_deg(&self) -> Vec<f64> {
        self.mse.iter().map(|m| m.sqrt().to_degrees()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionBound {
    pub delta_theta: f64,
    /// `max(0, raw)`.
    pub lower_bound: f64,
    pub raw: f64,
}

/// MUSIC sensitivity ingredients on the virtual ULA.
struct MusicSensitivity {
    z: Vec<CMat>,
    q: Vec<f64>,
}

fn music_sensitivity(thetas: &[f64], v: usize) -> Result<MusicSensitivity> {
    let pos: Vec<i64> = (0..v as i64).collect();
    let av = steering_matrix(&pos, thetas)?;
    let k = thetas.len();
    if rank(&av) < k {
        return Err(DoaError::DegenerateScene("A_v is rank deficient (coincident DoAs)".into()));
    }
    let perp = proj_perp(&av);
    let apinv = pinv(&av);
    let mut z = Vec::with_capacity(k);
    let mut q = Vec::with_capacity(k);
    for kk in 0..k {
        let dva = CMat::from_fn(v, 1, |i, _| av[(i, kk)] * i as f64);
        let beta = &perp * &dva;
        q.push((dva.adjoint() * &beta)[(0, 0)].re);
        let alpha = apinv.row(kk).transpose();
        z.push(beta.kronecker(&alpha));
    }
    Ok(MusicSensitivity { z, q })
}

/// `(J̄ᴴWJ̄)⁻¹J̄ᴴWΓWJ̄(J̄ᴴWJ̄)⁻¹`, with `W = I` for OCAB.
fn xi_covariance(w: Option<&CMat>, gamma: &CMat, sel: &SelectionSet) -> Result<CMat> {
    let jb = sel.jbar_c();
    let (lhs, right) = match w {
        Some(w) => (jb.adjoint() * w * &jb, jb.adjoint() * w),
        None => (jb.adjoint() * &jb, jb.adjoint()),
    };
    let inv = lhs
        .try_inverse()
        .ok_or(DoaError::IllConditioned { what: "J̄ᴴWJ̄", cond: f64::INFINITY })?;
    let left = &inv * right;
    Ok(&left * gamma * left.adjoint())
}

/// Error covariance for explicit `(θ, p̄)` with `R̄ = A diag(p̄) Aᴴ + (1 - Σp̄) I`.
pub fn error_covariance_pbar(
    geom: &ArrayGeometry,
    sel: &SelectionSet,
    thetas: &[f64],
    pbar: &[f64],
    n: usize,
    estimator: Estimator,
    form: ErrorForm,
    sigma_src: &SigmaSource,
) -> Result<AsymptoticErrorModel> {
    let k = thetas.len();
    if k >= sel.v {
        return Err(DoaError::Identifiability { sources: k, v: sel.v });
    }
    if estimator == Estimator::Icab {
        return Err(DoaError::Config("no closed-form error model for the unquantised estimator".into()));
    }
    let sens = music_sensitivity(thetas, sel.v)?;
    let rbar = normalized_from_pbar(geom, thetas, pbar)?;
    let od = offdiag_and_gamma(&rbar, sel)?;
    let sigma = sigma_src.evaluate(&rbar, sel, (u32::MAX as usize, 0))?;
    let gamma_exact = gamma_matrix_exact(&sigma, &od.gamma, sel);
    let w = match estimator {
        Estimator::Eocab => {
            let winv = gamma_exact.clone().try_inverse().ok_or(DoaError::IllConditioned {
                what: "Γ",
                cond: f64::INFINITY,
            })?;
            Some((&winv + winv.adjoint()) * c(0.5, 0.0))
        }
        _ => None,
    };
    let tbar = sel.tbar_c();
    let denom: Vec<f64> = (0..k).map(|kk| PI * thetas[kk].cos() * pbar[kk] * sens.q[kk]).collect();
    let mut e = RMat::zeros(k, k);
    match form {
        ErrorForm::Theorem => {
            let gamma = gamma_matrix(&sigma, &od.r_ddot)?;
            let x = xi_covariance(w.as_ref(), &gamma, sel)?;
            let mid = &tbar * x * tbar.adjoint();
            for a in 0..k {
                for b in 0..k {
                    let val = (sens.z[a].transpose() * &mid * sens.z[b].map(|z| z.conj()))[(0, 0)].re;
                    e[(a, b)] = val / (n as f64 * denom[a] * denom[b]);
                }
            }
        }
        ErrorForm::Derived => {
            let x = xi_covariance(w.as_ref(), &gamma_exact, sel)?;
            let cov_phi = (&sel.psi_inv * x * sel.psi_inv.adjoint()).map(|z| z.re);
            let tp = &tbar * &sel.psi;
            let g: Vec<RMat> = (0..k)
                .map(|kk| (sens.z[kk].transpose() * &tp).map(|z| -z.im / denom[kk]))
                .collect();
            for a in 0..k {
                for b in 0..k {
                    e[(a, b)] = (&g[a] * &cov_phi * g[b].transpose())[(0, 0)] / n as f64;
                }
            }
        }
    }
    let e = (&e + e.transpose()) * 0.5;
    let mse = (0..k).map(|kk| e[(kk, kk)]).collect();
    Ok(AsymptoticErrorModel { e, mse, q: sens.q, estimator, form })
}

pub fn asymptotic_error_covariance(
    scene: &SourceScene,
    geom: &ArrayGeometry,
    sel: &SelectionSet,
    n: usize,
    estimator: Estimator,
    form: ErrorForm,
    sigma_src: &SigmaSource,
) -> Result<AsymptoticErrorModel> {
    scene.validate()?;
    error_covariance_pbar(geom, sel, &scene.thetas, &scene.pbar(), n, estimator, form, sigma_src)
}

/// Equal-power infinite-SNR limit (`p̄_k = 1/K`, noiseless normalised covariance).
pub fn high_snr_mse_limit(
    thetas: &[f64],
    geom: &ArrayGeometry,
    sel: &SelectionSet,
    n: usize,
    estimator: Estimator,
    form: ErrorForm,
    sigma_src: &SigmaSource,
) -> Result<AsymptoticErrorModel> {
    SourceScene::new(thetas.to_vec(), vec![1.0; thetas.len()], 0.0)?;
    let k = thetas.len();
    error_covariance_pbar(geom, sel, thetas, &vec![1.0 / k as f64; k], n, estimator, form, sigma_src)
}

/// Two-dimensional Chebyshev lower bound on `P(max_i |θ̂_i - θ_i| < Δθ/2)`:
/// `1 - 2(ℰ₁+ℰ₂)/Δθ² - 2 sqrt(ℰ₁²+ℰ₂²+2ℰ₁ℰ₂-4ℰ₁₂²)/Δθ²`.
pub fn resolution_lower_bound(model: &AsymptoticErrorModel, k1: usize, k2: usize, delta_theta: f64) -> Result<ResolutionBound> {
    if k1 == k2 {
        return Err(DoaError::Domain("resolution needs two distinct sources".into()));
    }
    let (e1, e2, e12) = (model.e[(k1, k1)], model.e[(k2, k2)], model.e[(k1, k2)]);
    let disc = e1 * e1 + e2 * e2 + 2.0 * e1 * e2 - 4.0 * e12 * e12;
    if disc < 0.0 {
        return Err(DoaError::Domain(format!(
            "negative discriminant {disc:.3e} (E1={e1:.3e}, E2={e2:.3e}, E12={e12:.3e})"
        )));
    }
    let d2 = delta_theta * delta_theta;
    let raw = 1.0 - 2.0 * (e1 + e2) / d2 - 2.0 * disc.sqrt() / d2;
    Ok(ResolutionBound { delta_theta, lower_bound: raw.max(0.0), raw })
}
