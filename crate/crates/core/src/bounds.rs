//! Worst-case (Gaussian-surrogate) Fisher information, the pessimistic one-bit
//! CRB, the unquantised CRB, identifiability rank tests and the high-SNR limit.
//!
//! All CRBs are in radians². Parameters are `ϱ = [θ; p̄]` for one-bit data and
//! `[θ; p̄; σ̄²]` for unquantised data.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covariance::{arcsine_law, asin_entrywise, normalized_from_pbar};
use crate::error::{DoaError, Result};
use crate::geometry::{steering_matrix, ArrayGeometry, SelectionSet};
use crate::linalg::{c, proj_perp, psd_sqrt, rank, singular_values, to_complex, unvec, CMat, RMat};
use crate::signal::SourceScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrbKind {
    OnebitPessimistic,
    InfiniteBit,
    OnebitHighSnrLimit,
}

#[derive(Debug, Clone)]
pub struct CrbReport {
    /// `K x K`, radians². Diagonal is `+inf` when `valid` is false.
    pub crb: RMat,
    pub fim_condition: f64,
    pub valid: bool,
    pub kind: CrbKind,
}

impl CrbReport {
    /// Square roots of the diagonal, in degrees.
    pub fn std_deg(&self) -> Vec<f64> {
        (0..self.crb.nrows()).map(|k| self.crb[(k, k)].sqrt().to_degrees()).collect()
    }
}

/// Building blocks of the worst-case FIM.
#[derive(Debug, Clone)]
pub struct FimComponents {
    /// `1/sqrt(1 - Re²)` per lag; zero at the zero lag.
    pub h: Vec<f64>,
    /// `1/sqrt(1 - Im²)` per lag; zero at the zero lag.
    pub hbar: Vec<f64>,
    /// `∂r_lag/∂θ`, `(2D-1) x K`, including the arcsine-law `2/π`.
    pub g: CMat,
    /// `∂r_lag/∂p̄`, `(2D-1) x K`.
    pub v: CMat,
    /// `diag(h̄) Re A_d + j diag(h) Im A_d`.
    pub bracket: CMat,
    /// `diag(h) Re A_d + j diag(h̄) Im A_d`.
    pub digamma: CMat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifiabilityVerdict {
    pub upsilon_rank: usize,
    pub full_column_rank: bool,
    /// `K <= v-1`.
    pub sufficient_identifiable: bool,
    /// `K >= D`.
    pub sufficient_unidentifiable: bool,
}

fn lag_values(geom: &ArrayGeometry, thetas: &[f64], pbar: &[f64]) -> Result<(CMat, Vec<Complex64>)> {
    let ad = steering_matrix(&geom.lags, thetas)?;
    let noise = 1.0 - pbar.iter().sum::<f64>();
    let vals = (0..geom.lags.len())
        .map(|i| {
            let s: Complex64 = (0..thetas.len()).map(|k| ad[(i, k)] * pbar[k]).sum();
            if geom.lags[i] == 0 {
                s + noise
            } else {
                s
            }
        })
        .collect();
    Ok((ad, vals))
}

fn weight(x: f64) -> Result<f64> {
    let arg = 1.0 - x * x;
    if arg <= 0.0 {
        return Err(DoaError::Domain(format!("lag value {x} gives a singular arcsine derivative")));
    }
    Ok(1.0 / arg.sqrt())
}

/// `h`, `h̄`, and the derivative matrices of the lag vector of `Rₓ`.
pub fn fim_components(geom: &ArrayGeometry, thetas: &[f64], pbar: &[f64]) -> Result<FimComponents> {
    let (ad, vals) = lag_values(geom, thetas, pbar)?;
    let nl = geom.lags.len();
    let k = thetas.len();
    let mut h = vec![0.0; nl];
    let mut hbar = vec![0.0; nl];
    for i in 0..nl {
        if geom.lags[i] != 0 {
            h[i] = weight(vals[i].re)?;
            hbar[i] = weight(vals[i].im)?;
        }
    }
    let bracket = CMat::from_fn(nl, k, |i, kk| c(hbar[i] * ad[(i, kk)].re, h[i] * ad[(i, kk)].im));
    let digamma = CMat::from_fn(nl, k, |i, kk| c(h[i] * ad[(i, kk)].re, hbar[i] * ad[(i, kk)].im));
    // ∂ρ_d/∂θ_k = 2j d cosθ_k p̄_k [bracket]_{d,k};  ∂ρ_d/∂p̄_k = (2/π)[ϝ]_{d,k}.
    let g = CMat::from_fn(nl, k, |i, kk| {
        bracket[(i, kk)] * c(0.0, 2.0 * geom.lags[i] as f64 * thetas[kk].cos() * pbar[kk])
    });
    let v = digamma.map(|z| z * (2.0 / PI));
    Ok(FimComponents { h, hbar, g, v, bracket, digamma })
}

/// Gaussian FIM `N Re tr(R⁻¹ ∂ᵢR R⁻¹ ∂ⱼR)` for a list of derivative matrices.
pub fn gaussian_fim(r: &CMat, derivs: &[CMat], n: usize) -> Result<RMat> {
    let rinv = r
        .clone()
        .try_inverse()
        .ok_or(DoaError::IllConditioned { what: "covariance", cond: f64::INFINITY })?;
    let prods: Vec<CMat> = derivs.iter().map(|d| &rinv * d).collect();
    let p = derivs.len();
    let mut fim = RMat::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let val = (&prods[a] * &prods[b]).trace().re * n as f64;
            fim[(a, b)] = val;
            fim[(b, a)] = val;
        }
    }
    Ok(fim)
}

fn lag_columns_to_matrices(cols: &CMat, sel: &SelectionSet) -> Vec<CMat> {
    let j = to_complex(&sel.j);
    (0..cols.ncols())
        .map(|k| unvec(&(&j * cols.column(k)), sel.m, sel.m))
        .collect()
}

/// Worst-case FIM of `[θ; p̄]` (`2K x 2K`).
pub fn worst_case_fim_pbar(
    geom: &ArrayGeometry,
    sel: &SelectionSet,
    thetas: &[f64],
    pbar: &[f64],
    n: usize,
) -> Result<RMat> {
    let comp = fim_components(geom, thetas, pbar)?;
    let rx = arcsine_law(&normalized_from_pbar(geom, thetas, pbar)?)?;
    let mut derivs = lag_columns_to_matrices(&comp.g, sel);
    derivs.extend(lag_columns_to_matrices(&comp.v, sel));
    gaussian_fim(&rx, &derivs, n)
}

pub fn worst_case_fim(scene: &SourceScene, geom: &ArrayGeometry, sel: &SelectionSet, n: usize) -> Result<RMat> {
    scene.validate()?;
    worst_case_fim_pbar(geom, sel, &scene.thetas, &scene.pbar(), n)
}

/// `Υ = [Δ ϝ]` with `Δ = diag(d)[diag(h̄)Re A_d + j diag(h)Im A_d]`.
pub fn upsilon(geom: &ArrayGeometry, thetas: &[f64], pbar: &[f64]) -> Result<CMat> {
    let comp = fim_components(geom, thetas, pbar)?;
    let k = thetas.len();
    let nl = geom.lags.len();
    Ok(CMat::from_fn(nl, 2 * k, |i, col| {
        if col < k {
            comp.bracket[(i, col)] * geom.lags[i] as f64
        } else {
            comp.digamma[(i, col - k)]
        }
    }))
}

pub fn identifiability_test_pbar(geom: &ArrayGeometry, thetas: &[f64], pbar: &[f64]) -> Result<IdentifiabilityVerdict> {
    let k = thetas.len();
    let ups = upsilon(geom, thetas, pbar)?;
    let r = rank(&ups);
    Ok(IdentifiabilityVerdict {
        upsilon_rank: r,
        full_column_rank: r == 2 * k,
        sufficient_identifiable: k < geom.v,
        sufficient_unidentifiable: k >= geom.d_count,
    })
}

pub fn identifiability_test(scene: &SourceScene, geom: &ArrayGeometry) -> Result<IdentifiabilityVerdict> {
    scene.validate()?;
    identifiability_test_pbar(geom, &scene.thetas, &scene.pbar())
}

fn condition(m: &RMat) -> f64 {
    let sv = singular_values(&to_complex(m));
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::MAX, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn invalid(k: usize, cond: f64, kind: CrbKind) -> CrbReport {
    let mut crb = RMat::from_element(k, k, f64::NAN);
    crb.fill_diagonal(f64::INFINITY);
    CrbReport { crb, fim_condition: cond, valid: false, kind }
}

/// `(1/(Nπ²)) (Re Qᴴ Π⊥_{M^{1/2}V} Q)⁻¹`.
fn projected_crb(msqrt: &CMat, gq: &CMat, v: &CMat, n: usize) -> Option<RMat> {
    let q = msqrt * gq;
    let proj = proj_perp(&(msqrt * v));
    let inner = (q.adjoint() * proj * &q).map(|z| z.re);
    let inner = (&inner + inner.transpose()) * 0.5;
    inner
        .try_inverse()
        .map(|inv| inv / (n as f64 * PI * PI))
        .filter(|m| m.iter().all(|x| x.is_finite()))
}

/// Kronecker-form weight `Jᴴ(Aᵀ ⊗ A)⁻¹J` for Hermitian `A`.
fn coarray_weight(a: &CMat, sel: &SelectionSet) -> Result<CMat> {
    let ainv = a
        .clone()
        .try_inverse()
        .ok_or(DoaError::IllConditioned { what: "covariance", cond: f64::INFINITY })?;
    let kron = ainv.transpose().kronecker(&ainv);
    let j = to_complex(&sel.j);
    let mut m = j.transpose() * kron * &j;
    m = (&m + m.adjoint()) * c(0.5, 0.0);
    Ok(m)
}

fn crb_onebit_core(
    geom: &ArrayGeometry,
    sel: &SelectionSet,
    thetas: &[f64],
    pbar: &[f64],
    n: usize,
    kind: CrbKind,
) -> Result<CrbReport> {
    let k = thetas.len();
    let verdict = identifiability_test_pbar(geom, thetas, pbar)?;
    let fim = worst_case_fim_pbar(geom, sel, thetas, pbar, n)?;
    let cond = condition(&fim);
    if !verdict.full_column_rank {
        return Ok(invalid(k, cond, kind));
    }
    let rbar = normalized_from_pbar(geom, thetas, pbar)?;
    let m = coarray_weight(&asin_entrywise(&rbar)?, sel)?;
    let msqrt = psd_sqrt(&m);
    let comp = fim_components(geom, thetas, pbar)?;
    let gq = CMat::from_fn(comp.bracket.nrows(), k, |i, kk| {
        comp.bracket[(i, kk)] * (geom.lags[i] as f64 * thetas[kk].cos() * pbar[kk])
    });
    match projected_crb(&msqrt, &gq, &comp.digamma, n) {
        Some(crb) => Ok(CrbReport { crb, fim_condition: cond, valid: true, kind }),
        None => Ok(invalid(k, cond, kind)),
    }
}

/// Pessimistic one-bit CRB from the projected closed form.
pub fn crb_onebit_pessimistic(scene: &SourceScene, geom: &ArrayGeometry, sel: &SelectionSet, n: usize) -> Result<CrbReport> {
    scene.validate()?;
    crb_onebit_core(geom, sel, &scene.thetas, &scene.pbar(), n, CrbKind::OnebitPessimistic)
}

/// `θ`-block of the inverse worst-case FIM (second computation route).
pub fn crb_from_fim(fim: &RMat, k: usize) -> Option<RMat> {
    fim.clone().try_inverse().map(|inv| inv.view((0, 0), (k, k)).into_owned())
}

/// CRB for unquantised data with parameters `[θ; p̄; σ̄²]`.
pub fn crb_infinite(scene: &SourceScene, geom: &ArrayGeometry, sel: &SelectionSet, n: usize) -> Result<CrbReport> {
    scene.validate()?;
    let (thetas, pbar) = (&scene.thetas, scene.pbar());
    let k = thetas.len();
    let rbar = normalized_from_pbar(geom, thetas, &pbar)?;
    let ad = steering_matrix(&geom.lags, thetas)?;
    let nl = geom.lags.len();
    let e = CMat::from_fn(nl, 1, |i, _| c(if geom.lags[i] == 0 { 1.0 } else { 0.0 }, 0.0));
    let mut vt = CMat::zeros(nl, k + 1);
    vt.view_mut((0, 0), (nl, k)).copy_from(&ad);
    vt.set_column(k, &e.column(0));
    let gq = CMat::from_fn(nl, k, |i, kk| ad[(i, kk)] * (geom.lags[i] as f64 * thetas[kk].cos() * pbar[kk]));

    // Full FIM for the validity check.
    let gfull = gq.map(|z| z * c(0.0, PI));
    let mut derivs = lag_columns_to_matrices(&gfull, sel);
    derivs.extend(lag_columns_to_matrices(&vt, sel));
    let fim = gaussian_fim(&rbar, &derivs, n)?;
    let cond = condition(&fim);
    let full = {
        let mut ups = CMat::zeros(nl, 2 * k + 1);
        ups.view_mut((0, 0), (nl, k)).copy_from(&gq);
        ups.view_mut((0, k), (nl, k + 1)).copy_from(&vt);
        rank(&ups) == 2 * k + 1
    };
    if !full {
        return Ok(invalid(k, cond, CrbKind::InfiniteBit));
    }
    let msqrt = psd_sqrt(&coarray_weight(&rbar, sel)?);
    match projected_crb(&msqrt, &gq, &vt, n) {
        Some(crb) => Ok(CrbReport { crb, fim_condition: cond, valid: true, kind: CrbKind::InfiniteBit }),
        None => Ok(invalid(k, cond, CrbKind::InfiniteBit)),
    }
}

/// One-bit CRB in the equal-power infinite-SNR limit (`p̄_k = 1/K`, no noise).
pub fn high_snr_crb_limit(thetas: &[f64], geom: &ArrayGeometry, sel: &SelectionSet, n: usize) -> Result<CrbReport> {
    SourceScene::new(thetas.to_vec(), vec![1.0; thetas.len()], 0.0)?;
    let k = thetas.len();
    let pbar = vec![1.0 / k as f64; k];
    crb_onebit_core(geom, sel, thetas, &pbar, n, CrbKind::OnebitHighSnrLimit)
}

/// Largest relative deviation between two matrices.
pub fn max_rel_diff(a: &RMat, b: &RMat) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (a - b).iter().map(|x| x.abs()).fold(0.0, f64::max) / scale
}

/// Singular values of `Υ` normalised by the largest (diagnostic output).
pub fn upsilon_spectrum(geom: &ArrayGeometry, thetas: &[f64], pbar: &[f64]) -> Result<Vec<f64>> {
    let sv = singular_values(&upsilon(geom, thetas, pbar)?);
    let max = sv.iter().copied().fold(0.0, f64::max);
    Ok(sv.iter().map(|s| s / max).collect())
}
