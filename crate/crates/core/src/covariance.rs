//! Sign-data sample covariance, the arcsine law and its inverse, model
//! covariances and the `r̈` / `γ` parameterisations.

use std::f64::consts::PI;

use log::debug;
use num_complex::Complex64;

use crate::error::{DoaError, Result};
use crate::geometry::{steering_matrix, ArrayGeometry, SelectionSet};
use crate::linalg::{c, hermitian_part, CMat, CVec};
use crate::signal::SourceScene;

/// `|γ|` is clipped to this before forming `b = 1/sqrt(1-γ²)`.
pub const GAMMA_CLIP: f64 = 1.0 - 1e-6;

/// Entry tolerance when checking that a value lies in `[-1, 1]`.
const RANGE_TOL: f64 = 1e-12;

/// `(1/N) X Xᴴ`; the diagonal of sign data is exactly one by construction.
pub fn sample_covariance(x: &CMat) -> CMat {
    let n = x.ncols().max(1) as f64;
    let mut r = (x * x.adjoint()) / c(n, 0.0);
    let (sym, _) = hermitian_part(&r);
    r = sym;
    for i in 0..r.nrows() {
        r[(i, i)] = c(1.0, 0.0);
    }
    r
}

fn checked_asin(v: f64) -> Result<f64> {
    if v.abs() > 1.0 + RANGE_TOL || v.is_nan() {
        return Err(DoaError::Domain(format!("arcsine argument {v} outside [-1, 1]")));
    }
    Ok(v.clamp(-1.0, 1.0).asin())
}

/// `(2/π)(asin Re + j asin Im)` entrywise.
pub fn arcsine_law(rbar: &CMat) -> Result<CMat> {
    let mut out = CMat::zeros(rbar.nrows(), rbar.ncols());
    for (o, z) in out.iter_mut().zip(rbar.iter()) {
        *o = c(checked_asin(z.re)?, checked_asin(z.im)?) * (2.0 / PI);
    }
    Ok(out)
}

/// Entrywise `asin Re + j asin Im` (the arcsine law without the `2/π`).
pub fn asin_entrywise(rbar: &CMat) -> Result<CMat> {
    arcsine_law(rbar).map(|m| m * c(PI / 2.0, 0.0))
}

/// `sin(π/2 Re) + j sin(π/2 Im)` entrywise.
pub fn sine_map(rx: &CMat) -> CMat {
    rx.map(|z| c((PI / 2.0 * z.re).sin(), (PI / 2.0 * z.im).sin()))
}

/// Consistent estimate of the normalised covariance from the sign covariance.
pub fn reconstruct_normalized_covariance(rx_hat: &CMat) -> CMat {
    let (mut r, asym) = hermitian_part(&sine_map(rx_hat));
    if asym > 1e-12 {
        debug!("reconstructed covariance asymmetry {asym:.3e} symmetrised");
    }
    for i in 0..r.nrows() {
        r[(i, i)] = c(1.0, 0.0);
    }
    r
}

/// Model quantities of a scene on a geometry.
#[derive(Debug, Clone)]
pub struct ModelCovariance {
    pub r: CMat,
    pub rbar: CMat,
    pub pbar: Vec<f64>,
    /// `u_n = Σ_k p̄_k exp(jπ sinθ_k l_n)`, `1 <= n <= D-1`.
    pub u: Vec<Complex64>,
}

impl ModelCovariance {
    /// `φ = [Re u; Im u]`.
    pub fn phi(&self) -> Vec<f64> {
        self.u.iter().map(|z| z.re).chain(self.u.iter().map(|z| z.im)).collect()
    }
}

pub fn model_covariance(scene: &SourceScene, geom: &ArrayGeometry) -> Result<ModelCovariance> {
    scene.validate()?;
    let a = steering_matrix(&geom.sensors, &scene.thetas)?;
    let p = CVec::from_iterator(scene.k(), scene.powers.iter().map(|&p| c(p, 0.0)));
    let m = geom.m();
    let r = &a * CMat::from_diagonal(&p) * a.adjoint() + CMat::identity(m, m) * c(scene.noise_var, 0.0);
    let tot = scene.total_power();
    let rbar = &r / c(tot, 0.0);
    let pbar = scene.pbar();
    let u = geom
        .diffs
        .iter()
        .skip(1)
        .map(|&l| {
            scene
                .thetas
                .iter()
                .zip(&pbar)
                .map(|(&t, &pb)| Complex64::from_polar(pb, PI * t.sin() * l as f64))
                .sum()
        })
        .collect();
    Ok(ModelCovariance { r, rbar, pbar, u })
}

/// Normalised covariance built from `p̄` alone (noise fills the diagonal).
pub fn normalized_from_pbar(geom: &ArrayGeometry, thetas: &[f64], pbar: &[f64]) -> Result<CMat> {
    let a = steering_matrix(&geom.sensors, thetas)?;
    let m = geom.m();
    let p = CVec::from_iterator(pbar.len(), pbar.iter().map(|&p| c(p, 0.0)));
    let noise = 1.0 - pbar.iter().sum::<f64>();
    let mut r = &a * CMat::from_diagonal(&p) * a.adjoint() + CMat::identity(m, m) * c(noise, 0.0);
    for i in 0..m {
        r[(i, i)] = c(1.0, 0.0);
    }
    Ok(r)
}

/// Off-diagonal stack, the real vector `γ = F r̈` and weights `b`.
#[derive(Debug, Clone)]
pub struct OffDiag {
    pub r_ddot: CVec,
    pub gamma: Vec<f64>,
    pub b: Vec<f64>,
}

/// Extracts `r̈`, `γ` (clipped to `|γ| <= GAMMA_CLIP` before forming `b`) and `b`.
pub fn offdiag_and_gamma(rbar_like: &CMat, sel: &SelectionSet) -> Result<OffDiag> {
    let r_ddot = CVec::from_vec(sel.offdiag_vec(rbar_like));
    let g = &sel.f * &r_ddot;
    let scale = 1.0 + g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let resid = g.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if resid > 1e-10 * scale {
        return Err(DoaError::Domain(format!(
            "input is not Hermitian: imaginary residue of F r̈ is {resid:.3e}"
        )));
    }
    let gamma: Vec<f64> = g.iter().map(|z| z.re).collect();
    let b = gamma.iter().map(|&x| 1.0 / (1.0 - x.clamp(-GAMMA_CLIP, GAMMA_CLIP).powi(2)).sqrt()).collect();
    Ok(OffDiag { r_ddot, gamma, b })
}

/// Everything the estimators derive from one sign block.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub rx_hat: CMat,
    pub rbar_tilde: CMat,
    pub offdiag: OffDiag,
}

impl CovarianceBundle {
    pub fn from_signs(x: &CMat, sel: &SelectionSet) -> Result<Self> {
        let rx_hat = sample_covariance(x);
        let rbar_tilde = reconstruct_normalized_covariance(&rx_hat);
        let offdiag = offdiag_and_gamma(&rbar_tilde, sel)?;
        Ok(Self { rx_hat, rbar_tilde, offdiag })
    }
}
