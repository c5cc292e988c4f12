//! Stochastic snapshot model and the one-bit quantiser.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::geometry::{steering_matrix, ArrayGeometry};
use crate::linalg::{c, CMat};

/// Uncorrelated far-field sources in white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScene {
    /// DoAs in radians.
    pub thetas: Vec<f64>,
    /// Source powers `p_k`.
    pub powers: Vec<f64>,
    /// Noise variance `sigma^2`.
    pub noise_var: f64,
}

impl SourceScene {
    pub fn new(thetas: Vec<f64>, powers: Vec<f64>, noise_var: f64) -> Result<Self> {
        let scene = Self { thetas, powers, noise_var };
        scene.validate()?;
        Ok(scene)
    }

    /// Unit noise variance with per-source SNRs in dB.
    pub fn from_snr_db(thetas: Vec<f64>, snr_db: &[f64]) -> Result<Self> {
        let powers = if snr_db.len() == 1 {
            vec![db_to_lin(snr_db[0]); thetas.len()]
        } else {
            snr_db.iter().map(|&s| db_to_lin(s)).collect()
        };
        Self::new(thetas, powers, 1.0)
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    pub fn total_power(&self) -> f64 {
        self.noise_var + self.powers.iter().sum::<f64>()
    }

    /// Normalised powers `p_k / (sigma^2 + Σ p)`.
    pub fn pbar(&self) -> Vec<f64> {
        let tot = self.total_power();
        self.powers.iter().map(|p| p / tot).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(DoaError::InvalidScene("at least one source is required".into()));
        }
        if self.thetas.len() != self.powers.len() {
            return Err(DoaError::InvalidScene(format!(
                "{} angles but {} powers",
                self.thetas.len(),
                self.powers.len()
            )));
        }
        if let Some(t) = self.thetas.iter().find(|t| !(t.abs() <= PI / 2.0)) {
            return Err(DoaError::InvalidScene(format!("angle {t} rad outside [-pi/2, pi/2]")));
        }
        if let Some(p) = self.powers.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(DoaError::InvalidScene(format!("source power {p} must be positive")));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(DoaError::InvalidScene(format!("noise variance {} is invalid", self.noise_var)));
        }
        let mut sorted = self.thetas.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(DoaError::InvalidScene("DoAs must be distinct".into()));
        }
        Ok(())
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Independent generator for one Monte-Carlo trial.
///
/// The ChaCha key comes from `master_seed`; the 64-bit stream id is
/// `(point << 32) | trial`. Results therefore depend only on these three
/// numbers, never on scheduling or worker count.
pub fn trial_rng(master_seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((point as u64) << 32) | (trial as u64 & 0xffff_ffff));
    rng
}

/// Circular complex Gaussian sample with the given variance.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> num_complex::Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(s * re, s * im)
}

/// Draws `N` snapshots `y = A s + n` (an `M x N` matrix).
pub fn simulate_snapshots<R: Rng + ?Sized>(
    scene: &SourceScene,
    geom: &ArrayGeometry,
    n: usize,
    rng: &mut R,
) -> Result<CMat> {
    scene.validate()?;
    let a = steering_matrix(&geom.sensors, &scene.thetas)?;
    let (m, k) = (geom.m(), scene.k());
    let mut y = CMat::zeros(m, n);
    let mut s = vec![c(0.0, 0.0); k];
    for t in 0..n {
        for (sk, &p) in s.iter_mut().zip(&scene.powers) {
            *sk = complex_normal(rng, p);
        }
        for i in 0..m {
            let mut acc = complex_normal(rng, scene.noise_var);
            for kk in 0..k {
                acc += a[(i, kk)] * s[kk];
            }
            y[(i, t)] = acc;
        }
    }
    Ok(y)
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Entrywise `(sgn Re + j sgn Im)/sqrt(2)` with `sgn(0) = +1`.
pub fn one_bit_quantize(y: &CMat) -> CMat {
    y.map(|z| c(FRAC_1_SQRT_2 * sgn(z.re), FRAC_1_SQRT_2 * sgn(z.im)))
}
