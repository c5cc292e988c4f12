//! Sparse linear array geometries, their difference co-arrays and the
//! structural selection matrices used by the estimator and the bounds.
//!
//! Conventions (fixed crate-wide):
//! * `vec` stacks columns; entry `(p, q)` of an `M x M` matrix sits at `q*M + p`.
//! * The off-diagonal stack `r̈` is `vec` with the `M` diagonal entries removed,
//!   so it runs column by column, skipping the diagonal.
//! * The lag vector `d` is `[-l_{D-1}, ..., 0, ..., l_{D-1}]`; column `c` of `J`
//!   and of `T` belongs to lag `d[c]`.
//! * The reduced parameter `ξ = Ψ φ = [u*; u]`: column `n-1` of `J̄` carries lag
//!   `-l_n` (value `u_n*`) and column `D-2+n` carries lag `+l_n` (value `u_n`).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::{c, CMat, RMat, J as IMAG};

/// Sensor set, difference co-array and its contiguous segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Sensor positions in half-wavelength units, in the caller's order.
    pub sensors: Vec<i64>,
    /// Sorted non-negative differences `|m_p - m_q|`.
    pub diffs: Vec<i64>,
    /// Cardinality of the difference set.
    pub d_count: usize,
    /// Largest `v` with `{0, .., v-1}` contained in the difference set.
    pub v: usize,
    /// Signed lags `[-l_{D-1}, .., 0, .., l_{D-1}]`.
    pub lags: Vec<i64>,
}

impl ArrayGeometry {
    pub fn m(&self) -> usize {
        self.sensors.len()
    }

    /// Number of off-diagonal entries `M^2 - M`.
    pub fn n_offdiag(&self) -> usize {
        let m = self.m();
        m * m - m
    }
}

/// Builds the difference co-array of a sensor set.
pub fn build_geometry(sensors: &[i64]) -> Result<ArrayGeometry> {
    if sensors.len() < 2 {
        return Err(DoaError::InvalidGeometry(format!(
            "need at least two sensors, got {}",
            sensors.len()
        )));
    }
    if let Some(&neg) = sensors.iter().find(|&&s| s < 0) {
        return Err(DoaError::InvalidGeometry(format!("negative sensor position {neg}")));
    }
    let mut sorted = sensors.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(DoaError::InvalidGeometry(format!("duplicate sensor position {}", w[0])));
    }

    let mut diffs: Vec<i64> = sensors
        .iter()
        .flat_map(|&a| sensors.iter().map(move |&b| (a - b).abs()))
        .collect();
    diffs.sort_unstable();
    diffs.dedup();
    let d_count = diffs.len();
    let v = diffs.iter().enumerate().take_while(|&(i, &l)| l == i as i64).count();
    let lags = diffs
        .iter()
        .rev()
        .map(|&l| -l)
        .chain(diffs.iter().skip(1).copied())
        .collect();
    Ok(ArrayGeometry { sensors: sensors.to_vec(), diffs, d_count, v, lags })
}

/// The four `M = 10` arrays used throughout the experiments.
pub fn standard_array(kind: &str) -> Result<Vec<i64>> {
    match kind.to_ascii_lowercase().as_str() {
        "nested" => Ok(vec![1, 2, 3, 4, 5, 6, 12, 18, 24, 30]),
        "coprime" | "co-prime" => Ok(vec![0, 3, 5, 6, 9, 10, 12, 15, 20, 25]),
        "mra" => Ok(vec![0, 1, 3, 6, 13, 20, 27, 31, 35, 36]),
        "ula" => Ok((0..10).collect()),
        other => Err(DoaError::UnknownPreset(other.to_string())),
    }
}

/// Parses either a preset name or a comma-separated position list.
pub fn parse_geometry_spec(spec: &str) -> Result<Vec<i64>> {
    let spec = spec.trim();
    if spec.chars().next().is_some_and(|ch| ch.is_ascii_digit() || ch == '-') {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|e| DoaError::InvalidGeometry(format!("bad position `{s}`: {e}")))
            })
            .collect()
    } else {
        standard_array(spec)
    }
}

/// Steering matrix with entries `exp(j*pi*sin(theta_k)*position_i)`.
pub fn steering_matrix(positions: &[i64], thetas: &[f64]) -> Result<CMat> {
    if let Some(&t) = thetas.iter().find(|t| !(t.abs() <= PI / 2.0 + 1e-12)) {
        return Err(DoaError::Domain(format!("angle {t} rad outside [-pi/2, pi/2]")));
    }
    Ok(CMat::from_fn(positions.len(), thetas.len(), |i, k| {
        Complex64::from_polar(1.0, PI * thetas[k].sin() * positions[i] as f64)
    }))
}

/// Structural matrices of a geometry.
#[derive(Debug, Clone)]
pub struct SelectionSet {
    pub m: usize,
    pub d_count: usize,
    pub v: usize,
    /// `L_n`, `0 <= n <= D-1`.
    pub l: Vec<RMat>,
    /// `M^2 x (2D-1)`.
    pub j: RMat,
    /// `J† = (JᵀJ)⁻¹Jᵀ`, i.e. per-lag averaging.
    pub j_pinv: RMat,
    /// `(M^2-M) x (2D-2)`.
    pub jbar: RMat,
    /// `(M^2-M) x (M^2-M)`, rows `[Re; Im]` of the above-diagonal entries.
    pub f: CMat,
    /// `F⁻¹ = 2Fᴴ` (rows of `F` are orthogonal with squared norm 1/2).
    pub f_inv: CMat,
    pub psi: CMat,
    pub psi_inv: CMat,
    /// `T_i`, stored at index `i-1`.
    pub t_blocks: Vec<RMat>,
    /// `[T_v; ..; T_1]`, `v^2 x (2D-1)`.
    pub t: RMat,
    /// `v^2 x (2D-2)`, satisfying `T J† Δr̄ = T̄ Δξ` for structured `Δr̄`.
    pub tbar: RMat,
    /// Off-diagonal position -> `(row, col)` of the `M x M` matrix.
    pub offdiag: Vec<(usize, usize)>,
    /// Off-diagonal position of the transposed entry.
    pub transpose_pos: Vec<usize>,
    /// Row indices of `vec` that hold diagonal entries.
    pub diag_rows: Vec<usize>,
    /// Lag-vector column of each `vec` row.
    pub lag_col: Vec<usize>,
}

/// Builds every selection matrix for a geometry.
pub fn selection_matrices(geom: &ArrayGeometry) -> SelectionSet {
    let m = geom.m();
    let dc = geom.d_count;
    let v = geom.v;
    let nl = 2 * dc - 1;
    let pos = &geom.sensors;

    let l: Vec<RMat> = geom
        .diffs
        .iter()
        .map(|&ell| RMat::from_fn(m, m, |p, q| if pos[p] - pos[q] == ell { 1.0 } else { 0.0 }))
        .collect();

    let lag_col: Vec<usize> = (0..m * m)
        .map(|row| {
            let (p, q) = (row % m, row / m);
            let diff = pos[p] - pos[q];
            geom.lags.iter().position(|&d| d == diff).expect("difference is in the co-array")
        })
        .collect();
    let mut j = RMat::zeros(m * m, nl);
    for (row, &col) in lag_col.iter().enumerate() {
        j[(row, col)] = 1.0;
    }
    let mut counts = vec![0.0; nl];
    for &col in &lag_col {
        counts[col] += 1.0;
    }
    let j_pinv = RMat::from_fn(nl, m * m, |cidx, row| {
        if lag_col[row] == cidx {
            1.0 / counts[cidx]
        } else {
            0.0
        }
    });

    let diag_rows: Vec<usize> = (0..m).map(|i| i * m + i).collect();
    let offdiag: Vec<(usize, usize)> = (0..m)
        .flat_map(|q| (0..m).filter(move |&p| p != q).map(move |p| (p, q)))
        .collect();
    let no = offdiag.len();
    let pos_of = |p: usize, q: usize| -> usize {
        // Column q holds M-1 off-diagonal entries; rows above the diagonal come first.
        q * (m - 1) + if p < q { p } else { p - 1 }
    };
    let transpose_pos: Vec<usize> = offdiag.iter().map(|&(p, q)| pos_of(q, p)).collect();

    // ξ column of a lag column: negative lag -l_n -> n-1, positive +l_n -> D-2+n.
    let xi_col = |lc: usize| -> Option<usize> {
        match lc.cmp(&(dc - 1)) {
            std::cmp::Ordering::Less => Some(dc - 1 - lc - 1),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(lc - 1),
        }
    };
    let mut jbar = RMat::zeros(no, 2 * dc - 2);
    for (k, &(p, q)) in offdiag.iter().enumerate() {
        let col = xi_col(lag_col[q * m + p]).expect("off-diagonal entries have non-zero lag");
        jbar[(k, col)] = 1.0;
    }

    let half = no / 2;
    let mut f = CMat::zeros(no, no);
    let mut row = 0;
    for p in 0..m {
        for q in (p + 1)..m {
            f[(row, pos_of(q, p))] = c(0.5, 0.0);
            f[(row, pos_of(p, q))] = c(0.5, 0.0);
            f[(half + row, pos_of(q, p))] = c(0.0, 0.5);
            f[(half + row, pos_of(p, q))] = c(0.0, -0.5);
            row += 1;
        }
    }
    let f_inv = f.adjoint() * c(2.0, 0.0);

    let h = dc - 1;
    let mut psi = CMat::zeros(2 * h, 2 * h);
    let mut psi_inv = CMat::zeros(2 * h, 2 * h);
    for i in 0..h {
        psi[(i, i)] = c(1.0, 0.0);
        psi[(i, h + i)] = -IMAG;
        psi[(h + i, i)] = c(1.0, 0.0);
        psi[(h + i, h + i)] = IMAG;
        psi_inv[(i, i)] = c(0.5, 0.0);
        psi_inv[(i, h + i)] = c(0.5, 0.0);
        psi_inv[(h + i, i)] = c(0.0, 0.5);
        psi_inv[(h + i, h + i)] = c(0.0, -0.5);
    }

    let t_blocks: Vec<RMat> = (1..=v)
        .map(|i| {
            let start = i + dc - v - 1;
            RMat::from_fn(v, nl, |r, col| if col == start + r { 1.0 } else { 0.0 })
        })
        .collect();
    let mut t = RMat::zeros(v * v, nl);
    for (blk, i) in (1..=v).rev().enumerate() {
        t.view_mut((blk * v, 0), (v, nl)).copy_from(&t_blocks[i - 1]);
    }
    let mut tbar = RMat::zeros(v * v, 2 * dc - 2);
    for lc in 0..nl {
        if let Some(xc) = xi_col(lc) {
            tbar.set_column(xc, &t.column(lc));
        }
    }

    SelectionSet {
        m,
        d_count: dc,
        v,
        l,
        j,
        j_pinv,
        jbar,
        f,
        f_inv,
        psi,
        psi_inv,
        t_blocks,
        t,
        tbar,
        offdiag,
        transpose_pos,
        diag_rows,
        lag_col,
    }
}

impl SelectionSet {
    /// Number of off-diagonal entries.
    pub fn n_offdiag(&self) -> usize {
        self.offdiag.len()
    }

    /// Off-diagonal stack `r̈` of an `M x M` matrix.
    pub fn offdiag_vec(&self, r: &CMat) -> Vec<Complex64> {
        self.offdiag.iter().map(|&(p, q)| r[(p, q)]).collect()
    }

    /// Unit-diagonal matrix `I + Σ u_n L_n + Σ u_n* L_nᵀ`.
    pub fn structured_matrix(&self, u: &[Complex64]) -> CMat {
        let mut r = CMat::identity(self.m, self.m);
        for (n, &un) in u.iter().enumerate() {
            let ln = &self.l[n + 1];
            for p in 0..self.m {
                for q in 0..self.m {
                    if ln[(p, q)] != 0.0 {
                        r[(p, q)] += un;
                        r[(q, p)] += un.conj();
                    }
                }
            }
        }
        r
    }

    /// `J̄` as a complex matrix.
    pub fn jbar_c(&self) -> CMat {
        self.jbar.map(|x| c(x, 0.0))
    }

    /// `T̄` as a complex matrix.
    pub fn tbar_c(&self) -> CMat {
        self.tbar.map(|x| c(x, 0.0))
    }
}

/// `[L̄_n]_{p,q} = 1` iff `p - q = n` on a `v x v` grid (negative `n` gives the transpose).
pub fn shift_matrix(v: usize, n: i64) -> DMatrix<f64> {
    DMatrix::from_fn(v, v, |p, q| if p as i64 - q as i64 == n { 1.0 } else { 0.0 })
}
