//! Spectral-condition analysis: operator norms, the contraction ratio
//! lambda = ||W|| / inf_xi |l + 2 i pi xi / g_hat(xi)|, shift search and
//! convergence-domain scans.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::DelayKernel;
use crate::linalg;

/// The n x n real space operator A, with an optional circulant tag that
/// unlocks O(n log n) spectral shortcuts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceOperator {
    matrix: Array2<f64>,
    circulant_row: Option<Vec<f64>>,
}

impl SpaceOperator {
    pub fn dense(matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "space operator must be square",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("operator has non-finite entries".into()));
        }
        Ok(Self { matrix, circulant_row: None })
    }

    /// Builds the full matrix from its first row, row i being the cyclic
    /// right-shift of row i-1; the circulant structure holds by construction.
    pub fn circulant(first_row: Vec<f64>) -> Result<Self> {
        let n = first_row.len();
        if n == 0 {
            return Err(Error::InvalidArgument("circulant row must be nonempty".into()));
        }
        if first_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("circulant row has non-finite entries".into()));
        }
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| first_row[(j + n - i) % n]);
        Ok(Self { matrix, circulant_row: Some(first_row) })
    }

    pub fn scalar(a: f64) -> Self {
        Self {
            matrix: Array2::from_elem((1, 1), a),
            circulant_row: Some(vec![a]),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn is_circulant(&self) -> bool {
        self.circulant_row.is_some()
    }

    pub fn circulant_row(&self) -> Option<&[f64]> {
        self.circulant_row.as_deref()
    }

    pub fn is_symmetric(&self) -> bool {
        linalg::is_symmetric(&self.matrix, 1e-12)
    }

    /// Eigenvalues when they are cheaply available: circulant operators via
    /// the DFT of the generating row, symmetric ones via Jacobi rotations.
    /// General non-normal operators return None.
    pub fn eigenvalues(&self) -> Option<Vec<Complex64>> {
        if let Some(row) = &self.circulant_row {
            return Some(linalg::circulant_eigenvalues(row));
        }
        if self.is_symmetric() {
            return Some(
                linalg::symmetric_eigenvalues(&self.matrix)
                    .into_iter()
                    .map(|e| Complex64::new(e, 0.0))
                    .collect(),
            );
        }
        None
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        if let Some(row) = &self.circulant_row {
            // normal operator: the norm is the largest eigenvalue magnitude
            return linalg::circulant_eigenvalues(row)
                .iter()
                .map(|e| e.norm())
                .fold(0.0, f64::max);
        }
        linalg::spectral_norm(&self.matrix)
    }

    /// W = l Id + A, preserving circulant structure.
    pub fn shifted(&self, l: f64) -> SpaceOperator {
        let mut matrix = self.matrix.clone();
        for i in 0..self.n() {
            matrix[[i, i]] += l;
        }
        let circulant_row = self.circulant_row.as_ref().map(|row| {
            let mut r = row.clone();
            r[0] += l;
            r
        });
        SpaceOperator { matrix, circulant_row }
    }

    /// Applies the operator to every column of an n x T field.
    pub fn apply_field(&self, field: &Array2<f64>) -> Array2<f64> {
        self.matrix.dot(field)
    }
}

/// A complex number in serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexPoint {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// One sample of the curve xi -> 2 i pi xi / g_hat(xi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub xi: f64,
    pub re: f64,
    pub im: f64,
}

/// Result of a spectral-condition evaluation for a fixed shift l.
///
/// The infimum is taken over the sampled grid, so `inf_curve_dist` can only
/// overestimate the true infimum and `feasible` is an optimistic flag;
/// the report carries the samples so consumers can refine the grid.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub l: f64,
    pub lambda: f64,
    pub feasible: bool,
    pub w_norm: f64,
    pub inf_curve_dist: f64,
    pub eigenvalues: Vec<ComplexPoint>,
    pub curve_samples: Vec<CurveSample>,
    pub per_mode_ratios: Option<Vec<(usize, f64)>>,
    /// Number of grid points excluded from the infimum because the curve has
    /// a pole there.
    pub poles_excluded: usize,
}

/// Spectral norm of a space operator, accurate to relative 1e-10.
pub fn operator_norm(w: &SpaceOperator) -> f64 {
    w.norm()
}

/// Evaluates the spectral condition for the shift l over a frequency grid.
pub fn contraction_ratio(
    a: &SpaceOperator,
    g: &DelayKernel,
    l: f64,
    xi_grid: &[f64],
) -> Result<SpectralReport> {
    if !(l.is_finite() && l != 0.0) {
        return Err(Error::InvalidArgument(format!("shift l = {l} must be nonzero")));
    }
    if xi_grid.is_empty() {
        return Err(Error::InvalidArgument("xi grid must be nonempty".into()));
    }

    let mut curve_samples = Vec::with_capacity(xi_grid.len());
    let mut inf_curve_dist = f64::INFINITY;
    let mut poles_excluded = 0;
    for &xi in xi_grid {
        match g.curve(xi) {
            Ok(c) => {
                curve_samples.push(CurveSample { xi, re: c.re, im: c.im });
                let dist = (Complex64::new(l, 0.0) + c).norm();
                if dist < inf_curve_dist {
                    inf_curve_dist = dist;
                }
            }
            Err(_) => poles_excluded += 1,
        }
    }
    if curve_samples.is_empty() {
        return Err(Error::InvalidArgument(
            "every grid point is a pole of the curve".into(),
        ));
    }

    let w_norm = a.shifted(l).norm();
    let lambda = w_norm / inf_curve_dist;
    let eigenvalues = a
        .eigenvalues()
        .map(|eigs| eigs.into_iter().map(ComplexPoint::from).collect())
        .unwrap_or_default();
    let per_mode = per_mode_ratios(a, g, l, xi_grid).ok();

    Ok(SpectralReport {
        l,
        lambda,
        feasible: lambda < 1.0,
        w_norm,
        inf_curve_dist,
        eigenvalues,
        curve_samples,
        per_mode_ratios: per_mode,
        poles_excluded,
    })
}

/// Per-eigenmode contraction ratios |l + a_k| / inf_xi |l + curve(xi)| for
/// diagonalizable (symmetric or circulant) operators.
///
/// Identifies the spatial modes on which the expansion converges even when
/// the global ratio reaches 1.
pub fn per_mode_ratios(
    a: &SpaceOperator,
    g: &DelayKernel,
    l: f64,
    xi_grid: &[f64],
) -> Result<Vec<(usize, f64)>> {
    let eigs = a.eigenvalues().ok_or_else(|| {
        Error::UnsupportedOperator(
            "per-mode ratios need a symmetric or circulant operator".into(),
        )
    })?;
    let mut inf = f64::INFINITY;
    let mut any = false;
    for &xi in xi_grid {
        if let Ok(c) = g.curve(xi) {
            any = true;
            let d = (Complex64::new(l, 0.0) + c).norm();
            if d < inf {
                inf = d;
            }
        }
    }
    if !any {
        return Err(Error::InvalidArgument(
            "every grid point is a pole of the curve".into(),
        ));
    }
    Ok(eigs
        .iter()
        .enumerate()
        .map(|(k, &e)| (k, (Complex64::new(l, 0.0) + e).norm() / inf))
        .collect())
}

/// Evaluates every candidate shift and returns the report with minimal
/// lambda; `feasible` is false on the returned report when no candidate
/// satisfies the spectral condition.
pub fn search_l(
    a: &SpaceOperator,
    g: &DelayKernel,
    candidates: &[f64],
    xi_grid: &[f64],
) -> Result<SpectralReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate list must be nonempty".into()));
    }
    let mut best: Option<SpectralReport> = None;
    for &l in candidates {
        let report = contraction_ratio(a, g, l, xi_grid)?;
        let better = match &best {
            None => true,
            Some(b) => report.lambda < b.lambda,
        };
        if better {
            best = Some(report);
        }
    }
    Ok(best.expect("nonempty candidates yield a report"))
}

/// Default shift candidates: 64 log-spaced magnitudes of both signs spanning
/// [1e-3, 1e6] times the spectral scale of A.
pub fn default_l_candidates(a: &SpaceOperator) -> Vec<f64> {
    let mut scale = a.norm();
    if scale == 0.0 {
        scale = 1.0;
    }
    let lo = (1e-3 * scale).ln();
    let hi = (1e6 * scale).ln();
    let count = 64;
    let mut out = Vec::with_capacity(2 * count);
    for i in 0..count {
        let f = i as f64 / (count - 1) as f64;
        let mag = (lo + f * (hi - lo)).exp();
        out.push(mag);
        out.push(-mag);
    }
    out
}

/// One cell of a convergence-domain scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainPoint {
    pub l: f64,
    pub r: f64,
    pub feasible: bool,
    pub min_dist: f64,
}

/// Feasibility atlas over (l, r): the closed ball of radius r centered at -l
/// is admissible iff r < min over the grid of |l + curve(xi)|.
pub fn domain_scan(
    g: &DelayKernel,
    l_values: &[f64],
    xi_values: &[f64],
    radii: &[f64],
) -> Vec<DomainPoint> {
    let min_dists: Vec<(f64, f64)> = l_values
        .par_iter()
        .map(|&l| {
            let mut min = f64::INFINITY;
            for &xi in xi_values {
                if let Ok(c) = g.curve(xi) {
                    let d = (Complex64::new(l, 0.0) + c).norm();
                    if d < min {
                        min = d;
                    }
                }
            }
            (l, min)
        })
        .collect();
    let mut out = Vec::with_capacity(l_values.len() * radii.len());
    for &(l, min_dist) in &min_dists {
        for &r in radii {
            out.push(DomainPoint { l, r, feasible: r < min_dist, min_dist });
        }
    }
    out
}
