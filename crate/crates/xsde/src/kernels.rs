//! Causal delay measures, their Fourier transforms and history convolutions.
//!
//! A delay kernel is a finite measure g on the nonnegative reals, represented
//! as a sum of Dirac atoms and exponential densities:
//!
//! ```text
//! g = sum_j w_j delta_{theta_j}  +  sum_k m_k beta_k e^{-beta_k x} H(x) dx
//! ```
//!
//! The transform convention is g_hat(xi) = integral of e^{-2 i pi xi s} dg(s),
//! so atoms contribute w e^{-2 i pi xi theta} and exponential terms
//! m beta / (beta + 2 i pi xi).

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::timeops::TimeGrid;

/// Relative tolerance below which |g_hat| is treated as a pole of the curve.
const CURVE_POLE_TOL: f64 = 1e-12;

/// A Dirac atom w * delta_lag of the delay measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub lag: f64,
}

/// An exponential density mass * beta * e^{-beta x} H(x) dx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub mass: f64,
    pub beta: f64,
}

/// A causal finite measure on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayKernel {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(rename = "exp", default)]
    pub exp_terms: Vec<ExpTerm>,
}

impl DelayKernel {
    pub fn new(atoms: Vec<Atom>, exp_terms: Vec<ExpTerm>) -> Result<Self> {
        let g = Self { atoms, exp_terms };
        g.validate()?;
        Ok(g)
    }

    /// g = delta_0, the no-delay kernel.
    pub fn dirac() -> Self {
        Self {
            atoms: vec![Atom { weight: 1.0, lag: 0.0 }],
            exp_terms: Vec::new(),
        }
    }

    /// g = beta e^{-beta x} H(x) dx, exponentially distributed delays.
    pub fn exponential(beta: f64) -> Self {
        Self {
            atoms: Vec::new(),
            exp_terms: vec![ExpTerm { mass: 1.0, beta }],
        }
    }

    /// g = delta_0 + alpha delta_theta, a single fixed delay.
    pub fn single_delay(alpha: f64, theta: f64) -> Self {
        Self {
            atoms: vec![
                Atom { weight: 1.0, lag: 0.0 },
                Atom { weight: alpha, lag: theta },
            ],
            exp_terms: Vec::new(),
        }
    }

    /// Checks causality (lags >= 0), positive rates and finite total variation.
    pub fn validate(&self) -> Result<()> {
        for a in &self.atoms {
            if !a.weight.is_finite() || !a.lag.is_finite() {
                return Err(Error::InvalidKernel("non-finite atom".into()));
            }
            if a.lag < 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "atom lag {} is negative; the measure must be supported on t >= 0",
                    a.lag
                )));
            }
        }
        for e in &self.exp_terms {
            if !e.mass.is_finite() || !e.beta.is_finite() {
                return Err(Error::InvalidKernel("non-finite exponential term".into()));
            }
            if e.beta <= 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "exponential rate beta = {} must be positive",
                    e.beta
                )));
            }
        }
        if self.atoms.is_empty() && self.exp_terms.is_empty() {
            return Err(Error::InvalidKernel("kernel has no atoms and no density".into()));
        }
        Ok(())
    }

    /// Total variation sum |w_j| + sum |m_k|.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>()
            + self.exp_terms.iter().map(|e| e.mass.abs()).sum::<f64>()
    }

    /// Total mass g_hat(0) = sum w_j + sum m_k.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>()
            + self.exp_terms.iter().map(|e| e.mass).sum::<f64>()
    }

    /// Largest atom lag (exponential tails are unbounded but integrable).
    pub fn max_lag(&self) -> f64 {
        self.atoms.iter().map(|a| a.lag).fold(0.0, f64::max)
    }

    /// Combined weight of atoms sitting exactly at lag 0.
    pub fn lag_zero_weight(&self) -> f64 {
        self.atoms.iter().filter(|a| a.lag == 0.0).map(|a| a.weight).sum()
    }

    /// True when the measure is a single atom at lag 0 (possibly scaled).
    pub fn is_pure_dirac(&self) -> bool {
        self.exp_terms.is_empty() && self.atoms.iter().all(|a| a.lag == 0.0)
    }

    /// Fourier transform g_hat(xi) under the e^{-2 i pi t xi} convention.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let mut out = Complex64::ZERO;
        for a in &self.atoms {
            let phase = -2.0 * PI * xi * a.lag;
            out += a.weight * Complex64::new(phase.cos(), phase.sin());
        }
        for e in &self.exp_terms {
            out += e.mass * e.beta / Complex64::new(e.beta, 2.0 * PI * xi);
        }
        out
    }

    /// The spectral-condition locus xi -> 2 i pi xi / g_hat(xi).
    pub fn curve(&self, xi: f64) -> Result<Complex64> {
        let ghat = self.fourier(xi);
        let tol = CURVE_POLE_TOL * self.total_variation().max(1.0);
        if ghat.norm() < tol {
            return Err(Error::CurvePole { xi, magnitude: ghat.norm() });
        }
        Ok(Complex64::new(0.0, 2.0 * PI * xi) / ghat)
    }

    /// Returns a copy with every atom lag snapped to the nearest grid point.
    ///
    /// Errors if any snap distance exceeds dt/2, which would silently distort
    /// the delay structure.
    pub fn snapped_to_grid(&self, dt: f64) -> Result<Self> {
        let limit = dt / 2.0;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let snapped = (a.lag / dt).round() * dt;
            let distance = (a.lag - snapped).abs();
            if distance > limit * (1.0 + 1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "atom lag {} is {distance} from the nearest grid point (limit {limit})",
                    a.lag
                )));
            }
            atoms.push(Atom { weight: a.weight, lag: snapped.max(0.0) });
        }
        Ok(Self { atoms, exp_terms: self.exp_terms.clone() })
    }
}

/// The initial history zeta_0: samples on the uniform grid {-H dt, ..., -dt}
/// plus the value at t = 0.
///
/// Column j of `samples` holds zeta_0 at time (j - H) dt, so columns run
/// chronologically and the last column is the most recent past value.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFunction {
    samples: Array2<f64>,
    value_at_zero: Vec<f64>,
}

impl HistoryFunction {
    pub fn new(samples: Array2<f64>, value_at_zero: Vec<f64>) -> Result<Self> {
        if samples.nrows() != value_at_zero.len() {
            return Err(Error::DimensionMismatch {
                context: "history rows vs value_at_zero",
                expected: value_at_zero.len(),
                actual: samples.nrows(),
            });
        }
        if samples.iter().any(|v| !v.is_finite())
            || value_at_zero.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("history contains non-finite values".into()));
        }
        Ok(Self { samples, value_at_zero })
    }

    /// Identically-zero history with no past samples.
    pub fn zero(n: usize) -> Self {
        Self {
            samples: Array2::zeros((n, 0)),
            value_at_zero: vec![0.0; n],
        }
    }

    /// History frozen at a constant vector over `depth` past steps.
    pub fn constant(value: Vec<f64>, depth: usize) -> Self {
        let n = value.len();
        let mut samples = Array2::zeros((n, depth));
        for mut col in samples.columns_mut() {
            col.assign(&ndarray::ArrayView1::from(&value));
        }
        Self { samples, value_at_zero: value }
    }

    pub fn n(&self) -> usize {
        self.value_at_zero.len()
    }

    /// Number of past samples H.
    pub fn depth(&self) -> usize {
        self.samples.ncols()
    }

    pub fn value_at_zero(&self) -> &[f64] {
        &self.value_at_zero
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    /// Sample at time index m <= 0 on the grid: m = 0 gives the value at zero,
    /// m < 0 reads the stored past, anything older than -H reads as 0.
    pub fn at_index(&self, x: usize, m: i64) -> f64 {
        if m == 0 {
            return self.value_at_zero[x];
        }
        let h = self.depth() as i64;
        let j = h + m;
        if j < 0 {
            0.0
        } else {
            self.samples[[x, j as usize]]
        }
    }
}

/// Convolution of the initial history with the delay measure,
/// (zeta_0 * g)(t_i) for t_i = i dt, i = 0..T-1.
///
/// The history is extended by zero on [0, inf), so only the part of the
/// measure that reaches back past t = 0 contributes. Atoms are evaluated by
/// nearest-bin lookup; exponential densities by a left-endpoint rectangle
/// rule at resolution dt.
pub fn convolve_history(
    g: &DelayKernel,
    zeta: &HistoryFunction,
    grid: &TimeGrid,
) -> Result<Array2<f64>> {
    let n = zeta.n();
    let t = grid.steps();
    let dt = grid.dt();
    let h = zeta.depth();

    let covered = h as f64 * dt;
    let required = g.max_lag();
    if required > covered + dt / 2.0 + 1e-12 * dt {
        return Err(Error::InsufficientHistory { covered, required });
    }

    let mut out = Array2::zeros((n, t));

    for a in &g.atoms {
        let k = (a.lag / dt).round() as i64;
        for i in 0..t {
            let m = i as i64 - k;
            if m < 0 {
                for x in 0..n {
                    out[[x, i]] += a.weight * zeta.at_index(x, m);
                }
            }
        }
    }

    for e in &g.exp_terms {
        // integral of zeta(t_i - s) m b e^{-b s} ds over s > t_i factors as
        // m b e^{-b t_i} * integral of zeta(u) e^{b u} du over u < 0
        let mut moments = vec![0.0; n];
        for k in 1..=h {
            let w = (-e.beta * k as f64 * dt).exp() * dt;
            for (x, mom) in moments.iter_mut().enumerate() {
                *mom += zeta.at_index(x, -(k as i64)) * w;
            }
        }
        for i in 0..t {
            let factor = e.mass * e.beta * (-e.beta * i as f64 * dt).exp();
            for x in 0..n {
                out[[x, i]] += factor * moments[x];
            }
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dt: f64, steps: usize) -> TimeGrid {
        TimeGrid::new(dt, steps).unwrap()
    }

    #[test]
    fn fourier_of_dirac_is_one() {
        let g = DelayKernel::dirac();
        for xi in [-3.0, 0.0, 0.17, 42.0] {
            let f = g.fourier(xi);
            assert!((f - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fourier_of_exponential() {
        let beta = 2.5;
        let g = DelayKernel::exponential(beta);
        let xi = 0.7;
        let want = beta / Complex64::new(beta, 2.0 * PI * xi);
        assert!((g.fourier(xi) - want).norm() < 1e-15);
        assert!((g.fourier(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fourier_total_mass_at_zero() {
        let g = DelayKernel::single_delay(0.5, 1.0);
        assert!((g.fourier(0.0).re - 1.5).abs() < 1e-15);
        assert!(g.fourier(0.0).im.abs() < 1e-15);
    }

    #[test]
    fn curve_of_dirac_is_imaginary_axis() {
        let g = DelayKernel::dirac();
        for xi in [-2.0, 0.3, 5.0] {
            let c = g.curve(xi).unwrap();
            assert!(c.re.abs() < 1e-14);
            assert!((c.im - 2.0 * PI * xi).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_of_exponential_is_parabola() {
        // 2 i pi xi / g_hat = -(4 pi^2 / beta) xi^2 + 2 i pi xi
        let beta = 2.0 * PI;
        let g = DelayKernel::exponential(beta);
        for xi in [-1.5, 0.25, 3.0] {
            let c = g.curve(xi).unwrap();
            let want_re = -4.0 * PI * PI / beta * xi * xi;
            let want_im = 2.0 * PI * xi;
            assert!((c.re - want_re).abs() < 1e-10);
            assert!((c.im - want_im).abs() < 1e-10);
        }
    }

    #[test]
    fn curve_passes_through_origin() {
        let g = DelayKernel::single_delay(2.0, 1.0);
        let c = g.curve(0.0).unwrap();
        assert!(c.norm() < 1e-14);
    }

    #[test]
    fn curve_reports_pole() {
        // g_hat(0) = 0 for delta_0 - delta_theta
        let g = DelayKernel::new(
            vec![Atom { weight: 1.0, lag: 0.0 }, Atom { weight: -1.0, lag: 1.0 }],
            vec![],
        )
        .unwrap();
        match g.curve(0.0) {
            Err(Error::CurvePole { xi, .. }) => assert_eq!(xi, 0.0),
            other => panic!("expected a curve pole, got {other:?}"),
        }
    }

    #[test]
    fn dirac_history_convolution_vanishes() {
        let g = DelayKernel::dirac();
        let zeta = HistoryFunction::constant(vec![3.0, -1.0], 16);
        let out = convolve_history(&g, &zeta, &grid(0.1, 8)).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn delayed_atom_sees_constant_history() {
        let theta = 0.5;
        let g = DelayKernel::new(vec![Atom { weight: 1.0, lag: theta }], vec![]).unwrap();
        let c = 2.0;
        let zeta = HistoryFunction::constant(vec![c], 10);
        let gr = grid(0.1, 10);
        let out = convolve_history(&g, &zeta, &gr).unwrap();
        for i in 0..10 {
            let t = i as f64 * 0.1;
            let want = if t < theta { c } else { 0.0 };
            assert_eq!(out[[0, i]], want, "t = {t}");
        }
    }

    #[test]
    fn exponential_history_tail_matches_closed_form() {
        // constant history c gives (zeta * g)(t) = c e^{-beta t}
        let beta = 1.0;
        let g = DelayKernel::exponential(beta);
        let c = 1.5;
        let dt = 1e-3;
        let depth = 20_000; // 20 time constants
        let zeta = HistoryFunction::constant(vec![c], depth);
        let gr = grid(dt, 100);
        let out = convolve_history(&g, &zeta, &gr).unwrap();
        for i in [0, 10, 50, 99] {
            let t = i as f64 * dt;
            let want = c * (-beta * t).exp();
            let rel = (out[[0, i]] - want).abs() / want;
            assert!(rel < 1e-3, "t = {t}: got {} want {want}", out[[0, i]]);
        }
    }

    #[test]
    fn history_shorter_than_lag_errors() {
        let g = DelayKernel::new(vec![Atom { weight: 1.0, lag: 2.0 }], vec![]).unwrap();
        let zeta = HistoryFunction::constant(vec![1.0], 5);
        let err = convolve_history(&g, &zeta, &grid(0.1, 4)).unwrap_err();
        assert!(matches!(err, Error::InsufficientHistory { .. }));
    }

    #[test]
    fn atoms_only_convolution_zero_after_max_lag() {
        let g = DelayKernel::single_delay(0.7, 0.4);
        let zeta = HistoryFunction::constant(vec![1.0], 32);
        let gr = grid(0.1, 20);
        let out = convolve_history(&g, &zeta, &gr).unwrap();
        for i in 0..20 {
            if i as f64 * 0.1 >= g.max_lag() {
                assert_eq!(out[[0, i]], 0.0);
            }
        }
    }

    #[test]
    fn snapping_moves_lags_onto_grid() {
        let g = DelayKernel::single_delay(0.3, 1.004);
        let snapped = g.snapped_to_grid(0.01).unwrap();
        assert!((snapped.atoms[1].lag - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fourier_is_hermitian(
            w in -3.0..3.0f64, lag in 0.0..5.0f64,
            m in -2.0..2.0f64, beta in 0.1..8.0f64,
            xi in -20.0..20.0f64,
        ) {
            let g = DelayKernel::new(
                vec![Atom { weight: w, lag }],
                vec![ExpTerm { mass: m, beta }],
            ).unwrap();
            let plus = g.fourier(xi);
            let minus = g.fourier(-xi);
            prop_assert!((minus - plus.conj()).norm() < 1e-12);
        }

        #[test]
        fn fourier_bounded_by_total_variation(
            w in -3.0..3.0f64, lag in 0.0..5.0f64,
            m in -2.0..2.0f64, beta in 0.1..8.0f64,
            xi in -50.0..50.0f64,
        ) {
            let g = DelayKernel::new(
                vec![Atom { weight: w, lag }],
                vec![ExpTerm { mass: m, beta }],
            ).unwrap();
            prop_assert!(g.fourier(xi).norm() <= g.total_variation() + 1e-12);
        }
    }
}
