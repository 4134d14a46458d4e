//! Equilibrium connectivity of the slow-learning Hebbian network
//!
//! ```text
//! eps dV/dt = -l V + W V + I(t),      dW/dt = -kappa W + V (x) V
//! ```
//!
//! with tau-periodic input. In the slow-learning limit the equilibrium
//! solves kappa W* = (1/tau) integral over one period of V_W* (x) V_W*,
//! where V_W is the periodic response of the frozen-W fast equation. That
//! response expands as V_W = sum over k of W^k I T_h^{k+1} with T_h the
//! periodized convolution by h(t) = e^{-l t} H(t), which turns the
//! equilibrium into a fixed-point problem solved here by Picard iteration.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fft::CircularConvolver;
use crate::timeops::TimeGrid;

/// Periodic Hebbian-learning problem on the period grid.
#[derive(Debug, Clone)]
pub struct LearningProblem {
    /// n x T samples of the tau-periodic input on the period grid.
    pub input: Array2<f64>,
    /// Leak conductance, positive.
    pub l: f64,
    /// Learning decay rate, positive.
    pub kappa: f64,
    /// Timescale ratio between potential and connectivity dynamics;
    /// only the simulation oracle uses it.
    pub epsilon: f64,
    /// Period grid, tau = steps * dt.
    pub grid: TimeGrid,
}

impl LearningProblem {
    pub fn new(
        input: Array2<f64>,
        l: f64,
        kappa: f64,
        epsilon: f64,
        grid: TimeGrid,
    ) -> Result<Self> {
        if input.ncols() != grid.steps() {
            return Err(Error::DimensionMismatch {
                context: "input columns vs period grid",
                expected: grid.steps(),
                actual: input.ncols(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("input samples are not finite".into()));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("leak l = {l} must be positive")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa = {kappa} must be positive")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Self { input, l, kappa, epsilon, grid })
    }

    pub fn n(&self) -> usize {
        self.input.nrows()
    }

    /// Bin integrals of the periodized leak kernel sum over m of
    /// e^{-l (t + m tau)} H(t + m tau) on the period grid.
    fn periodic_kernel_bins(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        let tau = self.grid.tau();
        let geom = 1.0 / (1.0 - (-self.l * tau).exp());
        (0..self.grid.steps())
            .map(|i| {
                let t = i as f64 * dt;
                geom * (-self.l * t).exp() * (-(-self.l * dt).exp_m1()) / self.l
            })
            .collect()
    }

    fn convolver(&self) -> CircularConvolver {
        CircularConvolver::new(&self.periodic_kernel_bins())
    }
}

/// Equilibrium connectivity with iteration diagnostics.
#[derive(Debug, Clone)]
pub struct ConnectivityMatrix {
    pub w: Array2<f64>,
    pub iterations: usize,
    /// Relative fixed-point defect ||w - Phi(w)|| / ||w||.
    pub residual: f64,
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn circ_rows(conv: &CircularConvolver, field: &Array2<f64>) -> Array2<f64> {
    let n = field.nrows();
    let t = field.ncols();
    let mut out = Array2::zeros((n, t));
    for x in 0..n {
        let row = field.row(x).to_vec();
        let c = conv.convolve(&row);
        for (i, v) in c.into_iter().enumerate() {
            out[[x, i]] = v;
        }
    }
    out
}

/// Periodic response V_W = sum over k <= k_max of W^k I T_h^{k+1}, together
/// with the per-order term norms.
fn periodic_response(
    p: &LearningProblem,
    conv: &CircularConvolver,
    w: &Array2<f64>,
    k_max: usize,
) -> (Array2<f64>, Vec<f64>) {
    let mut term = circ_rows(conv, &p.input);
    let mut v = term.clone();
    let mut norms = vec![frobenius(&term)];
    for _ in 1..=k_max {
        term = w.dot(&circ_rows(conv, &term));
        norms.push(frobenius(&term));
        v += &term;
    }
    (v, norms)
}

/// One application of the fixed-point map,
/// Phi(W) = (1 / (kappa T)) V_W^(k) (V_W^(q))^T.
fn fixed_point_map(
    p: &LearningProblem,
    conv: &CircularConvolver,
    w: &Array2<f64>,
    orders: (usize, usize),
) -> Array2<f64> {
    let (k_max, q_max) = orders;
    let (v_left, _) = periodic_response(p, conv, w, k_max);
    let v_right = if q_max == k_max {
        v_left.clone()
    } else {
        periodic_response(p, conv, w, q_max).0
    };
    v_left.dot(&v_right.t()) / (p.kappa * p.grid.steps() as f64)
}

/// Picard iteration of the truncated double series from W = 0.
///
/// Converges in the weak-coupling regime ||W*|| < l; three consecutive
/// growing updates abort with a divergence error.
pub fn equilibrium_fixed_point(
    p: &LearningProblem,
    orders: (usize, usize),
    max_iter: usize,
    tol: f64,
) -> Result<ConnectivityMatrix> {
    let conv = p.convolver();
    let n = p.n();
    let mut w = Array2::zeros((n, n));
    let mut prev_update = f64::INFINITY;
    let mut growing = 0usize;
    let mut iterations = 0;
    for it in 1..=max_iter.max(1) {
        iterations = it;
        let next = fixed_point_map(p, &conv, &w, orders);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "fixed-point iterate became non-finite at iteration {it}"
            )));
        }
        let update = frobenius(&(&next - &w));
        let scale = frobenius(&next).max(f64::MIN_POSITIVE);
        w = next;
        if update > prev_update {
            growing += 1;
            if growing >= 3 {
                return Err(Error::Divergence(format!(
                    "Picard updates grew for 3 consecutive iterations (ratio {:.3}); \
                     outside the weak-coupling regime",
                    update / prev_update
                )));
            }
        } else {
            growing = 0;
        }
        prev_update = update;
        if update <= tol * scale {
            break;
        }
    }
    let check = fixed_point_map(p, &conv, &w, orders);
    let residual = frobenius(&(&check - &w)) / frobenius(&w).max(f64::MIN_POSITIVE);
    Ok(ConnectivityMatrix { w, iterations, residual })
}

/// The k = q = 0 term of the double series,
/// W*_0 = (1 / (kappa T)) (I T_h) (I T_h)^T.
///
/// This is the weak-coupling leading order; the first correction is smaller
/// by a factor of order ||W*|| / l.
pub fn leading_order(p: &LearningProblem) -> ConnectivityMatrix {
    let conv = p.convolver();
    let b = circ_rows(&conv, &p.input);
    let w = b.dot(&b.t()) / (p.kappa * p.grid.steps() as f64);
    ConnectivityMatrix { w, iterations: 1, residual: 0.0 }
}

/// Per-order norms of the response series at a given connectivity; exposed
/// for diagnostics output.
pub fn response_term_norms(p: &LearningProblem, w: &Array2<f64>, k_max: usize) -> Vec<f64> {
    let conv = p.convolver();
    periodic_response(p, &conv, w, k_max).1
}

/// Direct explicit integration of the coupled two-timescale system until
/// `t_end`; returns the connectivity averaged over the final input period.
///
/// The input lives on the fast (membrane) timescale: the sample grid covers
/// one period of the rescaled membrane equation, so in wall-clock time the
/// drive repeats with period epsilon tau and `t_end` must cover at least two
/// of those. Requires dt_fast <= epsilon / (10 l) so the fast equation stays
/// stable.
pub fn simulate_coupled(
    p: &LearningProblem,
    t_end: f64,
    dt_fast: f64,
) -> Result<ConnectivityMatrix> {
    let n = p.n();
    let t = p.grid.steps();
    let dt_grid = p.grid.dt();
    let period = p.epsilon * p.grid.tau();
    if !(dt_fast > 0.0) || dt_fast > p.epsilon / (10.0 * p.l) {
        return Err(Error::InvalidArgument(format!(
            "dt_fast = {dt_fast} violates the fast-equation stability bound {}",
            p.epsilon / (10.0 * p.l)
        )));
    }
    if dt_fast * p.kappa >= 2.0 {
        return Err(Error::InvalidArgument(
            "dt_fast too large for the learning decay rate".into(),
        ));
    }
    if t_end < 2.0 * period {
        return Err(Error::InvalidArgument(
            "t_end must cover at least two input periods".into(),
        ));
    }

    // staircase input on the fast phase; each sample rules the grid cell
    // ending at its timestamp, matching the circular-convolution convention
    // of the fixed-point map
    let input_at = |time: f64, out: &mut [f64]| {
        let s = (time / (p.epsilon * dt_grid)).rem_euclid(t as f64);
        let j = (s.ceil() as usize) % t;
        for (x, o) in out.iter_mut().enumerate() {
            *o = p.input[[x, j]];
        }
    };

    let steps = (t_end / dt_fast).ceil() as usize;
    let avg_window = (period / dt_fast).round().max(1.0) as usize;
    let mut v = vec![0.0; n];
    let mut i_now = vec![0.0; n];
    let mut w = Array2::<f64>::zeros((n, n));
    let mut w_sum = Array2::<f64>::zeros((n, n));
    let mut wdot_sum = 0.0_f64;
    let mut samples = 0usize;

    for step in 0..steps {
        let time = step as f64 * dt_fast;
        input_at(time, &mut i_now);
        // fast membrane update
        let mut v_new = vec![0.0; n];
        for x in 0..n {
            let mut coupling = 0.0;
            for j in 0..n {
                coupling += w[[x, j]] * v[j];
            }
            v_new[x] = v[x] + dt_fast / p.epsilon * (-p.l * v[x] + coupling + i_now[x]);
        }
        v = v_new;
        if v.iter().any(|x| !x.is_finite() || x.abs() > 1e100) {
            return Err(Error::Divergence(format!(
                "fast equation unstable at t = {time}"
            )));
        }
        // slow connectivity update
        let mut wdot_norm = 0.0;
        for x in 0..n {
            for y in 0..n {
                let wdot = -p.kappa * w[[x, y]] + v[x] * v[y];
                w[[x, y]] += dt_fast * wdot;
                wdot_norm += wdot * wdot;
            }
        }
        if step + avg_window >= steps {
            w_sum += &w;
            wdot_sum += wdot_norm.sqrt();
            samples += 1;
        }
    }

    let w_avg = w_sum / samples.max(1) as f64;
    let scale = p.kappa * frobenius(&w_avg).max(f64::MIN_POSITIVE);
    let residual = wdot_sum / samples.max(1) as f64 / scale;
    Ok(ConnectivityMatrix { w: w_avg, iterations: steps, residual })
}
