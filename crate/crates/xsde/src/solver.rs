//! Problem assembly, the truncated series-expansion solver, and the
//! Euler-Maruyama reference integrator for delayed stochastic systems
//!
//! ```text
//! dX = (A (X * g) + I) dt + Sigma dB,   X restricted to t <= 0 given by zeta_0.
//! ```
//!
//! The expansion evaluates X = sum over k of W^k F U V^k with W = l Id + A and
//! F the combined forcing zeta_0(0) delta_0 + I + A (zeta_0 * g) + Sigma dB.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{convolve_history, DelayKernel, HistoryFunction};
use crate::spectral::SpaceOperator;
use crate::timeops::{apply_atomic, convolve_field, sample_operators, TimeGrid};

/// External drive I(t), sampled per bin when the solvers run.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Zero,
    /// Time-constant vector input.
    Constant(Vec<f64>),
    /// Dirac-in-space source: constant `amplitude` at one node, zero elsewhere.
    NodeSource { node: usize, amplitude: f64 },
    /// Explicit n x T samples, interpreted as per-bin values.
    Samples(Array2<f64>),
}

impl InputSignal {
    pub fn materialize(&self, n: usize, grid: &TimeGrid) -> Result<Array2<f64>> {
        let t = grid.steps();
        match self {
            InputSignal::Zero => Ok(Array2::zeros((n, t))),
            InputSignal::Constant(c) => {
                if c.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "constant input length",
                        expected: n,
                        actual: c.len(),
                    });
                }
                Ok(Array2::from_shape_fn((n, t), |(x, _)| c[x]))
            }
            InputSignal::NodeSource { node, amplitude } => {
                if *node >= n {
                    return Err(Error::InvalidArgument(format!(
                        "source node {node} out of range for n = {n}"
                    )));
                }
                let mut m = Array2::zeros((n, t));
                for i in 0..t {
                    m[[*node, i]] = *amplitude;
                }
                Ok(m)
            }
            InputSignal::Samples(m) => {
                if m.nrows() != n || m.ncols() != t {
                    return Err(Error::DimensionMismatch {
                        context: "input samples shape",
                        expected: n * t,
                        actual: m.len(),
                    });
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("input samples are not finite".into()));
                }
                Ok(m.clone())
            }
        }
    }
}

/// The full problem statement for both solvers.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: SpaceOperator,
    pub g: DelayKernel,
    pub sigma: Array2<f64>,
    pub input: InputSignal,
    pub history: HistoryFunction,
    pub grid: TimeGrid,
}

impl Problem {
    pub fn new(
        a: SpaceOperator,
        g: DelayKernel,
        sigma: Array2<f64>,
        input: InputSignal,
        history: HistoryFunction,
        grid: TimeGrid,
    ) -> Result<Self> {
        g.validate()?;
        let n = a.n();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "sigma shape",
                expected: n * n,
                actual: sigma.len(),
            });
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sigma has non-finite entries".into()));
        }
        if history.n() != n {
            return Err(Error::DimensionMismatch {
                context: "history rows",
                expected: n,
                actual: history.n(),
            });
        }
        input.materialize(n, &grid)?;
        Ok(Self { a, g, sigma, input, history, grid })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn input_samples(&self) -> Result<Array2<f64>> {
        self.input.materialize(self.n(), &self.grid)
    }

    fn check_path(&self, path: &BrownianPath) -> Result<()> {
        if path.n() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "Brownian path rows",
                expected: self.n(),
                actual: path.n(),
            });
        }
        if path.steps() != self.grid.steps() {
            return Err(Error::DimensionMismatch {
                context: "Brownian path steps",
                expected: self.grid.steps(),
                actual: path.steps(),
            });
        }
        if (path.dt() - self.grid.dt()).abs() > 1e-12 * self.grid.dt() {
            return Err(Error::InvalidArgument(format!(
                "Brownian path step {} does not match grid step {}",
                path.dt(),
                self.grid.dt()
            )));
        }
        Ok(())
    }
}

/// A seeded realization of the driving noise: increments[x, i] ~ N(0, dt).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    dt: f64,
    increments: Array2<f64>,
}

/// Deterministic Gaussian increments from a counter-seeded generator.
pub fn sample_brownian(seed: u64, grid: &TimeGrid, n: usize) -> BrownianPath {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = grid.dt().sqrt();
    let increments = Array2::from_shape_fn((n, grid.steps()), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        s * z
    });
    BrownianPath { seed, dt: grid.dt(), increments }
}

impl BrownianPath {
    /// The zero path, for deterministic problems.
    pub fn zeros(grid: &TimeGrid, n: usize) -> Self {
        Self {
            seed: 0,
            dt: grid.dt(),
            increments: Array2::zeros((n, grid.steps())),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.increments.nrows()
    }

    pub fn steps(&self) -> usize {
        self.increments.ncols()
    }

    pub fn increments(&self) -> &Array2<f64> {
        &self.increments
    }

    /// Coarsens the path by summing blocks of `factor` increments, yielding
    /// the same Brownian motion on a grid `factor` times coarser.
    pub fn aggregate(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot aggregate {} steps by a factor of {factor}",
                self.steps()
            )));
        }
        let coarse_steps = self.steps() / factor;
        let mut increments = Array2::zeros((self.n(), coarse_steps));
        for x in 0..self.n() {
            for i in 0..coarse_steps {
                let mut acc = 0.0;
                for j in 0..factor {
                    acc += self.increments[[x, i * factor + j]];
                }
                increments[[x, i]] = acc;
            }
        }
        Ok(BrownianPath { seed: self.seed, dt: self.dt * factor as f64, increments })
    }
}

/// Truncation policy of the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConfig {
    /// The shift l splitting A = -l Id + W; must be nonzero.
    pub l: f64,
    /// Hard cap on the expansion order.
    pub k_max: usize,
    /// Stop once a term's norm falls below term_tol times the first term's.
    pub term_tol: f64,
}

impl ExpansionConfig {
    pub fn new(l: f64) -> Self {
        Self { l, k_max: 64, term_tol: 1e-8 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.l.is_finite() && self.l != 0.0) {
            return Err(Error::InvalidArgument(format!("shift l = {} must be nonzero", self.l)));
        }
        if !(self.term_tol >= 0.0) {
            return Err(Error::InvalidArgument("term_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// The combined drive zeta_0(0) delta_0 + I + A (zeta_0 * g) + Sigma dB,
/// split into its atomic, density and increment parts, which the expansion
/// routes through the three kernel representations.
#[derive(Debug, Clone)]
pub struct ForcingField {
    pub atomic: Vec<f64>,
    pub density: Array2<f64>,
    pub increments: Array2<f64>,
}

/// Solver output: the n x T sample field plus per-term diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub samples: Array2<f64>,
    pub term_norms: Vec<f64>,
    pub k_used: usize,
}

/// Discrete L2 norm of a field, sqrt(sum of squares times dt).
pub fn field_l2(field: &Array2<f64>, dt: f64) -> f64 {
    (field.iter().map(|v| v * v).sum::<f64>() * dt).sqrt()
}

/// Convolver for the density and composition stages of the expansion.
///
/// A sampled field held constant on [t_j, t_j + dt) convolved against the
/// kernel has its bin-exact value at t_i given by sum over j < i of
/// field[j] * col[i - 1 - j]: the column enters delayed by one index, which
/// aligns every output column with its own time stamp (and makes the output
/// vanish at t = 0, where the forcing has had no time to act).
fn stage_convolver(k: &crate::timeops::ToeplitzKernel) -> crate::fft::CausalConvolver {
    let src = k.col();
    let mut col = vec![0.0; src.len()];
    col[1..].copy_from_slice(&src[..src.len() - 1]);
    crate::fft::CausalConvolver::new(&col)
}

/// Assembles the forcing of the expansion from the problem data.
pub fn assemble_forcing(p: &Problem, path: &BrownianPath) -> Result<ForcingField> {
    p.check_path(path)?;
    let atomic = p.history.value_at_zero().to_vec();
    let mut density = p.input_samples()?;
    let hist = convolve_history(&p.g, &p.history, &p.grid)?;
    density += &p.a.apply_field(&hist);
    let increments = p.sigma.dot(path.increments());
    Ok(ForcingField { atomic, density, increments })
}

/// Evaluates the truncated expansion sum over k of W^k F U V^k.
///
/// Term 0 applies U to the forcing (point values for the atom and the
/// increments, bin integrals for the density); each further term is one V
/// convolution followed by one left multiplication with W. W^k is never
/// formed explicitly. Terms accumulate until their norm falls below
/// term_tol relative to term 0 or k_max is reached; three consecutive
/// growing terms abort with a divergence error.
pub fn expand(p: &Problem, cfg: &ExpansionConfig, path: &BrownianPath) -> Result<SolutionField> {
    cfg.validate()?;
    p.check_path(path)?;
    let dt = p.grid.dt();

    let ops = sample_operators(&p.g, cfg.l, &p.grid)?;
    let forcing = assemble_forcing(p, path)?;

    let conv_u = stage_convolver(&ops.u);
    let conv_v = stage_convolver(&ops.v);

    // The increments enter through the bin-averaged kernel weights
    // col[k]/dt, the L2 projection of the stochastic convolution onto the
    // increments; as a density that is increments/dt.
    let mut term = apply_atomic(&ops.u, &forcing.atomic, &ops.u_points)?;
    let driven = &forcing.density + &(&forcing.increments / dt);
    term += &convolve_field(&conv_u, &driven);

    let norm0 = field_l2(&term, dt);
    if !norm0.is_finite() {
        return Err(Error::Divergence("non-finite forcing term".into()));
    }
    let mut norms = vec![norm0];
    let mut x = term.clone();
    if norm0 == 0.0 {
        return Ok(SolutionField { samples: x, term_norms: norms, k_used: 0 });
    }

    let w = p.a.shifted(cfg.l);
    let mut growing = 0usize;
    for k in 1..=cfg.k_max {
        term = w.apply_field(&convolve_field(&conv_v, &term));
        let nk = field_l2(&term, dt);
        if !nk.is_finite() {
            return Err(Error::Divergence(format!("non-finite expansion term at k = {k}")));
        }
        let prev = *norms.last().unwrap();
        norms.push(nk);
        x += &term;
        if prev > 0.0 && nk > prev {
            growing += 1;
            if growing >= 3 {
                return Err(Error::Divergence(format!(
                    "term norms grew for 3 consecutive orders, ratio {:.4} at k = {k}",
                    nk / prev
                )));
            }
        } else {
            growing = 0;
        }
        if nk <= cfg.term_tol * norm0 {
            break;
        }
    }

    let k_used = norms.len() - 1;
    Ok(SolutionField { samples: x, term_norms: norms, k_used })
}

/// Sequential evaluation of (X * g)(t_i): atoms by nearest-bin lookup into
/// the history/solution buffer, exponential densities by a left-endpoint
/// rectangle rule folded into an O(1)-per-step running recursion.
struct DelayConvolution<'a> {
    atoms: Vec<(f64, i64)>,
    exp_terms: Vec<(f64, f64)>,
    exp_decay: Vec<f64>,
    exp_state: Vec<Vec<f64>>,
    history: &'a HistoryFunction,
    past: Vec<Vec<f64>>,
    dt: f64,
    n: usize,
}

impl<'a> DelayConvolution<'a> {
    fn new(g: &DelayKernel, history: &'a HistoryFunction, grid: &TimeGrid, n: usize) -> Result<Self> {
        let dt = grid.dt();
        let covered = history.depth() as f64 * dt;
        let required = g.max_lag();
        if required > covered + dt / 2.0 + 1e-12 * dt {
            return Err(Error::InsufficientHistory { covered, required });
        }
        let atoms: Vec<(f64, i64)> =
            g.atoms.iter().map(|a| (a.weight, (a.lag / dt).round() as i64)).collect();
        let exp_terms: Vec<(f64, f64)> = g.exp_terms.iter().map(|e| (e.mass, e.beta)).collect();
        let exp_decay: Vec<f64> = exp_terms.iter().map(|(_, b)| (-b * dt).exp()).collect();
        // state C_{-1}[x] = m b dt * sum over j >= 1 of e^{-b (j-1) dt} zeta(-j dt)
        let mut exp_state = Vec::with_capacity(exp_terms.len());
        for (m, b) in &exp_terms {
            let mut c = vec![0.0; n];
            for j in (1..=history.depth() as i64).rev() {
                let w = m * b * dt * (-b * (j - 1) as f64 * dt).exp();
                for (x, cx) in c.iter_mut().enumerate() {
                    *cx += w * history.at_index(x, -j);
                }
            }
            exp_state.push(c);
        }
        Ok(Self { atoms, exp_terms, exp_decay, exp_state, history, past: Vec::new(), dt, n })
    }

    fn lookup(&self, x: usize, m: i64) -> f64 {
        if m >= 0 {
            self.past[m as usize][x]
        } else {
            self.history.at_index(x, m)
        }
    }

    /// Pushes X(t_i) and returns (X * g)(t_i).
    fn step(&mut self, x_now: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x_now.len(), self.n);
        self.past.push(x_now.to_vec());
        let i = self.past.len() as i64 - 1;
        let mut out = vec![0.0; self.n];
        for &(w, k) in &self.atoms {
            for (x, o) in out.iter_mut().enumerate() {
                *o += w * self.lookup(x, i - k);
            }
        }
        for (t_idx, (m, b)) in self.exp_terms.iter().enumerate() {
            let decay = self.exp_decay[t_idx];
            let state = &mut self.exp_state[t_idx];
            for x in 0..self.n {
                state[x] = m * b * self.dt * x_now[x] + decay * state[x];
            }
            for (o, s) in out.iter_mut().zip(state.iter()) {
                *o += s;
            }
        }
        // the lag-0 atom reads the freshly pushed column, the exponential
        // recursion already includes the k = 0 rectangle
        out
    }
}

/// Explicit Euler-Maruyama reference integrator,
/// X_{i+1} = X_i + (A (X * g)(t_i) + I(t_i)) dt + Sigma dB_i.
pub fn euler_maruyama(p: &Problem, path: &BrownianPath) -> Result<SolutionField> {
    p.check_path(path)?;
    let n = p.n();
    let t = p.grid.steps();
    let dt = p.grid.dt();
    let input = p.input_samples()?;
    let mut conv = DelayConvolution::new(&p.g, &p.history, &p.grid, n)?;

    let mut samples = Array2::zeros((n, t));
    let mut x: Vec<f64> = p.history.value_at_zero().to_vec();
    for i in 0..t {
        for (xi, v) in x.iter().enumerate() {
            samples[[xi, i]] = *v;
        }
        let xg = conv.step(&x);
        for xi in 0..n {
            let mut drift = 0.0;
            for j in 0..n {
                drift += p.a.matrix()[[xi, j]] * xg[j];
            }
            drift += input[[xi, i]];
            let mut noise = 0.0;
            for j in 0..n {
                noise += p.sigma[[xi, j]] * path.increments[[j, i]];
            }
            x[xi] += drift * dt + noise;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            return Err(Error::Divergence(format!(
                "Euler-Maruyama state overflowed at step {} (t = {})",
                i + 1,
                (i + 1) as f64 * dt
            )));
        }
    }
    let norm = field_l2(&samples, dt);
    Ok(SolutionField { samples, term_norms: vec![norm], k_used: 0 })
}

/// Discrete defect of the integral equation along a given solution:
/// max over i of |X_{i+1} - X_i - (A (X * g)_i + I_i) dt - Sigma dB_i|,
/// normalized by the solution's sup scale.
pub fn residual(p: &Problem, sol: &SolutionField, path: &BrownianPath) -> Result<f64> {
    p.check_path(path)?;
    let n = p.n();
    let t = p.grid.steps();
    if sol.samples.nrows() != n || sol.samples.ncols() != t {
        return Err(Error::DimensionMismatch {
            context: "solution shape",
            expected: n * t,
            actual: sol.samples.len(),
        });
    }
    let dt = p.grid.dt();
    let input = p.input_samples()?;
    let mut conv = DelayConvolution::new(&p.g, &p.history, &p.grid, n)?;

    let mut max_defect = 0.0_f64;
    let mut scale = 0.0_f64;
    let mut x: Vec<f64> = vec![0.0; n];
    for i in 0..t {
        for (xi, v) in x.iter_mut().enumerate() {
            *v = sol.samples[[xi, i]];
            scale = scale.max(v.abs());
        }
        let xg = conv.step(&x);
        if i + 1 == t {
            break;
        }
        for xi in 0..n {
            let mut drift = 0.0;
            for j in 0..n {
                drift += p.a.matrix()[[xi, j]] * xg[j];
            }
            drift += input[[xi, i]];
            let mut noise = 0.0;
            for j in 0..n {
                noise += p.sigma[[xi, j]] * path.increments[[j, i]];
            }
            let defect = sol.samples[[xi, i + 1]] - x[xi] - drift * dt - noise;
            max_defect = max_defect.max(defect.abs());
        }
    }
    Ok(max_defect / scale.max(f64::MIN_POSITIVE))
}
