//! JSON run configuration for the command-line harness.
//!
//! The schema ties the library modules together: an operator (dense matrix,
//! circulant row, or the heat preset), a delay kernel, noise and input
//! sections, the time grid, and per-command options. See the repository
//! README for a complete annotated example.

use ndarray::Array2;
use serde::Deserialize;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::{DelayKernel, HistoryFunction};
use crate::learning::LearningProblem;
use crate::solver::{ExpansionConfig, InputSignal, Problem};
use crate::spectral::{
    contraction_ratio, default_l_candidates, search_l, SpaceOperator, SpectralReport,
};
use crate::timeops::TimeGrid;

/// Periodic stochastic heat equation preset: the circulant second-difference
/// operator on n nodes with spacing dx, a Dirac source at the middle node,
/// and the shift l = 2/dx^2 centered on its spectrum [-4/dx^2, 0].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPreset {
    pub n: usize,
    /// Spatial step; defaults to 1/n. Setting dx = 1 reproduces the
    /// unit-lattice variant with l = 2.
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default = "default_heat_sigma")]
    pub sigma: f64,
    #[serde(default = "default_source_amplitude")]
    pub source_amplitude: f64,
}

fn default_heat_sigma() -> f64 {
    0.1
}

fn default_source_amplitude() -> f64 {
    1.0
}

impl HeatPreset {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            dx: None,
            sigma: default_heat_sigma(),
            source_amplitude: default_source_amplitude(),
        }
    }

    pub fn with_dx(mut self, dx: f64) -> Self {
        self.dx = Some(dx);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn dx(&self) -> f64 {
        self.dx.unwrap_or(1.0 / self.n as f64)
    }

    /// Default shift 2/dx^2, placing the spectrum inside the ball of radius
    /// l centered at -l.
    pub fn default_l(&self) -> f64 {
        2.0 / (self.dx() * self.dx())
    }

    pub fn operator(&self) -> Result<SpaceOperator> {
        if self.n < 3 {
            return Err(Error::Config("heat preset needs n >= 3".into()));
        }
        let s = 1.0 / (self.dx() * self.dx());
        let mut row = vec![0.0; self.n];
        row[0] = -2.0 * s;
        row[1] = s;
        row[self.n - 1] = s;
        SpaceOperator::circulant(row)
    }

    /// Dirac source at the middle node.
    pub fn source(&self) -> InputSignal {
        InputSignal::NodeSource { node: self.n / 2, amplitude: self.source_amplitude }
    }

    pub fn sigma_matrix(&self) -> Array2<f64> {
        Array2::eye(self.n) * self.sigma
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Dense { matrix: Vec<Vec<f64>> },
    Circulant { row: Vec<f64> },
    Heat(HeatPreset),
}

impl OperatorConfig {
    fn build(&self) -> Result<SpaceOperator> {
        match self {
            OperatorConfig::Dense { matrix } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("operator matrix must be square".into()));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                let m = Array2::from_shape_vec((n, n), flat)
                    .map_err(|e| Error::Config(format!("operator matrix: {e}")))?;
                SpaceOperator::dense(m)
            }
            OperatorConfig::Circulant { row } => SpaceOperator::circulant(row.clone()),
            OperatorConfig::Heat(preset) => preset.operator(),
        }
    }

    fn heat(&self) -> Option<&HeatPreset> {
        match self {
            OperatorConfig::Heat(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaConfig {
    Scalar(f64),
    Diag { diag: Vec<f64> },
    Dense { dense: Vec<Vec<f64>> },
}

impl SigmaConfig {
    fn build(&self, n: usize) -> Result<Array2<f64>> {
        match self {
            SigmaConfig::Scalar(s) => Ok(Array2::eye(n) * *s),
            SigmaConfig::Diag { diag } => {
                if diag.len() != n {
                    return Err(Error::Config(format!(
                        "sigma diagonal has {} entries, operator has {n}",
                        diag.len()
                    )));
                }
                let mut m = Array2::zeros((n, n));
                for (i, &d) in diag.iter().enumerate() {
                    m[[i, i]] = d;
                }
                Ok(m)
            }
            SigmaConfig::Dense { dense } => {
                if dense.len() != n || dense.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("sigma matrix must be n x n".into()));
                }
                let flat: Vec<f64> = dense.iter().flatten().copied().collect();
                Array2::from_shape_vec((n, n), flat)
                    .map_err(|e| Error::Config(format!("sigma matrix: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    Zero,
    Constant { value: Vec<f64> },
    NodeSource { node: usize, amplitude: f64 },
    Samples { values: Vec<Vec<f64>> },
}

impl InputConfig {
    fn build(&self) -> Result<InputSignal> {
        Ok(match self {
            InputConfig::Zero => InputSignal::Zero,
            InputConfig::Constant { value } => InputSignal::Constant(value.clone()),
            InputConfig::NodeSource { node, amplitude } => {
                InputSignal::NodeSource { node: *node, amplitude: *amplitude }
            }
            InputConfig::Samples { values } => {
                let n = values.len();
                let t = values.first().map(|r| r.len()).unwrap_or(0);
                if n == 0 || values.iter().any(|r| r.len() != t) {
                    return Err(Error::Config("input samples must be rectangular".into()));
                }
                let flat: Vec<f64> = values.iter().flatten().copied().collect();
                let m = Array2::from_shape_vec((n, t), flat)
                    .map_err(|e| Error::Config(format!("input samples: {e}")))?;
                InputSignal::Samples(m)
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HistoryConfig {
    Zero,
    Constant { value: Vec<f64>, depth: usize },
    Samples { values: Vec<Vec<f64>>, value_at_zero: Vec<f64> },
}

impl HistoryConfig {
    fn build(&self, n: usize) -> Result<HistoryFunction> {
        match self {
            HistoryConfig::Zero => Ok(HistoryFunction::zero(n)),
            HistoryConfig::Constant { value, depth } => {
                if value.len() != n {
                    return Err(Error::Config(format!(
                        "history value has {} entries, operator has {n}",
                        value.len()
                    )));
                }
                Ok(HistoryFunction::constant(value.clone(), *depth))
            }
            HistoryConfig::Samples { values, value_at_zero } => {
                let rows = values.len();
                let cols = values.first().map(|r| r.len()).unwrap_or(0);
                if rows != n || values.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config("history samples must be n x H".into()));
                }
                let flat: Vec<f64> = values.iter().flatten().copied().collect();
                let m = Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| Error::Config(format!("history samples: {e}")))?;
                HistoryFunction::new(m, value_at_zero.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub operator: OperatorConfig,
    #[serde(default)]
    pub kernel: Option<DelayKernel>,
    #[serde(default)]
    pub sigma: Option<SigmaConfig>,
    #[serde(default)]
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub history: Option<HistoryConfig>,
    pub grid: GridConfig,
}

/// Shift choice: an explicit number or "auto" for the candidate search.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ShiftChoice {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSection {
    #[serde(default)]
    pub l: Option<ShiftChoice>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_term_tol")]
    pub term_tol: f64,
}

fn default_k_max() -> usize {
    64
}

fn default_term_tol() -> f64 {
    1e-8
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self { l: None, k_max: default_k_max(), term_tol: default_term_tol() }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl RangeSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default)]
    pub xi: Option<RangeSpec>,
    #[serde(default)]
    pub domain_l: Option<RangeSpec>,
    #[serde(default)]
    pub domain_r: Option<RangeSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WcnSection {
    /// Leak conductance of the fast equation.
    pub l: f64,
    pub kappa: f64,
    #[serde(default = "default_wcn_orders")]
    pub orders: (usize, usize),
    #[serde(default = "default_wcn_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_wcn_tol")]
    pub tol: f64,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
}

fn default_wcn_orders() -> (usize, usize) {
    (8, 8)
}

fn default_wcn_max_iter() -> usize {
    200
}

fn default_wcn_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub epsilon: f64,
    pub t_end: f64,
    pub dt_fast: f64,
}

/// Top-level run configuration shared by all commands.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub expansion: ExpansionSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub wcn: Option<WcnSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.problem.grid.dt, self.problem.grid.steps)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kernel(&self) -> Result<DelayKernel> {
        let g = self.problem.kernel.clone().unwrap_or_else(DelayKernel::dirac);
        g.validate()?;
        Ok(g)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let a = self.problem.operator.build()?;
        let n = a.n();
        let grid = self.grid()?;
        let g = self.kernel()?;
        let heat = self.problem.operator.heat();

        let sigma = match (&self.problem.sigma, heat) {
            (Some(s), _) => s.build(n)?,
            (None, Some(h)) => h.sigma_matrix(),
            (None, None) => Array2::zeros((n, n)),
        };
        let input = match (&self.problem.input, heat) {
            (Some(i), _) => i.build()?,
            (None, Some(h)) => h.source(),
            (None, None) => InputSignal::Zero,
        };
        let history = match &self.problem.history {
            Some(h) => h.build(n)?,
            None => HistoryFunction::zero(n),
        };
        Problem::new(a, g, sigma, input, history, grid)
    }

    /// Resolves the shift: explicit value, heat-preset default, or the
    /// candidate search when "auto" is requested (also the fallback when no
    /// shift is given and no preset applies). The auto search fails loudly
    /// when no feasible shift exists.
    pub fn resolve_shift(&self, p: &Problem) -> Result<(f64, Option<SpectralReport>)> {
        match self.expansion.l {
            Some(ShiftChoice::Value(v)) => Ok((v, None)),
            Some(ShiftChoice::Auto(_)) => self.auto_shift(p),
            None => {
                if let Some(h) = self.problem.operator.heat() {
                    Ok((h.default_l(), None))
                } else {
                    self.auto_shift(p)
                }
            }
        }
    }

    fn auto_shift(&self, p: &Problem) -> Result<(f64, Option<SpectralReport>)> {
        let grid = self.grid()?;
        let xi = self.xi_grid(&grid);
        let candidates = default_l_candidates(&p.a);
        let best = search_l(&p.a, &p.g, &candidates, &xi)?;
        if !best.feasible {
            let modes = best
                .per_mode_ratios
                .as_ref()
                .map(|m| {
                    m.iter()
                        .map(|(k, r)| format!("{k}:{r:.3}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_else(|| "unavailable".into());
            return Err(Error::Divergence(format!(
                "no feasible shift found; best l = {} gives lambda = {:.6}, per-mode ratios: {}",
                best.l, best.lambda, modes
            )));
        }
        let l = best.l;
        Ok((l, Some(best)))
    }

    pub fn xi_grid(&self, grid: &TimeGrid) -> Vec<f64> {
        match self.spectral.xi {
            Some(r) => r.values(),
            None => grid.dft_frequencies(),
        }
    }

    pub fn expansion_config(&self, l: f64) -> ExpansionConfig {
        ExpansionConfig {
            l,
            k_max: self.expansion.k_max,
            term_tol: self.expansion.term_tol,
        }
    }

    /// Spectral report at the resolved shift over the configured grid.
    pub fn spectral_report(&self, p: &Problem, l: f64) -> Result<SpectralReport> {
        let grid = self.grid()?;
        contraction_ratio(&p.a, &p.g, l, &self.xi_grid(&grid))
    }

    pub fn learning_problem(&self) -> Result<(LearningProblem, &WcnSection)> {
        let wcn = self
            .wcn
            .as_ref()
            .ok_or_else(|| Error::Config("the wcn command needs a \"wcn\" section".into()))?;
        let p = self.build_problem()?;
        let grid = self.grid()?;
        let input = p.input_samples()?;
        let epsilon = wcn.simulate.map(|s| s.epsilon).unwrap_or(1e-3);
        let lp = LearningProblem::new(input, wcn.l, wcn.kappa, epsilon, grid)?;
        Ok((lp, wcn))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_preset_matches_stated_structure() {
        let h = HeatPreset::new(100);
        assert!((h.dx() - 0.01).abs() < 1e-15);
        assert!((h.default_l() - 20_000.0).abs() < 1e-9);
        let a = h.operator().unwrap();
        assert!(a.is_circulant());
        assert!(a.is_symmetric());
        let eigs = a.eigenvalues().unwrap();
        let s = 1.0 / (h.dx() * h.dx());
        for e in eigs {
            assert!(e.re <= 1e-6 && e.re >= -4.0 * s - 1e-6);
            assert!(e.im.abs() < 1e-6);
        }
    }

    #[test]
    fn minimal_config_parses_and_builds() {
        let text = r#"{
            "problem": {
                "operator": {"type": "heat", "n": 16, "dx": 1.0},
                "grid": {"dt": 0.01, "steps": 50}
            }
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.n(), 16);
        let (l, _) = cfg.resolve_shift(&p).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_sections_override_the_preset() {
        let text = r#"{
            "problem": {
                "operator": {"type": "heat", "n": 8, "dx": 1.0},
                "sigma": 0.0,
                "input": {"type": "zero"},
                "grid": {"dt": 0.1, "steps": 10}
            },
            "expansion": {"l": 3.5}
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        let p = cfg.build_problem().unwrap();
        assert!(p.sigma.iter().all(|v| *v == 0.0));
        let (l, _) = cfg.resolve_shift(&p).unwrap();
        assert_eq!(l, 3.5);
    }

    #[test]
    fn auto_shift_finds_a_feasible_value() {
        let text = r#"{
            "problem": {
                "operator": {"type": "dense", "matrix": [[-3.0, 0.5], [0.5, -2.0]]},
                "grid": {"dt": 0.01, "steps": 128}
            },
            "expansion": {"l": "auto"}
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        let p = cfg.build_problem().unwrap();
        let (l, report) = cfg.resolve_shift(&p).unwrap();
        assert!(l != 0.0);
        assert!(report.unwrap().feasible);
    }

    #[test]
    fn malformed_config_reports_location() {
        let err = RunConfig::parse("{\n  \"problem\": [\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{
            "problem": {
                "operator": {"type": "heat", "n": 8},
                "grid": {"dt": 0.1, "steps": 4},
                "typo_field": 1
            }
        }"#;
        assert!(RunConfig::parse(text).is_err());
    }
}
