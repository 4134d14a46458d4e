//! The four CLI commands. Each one reads a `RunConfig`, runs the relevant
//! modules and writes plot-ready files into the output directory.

use ndarray::Array2;
use serde::Serialize;
use std::path::Path;

use crate::config::{RangeSpec, RunConfig};
use crate::error::{Error, Result};
use crate::learning::{equilibrium_fixed_point, leading_order, response_term_norms, simulate_coupled};
use crate::output;
use crate::solver::{euler_maruyama, expand, field_l2, sample_brownian, SolutionField};
use crate::spectral::domain_scan;

/// Spectral analysis: curve samples, operator eigenvalues, the contraction
/// report at the resolved shift, and a feasibility atlas over (l, r).
pub fn cmd_spectral(cfg: &RunConfig, out: &Path) -> Result<()> {
    output::ensure_dir(out)?;
    let p = cfg.build_problem()?;
    let grid = cfg.grid()?;
    let (l, _) = cfg.resolve_shift(&p)?;
    let report = cfg.spectral_report(&p, l)?;

    output::write_curve_csv(&out.join("curve.csv"), &report.curve_samples)?;
    output::write_eigenvalues_csv(&out.join("eigenvalues.csv"), &report.eigenvalues)?;
    output::write_json(&out.join("report.json"), &report)?;

    let scale = p.a.norm().max(1.0);
    let l_values = cfg
        .spectral
        .domain_l
        .unwrap_or(RangeSpec { min: 0.05 * scale, max: 4.0 * scale, count: 32 })
        .values();
    let radii = cfg
        .spectral
        .domain_r
        .unwrap_or(RangeSpec { min: 0.0, max: 2.0 * scale, count: 32 })
        .values();
    let xi = cfg.xi_grid(&grid);
    let atlas = domain_scan(&p.g, &l_values, &xi, &radii);
    output::write_domain_csv(&out.join("domain.csv"), &atlas)?;
    Ok(())
}

#[derive(Serialize)]
struct SolveMeta {
    seed: u64,
    l: f64,
    k_max: usize,
    term_tol: f64,
    k_used: usize,
    term_norms: Vec<f64>,
}

/// Runs the expansion solver and writes the solution field, the per-term
/// norms and a metadata record.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<()> {
    output::ensure_dir(out)?;
    let p = cfg.build_problem()?;
    let grid = cfg.grid()?;
    let (l, _) = cfg.resolve_shift(&p)?;
    let expansion = cfg.expansion_config(l);
    let path = sample_brownian(cfg.seed, &grid, p.n());
    let sol = expand(&p, &expansion, &path)?;
    check_finite(&sol)?;

    output::write_field_csv(&out.join("solution.csv"), &grid.times(), &sol.samples)?;
    output::write_terms_csv(&out.join("terms.csv"), &sol.term_norms)?;
    output::write_json(
        &out.join("meta.json"),
        &SolveMeta {
            seed: cfg.seed,
            l,
            k_max: expansion.k_max,
            term_tol: expansion.term_tol,
            k_used: sol.k_used,
            term_norms: sol.term_norms.clone(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CompareSummary {
    seed: u64,
    l: f64,
    em_diverged: bool,
    em_divergence: Option<String>,
    rel_l2_error: Option<f64>,
    sup_error: Option<f64>,
    sup_expansion: f64,
    sup_euler: Option<f64>,
    k_used: usize,
}

/// Runs both solvers on the same Brownian path and writes both fields, the
/// pointwise error field and a summary. Euler divergence is a recorded
/// outcome, not a failure.
pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<()> {
    output::ensure_dir(out)?;
    let p = cfg.build_problem()?;
    let grid = cfg.grid()?;
    let (l, _) = cfg.resolve_shift(&p)?;
    let expansion = cfg.expansion_config(l);
    let path = sample_brownian(cfg.seed, &grid, p.n());

    let sol = expand(&p, &expansion, &path)?;
    check_finite(&sol)?;
    output::write_field_csv(&out.join("expansion.csv"), &grid.times(), &sol.samples)?;
    output::write_terms_csv(&out.join("terms.csv"), &sol.term_norms)?;
    let sup_expansion = sup_abs(&sol.samples);

    let summary = match euler_maruyama(&p, &path) {
        Ok(em) => {
            output::write_field_csv(&out.join("euler.csv"), &grid.times(), &em.samples)?;
            let diff: Array2<f64> = &sol.samples - &em.samples;
            output::write_field_csv(&out.join("error.csv"), &grid.times(), &diff)?;
            let rel = field_l2(&diff, grid.dt()) / field_l2(&em.samples, grid.dt()).max(f64::MIN_POSITIVE);
            CompareSummary {
                seed: cfg.seed,
                l,
                em_diverged: false,
                em_divergence: None,
                rel_l2_error: Some(rel),
                sup_error: Some(sup_abs(&diff)),
                sup_expansion,
                sup_euler: Some(sup_abs(&em.samples)),
                k_used: sol.k_used,
            }
        }
        Err(Error::Divergence(msg)) => CompareSummary {
            seed: cfg.seed,
            l,
            em_diverged: true,
            em_divergence: Some(msg),
            rel_l2_error: None,
            sup_error: None,
            sup_expansion,
            sup_euler: None,
            k_used: sol.k_used,
        },
        Err(e) => return Err(e),
    };
    output::write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct WcnDiagnostics {
    iterations: usize,
    residual: f64,
    order_norms: Vec<f64>,
    rel_distance_to_leading_order: f64,
    simulation: Option<WcnSimulation>,
}

#[derive(Serialize)]
struct WcnSimulation {
    steps: usize,
    residual: f64,
    rel_distance_to_fixed_point: f64,
}

/// Computes the Hebbian equilibrium connectivity, its leading-order
/// approximation and an optional two-timescale simulation cross-check.
pub fn cmd_wcn(cfg: &RunConfig, out: &Path) -> Result<()> {
    output::ensure_dir(out)?;
    let (lp, section) = cfg.learning_problem()?;
    let fp = equilibrium_fixed_point(&lp, section.orders, section.max_iter, section.tol)?;
    let lead = leading_order(&lp);

    output::write_matrix_csv(&out.join("wstar.csv"), &fp.w)?;
    output::write_matrix_csv(&out.join("leading_order.csv"), &lead.w)?;

    let fp_norm = frob(&fp.w).max(f64::MIN_POSITIVE);
    let rel_lead = frob(&(&fp.w - &lead.w)) / fp_norm;
    let order_norms = response_term_norms(&lp, &fp.w, section.orders.0);

    let simulation = match section.simulate {
        Some(sim) => {
            let s = simulate_coupled(&lp, sim.t_end, sim.dt_fast)?;
            let rel = frob(&(&s.w - &fp.w)) / fp_norm;
            Some(WcnSimulation {
                steps: s.iterations,
                residual: s.residual,
                rel_distance_to_fixed_point: rel,
            })
        }
        None => None,
    };

    output::write_json(
        &out.join("diagnostics.json"),
        &WcnDiagnostics {
            iterations: fp.iterations,
            residual: fp.residual,
            order_norms,
            rel_distance_to_leading_order: rel_lead,
            simulation,
        },
    )?;
    Ok(())
}

fn sup_abs(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_finite(sol: &SolutionField) -> Result<()> {
    if sol.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("solution contains non-finite values".into()));
    }
    Ok(())
}
