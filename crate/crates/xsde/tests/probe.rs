// temporary diagnostics, removed before release
use ndarray::Array2;
use xsde::*;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
#[ignore]
fn probe_domain_scans() {
    for (alpha, xi_max) in [(2.0, 20.0), (0.3, 5.0)] {
        let g = DelayKernel::single_delay(alpha, 1.0);
        let xi = linspace(-xi_max, xi_max, 8001);
        let ls = linspace(0.2, 8.0, 40);
        let rs = linspace(0.0, 3.0, 31);
        let table = domain_scan(&g, &ls, &xi, &rs);
        let n_feasible = table.iter().filter(|p| p.feasible).count();
        println!("alpha={alpha}: feasible {n_feasible}/{}", table.len());
        // look for a row (fixed r) with a feasibility gap along l
        let mut gaps = 0;
        for (ri, &r) in rs.iter().enumerate() {
            let row: Vec<bool> = ls
                .iter()
                .enumerate()
                .map(|(li, _)| table[li * rs.len() + ri].feasible)
                .collect();
            let mut transitions = 0;
            for w in row.windows(2) {
                if w[0] != w[1] {
                    transitions += 1;
                }
            }
            if transitions >= 3 {
                gaps += 1;
                if gaps <= 3 {
                    println!("  r={r:.2} row: {:?}", row.iter().map(|b| *b as u8).collect::<Vec<_>>());
                }
            }
        }
        println!("  rows with gaps: {gaps}");
        // min_dist profile along l (at r = 0 entries)
        let prof: Vec<f64> = ls
            .iter()
            .enumerate()
            .map(|(li, _)| table[li * rs.len()].min_dist)
            .collect();
        println!(
            "  min_dist(l): {:?}",
            prof.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
}

#[test]
#[ignore]
fn probe_stochastic_order() {
    let a = SpaceOperator::dense(ndarray::array![[-3.0, 1.0], [1.0, -3.0]]).unwrap();
    let tau = 16.0;
    let fine_steps = 2048usize;
    let fine = TimeGrid::new(tau / fine_steps as f64, fine_steps).unwrap();
    let mk = |grid: TimeGrid| {
        Problem::new(
            a.clone(),
            DelayKernel::dirac(),
            Array2::eye(2),
            InputSignal::Zero,
            HistoryFunction::zero(2),
            grid,
        )
        .unwrap()
    };
    for dt in [2.0, 1.0, 0.5, 0.25, 0.125] {
        let steps = (tau / dt) as usize;
        let grid = TimeGrid::new(dt, steps).unwrap();
        let factor = fine_steps / steps;
        let mut errs = Vec::new();
        for seed in 0..16u64 {
            let fine_path = sample_brownian(seed, &fine, 2);
            let reference = euler_maruyama(&mk(fine), &fine_path).unwrap();
            let coarse_path = fine_path.aggregate(factor).unwrap();
            let sol = expand(&mk(grid), &ExpansionConfig::new(3.0), &coarse_path).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..steps {
                for x in 0..2 {
                    let r = reference.samples[[x, i * factor]];
                    let d = sol.samples[[x, i]] - r;
                    num += d * d;
                    den += r * r;
                }
            }
            errs.push((num / den).sqrt());
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        println!("dt={dt}: mean rel err {mean:.4}");
    }
}

#[test]
#[ignore]
fn probe_deterministic_order() {
    let a = SpaceOperator::dense(ndarray::array![[-3.0, 1.0], [1.0, -3.0]]).unwrap();
    let tau = 1.0;
    let fine_steps = 100_000usize;
    let fine = TimeGrid::new(tau / fine_steps as f64, fine_steps).unwrap();
    let mk = |grid: TimeGrid| {
        Problem::new(
            a.clone(),
            DelayKernel::dirac(),
            Array2::zeros((2, 2)),
            InputSignal::Constant(vec![1.0, 0.0]),
            HistoryFunction::zero(2),
            grid,
        )
        .unwrap()
    };
    let reference = euler_maruyama(&mk(fine), &BrownianPath::zeros(&fine, 2)).unwrap();
    let mut prev: Option<f64> = None;
    for steps in [125usize, 250, 500, 1000, 2000] {
        let dt = tau / steps as f64;
        let grid = TimeGrid::new(dt, steps).unwrap();
        let factor = fine_steps / steps;
        let sol = expand(&mk(grid), &ExpansionConfig::new(3.0), &BrownianPath::zeros(&grid, 2)).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..steps {
            for x in 0..2 {
                let r = reference.samples[[x, i * factor]];
                let d = sol.samples[[x, i]] - r;
                num += d * d;
                den += r * r;
            }
        }
        let err = (num / den).sqrt();
        let ratio = prev.map(|p| p / err).unwrap_or(f64::NAN);
        println!("dt={dt}: rel err {err:.3e}  ratio vs prev {ratio:.3}");
        prev = Some(err);
    }
}

#[test]
#[ignore]
fn probe_heat_seeds() {
    let preset = xsde::config::HeatPreset::new(100).with_dx(1.0).with_sigma(0.1);
    let grid = TimeGrid::new(0.01, 500).unwrap();
    let mk_sigma = |s: f64| {
        Problem::new(
            preset.operator().unwrap(),
            DelayKernel::dirac(),
            Array2::eye(100) * s,
            preset.source(),
            HistoryFunction::zero(100),
            grid,
        )
        .unwrap()
    };
    let p0 = mk_sigma(0.0);
    let z = BrownianPath::zeros(&grid, 100);
    let sol = expand(&p0, &ExpansionConfig::new(2.0), &z).unwrap();
    let em = euler_maruyama(&p0, &z).unwrap();
    let rel = field_l2(&(&sol.samples - &em.samples), 0.01) / field_l2(&em.samples, 0.01);
    println!("deterministic part: rel={rel:.3e}");
    let p = mk_sigma(0.1);
    for seed in 0..10u64 {
        let path = sample_brownian(seed, &grid, 100);
        let sol = expand(&p, &ExpansionConfig::new(2.0), &path).unwrap();
        let em = euler_maruyama(&p, &path).unwrap();
        let diff = &sol.samples - &em.samples;
        let rel = field_l2(&diff, 0.01) / field_l2(&em.samples, 0.01);
        let sup_err = diff.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let sup_sol = em.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
        println!("seed {seed}: rel={rel:.4e} sup_ratio={:.0}", sup_sol / sup_err);
    }
}

#[test]
#[ignore]
fn probe_heat_figure() {
    use std::time::Instant;
    let preset = xsde::config::HeatPreset::new(100).with_dx(1.0).with_sigma(0.1);
    let grid = TimeGrid::new(0.01, 500).unwrap();
    let p = Problem::new(
        preset.operator().unwrap(),
        DelayKernel::dirac(),
        preset.sigma_matrix(),
        preset.source(),
        HistoryFunction::zero(100),
        grid,
    )
    .unwrap();
    let path = sample_brownian(1, &grid, 100);
    let t0 = Instant::now();
    let sol = expand(&p, &ExpansionConfig::new(2.0), &path).unwrap();
    let t_exp = t0.elapsed();
    let t0 = Instant::now();
    let em = euler_maruyama(&p, &path).unwrap();
    let t_em = t0.elapsed();
    let diff = &sol.samples - &em.samples;
    let rel = field_l2(&diff, 0.01) / field_l2(&em.samples, 0.01);
    let sup_err = diff.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sup_sol = em.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    println!("k_used={} rel={rel:.3e} sup_err={sup_err:.3e} sup_sol={sup_sol:.3e} ratio={:.1}", sol.k_used, sup_sol / sup_err);
    println!("expand {t_exp:?}  em {t_em:?}");
    println!("term norms: {:?}", &sol.term_norms[..sol.term_norms.len().min(40)]);
    // large step
    let grid1 = TimeGrid::new(1.0, 500).unwrap();
    let p1 = Problem::new(
        preset.operator().unwrap(),
        DelayKernel::dirac(),
        preset.sigma_matrix(),
        preset.source(),
        HistoryFunction::zero(100),
        grid1,
    )
    .unwrap();
    let path1 = sample_brownian(1, &grid1, 100);
    let em1 = euler_maruyama(&p1, &path1);
    println!("em at dt=1: {:?}", em1.as_ref().map(|_| "ok").map_err(|e| e.to_string()));
    let t0 = Instant::now();
    let sol1 = expand(&p1, &ExpansionConfig::new(2.0), &path1).unwrap();
    println!("expansion at dt=1: k_used={} time {:?}", sol1.k_used, t0.elapsed());
    let sup1 = sol1.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    println!("sup dt=1: {sup1:.3}  vs 10x sup dt=0.01: {:.3}", 10.0 * sup_sol);
}
