//! One function per pipeline verb. Each returns a table and an acceptance verdict.

use crate::config::{ExperimentConfig, Rung};
use crate::error::CliError;
use crate::report::{Cell, Table};
use coarsequant::coarse::{compare_with_direct, ladder_partition, quantize, recover_cosymbol, LadderLevel, NuCutoff, QuantizeOptions};
use coarsequant::diagnostics::{commutator_report, ladder_verdict};
use coarsequant::geometry::{distortion_bound, tangent_map, ManifoldGrid};
use coarsequant::index::toeplitz_index_ladder;
use coarsequant::liegroup::{group_average, ProperActionScene};
use coarsequant::operator::{rank_budget, real_norm, DiscreteOperator};
use coarsequant::rng::{gaussian_operator, stream, uniform};
use coarsequant::symbol::{catalog, Cosymbol, Symbol};
use coarsequant::verify::pseudolocality_ladder;
use faer::Mat;
use rayon::prelude::*;
use std::f64::consts::{E, TAU};

pub struct Outcome {
    pub table: Table,
    pub pass: bool,
    pub summary: String,
}

fn legs_for(grid: &ManifoldGrid) -> NuCutoff {
    NuCutoff::new(grid.ball_radius().min(0.5))
}

fn scalar_symbol(name: &str) -> Result<Symbol, CliError> {
    let s = catalog(name)?;
    if !s.is_scalar() {
        return Err(CliError::ConfigInvalid(format!("{name} is matrix-valued; the grid pipeline takes scalar symbols")));
    }
    Ok(s)
}

fn flat_circle(cfg: &ExperimentConfig, verb: &str) -> Result<(), CliError> {
    let grid = cfg.grid(&cfg.ladder[0])?;
    if grid.dim != 1 || !grid.is_flat() {
        return Err(CliError::ConfigInvalid(format!("{verb} runs on the flat circle")));
    }
    Ok(())
}

fn monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15)
}

pub fn quantize_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sym = scalar_symbol(&cfg.symbol)?;
    let mut table = Table::new(&["grid_n", "radius", "balls", "fiber_sup", "norm", "truncated_norm", "commutator_tail"]);
    let mut pass = true;
    for rung in &cfg.ladder {
        let grid = cfg.grid(rung)?;
        let legs = legs_for(&grid);
        let cos = Cosymbol::new(sym.clone(), grid.n, grid.dim, Some(legs.radius));
        let pou = ladder_partition(&grid, rung.radius)?;
        let q = quantize(&cos, &grid, &pou, &legs, QuantizeOptions { continuity_threshold: rung.epsilon })?;
        let fiber_sup = pou.points.iter().map(|x| cos.fiber(x).operator_norm()).fold(0.0, f64::max);
        let trunc = q.op.truncated_norm(rank_budget(grid.len()));
        let a: Vec<f64> = grid.points.iter().map(|p| p[0].sin()).collect();
        let tail = commutator_report(&q.op, &a).proxy_ratio();
        pass &= trunc <= 1.05 * fiber_sup + 1e-12;
        table.push(vec![
            rung.grid_n.into(),
            pou.cover[0].radius.into(),
            pou.len().into(),
            fiber_sup.into(),
            q.op.norm().into(),
            trunc.into(),
            tail.into(),
        ]);
    }
    Ok(Outcome { table, pass, summary: "truncated norm within 5% of the fiber bound".into() })
}

pub fn compare_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sym = scalar_symbol(&cfg.symbol)?;
    let grid = cfg.grid(&cfg.ladder[0])?;
    let legs = legs_for(&grid);
    let ladder: Vec<LadderLevel> = cfg.ladder.iter().map(|r| LadderLevel { n: r.grid_n, radius: r.radius }).collect();
    let model = |n: usize| cfg.grid(&Rung { grid_n: n, radius: 1.0, epsilon: None }).expect("validated stanza");
    let centre = grid.points[grid.len() / 2].clone();
    let localizer = move |x: &[f64]| {
        let d2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum();
        (-d2 / 0.36).exp()
    };
    let rows = compare_with_direct(&sym, model, &ladder, &legs, localizer)?;
    let mut table = Table::new(&["grid_n", "radius", "rank", "defect"]);
    for r in &rows {
        table.push(vec![r.n.into(), r.radius.into(), r.rank.into(), r.defect.into()]);
    }
    let defects: Vec<f64> = rows.iter().map(|r| r.defect).collect();
    Ok(Outcome { pass: monotone(&defects), table, summary: "defect nonincreasing along the ladder".into() })
}

pub fn recover_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sym = scalar_symbol(&cfg.symbol)?;
    let mut table = Table::new(&["grid_n", "radius", "width", "relative_error"]);
    let mut errors = Vec::new();
    for rung in &cfg.ladder {
        let grid = cfg.grid(rung)?;
        let legs = legs_for(&grid);
        let cos = Cosymbol::new(sym.clone(), grid.n, grid.dim, Some(legs.radius));
        let pou = ladder_partition(&grid, rung.radius)?;
        let q = quantize(&cos, &grid, &pou, &legs, QuantizeOptions { continuity_threshold: rung.epsilon })?;
        let x = grid.len() / 2;
        let width = 0.1f64.min(legs.core());
        let rec = recover_cosymbol(&q.op, &grid, x, width, &legs)?;
        let err = rec.relative_error(&cos.fiber(&grid.points[x]));
        errors.push(err);
        table.push(vec![rung.grid_n.into(), pou.cover[0].radius.into(), width.into(), err.into()]);
    }
    let pass = monotone(&errors) && errors.last().is_some_and(|&e| e <= 0.1);
    Ok(Outcome { table, pass, summary: "recovery error nonincreasing and at most 0.1 on the finest level".into() })
}

pub fn jacobi_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    const SAMPLES: u64 = 8;
    let mut table = Table::new(&["grid_n", "sample", "p_norm", "distortion", "bound"]);
    let mut pass = true;
    for (level, rung) in cfg.ladder.iter().enumerate() {
        let grid = cfg.grid(rung)?;
        let c = grid.bound();
        let r = grid.ball_radius();
        let rows: Vec<Result<(f64, f64, f64), CliError>> = (0..SAMPLES)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(cfg.seed, 1000 * level as u64 + k);
                let at = (uniform(&mut rng, 0.0, grid.len() as f64) as usize).min(grid.len() - 1);
                let dir: Vec<f64> = (0..grid.dim).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
                let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let len = uniform(&mut rng, 0.0, 0.999 * r);
                let p: Vec<f64> = dir.iter().map(|v| v * len / dn).collect();
                let w = tangent_map(&grid, &grid.points[at], &p)?;
                let d = w.nrows();
                let diff = Mat::<f64>::from_fn(d, d, |i, j| w[(i, j)] - if i == j { 1.0 } else { 0.0 });
                let bound = if grid.torsion_bound > 0.0 { len * c * E } else { distortion_bound(len, c) };
                Ok((len, real_norm(&diff), bound))
            })
            .collect();
        for (k, row) in rows.into_iter().enumerate() {
            let (len, dist, bound) = row?;
            pass &= dist <= bound + 1e-12;
            table.push(vec![rung.grid_n.into(), k.into(), len.into(), dist.into(), bound.into()]);
        }
    }
    Ok(Outcome { table, pass, summary: "tangent-map distortion within the certificate".into() })
}

pub fn average_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    const TRIALS: u64 = 10;
    let mut table = Table::new(&["grid_n", "trial", "width", "k_measure", "ratio"]);
    let mut pass = true;
    for (level, rung) in cfg.ladder.iter().enumerate() {
        let n = rung.grid_n;
        let period = ((rung.radius * n as f64 / TAU).round() as usize).max(1);
        let scene = ProperActionScene::new(n, period)?;
        for trial in 0..TRIALS {
            let mut rng = stream(cfg.seed, 5000 + 100 * level as u64 + trial);
            let top = (3 * period).min(n / 2).max(1);
            let width = (uniform(&mut rng, 1.0, top as f64 + 1.0) as usize).min(top);
            let lo = (uniform(&mut rng, 0.0, (n - width) as f64) as usize).min(n - width - 1);
            let g = gaussian_operator(&mut rng, width + 1);
            let mut t = DiscreteOperator::zeros(n);
            for i in 0..=width {
                for j in 0..=width {
                    t.mat[(lo + i, lo + j)] = g.get(i, j);
                }
            }
            let av = group_average(&scene, &t)?;
            let ratio = av.op.norm() / (av.k_measure as f64 * t.norm());
            pass &= ratio <= 1.0 + 1e-12;
            table.push(vec![n.into(), (trial as usize).into(), width.into(), av.k_measure.into(), ratio.into()]);
        }
    }
    Ok(Outcome { table, pass, summary: "‖Av T‖ ≤ |K|‖T‖ for every trial".into() })
}

pub fn diagnose_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    flat_circle(cfg, "diagnose")?;
    let sym = scalar_symbol(&cfg.symbol)?;
    let grids: Vec<usize> = cfg.ladder.iter().map(|r| r.grid_n).collect();
    let (reports, scale) = pseudolocality_ladder(&sym, &grids);
    let verdict = ladder_verdict(&reports, scale, 0.05, 1.5);
    let mut table = Table::new(&["grid_n", "op_id", "r", "tail_ratio"]);
    for rep in &reports {
        for (r, t) in rep.standard_ratios() {
            table.push(vec![rep.n.into(), Cell::from(cfg.symbol.as_str()), r.into(), t.into()]);
        }
    }
    Ok(Outcome { table, pass: verdict.pass, summary: "commutator tail ≤ 0.05 at N/8, improving ≥ 1.5× per doubling".into() })
}

pub fn index_run(sym: &Symbol, grids: &[usize]) -> Result<Outcome, CliError> {
    let report = toeplitz_index_ladder(sym, grids)?;
    let mut table = Table::new(&["grid_n", "analytic", "rounded", "residual", "topological"]);
    for &(n, a) in &report.ladder {
        let rounded = a.round() as i64;
        let topo = report.topological.unwrap_or(0);
        table.push(vec![n.into(), a.into(), rounded.into(), (a - rounded as f64).abs().into(), topo.into()]);
    }
    let pass = report.verdict() == Some(true);
    let summary = format!(
        "index {} (analytic {:.6}, residual {:.2e}), topological {}",
        report.rounded,
        report.analytic,
        report.residual,
        report.topological.map_or("n/a".into(), |t| t.to_string())
    );
    Ok(Outcome { table, pass, summary })
}

pub fn index_verb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sym = scalar_symbol(&cfg.symbol)?;
    let grids: Vec<usize> = cfg.ladder.iter().map(|r| r.grid_n).collect();
    index_run(&sym, &grids)
}
