//! One function per subcommand, each producing a table, criteria and values.
//!
//! Library errors become a [`Failure`] carrying whatever diagnostics exist at
//! that point, so a numerical failure still leaves a report on disk.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use sigmak::dtn::{dtn_spectrum, match_cauchy, monolithic_solve, DtnSpectrum};
use sigmak::grid::Mesh;
use sigmak::linop::{linearize, LinearizedOperator};
use sigmak::models::{
    homogeneous_linearization, nondegeneracy_scan, product_schouten, ProductModel, TorusSpectrum,
};
use sigmak::neck::{background_at, cone_check_neck, zeta_eps, ConeCheckReport, Neck};
use sigmak::schouten::{cylinder_sigma_closed_form, schouten_cylinder};
use sigmak::schwarzschild::{verify_flat, SchwarzschildParams};
use sigmak::solver::{glue_solve, proper_error};
use sigmak::symfun::sigma;

use crate::config::RunConfig;
use crate::report::{Artifacts, Criterion, Failure, Table};
use crate::Subcommand;

type Outcome = Result<Artifacts, Failure>;

fn lib_failure(e: sigmak::Error) -> Failure {
    Failure {
        message: e.to_string(),
        diagnostics: json!({ "error": format!("{e:?}") }),
    }
}

/// Runs one subcommand; failures are folded into the artifacts.
pub fn run(sub: Subcommand, cfg: &RunConfig) -> Artifacts {
    let outcome = match sub {
        Subcommand::SigmaTable => sigma_table(cfg),
        Subcommand::SchwarzschildVerify => schwarzschild_verify(cfg),
        Subcommand::NeckBuild => neck_build(cfg),
        Subcommand::ConeCheck => cone_check(cfg),
        Subcommand::ErrorScaling => error_scaling(cfg),
        Subcommand::DtnConverge => dtn_converge(cfg),
        Subcommand::MatchDemo => match_demo(cfg),
        Subcommand::Solve => solve(cfg),
        Subcommand::ModelsVerify => models_verify(cfg),
        Subcommand::All => unreachable!("`all` is dispatched by the caller"),
    };
    outcome.unwrap_or_else(|failure| Artifacts {
        table: Table::new(&["error"]),
        criteria: Vec::new(),
        values: Value::Null,
        failure: Some(failure),
    })
}

fn sigma_table(cfg: &RunConfig) -> Outcome {
    let n = cfg.dims.n;
    let spec = schouten_cylinder(cfg.dims);
    let mut table = Table::new(&["j", "sigma_j", "closed_form", "abs_error"]);
    let mut worst = 0.0_f64;
    for j in 1..=n {
        let s = sigma(&spec, j).map_err(lib_failure)?;
        let closed = cylinder_sigma_closed_form(n, j);
        worst = worst.max((s - closed).abs());
        table.push(vec![
            j.into(),
            s.into(),
            closed.into(),
            (s - closed).abs().into(),
        ]);
    }
    Ok(Artifacts::new(
        table,
        vec![Criterion::at_most("max_abs_error", worst, 1e-12)],
        json!({ "n": n }),
    ))
}

fn radial_mesh(cfg: &RunConfig, half: f64) -> Result<Arc<Mesh>, Failure> {
    Mesh::radial_on(-half, half, cfg.grid.nt, cfg.grid.order)
        .map(Arc::new)
        .map_err(lib_failure)
}

fn schwarzschild_verify(cfg: &RunConfig) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mesh = radial_mesh(cfg, 4.0)?;
    let mut table = Table::new(&[
        "sample",
        "h0",
        "c",
        "direct",
        "factorized",
        "route_gap",
        "h_drift",
    ]);
    let (mut residual, mut drift) = (0.0_f64, 0.0_f64);
    for sample in 0..5 {
        let h0 = rng.gen_range(0.25..4.0);
        let c = rng.gen_range(-1.0..1.0);
        let p = SchwarzschildParams::new(cfg.dims, h0, c).map_err(lib_failure)?;
        let r = verify_flat(&p, mesh.clone()).map_err(lib_failure)?;
        residual = residual.max(r.direct);
        drift = drift.max(r.h_drift / h0);
        table.push(vec![
            sample.into(),
            h0.into(),
            c.into(),
            r.direct.into(),
            r.factorized.into(),
            r.route_gap.into(),
            r.h_drift.into(),
        ]);
    }
    let criteria = vec![
        Criterion::at_most("max_residual", residual, 1e-6),
        Criterion::at_most("relative_h_drift", drift, 1e-8),
    ];
    Ok(Artifacts::new(
        table,
        criteria,
        json!({ "max_residual": residual, "relative_h_drift": drift }),
    ))
}

fn neck_build(cfg: &RunConfig) -> Outcome {
    let nc = cfg.neck(cfg.eps);
    let neck = Neck::new(nc, cfg.grid.nt, 1, cfg.grid.order).map_err(lib_failure)?;
    let mut table = Table::new(&["t", "u_eps", "b", "zeta"]);
    for i in 0..neck.mesh.nt() {
        let t = neck.mesh.t(i);
        table.push(vec![
            t.into(),
            neck.u_eps[i].into(),
            background_at(&nc, t).into(),
            zeta_eps(nc.eps, t).into(),
        ]);
    }
    let last = neck.u_eps.len() - 1;
    let end_error = (neck.u_eps[0] - 1.0)
        .abs()
        .max((neck.u_eps[last] - 1.0).abs());
    let min_u = neck.u_eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = neck.u_eps[neck.mesh.nt() / 2];
    let criteria = vec![
        Criterion::at_most("end_values", end_error, 1e-12),
        Criterion::at_least("min_u", min_u, 0.0),
    ];
    Ok(Artifacts::new(
        table,
        criteria,
        json!({ "half_length": nc.half_length(), "u_center": center, "min_u": min_u }),
    ))
}

fn cone_reports(cfg: &RunConfig) -> Result<Vec<ConeCheckReport>, Failure> {
    cfg.eps_sweep
        .par_iter()
        .map(|&eps| {
            let neck = Neck::new(cfg.neck(eps), cfg.grid.nt, 1, cfg.grid.order)?;
            cone_check_neck(&neck)
        })
        .collect::<sigmak::Result<Vec<_>>>()
        .map_err(lib_failure)
}

fn cone_check(cfg: &RunConfig) -> Outcome {
    let reports = cone_reports(cfg)?;
    let mut table = Table::new(&["eps", "margin", "argmin_t", "sigma_k_center", "in_cone"]);
    let mut criteria = Vec::new();
    for (eps, r) in cfg.eps_sweep.iter().zip(&reports) {
        table.push(vec![
            (*eps).into(),
            r.margin.into(),
            r.argmin_t.into(),
            r.sigma_k_center.into(),
            r.pass.into(),
        ]);
        criteria.push(Criterion::at_least(
            format!("margin_positive_eps_{eps:e}"),
            r.margin,
            f64::MIN_POSITIVE,
        ));
    }
    let monotone = reports.windows(2).all(|w| w[1].margin >= w[0].margin);
    criteria.push(Criterion::holds(
        "margin_non_decreasing_as_eps_decreases",
        monotone,
    ));
    Ok(Artifacts::new(
        table,
        criteria,
        json!({ "reports": reports }),
    ))
}

fn error_scaling(cfg: &RunConfig) -> Outcome {
    let r = proper_error(
        &cfg.neck(cfg.eps_sweep[0]),
        &cfg.eps_sweep,
        cfg.grid.nt,
        cfg.grid.order,
    )
    .map_err(lib_failure)?;
    let mut table = Table::new(&["eps", "norm", "region_1", "region_sigma", "region_2"]);
    for p in &r.points {
        let g = p.norm.regions;
        table.push(vec![
            p.eps.into(),
            p.norm.value.into(),
            g[0].into(),
            g[1].into(),
            g[2].into(),
        ]);
    }
    let criteria = vec![Criterion::at_most(
        "exponent_relative_error",
        r.relative_error,
        0.15,
    )];
    Ok(Artifacts::new(
        table,
        criteria,
        json!({ "slope": r.fit.slope, "intercept": r.fit.intercept, "predicted": r.predicted }),
    ))
}

fn neck_operator(cfg: &RunConfig, eps: f64) -> sigmak::Result<LinearizedOperator> {
    let neck = Neck::new(cfg.neck(eps), cfg.grid.nt, 1, cfg.grid.order)?;
    linearize(neck.mesh.clone(), &neck.background, &neck.u_eps)
}

fn dtn_converge(cfg: &RunConfig) -> Outcome {
    let spectra: Vec<DtnSpectrum> = cfg
        .eps_sweep
        .par_iter()
        .map(|&eps| dtn_spectrum(&neck_operator(cfg, eps)?, cfg.modes.jmax))
        .collect::<sigmak::Result<_>>()
        .map_err(lib_failure)?;
    let mut table = Table::new(&[
        "eps",
        "j",
        "lambda",
        "T_eps_j",
        "S_eps_j",
        "mu_j",
        "abs_error",
    ]);
    for (eps, s) in cfg.eps_sweep.iter().zip(&spectra) {
        for m in &s.modes {
            table.push(vec![
                (*eps).into(),
                m.j.into(),
                m.lambda.into(),
                m.t_eps.into(),
                m.s_eps.into(),
                m.mu.into(),
                (m.t_eps - m.mu).abs().into(),
            ]);
        }
    }
    let mut criteria = Vec::new();
    for j in 0..=cfg.modes.jmax {
        let errs: Vec<f64> = spectra
            .iter()
            .map(|s| (s.modes[j].t_eps - s.modes[j].mu).abs())
            .collect();
        criteria.push(Criterion::holds(
            format!("monotone_decay_j{j}"),
            errs.windows(2).all(|w| w[1] < w[0]),
        ));
    }
    let finest = spectra.last().expect("the sweep is non-empty");
    for &j in &cfg.modes.limit_modes {
        let m = finest.modes[j];
        criteria.push(Criterion::at_most(
            format!("limit_j{j}"),
            (m.t_eps - m.mu).abs(),
            cfg.modes.limit_tol,
        ));
    }
    Ok(Artifacts::new(
        table,
        criteria,
        json!({ "weighted_t_error": finest.weighted_t_error() }),
    ))
}

fn match_demo(cfg: &RunConfig) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let op = neck_operator(cfg, cfg.eps).map_err(lib_failure)?;
    let nt = op.mesh.nt();
    let mut table = Table::new(&[
        "trial",
        "j",
        "psi",
        "t_minus_s",
        "derivative_jump",
        "sup_gap",
    ]);
    let mut worst = 0.0_f64;
    for trial in 0..5 {
        let j = rng.gen_range(0..=cfg.modes.jmax);
        let bumps: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(0.3..2.0),
                )
            })
            .collect();
        let f: Vec<f64> = (0..nt)
            .map(|i| {
                bumps
                    .iter()
                    .map(|&(a, m, s)| a * (-((op.mesh.t(i) - m) / s).powi(2)).exp())
                    .sum()
            })
            .collect();
        let matched = match_cauchy(&op, j, &f).map_err(lib_failure)?;
        let mono = monolithic_solve(&op, j, &f).map_err(lib_failure)?;
        let gap = matched
            .w
            .iter()
            .zip(&mono)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(gap);
        table.push(vec![
            trial.into(),
            j.into(),
            matched.psi.into(),
            matched.t_minus_s.into(),
            matched.derivative_jump.into(),
            gap.into(),
        ]);
    }
    Ok(Artifacts::new(
        table,
        vec![Criterion::at_most("max_sup_gap", worst, 1e-8)],
        json!({ "max_sup_gap": worst }),
    ))
}

fn solve(cfg: &RunConfig) -> Outcome {
    let g = glue_solve(
        &cfg.neck(cfg.eps),
        cfg.grid.nt,
        cfg.grid.nphi,
        cfg.grid.order,
        &cfg.solver,
    )
    .map_err(|f| Failure {
        message: f.error.to_string(),
        diagnostics: json!({ "error": format!("{:?}", f.error), "history": f.report }),
    })?;
    let r = &g.solve.report;
    let mut table = Table::new(&[
        "iteration",
        "residual",
        "correction",
        "cone_margin",
        "ellipticity",
    ]);
    for (i, res) in r.residuals.iter().enumerate() {
        let at = |v: &Vec<f64>| v.get(i).copied().unwrap_or(f64::NAN);
        table.push(vec![
            i.into(),
            (*res).into(),
            at(&r.corrections).into(),
            at(&r.cone_margins).into(),
            at(&r.ellipticity).into(),
        ]);
    }
    let final_residual = r.residuals.last().copied().unwrap_or(f64::NAN);
    let cone_margin = g
        .certificate
        .margins
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let criteria = vec![
        Criterion::at_most("final_residual", final_residual, cfg.solver.tol),
        Criterion::at_least("cone_margin", cone_margin, f64::MIN_POSITIVE),
        Criterion::at_most("certificate_deviation", g.certificate.max_deviation, 1e-8),
        Criterion::holds("positive", g.certificate.positive),
    ];
    let values = json!({
        "final_residual": final_residual,
        "cone_margin": cone_margin,
        "iterations": r.iterations,
        "relative_correction": g.relative_correction,
        "certificate": g.certificate,
        "refinement": r.refinement,
        "quadratic_ratios": r.quadratic_ratios,
    });
    Ok(Artifacts::new(table, criteria, values))
}

fn models_verify(cfg: &RunConfig) -> Outcome {
    let model = ProductModel::s6_t2();
    let spec = product_schouten(&model).map_err(lib_failure)?;
    let lin = homogeneous_linearization(&model, 3).map_err(lib_failure)?;
    let q = 5.0 / 42.0;
    let checks = [
        ("sigma_1", sigma(&spec, 1).map_err(lib_failure)?, 18.0 * q),
        (
            "sigma_2",
            sigma(&spec, 2).map_err(lib_failure)?,
            105.0 * q * q,
        ),
        (
            "sigma_3",
            sigma(&spec, 3).map_err(lib_failure)?,
            56.0 * q * q * q,
        ),
        ("laplacian_ratio", lin.coefficient_ratio(), 7.0 / 24.0),
        ("newton_sphere_block", lin.blocks[0].newton, 49.0 / 36.0),
        ("newton_torus_block", lin.blocks[1].newton, 14.0 / 3.0),
        ("zero_order", lin.zero_order, -14.0 / 3.0),
        ("unit_constant", lin.unit_constant(), 5.0 / 21.0),
    ];
    let mut table = Table::new(&["quantity", "computed", "expected", "abs_error"]);
    let mut criteria = Vec::new();
    for (name, got, want) in checks {
        table.push(vec![
            name.into(),
            got.into(),
            want.into(),
            (got - want).abs().into(),
        ]);
        criteria.push(Criterion::at_most(name, (got - want).abs(), 1e-12));
    }
    let mut scans = serde_json::Map::new();
    for (label, l) in [
        ("derived", lin.clone()),
        ("alternate_25_126", lin.with_unit_constant(25.0 / 126.0)),
    ] {
        for torus in [TorusSpectrum::Integers, TorusSpectrum::Lattice] {
            let scan = nondegeneracy_scan(&l, torus, 40);
            let name = format!("s6_t2_{label}_{torus:?}_non_degenerate").to_lowercase();
            let min_gap = scan
                .rows
                .iter()
                .map(|r| r.gap)
                .fold(f64::INFINITY, f64::min);
            scans.insert(name.clone(), json!({ "min_gap": min_gap }));
            criteria.push(Criterion::holds(name, !scan.degenerate));
        }
    }
    let n = cfg.dims.n;
    let sphere = homogeneous_linearization(
        &ProductModel::round_sphere(n).map_err(lib_failure)?,
        cfg.dims.k,
    )
    .map_err(lib_failure)?;
    let rp = homogeneous_linearization(
        &ProductModel::projective_space(n).map_err(lib_failure)?,
        cfg.dims.k,
    )
    .map_err(lib_failure)?;
    criteria.push(Criterion::holds(
        format!("round_sphere_{n}_degenerate"),
        nondegeneracy_scan(&sphere, TorusSpectrum::Integers, 10).degenerate,
    ));
    criteria.push(Criterion::holds(
        format!("projective_space_{n}_non_degenerate"),
        !nondegeneracy_scan(&rp, TorusSpectrum::Integers, 10).degenerate,
    ));
    criteria.push(Criterion::at_most(
        "round_sphere_unit_constant",
        (sphere.unit_constant() - n as f64).abs(),
        1e-12,
    ));
    Ok(Artifacts::new(
        table,
        criteria,
        json!({ "scans": scans, "metric_scale": lin.metric_scale }),
    ))
}
