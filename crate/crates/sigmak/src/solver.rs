//! Proper error, quadratic remainder and the Newton drivers.
//!
//! Two schemes are provided. The frozen scheme inverts the linearization at
//! the initial guess for every iterate,
//! `w_{i+1} = 𝕃(u_ε)⁻¹[−N(u_ε) − Q(u_ε)(w_i)]`, which is algebraically the
//! chord iteration `w_{i+1} = w_i − 𝕃(u_ε)⁻¹ N(u_ε + w_i)`. Full Newton
//! relinearizes at every iterate. Converged `f64` solutions can be refined in
//! double-double arithmetic: the residual is evaluated with
//! [`DoubleDouble`] while corrections come from the `f64` Jacobian.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banded::BandedLu;
use crate::error::{domain, Error, Result};
use crate::fit::{fit_power_law, LineFit};
use crate::grid::{sup_norm, Mesh, StencilOrder};
use crate::linop::linearize;
use crate::neck::{weighted_norm, Neck, NeckConfig, WeightedNormReport};
use crate::quadrature::gauss_legendre;
use crate::scalar::{join, DoubleDouble, Real};
use crate::schouten::{assemble_b, geometric_sigmas, nonlinear_op, CylinderBackground};
use crate::symfun::Dimensions;

/// Iteration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Linearization frozen at the initial guess.
    #[default]
    Frozen,
    /// Relinearize at every iterate.
    FullNewton,
}

/// Controls for [`newton_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub scheme: Scheme,
    /// Target for `max |N(u)|` over interior nodes.
    pub tol: f64,
    pub max_iter: usize,
    /// First iterate at which loss of ellipticity aborts the solve.
    pub cone_from: usize,
    /// Number of double-double refinement sweeps after convergence.
    pub refine_steps: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Frozen,
            tol: 1e-10,
            max_iter: 30,
            cone_from: 1,
            refine_steps: 0,
        }
    }
}

impl SolveConfig {
    /// Validates `tol > 0` and `max_iter ≥ 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return domain(format!("tol = {} must be positive", self.tol));
        }
        if self.max_iter < 1 {
            return domain("max_iter must be at least 1");
        }
        Ok(())
    }
}

/// Corrections below this size are dominated by rounding.
const RATIO_FLOOR: f64 = 1e-9;

/// Per-iterate history and derived diagnostics of a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: Scheme,
    /// `max |N(u_i)|` over interior nodes for `i = 0, 1, …`.
    pub residuals: Vec<f64>,
    /// `‖w_{i+1} − w_i‖_∞`.
    pub corrections: Vec<f64>,
    /// `‖w_i‖_∞` for `i ≥ 1`.
    pub iterate_norms: Vec<f64>,
    /// `min_{j ≤ k} σ_j(g⁻¹A_g)` over interior nodes per iterate.
    pub cone_margins: Vec<f64>,
    /// Smallest eigenvalue of `T_{k−1}(g⁻¹A_g)` per iterate.
    pub ellipticity: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖w_{i+1}−w_i‖/‖w_i−w_{i−1}‖²` (Newton constant estimates), recorded
    /// while the newer correction exceeds the rounding floor.
    pub quadratic_ratios: Vec<f64>,
    /// `‖w_{i+1}−w_i‖/‖w_i−w_{i−1}‖` (contraction estimates).
    pub linear_ratios: Vec<f64>,
    /// `‖w_i‖/‖w_1‖`, mirroring the bound chain `a_{j+1} = 1 + a_j²/4`.
    pub bound_chain: Vec<f64>,
    /// Relative residual `max |N|/(K u^p)` after each double-double sweep.
    pub refinement: Vec<f64>,
}

impl ConvergenceReport {
    fn finish(&mut self) {
        let c = &self.corrections;
        self.quadratic_ratios = c
            .windows(2)
            .filter(|w| w[1] > RATIO_FLOOR)
            .map(|w| w[1] / (w[0] * w[0]))
            .collect();
        self.linear_ratios = c
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        if let Some(&first) = self.iterate_norms.first() {
            if first > 0.0 {
                self.bound_chain = self.iterate_norms.iter().map(|x| x / first).collect();
            }
        }
    }
}

/// Successful solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub mesh: Arc<Mesh>,
    /// Leading part of the solution.
    pub u: Vec<f64>,
    /// Double-double correction (zero without refinement).
    pub u_lo: Vec<f64>,
    pub report: ConvergenceReport,
}

/// Failed solve with the partial history.
#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct SolveFailure {
    pub error: Error,
    pub report: ConvergenceReport,
}

fn interior_max(mesh: &Mesh, v: &[f64]) -> f64 {
    let np = mesh.nphi();
    v[np..v.len() - np].iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn zero_boundary(mesh: &Mesh, v: &mut [f64]) {
    let np = mesh.nphi();
    let n = v.len();
    v[..np].iter_mut().for_each(|x| *x = 0.0);
    v[n - np..].iter_mut().for_each(|x| *x = 0.0);
}

/// `min_{1 ≤ j ≤ k} σ_j(g_u⁻¹A_{g_u})` over interior nodes, evaluated in
/// double-double arithmetic from `u = hi + lo`.
///
/// On a thin neck `σ_k` is a small difference of large terms, so `f64`
/// evaluation is not reliable there.
pub fn cone_margin(mesh: &Mesh, bg: &CylinderBackground, hi: &[f64], lo: &[f64]) -> Result<f64> {
    let u: Vec<DoubleDouble> = hi.iter().zip(lo).map(|(&h, &l)| join(h, l)).collect();
    let sig = geometric_sigmas(mesh, bg, &u, bg.dims.k)?;
    let np = mesh.nphi();
    Ok(sig
        .iter()
        .flat_map(|col| col[np..col.len() - np].iter().map(|x| x.to_f64()))
        .fold(f64::INFINITY, f64::min))
}

/// Smallest eigenvalue of `T_{k−1}(g⁻¹A_g)` over interior nodes.
///
/// Positivity is ellipticity of the linearized operator at `u`.
pub fn ellipticity_margin(mesh: &Mesh, bg: &CylinderBackground, u: &[f64]) -> Result<f64> {
    let dims = bg.dims;
    let b = assemble_b(mesh, bg, u)?;
    let big_u = bg.fold(mesh, u)?;
    let np = mesh.nphi();
    let mut best = f64::INFINITY;
    for idx in np..u.len() - np {
        let t = b[idx].newton_transform(dims.n, dims.k - 1)?;
        let (l1, _) = t.block_eigenvalues();
        let s = dims.a().powi(dims.k as i32 - 1)
            * big_u[idx].powf(-(dims.k as f64 - 1.0) * dims.p() / dims.k as f64);
        best = best.min(l1.min(t.ww) * s);
    }
    Ok(best)
}

/// `max |N(u)|/(K u^p)` over interior nodes.
pub fn relative_residual(mesh: &Mesh, bg: &CylinderBackground, u: &[f64]) -> Result<f64> {
    let dims = bg.dims;
    let f = nonlinear_op(mesh, bg, u)?;
    let p = dims.p();
    let kappa = dims.kappa();
    let np = mesh.nphi();
    Ok((np..u.len() - np)
        .map(|i| (f[i] / (kappa * u[i].powf(p))).abs())
        .fold(0.0, f64::max))
}

/// Newton iteration for `N_ḡ(u) = 0` with `u = init` on the first and last
/// `t`-rows.
pub fn newton_solve(
    mesh: Arc<Mesh>,
    bg: &CylinderBackground,
    init: &[f64],
    cfg: &SolveConfig,
) -> std::result::Result<SolveOutcome, SolveFailure> {
    let mut report = ConvergenceReport {
        scheme: cfg.scheme,
        ..Default::default()
    };
    let fail = |error: Error, mut report: ConvergenceReport| {
        report.finish();
        SolveFailure { error, report }
    };
    if let Err(e) = cfg.validate().and_then(|_| mesh.check_len(init)) {
        return Err(fail(e, report));
    }
    let mut u = init.to_vec();
    let mut frozen: Option<BandedLu> = None;
    for it in 0..=cfg.max_iter {
        let mut f = match nonlinear_op(&mesh, bg, &u) {
            Ok(f) => f,
            Err(e) => return Err(fail(e, report)),
        };
        zero_boundary(&mesh, &mut f);
        let r = interior_max(&mesh, &f);
        report.residuals.push(r);
        let margin = cone_margin(&mesh, bg, &u, &vec![0.0; u.len()]).unwrap_or(f64::NAN);
        report.cone_margins.push(margin);
        let elliptic = ellipticity_margin(&mesh, bg, &u).unwrap_or(f64::NAN);
        report.ellipticity.push(elliptic);
        if it >= cfg.cone_from && !(elliptic > 0.0) {
            return Err(fail(
                Error::ConeExit {
                    iteration: it,
                    margin: elliptic,
                },
                report,
            ));
        }
        if !r.is_finite() {
            return Err(fail(
                Error::MaxIter {
                    iterations: it,
                    residual: r,
                },
                report,
            ));
        }
        if r <= cfg.tol {
            report.converged = true;
            report.iterations = it;
            break;
        }
        if it == cfg.max_iter {
            report.iterations = it;
            return Err(fail(
                Error::MaxIter {
                    iterations: it,
                    residual: r,
                },
                report,
            ));
        }
        let lu = match (&frozen, cfg.scheme) {
            (Some(lu), Scheme::Frozen) => lu.clone(),
            _ => {
                let op = match linearize(mesh.clone(), bg, &u) {
                    Ok(op) => op,
                    Err(e) => return Err(fail(e, report)),
                };
                match op.assemble(true).factor() {
                    Ok(lu) => {
                        if cfg.scheme == Scheme::Frozen {
                            frozen = Some(lu.clone());
                        }
                        lu
                    }
                    Err(e) => return Err(fail(e, report)),
                }
            }
        };
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let du = match lu.solve(&rhs) {
            Ok(d) => d,
            Err(e) => return Err(fail(e, report)),
        };
        for (x, d) in u.iter_mut().zip(&du) {
            *x += d;
        }
        report.corrections.push(sup_norm(&du));
        let w: Vec<f64> = u.iter().zip(init).map(|(a, b)| a - b).collect();
        report.iterate_norms.push(sup_norm(&w));
        let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_u > 0.0) {
            return Err(fail(
                Error::PositivityLoss {
                    iteration: it + 1,
                    min_u,
                },
                report,
            ));
        }
    }
    let mut u_lo = vec![0.0; u.len()];
    if cfg.refine_steps > 0 {
        match refine_double_double(mesh.clone(), bg, &mut u, &mut u_lo, cfg.refine_steps) {
            Ok(hist) => report.refinement = hist,
            Err(e) => return Err(fail(e, report)),
        }
    }
    let margin = cone_margin(&mesh, bg, &u, &u_lo).unwrap_or(f64::NAN);
    if !(margin > 0.0) {
        return Err(fail(
            Error::ConeExit {
                iteration: report.iterations,
                margin,
            },
            report,
        ));
    }
    report.finish();
    Ok(SolveOutcome {
        mesh,
        u,
        u_lo,
        report,
    })
}

/// Relative residual `max |N(u)|/(K u^p)` over interior nodes, in double-double.
pub fn relative_residual_dd(
    mesh: &Mesh,
    bg: &CylinderBackground,
    u: &[DoubleDouble],
) -> Result<(Vec<f64>, f64)> {
    let dims = bg.dims;
    let n = nonlinear_op(mesh, bg, u)?;
    let (pn, pd) = dims.p_ratio();
    let kappa = DoubleDouble::from_f64(dims.kappa());
    let np = mesh.nphi();
    let mut worst = 0.0_f64;
    let mut abs = Vec::with_capacity(n.len());
    for (i, (ni, ui)) in n.iter().zip(u).enumerate() {
        abs.push(ni.to_f64());
        if i >= np && i < u.len() - np {
            let rel = (*ni / (kappa * ui.pow_ratio(pn, pd))).to_f64().abs();
            worst = worst.max(rel);
        }
    }
    Ok((abs, worst))
}

/// Refines `u + u_lo` with residuals evaluated in double-double arithmetic.
///
/// Returns the relative residual before each sweep and after the last one.
pub fn refine_double_double(
    mesh: Arc<Mesh>,
    bg: &CylinderBackground,
    u: &mut [f64],
    u_lo: &mut [f64],
    steps: usize,
) -> Result<Vec<f64>> {
    let op = linearize(mesh.clone(), bg, u)?;
    let lu = op.assemble(true).factor()?;
    let mut hist = Vec::new();
    for step in 0..=steps {
        let dd: Vec<DoubleDouble> = u
            .iter()
            .zip(u_lo.iter())
            .map(|(&h, &l)| join(h, l))
            .collect();
        let (mut f, rel) = relative_residual_dd(&mesh, bg, &dd)?;
        hist.push(rel);
        if step == steps || rel < 1e-24 {
            break;
        }
        zero_boundary(&mesh, &mut f);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let du = lu.solve(&rhs)?;
        for i in 0..u.len() {
            let v = dd[i] + DoubleDouble::from_f64(du[i]);
            u[i] = v.hi();
            u_lo[i] = v.lo();
        }
    }
    Ok(hist)
}

/// Independent re-evaluation of a solution's curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `2^{−k} C(n,k)`.
    pub target: f64,
    /// `max |σ_k(g̃⁻¹A_g̃) − target|` over interior nodes.
    pub max_deviation: f64,
    /// `min σ_j(g̃⁻¹A_g̃)` over interior nodes for `j = 1..=k`.
    pub margins: Vec<f64>,
    pub min_u: f64,
    pub positive: bool,
}

impl Certificate {
    /// Whether every cone margin is positive.
    pub fn in_cone(&self) -> bool {
        self.margins.iter().all(|&m| m > 0.0)
    }
}

/// Evaluates `σ_j(g̃⁻¹A_g̃)` for `g̃ = ((1+b)u)^{4k/(n−2k)} g_cyl` in
/// double-double arithmetic from `u = hi + lo`.
pub fn solution_certificate(
    mesh: &Mesh,
    bg: &CylinderBackground,
    hi: &[f64],
    lo: &[f64],
) -> Result<Certificate> {
    mesh.check_len(hi)?;
    mesh.check_len(lo)?;
    let dims = bg.dims;
    let u: Vec<DoubleDouble> = hi.iter().zip(lo).map(|(&h, &l)| join(h, l)).collect();
    let min_u = hi.iter().cloned().fold(f64::INFINITY, f64::min);
    let sig = geometric_sigmas(mesh, bg, &u, dims.k)?;
    let target = dims.sphere_sigma();
    let np = mesh.nphi();
    let range = np..u.len() - np;
    let t = DoubleDouble::from_f64(target);
    let max_deviation = sig[dims.k - 1][range.clone()]
        .iter()
        .map(|&s| (s - t).to_f64().abs())
        .fold(0.0, f64::max);
    let margins = sig
        .iter()
        .map(|col| {
            col[range.clone()]
                .iter()
                .map(|x| x.to_f64())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(Certificate {
        target,
        max_deviation,
        margins,
        min_u,
        positive: min_u > 0.0,
    })
}

/// `Q(u)(w) = N(u + w) − N(u) − 𝕃(u)[w]`.
pub fn quadratic_remainder(
    mesh: Arc<Mesh>,
    bg: &CylinderBackground,
    u: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    let uw: Vec<f64> = u.iter().zip(w).map(|(a, b)| a + b).collect();
    if uw.iter().any(|&x| !(x > 0.0)) {
        return domain("u + w must be positive");
    }
    let n1 = nonlinear_op(&mesh, bg, &uw)?;
    let n0 = nonlinear_op(&mesh, bg, u)?;
    let lw = linearize(mesh, bg, u)?.apply(w)?;
    Ok((0..u.len()).map(|i| n1[i] - n0[i] - lw[i]).collect())
}

/// `Q(u)(w) = −∫₀¹ (𝕃(u) − 𝕃(u + s w))[w] ds` by 5-point Gauss–Legendre.
pub fn quadratic_remainder_integral(
    mesh: Arc<Mesh>,
    bg: &CylinderBackground,
    u: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    let (x, wt) = gauss_legendre(5);
    let l0 = linearize(mesh.clone(), bg, u)?.apply(w)?;
    let mut acc = vec![0.0; u.len()];
    for (xi, wi) in x.iter().zip(&wt) {
        let s = 0.5 * (xi + 1.0);
        let us: Vec<f64> = u.iter().zip(w).map(|(a, b)| a + s * b).collect();
        let ls = linearize(mesh.clone(), bg, &us)?.apply(w)?;
        for i in 0..u.len() {
            acc[i] += 0.5 * wi * (ls[i] - l0[i]);
        }
    }
    Ok(acc)
}

/// Exponent `ν = (n−2k)/n · ((n+2k)/(2k) + δ)` of the proper-error estimate.
pub fn predicted_proper_exponent(dims: Dimensions, delta: f64) -> f64 {
    let (n, k) = (dims.n as f64, dims.k as f64);
    (n - 2.0 * k) / n * ((n + 2.0 * k) / (2.0 * k) + delta)
}

/// One point of a proper-error sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProperErrorPoint {
    pub eps: f64,
    pub norm: WeightedNormReport,
}

/// Proper-error sweep with a power-law fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProperErrorReport {
    pub points: Vec<ProperErrorPoint>,
    pub fit: LineFit,
    pub predicted: f64,
    /// `|fitted − predicted|/predicted`.
    pub relative_error: f64,
}

/// Weighted norm of `N(u_ε)` with weight `δ − (n−2k)(2k−1)/(2k)`.
pub fn proper_error_at(
    cfg: &NeckConfig,
    nt: usize,
    order: StencilOrder,
) -> Result<WeightedNormReport> {
    let neck = Neck::new(*cfg, nt, 1, order)?;
    let n = nonlinear_op(&neck.mesh, &neck.background, &neck.u_eps)?;
    let dims = cfg.dims;
    let weight =
        cfg.delta - (dims.n - 2 * dims.k) as f64 * (2 * dims.k - 1) as f64 / (2 * dims.k) as f64;
    weighted_norm(&n, &neck.mesh, 0, weight, cfg)
}

/// Proper-error sweep over `eps_list` (computed concurrently).
pub fn proper_error(
    base: &NeckConfig,
    eps_list: &[f64],
    nt: usize,
    order: StencilOrder,
) -> Result<ProperErrorReport> {
    let points: Result<Vec<ProperErrorPoint>> = eps_list
        .par_iter()
        .map(|&eps| {
            let cfg = NeckConfig::new(base.dims, eps, base.delta, base.background)?;
            Ok(ProperErrorPoint {
                eps,
                norm: proper_error_at(&cfg, nt, order)?,
            })
        })
        .collect();
    let points = points?;
    let xs: Vec<f64> = points.iter().map(|p| p.eps).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.norm.value).collect();
    let fit = fit_power_law(&xs, &ys)?;
    let predicted = predicted_proper_exponent(base.dims, base.delta);
    Ok(ProperErrorReport {
        points,
        fit,
        predicted,
        relative_error: (fit.slope - predicted).abs() / predicted,
    })
}

/// Outcome of [`glue_solve`].
#[derive(Debug, Clone)]
pub struct GlueOutcome {
    pub neck: Neck,
    pub solve: SolveOutcome,
    pub certificate: Certificate,
    /// `‖u_ε⁻¹ w‖_∞` with `w = u − u_ε`.
    pub relative_correction: f64,
}

/// Solves the σ_k-Yamabe equation on the neck with `u = u_ε` at `t = ±log ε`.
pub fn glue_solve(
    cfg: &NeckConfig,
    nt: usize,
    nphi: usize,
    order: StencilOrder,
    scfg: &SolveConfig,
) -> std::result::Result<GlueOutcome, SolveFailure> {
    let neck = Neck::new(*cfg, nt, nphi, order).map_err(|error| SolveFailure {
        error,
        report: ConvergenceReport::default(),
    })?;
    let solve = newton_solve(neck.mesh.clone(), &neck.background, &neck.u_eps, scfg)?;
    let certificate = solution_certificate(&neck.mesh, &neck.background, &solve.u, &solve.u_lo)
        .map_err(|error| SolveFailure {
            error,
            report: solve.report.clone(),
        })?;
    let relative_correction = solve
        .u
        .iter()
        .zip(&neck.u_eps)
        .map(|(u, e)| ((u - e) / e).abs())
        .fold(0.0, f64::max);
    Ok(GlueOutcome {
        neck,
        solve,
        certificate,
        relative_correction,
    })
}

/// Sphere profile `cosh(t − t₀)^{−(n−2k)/(2k)}`.
pub fn sphere_profile(dims: Dimensions, t: f64, t0: f64) -> f64 {
    (t - t0).cosh().powf(-dims.rate())
}

/// Outcome of [`sphere_recovery`].
#[derive(Debug, Clone)]
pub struct SphereRecovery {
    pub solve: SolveOutcome,
    /// `max |u − sphere|` over all nodes.
    pub sup_error: f64,
}

/// Perturbs the sphere profile by `amplitude·(e^{−t²} − e^{−T²})/(1 − e^{−T²})`
/// on `[−T, T]` and solves back with the exact sphere values at the ends.
pub fn sphere_recovery(
    dims: Dimensions,
    half: f64,
    nt: usize,
    amplitude: f64,
    scfg: &SolveConfig,
) -> std::result::Result<SphereRecovery, SolveFailure> {
    let wrap = |error: Error| SolveFailure {
        error,
        report: ConvergenceReport::default(),
    };
    let mesh = Arc::new(Mesh::radial_on(-half, half, nt, StencilOrder::Fourth).map_err(wrap)?);
    let bg = CylinderBackground::flat(dims);
    let exact = mesh.sample(|t, _| sphere_profile(dims, t, 0.0));
    let floor = (-half * half).exp();
    let init = mesh.sample(|t, _| {
        sphere_profile(dims, t, 0.0) * (1.0 + amplitude * ((-t * t).exp() - floor) / (1.0 - floor))
    });
    let solve = newton_solve(mesh, &bg, &init, scfg)?;
    let sup_error = solve
        .u
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(SphereRecovery { solve, sup_error })
}
