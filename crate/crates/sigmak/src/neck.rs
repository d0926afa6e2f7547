//! The approximate solution `u_ε` on the truncated cylinder `(log ε, −log ε)`.
//!
//! `u_ε = χ(t) u₁ + χ(−t) u₂` with `u₁,₂ = ε^{(n−2k)/2k} e^{∓(n−2k)t/2k}`
//! splices two end regions through a scaled Schwarzschild neck. The ends carry
//! a conformal background `b`; by default `(1 + b₁) u₁` is exactly the round
//! unit-sphere profile, so the ends solve the σ_k-Yamabe equation. The module
//! also provides the weight `ζ_ε = min(1, ε cosh t)`, discrete weighted norms
//! and the cone check for `g_ε`.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{Mesh, StencilOrder, UniformGrid};
use crate::quadrature::{gauss_legendre, integrate};
use crate::schouten::{geometric_sigmas, CylinderBackground};
use crate::symfun::Dimensions;

/// Synthetic conformal background on the neck.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum BackgroundModel {
    /// Round unit-sphere caps at both ends, spliced by `η`.
    #[default]
    RoundCaps,
    /// `b = A ε² cosh(2t)`.
    CoshPerturbation { amplitude: f64 },
    /// `b ≡ 0`.
    Flat,
}

/// Parameters of a neck construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckConfig {
    pub dims: Dimensions,
    pub eps: f64,
    /// Weight exponent, `|δ| < (n − 2k)/(2k)`.
    pub delta: f64,
    pub background: BackgroundModel,
}

impl NeckConfig {
    /// Validates `ε ∈ (0, 1)` and the admissible weight interval.
    pub fn new(
        dims: Dimensions,
        eps: f64,
        delta: f64,
        background: BackgroundModel,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return domain(format!("eps = {eps} outside (0, 1)"));
        }
        let r = dims.rate();
        if !(delta.abs() < r) {
            return domain(format!("delta = {delta} outside (-{r}, {r})"));
        }
        if let BackgroundModel::CoshPerturbation { amplitude } = background {
            if !amplitude.is_finite() {
                return domain("background amplitude must be finite");
            }
        }
        Ok(Self {
            dims,
            eps,
            delta,
            background,
        })
    }

    /// `L = −log ε`, the half-length of the neck.
    pub fn half_length(&self) -> f64 {
        -self.eps.ln()
    }

    /// The cutoff pair for this `ε`.
    pub fn cutoffs(&self) -> CutoffPair {
        CutoffPair {
            half_length: self.half_length(),
        }
    }
}

struct BumpRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

const BUMP_PANELS: usize = 8;

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_rule() -> &'static BumpRule {
    static RULE: OnceLock<BumpRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(24);
        let mut rule = BumpRule {
            nodes,
            weights,
            total: 0.0,
        };
        rule.total = 2.0 * bump_integral(&rule, 0.0);
        rule
    })
}

/// `∫_{−1}^{s} bump` for `s ≤ 0` by composite Gauss–Legendre.
fn bump_integral(rule: &BumpRule, s: f64) -> f64 {
    let w = (s + 1.0) / BUMP_PANELS as f64;
    (0..BUMP_PANELS)
        .map(|p| {
            let a = -1.0 + p as f64 * w;
            integrate(bump, a, a + w, &rule.nodes, &rule.weights)
        })
        .sum()
}

/// Normalized primitive of `exp(1 − 1/(1 − s²))`: 0 at `s = −1`, 1 at `s = 1`.
///
/// Evaluated for `s ≤ 0` and reflected, so `Ψ(s) + Ψ(−s) = 1` holds exactly.
pub fn bump_primitive(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let rule = bump_rule();
    if s <= 0.0 {
        bump_integral(rule, s) / rule.total
    } else {
        1.0 - bump_integral(rule, -s) / rule.total
    }
}

/// Smooth non-increasing step: 1 for `t ≤ t0`, 0 for `t ≥ t1`.
pub fn step_down(t: f64, t0: f64, t1: f64) -> f64 {
    if t <= t0 {
        1.0
    } else if t >= t1 {
        0.0
    } else {
        1.0 - bump_primitive(2.0 * (t - t0) / (t1 - t0) - 1.0)
    }
}

/// The cutoffs `η` (1 on `(log ε, −1]`, 0 on `[1, −log ε)`) and `χ`
/// (1 on `(log ε, −log ε − 1]`, 0 at `−log ε`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPair {
    pub half_length: f64,
}

impl CutoffPair {
    pub fn eta(&self, t: f64) -> f64 {
        step_down(t, -1.0, 1.0)
    }

    pub fn chi(&self, t: f64) -> f64 {
        step_down(t, self.half_length - 1.0, self.half_length)
    }
}

/// `u₁(t) = ε^{(n−2k)/2k} e^{−(n−2k)t/2k}`.
pub fn u1(cfg: &NeckConfig, t: f64) -> f64 {
    let r = cfg.dims.rate();
    (r * (cfg.eps.ln() - t)).exp()
}

/// `u_ε(t)`.
pub fn u_eps_at(cfg: &NeckConfig, t: f64) -> f64 {
    let c = cfg.cutoffs();
    c.chi(t) * u1(cfg, t) + c.chi(-t) * u1(cfg, -t)
}

/// Background value `b(t)` for the configured model.
pub fn background_at(cfg: &NeckConfig, t: f64) -> f64 {
    match cfg.background {
        BackgroundModel::Flat => 0.0,
        BackgroundModel::CoshPerturbation { amplitude } => {
            amplitude * cfg.eps.powi(2) * (2.0 * t).cosh()
        }
        BackgroundModel::RoundCaps => {
            let eta = cfg.cutoffs().eta(t);
            eta * cap(cfg, t) + (1.0 - eta) * cap(cfg, -t)
        }
    }
}

/// `b₁(t) = (1 + ε² e^{−2t}/4)^{−(n−2k)/2k} − 1`.
fn cap(cfg: &NeckConfig, t: f64) -> f64 {
    let x = 0.25 * cfg.eps.powi(2) * (-2.0 * t).exp();
    // (1+x)^{-r} - 1 written to avoid cancellation for small x.
    (-cfg.dims.rate() * x.ln_1p()).exp_m1()
}

fn check_span(cfg: &NeckConfig, mesh: &Mesh) -> Result<()> {
    let l = cfg.half_length();
    let g = mesh.t_grid();
    let tol = 1e-10 * l.max(1.0);
    if (g.start + l).abs() > tol || (g.end() - l).abs() > tol {
        return Err(Error::GridMismatch(format!(
            "grid [{}, {}] does not span [log eps, -log eps] = [{}, {}]",
            g.start,
            g.end(),
            -l,
            l
        )));
    }
    Ok(())
}

/// `u_ε` at every node of a mesh spanning `[log ε, −log ε]`.
pub fn build_u_eps(cfg: &NeckConfig, mesh: &Mesh) -> Result<Vec<f64>> {
    check_span(cfg, mesh)?;
    let nt = mesh.nt();
    let mut out = mesh.sample(|t, _| u_eps_at(cfg, t));
    // Pin the end values: u₁(log ε) = 1 and χ vanishes at −log ε.
    for m in 0..mesh.nphi() {
        out[mesh.index(0, m)] = 1.0;
        out[mesh.index(nt - 1, m)] = 1.0;
    }
    Ok(out)
}

/// Background field on the mesh.
pub fn build_background(cfg: &NeckConfig, mesh: &Mesh) -> Result<CylinderBackground> {
    check_span(cfg, mesh)?;
    match cfg.background {
        BackgroundModel::Flat => Ok(CylinderBackground::flat(cfg.dims)),
        _ => CylinderBackground::new(cfg.dims, mesh.sample(|t, _| background_at(cfg, t))),
    }
}

/// `ζ_ε(t) = min(1, ε cosh t)`.
pub fn zeta_eps(eps: f64, t: f64) -> f64 {
    (eps * t.cosh()).min(1.0)
}

/// A neck mesh with `u_ε` and its background.
#[derive(Debug, Clone)]
pub struct Neck {
    pub cfg: NeckConfig,
    pub mesh: Arc<Mesh>,
    pub u_eps: Vec<f64>,
    pub background: CylinderBackground,
}

impl Neck {
    /// Builds the neck on `nt` points in `t` (and `nphi` polar nodes).
    pub fn new(cfg: NeckConfig, nt: usize, nphi: usize, order: StencilOrder) -> Result<Self> {
        let l = cfg.half_length();
        let grid = UniformGrid::linspace(-l, l, nt)?;
        let mesh = Arc::new(Mesh::zonal(grid, nphi, order)?);
        let u_eps = build_u_eps(&cfg, &mesh)?;
        let background = build_background(&cfg, &mesh)?;
        Ok(Self {
            cfg,
            mesh,
            u_eps,
            background,
        })
    }
}

/// Region-resolved weighted norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormReport {
    pub m: usize,
    pub delta: f64,
    pub value: f64,
    /// Contributions of `T_{1,ε}`, `T_{Σ,ε}` and `T_{2,ε}`.
    pub regions: [f64; 3],
    /// Hölder exponent carried as metadata only.
    pub beta: f64,
}

/// Discrete `C^m_δ` norm `Σ_j sup ζ_ε^{δ+j} |∇^j u|_{g_ε}`, `m ≤ 2`.
///
/// Derivatives are measured in the `g_ε` scale, where one `t`-derivative
/// costs a factor `ζ_ε^{−1}`, so the `j`-th term is `ζ_ε^δ |∂^j u|_{cyl}`.
/// The regions are split at `t = ±(2k/n) log ε`, and the reported value is the
/// largest region contribution.
pub fn weighted_norm(
    field: &[f64],
    mesh: &Mesh,
    m: usize,
    delta: f64,
    cfg: &NeckConfig,
) -> Result<WeightedNormReport> {
    if m > 2 {
        return Err(Error::Unsupported(format!(
            "weighted norms of order {m} > 2"
        )));
    }
    mesh.check_len(field)?;
    let jets = if m > 0 { Some(mesh.jets(field)?) } else { None };
    let split = 2.0 * cfg.dims.k as f64 / cfg.dims.n as f64 * cfg.eps.ln();
    let n2 = (cfg.dims.n - 2) as f64;
    let mut sup = [[0.0_f64; 3]; 3];
    for i in 0..mesh.nt() {
        let t = mesh.t(i);
        let region = if t <= split {
            0
        } else if t < -split {
            1
        } else {
            2
        };
        let w = zeta_eps(cfg.eps, t).powf(delta);
        for mm in 0..mesh.nphi() {
            let idx = mesh.index(i, mm);
            sup[region][0] = sup[region][0].max(w * field[idx].abs());
            if let Some(js) = &jets {
                let j = js[idx];
                sup[region][1] = sup[region][1].max(w * (j.t * j.t + j.p * j.p).sqrt());
                if m >= 2 {
                    let hess =
                        (j.tt * j.tt + 2.0 * j.tp * j.tp + j.pp * j.pp + n2 * j.cot * j.cot).sqrt();
                    sup[region][2] = sup[region][2].max(w * hess);
                }
            }
        }
    }
    let regions = [0, 1, 2].map(|r| sup[r][..=m].iter().sum::<f64>());
    let value = regions.iter().cloned().fold(0.0, f64::max);
    Ok(WeightedNormReport {
        m,
        delta,
        value,
        regions,
        beta: 0.5,
    })
}

/// Outcome of [`cone_check_neck`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCheckReport {
    /// Whether `σ_j(g_ε⁻¹A_{g_ε}) > 0` for `j = 1..k−1` at every node.
    pub pass: bool,
    /// Minimum over nodes and `j ≤ k−1`.
    pub margin: f64,
    /// Minimum over nodes for each `j = 1..k−1`.
    pub per_order: Vec<f64>,
    /// `t` location of the overall minimum.
    pub argmin_t: f64,
    /// `σ_k(g_ε⁻¹A_{g_ε})` at the node closest to `t = 0`.
    pub sigma_k_center: f64,
}

/// Checks `g_ε ∈ Γ_{k−1}^+` node-wise.
pub fn cone_check_neck(neck: &Neck) -> Result<ConeCheckReport> {
    let dims = neck.cfg.dims;
    let sig = geometric_sigmas(&neck.mesh, &neck.background, &neck.u_eps, dims.k)?;
    let mut per_order = Vec::with_capacity(dims.k - 1);
    let mut margin = f64::INFINITY;
    let mut argmin_t = 0.0;
    for col in sig.iter().take(dims.k - 1) {
        let mut best = f64::INFINITY;
        for (idx, &v) in col.iter().enumerate() {
            if v < best {
                best = v;
            }
            if v < margin {
                margin = v;
                argmin_t = neck.mesh.t(idx / neck.mesh.nphi());
            }
        }
        per_order.push(best);
    }
    let mid = neck.mesh.index(neck.mesh.nt() / 2, 0);
    Ok(ConeCheckReport {
        pass: margin > 0.0,
        margin,
        per_order,
        argmin_t,
        sigma_k_center: sig[dims.k - 1][mid],
    })
}
