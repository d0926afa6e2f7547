//! Half-neck Dirichlet problems and Dirichlet-to-Neumann maps.
//!
//! For a radial base point the linearized operator is diagonal in spherical
//! modes. On the left half `[log ε, 0]` with `w(log ε) = 0` and `w(0) = 1` the
//! map `T_ε` returns `∂_t w(0)`; on the right half `[0, −log ε]` the map `S_ε`
//! returns `∂_t w(0)` of the corresponding solution. Each half carries its own
//! one-sided stencils at the interface, so the Neumann data are computed
//! without reference to the other half.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linop::{indicial_roots, IndicialModel, LinearizedOperator, ModeOde};

/// Which half of the neck a problem lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A mode problem on one half-neck with homogeneous data at the outer end.
#[derive(Debug, Clone)]
pub struct HalfNeckProblem {
    pub side: Side,
    pub j: usize,
    pub ode: ModeOde,
    /// Index of the first node of the half in the full grid.
    pub offset: usize,
}

impl HalfNeckProblem {
    /// Index of the interface node `t = 0` within the half.
    pub fn interface(&self) -> usize {
        match self.side {
            Side::Left => self.ode.len() - 1,
            Side::Right => 0,
        }
    }

    /// Solves `L_j w = f` with `w = 0` at the outer end and `w = psi` at `t = 0`.
    pub fn solve(&self, f: &[f64], psi: f64) -> Result<Vec<f64>> {
        match self.side {
            Side::Left => self.ode.solve(f, 0.0, psi),
            Side::Right => self.ode.solve(f, psi, 0.0),
        }
    }

    /// `∂_t w` at the interface from the half's one-sided stencil.
    pub fn interface_derivative(&self, w: &[f64]) -> f64 {
        self.ode.derivative_at(w, self.interface())
    }
}

/// Index of the node `t = 0` of a symmetric grid with an odd node count.
pub fn center_index(op: &LinearizedOperator) -> Result<usize> {
    let nt = op.mesh.nt();
    if nt.is_multiple_of(2) {
        return domain(format!(
            "need an odd number of t-nodes so t = 0 is a node (nt = {nt})"
        ));
    }
    let i0 = (nt - 1) / 2;
    if op.mesh.t(i0).abs() > 1e-9 * op.mesh.t_grid().step.max(1.0) {
        return domain("grid is not symmetric about t = 0");
    }
    Ok(i0)
}

/// Builds the half-neck problem for mode `j`.
pub fn half_neck(op: &LinearizedOperator, side: Side, j: usize) -> Result<HalfNeckProblem> {
    let i0 = center_index(op)?;
    let nt = op.mesh.nt();
    let (lo, hi) = match side {
        Side::Left => (0, i0),
        Side::Right => (i0, nt - 1),
    };
    Ok(HalfNeckProblem {
        side,
        j,
        ode: op.mode_ode(j, lo, hi)?,
        offset: lo,
    })
}

/// Left half restricted to `[γ log ε, 0]`.
pub fn half_neck_window(op: &LinearizedOperator, j: usize, gamma: f64) -> Result<HalfNeckProblem> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return domain(format!("gamma = {gamma} outside (0, 1]"));
    }
    let i0 = center_index(op)?;
    let t_start = gamma * op.mesh.t(0);
    let g = op.mesh.t_grid();
    let lo = (((t_start - g.start) / g.step).round().max(0.0)) as usize;
    Ok(HalfNeckProblem {
        side: Side::Left,
        j,
        ode: op.mode_ode(j, lo, i0)?,
        offset: lo,
    })
}

/// Solves a mode Dirichlet problem with source `f` and interface value `psi`.
pub fn mode_dirichlet_solve(p: &HalfNeckProblem, f: &[f64], psi: f64) -> Result<Vec<f64>> {
    p.solve(f, psi)
}

fn unit_derivative(p: &HalfNeckProblem) -> Result<f64> {
    let w = p.solve(&vec![0.0; p.ode.len()], 1.0)?;
    Ok(p.interface_derivative(&w))
}

/// `(T_ε)_j`.
pub fn dtn_t(op: &LinearizedOperator, j: usize) -> Result<f64> {
    unit_derivative(&half_neck(op, Side::Left, j)?)
}

/// `(S_ε)_j`.
pub fn dtn_s(op: &LinearizedOperator, j: usize) -> Result<f64> {
    unit_derivative(&half_neck(op, Side::Right, j)?)
}

/// `(T_ε)_j` computed on the window `[γ log ε, 0]`.
pub fn dtn_t_window(op: &LinearizedOperator, j: usize, gamma: f64) -> Result<f64> {
    unit_derivative(&half_neck_window(op, j, gamma)?)
}

/// One mode of a DtN spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtnMode {
    pub j: usize,
    pub lambda: f64,
    pub t_eps: f64,
    pub s_eps: f64,
    /// Limit value `μ_j`.
    pub mu: f64,
}

/// Per-mode DtN values for `j = 0..=jmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnSpectrum {
    pub modes: Vec<DtnMode>,
}

impl DtnSpectrum {
    /// `max_j |T_j − μ_j| (1 + λ_j)^{−1/2}`.
    pub fn weighted_t_error(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| (m.t_eps - m.mu).abs() / (1.0 + m.lambda).sqrt())
            .fold(0.0, f64::max)
    }
}

/// DtN values for all modes up to `jmax`, computed concurrently.
pub fn dtn_spectrum(op: &LinearizedOperator, jmax: usize) -> Result<DtnSpectrum> {
    let modes: Result<Vec<DtnMode>> = (0..=jmax)
        .into_par_iter()
        .map(|j| {
            Ok(DtnMode {
                j,
                lambda: op.dims.lambda(j),
                t_eps: dtn_t(op, j)?,
                s_eps: dtn_s(op, j)?,
                mu: indicial_roots(op.dims, j, IndicialModel::Neck),
            })
        })
        .collect();
    Ok(DtnSpectrum { modes: modes? })
}

/// Outcome of [`match_cauchy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSolution {
    /// Global solution on the full grid.
    pub w: Vec<f64>,
    /// Interface value `ψ_j`.
    pub psi: f64,
    /// `(T_ε − S_ε)_j`.
    pub t_minus_s: f64,
    /// `|∂_t w(0⁻) − ∂_t w(0⁺)|` of the assembled solution.
    pub derivative_jump: f64,
}

/// Threshold below which `T_ε − S_ε` is treated as singular.
pub const INTERFACE_THRESHOLD: f64 = 1e-8;

/// Solves `L_j w = f` on the full neck with zero end data by matching the
/// Cauchy data of two half-neck solves.
pub fn match_cauchy(op: &LinearizedOperator, j: usize, f: &[f64]) -> Result<MatchedSolution> {
    if f.len() != op.mesh.nt() {
        return Err(Error::GridMismatch(
            "mode source must live on the t-grid".into(),
        ));
    }
    let left = half_neck(op, Side::Left, j)?;
    let right = half_neck(op, Side::Right, j)?;
    let i0 = left.ode.len() - 1;
    let f1 = &f[..=i0];
    let f2 = &f[i0..];
    let w1 = left.solve(f1, 0.0)?;
    let w2 = right.solve(f2, 0.0)?;
    let u1 = left.solve(&vec![0.0; f1.len()], 1.0)?;
    let u2 = right.solve(&vec![0.0; f2.len()], 1.0)?;
    let t = left.interface_derivative(&u1);
    let s = right.interface_derivative(&u2);
    let t_minus_s = t - s;
    if t_minus_s.abs() < INTERFACE_THRESHOLD {
        return Err(Error::SingularInterface {
            mode: j,
            value: t_minus_s,
        });
    }
    let gap = right.interface_derivative(&w2) - left.interface_derivative(&w1);
    let psi = gap / t_minus_s;
    let wl: Vec<f64> = w1.iter().zip(&u1).map(|(a, b)| a + psi * b).collect();
    let wr: Vec<f64> = w2.iter().zip(&u2).map(|(a, b)| a + psi * b).collect();
    let jump = (left.interface_derivative(&wl) - right.interface_derivative(&wr)).abs();
    let mut w = wl;
    w.extend_from_slice(&wr[1..]);
    Ok(MatchedSolution {
        w,
        psi,
        t_minus_s,
        derivative_jump: jump,
    })
}

/// Solves `L_j w = f` on the full neck with one banded solve.
pub fn monolithic_solve(op: &LinearizedOperator, j: usize, f: &[f64]) -> Result<Vec<f64>> {
    let nt = op.mesh.nt();
    if f.len() != nt {
        return Err(Error::GridMismatch(
            "mode source must live on the t-grid".into(),
        ));
    }
    op.mode_ode(j, 0, nt - 1)?.solve(f, 0.0, 0.0)
}
