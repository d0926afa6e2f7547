//! Linearizations of `N` and their mode-by-mode analysis.
//!
//! The analytic linearization follows from `dσ_k = tr(T_{k−1}(B) dB)` with
//! `dB[W] = (1/a)[2UW A_cyl − a(U∇²W + W∇²U) + c(dU⊗dW + dW⊗dU) − a²⟨dU,dW⟩g]`.
//! With the background folded in, `L_ḡ(u)[w] = (1+b)^{−p} L_cyl(U)[(1+b)w]`.
//! The operator is stored as seven node-wise coefficients acting on the jet
//! `(W, W_t, W_φ, W_tt, W_tφ, W_φφ, cot φ W_φ)` plus row and column scales.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::error::{domain, Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::grid::{Jet, LineStencil, Mesh, UniformGrid};
use crate::schouten::{endo_from_jet, nonlinear_op, CylinderBackground};
use crate::symfun::{ArrowEndo, Dimensions};

/// Index of each jet component in [`LinearizedOperator::coefs`].
pub mod slot {
    pub const W: usize = 0;
    pub const T: usize = 1;
    pub const P: usize = 2;
    pub const TT: usize = 3;
    pub const TP: usize = 4;
    pub const PP: usize = 5;
    pub const COT: usize = 6;
}

/// Analytic linearization of `N_ḡ` at a base point.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub dims: Dimensions,
    pub mesh: Arc<Mesh>,
    /// Folded base point `U = (1 + b) u`.
    pub folded: Vec<f64>,
    /// σ_k-part coefficients of `L_cyl(U)` on the jet of `W`.
    pub coefs: Vec<[f64; 7]>,
    /// Zero-order term `−K p U^{p−1}` of the power nonlinearity.
    pub power: Vec<f64>,
    /// `T_{k−1}(B)` at each node.
    pub newton: Vec<ArrowEndo<f64>>,
    /// `(1 + b)^{−p}`.
    pub row_scale: Vec<f64>,
    /// `1 + b`.
    pub col_scale: Vec<f64>,
}

/// σ_k-part coefficients of `L_cyl(U)` at one node from the jet of `U`,
/// together with `T_{k−1}(B)` there.
pub fn jet_coefficients(dims: Dimensions, j: &Jet<f64>) -> Result<([f64; 7], ArrowEndo<f64>)> {
    let (n, k) = (dims.n, dims.k);
    let a = dims.a();
    let c = dims.c();
    let inv_a = 1.0 / a;
    let n2 = (n - 2) as f64;
    let b = endo_from_jet(dims, j);
    let t = b.newton_transform(n, k - 1)?;
    let mut cf = [0.0; 7];
    cf[slot::W] = inv_a
        * (t.tt * (-j.u - a * j.tt)
            + 2.0 * t.tp * (-a * j.tp)
            + t.pp * (j.u - a * j.pp)
            + n2 * t.ww * (j.u - a * j.cot));
    cf[slot::T] = inv_a
        * (t.tt * (2.0 * c - a * a) * j.t + 2.0 * t.tp * c * j.p
            - a * a * j.t * (t.pp + n2 * t.ww));
    cf[slot::P] = inv_a
        * (2.0 * t.tp * c * j.t + t.pp * (2.0 * c - a * a) * j.p
            - a * a * j.p * (t.tt + n2 * t.ww));
    cf[slot::TT] = -t.tt * j.u;
    cf[slot::TP] = -2.0 * t.tp * j.u;
    cf[slot::PP] = -t.pp * j.u;
    cf[slot::COT] = -n2 * t.ww * j.u;
    Ok((cf, t))
}

/// Assembles the analytic linearization of `N_ḡ` at `u`.
pub fn linearize(
    mesh: Arc<Mesh>,
    bg: &CylinderBackground,
    u: &[f64],
) -> Result<LinearizedOperator> {
    let dims = bg.dims;
    let folded = bg.fold(&mesh, u)?;
    let jets = mesh.jets(&folded)?;
    let kappa = dims.kappa();
    let p = dims.p();
    let (pn, pd) = dims.p_ratio();
    let mut coefs = Vec::with_capacity(jets.len());
    let mut newton = Vec::with_capacity(jets.len());
    let mut power = Vec::with_capacity(jets.len());
    for j in &jets {
        let (cf, t) = jet_coefficients(dims, j)?;
        coefs.push(cf);
        newton.push(t);
        // d/dU of K U^p, with U^{p−1} taken as a rational power.
        power.push(-kappa * p * j.u.powf((pn - pd) as f64 / pd as f64));
    }
    let row_scale = (0..u.len()).map(|i| bg.row_scale::<f64>(i)).collect();
    let col_scale = (0..u.len()).map(|i| bg.factor(i)).collect();
    Ok(LinearizedOperator {
        dims,
        mesh,
        folded,
        coefs,
        power,
        newton,
        row_scale,
        col_scale,
    })
}

impl LinearizedOperator {
    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.folded.len()
    }

    /// Always false.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// `L[w]` node-wise.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.mesh.check_len(w)?;
        let big_w: Vec<f64> = w.iter().zip(&self.col_scale).map(|(x, s)| x * s).collect();
        let jets = self.mesh.jets(&big_w)?;
        Ok(jets
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let c = &self.coefs[i];
                let v = (c[slot::W] + self.power[i]) * j.u
                    + c[slot::T] * j.t
                    + c[slot::P] * j.p
                    + c[slot::TT] * j.tt
                    + c[slot::TP] * j.tp
                    + c[slot::PP] * j.pp
                    + c[slot::COT] * j.cot;
                v * self.row_scale[i]
            })
            .collect())
    }

    /// Sparse matrix of `L`, with identity rows on the first and last `t`-rows
    /// when `dirichlet` is set.
    pub fn assemble(&self, dirichlet: bool) -> BandedMatrix {
        let mesh = &self.mesh;
        let np = mesh.nphi();
        let nt = mesh.nt();
        let bw = mesh.order().boundary_window() * np;
        let mut mat = BandedMatrix::zeros(mesh.len(), bw, bw);
        let ts = mesh.t_stencil();
        let (t1, t2) = mesh.t_scales();
        let (p1, p2) = mesh.phi_scales();
        for i in 0..nt {
            for m in 0..np {
                let row = mesh.index(i, m);
                if dirichlet && (i == 0 || i == nt - 1) {
                    mat.add(row, row, 1.0);
                    continue;
                }
                let c = &self.coefs[row];
                let r = self.row_scale[row];
                let mut put = |col: usize, v: f64| mat.add(row, col, r * v * self.col_scale[col]);
                put(row, c[slot::W] + self.power[row]);
                for (ci, w) in ts.d1[i].weights(t1) {
                    put(mesh.index(ci, m), c[slot::T] * w);
                }
                for (ci, w) in ts.d2[i].weights(t2) {
                    put(mesh.index(ci, m), c[slot::TT] * w);
                }
                if let Some(ps) = mesh.phi_stencil() {
                    let pole = mesh.is_pole(m);
                    for (cm, w) in ps.d2[m].weights(p2) {
                        let coef = c[slot::PP] + if pole { c[slot::COT] } else { 0.0 };
                        put(mesh.index(i, cm), coef * w);
                    }
                    if !pole {
                        let cot = mesh.cot(m);
                        for (cm, w) in ps.d1[m].weights(p1) {
                            put(mesh.index(i, cm), (c[slot::P] + c[slot::COT] * cot) * w);
                        }
                        for (ci, wt) in ts.d1[i].weights(t1) {
                            for (cm, wp) in ps.d1[m].weights(p1) {
                                put(mesh.index(ci, cm), c[slot::TP] * wt * wp);
                            }
                        }
                    }
                }
            }
        }
        mat
    }

    /// Coefficients `(a₂, a₁, a₀)` of mode `j` at node `i` of a radial base,
    /// row scale included: `L_j w = a₂ (Cw)'' + a₁ (Cw)' + a₀ (Cw)`, `C = 1+b`.
    pub fn mode_coefficients(&self, j: usize, i: usize) -> (f64, f64, f64) {
        let c = &self.coefs[i];
        let lam = self.dims.lambda(j);
        let r = self.row_scale[i];
        // For radial bases −U T_ww Δ_θ acts on φ_j as +U T_ww λ_j.
        let a0 = c[slot::W] + self.power[i] - lam * c[slot::PP];
        (r * c[slot::TT], r * c[slot::T], r * a0)
    }

    /// Mode-`j` operator restricted to `t`-nodes `lo..=hi` of a radial base.
    pub fn mode_ode(&self, j: usize, lo: usize, hi: usize) -> Result<ModeOde> {
        if !self.mesh.is_radial() {
            return domain("mode operators need a radial base point");
        }
        let grid = self.mesh.t_grid().slice(lo, hi)?;
        let (mut a2, mut a1, mut a0) = (Vec::new(), Vec::new(), Vec::new());
        for i in lo..=hi {
            let (x, y, z) = self.mode_coefficients(j, i);
            a2.push(x);
            a1.push(y);
            a0.push(z);
        }
        let col = self.col_scale[lo..=hi].to_vec();
        ModeOde::new(
            j,
            self.dims.lambda(j),
            grid,
            self.mesh.order(),
            a2,
            a1,
            a0,
            col,
        )
    }
}

/// Central difference `(N(u + hw) − N(u − hw))/(2h)`.
pub fn fd_action(
    mesh: &Mesh,
    bg: &CylinderBackground,
    u: &[f64],
    w: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let up: Vec<f64> = u.iter().zip(w).map(|(a, b)| a + h * b).collect();
    let um: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - h * b).collect();
    let np = nonlinear_op(mesh, bg, &up)?;
    let nm = nonlinear_op(mesh, bg, &um)?;
    Ok(np
        .iter()
        .zip(&nm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect())
}

/// Two-point boundary-value operator `L w = a₂ (Cw)'' + a₁ (Cw)' + a₀ (Cw)`
/// for one spherical mode on a uniform grid, with Dirichlet end conditions.
#[derive(Debug, Clone)]
pub struct ModeOde {
    pub j: usize,
    /// `λ_j = j(j + n − 2)`.
    pub lambda: f64,
    pub grid: UniformGrid,
    pub stencil: LineStencil,
    pub a2: Vec<f64>,
    pub a1: Vec<f64>,
    pub a0: Vec<f64>,
    /// Column scale `C = 1 + b`.
    pub col: Vec<f64>,
}

impl ModeOde {
    /// Builds a mode operator, checking array lengths.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        j: usize,
        lambda: f64,
        grid: UniformGrid,
        order: crate::grid::StencilOrder,
        a2: Vec<f64>,
        a1: Vec<f64>,
        a0: Vec<f64>,
        col: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len;
        if [a2.len(), a1.len(), a0.len(), col.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::GridMismatch("mode coefficient length".into()));
        }
        if lambda < 0.0 {
            return domain("lambda_j must be non-negative");
        }
        let stencil = LineStencil::bounded(n, order)?;
        Ok(Self {
            j,
            lambda,
            grid,
            stencil,
            a2,
            a1,
            a0,
            col,
        })
    }

    /// Constant-coefficient model `w'' + p w' + q w`.
    pub fn constant(
        grid: UniformGrid,
        order: crate::grid::StencilOrder,
        p: f64,
        q: f64,
    ) -> Result<Self> {
        let n = grid.len;
        Self::new(
            0,
            0.0,
            grid,
            order,
            vec![1.0; n],
            vec![p; n],
            vec![q; n],
            vec![1.0; n],
        )
    }

    pub fn len(&self) -> usize {
        self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len == 0
    }

    /// Banded matrix with identity rows at both ends.
    pub fn matrix(&self) -> BandedMatrix {
        let n = self.len();
        let bw = self.stencil.d1[0].cols.len();
        let mut m = BandedMatrix::zeros(n, bw, bw);
        let h = self.grid.step;
        let (s1, s2) = (1.0 / h, 1.0 / (h * h));
        m.add(0, 0, 1.0);
        m.add(n - 1, n - 1, 1.0);
        for i in 1..n - 1 {
            m.add(i, i, self.a0[i] * self.col[i]);
            for (c, w) in self.stencil.d1[i].weights(s1) {
                m.add(i, c, self.a1[i] * w * self.col[c]);
            }
            for (c, w) in self.stencil.d2[i].weights(s2) {
                m.add(i, c, self.a2[i] * w * self.col[c]);
            }
        }
        m
    }

    /// Interior residual `L w − f` (end rows report `0`).
    pub fn residual(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        let mut m = self.matrix();
        m.set_identity_row(0);
        m.set_identity_row(self.len() - 1);
        let mut r = m.matvec(w);
        let n = self.len();
        r[0] = 0.0;
        r[n - 1] = 0.0;
        for i in 1..n - 1 {
            r[i] -= f[i];
        }
        r
    }

    /// Solves `L w = f` in the interior with `w = left`, `w = right` at the ends.
    pub fn solve(&self, f: &[f64], left: f64, right: f64) -> Result<Vec<f64>> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::GridMismatch("source length".into()));
        }
        let mut rhs = f.to_vec();
        rhs[0] = left;
        rhs[n - 1] = right;
        self.matrix().solve(&rhs)
    }

    /// `w'` at node `i` using the grid stencil.
    pub fn derivative_at(&self, w: &[f64], i: usize) -> f64 {
        self.stencil.d1[i].apply(w, 1.0 / self.grid.step)
    }
}

/// Limit model selecting an indicial root formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicialModel {
    /// Neck limit `μ_j = √((n−k)/(k(n−1)) λ_j + ((n−2k)/2k)²)`.
    Neck,
    /// Blow-up limit `ν_j = √((n−2k+1)/(n−1) λ_j + (n−2k)²/(2k))`.
    Interior,
}

impl FromStr for IndicialModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neck" => Ok(Self::Neck),
            "interior" => Ok(Self::Interior),
            other => domain(format!("unknown indicial model '{other}'")),
        }
    }
}

/// Indicial root for mode `j`.
pub fn indicial_roots(dims: Dimensions, j: usize, model: IndicialModel) -> f64 {
    let (n, k) = (dims.n as f64, dims.k as f64);
    let lam = dims.lambda(j);
    match model {
        IndicialModel::Neck => ((n - k) / (k * (n - 1.0)) * lam + dims.rate().powi(2)).sqrt(),
        IndicialModel::Interior => {
            ((n - 2.0 * k + 1.0) / (n - 1.0) * lam + (n - 2.0 * k).powi(2) / (2.0 * k)).sqrt()
        }
    }
}

/// Closed-form σ_k-part of the linearization at `v_Σ = cosh(t(n−2k)/2k)`:
/// `−C v_Σ [∂_t² + (n−k)/(k(n−1)) Δ_θ − ((n−2k)/2k)²]` with
/// `C = C(n−1,k−1)((n−2k)/4k)^{k−1}`. Returns the coefficients of
/// `v_Σ·w''`, `v_Σ·Δ_θ w` and `v_Σ·w`.
pub fn schwarzschild_linearization(dims: Dimensions) -> (f64, f64, f64) {
    let (n, k) = (dims.n as f64, dims.k as f64);
    let c = dims.neck_constant();
    (-c, -c * (n - k) / (k * (n - 1.0)), c * dims.rate().powi(2))
}

/// Scalar ODE `z'' = q(s) z` used for decay measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayOde {
    /// Mode `j` of the conjugated sphere operator:
    /// `q(s) = λ_j + ((n−2)/2)² − (n(n+2)/4) sech²(s − s₀)`, `λ_j = j(j+n−2)`.
    Conjugated { n: usize, j: usize, s0: f64 },
    /// Constant `q`.
    Constant { q: f64 },
}

impl DecayOde {
    /// `q(s)`.
    pub fn q(&self, s: f64) -> f64 {
        match *self {
            Self::Conjugated { n, j, s0 } => {
                let nf = n as f64;
                let lam = (j * (j + n - 2)) as f64;
                let sech = 1.0 / (s - s0).cosh();
                lam + (0.5 * (nf - 2.0)).powi(2) - 0.25 * nf * (nf + 2.0) * sech * sech
            }
            Self::Constant { q } => q,
        }
    }

    /// Potential `n(n+2)/4 · sech²(s − s₀)` (zero for constant models).
    pub fn potential(&self, s: f64) -> f64 {
        match *self {
            Self::Conjugated { n, s0, .. } => {
                let sech = 1.0 / (s - s0).cosh();
                0.25 * (n * (n + 2)) as f64 * sech * sech
            }
            Self::Constant { .. } => 0.0,
        }
    }

    /// Far-field exponent `√q(∞)`.
    pub fn far_field_exponent(&self) -> f64 {
        match *self {
            Self::Conjugated { n, j, .. } => {
                ((j * (j + n - 2)) as f64 + (0.5 * (n as f64 - 2.0)).powi(2)).sqrt()
            }
            Self::Constant { q } => q.sqrt(),
        }
    }
}

/// Conjugated-operator mode family for `j = 0..=jmax`.
pub fn conjugated_form(dims: Dimensions, s0: f64, jmax: usize) -> Vec<DecayOde> {
    (0..=jmax)
        .map(|j| DecayOde::Conjugated { n: dims.n, j, s0 })
        .collect()
}

/// Outcome of [`measure_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayMeasurement {
    /// Fitted slope of `log |z|` on the trailing half of the window.
    pub slope: f64,
    pub fit: LineFit,
}

/// Measures the decay rate of the bounded branch of `z'' = q z` on `window`.
///
/// The bounded branch is selected by shooting from beyond the window with the
/// far-field decaying data `z' = −√q(∞) z` and integrating backwards with
/// classical RK4, which is the stable direction for that branch.
pub fn measure_decay(ode: &DecayOde, window: (f64, f64)) -> Result<DecayMeasurement> {
    let (s_a, s_b) = window;
    if !(s_b > s_a) {
        return domain("decay window must be increasing");
    }
    let kappa = ode.far_field_exponent();
    if !(kappa > 0.0) {
        return domain("decay needs a positive far-field exponent");
    }
    let s_far = s_b + 10.0;
    let h = 1e-3;
    let steps = ((s_far - s_a) / h).round() as usize;
    let h = (s_far - s_a) / steps as f64;
    // State (z, z') with a running log-scale to avoid overflow.
    let mut z = 1.0_f64;
    let mut dz = -kappa;
    let mut log_scale = 0.0_f64;
    let mid = 0.5 * (s_a + s_b);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let f = |s: f64, z: f64, dz: f64| (dz, ode.q(s) * z);
    for step in 0..=steps {
        let s = s_far - step as f64 * h;
        if s <= s_b + 1e-12 && s >= mid - 1e-12 && step % 10 == 0 {
            if z == 0.0 {
                return Err(crate::error::Error::FitDegenerate(
                    "solution vanished in window".into(),
                ));
            }
            xs.push(s);
            ys.push(z.abs().ln() + log_scale);
        }
        if step == steps {
            break;
        }
        let hh = -h;
        let (k1z, k1d) = f(s, z, dz);
        let (k2z, k2d) = f(s + 0.5 * hh, z + 0.5 * hh * k1z, dz + 0.5 * hh * k1d);
        let (k3z, k3d) = f(s + 0.5 * hh, z + 0.5 * hh * k2z, dz + 0.5 * hh * k2d);
        let (k4z, k4d) = f(s + hh, z + hh * k3z, dz + hh * k3d);
        z += hh / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        dz += hh / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        let mag = z.abs().max(dz.abs());
        if mag > 1e100 {
            z /= mag;
            dz /= mag;
            log_scale += mag.ln();
        }
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(crate::error::Error::FitDegenerate(
            "solution vanished to round-off".into(),
        ));
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(DecayMeasurement {
        slope: fit.slope,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicial_root_values() {
        let d = Dimensions::new(8, 3).unwrap();
        assert!((indicial_roots(d, 0, IndicialModel::Neck) - 1.0 / 3.0).abs() < 1e-15);
        assert!((indicial_roots(d, 1, IndicialModel::Neck) - 4.0 / 3.0).abs() < 1e-15);
        assert!(
            (indicial_roots(d, 0, IndicialModel::Interior) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15
        );
        assert!("sideways".parse::<IndicialModel>().is_err());
        assert_eq!(
            "neck".parse::<IndicialModel>().unwrap(),
            IndicialModel::Neck
        );
    }

    #[test]
    fn conjugated_potential_and_exponents() {
        let d = Dimensions::new(8, 3).unwrap();
        let fam = conjugated_form(d, 0.0, 2);
        assert_eq!(fam[0].potential(0.0), 20.0);
        assert_eq!(fam[0].far_field_exponent(), 3.0);
        assert_eq!(fam[1].far_field_exponent(), 4.0);
        assert_eq!(fam[2].far_field_exponent(), 5.0);
    }

    #[test]
    fn constant_decay_rate() {
        let m = measure_decay(&DecayOde::Constant { q: 9.0 }, (5.0, 15.0)).unwrap();
        assert!((m.slope + 3.0).abs() < 1e-3, "slope {}", m.slope);
    }
}
