//! The endomorphism `B_{g_u}` and the operator `N` on the cylinder.
//!
//! For `g_u = u^{4k/(n−2k)} g_cyl` and `a = 2k/(n − 2k)`,
//! `B = (1/a)[u² A_cyl − a u ∇²u + c du⊗du − (a²/2)|du|² g_cyl]` with
//! `c = a n/(n − 2k)`, where `A_cyl = −½dt² + ½g_{S^{n−1}}`. A background
//! `ḡ = (1+b)^{4k/(n−2k)} g_cyl` is folded in through conformal equivariance:
//! `N_ḡ(u) = (1+b)^{−p} N_cyl((1+b)u)` with `p = 2kn/(n − 2k)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{Jet, Mesh};
use crate::scalar::Real;
use crate::symfun::{binomial, ArrowEndo, Dimensions, SpectrumEndo};

/// Spectrum of `g_cyl⁻¹ A_cyl`: `{−1/2 ×1, 1/2 ×(n−1)}`.
pub fn schouten_cylinder(dims: Dimensions) -> SpectrumEndo {
    SpectrumEndo::new(vec![(-0.5, 1), (0.5, dims.n - 1)]).expect("valid blocks")
}

/// Closed form `σ_j(g_cyl⁻¹A_cyl) = 2^{−j} C(n,j)(n − 2j)/n`.
pub fn cylinder_sigma_closed_form(n: usize, j: usize) -> f64 {
    0.5_f64.powi(j as i32) * binomial(n, j) * (n as f64 - 2.0 * j as f64) / n as f64
}

/// Conformal background `ḡ = (1+b)^{4k/(n−2k)} g_cyl` on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderBackground {
    pub dims: Dimensions,
    /// Node values of `b`; `None` means `b ≡ 0`.
    pub b: Option<Vec<f64>>,
}

impl CylinderBackground {
    /// The flat cylinder, `b ≡ 0`.
    pub fn flat(dims: Dimensions) -> Self {
        Self { dims, b: None }
    }

    /// Background with node values `b`, requiring `1 + b > 0`.
    pub fn new(dims: Dimensions, b: Vec<f64>) -> Result<Self> {
        if let Some(i) = b.iter().position(|&x| !(1.0 + x > 0.0)) {
            return domain(format!("1 + b must be positive (node {i}: b = {})", b[i]));
        }
        Ok(Self { dims, b: Some(b) })
    }

    /// `1 + b` at node `i`.
    pub fn factor(&self, i: usize) -> f64 {
        self.b.as_ref().map_or(1.0, |b| 1.0 + b[i])
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if let Some(b) = &self.b {
            if b.len() != mesh.len() {
                return Err(Error::GridMismatch(format!(
                    "background has {} values, mesh has {} nodes",
                    b.len(),
                    mesh.len()
                )));
            }
        }
        Ok(())
    }

    /// `U = (1 + b)u`, checking positivity.
    pub fn fold<T: Real>(&self, mesh: &Mesh, u: &[T]) -> Result<Vec<T>> {
        mesh.check_len(u)?;
        self.check(mesh)?;
        let out: Vec<T> = u
            .iter()
            .enumerate()
            .map(|(i, &x)| match &self.b {
                None => x,
                Some(b) => (T::one() + T::from_f64(b[i])) * x,
            })
            .collect();
        if let Some(i) = out.iter().position(|x| !(x.to_f64() > 0.0)) {
            return domain(format!("conformal factor not positive at node {i}"));
        }
        Ok(out)
    }

    /// `(1 + b)^{−p}` at node `i`.
    pub fn row_scale<T: Real>(&self, i: usize) -> T {
        match &self.b {
            None => T::one(),
            Some(b) => {
                let (pn, pd) = self.dims.p_ratio();
                (T::one() + T::from_f64(b[i])).pow_ratio(-pn, pd)
            }
        }
    }
}

/// `B` at one node from the jet of the folded factor `U`.
pub fn endo_from_jet<T: Real>(dims: Dimensions, j: &Jet<T>) -> ArrowEndo<T> {
    let a = T::from_f64(dims.a());
    let c = T::from_f64(dims.c());
    let half = T::from_f64(0.5);
    let grad2 = j.t * j.t + j.p * j.p;
    let iso = half * a * a * grad2;
    let u2h = half * j.u * j.u;
    let inv_a = T::one() / a;
    ArrowEndo::new(
        inv_a * (-u2h - a * j.u * j.tt + c * j.t * j.t - iso),
        inv_a * (-a * j.u * j.tp + c * j.t * j.p),
        inv_a * (u2h - a * j.u * j.pp + c * j.p * j.p - iso),
        inv_a * (u2h - a * j.u * j.cot - iso),
    )
}

/// Node-wise `B_{g_u}` for `u` against the background `bg`.
pub fn assemble_b<T: Real>(
    mesh: &Mesh,
    bg: &CylinderBackground,
    u: &[T],
) -> Result<Vec<ArrowEndo<T>>> {
    let big_u = bg.fold(mesh, u)?;
    let jets = mesh.jets(&big_u)?;
    Ok(jets.iter().map(|j| endo_from_jet(bg.dims, j)).collect())
}

/// `N_ḡ(u) = σ_k(B) − K u^p` node-wise, background folded in.
pub fn nonlinear_op<T: Real>(mesh: &Mesh, bg: &CylinderBackground, u: &[T]) -> Result<Vec<T>> {
    let dims = bg.dims;
    let big_u = bg.fold(mesh, u)?;
    let jets = mesh.jets(&big_u)?;
    let kappa = T::from_f64(dims.kappa());
    let (pn, pd) = dims.p_ratio();
    Ok(jets
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let b = endo_from_jet(dims, j);
            let s = b.sigmas(dims.n, dims.k)[dims.k];
            let raw = s - kappa * j.u.pow_ratio(pn, pd);
            raw * bg.row_scale::<T>(i)
        })
        .collect())
}

/// `σ_j(g⁻¹A_g)` for `g = U^{4k/(n−2k)} g_cyl`, from `B` and `U`.
pub fn geometric_sigma<T: Real>(dims: Dimensions, b: &ArrowEndo<T>, big_u: T, j: usize) -> T {
    let s = b.sigmas(dims.n, j)[j];
    let a = T::from_f64(dims.a());
    // B = (1/a) U^{2n/(n−2k)} g⁻¹A, so σ_j(g⁻¹A) = a^j σ_j(B) U^{−2jn/(n−2k)}.
    let w = big_u.pow_ratio(-(2 * dims.n as i64), (dims.n - 2 * dims.k) as i64);
    a.powi(j as i32) * s * w.powi(j as i32)
}

/// Node-wise `σ_j(g_u⁻¹A_{g_u})` for `j = 1..=jmax`; entry `[j−1][node]`.
pub fn geometric_sigmas<T: Real>(
    mesh: &Mesh,
    bg: &CylinderBackground,
    u: &[T],
    jmax: usize,
) -> Result<Vec<Vec<T>>> {
    let big_u = bg.fold(mesh, u)?;
    let jets = mesh.jets(&big_u)?;
    let dims = bg.dims;
    let mut out = vec![Vec::with_capacity(u.len()); jmax];
    for jet in &jets {
        let b = endo_from_jet(dims, jet);
        for (j, col) in out.iter_mut().enumerate() {
            col.push(geometric_sigma(dims, &b, jet.u, j + 1));
        }
    }
    Ok(out)
}

/// Max over interior `t`-rows of `|N_ḡ(u) − (v/u)^{−p} N_g(v)|` with
/// `ḡ = (v/u)^{4k/(n−2k)} g` and `g = (1+b)^{4k/(n−2k)} g_cyl`.
pub fn equivariance_residual(
    mesh: &Mesh,
    g: &CylinderBackground,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    mesh.check_len(u)?;
    mesh.check_len(v)?;
    if u.iter().chain(v).any(|&x| !(x > 0.0)) {
        return domain("u and v must be positive");
    }
    let dims = g.dims;
    let gbar_b: Vec<f64> = (0..u.len())
        .map(|i| g.factor(i) * v[i] / u[i] - 1.0)
        .collect();
    let gbar = CylinderBackground::new(dims, gbar_b)?;
    let lhs = nonlinear_op(mesh, &gbar, u)?;
    let rhs = nonlinear_op(mesh, g, v)?;
    let p = dims.p();
    let np = mesh.nphi();
    let mut worst = 0.0_f64;
    for i in 1..mesh.nt() - 1 {
        for m in 0..np {
            let idx = i * np + m;
            let r = lhs[idx] - (v[idx] / u[idx]).powf(-p) * rhs[idx];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::StencilOrder;
    use crate::symfun::sigma;

    fn d83() -> Dimensions {
        Dimensions::new(8, 3).unwrap()
    }

    #[test]
    fn cylinder_sigma_values() {
        let s = schouten_cylinder(d83());
        assert!((sigma(&s, 1).unwrap() - 3.0).abs() < 1e-14);
        assert!((sigma(&s, 3).unwrap() - 1.75).abs() < 1e-14);
        assert_eq!(cylinder_sigma_closed_form(4, 2), 0.0);
    }

    #[test]
    fn constant_factor_gives_scaled_cylinder() {
        let mesh = Mesh::radial_on(-1.0, 1.0, 21, StencilOrder::Fourth).unwrap();
        let bg = CylinderBackground::flat(d83());
        let u = vec![1.0; mesh.len()];
        let b = assemble_b(&mesh, &bg, &u).unwrap();
        for e in &b {
            assert!((e.tt + 1.0 / 6.0).abs() < 1e-14);
            assert!((e.pp - 1.0 / 6.0).abs() < 1e-14);
            assert!((e.ww - 1.0 / 6.0).abs() < 1e-14);
            assert_eq!(e.tp, 0.0);
        }
        let n = nonlinear_op(&mesh, &bg, &u).unwrap();
        assert!(n.iter().all(|x| (x + 7.0 / 36.0).abs() < 1e-14));
    }

    #[test]
    fn non_positive_factor_is_rejected() {
        let mesh = Mesh::radial_on(-1.0, 1.0, 21, StencilOrder::Fourth).unwrap();
        let bg = CylinderBackground::flat(d83());
        let mut u = vec![1.0; mesh.len()];
        u[3] = 0.0;
        assert!(nonlinear_op(&mesh, &bg, &u).is_err());
        assert!(CylinderBackground::new(d83(), vec![-1.0; 3]).is_err());
        assert!(nonlinear_op(&mesh, &bg, &u[..5]).is_err());
    }
}
