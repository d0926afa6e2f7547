//! The σ_k-Schwarzschild family `v(t) = √h₀ cosh(((n−2k)/2k) t − c)`.
//!
//! These profiles solve `σ_k(B_{g_v}) = 0` on the whole cylinder. Along them
//! the quantity `h = v² − (2k/(n−2k))² v̇²` is conserved, and for radial `v`
//! the σ_k equation factors as
//! `σ_k(B) = C(n−1,k−1) (h/(2a))^{k−1} v (v/a² − v̈)` with `a = 2k/(n − 2k)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{Mesh, RadialProfile, ZonalField};
use crate::schouten::{assemble_b, CylinderBackground};
use crate::symfun::{binomial, Dimensions};

/// Parameters `(h₀, c)` of a Schwarzschild profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchwarzschildParams {
    pub dims: Dimensions,
    pub h0: f64,
    pub c: f64,
}

impl SchwarzschildParams {
    /// Validates `h₀ > 0`.
    pub fn new(dims: Dimensions, h0: f64, c: f64) -> Result<Self> {
        if !(h0 > 0.0) || !h0.is_finite() || !c.is_finite() {
            return domain(format!("need h0 > 0 and finite c (h0 = {h0}, c = {c})"));
        }
        Ok(Self { dims, h0, c })
    }

    /// `v(t)`.
    pub fn value(&self, t: f64) -> f64 {
        self.h0.sqrt() * (self.dims.rate() * t - self.c).cosh()
    }

    /// `v̇(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let r = self.dims.rate();
        self.h0.sqrt() * r * (r * t - self.c).sinh()
    }

    /// `v̈(t)`.
    pub fn second_derivative(&self, t: f64) -> f64 {
        self.dims.rate().powi(2) * self.value(t)
    }

    /// Location `c·2k/(n − 2k)` of the throat.
    pub fn throat(&self) -> f64 {
        self.c * self.dims.a()
    }
}

/// Samples the profile on a radial mesh.
pub fn profile(params: &SchwarzschildParams, mesh: Arc<Mesh>) -> Result<RadialProfile> {
    if !mesh.is_radial() {
        return domain("Schwarzschild profiles live on radial meshes");
    }
    Ok(ZonalField::from_fn(mesh, |t, _| params.value(t)))
}

/// `h = v² − a² v̇²` from values and first derivatives.
pub fn h_pointwise(dims: Dimensions, v: f64, vdot: f64) -> f64 {
    v * v - dims.a().powi(2) * vdot * vdot
}

/// Grid values of `h` using the mesh derivative stencils.
pub fn h_invariant(v: &RadialProfile, dims: Dimensions) -> Result<Vec<f64>> {
    if v.values.iter().any(|&x| !(x > 0.0)) {
        return domain("profile must be positive");
    }
    let jets = v.jets()?;
    Ok(jets.iter().map(|j| h_pointwise(dims, j.u, j.t)).collect())
}

/// Factorized radial form `C(n−1,k−1)(h/(2a))^{k−1} v (v/a² − v̈)`.
pub fn factorized_sigma(dims: Dimensions, v: f64, vdot: f64, vddot: f64) -> f64 {
    let a = dims.a();
    let h = h_pointwise(dims, v, vdot);
    binomial(dims.n - 1, dims.k - 1)
        * (h / (2.0 * a)).powi(dims.k as i32 - 1)
        * v
        * (v / (a * a) - vddot)
}

/// Outcome of [`verify_flat`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    /// `max |σ_k(B_{g_v})|` over interior nodes, assembled with grid stencils.
    pub direct: f64,
    /// `max |factorized form|` with analytic derivatives.
    pub factorized: f64,
    /// `max |direct − factorized|` when the factorized form uses grid derivatives.
    pub route_gap: f64,
    /// `max |h − h₀|` with analytic derivatives.
    pub h_drift: f64,
}

/// Checks that the profile is σ_k-flat by two independent routes.
pub fn verify_flat(params: &SchwarzschildParams, mesh: Arc<Mesh>) -> Result<FlatReport> {
    let dims = params.dims;
    let v = profile(params, mesh.clone())?;
    verify_profile(dims, &v, |t| {
        (
            params.value(t),
            params.derivative(t),
            params.second_derivative(t),
        )
    })
    .map(|mut r| {
        r.h_drift = (0..mesh.nt())
            .map(|i| {
                let t = mesh.t(i);
                (h_pointwise(dims, params.value(t), params.derivative(t)) - params.h0).abs()
            })
            .fold(0.0, f64::max);
        r
    })
}

/// Evaluates the flatness residuals for an arbitrary radial profile whose
/// exact derivatives are supplied by `exact(t) = (v, v̇, v̈)`.
pub fn verify_profile(
    dims: Dimensions,
    v: &RadialProfile,
    exact: impl Fn(f64) -> (f64, f64, f64),
) -> Result<FlatReport> {
    let mesh = &v.mesh;
    let bg = CylinderBackground::flat(dims);
    let b = assemble_b(mesh, &bg, &v.values)?;
    let jets = v.jets()?;
    let (mut direct, mut fact, mut gap, mut drift) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let h_ref = {
        let (v0, d0, _) = exact(mesh.t(0));
        h_pointwise(dims, v0, d0)
    };
    for i in 1..mesh.nt() - 1 {
        let s = b[i].sigma(dims.n, dims.k)?;
        let (ve, de, dde) = exact(mesh.t(i));
        let f_exact = factorized_sigma(dims, ve, de, dde);
        let f_grid = factorized_sigma(dims, jets[i].u, jets[i].t, jets[i].tt);
        direct = direct.max(s.abs());
        fact = fact.max(f_exact.abs());
        gap = gap.max((s - f_grid).abs());
        drift = drift.max((h_pointwise(dims, ve, de) - h_ref).abs());
    }
    Ok(FlatReport {
        direct,
        factorized: fact,
        route_gap: gap,
        h_drift: drift,
    })
}

/// `u(r) = r^{−(n−2k)/(2k)} v(−log r)` at the nodes with `t ≥ 0`, as `(r, u)`.
pub fn radial_correspondence(v: &RadialProfile, dims: Dimensions) -> Result<Vec<(f64, f64)>> {
    if !v.mesh.is_radial() {
        return domain("radial correspondence needs a radial profile");
    }
    let rate = dims.rate();
    Ok((0..v.mesh.nt())
        .filter(|&i| v.mesh.t(i) >= 0.0)
        .map(|i| {
            let t = v.mesh.t(i);
            let r = (-t).exp();
            (r, r.powf(-rate) * v.values[i])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::StencilOrder;

    #[test]
    fn closed_form_values() {
        let d = Dimensions::new(8, 3).unwrap();
        let p = SchwarzschildParams::new(d, 1.0, 0.0).unwrap();
        assert_eq!(p.value(0.0), 1.0);
        assert_eq!(p.derivative(0.0), 0.0);
        assert!((p.value(3.0 * 2f64.ln()) - 1.25).abs() < 1e-14);
        let p4 = SchwarzschildParams::new(d, 4.0, 0.0).unwrap();
        assert_eq!(p4.value(0.0), 2.0);
        let p1 = SchwarzschildParams::new(d, 1.0, 1.0).unwrap();
        assert!((p1.throat() - 3.0).abs() < 1e-15);
        assert!(SchwarzschildParams::new(d, 0.0, 0.0).is_err());
    }

    #[test]
    fn correspondence_of_constant_profile() {
        let d = Dimensions::new(8, 3).unwrap();
        let mesh = Arc::new(Mesh::radial_on(0.0, 2f64.ln(), 11, StencilOrder::Fourth).unwrap());
        let v = ZonalField::from_fn(mesh, |_, _| 1.0);
        let pairs = radial_correspondence(&v, d).unwrap();
        let (r, u) = *pairs.last().unwrap();
        assert!((r - 0.5).abs() < 1e-14);
        assert!((u - 2f64.powf(1.0 / 3.0)).abs() < 1e-13);
        assert_eq!(pairs[0], (1.0, 1.0));
    }
}
