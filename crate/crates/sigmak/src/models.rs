//! Closed-form product-metric models.
//!
//! A [`ProductModel`] is a Riemannian product of round spheres, round real
//! projective spaces and flat tori. Its Schouten tensor is block constant, so
//! the linearization of the σ_k-Yamabe operator at `u ≡ 1` is a combination of
//! factor Laplacians plus a constant, and non-degeneracy reduces to a search
//! over sums of factor eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::symfun::{binomial, newton_eigenvalue, sigma, Dimensions, SpectrumEndo};

/// Geometry of one product factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    /// Round sphere `S^m` of the given radius.
    RoundSphere,
    /// Round `ℝP^m`: sphere geometry, even spherical harmonics only.
    ProjectiveSpace,
    /// Flat torus `ℝ^m/(rℤ)^m`.
    FlatTorus,
}

/// One factor of a product metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
    pub radius: f64,
}

impl Factor {
    /// Eigenvalue of the Ricci endomorphism on this factor.
    pub fn ricci(&self) -> f64 {
        match self.kind {
            FactorKind::RoundSphere | FactorKind::ProjectiveSpace => {
                (self.dim as f64 - 1.0) / (self.radius * self.radius)
            }
            FactorKind::FlatTorus => 0.0,
        }
    }
}

/// Riemannian product of [`Factor`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductModel {
    factors: Vec<Factor>,
}

impl ProductModel {
    /// Validates positive dimensions and radii and total dimension `n ≥ 3`.
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return domain("a product model needs at least one factor");
        }
        for f in &factors {
            if f.dim == 0 {
                return domain("factor dimensions must be positive");
            }
            if !(f.radius > 0.0) || !f.radius.is_finite() {
                return domain(format!("factor radius {} must be positive", f.radius));
            }
        }
        let n: usize = factors.iter().map(|f| f.dim).sum();
        if n < 3 {
            return domain(format!("total dimension {n} must be at least 3"));
        }
        Ok(Self { factors })
    }

    /// Unit round sphere `S^n`.
    pub fn round_sphere(n: usize) -> Result<Self> {
        Self::new(vec![Factor {
            kind: FactorKind::RoundSphere,
            dim: n,
            radius: 1.0,
        }])
    }

    /// Unit round `ℝP^n`.
    pub fn projective_space(n: usize) -> Result<Self> {
        Self::new(vec![Factor {
            kind: FactorKind::ProjectiveSpace,
            dim: n,
            radius: 1.0,
        }])
    }

    /// `S⁶ × T²` with unit factors.
    pub fn s6_t2() -> Self {
        Self {
            factors: vec![
                Factor {
                    kind: FactorKind::RoundSphere,
                    dim: 6,
                    radius: 1.0,
                },
                Factor {
                    kind: FactorKind::FlatTorus,
                    dim: 2,
                    radius: 1.0,
                },
            ],
        }
    }

    /// Cylinder `ℝ × S^{n−1}`, modelled by a flat circle factor.
    pub fn cylinder(n: usize) -> Result<Self> {
        Self::new(vec![
            Factor {
                kind: FactorKind::FlatTorus,
                dim: 1,
                radius: 1.0,
            },
            Factor {
                kind: FactorKind::RoundSphere,
                dim: n - 1,
                radius: 1.0,
            },
        ])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Total dimension.
    pub fn n(&self) -> usize {
        self.factors.iter().map(|f| f.dim).sum()
    }

    /// The metric `c² g`, realized by scaling every radius by `c`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.factors
                .iter()
                .map(|f| Factor {
                    radius: f.radius * c,
                    ..*f
                })
                .collect(),
        )
    }

    /// Scalar curvature.
    pub fn scalar_curvature(&self) -> f64 {
        self.factors.iter().map(|f| f.dim as f64 * f.ricci()).sum()
    }
}

/// Eigenvalues of `g⁻¹A_g`, one block per factor in factor order.
pub fn product_schouten(model: &ProductModel) -> Result<SpectrumEndo> {
    let n = model.n() as f64;
    let r = model.scalar_curvature();
    let blocks = model
        .factors
        .iter()
        .map(|f| ((f.ricci() - r / (2.0 * (n - 1.0))) / (n - 2.0), f.dim))
        .collect();
    SpectrumEndo::new(blocks)
}

/// `σ_j(g⁻¹A_g)` for `j = 1..=⌊(n−1)/2⌋` on the cylinder, from the product
/// model, paired with `2^{−j}C(n,j)(n−2j)/n`.
pub fn cylinder_sigma_table(n: usize) -> Result<Vec<(usize, f64, f64)>> {
    let spec = product_schouten(&ProductModel::cylinder(n)?)?;
    (1..=(n - 1) / 2)
        .map(|j| {
            let closed =
                0.5_f64.powi(j as i32) * binomial(n, j) * (n as f64 - 2.0 * j as f64) / n as f64;
            Ok((j, sigma(&spec, j)?, closed))
        })
        .collect()
}

/// Laplacian coefficient of one factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCoefficient {
    pub factor: Factor,
    /// Eigenvalue of `T_{k−1}(B)` on the factor block.
    pub newton: f64,
    /// Coefficient of `−Δ_{g_i}` for the factor's own metric `g_i`.
    pub laplacian: f64,
}

/// `𝕃(1)w = Σ_i L_i (−Δ_{g_i}) w + z w` after normalizing `σ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousLinearization {
    pub k: usize,
    /// `c²` such that `σ_k((c²g)⁻¹A) = 2^{−k}C(n,k)`.
    pub metric_scale: f64,
    /// Spectrum of `B = (n−2k)/(2k)·(c²g)⁻¹A`.
    pub b: SpectrumEndo,
    pub blocks: Vec<BlockCoefficient>,
    /// `z = 2kσ_k(B) − C(n,k)((n−2k)/4k)^k·2kn/(n−2k)`.
    pub zero_order: f64,
}

impl HomogeneousLinearization {
    /// Ratio of the first to the last Laplacian coefficient.
    pub fn coefficient_ratio(&self) -> f64 {
        self.blocks[0].laplacian / self.blocks[self.blocks.len() - 1].laplacian
    }

    /// Constant `−z/L_last` of the form `Δ_last + … + const = 0`.
    pub fn unit_constant(&self) -> f64 {
        -self.zero_order / self.blocks[self.blocks.len() - 1].laplacian
    }

    /// Copy with the zero-order term chosen so that [`Self::unit_constant`]
    /// equals `c`.
    pub fn with_unit_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.zero_order = -c * self.blocks[self.blocks.len() - 1].laplacian;
        out
    }
}

/// Linearization at `u ≡ 1` of the σ_k-Yamabe operator of a product metric.
///
/// Errors when `σ_k(g⁻¹A) ≤ 0`, since no rescaling reaches the target.
pub fn homogeneous_linearization(
    model: &ProductModel,
    k: usize,
) -> Result<HomogeneousLinearization> {
    let n = model.n();
    let dims = Dimensions::new(n, k)?;
    let a_spec = product_schouten(model)?;
    let s = sigma(&a_spec, k)?;
    if !(s > 0.0) {
        return domain(format!("σ_{k}(g⁻¹A) = {s} is not positive"));
    }
    let metric_scale = (s / dims.sphere_sigma()).powf(1.0 / k as f64);
    let b = a_spec.scaled(1.0 / (metric_scale * dims.a()));
    let blocks = (0..b.blocks().len())
        .map(|i| {
            let newton = newton_eigenvalue(&b, i, k - 1)?;
            Ok(BlockCoefficient {
                factor: model.factors[i],
                newton,
                laplacian: newton / metric_scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let zero_order = 2.0 * k as f64 * sigma(&b, k)? - dims.kappa() * dims.p();
    Ok(HomogeneousLinearization {
        k,
        metric_scale,
        b,
        blocks,
        zero_order,
    })
}

/// Torus spectrum used by [`nondegeneracy_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TorusSpectrum {
    /// `{4π²i/r² : i ∈ ℕ}`.
    #[default]
    Integers,
    /// `{4π²|v|²/r² : v ∈ ℤ^m}`.
    Lattice,
}

/// Eigenvalues of `−Δ` on a factor, labelled by a mode index.
pub fn factor_spectrum(f: &Factor, torus: TorusSpectrum, cutoff: usize) -> Vec<(usize, f64)> {
    let r2 = f.radius * f.radius;
    let m = f.dim as f64;
    match f.kind {
        FactorKind::RoundSphere => (0..=cutoff)
            .map(|i| (i, i as f64 * (i as f64 + m - 1.0) / r2))
            .collect(),
        FactorKind::ProjectiveSpace => (0..=cutoff)
            .step_by(2)
            .map(|i| (i, i as f64 * (i as f64 + m - 1.0) / r2))
            .collect(),
        FactorKind::FlatTorus => {
            let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
            let norms: Vec<usize> = match torus {
                TorusSpectrum::Integers => (0..=cutoff).collect(),
                TorusSpectrum::Lattice => lattice_norms(f.dim, cutoff),
            };
            norms
                .into_iter()
                .map(|i| (i, four_pi2 * i as f64 / r2))
                .collect()
        }
    }
}

/// Integers `≤ cutoff` that are sums of `d` squares.
fn lattice_norms(d: usize, cutoff: usize) -> Vec<usize> {
    let mut reach = vec![false; cutoff + 1];
    reach[0] = true;
    for _ in 0..d {
        let mut next = vec![false; cutoff + 1];
        for (s, &ok) in reach.iter().enumerate() {
            if !ok {
                continue;
            }
            let mut q = 0;
            while s + q * q <= cutoff {
                next[s + q * q] = true;
                q += 1;
            }
        }
        reach = next;
    }
    reach
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(|(i, _)| i)
        .collect()
}

/// One row of a non-degeneracy scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Mode labels of all factors but the last.
    pub modes: Vec<usize>,
    /// Eigenvalue the last factor would need for a kernel element.
    pub required: f64,
    /// Closest eigenvalue of the last factor.
    pub nearest: f64,
    pub gap: f64,
}

/// Outcome of [`nondegeneracy_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub degenerate: bool,
    pub rows: Vec<ScanRow>,
}

/// Tolerance for an exact kernel hit.
pub const KERNEL_TOLERANCE: f64 = 1e-9;

/// Searches for `Σ_i L_i λ_i + z = 0` over factor eigenvalues up to `cutoff`.
pub fn nondegeneracy_scan(
    lin: &HomogeneousLinearization,
    torus: TorusSpectrum,
    cutoff: usize,
) -> ScanReport {
    let m = lin.blocks.len();
    let spectra: Vec<Vec<(usize, f64)>> = lin
        .blocks
        .iter()
        .map(|b| factor_spectrum(&b.factor, torus, cutoff))
        .collect();
    let last = &lin.blocks[m - 1];
    let mut rows = Vec::new();
    let mut idx = vec![0usize; m - 1];
    loop {
        let partial: f64 = (0..m - 1)
            .map(|i| lin.blocks[i].laplacian * spectra[i][idx[i]].1)
            .sum();
        let required = -(lin.zero_order + partial) / last.laplacian;
        let nearest = spectra[m - 1]
            .iter()
            .map(|&(_, v)| v)
            .min_by(|a, b| (a - required).abs().total_cmp(&(b - required).abs()))
            .unwrap_or(f64::NAN);
        let modes = (0..m - 1).map(|i| spectra[i][idx[i]].0).collect();
        rows.push(ScanRow {
            modes,
            required,
            nearest,
            gap: (required - nearest).abs(),
        });
        let mut carry = 0;
        while carry < m - 1 {
            idx[carry] += 1;
            if idx[carry] < spectra[carry].len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == m - 1 {
            break;
        }
    }
    let degenerate = rows
        .iter()
        .any(|r| r.gap <= KERNEL_TOLERANCE * r.required.abs().max(1.0));
    ScanReport { degenerate, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_norms_of_two_squares() {
        assert_eq!(lattice_norms(2, 10), vec![0, 1, 2, 4, 5, 8, 9, 10]);
    }

    #[test]
    fn rescaling_validates_radius() {
        assert!(ProductModel::s6_t2().rescaled(0.0).is_err());
        assert!(ProductModel::new(vec![Factor {
            kind: FactorKind::FlatTorus,
            dim: 2,
            radius: 1.0
        }])
        .is_err());
    }
}
