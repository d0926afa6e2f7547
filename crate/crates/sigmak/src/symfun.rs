//! Elementary symmetric functions of symmetric endomorphisms.
//!
//! Two carriers are supported. [`SpectrumEndo`] stores eigenvalues with
//! multiplicities. [`ArrowEndo`] stores the block structure of `B_{g_u}` for a
//! zonal conformal factor: a symmetric 2×2 block in the `(t, φ)` directions and
//! an isotropic entry of multiplicity `n − 2` on the remaining angular
//! directions. σ_k is obtained from the coefficients of the generating
//! polynomial `∏(1 + λ_i x)` in both cases, so no eigen-decomposition is needed.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;

/// Binomial coefficient `C(n, k)` as `f64` (zero when `k > n`).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Ambient dimension `n` and Hessian order `k` with `2 ≤ 2k < n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub k: usize,
}

impl Dimensions {
    /// Validates `3 ≤ n ≤ 12` and `2 ≤ 2k < n`.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if !(3..=12).contains(&n) {
            return domain(format!("n = {n} outside 3..=12"));
        }
        if k < 1 || 2 * k >= n {
            return domain(format!("k = {k} violates 2 <= 2k < n = {n}"));
        }
        Ok(Self { n, k })
    }

    /// `a = 2k/(n − 2k)`.
    pub fn a(&self) -> f64 {
        (2 * self.k) as f64 / (self.n - 2 * self.k) as f64
    }

    /// `1/a = (n − 2k)/(2k)`, the Schwarzschild rate.
    pub fn rate(&self) -> f64 {
        (self.n - 2 * self.k) as f64 / (2 * self.k) as f64
    }

    /// The rate `(n − 2k)/(2k)` as a reduced fraction.
    pub fn rate_ratio(&self) -> (i64, i64) {
        reduce((self.n - 2 * self.k) as i64, (2 * self.k) as i64)
    }

    /// `c = a n/(n − 2k)`, the coefficient of `du ⊗ du` in `B`.
    pub fn c(&self) -> f64 {
        self.a() * self.n as f64 / (self.n - 2 * self.k) as f64
    }

    /// The critical exponent `p = 2kn/(n − 2k)` as a reduced fraction.
    pub fn p_ratio(&self) -> (i64, i64) {
        reduce((2 * self.k * self.n) as i64, (self.n - 2 * self.k) as i64)
    }

    /// The critical exponent `p = 2kn/(n − 2k)`.
    pub fn p(&self) -> f64 {
        let (a, b) = self.p_ratio();
        a as f64 / b as f64
    }

    /// `K = C(n,k)((n − 2k)/(4k))^k`, the constant in front of `u^p` in `N`.
    pub fn kappa(&self) -> f64 {
        binomial(self.n, self.k) * (0.5 * self.rate()).powi(self.k as i32)
    }

    /// `2^{−k} C(n,k)`, the σ_k value of the unit round sphere.
    pub fn sphere_sigma(&self) -> f64 {
        binomial(self.n, self.k) * 0.5_f64.powi(self.k as i32)
    }

    /// `C(n−1,k−1)((n − 2k)/(4k))^{k−1}`, the leading coefficient of the
    /// linearization at the Schwarzschild profile.
    pub fn neck_constant(&self) -> f64 {
        binomial(self.n - 1, self.k - 1) * (0.5 * self.rate()).powi(self.k as i32 - 1)
    }

    /// Eigenvalue `λ_j = j(j + n − 2)` of `−Δ` on the unit `S^{n−1}`.
    pub fn lambda(&self, j: usize) -> f64 {
        (j * (j + self.n - 2)) as f64
    }
}

fn reduce(a: i64, b: i64) -> (i64, i64) {
    let g = gcd(a, b);
    (a / g, b / g)
}

/// Spectrum with multiplicities of a diagonalizable symmetric endomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEndo {
    blocks: Vec<(f64, usize)>,
}

impl SpectrumEndo {
    /// Builds a spectrum from `(eigenvalue, multiplicity)` pairs.
    pub fn new(blocks: Vec<(f64, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return domain("empty spectrum");
        }
        if blocks.iter().any(|&(_, m)| m == 0) {
            return domain("multiplicities must be positive");
        }
        if blocks.iter().any(|&(l, _)| !l.is_finite()) {
            return domain("eigenvalues must be finite");
        }
        Ok(Self { blocks })
    }

    /// Builds a spectrum from a list of simple eigenvalues.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&l| (l, 1)).collect())
    }

    /// `c · 𝕀_n`.
    pub fn scalar(c: f64, n: usize) -> Result<Self> {
        Self::new(vec![(c, n)])
    }

    /// The `(eigenvalue, multiplicity)` blocks.
    pub fn blocks(&self) -> &[(f64, usize)] {
        &self.blocks
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }

    /// Multiplies every eigenvalue by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|&(l, m)| (c * l, m)).collect(),
        }
    }

    /// All elementary symmetric functions `σ_0, …, σ_n`.
    pub fn sigmas(&self) -> Vec<f64> {
        let n = self.dim();
        let mut coef = vec![0.0; n + 1];
        coef[0] = 1.0;
        let mut deg = 0;
        for &(l, m) in &self.blocks {
            // (1 + l x)^m = Σ_i C(m,i) l^i x^i, convolved into coef.
            let factor: Vec<f64> = (0..=m).map(|i| binomial(m, i) * l.powi(i as i32)).collect();
            let mut next = vec![0.0; n + 1];
            for (i, &c) in coef.iter().enumerate().take(deg + 1) {
                for (r, &f) in factor.iter().enumerate() {
                    next[i + r] += c * f;
                }
            }
            coef = next;
            deg += m;
        }
        coef
    }

    /// Spectrum with one copy of block `idx` removed.
    fn without_one(&self, idx: usize) -> Vec<(f64, usize)> {
        let mut blocks = self.blocks.clone();
        if blocks[idx].1 == 1 {
            blocks.remove(idx);
        } else {
            blocks[idx].1 -= 1;
        }
        blocks
    }
}

/// `σ_k` of a spectrum.
pub fn sigma(spec: &SpectrumEndo, k: usize) -> Result<f64> {
    let n = spec.dim();
    if k > n {
        return domain(format!("k = {k} exceeds dimension {n}"));
    }
    Ok(spec.sigmas()[k])
}

/// Newton transform `T_m(B) = Σ_{j=0}^m (−1)^j σ_{m−j}(B) B^j`, eigenvalue-wise.
pub fn newton_transform(spec: &SpectrumEndo, m: usize) -> Result<SpectrumEndo> {
    let n = spec.dim();
    if m > n {
        return domain(format!("m = {m} exceeds dimension {n}"));
    }
    let s = spec.sigmas();
    let blocks = spec
        .blocks
        .iter()
        .map(|&(l, mult)| {
            let mut acc = 0.0;
            let mut pow = 1.0;
            for j in 0..=m {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * s[m - j] * pow;
                pow *= l;
            }
            (acc, mult)
        })
        .collect();
    Ok(SpectrumEndo { blocks })
}

/// Eigenvalue of `T_m(B)` on the eigenspace of block `idx`, computed as
/// `σ_m` of the spectrum with that eigenvalue removed once.
pub fn newton_eigenvalue(spec: &SpectrumEndo, idx: usize, m: usize) -> Result<f64> {
    if idx >= spec.blocks.len() {
        return domain(format!("block index {idx} out of range"));
    }
    let n = spec.dim();
    if m > n {
        return domain(format!("m = {m} exceeds dimension {n}"));
    }
    if m == n {
        return Ok(0.0);
    }
    let rest = spec.without_one(idx);
    if rest.is_empty() {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    Ok(SpectrumEndo { blocks: rest }.sigmas()[m])
}

/// `tr(T_{k−1}(B) dB)` for commuting diagonal `B`, `dB` with equal block layout.
pub fn sigma_derivative(b: &SpectrumEndo, db: &SpectrumEndo, k: usize) -> Result<f64> {
    if b.blocks.len() != db.blocks.len() || b.blocks.iter().zip(&db.blocks).any(|(x, y)| x.1 != y.1)
    {
        return domain("B and dB have different block layouts");
    }
    if k == 0 || k > b.dim() {
        return domain(format!("k = {k} outside 1..={}", b.dim()));
    }
    let t = newton_transform(b, k - 1)?;
    Ok(t.blocks
        .iter()
        .zip(&db.blocks)
        .map(|(&(tv, m), &(dv, _))| m as f64 * tv * dv)
        .sum())
}

/// `min_{1 ≤ j ≤ k} σ_j(spec)`; positive iff the spectrum lies in `Γ_k^+`.
pub fn cone_margin(spec: &SpectrumEndo, k: usize) -> Result<f64> {
    if k == 0 || k > spec.dim() {
        return domain(format!("k = {k} outside 1..={}", spec.dim()));
    }
    let s = spec.sigmas();
    Ok(s[1..=k].iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Strict membership in `Γ_k^+`: `σ_j > 0` for `j = 1..k`.
pub fn cone_membership(spec: &SpectrumEndo, k: usize) -> Result<bool> {
    Ok(cone_margin(spec, k)? > 0.0)
}

/// Symmetric endomorphism with a `(t, φ)` block and an isotropic angular entry.
///
/// In an orthonormal frame `(∂_t, ∂_φ, e_3, …, e_n)` the matrix is
/// `[[tt, tp, 0], [tp, pp, 0], [0, 0, ww·𝕀_{n−2}]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrowEndo<T> {
    pub tt: T,
    pub tp: T,
    pub pp: T,
    pub ww: T,
}

impl<T: Real> ArrowEndo<T> {
    /// Builds an arrow endomorphism from its four entries.
    pub fn new(tt: T, tp: T, pp: T, ww: T) -> Self {
        Self { tt, tp, pp, ww }
    }

    /// `c · 𝕀`.
    pub fn scalar(c: T) -> Self {
        Self::new(c, T::zero(), c, c)
    }

    /// Entry-wise multiple.
    pub fn scaled(&self, c: T) -> Self {
        Self::new(c * self.tt, c * self.tp, c * self.pp, c * self.ww)
    }

    /// Coefficients `σ_0, …, σ_kmax` from `(1 + tr x + det x²)(1 + ww x)^{n−2}`.
    pub fn sigmas(&self, n: usize, kmax: usize) -> Vec<T> {
        let kmax = kmax.min(n);
        let tr = self.tt + self.pp;
        let det = self.tt * self.pp - self.tp * self.tp;
        let m = n - 2;
        // Coefficients of (1 + ww x)^m up to degree kmax.
        let mut iso = vec![T::zero(); kmax + 1];
        let mut pow = T::one();
        for (i, slot) in iso.iter_mut().enumerate() {
            if i > m {
                break;
            }
            *slot = T::from_f64(binomial(m, i)) * pow;
            pow *= self.ww;
        }
        (0..=kmax)
            .map(|j| {
                let mut s = iso[j];
                if j >= 1 {
                    s += tr * iso[j - 1];
                }
                if j >= 2 {
                    s += det * iso[j - 2];
                }
                s
            })
            .collect()
    }

    /// `σ_k` for ambient dimension `n`.
    pub fn sigma(&self, n: usize, k: usize) -> Result<T> {
        check_arrow_dims(n, k)?;
        Ok(self.sigmas(n, k)[k])
    }

    /// Matrix product of commuting arrow endomorphisms.
    fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.tt * o.tt + self.tp * o.tp,
            self.tt * o.tp + self.tp * o.pp,
            self.tp * o.tp + self.pp * o.pp,
            self.ww * o.ww,
        )
    }

    /// Newton transform via `T_0 = 𝕀`, `T_j = σ_j 𝕀 − B T_{j−1}`.
    pub fn newton_transform(&self, n: usize, m: usize) -> Result<Self> {
        check_arrow_dims(n, m)?;
        let s = self.sigmas(n, m);
        let mut t = Self::scalar(T::one());
        for sj in s.iter().take(m + 1).skip(1) {
            let bt = self.mul(&t);
            t = Self::new(*sj - bt.tt, -bt.tp, *sj - bt.pp, *sj - bt.ww);
        }
        Ok(t)
    }

    /// `tr(self · other)` in dimension `n`.
    pub fn trace_product(&self, o: &Self, n: usize) -> T {
        self.tt * o.tt
            + T::from_f64(2.0) * self.tp * o.tp
            + self.pp * o.pp
            + T::from_f64((n - 2) as f64) * self.ww * o.ww
    }

    /// Directional derivative `tr(T_{k−1}(B) dB)` of `σ_k` at `B` along `dB`.
    pub fn sigma_derivative(&self, db: &Self, n: usize, k: usize) -> Result<T> {
        if k == 0 {
            return domain("k must be at least 1");
        }
        let t = self.newton_transform(n, k - 1)?;
        Ok(t.trace_product(db, n))
    }
}

impl ArrowEndo<f64> {
    /// The two eigenvalues of the `(t, φ)` block, smaller first.
    pub fn block_eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.tt + self.pp);
        let half = 0.5 * (self.tt - self.pp);
        let disc = half * half + self.tp * self.tp;
        // Symmetric blocks have a non-negative discriminant; clip round-off.
        let disc = if disc < 0.0 && disc > -1e-14 {
            0.0
        } else {
            disc
        };
        let r = disc.max(0.0).sqrt();
        (mean - r, mean + r)
    }

    /// Full spectrum in dimension `n`.
    pub fn spectrum(&self, n: usize) -> Result<SpectrumEndo> {
        if n < 3 {
            return domain("arrow endomorphisms need n >= 3");
        }
        let (l1, l2) = self.block_eigenvalues();
        SpectrumEndo::new(vec![(l1, 1), (l2, 1), (self.ww, n - 2)])
    }

    /// `min_{1 ≤ j ≤ k} σ_j`.
    pub fn cone_margin(&self, n: usize, k: usize) -> Result<f64> {
        check_arrow_dims(n, k)?;
        if k == 0 {
            return domain("k must be at least 1");
        }
        let s = self.sigmas(n, k);
        Ok(s[1..=k].iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

fn check_arrow_dims(n: usize, k: usize) -> Result<()> {
    if n < 3 {
        return domain("arrow endomorphisms need n >= 3");
    }
    if k > n {
        return domain(format!("order {k} exceeds dimension {n}"));
    }
    Ok(())
}
