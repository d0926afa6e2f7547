//! Uniform grids, exact finite-difference stencils and zonal grid fields.
//!
//! Stencil weights are generated by Fornberg's recursion in exact rational
//! arithmetic and stored as integer numerators over a common denominator, so
//! the `f64` and double-double evaluation paths use identical coefficients.
//! Interior rows are centered; rows within the stencil half-width of a `t`
//! boundary use a one-sided window of `order + 2` points. In the polar angle
//! `φ ∈ [0, π]` the field is extended evenly across both poles, which keeps
//! every angular stencil centered and makes `∂_φ u` vanish at the poles.

use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Formal accuracy of the finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StencilOrder {
    Second,
    #[default]
    Fourth,
}

impl StencilOrder {
    /// Parses the numeric order `2` or `4`.
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => domain(format!("stencil order {p} not in {{2, 4}}")),
        }
    }

    /// Formal order of accuracy.
    pub fn accuracy(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }

    /// Half-width of the centered stencil.
    pub fn half_width(self) -> usize {
        (self.accuracy() / 2) as usize
    }

    /// Number of points in the one-sided boundary window.
    pub fn boundary_window(self) -> usize {
        self.accuracy() as usize + 2
    }
}

/// Exact Fornberg weights at `x = 0` for the integer `offsets`, derivatives
/// `0..=max_deriv`. Entry `[j][d]` is the weight of `offsets[j]` for `d`.
pub fn fornberg_weights(offsets: &[i64], max_deriv: usize) -> Vec<Vec<Ratio<i128>>> {
    let n = offsets.len();
    let zero = Ratio::from_integer(0i128);
    let mut c = vec![vec![zero; max_deriv + 1]; n];
    let x: Vec<Ratio<i128>> = offsets
        .iter()
        .map(|&o| Ratio::from_integer(o as i128))
        .collect();
    let mut c1 = Ratio::from_integer(1i128);
    let mut c4 = x[0];
    c[0][0] = Ratio::from_integer(1);
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = Ratio::from_integer(1i128);
        let c5 = c4;
        c4 = x[i];
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    let kk = Ratio::from_integer(k as i128);
                    c[i][k] = c1 * (kk * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                let kk = Ratio::from_integer(k as i128);
                c[j][k] = (c4 * c[j][k] - kk * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

fn lcm(a: i128, b: i128) -> i128 {
    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    (a / gcd(a, b) * b).abs()
}

/// One row of a difference operator: `Σ nums[i]·u[cols[i]] / (den·h^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilRow {
    pub cols: Vec<usize>,
    pub nums: Vec<i64>,
    pub den: i64,
}

impl StencilRow {
    fn from_ratios(cols: Vec<usize>, weights: &[Ratio<i128>]) -> Self {
        let den = weights.iter().fold(1i128, |acc, w| lcm(acc, *w.denom()));
        let nums = weights
            .iter()
            .map(|w| (*w.numer() * (den / *w.denom())) as i64)
            .collect();
        Self {
            cols,
            nums,
            den: den as i64,
        }
    }

    /// Applies the row to `u` with the grid scale factor `1/(den h^d)`.
    pub fn apply<T: Real>(&self, u: &[T], inv_scale: f64) -> T {
        let mut acc = T::zero();
        for (&c, &w) in self.cols.iter().zip(&self.nums) {
            if w != 0 {
                acc += T::from_f64(w as f64) * u[c];
            }
        }
        acc * T::from_f64(inv_scale / self.den as f64)
    }

    /// Real-valued weights including the grid scale factor.
    pub fn weights(&self, inv_scale: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let s = inv_scale / self.den as f64;
        self.cols
            .iter()
            .zip(&self.nums)
            .map(move |(&c, &w)| (c, w as f64 * s))
    }
}

/// First- and second-derivative rows on a line of `len` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LineStencil {
    pub d1: Vec<StencilRow>,
    pub d2: Vec<StencilRow>,
}

impl LineStencil {
    /// Stencils with one-sided windows at both ends.
    pub fn bounded(len: usize, order: StencilOrder) -> Result<Self> {
        let w = order.boundary_window();
        if len < w {
            return domain(format!(
                "line of {len} nodes shorter than stencil window {w}"
            ));
        }
        let hw = order.half_width();
        let mut d1 = Vec::with_capacity(len);
        let mut d2 = Vec::with_capacity(len);
        let centered = {
            let offs: Vec<i64> = (-(hw as i64)..=hw as i64).collect();
            fornberg_weights(&offs, 2)
        };
        for i in 0..len {
            let (start, weights) = if i >= hw && i + hw < len {
                (i - hw, None)
            } else if i < hw {
                (0, Some(i))
            } else {
                (len - w, Some(i))
            };
            match weights {
                None => {
                    let cols: Vec<usize> = (start..start + 2 * hw + 1).collect();
                    let w1: Vec<_> = centered.iter().map(|r| r[1]).collect();
                    let w2: Vec<_> = centered.iter().map(|r| r[2]).collect();
                    d1.push(StencilRow::from_ratios(cols.clone(), &w1));
                    d2.push(StencilRow::from_ratios(cols, &w2));
                }
                Some(node) => {
                    let cols: Vec<usize> = (start..start + w).collect();
                    let offs: Vec<i64> = cols.iter().map(|&c| c as i64 - node as i64).collect();
                    let fw = fornberg_weights(&offs, 2);
                    let w1: Vec<_> = fw.iter().map(|r| r[1]).collect();
                    let w2: Vec<_> = fw.iter().map(|r| r[2]).collect();
                    d1.push(StencilRow::from_ratios(cols.clone(), &w1));
                    d2.push(StencilRow::from_ratios(cols, &w2));
                }
            }
        }
        Ok(Self { d1, d2 })
    }

    /// Centered stencils on `[0, π]` with even reflection across both ends.
    pub fn reflected(len: usize, order: StencilOrder) -> Result<Self> {
        let hw = order.half_width();
        if len < 2 * hw + 1 {
            return domain(format!(
                "angular grid of {len} nodes too coarse for order {}",
                order.accuracy()
            ));
        }
        let offs: Vec<i64> = (-(hw as i64)..=hw as i64).collect();
        let fw = fornberg_weights(&offs, 2);
        let last = (len - 1) as i64;
        let reflect = |idx: i64| -> usize {
            if idx < 0 {
                (-idx) as usize
            } else if idx > last {
                (2 * last - idx) as usize
            } else {
                idx as usize
            }
        };
        let mut d1 = Vec::with_capacity(len);
        let mut d2 = Vec::with_capacity(len);
        for m in 0..len {
            for (d, out) in [(1usize, &mut d1), (2usize, &mut d2)] {
                // Merge reflected columns so each column appears once.
                let mut merged: Vec<(usize, Ratio<i128>)> = Vec::new();
                for (j, &o) in offs.iter().enumerate() {
                    let col = reflect(m as i64 + o);
                    match merged.iter_mut().find(|e| e.0 == col) {
                        Some(e) => e.1 += fw[j][d],
                        None => merged.push((col, fw[j][d])),
                    }
                }
                merged.sort_by_key(|e| e.0);
                let cols = merged.iter().map(|e| e.0).collect();
                let ws: Vec<_> = merged.iter().map(|e| e.1).collect();
                out.push(StencilRow::from_ratios(cols, &ws));
            }
        }
        Ok(Self { d1, d2 })
    }
}

/// Uniform grid `start + i·step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    /// `len` equispaced points from `a` to `b` inclusive.
    pub fn linspace(a: f64, b: f64, len: usize) -> Result<Self> {
        if len < 2 || !(b > a) || !a.is_finite() || !b.is_finite() {
            return domain(format!("invalid grid [{a}, {b}] with {len} points"));
        }
        Ok(Self {
            start: a,
            step: (b - a) / (len - 1) as f64,
            len,
        })
    }

    /// Node `i`.
    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Right end point.
    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// All nodes.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    /// Contiguous sub-grid of nodes `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo >= hi || hi >= self.len {
            return domain(format!("invalid slice {lo}..={hi} of {} nodes", self.len));
        }
        Ok(Self {
            start: self.point(lo),
            step: self.step,
            len: hi - lo + 1,
        })
    }
}

/// Pointwise derivatives of a zonal field at one node.
///
/// `cot` is `cot φ · u_φ`, replaced by `u_φφ` at the poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub u: T,
    pub t: T,
    pub p: T,
    pub tt: T,
    pub tp: T,
    pub pp: T,
    pub cot: T,
}

/// Tensor grid in `(t, φ)` together with its difference stencils.
///
/// Nodes are ordered `i·nphi + m` for `t`-index `i` and `φ`-index `m`. A mesh
/// with `nphi = 1` represents radial (t-only) functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    t: UniformGrid,
    nphi: usize,
    order: StencilOrder,
    t_stencil: LineStencil,
    phi_stencil: Option<LineStencil>,
    cot: Vec<f64>,
}

impl Mesh {
    /// Radial mesh on the given `t` grid.
    pub fn radial(t: UniformGrid, order: StencilOrder) -> Result<Self> {
        Self::zonal(t, 1, order)
    }

    /// Zonal mesh with `nphi` polar-angle nodes on `[0, π]` (`nphi = 1` is radial).
    pub fn zonal(t: UniformGrid, nphi: usize, order: StencilOrder) -> Result<Self> {
        let t_stencil = LineStencil::bounded(t.len, order)?;
        let phi_stencil = if nphi == 1 {
            None
        } else {
            if nphi < 5 {
                return domain(format!("nphi = {nphi}: need 1 or at least 5"));
            }
            Some(LineStencil::reflected(nphi, order)?)
        };
        let cot = if nphi == 1 {
            vec![0.0]
        } else {
            let h = std::f64::consts::PI / (nphi - 1) as f64;
            (0..nphi)
                .map(|m| {
                    if m == 0 || m == nphi - 1 {
                        0.0
                    } else {
                        1.0 / (m as f64 * h).tan()
                    }
                })
                .collect()
        };
        Ok(Self {
            t,
            nphi,
            order,
            t_stencil,
            phi_stencil,
            cot,
        })
    }

    /// Convenience: radial mesh of `len` nodes on `[a, b]`.
    pub fn radial_on(a: f64, b: f64, len: usize, order: StencilOrder) -> Result<Self> {
        Self::radial(UniformGrid::linspace(a, b, len)?, order)
    }

    /// Mesh on nodes `lo..=hi` of the `t` grid with its own boundary stencils.
    pub fn t_slice(&self, lo: usize, hi: usize) -> Result<Self> {
        Self::zonal(self.t.slice(lo, hi)?, self.nphi, self.order)
    }

    pub fn t_grid(&self) -> &UniformGrid {
        &self.t
    }

    pub fn nt(&self) -> usize {
        self.t.len
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.t.len * self.nphi
    }

    /// Always false; a mesh has at least one node.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_radial(&self) -> bool {
        self.nphi == 1
    }

    /// Angular spacing `π/(nphi − 1)` (zero for radial meshes).
    pub fn hphi(&self) -> f64 {
        if self.nphi == 1 {
            0.0
        } else {
            std::f64::consts::PI / (self.nphi - 1) as f64
        }
    }

    /// Flattened node index.
    pub fn index(&self, i: usize, m: usize) -> usize {
        i * self.nphi + m
    }

    /// `t` coordinate of node `i`.
    pub fn t(&self, i: usize) -> f64 {
        self.t.point(i)
    }

    /// `φ` coordinate of angular node `m`.
    pub fn phi(&self, m: usize) -> f64 {
        m as f64 * self.hphi()
    }

    /// `cot φ_m` (zero at the poles, where `u_φφ` replaces `cot φ u_φ`).
    pub fn cot(&self, m: usize) -> f64 {
        self.cot[m]
    }

    /// Whether node `m` is a pole.
    pub fn is_pole(&self, m: usize) -> bool {
        self.nphi > 1 && (m == 0 || m == self.nphi - 1)
    }

    /// `t`-direction stencils.
    pub fn t_stencil(&self) -> &LineStencil {
        &self.t_stencil
    }

    /// Angular stencils (absent on radial meshes).
    pub fn phi_stencil(&self) -> Option<&LineStencil> {
        self.phi_stencil.as_ref()
    }

    /// `1/h_t` and `1/h_t²`.
    pub fn t_scales(&self) -> (f64, f64) {
        let h = self.t.step;
        (1.0 / h, 1.0 / (h * h))
    }

    /// `1/h_φ` and `1/h_φ²`.
    pub fn phi_scales(&self) -> (f64, f64) {
        let h = self.hphi();
        if h == 0.0 {
            (0.0, 0.0)
        } else {
            (1.0 / h, 1.0 / (h * h))
        }
    }

    /// Samples `f(t, φ)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nt() {
            for m in 0..self.nphi {
                out.push(f(self.t(i), self.phi(m)));
            }
        }
        out
    }

    /// Checks that a value array matches the mesh size.
    pub fn check_len<T>(&self, values: &[T]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, mesh has {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Computes all first and second derivatives of `u` at every node.
    pub fn jets<T: Real>(&self, u: &[T]) -> Result<Vec<Jet<T>>> {
        self.check_len(u)?;
        let nt = self.nt();
        let np = self.nphi;
        let (s1, s2) = self.t_scales();
        let mut col = vec![T::zero(); nt];
        let mut ut = vec![T::zero(); u.len()];
        let mut utt = vec![T::zero(); u.len()];
        for m in 0..np {
            for i in 0..nt {
                col[i] = u[i * np + m];
            }
            for i in 0..nt {
                ut[i * np + m] = self.t_stencil.d1[i].apply(&col, s1);
                utt[i * np + m] = self.t_stencil.d2[i].apply(&col, s2);
            }
        }
        let mut jets = Vec::with_capacity(u.len());
        match &self.phi_stencil {
            None => {
                for i in 0..nt {
                    jets.push(Jet {
                        u: u[i],
                        t: ut[i],
                        p: T::zero(),
                        tt: utt[i],
                        tp: T::zero(),
                        pp: T::zero(),
                        cot: T::zero(),
                    });
                }
            }
            Some(ps) => {
                let (p1, p2) = self.phi_scales();
                for i in 0..nt {
                    let row = &u[i * np..(i + 1) * np];
                    let trow = &ut[i * np..(i + 1) * np];
                    for m in 0..np {
                        let up = if self.is_pole(m) {
                            T::zero()
                        } else {
                            ps.d1[m].apply(row, p1)
                        };
                        let upp = ps.d2[m].apply(row, p2);
                        let utp = if self.is_pole(m) {
                            T::zero()
                        } else {
                            ps.d1[m].apply(trow, p1)
                        };
                        let cot = if self.is_pole(m) {
                            upp
                        } else {
                            T::from_f64(self.cot[m]) * up
                        };
                        jets.push(Jet {
                            u: row[m],
                            t: ut[i * np + m],
                            p: up,
                            tt: utt[i * np + m],
                            tp: utp,
                            pp: upp,
                            cot,
                        });
                    }
                }
            }
        }
        Ok(jets)
    }
}

/// Grid function on a (radial or zonal) mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

/// A zonal field on a mesh with a single angular node.
pub type RadialProfile = ZonalField;

impl ZonalField {
    /// Wraps values, checking the length against the mesh.
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        mesh.check_len(&values)?;
        Ok(Self { mesh, values })
    }

    /// Samples `f(t, φ)` on the mesh.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.sample(f);
        Self { mesh, values }
    }

    /// Smallest value.
    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Maximum absolute value.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Node-wise derivatives.
    pub fn jets(&self) -> Result<Vec<Jet<f64>>> {
        self.mesh.jets(&self.values)
    }
}

/// `max |v_i|`.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_f64(r: &Ratio<i128>) -> f64 {
        *r.numer() as f64 / *r.denom() as f64
    }

    #[test]
    fn centered_weights_are_classical() {
        let w = fornberg_weights(&[-2, -1, 0, 1, 2], 2);
        let d2: Vec<f64> = w.iter().map(|r| as_f64(&r[2])).collect();
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in d2.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_rows_match_known_six_point_weights() {
        let s = LineStencil::bounded(20, StencilOrder::Fourth).unwrap();
        assert_eq!(s.d2[0].den, 12);
        assert_eq!(s.d2[0].nums, vec![45, -154, 214, -156, 61, -10]);
        assert_eq!(s.d1[0].den, 60);
        assert_eq!(s.d1[0].nums, vec![-137, 300, -300, 200, -75, 12]);
        assert_eq!(s.d2[1].nums, vec![10, -15, -4, 14, -6, 1]);
        assert_eq!(s.d1[1].nums, vec![-12, -65, 120, -60, 20, -3]);
        // Mirror rows at the right end.
        assert_eq!(s.d1[19].nums, vec![-12, 75, -200, 300, -300, 137]);
    }

    #[test]
    fn reflected_first_derivative_vanishes_at_poles() {
        let s = LineStencil::reflected(9, StencilOrder::Fourth).unwrap();
        assert!(s.d1[0].nums.iter().all(|&w| w == 0));
        assert!(s.d1[8].nums.iter().all(|&w| w == 0));
    }

    #[test]
    fn jets_of_polynomial_are_exact() {
        let mesh = Mesh::radial_on(-1.0, 2.0, 31, StencilOrder::Fourth).unwrap();
        let u = mesh.sample(|t, _| 1.0 + t - 2.0 * t * t + 0.5 * t.powi(3) + 0.1 * t.powi(4));
        let jets = mesh.jets(&u).unwrap();
        for (i, j) in jets.iter().enumerate() {
            let t = mesh.t(i);
            let d1 = 1.0 - 4.0 * t + 1.5 * t * t + 0.4 * t.powi(3);
            let d2 = -4.0 + 3.0 * t + 1.2 * t * t;
            assert!((j.t - d1).abs() < 1e-10, "node {i}");
            assert!((j.tt - d2).abs() < 1e-9, "node {i}");
        }
    }

    #[test]
    fn zonal_jets_of_cos_phi() {
        let t = UniformGrid::linspace(0.0, 1.0, 11).unwrap();
        let mesh = Mesh::zonal(t, 65, StencilOrder::Fourth).unwrap();
        let u = mesh.sample(|t, p| t * p.cos());
        let jets = mesh.jets(&u).unwrap();
        for i in 0..mesh.nt() {
            for m in 0..mesh.nphi() {
                let (tt, p) = (mesh.t(i), mesh.phi(m));
                let j = jets[mesh.index(i, m)];
                assert!((j.p + tt * p.sin()).abs() < 1e-5);
                assert!((j.pp + tt * p.cos()).abs() < 1e-5);
                assert!((j.tp + p.sin()).abs() < 1e-5);
                assert!((j.cot + tt * p.cos()).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn slices_and_validation() {
        let g = UniformGrid::linspace(0.0, 1.0, 11).unwrap();
        let s = g.slice(5, 10).unwrap();
        assert_eq!(s.len, 6);
        assert!((s.start - 0.5).abs() < 1e-15);
        assert!(UniformGrid::linspace(1.0, 0.0, 5).is_err());
        assert!(Mesh::zonal(g, 3, StencilOrder::Fourth).is_err());
        assert!(StencilOrder::from_int(3).is_err());
    }
}
