//! Stencils, zonal derivatives, banded solves, quadrature and fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigmak::banded::BandedMatrix;
use sigmak::fit::{fit_line, fit_power_law};
use sigmak::grid::{fornberg_weights, sup_norm, Mesh, StencilOrder, UniformGrid};
use sigmak::quadrature::{gauss_legendre, integrate};
use sigmak::scalar::DoubleDouble;
use sigmak::Real;

fn ratio(r: &num_rational::Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Worst errors of `u'` and `u''` for `u = sin(2t)` on `[0, 2]`.
fn derivative_errors(nt: usize, order: StencilOrder) -> (f64, f64) {
    let mesh = Mesh::radial_on(0.0, 2.0, nt, order).unwrap();
    let u = mesh.sample(|t, _| (2.0 * t).sin());
    let jets = mesh.jets(&u).unwrap();
    let mut e1 = 0.0_f64;
    let mut e2 = 0.0_f64;
    for (i, j) in jets.iter().enumerate() {
        let t = mesh.t(i);
        e1 = e1.max((j.t - 2.0 * (2.0 * t).cos()).abs());
        e2 = e2.max((j.tt + 4.0 * (2.0 * t).sin()).abs());
    }
    (e1, e2)
}

/// Worst error of `u_φφ + (n−2) cot φ u_φ` against `−(n−1) cos φ` for
/// `u = cos φ`, poles included.
fn sphere_laplacian_error(nphi: usize, n: usize) -> f64 {
    let t = UniformGrid::linspace(0.0, 1.0, 7).unwrap();
    let mesh = Mesh::zonal(t, nphi, StencilOrder::Fourth).unwrap();
    let u = mesh.sample(|_, p| p.cos());
    let jets = mesh.jets(&u).unwrap();
    let mut worst = 0.0_f64;
    for m in 0..mesh.nphi() {
        let j = jets[mesh.index(3, m)];
        let lap = j.pp + (n - 2) as f64 * j.cot;
        worst = worst.max((lap + (n - 1) as f64 * mesh.phi(m).cos()).abs());
    }
    worst
}

#[test]
fn fourth_order_stencils_converge_at_fourth_order() {
    let (a1, a2) = derivative_errors(41, StencilOrder::Fourth);
    let (b1, b2) = derivative_errors(81, StencilOrder::Fourth);
    assert!(
        (a1 / b1).log2() > 3.7,
        "first derivative order {}",
        (a1 / b1).log2()
    );
    assert!(
        (a2 / b2).log2() > 3.5,
        "second derivative order {}",
        (a2 / b2).log2()
    );
}

#[test]
fn second_order_stencils_converge_at_second_order() {
    let (a1, a2) = derivative_errors(41, StencilOrder::Second);
    let (b1, b2) = derivative_errors(81, StencilOrder::Second);
    assert!((a1 / b1).log2() > 1.8);
    assert!((a2 / b2).log2() > 1.8);
}

#[test]
fn zonal_laplacian_of_first_harmonic_converges_through_the_poles() {
    let coarse = sphere_laplacian_error(33, 8);
    let fine = sphere_laplacian_error(65, 8);
    assert!(fine < 1e-5, "fine error {fine:e}");
    assert!(
        (coarse / fine).log2() > 3.5,
        "order {}",
        (coarse / fine).log2()
    );
}

#[test]
fn pole_rows_see_an_even_extension() {
    let t = UniformGrid::linspace(0.0, 1.0, 7).unwrap();
    let mesh = Mesh::zonal(t, 17, StencilOrder::Fourth).unwrap();
    assert!(mesh.is_pole(0) && mesh.is_pole(16) && !mesh.is_pole(8));
    let u = mesh.sample(|_, p| 2.0 + p.cos());
    let jets = mesh.jets(&u).unwrap();
    for i in 0..mesh.nt() {
        for m in [0, 16] {
            let j = jets[mesh.index(i, m)];
            assert_eq!(j.p, 0.0);
            assert_eq!(j.tp, 0.0);
            assert_eq!(j.cot, j.pp);
        }
    }
}

#[test]
fn double_double_jets_agree_with_f64() {
    let mesh = Mesh::radial_on(-1.0, 1.0, 21, StencilOrder::Fourth).unwrap();
    let u = mesh.sample(|t, _| t.cosh());
    let ud: Vec<DoubleDouble> = u.iter().map(|&x| DoubleDouble::from_f64(x)).collect();
    let a = mesh.jets(&u).unwrap();
    let b = mesh.jets(&ud).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.t - y.t.to_f64()).abs() < 1e-12);
        assert!((x.tt - y.tt.to_f64()).abs() < 1e-10);
    }
}

#[test]
fn mesh_rejects_mismatched_fields() {
    let mesh = Mesh::radial_on(0.0, 1.0, 11, StencilOrder::Fourth).unwrap();
    assert!(mesh.jets(&[1.0; 10]).is_err());
    assert!(mesh.check_len(&[0.0; 11]).is_ok());
    assert_eq!(sup_norm(&[1.0, -3.0, 2.0]), 3.0);
}

#[test]
fn banded_solve_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &(n, kl, ku) in &[(12, 2, 2), (30, 3, 1), (25, 1, 4)] {
        let mut band = BandedMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v: f64 = rng.gen_range(-1.0..1.0) + if i == j { 0.1 } else { 0.0 };
                // Scale rows wildly to exercise equilibration.
                let v = v * 10f64.powi((i % 5) as i32 * 3);
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = band.solve(&b).unwrap();
        let y = dense
            .clone()
            .lu()
            .solve(&DVector::from_vec(b.clone()))
            .unwrap();
        let scale = y.amax();
        for i in 0..n {
            assert!(
                (x[i] - y[i]).abs() < 1e-9 * scale,
                "({n}, {kl}, {ku}) entry {i}"
            );
        }
        let r = band.matvec(&x);
        let ry = &dense * DVector::from_vec(x.clone());
        for i in 0..n {
            assert!((r[i] - ry[i]).abs() < 1e-12 * ry.amax());
        }
    }
}

#[test]
fn singular_banded_system_is_reported() {
    let mut band = BandedMatrix::zeros(4, 1, 1);
    band.add(0, 0, 1.0);
    band.add(1, 1, 1.0);
    band.add(3, 3, 1.0);
    assert!(band.solve(&[1.0; 4]).is_err());
}

#[test]
fn gauss_legendre_integrates_trigonometric_functions() {
    let (x, w) = gauss_legendre(12);
    let v = integrate(|t| t.sin(), 0.0, PI, &x, &w);
    assert!((v - 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn fornberg_weights_satisfy_moment_conditions(
        start in -6i64..1, len in 3usize..8, deriv in 0usize..3,
    ) {
        prop_assume!(deriv < len);
        let offsets: Vec<i64> = (0..len as i64).map(|j| start + j).collect();
        let w = fornberg_weights(&offsets, deriv);
        // Σ w_j x_j^m = d^m/dx^m x^m at 0 for m < len: m! if m == deriv else 0.
        for m in 0..len {
            let s: f64 = offsets.iter().zip(&w).map(|(&x, r)| ratio(&r[deriv]) * (x as f64).powi(m as i32)).sum();
            let expect = if m == deriv { (1..=m).product::<usize>() as f64 } else { 0.0 };
            prop_assert!((s - expect).abs() < 1e-8 * 10f64.powi(m as i32), "m = {}: {} vs {}", m, s, expect);
        }
    }

    #[test]
    fn fourth_order_jets_are_exact_on_quartics(c in prop::array::uniform5(-2.0..2.0f64), a in -3.0..0.0f64, len in 12usize..40) {
        let mesh = Mesh::radial_on(a, a + 2.0, len, StencilOrder::Fourth).unwrap();
        let u = mesh.sample(|t, _| c[0] + c[1] * t + c[2] * t * t + c[3] * t.powi(3) + c[4] * t.powi(4));
        let jets = mesh.jets(&u).unwrap();
        for (i, j) in jets.iter().enumerate() {
            let t = mesh.t(i);
            let d1 = c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t + 4.0 * c[4] * t.powi(3);
            let d2 = 2.0 * c[2] + 6.0 * c[3] * t + 12.0 * c[4] * t * t;
            prop_assert!((j.t - d1).abs() < 1e-9);
            prop_assert!((j.tt - d2).abs() < 1e-7);
        }
    }

    #[test]
    fn second_order_jets_are_exact_on_quadratics(c in prop::array::uniform3(-2.0..2.0f64), len in 6usize..30) {
        let mesh = Mesh::radial_on(-1.0, 1.0, len, StencilOrder::Second).unwrap();
        let u = mesh.sample(|t, _| c[0] + c[1] * t + c[2] * t * t);
        let jets = mesh.jets(&u).unwrap();
        for (i, j) in jets.iter().enumerate() {
            let t = mesh.t(i);
            prop_assert!((j.t - (c[1] + 2.0 * c[2] * t)).abs() < 1e-10);
            prop_assert!((j.tt - 2.0 * c[2]).abs() < 1e-8);
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_two_n_minus_one(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, w) = gauss_legendre(n);
        let q = integrate(|t| coef.iter().enumerate().map(|(d, c)| c * t.powi(d as i32)).sum(), -1.0, 2.0, &x, &w);
        let exact: f64 = coef
            .iter()
            .enumerate()
            .map(|(d, c)| c * (2f64.powi(d as i32 + 1) - (-1f64).powi(d as i32 + 1)) / (d + 1) as f64)
            .sum();
        prop_assert!((q - exact).abs() < 1e-11 * (1.0 + exact.abs()) * 2f64.powi(2 * n as i32));
    }

    #[test]
    fn line_fit_recovers_noiseless_lines(slope in -5.0..5.0f64, icpt in -5.0..5.0f64, len in 2usize..20) {
        let x: Vec<f64> = (0..len).map(|i| i as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + icpt).collect();
        let f = fit_line(&x, &y).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-10);
        prop_assert!((f.intercept - icpt).abs() < 1e-10);
        let p = fit_power_law(&[1e-1, 1e-2, 1e-3], &[1e-1f64.powf(slope), 1e-2f64.powf(slope), 1e-3f64.powf(slope)]).unwrap();
        prop_assert!((p.slope - slope).abs() < 1e-10);
    }

    #[test]
    fn double_double_division_round_trips(a in 0.01..100.0f64, b in 0.01..100.0f64) {
        let x = DoubleDouble::from_f64(a);
        let y = DoubleDouble::from_f64(b);
        let back = (x / y) * y - x;
        prop_assert!(back.abs().to_f64() < 1e-30 * a);
        let r = x.pow_ratio(1, 3);
        prop_assert!(((r.powi(3) - x).abs()).to_f64() < 1e-30 * a);
    }
}
