//! Analytic linearization against difference quotients and closed forms.
#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigmak::grid::{Jet, Mesh, StencilOrder, UniformGrid};
use sigmak::linop::{
    conjugated_form, fd_action, indicial_roots, jet_coefficients, linearize, measure_decay,
    schwarzschild_linearization, slot, DecayOde, IndicialModel, ModeOde,
};
use sigmak::schouten::CylinderBackground;
use sigmak::symfun::Dimensions;

/// Smooth random zonal field `1 + amp Σ c_ab cos(a t + b) cos(b φ)`.
fn random_field(mesh: &Mesh, rng: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
    let c: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..2.0),
                rng.gen_range(0.0..3.0),
            )
        })
        .collect();
    mesh.sample(|t, p| {
        1.0 + amp
            * c.iter()
                .enumerate()
                .map(|(i, &(a, f, s))| a * (f * t + s).cos() * ((i % 3) as f64 * p).cos())
                .sum::<f64>()
            / 6.0
    })
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Dense matrix of the discrete angular operator `∂_φ² + (n−2) cot φ ∂_φ`.
fn angular_matrix(nphi: usize, n: usize) -> DMatrix<f64> {
    let t = UniformGrid::linspace(0.0, 1.0, 7).unwrap();
    let mesh = Mesh::zonal(t, nphi, StencilOrder::Fourth).unwrap();
    let mut d = DMatrix::zeros(nphi, nphi);
    for m in 0..nphi {
        let e = mesh.sample(|_, _| 0.0);
        let mut e = e;
        for i in 0..mesh.nt() {
            e[mesh.index(i, m)] = 1.0;
        }
        let jets = mesh.jets(&e).unwrap();
        for r in 0..nphi {
            let j = jets[mesh.index(3, r)];
            d[(r, m)] = j.pp + (n - 2) as f64 * j.cot;
        }
    }
    d
}

/// Discrete eigenvector of `d` near `target` by shifted inverse iteration.
fn inverse_iteration(d: &DMatrix<f64>, target: f64) -> (f64, DVector<f64>) {
    let n = d.nrows();
    let shifted = d - DMatrix::identity(n, n) * (target - 0.05);
    let lu = shifted.lu();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * i as f64);
    for _ in 0..60 {
        x = lu.solve(&x).unwrap();
        x /= x.norm();
    }
    let mu = x.dot(&(d * &x));
    (mu, x)
}

#[test]
fn analytic_linearization_matches_difference_quotients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for trial in 0..20 {
        let (n, k) = [(8, 3), (6, 2), (5, 2), (10, 4)][trial % 4];
        let dims = Dimensions::new(n, k).unwrap();
        let t = UniformGrid::linspace(-1.5, 1.5, 41).unwrap();
        let mesh = Arc::new(Mesh::zonal(t, 17, StencilOrder::Fourth).unwrap());
        let b: Vec<f64> = random_field(&mesh, &mut rng, 0.1)
            .iter()
            .map(|x| x - 1.0)
            .collect();
        let bg = CylinderBackground::new(dims, b).unwrap();
        let u = random_field(&mesh, &mut rng, 0.3);
        let w = random_field(&mesh, &mut rng, 1.0);
        let analytic = linearize(mesh.clone(), &bg, &u).unwrap().apply(&w).unwrap();
        let fd = fd_action(&mesh, &bg, &u, &w, 1e-6).unwrap();
        worst = worst.max(relative_gap(&analytic, &fd));
    }
    assert!(worst <= 1e-6, "worst relative gap {worst:e}");
}

#[test]
fn assembled_matrix_reproduces_the_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = Dimensions::new(8, 3).unwrap();
    let t = UniformGrid::linspace(-1.0, 1.0, 31).unwrap();
    let mesh = Arc::new(Mesh::zonal(t, 9, StencilOrder::Fourth).unwrap());
    let bg = CylinderBackground::flat(dims);
    let u = random_field(&mesh, &mut rng, 0.2);
    let w = random_field(&mesh, &mut rng, 1.0);
    let op = linearize(mesh.clone(), &bg, &u).unwrap();
    let a = op.assemble(false).matvec(&w);
    let b = op.apply(&w).unwrap();
    assert!(relative_gap(&b, &a) < 1e-12);
}

#[test]
fn neck_profile_has_constant_coefficients() {
    for (n, k) in [(8, 3), (6, 2), (5, 2), (10, 3), (10, 4)] {
        let dims = Dimensions::new(n, k).unwrap();
        let r = dims.rate();
        let (c2, cang, c0) = schwarzschild_linearization(dims);
        for i in 0..=40 {
            let t = -4.0 + 0.2 * i as f64;
            let v = (r * t).cosh();
            let jet = Jet {
                u: v,
                t: r * (r * t).sinh(),
                p: 0.0,
                tt: r * r * v,
                tp: 0.0,
                pp: 0.0,
                cot: 0.0,
            };
            let (c, _) = jet_coefficients(dims, &jet).unwrap();
            assert!(
                (c[slot::TT] / v - c2).abs() <= 1e-12 * c2.abs(),
                "({n},{k}) t = {t}"
            );
            assert!(
                (c[slot::PP] / v - cang).abs() <= 1e-12 * cang.abs(),
                "({n},{k}) t = {t}"
            );
            assert!(
                (c[slot::W] / v - c0).abs() <= 1e-10 * c0.abs(),
                "({n},{k}) t = {t}"
            );
            assert!(c[slot::T].abs() <= 1e-12 * c2.abs() * v.max(jet.t.abs()));
            assert_eq!(c[slot::P], 0.0);
            assert_eq!(c[slot::TP], 0.0);
        }
    }
}

#[test]
fn grid_linearization_on_the_neck_profile_reaches_the_round_off_floor() {
    for (n, k) in [(8, 3), (6, 2), (5, 2), (10, 3)] {
        let dims = Dimensions::new(n, k).unwrap();
        let mesh = Arc::new(Mesh::radial_on(-2.0, 2.0, 801, StencilOrder::Fourth).unwrap());
        let bg = CylinderBackground::flat(dims);
        let v = mesh.sample(|t, _| (dims.rate() * t).cosh());
        let op = linearize(mesh.clone(), &bg, &v).unwrap();
        let (c2, cang, c0) = schwarzschild_linearization(dims);
        // Stencil jets carry round-off of order 1e-16/h^2 in u_tt, and the
        // zero-order slot cancels terms of size |c2| u_tt/u. The measured
        // floor at h = 0.005 is about 2e-9 relative.
        let tol = 5e-9;
        // End rows use one-sided stencils and are replaced by Dirichlet rows.
        for i in 2..mesh.nt() - 2 {
            let c = op.coefs[i];
            let vi = v[i];
            assert!(
                (c[slot::TT] / vi - c2).abs() <= tol * c2.abs(),
                "({n},{k}) node {i}"
            );
            assert!(
                (c[slot::PP] / vi - cang).abs() <= tol * cang.abs(),
                "({n},{k}) node {i}"
            );
            assert!(
                c[slot::T].abs() <= tol * c2.abs() * vi,
                "({n},{k}) node {i}"
            );
            assert!(
                (c[slot::W] / vi - c0).abs() <= tol * c0.abs(),
                "({n},{k}) node {i}"
            );
        }
    }
}

#[test]
fn neck_roots_are_the_rates_of_the_measured_coefficients() {
    let dims = Dimensions::new(8, 3).unwrap();
    let mesh = Arc::new(Mesh::radial_on(-1.0, 1.0, 201, StencilOrder::Fourth).unwrap());
    let bg = CylinderBackground::flat(dims);
    let v = mesh.sample(|t, _| (dims.rate() * t).cosh());
    let op = linearize(mesh.clone(), &bg, &v).unwrap();
    for j in 0..8 {
        let c = op.coefs[100];
        let lam = dims.lambda(j);
        let mu2 = -(c[slot::W] - lam * c[slot::PP]) / c[slot::TT];
        assert!((mu2.sqrt() - indicial_roots(dims, j, IndicialModel::Neck)).abs() < 1e-10);
    }
}

#[test]
fn sphere_profile_linearization_is_the_conjugated_operator() {
    for (n, k) in [(8, 3), (6, 2), (5, 2)] {
        let dims = Dimensions::new(n, k).unwrap();
        let mesh = Arc::new(Mesh::radial_on(-3.0, 3.0, 2001, StencilOrder::Fourth).unwrap());
        let bg = CylinderBackground::flat(dims);
        let sphere = |t: f64| t.cosh().powf(-dims.rate());
        let v = mesh.sample(|t, _| sphere(t));
        let op = linearize(mesh.clone(), &bg, &v).unwrap();
        let weight = (n * (k - 1)) as f64 / (n - 2 * k) as f64;
        let z = |t: f64| (0.7 * t).sin() + 0.3;
        let zpp = |t: f64| -0.49 * (0.7 * t).sin();
        let w: Vec<f64> = (0..mesh.nt())
            .map(|i| sphere(mesh.t(i)).powf(-weight) * z(mesh.t(i)))
            .collect();
        for (j, ode) in conjugated_form(dims, 0.0, 3).iter().enumerate() {
            let mode = op.mode_ode(j, 0, mesh.nt() - 1).unwrap();
            let lw = mode.residual(&w, &vec![0.0; w.len()]);
            for i in (100..1900).step_by(50) {
                let t = mesh.t(i);
                let expect = -dims.neck_constant()
                    * sphere(t).powf(1.0 + weight)
                    * (zpp(t) - ode.q(t) * z(t));
                assert!(
                    (lw[i] - expect).abs() <= 1e-7 * expect.abs().max(1e-3),
                    "({n},{k}) j = {j} t = {t}"
                );
            }
        }
    }
}

#[test]
fn radial_linearization_is_mode_diagonal() {
    let n = 8;
    let dims = Dimensions::new(n, 3).unwrap();
    let nphi = 33;
    let d = angular_matrix(nphi, n);
    let t = UniformGrid::linspace(-1.0, 1.0, 41).unwrap();
    let mesh = Arc::new(Mesh::zonal(t, nphi, StencilOrder::Fourth).unwrap());
    let bg = CylinderBackground::new(dims, mesh.sample(|t, _| 0.05 * (2.0 * t).cos())).unwrap();
    let u = mesh.sample(|t, _| 1.0 + 0.2 / t.cosh());
    let op = linearize(mesh.clone(), &bg, &u).unwrap();
    for j in 0..5 {
        let (mu, psi) = inverse_iteration(&d, -dims.lambda(j));
        assert!(
            (mu + dims.lambda(j)).abs() < 1e-3 * (1.0 + dims.lambda(j)),
            "mode {j}: {mu}"
        );
        let w: Vec<f64> = (0..mesh.len())
            .map(|idx| (0.5 * mesh.t(idx / nphi)).exp() * psi[idx % nphi])
            .collect();
        let lw = op.apply(&w).unwrap();
        for i in 0..mesh.nt() {
            let row = DVector::from_fn(nphi, |m, _| lw[mesh.index(i, m)]);
            let along = row.dot(&psi);
            let leak = (&row - &psi * along).norm();
            assert!(
                leak <= 1e-10 * row.norm(),
                "mode {j} row {i}: leakage {:e}",
                leak / row.norm()
            );
        }
    }
}

#[test]
fn indicial_root_values() {
    let d = Dimensions::new(8, 3).unwrap();
    assert!((indicial_roots(d, 0, IndicialModel::Neck) - 1.0 / 3.0).abs() < 1e-15);
    assert!((indicial_roots(d, 1, IndicialModel::Neck) - 4.0 / 3.0).abs() < 1e-15);
    assert!((indicial_roots(d, 0, IndicialModel::Interior) - 2.0 / 6f64.sqrt()).abs() < 1e-15);
    assert!("neck".parse::<IndicialModel>().unwrap() == IndicialModel::Neck);
    assert!("blowup".parse::<IndicialModel>().is_err());
}

#[test]
fn conjugated_potential_and_far_field() {
    let d = Dimensions::new(8, 3).unwrap();
    let fam = conjugated_form(d, 0.5, 2);
    assert_eq!(fam[0].potential(0.5), 20.0);
    assert_eq!(fam[0].far_field_exponent(), 3.0);
    assert_eq!(fam[1].far_field_exponent(), 4.0);
    assert_eq!(fam[2].far_field_exponent(), 5.0);
}

#[test]
fn bounded_branch_decays_at_least_like_the_removability_rate() {
    let d = Dimensions::new(8, 3).unwrap();
    let floor = (d.n - 2) as f64 / 2.0;
    for (j, ode) in conjugated_form(d, 0.0, 4).iter().enumerate() {
        let m = measure_decay(ode, (5.0, 15.0)).unwrap();
        assert!(-m.slope >= floor - 0.05, "mode {j}: rate {}", -m.slope);
        assert!((-m.slope - ode.far_field_exponent()).abs() < 0.05);
    }
    let c = measure_decay(&DecayOde::Constant { q: 9.0 }, (0.0, 5.0)).unwrap();
    assert!((c.slope + 3.0).abs() < 1e-3);
}

#[test]
fn constant_mode_problem_has_closed_form_solution() {
    // w'' − 4w = 0 on [0, 1], w(0) = 1, w(1) = 0: w = sinh(2(1−t))/sinh 2.
    let grid = UniformGrid::linspace(0.0, 1.0, 401).unwrap();
    let ode = ModeOde::constant(grid, StencilOrder::Fourth, 0.0, -4.0).unwrap();
    let w = ode.solve(&vec![0.0; 401], 1.0, 0.0).unwrap();
    for (i, x) in w.iter().enumerate() {
        let t = i as f64 / 400.0;
        assert!((x - (2.0 * (1.0 - t)).sinh() / 2f64.sinh()).abs() < 1e-10);
    }
    let slope = ode.derivative_at(&w, 0);
    assert!((slope + 2.0 / 2f64.tanh()).abs() < 1e-9);
}

#[test]
fn non_positive_base_point_is_rejected() {
    let dims = Dimensions::new(8, 3).unwrap();
    let mesh = Arc::new(Mesh::radial_on(-1.0, 1.0, 21, StencilOrder::Fourth).unwrap());
    let mut u = vec![1.0; 21];
    u[4] = -0.1;
    assert!(linearize(mesh, &CylinderBackground::flat(dims), &u).is_err());
}

proptest! {
    #[test]
    fn spectral_gap_inequalities(j in 0usize..40, nk in prop::sample::select(vec![(8usize, 3usize), (6, 2), (5, 2), (10, 4), (12, 5), (7, 3)])) {
        let d = Dimensions::new(nk.0, nk.1).unwrap();
        let (n, k) = (nk.0 as f64, nk.1 as f64);
        prop_assert!(indicial_roots(d, j, IndicialModel::Neck) >= (n - 2.0 * k) / (2.0 * k) - 1e-15);
        prop_assert!(indicial_roots(d, j, IndicialModel::Interior) >= (n - 2.0 * k) / (2.0 * k).sqrt() - 1e-15);
        prop_assert!(d.lambda(j + 1) > d.lambda(j));
    }

    #[test]
    fn decay_of_constant_models(q in 0.5..30.0f64) {
        let m = measure_decay(&DecayOde::Constant { q }, (0.0, 4.0)).unwrap();
        prop_assert!((m.slope + q.sqrt()).abs() < 1e-3);
    }
}
