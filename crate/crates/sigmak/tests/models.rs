//! Product models, their linearization at `u ≡ 1` and non-degeneracy.

use proptest::prelude::*;
use sigmak::models::{
    factor_spectrum, homogeneous_linearization, nondegeneracy_scan, product_schouten, Factor,
    FactorKind, ProductModel, TorusSpectrum,
};
use sigmak::symfun::{binomial, sigma, Dimensions};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn s6_t2_schouten_spectrum_and_sigmas() {
    let spec = product_schouten(&ProductModel::s6_t2()).unwrap();
    let blocks = spec.blocks();
    assert!(close(blocks[0].0, 10.0 / 21.0) && blocks[0].1 == 6);
    assert!(close(blocks[1].0, -5.0 / 14.0) && blocks[1].1 == 2);
    let q = 5.0 / 42.0;
    assert!(close(sigma(&spec, 1).unwrap(), 18.0 * q));
    assert!(close(sigma(&spec, 2).unwrap(), 105.0 * q * q));
    assert!(close(sigma(&spec, 3).unwrap(), 56.0 * q * q * q));
}

#[test]
fn s6_t2_linearization() {
    let lin = homogeneous_linearization(&ProductModel::s6_t2(), 3).unwrap();
    let b = lin.b.blocks();
    assert!(close(b[0].0, 2.0 / 3.0) && close(b[1].0, -0.5));
    assert!(close(lin.blocks[0].newton, 49.0 / 36.0));
    assert!(close(lin.blocks[1].newton, 14.0 / 3.0));
    assert!(close(lin.zero_order, -14.0 / 3.0));
    assert!(close(lin.coefficient_ratio(), 7.0 / 24.0));
    assert!(close(lin.unit_constant(), 5.0 / 21.0));
}

#[test]
fn s6_t2_is_non_degenerate_for_both_constants_and_torus_spectra() {
    let lin = homogeneous_linearization(&ProductModel::s6_t2(), 3).unwrap();
    for l in [lin.clone(), lin.with_unit_constant(25.0 / 126.0)] {
        for torus in [TorusSpectrum::Integers, TorusSpectrum::Lattice] {
            let scan = nondegeneracy_scan(&l, torus, 40);
            assert!(!scan.degenerate);
            // Every sphere mode j ≥ 1 would need a negative torus eigenvalue.
            for row in scan.rows.iter().filter(|r| r.modes[0] >= 1) {
                assert!(row.required < 0.0);
            }
            let j0 = scan.rows.iter().find(|r| r.modes[0] == 0).unwrap();
            assert!(j0.required > 0.0 && j0.gap > 1e-3);
        }
    }
}

#[test]
fn round_sphere_linearization_matches_closed_form() {
    for n in 3..=12 {
        for k in 1..=n {
            if 2 * k >= n {
                continue;
            }
            let lin =
                homogeneous_linearization(&ProductModel::round_sphere(n).unwrap(), k).unwrap();
            let expect =
                binomial(n - 1, k - 1) * ((n - 2 * k) as f64 / (4 * k) as f64).powi(k as i32 - 1);
            assert!(close(lin.blocks[0].laplacian, expect), "({n},{k})");
            assert!(close(lin.unit_constant(), n as f64), "({n},{k})");
            assert!(close(lin.metric_scale, 1.0));
        }
    }
    let lin = homogeneous_linearization(&ProductModel::round_sphere(8).unwrap(), 3).unwrap();
    assert!(close(lin.blocks[0].laplacian, 7.0 / 12.0));
}

#[test]
fn round_sphere_is_degenerate_and_projective_space_is_not() {
    for n in [5, 8] {
        let s = homogeneous_linearization(&ProductModel::round_sphere(n).unwrap(), 2).unwrap();
        let p = homogeneous_linearization(&ProductModel::projective_space(n).unwrap(), 2).unwrap();
        // Direct oracle: the kernel equation is −Δw = n w on the factor.
        let sphere_hit = factor_spectrum(&s.blocks[0].factor, TorusSpectrum::Integers, 10)
            .iter()
            .any(|&(_, l)| (l - s.unit_constant()).abs() < 1e-9);
        let rp_hit = factor_spectrum(&p.blocks[0].factor, TorusSpectrum::Integers, 10)
            .iter()
            .any(|&(_, l)| (l - p.unit_constant()).abs() < 1e-9);
        assert!(sphere_hit && !rp_hit, "n = {n}");
        assert!(nondegeneracy_scan(&s, TorusSpectrum::Integers, 10).degenerate);
        assert!(!nondegeneracy_scan(&p, TorusSpectrum::Integers, 10).degenerate);
    }
}

#[test]
fn flat_torus_has_vanishing_schouten_tensor() {
    let t = ProductModel::new(vec![Factor {
        kind: FactorKind::FlatTorus,
        dim: 4,
        radius: 1.0,
    }])
    .unwrap();
    let spec = product_schouten(&t).unwrap();
    for j in 1..=4 {
        assert_eq!(sigma(&spec, j).unwrap(), 0.0);
    }
    assert!(homogeneous_linearization(&t, 1).is_err());
}

#[test]
fn round_sphere_sigmas() {
    for n in [5, 8, 11] {
        let spec = product_schouten(&ProductModel::round_sphere(n).unwrap()).unwrap();
        for k in 1..=n {
            assert!(close(
                sigma(&spec, k).unwrap(),
                binomial(n, k) * 0.5_f64.powi(k as i32)
            ));
        }
        assert!(close(
            Dimensions::new(n, 2).unwrap().sphere_sigma(),
            binomial(n, 2) / 4.0
        ));
    }
}

#[test]
fn invalid_models_are_rejected() {
    assert!(ProductModel::new(vec![]).is_err());
    assert!(ProductModel::new(vec![Factor {
        kind: FactorKind::RoundSphere,
        dim: 2,
        radius: 1.0
    }])
    .is_err());
    assert!(ProductModel::new(vec![Factor {
        kind: FactorKind::RoundSphere,
        dim: 4,
        radius: -1.0
    }])
    .is_err());
    assert!(ProductModel::s6_t2().rescaled(0.0).is_err());
}

#[test]
fn torus_spectra() {
    let f = Factor {
        kind: FactorKind::FlatTorus,
        dim: 2,
        radius: 1.0,
    };
    let ints = factor_spectrum(&f, TorusSpectrum::Integers, 4);
    let lattice = factor_spectrum(&f, TorusSpectrum::Lattice, 4);
    assert_eq!(ints.len(), 5);
    assert_eq!(
        lattice.iter().map(|x| x.0).collect::<Vec<_>>(),
        vec![0, 1, 2, 4]
    );
    let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
    assert!(close(ints[3].1, 3.0 * four_pi2));
}

proptest! {
    #[test]
    fn sigmas_are_invariant_under_factor_reordering(d1 in 1usize..5, d2 in 1usize..5, r1 in 0.3..3.0f64, r2 in 0.3..3.0f64) {
        prop_assume!(d1 + d2 >= 3);
        let a = Factor { kind: FactorKind::RoundSphere, dim: d1.max(2), radius: r1 };
        let b = Factor { kind: FactorKind::FlatTorus, dim: d2, radius: r2 };
        let x = product_schouten(&ProductModel::new(vec![a, b]).unwrap()).unwrap();
        let y = product_schouten(&ProductModel::new(vec![b, a]).unwrap()).unwrap();
        for j in 1..=(a.dim + d2) {
            let (sx, sy) = (sigma(&x, j).unwrap(), sigma(&y, j).unwrap());
            prop_assert!((sx - sy).abs() <= 1e-12 * sx.abs().max(1.0));
        }
    }

    #[test]
    fn laplacian_ratio_is_scale_invariant(idx in 0usize..3) {
        let c = [0.5, 1.0, 21.0 / 5.0][idx];
        let lin = homogeneous_linearization(&ProductModel::s6_t2().rescaled(c).unwrap(), 3).unwrap();
        prop_assert!(close(lin.coefficient_ratio(), 7.0 / 24.0));
        prop_assert!(close(lin.zero_order, -14.0 / 3.0));
    }
}
