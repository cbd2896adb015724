//! Property tests for the structural invariants: norm decomposition,
//! projection behaviour, and modulus dynamics against the exhaustive
//! oracle on randomly shaped paths.

use proptest::prelude::*;
use snse_core::paths::{modulus_bruteforce_real, modulus_real, RealCadlagPath};
use snse_core::spectral::{BasisTable, Rep, SpectralField};

fn coeff_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_v_squared_decomposes(coeffs in coeff_vec(12)) {
        let basis = BasisTable::build(2, 2, 3.0).unwrap();
        let u = SpectralField::from_coeffs(&basis, coeffs, Rep::Primal).unwrap();
        let v2 = u.norm_v().unwrap().powi(2);
        let h2 = u.norm_h().unwrap().powi(2);
        let g2 = u.seminorm_grad().unwrap().powi(2);
        prop_assert!((v2 - h2 - g2).abs() <= 1e-12 * v2.max(1.0));
    }

    #[test]
    fn projection_contracts_and_is_idempotent(coeffs in coeff_vec(12), n in 1usize..12) {
        let basis = BasisTable::build(2, 2, 3.0).unwrap();
        let u = SpectralField::from_coeffs(&basis, coeffs, Rep::Primal).unwrap();
        let p = u.project_pn(n).unwrap();
        prop_assert!(p.norm_h().unwrap() <= u.norm_h().unwrap() * (1.0 + 1e-15) + 1e-300);
        let pp = p.project_pn(n).unwrap();
        prop_assert_eq!(p.coeffs(), pp.coeffs());
    }

    #[test]
    fn modulus_agrees_with_oracle_and_shrinks_with_delta(
        steps in prop::collection::vec((0.02f64..0.2, -1.0f64..1.0), 0..7),
        deltas in prop::collection::vec(0.05f64..0.9, 2..4),
    ) {
        let mut bp = vec![(0.0, 0.0)];
        let mut t = 0.0;
        let mut v = 0.0;
        for (dt, dv) in steps {
            t += dt;
            v += dv;
            if t < 1.0 {
                bp.push((t, v));
            }
        }
        let path = RealCadlagPath::new(bp, 1.0).unwrap();
        let mut sorted = deltas.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut prev = f64::INFINITY;
        for d in sorted {
            let w = modulus_real(&path, d).unwrap();
            let bf = modulus_bruteforce_real(&path, d).unwrap();
            prop_assert_eq!(w.to_bits(), bf.to_bits());
            prop_assert!(w <= prev + 1e-15);
            prev = w;
        }
    }
}
