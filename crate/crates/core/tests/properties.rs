use std::sync::Arc;

use proptest::prelude::*;

use plap_core::eigen::first_eigen;
use plap_core::field::{read_field, write_field};
use plap_core::functional::{p_energy, rayleigh};
use plap_core::ppoisson::{torsion_function, SolveOptions};
use plap_core::{EigenOptions, GridDomain, Method, ScalarField};

fn line() -> Arc<GridDomain> {
    Arc::new(GridDomain::interval(41, 1.0).unwrap())
}

fn field(values: Vec<f64>) -> ScalarField {
    ScalarField::new(line(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_p_homogeneous(v in prop::collection::vec(-1.0f64..1.0, 39), t in -3.0f64..3.0, p in 1.2f64..5.0) {
        let u = field(v);
        let a = p_energy(&u.scaled(t), p).unwrap();
        let b = t.abs().powf(p) * p_energy(&u, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn rayleigh_quotient_bounded_below_by_first_eigenvalue(v in prop::collection::vec(-1.0f64..1.0, 39), p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        let u = field(v);
        prop_assume!(u.max_abs() > 1e-3);
        let lambda = first_eigen(&line(), p, Method::Descent, &EigenOptions::default()).unwrap().lambda;
        prop_assert!(rayleigh(&u, p).unwrap() >= lambda * (1.0 - 1e-9));
    }
}

#[test]
fn torsion_function_of_the_square() {
    // Maximum of the p=2 torsion function of the unit square, 0.0736713...
    let d = Arc::new(GridDomain::unit_square(65).unwrap());
    let w = torsion_function(&d, 2.0, &SolveOptions::default()).unwrap();
    assert!(w.converged);
    let max = w.solution.max_abs();
    assert!((max - 0.0736713).abs() < 1e-3 * 0.0736713, "{max}");
}

#[test]
fn first_eigenfield_survives_a_file_round_trip() {
    let d = Arc::new(GridDomain::unit_square(9).unwrap());
    let pair = first_eigen(&d, 2.5, Method::Inverse, &EigenOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = write_field(&dir.path().join("u.f64"), &pair.field, "test").unwrap();
    let (back, side) = read_field(&path, d.clone()).unwrap();
    assert_eq!(back.values(), pair.field.values());
    assert_eq!(side.active_count, d.active_count());
    let other = Arc::new(GridDomain::unit_square(11).unwrap());
    assert!(read_field(&path, other).is_err());
}
