use lnslab_core::dss::{dss_value, DssParams};
use lnslab_core::landau::{landau_velocity, LandauParams};
use lnslab_core::lorentz::{lorentz_quasinorm, weak_l3, LorentzIndex};
use lnslab_core::snapshot;
use lnslab_core::{Grid, VectorField3};
use proptest::prelude::*;

fn field(grid: Grid, vals: &[f64]) -> VectorField3 {
    let m = grid.len();
    let comps = [0, 1, 2].map(|c| (0..m).map(|i| vals[(3 * i + c) % vals.len()]).collect());
    VectorField3::from_components(grid, comps).unwrap()
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quasinorm_is_homogeneous(vals in prop::collection::vec(-5.0..5.0f64, 7..40), s in 0.01..50.0f64) {
        let g = Grid::new(8, 1.5).unwrap();
        let u = field(g, &vals);
        for idx in [LorentzIndex::weak(3.0).unwrap(), LorentzIndex::finite(3.0, 4.0).unwrap()] {
            let a = lorentz_quasinorm(&u, idx);
            let b = lorentz_quasinorm(&u.scaled(s), idx);
            prop_assert!((b - s * a).abs() <= 1e-12 * (s * a).max(1e-300));
        }
    }

    #[test]
    fn weak_norm_below_strong(vals in prop::collection::vec(-5.0..5.0f64, 7..40)) {
        let g = Grid::new(8, 2.0).unwrap();
        let u = field(g, &vals);
        let strong = lorentz_quasinorm(&u, LorentzIndex::finite(3.0, 3.0).unwrap());
        prop_assert!((strong - u.lp_norm(3.0)).abs() <= 1e-12 * strong);
        prop_assert!(weak_l3(&u) <= strong * (1.0 + 1e-12));
    }

    #[test]
    fn snapshot_round_trip(vals in prop::collection::vec(-1e6..1e6f64, 1..30)) {
        let g = Grid::new(8, 3.0).unwrap();
        let u = field(g, &vals);
        prop_assert_eq!(snapshot::decode(&snapshot::encode(&u)).unwrap(), u);
    }

    #[test]
    fn landau_is_minus_one_homogeneous(
        x in prop::array::uniform3(-4.0..4.0f64),
        lam in 0.1..10.0f64,
        a in 1.5..40.0f64,
    ) {
        prop_assume!(norm(x) > 0.05);
        let p = LandauParams::vertical(a).unwrap();
        let u = landau_velocity(x, &p).unwrap();
        let v = landau_velocity(x.map(|c| lam * c), &p).unwrap();
        let e = norm([0, 1, 2].map(|i| lam * v[i] - u[i]));
        prop_assert!(e <= 1e-12 * norm(u));
    }

    #[test]
    fn dss_relation_inside_the_shells(r in 2.0..16.0f64, z in -1.0..1.0f64, phi in 0.0..6.28f64) {
        let p = DssParams::new(2.0, 0.7, 0, 6).unwrap();
        let s = (1.0 - z * z).sqrt();
        let x = [r * s * phi.cos(), r * s * phi.sin(), r * z];
        let u = dss_value(x, &p);
        let v = dss_value(x.map(|c| 2.0 * c), &p);
        let e = norm([0, 1, 2].map(|i| 2.0 * v[i] - u[i]));
        prop_assert!(e <= 1e-12 * norm(u).max(1e-300));
    }
}
