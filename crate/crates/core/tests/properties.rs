use multicorr_core::correlations::{enumerate_cuts, is_product, mutual_information, PRODUCT_TOL};
use multicorr_core::covariance::{covariance, LocalObservable};
use multicorr_core::measurement::{
    distribution_factorizes, ic_povm_measurement, measure, reconstruct_from_ic,
};
use multicorr_core::optimize::direction;
use multicorr_core::states::{random_product_quantum, random_state};
use multicorr_core::QubitSet;
use proptest::prelude::*;

fn angles(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ptrace_of_tensor(seed_a in any::<u64>(), seed_b in any::<u64>(), na in 1usize..=2, nb in 1usize..=2) {
        let a = random_state(na, seed_a).unwrap();
        let b = random_state(nb, seed_b).unwrap();
        let back = a.tensor(&b).unwrap().partial_trace(&QubitSet::new((0..na).collect()).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&a) < 1e-10);
    }

    #[test]
    fn mutual_information_symmetric(seed in any::<u64>(), n in 2usize..=4, pick in any::<prop::sample::Index>()) {
        let rho = random_state(n, seed).unwrap();
        let cuts = enumerate_cuts(n).unwrap();
        let cut = &cuts[pick.index(cuts.len())];
        let ab = mutual_information(&rho, cut).unwrap();
        let ba = mutual_information(&rho, &cut.swapped()).unwrap();
        prop_assert!(ab >= -1e-9);
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn product_states_have_no_covariance(seed in any::<u64>(), dirs in angles(3)) {
        let rho = random_product_quantum(3, seed).unwrap();
        let dirs: Vec<[f64; 3]> = dirs.into_iter().map(direction).collect();
        let cov = covariance(&rho, &LocalObservable::from_directions(&dirs).unwrap()).unwrap();
        prop_assert!(cov.abs() < 1e-12);
    }

    #[test]
    fn ic_tomography_roundtrip_and_lemma(seed in any::<u64>(), n in 1usize..=3) {
        let rho = random_state(n, seed).unwrap();
        let d = measure(&rho, &ic_povm_measurement(n)).unwrap();
        prop_assert!(reconstruct_from_ic(&d).unwrap().max_abs_diff(&rho) < 1e-8);
        if n >= 2 {
            for cut in enumerate_cuts(n).unwrap() {
                prop_assert_eq!(
                    distribution_factorizes(&d, &cut, PRODUCT_TOL).unwrap(),
                    is_product(&rho, &cut, PRODUCT_TOL).unwrap()
                );
            }
        }
    }
}
