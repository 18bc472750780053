mod common;

use std::sync::{Arc, OnceLock};

use inflation_core::inflation::{InflationScenario, OpId};
use inflation_core::monomial::Algebra;
use inflation_core::oracle::oracle_canon;
use proptest::prelude::*;

use common::*;

fn triangle() -> &'static Arc<InflationScenario> {
    static INF: OnceLock<Arc<InflationScenario>> = OnceLock::new();
    INF.get_or_init(|| inflate(&triangle_scenario(2), vec![2, 2, 2]))
}

fn algebras() -> &'static (Algebra, Algebra) {
    static ALG: OnceLock<(Algebra, Algebra)> = OnceLock::new();
    ALG.get_or_init(|| (Algebra::new(triangle().clone(), false), Algebra::new(triangle().clone(), true)))
}

fn word(max_len: usize) -> impl Strategy<Value = Vec<OpId>> {
    let letters = triangle().alphabet().len() as OpId;
    prop::collection::vec(0..letters, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn canon_matches_oracle(w in word(6)) {
        let (nc, _) = algebras();
        prop_assert_eq!(nc.canon(&w).unwrap(), oracle_canon(triangle(), false, &w).unwrap());
    }

    #[test]
    fn commuting_canon_matches_oracle(w in word(6)) {
        let (_, c) = algebras();
        prop_assert_eq!(c.canon(&w).unwrap(), oracle_canon(triangle(), true, &w).unwrap());
    }

    #[test]
    fn canon_is_idempotent(w in word(8)) {
        let (nc, _) = algebras();
        let once = nc.canon(&w).unwrap();
        if !once.is_zero {
            prop_assert_eq!(nc.canon(&once.word).unwrap(), once);
        }
    }

    #[test]
    fn moment_key_ignores_reversal(w in word(8)) {
        let (nc, _) = algebras();
        let rev: Vec<OpId> = w.iter().rev().copied().collect();
        prop_assert_eq!(nc.moment_key(&w), nc.moment_key(&rev));
    }

    #[test]
    fn canon_is_group_invariant(w in word(6), g in 0usize..8) {
        let (nc, _) = algebras();
        let inf = triangle();
        let perm = &inf.group().elements.as_ref().unwrap()[g];
        let image: Vec<OpId> = w.iter().map(|&o| perm[o as usize]).collect();
        prop_assert_eq!(nc.canon(&w).unwrap(), nc.canon(&image).unwrap());
    }

    #[test]
    fn doubled_letters_collapse(w in word(5), k in 0usize..5) {
        let (nc, _) = algebras();
        let k = k % w.len();
        let mut doubled = w.clone();
        doubled.insert(k, w[k]);
        prop_assert_eq!(nc.canon(&w).unwrap(), nc.canon(&doubled).unwrap());
    }

    #[test]
    fn commuting_canon_is_sorted_set_or_zero(w in word(6)) {
        let (_, c) = algebras();
        let m = c.canon(&w).unwrap();
        if !m.is_zero {
            prop_assert!(m.word.windows(2).all(|p| p[0] != p[1]));
        }
    }
}

#[test]
fn foreign_letters_are_rejected() {
    let (nc, _) = algebras();
    let bad = triangle().alphabet().len() as OpId;
    assert!(nc.canon(&[0, bad]).is_err());
}
