use cqcode::channel::{
    hayashi_exponent, lemma1_maximizer, lemma1_objective, lemma1_rhs, mutual_information, phi, universal_exponent,
    ExponentOptions,
};
use cqcode::code::{build_codebook, build_decoder_with, error_probability, threshold_projection};
use cqcode::combinatorics::{
    all_sequences, conditional_type_class, conditional_types_of, entropy, enum_type_class, enum_types, enum_young,
    type_class_size, Sequence,
};
use cqcode::operator::{conjugate_by_permutation, permutation_unitary, positive_part_projector, CMatrix, Permutation};
use cqcode::random::{
    random_channel, random_density, random_distribution, random_hermitian, random_psd, random_pure, Streams,
};
use cqcode::schur_weyl::{sorting_permutation, UniversalStates};
use cqcode::Limits;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashSet;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composites_stay_hermitian(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = Streams::new(seed).stream("herm");
        let a = random_hermitian(dim, &mut rng);
        let b = random_hermitian(dim, &mut rng);
        let u = cqcode::random::random_unitary(dim, &mut rng);
        for op in [a.add(&b), a.sub(&b).scale(0.3), a.sandwich(&b), a.conjugate(&u)] {
            prop_assert!(op.hermiticity_residue() <= 1e-10);
        }
    }

    #[test]
    fn permutation_unitary_is_a_homomorphism(n in 1usize..=6, s_seed in any::<u64>()) {
        let mut rng = Streams::new(s_seed).stream("perm");
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let (s, t) = (Permutation::new(a).unwrap(), Permutation::new(b).unwrap());
        let lim = Limits::default();
        let lhs = permutation_unitary(&s, 2, &lim).unwrap() * permutation_unitary(&t, 2, &lim).unwrap();
        let rhs = permutation_unitary(&s.compose(&t), 2, &lim).unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) == 0.0);
    }

    #[test]
    fn positive_part_commutes(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = Streams::new(seed).stream("pos");
        let a = random_hermitian(dim, &mut rng);
        let p = positive_part_projector(&a, 1e-9).unwrap();
        prop_assert!(p.commutator_norm(&a) <= 1e-9);
        prop_assert!(p.idempotence_residue() <= 1e-9);
    }

    #[test]
    fn phi_vanishes_at_zero(seed in any::<u64>(), k in 1usize..4, d in 1usize..4) {
        let mut rng = Streams::new(seed).stream("phi0");
        let w = random_channel(k, d, &mut rng);
        let p = random_distribution(k, &mut rng);
        prop_assert!(phi(&w, &p, 0.0).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn lemma1_dominates(seed in any::<u64>(), dim in 1usize..=8, t in 0.05f64..0.95) {
        let mut rng = Streams::new(seed).stream("lemma");
        let x = random_psd(dim, 1 + dim / 2, &mut rng);
        let rhs = lemma1_rhs(&x, t).unwrap();
        for i in 0..50 {
            let sigma = if i % 2 == 0 { random_density(dim, &mut rng) } else { random_pure(dim, &mut rng) };
            prop_assert!(lemma1_objective(&x, &sigma, t).unwrap() <= rhs + 1e-9);
        }
        let star = lemma1_maximizer(&x, t).unwrap();
        prop_assert!((lemma1_objective(&x, &star, t).unwrap() - rhs).abs() <= 1e-8 * rhs.max(1.0));
    }

    #[test]
    fn conditional_state_ignores_choice_of_sorting(seed in any::<u64>(), n in 1usize..=5) {
        let lim = Limits::default();
        let mut rng = Streams::new(seed).stream("rho_x");
        let x = Sequence::new((0..n).map(|_| rng.random_range(1..=3)).collect(), 3).unwrap();
        let states = UniversalStates::new(n, 2, &lim).unwrap();
        let base = sorting_permutation(&x);
        // any stabilizer element composed after the canonical map also sorts x
        let stab = cqcode::combinatorics::stabilizer_subgroup(&x, 3, &lim).unwrap();
        let other = stab[rng.random_range(0..stab.len())].compose(&base);
        let a = states.conditional_with(&x, &base).unwrap();
        let b = states.conditional_with(&x, &other).unwrap();
        prop_assert!(a.rho.op().max_abs_diff(b.rho.op()) <= 1e-10);
    }

    #[test]
    fn conditional_state_commutes_with_output(seed in any::<u64>(), n in 1usize..=4) {
        let lim = Limits::default();
        let mut rng = Streams::new(seed).stream("comm");
        let w = random_channel(2, 2, &mut rng);
        let x = Sequence::new((0..n).map(|_| rng.random_range(1..=2)).collect(), 2).unwrap();
        let states = UniversalStates::new(n, 2, &lim).unwrap();
        let rho_x = states.conditional(&x).unwrap();
        prop_assert!(rho_x.rho.op().commutator_norm(w.output(&x, &lim).unwrap().op()) <= 1e-9);
    }

    #[test]
    fn projector_relabels_with_the_word(s in (1usize..=3).prop_flat_map(perm_strategy), seed in any::<u64>(), c in -1.0f64..2.0) {
        let n = s.n();
        let lim = Limits::default();
        let mut rng = Streams::new(seed).stream("cov");
        let x = Sequence::new((0..n).map(|_| rng.random_range(1..=2)).collect(), 2).unwrap();
        let states = UniversalStates::new(n, 2, &lim).unwrap();
        let p = threshold_projection(&states, &x, c.exp()).unwrap();
        let moved = threshold_projection(&states, &x.permuted(&s), c.exp()).unwrap();
        prop_assert!(conjugate_by_permutation(&p, &s, 2, &lim).unwrap().max_abs_diff(&moved) <= 1e-9);
    }

    #[test]
    fn decomposition_bounds_error(seed in any::<u64>(), n in 2usize..=4, c in -1.0f64..3.0) {
        let lim = Limits::default();
        let mut rng = Streams::new(seed).stream("eq");
        let w = random_channel(2, 2, &mut rng);
        let p = cqcode::combinatorics::nearest_type(&[0.5, 0.5], n).unwrap();
        let cb = build_codebook(&p, 2, seed, 16, &lim).unwrap();
        let states = UniversalStates::new(n, 2, &lim).unwrap();
        let dec = build_decoder_with(&cb, c.exp(), &states).unwrap();
        let rep = error_probability(&dec, &w).unwrap();
        prop_assert!((0.0..=1.0).contains(&rep.epsilon));
        prop_assert!(rep.epsilon <= rep.decomposition_bound + 1e-9);
    }

    #[test]
    fn exponents_ordered_and_positive_below_capacity(seed in any::<u64>(), rate_frac in 0.0f64..1.0) {
        let mut rng = Streams::new(seed).stream("exp");
        let w = random_channel(2, 2, &mut rng);
        let p = random_distribution(2, &mut rng);
        let opts = ExponentOptions { grid_points: 51, ..ExponentOptions::default() };
        let info = mutual_information(&w, &p).unwrap();
        let rate = rate_frac * info * 1.5;
        let u = universal_exponent(&w, &p, rate, &opts).unwrap();
        let h = hayashi_exponent(&w, &p, rate, &opts).unwrap();
        prop_assert!(h.value >= u.value - 1e-9);
        if rate <= info - 0.01 {
            prop_assert!(u.value > 0.0);
        }
    }
}

#[test]
fn young_and_type_counts_are_polynomially_bounded() {
    for n in 0..=12 {
        for d in 1..=4usize {
            let young = enum_young(n, d).len() as u128;
            let types = enum_types(n, d);
            assert!(young <= types.len() as u128);
            assert!(types.len() as u128 <= ((n + 1) as u128).pow(d as u32 - 1));
            let mut total = 0u128;
            for p in &types {
                let size = type_class_size(p);
                total += size;
                let lower = (n as f64 * entropy(p)).exp() / ((n + 1) as f64).powi(d as i32);
                assert!(lower <= size as f64 * (1.0 + 1e-12), "n={n} p={p}");
            }
            assert_eq!(total, (d as u128).pow(n as u32));
        }
    }
}

#[test]
fn conditional_classes_partition_the_output_space() {
    let lim = Limits::default();
    for n in 0..=5 {
        for k in 1..=2 {
            for x in all_sequences(n, k, &lim).unwrap() {
                for l in 1..=3 {
                    let mut seen = HashSet::new();
                    for v in conditional_types_of(&x, k, l) {
                        for y in conditional_type_class(&x, &v, k, &lim).unwrap() {
                            assert!(seen.insert(y));
                        }
                    }
                    assert_eq!(seen.len(), l.pow(n as u32));
                }
            }
        }
    }
}

#[test]
fn type_class_enumeration_matches_size() {
    let lim = Limits::default();
    for n in 0..=7 {
        for p in enum_types(n, 3) {
            let class: Vec<Sequence> = enum_type_class(&p, &lim).unwrap().collect();
            assert_eq!(class.len() as u128, type_class_size(&p));
            assert!(class.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
