mod common;

use std::collections::HashMap;

use permproj_core::chain::{self, EquiMode, InvolutionPermutation, Permutation, ProbabilityVector, StochasticMatrix};
use permproj_core::divergence;
use permproj_core::projection::{self, ProjectionSchedule};
use permproj_core::spin::{ModelKind, SpinConfig, SpinInvolution, SpinModel, StateInvolution};
use permproj_core::tuning::{self, AdaptiveState, EquiClassIndex, PairMap};
use permproj_core::{rng, Error};
use rand::Rng;

#[test]
fn enumeration_examples() {
    let count = |pi: &ProbabilityVector| {
        let idx = EquiClassIndex::from_pi(pi, EquiMode::Exact);
        tuning::enumerate_involutions(&idx, 10_000).unwrap().count()
    };
    assert_eq!(count(&ProbabilityVector::uniform(2)), 2);
    assert_eq!(count(&ProbabilityVector::uniform(3)), 4);
    assert_eq!(count(&ProbabilityVector::new(vec![0.25, 0.25, 0.5], 1e-12).unwrap()), 2);
    // Classes of sizes 3 and 2: T(3) * T(2).
    assert_eq!(count(&ProbabilityVector::new(vec![0.1, 0.1, 0.1, 0.35, 0.35], 1e-12).unwrap()), 8);
    for n in 0..8 {
        assert_eq!(tuning::involution_number(n), common::all_involutions(n).len() as u128);
    }
    let idx = EquiClassIndex::from_pi(&ProbabilityVector::uniform(8), EquiMode::Exact);
    assert_eq!(idx.involution_count(), 764);
    assert!(matches!(tuning::enumerate_involutions(&idx, 100), Err(Error::CapExceeded { count: 764, cap: 100 })));
}

#[test]
fn enumeration_is_complete_and_distinct() {
    for seed in 0..20 {
        let pi = common::tied_pi(7, seed);
        let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
        let got: Vec<Vec<usize>> = tuning::enumerate_involutions(&idx, 10_000).unwrap().map(|q| q.mapping().to_vec()).collect();
        let mut want: Vec<Vec<usize>> =
            common::all_involutions(7).into_iter().filter(|m| (0..7).all(|x| pi[x] == pi[m[x]])).collect();
        let mut sorted = got.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), got.len());
        want.sort();
        assert_eq!(sorted, want);
        assert_eq!(got.len() as u128, idx.involution_count());
        assert!(got[0].iter().enumerate().all(|(x, &y)| x == y));
        for m in &got {
            chain::involution_from_map(m.clone(), &pi, EquiMode::Exact).unwrap();
        }
    }
}

#[test]
fn hamiltonian_classes() {
    let idx = EquiClassIndex::from_hamiltonian(&[0, -1, 0, 2, -1, 0], 1.5).unwrap();
    assert_eq!(idx.class_of(0), idx.class_of(2));
    assert_eq!(idx.class_of(0), idx.class_of(5));
    assert_eq!(idx.class_of(1), idx.class_of(4));
    assert_ne!(idx.class_of(0), idx.class_of(1));
    assert_eq!(idx.involution_count(), 4 * 2);
}

#[test]
fn assignment_exact_examples() {
    let (p, q, pi) = common::three_point();
    let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
    let (best, score) = tuning::assignment_exact(&p, &idx, 100).unwrap();
    assert_eq!(best.mapping(), q.mapping());
    let big_pi = chain::stationary_matrix(&pi);
    let full = divergence::frobenius_dist(p.matrix(), big_pi.matrix(), &pi).unwrap().powi(2);
    assert!((score - full).abs() < 1e-15);

    // A kernel fixed by every projection: the identity wins with score 0.
    let u = ProbabilityVector::uniform(4);
    let idx = EquiClassIndex::from_pi(&u, EquiMode::Exact);
    let (best, score) = tuning::assignment_exact(&chain::stationary_matrix(&u), &idx, 100).unwrap();
    assert!(best.is_identity());
    assert_eq!(score, 0.0);
    assert!(matches!(tuning::assignment_exact(&StochasticMatrix::identity(3), &idx, 100), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn assignment_exact_matches_brute_force_on_five_states() {
    let pi = ProbabilityVector::uniform(5);
    let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
    let all = common::all_involutions(5);
    assert_eq!(all.len(), 26);
    for seed in 0..10 {
        let p = common::stationary(&pi, seed);
        let scored: Vec<(f64, Vec<usize>)> = all
            .iter()
            .map(|m| {
                let oracle = common::project_oracle(p.matrix(), m, pi.as_slice());
                (divergence::frobenius_dist(p.matrix(), &oracle, &pi).unwrap().powi(2), m.clone())
            })
            .collect();
        let top = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        let want = scored.iter().filter(|s| (s.0 - top).abs() <= 1e-12).map(|s| s.1.clone()).min().unwrap();
        let (best, score) = tuning::assignment_exact(&p, &idx, 100).unwrap();
        assert_eq!(best.mapping(), want.as_slice(), "seed {seed}");
        assert!((score - top).abs() <= 1e-12);
    }
}

#[test]
fn local_search_examples() {
    let pi = common::tied_pi(6, 1);
    let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
    let p = common::stationary(&pi, 1);
    let r = tuning::assignment_local_search(&p, &idx, 0, 5).unwrap();
    assert!(r.permutation.is_identity());
    assert_eq!(r.score, tuning::assignment_score(&p, &InvolutionPermutation::identity(6), &pi).unwrap());
    let a = tuning::assignment_local_search(&p, &idx, 200, 5).unwrap();
    let b = tuning::assignment_local_search(&p, &idx, 200, 5).unwrap();
    assert_eq!(a.permutation, b.permutation);
    assert_eq!(a.accepted_scores, b.accepted_scores);
    assert!(a.accepted_scores.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn local_search_reaches_ninety_percent_of_exact() {
    for seed in 0..20u64 {
        let n = 6 + (seed % 3) as usize;
        let pi = common::tied_pi(n, seed);
        let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
        let p = common::stationary(&pi, seed);
        let (_, exact) = tuning::assignment_exact(&p, &idx, 100_000).unwrap();
        let found = tuning::assignment_local_search(&p, &idx, 500, seed).unwrap();
        assert!(found.score >= 0.9 * exact - 1e-15, "seed {seed}: {} vs {exact}", found.score);
        chain::involution_from_map(found.permutation.mapping().to_vec(), &pi, EquiMode::Exact).unwrap();
    }
}

#[test]
fn joint_local_search_improves_on_single() {
    let pi = ProbabilityVector::uniform(5);
    let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
    let p = common::reversible(&pi, 3);
    let (qs, score) = tuning::assignment_local_search_multi(&p, &idx, 2, 3, 300, 3).unwrap();
    assert_eq!(qs.len(), 2);
    let (_, single) = tuning::assignment_exact(&p, &idx, 100).unwrap();
    // With one permutation the objective equals the single-projection score.
    let (_, one) = tuning::assignment_local_search_multi(&p, &idx, 1, 1, 300, 3).unwrap();
    assert!((one - single).abs() < 1e-12);
    assert!(score >= single - 1e-12);
    assert!(matches!(tuning::assignment_local_search_multi(&p, &idx, 0, 1, 10, 3), Err(Error::EmptySchedule)));
}

fn argmax_set(xs: &[f64]) -> Vec<usize> {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..xs.len()).filter(|&i| (xs[i] - top).abs() <= 1e-12 * top.abs().max(1.0)).collect()
}

#[test]
fn argmax_and_argmin_sets_coincide() {
    for seed in 0..30u64 {
        let n = 4 + (seed % 4) as usize;
        let pi = common::tied_pi(n, seed);
        let idx = EquiClassIndex::from_pi(&pi, EquiMode::Exact);
        let p = if seed % 2 == 0 { common::reversible(&pi, seed) } else { common::stationary(&pi, seed) };
        let big_pi = chain::stationary_matrix(&pi);
        let (mut f_move, mut f_left, mut k_move, mut k_left) = (vec![], vec![], vec![], vec![]);
        for q in tuning::enumerate_involutions(&idx, 10_000).unwrap() {
            let pb = projection::project(&p, &q, &pi).unwrap();
            f_move.push(divergence::frobenius_dist(p.matrix(), pb.matrix(), &pi).unwrap().powi(2));
            f_left.push(-divergence::frobenius_dist(pb.matrix(), big_pi.matrix(), &pi).unwrap().powi(2));
            k_move.push(divergence::kl_rate(&p, &pb, &pi).unwrap().unwrap());
            k_left.push(-divergence::kl_rate(&pb, &big_pi, &pi).unwrap().unwrap());
        }
        assert_eq!(argmax_set(&f_move), argmax_set(&f_left), "seed {seed}");
        assert_eq!(argmax_set(&k_move), argmax_set(&k_left), "seed {seed}");
    }
}

#[test]
fn adaptive_examples() {
    let mut t = AdaptiveState::<u32>::new(1).unwrap();
    assert_eq!(tuning::adaptive_record(&7, 3, &mut t), None);
    assert_eq!(t.permutation().n_pairs(), 0);
    assert_eq!(tuning::adaptive_record(&9, 5, &mut t), None);
    assert_eq!(tuning::adaptive_record(&11, 3, &mut t), Some((7, 11)));
    assert_eq!(*t.permutation().image(&7), 11);
    assert_eq!(*t.permutation().image(&11), 7);
    assert!(t.permutation().is_fixed(&9));
    // Revisits do not re-enter the ledger.
    assert_eq!(tuning::adaptive_record(&7, 3, &mut t), None);
    assert_eq!(tuning::adaptive_record(&13, 5, &mut t), Some((9, 13)));
    assert!(AdaptiveState::<u32>::new(0).is_err());

    // Pairs wait for the epoch boundary.
    let mut t = AdaptiveState::<u32>::new(4).unwrap();
    for (s, e) in [(1, 0), (2, 0), (3, 1)] {
        assert_eq!(t.record(&s, e), None);
    }
    assert_eq!(t.record(&4, 1), Some((1, 2)));
}

#[test]
fn adaptive_contract_over_many_updates() {
    let energy = |s: u32| ((s * 7919) % 13) as i64;
    let mut r = rng::from_seed(42);
    let mut t = AdaptiveState::<u32>::new(5).unwrap();
    let mut seen: HashMap<u32, u32> = HashMap::new();
    for _ in 0..100_000 {
        let s = r.random_range(0..400u32);
        if let Some((a, b)) = t.record(&s, energy(s)) {
            assert_eq!(energy(a), energy(b));
            assert!(!seen.contains_key(&a) && !seen.contains_key(&b));
            seen.insert(a, b);
            seen.insert(b, a);
        }
        for (x, y) in &seen {
            if *x == s {
                assert_eq!(t.permutation().image(x), y);
            }
        }
    }
    assert_eq!(t.permutation().n_pairs() * 2, seen.len());
    for (a, b) in t.permutation().iter() {
        assert_eq!(seen[a], *b);
        assert_eq!(*t.permutation().image(b), *a);
        assert_eq!(energy(*a), energy(*b));
    }
}

#[test]
fn pair_map_rejects_remapping() {
    let mut m = PairMap::<u8>::new();
    m.insert_pair(1, 2).unwrap();
    assert!(m.insert_pair(2, 3).is_err());
    assert!(m.insert_pair(4, 4).is_err());
    assert_eq!(m.n_pairs(), 1);
}

#[test]
fn exploratory_build_on_small_ising() {
    let model = SpinModel::ising(6).unwrap();
    let start = SpinConfig::constant(6, 1);
    let none = tuning::exploratory_build(&model, &start, 0.1, 0, 1, 1, 50).unwrap();
    let SpinInvolution::Pairs(m) = &none[0] else { panic!("expected explicit pairs") };
    assert_eq!(m.n_pairs(), 0);

    let codec = model.enumerate_configs().unwrap();
    let beta = 1.0;
    let (p, pi) = codec.mh_kernel(&model, beta).unwrap();
    let runs = tuning::exploratory_build(&model, &start, 0.1, 3000, 7, 3, 50).unwrap();
    let mut qs = Vec::new();
    for sigma in &runs {
        let SpinInvolution::Pairs(m) = sigma else { panic!("expected explicit pairs") };
        assert!(m.n_pairs() > 0);
        for (a, b) in m.iter() {
            let (x, y) = (SpinConfig::from_key(*a, 6), SpinConfig::from_key(*b, 6));
            assert_eq!(model.hamiltonian(&x), model.hamiltonian(&y));
        }
        let q = codec.involution(&model, sigma).unwrap();
        qs.push(chain::involution_from_map(q.mapping().to_vec(), &pi, EquiMode::Exact).unwrap());
    }
    let sched = ProjectionSchedule::new(qs).unwrap();
    let run = projection::alternating_projections(&p, &sched, &pi, projection::DEFAULT_MAX_SWEEPS, projection::DEFAULT_EPS).unwrap();
    assert!(run.converged);
    let lim = run.limit();
    assert!(chain::is_reversible(lim, &pi, 1e-12).reversible);
    for q in sched.involutions() {
        let star = chain::adjoint(lim, &pi).unwrap();
        assert!(common::max_abs(star.matrix(), &chain::conjugate(lim.matrix(), q)) < 1e-8);
    }
    assert!(run.stats.last().unwrap().kl_to_pi <= run.stats[0].kl_to_pi);
}

#[test]
fn symmetry_involution_contract() {
    for kind in [ModelKind::IsingLine, ModelKind::EdwardsAnderson, ModelKind::BlumeCapel] {
        let model = SpinModel::new(kind, 50, 3).unwrap();
        let sigma = tuning::symmetry_involution(&model);
        let mut r = rng::from_seed(11);
        for _ in 0..10_000 {
            let x = model.random_config(&mut r);
            let mut y = x.clone();
            sigma.apply(&mut y);
            assert_eq!(model.hamiltonian(&x), model.hamiltonian(&y));
            sigma.apply(&mut y);
            assert_eq!(x, y);
        }
        for s in [1i8, -1] {
            let mut c = SpinConfig::constant(50, s);
            sigma.apply(&mut c);
            assert_eq!(c, SpinConfig::constant(50, s));
        }
        let mut mixed = SpinConfig::constant(50, 1);
        let mut spins = mixed.spins().to_vec();
        spins[0] = -1;
        mixed = SpinConfig::new(spins.clone());
        sigma.apply(&mut mixed);
        assert_eq!(mixed.spins(), spins.iter().map(|s| -s).collect::<Vec<i8>>().as_slice());
    }
    let small = SpinModel::blume_capel(4).unwrap();
    let codec = small.enumerate_configs().unwrap();
    let q = codec.involution(&small, &tuning::symmetry_involution(&small)).unwrap();
    assert_eq!(q.fixed_points().len(), 3);
}
