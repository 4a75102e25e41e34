//! Selector properties against brute-force oracles.

use failaware_core::episode::{
    init_memory, run_episode, AffordanceMap, EpisodeConfig, FailureMemory, MemoryMode, Oracle, PolicyState,
};
use failaware_core::numkit::{Array, Rng};
use failaware_core::policies::{
    base_forward, select_fmp1, select_fmp2, select_lpre, select_random, select_sorting, BaseArchitecture,
    FaArchitecture, FailureAwarePolicy, MemoryEncoder, PolicyWeights, SortingPolicy,
};
use failaware_core::tasks::{AssessConfig, ClassifyConfig, GroundTruth, TaskConfig};
use failaware_core::Error;
use proptest::prelude::*;

fn weights(input: usize, n: usize, features: usize, seed: u64) -> PolicyWeights {
    let arch = BaseArchitecture {
        input,
        actions: n,
        hidden: 8,
        features_per_action: features,
    };
    PolicyWeights::base(arch, &mut Rng::new(seed)).unwrap()
}

fn with_head(mut w: PolicyWeights, fa: FaArchitecture, seed: u64) -> PolicyWeights {
    w.attach_fa(fa, &mut Rng::new(seed)).unwrap();
    w
}

fn observation(rng: &mut Rng, d: usize) -> Array {
    Array::vector((0..d).map(|_| 2.0 * rng.normal()).collect())
}

fn memory_from_mask(n: usize, mask: u32) -> FailureMemory {
    let failed: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
    FailureMemory::with_failures(&vec![1.0; n], MemoryMode::Binary, &failed).unwrap()
}

/// Indices sorted by descending value, lowest index first among equals.
fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

fn sp_sequence(aff: &AffordanceMap, steps: usize) -> Vec<usize> {
    let mut m = init_memory(MemoryMode::Binary, None, aff.len()).unwrap();
    let mut out = Vec::new();
    for _ in 0..steps {
        let a = select_sorting(aff, &m).unwrap();
        out.push(a);
        m.mark_failed(a).unwrap();
    }
    out
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..30).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn sp_is_scale_invariant(p in distribution(), c in 0.01f64..100.0, mask in any::<u32>()) {
        let n = p.len();
        let mask = mask | 1 << (mask as usize % n);
        let m = memory_from_mask(n, mask);
        let scaled: Vec<f64> = p.iter().map(|x| x * c).collect();
        let s: f64 = scaled.iter().sum();
        let renorm = AffordanceMap::new(scaled.iter().map(|x| x / s).collect()).unwrap();
        let aff = AffordanceMap::new(p.clone()).unwrap();
        // Compare against the raw scaled scores too, which never pass through normalization.
        let raw = (0..n).filter(|&i| m.is_candidate(i)).max_by(|&a, &b| scaled[a].total_cmp(&scaled[b]).then(b.cmp(&a)));
        prop_assert_eq!(select_sorting(&aff, &m).unwrap(), raw.unwrap());
        prop_assert_eq!(select_sorting(&aff, &m).unwrap(), select_sorting(&renorm, &m).unwrap());
    }

    #[test]
    fn sp_trial_sequence_is_the_descending_sort(p in distribution()) {
        let n = p.len();
        let aff = AffordanceMap::new(p.clone()).unwrap();
        let steps = n.min(5);
        prop_assert_eq!(sp_sequence(&aff, steps), descending(&p)[..steps].to_vec());
    }

    #[test]
    fn selectors_only_return_candidates(n in 2usize..12, mask in 1u32..4096, seed in any::<u64>()) {
        let mask = mask & ((1 << n) - 1);
        prop_assume!(mask != 0);
        let m = memory_from_mask(n, mask);
        let mut rng = Rng::new(seed);
        let p: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
        let s: f64 = p.iter().sum();
        let aff = AffordanceMap::new(p.iter().map(|x| x / s).collect()).unwrap();
        prop_assert!(m.is_candidate(select_random(&m, &mut rng).unwrap()));
        prop_assert!(m.is_candidate(select_sorting(&aff, &m).unwrap()));
        for t in 0..3 {
            prop_assert!(m.is_candidate(select_lpre(&aff, &m, t, &mut rng).unwrap()));
        }
        let d = 3;
        let o = observation(&mut rng, d);
        for fa in [
            FaArchitecture::Fmp1 { memory_encoder: MemoryEncoder::Replica },
            FaArchitecture::Fmp1 { memory_encoder: MemoryEncoder::Learned },
            FaArchitecture::Fmp1Identity,
        ] {
            let w = with_head(weights(d, n, 2.min(1 + seed as usize % 2), seed), fa, seed ^ 1);
            let w = if fa == FaArchitecture::Fmp1Identity { with_head(weights(d, n, 1, seed), fa, 1) } else { w };
            prop_assert!(m.is_candidate(select_fmp1(&o, &m, &w).unwrap()));
        }
        let w = with_head(weights(d, n, 2, seed), FaArchitecture::Fmp2 { memory_encoder: MemoryEncoder::Replica, hidden: 5, emits_first: true }, 3);
        let (a, _) = select_fmp2(&o, &m, PolicyState::default(), &w).unwrap();
        prop_assert!(m.is_candidate(a));
    }

    #[test]
    fn fmp1_identity_matches_sp_at_25_actions(seed in any::<u64>()) {
        let n = 25;
        let mut rng = Rng::new(seed);
        let w = with_head(weights(6, n, 1, seed), FaArchitecture::Fmp1Identity, 0);
        let o = observation(&mut rng, 6);
        let aff = base_forward(&o, &w).unwrap();
        let mut m = init_memory(MemoryMode::Binary, None, n).unwrap();
        for _ in 0..n {
            let a = select_fmp1(&o, &m, &w).unwrap();
            prop_assert_eq!(a, select_sorting(&aff, &m).unwrap());
            // Fail a random untried action so the memory covers arbitrary orders.
            let f = select_random(&m, &mut rng).unwrap();
            m.mark_failed(f).unwrap();
        }
    }
}

#[test]
fn fmp1_identity_matches_sp_exhaustively_on_small_sets() {
    let mut rng = Rng::new(11);
    for n in 1..=6usize {
        for trial in 0..20 {
            let w = with_head(weights(4, n, 1, trial), FaArchitecture::Fmp1Identity, 0);
            let o = observation(&mut rng, 4);
            let aff = base_forward(&o, &w).unwrap();
            for mask in 1u32..(1 << n) {
                let m = memory_from_mask(n, mask);
                assert_eq!(select_fmp1(&o, &m, &w).unwrap(), select_sorting(&aff, &m).unwrap());
            }
            // Normalized memory: the same candidate set, so the same choice.
            for mask in 1u32..(1 << n) {
                let failed: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
                let m = FailureMemory::with_failures(aff.values(), MemoryMode::Normalized, &failed).unwrap();
                assert_eq!(select_fmp1(&o, &m, &w).unwrap(), select_sorting(&aff, &m).unwrap());
            }
        }
    }
}

#[test]
fn exhausted_memory_is_an_error_for_every_selector() {
    let m = memory_from_mask(3, 0);
    let aff = AffordanceMap::new(vec![0.2, 0.3, 0.5]).unwrap();
    let mut rng = Rng::new(0);
    assert!(matches!(select_random(&m, &mut rng), Err(Error::ExhaustedActions)));
    assert!(matches!(select_sorting(&aff, &m), Err(Error::ExhaustedActions)));
    assert!(matches!(select_lpre(&aff, &m, 2, &mut rng), Err(Error::ExhaustedActions)));
    let w = with_head(weights(2, 3, 1, 0), FaArchitecture::Fmp1Identity, 0);
    assert!(matches!(
        select_fmp1(&Array::vector(vec![0.0, 1.0]), &m, &w),
        Err(Error::ExhaustedActions)
    ));
}

#[test]
fn fmp2_ignores_observation_after_first_trial() {
    let mut rng = Rng::new(5);
    let n = 7;
    let w = with_head(
        weights(4, n, 2, 1),
        FaArchitecture::Fmp2 { memory_encoder: MemoryEncoder::Replica, hidden: 6, emits_first: false },
        2,
    );
    for _ in 0..200 {
        let o = observation(&mut rng, 4);
        let mut m = init_memory(MemoryMode::Binary, None, n).unwrap();
        let (a0, mut state) = select_fmp2(&o, &m, PolicyState::default(), &w).unwrap();
        assert_eq!(a0, select_sorting(&base_forward(&o, &w).unwrap(), &m).unwrap());
        assert_eq!(state.trial_index, 1);
        m.mark_failed(a0).unwrap();
        for _ in 1..4 {
            let other = observation(&mut rng, 4);
            let (a, next) = select_fmp2(&o, &m, state.clone(), &w).unwrap();
            let (b, next_b) = select_fmp2(&other, &m, state.clone(), &w).unwrap();
            assert_eq!(a, b);
            assert_eq!(next, next_b);
            assert!(m.is_candidate(a));
            m.mark_failed(a).unwrap();
            state = next;
        }
    }
}

#[test]
fn fmp2_hidden_width_mismatch_is_dimension_error() {
    let w = with_head(
        weights(2, 3, 1, 1),
        FaArchitecture::Fmp2 { memory_encoder: MemoryEncoder::Replica, hidden: 4, emits_first: false },
        2,
    );
    let m = memory_from_mask(3, 0b111);
    let state = PolicyState {
        hidden: Some(Array::zeros(vec![5])),
        trial_index: 1,
    };
    let err = select_fmp2(&Array::vector(vec![0.0, 0.0]), &m, state, &w).unwrap_err();
    assert!(matches!(err, Error::Dimension { .. }));
}

#[test]
fn fmp2_starts_from_zero_hidden_and_is_deterministic() {
    let w = with_head(
        weights(3, 5, 1, 4),
        FaArchitecture::Fmp2 { memory_encoder: MemoryEncoder::Learned, hidden: 4, emits_first: false },
        2,
    );
    let p = FailureAwarePolicy::new(&w).unwrap();
    let s = failaware_core::episode::Policy::initial_state(&p);
    assert_eq!(s.hidden.unwrap().data(), &[0.0; 4]);
    let task = TaskConfig::Classify(ClassifyConfig { classes: 5, dim: 3, ..Default::default() });
    let oracle = GroundTruth(AssessConfig::default());
    let mut gen = Rng::new(9);
    for _ in 0..50 {
        let inst = task.generate(&mut gen).unwrap();
        let a = run_episode(&p, &inst, &oracle, &EpisodeConfig::default(), &mut Rng::new(1)).unwrap();
        let b = run_episode(&p, &inst, &oracle, &EpisodeConfig::default(), &mut Rng::new(2)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn replica_head_with_ones_memory_picks_base_argmax() {
    // Fresh FMP-1 head is a copy of the decoder, so an all-ones mask reproduces the base policy.
    let mut rng = Rng::new(8);
    for f in 1..=3 {
        let w = with_head(weights(5, 9, f, f as u64), FaArchitecture::Fmp1 { memory_encoder: MemoryEncoder::Replica }, 0);
        for _ in 0..100 {
            let o = observation(&mut rng, 5);
            let aff = base_forward(&o, &w).unwrap();
            let m = init_memory(MemoryMode::Binary, None, 9).unwrap();
            assert_eq!(select_fmp1(&o, &m, &w).unwrap(), select_sorting(&aff, &m).unwrap());
        }
    }
}

/// Pearson chi-square statistic of `counts` against a uniform expectation.
fn chi_square(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

#[test]
fn random_selection_is_uniform_over_candidates() {
    let m = memory_from_mask(8, 0b1011_0111);
    let support: Vec<usize> = m.candidates().collect();
    let mut counts = [0usize; 8];
    let mut rng = Rng::new(3);
    for _ in 0..60_000 {
        counts[select_random(&m, &mut rng).unwrap()] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        assert_eq!(*c > 0, support.contains(&i));
    }
    let kept: Vec<usize> = support.iter().map(|&i| counts[i]).collect();
    // 5 degrees of freedom, 0.999 quantile.
    assert!(chi_square(&kept) < 20.515, "{kept:?}");
}

struct LabelOracle(usize);

impl Oracle for LabelOracle {
    fn assess(
        &self,
        _instance: &failaware_core::tasks::TaskInstance,
        action: usize,
    ) -> failaware_core::Result<failaware_core::episode::AssessmentOutcome> {
        Ok(if action == self.0 {
            failaware_core::episode::AssessmentOutcome::pass()
        } else {
            failaware_core::episode::AssessmentOutcome::fail()
        })
    }
}

#[test]
fn lpre_recovers_a_missed_label_at_chance() {
    // With the first choice wrong, four uniform draws among 19 remaining classes
    // find the label with probability 4/19.
    let n = 20;
    let w = weights(4, n, 1, 21);
    let task = TaskConfig::Classify(ClassifyConfig { classes: n, dim: 4, ..Default::default() });
    let mut gen = Rng::new(0);
    let inst = task.generate(&mut gen).unwrap();
    let aff = base_forward(inst.observation(), &w).unwrap();
    let first = select_sorting(&aff, &init_memory(MemoryMode::Binary, None, n).unwrap()).unwrap();
    let label = (first + 7) % n;
    let policy = failaware_core::policies::LprePolicy { weights: &w };
    let episodes = 20_000;
    let mut wins = 0;
    for i in 0..episodes {
        let tr = run_episode(&policy, &inst, &LabelOracle(label), &EpisodeConfig::default(), &mut Rng::derive(1, &[i])).unwrap();
        assert_eq!(tr.steps[0].action, first);
        wins += tr.succeeded as usize;
    }
    let p = 4.0 / 19.0;
    let se = (p * (1.0 - p) / episodes as f64).sqrt();
    let rate = wins as f64 / episodes as f64;
    assert!((rate - p).abs() < 4.0 * se, "{rate} vs {p}");
}

#[test]
fn sp_policy_follows_descending_affordance_in_episodes() {
    let n = 10;
    let w = weights(3, n, 1, 2);
    let mut gen = Rng::new(4);
    for _ in 0..100 {
        let o = observation(&mut gen, 3);
        let aff = base_forward(&o, &w).unwrap();
        let order = descending(aff.values());
        let inst = failaware_core::tasks::TaskInstance::new(
            failaware_core::tasks::TaskKind::Classify,
            o,
            failaware_core::tasks::Truth::Label(order[3]),
            n,
        )
        .unwrap();
        let tr = run_episode(&SortingPolicy { weights: &w }, &inst, &LabelOracle(order[3]), &EpisodeConfig::default(), &mut Rng::new(0)).unwrap();
        assert_eq!(tr.actions().collect::<Vec<_>>(), order[..4].to_vec());
        assert!(tr.succeeded);
        assert_eq!(tr.trials_used, 4);
    }
}
