use std::collections::BTreeMap;

use num_traits::Zero;
use proptest::prelude::*;
use secure_sampling::engine::{enumerate_executions, ExecutionTree, Side};
use secure_sampling::fixtures;
use secure_sampling::lp::{solve_lp, LpOutcome};
use secure_sampling::prob::{Alphabet, JointPMF};
use secure_sampling::protocols::{
    coin_map, malicious_family, mediator_sampler, one_sided_sampler, xor_coinflip,
    AdversaryStrategy, ProtocolSpec,
};
use secure_sampling::rational::{rat, zero, Rational};
use secure_sampling::security::{
    check_correctness, check_malicious, check_semi_honest, lemma_fixtures, malicious_program,
    CorrectnessVerdict, MaliciousVerdict, RETRY_CAP,
};
use secure_sampling::Error;

fn honest(spec: &ProtocolSpec) -> ExecutionTree {
    enumerate_executions(spec.party_a.as_ref(), spec.party_b.as_ref(), spec.mode, RETRY_CAP).unwrap()
}

fn attacked(spec: &ProtocolSpec, side: Side, s: &AdversaryStrategy) -> JointPMF {
    let (a, b) = spec.with_adversary(side, s);
    enumerate_executions(a.as_ref(), b.as_ref(), spec.mode, RETRY_CAP)
        .unwrap()
        .output_pmf()
        .unwrap()
}

/// Rows are the adversary's outputs, columns the honest party's.
fn orient(observed: &JointPMF, target: &JointPMF, adversary: Side) -> (JointPMF, JointPMF) {
    match adversary {
        Side::A => (observed.clone(), target.clone()),
        Side::B => (observed.transpose(), target.transpose()),
    }
}

/// Relabels adversary outputs through `f` and merges the mass.
fn coarsen(observed: &JointPMF, adversary: Side, f: impl Fn(&str) -> String) -> JointPMF {
    let mut cells: BTreeMap<(String, String), Rational> = BTreeMap::new();
    for ((u, v), p) in observed.cells() {
        let key = match adversary {
            Side::A => (f(&u), v),
            Side::B => (u, f(&v)),
        };
        *cells.entry(key).or_insert_with(zero) += p;
    }
    JointPMF::from_observed(&cells).unwrap()
}

fn marginals_agree(obs: &JointPMF, tgt: &JointPMF) -> bool {
    let sums = |p: &JointPMF| -> BTreeMap<String, Rational> {
        p.alphabet_y()
            .symbols()
            .iter()
            .cloned()
            .zip(p.col_sums())
            .filter(|(_, m)| !m.is_zero())
            .collect()
    };
    sums(obs) == sums(tgt)
}

/// Confirms a channel by direct substitution into the defining equations.
fn channel_reproduces(
    channel: &BTreeMap<(String, String), Rational>,
    obs: &JointPMF,
    tgt: &JointPMF,
) -> bool {
    let q = |u: &str, x: &str| channel.get(&(u.to_string(), x.to_string())).cloned().unwrap_or_else(zero);
    let rows_normalized = tgt.alphabet_x().symbols().iter().all(|x| {
        obs.alphabet_x().symbols().iter().map(|u| q(u, x)).sum::<Rational>() == rat(1, 1)
    });
    let matches = obs.alphabet_x().symbols().iter().enumerate().all(|(ui, u)| {
        tgt.alphabet_y().symbols().iter().enumerate().all(|(vi, v)| {
            let mixed: Rational = tgt
                .alphabet_x()
                .symbols()
                .iter()
                .enumerate()
                .map(|(xi, x)| q(u, x) * tgt.get(xi, vi))
                .sum();
            let want = obs.alphabet_y().index_of(v).map_or_else(zero, |j| obs.get(ui, j).clone());
            mixed == want
        })
    });
    rows_normalized && matches
}

#[test]
fn malicious_verdicts_agree_with_the_raw_program() {
    for spec in lemma_fixtures() {
        for side in [Side::A, Side::B] {
            for s in malicious_family(spec.party(side).message_space()) {
                let observed = attacked(&spec, side, &s);
                let (obs, tgt) = orient(&observed, &spec.target, side);
                let raw = solve_lp(&malicious_program(&obs, &tgt)).unwrap();
                match check_malicious(&observed, &spec.target, side.other()) {
                    Err(Error::MarginalMismatch { .. }) => {
                        assert!(!marginals_agree(&obs, &tgt));
                        assert!(matches!(raw, LpOutcome::Infeasible { .. }), "{} {s}", spec.name);
                    }
                    Ok(MaliciousVerdict::Feasible { channel }) => {
                        assert!(marginals_agree(&obs, &tgt));
                        assert!(channel_reproduces(&channel, &obs, &tgt), "{} {s}", spec.name);
                    }
                    Ok(MaliciousVerdict::Infeasible { residual }) => {
                        assert!(residual > zero());
                        assert!(matches!(raw, LpOutcome::Infeasible { .. }));
                    }
                    other => panic!("{} {s}: {other:?}", spec.name),
                }
            }
        }
    }
}

#[test]
fn coarsening_preserves_feasibility() {
    for spec in lemma_fixtures() {
        for side in [Side::A, Side::B] {
            for s in malicious_family(spec.party(side).message_space()) {
                let observed = attacked(&spec, side, &s);
                let Ok(MaliciousVerdict::Feasible { .. }) = check_malicious(&observed, &spec.target, side.other())
                else {
                    continue;
                };
                let coarsenings: [&dyn Fn(&str) -> String; 3] = [
                    &|u| u.split('#').next().unwrap_or(u).to_string(),
                    &|u| (u.len() % 3).to_string(),
                    &|_| "*".to_string(),
                ];
                for f in coarsenings {
                    let coarse = coarsen(&observed, side, f);
                    let v = check_malicious(&coarse, &spec.target, side.other()).unwrap();
                    assert!(v.feasible(), "{} {s}", spec.name);
                }
            }
        }
    }
}

#[test]
fn perturbed_targets_short_circuit() {
    // Same Y marginal as the block fixture, different X marginal.
    let perturbed = JointPMF::new(
        fixtures::block().alphabet_x().clone(),
        fixtures::block().alphabet_y().clone(),
        vec![
            vec![rat(3, 16), rat(3, 16), zero()],
            vec![rat(1, 16), rat(1, 16), zero()],
            vec![zero(), zero(), rat(1, 2)],
        ],
    )
    .unwrap();
    let observed = honest(&mediator_sampler(&fixtures::block()).unwrap()).output_pmf().unwrap();
    match check_malicious(&observed, &perturbed, Side::A) {
        Err(Error::MarginalMismatch { symbol, expected, got }) => {
            assert_eq!(symbol, "a1");
            assert_eq!(expected, rat(3, 8));
            assert_eq!(got, rat(1, 4));
        }
        other => panic!("{other:?}"),
    }
    // With B honest the marginals match, and an even a1/a2 mix reproduces
    // the observed joint.
    let (obs, tgt) = orient(&observed, &perturbed, Side::A);
    assert!(marginals_agree(&obs, &tgt));
    match check_malicious(&observed, &perturbed, Side::B).unwrap() {
        MaliciousVerdict::Feasible { channel } => {
            assert!(channel_reproduces(&channel, &obs, &tgt));
            let mut even = BTreeMap::new();
            for u in ["a1", "a2"] {
                for x in ["a1", "a2"] {
                    even.insert((u.to_string(), x.to_string()), rat(1, 2));
                }
            }
            even.insert(("a3".to_string(), "a3".to_string()), rat(1, 1));
            assert!(channel_reproduces(&even, &obs, &tgt));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn buggy_conditional_fails_correctness() {
    let buggy = JointPMF::new(
        fixtures::block().alphabet_x().clone(),
        fixtures::block().alphabet_y().clone(),
        vec![
            vec![rat(3, 16), rat(3, 16), zero()],
            vec![rat(1, 16), rat(1, 16), zero()],
            vec![zero(), zero(), rat(1, 2)],
        ],
    )
    .unwrap();
    let tree = honest(&mediator_sampler(&buggy).unwrap());
    assert_eq!(
        check_correctness(&tree, &fixtures::block()).unwrap(),
        CorrectnessVerdict::Fail {
            u: "a1".into(),
            v: "b1".into(),
            expected: rat(1, 8),
            got: rat(3, 16),
        }
    );
    assert!(check_correctness(&tree, &buggy).unwrap().passed());
}

#[test]
fn markov_witnesses_recheck() {
    let spec = one_sided_sampler(&fixtures::cod_ce());
    let tree = honest(&spec);
    let v = check_semi_honest(&tree, &spec.target).unwrap();
    assert!(v.correctness.passed());
    assert!(!v.passed());
    let w = v.witness_a.expect("Alice learns Bob's output");
    assert_eq!(w.side, Side::A);
    assert!(w.recheck(&tree));
    assert!(!w.recheck(&honest(&xor_coinflip())));
    assert!(v.witness_b.is_none());
    assert!(v.leakage_a > 0.5);
}

#[test]
fn coin_map_bias_survives_every_adversary() {
    let block = fixtures::block();
    for (class1, bias) in [(vec![0], rat(1, 2)), (vec![1], rat(1, 2))] {
        let spec = coin_map(&block, &class1).unwrap();
        let tree = honest(&spec);
        for leaf in &tree.leaves {
            assert_eq!(leaf.output_a, leaf.output_b);
        }
        assert_eq!(tree.marginal(Side::A)["1"], bias);
        for side in [Side::A, Side::B] {
            for s in malicious_family(spec.party(side).message_space()) {
                let observed = attacked(&spec, side, &s);
                let (obs, _) = orient(&observed, &spec.target, side);
                let ones = obs.alphabet_y().index_of("1").map_or_else(zero, |j| obs.col_sums()[j].clone());
                assert_eq!(ones, bias, "{s} as {side}");
            }
        }
    }
    let uneven = JointPMF::new(
        Alphabet::indexed(3),
        Alphabet::indexed(3),
        vec![
            vec![rat(1, 6), zero(), zero()],
            vec![zero(), rat(1, 3), zero()],
            vec![zero(), zero(), rat(1, 2)],
        ],
    )
    .unwrap();
    for (class1, bias) in [(vec![0], rat(1, 6)), (vec![1, 2], rat(5, 6)), (vec![0, 2], rat(2, 3))] {
        let spec = coin_map(&uneven, &class1).unwrap();
        assert_eq!(spec.target.get(1, 1), &bias);
        assert!(check_correctness(&honest(&spec), &spec.target).unwrap().passed());
        for s in malicious_family(spec.party_a.message_space()) {
            let observed = attacked(&spec, Side::A, &s);
            assert_eq!(observed.col_sums()[observed.alphabet_y().index_of("1").unwrap()], bias, "{s}");
        }
    }
}

fn arb_sparse_joint() -> impl Strategy<Value = JointPMF> {
    prop::collection::vec(0u32..4, 6)
        .prop_filter("some mass", |w| w.iter().any(|&v| v > 0))
        .prop_map(|w| {
            let total: u32 = w.iter().sum();
            let mass = (0..2)
                .map(|x| (0..3).map(|y| Rational::new(w[x * 3 + y].into(), total.into())).collect())
                .collect();
            JointPMF::new(Alphabet::indexed(2), Alphabet::indexed(3), mass).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_sided_is_semi_honest_iff_alice_output_fixes_bob(p in arb_sparse_joint()) {
        let spec = one_sided_sampler(&p);
        let tree = honest(&spec);
        let v = check_semi_honest(&tree, &spec.target).unwrap();
        prop_assert!(v.correctness.passed());
        let deterministic = p.mass().iter().all(|row| row.iter().filter(|m| !m.is_zero()).count() <= 1);
        prop_assert_eq!(v.passed(), deterministic);
        prop_assert!(v.witness_b.is_none());
        if let Some(w) = &v.witness_a {
            prop_assert!(w.recheck(&tree));
        }
    }
}
