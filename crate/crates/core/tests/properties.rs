mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{pos_vel, pv_state};
use coreecs::catalogue::{collide, inertia, TEMPLATES};
use coreecs::fuzz::{generate_instance, FuzzInstance};
use coreecs::po::DEFAULT_LINEARIZATION_LIMIT;
use coreecs::query::lookup_match;
use coreecs::safety::determinism_of;
use coreecs::*;

fn instance(seed: u64) -> FuzzInstance {
    generate_instance(&mut ChaCha8Rng::seed_from_u64(seed), seed as usize)
}

#[derive(Debug, Clone)]
enum Q {
    Incl(bool),
    Excl(bool),
    Anyway(bool),
    And(Box<Q>, Box<Q>),
}

fn q_strategy() -> impl Strategy<Value = Q> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Q::Incl),
        any::<bool>().prop_map(Q::Excl),
        any::<bool>().prop_map(Q::Anyway)
    ];
    leaf.prop_recursive(3, 8, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| Q::And(Box::new(a), Box::new(b))))
}

fn build(q: &Q, pos: &Label, vel: &Label) -> Query {
    let pick = |b: bool| if b { pos } else { vel };
    match q {
        Q::Incl(b) => Query::incl(pick(*b)),
        Q::Excl(b) => Query::excl(pick(*b)),
        Q::Anyway(b) => Query::anyway(pick(*b)),
        Q::And(a, b) => build(a, pos, vel).and(build(b, pos, vel)),
    }
}

/// Membership by the definition of each query form.
fn admits(q: &Q, c: &WorldState, e: EntityId, pos: &Label, vel: &Label) -> bool {
    let pick = |b: bool| if b { pos } else { vel };
    match q {
        Q::Incl(b) => c.contains(pick(*b), e),
        Q::Excl(b) => !c.contains(pick(*b), e),
        Q::Anyway(_) => true,
        Q::And(a, b) => admits(a, c, e, pos, vel) && admits(b, c, e, pos, vel),
    }
}

fn cells() -> impl Strategy<Value = Vec<(u64, i64)>> {
    prop::collection::btree_map(0u64..6, -4i64..5, 0..6).prop_map(|m| m.into_iter().collect())
}

fn state() -> impl Strategy<Value = WorldState> {
    (cells(), cells()).prop_map(|(p, v)| pv_state(&p, &v))
}

/// Renames every id at or above `base` by `perm`, keeping the counter.
fn rename_fresh(c: &WorldState, base: EntityId, perm: &[u64]) -> WorldState {
    let map = |e: EntityId| if e >= base { EntityId(base.0 + perm[(e.0 - base.0) as usize]) } else { e };
    let mut steps = Vec::new();
    for (label, _) in c.schema().entries() {
        for (&e, p) in c.store(label).unwrap() {
            let payload = match p {
                Payload::Entity(t) => Payload::Entity(map(*t)),
                other => *other,
            };
            steps.push(Mutation::attach(map(e), ComponentValue::new(label.clone(), payload)));
        }
    }
    let mut out = WorldState::with_schema(c.shared_schema().clone()).apply(&Mutation::sequence(steps)).unwrap();
    while out.next_fresh() < c.next_fresh() {
        out = out.fresh_entity().unwrap().1;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn query_domain_follows_the_definition(c in state(), q in q_strategy()) {
        let (schema, pos, vel) = pos_vel();
        let query = build(&q, &pos, &vel);
        let got = eval_query(&c, &query).unwrap();
        let expected: BTreeSet<EntityId> =
            c.live_entities().into_iter().filter(|&e| admits(&q, &c, e, &pos, &vel)).collect();
        prop_assert_eq!(got.keys().copied().collect::<BTreeSet<_>>(), expected);
        let shape = result_shape(&schema, &query).unwrap();
        prop_assert!(got.values().all(|r| r.conforms(&shape)));
    }

    #[test]
    fn query_vectors_are_sorted_products(c in state(), qs in prop::collection::vec(q_strategy(), 1..4)) {
        let (_, pos, vel) = pos_vel();
        let queries: Vec<Query> = qs.iter().map(|q| build(q, &pos, &vel)).collect();
        let single: Vec<_> = queries.iter().map(|q| eval_query(&c, q).unwrap()).collect();
        let got = eval_query_vector(&c, &QueryVector::new(queries).unwrap()).unwrap();
        prop_assert_eq!(got.len(), single.iter().map(|m| m.len()).product::<usize>());
        prop_assert!(got.windows(2).all(|w| w[0].entities < w[1].entities));
        for m in &got {
            for (j, e) in m.entities.iter().enumerate() {
                prop_assert_eq!(Some(m.result(j)), single[j].get(e));
            }
        }
    }

    #[test]
    fn roll_keeps_a_refreshed_subsequence(c in state()) {
        let (_, pos, vel) = pos_vel();
        let delta = collide(&pos, &vel);
        let matches = eval_query_vector(&c, delta.query()).unwrap();
        let kept = roll(&delta, &c, &matches).unwrap();
        let mut rest = matches.iter().map(|m| &m.entities);
        for k in &kept {
            prop_assert!(rest.any(|e| *e == k.entities), "not a subsequence");
        }
        let mut evolving = c.clone();
        for k in &kept {
            let fresh = lookup_match(&evolving, delta.query(), &k.entities).unwrap();
            prop_assert_eq!(fresh.as_ref(), Some(k));
            evolving.apply_in_place(&delta.call(k)).unwrap();
        }
    }

    #[test]
    fn sequential_production_matches_an_immediate_apply_loop(c in state()) {
        let (_, pos, vel) = pos_vel();
        for s in [collide(&pos, &vel), inertia(&pos, &vel)] {
            let mut oracle = c.clone();
            for m in eval_query_vector(&c, s.query()).unwrap() {
                let again = eval_query_vector(&oracle, s.query()).unwrap();
                if let Some(now) = again.into_iter().find(|x| x.entities == m.entities) {
                    oracle = oracle.apply(&s.call(&now)).unwrap();
                }
            }
            let got = c.apply(&sequential_production(&c, &s).unwrap()).unwrap();
            prop_assert_eq!(got, oracle);
        }
    }

    #[test]
    fn then_is_applying_twice(seed in any::<u64>(), other in any::<u64>()) {
        let a = instance(seed);
        let b = instance(other);
        if a.world.schema() != b.world.schema() {
            return Ok(());
        }
        let c = &a.world;
        let z = a.schedule.clone().then(b.schedule.clone());
        let once = apply_schedule(c, &z).unwrap();
        let twice = apply_schedule(&apply_schedule(c, &a.schedule).unwrap(), &b.schedule).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn schedule_equals_its_canonical_linearization(seed in any::<u64>()) {
        let inst = instance(seed);
        let c = &inst.world;
        let po = invocation_po(c, &inst.schedule).unwrap();
        prop_assert!(po.elements().iter().enumerate().all(|(i, inv)| inv.tag == i));
        prop_assert!(po.is_linearization(&(0..po.len()).collect::<Vec<_>>()));
        prop_assert_eq!(apply_linearization(c, po.elements()).unwrap(), apply_schedule(c, &inst.schedule).unwrap());
    }

    #[test]
    fn enumerated_linearizations_are_exactly_the_topological_orders(seed in any::<u64>()) {
        let inst = instance(seed);
        let po = invocation_po(&inst.world, &inst.schedule).unwrap();
        prop_assume!(po.len() <= 6);
        let pairs = po.pairs();
        let lins = enumerate_linearizations(&po, DEFAULT_LINEARIZATION_LIMIT).unwrap();
        let respects = |order: &[usize]| {
            let at = |t: usize| order.iter().position(|&x| x == t).unwrap();
            pairs.iter().all(|&(i, j)| at(i) < at(j))
        };
        prop_assert!(lins.iter().all(|l| respects(l)));
        prop_assert!(lins.windows(2).all(|w| w[0] < w[1]));
        let mut count = 0;
        permutations(&mut (0..po.len()).collect(), 0, &mut |p| if respects(p) { count += 1 });
        prop_assert_eq!(lins.len(), count);
    }

    #[test]
    fn leaves_contribute_their_match_counts(seed in any::<u64>()) {
        let inst = instance(seed);
        let c = &inst.world;
        for leaf in leaves(&inst.schedule) {
            let po = invocation_po(c, leaf).unwrap();
            let expected = match leaf {
                Schedule::Conc(s) => eval_query_vector(c, s.query()).unwrap().len(),
                Schedule::Seq(s) => roll(s, c, &eval_query_vector(c, s.query()).unwrap()).unwrap().len(),
                _ => unreachable!(),
            };
            prop_assert_eq!(po.len(), expected);
            if let Schedule::Conc(_) = leaf {
                prop_assert!(po.pairs().is_empty());
            } else {
                prop_assert_eq!(po.pairs().len(), po.len() * po.len().saturating_sub(1) / 2);
            }
        }
    }

    #[test]
    fn par_is_unordered_and_then_orders_every_cross_pair(seed in any::<u64>(), other in any::<u64>()) {
        let a = instance(seed);
        let b = instance(other);
        let b = if a.world.schema() == b.world.schema() { b } else { a.clone() };
        let c = &a.world;
        let la = invocation_po(c, &a.schedule).unwrap();
        let lb = invocation_po(c, &b.schedule).unwrap();
        let par = invocation_po(c, &a.schedule.clone().par(b.schedule.clone())).unwrap();
        prop_assert_eq!(par.len(), la.len() + lb.len());
        prop_assert_eq!(par.pairs().len(), la.pairs().len() + lb.pairs().len());
        let then = invocation_po(c, &a.schedule.clone().then(b.schedule.clone())).unwrap();
        let n = la.len();
        for i in 0..n {
            for j in n..then.len() {
                prop_assert!(then.precedes(i, j) && !then.precedes(j, i));
            }
        }
    }

    #[test]
    fn canonical_forms_ignore_fresh_names(seed in any::<u64>(), rot in 0usize..8) {
        let inst = instance(seed);
        let c = &inst.world;
        let after = apply_schedule(c, &inst.schedule).unwrap();
        let canon = canonicalize(&after);
        prop_assert_eq!(canonicalize(&canon), canon.clone());
        prop_assert!(states_equal_upto_fresh(&after, &canon).unwrap());

        let base = c.next_fresh();
        let n = (after.next_fresh().0 - base.0) as usize;
        let perm: Vec<u64> = (0..n).map(|k| ((k + rot) % n.max(1)) as u64).collect();
        let renamed = rename_fresh(&after, base, &perm);
        prop_assert!(equivalent_from(base, &after, &renamed).unwrap());
        prop_assert_eq!(
            CanonicalState::relative_to(&after, base),
            CanonicalState::relative_to(&renamed, base)
        );
    }

    #[test]
    fn static_singletons_are_dynamically_safe(seed in any::<u64>()) {
        let inst = instance(seed);
        for s in inst.schedule.systems() {
            if check_static_singleton(inst.world.schema(), s) {
                let z = Schedule::conc(s.clone());
                prop_assert_eq!(check_safe(&inst.world, &z).unwrap().verdict, Verdict::Safe);
            }
        }
    }

    #[test]
    fn safe_schedules_are_deterministic_under_threads(seed in any::<u64>(), run_seed in any::<u64>(), workers in 1usize..6) {
        let inst = instance(seed);
        let c = &inst.world;
        prop_assume!(check_safe(c, &inst.schedule).unwrap().verdict == Verdict::Safe);
        let po = invocation_po(c, &inst.schedule).unwrap();
        prop_assume!(po.len() <= 7);
        prop_assert!(determinism_of(c, &po, DEFAULT_LINEARIZATION_LIMIT).unwrap().deterministic);
        let reference = apply_schedule(c, &inst.schedule).unwrap();
        let (got, trace) = run_parallel(c, &inst.schedule, RunConfig::new(workers, run_seed).with_trace()).unwrap();
        prop_assert!(equivalent_from(c.next_fresh(), &reference, &got).unwrap());
        prop_assert!(po.is_linearization(&trace.unwrap().tags()));
    }

    #[test]
    fn runtime_trace_is_always_a_linearization(seed in any::<u64>(), run_seed in any::<u64>(), workers in 1usize..6) {
        let inst = instance(seed);
        let c = &inst.world;
        let (got, trace) = run_parallel(c, &inst.schedule, RunConfig::new(workers, run_seed).with_trace()).unwrap();
        let trace = trace.unwrap();
        let tags = trace.tags();
        prop_assert_eq!(tags.iter().copied().collect::<BTreeSet<_>>(), (0..tags.len()).collect::<BTreeSet<_>>());
        // Sequenced leaves apply in match order and every left side of a
        // Then finishes before its right side starts.
        let pos = |leaf: usize| trace.entries.iter().filter(move |e| e.leaf == leaf).map(|e| e.step);
        for (leaf, z) in leaves(&inst.schedule).into_iter().enumerate() {
            if let Schedule::Seq(_) = z {
                let seq: Vec<usize> = trace.entries.iter().filter(|e| e.leaf == leaf).map(|e| e.tag).collect();
                prop_assert!(seq.windows(2).all(|w| w[0] < w[1]));
            }
        }
        for (left, right) in then_splits(&inst.schedule, 0) {
            let last_left = left.clone().flat_map(pos).max();
            let first_right = right.flat_map(pos).min();
            if let (Some(l), Some(r)) = (last_left, first_right) {
                prop_assert!(l < r);
            }
        }
        // Without a Then, every invocation reads the start state or its own
        // leaf's effects, so the reference captures exactly what ran.
        if then_splits(&inst.schedule, 0).is_empty() {
            let po = invocation_po(c, &inst.schedule).unwrap();
            prop_assert!(po.is_linearization(&tags));
            let order: Vec<&Invocation> = tags.iter().map(|&t| &po.elements()[t]).collect();
            let replay = apply_linearization(c, order).unwrap();
            prop_assert!(equivalent_from(c.next_fresh(), &replay, &got).unwrap());
        }
    }

    #[test]
    fn disjoint_influences_commute(c in state(), i in 0usize..64, j in 0usize..64, k in -3i64..4) {
        let (schema, pos, vel) = pos_vel();
        let pick = |n: usize| {
            let t = &TEMPLATES[n % TEMPLATES.len()];
            prop_assume!(!t.params.contains(&ComponentKind::EntityRef));
            let labels: Vec<Label> = (0..t.params.len()).map(|p| if (n / 16 + p).is_multiple_of(2) { pos.clone() } else { vel.clone() }).collect();
            Ok(t.instantiate(&schema, &labels, k).unwrap().system)
        };
        let (s1, s2) = (pick(i)?, pick(j)?);
        let m1s = eval_query_vector(&c, s1.query()).unwrap();
        let m2s = eval_query_vector(&c, s2.query()).unwrap();
        for a in &m1s {
            for b in &m2s {
                let (x, y) = (s1.call(a), s2.call(b));
                if mutation_influence(&x).is_disjoint(&mutation_influence(&y)) {
                    let xy = c.apply(&x.clone().then(y.clone())).unwrap();
                    let yx = c.apply(&y.then(x)).unwrap();
                    prop_assert!(equivalent_from(c.next_fresh(), &xy, &yx).unwrap());
                }
            }
        }
    }
}

fn leaves(z: &Schedule) -> Vec<&Schedule> {
    match z {
        Schedule::Conc(_) | Schedule::Seq(_) => vec![z],
        Schedule::Par(a, b) | Schedule::Then(a, b) => [leaves(a), leaves(b)].concat(),
    }
}

/// Leaf ranges of the two sides of every Then node.
fn then_splits(z: &Schedule, first: usize) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    match z {
        Schedule::Conc(_) | Schedule::Seq(_) => Vec::new(),
        Schedule::Par(a, b) | Schedule::Then(a, b) => {
            let mid = first + a.leaf_count();
            let mut out = then_splits(a, first);
            out.extend(then_splits(b, mid));
            if let Schedule::Then(..) = z {
                out.push((first..mid, mid..mid + b.leaf_count()));
            }
            out
        }
    }
}

fn permutations(xs: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == xs.len() {
        f(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permutations(xs, k + 1, f);
        xs.swap(k, i);
    }
}
