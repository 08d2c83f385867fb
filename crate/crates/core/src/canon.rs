//! State equality up to the choice of fresh entities.
//!
//! Two notions are provided:
//!
//! * [`canonicalize`] renames every entity, in ascending order, to
//!   `e0..e(n-1)`. It is cheap and idempotent, and it identifies states that
//!   differ by an order-preserving renaming.
//! * [`CanonicalState::relative_to`] keeps every entity below a base id fixed
//!   and renames the entities at or above it (the ones allocated after the
//!   base was observed) by any bijection. This is the equivalence used to
//!   compare outcomes of different linearizations from one start state, where
//!   concurrent invocations may allocate their fresh entities in different
//!   orders.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{EcsError, Result};
use crate::world::{EntityId, Payload, Store, WorldState};

/// Order-preserving renaming of all entities to consecutive ids from `e0`.
/// The fresh counter is normalized to the number of distinct entities.
pub fn canonicalize(c: &WorldState) -> WorldState {
    let ids = mentioned_entities(c);
    let rename: BTreeMap<EntityId, EntityId> = ids.iter().enumerate().map(|(i, e)| (*e, EntityId(i as u64))).collect();
    let stores = c.stores().map(|s| rename_store(s, &rename)).collect();
    WorldState::from_parts(c.shared_schema().clone(), stores, EntityId(ids.len() as u64))
}

/// `true` iff both states canonicalize to the same state.
pub fn states_equal_upto_fresh(a: &WorldState, b: &WorldState) -> Result<bool> {
    if a.schema() != b.schema() {
        return Err(EcsError::Schema("states have different schemas".into()));
    }
    Ok(canonicalize(a) == canonicalize(b))
}

/// `true` iff `a` and `b` agree on every entity below `base` and are
/// isomorphic on the entities at or above it.
pub fn equivalent_from(base: EntityId, a: &WorldState, b: &WorldState) -> Result<bool> {
    if a.schema() != b.schema() {
        return Err(EcsError::Schema("states have different schemas".into()));
    }
    Ok(CanonicalState::relative_to(a, base) == CanonicalState::relative_to(b, base))
}

fn mentioned_entities(c: &WorldState) -> BTreeSet<EntityId> {
    let mut ids = BTreeSet::new();
    for store in c.stores() {
        for (e, p) in store {
            ids.insert(*e);
            if let Payload::Entity(t) = p {
                ids.insert(*t);
            }
        }
    }
    ids
}

fn rename_store(store: &Store, rename: &BTreeMap<EntityId, EntityId>) -> Store {
    store
        .iter()
        .map(|(e, p)| {
            let p = match p {
                Payload::Entity(t) => Payload::Entity(rename[t]),
                other => *other,
            };
            (rename[e], p)
        })
        .collect()
}

/// Hashable normal form of a state relative to a base id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalState {
    stores: Vec<Vec<(u64, Payload)>>,
    next_fresh: u64,
}

// Above this many candidate orderings of tied fresh entities the refined
// colour order is used as is.
const PERMUTATION_BUDGET: u64 = 5040;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Cell {
    Absent,
    Int(i64),
    Flag,
    Fixed(u64),
    FreshRef,
}

impl CanonicalState {
    pub fn relative_to(c: &WorldState, base: EntityId) -> CanonicalState {
        let fresh: Vec<EntityId> = mentioned_entities(c).into_iter().filter(|e| *e >= base).collect();
        let next_fresh = base.0 + fresh.len() as u64;
        if fresh.is_empty() {
            return CanonicalState::build(c, &BTreeMap::new(), next_fresh);
        }

        let signature = |e: EntityId| -> Vec<Cell> {
            c.stores()
                .map(|s| match s.get(&e) {
                    None => Cell::Absent,
                    Some(Payload::Int(v)) => Cell::Int(*v),
                    Some(Payload::Flag) => Cell::Flag,
                    Some(Payload::Entity(t)) if *t >= base => Cell::FreshRef,
                    Some(Payload::Entity(t)) => Cell::Fixed(t.0),
                })
                .collect()
        };
        let mut colour: BTreeMap<EntityId, usize> = rank(fresh.iter().map(|e| (*e, signature(*e))));

        let fresh_links = fresh_edges(c, base);
        if !fresh_links.is_empty() {
            colour = refine(&fresh, colour, &fresh_links);
        }

        let mut ordered = fresh.clone();
        ordered.sort_by_key(|e| (colour[e], *e));
        let assign = |order: &[EntityId]| -> BTreeMap<EntityId, EntityId> {
            order.iter().enumerate().map(|(i, e)| (*e, EntityId(base.0 + i as u64))).collect()
        };

        // Equal colours are interchangeable unless fresh entities reference
        // each other, in which case every arrangement of a tie is tried.
        if fresh_links.is_empty() {
            return CanonicalState::build(c, &assign(&ordered), next_fresh);
        }
        let groups = tie_groups(&ordered, &colour);
        let arrangements: u64 = groups
            .iter()
            .map(|g| factorial(g.len() as u64))
            .try_fold(1u64, |acc, f| acc.checked_mul(f))
            .unwrap_or(u64::MAX);
        if arrangements <= 1 || arrangements > PERMUTATION_BUDGET {
            return CanonicalState::build(c, &assign(&ordered), next_fresh);
        }
        let mut best: Option<CanonicalState> = None;
        for_each_arrangement(&groups, &mut |order| {
            let candidate = CanonicalState::build(c, &assign(order), next_fresh);
            if best.as_ref().is_none_or(|b| candidate < *b) {
                best = Some(candidate);
            }
        });
        best.expect("at least one arrangement")
    }

    fn build(c: &WorldState, rename: &BTreeMap<EntityId, EntityId>, next_fresh: u64) -> CanonicalState {
        let map = |e: &EntityId| rename.get(e).copied().unwrap_or(*e).0;
        let stores = c
            .stores()
            .map(|s| {
                let mut row: Vec<(u64, Payload)> = s
                    .iter()
                    .map(|(e, p)| {
                        let p = match p {
                            Payload::Entity(t) => Payload::Entity(EntityId(map(t))),
                            other => *other,
                        };
                        (map(e), p)
                    })
                    .collect();
                row.sort();
                row
            })
            .collect();
        CanonicalState { stores, next_fresh }
    }

    /// Rebuilds a world over `like`'s schema from this normal form.
    pub fn to_world(&self, like: &WorldState) -> WorldState {
        let stores = self.stores.iter().map(|row| row.iter().map(|(e, p)| (EntityId(*e), *p)).collect()).collect();
        WorldState::from_parts(like.shared_schema().clone(), stores, EntityId(self.next_fresh))
    }
}

fn rank<K: Ord + Copy, S: Ord>(items: impl Iterator<Item = (K, S)>) -> BTreeMap<K, usize> {
    let items: Vec<(K, S)> = items.collect();
    let distinct: BTreeSet<&S> = items.iter().map(|(_, s)| s).collect();
    let index: BTreeMap<&S, usize> = distinct.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    items.iter().map(|(k, s)| (*k, index[s])).collect()
}

/// (source, store index, target) for every reference whose target is fresh.
fn fresh_edges(c: &WorldState, base: EntityId) -> Vec<(EntityId, usize, EntityId)> {
    let mut edges = Vec::new();
    for (idx, store) in c.stores().enumerate() {
        for (e, p) in store {
            if let Payload::Entity(t) = p {
                if *t >= base {
                    edges.push((*e, idx, *t));
                }
            }
        }
    }
    edges
}

/// Colour refinement over the reference graph among fresh entities.
fn refine(
    fresh: &[EntityId],
    mut colour: BTreeMap<EntityId, usize>,
    edges: &[(EntityId, usize, EntityId)],
) -> BTreeMap<EntityId, usize> {
    // Sources below the base keep their own id as a fixed colour.
    let tint = |colour: &BTreeMap<EntityId, usize>, e: &EntityId| -> (bool, u64) {
        match colour.get(e) {
            Some(c) => (true, *c as u64),
            None => (false, e.0),
        }
    };
    for _ in 0..fresh.len() {
        let next = rank(fresh.iter().map(|e| {
            let mut outgoing: Vec<(usize, (bool, u64))> =
                edges.iter().filter(|(s, _, _)| s == e).map(|(_, i, t)| (*i, tint(&colour, t))).collect();
            let mut incoming: Vec<(usize, (bool, u64))> =
                edges.iter().filter(|(_, _, t)| t == e).map(|(s, i, _)| (*i, tint(&colour, s))).collect();
            outgoing.sort();
            incoming.sort();
            (*e, (colour[e], outgoing, incoming))
        }));
        let classes = |m: &BTreeMap<EntityId, usize>| m.values().collect::<BTreeSet<_>>().len();
        let stable = classes(&next) == classes(&colour);
        colour = next;
        if stable {
            break;
        }
    }
    colour
}

fn tie_groups(ordered: &[EntityId], colour: &BTreeMap<EntityId, usize>) -> Vec<Vec<EntityId>> {
    let mut groups: Vec<Vec<EntityId>> = Vec::new();
    for e in ordered {
        match groups.last_mut() {
            Some(g) if colour[&g[0]] == colour[e] => g.push(*e),
            _ => groups.push(vec![*e]),
        }
    }
    groups
}

fn factorial(n: u64) -> u64 {
    (1..=n).try_fold(1u64, |acc, k| acc.checked_mul(k)).unwrap_or(u64::MAX)
}

fn for_each_arrangement(groups: &[Vec<EntityId>], visit: &mut dyn FnMut(&[EntityId])) {
    fn permute(items: &mut Vec<EntityId>, k: usize, out: &mut Vec<Vec<EntityId>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let per_group: Vec<Vec<Vec<EntityId>>> = groups
        .iter()
        .map(|g| {
            let mut out = Vec::new();
            permute(&mut g.clone(), 0, &mut out);
            out
        })
        .collect();
    let mut choice = vec![0usize; groups.len()];
    loop {
        let order: Vec<EntityId> =
            per_group.iter().zip(&choice).flat_map(|(perms, i)| perms[*i].iter().copied()).collect();
        visit(&order);
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                return;
            }
            choice[pos] += 1;
            if choice[pos] < per_group[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}
