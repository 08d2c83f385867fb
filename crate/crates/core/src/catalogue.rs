//! Ready-made systems, and templates that instantiate them over arbitrary
//! labels for the fuzzer.

use std::collections::BTreeSet;

use crate::error::{EcsError, Result};
use crate::mutation::Mutation;
use crate::query::{Query, QueryVector};
use crate::system::System;
use crate::world::{ComponentKind, ComponentValue, Label, Schema};
use ComponentKind::{EntityRef as Ref, Integer as Int};

fn int_at(m: &crate::query::EntityMatch, j: usize) -> i64 {
    m.result(j).int().unwrap_or(0)
}

fn pair_ints(m: &crate::query::EntityMatch, j: usize) -> (i64, i64) {
    match m.result(j).as_pair() {
        Some((a, b)) => (a.int().unwrap_or(0), b.int().unwrap_or(0)),
        None => (0, 0),
    }
}

/// Moves every entity with a position and a velocity by its velocity.
pub fn inertia(pos: &Label, vel: &Label) -> System {
    let p = pos.clone();
    System::new("inertia", QueryVector::single(Query::incl(pos).and(Query::incl(vel))), move |m| {
        let (x, v) = pair_ints(m, 0);
        Mutation::attach_int(&p, m.entity(0), x + v)
    })
}

/// A moving entity that shares its position with a stationary one is
/// removed; the stationary one takes half its velocity and a new entity
/// leaves in the other direction.
pub fn collide(pos: &Label, vel: &Label) -> System {
    let (p, v) = (pos.clone(), vel.clone());
    let query = QueryVector::pair(Query::incl(pos).and(Query::incl(vel)), Query::incl(pos).and(Query::excl(vel)));
    System::new("collide", query, move |m| {
        let (pj, vj) = pair_ints(m, 0);
        let ph = match m.result(1).as_pair() {
            Some((a, _)) => a.int().unwrap_or(0),
            None => return Mutation::Nil,
        };
        if pj != ph {
            return Mutation::Nil;
        }
        let (ej, eh) = (m.entity(0), m.entity(1));
        let (p2, v2) = (p.clone(), v.clone());
        Mutation::sequence([
            Mutation::detach(&p, ej),
            Mutation::detach(&v, ej),
            Mutation::attach_int(&v, eh, vj / 2),
            Mutation::fresh(move |el| Mutation::attach_int(&p2, el, pj).then(Mutation::attach_int(&v2, el, vj / -2))),
        ])
    })
}

/// Raises values below `bound` by one.
pub fn increment(label: &Label, bound: i64) -> System {
    let l = label.clone();
    System::new("increment", QueryVector::single(Query::incl(label)), move |m| {
        let n = int_at(m, 0);
        if n < bound {
            Mutation::attach_int(&l, m.entity(0), n + 1)
        } else {
            Mutation::Nil
        }
    })
}

/// Lowers values at or above `bound` by one.
pub fn decrement(label: &Label, bound: i64) -> System {
    let l = label.clone();
    System::new("decrement", QueryVector::single(Query::incl(label)), move |m| {
        let n = int_at(m, 0);
        if n < bound {
            Mutation::Nil
        } else {
            Mutation::attach_int(&l, m.entity(0), n - 1)
        }
    })
}

pub fn owned_update(label: &Label, k: i64) -> System {
    let l = label.clone();
    System::new("owned-update", QueryVector::single(Query::incl(label)), move |m| {
        Mutation::attach_int(&l, m.entity(0), k)
    })
}

pub fn owned_insert(label: &Label, k: i64) -> System {
    let l = label.clone();
    System::new("owned-insert", QueryVector::single(Query::excl(label)), move |m| {
        Mutation::attach_int(&l, m.entity(0), k)
    })
}

pub fn owned_initialize(label: &Label, k: i64) -> System {
    let l = label.clone();
    System::new("owned-initialize", QueryVector::single(Query::anyway(label)), move |_| {
        let l = l.clone();
        Mutation::fresh(move |e| Mutation::attach_int(&l, e, k))
    })
}

pub fn owned_delete(label: &Label) -> System {
    let l = label.clone();
    System::new("owned-delete", QueryVector::single(Query::incl(label)), move |m| Mutation::detach(&l, m.entity(0)))
}

/// Writes `target` on every entity the `read` query sees. Whether this
/// updates or inserts depends on the state, not on the system.
pub fn deferred_write(name: &str, read: &Label, target: &Label, k: i64) -> System {
    let t = target.clone();
    System::new(name, QueryVector::single(Query::anyway(read)), move |m| Mutation::attach_int(&t, m.entity(0), k))
}

pub fn deferred_initialize(read: &Label, target: &Label, k: i64) -> System {
    let t = target.clone();
    System::new("deferred-initialize", QueryVector::single(Query::anyway(read)), move |_| {
        let t = t.clone();
        Mutation::fresh(move |e| Mutation::attach_int(&t, e, k))
    })
}

pub fn deferred_delete(read: &Label, target: &Label) -> System {
    let t = target.clone();
    System::new("deferred-delete", QueryVector::single(Query::anyway(read)), move |m| Mutation::detach(&t, m.entity(0)))
}

/// For every pair of entities, copies the first one's `a` into the second
/// one's `b`.
pub fn spread(a: &Label, b: &Label) -> System {
    let t = b.clone();
    System::new("spread", QueryVector::pair(Query::incl(a), Query::incl(b)), move |m| {
        Mutation::attach_int(&t, m.entity(1), int_at(m, 0))
    })
}

/// Every pair writes the same constant to the first entity.
pub fn stamp(a: &Label, k: i64) -> System {
    let l = a.clone();
    System::new("stamp", QueryVector::pair(Query::incl(a), Query::incl(a)), move |m| {
        Mutation::attach_int(&l, m.entity(0), k)
    })
}

/// Writes one more than the entity's `a` onto the entity its reference
/// `r` points at.
pub fn follow(r: &Label, a: &Label) -> System {
    let l = a.clone();
    System::new("follow", QueryVector::single(Query::incl(r).and(Query::incl(a))), move |m| {
        let Some((target, value)) = m.result(0).as_pair() else { return Mutation::Nil };
        match (target.value().and_then(ComponentValue::as_entity), value.int()) {
            (Some(t), Some(v)) => Mutation::attach_int(&l, t, v + 1),
            _ => Mutation::Nil,
        }
    })
}

/// A system with its soundly declared set of writable labels.
#[derive(Clone, Debug)]
pub struct Instance {
    pub system: System,
    pub declared: BTreeSet<Label>,
}

/// A parameterised system: label parameters of fixed kinds and an integer
/// constant.
#[derive(Clone, Copy)]
pub struct SystemTemplate {
    pub name: &'static str,
    pub params: &'static [ComponentKind],
    /// Parameter positions the instantiated system may write.
    writes: &'static [usize],
    build: fn(&[Label], i64) -> System,
}

impl std::fmt::Debug for SystemTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SystemTemplate({})", self.name)
    }
}

impl SystemTemplate {
    pub fn instantiate(&self, schema: &Schema, labels: &[Label], k: i64) -> Result<Instance> {
        if labels.len() != self.params.len() {
            return Err(EcsError::Shape(format!("{} takes {} labels", self.name, self.params.len())));
        }
        for (l, want) in labels.iter().zip(self.params) {
            match schema.kind_of(l) {
                Some(k) if k == *want => {}
                Some(k) => return Err(EcsError::Schema(format!("{} needs {l} to be {want:?}, not {k:?}", self.name))),
                None => return Err(EcsError::Schema(format!("unknown component label {l}"))),
            }
        }
        let names: Vec<&str> = labels.iter().map(Label::as_str).collect();
        let system = (self.build)(labels, k).renamed(&format!("{}[{}]{k}", self.name, names.join(",")));
        let declared = self.writes.iter().map(|&i| labels[i].clone()).collect();
        Ok(Instance { system, declared })
    }
}

pub const TEMPLATES: &[SystemTemplate] = &[
    SystemTemplate { name: "inertia", params: &[Int, Int], writes: &[0], build: |l, _| inertia(&l[0], &l[1]) },
    SystemTemplate { name: "collide", params: &[Int, Int], writes: &[0, 1], build: |l, _| collide(&l[0], &l[1]) },
    SystemTemplate { name: "increment", params: &[Int], writes: &[0], build: |l, k| increment(&l[0], k) },
    SystemTemplate { name: "decrement", params: &[Int], writes: &[0], build: |l, k| decrement(&l[0], k) },
    SystemTemplate { name: "owned-update", params: &[Int], writes: &[0], build: |l, k| owned_update(&l[0], k) },
    SystemTemplate { name: "owned-insert", params: &[Int], writes: &[0], build: |l, k| owned_insert(&l[0], k) },
    SystemTemplate { name: "owned-initialize", params: &[Int], writes: &[0], build: |l, k| owned_initialize(&l[0], k) },
    SystemTemplate { name: "owned-delete", params: &[Int], writes: &[0], build: |l, _| owned_delete(&l[0]) },
    SystemTemplate {
        name: "deferred-write",
        params: &[Int, Int],
        writes: &[1],
        build: |l, k| deferred_write("deferred-write", &l[0], &l[1], k),
    },
    SystemTemplate {
        name: "deferred-initialize",
        params: &[Int, Int],
        writes: &[1],
        build: |l, k| deferred_initialize(&l[0], &l[1], k),
    },
    SystemTemplate {
        name: "deferred-delete",
        params: &[Int, Int],
        writes: &[1],
        build: |l, _| deferred_delete(&l[0], &l[1]),
    },
    SystemTemplate { name: "spread", params: &[Int, Int], writes: &[1], build: |l, _| spread(&l[0], &l[1]) },
    SystemTemplate { name: "stamp", params: &[Int], writes: &[0], build: |l, k| stamp(&l[0], k) },
    SystemTemplate { name: "follow", params: &[Ref, Int], writes: &[1], build: |l, _| follow(&l[0], &l[1]) },
];

pub fn template(name: &str) -> Option<&'static SystemTemplate> {
    TEMPLATES.iter().find(|t| t.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::mutation_influence;
    use crate::query::eval_query_vector;
    use crate::world::{EntityId, WorldState};

    fn world() -> (WorldState, Label, Label, Label) {
        let schema = Schema::new([
            ("A", ComponentKind::Integer),
            ("B", ComponentKind::Integer),
            ("R", ComponentKind::EntityRef),
        ])
        .unwrap();
        let (a, b, r) = (schema.label("A").unwrap(), schema.label("B").unwrap(), schema.label("R").unwrap());
        let mut w = WorldState::new(schema);
        for e in 0..3u64 {
            w.insert(EntityId(e), &ComponentValue::int(&a, e as i64)).unwrap();
        }
        w.insert(EntityId(1), &ComponentValue::int(&b, 5)).unwrap();
        w.insert(EntityId(3), &ComponentValue::int(&b, 2)).unwrap();
        w.insert(EntityId(0), &ComponentValue::entity(&r, EntityId(2))).unwrap();
        (w, a, b, r)
    }

    #[test]
    fn declared_labels_cover_observed_writes() {
        let (w, a, b, r) = world();
        for t in TEMPLATES {
            let labels: Vec<Label> = t
                .params
                .iter()
                .enumerate()
                .map(|(i, k)| match (k, i) {
                    (Ref, _) => r.clone(),
                    (_, 0) => a.clone(),
                    _ => b.clone(),
                })
                .collect();
            let inst = t.instantiate(w.schema(), &labels, 1).unwrap();
            for m in eval_query_vector(&w, inst.system.query()).unwrap() {
                let touched = mutation_influence(&inst.system.call(&m)).labels();
                assert!(touched.is_subset(&inst.declared), "{}: {touched:?}", t.name);
            }
        }
    }

    #[test]
    fn instantiation_checks_kinds() {
        let (w, a, _, r) = world();
        let t = template("follow").unwrap();
        assert!(t.instantiate(w.schema(), &[a.clone(), a.clone()], 0).is_err());
        assert!(t.instantiate(w.schema(), &[r], 0).is_err());
        let inst = t.instantiate(w.schema(), &[w.schema().label("R").unwrap(), a], 0).unwrap();
        assert_eq!(inst.system.name(), "follow[R,A]0");
    }

    #[test]
    fn adjust_pair_moves_towards_bound() {
        let (w, a, _, _) = world();
        let up = increment(&a, 1);
        let down = decrement(&a, 1);
        let ms = eval_query_vector(&w, up.query()).unwrap();
        let ups: Vec<bool> = ms.iter().map(|m| up.call(m).is_nil()).collect();
        let downs: Vec<bool> = ms.iter().map(|m| down.call(m).is_nil()).collect();
        assert_eq!(ups, vec![false, true, true]);
        assert_eq!(downs, vec![true, false, false]);
    }
}
