//! Schedules: trees of systems run concurrently or in sequence.

use std::fmt;

use crate::error::{EcsError, Result};
use crate::mutation::Mutation;
use crate::system::{concurrent_production, sequential_production, System};
use crate::world::{EntityId, WorldState};

#[derive(Clone, Debug)]
pub enum Schedule {
    /// Every match of one query is processed against the same state.
    Conc(System),
    /// Matches are processed one after another, each seeing the last.
    Seq(System),
    /// Both sides observe the same state; their mutations are composed.
    Par(Box<Schedule>, Box<Schedule>),
    /// The right side runs on the state the left side produced.
    Then(Box<Schedule>, Box<Schedule>),
}

impl Schedule {
    pub fn conc(s: System) -> Self {
        Schedule::Conc(s)
    }

    pub fn seq(s: System) -> Self {
        Schedule::Seq(s)
    }

    pub fn par(self, other: Schedule) -> Self {
        Schedule::Par(Box::new(self), Box::new(other))
    }

    pub fn then(self, other: Schedule) -> Self {
        Schedule::Then(Box::new(self), Box::new(other))
    }

    /// Leaf systems in left-to-right order.
    pub fn systems(&self) -> Vec<&System> {
        let mut out = Vec::new();
        self.collect_systems(&mut out);
        out
    }

    fn collect_systems<'a>(&'a self, out: &mut Vec<&'a System>) {
        match self {
            Schedule::Conc(s) | Schedule::Seq(s) => out.push(s),
            Schedule::Par(a, b) | Schedule::Then(a, b) => {
                a.collect_systems(out);
                b.collect_systems(out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Schedule::Conc(_) | Schedule::Seq(_) => 1,
            Schedule::Par(a, b) | Schedule::Then(a, b) => a.leaf_count() + b.leaf_count(),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Conc(s) => write!(f, "Conc {}", s.name()),
            Schedule::Seq(s) => write!(f, "Seq {}", s.name()),
            Schedule::Par(a, b) => write!(f, "({a} || {b})"),
            Schedule::Then(a, b) => write!(f, "({a} ; {b})"),
        }
    }
}

/// The mutation `z` produces at `c`.
pub fn interpret_schedule(c: &WorldState, z: &Schedule) -> Result<Mutation> {
    match z {
        Schedule::Conc(s) => concurrent_production(c, s),
        Schedule::Seq(s) => sequential_production(c, s),
        Schedule::Par(a, b) => {
            let left = interpret_schedule(c, a)?;
            let right = interpret_schedule(&past_fresh(c, left.fresh_count())?, b)?;
            Ok(left.then(right))
        }
        Schedule::Then(a, b) => {
            let left = interpret_schedule(c, a)?;
            let mid = c.apply(&left)?;
            Ok(left.then(interpret_schedule(&mid, b)?))
        }
    }
}

/// `c` with `count` fresh ids already handed out. The right side of a `Par`
/// observes this, so ids it creates and then names in a later step are the
/// ones it is given once composed after the left side.
pub(crate) fn past_fresh(c: &WorldState, count: u64) -> Result<WorldState> {
    let mut out = c.clone();
    if count > 0 {
        let last = c.next_fresh().0.checked_add(count - 1).ok_or(EcsError::Capacity)?;
        out.observe(EntityId(last))?;
    }
    Ok(out)
}

/// `c` updated by the mutation `z` produces at `c`.
pub fn apply_schedule(c: &WorldState, z: &Schedule) -> Result<WorldState> {
    c.apply(&interpret_schedule(c, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{Query, QueryVector};
    use crate::world::{ComponentKind, ComponentValue, Label, Schema};

    #[test]
    fn par_of_a_schedule_with_itself_duplicates_its_mutation() {
        let schema = Schema::new([("Int", ComponentKind::Integer)]).unwrap();
        let int = schema.label("Int").unwrap();
        let mut w = WorldState::new(schema);
        w.insert(EntityId(0), &ComponentValue::int(&int, 1)).unwrap();
        let l = int.clone();
        let bump = System::new("bump", QueryVector::single(Query::incl(&int)), move |m| {
            Mutation::attach_int(&l, m.entity(0), m.result(0).int().unwrap() + 1)
        });
        let z = Schedule::conc(bump.clone());
        let m = interpret_schedule(&w, &z.clone().par(z.clone())).unwrap();
        // Both copies read Int 1; the second write of 2 wins.
        assert_eq!(m.steps(EntityId(1)).len(), 2);
        assert_eq!(w.apply(&m).unwrap().get(&int, EntityId(0)).unwrap().as_int(), Some(2));
        // Sequential composition feeds the first result into the second.
        let twice = apply_schedule(&w, &z.clone().then(z.clone())).unwrap();
        assert_eq!(twice, apply_schedule(&apply_schedule(&w, &z).unwrap(), &z).unwrap());
        assert_eq!(twice.get(&int, EntityId(0)).unwrap().as_int(), Some(3));
    }

    #[test]
    fn par_right_side_names_its_own_fresh_entities() {
        let schema = Schema::new([("Int", ComponentKind::Integer), ("Mark", ComponentKind::Integer)]).unwrap();
        let (int, mark) = (schema.label("Int").unwrap(), schema.label("Mark").unwrap());
        let mut w = WorldState::new(schema);
        w.insert(EntityId(0), &ComponentValue::int(&int, 1)).unwrap();
        let spawner = |name: &str, target: &Label, v: i64| {
            let t = target.clone();
            System::new(name, QueryVector::single(Query::incl(&int)), move |_| {
                let t = t.clone();
                Mutation::fresh(move |e| Mutation::attach_int(&t, e, v))
            })
        };
        let m2 = mark.clone();
        let stamp = System::new("stamp", QueryVector::single(Query::incl(&mark)), move |m| {
            Mutation::attach_int(&m2, m.entity(0), 5)
        });
        let z = Schedule::conc(spawner("left", &int, 10))
            .par(Schedule::conc(spawner("right", &mark, 0)).then(Schedule::conc(stamp)));
        let out = apply_schedule(&w, &z).unwrap();
        assert_eq!(out.get(&int, EntityId(1)).unwrap().as_int(), Some(10));
        assert!(!out.contains(&mark, EntityId(1)));
        assert_eq!(out.get(&mark, EntityId(2)).unwrap().as_int(), Some(5));
        assert_eq!(out.next_fresh(), EntityId(3));
    }

    #[test]
    fn empty_world_interprets_to_nil() {
        let schema = Schema::new([("Int", ComponentKind::Integer)]).unwrap();
        let int = schema.label("Int").unwrap();
        let w = WorldState::new(schema);
        let s = System::new("drop", QueryVector::single(Query::incl(&int)), |_| Mutation::Nil);
        assert!(interpret_schedule(&w, &Schedule::seq(s)).unwrap().is_nil());
    }
}
