//! Systems and the two ways of producing a mutation from one.

use std::fmt;
use std::sync::Arc;

use crate::error::{EcsError, Result};
use crate::mutation::Mutation;
use crate::query::{eval_query_vector, lookup_match, EntityMatch, QueryVector};
use crate::world::WorldState;

pub type SystemFn = Arc<dyn Fn(&EntityMatch) -> Mutation + Send + Sync>;

/// A query vector paired with a function from each match to a mutation.
///
/// The function must be pure: it may look only at its match, and the same
/// match must always yield the same mutation.
#[derive(Clone)]
pub struct System {
    name: Arc<str>,
    query: QueryVector,
    func: SystemFn,
}

impl System {
    pub fn new(
        name: &str,
        query: QueryVector,
        func: impl Fn(&EntityMatch) -> Mutation + Send + Sync + 'static,
    ) -> Self {
        System { name: Arc::from(name), query, func: Arc::new(func) }
    }

    /// The same system under another name.
    pub fn renamed(&self, name: &str) -> Self {
        System { name: Arc::from(name), ..self.clone() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn query(&self) -> &QueryVector {
        &self.query
    }

    pub fn call(&self, m: &EntityMatch) -> Mutation {
        (self.func)(m)
    }
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "System({} {})", self.name, self.query)
    }
}

/// Composes the mutations `s` produces for each match, left to right.
pub fn apply_system(s: &System, matches: &[EntityMatch]) -> Result<Mutation> {
    let shapes = s.query.shapes();
    let mut parts = Vec::with_capacity(matches.len());
    for m in matches {
        if !m.conforms(&shapes) {
            return Err(EcsError::Shape(format!("match {m} does not fit system {}", s.name)));
        }
        parts.push(s.call(m));
    }
    Ok(Mutation::sequence(parts))
}

/// Visits `matches` in order against a state that evolves by each retained
/// match's mutation. A match is refreshed from the evolving state, or dropped
/// if its entity vector no longer satisfies the query.
pub fn roll(s: &System, c: &WorldState, matches: &[EntityMatch]) -> Result<Vec<EntityMatch>> {
    let mut state = c.clone();
    let mut kept = Vec::new();
    for m in matches {
        if let Some(fresh) = lookup_match(&state, &s.query, &m.entities)? {
            state.apply_in_place(&s.call(&fresh))?;
            kept.push(fresh);
        }
    }
    Ok(kept)
}

/// Observes `c` once and runs `s` over every match.
pub fn concurrent_production(c: &WorldState, s: &System) -> Result<Mutation> {
    apply_system(s, &eval_query_vector(c, &s.query)?)
}

/// Runs `s` over the rolled matches, so each invocation sees the effects of
/// the ones before it.
pub fn sequential_production(c: &WorldState, s: &System) -> Result<Mutation> {
    let matches = eval_query_vector(c, &s.query)?;
    apply_system(s, &roll(s, c, &matches)?)
}
