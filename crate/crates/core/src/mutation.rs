//! Mutations: composable descriptions of state updates, their interpretation
//! against a world, and their influence (the cells they necessarily touch).

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::world::{ComponentValue, EntityId, Label, WorldState};

/// Body of a `Fresh` mutation, called with the newly allocated entity.
///
/// Must be pure and must not inspect the numeric value of its argument.
pub type FreshFn = Arc<dyn Fn(EntityId) -> Mutation + Send + Sync>;

#[derive(Clone)]
pub enum Mutation {
    Attach {
        entity: EntityId,
        value: ComponentValue,
    },
    Detach {
        label: Label,
        entity: EntityId,
    },
    /// Apply the left side, then the right side. Later writes win.
    Compose(Box<Mutation>, Box<Mutation>),
    Fresh(FreshFn),
    Nil,
}

impl Mutation {
    pub fn attach(entity: EntityId, value: ComponentValue) -> Self {
        Mutation::Attach { entity, value }
    }

    pub fn attach_int(label: &Label, entity: EntityId, value: i64) -> Self {
        Mutation::attach(entity, ComponentValue::int(label, value))
    }

    pub fn detach(label: &Label, entity: EntityId) -> Self {
        Mutation::Detach { label: label.clone(), entity }
    }

    pub fn fresh(body: impl Fn(EntityId) -> Mutation + Send + Sync + 'static) -> Self {
        Mutation::Fresh(Arc::new(body))
    }

    pub fn then(self, next: Mutation) -> Self {
        Mutation::Compose(Box::new(self), Box::new(next))
    }

    /// Left fold with `then`; an empty sequence yields `Nil` and a single
    /// mutation is returned unchanged.
    pub fn sequence(parts: impl IntoIterator<Item = Mutation>) -> Self {
        let mut iter = parts.into_iter();
        match iter.next() {
            None => Mutation::Nil,
            Some(first) => iter.fold(first, Mutation::then),
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Mutation::Nil)
    }

    /// Flattens into primitive steps, expanding each `Fresh` with ids
    /// allocated sequentially from `first_fresh`.
    pub fn steps(&self, first_fresh: EntityId) -> Vec<Step> {
        let mut next = first_fresh.0;
        let mut out = Vec::new();
        walk(
            self,
            &mut |e| {
                let id = EntityId(next);
                next += 1;
                e(id)
            },
            &mut out,
        );
        out
    }

    /// Number of fresh entities applying this mutation allocates.
    pub fn fresh_count(&self) -> u64 {
        let mut count = 0;
        let mut sentinel = SentinelSource::new();
        let mut stack: Vec<Work<'_>> = vec![Work::Borrowed(self)];
        while let Some(item) = stack.pop() {
            let leaf = match item {
                Work::Borrowed(Mutation::Compose(a, b)) => {
                    stack.push(Work::Borrowed(b));
                    stack.push(Work::Borrowed(a));
                    continue;
                }
                Work::Owned(Mutation::Compose(a, b)) => {
                    stack.push(Work::Owned(*b));
                    stack.push(Work::Owned(*a));
                    continue;
                }
                other => other,
            };
            if let Mutation::Fresh(f) = leaf.get() {
                count += 1;
                stack.push(Work::Owned(f(sentinel.take())));
            }
        }
        count
    }
}

/// Expands a `Fresh` body into the mutation it denotes.
type Expand<'a> = dyn FnMut(&dyn Fn(EntityId) -> Mutation) -> Mutation + 'a;

fn walk(m: &Mutation, fresh: &mut Expand<'_>, out: &mut Vec<Step>) {
    match m {
        Mutation::Attach { entity, value } => out.push(Step::Attach(*entity, value.clone())),
        Mutation::Detach { label, entity } => out.push(Step::Detach(label.clone(), *entity)),
        Mutation::Compose(a, b) => {
            walk(a, fresh, out);
            walk(b, fresh, out);
        }
        Mutation::Fresh(f) => {
            let inner = fresh(f.as_ref());
            walk(&inner, fresh, out);
        }
        Mutation::Nil => {}
    }
}

/// A primitive write, as produced by [`Mutation::steps`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Attach(EntityId, ComponentValue),
    Detach(Label, EntityId),
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Attach(e, v) => write!(f, "attach {} {e} ({v})", v.label),
            Step::Detach(l, e) => write!(f, "detach {l} {e}"),
        }
    }
}

impl fmt::Debug for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::Attach { entity, value } => write!(f, "Attach({}, {entity}, {value})", value.label),
            Mutation::Detach { label, entity } => write!(f, "Detach({label}, {entity})"),
            Mutation::Compose(a, b) => write!(f, "({a:?} • {b:?})"),
            Mutation::Fresh(_) => f.write_str("Fresh(<fn>)"),
            Mutation::Nil => f.write_str("Nil"),
        }
    }
}

enum Work<'a> {
    Borrowed(&'a Mutation),
    Owned(Mutation),
}

impl Work<'_> {
    fn get(&self) -> &Mutation {
        match self {
            Work::Borrowed(m) => m,
            Work::Owned(m) => m,
        }
    }
}

impl WorldState {
    /// `c ↓ m`: the world after applying `m`.
    pub fn apply(&self, m: &Mutation) -> Result<WorldState> {
        let mut next = self.clone();
        next.apply_in_place(m)?;
        Ok(next)
    }

    pub fn apply_in_place(&mut self, m: &Mutation) -> Result<()> {
        self.apply_with(m, &mut |w: &mut WorldState| w.alloc_fresh())
    }

    /// Applies `m`, obtaining fresh entities from `fresh` instead of the
    /// world's own counter.
    pub(crate) fn apply_with(
        &mut self,
        m: &Mutation,
        fresh: &mut dyn FnMut(&mut WorldState) -> Result<EntityId>,
    ) -> Result<()> {
        let mut stack: Vec<Work<'_>> = vec![Work::Borrowed(m)];
        while let Some(item) = stack.pop() {
            let leaf = match item {
                Work::Borrowed(Mutation::Compose(a, b)) => {
                    stack.push(Work::Borrowed(b));
                    stack.push(Work::Borrowed(a));
                    continue;
                }
                Work::Owned(Mutation::Compose(a, b)) => {
                    stack.push(Work::Owned(*b));
                    stack.push(Work::Owned(*a));
                    continue;
                }
                other => other,
            };
            match leaf.get() {
                Mutation::Attach { entity, value } => self.insert(*entity, value)?,
                Mutation::Detach { label, entity } => self.remove(label, *entity)?,
                Mutation::Fresh(f) => {
                    let e = fresh(self)?;
                    self.observe(e)?;
                    stack.push(Work::Owned(f(e)));
                }
                Mutation::Compose(..) | Mutation::Nil => {}
            }
        }
        Ok(())
    }
}

/// Free-function form of [`WorldState::apply`].
pub fn apply_mutation(c: &WorldState, m: &Mutation) -> Result<WorldState> {
    c.apply(m)
}

/// Set of (entity, label) cells a mutation or schedule necessarily affects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Influence(BTreeSet<(EntityId, Label)>);

impl Influence {
    pub fn new() -> Self {
        Influence::default()
    }

    pub fn singleton(entity: EntityId, label: Label) -> Self {
        Influence(BTreeSet::from([(entity, label)]))
    }

    pub fn insert(&mut self, entity: EntityId, label: Label) {
        self.0.insert((entity, label));
    }

    pub fn extend(&mut self, other: &Influence) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn union(&self, other: &Influence) -> Influence {
        Influence(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &Influence) -> Influence {
        Influence(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn is_disjoint(&self, other: &Influence) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn contains(&self, entity: EntityId, label: &Label) -> bool {
        self.0.contains(&(entity, label.clone()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(EntityId, Label)> {
        self.0.iter()
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.0.iter().map(|(_, l)| l.clone()).collect()
    }
}

impl FromIterator<(EntityId, Label)> for Influence {
    fn from_iter<T: IntoIterator<Item = (EntityId, Label)>>(iter: T) -> Self {
        Influence(iter.into_iter().collect())
    }
}

impl fmt::Display for Influence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (e, l)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({e}, {l})")?;
        }
        f.write_str("}")
    }
}

/// Hands out distinct placeholder entities from the top of the id space,
/// far above any counter a real world reaches.
struct SentinelSource(u64);

impl SentinelSource {
    fn new() -> Self {
        SentinelSource(u64::MAX)
    }

    fn take(&mut self) -> EntityId {
        let e = EntityId(self.0);
        self.0 -= 1;
        e
    }
}

/// The cells `m` necessarily affects.
///
/// A `Fresh` body is evaluated at two distinct sentinel entities and only the
/// influence common to both is kept, which discards everything attached to
/// the fresh entity itself. Exact for bodies that treat their argument
/// opaquely.
pub fn mutation_influence(m: &Mutation) -> Influence {
    let mut sentinels = SentinelSource::new();
    influence_rec(m, &mut sentinels)
}

fn influence_rec(m: &Mutation, sentinels: &mut SentinelSource) -> Influence {
    match m {
        Mutation::Attach { entity, value } => Influence::singleton(*entity, value.label.clone()),
        Mutation::Detach { label, entity } => Influence::singleton(*entity, label.clone()),
        Mutation::Compose(a, b) => {
            let mut out = influence_rec(a, sentinels);
            out.extend(&influence_rec(b, sentinels));
            out
        }
        Mutation::Fresh(f) => {
            let (s1, s2) = (sentinels.take(), sentinels.take());
            let left = influence_rec(&f(s1), sentinels);
            let right = influence_rec(&f(s2), sentinels);
            left.intersection(&right)
        }
        Mutation::Nil => Influence::new(),
    }
}
