//! Queries over a world and the entity matches they produce.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{EcsError, Result};
use crate::world::{ComponentValue, EntityId, Label, Schema, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Query {
    /// Entities that have the component; yields its value.
    Incl(Label),
    /// Live entities that lack the component; yields unit.
    Excl(Label),
    /// Every live entity; yields the value if present.
    Anyway(Label),
    /// Entities matching both sides; yields the pair of results.
    And(Box<Query>, Box<Query>),
}

impl Query {
    pub fn incl(label: &Label) -> Self {
        Query::Incl(label.clone())
    }

    pub fn excl(label: &Label) -> Self {
        Query::Excl(label.clone())
    }

    pub fn anyway(label: &Label) -> Self {
        Query::Anyway(label.clone())
    }

    pub fn and(self, other: Query) -> Self {
        Query::And(Box::new(self), Box::new(other))
    }

    /// Every label the query mentions.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut BTreeSet<Label>) {
        match self {
            Query::Incl(l) | Query::Excl(l) | Query::Anyway(l) => {
                out.insert(l.clone());
            }
            Query::And(a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
        }
    }

    /// Shape of the results, without checking labels against a schema.
    pub fn shape(&self) -> ResultShape {
        match self {
            Query::Incl(l) => ResultShape::Component(l.clone()),
            Query::Excl(_) => ResultShape::Unit,
            Query::Anyway(l) => ResultShape::Optional(l.clone()),
            Query::And(a, b) => ResultShape::Pair(Box::new(a.shape()), Box::new(b.shape())),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Incl(l) => write!(f, "Incl {l}"),
            Query::Excl(l) => write!(f, "Excl {l}"),
            Query::Anyway(l) => write!(f, "Anyway {l}"),
            Query::And(a, b) => write!(f, "({a} & {b})"),
        }
    }
}

/// A nonempty sequence of queries whose results are combined by cartesian
/// product.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryVector(Vec<Query>);

impl QueryVector {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        if queries.is_empty() {
            return Err(EcsError::Shape("a query vector needs at least one query".into()));
        }
        Ok(QueryVector(queries))
    }

    pub fn single(query: Query) -> Self {
        QueryVector(vec![query])
    }

    pub fn pair(first: Query, second: Query) -> Self {
        QueryVector(vec![first, second])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn queries(&self) -> &[Query] {
        &self.0
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.0.iter().flat_map(Query::labels).collect()
    }

    pub fn shapes(&self) -> Vec<ResultShape> {
        self.0.iter().map(Query::shape).collect()
    }
}

impl fmt::Display for QueryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{q}")?;
        }
        f.write_str(">")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ResultShape {
    Component(Label),
    Unit,
    Optional(Label),
    Pair(Box<ResultShape>, Box<ResultShape>),
}

impl ResultShape {
    /// Labels whose values appear in results of this shape.
    pub fn value_labels(&self) -> Vec<Label> {
        match self {
            ResultShape::Component(l) | ResultShape::Optional(l) => vec![l.clone()],
            ResultShape::Unit => Vec::new(),
            ResultShape::Pair(a, b) => {
                let mut out = a.value_labels();
                out.extend(b.value_labels());
                out
            }
        }
    }
}

pub fn result_shape(schema: &Schema, q: &Query) -> Result<ResultShape> {
    for label in q.labels() {
        schema.require(&label)?;
    }
    Ok(q.shape())
}

pub fn vector_shape(schema: &Schema, qv: &QueryVector) -> Result<Vec<ResultShape>> {
    qv.queries().iter().map(|q| result_shape(schema, q)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ComponentResult {
    Value(ComponentValue),
    Unit,
    Optional(Option<ComponentValue>),
    Pair(Box<ComponentResult>, Box<ComponentResult>),
}

impl ComponentResult {
    pub fn pair(a: ComponentResult, b: ComponentResult) -> Self {
        ComponentResult::Pair(Box::new(a), Box::new(b))
    }

    /// The component value, for `Value` and present `Optional` results.
    pub fn value(&self) -> Option<&ComponentValue> {
        match self {
            ComponentResult::Value(v) | ComponentResult::Optional(Some(v)) => Some(v),
            _ => None,
        }
    }

    pub fn int(&self) -> Option<i64> {
        self.value().and_then(ComponentValue::as_int)
    }

    pub fn as_pair(&self) -> Option<(&ComponentResult, &ComponentResult)> {
        match self {
            ComponentResult::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn conforms(&self, shape: &ResultShape) -> bool {
        match (self, shape) {
            (ComponentResult::Value(v), ResultShape::Component(l)) => &v.label == l,
            (ComponentResult::Unit, ResultShape::Unit) => true,
            (ComponentResult::Optional(v), ResultShape::Optional(l)) => v.as_ref().is_none_or(|v| &v.label == l),
            (ComponentResult::Pair(a, b), ResultShape::Pair(sa, sb)) => a.conforms(sa) && b.conforms(sb),
            _ => false,
        }
    }
}

impl fmt::Display for ComponentResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentResult::Value(v) | ComponentResult::Optional(Some(v)) => write!(f, "{v}"),
            ComponentResult::Unit | ComponentResult::Optional(None) => f.write_str("()"),
            ComponentResult::Pair(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

/// One element of a query vector's result: a vector of entities and the
/// component results found for each.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntityMatch {
    pub entities: Vec<EntityId>,
    pub results: Vec<ComponentResult>,
}

impl EntityMatch {
    pub fn new(entities: Vec<EntityId>, results: Vec<ComponentResult>) -> Self {
        EntityMatch { entities, results }
    }

    pub fn dim(&self) -> usize {
        self.entities.len()
    }

    pub fn entity(&self, j: usize) -> EntityId {
        self.entities[j]
    }

    pub fn result(&self, j: usize) -> &ComponentResult {
        &self.results[j]
    }

    pub fn conforms(&self, shapes: &[ResultShape]) -> bool {
        self.entities.len() == shapes.len()
            && self.results.len() == shapes.len()
            && self.results.iter().zip(shapes).all(|(r, s)| r.conforms(s))
    }
}

impl fmt::Display for EntityMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, e) in self.entities.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("> -> <")?;
        for (i, r) in self.results.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(">")
    }
}

/// The result of `q` at a single entity, if the entity is in its domain.
/// Labels must already be known to be in the schema.
fn eval_at(c: &WorldState, q: &Query, e: EntityId) -> Option<ComponentResult> {
    match q {
        Query::Incl(l) => c.get(l, e).map(ComponentResult::Value),
        Query::Excl(l) => (c.is_live(e) && !c.contains(l, e)).then_some(ComponentResult::Unit),
        Query::Anyway(l) => c.is_live(e).then(|| ComponentResult::Optional(c.get(l, e))),
        Query::And(a, b) => {
            let ra = eval_at(c, a, e)?;
            let rb = eval_at(c, b, e)?;
            Some(ComponentResult::pair(ra, rb))
        }
    }
}

/// Entities worth testing for `q`: one store's domain if the query has an
/// `Incl` on its spine, otherwise every live entity.
fn candidates(c: &WorldState, q: &Query) -> Vec<EntityId> {
    fn incl_label(q: &Query) -> Option<&Label> {
        match q {
            Query::Incl(l) => Some(l),
            Query::And(a, b) => incl_label(a).or_else(|| incl_label(b)),
            _ => None,
        }
    }
    match incl_label(q).and_then(|l| c.store(l).ok()) {
        Some(store) => store.keys().copied().collect(),
        None => c.live_entities().into_iter().collect(),
    }
}

pub fn eval_query(c: &WorldState, q: &Query) -> Result<BTreeMap<EntityId, ComponentResult>> {
    result_shape(c.schema(), q)?;
    Ok(candidates(c, q).into_iter().filter_map(|e| eval_at(c, q, e).map(|r| (e, r))).collect())
}

/// Cartesian product of the per-query results, ordered lexicographically by
/// entity vector.
pub fn eval_query_vector(c: &WorldState, qv: &QueryVector) -> Result<Vec<EntityMatch>> {
    let columns: Vec<Vec<(EntityId, ComponentResult)>> =
        qv.queries().iter().map(|q| eval_query(c, q).map(|m| m.into_iter().collect())).collect::<Result<_>>()?;
    let mut out = vec![EntityMatch::new(Vec::new(), Vec::new())];
    // Each column is already sorted, so extending prefixes in order keeps the
    // product sorted.
    for column in &columns {
        let mut next = Vec::with_capacity(out.len() * column.len());
        for prefix in &out {
            for (e, r) in column {
                let mut m = prefix.clone();
                m.entities.push(*e);
                m.results.push(r.clone());
                next.push(m);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Re-evaluates `qv` at a fixed entity vector. `None` if the vector is no
/// longer in the query's result.
pub fn lookup_match(c: &WorldState, qv: &QueryVector, entities: &[EntityId]) -> Result<Option<EntityMatch>> {
    if entities.len() != qv.dim() {
        return Err(EcsError::Shape(format!(
            "entity vector of length {} for a query vector of dimension {}",
            entities.len(),
            qv.dim()
        )));
    }
    vector_shape(c.schema(), qv)?;
    let mut results = Vec::with_capacity(entities.len());
    for (q, e) in qv.queries().iter().zip(entities) {
        match eval_at(c, q, *e) {
            Some(r) => results.push(r),
            None => return Ok(None),
        }
    }
    Ok(Some(EntityMatch::new(entities.to_vec(), results)))
}
