//! Entities, the component schema and the columnar world state.
//!
//! A [`WorldState`] is an indexed family of partial maps, one per component
//! label, from entity ids to component payloads, plus the counter used to
//! hand out fresh entity ids. Stores are copy-on-write, so cloning a world is
//! cheap and every operation that "changes" a world returns a new one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{EcsError, Result};

/// Opaque entity identifier. Fresh ids are handed out sequentially and never
/// reused within one world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u64);

impl EntityId {
    pub const fn new(value: u64) -> Self {
        EntityId(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Name of a component store. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(name: &str) -> Self {
        Label(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(name: &str) -> Self {
        Label::new(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    Integer,
    /// Unit-valued marker component.
    Flag,
    /// A component whose value names another entity.
    EntityRef,
}

/// Ordered list of component labels and their kinds. The order is fixed at
/// construction and drives rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    entries: Vec<(Label, ComponentKind)>,
}

impl Schema {
    pub fn new<L: Into<Label>>(entries: impl IntoIterator<Item = (L, ComponentKind)>) -> Result<Self> {
        let entries: Vec<(Label, ComponentKind)> = entries.into_iter().map(|(l, k)| (l.into(), k)).collect();
        let mut seen = BTreeSet::new();
        for (label, _) in &entries {
            if !seen.insert(label.clone()) {
                return Err(EcsError::Schema(format!("duplicate component label {label}")));
            }
        }
        Ok(Schema { entries })
    }

    pub fn empty() -> Self {
        Schema { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Label, ComponentKind)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.entries.iter().map(|(l, _)| l)
    }

    pub fn index_of(&self, label: &Label) -> Option<usize> {
        self.entries.iter().position(|(l, _)| l == label)
    }

    pub fn kind_of(&self, label: &Label) -> Option<ComponentKind> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, k)| *k)
    }

    pub fn label(&self, name: &str) -> Result<Label> {
        self.entries
            .iter()
            .find(|(l, _)| l.as_str() == name)
            .map(|(l, _)| l.clone())
            .ok_or_else(|| EcsError::Schema(format!("unknown component label {name}")))
    }

    pub(crate) fn require(&self, label: &Label) -> Result<usize> {
        self.index_of(label).ok_or_else(|| EcsError::Schema(format!("unknown component label {label}")))
    }
}

/// The data carried by a component value; its variant must agree with the
/// kind declared for the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Payload {
    Int(i64),
    Flag,
    Entity(EntityId),
}

impl Payload {
    pub fn kind(&self) -> ComponentKind {
        match self {
            Payload::Int(_) => ComponentKind::Integer,
            Payload::Flag => ComponentKind::Flag,
            Payload::Entity(_) => ComponentKind::EntityRef,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentValue {
    pub label: Label,
    pub payload: Payload,
}

impl ComponentValue {
    pub fn new(label: Label, payload: Payload) -> Self {
        ComponentValue { label, payload }
    }

    pub fn int(label: &Label, value: i64) -> Self {
        ComponentValue::new(label.clone(), Payload::Int(value))
    }

    pub fn flag(label: &Label) -> Self {
        ComponentValue::new(label.clone(), Payload::Flag)
    }

    pub fn entity(label: &Label, target: EntityId) -> Self {
        ComponentValue::new(label.clone(), Payload::Entity(target))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.payload {
            Payload::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_entity(&self) -> Option<EntityId> {
        match self.payload {
            Payload::Entity(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for ComponentValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_value(f, &self.label, &self.payload)
    }
}

fn write_value(out: &mut impl fmt::Write, label: &Label, payload: &Payload) -> fmt::Result {
    match payload {
        // The `Int` store prints bare numbers.
        Payload::Int(v) if label.as_str() == "Int" => write!(out, "{v}"),
        Payload::Int(v) if *v < 0 => write!(out, "{label} ({v})"),
        Payload::Int(v) => write!(out, "{label} {v}"),
        Payload::Flag => write!(out, "{label}"),
        Payload::Entity(e) => write!(out, "{label} {e}"),
    }
}

pub(crate) type Store = BTreeMap<EntityId, Payload>;

/// The entity-component association plus the fresh-entity counter.
///
/// Invariants: every stored entity and every entity-valued payload is below
/// `next_fresh`; payload kinds match the schema.
#[derive(Clone, PartialEq, Eq)]
pub struct WorldState {
    schema: Arc<Schema>,
    stores: Vec<Arc<Store>>,
    next_fresh: EntityId,
}

impl WorldState {
    /// The empty world over `schema`: every store empty, next fresh id `e0`.
    pub fn new(schema: Schema) -> Self {
        WorldState::with_schema(Arc::new(schema))
    }

    pub fn with_schema(schema: Arc<Schema>) -> Self {
        let stores = (0..schema.len()).map(|_| Arc::new(Store::new())).collect();
        WorldState { schema, stores, next_fresh: EntityId(0) }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn shared_schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn next_fresh(&self) -> EntityId {
        self.next_fresh
    }

    pub fn store(&self, label: &Label) -> Result<&BTreeMap<EntityId, Payload>> {
        let idx = self.schema.require(label)?;
        Ok(&self.stores[idx])
    }

    pub fn get(&self, label: &Label, entity: EntityId) -> Option<ComponentValue> {
        let idx = self.schema.index_of(label)?;
        self.stores[idx].get(&entity).map(|p| ComponentValue::new(label.clone(), *p))
    }

    pub fn contains(&self, label: &Label, entity: EntityId) -> bool {
        self.schema.index_of(label).is_some_and(|idx| self.stores[idx].contains_key(&entity))
    }

    /// Entities with at least one component attached.
    pub fn live_entities(&self) -> BTreeSet<EntityId> {
        self.stores.iter().flat_map(|s| s.keys().copied()).collect()
    }

    pub fn is_live(&self, entity: EntityId) -> bool {
        self.stores.iter().any(|s| s.contains_key(&entity))
    }

    /// Returns the next fresh id together with the successor world.
    pub fn fresh_entity(&self) -> Result<(EntityId, WorldState)> {
        let mut next = self.clone();
        let e = next.alloc_fresh()?;
        Ok((e, next))
    }

    pub(crate) fn alloc_fresh(&mut self) -> Result<EntityId> {
        let e = self.next_fresh;
        let succ = e.0.checked_add(1).ok_or(EcsError::Capacity)?;
        self.next_fresh = EntityId(succ);
        Ok(e)
    }

    /// Raises the counter so that `entity` counts as already handed out.
    pub(crate) fn observe(&mut self, entity: EntityId) -> Result<()> {
        if entity >= self.next_fresh {
            let succ = entity.0.checked_add(1).ok_or(EcsError::Capacity)?;
            self.next_fresh = EntityId(succ);
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn set_next_fresh(&mut self, next: EntityId) {
        self.next_fresh = next;
    }

    pub(crate) fn insert(&mut self, entity: EntityId, value: &ComponentValue) -> Result<()> {
        let idx = self.schema.require(&value.label)?;
        let kind = self.schema.entries()[idx].1;
        if value.payload.kind() != kind {
            return Err(EcsError::Schema(format!(
                "component {} expects {:?}, got {:?}",
                value.label,
                kind,
                value.payload.kind()
            )));
        }
        self.observe(entity)?;
        if let Payload::Entity(target) = value.payload {
            self.observe(target)?;
        }
        Arc::make_mut(&mut self.stores[idx]).insert(entity, value.payload);
        Ok(())
    }

    pub(crate) fn remove(&mut self, label: &Label, entity: EntityId) -> Result<()> {
        let idx = self.schema.require(label)?;
        if self.stores[idx].contains_key(&entity) {
            Arc::make_mut(&mut self.stores[idx]).remove(&entity);
        }
        Ok(())
    }

    pub(crate) fn from_parts(schema: Arc<Schema>, stores: Vec<Store>, next_fresh: EntityId) -> Self {
        debug_assert_eq!(schema.len(), stores.len());
        WorldState { schema, stores: stores.into_iter().map(Arc::new).collect(), next_fresh }
    }

    pub(crate) fn stores(&self) -> impl Iterator<Item = &Store> {
        self.stores.iter().map(|s| s.as_ref())
    }

    /// Canonical one-line rendering: stores in schema order, entities
    /// ascending, followed by the fresh-id metadata.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((label, _), store) in self.schema.entries().iter().zip(&self.stores) {
            write!(f, "{label}↦{{")?;
            for (i, (e, payload)) in store.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{e} ↦ ")?;
                write_value(f, label, payload)?;
            }
            f.write_str("} :+ ")?;
        }
        write!(f, "Metadata {{nextFresh = {}}}", self.next_fresh)
    }
}

impl fmt::Debug for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos_vel() -> Schema {
        Schema::new([("Pos", ComponentKind::Integer), ("Vel", ComponentKind::Integer)]).unwrap()
    }

    #[test]
    fn empty_world_has_empty_stores() {
        let w = WorldState::new(pos_vel());
        assert_eq!(w.next_fresh(), EntityId(0));
        assert!(w.live_entities().is_empty());
        assert_eq!(w.render(), "Pos↦{} :+ Vel↦{} :+ Metadata {nextFresh = e0}");
    }

    #[test]
    fn empty_schema_renders_only_metadata() {
        let w = WorldState::new(Schema::empty());
        assert_eq!(w.schema().len(), 0);
        assert_eq!(w.render(), "Metadata {nextFresh = e0}");
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let err = Schema::new([("Pos", ComponentKind::Integer), ("Pos", ComponentKind::Integer)]);
        assert!(matches!(err, Err(EcsError::Schema(_))));
    }

    #[test]
    fn fresh_ids_are_sequential() {
        let w = WorldState::new(pos_vel());
        let (a, w) = w.fresh_entity().unwrap();
        let (b, w) = w.fresh_entity().unwrap();
        assert_eq!((a, b), (EntityId(0), EntityId(1)));
        assert_eq!(w.next_fresh(), EntityId(2));
        assert!(!w.is_live(a));
    }

    #[test]
    fn fresh_counter_overflow() {
        let mut w = WorldState::new(pos_vel());
        w.set_next_fresh(EntityId(u64::MAX));
        assert_eq!(w.fresh_entity().unwrap_err(), EcsError::Capacity);
    }

    #[test]
    fn single_store_liveness() {
        let schema = pos_vel();
        let vel = schema.label("Vel").unwrap();
        let mut w = WorldState::new(schema);
        w.insert(EntityId(5), &ComponentValue::int(&vel, 3)).unwrap();
        assert_eq!(w.live_entities(), BTreeSet::from([EntityId(5)]));
        assert_eq!(w.next_fresh(), EntityId(6));
        w.remove(&vel, EntityId(5)).unwrap();
        assert!(w.live_entities().is_empty());
    }

    #[test]
    fn kind_mismatch_is_a_schema_error() {
        let schema = pos_vel();
        let pos = schema.label("Pos").unwrap();
        let mut w = WorldState::new(schema);
        let err = w.insert(EntityId(0), &ComponentValue::flag(&pos)).unwrap_err();
        assert!(matches!(err, EcsError::Schema(_)));
    }

    #[test]
    fn render_formats() {
        let schema = Schema::new([
            ("Pos", ComponentKind::Integer),
            ("Tag", ComponentKind::Flag),
            ("Tgt", ComponentKind::EntityRef),
        ])
        .unwrap();
        let (pos, tag, tgt) =
            (schema.label("Pos").unwrap(), schema.label("Tag").unwrap(), schema.label("Tgt").unwrap());
        let mut w = WorldState::new(schema);
        w.insert(EntityId(0), &ComponentValue::int(&pos, -4)).unwrap();
        w.insert(EntityId(1), &ComponentValue::flag(&tag)).unwrap();
        w.insert(EntityId(1), &ComponentValue::entity(&tgt, EntityId(0))).unwrap();
        assert_eq!(
            w.render(),
            "Pos↦{e0 ↦ Pos (-4)} :+ Tag↦{e1 ↦ Tag} :+ Tgt↦{e1 ↦ Tgt e0} :+ Metadata {nextFresh = e2}"
        );
    }

    #[test]
    fn int_label_renders_bare_numbers() {
        let schema = Schema::new([("Int", ComponentKind::Integer)]).unwrap();
        let int = schema.label("Int").unwrap();
        let mut w = WorldState::new(schema);
        w.insert(EntityId(0), &ComponentValue::int(&int, 3)).unwrap();
        w.insert(EntityId(1), &ComponentValue::int(&int, 8)).unwrap();
        assert_eq!(w.render(), "Int↦{e0 ↦ 3, e1 ↦ 8} :+ Metadata {nextFresh = e2}");
    }
}
