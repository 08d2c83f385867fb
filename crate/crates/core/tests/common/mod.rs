#![allow(dead_code)]

use coreecs::{ComponentKind, EntityId, Label, Mutation, Schema, WorldState};

pub fn pos_vel() -> (Schema, Label, Label) {
    let schema = Schema::new([("Pos", ComponentKind::Integer), ("Vel", ComponentKind::Integer)]).unwrap();
    let (pos, vel) = (schema.label("Pos").unwrap(), schema.label("Vel").unwrap());
    (schema, pos, vel)
}

/// A Pos/Vel world built by attaching at explicit ids.
pub fn pv_state(pos: &[(u64, i64)], vel: &[(u64, i64)]) -> WorldState {
    let (schema, p, v) = pos_vel();
    let m = Mutation::sequence(
        pos.iter()
            .map(|(e, x)| Mutation::attach_int(&p, EntityId(*e), *x))
            .chain(vel.iter().map(|(e, x)| Mutation::attach_int(&v, EntityId(*e), *x))),
    );
    WorldState::new(schema).apply(&m).unwrap()
}

/// The running example's state: three bodies, two of them moving.
pub fn three_bodies() -> WorldState {
    pv_state(&[(0, 1), (1, 7), (2, 9)], &[(0, 6), (2, -2)])
}

pub fn labels(c: &WorldState) -> (Label, Label) {
    (c.schema().label("Pos").unwrap(), c.schema().label("Vel").unwrap())
}
