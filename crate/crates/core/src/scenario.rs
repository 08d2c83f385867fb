//! The demo programs and the mutation-category suite.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::catalogue::{
    collide, decrement, deferred_delete, deferred_initialize, deferred_write, increment, inertia, owned_delete,
    owned_initialize, owned_insert, owned_update,
};
use crate::error::Result;
use crate::mutation::Mutation;
use crate::runtime::{run_parallel, RunConfig};
use crate::schedule::{apply_schedule, Schedule};
use crate::world::{ComponentKind, Label, Schema, WorldState};

/// A world, a schedule and how many frames to run it for.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub schema: Arc<Schema>,
    /// Builds the start state from the empty world.
    pub init: Mutation,
    pub schedule: Schedule,
    pub frames: usize,
    /// What [`Scenario::render_frames`] prints for `frames` frames.
    pub expected_output: Option<String>,
    /// Labels each system may write, by system name.
    pub declared: BTreeMap<String, BTreeSet<Label>>,
}

impl Scenario {
    pub fn start_state(&self) -> Result<WorldState> {
        WorldState::with_schema(self.schema.clone()).apply(&self.init)
    }

    /// The start state followed by the state after each frame.
    pub fn run_reference(&self, frames: usize) -> Result<Vec<WorldState>> {
        let mut states = vec![self.start_state()?];
        for _ in 0..frames {
            let next = apply_schedule(states.last().expect("nonempty"), &self.schedule)?;
            states.push(next);
        }
        Ok(states)
    }

    /// Like [`Scenario::run_reference`], with the threaded runtime. Each
    /// frame uses a distinct seed derived from `cfg.seed`.
    pub fn run_parallel(&self, frames: usize, cfg: RunConfig) -> Result<Vec<WorldState>> {
        let mut states = vec![self.start_state()?];
        for f in 0..frames {
            let frame_cfg = RunConfig { seed: cfg.seed.wrapping_add(f as u64), ..cfg };
            let (next, _) = run_parallel(states.last().expect("nonempty"), &self.schedule, frame_cfg)?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn system_labels(&self, name: &str) -> Option<&BTreeSet<Label>> {
        self.declared.get(name)
    }

    pub fn label(&self, name: &str) -> Label {
        self.schema.label(name).expect("scenario label")
    }
}

/// One line per state, the last one suffixed with ` END`.
pub fn render_frames(states: &[WorldState]) -> String {
    let mut out = String::new();
    for (i, s) in states.iter().enumerate() {
        out.push_str(&s.render());
        if i + 1 == states.len() {
            out.push_str(" END");
        }
        out.push('\n');
    }
    out
}

/// A chain of `Fresh` mutations creating one entity per row.
fn spawn_rows(rows: &[&[(&Label, i64)]]) -> Mutation {
    Mutation::sequence(rows.iter().map(|row| {
        let row: Vec<(Label, i64)> = row.iter().map(|(l, v)| ((*l).clone(), *v)).collect();
        Mutation::fresh(move |e| Mutation::sequence(row.iter().map(|(l, v)| Mutation::attach_int(l, e, *v))))
    }))
}

fn pos_vel() -> (Arc<Schema>, Label, Label) {
    let schema = Schema::new([("Pos", ComponentKind::Integer), ("Vel", ComponentKind::Integer)]).expect("schema");
    let (pos, vel) = (schema.label("Pos").expect("Pos"), schema.label("Vel").expect("Vel"));
    (Arc::new(schema), pos, vel)
}

fn declared(entries: &[(&str, &[&Label])]) -> BTreeMap<String, BTreeSet<Label>> {
    entries.iter().map(|(n, ls)| (n.to_string(), ls.iter().map(|l| (*l).clone()).collect())).collect()
}

const TOY_PHYSICS_OUTPUT: &str = "\
Pos↦{e0 ↦ Pos 1, e1 ↦ Pos 7, e2 ↦ Pos 9} :+ Vel↦{e0 ↦ Vel 6, e2 ↦ Vel (-2)} :+ Metadata {nextFresh = e3}
Pos↦{e1 ↦ Pos 7, e2 ↦ Pos 7, e3 ↦ Pos 7} :+ Vel↦{e1 ↦ Vel 3, e2 ↦ Vel (-2), e3 ↦ Vel (-3)} :+ Metadata {nextFresh = e4}
Pos↦{e1 ↦ Pos 10, e2 ↦ Pos 5, e3 ↦ Pos 4} :+ Vel↦{e1 ↦ Vel 3, e2 ↦ Vel (-2), e3 ↦ Vel (-3)} :+ Metadata {nextFresh = e4} END
";

const DISJOINT_ENTITIES_OUTPUT: &str = "\
Int↦{e0 ↦ 3, e1 ↦ 8} :+ Metadata {nextFresh = e2}
Int↦{e0 ↦ 4, e1 ↦ 7} :+ Metadata {nextFresh = e2}
Int↦{e0 ↦ 3, e1 ↦ 6} :+ Metadata {nextFresh = e2} END
";

/// Three bodies on a line: two moving towards a stationary one.
/// Schedule: concurrent inertia, then sequential collision resolution.
pub fn toy_physics_scenario() -> Scenario {
    let (schema, pos, vel) = pos_vel();
    Scenario {
        name: "toy-phys".into(),
        init: spawn_rows(&[&[(&pos, 1), (&vel, 6)], &[(&pos, 7)], &[(&pos, 9), (&vel, -2)]]),
        schedule: Schedule::conc(inertia(&pos, &vel)).then(Schedule::seq(collide(&pos, &vel))),
        frames: 2,
        expected_output: Some(TOY_PHYSICS_OUTPUT.into()),
        declared: declared(&[("inertia", &[&pos]), ("collide", &[&pos, &vel])]),
        schema,
    }
}

/// Two counters pulled towards 4 by an incrementer and a decrementer
/// running side by side.
pub fn disjoint_entities_scenario() -> Scenario {
    let schema = Arc::new(Schema::new([("Int", ComponentKind::Integer)]).expect("schema"));
    let int = schema.label("Int").expect("Int");
    Scenario {
        name: "disjoint-entities".into(),
        init: spawn_rows(&[&[(&int, 3)], &[(&int, 8)]]),
        schedule: Schedule::conc(increment(&int, 4)).par(Schedule::conc(decrement(&int, 4))),
        frames: 2,
        expected_output: Some(DISJOINT_ENTITIES_OUTPUT.into()),
        declared: declared(&[("increment", &[&int]), ("decrement", &[&int])]),
        schema,
    }
}

/// The toy-physics start state, one frame before both moving bodies reach
/// the stationary one, run with collision resolution made concurrent.
pub fn lost_write_scenario() -> Scenario {
    let mut s = toy_physics_scenario();
    let (pos, vel) = (s.label("Pos"), s.label("Vel"));
    s.name = "lost-write".into();
    s.schedule = Schedule::conc(inertia(&pos, &vel)).then(Schedule::conc(collide(&pos, &vel)));
    s.frames = 1;
    s.expected_output = None;
    s
}

/// Name, start rows, system, label it writes, expected output.
type CategoryRow<'a> = (&'a str, &'a [&'a [(&'a Label, i64)]], crate::system::System, &'a Label, String);

/// One scenario per mutation category, each a single concurrent system run
/// for one frame. The start states realise each row's side condition.
pub fn mutation_category_suite() -> Vec<Scenario> {
    let (schema, pos, vel) = pos_vel();
    let base = [&[(&pos, 1)][..], &[(&pos, 2), (&vel, 3)]];
    let lone_vel = [&[(&pos, 1)][..], &[(&vel, 3)]];
    let has_vel = [&[(&pos, 1), (&vel, 4)][..], &[(&vel, 5)]];
    let no_vel = [&[(&pos, 1)][..], &[(&pos, 2)]];
    let s1 = "Pos↦{e0 ↦ Pos 1, e1 ↦ Pos 2} :+ Vel↦{e1 ↦ Vel 3} :+ Metadata {nextFresh = e2}";
    let s2 = "Pos↦{e0 ↦ Pos 1} :+ Vel↦{e1 ↦ Vel 3} :+ Metadata {nextFresh = e2}";
    let s3 = "Pos↦{e0 ↦ Pos 1} :+ Vel↦{e0 ↦ Vel 4, e1 ↦ Vel 5} :+ Metadata {nextFresh = e2}";
    let s4 = "Pos↦{e0 ↦ Pos 1, e1 ↦ Pos 2} :+ Vel↦{} :+ Metadata {nextFresh = e2}";
    let rows: Vec<CategoryRow<'_>> = vec![
        (
            "owned-update",
            &base,
            owned_update(&pos, 0),
            &pos,
            format!("{s1}\nPos↦{{e0 ↦ Pos 0, e1 ↦ Pos 0}} :+ Vel↦{{e1 ↦ Vel 3}} :+ Metadata {{nextFresh = e2}} END\n"),
        ),
        (
            "owned-insert",
            &lone_vel,
            owned_insert(&pos, 0),
            &pos,
            format!("{s2}\nPos↦{{e0 ↦ Pos 1, e1 ↦ Pos 0}} :+ Vel↦{{e1 ↦ Vel 3}} :+ Metadata {{nextFresh = e2}} END\n"),
        ),
        (
            "owned-initialize",
            &base,
            owned_initialize(&pos, 0),
            &pos,
            format!(
                "{s1}\nPos↦{{e0 ↦ Pos 1, e1 ↦ Pos 2, e2 ↦ Pos 0, e3 ↦ Pos 0}} :+ Vel↦{{e1 ↦ Vel 3}} :+ Metadata {{nextFresh = e4}} END\n"
            ),
        ),
        (
            "owned-delete",
            &base,
            owned_delete(&pos),
            &pos,
            format!("{s1}\nPos↦{{}} :+ Vel↦{{e1 ↦ Vel 3}} :+ Metadata {{nextFresh = e2}} END\n"),
        ),
        (
            "deferred-update",
            &has_vel,
            deferred_write("deferred-update", &pos, &vel, 1),
            &vel,
            format!("{s3}\nPos↦{{e0 ↦ Pos 1}} :+ Vel↦{{e0 ↦ Vel 1, e1 ↦ Vel 1}} :+ Metadata {{nextFresh = e2}} END\n"),
        ),
        (
            "deferred-insert",
            &no_vel,
            deferred_write("deferred-insert", &pos, &vel, 1),
            &vel,
            format!("{s4}\nPos↦{{e0 ↦ Pos 1, e1 ↦ Pos 2}} :+ Vel↦{{e0 ↦ Vel 1, e1 ↦ Vel 1}} :+ Metadata {{nextFresh = e2}} END\n"),
        ),
        (
            "deferred-initialize",
            &base,
            deferred_initialize(&pos, &vel, 1),
            &vel,
            format!(
                "{s1}\nPos↦{{e0 ↦ Pos 1, e1 ↦ Pos 2}} :+ Vel↦{{e1 ↦ Vel 3, e2 ↦ Vel 1, e3 ↦ Vel 1}} :+ Metadata {{nextFresh = e4}} END\n"
            ),
        ),
        (
            "deferred-delete",
            &has_vel,
            deferred_delete(&pos, &vel),
            &vel,
            format!("{s3}\nPos↦{{e0 ↦ Pos 1}} :+ Vel↦{{}} :+ Metadata {{nextFresh = e2}} END\n"),
        ),
    ];
    rows.into_iter()
        .map(|(name, start, system, writes, expected)| Scenario {
            name: name.into(),
            schema: schema.clone(),
            init: spawn_rows(start),
            declared: declared(&[(system.name(), &[writes])]),
            schedule: Schedule::conc(system),
            frames: 1,
            expected_output: Some(expected),
        })
        .collect()
}

/// Names accepted by [`scenario_by_name`].
pub fn scenario_names() -> Vec<String> {
    let mut names = vec!["toy-phys".to_string(), "disjoint-entities".into(), "lost-write".into()];
    names.extend(mutation_category_suite().into_iter().map(|s| s.name));
    names
}

pub fn scenario_by_name(name: &str) -> Option<Scenario> {
    match name {
        "toy-phys" => Some(toy_physics_scenario()),
        "disjoint-entities" => Some(disjoint_entities_scenario()),
        "lost-write" => Some(lost_write_scenario()),
        other => mutation_category_suite().into_iter().find(|s| s.name == other),
    }
}
