//! A small entity-component-system kernel whose concurrent schedules can be
//! checked for determinism.
//!
//! The crate has three layers:
//!
//! * the data model: [`WorldState`], [`Mutation`], [`Query`] and [`System`];
//! * schedules and their meaning: [`Schedule`], [`apply_schedule`] and the
//!   invocation partial order in [`po`];
//! * tooling: the safety analyzer in [`safety`], the threaded interpreter in
//!   [`runtime`], and the demo scenarios and fuzzer.
//!
//! ```
//! use coreecs::scenario::toy_physics_scenario;
//!
//! let scenario = toy_physics_scenario();
//! let frames = scenario.run_reference(2).unwrap();
//! assert_eq!(frames.len(), 3);
//! ```

pub mod canon;
pub mod catalogue;
pub mod error;
pub mod fuzz;
pub mod mutation;
pub mod po;
pub mod query;
pub mod runtime;
pub mod safety;
pub mod scenario;
pub mod schedule;
pub mod system;
pub mod world;

pub use canon::{canonicalize, equivalent_from, states_equal_upto_fresh, CanonicalState};
pub use error::{EcsError, Result};
pub use mutation::{apply_mutation, mutation_influence, Influence, Mutation, Step};
pub use po::{apply_linearization, enumerate_linearizations, invocation_po, Invocation, InvocationPo};
pub use query::{
    eval_query, eval_query_vector, result_shape, vector_shape, ComponentResult, EntityMatch, Query, QueryVector,
    ResultShape,
};
pub use runtime::{run_parallel, RunConfig, Trace};
pub use safety::{
    brute_force_determinism, check_safe, check_static_disjoint_labels, check_static_singleton, schedule_influence,
    DeterminismVerdict, Rule, SafetyReport, Verdict,
};
pub use schedule::{apply_schedule, interpret_schedule, Schedule};
pub use system::{apply_system, concurrent_production, roll, sequential_production, System};
pub use world::{ComponentKind, ComponentValue, EntityId, Label, Payload, Schema, WorldState};
