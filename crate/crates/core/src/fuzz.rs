//! Randomised check that schedules judged safe are deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canon::equivalent_from;
use crate::catalogue::TEMPLATES;
use crate::error::{EcsError, Result};
use crate::mutation::mutation_influence;
use crate::po::{invocation_po, DEFAULT_LINEARIZATION_LIMIT};
use crate::runtime::{run_parallel, RunConfig};
use crate::safety::{check_safe, determinism_of, DeterminismVerdict, Verdict};
use crate::scenario::lost_write_scenario;
use crate::schedule::{apply_schedule, Schedule};
use crate::world::{ComponentKind, ComponentValue, EntityId, Label, Schema, WorldState};

/// A generated start state and schedule.
#[derive(Clone, Debug)]
pub struct FuzzInstance {
    pub id: usize,
    pub world: WorldState,
    pub schedule: Schedule,
    /// Labels each system may write, by system name.
    pub declared: BTreeMap<String, BTreeSet<Label>>,
}

pub fn generate_instances(count: usize, seed: u64) -> Vec<FuzzInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|id| generate_instance(&mut rng, id)).collect()
}

/// Small worlds (at most 6 entities, 3 labels) and schedules of at most 4
/// leaves drawn from the template catalogue.
pub fn generate_instance(rng: &mut ChaCha8Rng, id: usize) -> FuzzInstance {
    let mut entries = vec![("A", ComponentKind::Integer), ("B", ComponentKind::Integer)];
    match rng.gen_range(0..3) {
        0 => entries.push(("C", ComponentKind::Integer)),
        1 => entries.push(("R", ComponentKind::EntityRef)),
        _ => {}
    }
    let schema = Schema::new(entries).expect("distinct labels");
    let ints: Vec<Label> = labels_of(&schema, ComponentKind::Integer);
    let refs: Vec<Label> = labels_of(&schema, ComponentKind::EntityRef);

    let n = if rng.gen_bool(0.2) { rng.gen_range(5..=6) } else { rng.gen_range(1..=4) };
    let mut world = WorldState::new(schema);
    for e in 0..n {
        for l in &ints {
            if rng.gen_bool(0.6) {
                let v = rng.gen_range(0..4);
                world.insert(EntityId(e), &ComponentValue::int(l, v)).expect("integer label");
            }
        }
        for r in &refs {
            if rng.gen_bool(0.5) {
                let t = EntityId(rng.gen_range(0..n));
                world.insert(EntityId(e), &ComponentValue::entity(r, t)).expect("reference label");
            }
        }
    }
    world.observe(EntityId(n - 1)).expect("small id");

    let mut declared = BTreeMap::new();
    let leaves = rng.gen_range(1..=4);
    let schedule = random_schedule(rng, &world, &ints, &refs, leaves, &mut declared);
    FuzzInstance { id, world, schedule, declared }
}

fn labels_of(schema: &Schema, kind: ComponentKind) -> Vec<Label> {
    schema.entries().iter().filter(|(_, k)| *k == kind).map(|(l, _)| l.clone()).collect()
}

fn random_schedule(
    rng: &mut ChaCha8Rng,
    world: &WorldState,
    ints: &[Label],
    refs: &[Label],
    leaves: usize,
    declared: &mut BTreeMap<String, BTreeSet<Label>>,
) -> Schedule {
    if leaves == 1 {
        let usable: Vec<_> =
            TEMPLATES.iter().filter(|t| !refs.is_empty() || !t.params.contains(&ComponentKind::EntityRef)).collect();
        let t = usable.choose(rng).expect("templates");
        let mut pool = ints.to_vec();
        pool.shuffle(rng);
        let labels: Vec<Label> = t
            .params
            .iter()
            .enumerate()
            .map(|(i, k)| match k {
                ComponentKind::EntityRef => refs.choose(rng).expect("reference label").clone(),
                _ => pool[i % pool.len()].clone(),
            })
            .collect();
        let inst = t.instantiate(world.schema(), &labels, rng.gen_range(0..4)).expect("well-kinded");
        declared.insert(inst.system.name().to_string(), inst.declared);
        return if rng.gen_bool(0.6) { Schedule::conc(inst.system) } else { Schedule::seq(inst.system) };
    }
    let left = rng.gen_range(1..leaves);
    let a = random_schedule(rng, world, ints, refs, left, declared);
    let b = random_schedule(rng, world, ints, refs, leaves - left, declared);
    if rng.gen_bool(0.5) {
        a.par(b)
    } else {
        a.then(b)
    }
}

/// The lost-write example as a fuzz instance.
pub fn lost_write_instance() -> FuzzInstance {
    let s = lost_write_scenario();
    FuzzInstance { id: 0, world: s.start_state().expect("start state"), schedule: s.schedule, declared: s.declared }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    SafeDeterministic,
    UnknownDeterministic,
    UnknownNondeterministic,
    /// Judged safe yet not deterministic. Must never happen.
    SafeNondeterministic,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct InstanceReport {
    pub class: Classification,
    pub verdict: Verdict,
    pub invocations: usize,
    pub determinism: Option<DeterminismVerdict>,
    /// Seeds at which the threaded runtime disagreed with the reference.
    pub divergent_seeds: Vec<u64>,
    /// Systems whose observed writes fall outside their declared labels.
    pub undeclared: Vec<String>,
}

/// Linearization cap for schedules of up to `max_invocations` invocations.
pub fn linearization_limit(max_invocations: usize) -> usize {
    let full = (1..=max_invocations).try_fold(1usize, |acc, k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    full.max(DEFAULT_LINEARIZATION_LIMIT)
}

pub fn check_instance(inst: &FuzzInstance, max_invocations: usize, parallel_seeds: &[u64]) -> Result<InstanceReport> {
    let c = &inst.world;
    let po = invocation_po(c, &inst.schedule)?;
    let report = check_safe(c, &inst.schedule)?;

    let mut undeclared = BTreeSet::new();
    for i in po.elements() {
        let labels = mutation_influence(&i.mutation).labels();
        let allowed = inst.declared.get(i.system.name());
        if !allowed.is_some_and(|a| labels.is_subset(a)) {
            undeclared.insert(i.system.name().to_string());
        }
    }

    let mut out = InstanceReport {
        class: Classification::Skipped,
        verdict: report.verdict,
        invocations: po.len(),
        determinism: None,
        divergent_seeds: Vec::new(),
        undeclared: undeclared.into_iter().collect(),
    };
    if po.len() > max_invocations {
        return Ok(out);
    }
    let det = match determinism_of(c, &po, linearization_limit(max_invocations)) {
        Ok(d) => d,
        Err(EcsError::TooManyLinearizations { .. }) => return Ok(out),
        Err(e) => return Err(e),
    };
    out.class = match (report.verdict == Verdict::Safe, det.deterministic) {
        (true, true) => Classification::SafeDeterministic,
        (true, false) => Classification::SafeNondeterministic,
        (false, true) => Classification::UnknownDeterministic,
        (false, false) => Classification::UnknownNondeterministic,
    };
    out.determinism = Some(det);

    if report.verdict == Verdict::Safe {
        let reference = apply_schedule(c, &inst.schedule)?;
        for (k, &seed) in parallel_seeds.iter().enumerate() {
            let workers = [2, 4, 8][k % 3];
            let (got, _) = run_parallel(c, &inst.schedule, RunConfig::new(workers, seed))?;
            if !equivalent_from(c.next_fresh(), &reference, &got)? {
                out.divergent_seeds.push(seed);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FuzzSummary {
    pub instances: usize,
    pub safe_deterministic: usize,
    pub unknown_deterministic: usize,
    pub unknown_nondeterministic: usize,
    pub skipped: usize,
    pub safe_nondeterministic: usize,
    pub parallel_divergences: usize,
    pub undeclared_writes: usize,
}

impl FuzzSummary {
    pub fn record(&mut self, r: &InstanceReport) {
        self.instances += 1;
        match r.class {
            Classification::SafeDeterministic => self.safe_deterministic += 1,
            Classification::UnknownDeterministic => self.unknown_deterministic += 1,
            Classification::UnknownNondeterministic => self.unknown_nondeterministic += 1,
            Classification::SafeNondeterministic => self.safe_nondeterministic += 1,
            Classification::Skipped => self.skipped += 1,
        }
        self.parallel_divergences += r.divergent_seeds.len();
        self.undeclared_writes += r.undeclared.len();
    }

    /// No safe schedule was non-deterministic or diverged under threads,
    /// and every system stayed within its declared labels.
    pub fn ok(&self) -> bool {
        self.safe_nondeterministic == 0 && self.parallel_divergences == 0 && self.undeclared_writes == 0
    }
}

impl fmt::Display for FuzzSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances: {}", self.instances)?;
        writeln!(f, "safe-deterministic: {}", self.safe_deterministic)?;
        writeln!(f, "unknown-deterministic: {}", self.unknown_deterministic)?;
        writeln!(f, "unknown-nondeterministic: {}", self.unknown_nondeterministic)?;
        writeln!(f, "skipped: {}", self.skipped)?;
        writeln!(f, "safe-nondeterministic: {}", self.safe_nondeterministic)?;
        writeln!(f, "parallel-divergences: {}", self.parallel_divergences)?;
        write!(f, "undeclared-writes: {}", self.undeclared_writes)
    }
}

/// Generates and checks `instances` instances from `seed`.
pub fn fuzz(instances: usize, max_invocations: usize, seed: u64) -> Result<FuzzSummary> {
    let mut summary = FuzzSummary::default();
    for inst in generate_instances(instances, seed) {
        let seeds: Vec<u64> = (0..3).map(|k| seed ^ ((inst.id as u64) << 8) ^ k).collect();
        summary.record(&check_instance(&inst, max_invocations, &seeds)?);
    }
    Ok(summary)
}
