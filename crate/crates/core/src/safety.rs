//! Schedule influence, the safety rules, the two static checks and the
//! brute-force determinism check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::canon::CanonicalState;
use crate::error::{EcsError, Result};
use crate::mutation::{mutation_influence, Influence};
use crate::po::{apply_invocation, invocation_po, Invocation, InvocationPo};
use crate::query::QueryVector;
use crate::schedule::Schedule;
use crate::system::System;
use crate::world::{ComponentKind, Label, Schema, WorldState};

/// Union of the influences of every invocation `z` performs at `c`.
pub fn schedule_influence(c: &WorldState, z: &Schedule) -> Result<Influence> {
    let po = invocation_po(c, z)?;
    let mut out = Influence::new();
    for inv in po.elements() {
        out.extend(&mutation_influence(&inv.mutation));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Safe,
    Unsafe,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "Safe",
            Verdict::Unsafe => "Unsafe",
            Verdict::Unknown => "Unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    SeqAlwaysSafe,
    SeqCompOfSafe,
    ConcPairwiseDisjoint,
    ParDisjointInfluence,
    StaticSingletonQuery,
    StaticDisjointLabels,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One analysed schedule node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleStep {
    pub depth: usize,
    pub node: String,
    pub rule: Rule,
    pub verdict: Verdict,
}

/// Two invocations whose influences overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub first: String,
    pub second: String,
    pub overlap: Influence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyReport {
    pub verdict: Verdict,
    /// Pre-order, one entry per schedule node.
    pub rule_trace: Vec<RuleStep>,
    pub conflicts: Vec<Conflict>,
}

impl SafetyReport {
    /// Refines an `Unknown` verdict with a brute-force result: a
    /// non-deterministic schedule with reported conflicts becomes `Unsafe`.
    pub fn with_determinism(mut self, d: &DeterminismVerdict) -> Result<SafetyReport> {
        if !d.deterministic {
            if self.verdict == Verdict::Safe {
                return Err(EcsError::Analysis("schedule judged safe is not deterministic".into()));
            }
            if !self.conflicts.is_empty() {
                self.verdict = Verdict::Unsafe;
            }
        }
        Ok(self)
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.rule_trace {
            writeln!(f, "{:indent$}{}: {} -> {}", "", step.node, step.rule, step.verdict, indent = step.depth * 2)?;
        }
        for c in &self.conflicts {
            for (e, l) in c.overlap.iter() {
                writeln!(f, "conflict: ({e}, {l}) touched by {} and {}", c.first, c.second)?;
            }
        }
        write!(f, "verdict: {}", self.verdict)
    }
}

/// Applies the safe-construction rules to `z` at `c`. A failed rule yields
/// `Unknown`, never `Unsafe`: the rules are sufficient conditions only.
pub fn check_safe(c: &WorldState, z: &Schedule) -> Result<SafetyReport> {
    let po = invocation_po(c, z)?;
    let influences: Vec<Influence> = po.elements().iter().map(|i| mutation_influence(&i.mutation)).collect();
    let mut ctx = Checker { po: &po, influences: &influences, trace: Vec::new(), conflicts: Vec::new(), leaf: 0 };
    let (verdict, _) = ctx.node(z, 0);
    Ok(SafetyReport { verdict, rule_trace: ctx.trace, conflicts: ctx.conflicts })
}

struct Checker<'a> {
    po: &'a InvocationPo,
    influences: &'a [Influence],
    trace: Vec<RuleStep>,
    conflicts: Vec<Conflict>,
    leaf: usize,
}

impl Checker<'_> {
    /// Returns the node's verdict and the tags of its invocations.
    fn node(&mut self, z: &Schedule, depth: usize) -> (Verdict, Vec<usize>) {
        let slot = self.trace.len();
        self.trace.push(RuleStep { depth, node: node_label(z), rule: Rule::SeqAlwaysSafe, verdict: Verdict::Safe });
        let (rule, verdict, tags) = match z {
            Schedule::Seq(_) => (Rule::SeqAlwaysSafe, Verdict::Safe, self.leaf_tags()),
            Schedule::Conc(_) => {
                let tags = self.leaf_tags();
                let mut ok = true;
                for (k, &i) in tags.iter().enumerate() {
                    for &j in &tags[k + 1..] {
                        ok &= self.record_overlap(i, j);
                    }
                }
                (Rule::ConcPairwiseDisjoint, safe_if(ok), tags)
            }
            Schedule::Then(a, b) => {
                let (va, mut ta) = self.node(a, depth + 1);
                let (vb, tb) = self.node(b, depth + 1);
                ta.extend(tb);
                (Rule::SeqCompOfSafe, safe_if(va == Verdict::Safe && vb == Verdict::Safe), ta)
            }
            Schedule::Par(a, b) => {
                let (va, ta) = self.node(a, depth + 1);
                let (vb, tb) = self.node(b, depth + 1);
                let union = |tags: &[usize]| {
                    let mut u = Influence::new();
                    for &t in tags {
                        u.extend(&self.influences[t]);
                    }
                    u
                };
                let disjoint = union(&ta).is_disjoint(&union(&tb));
                if !disjoint {
                    for &i in &ta {
                        for &j in &tb {
                            self.record_overlap(i, j);
                        }
                    }
                }
                let ok = va == Verdict::Safe && vb == Verdict::Safe && disjoint;
                let mut tags = ta;
                tags.extend(tb);
                (Rule::ParDisjointInfluence, safe_if(ok), tags)
            }
        };
        self.trace[slot].rule = rule;
        self.trace[slot].verdict = verdict;
        (verdict, tags)
    }

    fn leaf_tags(&mut self) -> Vec<usize> {
        let leaf = self.leaf;
        self.leaf += 1;
        self.po.elements().iter().filter(|i| i.leaf == leaf).map(|i| i.tag).collect()
    }

    /// Records a conflict if `i` and `j` overlap; returns whether they are
    /// disjoint.
    fn record_overlap(&mut self, i: usize, j: usize) -> bool {
        let overlap = self.influences[i].intersection(&self.influences[j]);
        if overlap.is_empty() {
            return true;
        }
        let el = self.po.elements();
        self.conflicts.push(Conflict { first: el[i].to_string(), second: el[j].to_string(), overlap });
        false
    }
}

fn safe_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Safe
    } else {
        Verdict::Unknown
    }
}

fn node_label(z: &Schedule) -> String {
    match z {
        Schedule::Conc(s) => format!("Conc {}", s.name()),
        Schedule::Seq(s) => format!("Seq {}", s.name()),
        Schedule::Par(..) => "Par".into(),
        Schedule::Then(..) => "Then".into(),
    }
}

/// `true` when `Conc s` is safe at every state: a one-dimensional query
/// whose results carry no entity references.
pub fn check_static_singleton(schema: &Schema, s: &System) -> bool {
    singleton_query(schema, s.query())
}

fn singleton_query(schema: &Schema, qv: &QueryVector) -> bool {
    qv.dim() == 1
        && qv.shapes()[0]
            .value_labels()
            .iter()
            .all(|l| matches!(schema.kind_of(l), Some(k) if k != ComponentKind::EntityRef))
}

/// `true` when `Par(z1, z2)` is safe at every state: both sides pass the
/// static rules and the label sets declared for their systems are disjoint.
pub fn check_static_disjoint_labels(
    schema: &Schema,
    z1: &Schedule,
    z2: &Schedule,
    declared: &BTreeMap<String, BTreeSet<Label>>,
) -> Result<bool> {
    let l1 = declared_labels(z1, declared)?;
    let l2 = declared_labels(z2, declared)?;
    Ok(statically_safe(schema, z1, declared)? && statically_safe(schema, z2, declared)? && l1.is_disjoint(&l2))
}

fn declared_labels(z: &Schedule, declared: &BTreeMap<String, BTreeSet<Label>>) -> Result<BTreeSet<Label>> {
    let mut out = BTreeSet::new();
    for s in z.systems() {
        let labels = declared
            .get(s.name())
            .ok_or_else(|| EcsError::Analysis(format!("no labels declared for system {}", s.name())))?;
        out.extend(labels.iter().cloned());
    }
    Ok(out)
}

fn statically_safe(schema: &Schema, z: &Schedule, declared: &BTreeMap<String, BTreeSet<Label>>) -> Result<bool> {
    Ok(match z {
        Schedule::Seq(_) => true,
        Schedule::Conc(s) => check_static_singleton(schema, s),
        Schedule::Then(a, b) => statically_safe(schema, a, declared)? && statically_safe(schema, b, declared)?,
        Schedule::Par(a, b) => check_static_disjoint_labels(schema, a, b, declared)?,
    })
}

/// One linearization and the state it ends in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub order: Vec<usize>,
    pub state: WorldState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminismVerdict {
    pub deterministic: bool,
    pub distinct_outcomes: usize,
    pub linearizations: usize,
    /// Two linearizations with different outcomes, when there are any.
    pub witness: Option<(Outcome, Outcome)>,
}

/// Applies every linearization of `z`'s invocations at `c` and compares the
/// final states up to renaming of fresh entities.
pub fn brute_force_determinism(c: &WorldState, z: &Schedule, limit: usize) -> Result<DeterminismVerdict> {
    let po = invocation_po(c, z)?;
    determinism_of(c, &po, limit)
}

pub fn determinism_of(c: &WorldState, po: &InvocationPo, limit: usize) -> Result<DeterminismVerdict> {
    let base = c.next_fresh();
    let mut outcomes: BTreeMap<CanonicalState, Vec<usize>> = BTreeMap::new();
    let mut witness: Option<(Outcome, Outcome)> = None;
    let mut first: Option<(CanonicalState, Outcome)> = None;
    let linearizations = po.visit_linearizations(
        limit,
        c.clone(),
        &mut |s: &WorldState, inv: &Invocation| {
            let mut next = s.clone();
            apply_invocation(&mut next, inv)?;
            Ok(next)
        },
        &mut |order, state| {
            let key = CanonicalState::relative_to(&state, base);
            match &first {
                None => first = Some((key.clone(), Outcome { order: order.to_vec(), state })),
                Some((k0, o0)) if witness.is_none() && *k0 != key => {
                    witness = Some((o0.clone(), Outcome { order: order.to_vec(), state }));
                }
                _ => {}
            }
            outcomes.entry(key).or_insert_with(|| order.to_vec());
            Ok(())
        },
    )?;
    let distinct_outcomes = outcomes.len();
    Ok(DeterminismVerdict { deterministic: distinct_outcomes == 1, distinct_outcomes, linearizations, witness })
}
