//! The partial order of system-function invocations a schedule performs, and
//! its linearizations.

use std::fmt;
use std::ops::Range;

use crate::error::{EcsError, Result};
use crate::mutation::Mutation;
use crate::query::{eval_query_vector, EntityMatch};
use crate::schedule::{apply_schedule, past_fresh, Schedule};
use crate::system::{roll, System};
use crate::world::{EntityId, WorldState};

/// Default cap on the number of linearizations enumerated.
pub const DEFAULT_LINEARIZATION_LIMIT: usize = 10_080;

/// One application of a system function to a captured match.
#[derive(Clone, Debug)]
pub struct Invocation {
    /// Position in the canonical left-to-right order; unique within a po.
    pub tag: usize,
    /// Index of the schedule leaf, counting leaves left to right.
    pub leaf: usize,
    pub system: System,
    pub matched: EntityMatch,
    /// `system`'s mutation for `matched`.
    pub mutation: Mutation,
    /// First id this invocation's fresh entities receive. Slots are laid
    /// out in tag order from the start state's counter, so an invocation
    /// creates the same entities whichever linearization it appears in.
    pub fresh_base: EntityId,
}

impl fmt::Display for Invocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.system.name(), self.tag)
    }
}

#[derive(Clone, Debug)]
pub struct InvocationPo {
    elements: Vec<Invocation>,
    /// `before[i][j]` iff `i` strictly precedes `j`.
    before: Vec<Vec<bool>>,
}

impl InvocationPo {
    pub fn elements(&self) -> &[Invocation] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Reflexive order: `i ≼ j`.
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        i == j || self.before[i][j]
    }

    /// Strictly ordered pairs, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (0..n).filter(move |&j| self.before[i][j]).map(move |j| (i, j))).collect()
    }

    pub fn is_linearization(&self, order: &[usize]) -> bool {
        let n = self.len();
        let mut pos = vec![usize::MAX; n];
        for (k, &t) in order.iter().enumerate() {
            if t >= n || pos[t] != usize::MAX {
                return false;
            }
            pos[t] = k;
        }
        order.len() == n && self.pairs().iter().all(|&(i, j)| pos[i] < pos[j])
    }

    /// Visits linearizations in lexicographic order of tags, sharing work
    /// between common prefixes. `step` extends a prefix state by one
    /// invocation; `leaf` receives each complete order and its final state.
    /// Fails once more than `limit` orders exist.
    pub fn visit_linearizations<S: Clone>(
        &self,
        limit: usize,
        init: S,
        step: &mut dyn FnMut(&S, &Invocation) -> Result<S>,
        leaf: &mut dyn FnMut(&[usize], S) -> Result<()>,
    ) -> Result<usize> {
        let n = self.len();
        let mut waiting: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| self.before[i][j]).count()).collect();
        let mut done = vec![false; n];
        let mut prefix = Vec::with_capacity(n);
        let mut count = 0usize;
        self.dfs(limit, &init, step, leaf, &mut waiting, &mut done, &mut prefix, &mut count)?;
        Ok(count)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs<S: Clone>(
        &self,
        limit: usize,
        state: &S,
        step: &mut dyn FnMut(&S, &Invocation) -> Result<S>,
        leaf: &mut dyn FnMut(&[usize], S) -> Result<()>,
        waiting: &mut [usize],
        done: &mut [bool],
        prefix: &mut Vec<usize>,
        count: &mut usize,
    ) -> Result<()> {
        let n = self.len();
        if prefix.len() == n {
            *count += 1;
            if *count > limit {
                return Err(EcsError::TooManyLinearizations { at_least: limit as u128 + 1, limit });
            }
            return leaf(prefix, state.clone());
        }
        for i in 0..n {
            if done[i] || waiting[i] > 0 {
                continue;
            }
            let next = step(state, &self.elements[i])?;
            done[i] = true;
            prefix.push(i);
            for (w, &b) in waiting.iter_mut().zip(&self.before[i]) {
                if b {
                    *w -= 1;
                }
            }
            let res = self.dfs(limit, &next, step, leaf, waiting, done, prefix, count);
            for (w, &b) in waiting.iter_mut().zip(&self.before[i]) {
                if b {
                    *w += 1;
                }
            }
            prefix.pop();
            done[i] = false;
            res?;
        }
        Ok(())
    }
}

/// Builds the invocation partial order of `z` at `c`.
pub fn invocation_po(c: &WorldState, z: &Schedule) -> Result<InvocationPo> {
    let mut elements = Vec::new();
    let mut edges = Vec::new();
    let mut leaves = 0;
    build(c, z, &mut leaves, &mut elements, &mut edges)?;

    let mut next = c.next_fresh().0;
    for inv in &mut elements {
        inv.fresh_base = EntityId(next);
        next = next.checked_add(inv.mutation.fresh_count()).ok_or(EcsError::Capacity)?;
    }

    // Edges always point from a lower tag to a higher one, so one backwards
    // pass closes the relation.
    let n = elements.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in edges {
        succ[i].push(j);
    }
    let mut before = vec![vec![false; n]; n];
    for i in (0..n).rev() {
        for &k in &succ[i] {
            let (head, tail) = before.split_at_mut(k);
            head[i][k] = true;
            for (x, &y) in head[i].iter_mut().zip(&tail[0]).skip(k + 1) {
                *x |= y;
            }
        }
    }
    Ok(InvocationPo { elements, before })
}

fn build(
    c: &WorldState,
    z: &Schedule,
    leaves: &mut usize,
    elements: &mut Vec<Invocation>,
    edges: &mut Vec<(usize, usize)>,
) -> Result<Range<usize>> {
    let start = elements.len();
    match z {
        Schedule::Conc(s) | Schedule::Seq(s) => {
            let leaf = *leaves;
            *leaves += 1;
            let mut matches = eval_query_vector(c, s.query())?;
            let chained = matches!(z, Schedule::Seq(_));
            if chained {
                matches = roll(s, c, &matches)?;
            }
            for m in matches {
                let tag = elements.len();
                if chained && tag > start {
                    edges.push((tag - 1, tag));
                }
                elements.push(invocation(tag, leaf, s, m));
            }
        }
        Schedule::Par(a, b) => {
            let left = build(c, a, leaves, elements, edges)?;
            let made = elements[left].iter().map(|i| i.mutation.fresh_count()).sum();
            build(&past_fresh(c, made)?, b, leaves, elements, edges)?;
        }
        Schedule::Then(a, b) => {
            let left = build(c, a, leaves, elements, edges)?;
            let mid = apply_schedule(c, a)?;
            let right = build(&mid, b, leaves, elements, edges)?;
            for i in left {
                for j in right.clone() {
                    edges.push((i, j));
                }
            }
        }
    }
    Ok(start..elements.len())
}

fn invocation(tag: usize, leaf: usize, s: &System, m: EntityMatch) -> Invocation {
    Invocation { tag, leaf, system: s.clone(), mutation: s.call(&m), matched: m, fresh_base: EntityId(0) }
}

/// Every topological order of `po`, in lexicographic order of tags.
pub fn enumerate_linearizations(po: &InvocationPo, limit: usize) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    po.visit_linearizations(limit, (), &mut |_, _| Ok(()), &mut |order, _| {
        out.push(order.to_vec());
        Ok(())
    })?;
    Ok(out)
}

/// Applies one invocation's captured mutation, drawing fresh ids from its
/// slot.
pub fn apply_invocation(state: &mut WorldState, inv: &Invocation) -> Result<()> {
    let mut next = inv.fresh_base.0;
    state.apply_with(&inv.mutation, &mut |_| {
        let e = EntityId(next);
        next = next.checked_add(1).ok_or(EcsError::Capacity)?;
        Ok(e)
    })
}

/// `c` updated by the captured mutations of `lin`, in order. Matches are not
/// re-queried.
pub fn apply_linearization<'a>(c: &WorldState, lin: impl IntoIterator<Item = &'a Invocation>) -> Result<WorldState> {
    let mut state = c.clone();
    for inv in lin {
        apply_invocation(&mut state, inv)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{Query, QueryVector};
    use crate::world::{ComponentKind, ComponentValue, Label, Schema};

    fn world(n: u64) -> (WorldState, Label) {
        let schema = Schema::new([("Int", ComponentKind::Integer)]).unwrap();
        let int = schema.label("Int").unwrap();
        let mut w = WorldState::new(schema);
        for e in 0..n {
            w.insert(EntityId(e), &ComponentValue::int(&int, e as i64)).unwrap();
        }
        (w, int)
    }

    fn noop(int: &Label) -> System {
        System::new("noop", QueryVector::single(Query::incl(int)), |_| Mutation::Nil)
    }

    // Independent oracle: filter all permutations by the order pairs.
    fn brute_force_count(po: &InvocationPo) -> usize {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.is_empty() {
                return vec![Vec::new()];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let x = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        perms((0..po.len()).collect()).into_iter().filter(|p| po.is_linearization(p)).count()
    }

    #[test]
    fn antichain_and_chain_counts() {
        let (w, int) = world(3);
        let conc = invocation_po(&w, &Schedule::conc(noop(&int))).unwrap();
        assert!(conc.pairs().is_empty());
        assert_eq!(enumerate_linearizations(&conc, 100).unwrap().len(), 6);

        let (w4, int4) = world(4);
        let seq = invocation_po(&w4, &Schedule::seq(noop(&int4))).unwrap();
        assert_eq!(seq.pairs().len(), 6);
        assert_eq!(enumerate_linearizations(&seq, 100).unwrap(), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn then_orders_every_left_before_every_right() {
        let (w, int) = world(2);
        let z = Schedule::conc(noop(&int)).then(Schedule::conc(noop(&int)));
        let po = invocation_po(&w, &z).unwrap();
        assert_eq!(po.pairs(), vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
        let lins = enumerate_linearizations(&po, 100).unwrap();
        assert_eq!(lins.len(), 4);
        assert_eq!(lins.len(), brute_force_count(&po));
        assert!(lins.iter().all(|l| po.is_linearization(l)));
        assert_eq!(lins[0], vec![0, 1, 2, 3]);
    }

    #[test]
    fn par_adds_no_cross_pairs() {
        let (w, int) = world(2);
        let z = Schedule::seq(noop(&int)).par(Schedule::seq(noop(&int)));
        let po = invocation_po(&w, &z).unwrap();
        assert_eq!(po.pairs(), vec![(0, 1), (2, 3)]);
        assert_eq!(enumerate_linearizations(&po, 100).unwrap().len(), 6);
        assert_eq!(brute_force_count(&po), 6);
    }

    #[test]
    fn limit_is_enforced() {
        let (w, int) = world(4);
        let po = invocation_po(&w, &Schedule::conc(noop(&int))).unwrap();
        assert!(matches!(
            enumerate_linearizations(&po, 23),
            Err(EcsError::TooManyLinearizations { at_least: 24, limit: 23 })
        ));
        assert_eq!(enumerate_linearizations(&po, 24).unwrap().len(), 24);
    }

    #[test]
    fn empty_linearization_is_identity() {
        let (w, _) = world(2);
        assert_eq!(apply_linearization(&w, std::iter::empty()).unwrap(), w);
    }

    #[test]
    fn fresh_slots_are_laid_out_in_tag_order() {
        let (w, int) = world(2);
        let l = int.clone();
        let spawn = System::new("spawn", QueryVector::single(Query::incl(&int)), move |_| {
            let l = l.clone();
            Mutation::fresh(move |e| Mutation::attach_int(&l, e, 9))
        });
        let po = invocation_po(&w, &Schedule::conc(spawn)).unwrap();
        let bases: Vec<u64> = po.elements().iter().map(|i| i.fresh_base.0).collect();
        assert_eq!(bases, vec![2, 3]);
        let fwd = apply_linearization(&w, po.elements()).unwrap();
        let bwd = apply_linearization(&w, po.elements().iter().rev()).unwrap();
        assert_eq!(fwd, bwd);
        assert_eq!(fwd, apply_schedule(&w, &Schedule::conc(po.elements()[0].system.clone())).unwrap());
    }
}
