//! Multiversion schedules and their generation.
//!
//! A schedule interleaves the atomic units of a transaction set (statement
//! chunks are indivisible, so chunk atomicity holds by construction) and
//! derives the version bookkeeping from read-last-committed semantics: per
//! tuple, versions are ordered by the commit order of their writers, with
//! the initial version first. Candidates violating the semantics — dirty
//! writes, reads of unborn or dead versions, writes after a committed
//! delete, inserts that would not create the first version — are rejected.

use std::collections::HashMap;
use std::ops::ControlFlow;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::oracle::txn::{OpKind, Operation, Transaction};
use crate::oracle::universe::{TupleId, Universe};

/// A version of a tuple: the initial one, or the one created by a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VersionRef {
    Initial,
    /// The write that created the version, as (transaction, op index).
    Write(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reject {
    DirtyWrite,
    ReadUnborn,
    ReadDead,
    WriteAfterDelete,
    InsertNotFirst,
    DuplicateInsert,
    DuplicateDelete,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub txns: Vec<Transaction>,
    /// Global operation order as (transaction, op index) pairs.
    pub order: Vec<(usize, usize)>,
    /// Global position of each transaction's commit.
    pub commit_pos: Vec<usize>,
    /// Version observed by each read, keyed by global position.
    pub read_version: HashMap<usize, VersionRef>,
    /// Version set of each predicate read: one version per tuple of the
    /// relation in the universe (unborn and dead versions included).
    pub version_sets: HashMap<usize, HashMap<TupleId, VersionRef>>,
    /// Tuples that start unborn (exactly those inserted in the schedule).
    pub initially_unborn: Vec<TupleId>,
}

impl Schedule {
    pub fn op(&self, txn: usize, op: usize) -> &Operation {
        &self.txns[txn].ops[op]
    }

    /// Commit-order comparison of the versions created by two writes on the
    /// same tuple.
    pub fn version_precedes(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        self.commit_pos[a.0] < self.commit_pos[b.0]
    }

    /// Single-line rendering in operation order, e.g.
    /// `R1[Buyer0] W1[Buyer0] PR3[Bids] C1`.
    pub fn dump(&self, universe: &Universe) -> String {
        let mut parts = Vec::with_capacity(self.order.len());
        for &(txn, op) in &self.order {
            let o = self.op(txn, op);
            let id = txn + 1;
            let part = match o.kind {
                OpKind::Commit => format!("C{id}"),
                OpKind::PredRead => {
                    format!("PR{id}[{}]", universe.index.name(o.relation))
                }
                kind => format!(
                    "{}{id}[{}]",
                    kind.letter(),
                    universe.tuple_name(o.tuple.expect("tuple op"))
                ),
            };
            parts.push(part);
        }
        parts.join(" ")
    }
}

/// Flattens a unit interleaving (a sequence of transaction indices, one per
/// unit) into a schedule, deriving versions and rejecting anything not
/// allowed under multiversion read committed.
pub fn build_schedule(
    txns: &[Transaction],
    unit_sequence: &[usize],
    universe: &Universe,
) -> Result<Schedule, Reject> {
    let mut next_unit = vec![0usize; txns.len()];
    let mut order = Vec::new();
    for &t in unit_sequence {
        let unit = txns[t].units[next_unit[t]].clone();
        next_unit[t] += 1;
        for op in unit {
            order.push((t, op));
        }
    }
    debug_assert!(next_unit.iter().zip(txns).all(|(&n, t)| n == t.units.len()));

    let mut commit_pos = vec![usize::MAX; txns.len()];
    for (pos, &(t, op)) in order.iter().enumerate() {
        if txns[t].ops[op].kind == OpKind::Commit {
            commit_pos[t] = pos;
        }
    }

    // Writes per tuple in schedule order.
    let mut writes: HashMap<TupleId, Vec<(usize, usize, usize)>> = HashMap::new(); // pos, txn, op
    for (pos, &(t, op)) in order.iter().enumerate() {
        let o = &txns[t].ops[op];
        if o.kind.is_write() {
            writes
                .entry(o.tuple.unwrap())
                .or_default()
                .push((pos, t, op));
        }
    }

    let mut initially_unborn = Vec::new();
    for (tuple, ws) in &writes {
        let mut insert: Option<(usize, usize)> = None;
        let mut delete: Option<(usize, usize)> = None;
        for &(pos, t, op) in ws {
            match txns[t].ops[op].kind {
                OpKind::Insert => {
                    if insert.replace((pos, t)).is_some() {
                        return Err(Reject::DuplicateInsert);
                    }
                }
                OpKind::Delete if delete.replace((pos, t)).is_some() => {
                    return Err(Reject::DuplicateDelete);
                }
                _ => {}
            }
        }
        // No dirty writes: another transaction's write between a write and
        // its commit.
        for &(pos_b, txn_b, _) in ws {
            for &(pos_a, txn_a, _) in ws {
                if txn_a != txn_b && pos_b < pos_a && pos_a < commit_pos[txn_b] {
                    return Err(Reject::DirtyWrite);
                }
            }
        }
        // An insert creates the first version, so the tuple starts unborn
        // and every other writer commits after the inserting transaction.
        if let Some((_, ins_txn)) = insert {
            initially_unborn.push(*tuple);
            for &(_, t, _) in ws {
                if t != ins_txn && commit_pos[t] < commit_pos[ins_txn] {
                    return Err(Reject::InsertNotFirst);
                }
            }
        }
        // A delete creates the last (dead) version.
        if let Some((_, del_txn)) = delete {
            for &(_, t, _) in ws {
                if t != del_txn && commit_pos[del_txn] < commit_pos[t] {
                    return Err(Reject::WriteAfterDelete);
                }
            }
        }
    }
    initially_unborn.sort_unstable();

    // Read-last-committed: each read observes, per tuple, the version of
    // the latest write committed before it, falling back to the initial
    // version.
    let last_committed = |tuple: TupleId, pos: usize| -> Option<(usize, usize, usize)> {
        writes.get(&tuple).and_then(|ws| {
            ws.iter()
                .filter(|&&(_, t, _)| commit_pos[t] < pos)
                .max_by_key(|&&(_, t, _)| commit_pos[t])
                .copied()
        })
    };

    let mut read_version = HashMap::new();
    let mut version_sets = HashMap::new();
    for (pos, &(t, op)) in order.iter().enumerate() {
        let o = &txns[t].ops[op];
        match o.kind {
            OpKind::Read => {
                let tuple = o.tuple.unwrap();
                match last_committed(tuple, pos) {
                    Some((_, wt, wop)) => {
                        if txns[wt].ops[wop].kind == OpKind::Delete {
                            return Err(Reject::ReadDead);
                        }
                        read_version.insert(pos, VersionRef::Write(wt, wop));
                    }
                    None => {
                        if initially_unborn.binary_search(&tuple).is_ok() {
                            return Err(Reject::ReadUnborn);
                        }
                        read_version.insert(pos, VersionRef::Initial);
                    }
                }
            }
            OpKind::PredRead => {
                let mut vset = HashMap::new();
                for tuple in universe.tuples_of(o.relation) {
                    let v = match last_committed(tuple, pos) {
                        Some((_, wt, wop)) => VersionRef::Write(wt, wop),
                        None => VersionRef::Initial,
                    };
                    vset.insert(tuple, v);
                }
                version_sets.insert(pos, vset);
            }
            _ => {}
        }
    }

    Ok(Schedule {
        txns: txns.to_vec(),
        order,
        commit_pos,
        read_version,
        version_sets,
        initially_unborn,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    /// Maximum number of schedules passed to the callback.
    pub budget: usize,
    pub seed: u64,
    /// Interleaving count below which enumeration is exhaustive; above it,
    /// candidates are sampled uniformly at random.
    pub exhaustive_limit: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            budget: 10_000,
            seed: 0,
            exhaustive_limit: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn interleaving_count(unit_counts: &[usize]) -> u64 {
    // Multinomial coefficient with saturation.
    let total: usize = unit_counts.iter().sum();
    let mut count: u64 = 1;
    let mut remaining = total;
    for &k in unit_counts {
        for i in 0..k {
            count = count.saturating_mul((remaining - i) as u64);
            count /= (i + 1) as u64;
            if count > u64::MAX / 2 {
                return u64::MAX;
            }
        }
        remaining -= k;
    }
    count
}

/// Streams MVRC-allowed schedules over the transaction set to the callback.
/// Enumeration is exhaustive (lexicographic unit sequences) when the number
/// of interleavings is small, and seeded uniform sampling otherwise;
/// rejected candidates are counted, not reported. Deterministic for a fixed
/// seed.
pub fn for_each_schedule<F>(
    txns: &[Transaction],
    universe: &Universe,
    config: &GenConfig,
    mut callback: F,
) -> GenStats
where
    F: FnMut(&Schedule) -> ControlFlow<()>,
{
    let unit_counts: Vec<usize> = txns.iter().map(|t| t.units.len()).collect();
    let mut stats = GenStats::default();
    if txns.is_empty() || config.budget == 0 {
        return stats;
    }

    if interleaving_count(&unit_counts) <= config.exhaustive_limit {
        let mut remaining = unit_counts.clone();
        let mut sequence = Vec::with_capacity(remaining.iter().sum());
        let _ = exhaustive(
            txns,
            universe,
            config.budget,
            &mut remaining,
            &mut sequence,
            &mut stats,
            &mut callback,
        );
    } else {
        let mut rng = StdRng::seed_from_u64(config.seed);
        let mut base: Vec<usize> = Vec::new();
        for (t, &k) in unit_counts.iter().enumerate() {
            base.extend(std::iter::repeat_n(t, k));
        }
        // Attempt cap keeps pathological transaction sets from spinning.
        let max_attempts = config.budget.saturating_mul(50).max(1000);
        for _ in 0..max_attempts {
            if stats.accepted >= config.budget {
                break;
            }
            base.shuffle(&mut rng);
            match build_schedule(txns, &base, universe) {
                Ok(schedule) => {
                    stats.accepted += 1;
                    if callback(&schedule).is_break() {
                        break;
                    }
                }
                Err(_) => stats.rejected += 1,
            }
        }
    }
    stats
}

#[allow(clippy::too_many_arguments)]
fn exhaustive<F>(
    txns: &[Transaction],
    universe: &Universe,
    budget: usize,
    remaining: &mut [usize],
    sequence: &mut Vec<usize>,
    stats: &mut GenStats,
    callback: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&Schedule) -> ControlFlow<()>,
{
    if stats.accepted >= budget {
        return ControlFlow::Break(());
    }
    if remaining.iter().all(|&k| k == 0) {
        match build_schedule(txns, sequence, universe) {
            Ok(schedule) => {
                stats.accepted += 1;
                return callback(&schedule);
            }
            Err(_) => {
                stats.rejected += 1;
                return ControlFlow::Continue(());
            }
        }
    }
    for t in 0..remaining.len() {
        if remaining[t] == 0 {
            continue;
        }
        remaining[t] -= 1;
        sequence.push(t);
        let flow = exhaustive(txns, universe, budget, remaining, sequence, stats, callback);
        sequence.pop();
        remaining[t] += 1;
        flow?;
    }
    ControlFlow::Continue(())
}

/// Collects up to `budget` accepted schedules; convenience over
/// [`for_each_schedule`].
pub fn generate_mvrc_schedules(
    txns: &[Transaction],
    universe: &Universe,
    config: &GenConfig,
) -> (Vec<Schedule>, GenStats) {
    let mut out = Vec::new();
    let stats = for_each_schedule(txns, universe, config, |s| {
        out.push(s.clone());
        ControlFlow::Continue(())
    });
    (out, stats)
}
