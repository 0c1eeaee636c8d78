//! Dependencies, serialization graphs, and the cycle-shape checks.
//!
//! Dependencies between operations of different transactions come in five
//! kinds: write-write, write-read, read-write, and the predicate variants
//! of the last two. A dependency is counterflow when its target transaction
//! commits before its source transaction; under MVRC only (predicate)
//! read-write antidependencies can be counterflow, and every serialization
//! graph cycle carries a non-counterflow edge plus either two adjacent
//! counterflow edges or an ordered incoming/outgoing pair. Both facts are
//! asserted here over generated schedules, as is coverage of every
//! dependency by a summary-graph quintuple.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::oracle::schedule::{Schedule, VersionRef};
use crate::oracle::txn::OpKind;
use crate::oracle::universe::Universe;
use crate::summary::{FlowClass, SummaryGraph};
use crate::workload::Granularity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepKind {
    Ww,
    Wr,
    Rw,
    PredWr,
    PredRw,
}

impl DepKind {
    pub fn is_antidependency(self) -> bool {
        matches!(self, DepKind::Rw | DepKind::PredRw)
    }
}

/// A dependency edge `(T_src, src_op) -> (T_dst, dst_op)`; op fields are
/// indexes into the transactions' operation lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dependency {
    pub src_txn: usize,
    pub src_op: usize,
    pub dst_txn: usize,
    pub dst_op: usize,
    pub kind: DepKind,
    pub counterflow: bool,
}

fn mask(op: &crate::oracle::txn::Operation, granularity: Granularity) -> u64 {
    match granularity {
        Granularity::Attribute => op.attr_mask,
        Granularity::Tuple => op.full_mask,
    }
}

/// Computes the full dependency relation of a schedule at the requested
/// granularity.
pub fn compute_dependencies(s: &Schedule, granularity: Granularity) -> Vec<Dependency> {
    let mut deps = Vec::new();
    let positions: HashMap<(usize, usize), usize> = s
        .order
        .iter()
        .enumerate()
        .map(|(pos, &key)| (key, pos))
        .collect();

    for (i, src) in s.txns.iter().enumerate() {
        for (j, dst) in s.txns.iter().enumerate() {
            if i == j {
                continue;
            }
            let counterflow = s.commit_pos[j] < s.commit_pos[i];
            for (bi, b) in src.ops.iter().enumerate() {
                if b.kind == OpKind::Commit {
                    continue;
                }
                for (aj, a) in dst.ops.iter().enumerate() {
                    if a.kind == OpKind::Commit {
                        continue;
                    }
                    let mut push = |kind: DepKind| {
                        deps.push(Dependency {
                            src_txn: i,
                            src_op: bi,
                            dst_txn: j,
                            dst_op: aj,
                            kind,
                            counterflow,
                        });
                    };
                    match (b.kind, a.kind) {
                        // Write-write: same tuple, common written attribute,
                        // source version installed first.
                        (bk, ak) if bk.is_write() && ak.is_write() => {
                            if b.tuple == a.tuple
                                && mask(b, granularity) & mask(a, granularity) != 0
                                && s.commit_pos[i] < s.commit_pos[j]
                            {
                                push(DepKind::Ww);
                            }
                        }
                        // Write-read: the read observes this version or a
                        // later one.
                        (bk, OpKind::Read) if bk.is_write() => {
                            if b.tuple != a.tuple
                                || mask(b, granularity) & mask(a, granularity) == 0
                            {
                                continue;
                            }
                            let pos_a = positions[&(j, aj)];
                            match s.read_version[&pos_a] {
                                VersionRef::Write(wt, wop) => {
                                    if (wt, wop) == (i, bi)
                                        || s.version_precedes((i, bi), (wt, wop))
                                    {
                                        push(DepKind::Wr);
                                    }
                                }
                                VersionRef::Initial => {}
                            }
                        }
                        // Read-write: the read observed a version installed
                        // before the written one.
                        (OpKind::Read, ak) if ak.is_write() => {
                            if b.tuple != a.tuple
                                || mask(b, granularity) & mask(a, granularity) == 0
                            {
                                continue;
                            }
                            let pos_b = positions[&(i, bi)];
                            let precedes = match s.read_version[&pos_b] {
                                VersionRef::Initial => true,
                                VersionRef::Write(wt, wop) => {
                                    (wt, wop) != (j, aj) && s.version_precedes((wt, wop), (j, aj))
                                }
                            };
                            if precedes {
                                push(DepKind::Rw);
                            }
                        }
                        // Predicate write-read over the version set.
                        (bk, OpKind::PredRead) if bk.is_write() => {
                            if b.relation != a.relation {
                                continue;
                            }
                            let exempt = matches!(bk, OpKind::Insert | OpKind::Delete);
                            if !exempt && mask(b, granularity) & mask(a, granularity) == 0 {
                                continue;
                            }
                            let pos_a = positions[&(j, aj)];
                            let vset = &s.version_sets[&pos_a];
                            match vset[&b.tuple.unwrap()] {
                                VersionRef::Write(wt, wop) => {
                                    if (wt, wop) == (i, bi)
                                        || s.version_precedes((i, bi), (wt, wop))
                                    {
                                        push(DepKind::PredWr);
                                    }
                                }
                                VersionRef::Initial => {}
                            }
                        }
                        // Predicate read-write: the version set holds a
                        // version older than the write.
                        (OpKind::PredRead, ak) if ak.is_write() => {
                            if b.relation != a.relation {
                                continue;
                            }
                            let exempt = matches!(ak, OpKind::Insert | OpKind::Delete);
                            if !exempt && mask(b, granularity) & mask(a, granularity) == 0 {
                                continue;
                            }
                            let pos_b = positions[&(i, bi)];
                            let vset = &s.version_sets[&pos_b];
                            let precedes = match vset[&a.tuple.unwrap()] {
                                VersionRef::Initial => true,
                                VersionRef::Write(wt, wop) => {
                                    (wt, wop) != (j, aj) && s.version_precedes((wt, wop), (j, aj))
                                }
                            };
                            if precedes {
                                push(DepKind::PredRw);
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    deps
}

/// The serialization graph as quadruples (source txn, source op, target op,
/// target txn); one per dependency. Commits never appear.
pub fn serialization_graph(
    s: &Schedule,
    granularity: Granularity,
) -> Vec<(usize, usize, usize, usize)> {
    compute_dependencies(s, granularity)
        .into_iter()
        .map(|d| (d.src_txn, d.src_op, d.dst_op, d.dst_txn))
        .collect()
}

/// A schedule is conflict-serializable iff its serialization graph is
/// acyclic.
pub fn is_conflict_serializable(s: &Schedule, granularity: Granularity) -> bool {
    let deps = compute_dependencies(s, granularity);
    !has_txn_cycle(s.txns.len(), &deps)
}

fn has_txn_cycle(n: usize, deps: &[Dependency]) -> bool {
    let mut adj = vec![HashSet::new(); n];
    for d in deps {
        adj[d.src_txn].insert(d.dst_txn);
    }
    // Iterative DFS with colors.
    let mut color = vec![0u8; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, adj[start].iter().copied().collect::<Vec<_>>())];
        color[start] = 1;
        while let Some((v, rest)) = stack.last_mut() {
            match rest.pop() {
                Some(w) => {
                    if color[w] == 1 {
                        return true;
                    }
                    if color[w] == 0 {
                        color[w] = 1;
                        let next = adj[w].iter().copied().collect::<Vec<_>>();
                        stack.push((w, next));
                    }
                }
                None => {
                    color[*v] = 2;
                    stack.pop();
                }
            }
        }
    }
    false
}

#[derive(Debug, Clone, Default)]
pub struct CycleCheckReport {
    pub dependencies: usize,
    pub cycles_checked: usize,
    /// Edge-choice enumeration was capped.
    pub truncated: bool,
    /// Counterflow dependencies that are not (predicate) antidependencies.
    pub flow_violations: Vec<String>,
    /// Cycles missing the required shape.
    pub shape_violations: Vec<String>,
}

impl CycleCheckReport {
    pub fn is_clean(&self) -> bool {
        self.flow_violations.is_empty() && self.shape_violations.is_empty()
    }
}

const CYCLE_CHOICE_CAP: usize = 50_000;

/// Asserts the two facts every MVRC schedule must satisfy: counterflow
/// dependencies are (predicate) read-write antidependencies, and every
/// serialization-graph cycle has at least one non-counterflow dependency
/// together with an adjacent counterflow pair or an ordered pair (the
/// outgoing counterflow source precedes the incoming target inside the
/// shared transaction, or the incoming source is a read or predicate read).
pub fn check_cycle_conditions(s: &Schedule, granularity: Granularity) -> CycleCheckReport {
    let deps = compute_dependencies(s, granularity);
    let mut report = CycleCheckReport {
        dependencies: deps.len(),
        ..Default::default()
    };

    for d in &deps {
        if d.counterflow && !d.kind.is_antidependency() {
            report.flow_violations.push(format!(
                "counterflow {:?} dependency T{} -> T{}",
                d.kind,
                d.src_txn + 1,
                d.dst_txn + 1
            ));
        }
    }

    // Edges grouped per transaction pair for the node-cycle enumeration.
    let n = s.txns.len();
    let mut by_pair: HashMap<(usize, usize), Vec<&Dependency>> = HashMap::new();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for d in &deps {
        by_pair.entry((d.src_txn, d.dst_txn)).or_default().push(d);
        adj[d.src_txn].insert(d.dst_txn);
    }

    let mut node_cycles = Vec::new();
    let mut path = Vec::new();
    for start in 0..n {
        path.push(start);
        find_node_cycles(start, start, &adj, &mut path, &mut node_cycles);
        path.pop();
    }

    let mut budget = CYCLE_CHOICE_CAP;
    for cycle in &node_cycles {
        let hops: Vec<&Vec<&Dependency>> = (0..cycle.len())
            .map(|k| &by_pair[&(cycle[k], cycle[(k + 1) % cycle.len()])])
            .collect();
        check_edge_choices(s, &hops, &mut Vec::new(), &mut budget, &mut report);
        if budget == 0 {
            report.truncated = true;
            break;
        }
    }
    report
}

/// Simple directed cycles as node sequences; each cycle is enumerated once,
/// anchored at its minimal node.
fn find_node_cycles(
    start: usize,
    v: usize,
    adj: &[BTreeSet<usize>],
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    for &w in &adj[v] {
        if w == start {
            out.push(path.clone());
        } else if w > start && !path.contains(&w) {
            path.push(w);
            find_node_cycles(start, w, adj, path, out);
            path.pop();
        }
    }
}

fn check_edge_choices(
    s: &Schedule,
    hops: &[&Vec<&Dependency>],
    chosen: &mut Vec<Dependency>,
    budget: &mut usize,
    report: &mut CycleCheckReport,
) {
    if *budget == 0 {
        return;
    }
    if chosen.len() == hops.len() {
        *budget -= 1;
        report.cycles_checked += 1;
        if let Some(problem) = cycle_shape_problem(s, chosen) {
            report.shape_violations.push(problem);
        }
        return;
    }
    for d in hops[chosen.len()] {
        chosen.push(**d);
        check_edge_choices(s, hops, chosen, budget, report);
        chosen.pop();
        if *budget == 0 {
            return;
        }
    }
}

fn cycle_shape_problem(s: &Schedule, cycle: &[Dependency]) -> Option<String> {
    let k = cycle.len();
    let describe = || {
        cycle
            .iter()
            .map(|d| {
                format!(
                    "T{}→T{} {:?}{}",
                    d.src_txn + 1,
                    d.dst_txn + 1,
                    d.kind,
                    if d.counterflow { " (cf)" } else { "" }
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    if !cycle.iter().any(|d| !d.counterflow) {
        return Some(format!("cycle with only counterflow edges: {}", describe()));
    }
    let mut satisfied = false;
    for i in 0..k {
        let prev = &cycle[i];
        let next = &cycle[(i + 1) % k];
        debug_assert_eq!(prev.dst_txn, next.src_txn);
        if !next.counterflow {
            continue;
        }
        if prev.counterflow {
            satisfied = true;
            break;
        }
        // Ordered pair inside the shared transaction, or a reading source on
        // the incoming edge.
        if next.src_op < prev.dst_op {
            satisfied = true;
            break;
        }
        let src_kind = s.txns[prev.src_txn].ops[prev.src_op].kind;
        if matches!(src_kind, OpKind::Read | OpKind::PredRead) {
            satisfied = true;
            break;
        }
    }
    if satisfied {
        None
    } else {
        Some(format!("cycle without a qualifying pair: {}", describe()))
    }
}

/// Checks that every dependency of the schedule is covered by a summary
/// graph quintuple with matching programs, statement occurrences, and flow
/// class. Returns the first uncovered dependency rendered for debugging.
pub fn check_graph_coverage(
    s: &Schedule,
    graph: &SummaryGraph,
    granularity: Granularity,
    universe: &Universe,
) -> Result<usize, String> {
    let node_of: HashMap<&str, usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, l)| (l.name.as_str(), i))
        .collect();
    let edge_set: HashSet<(usize, usize, FlowClass, usize, usize)> = graph
        .edges
        .iter()
        .map(|e| (e.src_program, e.src_stmt, e.flow, e.dst_stmt, e.dst_program))
        .collect();

    let deps = compute_dependencies(s, granularity);
    for d in &deps {
        let src = &s.txns[d.src_txn];
        let dst = &s.txns[d.dst_txn];
        let flow = if d.counterflow {
            FlowClass::Counterflow
        } else {
            FlowClass::NonCounterflow
        };
        let key = (
            node_of[src.ltp.name.as_str()],
            src.ops[d.src_op]
                .stmt
                .expect("dependency op has a statement"),
            flow,
            dst.ops[d.dst_op]
                .stmt
                .expect("dependency op has a statement"),
            node_of[dst.ltp.name.as_str()],
        );
        if !edge_set.contains(&key) {
            return Err(format!(
                "dependency {:?} {} T{}.{} -> T{}.{} ({} -> {}) has no quintuple; schedule: {}",
                d.kind,
                flow,
                d.src_txn + 1,
                src.ltp.statements[key.1].display_label(),
                d.dst_txn + 1,
                dst.ltp.statements[key.3].display_label(),
                src.ltp.name,
                dst.ltp.name,
                s.dump(universe),
            ));
        }
    }
    Ok(deps.len())
}
