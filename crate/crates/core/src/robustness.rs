//! Robustness verdicts over summary graphs.
//!
//! A workload is reported robust when its summary graph contains no
//! dangerous cycle. The refined criterion (type-II) looks for a cycle with a
//! non-counterflow edge plus either two adjacent counterflow edges or an
//! incoming/outgoing pair at one program whose outgoing counterflow edge
//! starts at an earlier statement, or whose incoming edge originates from a
//! reading statement. The baseline criterion (type-I) flags any cycle
//! through a counterflow edge.

use std::fmt;

use thiserror::Error;

use crate::summary::{construct_summary_graph, FlowClass, SummaryEdge, SummaryGraph};
use crate::unfold::unfold_workload;
use crate::workload::{
    validate_workload, AnalysisSettings, Btp, Method, Schema, StatementKind, ValidationIssue,
};

/// Reflexive-transitive reachability between programs of a summary graph,
/// over edges of both flow classes.
pub struct Reachability {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl Reachability {
    pub fn reachable(&self, from: usize, to: usize) -> bool {
        self.rows[from * self.words + to / 64] & (1 << (to % 64)) != 0
    }

    fn row(&self, from: usize) -> &[u64] {
        &self.rows[from * self.words..(from + 1) * self.words]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Computes reachability with length-0 paths included: every program reaches
/// itself.
pub fn reachability(graph: &SummaryGraph) -> Reachability {
    let n = graph.nodes.len();
    let words = n.div_ceil(64).max(1);
    let mut adj = vec![0u64; n * words];
    for e in &graph.edges {
        adj[e.src_program * words + e.dst_program / 64] |= 1 << (e.dst_program % 64);
    }
    let mut rows = vec![0u64; n * words];
    let mut frontier = Vec::new();
    for start in 0..n {
        let base = start * words;
        rows[base + start / 64] |= 1 << (start % 64);
        frontier.clear();
        frontier.push(start);
        while let Some(v) = frontier.pop() {
            for w in 0..words {
                let mut new = adj[v * words + w] & !rows[base + w];
                while new != 0 {
                    let bit = new.trailing_zeros() as usize;
                    new &= new - 1;
                    rows[base + w] |= 1 << bit;
                    frontier.push(w * 64 + bit);
                }
            }
        }
    }
    Reachability { n, words, rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessTrigger {
    /// The middle edge is itself counterflow: two adjacent counterflow edges.
    SecondEdgeCounterflow,
    /// The outgoing counterflow edge leaves from a statement that precedes
    /// the statement the incoming edge points at.
    StatementOrder,
    /// The incoming edge originates from a reading statement kind.
    ReadSourceKind,
}

impl fmt::Display for WitnessTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WitnessTrigger::SecondEdgeCounterflow => f.write_str("second-edge-counterflow"),
            WitnessTrigger::StatementOrder => f.write_str("statement-order"),
            WitnessTrigger::ReadSourceKind => f.write_str("read-source-kind"),
        }
    }
}

/// Evidence for a type-II cycle: `e1` (non-counterflow), a path to `e2`,
/// the adjacent counterflow edge `e3`, and a path closing the cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type2Witness {
    pub e1: SummaryEdge,
    pub e2: SummaryEdge,
    pub e3: SummaryEdge,
    pub path_e1_to_e2: Vec<SummaryEdge>,
    pub path_e3_to_e1: Vec<SummaryEdge>,
    pub trigger: WitnessTrigger,
}

/// Evidence for a type-I cycle: a counterflow edge plus a path closing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type1Witness {
    pub edge: SummaryEdge,
    pub path_back: Vec<SummaryEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CycleWitness {
    Type2(Type2Witness),
    Type1(Type1Witness),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub robust: bool,
    pub witness: Option<CycleWitness>,
}

impl Verdict {
    fn robust() -> Verdict {
        Verdict {
            robust: true,
            witness: None,
        }
    }

    pub fn describe(&self, graph: &SummaryGraph) -> String {
        match &self.witness {
            None => "ROBUST".to_string(),
            Some(CycleWitness::Type2(w)) => {
                let mut out = String::from("NOT ROBUST (type-II cycle)\n");
                out.push_str(&format!("  e1: {}\n", graph.describe_edge(&w.e1)));
                for e in &w.path_e1_to_e2 {
                    out.push_str(&format!("      {}\n", graph.describe_edge(e)));
                }
                out.push_str(&format!("  e2: {}\n", graph.describe_edge(&w.e2)));
                out.push_str(&format!("  e3: {}\n", graph.describe_edge(&w.e3)));
                for e in &w.path_e3_to_e1 {
                    out.push_str(&format!("      {}\n", graph.describe_edge(e)));
                }
                out.push_str(&format!("  trigger: {}", w.trigger));
                out
            }
            Some(CycleWitness::Type1(w)) => {
                let mut out = String::from("NOT ROBUST (type-I cycle)\n");
                out.push_str(&format!(
                    "  counterflow: {}\n",
                    graph.describe_edge(&w.edge)
                ));
                for e in &w.path_back {
                    out.push_str(&format!("      {}\n", graph.describe_edge(e)));
                }
                out.trim_end().to_string()
            }
        }
    }
}

const READ_SOURCE_KINDS: [StatementKind; 4] = [
    StatementKind::KeySelect,
    StatementKind::PredSelect,
    StatementKind::PredUpdate,
    StatementKind::PredDelete,
];

fn trigger(graph: &SummaryGraph, e2: &SummaryEdge, e3: &SummaryEdge) -> Option<WitnessTrigger> {
    debug_assert_eq!(e2.dst_program, e3.src_program);
    if e2.flow == FlowClass::Counterflow {
        return Some(WitnessTrigger::SecondEdgeCounterflow);
    }
    if e3.src_stmt < e2.dst_stmt {
        return Some(WitnessTrigger::StatementOrder);
    }
    let src_kind = graph.nodes[e2.src_program].kind_of(e2.src_stmt);
    if READ_SOURCE_KINDS.contains(&src_kind) {
        return Some(WitnessTrigger::ReadSourceKind);
    }
    None
}

/// Searches the graph for a type-II cycle. The verdict carries the first
/// witness found, scanning `e1` in edge order and then `(e2, e3)` in edge
/// order, with shortest connecting paths.
pub fn has_type2_cycle(graph: &SummaryGraph) -> Verdict {
    let n = graph.nodes.len();
    if n == 0 {
        return Verdict::robust();
    }
    let reach = reachability(graph);
    let words = n.div_ceil(64).max(1);

    let mut in_edges: Vec<Vec<&SummaryEdge>> = vec![Vec::new(); n];
    let mut cf_out: Vec<Vec<&SummaryEdge>> = vec![Vec::new(); n];
    for e in &graph.edges {
        in_edges[e.dst_program].push(e);
        if e.flow == FlowClass::Counterflow {
            cf_out[e.src_program].push(e);
        }
    }

    // endpoint_rows[p3] accumulates, over all trigger-satisfying pairs
    // (e2, e3) with e2.src_program == p3, the programs reachable from
    // e3.dst_program. A non-counterflow edge e1 closes a cycle iff some p3
    // reachable from e1.dst_program has e1.src_program in this row.
    let mut endpoint_rows = vec![0u64; n * words];
    let mut any_pair = false;
    for mid in 0..n {
        for e3 in &cf_out[mid] {
            for e2 in &in_edges[mid] {
                if trigger(graph, e2, e3).is_some() {
                    any_pair = true;
                    let p3 = e2.src_program;
                    let from = reach.row(e3.dst_program);
                    let row = &mut endpoint_rows[p3 * words..(p3 + 1) * words];
                    for (dst, src) in row.iter_mut().zip(from) {
                        *dst |= src;
                    }
                }
            }
        }
    }
    if !any_pair {
        return Verdict::robust();
    }

    let closes = |e1: &SummaryEdge| -> bool {
        let reachable_mid = reach.row(e1.dst_program);
        for (w, &word) in reachable_mid.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let p3 = w * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                if endpoint_rows[p3 * words + e1.src_program / 64] & (1 << (e1.src_program % 64))
                    != 0
                {
                    return true;
                }
            }
        }
        false
    };

    let e1 = graph
        .edges
        .iter()
        .filter(|e| e.flow == FlowClass::NonCounterflow)
        .find(|e| closes(e));
    let Some(e1) = e1 else {
        return Verdict::robust();
    };

    // Reconstruct the first (e2, e3) pair in edge order for this e1.
    for e2 in &graph.edges {
        if !reach.reachable(e1.dst_program, e2.src_program) {
            continue;
        }
        for e3 in &cf_out[e2.dst_program] {
            if !reach.reachable(e3.dst_program, e1.src_program) {
                continue;
            }
            if let Some(t) = trigger(graph, e2, e3) {
                return Verdict {
                    robust: false,
                    witness: Some(CycleWitness::Type2(Type2Witness {
                        e1: *e1,
                        e2: *e2,
                        e3: **e3,
                        path_e1_to_e2: shortest_path(graph, e1.dst_program, e2.src_program),
                        path_e3_to_e1: shortest_path(graph, e3.dst_program, e1.src_program),
                        trigger: t,
                    })),
                };
            }
        }
    }
    unreachable!("a closing pair must exist for the selected edge");
}

/// Baseline criterion: a cycle through at least one counterflow edge. A
/// counterflow self-loop alone is such a cycle.
pub fn has_type1_cycle(graph: &SummaryGraph) -> Verdict {
    if graph.nodes.is_empty() {
        return Verdict::robust();
    }
    let reach = reachability(graph);
    for e in &graph.edges {
        if e.flow == FlowClass::Counterflow && reach.reachable(e.dst_program, e.src_program) {
            return Verdict {
                robust: false,
                witness: Some(CycleWitness::Type1(Type1Witness {
                    edge: *e,
                    path_back: shortest_path(graph, e.dst_program, e.src_program),
                })),
            };
        }
    }
    Verdict::robust()
}

/// Shortest program-level path as a list of edges; empty when `from == to`.
/// Each hop uses the first edge (in edge order) connecting its endpoints.
fn shortest_path(graph: &SummaryGraph, from: usize, to: usize) -> Vec<SummaryEdge> {
    if from == to {
        return Vec::new();
    }
    let n = graph.nodes.len();
    let mut prev: Vec<Option<&SummaryEdge>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    visited[from] = true;
    queue.push_back(from);
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for e in &graph.edges {
            if e.src_program == v && !visited[e.dst_program] {
                visited[e.dst_program] = true;
                prev[e.dst_program] = Some(e);
                queue.push_back(e.dst_program);
            }
        }
    }
    let mut path = Vec::new();
    let mut at = to;
    while at != from {
        let e = prev[at].expect("path must exist between connected programs");
        path.push(*e);
        at = e.src_program;
    }
    path.reverse();
    path
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("workload failed validation with {} issue(s)", .0.len())]
    Invalid(Vec<ValidationIssue>),
    #[error("subset enumeration over {actual} programs exceeds the limit of {limit}")]
    TooManySubsets { actual: usize, limit: usize },
}

/// Full pipeline: validate, unfold, build the summary graph, and search for
/// cycles with the method selected in the settings.
pub fn check_robust(
    schema: &Schema,
    programs: &[Btp],
    settings: &AnalysisSettings,
) -> Result<(Verdict, SummaryGraph), AnalysisError> {
    let report = validate_workload(schema, programs);
    if !report.is_empty() {
        return Err(AnalysisError::Invalid(report));
    }
    let graph = construct_summary_graph(unfold_workload(programs), schema, settings);
    let verdict = match settings.method {
        Method::Type2 => has_type2_cycle(&graph),
        Method::Type1 => has_type1_cycle(&graph),
    };
    Ok((verdict, graph))
}

pub const DEFAULT_SUBSET_LIMIT: usize = 20;

/// All maximal robust subsets of the workload's programs, as sorted name
/// lists, ordered by descending size and then lexicographically. Each subset
/// is analyzed from scratch (unfolding included), so foreign-key suppression
/// sees exactly the programs in the subset.
pub fn maximal_robust_subsets(
    schema: &Schema,
    programs: &[Btp],
    settings: &AnalysisSettings,
) -> Result<Vec<Vec<String>>, AnalysisError> {
    maximal_robust_subsets_with_limit(schema, programs, settings, DEFAULT_SUBSET_LIMIT)
}

pub fn maximal_robust_subsets_with_limit(
    schema: &Schema,
    programs: &[Btp],
    settings: &AnalysisSettings,
    limit: usize,
) -> Result<Vec<Vec<String>>, AnalysisError> {
    let n = programs.len();
    if n > limit {
        return Err(AnalysisError::TooManySubsets { actual: n, limit });
    }
    let report = validate_workload(schema, programs);
    if !report.is_empty() {
        return Err(AnalysisError::Invalid(report));
    }

    // Descending subset size so that anti-monotonicity applies: a subset of
    // an already-found robust set is robust but cannot be maximal.
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));

    let mut maximal: Vec<(u32, Vec<String>)> = Vec::new();
    for mask in masks {
        if maximal.iter().any(|(m, _)| mask & m == mask) {
            continue;
        }
        let subset: Vec<Btp> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| programs[i].clone())
            .collect();
        let graph = construct_summary_graph(unfold_workload(&subset), schema, settings);
        let verdict = match settings.method {
            Method::Type2 => has_type2_cycle(&graph),
            Method::Type1 => has_type1_cycle(&graph),
        };
        if verdict.robust {
            let mut names: Vec<String> = subset.iter().map(|p| p.name.clone()).collect();
            names.sort();
            maximal.push((mask, names));
        }
    }

    let mut result: Vec<Vec<String>> = maximal.into_iter().map(|(_, names)| names).collect();
    result.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    Ok(result)
}
