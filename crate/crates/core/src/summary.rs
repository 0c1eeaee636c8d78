//! Summary graph construction.
//!
//! The summary graph over-approximates every serialization graph that an
//! MVRC-allowed schedule over instantiations of the given LTPs can produce.
//! Nodes are LTPs; an edge is a quintuple (source program, source statement
//! occurrence, flow class, target statement occurrence, target program)
//! recording that some schedule can exhibit a dependency of that flow class
//! between operations instantiated from the two statements.
//!
//! Whether a pair of statement kinds admits a dependency is mostly decided
//! by two 7x7 condition tables; `check` entries fall through to attribute
//! set intersections, and counterflow candidates based on a read-write
//! intersection can additionally be suppressed when matching foreign-key
//! annotations pin both statements to tuples owned by earlier key-based
//! writes in their programs.

use std::fmt;

use crate::unfold::Ltp;
use crate::workload::{AnalysisSettings, AttrSet, Granularity, Schema, Statement, StatementKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowClass {
    NonCounterflow,
    Counterflow,
}

impl fmt::Display for FlowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowClass::NonCounterflow => f.write_str("non-counterflow"),
            FlowClass::Counterflow => f.write_str("counterflow"),
        }
    }
}

/// Edge quintuple; programs are indices into [`SummaryGraph::nodes`] and
/// statements are positions within the respective LTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SummaryEdge {
    pub src_program: usize,
    pub src_stmt: usize,
    pub flow: FlowClass,
    pub dst_stmt: usize,
    pub dst_program: usize,
}

#[derive(Debug, Clone)]
pub struct SummaryGraph {
    pub nodes: Vec<Ltp>,
    /// Distinct quintuples in ascending order.
    pub edges: Vec<SummaryEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub counterflow_edges: usize,
}

impl SummaryGraph {
    pub fn stats(&self) -> GraphStats {
        graph_stats(self)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|l| l.name == name)
    }

    /// Human-readable edge description, e.g. `FindBids.q2 --[counterflow]--> PlaceBid_1.q5`.
    pub fn describe_edge(&self, e: &SummaryEdge) -> String {
        format!(
            "{}.{} --[{}]--> {}.{}",
            self.nodes[e.src_program].name,
            self.nodes[e.src_program].statements[e.src_stmt].display_label(),
            e.flow,
            self.nodes[e.dst_program].name,
            self.nodes[e.dst_program].statements[e.dst_stmt].display_label(),
        )
    }
}

pub fn graph_stats(graph: &SummaryGraph) -> GraphStats {
    GraphStats {
        nodes: graph.nodes.len(),
        edges: graph.edges.len(),
        counterflow_edges: graph
            .edges
            .iter()
            .filter(|e| e.flow == FlowClass::Counterflow)
            .count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableEntry {
    True,
    False,
    /// Decide via the attribute-set conditions.
    Check,
}

use TableEntry::{Check as C, False as F, True as T};

// Row: source statement kind, column: target statement kind, both in the
// order insert, key select, pred select, key update, pred update,
// key delete, pred delete.
const NC_DEP_TABLE: [[TableEntry; 7]; 7] = [
    [F, C, T, C, T, C, T], // insert
    [F, F, F, C, C, C, C], // key select
    [T, F, F, C, C, T, T], // pred select
    [F, C, C, C, C, C, C], // key update
    [T, C, C, C, C, T, T], // pred update
    [F, F, T, F, T, F, T], // key delete
    [T, F, T, C, T, T, T], // pred delete
];

const C_DEP_TABLE: [[TableEntry; 7]; 7] = [
    [F, F, F, F, F, F, F], // insert
    [F, F, F, C, C, C, C], // key select
    [T, F, F, C, C, T, T], // pred select
    [F, F, F, F, F, F, F], // key update
    [T, F, F, C, C, T, T], // pred update
    [F, F, F, F, F, F, F], // key delete
    [T, F, F, C, C, T, T], // pred delete
];

fn kind_index(kind: StatementKind) -> usize {
    match kind {
        StatementKind::Insert => 0,
        StatementKind::KeySelect => 1,
        StatementKind::PredSelect => 2,
        StatementKind::KeyUpdate => 3,
        StatementKind::PredUpdate => 4,
        StatementKind::KeyDelete => 5,
        StatementKind::PredDelete => 6,
    }
}

/// Can operations of these kinds admit a non-counterflow dependency from
/// `src` to `dst`?
pub fn nc_dep_table(src: StatementKind, dst: StatementKind) -> TableEntry {
    NC_DEP_TABLE[kind_index(src)][kind_index(dst)]
}

/// Can operations of these kinds admit a counterflow dependency from `src`
/// to `dst`? Only (predicate) reads can be counterflow sources, so all
/// write-only rows are false.
pub fn c_dep_table(src: StatementKind, dst: StatementKind) -> TableEntry {
    C_DEP_TABLE[kind_index(src)][kind_index(dst)]
}

/// Attribute sets of one statement, encoded as bitmasks over the attribute
/// list of its relation. `None` mirrors an undefined set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StmtMasks {
    pred: Option<u64>,
    obs: Option<u64>,
    mods: Option<u64>,
}

fn mask_of(set: &AttrSet, rel_attrs: &[String]) -> u64 {
    let mut mask = 0u64;
    for (bit, attr) in rel_attrs.iter().enumerate() {
        if set.contains(attr) {
            mask |= 1 << bit;
        }
    }
    mask
}

fn stmt_masks(stmt: &Statement, schema: &Schema, granularity: Granularity) -> StmtMasks {
    let rel_attrs: Vec<String> = schema
        .relation(&stmt.relation)
        .map(|r| r.attributes.clone())
        .unwrap_or_default();
    let full: u64 = if rel_attrs.is_empty() {
        0
    } else {
        (1u64 << rel_attrs.len()) - 1
    };
    let widen = |set: &Option<AttrSet>| -> Option<u64> {
        set.as_ref().map(|s| match granularity {
            Granularity::Attribute => mask_of(s, &rel_attrs),
            Granularity::Tuple => full,
        })
    };
    StmtMasks {
        pred: widen(&stmt.pred_set),
        obs: widen(&stmt.obs_set),
        mods: widen(&stmt.mod_set),
    }
}

fn meets(a: Option<u64>, b: Option<u64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x & y != 0,
        _ => false,
    }
}

fn nc_conds(src: StmtMasks, dst: StmtMasks) -> bool {
    meets(src.mods, dst.mods)
        || meets(src.mods, dst.obs)
        || meets(src.mods, dst.pred)
        || meets(src.obs, dst.mods)
        || meets(src.pred, dst.mods)
}

/// Non-counterflow fallback condition: some modified set intersects an
/// attribute set of the other statement. Intersection with an undefined set
/// is empty.
pub fn nc_dep_conds(
    src: &Statement,
    dst: &Statement,
    schema: &Schema,
    granularity: Granularity,
) -> bool {
    nc_conds(
        stmt_masks(src, schema, granularity),
        stmt_masks(dst, schema, granularity),
    )
}

const SUPPRESSING_KINDS: [StatementKind; 3] = [
    StatementKind::KeyUpdate,
    StatementKind::KeyDelete,
    StatementKind::Insert,
];

fn c_conds(
    src_masks: StmtMasks,
    dst_masks: StmtMasks,
    src_ltp: &Ltp,
    src_pos: usize,
    dst_ltp: &Ltp,
    dst_pos: usize,
    use_fk: bool,
) -> bool {
    if meets(src_masks.pred, dst_masks.mods) {
        return true;
    }
    if meets(src_masks.obs, dst_masks.mods) {
        if use_fk {
            // A counterflow read-write conflict is impossible when both
            // statements are pinned through the same foreign key to a tuple
            // their own program already wrote with a key-based statement:
            // the earlier write orders the two transactions.
            for a in src_ltp.annotations.iter().filter(|a| a.source == src_pos) {
                for b in dst_ltp
                    .annotations
                    .iter()
                    .filter(|b| b.fk == a.fk && b.source == dst_pos)
                {
                    if SUPPRESSING_KINDS.contains(&src_ltp.kind_of(a.target))
                        && SUPPRESSING_KINDS.contains(&dst_ltp.kind_of(b.target))
                        && a.target < src_pos
                        && b.target < dst_pos
                    {
                        return false;
                    }
                }
            }
        }
        return true;
    }
    false
}

/// Counterflow fallback condition for the statement occurrences `src_pos`
/// in `src_ltp` and `dst_pos` in `dst_ltp`.
pub fn c_dep_conds(
    src_ltp: &Ltp,
    src_pos: usize,
    dst_ltp: &Ltp,
    dst_pos: usize,
    schema: &Schema,
    settings: &AnalysisSettings,
) -> bool {
    let src = &src_ltp.statements[src_pos].statement;
    let dst = &dst_ltp.statements[dst_pos].statement;
    c_conds(
        stmt_masks(src, schema, settings.granularity),
        stmt_masks(dst, schema, settings.granularity),
        src_ltp,
        src_pos,
        dst_ltp,
        dst_pos,
        settings.use_fk,
    )
}

/// Builds the summary graph for a set of LTPs: for every ordered pair of
/// programs (including a program with itself) and every pair of statement
/// occurrences over the same relation, an edge of each flow class is added
/// when the corresponding table entry is true, or is `check` and the
/// fallback condition holds.
pub fn construct_summary_graph(
    ltps: Vec<Ltp>,
    schema: &Schema,
    settings: &AnalysisSettings,
) -> SummaryGraph {
    // Pre-resolve relation ids and masks once per statement occurrence.
    let rel_id = |stmt: &Statement| -> usize {
        schema
            .relations
            .iter()
            .position(|r| r.name == stmt.relation)
            .unwrap_or(usize::MAX)
    };
    let prepared: Vec<Vec<(usize, StatementKind, StmtMasks)>> = ltps
        .iter()
        .map(|ltp| {
            ltp.statements
                .iter()
                .map(|occ| {
                    (
                        rel_id(&occ.statement),
                        occ.statement.kind,
                        stmt_masks(&occ.statement, schema, settings.granularity),
                    )
                })
                .collect()
        })
        .collect();

    let mut edges = Vec::new();
    for (i, src_ltp) in ltps.iter().enumerate() {
        for (j, dst_ltp) in ltps.iter().enumerate() {
            for (si, &(src_rel, src_kind, src_masks)) in prepared[i].iter().enumerate() {
                for (sj, &(dst_rel, dst_kind, dst_masks)) in prepared[j].iter().enumerate() {
                    if src_rel != dst_rel {
                        continue;
                    }
                    let nc = match nc_dep_table(src_kind, dst_kind) {
                        TableEntry::True => true,
                        TableEntry::False => false,
                        TableEntry::Check => nc_conds(src_masks, dst_masks),
                    };
                    if nc {
                        edges.push(SummaryEdge {
                            src_program: i,
                            src_stmt: si,
                            flow: FlowClass::NonCounterflow,
                            dst_stmt: sj,
                            dst_program: j,
                        });
                    }
                    let cf = match c_dep_table(src_kind, dst_kind) {
                        TableEntry::True => true,
                        TableEntry::False => false,
                        TableEntry::Check => c_conds(
                            src_masks,
                            dst_masks,
                            src_ltp,
                            si,
                            dst_ltp,
                            sj,
                            settings.use_fk,
                        ),
                    };
                    if cf {
                        edges.push(SummaryEdge {
                            src_program: i,
                            src_stmt: si,
                            flow: FlowClass::Counterflow,
                            dst_stmt: sj,
                            dst_program: j,
                        });
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    SummaryGraph { nodes: ltps, edges }
}
