//! Unfolding of programs into linear transaction programs (LTPs).
//!
//! Loops are expanded to zero, one, or two iterations; two iterations are
//! enough because a dangerous cycle touches at most two statements of any
//! one transaction, so extra iterations never add new cycles. Branches take
//! either arm and optional blocks are taken or dropped. The result is a
//! finite set of branch-free programs over statement *occurrences*: loop
//! expansion can duplicate a statement, and the two copies are distinct
//! statements with distinct positions from the analysis' point of view.

use std::collections::HashSet;

use crate::workload::{Btp, ProgramNode, Statement};

/// A statement occurrence inside an LTP, ordered by `position`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtpStatement {
    pub statement: Statement,
    /// 1-based counter among occurrences of the same source label.
    pub occurrence: u32,
    /// Index in the LTP's statement list.
    pub position: usize,
}

impl LtpStatement {
    /// Display name: the source label, with `#n` appended for duplicates.
    pub fn display_label(&self) -> String {
        if self.occurrence > 1 {
            format!("{}#{}", self.statement.label, self.occurrence)
        } else {
            self.statement.label.clone()
        }
    }
}

/// A foreign-key annotation replicated onto statement occurrences; fields
/// are positions into the owning LTP's statement list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceAnnotation {
    pub target: usize,
    pub fk: String,
    pub source: usize,
}

/// A linear (branch- and loop-free) transaction program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ltp {
    /// Unique name: the source program name, suffixed with `_i` when the
    /// program has several unfoldings.
    pub name: String,
    /// Name of the source program.
    pub source: String,
    pub statements: Vec<LtpStatement>,
    pub annotations: Vec<OccurrenceAnnotation>,
}

impl Ltp {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn kind_of(&self, position: usize) -> crate::workload::StatementKind {
        self.statements[position].statement.kind
    }
}

fn expansions(node: &ProgramNode) -> Vec<Vec<&Statement>> {
    match node {
        ProgramNode::Stmt(q) => vec![vec![q]],
        ProgramNode::Seq(children) => {
            let mut acc: Vec<Vec<&Statement>> = vec![Vec::new()];
            for child in children {
                let child_exps = expansions(child);
                let mut next = Vec::with_capacity(acc.len() * child_exps.len());
                for prefix in &acc {
                    for exp in &child_exps {
                        let mut seq = prefix.clone();
                        seq.extend(exp.iter().copied());
                        next.push(seq);
                    }
                }
                acc = next;
            }
            acc
        }
        ProgramNode::Loop(child) => {
            let inner = expansions(child);
            let mut out = vec![Vec::new()];
            out.extend(inner.iter().cloned());
            for a in &inner {
                for b in &inner {
                    let mut seq = a.clone();
                    seq.extend(b.iter().copied());
                    out.push(seq);
                }
            }
            out
        }
        ProgramNode::Branch(left, right) => {
            let mut out = expansions(left);
            out.extend(expansions(right));
            out
        }
        ProgramNode::Optional(child) => {
            let mut out = expansions(child);
            out.push(Vec::new());
            out
        }
    }
}

/// Unfolds one program into its set of LTPs. Structurally identical
/// unfoldings (possible with nested control flow) are kept once; the empty
/// unfolding of a loop is a valid LTP and is retained.
pub fn unfold_program(btp: &Btp) -> Vec<Ltp> {
    let mut seen: HashSet<Vec<&str>> = HashSet::new();
    let mut kept: Vec<Vec<&Statement>> = Vec::new();
    for exp in expansions(&btp.body) {
        let key: Vec<&str> = exp.iter().map(|q| q.label.as_str()).collect();
        if seen.insert(key) {
            kept.push(exp);
        }
    }

    let multiple = kept.len() > 1;
    kept.iter()
        .enumerate()
        .map(|(idx, exp)| {
            let name = if multiple {
                format!("{}_{}", btp.name, idx + 1)
            } else {
                btp.name.clone()
            };
            build_ltp(btp, name, exp)
        })
        .collect()
}

fn build_ltp(btp: &Btp, name: String, exp: &[&Statement]) -> Ltp {
    let mut statements = Vec::with_capacity(exp.len());
    for (position, q) in exp.iter().enumerate() {
        let occurrence = 1 + statements
            .iter()
            .filter(|s: &&LtpStatement| s.statement.label == q.label)
            .count() as u32;
        statements.push(LtpStatement {
            statement: (*q).clone(),
            occurrence,
            position,
        });
    }

    // Replicate each program-level annotation over every pair of occurrences
    // of its two labels. An annotation whose labels did not survive this
    // unfolding is dropped.
    let mut annotations = Vec::new();
    for ann in &btp.fk_annotations {
        for target in statements
            .iter()
            .filter(|s| s.statement.label == ann.target)
        {
            for source in statements
                .iter()
                .filter(|s| s.statement.label == ann.source)
            {
                annotations.push(OccurrenceAnnotation {
                    target: target.position,
                    fk: ann.fk.clone(),
                    source: source.position,
                });
            }
        }
    }

    Ltp {
        name,
        source: btp.name.clone(),
        statements,
        annotations,
    }
}

/// Unfolds every program of a workload; the result is the node set of the
/// summary graph.
pub fn unfold_workload(programs: &[Btp]) -> Vec<Ltp> {
    programs.iter().flat_map(unfold_program).collect()
}
