//! Transaction instantiation.
//!
//! An LTP instantiates to a transaction by binding each statement to tuples
//! and expanding it to an operation chunk: a key-based update becomes read
//! then write on one tuple, a predicate-based statement becomes a predicate
//! read followed by per-tuple operations, inserts/deletes/selects become
//! single operations. A transaction performs at most one read and at most
//! one write per tuple: a read of a tuple the transaction already read is
//! dropped (the earlier read stands in for it), while a second write on the
//! same tuple makes the binding invalid.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

use crate::oracle::universe::{TupleId, Universe};
use crate::unfold::Ltp;
use crate::workload::StatementKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Read,
    Write,
    Insert,
    Delete,
    PredRead,
    Commit,
}

impl OpKind {
    pub fn is_write(self) -> bool {
        matches!(self, OpKind::Write | OpKind::Insert | OpKind::Delete)
    }

    pub fn letter(self) -> &'static str {
        match self {
            OpKind::Read => "R",
            OpKind::Write => "W",
            OpKind::Insert => "I",
            OpKind::Delete => "D",
            OpKind::PredRead => "PR",
            OpKind::Commit => "C",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Operation {
    pub kind: OpKind,
    /// Target tuple; `None` for predicate reads and the commit.
    pub tuple: Option<TupleId>,
    /// Relation id; `u32::MAX` for the commit.
    pub relation: u32,
    /// Position of the originating statement occurrence in the LTP.
    pub stmt: Option<usize>,
    /// Attribute set of the operation (read, written, or predicate set) at
    /// attribute granularity.
    pub attr_mask: u64,
    /// All attributes of the relation, for tuple-granularity analysis.
    pub full_mask: u64,
}

/// Tuple assignment for one statement occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    /// Key-based statements touch exactly one tuple.
    Tuple(TupleId),
    /// Predicate-based statements additionally read/write a tuple list
    /// (possibly empty); the predicate read itself ranges over the whole
    /// relation.
    Tuples(Vec<TupleId>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InstantiateError {
    #[error("statement {stmt} expects a binding of the other shape")]
    BindingShape { stmt: usize },
    #[error("missing binding for statement {stmt}")]
    MissingBinding { stmt: usize },
    #[error("statement {stmt} is over relation {expected}, bound tuple lives in {got}")]
    RelationMismatch {
        stmt: usize,
        expected: String,
        got: String,
    },
    #[error("transaction writes tuple {tuple} twice")]
    DuplicateWrite { tuple: String },
    #[error("binding violates constraint {fk}: image of {src} is not the bound target tuple")]
    FkViolation { fk: String, src: String },
    #[error("statement is over a relation missing from the schema")]
    UnknownRelation,
}

#[derive(Debug, Clone)]
pub struct Transaction {
    pub id: usize,
    pub ltp: Arc<Ltp>,
    /// Operations in program order; the last one is the commit.
    pub ops: Vec<Operation>,
    /// Indivisible units for interleaving: one per statement (its atomic
    /// chunk) plus the final commit. A unit can be empty when a statement's
    /// only read was dropped as a duplicate.
    pub units: Vec<Range<usize>>,
    /// Spans of multi-operation atomic chunks (first and last op index).
    pub chunks: Vec<(usize, usize)>,
}

impl Transaction {
    pub fn commit_index(&self) -> usize {
        self.ops.len() - 1
    }

    /// Tuples this transaction inserts or deletes, used to rule out
    /// transaction sets that can never form a valid schedule.
    pub fn inserted_tuples(&self) -> impl Iterator<Item = TupleId> + '_ {
        self.ops
            .iter()
            .filter(|o| o.kind == OpKind::Insert)
            .filter_map(|o| o.tuple)
    }

    pub fn deleted_tuples(&self) -> impl Iterator<Item = TupleId> + '_ {
        self.ops
            .iter()
            .filter(|o| o.kind == OpKind::Delete)
            .filter_map(|o| o.tuple)
    }
}

/// Builds a transaction from an LTP and per-statement bindings, enforcing
/// relation agreement, the one-read/one-write-per-tuple rule, and every
/// replicated foreign-key annotation (each tuple bound to the annotation
/// source must map under the key to the tuple bound to the target).
pub fn instantiate(
    ltp: &Arc<Ltp>,
    id: usize,
    bindings: &[Binding],
    universe: &Universe,
) -> Result<Transaction, InstantiateError> {
    let index = &universe.index;
    if bindings.len() != ltp.statements.len() {
        return Err(InstantiateError::MissingBinding {
            stmt: bindings.len(),
        });
    }

    // Constraint check first: annotations relate raw bindings.
    for ann in &ltp.annotations {
        let Binding::Tuple(target) = &bindings[ann.target] else {
            return Err(InstantiateError::BindingShape { stmt: ann.target });
        };
        for src in binding_tuples(&bindings[ann.source]) {
            if universe.fk_image(&ann.fk, src) != Some(*target) {
                return Err(InstantiateError::FkViolation {
                    fk: ann.fk.clone(),
                    src: universe.tuple_name(src),
                });
            }
        }
    }

    let mut ops: Vec<Operation> = Vec::new();
    let mut units: Vec<Range<usize>> = Vec::new();
    let mut chunks: Vec<(usize, usize)> = Vec::new();
    let mut read: HashSet<TupleId> = HashSet::new();
    let mut written: HashSet<TupleId> = HashSet::new();

    for occ in &ltp.statements {
        let stmt = &occ.statement;
        let pos = occ.position;
        let relation = index
            .id(&stmt.relation)
            .ok_or(InstantiateError::UnknownRelation)?;
        let full_mask = index.full_mask(relation);
        let set_mask = |set: &Option<crate::workload::AttrSet>| -> u64 {
            set.as_ref()
                .map(|s| index.attr_mask(relation, s.iter()))
                .unwrap_or(0)
        };
        let obs_mask = set_mask(&stmt.obs_set);
        let mod_mask = set_mask(&stmt.mod_set);
        let pred_mask = set_mask(&stmt.pred_set);

        let unit_start = ops.len();
        let check_tuple = |t: TupleId| -> Result<(), InstantiateError> {
            if t.relation != relation {
                return Err(InstantiateError::RelationMismatch {
                    stmt: pos,
                    expected: stmt.relation.clone(),
                    got: index.name(t.relation).to_string(),
                });
            }
            Ok(())
        };
        let push =
            |kind: OpKind, tuple: Option<TupleId>, attr_mask: u64, ops: &mut Vec<Operation>| {
                ops.push(Operation {
                    kind,
                    tuple,
                    relation,
                    stmt: Some(pos),
                    attr_mask,
                    full_mask,
                });
            };
        let write = |t: TupleId,
                     kind: OpKind,
                     mask: u64,
                     ops: &mut Vec<Operation>,
                     written: &mut HashSet<TupleId>|
         -> Result<(), InstantiateError> {
            if !written.insert(t) {
                return Err(InstantiateError::DuplicateWrite {
                    tuple: universe.tuple_name(t),
                });
            }
            push(kind, Some(t), mask, ops);
            Ok(())
        };

        match stmt.kind {
            StatementKind::Insert => {
                let t = single(&bindings[pos], pos)?;
                check_tuple(t)?;
                write(t, OpKind::Insert, full_mask, &mut ops, &mut written)?;
            }
            StatementKind::KeyDelete => {
                let t = single(&bindings[pos], pos)?;
                check_tuple(t)?;
                write(t, OpKind::Delete, full_mask, &mut ops, &mut written)?;
            }
            StatementKind::KeySelect => {
                let t = single(&bindings[pos], pos)?;
                check_tuple(t)?;
                if read.insert(t) {
                    push(OpKind::Read, Some(t), obs_mask, &mut ops);
                }
            }
            StatementKind::KeyUpdate => {
                let t = single(&bindings[pos], pos)?;
                check_tuple(t)?;
                if read.insert(t) {
                    push(OpKind::Read, Some(t), obs_mask, &mut ops);
                }
                write(t, OpKind::Write, mod_mask, &mut ops, &mut written)?;
            }
            StatementKind::PredSelect => {
                push(OpKind::PredRead, None, pred_mask, &mut ops);
                for t in binding_tuples(&bindings[pos]) {
                    check_tuple(t)?;
                    if read.insert(t) {
                        push(OpKind::Read, Some(t), obs_mask, &mut ops);
                    }
                }
            }
            StatementKind::PredUpdate => {
                push(OpKind::PredRead, None, pred_mask, &mut ops);
                for t in binding_tuples(&bindings[pos]) {
                    check_tuple(t)?;
                    if read.insert(t) {
                        push(OpKind::Read, Some(t), obs_mask, &mut ops);
                    }
                    write(t, OpKind::Write, mod_mask, &mut ops, &mut written)?;
                }
            }
            StatementKind::PredDelete => {
                push(OpKind::PredRead, None, pred_mask, &mut ops);
                for t in binding_tuples(&bindings[pos]) {
                    check_tuple(t)?;
                    write(t, OpKind::Delete, full_mask, &mut ops, &mut written)?;
                }
            }
        }
        let unit = unit_start..ops.len();
        if unit.len() >= 2 {
            chunks.push((unit.start, unit.end - 1));
        }
        units.push(unit);
    }

    let commit_at = ops.len();
    ops.push(Operation {
        kind: OpKind::Commit,
        tuple: None,
        relation: u32::MAX,
        stmt: None,
        attr_mask: 0,
        full_mask: 0,
    });
    units.push(commit_at..commit_at + 1);

    Ok(Transaction {
        id,
        ltp: Arc::clone(ltp),
        ops,
        units,
        chunks,
    })
}

fn single(binding: &Binding, stmt: usize) -> Result<TupleId, InstantiateError> {
    match binding {
        Binding::Tuple(t) => Ok(*t),
        Binding::Tuples(_) => Err(InstantiateError::BindingShape { stmt }),
    }
}

fn binding_tuples(binding: &Binding) -> Vec<TupleId> {
    match binding {
        Binding::Tuple(t) => vec![*t],
        Binding::Tuples(ts) => ts.clone(),
    }
}
