//! The workload description language.
//!
//! A workload file declares a schema block and any number of programs:
//!
//! ```text
//! schema {
//!   relation Buyer(id, calls) key(id)
//!   relation Bids(buyerId, bid) key(buyerId)
//!   fk f1: Bids(buyerId) -> Buyer(id)
//! }
//!
//! program PlaceBid {
//!   q3: key_update Buyer read {calls} write {calls}
//!   q4: key_select Bids read {bid}
//!   branch {
//!     q5: key_update Bids read {} write {bid}
//!   }
//!   q6: insert Log
//!   constraint q3 = f1(q4)
//! }
//! ```
//!
//! Statement clauses are `pred`, `read`, and `write`; an absent clause is an
//! undefined set, `{}` is the defined empty set. Inserts and deletes may
//! omit `write`, which then defaults to all attributes of the relation.
//! `loop { ... }` marks unbounded iteration, `branch { ... }` with an
//! optional `else { ... }` marks conditionals, and `constraint qj = f(qi)`
//! records a foreign-key annotation. `#` starts a line comment.
//!
//! Emission is canonical (two-space indent, sorted attribute sets, implied
//! `write` clauses omitted) and parsing an emitted workload reproduces it
//! structurally.

mod emit;
mod lexer;
mod parser;

use std::fmt;

pub use emit::emit_workload;
pub use parser::parse_workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    pub(crate) fn merge(self, other: SourceSpan) -> SourceSpan {
        SourceSpan {
            line: self.line,
            col: self.col,
            end_line: other.end_line,
            end_col: other.end_col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Option<SourceSpan>,
    /// Stable rule identifier, e.g. "syntax" or a validation rule name.
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(span) => write!(f, "{span}: [{}] {}", self.rule, self.message),
            None => write!(f, "[{}] {}", self.rule, self.message),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{auction, smallbank, tpcc};
    use crate::workload::{validate_workload, StatementKind};

    #[test]
    fn empty_input_is_an_empty_workload() {
        let (schema, programs) = parse_workload("", None).unwrap();
        assert!(schema.relations.is_empty());
        assert!(programs.is_empty());
    }

    #[test]
    fn auction_round_trips_through_text() {
        let (schema, programs) = auction();
        let text = emit_workload(&schema, &programs);
        let (schema2, programs2) = parse_workload(&text, None).unwrap();
        assert_eq!(schema, schema2);
        assert_eq!(programs, programs2);
    }

    #[test]
    fn smallbank_and_tpcc_round_trip_through_text() {
        for (schema, programs) in [smallbank(), tpcc()] {
            let text = emit_workload(&schema, &programs);
            let (schema2, programs2) = parse_workload(&text, None).unwrap();
            assert_eq!(schema, schema2);
            assert_eq!(programs, programs2);
        }
    }

    #[test]
    fn empty_workload_emits_header_only() {
        let text = emit_workload(&Default::default(), &[]);
        assert_eq!(text, "schema {\n}\n");
        assert!(parse_workload(&text, None).unwrap().1.is_empty());
    }

    #[test]
    fn statement_clauses_distinguish_absent_from_empty() {
        let text = "\
schema {
  relation R(a, b) key(a)
}

program P {
  q1: key_select R read {}
  q2: pred_select R pred {} read {a}
}
";
        let (_, programs) = parse_workload(text, None).unwrap();
        let stmts = programs[0].statements();
        assert_eq!(stmts[0].obs_set.as_ref().unwrap().len(), 0);
        assert_eq!(stmts[0].pred_set, None);
        assert_eq!(stmts[1].pred_set.as_ref().unwrap().len(), 0);
    }

    #[test]
    fn insert_write_clause_defaults_to_all_attributes() {
        let text = "\
schema {
  relation R(a, b) key(a)
}

program P {
  q1: insert R
  q2: key_delete R
}
";
        let (schema, programs) = parse_workload(text, None).unwrap();
        for q in programs[0].statements() {
            assert_eq!(q.mod_set, Some(schema.attr_set("R")));
        }
    }

    #[test]
    fn validation_failures_surface_as_diagnostics_with_spans() {
        let text = "\
schema {
  relation Bids(buyerId, bid) key(buyerId)
}

program P {
  q: key_update Bids read {} write {}
}
";
        let err = parse_workload(text, Some("bad.workload")).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].rule, "kind-constraint");
        let span = err[0].span.expect("span for statement");
        assert_eq!(span.line, 6);
    }

    #[test]
    fn syntax_errors_carry_spans() {
        let err = parse_workload("program { }", None).unwrap_err();
        assert_eq!(err[0].rule, "syntax");
        assert_eq!(err[0].span.unwrap().line, 1);
    }

    #[test]
    fn branch_with_else_parses_to_two_arms() {
        let text = "\
schema {
  relation R(a) key(a)
}

program P {
  branch {
    q1: key_select R read {a}
  } else {
    q2: key_select R read {a}
  }
  loop {
    q3: key_select R read {}
  }
}
";
        let (schema, programs) = parse_workload(text, None).unwrap();
        assert!(validate_workload(&schema, &programs).is_empty());
        let stmts = programs[0].statements();
        assert_eq!(stmts.len(), 3);
        assert_eq!(stmts[0].kind, StatementKind::KeySelect);
        // Canonical emission reproduces the structure.
        let text2 = emit_workload(&schema, &programs);
        let (_, programs2) = parse_workload(&text2, None).unwrap();
        assert_eq!(programs, programs2);
    }
}
