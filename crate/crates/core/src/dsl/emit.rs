use std::fmt::Write;

use crate::workload::{AttrSet, Btp, ProgramNode, Schema, Statement, StatementKind};

fn write_set(out: &mut String, set: &AttrSet) {
    out.push('{');
    let mut first = true;
    for attr in set {
        if !first {
            out.push_str(", ");
        }
        first = false;
        out.push_str(attr);
    }
    out.push('}');
}

fn write_statement(out: &mut String, indent: usize, q: &Statement, schema: &Schema) {
    let _ = write!(
        out,
        "{:indent$}{}: {} {}",
        "",
        q.label,
        q.kind.keyword(),
        q.relation,
        indent = indent
    );
    if let Some(set) = &q.pred_set {
        out.push_str(" pred ");
        write_set(out, set);
    }
    if let Some(set) = &q.obs_set {
        out.push_str(" read ");
        write_set(out, set);
    }
    if let Some(set) = &q.mod_set {
        // The write clause of inserts and deletes is implied when it covers
        // the whole relation.
        let implied = matches!(
            q.kind,
            StatementKind::Insert | StatementKind::KeyDelete | StatementKind::PredDelete
        ) && *set == schema.attr_set(&q.relation);
        if !implied {
            out.push_str(" write ");
            write_set(out, set);
        }
    }
    out.push('\n');
}

fn write_node(out: &mut String, indent: usize, node: &ProgramNode, schema: &Schema) {
    match node {
        ProgramNode::Stmt(q) => write_statement(out, indent, q, schema),
        ProgramNode::Seq(children) => {
            for c in children {
                write_node(out, indent, c, schema);
            }
        }
        ProgramNode::Loop(child) => {
            let _ = writeln!(out, "{:indent$}loop {{", "", indent = indent);
            write_node(out, indent + 2, child, schema);
            let _ = writeln!(out, "{:indent$}}}", "", indent = indent);
        }
        ProgramNode::Optional(child) => {
            let _ = writeln!(out, "{:indent$}branch {{", "", indent = indent);
            write_node(out, indent + 2, child, schema);
            let _ = writeln!(out, "{:indent$}}}", "", indent = indent);
        }
        ProgramNode::Branch(left, right) => {
            let _ = writeln!(out, "{:indent$}branch {{", "", indent = indent);
            write_node(out, indent + 2, left, schema);
            let _ = writeln!(out, "{:indent$}}} else {{", "", indent = indent);
            write_node(out, indent + 2, right, schema);
            let _ = writeln!(out, "{:indent$}}}", "", indent = indent);
        }
    }
}

/// Canonical text form; parsing it reproduces the workload structurally.
pub fn emit_workload(schema: &Schema, programs: &[Btp]) -> String {
    let mut out = String::new();
    out.push_str("schema {\n");
    for rel in &schema.relations {
        let _ = write!(out, "  relation {}(", rel.name);
        out.push_str(&rel.attributes.join(", "));
        out.push_str(") key(");
        out.push_str(&rel.key.join(", "));
        out.push_str(")\n");
    }
    for fk in &schema.foreign_keys {
        let _ = writeln!(
            out,
            "  fk {}: {}({}) -> {}({})",
            fk.name,
            fk.from_relation,
            fk.from_attrs.join(", "),
            fk.to_relation,
            fk.to_attrs.join(", ")
        );
    }
    out.push_str("}\n");

    for btp in programs {
        let _ = write!(out, "\nprogram {} {{\n", btp.name);
        write_node(&mut out, 2, &btp.body, schema);
        for ann in &btp.fk_annotations {
            let _ = writeln!(
                out,
                "  constraint {} = {}({})",
                ann.target, ann.fk, ann.source
            );
        }
        out.push_str("}\n");
    }
    out
}
