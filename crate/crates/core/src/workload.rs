//! Schemas, statements, and basic transaction programs (BTPs).
//!
//! A statement abstracts one SQL operation down to the information the
//! robustness analysis needs: its kind (insert, key- or predicate-based
//! select/update/delete), the relation it touches, and which attributes it
//! uses in predicates, observes, and modifies. An attribute set can be
//! *undefined* (not applicable to the statement kind, e.g. the modified set
//! of a select), which is distinct from being defined but empty.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

pub type AttrSet = BTreeSet<String>;

/// Convenience constructor for attribute sets.
pub fn attrs<I, S>(names: I) -> AttrSet
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    names.into_iter().map(Into::into).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StatementKind {
    Insert,
    KeySelect,
    PredSelect,
    KeyUpdate,
    PredUpdate,
    KeyDelete,
    PredDelete,
}

impl StatementKind {
    pub const ALL: [StatementKind; 7] = [
        StatementKind::Insert,
        StatementKind::KeySelect,
        StatementKind::PredSelect,
        StatementKind::KeyUpdate,
        StatementKind::PredUpdate,
        StatementKind::KeyDelete,
        StatementKind::PredDelete,
    ];

    /// Key-based statements access exactly one tuple, identified by its key.
    /// Inserts count as key-based: the inserted tuple is fully determined.
    pub fn is_key_based(self) -> bool {
        matches!(
            self,
            StatementKind::Insert
                | StatementKind::KeySelect
                | StatementKind::KeyUpdate
                | StatementKind::KeyDelete
        )
    }

    pub fn is_predicate_based(self) -> bool {
        !self.is_key_based()
    }

    /// Keyword used in the workload DSL.
    pub fn keyword(self) -> &'static str {
        match self {
            StatementKind::Insert => "insert",
            StatementKind::KeySelect => "key_select",
            StatementKind::PredSelect => "pred_select",
            StatementKind::KeyUpdate => "key_update",
            StatementKind::PredUpdate => "pred_update",
            StatementKind::KeyDelete => "key_delete",
            StatementKind::PredDelete => "pred_delete",
        }
    }

    pub fn from_keyword(word: &str) -> Option<StatementKind> {
        StatementKind::ALL.into_iter().find(|k| k.keyword() == word)
    }
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    /// Declaration order is preserved; it matters for positional inserts in
    /// the SQL front-end and for canonical emission.
    pub attributes: Vec<String>,
    /// Primary key, a non-empty subset of `attributes`.
    pub key: Vec<String>,
}

impl RelationDecl {
    pub fn new<S: Into<String>>(name: S, attributes: &[&str], key: &[&str]) -> RelationDecl {
        RelationDecl {
            name: name.into(),
            attributes: attributes.iter().map(|a| a.to_string()).collect(),
            key: key.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn attr_set(&self) -> AttrSet {
        self.attributes.iter().cloned().collect()
    }

    pub fn has_attr(&self, name: &str) -> bool {
        self.attributes.iter().any(|a| a == name)
    }
}

/// A foreign key `name: from_relation(from_attrs) -> to_relation(to_attrs)`.
/// The referenced attributes must form the primary key of the target
/// relation, so the key maps every source tuple to exactly one target tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKeyDecl {
    pub name: String,
    pub from_relation: String,
    pub from_attrs: Vec<String>,
    pub to_relation: String,
    pub to_attrs: Vec<String>,
}

impl ForeignKeyDecl {
    pub fn new<S: Into<String>>(
        name: S,
        from_relation: &str,
        from_attrs: &[&str],
        to_relation: &str,
        to_attrs: &[&str],
    ) -> ForeignKeyDecl {
        ForeignKeyDecl {
            name: name.into(),
            from_relation: from_relation.to_string(),
            from_attrs: from_attrs.iter().map(|a| a.to_string()).collect(),
            to_relation: to_relation.to_string(),
            to_attrs: to_attrs.iter().map(|a| a.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    pub relations: Vec<RelationDecl>,
    pub foreign_keys: Vec<ForeignKeyDecl>,
}

impl Schema {
    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn foreign_key(&self, name: &str) -> Option<&ForeignKeyDecl> {
        self.foreign_keys.iter().find(|f| f.name == name)
    }

    /// All attributes of a relation, or an empty set if it is undeclared.
    pub fn attr_set(&self, relation: &str) -> AttrSet {
        self.relation(relation)
            .map(|r| r.attr_set())
            .unwrap_or_default()
    }
}

/// One abstract database statement.
///
/// `pred_set`, `obs_set`, and `mod_set` are the attributes used in the
/// statement's selection predicate, observed by it, and modified by it.
/// `None` means the set is undefined for this statement kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub label: String,
    pub kind: StatementKind,
    pub relation: String,
    pub pred_set: Option<AttrSet>,
    pub obs_set: Option<AttrSet>,
    pub mod_set: Option<AttrSet>,
}

impl Statement {
    pub fn new<S: Into<String>, R: Into<String>>(
        label: S,
        kind: StatementKind,
        relation: R,
    ) -> Statement {
        Statement {
            label: label.into(),
            kind,
            relation: relation.into(),
            pred_set: None,
            obs_set: None,
            mod_set: None,
        }
    }

    pub fn pred(mut self, set: &[&str]) -> Statement {
        self.pred_set = Some(attrs(set.iter().copied()));
        self
    }

    pub fn obs(mut self, set: &[&str]) -> Statement {
        self.obs_set = Some(attrs(set.iter().copied()));
        self
    }

    pub fn mods(mut self, set: &[&str]) -> Statement {
        self.mod_set = Some(attrs(set.iter().copied()));
        self
    }

    pub fn mods_set(mut self, set: AttrSet) -> Statement {
        self.mod_set = Some(set);
        self
    }
}

/// Program syntax: a statement, a sequence, a loop (any finite number of
/// iterations), a two-way branch, or an optional block (branch against the
/// empty program).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramNode {
    Stmt(Statement),
    Seq(Vec<ProgramNode>),
    Loop(Box<ProgramNode>),
    Branch(Box<ProgramNode>, Box<ProgramNode>),
    Optional(Box<ProgramNode>),
}

impl ProgramNode {
    /// All statements in syntactic order.
    pub fn statements(&self) -> Vec<&Statement> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Statement>) {
        match self {
            ProgramNode::Stmt(q) => out.push(q),
            ProgramNode::Seq(children) => {
                for c in children {
                    c.collect(out);
                }
            }
            ProgramNode::Loop(c) | ProgramNode::Optional(c) => c.collect(out),
            ProgramNode::Branch(l, r) => {
                l.collect(out);
                r.collect(out);
            }
        }
    }
}

/// A foreign-key annotation `target = fk(source)` on a program: every tuple
/// accessed by the source statement maps under the foreign key to the single
/// tuple accessed by the (key-based) target statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FkAnnotation {
    pub target: String,
    pub fk: String,
    pub source: String,
}

impl FkAnnotation {
    pub fn new(target: &str, fk: &str, source: &str) -> FkAnnotation {
        FkAnnotation {
            target: target.to_string(),
            fk: fk.to_string(),
            source: source.to_string(),
        }
    }
}

/// A basic transaction program: a name, a program tree, and the foreign-key
/// annotations constraining its instantiations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Btp {
    pub name: String,
    pub body: ProgramNode,
    pub fk_annotations: Vec<FkAnnotation>,
}

impl Btp {
    pub fn new<S: Into<String>>(name: S, body: ProgramNode) -> Btp {
        Btp {
            name: name.into(),
            body,
            fk_annotations: Vec::new(),
        }
    }

    pub fn with_annotations(mut self, fk_annotations: Vec<FkAnnotation>) -> Btp {
        self.fk_annotations = fk_annotations;
        self
    }

    pub fn statements(&self) -> Vec<&Statement> {
        self.body.statements()
    }

    pub fn statement(&self, label: &str) -> Option<&Statement> {
        self.statements().into_iter().find(|q| q.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Dependencies require a common attribute.
    Attribute,
    /// Operations over the same tuple always conflict: every defined
    /// attribute set widens to the full attribute set of the relation.
    Tuple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Cycle search for a non-counterflow edge combined with an adjacent or
    /// ordered counterflow pair.
    Type2,
    /// Baseline: any cycle through a counterflow edge.
    Type1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnalysisSettings {
    pub granularity: Granularity,
    pub use_fk: bool,
    pub method: Method,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            granularity: Granularity::Attribute,
            use_fk: true,
            method: Method::Type2,
        }
    }
}

impl AnalysisSettings {
    pub fn new(granularity: Granularity, use_fk: bool, method: Method) -> Self {
        AnalysisSettings {
            granularity,
            use_fk,
            method,
        }
    }

    /// Short human-readable name, e.g. "attr dep + FK".
    pub fn label(&self) -> String {
        let g = match self.granularity {
            Granularity::Attribute => "attr dep",
            Granularity::Tuple => "tpl dep",
        };
        if self.use_fk {
            format!("{g} + FK")
        } else {
            g.to_string()
        }
    }

    /// The four granularity/foreign-key combinations, with the method fixed.
    pub fn all_four(method: Method) -> [AnalysisSettings; 4] {
        [
            AnalysisSettings::new(Granularity::Tuple, false, method),
            AnalysisSettings::new(Granularity::Attribute, false, method),
            AnalysisSettings::new(Granularity::Tuple, true, method),
            AnalysisSettings::new(Granularity::Attribute, true, method),
        ]
    }
}

/// Per-kind constraints on which attribute sets must be defined, and how.
/// Returns (pred, obs, mod) where each entry describes the requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetRule {
    Undefined,
    /// Defined, possibly empty.
    Defined,
    /// Defined and non-empty.
    NonEmpty,
    /// Defined and equal to all attributes of the relation.
    FullAttrs,
}

pub fn kind_rules(kind: StatementKind) -> (SetRule, SetRule, SetRule) {
    use SetRule::*;
    use StatementKind::*;
    // (pred, obs, mod)
    match kind {
        Insert => (Undefined, Undefined, FullAttrs),
        KeyDelete => (Undefined, Undefined, FullAttrs),
        PredDelete => (Defined, Undefined, FullAttrs),
        KeySelect => (Undefined, Defined, Undefined),
        PredSelect => (Defined, Defined, Undefined),
        KeyUpdate => (Undefined, Defined, NonEmpty),
        PredUpdate => (Defined, Defined, NonEmpty),
    }
}

/// One problem found by [`validate_workload`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Program name, when the issue is inside a program.
    pub program: Option<String>,
    /// Statement label or annotation target, when applicable.
    pub label: Option<String>,
    /// Stable rule identifier, e.g. "kind-constraint".
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.program, &self.label) {
            (Some(p), Some(l)) => write!(f, "[{}] {}/{}: {}", self.rule, p, l, self.message),
            (Some(p), None) => write!(f, "[{}] {}: {}", self.rule, p, self.message),
            (None, Some(l)) => write!(f, "[{}] {}: {}", self.rule, l, self.message),
            (None, None) => write!(f, "[{}] {}", self.rule, self.message),
        }
    }
}

fn issue(
    program: Option<&str>,
    label: Option<&str>,
    rule: &'static str,
    message: String,
) -> ValidationIssue {
    ValidationIssue {
        program: program.map(str::to_string),
        label: label.map(str::to_string),
        rule,
        message,
    }
}

/// Checks a workload against the well-formedness rules and reports every
/// violation found; an empty report means the workload is valid. Validation
/// never stops at the first error.
pub fn validate_workload(schema: &Schema, programs: &[Btp]) -> Vec<ValidationIssue> {
    let mut report = Vec::new();
    validate_schema(schema, &mut report);

    let mut names = HashSet::new();
    for btp in programs {
        if !names.insert(btp.name.as_str()) {
            report.push(issue(
                Some(&btp.name),
                None,
                "duplicate-program",
                "program name declared more than once".into(),
            ));
        }
        validate_program(schema, btp, &mut report);
    }
    report
}

fn validate_schema(schema: &Schema, report: &mut Vec<ValidationIssue>) {
    let mut rel_names = HashSet::new();
    for rel in &schema.relations {
        if !rel_names.insert(rel.name.as_str()) {
            report.push(issue(
                None,
                Some(&rel.name),
                "duplicate-relation",
                "relation name declared more than once".into(),
            ));
        }
        let mut attr_names = HashSet::new();
        for a in &rel.attributes {
            if !attr_names.insert(a.as_str()) {
                report.push(issue(
                    None,
                    Some(&rel.name),
                    "duplicate-attribute",
                    format!("attribute {a} declared more than once"),
                ));
            }
        }
        if rel.key.is_empty() {
            report.push(issue(
                None,
                Some(&rel.name),
                "empty-key",
                "relation must declare at least one key attribute".into(),
            ));
        }
        for k in &rel.key {
            if !rel.has_attr(k) {
                report.push(issue(
                    None,
                    Some(&rel.name),
                    "unknown-key-attribute",
                    format!("key attribute {k} is not an attribute of the relation"),
                ));
            }
        }
    }

    let mut fk_names = HashSet::new();
    for fk in &schema.foreign_keys {
        if !fk_names.insert(fk.name.as_str()) {
            report.push(issue(
                None,
                Some(&fk.name),
                "duplicate-foreign-key",
                "foreign key name declared more than once".into(),
            ));
        }
        let from = schema.relation(&fk.from_relation);
        let to = schema.relation(&fk.to_relation);
        match from {
            None => report.push(issue(
                None,
                Some(&fk.name),
                "unknown-relation",
                format!("domain relation {} is not declared", fk.from_relation),
            )),
            Some(rel) => {
                for a in &fk.from_attrs {
                    if !rel.has_attr(a) {
                        report.push(issue(
                            None,
                            Some(&fk.name),
                            "unknown-attribute",
                            format!("{a} is not an attribute of {}", rel.name),
                        ));
                    }
                }
            }
        }
        match to {
            None => report.push(issue(
                None,
                Some(&fk.name),
                "unknown-relation",
                format!("range relation {} is not declared", fk.to_relation),
            )),
            Some(rel) => {
                if fk.to_attrs != rel.key {
                    report.push(issue(
                        None,
                        Some(&fk.name),
                        "fk-range-not-key",
                        format!(
                            "referenced attributes must be the primary key of {}",
                            rel.name
                        ),
                    ));
                }
            }
        }
        if fk.from_attrs.len() != fk.to_attrs.len() {
            report.push(issue(
                None,
                Some(&fk.name),
                "fk-arity-mismatch",
                "domain and range attribute lists differ in length".into(),
            ));
        }
    }
}

fn validate_program(schema: &Schema, btp: &Btp, report: &mut Vec<ValidationIssue>) {
    let statements = btp.statements();
    let mut labels: HashMap<&str, &Statement> = HashMap::new();
    for q in &statements {
        if labels.insert(q.label.as_str(), q).is_some() {
            report.push(issue(
                Some(&btp.name),
                Some(&q.label),
                "duplicate-label",
                "statement label used more than once in the program".into(),
            ));
        }
        validate_statement(schema, btp, q, report);
    }

    for ann in &btp.fk_annotations {
        let Some(fk) = schema.foreign_key(&ann.fk) else {
            report.push(issue(
                Some(&btp.name),
                Some(&ann.target),
                "unknown-foreign-key",
                format!("constraint references undeclared foreign key {}", ann.fk),
            ));
            continue;
        };
        let source = labels.get(ann.source.as_str());
        let target = labels.get(ann.target.as_str());
        match source {
            None => report.push(issue(
                Some(&btp.name),
                Some(&ann.source),
                "unknown-label",
                format!("constraint source {} is not a statement label", ann.source),
            )),
            Some(q) => {
                if q.relation != fk.from_relation {
                    report.push(issue(
                        Some(&btp.name),
                        Some(&ann.source),
                        "fk-domain-mismatch",
                        format!(
                            "constraint source must be over {}, found {}",
                            fk.from_relation, q.relation
                        ),
                    ));
                }
            }
        }
        match target {
            None => report.push(issue(
                Some(&btp.name),
                Some(&ann.target),
                "unknown-label",
                format!("constraint target {} is not a statement label", ann.target),
            )),
            Some(q) => {
                if q.relation != fk.to_relation {
                    report.push(issue(
                        Some(&btp.name),
                        Some(&ann.target),
                        "fk-range-mismatch",
                        format!(
                            "constraint target must be over {}, found {}",
                            fk.to_relation, q.relation
                        ),
                    ));
                }
                if !q.kind.is_key_based() {
                    report.push(issue(
                        Some(&btp.name),
                        Some(&ann.target),
                        "fk-target-not-key-based",
                        "constraint target must be a key-based statement".into(),
                    ));
                }
            }
        }
    }
}

fn validate_statement(
    schema: &Schema,
    btp: &Btp,
    q: &Statement,
    report: &mut Vec<ValidationIssue>,
) {
    let Some(rel) = schema.relation(&q.relation) else {
        report.push(issue(
            Some(&btp.name),
            Some(&q.label),
            "unknown-relation",
            format!("statement is over undeclared relation {}", q.relation),
        ));
        return;
    };
    let full = rel.attr_set();
    let (pred_rule, obs_rule, mod_rule) = kind_rules(q.kind);
    check_set(btp, q, "pred", &q.pred_set, pred_rule, &full, report);
    check_set(btp, q, "read", &q.obs_set, obs_rule, &full, report);
    check_set(btp, q, "write", &q.mod_set, mod_rule, &full, report);
}

fn check_set(
    btp: &Btp,
    q: &Statement,
    which: &str,
    set: &Option<AttrSet>,
    rule: SetRule,
    full: &AttrSet,
    report: &mut Vec<ValidationIssue>,
) {
    let mut push = |message: String| {
        report.push(issue(
            Some(&btp.name),
            Some(&q.label),
            "kind-constraint",
            message,
        ));
    };
    match (rule, set) {
        (SetRule::Undefined, Some(_)) => {
            push(format!("{which} set must be undefined for {}", q.kind))
        }
        (SetRule::Undefined, None) => {}
        (_, None) => push(format!("{which} set must be defined for {}", q.kind)),
        (SetRule::Defined, Some(s)) => check_subset(s, full, which, &mut push),
        (SetRule::NonEmpty, Some(s)) => {
            if s.is_empty() {
                push(format!("{which} set must be non-empty for {}", q.kind));
            }
            check_subset(s, full, which, &mut push);
        }
        (SetRule::FullAttrs, Some(s)) => {
            if s != full {
                push(format!(
                    "{which} set must equal all attributes of {} for {}",
                    q.relation, q.kind
                ));
            }
        }
    }
}

fn check_subset(set: &AttrSet, full: &AttrSet, which: &str, push: &mut impl FnMut(String)) {
    for a in set {
        if !full.contains(a) {
            push(format!("{which} set mentions undeclared attribute {a}"));
        }
    }
}

/// The statement's attribute sets as seen by the analysis at the given
/// granularity: at tuple granularity every defined set (including a defined
/// but empty one) widens to the full attribute set of the statement's
/// relation, while undefined sets stay undefined.
pub fn effective_sets(
    stmt: &Statement,
    schema: &Schema,
    granularity: Granularity,
) -> (Option<AttrSet>, Option<AttrSet>, Option<AttrSet>) {
    let widen = |set: &Option<AttrSet>| -> Option<AttrSet> {
        match granularity {
            Granularity::Attribute => set.clone(),
            Granularity::Tuple => set.as_ref().map(|_| schema.attr_set(&stmt.relation)),
        }
    };
    (
        widen(&stmt.pred_set),
        widen(&stmt.obs_set),
        widen(&stmt.mod_set),
    )
}
