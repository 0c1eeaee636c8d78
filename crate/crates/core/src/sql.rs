//! Translation of a restricted SQL fragment into transaction programs.
//!
//! The fragment covers single-relation SELECT / UPDATE ... RETURNING /
//! INSERT / DELETE statements with `:param` placeholders, plus
//! `IF <cond>: ... [ELSE:] ... ENDIF;` conditionals and
//! `REPEAT ... END REPEAT;` loops:
//!
//! ```text
//! PlaceBid(:B, :V):
//!   UPDATE Buyer SET calls = calls + 1 WHERE id = :B;
//!   SELECT bid INTO :C FROM Bids WHERE buyerId = :B;
//!   IF :C < :V:
//!     UPDATE Bids SET bid = :V WHERE buyerId = :B;
//!   ENDIF;
//!   INSERT INTO Log VALUES (:logId, :B, :V);
//!   COMMIT;
//! ```
//!
//! A statement is key-based when its WHERE clause is a conjunction of
//! equalities binding every primary-key attribute to a parameter or
//! constant; anything else is predicate-based. Joins, subqueries, and
//! aggregates are rejected, never approximated.
//!
//! Alongside the programs, the translation proposes foreign-key constraint
//! candidates inferred from shared parameter bindings: when one statement
//! pins all domain attributes of a declared foreign key to the same
//! parameters another (key-based) statement uses for the key of the range
//! relation, the two statements always touch tuples related by that key.
//! Outputs of key-based statements (`INTO :x`) participate in the chase.
//! Candidates are meant for human review, not silent adoption.

use crate::dsl::{Diagnostic, SourceSpan};
use crate::workload::{AttrSet, Btp, FkAnnotation, ProgramNode, Schema, Statement, StatementKind};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Param(String),
    Number(String),
    Str(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Star,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Param(s) => format!("`:{s}`"),
            Tok::Number(s) | Tok::Str(s) => format!("`{s}`"),
            Tok::Op(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Star => "`*`".into(),
        }
    }

    fn is_kw(&self, word: &str) -> bool {
        matches!(self, Tok::Ident(s) if s.eq_ignore_ascii_case(word))
    }
}

fn lex_sql(text: &str) -> Result<Vec<(Tok, SourceSpan)>, Vec<Diagnostic>> {
    let mut tokens = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let span = SourceSpan {
            line,
            col,
            end_line: line,
            end_col: col + 1,
        };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'-') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                        col += 1;
                    }
                } else {
                    tokens.push((Tok::Op("-"), span));
                }
            }
            ':' => {
                chars.next();
                col += 1;
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if word.is_empty() {
                    tokens.push((Tok::Colon, span));
                } else {
                    tokens.push((Tok::Param(word), span));
                }
            }
            '\'' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('\'') => {
                            col += 1;
                            break;
                        }
                        Some(c) => {
                            col += 1;
                            s.push(c);
                        }
                        None => {
                            return Err(vec![Diagnostic {
                                span: Some(span),
                                rule: "lex".into(),
                                message: "unterminated string literal".into(),
                            }])
                        }
                    }
                }
                tokens.push((Tok::Str(s), span));
            }
            '(' | ')' | ',' | ';' | '*' | '+' | '/' | '=' => {
                chars.next();
                col += 1;
                tokens.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        ';' => Tok::Semi,
                        '*' => Tok::Star,
                        '+' => Tok::Op("+"),
                        '/' => Tok::Op("/"),
                        _ => Tok::Op("="),
                    },
                    span,
                ));
            }
            '<' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('=') => {
                        chars.next();
                        col += 1;
                        tokens.push((Tok::Op("<="), span));
                    }
                    Some('>') => {
                        chars.next();
                        col += 1;
                        tokens.push((Tok::Op("<>"), span));
                    }
                    _ => tokens.push((Tok::Op("<"), span)),
                }
            }
            '>' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    tokens.push((Tok::Op(">="), span));
                } else {
                    tokens.push((Tok::Op(">"), span));
                }
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || c == '.' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                tokens.push((Tok::Number(s), span));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                tokens.push((Tok::Ident(s), span));
            }
            other => {
                return Err(vec![Diagnostic {
                    span: Some(span),
                    rule: "lex".into(),
                    message: format!("unexpected character {other:?}"),
                }])
            }
        }
    }
    Ok(tokens)
}

/// Parameter bindings of one translated statement: attribute -> parameter,
/// from WHERE equalities, insert values, and (for key-based statements)
/// `INTO` outputs.
#[derive(Debug, Clone, Default)]
struct BindingEnv {
    pairs: Vec<(String, String)>,
}

impl BindingEnv {
    fn bind(&mut self, attr: &str, param: &str) {
        self.pairs.push((attr.to_string(), param.to_string()));
    }

    fn param_for(&self, attr: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(a, _)| a == attr)
            .map(|(_, p)| p.as_str())
    }
}

#[derive(Debug)]
struct TranslatedStmt {
    statement: Statement,
    env: BindingEnv,
}

/// One translated program plus its inferred constraint candidates.
#[derive(Debug, Clone)]
pub struct SqlProgram {
    pub btp: Btp,
    pub candidates: Vec<FkAnnotation>,
}

struct SqlParser<'a> {
    tokens: Vec<(Tok, SourceSpan)>,
    at: usize,
    schema: &'a Schema,
    label_counter: usize,
}

type SResult<T> = Result<T, Diagnostic>;

fn err(span: Option<SourceSpan>, rule: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        span,
        rule: rule.into(),
        message: message.into(),
    }
}

const STATEMENT_KEYWORDS: [&str; 8] = [
    "SELECT", "UPDATE", "INSERT", "DELETE", "IF", "REPEAT", "COMMIT", "ELSE",
];

impl<'a> SqlParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|(t, _)| t)
    }

    fn peek_span(&self) -> Option<SourceSpan> {
        self.tokens
            .get(self.at)
            .map(|&(_, s)| s)
            .or_else(|| self.tokens.last().map(|&(_, s)| s))
    }

    fn next(&mut self, expected: &str) -> SResult<(Tok, SourceSpan)> {
        let item = self.tokens.get(self.at).cloned().ok_or_else(|| {
            err(
                self.peek_span(),
                "syntax",
                format!("expected {expected}, found end of input"),
            )
        })?;
        self.at += 1;
        Ok(item)
    }

    fn ident(&mut self, what: &str) -> SResult<(String, SourceSpan)> {
        match self.next(what)? {
            (Tok::Ident(s), span) => Ok((s, span)),
            (other, span) => Err(err(
                Some(span),
                "syntax",
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn expect(&mut self, token: Tok) -> SResult<SourceSpan> {
        match self.next(&token.describe())? {
            (t, span) if t == token => Ok(span),
            (other, span) => Err(err(
                Some(span),
                "syntax",
                format!("expected {}, found {}", token.describe(), other.describe()),
            )),
        }
    }

    fn keyword(&mut self, word: &str) -> SResult<SourceSpan> {
        match self.next(&format!("`{word}`"))? {
            (t, span) if t.is_kw(word) => Ok(span),
            (other, span) => Err(err(
                Some(span),
                "syntax",
                format!("expected `{word}`, found {}", other.describe()),
            )),
        }
    }

    fn at_kw(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| t.is_kw(word))
    }

    fn fresh_label(&mut self) -> String {
        self.label_counter += 1;
        format!("q{}", self.label_counter)
    }

    fn param_list(&mut self) -> SResult<Vec<String>> {
        let mut params = Vec::new();
        loop {
            match self.next("`:param`")? {
                (Tok::Param(p), _) => params.push(p),
                (other, span) => {
                    return Err(err(
                        Some(span),
                        "syntax",
                        format!("expected `:param`, found {}", other.describe()),
                    ))
                }
            }
            if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
            } else {
                return Ok(params);
            }
        }
    }

    fn attr_list(&mut self, what: &str) -> SResult<Vec<(String, SourceSpan)>> {
        let mut attrs = Vec::new();
        loop {
            attrs.push(self.ident(what)?);
            if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
            } else {
                return Ok(attrs);
            }
        }
    }

    /// Parses a program: `Name(:p, ...):` followed by statements.
    fn program(&mut self) -> SResult<(Btp, Vec<TranslatedStmt>)> {
        let (name, _) = self.ident("program name")?;
        self.expect(Tok::LParen)?;
        if self.peek() != Some(&Tok::RParen) {
            self.param_list()?;
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Colon)?;
        let mut translated = Vec::new();
        let body = self.block(&mut translated, &[])?;
        let btp = Btp::new(name, body);
        Ok((btp, translated))
    }

    /// Statements until one of `terminators` (not consumed), a new program
    /// header, or end of input.
    fn block(
        &mut self,
        translated: &mut Vec<TranslatedStmt>,
        terminators: &[&str],
    ) -> SResult<ProgramNode> {
        let mut items = Vec::new();
        loop {
            let Some(token) = self.peek() else {
                return Ok(ProgramNode::Seq(items));
            };
            if let Tok::Ident(word) = token {
                if terminators.iter().any(|t| word.eq_ignore_ascii_case(t)) {
                    return Ok(ProgramNode::Seq(items));
                }
                let is_statement = STATEMENT_KEYWORDS
                    .iter()
                    .any(|k| word.eq_ignore_ascii_case(k));
                if !is_statement {
                    // Next program header.
                    return Ok(ProgramNode::Seq(items));
                }
            } else {
                return Err(err(
                    self.peek_span(),
                    "syntax",
                    format!("expected a statement, found {}", token.describe()),
                ));
            }

            if self.at_kw("COMMIT") {
                self.at += 1;
                self.expect(Tok::Semi)?;
            } else if self.at_kw("IF") {
                self.at += 1;
                // Condition tokens up to the terminating colon are not
                // interpreted: branching is control flow, not data.
                loop {
                    match self.next("`:` ending the condition")? {
                        (Tok::Colon, _) => break,
                        (Tok::Semi, span) => {
                            return Err(err(Some(span), "syntax", "condition must end with `:`"))
                        }
                        _ => {}
                    }
                }
                let then_arm = self.block(translated, &["ELSE", "ENDIF"])?;
                if self.at_kw("ELSE") {
                    self.at += 1;
                    self.expect(Tok::Colon)?;
                    let else_arm = self.block(translated, &["ENDIF"])?;
                    self.keyword("ENDIF")?;
                    self.expect(Tok::Semi)?;
                    items.push(ProgramNode::Branch(Box::new(then_arm), Box::new(else_arm)));
                } else {
                    self.keyword("ENDIF")?;
                    self.expect(Tok::Semi)?;
                    items.push(ProgramNode::Optional(Box::new(then_arm)));
                }
            } else if self.at_kw("REPEAT") {
                self.at += 1;
                let inner = self.block(translated, &["END"])?;
                self.keyword("END")?;
                self.keyword("REPEAT")?;
                self.expect(Tok::Semi)?;
                items.push(ProgramNode::Loop(Box::new(inner)));
            } else {
                let stmt = self.statement(translated)?;
                items.push(ProgramNode::Stmt(stmt));
            }
        }
    }

    fn relation(&mut self) -> SResult<(String, SourceSpan)> {
        let (name, span) = self.ident("relation name")?;
        if self.schema.relation(&name).is_none() {
            return Err(err(
                Some(span),
                "unknown-relation",
                format!("relation {name} is not declared in the schema"),
            ));
        }
        // A join or second relation is out of fragment.
        if let Some(t) = self.peek() {
            if t.is_kw("JOIN") || *t == Tok::Comma || t.is_kw("AS") {
                return Err(err(
                    self.peek_span(),
                    "unsupported",
                    "unsupported syntax: joins and table aliases are out of fragment",
                ));
            }
        }
        Ok((name, span))
    }

    fn statement(&mut self, translated: &mut Vec<TranslatedStmt>) -> SResult<Statement> {
        let stmt = if self.at_kw("SELECT") {
            self.select()?
        } else if self.at_kw("UPDATE") {
            self.update()?
        } else if self.at_kw("INSERT") {
            self.insert()?
        } else if self.at_kw("DELETE") {
            self.delete()?
        } else {
            return Err(err(self.peek_span(), "syntax", "expected a statement"));
        };
        let statement = stmt.statement.clone();
        translated.push(stmt);
        Ok(statement)
    }

    fn select(&mut self) -> SResult<TranslatedStmt> {
        self.keyword("SELECT")?;
        let star = self.peek() == Some(&Tok::Star);
        let select_list = if star {
            self.at += 1;
            Vec::new()
        } else {
            self.attr_list("selected attribute")?
        };
        let outputs = if self.at_kw("INTO") {
            self.at += 1;
            Some(self.param_list()?)
        } else {
            None
        };
        self.keyword("FROM")?;
        let (relation, rel_span) = self.relation()?;
        self.keyword("WHERE")?;
        let cond = self.condition(&relation)?;
        self.expect(Tok::Semi)?;

        let full = self.schema.attr_set(&relation);
        let obs: AttrSet = if star {
            full
        } else {
            self.check_attrs(&relation, &select_list)?
        };
        let key_based = self.is_key_condition(&relation, &cond);
        let label = self.fresh_label();
        let mut env = cond.equality_env();
        let statement = if key_based {
            if let Some(outputs) = &outputs {
                self.zip_outputs(&select_list, outputs, rel_span, &mut env)?;
            }
            Statement {
                label,
                kind: StatementKind::KeySelect,
                relation,
                pred_set: None,
                obs_set: Some(obs),
                mod_set: None,
            }
        } else {
            Statement {
                label,
                kind: StatementKind::PredSelect,
                relation,
                pred_set: Some(cond.attrs.clone()),
                obs_set: Some(obs),
                mod_set: None,
            }
        };
        Ok(TranslatedStmt { statement, env })
    }

    fn update(&mut self) -> SResult<TranslatedStmt> {
        self.keyword("UPDATE")?;
        let (relation, rel_span) = self.relation()?;
        self.keyword("SET")?;
        let mut mods = AttrSet::new();
        let mut expr_attrs = AttrSet::new();
        loop {
            let (attr, span) = self.ident("attribute name")?;
            self.check_attr(&relation, &attr, span)?;
            mods.insert(attr);
            self.expect(Tok::Op("="))?;
            self.expression(&relation, &mut expr_attrs, &[Tok::Comma])?;
            match self.peek() {
                Some(Tok::Comma) => self.at += 1,
                _ => break,
            }
        }
        self.keyword("WHERE")?;
        let cond = self.condition(&relation)?;
        let mut returning: Vec<(String, SourceSpan)> = Vec::new();
        let mut outputs = None;
        if self.at_kw("RETURNING") {
            self.at += 1;
            returning = self.attr_list("returned attribute")?;
            if self.at_kw("INTO") {
                self.at += 1;
                outputs = Some(self.param_list()?);
            }
        }
        self.expect(Tok::Semi)?;

        let mut obs = self.check_attrs(&relation, &returning)?;
        obs.extend(expr_attrs);
        let key_based = self.is_key_condition(&relation, &cond);
        let label = self.fresh_label();
        let mut env = cond.equality_env();
        let statement = if key_based {
            if let Some(outputs) = &outputs {
                self.zip_outputs(&returning, outputs, rel_span, &mut env)?;
            }
            Statement {
                label,
                kind: StatementKind::KeyUpdate,
                relation,
                pred_set: None,
                obs_set: Some(obs),
                mod_set: Some(mods),
            }
        } else {
            Statement {
                label,
                kind: StatementKind::PredUpdate,
                relation,
                pred_set: Some(cond.attrs.clone()),
                obs_set: Some(obs),
                mod_set: Some(mods),
            }
        };
        Ok(TranslatedStmt { statement, env })
    }

    fn insert(&mut self) -> SResult<TranslatedStmt> {
        self.keyword("INSERT")?;
        self.keyword("INTO")?;
        let (relation, rel_span) = self.relation()?;
        let columns = if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            let cols = self.attr_list("column name")?;
            self.expect(Tok::RParen)?;
            self.check_attrs(&relation, &cols)?;
            cols.into_iter().map(|(c, _)| c).collect()
        } else {
            self.schema
                .relation(&relation)
                .map(|r| r.attributes.clone())
                .unwrap_or_default()
        };
        self.keyword("VALUES")?;
        self.expect(Tok::LParen)?;
        let mut env = BindingEnv::default();
        let mut count = 0usize;
        loop {
            // A value that is a bare parameter binds its column.
            let single_param = matches!(
                (self.peek(), self.tokens.get(self.at + 1).map(|(t, _)| t)),
                (Some(Tok::Param(_)), Some(Tok::Comma) | Some(Tok::RParen))
            );
            if single_param {
                if let (Tok::Param(p), _) = self.next("value")? {
                    if let Some(col) = columns.get(count) {
                        env.bind(col, &p);
                    }
                }
            } else {
                self.expression(&relation, &mut AttrSet::new(), &[Tok::Comma])?;
            }
            count += 1;
            match self.next("`,` or `)`")? {
                (Tok::Comma, _) => continue,
                (Tok::RParen, _) => break,
                (other, span) => {
                    return Err(err(
                        Some(span),
                        "syntax",
                        format!("expected `,` or `)`, found {}", other.describe()),
                    ))
                }
            }
        }
        self.expect(Tok::Semi)?;
        if count != columns.len() {
            return Err(err(
                Some(rel_span),
                "arity",
                format!(
                    "insert provides {count} values for {} columns",
                    columns.len()
                ),
            ));
        }
        let statement = Statement {
            label: self.fresh_label(),
            kind: StatementKind::Insert,
            relation: relation.clone(),
            pred_set: None,
            obs_set: None,
            mod_set: Some(self.schema.attr_set(&relation)),
        };
        Ok(TranslatedStmt { statement, env })
    }

    fn delete(&mut self) -> SResult<TranslatedStmt> {
        self.keyword("DELETE")?;
        self.keyword("FROM")?;
        let (relation, _) = self.relation()?;
        self.keyword("WHERE")?;
        let cond = self.condition(&relation)?;
        self.expect(Tok::Semi)?;
        let key_based = self.is_key_condition(&relation, &cond);
        let env = cond.equality_env();
        let statement = Statement {
            label: self.fresh_label(),
            kind: if key_based {
                StatementKind::KeyDelete
            } else {
                StatementKind::PredDelete
            },
            relation: relation.clone(),
            pred_set: (!key_based).then(|| cond.attrs.clone()),
            obs_set: None,
            mod_set: Some(self.schema.attr_set(&relation)),
        };
        Ok(TranslatedStmt { statement, env })
    }

    /// Scans an expression (SET right-hand side or insert value) up to a
    /// top-level delimiter, collecting attribute references and rejecting
    /// identifiers that resolve to nothing.
    fn expression(&mut self, relation: &str, attrs: &mut AttrSet, stop: &[Tok]) -> SResult<()> {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                None => return Ok(()),
                Some(Tok::Semi) if depth == 0 => return Ok(()),
                Some(t) if depth == 0 && stop.contains(t) => return Ok(()),
                Some(Tok::Ident(w)) if depth == 0 && w.eq_ignore_ascii_case("WHERE") => {
                    return Ok(())
                }
                Some(Tok::Ident(w)) if depth == 0 && w.eq_ignore_ascii_case("RETURNING") => {
                    return Ok(())
                }
                _ => {}
            }
            let (token, span) = self.next("expression token")?;
            match token {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    if depth == 0 {
                        self.at -= 1;
                        return Ok(());
                    }
                    depth -= 1;
                }
                Tok::Ident(w) => {
                    if w.eq_ignore_ascii_case("SELECT") {
                        return Err(err(
                            Some(span),
                            "unsupported",
                            "unsupported syntax: subqueries are out of fragment",
                        ));
                    }
                    if self
                        .schema
                        .relation(relation)
                        .is_some_and(|r| r.has_attr(&w))
                    {
                        attrs.insert(w);
                    } else {
                        return Err(err(
                            Some(span),
                            "unresolved",
                            format!("identifier `{w}` is not an attribute of {relation}"),
                        ));
                    }
                }
                _ => {}
            }
        }
    }

    fn condition(&mut self, relation: &str) -> SResult<Condition> {
        let mut cond = Condition::default();
        loop {
            // One comparison: attr <op> value, or any expression shape.
            let simple = matches!(
                (
                    self.peek(),
                    self.tokens.get(self.at + 1).map(|(t, _)| t),
                    self.tokens.get(self.at + 2).map(|(t, _)| t)
                ),
                (
                    Some(Tok::Ident(_)),
                    Some(Tok::Op("=")),
                    Some(Tok::Param(_) | Tok::Number(_) | Tok::Str(_))
                )
            );
            if simple {
                let (attr, span) = self.ident("attribute")?;
                self.check_attr(relation, &attr, span)?;
                self.at += 1; // `=`
                let (value, _) = self.next("value")?;
                cond.attrs.insert(attr.clone());
                if let Tok::Param(p) = value {
                    cond.equalities.push((attr, Some(p)));
                } else {
                    cond.equalities.push((attr, None));
                }
            } else {
                cond.complex = true;
                // Scan the conjunct, collecting attribute references.
                loop {
                    match self.peek() {
                        None | Some(Tok::Semi) => break,
                        Some(Tok::Ident(w))
                            if w.eq_ignore_ascii_case("AND")
                                || w.eq_ignore_ascii_case("RETURNING") =>
                        {
                            break
                        }
                        _ => {}
                    }
                    let (token, span) = self.next("condition token")?;
                    if let Tok::Ident(w) = token {
                        if w.eq_ignore_ascii_case("OR") {
                            continue;
                        }
                        if w.eq_ignore_ascii_case("SELECT") || w.eq_ignore_ascii_case("JOIN") {
                            return Err(err(
                                Some(span),
                                "unsupported",
                                "unsupported syntax in WHERE clause",
                            ));
                        }
                        if self
                            .schema
                            .relation(relation)
                            .is_some_and(|r| r.has_attr(&w))
                        {
                            cond.attrs.insert(w);
                        } else {
                            return Err(err(
                                Some(span),
                                "unresolved",
                                format!("identifier `{w}` is not an attribute of {relation}"),
                            ));
                        }
                    }
                }
            }
            if self.at_kw("AND") {
                self.at += 1;
            } else {
                return Ok(cond);
            }
        }
    }

    fn is_key_condition(&self, relation: &str, cond: &Condition) -> bool {
        if cond.complex {
            return false;
        }
        let Some(rel) = self.schema.relation(relation) else {
            return false;
        };
        rel.key
            .iter()
            .all(|k| cond.equalities.iter().any(|(a, _)| a == k))
    }

    fn check_attr(&self, relation: &str, attr: &str, span: SourceSpan) -> SResult<()> {
        if self
            .schema
            .relation(relation)
            .is_some_and(|r| r.has_attr(attr))
        {
            Ok(())
        } else {
            Err(err(
                Some(span),
                "unknown-attribute",
                format!("{attr} is not an attribute of {relation}"),
            ))
        }
    }

    fn check_attrs(&self, relation: &str, attrs: &[(String, SourceSpan)]) -> SResult<AttrSet> {
        let mut set = AttrSet::new();
        for (attr, span) in attrs {
            self.check_attr(relation, attr, *span)?;
            set.insert(attr.clone());
        }
        Ok(set)
    }

    fn zip_outputs(
        &self,
        attrs: &[(String, SourceSpan)],
        params: &[String],
        span: SourceSpan,
        env: &mut BindingEnv,
    ) -> SResult<()> {
        if attrs.len() != params.len() {
            return Err(err(
                Some(span),
                "arity",
                format!(
                    "{} attributes flow into {} parameters",
                    attrs.len(),
                    params.len()
                ),
            ));
        }
        for ((attr, _), param) in attrs.iter().zip(params) {
            env.bind(attr, param);
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct Condition {
    /// Attributes referenced anywhere in the clause.
    attrs: AttrSet,
    /// Simple `attr = value` conjuncts; the parameter is kept when the
    /// value is one.
    equalities: Vec<(String, Option<String>)>,
    /// Some conjunct is not a simple equality (inequality, OR, arithmetic).
    complex: bool,
}

impl Condition {
    fn equality_env(&self) -> BindingEnv {
        let mut env = BindingEnv::default();
        for (attr, param) in &self.equalities {
            if let Some(p) = param {
                env.bind(attr, p);
            }
        }
        env
    }
}

/// Foreign-key constraint candidates for one program: for every declared
/// key, every statement binding all of its domain attributes to parameters,
/// and every key-based statement binding the range relation's key to the
/// same parameters.
fn infer_candidates(schema: &Schema, stmts: &[TranslatedStmt]) -> Vec<FkAnnotation> {
    let mut out = Vec::new();
    for fk in &schema.foreign_keys {
        for src in stmts {
            if src.statement.relation != fk.from_relation {
                continue;
            }
            let params: Option<Vec<&str>> =
                fk.from_attrs.iter().map(|a| src.env.param_for(a)).collect();
            let Some(params) = params else { continue };
            for dst in stmts {
                if dst.statement.relation != fk.to_relation || !dst.statement.kind.is_key_based() {
                    continue;
                }
                let matches = fk
                    .to_attrs
                    .iter()
                    .zip(&params)
                    .all(|(attr, p)| dst.env.param_for(attr) == Some(p));
                if matches {
                    out.push(FkAnnotation {
                        target: dst.statement.label.clone(),
                        fk: fk.name.clone(),
                        source: src.statement.label.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Translates a file of SQL transaction programs against a schema.
/// Statement labels are `q1, q2, ...` in file order across programs.
/// Inferred constraint candidates are returned per program for review; they
/// are not added to the programs.
pub fn translate_sql_file(text: &str, schema: &Schema) -> Result<Vec<SqlProgram>, Vec<Diagnostic>> {
    let tokens = lex_sql(text)?;
    let mut parser = SqlParser {
        tokens,
        at: 0,
        schema,
        label_counter: 0,
    };
    let mut programs = Vec::new();
    while parser.peek().is_some() {
        let (btp, translated) = parser.program().map_err(|d| vec![d])?;
        let candidates = infer_candidates(schema, &translated);
        programs.push(SqlProgram { btp, candidates });
    }
    Ok(programs)
}

/// Translates a single SQL transaction program.
pub fn sql_to_btp(text: &str, schema: &Schema) -> Result<SqlProgram, Vec<Diagnostic>> {
    let mut programs = translate_sql_file(text, schema)?;
    match programs.len() {
        1 => Ok(programs.remove(0)),
        n => Err(vec![err(
            None,
            "syntax",
            format!("expected exactly one program, found {n}"),
        )]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::auction;
    use crate::workload::StatementKind::*;

    fn schema() -> Schema {
        auction().0
    }

    #[test]
    fn key_update_translation() {
        let sql = "P(:B):\n  UPDATE Buyer SET calls = calls + 1 WHERE id = :B;\n  COMMIT;\n";
        let program = sql_to_btp(sql, &schema()).unwrap();
        let stmts = program.btp.statements();
        assert_eq!(stmts.len(), 1);
        let q = stmts[0];
        assert_eq!(q.kind, KeyUpdate);
        assert_eq!(
            q.obs_set.as_ref().unwrap().iter().collect::<Vec<_>>(),
            ["calls"]
        );
        assert_eq!(
            q.mod_set.as_ref().unwrap().iter().collect::<Vec<_>>(),
            ["calls"]
        );
        assert_eq!(q.pred_set, None);
    }

    #[test]
    fn predicate_select_translation() {
        let sql = "P(:T):\n  SELECT bid FROM Bids WHERE bid >= :T;\n  COMMIT;\n";
        let program = sql_to_btp(sql, &schema()).unwrap();
        let q = &program.btp.statements()[0].clone();
        assert_eq!(q.kind, PredSelect);
        assert_eq!(
            q.pred_set.as_ref().unwrap().iter().collect::<Vec<_>>(),
            ["bid"]
        );
        assert_eq!(
            q.obs_set.as_ref().unwrap().iter().collect::<Vec<_>>(),
            ["bid"]
        );
    }

    #[test]
    fn full_key_equality_is_required_for_key_statements() {
        // Binding a non-key attribute keeps the statement predicate-based.
        let sql = "P(:V):\n  SELECT buyerId FROM Bids WHERE bid = :V;\n";
        let program = sql_to_btp(sql, &schema()).unwrap();
        assert_eq!(program.btp.statements()[0].kind, PredSelect);
    }

    #[test]
    fn joins_are_rejected() {
        let sql = "P():\n  SELECT bid FROM Bids JOIN Buyer WHERE bid = :V;\n";
        let err = sql_to_btp(sql, &schema()).unwrap_err();
        assert_eq!(err[0].rule, "unsupported");
        assert!(err[0].message.contains("unsupported syntax"));
    }

    #[test]
    fn subqueries_are_rejected() {
        let sql = "P():\n  UPDATE Buyer SET calls = (SELECT calls FROM Buyer WHERE id = :B) WHERE id = :B;\n";
        let err = sql_to_btp(sql, &schema()).unwrap_err();
        assert_eq!(err[0].rule, "unsupported");
    }

    #[test]
    fn unresolved_identifiers_are_rejected() {
        let sql = "P():\n  UPDATE Buyer SET calls = callz + 1 WHERE id = :B;\n";
        let err = sql_to_btp(sql, &schema()).unwrap_err();
        assert_eq!(err[0].rule, "unresolved");
    }

    #[test]
    fn control_flow_maps_to_loop_and_branch_nodes() {
        let sql = "\
P(:B, :V):
  REPEAT
    SELECT bid INTO :C FROM Bids WHERE buyerId = :B;
  END REPEAT;
  IF :C < :V:
    UPDATE Bids SET bid = :V WHERE buyerId = :B;
  ELSE:
    UPDATE Buyer SET calls = calls + 1 WHERE id = :B;
  ENDIF;
  COMMIT;
";
        let program = sql_to_btp(sql, &schema()).unwrap();
        match &program.btp.body {
            ProgramNode::Seq(items) => {
                assert!(matches!(items[0], ProgramNode::Loop(_)));
                assert!(matches!(items[1], ProgramNode::Branch(_, _)));
            }
            other => panic!("unexpected body {other:?}"),
        }
    }

    #[test]
    fn shared_parameters_yield_constraint_candidates() {
        let sql = "\
PlaceBid(:B, :V):
  UPDATE Buyer SET calls = calls + 1 WHERE id = :B;
  SELECT bid INTO :C FROM Bids WHERE buyerId = :B;
  IF :C < :V:
    UPDATE Bids SET bid = :V WHERE buyerId = :B;
  ENDIF;
  INSERT INTO Log VALUES (:logId, :B, :V);
  COMMIT;
";
        let program = sql_to_btp(sql, &schema()).unwrap();
        let rendered: Vec<String> = program
            .candidates
            .iter()
            .map(|c| format!("{} = {}({})", c.target, c.fk, c.source))
            .collect();
        assert_eq!(rendered, vec!["q1 = f1(q2)", "q1 = f1(q3)", "q1 = f2(q4)"]);
    }
}
