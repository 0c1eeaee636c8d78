use std::collections::HashMap;

use super::lexer::{lex, Token};
use super::{Diagnostic, SourceSpan};
use crate::workload::{
    validate_workload, AttrSet, Btp, FkAnnotation, ForeignKeyDecl, ProgramNode, RelationDecl,
    Schema, Statement, StatementKind,
};

struct Parser {
    tokens: Vec<(Token, SourceSpan)>,
    at: usize,
    /// Spans for validation-issue mapping: (program, label) -> span.
    label_spans: HashMap<(String, String), SourceSpan>,
    name_spans: HashMap<String, SourceSpan>,
}

type PResult<T> = Result<T, Diagnostic>;

fn syntax(span: Option<SourceSpan>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        span,
        rule: "syntax".into(),
        message: message.into(),
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|(t, _)| t)
    }

    fn peek_span(&self) -> Option<SourceSpan> {
        self.tokens
            .get(self.at)
            .map(|&(_, s)| s)
            .or_else(|| self.tokens.last().map(|&(_, s)| s))
    }

    fn next(&mut self, expected: &str) -> PResult<(Token, SourceSpan)> {
        let item = self.tokens.get(self.at).cloned().ok_or_else(|| {
            syntax(
                self.peek_span(),
                format!("expected {expected}, found end of input"),
            )
        })?;
        self.at += 1;
        Ok(item)
    }

    fn expect(&mut self, token: Token) -> PResult<SourceSpan> {
        let (found, span) = self.next(&token.describe())?;
        if found == token {
            Ok(span)
        } else {
            Err(syntax(
                Some(span),
                format!("expected {}, found {}", token.describe(), found.describe()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        let (token, span) = self.next(what)?;
        match token {
            Token::Ident(name) => Ok((name, span)),
            other => Err(syntax(
                Some(span),
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn keyword(&mut self, word: &str) -> PResult<SourceSpan> {
        let (name, span) = self.ident(&format!("`{word}`"))?;
        if name == word {
            Ok(span)
        } else {
            Err(syntax(
                Some(span),
                format!("expected `{word}`, found `{name}`"),
            ))
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token::Ident(w)) if w == word)
    }

    /// `( a, b, ... )`, possibly empty.
    fn paren_list(&mut self) -> PResult<Vec<String>> {
        self.expect(Token::LParen)?;
        let mut items = Vec::new();
        if self.peek() == Some(&Token::RParen) {
            self.at += 1;
            return Ok(items);
        }
        loop {
            items.push(self.ident("attribute name")?.0);
            match self.next("`,` or `)`")? {
                (Token::Comma, _) => continue,
                (Token::RParen, _) => break,
                (other, span) => {
                    return Err(syntax(
                        Some(span),
                        format!("expected `,` or `)`, found {}", other.describe()),
                    ))
                }
            }
        }
        Ok(items)
    }

    /// `{ a, b, ... }`, possibly empty.
    fn attr_set(&mut self) -> PResult<AttrSet> {
        self.expect(Token::LBrace)?;
        let mut set = AttrSet::new();
        if self.peek() == Some(&Token::RBrace) {
            self.at += 1;
            return Ok(set);
        }
        loop {
            set.insert(self.ident("attribute name")?.0);
            match self.next("`,` or `}`")? {
                (Token::Comma, _) => continue,
                (Token::RBrace, _) => break,
                (other, span) => {
                    return Err(syntax(
                        Some(span),
                        format!("expected `,` or `}}`, found {}", other.describe()),
                    ))
                }
            }
        }
        Ok(set)
    }

    fn schema_block(&mut self, schema: &mut Schema) -> PResult<()> {
        self.expect(Token::LBrace)?;
        loop {
            if self.peek() == Some(&Token::RBrace) {
                self.at += 1;
                return Ok(());
            }
            if self.at_keyword("relation") {
                self.at += 1;
                let (name, span) = self.ident("relation name")?;
                let attributes = self.paren_list()?;
                self.keyword("key")?;
                let key = self.paren_list()?;
                self.name_spans.insert(name.clone(), span);
                schema.relations.push(RelationDecl {
                    name,
                    attributes,
                    key,
                });
            } else if self.at_keyword("fk") {
                self.at += 1;
                let (name, span) = self.ident("foreign key name")?;
                self.expect(Token::Colon)?;
                let (from_relation, _) = self.ident("relation name")?;
                let from_attrs = self.paren_list()?;
                self.expect(Token::Arrow)?;
                let (to_relation, _) = self.ident("relation name")?;
                let to_attrs = self.paren_list()?;
                self.name_spans.insert(name.clone(), span);
                schema.foreign_keys.push(ForeignKeyDecl {
                    name,
                    from_relation,
                    from_attrs,
                    to_relation,
                    to_attrs,
                });
            } else {
                let span = self.peek_span();
                return Err(syntax(span, "expected `relation`, `fk`, or `}`"));
            }
        }
    }

    fn program(&mut self, schema: &Schema) -> PResult<Btp> {
        let (name, span) = self.ident("program name")?;
        self.name_spans.insert(name.clone(), span);
        self.expect(Token::LBrace)?;
        let mut annotations = Vec::new();
        let body = self.body(schema, &name, &mut annotations)?;
        Ok(Btp {
            name,
            body,
            fk_annotations: annotations,
        })
    }

    /// Items up to the closing brace (consumed).
    fn body(
        &mut self,
        schema: &Schema,
        program: &str,
        annotations: &mut Vec<FkAnnotation>,
    ) -> PResult<ProgramNode> {
        let mut items = Vec::new();
        loop {
            if self.peek() == Some(&Token::RBrace) {
                self.at += 1;
                return Ok(ProgramNode::Seq(items));
            }
            if self.at_keyword("loop") {
                self.at += 1;
                self.expect(Token::LBrace)?;
                let inner = self.body(schema, program, annotations)?;
                items.push(ProgramNode::Loop(Box::new(inner)));
            } else if self.at_keyword("branch") {
                self.at += 1;
                self.expect(Token::LBrace)?;
                let left = self.body(schema, program, annotations)?;
                if self.at_keyword("else") {
                    self.at += 1;
                    self.expect(Token::LBrace)?;
                    let right = self.body(schema, program, annotations)?;
                    items.push(ProgramNode::Branch(Box::new(left), Box::new(right)));
                } else {
                    items.push(ProgramNode::Optional(Box::new(left)));
                }
            } else if self.at_keyword("constraint") {
                self.at += 1;
                let (target, _) = self.ident("statement label")?;
                self.expect(Token::Eq)?;
                let (fk, _) = self.ident("foreign key name")?;
                self.expect(Token::LParen)?;
                let (source, _) = self.ident("statement label")?;
                self.expect(Token::RParen)?;
                annotations.push(FkAnnotation { target, fk, source });
            } else {
                items.push(ProgramNode::Stmt(self.statement(schema, program)?));
            }
        }
    }

    fn statement(&mut self, schema: &Schema, program: &str) -> PResult<Statement> {
        let (label, span) = self.ident("statement label")?;
        self.expect(Token::Colon)?;
        let (kind_word, kind_span) = self.ident("statement kind")?;
        let kind = StatementKind::from_keyword(&kind_word).ok_or_else(|| {
            syntax(
                Some(kind_span),
                format!("unknown statement kind `{kind_word}`"),
            )
        })?;
        let (relation, rel_span) = self.ident("relation name")?;
        self.label_spans
            .insert((program.to_string(), label.clone()), span.merge(rel_span));

        let mut stmt = Statement::new(label, kind, relation);
        loop {
            let clause = match self.peek() {
                Some(Token::Ident(w)) if w == "pred" => "pred",
                Some(Token::Ident(w)) if w == "read" => "read",
                Some(Token::Ident(w)) if w == "write" => "write",
                _ => break,
            };
            let (_, clause_span) = self.next("clause")?;
            let set = self.attr_set()?;
            let slot = match clause {
                "pred" => &mut stmt.pred_set,
                "read" => &mut stmt.obs_set,
                _ => &mut stmt.mod_set,
            };
            if slot.replace(set).is_some() {
                return Err(syntax(
                    Some(clause_span),
                    format!("duplicate `{clause}` clause"),
                ));
            }
        }
        // Inserts and deletes modify the whole tuple; the clause may be
        // omitted.
        if stmt.mod_set.is_none()
            && matches!(
                kind,
                StatementKind::Insert | StatementKind::KeyDelete | StatementKind::PredDelete
            )
        {
            stmt.mod_set = Some(schema.attr_set(&stmt.relation));
        }
        Ok(stmt)
    }
}

/// Parses a workload file and validates it. `file` only flavors messages;
/// spans are line/column based.
pub fn parse_workload(
    text: &str,
    file: Option<&str>,
) -> Result<(Schema, Vec<Btp>), Vec<Diagnostic>> {
    let decorate = |mut d: Diagnostic| -> Vec<Diagnostic> {
        if let Some(f) = file {
            d.message = format!("{f}: {}", d.message);
        }
        vec![d]
    };
    let tokens = lex(text).map_err(decorate)?;
    let mut parser = Parser {
        tokens,
        at: 0,
        label_spans: HashMap::new(),
        name_spans: HashMap::new(),
    };
    let mut schema = Schema::default();
    let mut programs = Vec::new();
    let mut seen_schema = false;
    loop {
        match parser.peek() {
            None => break,
            Some(Token::Ident(w)) if w == "schema" => {
                let span = parser.peek_span();
                parser.at += 1;
                if seen_schema {
                    return Err(decorate(syntax(span, "more than one schema block")));
                }
                seen_schema = true;
                parser.schema_block(&mut schema).map_err(decorate)?;
            }
            Some(Token::Ident(w)) if w == "program" => {
                parser.at += 1;
                let program = parser.program(&schema).map_err(decorate)?;
                programs.push(program);
            }
            _ => {
                return Err(decorate(syntax(
                    parser.peek_span(),
                    "expected `schema` or `program`",
                )))
            }
        }
    }

    let issues = validate_workload(&schema, &programs);
    if issues.is_empty() {
        return Ok((schema, programs));
    }
    let diagnostics = issues
        .into_iter()
        .map(|issue| {
            let span = match (&issue.program, &issue.label) {
                (Some(p), Some(l)) => parser.label_spans.get(&(p.clone(), l.clone())).copied(),
                _ => issue
                    .label
                    .as_ref()
                    .and_then(|l| parser.name_spans.get(l).copied()),
            }
            .or_else(|| {
                issue
                    .program
                    .as_ref()
                    .and_then(|p| parser.name_spans.get(p).copied())
            });
            Diagnostic {
                span,
                rule: issue.rule.to_string(),
                message: match file {
                    Some(f) => format!("{f}: {issue}"),
                    None => issue.to_string(),
                },
            }
        })
        .collect();
    Err(diagnostics)
}
