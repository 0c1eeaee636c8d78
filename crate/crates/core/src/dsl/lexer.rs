use super::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token {
    Ident(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    Eq,
    Arrow,
}

impl Token {
    pub(crate) fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("`{s}`"),
            Token::LBrace => "`{`".into(),
            Token::RBrace => "`}`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Colon => "`:`".into(),
            Token::Comma => "`,`".into(),
            Token::Eq => "`=`".into(),
            Token::Arrow => "`->`".into(),
        }
    }
}

pub(crate) fn lex(text: &str) -> Result<Vec<(Token, SourceSpan)>, Diagnostic> {
    let mut tokens = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let start = SourceSpan {
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
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' | '}' | '(' | ')' | ':' | ',' | '=' => {
                chars.next();
                col += 1;
                let token = match c {
                    '{' => Token::LBrace,
                    '}' => Token::RBrace,
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    ':' => Token::Colon,
                    ',' => Token::Comma,
                    _ => Token::Eq,
                };
                tokens.push((token, start));
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    tokens.push((
                        Token::Arrow,
                        SourceSpan {
                            end_col: col,
                            ..start
                        },
                    ));
                } else {
                    return Err(Diagnostic {
                        span: Some(start),
                        rule: "lex".into(),
                        message: "expected `->`".into(),
                    });
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
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
                tokens.push((
                    Token::Ident(word),
                    SourceSpan {
                        end_col: col,
                        ..start
                    },
                ));
            }
            other => {
                return Err(Diagnostic {
                    span: Some(start),
                    rule: "lex".into(),
                    message: format!("unexpected character {other:?}"),
                });
            }
        }
    }
    Ok(tokens)
}
