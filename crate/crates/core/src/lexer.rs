//! Tokenizer shared by the design language and the model-formula parser.

use std::fmt;

use crate::error::{ParseError, Position};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    Int(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Arrow,
    Plus,
    Star,
    Slash,
    Pipe,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Int(n) => write!(f, "integer `{n}`"),
            Token::LBrace => f.write_str("`{`"),
            Token::RBrace => f.write_str("`}`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Colon => f.write_str("`:`"),
            Token::Semi => f.write_str("`;`"),
            Token::Comma => f.write_str("`,`"),
            Token::Arrow => f.write_str("`->`"),
            Token::Plus => f.write_str("`+`"),
            Token::Star => f.write_str("`*`"),
            Token::Slash => f.write_str("`/`"),
            Token::Pipe => f.write_str("`|`"),
            Token::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub token: Token,
    pub pos: Position,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

/// Splits `text` into tokens. `#` starts a comment running to the end of the line.
pub fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    while let Some(&c) = chars.peek() {
        let pos = Position { line, column: col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        if is_ident_start(c) {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !is_ident_continue(c) {
                    break;
                }
                s.push(c);
                chars.next();
                col += 1;
            }
            out.push(Spanned {
                token: Token::Ident(s),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                s.push(c);
                chars.next();
                col += 1;
            }
            let n = s.parse::<u64>().map_err(|_| ParseError::Syntax {
                pos,
                found: format!("integer `{s}`"),
                expected: vec!["an integer that fits in 64 bits".into()],
            })?;
            out.push(Spanned {
                token: Token::Int(n),
                pos,
            });
            continue;
        }
        chars.next();
        col += 1;
        let token = match c {
            '{' => Token::LBrace,
            '}' => Token::RBrace,
            '(' => Token::LParen,
            ')' => Token::RParen,
            ':' => Token::Colon,
            ';' => Token::Semi,
            ',' => Token::Comma,
            '+' => Token::Plus,
            '*' => Token::Star,
            '/' => Token::Slash,
            '|' => Token::Pipe,
            '-' if chars.peek() == Some(&'>') => {
                chars.next();
                col += 1;
                Token::Arrow
            }
            other => {
                return Err(ParseError::Syntax {
                    pos,
                    found: format!("character `{other}`"),
                    expected: vec!["a token".into()],
                })
            }
        };
        out.push(Spanned { token, pos });
    }
    out.push(Spanned {
        token: Token::Eof,
        pos: Position { line, column: col },
    });
    Ok(out)
}

/// Cursor over a token stream.
#[derive(Debug, Clone)]
pub struct Cursor {
    tokens: Vec<Spanned>,
    index: usize,
}

impl Cursor {
    pub fn new(tokens: Vec<Spanned>) -> Self {
        Cursor { tokens, index: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.index].token
    }

    pub fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.index + offset).min(self.tokens.len() - 1);
        &self.tokens[i].token
    }

    pub fn pos(&self) -> Position {
        self.tokens[self.index].pos
    }

    pub fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.index].clone();
        if self.index + 1 < self.tokens.len() {
            self.index += 1;
        }
        t
    }

    pub fn eat(&mut self, token: &Token) -> bool {
        if self.peek() == token {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Token::Ident(s) if s == kw)
    }

    pub fn error(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            found: self.peek().to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn expect(&mut self, token: Token, what: &str) -> Result<Position, ParseError> {
        if *self.peek() == token {
            Ok(self.bump().pos)
        } else {
            Err(self.error(&[what]))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Position, ParseError> {
        if self.is_keyword(kw) {
            Ok(self.bump().pos)
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(String, Position), ParseError> {
        match self.peek().clone() {
            Token::Ident(s) => {
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.error(&[what])),
        }
    }
}
