use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Colon,
    Comma,
    Semicolon,
    Eq,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    /// `->` between labels of a `seq` statement.
    Arrow,
    SeqOp,
    PurposeOp,
    ReasonOp,
    GroupOp,
    ParOp,
    ChoiceOp,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semicolon => "`;`".into(),
            Tok::Eq => "`=`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::SeqOp => "`->i`".into(),
            Tok::PurposeOp => "`->p`".into(),
            Tok::ReasonOp => "`->r`".into(),
            Tok::GroupOp => "`||i`".into(),
            Tok::ParOp => "`&`".into(),
            Tok::ChoiceOp => "`(+)`".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn arrow_suffix(c: Option<char>) -> Option<Tok> {
    match c {
        Some('i') => Some(Tok::SeqOp),
        Some('p') => Some(Tok::PurposeOp),
        Some('r') => Some(Tok::ReasonOp),
        _ => None,
    }
}

/// Splits one line into tokens. Everything after `#` is a comment.
pub(crate) fn tokenize_line(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    let at = |k: usize| chars.get(k).copied();
    while k < chars.len() {
        let c = chars[k];
        let pos = Pos {
            line: line_no,
            column: k + 1,
        };
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, pos });
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = k;
            while k < chars.len() && ident_continue(chars[k]) {
                k += 1;
            }
            push(&mut out, Tok::Ident(chars[start..k].iter().collect()));
            continue;
        }
        match c {
            '(' if at(k + 1) == Some('+') && at(k + 2) == Some(')') => {
                push(&mut out, Tok::ChoiceOp);
                k += 3;
            }
            '-' if at(k + 1) == Some('>') => {
                let op = arrow_suffix(at(k + 2)).filter(|_| !at(k + 3).is_some_and(ident_continue));
                match op {
                    Some(op) => {
                        push(&mut out, op);
                        k += 3;
                    }
                    None => {
                        push(&mut out, Tok::Arrow);
                        k += 2;
                    }
                }
            }
            '→' => match arrow_suffix(at(k + 1)).filter(|_| !at(k + 2).is_some_and(ident_continue)) {
                Some(op) => {
                    push(&mut out, op);
                    k += 2;
                }
                None => return Err(unexpected(pos, "`→` must be followed by i, p or r")),
            },
            '|' if at(k + 1) == Some('|') && at(k + 2) == Some('i') => {
                push(&mut out, Tok::GroupOp);
                k += 3;
            }
            '∥' if at(k + 1) == Some('i') => {
                push(&mut out, Tok::GroupOp);
                k += 2;
            }
            _ => {
                let tok = match c {
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    ';' => Tok::Semicolon,
                    '=' => Tok::Eq,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '&' | '∧' => Tok::ParOp,
                    '⊕' => Tok::ChoiceOp,
                    other => {
                        return Err(unexpected(pos, &format!("unexpected character `{other}`")));
                    }
                };
                push(&mut out, tok);
                k += 1;
            }
        }
    }
    Ok(out)
}

fn unexpected(pos: Pos, message: &str) -> ParseError {
    ParseError::new(ParseErrorKind::Syntax, pos, message)
}
