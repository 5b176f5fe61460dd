//! Tokenizer shared by the model and plan parsers.

use super::DslError;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(Real),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Assign,
    Arrow,
    Slash,
    Dot,
    DotDot,
    Plus,
    Minus,
    Star,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Dot => "`.`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Percent => "`%`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let mut tokens = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            tokens.push(Token { tok: $tok, line: $l, col: $c })
        };
    }

    while let Some(&c) = chars.peek() {
        let (l, co) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
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
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, l, co);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, l, co);
            }
            '[' => {
                chars.next();
                col += 1;
                push!(Tok::LBracket, l, co);
            }
            ']' => {
                chars.next();
                col += 1;
                push!(Tok::RBracket, l, co);
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, l, co);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, l, co);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, l, co);
            }
            ';' => {
                chars.next();
                col += 1;
                push!(Tok::Semi, l, co);
            }
            '+' => {
                chars.next();
                col += 1;
                push!(Tok::Plus, l, co);
            }
            '*' => {
                chars.next();
                col += 1;
                push!(Tok::Star, l, co);
            }
            '%' => {
                chars.next();
                col += 1;
                push!(Tok::Percent, l, co);
            }
            '/' => {
                chars.next();
                col += 1;
                push!(Tok::Slash, l, co);
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, l, co);
                } else {
                    push!(Tok::Minus, l, co);
                }
            }
            '.' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'.') {
                    chars.next();
                    col += 1;
                    push!(Tok::DotDot, l, co);
                } else {
                    push!(Tok::Dot, l, co);
                }
            }
            '=' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::EqEq, l, co);
                } else {
                    push!(Tok::Assign, l, co);
                }
            }
            '!' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Ne, l, co);
                } else {
                    return Err(DslError::Syntax {
                        line: l,
                        col: co,
                        expected: "`!=`".into(),
                    });
                }
            }
            '<' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Le, l, co);
                } else {
                    push!(Tok::Lt, l, co);
                }
            }
            '>' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Ge, l, co);
                } else {
                    push!(Tok::Gt, l, co);
                }
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\n') | None => {
                            return Err(DslError::Syntax {
                                line: l,
                                col: co,
                                expected: "closing `\"`".into(),
                            })
                        }
                        Some(c) => {
                            col += 1;
                            s.push(c);
                        }
                    }
                }
                push!(Tok::Str(s), l, co);
            }
            c if c.is_ascii_digit() => {
                let mut raw = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        raw.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                // Consume a decimal point only when a digit follows, so
                // `1800..1900` lexes as number, `..`, number.
                let mut peek2 = chars.clone();
                if peek2.next() == Some('.') {
                    if matches!(peek2.next(), Some(d) if d.is_ascii_digit()) {
                        raw.push('.');
                        chars.next();
                        col += 1;
                        while let Some(&d) = chars.peek() {
                            if d.is_ascii_digit() {
                                raw.push(d);
                                chars.next();
                                col += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                if matches!(chars.peek(), Some(&'e') | Some(&'E')) {
                    let mut peek2 = chars.clone();
                    peek2.next();
                    let mut exp = String::new();
                    if let Some(sign @ ('+' | '-')) = peek2.peek().copied() {
                        exp.push(sign);
                        peek2.next();
                    }
                    if matches!(peek2.peek(), Some(d) if d.is_ascii_digit()) {
                        raw.push('e');
                        raw.push_str(&exp);
                        chars.next();
                        col += 1;
                        for _ in 0..exp.len() {
                            chars.next();
                            col += 1;
                        }
                        while let Some(&d) = chars.peek() {
                            if d.is_ascii_digit() {
                                raw.push(d);
                                chars.next();
                                col += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                let value: Real = raw.parse().map_err(|_| DslError::Syntax {
                    line: l,
                    col: co,
                    expected: "number".into(),
                })?;
                push!(Tok::Number(value), l, co);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(s), l, co);
            }
            _ => {
                return Err(DslError::Syntax {
                    line: l,
                    col: co,
                    expected: format!("valid token, found `{c}`"),
                })
            }
        }
    }
    tokens.push(Token { tok: Tok::Eof, line, col });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn range_does_not_eat_the_dots() {
        assert_eq!(
            toks("1800..1900"),
            vec![Tok::Number(1800.0), Tok::DotDot, Tok::Number(1900.0), Tok::Eof]
        );
    }

    #[test]
    fn floats_and_exponents() {
        assert_eq!(toks("2.5"), vec![Tok::Number(2.5), Tok::Eof]);
        assert_eq!(toks("2e7"), vec![Tok::Number(2e7), Tok::Eof]);
        assert_eq!(toks("1.5e-3"), vec![Tok::Number(1.5e-3), Tok::Eof]);
    }

    #[test]
    fn comments_and_positions() {
        let tokens = tokenize("a # rest\n  b").unwrap();
        assert_eq!(tokens[1].tok, Tok::Ident("b".into()));
        assert_eq!((tokens[1].line, tokens[1].col), (2, 3));
    }

    #[test]
    fn arrow_vs_minus() {
        assert_eq!(toks("-> -"), vec![Tok::Arrow, Tok::Minus, Tok::Eof]);
    }

    #[test]
    fn bad_char_reports_position() {
        let err = tokenize("ok\n  @").unwrap_err();
        match err {
            DslError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
