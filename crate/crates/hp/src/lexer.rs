//! Tokenizer for the ASCII surface syntax.

use std::fmt;

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Decimal literal as written, e.g. `0.25`.
    Number(String),
    True,
    False,
    Forall,
    Exists,
    Assign,  // :=
    Plus,    // +
    Minus,   // -
    Star,    // *
    Caret,   // ^
    ChoiceOp, // ++
    Semi,    // ;
    Comma,   // ,
    Prime,   // '
    Question, // ?
    Bang,    // !
    Amp,     // &
    Bar,     // |
    Arrow,   // ->
    Equiv,   // <->
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Number(n) => return write!(f, "number `{n}`"),
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::Forall => "`\\forall`",
            Tok::Exists => "`\\exists`",
            Tok::Assign => "`:=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Caret => "`^`",
            Tok::ChoiceOp => "`++`",
            Tok::Semi => "`;`",
            Tok::Comma => "`,`",
            Tok::Prime => "`'`",
            Tok::Question => "`?`",
            Tok::Bang => "`!`",
            Tok::Amp => "`&`",
            Tok::Bar => "`|`",
            Tok::Arrow => "`->`",
            Tok::Equiv => "`<->`",
            Tok::Ge => "`>=`",
            Tok::Gt => "`>`",
            Tok::Le => "`<=`",
            Tok::Lt => "`<`",
            Tok::Eq => "`=`",
            Tok::Ne => "`!=`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError { line, col, message: msg, expected: Vec::new() };

    while i < chars.len() {
        let c = chars[i];
        let at = |k: usize| chars.get(i + k).copied();
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && at(1) == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && at(1) == Some('*') {
            let (l0, c0) = (line, col);
            i += 2;
            col += 2;
            loop {
                match chars.get(i) {
                    None => return Err(err(l0, c0, "unterminated block comment".into())),
                    Some('*') if chars.get(i + 1) == Some(&'/') => {
                        i += 2;
                        col += 2;
                        break;
                    }
                    Some('\n') => {
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(_) => {
                        i += 1;
                        col += 1;
                    }
                }
            }
            continue;
        }
        let start_col = col;
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, col: start_col });
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[s..i].iter().collect();
            col += i - s;
            let tok = match word.as_str() {
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word),
            };
            push(&mut out, tok);
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let lit: String = chars[s..i].iter().collect();
            col += i - s;
            push(&mut out, Tok::Number(lit));
            continue;
        }
        if c == '\\' {
            let s = i + 1;
            let mut j = s;
            while j < chars.len() && chars[j].is_ascii_alphabetic() {
                j += 1;
            }
            let word: String = chars[s..j].iter().collect();
            let tok = match word.as_str() {
                "forall" => Tok::Forall,
                "exists" => Tok::Exists,
                _ => return Err(err(line, col, format!("unknown keyword `\\{word}`"))),
            };
            col += j - i;
            i = j;
            push(&mut out, tok);
            continue;
        }
        let (tok, len) = match (c, at(1), at(2)) {
            ('<', Some('-'), Some('>')) => (Tok::Equiv, 3),
            (':', Some('='), _) => (Tok::Assign, 2),
            ('+', Some('+'), _) => (Tok::ChoiceOp, 2),
            ('-', Some('>'), _) => (Tok::Arrow, 2),
            ('>', Some('='), _) => (Tok::Ge, 2),
            ('<', Some('='), _) => (Tok::Le, 2),
            ('!', Some('='), _) => (Tok::Ne, 2),
            ('+', ..) => (Tok::Plus, 1),
            ('-', ..) => (Tok::Minus, 1),
            ('*', ..) => (Tok::Star, 1),
            ('^', ..) => (Tok::Caret, 1),
            (';', ..) => (Tok::Semi, 1),
            (',', ..) => (Tok::Comma, 1),
            ('\'', ..) => (Tok::Prime, 1),
            ('?', ..) => (Tok::Question, 1),
            ('!', ..) => (Tok::Bang, 1),
            ('&', ..) => (Tok::Amp, 1),
            ('|', ..) => (Tok::Bar, 1),
            ('>', ..) => (Tok::Gt, 1),
            ('<', ..) => (Tok::Lt, 1),
            ('=', ..) => (Tok::Eq, 1),
            ('(', ..) => (Tok::LParen, 1),
            (')', ..) => (Tok::RParen, 1),
            ('{', ..) => (Tok::LBrace, 1),
            ('}', ..) => (Tok::RBrace, 1),
            ('[', ..) => (Tok::LBracket, 1),
            (']', ..) => (Tok::RBracket, 1),
            _ => return Err(err(line, col, format!("unexpected character `{c}`"))),
        };
        push(&mut out, tok);
        i += len;
        col += len;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators() {
        assert_eq!(
            toks("x := * ++ ?a<->b -> c != d"),
            vec![
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Star,
                Tok::ChoiceOp,
                Tok::Question,
                Tok::Ident("a".into()),
                Tok::Equiv,
                Tok::Ident("b".into()),
                Tok::Arrow,
                Tok::Ident("c".into()),
                Tok::Ne,
                Tok::Ident("d".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks("x<-y"), vec![Tok::Ident("x".into()), Tok::Lt, Tok::Minus, Tok::Ident("y".into()), Tok::Eof]);
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// c\n  /* a\n b */ x' 1.50").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("x".into()));
        assert_eq!((t[0].line, t[0].col), (3, 7));
        assert_eq!(t[1].tok, Tok::Prime);
        assert_eq!(t[2].tok, Tok::Number("1.50".into()));
    }

    #[test]
    fn errors() {
        assert!(tokenize("x # y").is_err());
        assert!(tokenize("/* open").is_err());
        assert!(tokenize("\\lambda").is_err());
    }
}
