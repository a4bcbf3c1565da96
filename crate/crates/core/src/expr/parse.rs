//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' ['-' | '+'] INTEGER)?
//! primary := NUMBER | IDENT | FUNC '(' sum ')' | '(' sum ')'
//! ```

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::{Expr, Func, Node};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnknownFunction(String),
    UnknownCoordinate(String),
    NonIntegerExponent,
    BadNumber(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub position: usize,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty expression"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token '{t}'"),
            ParseErrorKind::UnknownFunction(n) => write!(f, "unknown function '{n}'"),
            ParseErrorKind::UnknownCoordinate(n) => write!(f, "undeclared coordinate '{n}'"),
            ParseErrorKind::NonIntegerExponent => f.write_str("exponent must be an integer literal"),
            ParseErrorKind::BadNumber(t) => write!(f, "malformed number '{t}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Token {
    fn text(&self) -> String {
        match self {
            Token::Number(n) => n.to_string(),
            Token::Ident(s) => s.clone(),
            Token::Plus => "+".into(),
            Token::Minus => "-".into(),
            Token::Star => "*".into(),
            Token::Slash => "/".into(),
            Token::Caret => "^".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Token::Plus,
            '-' => Token::Minus,
            '*' => Token::Star,
            '/' => Token::Slash,
            '^' => Token::Caret,
            '(' => Token::LParen,
            ')' => Token::RParen,
            '0'..='9' | '.' => {
                let (number, end) = scan_number(text, i)?;
                i = end;
                out.push((Token::Number(number), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or(c);
                return Err(ParseError { kind: ParseErrorKind::UnexpectedChar(ch), position: i });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

/// Scans a decimal literal with optional fraction and exponent into an exact
/// rational.
fn scan_number(text: &str, start: usize) -> Result<(BigRational, usize), ParseError> {
    let bytes = text.as_bytes();
    let mut i = start;
    let mut digits = String::new();
    let mut frac_len: i64 = 0;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        digits.push(bytes[i] as char);
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            digits.push(bytes[i] as char);
            frac_len += 1;
            i += 1;
        }
    }
    let bad = |end: usize| ParseError {
        kind: ParseErrorKind::BadNumber(text[start..end].to_string()),
        position: start,
    };
    if digits.is_empty() {
        return Err(bad(i));
    }
    let mut exponent: i64 = 0;
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        let mut sign = 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            if bytes[j] == b'-' {
                sign = -1;
            }
            j += 1;
        }
        let exp_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j == exp_start {
            return Err(bad(j));
        }
        exponent = sign * text[exp_start..j].parse::<i64>().map_err(|_| bad(j))?;
        i = j;
    }
    let mantissa: BigInt = digits.parse().map_err(|_| bad(i))?;
    let shift = exponent - frac_len;
    let ten = BigInt::from(10);
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    let value = if shift >= 0 {
        BigRational::from_integer(mantissa * scale)
    } else {
        BigRational::new(mantissa, scale)
    };
    Ok((value, i))
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    coords: Option<&'a [String]>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { kind, position: self.offset() }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(t.text())),
            None => self.err(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn expect(&mut self, want: Token) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.product()?;
                    lhs = Expr::raw(Node::Add(lhs, rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.product()?;
                    lhs = Expr::raw(Node::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::raw(Node::Mul(lhs, rhs));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::raw(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            // A bare literal after unary minus becomes a negative constant.
            let literal = matches!(self.peek(), Some(Token::Number(_)))
                && !matches!(self.tokens.get(self.pos + 1), Some((Token::Caret, _)));
            let operand = self.unary()?;
            if literal {
                if let Node::Const(c) = operand.node() {
                    return Ok(Expr::rational(-c));
                }
            }
            return Ok(Expr::raw(Node::Neg(operand)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let negative = match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                true
            }
            Some(Token::Plus) => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let k = match self.peek() {
            Some(Token::Number(n)) if n.is_integer() => {
                let k: i32 = n
                    .numer()
                    .try_into()
                    .map_err(|_| self.err(ParseErrorKind::NonIntegerExponent))?;
                self.pos += 1;
                if negative {
                    -k
                } else {
                    k
                }
            }
            Some(Token::Number(_)) | Some(Token::Ident(_)) | Some(Token::LParen) => {
                return Err(self.err(ParseErrorKind::NonIntegerExponent));
            }
            _ => return Err(self.unexpected()),
        };
        if self.peek() == Some(&Token::Caret) {
            return Err(self.unexpected());
        }
        Ok(Expr::raw(Node::Pow(base, k)))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Token::Number(n)) => {
                self.pos += 1;
                Ok(Expr::rational(n))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Token::LParen) {
                    let func = Func::from_name(&name).ok_or(ParseError {
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                        position: offset,
                    })?;
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.expect(Token::RParen)?;
                    return Ok(Expr::raw(Node::Apply(func, arg)));
                }
                if let Some(coords) = self.coords {
                    if !coords.iter().any(|c| *c == name) {
                        return Err(ParseError {
                            kind: ParseErrorKind::UnknownCoordinate(name),
                            position: offset,
                        });
                    }
                }
                Ok(Expr::raw(Node::Coord(Arc::from(name.as_str()))))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            _ => Err(self.unexpected()),
        }
    }
}

fn parse_inner(text: &str, coords: Option<&[String]>) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError { kind: ParseErrorKind::Empty, position: 0 });
    }
    let mut parser = Parser { tokens, pos: 0, end: text.len(), coords };
    let e = parser.sum()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.unexpected());
    }
    Ok(e)
}

/// Parses an expression, accepting any identifier as a coordinate.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_inner(text, None)
}

/// Parses an expression whose identifiers must belong to `coords`.
pub fn parse_with_coords(text: &str, coords: &[String]) -> Result<Expr, ParseError> {
    parse_inner(text, Some(coords))
}
