//! Recursive-descent parser for the formula language.
//!
//! ```text
//! formula    := comparison
//! comparison := additive (("=" | "<>" | "<" | "<=" | ">" | ">=") additive)*
//! additive   := term (("+" | "-") term)*
//! term       := unary (("*" | "/") unary)*
//! unary      := "-" unary | power
//! power      := atom ("^" unary)?
//! atom       := number | string | ref | call | "(" formula ")"
//! call       := name "(" (arg ("," arg)*)? ")"
//! arg        := ref ":" ref | formula
//! ```
//!
//! Unary minus sits below `^`, so `-2^2` is `-(2^2)`.

use super::ast::{BinaryOp, Expr, Function};
use crate::address::{split_address, CellAddress, CellRange};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    /// Byte offset of the offending token (input length for unexpected end).
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Op(BinaryOp),
    Minus,
    Plus,
    Caret,
    End,
}

struct Token {
    tok: Tok,
    pos: usize,
}

fn syntax(position: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { position, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b':' => Tok::Colon,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Op(BinaryOp::Mul),
            b'/' => Tok::Op(BinaryOp::Div),
            b'^' => Tok::Caret,
            b'=' => Tok::Op(BinaryOp::Eq),
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Op(BinaryOp::Le)
                }
                Some(b'>') => {
                    i += 1;
                    Tok::Op(BinaryOp::Ne)
                }
                _ => Tok::Op(BinaryOp::Lt),
            },
            b'>' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Op(BinaryOp::Ge)
                }
                _ => Tok::Op(BinaryOp::Gt),
            },
            b'"' => {
                let mut text = String::new();
                let mut j = i + 1;
                loop {
                    match src[j..].find('"') {
                        None => return Err(syntax(start, "unterminated string")),
                        Some(k) => {
                            text.push_str(&src[j..j + k]);
                            j += k + 1;
                            if bytes.get(j) == Some(&b'"') {
                                text.push('"');
                                j += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(text), pos: start });
                i = j;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let value: f64 = text.parse().map_err(|_| syntax(start, format!("bad number {text:?}")))?;
                if !value.is_finite() {
                    return Err(syntax(start, "number out of range"));
                }
                out.push(Token { tok: Tok::Num(value), pos: start });
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'.') {
                    j += 1;
                }
                out.push(Token { tok: Tok::Ident(src[i..j].to_string()), pos: start });
                i = j;
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character {ch:?}")));
            }
        };
        out.push(Token { tok, pos: start });
        i += 1;
    }
    out.push(Token { tok: Tok::End, pos: src.len() });
    Ok(out)
}

/// Interprets an identifier as a cell reference. `Ok(None)` means the
/// identifier is address-shaped but outside the grid.
fn reference(ident: &str, pos: usize) -> Result<Option<CellAddress>, ParseError> {
    match split_address(ident) {
        Some((col, row)) => Ok(CellAddress::new(col, row)),
        None => Err(syntax(pos, format!("unknown name {ident:?}"))),
    }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.at];
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Tok::End => syntax(self.pos(), "unexpected end of formula"),
            other => syntax(self.pos(), format!("unexpected token {other:?}")),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.additive()?;
        while let Tok::Op(op) = *self.peek() {
            if !op.is_comparison() {
                break;
            }
            self.bump();
            let right = self.additive()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let right = self.term()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        while let Tok::Op(op @ (BinaryOp::Mul | BinaryOp::Div)) = *self.peek() {
            self.bump();
            let right = self.unary()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.comparison()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.arguments()?;
                    return Ok(Expr::Call(Function::from_name(&name), args));
                }
                Ok(match reference(&name, pos)? {
                    Some(addr) => Expr::Ref(addr),
                    None => Expr::BadRef,
                })
            }
            _ => Err(self.unexpected()),
        }
    }

    fn arguments(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.argument()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.unexpected()),
            }
        }
    }

    fn argument(&mut self) -> Result<Expr, ParseError> {
        if let (Tok::Ident(a), Tok::Colon, Tok::Ident(b)) =
            (self.peek().clone(), self.peek_at(1).clone(), self.peek_at(2).clone())
        {
            let start = reference(&a, self.pos())?;
            self.bump();
            self.bump();
            let end = reference(&b, self.pos())?;
            self.bump();
            return Ok(match (start, end) {
                (Some(s), Some(e)) => Expr::Range(CellRange::new(s, e)),
                _ => Expr::BadRef,
            });
        }
        self.comparison()
    }
}

/// Parses formula source (without any leading `=`).
pub fn parse_formula(source: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser { tokens: tokenize(source)?, at: 0 };
    let expr = parser.comparison()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected());
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> CellAddress {
        s.parse().unwrap()
    }

    fn bin(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    #[test]
    fn precedence() {
        assert_eq!(
            parse_formula("1+2*3").unwrap(),
            bin(BinaryOp::Add, Expr::Num(1.0), bin(BinaryOp::Mul, Expr::Num(2.0), Expr::Num(3.0)))
        );
        assert_eq!(
            parse_formula("(1+2)*3").unwrap(),
            bin(BinaryOp::Mul, bin(BinaryOp::Add, Expr::Num(1.0), Expr::Num(2.0)), Expr::Num(3.0))
        );
    }

    #[test]
    fn range_call() {
        assert_eq!(
            parse_formula("SUM(B1:B3)").unwrap(),
            Expr::Call(Function::Sum, vec![Expr::Range(CellRange::new(a("B1"), a("B3")))])
        );
        assert_eq!(
            parse_formula("sum(b3:b1)").unwrap(),
            Expr::Call(Function::Sum, vec![Expr::Range(CellRange::new(a("B1"), a("B3")))])
        );
    }

    #[test]
    fn trailing_operator_reports_end_position() {
        assert_eq!(parse_formula("1+").unwrap_err().position(), 2);
    }

    #[test]
    fn power_is_right_associative_and_binds_above_negation() {
        assert_eq!(
            parse_formula("2^3^2").unwrap(),
            bin(BinaryOp::Pow, Expr::Num(2.0), bin(BinaryOp::Pow, Expr::Num(3.0), Expr::Num(2.0)))
        );
        assert_eq!(
            parse_formula("-2^2").unwrap(),
            Expr::Neg(Box::new(bin(BinaryOp::Pow, Expr::Num(2.0), Expr::Num(2.0))))
        );
        assert_eq!(
            parse_formula("2^-1").unwrap(),
            bin(BinaryOp::Pow, Expr::Num(2.0), Expr::Neg(Box::new(Expr::Num(1.0))))
        );
    }

    #[test]
    fn comparisons_bind_loosest() {
        assert_eq!(
            parse_formula("1+1<=A1").unwrap(),
            bin(BinaryOp::Le, bin(BinaryOp::Add, Expr::Num(1.0), Expr::Num(1.0)), Expr::Ref(a("A1")))
        );
        assert_eq!(
            parse_formula("A1<>\"x\"\"y\"").unwrap(),
            bin(BinaryOp::Ne, Expr::Ref(a("A1")), Expr::Str("x\"y".into()))
        );
    }

    #[test]
    fn unknown_function_parses() {
        assert_eq!(
            parse_formula("foo(1)").unwrap(),
            Expr::Call(Function::Unknown("FOO".into()), vec![Expr::Num(1.0)])
        );
    }

    #[test]
    fn out_of_grid_reference_is_a_ref_error_node() {
        assert_eq!(parse_formula("A0+1").unwrap(), bin(BinaryOp::Add, Expr::BadRef, Expr::Num(1.0)));
        assert_eq!(parse_formula("SUM(A1:AAA1)").unwrap(), Expr::Call(Function::Sum, vec![Expr::BadRef]));
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "1+", "(1", "1)", "A1:B2", "SUM(A1:B2+1)", "TRUE", "\"open", "1 2", "#", "1e999", "SUM(,1)", "1..2"] {
            assert!(parse_formula(bad).is_err(), "{bad:?} should not parse");
        }
        assert_eq!(parse_formula("\"open").unwrap_err().position(), 0);
        assert_eq!(parse_formula("1 # 2").unwrap_err().position(), 2);
    }
}
