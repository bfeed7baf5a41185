//! Infix parser for the expression class: `+ - * / ^`, unary minus, integer
//! and decimal literals (exact rationals, scientific notation allowed),
//! identifiers, and the functions `exp`, `sin`, `cos`.

use super::{Expr, ExprError, Rat};
use num_bigint::BigInt;
use num_traits::{Pow, Zero};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("unexpected character `{ch}` at byte {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected `{expected}` at byte {pos}")]
    Expected { expected: &'static str, pos: usize },
    #[error("exponent must be an integer literal (byte {pos})")]
    NonIntegerExponent { pos: usize },
    #[error("exponent {value} exceeds the supported range (byte {pos})")]
    ExponentTooLarge { value: i32, pos: usize },
    #[error("{0}")]
    Class(#[from] ExprError),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

/// Parse infix text into a canonical expression.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(ParseError::UnexpectedChar {
            ch: p.src[p.pos] as char,
            pos: p.pos,
        });
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src.get(self.pos).map(|&b| b as char)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Some('-') => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Some('/') => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = acc.div(&rhs)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('-') => {
                self.bump();
                Ok(-&self.unary()?)
            }
            Some('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.bump();
            let neg = if self.peek() == Some('-') {
                self.bump();
                true
            } else {
                false
            };
            let pos = self.pos;
            let k = self.integer_literal(pos)?;
            let k = if neg { -k } else { k };
            if k.abs() > 512 {
                return Err(ParseError::ExponentTooLarge { value: k, pos });
            }
            return Ok(base.powi(k)?);
        }
        Ok(base)
    }

    fn integer_literal(&mut self, start: usize) -> Result<i32, ParseError> {
        self.skip_ws();
        let begin = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_digit() {
            self.pos += 1;
        }
        if begin == self.pos {
            return Err(ParseError::NonIntegerExponent { pos: start });
        }
        let text = std::str::from_utf8(&self.src[begin..self.pos]).unwrap();
        text.parse::<i32>()
            .map_err(|_| ParseError::NonIntegerExponent { pos: start })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(ParseError::UnexpectedEnd),
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(ParseError::Expected {
                        expected: ")",
                        pos: self.pos,
                    });
                }
                self.bump();
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let name = self.ident();
                if self.peek() == Some('(') {
                    self.bump();
                    let arg = self.expr()?;
                    if self.peek() != Some(')') {
                        return Err(ParseError::Expected {
                            expected: ")",
                            pos: self.pos,
                        });
                    }
                    self.bump();
                    let e = match name.as_str() {
                        "exp" => Expr::exp_of(&arg)?,
                        "sin" => Expr::sin_of(&arg)?,
                        "cos" => Expr::cos_of(&arg)?,
                        _ => {
                            return Err(ParseError::Expected {
                                expected: "exp, sin or cos",
                                pos: self.pos,
                            })
                        }
                    };
                    Ok(e)
                } else {
                    Ok(Expr::var(&name))
                }
            }
            Some(ch) => Err(ParseError::UnexpectedChar { ch, pos: self.pos }),
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let begin = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos] as char;
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.src[begin..self.pos]).into_owned()
    }

    /// Decimal literal to an exact rational: `12`, `0.5`, `1e-3`, `2.5e2`.
    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let begin = self.pos;
        let mut int_digits = String::new();
        let mut frac_digits = String::new();
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_digit() {
            int_digits.push(self.src[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_digit() {
                frac_digits.push(self.src[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_digits.is_empty() && frac_digits.is_empty() {
            return Err(ParseError::UnexpectedChar {
                ch: self.src.get(self.pos).map(|&b| b as char).unwrap_or('?'),
                pos: begin,
            });
        }
        let mut exponent: i64 = 0;
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
        {
            // lookahead: only treat as exponent when digits (or sign+digits) follow
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1i64;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                if self.src[self.pos] == b'-' {
                    sign = -1;
                }
                self.pos += 1;
            }
            let dstart = self.pos;
            while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_digit() {
                self.pos += 1;
            }
            if dstart == self.pos {
                self.pos = save;
            } else {
                let text = std::str::from_utf8(&self.src[dstart..self.pos]).unwrap();
                exponent = sign * text.parse::<i64>().unwrap_or(0);
            }
        }
        let digits = format!("{int_digits}{frac_digits}");
        let mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().unwrap()
        };
        let scale = exponent - frac_digits.len() as i64;
        let ten = BigInt::from(10);
        let value: Rat = if scale >= 0 {
            Rat::from_integer(mantissa * ten.pow(scale as u64))
        } else {
            Rat::new(mantissa, ten.pow((-scale) as u64))
        };
        Ok(Expr::constant(value))
    }
}
