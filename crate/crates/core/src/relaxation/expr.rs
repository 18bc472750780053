//! Polynomial expressions over probability labels, correlators and
//! operators, e.g. `pAB(00|00) + pA(1|0) - 2*<A1 B0> + A_{0|0}*(B_{0|0} - B_{1|0})`.

use crate::error::{Error, Result};

/// A factor appearing in an objective expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `pAB(01|00)`, kept as text and resolved against party names later.
    Label(String),
    /// `<A1 B0>`: party names with native settings.
    Correlator(Vec<(String, usize)>),
    /// `A^{1,1}_{0|0}` in operator display syntax.
    Operator(String),
}

/// Expanded polynomial: sum of coefficient times product of atoms.
pub type Poly = Vec<(f64, Vec<Atom>)>;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Atom(Atom),
    Plus,
    Minus,
    Star,
    Open,
    Close,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Objective(msg.into())
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1
            }
            '-' => {
                out.push(Token::Minus);
                i += 1
            }
            '*' => {
                out.push(Token::Star);
                i += 1
            }
            '(' => {
                out.push(Token::Open);
                i += 1
            }
            ')' => {
                out.push(Token::Close);
                i += 1
            }
            '<' => {
                let end = chars[i..]
                    .iter()
                    .position(|&c| c == '>')
                    .ok_or_else(|| err("unterminated correlator"))?;
                let body: String = chars[i + 1..i + end].iter().collect();
                out.push(Token::Atom(Atom::Correlator(parse_correlator(&body)?)));
                i += end + 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || matches!(chars[i], 'e' | 'E')
                        || (matches!(chars[i], '+' | '-') && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                out.push(Token::Num(s.parse().map_err(|_| err(format!("bad number `{s}`")))?));
            }
            c if c.is_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' && chars.get(i + 1) != Some(&'{')) {
                    i += 1;
                }
                let is_label = c == 'p' && chars.get(i) == Some(&'(');
                if is_label {
                    let end = chars[i..]
                        .iter()
                        .position(|&c| c == ')')
                        .ok_or_else(|| err("unterminated label"))?;
                    i += end + 1;
                    out.push(Token::Atom(Atom::Label(chars[start..i].iter().collect())));
                } else {
                    // optional ^{..} then _{..}
                    for marker in ['^', '_'] {
                        if chars.get(i) == Some(&marker) && chars.get(i + 1) == Some(&'{') {
                            let end = chars[i..]
                                .iter()
                                .position(|&c| c == '}')
                                .ok_or_else(|| err("unterminated operator"))?;
                            i += end + 1;
                        }
                    }
                    out.push(Token::Atom(Atom::Operator(chars[start..i].iter().collect())));
                }
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

fn parse_correlator(body: &str) -> Result<Vec<(String, usize)>> {
    let parts: Vec<(String, usize)> = body
        .split_whitespace()
        .map(|tok| {
            let split = tok
                .find(|c: char| c.is_ascii_digit())
                .ok_or_else(|| err(format!("correlator factor `{tok}` lacks a setting")))?;
            let setting = tok[split..]
                .parse()
                .map_err(|_| err(format!("bad correlator factor `{tok}`")))?;
            Ok((tok[..split].to_string(), setting))
        })
        .collect::<Result<_>>()?;
    if parts.is_empty() {
        return Err(err("empty correlator"));
    }
    Ok(parts)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn sum(&mut self) -> Result<Poly> {
        let mut acc: Poly = Vec::new();
        let mut sign = 1.0;
        match self.peek() {
            Some(Token::Minus) => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(Token::Plus) => self.pos += 1,
            _ => {}
        }
        loop {
            let term = self.product()?;
            acc.extend(term.into_iter().map(|(c, a)| (sign * c, a)));
            match self.peek() {
                Some(Token::Plus) => sign = 1.0,
                Some(Token::Minus) => sign = -1.0,
                _ => return Ok(acc),
            }
            self.pos += 1;
        }
    }

    fn product(&mut self) -> Result<Poly> {
        let mut acc: Poly = vec![(1.0, Vec::new())];
        let mut first = true;
        loop {
            match self.peek() {
                Some(Token::Star) if !first => {
                    self.pos += 1;
                }
                Some(Token::Num(_) | Token::Atom(_) | Token::Open) if !first => {}
                _ if !first => return Ok(acc),
                _ => {}
            }
            let factor = self.factor()?;
            acc = multiply(&acc, &factor);
            first = false;
        }
    }

    fn factor(&mut self) -> Result<Poly> {
        let tok = self.peek().cloned().ok_or_else(|| err("unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Token::Num(x) => Ok(vec![(x, Vec::new())]),
            Token::Atom(a) => Ok(vec![(1.0, vec![a])]),
            Token::Open => {
                let inner = self.sum()?;
                match self.peek() {
                    Some(Token::Close) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(err("missing `)`")),
                }
            }
            Token::Minus => Ok(self.factor()?.into_iter().map(|(c, a)| (-c, a)).collect()),
            other => Err(err(format!("unexpected token {other:?}"))),
        }
    }
}

fn multiply(a: &Poly, b: &Poly) -> Poly {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (ca, xa) in a {
        for (cb, xb) in b {
            let mut atoms = xa.clone();
            atoms.extend(xb.iter().cloned());
            out.push((ca * cb, atoms));
        }
    }
    out
}

/// Parses and fully distributes an expression.
pub fn parse_poly(text: &str) -> Result<Poly> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(err("empty expression"));
    }
    let mut p = Parser { tokens, pos: 0 };
    let poly = p.sum()?;
    if p.pos != p.tokens.len() {
        return Err(err(format!("trailing input at token {}", p.pos)));
    }
    Ok(poly)
}
