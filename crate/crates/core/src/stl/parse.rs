//! Text syntax for formulas.
//!
//! ```text
//! phi  := or ('->' phi)?
//! or   := and ('|' and)*
//! and  := bin ('&' bin)*
//! bin  := un (('U' | 'R') '[' a ',' b ']' un)?
//! un   := '!' un | 'F' '[' a ',' b ']' un | 'G' '[' a ',' b ']' un | prim
//! prim := 'true' | 'false' | atom | '(' phi ')'
//! atom := in(u, R) | out(u, R) | hs(u, a1, .., ad, b) | sep(u, v, s)
//! ```

use std::collections::HashMap;

use super::{Formula, Interval, Predicate, Region};
use crate::error::{Error, Result};

/// Names the parser resolves: UAVs and regions.
#[derive(Clone, Debug, Default)]
pub struct ParseContext {
    uavs: Vec<String>,
    regions: HashMap<String, Region>,
}

impl ParseContext {
    /// Context that only accepts the default names `u1`, `u2`, ...
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_uavs(mut self, names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.uavs = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.regions.insert(region.name.clone(), region);
        self
    }

    pub fn with_regions(mut self, regions: impl IntoIterator<Item = Region>) -> Self {
        for r in regions {
            self.regions.insert(r.name.clone(), r);
        }
        self
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.get(name)
    }

    fn uav(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.uavs.iter().position(|n| n == name) {
            return Some(i);
        }
        let n: usize = name.strip_prefix('u')?.parse().ok()?;
        if n == 0 || (!self.uavs.is_empty() && n > self.uavs.len()) {
            return None;
        }
        Some(n - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Bang,
    Amp,
    Pipe,
    Arrow,
    End,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ',' => Tok::Comma,
            '!' | '~' => Tok::Bang,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_')
                {
                    i += 1;
                }
                Tok::Ident(src[start..=i].to_string())
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut j = i + 1;
                while j < bytes.len() {
                    let d = bytes[j];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(bytes[j - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let text = &src[start..j];
                let v = text.parse::<f64>().map_err(|_| Error::Syntax {
                    pos: start,
                    message: format!("bad number `{text}`"),
                })?;
                i = j - 1;
                Tok::Num(v)
            }
            other => {
                return Err(Error::Syntax {
                    pos: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    ctx: &'a ParseContext,
}

/// Parses a formula; `false` becomes `!true` and `a -> b` becomes `!a | b`.
pub fn parse(text: &str, ctx: &ParseContext) -> Result<Formula> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        ctx,
    };
    let f = p.implies()?;
    match p.peek() {
        Tok::End => Ok(f),
        t => Err(p.error(format!("unexpected {t:?} after formula"))),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn error(&self, message: String) -> Error {
        Error::Syntax {
            pos: self.pos(),
            message,
        }
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {want:?}, found {:?}", self.peek())))
        }
    }

    fn implies(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.next();
            let rhs = self.implies()?;
            return Ok(lhs.not().or(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut f = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.next();
            f = f.or(self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut f = self.binary()?;
        while *self.peek() == Tok::Amp {
            self.next();
            f = f.and(self.binary()?);
        }
        Ok(f)
    }

    fn binary(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        let op = match self.peek() {
            Tok::Ident(s) if s == "U" || s == "R" => s.clone(),
            _ => return Ok(lhs),
        };
        self.next();
        let i = self.interval()?;
        let rhs = self.unary()?;
        let (l, r) = (Box::new(lhs), Box::new(rhs));
        let f = if op == "U" {
            Formula::Until(i, l, r)
        } else {
            Formula::Release(i, l, r)
        };
        if matches!(self.peek(), Tok::Ident(s) if s == "U" || s == "R") {
            return Err(self.error("until/release do not associate; add parentheses".into()));
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Bang => {
                self.next();
                Ok(self.unary()?.not())
            }
            Tok::Ident(s) if (s == "F" || s == "G") && self.toks[self.at + 1].1 == Tok::LBrack => {
                self.next();
                let i = self.interval()?;
                let f = Box::new(self.unary()?);
                Ok(if s == "F" {
                    Formula::Eventually(i, f)
                } else {
                    Formula::Always(i, f)
                })
            }
            _ => self.primary(),
        }
    }

    fn interval(&mut self) -> Result<Interval> {
        self.expect(Tok::LBrack)?;
        let lo = self.integer()?;
        self.expect(Tok::Comma)?;
        let hi = self.integer()?;
        self.expect(Tok::RBrack)?;
        Interval::new(lo, hi)
    }

    fn integer(&mut self) -> Result<i64> {
        match self.next() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() < 1e15 => Ok(v as i64),
            t => Err(self.error(format!("expected an integer bound, found {t:?}"))),
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.next() {
            Tok::Num(v) => Ok(v),
            t => Err(self.error(format!("expected a number, found {t:?}"))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.next() {
            Tok::Ident(s) => Ok(s),
            t => Err(self.error(format!("expected a name, found {t:?}"))),
        }
    }

    fn uav(&mut self) -> Result<usize> {
        let name = self.ident()?;
        self.ctx.uav(&name).ok_or(Error::UnknownUav(name))
    }

    fn primary(&mut self) -> Result<Formula> {
        let pos = self.pos();
        match self.next() {
            Tok::LParen => {
                let f = self.implies()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::falsum()),
                "in" | "out" | "hs" | "sep" => self.atom(&s).map(Formula::Atom),
                _ => Err(Error::Syntax {
                    pos,
                    message: format!("unknown operator or atom `{s}`"),
                }),
            },
            t => Err(Error::Syntax {
                pos,
                message: format!("unexpected {t:?}"),
            }),
        }
    }

    fn atom(&mut self, kind: &str) -> Result<Predicate> {
        self.expect(Tok::LParen)?;
        let uav = self.uav()?;
        let p = match kind {
            "in" | "out" => {
                self.expect(Tok::Comma)?;
                let name = self.ident()?;
                let region = self
                    .ctx
                    .region(&name)
                    .cloned()
                    .ok_or(Error::UnknownRegion(name))?;
                if kind == "in" {
                    Predicate::InBox { uav, region }
                } else {
                    Predicate::OutBox { uav, region }
                }
            }
            "hs" => {
                let mut nums = Vec::new();
                while *self.peek() == Tok::Comma {
                    self.next();
                    nums.push(self.number()?);
                }
                if nums.len() < 2 {
                    return Err(self.error("hs needs at least one coefficient and an offset".into()));
                }
                let offset = nums.pop().unwrap_or_default();
                Predicate::HalfSpace {
                    uav,
                    coeffs: nums,
                    offset,
                }
            }
            _ => {
                self.expect(Tok::Comma)?;
                let b = self.uav()?;
                self.expect(Tok::Comma)?;
                let dist = self.number()?;
                Predicate::Separation { a: uav, b, dist }
            }
        };
        self.expect(Tok::RParen)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> ParseContext {
        ParseContext::new()
            .with_region(Region::new("G1", vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
            .with_region(Region::new("O", vec![2.0, 2.0], vec![3.0, 3.0]).unwrap())
    }

    #[test]
    fn parses_reach_avoid() {
        let f = parse("F[0,10] in(u1, G1) & G[0,10] out(u1, O)", &ctx()).unwrap();
        assert!(matches!(f, Formula::And(..)));
        assert_eq!(f.horizon(), 10);
    }

    #[test]
    fn precedence_and_binds_tighter_than_or() {
        let f = parse("true | true & false", &ctx()).unwrap();
        assert_eq!(f, Formula::True.or(Formula::True.and(Formula::falsum())));
        let g = parse("true -> false -> true", &ctx()).unwrap();
        assert_eq!(
            g,
            Formula::True.not().or(Formula::falsum().not().or(Formula::True))
        );
    }

    #[test]
    fn until_and_halfspace() {
        let f = parse("hs(u1, 1, 0, -2.5) U[1,4] sep(u1, u2, 1e-3)", &ctx()).unwrap();
        match f {
            Formula::Until(i, a, b) => {
                assert_eq!(i, Interval { lo: 1, hi: 4 });
                assert_eq!(
                    *a,
                    Formula::Atom(Predicate::HalfSpace {
                        uav: 0,
                        coeffs: vec![1.0, 0.0],
                        offset: -2.5
                    })
                );
                assert_eq!(
                    *b,
                    Formula::Atom(Predicate::Separation { a: 0, b: 1, dist: 1e-3 })
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_carry_kind() {
        assert!(matches!(parse("in(u1, Nowhere)", &ctx()), Err(Error::UnknownRegion(_))));
        assert!(matches!(parse("in(bob, G1)", &ctx()), Err(Error::UnknownUav(_))));
        assert!(matches!(
            parse("F[3,1] true", &ctx()),
            Err(Error::InvalidInterval { lo: 3, hi: 1 })
        ));
        assert!(matches!(parse("F[0,2] (true", &ctx()), Err(Error::Syntax { .. })));
        assert!(matches!(parse("true U[0,1] true U[0,1] true", &ctx()), Err(Error::Syntax { .. })));
    }

    #[test]
    fn named_fleet() {
        let c = ctx().with_uavs(["alpha", "beta"]);
        let f = parse("sep(alpha, beta, 2)", &c).unwrap();
        assert_eq!(f, Formula::Atom(Predicate::Separation { a: 0, b: 1, dist: 2.0 }));
        assert!(parse("in(u3, G1)", &c).is_err());
        assert_eq!(parse("in(u2, G1)", &c).unwrap().uavs().into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn printed_form_parses_back() {
        let text = "(G[0,3] (in(u1, G1) | !out(u2, O)) U[1,2] F[0,1] hs(u1, 0.5, -1.0, 0.1))";
        let f = parse(text, &ctx()).unwrap();
        assert_eq!(parse(&f.to_string(), &ctx()).unwrap(), f);
    }
}
