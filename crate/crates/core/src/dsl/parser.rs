//! Recursive-descent parser producing an unvalidated document plus the source
//! positions the semantic checks need.

use super::lexer::{tokenize, Tok, Token};
use super::{Condition, ParseError, Region};
use crate::pipeline::Stage;
use crate::scm::{Comparator, Expr, Intervention, Node, NodeId, Noise, NoiseSpec};

pub(crate) const RESERVED: [&str; 17] = [
    "node",
    "goal",
    "metric",
    "stage",
    "fit",
    "and",
    "select",
    "threshold",
    "top",
    "by",
    "do",
    "agent",
    "normal",
    "uniform",
    "constant",
    "pow",
    "piecewise",
];

/// Position of a statement and of every identifier it mentions.
#[derive(Clone, Debug, Default)]
pub(crate) struct Stmt {
    pub(crate) line: usize,
    pub(crate) column: usize,
    pub(crate) refs: Vec<(String, usize, usize)>,
}

#[derive(Debug, Default)]
pub(crate) struct Parsed {
    pub(crate) nodes: Vec<(Node, Stmt)>,
    pub(crate) goal: Option<(NodeId, Stmt)>,
    pub(crate) metric: Option<(NodeId, Stmt)>,
    pub(crate) fit: Option<(Region, Stmt)>,
    pub(crate) stages: Vec<(Stage, Stmt)>,
    /// Repeated goal/metric/fit statements.
    pub(crate) redeclared: Vec<ParseError>,
    pub(crate) end: (usize, usize),
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    refs: Vec<(String, usize, usize)>,
}

type PResult<T> = Result<T, ParseError>;

pub(crate) fn parse_syntax(src: &str) -> PResult<Parsed> {
    let toks = tokenize(src)?;
    let end = {
        let last = toks.last().expect("token stream ends with Eof");
        (last.line, last.column)
    };
    let mut p = Parser {
        src,
        toks,
        pos: 0,
        refs: Vec::new(),
    };
    let mut out = Parsed {
        end,
        ..Parsed::default()
    };
    loop {
        p.skip_newlines();
        if p.peek().tok == Tok::Eof {
            break;
        }
        p.statement(&mut out)?;
    }
    Ok(out)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, tok: &Token, message: String) -> ParseError {
        ParseError::new(self.src, tok.line, tok.column, message)
    }

    fn expected(&self, what: &str) -> ParseError {
        let t = self.peek();
        self.error(t, format!("expected {what}, found {}", t.tok.describe()))
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.pos += 1;
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(t) if t == s)
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(t) if t == kw)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Token> {
        if self.at_sym(s) {
            Ok(self.bump())
        } else {
            Err(self.expected(&format!("'{s}'")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("'{kw}'")))
        }
    }

    /// A node name: identifier that is not a reserved word. Recorded as a reference.
    fn name(&mut self, what: &str) -> PResult<NodeId> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(s) if RESERVED.contains(&s.as_str()) => {
                Err(self.error(&t, format!("expected {what}, found reserved word '{s}'")))
            }
            Tok::Ident(s) => {
                self.bump();
                self.refs.push((s.clone(), t.line, t.column));
                Ok(NodeId::new(s.as_str()))
            }
            _ => Err(self.expected(what)),
        }
    }

    /// NUMBER with an optional leading minus.
    fn number(&mut self) -> PResult<f64> {
        let negative = if self.at_sym("-") {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().tok {
            Tok::Number(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.expected("number")),
        }
    }

    fn comparator(&mut self) -> PResult<Comparator> {
        let cmp = match self.peek().tok {
            Tok::Sym("<=") => Comparator::Le,
            Tok::Sym("<") => Comparator::Lt,
            Tok::Sym(">=") => Comparator::Ge,
            Tok::Sym(">") => Comparator::Gt,
            _ => return Err(self.expected("comparator (<=, <, >=, >)")),
        };
        self.bump();
        Ok(cmp)
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek().tok {
            Tok::Newline | Tok::Eof => Ok(()),
            _ => Err(self.expected("end of line")),
        }
    }

    fn statement(&mut self, out: &mut Parsed) -> PResult<()> {
        let start = self.peek().clone();
        self.refs.clear();
        let keyword = match &start.tok {
            Tok::Ident(k) => k.clone(),
            _ => return Err(self.expected("statement (node, goal, metric, fit or stage)")),
        };
        match keyword.as_str() {
            "node" => {
                self.bump();
                let id = self.name("node name")?;
                // the declared name is not a reference
                self.refs.clear();
                self.expect_sym("=")?;
                let expr = self.expr()?;
                self.end_of_statement()?;
                let stmt = self.stmt(&start);
                out.nodes.push((Node { id, expr }, stmt));
            }
            "goal" | "metric" => {
                self.bump();
                let id = self.name(&format!("{keyword} node name"))?;
                self.end_of_statement()?;
                let stmt = self.stmt(&start);
                let slot = if keyword == "goal" {
                    &mut out.goal
                } else {
                    &mut out.metric
                };
                if slot.is_some() {
                    out.redeclared
                        .push(self.error(&start, format!("duplicate {keyword} declaration")));
                } else {
                    *slot = Some((id, stmt));
                }
            }
            "fit" => {
                self.bump();
                let mut conditions = vec![self.condition()?];
                while self.at_keyword("and") {
                    self.bump();
                    conditions.push(self.condition()?);
                }
                self.end_of_statement()?;
                let stmt = self.stmt(&start);
                if out.fit.is_some() {
                    out.redeclared
                        .push(self.error(&start, "duplicate fit declaration".to_string()));
                } else {
                    out.fit = Some((Region { conditions }, stmt));
                }
            }
            "stage" => {
                self.bump();
                let stage = self.stage()?;
                self.end_of_statement()?;
                let stmt = self.stmt(&start);
                out.stages.push((stage, stmt));
            }
            _ => return Err(self.expected("statement (node, goal, metric, fit or stage)")),
        }
        Ok(())
    }

    fn stmt(&self, start: &Token) -> Stmt {
        Stmt {
            line: start.line,
            column: start.column,
            refs: self.refs.clone(),
        }
    }

    fn condition(&mut self) -> PResult<Condition> {
        let node = self.name("node name")?;
        let cmp = self.comparator()?;
        let value = self.number()?;
        Ok(Condition { node, cmp, value })
    }

    fn stage(&mut self) -> PResult<Stage> {
        if self.at_keyword("select") {
            self.bump();
            if self.at_keyword("threshold") {
                self.bump();
                let node = self.name("node name")?;
                let cmp = self.comparator()?;
                let c = self.number()?;
                Ok(Stage::Threshold { node, cmp, c })
            } else if self.at_keyword("top") {
                self.bump();
                let q = self.number()?;
                self.expect_keyword("by")?;
                let score = self.expr()?;
                Ok(Stage::TopFraction { score, q })
            } else {
                Err(self.expected("'threshold' or 'top'"))
            }
        } else if self.at_keyword("do") {
            self.bump();
            let target = self.name("node name")?;
            self.expect_sym("=")?;
            let value = self.number()?;
            Ok(Stage::Do(Intervention { target, value }))
        } else if self.at_keyword("agent") {
            self.bump();
            self.expect_sym("{")?;
            let mut inner = Vec::new();
            loop {
                self.skip_newlines();
                if self.at_sym("}") {
                    self.bump();
                    break;
                }
                inner.push(self.stage()?);
            }
            Ok(Stage::Agent(inner))
        } else {
            Err(self.expected("stage (select, do or agent)"))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            if self.at_sym("+") {
                self.bump();
                lhs = lhs + self.product()?;
            } else if self.at_sym("-") {
                self.bump();
                lhs = lhs - self.product()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.at_sym("*") {
                self.bump();
                lhs = lhs * self.unary()?;
            } else if self.at_sym("/") {
                self.bump();
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.at_sym("-") {
            self.bump();
            // "-3" is the literal -3, "-(3)" is a negation
            if let Tok::Number(v) = self.peek().tok {
                self.bump();
                return Ok(Expr::Const(-v));
            }
            return Ok(-self.unary()?);
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Const(*v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(word) => match word.as_str() {
                "normal" | "uniform" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let a = self.number()?;
                    self.expect_sym(",")?;
                    let b = self.number()?;
                    self.expect_sym(")")?;
                    let noise = if word == "normal" {
                        Noise::Normal { mu: a, sigma: b }
                    } else {
                        Noise::Uniform { lo: a, hi: b }
                    };
                    Ok(Expr::Noise(NoiseSpec { noise, site: 0 }))
                }
                "constant" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let v = self.number()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Noise(NoiseSpec {
                        noise: Noise::Constant(v),
                        site: 0,
                    }))
                }
                "pow" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let base = self.expr()?;
                    self.expect_sym(",")?;
                    let exponent = self.number()?;
                    self.expect_sym(")")?;
                    Ok(base.pow(exponent))
                }
                "piecewise" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let lhs = self.expr()?;
                    let cmp = self.comparator()?;
                    let rhs = self.expr()?;
                    self.expect_sym(":")?;
                    let then = self.expr()?;
                    self.expect_sym(",")?;
                    let otherwise = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(Expr::piecewise(lhs, cmp, rhs, then, otherwise))
                }
                _ => Ok(Expr::Node(self.name("expression")?)),
            },
            _ => Err(self.expected("expression")),
        }
    }
}
