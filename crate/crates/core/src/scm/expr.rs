//! Expression trees for structural equations.

use std::fmt;
use std::ops;

use super::NodeId;

/// Comparison operator used by thresholds and piecewise branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparator {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Le => lhs <= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }

    /// True for `>=` and `>`, the comparators that keep the upper tail.
    pub fn is_upward(self) -> bool {
        matches!(self, Comparator::Ge | Comparator::Gt)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Exogenous noise distribution.
///
/// `Normal` takes a standard deviation, not a variance: `Normal { mu: 0.0, sigma: 2.0 }`
/// has variance 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    Normal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant(f64),
}

impl Noise {
    /// Describes why the parameters are out of domain, if they are.
    pub fn domain_problem(&self) -> Option<String> {
        match *self {
            Noise::Normal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() {
                    Some("non-finite normal parameter".to_string())
                } else if sigma < 0.0 {
                    Some(format!("negative sigma {sigma}"))
                } else {
                    None
                }
            }
            Noise::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    Some("non-finite uniform bound".to_string())
                } else if lo > hi {
                    Some(format!("uniform bounds inverted (lo {lo} > hi {hi})"))
                } else {
                    None
                }
            }
            Noise::Constant(v) if !v.is_finite() => Some("non-finite constant noise".to_string()),
            Noise::Constant(_) => None,
        }
    }
}

/// One occurrence of a noise term. `site` keys the random stream, so it must be
/// unique within a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub noise: Noise,
    pub site: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Node(NodeId),
    Noise(NoiseSpec),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, f64),
    Piecewise {
        lhs: Box<Expr>,
        cmp: Comparator,
        rhs: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
}

impl Expr {
    pub fn node(name: &str) -> Expr {
        Expr::Node(NodeId::new(name))
    }

    /// Normal noise with standard deviation `sigma`. The site id is a placeholder
    /// until the owning document renumbers its noise sites.
    pub fn normal(mu: f64, sigma: f64) -> Expr {
        Expr::Noise(NoiseSpec {
            noise: Noise::Normal { mu, sigma },
            site: 0,
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Expr {
        Expr::Noise(NoiseSpec {
            noise: Noise::Uniform { lo, hi },
            site: 0,
        })
    }

    pub fn pow(self, exponent: f64) -> Expr {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn piecewise(lhs: Expr, cmp: Comparator, rhs: Expr, then: Expr, otherwise: Expr) -> Expr {
        Expr::Piecewise {
            lhs: Box::new(lhs),
            cmp,
            rhs: Box::new(rhs),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    /// Visits sub-expressions in source order (left to right, parents first).
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Node(_) | Expr::Noise(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.walk(f),
            Expr::Piecewise {
                lhs,
                rhs,
                then,
                otherwise,
                ..
            } => {
                lhs.walk(f);
                rhs.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
        }
    }

    /// Node references in source order, with repeats.
    pub fn references(&self) -> Vec<&NodeId> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Node(id) = e {
                out.push(id);
            }
        });
        out
    }

    pub fn noise_specs(&self) -> Vec<&NoiseSpec> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Noise(spec) = e {
                out.push(spec);
            }
        });
        out
    }

    /// Mutable visit of every noise leaf in source order.
    pub fn for_each_noise_mut(&mut self, f: &mut impl FnMut(&mut NoiseSpec)) {
        match self {
            Expr::Noise(spec) => f(spec),
            Expr::Const(_) | Expr::Node(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.for_each_noise_mut(f);
                b.for_each_noise_mut(f);
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.for_each_noise_mut(f),
            Expr::Piecewise {
                lhs,
                rhs,
                then,
                otherwise,
                ..
            } => {
                lhs.for_each_noise_mut(f);
                rhs.for_each_noise_mut(f);
                then.for_each_noise_mut(f);
                otherwise.for_each_noise_mut(f);
            }
        }
    }

    /// Literal numbers that must be finite: constants and power exponents.
    pub(crate) fn has_non_finite_literal(&self) -> bool {
        let mut bad = false;
        self.walk(&mut |e| match e {
            Expr::Const(v) | Expr::Pow(_, v) if !v.is_finite() => bad = true,
            _ => {}
        });
        bad
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::Const(v)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }

        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }

        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_is_source_order() {
        let e = Expr::piecewise(
            Expr::node("a"),
            Comparator::Le,
            Expr::node("b"),
            Expr::node("c") + Expr::normal(0.0, 1.0),
            -Expr::node("d"),
        );
        let names: Vec<_> = e.references().iter().map(|n| n.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d"]);
        assert_eq!(e.noise_specs().len(), 1);
    }

    #[test]
    fn comparator_semantics() {
        assert!(Comparator::Ge.holds(1.0, 1.0));
        assert!(!Comparator::Gt.holds(1.0, 1.0));
        assert!(Comparator::Le.holds(1.0, 1.0));
        assert!(!Comparator::Lt.holds(1.0, 1.0));
        assert!(Comparator::Gt.is_upward() && !Comparator::Lt.is_upward());
    }

    #[test]
    fn noise_domain() {
        assert!(Noise::Normal { mu: 0.0, sigma: -1.0 }.domain_problem().is_some());
        assert!(Noise::Normal { mu: 0.0, sigma: 0.0 }.domain_problem().is_none());
        assert!(Noise::Uniform { lo: 2.0, hi: 1.0 }.domain_problem().is_some());
        assert!(Noise::Uniform { lo: 1.0, hi: 1.0 }.domain_problem().is_none());
        assert!(Noise::Constant(f64::NAN).domain_problem().is_some());
    }
}
