//! First-order terms, one-way matching and integer arithmetic.
//!
//! Terms are the shared syntax for fluents, events and the atoms inside
//! expectation formulas. Matching is always pattern-against-ground: nothing
//! in the engine needs variable-to-variable binding.
//!
//! A few functors carry formulas as *data* (`exp_rule`, `exp`, `viol`,
//! `fulf`). Their arguments are quoted: variables inside them belong to the
//! embedded formula, so they are never substituted, never bound by matching,
//! and do not count against groundness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Name used for the anonymous variable.
pub const ANONYMOUS: &str = "_";

/// Functor used to encode list syntax `[a, b, c]`.
pub const LIST_FUNCTOR: &str = "[]";

/// Functor used to encode the label test `@name`.
pub const LABEL_FUNCTOR: &str = "@";

/// Functors whose arguments are formula data rather than rule variables.
pub const QUOTED_FUNCTORS: [&str; 4] = ["exp_rule", "exp", "viol", "fulf"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Atom(String),
    Number(i64),
    Var(String),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Self {
        Term::Atom(name.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn anon() -> Self {
        Term::Var(ANONYMOUS.to_string())
    }

    /// Builds a compound term; an empty argument list yields an atom so the
    /// representation stays canonical.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        let functor = functor.into();
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn list(items: Vec<Term>) -> Self {
        Term::compound(LIST_FUNCTOR, items)
    }

    pub fn functor(&self) -> Option<&str> {
        match self {
            Term::Atom(name) | Term::Compound(name, _) => Some(name),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn arity(&self) -> usize {
        self.args().len()
    }

    pub fn is_anonymous(&self) -> bool {
        matches!(self, Term::Var(name) if name == ANONYMOUS)
    }

    pub fn is_quoted(&self) -> bool {
        matches!(self, Term::Compound(f, _) if QUOTED_FUNCTORS.contains(&f.as_str()))
    }

    pub fn as_number(&self) -> Option<i64> {
        match self {
            Term::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// True iff the term has no variables outside quoted sub-terms.
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound(..) if self.is_quoted() => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    /// Named (non-anonymous) variables outside quoted sub-terms.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out, false);
        out
    }

    /// Named variables anywhere, including inside quoted sub-terms.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out, true);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>, through_quotes: bool) {
        match self {
            Term::Var(name) if name != ANONYMOUS => {
                out.insert(name.clone());
            }
            Term::Compound(..) if self.is_quoted() && !through_quotes => {}
            Term::Compound(_, args) => args
                .iter()
                .for_each(|a| a.collect_vars(out, through_quotes)),
            _ => {}
        }
    }

    pub fn has_anonymous(&self) -> bool {
        match self {
            Term::Var(name) => name == ANONYMOUS,
            Term::Compound(..) if self.is_quoted() => false,
            Term::Compound(_, args) => args.iter().any(Term::has_anonymous),
            _ => false,
        }
    }

    /// Replaces bound variables; unbound and anonymous variables are kept.
    pub fn apply(&self, subst: &Substitution) -> Term {
        match self {
            Term::Var(name) => subst.get(name).cloned().unwrap_or_else(|| self.clone()),
            Term::Compound(..) if self.is_quoted() => self.clone(),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| a.apply(subst)).collect())
            }
            _ => self.clone(),
        }
    }
}

impl From<i64> for Term {
    fn from(n: i64) -> Self {
        Term::Number(n)
    }
}

impl From<&str> for Term {
    fn from(name: &str) -> Self {
        Term::atom(name)
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{arg}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(name) => f.write_str(name),
            Term::Number(n) => write!(f, "{n}"),
            Term::Var(name) => f.write_str(name),
            Term::Compound(functor, args) if functor == LIST_FUNCTOR => {
                f.write_str("[")?;
                write_args(f, args)?;
                f.write_str("]")
            }
            Term::Compound(functor, args) if functor == LABEL_FUNCTOR && args.len() == 1 => {
                write!(f, "@{}", args[0])
            }
            Term::Compound(functor, args) => {
                write!(f, "{functor}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
        }
    }
}

/// Variable bindings. Values are ground terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn bind(&mut self, var: impl Into<String>, value: Term) {
        self.0.insert(var.into(), value);
    }

    pub fn with(mut self, var: impl Into<String>, value: impl Into<Term>) -> Self {
        self.bind(var, value.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    /// Keeps only bindings for the given variables.
    pub fn restrict(&self, vars: &BTreeSet<String>) -> Substitution {
        Substitution(
            self.0
                .iter()
                .filter(|(k, _)| vars.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        f.write_str("}")
    }
}

/// Matches `pattern` against the ground term `ground`, returning the most
/// general substitution that makes them equal.
pub fn match_term(pattern: &Term, ground: &Term) -> Option<Substitution> {
    let mut subst = Substitution::new();
    match_into(pattern, ground, &mut subst).then_some(subst)
}

/// Extends `subst` so that `pattern` matches `ground`. On failure `subst`
/// may hold partial bindings; callers clone before trying alternatives.
pub fn match_into(pattern: &Term, ground: &Term, subst: &mut Substitution) -> bool {
    match pattern {
        Term::Var(name) if name == ANONYMOUS => true,
        Term::Var(name) => match subst.get(name) {
            Some(bound) => bound == ground,
            None => {
                subst.bind(name.clone(), ground.clone());
                true
            }
        },
        Term::Compound(..) if pattern.is_quoted() => pattern == ground,
        Term::Compound(f, args) => match ground {
            Term::Compound(g, gargs) if f == g && args.len() == gargs.len() => {
                args.iter().zip(gargs).all(|(p, g)| match_into(p, g, subst))
            }
            _ => false,
        },
        _ => pattern == ground,
    }
}

/// True iff `pattern` matches `ground` for some bindings.
pub fn matches(pattern: &Term, ground: &Term) -> bool {
    match_term(pattern, ground).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("unbound variable {0} in arithmetic expression")]
    Unbound(String),
    #[error("unknown arithmetic functor {0}")]
    UnknownFunctor(String),
    #[error("integer overflow evaluating {0}")]
    Overflow(String),
}

/// Evaluates an integer expression built from numbers, bound variables and
/// `plus/2`, `minus/2`, `min/2`.
pub fn eval_arith(expr: &Term, bindings: &Substitution) -> Result<i64, ArithError> {
    match expr {
        Term::Number(n) => Ok(*n),
        Term::Var(name) => match bindings.get(name) {
            Some(Term::Number(n)) => Ok(*n),
            Some(other) => eval_arith(other, &Substitution::new()),
            None => Err(ArithError::Unbound(name.clone())),
        },
        Term::Compound(f, args) if args.len() == 2 => {
            let a = eval_arith(&args[0], bindings)?;
            let b = eval_arith(&args[1], bindings)?;
            let out = match f.as_str() {
                "plus" => a.checked_add(b),
                "minus" => a.checked_sub(b),
                "min" => Some(a.min(b)),
                _ => return Err(ArithError::UnknownFunctor(format!("{f}/2"))),
            };
            out.ok_or_else(|| ArithError::Overflow(expr.to_string()))
        }
        Term::Compound(f, args) => Err(ArithError::UnknownFunctor(format!("{f}/{}", args.len()))),
        Term::Atom(a) => Err(ArithError::UnknownFunctor(format!("{a}/0"))),
    }
}
