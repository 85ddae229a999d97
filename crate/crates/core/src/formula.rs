//! Expectation formulas: the AST, one-step progression and a finite-trace
//! evaluator used as the reference semantics.
//!
//! Progression is three-valued. A formula either resolves now (fulfilled or
//! violated) or leaves a residual that must hold from the next observation
//! onwards. The finite-trace evaluator gives the same three outcomes with
//! positions past the end of the trace treated as unknown.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::term::{matches, Substitution, Term, LABEL_FUNCTOR, LIST_FUNCTOR};

/// Functor of the event used to satisfy `happ(Actor, Action)`.
pub const ACTION_EVENT: &str = "does";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Fluent(Term),
    Happ(Term),
    /// `happ(Actor, Action)`: satisfied by an event `does(Actor, Action)`.
    HappBy(Term, Term),
    /// `@label`
    Label(String),
    Viol(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Next(Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    Never(Box<Formula>),
    True,
    False,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("not a formula: {0}")]
    NotAFormula(String),
    #[error("{0}([]) needs at least one operand")]
    EmptyJunction(&'static str),
    #[error("formula is not ground: {0}")]
    NotGround(String),
}

/// Everything observable at one tick.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepObservation {
    pub fluents: BTreeSet<Term>,
    pub events: BTreeSet<Term>,
    pub label: String,
    /// Violations classified at the previous tick, as (condition, expectation).
    pub violations: BTreeSet<(Formula, Formula)>,
}

impl StepObservation {
    pub fn new(label: impl Into<String>) -> Self {
        StepObservation {
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn with_fluent(mut self, fluent: Term) -> Self {
        self.fluents.insert(fluent);
        self
    }

    pub fn with_event(mut self, event: Term) -> Self {
        self.events.insert(event);
        self
    }

    pub fn with_violation(mut self, cond: Formula, exp: Formula) -> Self {
        self.violations.insert((cond, exp));
        self
    }
}

/// Outcome of progressing a formula through one observation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Residual {
    True,
    False,
    Pending(Formula),
}

impl Residual {
    fn from_bool(b: bool) -> Self {
        if b {
            Residual::True
        } else {
            Residual::False
        }
    }

    pub fn is_pending(&self) -> bool {
        matches!(self, Residual::Pending(_))
    }
}

/// Three-valued verdict of the finite-trace evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    fn negate(self) -> Self {
        match self {
            Verdict::True => Verdict::False,
            Verdict::False => Verdict::True,
            Verdict::Unknown => Verdict::Unknown,
        }
    }
}

impl Formula {
    pub fn fluent(t: Term) -> Self {
        Formula::Fluent(t)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    pub fn never(f: Formula) -> Self {
        Formula::Never(Box::new(f))
    }

    pub fn viol(cond: Formula, exp: Formula) -> Self {
        Formula::Viol(Box::new(cond), Box::new(exp))
    }

    pub fn label(l: impl Into<String>) -> Self {
        Formula::Label(l.into())
    }

    /// Rewrites every `never(F)` into `always(not(F))`.
    pub fn normalise(&self) -> Formula {
        self.map_children(&|f| f.normalise(), true)
    }

    fn map_children(&self, g: &dyn Fn(&Formula) -> Formula, expand_never: bool) -> Formula {
        match self {
            Formula::Never(f) if expand_never => Formula::always(Formula::not(g(f))),
            Formula::Never(f) => Formula::never(g(f)),
            Formula::Viol(c, e) => Formula::viol(g(c), g(e)),
            Formula::Not(f) => Formula::not(g(f)),
            Formula::Next(f) => Formula::next(g(f)),
            Formula::Eventually(f) => Formula::eventually(g(f)),
            Formula::Always(f) => Formula::always(g(f)),
            Formula::And(fs) => Formula::And(fs.iter().map(g).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(g).collect()),
            leaf => leaf.clone(),
        }
    }

    pub fn apply(&self, subst: &Substitution) -> Formula {
        match self {
            Formula::Fluent(t) => Formula::Fluent(t.apply(subst)),
            Formula::Happ(t) => Formula::Happ(t.apply(subst)),
            Formula::HappBy(a, t) => Formula::HappBy(a.apply(subst), t.apply(subst)),
            other => other.map_children(&|f| f.apply(subst), false),
        }
    }

    fn terms(&self, out: &mut Vec<Term>) {
        match self {
            Formula::Fluent(t) | Formula::Happ(t) => out.push(t.clone()),
            Formula::HappBy(a, t) => {
                out.push(a.clone());
                out.push(t.clone());
            }
            Formula::Viol(c, e) => {
                c.terms(out);
                e.terms(out);
            }
            Formula::Not(f)
            | Formula::Next(f)
            | Formula::Eventually(f)
            | Formula::Always(f)
            | Formula::Never(f) => f.terms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.terms(out)),
            Formula::Label(_) | Formula::True | Formula::False => {}
        }
    }

    /// Named variables occurring anywhere in the formula.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut terms = Vec::new();
        self.terms(&mut terms);
        terms.iter().flat_map(Term::all_vars).collect()
    }

    /// Ground formulas may still contain `_`, which acts as a wildcard.
    pub fn is_ground(&self) -> bool {
        self.vars().is_empty()
    }

    pub fn is_temporal(&self) -> bool {
        match self {
            Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) | Formula::Never(_) => {
                true
            }
            Formula::Not(f) => f.is_temporal(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(Formula::is_temporal),
            // the arguments of viol are data, not operators evaluated here
            _ => false,
        }
    }

    pub fn to_term(&self) -> Term {
        let unary = |name: &str, f: &Formula| Term::compound(name, vec![f.to_term()]);
        let list = |fs: &[Formula]| Term::list(fs.iter().map(Formula::to_term).collect());
        match self {
            Formula::Fluent(t) => t.clone(),
            Formula::Happ(t) => Term::compound("happ", vec![t.clone()]),
            Formula::HappBy(a, t) => Term::compound("happ", vec![a.clone(), t.clone()]),
            Formula::Label(l) => Term::compound(LABEL_FUNCTOR, vec![Term::atom(l)]),
            Formula::Viol(c, e) => Term::compound("viol", vec![c.to_term(), e.to_term()]),
            Formula::Not(f) => unary("not", f),
            Formula::Next(f) => unary("next", f),
            Formula::Eventually(f) => unary("eventually", f),
            Formula::Always(f) => unary("always", f),
            Formula::Never(f) => unary("never", f),
            Formula::And(fs) => Term::compound("and", vec![list(fs)]),
            Formula::Or(fs) => Term::compound("or", vec![list(fs)]),
            Formula::True => Term::atom("true"),
            Formula::False => Term::atom("false"),
        }
    }

    /// Reads a formula stored as a term (e.g. inside an `exp_rule` fluent).
    /// `never(F)` is normalised to `always(not(F))`.
    pub fn from_term(term: &Term) -> Result<Formula, FormulaError> {
        let bad = || FormulaError::NotAFormula(term.to_string());
        let one = |args: &[Term]| Formula::from_term(&args[0]).map(Box::new);
        let junction = |name: &'static str, arg: &Term| -> Result<Vec<Formula>, FormulaError> {
            match arg {
                Term::Compound(f, items) if f == LIST_FUNCTOR => {
                    items.iter().map(Formula::from_term).collect()
                }
                Term::Atom(a) if a == LIST_FUNCTOR => Err(FormulaError::EmptyJunction(name)),
                _ => Err(bad()),
            }
        };
        match term {
            Term::Number(_) => Err(bad()),
            Term::Atom(a) if a == "true" => Ok(Formula::True),
            Term::Atom(a) if a == "false" => Ok(Formula::False),
            Term::Atom(a) if a == LIST_FUNCTOR => Err(bad()),
            Term::Atom(_) | Term::Var(_) => Ok(Formula::Fluent(term.clone())),
            Term::Compound(f, args) => match (f.as_str(), args.len()) {
                (LABEL_FUNCTOR, 1) => match &args[0] {
                    Term::Atom(l) => Ok(Formula::Label(l.clone())),
                    _ => Err(bad()),
                },
                ("happ", 1) => Ok(Formula::Happ(args[0].clone())),
                ("happ", 2) => Ok(Formula::HappBy(args[0].clone(), args[1].clone())),
                ("viol", 2) => Ok(Formula::Viol(one(args)?, one(&args[1..])?)),
                ("not", 1) => Ok(Formula::Not(one(args)?)),
                ("next", 1) => Ok(Formula::Next(one(args)?)),
                ("eventually", 1) => Ok(Formula::Eventually(one(args)?)),
                ("always", 1) => Ok(Formula::Always(one(args)?)),
                ("never", 1) => Ok(Formula::always(Formula::Not(one(args)?))),
                ("and", 1) => Ok(Formula::And(junction("and", &args[0])?)),
                ("or", 1) => Ok(Formula::Or(junction("or", &args[0])?)),
                (LIST_FUNCTOR, _)
                | (LABEL_FUNCTOR, _)
                | ("happ", _)
                | ("viol", _)
                | ("not", _)
                | ("next", _)
                | ("eventually", _)
                | ("always", _)
                | ("never", _)
                | ("and", _)
                | ("or", _) => Err(bad()),
                _ => Ok(Formula::Fluent(term.clone())),
            },
        }
    }

    /// Constant folding that preserves the finite-trace semantics: `next`
    /// keeps its operand, `eventually(false)` and `always(true)` stay
    /// unresolved.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::Never(f) => Formula::always(Formula::not((**f).clone())).simplify(),
            Formula::Not(f) => match f.simplify() {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                Formula::Not(inner) => *inner,
                other => Formula::not(other),
            },
            Formula::And(fs) => junction(fs.iter().map(Formula::simplify), true),
            Formula::Or(fs) => junction(fs.iter().map(Formula::simplify), false),
            Formula::Next(f) => Formula::next(f.simplify()),
            Formula::Eventually(f) => match f.simplify() {
                Formula::True => Formula::True,
                other => Formula::eventually(other),
            },
            Formula::Always(f) => match f.simplify() {
                Formula::False => Formula::False,
                other => Formula::always(other),
            },
            Formula::Viol(c, e) => Formula::viol(c.normalise(), e.normalise()),
            leaf => leaf.clone(),
        }
    }
}

/// Flattens, drops identities, short-circuits on the absorbing constant and
/// removes duplicate operands.
fn junction(parts: impl Iterator<Item = Formula>, conj: bool) -> Formula {
    let (unit, zero) = if conj {
        (Formula::True, Formula::False)
    } else {
        (Formula::False, Formula::True)
    };
    let mut out: Vec<Formula> = Vec::new();
    for part in parts {
        let flat = match part {
            Formula::And(fs) if conj => fs,
            Formula::Or(fs) if !conj => fs,
            other => vec![other],
        };
        for f in flat {
            if f == zero {
                return zero;
            }
            if f != unit && !out.contains(&f) {
                out.push(f);
            }
        }
    }
    match out.len() {
        0 => unit,
        1 => out.pop().unwrap(),
        _ if conj => Formula::And(out),
        _ => Formula::Or(out),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

fn any_match(pattern: &Term, ground: &BTreeSet<Term>) -> bool {
    ground.iter().any(|g| matches(pattern, g))
}

/// Truth of a non-temporal leaf in one observation.
fn leaf_holds(f: &Formula, obs: &StepObservation) -> Option<bool> {
    Some(match f {
        Formula::Fluent(t) => any_match(t, &obs.fluents),
        Formula::Happ(t) => any_match(t, &obs.events),
        Formula::HappBy(actor, action) => {
            let pattern = Term::compound(ACTION_EVENT, vec![actor.clone(), action.clone()]);
            any_match(&pattern, &obs.events)
        }
        Formula::Label(l) => &obs.label == l,
        Formula::Viol(c, e) => {
            let (c, e) = (c.normalise().to_term(), e.normalise().to_term());
            obs.violations
                .iter()
                .any(|(vc, ve)| matches(&c, &vc.to_term()) && matches(&e, &ve.to_term()))
        }
        Formula::True => true,
        Formula::False => false,
        _ => return None,
    })
}

/// Progresses a ground formula through one observation.
pub fn progress(f: &Formula, obs: &StepObservation) -> Result<Residual, FormulaError> {
    if !f.is_ground() {
        return Err(FormulaError::NotGround(f.to_string()));
    }
    // A residual that folds to a constant still talks about the next tick,
    // so it stays pending. Only constants written under `next` get here.
    Ok(match step(f, obs) {
        Residual::Pending(r) => Residual::Pending(r.simplify()),
        done => done,
    })
}

fn step(f: &Formula, obs: &StepObservation) -> Residual {
    if let Some(b) = leaf_holds(f, obs) {
        return Residual::from_bool(b);
    }
    match f {
        Formula::Not(g) => match step(g, obs) {
            Residual::True => Residual::False,
            Residual::False => Residual::True,
            Residual::Pending(r) => Residual::Pending(Formula::not(r)),
        },
        Formula::And(fs) => combine(fs.iter().map(|g| step(g, obs)), true),
        Formula::Or(fs) => combine(fs.iter().map(|g| step(g, obs)), false),
        Formula::Next(g) => Residual::Pending((**g).clone()),
        Formula::Eventually(g) => match step(g, obs) {
            Residual::True => Residual::True,
            Residual::False => Residual::Pending(f.clone()),
            Residual::Pending(r) => Residual::Pending(junction([r, f.clone()].into_iter(), false)),
        },
        Formula::Always(g) => match step(g, obs) {
            Residual::False => Residual::False,
            Residual::True => Residual::Pending(f.clone()),
            Residual::Pending(r) => Residual::Pending(junction([r, f.clone()].into_iter(), true)),
        },
        Formula::Never(g) => step(&Formula::always(Formula::not((**g).clone())), obs),
        _ => unreachable!("leaves are handled above"),
    }
}

fn combine(parts: impl Iterator<Item = Residual>, conj: bool) -> Residual {
    let mut pending = Vec::new();
    for part in parts {
        match (part, conj) {
            (Residual::False, true) => return Residual::False,
            (Residual::True, false) => return Residual::True,
            (Residual::Pending(r), _) => pending.push(r),
            _ => {}
        }
    }
    match pending.len() {
        0 => Residual::from_bool(conj),
        1 => Residual::Pending(pending.pop().unwrap()),
        _ if conj => Residual::Pending(Formula::And(pending)),
        _ => Residual::Pending(Formula::Or(pending)),
    }
}

/// Evaluates a formula at position 0 of a finite trace. Positions past the
/// end are unknown, so `eventually` can only become true and `always` can
/// only become false.
pub fn trace_eval(f: &Formula, trace: &[StepObservation]) -> Verdict {
    eval_at(f, trace, 0)
}

fn eval_at(f: &Formula, trace: &[StepObservation], i: usize) -> Verdict {
    let Some(obs) = trace.get(i) else {
        return Verdict::Unknown;
    };
    if let Some(b) = leaf_holds(f, obs) {
        return Verdict::from_bool(b);
    }
    match f {
        Formula::Not(g) => eval_at(g, trace, i).negate(),
        Formula::And(fs) => {
            let vs: Vec<_> = fs.iter().map(|g| eval_at(g, trace, i)).collect();
            if vs.contains(&Verdict::False) {
                Verdict::False
            } else if vs.contains(&Verdict::Unknown) {
                Verdict::Unknown
            } else {
                Verdict::True
            }
        }
        Formula::Or(fs) => {
            let vs: Vec<_> = fs.iter().map(|g| eval_at(g, trace, i)).collect();
            if vs.contains(&Verdict::True) {
                Verdict::True
            } else if vs.contains(&Verdict::Unknown) {
                Verdict::Unknown
            } else {
                Verdict::False
            }
        }
        Formula::Next(g) => eval_at(g, trace, i + 1),
        Formula::Eventually(g) => {
            if (i..trace.len()).any(|j| eval_at(g, trace, j) == Verdict::True) {
                Verdict::True
            } else {
                Verdict::Unknown
            }
        }
        Formula::Always(g) => {
            if (i..trace.len()).any(|j| eval_at(g, trace, j) == Verdict::False) {
                Verdict::False
            } else {
                Verdict::Unknown
            }
        }
        Formula::Never(g) => eval_at(&Formula::always(Formula::not((**g).clone())), trace, i),
        _ => unreachable!("leaves are handled above"),
    }
}

/// Runs progression along a trace, stopping at the first resolution.
pub fn progress_along(f: &Formula, trace: &[StepObservation]) -> Result<Residual, FormulaError> {
    let mut current = f.clone();
    for obs in trace {
        match progress(&current, obs)? {
            Residual::Pending(r) => current = r,
            done => return Ok(done),
        }
    }
    Ok(Residual::Pending(current))
}
