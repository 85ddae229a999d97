//! Discrete Event Calculus.
//!
//! The engine keeps a narrative of event sets, one per tick, and the state
//! sequence those events induce. Effect rules are evaluated against the
//! state at the tick of the event; the next state is
//!
//! ```text
//! S(t+1) = (S(t) \ Terminated(t)) ∪ Initiated(t)
//! ```
//!
//! so a fluent that is both terminated and initiated at `t` holds at `t+1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::term::{eval_arith, match_into, match_term, ArithError, Substitution, Term};

pub type Tick = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EffectKind {
    Initiates,
    Terminates,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BodyAtom {
    HoldsAt(Term),
    /// Negation as failure; variables unbound at this point are existential.
    NotHolds(Term),
    Is(String, Term),
    /// Binds a variable to a named scenario constant.
    Const(String, String),
}

impl fmt::Display for BodyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyAtom::HoldsAt(t) => write!(f, "holds_at({t})"),
            BodyAtom::NotHolds(t) => write!(f, "not_holds({t})"),
            BodyAtom::Is(v, e) => write!(f, "is({v},{e})"),
            BodyAtom::Const(n, v) => write!(f, "const({n},{v})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EffectRule {
    pub name: String,
    pub kind: EffectKind,
    pub event: Term,
    pub fluent: Term,
    pub body: Vec<BodyAtom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unsafe rule {rule}: {detail}")]
    Unsafe { rule: String, detail: String },
    #[error("error in {rule}: {detail}")]
    Rule { rule: String, detail: String },
    #[error("{what} is not ground: {term}")]
    NonGround { what: &'static str, term: Term },
    #[error("tick {requested} is out of range (current tick is {now})")]
    TimeOutOfRange { requested: Tick, now: Tick },
    #[error("initial fluents can only be set before the first step")]
    AlreadyStarted,
    #[error("unknown step label {0}")]
    UnknownLabel(String),
}

impl EffectRule {
    /// Builds a rule, checking that every named variable of the fluent is
    /// bound by the event pattern or the body, and that `is/2` only reads
    /// bound variables.
    pub fn new(
        kind: EffectKind,
        event: Term,
        fluent: Term,
        body: Vec<BodyAtom>,
    ) -> Result<Self, EngineError> {
        let mut rule = EffectRule {
            name: String::new(),
            kind,
            event,
            fluent,
            body,
        };
        rule.name = rule.to_string();
        rule.check_safety()?;
        Ok(rule)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn check_safety(&self) -> Result<(), EngineError> {
        let unsafe_rule = |detail: String| EngineError::Unsafe {
            rule: self.name.clone(),
            detail,
        };
        let mut bound = self.event.vars();
        for atom in &self.body {
            match atom {
                BodyAtom::HoldsAt(t) => bound.extend(t.vars()),
                BodyAtom::NotHolds(_) => {}
                BodyAtom::Is(v, e) => {
                    if let Some(free) = e.vars().difference(&bound).next() {
                        return Err(unsafe_rule(format!(
                            "variable {free} is used in is/2 before it is bound"
                        )));
                    }
                    bound.insert(v.clone());
                }
                BodyAtom::Const(_, v) => {
                    bound.insert(v.clone());
                }
            }
        }
        if let Some(free) = self.fluent.vars().difference(&bound).next() {
            return Err(unsafe_rule(format!(
                "variable {free} in the fluent is never bound"
            )));
        }
        if self.kind == EffectKind::Initiates && self.fluent.has_anonymous() {
            return Err(unsafe_rule("an initiated fluent cannot contain `_`".into()));
        }
        Ok(())
    }
}

impl fmt::Display for EffectRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = match self.kind {
            EffectKind::Initiates => "initiates",
            EffectKind::Terminates => "terminates",
        };
        write!(f, "{head}({},{})", self.event, self.fluent)?;
        for (i, atom) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{atom}")?;
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub time: Tick,
    pub label: String,
    pub fluents: BTreeSet<Term>,
}

/// Effects of one step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepDelta {
    pub initiated: BTreeSet<Term>,
    pub terminated: BTreeSet<Term>,
    /// Fluents that hold at t+1 but not at t.
    pub added: BTreeSet<Term>,
    /// Fluents that hold at t but not at t+1.
    pub removed: BTreeSet<Term>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    rules: Vec<EffectRule>,
    constants: BTreeMap<String, i64>,
    labels: Option<BTreeSet<String>>,
    states: Vec<State>,
    // events[t] are the events that happened at tick t; len = states.len() - 1
    events: Vec<BTreeSet<Term>>,
}

impl Engine {
    pub fn new(rules: Vec<EffectRule>, initial_label: impl Into<String>) -> Self {
        Engine {
            rules,
            constants: BTreeMap::new(),
            labels: None,
            states: vec![State {
                time: 0,
                label: initial_label.into(),
                fluents: BTreeSet::new(),
            }],
            events: Vec::new(),
        }
    }

    /// Restricts step labels to the given set (the initial label is always
    /// accepted).
    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        set.insert(self.states[0].label.clone());
        self.labels = Some(set);
        self
    }

    pub fn set_constant(&mut self, name: impl Into<String>, value: i64) {
        self.constants.insert(name.into(), value);
    }

    pub fn constant(&self, name: &str) -> Option<i64> {
        self.constants.get(name).copied()
    }

    pub fn rules(&self) -> &[EffectRule] {
        &self.rules
    }

    pub fn now(&self) -> Tick {
        self.states.len() as Tick - 1
    }

    pub fn current(&self) -> &State {
        self.states.last().expect("state 0 always exists")
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, t: Tick) -> Result<&State, EngineError> {
        self.states
            .get(t as usize)
            .ok_or(EngineError::TimeOutOfRange {
                requested: t,
                now: self.now(),
            })
    }

    /// Events recorded at tick `t`; empty for the current tick.
    pub fn events_at(&self, t: Tick) -> Result<&BTreeSet<Term>, EngineError> {
        static EMPTY: BTreeSet<Term> = BTreeSet::new();
        self.state(t)?;
        Ok(self.events.get(t as usize).unwrap_or(&EMPTY))
    }

    pub fn initially<I>(&mut self, fluents: I) -> Result<(), EngineError>
    where
        I: IntoIterator<Item = Term>,
    {
        if self.now() != 0 {
            return Err(EngineError::AlreadyStarted);
        }
        let mut set = BTreeSet::new();
        for f in fluents {
            if !f.is_ground() {
                return Err(EngineError::NonGround {
                    what: "initial fluent",
                    term: f,
                });
            }
            set.insert(f);
        }
        self.states[0].fluents = set;
        Ok(())
    }

    /// Initiated and terminated fluents for `events` happening in `state`.
    pub fn effects(
        &self,
        state: &BTreeSet<Term>,
        events: &BTreeSet<Term>,
    ) -> Result<(BTreeSet<Term>, BTreeSet<Term>), EngineError> {
        let mut initiated = BTreeSet::new();
        let mut terminated = BTreeSet::new();
        for rule in &self.rules {
            for event in events {
                let Some(start) = match_term(&rule.event, event) else {
                    continue;
                };
                for s in self.solve(rule, &rule.body, start, state)? {
                    let fluent = rule.fluent.apply(&s);
                    match rule.kind {
                        EffectKind::Initiates => {
                            if !fluent.is_ground() {
                                return Err(EngineError::Rule {
                                    rule: rule.name.clone(),
                                    detail: format!("initiated fluent {fluent} is not ground"),
                                });
                            }
                            initiated.insert(fluent);
                        }
                        EffectKind::Terminates => {
                            if !fluent.vars().is_empty() {
                                return Err(EngineError::Rule {
                                    rule: rule.name.clone(),
                                    detail: format!(
                                        "terminated fluent {fluent} has unbound variables"
                                    ),
                                });
                            }
                            // `_` in a terminated fluent ends every match
                            terminated.extend(
                                state
                                    .iter()
                                    .filter(|g| match_term(&fluent, g).is_some())
                                    .cloned(),
                            );
                        }
                    }
                }
            }
        }
        Ok((initiated, terminated))
    }

    /// Evaluates body atoms left to right; each complete solution is one
    /// grounding of the rule.
    fn solve(
        &self,
        rule: &EffectRule,
        body: &[BodyAtom],
        subst: Substitution,
        state: &BTreeSet<Term>,
    ) -> Result<Vec<Substitution>, EngineError> {
        let Some((first, rest)) = body.split_first() else {
            return Ok(vec![subst]);
        };
        let rule_err = |e: ArithError| EngineError::Rule {
            rule: rule.name.clone(),
            detail: e.to_string(),
        };
        let mut next = Vec::new();
        match first {
            BodyAtom::HoldsAt(pattern) => {
                for fluent in state {
                    let mut s = subst.clone();
                    if match_into(pattern, fluent, &mut s) {
                        next.push(s);
                    }
                }
            }
            BodyAtom::NotHolds(pattern) => {
                let pattern = pattern.apply(&subst);
                if !state.iter().any(|g| match_term(&pattern, g).is_some()) {
                    next.push(subst);
                }
            }
            BodyAtom::Is(var, expr) => {
                let value = Term::Number(eval_arith(expr, &subst).map_err(rule_err)?);
                let mut s = subst;
                if bind_or_compare(&mut s, var, value) {
                    next.push(s);
                }
            }
            BodyAtom::Const(name, var) => {
                let value = self.constants.get(name).ok_or_else(|| EngineError::Rule {
                    rule: rule.name.clone(),
                    detail: format!("unknown constant {name}"),
                })?;
                let mut s = subst;
                if bind_or_compare(&mut s, var, Term::Number(*value)) {
                    next.push(s);
                }
            }
        }
        let mut out = Vec::new();
        for s in next {
            out.extend(self.solve(rule, rest, s, state)?);
        }
        Ok(out)
    }

    /// Applies `events` at the current tick and moves to the next state.
    pub fn step<I>(&mut self, events: I, next_label: &str) -> Result<StepDelta, EngineError>
    where
        I: IntoIterator<Item = Term>,
    {
        if let Some(labels) = &self.labels {
            if !labels.contains(next_label) {
                return Err(EngineError::UnknownLabel(next_label.to_string()));
            }
        }
        let mut set = BTreeSet::new();
        for e in events {
            if !e.is_ground() {
                return Err(EngineError::NonGround {
                    what: "event",
                    term: e,
                });
            }
            set.insert(e);
        }
        let current = &self.current().fluents;
        let (initiated, terminated) = self.effects(current, &set)?;
        let mut next: BTreeSet<Term> = current.difference(&terminated).cloned().collect();
        next.extend(initiated.iter().cloned());
        let delta = StepDelta {
            added: next.difference(current).cloned().collect(),
            removed: current.difference(&next).cloned().collect(),
            initiated,
            terminated,
        };
        let time = self.now() + 1;
        self.events.push(set);
        self.states.push(State {
            time,
            label: next_label.to_string(),
            fluents: next,
        });
        Ok(delta)
    }

    /// One substitution per distinct way `pattern` matches a fluent at `t`.
    pub fn holds_at(&self, pattern: &Term, t: Tick) -> Result<Vec<Substitution>, EngineError> {
        Ok(collect_matches(pattern, &self.state(t)?.fluents))
    }

    pub fn happened(&self, pattern: &Term, t: Tick) -> Result<Vec<Substitution>, EngineError> {
        Ok(collect_matches(pattern, self.events_at(t)?))
    }
}

fn bind_or_compare(s: &mut Substitution, var: &str, value: Term) -> bool {
    match s.get(var) {
        Some(bound) => *bound == value,
        None => {
            s.bind(var, value);
            true
        }
    }
}

fn collect_matches(pattern: &Term, ground: &BTreeSet<Term>) -> Vec<Substitution> {
    ground
        .iter()
        .filter_map(|g| match_term(pattern, g))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
