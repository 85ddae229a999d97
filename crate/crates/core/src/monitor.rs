//! Expectation monitoring.
//!
//! An `exp_rule(Cond, Exp)` fluent fires for every substitution that makes
//! `Cond` true at the current observation. Each firing instantiates `Exp`
//! as an active expectation, which is then progressed once per tick until
//! it is fulfilled or violated.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::engine::Tick;
use crate::formula::{progress, Formula, FormulaError, Residual, StepObservation, ACTION_EVENT};
use crate::term::{match_into, match_term, Substitution, Term};

pub const EXP_RULE_FUNCTOR: &str = "exp_rule";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("not an exp_rule fluent: {0}")]
    NotExpRule(String),
    #[error("unsafe expectation rule {rule}: {detail}")]
    Unsafe { rule: String, detail: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpRule {
    pub cond: Formula,
    pub exp: Formula,
}

impl ExpRule {
    /// The condition must be non-temporal and bind every variable that the
    /// expectation uses.
    pub fn new(cond: Formula, exp: Formula) -> Result<Self, MonitorError> {
        let rule = ExpRule {
            cond: cond.normalise(),
            exp: exp.normalise(),
        };
        let unsafe_rule = |detail: String| MonitorError::Unsafe {
            rule: rule.to_string(),
            detail,
        };
        if rule.cond.is_temporal() {
            return Err(unsafe_rule("the condition uses a temporal operator".into()));
        }
        let bound = bound_vars(&rule.cond);
        if let Some(v) = rule.exp.vars().difference(&bound).next() {
            return Err(unsafe_rule(format!(
                "variable {v} of the expectation is not bound by the condition"
            )));
        }
        Ok(rule)
    }

    pub fn from_fluent(term: &Term) -> Result<Self, MonitorError> {
        match term {
            Term::Compound(f, args) if f == EXP_RULE_FUNCTOR && args.len() == 2 => {
                ExpRule::new(Formula::from_term(&args[0])?, Formula::from_term(&args[1])?)
            }
            _ => Err(MonitorError::NotExpRule(term.to_string())),
        }
    }

    pub fn to_term(&self) -> Term {
        Term::compound(
            EXP_RULE_FUNCTOR,
            vec![self.cond.to_term(), self.exp.to_term()],
        )
    }

    /// Every substitution under which the condition holds at `obs`.
    pub fn groundings(&self, obs: &StepObservation) -> Vec<Substitution> {
        let found: BTreeSet<Substitution> = solve(&self.cond, obs, Substitution::new())
            .into_iter()
            .collect();
        found.into_iter().collect()
    }
}

impl fmt::Display for ExpRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// Variables a condition binds whenever it holds.
fn bound_vars(f: &Formula) -> BTreeSet<String> {
    match f {
        Formula::And(fs) => fs.iter().flat_map(bound_vars).collect(),
        Formula::Or(fs) => {
            let mut sets = fs.iter().map(bound_vars);
            let first = sets.next().unwrap_or_default();
            sets.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
        }
        Formula::Not(_) => BTreeSet::new(),
        other => other.vars(),
    }
}

fn solve(f: &Formula, obs: &StepObservation, s: Substitution) -> Vec<Substitution> {
    let against = |pattern: &Term, ground: &BTreeSet<Term>| -> Vec<Substitution> {
        ground
            .iter()
            .filter_map(|g| {
                let mut next = s.clone();
                match_into(pattern, g, &mut next).then_some(next)
            })
            .collect()
    };
    match f {
        Formula::Fluent(p) => against(p, &obs.fluents),
        Formula::Happ(p) => against(p, &obs.events),
        Formula::HappBy(a, act) => against(
            &Term::compound(ACTION_EVENT, vec![a.clone(), act.clone()]),
            &obs.events,
        ),
        Formula::Label(l) => {
            if *l == obs.label {
                vec![s]
            } else {
                vec![]
            }
        }
        Formula::Viol(c, e) => {
            let (c, e) = (c.normalise().to_term(), e.normalise().to_term());
            obs.violations
                .iter()
                .filter_map(|(vc, ve)| {
                    let mut next = s.clone();
                    (match_into(&c, &vc.to_term(), &mut next)
                        && match_into(&e, &ve.to_term(), &mut next))
                    .then_some(next)
                })
                .collect()
        }
        Formula::And(fs) => fs.iter().fold(vec![s.clone()], |acc, g| {
            acc.into_iter().flat_map(|s| solve(g, obs, s)).collect()
        }),
        Formula::Or(fs) => fs.iter().flat_map(|g| solve(g, obs, s.clone())).collect(),
        Formula::Not(g) => {
            if solve(&g.apply(&s), obs, s.clone()).is_empty() {
                vec![s]
            } else {
                vec![]
            }
        }
        Formula::True => vec![s],
        Formula::False => vec![],
        Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) | Formula::Never(_) => {
            unreachable!("conditions are checked to be non-temporal")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveExpectation {
    /// Unique per monitor; lets callers follow one instance across ticks.
    pub id: u64,
    pub rule: ExpRule,
    pub grounding: Substitution,
    pub residual: Formula,
    pub activated_at: Tick,
    pub cond_instance: Formula,
    pub exp_instance: Formula,
}

impl ActiveExpectation {
    /// The `exp(..)` fluent view of the current residual.
    pub fn to_term(&self) -> Term {
        Term::compound("exp", vec![self.residual.to_term()])
    }

    fn key(&self) -> (&ExpRule, &Substitution, &Formula) {
        (&self.rule, &self.grounding, &self.residual)
    }
}

/// A resolved expectation reported as its instantiated condition and
/// expectation.
pub type Outcome = (Formula, Formula);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonitorOutput {
    pub activated: Vec<ActiveExpectation>,
    pub fulfilments: Vec<Outcome>,
    pub violations: Vec<Outcome>,
    pub fulfilled: Vec<ActiveExpectation>,
    pub violated: Vec<ActiveExpectation>,
    pub surviving: Vec<ActiveExpectation>,
}

impl MonitorOutput {
    /// `fulf(C,E)` and `viol(C,E)` events for the next tick.
    pub fn events(&self) -> Vec<Term> {
        let ev =
            |name: &str, (c, e): &Outcome| Term::compound(name, vec![c.to_term(), e.to_term()]);
        self.fulfilments
            .iter()
            .map(|o| ev("fulf", o))
            .chain(self.violations.iter().map(|o| ev("viol", o)))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Monitor {
    active: Vec<ActiveExpectation>,
    fresh: Vec<ActiveExpectation>,
    next_id: u64,
}

impl Monitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self) -> &[ActiveExpectation] {
        &self.active
    }

    /// Fires every rule against `obs`, adding instances that are not already
    /// active. Can be called before `tick` so that expectations created at
    /// this step are visible to `expected_instances`.
    pub fn activate(
        &mut self,
        obs: &StepObservation,
        rules: &[ExpRule],
        tick: Tick,
    ) -> Result<(), MonitorError> {
        for rule in rules {
            for grounding in rule.groundings(obs) {
                let exp_instance = rule.exp.apply(&grounding);
                if !exp_instance.is_ground() {
                    return Err(FormulaError::NotGround(exp_instance.to_string()).into());
                }
                let candidate = ActiveExpectation {
                    id: self.next_id,
                    rule: rule.clone(),
                    cond_instance: rule.cond.apply(&grounding),
                    residual: exp_instance.clone(),
                    exp_instance,
                    grounding,
                    activated_at: tick,
                };
                if self.active.iter().any(|a| a.key() == candidate.key()) {
                    continue;
                }
                self.next_id += 1;
                self.fresh.push(candidate.clone());
                self.active.push(candidate);
            }
        }
        Ok(())
    }

    /// Activates, then progresses every active expectation through `obs`.
    pub fn tick(
        &mut self,
        obs: &StepObservation,
        rules: &[ExpRule],
        tick: Tick,
    ) -> Result<MonitorOutput, MonitorError> {
        self.activate(obs, rules, tick)?;
        let mut out = MonitorOutput {
            activated: std::mem::take(&mut self.fresh),
            ..MonitorOutput::default()
        };
        for mut e in std::mem::take(&mut self.active) {
            match progress(&e.residual, obs)? {
                Residual::True => {
                    out.fulfilments
                        .push((e.cond_instance.clone(), e.exp_instance.clone()));
                    out.fulfilled.push(e);
                }
                Residual::False => {
                    out.violations
                        .push((e.cond_instance.clone(), e.exp_instance.clone()));
                    out.violated.push(e);
                }
                Residual::Pending(r) => {
                    e.residual = r;
                    // progression can make two instances identical
                    if !out.surviving.iter().any(|s| s.key() == e.key()) {
                        out.surviving.push(e);
                    }
                }
            }
        }
        self.active = out.surviving.clone();
        Ok(out)
    }

    /// Matches `pattern` against the atoms that active expectations require
    /// to be true (atoms under an odd number of negations are skipped).
    pub fn expected_instances(&self, pattern: &Formula) -> BTreeSet<Substitution> {
        let pattern = pattern.normalise().to_term();
        let mut leaves = Vec::new();
        for e in &self.active {
            positive_leaves(&e.residual, true, &mut leaves);
        }
        leaves
            .iter()
            .filter_map(|leaf| match_term(&pattern, &leaf.to_term()))
            .collect()
    }
}

fn positive_leaves<'a>(f: &'a Formula, positive: bool, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::Not(g) => positive_leaves(g, !positive, out),
        Formula::Next(g) | Formula::Eventually(g) | Formula::Always(g) => {
            positive_leaves(g, positive, out)
        }
        Formula::Never(g) => positive_leaves(g, !positive, out),
        Formula::And(fs) | Formula::Or(fs) => {
            fs.iter().for_each(|g| positive_leaves(g, positive, out))
        }
        Formula::True | Formula::False => {}
        leaf => {
            if positive {
                out.push(leaf)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_formula, parse_term};
    use proptest::prelude::*;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }
    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }
    fn rule(s: &str) -> ExpRule {
        ExpRule::from_fluent(&t(s)).unwrap()
    }

    fn compensation_rule() -> ExpRule {
        rule("exp_rule(damage(A,_), not(happ(compensate(A,_))))")
    }

    #[test]
    fn no_compensation_is_fulfilled() {
        let mut m = Monitor::new();
        let obs = StepObservation::new("tax_compensate").with_fluent(t("damage(c1,100)"));
        let out = m.tick(&obs, &[compensation_rule()], 4).unwrap();
        assert_eq!(out.activated.len(), 1);
        assert_eq!(
            out.activated[0].grounding,
            Substitution::new().with("A", "c1")
        );
        assert_eq!(
            out.fulfilments,
            vec![(f("damage(c1,_)"), f("not(happ(compensate(c1,_)))"))]
        );
        assert!(out.violations.is_empty() && out.surviving.is_empty());
    }

    #[test]
    fn compensation_is_a_violation() {
        let mut m = Monitor::new();
        let obs = StepObservation::new("tax_compensate")
            .with_fluent(t("damage(c1,100)"))
            .with_event(t("compensate(c1,100)"));
        let out = m.tick(&obs, &[compensation_rule()], 4).unwrap();
        assert_eq!(
            out.violations,
            vec![(f("damage(c1,_)"), f("not(happ(compensate(c1,_)))"))]
        );
        assert_eq!(
            out.events(),
            vec![t("viol(damage(c1,_),not(happ(compensate(c1,_))))")]
        );
    }

    #[test]
    fn norm_is_violated_on_the_plain() {
        let mut m = Monitor::new();
        let r = rule("exp_rule(member(A,citizens), never(location(A,plain)))");
        let obs = StepObservation::new("choose_location")
            .with_fluent(t("member(c1,citizens)"))
            .with_fluent(t("location(c1,plain)"));
        let out = m.tick(&obs, &[r], 2).unwrap();
        assert_eq!(out.violations.len(), 1);
        assert_eq!(out.violations[0].0, f("member(c1,citizens)"));
        assert_eq!(out.violations[0].1, f("always(not(location(c1,plain)))"));
    }

    #[test]
    fn expected_instances_reads_residual_atoms() {
        let mut m = Monitor::new();
        assert!(m.expected_instances(&f("location(A,L)")).is_empty());
        let r = rule(
            "exp_rule(and([member(A,citizens), @choose_location]), next(location(A,plateau)))",
        );
        let obs = StepObservation::new("choose_location")
            .with_fluent(t("member(c1,citizens)"))
            .with_fluent(t("member(c2,citizens)"));
        m.activate(&obs, &[r], 2).unwrap();
        let found = m.expected_instances(&f("location(A,L)"));
        assert_eq!(
            found,
            BTreeSet::from([
                Substitution::new().with("A", "c1").with("L", "plateau"),
                Substitution::new().with("A", "c2").with("L", "plateau"),
            ])
        );
        assert!(m.expected_instances(&f("location(c1,plain)")).is_empty());
    }

    #[test]
    fn negated_atoms_are_not_expected() {
        let mut m = Monitor::new();
        let r = rule("exp_rule(member(A,citizens), never(location(A,plain)))");
        let obs = StepObservation::new("x").with_fluent(t("member(c1,citizens)"));
        m.activate(&obs, &[r], 0).unwrap();
        assert!(m.expected_instances(&f("location(A,L)")).is_empty());
    }

    #[test]
    fn pending_expectations_are_not_duplicated() {
        let mut m = Monitor::new();
        let r = rule("exp_rule(member(A,citizens), never(location(A,plain)))");
        let obs = StepObservation::new("x")
            .with_fluent(t("member(c1,citizens)"))
            .with_fluent(t("location(c1,plateau)"));
        let first = m.tick(&obs, std::slice::from_ref(&r), 0).unwrap();
        assert_eq!(first.activated.len(), 1);
        for tick in 1..5 {
            let out = m.tick(&obs, std::slice::from_ref(&r), tick).unwrap();
            assert!(out.activated.is_empty());
            assert_eq!(out.surviving.len(), 1);
        }
    }

    #[test]
    fn immediate_expectations_refire_each_tick() {
        let mut m = Monitor::new();
        let obs = StepObservation::new("x").with_fluent(t("damage(c1,100)"));
        let total: usize = (0..3)
            .map(|tick| {
                m.tick(&obs, &[compensation_rule()], tick)
                    .unwrap()
                    .fulfilments
                    .len()
            })
            .sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn violation_conditions() {
        let mut m = Monitor::new();
        let r =
            rule("exp_rule(viol(member(A,citizens), never(location(A,plain))), happ(punish(A)))");
        let obs = StepObservation::new("x")
            .with_violation(
                f("member(c1,citizens)"),
                f("never(location(c1,plain))").normalise(),
            )
            .with_event(t("punish(c1)"));
        let out = m.tick(&obs, &[r], 3).unwrap();
        assert_eq!(out.activated.len(), 1);
        assert_eq!(
            out.activated[0].grounding,
            Substitution::new().with("A", "c1")
        );
        assert_eq!(out.fulfilments.len(), 1);
    }

    #[test]
    fn unsafe_and_temporal_rules_are_rejected() {
        let err = ExpRule::from_fluent(&t("exp_rule(member(A,citizens), location(B,plain))"));
        assert!(
            matches!(err, Err(MonitorError::Unsafe { ref detail, .. }) if detail.contains('B'))
        );
        let err = ExpRule::from_fluent(&t("exp_rule(next(p), q)"));
        assert!(matches!(err, Err(MonitorError::Unsafe { .. })));
        let err = ExpRule::from_fluent(&t("exp_rule(not(p(A)), q(A))"));
        assert!(matches!(err, Err(MonitorError::Unsafe { .. })));
        let err = ExpRule::from_fluent(&t("exp_rule(or([p(A), r(B)]), q(A))"));
        assert!(matches!(err, Err(MonitorError::Unsafe { .. })));
        ExpRule::from_fluent(&t("exp_rule(or([p(A), r(A)]), q(A))")).unwrap();
        assert!(matches!(
            ExpRule::from_fluent(&t("rule(p,q)")),
            Err(MonitorError::NotExpRule(_))
        ));
    }

    #[test]
    fn conditions_join_and_negate() {
        let r = rule(
            "exp_rule(and([member(A,citizens), not(location(A,plain)), happ(B,go(A))]), q(A,B))",
        );
        let obs = StepObservation::new("x")
            .with_fluent(t("member(c1,citizens)"))
            .with_fluent(t("member(c2,citizens)"))
            .with_fluent(t("location(c2,plain)"))
            .with_event(t("does(gov,go(c1))"))
            .with_event(t("does(gov,go(c2))"));
        assert_eq!(
            r.groundings(&obs),
            vec![Substitution::new().with("A", "c1").with("B", "gov")]
        );
    }

    // Random runs of a fixed rule set over random observations.
    fn observation() -> impl Strategy<Value = StepObservation> {
        (any::<[bool; 4]>(), 0..2usize).prop_map(|(bits, label)| {
            let mut o = StepObservation::new(["a", "b"][label]);
            let atoms = ["p(c1)", "p(c2)", "q(c1)", "e(c2)"];
            for (i, on) in bits.iter().enumerate() {
                if *on {
                    let term = parse_term(atoms[i]).unwrap();
                    if i == 3 {
                        o.events.insert(term);
                    } else {
                        o.fluents.insert(term);
                    }
                }
            }
            o
        })
    }

    fn rules() -> Vec<ExpRule> {
        [
            "exp_rule(p(A), eventually(q(A)))",
            "exp_rule(p(A), not(happ(e(A))))",
            "exp_rule(and([p(A), @a]), next(q(A)))",
            "exp_rule(p(A), never(q(A)))",
        ]
        .iter()
        .map(|s| rule(s))
        .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn every_instance_is_classified_once(trace in prop::collection::vec(observation(), 1..12)) {
            let mut m = Monitor::new();
            let rules = rules();
            let mut resolved = BTreeSet::new();
            for (tick, obs) in trace.iter().enumerate() {
                let before: Vec<ActiveExpectation> = m.active().to_vec();
                let out = m.tick(obs, &rules, tick as u64).unwrap();
                let during: Vec<&ActiveExpectation> = before.iter().chain(&out.activated).collect();
                let mut seen = BTreeSet::new();
                for e in out.fulfilled.iter().chain(&out.violated).chain(&out.surviving) {
                    prop_assert!(seen.insert(e.id), "classified twice");
                }
                for e in out.fulfilled.iter().chain(&out.violated) {
                    prop_assert!(resolved.insert(e.id), "resolved on two ticks");
                }
                for e in during {
                    // an instance whose residual became identical to a
                    // surviving one is absorbed by it
                    let absorbed = out.surviving.iter().any(|s| {
                        s.rule == e.rule && s.grounding == e.grounding && s.id != e.id
                    });
                    prop_assert!(seen.contains(&e.id) || absorbed);
                }
                prop_assert!(out.surviving.iter().all(|e| e.residual.is_ground()));
            }
        }

        #[test]
        fn active_set_has_no_duplicates(trace in prop::collection::vec(observation(), 1..12)) {
            let mut m = Monitor::new();
            let rules = rules();
            for (tick, obs) in trace.iter().enumerate() {
                m.tick(obs, &rules, tick as u64).unwrap();
                let keys: BTreeSet<_> = m.active().iter().map(|e| e.key()).collect();
                prop_assert_eq!(keys.len(), m.active().len());
            }
        }
    }
}
