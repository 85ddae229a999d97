//! The plain/plateau settlement: citizens choose where to live, floods
//! damage houses on the plain, and a government may tax and compensate.
//!
//! Each round runs six labelled ticks; tick 0 (`init`) carries the join
//! events. Citizens decide from the expectations that are active when the
//! tick starts, so choices within a tick are simultaneous.

mod config;
mod trace;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{Engine, EngineError, Tick};
use crate::formula::{Formula, StepObservation};
use crate::monitor::{ExpRule, Monitor, MonitorError, MonitorOutput, EXP_RULE_FUNCTOR};
use crate::syntax::{parse_rules, parse_term, ParseError};
use crate::term::{match_term, Term};

pub use config::{
    ConfigError, GameId, Overrides, Probability, PunishmentTiming, Regime, ScenarioConfig, Variant,
    VariantConfig, DEFAULT_CONFIG, LOCATIONS,
};
pub use trace::{
    to_json_lines, Activation, Aggregate, Decision, DecisionSource, OutcomeRecord, Summary,
    TraceRecord,
};

pub const RULES: &str = include_str!("../../rules/plain_plateau.ec");

pub const INIT_LABEL: &str = "init";
pub const LABELS: [&str; 6] = [
    "receive_income",
    "choose_location",
    "flood",
    "tax_compensate",
    "repair",
    "consume",
];

pub const GOVERNMENT: &str = "government_agent";
pub const CITIZENS: &str = "citizens";
pub const PLAIN_ROLE: &str = "citizens_plaindwellerrole";
pub const PLATEAU_ROLE: &str = "citizens_plateaudwellerrole";

/// The no-compensation rule announced by a rule-based government.
pub const NO_COMPENSATION_RULE: &str = "exp_rule(damage(A,_), not(happ(compensate(A,_))))";
pub const NORM_RULE: &str = "exp_rule(member(A,citizens), never(location(A,plain)))";
pub const TEAM_RULE: &str = "exp_rule(and([member(Ag,citizens,Role), game(citizens,G), \
     team_optimal(Role,G,Act), @choose_location]), happ(Ag,Act))";

pub fn punishment_rule(timing: PunishmentTiming) -> String {
    let exp = match timing {
        PunishmentTiming::SameTick => "happ(punish(A))",
        PunishmentTiming::Eventually => "eventually(happ(punish(A)))",
    };
    format!("exp_rule(viol(member(A,citizens), never(location(A,plain))), {exp})")
}

/// Expectation that every citizen is at `location` after choosing.
pub fn location_rule(location: &str) -> String {
    format!("exp_rule(and([member(A,citizens), @choose_location]), next(location(A,{location})))")
}

fn citizen_location_rule(citizen: &str, location: &str) -> String {
    format!(
        "exp_rule(and([member({citizen},citizens), @choose_location]), next(location({citizen},{location})))"
    )
}

pub fn label_of(tick: Tick) -> &'static str {
    if tick == 0 {
        INIT_LABEL
    } else {
        LABELS[((tick - 1) % LABELS.len() as u64) as usize]
    }
}

/// First tick of a round with the given label (rounds count from 1).
pub fn tick_of(round: u64, label: &str) -> Option<Tick> {
    let k = LABELS.iter().position(|l| *l == label)? as u64;
    (round > 0).then(|| (round - 1) * LABELS.len() as u64 + k + 1)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rule file: {0}")]
    Rules(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("bad injection {text:?}: {message}")]
    Injection { text: String, message: String },
}

/// An event added to the narrative at a given tick, for experiments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub tick: Tick,
    pub event: Term,
}

impl Injection {
    pub fn new(tick: Tick, event: &str) -> Result<Self, ScenarioError> {
        format!("{tick}:{event}").parse()
    }
}

impl std::str::FromStr for Injection {
    type Err = ScenarioError;
    /// Reads `tick:term`.
    fn from_str(text: &str) -> Result<Self, ScenarioError> {
        let bad = |message: String| ScenarioError::Injection {
            text: text.to_string(),
            message,
        };
        let (tick, event) = text
            .split_once(':')
            .ok_or_else(|| bad("expected tick:event".into()))?;
        let tick = tick
            .trim()
            .parse()
            .map_err(|_| bad(format!("{tick:?} is not a tick")))?;
        let event = parse_term(event).map_err(|e| bad(e.to_string()))?;
        if !event.is_ground() {
            return Err(bad("the event must be ground".into()));
        }
        Ok(Injection { tick, event })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRecord {
    pub id: String,
    pub institution: String,
    pub role: String,
    pub selected_game: GameId,
}

pub struct Simulation {
    config: ScenarioConfig,
    engine: Engine,
    monitor: Monitor,
    rng: ChaCha8Rng,
    citizens: Vec<AgentRecord>,
    government: AgentRecord,
    injections: BTreeMap<Tick, Vec<Term>>,
    pending: BTreeSet<Term>,
    last_violations: BTreeSet<(Formula, Formula)>,
    rule_cache: BTreeMap<Term, ExpRule>,
    location_rules: Vec<Term>,
    revised_at: Option<Tick>,
    trace: Vec<TraceRecord>,
    summary: Summary,
}

impl Simulation {
    /// Loads the rules, runs tick 0 (joins and announcements) and installs
    /// the location expectation for the game the citizens select.
    pub fn build(
        config: ScenarioConfig,
        injections: Vec<Injection>,
    ) -> Result<Self, ScenarioError> {
        let last = config.ticks();
        let mut by_tick: BTreeMap<Tick, Vec<Term>> = BTreeMap::new();
        for inj in injections {
            if inj.tick > last {
                return Err(ScenarioError::Injection {
                    text: format!("{}:{}", inj.tick, inj.event),
                    message: format!("the run ends at tick {last}"),
                });
            }
            by_tick.entry(inj.tick).or_default().push(inj.event);
        }

        let mut engine = Engine::new(parse_rules(RULES)?, INIT_LABEL).with_labels(LABELS);
        engine.set_constant("flood_causes_damage", config.flood_damage);
        engine.set_constant("initial_house_on_plain_value", config.house_value_plain);

        let citizens: Vec<AgentRecord> = (1..=config.citizens)
            .map(|i| AgentRecord {
                id: format!("c{i}"),
                institution: CITIZENS.into(),
                role: PLATEAU_ROLE.into(),
                selected_game: GameId::A,
            })
            .collect();
        let government = AgentRecord {
            id: GOVERNMENT.into(),
            institution: "government".into(),
            role: config.regime.role().into(),
            selected_game: GameId::A,
        };

        let mut sim = Simulation {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            summary: Summary {
                seed: config.seed,
                regime: config.regime.to_string(),
                variant: config.variant.name.to_string(),
                citizens: config.citizens,
                rounds: config.rounds,
                plain_choices: 0,
                plateau_choices: 0,
                plain_choice_rate: 0.0,
                plateau_choice_rate: 0.0,
                floods: 0,
                compensate_events: 0,
                compensation_total: 0,
                taxed_events: 0,
                tax_total: 0,
                fulfilments: 0,
                violations: 0,
                no_compensation_violations: 0,
                punishments: 0,
                max_damage: 0,
                revised_at: None,
                final_game: String::new(),
            },
            config,
            engine,
            monitor: Monitor::new(),
            citizens,
            government,
            injections: by_tick,
            pending: BTreeSet::new(),
            last_violations: BTreeSet::new(),
            rule_cache: BTreeMap::new(),
            location_rules: Vec::new(),
            revised_at: None,
            trace: Vec::new(),
        };
        sim.pending = sim.initial_events();
        sim.step_tick()?;

        let announced = term(NO_COMPENSATION_RULE);
        let game = if sim.engine.current().fluents.contains(&announced) {
            GameId::B
        } else {
            GameId::A
        };
        for c in &mut sim.citizens {
            c.selected_game = game;
        }
        sim.location_rules = sim.location_rules_for(game);
        let declares: Vec<Term> = sim
            .location_rules
            .iter()
            .map(|r| declare(r.clone()))
            .collect();
        sim.pending.extend(declares);
        if sim.config.variant.name == Variant::TeamReasoning {
            sim.pending.insert(declare(team_game(game)));
        }
        Ok(sim)
    }

    fn initial_events(&self) -> BTreeSet<Term> {
        let mut events = BTreeSet::new();
        events.insert(Term::compound(
            "join",
            vec![
                Term::atom(GOVERNMENT),
                Term::atom("government"),
                Term::atom(self.government.role.as_str()),
            ],
        ));
        for c in &self.citizens {
            events.insert(Term::compound(
                "join",
                vec![
                    Term::atom(c.id.as_str()),
                    Term::atom(CITIZENS),
                    Term::atom(c.role.as_str()),
                ],
            ));
        }
        let v = &self.config.variant;
        if matches!(v.name, Variant::Norm | Variant::SecondOrderNorm) {
            events.insert(declare(term(NORM_RULE)));
        }
        if v.name == Variant::SecondOrderNorm {
            events.insert(declare(term(&punishment_rule(v.punishment_expectation))));
        }
        if v.name == Variant::TeamReasoning {
            events.insert(declare(term(TEAM_RULE)));
            for (i, c) in self.citizens.iter().enumerate() {
                let role = self.team_role(i);
                events.insert(Term::compound(
                    "join_team",
                    vec![
                        Term::atom(c.id.as_str()),
                        Term::atom(CITIZENS),
                        Term::atom(role),
                    ],
                ));
            }
            for id in [GameId::A, GameId::B] {
                let g = self.config.game(id);
                let best = g.team_optimal();
                for (p, name) in g.profile_names(&best).into_iter().enumerate() {
                    events.insert(declare(Term::compound(
                        "team_optimal",
                        vec![
                            Term::atom(g.players()[p].as_str()),
                            id.atom(),
                            Term::atom(name),
                        ],
                    )));
                }
            }
        }
        events
    }

    fn team_role(&self, citizen: usize) -> &str {
        // both games are validated to have at least one player
        let players = self.config.game_a.players();
        &players[citizen % players.len()]
    }

    /// One rule for everyone when the equilibrium is symmetric, otherwise
    /// one rule per citizen.
    fn location_rules_for(&self, game: GameId) -> Vec<Term> {
        let g = self.config.game(game);
        let Some(eq) = g.pure_nash().into_iter().next() else {
            return Vec::new();
        };
        let names = g.profile_names(&eq);
        if names.iter().all(|n| *n == names[0]) {
            return vec![term(&location_rule(names[0]))];
        }
        self.citizens
            .iter()
            .enumerate()
            .map(|(i, c)| term(&citizen_location_rule(&c.id, names[i % names.len()])))
            .collect()
    }

    /// The citizen's equilibrium strategy in its selected game, or its first
    /// listed strategy when the game has no pure equilibrium.
    pub fn fallback_location(&self, citizen: usize) -> String {
        let g = self.config.game(self.citizens[citizen].selected_game);
        let player = citizen % g.players().len();
        match g.pure_nash().first() {
            Some(eq) => g.strategies(player)[eq[player]].clone(),
            None => g.strategies(player)[0].clone(),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn citizens(&self) -> &[AgentRecord] {
        &self.citizens
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.engine.now() > self.config.ticks()
    }

    /// Runs every remaining tick.
    pub fn run(mut self) -> Result<(Vec<TraceRecord>, Summary), ScenarioError> {
        while !self.is_finished() {
            self.step_tick()?;
        }
        Ok(self.finish())
    }

    pub fn finish(mut self) -> (Vec<TraceRecord>, Summary) {
        if self.config.rounds == 0 {
            self.trace.clear();
        }
        self.summary.revised_at = self.revised_at;
        self.summary.final_game = self
            .citizens
            .first()
            .map(|c| c.selected_game.to_string())
            .unwrap_or_default();
        self.summary.finish_rates();
        (self.trace, self.summary)
    }

    fn exp_rules(&mut self, state: &BTreeSet<Term>) -> Result<Vec<ExpRule>, ScenarioError> {
        let mut rules = Vec::new();
        for f in state {
            if f.functor() == Some(EXP_RULE_FUNCTOR) && f.arity() == 2 {
                if !self.rule_cache.contains_key(f) {
                    self.rule_cache.insert(f.clone(), ExpRule::from_fluent(f)?);
                }
                rules.push(self.rule_cache[f].clone());
            }
        }
        Ok(rules)
    }

    /// Runs the current tick: gather events, let agents act, monitor, then
    /// advance the engine.
    pub fn step_tick(&mut self) -> Result<&TraceRecord, ScenarioError> {
        let t = self.engine.now();
        let label = self.engine.current().label.clone();
        let state = self.engine.current().fluents.clone();

        let mut events = std::mem::take(&mut self.pending);
        let injected: Vec<Term> = self.injections.remove(&t).unwrap_or_default();
        events.extend(injected.iter().cloned());

        let rules = self.exp_rules(&state)?;
        let pre = StepObservation {
            fluents: state.clone(),
            events: events.clone(),
            label: label.clone(),
            violations: self.last_violations.clone(),
        };
        self.monitor.activate(&pre, &rules, t)?;

        let mut decisions = Vec::new();
        match label.as_str() {
            "receive_income" => {
                for c in &self.citizens {
                    events.insert(Term::compound(
                        "receive_income",
                        vec![Term::atom(c.id.as_str()), Term::Number(self.config.income)],
                    ));
                }
            }
            "choose_location" => {
                decisions = self.choose_locations(&injected);
                for (c, d) in self.citizens.iter_mut().zip(&decisions) {
                    c.role = role_for(&d.location).to_string();
                }
                for d in &decisions {
                    if d.source == DecisionSource::Injected {
                        continue;
                    }
                    let old = role_of(&state, &d.agent).unwrap_or_else(|| PLATEAU_ROLE.into());
                    events.insert(Term::compound(
                        "change_role",
                        vec![
                            Term::atom(d.agent.as_str()),
                            Term::atom(CITIZENS),
                            Term::atom(old),
                            Term::atom(role_for(&d.location)),
                        ],
                    ));
                    events.insert(action(&d.agent, &d.location));
                }
            }
            "flood" => {
                let p = self.config.flood_probability;
                if self.rng.gen_range(0..p.denominator()) < p.numerator() {
                    events.insert(Term::atom("flood"));
                }
            }
            "tax_compensate" => {
                if self.config.regime == Regime::Discretionary {
                    events.extend(government_act(&state));
                }
            }
            "repair" => events.extend(repair_events(&state)),
            "consume" => {
                for c in &self.citizens {
                    events.insert(Term::compound("consumed", vec![Term::atom(c.id.as_str())]));
                }
            }
            _ => {}
        }
        if self.config.variant.punish_violators {
            events.extend(punishments(&self.last_violations));
        }

        let obs = StepObservation {
            fluents: state.clone(),
            events: events.clone(),
            label: label.clone(),
            violations: std::mem::take(&mut self.last_violations),
        };
        let out = self.monitor.tick(&obs, &rules, t)?;
        self.pending.extend(out.events());
        self.last_violations = out.violations.iter().cloned().collect();
        self.revise(&out, t);

        let next_label = label_of(t + 1);
        let delta = self.engine.step(events.iter().cloned(), next_label)?;
        self.count(&events, &decisions, &out);
        for f in &delta.added {
            if f.functor() == Some("damage") {
                if let Some(d) = f.args().get(1).and_then(Term::as_number) {
                    self.summary.max_damage = self.summary.max_damage.max(d);
                }
            }
        }

        let strings = |set: &BTreeSet<Term>| set.iter().map(Term::to_string).collect();
        let outcomes = |v: &[(Formula, Formula)]| {
            v.iter()
                .map(|(c, e)| OutcomeRecord {
                    cond: c.to_string(),
                    exp: e.to_string(),
                })
                .collect()
        };
        self.trace.push(TraceRecord {
            tick: t,
            label,
            events: strings(&events),
            fluents_added: strings(&delta.added),
            fluents_removed: strings(&delta.removed),
            activations: out
                .activated
                .iter()
                .map(|a| Activation {
                    rule: a.rule.to_string(),
                    grounding: a.grounding.to_string(),
                    expectation: a.exp_instance.to_string(),
                })
                .collect(),
            fulfilments: outcomes(&out.fulfilments),
            violations: outcomes(&out.violations),
            decisions,
        });
        Ok(self.trace.last().expect("just pushed"))
    }

    fn choose_locations(&self, injected: &[Term]) -> Vec<Decision> {
        let expected = self.monitor.expected_instances(&Formula::Fluent(
            parse_term("location(A,L)").expect("pattern"),
        ));
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in &expected {
            if let Some(l) = s.get("L").and_then(Term::as_atom) {
                if LOCATIONS.contains(&l) {
                    *counts.entry(l.to_string()).or_default() += 1;
                }
            }
        }
        let (plain, plateau) = (
            counts.get("plain").copied().unwrap_or(0),
            counts.get("plateau").copied().unwrap_or(0),
        );
        let majority = match plain.cmp(&plateau) {
            std::cmp::Ordering::Greater => Some("plain"),
            std::cmp::Ordering::Less => Some("plateau"),
            std::cmp::Ordering::Equal => None,
        };

        self.citizens
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let decide = |location: &str, source| Decision {
                    agent: c.id.clone(),
                    location: location.to_string(),
                    source,
                };
                if let Some(l) = injected.iter().find_map(|e| injected_location(e, &c.id)) {
                    return decide(&l, DecisionSource::Injected);
                }
                let own = self.monitor.expected_instances(&Formula::HappBy(
                    Term::atom(c.id.as_str()),
                    Term::var("L"),
                ));
                let own: BTreeSet<&str> = own
                    .iter()
                    .filter_map(|s| s.get("L").and_then(Term::as_atom))
                    .filter(|l| LOCATIONS.contains(l))
                    .collect();
                if own.len() == 1 {
                    return decide(own.first().unwrap(), DecisionSource::ExpectedAction);
                }
                match majority {
                    Some(l) => decide(l, DecisionSource::Majority),
                    None => decide(&self.fallback_location(i), DecisionSource::NashFallback),
                }
            })
            .collect()
    }

    /// After a violated no-compensation expectation the citizens stop
    /// believing the announcement: they switch to game A and replace the
    /// location rule, effective from the next tick.
    fn revise(&mut self, out: &MonitorOutput, t: Tick) {
        if !self.config.revision || self.revised_at.is_some() {
            return;
        }
        if !out.violations.iter().any(|(_, e)| is_no_compensation(e)) {
            return;
        }
        if self.citizens.iter().all(|c| c.selected_game == GameId::A) {
            return;
        }
        self.revised_at = Some(t);
        for c in &mut self.citizens {
            c.selected_game = GameId::A;
        }
        let old = std::mem::take(&mut self.location_rules);
        self.location_rules = self.location_rules_for(GameId::A);
        self.pending.extend(old.into_iter().map(retract));
        self.pending
            .extend(self.location_rules.iter().cloned().map(declare));
        if self.config.variant.name == Variant::TeamReasoning {
            self.pending.insert(retract(team_game(GameId::B)));
            self.pending.insert(declare(team_game(GameId::A)));
        }
    }

    fn count(&mut self, events: &BTreeSet<Term>, decisions: &[Decision], out: &MonitorOutput) {
        let s = &mut self.summary;
        for e in events {
            let amount = || e.args().get(1).and_then(Term::as_number).unwrap_or(0);
            match (e.functor(), e.arity()) {
                (Some("flood"), 0) => s.floods += 1,
                (Some("compensate"), 2) => {
                    s.compensate_events += 1;
                    s.compensation_total += amount();
                }
                (Some("taxed"), 2) => {
                    s.taxed_events += 1;
                    s.tax_total += amount();
                }
                (Some("punish"), 1) => s.punishments += 1,
                _ => {}
            }
        }
        for d in decisions {
            match d.location.as_str() {
                "plain" => s.plain_choices += 1,
                "plateau" => s.plateau_choices += 1,
                _ => {}
            }
        }
        s.fulfilments += out.fulfilments.len() as u64;
        s.violations += out.violations.len() as u64;
        s.no_compensation_violations += out
            .violations
            .iter()
            .filter(|(_, e)| is_no_compensation(e))
            .count() as u64;
    }
}

fn term(text: &str) -> Term {
    parse_term(text).expect("built-in term")
}

fn declare(f: Term) -> Term {
    Term::compound("declare", vec![f])
}

fn retract(f: Term) -> Term {
    Term::compound("retract", vec![f])
}

fn team_game(id: GameId) -> Term {
    Term::compound("game", vec![Term::atom(CITIZENS), id.atom()])
}

fn action(agent: &str, act: &str) -> Term {
    Term::compound(
        crate::formula::ACTION_EVENT,
        vec![Term::atom(agent), Term::atom(act)],
    )
}

fn role_for(location: &str) -> &'static str {
    if location == "plain" {
        PLAIN_ROLE
    } else {
        PLATEAU_ROLE
    }
}

fn role_of(state: &BTreeSet<Term>, agent: &str) -> Option<String> {
    let pattern = Term::compound(
        "role",
        vec![Term::atom(agent), Term::atom(CITIZENS), Term::var("R")],
    );
    state
        .iter()
        .find_map(|f| match_term(&pattern, f))
        .and_then(|s| s.get("R").and_then(Term::as_atom).map(str::to_string))
}

/// Location chosen by an injected `change_role` or `does` event for `agent`.
fn injected_location(event: &Term, agent: &str) -> Option<String> {
    let args = event.args();
    match (event.functor()?, args.len()) {
        ("change_role", 4) if args[0].as_atom() == Some(agent) => match args[3].as_atom()? {
            PLAIN_ROLE => Some("plain".into()),
            PLATEAU_ROLE => Some("plateau".into()),
            _ => None,
        },
        (crate::formula::ACTION_EVENT, 2) if args[0].as_atom() == Some(agent) => {
            let l = args[1].as_atom()?;
            LOCATIONS.contains(&l).then(|| l.to_string())
        }
        _ => None,
    }
}

fn is_no_compensation(exp: &Formula) -> bool {
    let pattern = term("not(happ(compensate(_,_)))");
    match_term(&pattern, &exp.to_term()).is_some()
}

fn fluent_pairs<'a>(
    state: &'a BTreeSet<Term>,
    functor: &'a str,
) -> impl Iterator<Item = (&'a str, i64)> {
    state.iter().filter_map(move |f| {
        let args = f.args();
        (f.functor() == Some(functor) && args.len() == 2)
            .then(|| Some((args[0].as_atom()?, args[1].as_number()?)))
            .flatten()
    })
}

/// Discretionary government: compensate every damaged citizen and split
/// the total evenly over undamaged plateau dwellers, the remainder going
/// one unit each to the first taxpayers by name. Without taxpayers nothing
/// happens.
pub fn government_act(state: &BTreeSet<Term>) -> Vec<Term> {
    let damaged: BTreeMap<&str, i64> = fluent_pairs(state, "damage").collect();
    let total: i64 = damaged.values().sum();
    let payers: Vec<&str> = state
        .iter()
        .filter_map(|f| {
            let args = f.args();
            (f.functor() == Some("location")
                && args.len() == 2
                && args[1].as_atom() == Some("plateau"))
            .then(|| args[0].as_atom())
            .flatten()
        })
        .filter(|a| !damaged.contains_key(a))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if payers.is_empty() || total == 0 {
        return Vec::new();
    }
    let k = payers.len() as i64;
    let (share, rest) = (total / k, total % k);
    let mut events: Vec<Term> = damaged
        .iter()
        .filter(|(_, d)| **d > 0)
        .map(|(a, d)| Term::compound("compensate", vec![Term::atom(*a), Term::Number(*d)]))
        .collect();
    for (i, payer) in payers.iter().enumerate() {
        let amount = share + i64::from((i as i64) < rest);
        if amount > 0 {
            events.push(Term::compound(
                "taxed",
                vec![Term::atom(*payer), Term::Number(amount)],
            ));
        }
    }
    events
}

/// Each damaged citizen spends what it can, up to the damage; the rest of
/// the damage remains.
pub fn repair_events(state: &BTreeSet<Term>) -> Vec<Term> {
    let wealth: BTreeMap<&str, i64> = fluent_pairs(state, "wealth").collect();
    let mut events = Vec::new();
    for (agent, damage) in fluent_pairs(state, "damage") {
        let cost = damage.min(wealth.get(agent).copied().unwrap_or(0).max(0));
        if cost <= 0 {
            continue;
        }
        events.push(Term::compound(
            "repair",
            vec![Term::atom(agent), Term::Number(cost)],
        ));
        if damage > cost {
            events.push(Term::compound(
                "residual_damage",
                vec![Term::atom(agent), Term::Number(damage - cost)],
            ));
        }
    }
    events
}

/// `punish(A)` for every violation of the stay-off-the-plain norm.
fn punishments(violations: &BTreeSet<(Formula, Formula)>) -> Vec<Term> {
    let norm = ExpRule::from_fluent(&term(NORM_RULE)).expect("built-in rule");
    let (cond, exp) = (norm.cond.to_term(), norm.exp.to_term());
    violations
        .iter()
        .filter_map(|(c, e)| {
            let mut s = match_term(&cond, &c.to_term())?;
            crate::term::match_into(&exp, &e.to_term(), &mut s).then_some(())?;
            Some(Term::compound("punish", vec![s.get("A")?.clone()]))
        })
        .collect()
}

/// Builds and runs one simulation.
pub fn run(
    config: ScenarioConfig,
    injections: Vec<Injection>,
) -> Result<(Vec<TraceRecord>, Summary), ScenarioError> {
    Simulation::build(config, injections)?.run()
}

/// Runs one simulation per seed in parallel; summaries come back in seed
/// order.
pub fn sweep(config: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<Summary>, ScenarioError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            run(c, Vec::new()).map(|(_, summary)| summary)
        })
        .collect()
}

/// Re-applies the recorded events of a trace to a fresh engine.
pub fn replay(config: &ScenarioConfig, trace: &[TraceRecord]) -> Result<Engine, ScenarioError> {
    let mut engine = Engine::new(parse_rules(RULES)?, INIT_LABEL).with_labels(LABELS);
    engine.set_constant("flood_causes_damage", config.flood_damage);
    engine.set_constant("initial_house_on_plain_value", config.house_value_plain);
    for r in trace {
        let events = r
            .events
            .iter()
            .map(|e| parse_term(e))
            .collect::<Result<Vec<_>, _>>()?;
        engine.step(events, label_of(r.tick + 1))?;
    }
    Ok(engine)
}
