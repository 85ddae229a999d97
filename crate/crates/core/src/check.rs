//! Built-in reproduction checks, run by `expect-ec check`.
//!
//! Each check returns a pass flag and a one-line detail. The checks use
//! only the library and the given configuration.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{BodyAtom, EffectKind, EffectRule, Engine};
use crate::formula::{progress, trace_eval, Formula, Residual, StepObservation, Verdict};
use crate::game::NormalFormGame;
use crate::scenario::{
    self, tick_of, Injection, PunishmentTiming, Regime, ScenarioConfig, TraceRecord, Variant,
};
use crate::syntax::parse_rules;
use crate::term::Term;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Outcome = Result<String, String>;
type Check = fn(&ScenarioConfig) -> Outcome;

pub const CHECKS: [(&str, Check); 9] = [
    ("equilibria of the two games", equilibria),
    ("regime behaviour over 50 seeds", regimes),
    ("payoff sums at equilibrium", payoff_sums),
    ("violation and revision", violation_and_revision),
    (
        "progression agrees with trace semantics",
        progression_oracle,
    ),
    ("inertia under random rules", inertia),
    ("flood damage cap", flood_cap),
    ("norm and second-order norm", norms),
    ("team reasoning", team_reasoning),
];

/// Runs every check in order.
pub fn run_all(config: &ScenarioConfig) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let start = Instant::now();
            let outcome = check(config);
            CheckResult {
                id: i + 1,
                name,
                passed: outcome.is_ok(),
                detail: outcome.unwrap_or_else(|e| e),
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn describe(g: &NormalFormGame, profiles: &[Vec<usize>]) -> String {
    profiles
        .iter()
        .map(|p| format!("{} {:?}", g.profile_string(p), g.payoff(p)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn equilibria(c: &ScenarioConfig) -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (g, want, pay) in [
        (&c.game_a, "(plain,plain)", [333, 333]),
        (&c.game_b, "(plateau,plateau)", [365, 365]),
    ] {
        let nash = g.pure_nash();
        ensure(
            nash.len() == 1 && g.profile_string(&nash[0]) == want && g.payoff(&nash[0]) == pay,
            || format!("expected {want} {pay:?}, got {}", describe(g, &nash)),
        )?;
        parts.push(describe(g, &nash));
    }
    ensure(start.elapsed() < Duration::from_secs(1), || {
        "took over 1 s".into()
    })?;
    Ok(parts.join("; "))
}

fn regimes(c: &ScenarioConfig) -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..50).collect();
    let mut base = c.clone();
    base.citizens = 2;
    base.rounds = 10;
    base.variant.name = Variant::Baseline;
    base.regime = Regime::RuleBased;
    let rb = scenario::sweep(&base, &seeds).map_err(|e| e.to_string())?;
    base.regime = Regime::Discretionary;
    let disc = scenario::sweep(&base, &seeds).map_err(|e| e.to_string())?;
    for s in &rb {
        ensure(
            s.plateau_choices == 20
                && s.plain_choices == 0
                && s.taxed_events + s.compensate_events == 0
                && s.violations == 0,
            || format!("rule_based seed {}: {s:?}", s.seed),
        )?;
    }
    for s in &disc {
        ensure(s.plain_choices == 20 && s.plateau_choices == 0, || {
            format!("discretionary seed {}: {s:?}", s.seed)
        })?;
    }
    ensure(start.elapsed() < Duration::from_secs(5), || {
        format!("took {:?}", start.elapsed())
    })?;
    Ok("rule_based 100% plateau, discretionary 100% plain".into())
}

fn payoff_sums(c: &ScenarioConfig) -> Outcome {
    let a = c.game_a.pure_nash();
    let b = c.game_b.pure_nash();
    let sum = |g: &NormalFormGame, p: &[Vec<usize>]| p.first().map(|p| g.payoff_sum(p));
    let (sa, sb) = (sum(&c.game_a, &a), sum(&c.game_b, &b));
    ensure(sa == Some(666) && sb == Some(730), || {
        format!("got {sa:?} and {sb:?}")
    })?;
    Ok("666 and 730".into())
}

fn injections() -> Vec<Injection> {
    let at = |label| tick_of(3, label).expect("label");
    vec![
        Injection::new(
            at("choose_location"),
            "change_role(c1,citizens,citizens_plateaudwellerrole,citizens_plaindwellerrole)",
        ),
        Injection::new(at("flood"), "flood"),
        Injection::new(at("tax_compensate"), "compensate(c1,100)"),
    ]
    .into_iter()
    .map(|i| i.expect("valid injection"))
    .collect()
}

fn choices(trace: &[TraceRecord]) -> Vec<(u64, String, String)> {
    trace
        .iter()
        .flat_map(|r| {
            r.decisions
                .iter()
                .map(move |d| (r.tick, d.agent.clone(), d.location.clone()))
        })
        .collect()
}

fn violation_and_revision(c: &ScenarioConfig) -> Outcome {
    let mut base = c.clone();
    base.regime = Regime::RuleBased;
    base.variant.name = Variant::Baseline;
    base.rounds = base.rounds.max(4);
    let tax = tick_of(3, "tax_compensate").unwrap();
    let no_comp = |e: &str| e.starts_with("not(happ(compensate(");

    base.revision = true;
    let (trace, _) = scenario::run(base.clone(), injections()).map_err(|e| e.to_string())?;
    let rec = &trace[tax as usize];
    let active: Vec<_> = rec
        .activations
        .iter()
        .filter(|a| no_comp(&a.expectation))
        .collect();
    let violated: Vec<_> = rec.violations.iter().filter(|v| no_comp(&v.exp)).collect();
    ensure(!active.is_empty() && violated.len() == active.len(), || {
        format!(
            "{} active no-compensation expectations, {} violations",
            active.len(),
            violated.len()
        )
    })?;
    let round4 = tick_of(4, "receive_income").unwrap();
    let late: Vec<_> = choices(&trace)
        .into_iter()
        .filter(|(t, _, _)| *t >= round4)
        .collect();
    ensure(
        !late.is_empty() && late.iter().all(|(_, _, l)| l == "plain"),
        || format!("choices after revision: {late:?}"),
    )?;

    base.revision = false;
    let (off, _) = scenario::run(base.clone(), injections()).map_err(|e| e.to_string())?;
    let (plain_run, _) = scenario::run(base, vec![]).map_err(|e| e.to_string())?;
    let forced = tick_of(3, "choose_location").unwrap();
    let diff: Vec<_> = choices(&off)
        .into_iter()
        .zip(choices(&plain_run))
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a)
        .collect();
    ensure(
        diff == vec![(forced, "c1".to_string(), "plain".to_string())],
        || format!("without revision choices changed: {diff:?}"),
    )?;
    Ok(format!(
        "{} violation(s) at tick {tax}; plain from round 4",
        violated.len()
    ))
}

/// Formulas over p, q and happ(e) whose nesting depth is at most `depth`
/// (an atom has depth 1).
pub fn formulas_up_to(depth: usize) -> Vec<Formula> {
    let atoms = vec![
        Formula::Fluent(Term::atom("p")),
        Formula::Fluent(Term::atom("q")),
        Formula::Happ(Term::atom("e")),
    ];
    let mut all = atoms.clone();
    for _ in 1..depth {
        let prev = all.clone();
        all = atoms.clone();
        for f in &prev {
            all.push(Formula::not(f.clone()));
            all.push(Formula::next(f.clone()));
            all.push(Formula::eventually(f.clone()));
            all.push(Formula::always(f.clone()));
        }
        for a in &prev {
            for b in &prev {
                all.push(Formula::And(vec![a.clone(), b.clone()]));
                all.push(Formula::Or(vec![a.clone(), b.clone()]));
            }
        }
    }
    all
}

/// The eight observations over p, q and e.
pub fn observations() -> Vec<StepObservation> {
    (0..8u8)
        .map(|bits| {
            let mut o = StepObservation::new("step");
            if bits & 1 != 0 {
                o.fluents.insert(Term::atom("p"));
            }
            if bits & 2 != 0 {
                o.fluents.insert(Term::atom("q"));
            }
            if bits & 4 != 0 {
                o.events.insert(Term::atom("e"));
            }
            o
        })
        .collect()
}

fn progression_oracle(_: &ScenarioConfig) -> Outcome {
    let formulas = formulas_up_to(3);
    let traces = Traces::new(observations(), 4);
    let (pairs, disagreements): (usize, Vec<String>) = formulas
        .par_iter()
        .map(|f| {
            let mut count = 0;
            let mut bad = Vec::new();
            walk(
                f,
                &Residual::Pending(f.clone()),
                &traces,
                0,
                0,
                &mut count,
                &mut bad,
            );
            (count, bad)
        })
        .reduce(
            || (0, Vec::new()),
            |(a, mut x), (b, y)| {
                x.extend(y);
                (a + b, x)
            },
        );
    ensure(disagreements.is_empty(), || {
        format!(
            "{} disagreements, first: {}",
            disagreements.len(),
            disagreements[0]
        )
    })?;
    Ok(format!(
        "{} formulas, {} formula/trace pairs",
        formulas.len(),
        pairs
    ))
}

/// Every non-empty trace up to a maximum length, built once. A trace of
/// length `n` whose steps are observation indices `d1..dn` is stored at
/// `offset[n] + (d1..dn read in base k)`.
struct Traces {
    obs: Vec<StepObservation>,
    max: usize,
    offset: Vec<usize>,
    all: Vec<Vec<StepObservation>>,
}

impl Traces {
    fn new(obs: Vec<StepObservation>, max: usize) -> Self {
        let k = obs.len();
        let mut offset = vec![0];
        let mut all = Vec::new();
        for len in 1..=max {
            offset.push(all.len());
            for mut code in 0..k.pow(len as u32) {
                let mut trace = vec![obs[0].clone(); len];
                for slot in trace.iter_mut().rev() {
                    *slot = obs[code % k].clone();
                    code /= k;
                }
                all.push(trace);
            }
        }
        Traces {
            obs,
            max,
            offset,
            all,
        }
    }

    fn get(&self, len: usize, code: usize) -> &[StepObservation] {
        &self.all[self.offset[len] + code]
    }
}

fn walk(
    f: &Formula,
    state: &Residual,
    traces: &Traces,
    len: usize,
    code: usize,
    count: &mut usize,
    bad: &mut Vec<String>,
) {
    if len == traces.max {
        return;
    }
    for (i, o) in traces.obs.iter().enumerate() {
        let next = match state {
            Residual::Pending(r) => progress(r, o).expect("ground formula"),
            done => done.clone(),
        };
        let code = code * traces.obs.len() + i;
        let expected = trace_eval(f, traces.get(len + 1, code));
        let got = match &next {
            Residual::True => Verdict::True,
            Residual::False => Verdict::False,
            Residual::Pending(_) => Verdict::Unknown,
        };
        *count += 1;
        if got != expected {
            bad.push(format!(
                "{f} on trace {code} of length {}: progression {got:?}, trace {expected:?}",
                len + 1
            ));
        }
        walk(f, &next, traces, len + 1, code, count, bad);
    }
}

const NAMES: [&str; 2] = ["a", "b"];

fn random_rule(rng: &mut ChaCha8Rng) -> Option<EffectRule> {
    let x = || Term::var("X");
    let arg = |rng: &mut ChaCha8Rng, allow_var: bool| {
        if allow_var && rng.gen_bool(0.5) {
            x()
        } else {
            Term::atom(*NAMES.choose(rng).unwrap())
        }
    };
    let event = if rng.gen_bool(0.6) {
        Term::compound("e1", vec![arg(rng, true)])
    } else {
        Term::atom(*["e2", "e3"].choose(rng).unwrap())
    };
    let mut bound = !event.vars().is_empty();
    let mut body = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let f = *["f", "g"].choose(rng).unwrap();
        if rng.gen_bool(0.5) {
            let t = Term::compound(f, vec![arg(rng, true)]);
            bound |= !t.vars().is_empty();
            body.push(BodyAtom::HoldsAt(t));
        } else {
            body.push(BodyAtom::NotHolds(Term::compound(f, vec![arg(rng, bound)])));
        }
    }
    let fluent = Term::compound(*["f", "g"].choose(rng).unwrap(), vec![arg(rng, bound)]);
    let kind = if rng.gen_bool(0.5) {
        EffectKind::Initiates
    } else {
        EffectKind::Terminates
    };
    EffectRule::new(kind, event, fluent, body).ok()
}

fn vocabulary() -> Vec<Term> {
    ["f", "g"]
        .iter()
        .flat_map(|f| {
            NAMES
                .iter()
                .map(move |n| Term::compound(*f, vec![Term::atom(*n)]))
        })
        .collect()
}

fn inertia(_: &ScenarioConfig) -> Outcome {
    let vocab = vocabulary();
    let events: Vec<Term> = NAMES
        .iter()
        .map(|n| Term::compound("e1", vec![Term::atom(*n)]))
        .chain([Term::atom("e2"), Term::atom("e3")])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for run in 0..1000 {
        let rules: Vec<EffectRule> = (0..rng.gen_range(1..=6))
            .filter_map(|_| random_rule(&mut rng))
            .collect();
        let mut engine = Engine::new(rules, "s");
        let initial: Vec<Term> = vocab
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .cloned()
            .collect();
        engine.initially(initial).map_err(|e| e.to_string())?;
        for _ in 0..rng.gen_range(1..=6) {
            let happened: BTreeSet<Term> = events
                .iter()
                .filter(|_| rng.gen_bool(0.4))
                .cloned()
                .collect();
            let before = engine.current().fluents.clone();
            let (init, term) = engine
                .effects(&before, &happened)
                .map_err(|e| e.to_string())?;
            engine.step(happened, "s").map_err(|e| e.to_string())?;
            let after = &engine.current().fluents;
            for f in &vocab {
                let want = init.contains(f) || (before.contains(f) && !term.contains(f));
                ensure(after.contains(f) == want, || {
                    format!("run {run}: fluent {f}")
                })?;
            }
        }
    }
    Ok("1000 runs".into())
}

fn flood_cap(c: &ScenarioConfig) -> Outcome {
    let rules = parse_rules(scenario::RULES).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 7);
    let citizens = ["c1", "c2", "c3"];
    for run in 0..1000 {
        let v: i64 = rng.gen_range(0..=500);
        let fd: i64 = rng.gen_range(0..=700);
        let mut engine = Engine::new(rules.clone(), "s");
        engine.set_constant("flood_causes_damage", fd);
        engine.set_constant("initial_house_on_plain_value", v);
        let mut init = Vec::new();
        for a in citizens {
            let at = |s: &str| Term::atom(s);
            init.push(Term::compound("member", vec![at(a), at("citizens")]));
            let place = if rng.gen_bool(0.5) {
                "plain"
            } else {
                "plateau"
            };
            init.push(Term::compound("location", vec![at(a), at(place)]));
            if rng.gen_bool(0.3) {
                init.push(Term::compound(
                    "damage",
                    vec![at(a), Term::Number(rng.gen_range(0..=v))],
                ));
            }
        }
        engine.initially(init).map_err(|e| e.to_string())?;
        for _ in 0..rng.gen_range(2..=8) {
            let mut events = Vec::new();
            if rng.gen_bool(0.7) {
                events.push(Term::atom("flood"));
            }
            for a in citizens {
                if rng.gen_bool(0.2) {
                    let role = if rng.gen_bool(0.5) {
                        "citizens_plaindwellerrole"
                    } else {
                        "citizens_plateaudwellerrole"
                    };
                    events.push(Term::compound(
                        "change_role",
                        vec![
                            Term::atom(a),
                            Term::atom("citizens"),
                            Term::atom("x"),
                            Term::atom(role),
                        ],
                    ));
                }
            }
            engine.step(events, "s").map_err(|e| e.to_string())?;
            for f in &engine.current().fluents {
                if f.functor() == Some("damage") {
                    let d = f.args()[1].as_number().unwrap_or(i64::MAX);
                    ensure(d <= v, || format!("run {run}: {f} exceeds {v}"))?;
                }
            }
        }
    }
    Ok("1000 runs".into())
}

fn norms(c: &ScenarioConfig) -> Outcome {
    let mut base = c.clone();
    base.regime = Regime::Discretionary;
    base.rounds = 1;
    base.variant.punishment_expectation = PunishmentTiming::SameTick;
    base.variant.punish_violators = false;
    let on_plain = tick_of(1, "choose_location").unwrap() as usize + 1;
    let norm_exp = |v: &scenario::OutcomeRecord| v.exp.starts_with("always(not(location(");
    let punish_exp = |v: &scenario::OutcomeRecord| v.exp.starts_with("happ(punish(");

    base.variant.name = Variant::Norm;
    let (trace, _) = scenario::run(base.clone(), vec![]).map_err(|e| e.to_string())?;
    let first = trace.iter().position(|r| r.violations.iter().any(norm_exp));
    ensure(first == Some(on_plain), || {
        format!("first norm violation at {first:?}, expected {on_plain}")
    })?;
    let n = trace[on_plain]
        .violations
        .iter()
        .filter(|v| norm_exp(v))
        .count();
    ensure(n == base.citizens, || {
        format!("{n} norm violations at tick {on_plain}")
    })?;

    base.variant.name = Variant::SecondOrderNorm;
    let (trace, _) = scenario::run(base.clone(), vec![]).map_err(|e| e.to_string())?;
    let next = &trace[on_plain + 1];
    let activated = next
        .activations
        .iter()
        .filter(|a| a.expectation.starts_with("happ(punish("))
        .count();
    let violated = next.violations.iter().filter(|v| punish_exp(v)).count();
    ensure(activated == n && violated == n, || {
        format!("unpunished: {activated} activated, {violated} violated")
    })?;

    base.variant.punish_violators = true;
    let (trace, _) = scenario::run(base, vec![]).map_err(|e| e.to_string())?;
    let next = &trace[on_plain + 1];
    let fulfilled = next.fulfilments.iter().filter(|v| punish_exp(v)).count();
    let any_violated = trace.iter().flat_map(|r| &r.violations).any(punish_exp);
    ensure(fulfilled == n && !any_violated, || {
        format!("punished: {fulfilled} fulfilled, violated anywhere: {any_violated}")
    })?;
    Ok(format!(
        "{n} violations at tick {on_plain}; punishment expectations classified"
    ))
}

fn team_reasoning(c: &ScenarioConfig) -> Outcome {
    let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let cells = [[2, 2], [0, 3], [3, 0], [1, 1]];
    let pd = NormalFormGame::from_fn(names(&["p1", "p2"]), vec![names(&["c", "d"]); 2], |p| {
        cells[p[0] * 2 + p[1]].to_vec()
    })
    .map_err(|e| e.to_string())?;
    let best = pd.team_optimal();
    ensure(pd.profile_string(&best) == "(c,c)", || {
        format!("team optimum {}", pd.profile_string(&best))
    })?;

    let mut base = c.clone();
    base.regime = Regime::Discretionary;
    base.variant.name = Variant::TeamReasoning;
    let g = &base.game_a;
    let coop = g
        .profile_names(&g.team_optimal())
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let (trace, _) = scenario::run(base.clone(), vec![]).map_err(|e| e.to_string())?;
    for (i, d) in trace.iter().flat_map(|r| &r.decisions).enumerate() {
        let want = &coop[(i % base.citizens) % coop.len()];
        ensure(&d.location == want, || {
            format!("{} chose {}, team optimum {want}", d.agent, d.location)
        })?;
    }
    Ok(format!(
        "PD team optimum (c,c); members play {}",
        coop.join(",")
    ))
}
