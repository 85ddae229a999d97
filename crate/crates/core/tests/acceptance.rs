//! Acceptance suite. Each criterion is checked against oracles written
//! here, independent of the library's own `check` module, and prints one
//! PASS/FAIL line. The process exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use expect_ec::engine::Engine;
use expect_ec::formula::{progress, trace_eval, Formula, Residual, StepObservation, Verdict};
use expect_ec::game::NormalFormGame;
use expect_ec::scenario::{
    self, tick_of, Injection, Probability, PunishmentTiming, Regime, ScenarioConfig, TraceRecord,
    Variant,
};
use expect_ec::syntax::{parse_rules, parse_term};
use expect_ec::term::Term;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn defaults() -> ScenarioConfig {
    ScenarioConfig::default_config()
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

fn event_count(trace: &[TraceRecord], functor: &str) -> usize {
    trace
        .iter()
        .flat_map(|r| &r.events)
        .filter(|e| {
            parse_term(e)
                .map(|t| t.functor() == Some(functor))
                .unwrap_or(false)
        })
        .count()
}

/// Pure equilibria by checking every unilateral deviation.
fn nash_oracle(g: &NormalFormGame) -> Vec<Vec<usize>> {
    let n = g.players().len();
    let sizes: Vec<usize> = (0..n).map(|p| g.strategies(p).len()).collect();
    let mut all = vec![vec![]];
    for &k in &sizes {
        all = all
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..k).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    all.into_iter()
        .filter(|p| {
            (0..n).all(|i| {
                (0..sizes[i]).all(|s| {
                    let mut q = p.clone();
                    q[i] = s;
                    g.payoff(&q)[i] <= g.payoff(p)[i]
                })
            })
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_expect-ec"))
        .args(["solve-game", "--game", "A"])
        .output()
        .map_err(|e| e.to_string())?;
    let a = String::from_utf8_lossy(&out.stdout).to_string();
    let out = Command::new(env!("CARGO_BIN_EXE_expect-ec"))
        .args(["solve-game", "--game", "B"])
        .output()
        .map_err(|e| e.to_string())?;
    let b = String::from_utf8_lossy(&out.stdout).to_string();
    within(start, Duration::from_secs(1))?;
    let nash_lines = |s: &str| {
        s.lines()
            .filter(|l| l.starts_with("nash:"))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    ensure(
        nash_lines(&a) == ["nash: (plain,plain) payoff (333,333)"],
        || format!("game A: {a}"),
    )?;
    ensure(
        nash_lines(&b) == ["nash: (plateau,plateau) payoff (365,365)"],
        || format!("game B: {b}"),
    )?;

    let c = defaults();
    for (g, want, pay) in [
        (&c.game_a, "plain", [333, 333]),
        (&c.game_b, "plateau", [365, 365]),
    ] {
        let nash = nash_oracle(g);
        ensure(nash.len() == 1, || {
            format!("oracle found {} equilibria", nash.len())
        })?;
        ensure(
            g.profile_names(&nash[0]) == [want, want] && g.payoff(&nash[0]) == pay,
            || format!("oracle equilibrium {:?}", g.profile_names(&nash[0])),
        )?;
        ensure(g.pure_nash() == nash, || {
            "solver disagrees with oracle".into()
        })?;
    }
    Ok(format!(
        "A (plain,plain) (333,333), B (plateau,plateau) (365,365) in {:.2?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut c = defaults();
    c.citizens = 2;
    c.rounds = 10;
    let mut rb_plateau = 0;
    let mut disc_plain = 0;
    for seed in 0..50 {
        c.seed = seed;
        c.regime = Regime::RuleBased;
        let (trace, _) = scenario::run(c.clone(), vec![]).map_err(|e| e.to_string())?;
        let ch = choices(&trace);
        ensure(ch.len() == 20, || {
            format!("seed {seed}: {} rule_based choices", ch.len())
        })?;
        rb_plateau += ch.iter().filter(|(_, _, l)| l == "plateau").count();
        let money = event_count(&trace, "taxed") + event_count(&trace, "compensate");
        let violations: usize = trace.iter().map(|r| r.violations.len()).sum();
        ensure(money == 0 && violations == 0, || {
            format!("seed {seed}: {money} taxed/compensate events, {violations} violations")
        })?;

        c.regime = Regime::Discretionary;
        let (trace, _) = scenario::run(c.clone(), vec![]).map_err(|e| e.to_string())?;
        let ch = choices(&trace);
        ensure(ch.len() == 20, || {
            format!("seed {seed}: {} discretionary choices", ch.len())
        })?;
        disc_plain += ch.iter().filter(|(_, _, l)| l == "plain").count();
    }
    ensure(rb_plateau == 1000 && disc_plain == 1000, || {
        format!("rule_based plateau {rb_plateau}/1000, discretionary plain {disc_plain}/1000")
    })?;
    within(start, Duration::from_secs(5))?;
    Ok(format!(
        "plateau 1000/1000 and plain 1000/1000 citizen-rounds in {:.2?}",
        start.elapsed()
    ))
}

fn criterion_3() -> Outcome {
    let c = defaults();
    let mut sums = Vec::new();
    for g in [&c.game_a, &c.game_b] {
        let nash = nash_oracle(g);
        ensure(nash.len() == 1, || "no unique equilibrium".into())?;
        let sum: i64 = g.payoff(&nash[0]).iter().sum();
        ensure(g.payoff_sum(&nash[0]) == sum, || {
            "payoff_sum disagrees".into()
        })?;
        sums.push(sum);
    }
    ensure(sums == [666, 730], || format!("sums {sums:?}"))?;
    Ok("666 and 730".into())
}

fn revision_injections() -> Vec<Injection> {
    [
        (
            tick_of(3, "choose_location"),
            "change_role(c1,citizens,citizens_plateaudwellerrole,citizens_plaindwellerrole)",
        ),
        (tick_of(3, "flood"), "flood"),
        (tick_of(3, "tax_compensate"), "compensate(c1,100)"),
    ]
    .into_iter()
    .map(|(t, e)| Injection::new(t.unwrap(), e).unwrap())
    .collect()
}

fn criterion_4() -> Outcome {
    let mut c = defaults();
    c.regime = Regime::RuleBased;
    let tax = tick_of(3, "tax_compensate").unwrap() as usize;
    let round4 = tick_of(4, "receive_income").unwrap();
    let no_comp = |s: &str| s.starts_with("not(happ(compensate(");

    c.revision = true;
    let (trace, _) = scenario::run(c.clone(), revision_injections()).map_err(|e| e.to_string())?;
    // expectations active at the tax tick: activated before it and not yet resolved
    let activated: usize = trace[..=tax]
        .iter()
        .flat_map(|r| &r.activations)
        .filter(|a| no_comp(&a.expectation))
        .count();
    let resolved_before: usize = trace[..tax]
        .iter()
        .flat_map(|r| r.violations.iter().chain(&r.fulfilments))
        .filter(|o| no_comp(&o.exp))
        .count();
    let active = activated - resolved_before;
    let violated: Vec<_> = trace[tax]
        .violations
        .iter()
        .filter(|v| no_comp(&v.exp))
        .collect();
    ensure(active >= 1 && violated.len() == active, || {
        format!(
            "{active} active no-compensation expectations, {} violations",
            violated.len()
        )
    })?;
    let others: usize = trace
        .iter()
        .enumerate()
        .filter(|(t, _)| *t != tax)
        .flat_map(|(_, r)| &r.violations)
        .filter(|v| no_comp(&v.exp))
        .count();
    ensure(others == 0, || {
        format!("{others} no-compensation violations at other ticks")
    })?;
    let late: Vec<_> = choices(&trace)
        .into_iter()
        .filter(|(t, _, _)| *t >= round4)
        .collect();
    ensure(
        late.len() == 2 * 7 && late.iter().all(|(_, _, l)| l == "plain"),
        || format!("with revision, choices from round 4: {late:?}"),
    )?;

    c.revision = false;
    let (off, _) = scenario::run(c.clone(), revision_injections()).map_err(|e| e.to_string())?;
    let (untouched, _) = scenario::run(c, vec![]).map_err(|e| e.to_string())?;
    let forced = tick_of(3, "choose_location").unwrap();
    let strip = |t: &[TraceRecord]| {
        choices(t)
            .into_iter()
            .filter(|(tick, agent, _)| !(*tick == forced && agent == "c1"))
            .collect::<Vec<_>>()
    };
    ensure(strip(&off) == strip(&untouched), || {
        "without revision, choices changed".into()
    })?;
    ensure(strip(&off).iter().all(|(_, _, l)| l == "plateau"), || {
        "without revision, a citizen left the plateau".into()
    })?;
    Ok(format!(
        "{} violation(s) at tick {tax}; plain from round 4 with revision; unchanged without",
        violated.len()
    ))
}

fn atoms() -> [Formula; 3] {
    [
        Formula::Fluent(Term::atom("p")),
        Formula::Fluent(Term::atom("q")),
        Formula::Happ(Term::atom("e")),
    ]
}

fn formulas(depth: usize) -> Vec<Formula> {
    let mut layer = atoms().to_vec();
    for _ in 1..depth {
        let prev = layer;
        layer = atoms().to_vec();
        for f in &prev {
            let b = || Box::new(f.clone());
            layer.extend([
                Formula::Not(b()),
                Formula::Next(b()),
                Formula::Eventually(b()),
                Formula::Always(b()),
            ]);
        }
        for f in &prev {
            for g in &prev {
                layer.push(Formula::And(vec![f.clone(), g.clone()]));
                layer.push(Formula::Or(vec![f.clone(), g.clone()]));
            }
        }
    }
    layer
}

/// Strong Kleene truth on a finite trace of bitmasks (1 = p, 2 = q, 4 = e).
/// Positions past the end are unknown.
fn kleene(f: &Formula, trace: &[u8], i: usize) -> Option<bool> {
    if i >= trace.len() {
        return None;
    }
    let bit = |b: u8| Some(trace[i] & b != 0);
    match f {
        Formula::Fluent(t) if t.as_atom() == Some("p") => bit(1),
        Formula::Fluent(t) if t.as_atom() == Some("q") => bit(2),
        Formula::Happ(t) if t.as_atom() == Some("e") => bit(4),
        Formula::Not(g) => kleene(g, trace, i).map(|b| !b),
        Formula::And(gs) => {
            let vs: Vec<_> = gs.iter().map(|g| kleene(g, trace, i)).collect();
            if vs.contains(&Some(false)) {
                Some(false)
            } else if vs.iter().all(|v| *v == Some(true)) {
                Some(true)
            } else {
                None
            }
        }
        Formula::Or(gs) => {
            let vs: Vec<_> = gs.iter().map(|g| kleene(g, trace, i)).collect();
            if vs.contains(&Some(true)) {
                Some(true)
            } else if vs.iter().all(|v| *v == Some(false)) {
                Some(false)
            } else {
                None
            }
        }
        Formula::Next(g) => kleene(g, trace, i + 1),
        Formula::Eventually(g) => (i..trace.len())
            .any(|j| kleene(g, trace, j) == Some(true))
            .then_some(true),
        Formula::Always(g) => (i..trace.len())
            .any(|j| kleene(g, trace, j) == Some(false))
            .then_some(false),
        other => panic!("unexpected formula {other}"),
    }
}

fn to_verdict(v: Option<bool>) -> Verdict {
    match v {
        Some(true) => Verdict::True,
        Some(false) => Verdict::False,
        None => Verdict::Unknown,
    }
}

fn residual_verdict(r: &Residual) -> Verdict {
    match r {
        Residual::True => Verdict::True,
        Residual::False => Verdict::False,
        Residual::Pending(_) => Verdict::Unknown,
    }
}

struct Walk<'a> {
    f: &'a Formula,
    obs: &'a [StepObservation],
    path: Vec<u8>,
    pairs: usize,
    disagreements: Vec<String>,
}

impl Walk<'_> {
    fn visit(&mut self, state: &Residual) {
        if self.path.len() == 4 {
            return;
        }
        for bits in 0..8u8 {
            let next = match state {
                Residual::Pending(r) => progress(r, &self.obs[bits as usize]).expect("ground"),
                done => done.clone(),
            };
            self.path.push(bits);
            let trace: Vec<StepObservation> = self
                .path
                .iter()
                .map(|b| self.obs[*b as usize].clone())
                .collect();
            let oracle = to_verdict(kleene(self.f, &self.path, 0));
            let by_progress = residual_verdict(&next);
            let by_trace = trace_eval(self.f, &trace);
            self.pairs += 1;
            if by_progress != by_trace || by_trace != oracle {
                self.disagreements.push(format!(
                    "{} on {:?}: progression {by_progress:?}, trace_eval {by_trace:?}, oracle {oracle:?}",
                    self.f, self.path
                ));
            }
            self.visit(&next);
            self.path.pop();
        }
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let obs: Vec<StepObservation> = (0..8u8)
        .map(|bits| {
            let mut o = StepObservation::new("s");
            if bits & 1 != 0 {
                o = o.with_fluent(Term::atom("p"));
            }
            if bits & 2 != 0 {
                o = o.with_fluent(Term::atom("q"));
            }
            if bits & 4 != 0 {
                o = o.with_event(Term::atom("e"));
            }
            o
        })
        .collect();
    let all = formulas(3);
    ensure(all.len() == 2313, || format!("{} formulas", all.len()))?;
    let mut pairs = 0;
    let mut bad = Vec::new();
    for f in &all {
        let mut w = Walk {
            f,
            obs: &obs,
            path: Vec::new(),
            pairs: 0,
            disagreements: Vec::new(),
        };
        w.visit(&Residual::Pending(f.clone()));
        pairs += w.pairs;
        bad.extend(w.disagreements);
    }
    ensure(bad.is_empty(), || {
        format!("{} disagreements, first: {}", bad.len(), bad[0])
    })?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{} formulas, {pairs} formula/trace pairs, 0 disagreements in {:.2?}",
        all.len(),
        start.elapsed()
    ))
}

#[derive(Clone, Copy, PartialEq)]
enum Arg {
    X,
    Name(&'static str),
}

impl Arg {
    fn ground(self, x: &'static str) -> &'static str {
        match self {
            Arg::X => x,
            Arg::Name(n) => n,
        }
    }

    fn text(self) -> &'static str {
        match self {
            Arg::X => "X",
            Arg::Name(n) => n,
        }
    }
}

/// A random effect rule over events e1/1, e2, e3 and fluents f/1, g/1 with
/// the single variable X.
struct RandomRule {
    initiates: bool,
    event: (&'static str, Option<Arg>),
    body: Vec<(bool, &'static str, Arg)>,
    head: (&'static str, Arg),
}

const NAMES: [&str; 2] = ["a", "b"];

impl RandomRule {
    fn generate(rng: &mut ChaCha8Rng) -> Self {
        let pick = |rng: &mut ChaCha8Rng, var_ok: bool| {
            if var_ok && rng.gen_bool(0.5) {
                Arg::X
            } else {
                Arg::Name(NAMES.choose(rng).unwrap())
            }
        };
        let event = if rng.gen_bool(0.6) {
            ("e1", Some(pick(rng, true)))
        } else {
            (*["e2", "e3"].choose(rng).unwrap(), None)
        };
        let mut bound = event.1 == Some(Arg::X);
        let mut body = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let positive = rng.gen_bool(0.5);
            let arg = pick(rng, positive || bound);
            bound |= positive && arg == Arg::X;
            body.push((positive, *["f", "g"].choose(rng).unwrap(), arg));
        }
        let head = (*["f", "g"].choose(rng).unwrap(), pick(rng, bound));
        RandomRule {
            initiates: rng.gen_bool(0.5),
            event,
            body,
            head,
        }
    }

    fn text(&self) -> String {
        let event = match self.event.1 {
            Some(a) => format!("{}({})", self.event.0, a.text()),
            None => self.event.0.to_string(),
        };
        let kind = if self.initiates {
            "initiates"
        } else {
            "terminates"
        };
        let mut s = format!("{kind}({event}, {}({}))", self.head.0, self.head.1.text());
        let body: Vec<String> = self
            .body
            .iter()
            .map(|(pos, f, a)| {
                format!(
                    "{}({f}({}))",
                    if *pos { "holds_at" } else { "not_holds" },
                    a.text()
                )
            })
            .collect();
        if !body.is_empty() {
            s += " :- ";
            s += &body.join(", ");
        }
        s + ".\n"
    }

    /// Ground fluents this rule affects, by trying both values of X.
    fn affected(&self, state: &BTreeSet<String>, events: &BTreeSet<String>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for x in NAMES {
            let event = match self.event.1 {
                Some(a) => format!("{}({})", self.event.0, a.ground(x)),
                None => self.event.0.to_string(),
            };
            let body_ok = self
                .body
                .iter()
                .all(|(pos, f, a)| state.contains(&format!("{f}({})", a.ground(x))) == *pos);
            if events.contains(&event) && body_ok {
                out.insert(format!("{}({})", self.head.0, self.head.1.ground(x)));
            }
        }
        out
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let vocab: Vec<String> = ["f", "g"]
        .iter()
        .flat_map(|f| NAMES.iter().map(move |n| format!("{f}({n})")))
        .collect();
    let event_names = ["e1(a)", "e1(b)", "e2", "e3"];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut steps = 0;
    for run in 0..1000 {
        let rules: Vec<RandomRule> = (0..rng.gen_range(1..=6))
            .map(|_| RandomRule::generate(&mut rng))
            .collect();
        let text: String = rules.iter().map(RandomRule::text).collect();
        let parsed = parse_rules(&text).map_err(|e| format!("run {run}: {e}\n{text}"))?;
        let mut engine = Engine::new(parsed, "s");
        let mut state: BTreeSet<String> = vocab
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .cloned()
            .collect();
        engine
            .initially(state.iter().map(|f| parse_term(f).unwrap()))
            .map_err(|e| e.to_string())?;
        for _ in 0..rng.gen_range(1..=6) {
            let events: BTreeSet<String> = event_names
                .iter()
                .filter(|_| rng.gen_bool(0.4))
                .map(|e| e.to_string())
                .collect();
            let mut initiated = BTreeSet::new();
            let mut terminated = BTreeSet::new();
            for r in &rules {
                let hit = r.affected(&state, &events);
                if r.initiates {
                    initiated.extend(hit);
                } else {
                    terminated.extend(hit);
                }
            }
            engine
                .step(events.iter().map(|e| parse_term(e).unwrap()), "s")
                .map_err(|e| e.to_string())?;
            let got: BTreeSet<String> = engine
                .current()
                .fluents
                .iter()
                .map(Term::to_string)
                .collect();
            for f in &vocab {
                let want = initiated.contains(f) || (state.contains(f) && !terminated.contains(f));
                ensure(got.contains(f) == want, || {
                    format!("run {run}: {f} expected {want}\nrules:\n{text}events: {events:?}\nstate: {state:?}")
                })?;
            }
            state = got;
            steps += 1;
        }
    }
    Ok(format!(
        "1000 runs, {steps} steps, 0 failures in {:.2?}",
        start.elapsed()
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut floods = 0;
    let mut max_seen = 0;
    for run in 0..1000 {
        let mut c = defaults();
        c.regime = if rng.gen_bool(0.5) {
            Regime::Discretionary
        } else {
            Regime::RuleBased
        };
        c.citizens = rng.gen_range(1..=3);
        c.rounds = rng.gen_range(2..=5);
        c.flood_probability = Probability::new(rng.gen_range(2..=4), 4).unwrap();
        c.income = rng.gen_range(0..=400);
        c.house_value_plain = rng.gen_range(0..=500);
        c.flood_damage = rng.gen_range(0..=700);
        c.seed = rng.gen();
        let v = c.house_value_plain;
        // force everyone onto the plain for a round so floods can land
        let inject: Vec<Injection> = (1..=c.citizens)
            .map(|i| {
                Injection::new(
                    tick_of(1, "choose_location").unwrap(),
                    &format!("change_role(c{i},citizens,citizens_plateaudwellerrole,citizens_plaindwellerrole)"),
                )
                .unwrap()
            })
            .collect();
        let (trace, _) = scenario::run(c, inject).map_err(|e| e.to_string())?;
        floods += event_count(&trace, "flood");
        for r in &trace {
            for f in &r.fluents_added {
                let t = parse_term(f).map_err(|e| e.to_string())?;
                if t.functor() == Some("damage") {
                    let d = t.args()[1]
                        .as_number()
                        .ok_or_else(|| format!("run {run}: {f}"))?;
                    max_seen = max_seen.max(d);
                    ensure(d <= v, || {
                        format!("run {run}, tick {}: {f} exceeds {v}", r.tick)
                    })?;
                }
            }
        }
    }
    ensure(floods > 1000, || format!("only {floods} floods"))?;
    Ok(format!(
        "1000 runs, {floods} floods, largest damage {max_seen}, 0 over cap in {:.2?}",
        start.elapsed()
    ))
}

fn criterion_8() -> Outcome {
    let mut c = defaults();
    c.regime = Regime::Discretionary;
    c.rounds = 2;
    c.variant.punishment_expectation = PunishmentTiming::SameTick;
    c.variant.punish_violators = false;
    let norm = |e: &str| e.starts_with("always(not(location(") && e.ends_with(",plain)))");
    let punish = |e: &str| e.starts_with("happ(punish(");

    c.variant.name = Variant::Norm;
    let (trace, _) = scenario::run(c.clone(), vec![]).map_err(|e| e.to_string())?;
    // a record lists the fluents its events add, which hold from the next tick
    let on_plain = 1 + trace
        .iter()
        .position(|r| {
            r.fluents_added
                .iter()
                .any(|f| f.starts_with("location(") && f.ends_with(",plain)"))
        })
        .ok_or("nobody reached the plain")?;
    let first = trace
        .iter()
        .position(|r| r.violations.iter().any(|v| norm(&v.exp)));
    ensure(first == Some(on_plain), || {
        format!("first norm violation at {first:?}, on the plain at {on_plain}")
    })?;
    let n = trace[on_plain]
        .violations
        .iter()
        .filter(|v| norm(&v.exp))
        .count();
    ensure(n == c.citizens, || {
        format!("{n} norm violations at tick {on_plain}")
    })?;
    let viol_events = trace[on_plain + 1]
        .events
        .iter()
        .filter(|e| e.starts_with("viol("))
        .count();
    ensure(viol_events == n, || {
        format!("{viol_events} viol events at tick {}", on_plain + 1)
    })?;

    c.variant.name = Variant::SecondOrderNorm;
    let (trace, _) = scenario::run(c.clone(), vec![]).map_err(|e| e.to_string())?;
    let next = &trace[on_plain + 1];
    let activated = next
        .activations
        .iter()
        .filter(|a| punish(&a.expectation))
        .count();
    let violated = next.violations.iter().filter(|v| punish(&v.exp)).count();
    ensure(activated == n && violated == n, || {
        format!(
            "without punishment: {activated} activated, {violated} violated at tick {}",
            on_plain + 1
        )
    })?;

    c.variant.punish_violators = true;
    let (trace, _) = scenario::run(c, vec![]).map_err(|e| e.to_string())?;
    let next = &trace[on_plain + 1];
    let punished = next
        .events
        .iter()
        .filter(|e| e.starts_with("punish("))
        .count();
    let fulfilled = next.fulfilments.iter().filter(|v| punish(&v.exp)).count();
    let violated = trace
        .iter()
        .flat_map(|r| &r.violations)
        .filter(|v| punish(&v.exp))
        .count();
    ensure(punished == n && fulfilled == n && violated == 0, || {
        format!(
            "with punishment: {punished} punish events, {fulfilled} fulfilled, {violated} violated"
        )
    })?;
    Ok(format!("{n} norm violations at tick {on_plain}; punishment expectations violated, then fulfilled when punished"))
}

fn criterion_9() -> Outcome {
    let cells = [[3, 3], [0, 5], [5, 0], [1, 1]];
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let pd = NormalFormGame::from_fn(s(&["row", "col"]), vec![s(&["C", "D"]); 2], |p| {
        cells[p[0] * 2 + p[1]].to_vec()
    })
    .map_err(|e| e.to_string())?;
    let best = (0..4)
        .map(|i| vec![i / 2, i % 2])
        .max_by_key(|p| {
            (
                cells[p[0] * 2 + p[1]].iter().sum::<i64>(),
                std::cmp::Reverse(p.clone()),
            )
        })
        .unwrap();
    ensure(
        pd.team_optimal() == best && pd.profile_names(&best) == ["C", "C"],
        || format!("team optimum {:?}", pd.profile_names(&pd.team_optimal())),
    )?;
    ensure(nash_oracle(&pd) == vec![vec![1, 1]], || {
        "PD equilibrium is not (D,D)".into()
    })?;

    let mut c = defaults();
    c.regime = Regime::Discretionary;
    c.variant.name = Variant::TeamReasoning;
    let (trace, _) = scenario::run(c.clone(), vec![]).map_err(|e| e.to_string())?;
    let ch = choices(&trace);
    // in game A, plateau is the cooperative move and plain the defection
    ensure(
        ch.len() as u64 == c.rounds * c.citizens as u64
            && ch.iter().all(|(_, _, l)| l == "plateau"),
        || format!("team choices {ch:?}"),
    )?;
    c.variant.name = Variant::Baseline;
    let (trace, _) = scenario::run(c, vec![]).map_err(|e| e.to_string())?;
    ensure(choices(&trace).iter().all(|(_, _, l)| l == "plain"), || {
        "baseline does not defect".into()
    })?;
    Ok(format!(
        "PD team optimum (C,C); team members cooperate in {} of {} choices",
        ch.len(),
        ch.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("Nash reproduction", criterion_1),
        ("regime behaviour", criterion_2),
        ("social utility", criterion_3),
        ("violation and revision", criterion_4),
        ("progression oracle", criterion_5),
        ("inertia", criterion_6),
        ("flood cap", criterion_7),
        ("norm variants", criterion_8),
        ("team reasoning", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
