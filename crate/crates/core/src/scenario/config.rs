//! Scenario configuration, read from TOML on top of the built-in defaults.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::game::NormalFormGame;
use crate::syntax::parse_term;
use crate::term::Term;

pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

/// Strategies in scenario games are locations.
pub const LOCATIONS: [&str; 2] = ["plain", "plateau"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    RuleBased,
    Discretionary,
}

impl Regime {
    pub fn role(self) -> &'static str {
        match self {
            Regime::RuleBased => "rulesbasedregimerole",
            Regime::Discretionary => "discretionarybasedregimerole",
        }
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rule_based" => Ok(Regime::RuleBased),
            "discretionary" => Ok(Regime::Discretionary),
            _ => Err(format!("expected rule_based or discretionary, got {s:?}")),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::RuleBased => "rule_based",
            Regime::Discretionary => "discretionary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Baseline,
    Norm,
    SecondOrderNorm,
    TeamReasoning,
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "norm" => Ok(Variant::Norm),
            "second_order_norm" => Ok(Variant::SecondOrderNorm),
            "team_reasoning" => Ok(Variant::TeamReasoning),
            _ => Err(format!(
                "expected baseline, norm, second_order_norm or team_reasoning, got {s:?}"
            )),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::Norm => "norm",
            Variant::SecondOrderNorm => "second_order_norm",
            Variant::TeamReasoning => "team_reasoning",
        })
    }
}

/// When a violator is expected to be punished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PunishmentTiming {
    SameTick,
    Eventually,
}

impl FromStr for PunishmentTiming {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "same_tick" => Ok(PunishmentTiming::SameTick),
            "eventually" => Ok(PunishmentTiming::Eventually),
            _ => Err(format!("expected same_tick or eventually, got {s:?}")),
        }
    }
}

/// A probability kept as an exact fraction so flood draws are integer-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probability {
    num: u64,
    den: u64,
}

impl Probability {
    pub fn new(num: u64, den: u64) -> Result<Self, String> {
        if den == 0 {
            return Err("denominator is zero".into());
        }
        if num > den {
            return Err(format!("{num}/{den} is greater than 1"));
        }
        let g = gcd(num, den);
        Ok(Probability {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl FromStr for Probability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("expected a fraction a/b or a decimal in [0,1], got {s:?}");
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Probability::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|n| n.checked_add(frac))
            .ok_or_else(bad)?;
        Probability::new(num, den)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantConfig {
    pub name: Variant,
    pub punish_violators: bool,
    pub punishment_expectation: PunishmentTiming,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub citizens: usize,
    pub rounds: u64,
    pub regime: Regime,
    pub flood_probability: Probability,
    pub income: i64,
    pub house_value_plain: i64,
    pub flood_damage: i64,
    pub seed: u64,
    pub revision: bool,
    pub variant: VariantConfig,
    /// Played when the government may compensate.
    pub game_a: NormalFormGame,
    /// Played when no compensation is announced.
    pub game_b: NormalFormGame,
}

/// Command-line replacements for individual config fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub regime: Option<Regime>,
    pub rounds: Option<u64>,
    pub citizens: Option<usize>,
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub revision: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    variant: RawVariant,
    game: RawGames,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    citizens: i64,
    rounds: i64,
    regime: String,
    flood_probability: toml::Value,
    income: i64,
    house_value_plain: i64,
    flood_damage: i64,
    seed: i64,
    revision: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariant {
    name: String,
    punish_violators: bool,
    punishment_expectation: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGames {
    #[serde(rename = "A")]
    a: RawGame,
    #[serde(rename = "B")]
    b: RawGame,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    players: Vec<String>,
    strategies: Vec<Vec<String>>,
    payoff: Vec<RawCell>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    profile: Vec<String>,
    payoff: Vec<i64>,
}

impl ScenarioConfig {
    /// The built-in configuration.
    pub fn default_config() -> Self {
        Self::from_toml("").expect("the built-in config is valid")
    }

    /// Reads `text` as a partial configuration: keys it leaves out keep
    /// their default values. Arrays and scalars replace defaults wholesale.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let parse = |s: &str| {
            s.parse::<toml::Table>()
                .map_err(|e| ConfigError::Parse(e.to_string()))
        };
        let mut base = parse(DEFAULT_CONFIG)?;
        merge(&mut base, parse(text)?);
        let raw: RawConfig = base
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string().trim().to_string()))?;
        raw.validate()
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(r) = o.regime {
            self.regime = r;
        }
        if let Some(r) = o.rounds {
            self.rounds = r;
        }
        if let Some(c) = o.citizens {
            if c == 0 {
                return Err(invalid("scenario.citizens", "must be at least 1"));
            }
            self.citizens = c;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(v) = o.variant {
            self.variant.name = v;
        }
        if let Some(r) = o.revision {
            self.revision = r;
        }
        Ok(())
    }

    pub fn game(&self, id: GameId) -> &NormalFormGame {
        match id {
            GameId::A => &self.game_a,
            GameId::B => &self.game_b,
        }
    }

    pub fn ticks(&self) -> u64 {
        self.rounds * super::LABELS.len() as u64
    }
}

/// Which of the two configured games a citizen believes it is playing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GameId {
    A,
    B,
}

impl GameId {
    pub fn atom(self) -> Term {
        Term::atom(match self {
            GameId::A => "a",
            GameId::B => "b",
        })
    }
}

impl FromStr for GameId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" | "a" => Ok(GameId::A),
            "B" | "b" => Ok(GameId::B),
            _ => Err(format!("expected A or B, got {s:?}")),
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameId::A => "A",
            GameId::B => "B",
        })
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

impl RawConfig {
    fn validate(self) -> Result<ScenarioConfig, ConfigError> {
        let s = self.scenario;
        let non_negative = |field: &str, v: i64| {
            if v < 0 {
                Err(invalid(field, format!("must not be negative, got {v}")))
            } else {
                Ok(v)
            }
        };
        if s.citizens < 1 {
            return Err(invalid(
                "scenario.citizens",
                format!("must be at least 1, got {}", s.citizens),
            ));
        }
        let flood_probability = match &s.flood_probability {
            toml::Value::String(text) => text.parse(),
            toml::Value::Float(x) => x.to_string().parse(),
            toml::Value::Integer(n) if *n >= 0 => Probability::new(*n as u64, 1),
            other => Err(format!("expected a fraction or decimal, got {other}")),
        }
        .map_err(|m| invalid("scenario.flood_probability", m))?;
        Ok(ScenarioConfig {
            citizens: s.citizens as usize,
            rounds: non_negative("scenario.rounds", s.rounds)? as u64,
            regime: s
                .regime
                .parse()
                .map_err(|m| invalid("scenario.regime", m))?,
            flood_probability,
            income: non_negative("scenario.income", s.income)?,
            house_value_plain: non_negative("scenario.house_value_plain", s.house_value_plain)?,
            flood_damage: non_negative("scenario.flood_damage", s.flood_damage)?,
            seed: non_negative("scenario.seed", s.seed)? as u64,
            revision: s.revision,
            variant: VariantConfig {
                name: self
                    .variant
                    .name
                    .parse()
                    .map_err(|m| invalid("variant.name", m))?,
                punish_violators: self.variant.punish_violators,
                punishment_expectation: self
                    .variant
                    .punishment_expectation
                    .parse()
                    .map_err(|m| invalid("variant.punishment_expectation", m))?,
            },
            game_a: self.game.a.build("game.A")?,
            game_b: self.game.b.build("game.B")?,
        })
    }
}

impl RawGame {
    fn build(self, field: &str) -> Result<NormalFormGame, ConfigError> {
        for p in &self.players {
            if !matches!(parse_term(p), Ok(Term::Atom(_))) {
                return Err(invalid(
                    &format!("{field}.players"),
                    format!("{p:?} is not an atom"),
                ));
            }
        }
        for s in self.strategies.iter().flatten() {
            if !LOCATIONS.contains(&s.as_str()) {
                return Err(invalid(
                    &format!("{field}.strategies"),
                    format!("{s:?} is not a location (plain or plateau)"),
                ));
            }
        }
        let cells = self
            .payoff
            .into_iter()
            .map(|c| (c.profile, c.payoff))
            .collect();
        NormalFormGame::new(self.players, self.strategies, cells)
            .map_err(|e| invalid(field, e.to_string()))
    }
}
