//! Per-tick trace records and run summaries.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    /// An active expectation names this agent's own action.
    ExpectedAction,
    /// Most commonly expected location over all citizens.
    Majority,
    /// No usable expectation: the agent's equilibrium strategy.
    NashFallback,
    /// Test injection replaced the agent's choice.
    Injected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub agent: String,
    pub location: String,
    pub source: DecisionSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub rule: String,
    pub grounding: String,
    pub expectation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub cond: String,
    pub exp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub label: String,
    pub events: Vec<String>,
    pub fluents_added: Vec<String>,
    pub fluents_removed: Vec<String>,
    pub activations: Vec<Activation>,
    pub fulfilments: Vec<OutcomeRecord>,
    pub violations: Vec<OutcomeRecord>,
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub regime: String,
    pub variant: String,
    pub citizens: usize,
    pub rounds: u64,
    pub plain_choices: u64,
    pub plateau_choices: u64,
    pub plain_choice_rate: f64,
    pub plateau_choice_rate: f64,
    pub floods: u64,
    pub compensate_events: u64,
    pub compensation_total: i64,
    pub taxed_events: u64,
    pub tax_total: i64,
    pub fulfilments: u64,
    pub violations: u64,
    pub no_compensation_violations: u64,
    pub punishments: u64,
    pub max_damage: i64,
    pub revised_at: Option<u64>,
    pub final_game: String,
}

impl Summary {
    pub(crate) fn finish_rates(&mut self) {
        let total = self.plain_choices + self.plateau_choices;
        if total > 0 {
            self.plain_choice_rate = self.plain_choices as f64 / total as f64;
            self.plateau_choice_rate = self.plateau_choices as f64 / total as f64;
        }
    }
}

/// Totals over a seed sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub plain_choices: u64,
    pub plateau_choices: u64,
    pub plain_choice_rate: f64,
    pub plateau_choice_rate: f64,
    pub floods: u64,
    pub compensate_events: u64,
    pub taxed_events: u64,
    pub fulfilments: u64,
    pub violations: u64,
    pub punishments: u64,
}

impl Aggregate {
    pub fn of(summaries: &[Summary]) -> Self {
        let sum = |f: fn(&Summary) -> u64| summaries.iter().map(f).sum::<u64>();
        let plain = sum(|s| s.plain_choices);
        let plateau = sum(|s| s.plateau_choices);
        let rate = |n: u64| {
            if plain + plateau == 0 {
                0.0
            } else {
                n as f64 / (plain + plateau) as f64
            }
        };
        Aggregate {
            runs: summaries.len(),
            seeds: summaries.iter().map(|s| s.seed).collect(),
            plain_choices: plain,
            plateau_choices: plateau,
            plain_choice_rate: rate(plain),
            plateau_choice_rate: rate(plateau),
            floods: sum(|s| s.floods),
            compensate_events: sum(|s| s.compensate_events),
            taxed_events: sum(|s| s.taxed_events),
            fulfilments: sum(|s| s.fulfilments),
            violations: sum(|s| s.violations),
            punishments: sum(|s| s.punishments),
        }
    }
}

/// One JSON object per line.
pub fn to_json_lines(records: &[TraceRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("trace records serialise") + "\n")
        .collect()
}
