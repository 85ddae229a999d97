//! Normal-form games with pure-strategy Nash and team-optimal solutions.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// One strategy index per player.
pub type Profile = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("a game needs at least one player")]
    NoPlayers,
    #[error("player {0} has no strategies")]
    NoStrategies(String),
    #[error("player {player} lists strategy {strategy} twice")]
    DuplicateStrategy { player: String, strategy: String },
    #[error("expected {expected} strategy lists, got {got}")]
    StrategyCount { expected: usize, got: usize },
    #[error("unknown strategy {strategy} for player {player}")]
    UnknownStrategy { player: String, strategy: String },
    #[error("profile {0} has the wrong number of entries")]
    ProfileLength(String),
    #[error("payoff for {profile} has {got} entries, expected {expected}")]
    PayoffLength {
        profile: String,
        expected: usize,
        got: usize,
    },
    #[error("payoff for {0} is given twice")]
    DuplicatePayoff(String),
    #[error("no payoff for profile {0}")]
    MissingPayoff(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalFormGame {
    players: Vec<String>,
    strategies: Vec<Vec<String>>,
    payoffs: BTreeMap<Profile, Vec<i64>>,
}

impl NormalFormGame {
    /// `payoffs` maps strategy names (one per player) to a payoff vector;
    /// every profile of the cross product must be present exactly once.
    pub fn new(
        players: Vec<String>,
        strategies: Vec<Vec<String>>,
        payoffs: Vec<(Vec<String>, Vec<i64>)>,
    ) -> Result<Self, GameError> {
        if players.is_empty() {
            return Err(GameError::NoPlayers);
        }
        if strategies.len() != players.len() {
            return Err(GameError::StrategyCount {
                expected: players.len(),
                got: strategies.len(),
            });
        }
        for (player, list) in players.iter().zip(&strategies) {
            if list.is_empty() {
                return Err(GameError::NoStrategies(player.clone()));
            }
            for (i, s) in list.iter().enumerate() {
                if list[..i].contains(s) {
                    return Err(GameError::DuplicateStrategy {
                        player: player.clone(),
                        strategy: s.clone(),
                    });
                }
            }
        }
        let mut game = NormalFormGame {
            players,
            strategies,
            payoffs: BTreeMap::new(),
        };
        for (names, payoff) in payoffs {
            let label = format!("({})", names.join(","));
            if names.len() != game.players.len() {
                return Err(GameError::ProfileLength(label));
            }
            if payoff.len() != game.players.len() {
                return Err(GameError::PayoffLength {
                    profile: label,
                    expected: game.players.len(),
                    got: payoff.len(),
                });
            }
            let profile = names
                .iter()
                .enumerate()
                .map(|(p, name)| {
                    game.strategy_index(p, name)
                        .ok_or_else(|| GameError::UnknownStrategy {
                            player: game.players[p].clone(),
                            strategy: name.clone(),
                        })
                })
                .collect::<Result<Profile, _>>()?;
            if game.payoffs.insert(profile, payoff).is_some() {
                return Err(GameError::DuplicatePayoff(label));
            }
        }
        if let Some(missing) = game.profiles().find(|p| !game.payoffs.contains_key(p)) {
            return Err(GameError::MissingPayoff(game.profile_string(&missing)));
        }
        Ok(game)
    }

    /// Builds a game from a payoff function over strategy indices.
    pub fn from_fn(
        players: Vec<String>,
        strategies: Vec<Vec<String>>,
        payoff: impl Fn(&[usize]) -> Vec<i64>,
    ) -> Result<Self, GameError> {
        let sizes: Vec<usize> = strategies.iter().map(Vec::len).collect();
        let table = all_profiles(&sizes)
            .map(|p| {
                let names = p
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| strategies[i][s].clone())
                    .collect();
                (names, payoff(&p))
            })
            .collect();
        Self::new(players, strategies, table)
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn strategies(&self, player: usize) -> &[String] {
        &self.strategies[player]
    }

    pub fn strategy_index(&self, player: usize, name: &str) -> Option<usize> {
        self.strategies[player].iter().position(|s| s == name)
    }

    pub fn payoff(&self, profile: &[usize]) -> &[i64] {
        &self.payoffs[profile]
    }

    pub fn profile_names(&self, profile: &[usize]) -> Vec<&str> {
        profile
            .iter()
            .enumerate()
            .map(|(p, &s)| self.strategies[p][s].as_str())
            .collect()
    }

    pub fn profile_string(&self, profile: &[usize]) -> String {
        format!("({})", self.profile_names(profile).join(","))
    }

    /// All profiles in lexicographic order of strategy indices.
    pub fn profiles(&self) -> impl Iterator<Item = Profile> {
        let sizes: Vec<usize> = self.strategies.iter().map(Vec::len).collect();
        all_profiles(&sizes)
    }

    /// Profiles where no player gains strictly by deviating alone.
    pub fn pure_nash(&self) -> Vec<Profile> {
        self.profiles().filter(|p| self.is_nash(p)).collect()
    }

    pub fn is_nash(&self, profile: &[usize]) -> bool {
        let current = self.payoff(profile);
        (0..self.players.len()).all(|player| {
            let mut alt = profile.to_vec();
            (0..self.strategies[player].len()).all(|s| {
                alt[player] = s;
                self.payoff(&alt)[player] <= current[player]
            })
        })
    }

    /// The profile with the largest payoff sum; the first in lexicographic
    /// order wins ties.
    pub fn team_optimal(&self) -> Profile {
        let mut best: Option<(i64, Profile)> = None;
        for p in self.profiles() {
            let sum = self.payoff_sum(&p);
            if best.as_ref().is_none_or(|(b, _)| sum > *b) {
                best = Some((sum, p));
            }
        }
        best.expect("games have at least one profile").1
    }

    pub fn payoff_sum(&self, profile: &[usize]) -> i64 {
        self.payoff(profile).iter().sum()
    }
}

impl fmt::Display for NormalFormGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "players: {}", self.players.join(", "))?;
        for p in self.profiles() {
            let payoff: Vec<String> = self.payoff(&p).iter().map(i64::to_string).collect();
            writeln!(f, "  {} -> ({})", self.profile_string(&p), payoff.join(","))?;
        }
        Ok(())
    }
}

fn all_profiles(sizes: &[usize]) -> impl Iterator<Item = Profile> {
    let total: usize = sizes.iter().product();
    let sizes = sizes.to_vec();
    (0..total).map(move |mut n| {
        let mut p = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            p[i] = n % sizes[i];
            n /= sizes[i];
        }
        p
    })
}
