//! The congestion-game data model: resources with latency functions,
//! weighted players with strategy sets, strategy profiles with a cached
//! congestion vector, and personal/social cost.
//!
//! A [`GameSpec`] is the unvalidated (JSON) form of a game; a
//! [`CongestionGame`] is always valid and carries cached structural flags.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::LatencyFunction;

/// A resource: identifier plus latency function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Resource {
    #[serde(with = "id_repr")]
    pub id: String,
    pub latency: LatencyFunction,
}

/// A player: identifier, weight and strategies (sorted resource indices).
#[derive(Clone, Debug)]
pub struct Player {
    pub id: String,
    pub weight: f64,
    pub strategies: Vec<Vec<usize>>,
}

/// Structural flags derived from a game.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameFlags {
    /// All weights equal 1.
    pub unweighted: bool,
    /// All players have the same strategy set.
    pub symmetric: bool,
    /// Every strategy consists of exactly one resource.
    pub singleton: bool,
    /// All resources share the same latency function.
    pub identical: bool,
}

/// A validated congestion game.
#[derive(Clone, Debug)]
pub struct CongestionGame {
    resources: Vec<Resource>,
    players: Vec<Player>,
    flags: GameFlags,
}

/// One invariant violation found by [`GameSpec::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// The offending player or resource, e.g. `player p3`.
    pub subject: String,
    /// What is wrong with it.
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// JSON player record; strategies reference resource identifiers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlayerSpec {
    #[serde(with = "id_repr")]
    pub id: String,
    pub weight: f64,
    #[serde(with = "id_list_repr")]
    pub strategies: Vec<Vec<String>>,
}

/// Unvalidated game, matching the JSON instance schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameSpec {
    pub resources: Vec<Resource>,
    pub players: Vec<PlayerSpec>,
}

impl GameSpec {
    /// All invariant violations; empty iff the spec builds a valid game.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.players.len() < 2 {
            out.push(Violation {
                subject: "game".into(),
                message: format!("needs at least 2 players, has {}", self.players.len()),
            });
        }
        if self.resources.is_empty() {
            out.push(Violation {
                subject: "game".into(),
                message: "needs at least 1 resource".into(),
            });
        }
        let mut index = HashMap::new();
        for r in &self.resources {
            if index.insert(r.id.as_str(), ()).is_some() {
                out.push(Violation {
                    subject: format!("resource {}", r.id),
                    message: "duplicate resource id".into(),
                });
            }
        }
        let mut seen_players = HashMap::new();
        for p in &self.players {
            let subject = format!("player {}", p.id);
            if seen_players.insert(p.id.as_str(), ()).is_some() {
                out.push(Violation {
                    subject: subject.clone(),
                    message: "duplicate player id".into(),
                });
            }
            if !(p.weight.is_finite() && p.weight > 0.0) {
                out.push(Violation {
                    subject: subject.clone(),
                    message: format!("weight {} is not a positive real", p.weight),
                });
            }
            if p.strategies.is_empty() {
                out.push(Violation {
                    subject: subject.clone(),
                    message: "empty strategy list".into(),
                });
            }
            for (si, s) in p.strategies.iter().enumerate() {
                if s.is_empty() {
                    out.push(Violation {
                        subject: subject.clone(),
                        message: format!("strategy {si} is empty"),
                    });
                }
                for rid in s {
                    if !index.contains_key(rid.as_str()) {
                        out.push(Violation {
                            subject: subject.clone(),
                            message: format!("strategy {si} references unknown resource {rid}"),
                        });
                    }
                }
            }
        }
        out
    }
}

impl CongestionGame {
    /// Build a game from resources and players whose strategies are given
    /// as resource indices. Strategies are sorted and de-duplicated.
    pub fn new(resources: Vec<Resource>, players: Vec<Player>) -> Result<Self> {
        let spec_violations = {
            let mut v = Vec::new();
            if players.len() < 2 {
                v.push(format!("needs at least 2 players, has {}", players.len()));
            }
            if resources.is_empty() {
                v.push("needs at least 1 resource".to_string());
            }
            for p in &players {
                if !(p.weight.is_finite() && p.weight > 0.0) {
                    v.push(format!("player {}: weight {} is not positive", p.id, p.weight));
                }
                if p.strategies.is_empty() {
                    v.push(format!("player {}: empty strategy list", p.id));
                }
                for s in &p.strategies {
                    if s.is_empty() {
                        v.push(format!("player {}: empty strategy", p.id));
                    }
                    if s.iter().any(|&r| r >= resources.len()) {
                        v.push(format!("player {}: strategy references unknown resource", p.id));
                    }
                }
            }
            v
        };
        if !spec_violations.is_empty() {
            return Err(Error::InvalidInput(spec_violations.join("; ")));
        }
        let mut players = players;
        for p in &mut players {
            for s in &mut p.strategies {
                s.sort_unstable();
                s.dedup();
            }
        }
        let flags = compute_flags(&resources, &players);
        Ok(CongestionGame {
            resources,
            players,
            flags,
        })
    }

    /// Build a game from its JSON-schema form.
    pub fn from_spec(spec: GameSpec) -> Result<Self> {
        let violations = spec.validate();
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidInput(msg.join("; ")));
        }
        let index: HashMap<String, usize> = spec
            .resources
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        let players = spec
            .players
            .into_iter()
            .map(|p| Player {
                id: p.id,
                weight: p.weight,
                strategies: p
                    .strategies
                    .iter()
                    .map(|s| s.iter().map(|rid| index[rid]).collect())
                    .collect(),
            })
            .collect();
        CongestionGame::new(spec.resources, players)
    }

    /// The JSON-schema form of this game.
    pub fn to_spec(&self) -> GameSpec {
        GameSpec {
            resources: self.resources.clone(),
            players: self
                .players
                .iter()
                .map(|p| PlayerSpec {
                    id: p.id.clone(),
                    weight: p.weight,
                    strategies: p
                        .strategies
                        .iter()
                        .map(|s| s.iter().map(|&r| self.resources[r].id.clone()).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    /// Parse a game from the JSON instance schema.
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: GameSpec = serde_json::from_str(s)?;
        Self::from_spec(spec)
    }

    /// Serialize to the JSON instance schema.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_spec())?)
    }

    /// Resources in index order.
    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    /// Players in index order.
    pub fn players(&self) -> &[Player] {
        &self.players
    }

    /// Number of players.
    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    /// Number of resources.
    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    /// Cached structural flags.
    pub fn flags(&self) -> GameFlags {
        self.flags
    }

    /// Latency function of resource `e`.
    #[inline]
    pub fn latency(&self, e: usize) -> &LatencyFunction {
        &self.resources[e].latency
    }

    /// Number of strategy profiles, as a real (may exceed `u64`).
    pub fn profile_count(&self) -> f64 {
        self.players
            .iter()
            .map(|p| p.strategies.len() as f64)
            .product()
    }

    /// Cost of player `i`: sum of latencies over its chosen resources.
    pub fn player_cost(&self, profile: &StrategyProfile, i: usize) -> Result<f64> {
        let s = profile.assignment[i].ok_or(Error::UnassignedPlayer(i))?;
        Ok(self.players[i].strategies[s]
            .iter()
            .map(|&e| self.latency(e).eval(profile.congestion[e]))
            .sum())
    }

    /// Social cost `sum_e k_e f_e(k_e)` (resource side); unassigned players
    /// contribute nothing.
    pub fn social_cost(&self, profile: &StrategyProfile) -> f64 {
        profile
            .congestion
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0.0)
            .map(|(e, &k)| k * self.latency(e).eval(k))
            .sum()
    }

    /// Social cost `sum_i w_i cost_i` (player side), for cross-checks.
    pub fn social_cost_player_side(&self, profile: &StrategyProfile) -> f64 {
        (0..self.players.len())
            .filter_map(|i| {
                self.player_cost(profile, i)
                    .ok()
                    .map(|c| self.players[i].weight * c)
            })
            .sum()
    }

    /// Cost player `i` would pay on strategy `s` given `profile`, counting
    /// its own weight once on every resource of `s`.
    pub fn strategy_cost(&self, profile: &StrategyProfile, i: usize, s: usize) -> f64 {
        let w = self.players[i].weight;
        let current: &[usize] = match profile.assignment[i] {
            Some(c) => &self.players[i].strategies[c],
            None => &[],
        };
        self.players[i].strategies[s]
            .iter()
            .map(|&e| {
                let k = if current.binary_search(&e).is_ok() {
                    profile.congestion[e]
                } else {
                    profile.congestion[e] + w
                };
                self.latency(e).eval(k)
            })
            .sum()
    }

    /// Increase of the social cost if unassigned player `i` joins on `s`.
    pub fn marginal_social_cost(&self, profile: &StrategyProfile, i: usize, s: usize) -> f64 {
        let w = self.players[i].weight;
        self.players[i].strategies[s]
            .iter()
            .map(|&e| self.latency(e).marginal(profile.congestion[e], w))
            .sum()
    }

    /// Look up a player index by identifier.
    pub fn player_index(&self, id: &str) -> Option<usize> {
        self.players.iter().position(|p| p.id == id)
    }
}

fn compute_flags(resources: &[Resource], players: &[Player]) -> GameFlags {
    let unweighted = players.iter().all(|p| p.weight == 1.0);
    let singleton = players
        .iter()
        .all(|p| p.strategies.iter().all(|s| s.len() == 1));
    let canonical = |p: &Player| {
        let mut s = p.strategies.clone();
        s.sort();
        s.dedup();
        s
    };
    let first = canonical(&players[0]);
    let symmetric = players.iter().skip(1).all(|p| canonical(p) == first);
    let identical = resources.iter().all(|r| r.latency == resources[0].latency);
    GameFlags {
        unweighted,
        symmetric,
        singleton,
        identical,
    }
}

/// Assignment of players to strategy indices plus the congestion it induces.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    assignment: Vec<Option<usize>>,
    congestion: Vec<f64>,
}

impl StrategyProfile {
    /// The profile in which nobody has arrived yet.
    pub fn empty(game: &CongestionGame) -> Self {
        StrategyProfile {
            assignment: vec![None; game.num_players()],
            congestion: vec![0.0; game.num_resources()],
        }
    }

    /// Profile from explicit strategy indices (`None` = not yet arrived).
    pub fn from_assignment(game: &CongestionGame, assignment: Vec<Option<usize>>) -> Result<Self> {
        if assignment.len() != game.num_players() {
            return Err(Error::InvalidInput(format!(
                "assignment has {} entries for {} players",
                assignment.len(),
                game.num_players()
            )));
        }
        for (i, a) in assignment.iter().enumerate() {
            if let Some(s) = a {
                if *s >= game.players[i].strategies.len() {
                    return Err(Error::InvalidInput(format!(
                        "player {} has no strategy {s}",
                        game.players[i].id
                    )));
                }
            }
        }
        let mut p = StrategyProfile {
            assignment,
            congestion: vec![0.0; game.num_resources()],
        };
        p.recompute(game);
        Ok(p)
    }

    /// Total profile from strategy indices.
    pub fn from_choices(game: &CongestionGame, choices: &[usize]) -> Result<Self> {
        Self::from_assignment(game, choices.iter().map(|&c| Some(c)).collect())
    }

    /// Strategy index per player.
    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    /// Cached congestion per resource.
    pub fn congestion(&self) -> &[f64] {
        &self.congestion
    }

    /// `true` when every player is assigned.
    pub fn is_total(&self) -> bool {
        self.assignment.iter().all(Option::is_some)
    }

    /// First unassigned player, if any.
    pub fn first_unassigned(&self) -> Option<usize> {
        self.assignment.iter().position(Option::is_none)
    }

    /// Change player `i`'s strategy, updating congestion incrementally.
    pub fn set(&mut self, game: &CongestionGame, i: usize, choice: Option<usize>) {
        let p = &game.players[i];
        if let Some(old) = self.assignment[i] {
            for &e in &p.strategies[old] {
                self.congestion[e] -= p.weight;
                if self.congestion[e].abs() < 1e-12 * p.weight {
                    self.congestion[e] = 0.0;
                }
            }
        }
        if let Some(new) = choice {
            for &e in &p.strategies[new] {
                self.congestion[e] += p.weight;
            }
        }
        self.assignment[i] = choice;
    }

    /// Recompute the congestion vector from scratch.
    pub fn recompute(&mut self, game: &CongestionGame) {
        self.congestion.iter_mut().for_each(|k| *k = 0.0);
        for (i, a) in self.assignment.iter().enumerate() {
            if let Some(s) = a {
                let p = &game.players[i];
                for &e in &p.strategies[*s] {
                    self.congestion[e] += p.weight;
                }
            }
        }
    }

    /// JSON form `{"assignment": {player_id: index | null}}`.
    pub fn to_json_value(&self, game: &CongestionGame) -> serde_json::Value {
        let map: BTreeMap<&str, Option<usize>> = game
            .players
            .iter()
            .zip(&self.assignment)
            .map(|(p, a)| (p.id.as_str(), *a))
            .collect();
        serde_json::json!({ "assignment": map })
    }

    /// Parse the JSON profile form against `game`; players missing from
    /// the map are treated as unassigned.
    pub fn from_json_value(game: &CongestionGame, v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Repr {
            assignment: BTreeMap<String, Option<usize>>,
        }
        let repr: Repr = serde_json::from_value(v.clone())?;
        let ids: HashMap<&str, usize> = game
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect();
        let mut assignment = vec![None; game.num_players()];
        for (pid, a) in repr.assignment {
            let i = *ids
                .get(pid.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("unknown player id {pid}")))?;
            assignment[i] = a;
        }
        Self::from_assignment(game, assignment)
    }
}

/// Identifiers may be written as JSON strings or non-negative integers.
mod id_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum IdRepr {
        Num(u64),
        Str(String),
    }

    impl From<IdRepr> for String {
        fn from(r: IdRepr) -> String {
            match r {
                IdRepr::Num(n) => n.to_string(),
                IdRepr::Str(s) => s,
            }
        }
    }

    pub fn serialize<S: Serializer>(id: &str, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(id)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
        Ok(IdRepr::deserialize(d)?.into())
    }
}

mod id_list_repr {
    use super::id_repr::IdRepr;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<String>], s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<String>>, D::Error> {
        let raw: Vec<Vec<IdRepr>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|s| s.into_iter().map(String::from).collect())
            .collect())
    }
}
