//! Lower-bound instance families.
//!
//! Every generator materializes a concrete [`CongestionGame`] together with
//! two distinguished profiles: the canonical profile σ (an approximate
//! equilibrium or the outcome of a one-round walk, with every player on its
//! *first* strategy) and the comparison profile σ* (every player on its
//! *second* strategy). Walk families also carry the arrival order and the
//! prescribed choices that reproduce σ, and every family records the
//! closed-form social costs and ratios that the simulation is checked
//! against.
//!
//! The families:
//!
//! - [`gen_weighted_tree`]: n-ary trees of weighted players, equilibrium;
//! - [`gen_weighted_walk_tree`]: labeled trees, selfish or cooperative walks;
//! - [`gen_unweighted_multipartite`]: layered unweighted graphs, equilibrium;
//! - [`gen_unweighted_walk_multipartite`]: labeled layered graphs, walks;
//! - [`gen_identical_weighted`]: identical resources, red/blue players;
//! - [`gen_identical_unweighted_walk`]: nested resource sets, exact walks.

mod identical;
mod layered;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{check_equilibrium, run_walk, Tiebreak, WalkMode, REL_TOL};
use crate::error::{Error, Result};
use crate::game::{CongestionGame, StrategyProfile};
use crate::numeric::KahanSum;

pub use identical::{
    gen_identical_unweighted_walk, gen_identical_weighted, identical_walk_ratio,
    identical_walk_ratio_chunked, identical_walk_sizes, default_o_sequence,
};
pub use layered::{
    gen_unweighted_multipartite, gen_unweighted_walk_multipartite, gen_weighted_tree,
    gen_weighted_walk_tree, weighted_tree_until_equilibrium, weighted_walk_tree_tightness, TreeVariant,
};

/// Relative tolerance of closed-form versus simulated social costs.
pub const SUM_TOL: f64 = 1e-6;

/// Tolerance of the per-step `(1+ε)` tightness of walk and deviation checks.
pub const TIGHT_TOL: f64 = 1e-9;

/// The instance families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    WeightedTree,
    WeightedWalkTree,
    UnweightedMultipartite,
    UnweightedWalkMultipartite,
    IdenticalWeighted,
    IdenticalUnweightedWalk,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::WeightedTree,
        Family::WeightedWalkTree,
        Family::UnweightedMultipartite,
        Family::UnweightedWalkMultipartite,
        Family::IdenticalWeighted,
        Family::IdenticalUnweightedWalk,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Family::WeightedTree => "weighted-tree",
            Family::WeightedWalkTree => "weighted-walk-tree",
            Family::UnweightedMultipartite => "unweighted-multipartite",
            Family::UnweightedWalkMultipartite => "unweighted-walk-multipartite",
            Family::IdenticalWeighted => "identical-weighted",
            Family::IdenticalUnweightedWalk => "identical-unweighted-walk",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family `{s}`")))
    }
}

/// Arrival order and prescribed choices reproducing the canonical profile.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkPlan {
    pub mode: WalkMode,
    /// Player indices in arrival order.
    pub order: Vec<usize>,
    /// Strategy index chosen at each step (indexed by step).
    pub prescribed: Vec<usize>,
}

/// Closed-form ratio values of a family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRatio {
    /// The displayed finite-size formula: exact equilibrium/walk cost over
    /// the leading terms of the comparison cost.
    pub finite: f64,
    /// Limit as the instance size grows (s → ∞, and n → ∞ where relevant);
    /// `None` when the level multipliers do not yield a finite limit.
    pub limit: Option<f64>,
    /// Limit n → ∞ at the instance's s (labeled weighted trees only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_limit: Option<f64>,
}

/// Closed-form social costs of σ and σ*.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSums {
    pub sigma: f64,
    pub optimum: f64,
}

/// One verified property of a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity.
    pub value: f64,
    /// What it was compared against.
    pub target: f64,
}

/// A generated instance plus everything needed to re-verify it.
#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub family: Family,
    pub epsilon: f64,
    pub game: CongestionGame,
    /// σ: first strategies (equilibrium or walk outcome).
    pub canonical_profile: StrategyProfile,
    /// σ*: second strategies.
    pub optimal_profile: StrategyProfile,
    pub walk: Option<WalkPlan>,
    /// Whether σ is claimed to be an ε-approximate equilibrium.
    pub claims_equilibrium: bool,
    /// Whether every two-strategy player's cost on σ is exactly `(1+ε)`
    /// times its cost after deviating to its second strategy.
    pub tight_deviation: bool,
    pub closed_form_ratio: Option<ClosedFormRatio>,
    pub closed_form_sums: Option<ClosedFormSums>,
    /// Generator parameters, echoed into the manifest.
    pub parameters: serde_json::Value,
    /// Checks computed at generation time.
    pub checks: Vec<Check>,
}

impl GeneratedInstance {
    /// Simulated `(SUM(σ), SUM(σ*))`.
    pub fn simulated_sums(&self) -> (f64, f64) {
        (
            self.game.social_cost(&self.canonical_profile),
            self.game.social_cost(&self.optimal_profile),
        )
    }

    /// Simulated `SUM(σ) / SUM(σ*)`.
    pub fn simulated_ratio(&self) -> f64 {
        let (a, b) = self.simulated_sums();
        a / b
    }

    /// Whether every recorded check passed.
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Look up a recorded check by name.
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Recompute every check from the game, profiles, walk plan and
    /// closed forms.
    pub fn run_checks(&self) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        let (sim_sigma, sim_opt) = self.simulated_sums();
        if let Some(cf) = self.closed_form_sums {
            out.push(rel_check("sum_sigma", sim_sigma, cf.sigma, SUM_TOL));
            out.push(rel_check("sum_optimum", sim_opt, cf.optimum, SUM_TOL));
        }
        if self.claims_equilibrium {
            let rep = check_equilibrium(&self.game, &self.canonical_profile, self.epsilon)?;
            out.push(Check {
                name: "equilibrium".into(),
                passed: rep.is_equilibrium,
                value: rep.worst_ratio,
                target: 1.0 + self.epsilon,
            });
        }
        if self.tight_deviation {
            out.push(self.deviation_tightness());
        }
        if let Some(plan) = &self.walk {
            let trace = run_walk(
                &self.game,
                &plan.order,
                plan.mode,
                self.epsilon,
                &Tiebreak::Prescribed(plan.prescribed.clone()),
            )?;
            let mismatches = trace
                .final_profile
                .assignment()
                .iter()
                .zip(self.canonical_profile.assignment())
                .filter(|(a, b)| a != b)
                .count();
            out.push(Check {
                name: "walk_reproduces".into(),
                passed: mismatches == 0,
                value: mismatches as f64,
                target: 0.0,
            });
            let bound = 1.0 + self.epsilon;
            let max_ratio = trace.max_step_ratio();
            out.push(Check {
                name: "walk_step_bound".into(),
                passed: max_ratio <= bound * (1.0 + REL_TOL),
                value: max_ratio,
                target: bound,
            });
            let dev = trace
                .steps
                .iter()
                .filter(|s| self.game.players()[s.player].strategies.len() > 1)
                .map(|s| (s.chosen_value / s.min_value - bound).abs() / bound)
                .fold(0.0, f64::max);
            out.push(Check {
                name: "walk_tightness".into(),
                passed: dev <= TIGHT_TOL,
                value: dev,
                target: TIGHT_TOL,
            });
        }
        Ok(out)
    }

    /// Largest relative gap between `cost(first) / cost(second)` and
    /// `(1+ε)` over all two-strategy players (restricted variants only).
    fn deviation_tightness(&self) -> Check {
        let bound = 1.0 + self.epsilon;
        let sigma = &self.canonical_profile;
        let star = &self.optimal_profile;
        let mut dev: f64 = 0.0;
        for (i, p) in self.game.players().iter().enumerate() {
            if p.strategies.len() < 2 {
                continue;
            }
            let (Some(a), Some(b)) = (sigma.assignment()[i], star.assignment()[i]) else {
                continue;
            };
            if a == b {
                continue;
            }
            let r = self.game.strategy_cost(sigma, i, a) / self.game.strategy_cost(sigma, i, b);
            dev = dev.max((r - bound).abs() / bound);
        }
        Check {
            name: "deviation_tightness".into(),
            passed: dev <= TIGHT_TOL,
            value: dev,
            target: TIGHT_TOL,
        }
    }

    /// The sidecar manifest: parameters, closed forms, profiles, walk plan
    /// and checks.
    pub fn manifest(&self) -> serde_json::Value {
        let walk = self.walk.as_ref().map(|w| {
            serde_json::json!({
                "mode": w.mode,
                "order": w.order.iter().map(|&i| &self.game.players()[i].id).collect::<Vec<_>>(),
                "prescribed": w.prescribed,
            })
        });
        let (sim_sigma, sim_opt) = self.simulated_sums();
        serde_json::json!({
            "family": self.family,
            "epsilon": self.epsilon,
            "parameters": self.parameters,
            "players": self.game.num_players(),
            "resources": self.game.num_resources(),
            "claims_equilibrium": self.claims_equilibrium,
            "tight_deviation": self.tight_deviation,
            "closed_form_ratio": self.closed_form_ratio,
            "closed_form_sums": self.closed_form_sums,
            "simulated_sums": { "sigma": sim_sigma, "optimum": sim_opt },
            "simulated_ratio": sim_sigma / sim_opt,
            "canonical_profile": self.canonical_profile.to_json_value(&self.game),
            "optimal_profile": self.optimal_profile.to_json_value(&self.game),
            "walk": walk,
            "checks": self.checks,
        })
    }

    /// Rebuild an instance from a game and its manifest (checks are taken
    /// from the manifest as recorded; call [`run_checks`](Self::run_checks)
    /// to re-derive them).
    pub fn from_manifest(game: CongestionGame, manifest: &serde_json::Value) -> Result<Self> {
        let field = |k: &str| {
            manifest
                .get(k)
                .ok_or_else(|| Error::InvalidInput(format!("manifest lacks `{k}`")))
        };
        let family: Family = serde_json::from_value(field("family")?.clone())?;
        let epsilon = field("epsilon")?
            .as_f64()
            .ok_or_else(|| Error::InvalidInput("manifest epsilon is not a number".into()))?;
        let canonical_profile = StrategyProfile::from_json_value(&game, field("canonical_profile")?)?;
        let optimal_profile = StrategyProfile::from_json_value(&game, field("optimal_profile")?)?;
        let walk = match manifest.get("walk") {
            None | Some(serde_json::Value::Null) => None,
            Some(w) => {
                let mode = match w.get("mode").and_then(|m| m.as_str()) {
                    Some("selfish") => WalkMode::Selfish,
                    Some("cooperative") => WalkMode::Cooperative,
                    _ => return Err(Error::InvalidInput("manifest walk mode".into())),
                };
                let ids: Vec<String> = serde_json::from_value(
                    w.get("order").cloned().unwrap_or(serde_json::Value::Null),
                )?;
                let order = ids
                    .iter()
                    .map(|id| {
                        game.player_index(id)
                            .ok_or_else(|| Error::InvalidInput(format!("unknown player `{id}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let prescribed: Vec<usize> = serde_json::from_value(
                    w.get("prescribed").cloned().unwrap_or(serde_json::Value::Null),
                )?;
                Some(WalkPlan {
                    mode,
                    order,
                    prescribed,
                })
            }
        };
        fn opt<T: serde::de::DeserializeOwned>(m: &serde_json::Value, k: &str) -> Result<Option<T>> {
            Ok(match m.get(k) {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => Some(serde_json::from_value(v.clone())?),
            })
        }
        let checks = match manifest.get("checks") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => Vec::new(),
        };
        Ok(GeneratedInstance {
            family,
            epsilon,
            game,
            canonical_profile,
            optimal_profile,
            walk,
            claims_equilibrium: field("claims_equilibrium")?.as_bool().unwrap_or(false),
            tight_deviation: field("tight_deviation")?.as_bool().unwrap_or(false),
            closed_form_ratio: opt(manifest, "closed_form_ratio")?,
            closed_form_sums: opt(manifest, "closed_form_sums")?,
            parameters: manifest
                .get("parameters")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
            checks,
        })
    }

    /// Run the checks and store them on the instance.
    pub(crate) fn with_checks(mut self) -> Result<Self> {
        self.checks = self.run_checks()?;
        Ok(self)
    }
}

fn rel_check(name: &str, value: f64, target: f64, tol: f64) -> Check {
    let scale = target.abs().max(f64::MIN_POSITIVE);
    Check {
        name: name.into(),
        passed: (value - target).abs() <= tol * scale,
        value,
        target,
    }
}

/// The geometric structure shared by the layered families: the per-level
/// multipliers of the equilibrium cost (`a` for the first half, `c` at the
/// crossing, `b` for the second half), the per-resource costs `k f(k)`,
/// `o f(o)`, the top-level comparison cost `(k2+o2) f2(k2+o2)`, and the
/// overall scale (number of level-1 resources).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LayerShape {
    pub a: f64,
    pub c: f64,
    pub b: f64,
    pub kf1: f64,
    pub kf2: f64,
    pub of1: f64,
    pub of2: f64,
    pub tail: f64,
    pub scale: f64,
}

impl LayerShape {
    /// `(SUM(σ), SUM(σ*), leading part of SUM(σ*))` with `s` levels per half.
    pub fn sums(&self, s: usize) -> (f64, f64, f64) {
        let pow = |x: f64, e: usize| x.powi(e as i32);
        let geo = |x: f64, from: usize, to: usize| {
            let mut acc = KahanSum::default();
            for i in from..to {
                acc.add(pow(x, i));
            }
            acc.value()
        };
        let top = if s == 0 { 0.0 } else { pow(self.a, s - 1) * self.c };
        let sigma = self.kf1 * geo(self.a, 0, s) + top * self.kf2 * geo(self.b, 0, s);
        let opt = self.of1 * geo(self.a, 1, s)
            + top * (self.of2 * geo(self.b, 0, s.saturating_sub(1)) + pow(self.b, s - 1) * self.tail);
        let main = self.of1 * geo(self.a, 0, s) + top * self.of2 * geo(self.b, 0, s);
        (self.scale * sigma, self.scale * opt, self.scale * main)
    }

    /// `SUM(σ)` over the leading part of `SUM(σ*)`.
    pub fn finite_ratio(&self, s: usize) -> f64 {
        let (sigma, _, main) = self.sums(s);
        sigma / main
    }

    /// Limit of `SUM(σ)/SUM(σ*)` as s → ∞, when finite.
    pub fn limit(&self) -> Option<f64> {
        let tol = 1e-9;
        let (a, b, c) = (self.a, self.b, self.c);
        if a > 1.0 + tol && b < 1.0 - tol {
            let p = a / (a - 1.0);
            let q = c / (1.0 - b);
            Some((p * self.kf1 + q * self.kf2) / (p * self.of1 + q * self.of2))
        } else if (a - 1.0).abs() <= tol && (b - 1.0).abs() <= tol {
            // Every level contributes equally; per-level costs dominate.
            Some((self.kf1 + c * self.kf2) / (self.of1 + c * self.of2))
        } else if a < 1.0 - tol && b < 1.0 - tol {
            // Both series converge; only the first half survives.
            Some(self.kf1 / (a * self.of1))
        } else {
            None
        }
    }
}
