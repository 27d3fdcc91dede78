//! Solution concepts: ε-approximate pure Nash equilibrium verification,
//! selfish and cooperative one-round walks, brute-force optima and worst
//! equilibria, and per-instance efficiency ratios.

use rayon::prelude::*;
use serde::Serialize;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::game::{CongestionGame, StrategyProfile};

/// Relative slack applied to every (1+ε) comparison.
pub const REL_TOL: f64 = 1e-9;

/// Outcome of [`check_equilibrium`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// `worst_ratio <= (1+ε)(1+1e-9)`.
    pub is_equilibrium: bool,
    /// Maximum over players and alternative strategies of
    /// `cost_i(σ) / cost_i(σ_{-i}, S)`; `0` if nobody has an alternative.
    pub worst_ratio: f64,
    /// `(player, deviation strategy)` attaining the maximum.
    pub witness: Option<(usize, usize)>,
}

/// Verify that a total profile is an ε-approximate pure Nash equilibrium.
///
/// Every player is compared against every alternative strategy; the
/// deviation cost counts the deviator's weight on the target resources.
pub fn check_equilibrium(
    game: &CongestionGame,
    profile: &StrategyProfile,
    eps: f64,
) -> Result<EquilibriumReport> {
    check_eps(eps)?;
    if let Some(i) = profile.first_unassigned() {
        return Err(Error::PartialProfile(i));
    }
    let best = (0..game.num_players())
        .into_par_iter()
        .map(|i| player_worst_ratio(game, profile, i))
        .reduce(|| (0.0, None), pick_worse);
    Ok(report(best, eps))
}

fn report(best: (f64, Option<(usize, usize)>), eps: f64) -> EquilibriumReport {
    EquilibriumReport {
        is_equilibrium: best.0 <= (1.0 + eps) * (1.0 + REL_TOL),
        worst_ratio: best.0,
        witness: best.1,
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("epsilon {eps} must be >= 0")))
    }
}

/// Larger ratio wins; ties go to the smaller player index.
fn pick_worse(
    a: (f64, Option<(usize, usize)>),
    b: (f64, Option<(usize, usize)>),
) -> (f64, Option<(usize, usize)>) {
    match (a.1, b.1) {
        (None, _) => b,
        (_, None) => a,
        (Some(wa), Some(wb)) => {
            if b.0 > a.0 || (b.0 == a.0 && wb < wa) {
                b
            } else {
                a
            }
        }
    }
}

fn player_worst_ratio(
    game: &CongestionGame,
    profile: &StrategyProfile,
    i: usize,
) -> (f64, Option<(usize, usize)>) {
    let current = match profile.assignment()[i] {
        Some(c) => c,
        None => return (0.0, None),
    };
    let n_strats = game.players()[i].strategies.len();
    if n_strats < 2 {
        return (0.0, None);
    }
    let cost = game.strategy_cost(profile, i, current);
    let mut best = (0.0, None);
    for s in (0..n_strats).filter(|&s| s != current) {
        let dev = game.strategy_cost(profile, i, s);
        let r = if dev > 0.0 {
            cost / dev
        } else if cost > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        if best.1.is_none() || r > best.0 {
            best = (r, Some((i, s)));
        }
    }
    best
}

/// Sequential equilibrium ratio, used inside parallel enumerations.
fn worst_ratio_seq(game: &CongestionGame, profile: &StrategyProfile) -> f64 {
    (0..game.num_players())
        .map(|i| player_worst_ratio(game, profile, i).0)
        .fold(0.0, f64::max)
}

/// How arriving players evaluate strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkMode {
    /// Minimize the arriving player's own cost.
    Selfish,
    /// Minimize the increase of the social cost.
    Cooperative,
}

/// How the walk resolves the choice at each step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tiebreak {
    /// Exact greedy; ties go to the lowest strategy index.
    LowestIndex,
    /// Strategy index per step (in walk order). Each prescribed choice
    /// must be within a factor (1+ε) of the greedy minimum.
    Prescribed(Vec<usize>),
}

/// One arrival of a walk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkStep {
    pub player: usize,
    pub choice: usize,
    /// Greedy minimum over the player's strategies.
    pub min_value: f64,
    /// Value of the chosen strategy.
    pub chosen_value: f64,
}

/// Complete record of a one-round walk.
#[derive(Clone, Debug)]
pub struct WalkTrace {
    pub order: Vec<usize>,
    pub mode: WalkMode,
    pub epsilon: f64,
    pub steps: Vec<WalkStep>,
    pub final_profile: StrategyProfile,
}

impl WalkTrace {
    /// Largest `chosen_value / min_value` over all steps.
    pub fn max_step_ratio(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.chosen_value / s.min_value)
            .fold(0.0, f64::max)
    }

    /// JSON form with player identifiers and per-step minima.
    pub fn to_json_value(&self, game: &CongestionGame) -> serde_json::Value {
        let steps: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "player": game.players()[s.player].id,
                    "choice": s.choice,
                    "min_value": s.min_value,
                    "chosen_value": s.chosen_value,
                })
            })
            .collect();
        serde_json::json!({
            "mode": self.mode,
            "epsilon": self.epsilon,
            "steps": steps,
            "social_cost": game.social_cost(&self.final_profile),
            "final_profile": self.final_profile.to_json_value(game),
        })
    }
}

/// Validate that `order` is a permutation of the players.
pub fn check_order(game: &CongestionGame, order: &[usize]) -> Result<()> {
    let n = game.num_players();
    if order.len() != n {
        return Err(Error::InvalidInput(format!(
            "order has {} entries for {n} players",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in order {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidInput(format!(
                "order is not a permutation (player {p})"
            )));
        }
    }
    Ok(())
}

/// Run an ε-approximate one-round walk in the given arrival order.
pub fn run_walk(
    game: &CongestionGame,
    order: &[usize],
    mode: WalkMode,
    eps: f64,
    tiebreak: &Tiebreak,
) -> Result<WalkTrace> {
    check_eps(eps)?;
    check_order(game, order)?;
    if let Tiebreak::Prescribed(p) = tiebreak {
        if p.len() != order.len() {
            return Err(Error::InvalidInput(format!(
                "{} prescribed choices for {} steps",
                p.len(),
                order.len()
            )));
        }
    }
    let mut profile = StrategyProfile::empty(game);
    let mut steps = Vec::with_capacity(order.len());
    for (step, &i) in order.iter().enumerate() {
        let n_strats = game.players()[i].strategies.len();
        let value = |s: usize, prof: &StrategyProfile| match mode {
            WalkMode::Selfish => game.strategy_cost(prof, i, s),
            WalkMode::Cooperative => game.marginal_social_cost(prof, i, s),
        };
        let mut min_s = 0;
        let mut min_v = value(0, &profile);
        for s in 1..n_strats {
            let v = value(s, &profile);
            if v < min_v {
                min_v = v;
                min_s = s;
            }
        }
        let (choice, chosen_value) = match tiebreak {
            Tiebreak::LowestIndex => (min_s, min_v),
            Tiebreak::Prescribed(p) => {
                let c = p[step];
                if c >= n_strats {
                    return Err(Error::InvalidInput(format!(
                        "step {step}: player {i} has no strategy {c}"
                    )));
                }
                let v = value(c, &profile);
                let bound = (1.0 + eps) * min_v;
                if v > bound * (1.0 + REL_TOL) {
                    return Err(Error::WalkViolation {
                        step,
                        player: i,
                        chosen: v,
                        bound,
                    });
                }
                (c, v)
            }
        };
        profile.set(game, i, Some(choice));
        steps.push(WalkStep {
            player: i,
            choice,
            min_value: min_v,
            chosen_value,
        });
    }
    Ok(WalkTrace {
        order: order.to_vec(),
        mode,
        epsilon: eps,
        steps,
        final_profile: profile,
    })
}

/// Decode a mixed-radix profile index; player 0 is the most significant
/// digit, so index order equals lexicographic order of assignments.
fn decode(radices: &[usize], mut idx: u64, out: &mut [usize]) {
    for p in (0..radices.len()).rev() {
        out[p] = (idx % radices[p] as u64) as usize;
        idx /= radices[p] as u64;
    }
}

/// Advance to the next assignment in lexicographic order; returns the
/// players whose strategy changed (a suffix starting at the returned index).
fn advance(radices: &[usize], digits: &mut [usize]) -> usize {
    let mut p = radices.len();
    while p > 0 {
        p -= 1;
        digits[p] += 1;
        if digits[p] < radices[p] {
            return p;
        }
        digits[p] = 0;
    }
    0
}

const CHUNK: u64 = 4096;

/// Fold `visit(index, profile)` over all profiles in parallel chunks and
/// reduce the per-chunk results with `merge`.
fn enumerate<T: Send>(
    game: &CongestionGame,
    caps: &Caps,
    init: impl Fn() -> T + Sync,
    visit: impl Fn(&mut T, u64, &StrategyProfile) + Sync,
    merge: impl Fn(T, T) -> T + Sync + Send,
) -> Result<T> {
    let total = game.profile_count();
    Caps::check("profile enumeration", total, caps.enum_profiles)?;
    let total = total as u64;
    let radices: Vec<usize> = game.players().iter().map(|p| p.strategies.len()).collect();
    let chunks = total.div_ceil(CHUNK);
    let result = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut digits = vec![0usize; radices.len()];
            decode(&radices, start, &mut digits);
            let choices: Vec<Option<usize>> = digits.iter().map(|&d| Some(d)).collect();
            let mut profile = StrategyProfile::from_assignment(game, choices)
                .expect("decoded digits are in range");
            let mut acc = init();
            for idx in start..end {
                visit(&mut acc, idx, &profile);
                if idx + 1 < end {
                    let from = advance(&radices, &mut digits);
                    for (p, &d) in digits.iter().enumerate().skip(from) {
                        if profile.assignment()[p] != Some(d) {
                            profile.set(game, p, Some(d));
                        }
                    }
                }
            }
            acc
        })
        .reduce(&init, &merge);
    Ok(result)
}

/// Best `(value, index)`: smaller value wins, ties to the smaller index.
type Best = Option<(f64, u64)>;

fn min_best(a: Best, b: Best) -> Best {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
            y
        } else {
            x
        }),
    }
}

fn max_best(a: Best, b: Best) -> Best {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
            y
        } else {
            x
        }),
    }
}

fn profile_at(game: &CongestionGame, idx: u64) -> StrategyProfile {
    let radices: Vec<usize> = game.players().iter().map(|p| p.strategies.len()).collect();
    let mut digits = vec![0; radices.len()];
    decode(&radices, idx, &mut digits);
    StrategyProfile::from_choices(game, &digits).expect("decoded digits are in range")
}

/// Social optimum by exhaustive enumeration (lexicographically first
/// minimizer).
pub fn brute_force_optimum(game: &CongestionGame, caps: &Caps) -> Result<(StrategyProfile, f64)> {
    let best = enumerate(
        game,
        caps,
        || None,
        |acc: &mut Best, idx, p| *acc = min_best(*acc, Some((game.social_cost(p), idx))),
        min_best,
    )?
    .expect("games have at least one profile");
    Ok((profile_at(game, best.1), best.0))
}

/// Result of [`worst_equilibrium`].
#[derive(Clone, Debug)]
pub enum WorstEquilibrium {
    /// The max-cost ε-equilibrium and its ratio to the optimum.
    Found {
        profile: StrategyProfile,
        social_cost: f64,
        optimum: f64,
        poa: f64,
    },
    /// No profile is an ε-equilibrium (possible in weighted games).
    NoEquilibrium { optimum: f64 },
}

impl WorstEquilibrium {
    /// The ratio, if an equilibrium exists.
    pub fn poa(&self) -> Option<f64> {
        match self {
            WorstEquilibrium::Found { poa, .. } => Some(*poa),
            WorstEquilibrium::NoEquilibrium { .. } => None,
        }
    }
}

/// Worst ε-approximate equilibrium by exhaustive enumeration, divided by
/// the brute-force optimum.
pub fn worst_equilibrium(game: &CongestionGame, eps: f64, caps: &Caps) -> Result<WorstEquilibrium> {
    check_eps(eps)?;
    let threshold = (1.0 + eps) * (1.0 + REL_TOL);
    let (opt, worst) = enumerate(
        game,
        caps,
        || (None, None),
        |acc: &mut (Best, Best), idx, p| {
            let sum = game.social_cost(p);
            acc.0 = min_best(acc.0, Some((sum, idx)));
            if worst_ratio_seq(game, p) <= threshold {
                acc.1 = max_best(acc.1, Some((sum, idx)));
            }
        },
        |a, b| (min_best(a.0, b.0), max_best(a.1, b.1)),
    )?;
    let optimum = opt.expect("games have at least one profile").0;
    Ok(match worst {
        None => WorstEquilibrium::NoEquilibrium { optimum },
        Some((sum, idx)) => {
            if optimum <= 0.0 {
                return Err(Error::ZeroOptimum);
            }
            WorstEquilibrium::Found {
                profile: profile_at(game, idx),
                social_cost: sum,
                optimum,
                poa: sum / optimum,
            }
        }
    })
}

/// `SUM(profile) / SUM(optimum)`.
pub fn ratio(
    game: &CongestionGame,
    profile: &StrategyProfile,
    optimum: &StrategyProfile,
) -> Result<f64> {
    let opt = game.social_cost(optimum);
    if opt <= 0.0 {
        return Err(Error::ZeroOptimum);
    }
    Ok(game.social_cost(profile) / opt)
}

/// Worst exact-greedy walk outcome over all arrival orders.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderSweep {
    /// Largest walk ratio among the orders tried.
    pub worst_ratio: f64,
    /// An order attaining it.
    pub worst_order: Vec<usize>,
    /// Number of orders tried (all permutations).
    pub orders_tried: u64,
}

/// Enumerate every arrival order of a small game, run the exact greedy
/// walk (lowest-index ties) and report the worst ratio to the optimum.
/// This is a lower estimate of the instance's competitive ratio: walks
/// using the ε-slack or other tie-breaks are not explored.
pub fn walk_over_orders(
    game: &CongestionGame,
    mode: WalkMode,
    eps: f64,
    caps: &Caps,
) -> Result<OrderSweep> {
    let n = game.num_players();
    let count: f64 = (1..=n).map(|v| v as f64).product();
    Caps::check("arrival orders", count, caps.orders)?;
    let (_, opt) = brute_force_optimum(game, caps)?;
    if opt <= 0.0 {
        return Err(Error::ZeroOptimum);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut tried = 0u64;
    loop {
        let t = run_walk(game, &order, mode, eps, &Tiebreak::LowestIndex)?;
        let r = game.social_cost(&t.final_profile) / opt;
        tried += 1;
        if best.as_ref().is_none_or(|b| r > b.0) {
            best = Some((r, order.clone()));
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    let (worst_ratio, worst_order) = best.expect("at least one order");
    Ok(OrderSweep {
        worst_ratio,
        worst_order,
        orders_tried: tried,
    })
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Player, Resource};
    use crate::latency::LatencyFunction;

    fn singleton_game(latencies: Vec<LatencyFunction>, weights: &[f64]) -> CongestionGame {
        let m = latencies.len();
        CongestionGame::new(
            latencies
                .into_iter()
                .enumerate()
                .map(|(e, f)| Resource {
                    id: format!("r{e}"),
                    latency: f,
                })
                .collect(),
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| Player {
                    id: format!("p{i}"),
                    weight: w,
                    strategies: (0..m).map(|e| vec![e]).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn two_linear() -> CongestionGame {
        singleton_game(vec![LatencyFunction::monomial(1); 2], &[1.0, 1.0])
    }

    #[test]
    fn stacked_players_are_not_an_equilibrium() {
        let g = two_linear();
        let p = StrategyProfile::from_choices(&g, &[0, 0]).unwrap();
        let r = check_equilibrium(&g, &p, 0.0).unwrap();
        assert!(!r.is_equilibrium);
        assert_eq!(r.worst_ratio, 2.0);
        assert_eq!(r.witness, Some((0, 1)));
        // ε = 1 tolerates the factor 2.
        assert!(check_equilibrium(&g, &p, 1.0).unwrap().is_equilibrium);
        let split = StrategyProfile::from_choices(&g, &[0, 1]).unwrap();
        let r = check_equilibrium(&g, &split, 0.0).unwrap();
        assert!(r.is_equilibrium);
        assert_eq!(r.worst_ratio, 0.5);
    }

    #[test]
    fn partial_profile_rejected() {
        let g = two_linear();
        let p = StrategyProfile::from_assignment(&g, vec![Some(0), None]).unwrap();
        assert!(matches!(
            check_equilibrium(&g, &p, 0.0),
            Err(Error::PartialProfile(1))
        ));
    }

    #[test]
    fn single_choice_players_have_no_witness() {
        let f = LatencyFunction::monomial(1);
        let g = CongestionGame::new(
            vec![Resource {
                id: "a".into(),
                latency: f,
            }],
            vec![
                Player {
                    id: "p".into(),
                    weight: 1.0,
                    strategies: vec![vec![0]],
                },
                Player {
                    id: "q".into(),
                    weight: 1.0,
                    strategies: vec![vec![0]],
                },
            ],
        )
        .unwrap();
        let p = StrategyProfile::from_choices(&g, &[0, 0]).unwrap();
        let r = check_equilibrium(&g, &p, 0.0).unwrap();
        assert!(r.is_equilibrium);
        assert_eq!(r.witness, None);
    }

    #[test]
    fn greedy_walk_picks_cheaper_resource() {
        let g = singleton_game(
            vec![
                LatencyFunction::monomial(1),
                LatencyFunction::polynomial(vec![0.0, 2.0]).unwrap(),
            ],
            &[1.0, 1.0],
        );
        let t = run_walk(&g, &[0, 1], WalkMode::Selfish, 0.0, &Tiebreak::LowestIndex).unwrap();
        assert_eq!(t.steps[0].choice, 0);
        assert_eq!(t.steps[0].chosen_value, 1.0);
        // Second player: resource 0 costs 2, resource 1 costs 2; tie -> index 0.
        assert_eq!(t.steps[1].choice, 0);
        assert_eq!(g.social_cost(&t.final_profile), 4.0);
    }

    #[test]
    fn prescribed_choices_respect_slack() {
        let g = two_linear();
        let ok = run_walk(
            &g,
            &[1, 0],
            WalkMode::Selfish,
            1.0,
            &Tiebreak::Prescribed(vec![0, 0]),
        )
        .unwrap();
        assert_eq!(ok.final_profile.assignment(), &[Some(0), Some(0)]);
        assert!((ok.max_step_ratio() - 2.0).abs() < 1e-12);
        let err = run_walk(
            &g,
            &[1, 0],
            WalkMode::Selfish,
            0.5,
            &Tiebreak::Prescribed(vec![0, 0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::WalkViolation { step: 1, player: 0, .. }));
    }

    #[test]
    fn cooperative_steps_telescope() {
        let g = singleton_game(
            vec![
                LatencyFunction::monomial(2),
                LatencyFunction::polynomial(vec![1.0, 1.0]).unwrap(),
            ],
            &[2.0, 1.0, 3.0],
        );
        let t = run_walk(
            &g,
            &[2, 0, 1],
            WalkMode::Cooperative,
            0.0,
            &Tiebreak::LowestIndex,
        )
        .unwrap();
        let total: f64 = t.steps.iter().map(|s| s.chosen_value).sum();
        assert!((total - g.social_cost(&t.final_profile)).abs() < 1e-9);
    }

    #[test]
    fn bad_orders_rejected() {
        let g = two_linear();
        assert!(run_walk(&g, &[0, 0], WalkMode::Selfish, 0.0, &Tiebreak::LowestIndex).is_err());
        assert!(run_walk(&g, &[0], WalkMode::Selfish, 0.0, &Tiebreak::LowestIndex).is_err());
    }

    #[test]
    fn optimum_and_poa_of_two_by_two() {
        let g = two_linear();
        let caps = Caps::default();
        let (p, v) = brute_force_optimum(&g, &caps).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(p.assignment(), &[Some(0), Some(1)]);
        let w = worst_equilibrium(&g, 0.0, &caps).unwrap();
        assert_eq!(w.poa(), Some(1.0));
        assert_eq!(ratio(&g, &p, &p).unwrap(), 1.0);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let g = two_linear();
        let caps = Caps {
            enum_profiles: 3.0,
            ..Caps::default()
        };
        assert!(matches!(
            brute_force_optimum(&g, &caps),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn enumeration_spans_multiple_chunks() {
        // 3 players x 20 strategies = 8000 profiles > one chunk.
        let lat: Vec<_> = (0..20)
            .map(|e| LatencyFunction::polynomial(vec![e as f64, 1.0]).unwrap())
            .collect();
        let g = singleton_game(lat, &[1.0, 2.0, 3.0]);
        let (p, v) = brute_force_optimum(&g, &Caps::default()).unwrap();
        // Naive sequential oracle.
        let mut best = f64::INFINITY;
        for a in 0..20 {
            for b in 0..20 {
                for c in 0..20 {
                    let q = StrategyProfile::from_choices(&g, &[a, b, c]).unwrap();
                    best = best.min(g.social_cost(&q));
                }
            }
        }
        assert_eq!(v, best);
        assert_eq!(g.social_cost(&p), v);
    }

    #[test]
    fn order_sweep_counts_permutations() {
        let g = singleton_game(vec![LatencyFunction::monomial(1); 2], &[1.0, 2.0, 1.0]);
        let sweep = walk_over_orders(&g, WalkMode::Selfish, 0.0, &Caps::default()).unwrap();
        assert_eq!(sweep.orders_tried, 6);
        assert!(sweep.worst_ratio >= 1.0);
    }
}
