//! Identical-resource families.
//!
//! - Weighted: `m` resources sharing one latency function, `2h` red players
//!   of weight `x/2` and blue players cut from two overlapping subdivisions
//!   of a segment, so that σ (red pairs on `h` resources, blues at
//!   congestion `[x]_{ε,f}` elsewhere) is an ε-approximate equilibrium and
//!   σ* spreads everything evenly.
//! - Unweighted walk: nested resource sets `E_0 ⊃ E_1 ⊃ … ⊃ E_n` with
//!   `(|E_{i-1}| - |E_i|) o_i = |E_i|`; `|E_i|` players of type `i` may use
//!   `E_{i-1}`. Arriving by type, each player of type `i` taking a distinct
//!   resource of `E_i` is an exact greedy outcome.

use num_integer::{Integer, Roots};
use rayon::prelude::*;
use serde_json::json;

use super::{ClosedFormRatio, ClosedFormSums, Family, GeneratedInstance, WalkPlan};
use crate::bounds::{gamma_identical, identical_best_lambda, identical_opt_congestion};
use crate::caps::Caps;
use crate::dynamics::WalkMode;
use crate::error::{Error, Result};
use crate::game::{CongestionGame, Player, Resource, StrategyProfile};
use crate::latency::LatencyFunction;
use crate::numeric::KahanSum;

/// Symmetric singleton identical-resources instance with red and blue
/// players; `h` defaults to `⌈m λ*(x)⌉` where `λ*(x)` maximizes
/// `γ_{ε,f}(x, ·)`.
pub fn gen_identical_weighted(
    x: f64,
    m: usize,
    eps: f64,
    f: &LatencyFunction,
    h: Option<usize>,
    caps: &Caps,
) -> Result<GeneratedInstance> {
    crate::error::ensure_finite(x, "x")?;
    if x <= 0.0 {
        return Err(Error::InvalidInput(format!("x = {x} must be > 0")));
    }
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidInput(format!("m = {m} must be even and >= 2")));
    }
    let (lambda_star, best, br) = identical_best_lambda(eps, f, x)?;
    let h = match h {
        Some(h) => h,
        None => {
            if lambda_star > 0.5 {
                return Err(Error::NotApplicable(format!("λ*(x) = {lambda_star} > 1/2")));
            }
            if eps > 0.0 && identical_opt_congestion(lambda_star, x, br) - 0.5 * x < 0.0 {
                return Err(Error::NotApplicable(
                    "λ* x + (1-λ*)[x] < x/2: the ε-condition fails".into(),
                ));
            }
            (m as f64 * lambda_star).ceil() as usize
        }
    };
    if h == 0 || 2 * h > m {
        return Err(Error::NotApplicable(format!("h = {h} must satisfy 1 <= h <= m/2 = {}", m / 2)));
    }
    let lambda = h as f64 / m as f64;
    let c = identical_opt_congestion(lambda, x, br);
    let dark = c - 0.5 * x;
    let scale_tol = 1e-12 * x.max(c);
    if dark < -scale_tol {
        return Err(Error::NotApplicable(format!(
            "opt congestion {c} is below x/2 = {}",
            0.5 * x
        )));
    }
    let dark = dark.max(0.0);

    // Subdivision 1: m-h intervals of [x]; Subdivision 2: 2h intervals of
    // c - x/2, then m-2h intervals of c. Their common refinement gives the
    // blue players.
    let total = (m - h) as f64 * br;
    let mut cuts: Vec<f64> = (1..m - h).map(|j| j as f64 * br).collect();
    if dark > 0.0 {
        cuts.extend((1..=2 * h).map(|j| j as f64 * dark));
    }
    let dark_end = 2.0 * h as f64 * dark;
    cuts.extend((1..m - 2 * h).map(|j| dark_end + j as f64 * c));
    cuts.retain(|&p| p > scale_tol && p < total - scale_tol);
    cuts.sort_by(f64::total_cmp);
    let mut points = vec![0.0];
    for p in cuts {
        if p - points.last().copied().unwrap_or(0.0) > scale_tol {
            points.push(p);
        }
    }
    points.push(total);
    let n_blue = points.len() - 1;
    let n_players = 2 * h + n_blue;
    Caps::check("strategy entries", (n_players * m) as f64, caps.players)?;

    let resources: Vec<Resource> = (0..m)
        .map(|e| Resource {
            id: format!("r{e}"),
            latency: f.clone(),
        })
        .collect();
    let all: Vec<Vec<usize>> = (0..m).map(|e| vec![e]).collect();
    let mut players = Vec::with_capacity(n_players);
    let mut sigma = Vec::with_capacity(n_players);
    let mut star = Vec::with_capacity(n_players);
    for r in 0..2 * h {
        players.push(Player {
            id: format!("red{r}"),
            weight: 0.5 * x,
            strategies: all.clone(),
        });
        sigma.push(r / 2);
        star.push(r);
    }
    for b in 0..n_blue {
        let (lo, hi) = (points[b], points[b + 1]);
        let mid = 0.5 * (lo + hi);
        players.push(Player {
            id: format!("blue{b}"),
            weight: hi - lo,
            strategies: all.clone(),
        });
        sigma.push(h + ((mid / br) as usize).min(m - h - 1));
        let target = if mid < dark_end {
            (mid / dark) as usize
        } else {
            2 * h + ((mid - dark_end) / c) as usize
        };
        star.push(target.min(m - 1));
    }
    let game = CongestionGame::new(resources, players)?;
    let sigma = StrategyProfile::from_choices(&game, &sigma)?;
    let star = StrategyProfile::from_choices(&game, &star)?;
    for (e, (&a, &b)) in sigma.congestion().iter().zip(star.congestion()).enumerate() {
        let want = if e < h { x } else { br };
        if (a - want).abs() > scale_tol || (b - c).abs() > scale_tol {
            return Err(Error::Inconsistent(format!(
                "resource {e}: congestions ({a}, {b}) differ from ({want}, {c})"
            )));
        }
    }
    let sum_sigma = h as f64 * x * f.eval(x) + (m - h) as f64 * br * f.eval(br);
    let sum_opt = m as f64 * c * f.eval(c);
    let finite = gamma_identical(eps, f, x, lambda)?;
    GeneratedInstance {
        family: Family::IdenticalWeighted,
        epsilon: eps,
        game,
        canonical_profile: sigma,
        optimal_profile: star,
        walk: None,
        claims_equilibrium: true,
        tight_deviation: false,
        closed_form_ratio: Some(ClosedFormRatio {
            finite,
            limit: Some(best),
            n_limit: None,
        }),
        closed_form_sums: Some(ClosedFormSums {
            sigma: sum_sigma,
            optimum: sum_opt,
        }),
        parameters: json!({
            "x": x,
            "m": m,
            "h": h,
            "bracket": br,
            "lambda": lambda,
            "lambda_star": lambda_star,
            "latency": f,
        }),
        checks: Vec::new(),
    }
    .with_checks()
}

/// `o_i = ⌊0.44411 i + 1 + ⌊√i / 7⌋⌋`, in exact integer arithmetic.
pub fn default_o_sequence(i: u64) -> u64 {
    (44_411 * i + 100_000) / 100_000 + i.sqrt() / 7
}

fn check_o_sequence(o: &[u64]) -> Result<()> {
    if o.is_empty() {
        return Err(Error::InvalidInput("o sequence is empty".into()));
    }
    if o[0] != 1 {
        return Err(Error::InvalidInput(format!("o_1 = {} must be 1", o[0])));
    }
    if o.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("o sequence must be non-decreasing".into()));
    }
    Ok(())
}

/// Smallest integer sizes `|E_0|, …, |E_n|` with
/// `|E_i| = |E_{i-1}| o_i / (o_i + 1)`.
pub fn identical_walk_sizes(o: &[u64], caps: &Caps) -> Result<Vec<u64>> {
    check_o_sequence(o)?;
    let too_big = |needed: f64| Error::CapExceeded {
        what: "|E_0|",
        needed,
        cap: caps.e0,
    };
    // r_i = p_i / q_i in lowest terms.
    let mut fracs = Vec::with_capacity(o.len());
    let (mut p, mut q) = (1u128, 1u128);
    let mut e0 = 1u128;
    for &oi in o {
        let (a, b) = (oi as u128, oi as u128 + 1);
        p = p.checked_mul(a).ok_or_else(|| too_big(f64::INFINITY))?;
        q = q.checked_mul(b).ok_or_else(|| too_big(f64::INFINITY))?;
        let g = p.gcd(&q);
        p /= g;
        q /= g;
        e0 = e0.lcm(&q);
        if e0 as f64 > caps.e0 {
            return Err(too_big(e0 as f64));
        }
        fracs.push((p, q));
    }
    let mut sizes = vec![e0 as u64];
    sizes.extend(fracs.iter().map(|&(p, q)| (e0 / q * p) as u64));
    Ok(sizes)
}

/// Materialized nested-sets instance; the canonical profile is the exact
/// (ε = 0) walk outcome of the given mode.
pub fn gen_identical_unweighted_walk(
    o: &[u64],
    f: &LatencyFunction,
    mode: WalkMode,
    caps: &Caps,
) -> Result<GeneratedInstance> {
    let mut sizes = identical_walk_sizes(o, caps)?;
    if sizes[1..].iter().sum::<u64>() < 2 {
        // A game needs two players; doubling every set keeps the ratios.
        for s in &mut sizes {
            *s *= 2;
        }
    }
    let n = o.len();
    let entries: f64 = (1..=n).map(|i| sizes[i] as f64 * sizes[i - 1] as f64).sum();
    Caps::check("strategy entries", entries, caps.players)?;
    let e0 = sizes[0] as usize;
    let resources: Vec<Resource> = (0..e0)
        .map(|e| Resource {
            id: format!("r{e}"),
            latency: f.clone(),
        })
        .collect();
    let mut players = Vec::new();
    let mut sigma = Vec::new();
    let mut star = Vec::new();
    for i in 1..=n {
        let strategies: Vec<Vec<usize>> = (0..sizes[i - 1] as usize).map(|e| vec![e]).collect();
        let oi = o[i - 1] as usize;
        for j in 0..sizes[i] as usize {
            players.push(Player {
                id: format!("t{i}_{j}"),
                weight: 1.0,
                strategies: strategies.clone(),
            });
            sigma.push(j);
            star.push(sizes[i] as usize + j / oi);
        }
    }
    let game = CongestionGame::new(resources, players)?;
    let canonical = StrategyProfile::from_choices(&game, &sigma)?;
    let optimal = StrategyProfile::from_choices(&game, &star)?;
    let mut num = KahanSum::default();
    let mut den = KahanSum::default();
    for i in 1..=n {
        let next = if i < n { sizes[i + 1] } else { 0 };
        let fi = i as f64;
        num.add((sizes[i] - next) as f64 * fi * f.eval(fi));
        let oi = o[i - 1] as f64;
        den.add((sizes[i - 1] - sizes[i]) as f64 * oi * f.eval(oi));
    }
    let order: Vec<usize> = (0..game.num_players()).collect();
    GeneratedInstance {
        family: Family::IdenticalUnweightedWalk,
        epsilon: 0.0,
        game,
        canonical_profile: canonical,
        optimal_profile: optimal,
        walk: Some(WalkPlan {
            mode,
            order,
            prescribed: sigma,
        }),
        claims_equilibrium: false,
        tight_deviation: false,
        closed_form_ratio: None,
        closed_form_sums: Some(ClosedFormSums {
            sigma: num.value(),
            optimum: den.value(),
        }),
        parameters: json!({ "o": o, "sizes": sizes, "mode": mode, "latency": f }),
        checks: Vec::new(),
    }
    .with_checks()
}

/// Partial sums of the nested-sets ratio over types `from..=to`, given
/// `r = |E_{from-1}| / |E_0|`: returns `(numerator, denominator, r_to)`.
fn walk_ratio_terms(
    from: u64,
    to: u64,
    n: u64,
    mut r: f64,
    o: &(dyn Fn(u64) -> u64 + Sync),
    f: &LatencyFunction,
) -> (KahanSum, KahanSum, f64) {
    let mut num = KahanSum::default();
    let mut den = KahanSum::default();
    let mut oi = o(from) as f64;
    for i in from..=to {
        // |E_{i-1}| - |E_i| = r_{i-1} / (o_i + 1)
        den.add(r / (oi + 1.0) * oi * f.eval(oi));
        r *= oi / (oi + 1.0);
        let fi = i as f64;
        if i < n {
            let next = o(i + 1) as f64;
            // |E_i| - |E_{i+1}| = r_i / (o_{i+1} + 1)
            num.add(r / (next + 1.0) * fi * f.eval(fi));
            oi = next;
        } else {
            num.add(r * fi * f.eval(fi));
        }
    }
    (num, den, r)
}

/// Nested-sets ratio `Σ (|E_i| - |E_{i+1}|) i f(i) / Σ (|E_{i-1}| - |E_i|) o_i f(o_i)`
/// by direct summation over relative set sizes.
pub fn identical_walk_ratio(o: &[u64], f: &LatencyFunction) -> Result<f64> {
    check_o_sequence(o)?;
    let n = o.len() as u64;
    let seq = |i: u64| o[(i - 1) as usize];
    let (num, den, _) = walk_ratio_terms(1, n, n, 1.0, &seq, f);
    Ok(num.value() / den.value())
}

/// The nested-sets ratio for `n` types given as a function `o(i)`, in
/// parallel chunks of `chunk` types: chunk-local products of
/// `o_i / (o_i + 1)` are prefix-multiplied, then each chunk sums its terms.
/// Intended for very large `n` (the sequence is not materialized).
pub fn identical_walk_ratio_chunked(
    n: u64,
    o: &(dyn Fn(u64) -> u64 + Sync),
    f: &LatencyFunction,
    chunk: u64,
) -> Result<f64> {
    if n == 0 || chunk == 0 {
        return Err(Error::InvalidInput("n and chunk must be >= 1".into()));
    }
    if o(1) != 1 {
        return Err(Error::InvalidInput("o_1 must be 1".into()));
    }
    let bounds: Vec<(u64, u64)> = (0..n.div_ceil(chunk))
        .map(|c| (c * chunk + 1, ((c + 1) * chunk).min(n)))
        .collect();
    let products: Vec<f64> = bounds
        .par_iter()
        .map(|&(a, b)| {
            (a..=b).fold(1.0, |acc, i| {
                let oi = o(i) as f64;
                acc * (oi / (oi + 1.0))
            })
        })
        .collect();
    let mut starts = Vec::with_capacity(bounds.len());
    let mut r = 1.0;
    for p in &products {
        starts.push(r);
        r *= p;
    }
    let parts: Vec<(f64, f64)> = bounds
        .par_iter()
        .zip(starts.par_iter())
        .map(|(&(a, b), &r0)| {
            let (num, den, _) = walk_ratio_terms(a, b, n, r0, o, f);
            (num.value(), den.value())
        })
        .collect();
    let mut num = KahanSum::default();
    let mut den = KahanSum::default();
    for (a, b) in parts {
        num.add(a);
        den.add(b);
    }
    Ok(num.value() / den.value())
}
