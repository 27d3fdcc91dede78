//! Layered load-balancing graphs: weighted n-ary trees and unweighted
//! multipartite graphs, with or without walk labels.
//!
//! Resources are arranged in `2s` levels. Every player is an edge from a
//! resource at level `i` (its first strategy) to one at level `i + 1` (its
//! second strategy); resources at the top level carry self-loop players with
//! a single strategy. Levels `1..=s` use the first tuple `(k1, o1, f1)`,
//! levels `s+1..=2s` the second.
//!
//! Edges between consecutive levels follow a group/subgroup recursion: the
//! resources of level `i` form `m(i)` equal groups; group `G` is split into
//! `o` subgroups and its partner group at level `i+1` into `k` subgroups
//! (labeled `1..=k`), and the r-th resource of every subgroup of `G` is
//! joined to the r-th resource of every subgroup of the partner. Each
//! resource thus has out-degree `k` with one edge per label, and in-degree
//! `o` from distinct subgroups. For trees (`o = 1`, `k = n`) this is the
//! plain n-ary tree with children labeled `1..=n`.
//!
//! Resource `v` gets latency `g_v(x) = A_v f_j(x / w)` where `w` is the
//! weight of its incoming players and `A_v = θ(h(v)) A_u` along any
//! incoming edge `(u, v)`; the generator asserts that every parent yields
//! the same `A_v`.

use serde_json::json;

use super::{ClosedFormRatio, ClosedFormSums, Family, GeneratedInstance, LayerShape, WalkPlan};
use crate::bounds::Witness;
use crate::caps::Caps;
use crate::dynamics::{check_equilibrium, WalkMode};
use crate::error::{Error, Result};
use crate::game::{CongestionGame, Player, Resource, StrategyProfile};
use crate::latency::LatencyFunction;

/// Strategy sets of the equilibrium families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TreeVariant {
    /// Each player may use its first or second resource only.
    #[default]
    Restricted,
    /// Every player may use any resource (singleton, symmetric game).
    Symmetric,
}

/// The two tuples of a witness, Case 1 duplicated.
#[derive(Clone, Debug)]
struct Tuples {
    k: [f64; 2],
    o: [f64; 2],
    f: [LatencyFunction; 2],
}

impl Tuples {
    fn from_witness(w: &Witness) -> Self {
        match w {
            Witness::Case1 { k, o, f } => Tuples {
                k: [*k, *k],
                o: [*o, *o],
                f: [f.clone(), f.clone()],
            },
            Witness::Case2 {
                k1,
                k2,
                o1,
                o2,
                f1,
                f2,
                ..
            } => Tuples {
                k: [*k1, *k2],
                o: [*o1, *o2],
                f: [f1.clone(), f2.clone()],
            },
        }
    }

    fn kf(&self, j: usize) -> f64 {
        self.k[j] * self.f[j].eval(self.k[j])
    }

    fn of(&self, j: usize) -> f64 {
        self.o[j] * self.f[j].eval(self.o[j])
    }

    fn tail(&self) -> f64 {
        let c = self.k[1] + self.o[1];
        c * self.f[1].eval(c)
    }

    fn normalized(&self) -> Result<()> {
        if self.o != [1.0, 1.0] {
            return Err(Error::NotApplicable(format!(
                "weighted witness must be normalized to o = 1 (got o = {:?})",
                self.o
            )));
        }
        if self.k.iter().any(|&k| !(k.is_finite() && k > 0.0)) {
            return Err(Error::InvalidInput(format!("witness k = {:?} must be > 0", self.k)));
        }
        Ok(())
    }

    fn integral(&self) -> Result<()> {
        let ok = |x: f64| x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64;
        if !self.k.iter().chain(&self.o).all(|&x| ok(x)) {
            return Err(Error::InvalidInput(format!(
                "unweighted witness needs positive integers, got k = {:?}, o = {:?}",
                self.k, self.o
            )));
        }
        Ok(())
    }
}

/// Which tuples a level transition connects: `(from, to)` in `{0, 1}`.
fn transition(s: usize, level: usize) -> (usize, usize) {
    // `level` is 0-based; the edge goes from level `level` to `level + 1`.
    if level + 1 < s {
        (0, 0)
    } else if level + 1 == s {
        (0, 1)
    } else {
        (1, 1)
    }
}

/// Description of a layered graph before materialization.
struct Layout {
    s: usize,
    sizes: Vec<usize>,
    out_deg: [usize; 2],
    in_deg: [usize; 2],
    /// Weight of players leaving each level (self-loops for the top one).
    weights: Vec<f64>,
    /// Abscissa scale of each level's latency (1 / weight of incoming players).
    scales: Vec<f64>,
}

impl Layout {
    fn half(&self, level: usize) -> usize {
        usize::from(level >= self.s)
    }

    fn out_deg(&self, level: usize) -> usize {
        self.out_deg[self.half(level)]
    }

    fn num_players(&self) -> f64 {
        (0..2 * self.s)
            .map(|l| self.sizes[l] as f64 * self.out_deg(l) as f64)
            .sum()
    }

    fn num_resources(&self) -> f64 {
        self.sizes.iter().map(|&x| x as f64).sum()
    }
}

fn tree_layout(s: usize, n: usize, k: [f64; 2], caps: &Caps) -> Result<Layout> {
    let nf = n as f64;
    let players: f64 = (1..=2 * s).map(|i| nf.powi(i as i32)).sum();
    Caps::check("players", players, caps.players)?;
    let sizes = (0..2 * s).map(|l| n.pow(l as u32)).collect();
    let mut weights = Vec::with_capacity(2 * s);
    let mut w = 1.0;
    for l in 0..2 * s {
        w *= k[usize::from(l >= s)] / nf;
        weights.push(w);
    }
    let scales = (0..2 * s)
        .map(|l| if l == 0 { 1.0 } else { 1.0 / weights[l - 1] })
        .collect();
    Ok(Layout {
        s,
        sizes,
        out_deg: [n, n],
        in_deg: [1, 1],
        weights,
        scales,
    })
}

fn multipartite_layout(s: usize, t: &Tuples, caps: &Caps) -> Result<Layout> {
    let k = [t.k[0] as u64, t.k[1] as u64];
    let o = [t.o[0] as u64, t.o[1] as u64];
    // Level sizes o1^{s-i} k1^{i-1} o2^s (i <= s), o2^{2s-i} k2^{i-s-1} k1^s.
    let mut sizes_f = Vec::with_capacity(2 * s);
    for i in 1..=2 * s {
        let v = if i <= s {
            (o[0] as f64).powi((s - i) as i32)
                * (k[0] as f64).powi(i as i32 - 1)
                * (o[1] as f64).powi(s as i32)
        } else {
            (o[1] as f64).powi((2 * s - i) as i32)
                * (k[1] as f64).powi((i - s - 1) as i32)
                * (k[0] as f64).powi(s as i32)
        };
        sizes_f.push(v);
    }
    let players: f64 = (0..2 * s)
        .map(|l| sizes_f[l] * k[usize::from(l >= s)] as f64)
        .sum();
    Caps::check("players", players, caps.players)?;
    let sizes = sizes_f.iter().map(|&v| v as usize).collect();
    Ok(Layout {
        s,
        sizes,
        out_deg: [k[0] as usize, k[1] as usize],
        in_deg: [o[0] as usize, o[1] as usize],
        weights: vec![1.0; 2 * s],
        scales: vec![1.0; 2 * s],
    })
}

/// A materialized layered graph.
struct Built {
    game: CongestionGame,
    sigma: StrategyProfile,
    star: StrategyProfile,
    /// Players leaving each level, grouped by label then by tail resource
    /// (top level: self-loops).
    walk_order: Vec<usize>,
}

/// Materialize `layout`; `theta(from, to, h)` is the multiplier of a
/// resource with label `h` entering the `to` half from the `from` half.
fn build(
    layout: &Layout,
    t: &Tuples,
    theta: &dyn Fn(usize, usize, usize) -> f64,
    variant: TreeVariant,
    caps: &Caps,
) -> Result<Built> {
    let s = layout.s;
    let levels = 2 * s;
    let n_res = layout.num_resources();
    let n_players = layout.num_players();
    Caps::check("players", n_players, caps.players)?;
    if variant == TreeVariant::Symmetric {
        Caps::check("strategy entries", n_players * n_res, caps.players)?;
    }
    let mut offsets = Vec::with_capacity(levels + 1);
    offsets.push(0usize);
    for l in 0..levels {
        offsets.push(offsets[l] + layout.sizes[l]);
    }
    let total = offsets[levels];
    let mut mult: Vec<f64> = vec![f64::NAN; total];
    for a in mult.iter_mut().take(layout.sizes[0]) {
        *a = 1.0;
    }
    // (tail, head, weight) per edge player; self-loops have head == tail.
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(n_players as usize);
    let mut by_level: Vec<Vec<usize>> = Vec::with_capacity(levels);
    let mut groups = 1usize;
    for l in 0..levels - 1 {
        let k = layout.out_deg(l);
        let o = layout.in_deg[layout.half(l + 1)];
        let gsize = layout.sizes[l] / groups;
        let q = gsize / o;
        if gsize * groups != layout.sizes[l] || q * o != gsize || groups * k * q != layout.sizes[l + 1] {
            return Err(Error::Inconsistent(format!(
                "level {} cannot be partitioned ({} resources, {groups} groups, in-degree {o})",
                l + 1,
                layout.sizes[l]
            )));
        }
        let (from, to) = transition(s, l);
        let thetas: Vec<f64> = (1..=k).map(|h| theta(from, to, h)).collect();
        let first = edges.len();
        for x in 0..layout.sizes[l] {
            let g = x / gsize;
            let r = (x % gsize) % q;
            let u = offsets[l] + x;
            for (c, th) in thetas.iter().enumerate() {
                let v = offsets[l + 1] + (g * k + c) * q + r;
                let a = th * mult[u];
                if mult[v].is_nan() {
                    mult[v] = a;
                } else if mult[v].to_bits() != a.to_bits() {
                    return Err(Error::Inconsistent(format!(
                        "resource {v} receives multipliers {} and {a} from different parents",
                        mult[v]
                    )));
                }
                edges.push((u, v, layout.weights[l]));
            }
        }
        // label-major order: all label-1 edges, then label-2, ...
        let mut order = Vec::with_capacity(layout.sizes[l] * k);
        for c in 0..k {
            for x in 0..layout.sizes[l] {
                order.push(first + x * k + c);
            }
        }
        by_level.push(order);
        groups *= k;
    }
    let top = levels - 1;
    let first = edges.len();
    for x in 0..layout.sizes[top] {
        let u = offsets[top] + x;
        for _ in 0..layout.out_deg(top) {
            edges.push((u, u, layout.weights[top]));
        }
    }
    by_level.push((first..edges.len()).collect());

    let mut resources = Vec::with_capacity(total);
    for l in 0..levels {
        let f = &t.f[layout.half(l)];
        let base = f.scale_abscissa(layout.scales[l])?;
        for x in 0..layout.sizes[l] {
            let e = offsets[l] + x;
            resources.push(Resource {
                id: format!("r{e}"),
                latency: base.scale_ordinate(mult[e])?,
            });
        }
    }
    let all: Vec<Vec<usize>> = match variant {
        TreeVariant::Symmetric => (0..total).map(|e| vec![e]).collect(),
        TreeVariant::Restricted => Vec::new(),
    };
    let players: Vec<Player> = edges
        .iter()
        .enumerate()
        .map(|(j, &(u, v, w))| Player {
            id: format!("p{j}"),
            weight: w,
            strategies: match variant {
                TreeVariant::Symmetric => all.clone(),
                TreeVariant::Restricted if u == v => vec![vec![u]],
                TreeVariant::Restricted => vec![vec![u], vec![v]],
            },
        })
        .collect();
    let game = CongestionGame::new(resources, players)?;
    let (first_choice, second_choice): (Vec<usize>, Vec<usize>) = edges
        .iter()
        .map(|&(u, v, _)| match variant {
            TreeVariant::Symmetric => (u, v),
            TreeVariant::Restricted if u == v => (0, 0),
            TreeVariant::Restricted => (0, 1),
        })
        .unzip();
    let sigma = StrategyProfile::from_choices(&game, &first_choice)?;
    let star = StrategyProfile::from_choices(&game, &second_choice)?;
    let walk_order = by_level.into_iter().rev().flatten().collect();
    Ok(Built {
        game,
        sigma,
        star,
        walk_order,
    })
}

fn check_levels(s: usize, min: usize) -> Result<()> {
    if s < min {
        return Err(Error::InvalidInput(format!("s = {s} must be >= {min}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("epsilon {eps} must be >= 0")))
    }
}

/// Level multipliers `a, c, b` from per-label θ's: the mean of θ over the
/// `deg` labels, times `k_from / o_to`.
fn shape(
    t: &Tuples,
    deg: [usize; 2],
    theta: &dyn Fn(usize, usize, usize) -> f64,
    scale: f64,
) -> LayerShape {
    let mean = |from: usize, to: usize| {
        let d = deg[from];
        (1..=d).map(|h| theta(from, to, h)).sum::<f64>() / d as f64
    };
    LayerShape {
        a: t.k[0] / t.o[0] * mean(0, 0),
        c: t.k[0] / t.o[1] * mean(0, 1),
        b: t.k[1] / t.o[1] * mean(1, 1),
        kf1: t.kf(0),
        kf2: t.kf(1),
        of1: t.of(0),
        of2: t.of(1),
        tail: t.tail(),
        scale,
    }
}

fn instance(
    family: Family,
    eps: f64,
    built: Built,
    walk: Option<WalkMode>,
    claims_equilibrium: bool,
    sh: &LayerShape,
    s: usize,
    n_limit: Option<f64>,
    limit: Option<f64>,
    parameters: serde_json::Value,
) -> Result<GeneratedInstance> {
    let (sigma, optimum, _) = sh.sums(s);
    let walk = walk.map(|mode| WalkPlan {
        mode,
        prescribed: vec![0; built.walk_order.len()],
        order: built.walk_order,
    });
    let restricted = built.game.players().iter().all(|p| p.strategies.len() <= 2);
    GeneratedInstance {
        family,
        epsilon: eps,
        game: built.game,
        canonical_profile: built.sigma,
        optimal_profile: built.star,
        walk,
        claims_equilibrium,
        tight_deviation: claims_equilibrium && restricted,
        closed_form_ratio: Some(ClosedFormRatio {
            finite: sh.finite_ratio(s),
            limit,
            n_limit,
        }),
        closed_form_sums: Some(ClosedFormSums { sigma, optimum }),
        parameters,
        checks: Vec::new(),
    }
    .with_checks()
}

/// Weighted n-ary tree with `2s` levels whose all-first-strategies profile
/// is an ε-approximate equilibrium (for n large enough; the equilibrium is
/// checked and reported, not assumed).
///
/// Players leaving level `i` weigh `(k1/n)^i` for `i <= s` and
/// `(k1/n)^s (k2/n)^{i-s}` above; level multipliers are
/// `θ_{i,j} = f_i(k_i) / ((1+ε) f_j(k_j + 1))`.
pub fn gen_weighted_tree(
    s: usize,
    n: usize,
    witness: &Witness,
    eps: f64,
    variant: TreeVariant,
    caps: &Caps,
) -> Result<GeneratedInstance> {
    check_levels(s, 1)?;
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let t = Tuples::from_witness(witness);
    t.normalized()?;
    let layout = tree_layout(s, n, t.k, caps)?;
    let theta = |i: usize, j: usize, _h: usize| {
        t.f[i].eval(t.k[i]) / ((1.0 + eps) * t.f[j].eval(t.k[j] + 1.0))
    };
    let built = build(&layout, &t, &theta, variant, caps)?;
    let sh = shape(&t, [n, n], &theta, 1.0);
    let limit = sh.limit();
    let params = json!({
        "s": s,
        "n": n,
        "variant": format!("{variant:?}").to_lowercase(),
        "witness": witness,
    });
    instance(
        Family::WeightedTree,
        eps,
        built,
        None,
        true,
        &sh,
        s,
        None,
        limit,
        params,
    )
}

/// Double `n` from `start_n` until the weighted tree's canonical profile
/// passes the equilibrium check, or a cap is hit. Returns the passing n.
pub fn weighted_tree_until_equilibrium(
    s: usize,
    start_n: usize,
    witness: &Witness,
    eps: f64,
    variant: TreeVariant,
    caps: &Caps,
) -> Result<(usize, GeneratedInstance)> {
    let mut n = start_n.max(1);
    loop {
        let inst = gen_weighted_tree(s, n, witness, eps, variant, caps)?;
        let rep = check_equilibrium(&inst.game, &inst.canonical_profile, eps)?;
        if rep.is_equilibrium {
            return Ok((n, inst));
        }
        n *= 2;
    }
}

/// Labeled weighted tree whose canonical profile is the outcome of an
/// ε-approximate one-round walk.
///
/// Selfish: `θ_{i,j}(h) = f_i(h k_i / n) / ((1+ε) f_j(k_j + 1))`.
/// Cooperative (n = 1): `θ_{i,j} = f_i(k_i) / ((1+ε)((k_j+1) f_j(k_j+1) - k_j f_j(k_j)))`.
/// Players arrive by level (top first), then by label.
pub fn gen_weighted_walk_tree(
    s: usize,
    n: usize,
    witness: &Witness,
    eps: f64,
    mode: WalkMode,
    caps: &Caps,
) -> Result<GeneratedInstance> {
    check_levels(s, 1)?;
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if mode == WalkMode::Cooperative && n != 1 {
        return Err(Error::InvalidInput(format!(
            "the cooperative tree needs n = 1, got n = {n}"
        )));
    }
    let t = Tuples::from_witness(witness);
    t.normalized()?;
    let layout = tree_layout(s, n, t.k, caps)?;
    let nf = n as f64;
    let theta = |i: usize, j: usize, h: usize| -> f64 {
        let num = t.f[i].eval(h as f64 * t.k[i] / nf);
        let den = match mode {
            WalkMode::Selfish => t.f[j].eval(t.k[j] + 1.0),
            WalkMode::Cooperative => t.f[j].marginal(t.k[j], 1.0),
        };
        num / ((1.0 + eps) * den)
    };
    let built = build(&layout, &t, &theta, TreeVariant::Restricted, caps)?;
    let sh = shape(&t, [n, n], &theta, 1.0);
    let (n_limit, limit) = match mode {
        WalkMode::Selfish => {
            // Riemann limit: mean_h f(h k / n) k -> ∫_0^k f.
            let xi = |i: usize, j: usize| {
                t.f[i].integral(t.k[i]) / ((1.0 + eps) * t.f[j].eval(t.k[j] + 1.0))
            };
            let lim = LayerShape {
                a: xi(0, 0),
                c: xi(0, 1),
                b: xi(1, 1),
                ..sh
            };
            (Some(lim.finite_ratio(s)), lim.limit())
        }
        WalkMode::Cooperative => (None, sh.limit()),
    };
    let params = json!({ "s": s, "n": n, "mode": mode, "witness": witness });
    instance(
        Family::WeightedWalkTree,
        eps,
        built,
        Some(mode),
        false,
        &sh,
        s,
        n_limit,
        limit,
        params,
    )
}

/// Largest relative deviation from `(1+ε)` of the selfish walk-step ratio
/// `cost(first) / cost(second)` over every level and label of the labeled
/// weighted tree, computed from the layout without materializing it (so it
/// scales to arities far beyond the player cap).
///
/// A player with label `h` leaving `u` at level `l` arrives after the `h-1`
/// lower-labeled players of `u` and after all `n` players leaving its head
/// `v`, so it compares `A_u g(h w_l)` against `θ(h) A_u g'(n w_{l+1} + w_l)`.
pub fn weighted_walk_tree_tightness(s: usize, n: usize, witness: &Witness, eps: f64) -> Result<f64> {
    check_levels(s, 1)?;
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let t = Tuples::from_witness(witness);
    t.normalized()?;
    let nf = n as f64;
    let levels = 2 * s;
    let mut weights = Vec::with_capacity(levels);
    let mut w = 1.0;
    for l in 0..levels {
        w *= t.k[usize::from(l >= s)] / nf;
        weights.push(w);
    }
    let scale = |l: usize| if l == 0 { 1.0 } else { 1.0 / weights[l - 1] };
    let mut worst = 0.0f64;
    for l in 0..levels - 1 {
        let (from, to) = transition(s, l);
        let g_u = t.f[from].scale_abscissa(scale(l))?;
        let g_v = t.f[to].scale_abscissa(scale(l + 1))?;
        let below = nf * weights[l + 1];
        for h in 1..=n {
            let theta = t.f[from].eval(h as f64 * t.k[from] / nf)
                / ((1.0 + eps) * t.f[to].eval(t.k[to] + 1.0));
            let first = g_u.eval(h as f64 * weights[l]);
            let second = theta * g_v.eval(below + weights[l]);
            worst = worst.max((first / ((1.0 + eps) * second) - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Unweighted layered graph with level sizes `o1^{s-i} k1^{i-1} o2^s`
/// (`i <= s`) and `o2^{2s-i} k2^{i-s-1} k1^s` (`i > s`), out-degree `k`,
/// in-degree `o`, and `k2` self-loops per top resource; multipliers
/// `θ_{i,j} = f_i(k_i) / ((1+ε) f_j(k_j + 1))`. The all-first profile is an
/// ε-approximate equilibrium.
pub fn gen_unweighted_multipartite(
    s: usize,
    witness: &Witness,
    eps: f64,
    caps: &Caps,
) -> Result<GeneratedInstance> {
    check_levels(s, 1)?;
    check_eps(eps)?;
    let t = Tuples::from_witness(witness);
    t.integral()?;
    let layout = multipartite_layout(s, &t, caps)?;
    let theta = |i: usize, j: usize, _h: usize| {
        t.f[i].eval(t.k[i]) / ((1.0 + eps) * t.f[j].eval(t.k[j] + 1.0))
    };
    let built = build(&layout, &t, &theta, TreeVariant::Restricted, caps)?;
    let sh = shape(&t, layout.out_deg, &theta, layout.sizes[0] as f64);
    let limit = sh.limit();
    let params = json!({ "s": s, "witness": witness });
    instance(
        Family::UnweightedMultipartite,
        eps,
        built,
        None,
        true,
        &sh,
        s,
        None,
        limit,
        params,
    )
}

/// Labeled unweighted layered graph whose canonical profile is the outcome
/// of an ε-approximate one-round walk.
///
/// Selfish: `θ_{i,j}(h) = f_i(h) / ((1+ε) f_j(k_j + 1))`.
/// Cooperative: `θ_{i,j}(h) = (h f_i(h) - (h-1) f_i(h-1)) /
/// ((1+ε)((k_j+1) f_j(k_j+1) - k_j f_j(k_j)))`.
pub fn gen_unweighted_walk_multipartite(
    s: usize,
    witness: &Witness,
    eps: f64,
    mode: WalkMode,
    caps: &Caps,
) -> Result<GeneratedInstance> {
    check_levels(s, 1)?;
    check_eps(eps)?;
    let t = Tuples::from_witness(witness);
    t.integral()?;
    let layout = multipartite_layout(s, &t, caps)?;
    let theta = |i: usize, j: usize, h: usize| -> f64 {
        let h = h as f64;
        match mode {
            WalkMode::Selfish => {
                t.f[i].eval(h) / ((1.0 + eps) * t.f[j].eval(t.k[j] + 1.0))
            }
            WalkMode::Cooperative => {
                t.f[i].marginal(h - 1.0, 1.0) / ((1.0 + eps) * t.f[j].marginal(t.k[j], 1.0))
            }
        }
    };
    let built = build(&layout, &t, &theta, TreeVariant::Restricted, caps)?;
    let sh = shape(&t, layout.out_deg, &theta, layout.sizes[0] as f64);
    let limit = sh.limit();
    let params = json!({ "s": s, "mode": mode, "witness": witness });
    instance(
        Family::UnweightedWalkMultipartite,
        eps,
        built,
        Some(mode),
        false,
        &sh,
        s,
        None,
        limit,
        params,
    )
}
