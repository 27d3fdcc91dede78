//! Analytic bound machinery.
//!
//! For a metric (price of anarchy, or competitive ratio of selfish or
//! cooperative one-round walks) with approximation slack ε, the per-resource
//! quantity β(k, o, f) and the parametric ratio
//!
//! ```text
//! γ(x, k, o, f) = (k f(k) + x β(k, o, f)) / (o f(o))
//! ```
//!
//! give the class bound `inf_{x >= 1} sup_{k, o, f} γ(x, k, o, f)`. This
//! module evaluates these formulas in the weighted (real congestions) and
//! unweighted (integer congestions) settings, solves the bound for
//! polynomial classes in closed form or by grid search, extracts witness
//! tuples that parametrize the lower-bound generators, checks dual
//! certificates, and implements the identical-resources bound built from
//! the threshold `[x]_{ε,f}`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::latency::LatencyFunction;
use crate::numeric::{bisect_predicate, bisect_sign_change, golden_max, golden_min};

/// Tolerance of the golden-section searches over x and λ.
pub const GOLDEN_TOL: f64 = 1e-10;

/// Absolute tolerance of the `[x]_{ε,f}` bisection.
pub const BRACKET_TOL: f64 = 1e-12;

/// Relative slack of dual-certificate inequalities.
pub const CERT_TOL: f64 = 1e-9;

/// Which efficiency metric a bound refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Price of anarchy of ε-approximate pure Nash equilibria.
    #[serde(rename = "poa")]
    PoA,
    /// Competitive ratio of ε-approximate one-round walks, selfish players.
    #[serde(rename = "crs")]
    CrSelfish,
    /// Competitive ratio of ε-approximate one-round walks, cooperative players.
    #[serde(rename = "crc")]
    CrCooperative,
}

impl MetricKind {
    /// All metrics in table order.
    pub const ALL: [MetricKind; 3] = [
        MetricKind::PoA,
        MetricKind::CrSelfish,
        MetricKind::CrCooperative,
    ];

    /// Short name: `poa`, `crs` or `crc`.
    pub fn short_name(self) -> &'static str {
        match self {
            MetricKind::PoA => "poa",
            MetricKind::CrSelfish => "crs",
            MetricKind::CrCooperative => "crc",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poa" => Ok(MetricKind::PoA),
            "crs" | "cr-s" | "selfish" => Ok(MetricKind::CrSelfish),
            "crc" | "cr-c" | "cooperative" => Ok(MetricKind::CrCooperative),
            other => Err(Error::InvalidInput(format!("unknown metric `{other}`"))),
        }
    }
}

/// A metric together with its approximation slack ε ≥ 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub kind: MetricKind,
    pub epsilon: f64,
}

impl Metric {
    /// Validated constructor.
    pub fn new(kind: MetricKind, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon {epsilon} must be finite and >= 0"
            )));
        }
        Ok(Metric { kind, epsilon })
    }

    /// Exact metric (ε = 0).
    pub fn exact(kind: MetricKind) -> Self {
        Metric { kind, epsilon: 0.0 }
    }
}

/// Weighted (real congestions) or unweighted (integer congestions) games.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Weighted,
    Unweighted,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weighted" | "w" => Ok(Mode::Weighted),
            "unweighted" | "u" => Ok(Mode::Unweighted),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}`"))),
        }
    }
}

/// A class of latency functions.
#[derive(Clone, Debug, PartialEq)]
pub enum LatencyClass {
    /// Polynomials with non-negative coefficients and degree ≤ d; by
    /// monomial dominance only `t^0 .. t^d` need to be examined.
    Polynomial(usize),
    /// An explicit finite set of functions.
    Explicit(Vec<LatencyFunction>),
}

impl LatencyClass {
    /// The functions the searches range over.
    pub fn generators(&self) -> Vec<LatencyFunction> {
        match self {
            LatencyClass::Polynomial(d) => (0..=*d).map(LatencyFunction::monomial).collect(),
            LatencyClass::Explicit(v) => v.clone(),
        }
    }

    fn is_constant_only(&self) -> bool {
        match self {
            LatencyClass::Polynomial(d) => *d == 0,
            LatencyClass::Explicit(v) => v.iter().all(LatencyFunction::is_constant),
        }
    }
}

/// A witness tuple certifying a lower bound (and parametrizing the
/// instance generators).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum Witness {
    /// A single tuple with β ≥ 0; value `k f(k) / (o f(o))`.
    Case1 { k: f64, o: f64, f: LatencyFunction },
    /// Two tuples with `alpha1 = β(k2, o2, f2) > 0` and
    /// `alpha2 = -β(k1, o1, f1) > 0`.
    Case2 {
        k1: f64,
        k2: f64,
        o1: f64,
        o2: f64,
        f1: LatencyFunction,
        f2: LatencyFunction,
        alpha1: f64,
        alpha2: f64,
    },
}

impl Witness {
    /// The ratio certified by the witness.
    pub fn value(&self) -> f64 {
        match self {
            Witness::Case1 { k, o, f } => k * f.eval(*k) / (o * f.eval(*o)),
            Witness::Case2 {
                k1,
                k2,
                o1,
                o2,
                f1,
                f2,
                alpha1,
                alpha2,
            } => {
                (alpha1 * k1 * f1.eval(*k1) + alpha2 * k2 * f2.eval(*k2))
                    / (alpha1 * o1 * f1.eval(*o1) + alpha2 * o2 * f2.eval(*o2))
            }
        }
    }

    /// Check the sign conditions of the case against `beta`.
    pub fn validate(&self, mode: Mode, metric: Metric) -> Result<()> {
        let tol = 1e-9;
        match self {
            Witness::Case1 { k, o, f } => {
                let b = beta(mode, metric, *k, *o, f)?;
                let scale = k * f.eval(*k) + o * f.eval(k + o);
                if b < -tol * scale {
                    return Err(Error::InvalidInput(format!("case-1 witness has beta {b} < 0")));
                }
            }
            Witness::Case2 {
                k1,
                k2,
                o1,
                o2,
                f1,
                f2,
                alpha1,
                alpha2,
            } => {
                let b2 = beta(mode, metric, *k2, *o2, f2)?;
                let b1 = beta(mode, metric, *k1, *o1, f1)?;
                if !(*alpha1 > 0.0 && *alpha2 > 0.0) {
                    return Err(Error::InvalidInput("case-2 alphas must be > 0".into()));
                }
                if (b2 - alpha1).abs() > tol * alpha1.abs().max(1.0)
                    || (b1 + alpha2).abs() > tol * alpha2.abs().max(1.0)
                {
                    return Err(Error::InvalidInput(format!(
                        "case-2 alphas ({alpha1}, {alpha2}) disagree with betas ({b2}, {})",
                        -b1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of a class-level bound computation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundResult {
    /// The bound value.
    pub value: f64,
    /// The minimizing x.
    pub x: f64,
    /// The witness achieving the value.
    pub witness: Witness,
    /// `true` when the maximizing tuple sits on a search cap, so the true
    /// supremum may be larger.
    pub cap_hit: bool,
}

fn check_unweighted_args(k: f64, o: f64) -> Result<()> {
    if k < 0.0 || k.fract() != 0.0 || o < 1.0 || o.fract() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "unweighted beta needs integers k >= 0, o >= 1 (got k={k}, o={o})"
        )));
    }
    Ok(())
}

/// The per-resource quantity β for the given mode and metric.
///
/// Weighted (reals `k, o > 0`):
/// - PoA: `-k f(k) + (1+ε) o f(k+o)`
/// - CR^s: `-∫_0^k f + (1+ε) o f(k+o)`
/// - CR^c: `-k f(k) + (1+ε)((k+o) f(k+o) - k f(k))`
///
/// Unweighted (integers `k >= 0, o >= 1`):
/// - PoA: `-k f(k) + (1+ε) o f(k+1)`
/// - CR^s: `-Σ_{h=1}^k f(h) + (1+ε) o f(k+1)`
/// - CR^c: `-k f(k) + (1+ε)((k+1) f(k+1) - k f(k))` (independent of o)
pub fn beta(mode: Mode, metric: Metric, k: f64, o: f64, f: &LatencyFunction) -> Result<f64> {
    crate::error::ensure_finite(k, "k")?;
    crate::error::ensure_finite(o, "o")?;
    let e1 = 1.0 + metric.epsilon;
    match mode {
        Mode::Weighted => {
            if !(k > 0.0 && o > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "weighted beta needs k, o > 0 (got k={k}, o={o})"
                )));
            }
            Ok(match metric.kind {
                MetricKind::PoA => -k * f.eval(k) + e1 * o * f.eval(k + o),
                MetricKind::CrSelfish => -f.integral(k) + e1 * o * f.eval(k + o),
                MetricKind::CrCooperative => -k * f.eval(k) + e1 * f.marginal(k, o),
            })
        }
        Mode::Unweighted => {
            check_unweighted_args(k, o)?;
            Ok(match metric.kind {
                MetricKind::PoA => -k * f.eval(k) + e1 * o * f.eval(k + 1.0),
                MetricKind::CrSelfish => {
                    let s: f64 = (1..=k as u64).map(|h| f.eval(h as f64)).sum();
                    -s + e1 * o * f.eval(k + 1.0)
                }
                MetricKind::CrCooperative => -k * f.eval(k) + e1 * f.marginal(k, 1.0),
            })
        }
    }
}

/// The parametric ratio `γ(x, k, o, f) = (k f(k) + x β) / (o f(o))`.
pub fn gamma_param(
    mode: Mode,
    metric: Metric,
    x: f64,
    k: f64,
    o: f64,
    f: &LatencyFunction,
) -> Result<f64> {
    let b = beta(mode, metric, k, o, f)?;
    let den = o * f.eval(o);
    if den <= 0.0 {
        return Err(Error::InvalidInput("o f(o) is zero".into()));
    }
    Ok((k * f.eval(k) + x * b) / den)
}

/// Unique positive root of the metric's defining equation for `t^d`:
///
/// - PoA: `-k^{d+1} + (1+ε)(k+1)^d = 0`
/// - CR^s: `-k^{d+1}/(d+1) + (1+ε)(k+1)^d = 0`
/// - CR^c: `-(2+ε) k^{d+1} + (1+ε)(k+1)^{d+1} = 0`
///
/// Found by bisection and polished by Newton steps until the residual is
/// at most `1e-12` relative to the magnitude of its two terms.
pub fn poly_phi(metric: Metric, d: usize) -> f64 {
    let e = metric.epsilon;
    let df = d as f64;
    let terms = move |k: f64| -> (f64, f64) {
        match metric.kind {
            MetricKind::PoA => (k.powi(d as i32 + 1), (1.0 + e) * (k + 1.0).powi(d as i32)),
            MetricKind::CrSelfish => (
                k.powi(d as i32 + 1) / (df + 1.0),
                (1.0 + e) * (k + 1.0).powi(d as i32),
            ),
            MetricKind::CrCooperative => (
                (2.0 + e) * k.powi(d as i32 + 1),
                (1.0 + e) * (k + 1.0).powi(d as i32 + 1),
            ),
        }
    };
    let g = |k: f64| {
        let (a, b) = terms(k);
        b - a
    };
    let dg = |k: f64| -> f64 {
        match metric.kind {
            MetricKind::PoA => {
                -(df + 1.0) * k.powi(d as i32)
                    + (1.0 + e) * df * (k + 1.0).powi(d as i32 - 1)
            }
            MetricKind::CrSelfish => {
                -k.powi(d as i32) + (1.0 + e) * df * (k + 1.0).powi(d as i32 - 1)
            }
            MetricKind::CrCooperative => {
                (df + 1.0) * (-(2.0 + e) * k.powi(d as i32) + (1.0 + e) * (k + 1.0).powi(d as i32))
            }
        }
    };
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut k = bisect_sign_change(0.0, hi, g);
    for _ in 0..8 {
        let (a, b) = terms(k);
        if (b - a).abs() <= 1e-12 * (a.abs() + b.abs()) {
            break;
        }
        let slope = dg(k);
        if slope == 0.0 {
            break;
        }
        let next = k - g(k) / slope;
        if !(next > 0.0 && next.is_finite()) {
            break;
        }
        k = next;
    }
    k
}

/// Relative residual of the root equation at `k` (for diagnostics).
pub fn poly_phi_residual(metric: Metric, d: usize, k: f64) -> f64 {
    let e = metric.epsilon;
    let (a, b) = match metric.kind {
        MetricKind::PoA => (k.powi(d as i32 + 1), (1.0 + e) * (k + 1.0).powi(d as i32)),
        MetricKind::CrSelfish => (
            k.powi(d as i32 + 1) / (d as f64 + 1.0),
            (1.0 + e) * (k + 1.0).powi(d as i32),
        ),
        MetricKind::CrCooperative => (
            (2.0 + e) * k.powi(d as i32 + 1),
            (1.0 + e) * (k + 1.0).powi(d as i32 + 1),
        ),
    };
    (b - a).abs() / (a.abs() + b.abs())
}

/// Weighted bound of the polynomial class of degree d: `φ^{d+1}`, i.e.
/// `k f(k) / f(1)` for `f = t^d` at the root `k = φ` of [`poly_phi`].
pub fn poly_gamma_weighted(metric: Metric, d: usize) -> f64 {
    if d == 0 {
        return 1.0 + metric.epsilon;
    }
    poly_phi(metric, d).powi(d as i32 + 1)
}

/// k-derivative of weighted β(k, 1, t^d).
fn weighted_beta_dk(metric: Metric, d: usize, k: f64) -> f64 {
    let e = metric.epsilon;
    let df = d as f64;
    let dm1 = |p: i32| if d == 0 { 0.0 } else { (k + 1.0).powi(p) };
    match metric.kind {
        MetricKind::PoA => -(df + 1.0) * k.powi(d as i32) + (1.0 + e) * df * dm1(d as i32 - 1),
        MetricKind::CrSelfish => -k.powi(d as i32) + (1.0 + e) * df * dm1(d as i32 - 1),
        MetricKind::CrCooperative => {
            -(2.0 + e) * (df + 1.0) * k.powi(d as i32)
                + (1.0 + e) * (df + 1.0) * (k + 1.0).powi(d as i32)
        }
    }
}

fn weighted_poly_bound(metric: Metric, d: usize) -> BoundResult {
    // Monomial dominance: sup over t^0..t^d; the value is increasing in the
    // degree, but every degree is evaluated for robustness.
    let mut best: Option<(f64, usize)> = None;
    for h in 0..=d {
        let v = poly_gamma_weighted(metric, h);
        if best.is_none_or(|b| v > b.0) {
            best = Some((v, h));
        }
    }
    let (value, h) = best.expect("d >= 0");
    if h == 0 {
        return BoundResult {
            value,
            x: 1.0,
            witness: Witness::Case1 {
                k: 1.0,
                o: 1.0,
                f: LatencyFunction::monomial(0),
            },
            cap_hit: false,
        };
    }
    let k = poly_phi(metric, h);
    // Stationarity of γ(x, k, 1, t^h) in k at the root of β:
    // (h+1) k^h + x β'(k) = 0.
    let x = (h as f64 + 1.0) * k.powi(h as i32) / -weighted_beta_dk(metric, h, k);
    BoundResult {
        value,
        x,
        witness: Witness::Case1 {
            k,
            o: 1.0,
            f: LatencyFunction::monomial(h),
        },
        cap_hit: false,
    }
}

/// One candidate tuple of a grid search.
#[derive(Clone, Debug, PartialEq)]
struct Tuple {
    f_idx: usize,
    k: f64,
    o: f64,
    /// `k f(k) / (o f(o))`
    a: f64,
    /// `β / (o f(o))`
    b: f64,
}

impl Tuple {
    fn gamma(&self, x: f64) -> f64 {
        self.a + x * self.b
    }
}

/// Pick the larger γ; ties go to the lexicographically smaller tuple.
fn better(x: f64, a: Option<Tuple>, b: Option<Tuple>) -> Option<Tuple> {
    match (a, b) {
        (None, t) | (t, None) => t,
        (Some(p), Some(q)) => {
            let (gp, gq) = (p.gamma(x), q.gamma(x));
            let key = |t: &Tuple| (t.f_idx, t.k, t.o);
            if gq > gp || (gq == gp && key(&q).partial_cmp(&key(&p)) == Some(std::cmp::Ordering::Less))
            {
                Some(q)
            } else {
                Some(p)
            }
        }
    }
}

/// Precomputed per-function data for grid searches. For each k on the
/// grid, `β(k, o) = -s_k + c_k o + m_k` where the o-dependence is linear
/// (unweighted PoA/CR^s), constant (unweighted CR^c), or general
/// (weighted; `beta_fn` is then used).
struct FnTable {
    f: LatencyFunction,
    /// Pure monomial degree, enabling the continuous-o shortcut.
    monomial: Option<usize>,
    ks: Vec<f64>,
    kfk: Vec<f64>,
    /// Unweighted only: β(k, o) = -s_k + c_k o.
    s: Vec<f64>,
    c: Vec<f64>,
    os: Vec<f64>,
    ofo: Vec<f64>,
}

fn monomial_degree(f: &LatencyFunction) -> Option<usize> {
    let c = f.coefficients()?;
    let d = c.len() - 1;
    if c[..d].iter().all(|&a| a == 0.0) && c[d] == 1.0 {
        Some(d)
    } else {
        None
    }
}

struct Grid {
    mode: Mode,
    metric: Metric,
    tables: Vec<FnTable>,
    k_max: f64,
    o_max: f64,
}

impl Grid {
    fn unweighted(metric: Metric, funcs: &[LatencyFunction], caps: &Caps) -> Self {
        let e1 = 1.0 + metric.epsilon;
        let k_cap = caps.k_cap as usize;
        let o_cap = caps.o_cap as usize;
        let tables = funcs
            .iter()
            .map(|f| {
                let ks: Vec<f64> = (0..=k_cap).map(|k| k as f64).collect();
                let kfk: Vec<f64> = ks.iter().map(|&k| k * f.eval(k)).collect();
                let mut s = Vec::with_capacity(ks.len());
                let mut c = Vec::with_capacity(ks.len());
                let mut cum = 0.0;
                for (i, &k) in ks.iter().enumerate() {
                    if k > 0.0 {
                        cum += f.eval(k);
                    }
                    match metric.kind {
                        MetricKind::PoA => {
                            s.push(kfk[i]);
                            c.push(e1 * f.eval(k + 1.0));
                        }
                        MetricKind::CrSelfish => {
                            s.push(cum);
                            c.push(e1 * f.eval(k + 1.0));
                        }
                        MetricKind::CrCooperative => {
                            s.push(kfk[i] - e1 * f.marginal(k, 1.0));
                            c.push(0.0);
                        }
                    }
                }
                let os: Vec<f64> = (1..=o_cap).map(|o| o as f64).collect();
                let ofo = os.iter().map(|&o| o * f.eval(o)).collect();
                FnTable {
                    f: f.clone(),
                    monomial: monomial_degree(f),
                    ks,
                    kfk,
                    s,
                    c,
                    os,
                    ofo,
                }
            })
            .collect();
        Grid {
            mode: Mode::Unweighted,
            metric,
            tables,
            k_max: k_cap as f64,
            o_max: o_cap as f64,
        }
    }

    fn weighted(metric: Metric, funcs: &[LatencyFunction]) -> Self {
        // Geometric grids over [1e-3, 1e3].
        let pts = |n: usize| -> Vec<f64> {
            (0..=n)
                .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / n as f64))
                .collect()
        };
        let tables = funcs
            .iter()
            .map(|f| {
                let ks = pts(600);
                let kfk = ks.iter().map(|&k| k * f.eval(k)).collect();
                let os = pts(300);
                let ofo = os.iter().map(|&o| o * f.eval(o)).collect();
                FnTable {
                    f: f.clone(),
                    monomial: None,
                    ks,
                    kfk,
                    s: Vec::new(),
                    c: Vec::new(),
                    os,
                    ofo,
                }
            })
            .collect();
        Grid {
            mode: Mode::Weighted,
            metric,
            tables,
            k_max: 1e3,
            o_max: 1e3,
        }
    }

    fn tuple(&self, f_idx: usize, ki: usize, o: f64, ofo: f64) -> Tuple {
        let t = &self.tables[f_idx];
        let k = t.ks[ki];
        let b = match self.mode {
            Mode::Unweighted => -t.s[ki] + t.c[ki] * o,
            Mode::Weighted => beta(self.mode, self.metric, k, o, &t.f).unwrap_or(f64::NAN),
        };
        Tuple {
            f_idx,
            k,
            o,
            a: t.kfk[ki] / ofo,
            b: b / ofo,
        }
    }

    /// Best tuple for a fixed function and k.
    fn best_for_k(&self, x: f64, f_idx: usize, ki: usize) -> Option<Tuple> {
        let t = &self.tables[f_idx];
        let mut best = None;
        match (self.mode, t.monomial) {
            (Mode::Unweighted, Some(h)) => {
                // γ(o) = (A + B o) / o^{h+1} is unimodal in continuous o.
                let a = t.kfk[ki] - x * t.s[ki];
                let bb = x * t.c[ki];
                let mut cands = vec![1.0, self.o_max];
                if h >= 1 && a < 0.0 && bb > 0.0 {
                    let os = -(h as f64 + 1.0) * a / (h as f64 * bb);
                    cands.push(os.floor().clamp(1.0, self.o_max));
                    cands.push(os.ceil().clamp(1.0, self.o_max));
                }
                cands.sort_by(f64::total_cmp);
                cands.dedup();
                for o in cands {
                    let tu = self.tuple(f_idx, ki, o, t.ofo[o as usize - 1]);
                    best = better(x, best, Some(tu));
                }
            }
            _ => {
                for (oi, &o) in t.os.iter().enumerate() {
                    let tu = self.tuple(f_idx, ki, o, t.ofo[oi]);
                    best = better(x, best, Some(tu));
                }
            }
        }
        best
    }

    fn sup(&self, x: f64) -> Tuple {
        (0..self.tables.len())
            .flat_map(|fi| (0..self.tables[fi].ks.len()).map(move |ki| (fi, ki)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(fi, ki)| self.best_for_k(x, fi, ki))
            .reduce(|| None, |a, b| better(x, a, b))
            .expect("grid is non-empty")
    }

    fn on_cap(&self, t: &Tuple) -> bool {
        let kt = &self.tables[t.f_idx].ks;
        let ot = &self.tables[t.f_idx].os;
        t.k >= self.k_max
            || t.o >= self.o_max
            || (self.mode == Mode::Weighted && (t.k <= kt[0] || t.o <= ot[0]))
    }

    fn beta_of(&self, t: &Tuple) -> f64 {
        t.b * t.o * self.tables[t.f_idx].f.eval(t.o)
    }

    fn case1(&self, t: &Tuple) -> Witness {
        Witness::Case1 {
            k: t.k,
            o: t.o,
            f: self.tables[t.f_idx].f.clone(),
        }
    }

    /// Minimize the convex sup over x in `[1, x_max]`, then read the
    /// witness off the active tuples on both sides of the minimizer.
    fn solve(&self, x_max: f64) -> Result<BoundResult> {
        let s = |x: f64| self.sup(x).gamma(x);
        // Bracket expansion: grow the upper end while the minimum sits on it.
        let mut hi = 10.0f64.min(x_max);
        let (mut x, mut v);
        loop {
            (x, v) = golden_min(s, 1.0, hi, GOLDEN_TOL);
            let s1 = s(1.0);
            if s1 <= v {
                (x, v) = (1.0, s1);
            }
            if x < hi * (1.0 - 1e-6) || hi >= x_max {
                break;
            }
            hi = (hi * 10.0).min(x_max);
        }
        if x >= x_max * (1.0 - 1e-6) {
            return Err(Error::Unbounded(format!(
                "bound still decreasing at x = {x_max}; sup over tuples is unbounded in x"
            )));
        }
        let delta = 1e-7 * x;
        let right = self.sup(x + delta);
        let left = self.sup((x - delta).max(1.0));
        let (bl, br) = (self.beta_of(&left), self.beta_of(&right));
        let mut cap_hit = self.on_cap(&right) || (x > 1.0 && self.on_cap(&left));
        let witness;
        if x > 1.0 && bl < 0.0 && br > 0.0 && left != right {
            // Exact kink of the two active lines.
            let xc = (left.a - right.a) / (right.b - left.b);
            let vc = s(xc);
            if xc >= 1.0 && vc <= v * (1.0 + 1e-12) {
                x = xc;
                v = vc;
            }
            let (tl, tr) = (&self.tables[left.f_idx], &self.tables[right.f_idx]);
            witness = Witness::Case2 {
                k1: left.k,
                k2: right.k,
                o1: left.o,
                o2: right.o,
                f1: tl.f.clone(),
                f2: tr.f.clone(),
                alpha1: br,
                alpha2: -bl,
            };
        } else if br >= 0.0 {
            witness = self.case1(&right);
        } else if bl >= 0.0 {
            witness = self.case1(&left);
        } else {
            cap_hit = true;
            witness = self.case1(&right);
        }
        Ok(BoundResult {
            value: v,
            x,
            witness,
            cap_hit,
        })
    }
}

/// `inf_{x >= 1} sup_{k, o, f} γ(x, k, o, f)` for a latency class.
///
/// - Weighted polynomial classes are solved in closed form (o = 1
///   normalization, root of β at the top degree).
/// - Unweighted classes use the integer grid `k ∈ [0, K_cap]`,
///   `o ∈ [1, O_cap]` (monomials use the exact continuous optimum in o)
///   and golden-section search over x.
/// - Weighted explicit classes use geometric grids on `[1e-3, 1e3]`.
///
/// Classes of constant functions short-circuit to `1 + ε`.
pub fn gamma_bound(
    mode: Mode,
    metric: Metric,
    class: &LatencyClass,
    caps: &Caps,
) -> Result<BoundResult> {
    if class.generators().is_empty() {
        return Err(Error::InvalidInput("empty latency class".into()));
    }
    if class.is_constant_only() {
        let f = class.generators().remove(0);
        return Ok(BoundResult {
            value: 1.0 + metric.epsilon,
            x: 1.0,
            witness: Witness::Case1 { k: 1.0, o: 1.0, f },
            cap_hit: false,
        });
    }
    match (mode, class) {
        (Mode::Weighted, LatencyClass::Polynomial(d)) => Ok(weighted_poly_bound(metric, *d)),
        (Mode::Weighted, LatencyClass::Explicit(v)) => Grid::weighted(metric, v).solve(caps.x_max),
        (Mode::Unweighted, c) => Grid::unweighted(metric, &c.generators(), caps).solve(caps.x_max),
    }
}

/// How to read an unweighted closed-form value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormKind {
    /// Matches the class bound.
    Tight,
    /// A certified lower bound only (selfish competitive ratio).
    LowerBound,
}

/// Unweighted closed-form result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedForm {
    pub value: f64,
    pub witness: Witness,
    pub kind: ClosedFormKind,
}

/// Closed-form characterization for unweighted polynomial classes.
///
/// PoA and CR^c: the real root k of `β(k, 1, t^d) = 0`; if k is an integer
/// the witness is Case 1, otherwise Case 2 between `⌊k⌋+1` and `⌊k⌋`.
/// CR^s: the largest integer k with `β(k, 1, t^d) >= 0`, then the same
/// construction; this is a lower bound, reported as such.
pub fn unweighted_closed_form(metric: Metric, d: usize, caps: &Caps) -> Result<ClosedForm> {
    if d == 0 {
        return Err(Error::InvalidInput("degree must be >= 1".into()));
    }
    let f = LatencyFunction::monomial(d);
    let b = |k: f64| beta(Mode::Unweighted, metric, k, 1.0, &f);
    let (k_lo, exact) = match metric.kind {
        MetricKind::PoA | MetricKind::CrCooperative => {
            // β_U(k, 1, t^d) coincides with the weighted root equations.
            let k = poly_phi(metric, d);
            let r = k.round();
            if (k - r).abs() <= 1e-9 * k.max(1.0) && b(r)? == 0.0 {
                (r, true)
            } else {
                (k.floor(), false)
            }
        }
        MetricKind::CrSelfish => {
            let mut k = 0.0;
            while b(k + 1.0)? >= 0.0 {
                k += 1.0;
                if k > caps.k_cap as f64 {
                    return Err(Error::CapExceeded {
                        what: "closed-form k search",
                        needed: k,
                        cap: caps.k_cap as f64,
                    });
                }
            }
            (k, b(k)? == 0.0)
        }
    };
    let witness = if exact {
        Witness::Case1 {
            k: k_lo,
            o: 1.0,
            f: f.clone(),
        }
    } else {
        let (k1, k2) = (k_lo + 1.0, k_lo);
        Witness::Case2 {
            k1,
            k2,
            o1: 1.0,
            o2: 1.0,
            f1: f.clone(),
            f2: f.clone(),
            alpha1: b(k2)?,
            alpha2: -b(k1)?,
        }
    };
    let kind = match metric.kind {
        MetricKind::CrSelfish => ClosedFormKind::LowerBound,
        _ => ClosedFormKind::Tight,
    };
    Ok(ClosedForm {
        value: witness.value(),
        witness,
        kind,
    })
}

/// Find a witness tuple whose value exceeds `m`.
pub fn find_witness(
    mode: Mode,
    metric: Metric,
    class: &LatencyClass,
    m: f64,
    caps: &Caps,
) -> Result<Witness> {
    let mut candidates = Vec::new();
    if let (Mode::Unweighted, LatencyClass::Polynomial(d)) = (mode, class) {
        if *d >= 1 {
            candidates.push(unweighted_closed_form(metric, *d, caps)?.witness);
        }
    }
    let bound = gamma_bound(mode, metric, class, caps)?;
    candidates.push(bound.witness);
    let best = candidates
        .into_iter()
        .map(|w| (w.value(), w))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty");
    if best.0 > m {
        Ok(best.1)
    } else {
        Err(Error::WitnessNotFound {
            threshold: m,
            detail: format!(
                "best witness value {} (bound {}{})",
                best.0,
                bound.value,
                if bound.cap_hit { ", search caps hit" } else { "" }
            ),
        })
    }
}

/// A tuple whose dual inequality fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateViolation {
    pub index: usize,
    pub k: f64,
    pub o: f64,
    /// `γ o f(o) - (k f(k) + x β)`, negative.
    pub slack: f64,
}

/// Outcome of [`dual_certificate_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub feasible: bool,
    pub violations: Vec<CertificateViolation>,
    /// Smallest relative slack over all tuples.
    pub min_relative_slack: f64,
}

/// Check `γ o f(o) >= k f(k) + x β(k, o, f)` for every tuple, with
/// relative slack [`CERT_TOL`].
pub fn dual_certificate_check(
    mode: Mode,
    metric: Metric,
    x: f64,
    gamma: f64,
    tuples: &[(f64, f64, LatencyFunction)],
) -> Result<CertificateReport> {
    if x < 1.0 {
        return Err(Error::InvalidInput(format!("x = {x} < 1")));
    }
    let mut violations = Vec::new();
    let mut min_rel = f64::INFINITY;
    for (index, (k, o, f)) in tuples.iter().enumerate() {
        let b = beta(mode, metric, *k, *o, f)?;
        let lhs = gamma * o * f.eval(*o);
        let rhs = k * f.eval(*k) + x * b;
        let scale = lhs.abs() + (k * f.eval(*k)).abs() + (x * b).abs();
        let slack = lhs - rhs;
        let rel = if scale > 0.0 { slack / scale } else { 0.0 };
        min_rel = min_rel.min(rel);
        if rel < -CERT_TOL {
            violations.push(CertificateViolation {
                index,
                k: *k,
                o: *o,
                slack,
            });
        }
    }
    Ok(CertificateReport {
        feasible: violations.is_empty(),
        violations,
        min_relative_slack: min_rel,
    })
}

/// `[x]_{ε,f} = inf{t >= 0 : f(x) <= (1+ε) f(x/2 + t)}`, by bisection on
/// `[0, x/2]` to absolute tolerance [`BRACKET_TOL`]. For ε = 0 and strictly
/// increasing continuous f this is `x/2`.
pub fn bracket_threshold(f: &LatencyFunction, eps: f64, x: f64) -> Result<f64> {
    crate::error::ensure_finite(x, "x")?;
    if x <= 0.0 {
        return Err(Error::InvalidInput(format!("x = {x} must be > 0")));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(format!("epsilon {eps} must be >= 0")));
    }
    let fx = f.eval(x);
    let pred = |t: f64| fx <= (1.0 + eps) * f.eval(0.5 * x + t);
    if pred(0.0) {
        return Ok(0.0);
    }
    Ok(bisect_predicate(0.0, 0.5 * x, BRACKET_TOL, pred))
}

/// Optimum congestion `λ x + (1-λ) [x]` of the identical-resources bound.
pub fn identical_opt_congestion(lambda: f64, x: f64, bracket: f64) -> f64 {
    lambda * x + (1.0 - lambda) * bracket
}

/// `γ_{ε,f}(x, λ) = (λ x f(x) + (1-λ)[x] f([x])) / (c f(c))` with
/// `c = λ x + (1-λ)[x]`.
pub fn gamma_identical(eps: f64, f: &LatencyFunction, x: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidInput(format!("lambda {lambda} not in (0, 1)")));
    }
    let br = bracket_threshold(f, eps, x)?;
    Ok(gamma_identical_with(f, x, lambda, br))
}

fn gamma_identical_with(f: &LatencyFunction, x: f64, lambda: f64, br: f64) -> f64 {
    let num = lambda * x * f.eval(x) + (1.0 - lambda) * br * f.eval(br);
    let c = identical_opt_congestion(lambda, x, br);
    num / (c * f.eval(c))
}

/// Result of [`identical_bound`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdenticalBound {
    pub value: f64,
    pub x: f64,
    pub lambda: f64,
    /// `[x]_{ε,f}` at the maximizing x.
    pub bracket: f64,
    /// `λ* <= 1/2`.
    pub lambda_at_most_half: bool,
    /// `ε = 0` or `λ* x + (1-λ*)[x] - x/2 >= 0`.
    pub eps_condition: bool,
}

impl IdenticalBound {
    /// Whether the worst-case subdivision instance is applicable.
    pub fn applicable(&self) -> bool {
        self.lambda_at_most_half && self.eps_condition
    }
}

fn best_lambda(f: &LatencyFunction, x: f64, br: f64) -> (f64, f64) {
    golden_max(
        |l| gamma_identical_with(f, x, l, br),
        1e-12,
        1.0 - 1e-12,
        GOLDEN_TOL,
    )
}

/// Inner maximization over λ for a fixed x: `(λ*, value, [x])`.
pub fn identical_best_lambda(eps: f64, f: &LatencyFunction, x: f64) -> Result<(f64, f64, f64)> {
    let br = bracket_threshold(f, eps, x)?;
    let (l, v) = best_lambda(f, x, br);
    Ok((l, v, br))
}

/// `sup_{x>0} max_{λ∈(0,1)} γ_{ε,f}(x, λ)` by nested golden-section search
/// (outer over log x, seeded by a log grid on `[1e-3, 1e3]`).
pub fn identical_bound(eps: f64, f: &LatencyFunction) -> Result<IdenticalBound> {
    let probe: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
    if !f.is_semi_convex(&probe)? {
        return Err(Error::NotSemiConvex);
    }
    let inner = |lx: f64| -> f64 {
        let x = 10f64.powf(lx);
        match bracket_threshold(f, eps, x) {
            Ok(br) => best_lambda(f, x, br).1,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let n = 60;
    let grid: Vec<f64> = (0..=n).map(|i| -3.0 + 6.0 * i as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.par_iter().map(|&lx| inner(lx)).collect();
    let mut bi = 0;
    for i in 1..vals.len() {
        if vals[i] > vals[bi] * (1.0 + 1e-12) {
            bi = i;
        }
    }
    let lo = grid[bi.saturating_sub(1)];
    let hi = grid[(bi + 1).min(n)];
    let (mut lx, mut v) = golden_max(inner, lo, hi, GOLDEN_TOL);
    if vals[bi] > v {
        lx = grid[bi];
        v = vals[bi];
    }
    let x = 10f64.powf(lx);
    let (lambda, _, bracket) = identical_best_lambda(eps, f, x)?;
    Ok(IdenticalBound {
        value: v,
        x,
        lambda,
        bracket,
        lambda_at_most_half: lambda <= 0.5,
        eps_condition: eps == 0.0
            || identical_opt_congestion(lambda, x, bracket) - 0.5 * x >= 0.0,
    })
}

/// Closed form for `f = t^d`, ε = 0: `λ*_d = (2^{d+1}-d-2)/(d 2^{d+1}-d)`
/// and value `d^d (2^{d+1}-1)^{d+1} / (2^d (d+1)^{d+1} (2^d-1)^d)`.
pub fn corollary_poly_identical(d: usize) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::InvalidInput("degree must be >= 1".into()));
    }
    let df = d as f64;
    let p = 2f64.powi(d as i32);
    let lambda = (2.0 * p - df - 2.0) / (df * 2.0 * p - df);
    let value = df.powi(d as i32) * (2.0 * p - 1.0).powi(d as i32 + 1)
        / (p * (df + 1.0).powi(d as i32 + 1) * (p - 1.0).powi(d as i32));
    Ok((lambda, value))
}
