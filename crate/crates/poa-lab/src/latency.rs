//! Latency functions: polynomial or user-registered custom shapes, with the
//! analytic primitives used throughout the crate (evaluation, integral,
//! marginal cost, semi-convexity probing and scaling).
//!
//! Polynomials are stored by their non-negative coefficients, which makes
//! them non-decreasing and semi-convex by construction. Custom functions are
//! registered by name in a process-wide registry so that JSON instances can
//! reference them; their monotonicity and positivity are probe-checked at
//! registration time.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numeric::adaptive_simpson;

/// Absolute tolerance of the quadrature used for custom integrals.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Relative slack allowed in the semi-convexity second-difference probe.
pub const SEMI_CONVEX_TOL: f64 = 1e-9;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A registered custom latency shape.
pub struct CustomDef {
    name: String,
    eval: ScalarFn,
    integral: Option<ScalarFn>,
}

impl fmt::Debug for CustomDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDef")
            .field("name", &self.name)
            .field("closed_form_integral", &self.integral.is_some())
            .finish()
    }
}

fn registry() -> &'static RwLock<HashMap<String, Arc<CustomDef>>> {
    static REG: OnceLock<RwLock<HashMap<String, Arc<CustomDef>>>> = OnceLock::new();
    REG.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Probe points used to validate custom functions at registration.
fn probe_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (-12..=12).map(|e| 10f64.powf(e as f64 / 2.0)).collect();
    g.extend((1..=200).map(|i| i as f64 * 0.05));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Register a custom latency function under `name`.
///
/// The function must be finite, strictly positive and non-decreasing on an
/// internal probe grid; the check is empirical, not a proof. An optional
/// closed-form antiderivative `F` with `F(0) = 0` replaces quadrature.
/// Re-registering a name replaces the previous definition.
pub fn register_custom(
    name: &str,
    eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    integral: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
) -> Result<()> {
    if name.is_empty() {
        return Err(Error::InvalidInput("custom latency name is empty".into()));
    }
    let grid = probe_grid();
    let mut prev = f64::NEG_INFINITY;
    for &x in &grid {
        let v = eval(x);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "custom latency `{name}` is not positive and finite at x={x}"
            )));
        }
        if v < prev * (1.0 - 1e-12) {
            return Err(Error::InvalidInput(format!(
                "custom latency `{name}` decreases near x={x}"
            )));
        }
        prev = v;
    }
    let def = CustomDef {
        name: name.to_string(),
        eval: Arc::new(eval),
        integral: integral.map(Arc::from),
    };
    registry()
        .write()
        .expect("latency registry poisoned")
        .insert(name.to_string(), Arc::new(def));
    Ok(())
}

fn lookup_custom(name: &str) -> Result<Arc<CustomDef>> {
    registry()
        .read()
        .expect("latency registry poisoned")
        .get(name)
        .cloned()
        .ok_or_else(|| Error::UnknownCustom(name.to_string()))
}

/// A custom latency together with ordinate and abscissa scale factors:
/// `x -> ordinate * def(abscissa * x)`.
#[derive(Clone, Debug)]
pub struct CustomLatency {
    def: Arc<CustomDef>,
    ordinate: f64,
    abscissa: f64,
}

/// A non-decreasing latency function that is positive on positive inputs.
#[derive(Clone, Debug)]
pub enum LatencyFunction {
    /// `sum_h coeffs[h] * x^h` with all coefficients non-negative.
    Polynomial(Vec<f64>),
    /// A registered custom shape, possibly rescaled.
    Custom(CustomLatency),
}

impl LatencyFunction {
    /// Polynomial with the given non-negative coefficients `a_0..a_d`.
    ///
    /// Trailing zero coefficients are dropped; at least one coefficient must
    /// be positive so that the function is positive for positive inputs.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let mut coeffs = coeffs;
        for &c in &coeffs {
            ensure_finite(c, "polynomial coefficient")?;
            if c < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "polynomial coefficient {c} is negative"
                )));
            }
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidInput(
                "polynomial latency must have a positive coefficient".into(),
            ));
        }
        Ok(LatencyFunction::Polynomial(coeffs))
    }

    /// The monomial `x^d`.
    pub fn monomial(d: usize) -> Self {
        let mut c = vec![0.0; d + 1];
        c[d] = 1.0;
        LatencyFunction::Polynomial(c)
    }

    /// The constant function `c > 0`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::polynomial(vec![c])
    }

    /// A previously registered custom function.
    pub fn custom(name: &str) -> Result<Self> {
        Ok(LatencyFunction::Custom(CustomLatency {
            def: lookup_custom(name)?,
            ordinate: 1.0,
            abscissa: 1.0,
        }))
    }

    /// Polynomial degree, `None` for custom functions.
    pub fn degree(&self) -> Option<usize> {
        match self {
            LatencyFunction::Polynomial(c) => Some(c.len() - 1),
            LatencyFunction::Custom(_) => None,
        }
    }

    /// Polynomial coefficients, `None` for custom functions.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            LatencyFunction::Polynomial(c) => Some(c),
            LatencyFunction::Custom(_) => None,
        }
    }

    /// `true` for constant functions.
    pub fn is_constant(&self) -> bool {
        matches!(self, LatencyFunction::Polynomial(c) if c.len() == 1)
    }

    /// Evaluate at `x >= 0`; at `x = 0` returns the right limit.
    ///
    /// The caller guarantees `x` is finite and non-negative; use
    /// [`LatencyFunction::try_eval`] for validated input.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LatencyFunction::Polynomial(c) => {
                let mut acc = 0.0;
                for &a in c.iter().rev() {
                    acc = acc * x + a;
                }
                acc
            }
            LatencyFunction::Custom(cl) => {
                let y = cl.abscissa * x;
                let v = (cl.def.eval)(y);
                let v = if v.is_finite() || y > 0.0 {
                    v
                } else {
                    (cl.def.eval)(f64::MIN_POSITIVE)
                };
                cl.ordinate * v
            }
        }
    }

    /// Validated evaluation: rejects negative or non-finite `x`.
    pub fn try_eval(&self, x: f64) -> Result<f64> {
        ensure_finite(x, "latency argument")?;
        if x < 0.0 {
            return Err(Error::InvalidInput(format!("latency argument {x} < 0")));
        }
        Ok(self.eval(x))
    }

    /// `int_0^k f(t) dt`: closed form for polynomials and for customs that
    /// registered an antiderivative, adaptive quadrature otherwise.
    pub fn integral(&self, k: f64) -> f64 {
        match self {
            LatencyFunction::Polynomial(c) => {
                let mut acc = 0.0;
                for (h, &a) in c.iter().enumerate().rev() {
                    acc = acc * k + a / (h as f64 + 1.0);
                }
                acc * k
            }
            LatencyFunction::Custom(cl) => match &cl.def.integral {
                Some(anti) => cl.ordinate * anti(cl.abscissa * k) / cl.abscissa,
                None => {
                    let f = |t: f64| self.eval(t);
                    adaptive_simpson(&f, 0.0, k, QUADRATURE_TOL)
                }
            },
        }
    }

    /// Validated integral: rejects negative or non-finite `k`.
    pub fn try_integral(&self, k: f64) -> Result<f64> {
        ensure_finite(k, "integral bound")?;
        if k < 0.0 {
            return Err(Error::InvalidInput(format!("integral bound {k} < 0")));
        }
        Ok(self.integral(k))
    }

    /// Quadrature of `int_0^k f`, regardless of any closed form.
    pub fn integral_by_quadrature(&self, k: f64) -> f64 {
        let f = |t: f64| self.eval(t);
        adaptive_simpson(&f, 0.0, k, QUADRATURE_TOL)
    }

    /// Marginal social-cost increase of adding weight `w` at congestion `k`:
    /// `(k+w) f(k+w) - k f(k)`.
    #[inline]
    pub fn marginal(&self, k: f64, w: f64) -> f64 {
        (k + w) * self.eval(k + w) - k * self.eval(k)
    }

    /// Whether `x f(x)` is convex on `grid`, judged by second differences
    /// with relative slack [`SEMI_CONVEX_TOL`]. Polynomials short-circuit.
    pub fn is_semi_convex(&self, grid: &[f64]) -> Result<bool> {
        validate_grid(grid)?;
        if matches!(self, LatencyFunction::Polynomial(_)) {
            return Ok(true);
        }
        let g: Vec<f64> = grid.iter().map(|&x| x * self.eval(x)).collect();
        let slopes: Vec<f64> = (0..grid.len() - 1)
            .map(|i| (g[i + 1] - g[i]) / (grid[i + 1] - grid[i]))
            .collect();
        Ok(slopes.windows(2).all(|w| {
            let scale = w[0].abs().max(w[1].abs()).max(1.0);
            w[1] - w[0] >= -SEMI_CONVEX_TOL * scale
        }))
    }

    /// Whether the function is non-decreasing on `grid`.
    pub fn is_non_decreasing(&self, grid: &[f64]) -> bool {
        grid.windows(2)
            .all(|w| self.eval(w[1]) >= self.eval(w[0]) * (1.0 - 1e-12))
    }

    /// `x -> a * f(x)`.
    pub fn scale_ordinate(&self, a: f64) -> Result<Self> {
        check_scale(a)?;
        Ok(match self {
            LatencyFunction::Polynomial(c) => {
                LatencyFunction::Polynomial(c.iter().map(|v| v * a).collect())
            }
            LatencyFunction::Custom(cl) => LatencyFunction::Custom(CustomLatency {
                ordinate: cl.ordinate * a,
                ..cl.clone()
            }),
        })
    }

    /// `x -> f(a * x)`.
    pub fn scale_abscissa(&self, a: f64) -> Result<Self> {
        check_scale(a)?;
        Ok(match self {
            LatencyFunction::Polynomial(c) => LatencyFunction::Polynomial(
                c.iter()
                    .enumerate()
                    .map(|(h, v)| v * a.powi(h as i32))
                    .collect(),
            ),
            LatencyFunction::Custom(cl) => LatencyFunction::Custom(CustomLatency {
                abscissa: cl.abscissa * a,
                ..cl.clone()
            }),
        })
    }
}

fn check_scale(a: f64) -> Result<()> {
    ensure_finite(a, "scale factor")?;
    if a <= 0.0 {
        return Err(Error::InvalidInput(format!("scale factor {a} must be > 0")));
    }
    Ok(())
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidInput("probe grid needs at least 3 points".into()));
    }
    if grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput("probe grid must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("probe grid must be strictly increasing".into()));
    }
    Ok(())
}

impl PartialEq for LatencyFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (LatencyFunction::Polynomial(a), LatencyFunction::Polynomial(b)) => a == b,
            (LatencyFunction::Custom(a), LatencyFunction::Custom(b)) => {
                a.def.name == b.def.name && a.ordinate == b.ordinate && a.abscissa == b.abscissa
            }
            _ => false,
        }
    }
}

impl fmt::Display for LatencyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyFunction::Polynomial(c) => {
                let mut first = true;
                for (h, &a) in c.iter().enumerate() {
                    if a == 0.0 && c.len() > 1 {
                        continue;
                    }
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    match (h, a == 1.0) {
                        (0, _) => write!(f, "{a}")?,
                        (1, true) => write!(f, "t")?,
                        (1, false) => write!(f, "{a}t")?,
                        (_, true) => write!(f, "t^{h}")?,
                        (_, false) => write!(f, "{a}t^{h}")?,
                    }
                }
                Ok(())
            }
            LatencyFunction::Custom(cl) => {
                if cl.ordinate != 1.0 {
                    write!(f, "{}*", cl.ordinate)?;
                }
                if cl.abscissa != 1.0 {
                    write!(f, "{}({}t)", cl.def.name, cl.abscissa)
                } else {
                    write!(f, "{}(t)", cl.def.name)
                }
            }
        }
    }
}

/// JSON form of a latency function.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LatencySpec {
    Poly {
        coeffs: Vec<f64>,
    },
    Custom {
        name: String,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        ordinate: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        abscissa: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl Serialize for LatencyFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let spec = match self {
            LatencyFunction::Polynomial(c) => LatencySpec::Poly { coeffs: c.clone() },
            LatencyFunction::Custom(cl) => LatencySpec::Custom {
                name: cl.def.name.clone(),
                ordinate: cl.ordinate,
                abscissa: cl.abscissa,
            },
        };
        spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatencyFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match LatencySpec::deserialize(d)? {
            LatencySpec::Poly { coeffs } => {
                LatencyFunction::polynomial(coeffs).map_err(D::Error::custom)
            }
            LatencySpec::Custom {
                name,
                ordinate,
                abscissa,
            } => {
                let base = LatencyFunction::custom(&name).map_err(D::Error::custom)?;
                base.scale_ordinate(ordinate)
                    .and_then(|f| f.scale_abscissa(abscissa))
                    .map_err(D::Error::custom)
            }
        }
    }
}
