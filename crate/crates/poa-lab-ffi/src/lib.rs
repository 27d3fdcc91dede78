//! C ABI for `poa-lab`.
//!
//! Games and profiles cross the boundary as opaque heap handles created
//! from JSON and released with the matching `*_free` function. Every entry
//! point returns a [`PoaStatus`]; results are written through out-pointers.
//! On failure, a human-readable message for the calling thread is available
//! from [`poa_last_error_message`]. Panics never unwind into C: they are
//! caught and reported as [`PoaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use poa_lab::bounds::{
    corollary_poly_identical, gamma_bound, poly_phi, LatencyClass, Metric, MetricKind, Mode,
};
use poa_lab::caps::Caps;
use poa_lab::dynamics::{check_equilibrium, worst_equilibrium, WorstEquilibrium};
use poa_lab::{CongestionGame, Error, StrategyProfile};

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was rejected (bad JSON, out-of-range value, ...).
    InvalidInput = 3,
    /// An enumeration or size cap was exceeded.
    CapExceeded = 4,
    /// The queried object has no equilibrium.
    NoEquilibrium = 5,
    /// A numerical routine failed (unbounded supremum, no witness, ...).
    Numerical = 6,
    /// An internal panic was caught.
    Panic = 7,
}

/// Metric selector for the bound functions.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoaMetric {
    PriceOfAnarchy = 0,
    CompetitiveRatioSelfish = 1,
    CompetitiveRatioCooperative = 2,
}

impl From<PoaMetric> for MetricKind {
    fn from(m: PoaMetric) -> Self {
        match m {
            PoaMetric::PriceOfAnarchy => MetricKind::PoA,
            PoaMetric::CompetitiveRatioSelfish => MetricKind::CrSelfish,
            PoaMetric::CompetitiveRatioCooperative => MetricKind::CrCooperative,
        }
    }
}

/// Opaque game handle.
pub struct PoaGame {
    game: CongestionGame,
}

/// Opaque strategy-profile handle; tied to the game it was parsed against.
pub struct PoaProfile {
    profile: StrategyProfile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PoaStatus {
    match e {
        Error::CapExceeded { .. } => PoaStatus::CapExceeded,
        Error::Unbounded(_)
        | Error::WitnessNotFound { .. }
        | Error::NotSemiConvex
        | Error::Inconsistent(_)
        | Error::ZeroOptimum => PoaStatus::Numerical,
        _ => PoaStatus::InvalidInput,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (PoaStatus, String)>) -> PoaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PoaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            PoaStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (PoaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PoaStatus, String) {
    (PoaStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PoaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PoaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to a writable `T`.
unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), (PoaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// # Safety
/// `p` must be null or a live handle from this library.
unsafe fn game_ref<'a>(p: *const PoaGame) -> Result<&'a PoaGame, (PoaStatus, String)> {
    p.as_ref().ok_or_else(|| null("game"))
}

/// # Safety
/// `p` must be null or a live handle from this library.
unsafe fn profile_ref<'a>(p: *const PoaProfile) -> Result<&'a PoaProfile, (PoaStatus, String)> {
    p.as_ref().ok_or_else(|| null("profile"))
}

/// Parse a game from its JSON representation.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable
/// storage for a handle. The handle must be released with [`poa_game_free`].
#[no_mangle]
pub unsafe extern "C" fn poa_game_from_json(json: *const c_char, out: *mut *mut PoaGame) -> PoaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let s = read_str(json, "json")?;
        let game = CongestionGame::from_json(s).map_err(lib_err)?;
        out.write(Box::into_raw(Box::new(PoaGame { game })));
        Ok(())
    })
}

/// Release a game handle; null is ignored.
///
/// # Safety
/// `game` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn poa_game_free(game: *mut PoaGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Number of players and resources of a game.
///
/// # Safety
/// `game` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn poa_game_counts(
    game: *const PoaGame,
    players: *mut usize,
    resources: *mut usize,
) -> PoaStatus {
    guard(|| {
        let g = &game_ref(game)?.game;
        write_out(players, g.num_players(), "players")?;
        write_out(resources, g.num_resources(), "resources")
    })
}

/// Parse a total or partial strategy profile against a game. The JSON form
/// is `{"assignment": {"<player id>": <strategy index or null>, ...}}`;
/// players absent from the map are unassigned.
///
/// # Safety
/// `game` must be a live handle, `json` a NUL-terminated string and `out`
/// writable. The handle must be released with [`poa_profile_free`] and must
/// not outlive `game`'s use.
#[no_mangle]
pub unsafe extern "C" fn poa_profile_from_json(
    game: *const PoaGame,
    json: *const c_char,
    out: *mut *mut PoaProfile,
) -> PoaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let g = &game_ref(game)?.game;
        let s = read_str(json, "json")?;
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| lib_err(Error::from(e)))?;
        let profile = StrategyProfile::from_json_value(g, &v).map_err(lib_err)?;
        out.write(Box::into_raw(Box::new(PoaProfile { profile })));
        Ok(())
    })
}

/// Release a profile handle; null is ignored.
///
/// # Safety
/// `profile` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn poa_profile_free(profile: *mut PoaProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

fn ensure_matches(g: &CongestionGame, p: &StrategyProfile) -> Result<(), (PoaStatus, String)> {
    if p.assignment().len() != g.num_players() || p.congestion().len() != g.num_resources() {
        return Err((
            PoaStatus::InvalidInput,
            "profile was built for a different game".into(),
        ));
    }
    Ok(())
}

/// Social cost `Σ_e x_e f_e(x_e)` of a profile.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn poa_social_cost(
    game: *const PoaGame,
    profile: *const PoaProfile,
    out: *mut f64,
) -> PoaStatus {
    guard(|| {
        let g = &game_ref(game)?.game;
        let p = &profile_ref(profile)?.profile;
        ensure_matches(g, p)?;
        write_out(out, g.social_cost(p), "out")
    })
}

/// Whether a total profile is an ε-approximate pure Nash equilibrium.
/// `worst_ratio` (optional, may be null) receives the largest ratio of a
/// player's current cost to its best deviation cost.
///
/// # Safety
/// Handles must be live; `is_equilibrium` must be writable.
#[no_mangle]
pub unsafe extern "C" fn poa_check_equilibrium(
    game: *const PoaGame,
    profile: *const PoaProfile,
    eps: f64,
    is_equilibrium: *mut bool,
    worst_ratio: *mut f64,
) -> PoaStatus {
    guard(|| {
        let g = &game_ref(game)?.game;
        let p = &profile_ref(profile)?.profile;
        ensure_matches(g, p)?;
        let r = check_equilibrium(g, p, eps).map_err(lib_err)?;
        write_out(is_equilibrium, r.is_equilibrium, "is_equilibrium")?;
        if !worst_ratio.is_null() {
            worst_ratio.write(r.worst_ratio);
        }
        Ok(())
    })
}

/// Price of anarchy of a small game by exhaustive enumeration: the worst
/// ε-equilibrium cost over the optimum. Returns
/// [`PoaStatus::NoEquilibrium`] when no ε-equilibrium exists and
/// [`PoaStatus::CapExceeded`] when the profile space exceeds the default
/// enumeration cap.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn poa_price_of_anarchy_brute(
    game: *const PoaGame,
    eps: f64,
    out: *mut f64,
) -> PoaStatus {
    guard(|| {
        let g = &game_ref(game)?.game;
        match worst_equilibrium(g, eps, &Caps::default()).map_err(lib_err)? {
            WorstEquilibrium::Found { poa, .. } => write_out(out, poa, "out"),
            WorstEquilibrium::NoEquilibrium { .. } => Err((
                PoaStatus::NoEquilibrium,
                format!("no {eps}-approximate pure equilibrium exists"),
            )),
        }
    })
}

/// Class bound γ for polynomial latencies of degree `d`, in weighted
/// (`weighted = true`) or unweighted games, computed under the default caps.
/// `cap_hit` (optional) reports whether the search reached its cap.
///
/// # Safety
/// `out` must be writable; `cap_hit` may be null.
#[no_mangle]
pub unsafe extern "C" fn poa_gamma_bound(
    weighted: bool,
    metric: PoaMetric,
    eps: f64,
    d: usize,
    out: *mut f64,
    cap_hit: *mut bool,
) -> PoaStatus {
    guard(|| {
        let m = Metric::new(metric.into(), eps).map_err(lib_err)?;
        let mode = if weighted { Mode::Weighted } else { Mode::Unweighted };
        let r = gamma_bound(mode, m, &LatencyClass::Polynomial(d), &Caps::default())
            .map_err(lib_err)?;
        write_out(out, r.value, "out")?;
        if !cap_hit.is_null() {
            cap_hit.write(r.cap_hit);
        }
        Ok(())
    })
}

/// The root φ whose power `φ^{d+1}` is the weighted polynomial bound.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn poa_poly_phi(metric: PoaMetric, eps: f64, d: usize, out: *mut f64) -> PoaStatus {
    guard(|| {
        if d == 0 {
            return Err((PoaStatus::InvalidInput, "degree must be >= 1".into()));
        }
        let m = Metric::new(metric.into(), eps).map_err(lib_err)?;
        write_out(out, poly_phi(m, d), "out")
    })
}

/// Price of anarchy of weighted symmetric games on identical resources
/// with latency `t^d`; `lambda` (optional) receives the maximizing λ.
///
/// # Safety
/// `out` must be writable; `lambda` may be null.
#[no_mangle]
pub unsafe extern "C" fn poa_corollary_identical(d: usize, lambda: *mut f64, out: *mut f64) -> PoaStatus {
    guard(|| {
        let (l, v) = corollary_poly_identical(d).map_err(lib_err)?;
        write_out(out, v, "out")?;
        if !lambda.is_null() {
            lambda.write(l);
        }
        Ok(())
    })
}

/// Message describing the last failure on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next call from the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn poa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
