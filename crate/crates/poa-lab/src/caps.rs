//! Size and search caps shared by enumeration, generators and grid searches.
//!
//! Defaults can be overridden through the `POA_LAB_CAPS` environment
//! variable, a comma-separated list of `key=value` pairs, e.g.
//! `POA_LAB_CAPS="enum=1e6,players=2e6"`. Recognised keys:
//!
//! | key       | meaning                                               | default |
//! |-----------|-------------------------------------------------------|---------|
//! | `enum`    | profiles enumerated by brute force                    | 1e7     |
//! | `orders`  | arrival orders enumerated for small-instance CR       | 5040    |
//! | `players` | players (edges) materialised by a generator           | 4e6     |
//! | `kcap`    | integer congestion cap of unweighted grid searches    | 1e4     |
//! | `ocap`    | integer optimum-congestion cap of unweighted searches | 1e3     |
//! | `xmax`    | upper end of the x bracket of bound searches          | 1e6     |
//! | `e0`      | resources materialised by the identical walk family   | 1e6     |

use crate::error::{Error, Result};

/// Environment variable holding cap overrides.
pub const CAPS_ENV: &str = "POA_LAB_CAPS";

/// Caps in effect for one computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Caps {
    pub enum_profiles: f64,
    pub orders: f64,
    pub players: f64,
    pub k_cap: u64,
    pub o_cap: u64,
    pub x_max: f64,
    pub e0: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enum_profiles: 1e7,
            orders: 5040.0,
            players: 4e6,
            k_cap: 10_000,
            o_cap: 1_000,
            x_max: 1e6,
            e0: 1e6,
        }
    }
}

impl Caps {
    /// Defaults overridden by `POA_LAB_CAPS`, if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(CAPS_ENV) {
            Ok(s) => Self::parse(&s),
            Err(_) => Ok(Self::default()),
        }
    }

    /// Defaults overridden by a `key=value,...` string.
    pub fn parse(s: &str) -> Result<Self> {
        let mut caps = Self::default();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("cap `{item}` is not key=value")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("cap `{key}` has non-numeric value")))?;
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::InvalidInput(format!("cap `{key}` must be >= 1")));
            }
            match key.trim() {
                "enum" => caps.enum_profiles = v,
                "orders" => caps.orders = v,
                "players" => caps.players = v,
                "kcap" => caps.k_cap = v as u64,
                "ocap" => caps.o_cap = v as u64,
                "xmax" => caps.x_max = v,
                "e0" => caps.e0 = v,
                other => return Err(Error::InvalidInput(format!("unknown cap `{other}`"))),
            }
        }
        Ok(caps)
    }

    pub(crate) fn check(what: &'static str, needed: f64, cap: f64) -> Result<()> {
        if needed > cap {
            Err(Error::CapExceeded { what, needed, cap })
        } else {
            Ok(())
        }
    }
}
