//! Reproduction of the reference tables of bound values for polynomial
//! latency functions of degree `d = 1..=8` (ε = 0), with printed-precision
//! matching against the published cells.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    corollary_poly_identical, gamma_bound, identical_bound, poly_gamma_weighted,
    unweighted_closed_form, LatencyClass, Metric, MetricKind, Mode,
};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::latency::LatencyFunction;

/// Highest degree covered by the tables.
pub const MAX_DEGREE: usize = 8;

/// Largest relative disagreement tolerated between the closed-form and
/// the numerically optimized identical-resources values.
pub const IDENTICAL_AGREEMENT: f64 = 1e-6;

/// Which table to reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableId {
    /// Weighted games: PoA, CR^s, CR^c.
    Weighted,
    /// Unweighted games: PoA, CR^s, CR^c.
    Unweighted,
    /// Weighted symmetric games on identical resources vs general.
    Identical,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::Weighted, TableId::Unweighted, TableId::Identical];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Weighted => "weighted",
            TableId::Unweighted => "unweighted",
            TableId::Identical => "identical",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TableId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown table `{s}`")))
    }
}

const WEIGHTED: [[&str; 3]; MAX_DEGREE] = [
    ["2.618", "7.464", "5.828"],
    ["9.909", "90.3", "56.94"],
    ["47.82", "1,521", "780.2"],
    ["277", "32,896", "13,755"],
    ["1,858", "868,567", "296,476"],
    ["14,099", "27,089,557", "7,553,550"],
    ["118,926", "974,588,649", "222,082,591"],
    ["1,101,126", "39,729,739,895", "7,400,694,480"],
];

const UNWEIGHTED: [[&str; 3]; MAX_DEGREE] = [
    ["2.5", "4.236", "5.66"],
    ["9.583", "37.58", "55.46"],
    ["41.54", "527.3", "755.2"],
    ["267.6", "9,387", "13,170"],
    ["1,514", "201,401", "289,648"],
    ["12,345", "5,276,150", "7,174,495"],
    ["98,734", "151,192,413", "220,349,064"],
    ["802,603", "5,287,749,084", "7,022,463,077"],
];

const IDENTICAL: [&str; MAX_DEGREE] = [
    "1.125", "1.412", "1.946", "2.895", "4.571", "7.544", "12.866", "22.478",
];

/// One reproduced cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub d: usize,
    /// Column label, e.g. `poa`, `crs`, `crc`, `identical`, `general`.
    pub column: &'static str,
    pub value: f64,
    /// The published value as printed.
    pub printed: &'static str,
    /// Whether `value` matches `printed` at printed precision.
    pub matched: bool,
    /// Upper estimate, for cells whose value is a lower bound only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    /// Free-form qualifier, e.g. `lower-bound` or `cap-hit`.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// A reproduced table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub id: TableId,
    pub cells: Vec<Cell>,
}

impl Table {
    /// Whether every cell matched.
    pub fn all_match(&self) -> bool {
        self.cells.iter().all(|c| c.matched)
    }

    /// Cells that did not match.
    pub fn mismatches(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| !c.matched)
    }

    /// CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,d,column,value,printed,match,upper,note\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},\"{}\",{},{},{}\n",
                self.id,
                c.d,
                c.column,
                format_value(c.value),
                c.printed,
                c.matched,
                c.upper.map(format_value).unwrap_or_default(),
                c.note
            ));
        }
        out
    }
}

fn format_value(v: f64) -> String {
    if v.abs() >= 1e3 {
        format!("{v:.3}")
    } else {
        format!("{v:.6}")
    }
}

/// Whether `value` equals the printed number at its printed precision,
/// after either rounding or truncation (thousands separators ignored).
pub fn matches_printed(value: f64, printed: &str) -> bool {
    let digits: String = printed.chars().filter(|c| *c != ',').collect();
    let decimals = digits.split_once('.').map_or(0, |(_, frac)| frac.len());
    let Ok(target) = digits.replace('.', "").parse::<i128>() else {
        return false;
    };
    let scaled = value * 10f64.powi(decimals as i32);
    scaled.round() as i128 == target || scaled.floor() as i128 == target
}

fn cell(d: usize, column: &'static str, value: f64, printed: &'static str) -> Cell {
    Cell {
        d,
        column,
        value,
        printed,
        matched: matches_printed(value, printed),
        upper: None,
        note: String::new(),
    }
}

const METRICS: [MetricKind; 3] = [MetricKind::PoA, MetricKind::CrSelfish, MetricKind::CrCooperative];

fn weighted_table() -> Table {
    let cells = (1..=MAX_DEGREE)
        .flat_map(|d| {
            METRICS.iter().enumerate().map(move |(j, &kind)| {
                let v = poly_gamma_weighted(Metric::exact(kind), d);
                cell(d, kind.short_name(), v, WEIGHTED[d - 1][j])
            })
        })
        .collect();
    Table {
        id: TableId::Weighted,
        cells,
    }
}

/// Degrees for which the selfish unweighted column is a tight grid value;
/// above, the published cells are lower bounds.
pub const UNWEIGHTED_SELFISH_TIGHT_UP_TO: usize = 3;

fn unweighted_cell(d: usize, j: usize, kind: MetricKind, caps: &Caps) -> Result<Cell> {
    let metric = Metric::exact(kind);
    let printed = UNWEIGHTED[d - 1][j];
    if kind == MetricKind::CrSelfish && d <= UNWEIGHTED_SELFISH_TIGHT_UP_TO {
        let r = gamma_bound(Mode::Unweighted, metric, &LatencyClass::Polynomial(d), caps)?;
        let mut c = cell(d, kind.short_name(), r.value, printed);
        if r.cap_hit {
            c.note = "cap-hit".into();
        }
        return Ok(c);
    }
    let cf = unweighted_closed_form(metric, d, caps)?;
    let mut c = cell(d, kind.short_name(), cf.value, printed);
    if kind == MetricKind::CrSelfish {
        // Unweighted games are weighted games with unit weights, so the
        // weighted bound is an upper estimate.
        c.upper = Some(poly_gamma_weighted(metric, d));
        c.note = "lower-bound".into();
    }
    Ok(c)
}

fn unweighted_table(caps: &Caps) -> Result<Table> {
    let jobs: Vec<(usize, usize, MetricKind)> = (1..=MAX_DEGREE)
        .flat_map(|d| METRICS.iter().enumerate().map(move |(j, &k)| (d, j, k)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(d, j, k)| unweighted_cell(d, j, k, caps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        id: TableId::Unweighted,
        cells,
    })
}

fn identical_table() -> Result<Table> {
    let rows = (1..=MAX_DEGREE)
        .into_par_iter()
        .map(|d| -> Result<Vec<Cell>> {
            let (_, closed) = corollary_poly_identical(d)?;
            let searched = identical_bound(0.0, &LatencyFunction::monomial(d))?.value;
            let mut c = cell(d, "identical", closed, IDENTICAL[d - 1]);
            let gap = (closed - searched).abs() / closed;
            if gap > IDENTICAL_AGREEMENT {
                c.matched = false;
                c.note = format!("search-disagrees:{searched}");
            }
            let mut s = cell(d, "identical-search", searched, IDENTICAL[d - 1]);
            s.note = format!("rel-gap:{gap:.1e}");
            let g = poly_gamma_weighted(Metric::exact(MetricKind::PoA), d);
            Ok(vec![c, s, cell(d, "general", g, WEIGHTED[d - 1][0])])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        id: TableId::Identical,
        cells: rows.into_iter().flatten().collect(),
    })
}

/// Reproduce a table.
pub fn reproduce(id: TableId, caps: &Caps) -> Result<Table> {
    match id {
        TableId::Weighted => Ok(weighted_table()),
        TableId::Unweighted => unweighted_table(caps),
        TableId::Identical => identical_table(),
    }
}
