//! Domain entities of the commodity-flow knowledge graph.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Geographic level of a region node, ordered from finest to coarsest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    State,
    Division,
    Region,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::State, Level::Division, Level::Region];

    /// The level a node of this level must be nested in, if any.
    pub fn parent_level(self) -> Option<Level> {
        match self {
            Level::State => Some(Level::Division),
            Level::Division => Some(Level::Region),
            Level::Region => None,
        }
    }

    pub fn is_coarser_than(self, other: Level) -> bool {
        self > other
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::State => "STATE",
            Level::Division => "DIVISION",
            Level::Region => "REGION",
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Level::State => "state",
            Level::Division => "division",
            Level::Region => "region",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} {token:?}")]
pub struct TokenError {
    pub kind: &'static str,
    pub token: String,
}

impl FromStr for Level {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "STATE" => Ok(Level::State),
            "DIVISION" => Ok(Level::Division),
            "REGION" => Ok(Level::Region),
            _ => Err(TokenError { kind: "level", token: s.to_string() }),
        }
    }
}

/// Which side of a node's flows is analysed: in-flows (import) or out-flows (export).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Import,
    Export,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Import => "import",
            Direction::Export => "export",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "import" | "in" => Ok(Direction::Import),
            "export" | "out" => Ok(Direction::Export),
            _ => Err(TokenError { kind: "direction", token: s.to_string() }),
        }
    }
}

/// GeoNames feature code carried by first-order administrative divisions.
pub const STATE_FEATURE_CODE: &str = "ADM1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionNode {
    pub id: String,
    pub name: String,
    pub level: Level,
    pub parent_id: Option<String>,
    pub feature_code: String,
    /// Key of this node's geometry in the workspace geometry layer.
    pub geometry_ref: Option<String>,
}

impl RegionNode {
    pub fn new(id: impl Into<String>, name: impl Into<String>, level: Level) -> Self {
        RegionNode {
            id: id.into(),
            name: name.into(),
            level,
            parent_id: None,
            feature_code: String::new(),
            geometry_ref: None,
        }
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent_id = Some(parent.into());
        self
    }

    pub fn with_feature_code(mut self, code: impl Into<String>) -> Self {
        self.feature_code = code.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommodityCode {
    pub code: String,
    pub description: String,
    pub parent: Option<String>,
    pub is_aggregate: bool,
    /// Optional link to an external food ontology class.
    pub external_class_iri: Option<String>,
}

impl CommodityCode {
    pub fn aggregate(code: impl Into<String>, description: impl Into<String>) -> Self {
        CommodityCode {
            code: code.into(),
            description: description.into(),
            parent: None,
            is_aggregate: true,
            external_class_iri: None,
        }
    }

    pub fn leaf(code: impl Into<String>, description: impl Into<String>, parent: impl Into<String>) -> Self {
        CommodityCode {
            code: code.into(),
            description: description.into(),
            parent: Some(parent.into()),
            is_aggregate: false,
            external_class_iri: None,
        }
    }
}

/// Zero-pads purely numeric commodity codes to two characters ("1" -> "01").
pub fn normalize_code(raw: &str) -> String {
    let trimmed = raw.trim();
    if !trimmed.is_empty() && trimmed.len() < 2 && trimmed.bytes().all(|b| b.is_ascii_digit()) {
        format!("{trimmed:0>2}")
    } else {
        trimmed.to_string()
    }
}

/// Monetary value of a flow held as a whole number of dollars.
///
/// Flow values are read and reported in millions of dollars. Holding them as
/// integers makes every aggregation exact and independent of summation order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowValue(i64);

const DOLLARS_PER_MILLION: f64 = 1_000_000.0;

impl FlowValue {
    pub const ZERO: FlowValue = FlowValue(0);

    pub fn from_dollars(dollars: i64) -> Self {
        FlowValue(dollars)
    }

    /// Converts a value in millions of dollars, rounding to the nearest dollar.
    /// Returns `None` for NaN, infinities, or magnitudes outside the `i64` range.
    pub fn from_millions(millions: f64) -> Option<Self> {
        if !millions.is_finite() {
            return None;
        }
        let dollars = (millions * DOLLARS_PER_MILLION).round();
        if dollars.abs() >= 9.0e18 {
            return None;
        }
        Some(FlowValue(dollars as i64))
    }

    pub fn dollars(self) -> i64 {
        self.0
    }

    pub fn millions(self) -> f64 {
        self.0 as f64 / DOLLARS_PER_MILLION
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, other: FlowValue) -> Option<FlowValue> {
        self.0.checked_add(other.0).map(FlowValue)
    }
}

impl std::iter::Sum for FlowValue {
    fn sum<I: Iterator<Item = FlowValue>>(iter: I) -> Self {
        FlowValue(iter.map(|v| v.0).sum())
    }
}

impl<'a> std::iter::Sum<&'a FlowValue> for FlowValue {
    fn sum<I: Iterator<Item = &'a FlowValue>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

impl fmt::Display for FlowValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.millions())
    }
}

/// One origin -> destination shipment aggregate for a single leaf commodity and year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityFlow {
    pub origin: String,
    pub dest: String,
    pub code: String,
    pub year: i32,
    pub value: FlowValue,
    /// Average transport mileage, in miles.
    pub avg_mileage: f64,
    /// Shipped weight; carried through but not used by the metrics.
    pub weight: Option<f64>,
}

impl CommodityFlow {
    /// Convenience constructor taking the value in millions of dollars.
    pub fn new(
        origin: impl Into<String>,
        dest: impl Into<String>,
        code: impl Into<String>,
        year: i32,
        value_musd: f64,
        avg_mileage: f64,
    ) -> Self {
        CommodityFlow {
            origin: origin.into(),
            dest: dest.into(),
            code: code.into(),
            year,
            // Out-of-range inputs become a sentinel that add_flow rejects.
            value: FlowValue::from_millions(value_musd).unwrap_or(FlowValue(i64::MIN)),
            avg_mileage,
            weight: None,
        }
    }

    pub fn is_self_flow(&self) -> bool {
        self.origin == self.dest
    }
}
