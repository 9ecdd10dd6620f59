use std::collections::BTreeMap;

use serde::Serialize;

use super::{GraphStore, StoreError};
use crate::model::{Direction, FlowValue, Level};

/// One flow as seen from its focal node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewFlow {
    pub partner: String,
    /// Value in millions of dollars.
    pub value: f64,
    pub avg_mileage: f64,
}

/// The flows of one focal node for one leaf code, sorted by partner id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeFlows {
    pub code: String,
    pub aggregate: String,
    pub flows: Vec<ViewFlow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewOptions {
    pub include_self_flows: bool,
}

impl Default for ViewOptions {
    fn default() -> Self {
        ViewOptions { include_self_flows: true }
    }
}

/// Immutable snapshot of one year's flows at one level, grouped by focal node
/// (origin for exports, destination for imports) and leaf code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkView {
    year: i32,
    level: Level,
    direction: Direction,
    nodes: BTreeMap<String, Vec<CodeFlows>>,
    flow_count: usize,
    total_value: FlowValue,
}

impl NetworkView {
    pub fn builder(year: i32, level: Level, direction: Direction) -> ViewBuilder {
        ViewBuilder { year, level, direction, entries: BTreeMap::new(), duplicate: None }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn flow_count(&self) -> usize {
        self.flow_count
    }

    /// Exact total of the stored values behind this view.
    pub fn total_value(&self) -> FlowValue {
        self.total_value
    }

    /// Focal node ids, ascending.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_codes(&self, node: &str) -> Option<&[CodeFlows]> {
        self.nodes.get(node).map(Vec::as_slice)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, &[CodeFlows])> {
        self.nodes.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// A copy of this view with every flow value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NetworkView {
        let mut out = self.clone();
        for codes in out.nodes.values_mut() {
            for code in codes {
                for flow in &mut code.flows {
                    flow.value *= factor;
                }
            }
        }
        out.total_value = FlowValue::from_millions(self.total_value.millions() * factor).unwrap_or(FlowValue::ZERO);
        out
    }
}

type EntryKey = (String, String, String);

/// Assembles a view directly from flows, bypassing a store.
#[derive(Debug, Clone)]
pub struct ViewBuilder {
    year: i32,
    level: Level,
    direction: Direction,
    // (focal, code, partner) -> (aggregate, value, atm)
    entries: BTreeMap<EntryKey, (String, f64, f64)>,
    duplicate: Option<EntryKey>,
}

impl ViewBuilder {
    pub fn flow(
        mut self,
        focal: &str,
        partner: &str,
        code: &str,
        aggregate: &str,
        value_musd: f64,
        avg_mileage: f64,
    ) -> Self {
        self.push(focal, partner, code, aggregate, value_musd, avg_mileage);
        self
    }

    pub fn push(&mut self, focal: &str, partner: &str, code: &str, aggregate: &str, value_musd: f64, avg_mileage: f64) {
        let key = (focal.to_string(), code.to_string(), partner.to_string());
        if self.entries.contains_key(&key) && self.duplicate.is_none() {
            self.duplicate = Some(key.clone());
        }
        self.entries.insert(key, (aggregate.to_string(), value_musd, avg_mileage));
    }

    pub fn build(self) -> Result<NetworkView, StoreError> {
        if let Some((focal, code, partner)) = self.duplicate {
            let (origin, dest) = match self.direction {
                Direction::Export => (focal, partner),
                Direction::Import => (partner, focal),
            };
            return Err(StoreError::DuplicateFlow { origin, dest, code, year: self.year });
        }
        if self.entries.is_empty() {
            return Err(StoreError::EmptySelection { year: self.year, level: self.level });
        }
        let flow_count = self.entries.len();
        let mut total = FlowValue::ZERO;
        let mut nodes: BTreeMap<String, Vec<CodeFlows>> = BTreeMap::new();
        for ((focal, code, partner), (aggregate, value, atm)) in self.entries {
            total = total.checked_add(FlowValue::from_millions(value).unwrap_or(FlowValue::ZERO)).unwrap_or(total);
            let codes = nodes.entry(focal).or_default();
            if codes.last().map(|c| c.code != code).unwrap_or(true) {
                codes.push(CodeFlows { code, aggregate, flows: Vec::new() });
            }
            let slot = codes.last_mut().expect("pushed above");
            slot.flows.push(ViewFlow { partner, value, avg_mileage: atm });
        }
        Ok(NetworkView {
            year: self.year,
            level: self.level,
            direction: self.direction,
            nodes,
            flow_count,
            total_value: total,
        })
    }
}

pub(super) fn snapshot(
    store: &GraphStore,
    year: i32,
    level: Level,
    direction: Direction,
    options: ViewOptions,
) -> Result<NetworkView, StoreError> {
    let mut builder = NetworkView::builder(year, level, direction);
    let mut total = FlowValue::ZERO;
    for flow in store.flows_at(year, level) {
        if !options.include_self_flows && flow.is_self_flow() {
            continue;
        }
        let aggregate = store
            .aggregate_of(&flow.code)
            .ok_or_else(|| StoreError::AggregateAncestry { code: flow.code.clone(), found: 0 })?;
        let (focal, partner) = match direction {
            Direction::Export => (&flow.origin, &flow.dest),
            Direction::Import => (&flow.dest, &flow.origin),
        };
        total = FlowValue::from_dollars(total.dollars() + flow.value.dollars());
        builder.push(focal, partner, &flow.code, aggregate, flow.value.millions(), flow.avg_mileage);
    }
    let mut view = builder.build()?;
    view.total_value = total;
    Ok(view)
}
