//! In-memory commodity-flow knowledge graph.
//!
//! The store holds region nodes with their hierarchy, the commodity code
//! forest, commodity flows keyed by `(year, level, origin, dest, code)` and the
//! adjacency relation between regions. All collections are ordered maps so that
//! iteration, summation and export happen in a fixed key order.

mod turtle;
mod view;
pub mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::adjacency::AdjacencyIndex;
use crate::model::{CommodityCode, CommodityFlow, FlowValue, Level, RegionNode, STATE_FEATURE_CODE};

pub use turtle::{local_name, turtle_double};
pub use view::{CodeFlows, NetworkView, ViewBuilder, ViewFlow, ViewOptions};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("region {id:?} references unknown parent {parent:?}")]
    DanglingParent { id: String, parent: String },
    #[error("region {id:?}: {reason}")]
    LevelCycle { id: String, reason: String },
    #[error("region {id:?}: feature code {code:?} is only valid on STATE nodes")]
    InvalidFeatureCode { id: String, code: String },
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
    #[error("unknown commodity code {0:?}")]
    UnknownCode(String),
    #[error("commodity code {0:?} is an aggregate; flows must reference leaf codes")]
    NotLeafCode(String),
    #[error("leaf commodity code {code:?} has {found} aggregate ancestors, expected exactly one")]
    AggregateAncestry { code: String, found: usize },
    #[error("commodity code {code:?} references unknown parent {parent:?}")]
    DanglingCodeParent { code: String, parent: String },
    #[error("commodity code hierarchy cycle through {0:?}")]
    CycleDetected(String),
    #[error("commodity code {0:?} is referenced by flows and cannot become an aggregate")]
    CodeInUse(String),
    #[error("duplicate flow {origin}->{dest} code {code} year {year}")]
    DuplicateFlow { origin: String, dest: String, code: String, year: i32 },
    #[error("{field} must be a finite nonnegative number")]
    NegativeValue { field: &'static str },
    #[error("flow {origin}->{dest} connects a {origin_level} to a {dest_level}")]
    LevelMismatch { origin: String, dest: String, origin_level: Level, dest_level: Level },
    #[error("no flows for year {year} at level {level}")]
    EmptySelection { year: i32, level: Level },
    #[error("failed to write export: {0}")]
    SinkWrite(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub year: i32,
    pub level: Level,
    pub origin: String,
    pub dest: String,
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FlowAttrs {
    value: FlowValue,
    avg_mileage: f64,
    weight: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct GraphStore {
    regions: BTreeMap<String, RegionNode>,
    children: BTreeMap<String, BTreeSet<String>>,
    codes: BTreeMap<String, CommodityCode>,
    flows: BTreeMap<FlowKey, FlowAttrs>,
    adjacency: AdjacencyIndex,
}

impl GraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    // ---- regions ----

    /// Inserts a region or updates an existing one in place.
    pub fn upsert_region(&mut self, node: RegionNode) -> Result<(), StoreError> {
        if node.feature_code == STATE_FEATURE_CODE && node.level != Level::State {
            return Err(StoreError::InvalidFeatureCode { id: node.id, code: node.feature_code });
        }
        if let Some(parent_id) = &node.parent_id {
            if parent_id == &node.id {
                return Err(StoreError::LevelCycle {
                    id: node.id.clone(),
                    reason: "region cannot contain itself".into(),
                });
            }
            let parent = self
                .regions
                .get(parent_id)
                .ok_or_else(|| StoreError::DanglingParent { id: node.id.clone(), parent: parent_id.clone() })?;
            match node.level.parent_level() {
                None => {
                    return Err(StoreError::LevelCycle {
                        id: node.id.clone(),
                        reason: "REGION nodes cannot have a parent".into(),
                    })
                }
                Some(expected) if parent.level != expected => {
                    return Err(StoreError::LevelCycle {
                        id: node.id.clone(),
                        reason: format!(
                            "wrong parent level: a {} must be nested in a {}, {:?} is a {}",
                            node.level, expected, parent_id, parent.level
                        ),
                    })
                }
                Some(_) => {}
            }
        }

        if let Some(existing) = self.regions.get(&node.id) {
            if existing.level != node.level {
                let has_children = self.children.get(&node.id).is_some_and(|c| !c.is_empty());
                let has_flows = self.flows.keys().any(|k| k.origin == node.id || k.dest == node.id);
                if has_children || has_flows {
                    return Err(StoreError::LevelCycle {
                        id: node.id.clone(),
                        reason: format!("cannot change level from {} to {}", existing.level, node.level),
                    });
                }
            }
            if let Some(old_parent) = existing.parent_id.clone() {
                if let Some(set) = self.children.get_mut(&old_parent) {
                    set.remove(&node.id);
                }
            }
        }

        if let Some(parent_id) = &node.parent_id {
            self.children.entry(parent_id.clone()).or_default().insert(node.id.clone());
        }
        self.regions.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn region(&self, id: &str) -> Option<&RegionNode> {
        self.regions.get(id)
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionNode> {
        self.regions.values()
    }

    pub fn regions_at(&self, level: Level) -> impl Iterator<Item = &RegionNode> {
        self.regions.values().filter(move |r| r.level == level)
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    /// Direct children of a region, in id order.
    pub fn children(&self, id: &str) -> impl Iterator<Item = &str> {
        self.children.get(id).into_iter().flat_map(|s| s.iter().map(String::as_str))
    }

    /// The enclosing unit of `id` at `level` (the node itself if it is already at that level).
    pub fn ancestor_at(&self, id: &str, level: Level) -> Option<&str> {
        let mut current = self.regions.get(id)?;
        loop {
            if current.level == level {
                return Some(current.id.as_str());
            }
            if current.level > level {
                return None;
            }
            current = self.regions.get(current.parent_id.as_deref()?)?;
        }
    }

    /// Leaf (finest) members of a region, or the region itself when it has no children.
    pub fn members_at(&self, id: &str, level: Level) -> Vec<&str> {
        let Some(node) = self.regions.get(id) else { return Vec::new() };
        if node.level == level {
            return vec![node.id.as_str()];
        }
        if node.level < level {
            return Vec::new();
        }
        self.children(id).flat_map(|child| self.members_at(child, level)).collect()
    }

    // ---- commodity codes ----

    pub fn upsert_code(&mut self, code: CommodityCode) -> Result<(), StoreError> {
        if let Some(parent) = &code.parent {
            if parent == &code.code {
                return Err(StoreError::CycleDetected(code.code));
            }
            if !self.codes.contains_key(parent) {
                return Err(StoreError::DanglingCodeParent { code: code.code, parent: parent.clone() });
            }
            let mut cursor = Some(parent.as_str());
            let mut steps = 0usize;
            while let Some(c) = cursor {
                if c == code.code || steps > self.codes.len() {
                    return Err(StoreError::CycleDetected(code.code));
                }
                cursor = self.codes.get(c).and_then(|cc| cc.parent.as_deref());
                steps += 1;
            }
        }
        if code.is_aggregate && self.flows.keys().any(|k| k.code == code.code) {
            return Err(StoreError::CodeInUse(code.code));
        }
        self.codes.insert(code.code.clone(), code);
        Ok(())
    }

    pub fn code(&self, code: &str) -> Option<&CommodityCode> {
        self.codes.get(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &CommodityCode> {
        self.codes.values()
    }

    pub fn code_count(&self) -> usize {
        self.codes.len()
    }

    fn aggregate_ancestors(&self, code: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cursor = self.codes.get(code).and_then(|c| c.parent.as_deref());
        let mut steps = 0usize;
        while let Some(c) = cursor {
            let Some(entry) = self.codes.get(c) else { break };
            if entry.is_aggregate {
                out.push(entry.code.as_str());
            }
            cursor = entry.parent.as_deref();
            steps += 1;
            if steps > self.codes.len() {
                break;
            }
        }
        out
    }

    /// The aggregate a leaf code is grouped under, when the leaf has exactly one.
    pub fn aggregate_of(&self, code: &str) -> Option<&str> {
        match self.aggregate_ancestors(code).as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }

    /// Checks that every leaf code has exactly one aggregate ancestor.
    pub fn validate_codes(&self) -> Result<(), StoreError> {
        for code in self.codes.values().filter(|c| !c.is_aggregate) {
            let found = self.aggregate_ancestors(&code.code).len();
            if found != 1 {
                return Err(StoreError::AggregateAncestry { code: code.code.clone(), found });
            }
        }
        Ok(())
    }

    // ---- flows ----

    pub fn add_flow(&mut self, flow: CommodityFlow) -> Result<(), StoreError> {
        if flow.value.is_negative() {
            return Err(StoreError::NegativeValue { field: "value" });
        }
        if !(flow.avg_mileage.is_finite() && flow.avg_mileage >= 0.0) {
            return Err(StoreError::NegativeValue { field: "avg_mileage" });
        }
        if let Some(w) = flow.weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(StoreError::NegativeValue { field: "weight" });
            }
        }
        let origin = self.regions.get(&flow.origin).ok_or_else(|| StoreError::UnknownRegion(flow.origin.clone()))?;
        let dest = self.regions.get(&flow.dest).ok_or_else(|| StoreError::UnknownRegion(flow.dest.clone()))?;
        if origin.level != dest.level {
            return Err(StoreError::LevelMismatch {
                origin: flow.origin.clone(),
                dest: flow.dest.clone(),
                origin_level: origin.level,
                dest_level: dest.level,
            });
        }
        let level = origin.level;
        let code = self.codes.get(&flow.code).ok_or_else(|| StoreError::UnknownCode(flow.code.clone()))?;
        if code.is_aggregate {
            return Err(StoreError::NotLeafCode(flow.code.clone()));
        }
        let found = self.aggregate_ancestors(&flow.code).len();
        if found != 1 {
            return Err(StoreError::AggregateAncestry { code: flow.code.clone(), found });
        }

        let key = FlowKey { year: flow.year, level, origin: flow.origin, dest: flow.dest, code: flow.code };
        if self.flows.contains_key(&key) {
            return Err(StoreError::DuplicateFlow {
                origin: key.origin,
                dest: key.dest,
                code: key.code,
                year: key.year,
            });
        }
        self.flows.insert(key, FlowAttrs { value: flow.value, avg_mileage: flow.avg_mileage, weight: flow.weight });
        Ok(())
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    /// Looks up a stored flow by its key.
    pub fn flow(&self, key: &FlowKey) -> Option<CommodityFlow> {
        self.flows.get(key).map(|attrs| to_flow(key, attrs))
    }

    /// All flows in key order.
    pub fn flows(&self) -> impl Iterator<Item = (FlowKey, CommodityFlow)> + '_ {
        self.flows.iter().map(|(k, a)| (k.clone(), to_flow(k, a)))
    }

    /// Flows for one year at one level, in key order.
    pub fn flows_at(&self, year: i32, level: Level) -> impl Iterator<Item = CommodityFlow> + '_ {
        let start = FlowKey { year, level, origin: String::new(), dest: String::new(), code: String::new() };
        self.flows
            .range(start..)
            .take_while(move |(k, _)| k.year == year && k.level == level)
            .map(|(k, a)| to_flow(k, a))
    }

    /// Exact total value of the flows for one year at one level.
    pub fn total_value(&self, year: i32, level: Level) -> FlowValue {
        self.flows_at(year, level).map(|f| f.value).sum()
    }

    /// Distinct years present in the store, ascending.
    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.flows.keys().map(|k| k.year).collect();
        set.into_iter().collect()
    }

    // ---- adjacency ----

    pub fn adjacency(&self) -> &AdjacencyIndex {
        &self.adjacency
    }

    /// Replaces the adjacency relation. Pairs naming unknown regions are rejected.
    pub fn set_adjacency(&mut self, index: AdjacencyIndex) -> Result<(), StoreError> {
        for (a, b) in index.pairs() {
            for id in [a, b] {
                if !self.regions.contains_key(id) {
                    return Err(StoreError::UnknownRegion(id.to_string()));
                }
            }
        }
        self.adjacency = index;
        Ok(())
    }

    /// Adds adjacency pairs to the existing relation.
    pub fn extend_adjacency(&mut self, index: &AdjacencyIndex) -> Result<(), StoreError> {
        let mut merged = self.adjacency.clone();
        merged.extend(index);
        self.set_adjacency(merged)
    }

    // ---- views and export ----

    pub fn snapshot_view(
        &self,
        year: i32,
        level: Level,
        direction: crate::model::Direction,
    ) -> Result<NetworkView, StoreError> {
        self.snapshot_view_with(year, level, direction, ViewOptions::default())
    }

    pub fn snapshot_view_with(
        &self,
        year: i32,
        level: Level,
        direction: crate::model::Direction,
        options: ViewOptions,
    ) -> Result<NetworkView, StoreError> {
        view::snapshot(self, year, level, direction, options)
    }

    /// Writes the whole store as deterministic Turtle.
    pub fn export_turtle<W: Write + ?Sized>(&self, sink: &mut W) -> Result<(), StoreError> {
        turtle::write_store(self, sink)
    }

    pub fn to_turtle_string(&self) -> String {
        let mut buf = Vec::new();
        self.export_turtle(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("turtle output is UTF-8")
    }
}

fn to_flow(key: &FlowKey, attrs: &FlowAttrs) -> CommodityFlow {
    CommodityFlow {
        origin: key.origin.clone(),
        dest: key.dest.clone(),
        code: key.code.clone(),
        year: key.year,
        value: attrs.value,
        avg_mileage: attrs.avg_mileage,
        weight: attrs.weight,
    }
}
