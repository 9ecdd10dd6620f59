//! Node- and network-level resilience metrics.
//!
//! The computation runs bottom-up for every focal node of a [`NetworkView`]:
//!
//! 1. each flow value is adjusted for transport mileage and geographic adjacency,
//! 2. per leaf code, the dependence on single partners is `2^-H` of the share distribution,
//! 3. per aggregate code, the same measure over the dependence-weighted leaf values,
//! 4. per node, the same measure over the aggregates, combined into the resilience
//!    `R = 1 - D * (sum of aggregate values) / (total adjusted value)`.
//!
//! Influence is a node's share of `R * V'` over the view, and the network
//! resilience of a direction is one minus the largest influence.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::adjacency::AdjacencyIndex;
use crate::model::{Direction, Level, TokenError};
use crate::store::NetworkView;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("every value is zero")]
    AllZero,
    #[error("node {0:?} has no positive-value flows in this view")]
    NoFlows(String),
    #[error("every node has zero resilience-weighted value; influence is undefined")]
    DegenerateNetwork,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Rule for the mileage factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AtmMode {
    /// `sqrt(ATM)`, or 1 for hauls shorter than one mile.
    Sqrt,
    /// Always 1.
    Unity,
}

impl AtmMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AtmMode::Sqrt => "sqrt",
            AtmMode::Unity => "unity",
        }
    }
}

impl fmt::Display for AtmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AtmMode {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqrt" => Ok(AtmMode::Sqrt),
            "unity" => Ok(AtmMode::Unity),
            _ => Err(TokenError { kind: "atm mode", token: s.to_string() }),
        }
    }
}

/// Whether a self-flow (origin == destination) is treated as an adjacent pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfFlowBeta {
    Adjacent,
    NonAdjacent,
}

impl FromStr for SelfFlowBeta {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adjacent" => Ok(SelfFlowBeta::Adjacent),
            "nonadjacent" | "non-adjacent" => Ok(SelfFlowBeta::NonAdjacent),
            _ => Err(TokenError { kind: "self-flow beta", token: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResilienceParams {
    pub atm_mode: AtmMode,
    /// Value multiplier for geographically adjacent partners, in (0, 1].
    pub ga_factor: f64,
    pub self_flow_beta: SelfFlowBeta,
    /// Selects which view the query layer evaluates; node-level functions use
    /// the direction of the view they are given.
    pub direction: Direction,
    pub include_self_flows: bool,
}

impl Default for ResilienceParams {
    fn default() -> Self {
        ResilienceParams {
            atm_mode: AtmMode::Sqrt,
            ga_factor: 0.9,
            self_flow_beta: SelfFlowBeta::Adjacent,
            direction: Direction::Export,
            include_self_flows: true,
        }
    }
}

impl ResilienceParams {
    /// Parameters under which the adjusted value equals the raw value.
    pub fn neutral() -> Self {
        ResilienceParams { atm_mode: AtmMode::Unity, ga_factor: 1.0, ..Self::default() }
    }

    pub fn with_direction(self, direction: Direction) -> Self {
        ResilienceParams { direction, ..self }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.ga_factor > 0.0 && self.ga_factor <= 1.0) {
            return Err(MetricsError::InvalidParams(format!("ga factor must lie in (0, 1], got {}", self.ga_factor)));
        }
        Ok(())
    }
}

/// Mileage factor of a flow.
pub fn mileage_factor(avg_mileage: f64, mode: AtmMode) -> f64 {
    match mode {
        AtmMode::Unity => 1.0,
        AtmMode::Sqrt if avg_mileage < 1.0 => 1.0,
        AtmMode::Sqrt => avg_mileage.sqrt(),
    }
}

/// Flow value combined with its mileage and adjacency factors.
pub fn adjusted_value(value: f64, avg_mileage: f64, adjacent: bool, params: &ResilienceParams) -> f64 {
    let beta = if adjacent { params.ga_factor } else { 1.0 };
    value * mileage_factor(avg_mileage, params.atm_mode) * beta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dependence {
    pub entropy_bits: f64,
    /// `2^-H`: 1 for a single partner, `1/n` for `n` equal partners.
    pub dependence: f64,
}

/// Shannon entropy (bits) of the share distribution of `values` and the matching dependence.
/// Zero values contribute nothing.
pub fn partner_dependence(values: &[f64]) -> Result<Dependence, MetricsError> {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::AllZero);
    }
    let mut acc = 0.0;
    for &v in values {
        if v > 0.0 {
            let p = v / total;
            acc += p * p.log2();
        }
    }
    let entropy_bits = -acc + 0.0;
    Ok(Dependence { entropy_bits, dependence: (-entropy_bits).exp2() })
}

/// Combines `(dependence, adjusted flow total)` of the leaf codes under one aggregate into the
/// aggregate's dependence and its dependence-weighted value.
pub fn aggregate_dependence(leaves: &[(f64, f64)]) -> Result<(f64, f64), MetricsError> {
    let weighted: Vec<f64> = leaves.iter().map(|&(d, total)| d * total).collect();
    let dep = partner_dependence(&weighted)?;
    let sum: f64 = weighted.iter().sum();
    Ok((dep.dependence, dep.dependence * sum))
}

fn share(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        part / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowContribution {
    pub partner: String,
    pub value: f64,
    pub adjusted_value: f64,
    /// Share of the code's adjusted flow total.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeDependence {
    pub code: String,
    pub aggregate: String,
    pub entropy_bits: f64,
    pub dependence: f64,
    /// Sum of the adjusted flow values for this code.
    pub flow_total: f64,
    /// `dependence * flow_total`.
    pub adjusted_value: f64,
    /// Share of `adjusted_value` within the aggregate.
    pub share: f64,
    pub flows: Vec<FlowContribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateDependence {
    pub aggregate: String,
    pub dependence: f64,
    /// Sum of the leaf codes' adjusted values.
    pub leaf_total: f64,
    /// `dependence * leaf_total`.
    pub adjusted_value: f64,
    /// Share of `adjusted_value` across the node's aggregates.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceBreakdown {
    pub codes: Vec<CodeDependence>,
    pub aggregates: Vec<AggregateDependence>,
    pub node_dependence: f64,
    pub total_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeResilienceReport {
    pub node: String,
    pub resilience: f64,
    pub total_adjusted: f64,
    /// Filled in when the node is evaluated as part of a whole view.
    pub influence: Option<f64>,
    pub breakdown: DependenceBreakdown,
}

/// Adjusted flows of one leaf code, the input of [`resilience_from_adjusted`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedCode {
    pub code: String,
    pub aggregate: String,
    /// `(partner, raw value, adjusted value)` in partner order.
    pub flows: Vec<(String, f64, f64)>,
}

/// Adjusts the flows of `node` in `view` for mileage and adjacency.
pub fn adjust_node_flows(
    view: &NetworkView,
    node: &str,
    adjacency: &AdjacencyIndex,
    params: &ResilienceParams,
) -> Option<Vec<AdjustedCode>> {
    let codes = view.node_codes(node)?;
    Some(
        codes
            .iter()
            .map(|code| AdjustedCode {
                code: code.code.clone(),
                aggregate: code.aggregate.clone(),
                flows: code
                    .flows
                    .iter()
                    .filter(|f| params.include_self_flows || f.partner != node)
                    .map(|f| {
                        let adjacent = if f.partner == node {
                            params.self_flow_beta == SelfFlowBeta::Adjacent
                        } else {
                            adjacency.is_adjacent(node, &f.partner)
                        };
                        let adjusted = adjusted_value(f.value, f.avg_mileage, adjacent, params);
                        (f.partner.clone(), f.value, adjusted)
                    })
                    .collect(),
            })
            .collect(),
    )
}

/// Resilience of one node from already adjusted flows.
pub fn resilience_from_adjusted(node: &str, codes: &[AdjustedCode]) -> Result<NodeResilienceReport, MetricsError> {
    let mut by_aggregate: BTreeMap<&str, Vec<CodeDependence>> = BTreeMap::new();
    for code in codes {
        let adjusted: Vec<f64> = code.flows.iter().map(|f| f.2).collect();
        let dep = match partner_dependence(&adjusted) {
            Ok(dep) => dep,
            Err(MetricsError::AllZero) => continue,
            Err(e) => return Err(e),
        };
        let flow_total: f64 = adjusted.iter().sum();
        let flows = code
            .flows
            .iter()
            .map(|(partner, value, adj)| FlowContribution {
                partner: partner.clone(),
                value: *value,
                adjusted_value: *adj,
                share: share(*adj, flow_total),
            })
            .collect();
        by_aggregate.entry(code.aggregate.as_str()).or_default().push(CodeDependence {
            code: code.code.clone(),
            aggregate: code.aggregate.clone(),
            entropy_bits: dep.entropy_bits,
            dependence: dep.dependence,
            flow_total,
            adjusted_value: dep.dependence * flow_total,
            share: 0.0,
            flows,
        });
    }
    if by_aggregate.is_empty() {
        return Err(MetricsError::NoFlows(node.to_string()));
    }

    let mut aggregates = Vec::with_capacity(by_aggregate.len());
    let mut all_codes = Vec::new();
    // sum of the raw adjusted flows, grouped like the aggregate values
    let mut total_adjusted = 0.0;
    for (aggregate, mut leaves) in by_aggregate {
        let pairs: Vec<(f64, f64)> = leaves.iter().map(|c| (c.dependence, c.flow_total)).collect();
        let (dependence, adjusted_value) = aggregate_dependence(&pairs)?;
        let leaf_total: f64 = leaves.iter().map(|c| c.adjusted_value).sum();
        for leaf in &mut leaves {
            leaf.share = share(leaf.adjusted_value, leaf_total);
        }
        total_adjusted += leaves.iter().map(|c| c.flow_total).sum::<f64>();
        aggregates.push(AggregateDependence {
            aggregate: aggregate.to_string(),
            dependence,
            leaf_total,
            adjusted_value,
            share: 0.0,
        });
        all_codes.extend(leaves);
    }

    let aggregate_values: Vec<f64> = aggregates.iter().map(|a| a.adjusted_value).collect();
    let node_dep = partner_dependence(&aggregate_values)?;
    let aggregate_total: f64 = aggregate_values.iter().sum();
    for agg in &mut aggregates {
        agg.share = share(agg.adjusted_value, aggregate_total);
    }
    let resilience = 1.0 - node_dep.dependence * (aggregate_total / total_adjusted);

    Ok(NodeResilienceReport {
        node: node.to_string(),
        resilience,
        total_adjusted,
        influence: None,
        breakdown: DependenceBreakdown {
            codes: all_codes,
            aggregates,
            node_dependence: node_dep.dependence,
            total_adjusted,
        },
    })
}

/// Resilience of one focal node of the view.
pub fn node_resilience(
    view: &NetworkView,
    node: &str,
    adjacency: &AdjacencyIndex,
    params: &ResilienceParams,
) -> Result<NodeResilienceReport, MetricsError> {
    params.validate()?;
    let codes =
        adjust_node_flows(view, node, adjacency, params).ok_or_else(|| MetricsError::NoFlows(node.to_string()))?;
    resilience_from_adjusted(node, &codes)
}

/// Influence shares `R_i V'_i / sum_k R_k V'_k`, accumulated in node-id order.
pub fn node_influence(reports: &[NodeResilienceReport]) -> Result<BTreeMap<String, f64>, MetricsError> {
    let mut weights: Vec<(&str, f64)> =
        reports.iter().map(|r| (r.node.as_str(), r.resilience * r.total_adjusted)).collect();
    weights.sort_by(|a, b| a.0.cmp(b.0));
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if total <= 0.0 {
        return Err(MetricsError::DegenerateNetwork);
    }
    Ok(weights.into_iter().map(|(id, w)| (id.to_string(), w / total)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionResilience {
    pub direction: Direction,
    /// `1 - max influence`.
    pub resilience: f64,
    pub most_influential: String,
    pub max_influence: f64,
}

impl DirectionResilience {
    /// Ties on the maximum go to the lexicographically smallest id.
    pub fn from_influence(direction: Direction, influence: &BTreeMap<String, f64>) -> Option<Self> {
        let mut best: Option<(&str, f64)> = None;
        for (id, &i) in influence {
            if best.is_none_or(|(_, b)| i > b) {
                best = Some((id, i));
            }
        }
        best.map(|(id, max)| DirectionResilience {
            direction,
            resilience: 1.0 - max,
            most_influential: id.to_string(),
            max_influence: max,
        })
    }
}

/// Every node of one view with influence and the direction's network resilience.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewResilience {
    pub year: i32,
    pub level: Level,
    pub direction: Direction,
    /// Nodes with positive adjusted value, in id order.
    pub nodes: Vec<NodeResilienceReport>,
    pub network: DirectionResilience,
}

impl ViewResilience {
    pub fn node(&self, id: &str) -> Option<&NodeResilienceReport> {
        self.nodes.binary_search_by(|n| n.node.as_str().cmp(id)).ok().map(|i| &self.nodes[i])
    }
}

/// Evaluates every focal node of the view. Nodes whose flows are all zero are left out.
pub fn evaluate_view(
    view: &NetworkView,
    adjacency: &AdjacencyIndex,
    params: &ResilienceParams,
) -> Result<ViewResilience, MetricsError> {
    params.validate()?;
    let ids: Vec<&str> = view.node_ids().collect();
    let results: Vec<Result<NodeResilienceReport, MetricsError>> =
        ids.par_iter().map(|id| node_resilience(view, id, adjacency, params)).collect();
    let mut nodes = Vec::with_capacity(results.len());
    for result in results {
        match result {
            Ok(report) => nodes.push(report),
            Err(MetricsError::NoFlows(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if nodes.is_empty() {
        return Err(MetricsError::NoFlows(format!("<all nodes of {} {}>", view.year(), view.level())));
    }
    let influence = node_influence(&nodes)?;
    for node in &mut nodes {
        node.influence = influence.get(&node.node).copied();
    }
    let network = DirectionResilience::from_influence(view.direction(), &influence).expect("influence map is nonempty");
    Ok(ViewResilience { year: view.year(), level: view.level(), direction: view.direction(), nodes, network })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkResilienceReport {
    pub import: DirectionResilience,
    pub export: DirectionResilience,
    /// Mean of the import and export network resilience.
    pub overall: f64,
}

impl NetworkResilienceReport {
    pub fn from_directions(import: DirectionResilience, export: DirectionResilience) -> Self {
        let overall = (import.resilience + export.resilience) / 2.0;
        NetworkResilienceReport { import, export, overall }
    }
}

pub fn network_resilience(
    import: &NetworkView,
    export: &NetworkView,
    adjacency: &AdjacencyIndex,
    params: &ResilienceParams,
) -> Result<NetworkResilienceReport, MetricsError> {
    let imp = evaluate_view(import, adjacency, params)?;
    let exp = evaluate_view(export, adjacency, params)?;
    Ok(NetworkResilienceReport::from_directions(imp.network, exp.network))
}
