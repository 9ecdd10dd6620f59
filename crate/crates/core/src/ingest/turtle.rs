//! Reader for the Turtle subset written by the store export.
//!
//! Only the line-per-triple form produced by `GraphStore::export_turtle` is
//! understood; it is enough to reload a workspace bundle.

use std::collections::BTreeMap;
use std::path::Path;

use super::IngestError;
use crate::adjacency::AdjacencyIndex;
use crate::model::{CommodityCode, CommodityFlow, FlowValue, Level, RegionNode};
use crate::store::vocab;
use crate::store::GraphStore;

type Subjects<'a> = BTreeMap<&'a str, Vec<(u64, &'a str, String)>>;

fn terr(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Turtle { line, message: message.into() }
}

fn unescape(line: u64, literal: &str) -> Result<String, IngestError> {
    let inner = literal
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| terr(line, format!("expected a string literal, got {literal}")))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('"') => out.push('"'),
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            other => return Err(terr(line, format!("bad escape \\{}", other.unwrap_or(' ')))),
        }
    }
    Ok(out)
}

fn parse_triples(text: &str) -> Result<Subjects<'_>, IngestError> {
    let mut subjects: Subjects = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("@prefix ") {
            continue;
        }
        let body = trimmed.strip_suffix(" .").ok_or_else(|| terr(line, "triple must end with \" .\""))?;
        let mut parts = body.splitn(3, ' ');
        let (Some(s), Some(p), Some(o)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(terr(line, "expected subject, predicate and object"));
        };
        subjects.entry(s).or_default().push((line, p, o.to_string()));
    }
    Ok(subjects)
}

struct Props<'a> {
    line: u64,
    values: BTreeMap<&'a str, Vec<(u64, String)>>,
}

impl<'a> Props<'a> {
    fn new(triples: &'a [(u64, &'a str, String)]) -> Self {
        let mut values: BTreeMap<&str, Vec<(u64, String)>> = BTreeMap::new();
        for (line, p, o) in triples {
            values.entry(p).or_default().push((*line, o.clone()));
        }
        Props { line: triples.first().map(|t| t.0).unwrap_or(0), values }
    }

    fn has_type(&self, class: &str) -> bool {
        self.values.get(vocab::RDF_TYPE).is_some_and(|v| v.iter().any(|(_, o)| o == class))
    }

    fn get(&self, p: &str) -> Option<&(u64, String)> {
        self.values.get(p).and_then(|v| v.first())
    }

    fn require(&self, p: &str) -> Result<&(u64, String), IngestError> {
        self.get(p).ok_or_else(|| terr(self.line, format!("missing {p}")))
    }

    fn string(&self, p: &str) -> Result<String, IngestError> {
        let (line, o) = self.require(p)?;
        unescape(*line, o)
    }

    fn number(&self, p: &str) -> Result<f64, IngestError> {
        let (line, o) = self.require(p)?;
        o.parse().map_err(|_| terr(*line, format!("{p}: bad number {o}")))
    }
}

fn lookup<'m>(map: &'m BTreeMap<String, String>, (line, iri): &(u64, String)) -> Result<&'m str, IngestError> {
    map.get(iri).map(String::as_str).ok_or_else(|| terr(*line, format!("unknown subject {iri}")))
}

/// Rebuilds a store from exported Turtle text.
pub fn read_turtle(text: &str) -> Result<GraphStore, IngestError> {
    let subjects = parse_triples(text)?;
    let props: BTreeMap<&str, Props> = subjects.iter().map(|(s, t)| (*s, Props::new(t))).collect();

    // subject IRI -> id, for resolving links
    let mut region_ids = BTreeMap::new();
    let mut code_ids = BTreeMap::new();
    for (s, p) in &props {
        if p.has_type(vocab::REGION) {
            region_ids.insert(s.to_string(), p.string(vocab::REGION_ID)?);
        } else if p.has_type(vocab::CF_CODE) {
            code_ids.insert(s.to_string(), p.string(vocab::CODE_ID)?);
        }
    }

    let mut store = GraphStore::new();
    let mut regions = Vec::new();
    for (s, p) in &props {
        if !p.has_type(vocab::REGION) {
            continue;
        }
        let level_token = p.string(vocab::LEVEL)?;
        let level: Level = level_token.parse().map_err(|e| terr(p.line, format!("{e}")))?;
        let mut node = RegionNode::new(region_ids[*s].clone(), p.string(vocab::NAME)?, level);
        if let Some(parent) = p.get(vocab::WITHIN) {
            node.parent_id = Some(lookup(&region_ids, parent)?.to_string());
        }
        if let Some((line, feature)) = p.get(vocab::HAS_GN_FEATURE) {
            let f = props.get(feature.as_str()).ok_or_else(|| terr(*line, "dangling feature"))?;
            node.feature_code = f.string(vocab::FEATURE_CODE)?;
        }
        if let Some((line, geometry)) = p.get(vocab::HAS_GEOMETRY) {
            let g = props.get(geometry.as_str()).ok_or_else(|| terr(*line, "dangling geometry"))?;
            node.geometry_ref = Some(g.string(vocab::GEOMETRY_KEY)?);
        }
        regions.push((p.line, node));
    }
    regions.sort_by_key(|(_, node)| std::cmp::Reverse(node.level));
    for (line, node) in regions {
        store.upsert_region(node).map_err(|e| terr(line, e.to_string()))?;
    }

    let mut codes = Vec::new();
    for (s, p) in &props {
        if !p.has_type(vocab::CF_CODE) {
            continue;
        }
        let aggregate = p.require(vocab::IS_AGGREGATE)?;
        let parent = p.get(vocab::PARENT_CODE).map(|link| lookup(&code_ids, link)).transpose()?;
        let external =
            p.get(vocab::EXTERNAL_CLASS).map(|(_, o)| o.trim_start_matches('<').trim_end_matches('>').to_string());
        codes.push((
            p.line,
            CommodityCode {
                code: code_ids[*s].clone(),
                description: p.string(vocab::DESCRIPTION)?,
                parent: parent.map(str::to_string),
                is_aggregate: aggregate.1 == "true",
                external_class_iri: external,
            },
        ));
    }
    while !codes.is_empty() {
        let before = codes.len();
        let mut rest = Vec::new();
        for (line, code) in codes {
            if code.parent.as_ref().is_none_or(|p| store.code(p).is_some()) {
                store.upsert_code(code).map_err(|e| terr(line, e.to_string()))?;
            } else {
                rest.push((line, code));
            }
        }
        if rest.len() == before {
            return Err(terr(rest[0].0, format!("code hierarchy cycle through {}", rest[0].1.code)));
        }
        codes = rest;
    }

    let mut adjacency = AdjacencyIndex::new();
    for (s, p) in &props {
        if let Some(meets) = p.values.get(vocab::EH_MEET) {
            let a = lookup(&region_ids, &(p.line, s.to_string()))?;
            for link in meets {
                let b = lookup(&region_ids, link)?;
                adjacency.insert(a, b).map_err(|e| terr(link.0, e.to_string()))?;
            }
        }
    }
    store.set_adjacency(adjacency).map_err(|e| terr(0, e.to_string()))?;

    for p in props.values() {
        if !p.has_type(vocab::CF_OBJECT) {
            continue;
        }
        let value_musd = p.number(vocab::CF_VALUE)?;
        let value =
            FlowValue::from_millions(value_musd).ok_or_else(|| terr(p.line, format!("bad flow value {value_musd}")))?;
        let (line, year) = p.require(vocab::YEAR)?;
        let year: i32 = year.parse().map_err(|_| terr(*line, format!("bad year {year}")))?;
        let flow = CommodityFlow {
            origin: lookup(&region_ids, p.require(vocab::ORIGIN)?)?.to_string(),
            dest: lookup(&region_ids, p.require(vocab::DESTINATION)?)?.to_string(),
            code: lookup(&code_ids, p.require(vocab::HAS_CODE)?)?.to_string(),
            year,
            value,
            avg_mileage: p.number(vocab::AVG_MILEAGE)?,
            weight: p.get(vocab::CF_WEIGHT).map(|_| p.number(vocab::CF_WEIGHT)).transpose()?,
        };
        store.add_flow(flow).map_err(|e| terr(p.line, e.to_string()))?;
    }
    Ok(store)
}

pub fn load_turtle(path: &Path) -> Result<GraphStore, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    read_turtle(&text)
}
