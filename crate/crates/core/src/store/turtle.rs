//! Deterministic Turtle serialization of the store.
//!
//! Output is the prefix header followed by one `subject predicate object .`
//! line per triple, sorted by the serialized `(subject, predicate, object)`.

use std::io::Write;

use super::vocab::{self, prefixes};
use super::{GraphStore, StoreError};
use crate::model::Level;

/// Percent-encodes every byte outside `[A-Za-z0-9-]` so that `_` stays free as a separator.
pub fn local_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for b in raw.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Turtle double literal with the shortest representation that round-trips.
pub fn turtle_double(x: f64) -> String {
    format!("{x:e}")
}

fn string_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn region_iri(id: &str) -> String {
    format!("cfs:region_{}", local_name(id))
}

pub(crate) fn feature_iri(id: &str) -> String {
    format!("cfs:feature_{}", local_name(id))
}

pub(crate) fn geometry_iri(key: &str) -> String {
    format!("cfs:geometry_{}", local_name(key))
}

pub(crate) fn code_iri(code: &str) -> String {
    format!("cfs:code_{}", local_name(code))
}

pub(crate) fn flow_iri(year: i32, level: Level, origin: &str, dest: &str, code: &str) -> String {
    format!("cfs:flow_{}_{}_{}_{}_{}", year, level.token(), local_name(origin), local_name(dest), local_name(code))
}

fn triples(store: &GraphStore) -> Vec<(String, &'static str, String)> {
    let mut out = Vec::new();
    let mut push = |s: &str, p: &'static str, o: String| out.push((s.to_string(), p, o));

    for region in store.regions() {
        let s = region_iri(&region.id);
        push(&s, vocab::RDF_TYPE, vocab::REGION.into());
        push(&s, vocab::REGION_ID, string_literal(&region.id));
        push(&s, vocab::NAME, string_literal(&region.name));
        push(&s, vocab::LEVEL, string_literal(region.level.as_str()));
        if let Some(parent) = &region.parent_id {
            push(&s, vocab::WITHIN, region_iri(parent));
        }
        if !region.feature_code.is_empty() {
            let f = feature_iri(&region.id);
            push(&s, vocab::HAS_GN_FEATURE, f.clone());
            push(&f, vocab::RDF_TYPE, vocab::GN_FEATURE.into());
            push(&f, vocab::FEATURE_CODE, string_literal(&region.feature_code));
        }
        if let Some(key) = &region.geometry_ref {
            let g = geometry_iri(key);
            push(&s, vocab::HAS_GEOMETRY, g.clone());
            push(&g, vocab::RDF_TYPE, vocab::GEOMETRY.into());
            push(&g, vocab::GEOMETRY_KEY, string_literal(key));
        }
    }
    for (a, b) in store.adjacency().pairs() {
        push(&region_iri(a), vocab::EH_MEET, region_iri(b));
        push(&region_iri(b), vocab::EH_MEET, region_iri(a));
    }
    for code in store.codes() {
        let s = code_iri(&code.code);
        push(&s, vocab::RDF_TYPE, vocab::CF_CODE.into());
        push(&s, vocab::CODE_ID, string_literal(&code.code));
        push(&s, vocab::DESCRIPTION, string_literal(&code.description));
        push(&s, vocab::IS_AGGREGATE, code.is_aggregate.to_string());
        if let Some(parent) = &code.parent {
            push(&s, vocab::PARENT_CODE, code_iri(parent));
        }
        if let Some(iri) = &code.external_class_iri {
            push(&s, vocab::EXTERNAL_CLASS, format!("<{iri}>"));
        }
    }
    for (key, flow) in store.flows() {
        let s = flow_iri(key.year, key.level, &key.origin, &key.dest, &key.code);
        push(&s, vocab::RDF_TYPE, vocab::CF_OBJECT.into());
        push(&s, vocab::CF_VALUE, turtle_double(flow.value.millions()));
        push(&s, vocab::AVG_MILEAGE, turtle_double(flow.avg_mileage));
        if let Some(w) = flow.weight {
            push(&s, vocab::CF_WEIGHT, turtle_double(w));
        }
        push(&s, vocab::YEAR, key.year.to_string());
        push(&s, vocab::HAS_CODE, code_iri(&key.code));
        push(&s, vocab::ORIGIN, region_iri(&key.origin));
        push(&s, vocab::DESTINATION, region_iri(&key.dest));
    }
    out
}

pub(super) fn write_store<W: Write + ?Sized>(store: &GraphStore, sink: &mut W) -> Result<(), StoreError> {
    let mut lines = triples(store);
    lines.sort_unstable_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)));
    lines.dedup();

    let mut buf = String::new();
    for prefix in prefixes() {
        buf.push_str(&format!("@prefix {}: <{}> .\n", prefix.name, prefix.iri));
    }
    if !lines.is_empty() {
        buf.push('\n');
        for (s, p, o) in &lines {
            buf.push_str(s);
            buf.push(' ');
            buf.push_str(p);
            buf.push(' ');
            buf.push_str(o);
            buf.push_str(" .\n");
        }
    }
    sink.write_all(buf.as_bytes())?;
    sink.flush()?;
    Ok(())
}
