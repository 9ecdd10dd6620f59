//! Prefixes and terms of the exported vocabulary.

use std::sync::OnceLock;

use serde::Deserialize;

const NAMESPACES_TOML: &str = include_str!("../../namespaces.toml");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Prefix {
    pub name: String,
    pub iri: String,
}

#[derive(Deserialize)]
struct NamespaceFile {
    prefix: Vec<Prefix>,
}

/// Prefix bindings in output order.
pub fn prefixes() -> &'static [Prefix] {
    static PREFIXES: OnceLock<Vec<Prefix>> = OnceLock::new();
    PREFIXES.get_or_init(|| {
        let file: NamespaceFile = toml::from_str(NAMESPACES_TOML).expect("bundled namespaces.toml is valid");
        file.prefix
    })
}

pub const RDF_TYPE: &str = "a";

// classes
pub const REGION: &str = "kwg-ont:Region";
pub const GN_FEATURE: &str = "gn:Feature";
pub const GEOMETRY: &str = "geo:Geometry";
pub const CF_CODE: &str = "cfs:CFCode";
pub const CF_OBJECT: &str = "cfs:CFObject";

// region properties
pub const REGION_ID: &str = "cfs:regionId";
pub const NAME: &str = "cfs:name";
pub const LEVEL: &str = "cfs:level";
pub const WITHIN: &str = "kwg-ont:within";
pub const HAS_GN_FEATURE: &str = "cfs:hasGnFeature";
pub const FEATURE_CODE: &str = "gn:featureCode";
pub const HAS_GEOMETRY: &str = "geo:hasGeometry";
pub const GEOMETRY_KEY: &str = "cfs:geometryKey";
pub const EH_MEET: &str = "geo:ehMeet";

// code properties
pub const CODE_ID: &str = "cfs:codeId";
pub const DESCRIPTION: &str = "cfs:description";
pub const IS_AGGREGATE: &str = "cfs:isAggregate";
pub const PARENT_CODE: &str = "cfs:parentCode";
pub const EXTERNAL_CLASS: &str = "cfs:externalClass";

// flow properties
pub const CF_VALUE: &str = "cfs:CFValue";
pub const AVG_MILEAGE: &str = "cfs:AvgMileage";
pub const CF_WEIGHT: &str = "cfs:CFWeight";
pub const YEAR: &str = "time:year";
pub const HAS_CODE: &str = "cfs:CFCode";
pub const ORIGIN: &str = "cfs:origin";
pub const DESTINATION: &str = "cfs:destination";
