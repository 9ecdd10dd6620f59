//! Polygon geometries and the Meet predicate.
//!
//! Coordinates are (lon, lat) degrees treated as planar. Two geometries meet
//! when their boundaries come within the tolerance of each other and their
//! interiors do not overlap.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use geo::{Area, BooleanOps, Coord, LineString, MultiPolygon, Polygon};
use serde_json::Value;

use super::{AdjacencyError, AdjacencyIndex};
use crate::model::Level;
use crate::store::GraphStore;

pub const DEFAULT_TOLERANCE_DEG: f64 = 1e-6;

/// Shared boundary shorter than this (in degrees) counts as a point contact.
const MIN_SHARED_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeetOptions {
    pub tolerance_deg: f64,
    /// When set, corner contact is not enough: the shared boundary must have positive length.
    pub require_shared_length: bool,
}

impl Default for MeetOptions {
    fn default() -> Self {
        MeetOptions { tolerance_deg: DEFAULT_TOLERANCE_DEG, require_shared_length: false }
    }
}

/// A single (multi)polygon, or a collection of member geometries for coarser units.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    members: Vec<MultiPolygon<f64>>,
}

impl Geometry {
    /// Builds a geometry from polygons given as rings of `[lon, lat]` vertices;
    /// the first ring of each polygon is its exterior.
    pub fn from_polygons(polygons: Vec<Vec<Vec<[f64; 2]>>>) -> Result<Self, String> {
        let mut out = Vec::with_capacity(polygons.len());
        for rings in polygons {
            let mut rings = rings.into_iter();
            let exterior = rings.next().ok_or("polygon without rings")?;
            let exterior = ring(exterior)?;
            let interiors = rings.map(ring).collect::<Result<Vec<_>, _>>()?;
            out.push(Polygon::new(exterior, interiors));
        }
        if out.is_empty() {
            return Err("geometry without polygons".into());
        }
        Ok(Geometry { members: vec![MultiPolygon(out)] })
    }

    /// Single-ring convenience constructor.
    pub fn polygon(exterior: Vec<[f64; 2]>) -> Result<Self, String> {
        Self::from_polygons(vec![vec![exterior]])
    }

    /// Axis-aligned rectangle.
    pub fn rect(min: [f64; 2], max: [f64; 2]) -> Self {
        let [x0, y0] = min;
        let [x1, y1] = max;
        Self::polygon(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]).expect("rectangle ring is closed")
    }

    pub fn collection(parts: impl IntoIterator<Item = Geometry>) -> Result<Self, String> {
        let members: Vec<_> = parts.into_iter().flat_map(|g| g.members).collect();
        if members.is_empty() {
            return Err("empty geometry collection".into());
        }
        Ok(Geometry { members })
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }
}

fn ring(vertices: Vec<[f64; 2]>) -> Result<LineString<f64>, String> {
    if vertices.len() < 4 {
        return Err(format!("ring has {} vertices, at least 4 required", vertices.len()));
    }
    if vertices.first() != vertices.last() {
        return Err("ring is not closed".into());
    }
    if vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err("ring has non-finite coordinates".into());
    }
    Ok(LineString::from(vertices.into_iter().map(|[x, y]| Coord { x, y }).collect::<Vec<_>>()))
}

/// Meet predicate. For collections, true when any member pair meets.
pub fn meets(a: &Geometry, b: &Geometry, options: MeetOptions) -> bool {
    a.members.iter().any(|ma| b.members.iter().any(|mb| members_meet(ma, mb, options)))
}

fn members_meet(p: &MultiPolygon<f64>, q: &MultiPolygon<f64>, options: MeetOptions) -> bool {
    // evaluate in a canonical order so that the predicate is exactly symmetric
    let (p, q) = if compare_coords(p, q) == Ordering::Greater { (q, p) } else { (p, q) };
    let tol = options.tolerance_deg;

    let (Some(bp), Some(bq)) = (bbox(p), bbox(q)) else { return false };
    if bp.min.x > bq.max.x + tol || bq.min.x > bp.max.x + tol || bp.min.y > bq.max.y + tol || bq.min.y > bp.max.y + tol
    {
        return false;
    }

    let sp = segments(p);
    let sq = segments(q);
    let contact = if options.require_shared_length {
        shared_length(&sp, &sq, tol) > MIN_SHARED_LENGTH
    } else {
        boundaries_within(&sp, &sq, tol)
    };
    if !contact {
        return false;
    }

    let overlap = p.intersection(q).unsigned_area();
    let perimeter = |s: &[Segment]| s.iter().map(Segment::length).sum::<f64>();
    let slack = tol * perimeter(&sp).min(perimeter(&sq)) + 1e-12 * p.unsigned_area().min(q.unsigned_area());
    overlap <= slack
}

fn compare_coords(p: &MultiPolygon<f64>, q: &MultiPolygon<f64>) -> Ordering {
    let coords = |m: &MultiPolygon<f64>| {
        m.0.iter()
            .flat_map(|poly| std::iter::once(poly.exterior()).chain(poly.interiors()))
            .flat_map(|ls| ls.0.iter())
            .flat_map(|c| [c.x, c.y])
            .collect::<Vec<f64>>()
    };
    let (a, b) = (coords(p), coords(q));
    for (x, y) in a.iter().zip(&b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

struct Bbox {
    min: Coord<f64>,
    max: Coord<f64>,
}

fn bbox(m: &MultiPolygon<f64>) -> Option<Bbox> {
    let mut it = m.0.iter().flat_map(|p| p.exterior().0.iter());
    let first = *it.next()?;
    let mut b = Bbox { min: first, max: first };
    for c in it {
        b.min.x = b.min.x.min(c.x);
        b.min.y = b.min.y.min(c.y);
        b.max.x = b.max.x.max(c.x);
        b.max.y = b.max.y.max(c.y);
    }
    Some(b)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Coord<f64>,
    b: Coord<f64>,
}

impl Segment {
    fn length(&self) -> f64 {
        (self.b.x - self.a.x).hypot(self.b.y - self.a.y)
    }

    fn min_x(&self) -> f64 {
        self.a.x.min(self.b.x)
    }

    fn max_x(&self) -> f64 {
        self.a.x.max(self.b.x)
    }

    fn y_range(&self) -> (f64, f64) {
        (self.a.y.min(self.b.y), self.a.y.max(self.b.y))
    }
}

fn segments(m: &MultiPolygon<f64>) -> Vec<Segment> {
    let mut out: Vec<Segment> =
        m.0.iter()
            .flat_map(|poly| std::iter::once(poly.exterior()).chain(poly.interiors()))
            .flat_map(|ls| ls.lines().map(|l| Segment { a: l.start, b: l.end }))
            .collect();
    out.sort_by(|s, t| s.min_x().total_cmp(&t.min_x()));
    out
}

/// Calls `f` for each pair whose x-extents come within `tol`; stops when `f` returns true.
fn candidate_pairs(sp: &[Segment], sq: &[Segment], tol: f64, mut f: impl FnMut(&Segment, &Segment) -> bool) -> bool {
    let widest = sq.iter().map(|s| s.max_x() - s.min_x()).fold(0.0, f64::max);
    for s in sp {
        let lo = s.min_x() - tol - widest;
        let hi = s.max_x() + tol;
        let start = sq.partition_point(|t| t.min_x() < lo);
        let (sy0, sy1) = s.y_range();
        for t in sq[start..].iter().take_while(|t| t.min_x() <= hi) {
            if t.max_x() < s.min_x() - tol {
                continue;
            }
            let (ty0, ty1) = t.y_range();
            if ty0 > sy1 + tol || sy0 > ty1 + tol {
                continue;
            }
            if f(s, t) {
                return true;
            }
        }
    }
    false
}

fn boundaries_within(sp: &[Segment], sq: &[Segment], tol: f64) -> bool {
    candidate_pairs(sp, sq, tol, |s, t| segment_distance(s, t) <= tol)
}

fn shared_length(sp: &[Segment], sq: &[Segment], tol: f64) -> f64 {
    let mut total = 0.0;
    candidate_pairs(sp, sq, tol, |s, t| {
        total += collinear_overlap(s, t, tol);
        false
    });
    total
}

fn cross(o: Coord<f64>, a: Coord<f64>, b: Coord<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn point_segment_distance(p: Coord<f64>, s: &Segment) -> f64 {
    let (dx, dy) = (s.b.x - s.a.x, s.b.y - s.a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2).clamp(0.0, 1.0) };
    let (cx, cy) = (s.a.x + t * dx, s.a.y + t * dy);
    (p.x - cx).hypot(p.y - cy)
}

fn on_segment(p: Coord<f64>, s: &Segment) -> bool {
    p.x >= s.a.x.min(s.b.x) && p.x <= s.a.x.max(s.b.x) && p.y >= s.a.y.min(s.b.y) && p.y <= s.a.y.max(s.b.y)
}

fn segments_intersect(s: &Segment, t: &Segment) -> bool {
    let d1 = cross(t.a, t.b, s.a);
    let d2 = cross(t.a, t.b, s.b);
    let d3 = cross(s.a, s.b, t.a);
    let d4 = cross(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(s.a, t))
        || (d2 == 0.0 && on_segment(s.b, t))
        || (d3 == 0.0 && on_segment(t.a, s))
        || (d4 == 0.0 && on_segment(t.b, s))
}

fn segment_distance(s: &Segment, t: &Segment) -> f64 {
    if segments_intersect(s, t) {
        return 0.0;
    }
    point_segment_distance(s.a, t)
        .min(point_segment_distance(s.b, t))
        .min(point_segment_distance(t.a, s))
        .min(point_segment_distance(t.b, s))
}

/// Length of `t` running along `s` when both endpoints of `t` lie within `tol` of the line through `s`.
fn collinear_overlap(s: &Segment, t: &Segment, tol: f64) -> f64 {
    let len = s.length();
    if len == 0.0 {
        return 0.0;
    }
    let (ux, uy) = ((s.b.x - s.a.x) / len, (s.b.y - s.a.y) / len);
    let offset = |p: Coord<f64>| ((p.x - s.a.x) * uy - (p.y - s.a.y) * ux).abs();
    if offset(t.a) > tol || offset(t.b) > tol {
        return 0.0;
    }
    let along = |p: Coord<f64>| (p.x - s.a.x) * ux + (p.y - s.a.y) * uy;
    let (u0, u1) = (along(t.a), along(t.b));
    let lo = u0.min(u1).max(0.0);
    let hi = u0.max(u1).min(len);
    (hi - lo).max(0.0)
}

/// Adjacency over a set of geometries: every pair that meets.
pub fn derive_adjacency(
    geometries: &BTreeMap<String, Geometry>,
    options: MeetOptions,
) -> Result<AdjacencyIndex, AdjacencyError> {
    if !(options.tolerance_deg.is_finite() && options.tolerance_deg >= 0.0) {
        return Err(AdjacencyError::BadTolerance(options.tolerance_deg));
    }
    let entries: Vec<_> = geometries.iter().collect();
    let mut index = AdjacencyIndex::new();
    for (i, (ida, ga)) in entries.iter().enumerate() {
        for (idb, gb) in &entries[i + 1..] {
            if meets(ga, gb, options) {
                index.insert(ida, idb)?;
            }
        }
    }
    Ok(index)
}

/// Derives adjacency for every region at `level`. Regions without their own
/// geometry use the collection of their members' geometries.
pub fn derive_level_adjacency(
    store: &GraphStore,
    level: Level,
    geometries: &BTreeMap<String, Geometry>,
    options: MeetOptions,
) -> Result<AdjacencyIndex, AdjacencyError> {
    let mut selected = BTreeMap::new();
    for region in store.regions_at(level) {
        let key = region.geometry_ref.as_deref().unwrap_or(&region.id);
        let geometry = match geometries.get(key) {
            Some(g) => g.clone(),
            None => {
                let parts: Option<Vec<Geometry>> = (level > Level::State)
                    .then(|| {
                        store
                            .members_at(&region.id, Level::State)
                            .into_iter()
                            .map(|m| geometries.get(m).cloned())
                            .collect::<Option<Vec<_>>>()
                    })
                    .flatten()
                    .filter(|parts| !parts.is_empty());
                let parts = parts.ok_or_else(|| AdjacencyError::MissingGeometry(region.id.clone()))?;
                Geometry::collection(parts)
                    .map_err(|reason| AdjacencyError::InvalidRing { id: region.id.clone(), reason })?
            }
        };
        selected.insert(region.id.clone(), geometry);
    }
    derive_adjacency(&selected, options)
}

/// Reads a GeoJSON FeatureCollection whose features carry an `id` property.
pub fn load_geometries(path: &Path) -> Result<BTreeMap<String, Geometry>, AdjacencyError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| AdjacencyError::Io { path: path.to_path_buf(), source })?;
    parse_geometries(&text, path)
}

pub fn parse_geometries(text: &str, path: &Path) -> Result<BTreeMap<String, Geometry>, AdjacencyError> {
    let parse_err = |message: String| AdjacencyError::Parse { path: path.to_path_buf(), line: 0, message };
    let doc: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("expected a FeatureCollection with a features array".into()))?;
    let mut out = BTreeMap::new();
    for (i, feature) in features.iter().enumerate() {
        let id = feature_id(feature).ok_or_else(|| parse_err(format!("feature {i} has no id property")))?;
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| AdjacencyError::MissingGeometry(id.clone()))?;
        let geometry = geojson_polygons(geometry)
            .and_then(Geometry::from_polygons)
            .map_err(|reason| AdjacencyError::InvalidRing { id: id.clone(), reason })?;
        out.insert(id, geometry);
    }
    Ok(out)
}

/// The `id` property of a feature (falling back to the feature-level id).
pub fn feature_id(feature: &Value) -> Option<String> {
    let raw = feature.get("properties").and_then(|p| p.get("id")).or_else(|| feature.get("id"))?;
    match raw {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

type Rings = Vec<Vec<[f64; 2]>>;

fn geojson_polygons(geometry: &Value) -> Result<Vec<Rings>, String> {
    let kind = geometry.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
    match kind {
        "Polygon" => Ok(vec![rings(geometry.get("coordinates"))?]),
        "MultiPolygon" => geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or("MultiPolygon without coordinates")?
            .iter()
            .map(|p| rings(Some(p)))
            .collect(),
        "GeometryCollection" => {
            let mut out = Vec::new();
            for g in
                geometry.get("geometries").and_then(Value::as_array).ok_or("GeometryCollection without geometries")?
            {
                out.extend(geojson_polygons(g)?);
            }
            Ok(out)
        }
        other => Err(format!("unsupported geometry type {other}")),
    }
}

fn rings(coords: Option<&Value>) -> Result<Rings, String> {
    let rings = coords.and_then(Value::as_array).ok_or("polygon without coordinates")?;
    rings
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or_else(|| "ring is not an array".to_string())?
                .iter()
                .map(|pos| {
                    let pos = pos.as_array().ok_or("position is not an array")?;
                    match (pos.first().and_then(Value::as_f64), pos.get(1).and_then(Value::as_f64)) {
                        (Some(x), Some(y)) => Ok([x, y]),
                        _ => Err("position needs two numbers".to_string()),
                    }
                })
                .collect()
        })
        .collect()
}
