//! Direct evaluation of the resilience formulas, written independently of the
//! library: flat loops over a flow list, dependence as the product `prod p^p`.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct OFlow {
    pub origin: String,
    pub dest: String,
    pub code: String,
    pub value: f64,
    pub atm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OParams {
    pub sqrt_atm: bool,
    pub ga: f64,
    pub self_adjacent: bool,
    pub include_self: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ODirection {
    pub d_code: BTreeMap<(String, String), f64>,
    pub d_agg: BTreeMap<(String, String), f64>,
    pub d_node: BTreeMap<String, f64>,
    pub r: BTreeMap<String, f64>,
    pub v_prime: BTreeMap<String, f64>,
    pub influence: BTreeMap<String, f64>,
    /// None when every node has zero resilience.
    pub r_net: Option<f64>,
}

/// `prod (x_k / sum)^(x_k / sum)` with `0^0 = 1`.
pub fn product_dependence(xs: &[f64]) -> f64 {
    let total: f64 = xs.iter().sum();
    let mut d = 1.0;
    for &x in xs {
        if x > 0.0 {
            let p = x / total;
            d *= p.powf(p);
        }
    }
    d
}

pub fn evaluate(
    flows: &[OFlow],
    aggregate_of: &BTreeMap<String, String>,
    adjacent: &BTreeSet<(String, String)>,
    params: OParams,
    export: bool,
) -> ODirection {
    let mut out = ODirection::default();
    let focal = |f: &OFlow| if export { f.origin.clone() } else { f.dest.clone() };
    let nodes: BTreeSet<String> = flows.iter().map(focal).collect();
    for node in &nodes {
        let mine: Vec<&OFlow> =
            flows.iter().filter(|f| &focal(f) == node).filter(|f| params.include_self || f.origin != f.dest).collect();
        // adjusted values
        let adj = |f: &OFlow| {
            let alpha = if !params.sqrt_atm || f.atm < 1.0 { 1.0 } else { f.atm.sqrt() };
            let is_adj = if f.origin == f.dest {
                params.self_adjacent
            } else {
                adjacent.contains(&(f.origin.clone(), f.dest.clone()))
                    || adjacent.contains(&(f.dest.clone(), f.origin.clone()))
            };
            f.value * alpha * if is_adj { params.ga } else { 1.0 }
        };
        let codes: BTreeSet<&String> = mine.iter().map(|f| &f.code).collect();
        let mut v_code: BTreeMap<&String, f64> = BTreeMap::new();
        let mut total = 0.0;
        for c in codes {
            let vals: Vec<f64> = mine.iter().filter(|f| &f.code == c).map(|f| adj(f)).collect();
            let sum: f64 = vals.iter().sum();
            if sum <= 0.0 {
                continue;
            }
            let d = product_dependence(&vals);
            out.d_code.insert((node.clone(), c.clone()), d);
            v_code.insert(c, d * sum);
            total += sum;
        }
        if v_code.is_empty() {
            continue;
        }
        let aggs: BTreeSet<&String> = v_code.keys().map(|c| &aggregate_of[*c]).collect();
        let mut v_agg = Vec::new();
        for a in aggs {
            let leaf: Vec<f64> = v_code.iter().filter(|(c, _)| &aggregate_of[**c] == a).map(|(_, v)| *v).collect();
            let d = product_dependence(&leaf);
            out.d_agg.insert((node.clone(), a.clone()), d);
            v_agg.push(d * leaf.iter().sum::<f64>());
        }
        let d_node = product_dependence(&v_agg);
        let r = 1.0 - d_node * v_agg.iter().sum::<f64>() / total;
        out.d_node.insert(node.clone(), d_node);
        out.r.insert(node.clone(), r);
        out.v_prime.insert(node.clone(), total);
    }
    let denom: f64 = out.r.iter().map(|(n, r)| r * out.v_prime[n]).sum();
    if denom > 0.0 {
        for (n, r) in &out.r {
            out.influence.insert(n.clone(), r * out.v_prime[n] / denom);
        }
        let max = out.influence.values().cloned().fold(f64::MIN, f64::max);
        out.r_net = Some(1.0 - max);
    }
    out
}
