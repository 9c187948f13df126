//! Built-in manifolds, submersions and embeddings with closed-form reference
//! values.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::blocklin::BlockSplit;
use crate::error::{LkError, Result};
use crate::metricfield::Chart;
use crate::submersion::{validate, SubmersionChart};
use crate::tubeoracle::Embedding;

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    ReducedQuadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub key: String,
    pub value: f64,
    pub provenance: Provenance,
    pub note: String,
}

#[derive(Debug, Clone)]
pub enum ZooObject {
    Manifold(Vec<Chart>),
    Submersion(SubmersionChart),
    Embedded { embedding: Embedding, intrinsic: Vec<Chart> },
}

#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub object: ZooObject,
    pub references: Vec<Reference>,
}

/// Names accepted by [`make`].
pub const CATALOGUE: [&str; 10] = [
    "sphere",
    "flat_torus",
    "ring_torus",
    "product_s2_s1",
    "warped_s2_over_s1",
    "flat_t2_over_s1",
    "torus_fiber_bundle",
    "coupled_t2_over_s1",
    "sphere2_embedded",
    "ring_torus_embedded",
];

impl ZooEntry {
    pub fn reference(&self, key: &str) -> Option<f64> {
        self.references.iter().find(|r| r.key == key).map(|r| r.value)
    }

    /// Charts carrying the intrinsic metric (the total chart for submersions).
    pub fn atlas(&self) -> Vec<&Chart> {
        match &self.object {
            ZooObject::Manifold(charts) => charts.iter().collect(),
            ZooObject::Submersion(sc) => vec![sc.total()],
            ZooObject::Embedded { intrinsic, .. } => intrinsic.iter().collect(),
        }
    }

    pub fn submersion(&self) -> Option<&SubmersionChart> {
        match &self.object {
            ZooObject::Submersion(sc) => Some(sc),
            _ => None,
        }
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        match &self.object {
            ZooObject::Embedded { embedding, .. } => Some(embedding),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        use crate::metricfield::MetricSource;
        self.atlas()[0].dim()
    }
}

struct Params<'a> {
    name: &'a str,
    given: &'a BTreeMap<String, f64>,
    used: BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn new(name: &'a str, given: &'a BTreeMap<String, f64>) -> Self {
        Params {
            name,
            given,
            used: BTreeMap::new(),
        }
    }

    fn get(&mut self, key: &str, default: f64, valid: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
        let v = self.given.get(key).copied().unwrap_or(default);
        if !v.is_finite() || !valid(v) {
            return Err(LkError::invalid(format!(
                "{}: parameter {key} = {v} outside {range}",
                self.name
            )));
        }
        self.used.insert(key.to_string(), v);
        Ok(v)
    }

    fn finish(self) -> Result<BTreeMap<String, f64>> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            return Err(LkError::invalid(format!("{}: unknown parameter {k}", self.name)));
        }
        Ok(self.used)
    }
}

fn closed(key: &str, value: f64, note: &str) -> Reference {
    Reference {
        key: key.to_string(),
        value,
        provenance: Provenance::ClosedForm,
        note: note.to_string(),
    }
}

/// Decimal literal for DSL strings; `{}` on f64 round-trips exactly.
fn lit(v: f64) -> String {
    if v < 0.0 {
        format!("({v})")
    } else {
        format!("{v}")
    }
}

fn sphere_chart(r: f64) -> Result<Chart> {
    let r2 = lit(r * r);
    Chart::diagonal(
        vec![[0.0, PI], [0.0, TAU]],
        vec![false, true],
        &[&r2, &format!("{r2}*sin(x0)^2")],
    )
}

fn ring_torus_chart(big: f64, r: f64) -> Result<Chart> {
    Chart::diagonal(
        vec![[0.0, TAU], [0.0, TAU]],
        vec![true, true],
        &[&lit(r * r), &format!("({}+{}*cos(x0))^2", lit(big), lit(r))],
    )
}

fn circle_base(length: f64) -> Result<Chart> {
    Chart::diagonal(vec![[0.0, length]], vec![true], &["1"])
}

fn sphere_refs(r: f64) -> Vec<Reference> {
    let area = 4.0 * PI * r * r;
    vec![
        closed("volume", area, "4πr²"),
        closed("chi", 2.0, "χ(S²)"),
        closed("V0", 2.0, "Euler characteristic"),
        closed("V1", 0.0, "n − i odd"),
        closed("V2", area, "area"),
    ]
}

fn torus_refs(area: f64) -> Vec<Reference> {
    vec![
        closed("volume", area, "area"),
        closed("chi", 0.0, "χ(T²)"),
        closed("V0", 0.0, "Euler characteristic"),
        closed("V1", 0.0, "n − i odd"),
        closed("V2", area, "area"),
    ]
}

/// Builds a catalogue entry; submersion entries are validated.
pub fn make(name: &str, params: &BTreeMap<String, f64>) -> Result<ZooEntry> {
    let mut p = Params::new(name, params);
    let (object, references) = match name {
        "sphere" => {
            let r = p.get("r", 1.0, |v| v > 0.0, "(0, ∞)")?;
            (ZooObject::Manifold(vec![sphere_chart(r)?]), sphere_refs(r))
        }
        "flat_torus" => {
            let a = p.get("a", TAU, |v| v > 0.0, "(0, ∞)")?;
            let b = p.get("b", TAU, |v| v > 0.0, "(0, ∞)")?;
            let chart = Chart::diagonal(vec![[0.0, a], [0.0, b]], vec![true, true], &["1", "1"])?;
            (ZooObject::Manifold(vec![chart]), torus_refs(a * b))
        }
        "ring_torus" => {
            let big = p.get("R", 2.0, |v| v > 0.0, "(0, ∞)")?;
            let r = p.get("r", 1.0, |v| v > 0.0 && v < big, "(0, R)")?;
            let mut refs = torus_refs(4.0 * PI * PI * big * r);
            refs.push(closed("min_sectional", -1.0 / (r * (big - r)), "cos θ/(r(R + r cos θ)) at θ = π"));
            (ZooObject::Manifold(vec![ring_torus_chart(big, r)?]), refs)
        }
        "product_s2_s1" => {
            let r = p.get("r", 1.0, |v| v > 0.0, "(0, ∞)")?;
            let len = p.get("L", TAU, |v| v > 0.0, "(0, ∞)")?;
            let r2 = lit(r * r);
            let total = Chart::diagonal(
                vec![[0.0, PI], [0.0, TAU], [0.0, len]],
                vec![false, true, true],
                &[&r2, &format!("{r2}*sin(x0)^2"), "1"],
            )?;
            let sc = SubmersionChart::new(total, circle_base(len)?, BlockSplit::new(vec![0, 1], vec![2])?)?;
            let vol = 4.0 * PI * r * r * len;
            let refs = vec![
                closed("volume", vol, "4πr²·L"),
                closed("V0", 0.0, "n − i odd"),
                closed("V1", 2.0 * len, "product: χ(S²)·L"),
                closed("V2", 0.0, "n − i odd"),
                closed("V3", vol, "volume"),
                closed("fiber_chi", 2.0, "χ(S²)"),
                closed("target_V1", 2.0 * len, "χ(S²)·V₁(S¹)"),
                closed("fiber_min_sectional", 1.0 / (r * r), "round sphere"),
            ];
            (ZooObject::Submersion(sc), refs)
        }
        "warped_s2_over_s1" => {
            let a = p.get("a", 0.3, |v| v.abs() < 1.0, "(−1, 1)")?;
            let f2 = format!("(1+{}*sin(x2))^2", lit(a));
            let total = Chart::diagonal(
                vec![[0.0, PI], [0.0, TAU], [0.0, TAU]],
                vec![false, true, true],
                &[&f2, &format!("{f2}*sin(x0)^2"), "1"],
            )?;
            let sc = SubmersionChart::new(total, circle_base(TAU)?, BlockSplit::new(vec![0, 1], vec![2])?)?;
            let vol = 4.0 * PI * (TAU + PI * a * a);
            let refs = vec![
                closed("volume", vol, "4π∫f² db"),
                closed("V0", 0.0, "n − i odd"),
                closed("V1", 4.0 * PI + 2.0 * PI * a * a, "∫(2 + 2f′²) db"),
                closed("V2", 0.0, "n − i odd"),
                closed("V3", vol, "volume"),
                closed("fiber_chi", 2.0, "χ(S²)"),
                closed("target_V1", 4.0 * PI, "χ(S²)·V₁(S¹)"),
            ];
            (ZooObject::Submersion(sc), refs)
        }
        "flat_t2_over_s1" => {
            let total = Chart::diagonal(vec![[0.0, TAU], [0.0, TAU]], vec![true, true], &["1", "1"])?;
            let sc = SubmersionChart::new(total, circle_base(TAU)?, BlockSplit::new(vec![0], vec![1])?)?;
            let mut refs = torus_refs(4.0 * PI * PI);
            refs.push(closed("fiber_chi", 0.0, "χ(S¹)"));
            refs.push(closed("target_V1", 0.0, "χ(S¹)·V₁(S¹)"));
            (ZooObject::Submersion(sc), refs)
        }
        "torus_fiber_bundle" => {
            let big = p.get("R", 2.0, |v| v > 0.0, "(0, ∞)")?;
            let r = p.get("r", 1.0, |v| v > 0.0 && v < big, "(0, R)")?;
            let total = Chart::diagonal(
                vec![[0.0, TAU], [0.0, TAU], [0.0, TAU]],
                vec![true, true, true],
                &[&lit(r * r), &format!("({}+{}*cos(x0))^2", lit(big), lit(r)), "1"],
            )?;
            let sc = SubmersionChart::new(total, circle_base(TAU)?, BlockSplit::new(vec![0, 1], vec![2])?)?;
            let vol = 4.0 * PI * PI * big * r * TAU;
            let refs = vec![
                closed("volume", vol, "4π²Rr·2π"),
                closed("V0", 0.0, "n − i odd"),
                closed("V1", 0.0, "product with flat circle, ∫K dA = 0"),
                closed("V2", 0.0, "n − i odd"),
                closed("V3", vol, "volume"),
                closed("fiber_chi", 0.0, "χ(T²)"),
                closed("target_V1", 0.0, "χ(T²)·V₁(S¹)"),
                closed("fiber_min_sectional", -1.0 / (r * (big - r)), "inner equator"),
            ];
            (ZooObject::Submersion(sc), refs)
        }
        "coupled_t2_over_s1" => {
            let c = p.get("c", 0.1, |v| v.abs() < 1.0, "(−1, 1)")?;
            let total = Chart::new(
                vec![[0.0, TAU], [0.0, TAU]],
                vec![true, true],
                &["1", &lit(c), &lit(1.0 + c * c)],
                None,
            )?;
            let sc = SubmersionChart::new(total, circle_base(TAU)?, BlockSplit::new(vec![0], vec![1])?)?;
            let mut refs = torus_refs(4.0 * PI * PI);
            refs.push(closed("fiber_chi", 0.0, "χ(S¹)"));
            refs.push(closed("target_V1", 0.0, "χ(S¹)·V₁(S¹)"));
            (ZooObject::Submersion(sc), refs)
        }
        "sphere2_embedded" => {
            let embedding = Embedding::new(
                vec![[0.0, PI], [0.0, TAU]],
                vec![false, true],
                &["sin(x0)*cos(x1)", "sin(x0)*sin(x1)", "cos(x0)"],
                Some(1.0),
            )?;
            let mut refs = sphere_refs(1.0);
            refs.push(closed(
                "tube_0.1",
                4.0 * PI / 3.0 * (1.1f64.powi(3) - 0.9f64.powi(3)),
                "(4π/3)((1+ε)³ − (1−ε)³)",
            ));
            refs.push(closed("reach", 1.0, "radius"));
            (
                ZooObject::Embedded {
                    embedding,
                    intrinsic: vec![sphere_chart(1.0)?],
                },
                refs,
            )
        }
        "ring_torus_embedded" => {
            let big = p.get("R", 2.0, |v| v > 0.0, "(0, ∞)")?;
            let r = p.get("r", 1.0, |v| v > 0.0 && v < big, "(0, R)")?;
            let (bs, rs) = (lit(big), lit(r));
            let reach = r.min(big - r);
            let embedding = Embedding::new(
                vec![[0.0, TAU], [0.0, TAU]],
                vec![true, true],
                &[
                    &format!("({bs}+{rs}*cos(x0))*cos(x1)"),
                    &format!("({bs}+{rs}*cos(x0))*sin(x1)"),
                    &format!("{rs}*sin(x0)"),
                ],
                Some(reach),
            )?;
            let mut refs = torus_refs(4.0 * PI * PI * big * r);
            refs.push(closed("reach", reach, "min(r, R − r)"));
            (
                ZooObject::Embedded {
                    embedding,
                    intrinsic: vec![ring_torus_chart(big, r)?],
                },
                refs,
            )
        }
        _ => {
            return Err(LkError::invalid(format!(
                "unknown zoo entry {name}; known: {}",
                CATALOGUE.join(", ")
            )))
        }
    };
    let params = p.finish()?;
    if let ZooObject::Submersion(sc) = &object {
        let report = validate(sc, 64);
        if !report.pass {
            return Err(LkError::InvalidSubmersion {
                residual: report.residual,
            });
        }
    }
    Ok(ZooEntry {
        name: name.to_string(),
        params,
        object,
        references,
    })
}

/// Splits `zoo:name?k=v&k2=v2` into the name and parameters.
pub fn parse_uri(uri: &str) -> Result<(String, BTreeMap<String, f64>)> {
    let rest = uri
        .strip_prefix("zoo:")
        .ok_or_else(|| LkError::invalid(format!("{uri} is not a zoo: URI")))?;
    let (name, query) = match rest.split_once('?') {
        Some((n, q)) => (n, q),
        None => (rest, ""),
    };
    if name.is_empty() {
        return Err(LkError::invalid("zoo URI without a name"));
    }
    let mut params = BTreeMap::new();
    for pair in query.split('&').filter(|s| !s.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| LkError::invalid(format!("parameter `{pair}` is not key=value")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| LkError::invalid(format!("parameter {k}: `{v}` is not a number")))?;
        if params.insert(k.trim().to_string(), value).is_some() {
            return Err(LkError::invalid(format!("parameter {k} given twice")));
        }
    }
    Ok((name.to_string(), params))
}

pub fn from_uri(uri: &str) -> Result<ZooEntry> {
    let (name, params) = parse_uri(uri)?;
    make(&name, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uri_parsing() {
        let (n, p) = parse_uri("zoo:warped_s2_over_s1?a=0.3").unwrap();
        assert_eq!(n, "warped_s2_over_s1");
        assert_eq!(p["a"], 0.3);
        assert_eq!(parse_uri("zoo:sphere").unwrap().1.len(), 0);
        assert!(parse_uri("sphere").is_err());
        assert!(parse_uri("zoo:sphere?r").is_err());
        assert!(parse_uri("zoo:sphere?r=x").is_err());
        assert!(parse_uri("zoo:sphere?r=1&r=2").is_err());
    }

    #[test]
    fn parameters_are_checked() {
        assert!(from_uri("zoo:sphere?r=-1").is_err());
        assert!(from_uri("zoo:sphere?radius=1").is_err());
        assert!(from_uri("zoo:ring_torus?R=1&r=2").is_err());
        assert!(from_uri("zoo:hopf").is_err());
        let e = from_uri("zoo:sphere?r=2").unwrap();
        assert_eq!(e.params["r"], 2.0);
        assert!((e.reference("V2").unwrap() - 16.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn every_entry_builds_with_defaults() {
        for name in CATALOGUE {
            let e = make(name, &BTreeMap::new()).unwrap();
            assert!(e.reference("volume").is_some(), "{name}");
            assert!(e.references.iter().all(|r| r.provenance == Provenance::ClosedForm));
        }
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(lit(0.3), "0.3");
        assert_eq!(lit(-0.1), "(-0.1)");
        assert_eq!(lit(2.0), "2");
    }
}
