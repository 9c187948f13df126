use std::collections::BTreeMap;

use lk_core::metricfield::{Chart, MetricSource};
use lk_core::quadrature::QuadratureOptions;
use lk_core::submersion::{self, collapse_sweep, sectional_sweep, validate, volume_scaling_check, PlaneClass};
use lk_core::tubeoracle::{steiner_eval, tube_volume_mc};
use lk_core::weylsum::intrinsic_volume;
use lk_core::zoo::{self, ZooObject};
use lk_core::{LkError, Result};
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::input::load;
use crate::output::{num, nums, opt_num, render, Cell, Table};
use crate::{EXIT_OK, EXIT_VALIDATION};

/// Runs a validated config; returns the exit code and the rendered output.
pub fn execute(cfg: &RunConfig) -> Result<(i32, String)> {
    match cfg.command.as_str() {
        "compute" => compute(cfg),
        "sweep" => sweep(cfg),
        "sectional" => sectional(cfg),
        "tube" => tube(cfg),
        "validate" => validate_cmd(cfg),
        "check" => check(cfg),
        other => Err(LkError::invalid(format!("unknown command {other}"))),
    }
}

fn quadrature(cfg: &RunConfig) -> QuadratureOptions {
    QuadratureOptions {
        max_nodes: cfg.max_nodes,
        ..QuadratureOptions::default()
    }
    .with_workers(cfg.workers)
}

fn compute(cfg: &RunConfig) -> Result<(i32, String)> {
    let input = load(&cfg.input)?;
    let atlas = input.atlas()?;
    let n = atlas[0].dim();
    let indices: Vec<usize> = if cfg.i.is_empty() { (0..=n).collect() } else { cfg.i.clone() };
    let opts = quadrature(cfg);
    let mut table = Table::new(&["i", "value", "error_estimate", "nodes"]);
    let mut plain = String::new();
    for &i in &indices {
        let v = intrinsic_volume(&atlas, i, &opts)?;
        plain.push_str(&format!("{:.6}\n", v.value));
        table.push(vec![
            Cell::Int(i as i64),
            Cell::Num(v.value),
            Cell::Num(v.error_estimate),
            Cell::Int(v.nodes as i64),
        ]);
    }
    let text = match cfg.format {
        None => plain,
        Some(f) => render(cfg, f, &table, Value::Null),
    };
    Ok((EXIT_OK, text))
}

fn sweep(cfg: &RunConfig) -> Result<(i32, String)> {
    let input = load(&cfg.input)?;
    let sc = input.submersion()?;
    let i = match cfg.i.as_slice() {
        [i] => *i,
        _ => return Err(LkError::invalid("sweep needs exactly one --i")),
    };
    let record = collapse_sweep(sc, i, &cfg.eps, &quadrature(cfg), None)?;
    let mut table = Table::new(&["eps", "value", "target", "abs_err"]);
    for (e, v) in record.eps_list.iter().zip(&record.values) {
        table.push(vec![
            Cell::Num(*e),
            Cell::Num(*v),
            Cell::Num(record.target),
            Cell::Num((v - record.target).abs()),
        ]);
    }
    let pass = record.pass();
    let summary = json!({
        "i": record.i,
        "eps_list": nums(&record.eps_list),
        "values": nums(&record.values),
        "error_estimates": nums(&record.error_estimates),
        "extrapolated_limit": opt_num(record.extrapolated_limit),
        "target": num(record.target),
        "slope": opt_num(record.slope),
        "complete": record.complete,
        "pass": pass,
    });
    let code = if pass { EXIT_OK } else { EXIT_VALIDATION };
    Ok((code, render(cfg, cfg.format.unwrap_or(Format::Csv), &table, summary)))
}

fn sectional(cfg: &RunConfig) -> Result<(i32, String)> {
    let input = load(&cfg.input)?;
    let sc = input.submersion()?;
    let report = sectional_sweep(sc, &cfg.eps, cfg.samples as usize, cfg.seed)?;
    let mut table = Table::new(&["eps", "class", "min_k"]);
    for (k, e) in report.eps.iter().enumerate() {
        for class in PlaneClass::ALL {
            if let Some(c) = report.classes.iter().find(|c| c.class == class) {
                table.push(vec![Cell::Num(*e), Cell::Text(class.name().into()), Cell::Num(c.min_k[k])]);
            }
        }
    }
    let summary = json!({
        "scaled_fiber_min": nums(&report.scaled_fiber_min),
        "fiber_limit": opt_num(report.fiber_limit),
        "bounded_below": report.bounded_below,
    });
    Ok((EXIT_OK, render(cfg, cfg.format.unwrap_or(Format::Csv), &table, summary)))
}

fn tube(cfg: &RunConfig) -> Result<(i32, String)> {
    let input = load(&cfg.input)?;
    let emb = input.embedding()?;
    if cfg.eps.is_empty() {
        return Err(LkError::invalid("tube needs at least one --eps"));
    }
    // Curvature-side prediction when the intrinsic metric is known.
    let intrinsic = match input.intrinsic() {
        Some(atlas) => Some(intrinsic_volumes(&atlas, &quadrature(cfg))?),
        None => None,
    };
    let mut table = Table::new(&["eps", "estimate", "sigma", "samples", "seed", "steiner"]);
    let mut results = Vec::new();
    for &eps in &cfg.eps {
        let t = tube_volume_mc(emb, eps, cfg.samples, cfg.seed, cfg.workers)?;
        let steiner = match &intrinsic {
            Some(v) => Some(steiner_eval(v, eps, emb.ambient())?),
            None => None,
        };
        table.push(vec![
            Cell::Num(t.eps),
            Cell::Num(t.estimate),
            Cell::Num(t.sigma),
            Cell::Int(t.samples as i64),
            Cell::Int(t.seed as i64),
            steiner.map_or(Cell::Text(String::new()), Cell::Num),
        ]);
        results.push(json!({
            "estimate": num(t.estimate),
            "sigma": num(t.sigma),
            "eps": num(t.eps),
            "samples": t.samples,
            "seed": t.seed,
            "hits": t.hits,
            "steiner": opt_num(steiner),
        }));
    }
    let summary = match results.len() {
        1 => results.pop().unwrap(),
        _ => json!({ "results": results }),
    };
    Ok((EXIT_OK, render(cfg, cfg.format.unwrap_or(Format::Json), &table, summary)))
}

fn intrinsic_volumes(atlas: &[&Chart], opts: &QuadratureOptions) -> Result<Vec<f64>> {
    let n = atlas[0].dim();
    (0..=n).map(|i| intrinsic_volume(atlas, i, opts).map(|v| v.value)).collect()
}

fn validate_cmd(cfg: &RunConfig) -> Result<(i32, String)> {
    let input = load(&cfg.input)?;
    let sc = input.submersion()?;
    let report = validate(sc, cfg.samples as usize);
    let mut table = Table::new(&["samples", "residual", "orthogonality", "naive_gap", "pass"]);
    table.push(vec![
        Cell::Int(report.samples as i64),
        Cell::Num(report.residual),
        Cell::Num(report.orthogonality),
        Cell::Num(report.naive_gap),
        Cell::Bool(report.pass),
    ]);
    let code = if report.pass { EXIT_OK } else { EXIT_VALIDATION };
    let summary = json!({ "pass": report.pass });
    Ok((code, render(cfg, cfg.format.unwrap_or(Format::Json), &table, summary)))
}

/// One row of an invariant suite.
struct Case {
    name: String,
    value: f64,
    reference: f64,
    tolerance: f64,
}

impl Case {
    fn error(&self) -> f64 {
        (self.value - self.reference).abs()
    }

    fn pass(&self) -> bool {
        self.error() <= self.tolerance
    }
}

pub const SUITES: [&str; 4] = ["gauss-bonnet", "volume", "volume-scaling", "submersions"];

fn check(cfg: &RunConfig) -> Result<(i32, String)> {
    let opts = quadrature(cfg);
    let cases = match cfg.input.as_str() {
        "gauss-bonnet" => gauss_bonnet_suite(&opts)?,
        "volume" => volume_suite(&opts)?,
        "volume-scaling" => volume_scaling_suite()?,
        "submersions" => submersion_suite()?,
        other => {
            return Err(LkError::invalid(format!(
                "unknown suite {other}; known: {}",
                SUITES.join(", ")
            )))
        }
    };
    let mut table = Table::new(&["case", "value", "reference", "abs_err", "tolerance", "pass"]);
    for c in &cases {
        table.push(vec![
            Cell::Text(c.name.clone()),
            Cell::Num(c.value),
            Cell::Num(c.reference),
            Cell::Num(c.error()),
            Cell::Num(c.tolerance),
            Cell::Bool(c.pass()),
        ]);
    }
    let pass = cases.iter().all(Case::pass);
    let summary = json!({ "suite": cfg.input, "cases": cases.len(), "pass": pass });
    let code = if pass { EXIT_OK } else { EXIT_VALIDATION };
    Ok((code, render(cfg, cfg.format.unwrap_or(Format::Csv), &table, summary)))
}

fn entry(name: &str, params: &[(&str, f64)]) -> Result<zoo::ZooEntry> {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    zoo::make(name, &p)
}

fn gauss_bonnet_suite(opts: &QuadratureOptions) -> Result<Vec<Case>> {
    let entries = [
        entry("sphere", &[("r", 0.5)])?,
        entry("sphere", &[("r", 1.0)])?,
        entry("sphere", &[("r", 2.0)])?,
        entry("flat_torus", &[])?,
        entry("ring_torus", &[])?,
    ];
    let mut cases = Vec::new();
    for e in &entries {
        let v = intrinsic_volume(&e.atlas(), 0, opts)?;
        cases.push(Case {
            name: label(e),
            value: v.value,
            reference: e.reference("chi").expect("closed manifolds carry chi"),
            tolerance: 1e-6,
        });
    }
    Ok(cases)
}

fn label(e: &zoo::ZooEntry) -> String {
    if e.params.is_empty() {
        return e.name.clone();
    }
    let p: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}?{}", e.name, p.join("&"))
}

fn volume_suite(opts: &QuadratureOptions) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for name in zoo::CATALOGUE {
        let e = zoo::make(name, &BTreeMap::new())?;
        let atlas = e.atlas();
        let n = atlas[0].dim();
        let volume = e.reference("volume").expect("every entry carries its volume");
        let v = intrinsic_volume(&atlas, n, opts)?;
        cases.push(Case {
            name: format!("{}:V{n}", label(&e)),
            value: v.value,
            reference: volume,
            tolerance: 1e-6 * volume.abs(),
        });
        for i in (0..n).filter(|i| (n - i) % 2 == 1) {
            let v = intrinsic_volume(&atlas, i, opts)?;
            cases.push(Case {
                name: format!("{}:V{i}", label(&e)),
                value: v.value,
                reference: 0.0,
                tolerance: 0.0,
            });
        }
    }
    Ok(cases)
}

fn zoo_submersions() -> Result<Vec<zoo::ZooEntry>> {
    let mut out = Vec::new();
    for name in zoo::CATALOGUE {
        let e = zoo::make(name, &BTreeMap::new())?;
        if matches!(e.object, ZooObject::Submersion(_)) {
            out.push(e);
        }
    }
    Ok(out)
}

fn volume_scaling_suite() -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for e in zoo_submersions()? {
        let sc = e.submersion().expect("filtered to submersions");
        for eps in submersion::default_schedule() {
            let r = volume_scaling_check(sc, eps, 32)?;
            cases.push(Case {
                name: format!("{}@{eps}", label(&e)),
                value: r.max_relative_deviation,
                reference: 0.0,
                tolerance: 1e-10,
            });
        }
    }
    Ok(cases)
}

fn submersion_suite() -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for e in zoo_submersions()? {
        let r = validate(e.submersion().expect("filtered to submersions"), 64);
        cases.push(Case {
            name: label(&e),
            value: r.residual.max(r.orthogonality),
            reference: 0.0,
            tolerance: 1e-10,
        });
    }
    Ok(cases)
}
