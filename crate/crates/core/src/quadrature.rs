//! Tensor-product quadrature over chart atlases.
//!
//! Non-periodic coordinates use open Gauss–Legendre rules, so coordinate
//! singularities on the boundary (sphere poles) are never sampled; periodic
//! coordinates use the uniform trapezoid rule.  Node values are computed in
//! parallel into an index-ordered buffer and reduced sequentially with
//! [`pairwise_sum`], so the result is bitwise independent of the worker count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{LkError, Result};
use crate::metricfield::MetricSource;
use crate::sum::pairwise_sum;

/// Hard node cap per chart unless overridden by `LK_MAX_NODES`.
pub const DEFAULT_MAX_NODES: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadratureOptions {
    pub workers: usize,
    pub max_nodes: usize,
    /// Nodes per coordinate on the first grid.
    pub initial_nodes: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            workers: 1,
            max_nodes: DEFAULT_MAX_NODES,
            initial_nodes: 16,
        }
    }
}

impl QuadratureOptions {
    /// Defaults with the node cap taken from `LK_MAX_NODES` when set.
    pub fn from_env() -> Result<Self> {
        let mut opts = QuadratureOptions::default();
        if let Ok(v) = std::env::var("LK_MAX_NODES") {
            opts.max_nodes = v
                .trim()
                .parse()
                .map_err(|_| LkError::invalid(format!("LK_MAX_NODES={v} is not an integer")))?;
        }
        Ok(opts)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Converged once the change under grid doubling is within this bound.
    pub fn tolerance(value: f64) -> f64 {
        f64::max(1e-8, 1e-7 * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    /// Total nodes of the final grids.
    pub nodes: usize,
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().unwrap().get(&m) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(m));
    cache.lock().unwrap().insert(m, rule.clone());
    rule
}

fn compute_gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1e-300) {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// P_m(x) and P_m'(x) by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One-dimensional rule on [a, b].
pub fn axis_rule(m: usize, [a, b]: [f64; 2], periodic: bool) -> (Vec<f64>, Vec<f64>) {
    if periodic {
        let h = (b - a) / m as f64;
        ((0..m).map(|k| a + k as f64 * h).collect(), vec![h; m])
    } else {
        let rule = gauss_legendre(m);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        (
            rule.0.iter().map(|x| mid + half * x).collect(),
            rule.1.iter().map(|w| half * w).collect(),
        )
    }
}

/// Tensor-product grid over a coordinate box.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    axes: Vec<(Vec<f64>, Vec<f64>)>,
    len: usize,
}

impl QuadratureGrid {
    pub fn new(domain: &[[f64; 2]], periodic: &[bool], per_axis: usize) -> Self {
        let axes: Vec<_> = domain
            .iter()
            .zip(periodic)
            .map(|(&d, &p)| axis_rule(per_axis, d, p))
            .collect();
        let len = axes.iter().map(|a| a.0.len()).product();
        QuadratureGrid { axes, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Point and product weight of node `index` (last axis fastest).
    pub fn node(&self, mut index: usize, point: &mut [f64]) -> f64 {
        let mut w = 1.0;
        for (k, (nodes, weights)) in self.axes.iter().enumerate().rev() {
            let m = nodes.len();
            let j = index % m;
            index /= m;
            point[k] = nodes[j];
            w *= weights[j];
        }
        w
    }

    pub fn weight_sum(&self) -> f64 {
        self.axes.iter().map(|a| a.1.iter().sum::<f64>()).product()
    }
}

/// Runs `f` on a pool of `workers` threads, inline when that is already the
/// current pool size.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let workers = workers.max(1);
    if rayon::current_num_threads() == workers {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Weighted sum of `density` over one grid.
fn grid_sum<S, F>(chart: &S, chart_index: usize, grid: &QuadratureGrid, density: &F) -> Result<f64>
where
    S: MetricSource + ?Sized,
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    let n = chart.dim();
    let eval = |i: usize| -> Result<f64> {
        let mut x = vec![0.0; n];
        let w = grid.node(i, &mut x);
        let pu = chart.weight(&x)?;
        if pu == 0.0 {
            return Ok(0.0);
        }
        Ok(w * pu * density(chart_index, &x)?)
    };
    let values: Vec<Result<f64>> = if rayon::current_num_threads() > 1 {
        (0..grid.len()).into_par_iter().map(eval).collect()
    } else {
        (0..grid.len()).map(eval).collect()
    };
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&values))
}

/// Integrates a density (already including the volume element) over the
/// atlas, doubling the per-axis node count until converged.
pub fn integrate_density<S, F>(atlas: &[&S], opts: &QuadratureOptions, density: F) -> Result<Integral>
where
    S: MetricSource + ?Sized,
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    with_workers(opts.workers, || {
        let mut total = Integral {
            value: 0.0,
            error_estimate: 0.0,
            nodes: 0,
        };
        let mut parts = Vec::with_capacity(atlas.len());
        for (ci, chart) in atlas.iter().enumerate() {
            let part = integrate_chart(*chart, ci, opts, &density)?;
            total.error_estimate += part.error_estimate;
            total.nodes += part.nodes;
            parts.push(part.value);
        }
        total.value = pairwise_sum(&parts);
        Ok(total)
    })
}

fn integrate_chart<S, F>(chart: &S, ci: usize, opts: &QuadratureOptions, density: &F) -> Result<Integral>
where
    S: MetricSource + ?Sized,
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    let d = chart.dim() as u32;
    let mut m = opts.initial_nodes.max(2);
    let nodes_for = |m: usize| m.checked_pow(d).unwrap_or(usize::MAX);
    if nodes_for(m) > opts.max_nodes {
        return Err(LkError::NonConvergence {
            delta: f64::INFINITY,
            nodes: nodes_for(m),
            context: Some("initial grid exceeds the node cap".into()),
        });
    }
    let mut prev = grid_sum(chart, ci, &QuadratureGrid::new(chart.domain(), chart.periodic(), m), density)?;
    loop {
        let next_m = 2 * m;
        if nodes_for(next_m) > opts.max_nodes {
            return Err(LkError::NonConvergence {
                delta: f64::NAN,
                nodes: nodes_for(m),
                context: Some("node cap reached before convergence".into()),
            });
        }
        let grid = QuadratureGrid::new(chart.domain(), chart.periodic(), next_m);
        let value = grid_sum(chart, ci, &grid, density)?;
        let delta = (value - prev).abs();
        if delta <= QuadratureOptions::tolerance(value) {
            return Ok(Integral {
                value,
                error_estimate: delta,
                nodes: grid.len(),
            });
        }
        if !value.is_finite() {
            return Err(LkError::NonConvergence {
                delta,
                nodes: grid.len(),
                context: Some("non-finite integrand".into()),
            });
        }
        prev = value;
        m = next_m;
    }
}

/// √det g at a point from a row-major metric matrix.
pub fn sqrt_det(g: &[f64], n: usize) -> Result<f64> {
    let d = crate::blocklin::det(&crate::blocklin::Mat::from_rows(n, n, g.to_vec()));
    if !(d > 0.0) {
        return Err(LkError::NotPositiveDefinite { point: vec![] });
    }
    Ok(d.sqrt())
}

/// ∫ field dvol over the atlas.
pub fn integrate<S, F>(atlas: &[&S], opts: &QuadratureOptions, field: F) -> Result<Integral>
where
    S: MetricSource + ?Sized,
    F: Fn(usize, &[f64]) -> Result<f64> + Sync,
{
    integrate_density(atlas, opts, |ci, x| {
        let chart = atlas[ci];
        let g = chart.metric_matrix(x)?;
        let vol = sqrt_det(&g, chart.dim()).map_err(|_| LkError::NotPositiveDefinite {
            point: x.to_vec(),
        })?;
        Ok(field(ci, x)? * vol)
    })
}

/// Riemannian volume of the atlas.
pub fn volume<S: MetricSource + ?Sized>(atlas: &[&S], opts: &QuadratureOptions) -> Result<Integral> {
    integrate(atlas, opts, |_, _| Ok(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metricfield::Chart;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for m in [1, 2, 5, 16, 64, 257] {
            let r = gauss_legendre(m);
            assert!((r.1.iter().sum::<f64>() - 2.0).abs() < 1e-13, "m={m}");
            assert!(r.1.iter().all(|&w| w > 0.0));
            assert!(r.0.iter().all(|&x| x.abs() < 1.0));
            // exact for x^(2m-2)
            let k = 2 * m as i32 - 2;
            let q: f64 = r.0.iter().zip(r.1.iter()).map(|(x, w)| w * x.powi(k)).sum();
            assert!((q - 2.0 / (k as f64 + 1.0)).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn grid_weights_sum_to_measure() {
        let g = QuadratureGrid::new(&[[0.0, PI], [0.0, TAU], [-1.0, 2.0]], &[false, true, false], 7);
        assert!((g.weight_sum() / (PI * TAU * 3.0) - 1.0).abs() < 1e-12);
        assert_eq!(g.len(), 343);
    }

    fn sphere() -> Chart {
        Chart::diagonal(vec![[0.0, PI], [0.0, TAU]], vec![false, true], &["1", "sin(x0)^2"]).unwrap()
    }

    #[test]
    fn sphere_area() {
        let s = sphere();
        let v = volume(&[&s], &QuadratureOptions::default()).unwrap();
        assert!((v.value - 4.0 * PI).abs() < 1e-8, "{v:?}");
    }

    #[test]
    fn flat_torus_area_is_exact() {
        let t = Chart::diagonal(vec![[0.0, TAU]; 2], vec![true; 2], &["1", "1"]).unwrap();
        for m in [1, 2, 3, 8] {
            let g = QuadratureGrid::new(t.domain(), t.periodic(), m);
            assert!((g.weight_sum() - 4.0 * PI * PI).abs() < 1e-12);
        }
        let v = volume(&[&t], &QuadratureOptions::default()).unwrap();
        assert_eq!(v.error_estimate, 0.0);
        assert!((v.value - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let s = Chart::diagonal(
            vec![[0.0, PI], [0.0, TAU]],
            vec![false, true],
            &["1+0.1*cos(x1)", "sin(x0)^2*(2+sin(x1))"],
        )
        .unwrap();
        let f = |_: usize, x: &[f64]| Ok(x[0].cos().powi(2) + x[1].sin());
        let base = integrate(&[&s], &QuadratureOptions::default(), f).unwrap();
        for w in [2, 8] {
            let v = integrate(&[&s], &QuadratureOptions::default().with_workers(w), f).unwrap();
            assert_eq!(v.value.to_bits(), base.value.to_bits());
        }
    }

    #[test]
    fn node_cap_reports_non_convergence() {
        let s = sphere();
        let opts = QuadratureOptions {
            max_nodes: 300,
            ..Default::default()
        };
        assert!(matches!(
            volume(&[&s], &opts),
            Err(LkError::NonConvergence { .. })
        ));
    }
}
