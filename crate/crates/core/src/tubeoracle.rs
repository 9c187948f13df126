//! Monte-Carlo volumes of Euclidean ε-neighbourhoods of embedded manifolds.
//!
//! The surface is represented by a point cloud on a cell-centred parameter
//! grid whose covering radius ρ is at most ε/4.  A sample y is inside when
//! some cloud point lies within ε, outside when every cloud point is farther
//! than ε + ρ, and otherwise its distance is refined by a damped Newton
//! closest-point solve started from the nearest cloud point.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocklin::{Ldlt, Mat};
use crate::error::{LkError, Result};
use crate::metricfield::{parse_expr, Expr, Jet2, MAX_DIM};
use crate::quadrature::with_workers;
use crate::rng::Rng;

/// Minimum sample count accepted by [`tube_volume_mc`].
pub const MIN_SAMPLES: u64 = 100_000;
const BATCH: u64 = 1 << 16;
const MAX_CLOUD: usize = 4_000_000;

/// Volume of the unit j-ball.
pub fn ball_volume(j: usize) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / j as f64 * ball_volume(j - 2),
    }
}

/// Coefficients c_k of ε^k (k = 0..=ambient) of Σ_i κ_{L−i} V_i ε^{L−i}.
pub fn steiner_coefficients(v: &[f64], ambient: usize) -> Result<Vec<f64>> {
    let n = v.len().saturating_sub(1);
    if v.is_empty() || ambient < n {
        return Err(LkError::invalid(format!(
            "ambient dimension {ambient} below manifold dimension {n}"
        )));
    }
    let mut c = vec![0.0; ambient + 1];
    for (i, &vi) in v.iter().enumerate() {
        c[ambient - i] = ball_volume(ambient - i) * vi;
    }
    Ok(c)
}

/// Tube volume predicted by the Steiner–Weyl polynomial.
pub fn steiner_eval(v: &[f64], eps: f64, ambient: usize) -> Result<f64> {
    let c = steiner_coefficients(v, ambient)?;
    Ok(c.iter().rev().fold(0.0, |acc, ck| acc * eps + ck))
}

/// A parametrised submanifold of R^L.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    ambient: usize,
    domain: Vec<[f64; 2]>,
    periodic: Vec<bool>,
    coords: Vec<Expr>,
    reach: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    /// Ambient dimension L.
    pub dim: usize,
    pub domain: Vec<[f64; 2]>,
    pub periodic: Vec<bool>,
    pub coords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach: Option<f64>,
}

impl Embedding {
    pub fn new(
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        coords: &[&str],
        reach: Option<f64>,
    ) -> Result<Embedding> {
        Embedding::from_file(&EmbeddingFile {
            dim: coords.len(),
            domain,
            periodic,
            coords: coords.iter().map(|s| s.to_string()).collect(),
            reach,
        })
    }

    pub fn from_file(file: &EmbeddingFile) -> Result<Embedding> {
        let n = file.domain.len();
        if n == 0 || n > MAX_DIM || file.periodic.len() != n {
            return Err(LkError::invalid("embedding domain and periodic flags must have equal length 1..=6"));
        }
        if file.coords.len() != file.dim || file.dim < n {
            return Err(LkError::invalid(format!(
                "expected {} coordinate functions with ambient dimension at least {n}",
                file.dim
            )));
        }
        if file.domain.iter().any(|[a, b]| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(LkError::invalid("embedding domain intervals must be finite and non-empty"));
        }
        if let Some(r) = file.reach {
            if !(r > 0.0) {
                return Err(LkError::invalid("reach must be positive"));
            }
        }
        let coords = file
            .coords
            .iter()
            .map(|s| parse_expr(s, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Embedding {
            ambient: file.dim,
            domain: file.domain.clone(),
            periodic: file.periodic.clone(),
            coords,
            reach: file.reach,
        })
    }

    pub fn from_json(text: &str) -> Result<Embedding> {
        let file: EmbeddingFile =
            serde_json::from_str(text).map_err(|e| LkError::invalid(format!("embedding file: {e}")))?;
        Embedding::from_file(&file)
    }

    pub fn to_file(&self) -> EmbeddingFile {
        EmbeddingFile {
            dim: self.ambient,
            domain: self.domain.clone(),
            periodic: self.periodic.clone(),
            coords: self.coords.iter().map(|e| e.to_string()).collect(),
            reach: self.reach,
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn reach(&self) -> Option<f64> {
        self.reach
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.coords.iter().map(|c| c.eval(u)).collect()
    }

    fn jets(&self, u: &[f64]) -> Result<Vec<Jet2>> {
        self.coords.iter().map(|c| c.eval_jet2(u)).collect()
    }

    /// Pullback metric JᵀJ at parameter `u`.
    pub fn induced_metric(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let jets = self.jets(u)?;
        let mut g = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                g[p * n + q] = jets.iter().map(|j| j.grad(p) * j.grad(q)).sum();
            }
        }
        Ok(g)
    }

    /// Wraps periodic parameters and clamps the rest into the domain.
    fn normalize(&self, u: &mut [f64]) {
        for (k, x) in u.iter_mut().enumerate() {
            let [a, b] = self.domain[k];
            if self.periodic[k] {
                *x = a + (*x - a).rem_euclid(b - a);
            } else {
                *x = x.clamp(a, b);
            }
        }
    }
}

/// Cell-centred sample of the embedding with a covering-radius bound.
#[derive(Debug, Clone)]
pub struct SurfaceCloud {
    ambient: usize,
    dim: usize,
    points: Vec<f64>,
    params: Vec<f64>,
    covering_radius: f64,
}

impl SurfaceCloud {
    /// Samples the embedding so every surface point lies within `rho` of
    /// some cloud point.
    pub fn build(emb: &Embedding, rho: f64) -> Result<SurfaceCloud> {
        if !(rho > 0.0) {
            return Err(LkError::invalid("covering radius must be positive"));
        }
        let n = emb.dim();
        // bound on |∂_k X| from a probe grid, with slack for variation between probes
        let probe = 48usize;
        let mut max_speed = vec![0.0f64; n];
        let mut u = vec![0.0; n];
        for idx in 0..probe.pow(n as u32) {
            let mut r = idx;
            for k in (0..n).rev() {
                let [a, b] = emb.domain[k];
                u[k] = a + (b - a) * ((r % probe) as f64 / (probe - 1) as f64);
                r /= probe;
            }
            let jets = emb.jets(&u)?;
            for (k, s) in max_speed.iter_mut().enumerate() {
                let speed = jets.iter().map(|j| j.grad(k).powi(2)).sum::<f64>().sqrt();
                *s = s.max(speed);
            }
        }
        // half a cell along each axis moves the image by at most speed·h/2
        let counts: Vec<usize> = (0..n)
            .map(|k| {
                let [a, b] = emb.domain[k];
                let need = 1.25 * n as f64 * max_speed[k] * (b - a) / (2.0 * rho);
                (need.ceil() as usize).max(1)
            })
            .collect();
        let total: usize = counts.iter().product();
        if total > MAX_CLOUD {
            return Err(LkError::invalid(format!(
                "surface cloud of {total} points exceeds {MAX_CLOUD}; use a larger eps"
            )));
        }
        let mut points = Vec::with_capacity(total * emb.ambient);
        let mut params = Vec::with_capacity(total * n);
        for idx in 0..total {
            let mut r = idx;
            for k in (0..n).rev() {
                let [a, b] = emb.domain[k];
                let m = counts[k];
                u[k] = a + (b - a) * ((r % m) as f64 + 0.5) / m as f64;
                r /= m;
            }
            let jets = emb.jets(&u)?;
            check_immersion(&jets, &u)?;
            points.extend(jets.iter().map(|j| j.value()));
            params.extend_from_slice(&u);
        }
        Ok(SurfaceCloud {
            ambient: emb.ambient,
            dim: n,
            points,
            params,
            covering_radius: rho,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.ambient
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.ambient..(k + 1) * self.ambient]
    }

    fn param(&self, k: usize) -> &[f64] {
        &self.params[k * self.dim..(k + 1) * self.dim]
    }

    /// Axis-aligned bounding box of the cloud.
    pub fn bounds(&self) -> Vec<[f64; 2]> {
        let mut b = vec![[f64::INFINITY, f64::NEG_INFINITY]; self.ambient];
        for k in 0..self.len() {
            for (d, &x) in self.point(k).iter().enumerate() {
                b[d][0] = b[d][0].min(x);
                b[d][1] = b[d][1].max(x);
            }
        }
        b
    }
}

fn check_immersion(jets: &[Jet2], u: &[f64]) -> Result<()> {
    let n = u.len();
    let g = Mat::from_fn(n, n, |p, q| jets.iter().map(|j| j.grad(p) * j.grad(q)).sum());
    let scale = (0..n).map(|p| g[(p, p)]).fold(0.0, f64::max);
    let ok = Ldlt::factor(&g)
        .map(|f| f.diagonal().iter().all(|&d| d > 1e-20 * scale.max(1e-300)))
        .unwrap_or(false);
    if ok && scale > 0.0 {
        Ok(())
    } else {
        Err(LkError::DegenerateJacobian { params: u.to_vec() })
    }
}

/// Uniform cell grid over a box holding cloud point indices.  Queries reach
/// two cells in every direction, so radii up to twice the cell size are exact.
struct CellGrid {
    origin: Vec<f64>,
    size: f64,
    shape: Vec<usize>,
    start: Vec<u32>,
    items: Vec<u32>,
    neighbours: Vec<Vec<isize>>,
}

impl CellGrid {
    fn new(cloud: &SurfaceCloud, bounds: &[[f64; 2]], size: f64) -> CellGrid {
        let l = cloud.ambient;
        let origin: Vec<f64> = bounds.iter().map(|b| b[0]).collect();
        let shape: Vec<usize> = bounds
            .iter()
            .map(|b| (((b[1] - b[0]) / size).floor() as usize + 1).max(1))
            .collect();
        let cells: usize = shape.iter().product();
        let mut counts = vec![0u32; cells + 1];
        let cell_of: Vec<usize> = (0..cloud.len())
            .map(|k| {
                let c = Self::locate(&origin, size, &shape, cloud.point(k)).expect("cloud inside bounds");
                counts[c + 1] += 1;
                c
            })
            .collect();
        for c in 0..cells {
            counts[c + 1] += counts[c];
        }
        let start = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; cloud.len()];
        for (k, &c) in cell_of.iter().enumerate() {
            items[fill[c] as usize] = k as u32;
            fill[c] += 1;
        }
        // offsets within two cells, nearest first
        let mut neighbours = vec![vec![0isize; l]];
        for d in 0..l {
            let mut next = Vec::new();
            for off in &neighbours {
                for step in -2isize..=2 {
                    let mut o = off.clone();
                    o[d] = step;
                    next.push(o);
                }
            }
            neighbours = next;
        }
        neighbours.sort_by_key(|o| o.iter().map(|v| v * v).sum::<isize>());
        CellGrid {
            origin,
            size,
            shape,
            start,
            items,
            neighbours,
        }
    }

    fn locate(origin: &[f64], size: f64, shape: &[usize], y: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for d in 0..shape.len() {
            let c = ((y[d] - origin[d]) / size).floor();
            if c < 0.0 || c >= shape[d] as f64 {
                return None;
            }
            idx = idx * shape[d] + c as usize;
        }
        Some(idx)
    }
}

const INSIDE: u32 = u32::MAX;
const OUTSIDE: u32 = u32::MAX - 1;
/// Mixed cell without a candidate list.
const UNLISTED: u32 = u32::MAX - 2;
const MAX_CANDIDATES: usize = 60_000_000;

struct TubeClassifier<'a> {
    emb: &'a Embedding,
    cloud: &'a SurfaceCloud,
    grid: CellGrid,
    eps: f64,
    /// Per cell of a finer grid over the sampling box: INSIDE, OUTSIDE,
    /// UNLISTED or the index of its candidate list.
    cells: Vec<u32>,
    cell_origin: Vec<f64>,
    cell_size: f64,
    cell_shape: Vec<usize>,
    /// Cloud points that can be nearest to some point of a mixed cell.
    cand_start: Vec<u32>,
    cand: Vec<u32>,
}

impl<'a> TubeClassifier<'a> {
    fn new(emb: &'a Embedding, cloud: &'a SurfaceCloud, bounds: &[[f64; 2]], eps: f64) -> TubeClassifier<'a> {
        let l = bounds.len();
        let extent = bounds.iter().map(|[a, b]| b - a).fold(0.0, f64::max);
        let mut cell_size = 0.25 * eps;
        while bounds.iter().map(|[a, b]| ((b - a) / cell_size).ceil()).product::<f64>() > (1u64 << 24) as f64 {
            cell_size *= 1.25;
        }
        let cell_size = cell_size.min(extent);
        let half_diag = 0.5 * cell_size * (l as f64).sqrt();
        let rho = cloud.covering_radius;
        let outer = eps + rho + half_diag;
        let grid = CellGrid::new(cloud, bounds, 0.5 * (outer + 2.0 * half_diag));
        let cell_shape: Vec<usize> = bounds
            .iter()
            .map(|[a, b]| (((b - a) / cell_size).ceil() as usize).max(1))
            .collect();
        let cell_origin: Vec<f64> = bounds.iter().map(|b| b[0]).collect();
        let mut tc = TubeClassifier {
            emb,
            cloud,
            grid,
            eps,
            cells: Vec::new(),
            cell_origin,
            cell_size,
            cell_shape,
            cand_start: vec![0],
            cand: Vec::new(),
        };
        let total: usize = tc.cell_shape.iter().product();
        let inner = (eps - half_diag).max(0.0);
        let center = |idx: usize| {
            let mut c = [0.0; MAX_DIM];
            let mut r = idx;
            for d in (0..l).rev() {
                let m = tc.cell_shape[d];
                c[d] = tc.cell_origin[d] + ((r % m) as f64 + 0.5) * tc.cell_size;
                r /= m;
            }
            c
        };
        // (state, nearest distance) per cell
        let classify = |idx: usize| -> (u32, f64) {
            let c = center(idx);
            let (_, d2) = tc.nearest(&c[..l], inner * inner, outer * outer);
            let d = d2.sqrt();
            if d + half_diag <= eps {
                (INSIDE, d)
            } else if d - rho - half_diag > eps {
                (OUTSIDE, d)
            } else {
                (UNLISTED, d)
            }
        };
        let states: Vec<(u32, f64)> = if rayon::current_num_threads() > 1 {
            (0..total).into_par_iter().map(classify).collect()
        } else {
            (0..total).map(classify).collect()
        };
        // any point y of the cell has a cloud point within d + half_diag, so
        // its nearest cloud point lies within d + 2·half_diag of the centre
        let lists = |idx: usize| -> Vec<u32> {
            let c = center(idx);
            let r = states[idx].1 + 2.0 * half_diag;
            tc.within(&c[..l], r * r)
        };
        let mixed: Vec<usize> = (0..total).filter(|&i| states[i].0 == UNLISTED).collect();
        let candidate_lists: Vec<Vec<u32>> = if rayon::current_num_threads() > 1 {
            mixed.par_iter().map(|&i| lists(i)).collect()
        } else {
            mixed.iter().map(|&i| lists(i)).collect()
        };
        let mut cells: Vec<u32> = states.iter().map(|s| s.0).collect();
        if candidate_lists.iter().map(Vec::len).sum::<usize>() <= MAX_CANDIDATES {
            for (m, (&i, list)) in mixed.iter().zip(candidate_lists).enumerate() {
                cells[i] = m as u32;
                tc.cand.extend(list);
                tc.cand_start.push(tc.cand.len() as u32);
            }
        }
        tc.cells = cells;
        tc
    }

    /// Indices of cloud points within squared distance `r2` of `y`.
    fn within(&self, y: &[f64], r2: f64) -> Vec<u32> {
        let l = y.len();
        let g = &self.grid;
        let mut out = Vec::new();
        'cells: for off in &g.neighbours {
            let mut idx = 0usize;
            let mut gap2 = 0.0;
            for d in 0..l {
                let c = ((y[d] - g.origin[d]) / g.size).floor() as isize + off[d];
                if c < 0 || c >= g.shape[d] as isize {
                    continue 'cells;
                }
                idx = idx * g.shape[d] + c as usize;
                let lo = g.origin[d] + c as f64 * g.size;
                let gap = (lo - y[d]).max(y[d] - lo - g.size).max(0.0);
                gap2 += gap * gap;
            }
            if gap2 > r2 {
                continue;
            }
            for &k in &g.items[g.start[idx] as usize..g.start[idx + 1] as usize] {
                let p = self.cloud.point(k as usize);
                let d2: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 <= r2 {
                    out.push(k);
                }
            }
        }
        out
    }

    /// Nearest cloud point within `limit2` (squared); stops early once one is
    /// within `early2`.  Returns `(usize::MAX, ∞)` when none is in range.
    fn nearest(&self, y: &[f64], early2: f64, limit2: f64) -> (usize, f64) {
        let l = y.len();
        let g = &self.grid;
        let mut cell = [0isize; MAX_DIM];
        for d in 0..l {
            cell[d] = ((y[d] - g.origin[d]) / g.size).floor() as isize;
        }
        let mut best = f64::INFINITY;
        let mut best_k = usize::MAX;
        'cells: for off in &g.neighbours {
            let mut idx = 0usize;
            let mut gap2 = 0.0;
            for d in 0..l {
                let c = cell[d] + off[d];
                if c < 0 || c >= g.shape[d] as isize {
                    continue 'cells;
                }
                idx = idx * g.shape[d] + c as usize;
                let lo = g.origin[d] + c as f64 * g.size;
                let gap = if y[d] < lo {
                    lo - y[d]
                } else if y[d] > lo + g.size {
                    y[d] - lo - g.size
                } else {
                    0.0
                };
                gap2 += gap * gap;
            }
            if gap2 > limit2 || gap2 >= best {
                continue;
            }
            for &k in &g.items[g.start[idx] as usize..g.start[idx + 1] as usize] {
                let p = self.cloud.point(k as usize);
                let mut d2 = 0.0;
                for d in 0..l {
                    let t = p[d] - y[d];
                    d2 += t * t;
                }
                if d2 < best {
                    best = d2;
                    best_k = k as usize;
                    if d2 <= early2 {
                        return (best_k, best);
                    }
                }
            }
        }
        if best > limit2 {
            (usize::MAX, f64::INFINITY)
        } else {
            (best_k, best)
        }
    }

    fn inside(&self, y: &[f64]) -> bool {
        let l = y.len();
        let mut idx = 0;
        for d in 0..l {
            let c = (((y[d] - self.cell_origin[d]) / self.cell_size).floor().max(0.0) as usize)
                .min(self.cell_shape[d] - 1);
            idx = idx * self.cell_shape[d] + c;
        }
        let eps2 = self.eps * self.eps;
        let outer = self.eps + self.cloud.covering_radius;
        let (k, d2) = match self.cells[idx] {
            INSIDE => return true,
            OUTSIDE => return false,
            UNLISTED => self.nearest(y, eps2, outer * outer),
            m => {
                let list = &self.cand[self.cand_start[m as usize] as usize..self.cand_start[m as usize + 1] as usize];
                let mut best = f64::INFINITY;
                let mut best_k = usize::MAX;
                for &k in list {
                    let p = self.cloud.point(k as usize);
                    let mut d2 = 0.0;
                    for d in 0..l {
                        let t = p[d] - y[d];
                        d2 += t * t;
                    }
                    if d2 < best {
                        if d2 <= eps2 {
                            return true;
                        }
                        best = d2;
                        best_k = k as usize;
                    }
                }
                (best_k, best)
            }
        };
        if d2 <= eps2 {
            return true;
        }
        if k == usize::MAX || d2 > outer * outer {
            return false;
        }
        let d = d2.sqrt();
        let refined = closest_distance(self.emb, y, self.cloud.param(k), self.eps).unwrap_or(d);
        refined.min(d) <= self.eps
    }
}

/// Local minimum of |X(u) − y| by damped Newton from `start`; returns as
/// soon as the distance is known to be at most `stop_below`.
fn closest_distance(emb: &Embedding, y: &[f64], start: &[f64], stop_below: f64) -> Option<f64> {
    let stop2 = stop_below * stop_below;
    let n = emb.dim();
    let mut u = start.to_vec();
    let mut lambda = 1e-6;
    let value = |u: &[f64]| -> Option<f64> {
        let x = emb.point(u).ok()?;
        Some(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
    };
    let mut f = value(&u)?;
    for _ in 0..50 {
        let jets = emb.jets(&u).ok()?;
        let mut grad = vec![0.0; n];
        let mut hess = Mat::zeros(n, n);
        for (k, j) in jets.iter().enumerate() {
            let r = j.value() - y[k];
            for p in 0..n {
                grad[p] += r * j.grad(p);
                for q in 0..n {
                    hess[(p, q)] += j.grad(p) * j.grad(q) + r * j.hess(p, q);
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let damped = Mat::from_fn(n, n, |p, q| {
                hess[(p, q)] + if p == q { lambda * (1.0 + hess[(p, p)].abs()) } else { 0.0 }
            });
            let step = match Ldlt::factor(&damped) {
                Ok(fac) if fac.is_positive_definite() => fac.solve(&grad),
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - s).collect();
            emb.normalize(&mut trial);
            let ft = value(&trial)?;
            if ft <= f {
                let done = ft <= stop2
                    || f - ft <= 1e-15 * f.max(1e-300)
                    || step.iter().all(|s| s.abs() < 1e-12);
                u = trial;
                f = ft;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if done {
                    return Some(f.sqrt());
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some(f.sqrt())
}

/// Estimate and binomial standard error of a tube volume.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeEstimate {
    pub estimate: f64,
    pub sigma: f64,
    pub eps: f64,
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    pub box_volume: f64,
    pub cloud_points: usize,
    pub covering_radius: f64,
}

/// Monte-Carlo volume of the ε-tube around `emb`.
pub fn tube_volume_mc(emb: &Embedding, eps: f64, samples: u64, seed: u64, workers: usize) -> Result<TubeEstimate> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(LkError::invalid(format!("eps must be a non-negative number, got {eps}")));
    }
    if samples < MIN_SAMPLES {
        return Err(LkError::invalid(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    if let Some(reach) = emb.reach {
        if eps >= reach {
            return Err(LkError::AboveReach { eps, reach });
        }
    }
    if eps == 0.0 {
        return Ok(TubeEstimate {
            estimate: 0.0,
            sigma: 0.0,
            eps,
            samples,
            seed,
            hits: 0,
            box_volume: 0.0,
            cloud_points: 0,
            covering_radius: 0.0,
        });
    }
    let rho = f64::min(0.25 * eps, 0.02);
    let cloud = SurfaceCloud::build(emb, rho)?;
    let pad = eps + rho;
    let bounds: Vec<[f64; 2]> = cloud.bounds().iter().map(|[a, b]| [a - pad, b + pad]).collect();
    let box_volume: f64 = bounds.iter().map(|[a, b]| b - a).product();
    let l = emb.ambient;
    let batches = samples.div_ceil(BATCH);
    let count_batch = |classifier: &TubeClassifier, b: u64| -> u64 {
        let mut rng = Rng::substream(seed, b);
        let todo = BATCH.min(samples - b * BATCH);
        let mut y = [0.0; MAX_DIM];
        let mut hits = 0;
        for _ in 0..todo {
            for d in 0..l {
                y[d] = rng.range(bounds[d][0], bounds[d][1]);
            }
            if classifier.inside(&y[..l]) {
                hits += 1;
            }
        }
        hits
    };
    let hits: u64 = with_workers(workers, || {
        let classifier = TubeClassifier::new(emb, &cloud, &bounds, eps);
        let count_batch = |b: u64| count_batch(&classifier, b);
        if rayon::current_num_threads() > 1 {
            (0..batches).into_par_iter().map(count_batch).sum()
        } else {
            (0..batches).map(count_batch).sum()
        }
    });
    let p = hits as f64 / samples as f64;
    Ok(TubeEstimate {
        estimate: box_volume * p,
        sigma: box_volume * (p * (1.0 - p) / samples as f64).sqrt(),
        eps,
        samples,
        seed,
        hits,
        box_volume,
        cloud_points: cloud.len(),
        covering_radius: rho,
    })
}

/// One fitted coefficient of ε^power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedCoefficient {
    pub power: usize,
    pub value: f64,
    pub sigma: f64,
}

/// Weighted least-squares fit of tube volumes to Σ c_k ε^k over the powers
/// L − i with n − i even.
pub fn fit_tube_polynomial(
    estimates: &[TubeEstimate],
    manifold_dim: usize,
    ambient: usize,
) -> Result<Vec<FittedCoefficient>> {
    if ambient < manifold_dim {
        return Err(LkError::invalid("ambient dimension below manifold dimension"));
    }
    let powers: Vec<usize> = (0..=manifold_dim)
        .filter(|i| (manifold_dim - i) % 2 == 0)
        .map(|i| ambient - i)
        .collect();
    let k = powers.len();
    if estimates.len() < k || estimates.iter().any(|e| !(e.sigma > 0.0)) {
        return Err(LkError::invalid(format!(
            "need at least {k} estimates with positive sigma"
        )));
    }
    let mut normal = Mat::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for e in estimates {
        let w = 1.0 / (e.sigma * e.sigma);
        let basis: Vec<f64> = powers.iter().map(|&p| e.eps.powi(p as i32)).collect();
        for a in 0..k {
            rhs[a] += w * basis[a] * e.estimate;
            for b in 0..k {
                normal[(a, b)] += w * basis[a] * basis[b];
            }
        }
    }
    let cov = crate::blocklin::invert(&normal)?;
    let sol: Vec<f64> = (0..k).map(|a| (0..k).map(|b| cov[(a, b)] * rhs[b]).sum()).collect();
    Ok(powers
        .iter()
        .enumerate()
        .map(|(a, &power)| FittedCoefficient {
            power,
            value: sol[a],
            sigma: cov[(a, a)].sqrt(),
        })
        .collect())
}
