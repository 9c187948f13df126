//! Riemannian submersions in product charts and their fiber collapse.
//!
//! The collapsed metric g(ε) equals ε·g on vertical vectors and g on their
//! g-orthogonal complement.  In chart coordinates, with g̃ the fiber block,
//!
//! ```text
//! g(ε)_ij = ε g_ij
//! g(ε)_iα = ε g_iα
//! g(ε)_αβ = g_αβ − (1−ε) g_αi g̃^ij g_jβ
//! ```
//!
//! which is evaluated in jet arithmetic so derivatives of the point-dependent
//! projector are exact.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::blocklin::{BlockSplit, Mat};
use crate::error::{LkError, Result};
use crate::fit::{loglog_slope, richardson_first_order};
use crate::metricfield::{require_positive_definite, Chart, ChartFile, Jet2, MetricJet, MetricSource};
use crate::quadrature::{Integral, QuadratureOptions};
use crate::rng::stratified_points;
use crate::tensorcore::{curvature_bundle, sectional, CurvatureBundle};
use crate::weylsum::{intrinsic_volume, CouplingTable};

/// Residual bound for [`validate`].
pub const VALIDATION_TOLERANCE: f64 = 1e-8;

/// Default collapse schedule 2⁻², …, 2⁻⁹.
pub fn default_schedule() -> Vec<f64> {
    (2..=9).map(|k| 2f64.powi(-k)).collect()
}

/// A submersion given by a total chart, a base chart and a coordinate split.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmersionChart {
    total: Chart,
    base: Chart,
    split: BlockSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmersionFile {
    pub total_chart: ChartFile,
    pub base_chart: ChartFile,
    pub fiber_dims: Vec<usize>,
    pub base_dims: Vec<usize>,
}

impl SubmersionChart {
    pub fn new(total: Chart, base: Chart, split: BlockSplit) -> Result<SubmersionChart> {
        if split.dim() != total.dim() {
            return Err(LkError::invalid(format!(
                "split covers {} coordinates, total chart has {}",
                split.dim(),
                total.dim()
            )));
        }
        if base.dim() != split.base().len() {
            return Err(LkError::invalid(format!(
                "base chart has dimension {}, split has {} base coordinates",
                base.dim(),
                split.base().len()
            )));
        }
        for (k, &a) in split.base().iter().enumerate() {
            if total.domain()[a] != base.domain()[k] || total.periodic()[a] != base.periodic()[k] {
                return Err(LkError::invalid(format!(
                    "base coordinate {a} does not match base chart coordinate {k}"
                )));
            }
        }
        Ok(SubmersionChart { total, base, split })
    }

    pub fn from_file(file: &SubmersionFile) -> Result<SubmersionChart> {
        SubmersionChart::new(
            Chart::from_file(&file.total_chart)?,
            Chart::from_file(&file.base_chart)?,
            BlockSplit::new(file.fiber_dims.clone(), file.base_dims.clone())?,
        )
    }

    pub fn from_json(text: &str) -> Result<SubmersionChart> {
        let file: SubmersionFile =
            serde_json::from_str(text).map_err(|e| LkError::invalid(format!("submersion file: {e}")))?;
        SubmersionChart::from_file(&file)
    }

    pub fn to_file(&self) -> SubmersionFile {
        SubmersionFile {
            total_chart: self.total.to_file(),
            base_chart: self.base.to_file(),
            fiber_dims: self.split.fiber().to_vec(),
            base_dims: self.split.base().to_vec(),
        }
    }

    pub fn total(&self) -> &Chart {
        &self.total
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    pub fn split(&self) -> &BlockSplit {
        &self.split
    }

    pub fn fiber_dim(&self) -> usize {
        self.split.fiber().len()
    }

    pub fn base_dim(&self) -> usize {
        self.split.base().len()
    }

    /// Coordinates of π(point) in the base chart.
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        self.split.base().iter().map(|&a| point[a]).collect()
    }

    /// The fiber through `point` as a chart in the fiber coordinates.
    pub fn fiber_slice(&self, point: &[f64]) -> FiberSlice<'_> {
        FiberSlice {
            sc: self,
            anchor: point.to_vec(),
            domain: self.split.fiber().iter().map(|&i| self.total.domain()[i]).collect(),
            periodic: self.split.fiber().iter().map(|&i| self.total.periodic()[i]).collect(),
        }
    }

    /// Total metric scaled by ε along the fibers.
    pub fn scaled(&self, eps: f64) -> Result<ScaledMetric<'_>> {
        if !(eps > 0.0) {
            return Err(LkError::invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(ScaledMetric { sc: self, eps })
    }

    fn point_in_domain(&self, fiber: &[f64], anchor: &[f64]) -> Vec<f64> {
        let mut x = anchor.to_vec();
        for (k, &i) in self.split.fiber().iter().enumerate() {
            x[i] = fiber[k];
        }
        x
    }
}

/// Coefficients of the horizontal lifts ξ_α = ∂_α + h^i_α ∂_i.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalLift {
    /// `h[i][α]`, fiber index first.
    pub h: Vec<Vec<f64>>,
    /// `xi[p][α]`: component p of ξ_α in the chart basis.
    pub xi: Vec<Vec<f64>>,
    /// max |g(ξ_α, ∂_i)|.
    pub orthogonality: f64,
}

pub fn horizontal_lift(sc: &SubmersionChart, point: &[f64]) -> Result<HorizontalLift> {
    let g = Mat::from_rows(sc.total.dim(), sc.total.dim(), sc.total.metric_matrix(point)?);
    let fib = sc.split.fiber();
    let bas = sc.split.base();
    let g_ff_inv = crate::blocklin::invert(&g.select(fib, fib))?;
    let n = g.rows();
    let mut h = vec![vec![0.0; bas.len()]; fib.len()];
    for (a, &alpha) in bas.iter().enumerate() {
        for i in 0..fib.len() {
            let mut acc = 0.0;
            for (j, &fj) in fib.iter().enumerate() {
                acc -= g[(alpha, fj)] * g_ff_inv[(j, i)];
            }
            h[i][a] = acc;
        }
    }
    let mut xi = vec![vec![0.0; bas.len()]; n];
    for (a, &alpha) in bas.iter().enumerate() {
        xi[alpha][a] = 1.0;
        for (i, &fi) in fib.iter().enumerate() {
            xi[fi][a] = h[i][a];
        }
    }
    let mut orthogonality: f64 = 0.0;
    for a in 0..bas.len() {
        for &fi in fib {
            let ip: f64 = (0..n).map(|p| xi[p][a] * g[(p, fi)]).sum();
            orthogonality = orthogonality.max(ip.abs());
        }
    }
    Ok(HorizontalLift { h, xi, orthogonality })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    /// max |⟨ξ_α, ξ_β⟩ − ĝ_αβ(π x)|.
    pub residual: f64,
    pub orthogonality: f64,
    /// max |g_αi g̃^ij g_jβ|: how far g(ε)_αβ departs from the literal block
    /// display, per unit of (1 − ε). Zero when the mixed block vanishes.
    pub naive_gap: f64,
    pub pass: bool,
}

/// Checks that dπ restricted to horizontal vectors is an isometry onto the
/// base metric at stratified sample points.
pub fn validate(sc: &SubmersionChart, sample_count: usize) -> ValidationReport {
    let points = stratified_points(sc.total.domain(), sample_count.max(1), 0x5eed);
    let mut residual: f64 = 0.0;
    let mut orthogonality: f64 = 0.0;
    let mut naive_gap: f64 = 0.0;
    for x in &points {
        match validate_point(sc, x) {
            Ok((r, o, gap)) => {
                residual = residual.max(r);
                orthogonality = orthogonality.max(o);
                naive_gap = naive_gap.max(gap);
            }
            Err(_) => residual = f64::INFINITY,
        }
    }
    ValidationReport {
        samples: points.len(),
        residual,
        orthogonality,
        naive_gap,
        pass: residual <= VALIDATION_TOLERANCE && orthogonality <= VALIDATION_TOLERANCE,
    }
}

fn validate_point(sc: &SubmersionChart, x: &[f64]) -> Result<(f64, f64, f64)> {
    let n = sc.total.dim();
    let g = Mat::from_rows(n, n, sc.total.metric_matrix(x)?);
    let lift = horizontal_lift(sc, x)?;
    let b = sc.base_dim();
    let g_hat = sc.base.metric_matrix(&sc.project(x))?;
    let mut residual: f64 = 0.0;
    for a in 0..b {
        for c in 0..b {
            let mut ip = 0.0;
            for p in 0..n {
                for q in 0..n {
                    ip += lift.xi[p][a] * g[(p, q)] * lift.xi[q][c];
                }
            }
            residual = residual.max((ip - g_hat[a * b + c]).abs());
        }
    }
    // the gap is linear in (1 − ε), so ε = 1/2 measures half of it
    let intrinsic = scale_metric(sc, x, 0.5)?.g_matrix();
    let naive = scale_metric_naive(sc, x, 0.5)?.g_matrix();
    let gap = intrinsic
        .iter()
        .zip(&naive)
        .map(|(a, b)| 2.0 * (a - b).abs())
        .fold(0.0, f64::max);
    Ok((residual, lift.orthogonality, gap))
}

/// Inverse of a small symmetric jet matrix by Gauss–Jordan elimination.
fn invert_jets(m: &[Jet2], k: usize) -> Result<Vec<Jet2>> {
    let dim = m[0].dim();
    let mut a = m.to_vec();
    let mut inv: Vec<Jet2> = (0..k * k)
        .map(|idx| Jet2::constant(dim, if idx / k == idx % k { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&r, &s| a[r * k + col].value().abs().total_cmp(&a[s * k + col].value().abs()))
            .unwrap_or(col);
        if a[piv * k + col].value() == 0.0 {
            return Err(LkError::Singular {
                condition: f64::INFINITY,
            });
        }
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
                inv.swap(piv * k + j, col * k + j);
            }
        }
        let d = a[col * k + col].recip();
        for j in 0..k {
            a[col * k + j] = &a[col * k + j] * &d;
            inv[col * k + j] = &inv[col * k + j] * &d;
        }
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = a[r * k + col];
            for j in 0..k {
                a[r * k + j] = &a[r * k + j] - &(&f * &a[col * k + j]);
                inv[r * k + j] = &inv[r * k + j] - &(&f * &inv[col * k + j]);
            }
        }
    }
    Ok(inv)
}

/// Jet of g(ε) at `point`.
pub fn scale_metric(sc: &SubmersionChart, point: &[f64], eps: f64) -> Result<MetricJet> {
    if !(eps > 0.0) {
        return Err(LkError::invalid(format!("eps must be positive, got {eps}")));
    }
    let mj = sc.total.metric_jet(point)?;
    if eps == 1.0 {
        return Ok(mj);
    }
    let fib = sc.split.fiber();
    let bas = sc.split.base();
    let nf = fib.len();
    let block: Vec<Jet2> = (0..nf * nf)
        .map(|idx| mj.component(fib[idx / nf], fib[idx % nf]))
        .collect();
    let inv = invert_jets(&block, nf)?;
    // u_α^j = g̃^{jk} g_kα, so the vertical part of ∂_α is u_α^j ∂_j
    let mut u = vec![Vec::with_capacity(nf); bas.len()];
    for (a, &alpha) in bas.iter().enumerate() {
        for j in 0..nf {
            let mut acc = Jet2::constant(mj.dim(), 0.0);
            for k in 0..nf {
                acc = &acc + &(&inv[j * nf + k] * &mj.component(fib[k], alpha));
            }
            u[a].push(acc);
        }
    }
    let mut pos = vec![usize::MAX; mj.dim()];
    for (a, &alpha) in bas.iter().enumerate() {
        pos[alpha] = a;
    }
    let out = MetricJet::from_components(mj.dim(), |q, r| {
        let c = mj.component(q, r);
        if sc.split.is_fiber(q) || sc.split.is_fiber(r) {
            return c.scale(eps);
        }
        let (a, b) = (pos[q], pos[r]);
        let mut vert = Jet2::constant(mj.dim(), 0.0);
        for j in 0..nf {
            vert = &vert + &(&mj.component(fib[j], bas[b]) * &u[a][j]);
        }
        &c - &vert.scale(1.0 - eps)
    });
    Ok(out)
}

/// Literal block scaling [[εg_ij, εg_iα], [εg_αi, g_αβ]], kept for comparison
/// with [`scale_metric`]; the two agree when the mixed block vanishes.
pub fn scale_metric_naive(sc: &SubmersionChart, point: &[f64], eps: f64) -> Result<MetricJet> {
    if !(eps > 0.0) {
        return Err(LkError::invalid(format!("eps must be positive, got {eps}")));
    }
    let mj = sc.total.metric_jet(point)?;
    Ok(MetricJet::from_components(mj.dim(), |q, r| {
        let c = mj.component(q, r);
        if sc.split.is_fiber(q) || sc.split.is_fiber(r) {
            c.scale(eps)
        } else {
            c
        }
    }))
}

/// The total chart carrying g(ε).
#[derive(Debug, Clone, Copy)]
pub struct ScaledMetric<'a> {
    sc: &'a SubmersionChart,
    eps: f64,
}

impl ScaledMetric<'_> {
    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl MetricSource for ScaledMetric<'_> {
    fn dim(&self) -> usize {
        self.sc.total.dim()
    }

    fn domain(&self) -> &[[f64; 2]] {
        self.sc.total.domain()
    }

    fn periodic(&self) -> &[bool] {
        self.sc.total.periodic()
    }

    fn metric_jet(&self, point: &[f64]) -> Result<MetricJet> {
        let mj = scale_metric(self.sc, point, self.eps)?;
        require_positive_definite(&mj.g_matrix(), mj.dim(), point)?;
        Ok(mj)
    }

    fn weight(&self, point: &[f64]) -> Result<f64> {
        self.sc.total.weight(point)
    }
}

/// The fiber through a fixed point, in the fiber coordinates.
#[derive(Debug, Clone)]
pub struct FiberSlice<'a> {
    sc: &'a SubmersionChart,
    anchor: Vec<f64>,
    domain: Vec<[f64; 2]>,
    periodic: Vec<bool>,
}

impl MetricSource for FiberSlice<'_> {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    fn metric_jet(&self, point: &[f64]) -> Result<MetricJet> {
        let x = self.sc.point_in_domain(point, &self.anchor);
        Ok(self.sc.total.metric_jet(&x)?.restrict(self.sc.split.fiber()))
    }
}

fn midpoint(domain: &[[f64; 2]]) -> Vec<f64> {
    domain.iter().map(|[a, b]| 0.5 * (a + b)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeScaling {
    pub eps: f64,
    /// max |det g(ε) / (ε^N det g) − 1|.
    pub max_relative_deviation: f64,
}

pub fn volume_scaling_check(sc: &SubmersionChart, eps: f64, sample_count: usize) -> Result<VolumeScaling> {
    let n = sc.total.dim();
    let nf = sc.fiber_dim() as i32;
    let mut worst: f64 = 0.0;
    for x in stratified_points(sc.total.domain(), sample_count.max(1), 0xd37) {
        let d0 = crate::blocklin::det(&Mat::from_rows(n, n, sc.total.metric_matrix(&x)?));
        let de = crate::blocklin::det(&Mat::from_rows(n, n, scale_metric(sc, &x, eps)?.g_matrix()));
        worst = worst.max((de / (eps.powi(nf) * d0) - 1.0).abs());
    }
    Ok(VolumeScaling {
        eps,
        max_relative_deviation: worst,
    })
}

/// Euler characteristic of the fiber through `point` by Gauss–Bonnet.
pub fn fiber_euler(sc: &SubmersionChart, point: &[f64], opts: &QuadratureOptions) -> Result<i64> {
    if sc.fiber_dim() % 2 == 1 {
        return Ok(0);
    }
    let slice = sc.fiber_slice(point);
    let v = intrinsic_volume(&[&slice], 0, opts)?.value;
    let rounded = v.round();
    if (v - rounded).abs() > 0.1 {
        return Err(LkError::NonIntegerEuler { value: v });
    }
    Ok(rounded as i64)
}

/// χ(Z)·V_i(B).
pub fn collapse_target(sc: &SubmersionChart, i: usize, opts: &QuadratureOptions) -> Result<f64> {
    let b = sc.base_dim();
    if i > b || (b - i) % 2 == 1 {
        return Ok(0.0);
    }
    let chi = fiber_euler(sc, &midpoint(sc.total.domain()), opts)?;
    if chi == 0 {
        return Ok(0.0);
    }
    Ok(chi as f64 * intrinsic_volume(&[&sc.base], i, opts)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub i: usize,
    pub eps_list: Vec<f64>,
    pub values: Vec<f64>,
    pub error_estimates: Vec<f64>,
    pub extrapolated_limit: Option<f64>,
    pub target: f64,
    pub slope: Option<f64>,
    pub complete: bool,
}

impl SweepRecord {
    /// |extrapolated − target| ≤ max(1e-3, 1e-2·|target|).
    pub fn pass(&self) -> bool {
        match self.extrapolated_limit {
            Some(l) => (l - self.target).abs() <= f64::max(1e-3, 1e-2 * self.target.abs()),
            None => false,
        }
    }
}

fn check_schedule(eps: &[f64], min_len: usize) -> Result<()> {
    if eps.len() < min_len {
        return Err(LkError::invalid(format!(
            "eps schedule needs at least {min_len} values, got {}",
            eps.len()
        )));
    }
    if eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(LkError::invalid("eps values must lie in (0, 1]"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LkError::invalid("eps schedule must be strictly decreasing"));
    }
    Ok(())
}

/// Runs V_i(M(ε)) over a decreasing schedule.  When `cancel` is raised the
/// sweep stops between ε values and returns the partial record.
pub fn collapse_sweep(
    sc: &SubmersionChart,
    i: usize,
    eps_schedule: &[f64],
    opts: &QuadratureOptions,
    cancel: Option<&AtomicBool>,
) -> Result<SweepRecord> {
    check_schedule(eps_schedule, 4)?;
    if i > sc.total.dim() {
        return Err(LkError::IndexOutOfRange {
            index: i,
            max: sc.total.dim(),
        });
    }
    let report = validate(sc, 64);
    if !report.pass {
        return Err(LkError::InvalidSubmersion {
            residual: report.residual.max(report.orthogonality),
        });
    }
    let target = collapse_target(sc, i, opts)?;
    let mut record = SweepRecord {
        i,
        eps_list: Vec::new(),
        values: Vec::new(),
        error_estimates: Vec::new(),
        extrapolated_limit: None,
        target,
        slope: None,
        complete: false,
    };
    for &eps in eps_schedule {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            break;
        }
        let scaled = sc.scaled(eps)?;
        let v: Integral = intrinsic_volume(&[&scaled], i, opts).map_err(|e| match e {
            LkError::NonConvergence { delta, nodes, .. } => LkError::NonConvergence {
                delta,
                nodes,
                context: Some(format!("eps = {eps}")),
            },
            other => other,
        })?;
        record.eps_list.push(eps);
        record.values.push(v.value);
        record.error_estimates.push(v.error_estimate);
    }
    record.complete = record.eps_list.len() == eps_schedule.len();
    record.extrapolated_limit = richardson_first_order(&record.eps_list, &record.values);
    if let Some(l) = record.extrapolated_limit {
        let floor = 1e-12 * l.abs().max(1.0);
        let resid: Vec<f64> = record
            .values
            .iter()
            .map(|v| {
                let r = (v - l).abs();
                if r <= floor {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        record.slope = loglog_slope(&record.eps_list, &resid);
    }
    Ok(record)
}

/// Largest component of R^{..}_{..} over index tuples chosen from `idx`.
fn mixed_deviation(
    bundle: &CurvatureBundle,
    idx: &[usize],
    reference: &CurvatureBundle,
    scale: f64,
) -> f64 {
    let k = idx.len();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for d in 0..k {
                    let v = scale * bundle.r_mixed(idx[a], idx[b], idx[c], idx[d]);
                    worst = worst.max((v - reference.r_mixed(a, b, c, d)).abs());
                }
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureLimitReport {
    pub point: Vec<f64>,
    pub eps: Vec<f64>,
    /// max |R^{αβ}_{γδ}(ε) − R̂^{αβ}_{γδ}| per ε.
    pub base_deviation: Vec<f64>,
    /// max |ε R^{mn}_{kl}(ε) − R̃^{mn}_{kl}| per ε.
    pub fiber_deviation: Vec<f64>,
    pub base_slope: Option<f64>,
    pub fiber_slope: Option<f64>,
}

/// Compares the curvature of g(ε) with the base and fiber curvatures.
pub fn curvature_limit_check(
    sc: &SubmersionChart,
    point: &[f64],
    eps_schedule: &[f64],
) -> Result<CurvatureLimitReport> {
    check_schedule(eps_schedule, 2)?;
    let base_ref = curvature_bundle(&sc.base.metric_jet(&sc.project(point))?)?;
    let fiber_ref = curvature_bundle(&sc.fiber_slice(point).metric_jet(&fiber_coords(sc, point))?)?;
    let mut base_deviation = Vec::new();
    let mut fiber_deviation = Vec::new();
    for &eps in eps_schedule {
        let bundle = curvature_bundle(&scale_metric(sc, point, eps)?)?;
        base_deviation.push(mixed_deviation(&bundle, sc.split.base(), &base_ref, 1.0));
        fiber_deviation.push(mixed_deviation(&bundle, sc.split.fiber(), &fiber_ref, eps));
    }
    Ok(CurvatureLimitReport {
        point: point.to_vec(),
        eps: eps_schedule.to_vec(),
        base_slope: loglog_slope(eps_schedule, &base_deviation),
        fiber_slope: loglog_slope(eps_schedule, &fiber_deviation),
        base_deviation,
        fiber_deviation,
    })
}

fn fiber_coords(sc: &SubmersionChart, point: &[f64]) -> Vec<f64> {
    sc.split.fiber().iter().map(|&i| point[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub e: usize,
    pub eps: Vec<f64>,
    /// sup over sample points of |ε^{N/2} Σ sgn R⋯R| per ε.
    pub suprema: Vec<f64>,
    /// sup at the smallest ε over sup at the middle ε.
    pub ratio: f64,
}

/// Empirical check that ε^{N/2} times the degree-e coupling sum of g(ε)
/// stays bounded as ε → 0.
pub fn scaled_integrand_bound(
    sc: &SubmersionChart,
    e: usize,
    eps_schedule: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<BoundednessReport> {
    check_schedule(eps_schedule, 2)?;
    let n = sc.total.dim();
    let table = CouplingTable::cached(n, e)?;
    let half_n = sc.fiber_dim() as f64 / 2.0;
    let points = stratified_points(sc.total.domain(), sample_count.max(1), seed);
    let mut suprema = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let mut sup: f64 = 0.0;
        for x in &points {
            let b = curvature_bundle(&scale_metric(sc, x, eps)?)?;
            sup = sup.max((eps.powf(half_n) * table.canonical_sum(&b.riemann_mixed)).abs());
        }
        suprema.push(sup);
    }
    let mid = suprema[(suprema.len() - 1) / 2];
    let last = suprema[suprema.len() - 1];
    let ratio = if mid == 0.0 {
        if last == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        last / mid
    };
    Ok(BoundednessReport {
        e,
        eps: eps_schedule.to_vec(),
        suprema,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneClass {
    BaseBase,
    BaseFiber,
    FiberFiber,
}

impl PlaneClass {
    pub const ALL: [PlaneClass; 3] = [PlaneClass::BaseBase, PlaneClass::BaseFiber, PlaneClass::FiberFiber];

    pub fn name(self) -> &'static str {
        match self {
            PlaneClass::BaseBase => "base_base",
            PlaneClass::BaseFiber => "base_fiber",
            PlaneClass::FiberFiber => "fiber_fiber",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMinima {
    pub class: PlaneClass,
    pub min_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionalReport {
    pub eps: Vec<f64>,
    /// Only classes with at least one coordinate plane.
    pub classes: Vec<ClassMinima>,
    /// ε·min K over fiber planes per ε.
    pub scaled_fiber_min: Vec<f64>,
    /// Richardson limit of `scaled_fiber_min`.
    pub fiber_limit: Option<f64>,
    pub bounded_below: bool,
}

/// Per-class minima of coordinate-plane sectional curvatures of g(ε).
pub fn sectional_sweep(
    sc: &SubmersionChart,
    eps_schedule: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<SectionalReport> {
    check_schedule(eps_schedule, 2)?;
    let n = sc.total.dim();
    let class_of = |p: usize, q: usize| match (sc.split.is_fiber(p), sc.split.is_fiber(q)) {
        (false, false) => PlaneClass::BaseBase,
        (true, true) => PlaneClass::FiberFiber,
        _ => PlaneClass::BaseFiber,
    };
    let points = stratified_points(sc.total.domain(), sample_count.max(1), seed);
    let mut minima = [vec![f64::INFINITY; eps_schedule.len()], vec![f64::INFINITY; eps_schedule.len()], vec![
        f64::INFINITY;
        eps_schedule.len()
    ]];
    for (k, &eps) in eps_schedule.iter().enumerate() {
        for x in &points {
            let mj = scale_metric(sc, x, eps)?;
            let g = Mat::from_rows(n, n, mj.g_matrix());
            let bundle = curvature_bundle(&mj)?;
            for p in 0..n {
                for q in p + 1..n {
                    let c = class_of(p, q) as usize;
                    let kpq = sectional(&bundle, &g, p, q)?;
                    minima[c][k] = minima[c][k].min(kpq);
                }
            }
        }
    }
    let classes: Vec<ClassMinima> = PlaneClass::ALL
        .iter()
        .zip(minima)
        .filter(|(_, m)| m.iter().all(|v| v.is_finite()))
        .map(|(&class, min_k)| ClassMinima { class, min_k })
        .collect();
    let scaled_fiber_min: Vec<f64> = classes
        .iter()
        .find(|c| c.class == PlaneClass::FiberFiber)
        .map(|c| c.min_k.iter().zip(eps_schedule).map(|(k, e)| k * e).collect())
        .unwrap_or_default();
    let fiber_limit = if scaled_fiber_min.is_empty() {
        None
    } else {
        richardson_first_order(eps_schedule, &scaled_fiber_min)
    };
    let mid = (eps_schedule.len() - 1) / 2;
    let last = eps_schedule.len() - 1;
    let bounded_below = classes.iter().all(|c| {
        let lo_mid = c.min_k[mid].min(0.0);
        let lo_last = c.min_k[last].min(0.0);
        lo_last >= 2.0 * lo_mid - 1.0
    });
    Ok(SectionalReport {
        eps: eps_schedule.to_vec(),
        classes,
        scaled_fiber_min,
        fiber_limit,
        bounded_below,
    })
}
