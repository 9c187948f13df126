use serde::{Deserialize, Serialize};

use crate::blocklin;
use crate::error::{LkError, Result};

use super::expr::{parse_expr, Expr};
use super::jet::{tri_index, Jet2, MAX_DIM};

const TRI: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Metric components with their first and second partial derivatives at a
/// point.
///
/// `dg(p, q, r)` is ∂_p g_qr and `ddg(p, q, r, s)` is ∂_p ∂_q g_rs.  Storage is
/// packed over the symmetric index pairs, so the symmetries hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    n: usize,
    g: [f64; TRI],
    dg: [f64; MAX_DIM * TRI],
    ddg: [f64; TRI * TRI],
}

impl MetricJet {
    fn zeroed(n: usize) -> Self {
        assert!(n <= MAX_DIM, "metric dimension {n} exceeds {MAX_DIM}");
        MetricJet {
            n,
            g: [0.0; TRI],
            dg: [0.0; MAX_DIM * TRI],
            ddg: [0.0; TRI * TRI],
        }
    }

    /// Assembles a jet from per-component 2-jets; `component(q, r)` is only
    /// called with `q <= r`.
    pub fn from_components(n: usize, mut component: impl FnMut(usize, usize) -> Jet2) -> Self {
        let mut mj = MetricJet::zeroed(n);
        for r in 0..n {
            for q in 0..=r {
                let c = component(q, r);
                let k = tri_index(q, r);
                mj.g[k] = c.value();
                for p in 0..n {
                    mj.dg[p * TRI + k] = c.grad(p);
                    for s in 0..=p {
                        mj.ddg[tri_index(s, p) * TRI + k] = c.hess(s, p);
                    }
                }
            }
        }
        mj
    }

    /// Builds a jet from arbitrary callbacks, reading only canonical slots
    /// (`q <= r`, `p <= q` for second derivatives).
    pub fn from_fn(
        n: usize,
        g: impl Fn(usize, usize) -> f64,
        dg: impl Fn(usize, usize, usize) -> f64,
        ddg: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut mj = MetricJet::zeroed(n);
        for r in 0..n {
            for q in 0..=r {
                let k = tri_index(q, r);
                mj.g[k] = g(q, r);
                for p in 0..n {
                    mj.dg[p * TRI + k] = dg(p, q, r);
                    for s in 0..=p {
                        mj.ddg[tri_index(s, p) * TRI + k] = ddg(s, p, q, r);
                    }
                }
            }
        }
        mj
    }

    /// Per-component 2-jet, inverse of [`MetricJet::from_components`].
    pub fn component(&self, q: usize, r: usize) -> Jet2 {
        let grad: Vec<f64> = (0..self.n).map(|p| self.dg(p, q, r)).collect();
        Jet2::from_parts(self.g(q, r), &grad, |a, b| self.ddg(a, b, q, r))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn g(&self, q: usize, r: usize) -> f64 {
        self.g[tri_index(q, r)]
    }

    #[inline]
    pub fn dg(&self, p: usize, q: usize, r: usize) -> f64 {
        self.dg[p * TRI + tri_index(q, r)]
    }

    #[inline]
    pub fn ddg(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.ddg[tri_index(p, q) * TRI + tri_index(r, s)]
    }

    /// Dense row-major copy of g.
    pub fn g_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.g(i, j);
            }
        }
        m
    }

    /// Restriction to the coordinates `dims` (metric of the coordinate
    /// submanifold through the point, differentiated along it only).
    pub fn restrict(&self, dims: &[usize]) -> MetricJet {
        MetricJet::from_fn(
            dims.len(),
            |q, r| self.g(dims[q], dims[r]),
            |p, q, r| self.dg(dims[p], dims[q], dims[r]),
            |p, q, r, s| self.ddg(dims[p], dims[q], dims[r], dims[s]),
        )
    }

    /// Same jet in permuted coordinates: new coordinate `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> MetricJet {
        self.restrict(perm)
    }

    /// Scales the metric by a constant.
    pub fn scaled(&self, c: f64) -> MetricJet {
        let mut out = self.clone();
        out.g.iter_mut().for_each(|v| *v *= c);
        out.dg.iter_mut().for_each(|v| *v *= c);
        out.ddg.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// Anything that yields a metric jet at points of a coordinate box.
pub trait MetricSource: Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> &[[f64; 2]];
    fn periodic(&self) -> &[bool];
    fn metric_jet(&self, point: &[f64]) -> Result<MetricJet>;

    /// Metric value only; implementors may override with a cheaper path.
    fn metric_matrix(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.metric_jet(point)?.g_matrix())
    }

    /// Partition-of-unity factor.
    fn weight(&self, _point: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

/// A coordinate chart with metric components given as DSL expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    dim: usize,
    domain: Vec<[f64; 2]>,
    periodic: Vec<bool>,
    /// Upper triangle, row-major: (0,0), (0,1), ..., (1,1), ...
    components: Vec<Expr>,
    weight: Option<Expr>,
}

/// On-disk chart description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartFile {
    pub dim: usize,
    pub domain: Vec<[f64; 2]>,
    pub periodic: Vec<bool>,
    /// Row `i` lists g_ii, ..., g_i(n-1); full rows of length n are accepted
    /// and their lower part ignored.
    pub metric: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
}

impl Chart {
    /// Builds a chart from upper-triangle component strings.
    pub fn new(
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        upper: &[&str],
        weight: Option<&str>,
    ) -> Result<Chart> {
        let dim = domain.len();
        let rows: Vec<Vec<String>> = {
            let mut it = upper.iter();
            (0..dim)
                .map(|i| {
                    (i..dim)
                        .map(|_| it.next().map(|s| s.to_string()).unwrap_or_default())
                        .collect()
                })
                .collect()
        };
        if upper.len() != dim * (dim + 1) / 2 {
            return Err(LkError::invalid(format!(
                "expected {} metric components, got {}",
                dim * (dim + 1) / 2,
                upper.len()
            )));
        }
        Chart::from_file(&ChartFile {
            dim,
            domain,
            periodic,
            metric: rows,
            weight: weight.map(str::to_string),
        })
    }

    /// Diagonal metric chart.
    pub fn diagonal(domain: Vec<[f64; 2]>, periodic: Vec<bool>, diag: &[&str]) -> Result<Chart> {
        let n = domain.len();
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                upper.push(if i == j { diag[i] } else { "0" });
            }
        }
        Chart::new(domain, periodic, &upper, None)
    }

    pub fn from_file(file: &ChartFile) -> Result<Chart> {
        let n = file.dim;
        if n == 0 || n > MAX_DIM {
            return Err(LkError::invalid(format!(
                "chart dimension {n} outside 1..={MAX_DIM}"
            )));
        }
        if file.domain.len() != n || file.periodic.len() != n || file.metric.len() != n {
            return Err(LkError::invalid(
                "domain, periodic and metric must each have one entry per coordinate",
            ));
        }
        for (k, &[a, b]) in file.domain.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(LkError::invalid(format!(
                    "coordinate {k} has empty or invalid interval [{a}, {b}]"
                )));
            }
        }
        let mut components = Vec::with_capacity(n * (n + 1) / 2);
        for (i, row) in file.metric.iter().enumerate() {
            let upper: &[String] = if row.len() == n {
                &row[i..]
            } else if row.len() == n - i {
                row
            } else {
                return Err(LkError::invalid(format!(
                    "metric row {i} has {} entries, expected {} or {n}",
                    row.len(),
                    n - i
                )));
            };
            for text in upper {
                components.push(parse_expr(text, n)?);
            }
        }
        let weight = file.weight.as_deref().map(|w| parse_expr(w, n)).transpose()?;
        Ok(Chart {
            dim: n,
            domain: file.domain.clone(),
            periodic: file.periodic.clone(),
            components,
            weight,
        })
    }

    pub fn from_json(text: &str) -> Result<Chart> {
        let file: ChartFile =
            serde_json::from_str(text).map_err(|e| LkError::invalid(e.to_string()))?;
        Chart::from_file(&file)
    }

    pub fn to_file(&self) -> ChartFile {
        let n = self.dim;
        let mut it = self.components.iter();
        let metric = (0..n)
            .map(|i| (i..n).map(|_| it.next().unwrap().to_string()).collect())
            .collect();
        ChartFile {
            dim: n,
            domain: self.domain.clone(),
            periodic: self.periodic.clone(),
            metric,
            weight: self.weight.as_ref().map(|w| w.to_string()),
        }
    }

    pub fn with_weight(mut self, weight: &str) -> Result<Chart> {
        self.weight = Some(parse_expr(weight, self.dim)?);
        Ok(self)
    }

    /// Expression for g_ij.
    pub fn component_expr(&self, i: usize, j: usize) -> &Expr {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        &self.components[row_offset(self.dim, lo) + (hi - lo)]
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(LkError::invalid(format!(
                "point has {} coordinates, chart has {}",
                point.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn row_offset(n: usize, row: usize) -> usize {
    (0..row).map(|k| n - k).sum()
}

/// Metric jet of `chart` at `point`, with a positive-definiteness check.
pub fn metric_jet(chart: &Chart, point: &[f64]) -> Result<MetricJet> {
    chart.metric_jet(point)
}

pub(crate) fn require_positive_definite(g: &[f64], n: usize, point: &[f64]) -> Result<()> {
    if blocklin::is_positive_definite(g, n) {
        Ok(())
    } else {
        Err(LkError::NotPositiveDefinite {
            point: point.to_vec(),
        })
    }
}

impl MetricSource for Chart {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    fn metric_jet(&self, point: &[f64]) -> Result<MetricJet> {
        self.check_point(point)?;
        let n = self.dim;
        let mut jets = Vec::with_capacity(self.components.len());
        for e in &self.components {
            jets.push(e.eval_jet2(point)?);
        }
        let mj = MetricJet::from_components(n, |q, r| jets[row_offset(n, q) + (r - q)]);
        require_positive_definite(&mj.g_matrix(), n, point)?;
        Ok(mj)
    }

    fn metric_matrix(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_point(point)?;
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.components[row_offset(n, i) + (j - i)].eval(point)?;
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        require_positive_definite(&m, n, point)?;
        Ok(m)
    }

    fn weight(&self, point: &[f64]) -> Result<f64> {
        match &self.weight {
            Some(w) => w.eval(point),
            None => Ok(1.0),
        }
    }
}
