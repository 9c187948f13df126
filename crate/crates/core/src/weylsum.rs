//! Weyl's coupling sum and intrinsic volumes of closed manifolds.
//!
//! For even e the integrand of V_{n−e} is
//!
//! ```text
//! (2π)^{−e/2} Σ_[p,q] sgn(p,q) R^{q1 q2}_{p1 p2} ⋯ R^{q_{e−1} q_e}_{p_{e−1} p_e}
//! ```
//!
//! A coupling is stored in canonical form: within every column both the lower
//! pair (p) and the upper pair (q) are sorted ascending, and columns are
//! ordered by their first lower entry.  Each canonical coupling stands for
//! 2^e·(e/2)! ordered index tuples that all contribute the same summand, which
//! is [`CouplingTable::multiplicity`].  The sum over canonical couplings is
//! the normalization under which V₀(S²) = 2.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::blocklin::{cholesky, invert_general, Mat};
use crate::error::{LkError, Result};
use crate::metricfield::MetricSource;
use crate::quadrature::{integrate_density, sqrt_det, volume, Integral, QuadratureOptions};
use crate::tensorcore::{curvature_bundle, i4, CurvatureBundle};

/// Multiplier relating the canonical sum to the (2π)^{−e/2}-normalized
/// integrand; calibrated by V₀(S²) = 2.
pub const CANONICAL_SUM_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coupling {
    /// Lower indices, grouped in consecutive pairs (columns).
    pub p: Vec<usize>,
    /// Upper indices, a permutation of `p`.
    pub q: Vec<usize>,
    pub sign: i8,
}

impl Coupling {
    pub fn columns(&self) -> usize {
        self.p.len() / 2
    }

    /// Canonical representative of the coupling given by arbitrary ordered
    /// tuples (p, q).
    pub fn canonical(p: &[usize], q: &[usize]) -> Coupling {
        let e = p.len();
        let mut cols: Vec<([usize; 2], [usize; 2])> = (0..e / 2)
            .map(|k| {
                let mut lo = [p[2 * k], p[2 * k + 1]];
                let mut up = [q[2 * k], q[2 * k + 1]];
                lo.sort_unstable();
                up.sort_unstable();
                (lo, up)
            })
            .collect();
        cols.sort_unstable_by_key(|c| c.0[0]);
        let p: Vec<usize> = cols.iter().flat_map(|c| c.0).collect();
        let q: Vec<usize> = cols.iter().flat_map(|c| c.1).collect();
        let sign = permutation_sign(&p, &q);
        Coupling { p, q, sign }
    }
}

/// Sign of the permutation taking the sequence `from` to `to` (both
/// arrangements of the same distinct values).
pub fn permutation_sign(from: &[usize], to: &[usize]) -> i8 {
    let pos: HashMap<usize, usize> = from.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let sigma: Vec<usize> = to.iter().map(|v| pos[v]).collect();
    let mut seen = vec![false; sigma.len()];
    let mut sign = 1i8;
    for start in 0..sigma.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = sigma[k];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Canonical couplings for (n, e) with flat offsets into R^{pq}_{rs}.
#[derive(Debug, Clone)]
pub struct CouplingTable {
    n: usize,
    e: usize,
    couplings: Vec<Coupling>,
    /// `e/2` offsets per coupling.
    offsets: Vec<usize>,
    signs: Vec<f64>,
}

impl CouplingTable {
    pub fn new(n: usize, e: usize) -> Result<CouplingTable> {
        if e % 2 == 1 {
            return Err(LkError::OddDegree(e));
        }
        if e > n {
            return Err(LkError::IndexOutOfRange { index: e, max: n });
        }
        let couplings = enumerate_couplings(n, e)?;
        let mut offsets = Vec::with_capacity(couplings.len() * e / 2);
        for c in &couplings {
            for k in 0..e / 2 {
                offsets.push(i4(n, c.q[2 * k], c.q[2 * k + 1], c.p[2 * k], c.p[2 * k + 1]));
            }
        }
        let signs = couplings.iter().map(|c| c.sign as f64).collect();
        Ok(CouplingTable {
            n,
            e,
            couplings,
            offsets,
            signs,
        })
    }

    /// Shared table for (n, e).
    pub fn cached(n: usize, e: usize) -> Result<Arc<CouplingTable>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<CouplingTable>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().unwrap().get(&(n, e)) {
            return Ok(t.clone());
        }
        let t = Arc::new(CouplingTable::new(n, e)?);
        cache.lock().unwrap().insert((n, e), t.clone());
        Ok(t)
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    /// Ordered (p, q) tuples represented by one canonical coupling.
    pub fn multiplicity(&self) -> u64 {
        let half = (self.e / 2) as u64;
        (1u64 << self.e) * (1..=half).product::<u64>()
    }

    /// Σ over canonical couplings of sgn · Π R^{..}_{..}.
    #[inline]
    pub fn canonical_sum(&self, riemann_mixed: &[f64]) -> f64 {
        let h = self.e / 2;
        if h == 0 {
            return 1.0;
        }
        debug_assert_eq!(riemann_mixed.len(), self.n.pow(4));
        let mut acc = 0.0;
        for (c, offs) in self.offsets.chunks_exact(h).enumerate() {
            let mut prod = self.signs[c];
            for &o in offs {
                prod *= riemann_mixed[o];
            }
            acc += prod;
        }
        acc
    }
}

fn pairings(items: &[usize]) -> Vec<Vec<[usize; 2]>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<usize> = items[1..]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j + 1 != k)
            .map(|(_, &v)| v)
            .collect();
        for mut tail in pairings(&rest) {
            tail.insert(0, [first, items[k]]);
            out.push(tail);
        }
    }
    out
}

/// Ordered sequences of `cols` unordered pairs covering `items`.
fn pair_sequences(items: &[usize], cols: usize) -> Vec<Vec<[usize; 2]>> {
    if cols == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let rest: Vec<usize> = items
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i && k != j)
                .map(|(_, &v)| v)
                .collect();
            for mut tail in pair_sequences(&rest, cols - 1) {
                tail.insert(0, [items[i], items[j]]);
                out.push(tail);
            }
        }
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// All canonical couplings of degree `e` on indices 0..n.
pub fn enumerate_couplings(n: usize, e: usize) -> Result<Vec<Coupling>> {
    if e % 2 == 1 {
        return Err(LkError::OddDegree(e));
    }
    if e > n {
        return Err(LkError::IndexOutOfRange { index: e, max: n });
    }
    let mut out = Vec::new();
    for set in subsets(n, e) {
        for lower in pairings(&set) {
            let p: Vec<usize> = lower.iter().flatten().copied().collect();
            for upper in pair_sequences(&set, e / 2) {
                let q: Vec<usize> = upper.iter().flatten().copied().collect();
                let sign = permutation_sign(&p, &q);
                out.push(Coupling {
                    p: p.clone(),
                    q,
                    sign,
                });
            }
        }
    }
    Ok(out)
}

/// Dimension, degree and normalization of one Lipschitz–Killing integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkSpec {
    pub n: usize,
    pub e: usize,
    pub normalization: f64,
}

impl LkSpec {
    pub fn new(n: usize, e: usize) -> Result<LkSpec> {
        if e % 2 == 1 {
            return Err(LkError::OddDegree(e));
        }
        if e > n {
            return Err(LkError::IndexOutOfRange { index: e, max: n });
        }
        Ok(LkSpec {
            n,
            e,
            normalization: CANONICAL_SUM_CONSTANT * (2.0 * PI).powf(-(e as f64) / 2.0),
        })
    }

    /// Spec for the intrinsic volume V_i of an n-manifold; `None` when n − i is odd.
    pub fn for_volume(n: usize, i: usize) -> Result<Option<LkSpec>> {
        if i > n {
            return Err(LkError::IndexOutOfRange { index: i, max: n });
        }
        let e = n - i;
        if e % 2 == 1 {
            return Ok(None);
        }
        LkSpec::new(n, e).map(Some)
    }
}

/// Unnormalized canonical coupling sum at a point.
pub fn lk_integrand(bundle: &CurvatureBundle, spec: &LkSpec) -> Result<f64> {
    if bundle.dim() != spec.n {
        return Err(LkError::invalid(format!(
            "bundle dimension {} does not match spec dimension {}",
            bundle.dim(),
            spec.n
        )));
    }
    Ok(CouplingTable::cached(spec.n, spec.e)?.canonical_sum(&bundle.riemann_mixed))
}

/// Normalized integrand: density of V_{n−e} against dvol.
pub fn lk_density(bundle: &CurvatureBundle, spec: &LkSpec) -> Result<f64> {
    Ok(spec.normalization * lk_integrand(bundle, spec)?)
}

/// V_i of a closed manifold given by an atlas.
pub fn intrinsic_volume<S>(atlas: &[&S], i: usize, opts: &QuadratureOptions) -> Result<Integral>
where
    S: MetricSource + ?Sized,
{
    let n = atlas
        .first()
        .map(|c| c.dim())
        .ok_or_else(|| LkError::invalid("empty atlas"))?;
    if atlas.iter().any(|c| c.dim() != n) {
        return Err(LkError::invalid("atlas charts differ in dimension"));
    }
    let Some(spec) = LkSpec::for_volume(n, i)? else {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            nodes: 0,
        });
    };
    if spec.e == 0 {
        return volume(atlas, opts);
    }
    let table = CouplingTable::cached(n, spec.e)?;
    integrate_density(atlas, opts, |ci, x| {
        let mj = atlas[ci].metric_jet(x)?;
        let vol = sqrt_det(&mj.g_matrix(), n)?;
        let bundle = curvature_bundle(&mj)?;
        Ok(spec.normalization * table.canonical_sum(&bundle.riemann_mixed) * vol)
    })
}

/// Small exterior algebra on n generators, basis indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
struct Form {
    coeffs: Vec<f64>,
}

impl Form {
    fn zero(n: usize) -> Form {
        Form {
            coeffs: vec![0.0; 1 << n],
        }
    }

    fn scalar(n: usize, v: f64) -> Form {
        let mut f = Form::zero(n);
        f.coeffs[0] = v;
        f
    }

    fn wedge(&self, other: &Form) -> Form {
        let mut out = Form {
            coeffs: vec![0.0; self.coeffs.len()],
        };
        for (a, &x) in self.coeffs.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in other.coeffs.iter().enumerate() {
                if y == 0.0 || a & b != 0 {
                    continue;
                }
                out.coeffs[a | b] += reorder_sign(a, b) * x * y;
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Form, c: f64) {
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += c * o;
        }
    }
}

/// Sign of merging the sorted generator lists of `a` then `b`.
fn reorder_sign(a: usize, b: usize) -> f64 {
    // count pairs (i in a, j in b) with i > j
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn pfaffian(omega: &[Vec<Form>], idx: &[usize], n: usize) -> Form {
    if idx.is_empty() {
        return Form::scalar(n, 1.0);
    }
    let first = idx[0];
    let mut acc = Form::zero(n);
    for k in 1..idx.len() {
        let rest: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != 0 && j != k)
            .map(|(_, &v)| v)
            .collect();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = omega[first][idx[k]].wedge(&pfaffian(omega, &rest, n));
        acc.add_scaled(&term, sign);
    }
    acc
}

/// Chern–Gauss–Bonnet density Pf(Ω)/(2π)^{n/2} against dvol.
///
/// Works in a g-orthonormal frame (from the Cholesky factor of g) and builds
/// the curvature 2-forms Ω_ab = ½ R_abcd e^c∧e^d in an exterior algebra, so it
/// shares nothing with the coupling enumeration beyond R_{pqrs} itself.
pub fn gb_density_pfaffian(bundle: &CurvatureBundle, g: &Mat) -> Result<f64> {
    let n = bundle.dim();
    if n % 2 == 1 {
        return Err(LkError::OddDegree(n));
    }
    // frame e_a = Σ_p E[p][a] ∂_p with Eᵀ g E = I; E = L^{-T}
    let l = cholesky(g)?;
    let l_inv = invert_general(&l)?;
    let frame = l_inv.transpose();
    let r = |p, q, s, t| bundle.r_lower(p, q, s, t);
    let mut rf = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut acc = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            let fq = frame[(p, a)] * frame[(q, b)];
                            if fq == 0.0 {
                                continue;
                            }
                            for s in 0..n {
                                for t in 0..n {
                                    acc += fq * frame[(s, c)] * frame[(t, d)] * r(p, q, s, t);
                                }
                            }
                        }
                    }
                    rf[i4(n, a, b, c, d)] = acc;
                }
            }
        }
    }
    let omega: Vec<Vec<Form>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let mut f = Form::zero(n);
                    for c in 0..n {
                        for d in c + 1..n {
                            f.coeffs[(1 << c) | (1 << d)] = rf[i4(n, a, b, c, d)];
                        }
                    }
                    f
                })
                .collect()
        })
        .collect();
    let idx: Vec<usize> = (0..n).collect();
    let pf = pfaffian(&omega, &idx, n);
    let top = pf.coeffs[(1 << n) - 1];
    // the frame is positively oriented, so e^1∧…∧e^n = dvol
    Ok(top / (2.0 * PI).powi((n / 2) as i32))
}
