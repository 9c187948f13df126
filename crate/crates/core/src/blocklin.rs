//! Small dense linear algebra and the ε-scaled block inverse.
//!
//! Matrices here are at most 12×12.  Dot products are compensated so that
//! results do not depend on how loops are arranged.

use std::ops::{Index, IndexMut};

use crate::error::{LkError, Result};
use crate::fit::loglog_slope;
use crate::sum::{dot, kahan_sum};

/// Inversion fails above this 1-norm condition number.
pub const MAX_CONDITION: f64 = 1e12;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Mat {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Mat {
        let n = values.len();
        Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows);
        let rt = rhs.transpose();
        Mat::from_fn(self.rows, rhs.cols, |i, j| dot(self.row(i), rt.row(j)))
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        self.zip(rhs, |a, b| a - b)
    }

    fn zip(&self, rhs: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| kahan_sum((0..self.rows).map(|i| self[(i, j)].abs())))
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Sub-block with the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Assembles [[a, b], [c, d]].
    pub fn block(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let (m, k) = (a.rows, a.cols);
        Mat::from_fn(m + c.rows, k + b.cols, |i, j| match (i < m, j < k) {
            (true, true) => a[(i, j)],
            (true, false) => b[(i, j - k)],
            (false, true) => c[(i - m, j)],
            (false, false) => d[(i - m, j - k)],
        })
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric LDLᵀ factorization with diagonal pivoting: P A Pᵀ = L D Lᵀ.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    perm: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldlt {
    pub fn factor(a: &Mat) -> Result<Ldlt> {
        let n = a.rows;
        assert_eq!(n, a.cols, "LDLt needs a square matrix");
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        let scale = a.max_abs();
        for k in 0..n {
            // symmetric pivot: largest remaining diagonal magnitude
            let p = (k..n)
                .max_by(|&i, &j| w[(i, i)].abs().total_cmp(&w[(j, j)].abs()))
                .unwrap();
            if p != k {
                perm.swap(k, p);
                for c in 0..n {
                    let t = w[(k, c)];
                    w[(k, c)] = w[(p, c)];
                    w[(p, c)] = t;
                }
                for r in 0..n {
                    let t = w[(r, k)];
                    w[(r, k)] = w[(r, p)];
                    w[(r, p)] = t;
                }
                for c in 0..k {
                    l.swap(k * n + c, p * n + c);
                }
            }
            let pivot = w[(k, k)];
            if !(pivot.abs() > f64::EPSILON * scale * n as f64) || !pivot.is_finite() {
                return Err(LkError::Singular {
                    condition: f64::INFINITY,
                });
            }
            d[k] = pivot;
            l[k * n + k] = 1.0;
            for i in k + 1..n {
                l[i * n + k] = w[(i, k)] / pivot;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    w[(i, j)] -= l[i * n + k] * pivot * l[j * n + k];
                }
            }
        }
        Ok(Ldlt { n, perm, l, d })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    pub fn det(&self) -> f64 {
        self.d.iter().product()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let s = kahan_sum((i + 1..n).map(|j| self.l[j * n + i] * y[j]));
            y[i] -= s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        let n = self.n;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // exact symmetry
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

/// LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Lu> {
        let n = a.rows;
        assert_eq!(n, a.cols, "LU needs a square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
                .unwrap();
            if !(lu[(p, k)].abs() > f64::EPSILON * scale * n as f64) {
                return Err(LkError::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                perm.swap(p, k);
                sign = -sign;
                for c in 0..n {
                    let t = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Lu { n, lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        self.sign * (0..self.n).map(|i| self.lu[(i, i)]).product::<f64>()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &y[..i]);
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &y[i + 1..]);
            y[i] = (y[i] - s) / self.lu[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Mat {
        let n = self.n;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

fn check_condition(a: &Mat, inv: &Mat) -> Result<()> {
    let condition = a.norm1() * inv.norm1();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(LkError::Singular { condition });
    }
    Ok(())
}

/// Inverse of a symmetric matrix via pivoted LDLᵀ.
///
/// With a positive diagonal the matrix is first scaled symmetrically by
/// powers of two so each diagonal entry lies in [1/2, 2). The scaling is
/// exact, and the condition test then sees only genuine ill-conditioning,
/// not coordinate scale (polar charts near their poles).
pub fn invert(m: &Mat) -> Result<Mat> {
    let n = m.rows;
    let scalable = (0..n).all(|i| m[(i, i)] > 0.0 && m[(i, i)].is_finite());
    if !scalable {
        let inv = Ldlt::factor(m)?.inverse();
        check_condition(m, &inv)?;
        return Ok(inv);
    }
    let s: Vec<f64> = (0..n)
        .map(|i| 2f64.powi(-(0.5 * m[(i, i)].log2()).round() as i32))
        .collect();
    let b = Mat::from_fn(n, n, |i, j| m[(i, j)] * s[i] * s[j]);
    let inv = Ldlt::factor(&b)?.inverse();
    check_condition(&b, &inv)?;
    Ok(Mat::from_fn(n, n, |i, j| inv[(i, j)] * s[i] * s[j]))
}

/// Inverse of a general square matrix via pivoted LU.
pub fn invert_general(m: &Mat) -> Result<Mat> {
    let inv = Lu::factor(m)?.inverse();
    check_condition(m, &inv)?;
    Ok(inv)
}

pub fn det(m: &Mat) -> f64 {
    match Lu::factor(m) {
        Ok(lu) => lu.det(),
        Err(_) => 0.0,
    }
}

/// Cholesky-style test on a row-major symmetric `n`×`n` slice.
pub fn is_positive_definite(g: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let s = kahan_sum((0..j).map(|k| l[j * n + k] * l[j * n + k]));
        let d = g[j * n + j] - s;
        if !(d > 0.0) {
            return false;
        }
        let dj = d.sqrt();
        l[j * n + j] = dj;
        for i in j + 1..n {
            let s = kahan_sum((0..j).map(|k| l[i * n + k] * l[j * n + k]));
            l[i * n + j] = (g[i * n + j] - s) / dj;
        }
    }
    true
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &Mat) -> Result<Mat> {
    let n = m.rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let s = kahan_sum((0..j).map(|k| l[(j, k)] * l[(j, k)]));
        let d = m[(j, j)] - s;
        if !(d > 0.0) {
            return Err(LkError::NotPositiveDefinite { point: vec![] });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in j + 1..n {
            let s = kahan_sum((0..j).map(|k| l[(i, k)] * l[(j, k)]));
            l[(i, j)] = (m[(i, j)] - s) / dj;
        }
    }
    Ok(l)
}

/// Partition of chart coordinates into fiber and base directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSplit {
    fiber: Vec<usize>,
    base: Vec<usize>,
}

impl BlockSplit {
    pub fn new(fiber: Vec<usize>, base: Vec<usize>) -> Result<BlockSplit> {
        let n = fiber.len() + base.len();
        if fiber.is_empty() || base.is_empty() {
            return Err(LkError::invalid("fiber and base must both be non-empty"));
        }
        let mut seen = vec![false; n];
        for &k in fiber.iter().chain(&base) {
            if k >= n || seen[k] {
                return Err(LkError::invalid(format!(
                    "fiber/base indices must partition 0..{n}"
                )));
            }
            seen[k] = true;
        }
        Ok(BlockSplit { fiber, base })
    }

    pub fn fiber(&self) -> &[usize] {
        &self.fiber
    }

    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.fiber.len() + self.base.len()
    }

    pub fn is_fiber(&self, k: usize) -> bool {
        self.fiber.contains(&k)
    }
}

/// Exact inverse of [[εA, εB], [εC, D]] together with the leading terms
/// ε⁻¹A⁻¹ and D⁻¹ of its diagonal blocks.
#[derive(Debug, Clone)]
pub struct BlockInverse {
    pub inverse: Mat,
    pub leading_upper: Mat,
    pub leading_lower: Mat,
}

impl BlockInverse {
    fn split(&self) -> usize {
        self.leading_upper.rows()
    }

    pub fn upper_left(&self) -> Mat {
        let k = self.split();
        let idx: Vec<usize> = (0..k).collect();
        self.inverse.select(&idx, &idx)
    }

    pub fn lower_right(&self) -> Mat {
        let k = self.split();
        let idx: Vec<usize> = (k..self.inverse.rows()).collect();
        self.inverse.select(&idx, &idx)
    }

    pub fn off_diagonal_max(&self) -> f64 {
        let k = self.split();
        let n = self.inverse.rows();
        let top: Vec<usize> = (0..k).collect();
        let bottom: Vec<usize> = (k..n).collect();
        self.inverse
            .select(&top, &bottom)
            .max_abs()
            .max(self.inverse.select(&bottom, &top).max_abs())
    }
}

/// The ε-scaled block matrix [[εA, εB], [εC, D]].
pub fn scaled_block(a: &Mat, b: &Mat, c: &Mat, d: &Mat, eps: f64) -> Mat {
    Mat::block(&a.scale(eps), &b.scale(eps), &c.scale(eps), d)
}

/// Inverts [[εA, εB], [εC, D]] through the factorization
/// diag(A, D)·[[εI, εX], [εY, I]] with X = A⁻¹B, Y = D⁻¹C, whose inverse is
/// [[ε⁻¹S, −SX], [−YS, I + εYSX]] with S = (I − εXY)⁻¹.
pub fn lemma_block_inverse(a: &Mat, b: &Mat, c: &Mat, d: &Mat, eps: f64) -> Result<BlockInverse> {
    if !(eps > 0.0) {
        return Err(LkError::invalid(format!("eps must be positive, got {eps}")));
    }
    let a_inv = invert_general(a)?;
    let d_inv = invert_general(d)?;
    let x = a_inv.matmul(b);
    let y = d_inv.matmul(c);
    let k = a.rows();
    let s = invert_general(&Mat::identity(k).sub(&x.matmul(&y).scale(eps)))?;
    let sx = s.matmul(&x);
    let ys = y.matmul(&s);
    let m = d.rows();
    let kinv = Mat::block(
        &s.scale(1.0 / eps),
        &sx.scale(-1.0),
        &ys.scale(-1.0),
        &Mat::identity(m).add(&ys.matmul(&x).scale(eps)),
    );
    let diag_inv = Mat::block(&a_inv, &Mat::zeros(k, m), &Mat::zeros(m, k), &d_inv);
    Ok(BlockInverse {
        inverse: kinv.matmul(&diag_inv),
        leading_upper: a_inv.scale(1.0 / eps),
        leading_lower: d_inv,
    })
}

/// Deviations of the block inverse from its leading terms over an ε grid.
#[derive(Debug, Clone)]
pub struct BlockAsymptotics {
    pub eps: Vec<f64>,
    /// ‖upper-left − ε⁻¹A⁻¹‖_max, expected O(1).
    pub upper_dev: Vec<f64>,
    /// max |off-diagonal entry|, expected O(1).
    pub off_diag: Vec<f64>,
    /// ‖lower-right − D⁻¹‖_max, expected O(ε).
    pub lower_dev: Vec<f64>,
    pub lower_slope: f64,
}

impl BlockAsymptotics {
    /// Ratio of largest to smallest value; a bounded sequence keeps this near 1.
    pub fn spread(values: &[f64]) -> f64 {
        let max = values.iter().cloned().fold(0.0, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Default ε grid 2⁻³ … 2⁻¹⁰.
pub fn default_block_grid() -> Vec<f64> {
    (3..=10).map(|k| 2f64.powi(-k)).collect()
}

pub fn block_asymptotics(a: &Mat, b: &Mat, c: &Mat, d: &Mat, grid: &[f64]) -> Result<BlockAsymptotics> {
    let mut out = BlockAsymptotics {
        eps: grid.to_vec(),
        upper_dev: vec![],
        off_diag: vec![],
        lower_dev: vec![],
        lower_slope: f64::NAN,
    };
    for &eps in grid {
        let bi = lemma_block_inverse(a, b, c, d, eps)?;
        out.upper_dev.push(bi.upper_left().sub(&bi.leading_upper).max_abs());
        out.off_diag.push(bi.off_diagonal_max());
        out.lower_dev.push(bi.lower_right().sub(&bi.leading_lower).max_abs());
    }
    out.lower_slope = loglog_slope(grid, &out.lower_dev).unwrap_or(f64::NAN);
    Ok(out)
}
