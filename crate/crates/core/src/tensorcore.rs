//! Christoffel symbols, Riemann tensor and sectional curvature at a point.
//!
//! Index layout is row-major: `gamma_lower[(p, q, r)]` is Γ_{pqr} (first index
//! lowered), `gamma_upper[(t, p, q)]` is Γ^t_{pq}, `riemann_lower[(p, q, r, s)]`
//! is R_{pqrs} and `riemann_mixed[(p, q, r, s)]` is R^{pq}_{rs}.
//!
//! Sign and factor convention: the coordinate formula
//!
//! ```text
//! 2R_pqrs = ∂q∂r g_ps + ∂p∂s g_qr − ∂q∂s g_pr − ∂p∂r g_qs
//!           + 2(Γ_tqr Γ^t_ps − Γ_tqs Γ^t_pr)
//! ```
//!
//! is evaluated and multiplied by [`Convention::riemann_factor`]; sectional
//! curvature is [`Convention::sectional_factor`]·2R_pqpq/(g_pp g_qq − g_pq²).
//! Both factors are pinned by requiring the unit round sphere to have K ≡ +1,
//! V₀(S²) = 2 and V₂(S²) = 4π.

use serde::Serialize;

use crate::blocklin::{invert, Mat};
use crate::error::{LkError, Result};
use crate::metricfield::MetricJet;

/// Convention constants applied once in [`riemann`] and once in [`sectional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convention {
    pub riemann_factor: f64,
    pub sectional_factor: f64,
}

/// Calibrated values; see the calibration tests in this module.
pub const CONVENTION: Convention = Convention {
    riemann_factor: 0.5,
    sectional_factor: 0.5,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBundle {
    n: usize,
    pub g_inv: Mat,
    pub gamma_lower: Vec<f64>,
    pub gamma_upper: Vec<f64>,
    pub riemann_lower: Vec<f64>,
    pub riemann_mixed: Vec<f64>,
}

#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
pub fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

impl CurvatureBundle {
    pub fn new(mj: &MetricJet) -> Result<CurvatureBundle> {
        let n = mj.dim();
        let (gamma_lower, gamma_upper, g_inv) = christoffel_with_inverse(mj)?;
        let riemann_lower = riemann_from(mj, &gamma_lower, &gamma_upper);
        let riemann_mixed = raise_indices(&riemann_lower, &g_inv);
        Ok(CurvatureBundle {
            n,
            g_inv,
            gamma_lower,
            gamma_upper,
            riemann_lower,
            riemann_mixed,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Γ_{pqr}
    pub fn gamma(&self, p: usize, q: usize, r: usize) -> f64 {
        self.gamma_lower[i3(self.n, p, q, r)]
    }

    /// Γ^t_{pq}
    pub fn gamma_up(&self, t: usize, p: usize, q: usize) -> f64 {
        self.gamma_upper[i3(self.n, t, p, q)]
    }

    /// R_{pqrs}
    pub fn r_lower(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.riemann_lower[i4(self.n, p, q, r, s)]
    }

    /// R^{pq}_{rs}
    pub fn r_mixed(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.riemann_mixed[i4(self.n, p, q, r, s)]
    }
}

/// Curvature bundle of a metric jet.
pub fn curvature_bundle(mj: &MetricJet) -> Result<CurvatureBundle> {
    CurvatureBundle::new(mj)
}

fn christoffel_with_inverse(mj: &MetricJet) -> Result<(Vec<f64>, Vec<f64>, Mat)> {
    let n = mj.dim();
    let g = Mat::from_rows(n, n, mj.g_matrix());
    let g_inv = invert(&g)?;
    let mut lower = vec![0.0; n * n * n];
    for p in 0..n {
        for q in 0..n {
            for r in q..n {
                let v = 0.5 * (mj.dg(r, p, q) + mj.dg(q, p, r) - mj.dg(p, q, r));
                lower[i3(n, p, q, r)] = v;
                lower[i3(n, p, r, q)] = v;
            }
        }
    }
    let mut upper = vec![0.0; n * n * n];
    for t in 0..n {
        for p in 0..n {
            for q in p..n {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += g_inv[(t, s)] * lower[i3(n, s, p, q)];
                }
                upper[i3(n, t, p, q)] = acc;
                upper[i3(n, t, q, p)] = acc;
            }
        }
    }
    Ok((lower, upper, g_inv))
}

/// Γ_{pqr} = ½(∂_r g_pq + ∂_q g_pr − ∂_p g_qr) and Γ^t_{pq} = g^{ts} Γ_{spq}.
pub fn christoffel(mj: &MetricJet) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lower, upper, _) = christoffel_with_inverse(mj)?;
    Ok((lower, upper))
}

fn riemann_from(mj: &MetricJet, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let n = mj.dim();
    let c = CONVENTION.riemann_factor;
    let mut out = vec![0.0; n * n * n * n];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let second = mj.ddg(q, r, p, s) + mj.ddg(p, s, q, r)
                        - mj.ddg(q, s, p, r)
                        - mj.ddg(p, r, q, s);
                    let mut gg = 0.0;
                    for t in 0..n {
                        gg += lower[i3(n, t, q, r)] * upper[i3(n, t, p, s)]
                            - lower[i3(n, t, q, s)] * upper[i3(n, t, p, r)];
                    }
                    out[i4(n, p, q, r, s)] = c * (second + 2.0 * gg);
                }
            }
        }
    }
    out
}

/// Fully covariant Riemann tensor R_{pqrs}.
pub fn riemann(mj: &MetricJet) -> Result<Vec<f64>> {
    let (lower, upper, _) = christoffel_with_inverse(mj)?;
    let r = riemann_from(mj, &lower, &upper);
    debug_assert!(symmetry_report(&r, mj.dim()).max_relative() <= 1e-8);
    Ok(r)
}

/// R^{pq}_{rs} = g^{pa} g^{qb} R_{abrs}.
pub fn raise_indices(riemann_lower: &[f64], g_inv: &Mat) -> Vec<f64> {
    let n = g_inv.rows();
    // half-raised: H^p_{b rs} = g^{pa} R_{abrs}
    let mut half = vec![0.0; n * n * n * n];
    for p in 0..n {
        for b in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += g_inv[(p, a)] * riemann_lower[i4(n, a, b, r, s)];
                    }
                    half[i4(n, p, b, r, s)] = acc;
                }
            }
        }
    }
    let mut out = vec![0.0; n * n * n * n];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut acc = 0.0;
                    for b in 0..n {
                        acc += g_inv[(q, b)] * half[i4(n, p, b, r, s)];
                    }
                    out[i4(n, p, q, r, s)] = acc;
                }
            }
        }
    }
    out
}

/// Sectional curvature of the coordinate plane spanned by ∂_p and ∂_q.
pub fn sectional(bundle: &CurvatureBundle, g: &Mat, p: usize, q: usize) -> Result<f64> {
    if p == q {
        return Err(LkError::invalid("sectional curvature needs two distinct directions"));
    }
    let denom = g[(p, p)] * g[(q, q)] - g[(p, q)] * g[(p, q)];
    if !(denom > 0.0) {
        return Err(LkError::NotPositiveDefinite { point: vec![] });
    }
    Ok(CONVENTION.sectional_factor * 2.0 * bundle.r_lower(p, q, p, q) / denom)
}

/// Largest violations of the algebraic Riemann symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub first_pair: f64,
    pub second_pair: f64,
    pub pair_exchange: f64,
    pub bianchi: f64,
    /// max |R_pqrs|, the scale for relative checks.
    pub scale: f64,
}

impl SymmetryReport {
    pub fn max_violation(&self) -> f64 {
        self.first_pair
            .max(self.second_pair)
            .max(self.pair_exchange)
            .max(self.bianchi)
    }

    pub fn max_relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_violation()
        } else {
            self.max_violation() / self.scale
        }
    }
}

pub fn symmetry_report(r: &[f64], n: usize) -> SymmetryReport {
    let at = |p, q, s, t| r[i4(n, p, q, s, t)];
    let mut rep = SymmetryReport {
        first_pair: 0.0,
        second_pair: 0.0,
        pair_exchange: 0.0,
        bianchi: 0.0,
        scale: 0.0,
    };
    for p in 0..n {
        for q in 0..n {
            for s in 0..n {
                for t in 0..n {
                    let v = at(p, q, s, t);
                    rep.scale = rep.scale.max(v.abs());
                    rep.first_pair = rep.first_pair.max((v + at(q, p, s, t)).abs());
                    rep.second_pair = rep.second_pair.max((v + at(p, q, t, s)).abs());
                    rep.pair_exchange = rep.pair_exchange.max((v - at(s, t, p, q)).abs());
                    rep.bianchi = rep
                        .bianchi
                        .max((v + at(p, s, t, q) + at(p, t, q, s)).abs());
                }
            }
        }
    }
    rep
}
