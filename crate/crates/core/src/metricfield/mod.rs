//! Chart metrics: the expression DSL, 2-jet arithmetic and metric jets.

mod chart;
mod expr;
mod jet;

pub use chart::{metric_jet, Chart, ChartFile, MetricJet, MetricSource};
pub(crate) use chart::require_positive_definite;
pub use expr::{parse_expr, BinOp, Expr, Func};
pub use jet::{tri_index, Jet2, MAX_DIM};

/// Jet of `expr` at `point` (alias kept for symmetry with [`metric_jet`]).
pub fn eval_jet2(expr: &Expr, point: &[f64]) -> crate::Result<Jet2> {
    expr.eval_jet2(point)
}
