//! The decision-problem contract consumed by the solver.

/// A convex cost model `f(x, xi)` with a subgradient selector in `x` and a
/// Euclidean projection onto the feasible set.
///
/// `evaluate` must be finite for all feasible `x` and all `xi` in the band's
/// support box, and `project` must be idempotent.
pub trait Problem: Send + Sync {
    /// Decision dimension `n`.
    fn dim_x(&self) -> usize;

    /// Cost `f(x, xi)` in problem units.
    fn evaluate(&self, x: &[f64], xi: &[f64]) -> f64;

    /// Writes one valid subgradient of `f(., xi)` at `x` into `out`
    /// (`out.len() == dim_x`). The selection rule is fixed per problem so runs
    /// are reproducible.
    fn subgradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]);

    /// Euclidean projection of `x` onto the feasible set, in place.
    fn project(&self, x: &mut [f64]);
}
