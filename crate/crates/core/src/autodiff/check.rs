//! Finite-difference verification of analytic gradients.

use crate::error::Result;

use super::{Graph, NodeId, Tensor};

/// Central-difference step used by the self-checks.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Compare the analytic gradient of a scalar-valued function against central
/// finite differences, coordinate by coordinate.
///
/// `build` receives a fresh graph and the node holding `theta` and must
/// return a scalar loss node. Returns
/// `max_i |g_analytic_i - g_central_i| / max(1, |g_central_i|)`.
pub fn finite_diff_check<F>(build: F, theta: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    assert!(h > 0.0, "finite-difference step must be positive");

    let mut g = Graph::new();
    let id = g.param(theta.clone());
    let loss = build(&mut g, id)?;
    g.backward(loss)?;
    let analytic = g
        .grad(id)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; theta.len()]);

    let eval = |t: &Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let id = g.input(t.clone());
        let loss = build(&mut g, id)?;
        g.value(loss).item()
    };

    let mut max_err: f64 = 0.0;
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus.values_mut()[i] += h;
        let mut minus = theta.clone();
        minus.values_mut()[i] -= h;
        let central = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
        let err = (analytic[i] - central).abs() / central.abs().max(1.0);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
