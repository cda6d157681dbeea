//! State-covariance recursion and the Gram-weighted parameter error.
//!
//! `P_i = Σ_{k=1}^i A^{k-1}(A^{k-1})ᵀ` is the covariance of state `z_i`; it
//! obeys the Lyapunov-style recursion `P_1 = I`, `P_{j+1} = I + A P_j Aᵀ`,
//! which is what we compute (never explicit matrix powers — the recursion has
//! far better roundoff behavior near instability and stores nothing).
//! `G_n = Σ_{i=1}^n P_i` is the unnormalized weighting matrix; the weighted
//! parameter error is `tr((A★−Â)ᵀ(A★−Â)·G_n(A★))/n`.

use nalgebra::DMatrix;

use crate::ar_model::SystemMatrix;
use crate::error::{Error, Result};

/// State covariance `P_i` at step `i ≥ 1` (symmetric PSD, `P_1 = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixCovariance {
    index: usize,
    matrix: DMatrix<f64>,
}

impl PrefixCovariance {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Accumulated weighting matrix `G_n = Σ_{i=1}^n P_i` (symmetric PSD,
/// stored unnormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    horizon: usize,
    matrix: DMatrix<f64>,
}

impl GramMatrix {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Run the covariance recursion up to `n`, invoking `visit(i, P_i)` for every
/// step. Symmetrizes after each update so asymmetry cannot drift over long
/// horizons, and aborts with the step index on the first non-finite entry.
fn covariance_scan(
    a: &SystemMatrix,
    n: usize,
    mut visit: impl FnMut(usize, &DMatrix<f64>),
) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be ≥ 1".into()));
    }
    let d = a.dim();
    let mut p = DMatrix::<f64>::identity(d, d);
    visit(1, &p);
    for i in 2..=n {
        let ap = a.entries() * &p;
        p = DMatrix::identity(d, d) + &ap * a.entries().transpose();
        p = (&p + p.transpose()) * 0.5;
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow {
                context: "state covariance recursion",
                step: i,
            });
        }
        visit(i, &p);
    }
    Ok(())
}

/// State covariance `P_i` via the recursion `P_1 = I`, `P_{j+1} = I + A P_j Aᵀ`.
pub fn prefix_covariance(a: &SystemMatrix, index: usize) -> Result<PrefixCovariance> {
    let mut last = None;
    covariance_scan(a, index, |i, p| {
        if i == index {
            last = Some(p.clone());
        }
    })?;
    Ok(PrefixCovariance {
        index,
        matrix: last.expect("scan visits every step up to index"),
    })
}

/// `G_n = Σ_{i=1}^n P_i`, accumulated alongside the recursion.
pub fn gram(a: &SystemMatrix, horizon: usize) -> Result<GramMatrix> {
    let d = a.dim();
    let mut g = DMatrix::<f64>::zeros(d, d);
    covariance_scan(a, horizon, |_, p| g += p)?;
    if !g.iter().all(|x| x.is_finite()) {
        return Err(Error::Overflow {
            context: "gram accumulation",
            step: horizon,
        });
    }
    Ok(GramMatrix {
        horizon,
        matrix: g,
    })
}

/// `tr((A★−A)ᵀ(A★−A)·G_n(A★))`, the unnormalized error trace. Shared by
/// [`weighted_error`] and the divergence module so the two stay equal by
/// construction.
pub(crate) fn error_trace(astar: &SystemMatrix, a: &SystemMatrix, horizon: usize) -> Result<f64> {
    if astar.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: "error trace",
            expected: astar.dim(),
            got: a.dim(),
        });
    }
    let g = gram(astar, horizon)?;
    let delta = astar.entries() - a.entries();
    let value = (delta.transpose() * &delta * g.matrix()).trace();
    // Trace of a product of PSD matrices; clamp roundoff that dips below zero.
    Ok(value.max(0.0))
}

/// Gram-weighted parameter error `tr((A★−Â)ᵀ(A★−Â)·(1/n)·G_n(A★)) ≥ 0`.
pub fn weighted_error(astar: &SystemMatrix, ahat: &SystemMatrix, horizon: usize) -> Result<f64> {
    Ok(error_trace(astar, ahat, horizon)? / horizon as f64)
}
