//! Choice of the inter-layer intensity `omega*` minimizing the total distance `Delta_M`.
//!
//! `Delta_M` is continuous on `[0, 1]` but not known to be unimodal, so the
//! search samples a uniform grid and then polishes the best grid cell with a
//! golden-section search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::communicability::{multiplex_communicability, total_distance, Normalization};
use crate::error::{Error, Result};
use crate::golden::golden_section;
use crate::model::MultiplexNetwork;

/// Search domain start when `omega = 0` leaves some node without strength.
pub const INFEASIBLE_START: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaSearch {
    pub grid_points: usize,
    pub refine_tol: f64,
    pub normalization: Normalization,
    /// Step of the central differences used for verification.
    pub fd_step: f64,
}

impl Default for OmegaSearch {
    fn default() -> Self {
        Self {
            grid_points: 101,
            refine_tol: 1e-4,
            normalization: Normalization::default(),
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub omega: f64,
    pub delta_m: f64,
}

/// Finite-difference estimates of both sides of `nh sum_i G'_ii = sum_ij G'_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub trace_side: f64,
    pub sum_side: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSearchResult {
    pub omega_star: f64,
    pub delta_m_star: f64,
    pub curve: Vec<CurvePoint>,
    /// `omega_star` lies within `refine_tol` of either end of the domain.
    pub boundary: bool,
    /// `|Delta_M'(omega_star)|` by finite differences.
    pub stationarity_residual: f64,
    pub stationarity: Option<Stationarity>,
    pub domain_start: f64,
    pub zero_infeasible: bool,
    pub normalization: Normalization,
    pub grid_points: usize,
    pub refine_tol: f64,
}

pub fn delta_m_of_omega(m: &MultiplexNetwork, omega: f64, normalization: Normalization) -> Result<f64> {
    let c = multiplex_communicability(m, omega, normalization)?;
    Ok(total_distance(c.g()))
}

/// Derivative by central differences, falling back to one-sided steps at the ends of `[0, 1]`.
fn derivative<T>(
    omega: f64,
    step: f64,
    mut f: impl FnMut(f64) -> Result<T>,
    diff: impl Fn(&T, &T) -> f64,
) -> Result<f64> {
    let lo = (omega - step).max(0.0);
    let hi = (omega + step).min(1.0);
    let (a, b) = if lo < omega && hi > omega {
        (lo, hi)
    } else if hi > omega {
        (omega, hi)
    } else {
        (lo, omega)
    };
    let fa = f(a)?;
    let fb = f(b)?;
    Ok(diff(&fb, &fa) / (b - a))
}

/// Estimate `nh sum_i G'_ii` and `sum_ij G'_ij` at `omega`.
pub fn stationarity_identity(
    m: &MultiplexNetwork,
    omega: f64,
    normalization: Normalization,
    step: f64,
) -> Result<Stationarity> {
    let big_n = (m.n() * m.h()) as f64;
    let sides = |w: f64| -> Result<(f64, f64)> {
        let c = multiplex_communicability(m, w, normalization)?;
        Ok((c.g().trace(), c.g().sum()))
    };
    let trace_side = big_n * derivative(omega, step, sides, |b, a| b.0 - a.0)?;
    let sum_side = derivative(omega, step, sides, |b, a| b.1 - a.1)?;
    let scale = trace_side.abs().max(sum_side.abs());
    let relative_gap = if scale == 0.0 {
        0.0
    } else {
        (trace_side - sum_side).abs() / scale
    };
    Ok(Stationarity {
        trace_side,
        sum_side,
        relative_gap,
    })
}

pub fn find_omega_star(m: &MultiplexNetwork, params: &OmegaSearch) -> Result<OmegaSearchResult> {
    if params.grid_points < 3 {
        return Err(Error::InvalidParameter(format!(
            "grid_points must be at least 3, got {}",
            params.grid_points
        )));
    }
    if params.refine_tol.is_nan() || params.refine_tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "refine_tol must be positive, got {}",
            params.refine_tol
        )));
    }
    let norm = params.normalization;
    let eval = |w: f64| delta_m_of_omega(m, w, norm);

    let at_zero = eval(0.0);
    let zero_infeasible = matches!(at_zero, Err(Error::ZeroStrength { .. }));
    let start = if zero_infeasible { INFEASIBLE_START } else { 0.0 };
    let last = params.grid_points - 1;
    let grid: Vec<f64> = (0..params.grid_points)
        .map(|k| {
            if k == last {
                1.0
            } else {
                start + (1.0 - start) * k as f64 / last as f64
            }
        })
        .collect();

    let values: Vec<Result<f64>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &w)| match (k, &at_zero) {
            (0, Ok(v)) if start == 0.0 => Ok(*v),
            _ => eval(w),
        })
        .collect();

    let mut curve = Vec::with_capacity(grid.len());
    let mut first_error = None;
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.into_iter().enumerate() {
        match v {
            Ok(d) => {
                curve.push(CurvePoint {
                    omega: grid[k],
                    delta_m: d,
                });
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((k, d));
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let Some((k_best, d_best)) = best else {
        return Err(Error::NoFeasibleOmega(Box::new(
            first_error.expect("grid is non-empty"),
        )));
    };

    let lo = grid[k_best.saturating_sub(1)];
    let hi = grid[(k_best + 1).min(last)];
    let (mut omega_star, mut delta_m_star) = (grid[k_best], d_best);
    if let Ok(refined) = golden_section(eval, lo, hi, params.refine_tol) {
        if refined.fx < delta_m_star {
            omega_star = refined.x;
            delta_m_star = refined.fx;
        }
    }

    let boundary = omega_star - start <= params.refine_tol || 1.0 - omega_star <= params.refine_tol;
    let stationarity_residual = derivative(omega_star, params.fd_step, eval, |b, a| b - a)
        .map(f64::abs)
        .unwrap_or(f64::NAN);
    let stationarity = stationarity_identity(m, omega_star, norm, params.fd_step).ok();

    Ok(OmegaSearchResult {
        omega_star,
        delta_m_star,
        curve,
        boundary,
        stationarity_residual,
        stationarity,
        domain_start: start,
        zero_infeasible,
        normalization: norm,
        grid_points: params.grid_points,
        refine_tol: params.refine_tol,
    })
}
