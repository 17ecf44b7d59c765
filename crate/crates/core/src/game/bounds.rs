use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{eval_phi_jacobian, GameSpec, PhiShape, PlayerSpec};
use crate::error::Result;

/// Grid points per coordinate when a sup has no closed form.
const GRID_PER_COORD: usize = 64;
/// Cap on the number of grid points per player; the per-coordinate
/// resolution shrinks for high-dimensional players.
const GRID_BUDGET: usize = 1 << 18;
const GRID_INFLATION: f64 = 1.1;
/// Above this dimension vertex enumeration is replaced by the grid.
const MAX_VERTEX_DIM: usize = 16;

/// Sufficient-condition constants for the consensus gains:
/// `α > (N−1) f̄₁` and `β > γ (N−1) f̄₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamBounds {
    pub f1_bar: f64,
    pub f2_bar: f64,
    pub players: usize,
}

impl ParamBounds {
    pub fn alpha_min(&self) -> f64 {
        (self.players as f64 - 1.0) * self.f1_bar
    }

    pub fn beta_min(&self, gamma: f64) -> f64 {
        gamma * (self.players as f64 - 1.0) * self.f2_bar
    }

    pub fn alpha_ok(&self, alpha: f64) -> bool {
        alpha > self.alpha_min()
    }

    pub fn beta_ok(&self, beta: f64, gamma: f64) -> bool {
        beta > self.beta_min(gamma)
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

fn vertices(p: &PlayerSpec) -> impl Iterator<Item = DVector<f64>> + '_ {
    let n = p.dim();
    (0u64..(1u64 << n)).map(move |mask| {
        DVector::from_iterator(
            n,
            (0..n).map(|k| if mask >> k & 1 == 1 { p.box_hi[k] } else { p.box_lo[k] }),
        )
    })
}

fn grid(p: &PlayerSpec) -> impl Iterator<Item = DVector<f64>> + '_ {
    let n = p.dim();
    let mut per = GRID_PER_COORD;
    while per > 2 && per.checked_pow(n as u32).is_none_or(|t| t > GRID_BUDGET) {
        per -= 1;
    }
    let total = per.pow(n as u32);
    (0..total).map(move |mut idx| {
        DVector::from_iterator(
            n,
            (0..n).map(|k| {
                let j = idx % per;
                idx /= per;
                p.box_lo[k] + (p.box_hi[k] - p.box_lo[k]) * j as f64 / (per - 1) as f64
            }),
        )
    })
}

fn sup_over<I>(points: I, mut f: impl FnMut(&DVector<f64>) -> Result<f64>) -> Result<f64>
where
    I: Iterator<Item = DVector<f64>>,
{
    let mut best = 0.0f64;
    for x in points {
        best = best.max(f(&x)?);
    }
    Ok(best)
}

/// Convex functions of `x_i` peak at a vertex of the box; anything else is
/// sampled on a grid and inflated by 10%.
fn sup_convex_or_grid(
    p: &PlayerSpec,
    convex: bool,
    f: impl FnMut(&DVector<f64>) -> Result<f64>,
) -> Result<f64> {
    if convex && p.dim() <= MAX_VERTEX_DIM {
        sup_over(vertices(p), f)
    } else {
        Ok(GRID_INFLATION * sup_over(grid(p), f)?)
    }
}

/// `f̄₁ = sup_i sup_{x_i ∈ Ω_i} ‖∇φ_i(x_i)‖ · diam(Ω)` and
/// `f̄₂ = sup_i sup_{x_i ∈ Ω_i} ‖A_i x_i − b_i‖`.
pub fn compute_bounds(game: &GameSpec) -> Result<ParamBounds> {
    let diam = game.diameter();
    let mut f1 = 0.0f64;
    let mut f2 = 0.0f64;
    for (i, p) in game.players().iter().enumerate() {
        let jac_norm = match p.cost.phi_shape() {
            PhiShape::Affine => {
                let centre = (&p.box_lo + &p.box_hi) / 2.0;
                spectral_norm(&eval_phi_jacobian(p, i, &centre)?)
            }
            PhiShape::Quadratic => {
                sup_convex_or_grid(p, true, |x| Ok(spectral_norm(&eval_phi_jacobian(p, i, x)?)))?
            }
            PhiShape::General => {
                sup_convex_or_grid(p, false, |x| Ok(spectral_norm(&eval_phi_jacobian(p, i, x)?)))?
            }
        };
        f1 = f1.max(jac_norm * diam);
        if game.constraint_rows() > 0 {
            f2 = f2.max(sup_convex_or_grid(p, true, |x| Ok(p.local_residual(x).norm()))?);
        }
    }
    Ok(ParamBounds { f1_bar: f1, f2_bar: f2, players: game.player_count() })
}
