//! Projections and merit functions on the augmented space `Θ = Ω × R^l`.
//!
//! For `θ = (x, λ̄)` the augmented map is
//! `F̂(θ) = (F(x) + (γ/N) Aᵀλ̄, −(γ/N)(Ax − b))` and the projected point is
//! `Ĥ(θ) = P_Θ(θ − F̂(θ))`, which clamps `x` and leaves `λ̄` alone. The
//! regularized gap `g(θ) = (θ − Ĥ)ᵀF̂ − ½‖θ − Ĥ‖²` is nonnegative and
//! vanishes exactly at KKT points.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::GameSpec;

/// Componentwise clamp; assumes `lo ≤ hi`.
pub(crate) fn clamp(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    v.zip_zip_map(lo, hi, |x, l, h| x.max(l).min(h))
}

/// Euclidean projection onto the box `[lo, hi]`.
pub fn project_box(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != lo.len() || v.len() != hi.len() {
        return Err(Error::Shape { context: "project_box", expected: lo.len(), found: v.len() });
    }
    if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] <= hi[k])) {
        return Err(Error::InvalidBox { player: 0, coord: k, lo: lo[k], hi: hi[k] });
    }
    Ok(clamp(v, lo, hi))
}

/// A point `θ = (x, λ̄)` of `Ω × R^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    pub x: DVector<f64>,
    pub lambda_bar: DVector<f64>,
}

impl AugmentedPoint {
    pub fn new(x: DVector<f64>, lambda_bar: DVector<f64>) -> Self {
        Self { x, lambda_bar }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len() + self.lambda_bar.len(),
            self.x.iter().chain(self.lambda_bar.iter()).copied(),
        )
    }

    pub fn from_vector(v: &DVector<f64>, n: usize) -> Self {
        Self {
            x: v.rows(0, n).into_owned(),
            lambda_bar: v.rows(n, v.len() - n).into_owned(),
        }
    }

    fn check(&self, game: &GameSpec) -> Result<()> {
        game.check_profile(&self.x)?;
        if self.lambda_bar.len() != game.constraint_rows() {
            return Err(Error::Shape {
                context: "lambda_bar",
                expected: game.constraint_rows(),
                found: self.lambda_bar.len(),
            });
        }
        Ok(())
    }
}

fn dual_scale(game: &GameSpec, gamma: f64) -> f64 {
    gamma / game.player_count() as f64
}

/// `F̂(θ)`, stacked as an `n + l` vector.
pub fn augmented_map(game: &GameSpec, gamma: f64, theta: &AugmentedPoint) -> Result<DVector<f64>> {
    theta.check(game)?;
    let scale = dual_scale(game, gamma);
    let a = game.constraint_matrix();
    let top = game.pseudo_gradient(&theta.x)? + a.transpose() * &theta.lambda_bar * scale;
    let bottom = -game.constraint_residual(&theta.x)? * scale;
    Ok(AugmentedPoint::new(top, bottom).to_vector())
}

/// `JF̂(θ) = [[JF, (γ/N)Aᵀ], [−(γ/N)A, 0]]`.
pub fn augmented_jacobian(game: &GameSpec, gamma: f64, theta: &AugmentedPoint) -> Result<DMatrix<f64>> {
    theta.check(game)?;
    let n = game.dim();
    let l = game.constraint_rows();
    let scale = dual_scale(game, gamma);
    let a = game.constraint_matrix();
    let mut j = DMatrix::zeros(n + l, n + l);
    j.view_mut((0, 0), (n, n)).copy_from(&game.pseudo_jacobian(&theta.x)?);
    j.view_mut((0, n), (n, l)).copy_from(&(a.transpose() * scale));
    j.view_mut((n, 0), (l, n)).copy_from(&(a * -scale));
    Ok(j)
}

/// `P_Θ`: clamp the `x` block, identity on `λ̄`.
pub fn project_augmented(game: &GameSpec, v: &DVector<f64>) -> DVector<f64> {
    let n = game.dim();
    let mut out = v.clone();
    let x = game.project(&v.rows(0, n).into_owned());
    out.rows_mut(0, n).copy_from(&x);
    out
}

/// `θ − Ĥ(θ)` together with `F̂(θ)`.
fn natural_residual(
    game: &GameSpec,
    gamma: f64,
    theta: &AugmentedPoint,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let f = augmented_map(game, gamma, theta)?;
    let t = theta.to_vector();
    let h = project_augmented(game, &(&t - &f));
    Ok((t - h, f))
}

/// Regularized gap `g(θ)`.
pub fn gap_value(game: &GameSpec, gamma: f64, theta: &AugmentedPoint) -> Result<f64> {
    let (r, f) = natural_residual(game, gamma, theta)?;
    Ok(r.dot(&f) - 0.5 * r.norm_squared())
}

/// `∇g(θ) = F̂(θ) + (JF̂(θ)ᵀ − I)(θ − Ĥ(θ))`, with `JF̂` the Jacobian
/// (rows are outputs). The transpose matters: the dual block of `JF̂` is skew.
pub fn gap_gradient(game: &GameSpec, gamma: f64, theta: &AugmentedPoint) -> Result<DVector<f64>> {
    let (r, f) = natural_residual(game, gamma, theta)?;
    let j = augmented_jacobian(game, gamma, theta)?;
    Ok(f + j.tr_mul(&r) - &r)
}

/// `V(θ) = g(θ) + ½‖θ − θ*‖²`.
pub fn lyapunov_value(
    game: &GameSpec,
    gamma: f64,
    theta: &AugmentedPoint,
    theta_star: &AugmentedPoint,
) -> Result<f64> {
    theta_star.check(game)?;
    let g = gap_value(game, gamma, theta)?;
    Ok(g + 0.5 * (theta.to_vector() - theta_star.to_vector()).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_demand_response, DemandResponseParams};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn clamp_examples() {
        let (lo, hi) = (v(&[0.0]), v(&[20.0]));
        assert_eq!(project_box(&v(&[25.0]), &lo, &hi).unwrap()[0], 20.0);
        assert_eq!(project_box(&v(&[-3.0]), &lo, &hi).unwrap()[0], 0.0);
        assert_eq!(project_box(&v(&[7.0]), &lo, &hi).unwrap()[0], 7.0);
    }

    #[test]
    fn inverted_box_is_rejected() {
        assert!(project_box(&v(&[1.0, 1.0]), &v(&[0.0, 2.0]), &v(&[1.0, 1.0])).is_err());
        assert!(project_box(&v(&[1.0]), &v(&[0.0, 0.0]), &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn dual_block_of_augmented_map() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let theta = AugmentedPoint::new(v(&[50.0, 55.0, 60.0, 65.0, 70.0]), v(&[0.0]));
        let f = augmented_map(&game, 2.0, &theta).unwrap();
        assert!((f[5] + 10.0).abs() < 1e-12);
        assert!((f[0] - 19.0).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_augmented_map_is_pseudo_gradient() {
        let game = build_demand_response(&DemandResponseParams { constrained: false, ..Default::default() })
            .unwrap();
        let x = v(&[47.0, 50.0, 60.0, 61.0, 70.0]);
        let f = augmented_map(&game, 2.0, &AugmentedPoint::new(x.clone(), v(&[]))).unwrap();
        assert_eq!(f, game.pseudo_gradient(&x).unwrap());
    }

    #[test]
    fn lambda_shape_is_checked() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let theta = AugmentedPoint::new(v(&[50.0, 55.0, 60.0, 65.0, 70.0]), v(&[]));
        assert!(augmented_map(&game, 2.0, &theta).is_err());
    }

    #[test]
    fn lyapunov_vanishes_at_reference() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let theta = AugmentedPoint::new(v(&[50.0, 55.0, 60.0, 65.0, 70.0]), v(&[1.0]));
        let v0 = lyapunov_value(&game, 2.0, &theta, &theta).unwrap();
        let g = gap_value(&game, 2.0, &theta).unwrap();
        assert_eq!(v0, g);
    }

    #[test]
    fn gap_gradient_matches_finite_differences_with_coupling() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let theta = AugmentedPoint::new(v(&[47.0, 52.5, 61.0, 70.0, 60.0]), v(&[-12.0]));
        let analytic = gap_gradient(&game, 2.0, &theta).unwrap();
        let fd = crate::fd::gradient(&theta.to_vector(), |t| {
            gap_value(&game, 2.0, &AugmentedPoint::from_vector(t, 5)).unwrap()
        });
        assert!((&analytic - &fd).norm() <= 1e-6 * fd.norm().max(1.0), "{analytic} vs {fd}");
    }
}
