//! Centralized reference solutions.
//!
//! The variational GNE is the `x`-part of a zero of
//! `θ − P_Θ(θ − F̂(θ))` on `Θ = Ω × R^l`. We find it with a projected
//! extragradient method, which converges for monotone `F̂` even though the
//! dual block is only skew (not strictly monotone).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::geometry::{augmented_map, project_augmented, AugmentedPoint};

/// Output of the centralized solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktPoint {
    #[serde(serialize_with = "crate::io::ser_vector")]
    pub x_star: DVector<f64>,
    #[serde(serialize_with = "crate::io::ser_vector")]
    pub lambda_star: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl KktPoint {
    pub fn theta(&self) -> AugmentedPoint {
        AugmentedPoint::new(self.x_star.clone(), self.lambda_star.clone())
    }
}

/// `‖θ − Ĥ(θ)‖` split as `‖x-part‖ + ‖λ-part‖`, given `F̂(θ)`.
fn residual_from(game: &GameSpec, theta: &DVector<f64>, f: &DVector<f64>) -> f64 {
    let n = game.dim();
    let h = project_augmented(game, &(theta - f));
    let primal = (h.rows(0, n) - theta.rows(0, n)).norm();
    let dual = f.rows(n, f.len() - n).norm();
    primal + dual
}

/// `‖P_Ω(x − F(x) − (γ/N)Aᵀλ̄) − x‖ + ‖(γ/N)(Ax − b)‖`.
pub fn kkt_residual(game: &GameSpec, gamma: f64, x: &DVector<f64>, lambda_bar: &DVector<f64>) -> Result<f64> {
    let theta = AugmentedPoint::new(x.clone(), lambda_bar.clone());
    let f = augmented_map(game, gamma, &theta)?;
    Ok(residual_from(game, &theta.to_vector(), &f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtragradientOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Initial step; estimated from a local Lipschitz constant when `None`.
    pub step: Option<f64>,
    pub seed: u64,
}

impl Default for ExtragradientOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 2_000_000, step: None, seed: 0 }
    }
}

fn sample_theta(game: &GameSpec, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let lo = game.box_lo();
    let hi = game.box_hi();
    let n = game.dim();
    DVector::from_fn(n + game.constraint_rows(), |k, _| {
        if k < n {
            if lo[k] < hi[k] {
                rng.gen_range(lo[k]..=hi[k])
            } else {
                lo[k]
            }
        } else {
            rng.gen_range(-1.0..=1.0)
        }
    })
}

/// Largest finite-difference slope `‖F̂(θ + δu) − F̂(θ)‖ / δ` over 100
/// random base points and unit directions.
pub fn lipschitz_estimate(game: &GameSpec, gamma: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = game.dim();
    let mut best = 0.0f64;
    for _ in 0..100 {
        let theta = sample_theta(game, &mut rng);
        let mut dir = DVector::from_fn(theta.len(), |_, _| rng.gen_range(-1.0..=1.0));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        dir /= norm;
        let delta = 1e-4 * (1.0 + theta.norm());
        let a = augmented_map(game, gamma, &AugmentedPoint::from_vector(&theta, n))?;
        let b = augmented_map(game, gamma, &AugmentedPoint::from_vector(&(&theta + &dir * delta), n))?;
        best = best.max((b - a).norm() / delta);
    }
    Ok(best)
}

/// Projected extragradient on `F̂` over `Θ`:
/// `θ̃ = P(θ − τF̂(θ))`, `θ⁺ = P(θ − τF̂(θ̃))`.
///
/// The step is halved whenever `τ‖F̂(θ) − F̂(θ̃)‖ > 0.9‖θ − θ̃‖`. Returns the
/// best iterate seen, flagged non-converged, when `max_iters` runs out.
pub fn solve_extragradient(game: &GameSpec, gamma: f64, opts: &ExtragradientOptions) -> Result<KktPoint> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let n = game.dim();
    let mut tau = match opts.step {
        Some(s) => s,
        None => 0.5 / (1.0 + lipschitz_estimate(game, gamma, opts.seed)?),
    };
    let map = |t: &DVector<f64>| augmented_map(game, gamma, &AugmentedPoint::from_vector(t, n));

    let centre = (game.box_lo() + game.box_hi()) / 2.0;
    let mut theta = AugmentedPoint::new(centre, DVector::zeros(game.constraint_rows())).to_vector();
    let mut f = map(&theta)?;
    let mut residual = residual_from(game, &theta, &f);
    let mut best = (residual, theta.clone());
    let mut iterations = 0;

    while residual > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        let trial = project_augmented(game, &(&theta - &f * tau));
        let f_trial = map(&trial)?;
        let moved = (&theta - &trial).norm();
        if moved == 0.0 {
            break;
        }
        if tau * (&f - &f_trial).norm() > 0.9 * moved {
            tau *= 0.5;
            continue;
        }
        theta = project_augmented(game, &(&theta - &f_trial * tau));
        f = map(&theta)?;
        residual = residual_from(game, &theta, &f);
        if residual < best.0 {
            best = (residual, theta.clone());
        }
    }

    let (residual, theta) = best;
    let point = AugmentedPoint::from_vector(&theta, n);
    Ok(KktPoint {
        x_star: point.x,
        lambda_star: point.lambda_bar,
        residual,
        iterations,
        converged: residual <= opts.tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// No feasible unilateral deviation could be sampled.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GneCheck {
    pub verdict: Verdict,
    /// Largest cost decrease `J_i(x*) − J_i(y, x*_{−i})` found; negative
    /// when every sampled deviation costs more.
    pub worst_violation: f64,
    pub worst_player: Option<usize>,
    pub deviations: usize,
    pub players_checked: usize,
}

/// Orthonormal basis of the null space of `m` (columns).
fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Eigenvectors of MᵀM with (numerically) zero eigenvalue.
    let gram = m.transpose() * m;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    let keep: Vec<_> = (0..cols).filter(|&k| eig.eigenvalues[k].abs() <= 1e-12 * scale).collect();
    DMatrix::from_fn(cols, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
}

/// Interval of `t` with `lo ≤ x + t d ≤ hi`.
fn line_interval(x: &DVector<f64>, d: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> (f64, f64) {
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for k in 0..x.len() {
        if d[k].abs() < 1e-15 {
            continue;
        }
        let a = (lo[k] - x[k]) / d[k];
        let b = (hi[k] - x[k]) / d[k];
        t_lo = t_lo.max(a.min(b));
        t_hi = t_hi.min(a.max(b));
    }
    (t_lo, t_hi)
}

/// Random point on the segment through `x` along a random direction of the
/// subspace spanned by `basis`, clipped to the box. `None` if the subspace
/// is trivial or the segment degenerates.
fn hit_and_run(
    x: &DVector<f64>,
    basis: &DMatrix<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<DVector<f64>> {
    if basis.ncols() == 0 {
        return None;
    }
    let coeffs = DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..=1.0));
    let d = basis * coeffs;
    let (t_lo, t_hi) = line_interval(x, &d, lo, hi);
    if !(t_lo.is_finite() && t_hi.is_finite()) || t_hi - t_lo <= 0.0 {
        return None;
    }
    let t = rng.gen_range(t_lo..=t_hi);
    Some(crate::geometry::clamp(&(x + d * t), lo, hi))
}

/// Check `J_i(y, x*_{−i}) ≥ J_i(x*) − tol` for `samples` random feasible
/// unilateral deviations of every player.
///
/// With one coupled row, player `i` may move only inside
/// `{y ∈ Ω_i : A_i y = A_i x*_i}`; a scalar player with `A_i ≠ 0` is pinned
/// and contributes no deviations. Games with more rows are inconclusive.
pub fn verify_gne(game: &GameSpec, x_star: &DVector<f64>, samples: usize, seed: u64, tol: f64) -> Result<GneCheck> {
    game.check_profile(x_star)?;
    if !game.contains(x_star) {
        return Err(Error::InvalidParameter("verify_gne: x* lies outside Ω".into()));
    }
    if game.constraint_residual(x_star)?.norm() > tol.max(1e-9) {
        return Err(Error::InvalidParameter("verify_gne: x* violates the coupled constraint".into()));
    }
    let mut check = GneCheck {
        verdict: Verdict::Inconclusive,
        worst_violation: f64::NEG_INFINITY,
        worst_player: None,
        deviations: 0,
        players_checked: 0,
    };
    if game.constraint_rows() > 1 {
        log::info!("verify_gne: {} coupled rows; deviation sampling skipped", game.constraint_rows());
        return Ok(check);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, p) in game.players().iter().enumerate() {
        let base = game
            .player_cost(i, x_star)?
            .ok_or(Error::MissingCallback { player: i, what: "cost" })?;
        let xi = game.block(x_star, i);
        let basis = null_space(&p.a_block);
        let mut tested = 0;
        for _ in 0..samples {
            let Some(y) = hit_and_run(&xi, &basis, &p.box_lo, &p.box_hi, &mut rng) else {
                continue;
            };
            let mut x = x_star.clone();
            let r = game.range(i);
            x.rows_mut(r.start, r.len()).copy_from(&y);
            let cost = game.player_cost(i, &x)?.expect("cost present");
            let gain = base - cost;
            if gain > check.worst_violation {
                check.worst_violation = gain;
                check.worst_player = Some(i);
            }
            tested += 1;
        }
        check.deviations += tested;
        if tested > 0 {
            check.players_checked += 1;
        }
    }
    if check.deviations > 0 {
        check.verdict = if check.worst_violation > tol { Verdict::Fail } else { Verdict::Pass };
    }
    Ok(check)
}

/// Random points of `K = Ω ∩ {Ax = b}` by hit-and-run from a feasible anchor.
pub fn sample_feasible_set(game: &GameSpec, anchor: &DVector<f64>, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    game.check_profile(anchor)?;
    let basis = null_space(&game.constraint_matrix());
    let lo = game.box_lo();
    let hi = game.box_hi();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = anchor.clone();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        if let Some(y) = hit_and_run(&x, &basis, &lo, &hi, &mut rng) {
            x = y;
            out.push(x.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_demand_response, build_quadratic, DemandResponseParams, QuadraticPlayer};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn single_quadratic() -> GameSpec {
        // ½(x − 5)² = ½x² − 5x + const.
        let p = QuadraticPlayer { q: 1.0, r: -5.0, s: 0.0, lo: 0.0, hi: 20.0, a_row: vec![], b: vec![] };
        build_quadratic("single", &[p]).unwrap()
    }

    #[test]
    fn single_player_minimum() {
        let kkt = solve_extragradient(&single_quadratic(), 1.0, &ExtragradientOptions::default()).unwrap();
        assert!(kkt.converged);
        assert!((kkt.x_star[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_point_has_dual_residual() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let x = v(&[50.0, 55.0, 60.0, 65.0, 70.0]);
        let r = kkt_residual(&game, 2.0, &x, &v(&[0.0])).unwrap();
        assert!(r >= 2.0 / 5.0 * 25.0);
    }

    #[test]
    fn demand_response_solutions() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let kkt = solve_extragradient(&game, 2.0, &ExtragradientOptions::default()).unwrap();
        assert!(kkt.converged, "{kkt:?}");
        let expected = [45.2, 50.1, 55.0, 59.9, 64.8];
        for (a, b) in kkt.x_star.iter().zip(expected) {
            assert!((a - b).abs() <= 0.15);
        }
        assert!((kkt.lambda_star[0] + 20.5).abs() < 1e-6);
        assert!(kkt_residual(&game, 2.0, &kkt.x_star, &kkt.lambda_star).unwrap() <= 1e-8);

        let free = build_demand_response(&DemandResponseParams { constrained: false, ..Default::default() })
            .unwrap();
        let kkt = solve_extragradient(&free, 2.0, &ExtragradientOptions::default()).unwrap();
        let expected = [45.0, 46.4, 51.3, 56.2, 61.1];
        for (a, b) in kkt.x_star.iter().zip(expected) {
            assert!((a - b).abs() <= 0.15);
        }
        assert!(kkt_residual(&free, 2.0, &kkt.x_star, &v(&[])).unwrap() <= 1e-8);
    }

    #[test]
    fn rejects_bad_options() {
        let game = single_quadratic();
        assert!(solve_extragradient(&game, 0.0, &ExtragradientOptions::default()).is_err());
        let opts = ExtragradientOptions { tol: 0.0, ..Default::default() };
        assert!(solve_extragradient(&game, 1.0, &opts).is_err());
    }

    #[test]
    fn iteration_cap_returns_flagged_best_iterate() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let opts = ExtragradientOptions { max_iters: 3, ..Default::default() };
        let kkt = solve_extragradient(&game, 2.0, &opts).unwrap();
        assert!(!kkt.converged);
        assert!(kkt.residual.is_finite());
    }

    #[test]
    fn null_space_of_sum_row() {
        let basis = null_space(&DMatrix::from_element(1, 3, 1.0));
        assert_eq!(basis.ncols(), 2);
        assert!((DMatrix::from_element(1, 3, 1.0) * &basis).amax() < 1e-12);
        assert_eq!(null_space(&DMatrix::from_element(1, 1, 2.0)).ncols(), 0);
        assert_eq!(null_space(&DMatrix::zeros(0, 2)).ncols(), 2);
    }

    #[test]
    fn feasible_samples_stay_on_the_slice() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let anchor = v(&[45.2, 50.1, 55.0, 59.9, 64.8]);
        let pts = sample_feasible_set(&game, &anchor, 200, 4).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            assert!(game.contains(p));
            assert!(game.constraint_residual(p).unwrap()[0].abs() < 1e-9);
        }
    }

    #[test]
    fn gne_check_on_single_player() {
        let game = single_quadratic();
        let ok = verify_gne(&game, &v(&[5.0]), 200, 1, 1e-9).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass);
        let bad = verify_gne(&game, &v(&[7.0]), 200, 1, 1e-9).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
        assert_eq!(bad.worst_player, Some(0));
    }

    #[test]
    fn pinned_players_are_inconclusive() {
        // Every demand-response user is scalar and coupled, so fixing the
        // others leaves no room for a unilateral move.
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let kkt = solve_extragradient(&game, 2.0, &ExtragradientOptions::default()).unwrap();
        let check = verify_gne(&game, &kkt.x_star, 100, 2, 1e-6).unwrap();
        assert_eq!(check.verdict, Verdict::Inconclusive);
        assert_eq!(check.deviations, 0);
    }
}
