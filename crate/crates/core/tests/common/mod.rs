#![allow(dead_code)]

use std::sync::Arc;

use aggnash::game::{
    build_cournot, build_demand_response, build_quadratic, CournotParams, DemandResponseParams, GameSpec, PlayerCost,
    PlayerSpec, QuadraticPlayer,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn demand_response(constrained: bool) -> GameSpec {
    build_demand_response(&DemandResponseParams { constrained, ..Default::default() }).unwrap()
}

pub fn cournot() -> GameSpec {
    build_cournot(&CournotParams::default()).unwrap()
}

/// The built-in games with the dual step each is run at.
pub fn builtin_games() -> Vec<(GameSpec, f64)> {
    vec![(demand_response(false), 2.0), (demand_response(true), 2.0), (cournot(), 20.0)]
}

/// Random scalar quadratic game with `2..=5` players. `q ∈ [1, 3]` and
/// `|s| ≤ 0.5` keep the pseudo-gradient strongly monotone. With `constrained`
/// there is one coupling row `Σ a_i x_i = Σ a_i x̂_i` through an interior
/// point `x̂`.
pub fn random_quadratic(seed: u64, constrained: bool) -> Vec<QuadraticPlayer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    (0..n)
        .map(|_| {
            let a: f64 = rng.gen_range(0.5..1.5);
            let anchor: f64 = rng.gen_range(-3.0..3.0);
            QuadraticPlayer {
                q: rng.gen_range(1.0..3.0),
                r: rng.gen_range(-4.0..4.0),
                s: rng.gen_range(-0.5..0.5),
                lo: -10.0,
                hi: 10.0,
                a_row: if constrained { vec![a] } else { vec![] },
                b: if constrained { vec![a * anchor] } else { vec![] },
            }
        })
        .collect()
}

pub fn quadratic_game(players: &[QuadraticPlayer]) -> GameSpec {
    build_quadratic("random-quadratic", players).unwrap()
}

/// Solves the linear KKT system `M x + r + (γ/N) aᵀ λ = 0`, `a x = b` of an
/// unbounded quadratic game by LU, where `F(x) = M x + r`.
pub fn direct_kkt(players: &[QuadraticPlayer], gamma: f64) -> (DVector<f64>, DVector<f64>) {
    let n = players.len();
    let nf = n as f64;
    let l = players[0].a_row.len();
    let mut m = DMatrix::zeros(n + l, n + l);
    let mut rhs = DVector::zeros(n + l);
    for (i, p) in players.iter().enumerate() {
        // F_i = q x_i + r + s σ + (s / N) x_i, σ = (1/N) Σ x_j.
        for j in 0..n {
            m[(i, j)] = p.s / nf;
        }
        m[(i, i)] += p.q + p.s / nf;
        rhs[i] = -p.r;
        for k in 0..l {
            m[(i, n + k)] = gamma / nf * p.a_row[k];
            m[(n + k, i)] = p.a_row[k];
            rhs[n + k] += p.b[k];
        }
    }
    let sol = m.lu().solve(&rhs).expect("nonsingular KKT matrix");
    (sol.rows(0, n).into_owned(), sol.rows(n, l).into_owned())
}

/// Two-dimensional player with a nonlinear aggregate contribution and no
/// derivative callbacks, so every derivative goes through finite differences.
#[derive(Debug, Clone)]
pub struct SmoothPlayer {
    pub q: f64,
    pub r: [f64; 2],
    pub s: f64,
}

impl PlayerCost for SmoothPlayer {
    fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[0] + 0.2 * x[1].sin(), 0.25 * x[1] * x[1]])
    }

    fn cost(&self, x: &DVector<f64>, sigma: &DVector<f64>) -> Option<f64> {
        Some(
            0.5 * self.q * x.norm_squared()
                + self.r[0] * x[0]
                + self.r[1] * x[1]
                + self.s * (sigma[0] * x[0] + sigma[1] * x[1])
                + 0.1 * x[0] * x[1] * sigma[0],
        )
    }
}

/// Random game of [`SmoothPlayer`]s with two coupling rows.
pub fn smooth_game(seed: u64) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let players = (0..n)
        .map(|_| {
            let lo = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..0.0));
            let hi = DVector::from_fn(2, |k, _| lo[k] + rng.gen_range(0.5..3.0));
            PlayerSpec::new(
                lo,
                hi,
                DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)),
                DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)),
                Arc::new(SmoothPlayer {
                    q: rng.gen_range(1.0..2.0),
                    r: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    s: rng.gen_range(-0.5..0.5),
                }),
            )
        })
        .collect();
    GameSpec::new("smooth", 2, players).unwrap()
}

pub fn uniform_in_box(game: &GameSpec, rng: &mut impl Rng, interior: bool) -> DVector<f64> {
    let (lo, hi) = (game.box_lo(), game.box_hi());
    let margin = if interior { 1e-3 } else { 0.0 };
    DVector::from_fn(game.dim(), |k, _| {
        let w = hi[k] - lo[k];
        lo[k] + w * (margin + (1.0 - 2.0 * margin) * rng.gen::<f64>())
    })
}

pub fn inf_norm(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Central differences of a scalar function, written independently of the
/// library's helper.
pub fn central_gradient(x: &DVector<f64>, f: impl Fn(&DVector<f64>) -> f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |k, _| {
        let step = 1e-6 * (1.0 + x[k].abs());
        let mut up = x.clone();
        let mut down = x.clone();
        up[k] += step;
        down[k] -= step;
        (f(&up) - f(&down)) / (2.0 * step)
    })
}
