//! The distributed seeking dynamics and their forward-Euler discretization.
//!
//! Agent `i` holds its decision `x_i`, a local multiplier estimate `λ_i`
//! and an auxiliary `ζ_i` whose shifted value `η_i = ζ_i + φ_i(x_i)` tracks
//! the aggregate. With neighbour set `N_i`:
//!
//! ```text
//! ẋ_i = P_{Ω_i}(x_i − G_i(x_i, η_i) − (γ/N) A_iᵀ λ_i) − x_i
//! λ̇_i = β Σ_{j∈N_i} sgn(λ_j − λ_i) + γ (A_i x_i − b_i)
//! ζ̇_i = α Σ_{j∈N_i} sgn(η_j − η_i)
//! ```
//!
//! starting from `λ_i(0) = A_i x_i(0) − b_i` and `ζ_i(0) = 0`.

mod log;
mod simulate;
mod tracking;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{eval_phi, local_gradient, GameSpec};
use crate::network::{sign_deadband, Graph};

pub use log::{Record, TrajectoryLog};
pub use simulate::{bound_warnings, simulate, RunStatus, Simulation, Summary};
pub use tracking::{average_tracking_sim, sinusoid_harness, sinusoid_signals, Signal, TrackingLog};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub zeta: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub agents: Vec<AgentState>,
}

impl SwarmState {
    pub fn profile(&self) -> DVector<f64> {
        let n = self.agents.iter().map(|a| a.x.len()).sum();
        DVector::from_iterator(n, self.agents.iter().flat_map(|a| a.x.iter().copied()))
    }

    /// `η_i = ζ_i + φ_i(x_i)` for every agent.
    pub fn eta(&self, game: &GameSpec) -> Result<Vec<DVector<f64>>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| Ok(&a.zeta + eval_phi(&game.players()[i], i, &a.x)?))
            .collect()
    }

    pub fn lambdas(&self) -> Vec<DVector<f64>> {
        self.agents.iter().map(|a| a.lambda.clone()).collect()
    }

    pub fn mean_lambda(&self) -> DVector<f64> {
        let l = self.agents.first().map_or(0, |a| a.lambda.len());
        let sum = self.agents.iter().fold(DVector::zeros(l), |acc, a| acc + &a.lambda);
        sum / self.agents.len().max(1) as f64
    }

    pub fn is_finite(&self) -> bool {
        self.agents
            .iter()
            .all(|a| a.x.iter().chain(a.lambda.iter()).chain(a.zeta.iter()).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmParams {
    /// Gain of the aggregate-tracking consensus.
    pub alpha: f64,
    /// Gain of the multiplier consensus.
    pub beta: f64,
    /// Dual step.
    pub gamma: f64,
    /// Euler step `h`, in `(0, 1]`.
    pub step: f64,
    pub horizon: f64,
    /// Sign deadband `ε`; `0` gives the exact sign with `sgn(0) = 0`.
    pub deadband: f64,
    /// Early stop once both the KKT residual and the consensus
    /// disagreement fall below this.
    pub stop_tol: f64,
    /// At the horizon, a KKT residual below this still counts as settled.
    pub settle_tol: f64,
    pub record_every: usize,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            beta: 100.0,
            gamma: 2.0,
            step: 1e-3,
            horizon: 50.0,
            deadband: 1e-9,
            stop_tol: 1e-6,
            settle_tol: 1e-2,
            record_every: 100,
        }
    }
}

impl AlgorithmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("horizon", self.horizon)?;
        positive("stop_tol", self.stop_tol)?;
        positive("settle_tol", self.settle_tol)?;
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidParameter(format!("step must lie in (0, 1], got {}", self.step)));
        }
        if !(self.deadband >= 0.0) {
            return Err(Error::InvalidParameter(format!("deadband must be nonnegative, got {}", self.deadband)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round().max(1.0) as usize
    }
}

/// Initial swarm: `x_i(0) = x0_i` (uniform in the box when absent),
/// `λ_i(0) = A_i x_i(0) − b_i`, `ζ_i(0) = 0`.
pub fn init_state(game: &GameSpec, x0: Option<&[DVector<f64>]>, seed: u64) -> Result<SwarmState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = game
        .players()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x = match x0 {
                Some(blocks) => {
                    let xi = blocks.get(i).ok_or(Error::Shape {
                        context: "initial point",
                        expected: game.player_count(),
                        found: blocks.len(),
                    })?;
                    if xi.len() != p.dim() {
                        return Err(Error::Shape { context: "initial point block", expected: p.dim(), found: xi.len() });
                    }
                    if !p.contains(xi) {
                        return Err(Error::Infeasible { player: i });
                    }
                    xi.clone()
                }
                None => DVector::from_fn(p.dim(), |k, _| {
                    let (lo, hi) = (p.box_lo[k], p.box_hi[k]);
                    if lo < hi {
                        rng.gen_range(lo..=hi)
                    } else {
                        lo
                    }
                }),
            };
            Ok(AgentState {
                lambda: p.local_residual(&x),
                zeta: DVector::zeros(game.agg_dim()),
                x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(blocks) = x0 {
        if blocks.len() != game.player_count() {
            return Err(Error::Shape { context: "initial point", expected: game.player_count(), found: blocks.len() });
        }
    }
    Ok(SwarmState { agents })
}

/// Scratch buffers reused across steps: aggregate estimates and rates.
pub(crate) struct Workspace {
    eta: Vec<DVector<f64>>,
    rate: SwarmState,
}

impl Workspace {
    pub(crate) fn new(swarm: &SwarmState) -> Self {
        Self {
            eta: swarm.agents.iter().map(|a| a.zeta.clone()).collect(),
            rate: swarm.clone(),
        }
    }
}

/// Accumulates `gain · Σ_{j∈N_i} sgn_ε(v_j − v_i)` into `out`.
fn add_drive<'a>(out: &mut DVector<f64>, i: usize, g: &Graph, value: impl Fn(usize) -> &'a DVector<f64>, gain: f64, eps: f64) {
    let vi = value(i);
    for &j in g.neighbors(i) {
        let vj = value(j);
        for k in 0..out.len() {
            out[k] += gain * sign_deadband(vj[k] - vi[k], eps);
        }
    }
}

pub(crate) fn derivative_into(
    game: &GameSpec,
    swarm: &SwarmState,
    g: &Graph,
    params: &AlgorithmParams,
    ws: &mut Workspace,
) -> Result<()> {
    let count = game.player_count();
    if swarm.agents.len() != count || g.node_count() != count {
        return Err(Error::Shape { context: "swarm size", expected: count, found: swarm.agents.len() });
    }
    let scale = params.gamma / count as f64;
    for (i, p) in game.players().iter().enumerate() {
        let a = &swarm.agents[i];
        ws.eta[i].copy_from(&a.zeta);
        ws.eta[i] += eval_phi(p, i, &a.x)?;
    }
    for (i, p) in game.players().iter().enumerate() {
        let a = &swarm.agents[i];
        let r = &mut ws.rate.agents[i];

        let grad = local_gradient(p, i, &a.x, &ws.eta[i], count)?;
        r.x.copy_from(&a.x);
        r.x -= grad;
        r.x.gemv_tr(-scale, &p.a_block, &a.lambda, 1.0);
        for k in 0..r.x.len() {
            r.x[k] = r.x[k].max(p.box_lo[k]).min(p.box_hi[k]) - a.x[k];
        }

        r.lambda.copy_from(&p.b_block);
        r.lambda.gemv(params.gamma, &p.a_block, &a.x, -params.gamma);
        add_drive(&mut r.lambda, i, g, |j| &swarm.agents[j].lambda, params.beta, params.deadband);

        r.zeta.fill(0.0);
        add_drive(&mut r.zeta, i, g, |j| &ws.eta[j], params.alpha, params.deadband);
    }
    Ok(())
}

/// Right-hand side of the dynamics on graph `g`. The returned state holds
/// rates `(ẋ_i, λ̇_i, ζ̇_i)`.
pub fn derivative(game: &GameSpec, swarm: &SwarmState, g: &Graph, params: &AlgorithmParams) -> Result<SwarmState> {
    let mut ws = Workspace::new(swarm);
    derivative_into(game, swarm, g, params, &mut ws)?;
    Ok(ws.rate)
}

/// One forward-Euler step. The decision update is the convex combination
/// `(1 − h) x_i + h P_{Ω_i}(·)`, so it never leaves the box for `h ≤ 1`;
/// the final clamp only removes rounding.
pub fn step(game: &GameSpec, swarm: &SwarmState, g: &Graph, params: &AlgorithmParams) -> Result<SwarmState> {
    let mut ws = Workspace::new(swarm);
    derivative_into(game, swarm, g, params, &mut ws)?;
    let mut next = swarm.clone();
    advance_in_place(game, &mut next, &ws.rate, params.step);
    Ok(next)
}

pub(crate) fn advance_in_place(game: &GameSpec, swarm: &mut SwarmState, rate: &SwarmState, h: f64) {
    for ((a, r), p) in swarm.agents.iter_mut().zip(&rate.agents).zip(game.players()) {
        a.x.axpy(h, &r.x, 1.0);
        for k in 0..a.x.len() {
            a.x[k] = a.x[k].max(p.box_lo[k]).min(p.box_hi[k]);
        }
        a.lambda.axpy(h, &r.lambda, 1.0);
        a.zeta.axpy(h, &r.zeta, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_demand_response, build_quadratic, DemandResponseParams, QuadraticPlayer};
    use crate::network::Graph;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn chi() -> Vec<DVector<f64>> {
        [50.0, 55.0, 60.0, 65.0, 70.0].iter().map(|&c| v(&[c])).collect()
    }

    #[test]
    fn initial_multipliers_follow_local_residuals() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let s = init_state(&game, Some(&chi()), 0).unwrap();
        for a in &s.agents {
            assert_eq!(a.lambda[0], 5.0);
            assert_eq!(a.zeta[0], 0.0);
        }
        let eta = s.eta(&game).unwrap();
        for (e, a) in eta.iter().zip(&s.agents) {
            assert_eq!(e, &a.x);
        }
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let mut x0 = chi();
        x0[0] = v(&[40.0]);
        assert!(matches!(init_state(&game, Some(&x0), 0), Err(Error::Infeasible { player: 0 })));
        assert!(init_state(&game, Some(&x0[..3]), 0).is_err());
    }

    #[test]
    fn random_start_is_inside_boxes() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let s = init_state(&game, None, 42).unwrap();
        assert!(game.contains(&s.profile()));
        assert_eq!(s, init_state(&game, None, 42).unwrap());
    }

    fn single_quadratic() -> GameSpec {
        let p = QuadraticPlayer { q: 1.0, r: -5.0, s: 0.0, lo: 0.0, hi: 20.0, a_row: vec![], b: vec![] };
        build_quadratic("single", &[p]).unwrap()
    }

    #[test]
    fn unconstrained_optimum_is_rest_point() {
        let game = single_quadratic();
        let s = init_state(&game, Some(&[v(&[5.0])]), 0).unwrap();
        let d = derivative(&game, &s, &Graph::complete(1), &AlgorithmParams::default()).unwrap();
        assert_eq!(d.agents[0].x[0], 0.0);
    }

    #[test]
    fn full_step_lands_on_projection() {
        let game = single_quadratic();
        let s = init_state(&game, Some(&[v(&[15.0])]), 0).unwrap();
        let params = AlgorithmParams { step: 1.0, ..Default::default() };
        let next = step(&game, &s, &Graph::complete(1), &params).unwrap();
        // P(15 − (15 − 5)) = 5.
        assert_eq!(next.agents[0].x[0], 5.0);
    }

    #[test]
    fn boundary_point_moves_inward() {
        let game = single_quadratic();
        let s = init_state(&game, Some(&[v(&[0.0])]), 0).unwrap();
        let params = AlgorithmParams { step: 0.1, ..Default::default() };
        let next = step(&game, &s, &Graph::complete(1), &params).unwrap();
        // P(0 − (0 − 5)) = 5, so x⁺ = 0.9·0 + 0.1·5.
        assert!((next.agents[0].x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn consensual_feasible_state_has_no_dual_or_tracking_drift() {
        let game = build_demand_response(&DemandResponseParams::default()).unwrap();
        let x0: Vec<_> = [50.0, 55.0, 55.0, 55.0, 60.0].iter().map(|&c| v(&[c])).collect();
        let mut s = init_state(&game, Some(&x0), 0).unwrap();
        // Σ x = 275 = b; equalise the multipliers and the aggregate estimates.
        for a in &mut s.agents {
            a.lambda = v(&[0.0]);
            a.zeta = v(&[55.0 - a.x[0]]);
        }
        let params = AlgorithmParams { gamma: 2.0, ..Default::default() };
        let d = derivative(&game, &s, &Graph::complete(5), &params).unwrap();
        let total: f64 = d.agents.iter().map(|a| a.lambda[0]).sum();
        assert!(total.abs() < 1e-12);
        assert!(d.agents.iter().all(|a| a.zeta[0] == 0.0));
    }

    #[test]
    fn zero_rate_leaves_state_unchanged() {
        let game = single_quadratic();
        let s = init_state(&game, Some(&[v(&[5.0])]), 0).unwrap();
        let next = step(&game, &s, &Graph::complete(1), &AlgorithmParams::default()).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn params_validation() {
        assert!(AlgorithmParams::default().validate().is_ok());
        assert!(AlgorithmParams { step: 1.5, ..Default::default() }.validate().is_err());
        assert!(AlgorithmParams { step: 0.0, ..Default::default() }.validate().is_err());
        assert!(AlgorithmParams { gamma: -1.0, ..Default::default() }.validate().is_err());
        assert!(AlgorithmParams { record_every: 0, ..Default::default() }.validate().is_err());
        assert!(AlgorithmParams { deadband: f64::NAN, ..Default::default() }.validate().is_err());
    }
}
