use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use super::{advance_in_place, derivative_into, init_state, AlgorithmParams, Record, SwarmState, TrajectoryLog, Workspace};
use crate::error::{Error, Result};
use crate::game::{compute_bounds, GameSpec, ParamBounds};
use crate::geometry::{lyapunov_value, AugmentedPoint};
use crate::network::NetworkSchedule;
use crate::oracle::{kkt_residual, KktPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Stopped early: KKT residual and consensus disagreement both below `stop_tol`.
    Converged,
    /// Reached the horizon with the KKT residual below `settle_tol`. Sign
    /// chatter keeps the disagreement at `O(h)`, so this is the usual outcome.
    Settled,
    NotConverged,
}

impl RunStatus {
    pub fn is_success(self) -> bool {
        !matches!(self, RunStatus::NotConverged)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub game: String,
    pub status: RunStatus,
    pub steps: usize,
    pub final_time: f64,
    pub final_x: Vec<f64>,
    pub final_lambda_bar: Vec<f64>,
    pub kkt_residual: f64,
    pub consensus_disagreement: f64,
    pub constraint_norm: f64,
    pub lyapunov: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
    pub params: AlgorithmParams,
    pub bounds: ParamBounds,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub log: TrajectoryLog,
    pub summary: Summary,
    pub final_state: SwarmState,
    /// `V(θ(t_k))` at every step `k` (including the final state) when a
    /// reference point was supplied.
    pub lyapunov_trace: Vec<f64>,
}

/// Bound checks, returned as human-readable warnings.
pub fn bound_warnings(bounds: &ParamBounds, params: &AlgorithmParams) -> Vec<String> {
    let mut out = Vec::new();
    if !bounds.alpha_ok(params.alpha) {
        out.push(format!(
            "alpha = {} does not exceed (N-1)·f1_bar = {:.6}; convergence is not guaranteed",
            params.alpha,
            bounds.alpha_min()
        ));
    }
    if !bounds.beta_ok(params.beta, params.gamma) {
        out.push(format!(
            "beta = {} does not exceed gamma·(N-1)·f2_bar = {:.6}; convergence is not guaranteed",
            params.beta,
            bounds.beta_min(params.gamma)
        ));
    }
    out
}

struct Recorder<'a> {
    game: &'a GameSpec,
    gamma: f64,
    reference: Option<AugmentedPoint>,
}

impl Recorder<'_> {
    fn lyapunov(&self, x: &DVector<f64>, lambda_bar: &DVector<f64>) -> Result<Option<f64>> {
        self.reference
            .as_ref()
            .map(|r| lyapunov_value(self.game, self.gamma, &AugmentedPoint::new(x.clone(), lambda_bar.clone()), r))
            .transpose()
    }

    fn record(&self, t: f64, state: &SwarmState, lambda_bar: &DVector<f64>) -> Result<Record> {
        let game = self.game;
        let x = state.profile();
        let sigma = game.aggregate(&x)?;
        let eta = state.eta(game)?;
        let eta_disagreement = eta.iter().map(|e| (e - &sigma).norm()).fold(0.0, f64::max);
        let lambda_disagreement = state.agents.iter().map(|a| (&a.lambda - lambda_bar).norm()).fold(0.0, f64::max);
        Ok(Record {
            t,
            kkt_residual: kkt_residual(game, self.gamma, &x, lambda_bar)?,
            constraint_norm: game.constraint_residual(&x)?.norm(),
            lyapunov: self.lyapunov(&x, lambda_bar)?,
            lambda: state.agents.iter().flat_map(|a| a.lambda.iter().copied()).collect(),
            eta: eta.iter().flat_map(|e| e.iter().copied()).collect(),
            lambda_bar: lambda_bar.iter().copied().collect(),
            x: x.iter().copied().collect(),
            eta_disagreement,
            lambda_disagreement,
        })
    }
}

/// Integrates the seeking dynamics with forward Euler until the horizon or
/// the stopping rule.
///
/// The reference multiplier `λ̄` is accumulated alongside as
/// `λ̄ ← λ̄ + h (γ/N)(Ax − b)` from `λ̄(0) = (1/N)(Ax(0) − b)`, which keeps it
/// equal to the network average of the `λ_i` (the sign terms cancel in
/// the sum).
pub fn simulate(
    game: &GameSpec,
    schedule: &NetworkSchedule,
    params: &AlgorithmParams,
    x0: Option<&[DVector<f64>]>,
    seed: u64,
    oracle: Option<&KktPoint>,
) -> Result<Simulation> {
    params.validate()?;
    if schedule.node_count() != game.player_count() {
        return Err(Error::Shape {
            context: "schedule nodes",
            expected: game.player_count(),
            found: schedule.node_count(),
        });
    }
    let started = Instant::now();
    let bounds = compute_bounds(game)?;
    let warnings = bound_warnings(&bounds, params);
    for w in &warnings {
        log::warn!("{}: {w}", game.name());
    }

    let recorder = Recorder { game, gamma: params.gamma, reference: oracle.map(KktPoint::theta) };
    let scale = params.gamma / game.player_count() as f64;
    let h = params.step;
    let steps = params.steps();
    let b = game.constraint_rhs();

    let mut state = init_state(game, x0, seed)?;
    let mut lambda_bar = state.mean_lambda();
    let mut ws = Workspace::new(&state);
    let mut log = TrajectoryLog::new(
        game.players().iter().map(|p| p.dim()).collect(),
        game.agg_dim(),
        game.constraint_rows(),
    );
    let mut lyapunov_trace = Vec::new();
    let mut status = None;
    let mut k = 0;

    while k < steps {
        let t = k as f64 * h;
        if oracle.is_some() {
            lyapunov_trace.push(recorder.lyapunov(&state.profile(), &lambda_bar)?.unwrap_or_default());
        }
        if k % params.record_every == 0 {
            let rec = recorder.record(t, &state, &lambda_bar)?;
            let done = k > 0 && rec.kkt_residual <= params.stop_tol && rec.consensus_disagreement() <= params.stop_tol;
            log.records.push(rec);
            if done {
                status = Some(RunStatus::Converged);
                break;
            }
        }
        derivative_into(game, &state, schedule.graph_at(t), params, &mut ws)?;
        for (i, agent) in state.agents.iter().enumerate() {
            let p = &game.players()[i];
            lambda_bar.gemv(h * scale, &p.a_block, &agent.x, 1.0);
        }
        lambda_bar.axpy(-h * scale, &b, 1.0);
        advance_in_place(game, &mut state, &ws.rate, h);
        k += 1;
        if !state.is_finite() || lambda_bar.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { time: k as f64 * h, snapshot: Box::new(state) });
        }
    }

    if status.is_none() {
        let t = k as f64 * h;
        if oracle.is_some() {
            lyapunov_trace.push(recorder.lyapunov(&state.profile(), &lambda_bar)?.unwrap_or_default());
        }
        log.records.push(recorder.record(t, &state, &lambda_bar)?);
    }
    let last = log.last().expect("at least one record").clone();
    let status = status.unwrap_or(if last.kkt_residual <= params.settle_tol {
        RunStatus::Settled
    } else {
        RunStatus::NotConverged
    });

    let summary = Summary {
        game: game.name().to_string(),
        status,
        steps: k,
        final_time: last.t,
        final_x: last.x.clone(),
        final_lambda_bar: last.lambda_bar.clone(),
        kkt_residual: last.kkt_residual,
        consensus_disagreement: last.consensus_disagreement(),
        constraint_norm: last.constraint_norm,
        lyapunov: last.lyapunov,
        wall_time_s: started.elapsed().as_secs_f64(),
        seed,
        params: *params,
        bounds,
        warnings,
    };
    Ok(Simulation { log, summary, final_state: state, lyapunov_trace })
}
