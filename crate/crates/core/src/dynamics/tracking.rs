//! Stand-alone dynamic average tracking:
//! `μ̇_i = α Σ_{j∈N_i(t)} sgn(ν_j − ν_i)`, `ν_i = μ_i + r_i(t)`, `μ_i(0) = 0`.
//! For `α > (N − 1) sup‖ṙ_i‖` every `ν_i` converges to `(1/N) Σ_k r_k(t)`.

use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::network::{consensus_drive, NetworkSchedule};

pub type Signal = Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingLog {
    pub times: Vec<f64>,
    /// `‖ν_i(t) − (1/N) Σ r_k(t)‖` per node, one row per sample.
    pub errors: Vec<Vec<f64>>,
}

impl TrackingLog {
    pub fn max_error(&self, k: usize) -> f64 {
        self.errors[k].iter().copied().fold(0.0, f64::max)
    }

    /// Largest error over all nodes at times `t ≥ from`.
    pub fn sup_error_after(&self, from: f64) -> f64 {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= from)
            .map(|(k, _)| self.max_error(k))
            .fold(0.0, f64::max)
    }

    /// Least-squares slope of `ln(max error)` against `t` over `[from, to]`,
    /// skipping exact zeros.
    pub fn log_error_slope(&self, from: f64, to: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= from && t <= to)
            .filter_map(|(k, &t)| {
                let e = self.max_error(k);
                (e > 0.0).then(|| (t, e.ln()))
            })
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        (var > 0.0).then(|| cov / var)
    }

    /// Columns `t, err[0], …, err[N-1], max_err`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.errors.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("err[{i}]")));
        header.push("max_err".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            write!(out, "{t}")?;
            for e in &self.errors[k] {
                write!(out, ",{e}")?;
            }
            writeln!(out, ",{}", self.max_error(k))?;
        }
        Ok(())
    }
}

/// Five scalar references `r_i(t) = (i + 1) + sin(t + i)`. Each has
/// `|ṙ_i| ≤ 1`, so any `α > 4` satisfies the tracking condition.
pub fn sinusoid_signals() -> Vec<Signal> {
    (0..5)
        .map(|i| {
            let offset = i as f64;
            Box::new(move |t: f64| DVector::from_element(1, offset + 1.0 + (t + offset).sin())) as Signal
        })
        .collect()
}

/// Tracking run for [`sinusoid_signals`] over randomly switching connected
/// graphs (edge probability 0.4, dwell 0.1), sampled every 0.01 time units.
pub fn sinusoid_harness(alpha: f64, horizon: f64, h: f64, seed: u64) -> Result<TrackingLog> {
    let signals = sinusoid_signals();
    let schedule = NetworkSchedule::random_switching(signals.len(), 0.4, 0.1, 32, seed)?;
    let record_every = ((0.01 / h).round() as usize).max(1);
    average_tracking_sim(&signals, alpha, &schedule, horizon, h, 1e-9, record_every)
}

/// Forward-Euler run of the tracking system with step `h`, sampling every
/// `record_every` steps.
#[allow(clippy::too_many_arguments)]
pub fn average_tracking_sim<F>(
    signals: &[F],
    alpha: f64,
    schedule: &NetworkSchedule,
    horizon: f64,
    h: f64,
    deadband: f64,
    record_every: usize,
) -> Result<TrackingLog>
where
    F: Fn(f64) -> DVector<f64>,
{
    let n = signals.len();
    if n == 0 || schedule.node_count() != n {
        return Err(Error::Shape { context: "tracking signals", expected: schedule.node_count(), found: n });
    }
    if !(alpha > 0.0 && h > 0.0 && horizon > 0.0) || record_every == 0 {
        return Err(Error::InvalidParameter("tracking needs alpha, h, horizon > 0 and record_every ≥ 1".into()));
    }
    let dim = signals[0](0.0).len();
    let mut mu = vec![DVector::zeros(dim); n];
    let steps = (horizon / h).round() as usize;
    let mut log = TrackingLog { times: Vec::new(), errors: Vec::new() };
    for k in 0..=steps {
        let t = k as f64 * h;
        let refs: Vec<DVector<f64>> = signals.iter().map(|r| r(t)).collect();
        let nu: Vec<DVector<f64>> = mu.iter().zip(&refs).map(|(m, r)| m + r).collect();
        if k % record_every == 0 || k == steps {
            let avg = refs.iter().fold(DVector::zeros(dim), |acc, r| acc + r) / n as f64;
            log.times.push(t);
            log.errors.push(nu.iter().map(|v| (v - &avg).norm()).collect());
        }
        if k == steps {
            break;
        }
        let drive = consensus_drive(&nu, schedule.graph_at(t), deadband);
        for (m, d) in mu.iter_mut().zip(drive) {
            *m += d * (alpha * h);
        }
    }
    Ok(log)
}
