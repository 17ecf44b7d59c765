//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [game]
//! family = "demand-response"     # or "cournot", "quadratic"
//! constrained = true
//!
//! [network]
//! mode = "switching"             # or "static"
//! edge_prob = 0.3
//! dwell = 0.1
//!
//! [params]
//! alpha = 30.0
//! beta = 100.0
//! gamma = 2.0
//! step = 1e-4
//! horizon = 50.0
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::AlgorithmParams;
use crate::error::{Error, Result};
use crate::game::{
    build_cournot, build_demand_response, build_quadratic, CournotParams, DemandResponseParams, GameSpec,
    QuadraticPlayer,
};
use crate::network::{Graph, NetworkSchedule, ScheduleMode};
use crate::oracle::ExtragradientOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GameConfig {
    Cournot(CournotParams),
    DemandResponse(DemandResponseParams),
    Quadratic(QuadraticGame),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticGame {
    #[serde(default = "QuadraticGame::default_name")]
    pub name: String,
    pub players: Vec<QuadraticPlayer>,
}

impl QuadraticGame {
    fn default_name() -> String {
        "quadratic".into()
    }
}

impl GameConfig {
    pub fn build(&self) -> Result<GameSpec> {
        match self {
            GameConfig::Cournot(p) => build_cournot(p),
            GameConfig::DemandResponse(p) => build_demand_response(p),
            GameConfig::Quadratic(q) => build_quadratic(&q.name, &q.players),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub mode: ScheduleMode,
    pub edge_prob: f64,
    /// Seconds of simulated time each graph stays active.
    pub dwell: f64,
    /// Number of distinct random graphs cycled by a switching schedule.
    pub graph_count: usize,
    /// Overrides the run seed for graph generation.
    pub seed: Option<u64>,
    /// Explicit zero-based edge list for a static schedule.
    pub edges: Option<Vec<[usize; 2]>>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { mode: ScheduleMode::Switching, edge_prob: 0.3, dwell: 0.1, graph_count: 64, seed: None, edges: None }
    }
}

impl NetworkConfig {
    pub fn build(&self, nodes: usize, run_seed: u64) -> Result<NetworkSchedule> {
        let seed = self.seed.unwrap_or(run_seed);
        match (self.mode, &self.edges) {
            (ScheduleMode::Static, Some(edges)) => {
                let pairs: Vec<_> = edges.iter().map(|e| (e[0], e[1])).collect();
                NetworkSchedule::fixed(Graph::connected_from_edges(nodes, &pairs)?)
            }
            (ScheduleMode::Static, None) => {
                NetworkSchedule::fixed(crate::network::random_connected_graph(nodes, self.edge_prob, seed)?)
            }
            (ScheduleMode::Switching, None) => {
                NetworkSchedule::random_switching(nodes, self.edge_prob, self.dwell, self.graph_count, seed)
            }
            (ScheduleMode::Switching, Some(_)) => {
                Err(Error::Config("network.edges is only valid with mode = \"static\"".into()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let d = ExtragradientOptions::default();
        Self { tol: d.tol, max_iters: d.max_iters }
    }
}

impl OracleConfig {
    pub fn options(&self, seed: u64) -> ExtragradientOptions {
        ExtragradientOptions { tol: self.tol, max_iters: self.max_iters, step: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Overrides `params.record_every` when set.
    pub record_every: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), record_every: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub game: GameConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub params: AlgorithmParams,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Stacked initial profile; drawn uniformly from the boxes when absent.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Algorithm parameters with the output overrides applied.
    pub fn effective_params(&self) -> AlgorithmParams {
        let mut p = self.params;
        if let Some(every) = self.output.record_every {
            p.record_every = every;
        }
        p
    }

    pub fn build_game(&self) -> Result<GameSpec> {
        self.game.build()
    }

    pub fn build_schedule(&self, game: &GameSpec) -> Result<NetworkSchedule> {
        self.network.build(game.player_count(), self.seed)
    }

    /// Initial profile split per player, if one was configured.
    pub fn initial_blocks(&self, game: &GameSpec) -> Result<Option<Vec<DVector<f64>>>> {
        self.init
            .as_ref()
            .map(|v| game.split(&DVector::from_column_slice(v)))
            .transpose()
    }
}
