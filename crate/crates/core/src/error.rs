use thiserror::Error;

use crate::dynamics::SwarmState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("player {player}: invalid box on coordinate {coord} ([{lo}, {hi}])")]
    InvalidBox {
        player: usize,
        coord: usize,
        lo: f64,
        hi: f64,
    },

    #[error("player {player}: {what} produced a non-finite value")]
    Callback { player: usize, what: &'static str },

    #[error("player {player}: no {what} callback and no cost function to differentiate")]
    MissingCallback { player: usize, what: &'static str },

    #[error("player {player}: initial point lies outside its strategy box")]
    Infeasible { player: usize },

    #[error("graph on {nodes} nodes is not connected")]
    Disconnected { nodes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state became non-finite at t = {time}")]
    Diverged {
        time: f64,
        snapshot: Box<SwarmState>,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
