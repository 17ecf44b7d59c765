//! Built-in game families: Nash–Cournot competition with a quadratic
//! aggregate, demand-response management, and a scalar quadratic family
//! with a linear aggregate.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GameSpec, PhiShape, PlayerCost, PlayerSpec};
use crate::error::{Error, Result};

fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

fn one_by_one(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Firm with cost `(c − p(σ)) x`, price `p = d − Nσ` and `φ(x) = x²`.
#[derive(Debug, Clone)]
pub struct CournotFirm {
    pub unit_cost: f64,
    pub demand: f64,
    pub players: usize,
}

impl PlayerCost for CournotFirm {
    fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        scalar(x[0] * x[0])
    }

    fn phi_jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(one_by_one(2.0 * x[0]))
    }

    fn phi_shape(&self) -> PhiShape {
        PhiShape::Quadratic
    }

    fn cost(&self, x: &DVector<f64>, sigma: &DVector<f64>) -> Option<f64> {
        let n = self.players as f64;
        Some((self.unit_cost - self.demand + n * sigma[0]) * x[0])
    }

    fn grad_local(&self, _x: &DVector<f64>, sigma: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.players as f64;
        Some(scalar(self.unit_cost - self.demand + n * sigma[0]))
    }

    fn grad_agg(&self, x: &DVector<f64>, _sigma: &DVector<f64>) -> Option<DVector<f64>> {
        Some(scalar(self.players as f64 * x[0]))
    }

    fn local_map_jacobians(
        &self,
        x: &DVector<f64>,
        _y: &DVector<f64>,
        players: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        // G = c − d + N y + (2 N x² / players)
        let n = self.players as f64;
        let ratio = n / players as f64;
        Some((one_by_one(4.0 * ratio * x[0]), one_by_one(n)))
    }
}

/// Electricity user with cost `k (x − χ)² + (a N σ + p₀) x` and `φ(x) = x`.
#[derive(Debug, Clone)]
pub struct DemandResponseUser {
    pub weight: f64,
    pub nominal: f64,
    pub price_slope: f64,
    pub base_price: f64,
    pub players: usize,
}

impl PlayerCost for DemandResponseUser {
    fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    fn phi_jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(one_by_one(1.0))
    }

    fn phi_shape(&self) -> PhiShape {
        PhiShape::Affine
    }

    fn cost(&self, x: &DVector<f64>, sigma: &DVector<f64>) -> Option<f64> {
        let n = self.players as f64;
        let price = self.price_slope * n * sigma[0] + self.base_price;
        Some(self.weight * (x[0] - self.nominal).powi(2) + price * x[0])
    }

    fn grad_local(&self, x: &DVector<f64>, sigma: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.players as f64;
        Some(scalar(
            2.0 * self.weight * (x[0] - self.nominal) + self.price_slope * n * sigma[0] + self.base_price,
        ))
    }

    fn grad_agg(&self, x: &DVector<f64>, _sigma: &DVector<f64>) -> Option<DVector<f64>> {
        Some(scalar(self.price_slope * self.players as f64 * x[0]))
    }

    fn local_map_jacobians(
        &self,
        _x: &DVector<f64>,
        _y: &DVector<f64>,
        players: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let n = self.players as f64;
        let ratio = n / players as f64;
        Some((
            one_by_one(2.0 * self.weight + self.price_slope * ratio),
            one_by_one(self.price_slope * n),
        ))
    }
}

/// Scalar quadratic player `ϑ(x, σ) = ½ q x² + r x + s σ x` with `φ(x) = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPlayer {
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub lo: f64,
    pub hi: f64,
    /// Row of `A_i`; empty for an unconstrained game.
    #[serde(default)]
    pub a_row: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

impl PlayerCost for QuadraticPlayer {
    fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    fn phi_jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(one_by_one(1.0))
    }

    fn phi_shape(&self) -> PhiShape {
        PhiShape::Affine
    }

    fn cost(&self, x: &DVector<f64>, sigma: &DVector<f64>) -> Option<f64> {
        Some(0.5 * self.q * x[0] * x[0] + self.r * x[0] + self.s * sigma[0] * x[0])
    }

    fn grad_local(&self, x: &DVector<f64>, sigma: &DVector<f64>) -> Option<DVector<f64>> {
        Some(scalar(self.q * x[0] + self.r + self.s * sigma[0]))
    }

    fn grad_agg(&self, x: &DVector<f64>, _sigma: &DVector<f64>) -> Option<DVector<f64>> {
        Some(scalar(self.s * x[0]))
    }

    fn local_map_jacobians(
        &self,
        _x: &DVector<f64>,
        _y: &DVector<f64>,
        players: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((one_by_one(self.q + self.s / players as f64), one_by_one(self.s)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CournotParams {
    pub players: usize,
    pub demand: f64,
    /// Per-firm production cost; defaults to `10 + 20 (i − 1)`.
    pub unit_costs: Option<Vec<f64>>,
    pub lo: f64,
    pub hi: f64,
    /// Whether the first `sharing` firms split a scarce resource.
    pub constrained: bool,
    pub sharing: usize,
    pub resource: f64,
}

impl Default for CournotParams {
    fn default() -> Self {
        Self {
            players: 20,
            demand: 1200.0,
            unit_costs: None,
            lo: 0.0,
            hi: 20.0,
            constrained: true,
            sharing: 10,
            resource: 20.0,
        }
    }
}

impl CournotParams {
    pub fn unit_cost(&self, i: usize) -> f64 {
        match &self.unit_costs {
            Some(c) => c[i],
            None => 10.0 + 20.0 * i as f64,
        }
    }
}

/// Nash–Cournot game. With the constraint on, firms `1..=sharing` satisfy
/// `Σ x_i = resource`, each carrying `b_i = resource / sharing`.
pub fn build_cournot(params: &CournotParams) -> Result<GameSpec> {
    let n = params.players;
    if n == 0 {
        return Err(Error::InvalidParameter("cournot: players must be positive".into()));
    }
    if params.lo > params.hi {
        return Err(Error::InvalidParameter(format!(
            "cournot: box [{}, {}] is inverted",
            params.lo, params.hi
        )));
    }
    if let Some(c) = &params.unit_costs {
        if c.len() != n {
            return Err(Error::Shape { context: "cournot unit_costs", expected: n, found: c.len() });
        }
    }
    if params.constrained && (params.sharing == 0 || params.sharing > n) {
        return Err(Error::InvalidParameter(format!(
            "cournot: sharing must lie in 1..={n}, got {}",
            params.sharing
        )));
    }
    let rows = usize::from(params.constrained);
    let players = (0..n)
        .map(|i| {
            let shares = params.constrained && i < params.sharing;
            let (a, b) = if shares {
                (1.0, params.resource / params.sharing as f64)
            } else {
                (0.0, 0.0)
            };
            PlayerSpec::new(
                scalar(params.lo),
                scalar(params.hi),
                DMatrix::from_element(rows, 1, a),
                DVector::from_element(rows, b),
                Arc::new(CournotFirm { unit_cost: params.unit_cost(i), demand: params.demand, players: n }),
            )
        })
        .collect();
    let name = if params.constrained { "cournot" } else { "cournot-unconstrained" };
    GameSpec::new(name, 1, players)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandResponseParams {
    pub weights: Vec<f64>,
    pub nominal: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub price_slope: f64,
    pub base_price: f64,
    pub constrained: bool,
    /// Total consumption is held at `Σ χ_i − shortfall`.
    pub shortfall: f64,
}

impl Default for DemandResponseParams {
    fn default() -> Self {
        Self {
            weights: vec![1.0; 5],
            nominal: vec![50.0, 55.0, 60.0, 65.0, 70.0],
            lo: vec![45.0, 44.0, 46.0, 52.0, 56.0],
            hi: vec![55.0, 66.0, 72.0, 78.0, 84.0],
            price_slope: 0.04,
            base_price: 5.0,
            constrained: true,
            shortfall: 25.0,
        }
    }
}

/// Demand-response game; with the constraint on, `b_i = χ_i − shortfall / N`.
pub fn build_demand_response(params: &DemandResponseParams) -> Result<GameSpec> {
    let n = params.nominal.len();
    if n == 0 {
        return Err(Error::InvalidParameter("demand-response: no users".into()));
    }
    for (context, v) in [("weights", &params.weights), ("lo", &params.lo), ("hi", &params.hi)] {
        if v.len() != n {
            return Err(Error::Shape { context, expected: n, found: v.len() });
        }
    }
    let rows = usize::from(params.constrained);
    let players = (0..n)
        .map(|i| {
            let b = params.nominal[i] - params.shortfall / n as f64;
            PlayerSpec::new(
                scalar(params.lo[i]),
                scalar(params.hi[i]),
                DMatrix::from_element(rows, 1, 1.0),
                DVector::from_element(rows, b),
                Arc::new(DemandResponseUser {
                    weight: params.weights[i],
                    nominal: params.nominal[i],
                    price_slope: params.price_slope,
                    base_price: params.base_price,
                    players: n,
                }),
            )
        })
        .collect();
    let name = if params.constrained { "demand-response" } else { "demand-response-unconstrained" };
    GameSpec::new(name, 1, players)
}

/// Scalar quadratic game with `m = 1`; every player must carry the same
/// number of constraint rows.
pub fn build_quadratic(name: &str, players: &[QuadraticPlayer]) -> Result<GameSpec> {
    let specs = players
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.a_row.len() != p.b.len() {
                return Err(Error::Shape { context: "quadratic a_row/b", expected: p.a_row.len(), found: p.b.len() });
            }
            if p.lo > p.hi {
                return Err(Error::InvalidBox { player: i, coord: 0, lo: p.lo, hi: p.hi });
            }
            Ok(PlayerSpec::new(
                scalar(p.lo),
                scalar(p.hi),
                DMatrix::from_column_slice(p.a_row.len(), 1, &p.a_row),
                DVector::from_column_slice(&p.b),
                Arc::new(p.clone()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    GameSpec::new(name, 1, specs)
}
