//! Aggregative games with linear coupled equality constraints.
//!
//! Player `i` picks `x_i` from an axis-aligned box `Ω_i` and pays
//! `ϑ_i(x_i, σ(x))`, where the aggregate is the average of the local
//! contributions, `σ(x) = (1/N) Σ_j φ_j(x_j)`. The players jointly satisfy
//! `Σ_i A_i x_i = Σ_i b_i`.

mod bounds;
pub mod builtin;
mod probe;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd;

pub use bounds::{compute_bounds, ParamBounds};
pub use builtin::{
    build_cournot, build_demand_response, build_quadratic, CournotParams, DemandResponseParams,
    QuadraticPlayer,
};
pub use probe::monotonicity_probe;

/// How the local contribution `φ_i` depends on `x_i`. Affine and quadratic
/// maps have a Jacobian that is affine in `x_i`, so its norm peaks at a box
/// vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiShape {
    Affine,
    Quadratic,
    General,
}

/// Player-specific cost and aggregation callbacks.
///
/// Only `phi` is mandatory. Missing derivatives fall back to central finite
/// differences, of `cost` for the gradients and of `phi` for its Jacobian.
pub trait PlayerCost: Send + Sync {
    /// Local contribution `φ_i(x_i)` to the aggregate (length `m`).
    fn phi(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `∇φ_i(x_i)`, an `m × n_i` matrix.
    fn phi_jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn phi_shape(&self) -> PhiShape {
        PhiShape::General
    }

    /// `ϑ_i(x_i, σ)`.
    fn cost(&self, _x: &DVector<f64>, _sigma: &DVector<f64>) -> Option<f64> {
        None
    }

    /// `∇_{x_i} ϑ_i(x_i, σ)` with `σ` held fixed.
    fn grad_local(&self, _x: &DVector<f64>, _sigma: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// `∇_σ ϑ_i(x_i, σ)`.
    fn grad_agg(&self, _x: &DVector<f64>, _sigma: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Partial Jacobians of the local map `G_i(x_i, y)` with respect to
    /// `x_i` (`n_i × n_i`) and `y` (`n_i × m`) in a game of `players` players.
    fn local_map_jacobians(
        &self,
        _x: &DVector<f64>,
        _y: &DVector<f64>,
        _players: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }
}

#[derive(Clone)]
pub struct PlayerSpec {
    pub box_lo: DVector<f64>,
    pub box_hi: DVector<f64>,
    /// `A_i`, an `l × n_i` block of the coupled constraint.
    pub a_block: DMatrix<f64>,
    /// `b_i`, this player's share of the right-hand side.
    pub b_block: DVector<f64>,
    pub cost: Arc<dyn PlayerCost>,
}

impl PlayerSpec {
    pub fn new(
        box_lo: DVector<f64>,
        box_hi: DVector<f64>,
        a_block: DMatrix<f64>,
        b_block: DVector<f64>,
        cost: Arc<dyn PlayerCost>,
    ) -> Self {
        Self {
            box_lo,
            box_hi,
            a_block,
            b_block,
            cost,
        }
    }

    pub fn dim(&self) -> usize {
        self.box_lo.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.box_lo.iter().zip(self.box_hi.iter()))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// `A_i x_i − b_i`.
    pub fn local_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a_block * x - &self.b_block
    }
}

impl fmt::Debug for PlayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlayerSpec")
            .field("box_lo", &self.box_lo.as_slice())
            .field("box_hi", &self.box_hi.as_slice())
            .field("a_block", &self.a_block)
            .field("b_block", &self.b_block.as_slice())
            .finish_non_exhaustive()
    }
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check_finite(player: usize, what: &'static str, v: DVector<f64>) -> Result<DVector<f64>> {
    if finite(&v) {
        Ok(v)
    } else {
        Err(Error::Callback { player, what })
    }
}

/// `∇_{x_i} ϑ_i` at `(x, sigma)`, falling back to finite differences of the cost.
pub(crate) fn eval_grad_local(
    player: &PlayerSpec,
    index: usize,
    x: &DVector<f64>,
    sigma: &DVector<f64>,
) -> Result<DVector<f64>> {
    let g = match player.cost.grad_local(x, sigma) {
        Some(g) => g,
        None => {
            player
                .cost
                .cost(x, sigma)
                .ok_or(Error::MissingCallback { player: index, what: "grad_local" })?;
            fd::gradient(x, |v| player.cost.cost(v, sigma).unwrap_or(f64::NAN))
        }
    };
    if g.len() != player.dim() {
        return Err(Error::Shape { context: "grad_local", expected: player.dim(), found: g.len() });
    }
    check_finite(index, "grad_local", g)
}

pub(crate) fn eval_grad_agg(
    player: &PlayerSpec,
    index: usize,
    x: &DVector<f64>,
    sigma: &DVector<f64>,
) -> Result<DVector<f64>> {
    let g = match player.cost.grad_agg(x, sigma) {
        Some(g) => g,
        None => {
            player
                .cost
                .cost(x, sigma)
                .ok_or(Error::MissingCallback { player: index, what: "grad_agg" })?;
            fd::gradient(sigma, |s| player.cost.cost(x, s).unwrap_or(f64::NAN))
        }
    };
    if g.len() != sigma.len() {
        return Err(Error::Shape { context: "grad_agg", expected: sigma.len(), found: g.len() });
    }
    check_finite(index, "grad_agg", g)
}

pub(crate) fn eval_phi(player: &PlayerSpec, index: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_finite(index, "phi", player.cost.phi(x))
}

pub(crate) fn eval_phi_jacobian(
    player: &PlayerSpec,
    index: usize,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let j = player
        .cost
        .phi_jacobian(x)
        .unwrap_or_else(|| fd::jacobian(x, |v| player.cost.phi(v)));
    if j.iter().all(|v| v.is_finite()) {
        Ok(j)
    } else {
        Err(Error::Callback { player: index, what: "phi_jacobian" })
    }
}

/// The local map `G_i(x_i, y_i) = ∇_{x_i}ϑ_i(x_i, y_i) + (1/N) ∇φ_i(x_i)ᵀ ∇_σϑ_i(x_i, y_i)`,
/// i.e. player `i`'s partial gradient with the aggregate replaced by the
/// estimate `y_i`.
pub fn local_gradient(
    player: &PlayerSpec,
    index: usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
    players: usize,
) -> Result<DVector<f64>> {
    let own = eval_grad_local(player, index, x, y)?;
    let agg = eval_grad_agg(player, index, x, y)?;
    let jac = eval_phi_jacobian(player, index, x)?;
    Ok(own + jac.transpose() * agg / players as f64)
}

/// Partial Jacobians of `G_i` with respect to `x_i` and `y`, analytic when
/// the player provides them.
pub(crate) fn local_map_jacobians(
    player: &PlayerSpec,
    index: usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
    players: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if let Some(pair) = player.cost.local_map_jacobians(x, y, players) {
        return Ok(pair);
    }
    let mut failure = None;
    let mut eval = |xv: &DVector<f64>, yv: &DVector<f64>| match local_gradient(player, index, xv, yv, players) {
        Ok(g) => g,
        Err(e) => {
            failure.get_or_insert(e);
            DVector::from_element(x.len(), f64::NAN)
        }
    };
    let dx = fd::jacobian(x, |xv| eval(xv, y));
    let dy = fd::jacobian(y, |yv| eval(x, yv));
    match failure {
        Some(e) => Err(e),
        None => Ok((dx, dy)),
    }
}

/// An `N`-player aggregative game with `l` coupled equality constraints.
#[derive(Clone)]
pub struct GameSpec {
    name: String,
    agg_dim: usize,
    constraint_rows: usize,
    players: Vec<PlayerSpec>,
    offsets: Vec<usize>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("agg_dim", &self.agg_dim)
            .field("constraint_rows", &self.constraint_rows)
            .field("players", &self.players)
            .finish()
    }
}

impl GameSpec {
    pub fn new(name: impl Into<String>, agg_dim: usize, players: Vec<PlayerSpec>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::InvalidParameter("a game needs at least one player".into()));
        }
        let constraint_rows = players[0].b_block.len();
        let mut offsets = Vec::with_capacity(players.len() + 1);
        offsets.push(0);
        for (i, p) in players.iter().enumerate() {
            let n_i = p.dim();
            if n_i == 0 {
                return Err(Error::InvalidParameter(format!("player {i} has dimension zero")));
            }
            if p.box_hi.len() != n_i {
                return Err(Error::Shape { context: "box_hi", expected: n_i, found: p.box_hi.len() });
            }
            for k in 0..n_i {
                let (lo, hi) = (p.box_lo[k], p.box_hi[k]);
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidBox { player: i, coord: k, lo, hi });
                }
            }
            if p.b_block.len() != constraint_rows {
                return Err(Error::Shape {
                    context: "b_block rows",
                    expected: constraint_rows,
                    found: p.b_block.len(),
                });
            }
            if p.a_block.nrows() != constraint_rows || p.a_block.ncols() != n_i {
                return Err(Error::Shape {
                    context: "a_block",
                    expected: constraint_rows * n_i,
                    found: p.a_block.nrows() * p.a_block.ncols(),
                });
            }
            let centre = (&p.box_lo + &p.box_hi) / 2.0;
            let phi = eval_phi(p, i, &centre)?;
            if phi.len() != agg_dim {
                return Err(Error::Shape { context: "phi", expected: agg_dim, found: phi.len() });
            }
            offsets.push(offsets[i] + n_i);
        }
        Ok(Self {
            name: name.into(),
            agg_dim,
            constraint_rows,
            players,
            offsets,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn players(&self) -> &[PlayerSpec] {
        &self.players
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    /// Total decision dimension `n = Σ n_i`.
    pub fn dim(&self) -> usize {
        self.offsets[self.players.len()]
    }

    pub fn agg_dim(&self) -> usize {
        self.agg_dim
    }

    pub fn constraint_rows(&self) -> usize {
        self.constraint_rows
    }

    /// Index range of player `i` inside a stacked profile.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn check_profile(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Shape { context: "strategy profile", expected: self.dim(), found: x.len() })
        }
    }

    /// Player `i`'s block of a stacked profile.
    pub fn block(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        let r = self.range(i);
        x.rows(r.start, r.len()).into_owned()
    }

    pub fn split(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_profile(x)?;
        Ok((0..self.player_count()).map(|i| self.block(x, i)).collect())
    }

    pub fn stack(&self, blocks: &[DVector<f64>]) -> Result<DVector<f64>> {
        if blocks.len() != self.player_count() {
            return Err(Error::Shape {
                context: "player blocks",
                expected: self.player_count(),
                found: blocks.len(),
            });
        }
        let mut x = DVector::zeros(self.dim());
        for (i, b) in blocks.iter().enumerate() {
            let r = self.range(i);
            if b.len() != r.len() {
                return Err(Error::Shape { context: "player block", expected: r.len(), found: b.len() });
            }
            x.rows_mut(r.start, r.len()).copy_from(b);
        }
        Ok(x)
    }

    pub fn box_lo(&self) -> DVector<f64> {
        self.stack_with(|p| &p.box_lo)
    }

    pub fn box_hi(&self) -> DVector<f64> {
        self.stack_with(|p| &p.box_hi)
    }

    fn stack_with<'a>(&'a self, f: impl Fn(&'a PlayerSpec) -> &'a DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.players.iter().flat_map(|p| f(p).iter().copied()))
    }

    /// `A = [A_1, …, A_N]`.
    pub fn constraint_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.constraint_rows, self.dim());
        for (i, p) in self.players.iter().enumerate() {
            let r = self.range(i);
            a.columns_mut(r.start, r.len()).copy_from(&p.a_block);
        }
        a
    }

    /// `b = Σ b_i`.
    pub fn constraint_rhs(&self) -> DVector<f64> {
        self.players
            .iter()
            .fold(DVector::zeros(self.constraint_rows), |acc, p| acc + &p.b_block)
    }

    /// Euclidean diameter of the product box `Ω`.
    pub fn diameter(&self) -> f64 {
        (self.box_hi() - self.box_lo()).norm()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && (0..self.player_count()).all(|i| self.players[i].contains(&self.block(x, i)))
    }

    /// `σ(x) = (1/N) Σ φ_i(x_i)`.
    pub fn aggregate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_profile(x)?;
        let mut sigma = DVector::zeros(self.agg_dim);
        for (i, p) in self.players.iter().enumerate() {
            sigma += eval_phi(p, i, &self.block(x, i))?;
        }
        Ok(sigma / self.player_count() as f64)
    }

    /// The pseudo-gradient `F(x) = col{∇_{x_i} J_i(x)}`.
    pub fn pseudo_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let sigma = self.aggregate(x)?;
        let mut out = DVector::zeros(self.dim());
        for (i, p) in self.players.iter().enumerate() {
            let r = self.range(i);
            let g = local_gradient(p, i, &self.block(x, i), &sigma, self.player_count())?;
            out.rows_mut(r.start, r.len()).copy_from(&g);
        }
        Ok(out)
    }

    /// Jacobian of the pseudo-gradient by the chain rule through the aggregate:
    /// `∂F_i/∂x_j = δ_ij ∂G_i/∂x_i + (1/N) ∂G_i/∂y ∇φ_j(x_j)`.
    pub fn pseudo_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let sigma = self.aggregate(x)?;
        let count = self.player_count();
        let blocks = self.split(x)?;
        let phi_jacs = blocks
            .iter()
            .enumerate()
            .map(|(j, xj)| eval_phi_jacobian(&self.players[j], j, xj))
            .collect::<Result<Vec<_>>>()?;
        let mut jac = DMatrix::zeros(self.dim(), self.dim());
        for (i, p) in self.players.iter().enumerate() {
            let ri = self.range(i);
            let (gx, gy) = local_map_jacobians(p, i, &blocks[i], &sigma, count)?;
            for (j, pj) in phi_jacs.iter().enumerate() {
                let rj = self.range(j);
                let mut block = &gy * pj / count as f64;
                if i == j {
                    block += &gx;
                }
                jac.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(&block);
            }
        }
        Ok(jac)
    }

    /// `A x − b`; empty when the game has no coupled constraint.
    pub fn constraint_residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_profile(x)?;
        let mut r = DVector::zeros(self.constraint_rows);
        for (i, p) in self.players.iter().enumerate() {
            r += p.local_residual(&self.block(x, i));
        }
        Ok(r)
    }

    /// Player `i`'s full cost `J_i(x) = ϑ_i(x_i, σ(x))`, when a cost callback exists.
    pub fn player_cost(&self, i: usize, x: &DVector<f64>) -> Result<Option<f64>> {
        let sigma = self.aggregate(x)?;
        Ok(self.players[i].cost.cost(&self.block(x, i), &sigma))
    }

    /// Clamp a stacked profile onto `Ω`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        crate::geometry::clamp(x, &self.box_lo(), &self.box_hi())
    }
}
