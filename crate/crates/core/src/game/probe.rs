use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GameSpec;
use crate::fd;

/// Smallest eigenvalue of `½(JF + JFᵀ)` over `samples` uniform draws from
/// `Ω`, with `JF` from finite differences of the pseudo-gradient.
///
/// A negative value means `F` is not monotone somewhere on the box. The
/// result is a diagnostic; callback failures at a sample skip that sample.
pub fn monotonicity_probe(game: &GameSpec, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = game.box_lo();
    let hi = game.box_hi();
    let mut worst = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let x = DVector::from_iterator(
            game.dim(),
            lo.iter().zip(hi.iter()).map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l }),
        );
        let mut failed = false;
        let jac = fd::jacobian(&x, |v| {
            game.pseudo_gradient(v).unwrap_or_else(|_| {
                failed = true;
                DVector::zeros(v.len())
            })
        });
        if failed {
            log::warn!("monotonicity probe: skipped a sample where the pseudo-gradient failed");
            continue;
        }
        worst = worst.min(min_sym_eigenvalue(&jac));
    }
    worst
}

pub(crate) fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}
