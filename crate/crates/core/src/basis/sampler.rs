//! Poisson random measure atoms of a compound Poisson Lévy basis.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::GeneratingQuadruple;
use crate::error::{Result, SupouError};

/// One atom `(x, A, s)` of the Poisson random measure with intensity `ν × π × λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonAtom {
    pub jump: DVector<f64>,
    pub a: DMatrix<f64>,
    pub kappa: f64,
    pub rho: f64,
    pub time: f64,
}

/// Draws all atoms falling in `[t_lo, t_hi)`, sorted by time.
pub fn sample_atoms_with<R: Rng + ?Sized>(
    q: &GeneratingQuadruple,
    t_lo: f64,
    t_hi: f64,
    rng: &mut R,
) -> Result<Vec<PoissonAtom>> {
    if !(t_lo < t_hi && t_lo.is_finite() && t_hi.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("empty or infinite window [{t_lo}, {t_hi})")));
    }
    let mean = q.levy.rate * (t_hi - t_lo);
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count: f64 = Poisson::new(mean)
        .map_err(|e| SupouError::InvalidArgument(format!("Poisson mean {mean}: {e}")))?
        .sample(rng);
    let mut atoms: Vec<PoissonAtom> = (0..count as usize)
        .map(|_| {
            let time = t_lo + (t_hi - t_lo) * rng.random::<f64>();
            let jump = q.levy.jumps.sample(rng);
            let m = q.pi.sample(rng);
            PoissonAtom { jump, a: m.a, kappa: m.kappa, rho: m.rho, time }
        })
        .collect();
    atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(atoms)
}

/// Seeded form of [`sample_atoms_with`].
pub fn sample_poisson_atoms(q: &GeneratingQuadruple, t_lo: f64, t_hi: f64, seed: u64) -> Result<Vec<PoissonAtom>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_atoms_with(q, t_lo, t_hi, &mut rng)
}
