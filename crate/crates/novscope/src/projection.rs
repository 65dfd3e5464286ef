//! Seeded Gaussian random projection of flattened standardized patches,
//! entries drawn Normal(0, 1/m) so pairwise distances are approximately
//! preserved.

use rand::RngExt;
use rand_distr::StandardNormal;

use crate::error::{NovError, Result};
use crate::seeding::rng_from_seed;

/// Project each row of `patches` (length d) down to `out_dim` dimensions.
/// The d x out_dim projection matrix is filled row-major from the seeded
/// generator, so the result is deterministic given (patches, out_dim, seed).
pub fn random_projection(
    patches: &[Vec<f64>],
    out_dim: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if patches.is_empty() {
        return Ok(Vec::new());
    }
    let d = patches[0].len();
    if out_dim == 0 || out_dim > d {
        return Err(NovError::InvalidInput(format!("out_dim {out_dim} must be in 1..={d}")));
    }
    let mut rng = rng_from_seed(seed);
    let scale = (1.0 / out_dim as f64).sqrt();
    let mut matrix = vec![0.0; d * out_dim];
    for v in &mut matrix {
        let g: f64 = rng.sample(StandardNormal);
        *v = scale * g;
    }
    Ok(patches
        .iter()
        .map(|p| {
            let mut out = vec![0.0; out_dim];
            for (i, &x) in p.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &matrix[i * out_dim..(i + 1) * out_dim];
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += x * w;
                }
            }
            out
        })
        .collect())
}
