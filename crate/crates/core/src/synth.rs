//! Synthetic region × industry matrices with known structure.
//!
//! Randomness comes from ChaCha8 seeded through `seed_from_u64`, so a seed
//! reproduces the same matrix on any platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::nonempty_support;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha, seed_from_u64)";

/// Perfectly nested matrix: region `r` (1-based) hosts industries
/// `1..=ceil(r · n_industries / n_regions)`. Rows come out in ascending
/// diversity, columns in descending ubiquity.
pub fn generate_nested(n_regions: usize, n_industries: usize) -> Result<DMatrix<f64>> {
    if n_regions == 0 || n_industries == 0 {
        return Err(Error::InvalidParameter("nested matrix needs at least one row and column".into()));
    }
    Ok(DMatrix::from_fn(n_regions, n_industries, |r, i| {
        let reach = ((r + 1) * n_industries).div_ceil(n_regions);
        if i < reach {
            1.0
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapabilityParams {
    pub n_regions: usize,
    pub n_industries: usize,
    pub n_capabilities: usize,
    pub p_region: f64,
    pub p_industry: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl Default for CapabilityParams {
    fn default() -> Self {
        CapabilityParams {
            n_regions: 200,
            n_industries: 100,
            n_capabilities: 20,
            p_region: 0.5,
            p_industry: 0.15,
            seed: 0,
            max_retries: 10,
        }
    }
}

/// Latent capabilities behind a presence matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityModel {
    pub params: CapabilityParams,
    /// `region_capability[r][c]`: region `r` has capability `c`.
    pub region_capability: Vec<Vec<bool>>,
    /// `industry_requirement[i][c]`: industry `i` needs capability `c`.
    pub industry_requirement: Vec<Vec<bool>>,
    /// Draw attempts used, including the successful one.
    pub attempts: usize,
}

impl CapabilityModel {
    /// Region `r` hosts industry `i` iff it has every capability `i` needs.
    pub fn presence(&self) -> DMatrix<f64> {
        let nr = self.region_capability.len();
        let ni = self.industry_requirement.len();
        DMatrix::from_fn(nr, ni, |r, i| {
            let covered = self.industry_requirement[i]
                .iter()
                .zip(&self.region_capability[r])
                .all(|(&need, &has)| !need || has);
            if covered {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn capability_counts(&self) -> Vec<usize> {
        self.region_capability.iter().map(|c| c.iter().filter(|&&b| b).count()).collect()
    }
}

fn bernoulli_rows<R: Rng>(rng: &mut R, n: usize, k: usize, p: f64) -> Vec<Vec<bool>> {
    (0..n).map(|_| (0..k).map(|_| rng.random::<f64>() < p).collect()).collect()
}

/// Draw a capability model and its presence matrix. The matrix is returned
/// unpruned; a draw whose matrix prunes to nothing is redrawn up to
/// `max_retries` times.
pub fn generate_capability_model(params: CapabilityParams) -> Result<(CapabilityModel, DMatrix<f64>)> {
    let valid_p = |p: f64| p > 0.0 && p <= 1.0;
    if !valid_p(params.p_region) || !valid_p(params.p_industry) {
        return Err(Error::InvalidParameter(format!(
            "probabilities must lie in (0, 1], got {} and {}",
            params.p_region, params.p_industry
        )));
    }
    if params.n_regions == 0 || params.n_industries == 0 || params.n_capabilities == 0 {
        return Err(Error::InvalidParameter("capability model sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for attempt in 1..=params.max_retries.max(1) {
        let region_capability = bernoulli_rows(&mut rng, params.n_regions, params.n_capabilities, params.p_region);
        let industry_requirement =
            bernoulli_rows(&mut rng, params.n_industries, params.n_capabilities, params.p_industry);
        let model = CapabilityModel { params, region_capability, industry_requirement, attempts: attempt };
        let m = model.presence();
        let (rows, cols) = nonempty_support(&m);
        if !rows.is_empty() && !cols.is_empty() {
            return Ok((model, m));
        }
        log::warn!("capability model draw {attempt} (seed {}) is empty after pruning; redrawing", params.seed);
    }
    Err(Error::DegenerateNetwork(format!(
        "capability model with seed {} stayed empty after {} draws",
        params.seed, params.max_retries
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_shapes() {
        let m = generate_nested(3, 3).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(3, 3, &[1., 0., 0., 1., 1., 0., 1., 1., 1.]));
        assert_eq!(generate_nested(1, 4).unwrap(), DMatrix::from_element(1, 4, 1.0));
        let wide = generate_nested(2, 5).unwrap();
        assert_eq!(wide.row(0).sum(), 3.0);
        assert_eq!(wide.row(1).sum(), 5.0);
        assert!(generate_nested(0, 3).is_err());
    }

    #[test]
    fn single_capability_everyone_has_it() {
        let (_, m) = generate_capability_model(CapabilityParams {
            n_regions: 10,
            n_industries: 7,
            n_capabilities: 1,
            p_region: 1.0,
            p_industry: 0.5,
            seed: 3,
            max_retries: 1,
        })
        .unwrap();
        assert!(m.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = CapabilityParams { n_regions: 30, n_industries: 20, seed: 42, ..Default::default() };
        let a = generate_capability_model(p).unwrap();
        let b = generate_capability_model(p).unwrap();
        assert_eq!(a, b);
        let c = generate_capability_model(CapabilityParams { seed: 43, ..p }).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn adding_a_capability_never_removes_an_industry() {
        let p = CapabilityParams { n_regions: 20, n_industries: 30, seed: 7, ..Default::default() };
        let (mut model, before) = generate_capability_model(p).unwrap();
        for r in 0..model.region_capability.len() {
            if let Some(c) = model.region_capability[r].iter().position(|&b| !b) {
                model.region_capability[r][c] = true;
            }
        }
        let after = model.presence();
        assert!(before.iter().zip(after.iter()).all(|(b, a)| a >= b));
    }

    #[test]
    fn empty_draws_exhaust_retries() {
        let p = CapabilityParams {
            n_regions: 5,
            n_industries: 5,
            n_capabilities: 40,
            p_region: 0.01,
            p_industry: 1.0,
            seed: 1,
            max_retries: 3,
        };
        assert!(matches!(generate_capability_model(p), Err(Error::DegenerateNetwork(_))));
    }

    #[test]
    fn bad_probabilities() {
        let p = CapabilityParams { p_region: 0.0, ..Default::default() };
        assert!(generate_capability_model(p).is_err());
        let p = CapabilityParams { p_industry: 1.5, ..Default::default() };
        assert!(generate_capability_model(p).is_err());
    }
}
