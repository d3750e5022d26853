//! Rayon drivers. Work item `i` always uses substream `i`, so results do
//! not depend on the number of threads.

use asif_core::sim::{self, SimConfig, SimReport};
use asif_core::{rng, Design, DrawSet, Result};
use rayon::prelude::*;

pub const THREADS_ENV: &str = "ASIF_THREADS";

/// Sizes the global pool from `ASIF_THREADS` (unset or 0: rayon's default).
/// Returns the worker count in effect.
pub fn configure_threads() -> usize {
    let n = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if n > 0 {
        // Fails only when a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

/// Same draws as [`Design::draw_set`], computed in parallel.
pub fn draw_set(design: &Design<'_>, m: usize, seed: u64) -> Result<DrawSet> {
    if m == 0 {
        return Err(asif_core::Error::InvalidArgument("m must be at least 1".into()));
    }
    let draws = (0..m).into_par_iter().map(|i| design.sample_indexed(seed, i)).collect::<Result<Vec<_>>>()?;
    Ok(DrawSet { draws, seed, generator: rng::GENERATOR })
}

/// Same report as [`sim::run_simulation`], replicates in parallel.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let records =
        (0..config.replications).into_par_iter().map(|i| sim::run_replicate(config, i)).collect::<Result<Vec<_>>>()?;
    Ok(sim::aggregate(config, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use asif_core::{Assignment, Caps, Covariates, DesignSpec, MatchedDataset};

    #[test]
    fn parallel_draws_match_sequential() {
        let x = Covariates::from_columns(vec![(0..12).map(|i| (i as f64).sin()).collect()]).unwrap();
        let w = Assignment::from_treated(12, &[0, 1, 2, 3, 4, 5]);
        let ds = MatchedDataset::from_raw(&x, MatchedDataset::default_names(1), w).unwrap();
        let d = Design::new(&DesignSpec::constrained(Caps::Uniform(0.3)), &ds).unwrap();
        assert_eq!(draw_set(&d, 64, 9).unwrap(), d.draw_set(64, 9).unwrap());
    }

    #[test]
    fn parallel_simulation_matches_sequential() {
        let config = SimConfig { replications: 2, scale: 0.2, m: 50, randomization_caps: vec![], ..SimConfig::default() };
        assert_eq!(run_simulation(&config).unwrap(), sim::run_simulation(&config).unwrap());
    }
}
