//! Simulated station files, for trying the harness without real data.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stdlm_core::model::{DistanceMetric, Gamma, ObservationPanel, Phase, Site, StationSet};
use stdlm_core::synthetic::{simulate, SyntheticSpec};
use stdlm_core::Result;

use crate::ingest::{write_observations, write_stations};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub sites: usize,
    pub hours: usize,
    /// Side of the square the stations are scattered over, in km.
    pub extent: f64,
    /// Probability that an entry is missing.
    pub missing: f64,
    pub seed: u64,
    pub gamma: Gamma,
    pub sigma2: f64,
    pub lambda: f64,
    pub phase: Phase,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            sites: 10,
            hours: 336,
            extent: 50.0,
            missing: 0.05,
            seed: 1,
            gamma: Gamma::reference(),
            sigma2: 0.05,
            lambda: 20.0,
            // centre of the default phase prior
            phase: Phase::new(2.5, 9.8),
        }
    }
}

/// Stations `S01, S02, ...` scattered uniformly, and a panel simulated from
/// the model with entries dropped at random. Hours start at 1.
pub fn simulate_fixture(spec: &FixtureSpec) -> Result<(StationSet, ObservationPanel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sites = (0..spec.sites)
        .map(|i| {
            let c = [
                rng.random::<f64>() * spec.extent,
                rng.random::<f64>() * spec.extent,
            ];
            Site::new(format!("S{:02}", i + 1), c)
        })
        .collect();
    let stations = StationSet::new(sites, DistanceMetric::Euclidean)?;
    let data = simulate(
        &stations,
        &SyntheticSpec {
            gamma: spec.gamma,
            sigma2: spec.sigma2,
            lambda: spec.lambda,
            phase: spec.phase,
            means: [2.85, -0.75, -0.08],
            beta_var: 1.0,
            alpha_var: 0.01,
            n_times: spec.hours,
            first_hour: 1,
            static_states: false,
        },
        &mut rng,
    )?;
    let mask = DMatrix::from_fn(spec.sites, spec.hours, |_, _| {
        rng.random::<f64>() >= spec.missing
    });
    let panel = ObservationPanel::new(data.y, mask, data.t_index)?;
    Ok((stations, panel))
}

/// Writes `stations.csv` and `observations.csv` into `dir`.
pub fn write_fixture(
    dir: &Path,
    stations: &StationSet,
    panel: &ObservationPanel,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_stations(&dir.join("stations.csv"), stations)?;
    write_observations(&dir.join("observations.csv"), stations, panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ingest;

    #[test]
    fn fixture_round_trips_through_ingestion() {
        let spec = FixtureSpec {
            sites: 4,
            hours: 50,
            missing: 0.2,
            ..FixtureSpec::default()
        };
        let (st, panel) = simulate_fixture(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), &st, &panel).unwrap();
        let back = ingest(
            &dir.path().join("stations.csv"),
            &dir.path().join("observations.csv"),
        )
        .unwrap();
        assert_eq!(back.panel.mask(), panel.mask());
        assert_eq!(back.panel.t_index(), panel.t_index());
        for i in 0..4 {
            for c in 0..50 {
                if panel.is_observed(i, c) {
                    assert_eq!(back.panel.values()[(i, c)], panel.values()[(i, c)]);
                }
            }
        }
        let again = simulate_fixture(&spec).unwrap().1;
        assert_eq!(again.mask(), panel.mask());
        assert!(again
            .values()
            .iter()
            .zip(panel.values().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
