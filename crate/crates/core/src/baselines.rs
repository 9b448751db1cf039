//! Comparison schemes: the expected-value formulation and random plans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::model::ProblemInstance;
use crate::recourse::{evaluate_total, ReservationPlan, Solution};
use crate::solvers::{bundle_upper_bound, solve_dip, DipInstance};

/// Averages demand over the scenario set, solves the deterministic program
/// at that average, and prices the resulting plan under the true scenarios.
///
/// The averaged requirement is E[F̄·F̃]; the averaged similarity is E[S].
pub fn solve_evf(instance: &ProblemInstance) -> Result<Solution, SolverError> {
    let sim = instance.similarity();
    let scenarios = instance.scenarios();
    let dip = DipInstance {
        devices: instance.devices().to_vec(),
        actual_similarity: (0..instance.num_vsps())
            .map(|w| {
                (0..instance.num_devices())
                    .map(|e| {
                        let mean: f64 = scenarios
                            .iter()
                            .enumerate()
                            .map(|(s, sc)| sc.probability * sim.get(w, e, s))
                            .sum();
                        mean.clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect(),
        actual_quantity: (0..instance.num_vsps())
            .map(|w| {
                scenarios
                    .iter()
                    .enumerate()
                    .map(|(s, sc)| sc.probability * instance.requirement(w, s))
                    .sum()
            })
            .collect(),
        actual_threshold: vec![1.0; instance.num_vsps()],
    };
    let averaged = solve_dip(&dip)?;
    Ok(evaluate_total(&averaged.plan, instance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSchemeConfig {
    pub seed: u64,
    pub samples: usize,
}

impl Default for RandomSchemeConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 100,
        }
    }
}

/// Per-sample totals and their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSummary {
    pub seed: u64,
    pub samples: usize,
    pub totals: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Index of the first sample attaining `min`.
    pub best_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomOutcome {
    pub solutions: Vec<Solution>,
    pub summary: RandomSummary,
}

/// Draws the bundle matrix of sample `index`.
///
/// Generator: ChaCha8 seeded with `seed_from_u64(seed)`, stream set to the
/// sample index. Entries are drawn row-major (`vsp` outer, `device` inner),
/// each uniform on `0..=bundle_upper_bound(vsp, device)`.
pub fn random_plan(instance: &ProblemInstance, seed: u64, index: u64) -> ReservationPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let bundles = (0..instance.num_vsps())
        .map(|w| {
            (0..instance.num_devices())
                .map(|e| rng.gen_range(0..=bundle_upper_bound(w, e, instance)))
                .collect()
        })
        .collect();
    ReservationPlan::from_bundles(bundles)
}

pub fn solve_random(
    instance: &ProblemInstance,
    config: &RandomSchemeConfig,
) -> Result<RandomOutcome, SolverError> {
    if config.samples < 1 {
        return Err(SolverError::Invalid("random scheme needs samples >= 1".into()));
    }
    let solutions: Vec<Solution> = (0..config.samples as u64)
        .into_par_iter()
        .map(|i| evaluate_total(&random_plan(instance, config.seed, i), instance))
        .collect();
    let totals: Vec<f64> = solutions.iter().map(|s| s.cost.total).collect();
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let (best_sample, min) =
        totals.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, t)| if t < acc.1 { (i, t) } else { acc },
        );
    let max = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RandomOutcome {
        solutions,
        summary: RandomSummary {
            seed: config.seed,
            samples: config.samples,
            totals,
            mean,
            min,
            max,
            best_sample,
        },
    })
}
