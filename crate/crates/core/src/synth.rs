//! Random valid instances for property tests, oracles and benchmarks.

use rand::Rng;

use crate::model::{DemandScenario, EdgeDevice, ProblemInstance, SimilarityTensor, Vsp, VspDemand};

/// Size and magnitude limits for [`random_instance`]. Every `max_*` is
/// inclusive and at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthShape {
    pub max_vsps: usize,
    pub max_devices: usize,
    pub max_scenarios: usize,
    pub max_quantity: u64,
    pub max_bundle_size: u64,
}

impl SynthShape {
    pub const SMALL: SynthShape = SynthShape {
        max_vsps: 2,
        max_devices: 3,
        max_scenarios: 3,
        max_quantity: 12,
        max_bundle_size: 5,
    };
}

/// Draws a valid instance. On-demand is always pricier than reservation (alpha_reservation
/// < alpha_on_demand), thresholds come from {0.25, 0.5, 0.75, 1} and
/// similarities from (0.05, 1].
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, shape: SynthShape) -> ProblemInstance {
    let w = rng.gen_range(1..=shape.max_vsps);
    let e = rng.gen_range(1..=shape.max_devices);
    let s = rng.gen_range(1..=shape.max_scenarios);

    let devices: Vec<EdgeDevice> = (0..e)
        .map(|id| {
            let alpha_reservation = rng.gen_range(1.0..8.0);
            EdgeDevice {
                id,
                uplink_rate: rng.gen_range(1.5e6..3.5e6),
                transmit_power: rng.gen_range(0.07..0.13),
                avg_payload_semantic: rng.gen_range(2_000.0..30_000.0),
                avg_payload_raw: Some(650_000.0),
                membership_cost: rng.gen_range(0.0..2.0),
                bundle_size: rng.gen_range(1..=shape.max_bundle_size),
                alpha_reservation,
                alpha_on_demand: alpha_reservation * rng.gen_range(1.2..4.0),
            }
        })
        .collect();
    let vsps = (0..w)
        .map(|id| Vsp {
            id,
            interest_label: format!("interest {id}"),
        })
        .collect();

    let weights: Vec<f64> = (0..s).map(|_| rng.gen_range(0.1..1.0)).collect();
    let sum: f64 = weights.iter().sum();
    let mut probabilities: Vec<f64> = weights.iter().map(|x| x / sum).collect();
    let head: f64 = probabilities[..s - 1].iter().sum();
    probabilities[s - 1] = 1.0 - head;

    let scenarios = probabilities
        .into_iter()
        .enumerate()
        .map(|(k, probability)| DemandScenario {
            probability,
            per_vsp: (0..w)
                .map(|v| VspDemand {
                    interest_key: format!("k{v}-{k}"),
                    quantity: rng.gen_range(0..=shape.max_quantity),
                    threshold: [0.25, 0.5, 0.75, 1.0][rng.gen_range(0..4)],
                })
                .collect(),
        })
        .collect();

    let mut similarity = SimilarityTensor::zeros(w, e, s);
    for v in 0..w {
        for d in 0..e {
            for k in 0..s {
                similarity.set(v, d, k, 1.0 - rng.gen_range(0.0..0.95));
            }
        }
    }
    ProblemInstance::new(devices, vsps, scenarios, similarity).expect("generator produces valid instances")
}
