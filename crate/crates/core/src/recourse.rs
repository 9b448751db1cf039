//! Second-stage evaluation for a fixed reservation plan.
//!
//! Once bundles are fixed, each (VSP, scenario) pair has an integer shortfall
//! against its requirement. On-demand units count at full value and carry a
//! per-device linear price, so the cheapest device absorbs the whole
//! shortfall and the expected recourse cost has a closed form.

use serde::{Deserialize, Serialize};

use crate::model::{
    on_demand_unit_cost, reservation_bundle_cost, CostBreakdown, EdgeDevice, ProblemInstance,
};

/// Slack allowed when comparing reserved coverage against a requirement.
pub const DEMAND_TOLERANCE: f64 = 1e-9;

/// First-stage decisions, both indexed `[vsp][device]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationPlan {
    pub membership: Vec<Vec<bool>>,
    pub bundles: Vec<Vec<u64>>,
}

impl ReservationPlan {
    pub fn zeros(vsps: usize, devices: usize) -> Self {
        Self {
            membership: vec![vec![false; devices]; vsps],
            bundles: vec![vec![0; devices]; vsps],
        }
    }

    /// Plan whose membership is exactly the set of entries with bundles.
    pub fn from_bundles(bundles: Vec<Vec<u64>>) -> Self {
        let membership = bundles
            .iter()
            .map(|row| row.iter().map(|&b| b >= 1).collect())
            .collect();
        Self { membership, bundles }
    }

    /// Drops membership flags that carry no bundles and adds the ones that
    /// bundles require.
    pub fn normalized(&self) -> Self {
        Self::from_bundles(self.bundles.clone())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.bundles.len(), self.bundles.first().map_or(0, Vec::len))
    }

    fn check_dims(&self, instance: &ProblemInstance) {
        let expected = (instance.num_vsps(), instance.num_devices());
        assert!(
            self.dims() == expected
                && self.bundles.iter().all(|r| r.len() == expected.1)
                && self.membership.len() == expected.0
                && self.membership.iter().all(|r| r.len() == expected.1),
            "plan dimensions do not match instance {expected:?}"
        );
    }
}

/// On-demand purchases indexed `[scenario][vsp][device]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecourseDecision {
    pub on_demand: Vec<Vec<Vec<u64>>>,
}

impl RecourseDecision {
    pub fn zeros(scenarios: usize, vsps: usize, devices: usize) -> Self {
        Self {
            on_demand: vec![vec![vec![0; devices]; vsps]; scenarios],
        }
    }

    /// Whether any scenario buys on-demand units.
    pub fn uses_on_demand(&self) -> bool {
        self.on_demand.iter().flatten().flatten().any(|&m| m > 0)
    }

    pub fn vsp_uses_on_demand(&self, vsp: usize) -> bool {
        self.on_demand.iter().any(|s| s[vsp].iter().any(|&m| m > 0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub plan: ReservationPlan,
    pub recourse: RecourseDecision,
    pub cost: CostBreakdown,
}

/// Integer ceiling of a positive gap, ignoring float noise below
/// [`DEMAND_TOLERANCE`].
pub(crate) fn integer_gap(requirement: f64, coverage: f64) -> u64 {
    let gap = requirement - coverage;
    if gap <= DEMAND_TOLERANCE {
        0
    } else {
        (gap - DEMAND_TOLERANCE).ceil() as u64
    }
}

/// Reserved relevant coverage Σ_e bundles·n·S for one VSP in one scenario.
fn reserved_coverage(vsp: usize, scenario: usize, bundles: &[u64], instance: &ProblemInstance) -> f64 {
    let sim = instance.similarity();
    instance
        .devices()
        .iter()
        .zip(bundles)
        .enumerate()
        .map(|(e, (d, &b))| b as f64 * (d.bundle_size as f64 * sim.get(vsp, e, scenario)))
        .sum()
}

/// Minimum total on-demand units VSP `vsp` must buy in `scenario` given
/// `plan`.
pub fn shortfall(vsp: usize, scenario: usize, plan: &ReservationPlan, instance: &ProblemInstance) -> u64 {
    let covered = reserved_coverage(vsp, scenario, &plan.bundles[vsp], instance);
    integer_gap(instance.requirement(vsp, scenario), covered)
}

/// Device with the lowest on-demand unit cost; ties go to the lowest index.
pub fn cheapest_on_demand_device(instance: &ProblemInstance) -> usize {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (e, d) in instance.devices().iter().enumerate() {
        let c = on_demand_unit_cost(d);
        if c < best_cost {
            best = e;
            best_cost = c;
        }
    }
    best
}

/// Cost-minimal on-demand purchases for `plan`: each shortfall goes entirely
/// to the cheapest on-demand device.
///
/// Any split of a shortfall among devices tied at the minimum price is
/// equally optimal; this returns the single-device canonical form.
pub fn optimal_recourse(plan: &ReservationPlan, instance: &ProblemInstance) -> RecourseDecision {
    plan.check_dims(instance);
    let cheapest = cheapest_on_demand_device(instance);
    let mut decision = RecourseDecision::zeros(
        instance.num_scenarios(),
        instance.num_vsps(),
        instance.num_devices(),
    );
    for (s, per_vsp) in decision.on_demand.iter_mut().enumerate() {
        for (w, row) in per_vsp.iter_mut().enumerate() {
            row[cheapest] = shortfall(w, s, plan, instance);
        }
    }
    decision
}

/// Membership and reservation totals of `plan`, summed in index order.
pub fn first_stage_totals(plan: &ReservationPlan, devices: &[EdgeDevice]) -> (f64, f64) {
    let mut membership = 0.0;
    let mut reservation = 0.0;
    for (m_row, b_row) in plan.membership.iter().zip(&plan.bundles) {
        for (e, d) in devices.iter().enumerate() {
            if m_row[e] {
                membership += d.membership_cost;
            }
            reservation += b_row[e] as f64 * reservation_bundle_cost(d);
        }
    }
    (membership, reservation)
}

/// Membership, reservation and on-demand totals of `plan` with `recourse`,
/// summed in fixed index order.
pub fn cost_of(
    plan: &ReservationPlan,
    recourse: &RecourseDecision,
    instance: &ProblemInstance,
) -> CostBreakdown {
    let devices = instance.devices();
    let (membership, reservation) = first_stage_totals(plan, devices);
    let unit: Vec<f64> = devices.iter().map(on_demand_unit_cost).collect();
    let mut expected = 0.0;
    for (scenario, per_vsp) in instance.scenarios().iter().zip(&recourse.on_demand) {
        let mut cost = 0.0;
        for row in per_vsp {
            for (e, &m) in row.iter().enumerate() {
                cost += m as f64 * unit[e];
            }
        }
        expected += scenario.probability * cost;
    }
    CostBreakdown::new(membership, reservation, expected)
}

/// Full two-stage cost of `plan` under its optimal recourse.
///
/// Membership is normalized first: a flag is set iff its entry holds at
/// least one bundle.
pub fn evaluate_total(plan: &ReservationPlan, instance: &ProblemInstance) -> Solution {
    plan.check_dims(instance);
    let plan = plan.normalized();
    let recourse = optimal_recourse(&plan, instance);
    let cost = cost_of(&plan, &recourse, instance);
    Solution { plan, recourse, cost }
}

/// Cost model of a single VSP's row, for searches that vary one row at a
/// time. Objective terms and constraints separate over VSPs, so a plan's
/// total is the sum of its rows' costs up to float summation order.
#[derive(Debug, Clone)]
pub struct VspCostModel {
    membership: Vec<f64>,
    bundle_cost: Vec<f64>,
    /// `bundle_size · S[vsp][e][s]`, indexed `[s][e]`.
    yield_per_bundle: Vec<Vec<f64>>,
    requirement: Vec<f64>,
    probability: Vec<f64>,
    cheapest_unit: f64,
}

impl VspCostModel {
    pub fn new(vsp: usize, instance: &ProblemInstance) -> Self {
        let devices = instance.devices();
        let sim = instance.similarity();
        let cheapest = cheapest_on_demand_device(instance);
        Self {
            membership: devices.iter().map(|d| d.membership_cost).collect(),
            bundle_cost: devices.iter().map(reservation_bundle_cost).collect(),
            yield_per_bundle: (0..instance.num_scenarios())
                .map(|s| {
                    devices
                        .iter()
                        .enumerate()
                        .map(|(e, d)| d.bundle_size as f64 * sim.get(vsp, e, s))
                        .collect()
                })
                .collect(),
            requirement: (0..instance.num_scenarios())
                .map(|s| instance.requirement(vsp, s))
                .collect(),
            probability: instance.scenarios().iter().map(|s| s.probability).collect(),
            cheapest_unit: on_demand_unit_cost(&devices[cheapest]),
        }
    }

    pub fn num_devices(&self) -> usize {
        self.membership.len()
    }

    /// Membership plus reservation cost of `b` bundles on device `e`.
    pub fn device_first_stage(&self, e: usize, b: u64) -> f64 {
        if b == 0 {
            0.0
        } else {
            self.membership[e] + b as f64 * self.bundle_cost[e]
        }
    }

    pub fn first_stage(&self, bundles: &[u64]) -> f64 {
        bundles
            .iter()
            .enumerate()
            .map(|(e, &b)| self.device_first_stage(e, b))
            .sum()
    }

    pub fn shortfall(&self, scenario: usize, bundles: &[u64]) -> u64 {
        let covered: f64 = self.yield_per_bundle[scenario]
            .iter()
            .zip(bundles)
            .map(|(y, &b)| b as f64 * y)
            .sum();
        integer_gap(self.requirement[scenario], covered)
    }

    pub fn expected_on_demand(&self, bundles: &[u64]) -> f64 {
        (0..self.requirement.len())
            .map(|s| self.probability[s] * (self.shortfall(s, bundles) as f64 * self.cheapest_unit))
            .sum()
    }

    pub fn total(&self, bundles: &[u64]) -> f64 {
        self.first_stage(bundles) + self.expected_on_demand(bundles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DemandScenario, SimilarityTensor, Vsp, VspDemand};
    use approx::assert_relative_eq;

    pub(crate) fn device(id: usize, n: u64, q: f64, memb: f64) -> EdgeDevice {
        EdgeDevice {
            id,
            uplink_rate: 1.0,
            transmit_power: 1.0,
            avg_payload_semantic: q,
            avg_payload_raw: None,
            membership_cost: memb,
            bundle_size: n,
            alpha_reservation: 1.0,
            alpha_on_demand: 3.0,
        }
    }

    fn single(n: u64, s: f64, quantity: u64, threshold: f64) -> ProblemInstance {
        let mut t = SimilarityTensor::zeros(1, 1, 1);
        t.set(0, 0, 0, s);
        ProblemInstance::new(
            vec![device(0, n, 1.0, 1.0)],
            vec![Vsp {
                id: 0,
                interest_label: String::new(),
            }],
            vec![DemandScenario {
                probability: 1.0,
                per_vsp: vec![VspDemand {
                    interest_key: "k".into(),
                    quantity,
                    threshold,
                }],
            }],
            t,
        )
        .unwrap()
    }

    #[test]
    fn shortfall_examples() {
        let inst = single(100, 0.8, 100, 1.0);
        let plan = ReservationPlan::from_bundles(vec![vec![1]]);
        assert_eq!(shortfall(0, 0, &plan, &inst), 20);
        let plan = ReservationPlan::from_bundles(vec![vec![2]]);
        assert_eq!(shortfall(0, 0, &plan, &inst), 0);

        let inst = single(200, 0.8, 200, 1.0);
        let plan = ReservationPlan::from_bundles(vec![vec![1]]);
        assert_eq!(shortfall(0, 0, &plan, &inst), 40);
    }

    #[test]
    fn fractional_requirement_is_ceiled() {
        // 120 · 0.83 = 99.6 < 100 leaves one unit short
        let inst = single(120, 0.83, 100, 1.0);
        let plan = ReservationPlan::from_bundles(vec![vec![1]]);
        assert_eq!(shortfall(0, 0, &plan, &inst), 1);
        let inst = single(10, 0.5, 7, 0.5);
        assert_eq!(shortfall(0, 0, &ReservationPlan::zeros(1, 1), &inst), 4);
    }

    fn three_device_instance(unit_costs: [f64; 3], shortfall_units: u64, p: f64) -> ProblemInstance {
        let devices: Vec<EdgeDevice> = unit_costs
            .iter()
            .enumerate()
            .map(|(e, &c)| {
                let mut d = device(e, 10, 1.0, 1.0);
                d.alpha_on_demand = c;
                d.alpha_reservation = c / 3.0;
                d
            })
            .collect();
        let demand = |q| VspDemand {
            interest_key: "k".into(),
            quantity: q,
            threshold: 1.0,
        };
        ProblemInstance::new(
            devices,
            vec![Vsp {
                id: 0,
                interest_label: String::new(),
            }],
            vec![
                DemandScenario {
                    probability: p,
                    per_vsp: vec![demand(shortfall_units)],
                },
                DemandScenario {
                    probability: 1.0 - p,
                    per_vsp: vec![demand(0)],
                },
            ],
            SimilarityTensor::zeros(1, 3, 2),
        )
        .unwrap()
    }

    #[test]
    fn recourse_goes_to_cheapest_device() {
        let inst = three_device_instance([5.0, 3.0, 4.0], 20, 0.25);
        let plan = ReservationPlan::zeros(1, 3);
        let r = optimal_recourse(&plan, &inst);
        assert_eq!(r.on_demand[0][0], vec![0, 20, 0]);
        assert_eq!(r.on_demand[1][0], vec![0, 0, 0]);
        let sol = evaluate_total(&plan, &inst);
        assert_relative_eq!(sol.cost.expected_on_demand, 60.0 * 0.25, max_relative = 1e-15);
    }

    #[test]
    fn brute_force_split_agrees_with_argmin() {
        // Every integer split (a, b, c) with a+b+c >= 20, each <= 20.
        let costs = [5.0, 3.0, 4.0];
        let mut best = f64::INFINITY;
        for a in 0..=20u64 {
            for b in 0..=20u64 {
                for c in 0..=20u64 {
                    if a + b + c >= 20 {
                        best = best.min(a as f64 * costs[0] + b as f64 * costs[1] + c as f64 * costs[2]);
                    }
                }
            }
        }
        assert_eq!(best, 60.0);
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let inst = three_device_instance([4.0, 5.0, 4.0], 7, 1.0);
        let r = optimal_recourse(&ReservationPlan::zeros(1, 3), &inst);
        assert_eq!(r.on_demand[0][0], vec![7, 0, 0]);
    }

    #[test]
    fn zero_shortfall_gives_zero_recourse() {
        let inst = single(100, 0.8, 100, 1.0);
        let r = optimal_recourse(&ReservationPlan::from_bundles(vec![vec![5]]), &inst);
        assert!(!r.uses_on_demand());
    }

    #[test]
    fn evaluate_total_examples() {
        let inst = single(100, 0.8, 0, 1.0);
        let sol = evaluate_total(&ReservationPlan::zeros(1, 1), &inst);
        assert_eq!(sol.cost.total, 0.0);

        let inst = single(100, 0.8, 13, 1.0);
        let sol = evaluate_total(&ReservationPlan::zeros(1, 1), &inst);
        assert_eq!(sol.cost.total, 13.0 * on_demand_unit_cost(&inst.devices()[0]));
    }

    #[test]
    fn membership_is_normalized() {
        let inst = single(100, 0.8, 100, 1.0);
        let plan = ReservationPlan {
            membership: vec![vec![true]],
            bundles: vec![vec![0]],
        };
        let sol = evaluate_total(&plan, &inst);
        assert_eq!(sol.plan.membership, vec![vec![false]]);
        assert_eq!(sol.cost.membership_total, 0.0);

        let plan = ReservationPlan {
            membership: vec![vec![false]],
            bundles: vec![vec![2]],
        };
        let sol = evaluate_total(&plan, &inst);
        assert_eq!(sol.plan.membership, vec![vec![true]]);
        assert_eq!(sol.cost.membership_total, 1.0);
    }

    #[test]
    fn cost_model_matches_evaluate_total() {
        let inst = three_device_instance([5.0, 3.0, 4.0], 20, 0.4);
        let model = VspCostModel::new(0, &inst);
        for b in 0..4u64 {
            let bundles = vec![b, 1, 0];
            let sol = evaluate_total(&ReservationPlan::from_bundles(vec![bundles.clone()]), &inst);
            assert_relative_eq!(model.total(&bundles), sol.cost.total, max_relative = 1e-12);
        }
    }
}
