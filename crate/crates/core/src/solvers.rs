//! Exact first-stage optimization.
//!
//! Both the deterministic program (known demand, reservation only) and the
//! two-stage stochastic program separate over VSPs: every objective term and
//! every demand constraint involves a single VSP's row. Each row is solved by
//! depth-first branch-and-bound over bounded bundle vectors, and the rows are
//! concatenated.
//!
//! Node lower bound = first-stage cost of the devices fixed so far plus the
//! expected recourse obtained by setting every undecided device to its cap.
//! Recourse is nonincreasing in bundles, so the bound is admissible.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::model::{reservation_bundle_cost, CostBreakdown, EdgeDevice, ProblemInstance, Violation};
use crate::recourse::{
    evaluate_total, first_stage_totals, integer_gap, RecourseDecision, ReservationPlan, Solution,
    VspCostModel, DEMAND_TOLERANCE,
};

pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;
pub const DEFAULT_COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Replaces the computed per-`[vsp][device]` bundle bound. A cap below
    /// [`bundle_upper_bound`] restricts the search and may exclude the optimum.
    pub bundle_cap_override: Option<Vec<Vec<u64>>>,
    /// Maximum nodes explored per VSP subproblem.
    pub node_limit: u64,
    /// Absolute slack for treating two plan costs as equal.
    pub cost_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bundle_cap_override: None,
            node_limit: DEFAULT_NODE_LIMIT,
            cost_tolerance: DEFAULT_COST_TOLERANCE,
        }
    }
}

impl SolverConfig {
    fn check(&self, vsps: usize, devices: usize) -> Result<(), SolverError> {
        if self.node_limit < 1 {
            return Err(SolverError::Invalid("node_limit must be >= 1".into()));
        }
        if !(self.cost_tolerance.is_finite() && self.cost_tolerance >= 0.0) {
            return Err(SolverError::Invalid(
                "cost_tolerance must be finite and >= 0".into(),
            ));
        }
        if let Some(caps) = &self.bundle_cap_override {
            if caps.len() != vsps || caps.iter().any(|r| r.len() != devices) {
                return Err(SolverError::Invalid(format!(
                    "bundle_cap_override must be {vsps} x {devices}"
                )));
            }
        }
        Ok(())
    }
}

/// Smallest `k` with `k · per_bundle >= requirement` (within tolerance).
fn bundles_to_cover(requirement: f64, per_bundle: f64) -> u64 {
    if requirement <= DEMAND_TOLERANCE {
        return 0;
    }
    let mut k = (requirement / per_bundle - DEMAND_TOLERANCE).ceil().max(0.0) as u64;
    while integer_gap(requirement, k as f64 * per_bundle) > 0 {
        k += 1;
    }
    while k > 0 && integer_gap(requirement, (k - 1) as f64 * per_bundle) == 0 {
        k -= 1;
    }
    k
}

/// Number of bundles on device `device` beyond which no optimal plan for
/// VSP `vsp` can go: enough to cover the largest requirement from this
/// device alone at its smallest positive similarity.
pub fn bundle_upper_bound(vsp: usize, device: usize, instance: &ProblemInstance) -> u64 {
    let sim = instance.similarity();
    let min_positive = (0..instance.num_scenarios())
        .map(|s| sim.get(vsp, device, s))
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_positive.is_finite() {
        return 0;
    }
    let max_requirement = (0..instance.num_scenarios())
        .map(|s| instance.requirement(vsp, s))
        .fold(0.0, f64::max);
    let n = instance.devices()[device].bundle_size as f64;
    bundles_to_cover(max_requirement, n * min_positive)
}

/// Per-VSP leaf oracle used by [`BranchAndBound`].
trait RowObjective: Sync {
    /// Cost of `b` bundles on device `e` in the first stage.
    fn device_cost(&self, e: usize, b: u64) -> f64;
    /// Lower bound on the remaining (non-first-stage) cost given an
    /// optimistic completion, or `None` if even that completion is infeasible.
    fn completion_bound(&self, optimistic: &[u64]) -> Option<f64>;
    /// Exact cost of a complete vector, or `None` if infeasible.
    fn leaf(&self, bundles: &[u64]) -> Option<f64>;
}

struct BranchAndBound<'a, O: RowObjective> {
    objective: &'a O,
    order: Vec<usize>,
    caps: Vec<u64>,
    node_limit: u64,
    tolerance: f64,
    nodes: u64,
    current: Vec<u64>,
    optimistic: Vec<u64>,
    best: Option<(f64, Vec<u64>)>,
}

enum RowOutcome {
    Optimal(Option<Vec<u64>>),
    Cutoff(Option<Vec<u64>>),
}

impl<'a, O: RowObjective> BranchAndBound<'a, O> {
    fn new(objective: &'a O, order: Vec<usize>, caps: Vec<u64>, config: &SolverConfig) -> Self {
        let n = caps.len();
        Self {
            objective,
            order,
            optimistic: caps.clone(),
            caps,
            node_limit: config.node_limit,
            tolerance: config.cost_tolerance,
            nodes: 0,
            current: vec![0; n],
            best: None,
        }
    }

    fn seed(&mut self, bundles: Vec<u64>) {
        if let Some(cost) = self.objective.leaf(&bundles) {
            self.best = Some((cost, bundles));
        }
    }

    fn offer(&mut self, cost: f64) {
        let better = match &self.best {
            None => true,
            Some((inc, vec)) => {
                cost < inc - self.tolerance || (cost <= inc + self.tolerance && self.current < *vec)
            }
        };
        if better {
            let kept = self.best.as_ref().map_or(cost, |(inc, _)| cost.min(*inc));
            self.best = Some((kept, self.current.clone()));
        }
    }

    /// Returns false once the node limit is hit.
    fn visit(&mut self, depth: usize, accumulated: f64) -> bool {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return false;
        }
        let Some(rest) = self.objective.completion_bound(&self.optimistic) else {
            return true;
        };
        if let Some((inc, _)) = &self.best {
            if accumulated + rest > inc + self.tolerance {
                return true;
            }
        }
        if depth == self.order.len() {
            if let Some(cost) = self.objective.leaf(&self.current) {
                self.offer(cost);
            }
            return true;
        }
        let e = self.order[depth];
        for b in 0..=self.caps[e] {
            self.current[e] = b;
            self.optimistic[e] = b;
            let cost = accumulated + self.objective.device_cost(e, b);
            if !self.visit(depth + 1, cost) {
                return false;
            }
        }
        self.current[e] = 0;
        self.optimistic[e] = self.caps[e];
        true
    }

    fn run(mut self) -> RowOutcome {
        let finished = self.visit(0, 0.0);
        let best = self.best.map(|(_, v)| v);
        if finished {
            RowOutcome::Optimal(best)
        } else {
            RowOutcome::Cutoff(best)
        }
    }
}

impl RowObjective for VspCostModel {
    fn device_cost(&self, e: usize, b: u64) -> f64 {
        self.device_first_stage(e, b)
    }

    fn completion_bound(&self, optimistic: &[u64]) -> Option<f64> {
        Some(self.expected_on_demand(optimistic))
    }

    fn leaf(&self, bundles: &[u64]) -> Option<f64> {
        Some(self.total(bundles))
    }
}

/// Visit order: ascending reservation cost per expected relevant unit,
/// devices with zero expected similarity last, ties by index.
fn exploration_order(instance: &ProblemInstance, vsp: usize) -> Vec<usize> {
    let sim = instance.similarity();
    let keyed: Vec<(f64, usize)> = instance
        .devices()
        .iter()
        .enumerate()
        .map(|(e, d)| {
            let expected_s: f64 = instance
                .scenarios()
                .iter()
                .enumerate()
                .map(|(s, sc)| sc.probability * sim.get(vsp, e, s))
                .sum();
            let key = if expected_s > 0.0 {
                reservation_bundle_cost(d) / (d.bundle_size as f64 * expected_s)
            } else {
                f64::INFINITY
            };
            (key, e)
        })
        .collect();
    sorted_order(keyed)
}

fn sorted_order(mut keyed: Vec<(f64, usize)>) -> Vec<usize> {
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, e)| e).collect()
}

fn solve_sip_row(instance: &ProblemInstance, vsp: usize, config: &SolverConfig) -> RowOutcome {
    let model = VspCostModel::new(vsp, instance);
    let caps: Vec<u64> = match &config.bundle_cap_override {
        Some(c) => c[vsp].clone(),
        None => (0..instance.num_devices())
            .map(|e| bundle_upper_bound(vsp, e, instance))
            .collect(),
    };
    let mut search = BranchAndBound::new(&model, exploration_order(instance, vsp), caps, config);
    // recourse is complete, so the empty row is always a valid incumbent
    search.seed(vec![0; instance.num_devices()]);
    search.run()
}

/// Minimizes expected two-stage cost over all integer reservation plans.
///
/// Returns [`SolverError::NodeLimit`] carrying the best plan found if any
/// VSP's search exceeds `config.node_limit`.
pub fn solve_sip(instance: &ProblemInstance, config: &SolverConfig) -> Result<Solution, SolverError> {
    config.check(instance.num_vsps(), instance.num_devices())?;
    let rows: Vec<RowOutcome> = (0..instance.num_vsps())
        .into_par_iter()
        .map(|w| solve_sip_row(instance, w, config))
        .collect();
    let mut cut = false;
    let bundles: Vec<Vec<u64>> = rows
        .into_iter()
        .map(|r| match r {
            RowOutcome::Optimal(v) => v,
            RowOutcome::Cutoff(v) => {
                cut = true;
                v
            }
        })
        .map(|v| v.expect("sip rows are seeded with a feasible incumbent"))
        .collect();
    let solution = evaluate_total(&ReservationPlan::from_bundles(bundles), instance);
    if cut {
        return Err(SolverError::NodeLimit {
            limit: config.node_limit,
            incumbent: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Reservation-only problem with known demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipInstance {
    pub devices: Vec<EdgeDevice>,
    /// Realized similarity, indexed `[vsp][device]`.
    pub actual_similarity: Vec<Vec<f64>>,
    pub actual_quantity: Vec<f64>,
    pub actual_threshold: Vec<f64>,
}

impl DipInstance {
    /// The deterministic problem for one scenario of `instance`.
    pub fn from_scenario(instance: &ProblemInstance, scenario: usize) -> Self {
        let sim = instance.similarity();
        let sc = &instance.scenarios()[scenario];
        Self {
            devices: instance.devices().to_vec(),
            actual_similarity: (0..instance.num_vsps())
                .map(|w| {
                    (0..instance.num_devices())
                        .map(|e| sim.get(w, e, scenario))
                        .collect()
                })
                .collect(),
            actual_quantity: sc.per_vsp.iter().map(|d| d.quantity as f64).collect(),
            actual_threshold: sc.per_vsp.iter().map(|d| d.threshold).collect(),
        }
    }

    pub fn num_vsps(&self) -> usize {
        self.actual_similarity.len()
    }

    pub fn requirement(&self, vsp: usize) -> f64 {
        self.actual_quantity[vsp] * self.actual_threshold[vsp]
    }

    fn check(&self) -> Result<(), SolverError> {
        let w = self.actual_similarity.len();
        let e = self.devices.len();
        if e == 0 {
            return Err(SolverError::Invalid("no devices".into()));
        }
        if self.actual_quantity.len() != w
            || self.actual_threshold.len() != w
            || self.actual_similarity.iter().any(|r| r.len() != e)
        {
            return Err(SolverError::Invalid("dimension mismatch in DIP instance".into()));
        }
        for (i, d) in self.devices.iter().enumerate() {
            // the deterministic program never prices on-demand units
            let v = d.violations();
            if let Some(first) = v.into_iter().find(|v| !matches!(v, Violation::AlphaOrder { .. })) {
                return Err(SolverError::Invalid(format!("device {i}: {first}")));
            }
        }
        let in_unit = |x: &f64| x.is_finite() && (0.0..=1.0).contains(x);
        if !self.actual_similarity.iter().flatten().all(in_unit)
            || !self.actual_threshold.iter().all(in_unit)
            || !self.actual_quantity.iter().all(|q| q.is_finite() && *q >= 0.0)
        {
            return Err(SolverError::Invalid("DIP values out of range".into()));
        }
        Ok(())
    }
}

struct DipRow<'a> {
    devices: &'a [EdgeDevice],
    yield_per_bundle: Vec<f64>,
    requirement: f64,
}

impl DipRow<'_> {
    fn covered(&self, bundles: &[u64]) -> bool {
        let coverage: f64 = self
            .yield_per_bundle
            .iter()
            .zip(bundles)
            .map(|(y, &b)| b as f64 * y)
            .sum();
        integer_gap(self.requirement, coverage) == 0
    }
}

impl RowObjective for DipRow<'_> {
    fn device_cost(&self, e: usize, b: u64) -> f64 {
        if b == 0 {
            0.0
        } else {
            let d = &self.devices[e];
            d.membership_cost + b as f64 * reservation_bundle_cost(d)
        }
    }

    fn completion_bound(&self, optimistic: &[u64]) -> Option<f64> {
        self.covered(optimistic).then_some(0.0)
    }

    fn leaf(&self, bundles: &[u64]) -> Option<f64> {
        self.covered(bundles).then(|| {
            bundles
                .iter()
                .enumerate()
                .map(|(e, &b)| self.device_cost(e, b))
                .sum()
        })
    }
}

/// Cost-minimal reservation plan meeting known demand without on-demand
/// purchases.
pub fn solve_dip(dip: &DipInstance) -> Result<Solution, SolverError> {
    solve_dip_with(dip, &SolverConfig::default())
}

pub fn solve_dip_with(dip: &DipInstance, config: &SolverConfig) -> Result<Solution, SolverError> {
    dip.check()?;
    config.check(dip.num_vsps(), dip.devices.len())?;
    let mut bundles = Vec::with_capacity(dip.num_vsps());
    let mut cut = false;
    for w in 0..dip.num_vsps() {
        let requirement = dip.requirement(w);
        let yield_per_bundle: Vec<f64> = dip
            .devices
            .iter()
            .zip(&dip.actual_similarity[w])
            .map(|(d, &s)| d.bundle_size as f64 * s)
            .collect();
        let caps: Vec<u64> = match &config.bundle_cap_override {
            Some(c) => c[w].clone(),
            None => yield_per_bundle
                .iter()
                .map(|&y| {
                    if y > 0.0 {
                        bundles_to_cover(requirement, y)
                    } else {
                        0
                    }
                })
                .collect(),
        };
        let keyed = dip
            .devices
            .iter()
            .zip(&yield_per_bundle)
            .enumerate()
            .map(|(e, (d, &y))| {
                let key = if y > 0.0 {
                    reservation_bundle_cost(d) / y
                } else {
                    f64::INFINITY
                };
                (key, e)
            })
            .collect();
        let row = DipRow {
            devices: &dip.devices,
            yield_per_bundle,
            requirement,
        };
        let search = BranchAndBound::new(&row, sorted_order(keyed), caps, config);
        let found = match search.run() {
            RowOutcome::Optimal(v) => v,
            RowOutcome::Cutoff(v) => {
                cut = true;
                v
            }
        };
        match found {
            Some(v) => bundles.push(v),
            None if cut => bundles.push(vec![0; dip.devices.len()]),
            None => return Err(SolverError::Infeasible { vsp: w, requirement }),
        }
    }
    let plan = ReservationPlan::from_bundles(bundles);
    let (membership, reservation) = first_stage_totals(&plan, &dip.devices);
    let solution = Solution {
        recourse: RecourseDecision::zeros(0, dip.num_vsps(), dip.devices.len()),
        plan,
        cost: CostBreakdown::new(membership, reservation, 0.0),
    };
    if cut {
        return Err(SolverError::NodeLimit {
            limit: config.node_limit,
            incumbent: Box::new(solution),
        });
    }
    Ok(solution)
}

/// One row of a single-entry bundle sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bundles: u64,
    pub stage1: f64,
    pub stage2: f64,
    pub total: f64,
}

/// Evaluates the plan holding `b` bundles at `(vsp, device)` and nothing
/// else, for each `b` in `range`.
pub fn sweep_first_stage(
    instance: &ProblemInstance,
    vsp: usize,
    device: usize,
    range: RangeInclusive<u64>,
) -> Result<Vec<SweepPoint>, SolverError> {
    if vsp >= instance.num_vsps() || device >= instance.num_devices() {
        return Err(SolverError::Invalid(format!(
            "sweep index (vsp {vsp}, device {device}) out of range ({} vsps, {} devices)",
            instance.num_vsps(),
            instance.num_devices()
        )));
    }
    Ok(range
        .map(|b| {
            let mut plan = ReservationPlan::zeros(instance.num_vsps(), instance.num_devices());
            plan.bundles[vsp][device] = b;
            let sol = evaluate_total(&plan, instance);
            SweepPoint {
                bundles: b,
                stage1: sol.cost.first_stage(),
                stage2: sol.cost.expected_on_demand,
                total: sol.cost.total,
            }
        })
        .collect())
}
