//! Sweeps behind the `sweep-*`, `compare`, `energy-report` and `similarity`
//! subcommands. Every function returns rows in grid order; grid points are
//! solved in parallel.

use std::fmt;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use semalloc_core::baselines::{solve_evf, solve_random, RandomSchemeConfig};
use semalloc_core::{
    bundle_upper_bound, solve_sip, sweep_first_stage, transmission_energy, ProblemInstance, Solution,
    SolverConfig, SweepPoint,
};

use crate::Usage;

/// How a VSP covers its demand in a solved plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanType {
    /// Holds at least one reserved bundle.
    Reserved,
    /// No bundles; expected on-demand spend is positive.
    OnDemand,
    None,
}

impl fmt::Display for PlanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanType::Reserved => "reserved",
            PlanType::OnDemand => "on-demand",
            PlanType::None => "none",
        })
    }
}

pub fn plan_type(solution: &Solution, instance: &ProblemInstance, vsp: usize) -> PlanType {
    if solution.plan.bundles[vsp].iter().any(|&b| b > 0) {
        return PlanType::Reserved;
    }
    let expected: f64 = instance
        .scenarios()
        .iter()
        .zip(&solution.recourse.on_demand)
        .map(|(sc, per_vsp)| sc.probability * per_vsp[vsp].iter().sum::<u64>() as f64)
        .sum();
    if expected > 0.0 {
        PlanType::OnDemand
    } else {
        PlanType::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRow {
    pub p: f64,
    pub reservation_cost: f64,
    pub expected_on_demand: f64,
    pub total: f64,
    pub plan_types: Vec<PlanType>,
    pub solution: Solution,
}

/// Re-solves the stochastic program with P(λ₁) = p, P(λ₂) = 1 − p for each
/// grid point. The instance must have exactly two scenarios.
pub fn sweep_probability(
    instance: &ProblemInstance,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<Vec<ProbabilityRow>> {
    if instance.num_scenarios() != 2 {
        return Err(Usage(format!(
            "sweep-probability needs exactly 2 scenarios, problem has {}",
            instance.num_scenarios()
        ))
        .into());
    }
    grid.par_iter()
        .map(|&p| {
            let inst = instance
                .with_probabilities(&[p, 1.0 - p])
                .map_err(|r| anyhow!("p = {p}: {r}"))?;
            let sol = solve_sip(&inst, config).with_context(|| format!("p = {p}"))?;
            Ok(ProbabilityRow {
                p,
                reservation_cost: sol.cost.first_stage(),
                expected_on_demand: sol.cost.expected_on_demand,
                total: sol.cost.total,
                plan_types: (0..inst.num_vsps()).map(|w| plan_type(&sol, &inst, w)).collect(),
                solution: sol,
            })
        })
        .collect()
}

pub fn write_probability_csv(rows: &[ProbabilityRow], vsps: usize, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "p".to_string(),
        "reservation_cost".into(),
        "expected_on_demand".into(),
        "total".into(),
    ];
    header.extend((0..vsps).map(|v| format!("vsp{v}_plan")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.p.to_string(),
            r.reservation_cost.to_string(),
            r.expected_on_demand.to_string(),
            r.total.to_string(),
        ];
        rec.extend(r.plan_types.iter().map(ToString::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Bundle sweep over `0..=max` plus the index of the first minimizing row.
pub fn sweep_bundles(
    instance: &ProblemInstance,
    vsp: usize,
    device: usize,
    max: Option<u64>,
) -> Result<(Vec<SweepPoint>, usize)> {
    if vsp >= instance.num_vsps() || device >= instance.num_devices() {
        return Err(Usage(format!(
            "--vsp {vsp} --device {device} out of range ({} vsps, {} devices)",
            instance.num_vsps(),
            instance.num_devices()
        ))
        .into());
    }
    let max = max.unwrap_or_else(|| bundle_upper_bound(vsp, device, instance) + 2);
    let points = sweep_first_stage(instance, vsp, device, 0..=max)?;
    let argmin = points.iter().enumerate().fold(
        0,
        |best, (i, p)| if p.total < points[best].total { i } else { best },
    );
    Ok((points, argmin))
}

pub fn write_bundles_csv(points: &[SweepPoint], argmin: usize, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bundles", "stage1", "stage2", "total", "argmin"])?;
    for (i, p) in points.iter().enumerate() {
        w.write_record([
            p.bundles.to_string(),
            p.stage1.to_string(),
            p.stage2.to_string(),
            p.total.to_string(),
            u8::from(i == argmin).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub factor: f64,
    pub sip_total: f64,
    pub sip_expected_on_demand: f64,
    pub evf_total: f64,
    pub random_mean: f64,
    pub random_min: f64,
}

/// Scales every on-demand coefficient by each factor and prices the
/// stochastic, expected-value and random schemes.
pub fn compare(
    instance: &ProblemInstance,
    factors: &[f64],
    random: &RandomSchemeConfig,
    config: &SolverConfig,
) -> Result<Vec<CompareRow>> {
    factors
        .par_iter()
        .map(|&factor| {
            let inst = instance
                .with_on_demand_factor(factor)
                .map_err(|r| anyhow!("factor {factor}: {r}"))?;
            let sip = solve_sip(&inst, config).with_context(|| format!("factor {factor}: sip"))?;
            let evf = solve_evf(&inst).with_context(|| format!("factor {factor}: evf"))?;
            let rnd = solve_random(&inst, random).with_context(|| format!("factor {factor}: random"))?;
            Ok(CompareRow {
                factor,
                sip_total: sip.cost.total,
                sip_expected_on_demand: sip.cost.expected_on_demand,
                evf_total: evf.cost.total,
                random_mean: rnd.summary.mean,
                random_min: rnd.summary.min,
            })
        })
        .collect()
}

pub fn write_compare_csv(rows: &[CompareRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "on_demand_factor",
        "sip_total",
        "sip_expected_on_demand",
        "evf_total",
        "random_mean",
        "random_min",
    ])?;
    for r in rows {
        w.write_record([
            r.factor.to_string(),
            r.sip_total.to_string(),
            r.sip_expected_on_demand.to_string(),
            r.evf_total.to_string(),
            r.random_mean.to_string(),
            r.random_min.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub device: usize,
    pub semantic_joules: f64,
    pub raw_joules: f64,
    pub ratio: f64,
}

/// Per-device energy of one semantic and one raw transmission, and the
/// instance-wide raw/semantic ratio.
pub fn energy_report(instance: &ProblemInstance) -> Result<(Vec<EnergyRow>, f64)> {
    let mut rows = Vec::with_capacity(instance.num_devices());
    for d in instance.devices() {
        let raw = d
            .avg_payload_raw
            .ok_or_else(|| Usage(format!("device {} has no avg_payload_raw", d.id)))?;
        let semantic_joules = transmission_energy(d.avg_payload_semantic, d)?;
        let raw_joules = transmission_energy(raw, d)?;
        if semantic_joules <= 0.0 {
            bail!(Usage(format!("device {} has zero semantic payload", d.id)));
        }
        rows.push(EnergyRow {
            device: d.id,
            semantic_joules,
            raw_joules,
            ratio: raw_joules / semantic_joules,
        });
    }
    let raw: f64 = rows.iter().map(|r| r.raw_joules).sum();
    let semantic: f64 = rows.iter().map(|r| r.semantic_joules).sum();
    Ok((rows, raw / semantic))
}

pub fn write_energy_csv(rows: &[EnergyRow], overall: f64, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["device", "semantic_energy_j", "raw_energy_j", "ratio"])?;
    for r in rows {
        w.write_record([
            r.device.to_string(),
            r.semantic_joules.to_string(),
            r.raw_joules.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    let raw: f64 = rows.iter().map(|r| r.raw_joules).sum();
    let semantic: f64 = rows.iter().map(|r| r.semantic_joules).sum();
    w.write_record([
        "all".to_string(),
        semantic.to_string(),
        raw.to_string(),
        overall.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_similarity_csv(instance: &ProblemInstance, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vsp", "device", "scenario", "interest_key", "similarity"])?;
    let sim = instance.similarity();
    for v in 0..instance.num_vsps() {
        for e in 0..instance.num_devices() {
            for (s, sc) in instance.scenarios().iter().enumerate() {
                w.write_record([
                    v.to_string(),
                    e.to_string(),
                    s.to_string(),
                    sc.per_vsp[v].interest_key.clone(),
                    sim.get(v, e, s).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
