//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semalloc_cli::experiments::{self, PlanType};
use semalloc_cli::grid::Grid;
use semalloc_core::baselines::{solve_evf, solve_random, RandomSchemeConfig};
use semalloc_core::ingest::load_problem;
use semalloc_core::recourse::cost_of;
use semalloc_core::synth::{random_instance, SynthShape};
use semalloc_core::{
    optimal_recourse, solve_dip, solve_sip, transmission_energy, DipInstance, EdgeDevice, ProblemInstance,
    ReservationPlan, SolverConfig,
};

const EXACT: f64 = 1e-9;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn load(name: &str) -> ProblemInstance {
    load_problem(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sip(inst: &ProblemInstance) -> semalloc_core::Solution {
    solve_sip(inst, &SolverConfig::default()).expect("sip solve")
}

// Independent arithmetic used by the brute-force oracles.

fn unit_on_demand(d: &EdgeDevice) -> f64 {
    d.transmit_power * d.avg_payload_semantic / d.uplink_rate * d.alpha_on_demand
}

fn unit_bundle(d: &EdgeDevice) -> f64 {
    d.bundle_size as f64 * d.transmit_power * d.avg_payload_semantic / d.uplink_rate * d.alpha_reservation
}

fn gap(inst: &ProblemInstance, bundles: &[u64], w: usize, s: usize) -> f64 {
    let covered: f64 = inst
        .devices()
        .iter()
        .enumerate()
        .map(|(e, d)| bundles[e] as f64 * d.bundle_size as f64 * inst.similarity().get(w, e, s))
        .sum();
    inst.requirement(w, s) - covered
}

fn units_needed(gap: f64) -> u64 {
    if gap <= EXACT {
        0
    } else {
        (gap - EXACT).ceil() as u64
    }
}

fn each_vector(len: usize, max: u64, mut f: impl FnMut(&[u64])) {
    let mut v = vec![0u64; len];
    loop {
        f(&v);
        let mut i = 0;
        while i < len && v[i] == max {
            v[i] = 0;
            i += 1;
        }
        if i == len {
            return;
        }
        v[i] += 1;
    }
}

/// Cheapest feasible on-demand vector for one (vsp, scenario), by
/// enumerating every integer vector with entries up to `cap`.
fn brute_recourse(inst: &ProblemInstance, bundles: &[u64], w: usize, s: usize, cap: u64) -> f64 {
    let g = gap(inst, bundles, w, s);
    let mut best = f64::INFINITY;
    each_vector(inst.num_devices(), cap, |m| {
        if m.iter().sum::<u64>() as f64 >= g - EXACT {
            let c: f64 = m
                .iter()
                .zip(inst.devices())
                .map(|(&k, d)| k as f64 * unit_on_demand(d))
                .sum();
            best = best.min(c);
        }
    });
    best
}

fn worked_example() -> Outcome {
    let inst = load("worked_example.json");
    let dip = DipInstance::from_scenario(&inst, 0);
    let start = Instant::now();
    let sol = solve_dip(&dip).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(sol.plan.bundles == vec![vec![2]], || {
        format!("bundles {:?}", sol.plan.bundles)
    })?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("2 bundles in {elapsed:?}"))
}

fn recourse_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut max_shortfall = 0;
    for case in 0..200 {
        let inst = random_instance(&mut rng, SynthShape::SMALL);
        let bundles: Vec<Vec<u64>> = (0..inst.num_vsps())
            .map(|_| (0..inst.num_devices()).map(|_| rng.gen_range(0..=1)).collect())
            .collect();
        let plan = ReservationPlan::from_bundles(bundles);
        let closed = cost_of(&plan, &optimal_recourse(&plan, &inst), &inst).expected_on_demand;
        let mut brute = 0.0;
        for s in 0..inst.num_scenarios() {
            let p = inst.scenarios()[s].probability;
            for w in 0..inst.num_vsps() {
                let need = units_needed(gap(&inst, &plan.bundles[w], w, s));
                ensure(need <= 12, || format!("case {case}: shortfall {need} > 12"))?;
                max_shortfall = max_shortfall.max(need);
                brute += p * brute_recourse(&inst, &plan.bundles[w], w, s, 12);
            }
        }
        let diff = (closed - brute).abs();
        worst = worst.max(diff);
        ensure(diff <= EXACT, || {
            format!("case {case}: closed form {closed} vs brute force {brute}")
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "200 instances, max shortfall {max_shortfall}, max |diff| {worst:e}, {elapsed:?}"
    ))
}

/// Smallest bundle count at (w, e) that alone covers every scenario.
fn entry_bound(inst: &ProblemInstance, w: usize, e: usize) -> u64 {
    let d = &inst.devices()[e];
    (0..inst.num_scenarios())
        .map(|s| {
            let per_bundle = d.bundle_size as f64 * inst.similarity().get(w, e, s);
            (inst.requirement(w, s) / per_bundle).ceil() as u64
        })
        .max()
        .unwrap_or(0)
}

fn exhaustive_total(inst: &ProblemInstance, cap: u64) -> f64 {
    let (w_n, e_n) = (inst.num_vsps(), inst.num_devices());
    let cheapest = inst
        .devices()
        .iter()
        .map(unit_on_demand)
        .fold(f64::INFINITY, f64::min);
    let mut best = f64::INFINITY;
    each_vector(w_n * e_n, cap, |flat| {
        let mut total = 0.0;
        for w in 0..w_n {
            let row = &flat[w * e_n..(w + 1) * e_n];
            for (e, &b) in row.iter().enumerate() {
                if b > 0 {
                    let d = &inst.devices()[e];
                    total += d.membership_cost + b as f64 * unit_bundle(d);
                }
            }
            for s in 0..inst.num_scenarios() {
                let p = inst.scenarios()[s].probability;
                total += p * units_needed(gap(inst, row, w, s)) as f64 * cheapest;
            }
        }
        best = best.min(total);
    });
    best
}

fn sip_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let shape = SynthShape {
        max_quantity: 10,
        ..SynthShape::SMALL
    };
    let (mut accepted, mut worst) = (0, 0.0f64);
    while accepted < 100 {
        let inst = random_instance(&mut rng, shape);
        let ok = (0..inst.num_vsps()).all(|w| (0..inst.num_devices()).all(|e| entry_bound(&inst, w, e) <= 6));
        if !ok {
            continue;
        }
        accepted += 1;
        let brute = exhaustive_total(&inst, 6);
        let got = sip(&inst).cost.total;
        let diff = (got - brute).abs();
        worst = worst.max(diff);
        ensure(diff <= EXACT, || {
            format!("instance {accepted}: solver {got} vs enumeration {brute}")
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("100 instances, max |diff| {worst:e}, {elapsed:?}"))
}

const FACTORS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];

/// Checks dominance on every factor and returns the first factor at which
/// the stochastic plan needs no on-demand purchases.
fn dominance_on(inst: &ProblemInstance, label: &str) -> Result<Option<f64>, String> {
    let random = RandomSchemeConfig {
        seed: 42,
        samples: 100,
    };
    let mut totals = Vec::new();
    for f in FACTORS {
        let scaled = inst.with_on_demand_factor(f).map_err(|e| e.to_string())?;
        let s = sip(&scaled);
        let evf = solve_evf(&scaled).map_err(|e| e.to_string())?.cost.total;
        let mean = solve_random(&scaled, &random)
            .map_err(|e| e.to_string())?
            .summary
            .mean;
        let t = s.cost.total;
        ensure(t <= evf + EXACT, || format!("{label} f={f}: sip {t} > evf {evf}"))?;
        ensure(t <= mean + EXACT, || {
            format!("{label} f={f}: sip {t} > random mean {mean}")
        })?;
        totals.push((f, t, s.cost.expected_on_demand == 0.0));
    }
    let Some(first) = totals.iter().position(|&(_, _, zero)| zero) else {
        return Ok(None);
    };
    let base = totals[first].1;
    for &(f, t, _) in &totals[first..] {
        ensure((t - base).abs() <= EXACT, || {
            format!(
                "{label}: total {t} at f={f} differs from {base} at f={}",
                totals[first].0
            )
        })?;
    }
    Ok(Some(totals[first].0))
}

fn dominance() -> Outcome {
    let singapore = dominance_on(&load("singapore_demo.json"), "singapore")?;
    let constant_from = singapore.ok_or("singapore: stochastic plan uses on-demand at every factor")?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = SynthShape {
        max_vsps: 3,
        max_devices: 3,
        max_scenarios: 3,
        max_quantity: 40,
        max_bundle_size: 8,
    };
    let mut constant_cases = 0;
    for i in 0..50 {
        let inst = random_instance(&mut rng, shape);
        if dominance_on(&inst, &format!("random {i}"))?.is_some() {
            constant_cases += 1;
        }
    }
    Ok(format!(
        "singapore + 50 random; singapore constant from f={constant_from}; {constant_cases}/50 random reach zero on-demand"
    ))
}

fn cost_structure() -> Outcome {
    let inst = load("cost_structure.json");
    let (points, argmin) = experiments::sweep_bundles(&inst, 0, 0, None).map_err(|e| e.to_string())?;
    ensure(points.windows(2).all(|p| p[0].stage1 <= p[1].stage1), || {
        "stage 1 decreases".into()
    })?;
    ensure(points.windows(2).all(|p| p[0].stage2 >= p[1].stage2), || {
        "stage 2 increases".into()
    })?;
    ensure(argmin > 0 && argmin + 1 < points.len(), || {
        format!("argmin {argmin} not interior")
    })?;
    let crossing = points
        .iter()
        .position(|p| p.stage1 >= p.stage2)
        .ok_or("stage costs never cross")?;
    ensure(crossing != argmin, || {
        format!("argmin equals crossing index {crossing}")
    })?;
    let bundles = sip(&inst).plan.bundles[0][0];
    ensure(bundles == points[argmin].bundles, || {
        format!("solver picks {bundles}, sweep argmin {}", points[argmin].bundles)
    })?;
    Ok(format!(
        "argmin {bundles} bundles, crossing at {crossing}, solver agrees"
    ))
}

fn probability_switching() -> Outcome {
    let inst = load("probability_sweep.json");
    let grid: Grid = "0:1:0.1"
        .parse()
        .map_err(|e: semalloc_cli::grid::GridError| e.to_string())?;
    let rows = experiments::sweep_probability(&inst, grid.points(), &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    let last = rows.last().unwrap();
    ensure(last.p == 1.0 && last.total == 0.0, || {
        format!("total at p=1 is {}", last.total)
    })?;
    let first = &rows[0];
    ensure(first.p == 0.0 && first.expected_on_demand == 0.0, || {
        "on-demand used at p=0".into()
    })?;
    let mut switches = Vec::new();
    for w in 0..inst.num_vsps() {
        ensure(first.plan_types[w] == PlanType::Reserved, || {
            format!("vsp {w} not reserved at p=0")
        })?;
        let reserved: Vec<bool> = rows
            .iter()
            .map(|r| r.plan_types[w] == PlanType::Reserved)
            .collect();
        let switch = reserved
            .iter()
            .position(|r| !r)
            .ok_or(format!("vsp {w} never switches"))?;
        ensure(reserved[switch..].iter().all(|r| !r), || {
            format!("vsp {w} switches back")
        })?;
        switches.push(rows[switch].p);
    }
    ensure(switches[0] <= switches[1], || {
        format!("switch order {switches:?}")
    })?;
    Ok(format!("total(1) = 0, switches at p = {switches:?}"))
}

fn energy_ratio() -> Outcome {
    let inst = load("singapore_demo.json");
    let expected = 650_000.0 / 5_125.0;
    for d in inst.devices() {
        let raw = transmission_energy(d.avg_payload_raw.ok_or("missing raw payload")?, d)
            .map_err(|e| e.to_string())?;
        let sem = transmission_energy(d.avg_payload_semantic, d).map_err(|e| e.to_string())?;
        let ratio = raw / sem;
        ensure(((ratio - expected) / expected).abs() <= 1e-12, || {
            format!("device {}: ratio {ratio}", d.id)
        })?;
        ensure((ratio * 100.0).round() / 100.0 == 126.83, || {
            format!("device {}: ratio {ratio}", d.id)
        })?;
    }
    let measured = 111.0 / 0.896;
    let rel = (measured - expected).abs() / expected;
    ensure(rel < 0.05, || format!("measured ratio off by {rel}"))?;
    Ok(format!(
        "ratio {expected:.2} on every device; measured {measured:.2} within {:.1}%",
        rel * 100.0
    ))
}

fn interest_selection() -> Outcome {
    let inst = load("interest_sweep.json");
    let mut report = Vec::new();
    for (p, device, on_demand) in [(1.0, 2, false), (0.0, 0, true)] {
        let at = inst
            .with_probabilities(&[p, 1.0 - p])
            .map_err(|e| e.to_string())?;
        let sol = sip(&at);
        let row = &sol.plan.bundles[0];
        let used: Vec<usize> = (0..row.len()).filter(|&e| row[e] > 0).collect();
        ensure(used == vec![device], || format!("P(λ₁)={p}: bundles {row:?}"))?;
        let od = sol.cost.expected_on_demand;
        ensure((od > 0.0) == on_demand, || {
            format!("P(λ₁)={p}: expected on-demand {od}")
        })?;
        report.push(format!("P(λ₁)={p}: {row:?}"));
    }
    Ok(report.join(", "))
}

fn run_cli(bin: &Path, threads: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(bin)
        .args(args)
        .env("SEMALLOC_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_semalloc"));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sg = fixture("singapore_demo.json");
    let corpus = fixture("singapore_corpus.json");
    let sweep = fixture("probability_sweep.json");
    let cost = fixture("cost_structure.json");
    let (sg, corpus, sweep, cost) = (
        sg.to_str().unwrap(),
        corpus.to_str().unwrap(),
        sweep.to_str().unwrap(),
        cost.to_str().unwrap(),
    );
    let commands: Vec<Vec<&str>> = vec![
        vec!["solve", "--problem", sg, "--scheme", "sip"],
        vec!["solve", "--problem", sg, "--scheme", "evf"],
        vec![
            "solve",
            "--problem",
            sg,
            "--scheme",
            "random",
            "--seed",
            "42",
            "--samples",
            "100",
        ],
        vec!["solve", "--problem", sg, "--scheme", "dip", "--scenario", "1"],
        vec!["sweep-probability", "--problem", sweep],
        vec!["sweep-bundles", "--problem", cost],
        vec!["compare", "--problem", sg],
        vec!["energy-report", "--problem", sg],
        vec!["similarity", "--problem", corpus],
    ];
    for (i, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "4", "4"].iter().enumerate() {
            let file = dir.path().join(format!("out-{i}-{run}"));
            let mut args = cmd.clone();
            args.extend(["--out", file.to_str().unwrap()]);
            let stdout = run_cli(bin, threads, &args)?;
            let bytes = std::fs::read(&file).map_err(|e| e.to_string())?;
            ensure(!bytes.is_empty(), || format!("{cmd:?}: empty output"))?;
            outputs.push((bytes, stdout));
        }
        ensure(outputs.windows(2).all(|o| o[0] == o[1]), || {
            format!("{cmd:?}: output differs across runs / thread counts")
        })?;
    }
    Ok(format!(
        "{} commands byte-identical under SEMALLOC_THREADS=1,4",
        commands.len()
    ))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("worked example", worked_example),
        ("recourse oracle", recourse_oracle),
        ("stochastic solver oracle", sip_oracle),
        ("dominance over baselines", dominance),
        ("bundle sweep cost structure", cost_structure),
        ("probability sweep switching", probability_switching),
        ("energy ratio", energy_ratio),
        ("interest sweep device selection", interest_selection),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
