//! Domain entities: edge devices, VSPs, demand scenarios and the immutable
//! problem instance, plus the energy-based pricing formulas.
//!
//! Units are fixed throughout: sizes in bytes, rates in bytes/second, power
//! in watts, energy in joules, costs in abstract currency units. Payload
//! figures quoted in kilobits convert as 1 Kb = 1000 bits = 125 bytes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance applied to the sum of scenario probabilities.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// Pricing, channel and corpus parameters of one sensing device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDevice {
    pub id: usize,
    /// Uplink data rate, bytes/second.
    pub uplink_rate: f64,
    /// Uplink transmit power, watts.
    pub transmit_power: f64,
    /// Average transmitted semantic-data size, bytes.
    pub avg_payload_semantic: f64,
    /// Average raw image size, bytes. Only used for energy reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_payload_raw: Option<f64>,
    pub membership_cost: f64,
    /// Transmissions covered by one reserved bundle.
    pub bundle_size: u64,
    /// Cost per joule under the reservation plan.
    pub alpha_reservation: f64,
    /// Cost per joule under the on-demand plan.
    pub alpha_on_demand: f64,
}

impl EdgeDevice {
    /// Lists every invariant this device violates, prefixed with its id.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, msg: String| {
            out.push(Violation::Device {
                device: self.id,
                field,
                message: msg,
            })
        };
        if !(self.uplink_rate.is_finite() && self.uplink_rate > 0.0) {
            bad(
                "uplink_rate",
                format!("must be finite and > 0, got {}", self.uplink_rate),
            );
        }
        if !(self.transmit_power.is_finite() && self.transmit_power > 0.0) {
            bad(
                "transmit_power",
                format!("must be finite and > 0, got {}", self.transmit_power),
            );
        }
        if !(self.avg_payload_semantic.is_finite() && self.avg_payload_semantic >= 0.0) {
            bad(
                "avg_payload_semantic",
                format!("must be finite and >= 0, got {}", self.avg_payload_semantic),
            );
        }
        if let Some(raw) = self.avg_payload_raw {
            if !(raw.is_finite() && raw >= 0.0) {
                bad("avg_payload_raw", format!("must be finite and >= 0, got {raw}"));
            }
        }
        if !(self.membership_cost.is_finite() && self.membership_cost >= 0.0) {
            bad(
                "membership_cost",
                format!("must be finite and >= 0, got {}", self.membership_cost),
            );
        }
        if self.bundle_size < 1 {
            bad("bundle_size", "must be >= 1".to_string());
        }
        if !(self.alpha_reservation.is_finite() && self.alpha_reservation > 0.0) {
            bad(
                "alpha_reservation",
                format!("must be finite and > 0, got {}", self.alpha_reservation),
            );
        }
        if !(self.alpha_on_demand.is_finite() && self.alpha_on_demand > 0.0) {
            bad(
                "alpha_on_demand",
                format!("must be finite and > 0, got {}", self.alpha_on_demand),
            );
        } else if self.alpha_on_demand <= self.alpha_reservation {
            out.push(Violation::AlphaOrder {
                device: self.id,
                reservation: self.alpha_reservation,
                on_demand: self.alpha_on_demand,
            });
        }
        out
    }
}

/// A virtual service provider consuming semantic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vsp {
    pub id: usize,
    #[serde(default)]
    pub interest_label: String,
}

/// One VSP's demand triple inside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VspDemand {
    /// Selects which interest (and thus which similarity column) applies.
    pub interest_key: String,
    /// Required semantic-data transmissions.
    pub quantity: u64,
    /// Acceptable fraction of `quantity`, in [0, 1].
    pub threshold: f64,
}

impl VspDemand {
    /// Right-hand side of the demand constraint: quantity × threshold.
    pub fn requirement(&self) -> f64 {
        self.quantity as f64 * self.threshold
    }
}

/// One demand realization with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandScenario {
    pub probability: f64,
    pub per_vsp: Vec<VspDemand>,
}

/// Dense similarity scores indexed `(vsp, device, scenario)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTensor {
    vsps: usize,
    devices: usize,
    scenarios: usize,
    values: Vec<f64>,
}

impl SimilarityTensor {
    pub fn zeros(vsps: usize, devices: usize, scenarios: usize) -> Self {
        Self {
            vsps,
            devices,
            scenarios,
            values: vec![0.0; vsps * devices * scenarios],
        }
    }

    /// Builds a tensor from nested `[vsp][device][scenario]` arrays.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self, ValidationReport> {
        let vsps = nested.len();
        let devices = nested.first().map_or(0, Vec::len);
        let scenarios = nested.first().and_then(|row| row.first()).map_or(0, Vec::len);
        let mut violations = Vec::new();
        let mut values = Vec::with_capacity(vsps * devices * scenarios);
        for (w, row) in nested.iter().enumerate() {
            if row.len() != devices {
                violations.push(Violation::Dimension(format!(
                    "similarity[{w}] has {} devices, expected {devices}",
                    row.len()
                )));
                continue;
            }
            for (e, col) in row.iter().enumerate() {
                if col.len() != scenarios {
                    violations.push(Violation::Dimension(format!(
                        "similarity[{w}][{e}] has {} scenarios, expected {scenarios}",
                        col.len()
                    )));
                    continue;
                }
                values.extend_from_slice(col);
            }
        }
        if violations.is_empty() {
            Ok(Self {
                vsps,
                devices,
                scenarios,
                values,
            })
        } else {
            Err(ValidationReport { violations })
        }
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.vsps)
            .map(|w| {
                (0..self.devices)
                    .map(|e| (0..self.scenarios).map(|s| self.get(w, e, s)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.vsps, self.devices, self.scenarios)
    }

    #[inline]
    pub fn get(&self, vsp: usize, device: usize, scenario: usize) -> f64 {
        self.values[self.offset(vsp, device, scenario)]
    }

    pub fn set(&mut self, vsp: usize, device: usize, scenario: usize, value: f64) {
        let i = self.offset(vsp, device, scenario);
        self.values[i] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, vsp: usize, device: usize, scenario: usize) -> usize {
        assert!(
            vsp < self.vsps && device < self.devices && scenario < self.scenarios,
            "similarity index ({vsp}, {device}, {scenario}) out of bounds {:?}",
            self.dims()
        );
        (vsp * self.devices + device) * self.scenarios + scenario
    }
}

/// One invariant violation found while validating an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty(&'static str),
    ProbabilitySum(f64),
    Probability {
        scenario: usize,
        value: f64,
    },
    Threshold {
        scenario: usize,
        vsp: usize,
        value: f64,
    },
    Similarity {
        vsp: usize,
        device: usize,
        scenario: usize,
        value: f64,
    },
    Dimension(String),
    Ids(String),
    Device {
        device: usize,
        field: &'static str,
        message: String,
    },
    /// On-demand pricing is not strictly above reservation pricing.
    AlphaOrder {
        device: usize,
        reservation: f64,
        on_demand: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty(what) => write!(f, "{what} must be non-empty"),
            Violation::ProbabilitySum(sum) => write!(f, "probabilities sum to {sum}"),
            Violation::Probability { scenario, value } => {
                write!(f, "scenario {scenario}: probability {value} outside [0,1]")
            }
            Violation::Threshold { scenario, vsp, value } => {
                write!(f, "scenario {scenario}, vsp {vsp}: threshold {value} outside [0,1]")
            }
            Violation::Similarity {
                vsp,
                device,
                scenario,
                value,
            } => write!(
                f,
                "similarity out of [0,1]: S[{vsp}][{device}][{scenario}] = {value}"
            ),
            Violation::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Violation::Ids(msg) => write!(f, "ids: {msg}"),
            Violation::Device {
                device,
                field,
                message,
            } => write!(f, "device {device}: {field} {message}"),
            Violation::AlphaOrder {
                device,
                reservation,
                on_demand,
            } => write!(
                f,
                "device {device}: alpha_on_demand must exceed alpha_reservation ({on_demand} <= {reservation})"
            ),
        }
    }
}

/// All invariant violations of an instance. Empty means valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let lines: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("; "))
    }
}

impl std::error::Error for ValidationReport {}

/// Checks every instance invariant and returns the full violation list.
pub fn validate_instance(
    devices: &[EdgeDevice],
    vsps: &[Vsp],
    scenarios: &[DemandScenario],
    similarity: &SimilarityTensor,
) -> ValidationReport {
    let mut v = Vec::new();
    if devices.is_empty() {
        v.push(Violation::Empty("device set"));
    }
    if vsps.is_empty() {
        v.push(Violation::Empty("vsp set"));
    }
    if scenarios.is_empty() {
        v.push(Violation::Empty("scenario set"));
    }
    for (i, d) in devices.iter().enumerate() {
        if d.id != i {
            v.push(Violation::Ids(format!("device at position {i} has id {}", d.id)));
        }
        v.extend(d.violations());
    }
    for (i, w) in vsps.iter().enumerate() {
        if w.id != i {
            v.push(Violation::Ids(format!("vsp at position {i} has id {}", w.id)));
        }
    }

    let mut sum = 0.0;
    for (s, sc) in scenarios.iter().enumerate() {
        if !(sc.probability.is_finite() && (0.0..=1.0).contains(&sc.probability)) {
            v.push(Violation::Probability {
                scenario: s,
                value: sc.probability,
            });
        }
        sum += sc.probability;
        if sc.per_vsp.len() != vsps.len() {
            v.push(Violation::Dimension(format!(
                "scenario {s} lists {} vsp demands, expected {}",
                sc.per_vsp.len(),
                vsps.len()
            )));
        }
        for (w, d) in sc.per_vsp.iter().enumerate() {
            if !(d.threshold.is_finite() && (0.0..=1.0).contains(&d.threshold)) {
                v.push(Violation::Threshold {
                    scenario: s,
                    vsp: w,
                    value: d.threshold,
                });
            }
        }
    }
    let off = (sum - 1.0).abs();
    if !scenarios.is_empty() && (off.is_nan() || off > PROBABILITY_SUM_TOLERANCE) {
        v.push(Violation::ProbabilitySum(sum));
    }

    let expected = (vsps.len(), devices.len(), scenarios.len());
    if similarity.dims() != expected {
        v.push(Violation::Dimension(format!(
            "similarity tensor is {:?}, expected (vsps, devices, scenarios) = {:?}",
            similarity.dims(),
            expected
        )));
    } else {
        for w in 0..expected.0 {
            for e in 0..expected.1 {
                for s in 0..expected.2 {
                    let value = similarity.get(w, e, s);
                    if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                        v.push(Violation::Similarity {
                            vsp: w,
                            device: e,
                            scenario: s,
                            value,
                        });
                    }
                }
            }
        }
    }
    ValidationReport { violations: v }
}

/// Immutable bundle of devices, VSPs, scenarios and similarity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    devices: Vec<EdgeDevice>,
    vsps: Vec<Vsp>,
    scenarios: Vec<DemandScenario>,
    similarity: SimilarityTensor,
}

impl ProblemInstance {
    /// Validates and assembles an instance.
    pub fn new(
        devices: Vec<EdgeDevice>,
        vsps: Vec<Vsp>,
        scenarios: Vec<DemandScenario>,
        similarity: SimilarityTensor,
    ) -> Result<Self, ValidationReport> {
        let report = validate_instance(&devices, &vsps, &scenarios, &similarity);
        if !report.is_valid() {
            return Err(report);
        }
        Ok(Self {
            devices,
            vsps,
            scenarios,
            similarity,
        })
    }

    pub fn devices(&self) -> &[EdgeDevice] {
        &self.devices
    }

    pub fn vsps(&self) -> &[Vsp] {
        &self.vsps
    }

    pub fn scenarios(&self) -> &[DemandScenario] {
        &self.scenarios
    }

    pub fn similarity(&self) -> &SimilarityTensor {
        &self.similarity
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_vsps(&self) -> usize {
        self.vsps.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    /// Requirement F̄·F̃ of VSP `vsp` in scenario `scenario`.
    pub fn requirement(&self, vsp: usize, scenario: usize) -> f64 {
        self.scenarios[scenario].per_vsp[vsp].requirement()
    }

    /// Returns a copy with scenario probabilities replaced.
    pub fn with_probabilities(&self, probabilities: &[f64]) -> Result<Self, ValidationReport> {
        if probabilities.len() != self.scenarios.len() {
            return Err(ValidationReport {
                violations: vec![Violation::Dimension(format!(
                    "{} probabilities given for {} scenarios",
                    probabilities.len(),
                    self.scenarios.len()
                ))],
            });
        }
        let mut scenarios = self.scenarios.clone();
        for (sc, &p) in scenarios.iter_mut().zip(probabilities) {
            sc.probability = p;
        }
        Self::new(
            self.devices.clone(),
            self.vsps.clone(),
            scenarios,
            self.similarity.clone(),
        )
    }

    /// Returns a copy with every device's on-demand coefficient multiplied
    /// by `factor`.
    ///
    /// The scaled coefficient may fall to or below the reservation
    /// coefficient; this is the one construction path that does not enforce
    /// that ordering, so cost sweeps can probe cheap on-demand pricing. All
    /// other invariants are still checked.
    pub fn with_on_demand_factor(&self, factor: f64) -> Result<Self, ValidationReport> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(ValidationReport {
                violations: vec![Violation::Device {
                    device: 0,
                    field: "alpha_on_demand",
                    message: format!("scale factor must be finite and > 0, got {factor}"),
                }],
            });
        }
        let devices: Vec<EdgeDevice> = self
            .devices
            .iter()
            .map(|d| EdgeDevice {
                alpha_on_demand: d.alpha_on_demand * factor,
                ..d.clone()
            })
            .collect();
        let report = validate_instance(&devices, &self.vsps, &self.scenarios, &self.similarity);
        let remaining: Vec<Violation> = report
            .violations
            .into_iter()
            .filter(|v| !matches!(v, Violation::AlphaOrder { .. }))
            .collect();
        if !remaining.is_empty() {
            return Err(ValidationReport {
                violations: remaining,
            });
        }
        Ok(Self {
            devices,
            vsps: self.vsps.clone(),
            scenarios: self.scenarios.clone(),
            similarity: self.similarity.clone(),
        })
    }
}

/// Cost totals of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub membership_total: f64,
    pub reservation_total: f64,
    pub expected_on_demand: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Assembles a breakdown; `total` is always computed here.
    pub fn new(membership_total: f64, reservation_total: f64, expected_on_demand: f64) -> Self {
        Self {
            membership_total,
            reservation_total,
            expected_on_demand,
            total: membership_total + reservation_total + expected_on_demand,
        }
    }

    /// First-stage cost: membership plus reservation.
    pub fn first_stage(&self) -> f64 {
        self.membership_total + self.reservation_total
    }
}

fn check_payload(payload_bytes: f64) -> Result<(), ModelError> {
    if !payload_bytes.is_finite() || payload_bytes < 0.0 {
        return Err(ModelError::InvalidArgument(format!(
            "payload must be finite and non-negative, got {payload_bytes}"
        )));
    }
    Ok(())
}

fn check_rate(device: &EdgeDevice) -> Result<(), ModelError> {
    if !(device.uplink_rate.is_finite() && device.uplink_rate > 0.0) {
        return Err(ModelError::InvalidArgument(format!(
            "device {}: uplink rate must be finite and > 0, got {}",
            device.id, device.uplink_rate
        )));
    }
    Ok(())
}

/// Uplink time for `payload_bytes`: payload / rate.
pub fn transmission_time(payload_bytes: f64, device: &EdgeDevice) -> Result<f64, ModelError> {
    check_payload(payload_bytes)?;
    check_rate(device)?;
    Ok(payload_bytes / device.uplink_rate)
}

/// Uplink energy for `payload_bytes`: power × time.
pub fn transmission_energy(payload_bytes: f64, device: &EdgeDevice) -> Result<f64, ModelError> {
    Ok(device.transmit_power * transmission_time(payload_bytes, device)?)
}

/// Price of one reserved bundle of `bundle_size` transmissions.
pub fn reservation_bundle_cost(device: &EdgeDevice) -> f64 {
    device.bundle_size as f64 * device.transmit_power * device.avg_payload_semantic / device.uplink_rate
        * device.alpha_reservation
}

/// Price of a single on-demand transmission.
pub fn on_demand_unit_cost(device: &EdgeDevice) -> f64 {
    device.transmit_power * device.avg_payload_semantic / device.uplink_rate * device.alpha_on_demand
}
