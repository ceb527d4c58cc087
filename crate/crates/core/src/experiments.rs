//! Scenario generation, per-run metrics and the sweep/compare drivers.
//!
//! Every random quantity derives from an explicit seed, and sweep cells are
//! merged back in `(axis value, repetition)` order, so output is identical
//! whether cells run serially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::RuleRegistry;
use crate::error::{Error, Result};
use crate::game::{run_from_default_start, GameParams, RunResult};
use crate::model::{Device, DeviceKind, NetworkScenario, DEFAULT_NOISE_POWER, DEFAULT_P_MAX};

pub const DEFAULT_SINR_SLACK: f64 = 0.05;
pub const DEFAULT_REPETITIONS: usize = 20;
/// Distances are floored at this many meters before computing path gain.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GainModel {
    /// `h = (d / 1 m)^(−exponent)` from a uniform placement in the cell disk.
    DistancePower,
    /// Fixed gains; placement is still drawn for device positions.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n_devices: usize,
    /// How many of the devices are cellular users; the rest are D2D pairs.
    pub n_cellular: usize,
    pub cell_radius_m: f64,
    pub path_loss_exponent: f64,
    pub gain_model: GainModel,
    pub noise_power: f64,
    pub p_max: f64,
    pub processing_gain: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_devices: 20,
            n_cellular: 2,
            cell_radius_m: 500.0,
            path_loss_exponent: 3.5,
            gain_model: GainModel::DistancePower,
            noise_power: DEFAULT_NOISE_POWER,
            p_max: DEFAULT_P_MAX,
            processing_gain: 128.0,
            seed: 1,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidExperiment(msg));
        if self.n_devices == 0 {
            return fail("n_devices must be at least 1".into());
        }
        if self.n_cellular > self.n_devices {
            return fail(format!(
                "n_cellular ({}) exceeds n_devices ({})",
                self.n_cellular, self.n_devices
            ));
        }
        if !(self.cell_radius_m.is_finite() && self.cell_radius_m > 0.0) {
            return fail(format!(
                "cell_radius_m must be positive, got {}",
                self.cell_radius_m
            ));
        }
        if !(2.0..=6.0).contains(&self.path_loss_exponent) {
            return fail(format!(
                "path_loss_exponent must be in [2, 6], got {}",
                self.path_loss_exponent
            ));
        }
        if let GainModel::Explicit(gains) = &self.gain_model {
            if gains.len() != self.n_devices {
                return fail(format!(
                    "explicit gains list has {} entries for {} devices",
                    gains.len(),
                    self.n_devices
                ));
            }
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return fail(format!(
                "noise_power must be positive, got {}",
                self.noise_power
            ));
        }
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return fail(format!("p_max must be positive, got {}", self.p_max));
        }
        if !(self.processing_gain.is_finite() && self.processing_gain > 0.0) {
            return fail(format!(
                "processing_gain must be positive, got {}",
                self.processing_gain
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Places devices uniformly in the cell disk and derives their gains.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<NetworkScenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut devices = Vec::with_capacity(spec.n_devices);
    let mut distances = Vec::with_capacity(spec.n_devices);
    for id in 0..spec.n_devices {
        let radius = spec.cell_radius_m * rng.random::<f64>().sqrt();
        let angle = std::f64::consts::TAU * rng.random::<f64>();
        devices.push(Device {
            id,
            kind: if id < spec.n_cellular {
                DeviceKind::Cellular
            } else {
                DeviceKind::D2dPair
            },
            position: (radius * angle.cos(), radius * angle.sin()),
        });
        distances.push(radius.max(MIN_DISTANCE_M));
    }
    let gains = match &spec.gain_model {
        GainModel::DistancePower => distances
            .iter()
            .map(|d| d.powf(-spec.path_loss_exponent))
            .collect(),
        GainModel::Explicit(g) => g.clone(),
    };
    NetworkScenario::new(devices, gains, spec.noise_power, spec.p_max)?
        .with_processing_gain(spec.processing_gain)
}

/// Number of devices whose final SINR reaches `(1 − slack)·Γ'`.
pub fn admitted_count(result: &RunResult, params: &GameParams, sinr_slack: f64) -> usize {
    let threshold = (1.0 - sinr_slack) * params.effective_target();
    result
        .final_sinrs
        .iter()
        .filter(|&&g| g >= threshold)
        .count()
}

/// Admitted devices after each iteration of the trace.
pub fn admission_curve(result: &RunResult, params: &GameParams, sinr_slack: f64) -> Vec<usize> {
    let threshold = (1.0 - sinr_slack) * params.effective_target();
    result
        .trace
        .iter()
        .map(|rec| rec.sinrs.iter().filter(|&&g| g >= threshold).count())
        .collect()
}

/// `Σ log2(1+γ_i) / Σ p_i`, bits per joule per hertz. Not a quantity from the
/// underlying model; a proxy for comparing runs.
pub fn energy_efficiency(result: &RunResult) -> f64 {
    let rate: f64 = result.final_sinrs.iter().map(|g| (1.0 + g).log2()).sum();
    let power: f64 = result.final_powers.iter().sum();
    rate / power
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Price,
    DeviceCount,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Price => "price",
            SweepAxis::DeviceCount => "device_count",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alpha" => Some(SweepAxis::Alpha),
            "price" => Some(SweepAxis::Price),
            "device_count" => Some(SweepAxis::DeviceCount),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub rule: String,
    /// Repetition `r` uses scenario seed `base_seed + r`.
    pub repetitions: usize,
    pub params: GameParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidExperiment(msg));
        if self.values.is_empty() {
            return fail("sweep values must not be empty".into());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return fail("sweep values must be strictly increasing".into());
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.axis == SweepAxis::DeviceCount
            && self.values.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0))
        {
            return fail("device_count values must be positive integers".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub axis_value: f64,
    pub repetition: usize,
    pub seed: u64,
    pub mean_power_w: f64,
    pub mean_sinr: f64,
    pub iterations: usize,
    pub converged: bool,
    pub admitted: usize,
    pub energy_efficiency: f64,
}

impl MetricsRow {
    pub fn from_run(
        axis_value: f64,
        repetition: usize,
        seed: u64,
        run: &RunResult,
        params: &GameParams,
    ) -> Self {
        Self {
            axis_value,
            repetition,
            seed,
            mean_power_w: run.mean_power(),
            mean_sinr: run.mean_sinr(),
            iterations: run.iterations_used,
            converged: run.converged,
            admitted: admitted_count(run, params, DEFAULT_SINR_SLACK),
            energy_efficiency: energy_efficiency(run),
        }
    }
}

/// Runs every `(axis value, repetition)` cell of the sweep.
pub fn run_sweep(
    spec: &SweepSpec,
    scenario_spec: &ScenarioSpec,
    registry: &RuleRegistry,
) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    spec.params.validate()?;
    scenario_spec.validate()?;
    let rule = registry.get(&spec.rule)?;

    let cells: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.repetitions).map(move |r| (v, r)))
        .collect();

    cells
        .par_iter()
        .map(|&(value, rep)| {
            let seed = scenario_spec.seed.wrapping_add(rep as u64);
            let mut sspec = scenario_spec.with_seed(seed);
            let mut params = spec.params.clone();
            match spec.axis {
                SweepAxis::Alpha => params.alpha = value,
                SweepAxis::Price => params.price = value,
                SweepAxis::DeviceCount => {
                    sspec.n_devices = value as usize;
                    sspec.n_cellular = sspec.n_cellular.min(sspec.n_devices);
                    if let GainModel::Explicit(_) = sspec.gain_model {
                        return Err(Error::InvalidExperiment(
                            "device_count sweeps need the distance_power gain model".into(),
                        ));
                    }
                }
            }
            params.validate()?;
            let scenario = generate_scenario(&sspec)?;
            let run = run_from_default_start(&scenario, &params, rule.as_ref())?;
            Ok(MetricsRow::from_run(value, rep, seed, &run, &params))
        })
        .collect()
}

/// One row of a rule comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub rule: String,
    /// Per-device mean power, averaged over repetitions.
    pub mean_power_w: f64,
    /// Iterations to converge, averaged over repetitions.
    pub iterations: f64,
    pub mean_sinr: f64,
    pub converged_runs: usize,
    pub repetitions: usize,
}

/// Runs every named rule on the same seeded scenarios.
pub fn compare_rules(
    rules: &[String],
    scenario_spec: &ScenarioSpec,
    params: &GameParams,
    repetitions: usize,
    registry: &RuleRegistry,
) -> Result<Vec<CompareRow>> {
    if rules.is_empty() {
        return Err(Error::InvalidExperiment(
            "at least one rule is required".into(),
        ));
    }
    if repetitions == 0 {
        return Err(Error::InvalidExperiment(
            "repetitions must be at least 1".into(),
        ));
    }
    params.validate()?;
    scenario_spec.validate()?;
    let resolved = rules
        .iter()
        .map(|r| registry.get(r))
        .collect::<Result<Vec<_>>>()?;
    let scenarios = (0..repetitions)
        .map(|r| {
            generate_scenario(&scenario_spec.with_seed(scenario_spec.seed.wrapping_add(r as u64)))
        })
        .collect::<Result<Vec<_>>>()?;

    resolved
        .par_iter()
        .zip(rules)
        .map(|(rule, name)| {
            let runs = scenarios
                .iter()
                .map(|s| run_from_default_start(s, params, rule.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            let reps = runs.len() as f64;
            Ok(CompareRow {
                rule: name.clone(),
                mean_power_w: runs.iter().map(RunResult::mean_power).sum::<f64>() / reps,
                iterations: runs.iter().map(|r| r.iterations_used as f64).sum::<f64>() / reps,
                mean_sinr: runs.iter().map(RunResult::mean_sinr).sum::<f64>() / reps,
                converged_runs: runs.iter().filter(|r| r.converged).count(),
                repetitions,
            })
        })
        .collect()
}
