//! The power-control game.
//!
//! Each device is a player choosing its transmit power. Without pricing a
//! player minimizes the squared distance between its SINR and the shifted
//! target `Γ' = Γ/(αΓ+1)`:
//!
//! ```text
//! U_i = (Γ' − γ_i)²
//! ```
//!
//! Setting the derivative to zero with the interference held fixed gives the
//! fixed-point iteration `p_i ← Γ'·p_i/γ_i`. With a per-watt price `c` the
//! player minimizes `J_i = U_i + c·p_i`, whose best response is
//!
//! ```text
//! p_i ← Γ'·r_i − (c/2)·r_i²,   r_i = p_i/γ_i
//! ```
//!
//! All devices update synchronously from the same iterate.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{NetworkScenario, PowerVector, SinrVector, MIN_POWER};

pub const DEFAULT_TARGET: f64 = 5.0;
pub const DEFAULT_PRICE: f64 = 5100.0;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 500;
/// Initial transmit power of every device (8 mW).
pub const DEFAULT_INITIAL_POWER: f64 = 8e-3;
/// Utility improvement below which a deviation is not counted.
pub const NASH_TOLERANCE: f64 = 1e-9;

/// Sign of the quadratic pricing term in the priced update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PricingSign {
    /// `Γ'·r − (c/2)·r²`: the best response to `U + c·p`. Pricing lowers power.
    #[default]
    Reducing,
    /// `Γ'·r + (c/2)·r²`, kept for comparison runs.
    Literal,
}

impl PricingSign {
    pub fn as_str(self) -> &'static str {
        match self {
            PricingSign::Reducing => "reducing",
            PricingSign::Literal => "literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reducing" => Some(PricingSign::Reducing),
            "literal" => Some(PricingSign::Literal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameParams {
    /// SINR target Γ.
    pub target: f64,
    /// Cost coefficient α, in `[0, 1)`.
    pub alpha: f64,
    /// Pricing factor c, per watt.
    pub price: f64,
    pub pricing_sign: PricingSign,
    /// Stop when the largest relative power change drops below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Starting power for every device, in watts.
    pub initial_power: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            target: DEFAULT_TARGET,
            alpha: 0.0,
            price: DEFAULT_PRICE,
            pricing_sign: PricingSign::Reducing,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            initial_power: DEFAULT_INITIAL_POWER,
        }
    }
}

impl GameParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.target.is_finite() && self.target > 0.0) {
            return fail(format!("target must be positive, got {}", self.target));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return fail(format!(
                "alpha must satisfy 0 <= alpha < 1, got {}",
                self.alpha
            ));
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            return fail(format!("price must be >= 0, got {}", self.price));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1".into());
        }
        if !(self.initial_power.is_finite() && self.initial_power > 0.0) {
            return fail(format!(
                "initial_power must be positive, got {}",
                self.initial_power
            ));
        }
        Ok(())
    }

    /// Shifted SINR target `Γ/(αΓ+1)`, the zero of the base utility.
    pub fn effective_target(&self) -> f64 {
        self.target / (self.alpha * self.target + 1.0)
    }
}

/// Which cost a player minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    Base,
    Priced,
}

pub fn utility_base(params: &GameParams, gamma: f64) -> f64 {
    let gap = params.effective_target() - gamma;
    gap * gap
}

/// Priced cost `(Γ' − γ)² + c·p`. Equals [`utility_base`] when `c = 0`.
pub fn utility_priced(params: &GameParams, gamma: f64, power: f64) -> f64 {
    utility_base(params, gamma) + params.price * power
}

pub fn utility(kind: UtilityKind, params: &GameParams, gamma: f64, power: f64) -> f64 {
    match kind {
        UtilityKind::Base => utility_base(params, gamma),
        UtilityKind::Priced => utility_priced(params, gamma, power),
    }
}

/// A map from the current powers to the next ones.
///
/// `propose` returns the raw, unclamped update; the iteration engine clamps it
/// to `[MIN_POWER, p_max]`.
pub trait UpdateRule: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn propose(
        &self,
        scenario: &NetworkScenario,
        params: &GameParams,
        p: &PowerVector,
    ) -> Result<Vec<f64>>;

    /// Per-device cost recorded in traces.
    fn utility_kind(&self) -> UtilityKind {
        UtilityKind::Base
    }

    fn apply(
        &self,
        scenario: &NetworkScenario,
        params: &GameParams,
        p: &PowerVector,
    ) -> Result<PowerVector> {
        let raw = self.propose(scenario, params, p)?;
        Ok(clamp_powers(&raw, scenario.p_max()).powers)
    }
}

/// Result of clamping a raw update.
#[derive(Debug, Clone, PartialEq)]
pub struct Clamped {
    pub powers: PowerVector,
    /// Devices whose raw update fell to or below `MIN_POWER`.
    pub priced_out: Vec<usize>,
    /// Devices whose raw update exceeded `p_max`.
    pub capped: Vec<usize>,
}

pub fn clamp_powers(raw: &[f64], p_max: f64) -> Clamped {
    let mut priced_out = Vec::new();
    let mut capped = Vec::new();
    let powers = raw
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v <= MIN_POWER {
                priced_out.push(i);
                MIN_POWER
            } else if v > p_max {
                capped.push(i);
                p_max
            } else {
                v
            }
        })
        .collect();
    Clamped {
        powers: PowerVector::new(powers),
        priced_out,
        capped,
    }
}

fn unpriced_raw(
    scenario: &NetworkScenario,
    params: &GameParams,
    p: &PowerVector,
) -> Result<Vec<f64>> {
    scenario.check_powers(p)?;
    let shifted = params.effective_target();
    let p = p.as_slice();
    Ok((0..p.len())
        .map(|i| (shifted / scenario.sinr_unchecked(p, i)) * p[i])
        .collect())
}

fn priced_raw(
    scenario: &NetworkScenario,
    params: &GameParams,
    p: &PowerVector,
) -> Result<Vec<f64>> {
    let base = unpriced_raw(scenario, params, p)?;
    let half_price = params.price / 2.0;
    let p = p.as_slice();
    Ok(base
        .into_iter()
        .enumerate()
        .map(|(i, unpriced)| {
            let ratio = p[i] / scenario.sinr_unchecked(p, i);
            let pricing = half_price * ratio * ratio;
            match params.pricing_sign {
                PricingSign::Reducing => unpriced - pricing,
                PricingSign::Literal => unpriced + pricing,
            }
        })
        .collect())
}

/// One step of `p_i ← Γ'·p_i/γ_i`, clamped.
pub fn update_unpriced(
    scenario: &NetworkScenario,
    params: &GameParams,
    p: &PowerVector,
) -> Result<PowerVector> {
    Ok(clamp_powers(&unpriced_raw(scenario, params, p)?, scenario.p_max()).powers)
}

/// One step of the priced update, clamped. Identical to [`update_unpriced`] at `c = 0`.
pub fn update_priced(
    scenario: &NetworkScenario,
    params: &GameParams,
    p: &PowerVector,
) -> Result<PowerVector> {
    Ok(clamp_powers(&priced_raw(scenario, params, p)?, scenario.p_max()).powers)
}

/// The proposed rule without pricing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unpriced;

impl UpdateRule for Unpriced {
    fn name(&self) -> &str {
        "unpriced"
    }

    fn propose(
        &self,
        scenario: &NetworkScenario,
        params: &GameParams,
        p: &PowerVector,
    ) -> Result<Vec<f64>> {
        unpriced_raw(scenario, params, p)
    }
}

/// The proposed rule with pricing factor `params.price`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Priced;

impl UpdateRule for Priced {
    fn name(&self) -> &str {
        "priced"
    }

    fn propose(
        &self,
        scenario: &NetworkScenario,
        params: &GameParams,
        p: &PowerVector,
    ) -> Result<Vec<f64>> {
        priced_raw(scenario, params, p)
    }

    fn utility_kind(&self) -> UtilityKind {
        UtilityKind::Priced
    }
}

/// Snapshot after one completed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Iteration index, starting at 1.
    pub k: usize,
    pub powers: PowerVector,
    pub sinrs: SinrVector,
    pub utilities: Vec<f64>,
    pub priced_out: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rule: String,
    pub final_powers: PowerVector,
    pub final_sinrs: SinrVector,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
}

impl RunResult {
    pub fn mean_power(&self) -> f64 {
        self.final_powers.mean()
    }

    pub fn mean_sinr(&self) -> f64 {
        self.final_sinrs.mean()
    }

    /// Devices transmitting at the power cap.
    pub fn capped_devices(&self, scenario: &NetworkScenario) -> Vec<usize> {
        self.final_powers
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= scenario.p_max())
            .map(|(i, _)| i)
            .collect()
    }
}

fn max_relative_change(prev: &[f64], next: &[f64]) -> f64 {
    prev.iter()
        .zip(next)
        .map(|(a, b)| (b - a).abs() / a)
        .fold(0.0, f64::max)
}

/// Iterates `rule` synchronously from `p0` until the largest relative power
/// change is below `params.tol` or `params.max_iters` is reached.
pub fn run_to_convergence(
    scenario: &NetworkScenario,
    params: &GameParams,
    rule: &dyn UpdateRule,
    p0: &PowerVector,
) -> Result<RunResult> {
    params.validate()?;
    scenario.check_powers(p0)?;
    let kind = rule.utility_kind();
    let mut p = p0.clone();
    let mut trace = Vec::new();
    let mut converged = false;

    for k in 1..=params.max_iters {
        let raw = rule.propose(scenario, params, &p)?;
        if let Some(device) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                device,
            });
        }
        let Clamped {
            powers, priced_out, ..
        } = clamp_powers(&raw, scenario.p_max());
        let change = max_relative_change(p.as_slice(), powers.as_slice());
        p = powers;

        let sinrs = scenario.sinr_all(&p)?;
        let utilities = sinrs
            .iter()
            .zip(p.iter())
            .map(|(&g, &pi)| utility(kind, params, g, pi))
            .collect();
        trace.push(TraceRecord {
            k,
            powers: p.clone(),
            sinrs,
            utilities,
            priced_out,
        });

        if change < params.tol {
            converged = true;
            break;
        }
    }

    let last = trace.last().expect("max_iters >= 1");
    Ok(RunResult {
        rule: rule.name().to_string(),
        final_powers: last.powers.clone(),
        final_sinrs: last.sinrs.clone(),
        iterations_used: last.k,
        converged,
        trace,
    })
}

/// Runs from the uniform starting power `params.initial_power`.
pub fn run_from_default_start(
    scenario: &NetworkScenario,
    params: &GameParams,
    rule: &dyn UpdateRule,
) -> Result<RunResult> {
    let p0 = PowerVector::uniform(scenario.n(), params.initial_power.min(scenario.p_max()));
    run_to_convergence(scenario, params, rule, &p0)
}

/// Candidate powers each player may deviate to.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid {
    /// Number of log-spaced points in `(MIN_POWER, p_max]`.
    pub points: usize,
    /// Extra candidate powers, tried in addition to the grid.
    pub extra: Vec<f64>,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            points: 64,
            extra: Vec::new(),
        }
    }
}

impl ProbeGrid {
    pub fn powers(&self, p_max: f64) -> Vec<f64> {
        let span = (p_max / MIN_POWER).ln();
        let mut out: Vec<f64> = (1..=self.points)
            .map(|k| MIN_POWER * (span * k as f64 / self.points as f64).exp())
            .collect();
        if let Some(last) = out.last_mut() {
            *last = p_max;
        }
        out.extend(
            self.extra
                .iter()
                .copied()
                .filter(|&q| q > 0.0 && q <= p_max),
        );
        out
    }
}

/// A unilateral move that lowers the mover's cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub device: usize,
    pub from_power: f64,
    pub to_power: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashCheck {
    pub is_equilibrium: bool,
    /// Largest cost reduction any single device achieved by deviating (≤ 0 if none).
    pub worst_improvement: f64,
    pub best_deviation: Option<Deviation>,
}

/// Checks that no device can lower its own cost by moving to any probe power
/// while everyone else stays put.
pub fn is_nash_equilibrium(
    scenario: &NetworkScenario,
    params: &GameParams,
    kind: UtilityKind,
    p: &PowerVector,
    grid: &ProbeGrid,
) -> Result<NashCheck> {
    scenario.check_powers(p)?;
    let probes = grid.powers(scenario.p_max());
    let mut best: Option<Deviation> = None;

    for i in 0..scenario.n() {
        let interference = scenario.interference_unchecked(p.as_slice(), i);
        let cost_at = |q: f64| {
            utility(
                kind,
                params,
                scenario.sinr_given_interference(q, i, interference),
                q,
            )
        };
        let current = cost_at(p[i]);
        for &q in &probes {
            let improvement = current - cost_at(q);
            if best.as_ref().is_none_or(|b| improvement > b.improvement) {
                best = Some(Deviation {
                    device: i,
                    from_power: p[i],
                    to_power: q,
                    improvement,
                });
            }
        }
    }

    let worst_improvement = best.as_ref().map_or(0.0, |b| b.improvement);
    let is_equilibrium = worst_improvement <= NASH_TOLERANCE;
    Ok(NashCheck {
        is_equilibrium,
        worst_improvement,
        best_deviation: if is_equilibrium { None } else { best },
    })
}
