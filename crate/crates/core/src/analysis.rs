//! Numeric checks of the convergence machinery.
//!
//! An update map `f` is a standard interference function when it is
//! positive, monotone (`p ≥ q ⇒ f(p) ≥ f(q)`) and scalable
//! (`f(λp) < λ·f(p)` for `λ > 1`); synchronous iteration of such a map has a
//! unique fixed point it always reaches. [`check_standard_function`] probes the
//! three properties on random power vectors.
//!
//! [`jacobian_at`] evaluates the Jacobian of `F(p) = −p + f(p)` by central
//! differences. A non-singular Jacobian at a fixed point makes that fixed point
//! locally unique.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{clamp_powers, GameParams, PricingSign, UpdateRule, UtilityKind};
use crate::model::{NetworkScenario, PowerVector};

/// Scaling factors used for the scalability check.
pub const SCALE_FACTORS: [f64; 3] = [1.5, 2.0, 10.0];
/// Lower end of the log-uniform power sampling range, in watts.
pub const SAMPLE_FLOOR: f64 = 1e-9;
/// Relative band within which two map values count as equal in the
/// monotonicity check. The update is evaluated from measured SINRs, so a
/// device's own power cancels only up to rounding.
pub const MONOTONICITY_ULPS: f64 = 4.0;
/// Threshold on the row-scaled determinant.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Positivity,
    Monotonicity,
    Scalability,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Positivity => "positivity",
            Condition::Monotonicity => "monotonicity",
            Condition::Scalability => "scalability",
        }
    }
}

/// Witness of a violated condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub condition: Condition,
    pub powers: Vec<f64>,
    /// Scaling factor, for scalability failures.
    pub lambda: Option<f64>,
    pub device: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFunctionReport {
    pub samples: usize,
    pub positivity_ok: bool,
    pub monotonicity_ok: bool,
    pub scalability_ok: bool,
    /// Number of map evaluations in which at least one entry hit a clamp.
    pub clamp_activations: usize,
    /// First failure encountered.
    pub counterexample: Option<Counterexample>,
}

impl StandardFunctionReport {
    pub fn all_ok(&self) -> bool {
        self.positivity_ok && self.monotonicity_ok && self.scalability_ok
    }
}

struct Evaluator<'a> {
    scenario: &'a NetworkScenario,
    params: &'a GameParams,
    rule: &'a dyn UpdateRule,
    clamp_activations: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, p: &[f64]) -> Result<Vec<f64>> {
        let raw = self
            .rule
            .propose(self.scenario, self.params, &PowerVector::new(p.to_vec()))?;
        let clamped = clamp_powers(&raw, self.scenario.p_max());
        if !clamped.priced_out.is_empty() || !clamped.capped.is_empty() {
            self.clamp_activations += 1;
        }
        Ok(clamped.powers.into_inner())
    }
}

fn sample_powers(rng: &mut ChaCha8Rng, n: usize, p_max: f64) -> Vec<f64> {
    let (lo, hi) = (SAMPLE_FLOOR.ln(), p_max.ln());
    (0..n).map(|_| rng.random_range(lo..=hi).exp()).collect()
}

/// Samples `samples` random power vectors (log-uniform in `[1e-9, p_max]`)
/// and checks positivity, monotonicity and scalability of the clamped map.
pub fn check_standard_function(
    scenario: &NetworkScenario,
    params: &GameParams,
    rule: &dyn UpdateRule,
    samples: usize,
    seed: u64,
) -> Result<StandardFunctionReport> {
    if samples == 0 {
        return Err(Error::InvalidExperiment(
            "samples must be at least 1".into(),
        ));
    }
    params.validate()?;
    let n = scenario.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator {
        scenario,
        params,
        rule,
        clamp_activations: 0,
    };
    let mut report = StandardFunctionReport {
        samples,
        positivity_ok: true,
        monotonicity_ok: true,
        scalability_ok: true,
        clamp_activations: 0,
        counterexample: None,
    };
    let fail = |report: &mut StandardFunctionReport, cx: Counterexample| {
        match cx.condition {
            Condition::Positivity => report.positivity_ok = false,
            Condition::Monotonicity => report.monotonicity_ok = false,
            Condition::Scalability => report.scalability_ok = false,
        }
        if report.counterexample.is_none() {
            report.counterexample = Some(cx);
        }
    };

    for _ in 0..samples {
        let p = sample_powers(&mut rng, n, scenario.p_max());
        let fp = eval.eval(&p)?;

        if let Some(device) = fp.iter().position(|&v| !(v > 0.0)) {
            fail(
                &mut report,
                Counterexample {
                    condition: Condition::Positivity,
                    powers: p.clone(),
                    lambda: None,
                    device,
                },
            );
        }

        // q ≤ p with at least one strict decrease.
        let forced = rng.random_range(0..n);
        let q: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(j, &pj)| {
                if j == forced || rng.random_bool(0.5) {
                    pj * rng.random_range(0.01..0.99)
                } else {
                    pj
                }
            })
            .collect();
        let fq = eval.eval(&q)?;
        let band = 1.0 - MONOTONICITY_ULPS * f64::EPSILON;
        if let Some(device) = (0..n).find(|&i| fp[i] < fq[i] * band) {
            fail(
                &mut report,
                Counterexample {
                    condition: Condition::Monotonicity,
                    powers: p.clone(),
                    lambda: None,
                    device,
                },
            );
        }

        for lambda in SCALE_FACTORS {
            let scaled: Vec<f64> = p.iter().map(|v| v * lambda).collect();
            let f_scaled = eval.eval(&scaled)?;
            if let Some(device) = (0..n).find(|&i| !(f_scaled[i] < lambda * fp[i])) {
                fail(
                    &mut report,
                    Counterexample {
                        condition: Condition::Scalability,
                        powers: p.clone(),
                        lambda: Some(lambda),
                        device,
                    },
                );
            }
        }
    }

    report.clamp_activations = eval.clamp_activations;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    /// `∂F_i/∂p_j` with `F(p) = −p + f(p)`.
    pub matrix: DMatrix<f64>,
    pub determinant: f64,
    /// Determinant after dividing every row by the magnitude of its diagonal entry.
    pub scaled_determinant: f64,
    pub nonsingular: bool,
}

impl JacobianReport {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Divides each row by `|J_ii|` (or by its largest entry when the diagonal is zero)
/// and returns the determinant of the result.
pub fn row_scaled_determinant(matrix: &DMatrix<f64>) -> f64 {
    let mut scaled = matrix.clone();
    for i in 0..scaled.nrows() {
        let diag = scaled[(i, i)].abs();
        let norm = if diag > 0.0 {
            diag
        } else {
            scaled.row(i).amax()
        };
        if norm > 0.0 {
            scaled.row_mut(i).scale_mut(1.0 / norm);
        }
    }
    scaled.determinant()
}

/// Central-difference Jacobian of `F(p) = −p + f(p)` using the raw (unclamped)
/// update of `rule`, with per-coordinate step `h_step·p_j`.
pub fn jacobian_at(
    scenario: &NetworkScenario,
    params: &GameParams,
    rule: &dyn UpdateRule,
    p: &PowerVector,
    h_step: f64,
) -> Result<JacobianReport> {
    scenario.check_powers(p)?;
    if !(h_step > 0.0 && h_step <= 1e-2) {
        return Err(Error::InvalidExperiment(format!(
            "h_step must be in (0, 1e-2], got {h_step}"
        )));
    }
    let n = scenario.n();
    let map = |x: &[f64]| rule.propose(scenario, params, &PowerVector::new(x.to_vec()));

    // Differencing f rather than −p + f avoids cancelling p_i against f_i;
    // the −1 diagonal of −p is exact.
    let mut matrix = -DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        let mut plus = p.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[j] += h_step * p[j];
        minus[j] -= h_step * p[j];
        let width = plus[j] - minus[j];
        let (fp, fm) = (map(&plus)?, map(&minus)?);
        for i in 0..n {
            let entry = (fp[i] - fm[i]) / width;
            if !entry.is_finite() {
                return Err(Error::NonFiniteJacobian { row: i, col: j });
            }
            matrix[(i, j)] += entry;
        }
    }

    let determinant = matrix.determinant();
    let scaled_determinant = row_scaled_determinant(&matrix);
    Ok(JacobianReport {
        nonsingular: scaled_determinant.abs() > SINGULARITY_THRESHOLD,
        matrix,
        determinant,
        scaled_determinant,
    })
}

/// Closed-form Jacobian of `F` for the proposed rules (`Base` = unpriced map,
/// `Priced` = priced map with `params.pricing_sign`).
///
/// Since `f_i` depends on `p` only through `I_i`, `∂f_i/∂p_i = 0` and
/// `∂f_i/∂p_j = f_i'(r_i)·h_j/(G·h_i)` with `r_i = I_i/(G·h_i)`.
pub fn closed_form_jacobian(
    scenario: &NetworkScenario,
    params: &GameParams,
    kind: UtilityKind,
    p: &PowerVector,
) -> Result<DMatrix<f64>> {
    scenario.check_powers(p)?;
    let n = scenario.n();
    let g = scenario.processing_gain();
    let h = scenario.gains();
    let shifted = params.effective_target();
    let mut m = DMatrix::from_element(n, n, 0.0);
    for i in 0..n {
        let slope = match kind {
            UtilityKind::Base => shifted,
            UtilityKind::Priced => {
                let r = scenario.interference(p, i)? / (g * h[i]);
                match params.pricing_sign {
                    PricingSign::Reducing => shifted - params.price * r,
                    PricingSign::Literal => shifted + params.price * r,
                }
            }
        };
        for j in 0..n {
            m[(i, j)] = if i == j {
                -1.0
            } else {
                slope * h[j] / (g * h[i])
            };
        }
    }
    Ok(m)
}

/// Largest relative gap between the numeric and closed-form diagonals.
pub fn diagonal_mismatch(numeric: &DMatrix<f64>, closed: &DMatrix<f64>) -> f64 {
    (0..numeric.nrows())
        .map(|i| ((numeric[(i, i)] - closed[(i, i)]) / closed[(i, i)]).abs())
        .fold(0.0, f64::max)
}
