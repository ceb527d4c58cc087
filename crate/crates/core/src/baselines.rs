//! Reference power-control rules and the rule registry.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{GameParams, Priced, Unpriced, UpdateRule, UtilityKind};
use crate::model::{NetworkScenario, PowerVector};

/// Table rows whose update formulas are not available. Looking one of these
/// up fails until a user registers an implementation under that name.
pub const RESERVED_RULES: [&str; 3] = ["norm2", "hyperbolic", "ref11"];

/// Constrained distributed power control: `p_i ← min(p_max, (Γ/γ_i)·p_i)`.
/// Ignores `alpha` and `price`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cdpc;

impl UpdateRule for Cdpc {
    fn name(&self) -> &str {
        "cdpc"
    }

    fn propose(
        &self,
        scenario: &NetworkScenario,
        params: &GameParams,
        p: &PowerVector,
    ) -> Result<Vec<f64>> {
        scenario.check_powers(p)?;
        let p = p.as_slice();
        Ok((0..p.len())
            .map(|i| (params.target / scenario.sinr_unchecked(p, i)) * p[i])
            .collect())
    }
}

/// Best response to `J_i = b·(Γ − γ_i)² + c·p_i`:
/// `p_i ← Γ·r_i − c·r_i²/(2b)` with `r_i = p_i/γ_i = I_i/(G·h_i)`.
#[derive(Debug, Clone, Copy)]
pub struct KoskieGajic {
    /// Weight `b` of the SINR error term.
    pub weight: f64,
    /// Price `c` per watt.
    pub price: f64,
}

impl KoskieGajic {
    pub fn new(weight: f64, price: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidParams(format!(
                "Koskie-Gajic weight must be positive, got {weight}"
            )));
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "Koskie-Gajic price must be >= 0, got {price}"
            )));
        }
        Ok(Self { weight, price })
    }
}

impl Default for KoskieGajic {
    fn default() -> Self {
        Self {
            weight: 1.0,
            price: crate::game::DEFAULT_PRICE,
        }
    }
}

impl UpdateRule for KoskieGajic {
    fn name(&self) -> &str {
        "koskie-gajic"
    }

    fn propose(
        &self,
        scenario: &NetworkScenario,
        params: &GameParams,
        p: &PowerVector,
    ) -> Result<Vec<f64>> {
        scenario.check_powers(p)?;
        let g = scenario.processing_gain();
        let h = scenario.gains();
        let p = p.as_slice();
        Ok((0..p.len())
            .map(|i| {
                let r = scenario.interference_unchecked(p, i) / (g * h[i]);
                params.target * r - self.price * r * r / (2.0 * self.weight)
            })
            .collect())
    }

    fn utility_kind(&self) -> UtilityKind {
        UtilityKind::Priced
    }
}

/// Name-indexed set of update rules.
#[derive(Debug, Clone, Default)]
pub struct RuleRegistry {
    rules: BTreeMap<String, Arc<dyn UpdateRule>>,
}

impl RuleRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding `unpriced`, `priced`, `cdpc` and `koskie-gajic`.
    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        let defaults: [Arc<dyn UpdateRule>; 4] = [
            Arc::new(Unpriced),
            Arc::new(Priced),
            Arc::new(Cdpc),
            Arc::new(KoskieGajic::default()),
        ];
        for rule in defaults {
            let name = rule.name().to_string();
            reg.register(&name, rule)
                .expect("default names are distinct");
        }
        reg
    }

    pub fn register(&mut self, name: &str, rule: Arc<dyn UpdateRule>) -> Result<()> {
        if self.rules.contains_key(name) {
            return Err(Error::DuplicateRule(name.to_string()));
        }
        self.rules.insert(name.to_string(), rule);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn UpdateRule>> {
        match self.rules.get(name) {
            Some(rule) => Ok(Arc::clone(rule)),
            None if RESERVED_RULES.contains(&name) => Err(Error::ReservedRule(name.to_string())),
            None => Err(Error::UnknownRule(name.to_string())),
        }
    }

    /// Registered names in sorted order.
    pub fn list(&self) -> Vec<String> {
        self.rules.keys().cloned().collect()
    }
}
