//! Physical layer of the game: devices, path gains, interference and SINR.
//!
//! Every device transmits towards a receiver over a single scalar path gain
//! `h_i`. The interference seen at device `i`'s receiver is the noise floor
//! plus everyone else's received power:
//!
//! ```text
//! I_i = σ² + Σ_{j≠i} p_j·h_j
//! γ_i = G·p_i·h_i / I_i
//! ```
//!
//! `G` is the processing (spreading) gain of the link. Hand-built scenarios
//! default to `G = 1`; generated cells use a CDMA-style gain so that a full
//! cell of devices can meet a common SINR target.

use crate::error::{Error, Result};

/// Lower clamp for transmit powers, in watts. Keeps every power strictly
/// positive so that SINR-based updates stay well defined.
pub const MIN_POWER: f64 = 1e-18;

/// Default noise power σ² in watts.
pub const DEFAULT_NOISE_POWER: f64 = 5e-15;

/// Default per-device power cap in watts (100 mW).
pub const DEFAULT_P_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceKind {
    Cellular,
    D2dPair,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Cellular => "cellular",
            DeviceKind::D2dPair => "d2d",
        }
    }
}

/// A transmitter in the cell. D2D pairs are a single logical transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Device {
    pub id: usize,
    pub kind: DeviceKind,
    /// Position in meters, relative to the base station.
    pub position: (f64, f64),
}

/// Immutable description of a single cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    devices: Vec<Device>,
    gains: Vec<f64>,
    noise_power: f64,
    p_max: f64,
    processing_gain: f64,
}

impl NetworkScenario {
    pub fn new(
        devices: Vec<Device>,
        gains: Vec<f64>,
        noise_power: f64,
        p_max: f64,
    ) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::InvalidScenario(
                "at least one device is required".into(),
            ));
        }
        if gains.len() != devices.len() {
            return Err(Error::DimensionMismatch {
                expected: devices.len(),
                got: gains.len(),
            });
        }
        for (i, d) in devices.iter().enumerate() {
            if d.id != i {
                return Err(Error::InvalidScenario(format!(
                    "device ids must be contiguous from 0; found id {} at position {i}",
                    d.id
                )));
            }
        }
        if let Some((i, g)) = gains
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g > 0.0))
        {
            return Err(Error::InvalidScenario(format!(
                "gain of device {i} must be positive, got {g}"
            )));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if !(p_max.is_finite() && p_max > MIN_POWER) {
            return Err(Error::InvalidScenario(format!(
                "p_max must be positive, got {p_max}"
            )));
        }
        Ok(Self {
            devices,
            gains,
            noise_power,
            p_max,
            processing_gain: 1.0,
        })
    }

    /// Builds a scenario of D2D transmitters placed at the origin from a gain list.
    pub fn from_gains(gains: Vec<f64>, noise_power: f64, p_max: f64) -> Result<Self> {
        let devices = (0..gains.len())
            .map(|id| Device {
                id,
                kind: DeviceKind::D2dPair,
                position: (0.0, 0.0),
            })
            .collect();
        Self::new(devices, gains, noise_power, p_max)
    }

    pub fn with_processing_gain(mut self, processing_gain: f64) -> Result<Self> {
        if !(processing_gain.is_finite() && processing_gain > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "processing gain must be positive, got {processing_gain}"
            )));
        }
        self.processing_gain = processing_gain;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.devices.len()
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn processing_gain(&self) -> f64 {
        self.processing_gain
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n(),
            });
        }
        Ok(())
    }

    fn check_len(&self, p: &PowerVector) -> Result<()> {
        if p.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Noise plus received power of every device other than `i`, in watts.
    /// Never reads `p[i]`.
    pub fn interference(&self, p: &PowerVector, i: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_len(p)?;
        Ok(self.interference_unchecked(p.as_slice(), i))
    }

    pub(crate) fn interference_unchecked(&self, p: &[f64], i: usize) -> f64 {
        let mut total = self.noise_power;
        for (j, (pj, hj)) in p.iter().zip(&self.gains).enumerate() {
            if j != i {
                total += pj * hj;
            }
        }
        total
    }

    pub fn sinr(&self, p: &PowerVector, i: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_len(p)?;
        Ok(self.sinr_unchecked(p.as_slice(), i))
    }

    pub(crate) fn sinr_unchecked(&self, p: &[f64], i: usize) -> f64 {
        self.sinr_given_interference(p[i], i, self.interference_unchecked(p, i))
    }

    /// SINR device `i` would see at power `power` against a fixed interference level.
    pub(crate) fn sinr_given_interference(&self, power: f64, i: usize, interference: f64) -> f64 {
        self.processing_gain * power * self.gains[i] / interference
    }

    pub fn sinr_all(&self, p: &PowerVector) -> Result<SinrVector> {
        self.check_len(p)?;
        Ok(SinrVector(
            (0..self.n())
                .map(|i| self.sinr_unchecked(p.as_slice(), i))
                .collect(),
        ))
    }

    /// Validates `p` as the state of an iteration: right length, every entry
    /// strictly positive and finite.
    pub fn check_powers(&self, p: &PowerVector) -> Result<()> {
        self.check_len(p)?;
        p.check_positive()
    }
}

/// Per-device transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn uniform(n: usize, power: f64) -> Self {
        Self(vec![power; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn check_positive(&self) -> Result<()> {
        match self
            .0
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            Some((device, &value)) => Err(Error::NonPositivePower { device, value }),
            None => Ok(()),
        }
    }

    /// Copy of `self` with device `i` set to `power`.
    pub fn with_power(&self, i: usize, power: f64) -> Self {
        let mut p = self.0.clone();
        p[i] = power;
        Self(p)
    }
}

impl From<Vec<f64>> for PowerVector {
    fn from(p: Vec<f64>) -> Self {
        Self(p)
    }
}

impl std::ops::Index<usize> for PowerVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-device SINRs (dimensionless).
#[derive(Debug, Clone, PartialEq)]
pub struct SinrVector(Vec<f64>);

impl SinrVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl std::ops::Index<usize> for SinrVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Powers that put every device exactly at `target` SINR, if they exist
/// under the cap.
///
/// With a shared receiver the received powers `x_i = p_i·h_i` at the fixed
/// point are all equal to `a·σ² / (1 − (n−1)·a)` where `a = target / G`.
pub fn equal_target_powers(scenario: &NetworkScenario, target: f64) -> Option<PowerVector> {
    let a = target / scenario.processing_gain;
    let load = (scenario.n() as f64 - 1.0) * a;
    if !(load < 1.0) {
        return None;
    }
    let received = a * scenario.noise_power / (1.0 - load);
    let p: Vec<f64> = scenario.gains.iter().map(|h| received / h).collect();
    if p.iter().any(|&pi| pi > scenario.p_max) {
        return None;
    }
    Some(PowerVector(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(gains: &[f64], noise: f64) -> NetworkScenario {
        NetworkScenario::from_gains(gains.to_vec(), noise, DEFAULT_P_MAX).unwrap()
    }

    // Written independently of `interference_unchecked`.
    fn interference_oracle(gains: &[f64], noise: f64, p: &[f64], i: usize) -> f64 {
        let mut others = Vec::new();
        for j in 0..p.len() {
            if j == i {
                continue;
            }
            others.push(p[j] * gains[j]);
        }
        noise + others.iter().sum::<f64>()
    }

    #[test]
    fn interference_single_device_is_noise() {
        let s = scenario(&[1.0], 1e-3);
        let p = PowerVector::new(vec![5e-3]);
        assert_eq!(s.interference(&p, 0).unwrap(), 1e-3);
    }

    #[test]
    fn interference_two_devices() {
        let s = scenario(&[1.0, 1.0], 1e-3);
        let p = PowerVector::new(vec![2e-3, 4e-3]);
        assert!((s.interference(&p, 0).unwrap() - 5e-3).abs() < 1e-18);
    }

    #[test]
    fn interference_three_devices_matches_oracle() {
        let gains = [1.0, 2.0, 4.0];
        let s = scenario(&gains, 0.001);
        let p = PowerVector::new(vec![0.001; 3]);
        let expected = interference_oracle(&gains, 0.001, p.as_slice(), 1);
        assert!((expected - 0.006).abs() < 1e-15);
        assert!((s.interference(&p, 1).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn interference_index_out_of_range() {
        let s = scenario(&[1.0, 1.0], 1e-3);
        let p = PowerVector::uniform(2, 1e-3);
        assert_eq!(
            s.interference(&p, 2),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        );
        assert!(s.sinr(&p, 5).is_err());
    }

    #[test]
    fn interference_ignores_own_power() {
        let s = scenario(&[0.3, 0.7, 1.1], 1e-9);
        let p = PowerVector::new(vec![1e-3, 2e-3, 3e-3]);
        let base = s.interference(&p, 1).unwrap();
        let bumped = s.interference(&p.with_power(1, 0.09), 1).unwrap();
        assert_eq!(base.to_bits(), bumped.to_bits());
    }

    #[test]
    fn sinr_at_default_power() {
        // p = 8 mW, h = 1, I = 4 mW: noise 1 mW plus a 3 mW interferer.
        let s = scenario(&[1.0, 1.0], 1e-3);
        let p = PowerVector::new(vec![8e-3, 3e-3]);
        assert!((s.sinr(&p, 0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_zero_power() {
        let s = scenario(&[1.0, 1.0], 1e-3);
        let p = PowerVector::new(vec![0.0, 1e-3]);
        assert_eq!(s.sinr(&p, 0).unwrap(), 0.0);
    }

    #[test]
    fn sinr_symmetric_pair() {
        let s = scenario(&[1.0, 1.0], 1e-3);
        let p = PowerVector::uniform(2, 1e-3);
        let oracle = 1e-3 * 1.0 / interference_oracle(&[1.0, 1.0], 1e-3, p.as_slice(), 0);
        assert!((oracle - 0.5).abs() < 1e-15);
        let all = s.sinr_all(&p).unwrap();
        assert_eq!(all.len(), 2);
        for i in 0..2 {
            assert!((all[i] - 0.5).abs() < 1e-15);
            assert_eq!(all[i], s.sinr(&p, i).unwrap());
        }
    }

    #[test]
    fn sinr_all_single_device() {
        let s = scenario(&[0.25], 2e-3);
        let p = PowerVector::new(vec![4e-3]);
        assert_eq!(s.sinr_all(&p).unwrap().as_slice(), &[4e-3 * 0.25 / 2e-3]);
    }

    #[test]
    fn processing_gain_scales_sinr() {
        let s = scenario(&[1.0, 1.0], 1e-3)
            .with_processing_gain(128.0)
            .unwrap();
        let p = PowerVector::uniform(2, 1e-3);
        assert!((s.sinr(&p, 0).unwrap() - 64.0).abs() < 1e-12);
    }

    #[test]
    fn noise_dilution_under_scaling() {
        let s = scenario(&[0.5, 1.0, 2.0], 1e-3);
        let p = PowerVector::new(vec![1e-3, 2e-3, 5e-4]);
        let scaled = PowerVector::new(p.iter().map(|v| v * 3.0).collect());
        let before = s.sinr_all(&p).unwrap();
        let after = s.sinr_all(&scaled).unwrap();
        for i in 0..3 {
            assert!(after[i] > before[i]);
        }

        // Noiseless configuration is only reachable from inside the module.
        let mut quiet = s.clone();
        quiet.noise_power = 0.0;
        let before = quiet.sinr_all(&p).unwrap();
        let after = quiet.sinr_all(&scaled).unwrap();
        for i in 0..3 {
            assert!((after[i] - before[i]).abs() <= 1e-12 * before[i]);
        }
    }

    #[test]
    fn rejects_invalid_scenarios() {
        assert!(NetworkScenario::from_gains(vec![], 1e-3, 0.1).is_err());
        assert!(NetworkScenario::from_gains(vec![1.0, 0.0], 1e-3, 0.1).is_err());
        assert!(NetworkScenario::from_gains(vec![1.0], 0.0, 0.1).is_err());
        assert!(NetworkScenario::from_gains(vec![1.0], 1e-3, -1.0).is_err());
        let devices = vec![Device {
            id: 3,
            kind: DeviceKind::Cellular,
            position: (0.0, 0.0),
        }];
        assert!(NetworkScenario::new(devices, vec![1.0], 1e-3, 0.1).is_err());
    }

    #[test]
    fn equal_target_powers_meet_target() {
        let s = scenario(&[1.0, 1.0], 1e-3);
        let p = equal_target_powers(&s, 0.5).unwrap();
        assert!((p[0] - 1e-3).abs() < 1e-15);
        // Two devices sharing a receiver cannot both reach Γ ≥ 1.
        assert!(equal_target_powers(&s, 1.0).is_none());
        assert!(equal_target_powers(&s, 2.0).is_none());
    }
}
