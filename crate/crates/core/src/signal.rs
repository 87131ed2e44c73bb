//! Transmit signals: per-antenna multisine amplitudes and symbol laws.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelResponse;
use crate::error::{Result, WptError};

/// Law of a complex input symbol `x` with average power `E|x|²`.
///
/// `AsymGaussian` uses per-dimension powers: `Re{x} ~ N(mu_r, p_r − mu_r²)` and
/// `Im{x} ~ N(mu_i, p_i − mu_i²)`. `OnOff` puts mass `1 − 1/l²` at zero and
/// `1/l²` on the ring of radius `l·√power`. `Mixture` time-shares a CSCG input
/// (fraction `1 − p_ts`) with an on-off input (fraction `p_ts`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    Cw { power: f64 },
    Cscg { power: f64 },
    RealGaussian { power: f64 },
    AsymGaussian { p_r: f64, p_i: f64, mu_r: f64, mu_i: f64 },
    OnOff { l: f64, power: f64 },
    Mixture { p_ts: f64, l: f64, power: f64 },
    Constellation { points: Vec<Complex64>, probs: Vec<f64> },
}

fn gaussian_even_moments(mu: f64, var: f64) -> [f64; 4] {
    let (m2, v) = (mu * mu, var);
    [
        1.0,
        m2 + v,
        m2 * m2 + 6.0 * m2 * v + 3.0 * v * v,
        m2 * m2 * m2 + 15.0 * m2 * m2 * v + 45.0 * m2 * v * v + 15.0 * v * v * v,
    ]
}

impl InputDistribution {
    pub fn unit_cw() -> Self {
        InputDistribution::Cw { power: 1.0 }
    }

    pub fn power(&self) -> f64 {
        match self {
            Self::Cw { power } | Self::Cscg { power } | Self::RealGaussian { power } => *power,
            Self::OnOff { power, .. } | Self::Mixture { power, .. } => *power,
            Self::AsymGaussian { p_r, p_i, .. } => p_r + p_i,
            Self::Constellation { points, probs } => points.iter().zip(probs).map(|(x, p)| p * x.norm_sqr()).sum(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Cw { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(WptError::param(name, "must be finite and >= 0"))
            }
        };
        match self {
            Self::Cw { power } | Self::Cscg { power } | Self::RealGaussian { power } => nonneg("power", *power),
            Self::AsymGaussian { p_r, p_i, mu_r, mu_i } => {
                nonneg("p_r", *p_r)?;
                nonneg("p_i", *p_i)?;
                if mu_r * mu_r > p_r * (1.0 + 1e-12) + 1e-300 {
                    return Err(WptError::param("mu_r", "mean power exceeds p_r"));
                }
                if mu_i * mu_i > p_i * (1.0 + 1e-12) + 1e-300 {
                    return Err(WptError::param("mu_i", "mean power exceeds p_i"));
                }
                Ok(())
            }
            Self::OnOff { l, power } => {
                nonneg("power", *power)?;
                if !(*l >= 1.0) {
                    return Err(WptError::param("l", "must be >= 1"));
                }
                Ok(())
            }
            Self::Mixture { p_ts, l, power } => {
                nonneg("power", *power)?;
                if !(0.0..=1.0).contains(p_ts) {
                    return Err(WptError::param("p_ts", "must lie in [0, 1]"));
                }
                if !(*l >= 1.0) {
                    return Err(WptError::param("l", "must be >= 1"));
                }
                Ok(())
            }
            Self::Constellation { points, probs } => {
                if points.is_empty() || points.len() != probs.len() {
                    return Err(WptError::param("probs", "needs one probability per point"));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(WptError::param("probs", "must be nonnegative and sum to 1"));
                }
                Ok(())
            }
        }
    }

    /// Same law rescaled to average power `p`.
    pub fn with_power(&self, p: f64) -> Self {
        let cur = self.power();
        let k = if cur > 0.0 { p / cur } else { 0.0 };
        let sk = k.sqrt();
        match self {
            Self::Cw { .. } => Self::Cw { power: p },
            Self::Cscg { .. } => Self::Cscg { power: p },
            Self::RealGaussian { .. } => Self::RealGaussian { power: p },
            Self::OnOff { l, .. } => Self::OnOff { l: *l, power: p },
            Self::Mixture { p_ts, l, .. } => Self::Mixture { p_ts: *p_ts, l: *l, power: p },
            Self::AsymGaussian { p_r, p_i, mu_r, mu_i } => {
                Self::AsymGaussian { p_r: p_r * k, p_i: p_i * k, mu_r: mu_r * sk, mu_i: mu_i * sk }
            }
            Self::Constellation { points, probs } => {
                Self::Constellation { points: points.iter().map(|x| x * sk).collect(), probs: probs.clone() }
            }
        }
    }

    /// `E|x|^k` for `k ∈ {2, 4, 6}`.
    pub fn abs_moment(&self, k: usize) -> Result<f64> {
        if !matches!(k, 2 | 4 | 6) {
            return Err(WptError::Order(k));
        }
        let j = k / 2;
        let v = match self {
            Self::Cw { power } => power.powi(j as i32),
            Self::Cscg { power } => (1..=j).product::<usize>() as f64 * power.powi(j as i32),
            Self::RealGaussian { power } => gaussian_even_moments(0.0, *power)[j],
            Self::OnOff { l, power } => (l * l).powi(j as i32 - 1) * power.powi(j as i32),
            Self::AsymGaussian { p_r, p_i, mu_r, mu_i } => {
                let a = gaussian_even_moments(*mu_r, (p_r - mu_r * mu_r).max(0.0));
                let b = gaussian_even_moments(*mu_i, (p_i - mu_i * mu_i).max(0.0));
                // E(A + B)^j with A = Re², B = Im² independent.
                match j {
                    1 => a[1] + b[1],
                    2 => a[2] + 2.0 * a[1] * b[1] + b[2],
                    _ => a[3] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + b[3],
                }
            }
            Self::Constellation { points, probs } => {
                points.iter().zip(probs).map(|(x, p)| p * x.norm_sqr().powi(j as i32)).sum()
            }
            Self::Mixture { .. } => {
                return Err(WptError::Unsupported("a time-sharing mixture has no single-letter moments".into()))
            }
        };
        Ok(v)
    }

    /// Draw one symbol.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let gauss = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
        match self {
            Self::Cw { power } => Complex64::new(power.sqrt(), 0.0),
            Self::Cscg { power } => {
                let s = (power / 2.0).sqrt();
                Complex64::new(s * gauss(rng), s * gauss(rng))
            }
            Self::RealGaussian { power } => Complex64::new(power.sqrt() * gauss(rng), 0.0),
            Self::AsymGaussian { p_r, p_i, mu_r, mu_i } => Complex64::new(
                mu_r + (p_r - mu_r * mu_r).max(0.0).sqrt() * gauss(rng),
                mu_i + (p_i - mu_i * mu_i).max(0.0).sqrt() * gauss(rng),
            ),
            Self::OnOff { l, power } => {
                if rng.gen::<f64>() < 1.0 / (l * l) {
                    Complex64::from_polar(l * power.sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Self::Mixture { p_ts, l, power } => {
                if rng.gen::<f64>() < *p_ts {
                    Self::OnOff { l: *l, power: *power }.sample(rng)
                } else {
                    Self::Cscg { power: *power }.sample(rng)
                }
            }
            Self::Constellation { points, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (x, p) in points.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *points.last().unwrap()
            }
        }
    }
}

/// Transmit signal: amplitudes `x[m][n]` modulated per tone by a unit-power
/// symbol drawn from `dist[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub x: Vec<Vec<Complex64>>,
    pub dist: Vec<InputDistribution>,
    pub power_budget: f64,
}

impl SignalSpec {
    /// Unmodulated multisine.
    pub fn deterministic(x: Vec<Vec<Complex64>>, power_budget: f64) -> Self {
        let n = x.first().map_or(0, |r| r.len());
        Self { x, dist: vec![InputDistribution::unit_cw(); n], power_budget }
    }

    /// Single-antenna multisine from amplitudes and phases.
    pub fn siso(amplitudes: &[f64], phases: &[f64], power_budget: f64) -> Self {
        let row = amplitudes.iter().zip(phases).map(|(s, p)| Complex64::from_polar(*s, *p)).collect();
        Self::deterministic(vec![row], power_budget)
    }

    pub fn n_tx(&self) -> usize {
        self.x.len()
    }

    pub fn n_tones(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    pub fn is_deterministic(&self) -> bool {
        self.dist.iter().all(|d| d.is_deterministic())
    }

    /// Average transmit power `Σ_{m,n} |x_{m,n}|²·E|ξ_n|²`.
    pub fn transmit_power(&self) -> f64 {
        self.x
            .iter()
            .map(|row| row.iter().zip(&self.dist).map(|(x, d)| x.norm_sqr() * d.power()).sum::<f64>())
            .sum()
    }

    /// Per-tone power `Σ_m |x_{m,n}|²`.
    pub fn tone_powers(&self) -> Vec<f64> {
        (0..self.n_tones()).map(|n| self.x.iter().map(|row| row[n].norm_sqr()).sum()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_tones();
        if self.x.iter().any(|r| r.len() != n) {
            return Err(WptError::Dimension("ragged amplitude table".into()));
        }
        if self.dist.len() != n {
            return Err(WptError::Dimension(format!("{} symbol laws for {} tones", self.dist.len(), n)));
        }
        for d in &self.dist {
            d.validate()?;
            if (d.power() - 1.0).abs() > 1e-9 {
                return Err(WptError::param("dist", "per-tone symbol laws must have unit power"));
            }
        }
        if self.transmit_power() > self.power_budget + 1e-12 {
            return Err(WptError::param("x", format!("power {} exceeds budget {}", self.transmit_power(), self.power_budget)));
        }
        Ok(())
    }

    /// Effective per-tone amplitudes `c_n = Σ_m h_{q,m,n} x_{m,n}` at receive antenna `q`.
    pub fn received(&self, channel: &ChannelResponse, q: usize) -> Result<crate::rectenna::ReceivedSignal> {
        if channel.n_tx() != self.n_tx() || channel.n_tones() != self.n_tones() {
            return Err(WptError::Dimension(format!(
                "signal is {}x{} (antennas x tones), channel is {}x{}",
                self.n_tx(),
                self.n_tones(),
                channel.n_tx(),
                channel.n_tones()
            )));
        }
        if q >= channel.n_rx() {
            return Err(WptError::Dimension(format!("receive antenna {q} of {}", channel.n_rx())));
        }
        let c = (0..self.n_tones())
            .map(|n| (0..self.n_tx()).map(|m| channel.entry(n, q, m) * self.x[m][n]).sum())
            .collect();
        Ok(crate::rectenna::ReceivedSignal { c, dist: self.dist.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_fourth_moments() {
        assert_eq!(InputDistribution::Cw { power: 2.0 }.abs_moment(4).unwrap(), 4.0);
        assert_eq!(InputDistribution::Cscg { power: 1.0 }.abs_moment(4).unwrap(), 2.0);
        assert_eq!(InputDistribution::RealGaussian { power: 1.0 }.abs_moment(4).unwrap(), 3.0);
        assert_eq!(InputDistribution::OnOff { l: 2.0, power: 1.0 }.abs_moment(4).unwrap(), 4.0);
        let half = InputDistribution::AsymGaussian { p_r: 0.5, p_i: 0.5, mu_r: 0.0, mu_i: 0.0 };
        assert!((half.abs_moment(4).unwrap() - 2.0).abs() < 1e-15);
        let one_dim = InputDistribution::AsymGaussian { p_r: 1.0, p_i: 0.0, mu_r: 0.0, mu_i: 0.0 };
        assert!((one_dim.abs_moment(4).unwrap() - 3.0).abs() < 1e-15);
        assert!(InputDistribution::Mixture { p_ts: 0.5, l: 2.0, power: 1.0 }.abs_moment(4).is_err());
    }

    #[test]
    fn sampled_moments_agree_with_closed_forms() {
        let laws = [
            InputDistribution::AsymGaussian { p_r: 0.7, p_i: 0.3, mu_r: 0.4, mu_i: -0.2 },
            InputDistribution::Constellation {
                points: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0), Complex64::new(-0.5, 0.5)],
                probs: vec![0.5, 0.2, 0.3],
            },
            InputDistribution::Cscg { power: 1.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in laws {
            let n = 400_000;
            let (mut s4, mut s6) = (0.0, 0.0);
            for _ in 0..n {
                let a = d.sample(&mut rng).norm_sqr();
                s4 += a * a;
                s6 += a * a * a;
            }
            let e4 = d.abs_moment(4).unwrap();
            let e6 = d.abs_moment(6).unwrap();
            assert!((s4 / n as f64 - e4).abs() / e4 < 0.02, "{d:?}");
            assert!((s6 / n as f64 - e6).abs() / e6 < 0.05, "{d:?}");
        }
    }

    #[test]
    fn power_budget_validation() {
        let s = SignalSpec::siso(&[0.5, 0.5], &[0.0, 0.0], 0.5);
        assert!(s.validate().is_ok());
        let s = SignalSpec::siso(&[1.0, 0.5], &[0.0, 0.0], 0.5);
        assert!(s.validate().is_err());
    }
}
