//! Diode rectenna: Taylor-expansion nonlinearity, even moments of the
//! received RF signal and the resulting DC output.
//!
//! The received waveform is `y(t) = √2·Re{Σ_n c_n e^{j2πf_n t}}`, so a tone of
//! amplitude `c` carries power `|c|²`. Time averages use a baseband-equivalent
//! grid `f_n = (k0 + n)/T` with `k0 = 2N + 1`, which keeps every even-order
//! intermodulation product away from DC exactly as a high carrier would.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelResponse;
use crate::error::{Result, WptError};
use crate::numerics::{self, Moments};
use crate::signal::{InputDistribution, SignalSpec};

/// Diode Taylor model `v_out = Σ_{even i ≤ n_o} β_i·E[y(t)^i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EhTaylorModel {
    pub order: usize,
    pub r_ant: f64,
    pub ideality: f64,
    pub thermal_voltage: f64,
    pub load: f64,
    pub saturation_current: f64,
}

impl Default for EhTaylorModel {
    fn default() -> Self {
        Self { order: 4, r_ant: 50.0, ideality: 1.05, thermal_voltage: 25.85e-3, load: 1000.0, saturation_current: 5e-6 }
    }
}

impl EhTaylorModel {
    pub fn with_order(order: usize) -> Self {
        Self { order, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.order, 2 | 4 | 6) {
            return Err(WptError::param("order", "must be 2, 4 or 6"));
        }
        for (name, v) in [
            ("r_ant", self.r_ant),
            ("ideality", self.ideality),
            ("thermal_voltage", self.thermal_voltage),
            ("load", self.load),
            ("saturation_current", self.saturation_current),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WptError::param(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// `β_i = R_ant^{i/2} / (i!·(n·v_t)^{i−1})`; zero for odd `i` or `i > n_o`.
    pub fn beta(&self, i: usize) -> f64 {
        if i % 2 == 1 || i > self.order || i == 0 {
            return 0.0;
        }
        let fact: f64 = (1..=i).map(|k| k as f64).product();
        self.r_ant.powf(i as f64 / 2.0) / (fact * (self.ideality * self.thermal_voltage).powi(i as i32 - 1))
    }

    /// `Σ_i β_i m_i`.
    pub fn v_out(&self, m: &Moments) -> f64 {
        (2..=self.order).step_by(2).map(|i| self.beta(i) * m.get(i)).sum()
    }

    pub fn p_dc(&self, v_out: f64) -> f64 {
        v_out * v_out / self.load
    }

    /// Output voltage for a single tone of complex amplitude with magnitude `a`.
    pub fn v_out_tone(&self, a: f64, convention: MomentConvention) -> f64 {
        (2..=self.order).step_by(2).map(|i| self.beta(i) * convention.k(i) * a.powi(i as i32)).sum()
    }

    /// Derivative of [`Self::v_out_tone`] with respect to `a`.
    pub fn dv_out_tone(&self, a: f64, convention: MomentConvention) -> f64 {
        (2..=self.order).step_by(2).map(|i| self.beta(i) * convention.k(i) * i as f64 * a.powi(i as i32 - 1)).sum()
    }
}

/// Relation between a tone amplitude `a` and `E[y^i] = k_i·a^i`.
///
/// `Passband` is the `y = √2·Re{a e^{jωt}}` form (`k = 1, 3/2, 5/2`);
/// `Zeta` is the `y = a·cos(ωt)` form (`k = 1/2, 3/8, 5/16`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MomentConvention {
    #[default]
    Passband,
    Zeta,
}

impl MomentConvention {
    pub fn k(&self, i: usize) -> f64 {
        match (self, i) {
            (Self::Passband, 2) => 1.0,
            (Self::Passband, 4) => 1.5,
            (Self::Passband, 6) => 2.5,
            (Self::Zeta, 2) => 0.5,
            (Self::Zeta, 4) => 0.375,
            (Self::Zeta, 6) => 0.3125,
            _ => 0.0,
        }
    }
}

/// Received per-tone amplitudes and the law of the symbol on each tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedSignal {
    pub c: Vec<Complex64>,
    pub dist: Vec<InputDistribution>,
}

impl ReceivedSignal {
    pub fn deterministic(c: Vec<Complex64>) -> Self {
        let n = c.len();
        Self { c, dist: vec![InputDistribution::unit_cw(); n] }
    }

    /// One tone of amplitude `c` carrying a unit-power symbol from `dist`.
    pub fn single(c: Complex64, dist: InputDistribution) -> Self {
        Self { c: vec![c], dist: vec![dist] }
    }

    pub fn is_deterministic(&self) -> bool {
        self.dist.iter().all(|d| d.is_deterministic())
    }

    /// `y(t)` on the baseband-equivalent grid with period 1.
    pub fn waveform(&self) -> impl Fn(f64) -> f64 + '_ {
        let n = self.c.len();
        let k0 = 2 * n + 1;
        move |t: f64| {
            let mut acc = 0.0;
            for (i, c) in self.c.iter().enumerate() {
                let w = std::f64::consts::TAU * (k0 + i) as f64 * t;
                acc += c.re * w.cos() - c.im * w.sin();
            }
            std::f64::consts::SQRT_2 * acc
        }
    }
}

/// Received RF power, output voltage, DC power and RF-to-DC efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestReport {
    pub p_rf: f64,
    pub v_out: f64,
    pub p_dc: f64,
    pub e3: f64,
}

impl HarvestReport {
    pub fn new(p_rf: f64, v_out: f64, load: f64) -> Self {
        let p_dc = v_out * v_out / load;
        Self { p_rf, v_out, p_dc, e3: if p_rf > 0.0 { p_dc / p_rf } else { 0.0 } }
    }
}

/// `Σ_k |Σ_{n0+n1=k} c_{n0} c_{n1}|²`, i.e. the balanced quadruple sum.
pub fn balanced_quadruple_sum(c: &[Complex64]) -> f64 {
    let n = c.len();
    if n == 0 {
        return 0.0;
    }
    let mut s = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            s[i + j] += c[i] * c[j];
        }
    }
    s.iter().map(|z| z.norm_sqr()).sum()
}

/// Time-domain moments of a deterministic multisine via the periodic sampler.
pub fn sampled_moments(c: &[Complex64], order: usize, samples: Option<usize>) -> Result<Moments> {
    let sig = ReceivedSignal::deterministic(c.to_vec());
    let n = c.len().max(1);
    let s = samples.unwrap_or_else(|| numerics::default_samples(n, order));
    numerics::time_average(sig.waveform(), 1.0, s, order, n)
}

/// Even moments of a deterministic multisine: closed forms for orders 2 and 4,
/// the periodic sampler for order 6.
pub fn moments_deterministic(signal: &ReceivedSignal, order: usize) -> Result<Moments> {
    if !matches!(order, 2 | 4 | 6) {
        return Err(WptError::Order(order));
    }
    if !signal.is_deterministic() {
        return Err(WptError::RandomSignal("moments_deterministic needs unmodulated tones".into()));
    }
    let c: Vec<Complex64> = signal.c.iter().zip(&signal.dist).map(|(c, d)| c * d.power().sqrt()).collect();
    let m2 = c.iter().map(|z| z.norm_sqr()).sum();
    let m4 = if order >= 4 { 1.5 * balanced_quadruple_sum(&c) } else { 0.0 };
    let m6 = if order >= 6 { sampled_moments(&c, 6, None)?.m6 } else { 0.0 };
    Ok(Moments { order, m2, m4, m6 })
}

/// `(E|x|², E|x|⁴)` of a single-subband input.
pub fn moments_distribution(dist: &InputDistribution) -> Result<(f64, f64)> {
    dist.validate()?;
    Ok((dist.abs_moment(2)?, dist.abs_moment(4)?))
}

/// Time-averaged moments of a single tone with random amplitude `c·ξ`.
fn moments_single_stochastic(c: Complex64, dist: &InputDistribution, order: usize) -> Result<Moments> {
    let a2 = c.norm_sqr();
    let conv = MomentConvention::Passband;
    Ok(Moments {
        order,
        m2: conv.k(2) * a2 * dist.abs_moment(2)?,
        m4: if order >= 4 { conv.k(4) * a2 * a2 * dist.abs_moment(4)? } else { 0.0 },
        m6: if order >= 6 { conv.k(6) * a2 * a2 * a2 * dist.abs_moment(6)? } else { 0.0 },
    })
}

/// Moments used by [`harvest`]: deterministic multisines of any length, or a
/// single active tone with a random symbol.
pub fn signal_moments(signal: &ReceivedSignal, order: usize) -> Result<Moments> {
    if signal.c.len() != signal.dist.len() {
        return Err(WptError::Dimension("one symbol law per tone required".into()));
    }
    if signal.is_deterministic() {
        return moments_deterministic(signal, order);
    }
    let active: Vec<usize> = (0..signal.c.len()).filter(|&n| signal.c[n].norm_sqr() > 0.0).collect();
    match active.as_slice() {
        [] => Ok(Moments { order, ..Default::default() }),
        [n] => moments_single_stochastic(signal.c[*n], &signal.dist[*n], order),
        _ => Err(WptError::Unsupported("multi-tone modulated input; use monte_carlo_harvest".into())),
    }
}

/// DC output of the rectenna for a received signal.
pub fn harvest(model: &EhTaylorModel, signal: &ReceivedSignal) -> Result<HarvestReport> {
    model.validate()?;
    let m = signal_moments(signal, model.order)?;
    Ok(HarvestReport::new(m.m2, model.v_out(&m), model.load))
}

/// Harvest from moments supplied directly.
pub fn harvest_moments(model: &EhTaylorModel, m: &Moments) -> HarvestReport {
    HarvestReport::new(m.m2, model.v_out(m), model.load)
}

/// Monte Carlo harvest with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McHarvest {
    pub report: HarvestReport,
    pub moments: Moments,
    pub v_out_std_err: f64,
    pub p_dc_std_err: f64,
    pub trials: usize,
}

/// Draw symbols, synthesize `y(t)` at receive antenna `q`, time-average per
/// draw, then average the moments across draws.
pub fn monte_carlo_harvest_rx(
    model: &EhTaylorModel,
    signal: &SignalSpec,
    channel: &ChannelResponse,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<McHarvest> {
    model.validate()?;
    if trials == 0 {
        return Err(WptError::param("trials", "must be >= 1"));
    }
    let base = signal.received(channel, q)?;
    let order = model.order;
    let n = base.c.len().max(1);
    let samples = numerics::default_samples(n, order);
    let cfg = numerics::SolverConfig::with_seed(seed);
    let draws: Vec<Result<Moments>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = cfg.rng(t as u64);
            let c: Vec<Complex64> = base.c.iter().zip(&base.dist).map(|(c, d)| c * d.sample(&mut rng)).collect();
            sampled_moments(&c, order, Some(samples))
        })
        .collect();
    let mut per_trial = Vec::with_capacity(trials);
    for d in draws {
        per_trial.push(d?);
    }
    let tf = trials as f64;
    let mean = Moments {
        order,
        m2: per_trial.iter().map(|m| m.m2).sum::<f64>() / tf,
        m4: per_trial.iter().map(|m| m.m4).sum::<f64>() / tf,
        m6: per_trial.iter().map(|m| m.m6).sum::<f64>() / tf,
    };
    let v = model.v_out(&mean);
    let var = if trials > 1 {
        per_trial.iter().map(|m| (model.v_out(m) - v).powi(2)).sum::<f64>() / (tf - 1.0)
    } else {
        0.0
    };
    let v_se = (var / tf).sqrt();
    Ok(McHarvest {
        report: HarvestReport::new(mean.m2, v, model.load),
        moments: mean,
        v_out_std_err: v_se,
        p_dc_std_err: 2.0 * v.abs() * v_se / model.load,
        trials,
    })
}

/// [`monte_carlo_harvest_rx`] for a single-receive-antenna channel.
pub fn monte_carlo_harvest(
    model: &EhTaylorModel,
    signal: &SignalSpec,
    channel: &ChannelResponse,
    trials: usize,
    seed: u64,
) -> Result<McHarvest> {
    if channel.n_rx() != 1 {
        return Err(WptError::Shape(format!("expected Q = 1, got {}; use monte_carlo_harvest_rx", channel.n_rx())));
    }
    monte_carlo_harvest_rx(model, signal, channel, 0, trials, seed)
}

/// Jensen lower bound `Σ_i β_i·P^{i/2}` on `v_out` for received power `P`.
pub fn jensen_lower_bound(model: &EhTaylorModel, p_rf: f64) -> f64 {
    (2..=model.order).step_by(2).map(|i| model.beta(i) * p_rf.max(0.0).powf(i as f64 / 2.0)).sum()
}
