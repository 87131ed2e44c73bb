//! Wireless-powered crowd sensing: energy rewards for sensing, compression and
//! upload, with threshold-based scheduling of the sensors.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WptError};
use crate::numerics::{self, SolverConfig};

/// Per-sensor parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensor {
    /// Utility weight `a_n`.
    pub a: f64,
    /// Utility scale per sensed bit `b_n`.
    pub b: f64,
    /// Channel power gain `g_n`.
    pub gain: f64,
    /// Sensing rate in bits/s.
    pub sensing_rate: f64,
    /// Sensing energy per bit, joules.
    pub q_sense: f64,
    /// Requested energy reward per bit, joules.
    pub q_reward: f64,
    pub f_clk: f64,
    pub gamma: f64,
    /// Compression ratio `R_n ∈ [1, R_max]`.
    pub compression: f64,
}

/// One sensing round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingScenario {
    pub sensors: Vec<Sensor>,
    /// Round duration `T` in seconds.
    pub round: f64,
    /// Power-transfer duration `T_0` in seconds.
    pub wpt_duration: f64,
    /// Base-station power budget, watts.
    pub power: f64,
    pub bandwidth: f64,
    pub noise_var: f64,
    /// RF-to-DC efficiency.
    pub e3: f64,
    /// Price of energy in utility per joule.
    pub price: f64,
    /// Compression exponent `ε`.
    pub epsilon: f64,
    pub r_max: f64,
}

/// `C(R, ε) = e^{εR} − e^{ε}` cycles per bit.
pub fn compression_cycles(r: f64, eps: f64) -> f64 {
    if r == 1.0 {
        0.0
    } else {
        (eps * r).exp() - eps.exp()
    }
}

impl SensingScenario {
    pub fn k(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("round", self.round),
            ("wpt_duration", self.wpt_duration),
            ("power", self.power),
            ("bandwidth", self.bandwidth),
            ("noise_var", self.noise_var),
            ("e3", self.e3),
            ("price", self.price),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WptError::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.r_max >= 1.0 && self.r_max.is_finite()) {
            return Err(WptError::param("r_max", format!("must be >= 1, got {}", self.r_max)));
        }
        if self.sensors.is_empty() {
            return Err(WptError::param("sensors", "must be non-empty"));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            for (name, v) in [
                ("a", s.a),
                ("b", s.b),
                ("gain", s.gain),
                ("sensing_rate", s.sensing_rate),
                ("q_sense", s.q_sense),
                ("q_reward", s.q_reward),
                ("f_clk", s.f_clk),
                ("gamma", s.gamma),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(WptError::param(&format!("sensors[{i}].{name}"), format!("must be positive and finite, got {v}")));
                }
            }
            if !(s.compression >= 1.0 && s.compression <= self.r_max) {
                return Err(WptError::param(
                    &format!("sensors[{i}].compression"),
                    format!("R_n = {} outside [1, R_max = {}]", s.compression, self.r_max),
                ));
            }
        }
        Ok(())
    }

    /// Energy per compression cycle `q_c = γ f²`.
    pub fn q_compress(&self, n: usize) -> f64 {
        let s = &self.sensors[n];
        s.gamma * s.f_clk * s.f_clk
    }

    /// Seconds per sensed bit `β_n`.
    pub fn beta(&self, n: usize) -> f64 {
        let s = &self.sensors[n];
        1.0 / s.sensing_rate + compression_cycles(s.compression, self.epsilon) / s.f_clk
    }

    /// Joules per sensed bit `ξ_n`, excluding transmission.
    pub fn xi(&self, n: usize) -> f64 {
        let s = &self.sensors[n];
        s.q_reward + s.q_sense + self.q_compress(n) * compression_cycles(s.compression, self.epsilon)
    }

    /// `f(x) = σ²(2^{x/W} − 1)`, transmit power per unit gain for rate `x`.
    pub fn tx_power_fn(&self, x: f64) -> f64 {
        self.noise_var * (x / self.bandwidth).exp_m1_2()
    }

    /// Energy spent by sensor `n` sensing `ell` bits and uploading over `t` seconds.
    pub fn spent_energy(&self, n: usize, ell: f64, t: f64) -> f64 {
        if ell <= 0.0 {
            return 0.0;
        }
        let s = &self.sensors[n];
        self.xi(n) * ell + t / s.gain * self.tx_power_fn(ell / (s.compression * t))
    }

    /// Harvested energy `e3·g·P·T_0`.
    pub fn harvested_energy(&self, n: usize, p: f64) -> f64 {
        self.e3 * self.sensors[n].gain * p * self.wpt_duration
    }
}

trait ExpM1Base2 {
    fn exp_m1_2(self) -> f64;
}

impl ExpM1Base2 for f64 {
    fn exp_m1_2(self) -> f64 {
        (self * std::f64::consts::LN_2).exp_m1()
    }
}

/// Scheduling priority `φ_n`; sensor `n` participates iff `φ_n ≥ λ*`.
pub fn priority(sc: &SensingScenario, n: usize) -> f64 {
    let s = &sc.sensors[n];
    let tx = sc.noise_var * std::f64::consts::LN_2 / (s.gain * sc.bandwidth * s.compression);
    s.a * s.b * sc.e3 * s.gain / (sc.xi(n) + tx) - sc.price
}

/// Allocation of one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorAllocation {
    pub scheduled: bool,
    /// Transmit power of the energy beam, watts.
    pub power: f64,
    /// Sensed bits `ℓ_n`.
    pub ell: f64,
    /// Upload duration, seconds.
    pub t: f64,
    pub compression: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingPolicy {
    pub sensors: Vec<SensorAllocation>,
    /// Multiplier of the power budget, utility per joule.
    pub lambda: f64,
    pub reward: f64,
}

/// Value of sensor `n` at upload time `t` with the round fully used:
/// `(value, ℓ, P_n)`.
fn sensor_value(sc: &SensingScenario, n: usize, lambda: f64, t: f64) -> (f64, f64, f64) {
    let s = &sc.sensors[n];
    let ell = (sc.round - t) / sc.beta(n);
    let p = sc.spent_energy(n, ell, t) / (sc.e3 * s.gain * sc.wpt_duration);
    let v = s.a * (s.b * ell).ln_1p() - (sc.price + lambda) * p * sc.wpt_duration;
    (if v.is_nan() { f64::NEG_INFINITY } else { v }, ell, p)
}

/// Best `(t, ℓ, P_n, value)` for sensor `n` at multiplier `λ`; zeros when no
/// positive value exists.
pub fn per_sensor_subproblem(sc: &SensingScenario, n: usize, lambda: f64, cfg: &SolverConfig) -> (f64, f64, f64, f64) {
    if priority(sc, n) <= lambda {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let fine = SolverConfig { rel_tol: cfg.rel_tol.min(1e-12), abs_tol: 1e-300, ..*cfg };
    let (t, v) = numerics::golden_section_max(|t| sensor_value(sc, n, lambda, t).0, 0.0, sc.round, &fine);
    if !(v > 0.0) || t >= sc.round {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let (_, ell, p) = sensor_value(sc, n, lambda, t);
    (t, ell, p, v)
}

fn allocations(sc: &SensingScenario, lambda: f64, cfg: &SolverConfig) -> Vec<SensorAllocation> {
    (0..sc.k())
        .into_par_iter()
        .map(|n| {
            let (t, ell, p, _) = per_sensor_subproblem(sc, n, lambda, cfg);
            SensorAllocation { scheduled: priority(sc, n) >= lambda, power: p, ell, t, compression: sc.sensors[n].compression }
        })
        .collect()
}

/// Joint power allocation, sensing and upload for fixed compression ratios.
pub fn optimize(sc: &SensingScenario, cfg: &SolverConfig) -> Result<SensingPolicy> {
    sc.validate()?;
    cfg.validate()?;
    let total = |l: f64| allocations(sc, l, cfg).iter().map(|a| a.power).sum::<f64>();
    let lambda = if total(0.0) <= sc.power {
        0.0
    } else {
        // Keep `hi` on the feasible side so the returned policy meets the budget.
        let (mut lo, mut hi) = (0.0, (0..sc.k()).map(|n| priority(sc, n)).fold(0.0, f64::max));
        let tol = cfg.rel_tol.min(1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let used = total(mid);
            if used <= sc.power {
                hi = mid;
                if used >= sc.power * (1.0 - tol) {
                    break;
                }
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    };
    let sensors = allocations(sc, lambda, cfg);
    if sensors.iter().all(|a| a.power == 0.0) {
        return Err(WptError::Degenerate("no sensor can be scheduled".into()));
    }
    let reward = reward(sc, &sensors)?;
    Ok(SensingPolicy { sensors, lambda, reward })
}

/// Alternates [`optimize`] with coordinate descent over each `R_n` on a
/// 32-point grid in `[1, R_max]`, for two sweeps.
pub fn optimize_with_compression(sc: &SensingScenario, cfg: &SolverConfig) -> Result<(SensingScenario, SensingPolicy)> {
    let mut cur = sc.clone();
    let mut best = optimize(&cur, cfg)?;
    let grid: Vec<f64> = (0..32).map(|i| 1.0 + (sc.r_max - 1.0) * i as f64 / 31.0).collect();
    for _sweep in 0..2 {
        for n in 0..sc.k() {
            for &r in &grid {
                let mut cand = cur.clone();
                cand.sensors[n].compression = r;
                if let Ok(p) = optimize(&cand, cfg) {
                    if p.reward > best.reward {
                        best = p;
                        cur = cand;
                    }
                }
            }
        }
    }
    Ok((cur, best))
}

/// Operator reward `Σ a_n log(1 + b_n ℓ_n) − c Σ P_n T_0`, after checking the
/// per-sensor time and energy constraints and the power budget.
pub fn reward(sc: &SensingScenario, alloc: &[SensorAllocation]) -> Result<f64> {
    if alloc.len() != sc.k() {
        return Err(WptError::Dimension(format!("{} allocations for {} sensors", alloc.len(), sc.k())));
    }
    let total: f64 = alloc.iter().map(|a| a.power).sum();
    if total > sc.power * (1.0 + 1e-9) {
        return Err(WptError::Infeasible(format!("total power {total} exceeds budget {}", sc.power)));
    }
    let mut r = 0.0;
    for (n, a) in alloc.iter().enumerate() {
        let (time, energy) = constraint_slack(sc, n, a);
        if time < -1e-9 * sc.round {
            return Err(WptError::Infeasible(format!("sensor {n} exceeds the round by {} s", -time)));
        }
        if energy < -1e-9 * sc.harvested_energy(n, a.power).max(f64::MIN_POSITIVE) {
            return Err(WptError::Infeasible(format!("sensor {n} spends {} J more than it harvests", -energy)));
        }
        let s = &sc.sensors[n];
        r += s.a * (s.b * a.ell).ln_1p() - sc.price * a.power * sc.wpt_duration;
    }
    Ok(r)
}

/// `(time slack in s, energy slack in J)` for sensor `n`, evaluated at its own
/// compression ratio.
pub fn constraint_slack(sc: &SensingScenario, n: usize, a: &SensorAllocation) -> (f64, f64) {
    let mut s = sc.clone();
    s.sensors[n].compression = a.compression;
    let time = sc.round - s.beta(n) * a.ell - a.t;
    let energy = s.harvested_energy(n, a.power) - s.spent_energy(n, a.ell, a.t);
    (time, energy)
}

/// Policy rows `sensor_id,scheduled,P_n_watts,ell_bits,t_n_s,R_n` and a final
/// `# lambda_star=…,reward=…` summary line.
pub fn write_policy_csv<W: Write>(mut writer: W, policy: &SensingPolicy) -> Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut writer);
        w.write_record(["sensor_id", "scheduled", "P_n_watts", "ell_bits", "t_n_s", "R_n"])?;
        for (i, a) in policy.sensors.iter().enumerate() {
            w.write_record([i.to_string(), a.scheduled.to_string(), a.power.to_string(), a.ell.to_string(), a.t.to_string(), a.compression.to_string()])?;
        }
        w.flush()?;
    }
    writeln!(writer, "# lambda_star={},reward={}", policy.lambda, policy.reward)?;
    Ok(())
}

/// Three heterogeneous sensors with a binding power budget.
pub fn canonical_scenario() -> SensingScenario {
    let sensor = |a: f64, gain: f64, compression: f64| Sensor {
        a,
        b: 1e-3,
        gain,
        sensing_rate: 1e4,
        q_sense: 1e-9,
        q_reward: 1e-9,
        f_clk: 1e8,
        gamma: 1e-28,
        compression,
    };
    SensingScenario {
        sensors: vec![sensor(1.0, 1e-3, 2.0), sensor(1.5, 5e-4, 1.5), sensor(2.0, 8e-5, 3.0)],
        round: 1.0,
        wpt_duration: 1.0,
        power: 0.05,
        bandwidth: 1e5,
        noise_var: 1e-12,
        e3: 0.5,
        price: 10.0,
        epsilon: 0.5,
        r_max: 4.0,
    }
}
