//! Wireless-powered mobile edge computing: local CPU-frequency control under
//! energy-causality constraints, offloading time split, and mode selection.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WptError};
use crate::numerics::{self, SolverConfig};

/// One computation task and its wireless-powered device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecScenario {
    /// Deadline `T` in seconds.
    pub deadline: f64,
    /// `p_k = Pr(X ≥ k)` for `k = 1..N`.
    pub tail_probs: Vec<f64>,
    /// Effective switched capacitance `γ`, energy per cycle is `γ f²`.
    pub gamma: f64,
    /// Harvested DC power in watts.
    pub p_dc: f64,
    /// Task size to offload in bits.
    pub bits: f64,
    pub bandwidth: f64,
    /// Channel power gain `g`.
    pub gain: f64,
    pub noise_var: f64,
}

impl MecScenario {
    pub fn n(&self) -> usize {
        self.tail_probs.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("deadline", self.deadline),
            ("gamma", self.gamma),
            ("p_dc", self.p_dc),
            ("bits", self.bits),
            ("bandwidth", self.bandwidth),
            ("gain", self.gain),
            ("noise_var", self.noise_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WptError::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        let p = &self.tail_probs;
        if p.is_empty() {
            return Err(WptError::param("tail_probs", "must be non-empty"));
        }
        if p[0] != 1.0 {
            return Err(WptError::param("tail_probs", format!("p_1 must equal 1, got {}", p[0])));
        }
        for k in 1..p.len() {
            if !(p[k] >= 0.0 && p[k] <= p[k - 1]) {
                return Err(WptError::param("tail_probs", format!("must be nonincreasing and >= 0; p_{} = {} after {}", k + 1, p[k], p[k - 1])));
            }
        }
        Ok(())
    }

    /// `σ²/g`.
    pub fn noise_over_gain(&self) -> f64 {
        self.noise_var / self.gain
    }

    /// `L ln2 / (W T)`.
    fn c(&self) -> f64 {
        self.bits * std::f64::consts::LN_2 / (self.bandwidth * self.deadline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MecMode {
    Local,
    Offload,
    Infeasible,
}

impl MecMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MecMode::Local => "local",
            MecMode::Offload => "offload",
            MecMode::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MecPolicy {
    pub mode: MecMode,
    /// CPU frequencies per cycle in Hz (local mode).
    pub frequencies: Vec<f64>,
    /// Offloading duration in seconds (offload mode).
    pub t_star: Option<f64>,
    /// Harvested minus consumed energy, joules.
    pub energy_savings: f64,
    /// Multiplier of the energy-harvesting constraint (local mode).
    pub lambda: Option<f64>,
}

impl MecPolicy {
    fn infeasible() -> Self {
        Self { mode: MecMode::Infeasible, frequencies: Vec::new(), t_star: None, energy_savings: 0.0, lambda: None }
    }
}

/// `(a, a')`: the local-computing feasibility and high-power thresholds.
pub fn local_regime_thresholds(sc: &MecScenario) -> (f64, f64) {
    let n = sc.n() as f64;
    let t3 = sc.deadline.powi(3);
    let s13: f64 = sc.tail_probs.iter().map(|p| p.cbrt()).sum();
    let sm23: f64 = sc.tail_probs.iter().map(|p| p.powf(-2.0 / 3.0)).sum();
    (sc.gamma * n.powi(3) / t3, sc.gamma / t3 * s13 * s13 * sm23)
}

/// `f_k = (Σ_m (p_m+λ)^{1/3} / T)·(p_k+λ)^{−1/3}`.
pub fn frequencies_for_lambda(sc: &MecScenario, lambda: f64) -> Vec<f64> {
    let s: f64 = sc.tail_probs.iter().map(|p| (p + lambda).cbrt()).sum();
    sc.tail_probs.iter().map(|p| s / sc.deadline / (p + lambda).cbrt()).collect()
}

/// Expected local energy `Σ γ p_k f_k²`.
pub fn local_energy(sc: &MecScenario, f: &[f64]) -> f64 {
    sc.tail_probs.iter().zip(f).map(|(p, f)| sc.gamma * p * f * f).sum()
}

/// Largest violation of the prefix energy-causality constraints, in joules.
pub fn max_causality_violation(sc: &MecScenario, f: &[f64]) -> f64 {
    let mut used = 0.0;
    let mut time = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for fk in f {
        used += sc.gamma * fk * fk;
        time += 1.0 / fk;
        worst = worst.max(used - sc.p_dc * time);
    }
    worst
}

fn local_policy(sc: &MecScenario, f: Vec<f64>, lambda: f64) -> MecPolicy {
    let e = local_energy(sc, &f);
    MecPolicy { mode: MecMode::Local, frequencies: f, t_star: None, energy_savings: sc.p_dc * sc.deadline - e, lambda: Some(lambda) }
}

/// Minimum-energy CPU frequencies for local computing.
pub fn optimize_local(sc: &MecScenario, cfg: &SolverConfig) -> Result<MecPolicy> {
    sc.validate()?;
    let (a, a1) = local_regime_thresholds(sc);
    if sc.p_dc < a {
        return Ok(MecPolicy::infeasible());
    }
    if sc.p_dc >= a1 {
        return Ok(local_policy(sc, frequencies_for_lambda(sc, 0.0), 0.0));
    }
    // Total-energy constraint tight: γ Σ f_k² = P_dc·T.
    let excess = |lam: f64| {
        let f = frequencies_for_lambda(sc, lam);
        (sc.gamma * f.iter().map(|x| x * x).sum::<f64>() - sc.p_dc * sc.deadline) / (sc.p_dc * sc.deadline)
    };
    let mut hi = 1.0;
    while excess(hi) > 0.0 && hi < 1e300 {
        hi *= 4.0;
    }
    let lambda = if excess(hi) > 0.0 {
        f64::INFINITY
    } else {
        let tight = SolverConfig { abs_tol: 1e-15, rel_tol: 1e-15, max_iters: 4000, ..*cfg };
        numerics::bisect(excess, 0.0, hi, &tight)?
    };
    let f = if lambda.is_finite() { frequencies_for_lambda(sc, lambda) } else { vec![sc.n() as f64 / sc.deadline; sc.n()] };
    let policy = local_policy(sc, f, lambda);
    if max_causality_violation(sc, &policy.frequencies) > 1e-9 * sc.p_dc * sc.deadline {
        log::warn!("closed-form local policy violates energy causality; using the numeric solver");
        return solve_local_numeric(sc);
    }
    Ok(policy)
}

/// Local computing by a log-barrier Newton method on `y_k = 1/f_k`, in
/// units where `T = 1` and `γ = 1`.
pub fn solve_local_numeric(sc: &MecScenario) -> Result<MecPolicy> {
    sc.validate()?;
    let n = sc.n();
    let nf = n as f64;
    let pt = sc.p_dc * sc.deadline.powi(3) / sc.gamma;
    if pt <= nf.powi(3) * (1.0 + 1e-12) {
        if pt >= nf.powi(3) {
            return Ok(local_policy(sc, vec![nf / sc.deadline; n], f64::INFINITY));
        }
        return Ok(MecPolicy::infeasible());
    }
    let p = &sc.tail_probs;
    let phi = |z: &[f64], t: f64| -> Option<f64> {
        let mut v = 0.0;
        let (mut sz, mut sinv) = (0.0, 0.0);
        for k in 0..n {
            if z[k] <= 0.0 {
                return None;
            }
            v += t * p[k] / (z[k] * z[k]) - z[k].ln();
            sz += z[k];
            sinv += 1.0 / (z[k] * z[k]);
            let c = pt * sz - sinv;
            if c <= 0.0 {
                return None;
            }
            v -= c.ln();
        }
        if sz >= 1.0 {
            return None;
        }
        Some(v - (1.0 - sz).ln())
    };
    let c0 = (nf * pt.powf(-1.0 / 3.0) + 1.0) / 2.0;
    let mut z = vec![c0 / nf; n];
    let f0 = |z: &[f64]| p.iter().zip(z).map(|(p, z)| p / (z * z)).sum::<f64>();
    let mut t = 1.0 / f0(&z);
    let m_constraints = (2 * n + 1) as f64;
    for _outer in 0..60 {
        for _newton in 0..200 {
            let mut g: DVector<f64> = DVector::zeros(n);
            let mut h: DMatrix<f64> = DMatrix::zeros(n, n);
            for k in 0..n {
                g[k] += -2.0 * t * p[k] / z[k].powi(3) - 1.0 / z[k];
                h[(k, k)] += 6.0 * t * p[k] / z[k].powi(4) + 1.0 / (z[k] * z[k]);
            }
            let sz: f64 = z.iter().sum();
            let d = 1.0 - sz;
            for i in 0..n {
                g[i] += 1.0 / d;
                for j in 0..n {
                    h[(i, j)] += 1.0 / (d * d);
                }
            }
            let (mut s, mut sinv) = (0.0, 0.0);
            for m in 0..n {
                s += z[m];
                sinv += 1.0 / (z[m] * z[m]);
                let c = pt * s - sinv;
                let dc: Vec<f64> = (0..=m).map(|k| pt + 2.0 / z[k].powi(3)).collect();
                for i in 0..=m {
                    g[i] -= dc[i] / c;
                    h[(i, i)] += 6.0 / z[i].powi(4) / c;
                    for j in 0..=m {
                        h[(i, j)] += dc[i] * dc[j] / (c * c);
                    }
                }
            }
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => -&g,
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let cur = phi(&z, t).ok_or_else(|| WptError::NonFinite("barrier iterate left the domain".into()))?;
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = z.iter().zip(step.iter()).map(|(z, s)| z + alpha * s).collect();
                if let Some(v) = phi(&cand, t) {
                    if v <= cur - 0.25 * alpha * decrement {
                        z = cand;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    break;
                }
            }
            if alpha < 1e-20 {
                break;
            }
        }
        if m_constraints / t <= 1e-10 * f0(&z) {
            break;
        }
        t *= 10.0;
    }
    let f: Vec<f64> = z.iter().map(|z| 1.0 / (z * sc.deadline)).collect();
    Ok(local_policy(sc, f, f64::NAN))
}

/// Energy savings `E_WPT(t) − E_off(t)` for offloading duration `t`.
pub fn offload_savings(sc: &MecScenario, t: f64) -> f64 {
    let s = sc.noise_over_gain();
    sc.p_dc * sc.deadline + (s - sc.p_dc) * t - s * t * (sc.bits / (sc.bandwidth * t)).exp2()
}

/// Minimum harvested power for which offloading can save energy.
pub fn offload_threshold(sc: &MecScenario, cfg: &SolverConfig) -> Result<f64> {
    sc.validate()?;
    let c = sc.c();
    let w = numerics::lambert_w0(-(-1.0 - c).exp(), cfg)?;
    // 1 + (c+w)·e^{c+w+1} equals −c/w because w·e^w = −e^{−1−c}; the
    // quotient avoids cancellation when c is small.
    Ok(-sc.noise_over_gain() * c / w)
}

/// Unconstrained maximizer of [`offload_savings`] over `t > 0`.
pub fn offload_duration(sc: &MecScenario, cfg: &SolverConfig) -> Result<f64> {
    let s = sc.noise_over_gain();
    let e = std::f64::consts::E;
    let w = numerics::lambert_w0(sc.p_dc / (s * e) - 1.0 / e, cfg)?;
    Ok(std::f64::consts::LN_2 * sc.bits / (sc.bandwidth * (1.0 + w)))
}

pub fn optimize_offload(sc: &MecScenario, cfg: &SolverConfig) -> Result<MecPolicy> {
    sc.validate()?;
    if sc.p_dc < offload_threshold(sc, cfg)? {
        return Ok(MecPolicy::infeasible());
    }
    let t = offload_duration(sc, cfg)?;
    let savings = offload_savings(sc, t);
    if !(t < sc.deadline) || savings < 0.0 {
        return Ok(MecPolicy::infeasible());
    }
    Ok(MecPolicy { mode: MecMode::Offload, frequencies: Vec::new(), t_star: Some(t), energy_savings: savings, lambda: None })
}

/// Feasible mode with the larger energy savings.
pub fn select_mode(sc: &MecScenario, cfg: &SolverConfig) -> Result<MecPolicy> {
    let local = optimize_local(sc, cfg)?;
    let off = optimize_offload(sc, cfg)?;
    Ok(match (local.mode, off.mode) {
        (MecMode::Infeasible, _) => off,
        (_, MecMode::Infeasible) => local,
        _ if off.energy_savings > local.energy_savings => off,
        _ => local,
    })
}

/// Policy rows `scenario,mode,t_star_s,frequencies_hz,savings_joules`;
/// frequencies are `;`-separated.
pub fn write_policies_csv<W: Write>(writer: W, policies: &[MecPolicy]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "mode", "t_star_s", "frequencies_hz", "savings_joules"])?;
    for (i, p) in policies.iter().enumerate() {
        let f: Vec<String> = p.frequencies.iter().map(|x| x.to_string()).collect();
        w.write_record([
            i.to_string(),
            p.mode.as_str().to_string(),
            p.t_star.map(|t| t.to_string()).unwrap_or_default(),
            f.join(";"),
            p.energy_savings.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
