//! Learned components: a small tanh network fitted to harvester data, and
//! end-to-end learned modulation trading symbol decoding against harvested power.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::cn01;
use crate::error::{Result, WptError};
use crate::hpa::HpaModel;
use crate::numerics::SolverConfig;
use crate::rate_energy;
use crate::rectenna::{EhTaylorModel, MomentConvention};
use crate::signal::InputDistribution;

/// Number of trainable parameters in [`EhSurrogate`].
pub const SURROGATE_PARAMS: usize = 17;

/// 1-3-2-1 tanh network mapping received RF power to DC power.
///
/// Inputs are standardized; outputs are mapped affinely from `[lo, hi]` onto
/// `[−0.9, 0.9]` so the final tanh can reach every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhSurrogate {
    pub w1: [f64; 3],
    pub b1: [f64; 3],
    pub w2: [[f64; 3]; 2],
    pub b2: [f64; 2],
    pub w3: [f64; 2],
    pub b3: f64,
    pub in_mean: f64,
    pub in_std: f64,
    pub out_mid: f64,
    pub out_half: f64,
}

struct Forward {
    h1: [f64; 3],
    h2: [f64; 2],
    o: f64,
}

const OUT_SPAN: f64 = 0.9;

impl EhSurrogate {
    /// Random parameters, identity scalings.
    pub fn random(seed: u64) -> Self {
        let mut rng = SolverConfig::with_seed(seed).rng(0);
        let mut p = [0.0; SURROGATE_PARAMS];
        for v in p.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut s = Self {
            w1: [0.0; 3],
            b1: [0.0; 3],
            w2: [[0.0; 3]; 2],
            b2: [0.0; 2],
            w3: [0.0; 2],
            b3: 0.0,
            in_mean: 0.0,
            in_std: 1.0,
            out_mid: 0.0,
            out_half: 1.0 / OUT_SPAN,
        };
        s.set_params(&p);
        s
    }

    pub fn params(&self) -> [f64; SURROGATE_PARAMS] {
        let mut p = [0.0; SURROGATE_PARAMS];
        p[0..3].copy_from_slice(&self.w1);
        p[3..6].copy_from_slice(&self.b1);
        p[6..9].copy_from_slice(&self.w2[0]);
        p[9..12].copy_from_slice(&self.w2[1]);
        p[12..14].copy_from_slice(&self.b2);
        p[14..16].copy_from_slice(&self.w3);
        p[16] = self.b3;
        p
    }

    pub fn set_params(&mut self, p: &[f64; SURROGATE_PARAMS]) {
        self.w1.copy_from_slice(&p[0..3]);
        self.b1.copy_from_slice(&p[3..6]);
        self.w2[0].copy_from_slice(&p[6..9]);
        self.w2[1].copy_from_slice(&p[9..12]);
        self.b2.copy_from_slice(&p[12..14]);
        self.w3.copy_from_slice(&p[14..16]);
        self.b3 = p[16];
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    fn forward(&self, x: f64) -> Forward {
        let mut h1 = [0.0; 3];
        for i in 0..3 {
            h1[i] = (self.w1[i] * x + self.b1[i]).tanh();
        }
        let mut h2 = [0.0; 2];
        for i in 0..2 {
            h2[i] = (self.w2[i].iter().zip(&h1).map(|(w, h)| w * h).sum::<f64>() + self.b2[i]).tanh();
        }
        let o = (self.w3[0] * h2[0] + self.w3[1] * h2[1] + self.b3).tanh();
        Forward { h1, h2, o }
    }

    fn scale_in(&self, p_in: f64) -> f64 {
        (p_in - self.in_mean) / self.in_std
    }

    fn unscale_out(&self, o: f64) -> f64 {
        self.out_mid + self.out_half * o
    }

    fn scale_out(&self, p_dc: f64) -> f64 {
        if self.out_half == 0.0 {
            0.0
        } else {
            (p_dc - self.out_mid) / self.out_half
        }
    }

    /// Network output in the scaled domain.
    pub fn raw(&self, x: f64) -> f64 {
        self.forward(x).o
    }

    /// Predicted DC power in watts.
    pub fn predict(&self, p_in: f64) -> f64 {
        self.unscale_out(self.raw(self.scale_in(p_in)))
    }

    /// `(P_dc, dP_dc/dP_in)`.
    pub fn predict_with_derivative(&self, p_in: f64) -> (f64, f64) {
        let x = self.scale_in(p_in);
        let f = self.forward(x);
        let d1: Vec<f64> = (0..3).map(|i| (1.0 - f.h1[i] * f.h1[i]) * self.w1[i]).collect();
        let mut d2 = [0.0; 2];
        for i in 0..2 {
            d2[i] = (1.0 - f.h2[i] * f.h2[i]) * self.w2[i].iter().zip(&d1).map(|(w, d)| w * d).sum::<f64>();
        }
        let d3 = (1.0 - f.o * f.o) * (self.w3[0] * d2[0] + self.w3[1] * d2[1]);
        (self.unscale_out(f.o), self.out_half * d3 / self.in_std)
    }

    /// Mean squared error in the scaled domain and its gradient.
    pub fn loss_and_gradient(&self, x: &[f64], t: &[f64]) -> (f64, [f64; SURROGATE_PARAMS]) {
        let mut g = [0.0; SURROGATE_PARAMS];
        let mut loss = 0.0;
        let n = x.len() as f64;
        for (&xi, &ti) in x.iter().zip(t) {
            let f = self.forward(xi);
            let e = f.o - ti;
            loss += e * e / n;
            let d3 = 2.0 * e / n * (1.0 - f.o * f.o);
            g[14] += d3 * f.h2[0];
            g[15] += d3 * f.h2[1];
            g[16] += d3;
            let mut d2 = [0.0; 2];
            for i in 0..2 {
                d2[i] = d3 * self.w3[i] * (1.0 - f.h2[i] * f.h2[i]);
                for j in 0..3 {
                    g[6 + 3 * i + j] += d2[i] * f.h1[j];
                }
                g[12 + i] += d2[i];
            }
            for j in 0..3 {
                let d1 = (d2[0] * self.w2[0][j] + d2[1] * self.w2[1][j]) * (1.0 - f.h1[j] * f.h1[j]);
                g[j] += d1 * xi;
                g[3 + j] += d1;
            }
        }
        (loss, g)
    }
}

/// `(P_in, P_dc)` training pair in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhSample {
    pub p_in_watts: f64,
    pub p_dc_watts: f64,
}

/// Full-batch gradient descent with heavy-ball momentum 0.9.
pub fn fit_eh_surrogate(samples: &[EhSample], epochs: usize, lr: f64, seed: u64) -> Result<EhSurrogate> {
    if samples.len() < 10 {
        return Err(WptError::param("samples", "need at least 10 samples"));
    }
    if !(lr > 0.0) {
        return Err(WptError::param("lr", "must be > 0"));
    }
    if samples.iter().any(|s| !s.p_in_watts.is_finite() || !s.p_dc_watts.is_finite()) {
        return Err(WptError::NonFinite("training samples".into()));
    }
    let n = samples.len() as f64;
    let mut net = EhSurrogate::random(seed);
    net.in_mean = samples.iter().map(|s| s.p_in_watts).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.p_in_watts - net.in_mean).powi(2)).sum::<f64>() / n;
    net.in_std = if var > 0.0 { var.sqrt() } else { net.in_mean.abs().max(1.0) };
    let lo = samples.iter().map(|s| s.p_dc_watts).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.p_dc_watts).fold(f64::NEG_INFINITY, f64::max);
    net.out_mid = 0.5 * (lo + hi);
    let constant = hi <= lo;
    net.out_half = if constant { 1.0 } else { 0.5 * (hi - lo) / OUT_SPAN };

    let x: Vec<f64> = samples.iter().map(|s| net.scale_in(s.p_in_watts)).collect();
    let t: Vec<f64> = samples.iter().map(|s| net.scale_out(s.p_dc_watts)).collect();
    let mut p = net.params();
    let mut vel = [0.0; SURROGATE_PARAMS];
    for epoch in 0..epochs {
        let (loss, g) = net.loss_and_gradient(&x, &t);
        if !loss.is_finite() {
            return Err(WptError::Divergence(format!("surrogate loss is {loss} at epoch {epoch}")));
        }
        for i in 0..SURROGATE_PARAMS {
            vel[i] = 0.9 * vel[i] - lr * g[i];
            p[i] += vel[i];
        }
        net.set_params(&p);
    }
    if !net.is_finite() {
        return Err(WptError::Divergence("surrogate parameters are not finite".into()));
    }
    if constant {
        net.out_half = 0.0;
    }
    Ok(net)
}

/// Noise-free `P_dc` of a CW tone of received power `P_in`, log-uniform on `[lo, hi]`.
pub fn taylor_training_data(model: &EhTaylorModel, n: usize, lo: f64, hi: f64, seed: u64) -> Vec<EhSample> {
    let mut rng = SolverConfig::with_seed(seed).rng(1);
    (0..n)
        .map(|_| {
            let p = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
            EhSample { p_in_watts: p, p_dc_watts: model.p_dc(model.v_out_tone(p.sqrt(), MomentConvention::Passband)) }
        })
        .collect()
}

pub fn write_samples_csv<W: Write>(writer: W, samples: &[EhSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<EhSample>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Harvester seen by the modulation trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Harvester {
    Taylor(EhTaylorModel),
    Surrogate(EhSurrogate),
}

/// Training hyperparameters for [`train_modulation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    /// Constellation size, a power of two.
    pub s: usize,
    pub power: f64,
    pub noise_var: f64,
    pub lambda: f64,
    pub batch: usize,
    pub iters: usize,
    /// Step size on points normalized to unit average power.
    pub lr: f64,
    pub seed: u64,
    pub hpa: Option<HpaModel>,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self { s: 16, power: 1e-4, noise_var: 1e-6, lambda: 0.0, batch: 256, iters: 3000, lr: 0.05, seed: 0, hpa: None }
    }
}

impl ModulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 || !self.s.is_power_of_two() {
            return Err(WptError::param("s", "must be a power of two >= 2"));
        }
        if !(self.power > 0.0) {
            return Err(WptError::param("power", "must be > 0"));
        }
        if !(self.noise_var > 0.0) {
            return Err(WptError::param("noise_var", "must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(WptError::param("lambda", "must be >= 0"));
        }
        if self.batch == 0 || self.iters == 0 {
            return Err(WptError::param("batch", "batch and iters must be >= 1"));
        }
        if !(self.lr > 0.0) {
            return Err(WptError::param("lr", "must be > 0"));
        }
        if let Some(h) = &self.hpa {
            h.validate()?;
        }
        Ok(())
    }
}

/// Trained constellation and its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedConstellation {
    /// Encoder output, `(1/S) Σ |x_s|² = P`.
    pub points: Vec<Complex64>,
    /// Points after the amplifier, as seen by the receiver.
    pub transmitted: Vec<Complex64>,
    pub power: f64,
    pub noise_var: f64,
    pub lambda: f64,
    pub rate: f64,
    pub p_dc: f64,
    /// Batch loss per iteration.
    pub trace: Vec<f64>,
}

const P_DC_FLOOR: f64 = 1e-30;

fn normalize(u: &mut [Complex64]) {
    let s = u.len() as f64;
    let m: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>() / s;
    if m > 0.0 {
        let k = m.sqrt().recip();
        u.iter_mut().for_each(|z| *z *= k);
    }
}

/// Amplifier output and the Wirtinger pair `(∂x'/∂x, ∂x'/∂x̄)`.
fn amplify(hpa: &Option<HpaModel>, x: Complex64) -> (Complex64, f64, Complex64) {
    match hpa {
        None => (x, 1.0, Complex64::new(0.0, 0.0)),
        Some(h) => {
            let r = x.norm();
            if r == 0.0 {
                let g = h.am_am_derivative(0.0);
                return (Complex64::new(0.0, 0.0), g, Complex64::new(0.0, 0.0));
            }
            let a = h.am_am(r);
            let g = a / r;
            let dg = (h.am_am_derivative(r) * r - a) / (r * r);
            (x * g, g + 0.5 * dg * r, x * x * (0.5 * dg / r))
        }
    }
}

/// Batch DC power and `∂P_dc/∂x̄'_k` for each transmitted point.
fn batch_energy(harvester: &Harvester, tx: &[Complex64], counts: &[usize], batch: usize) -> (f64, Vec<Complex64>) {
    let bf = batch as f64;
    match harvester {
        Harvester::Taylor(m) => {
            let conv = MomentConvention::Passband;
            let (b2, b4) = (m.beta(2) * conv.k(2), m.beta(4) * conv.k(4));
            let mut m2 = 0.0;
            let mut m4 = 0.0;
            for (x, &c) in tx.iter().zip(counts) {
                let a = x.norm_sqr();
                m2 += c as f64 * a / bf;
                m4 += c as f64 * a * a / bf;
            }
            let v = b2 * m2 + b4 * m4;
            let k = 2.0 * v / m.load;
            let grad = tx.iter().zip(counts).map(|(x, &c)| x * (k * c as f64 / bf * (b2 + 2.0 * b4 * x.norm_sqr()))).collect();
            (v * v / m.load, grad)
        }
        Harvester::Surrogate(s) => {
            let mut e = 0.0;
            let mut grad = Vec::with_capacity(tx.len());
            for (x, &c) in tx.iter().zip(counts) {
                let (f, df) = s.predict_with_derivative(x.norm_sqr());
                e += c as f64 * f / bf;
                grad.push(x * (df * c as f64 / bf));
            }
            (e, grad)
        }
    }
}

fn final_energy(harvester: &Harvester, tx: &[Complex64]) -> Result<f64> {
    match harvester {
        Harvester::Taylor(m) => {
            let s = tx.len() as f64;
            let dist = InputDistribution::Constellation { points: tx.to_vec(), probs: vec![1.0 / s; tx.len()] };
            rate_energy::energy_of_distribution(m, &dist, Complex64::new(1.0, 0.0))
        }
        Harvester::Surrogate(sur) => Ok(tx.iter().map(|x| sur.predict(x.norm_sqr())).sum::<f64>() / tx.len() as f64),
    }
}

/// Batch loss `mean CE + λ/P_dc` and its gradient `∂L/∂ū` on unit-power points.
fn batch_loss(
    harvester: &Harvester,
    cfg: &ModulationConfig,
    u: &[Complex64],
    symbols: &[usize],
    noise: &[Complex64],
) -> (f64, Vec<Complex64>) {
    let s = u.len();
    let sp = cfg.power.sqrt();
    let amp: Vec<(Complex64, f64, Complex64)> = u.iter().map(|z| amplify(&cfg.hpa, z * sp)).collect();
    let tx: Vec<Complex64> = amp.iter().map(|a| a.0).collect();
    let s2 = cfg.noise_var;
    let bf = symbols.len() as f64;
    let mut g_tx = vec![Complex64::new(0.0, 0.0); s];
    let mut ce = 0.0;
    let mut logits = vec![0.0; s];
    for (&sym, n) in symbols.iter().zip(noise) {
        let y = tx[sym] + n;
        for j in 0..s {
            logits[j] = -(y - tx[j]).norm_sqr() / s2;
        }
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
        ce += (mx + z.ln() - logits[sym]) / bf;
        let p: Vec<f64> = logits.iter().map(|l| (l - mx).exp() / z).collect();
        let xhat: Complex64 = p.iter().zip(&tx).map(|(p, x)| x * p).sum();
        for k in 0..s {
            let ind = if k == sym { 1.0 } else { 0.0 };
            g_tx[k] += (y - tx[k]) * ((p[k] - ind) / (s2 * bf));
        }
        g_tx[sym] -= (tx[sym] - xhat) / (s2 * bf);
    }
    let mut loss = ce;
    if cfg.lambda > 0.0 {
        let mut counts = vec![0usize; s];
        symbols.iter().for_each(|&k| counts[k] += 1);
        let (e, de) = batch_energy(harvester, &tx, &counts, symbols.len());
        if e < P_DC_FLOOR {
            log::warn!("batch DC power {e:e} W below floor; penalty clipped");
            loss += cfg.lambda / P_DC_FLOOR;
        } else {
            loss += cfg.lambda / e;
            let k = -cfg.lambda / (e * e);
            for (g, d) in g_tx.iter_mut().zip(de) {
                *g += d * k;
            }
        }
    }
    // Chain through the amplifier and the √P scaling.
    let grad = amp.iter().zip(&g_tx).map(|((_, a, b), g)| (g * *a + g.conj() * b) * sp).collect();
    (loss, grad)
}

/// Stochastic gradient descent on the constellation points with power
/// renormalization after every step.
pub fn train_modulation(harvester: &Harvester, cfg: &ModulationConfig) -> Result<LearnedConstellation> {
    cfg.validate()?;
    if let Harvester::Taylor(m) = harvester {
        m.validate()?;
    }
    let mut rng = SolverConfig::with_seed(cfg.seed).rng(7);
    let mut u: Vec<Complex64> = (0..cfg.s).map(|_| cn01(&mut rng)).collect();
    normalize(&mut u);
    let sn = (cfg.noise_var).sqrt();
    let mut trace = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let symbols: Vec<usize> = (0..cfg.batch).map(|_| rng.gen_range(0..cfg.s)).collect();
        let noise: Vec<Complex64> = (0..cfg.batch).map(|_| cn01(&mut rng) * sn).collect();
        let (loss, grad) = batch_loss(harvester, cfg, &u, &symbols, &noise);
        if !loss.is_finite() || grad.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(WptError::Divergence(format!("modulation loss is {loss} at iteration {it}")));
        }
        trace.push(loss);
        // Step along the real gradient 2·∂L/∂ū, clipped to keep early steps bounded.
        let gn = grad.iter().map(|g| 4.0 * g.norm_sqr()).sum::<f64>().sqrt();
        let clip = if gn * cfg.lr > 0.5 { 0.5 / (gn * cfg.lr) } else { 1.0 };
        for (z, g) in u.iter_mut().zip(&grad) {
            *z -= g * (2.0 * cfg.lr * clip);
        }
        normalize(&mut u);
    }
    let points: Vec<Complex64> = u.iter().map(|z| z * cfg.power.sqrt()).collect();
    let transmitted: Vec<Complex64> = points.iter().map(|x| amplify(&cfg.hpa, *x).0).collect();
    let s = cfg.s as f64;
    let dist = InputDistribution::Constellation { points: transmitted.clone(), probs: vec![1.0 / s; cfg.s] };
    let rate = rate_energy::mutual_information(&dist, Complex64::new(1.0, 0.0), cfg.noise_var)?;
    let p_dc = final_energy(harvester, &transmitted)?;
    Ok(LearnedConstellation { points, transmitted, power: cfg.power, noise_var: cfg.noise_var, lambda: cfg.lambda, rate, p_dc, trace })
}

/// Minimum-distance symbol error rate by Monte Carlo.
pub fn symbol_error_rate(points: &[Complex64], noise_var: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = SolverConfig::with_seed(seed).rng(3);
    let sn = noise_var.sqrt();
    let mut errors = 0usize;
    for _ in 0..samples {
        let k = rng.gen_range(0..points.len());
        let y = points[k] + cn01(&mut rng) * sn;
        let best = (0..points.len()).min_by(|&a, &b| (y - points[a]).norm_sqr().total_cmp(&(y - points[b]).norm_sqr())).unwrap();
        if (points[best] - points[k]).norm() > 0.0 {
            errors += 1;
        }
    }
    errors as f64 / samples as f64
}

/// Fraction of points within `0.1·max |x|` of the origin.
pub fn near_origin_fraction(points: &[Complex64]) -> f64 {
    let mx = points.iter().map(|z| z.norm()).fold(0.0, f64::max);
    points.iter().filter(|z| z.norm() <= 0.1 * mx).count() as f64 / points.len() as f64
}

/// Write `re,im` rows.
pub fn write_constellation_csv<W: Write>(writer: W, points: &[Complex64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["re", "im"])?;
    for p in points {
        w.write_record([p.re.to_string(), p.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
