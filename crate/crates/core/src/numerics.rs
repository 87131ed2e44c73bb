//! Scalar and vector solver utilities shared by the optimizers.
//!
//! Everything here is pure: randomness enters only through the seed stored
//! in [`SolverConfig`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WptError};

/// Tolerances, iteration limits and seed for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-9, max_iters: 5000, restarts: 8, seed: 0 }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(WptError::param("abs_tol", "must be > 0"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(WptError::param("rel_tol", "must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(WptError::param("max_iters", "must be >= 1"));
        }
        if self.restarts == 0 {
            return Err(WptError::param("restarts", "must be >= 1"));
        }
        Ok(())
    }

    /// Seeded generator for restart `k`, independent of every other `k`.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Principal branch of the Lambert W function via Halley iteration.
pub fn lambert_w0(x: f64, cfg: &SolverConfig) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if !x.is_finite() {
        return Err(WptError::Domain(format!("lambert_w0({x})")));
    }
    if x < branch {
        if branch - x <= cfg.abs_tol {
            return Ok(-1.0);
        }
        return Err(WptError::Domain(format!("lambert_w0 needs x >= -1/e, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    } else if x < std::f64::consts::E {
        x.ln_1p() * (1.0 - 0.1 * x.ln_1p().max(0.0) / (1.0 + x.ln_1p().max(0.0)))
    } else {
        let l = x.ln();
        l - l.ln()
    };
    for _ in 0..200 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let dw = f / denom;
        w -= dw;
        if w < -1.0 {
            w = -1.0;
        }
        if dw.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// Root of `f` on `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &SolverConfig) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if !fa.is_finite() || !fb.is_finite() {
        return Err(WptError::NonFinite("bisect endpoint".into()));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(WptError::Bracket { f_lo: fa, f_hi: fb });
    }
    let mut mid = 0.5 * (a + b);
    for _ in 0..cfg.max_iters.max(2000) {
        mid = 0.5 * (a + b);
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(WptError::NonFinite("bisect midpoint".into()));
        }
        if fm.abs() <= cfg.abs_tol || b - a <= cfg.rel_tol * mid.abs() || mid <= a || mid >= b {
            return Ok(mid);
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(mid)
}

/// Maximizer of a unimodal `f` on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &SolverConfig) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..cfg.max_iters.max(300) {
        if (b - a) <= cfg.rel_tol * 0.5 * (a.abs() + b.abs()) || (b - a) <= cfg.abs_tol * 1e-3 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    let mut best = (0.5 * (a + b), f(0.5 * (a + b)));
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Euclidean projection onto `{x >= 0, sum(x) <= budget}`.
pub fn project_capped_simplex(x: &mut [f64], budget: f64) {
    for v in x.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    if total <= budget {
        return;
    }
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - budget) / (i as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
    let s: f64 = x.iter().sum();
    if s > budget {
        let k = budget / s;
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// Euclidean projection onto the ball `{sum(x^2) <= budget}`.
pub fn project_ball(x: &mut [f64], budget: f64) {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if n2 > budget {
        let k = (budget / n2).sqrt();
        x.iter_mut().for_each(|v| *v *= k);
        let n2b: f64 = x.iter().map(|v| v * v).sum();
        if n2b > budget {
            let k = (budget / n2b).sqrt() * (1.0 - f64::EPSILON);
            x.iter_mut().for_each(|v| *v *= k);
        }
    }
}

/// Euclidean projection onto `{x >= 0, sum(x^2) <= budget}`.
pub fn project_orthant_ball(x: &mut [f64], budget: f64) {
    for v in x.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    project_ball(x, budget);
}

/// Result of a projected-gradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct PgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Relative size of the last projected step, `‖Π(x + t·g) − x‖ / max(‖x‖, abs_tol)`.
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Projected gradient ascent from `x0` with Barzilai–Borwein trial steps and
/// Armijo backtracking. `f` returns the objective and its gradient.
pub fn projected_ascent<F, P>(f: &F, project: &P, x0: &[f64], cfg: &SolverConfig) -> Result<PgOutcome>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + ?Sized,
    P: Fn(&mut [f64]) + ?Sized,
{
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    check_finite(fx, &g)?;
    let scale = norm(&x).max(cfg.abs_tol);
    let gn = norm(&g);
    let mut step = if gn > 0.0 { scale / gn } else { 1.0 };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut stall = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..80 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            project(&mut y);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if norm(&d) == 0.0 {
                accepted = Some((y, fx, g.clone(), d));
                break;
            }
            let (fy, gy) = f(&y);
            check_finite(fy, &gy)?;
            if fy >= fx + 1e-4 * gd && fy >= fx {
                accepted = Some((y, fy, gy, d));
                break;
            }
            step *= 0.5;
        }
        let Some((y, fy, gy, d)) = accepted else {
            residual = 0.0;
            break;
        };
        let dn = norm(&d);
        residual = dn / norm(&y).max(cfg.abs_tol);
        let gain = fy - fx;
        let s_y: f64 = d.iter().zip(gy.iter().zip(&g)).map(|(s, (a, b))| s * (b - a)).sum();
        let s_s = dn * dn;
        x = y;
        fx = fy;
        g = gy;
        if residual <= cfg.rel_tol || dn == 0.0 {
            break;
        }
        if gain.abs() <= 1e-15 * fx.abs() {
            stall += 1;
            if stall > 20 {
                break;
            }
        } else {
            stall = 0;
        }
        step = if s_y > 0.0 { s_s / s_y } else { step * 4.0 };
        if !step.is_finite() || step <= 0.0 {
            step = scale / norm(&g).max(1e-300);
        }
    }
    Ok(PgOutcome { x, value: fx, residual, iterations })
}

fn check_finite(f: f64, g: &[f64]) -> Result<()> {
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(WptError::NonFinite("objective or gradient".into()));
    }
    Ok(())
}

/// Best of several projected-ascent runs, one per starting point.
pub fn best_of_starts<F, P>(f: &F, project: &P, starts: &[Vec<f64>], cfg: &SolverConfig) -> Result<PgOutcome>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + ?Sized,
    P: Fn(&mut [f64]) + ?Sized,
{
    let mut best: Option<PgOutcome> = None;
    for x0 in starts {
        let out = projected_ascent(f, project, x0, cfg)?;
        if best.as_ref().is_none_or(|b| out.value > b.value) {
            best = Some(out);
        }
    }
    best.ok_or_else(|| WptError::Degenerate("no starting point".into()))
}

/// Maximize a smooth objective over `{x >= 0, sum(x) <= budget}`.
///
/// The first start is the uniform point `budget/dim`; the remaining
/// `restarts − 1` are random points in the feasible set.
pub fn projected_gradient_max<F>(objective: F, dim: usize, budget: f64, cfg: &SolverConfig) -> Result<PgOutcome>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    if dim == 0 {
        return Err(WptError::Dimension("dim must be >= 1".into()));
    }
    if !(budget > 0.0) {
        return Err(WptError::param("budget", "must be > 0"));
    }
    let mut rng = cfg.rng(0);
    let mut starts = vec![vec![budget / dim as f64; dim]];
    for _ in 1..cfg.restarts {
        let e: Vec<f64> = (0..dim).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let s: f64 = e.iter().sum();
        let r: f64 = rng.gen();
        starts.push(e.iter().map(|v| budget * r.sqrt() * v / s).collect());
    }
    let project = |x: &mut [f64]| project_capped_simplex(x, budget);
    best_of_starts(&objective, &project, &starts, cfg)
}

/// Even-order time averages `avg(y^i)` of a real periodic signal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub order: usize,
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
}

impl Moments {
    pub fn get(&self, i: usize) -> f64 {
        match i {
            2 => self.m2,
            4 => self.m4,
            6 => self.m6,
            _ => 0.0,
        }
    }
}

/// Minimum samples per period accepted by [`time_average`].
pub fn min_samples(n_tones: usize, order: usize) -> usize {
    8 * n_tones.max(1) * order.max(2)
}

/// Default samples per period for an `n_tones` grid at moment order `order`.
pub fn default_samples(n_tones: usize, order: usize) -> usize {
    64 * n_tones.max(1) * order.max(2)
}

/// Uniform-sample average of `signal(t)^i` over one period for even `i <= order`.
pub fn time_average<F: Fn(f64) -> f64>(
    signal: F,
    period: f64,
    samples_per_period: usize,
    order: usize,
    n_tones: usize,
) -> Result<Moments> {
    if !matches!(order, 2 | 4 | 6) {
        return Err(WptError::Order(order));
    }
    let required = min_samples(n_tones, order);
    if samples_per_period < required {
        return Err(WptError::Sampling { samples: samples_per_period, required });
    }
    let dt = period / samples_per_period as f64;
    let (mut s2, mut s4, mut s6) = (0.0, 0.0, 0.0);
    for k in 0..samples_per_period {
        let y = signal(k as f64 * dt);
        let y2 = y * y;
        s2 += y2;
        s4 += y2 * y2;
        s6 += y2 * y2 * y2;
    }
    let n = samples_per_period as f64;
    Ok(Moments {
        order,
        m2: s2 / n,
        m4: if order >= 4 { s4 / n } else { 0.0 },
        m6: if order >= 6 { s6 / n } else { 0.0 },
    })
}

/// Symmetric unitary `Θ` with `bᵀ Θ a = e^{j·phase}`.
pub fn symmetric_unitary_from_pair(a: &[Complex64], b: &[Complex64], phase: f64) -> Result<DMatrix<Complex64>> {
    let l = a.len();
    if b.len() != l {
        return Err(WptError::Dimension(format!("a has {} entries, b has {}", l, b.len())));
    }
    if l == 0 {
        return Err(WptError::Dimension("empty vectors".into()));
    }
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(WptError::Domain("zero vector".into()));
    }
    let a: Vec<Complex64> = a.iter().map(|z| z / na).collect();
    let b: Vec<Complex64> = b.iter().map(|z| z / nb).collect();

    // Columns of W: conj(a), then the part of conj(b) orthogonal to it, then a completion.
    let mut cols: Vec<Vec<Complex64>> = vec![a.iter().map(|z| z.conj()).collect()];
    let bc: Vec<Complex64> = b.iter().map(|z| z.conj()).collect();
    let mut candidates = vec![bc];
    for i in 0..l {
        let mut e = vec![Complex64::new(0.0, 0.0); l];
        e[i] = Complex64::new(1.0, 0.0);
        candidates.push(e);
    }
    for mut v in candidates {
        if cols.len() == l {
            break;
        }
        for _ in 0..2 {
            for c in &cols {
                let p: Complex64 = c.iter().zip(&v).map(|(ci, vi)| ci.conj() * vi).sum();
                v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= p * ci);
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-10 {
            cols.push(v.iter().map(|z| z / n).collect());
        }
    }
    let w = DMatrix::from_fn(l, l, |i, j| cols[j][i]);
    let bv = nalgebra::DVector::from_vec(b.clone());
    let u = w.transpose() * bv;
    let rot = Complex64::from_polar(1.0, phase);
    let mut theta0 = DMatrix::<Complex64>::identity(l, l);
    let x = rot * u[0].conj();
    if l == 1 {
        theta0[(0, 0)] = x;
    } else {
        let y = rot * u[1].conj();
        theta0[(0, 0)] = x;
        if y.norm() > 1e-15 {
            theta0[(0, 1)] = y;
            theta0[(1, 0)] = y;
            theta0[(1, 1)] = -x.conj() * y / y.conj();
        } else {
            theta0[(1, 1)] = Complex64::new(1.0, 0.0);
        }
    }
    Ok(&w * theta0 * w.transpose())
}

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} f(x) dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Exponentially scaled modified Bessel function `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 3.75 {
        let y = (x / 3.75).powi(2);
        let i0 = 1.0
            + y * (3.5156229 + y * (3.0899424 + y * (1.2067492 + y * (0.2659732 + y * (0.0360768 + y * 0.0045813)))));
        i0 * (-ax).exp()
    } else {
        let y = 3.75 / ax;
        (1.0 / ax.sqrt())
            * (0.39894228
                + y * (0.01328592
                    + y * (0.00225319
                        + y * (-0.00157565
                            + y * (0.00916281
                                + y * (-0.02057706 + y * (0.02635537 + y * (-0.01647633 + y * 0.00392377))))))))
    }
}

/// Random point uniformly distributed in direction on the unit sphere of `C^n`.
pub fn random_unit_complex<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nv > 1e-12 {
            return v.into_iter().map(|z| z / nv).collect();
        }
    }
}
