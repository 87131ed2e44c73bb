//! Frequency-selective MIMO channels on a uniform tone grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WptError};

/// Evenly spaced tones `f_n = f0 + n·Δf`, each occupying bandwidth `f_w ≤ Δf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneGrid {
    pub f0: f64,
    pub delta_f: f64,
    pub n_tones: usize,
    pub bandwidth_fw: f64,
}

impl ToneGrid {
    pub fn new(f0: f64, delta_f: f64, n_tones: usize, bandwidth_fw: f64) -> Result<Self> {
        let g = Self { f0, delta_f, n_tones, bandwidth_fw };
        g.validate()?;
        Ok(g)
    }

    /// A 5.18 GHz grid with `n` tones spaced `delta_f` apart and `f_w = Δf`.
    pub fn with_tones(n: usize, delta_f: f64) -> Self {
        Self { f0: 5.18e9, delta_f, n_tones: n, bandwidth_fw: delta_f }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) {
            return Err(WptError::param("grid.f0", "must be > 0"));
        }
        if !(self.delta_f > 0.0) {
            return Err(WptError::param("grid.delta_f", "must be > 0"));
        }
        if self.n_tones == 0 {
            return Err(WptError::param("grid.n_tones", "must be >= 1"));
        }
        if !(self.bandwidth_fw > 0.0) || self.bandwidth_fw > self.delta_f {
            return Err(WptError::param("grid.bandwidth_fw", "must satisfy 0 < f_w <= delta_f"));
        }
        Ok(())
    }

    pub fn frequency(&self, n: usize) -> f64 {
        self.f0 + n as f64 * self.delta_f
    }

    /// Fundamental period of any signal on the grid.
    pub fn period(&self) -> f64 {
        1.0 / self.delta_f
    }
}

/// Per-path phase offsets `ζ_{q,m,n,l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PathPhases {
    /// All phases zero.
    Zero,
    /// One phase per path, shared by every (q, m, n).
    PerPath(Vec<f64>),
    /// Full table indexed `((l·N + n)·Q + q)·M + m`.
    Full(Vec<f64>),
}

/// Tapped-delay-line description of a multipath channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathProfile {
    pub delays: Vec<f64>,
    pub gains: Vec<f64>,
    pub phases: PathPhases,
}

impl MultipathProfile {
    pub fn n_paths(&self) -> usize {
        self.delays.len()
    }

    /// Random profile with `paths` taps, delays uniform in `[0, max_delay)`,
    /// Rayleigh-distributed gains normalized to unit total power and uniform phases.
    pub fn random(paths: usize, max_delay: f64, n: usize, q: usize, m: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delays: Vec<f64> = (0..paths).map(|_| rng.gen::<f64>() * max_delay).collect();
        let raw: Vec<f64> = (0..paths).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = raw.iter().sum();
        let gains = raw.iter().map(|p| (p / total).sqrt()).collect();
        let phases = (0..paths * n * q * m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        Self { delays, gains, phases: PathPhases::Full(phases) }
    }

    fn phase(&self, l: usize, n: usize, q: usize, m: usize, dims: (usize, usize, usize)) -> f64 {
        let (nn, qq, mm) = dims;
        match &self.phases {
            PathPhases::Zero => 0.0,
            PathPhases::PerPath(p) => p[l],
            PathPhases::Full(p) => p[((l * nn + n) * qq + q) * mm + m],
        }
    }
}

/// Per-tone `Q×M` channel matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    pub grid: ToneGrid,
    pub h: Vec<DMatrix<Complex64>>,
}

impl ChannelResponse {
    pub fn new(grid: ToneGrid, h: Vec<DMatrix<Complex64>>) -> Result<Self> {
        grid.validate()?;
        if h.len() != grid.n_tones {
            return Err(WptError::Dimension(format!("{} matrices for {} tones", h.len(), grid.n_tones)));
        }
        let (q, m) = h[0].shape();
        if q == 0 || m == 0 {
            return Err(WptError::Dimension("empty channel matrix".into()));
        }
        for (n, hn) in h.iter().enumerate() {
            if hn.shape() != (q, m) {
                return Err(WptError::Dimension(format!("tone {n} has shape {:?}, expected {:?}", hn.shape(), (q, m))));
            }
            if hn.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(WptError::NonFinite(format!("channel entry on tone {n}")));
            }
        }
        Ok(Self { grid, h })
    }

    /// Single-antenna channel from one complex gain per tone.
    pub fn siso(grid: ToneGrid, gains: &[Complex64]) -> Result<Self> {
        Self::new(grid, gains.iter().map(|g| DMatrix::from_element(1, 1, *g)).collect())
    }

    /// Single-receive-antenna channel from per-tone row vectors of length `M`.
    pub fn miso(grid: ToneGrid, rows: &[Vec<Complex64>]) -> Result<Self> {
        Self::new(grid, rows.iter().map(|r| DMatrix::from_row_slice(1, r.len(), r)).collect())
    }

    pub fn n_tones(&self) -> usize {
        self.h.len()
    }

    pub fn n_rx(&self) -> usize {
        self.h[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h[0].ncols()
    }

    pub fn entry(&self, n: usize, q: usize, m: usize) -> Complex64 {
        self.h[n][(q, m)]
    }

    /// Row `q` of tone `n` as a vector over transmit antennas.
    pub fn row(&self, n: usize, q: usize) -> Vec<Complex64> {
        (0..self.n_tx()).map(|m| self.h[n][(q, m)]).collect()
    }

    /// Scalar gain of a SISO channel on tone `n`.
    pub fn scalar(&self, n: usize) -> Complex64 {
        self.h[n][(0, 0)]
    }

    /// Per-tone scalar gains; requires `M = Q = 1`.
    pub fn siso_gains(&self) -> Result<Vec<Complex64>> {
        if self.n_tx() != 1 || self.n_rx() != 1 {
            return Err(WptError::Shape(format!("expected SISO, got {}x{}", self.n_rx(), self.n_tx())));
        }
        Ok((0..self.n_tones()).map(|n| self.scalar(n)).collect())
    }

    /// Every entry multiplied by a common complex factor.
    pub fn scaled(&self, k: Complex64) -> Self {
        Self { grid: self.grid, h: self.h.iter().map(|m| m * k).collect() }
    }

    pub fn to_json(&self) -> ChannelJson {
        ChannelJson {
            grid: self.grid,
            entries: self
                .h
                .iter()
                .map(|hn| (0..hn.nrows()).map(|q| (0..hn.ncols()).map(|m| [hn[(q, m)].re, hn[(q, m)].im]).collect()).collect())
                .collect(),
        }
    }

    pub fn from_json(doc: &ChannelJson) -> Result<Self> {
        let mut h = Vec::with_capacity(doc.entries.len());
        for (n, tone) in doc.entries.iter().enumerate() {
            let q = tone.len();
            let m = tone.first().map_or(0, |r| r.len());
            if tone.iter().any(|r| r.len() != m) {
                return Err(WptError::Dimension(format!("ragged rows in entries[{n}]")));
            }
            h.push(DMatrix::from_fn(q, m, |i, j| Complex64::new(tone[i][j][0], tone[i][j][1])));
        }
        Self::new(doc.grid, h)
    }
}

/// JSON form of a channel: `entries[n][q][m] = [re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub grid: ToneGrid,
    pub entries: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Evaluate `h_{q,m,n} = Σ_l α_l exp(j(−2π f_n τ_l + ζ_{q,m,n,l}))`.
pub fn response_from_multipath(profile: &MultipathProfile, grid: &ToneGrid, m: usize, q: usize) -> Result<ChannelResponse> {
    grid.validate()?;
    let l = profile.n_paths();
    if profile.gains.len() != l {
        return Err(WptError::Dimension(format!("{} delays but {} gains", l, profile.gains.len())));
    }
    match &profile.phases {
        PathPhases::PerPath(p) if p.len() != l => {
            return Err(WptError::Dimension(format!("{} per-path phases for {l} paths", p.len())))
        }
        PathPhases::Full(p) if p.len() != l * grid.n_tones * q * m => {
            return Err(WptError::Dimension(format!("phase table has {} entries, need {}", p.len(), l * grid.n_tones * q * m)))
        }
        _ => {}
    }
    if l > 0 {
        let lo = profile.delays.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = profile.delays.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let limit = 1.0 / grid.bandwidth_fw;
        if hi - lo >= limit {
            return Err(WptError::Narrowband { spread: hi - lo, limit });
        }
    }
    let dims = (grid.n_tones, q, m);
    let h = (0..grid.n_tones)
        .map(|n| {
            let f = grid.frequency(n);
            DMatrix::from_fn(q, m, |qi, mi| {
                (0..l)
                    .map(|li| {
                        let arg = -std::f64::consts::TAU * f * profile.delays[li] + profile.phase(li, n, qi, mi, dims);
                        Complex64::from_polar(profile.gains[li], arg)
                    })
                    .sum()
            })
        })
        .collect();
    ChannelResponse::new(*grid, h)
}

/// Draw one standard circularly-symmetric complex Gaussian sample.
pub fn cn01<R: rand::Rng>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Channel with i.i.d. CN(0, 1) entries.
pub fn rayleigh_iid(m: usize, q: usize, grid: &ToneGrid, seed: u64) -> Result<ChannelResponse> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rayleigh_with(m, q, grid, &mut rng)
}

/// Channel with i.i.d. CN(0, 1) entries drawn from a caller-supplied generator.
pub fn rayleigh_with<R: rand::Rng>(m: usize, q: usize, grid: &ToneGrid, rng: &mut R) -> Result<ChannelResponse> {
    if m == 0 || q == 0 {
        return Err(WptError::Dimension("M and Q must be >= 1".into()));
    }
    let h = (0..grid.n_tones).map(|_| DMatrix::from_fn(q, m, |_, _| cn01(rng))).collect();
    ChannelResponse::new(*grid, h)
}

/// Per-tone `‖h_n‖/√M` of a single-receive-antenna channel.
pub fn hardening_statistic(channel: &ChannelResponse) -> Result<Vec<f64>> {
    if channel.n_rx() != 1 {
        return Err(WptError::Shape(format!("hardening needs Q = 1, got Q = {}", channel.n_rx())));
    }
    let sm = (channel.n_tx() as f64).sqrt();
    Ok(channel.h.iter().map(|hn| hn.norm() / sm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> ToneGrid {
        ToneGrid::with_tones(n, 1e6)
    }

    #[test]
    fn single_path_trivial_profiles() {
        let p = MultipathProfile { delays: vec![0.0], gains: vec![1.0], phases: PathPhases::Zero };
        let ch = response_from_multipath(&p, &grid(3), 2, 2).unwrap();
        assert!(ch.h.iter().all(|m| m.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15)));

        let p = MultipathProfile { delays: vec![0.0], gains: vec![0.3], phases: PathPhases::PerPath(vec![0.9]) };
        let ch = response_from_multipath(&p, &grid(2), 1, 1).unwrap();
        assert!((ch.scalar(1) - Complex64::from_polar(0.3, 0.9)).norm() < 1e-15);
    }

    #[test]
    fn multipath_matches_direct_sum() {
        let g = grid(4);
        let p = MultipathProfile::random(2, 2e-7, 4, 1, 1, 5);
        let ch = response_from_multipath(&p, &g, 1, 1).unwrap();
        for n in 0..4 {
            let f = g.f0 + n as f64 * g.delta_f;
            let PathPhases::Full(z) = &p.phases else { unreachable!() };
            let mut re = 0.0;
            let mut im = 0.0;
            for l in 0..2 {
                let a = -2.0 * std::f64::consts::PI * f * p.delays[l] + z[l * 4 + n];
                re += p.gains[l] * a.cos();
                im += p.gains[l] * a.sin();
            }
            assert!((ch.scalar(n) - Complex64::new(re, im)).norm() < 1e-15);
        }
    }

    #[test]
    fn multipath_linear_in_gains_and_flat_when_single_tap() {
        let g = grid(5);
        let p = MultipathProfile::random(3, 3e-7, 5, 2, 2, 9);
        let mut p2 = p.clone();
        p2.gains.iter_mut().for_each(|a| *a *= 2.0);
        let a = response_from_multipath(&p, &g, 2, 2).unwrap();
        let b = response_from_multipath(&p2, &g, 2, 2).unwrap();
        for n in 0..5 {
            assert!((&b.h[n] - &a.h[n] * Complex64::new(2.0, 0.0)).norm() < 1e-14);
        }
        let flat = MultipathProfile { delays: vec![0.0], gains: vec![0.7], phases: PathPhases::PerPath(vec![0.2]) };
        let c = response_from_multipath(&flat, &g, 2, 1).unwrap();
        assert!(c.h.iter().all(|m| (m - &c.h[0]).norm() == 0.0));
    }

    #[test]
    fn narrowband_violation_rejected() {
        let g = ToneGrid::new(1e9, 1e6, 2, 1e6).unwrap();
        let p = MultipathProfile { delays: vec![0.0, 2e-6], gains: vec![1.0, 1.0], phases: PathPhases::Zero };
        assert!(matches!(response_from_multipath(&p, &g, 1, 1), Err(WptError::Narrowband { .. })));
    }

    #[test]
    fn rayleigh_statistics_and_determinism() {
        let g = grid(1);
        let mut total = 0.0;
        let n = 100_000;
        let ch = rayleigh_iid(n, 1, &g, 1).unwrap();
        for m in 0..n {
            total += ch.entry(0, 0, m).norm_sqr();
        }
        assert!((total / n as f64 - 1.0).abs() < 0.02);
        assert_eq!(rayleigh_iid(3, 2, &grid(2), 4).unwrap(), rayleigh_iid(3, 2, &grid(2), 4).unwrap());
        let one = rayleigh_iid(1, 1, &g, 8).unwrap();
        assert_eq!((one.n_tones(), one.n_rx(), one.n_tx()), (1, 1, 1));
    }

    #[test]
    fn hardening_examples() {
        let g = grid(1);
        let ones = ChannelResponse::miso(g, &[vec![Complex64::new(1.0, 0.0); 4]]).unwrap();
        assert!((hardening_statistic(&ones).unwrap()[0] - 1.0).abs() < 1e-15);
        let zero = ChannelResponse::miso(g, &[vec![Complex64::new(0.0, 0.0); 4]]).unwrap();
        assert_eq!(hardening_statistic(&zero).unwrap()[0], 0.0);
        let two_rx = rayleigh_iid(2, 2, &g, 0).unwrap();
        assert!(matches!(hardening_statistic(&two_rx), Err(WptError::Shape(_))));
    }

    #[test]
    fn json_roundtrip() {
        let ch = rayleigh_iid(2, 3, &grid(2), 77).unwrap();
        let text = serde_json::to_string(&ch.to_json()).unwrap();
        let back = ChannelResponse::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(ch, back);
    }
}
