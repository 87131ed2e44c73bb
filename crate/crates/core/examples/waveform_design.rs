//! Multisine design over a frequency-selective channel: compare the
//! uniform, SMF, single-tone and optimized allocations.

use wptlab::channel::{self, MultipathProfile, PathPhases, ToneGrid};
use wptlab::numerics::SolverConfig;
use wptlab::rectenna::EhTaylorModel;
use wptlab::waveform;

fn main() -> wptlab::Result<()> {
    let model = EhTaylorModel::default();
    let cfg = SolverConfig::with_seed(1);
    let power = 3.98;
    let path_loss = num_complex::Complex64::new(10f64.powf(-58.0 / 20.0), 0.0);
    for n in [4usize, 8, 16, 32] {
        let grid = ToneGrid::with_tones(n, 10e6 / n as f64);
        let mut profile = MultipathProfile::random(18, 4e-7, 1, 1, 1, 7);
        if let PathPhases::Full(p) = &profile.phases {
            profile.phases = PathPhases::PerPath(p[..18].to_vec());
        }
        let ch = channel::response_from_multipath(&profile, &grid, 1, 1)?.scaled(path_loss);
        let c = waveform::compare_strategies(&ch, &model, power, &cfg)?;
        println!(
            "N={n:>2}  uniform {:.3e}  smf1 {:.3e}  smf3 {:.3e}  single {:.3e}  optimized {:.3e}  [V]",
            c.uniform, c.smf1, c.smf3, c.single_tone, c.optimized
        );
    }
    Ok(())
}
