//! Local computing versus offloading for a wirelessly powered device, as the
//! harvested power and the uplink gain vary.

use wptlab::mec::{self, MecScenario};
use wptlab::numerics::SolverConfig;

fn main() -> wptlab::Result<()> {
    let cfg = SolverConfig::default();
    let n = 100;
    let base = MecScenario {
        deadline: 0.1,
        tail_probs: (0..n).map(|i| 1.0 - 0.9 * i as f64 / (n - 1) as f64).collect(),
        gamma: 5e-13,
        p_dc: 1e-3,
        bits: 1e4,
        bandwidth: 1e6,
        gain: 1e-9,
        noise_var: 1e-12,
    };
    println!("{:>10} {:>10} {:>11} {:>12}", "p_dc [W]", "gain", "mode", "t* [s]");
    for p_dc in [1e-4, 1e-3, 1e-2] {
        for gain in [1e-11, 1e-9, 1e-7] {
            let sc = MecScenario { p_dc, gain, ..base.clone() };
            let pol = mec::select_mode(&sc, &cfg)?;
            let t = pol.t_star.map_or("-".to_string(), |t| format!("{t:.3e}"));
            println!("{p_dc:>10.0e} {gain:>10.0e} {:>11} {t:>12}", pol.mode.as_str());
        }
    }
    Ok(())
}
