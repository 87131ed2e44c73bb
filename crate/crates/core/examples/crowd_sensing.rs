//! Energy-priced scheduling of three wirelessly powered sensors.

use wptlab::numerics::SolverConfig;
use wptlab::sensing;

fn main() -> wptlab::Result<()> {
    let sc = sensing::canonical_scenario();
    let cfg = SolverConfig::default();
    for n in 0..sc.k() {
        println!("sensor {n}: priority {:.3}", sensing::priority(&sc, n));
    }
    let pol = sensing::optimize(&sc, &cfg)?;
    println!("lambda* = {:.4}, reward = {:.4}", pol.lambda, pol.reward);
    for (n, a) in pol.sensors.iter().enumerate() {
        println!("sensor {n}: scheduled {}, P = {:.4e} W, ell = {:.1} bit, t = {:.4} s", a.scheduled, a.power, a.ell, a.t);
    }
    let (_, tuned) = sensing::optimize_with_compression(&sc, &cfg)?;
    println!("with compression ratios tuned: reward = {:.4}", tuned.reward);
    Ok(())
}
