//! Harvested DC power of a CW tone versus an in-phase multisine at the same
//! received power, with a Monte Carlo check of the closed-form moments.

use num_complex::Complex64;
use wptlab::channel::{ChannelResponse, ToneGrid};
use wptlab::rectenna::{self, EhTaylorModel, ReceivedSignal};
use wptlab::signal::SignalSpec;

fn main() -> wptlab::Result<()> {
    let model = EhTaylorModel::default();
    let p_rx = 1e-5;
    println!("{:>6} {:>14} {:>14} {:>14}", "tones", "v_out [V]", "p_dc [W]", "jensen [V]");
    for n in [1usize, 2, 4, 8, 16] {
        let c = vec![Complex64::new((p_rx / n as f64).sqrt(), 0.0); n];
        let r = rectenna::harvest(&model, &ReceivedSignal::deterministic(c))?;
        println!("{n:>6} {:>14.6e} {:>14.6e} {:>14.6e}", r.v_out, r.p_dc, rectenna::jensen_lower_bound(&model, p_rx));
    }

    let n = 8;
    let grid = ToneGrid::with_tones(n, 1e6);
    let ch = ChannelResponse::siso(grid, &vec![Complex64::new(1.0, 0.0); n])?;
    let spec = SignalSpec::siso(&vec![(p_rx / n as f64).sqrt(); n], &vec![0.0; n], p_rx);
    let mc = rectenna::monte_carlo_harvest(&model, &spec, &ch, 1, 3)?;
    println!("time-domain check, N = {n}: v_out = {:.6e} V", mc.report.v_out);
    Ok(())
}
