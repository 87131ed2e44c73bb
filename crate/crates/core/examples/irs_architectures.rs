//! Single, group and fully connected IRS architectures on random channels.

use wptlab::irs;

fn main() -> wptlab::Result<()> {
    for l in [4usize, 8, 16] {
        let sizes: Vec<usize> = (0..).map(|k| 1 << k).take_while(|g| *g <= l).collect();
        let s = irs::gain_study(l, &sizes, 5000, 1)?;
        let row: Vec<String> = s.group_sizes.iter().zip(&s.gains).map(|(g, v)| format!("G={g}: {:+.1}%", 100.0 * v)).collect();
        println!("L={l:>2}  {}", row.join("  "));
    }
    Ok(())
}
