// Train the kernel cross-correlator on a random texture and recover circular
// shifts of it, reporting the peak and its peak-to-sidelobe ratio.
//
//     cargo run --release --example kcc_shift -- [size] [du] [dv] [seed]

use decoupled_vo::grid::Grid;
use decoupled_vo::kcc::{CorrelationResult, KccModel, KccParams};
use rand::{rngs::StdRng, RngExt, SeedableRng};

pub fn run_example(size: usize, shift: (i64, i64), seed: u64) -> decoupled_vo::Result<CorrelationResult> {
    let mut rng = StdRng::seed_from_u64(seed);
    let x = Grid::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0));
    let model = KccModel::train(&x, &KccParams::default())?;
    let z = x.circular_shift(shift.0 as isize, shift.1 as isize);
    model.detect(&z)
}

fn main() -> decoupled_vo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: i64| args.get(k).and_then(|s| s.parse().ok()).unwrap_or(d);
    let size = arg(0, 128) as usize;
    let shift = (arg(1, 17), arg(2, -9));
    let r = run_example(size, shift, arg(3, 1) as u64)?;
    println!("true shift {shift:?}  peak {:?}  value {:.4}  PSR {:.1}", r.peak_shift, r.peak_value, r.psr);
    Ok(())
}
