// The command-line flow end to end, driven in-process: synthesize a short
// sequence, run odometry with diagnostics, evaluate and emit plot data.
//
//     cargo run --release --example cli_workflow -- [work_dir] [frames]

use std::path::{Path, PathBuf};

use decoupled_vo::cli::main_with_args;

/// Runs each step and returns their exit codes in order.
pub fn run_example(work: &Path, frames: usize) -> Vec<(String, i32)> {
    let scene = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenes/room_corner.toml");
    let seq = work.join("sequence");
    let manifest = seq.join("manifest.toml");
    let est = work.join("estimate.txt");
    let gt = seq.join("groundtruth.txt");
    let p = |p: &Path| p.display().to_string();
    let n = frames.to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), p(&scene), p(&seq), "--max-frames".into(), n],
        vec!["run".into(), p(&manifest), p(&est), "--diagnostics".into(), p(&work.join("diagnostics.csv"))],
        vec!["eval".into(), p(&est), p(&gt), "--report".into(), p(&work.join("ate.csv"))],
        vec!["plot-data".into(), p(&gt), p(&est), "--out".into(), p(&work.join("plot.csv"))],
    ];
    steps
        .into_iter()
        .map(|args| {
            let name = args[0].clone();
            let code = main_with_args(std::iter::once("dvo".to_string()).chain(args));
            (name, code)
        })
        .collect()
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let work = args.first().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dvo_cli_workflow"));
    let frames = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    std::fs::create_dir_all(&work).expect("work directory");
    for (step, code) in run_example(&work, frames) {
        println!("{step:<10} exit {code}");
    }
    println!("outputs in {}", work.display());
}
