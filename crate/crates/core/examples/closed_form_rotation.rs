// Closed-form rotation from two tracked normal pairs, for random rotations
// with and without angular noise on the normals.
//
//     cargo run --release --example closed_form_rotation -- [trials] [noise_deg] [seed]

use decoupled_vo::geometry::geodesic_distance;
use decoupled_vo::planes::PlaneMode;
use decoupled_vo::rotation::{estimate_rotation, CaseTag, RotationOutcome, RotationParams};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{rngs::StdRng, RngExt, SeedableRng};
use rand_distr::{Distribution, Normal, UnitSphere};

pub struct RotationTrials {
    /// Geodesic error per trial, degrees; fallbacks are excluded.
    pub errors_deg: Vec<f64>,
    pub fallbacks: usize,
    pub general: usize,
}

fn perturb(n: &Vector3<f64>, sigma_rad: f64, rng: &mut StdRng) -> Vector3<f64> {
    if sigma_rad == 0.0 {
        return *n;
    }
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = Normal::new(0.0, sigma_rad).unwrap().sample(rng);
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle) * n
}

pub fn run_example(trials: usize, noise_deg: f64, seed: u64) -> RotationTrials {
    let mut rng = StdRng::seed_from_u64(seed);
    let params = RotationParams::default();
    let mut out = RotationTrials {
        errors_deg: Vec::with_capacity(trials),
        fallbacks: 0,
        general: 0,
    };
    for _ in 0..trials {
        let axis: [f64; 3] = UnitSphere.sample(&mut rng);
        let angle = rng.random_range(0.0..30.0f64).to_radians();
        let truth = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
        // two walls and a floor, as in a room corner
        let refs = [
            Vector3::new(1.0, 0.0, -1.0).normalize(),
            Vector3::new(-1.0, 0.0, -1.0).normalize(),
            Vector3::new(0.0, -1.0, 0.0),
        ];
        let modes: Vec<PlaneMode> = refs
            .iter()
            .enumerate()
            .map(|(k, n_ref)| PlaneMode {
                normal_ref: perturb(n_ref, noise_deg.to_radians(), &mut rng),
                normal_cur: perturb(&(truth.inverse() * n_ref), noise_deg.to_radians(), &mut rng),
                pixel_count: 30_000 - 1000 * k,
                member_pixels: None,
            })
            .collect();
        match estimate_rotation(&modes, &params) {
            RotationOutcome::Estimated(e) => {
                out.general += usize::from(e.case_tag == CaseTag::General);
                out.errors_deg.push(geodesic_distance(&e.rotation, truth.matrix()).to_degrees());
            }
            RotationOutcome::Fallback(_) => out.fallbacks += 1,
        }
    }
    out
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trials = args.first().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let noise = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let r = run_example(trials, noise, seed);
    let mut e = r.errors_deg.clone();
    e.sort_by(f64::total_cmp);
    let pct = |p: f64| e.get(((e.len() as f64 - 1.0) * p) as usize).copied().unwrap_or(f64::NAN);
    println!("{trials} trials, normal noise {noise} deg");
    println!("  general case {}  fallbacks {}", r.general, r.fallbacks);
    println!("  error deg  median {:.4}  p90 {:.4}  max {:.4}", pct(0.5), pct(0.9), pct(1.0));
}
