//! Convergence study for the tracking benchmarks.
//!
//! `cargo run --release --example calibrate -- circle 50 100 200`
//! prints one JSON summary per base frequency (rad/s).

use std::sync::Arc;
use std::time::Instant;

use faccs::liealg::{AlgebraVector, LieAlgebra};
use faccs::mech::{submarine, InertiaTensor, MechSystem};
use faccs::tracking::{track, BodyPath, ExpCurve, HeisenbergGroup, ReferenceCurve, Route, TrackOptions};
use nalgebra::Vector3;

fn main() {
    let mut args = std::env::args().skip(1);
    let bench = args.next().unwrap_or_else(|| "circle".into());
    let omegas: Vec<f64> = args.map(|a| a.parse().expect("frequency")).collect();
    let omegas = if omegas.is_empty() { vec![50.0, 100.0, 200.0] } else { omegas };

    let (sys, curve): (MechSystem, Arc<dyn BodyPath>) = match bench.as_str() {
        "circle" => (
            submarine([2.0, 2.0, 3.0, 4.0, 4.0, 6.0]).unwrap(),
            Arc::new(ReferenceCurve::circle(1.0, std::f64::consts::TAU).unwrap()),
        ),
        "slew" | "slew-two-stage" => (
            submarine([2.0, 2.0, 3.0, 4.0, 4.0, 6.0]).unwrap(),
            Arc::new(ReferenceCurve::attitude_slew(Vector3::z(), 1.0, 2.0).unwrap()),
        ),
        "heisenberg" | "heisenberg-two-stage" => {
            let inertia = InertiaTensor::diagonal(vec![1.0; 3]).unwrap();
            let sys = MechSystem::new(LieAlgebra::heisenberg(), inertia, vec![AlgebraVector::basis(3, 0), AlgebraVector::basis(3, 1)]).unwrap();
            let xi = AlgebraVector::from_slice(&[0.0, 0.0, 0.5]);
            (sys, Arc::new(ExpCurve::new(Arc::new(HeisenbergGroup), xi, 1.0).unwrap()))
        }
        other => panic!("unknown benchmark `{other}` (circle, slew, heisenberg)"),
    };
    let route = bench.ends_with("two-stage").then_some(Route::TwoStage);
    let opts = TrackOptions { route, ..TrackOptions::default() };
    for w in omegas {
        let start = Instant::now();
        let o = TrackOptions { omega_osc: w, ..opts };
        match track(&sys, curve.clone(), f64::INFINITY, &o) {
            Ok(r) => println!("{} {:.1}s", serde_json::to_string(&r.summary).unwrap(), start.elapsed().as_secs_f64()),
            Err(e) => println!("omega {w}: {e}"),
        }
    }
}
