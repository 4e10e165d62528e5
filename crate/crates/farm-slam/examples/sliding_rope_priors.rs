//! The sliding rope prior, in isolation.
//!
//! A rope landmark's prior is a 2D Gaussian centered at the midpoint between
//! the mooring buoys with a covariance stretched along the rope (sigma half
//! the rope length) and pinched across it (0.1 m by default). Displacing a
//! landmark — or a pose together with its landmark — along the rope is
//! therefore orders of magnitude cheaper than displacing it across, which is
//! how rope detections constrain the vehicle laterally without fighting the
//! odometry along the line.
//!
//! ```bash
//! cargo run --example sliding_rope_priors
//! ```

use farm_slam::frontend::make_rope_prior;
use farm_slam::graph::{Factor, FactorGraph};
use farm_slam::sim::default_farm;
use farm_slam::{Point2, Pose2, RangeBearing};
use nalgebra::{Matrix2, Matrix3};
use std::f64::consts::FRAC_PI_2;

fn main() {
    let farm = default_farm();
    let spec = make_rope_prior(&farm, 0, None, 0.1).expect("prior");
    println!(
        "rope 0 prior: mean ({:.1}, {:.1}), cov diag ({:.1}, {:.3}) m^2 in rope coordinates",
        spec.mean.x, spec.mean.y, spec.cov[(0, 0)], spec.cov[(1, 1)]
    );

    // chi2 of the bare prior for displacements of the landmark
    let chi2_at = |dx: f64, dy: f64| {
        let mut g = FactorGraph::new();
        let v = g.add_rope_variable(Point2::new(spec.mean.x + dx, spec.mean.y + dy));
        g.add_factor(Factor::RopePrior { rope: v, mean: spec.mean, cov: spec.cov })
            .unwrap();
        g.chi2().unwrap()
    };
    println!("\nchi2 of the prior for a displaced landmark:");
    for d in [0.1, 0.5, 2.0, 13.0] {
        println!(
            "  {d:>5.1} m along: {:>10.4e}    {d:>5.1} m across: {:>10.4e}",
            chi2_at(d, 0.0),
            chi2_at(0.0, d)
        );
    }
    println!(
        "\nanisotropy ratio at 0.1 m: {:.2e} (sliding along is ~{}x cheaper)",
        chi2_at(0.1, 0.0) / chi2_at(0.0, 0.1),
        (chi2_at(0.0, 0.1) / chi2_at(0.1, 0.0)).round()
    );

    // now a pose observing its own rope landmark at the prior mean: sliding
    // pose+landmark together leaves the observation residual untouched, so
    // only the weak along-rope prior resists
    let meas = RangeBearing::new(2.0, -FRAC_PI_2, Matrix2::new(0.04, 0.0, 0.0, 0.0025));
    let slide_chi2 = |dx: f64, dy: f64| {
        let mut g = FactorGraph::new();
        let pose = Pose2::new(spec.mean.x + dx, spec.mean.y + 2.0 + dy, 0.0);
        let p = g.add_pose_variable(pose);
        let v = g.add_rope_variable(Point2::new(spec.mean.x + dx, spec.mean.y + dy));
        g.add_factor(Factor::PosePrior { pose: p, mean: pose, cov: Matrix3::identity() })
            .unwrap();
        g.add_factor(Factor::RopePrior { rope: v, mean: spec.mean, cov: spec.cov })
            .unwrap();
        g.add_factor(Factor::RopeObs { pose: p, rope: v, meas }).unwrap();
        g.chi2().unwrap()
    };
    let base = slide_chi2(0.0, 0.0);
    println!("\npose + landmark sliding together by 0.5 m:");
    println!("  along the rope:  delta chi2 = {:.4e}", slide_chi2(0.5, 0.0) - base);
    println!("  across the rope: delta chi2 = {:.4e}", slide_chi2(0.0, 0.5) - base);
}
