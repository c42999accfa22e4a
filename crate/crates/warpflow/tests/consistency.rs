//! Outcome stability: halving the solver tolerances and doubling the node
//! count must not change any classification on the phase-grid configurations.

use warpflow::composer::{classify_outcome, simulate, OutcomeTag, SimOptions};
use warpflow::gaussian::{threshold_fraction, GaussianConfig};
use warpflow::space::{DensitySpec, WarpedSpace};
use warpflow::sphere_flow::make_latitude_circle;

fn run_cell(r0: f64, fraction: f64, n: usize, rtol: f64, time_match_tol: f64) -> OutcomeTag {
    let space = WarpedSpace::Euclidean;
    let density = DensitySpec::gaussian(1.0);
    let theta0 = (1.0 - 2.0 * fraction).acos();
    let initial = make_latitude_circle(theta0, n, space.w(r0)).unwrap();
    let mut opts = SimOptions::new(50.0);
    opts.radial.rtol = rtol;
    opts.time_match_tol = time_match_tol;
    opts.flow.diag_every = 25;
    let run = simulate(&space, &density, r0, &initial, &opts).unwrap();
    classify_outcome(&run, &space, &density, &opts).tag()
}

#[test]
fn refining_the_discretization_preserves_every_tag() {
    for r0 in [0.5, 1.0, 2.0] {
        let thr = threshold_fraction(&GaussianConfig::new(1.0, r0, 0.25).unwrap());
        for fraction in [0.5 * thr, 0.5, (1.5 * thr).min(0.5)] {
            let coarse = run_cell(r0, fraction, 256, 1e-10, 1e-3);
            let fine = run_cell(r0, fraction, 512, 5e-11, 5e-4);
            assert_eq!(
                coarse, fine,
                "tag changed under refinement at r0 = {r0}, fraction = {fraction}"
            );
        }
    }
}
