#![allow(dead_code)]

use maxcon::boolean::IdealSpec;
use maxcon::model::{Dataset, Tolerance};

/// Five points whose feasibility function at ε = 0.1 is the 2-ideal
/// function with structures {0,1,2,3} and {0,1,4}: the first four lie on
/// y = 0, the last fits only together with the two points near the origin.
pub fn small_dataset() -> Dataset {
    Dataset::from_line_points(&[(0.0, 0.0), (0.05, 0.0), (10.0, 0.0), (20.0, 0.0), (1.0, 1.0)]).unwrap()
}

pub fn small_spec() -> IdealSpec {
    IdealSpec::new(5, 2, vec![vec![0, 1, 2, 3], vec![0, 1, 4]]).unwrap()
}

pub fn eps(e: f64) -> Tolerance {
    Tolerance::new(e).unwrap()
}
