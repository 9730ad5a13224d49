//! Fixtures shared by the benchmarks.

use qlh::ifunc::LiftedBox;
use qlh::scenario::{LiftChoice, Scenario};

/// A scenario with the lift and box its timings are quoted at.
pub struct Case {
    pub scenario: Scenario,
    pub lift: LiftChoice,
    pub lifted: LiftedBox,
}

/// The two worked examples at their default boxes.
pub fn cases() -> Vec<Case> {
    vec![
        Case { scenario: Scenario::hirzebruch(), lift: LiftChoice::Iminimal, lifted: LiftedBox { bs: 3, d2: 0, dmax: 4 } },
        Case { scenario: Scenario::p1flop_00_01(), lift: LiftChoice::Twisted, lifted: LiftedBox { bs: 2, d2: 2, dmax: 3 } },
    ]
}
