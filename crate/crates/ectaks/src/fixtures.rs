//! Pinned toy curves used by tests, examples, and the CLI golden files.
//!
//! All three were produced by the exhaustive search in
//! [`crate::algebra::find_toy_curves`] and are committed as JSON in the
//! crate's `fixtures/` directory so their bytes never drift.

use crate::algebra::CurveParams;
use crate::files::{curve_from_file, CurveFile};

const CURVE_P3: &str = include_str!("../fixtures/curve_p3.json");
const CURVE_P11: &str = include_str!("../fixtures/curve_p11.json");
const CURVE_P1009: &str = include_str!("../fixtures/curve_p1009.json");

fn parse(text: &str) -> CurveParams {
    let file: CurveFile = serde_json::from_str(text).expect("fixture JSON is well-formed");
    curve_from_file(&file).expect("fixture curve validates")
}

/// Smallest scheme field: subgroup of order 3 on a curve over `F_5`.
pub fn curve_p3() -> CurveParams {
    parse(CURVE_P3)
}

/// Subgroup of order 11; the attack-lab fixture size.
pub fn curve_p11() -> CurveParams {
    parse(CURVE_P11)
}

/// Mid-size fixture with a subgroup of order at least 1009.
pub fn curve_p1009() -> CurveParams {
    parse(CURVE_P1009)
}

/// Every pinned fixture, ascending by subgroup order.
pub fn all_fixture_curves() -> Vec<CurveParams> {
    vec![curve_p3(), curve_p11(), curve_p1009()]
}
