//! Exhaustive discrete-logarithm oracle for desk-scale curves.
//!
//! Deliberately the dumbest correct algorithm: the oracle exists so the
//! attack analysis can be replayed on toy parameters, not to be fast. The
//! guard keeps anyone from pointing it at something that matters.

use crate::algebra::curve::{CurvePoint, CurveParams};
use crate::error::{Error, Result};

/// Orders above this are refused outright.
pub const ORACLE_GUARD: u64 = 1 << 24;

/// Finds the unique `m` in `[0, order)` with `m * base = target`, by walking
/// the subgroup one addition at a time.
pub fn ecdl_bruteforce(
    curve: &CurveParams,
    base: &CurvePoint,
    target: &CurvePoint,
    order: u64,
) -> Result<u64> {
    if order > ORACLE_GUARD {
        return Err(Error::OracleRefused {
            order,
            guard: ORACLE_GUARD,
        });
    }
    if !curve.is_on_curve(base) || !curve.is_on_curve(target) {
        return Err(Error::InvalidPoint);
    }
    let mut walk = CurvePoint::Infinity;
    for m in 0..order {
        if walk == *target {
            return Ok(m);
        }
        walk = curve.add(&walk, base)?;
    }
    Err(Error::NotInSubgroup)
}
