//! Exhaustive discovery of small curves with prime-order subgroups, used to
//! produce test fixtures and desk-scale parameter files.

use crate::algebra::curve::{CurvePoint, CurveParams};
use crate::algebra::field::{is_prime, FieldElement};
use crate::error::{Error, Result};

/// Coefficient grid scanned per prime; keeps the search linear in `max_q`
/// while still reaching a wide spread of group orders.
const COEFF_RANGE: std::ops::Range<u64> = 0..4;

/// Enumerates curves `y^2 = x^3 + ax + b` over `F_q` for primes `3 < q <=
/// max_q`, counts their points, factors the group order, and emits validated
/// parameters for each prime-order subgroup found.
///
/// Results are deduplicated per subgroup order: the first curve found for a
/// given `p` wins, so the list stays one-per-order and scan order (ascending
/// `q`, then `a`, `b`) makes the output deterministic. Orders below `min_p`
/// are skipped; `p = 2` is never useful to the scheme.
pub fn find_toy_curves(max_q: u64, min_p: u64) -> Result<Vec<CurveParams>> {
    if max_q > 20_000 {
        return Err(Error::InvalidParameter(format!(
            "curve search is exhaustive; max_q {max_q} is past the supported 20000"
        )));
    }
    let mut found: Vec<CurveParams> = Vec::new();
    let mut seen_orders = std::collections::BTreeSet::new();
    for q in 5..=max_q {
        if !is_prime(q) {
            continue;
        }
        for a in COEFF_RANGE {
            for b in COEFF_RANGE {
                let four_a3 = (4 * a % q) * (a % q) % q * (a % q) % q;
                let twenty_seven_b2 = 27 * (b % q) % q * (b % q) % q;
                if (four_a3 + twenty_seven_b2) % q == 0 {
                    continue;
                }
                let order = group_order(q, a, b);
                for p in prime_factors(order) {
                    if p < min_p.max(3) || seen_orders.contains(&p) {
                        continue;
                    }
                    if let Some(params) = subgroup_params(q, a, b, order, p) {
                        seen_orders.insert(p);
                        found.push(params);
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Number of rational points including infinity, via the quadratic-residue
/// count of each cubic value.
fn group_order(q: u64, a: u64, b: u64) -> u64 {
    // square_counts[v] = number of y in F_q with y^2 = v.
    let mut square_counts = vec![0u64; q as usize];
    for y in 0..q {
        square_counts[((y as u128 * y as u128) % q as u128) as usize] += 1;
    }
    let mut order = 1; // infinity
    for x in 0..q {
        let x = x as u128;
        let rhs = ((x * x % q as u128 * x + a as u128 * x + b as u128) % q as u128) as usize;
        order += square_counts[rhs];
    }
    order
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut factors = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            factors.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    factors
}

/// Looks for a point of exact order `p` by scaling random-ish points by the
/// cofactor, then runs the full parameter validation.
fn subgroup_params(q: u64, a: u64, b: u64, order: u64, p: u64) -> Option<CurveParams> {
    let cofactor = order / p;
    // A quick unvalidated handle for the scan; the real constructor runs last.
    let scan = CurveParamsScan { q, a, b };
    for x in 0..q {
        for y in 0..q {
            let point = CurvePoint::affine(x, y, q);
            if !scan.is_on_curve(&point) {
                continue;
            }
            let candidate = scan.scalar_mul(cofactor, &point);
            if let CurvePoint::Affine { x: gx, y: gy } = candidate {
                if let Ok(params) = CurveParams::new(q, a, b, gx.value(), gy.value(), p) {
                    return Some(params);
                }
            }
        }
    }
    None
}

/// Minimal duplicate of the group law for the scan phase, where the subgroup
/// order is not yet known and `CurveParams` cannot be constructed.
struct CurveParamsScan {
    q: u64,
    a: u64,
    b: u64,
}

impl CurveParamsScan {
    fn is_on_curve(&self, point: &CurvePoint) -> bool {
        match point {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                let a = FieldElement::new(self.a, self.q);
                let b = FieldElement::new(self.b, self.q);
                *y * *y == *x * *x * *x + a * *x + b
            }
        }
    }

    fn add(&self, lhs: &CurvePoint, rhs: &CurvePoint) -> CurvePoint {
        let a = FieldElement::new(self.a, self.q);
        let (x1, y1) = match lhs {
            CurvePoint::Infinity => return *rhs,
            CurvePoint::Affine { x, y } => (*x, *y),
        };
        let (x2, y2) = match rhs {
            CurvePoint::Infinity => return *lhs,
            CurvePoint::Affine { x, y } => (*x, *y),
        };
        let slope = if x1 == x2 {
            if y1 != y2 || y1.is_zero() {
                return CurvePoint::Infinity;
            }
            let three = FieldElement::new(3, self.q);
            let two = FieldElement::new(2, self.q);
            (three * x1 * x1 + a).div(&(two * y1)).unwrap()
        } else {
            (y2 - y1).div(&(x2 - x1)).unwrap()
        };
        let x3 = slope * slope - x1 - x2;
        let y3 = slope * (x1 - x3) - y1;
        CurvePoint::Affine { x: x3, y: y3 }
    }

    fn scalar_mul(&self, mut m: u64, point: &CurvePoint) -> CurvePoint {
        let mut acc = CurvePoint::Infinity;
        let mut base = *point;
        while m > 0 {
            if m & 1 == 1 {
                acc = self.add(&acc, &base);
            }
            base = self.add(&base, &base);
            m >>= 1;
        }
        acc
    }
}
