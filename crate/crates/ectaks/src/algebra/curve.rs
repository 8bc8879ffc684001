//! Short Weierstrass curves over `F_q` in affine coordinates, plus the
//! vector-of-points layer the key scheme works with.

use crate::algebra::field::{is_prime, FieldElement};
use crate::algebra::vector::FieldVector;
use crate::error::{Error, Result};

/// A point on `y^2 = x^3 + ax + b`, or the group identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurvePoint {
    Infinity,
    Affine { x: FieldElement, y: FieldElement },
}

impl CurvePoint {
    pub fn affine(x: u64, y: u64, q: u64) -> Self {
        CurvePoint::Affine {
            x: FieldElement::new(x, q),
            y: FieldElement::new(y, q),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }
}

impl std::fmt::Display for CurvePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurvePoint::Infinity => write!(f, "inf"),
            CurvePoint::Affine { x, y } => write!(f, "({x}, {y})"),
        }
    }
}

/// A pair (generally a `d`-tuple) of curve points; the published topology
/// vectors and the ephemeral handshake shares have this shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PointVector {
    points: Vec<CurvePoint>,
}

impl PointVector {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        assert!(!points.is_empty());
        PointVector { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> CurvePoint {
        self.points[i]
    }

    /// True when every component is the identity; scheme-level vectors must
    /// never be in this state.
    pub fn is_all_infinity(&self) -> bool {
        self.points.iter().all(|p| p.is_infinity())
    }
}

/// Validated domain parameters: the curve, the base point `G`, and the prime
/// order `p` of the subgroup `G` generates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveParams {
    q: u64,
    a: FieldElement,
    b: FieldElement,
    base: CurvePoint,
    p: u64,
}

impl CurveParams {
    /// Checks every invariant once; all later arithmetic trusts them.
    pub fn new(q: u64, a: u64, b: u64, gx: u64, gy: u64, p: u64) -> Result<Self> {
        if q <= 3 || !is_prime(q) {
            return Err(Error::ParameterMismatch(format!(
                "coordinate modulus {q} must be a prime greater than 3"
            )));
        }
        if !is_prime(p) {
            return Err(Error::ParameterMismatch(format!(
                "subgroup order {p} must be prime"
            )));
        }
        let a = FieldElement::new(a, q);
        let b = FieldElement::new(b, q);
        // 4a^3 + 27b^2 != 0 keeps the curve nonsingular.
        let four = FieldElement::new(4, q);
        let twenty_seven = FieldElement::new(27, q);
        if (four * a * a * a + twenty_seven * b * b).is_zero() {
            return Err(Error::ParameterMismatch(
                "singular curve: 4a^3 + 27b^2 = 0".into(),
            ));
        }
        let base = CurvePoint::affine(gx, gy, q);
        let params = CurveParams { q, a, b, base, p };
        if !params.is_on_curve(&base) || base.is_infinity() {
            return Err(Error::InvalidPoint);
        }
        // p prime, G != inf and pG = inf together pin the order of G to p.
        if !params.scalar_mul(p, &base)?.is_infinity() {
            return Err(Error::ParameterMismatch(format!(
                "base point does not have order {p}"
            )));
        }
        Ok(params)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn a(&self) -> FieldElement {
        self.a
    }

    pub fn b(&self) -> FieldElement {
        self.b
    }

    pub fn base_point(&self) -> CurvePoint {
        self.base
    }

    /// Order of the subgroup generated by the base point.
    pub fn subgroup_order(&self) -> u64 {
        self.p
    }

    pub fn is_on_curve(&self, point: &CurvePoint) -> bool {
        match point {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                if x.modulus() != self.q || y.modulus() != self.q {
                    return false;
                }
                *y * *y == *x * *x * *x + self.a * *x + self.b
            }
        }
    }

    fn check_on_curve(&self, point: &CurvePoint) -> Result<()> {
        if self.is_on_curve(point) {
            Ok(())
        } else {
            Err(Error::InvalidPoint)
        }
    }

    pub fn negate(&self, point: &CurvePoint) -> Result<CurvePoint> {
        self.check_on_curve(point)?;
        Ok(match point {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x: *x, y: y.neg() },
        })
    }

    /// Chord-tangent group law.
    pub fn add(&self, lhs: &CurvePoint, rhs: &CurvePoint) -> Result<CurvePoint> {
        self.check_on_curve(lhs)?;
        self.check_on_curve(rhs)?;
        Ok(self.add_unchecked(lhs, rhs))
    }

    fn add_unchecked(&self, lhs: &CurvePoint, rhs: &CurvePoint) -> CurvePoint {
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
                // P + (-P), including the 2-torsion case y = 0.
                return CurvePoint::Infinity;
            }
            let three = FieldElement::new(3, self.q);
            let two = FieldElement::new(2, self.q);
            (three * x1 * x1 + self.a)
                .div(&(two * y1))
                .expect("2y is nonzero here")
        } else {
            (y2 - y1).div(&(x2 - x1)).expect("x2 - x1 is nonzero here")
        };
        let x3 = slope * slope - x1 - x2;
        let y3 = slope * (x1 - x3) - y1;
        CurvePoint::Affine { x: x3, y: y3 }
    }

    pub fn double(&self, point: &CurvePoint) -> Result<CurvePoint> {
        self.add(point, point)
    }

    /// Double-and-add scalar multiplication.
    pub fn scalar_mul(&self, mut m: u64, point: &CurvePoint) -> Result<CurvePoint> {
        self.check_on_curve(point)?;
        let mut acc = CurvePoint::Infinity;
        let mut base = *point;
        while m > 0 {
            if m & 1 == 1 {
                acc = self.add_unchecked(&acc, &base);
            }
            base = self.add_unchecked(&base, &base);
            m >>= 1;
        }
        Ok(acc)
    }

    /// Repeated-addition reference for `scalar_mul`; this is the correctness
    /// oracle the ladder is tested against, so it stays deliberately naive.
    pub fn scalar_mul_reference(&self, m: u64, point: &CurvePoint) -> Result<CurvePoint> {
        self.check_on_curve(point)?;
        let mut acc = CurvePoint::Infinity;
        for _ in 0..m {
            acc = self.add_unchecked(&acc, point);
        }
        Ok(acc)
    }

    /// Lifts a vector over `F_p` to the pair `(k_1 G, k_2 G)`.
    pub fn lift_vector(&self, k: &FieldVector) -> Result<PointVector> {
        if k.modulus() != self.p {
            return Err(Error::ParameterMismatch(format!(
                "vector over F_{} lifted on a curve with subgroup order {}",
                k.modulus(),
                self.p
            )));
        }
        let points = k
            .coords()
            .iter()
            .map(|c| self.scalar_mul(c.value(), &self.base))
            .collect::<Result<Vec<_>>>()?;
        Ok(PointVector::new(points))
    }

    /// Mixed product `k . (P_1, P_2) = k_1 P_1 + k_2 P_2`.
    ///
    /// Together with [`CurveParams::lift_vector`] this satisfies the law
    /// `(k . t) G = k . (t G)` that makes the handshake close.
    pub fn mixed_dot(&self, k: &FieldVector, v: &PointVector) -> Result<CurvePoint> {
        if k.modulus() != self.p {
            return Err(Error::ParameterMismatch(format!(
                "vector over F_{} used against a subgroup of order {}",
                k.modulus(),
                self.p
            )));
        }
        if k.len() != v.len() {
            return Err(Error::ParameterMismatch(format!(
                "mixed product on lengths {} and {}",
                k.len(),
                v.len()
            )));
        }
        let mut acc = CurvePoint::Infinity;
        for (c, point) in k.coords().iter().zip(v.points().iter()) {
            let term = self.scalar_mul(c.value(), point)?;
            acc = self.add_unchecked(&acc, &term);
        }
        Ok(acc)
    }

    /// Scales every component of a point vector.
    pub fn scale_point_vector(&self, m: u64, v: &PointVector) -> Result<PointVector> {
        let points = v
            .points()
            .iter()
            .map(|point| self.scalar_mul(m, point))
            .collect::<Result<Vec<_>>>()?;
        Ok(PointVector::new(points))
    }

    /// Every affine point on the curve, identity excluded. Only meaningful at
    /// toy sizes; used by the curve search and by exhaustive tests.
    pub fn enumerate_affine_points(&self) -> Vec<CurvePoint> {
        let mut points = Vec::new();
        for x in 0..self.q {
            let xe = FieldElement::new(x, self.q);
            let rhs = xe * xe * xe + self.a * xe + self.b;
            for y in 0..self.q {
                let ye = FieldElement::new(y, self.q);
                if ye * ye == rhs {
                    points.push(CurvePoint::Affine { x: xe, y: ye });
                }
            }
        }
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::vector::{dot, sample_nonzero_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// y^2 = x^3 + x + 1 over F_5 has 9 points; the subgroup of order 3 gives
    /// the smallest usable scheme field.
    fn tiny_curve() -> CurveParams {
        // (2,1) = 3 * (0,1) generates the order-3 subgroup of this group of 9.
        CurveParams::new(5, 1, 1, 2, 1, 3).unwrap()
    }

    #[test]
    fn tiny_curve_has_nine_rational_points() {
        // Exhaustive enumeration: quadratic residues mod 5 are {0,1,4}.
        let curve = tiny_curve();
        let affine = curve.enumerate_affine_points();
        assert_eq!(affine.len() + 1, 9, "8 affine points plus infinity");
    }

    #[test]
    fn identity_and_inverse_laws() {
        let curve = tiny_curve();
        for point in curve.enumerate_affine_points() {
            assert_eq!(curve.add(&point, &CurvePoint::Infinity).unwrap(), point);
            assert_eq!(curve.add(&CurvePoint::Infinity, &point).unwrap(), point);
            let neg = curve.negate(&point).unwrap();
            assert!(curve.add(&point, &neg).unwrap().is_infinity());
        }
    }

    #[test]
    fn group_is_closed_under_addition() {
        // Exhaustive group table on the toy curve: every sum lands back in
        // the enumerated point set.
        let curve = tiny_curve();
        let mut all = curve.enumerate_affine_points();
        all.push(CurvePoint::Infinity);
        for lhs in &all {
            for rhs in &all {
                let sum = curve.add(lhs, rhs).unwrap();
                assert!(all.contains(&sum), "{lhs} + {rhs} = {sum} escaped the group");
            }
        }
    }

    #[test]
    fn addition_is_commutative_and_associative_on_the_toy_group() {
        let curve = tiny_curve();
        let mut all = curve.enumerate_affine_points();
        all.push(CurvePoint::Infinity);
        for a in &all {
            for b in &all {
                assert_eq!(curve.add(a, b).unwrap(), curve.add(b, a).unwrap());
                for c in &all {
                    let left = curve.add(&curve.add(a, b).unwrap(), c).unwrap();
                    let right = curve.add(a, &curve.add(b, c).unwrap()).unwrap();
                    assert_eq!(left, right);
                }
            }
        }
    }

    #[test]
    fn off_curve_points_are_rejected() {
        let curve = tiny_curve();
        let bogus = CurvePoint::affine(1, 1, 5);
        assert!(!curve.is_on_curve(&bogus));
        assert_eq!(curve.add(&bogus, &CurvePoint::Infinity), Err(Error::InvalidPoint));
        assert_eq!(curve.scalar_mul(2, &bogus), Err(Error::InvalidPoint));
    }

    #[test]
    fn scalar_mul_trivial_cases_and_order() {
        let curve = tiny_curve();
        let g = curve.base_point();
        assert!(curve.scalar_mul(0, &g).unwrap().is_infinity());
        assert_eq!(curve.scalar_mul(1, &g).unwrap(), g);
        assert!(curve.scalar_mul(curve.subgroup_order(), &g).unwrap().is_infinity());
        // Order exactly p: no smaller multiple hits the identity.
        for m in 1..curve.subgroup_order() {
            assert!(!curve.scalar_mul(m, &g).unwrap().is_infinity());
        }
    }

    #[test]
    fn ladder_agrees_with_repeated_addition() {
        let curve = tiny_curve();
        let mut all = curve.enumerate_affine_points();
        all.push(CurvePoint::Infinity);
        for point in &all {
            for m in 0..20u64 {
                assert_eq!(
                    curve.scalar_mul(m, point).unwrap(),
                    curve.scalar_mul_reference(m, point).unwrap()
                );
            }
        }
    }

    #[test]
    fn multiples_distribute_over_scalars() {
        // (m + n)G = mG + nG and m(nG) = (mn mod p)G, exhaustively.
        let curve = tiny_curve();
        let g = curve.base_point();
        let p = curve.subgroup_order();
        for m in 0..p {
            for n in 0..p {
                let lhs = curve.scalar_mul(m + n, &g).unwrap();
                let rhs = curve
                    .add(&curve.scalar_mul(m, &g).unwrap(), &curve.scalar_mul(n, &g).unwrap())
                    .unwrap();
                assert_eq!(lhs, rhs);
                let nested = curve.scalar_mul(m, &curve.scalar_mul(n, &g).unwrap()).unwrap();
                let flat = curve.scalar_mul((m * n) % p, &g).unwrap();
                assert_eq!(nested, flat);
            }
        }
    }

    #[test]
    fn lift_vector_trivial_cases() {
        let curve = tiny_curve();
        let zero = FieldVector::pair(0, 0, 3);
        assert!(curve.lift_vector(&zero).unwrap().is_all_infinity());
        let e1 = FieldVector::pair(1, 0, 3);
        let lifted = curve.lift_vector(&e1).unwrap();
        assert_eq!(lifted.point(0), curve.base_point());
        assert!(lifted.point(1).is_infinity());
    }

    #[test]
    fn lift_vector_matches_componentwise_scalar_mul() {
        let curve = tiny_curve();
        let v = FieldVector::pair(2, 1, 3);
        let lifted = curve.lift_vector(&v).unwrap();
        assert_eq!(lifted.point(0), curve.scalar_mul(2, &curve.base_point()).unwrap());
        assert_eq!(lifted.point(1), curve.scalar_mul(1, &curve.base_point()).unwrap());
    }

    #[test]
    fn mixed_dot_trivial_cases() {
        let curve = tiny_curve();
        let k = FieldVector::pair(2, 2, 3);
        let zeros = curve.lift_vector(&FieldVector::pair(0, 0, 3)).unwrap();
        assert!(curve.mixed_dot(&k, &zeros).unwrap().is_infinity());

        let g = curve.base_point();
        let two_g = curve.scalar_mul(2, &g).unwrap();
        let pv = PointVector::new(vec![g, two_g]);
        assert_eq!(curve.mixed_dot(&FieldVector::pair(1, 0, 3), &pv).unwrap(), g);
    }

    #[test]
    fn mixed_product_law_exhaustive_at_p3() {
        // (k . t) G = k . (t G) over every pair of vectors in (F_3)^2.
        let curve = tiny_curve();
        let g = curve.base_point();
        for k0 in 0..3 {
            for k1 in 0..3 {
                for t0 in 0..3 {
                    for t1 in 0..3 {
                        let k = FieldVector::pair(k0, k1, 3);
                        let t = FieldVector::pair(t0, t1, 3);
                        let lhs = curve
                            .scalar_mul(dot(&k, &t).unwrap().value(), &g)
                            .unwrap();
                        let rhs = curve.mixed_dot(&k, &curve.lift_vector(&t).unwrap()).unwrap();
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_product_law_random_pairs() {
        let curve = tiny_curve();
        let g = curve.base_point();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = sample_nonzero_vector(&mut rng, 2, 3);
            let t = sample_nonzero_vector(&mut rng, 2, 3);
            let lhs = curve.scalar_mul(dot(&k, &t).unwrap().value(), &g).unwrap();
            let rhs = curve.mixed_dot(&k, &curve.lift_vector(&t).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn curve_params_validation_rejects_bad_inputs() {
        assert!(CurveParams::new(4, 1, 1, 0, 1, 3).is_err()); // q not prime
        assert!(CurveParams::new(5, 0, 0, 0, 0, 3).is_err()); // singular
        assert!(CurveParams::new(5, 1, 1, 0, 2, 3).is_err()); // G off curve
        assert!(CurveParams::new(5, 1, 1, 0, 1, 4).is_err()); // p not prime
        assert!(CurveParams::new(5, 1, 1, 0, 1, 5).is_err()); // pG != inf
    }
}
