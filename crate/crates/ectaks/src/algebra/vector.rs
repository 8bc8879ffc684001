//! Vectors over `F_p` and the scalar product the whole scheme is built on.

use rand::Rng;

use crate::algebra::field::FieldElement;
use crate::error::{Error, Result};

/// A length-`d` vector over `F_p`. The scheme fixes `d = 2` at provisioning
/// time; nothing below cares about the length beyond agreement checks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldVector {
    coords: Vec<FieldElement>,
}

impl FieldVector {
    pub fn new(coords: Vec<FieldElement>) -> Self {
        assert!(!coords.is_empty(), "vectors must have at least one coordinate");
        let m = coords[0].modulus();
        assert!(
            coords.iter().all(|c| c.modulus() == m),
            "vector coordinates must share one modulus"
        );
        FieldVector { coords }
    }

    /// Convenience constructor from raw residues.
    pub fn from_values(values: &[u64], modulus: u64) -> Self {
        FieldVector::new(values.iter().map(|&v| FieldElement::new(v, modulus)).collect())
    }

    pub fn pair(a: u64, b: u64, modulus: u64) -> Self {
        FieldVector::from_values(&[a, b], modulus)
    }

    pub fn zero(len: usize, modulus: u64) -> Self {
        FieldVector::new(vec![FieldElement::zero(modulus); len])
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn modulus(&self) -> u64 {
        self.coords[0].modulus()
    }

    pub fn coords(&self) -> &[FieldElement] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> FieldElement {
        self.coords[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Componentwise scalar multiple `s * v`.
    pub fn scale(&self, s: FieldElement) -> FieldVector {
        FieldVector::new(self.coords.iter().map(|c| *c * s).collect())
    }

    pub fn add(&self, rhs: &FieldVector) -> FieldVector {
        assert_eq!(self.len(), rhs.len());
        FieldVector::new(
            self.coords
                .iter()
                .zip(rhs.coords.iter())
                .map(|(a, b)| *a + *b)
                .collect(),
        )
    }
}

impl std::fmt::Display for FieldVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Scalar product `sum u_i v_i` over `F_p`.
pub fn dot(u: &FieldVector, v: &FieldVector) -> Result<FieldElement> {
    if u.len() != v.len() {
        return Err(Error::ParameterMismatch(format!(
            "dot product on vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.modulus() != v.modulus() {
        return Err(Error::ParameterMismatch(format!(
            "dot product across fields F_{} and F_{}",
            u.modulus(),
            v.modulus()
        )));
    }
    let mut acc = FieldElement::zero(u.modulus());
    for (a, b) in u.coords.iter().zip(v.coords.iter()) {
        acc = acc + *a * *b;
    }
    Ok(acc)
}

/// Uniform vector over `(F_p)^d`.
pub fn sample_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, modulus: u64) -> FieldVector {
    FieldVector::new(
        (0..len)
            .map(|_| FieldElement::new(rng.random_range(0..modulus), modulus))
            .collect(),
    )
}

/// Uniform vector over `(F_p)^d` minus the origin, by rejection.
pub fn sample_nonzero_vector<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    modulus: u64,
) -> FieldVector {
    loop {
        let v = sample_vector(rng, len, modulus);
        if !v.is_zero() {
            return v;
        }
    }
}

/// Uniform sample from the solution set of `a . x = c`.
///
/// For `a != 0` the solutions form an affine subspace with `p^(d-1)` points:
/// all coordinates except one pivot are free, and the pivot is solved for.
pub fn solve_dot_constraint<R: Rng + ?Sized>(
    a: &FieldVector,
    c: FieldElement,
    rng: &mut R,
) -> Result<FieldVector> {
    if a.is_zero() {
        return Err(Error::DegenerateConstraint);
    }
    let p = a.modulus();
    if c.modulus() != p {
        return Err(Error::ParameterMismatch(format!(
            "constraint value in F_{} against vector over F_{p}",
            c.modulus()
        )));
    }
    let pivot = a
        .coords()
        .iter()
        .position(|x| !x.is_zero())
        .expect("nonzero vector has a nonzero coordinate");
    let mut coords: Vec<FieldElement> = (0..a.len())
        .map(|_| FieldElement::new(rng.random_range(0..p), p))
        .collect();
    // c - sum of the free terms, divided by the pivot coefficient.
    let mut rest = FieldElement::zero(p);
    for (i, x) in coords.iter().enumerate() {
        if i != pivot {
            rest = rest + a.coord(i) * *x;
        }
    }
    coords[pivot] = (c - rest).div(&a.coord(pivot))?;
    Ok(FieldVector::new(coords))
}

/// Rejection-sampling wrapper for the extra side conditions the scheme
/// attaches to its random choices (nonzero vectors, nonzero products).
pub fn solve_dot_constraint_where<R, F>(
    a: &FieldVector,
    c: FieldElement,
    rng: &mut R,
    max_attempts: u32,
    mut accept: F,
) -> Result<FieldVector>
where
    R: Rng + ?Sized,
    F: FnMut(&FieldVector) -> bool,
{
    for _ in 0..max_attempts {
        let x = solve_dot_constraint(a, c, rng)?;
        if accept(&x) {
            return Ok(x);
        }
    }
    Err(Error::InfeasibleConstraint {
        attempts: max_attempts,
    })
}

/// Rejection-sampling wrapper over the whole space, same contract as
/// [`solve_dot_constraint_where`].
pub fn sample_vector_where<R, F>(
    rng: &mut R,
    len: usize,
    modulus: u64,
    max_attempts: u32,
    mut accept: F,
) -> Result<FieldVector>
where
    R: Rng + ?Sized,
    F: FnMut(&FieldVector) -> bool,
{
    for _ in 0..max_attempts {
        let v = sample_vector(rng, len, modulus);
        if accept(&v) {
            return Ok(v);
        }
    }
    Err(Error::InfeasibleConstraint {
        attempts: max_attempts,
    })
}
