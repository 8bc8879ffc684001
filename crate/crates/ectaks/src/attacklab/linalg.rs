//! Dense linear algebra over `F_p`, sized for the attack's small systems.

use crate::algebra::{FieldElement, FieldVector};
use crate::error::{Error, Result};

/// Row-major matrix over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatFp {
    rows: usize,
    cols: usize,
    modulus: u64,
    data: Vec<FieldElement>,
}

/// Result of solving `Ax = b`: one point, or a whole affine subspace given by
/// a particular solution and a basis of the kernel (`p^basis.len()` points).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Unique(FieldVector),
    Affine {
        particular: FieldVector,
        basis: Vec<FieldVector>,
    },
}

impl SolveOutcome {
    pub fn solution_count(&self, p: u64) -> u128 {
        match self {
            SolveOutcome::Unique(_) => 1,
            SolveOutcome::Affine { basis, .. } => (p as u128).pow(basis.len() as u32),
        }
    }

    /// True when `x` solves the system this outcome came from; affine spaces
    /// are checked by membership against the basis parametrization.
    pub fn contains(&self, x: &FieldVector, matrix: &MatFp, rhs: &FieldVector) -> Result<bool> {
        Ok(matrix.mul_vector(x)? == *rhs)
    }
}

impl MatFp {
    pub fn new(rows: usize, cols: usize, modulus: u64) -> Self {
        MatFp {
            rows,
            cols,
            modulus,
            data: vec![FieldElement::zero(modulus); rows * cols],
        }
    }

    pub fn from_rows(rows: &[FieldVector]) -> Self {
        assert!(!rows.is_empty());
        let cols = rows[0].len();
        let modulus = rows[0].modulus();
        let mut m = MatFp::new(rows.len(), cols, modulus);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols);
            for c in 0..cols {
                m.set(r, c, row.coord(c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        assert_eq!(v.modulus(), self.modulus);
        self.data[r * self.cols + c] = v;
    }

    pub fn identity(n: usize, modulus: u64) -> Self {
        let mut m = MatFp::new(n, n, modulus);
        for i in 0..n {
            m.set(i, i, FieldElement::one(modulus));
        }
        m
    }

    pub fn row(&self, r: usize) -> FieldVector {
        FieldVector::new((0..self.cols).map(|c| self.get(r, c)).collect())
    }

    pub fn mul_vector(&self, x: &FieldVector) -> Result<FieldVector> {
        if x.len() != self.cols || x.modulus() != self.modulus {
            return Err(Error::ParameterMismatch(
                "matrix-vector product shape mismatch".into(),
            ));
        }
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = FieldElement::zero(self.modulus);
            for c in 0..self.cols {
                acc = acc + self.get(r, c) * x.coord(c);
            }
            out.push(acc);
        }
        Ok(FieldVector::new(out))
    }

    /// Row echelon form via elimination with first-nonzero pivoting in
    /// ascending row order; deterministic, no numerical concerns over `F_p`.
    /// Returns (echelon matrix, pivot columns, determinant scale tracking).
    fn echelon(&self) -> (MatFp, Vec<usize>, FieldElement, usize) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut det_scale = FieldElement::one(self.modulus);
        let mut swaps = 0usize;
        let mut pivot_row = 0usize;
        for col in 0..m.cols {
            let Some(found) = (pivot_row..m.rows).find(|&r| !m.get(r, col).is_zero()) else {
                continue;
            };
            if found != pivot_row {
                for c in 0..m.cols {
                    let tmp = m.get(found, c);
                    m.set(found, c, m.get(pivot_row, c));
                    m.set(pivot_row, c, tmp);
                }
                swaps += 1;
            }
            let pivot = m.get(pivot_row, col);
            det_scale = det_scale * pivot;
            let inv = pivot.inv().expect("pivot is nonzero");
            for c in col..m.cols {
                m.set(pivot_row, c, m.get(pivot_row, c) * inv);
            }
            for r in 0..m.rows {
                if r != pivot_row && !m.get(r, col).is_zero() {
                    let factor = m.get(r, col);
                    for c in col..m.cols {
                        let v = m.get(r, c) - factor * m.get(pivot_row, c);
                        m.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            pivot_row += 1;
            if pivot_row == m.rows {
                break;
            }
        }
        (m, pivots, det_scale, swaps)
    }

    pub fn rank(&self) -> usize {
        self.echelon().1.len()
    }

    /// Determinant of a square matrix, via the echelon pivots.
    pub fn det(&self) -> FieldElement {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let (_, pivots, det_scale, swaps) = self.echelon();
        if pivots.len() < self.rows {
            return FieldElement::zero(self.modulus);
        }
        if swaps % 2 == 0 {
            det_scale
        } else {
            det_scale.neg()
        }
    }

    /// Solves `Ax = b` over `F_p`. Inconsistent systems report their rank
    /// mismatch as an error; the attack systems never produce one because the
    /// true secret always solves them.
    pub fn solve(&self, b: &FieldVector) -> Result<SolveOutcome> {
        if b.len() != self.rows || b.modulus() != self.modulus {
            return Err(Error::ParameterMismatch("rhs shape mismatch".into()));
        }
        // Eliminate on the augmented matrix.
        let mut aug = MatFp::new(self.rows, self.cols + 1, self.modulus);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, self.cols, b.coord(r));
        }
        let (reduced, pivots, _, _) = aug.echelon();
        // A pivot in the augmented column means rank(A|b) > rank(A).
        if pivots.contains(&self.cols) {
            return Err(Error::ParameterMismatch(
                "inconsistent linear system: rank(A|b) exceeds rank(A)".into(),
            ));
        }
        let mut particular = vec![FieldElement::zero(self.modulus); self.cols];
        for (row_idx, &col) in pivots.iter().enumerate() {
            particular[col] = reduced.get(row_idx, self.cols);
        }
        let particular = FieldVector::new(particular);
        let free_cols: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        if free_cols.is_empty() {
            return Ok(SolveOutcome::Unique(particular));
        }
        // Kernel basis: one vector per free column.
        let mut basis = Vec::with_capacity(free_cols.len());
        for &free in &free_cols {
            let mut v = vec![FieldElement::zero(self.modulus); self.cols];
            v[free] = FieldElement::one(self.modulus);
            for (row_idx, &col) in pivots.iter().enumerate() {
                v[col] = reduced.get(row_idx, free).neg();
            }
            basis.push(FieldVector::new(v));
        }
        Ok(SolveOutcome::Affine { particular, basis })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn mat(p: u64, rows: &[&[u64]]) -> MatFp {
        let rows: Vec<FieldVector> = rows.iter().map(|r| FieldVector::from_values(r, p)).collect();
        MatFp::from_rows(&rows)
    }

    /// Independent determinant: sum over all permutations with sign, the
    /// textbook definition, used as the oracle for the elimination route.
    fn det_by_permutation_expansion(m: &MatFp) -> FieldElement {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for shorter in permutations(n - 1) {
                for slot in 0..n {
                    let mut perm = shorter.clone();
                    perm.insert(slot, n - 1);
                    out.push(perm);
                }
            }
            out
        }
        fn parity(perm: &[usize]) -> bool {
            let mut inversions = 0;
            for i in 0..perm.len() {
                for j in (i + 1)..perm.len() {
                    if perm[i] > perm[j] {
                        inversions += 1;
                    }
                }
            }
            inversions % 2 == 0
        }
        let p = m.modulus();
        let mut total = FieldElement::zero(p);
        for perm in permutations(m.rows()) {
            let mut term = FieldElement::one(p);
            for (r, &c) in perm.iter().enumerate() {
                term = term * m.get(r, c);
            }
            total = total + if parity(&perm) { term } else { term.neg() };
        }
        total
    }

    #[test]
    fn identity_system_returns_the_rhs() {
        let a = MatFp::identity(4, 7);
        let b = FieldVector::from_values(&[3, 1, 4, 1], 7);
        match a.solve(&b).unwrap() {
            SolveOutcome::Unique(x) => assert_eq!(x, b),
            other => panic!("expected unique, got {other:?}"),
        }
    }

    #[test]
    fn known_rank_two_system_has_a_plane_of_solutions() {
        // Rows 3,4 are multiples of rows 1,2.
        let a = mat(5, &[&[1, 2, 3, 4], &[0, 0, 1, 2], &[2, 4, 6, 8], &[0, 0, 2, 4]]);
        assert_eq!(a.rank(), 2);
        assert!(a.det().is_zero());
        let b = FieldVector::from_values(&[1, 2, 2, 4], 5);
        match a.solve(&b).unwrap() {
            SolveOutcome::Affine { particular, basis } => {
                assert_eq!(basis.len(), 2);
                assert_eq!(a.mul_vector(&particular).unwrap(), b);
                for v in &basis {
                    let img = a.mul_vector(v).unwrap();
                    assert!(img.coords().iter().all(|c| c.is_zero()));
                }
            }
            other => panic!("expected affine, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_system_is_reported() {
        let a = mat(5, &[&[1, 0], &[2, 0]]);
        let b = FieldVector::from_values(&[1, 3], 5);
        assert!(matches!(a.solve(&b), Err(Error::ParameterMismatch(_))));
    }

    #[test]
    fn determinant_matches_permutation_expansion_on_random_matrices() {
        // 10^3 random 4x4 matrices at p = 5 against the exhaustive oracle.
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let mut a = MatFp::new(4, 4, 5);
            for r in 0..4 {
                for c in 0..4 {
                    a.set(r, c, FieldElement::new(rng.random_range(0..5), 5));
                }
            }
            assert_eq!(a.det(), det_by_permutation_expansion(&a));
            // Rank and determinant agree on singularity.
            assert_eq!(a.rank() == 4, !a.det().is_zero());
        }
    }

    #[test]
    fn solutions_enumerated_by_the_basis_match_brute_force() {
        // Exhaustive cross-check at p = 3: the affine parametrization hits
        // exactly the brute-force solution set.
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let p = 3u64;
        for _ in 0..200 {
            let mut a = MatFp::new(3, 3, p);
            for r in 0..3 {
                for c in 0..3 {
                    a.set(r, c, FieldElement::new(rng.random_range(0..p), p));
                }
            }
            // Build a consistent rhs from a random preimage.
            let x0 = FieldVector::from_values(
                &[
                    rng.random_range(0..p),
                    rng.random_range(0..p),
                    rng.random_range(0..p),
                ],
                p,
            );
            let b = a.mul_vector(&x0).unwrap();
            let outcome = a.solve(&b).unwrap();

            let mut brute = std::collections::BTreeSet::new();
            for v0 in 0..p {
                for v1 in 0..p {
                    for v2 in 0..p {
                        let x = FieldVector::from_values(&[v0, v1, v2], p);
                        if a.mul_vector(&x).unwrap() == b {
                            brute.insert((v0, v1, v2));
                        }
                    }
                }
            }
            let enumerated: std::collections::BTreeSet<(u64, u64, u64)> = match &outcome {
                SolveOutcome::Unique(x) => {
                    std::iter::once((x.coord(0).value(), x.coord(1).value(), x.coord(2).value()))
                        .collect()
                }
                SolveOutcome::Affine { particular, basis } => {
                    let mut set = std::collections::BTreeSet::new();
                    let mut coeffs = vec![0u64; basis.len()];
                    loop {
                        let mut x = particular.clone();
                        for (c, v) in coeffs.iter().zip(basis.iter()) {
                            x = x.add(&v.scale(FieldElement::new(*c, p)));
                        }
                        set.insert((x.coord(0).value(), x.coord(1).value(), x.coord(2).value()));
                        let mut carry = 0;
                        loop {
                            if carry == coeffs.len() {
                                break;
                            }
                            coeffs[carry] += 1;
                            if coeffs[carry] < p {
                                break;
                            }
                            coeffs[carry] = 0;
                            carry += 1;
                        }
                        if carry == coeffs.len() {
                            break;
                        }
                    }
                    set
                }
            };
            assert_eq!(enumerated, brute);
            assert_eq!(outcome.solution_count(p) as usize, brute.len());
        }
    }
}
