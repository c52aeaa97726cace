//! Exact integer linear algebra over arbitrary-precision integers.
//!
//! Everything downstream (fan geometry, Chow presentations, chain complexes)
//! reduces to Smith normal form, integer kernels, and exact solvers from this
//! module. No floating point is used anywhere in the crate.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// Arbitrary-precision integer used throughout the crate.
pub type Int = BigInt;

/// Dense matrix of arbitrary-precision integers, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Int>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.at(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![Int::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Int::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Int) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                *m.at_mut(i, j) = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from machine-integer rows.
    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| Int::from(rows[i][j]))
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_i64_cols(cols: &[Vec<i64>]) -> Self {
        Self::from_i64_rows(cols).transpose()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &Int {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Int {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Int) {
        *self.at_mut(i, j) = v;
    }

    pub fn row(&self, i: usize) -> Vec<Int> {
        (0..self.cols).map(|j| self.at(i, j).clone()).collect()
    }

    pub fn col(&self, j: usize) -> Vec<Int> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn column_vector(v: &[Int]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i].clone())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if !b.is_zero() {
                        *out.at_mut(i, j) += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Int]) -> Vec<Int> {
        assert_eq!(self.cols, v.len(), "shape mismatch in mul_vec");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * &v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, j) + other.at(i, j))
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, j) - other.at(i, j))
    }

    pub fn neg(&self) -> IntMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| -self.at(i, j))
    }

    pub fn scale(&self, c: &Int) -> IntMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, j) * c)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.cols, "shape mismatch in vstack");
        Self::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows { self.at(i, j).clone() } else { other.at(i - self.rows, j).clone() }
        })
    }

    /// Places `self` left of `other`.
    pub fn hstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows, "shape mismatch in hstack");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols { self.at(i, j).clone() } else { other.at(i, j - self.cols).clone() }
        })
    }

    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> IntMatrix {
        Self::from_fn(row_idx.len(), col_idx.len(), |i, j| self.at(row_idx[i], col_idx[j]).clone())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[a] += c * row[b]
    fn add_row_multiple(&mut self, a: usize, b: usize, c: &Int) {
        if c.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = self.at(b, j) * c;
            *self.at_mut(a, j) += v;
        }
    }

    /// col[a] += c * col[b]
    fn add_col_multiple(&mut self, a: usize, b: usize, c: &Int) {
        if c.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = self.at(i, b) * c;
            *self.at_mut(i, a) += v;
        }
    }

    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            let v = -self.at(a, j).clone();
            *self.at_mut(a, j) = v;
        }
    }
}

/// Smith normal form `U * A * V = S` with unimodular `U`, `V`.
///
/// Invariants verified on construction: the product identity, a nonnegative
/// diagonal `S` with the divisibility chain d1 | d2 | ..., and (for dimensions
/// up to 200) |det U| = |det V| = 1 via fraction-free determinants. U and V
/// are products of elementary operations, so the determinant condition holds
/// structurally in all cases.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntMatrix,
    pub s: IntMatrix,
    pub v: IntMatrix,
    pub rank: usize,
}

/// Deterministic Smith normal form.
///
/// Pivot choice: the entry of smallest absolute value in the working
/// submatrix, ties broken by smallest (row, col). This makes the output a
/// pure function of the input.
pub fn smith(a: &IntMatrix) -> Smith {
    let (rows, cols) = (a.rows, a.cols);
    let mut s = a.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);

    let mut k = 0;
    while k < rows.min(cols) {
        // Find the pivot: smallest nonzero |entry| in the submatrix, ties by (i, j).
        let mut pivot: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if s.at(i, j).is_zero() {
                    continue;
                }
                match pivot {
                    None => pivot = Some((i, j)),
                    Some((pi, pj)) => {
                        let cur = s.at(i, j).abs();
                        let best = s.at(pi, pj).abs();
                        if cur < best {
                            pivot = Some((i, j));
                        }
                    }
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        s.swap_rows(k, pi);
        u.swap_rows(k, pi);
        s.swap_cols(k, pj);
        v.swap_cols(k, pj);
        if s.at(k, k).is_negative() {
            s.negate_row(k);
            u.negate_row(k);
        }

        // Reduce row and column k; restart pivot selection if a nonzero
        // remainder appears (it is strictly smaller than the pivot).
        let mut dirty = false;
        for i in (k + 1)..rows {
            if s.at(i, k).is_zero() {
                continue;
            }
            let q = s.at(i, k).div_floor(s.at(k, k));
            s.add_row_multiple(i, k, &-q.clone());
            u.add_row_multiple(i, k, &-q);
            if !s.at(i, k).is_zero() {
                dirty = true;
            }
        }
        for j in (k + 1)..cols {
            if s.at(k, j).is_zero() {
                continue;
            }
            let q = s.at(k, j).div_floor(s.at(k, k));
            s.add_col_multiple(j, k, &-q.clone());
            v.add_col_multiple(j, k, &-q);
            if !s.at(k, j).is_zero() {
                dirty = true;
            }
        }
        if dirty {
            continue;
        }

        // Row and column k are clear. Enforce the divisibility chain: if the
        // pivot does not divide some remaining entry, pull that row in and
        // redo this k.
        let piv = s.at(k, k).clone();
        let mut offender: Option<usize> = None;
        'outer: for i in (k + 1)..rows {
            for j in (k + 1)..cols {
                if !s.at(i, j).mod_floor(&piv).is_zero() {
                    offender = Some(i);
                    break 'outer;
                }
            }
        }
        if let Some(i) = offender {
            s.add_row_multiple(k, i, &Int::one());
            u.add_row_multiple(k, i, &Int::one());
            continue;
        }
        k += 1;
    }

    let rank = (0..rows.min(cols)).take_while(|&i| !s.at(i, i).is_zero()).count();
    let out = Smith { u, s, v, rank };
    verify_smith(a, &out);
    out
}

fn verify_smith(a: &IntMatrix, sm: &Smith) {
    let prod = sm.u.mul(a).mul(&sm.v);
    assert_eq!(prod, sm.s, "smith: U*A*V != S");
    let n = sm.s.rows.min(sm.s.cols);
    for i in 0..sm.s.rows {
        for j in 0..sm.s.cols {
            if i != j {
                assert!(sm.s.at(i, j).is_zero(), "smith: S not diagonal");
            }
        }
    }
    for i in 0..n {
        assert!(!sm.s.at(i, i).is_negative(), "smith: negative diagonal");
        if i + 1 < n && !sm.s.at(i + 1, i + 1).is_zero() {
            assert!(!sm.s.at(i, i).is_zero(), "smith: zero before nonzero on diagonal");
            assert!(
                sm.s.at(i + 1, i + 1).mod_floor(sm.s.at(i, i)).is_zero(),
                "smith: divisibility chain broken"
            );
        }
    }
    // Fraction-free determinant check at acceptance scale; above it the
    // elementary-operation construction already guarantees unimodularity.
    if sm.u.rows <= 200 {
        assert!(det_bareiss(&sm.u).abs().is_one(), "smith: |det U| != 1");
    }
    if sm.v.rows <= 200 {
        assert!(det_bareiss(&sm.v).abs().is_one(), "smith: |det V| != 1");
    }
}

/// Fraction-free (Bareiss) determinant of a square matrix.
pub fn det_bareiss(a: &IntMatrix) -> Int {
    assert_eq!(a.rows, a.cols, "det of non-square matrix");
    let n = a.rows;
    if n == 0 {
        return Int::one();
    }
    let mut m = a.clone();
    let mut sign = Int::one();
    let mut prev = Int::one();
    for k in 0..n - 1 {
        if m.at(k, k).is_zero() {
            let swap = ((k + 1)..n).find(|&i| !m.at(i, k).is_zero());
            match swap {
                Some(i) => {
                    m.swap_rows(k, i);
                    sign = -sign;
                }
                None => return Int::zero(),
            }
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let val = (m.at(i, j) * m.at(k, k) - m.at(i, k) * m.at(k, j)).div_floor(&prev);
                m.set(i, j, val);
            }
        }
        prev = m.at(k, k).clone();
    }
    sign * m.at(n - 1, n - 1).clone()
}

/// Rank of an integer matrix (via Smith normal form).
pub fn rank(a: &IntMatrix) -> usize {
    smith(a).rank
}

/// Invariants of the cokernel Z^rows / im(A): free rank and torsion factors > 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cokernel {
    pub rank: usize,
    pub torsion: Vec<Int>,
}

impl Cokernel {
    pub fn is_free(&self) -> bool {
        self.torsion.is_empty()
    }
}

/// Cokernel invariants of the map Z^cols -> Z^rows given by A.
pub fn cokernel(a: &IntMatrix) -> Cokernel {
    let sm = smith(a);
    let torsion: Vec<Int> =
        (0..sm.rank).map(|i| sm.s.at(i, i).clone()).filter(|d| !d.is_one()).collect();
    Cokernel { rank: a.rows - sm.rank, torsion }
}

/// Basis of the saturated kernel {x in Z^cols : A x = 0}, returned as matrix
/// columns. The basis extends to a basis of the ambient lattice; this is
/// certified on construction (the Smith form of the result has unit diagonal).
pub fn saturated_kernel(a: &IntMatrix) -> IntMatrix {
    let sm = smith(a);
    let k = a.cols - sm.rank;
    let idx: Vec<usize> = (sm.rank..a.cols).collect();
    let all_rows: Vec<usize> = (0..a.cols).collect();
    let basis = sm.v.submatrix(&all_rows, &idx);
    debug_assert!(a.mul(&basis).is_zero(), "kernel basis does not annihilate");
    if k > 0 {
        let cert = smith(&basis);
        assert_eq!(cert.rank, k, "kernel basis not independent");
        assert!(
            (0..k).all(|i| cert.s.at(i, i).is_one()),
            "kernel basis not saturated"
        );
    }
    basis
}

/// Integer solution X of A X = B, if one exists. Deterministic: free
/// coordinates are set to zero in Smith coordinates.
pub fn solve(a: &IntMatrix, b: &IntMatrix) -> Option<IntMatrix> {
    assert_eq!(a.rows, b.rows, "shape mismatch in solve");
    let sm = smith(a);
    let ub = sm.u.mul(b);
    let mut z = IntMatrix::zeros(a.cols, b.cols);
    for col in 0..b.cols {
        for i in 0..a.rows {
            if i < sm.rank {
                let d = sm.s.at(i, i);
                let (q, r) = ub.at(i, col).div_mod_floor(d);
                if !r.is_zero() {
                    return None;
                }
                z.set(i, col, q);
            } else if !ub.at(i, col).is_zero() {
                return None;
            }
        }
    }
    let x = sm.v.mul(&z);
    debug_assert_eq!(a.mul(&x), *b, "solve: verification failed");
    Some(x)
}

/// Rational solution of A x = b: returns (numerators, denominator) with the
/// denominator positive and the fraction vector reduced (gcd of all
/// numerators and the denominator is 1). Exact; no floating point.
pub fn solve_rational(a: &IntMatrix, b: &[Int]) -> Option<(Vec<Int>, Int)> {
    assert_eq!(a.rows, b.len(), "shape mismatch in solve_rational");
    let sm = smith(a);
    let ub = sm.u.mul_vec(b);
    // z_i = ub_i / d_i for i < rank; ub_i must vanish beyond the rank.
    for item in ub.iter().skip(sm.rank) {
        if !item.is_zero() {
            return None;
        }
    }
    // Common denominator: lcm of the diagonal entries involved.
    let mut denom = Int::one();
    for i in 0..sm.rank {
        denom = denom.lcm(sm.s.at(i, i));
    }
    let mut z = vec![Int::zero(); a.cols];
    for i in 0..sm.rank {
        z[i] = &ub[i] * (&denom / sm.s.at(i, i));
    }
    let mut x = sm.v.mul_vec(&z);
    // Reduce.
    let mut g = denom.clone();
    for xi in &x {
        g = g.gcd(xi);
        if g.is_one() {
            break;
        }
    }
    if !g.is_one() && !g.is_zero() {
        for xi in &mut x {
            *xi = &*xi / &g;
        }
        denom = &denom / &g;
    }
    debug_assert!(!denom.is_negative() && !denom.is_zero());
    Some((x, denom))
}

/// Does v lie in the column lattice of A?
pub fn col_lattice_contains(a: &IntMatrix, v: &[Int]) -> bool {
    solve(a, &IntMatrix::column_vector(v)).is_some()
}

/// Extended gcd over a slice: returns (g, coeffs) with sum(coeffs[i] * xs[i]) = g >= 0.
pub fn extended_gcd(xs: &[Int]) -> (Int, Vec<Int>) {
    let mut g = Int::zero();
    let mut coeffs = vec![Int::zero(); xs.len()];
    for (i, x) in xs.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        if g.is_zero() {
            if x.is_negative() {
                g = -x.clone();
                coeffs[i] = -Int::one();
            } else {
                g = x.clone();
                coeffs[i] = Int::one();
            }
            continue;
        }
        let e = g.extended_gcd(x);
        // e.gcd = e.x * g + e.y * x
        for c in coeffs.iter_mut() {
            *c = &*c * &e.x;
        }
        coeffs[i] = e.y.clone();
        g = e.gcd;
    }
    debug_assert!({
        let s: Int = xs.iter().zip(&coeffs).map(|(x, c)| x * c).sum();
        s == g
    });
    (g, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_i64_rows(rows)
    }

    #[test]
    fn smith_identity() {
        let a = IntMatrix::identity(3);
        let sm = smith(&a);
        assert_eq!(sm.rank, 3);
        assert_eq!(sm.s, IntMatrix::identity(3));
    }

    #[test]
    fn smith_known_torsion() {
        // diag(2, 6) has invariant factors 2, 6; the matrix [[2,0],[0,6]] keeps them,
        // while [[2,4],[4,2]] has factors 2, 6 as well (det = -12, gcd of entries 2).
        let a = m(&[vec![2, 4], vec![4, 2]]);
        let sm = smith(&a);
        assert_eq!(sm.rank, 2);
        assert_eq!(sm.s.at(0, 0), &Int::from(2));
        assert_eq!(sm.s.at(1, 1), &Int::from(6));
    }

    #[test]
    fn smith_rectangular_and_rank() {
        let a = m(&[vec![1, 2, 3], vec![2, 4, 6]]);
        let sm = smith(&a);
        assert_eq!(sm.rank, 1);
        assert_eq!(sm.s.at(0, 0), &Int::one());
    }

    #[test]
    fn minor_gcd_oracle_matches_smith() {
        // Independent characterization: d1*...*dk equals the gcd of all k x k minors.
        let a = m(&[
            vec![2, 4, 4, 0],
            vec![-6, 6, 12, 2],
            vec![10, -4, -16, 7],
            vec![0, 2, 2, 1],
        ]);
        let sm = smith(&a);
        for k in 1..=3usize {
            let mut g = Int::zero();
            let idx: Vec<usize> = (0..4).collect();
            for rows_sel in subsets(&idx, k) {
                for cols_sel in subsets(&idx, k) {
                    let d = det_bareiss(&a.submatrix(&rows_sel, &cols_sel));
                    g = g.gcd(&d);
                }
            }
            let prod: Int = (0..k).map(|i| sm.s.at(i, i).clone()).product();
            if k <= sm.rank {
                assert_eq!(prod, g, "minor gcd mismatch at k={k}");
            } else {
                assert!(g.is_zero());
            }
        }
    }

    fn subsets(idx: &[usize], k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let n = idx.len();
        let mut cur = Vec::new();
        fn rec(idx: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..idx.len() {
                cur.push(idx[i]);
                rec(idx, k, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(idx, k, 0, &mut cur, &mut out);
        let _ = n;
        out
    }

    #[test]
    fn saturated_kernel_basic() {
        // Kernel of [1 1 1] is rank 2 and saturated.
        let a = m(&[vec![1, 1, 1]]);
        let k = saturated_kernel(&a);
        assert_eq!(k.cols(), 2);
        assert!(a.mul(&k).is_zero());
    }

    #[test]
    fn saturated_kernel_of_scaled_matrix_is_saturated() {
        // [2 2] has the same rational kernel as [1 1]; the integer kernel basis
        // must be primitive (saturation), i.e. (1, -1), never (2, -2).
        let a = m(&[vec![2, 2]]);
        let k = saturated_kernel(&a);
        assert_eq!(k.cols(), 1);
        let g = k.at(0, 0).gcd(k.at(1, 0));
        assert!(g.is_one());
    }

    #[test]
    fn solve_and_unsolvable() {
        let a = m(&[vec![2, 0], vec![0, 3]]);
        let b = IntMatrix::from_i64_rows(&[vec![4], vec![9]]);
        let x = solve(&a, &b).unwrap();
        assert_eq!(a.mul(&x), b);
        let b2 = IntMatrix::from_i64_rows(&[vec![1], vec![0]]);
        assert!(solve(&a, &b2).is_none());
    }

    #[test]
    fn solve_rational_basic() {
        let a = m(&[vec![2, 0], vec![0, 2]]);
        let b = vec![Int::from(1), Int::from(3)];
        let (num, den) = solve_rational(&a, &b).unwrap();
        assert_eq!(den, Int::from(2));
        assert_eq!(num, vec![Int::from(1), Int::from(3)]);
        // Inconsistent system.
        let a2 = m(&[vec![1, 1], vec![1, 1]]);
        let b2 = vec![Int::from(0), Int::from(1)];
        assert!(solve_rational(&a2, &b2).is_none());
    }

    #[test]
    fn extended_gcd_works() {
        let xs = vec![Int::from(12), Int::from(-8), Int::from(30)];
        let (g, c) = extended_gcd(&xs);
        assert_eq!(g, Int::from(2));
        let s: Int = xs.iter().zip(&c).map(|(x, y)| x * y).sum();
        assert_eq!(s, g);
    }

    #[test]
    fn det_bareiss_known() {
        let a = m(&[vec![1, 2], vec![3, 4]]);
        assert_eq!(det_bareiss(&a), Int::from(-2));
        let b = m(&[vec![0, 1], vec![1, 0]]);
        assert_eq!(det_bareiss(&b), Int::from(-1));
        let c = m(&[vec![2, 0, 0], vec![0, 0, 3], vec![0, 5, 0]]);
        assert_eq!(det_bareiss(&c), Int::from(-30));
    }

    #[test]
    fn smith_determinism() {
        let a = m(&[vec![3, 1, 4], vec![1, 5, 9], vec![2, 6, 5]]);
        let s1 = smith(&a);
        let s2 = smith(&a);
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.v, s2.v);
        assert_eq!(s1.s, s2.s);
    }
}
