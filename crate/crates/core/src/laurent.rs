//! Laurent polynomials over the prime field, matrices of such, and
//! `k[x]`-lattices inside `k[x, x^-1]^r` presented by canonical
//! (column-Hermite) bases.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::padics::{PadicError, PrimeField};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LaurentError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("division is not exact")]
    InexactDivision,
    #[error("division by zero polynomial")]
    DivisionByZero,
    #[error("generators do not span a full-rank lattice (rank {found} of {expected})")]
    NotFullRank { found: usize, expected: usize },
    #[error("matrix dimensions {0}x{1} and {2}x{3} are incompatible")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// A Laurent polynomial `Σ c_k x^k` with coefficients in F_p, stored sparsely
/// with no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentPoly {
    field: PrimeField,
    terms: BTreeMap<i64, u64>,
}

impl LaurentPoly {
    pub fn zero(field: PrimeField) -> Self {
        LaurentPoly {
            field,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(field: PrimeField) -> Self {
        Self::monomial(field, 0, 1)
    }

    pub fn monomial(field: PrimeField, exp: i64, coeff: u64) -> Self {
        let mut terms = BTreeMap::new();
        let c = coeff % field.p();
        if c != 0 {
            terms.insert(exp, c);
        }
        LaurentPoly { field, terms }
    }

    pub fn constant(field: PrimeField, coeff: u64) -> Self {
        Self::monomial(field, 0, coeff)
    }

    pub fn from_terms(field: PrimeField, terms: &[(i64, u64)]) -> Self {
        let mut out = Self::zero(field);
        for &(e, c) in terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exp: i64) -> u64 {
        *self.terms.get(&exp).unwrap_or(&0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.terms.iter().map(|(&e, &c)| (e, c))
    }

    /// Smallest exponent with nonzero coefficient; `None` for the zero poly.
    pub fn valuation(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    /// Largest exponent with nonzero coefficient.
    pub fn degree(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    pub fn leading_coeff(&self) -> u64 {
        self.degree().map(|d| self.coeff(d)).unwrap_or(0)
    }

    /// `Some((exp, coeff))` when the polynomial has exactly one term.
    pub fn as_monomial(&self) -> Option<(i64, u64)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(&e, &c)| (e, c))
        } else {
            None
        }
    }

    fn add_term(&mut self, exp: i64, coeff: u64) {
        let c = self.field.add(self.coeff(exp), coeff % self.field.p());
        if c == 0 {
            self.terms.remove(&exp);
        } else {
            self.terms.insert(exp, c);
        }
    }

    pub fn add(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e, c);
        }
        out
    }

    pub fn sub(&self, other: &LaurentPoly) -> LaurentPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> LaurentPoly {
        let terms = self
            .terms
            .iter()
            .map(|(&e, &c)| (e, self.field.neg(c)))
            .collect();
        LaurentPoly {
            field: self.field,
            terms,
        }
    }

    pub fn scale(&self, c: u64) -> LaurentPoly {
        let c = c % self.field.p();
        if c == 0 {
            return Self::zero(self.field);
        }
        let terms = self
            .terms
            .iter()
            .map(|(&e, &k)| (e, self.field.mul(k, c)))
            .collect();
        LaurentPoly {
            field: self.field,
            terms,
        }
    }

    /// Multiplication by the monomial `c·x^k`.
    pub fn mul_monomial(&self, exp: i64, coeff: u64) -> LaurentPoly {
        let c = coeff % self.field.p();
        if c == 0 {
            return Self::zero(self.field);
        }
        let terms = self
            .terms
            .iter()
            .map(|(&e, &k)| (e + exp, self.field.mul(k, c)))
            .collect();
        LaurentPoly {
            field: self.field,
            terms,
        }
    }

    pub fn mul(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = Self::zero(self.field);
        for (e1, c1) in self.terms() {
            for (e2, c2) in other.terms() {
                out.add_term(e1 + e2, self.field.mul(c1, c2));
            }
        }
        out
    }

    /// Exact division in `k[x, x^-1]`; fails unless the remainder vanishes.
    pub fn div_exact(&self, divisor: &LaurentPoly) -> Result<LaurentPoly, LaurentError> {
        if divisor.is_zero() {
            return Err(LaurentError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Self::zero(self.field));
        }
        let shift = divisor.valuation().unwrap();
        let d = divisor.mul_monomial(-shift, 1);
        let mut rem = self.clone();
        let mut quot = Self::zero(self.field);
        let d_deg = d.degree().unwrap();
        let d_lead_inv = self.field.inv(d.leading_coeff());
        while !rem.is_zero() {
            let r_deg = rem.degree().unwrap();
            let r_val = rem.valuation().unwrap();
            if r_deg - r_val < d_deg {
                return Err(LaurentError::InexactDivision);
            }
            let c = self.field.mul(rem.leading_coeff(), d_lead_inv);
            let e = r_deg - d_deg;
            quot.add_term(e, c);
            rem = rem.sub(&d.mul_monomial(e, c));
        }
        Ok(quot.mul_monomial(-shift, 1))
    }

    /// Substitution `x → x^k` for `k ≥ 1`.
    pub fn subst_pow(&self, k: i64) -> LaurentPoly {
        assert!(k >= 1);
        let terms = self.terms.iter().map(|(&e, &c)| (e * k, c)).collect();
        LaurentPoly {
            field: self.field,
            terms,
        }
    }

    /// Inverse of `subst_pow`: succeeds only when every exponent is a
    /// multiple of k.
    pub fn unsubst_pow(&self, k: i64) -> Option<LaurentPoly> {
        assert!(k >= 1);
        let mut terms = BTreeMap::new();
        for (e, c) in self.terms() {
            if e % k != 0 {
                return None;
            }
            terms.insert(e / k, c);
        }
        Some(LaurentPoly {
            field: self.field,
            terms,
        })
    }

    /// Divided-power derivative: `∂^(a)(x^k) = binom(k, a)·x^(k-a)` extended
    /// linearly. `∂^(0)` is the identity.
    pub fn dp_derivative(&self, a: u64) -> LaurentPoly {
        let mut out = Self::zero(self.field);
        for (e, c) in self.terms() {
            let b = self.field.binom_int(e, a);
            if b != 0 {
                out.add_term(e - a as i64, self.field.mul(c, b));
            }
        }
        out
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match e {
                0 => write!(f, "{c}")?,
                1 if c == 1 => write!(f, "x")?,
                1 => write!(f, "{c}x")?,
                _ if c == 1 => write!(f, "x^{e}")?,
                _ => write!(f, "{c}x^{e}")?,
            }
        }
        Ok(())
    }
}

/// A matrix with Laurent-polynomial entries, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    entries: Vec<LaurentPoly>,
}

impl OperatorMatrix {
    pub fn zero(field: PrimeField, rows: usize, cols: usize) -> Self {
        OperatorMatrix {
            field,
            rows,
            cols,
            entries: vec![LaurentPoly::zero(field); rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            *m.get_mut(i, i) = LaurentPoly::one(field);
        }
        m
    }

    pub fn scalar(field: PrimeField, n: usize, f: &LaurentPoly) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            *m.get_mut(i, i) = f.clone();
        }
        m
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut LaurentPoly {
        &mut self.entries[i * self.cols + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(LaurentPoly::is_zero)
    }

    pub fn column(&self, j: usize) -> Vec<LaurentPoly> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn from_columns(
        field: PrimeField,
        rows: usize,
        columns: &[Vec<LaurentPoly>],
    ) -> OperatorMatrix {
        let mut m = Self::zero(field, rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (i, f) in col.iter().enumerate() {
                *m.get_mut(i, j) = f.clone();
            }
        }
        m
    }

    pub fn add(&self, other: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        OperatorMatrix {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn sub(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self.add(&other.map(|f| f.neg()))
    }

    pub fn map(&self, f: impl Fn(&LaurentPoly) -> LaurentPoly) -> OperatorMatrix {
        OperatorMatrix {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, c: u64) -> OperatorMatrix {
        self.map(|f| f.scale(c))
    }

    pub fn scale_poly(&self, g: &LaurentPoly) -> OperatorMatrix {
        self.map(|f| f.mul(g))
    }

    pub fn mul_monomial(&self, exp: i64, coeff: u64) -> OperatorMatrix {
        self.map(|f| f.mul_monomial(exp, coeff))
    }

    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zero(self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let prod = a.mul(b);
                    let cur = out.get(i, j).add(&prod);
                    *out.get_mut(i, j) = cur;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[LaurentPoly]) -> Vec<LaurentPoly> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = LaurentPoly::zero(self.field);
                for j in 0..self.cols {
                    acc = acc.add(&self.get(i, j).mul(&v[j]));
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> OperatorMatrix {
        let mut out = Self::zero(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.get_mut(j, i) = self.get(i, j).clone();
            }
        }
        out
    }

    /// Kronecker product; the index pairing is `(i, j) → i·other.rows + j`
    /// on the row side and likewise on columns.
    pub fn kron(&self, other: &OperatorMatrix) -> OperatorMatrix {
        let mut out = Self::zero(
            self.field,
            self.rows * other.rows,
            self.cols * other.cols,
        );
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        *out.get_mut(i * other.rows + k, j * other.cols + l) =
                            a.mul(other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Determinant by cofactor expansion; intended for small matrices.
    pub fn det(&self) -> LaurentPoly {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        match n {
            0 => LaurentPoly::one(self.field),
            1 => self.get(0, 0).clone(),
            _ => {
                let mut acc = LaurentPoly::zero(self.field);
                for j in 0..n {
                    let a = self.get(0, j);
                    if a.is_zero() {
                        continue;
                    }
                    let minor = self.minor(0, j).det();
                    let term = a.mul(&minor);
                    acc = if j % 2 == 0 {
                        acc.add(&term)
                    } else {
                        acc.sub(&term)
                    };
                }
                acc
            }
        }
    }

    fn minor(&self, row: usize, col: usize) -> OperatorMatrix {
        let mut out = Self::zero(self.field, self.rows - 1, self.cols - 1);
        let mut r = 0;
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let mut c = 0;
            for j in 0..self.cols {
                if j == col {
                    continue;
                }
                *out.get_mut(r, c) = self.get(i, j).clone();
                c += 1;
            }
            r += 1;
        }
        out
    }

    /// Adjugate matrix: `adj(M)·M = det(M)·I`.
    pub fn adjugate(&self) -> OperatorMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return self.clone();
        }
        let mut out = Self::zero(self.field, n, n);
        for i in 0..n {
            for j in 0..n {
                let cof = self.minor(i, j).det();
                let cof = if (i + j) % 2 == 0 { cof } else { cof.neg() };
                *out.get_mut(j, i) = cof;
            }
        }
        out
    }

    pub fn subst_pow(&self, k: i64) -> OperatorMatrix {
        self.map(|f| f.subst_pow(k))
    }

    /// Smallest valuation over all entries; `None` if the matrix is zero.
    pub fn min_valuation(&self) -> Option<i64> {
        self.entries.iter().filter_map(LaurentPoly::valuation).min()
    }

    /// Residue at `x = 0`: the matrix of constant terms. Entries must have
    /// nonnegative valuation.
    pub fn residue(&self) -> Option<crate::linalg::FpMatrix> {
        if self.min_valuation().unwrap_or(0) < 0 {
            return None;
        }
        let mut m = crate::linalg::FpMatrix::zero(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j).coeff(0));
            }
        }
        Some(m)
    }
}

impl fmt::Display for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            write!(f, "[ ")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Column Hermite normal form over `k[x]` of a polynomial matrix, computed by
/// unimodular column operations. The result is lower triangular with monic
/// diagonal pivots and, in each row, entries left of the pivot of degree
/// strictly less than the pivot's. Zero columns are dropped.
fn column_hnf(field: PrimeField, rows: usize, mut cols: Vec<Vec<LaurentPoly>>) -> Vec<Vec<LaurentPoly>> {
    debug_assert!(cols
        .iter()
        .flatten()
        .all(|f| f.valuation().unwrap_or(0) >= 0));
    let mut pivot = 0usize;
    for row in 0..rows {
        if pivot >= cols.len() {
            break;
        }
        loop {
            // Find the column (at index >= pivot) of minimal degree in this row.
            let mut best: Option<(usize, i64)> = None;
            for (j, col) in cols.iter().enumerate().skip(pivot) {
                if let Some(d) = col[row].degree() {
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
            }
            let Some((jmin, _)) = best else {
                break;
            };
            cols.swap(pivot, jmin);
            // Reduce every other candidate column modulo the pivot column.
            let mut progress = false;
            for j in pivot + 1..cols.len() {
                if cols[j][row].is_zero() {
                    continue;
                }
                let q = poly_quotient(&cols[j][row], &cols[pivot][row], field);
                if !q.is_zero() {
                    for i in 0..rows {
                        let sub = cols[pivot][i].mul(&q);
                        cols[j][i] = cols[j][i].sub(&sub);
                    }
                }
                if !cols[j][row].is_zero() {
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if cols[pivot][row].is_zero() {
            continue;
        }
        // Make the pivot monic, then reduce earlier columns in this row.
        let inv = field.inv(cols[pivot][row].leading_coeff());
        for i in 0..rows {
            cols[pivot][i] = cols[pivot][i].scale(inv);
        }
        for j in 0..pivot {
            let q = poly_quotient(&cols[j][row], &cols[pivot][row], field);
            if !q.is_zero() {
                for i in 0..rows {
                    let sub = cols[pivot][i].mul(&q);
                    cols[j][i] = cols[j][i].sub(&sub);
                }
            }
        }
        pivot += 1;
    }
    cols.truncate(pivot);
    cols
}

/// Polynomial quotient of `a` by nonzero `b` (floor division in `k[x]`).
fn poly_quotient(a: &LaurentPoly, b: &LaurentPoly, field: PrimeField) -> LaurentPoly {
    let mut rem = a.clone();
    let mut quot = LaurentPoly::zero(field);
    let bd = b.degree().expect("nonzero divisor");
    let binv = field.inv(b.leading_coeff());
    while let Some(rd) = rem.degree() {
        if rd < bd {
            break;
        }
        let c = field.mul(rem.leading_coeff(), binv);
        let e = rd - bd;
        quot = quot.add(&LaurentPoly::monomial(field, e, c));
        rem = rem.sub(&b.mul_monomial(e, c));
    }
    quot
}

/// Column reduction of a polynomial generating set to its canonical
/// (Hermite-style) basis; zero columns are dropped and the number of
/// returned columns is the rank of the span. Entries must have nonnegative
/// valuation.
pub fn reduce_columns(
    field: PrimeField,
    rows: usize,
    columns: Vec<Vec<LaurentPoly>>,
) -> Vec<Vec<LaurentPoly>> {
    column_hnf(field, rows, columns)
}

/// A full-rank `k[x]`-lattice in `k[x, x^-1]^r`, stored via its canonical
/// lower-triangular Laurent basis. Two lattices are equal as submodules if
/// and only if their canonical bases coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyLattice {
    field: PrimeField,
    rank: usize,
    /// Canonical basis, one column per basis vector.
    basis: OperatorMatrix,
}

impl PolyLattice {
    /// The standard lattice `k[x]^r`.
    pub fn standard(field: PrimeField, rank: usize) -> Self {
        PolyLattice {
            field,
            rank,
            basis: OperatorMatrix::identity(field, rank),
        }
    }

    /// Lattice generated by the given Laurent columns; they must span a rank-r
    /// lattice over `k[x]`.
    pub fn from_generators(
        field: PrimeField,
        rank: usize,
        generators: &[Vec<LaurentPoly>],
    ) -> Result<Self, LaurentError> {
        // Clear poles: scaling the generator set by x^N does not change the
        // canonical form up to the same scale.
        let shift = generators
            .iter()
            .flatten()
            .filter_map(LaurentPoly::valuation)
            .min()
            .unwrap_or(0)
            .min(0);
        let cols: Vec<Vec<LaurentPoly>> = generators
            .iter()
            .map(|g| {
                assert_eq!(g.len(), rank);
                g.iter().map(|f| f.mul_monomial(-shift, 1)).collect()
            })
            .collect();
        let hnf = column_hnf(field, rank, cols);
        if hnf.len() != rank {
            return Err(LaurentError::NotFullRank {
                found: hnf.len(),
                expected: rank,
            });
        }
        let basis = OperatorMatrix::from_columns(field, rank, &hnf).mul_monomial(shift, 1);
        Ok(PolyLattice { field, rank, basis })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self) -> &OperatorMatrix {
        &self.basis
    }

    pub fn basis_column(&self, j: usize) -> Vec<LaurentPoly> {
        self.basis.column(j)
    }

    /// Largest pole order along the basis: `max(0, -min valuation)`.
    pub fn pole_order(&self) -> i64 {
        (-self.basis.min_valuation().unwrap_or(0)).max(0)
    }

    /// Smallest lattice containing both operands.
    pub fn sum(&self, other: &PolyLattice) -> Result<PolyLattice, LaurentError> {
        assert_eq!(self.rank, other.rank);
        let mut gens: Vec<Vec<LaurentPoly>> =
            (0..self.rank).map(|j| self.basis_column(j)).collect();
        gens.extend((0..other.rank).map(|j| other.basis_column(j)));
        Self::from_generators(self.field, self.rank, &gens)
    }

    /// Coordinates of `v` in the canonical basis, if they lie in `k[x]`.
    pub fn coordinates(&self, v: &[LaurentPoly]) -> Option<Vec<LaurentPoly>> {
        assert_eq!(v.len(), self.rank);
        let mut rem: Vec<LaurentPoly> = v.to_vec();
        let mut coords = vec![LaurentPoly::zero(self.field); self.rank];
        // The basis is lower triangular: solve top row first.
        for i in 0..self.rank {
            if rem[i].is_zero() {
                continue;
            }
            let c = rem[i].div_exact(self.basis.get(i, i)).ok()?;
            if c.valuation().unwrap_or(0) < 0 {
                return None;
            }
            for k in i..self.rank {
                rem[k] = rem[k].sub(&self.basis.get(k, i).mul(&c));
            }
            coords[i] = c;
        }
        if rem.iter().all(LaurentPoly::is_zero) {
            Some(coords)
        } else {
            None
        }
    }

    pub fn contains(&self, v: &[LaurentPoly]) -> bool {
        self.coordinates(v).is_some()
    }
}
