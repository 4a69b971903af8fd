//! Level-truncated stratified bundles on the punctured line.
//!
//! A bundle of level M stores the matrices of the generating divided-power
//! operators `∂^(p^m)`, m ≤ M, on a free basis over `k[x, x^-1]`. All other
//! operators `∂^(n)`, n < p^(M+1), are reconstructed from the generators
//! through the composition rule `∂^(a)∘∂^(b) = binom(a+b, a)·∂^(a+b)`,
//! picking at each step a base-p digit of n that makes the connecting
//! binomial a unit.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::laurent::{LaurentError, LaurentPoly, OperatorMatrix};
use crate::linalg::FpMatrix;
use crate::padics::{ExponentRational, PadicError, PrimeField};

pub type Section = Vec<LaurentPoly>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StratError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error("operator order {n} exceeds level-{level} truncation (needs n < p^(level+1))")]
    LevelExceeded { n: u64, level: usize },
    #[error("operator matrix {index} is {rows}x{cols}, expected {rank}x{rank}")]
    BadMatrixShape {
        index: usize,
        rows: usize,
        cols: usize,
        rank: usize,
    },
    #[error("level-0 p-curvature does not vanish; the bundle does not descend")]
    NotDescendable,
    #[error("search window too small: found {found} independent flat sections, need {needed}")]
    WindowTooSmall { found: usize, needed: usize },
    #[error("descended operator entries are not Frobenius-pure (exponent not divisible by p)")]
    NotFrobeniusPure,
}

/// Outcome of one identity check run by `validate`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
}

/// Necessary divided-power identities: commutation of the full operators,
/// p-fold nilpotence of each generator, and the composite identity for
/// non-overlapping digits. Passing is reported as "admissible (necessary
/// identities)"; sufficiency at a finite level is not claimed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedBundle {
    field: PrimeField,
    rank: usize,
    level: usize,
    /// `d[m]` is the matrix of `∂^(p^m)`: columns are images of basis vectors.
    d: Vec<OperatorMatrix>,
}

impl StratifiedBundle {
    pub fn new(field: PrimeField, d: Vec<OperatorMatrix>) -> Result<Self, StratError> {
        assert!(!d.is_empty(), "need at least the level-0 matrix");
        let rank = d[0].rows();
        for (index, m) in d.iter().enumerate() {
            if m.rows() != rank || m.cols() != rank {
                return Err(StratError::BadMatrixShape {
                    index,
                    rows: m.rows(),
                    cols: m.cols(),
                    rank,
                });
            }
        }
        let level = d.len() - 1;
        Ok(StratifiedBundle {
            field,
            rank,
            level,
            d,
        })
    }

    pub fn trivial(field: PrimeField, rank: usize, level: usize) -> Self {
        let d = (0..=level)
            .map(|_| OperatorMatrix::zero(field, rank, rank))
            .collect();
        StratifiedBundle {
            field,
            rank,
            level,
            d,
        }
    }

    /// Rank-1 bundle modelling the formal line `k[x,x^-1]·x^α`:
    /// `D[m] = binom(α, p^m)·x^(-p^m)`.
    pub fn exponent_line(
        field: PrimeField,
        alpha: &ExponentRational,
        level: usize,
    ) -> Result<Self, StratError> {
        let mut d = Vec::with_capacity(level + 1);
        for m in 0..=level {
            let pm = field.p().pow(m as u32);
            let c = field.binom(alpha, pm)?;
            let mut mat = OperatorMatrix::zero(field, 1, 1);
            *mat.get_mut(0, 0) = LaurentPoly::monomial(field, -(pm as i64), c);
            d.push(mat);
        }
        Self::new(field, d)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn matrix(&self, m: usize) -> &OperatorMatrix {
        &self.d[m]
    }

    pub fn matrices(&self) -> &[OperatorMatrix] {
        &self.d
    }

    /// Largest pole order appearing in the stored matrices.
    pub fn pole_order(&self) -> i64 {
        self.d
            .iter()
            .map(|m| (-m.min_valuation().unwrap_or(0)).max(0))
            .max()
            .unwrap_or(0)
    }

    /// Default degree window for linear solves:
    /// `[-r·(N+1)·p^M, r·(N+1)·p^M]` with N the current pole order.
    pub fn default_window(&self) -> (i64, i64) {
        let n = self.pole_order();
        let pm = (self.field.p() as i64).pow(self.level as u32);
        let w = self.rank as i64 * (n + 1) * pm;
        (-w, w)
    }

    pub fn truncate(&self, level: usize) -> StratifiedBundle {
        assert!(level <= self.level);
        StratifiedBundle {
            field: self.field,
            rank: self.rank,
            level,
            d: self.d[..=level].to_vec(),
        }
    }

    pub fn operators(&self) -> FullOperators<'_> {
        FullOperators {
            bundle: self,
            memo: RefCell::new(HashMap::new()),
        }
    }

    /// Full action of `∂^(n)` on a section, Leibniz rule included.
    pub fn apply(&self, n: u64, s: &Section) -> Result<Section, StratError> {
        self.operators().apply(n, s)
    }

    pub fn validate(&self) -> ValidationReport {
        let ops = self.operators();
        let mut checks = Vec::new();
        let p = self.field.p();
        for m in 0..=self.level {
            // Matrix of the p-fold composite of the level-m full operator.
            let mut c = self.d[m].clone();
            for _ in 1..p {
                c = ops.theta(m, &c);
            }
            checks.push(CheckResult {
                name: format!("p-fold iterate of level-{m} operator vanishes"),
                passed: c.is_zero(),
            });
        }
        for m1 in 0..self.level {
            for m2 in m1 + 1..=self.level {
                let a = ops.theta(m1, &self.d[m2]);
                let b = ops.theta(m2, &self.d[m1]);
                checks.push(CheckResult {
                    name: format!("level-{m1} and level-{m2} operators commute"),
                    passed: a == b,
                });
                // Non-overlapping digits: the connecting binomial is 1.
                if let Ok(comp) = ops.full(p.pow(m1 as u32) + p.pow(m2 as u32)) {
                    checks.push(CheckResult {
                        name: format!(
                            "composite identity at order p^{m1} + p^{m2}"
                        ),
                        passed: a == *comp,
                    });
                }
            }
        }
        ValidationReport { checks }
    }

    pub fn direct_sum(&self, other: &StratifiedBundle) -> Result<StratifiedBundle, StratError> {
        self.field.ensure_same(&other.field)?;
        assert_eq!(self.level, other.level);
        let rank = self.rank + other.rank;
        let mut d = Vec::with_capacity(self.level + 1);
        for m in 0..=self.level {
            let mut mat = OperatorMatrix::zero(self.field, rank, rank);
            for i in 0..self.rank {
                for j in 0..self.rank {
                    *mat.get_mut(i, j) = self.d[m].get(i, j).clone();
                }
            }
            for i in 0..other.rank {
                for j in 0..other.rank {
                    *mat.get_mut(self.rank + i, self.rank + j) = other.d[m].get(i, j).clone();
                }
            }
            d.push(mat);
        }
        StratifiedBundle::new(self.field, d)
    }

    /// Tensor product; the basis is `e_i ⊗ f_j ↦ index i·rank(F) + j`.
    pub fn tensor(&self, other: &StratifiedBundle) -> Result<StratifiedBundle, StratError> {
        self.field.ensure_same(&other.field)?;
        assert_eq!(self.level, other.level);
        let ops_e = self.operators();
        let ops_f = other.operators();
        let rank = self.rank * other.rank;
        let mut d = Vec::with_capacity(self.level + 1);
        for m in 0..=self.level {
            let pm = self.field.p().pow(m as u32);
            let mut mat = OperatorMatrix::zero(self.field, rank, rank);
            for a in 0..=pm {
                let be = ops_e.full(a)?;
                let bf = ops_f.full(pm - a)?;
                mat = mat.add(&be.kron(&bf));
            }
            d.push(mat);
        }
        StratifiedBundle::new(self.field, d)
    }

    /// Dual bundle: the matrices are determined by horizontality of the
    /// evaluation pairing, `Σ_{a+b=n} B_a^T·B̌_b = 0` for every n ≥ 1.
    pub fn dual(&self) -> Result<StratifiedBundle, StratError> {
        let ops = self.operators();
        let p = self.field.p();
        let top = p.pow(self.level as u32);
        let mut dual_full: Vec<OperatorMatrix> =
            vec![OperatorMatrix::identity(self.field, self.rank)];
        for n in 1..=top {
            let mut acc = OperatorMatrix::zero(self.field, self.rank, self.rank);
            for a in 1..=n {
                let ba = ops.full(a)?;
                acc = acc.add(&ba.transpose().mul(&dual_full[(n - a) as usize]));
            }
            dual_full.push(acc.map(|f| f.neg()));
        }
        let d = (0..=self.level)
            .map(|m| dual_full[p.pow(m as u32) as usize].clone())
            .collect();
        StratifiedBundle::new(self.field, d)
    }

    /// Internal hom `Hom(E, F) = dual(E) ⊗ F`; a section with coordinates
    /// `c[i·rank(F)+j]` corresponds to the map `e_i ↦ Σ_j c[i·rF+j]·f_j`.
    pub fn hom_bundle(&self, other: &StratifiedBundle) -> Result<StratifiedBundle, StratError> {
        self.dual()?.tensor(other)
    }

    /// Pullback along the Frobenius `x ↦ x^p` of the base: the level rises
    /// by one, `∂^(1)` kills pulled-back functions, and `∂^(p^m)` acts
    /// through `∂^(p^(m-1))` downstairs.
    pub fn frobenius_pullback(&self) -> StratifiedBundle {
        let p = self.field.p() as i64;
        let mut d = vec![OperatorMatrix::zero(self.field, self.rank, self.rank)];
        for m in 0..=self.level {
            d.push(self.d[m].subst_pow(p));
        }
        StratifiedBundle {
            field: self.field,
            rank: self.rank,
            level: self.level + 1,
            d,
        }
    }

    /// Prime-field basis of sections with component exponents in
    /// `[lo, hi]` killed by every generator. Semi-decision: horizontal
    /// sections outside the window are not found.
    pub fn horizontal_sections(&self, lo: i64, hi: i64) -> Result<Vec<Section>, StratError> {
        assert!(lo <= hi);
        let ops = self.operators();
        let width = (hi - lo + 1) as usize;
        let unknowns = self.rank * width;
        // Precompute the image of each unknown monomial section under every
        // generator, then read off one linear equation per output coefficient.
        let mut row_index: HashMap<(usize, usize, i64), usize> = HashMap::new();
        let mut entries: Vec<(usize, usize, u64)> = Vec::new();
        for m in 0..=self.level {
            let pm = self.field.p().pow(m as u32);
            for i in 0..self.rank {
                for (ki, k) in (lo..=hi).enumerate() {
                    let col = i * width + ki;
                    let mut s = vec![LaurentPoly::zero(self.field); self.rank];
                    s[i] = LaurentPoly::monomial(self.field, k, 1);
                    let image = ops.apply(pm, &s)?;
                    for (comp, f) in image.iter().enumerate() {
                        for (e, c) in f.terms() {
                            let next = row_index.len();
                            let row = *row_index.entry((m, comp, e)).or_insert(next);
                            entries.push((row, col, c));
                        }
                    }
                }
            }
        }
        let mut system = FpMatrix::zero(row_index.len(), unknowns);
        for (row, col, c) in entries {
            system.set(row, col, self.field.add(system.get(row, col), c));
        }
        let kernel = system.kernel(&self.field);
        let sections = kernel
            .into_iter()
            .map(|v| {
                (0..self.rank)
                    .map(|i| {
                        let terms: Vec<(i64, u64)> = (lo..=hi)
                            .enumerate()
                            .map(|(ki, k)| (k, v[i * width + ki]))
                            .collect();
                        LaurentPoly::from_terms(self.field, &terms)
                    })
                    .collect()
            })
            .collect();
        Ok(sections)
    }

    /// Cartier descent: finds a basis of level-0 flat sections inside the
    /// window and rewrites the higher operators in that basis over
    /// `u = x^p`. The result has level M−1.
    pub fn cartier_descend(&self, lo: i64, hi: i64) -> Result<StratifiedBundle, StratError> {
        assert!(self.level >= 1, "descent needs level at least 1");
        let p = self.field.p();
        let ops = self.operators();
        // p-curvature gate: the p-fold iterate of the level-0 operator.
        let mut c = self.d[0].clone();
        for _ in 1..p {
            c = ops.theta(0, &c);
        }
        if !c.is_zero() {
            return Err(StratError::NotDescendable);
        }
        // Flat sections for the level-0 connection only.
        let level0 = self.truncate(0);
        let flats = level0.horizontal_sections(lo, hi)?;
        // Express each flat section over u = x^p: component i and residue
        // class j mod p yield coordinate i·p + j in a rank r·p free module
        // over k[u, u^-1].
        let rp = self.rank * p as usize;
        let mut columns: Vec<Vec<LaurentPoly>> = Vec::new();
        for s in &flats {
            let mut col = vec![LaurentPoly::zero(self.field); rp];
            for (i, f) in s.iter().enumerate() {
                for (e, cf) in f.terms() {
                    let j = e.rem_euclid(p as i64);
                    let q = (e - j) / p as i64;
                    col[i * p as usize + j as usize] =
                        col[i * p as usize + j as usize].add(&LaurentPoly::monomial(
                            self.field, q, cf,
                        ));
                }
            }
            let val = col
                .iter()
                .filter_map(LaurentPoly::valuation)
                .min()
                .unwrap_or(0);
            columns.push(col.into_iter().map(|f| f.mul_monomial(-val, 1)).collect());
        }
        let reduced = crate::laurent::reduce_columns(self.field, rp, columns);
        if reduced.len() < self.rank {
            return Err(StratError::WindowTooSmall {
                found: reduced.len(),
                needed: self.rank,
            });
        }
        if reduced.len() > self.rank {
            // Flat sections span rank ≤ r over k[u]; more columns than r
            // means the input was inconsistent.
            return Err(StratError::NotDescendable);
        }
        // Back to x-coordinates: flat basis s_k = Σ_i S[i][k]·e_i.
        let mut s_mat = OperatorMatrix::zero(self.field, self.rank, self.rank);
        for (k, col) in reduced.iter().enumerate() {
            for i in 0..self.rank {
                let mut f = LaurentPoly::zero(self.field);
                for j in 0..p as usize {
                    for (e, cf) in col[i * p as usize + j].terms() {
                        f = f.add(&LaurentPoly::monomial(
                            self.field,
                            e * p as i64 + j as i64,
                            cf,
                        ));
                    }
                }
                *s_mat.get_mut(i, k) = f;
            }
        }
        // The flat basis must generate E over k[x, x^-1].
        let det = s_mat.det();
        let Some((_, _)) = det.as_monomial() else {
            return Err(StratError::WindowTooSmall {
                found: self.rank,
                needed: self.rank,
            });
        };
        let adj = s_mat.adjugate();
        let mut d = Vec::with_capacity(self.level);
        for m in 1..=self.level {
            let pm = p.pow(m as u32);
            let mut mat = OperatorMatrix::zero(self.field, self.rank, self.rank);
            for k in 0..self.rank {
                let w = ops.apply(pm, &s_mat.column(k))?;
                let coords = adj.mul_vec(&w);
                for i in 0..self.rank {
                    let entry = coords[i].div_exact(&det)?;
                    let entry = entry
                        .unsubst_pow(p as i64)
                        .ok_or(StratError::NotFrobeniusPure)?;
                    *mat.get_mut(i, k) = entry;
                }
            }
            d.push(mat);
        }
        StratifiedBundle::new(self.field, d)
    }
}

/// Matrices of all operators `∂^(n)`, n < p^(M+1), memoized per bundle.
pub struct FullOperators<'a> {
    bundle: &'a StratifiedBundle,
    memo: RefCell<HashMap<u64, Rc<OperatorMatrix>>>,
}

impl<'a> FullOperators<'a> {
    pub fn full(&self, n: u64) -> Result<Rc<OperatorMatrix>, StratError> {
        if let Some(m) = self.memo.borrow().get(&n) {
            return Ok(Rc::clone(m));
        }
        let e = self.bundle;
        let p = e.field.p();
        let result = if n == 0 {
            OperatorMatrix::identity(e.field, e.rank)
        } else {
            // Highest base-p digit of n.
            let mut m = 0usize;
            let mut q = n;
            let mut digit = n % p;
            while q >= p {
                q /= p;
                m += 1;
                if q % p != 0 {
                    digit = q % p;
                }
            }
            if m > e.level {
                return Err(StratError::LevelExceeded {
                    n,
                    level: e.level,
                });
            }
            let pm = p.pow(m as u32);
            if n == pm {
                e.d[m].clone()
            } else {
                // ∂^(p^m)∘∂^(n−p^m) = binom(n, p^m)·∂^(n), and binom(n, p^m)
                // is the m-th digit of n, a unit by choice of m.
                let rest = self.full(n - pm)?;
                let composed = self.theta(m, &rest);
                composed.scale(e.field.inv(digit))
            }
        };
        let rc = Rc::new(result);
        self.memo.borrow_mut().insert(n, Rc::clone(&rc));
        Ok(rc)
    }

    /// Matrix of the composite `∂^(p^m) ∘ T` for an operator with matrix
    /// `t`, by the Leibniz rule: `Σ_{a+b=p^m} B_b · ∂^(a)(t)` entrywise.
    pub fn theta(&self, m: usize, t: &OperatorMatrix) -> OperatorMatrix {
        let e = self.bundle;
        let pm = e.field.p().pow(m as u32);
        let mut acc = OperatorMatrix::zero(e.field, e.rank, e.rank);
        for a in 0..=pm {
            let derived = t.map(|f| f.dp_derivative(a));
            if derived.is_zero() {
                continue;
            }
            let bb = self.full(pm - a).expect("b < p^(m+1) stays in level");
            acc = acc.add(&bb.mul(&derived));
        }
        acc
    }

    /// `∂^(n)(Σ f_i e_i) = Σ_{a+b=n} ∂^(a)(f)·B_b` applied to the
    /// coefficient vector.
    pub fn apply(&self, n: u64, s: &Section) -> Result<Section, StratError> {
        let e = self.bundle;
        assert_eq!(s.len(), e.rank);
        let mut acc = vec![LaurentPoly::zero(e.field); e.rank];
        for a in 0..=n {
            let derived: Vec<LaurentPoly> = s.iter().map(|f| f.dp_derivative(a)).collect();
            if derived.iter().all(LaurentPoly::is_zero) {
                continue;
            }
            let bb = self.full(n - a)?;
            let image = bb.mul_vec(&derived);
            for (i, f) in image.into_iter().enumerate() {
                acc[i] = acc[i].add(&f);
            }
        }
        Ok(acc)
    }
}

/// Searches for an invertible horizontal map `E → F` inside the window:
/// a horizontal section of `Hom(E, F)` whose matrix has monomial
/// determinant. Returns the matrix `Φ` with `Φ[j][i]` the `f_j`-coordinate
/// of the image of `e_i`.
pub fn horizontal_isomorphism(
    e: &StratifiedBundle,
    f: &StratifiedBundle,
    lo: i64,
    hi: i64,
) -> Result<Option<OperatorMatrix>, StratError> {
    assert_eq!(e.rank(), f.rank());
    let hom = e.hom_bundle(f)?;
    let basis = hom.horizontal_sections(lo, hi)?;
    if basis.is_empty() {
        return Ok(None);
    }
    let field = e.field();
    let to_matrix = |coeffs: &[u64]| -> OperatorMatrix {
        let mut phi = OperatorMatrix::zero(field, f.rank(), e.rank());
        for (s, &c) in basis.iter().zip(coeffs) {
            if c == 0 {
                continue;
            }
            for i in 0..e.rank() {
                for j in 0..f.rank() {
                    let add = s[i * f.rank() + j].scale(c);
                    *phi.get_mut(j, i) = phi.get(j, i).add(&add);
                }
            }
        }
        phi
    };
    // Enumerate prime-field combinations of the basis, capped.
    let p = field.p();
    let dim = basis.len();
    let total = (p as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    let cap = 4096u128;
    let mut coeffs = vec![0u64; dim];
    let mut count = 0u128;
    loop {
        // Increment the base-p counter.
        let mut carry = true;
        for c in coeffs.iter_mut() {
            if carry {
                *c += 1;
                if *c == p {
                    *c = 0;
                } else {
                    carry = false;
                }
            }
        }
        count += 1;
        if carry || count >= total.min(cap) {
            break;
        }
        let phi = to_matrix(&coeffs);
        if phi.det().as_monomial().is_some() {
            return Ok(Some(phi));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn mono(field: PrimeField, e: i64, c: u64) -> LaurentPoly {
        LaurentPoly::monomial(field, e, c)
    }

    fn half_line(field: PrimeField, level: usize) -> StratifiedBundle {
        StratifiedBundle::exponent_line(field, &ExponentRational::new(1, 2), level).unwrap()
    }

    #[test]
    fn trivial_bundle_applies_function_derivative() {
        let field = fp(3);
        let e = StratifiedBundle::trivial(field, 1, 1);
        for k in -4i64..=4 {
            for n in 1..=8u64 {
                let s = vec![mono(field, k, 1)];
                let out = e.apply(n, &s).unwrap();
                assert_eq!(out[0], mono(field, k, 1).dp_derivative(n));
            }
        }
    }

    #[test]
    fn half_line_apply_examples() {
        let field = fp(3);
        let e = half_line(field, 1);
        // D[0] = [2x^-1] since binom(1/2, 1) ≡ 2 mod 3.
        assert_eq!(*e.matrix(0).get(0, 0), mono(field, -1, 2));
        let s = vec![LaurentPoly::one(field)];
        let once = e.apply(1, &s).unwrap();
        assert_eq!(once[0], mono(field, -1, 2));
        // Triple application of ∂^(1) is 3!·∂^(3) = 0 in characteristic 3.
        let thrice = e
            .apply(1, &e.apply(1, &e.apply(1, &s).unwrap()).unwrap())
            .unwrap();
        assert!(thrice[0].is_zero());
    }

    #[test]
    fn level_exceeded() {
        let field = fp(3);
        let e = half_line(field, 1);
        let s = vec![LaurentPoly::one(field)];
        assert!(matches!(
            e.apply(9, &s),
            Err(StratError::LevelExceeded { .. })
        ));
        assert!(e.apply(8, &s).is_ok());
    }

    #[test]
    fn leibniz_rule() {
        let field = fp(3);
        let e = half_line(field, 1);
        let f = LaurentPoly::from_terms(field, &[(-2, 2), (0, 1), (3, 1)]);
        let s = vec![LaurentPoly::from_terms(field, &[(-1, 1), (2, 2)])];
        for n in 1..=8u64 {
            let lhs = e
                .apply(n, &vec![f.mul(&s[0])])
                .unwrap();
            let mut rhs = vec![LaurentPoly::zero(field)];
            for a in 0..=n {
                let da = f.dp_derivative(a);
                let part = e.apply(n - a, &s).unwrap();
                rhs[0] = rhs[0].add(&da.mul(&part[0]));
            }
            assert_eq!(lhs, rhs, "Leibniz at n={n}");
        }
    }

    #[test]
    fn validate_accepts_constructors() {
        let field = fp(3);
        assert!(StratifiedBundle::trivial(field, 2, 2).validate().is_valid());
        assert!(half_line(field, 1).validate().is_valid());
        let sum = half_line(field, 1)
            .direct_sum(&StratifiedBundle::trivial(field, 1, 1))
            .unwrap();
        assert!(sum.validate().is_valid());
    }

    #[test]
    fn validate_rejects_bad_constant_connection() {
        // D[0] = [1] over F_2: (∂ + 1)^2 = 1 ≠ 0 fails nilpotence.
        let field = fp(2);
        let mut mat = OperatorMatrix::zero(field, 1, 1);
        *mat.get_mut(0, 0) = LaurentPoly::one(field);
        let e = StratifiedBundle::new(field, vec![mat]).unwrap();
        let report = e.validate();
        assert!(!report.is_valid());
        assert!(report.failures()[0].name.contains("p-fold"));
    }

    #[test]
    fn tensor_adds_exponents() {
        let field = fp(3);
        let e = half_line(field, 1);
        let t = e.tensor(&e).unwrap();
        // 1/2 + 1/2 = 1: D[0] = [x^-1], D[1] = [binom(1,3)·x^-3] = 0.
        assert_eq!(*t.matrix(0).get(0, 0), mono(field, -1, 1));
        assert!(t.matrix(1).get(0, 0).is_zero());
        let one_line =
            StratifiedBundle::exponent_line(field, &ExponentRational::from_int(1), 1).unwrap();
        assert_eq!(t, one_line);
        assert!(t.validate().is_valid());
    }

    #[test]
    fn dual_pairs_to_trivial() {
        let field = fp(3);
        let e = half_line(field, 1);
        let dual = e.dual().unwrap();
        assert!(dual.validate().is_valid());
        let pair = e.tensor(&dual).unwrap();
        // e ⊗ e^∨ is trivial: rank-1 horizontal space.
        let h = pair.horizontal_sections(-5, 5).unwrap();
        assert_eq!(h.len(), 1);
        // The half line itself has no horizontal sections in [-3, 3]:
        // x^k e is level-1 horizontal iff k + 1/2 ≡ 0 mod 9, i.e. k ≡ 4 mod 9,
        // and no such k lies in the window.
        assert!(e.horizontal_sections(-3, 3).unwrap().is_empty());
        // A wider window picks up the level-1-only sections x^4 e and x^-5 e,
        // which die at level 2.
        assert_eq!(e.horizontal_sections(-5, 5).unwrap().len(), 2);
    }

    #[test]
    fn horizontal_sections_trivial_rank2() {
        let field = fp(3);
        let e = StratifiedBundle::trivial(field, 2, 1);
        let h = e.horizontal_sections(-5, 5).unwrap();
        assert_eq!(h.len(), 2);
        for s in &h {
            for m in 0..=1usize {
                let out = e.apply(3u64.pow(m as u32), s).unwrap();
                assert!(out.iter().all(LaurentPoly::is_zero));
            }
        }
    }

    #[test]
    fn cartier_round_trip_half_line() {
        let field = fp(3);
        let e = half_line(field, 1);
        let descended = e.cartier_descend(-5, 5).unwrap();
        assert_eq!(descended.level(), 0);
        // Flat section x·e; u·∂_u action has exponent ≡ 1/2:
        // the descended matrix is binom(1/2,1)·u^-1 = 2u^-1 up to basis.
        assert_eq!(*descended.matrix(0).get(0, 0), mono(field, -1, 2));
        let back = descended.frobenius_pullback();
        assert!(back.validate().is_valid());
        let iso = horizontal_isomorphism(&e, &back, -5, 5).unwrap();
        assert!(iso.is_some());
    }

    #[test]
    fn nonzero_p_curvature_not_descendable() {
        // D[0] = [x^-2] over F_2, level 1: (∂^(1))^2 has matrix
        // ∂(x^-2) + x^-4 = x^-4 + ... nonzero.
        let field = fp(2);
        let mut d0 = OperatorMatrix::zero(field, 1, 1);
        *d0.get_mut(0, 0) = mono(field, -2, 1);
        let d1 = OperatorMatrix::zero(field, 1, 1);
        let e = StratifiedBundle::new(field, vec![d0, d1]).unwrap();
        assert!(matches!(
            e.cartier_descend(-5, 5),
            Err(StratError::NotDescendable)
        ));
    }

    #[test]
    fn frobenius_pullback_shapes() {
        let field = fp(3);
        let e = half_line(field, 0);
        let back = e.frobenius_pullback();
        assert_eq!(back.level(), 1);
        assert!(back.matrix(0).is_zero());
        assert_eq!(*back.matrix(1).get(0, 0), mono(field, -3, 2));
        assert!(back.validate().is_valid());
    }
}
