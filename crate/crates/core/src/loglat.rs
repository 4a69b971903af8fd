//! Logarithmic lattices at the boundary `x = 0`.
//!
//! A log lattice stores the matrices of the logarithmic operators
//! `δ^(p^m) = x^(p^m)·∂^(p^m)` on a lattice basis; all entries have
//! nonnegative valuation. The residues mod x commute and are simultaneously
//! diagonalizable over the prime field; their joint eigenvalue tuples, read
//! as base-p digit vectors, are the exponents of the lattice.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::laurent::{LaurentError, LaurentPoly, OperatorMatrix, PolyLattice};
use crate::linalg::FpMatrix;
use crate::padics::{
    self, ExponentRational, PadicDigits, PadicError, PrimeField,
};
use crate::strat::{StratError, StratifiedBundle};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogLatError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Strat(#[from] StratError),
    #[error("entry ({row},{col}) of level-{level} matrix has a pole")]
    PoleEntry {
        level: usize,
        row: usize,
        col: usize,
    },
    #[error("residue matrix at level {level} is not diagonalizable over the prime field")]
    NotSemisimple { level: usize },
    #[error("exponent {0} is not present in the lattice")]
    ExponentNotPresent(PadicDigits),
    #[error("exponent with digits {0} does not reconstruct within the denominator bound")]
    UnreconstructableExponent(PadicDigits),
    #[error("lattice has a nonzero exponent; promotion requires all-zero digits")]
    NonzeroExponent,
    #[error("level-{level} matrix entry ({row},{col}) is not divisible by x^(p^{level})")]
    NotDivisible {
        level: usize,
        row: usize,
        col: usize,
    },
    #[error("rescaled matrix acquired a pole; the move is not defined for this lattice")]
    RescalePole,
    #[error("τ-extension did not terminate within the move budget")]
    MoveBudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLattice {
    field: PrimeField,
    rank: usize,
    level: usize,
    /// `l[m]` is the matrix of `δ^(p^m)`; columns are images of basis vectors.
    l: Vec<OperatorMatrix>,
}

impl LogLattice {
    pub fn new(field: PrimeField, l: Vec<OperatorMatrix>) -> Result<Self, LogLatError> {
        assert!(!l.is_empty());
        let rank = l[0].rows();
        for (level, mat) in l.iter().enumerate() {
            assert_eq!((mat.rows(), mat.cols()), (rank, rank));
            for i in 0..rank {
                for j in 0..rank {
                    if mat.get(i, j).valuation().unwrap_or(0) < 0 {
                        return Err(LogLatError::PoleEntry {
                            level,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
        }
        let level = l.len() - 1;
        Ok(LogLattice {
            field,
            rank,
            level,
            l,
        })
    }

    pub fn trivial(field: PrimeField, rank: usize, level: usize) -> Self {
        LogLattice {
            field,
            rank,
            level,
            l: vec![OperatorMatrix::zero(field, rank, rank); level + 1],
        }
    }

    /// Rank-1 lattice of the exponent-α line on its natural basis:
    /// `L[m] = [binom(α, p^m)]`.
    pub fn exponent_line(
        field: PrimeField,
        alpha: &ExponentRational,
        level: usize,
    ) -> Result<Self, LogLatError> {
        let mut l = Vec::with_capacity(level + 1);
        for m in 0..=level {
            let c = field.binom(alpha, field.p().pow(m as u32))?;
            let mut mat = OperatorMatrix::zero(field, 1, 1);
            *mat.get_mut(0, 0) = LaurentPoly::constant(field, c);
            l.push(mat);
        }
        LogLattice::new(field, l)
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
        &self.l[m]
    }

    /// Restriction to the punctured line: `D[m] = x^(-p^m)·L[m]`.
    pub fn to_bundle(&self) -> StratifiedBundle {
        let d = (0..=self.level)
            .map(|m| {
                let pm = self.field.p().pow(m as u32) as i64;
                self.l[m].mul_monomial(-pm, 1)
            })
            .collect();
        StratifiedBundle::new(self.field, d).expect("square matrices")
    }

    /// Reads off the lattice action from a δ-stable polynomial lattice
    /// inside a bundle.
    pub fn from_stable_lattice(
        bundle: &StratifiedBundle,
        lattice: &PolyLattice,
    ) -> Result<Self, LogLatError> {
        let field = bundle.field();
        let rank = bundle.rank();
        let ops = bundle.operators();
        let mut l = Vec::with_capacity(bundle.level() + 1);
        for m in 0..=bundle.level() {
            let pm = field.p().pow(m as u32);
            let mut mat = OperatorMatrix::zero(field, rank, rank);
            for j in 0..rank {
                let image = ops.apply(pm, &lattice.basis_column(j))?;
                let image: Vec<LaurentPoly> =
                    image.iter().map(|f| f.mul_monomial(pm as i64, 1)).collect();
                let coords = lattice
                    .coordinates(&image)
                    .ok_or(LaurentError::NotFullRank {
                        found: 0,
                        expected: rank,
                    })?;
                for i in 0..rank {
                    *mat.get_mut(i, j) = coords[i].clone();
                }
            }
            l.push(mat);
        }
        LogLattice::new(field, l)
    }

    fn residues(&self) -> Result<Vec<FpMatrix>, LogLatError> {
        self.l
            .iter()
            .enumerate()
            .map(|(level, mat)| {
                mat.residue().ok_or(LogLatError::PoleEntry {
                    level,
                    row: 0,
                    col: 0,
                })
            })
            .collect()
    }

    /// Simultaneous eigenspace decomposition of the commuting residues.
    pub fn residue_decomposition(&self) -> Result<ResidueDecomposition, LogLatError> {
        let residues = self.residues()?;
        let mut blocks: Vec<(Vec<u64>, Vec<Vec<u64>>)> = vec![(
            Vec::new(),
            (0..self.rank)
                .map(|i| {
                    let mut v = vec![0u64; self.rank];
                    v[i] = 1;
                    v
                })
                .collect(),
        )];
        for (m, r) in residues.iter().enumerate() {
            let mut next = Vec::new();
            for (digits, basis) in &blocks {
                let k = basis.len();
                let mut split = 0usize;
                for lambda in 0..self.field.p() {
                    // Kernel of (R_m − λ) restricted to the block span.
                    let mut w = FpMatrix::zero(self.rank, k);
                    for (c, v) in basis.iter().enumerate() {
                        let image = r.mul_vec(v, &self.field);
                        for row in 0..self.rank {
                            let shifted = self
                                .field
                                .sub(image[row], self.field.mul(lambda, v[row]));
                            w.set(row, c, shifted);
                        }
                    }
                    let kernel = w.kernel(&self.field);
                    if kernel.is_empty() {
                        continue;
                    }
                    split += kernel.len();
                    let vectors: Vec<Vec<u64>> = kernel
                        .iter()
                        .map(|c| {
                            let mut v = vec![0u64; self.rank];
                            for (ci, b) in c.iter().zip(basis) {
                                for (vi, bi) in v.iter_mut().zip(b) {
                                    *vi = self.field.add(*vi, self.field.mul(*ci, *bi));
                                }
                            }
                            v
                        })
                        .collect();
                    let mut d = digits.clone();
                    d.push(lambda);
                    next.push((d, vectors));
                }
                if split != k {
                    return Err(LogLatError::NotSemisimple { level: m });
                }
            }
            blocks = next;
        }
        let mut out: Vec<(PadicDigits, Vec<Vec<u64>>)> = blocks
            .into_iter()
            .map(|(d, v)| (PadicDigits::new(d, &self.field), v))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ResidueDecomposition { blocks: out })
    }

    /// Exponent table: digit vectors, optional reconstructed rationals,
    /// multiplicities.
    pub fn exponents(&self, denom_bound: u64) -> Result<ExponentReport, LogLatError> {
        let decomp = self.residue_decomposition()?;
        let entries = decomp
            .blocks
            .iter()
            .map(|(digits, basis)| {
                let rational = padics::rational_reconstruct(&self.field, digits, denom_bound)
                    .ok()
                    .flatten();
                ExponentEntry {
                    digits: digits.clone(),
                    rational,
                    multiplicity: basis.len(),
                }
            })
            .collect();
        Ok(ExponentReport { entries })
    }

    /// Generic diagonal monomial rescaling: new basis `f_i = x^(ε_i)·e_i`.
    /// The new matrices are
    /// `L'[m][j][i] = x^(ε_i−ε_j)·Σ_{a+b=p^m} binom(ε_i, a)·Λ_b[j][i]`
    /// with `Λ_b = x^b·B_b` the full logarithmic operator matrices.
    pub fn rescale(&self, eps: &[i64]) -> Result<LogLattice, LogLatError> {
        assert_eq!(eps.len(), self.rank);
        let bundle = self.to_bundle();
        let ops = bundle.operators();
        let mut l = Vec::with_capacity(self.level + 1);
        for m in 0..=self.level {
            let pm = self.field.p().pow(m as u32);
            let mut acc = OperatorMatrix::zero(self.field, self.rank, self.rank);
            for b in 0..=pm {
                let lam = ops.full(b)?.mul_monomial(b as i64, 1);
                for i in 0..self.rank {
                    let c = self.field.binom_int(eps[i], pm - b);
                    if c == 0 {
                        continue;
                    }
                    for j in 0..self.rank {
                        let add = lam.get(j, i).scale(c);
                        *acc.get_mut(j, i) = acc.get(j, i).add(&add);
                    }
                }
            }
            for i in 0..self.rank {
                for j in 0..self.rank {
                    let shifted = acc.get(j, i).mul_monomial(eps[i] - eps[j], 1);
                    if shifted.valuation().unwrap_or(0) < 0 {
                        return Err(LogLatError::RescalePole);
                    }
                    *acc.get_mut(j, i) = shifted;
                }
            }
            l.push(acc);
        }
        LogLattice::new(self.field, l)
    }

    /// Twist by the boundary divisor: basis rescaled by `x^(-a)` uniformly,
    /// so every exponent shifts by `-a`.
    pub fn twist(&self, a: i64) -> Result<LogLattice, LogLatError> {
        self.rescale(&vec![-a; self.rank])
    }

    /// Constant base change `f_j = Σ_i P[i][j]·e_i` over the prime field.
    pub fn conjugate(&self, p_mat: &FpMatrix) -> Result<LogLattice, LogLatError> {
        let inv = p_mat
            .inverse(&self.field)
            .expect("base change must be invertible");
        let to_op = |m: &FpMatrix| {
            let mut out = OperatorMatrix::zero(self.field, self.rank, self.rank);
            for i in 0..self.rank {
                for j in 0..self.rank {
                    *out.get_mut(i, j) = LaurentPoly::constant(self.field, m.get(i, j));
                }
            }
            out
        };
        let p_op = to_op(p_mat);
        let inv_op = to_op(&inv);
        let l = self
            .l
            .iter()
            .map(|mat| inv_op.mul(mat).mul(&p_op))
            .collect();
        LogLattice::new(self.field, l)
    }

    /// Raises one exponent by 1: conjugates into a simultaneous eigenbasis
    /// of the residues and rescales the target block's basis vectors by x.
    pub fn shift_exponent(&self, target: &PadicDigits) -> Result<LogLattice, LogLatError> {
        let decomp = self.residue_decomposition()?;
        if !decomp.blocks.iter().any(|(d, _)| d == target) {
            return Err(LogLatError::ExponentNotPresent(target.clone()));
        }
        let mut p_mat = FpMatrix::zero(self.rank, self.rank);
        let mut eps = vec![0i64; self.rank];
        let mut col = 0usize;
        for (digits, basis) in &decomp.blocks {
            for v in basis {
                for (row, &value) in v.iter().enumerate() {
                    p_mat.set(row, col, value);
                }
                if digits == target {
                    eps[col] = 1;
                }
                col += 1;
            }
        }
        self.conjugate(&p_mat)?.rescale(&eps)
    }

    /// Normalizes the exponent multiset into the image of τ by one global
    /// twist followed by single-exponent shifts. The restriction to the
    /// punctured line is unchanged up to the performed basis rescalings.
    pub fn tau_extend(
        &self,
        tau: &TauSection,
        denom_bound: u64,
    ) -> Result<LogLattice, LogLatError> {
        let gaps = |l: &LogLattice| -> Result<Vec<(PadicDigits, i64)>, LogLatError> {
            let report = l.exponents(denom_bound)?;
            report
                .entries
                .iter()
                .map(|entry| {
                    let alpha = entry
                        .rational
                        .ok_or_else(|| {
                            LogLatError::UnreconstructableExponent(entry.digits.clone())
                        })?;
                    let target = tau.representative(&alpha.fractional_part());
                    let diff = alpha.checked_sub(&target)?;
                    if !diff.is_integer() {
                        return Err(LogLatError::UnreconstructableExponent(
                            entry.digits.clone(),
                        ));
                    }
                    Ok((entry.digits.clone(), diff.numerator()))
                })
                .collect()
        };
        let mut current = gaps(self)?;
        if current.iter().all(|(_, g)| *g == 0) {
            return Ok(self.clone());
        }
        let a = current.iter().map(|(_, g)| *g).max().unwrap();
        let mut lattice = if a != 0 { self.twist(a)? } else { self.clone() };
        let mut budget = current.iter().map(|(_, g)| (a - g).unsigned_abs()).sum::<u64>() + 1;
        loop {
            current = gaps(&lattice)?;
            let Some((digits, _)) = current.iter().find(|(_, g)| *g < 0) else {
                return Ok(lattice);
            };
            if budget == 0 {
                return Err(LogLatError::MoveBudgetExceeded);
            }
            budget -= 1;
            lattice = lattice.shift_exponent(digits)?;
        }
    }

    /// All-zero exponents let the plain divided-power operators act without
    /// poles: `D[m] = x^(-p^m)·L[m]` has polynomial entries.
    pub fn promote_zero_exponents(&self) -> Result<StratifiedBundle, LogLatError> {
        let decomp = self.residue_decomposition()?;
        if decomp
            .blocks
            .iter()
            .any(|(d, _)| d.digits().iter().any(|&c| c != 0))
        {
            return Err(LogLatError::NonzeroExponent);
        }
        let mut d = Vec::with_capacity(self.level + 1);
        for m in 0..=self.level {
            let pm = self.field.p().pow(m as u32) as i64;
            let mat = self.l[m].mul_monomial(-pm, 1);
            for i in 0..self.rank {
                for j in 0..self.rank {
                    if mat.get(i, j).valuation().unwrap_or(0) < 0 {
                        return Err(LogLatError::NotDivisible {
                            level: m,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
            d.push(mat);
        }
        Ok(StratifiedBundle::new(self.field, d)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueDecomposition {
    /// Sorted by digit vector; each block carries a prime-field basis of its
    /// joint eigenspace.
    pub blocks: Vec<(PadicDigits, Vec<Vec<u64>>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentEntry {
    pub digits: PadicDigits,
    pub rational: Option<ExponentRational>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentReport {
    pub entries: Vec<ExponentEntry>,
}

impl ExponentReport {
    /// Digit-vector multiset, one entry per basis vector.
    pub fn digit_multiset(&self) -> Vec<PadicDigits> {
        let mut out = Vec::new();
        for e in &self.entries {
            for _ in 0..e.multiplicity {
                out.push(e.digits.clone());
            }
        }
        out.sort();
        out
    }

    /// Rational multiset; `None` if any exponent failed to reconstruct.
    pub fn rational_multiset(&self) -> Option<Vec<ExponentRational>> {
        let mut out = Vec::new();
        for e in &self.entries {
            let r = e.rational?;
            for _ in 0..e.multiplicity {
                out.push(r);
            }
        }
        out.sort();
        Some(out)
    }
}

/// A set-theoretic section of `ℤ_p/ℤ → ℤ_p` on reconstructable classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TauSection {
    /// The rational representative in `[0, 1)`.
    Canonical,
    /// Explicit representatives, keyed by the class representative in
    /// `[0, 1)`; classes not listed fall back to the canonical choice.
    Explicit(BTreeMap<ExponentRational, ExponentRational>),
}

impl TauSection {
    pub fn representative(&self, class: &ExponentRational) -> ExponentRational {
        match self {
            TauSection::Canonical => *class,
            TauSection::Explicit(map) => map.get(class).copied().unwrap_or(*class),
        }
    }
}

/// Parameters bounding the saturation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaturationBounds {
    pub max_pole: i64,
    pub max_iter: usize,
}

impl Default for SaturationBounds {
    fn default() -> Self {
        SaturationBounds {
            max_pole: 32,
            max_iter: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SaturationOutcome {
    Found {
        lattice: LogLattice,
        module: PolyLattice,
        iterations: usize,
        pole_trace: Vec<i64>,
    },
    NotFoundWithinBounds {
        pole_trace: Vec<i64>,
    },
}

/// Minimal δ-stable lattice over the starting lattice, by saturation:
/// repeatedly adjoin `δ^(p^m)` images of the basis until the chain
/// stabilizes or the bounds are exceeded. Failure within bounds is
/// evidence, not proof, of non-regular-singularity.
pub fn find_log_lattice(
    bundle: &StratifiedBundle,
    start: Option<&PolyLattice>,
    bounds: &SaturationBounds,
) -> Result<SaturationOutcome, LogLatError> {
    let field = bundle.field();
    let rank = bundle.rank();
    let ops = bundle.operators();
    let mut current = match start {
        Some(l) => l.clone(),
        None => PolyLattice::standard(field, rank),
    };
    let mut pole_trace = vec![current.pole_order()];
    for iteration in 1..=bounds.max_iter {
        let mut gens: Vec<Vec<LaurentPoly>> =
            (0..rank).map(|j| current.basis_column(j)).collect();
        for m in 0..=bundle.level() {
            let pm = field.p().pow(m as u32);
            for j in 0..rank {
                let image = ops.apply(pm, &current.basis_column(j))?;
                gens.push(
                    image
                        .iter()
                        .map(|f| f.mul_monomial(pm as i64, 1))
                        .collect(),
                );
            }
        }
        let next = PolyLattice::from_generators(field, rank, &gens)?;
        if next == current {
            let lattice = LogLattice::from_stable_lattice(bundle, &current)?;
            return Ok(SaturationOutcome::Found {
                lattice,
                module: current,
                iterations: iteration,
                pole_trace,
            });
        }
        pole_trace.push(next.pole_order());
        if next.pole_order() > bounds.max_pole {
            return Ok(SaturationOutcome::NotFoundWithinBounds { pole_trace });
        }
        current = next;
    }
    Ok(SaturationOutcome::NotFoundWithinBounds { pole_trace })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RsVerdict {
    RegularSingular,
    WildEvidence,
    Inconclusive,
}

/// Per-truncation-level outcome of the saturation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelOutcome {
    Stabilized { pole: i64, iterations: usize },
    Unbounded { pole_trace: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsReport {
    pub verdict: RsVerdict,
    /// Minimal-lattice pole order per level, for levels that stabilized.
    pub levels: Vec<LevelOutcome>,
    /// Level from which the minimal lattice is identical, when RS.
    pub stable_from: Option<usize>,
    pub exponents: Option<ExponentReport>,
    pub bounds: SaturationBounds,
}

impl RsReport {
    pub fn stabilized_poles(&self) -> Option<Vec<i64>> {
        self.levels
            .iter()
            .map(|l| match l {
                LevelOutcome::Stabilized { pole, .. } => Some(*pole),
                LevelOutcome::Unbounded { .. } => None,
            })
            .collect()
    }
}

/// Regular-singularity semi-decision: saturate at every truncation level
/// 0..=M; the verdict is RS when the minimal lattices agree from some level
/// on, wild evidence when the minimal pole order strictly increases at
/// every level step, inconclusive otherwise.
pub fn rs_verdict(
    bundle: &StratifiedBundle,
    bounds: &SaturationBounds,
    denom_bound: u64,
) -> Result<RsReport, LogLatError> {
    let mut levels = Vec::new();
    let mut modules: Vec<Option<(PolyLattice, LogLattice)>> = Vec::new();
    for m in 0..=bundle.level() {
        let truncated = bundle.truncate(m);
        match find_log_lattice(&truncated, None, bounds)? {
            SaturationOutcome::Found {
                lattice,
                module,
                iterations,
                ..
            } => {
                levels.push(LevelOutcome::Stabilized {
                    pole: module.pole_order(),
                    iterations,
                });
                modules.push(Some((module, lattice)));
            }
            SaturationOutcome::NotFoundWithinBounds { pole_trace } => {
                levels.push(LevelOutcome::Unbounded { pole_trace });
                modules.push(None);
            }
        }
    }
    let all_found = modules.iter().all(Option::is_some);
    let (verdict, stable_from, exponents) = if all_found {
        let mods: Vec<&PolyLattice> = modules
            .iter()
            .map(|m| &m.as_ref().unwrap().0)
            .collect();
        let n = mods.len();
        let stable = n == 1 || mods[n - 1] == mods[n - 2];
        if stable {
            let mut from = n - 1;
            while from > 0 && mods[from - 1] == mods[n - 1] {
                from -= 1;
            }
            let exps = modules[n - 1]
                .as_ref()
                .unwrap()
                .1
                .exponents(denom_bound)?;
            (RsVerdict::RegularSingular, Some(from), Some(exps))
        } else {
            let poles: Vec<i64> = mods.iter().map(|m| m.pole_order()).collect();
            let strictly_increasing = poles.windows(2).all(|w| w[1] > w[0]);
            if strictly_increasing && n >= 2 {
                (RsVerdict::WildEvidence, None, None)
            } else {
                (RsVerdict::Inconclusive, None, None)
            }
        }
    } else {
        (RsVerdict::Inconclusive, None, None)
    };
    Ok(RsReport {
        verdict,
        levels,
        stable_from,
        exponents,
        bounds: *bounds,
    })
}

/// Prop.-style invariance check: exponent multisets of two lattices over
/// the same restricted bundle agree after reduction mod ℤ.
pub fn exponents_mod_z_agree(
    l1: &LogLattice,
    l2: &LogLattice,
    denom_bound: u64,
) -> Result<bool, LogLatError> {
    let frac = |l: &LogLattice| -> Result<Vec<ExponentRational>, LogLatError> {
        let report = l.exponents(denom_bound)?;
        let mut out = Vec::new();
        for e in &report.entries {
            let r = e.rational.ok_or_else(|| {
                LogLatError::UnreconstructableExponent(e.digits.clone())
            })?;
            for _ in 0..e.multiplicity {
                out.push(r.fractional_part());
            }
        }
        out.sort();
        Ok(out)
    };
    Ok(frac(l1)? == frac(l2)?)
}
