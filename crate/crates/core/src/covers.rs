//! Model covers of the punctured line and their pushforward bundles.
//!
//! Kummer covers `y^e = x` with e prime to p push forward to a diagonal
//! logarithmic lattice with exponents `{j/e}`. Artin–Schreier covers
//! `y^p − y = g(x)` (g supported in negative exponents) push forward to a
//! rank-p stratified bundle computed from the Taylor expansion of y at
//! `x + t`. Kummer pullback transports bundles and lattices along
//! `x = y^e` through the exact Taylor substitution
//! `B^y_n = Σ_a [t^n]((y+t)^e − y^e)^a · B^x_a(y^e)`.

use thiserror::Error;

use crate::laurent::{LaurentError, LaurentPoly, OperatorMatrix};
use crate::loglat::{
    rs_verdict, ExponentReport, LogLatError, LogLattice, RsReport, RsVerdict, SaturationBounds,
};
use crate::padics::{ExponentRational, PadicError, PrimeField};
use crate::strat::{StratError, StratifiedBundle};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Strat(#[from] StratError),
    #[error(transparent)]
    LogLat(#[from] LogLatError),
    #[error("Kummer degree {e} is divisible by p = {p}; the cover is not tame")]
    WildKummer { e: u64, p: u64 },
    #[error("Artin–Schreier function must be nonzero with all exponents negative")]
    BadArtinSchreierFunction,
}

/// Description of a model cover of the punctured line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverSpec {
    /// `y^e = x`, gcd(e, p) = 1.
    Kummer { e: u64 },
    /// `y^p − y = g(x)` with g supported in strictly negative exponents.
    ArtinSchreier { g: LaurentPoly },
}

impl CoverSpec {
    pub fn kummer(field: &PrimeField, e: u64) -> Result<Self, CoverError> {
        if e == 0 || e % field.p() == 0 {
            return Err(CoverError::WildKummer { e, p: field.p() });
        }
        Ok(CoverSpec::Kummer { e })
    }

    pub fn artin_schreier(g: LaurentPoly) -> Result<Self, CoverError> {
        if g.is_zero() || g.degree().unwrap() >= 0 {
            return Err(CoverError::BadArtinSchreierFunction);
        }
        Ok(CoverSpec::ArtinSchreier { g })
    }
}

/// Pushforward of the structure sheaf of the Kummer cover `y^e = x` on the
/// basis `1, y, …, y^(e−1)`: the logarithmic operators are diagonal with
/// constant entries `binom(j/e, p^m)`.
pub fn kummer_pushforward(
    field: &PrimeField,
    e: u64,
    level: usize,
) -> Result<LogLattice, CoverError> {
    if e == 0 || e % field.p() == 0 {
        return Err(CoverError::WildKummer { e, p: field.p() });
    }
    let mut l = Vec::with_capacity(level + 1);
    for m in 0..=level {
        let pm = field.p().pow(m as u32);
        let mut mat = OperatorMatrix::zero(*field, e as usize, e as usize);
        for j in 0..e {
            let alpha = ExponentRational::new(j as i64, e as i64);
            let c = field.binom(&alpha, pm)?;
            *mat.get_mut(j as usize, j as usize) = LaurentPoly::constant(*field, c);
        }
        l.push(mat);
    }
    Ok(LogLattice::new(*field, l)?)
}

/// Truncated power series in t with Laurent-polynomial coefficients,
/// `series[s]` being the coefficient of `t^s`.
type TSeries = Vec<LaurentPoly>;

fn series_mul(field: PrimeField, a: &TSeries, b: &TSeries, trunc: usize) -> TSeries {
    let mut out = vec![LaurentPoly::zero(field); trunc + 1];
    for (i, fa) in a.iter().enumerate().take(trunc + 1) {
        if fa.is_zero() {
            continue;
        }
        for (j, fb) in b.iter().enumerate() {
            if i + j > trunc {
                break;
            }
            out[i + j] = out[i + j].add(&fa.mul(fb));
        }
    }
    out
}

/// Coefficient-wise Frobenius: `(Σ a_s t^s)^p = Σ a_s(x^p) t^(sp)` over F_p.
fn series_frobenius(field: PrimeField, a: &TSeries, trunc: usize) -> TSeries {
    let p = field.p() as usize;
    let mut out = vec![LaurentPoly::zero(field); trunc + 1];
    for (s, f) in a.iter().enumerate() {
        if s * p > trunc {
            break;
        }
        out[s * p] = f.subst_pow(field.p() as i64);
    }
    out
}

/// Pushforward of the Artin–Schreier cover `y^p − y = g(x)` on the basis
/// `1, y, …, y^(p−1)`. The Taylor expansion of y at `x + t` is
/// `Y(t) = y + ε(t)` with `ε = −Σ_{i≥0} h^(p^i)` and `h = g(x+t) − g(x)`;
/// `∂^(n)(y^j)` is the `t^n`-coefficient of `Y(t)^j`.
pub fn artin_schreier_pushforward(
    field: &PrimeField,
    g: &LaurentPoly,
    level: usize,
) -> Result<StratifiedBundle, CoverError> {
    if g.is_zero() || g.degree().unwrap() >= 0 {
        return Err(CoverError::BadArtinSchreierFunction);
    }
    let p = field.p();
    let rank = p as usize;
    let trunc = p.pow(level as u32) as usize;
    // h = g(x+t) − g(x), from (x+t)^(-k) = Σ_s binom(-k, s)·x^(-k-s)·t^s.
    let mut h: TSeries = vec![LaurentPoly::zero(*field); trunc + 1];
    for (k, c) in g.terms() {
        for s in 1..=trunc {
            let b = field.binom_int(k, s as u64);
            if b != 0 {
                h[s] = h[s].add(&LaurentPoly::monomial(
                    *field,
                    k - s as i64,
                    field.mul(c, b),
                ));
            }
        }
    }
    // ε = −(h + h^p + h^(p²) + …); the h^(p^i) term starts at t^(p^i).
    let mut eps: TSeries = vec![LaurentPoly::zero(*field); trunc + 1];
    let mut power = h;
    let mut order = 1usize;
    while order <= trunc {
        for s in 0..=trunc {
            eps[s] = eps[s].sub(&power[s]);
        }
        power = series_frobenius(*field, &power, trunc);
        order *= p as usize;
    }
    // Powers of ε up to p−1 for the expansion of Y^j.
    let mut eps_pows: Vec<TSeries> = Vec::with_capacity(rank);
    let mut one = vec![LaurentPoly::zero(*field); trunc + 1];
    one[0] = LaurentPoly::one(*field);
    eps_pows.push(one);
    for _ in 1..rank {
        let next = series_mul(*field, eps_pows.last().unwrap(), &eps, trunc);
        eps_pows.push(next);
    }
    // D[m][s][j] = binom(j, s) · (t^(p^m) coefficient of ε^(j−s)).
    let mut d = Vec::with_capacity(level + 1);
    for m in 0..=level {
        let pm = p.pow(m as u32) as usize;
        let mut mat = OperatorMatrix::zero(*field, rank, rank);
        for j in 0..rank {
            for s in 0..=j {
                let b = field.binom_int(j as i64, s as u64);
                if b == 0 {
                    continue;
                }
                *mat.get_mut(s, j) = eps_pows[j - s][pm].scale(b);
            }
        }
        d.push(mat);
    }
    Ok(StratifiedBundle::new(*field, d)?)
}

/// Pullback of a stratified bundle along `x = y^e`, by Taylor functoriality:
/// with `h(t) = (y + t)^e − y^e`, the pulled-back full operator of order n is
/// `B^y_n = Σ_{a=1}^{n} [t^n](h^a) · B^x_a(y^e)`, and `D_y[m] = B^y_(p^m)`.
/// (The convolution shortcut `Σ binom(e, p^c)·δ_x^(p^d)` only holds modulo
/// lower-order error terms and is not digit-exact, so it is not used here.)
pub fn pullback_kummer_bundle(
    bundle: &StratifiedBundle,
    e: u64,
) -> Result<StratifiedBundle, CoverError> {
    assert!(e >= 1);
    let field = bundle.field();
    let p = field.p();
    let rank = bundle.rank();
    let level = bundle.level();
    let n_max = p.pow(level as u32) as usize;
    // h = (y+t)^e − y^e = Σ_{s=1}^{e} binom(e,s)·y^(e−s)·t^s, truncated.
    let mut h: TSeries = vec![LaurentPoly::zero(field); n_max + 1];
    for s in 1..=e.min(n_max as u64) {
        let b = field.binom_int(e as i64, s);
        if b != 0 {
            h[s as usize] = LaurentPoly::monomial(field, (e - s) as i64, b);
        }
    }
    let ops = bundle.operators();
    let mut d = vec![OperatorMatrix::zero(field, rank, rank); level + 1];
    let mut hpow = h.clone();
    for a in 1..=n_max {
        if a > 1 {
            hpow = series_mul(field, &hpow, &h, n_max);
        }
        // h^a has t-valuation a, so only the levels with p^m ≥ a see it.
        let needed: Vec<usize> = (0..=level)
            .filter(|&m| {
                let pm = p.pow(m as u32) as usize;
                pm >= a && !hpow[pm].is_zero()
            })
            .collect();
        if needed.is_empty() {
            continue;
        }
        let bxa = ops.full(a as u64).map_err(CoverError::Strat)?;
        let sub = bxa.subst_pow(e as i64);
        for m in needed {
            let pm = p.pow(m as u32) as usize;
            d[m] = d[m].add(&sub.scale_poly(&hpow[pm]));
        }
    }
    Ok(StratifiedBundle::new(field, d)?)
}

/// Pullback of a logarithmic lattice along the tame substitution `x = y^e`:
/// the bundle pullback rescaled by `y^(p^m)`, which stays pole-free exactly
/// when the cover is tame at the boundary.
pub fn pullback_kummer_lattice(lattice: &LogLattice, e: u64) -> Result<LogLattice, CoverError> {
    let field = lattice.field();
    let p = field.p();
    if e == 0 || e % p == 0 {
        return Err(CoverError::WildKummer { e, p });
    }
    let pulled = pullback_kummer_bundle(&lattice.to_bundle(), e)?;
    let l = (0..=pulled.level())
        .map(|m| pulled.matrix(m).mul_monomial(p.pow(m as u32) as i64, 1))
        .collect();
    Ok(LogLattice::new(field, l)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TamenessVerdict {
    Tame,
    WildEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamenessReport {
    pub verdict: TamenessVerdict,
    /// Exponents of the pushforward lattice when the verdict is tame.
    pub exponents: Option<ExponentReport>,
    /// Minimal-lattice pole order per truncation level, when available.
    pub pole_trace: Option<Vec<i64>>,
    /// Embedded regular-singularity report for Artin–Schreier covers.
    pub rs_report: Option<RsReport>,
    pub level: usize,
    pub bounds: SaturationBounds,
}

/// Tame/wild classification: the pushforward of a Kummer cover carries a
/// logarithmic lattice by construction (tame); an Artin–Schreier
/// pushforward is classified through the regular-singularity semi-decision.
pub fn tameness_verdict(
    field: &PrimeField,
    cover: &CoverSpec,
    level: usize,
    bounds: &SaturationBounds,
    denom_bound: u64,
) -> Result<TamenessReport, CoverError> {
    match cover {
        CoverSpec::Kummer { e } => {
            let lattice = kummer_pushforward(field, *e, level)?;
            let exponents = lattice.exponents(denom_bound)?;
            Ok(TamenessReport {
                verdict: TamenessVerdict::Tame,
                exponents: Some(exponents),
                pole_trace: Some(vec![0; level + 1]),
                rs_report: None,
                level,
                bounds: *bounds,
            })
        }
        CoverSpec::ArtinSchreier { g } => {
            let bundle = artin_schreier_pushforward(field, g, level)?;
            let rs = rs_verdict(&bundle, bounds, denom_bound)?;
            let verdict = match rs.verdict {
                RsVerdict::RegularSingular => TamenessVerdict::Tame,
                RsVerdict::WildEvidence => TamenessVerdict::WildEvidence,
                RsVerdict::Inconclusive => TamenessVerdict::Inconclusive,
            };
            Ok(TamenessReport {
                verdict,
                exponents: rs.exponents.clone(),
                pole_trace: rs.stabilized_poles(),
                rs_report: Some(rs),
                level,
                bounds: *bounds,
            })
        }
    }
}
