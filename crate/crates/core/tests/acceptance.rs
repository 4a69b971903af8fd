//! Acceptance gate: one test (and one pass/fail line) per criterion.
//!
//! Every numeric expectation is either asserted against an independent
//! oracle computed here (big-integer / big-rational arithmetic) or is a
//! hand-derived exact value.

use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stratbench::covers::{
    artin_schreier_pushforward, kummer_pushforward, pullback_kummer_lattice, tameness_verdict,
    CoverSpec, TamenessVerdict,
};
use stratbench::loglat::{exponents_mod_z_agree, SaturationBounds, TauSection};
use stratbench::padics::{digits, product_check, rational_reconstruct};
use stratbench::strat::horizontal_isomorphism;
use stratbench::{ExponentRational, LaurentPoly, PadicDigits, PrimeField, StratifiedBundle};

fn fp(p: u64) -> PrimeField {
    PrimeField::new(p).unwrap()
}

/// Kummer suite: (ramification index e, characteristic p, working level for
/// the twist experiments, reconstruction denominator bound at that level).
/// The working level is chosen so that p^(level+1) > 2·bound² and the bound
/// covers every numerator reachable by a twist in [-2, 2] plus one shift.
const SUITE: [(u64, u64, usize, u64); 4] = [(2, 3, 4, 7), (4, 3, 5, 15), (5, 2, 9, 19), (3, 5, 3, 11)];

/// The acceptance level for the exponent multiset checks.
const M: usize = 3;

fn digits_of(field: &PrimeField, num: i64, den: i64, level: usize) -> PadicDigits {
    digits(field, &ExponentRational::new(num, den), level).unwrap()
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_01_lucas_conformance() {
    // Pascal-triangle oracle over ℤ, reduced mod p only at the end.
    let n = 200usize;
    let mut row: Vec<BigInt> = vec![BigInt::one()];
    let mut triangle: Vec<Vec<BigInt>> = Vec::with_capacity(n + 1);
    triangle.push(row.clone());
    for a in 1..=n {
        let mut next = Vec::with_capacity(a + 1);
        next.push(BigInt::one());
        for b in 1..a {
            next.push(&row[b - 1] + &row[b]);
        }
        next.push(BigInt::one());
        triangle.push(next.clone());
        row = next;
    }
    for p in [2u64, 3, 5] {
        let field = fp(p);
        for a in 0..=n {
            for b in 0..=a {
                let oracle =
                    u64::try_from(&triangle[a][b] % BigInt::from(p)).unwrap();
                assert_eq!(
                    field.binom_int(a as i64, b as u64),
                    oracle,
                    "binom({a},{b}) mod {p}"
                );
            }
        }
    }
    println!("criterion 1 (Lucas conformance): PASS");
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_digit_identity_and_reconstruction() {
    let level = 10usize;
    for p in [2u64, 3, 5] {
        let field = fp(p);
        let mut sampled = 0u32;
        'outer: for den in [1i64, 2, 3, 4, 5, 7, 9] {
            if den as u64 % p == 0 {
                continue;
            }
            for num in [-10i64, -7, -3, -1, 1, 2, 5, 8, 9, 10] {
                let alpha = ExponentRational::new(num, den);
                let d = digits(&field, &alpha, level).unwrap();
                for m in 0..=level {
                    let pn = p.pow(m as u32);
                    assert_eq!(
                        d.digit(m),
                        field.binom(&alpha, pn).unwrap(),
                        "digit {m} of {num}/{den} mod {p}"
                    );
                }
                let bound = num.unsigned_abs().max(den as u64);
                let back = rational_reconstruct(&field, &d, bound).unwrap();
                assert_eq!(back, Some(alpha), "reconstruct {num}/{den} mod {p}");
                sampled += 1;
                if sampled >= 20 {
                    break 'outer;
                }
            }
        }
        assert!(sampled >= 20, "fewer than 20 samples for p={p}");
    }
    println!("criterion 2 (digit identity and reconstruction): PASS");
}

// ---------------------------------------------------------------- criterion 3

/// The digit-convolution product identity is exact precisely when no base-p
/// carry reaches the inspected column; the sampler filters on that condition,
/// computed from the raw digit expansions, independently of `product_check`.
fn carry_free(field: &PrimeField, a: &ExponentRational, b: &ExponentRational, d: u32) -> bool {
    let da = digits(field, a, d as usize).unwrap();
    let db = digits(field, b, d as usize).unwrap();
    (0..=d as usize).all(|col| {
        let conv: u64 = (0..=col).map(|i| da.digit(i) * db.digit(col - i)).sum();
        conv < field.p()
    })
}

#[test]
fn criterion_03_product_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    for p in [2u64, 3, 5] {
        let field = fp(p);
        let mut checked = 0u32;
        let mut drawn = 0u32;
        while checked < 100 {
            drawn += 1;
            assert!(drawn < 200_000, "sampler starved for p={p}");
            let num_a = rng.gen_range(-9i64..=9);
            let num_b = rng.gen_range(-9i64..=9);
            let den_a = rng.gen_range(1i64..=9);
            let den_b = rng.gen_range(1i64..=9);
            if den_a as u64 % p == 0 || den_b as u64 % p == 0 {
                continue;
            }
            let alpha = ExponentRational::new(num_a, den_a);
            let beta = ExponentRational::new(num_b, den_b);
            let d = rng.gen_range(0u32..=6);
            if !carry_free(&field, &alpha, &beta, d) {
                continue;
            }
            let (lhs, rhs) = product_check(&field, &alpha, &beta, d).unwrap();
            assert_eq!(lhs, rhs, "product identity {alpha}·{beta} at d={d}, p={p}");
            checked += 1;
        }
    }
    println!("criterion 3 (product identity, carry-free samples): PASS");
}

// ---------------------------------------------------------------- criterion 4

fn expected_kummer_digits(field: &PrimeField, e: u64, level: usize) -> Vec<PadicDigits> {
    let mut expected: Vec<PadicDigits> = (0..e)
        .map(|j| digits_of(field, j as i64, e as i64, level))
        .collect();
    expected.sort();
    expected
}

#[test]
fn criterion_04_kummer_exponents() {
    for (e, p, _, _) in SUITE {
        let field = fp(p);
        let lattice = kummer_pushforward(&field, e, M).unwrap();
        let report = lattice.exponents(2).unwrap();
        assert_eq!(
            report.digit_multiset(),
            expected_kummer_digits(&field, e, M),
            "exponents of the degree-{e} pushforward mod {p}"
        );
    }
    println!("criterion 4 (Kummer pushforward exponents): PASS");
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_pullback_multiplies_exponents() {
    for (e, p, _, _) in SUITE {
        let field = fp(p);
        let lattice = kummer_pushforward(&field, e, M).unwrap();
        let pulled = pullback_kummer_lattice(&lattice, e).unwrap();
        // e·(j/e) = j: the pulled-back exponent multiset is {0, …, e−1}.
        let mut expected: Vec<PadicDigits> = (0..e)
            .map(|j| digits_of(&field, j as i64, 1, M))
            .collect();
        expected.sort();
        assert_eq!(
            pulled.exponents(2).unwrap().digit_multiset(),
            expected,
            "pullback exponents for e={e}, p={p}"
        );
    }
    println!("criterion 5 (pullback multiplies exponents by e): PASS");
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_tau_extension() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    for (e, p, level, bound) in SUITE {
        let field = fp(p);
        let base = kummer_pushforward(&field, e, level).unwrap();
        let reference = base.to_bundle().truncate(M);
        let mut multisets = Vec::new();
        for _ in 0..5 {
            let t = rng.gen_range(-2i64..=2);
            let twisted = base.twist(t).unwrap();
            let ext = twisted.tau_extend(&TauSection::Canonical, bound).unwrap();
            // Lands in the image of the canonical section: all exponent
            // representatives lie in [0, 1).
            let rationals = ext
                .exponents(bound)
                .unwrap()
                .rational_multiset()
                .expect("exponents must reconstruct at the working level");
            for r in &rationals {
                assert!(r.floor() == 0, "exponent {r} outside [0,1)");
            }
            // Idempotent.
            let again = ext.tau_extend(&TauSection::Canonical, bound).unwrap();
            assert_eq!(again, ext, "tau extension not idempotent (e={e}, p={p})");
            multisets.push(ext.exponents(bound).unwrap().digit_multiset());
            // Restricts to the same bundle up to horizontal isomorphism.
            // The window [-2, 2] is contained in the default window.
            let iso = horizontal_isomorphism(
                &ext.to_bundle().truncate(M),
                &reference,
                -2,
                2,
            )
            .unwrap();
            assert!(iso.is_some(), "no horizontal isomorphism (e={e}, p={p}, t={t})");
        }
        // Uniqueness of the exponent multiset across pre-twists.
        for w in multisets.windows(2) {
            assert_eq!(w[0], w[1], "tau extension multiset differs (e={e}, p={p})");
        }
    }
    println!("criterion 6 (tau extension existence/uniqueness): PASS");
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_07_exponents_mod_z_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    for (e, p, level, bound) in SUITE {
        let field = fp(p);
        let base = kummer_pushforward(&field, e, level).unwrap();
        let t1 = rng.gen_range(-2i64..=2);
        let t2 = rng.gen_range(-2i64..=2);
        let a = base.twist(t1).unwrap();
        let b = base.twist(t2).unwrap();
        assert!(
            exponents_mod_z_agree(&a, &b, bound).unwrap(),
            "twists disagree mod ℤ (e={e}, p={p})"
        );
        // One single-exponent shift move keeps the class multiset.
        let target = a.exponents(bound).unwrap().entries[0].digits.clone();
        let shifted = a.shift_exponent(&target).unwrap();
        assert!(
            exponents_mod_z_agree(&a, &shifted, bound).unwrap(),
            "shift move changes classes (e={e}, p={p})"
        );
        assert!(
            exponents_mod_z_agree(&base, &shifted, bound).unwrap(),
            "shifted twist disagrees with base (e={e}, p={p})"
        );
    }
    println!("criterion 7 (exponents mod ℤ invariant): PASS");
}

// ---------------------------------------------------------------- criterion 8

fn promoted_double_cover_bundle() -> StratifiedBundle {
    let field = fp(3);
    let push = kummer_pushforward(&field, 2, M).unwrap();
    let pulled = pullback_kummer_lattice(&push, 2).unwrap();
    let ext = pulled.tau_extend(&TauSection::Canonical, 2).unwrap();
    ext.promote_zero_exponents().unwrap()
}

#[test]
fn criterion_08_zero_exponent_promotion() {
    let bundle = promoted_double_cover_bundle();
    assert_eq!(bundle.rank(), 2);
    assert!(bundle.pole_order() <= 0, "promoted bundle must be pole-free");
    assert!(bundle.validate().is_valid());
    let h = bundle.horizontal_sections(-5, 5).unwrap();
    assert_eq!(h.len(), 2, "horizontal-section dimension");
    println!("criterion 8 (zero-exponent promotion): PASS");
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_tame_wild_dichotomy() {
    let bounds = SaturationBounds::default();
    for (e, p, _, _) in SUITE {
        let field = fp(p);
        let cover = CoverSpec::kummer(&field, e).unwrap();
        let report = tameness_verdict(&field, &cover, M, &bounds, 2).unwrap();
        assert_eq!(report.verdict, TamenessVerdict::Tame, "Kummer e={e}, p={p}");
        assert_eq!(
            report.exponents.unwrap().digit_multiset().len(),
            e as usize
        );
    }
    // y² − y = x^(-1) over F_2: minimal pole per level is 1, 2, 4, 8.
    let field = fp(2);
    let g = LaurentPoly::monomial(field, -1, 1);
    let cover = CoverSpec::artin_schreier(g).unwrap();
    let report = tameness_verdict(&field, &cover, 3, &bounds, 2).unwrap();
    assert_eq!(report.verdict, TamenessVerdict::WildEvidence);
    assert_eq!(report.pole_trace, Some(vec![1, 2, 4, 8]));
    // y³ − y = x^(-1) over F_3, levels 0..2.
    let field = fp(3);
    let g = LaurentPoly::monomial(field, -1, 1);
    let cover = CoverSpec::artin_schreier(g).unwrap();
    let report = tameness_verdict(&field, &cover, 2, &bounds, 2).unwrap();
    assert_eq!(report.verdict, TamenessVerdict::WildEvidence);
    let trace = report.pole_trace.expect("per-level poles must stabilize");
    assert!(trace.windows(2).all(|w| w[1] > w[0]), "pole trace {trace:?}");
    println!("criterion 9 (tame/wild dichotomy): PASS");
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_operator_identity_suite() {
    // Every bundle produced by the constructors exercised in criteria 4–9
    // passes the structured operator checks (p-power nilpotence, generator
    // commutation, composite identity).
    let mut bundles: Vec<(String, StratifiedBundle)> = Vec::new();
    for (e, p, level, bound) in SUITE {
        let field = fp(p);
        let push = kummer_pushforward(&field, e, M).unwrap();
        bundles.push((format!("kummer e={e} p={p}"), push.to_bundle()));
        let pulled = pullback_kummer_lattice(&push, e).unwrap();
        bundles.push((format!("pullback e={e} p={p}"), pulled.to_bundle()));
        let tall = kummer_pushforward(&field, e, level).unwrap();
        let ext = tall
            .twist(1)
            .unwrap()
            .tau_extend(&TauSection::Canonical, bound)
            .unwrap();
        bundles.push((
            format!("tau extension e={e} p={p}"),
            ext.to_bundle().truncate(M),
        ));
    }
    bundles.push(("promoted double cover".into(), promoted_double_cover_bundle()));
    let field = fp(2);
    let g = LaurentPoly::monomial(field, -1, 1);
    bundles.push((
        "artin-schreier p=2".into(),
        artin_schreier_pushforward(&field, &g, 3).unwrap(),
    ));
    let field = fp(3);
    let g = LaurentPoly::monomial(field, -1, 1);
    bundles.push((
        "artin-schreier p=3".into(),
        artin_schreier_pushforward(&field, &g, 2).unwrap(),
    ));
    for (name, bundle) in &bundles {
        let report = bundle.validate();
        assert!(report.is_valid(), "{name}: {:?}", report.failures());
    }
    println!("criterion 10 (operator identity suite): PASS");
}

// --------------------------------------------------------------- criterion 11

#[test]
fn criterion_11_cartier_round_trip() {
    let field = fp(3);
    let half = ExponentRational::new(1, 2);
    let input = StratifiedBundle::exponent_line(field, &half, 1).unwrap();
    // x·e is flat for the level-0 connection.
    let section = vec![LaurentPoly::monomial(field, 1, 1)];
    let image = input.truncate(0).apply(1, &section).unwrap();
    assert!(image.iter().all(LaurentPoly::is_zero), "x·e must be flat");
    let descended = input.cartier_descend(-5, 5).unwrap();
    assert_eq!(descended.level(), 0);
    let back = descended.frobenius_pullback();
    let iso = horizontal_isomorphism(&back, &input, -5, 5).unwrap();
    assert!(iso.is_some(), "round trip must be horizontally isomorphic");
    println!("criterion 11 (Cartier descent round trip): PASS");
}
