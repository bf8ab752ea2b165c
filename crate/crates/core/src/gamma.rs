//! The marginal-reconstruction vectors γ, γ', γ'' and their tensor powers.
//!
//! Each family gives, for every outcome string a⃗, a vector Γ_a over box
//! entries with ⟨Γ_a|P⟩ = P(a⃗|x⃗=0) whenever P is nonsignaling. The three
//! families differ by no-signaling null directions, so they agree on the
//! nonsignaling polytope and disagree off it.

use serde::Serialize;

use crate::boxes::{BoxShape, BoxTable};
use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};

/// Largest tensor power for which flat entry indices and the common
/// denominator 8^N stay inside machine integers.
pub const MAX_TENSOR_PAIRS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaVariant {
    Plain,
    Prime,
    DoublePrime,
}

// Single-pair numerator tables, indexed by 8x+4y+2a+b, over the family
// denominator. PRIME is the defining marginal at y=0; DOUBLE_PRIME uses
// only Bob-to-Alice no-signaling; PLAIN additionally uses Alice-side
// no-signaling and is the vector the hashing bound is built on. The
// reconstruction identity pins the orientation of each table; all three
// are machine-checked against it over the full vertex set.
const PLAIN_NUM: [[i64; 16]; 2] = [
    [1, 5, -3, 1, 1, 5, -3, 1, 1, -3, 5, 1, 5, 1, 1, -3],
    [1, -3, 5, 1, 1, -3, 5, 1, 1, 5, -3, 1, -3, 1, 1, 5],
];
const PRIME_NUM: [[i64; 16]; 2] = [
    [1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
];
const DOUBLE_PRIME_NUM: [[i64; 16]; 2] = [
    [2, 2, 0, 0, 2, 2, 0, 0, -1, -1, 1, 1, 1, 1, -1, -1],
    [0, 0, 2, 2, 0, 0, 2, 2, 1, 1, -1, -1, -1, -1, 1, 1],
];

// Per-index value of a⊕b⊕xy: the CHSH mismatch indicator.
const NIB_WEIGHT: [u32; 16] = [0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1];

impl GammaVariant {
    pub const ALL: [GammaVariant; 3] =
        [GammaVariant::Plain, GammaVariant::Prime, GammaVariant::DoublePrime];

    pub fn name(self) -> &'static str {
        match self {
            GammaVariant::Plain => "plain",
            GammaVariant::Prime => "prime",
            GammaVariant::DoublePrime => "double-prime",
        }
    }

    fn table(self) -> &'static [[i64; 16]; 2] {
        match self {
            GammaVariant::Plain => &PLAIN_NUM,
            GammaVariant::Prime => &PRIME_NUM,
            GammaVariant::DoublePrime => &DOUBLE_PRIME_NUM,
        }
    }

    /// Shared per-pair denominator of the numerator table.
    pub fn denominator(self) -> i64 {
        match self {
            GammaVariant::Plain => 8,
            GammaVariant::Prime => 1,
            GammaVariant::DoublePrime => 4,
        }
    }

    /// Integer numerator at a single-pair index (over `denominator()`).
    pub fn numerator(self, bit: u64, idx: usize) -> i64 {
        debug_assert!(bit < 2 && idx < 16);
        self.table()[bit as usize][idx]
    }
}

impl std::fmt::Display for GammaVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The 16-entry single-pair vector γ^{variant}_bit in normative index order.
pub fn gamma(variant: GammaVariant, bit: u64) -> Vec<Scalar> {
    assert!(bit < 2, "gamma bit must be 0 or 1");
    let den = variant.denominator();
    (0..16).map(|idx| Scalar::ratio(variant.numerator(bit, idx), den)).collect()
}

/// Integer numerator of Γ_a(entry) = Π_i γ_{a_i}(entry_i); the common
/// denominator is `denominator()^pairs`. Zero factors short-circuit.
pub fn tensor_numerator(variant: GammaVariant, a: u64, pairs: usize, entry: usize) -> i64 {
    let table = variant.table();
    let mut num = 1i64;
    for i in 0..pairs {
        let shift = 4 * (pairs - 1 - i);
        let nib = (entry >> shift) & 15;
        let bit = ((a >> (pairs - 1 - i)) & 1) as usize;
        let factor = table[bit][nib];
        if factor == 0 {
            return 0;
        }
        num *= factor;
    }
    num
}

fn check_tensor_args(a: u64, pairs: usize, entry: usize) -> Result<()> {
    if pairs == 0 || pairs > MAX_TENSOR_PAIRS {
        return Err(Error::size_guard(format!(
            "tensor power {pairs} outside 1..={MAX_TENSOR_PAIRS}"
        )));
    }
    if a >> pairs != 0 {
        return Err(Error::input(format!(
            "outcome string {a:#b} longer than {pairs} pairs"
        )));
    }
    if let Some(total) = 16usize.checked_pow(pairs as u32) {
        if entry >= total {
            return Err(Error::input(format!(
                "entry index {entry} out of range for {pairs} pairs"
            )));
        }
    }
    Ok(())
}

/// Γ_a(entry) for the PLAIN family: the tensor product of the Lemma 1
/// single-pair vectors, as an exact scalar.
pub fn gamma_tensor_entry(a: u64, pairs: usize, entry: usize) -> Result<Scalar> {
    check_tensor_args(a, pairs, entry)?;
    let num = tensor_numerator(GammaVariant::Plain, a, pairs, entry);
    let den = 8i64.pow(pairs as u32);
    Ok(Scalar::ratio(num, den))
}

/// M = ‖a⃗ ⊕ b⃗ ⊕ x⃗·y⃗‖ of a flat entry: the number of pairs whose
/// outcomes mismatch the CHSH target.
pub fn entry_weight(pairs: usize, entry: usize) -> u32 {
    let mut w = 0;
    for i in 0..pairs {
        let nib = (entry >> (4 * (pairs - 1 - i))) & 15;
        w += NIB_WEIGHT[nib];
    }
    w
}

#[derive(Clone, Debug, Serialize)]
pub struct VariantDiscrepancy {
    pub variant: GammaVariant,
    /// Worst |⟨Γ_a|P⟩ − P(a⃗|x⃗=0)| over outcome strings a⃗.
    pub worst: Scalar,
    /// First a⃗ attaining the worst discrepancy.
    pub worst_outcome: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma1Report {
    pub per_variant: Vec<VariantDiscrepancy>,
    pub max_discrepancy: Scalar,
    pub mode: Mode,
}

impl Lemma1Report {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_discrepancy.abs().to_f64() <= tol
    }
}

/// Checks the reconstruction identity ⟨Γ_a|P⟩ = P(a⃗|x⃗=0) for all three
/// variants against the marginal read directly off the table at y⃗ = 0.
/// Nonsignaling boxes give zero exactly; signaling boxes may not (and the
/// fixtures in the test suite do not), except for PRIME which reads the
/// marginal by construction.
pub fn lemma1_check(table: &BoxTable) -> Result<Lemma1Report> {
    let shape = table.shape();
    if !shape.is_binary() {
        return Err(Error::unsupported("lemma1_check requires a binary-shaped box"));
    }
    let n = shape.pairs;
    if n > MAX_TENSOR_PAIRS {
        return Err(Error::size_guard(format!(
            "lemma1_check limited to {MAX_TENSOR_PAIRS} pairs"
        )));
    }
    let mode = table.mode();
    let mut per_variant = Vec::with_capacity(3);
    let mut max_disc = Scalar::zero();
    for variant in GammaVariant::ALL {
        let mut worst = Scalar::zero();
        let mut worst_outcome = 0u64;
        for a in 0..(1u64 << n) {
            let estimate = lemma1_estimate(table, variant, a);
            let disc = (estimate - table.marginal_a_at_zero(a)).abs();
            if disc > worst {
                worst = disc.clone();
                worst_outcome = a;
            }
            if disc > max_disc {
                max_disc = disc;
            }
        }
        per_variant.push(VariantDiscrepancy { variant, worst, worst_outcome });
    }
    Ok(Lemma1Report { per_variant, max_discrepancy: max_disc, mode })
}

fn lemma1_estimate(table: &BoxTable, variant: GammaVariant, a: u64) -> Scalar {
    let n = table.shape().pairs;
    let entries = table.entries();
    match table.mode() {
        Mode::Exact => {
            let mut acc = Scalar::zero();
            for (e, p) in entries.iter().enumerate() {
                let num = tensor_numerator(variant, a, n, e);
                if num != 0 && !p.is_zero() {
                    acc = acc + Scalar::int(num) * p.clone();
                }
            }
            acc * Scalar::ratio(1, variant.denominator().pow(n as u32))
        }
        Mode::Float => {
            let dinv = 1.0 / variant.denominator().pow(n as u32) as f64;
            let total = crate::sum::sum_indexed(entries.len(), |e| {
                tensor_numerator(variant, a, n, e) as f64 * entries[e].to_f64()
            });
            Scalar::float(total * dinv)
        }
    }
}

/// Exhaustive check that Σ_{a⃗} Γ_a = 4^{−N}·ones, entry by entry, in
/// integer arithmetic (Σ_a numerators = 2^N over the denominator 8^N).
pub fn gamma_completeness_check(pairs: usize) -> Result<bool> {
    if pairs == 0 || pairs > MAX_TENSOR_PAIRS {
        return Err(Error::size_guard(format!(
            "completeness power {pairs} outside 1..={MAX_TENSOR_PAIRS}"
        )));
    }
    let total = BoxShape::binary(pairs).checked_len()?;
    let target = 1i64 << pairs;
    for entry in 0..total {
        let mut sum = 0i64;
        for a in 0..(1u64 << pairs) {
            sum += tensor_numerator(GammaVariant::Plain, a, pairs, entry);
        }
        if sum != target {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{deterministic_binary, pr_box, signaling_fixture, uniform_box};

    #[test]
    fn printed_single_pair_entries() {
        let g0 = gamma(GammaVariant::Plain, 0);
        let g1 = gamma(GammaVariant::Plain, 1);
        assert_eq!(g0[0], Scalar::ratio(1, 8));
        assert_eq!(g0[1], Scalar::ratio(-3, 8));
        assert_eq!(g0[2], Scalar::ratio(5, 8));
        assert_eq!(g0[12], Scalar::ratio(5, 8));
        assert_eq!(g0[15], Scalar::ratio(-3, 8));
        assert_eq!(g1[1], Scalar::ratio(5, 8));
        assert_eq!(g1[12], Scalar::ratio(-3, 8));
        let p0 = gamma(GammaVariant::Prime, 0);
        for idx in 0..16 {
            let expect = if idx < 2 { Scalar::int(1) } else { Scalar::zero() };
            assert_eq!(p0[idx], expect);
        }
        let d0 = gamma(GammaVariant::DoublePrime, 0);
        assert_eq!(d0[0], Scalar::ratio(2, 4));
        assert_eq!(d0[8], Scalar::ratio(-1, 4));
        assert_eq!(d0[10], Scalar::ratio(1, 4));
        assert_eq!(d0[12], Scalar::ratio(1, 4));
        assert_eq!(d0[14], Scalar::ratio(-1, 4));
    }

    #[test]
    fn single_pair_completeness_by_addition() {
        for idx in 0..16 {
            let total = gamma(GammaVariant::Plain, 0)[idx].clone()
                + gamma(GammaVariant::Plain, 1)[idx].clone();
            assert_eq!(total, Scalar::ratio(1, 4));
        }
    }

    #[test]
    fn tensor_entry_matches_single_pair() {
        for a in 0..2u64 {
            for idx in 0..16 {
                assert_eq!(
                    gamma_tensor_entry(a, 1, idx).unwrap(),
                    gamma(GammaVariant::Plain, a)[idx]
                );
            }
        }
    }

    #[test]
    fn tensor_entry_two_pair_corner() {
        assert_eq!(gamma_tensor_entry(0, 2, 0).unwrap(), Scalar::ratio(1, 64));
    }

    #[test]
    fn tensor_entry_bound_attained() {
        for pairs in 1..=3usize {
            let total = 16usize.pow(pairs as u32);
            let mut attained = false;
            for a in 0..(1u64 << pairs) {
                for entry in 0..total {
                    let v = gamma_tensor_entry(a, pairs, entry).unwrap();
                    let m = entry_weight(pairs, entry);
                    let bound = Scalar::ratio(5i64.pow(m), 8i64.pow(pairs as u32));
                    let gap = bound.clone() - v.abs();
                    assert!(gap.signum() != std::cmp::Ordering::Less, "bound violated");
                    if gap.is_zero() {
                        attained = true;
                    }
                }
            }
            assert!(attained);
        }
    }

    #[test]
    fn tensor_entry_rejects_bad_args() {
        assert!(gamma_tensor_entry(4, 2, 0).is_err());
        assert!(gamma_tensor_entry(0, 0, 0).is_err());
        assert!(gamma_tensor_entry(0, 1, 16).is_err());
        assert!(gamma_tensor_entry(0, MAX_TENSOR_PAIRS + 1, 0).is_err());
    }

    #[test]
    fn entry_weight_counts_mismatches() {
        assert_eq!(entry_weight(1, 0), 0);
        assert_eq!(entry_weight(1, 1), 1);
        assert_eq!(entry_weight(1, 12), 1);
        assert_eq!(entry_weight(1, 15), 1);
        assert_eq!(entry_weight(1, 13), 0);
        assert_eq!(entry_weight(2, 0x1c), 2);
        assert_eq!(entry_weight(2, 0x1d), 1);
        assert_eq!(entry_weight(2, 0xcc), 2);
    }

    #[test]
    fn pr_box_marginal_reconstructed() {
        let pr = pr_box();
        let report = lemma1_check(&pr).unwrap();
        assert!(report.max_discrepancy.is_zero());
        let g0 = gamma(GammaVariant::Plain, 0);
        let mut inner = Scalar::zero();
        for (idx, e) in pr.entries().iter().enumerate() {
            inner = inner + g0[idx].clone() * e.clone();
        }
        assert_eq!(inner, Scalar::ratio(1, 2));
    }

    #[test]
    fn deterministic_box_reconstructed() {
        let det = deterministic_binary(0b00, 0b00);
        let entries = det.entries();
        let mut inner0 = Scalar::zero();
        let mut inner1 = Scalar::zero();
        for idx in 0..16 {
            inner0 = inner0 + gamma(GammaVariant::Plain, 0)[idx].clone() * entries[idx].clone();
            inner1 = inner1 + gamma(GammaVariant::Plain, 1)[idx].clone() * entries[idx].clone();
        }
        assert_eq!(inner0, Scalar::int(1));
        assert!(inner1.is_zero());
        assert!(lemma1_check(&det).unwrap().max_discrepancy.is_zero());
    }

    #[test]
    fn uniform_two_pair_reconstructed() {
        let one = uniform_box(BoxShape::binary(1)).unwrap();
        let two = crate::boxes::tensor(&[one.clone(), one]).unwrap();
        let report = lemma1_check(&two).unwrap();
        assert!(report.max_discrepancy.is_zero());
        assert_eq!(report.mode, Mode::Exact);
    }

    #[test]
    fn signaling_fixture_breaks_plain_and_double_prime() {
        let s = signaling_fixture();
        let report = lemma1_check(&s).unwrap();
        assert!(!report.max_discrepancy.is_zero());
        for vd in &report.per_variant {
            match vd.variant {
                GammaVariant::Prime => assert!(vd.worst.is_zero()),
                GammaVariant::Plain => {
                    assert_eq!(vd.worst, Scalar::ratio(3, 2));
                }
                GammaVariant::DoublePrime => assert!(!vd.worst.is_zero()),
            }
        }
        assert!(!report.passes(1e-9));
    }

    #[test]
    fn completeness_small_powers() {
        for pairs in 1..=3 {
            assert!(gamma_completeness_check(pairs).unwrap());
        }
    }

    #[test]
    fn variants_differ_entrywise() {
        let plain = gamma(GammaVariant::Plain, 0);
        let prime = gamma(GammaVariant::Prime, 0);
        let dp = gamma(GammaVariant::DoublePrime, 0);
        assert!(plain.iter().zip(&prime).any(|(a, b)| a != b));
        assert!(plain.iter().zip(&dp).any(|(a, b)| a != b));
        assert!(prime.iter().zip(&dp).any(|(a, b)| a != b));
    }
}
