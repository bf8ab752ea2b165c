//! Bell functionals: CHSH, the Braunstein-Caves chains, and tensor powers.
//!
//! Normalization follows the convention where local boxes score at least
//! sqrt2 and lower values mean stronger violation: the CHSH vector carries
//! 2^{-5/2} times {1, 5} patterns, the m-chain carries 1/(2*sqrt2*m) times
//! {1, alpha}. The chain's wraparound block flips its pattern; a chain can
//! therefore never be satisfied perfectly by deterministic strategies.

use crate::boxes::{BoxShape, BoxTable};
use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use crate::sum;

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    Chsh,
    /// Chained inequality with m settings per side; `modified` swaps the
    /// mismatch coefficient alpha = 2m+1 for sqrt(1+4m^2) (evaluation only,
    /// no security statement attaches to it).
    Bc { m: usize, modified: bool },
}

#[derive(Clone, Debug)]
pub struct BellFunctional {
    shape: BoxShape,
    kind: FunctionalKind,
    prefactor: Scalar,
    alpha: Scalar,
    local_bound: Scalar,
    ns_optimum: Scalar,
}

/// Kind of a coefficient position inside a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    Zero,
    Normal,
    Flipped,
}

impl BellFunctional {
    pub fn chsh() -> Self {
        BellFunctional {
            shape: BoxShape::binary(1),
            kind: FunctionalKind::Chsh,
            prefactor: Scalar::sqrt2_pow(-5),
            alpha: Scalar::int(5),
            local_bound: Scalar::sqrt2_pow(1),
            ns_optimum: Scalar::sqrt2_pow(-1),
        }
    }

    pub fn bc(m: usize, modified: bool) -> Result<Self> {
        if m < 2 {
            return Err(Error::input(format!("chain needs m >= 2, got {m}")));
        }
        // 1/(2 sqrt2 m)
        let prefactor = Scalar::ratio(1, m as i64) * Scalar::sqrt2_pow(-3);
        let alpha = if modified {
            Scalar::float((1.0 + 4.0 * (m as f64) * (m as f64)).sqrt())
        } else {
            Scalar::int(2 * m as i64 + 1)
        };
        // Deterministic strategies must break at least one of the 2m links;
        // breaking exactly one is achievable, giving (2m-1+alpha)/(2 sqrt2 m).
        let local_bound = (Scalar::int(2 * m as i64 - 1) + alpha.clone()) * prefactor.clone();
        Ok(BellFunctional {
            shape: BoxShape::chained(1, m),
            kind: FunctionalKind::Bc { m, modified },
            prefactor,
            alpha,
            local_bound,
            ns_optimum: Scalar::sqrt2_pow(-1),
        })
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    pub fn shape(&self) -> &BoxShape {
        &self.shape
    }

    pub fn settings(&self) -> usize {
        self.shape.settings_a
    }

    pub fn local_bound(&self) -> &Scalar {
        &self.local_bound
    }

    pub fn ns_optimum(&self) -> &Scalar {
        &self.ns_optimum
    }

    pub fn mode(&self) -> Mode {
        self.alpha.mode()
    }

    fn block(&self, x: usize, y: usize) -> Block {
        match self.kind {
            FunctionalKind::Chsh => Block::Normal, // flip handled by the x*y term
            FunctionalKind::Bc { m, .. } => {
                if x == 0 && y == m - 1 {
                    Block::Flipped
                } else if x == y || x == y + 1 {
                    Block::Normal
                } else {
                    Block::Zero
                }
            }
        }
    }

    /// Coefficient at (a, b, x, y).
    pub fn entry(&self, a: usize, b: usize, x: usize, y: usize) -> Scalar {
        debug_assert!(a < 2 && b < 2);
        debug_assert!(x < self.shape.settings_a && y < self.shape.settings_b);
        match self.kind {
            FunctionalKind::Chsh => {
                let mismatch = (a ^ b) != (x & y);
                if mismatch {
                    self.prefactor.clone() * self.alpha.clone()
                } else {
                    self.prefactor.clone()
                }
            }
            FunctionalKind::Bc { .. } => match self.block(x, y) {
                Block::Zero => Scalar::zero(),
                Block::Normal => {
                    if a == b {
                        self.prefactor.clone()
                    } else {
                        self.prefactor.clone() * self.alpha.clone()
                    }
                }
                Block::Flipped => {
                    if a != b {
                        self.prefactor.clone()
                    } else {
                        self.prefactor.clone() * self.alpha.clone()
                    }
                }
            },
        }
    }

    /// All single-pair coefficients in the normative index order.
    pub fn entries(&self) -> Vec<Scalar> {
        (0..self.shape.len())
            .map(|idx| {
                let (x, y, a, b) = self.shape.split_single(idx);
                self.entry(a, b, x, y)
            })
            .collect()
    }

    /// Pairing with a box over any number of pairs: the coefficient of a
    /// multi-pair entry is the product of per-pair coefficients.
    pub fn evaluate(&self, table: &BoxTable) -> Result<Scalar> {
        let ts = table.shape();
        if (ts.outcomes_a, ts.outcomes_b, ts.settings_a, ts.settings_b)
            != (2, 2, self.shape.settings_a, self.shape.settings_b)
        {
            return Err(Error::input(format!(
                "functional over {0}x{0} settings cannot pair with {1}x{2}",
                self.shape.settings_a, ts.settings_a, ts.settings_b
            )));
        }
        let coefs = self.entries();
        let block = self.shape.len();
        let n = ts.pairs;
        if table.mode() == Mode::Float || self.mode() == Mode::Float {
            let coefs: Vec<f64> = coefs.iter().map(Scalar::to_f64).collect();
            let total = sum::sum_indexed(ts.checked_len()?, |flat| {
                let mut acc = 1.0;
                let mut f = flat;
                for _ in 0..n {
                    acc *= coefs[f % block];
                    f /= block;
                }
                acc * table.entry(flat).to_f64()
            });
            return Ok(Scalar::float(total));
        }
        let mut total = Scalar::zero();
        for flat in 0..ts.len() {
            let p = table.entry(flat);
            if p.is_zero() {
                continue;
            }
            let mut coef = Scalar::one();
            let mut f = flat;
            for _ in 0..n {
                coef = coef * coefs[f % block].clone();
                f /= block;
            }
            if coef.is_zero() {
                continue;
            }
            total = total + coef * p.clone();
        }
        Ok(total)
    }

    /// Product of per-pair values for an explicit product of boxes.
    pub fn evaluate_product(&self, factors: &[BoxTable]) -> Result<Scalar> {
        let mut total = Scalar::one();
        for f in factors {
            total = total * self.evaluate(f)?;
        }
        Ok(total)
    }
}

/// Closed-form tensor-power CHSH coefficient: 2^{-5N/2} * 5^M with M the
/// number of pairs where a ⊕ b ≠ x·y. Bit-strings are MSB-first.
pub fn chsh_tensor_entry(a: u64, b: u64, x: u64, y: u64, pairs: usize) -> Result<Scalar> {
    if pairs == 0 || pairs > 26 {
        return Err(Error::input(format!("tensor entry for 1..=26 pairs, got {pairs}")));
    }
    let mask = if pairs == 64 { u64::MAX } else { (1u64 << pairs) - 1 };
    for (name, s) in [("a", a), ("b", b), ("x", x), ("y", y)] {
        if s & !mask != 0 {
            return Err(Error::input(format!("bit-string {name} longer than {pairs} pairs")));
        }
    }
    let m = ((a ^ b ^ (x & y)) & mask).count_ones();
    Ok(Scalar::int(5i64.pow(m)) * Scalar::sqrt2_pow(-5 * pairs as i64))
}

/// The nonsignaling box saturating the chain: perfect correlation on every
/// normal link, perfect anticorrelation on the wraparound, uniform
/// elsewhere. For m = 2 this is the PR variant a ⊕ b = x·y ⊕ y.
pub fn perfect_chain_box(m: usize) -> Result<BoxTable> {
    let f = BellFunctional::bc(m, false)?;
    let shape = BoxShape::chained(1, m);
    let mut entries = vec![Scalar::zero(); shape.len()];
    for x in 0..m {
        for y in 0..m {
            match f.block(x, y) {
                Block::Zero => {
                    for a in 0..2 {
                        for b in 0..2 {
                            entries[shape.single_index(x, y, a, b)] = Scalar::ratio(1, 4);
                        }
                    }
                }
                Block::Normal => {
                    for a in 0..2 {
                        entries[shape.single_index(x, y, a, a)] = Scalar::ratio(1, 2);
                    }
                }
                Block::Flipped => {
                    for a in 0..2 {
                        entries[shape.single_index(x, y, a, 1 - a)] = Scalar::ratio(1, 2);
                    }
                }
            }
        }
    }
    BoxTable::new(shape, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes;

    fn sqrt2() -> Scalar {
        Scalar::sqrt2_pow(1)
    }

    #[test]
    fn chsh_printed_entries() {
        let f = BellFunctional::chsh();
        // 1/(4 sqrt2) and 5/(4 sqrt2)
        let unit = Scalar::sqrt2_pow(-5);
        assert_eq!(f.entry(0, 0, 0, 0), unit);
        assert_eq!(f.entry(0, 1, 0, 0), Scalar::int(5) * unit.clone());
        assert_eq!(f.entry(0, 0, 1, 1), Scalar::int(5) * unit.clone());
        assert_eq!(f.entry(1, 1, 1, 1), Scalar::int(5) * unit.clone());
        assert_eq!(f.entry(0, 1, 1, 1), unit);
        assert!((unit.to_f64() - 1.0 / (4.0 * std::f64::consts::SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn chsh_benchmark_boxes() {
        let f = BellFunctional::chsh();
        assert_eq!(f.evaluate(&boxes::pr_box()).unwrap(), Scalar::sqrt2_pow(-1));
        let uniform = boxes::uniform_box(BoxShape::binary(1)).unwrap();
        assert_eq!(
            f.evaluate(&uniform).unwrap(),
            Scalar::int(3) * Scalar::sqrt2_pow(-1)
        );
        let det = boxes::deterministic_binary(0, 0);
        assert_eq!(f.evaluate(&det).unwrap(), sqrt2());
        assert_eq!(
            f.evaluate(&boxes::anti_pr_box()).unwrap(),
            Scalar::int(5) * Scalar::sqrt2_pow(-1)
        );
    }

    #[test]
    fn chsh_tensor_entry_closed_form() {
        assert_eq!(
            chsh_tensor_entry(0, 0, 0, 0, 1).unwrap(),
            Scalar::sqrt2_pow(-5)
        );
        assert_eq!(
            chsh_tensor_entry(0, 1, 0, 0, 1).unwrap(),
            Scalar::int(5) * Scalar::sqrt2_pow(-5)
        );
        // N=2, a=00, b=11, x=00, y=00: M=2 -> 25/32
        assert_eq!(
            chsh_tensor_entry(0b00, 0b11, 0b00, 0b00, 2).unwrap(),
            Scalar::ratio(25, 32)
        );
    }

    #[test]
    fn chsh_tensor_entry_matches_products() {
        for n in 1..=3usize {
            let f = BellFunctional::chsh();
            let size = 1u64 << n;
            for a in 0..size {
                for b in 0..size {
                    for x in 0..size {
                        for y in 0..size {
                            let mut prod = Scalar::one();
                            for i in 0..n {
                                let s = n - 1 - i;
                                prod = prod
                                    * f.entry(
                                        ((a >> s) & 1) as usize,
                                        ((b >> s) & 1) as usize,
                                        ((x >> s) & 1) as usize,
                                        ((y >> s) & 1) as usize,
                                    );
                            }
                            assert_eq!(chsh_tensor_entry(a, b, x, y, n).unwrap(), prod);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bc_structure() {
        let f = BellFunctional::bc(3, false).unwrap();
        assert_eq!(f.entry(0, 0, 0, 0), Scalar::ratio(1, 3) * Scalar::sqrt2_pow(-3));
        assert_eq!(
            f.entry(0, 1, 0, 0),
            Scalar::ratio(7, 3) * Scalar::sqrt2_pow(-3)
        );
        // wraparound block (x=0, y=2) flips
        assert_eq!(f.entry(0, 1, 0, 2), Scalar::ratio(1, 3) * Scalar::sqrt2_pow(-3));
        assert_eq!(f.entry(0, 0, 0, 2), Scalar::ratio(7, 3) * Scalar::sqrt2_pow(-3));
        // off-chain block
        assert_eq!(f.entry(0, 0, 0, 1), Scalar::zero());
        // 6 of 9 blocks are nonzero
        let nonzero = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&(x, y)| !f.entry(0, 0, x, y).is_zero())
            .count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn bc_rejects_m_below_2() {
        assert!(BellFunctional::bc(1, false).is_err());
    }

    #[test]
    fn bc_modified_alpha() {
        let f = BellFunctional::bc(2, true).unwrap();
        assert_eq!(f.mode(), Mode::Float);
        let a = f.entry(0, 1, 0, 0).to_f64() / f.entry(0, 0, 0, 0).to_f64();
        assert!((a - 17f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bc2_equals_chsh_up_to_relabeling() {
        let chsh = BellFunctional::chsh();
        let bc2 = BellFunctional::bc(2, false).unwrap();
        // search all per-side relabelings: setting swap (2) x per-setting
        // outcome flips (4), each side independently
        let mut found = None;
        'outer: for sx in 0..2usize {
            for fa in 0..4usize {
                for sy in 0..2usize {
                    for fb in 0..4usize {
                        let ok = (0..2).all(|a| {
                            (0..2).all(|b| {
                                (0..2).all(|x| {
                                    (0..2).all(|y| {
                                        let xr = if sx == 1 { 1 - x } else { x };
                                        let yr = if sy == 1 { 1 - y } else { y };
                                        let ar = a ^ ((fa >> xr) & 1);
                                        let br = b ^ ((fb >> yr) & 1);
                                        bc2.entry(ar, br, xr, yr) == chsh.entry(a, b, x, y)
                                    })
                                })
                            })
                        });
                        if ok {
                            found = Some((sx, fa, sy, fb));
                            break 'outer;
                        }
                    }
                }
            }
        }
        assert!(found.is_some(), "bc(2) must be a relabeling of chsh");
    }

    #[test]
    fn perfect_chain_values() {
        for m in 2..=6 {
            let f = BellFunctional::bc(m, false).unwrap();
            let chain = perfect_chain_box(m).unwrap();
            assert!(chain.violations().is_empty());
            assert!(chain.signaling_violations().is_empty());
            assert_eq!(f.evaluate(&chain).unwrap(), Scalar::sqrt2_pow(-1), "m={m}");
        }
    }

    #[test]
    fn perfect_chain_m2_is_a_pr_variant() {
        let chain = perfect_chain_box(2).unwrap();
        let pr = boxes::pr_variant(0, 1, 0);
        for i in 0..16 {
            assert_eq!(chain.entry(i), pr.entry(i));
        }
    }

    #[test]
    fn deterministic_bound_met_with_equality() {
        for m in 2..=4 {
            let f = BellFunctional::bc(m, false).unwrap();
            let shape = BoxShape::chained(1, m);
            let mut best: Option<Scalar> = None;
            for amap in 0..(1usize << m) {
                for bmap in 0..(1usize << m) {
                    let a_map: Vec<usize> = (0..m).map(|x| (amap >> x) & 1).collect();
                    let b_map: Vec<usize> = (0..m).map(|y| (bmap >> y) & 1).collect();
                    let d = boxes::deterministic_box(shape.clone(), &a_map, &b_map).unwrap();
                    let v = f.evaluate(&d).unwrap();
                    assert!(v >= *f.local_bound(), "m={m} det below bound");
                    best = Some(match best {
                        None => v,
                        Some(cur) => {
                            if v < cur {
                                v
                            } else {
                                cur
                            }
                        }
                    });
                }
            }
            assert_eq!(best.unwrap(), sqrt2(), "m={m} optimum");
            assert_eq!(*f.local_bound(), sqrt2());
        }
    }

    #[test]
    fn tensor_evaluation_multiplies() {
        let f = BellFunctional::chsh();
        let pr = boxes::pr_box();
        let det = boxes::deterministic_binary(0, 0);
        let prod = boxes::tensor(&[pr.clone(), det.clone()]).unwrap();
        let direct = f.evaluate(&prod).unwrap();
        let split = f.evaluate(&pr).unwrap() * f.evaluate(&det).unwrap();
        assert_eq!(direct, split);
        assert_eq!(direct, Scalar::one());
    }

    #[test]
    fn evaluate_rejects_shape_mismatch() {
        let f = BellFunctional::bc(3, false).unwrap();
        assert!(f.evaluate(&boxes::pr_box()).is_err());
    }
}
