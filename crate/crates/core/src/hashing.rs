//! Hash functions for privacy amplification and the entry-wise majorization
//! they must satisfy.
//!
//! A hash maps the n_r raw-key bits to n_s secret bits plus n_c public bits,
//! stored as a plain table over all 2^{n_r} inputs. The preimage aggregates
//! Γ_{A_k} = Σ_{a ∈ A_k} Γ_a are compared entry-wise against the CHSH tensor
//! power; a hash "passes" when every entry ratio is at most 1.

use serde::Serialize;

use crate::boxes::BoxShape;
use crate::error::{Error, Result};
use crate::gamma::{self, GammaVariant};
use crate::scalar::{Mode, Scalar};

/// Table size guard: 2^{n_r} entries are materialized.
pub const MAX_HASH_INPUT_BITS: usize = 24;
/// Entry scans touch 16^{n_r} indices.
pub const MAX_SCAN_PAIRS: usize = 6;
/// Output-side guard keeping the integer entry scan inside i128.
pub const MAX_SCAN_OUTPUT_BITS: usize = 16;

/// Normative 64-bit mixer: every implementation must produce these exact
/// table bits for a given seed, so experiments replay across machines.
pub fn mix64(seed: u64, a: u64) -> u64 {
    let mut z = seed.wrapping_add(a.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    z
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HashFunction {
    #[serde(rename = "nr")]
    n_r: usize,
    #[serde(rename = "ns")]
    n_s: usize,
    #[serde(rename = "nc")]
    n_c: usize,
    /// table[a] = (c << n_s) | k.
    table: Vec<u32>,
}

impl HashFunction {
    pub fn from_table(n_r: usize, n_s: usize, n_c: usize, table: Vec<u32>) -> Result<Self> {
        check_widths(n_r, n_s, n_c)?;
        if table.len() != 1 << n_r {
            return Err(Error::input(format!(
                "hash table has {} entries, expected {}",
                table.len(),
                1usize << n_r
            )));
        }
        let limit = 1u64 << (n_s + n_c);
        if let Some(bad) = table.iter().position(|&v| u64::from(v) >= limit) {
            return Err(Error::input(format!(
                "hash table entry {bad} = {} exceeds {} output values",
                table[bad], limit
            )));
        }
        Ok(HashFunction { n_r, n_s, n_c, table })
    }

    /// Seeded pseudorandom table realizing "pick h uniformly at random".
    pub fn from_seed(n_r: usize, n_s: usize, n_c: usize, seed: u64) -> Result<Self> {
        check_widths(n_r, n_s, n_c)?;
        let bits = n_s + n_c;
        let mask = if bits == 0 { 0 } else { u64::MAX >> (64 - bits) };
        let table = (0..1u64 << n_r).map(|a| (mix64(seed, a) & mask) as u32).collect();
        Ok(HashFunction { n_r, n_s, n_c, table })
    }

    /// h(a) = a: every raw-key bit becomes a key bit.
    pub fn identity(n_r: usize) -> Result<Self> {
        check_widths(n_r, n_r, 0)?;
        Ok(HashFunction { n_r, n_s: n_r, n_c: 0, table: (0..1u32 << n_r).collect() })
    }

    /// h(a) = 0: the whole input space is one preimage.
    pub fn constant(n_r: usize, n_s: usize, n_c: usize) -> Result<Self> {
        check_widths(n_r, n_s, n_c)?;
        Ok(HashFunction { n_r, n_s, n_c, table: vec![0; 1 << n_r] })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// Width of the concatenated (c, k) output.
    pub fn output_bits(&self) -> usize {
        self.n_s + self.n_c
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn inputs(&self) -> u64 {
        1 << self.n_r
    }

    pub fn outputs(&self) -> u32 {
        1 << (self.n_s + self.n_c)
    }

    /// Full output (c << n_s) | k.
    pub fn out_of(&self, a: u64) -> u32 {
        self.table[a as usize]
    }

    pub fn key_of(&self, a: u64) -> u32 {
        self.table[a as usize] & key_mask(self.n_s)
    }

    pub fn comm_of(&self, a: u64) -> u32 {
        self.table[a as usize] >> self.n_s
    }

    /// A_k, optionally restricted to one communication value.
    pub fn preimage(&self, k: u32, c: Option<u32>) -> Result<Vec<u64>> {
        if u64::from(k) >= 1 << self.n_s {
            return Err(Error::input(format!("key index {k} out of range")));
        }
        if let Some(c) = c {
            if u64::from(c) >= 1 << self.n_c {
                return Err(Error::input(format!("communication index {c} out of range")));
            }
        }
        Ok((0..self.inputs())
            .filter(|&a| {
                self.key_of(a) == k && c.map_or(true, |c| self.comm_of(a) == c)
            })
            .collect())
    }
}

fn check_widths(n_r: usize, n_s: usize, n_c: usize) -> Result<()> {
    if n_r == 0 || n_r > MAX_HASH_INPUT_BITS {
        return Err(Error::size_guard(format!(
            "hash input width {n_r} outside 1..={MAX_HASH_INPUT_BITS}"
        )));
    }
    if n_s + n_c > 32 {
        return Err(Error::size_guard("hash output wider than 32 bits"));
    }
    Ok(())
}

fn key_mask(n_s: usize) -> u32 {
    if n_s == 0 {
        0
    } else {
        u32::MAX >> (32 - n_s)
    }
}

/// Γ_{A_out}(entry) = Σ_{a: h(a) = out} Γ_a(entry), streamed over the table.
/// `out` indexes the concatenated (c, k) output.
pub fn gamma_ak_entry(h: &HashFunction, out: u32, entry: usize) -> Result<Scalar> {
    if h.n_r > gamma::MAX_TENSOR_PAIRS {
        return Err(Error::size_guard("input width exceeds tensor guard"));
    }
    if out >= h.outputs() {
        return Err(Error::input(format!("output index {out} out of range")));
    }
    let num = ak_numerator(h, out, entry);
    Ok(Scalar::ratio(num, 8i64.pow(h.n_r as u32)))
}

/// Integer numerator of Γ_{A_out}(entry) over 8^{n_r}.
pub(crate) fn ak_numerator(h: &HashFunction, out: u32, entry: usize) -> i64 {
    (0..h.inputs())
        .filter(|&a| h.out_of(a) == out)
        .map(|a| gamma::tensor_numerator(GammaVariant::Plain, a, h.n_r, entry))
        .sum()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Lemma2Index {
    /// Concatenated (c, k) output index.
    pub k: u32,
    pub a: u64,
    pub b: u64,
    pub x: u64,
    pub y: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma2Report {
    pub worst_ratio: Scalar,
    pub worst_index: Lemma2Index,
    pub pass: bool,
    pub mode: Mode,
}

fn scan_guards(h: &HashFunction) -> Result<()> {
    if h.n_r > MAX_SCAN_PAIRS {
        return Err(Error::size_guard(format!(
            "entry scan limited to {MAX_SCAN_PAIRS} pairs"
        )));
    }
    if h.output_bits() > MAX_SCAN_OUTPUT_BITS {
        return Err(Error::size_guard(format!(
            "entry scan limited to {MAX_SCAN_OUTPUT_BITS} output bits"
        )));
    }
    Ok(())
}

fn is_square(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Checks |2^{n_out} Γ_{A_out} − 4^{−n_r} 1s| ⪯ √2^{n_out+√n_r}·CHSH^{⊗n_r}
/// over every output and every entry, reporting the worst entry ratio.
///
/// The concatenated (c, k) output plays the role of the key index, which is
/// the reading the communication bound needs. Exact arithmetic when √n_r is
/// an integer; float with 1e-9 slack otherwise. Ties go to the first
/// maximizer in entry-major, output-minor order.
pub fn lemma2_check(h: &HashFunction) -> Result<Lemma2Report> {
    scan_guards(h)?;
    let n = h.n_r;
    let n_out = h.output_bits();
    let outs = h.outputs() as usize;
    let shape = BoxShape::binary(n);
    let total = shape.checked_len()?;
    let root = is_square(n);
    let mode = if root.is_some() { Mode::Exact } else { Mode::Float };
    // ratio(e, out) = lnum·5^{−M(e)}·√2^{−t} with lnum = |2^{n_out}·S − 2^n|
    // and t = n + n_out + √n_r. t is entry-independent, so the worst entry
    // is found by comparing lnum·5^{−M} as exact i128 cross-products in
    // either mode; only the final ratio needs √2^{−t}.
    let mut nums = vec![0i64; 1 << n];
    let mut buckets = vec![0i64; outs];
    let mut best: Option<(i64, u32)> = None;
    let mut best_at = (0usize, 0u32);
    for e in 0..total {
        let m = gamma::entry_weight(n, e);
        for (a, slot) in nums.iter_mut().enumerate() {
            *slot = gamma::tensor_numerator(GammaVariant::Plain, a as u64, n, e);
        }
        buckets.fill(0);
        for (a, &num) in nums.iter().enumerate() {
            buckets[h.table[a] as usize] += num;
        }
        for (out, &s) in buckets.iter().enumerate() {
            let lnum = ((s << n_out) - (1i64 << n)).abs();
            let improved = match best {
                None => true,
                Some((b_lnum, b_m)) => {
                    i128::from(lnum) * pow5(b_m) > i128::from(b_lnum) * pow5(m)
                }
            };
            if improved {
                best = Some((lnum, m));
                best_at = (e, out as u32);
            }
        }
    }
    let (best_lnum, best_m) = best.expect("scan visits at least one entry");
    let (worst_ratio, pass) = match root {
        Some(r) => {
            let t = (n + n_out + r) as i64;
            let ratio = Scalar::int(best_lnum)
                * Scalar::sqrt2_pow(-t)
                * Scalar::ratio(1, pow5(best_m) as i64);
            let lnum2 = i128::from(best_lnum) * i128::from(best_lnum);
            (ratio, lnum2 <= pow5(2 * best_m) << t)
        }
        None => {
            let t_real = (n + n_out) as f64 + (n as f64).sqrt();
            let ratio = best_lnum as f64
                * 5f64.powi(-(best_m as i32))
                * 2f64.powf(-t_real / 2.0);
            (Scalar::float(ratio), ratio <= 1.0 + 1e-9)
        }
    };
    let (a, b, x, y) = shape.split_binary(best_at.0);
    Ok(Lemma2Report {
        worst_ratio,
        worst_index: Lemma2Index { k: best_at.1, a, b, x, y },
        pass,
        mode,
    })
}

fn pow5(exp: u32) -> i128 {
    5i128.pow(exp)
}

/// Per-hash cache of the majorization-step weight vector
/// W(e) = Σ_out |Γ_{A_out}(e) − 2^{−n_out}·4^{−n_r}|, stored as integer
/// numerators over 2^{n_out}·8^{n_r}. Pairing W with a box vector gives the
/// middle term of the bound chain in one pass.
#[derive(Clone, Debug)]
pub struct Lemma2Table {
    n_r: usize,
    n_out: usize,
    w: Vec<i64>,
}

impl Lemma2Table {
    pub fn new(h: &HashFunction) -> Result<Self> {
        scan_guards(h)?;
        let n = h.n_r;
        let n_out = h.output_bits();
        let outs = h.outputs() as usize;
        let total = BoxShape::binary(n).checked_len()?;
        let mut nums = vec![0i64; 1 << n];
        let mut buckets = vec![0i64; outs];
        let mut w = vec![0i64; total];
        for (e, slot) in w.iter_mut().enumerate() {
            for (a, num) in nums.iter_mut().enumerate() {
                *num = gamma::tensor_numerator(GammaVariant::Plain, a as u64, n, e);
            }
            buckets.fill(0);
            for (a, &num) in nums.iter().enumerate() {
                buckets[h.table[a] as usize] += num;
            }
            *slot = buckets
                .iter()
                .map(|&s| ((s << n_out) - (1i64 << n)).abs())
                .sum();
        }
        Ok(Lemma2Table { n_r: h.n_r, n_out, w })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// ⟨W, P⟩ over a box-entry vector, in the vector's mode.
    pub fn pair_with(&self, entries: &[Scalar], mode: Mode) -> Scalar {
        debug_assert_eq!(entries.len(), self.w.len());
        match mode {
            Mode::Exact => {
                let mut acc = Scalar::zero();
                for (num, p) in self.w.iter().zip(entries) {
                    if *num != 0 && !p.is_zero() {
                        acc = acc + Scalar::int(*num) * p.clone();
                    }
                }
                acc * self.denominator_inv()
            }
            Mode::Float => {
                let total = crate::sum::sum_indexed(entries.len(), |e| {
                    self.w[e] as f64 * entries[e].to_f64()
                });
                Scalar::float(total / (8f64.powi(self.n_r as i32) * 2f64.powi(self.n_out as i32)))
            }
        }
    }

    fn denominator_inv(&self) -> Scalar {
        Scalar::ratio(1, 8i64.pow(self.n_r as u32) * (1i64 << self.n_out))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MuSums {
    pub sum_mu: Scalar,
    pub sum_mu_sq: Scalar,
    pub max_abs_mu: Scalar,
    pub m: u32,
}

/// Streams μ_a = Γ_a(entry) over all outcome strings for the entry fixed by
/// the bit-strings (a⃗₀, b⃗₀, x⃗₀, y⃗₀).
pub fn mu_sums(pairs: usize, a0: u64, b0: u64, x0: u64, y0: u64) -> Result<MuSums> {
    if pairs == 0 || pairs > MAX_SCAN_PAIRS {
        return Err(Error::size_guard(format!(
            "mu scan limited to {MAX_SCAN_PAIRS} pairs"
        )));
    }
    for (name, s) in [("a", a0), ("b", b0), ("x", x0), ("y", y0)] {
        if s >> pairs != 0 {
            return Err(Error::input(format!("bit-string {name} longer than {pairs} pairs")));
        }
    }
    let shape = BoxShape::binary(pairs);
    let entry = shape.index_binary(a0, b0, x0, y0);
    let m = (a0 ^ b0 ^ (x0 & y0)).count_ones();
    let mut sum = 0i64;
    let mut sum_sq = 0i64;
    let mut max_abs = 0i64;
    for a in 0..(1u64 << pairs) {
        let num = gamma::tensor_numerator(GammaVariant::Plain, a, pairs, entry);
        sum += num;
        sum_sq += num * num;
        max_abs = max_abs.max(num.abs());
    }
    let den = 8i64.pow(pairs as u32);
    Ok(MuSums {
        sum_mu: Scalar::ratio(sum, den),
        sum_mu_sq: Scalar::ratio(sum_sq, den * den),
        max_abs_mu: Scalar::ratio(max_abs, den),
        m,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BernsteinQuantities {
    pub j: f64,
    pub beta: f64,
    pub tail: f64,
    /// β·5^M·8^{−n_r} ≤ 1, equivalently n_s ≤ n_r − √n_r.
    pub beta_constraint_ok: bool,
}

/// The concentration-inequality ingredients behind "almost all hashes pass":
/// the deviation scale J, the tilt β, and the per-pair tail e^{−2^{√n_r}/4}.
pub fn bernstein_quantities(n_r: usize, n_s: usize, m: u32) -> BernsteinQuantities {
    let nr = n_r as f64;
    let ns = n_s as f64;
    let root = nr.sqrt();
    let mf = m as i32;
    let j = 2f64.powf(-ns - 2.0 * nr)
        + 2f64.powf((root - nr - ns) / 2.0) * 4f64.powf(-nr) * 5f64.powi(mf);
    let beta = 2f64.powf((root + nr + ns) / 2.0) * 4f64.powf(nr) * 5f64.powi(-mf);
    let tail = (-(2f64.powf(root)) / 4.0).exp();
    // β·5^M·8^{−n_r} = 2^{(√n_r+n_s−n_r)/2}; exact when n_r is a square.
    let ok = match is_square(n_r) {
        Some(r) => r + n_s <= n_r,
        None => root + ns <= nr + 1e-12,
    };
    BernsteinQuantities { j, beta, tail, beta_constraint_ok: ok }
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureBound {
    pub value: f64,
    /// A probability bound ≥ 1 says nothing.
    pub vacuous: bool,
}

/// Union bound on the probability that a uniformly random hash fails the
/// entry-wise inequality: 2·exp(5n_r − 2^{√n_r}/4). The n_s dependence is
/// already absorbed (valid for n_s ≤ n_r).
pub fn hash_failure_bound(n_r: usize, n_s: usize) -> FailureBound {
    debug_assert!(n_s <= n_r);
    let nr = n_r as f64;
    let value = 2.0 * (5.0 * nr - 2f64.powf(nr.sqrt()) / 4.0).exp();
    FailureBound { value, vacuous: !(value < 1.0) }
}

/// Smallest n_r whose failure bound is meaningful (< 1).
pub fn hash_failure_crossover() -> usize {
    (1..)
        .find(|&n_r| !hash_failure_bound(n_r, 0).vacuous)
        .expect("bound eventually drops below 1")
}
