//! Conditional-probability boxes and the binary nonsignaling polytope.
//!
//! A box is a table P(a,b|x,y) for one or more pairs of systems. The flat
//! index convention is normative for every file format and printed table:
//! single-pair index ((x*settings_b + y)*outcomes_a + a)*outcomes_b + b,
//! multi-pair indices concatenate per-pair indices with the first pair most
//! significant. Bit-strings follow the same order: the first pair sits in
//! the most significant bit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};

/// Entry-count guard: tables above this are refused at construction.
const MAX_ENTRIES: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxShape {
    pub pairs: usize,
    pub outcomes_a: usize,
    pub outcomes_b: usize,
    pub settings_a: usize,
    pub settings_b: usize,
}

impl BoxShape {
    pub fn new(
        pairs: usize,
        outcomes_a: usize,
        outcomes_b: usize,
        settings_a: usize,
        settings_b: usize,
    ) -> Result<Self> {
        let shape = BoxShape { pairs, outcomes_a, outcomes_b, settings_a, settings_b };
        shape.check()?;
        Ok(shape)
    }

    pub fn binary(pairs: usize) -> Self {
        BoxShape { pairs, outcomes_a: 2, outcomes_b: 2, settings_a: 2, settings_b: 2 }
    }

    pub fn chained(pairs: usize, m: usize) -> Self {
        BoxShape { pairs, outcomes_a: 2, outcomes_b: 2, settings_a: m, settings_b: m }
    }

    pub fn check(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::input("pairs must be >= 1"));
        }
        for (name, v) in [
            ("outcomes_a", self.outcomes_a),
            ("outcomes_b", self.outcomes_b),
            ("settings_a", self.settings_a),
            ("settings_b", self.settings_b),
        ] {
            if v == 0 {
                return Err(Error::input(format!("{name} must be >= 1")));
            }
        }
        self.checked_len()?;
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        self.outcomes_a == 2 && self.outcomes_b == 2 && self.settings_a == 2 && self.settings_b == 2
    }

    /// Entries of one pair block: outcomes_a*outcomes_b*settings_a*settings_b.
    pub fn pair_block(&self) -> usize {
        self.outcomes_a * self.outcomes_b * self.settings_a * self.settings_b
    }

    pub fn checked_len(&self) -> Result<usize> {
        let block = self.pair_block();
        let mut len = 1usize;
        for _ in 0..self.pairs {
            len = len
                .checked_mul(block)
                .filter(|l| *l <= MAX_ENTRIES)
                .ok_or_else(|| Error::size_guard(format!("{} pairs of block {}", self.pairs, block)))?;
        }
        Ok(len)
    }

    pub fn len(&self) -> usize {
        self.checked_len().expect("shape checked at construction")
    }

    pub fn settings_blocks(&self) -> usize {
        let per_pair = self.settings_a * self.settings_b;
        per_pair.pow(self.pairs as u32)
    }

    pub fn outcome_combos(&self) -> usize {
        let per_pair = self.outcomes_a * self.outcomes_b;
        per_pair.pow(self.pairs as u32)
    }

    /// Normative single-pair index.
    pub fn single_index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        debug_assert!(x < self.settings_a && y < self.settings_b);
        debug_assert!(a < self.outcomes_a && b < self.outcomes_b);
        ((x * self.settings_b + y) * self.outcomes_a + a) * self.outcomes_b + b
    }

    /// Combines per-pair indices, first pair most significant.
    pub fn flat_from_pair_indices(&self, parts: &[usize]) -> usize {
        debug_assert_eq!(parts.len(), self.pairs);
        let block = self.pair_block();
        parts.iter().fold(0, |acc, &p| {
            debug_assert!(p < block);
            acc * block + p
        })
    }

    pub fn pair_index_of(&self, flat: usize, pair: usize) -> usize {
        let block = self.pair_block();
        let shift = self.pairs - 1 - pair;
        (flat / block.pow(shift as u32)) % block
    }

    /// Decomposes a single-pair index into (x, y, a, b).
    pub fn split_single(&self, idx: usize) -> (usize, usize, usize, usize) {
        let b = idx % self.outcomes_b;
        let rest = idx / self.outcomes_b;
        let a = rest % self.outcomes_a;
        let rest = rest / self.outcomes_a;
        let y = rest % self.settings_b;
        let x = rest / self.settings_b;
        (x, y, a, b)
    }

    /// Flat index from bit-strings (binary shapes), first pair in the most
    /// significant bit of each string.
    pub fn index_binary(&self, a: u64, b: u64, x: u64, y: u64) -> usize {
        debug_assert!(self.is_binary());
        let n = self.pairs;
        let mut flat = 0usize;
        for i in 0..n {
            let s = n - 1 - i;
            let (ai, bi, xi, yi) =
                ((a >> s) & 1, (b >> s) & 1, (x >> s) & 1, (y >> s) & 1);
            flat = flat * 16 + ((xi << 3) | (yi << 2) | (ai << 1) | bi) as usize;
        }
        flat
    }

    /// Inverse of `index_binary`: recovers (a, b, x, y) bit-strings.
    pub fn split_binary(&self, flat: usize) -> (u64, u64, u64, u64) {
        debug_assert!(self.is_binary());
        let (mut a, mut b, mut x, mut y) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..self.pairs {
            let nib = self.pair_index_of(flat, i) as u64;
            x = (x << 1) | (nib >> 3);
            y = (y << 1) | ((nib >> 2) & 1);
            a = (a << 1) | ((nib >> 1) & 1);
            b = (b << 1) | (nib & 1);
        }
        (a, b, x, y)
    }

    fn describe_pair_index(&self, idx: usize) -> String {
        let (x, y, a, b) = self.split_single(idx);
        format!("x={x},y={y},a={a},b={b}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Negative,
    Normalization,
    SignalingAlice,
    SignalingBob,
    SignalingEve,
}

/// One structural defect of a table, with its exact or float magnitude.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub context: String,
    pub magnitude: Scalar,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: magnitude {}", self.kind, self.context, self.magnitude)
    }
}

pub fn worst_violation(violations: &[Violation]) -> Option<&Violation> {
    violations.iter().max_by(|a, b| {
        a.magnitude
            .partial_cmp(&b.magnitude)
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// True when every violation magnitude is within `tol` (exact magnitudes
/// compare exactly when `tol` is 0).
pub fn within_tolerance(violations: &[Violation], tol: f64) -> bool {
    violations.iter().all(|v| v.magnitude.abs().to_f64() <= tol)
}

#[derive(Clone, Debug)]
pub struct BoxTable {
    shape: BoxShape,
    entries: Vec<Scalar>,
}

impl BoxTable {
    pub fn new(shape: BoxShape, entries: Vec<Scalar>) -> Result<Self> {
        shape.check()?;
        let want = shape.checked_len()?;
        if entries.len() != want {
            return Err(Error::input(format!(
                "entry count {} does not match shape ({} expected)",
                entries.len(),
                want
            )));
        }
        Ok(BoxTable { shape, entries })
    }

    pub fn shape(&self) -> &BoxShape {
        &self.shape
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    pub fn entry(&self, flat: usize) -> &Scalar {
        &self.entries[flat]
    }

    pub fn get_binary(&self, a: u64, b: u64, x: u64, y: u64) -> &Scalar {
        &self.entries[self.shape.index_binary(a, b, x, y)]
    }

    /// EXACT iff every entry is exact.
    pub fn mode(&self) -> Mode {
        if self.entries.iter().all(Scalar::is_exact) {
            Mode::Exact
        } else {
            Mode::Float
        }
    }

    pub fn to_float(&self) -> BoxTable {
        BoxTable {
            shape: self.shape.clone(),
            entries: self.entries.iter().map(Scalar::to_float).collect(),
        }
    }

    fn settings_id_of_pair_index(&self, idx: usize) -> usize {
        idx / (self.shape.outcomes_a * self.shape.outcomes_b)
    }

    fn settings_id(&self, flat: usize) -> usize {
        let per_pair = self.shape.settings_a * self.shape.settings_b;
        let mut id = 0;
        for pair in 0..self.shape.pairs {
            id = id * per_pair + self.settings_id_of_pair_index(self.shape.pair_index_of(flat, pair));
        }
        id
    }

    /// Negativity and per-settings-block normalization defects.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (flat, e) in self.entries.iter().enumerate() {
            if e.signum() == std::cmp::Ordering::Less {
                out.push(Violation {
                    kind: ViolationKind::Negative,
                    context: self.describe_flat(flat),
                    magnitude: e.abs(),
                });
            }
        }
        let blocks = self.shape.settings_blocks();
        let mut sums = vec![Scalar::zero(); blocks];
        for (flat, e) in self.entries.iter().enumerate() {
            let id = self.settings_id(flat);
            sums[id] = sums[id].clone() + e.clone();
        }
        for (id, sum) in sums.into_iter().enumerate() {
            let defect = sum - Scalar::one();
            if !defect.is_zero() {
                out.push(Violation {
                    kind: ViolationKind::Normalization,
                    context: format!("settings block {id}"),
                    magnitude: defect.abs(),
                });
            }
        }
        out
    }

    /// Per-party no-signaling defects: for each pair, summing out that
    /// pair's Alice (Bob) outcome must be independent of that pair's x (y),
    /// holding every other index fixed.
    pub fn signaling_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let shape = &self.shape;
        let block = shape.pair_block();
        let n = shape.pairs;
        let (oa, ob, sa, sb) = (shape.outcomes_a, shape.outcomes_b, shape.settings_a, shape.settings_b);

        // Iterate contexts as (prefix pairs, suffix pairs, inner-pair frame).
        for pair in 0..n {
            let hi = block.pow((n - 1 - pair) as u32);
            let lo_count = block.pow(pair as u32);
            for lo in 0..lo_count {
                for rest in 0..hi {
                    // Alice on this pair: sum over a, compare across x.
                    for y in 0..sb {
                        for b in 0..ob {
                            let mut reference: Option<Scalar> = None;
                            for x in 0..sa {
                                let mut sum = Scalar::zero();
                                for a in 0..oa {
                                    let idx = shape.single_index(x, y, a, b);
                                    let flat = (lo * block + idx) * hi + rest;
                                    sum = sum + self.entries[flat].clone();
                                }
                                match &reference {
                                    None => reference = Some(sum),
                                    Some(r) => {
                                        let defect = sum - r.clone();
                                        if !defect.is_zero() {
                                            out.push(Violation {
                                                kind: ViolationKind::SignalingAlice,
                                                context: format!("pair {pair}, y={y}, b={b}, x={x} vs x=0"),
                                                magnitude: defect.abs(),
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                    // Bob on this pair: sum over b, compare across y.
                    for x in 0..sa {
                        for a in 0..oa {
                            let mut reference: Option<Scalar> = None;
                            for y in 0..sb {
                                let mut sum = Scalar::zero();
                                for b in 0..ob {
                                    let idx = shape.single_index(x, y, a, b);
                                    let flat = (lo * block + idx) * hi + rest;
                                    sum = sum + self.entries[flat].clone();
                                }
                                match &reference {
                                    None => reference = Some(sum),
                                    Some(r) => {
                                        let defect = sum - r.clone();
                                        if !defect.is_zero() {
                                            out.push(Violation {
                                                kind: ViolationKind::SignalingBob,
                                                context: format!("pair {pair}, x={x}, a={a}, y={y} vs y=0"),
                                                magnitude: defect.abs(),
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        within_tolerance(&self.violations(), tol)
    }

    pub fn is_nonsignaling(&self, tol: f64) -> bool {
        within_tolerance(&self.signaling_violations(), tol)
    }

    /// P(a⃗|x⃗=0), computed directly from the table at y⃗ = 0 (binary shapes).
    pub fn marginal_a_at_zero(&self, a: u64) -> Scalar {
        debug_assert!(self.shape.is_binary());
        let n = self.shape.pairs;
        let mut sum = Scalar::zero();
        for b in 0..(1u64 << n) {
            sum = sum + self.get_binary(a, b, 0, 0).clone();
        }
        sum
    }

    fn describe_flat(&self, flat: usize) -> String {
        let parts: Vec<String> = (0..self.shape.pairs)
            .map(|p| self.shape.describe_pair_index(self.shape.pair_index_of(flat, p)))
            .collect();
        format!("({})", parts.join("; "))
    }
}

/// Entry-wise product box; pair order is the concatenation of the factors.
pub fn tensor(factors: &[BoxTable]) -> Result<BoxTable> {
    let first = factors.first().ok_or_else(|| Error::input("tensor of zero boxes"))?;
    let per = &first.shape;
    let mut pairs = 0usize;
    for f in factors {
        let s = &f.shape;
        if (s.outcomes_a, s.outcomes_b, s.settings_a, s.settings_b)
            != (per.outcomes_a, per.outcomes_b, per.settings_a, per.settings_b)
        {
            return Err(Error::input("tensor factors must share per-pair dimensions"));
        }
        pairs += s.pairs;
    }
    let shape = BoxShape::new(pairs, per.outcomes_a, per.outcomes_b, per.settings_a, per.settings_b)?;
    let mut entries = vec![Scalar::one()];
    for f in factors {
        let mut next = Vec::with_capacity(entries.len() * f.entries.len());
        for left in &entries {
            for right in &f.entries {
                next.push(left.clone() * right.clone());
            }
        }
        entries = next;
    }
    BoxTable::new(shape, entries)
}

/// Entry-wise convex combination.
pub fn mix(tables: &[BoxTable], weights: &[Scalar]) -> Result<BoxTable> {
    if tables.is_empty() || tables.len() != weights.len() {
        return Err(Error::input("mix needs equally many tables and weights"));
    }
    let shape = tables[0].shape.clone();
    for t in tables {
        if t.shape != shape {
            return Err(Error::input("mix requires identical shapes"));
        }
    }
    let mut total = Scalar::zero();
    for w in weights {
        if w.signum() == std::cmp::Ordering::Less {
            return Err(Error::input("mix weights must be nonnegative"));
        }
        total = total + w.clone();
    }
    let deviation = (total - Scalar::one()).abs().to_f64();
    if deviation > 1e-12 {
        return Err(Error::input(format!("mix weights sum off by {deviation:e}")));
    }
    let len = shape.len();
    let mut entries = vec![Scalar::zero(); len];
    for (t, w) in tables.iter().zip(weights) {
        for (e, src) in entries.iter_mut().zip(&t.entries) {
            *e = e.clone() + w.clone() * src.clone();
        }
    }
    BoxTable::new(shape, entries)
}

/// PR-box family: a ⊕ b = x·y ⊕ alpha·x ⊕ beta·y ⊕ gamma, uniform marginals.
pub fn pr_variant(alpha: u8, beta: u8, gamma: u8) -> BoxTable {
    let shape = BoxShape::binary(1);
    let mut entries = vec![Scalar::zero(); 16];
    for x in 0..2u8 {
        for y in 0..2u8 {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let target = (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma;
                    if a ^ b == target {
                        entries[shape.single_index(x as usize, y as usize, a as usize, b as usize)] =
                            Scalar::ratio(1, 2);
                    }
                }
            }
        }
    }
    BoxTable::new(shape, entries).expect("static shape")
}

/// The canonical PR box: a ⊕ b = x·y.
pub fn pr_box() -> BoxTable {
    pr_variant(0, 0, 0)
}

/// a ⊕ b = x·y ⊕ 1.
pub fn anti_pr_box() -> BoxTable {
    pr_variant(0, 0, 1)
}

pub fn uniform_box(shape: BoxShape) -> Result<BoxTable> {
    shape.check()?;
    let per_block = (shape.outcomes_a * shape.outcomes_b) as i64;
    let w = Scalar::ratio(1, per_block.pow(shape.pairs as u32));
    let len = shape.checked_len()?;
    BoxTable::new(shape, vec![w; len])
}

/// Single-pair deterministic box: a = a_map[x], b = b_map[y].
pub fn deterministic_box(shape: BoxShape, a_map: &[usize], b_map: &[usize]) -> Result<BoxTable> {
    if shape.pairs != 1 {
        return Err(Error::input("deterministic_box builds single-pair boxes; tensor for more"));
    }
    if a_map.len() != shape.settings_a || b_map.len() != shape.settings_b {
        return Err(Error::input("outcome map lengths must match settings"));
    }
    let mut entries = vec![Scalar::zero(); shape.len()];
    for x in 0..shape.settings_a {
        for y in 0..shape.settings_b {
            let (a, b) = (a_map[x], b_map[y]);
            if a >= shape.outcomes_a || b >= shape.outcomes_b {
                return Err(Error::input("outcome map value out of range"));
            }
            entries[shape.single_index(x, y, a, b)] = Scalar::one();
        }
    }
    BoxTable::new(shape, entries)
}

/// Binary deterministic box from packed strategy bits: a(x) = bit x of
/// `aa`, b(y) = bit y of `bb`.
pub fn deterministic_binary(aa: u8, bb: u8) -> BoxTable {
    let a_map = [(aa & 1) as usize, ((aa >> 1) & 1) as usize];
    let b_map = [(bb & 1) as usize, ((bb >> 1) & 1) as usize];
    deterministic_box(BoxShape::binary(1), &a_map, &b_map).expect("static shape")
}

/// Signaling fixture: Alice's outcome copies Bob's setting, P(a,b|x,y) =
/// δ_{a,y}/2. Valid as a distribution, signaling on Alice's marginal.
pub fn signaling_fixture() -> BoxTable {
    let shape = BoxShape::binary(1);
    let mut entries = vec![Scalar::zero(); 16];
    for x in 0..2 {
        for y in 0..2 {
            for b in 0..2 {
                entries[shape.single_index(x, y, y, b)] = Scalar::ratio(1, 2);
            }
        }
    }
    BoxTable::new(shape, entries).expect("static shape")
}

/// The 24 extreme points of the single-pair binary nonsignaling polytope:
/// 16 deterministic strategies, then the 8 PR variants indexed by
/// (alpha, beta, gamma) bits.
pub fn ns_vertices_binary() -> Vec<BoxTable> {
    let mut out = Vec::with_capacity(24);
    for aa in 0..4u8 {
        for bb in 0..4u8 {
            out.push(deterministic_binary(aa, bb));
        }
    }
    for v in 0..8u8 {
        out.push(pr_variant((v >> 2) & 1, (v >> 1) & 1, v & 1));
    }
    out
}

/// A deterministic strategy on the binary single-pair scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DetStrategy {
    /// bit x of `aa` is Alice's outcome on setting x
    pub aa: u8,
    /// bit y of `bb` is Bob's outcome on setting y
    pub bb: u8,
}

impl DetStrategy {
    pub fn to_box(self) -> BoxTable {
        deterministic_binary(self.aa, self.bb)
    }
}

/// A convex decomposition over deterministic strategies witnessing locality.
#[derive(Clone, Debug, Serialize)]
pub struct LocalModel {
    pub weights: Vec<(DetStrategy, Scalar)>,
}

impl LocalModel {
    pub fn to_box(&self) -> Result<BoxTable> {
        let tables: Vec<BoxTable> = self.weights.iter().map(|(d, _)| d.to_box()).collect();
        let weights: Vec<Scalar> = self.weights.iter().map(|(_, w)| w.clone()).collect();
        mix(&tables, &weights)
    }
}

#[derive(Clone, Debug)]
pub struct LocalityResult {
    pub local: bool,
    pub model: Option<LocalModel>,
}

/// Value of the CHSH-family functional indexed by (alpha, beta, gamma):
/// entry 2^{-5/2} * 5^{[a⊕b ≠ x·y⊕alpha·x⊕beta·y⊕gamma]}. Internal float
/// form used only for the locality fast-reject; the bell module owns the
/// public exact functionals.
fn chsh_variant_value_f64(table: &BoxTable, alpha: u8, beta: u8, gamma: u8) -> f64 {
    let shape = table.shape();
    let mut total = 0.0;
    for x in 0..2u8 {
        for y in 0..2u8 {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let target = (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma;
                    let coef = if a ^ b == target { 1.0 } else { 5.0 };
                    let idx = shape.single_index(x as usize, y as usize, a as usize, b as usize);
                    total += coef * table.entry(idx).to_f64();
                }
            }
        }
    }
    total / (4.0 * std::f64::consts::SQRT_2)
}

/// Locality decision for valid nonsignaling single-pair binary boxes.
///
/// Fast reject: a value below sqrt2 on any of the 8 CHSH relabelings is a
/// sound nonlocality proof (every deterministic strategy scores >= sqrt2 on
/// each of them). Certification: exhaustive support search over the 16
/// deterministic strategies; a feasible decomposition, if one exists, is
/// supported on a linearly independent subset, and every deterministic box
/// lies on the normalization hyperplane, so supports of size <= 9 with full
/// column rank suffice. Exact entries are required for certification.
pub fn is_local(table: &BoxTable) -> Result<LocalityResult> {
    let shape = table.shape();
    if shape.pairs != 1 || !shape.is_binary() {
        return Err(Error::unsupported(format!(
            "locality decision covers binary single-pair boxes; got {} pairs, {}x{} settings",
            shape.pairs, shape.settings_a, shape.settings_b
        )));
    }

    const SQRT_2: f64 = std::f64::consts::SQRT_2;
    for v in 0..8u8 {
        let value = chsh_variant_value_f64(table, (v >> 2) & 1, (v >> 1) & 1, v & 1);
        if value < SQRT_2 - 1e-9 {
            return Ok(LocalityResult { local: false, model: None });
        }
    }

    if table.mode() != Mode::Exact {
        return Err(Error::unsupported(
            "locality certification needs exact entries; float box was not rejected by the CHSH tests".to_string(),
        ));
    }
    if !table.violations().is_empty() || !table.signaling_violations().is_empty() {
        return Err(Error::distribution(
            "locality decision requires a valid nonsignaling box".to_string(),
        ));
    }

    // Candidate strategies must have support inside the box's support.
    let strategies: Vec<DetStrategy> = (0..16u8)
        .map(|d| DetStrategy { aa: d >> 2, bb: d & 3 })
        .filter(|d| {
            let db = d.to_box();
            (0..16).all(|i| db.entry(i).is_zero() || !table.entry(i).is_zero())
        })
        .collect();

    for size in 1..=9.min(strategies.len()) {
        let mut pick = vec![0usize; size];
        if let Some(model) = search_supports(table, &strategies, &mut pick, 0, 0, size) {
            return Ok(LocalityResult { local: true, model: Some(model) });
        }
    }
    Ok(LocalityResult { local: false, model: None })
}

fn search_supports(
    table: &BoxTable,
    strategies: &[DetStrategy],
    pick: &mut [usize],
    depth: usize,
    start: usize,
    size: usize,
) -> Option<LocalModel> {
    if depth == size {
        return solve_support(table, strategies, pick);
    }
    for i in start..strategies.len() {
        pick[depth] = i;
        if let Some(m) = search_supports(table, strategies, pick, depth + 1, i + 1, size) {
            return Some(m);
        }
    }
    None
}

/// Solves sum_d w_d P_d = P exactly on the chosen support; accepts only
/// full-column-rank supports with all w_d >= 0 and zero residual.
fn solve_support(table: &BoxTable, strategies: &[DetStrategy], pick: &[usize]) -> Option<LocalModel> {
    use num_rational::BigRational;
    use num_traits::Zero;

    let k = pick.len();
    // Columns: 0/1 entries of the chosen deterministic boxes.
    let mut cols: Vec<Vec<i8>> = Vec::with_capacity(k);
    for &i in pick {
        let db = strategies[i].to_box();
        cols.push((0..16).map(|e| if db.entry(e).is_zero() { 0 } else { 1 }).collect());
    }
    let rhs: Vec<BigRational> = (0..16)
        .map(|e| table.entry(e).as_exact().expect("exact checked").rational_part().clone())
        .collect();

    // Gaussian elimination on the 16 x k system.
    let mut mat: Vec<Vec<BigRational>> = (0..16)
        .map(|r| (0..k).map(|c| BigRational::from_integer(cols[c][r].into())).collect())
        .collect();
    let mut b = rhs;
    let mut pivot_rows = Vec::with_capacity(k);
    let mut row_used = [false; 16];
    for col in 0..k {
        let Some(pr) = (0..16).find(|&r| !row_used[r] && !mat[r][col].is_zero()) else {
            return None; // rank-deficient support; a smaller support covers it
        };
        row_used[pr] = true;
        pivot_rows.push(pr);
        let inv = mat[pr][col].recip();
        for c in col..k {
            let v = &mat[pr][c] * &inv;
            mat[pr][c] = v;
        }
        let bp = &b[pr] * &inv;
        b[pr] = bp;
        for r in 0..16 {
            if r != pr && !mat[r][col].is_zero() {
                let f = mat[r][col].clone();
                for c in col..k {
                    let v = &mat[r][c] - &f * &mat[pr][c];
                    mat[r][c] = v;
                }
                let v = &b[r] - &f * &b[pr];
                b[r] = v;
            }
        }
    }
    // Non-pivot rows must have zero residual.
    for r in 0..16 {
        if !row_used[r] && !b[r].is_zero() {
            return None;
        }
    }
    let mut weights = Vec::with_capacity(k);
    for (col, &pr) in pivot_rows.iter().enumerate() {
        let w = b[pr].clone();
        if w < BigRational::zero() {
            return None;
        }
        weights.push((strategies[pick[col]], Scalar::from_rational(w)));
    }
    Some(LocalModel { weights })
}
