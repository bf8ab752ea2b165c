//! Composable security of the hashed key: distinguishing advantage against
//! an ideal key, the main and communication bounds, smoothing, and rates.

use serde::Serialize;

use crate::bell;
use crate::boxes::{within_tolerance, BoxShape, BoxTable, Violation, ViolationKind};
use crate::error::{Error, Result};
use crate::hashing::HashFunction;
use crate::scalar::{Mode, Scalar};

/// P(a⃗, b⃗, e | x⃗, y⃗, z) over n_r binary pairs plus Eve. The flat layout
/// appends Eve to the pair-concatenated box index: ((pair-flat)·Z + z)·E + e.
#[derive(Clone, Debug)]
pub struct JointDistribution {
    shape: BoxShape,
    eve_outcomes: usize,
    eve_settings: usize,
    entries: Vec<Scalar>,
}

impl JointDistribution {
    pub fn new(
        shape: BoxShape,
        eve_outcomes: usize,
        eve_settings: usize,
        entries: Vec<Scalar>,
    ) -> Result<Self> {
        shape.check()?;
        if eve_outcomes == 0 || eve_settings == 0 {
            return Err(Error::input("Eve needs at least one outcome and one setting"));
        }
        let expect = shape
            .checked_len()?
            .checked_mul(eve_outcomes * eve_settings)
            .ok_or_else(|| Error::size_guard("joint table too large"))?;
        if entries.len() != expect {
            return Err(Error::input(format!(
                "joint table has {} entries, expected {expect}",
                entries.len()
            )));
        }
        Ok(JointDistribution { shape, eve_outcomes, eve_settings, entries })
    }

    pub fn shape(&self) -> &BoxShape {
        &self.shape
    }

    pub fn eve_outcomes(&self) -> usize {
        self.eve_outcomes
    }

    pub fn eve_settings(&self) -> usize {
        self.eve_settings
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    pub fn index(&self, flat: usize, z: usize, e: usize) -> usize {
        debug_assert!(z < self.eve_settings && e < self.eve_outcomes);
        (flat * self.eve_settings + z) * self.eve_outcomes + e
    }

    pub fn entry(&self, flat: usize, z: usize, e: usize) -> &Scalar {
        &self.entries[self.index(flat, z, e)]
    }

    pub fn mode(&self) -> Mode {
        if self.entries.iter().all(Scalar::is_exact) {
            Mode::Exact
        } else {
            Mode::Float
        }
    }

    /// Negativity and per-(x⃗, y⃗, z) normalization defects.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, v) in self.entries.iter().enumerate() {
            if v.signum() == std::cmp::Ordering::Less {
                out.push(Violation {
                    kind: ViolationKind::Negative,
                    context: format!("joint entry {i}"),
                    magnitude: v.abs(),
                });
            }
        }
        let blocks = self.shape.settings_blocks();
        let mut sums = vec![Scalar::zero(); blocks * self.eve_settings];
        for flat in 0..self.shape.len() {
            let sid = self.settings_id(flat);
            for z in 0..self.eve_settings {
                for e in 0..self.eve_outcomes {
                    let slot = sid * self.eve_settings + z;
                    sums[slot] = sums[slot].clone() + self.entry(flat, z, e).clone();
                }
            }
        }
        for (slot, sum) in sums.into_iter().enumerate() {
            let defect = sum - Scalar::one();
            if !defect.is_zero() {
                out.push(Violation {
                    kind: ViolationKind::Normalization,
                    context: format!(
                        "settings block {}, z={}",
                        slot / self.eve_settings,
                        slot % self.eve_settings
                    ),
                    magnitude: defect.abs(),
                });
            }
        }
        out
    }

    fn settings_id(&self, flat: usize) -> usize {
        let per_pair = self.shape.settings_a * self.shape.settings_b;
        let ob = self.shape.outcomes_a * self.shape.outcomes_b;
        let mut id = 0;
        for pair in 0..self.shape.pairs {
            id = id * per_pair + self.shape.pair_index_of(flat, pair) / ob;
        }
        id
    }

    /// (n_r+2)-partite no-signaling defects: Eve's outcome marginal must not
    /// depend on z, the (a⃗, e) marginal must not depend on y⃗ (Bob is one
    /// system), and each pair's Alice marginal must not depend on that
    /// pair's x. No-signaling within Bob's systems is not required.
    pub fn signaling_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let shape = &self.shape;
        let n = shape.pairs;
        let (oa, ob, sa, sb) = (
            shape.outcomes_a,
            shape.outcomes_b,
            shape.settings_a,
            shape.settings_b,
        );

        // (i) Sum over e is the same for every z.
        if self.eve_settings > 1 {
            for flat in 0..shape.len() {
                let sum_at = |z: usize| {
                    let mut s = Scalar::zero();
                    for e in 0..self.eve_outcomes {
                        s = s + self.entry(flat, z, e).clone();
                    }
                    s
                };
                let base = sum_at(0);
                for z in 1..self.eve_settings {
                    let defect = sum_at(z) - base.clone();
                    if !defect.is_zero() {
                        out.push(Violation {
                            kind: ViolationKind::SignalingEve,
                            context: format!("box entry {flat}, z={z} vs z=0"),
                            magnitude: defect.abs(),
                        });
                    }
                }
            }
        }

        // (ii) Bob as one system: fix a⃗, x⃗, e, z; the sum over b⃗ must be
        // the same for every y⃗.
        for z in 0..self.eve_settings {
            for e in 0..self.eve_outcomes {
                for a in 0..combos(oa, n) {
                    for x in 0..combos(sa, n) {
                        let sum_at = |y: usize| {
                            let mut s = Scalar::zero();
                            for b in 0..combos(ob, n) {
                                let flat = self.flat_from_parts(a, b, x, y);
                                s = s + self.entry(flat, z, e).clone();
                            }
                            s
                        };
                        let base = sum_at(0);
                        for y in 1..combos(sb, n) {
                            let defect = sum_at(y) - base.clone();
                            if !defect.is_zero() {
                                out.push(Violation {
                                    kind: ViolationKind::SignalingBob,
                                    context: format!(
                                        "a-combo {a}, x-combo {x}, e={e}, z={z}, y-combo {y}"
                                    ),
                                    magnitude: defect.abs(),
                                });
                            }
                        }
                    }
                }
            }
        }

        // (iii) Each Alice pair separately: fix everything else; the sum
        // over a_i must be the same for both values of x_i.
        let block = shape.pair_block();
        for pair in 0..n {
            let hi = block.pow((n - 1 - pair) as u32);
            let lo_count = block.pow(pair as u32);
            for lo in 0..lo_count {
                for rest in 0..hi {
                    for y in 0..sb {
                        for b in 0..ob {
                            for z in 0..self.eve_settings {
                                for e in 0..self.eve_outcomes {
                                    let sum_at = |x: usize| {
                                        let mut s = Scalar::zero();
                                        for a in 0..oa {
                                            let idx = shape.single_index(x, y, a, b);
                                            let flat = (lo * block + idx) * hi + rest;
                                            s = s + self.entry(flat, z, e).clone();
                                        }
                                        s
                                    };
                                    let base = sum_at(0);
                                    for x in 1..sa {
                                        let defect = sum_at(x) - base.clone();
                                        if !defect.is_zero() {
                                            out.push(Violation {
                                                kind: ViolationKind::SignalingAlice,
                                                context: format!(
                                                    "pair {pair}, y={y}, b={b}, e={e}, z={z}, x={x}"
                                                ),
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

    pub fn is_nonsignaling(&self, tol: f64) -> bool {
        within_tolerance(&self.signaling_violations(), tol)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        within_tolerance(&self.violations(), tol)
    }

    fn flat_from_parts(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let shape = &self.shape;
        let n = shape.pairs;
        let mut parts = Vec::with_capacity(n);
        for i in 0..n {
            let shift = n - 1 - i;
            let ai = digit(a, shift, shape.outcomes_a);
            let bi = digit(b, shift, shape.outcomes_b);
            let xi = digit(x, shift, shape.settings_a);
            let yi = digit(y, shift, shape.settings_b);
            parts.push(shape.single_index(xi, yi, ai, bi));
        }
        shape.flat_from_pair_indices(&parts)
    }

    /// The Alice/Bob box Σ_e P(a⃗, b⃗, e | x⃗, y⃗, z) at z = 0; for a
    /// nonsignaling joint the choice of z is immaterial.
    pub fn average_box(&self) -> BoxTable {
        let mut entries = Vec::with_capacity(self.shape.len());
        for flat in 0..self.shape.len() {
            let mut s = Scalar::zero();
            for e in 0..self.eve_outcomes {
                s = s + self.entry(flat, 0, e).clone();
            }
            entries.push(s);
        }
        BoxTable::new(self.shape.clone(), entries).expect("length preserved")
    }

    /// P(a⃗, e | x⃗ = 0, z), summed over b⃗ at y⃗ = 0 (y-independent for
    /// nonsignaling joints). Indexed [z][a][e].
    fn key_side_marginals(&self) -> Vec<Vec<Vec<Scalar>>> {
        let n = self.shape.pairs;
        let mut m =
            vec![
                vec![vec![Scalar::zero(); self.eve_outcomes]; 1 << n];
                self.eve_settings
            ];
        for a in 0..(1u64 << n) {
            for b in 0..(1u64 << n) {
                let flat = self.shape.index_binary(a, b, 0, 0);
                for z in 0..self.eve_settings {
                    for e in 0..self.eve_outcomes {
                        let slot = &mut m[z][a as usize][e];
                        *slot = slot.clone() + self.entry(flat, z, e).clone();
                    }
                }
            }
        }
        m
    }
}

fn combos(per: usize, pairs: usize) -> usize {
    per.pow(pairs as u32)
}

fn digit(combo: usize, position: usize, base: usize) -> usize {
    (combo / base.pow(position as u32)) % base
}

#[derive(Clone, Debug, Serialize)]
pub struct DistinguishResult {
    /// Eq. (4)/(7) left side at x⃗ = 0.
    pub lhs_d: Scalar,
    /// 1/2 + D/4: the optimal distinguisher's success probability.
    pub p_correct: Scalar,
    pub mode: Mode,
}

fn require_compatible(joint: &JointDistribution, h: &HashFunction, tol: f64) -> Result<()> {
    if !joint.shape.is_binary() {
        return Err(Error::unsupported("key-side shape must be binary"));
    }
    if joint.shape.pairs != h.n_r() {
        return Err(Error::input(format!(
            "hash acts on {} pairs but the joint has {}",
            h.n_r(),
            joint.shape.pairs
        )));
    }
    let bad = joint.signaling_violations();
    if !within_tolerance(&bad, tol) {
        let worst = crate::boxes::worst_violation(&bad).expect("nonempty");
        return Err(Error::distribution(format!(
            "joint distribution signals ({} violations; worst {worst})",
            bad.len()
        )));
    }
    Ok(())
}

/// D = Σ_{k,c} max_z Σ_e |P(k, c, e | x⃗=0, z) − 2^{−n_s} P(c, e | x⃗=0, z)|,
/// which for n_c = 0 is the plain Σ_k max_z Σ_e |P(k,e|z) − 2^{−n_s}P(e|z)|.
/// Ties in the max go to the lowest z.
pub fn distinguish_lhs(
    joint: &JointDistribution,
    h: &HashFunction,
    tol: f64,
) -> Result<DistinguishResult> {
    require_compatible(joint, h, tol)?;
    let d = distinguish_kernel(joint, h, h.n_s());
    let p_correct = Scalar::ratio(1, 2) + d.clone() * Scalar::ratio(1, 4);
    Ok(DistinguishResult { mode: d.mode(), lhs_d: d, p_correct })
}

/// Same quantity with the whole (c, k) output treated as the key: the left
/// side of the unextended bound applied to the concatenated hash.
pub fn distinguish_lhs_concat(
    joint: &JointDistribution,
    h: &HashFunction,
    tol: f64,
) -> Result<Scalar> {
    require_compatible(joint, h, tol)?;
    Ok(distinguish_kernel(joint, h, h.output_bits()))
}

/// Shared Σ_out max_z Σ_e |P(out,e|z) − 2^{−w}·P(out >> w, e|z)| evaluation,
/// where w counts the secret bits of the output (w = n_s for the
/// communication split, w = n_s + n_c for the concatenated reading).
fn distinguish_kernel(joint: &JointDistribution, h: &HashFunction, w: usize) -> Scalar {
    let marg = joint.key_side_marginals();
    let n_out = h.output_bits();
    let outs = 1usize << n_out;
    let publics = 1usize << (n_out - w);
    let scale = Scalar::ratio(1, 1 << w);

    // P(out, e | x⃗=0, z) by hashing the a-marginals.
    let mut p_out = vec![vec![vec![Scalar::zero(); joint.eve_outcomes]; outs]; joint.eve_settings];
    for a in 0..(1u64 << joint.shape.pairs) {
        let out = h.out_of(a) as usize;
        for z in 0..joint.eve_settings {
            for e in 0..joint.eve_outcomes {
                let slot = &mut p_out[z][out][e];
                *slot = slot.clone() + marg[z][a as usize][e].clone();
            }
        }
    }
    // P(public, e | x⃗=0, z): sum out the secret bits.
    let mut p_pub = vec![vec![vec![Scalar::zero(); joint.eve_outcomes]; publics]; joint.eve_settings];
    for out in 0..outs {
        let public = out >> w;
        for z in 0..joint.eve_settings {
            for e in 0..joint.eve_outcomes {
                let slot = &mut p_pub[z][public][e];
                *slot = slot.clone() + p_out[z][out][e].clone();
            }
        }
    }

    let mut d = Scalar::zero();
    for out in 0..outs {
        let public = out >> w;
        let mut best: Option<Scalar> = None;
        for z in 0..joint.eve_settings {
            let mut s = Scalar::zero();
            for e in 0..joint.eve_outcomes {
                let dev =
                    p_out[z][out][e].clone() - scale.clone() * p_pub[z][public][e].clone();
                s = s + dev.abs();
            }
            best = match best {
                None => Some(s),
                Some(prev) => {
                    if s > prev {
                        Some(s)
                    } else {
                        Some(prev)
                    }
                }
            };
        }
        d = d + best.expect("at least one z");
    }
    d
}

/// √2^{n_s+√n_r}·V: the main security bound for a CHSH tensor value V.
pub fn main_bound_rhs(n_s: usize, n_r: usize, value: &Scalar) -> Scalar {
    sqrt2_power(n_s, n_r) * value.clone()
}

/// 2·√2^{n_c+n_s+√n_r}·V: the bound with n_c public bits.
pub fn comm_bound_rhs(n_s: usize, n_c: usize, n_r: usize, value: &Scalar) -> Scalar {
    Scalar::int(2) * sqrt2_power(n_s + n_c, n_r) * value.clone()
}

/// √2^{extra+√n_r}, exact when n_r is a perfect square.
fn sqrt2_power(extra: usize, n_r: usize) -> Scalar {
    let r = (n_r as f64).sqrt().round() as usize;
    if r * r == n_r {
        Scalar::sqrt2_pow((extra + r) as i64)
    } else {
        Scalar::float(2f64.powf((extra as f64 + (n_r as f64).sqrt()) / 2.0))
    }
}

/// bound + 2ε, the smoothing correction for an ε-close estimated box.
pub fn smooth_bound(bound: &Scalar, epsilon: &Scalar) -> Result<Scalar> {
    if epsilon.signum() == std::cmp::Ordering::Less {
        return Err(Error::input("smoothing parameter must be nonnegative"));
    }
    Ok(bound.clone() + Scalar::int(2) * epsilon.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct KeyRate {
    /// ⌊−2·n_r·log2 v − n_c⌋ floored at zero: the committed key length.
    pub n_s: usize,
    /// The unsaturated leading-order value; the formula is asymptotic.
    pub real: f64,
    pub n_r: usize,
    pub n_c: usize,
    pub functional: bell::FunctionalKind,
}

/// Key length n_s from a per-pair functional value v: −2·n_r·log2 v − n_c,
/// floored at zero. Exact when v is a power of √2 (v = √2^j gives
/// −n_r·j − n_c directly); otherwise floored with 1e-9 slack so values that
/// are integers up to float noise land on the integer.
pub fn key_rate(
    v: &Scalar,
    n_r: usize,
    n_c: usize,
    functional: bell::FunctionalKind,
) -> Result<KeyRate> {
    if v.signum() != std::cmp::Ordering::Greater {
        return Err(Error::input("per-pair value must be positive"));
    }
    let (real, floor) = match v.as_exact().and_then(|q| q.as_sqrt2_pow()) {
        Some(j) => {
            let exact = -(n_r as i64) * j - n_c as i64;
            (exact as f64, exact)
        }
        None => {
            let real = -2.0 * n_r as f64 * v.to_f64().log2() - n_c as f64;
            (real, (real + 1e-9).floor() as i64)
        }
    };
    Ok(KeyRate { n_s: floor.max(0) as usize, real, n_r, n_c, functional })
}

#[derive(Clone, Debug, Serialize)]
pub struct SecurityReport {
    pub lhs_d: Scalar,
    pub p_correct: Scalar,
    pub rhs_bound: Scalar,
    pub chsh_tensor_value: Scalar,
    pub pass: bool,
}

/// Full check of a joint attack against a hash: Eq. (4)'s advantage on the
/// left, √2^{n_s+√n_r}·⟨CHSH⟩^{⊗n_r} (doubled and widened when n_c > 0) on
/// the right.
pub fn security_report(
    joint: &JointDistribution,
    h: &HashFunction,
    tol: f64,
) -> Result<SecurityReport> {
    let lhs = distinguish_lhs(joint, h, tol)?;
    let avg = joint.average_box();
    let value = bell::BellFunctional::chsh().evaluate(&avg)?;
    let rhs = if h.n_c() == 0 {
        main_bound_rhs(h.n_s(), h.n_r(), &value)
    } else {
        comm_bound_rhs(h.n_s(), h.n_c(), h.n_r(), &value)
    };
    let pass = lhs.lhs_d.to_f64() <= rhs.to_f64() + tol;
    Ok(SecurityReport {
        lhs_d: lhs.lhs_d,
        p_correct: lhs.p_correct,
        rhs_bound: rhs,
        chsh_tensor_value: value,
        pass,
    })
}
