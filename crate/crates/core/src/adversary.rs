//! Nonsignaling eavesdropping attacks: convex decompositions of the shared
//! box, the exact single-pair optimizer, and the proof-chain verifier.

use serde::Serialize;

use crate::bell;
use crate::boxes::{self, BoxShape, BoxTable};
use crate::error::{Error, Result};
use crate::hashing::{self, HashFunction};
use crate::scalar::{Mode, Scalar};
use crate::security::{self, JointDistribution};

/// Eve prepares component box P^e with probability q_e and remembers e.
/// Single Eve setting: reading e already realizes the extremal single-z
/// strategies; richer observables go through `JointDistribution` directly.
#[derive(Clone, Debug)]
pub struct AttackEnsemble {
    components: Vec<(Scalar, BoxTable)>,
}

impl AttackEnsemble {
    pub fn new(components: Vec<(Scalar, BoxTable)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::input("ensemble needs at least one component"))?;
        let shape = first.1.shape().clone();
        if !shape.is_binary() {
            return Err(Error::unsupported("attack components must be binary boxes"));
        }
        let mut total = Scalar::zero();
        for (i, (w, b)) in components.iter().enumerate() {
            if b.shape() != &shape {
                return Err(Error::input(format!("component {i} has a different shape")));
            }
            if w.signum() == std::cmp::Ordering::Less {
                return Err(Error::input(format!("component {i} has negative weight")));
            }
            let tol = if b.mode() == Mode::Exact && w.is_exact() { 0.0 } else { 1e-9 };
            if !b.is_valid(tol) || !b.is_nonsignaling(tol) {
                return Err(Error::distribution(format!(
                    "component {i} is not a valid nonsignaling box"
                )));
            }
            total = total + w.clone();
        }
        if (total.to_f64() - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "weights sum to {} instead of 1",
                total.to_f64()
            )));
        }
        Ok(AttackEnsemble { components })
    }

    pub fn components(&self) -> &[(Scalar, BoxTable)] {
        &self.components
    }

    pub fn pairs(&self) -> usize {
        self.components[0].1.shape().pairs
    }

    /// What Alice and Bob see: Σ_e q_e P^e.
    pub fn average_box(&self) -> BoxTable {
        let (weights, tables): (Vec<_>, Vec<_>) =
            self.components.iter().map(|(w, b)| (w.clone(), b.clone())).unzip();
        boxes::mix(&tables, &weights).expect("validated components")
    }

    /// P^e(a⃗ | x⃗ = 0) for each component, indexed [e][a].
    pub fn key_marginals(&self) -> Vec<Vec<Scalar>> {
        self.components
            .iter()
            .map(|(_, b)| {
                (0..(1u64 << self.pairs())).map(|a| b.marginal_a_at_zero(a)).collect()
            })
            .collect()
    }
}

/// Embeds the decomposition as a joint P(a⃗, b⃗, e | x⃗, y⃗, z=0) = q_e·P^e.
pub fn ensemble_to_joint(att: &AttackEnsemble) -> Result<JointDistribution> {
    let shape = att.components[0].1.shape().clone();
    let e_count = att.components.len();
    let mut entries = Vec::with_capacity(shape.len() * e_count);
    for flat in 0..shape.len() {
        for (w, b) in &att.components {
            entries.push(w.clone() * b.entries()[flat].clone());
        }
    }
    JointDistribution::new(shape, e_count, 1, entries)
}

fn bucket_by_output(
    h: &HashFunction,
    marginal: &[Scalar],
    width: usize,
) -> (Vec<Scalar>, Vec<Scalar>) {
    let outs = 1usize << h.output_bits();
    let publics = 1usize << (h.output_bits() - width);
    let mut by_out = vec![Scalar::zero(); outs];
    for (a, p) in marginal.iter().enumerate() {
        let out = h.out_of(a as u64) as usize;
        by_out[out] = by_out[out].clone() + p.clone();
    }
    let mut by_pub = vec![Scalar::zero(); publics];
    for (out, p) in by_out.iter().enumerate() {
        by_pub[out >> width] = by_pub[out >> width].clone() + p.clone();
    }
    (by_out, by_pub)
}

fn lhs_with_width(att: &AttackEnsemble, h: &HashFunction, width: usize) -> Result<Scalar> {
    if att.pairs() != h.n_r() {
        return Err(Error::input(format!(
            "hash acts on {} pairs but the attack has {}",
            h.n_r(),
            att.pairs()
        )));
    }
    let scale = Scalar::ratio(1, 1 << width);
    let mut d = Scalar::zero();
    for (w, b) in &att.components {
        let marginal: Vec<Scalar> =
            (0..(1u64 << att.pairs())).map(|a| b.marginal_a_at_zero(a)).collect();
        let (by_out, by_pub) = bucket_by_output(h, &marginal, width);
        let mut inner = Scalar::zero();
        for (out, p) in by_out.iter().enumerate() {
            let dev = p.clone() - scale.clone() * by_pub[out >> width].clone();
            inner = inner + dev.abs();
        }
        d = d + w.clone() * inner;
    }
    Ok(d)
}

/// Eq. (5)/(7) left side on the embedded joint, evaluated directly on the
/// decomposition: Σ_e q_e Σ_{k,c} |P^e(k,c|x⃗=0) − 2^{−n_s} P^e(c|x⃗=0)|.
pub fn attack_lhs(att: &AttackEnsemble, h: &HashFunction) -> Result<Scalar> {
    lhs_with_width(att, h, h.n_s())
}

/// Left side with the concatenated (c, k) output as the key.
pub fn attack_lhs_concat(att: &AttackEnsemble, h: &HashFunction) -> Result<Scalar> {
    lhs_with_width(att, h, h.output_bits())
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub lhs: Scalar,
    pub middle: Scalar,
    pub rhs: Scalar,
    /// Whether the hash passes the entry-wise inequality; the ordering is
    /// only asserted when it does.
    pub lemma2_pass: bool,
    pub ordered: bool,
}

/// Recomputes the proof chain lhs ≤ middle ≤ rhs on a concrete joint, each
/// term independently: the distinguishing advantage, the γ-majorization
/// pairing Σ_out max_z ⟨|Γ_{A_out} − 2^{−n_out−2n_r}·1s|, Q_z⟩ with
/// Q_z(·) = Σ_e P(·, e|z), and √2^{n_out+√n_r}·⟨CHSH⟩^{⊗n_r}.
pub fn bound_chain_check(
    joint: &JointDistribution,
    h: &HashFunction,
    tol: f64,
) -> Result<ChainReport> {
    let lhs = security::distinguish_lhs_concat(joint, h, tol)?;
    let n = h.n_r();
    let n_out = h.output_bits();
    let shape = BoxShape::binary(n);
    let total = shape.checked_len()?;

    // Q_z = the a,b-box summed over Eve's outcome at setting z.
    let mut q_per_z = Vec::with_capacity(joint.eve_settings());
    for z in 0..joint.eve_settings() {
        let mut q = Vec::with_capacity(total);
        for flat in 0..total {
            let mut s = Scalar::zero();
            for e in 0..joint.eve_outcomes() {
                s = s + joint.entry(flat, z, e).clone();
            }
            q.push(s);
        }
        q_per_z.push(q);
    }

    let den = Scalar::ratio(1, 8i64.pow(n as u32) * (1i64 << n_out));
    let mut middle = Scalar::zero();
    for out in 0..(1u32 << n_out) {
        let mut best: Option<Scalar> = None;
        for q in &q_per_z {
            let mut dot = Scalar::zero();
            for (entry, p) in q.iter().enumerate() {
                let s = hashing::ak_numerator(h, out, entry);
                let lnum = ((s << n_out) - (1i64 << n)).abs();
                if lnum != 0 && !p.is_zero() {
                    dot = dot + Scalar::int(lnum) * p.clone();
                }
            }
            best = match best {
                None => Some(dot),
                Some(prev) if dot > prev => Some(dot),
                Some(prev) => Some(prev),
            };
        }
        middle = middle + best.expect("at least one z") * den.clone();
    }

    let value = bell::BellFunctional::chsh().evaluate(&joint.average_box())?;
    let rhs = security::main_bound_rhs(n_out, n, &value);
    let lemma2_pass = hashing::lemma2_check(h)?.pass;
    let slack = if joint.mode() == Mode::Exact { 0.0 } else { tol };
    let ordered =
        lhs.to_f64() <= middle.to_f64() + slack && middle.to_f64() <= rhs.to_f64() + slack;
    Ok(ChainReport { lhs, middle, rhs, lemma2_pass, ordered })
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexAttack {
    pub c: f64,
    /// Largest distinguishing advantage over weight choices at this C.
    pub d_max: f64,
    /// The certified bound √2^{1+1}·C = 2C it stays under.
    pub bound: f64,
    /// (vertex index, weight) pairs; indices into `ns_vertices_binary`.
    pub support: Vec<(usize, f64)>,
}

impl VertexAttack {
    pub fn ensemble(&self) -> Result<AttackEnsemble> {
        let vertices = boxes::ns_vertices_binary();
        let components = self
            .support
            .iter()
            .map(|&(v, w)| (Scalar::float(w), vertices[v].clone()))
            .collect();
        AttackEnsemble::new(components)
    }
}

/// Single-pair vertex data: CHSH value and key-side advantage
/// g_v = Σ_k |P_v(k|x=0) − 1/2| for n_s = 1 with the identity hash.
fn vertex_profile() -> Vec<(f64, f64)> {
    boxes::ns_vertices_binary()
        .iter()
        .map(|v| {
            let value = bell::BellFunctional::chsh().evaluate(v).expect("single pair").to_f64();
            let g: f64 = (0..2u64)
                .map(|a| (v.marginal_a_at_zero(a).to_f64() - 0.5).abs())
                .sum();
            (value, g)
        })
        .collect()
}

/// Maximizes D over weights on the 24 vertices subject to Σq = 1 and
/// Σq·⟨CHSH⟩_v = C (n_r = 1, n_s = 1, identity hash). An LP with two
/// equality constraints has a basic optimum supported on at most two
/// vertices, so exhaustive singleton and pair enumeration is exact.
pub fn optimize_vertex_attack(c: f64) -> Result<VertexAttack> {
    let profile = vertex_profile();
    let feasible_tol = 1e-9;
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut consider = |d: f64, support: Vec<(usize, f64)>| {
        if best.as_ref().map_or(true, |(bd, _)| d > *bd) {
            best = Some((d, support));
        }
    };
    for (i, &(vi, gi)) in profile.iter().enumerate() {
        if (vi - c).abs() <= feasible_tol {
            consider(gi, vec![(i, 1.0)]);
        }
        for (j, &(vj, gj)) in profile.iter().enumerate().skip(i + 1) {
            if (vi - vj).abs() <= feasible_tol {
                continue;
            }
            let lambda = (c - vj) / (vi - vj);
            if (-feasible_tol..=1.0 + feasible_tol).contains(&lambda) {
                let lambda = lambda.clamp(0.0, 1.0);
                let d = lambda * gi + (1.0 - lambda) * gj;
                consider(d, vec![(i, lambda), (j, 1.0 - lambda)]);
            }
        }
    }
    let (d_max, support) = best.ok_or_else(|| {
        Error::input(format!("no vertex mixture attains CHSH value {c}"))
    })?;
    Ok(VertexAttack { c, d_max, bound: 2.0 * c, support })
}

/// D_max(C) along an even grid, for the looseness curve of the bound.
pub fn optimize_sweep(lo: f64, hi: f64, points: usize) -> Result<Vec<VertexAttack>> {
    if points < 2 || !(lo < hi) {
        return Err(Error::input("sweep needs lo < hi and at least two points"));
    }
    (0..points)
        .map(|i| {
            let c = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            optimize_vertex_attack(c)
        })
        .collect()
}
