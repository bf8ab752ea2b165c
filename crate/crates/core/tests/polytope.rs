//! The single-pair nonsignaling polytope, checked against independent
//! enumeration: vertices from scratch via basic solutions of the defining
//! linear system, and locality decisions against the relabeled-CHSH test.

use bellkey_core::boxes::{
    self, is_local, BoxShape, BoxTable, DetStrategy, ViolationKind,
};
use bellkey_core::scalar::Scalar;

/// Index into the 16-entry single-pair table, kept in one place so the
/// oracle cannot silently drift from the library convention.
fn idx(x: usize, y: usize, a: usize, b: usize) -> usize {
    ((x * 2 + y) * 2 + a) * 2 + b
}

/// Equality rows of the polytope: 4 normalizations and 8 marginal
/// constraints, as (coefficients, rhs).
fn equality_rows() -> Vec<([f64; 16], f64)> {
    let mut rows = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            let mut r = [0.0; 16];
            for a in 0..2 {
                for b in 0..2 {
                    r[idx(x, y, a, b)] = 1.0;
                }
            }
            rows.push((r, 1.0));
        }
    }
    // Alice's marginal free of y, Bob's free of x.
    for a in 0..2 {
        for x in 0..2 {
            let mut r = [0.0; 16];
            for b in 0..2 {
                r[idx(x, 0, a, b)] += 1.0;
                r[idx(x, 1, a, b)] -= 1.0;
            }
            rows.push((r, 0.0));
        }
    }
    for b in 0..2 {
        for y in 0..2 {
            let mut r = [0.0; 16];
            for a in 0..2 {
                r[idx(0, y, a, b)] += 1.0;
                r[idx(1, y, a, b)] -= 1.0;
            }
            rows.push((r, 0.0));
        }
    }
    rows
}

/// Solves the equality system plus `p_i = 0` for i in `zeros`; returns the
/// unique solution if the combined system has full rank.
fn basic_solution(zeros: &[usize]) -> Option<[f64; 16]> {
    let mut rows: Vec<[f64; 17]> = Vec::new();
    for (r, rhs) in equality_rows() {
        let mut row = [0.0; 17];
        row[..16].copy_from_slice(&r);
        row[16] = rhs;
        rows.push(row);
    }
    for &z in zeros {
        let mut row = [0.0; 17];
        row[z] = 1.0;
        rows.push(row);
    }

    let mut pivot_of_col = [usize::MAX; 16];
    let mut used = vec![false; rows.len()];
    for col in 0..16 {
        let mut best = None;
        let mut best_abs = 1e-7;
        for (r, row) in rows.iter().enumerate() {
            if !used[r] && row[col].abs() > best_abs {
                best_abs = row[col].abs();
                best = Some(r);
            }
        }
        let pr = best?;
        used[pr] = true;
        pivot_of_col[col] = pr;
        let inv = 1.0 / rows[pr][col];
        for c in col..17 {
            rows[pr][c] *= inv;
        }
        let pivot_row = rows[pr];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pr && row[col].abs() > 0.0 {
                let f = row[col];
                for c in col..17 {
                    row[c] -= f * pivot_row[c];
                }
            }
        }
    }
    let mut sol = [0.0; 16];
    for col in 0..16 {
        sol[col] = rows[pivot_of_col[col]][16];
    }
    // Residuals over every row, including the redundant ones.
    for row in &rows {
        let lhs: f64 = (0..16).map(|c| row[c] * sol[c]).sum();
        if (lhs - row[16]).abs() > 1e-9 {
            return None;
        }
    }
    Some(sol)
}

/// Snap to half-integers and re-verify exactly as a distribution.
fn snap_vertex(sol: [f64; 16]) -> Option<[i64; 16]> {
    let mut doubled = [0i64; 16];
    for (i, &v) in sol.iter().enumerate() {
        let r = (2.0 * v).round();
        if (2.0 * v - r).abs() > 1e-6 {
            return None;
        }
        if r < 0.0 {
            return None;
        }
        doubled[i] = r as i64;
    }
    let entries: Vec<Scalar> = doubled.iter().map(|&d| Scalar::ratio(d, 2)).collect();
    let table = BoxTable::new(BoxShape::binary(1), entries).ok()?;
    if table.violations().is_empty() && table.signaling_violations().is_empty() {
        Some(doubled)
    } else {
        None
    }
}

fn doubled_entries(table: &BoxTable) -> [i64; 16] {
    let mut out = [0i64; 16];
    for i in 0..16 {
        let two = Scalar::int(2) * table.entry(i).clone();
        for d in 0..=2i64 {
            if two == Scalar::int(d) {
                out[i] = d;
            }
        }
    }
    out
}

#[test]
fn vertex_enumeration_matches_library() {
    // Every vertex has >= 8 zero entries, so it appears as the basic
    // solution of at least one 8-subset of tight positivity constraints.
    let mut found: Vec<[i64; 16]> = Vec::new();
    let mut subset = [0usize; 8];
    enumerate_subsets(0, 0, &mut subset, &mut found);
    found.sort();
    found.dedup();

    let lib: Vec<[i64; 16]> = boxes::ns_vertices_binary().iter().map(doubled_entries).collect();
    let mut lib_sorted = lib.clone();
    lib_sorted.sort();
    assert_eq!(found.len(), 24);
    assert_eq!(found, lib_sorted);

    // 16 deterministic vertices (entries 0/1), 8 PR-type (entries 0/ 1/2).
    let dets = found.iter().filter(|v| v.iter().all(|&d| d % 2 == 0)).count();
    assert_eq!(dets, 16);
}

fn enumerate_subsets(start: usize, depth: usize, subset: &mut [usize; 8], out: &mut Vec<[i64; 16]>) {
    if depth == 8 {
        if let Some(sol) = basic_solution(&subset[..]) {
            if let Some(v) = snap_vertex(sol) {
                out.push(v);
            }
        }
        return;
    }
    for i in start..16 {
        subset[depth] = i;
        enumerate_subsets(i + 1, depth + 1, subset, out);
    }
}

/// CHSH relabeling family, reimplemented from the definition.
fn variant_value(table: &BoxTable, alpha: u8, beta: u8, gamma: u8) -> f64 {
    let mut total = 0.0;
    for x in 0..2u8 {
        for y in 0..2u8 {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let target = (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma;
                    let coef = if (a ^ b) == target { 1.0 } else { 5.0 };
                    total += coef
                        * table
                            .entry(idx(x as usize, y as usize, a as usize, b as usize))
                            .to_f64();
                }
            }
        }
    }
    total / (4.0 * std::f64::consts::SQRT_2)
}

fn fine_oracle_local(table: &BoxTable) -> bool {
    let mut min = f64::INFINITY;
    for v in 0..8u8 {
        min = min.min(variant_value(table, (v >> 2) & 1, (v >> 1) & 1, v & 1));
    }
    min >= std::f64::consts::SQRT_2 - 1e-9
}

#[test]
fn locality_of_all_vertices() {
    for (i, v) in boxes::ns_vertices_binary().iter().enumerate() {
        let r = is_local(v).unwrap();
        assert_eq!(r.local, i < 16, "vertex {i}");
        assert_eq!(r.local, fine_oracle_local(v), "vertex {i}");
        if let Some(model) = r.model {
            assert_eq!(model.to_box().unwrap().entries(), v.entries());
        }
    }
}

#[test]
fn locality_on_isotropic_line() {
    // lambda PR + (1 - lambda) uniform is local exactly up to lambda = 1/2.
    let pr = boxes::pr_box();
    let uniform = boxes::uniform_box(BoxShape::binary(1)).unwrap();
    for k in 0..=8i64 {
        let lambda = Scalar::ratio(k, 8);
        let one_minus = Scalar::ratio(8 - k, 8);
        let mixed = boxes::mix(
            &[pr.clone(), uniform.clone()],
            &[lambda, one_minus],
        )
        .unwrap();
        let r = is_local(&mixed).unwrap();
        assert_eq!(r.local, k <= 4, "lambda = {k}/8");
        assert_eq!(r.local, fine_oracle_local(&mixed), "lambda = {k}/8");
        if let Some(model) = r.model {
            let back = model.to_box().unwrap();
            assert_eq!(back.entries(), mixed.entries());
            for (_, w) in &model.weights {
                assert!(w.signum() != std::cmp::Ordering::Less);
            }
        }
    }
}

#[test]
fn locality_of_random_det_mixtures() {
    // Mixtures of deterministic strategies with small rational weights are
    // local by construction; the certifier must find a model.
    let mut state = 0x243F6A8885A308D3u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for trial in 0..40 {
        let support = 1 + (next() % 4) as usize;
        let mut tables = Vec::new();
        let mut raw = Vec::new();
        for _ in 0..support {
            tables.push(boxes::deterministic_binary((next() % 4) as u8, (next() % 4) as u8));
            raw.push(1 + (next() % 7) as i64);
        }
        let total: i64 = raw.iter().sum();
        let weights: Vec<Scalar> = raw.iter().map(|&w| Scalar::ratio(w, total)).collect();
        let mixed = boxes::mix(&tables, &weights).unwrap();
        let r = is_local(&mixed).unwrap();
        assert!(r.local, "trial {trial}");
        assert!(fine_oracle_local(&mixed));
        let model = r.model.expect("local boxes come with a model");
        assert_eq!(model.to_box().unwrap().entries(), mixed.entries());
    }
}

#[test]
fn locality_rejects_what_it_cannot_certify() {
    // Signaling input: fails the validity precondition.
    match is_local(&boxes::signaling_fixture()) {
        Err(bellkey_core::Error::Distribution(_)) => {}
        other => panic!("expected a distribution error, got {other:?}"),
    }
    // Non-rejected float box: exact certification is impossible.
    let uniform = boxes::uniform_box(BoxShape::binary(1)).unwrap().to_float();
    assert!(is_local(&uniform).is_err());
    // Multi-pair shapes are out of scope.
    let two = boxes::tensor(&[boxes::pr_box(), boxes::pr_box()]).unwrap();
    assert!(is_local(&two).is_err());
}

#[test]
fn det_strategies_cover_all_binary_assignments() {
    let mut seen = std::collections::BTreeSet::new();
    for aa in 0..4u8 {
        for bb in 0..4u8 {
            let d = DetStrategy { aa, bb };
            seen.insert(doubled_entries(&d.to_box()));
        }
    }
    assert_eq!(seen.len(), 16);
}

#[test]
fn mixtures_of_vertices_stay_valid() {
    let vertices = boxes::ns_vertices_binary();
    let mut state = 0x9E3779B97F4A7C15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for _ in 0..50 {
        let k = 2 + (next() % 5) as usize;
        let mut tables = Vec::new();
        let mut raw = Vec::new();
        for _ in 0..k {
            tables.push(vertices[(next() % 24) as usize].clone());
            raw.push(1 + (next() % 9) as i64);
        }
        let total: i64 = raw.iter().sum();
        let weights: Vec<Scalar> = raw.iter().map(|&w| Scalar::ratio(w, total)).collect();
        let mixed = boxes::mix(&tables, &weights).unwrap();
        assert!(mixed.is_valid(0.0));
        assert!(mixed.is_nonsignaling(0.0));
        let tensored = boxes::tensor(&[mixed.clone(), mixed.clone()]).unwrap();
        assert!(tensored.is_valid(0.0));
        assert!(tensored.is_nonsignaling(0.0));
    }
}

#[test]
fn violation_kinds_report_the_right_party() {
    let s = boxes::signaling_fixture();
    let v = s.signaling_violations();
    assert!(v.iter().any(|x| matches!(x.kind, ViolationKind::SignalingBob)));
    assert!(!v.iter().any(|x| matches!(x.kind, ViolationKind::SignalingAlice)));
    let w = boxes::worst_violation(&v).unwrap();
    assert_eq!(w.magnitude, Scalar::one());
}
