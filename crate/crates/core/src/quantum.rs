//! Singlet-state statistics for the chained-inequality protocol: measurement
//! layouts, the induced box, and the asymptotic one-bit-per-singlet rate.

use serde::Serialize;

use crate::bell::{self, FunctionalKind};
use crate::boxes::{BoxShape, BoxTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::security;

/// Equatorial measurement angles for both sides. Outcomes follow the
/// convention that Bob's bit is flipped, so matched raw-key settings
/// correlate instead of anticorrelate.
#[derive(Clone, Debug, Serialize)]
pub struct MeasurementLayout {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl MeasurementLayout {
    /// The standard chain: θ^A_x = x·π/m, θ^B_y = (y + 1/2)·π/m, so every
    /// adjacent link is π/(2m) apart and the wraparound link is the odd one.
    pub fn chained(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::input(format!("chain needs m >= 2, got {m}")));
        }
        let step = std::f64::consts::PI / m as f64;
        Ok(MeasurementLayout {
            alice: (0..m).map(|x| x as f64 * step).collect(),
            bob: (0..m).map(|y| (y as f64 + 0.5) * step).collect(),
        })
    }

    /// The CHSH-optimal layout (Alice 0, π/2; Bob π/4, −π/4), saturating
    /// Cirel'son's bound. The chained m = 2 layout does not: its wraparound
    /// link spoils one correlator, landing at 3/√2 instead.
    pub fn chsh_optimal() -> Self {
        let q = std::f64::consts::FRAC_PI_4;
        MeasurementLayout { alice: vec![0.0, 2.0 * q], bob: vec![q, -q] }
    }

    pub fn settings(&self) -> (usize, usize) {
        (self.alice.len(), self.bob.len())
    }
}

/// The box a shared singlet produces under the layout:
/// P(a,b|x,y) = (1 + (−1)^{a⊕b}·cos(θ^A_x − θ^B_y))/4.
pub fn singlet_box(layout: &MeasurementLayout) -> Result<BoxTable> {
    let (sa, sb) = layout.settings();
    if sa == 0 || sb == 0 {
        return Err(Error::input("layout needs at least one angle per side"));
    }
    let shape = BoxShape {
        pairs: 1,
        outcomes_a: 2,
        outcomes_b: 2,
        settings_a: sa,
        settings_b: sb,
    };
    let mut entries = vec![Scalar::zero(); shape.checked_len()?];
    for (x, ta) in layout.alice.iter().enumerate() {
        for (y, tb) in layout.bob.iter().enumerate() {
            let c = (ta - tb).cos();
            for a in 0..2usize {
                for b in 0..2usize {
                    let sign = if (a ^ b) == 0 { 1.0 } else { -1.0 };
                    entries[shape.single_index(x, y, a, b)] =
                        Scalar::float((1.0 + sign * c) / 4.0);
                }
            }
        }
    }
    BoxTable::new(shape, entries)
}

/// Per-pair chain value on the singlet: (p + α(1−p))/√2 with
/// p = cos²(π/(4m)), evaluated through the generic functional pairing.
pub fn bc_value_quantum(m: usize) -> Result<f64> {
    let layout = MeasurementLayout::chained(m)?;
    let value = bell::BellFunctional::bc(m, false)?.evaluate(&singlet_box(&layout)?)?;
    Ok(value.to_f64())
}

/// CHSH on the Cirel'son-saturating layout: 3/√2 − 1 in this normalization.
pub fn chsh_value_quantum() -> f64 {
    let b = singlet_box(&MeasurementLayout::chsh_optimal()).expect("static layout");
    bell::BellFunctional::chsh().evaluate(&b).expect("matching shape").to_f64()
}

/// Asymptotic secret bits per singlet: −2·log2(bc value) − comm, where comm
/// is the public communication spent per raw pair.
pub fn bhk_rate(m: usize, comm_per_pair: f64) -> Result<f64> {
    Ok(-2.0 * bc_value_quantum(m)?.log2() - comm_per_pair)
}

#[derive(Clone, Debug, Serialize)]
pub struct BhkPoint {
    pub m: usize,
    pub bc_value: f64,
    pub rate: f64,
}

/// Rate curve over a range of chain lengths.
pub fn bhk_sweep(m_lo: usize, m_hi: usize, comm_per_pair: f64) -> Result<Vec<BhkPoint>> {
    if m_lo < 2 || m_hi < m_lo {
        return Err(Error::input("sweep needs 2 <= m_lo <= m_hi"));
    }
    (m_lo..=m_hi)
        .map(|m| {
            let bc_value = bc_value_quantum(m)?;
            Ok(BhkPoint { m, bc_value, rate: -2.0 * bc_value.log2() - comm_per_pair })
        })
        .collect()
}

/// Leading-order key length for the measured quantum value, for reporting
/// alongside the sweep.
pub fn bhk_key_rate(m: usize, n_r: usize, n_c: usize) -> Result<security::KeyRate> {
    let v = Scalar::float(bc_value_quantum(m)?);
    security::key_rate(&v, n_r, n_c, FunctionalKind::Bc { m, modified: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(m: usize) -> f64 {
        let p = (std::f64::consts::PI / (4.0 * m as f64)).cos().powi(2);
        let alpha = (2 * m + 1) as f64;
        (p + alpha * (1.0 - p)) / std::f64::consts::SQRT_2
    }

    #[test]
    fn chsh_layout_saturates_cirelson() {
        let expect = 3.0 / std::f64::consts::SQRT_2 - 1.0;
        assert!((chsh_value_quantum() - expect).abs() < 1e-12);
    }

    #[test]
    fn chained_two_does_not() {
        let b = singlet_box(&MeasurementLayout::chained(2).unwrap()).unwrap();
        let v = bell::BellFunctional::chsh().evaluate(&b).unwrap().to_f64();
        assert!((v - 3.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn singlet_boxes_are_valid_and_nonsignaling() {
        for m in [2, 3, 5, 17] {
            let b = singlet_box(&MeasurementLayout::chained(m).unwrap()).unwrap();
            assert!(b.is_valid(1e-12), "m = {m}");
            assert!(b.is_nonsignaling(1e-12), "m = {m}");
        }
        let b = singlet_box(&MeasurementLayout::chsh_optimal()).unwrap();
        assert!(b.is_valid(1e-12) && b.is_nonsignaling(1e-12));
    }

    #[test]
    fn quantum_chsh_box_is_nonlocal() {
        let b = singlet_box(&MeasurementLayout::chsh_optimal()).unwrap();
        let r = crate::boxes::is_local(&b).unwrap();
        assert!(!r.local);
    }

    #[test]
    fn bc_values_match_closed_form() {
        for m in [2usize, 3, 10, 37, 100] {
            let got = bc_value_quantum(m).unwrap();
            assert!((got - closed_form(m)).abs() < 1e-9, "m = {m}");
        }
        assert!((bc_value_quantum(2).unwrap() - 1.121_320_343_559_642_8).abs() < 1e-9);
        assert!((bc_value_quantum(10).unwrap() - closed_form(10)).abs() < 1e-12);
    }

    #[test]
    fn bc_value_decreases_toward_perfect_violation() {
        let mut last = f64::INFINITY;
        for m in 2..=200 {
            let v = bc_value_quantum(m).unwrap();
            assert!(v < last, "m = {m}");
            assert!(v > std::f64::consts::FRAC_1_SQRT_2);
            assert!(v < std::f64::consts::SQRT_2);
            last = v;
        }
    }

    #[test]
    fn rate_checkpoints() {
        assert!((bhk_rate(2, 0.0).unwrap() + 0.330).abs() < 2e-3);
        assert!((bhk_rate(100, 0.0).unwrap() - 0.965).abs() < 1e-3);
        let mut last = f64::NEG_INFINITY;
        for m in 2..=200 {
            let r = bhk_rate(m, 0.0).unwrap();
            assert!(r > last);
            assert!(r < 1.0);
            last = r;
        }
        assert!(bhk_rate(500, 0.0).unwrap() > 0.99);
        // asymptote via the closed form; the table itself would be 4m^2 entries
        assert!(-2.0 * closed_form(100_000).log2() > 0.9999);
    }

    #[test]
    fn communication_shifts_rate_linearly() {
        let base = bhk_rate(10, 0.0).unwrap();
        assert!((bhk_rate(10, 0.25).unwrap() - (base - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn matched_settings_correlate() {
        for m in [2usize, 10, 100] {
            let b = singlet_box(&MeasurementLayout::chained(m).unwrap()).unwrap();
            let shape = b.shape();
            let agree = b.entry(shape.single_index(0, 0, 0, 0)).to_f64()
                + b.entry(shape.single_index(0, 0, 1, 1)).to_f64();
            let expect = (std::f64::consts::PI / (4.0 * m as f64)).cos().powi(2);
            assert!((agree - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let rows = bhk_sweep(2, 20, 0.0).unwrap();
        assert_eq!(rows.len(), 19);
        for row in &rows {
            assert!((row.rate + 2.0 * row.bc_value.log2()).abs() < 1e-12);
        }
        assert!(bhk_sweep(1, 5, 0.0).is_err());
    }
}
