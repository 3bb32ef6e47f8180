//! Double sequences, joint-limit measurement, and the valuation bridge.
//!
//! A double sequence converges jointly to `η` when every tolerance is met
//! beyond some square corner: `‖x_{m,n} − η‖ < ε` for all `m, n ≥ k`.
//! That notion transports exactly onto single-index ideal convergence:
//! enumerate ω² by shells `{(m,n) : min(m,n) = k}` and send shell `k`
//! onto the valuation slice `Q_k = {t : ν₂(t) = k}`. Joint convergence of
//! `x` is then ideal convergence of the transported sequence under the
//! bounded-valuation ideal, because "both indices beyond `k`" becomes
//! "valuation beyond `k`", and every set of bounded valuation is small.
//!
//! This module fixes one canonical such bijection ([`build_h`]) so every
//! run is byte-reproducible, measures joint limits directly
//! ([`p_lim`]), transports double sequences to single-index views and
//! back ([`transport`], [`transport_inv`]), and checks regularity of
//! four-index kernels by transporting both axes and delegating to the
//! single-index condition family ([`rh_check`]).
//!
//! One measurement caveat is handled explicitly: the shell enumeration
//! scrambles magnitude order (a small box can land at a deep single
//! index), so depth-band decay heuristics on the transported side can
//! stick even when the double-side statistic vanishes cleanly. Where
//! that happens, [`rh_check`] re-measures the affected statistic in
//! native double coordinates over deep square corners and records the
//! override in the verdict's evidence.

use std::sync::Arc;

use nalgebra::DVector;

use crate::conditions::{check_r, CheckParams, ConditionError, RegularityOutcome, RegularityReport, VerdictStatus};
use crate::ideal::{nu2, IdealLimitReport, IdealSpec, LimitStatus, SequenceView, SetDescriptor};
use crate::kahan::KahanSum;
use crate::matrix::BlockMatrix;

// =====================================================================
// The canonical shell/valuation bijection
// =====================================================================

/// Bijection `ω² → ω` mapping the shell `{(m,n) : min(m,n) = k}` onto the
/// valuation slice `Q_k = {t : ν₂(t) = k}` (with 0 placed in `Q_0`, per
/// the convention `ν₂(0) = 0`).
///
/// Shell `k` is enumerated `(k,k), (k,k+1), (k+1,k), (k,k+2), (k+2,k), …`
/// and `Q_k` increasingly (`Q_0 = {0, 1, 3, 5, …}`, and for `k ≥ 1`
/// `Q_k = {2^k·1, 2^k·3, 2^k·5, …}`); the forward map pairs the `i`-th
/// shell element with the `i`-th slice element, so it is injective and
/// order-preserving along each shell. Both directions are closed-form,
/// so the bijection needs no state and is trivially thread-safe.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairingBijection;

impl PairingBijection {
    /// Single index of the pair `(m, n)`; satisfies
    /// `ν₂(forward(m, n)) = min(m, n)` exactly.
    ///
    /// Values grow like `2^min(m, n)`, so pairs with `min(m, n) ≥ 63`
    /// have no `u64` image; those panic rather than wrap. Practical
    /// horizons keep `min` far below that.
    pub fn forward(&self, m: u64, n: u64) -> u64 {
        let k = m.min(n);
        let i = if m == n {
            0
        } else if n > m {
            2 * (n - m) - 1
        } else {
            2 * (m - n)
        };
        slice_element(k, i)
    }

    /// The pair mapped to single index `t`.
    pub fn inverse(&self, t: u64) -> (u64, u64) {
        if t == 0 {
            return (0, 0);
        }
        let (k, i) = if t % 2 == 1 {
            // Q_0 = {0} ∪ odds: odd t sits at position (t + 1)/2.
            (0, (t + 1) / 2)
        } else {
            let k = nu2(t) as u64;
            let odd = t >> k;
            (k, (odd - 1) / 2)
        };
        if i == 0 {
            (k, k)
        } else if i % 2 == 1 {
            (k, k + (i + 1) / 2)
        } else {
            (k + i / 2, k)
        }
    }

    /// Largest single index any pair of the box `[0, m] × [0, n]` maps
    /// to. Used to declare finite row supports for transported kernels.
    pub fn max_over_box(&self, m: u64, n: u64) -> u64 {
        let kmax = m.min(n);
        let mut best = 0u64;
        for k in 0..=kmax {
            let mut i = 2 * (m - k);
            if n > k {
                i = i.max(2 * (n - k) - 1);
            }
            best = best.max(slice_element(k, i));
        }
        best
    }
}

/// `i`-th element of the valuation slice `Q_k`, increasingly enumerated.
fn slice_element(k: u64, i: u64) -> u64 {
    if k == 0 {
        if i == 0 {
            0
        } else {
            2 * i - 1
        }
    } else {
        1u64
            .checked_shl(k as u32)
            .and_then(|p| p.checked_mul(2 * i + 1))
            .expect("single index exceeds u64 (shell too deep for this representation)")
    }
}

/// The canonical shell bijection.
pub fn build_h() -> PairingBijection {
    PairingBijection
}

// =====================================================================
// Double sequences
// =====================================================================

/// A double sequence `ω² → ℝ^d`: a deterministic evaluator plus an
/// optional declared joint limit for oracle comparisons.
#[derive(Clone)]
pub struct DoubleSequence {
    dim: usize,
    eval: Arc<dyn Fn(u64, u64) -> DVector<f64> + Send + Sync>,
    /// Declared joint limit, when the family knows one.
    pub declared_limit: Option<Vec<f64>>,
}

impl DoubleSequence {
    /// Scalar double sequence from a closure.
    pub fn scalar_fn<F: Fn(u64, u64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        DoubleSequence {
            dim: 1,
            eval: Arc::new(move |m, n| DVector::from_element(1, f(m, n))),
            declared_limit: None,
        }
    }

    /// Vector double sequence of dimension `dim` from a closure.
    pub fn vector_fn<F: Fn(u64, u64) -> DVector<f64> + Send + Sync + 'static>(
        dim: usize,
        f: F,
    ) -> Self {
        DoubleSequence { dim, eval: Arc::new(f), declared_limit: None }
    }

    /// Constant double sequence.
    pub fn constant(value: DVector<f64>) -> Self {
        let declared = Some(value.iter().copied().collect());
        let dim = value.len();
        DoubleSequence {
            dim,
            eval: Arc::new(move |_, _| value.clone()),
            declared_limit: declared,
        }
    }

    /// Scalar double sequence from a finite grid (`grid[m][n]`); indices
    /// beyond the grid evaluate to 0.
    pub fn from_grid(grid: Vec<Vec<f64>>) -> Self {
        DoubleSequence {
            dim: 1,
            eval: Arc::new(move |m, n| {
                let v = grid
                    .get(m as usize)
                    .and_then(|row| row.get(n as usize))
                    .copied()
                    .unwrap_or(0.0);
                DVector::from_element(1, v)
            }),
            declared_limit: None,
        }
    }

    /// Attach a declared joint limit.
    pub fn with_declared_limit(mut self, limit: Vec<f64>) -> Self {
        self.declared_limit = Some(limit);
        self
    }

    /// Component dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `(m, n)`.
    pub fn value(&self, m: u64, n: u64) -> DVector<f64> {
        (self.eval)(m, n)
    }

    /// Scalar accessor (first component).
    pub fn scalar(&self, m: u64, n: u64) -> f64 {
        self.value(m, n)[0]
    }
}

impl std::fmt::Debug for DoubleSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DoubleSequence")
            .field("dim", &self.dim)
            .field("declared_limit", &self.declared_limit)
            .finish_non_exhaustive()
    }
}

// =====================================================================
// Joint (deep-corner) limits
// =====================================================================

/// Sampling grid for one axis: dense start, geometric middle with parity
/// pairs, dense end.
fn axis_grid(horizon: u64) -> Vec<u64> {
    let mut pts: Vec<u64> = (0..=horizon.min(8)).collect();
    let mut g = 8f64;
    while (g as u64) < horizon {
        g *= 1.35;
        let p = (g as u64).min(horizon);
        pts.push(p);
        if p + 1 <= horizon {
            pts.push(p + 1);
        }
    }
    for p in [horizon / 2, horizon / 2 + 1, horizon.saturating_sub(1), horizon] {
        if p <= horizon {
            pts.push(p);
        }
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// Measure the joint limit of a double sequence at a square horizon.
///
/// The candidate is the average over a subsampled deep corner
/// `[horizon/2, horizon]²`; convergence holds when the residual sup over
/// `[k, horizon]²` drops below `tol` for some `k ≤ horizon/2`. The
/// residual sup is evaluated on the sampling grid (parity pairs
/// included, so period-2 oscillation cannot hide between samples).
/// No-limit is declared when the deepest-corner residual neither meets
/// the tolerance nor decays against the quarter-corner residual.
pub fn p_lim(x: &DoubleSequence, horizon: u64, tol: f64) -> IdealLimitReport {
    let grid = axis_grid(horizon);
    let values: Vec<Vec<DVector<f64>>> = grid
        .iter()
        .map(|&m| grid.iter().map(|&n| x.value(m, n)).collect())
        .collect();

    // Corner average → candidate η.
    let mut acc: Vec<KahanSum> = (0..x.dim()).map(|_| KahanSum::new()).collect();
    let mut count = 0u64;
    for (gi, &m) in grid.iter().enumerate() {
        if m < horizon / 2 {
            continue;
        }
        for (gj, &n) in grid.iter().enumerate() {
            if n < horizon / 2 {
                continue;
            }
            for (c, a) in acc.iter_mut().enumerate() {
                a.add(values[gi][gj][c]);
            }
            count += 1;
        }
    }
    let eta: DVector<f64> = DVector::from_iterator(
        x.dim(),
        acc.iter().map(|a| if count > 0 { a.total() / count as f64 } else { 0.0 }),
    );

    // Residual sup over [k, horizon]² for each grid k ≤ horizon/2,
    // computed as a suffix maximum over the residual grid.
    let residual = |gi: usize, gj: usize| -> f64 {
        (&values[gi][gj] - &eta).amax()
    };
    let len = grid.len();
    // suffix[g] = sup of residuals over grid pairs with both indices ≥ grid[g].
    let mut suffix = vec![0.0f64; len + 1];
    for g in (0..len).rev() {
        let mut s = suffix[g + 1];
        for t in g..len {
            s = s.max(residual(g, t)).max(residual(t, g));
        }
        suffix[g] = s;
    }
    let pos_of = |target: u64| -> usize {
        grid.partition_point(|&p| p < target).min(len - 1)
    };
    let deep = suffix[pos_of(horizon / 2)];
    let quarter = suffix[pos_of(horizon / 4)];
    let sup_all = suffix[0];

    let status = if deep < tol {
        LimitStatus::Converged { tol }
    } else if deep > 10.0 * tol && deep >= 0.92 * quarter {
        LimitStatus::NoLimitDetected
    } else {
        LimitStatus::Inconclusive
    };
    let estimate: Vec<f64> = eta.iter().copied().collect();
    let bracket = if x.dim() == 1 {
        (estimate[0] - deep, estimate[0] + deep)
    } else {
        (0.0, sup_all)
    };
    IdealLimitReport { estimate, bracket, horizon, status }
}

// =====================================================================
// Transport across the bijection
// =====================================================================

/// Single-index view of a double sequence: `y_t = x_{h⁻¹(t)}`. Joint
/// convergence of `x` is ideal convergence of `y` under the
/// bounded-valuation ideal, and sup norms agree exactly (the index map
/// is a bijection).
pub fn transport(x: &DoubleSequence, h: &PairingBijection) -> SequenceView {
    let x = x.clone();
    let h = *h;
    SequenceView::vector_fn(x.dim(), move |t| {
        let (m, n) = h.inverse(t);
        x.value(m, n)
    })
}

/// Double-index view of a single sequence: `x_{m,n} = y_{h(m,n)}`.
/// Inverse of [`transport`] pointwise.
pub fn transport_inv(y: &SequenceView, h: &PairingBijection) -> DoubleSequence {
    let y = y.clone();
    let h = *h;
    DoubleSequence::vector_fn(y.dim(), move |m, n| y.value(h.forward(m, n)))
}

// =====================================================================
// Regularity of four-index kernels
// =====================================================================

/// Check regularity of a four-index scalar kernel
/// `a_{(m,n),(p,q)}` by transporting both index axes through the shell
/// bijection and running the generator-prefix condition family with the
/// bounded-valuation ideal on both sides.
///
/// The transported kernel declares finite row supports (the image of the
/// row's column box), so tail statistics terminate. Verdict evidence
/// gains the double-index coordinates of every single-index witness.
///
/// Where the single-index depth-band decay heuristic sticks purely
/// because the shell enumeration re-orders box sizes, the affected
/// vanishing statistics are re-measured natively: the mass each sampled
/// source-ideal member receives from the kernel row `(m, n)` is summed
/// in double coordinates and its sup over deep square corners is driven
/// below `tol`. Only a certificate for every sampled member flips the
/// verdict, and the override is recorded in the evidence.
pub fn rh_check<F>(
    rule: F,
    t_target: f64,
    horizon: u64,
    tol: f64,
) -> Result<RegularityReport, ConditionError>
where
    F: Fn((u64, u64), (u64, u64)) -> f64 + Send + Sync + 'static,
{
    let h = build_h();
    let rule: Arc<dyn Fn((u64, u64), (u64, u64)) -> f64 + Send + Sync> = Arc::new(rule);
    let entry_rule = Arc::clone(&rule);
    let kernel = BlockMatrix::scalar(move |t, s| entry_rule(h.inverse(t), h.inverse(s)))
        .with_row_support_end(move |t| {
            let (m, n) = h.inverse(t);
            h.max_over_box(m, n) + 1
        });

    let nu2_ideal = IdealSpec::nu2();
    let mut params = CheckParams::new(horizon);
    params.tol = tol;
    let t0 = nalgebra::DMatrix::from_element(1, 1, t_target);
    let mut verdicts = check_r(&kernel, &t0, &nu2_ideal, &nu2_ideal, &params)?;

    // Native re-measurement of stuck vanishing statistics (R6): the
    // sampled source members mirror the single-index checker's suite.
    let mut notes: Vec<String> = vec![format!(
        "four-index kernel transported through the valuation-shell bijection; conditions \
         measured at single-index horizon {horizon}"
    )];
    for v in verdicts.iter_mut() {
        if v.id != "R6" || v.status == VerdictStatus::Pass {
            continue;
        }
        let suite = native_member_suite();
        let mut certified = Vec::with_capacity(suite.len());
        let mut blocked: Option<String> = None;
        for (label, e) in &suite {
            match native_corner_certificate(&rule, e, &h, tol) {
                Some((hd, mass)) => certified.push((label.clone(), hd, mass)),
                None => {
                    blocked = Some(label.clone());
                    break;
                }
            }
        }
        if let Some(label) = blocked {
            v.evidence.notes.push(format!(
                "native double-corner re-measurement could not certify `{label}`; the \
                 single-index verdict stands"
            ));
            continue;
        }
        for (label, hd, mass) in &certified {
            v.evidence
                .values
                .push((format!("corner[{label}]"), *mass));
            v.evidence
                .values
                .push((format!("corner_horizon[{label}]"), *hd as f64));
        }
        v.evidence.notes.push(
            "single-index depth bands are scrambled by the shell enumeration (deeper \
             single index can mean a smaller column box); every sampled source member's \
             row mass was re-measured in double coordinates and its deep-corner sup \
             certified below tolerance, so the vanishing verdict is upgraded to Pass"
                .to_string(),
        );
        v.status = VerdictStatus::Pass;
        notes.push(
            "R6 upgraded by native double-corner measurement (see its evidence)".to_string(),
        );
    }

    // Map single-index witnesses back to double coordinates.
    for v in verdicts.iter_mut() {
        let witness_t = v
            .evidence
            .values
            .iter()
            .find(|(name, _)| name == "witness_n")
            .map(|(_, t)| *t as u64);
        if let Some(t) = witness_t {
            let (m, n) = h.inverse(t);
            v.evidence.values.push(("witness_row_m".to_string(), m as f64));
            v.evidence.values.push(("witness_row_n".to_string(), n as f64));
            v.evidence
                .notes
                .push(format!("single-index witness row {t} is double row ({m}, {n})"));
        }
    }

    let overall = if verdicts.iter().any(|c| c.status == VerdictStatus::Fail) {
        RegularityOutcome::NotRegular
    } else if verdicts.iter().all(|c| c.status == VerdictStatus::Pass) {
        RegularityOutcome::Regular
    } else {
        RegularityOutcome::Inconclusive
    };
    Ok(RegularityReport {
        theorem: "transported-double-kernel".to_string(),
        conditions: verdicts,
        overall,
        implications_used: Vec::new(),
        behavioral: None,
        notes,
    })
}

/// The source-ideal members the single-index checker samples for
/// vanishing statistics under the bounded-valuation ideal: small finite
/// windows, two valuation levels, and the generator prefixes.
fn native_member_suite() -> Vec<(String, SetDescriptor)> {
    let mut out: Vec<SetDescriptor> = vec![
        SetDescriptor::finite((0..8).collect()),
        SetDescriptor::Range { lo: 0, hi: 12 },
        SetDescriptor::Nu2Level(2),
        SetDescriptor::Nu2Level(4),
    ];
    for t0 in 0..=6u32 {
        out.push(SetDescriptor::Nu2AtMost(t0));
    }
    out.into_iter().map(|e| (e.to_string(), e)).collect()
}

/// Mass row `(m, n)` of the kernel places on the double preimage of `e`:
/// the sum of `|a_{(m,n),(p,q)}|` over box pairs whose single index lies
/// in `e`. `None` when the descriptor has no enumerable double preimage.
fn native_member_mass(
    rule: &Arc<dyn Fn((u64, u64), (u64, u64)) -> f64 + Send + Sync>,
    e: &SetDescriptor,
    h: &PairingBijection,
    m: u64,
    n: u64,
) -> Option<f64> {
    let mut acc = KahanSum::new();
    let mut add_pair = |p: u64, q: u64| {
        if p <= m && q <= n {
            acc.add(rule((m, n), (p, q)).abs());
        }
    };
    match e {
        SetDescriptor::Nu2Level(c) => {
            add_min_band(&mut add_pair, *c as u64, m, n);
        }
        SetDescriptor::Nu2AtMost(c) => {
            for c0 in 0..=(*c as u64).min(m.min(n)) {
                add_min_band(&mut add_pair, c0, m, n);
            }
        }
        SetDescriptor::Finite(v) => {
            for &t in v {
                let (p, q) = h.inverse(t);
                add_pair(p, q);
            }
        }
        SetDescriptor::Range { lo, hi } => {
            if hi.saturating_sub(*lo) > (1 << 14) {
                return None;
            }
            for t in *lo..=*hi {
                let (p, q) = h.inverse(t);
                add_pair(p, q);
            }
        }
        _ => return None,
    }
    Some(acc.total())
}

/// Visit every box pair with `min(p, q) = c`.
fn add_min_band(add_pair: &mut impl FnMut(u64, u64), c: u64, m: u64, n: u64) {
    if c > m.min(n) {
        return;
    }
    for q in c..=n {
        add_pair(c, q);
    }
    for p in (c + 1)..=m {
        add_pair(p, c);
    }
}

/// Certify that the member mass vanishes over deep square corners: find
/// a double horizon whose subsampled corner `[H/2, H]²` keeps the mass
/// below `tol`. Returns the horizon and the measured corner max.
fn native_corner_certificate(
    rule: &Arc<dyn Fn((u64, u64), (u64, u64)) -> f64 + Send + Sync>,
    e: &SetDescriptor,
    h: &PairingBijection,
    tol: f64,
) -> Option<(u64, f64)> {
    for hd in [2048u64, 8192, 32768, 131072] {
        let mut pts: Vec<u64> = Vec::new();
        let mut g = hd / 2;
        while g < hd {
            pts.push(g);
            g = (g as f64 * 1.22) as u64 + 1;
        }
        pts.push(hd);
        let mut worst = 0.0f64;
        for &m in &pts {
            for &n in &pts {
                let mass = native_member_mass(rule, e, h, m, n)?;
                worst = worst.max(mass);
            }
        }
        if worst <= tol {
            return Some((hd, worst));
        }
    }
    None
}

// =====================================================================
// Tests
// =====================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::ideal_lim;
    use approx::assert_relative_eq;

    #[test]
    fn forward_frozen_values() {
        let h = build_h();
        let expected = [
            ((0, 0), 0),
            ((0, 1), 1),
            ((1, 0), 3),
            ((0, 2), 5),
            ((2, 0), 7),
            ((1, 1), 2),
            ((1, 2), 6),
            ((2, 1), 10),
            ((2, 2), 4),
            ((2, 3), 12),
            ((3, 7), 120),
        ];
        for ((m, n), t) in expected {
            assert_eq!(h.forward(m, n), t, "forward({m}, {n})");
        }
    }

    #[test]
    fn round_trip_is_exact_to_sixteen_bits() {
        let h = build_h();
        for t in 0..=(1u64 << 16) {
            let (m, n) = h.inverse(t);
            assert_eq!(h.forward(m, n), t, "round trip at {t}");
        }
        for m in 0..=48u64 {
            for n in 0..=48u64 {
                let t = h.forward(m, n);
                assert_eq!(h.inverse(t), (m, n), "round trip at ({m}, {n})");
                assert_eq!(nu2(t) as u64, m.min(n), "valuation of forward({m}, {n})");
            }
        }
    }

    #[test]
    fn shells_enumerate_in_order() {
        let h = build_h();
        for k in 0..6u64 {
            let mut last = None;
            // Walk the shell enumeration (k,k), (k,k+1), (k+1,k), …
            let mut images = vec![h.forward(k, k)];
            for j in 1..=20u64 {
                images.push(h.forward(k, k + j));
                images.push(h.forward(k + j, k));
            }
            for t in images {
                assert_eq!(nu2(t) as u64, k);
                if let Some(prev) = last {
                    assert!(t > prev, "shell {k} enumeration must increase");
                }
                last = Some(t);
            }
        }
    }

    #[test]
    fn max_over_box_bounds_every_pair() {
        let h = build_h();
        for m in 0..=24u64 {
            for n in 0..=24u64 {
                let cap = h.max_over_box(m, n);
                let mut seen = 0u64;
                for p in 0..=m {
                    for q in 0..=n {
                        let t = h.forward(p, q);
                        assert!(t <= cap, "forward({p},{q}) = {t} beyond cap {cap}");
                        seen = seen.max(t);
                    }
                }
                assert_eq!(seen, cap, "cap must be attained on the box ({m}, {n})");
            }
        }
    }

    #[test]
    fn corner_decay_has_joint_limit_zero() {
        let x = DoubleSequence::scalar_fn(|m, n| 1.0 / (m.min(n) + 1) as f64);
        let r = p_lim(&x, 4096, 1e-3);
        assert!(matches!(r.status, LimitStatus::Converged { .. }), "{:?}", r.status);
        assert!(r.value().abs() < 2e-3, "estimate {}", r.value());
    }

    #[test]
    fn finitely_many_bad_rows_do_not_block_the_joint_limit() {
        let x = DoubleSequence::scalar_fn(|m, _| if m == 0 { 1.0 } else { 0.0 });
        let r = p_lim(&x, 1024, 1e-6);
        assert!(matches!(r.status, LimitStatus::Converged { .. }), "{:?}", r.status);
        assert_eq!(r.value(), 0.0);
    }

    #[test]
    fn parity_oscillation_has_no_joint_limit() {
        let x = DoubleSequence::scalar_fn(|m, n| if (m + n) % 2 == 0 { 1.0 } else { -1.0 });
        let r = p_lim(&x, 4096, 1e-3);
        assert!(matches!(r.status, LimitStatus::NoLimitDetected), "{:?}", r.status);
    }

    #[test]
    fn transport_round_trips_pointwise() {
        let h = build_h();
        let x = DoubleSequence::scalar_fn(|m, n| (m as f64) - 0.5 * (n as f64));
        let y = transport(&x, &h);
        let back = transport_inv(&y, &h);
        for m in 0..=32u64 {
            for n in 0..=32u64 {
                assert_eq!(back.scalar(m, n), x.scalar(m, n), "round trip at ({m}, {n})");
            }
        }
    }

    #[test]
    fn transported_corner_decay_converges_under_valuations() {
        let h = build_h();
        let x = DoubleSequence::scalar_fn(|m, n| 2.5 + 1.0 / (m.min(n) + 1) as f64)
            .with_declared_limit(vec![2.5]);
        let y = transport(&x, &h);
        // The residual depends on the valuation alone, and depth grows
        // only logarithmically in the horizon: at 2^14 the deepest
        // visible residual is 1/15. A tolerance of 0.2 is the honest
        // finite-horizon version of "the joint limit is 2.5".
        let r = ideal_lim(&IdealSpec::nu2(), &y, 1 << 14, 0.2).unwrap();
        assert!(matches!(r.status, LimitStatus::Converged { .. }), "{r:?}");
        assert!((r.value() - 2.5).abs() <= 0.2, "estimate {}", r.value());
    }

    #[test]
    fn transported_constant_is_constant() {
        let h = build_h();
        let x = DoubleSequence::constant(DVector::from_element(1, 0.7));
        let y = transport(&x, &h);
        for t in [0u64, 1, 2, 17, 1024, 65535] {
            assert_eq!(y.scalar(t), 0.7);
        }
        let r = ideal_lim(&IdealSpec::nu2(), &y, 4096, 1e-9).unwrap();
        assert!(matches!(r.status, LimitStatus::Converged { .. }));
        assert_relative_eq!(r.value(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_indicator_converges_nowhere() {
        let h = build_h();
        let x = DoubleSequence::scalar_fn(|m, n| if m == n { 1.0 } else { 0.0 });
        let r = p_lim(&x, 4096, 1e-3);
        assert!(matches!(r.status, LimitStatus::NoLimitDetected), "{:?}", r.status);
        // The diagonal transports onto {0} ∪ {2^k}: unbounded valuations,
        // so the exceptional set is not small and the transported side
        // must refuse a limit as well.
        let y = transport(&x, &h);
        let ry = ideal_lim(&IdealSpec::nu2(), &y, 1 << 14, 1e-3).unwrap();
        assert!(
            !matches!(ry.status, LimitStatus::Converged { .. }),
            "diagonal indicator must not converge: {:?}",
            ry.status
        );
    }

    #[test]
    fn double_averaging_kernel_is_regular() {
        let report = rh_check(
            |(m, n), (p, q)| {
                if p <= m && q <= n {
                    1.0 / ((m + 1) * (n + 1)) as f64
                } else {
                    0.0
                }
            },
            1.0,
            1 << 14,
            1e-3,
        )
        .unwrap();
        assert_eq!(report.overall, RegularityOutcome::Regular, "report: {report:?}");
        for v in &report.conditions {
            assert_eq!(v.status, VerdictStatus::Pass, "{} should pass", v.id);
        }
    }

    #[test]
    fn double_identity_kernel_is_regular() {
        let report = rh_check(
            |(m, n), (p, q)| {
                if (m, n) == (p, q) {
                    1.0
                } else {
                    0.0
                }
            },
            1.0,
            1 << 13,
            1e-3,
        )
        .unwrap();
        assert_eq!(report.overall, RegularityOutcome::Regular, "report: {report:?}");
    }

    #[test]
    fn unnormalized_double_kernel_fails_boundedness() {
        let report = rh_check(
            |(m, n), (p, q)| {
                if p <= m && q <= n {
                    1.0
                } else {
                    0.0
                }
            },
            1.0,
            1 << 12,
            1e-3,
        )
        .unwrap();
        assert_eq!(report.overall, RegularityOutcome::NotRegular);
        let r1 = report.conditions.iter().find(|v| v.id == "R1").unwrap();
        assert_eq!(r1.status, VerdictStatus::Fail);
    }

    #[test]
    fn transport_preserves_sup_norms() {
        let h = build_h();
        let x = DoubleSequence::scalar_fn(|m, n| 1.0 / ((m + 1) * (n + 1)) as f64);
        let y = transport(&x, &h);
        // The bijection re-indexes without changing values: sup over a
        // box equals sup over its image.
        let box_sup = (0..=48u64)
            .flat_map(|m| (0..=48u64).map(move |n| (m, n)))
            .map(|(m, n)| x.scalar(m, n).abs())
            .fold(0.0f64, f64::max);
        let image_sup = (0..=48u64)
            .flat_map(|m| (0..=48u64).map(move |n| (m, n)))
            .map(|(m, n)| y.scalar(h.forward(m, n)).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(box_sup, image_sup);
        assert_eq!(box_sup, 1.0);
    }
}
