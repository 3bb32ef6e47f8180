//! Compensated floating-point accumulation.
//!
//! Long horizon scans add up to millions of terms; naive summation loses
//! enough precision to blur the tolerances used by the condition checkers
//! (10⁻⁶ and below). Every accumulating loop in this crate goes through
//! [`KahanSum`] or one of the slice helpers here.

use nalgebra::DVector;

/// Kahan–Babuška compensated accumulator for `f64`.
///
/// The running compensation recovers the low-order bits lost when a small
/// term is added to a large partial sum. For the magnitudes handled here
/// (≤ 2⁵³ with ≥ 10⁻¹² tolerances) this keeps sums exact for all practical
/// purposes.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    /// Fresh accumulator at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one term.
    #[inline]
    pub fn add(&mut self, term: f64) {
        let y = term - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    /// Current compensated total.
    #[inline]
    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// Compensated accumulator for vectors of a fixed dimension.
#[derive(Debug, Clone)]
pub struct KahanVector {
    parts: Vec<KahanSum>,
}

impl KahanVector {
    /// Zero accumulator of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        Self {
            parts: vec![KahanSum::new(); dim],
        }
    }

    /// Add a vector term; panics if the dimension disagrees.
    pub fn add(&mut self, term: &DVector<f64>) {
        assert_eq!(term.len(), self.parts.len(), "dimension mismatch");
        for (part, value) in self.parts.iter_mut().zip(term.iter()) {
            part.add(*value);
        }
    }

    /// Add `scale * term` without materializing the scaled vector.
    pub fn add_scaled(&mut self, term: &DVector<f64>, scale: f64) {
        assert_eq!(term.len(), self.parts.len(), "dimension mismatch");
        for (part, value) in self.parts.iter_mut().zip(term.iter()) {
            part.add(*value * scale);
        }
    }

    /// Current compensated totals as a vector.
    pub fn total(&self) -> DVector<f64> {
        DVector::from_iterator(self.parts.len(), self.parts.iter().map(|p| p.total()))
    }
}

/// Compensated sum of an iterator of terms.
pub fn sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = KahanSum::new();
    for t in terms {
        acc.add(t);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_next_to_large_ones() {
        // 1 + 1e-16 repeated: naive summation never moves off 1.0.
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        let expected = 1.0 + 1e-12;
        assert!((acc.total() - expected).abs() < 1e-15);
    }

    #[test]
    fn harmonic_prefix_matches_reference() {
        // Compensated forward pass against the backward pass (smallest terms
        // first), which is the well-conditioned direction for this series.
        let n = 1_000_000u64;
        let forward = sum((1..=n).map(|k| 1.0 / k as f64));
        let backward: f64 = (1..=n).rev().map(|k| 1.0 / k as f64).sum();
        assert!((forward - backward).abs() < 1e-10);
    }

    #[test]
    fn vector_accumulator_matches_scalar() {
        let mut vec_acc = KahanVector::zeros(2);
        let mut s0 = KahanSum::new();
        let mut s1 = KahanSum::new();
        for k in 1..=1000 {
            let term = DVector::from_vec(vec![1.0 / k as f64, (k as f64).sqrt()]);
            vec_acc.add(&term);
            s0.add(term[0]);
            s1.add(term[1]);
        }
        let total = vec_acc.total();
        assert_eq!(total[0], s0.total());
        assert_eq!(total[1], s1.total());
    }
}
