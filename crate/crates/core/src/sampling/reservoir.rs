//! Streaming weighted reservoir sampling.

use crate::rng::Rng;

/// Single-sample reservoir.
///
/// `target` is the target weight of the kept sample at the reservoir's
/// owner, `w_sum` the running sum of resampling weights, `m` the number of
/// candidates seen and `w` the unbiased contribution weight
/// `w_sum / (m · target)` once finalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservoir<S> {
    pub sample: Option<S>,
    pub target: f64,
    pub w_sum: f64,
    pub m: u32,
    pub w: f64,
}

impl<S> Default for Reservoir<S> {
    fn default() -> Self {
        Reservoir { sample: None, target: 0.0, w_sum: 0.0, m: 0, w: 0.0 }
    }
}

impl<S: Copy> Reservoir<S> {
    pub fn empty() -> Self {
        Reservoir::default()
    }

    /// A reservoir holding one candidate drawn with probability density
    /// `source_pdf`, so that its contribution weight is `1 / source_pdf`.
    pub fn single(sample: S, target: f64, source_pdf: f64) -> Self {
        if !(source_pdf > 0.0) || !(target > 0.0) {
            return Reservoir { m: 1, ..Reservoir::default() };
        }
        Reservoir { sample: Some(sample), target, w_sum: target / source_pdf, m: 1, w: 1.0 / source_pdf }
    }

    /// Streams one candidate with resampling weight `weight`; `u` is a
    /// uniform number in `[0, 1)`. Returns true if the candidate was kept.
    #[inline]
    pub fn update(&mut self, sample: S, weight: f64, target: f64, u: f64) -> bool {
        self.m += 1;
        self.consider(sample, weight, target, u)
    }

    #[inline]
    fn consider(&mut self, sample: S, weight: f64, target: f64, u: f64) -> bool {
        if !(weight > 0.0) {
            return false;
        }
        self.w_sum += weight;
        if u * self.w_sum < weight {
            self.sample = Some(sample);
            self.target = target;
            true
        } else {
            false
        }
    }

    /// Sets `w = w_sum / (m · target)`, or zero when undefined.
    pub fn finalize(&mut self) {
        self.w = if self.sample.is_some() && self.target > 0.0 && self.m > 0 {
            self.w_sum / (self.m as f64 * self.target)
        } else {
            0.0
        };
    }

    /// Folds a finalized reservoir into this one. `target_here` is the
    /// other sample's target weight re-evaluated at this reservoir's owner,
    /// and `m` the (possibly clamped) count credited to the other stream.
    pub fn merge(&mut self, other: &Reservoir<S>, target_here: f64, m: u32, u: f64) -> bool {
        self.m += m;
        match other.sample {
            Some(s) => self.consider(s, target_here * other.w * m as f64, target_here, u),
            None => false,
        }
    }

    /// Drops the sample but keeps the stream count, as done when a candidate
    /// fails a shadow-ray validation.
    pub fn invalidate_sample(&mut self) {
        self.sample = None;
        self.target = 0.0;
        self.w_sum = 0.0;
        self.w = 0.0;
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_none() || !(self.w > 0.0)
    }
}

/// Weighted reservoir sampling over an exhaustive stream of non-negative
/// weights. The weights act as target weights under a uniform source over
/// the stream, so `w = Σw / w_y` is the inverse selection probability.
/// All-zero weights leave the reservoir empty.
pub fn wrs_select(weights: &[f64], rng: &mut Rng) -> Reservoir<usize> {
    let n = weights.len() as f64;
    let mut r = Reservoir::empty();
    for (i, &w) in weights.iter().enumerate() {
        r.update(i, w * n, w, rng.uniform());
    }
    r.finalize();
    r
}

/// Exact selection probabilities of [`wrs_select`].
pub fn selection_probabilities(weights: &[f64]) -> Vec<f64> {
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    weights.iter().map(|&w| if sum > 0.0 { w.max(0.0) / sum } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_weight_is_certain() {
        let mut rng = Rng::new(1);
        let r = wrs_select(&[5.0], &mut rng);
        assert_eq!(r.sample, Some(0));
        assert!((r.w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_empty_reservoir() {
        let mut rng = Rng::new(1);
        let r = wrs_select(&[0.0, 0.0], &mut rng);
        assert!(r.is_empty());
        assert_eq!(r.w, 0.0);
        assert_eq!(r.m, 2);
    }

    #[test]
    fn frequency_of_heavier_weight() {
        let mut rng = Rng::new(2);
        let trials = 1_000_000;
        let ones = (0..trials).filter(|_| wrs_select(&[1.0, 3.0], &mut rng).sample == Some(1)).count();
        let p = ones as f64 / trials as f64;
        assert!((p - 0.75).abs() < 0.002, "{p}");
    }

    #[test]
    fn contribution_weight_is_inverse_probability() {
        let mut rng = Rng::new(3);
        let w = [0.5, 2.0, 0.0, 1.5];
        let p = selection_probabilities(&w);
        for _ in 0..100 {
            let r = wrs_select(&w, &mut rng);
            let y = r.sample.unwrap();
            assert!((r.w * p[y] - 1.0).abs() < 1e-12);
            assert!(r.w_sum >= r.target);
        }
    }

    #[test]
    fn merge_accumulates_counts_and_weights() {
        let mut a = Reservoir::<u32>::single(7, 2.0, 0.5);
        let b = Reservoir::<u32> { sample: Some(9), target: 1.0, w_sum: 6.0, m: 3, w: 2.0 };
        let before = a.w_sum;
        a.merge(&b, 4.0, 3, 0.99);
        assert_eq!(a.m, 4);
        assert!((a.w_sum - (before + 4.0 * 2.0 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn merging_empty_reservoir_only_adds_count() {
        let mut a = Reservoir::<u32>::single(7, 2.0, 0.5);
        let mut b = Reservoir::<u32>::empty();
        b.m = 5;
        a.merge(&b, 0.0, 5, 0.0);
        assert_eq!(a.m, 6);
        assert_eq!(a.sample, Some(7));
        assert!((a.w_sum - 4.0).abs() < 1e-12);
    }
}
