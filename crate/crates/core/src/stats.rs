//! Batch means and goodness-of-fit distances.

use alloc::vec::Vec;

use crate::math::sqrt;

/// Streaming accumulator for a time average with a batch-means standard
/// error.
///
/// Observations are split into `batches` contiguous batches of `batch_len`
/// values. The mean is over every pushed value; the standard error uses only
/// complete batches.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: usize,
    batches: usize,
    count: usize,
    total: f64,
    current: f64,
    in_current: usize,
    means: Vec<f64>,
}

impl BatchMeans {
    /// Prepares batches for `len` upcoming observations.
    pub fn for_length(len: usize, batches: usize) -> Self {
        let batches = batches.max(1);
        Self {
            batch_len: (len / batches).max(1),
            batches,
            count: 0,
            total: 0.0,
            current: 0.0,
            in_current: 0,
            means: Vec::with_capacity(batches),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.total += x;
        if self.means.len() < self.batches {
            self.current += x;
            self.in_current += 1;
            if self.in_current == self.batch_len {
                self.means.push(self.current / self.batch_len as f64);
                self.current = 0.0;
                self.in_current = 0;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.total / self.count as f64
        }
    }

    pub fn batch_means(&self) -> &[f64] {
        &self.means
    }

    /// Standard error of the mean from the spread of the batch means.
    pub fn stderr(&self) -> f64 {
        stderr_of_means(&self.means)
    }
}

/// `sd(means)/√len(means)`; NaN with fewer than two values.
pub fn stderr_of_means(means: &[f64]) -> f64 {
    let b = means.len();
    if b < 2 {
        return f64::NAN;
    }
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64;
    sqrt(var / b as f64)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(crate::math::abs(i as f64 / na - j as f64 / nb));
    }
    d
}

/// One-sample Kolmogorov-Smirnov distance against a continuous CDF.
pub fn ks_one_sample<F: FnMut(f64) -> f64>(sample: &[f64], mut cdf: F) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let s = sorted(sample);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Pearson χ² statistic Σ (O - E)²/E.
pub fn chi_squared_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum()
}
