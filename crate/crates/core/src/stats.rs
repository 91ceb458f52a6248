//! Single-pass moment accumulators with exact pairwise merging.
//!
//! Merging follows Chan et al.; combined with a fixed merge tree this makes
//! ensemble statistics independent of how trajectories were scheduled.

/// Welford mean/variance accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d1 = x - self.mean;
        self.mean += d1 / self.count as f64;
        self.m2 += d1 * (x - self.mean);
    }

    /// Combine with the statistics of a disjoint sample.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let d = other.mean - self.mean;
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance; zero for a single sample.
    pub fn variance(&self) -> f64 {
        match self.count {
            0 => f64::NAN,
            1 => 0.0,
            n => (self.m2 / (n - 1) as f64).max(0.0),
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean, `sqrt(variance / N)`.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Joint mean and co-moment accumulator for `D` correlated quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointStats<const D: usize> {
    count: u64,
    mean: [f64; D],
    comoment: [[f64; D]; D],
}

impl<const D: usize> Default for JointStats<D> {
    fn default() -> Self {
        Self {
            count: 0,
            mean: [0.0; D],
            comoment: [[0.0; D]; D],
        }
    }
}

impl<const D: usize> JointStats<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: [f64; D]) {
        self.count += 1;
        let n = self.count as f64;
        let mut d_old = [0.0; D];
        for i in 0..D {
            d_old[i] = x[i] - self.mean[i];
            self.mean[i] += d_old[i] / n;
        }
        for i in 0..D {
            let d_new = x[i] - self.mean[i];
            for j in 0..D {
                self.comoment[j][i] += d_old[j] * d_new;
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let (na, nb, nf) = (self.count as f64, other.count as f64, n as f64);
        let mut d = [0.0; D];
        for i in 0..D {
            d[i] = other.mean[i] - self.mean[i];
        }
        for i in 0..D {
            for j in 0..D {
                self.comoment[i][j] += other.comoment[i][j] + d[i] * d[j] * na * nb / nf;
            }
        }
        for i in 0..D {
            self.mean[i] += d[i] * nb / nf;
        }
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Unbiased sample covariance of components `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.comoment[i][j] / (self.count - 1) as f64
        }
    }

    /// Standard error of the linear combination `sum_i w_i * mean_i`.
    pub fn std_error_of(&self, w: [f64; D]) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let mut var = 0.0;
        for i in 0..D {
            for j in 0..D {
                var += w[i] * w[j] * self.covariance(i, j);
            }
        }
        (var.max(0.0) / self.count as f64).sqrt()
    }
}
