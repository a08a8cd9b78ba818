//! Compensated summation helpers.
//!
//! Dataset-level means go through [`NeumaierSum`] so that reordering the
//! segments changes results by at most a few ulps.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(values);
    acc.total()
}

/// Compensated arithmetic mean. Returns `None` for an empty iterator.
pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut acc = NeumaierSum::new();
    let mut n = 0usize;
    for v in values {
        acc.add(v);
        n += 1;
    }
    (n > 0).then(|| acc.total() / n as f64)
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        end
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// `n` log-spaced points from `start` to `end` inclusive (both positive).
pub fn logspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = linspace(libm::log(start), libm::log(end), n)
        .into_iter()
        .map(libm::exp)
        .collect();
    if let Some(first) = pts.first_mut() {
        *first = start;
    }
    if n > 1 {
        if let Some(last) = pts.last_mut() {
            *last = end;
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(values), 2.0);
        let naive: f64 = values.iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn mean_of_empty_is_none() {
        assert!(mean(std::iter::empty()).is_none());
        assert_eq!(mean([1.0, 2.0, 3.0]), Some(2.0));
    }

    #[test]
    fn grids_hit_endpoints() {
        let g = logspace(0.01, 100.0, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[49], 100.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let l = linspace(0.0, 2.0, 5);
        assert_eq!(l, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
