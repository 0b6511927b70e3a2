use ndarray::Array2;
use rand::Rng;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// True terminal state: no bootstrapping from `s_next`.
    pub done: bool,
    /// Episode cut by the time limit; bootstrapping still applies.
    pub truncated: bool,
}

/// Row-stacked minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub s: Matrix,
    pub a: Matrix,
    /// `n x 1`.
    pub r: Matrix,
    pub s_next: Matrix,
    /// `n x 1`, 1.0 where the transition is terminal.
    pub done: Matrix,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.s.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.s.nrows() == 0
    }

    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let Some(first) = ts.first() else {
            return Err(Error::InvalidArgument("empty batch".into()));
        };
        let (k, d, n) = (first.s.len(), first.a.len(), ts.len());
        let mut b = Batch {
            s: Array2::zeros((n, k)),
            a: Array2::zeros((n, d)),
            r: Array2::zeros((n, 1)),
            s_next: Array2::zeros((n, k)),
            done: Array2::zeros((n, 1)),
        };
        for (i, t) in ts.iter().enumerate() {
            if t.s.len() != k || t.s_next.len() != k || t.a.len() != d {
                return Err(Error::Dimension {
                    what: "transition",
                    expected: k + d,
                    got: t.s.len() + t.a.len(),
                });
            }
            b.s.row_mut(i).assign(&ndarray::ArrayView1::from(&t.s));
            b.a.row_mut(i).assign(&ndarray::ArrayView1::from(&t.a));
            b.s_next.row_mut(i).assign(&ndarray::ArrayView1::from(&t.s_next));
            b.r[[i, 0]] = t.r;
            b.done[[i, 0]] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(b)
    }
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.r.is_finite() {
            return Err(Error::NonFinite("transition reward"));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform indices in `[0, len)`, drawn with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::InvalidArgument("sampling from an empty buffer".into()));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        if n == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let idx = self.sample_indices(n, rng)?;
        let ts: Vec<&Transition> = idx.iter().map(|&i| &self.items[i]).collect();
        Batch::from_transitions(&ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition {
            s: vec![r],
            a: vec![0.0],
            r,
            s_next: vec![r + 1.0],
            done: false,
            truncated: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(t(i as f64)).unwrap();
        }
        assert_eq!(b.len(), 3);
        let rs: Vec<f64> = (0..3).map(|i| b.get(i).unwrap().r).collect();
        assert_eq!(rs, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ReplayBuffer::new(0).is_err());
        let mut b = ReplayBuffer::new(2).unwrap();
        assert!(b.push(t(f64::NAN)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(b.sample(4, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_uniform_chi_square() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..100 {
            b.push(t(i as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut counts = [0usize; 100];
        for i in b.sample_indices(n, &mut rng).unwrap() {
            counts[i] += 1;
        }
        let expected = n as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square critical value at p = 0.01 with 99 degrees of freedom
        assert!(chi2 < 134.642, "chi2 = {chi2}");
    }
}
