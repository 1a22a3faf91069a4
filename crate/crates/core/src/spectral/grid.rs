use serde::{Deserialize, Serialize};

use super::SpectralError;

/// Uniform `n × n` grid on the unit torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub const MIN_SIZE: usize = 16;

    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < Self::MIN_SIZE || !n.is_power_of_two() {
            return Err(SpectralError::InvalidGridSize(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `1/n`; exact because `n` is a power of two.
    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of samples, `n²`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Signed wavenumber of storage index `m ∈ 0..n`, in `-n/2+1 ..= n/2`.
    #[inline]
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m <= n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Wavenumber used by odd (first-derivative-like) multipliers: the
    /// Nyquist component is dropped so the output stays Hermitian.
    #[inline]
    pub fn odd_wavenumber(&self, m: usize) -> f64 {
        if m == self.n / 2 {
            0.0
        } else {
            self.wavenumber(m) as f64
        }
    }

    /// Storage index of wavenumber `k` (taken modulo `n`).
    #[inline]
    pub fn storage_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Flat index of the wavevector `(k1, k2)`.
    #[inline]
    pub fn flat_index(&self, k1: i64, k2: i64) -> usize {
        self.storage_index(k1) * self.n + self.storage_index(k2)
    }

    /// Wavevector stored at flat index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (self.wavenumber(idx / self.n), self.wavenumber(idx % self.n))
    }

    /// Flat index of `-k` for the mode stored at `idx`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (m1, m2) = (idx / n, idx % n);
        ((n - m1) % n) * n + (n - m2) % n
    }

    /// Largest retained wavenumber under the 2/3 rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        self.n as i64 / 3
    }

    /// `|k|` for every stored mode, in flat order.
    pub fn wavevector_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (k1, k2) = self.wavevector(idx);
                ((k1 * k1 + k2 * k2) as f64).sqrt()
            })
            .collect()
    }
}

impl TryFrom<usize> for Grid {
    type Error = SpectralError;

    fn try_from(n: usize) -> Result<Self, Self::Error> {
        Grid::new(n)
    }
}

impl From<Grid> for usize {
    fn from(g: Grid) -> usize {
        g.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        for n in [0, 1, 8, 24, 100] {
            assert!(Grid::new(n).is_err(), "n = {n}");
        }
        assert!(Grid::new(16).is_ok());
    }

    #[test]
    fn spacing_is_exact() {
        for n in [16, 64, 1024] {
            let g = Grid::new(n).unwrap();
            assert_eq!(g.spacing() * n as f64, 1.0);
        }
    }

    #[test]
    fn wavenumber_range_and_round_trip() {
        let g = Grid::new(16).unwrap();
        let ks: Vec<i64> = (0..16).map(|m| g.wavenumber(m)).collect();
        assert_eq!(*ks.iter().min().unwrap(), -7);
        assert_eq!(*ks.iter().max().unwrap(), 8);
        for m in 0..16 {
            assert_eq!(g.storage_index(g.wavenumber(m)), m);
        }
        assert_eq!(g.odd_wavenumber(8), 0.0);
    }

    #[test]
    fn conjugate_index_is_an_involution() {
        let g = Grid::new(16).unwrap();
        for idx in 0..g.len() {
            let c = g.conjugate_index(idx);
            assert_eq!(g.conjugate_index(c), idx);
            let (k1, k2) = g.wavevector(idx);
            assert_eq!(c, g.flat_index(-k1, -k2));
        }
    }
}
