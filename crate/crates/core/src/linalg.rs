//! Dense symmetric matrices and a cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymmetricMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Takes ownership of `n*n` row-major entries and symmetrizes them.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data length");
        let mut m = Self { n, data };
        for i in 0..n {
            for j in i + 1..n {
                let avg = (m.get(i, j) + m.get(j, i)) * T::lit(0.5);
                m.set(i, j, avg);
                m.set(j, i, avg);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n).map(|i| crate::scalar::dot(&self.data[i * self.n..(i + 1) * self.n], v)).collect()
    }

    fn off_diagonal_norm(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j) * self.get(i, j);
                }
            }
        }
        s.sqrt()
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> SymmetricEigen<T> {
        let n = self.n;
        let mut a = self.clone();
        let mut v = Self::from_diagonal(&vec![T::one(); n]);
        let scale = self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let threshold = T::epsilon() * scale.max(T::min_positive_value());
        let mut sweeps = 0;
        while sweeps < 100 && a.off_diagonal_norm() > threshold {
            sweeps += 1;
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let (app, aqq) = (a.get(p, p), a.get(q, q));
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let t = if theta == T::zero() { T::one() } else { t };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let (arp, arq) = (a.get(r, p), a.get(r, q));
                        a.set(r, p, c * arp - s * arq);
                        a.set(r, q, s * arp + c * arq);
                    }
                    for r in 0..n {
                        let (apr, aqr) = (a.get(p, r), a.get(q, r));
                        a.set(p, r, c * apr - s * aqr);
                        a.set(q, r, s * apr + c * aqr);
                    }
                    a.set(p, q, T::zero());
                    a.set(q, p, T::zero());
                    for r in 0..n {
                        let (vrp, vrq) = (v.get(r, p), v.get(r, q));
                        v.set(r, p, c * vrp - s * vrq);
                        v.set(r, q, s * vrp + c * vrq);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
        let values = order.iter().map(|&i| a.get(i, i)).collect();
        let vectors = order.iter().map(|&i| (0..n).map(|r| v.get(r, i)).collect()).collect();
        SymmetricEigen { values, vectors, sweeps }
    }
}

/// Ascending eigenvalues with unit eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    pub sweeps: usize,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn count_below(&self, threshold: T) -> usize {
        self.values.iter().filter(|&&v| v < threshold).count()
    }

    pub fn spectral_radius(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Solves `A x = b` in the pseudo-inverse sense, dropping eigenvalues
    /// with |μ| ≤ `rel_cutoff`·max|μ|. Returns the solution and how many
    /// directions were dropped.
    pub fn pseudo_solve(&self, b: &[T], rel_cutoff: T) -> (Vec<T>, usize) {
        let cutoff = rel_cutoff * self.spectral_radius();
        let mut x = vec![T::zero(); b.len()];
        let mut dropped = 0;
        for (mu, v) in self.values.iter().zip(&self.vectors) {
            if mu.abs() <= cutoff || *mu == T::zero() {
                dropped += 1;
                continue;
            }
            let coef = crate::scalar::dot(v, b) / *mu;
            for (xi, &vi) in x.iter_mut().zip(v) {
                *xi += coef * vi;
            }
        }
        (x, dropped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymmetricMatrix::from_row_major(n, data)
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = SymmetricMatrix::from_row_major(2, vec![2.0f64, 1.0, 1.0, 2.0]);
        let e = m.eigen();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn reconstructs_random_matrices() {
        for seed in 0..5 {
            let n = 12 + seed as usize * 7;
            let m = random_symmetric(n, seed);
            let e = m.eigen();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            for (mu, v) in e.values.iter().zip(&e.vectors) {
                let av = m.mul_vec(v);
                let err = av.iter().zip(v).map(|(a, b)| (a - mu * b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12, "n={n}: {err}");
            }
            for i in 0..n {
                for j in 0..n {
                    let d = crate::scalar::dot(&e.vectors[i], &e.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trace_is_preserved() {
        let m = random_symmetric(30, 11);
        let tr: f64 = (0..30).map(|i| m.get(i, i)).sum();
        let e = m.eigen();
        assert!((e.values.iter().sum::<f64>() - tr).abs() < 1e-12);
    }

    #[test]
    fn pseudo_solve_drops_null_space() {
        let m = SymmetricMatrix::from_diagonal(&[-3.0, 0.0, 5.0]);
        let (x, dropped) = m.eigen().pseudo_solve(&[3.0, 7.0, 10.0], 1e-10);
        assert_eq!(dropped, 1);
        assert_eq!(x, vec![-1.0, 0.0, 2.0]);
    }

    #[test]
    fn negative_count() {
        let m = SymmetricMatrix::from_diagonal(&[-3.0, -1e-14, 0.0, 5.0]);
        assert_eq!(m.eigen().count_below(-1e-10), 1);
    }

    #[test]
    fn f32_eigen() {
        let m = SymmetricMatrix::<f32>::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]);
        let e = m.eigen();
        assert!((e.values[0] + 1.0f32).abs() < 1e-6 && (e.values[1] - 1.0f32).abs() < 1e-6);
    }
}
