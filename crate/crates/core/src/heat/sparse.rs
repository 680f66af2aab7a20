use rayon::prelude::*;

use crate::scalar::Real;

/// Compressed sparse row matrix; rows are applied in parallel and each
/// row is summed in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Builds a square matrix, summing duplicate entries and dropping zeros.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *data.last_mut().expect("entry") += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self { n, indptr, indices, data };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != T::zero() {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or(T::zero())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        y.par_chunks_mut(1024).enumerate().for_each(|(b, chunk)| {
            let base = b * 1024;
            for (o, out) in chunk.iter_mut().enumerate() {
                let r = base + o;
                let mut acc = T::zero();
                for k in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.data[k] * x[self.indices[k]];
                }
                *out = acc;
            }
        });
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.n, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_apply() {
        let m = Csr::from_triplets(3, vec![(0, 0, 1.0), (0, 2, 2.0), (0, 0, 1.0), (2, 1, -1.0), (1, 1, 0.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.apply(&[1.0, 2.0, 3.0]), vec![8.0, 0.0, -2.0]);
        assert_eq!(m.transpose().get(2, 0), 2.0);
        assert_eq!(m.diagonal(), vec![2.0, 0.0, 0.0]);
    }
}
