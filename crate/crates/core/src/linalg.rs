use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending order.
pub(crate) struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let sym = (m + m.transpose()) * 0.5;
        let n = sym.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: DMatrix::zeros(0, 0),
            };
        }
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Spectral norm `max |λ|`.
    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, l| acc.max(l.abs()))
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// `U_r √Λ_r` over the eigenvalues strictly above `cutoff`, largest first.
    pub fn factor_above(&self, cutoff: f64) -> DMatrix<f64> {
        let n = self.values.len();
        let keep: Vec<usize> = (0..n).rev().filter(|&i| self.values[i] > cutoff).collect();
        DMatrix::from_fn(n, keep.len(), |r, c| {
            let i = keep[c];
            self.vectors[(r, i)] * self.values[i].sqrt()
        })
    }
}

/// Orthogonal projector `I − (1/m) 𝟙𝟙ᵀ` onto `{c : Σ c_i = 0}`.
pub(crate) fn centering(m: usize) -> DMatrix<f64> {
    let mut p = DMatrix::from_element(m, m, -1.0 / m as f64);
    for i in 0..m {
        p[(i, i)] += 1.0;
    }
    p
}
