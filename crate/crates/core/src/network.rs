use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, is_symmetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    /// Square and exactly symmetric.
    Undirected,
    /// Square, edge `i → j` stored at `[i, j]`.
    Directed,
    /// Rows and columns index different node sets.
    Bipartite,
}

/// Dense (possibly weighted) adjacency matrix together with its role.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    matrix: Array2<f64>,
    kind: NetworkKind,
}

impl AdjacencyMatrix {
    /// Infers the kind: exactly symmetric square matrices are undirected, other square
    /// matrices directed, rectangular ones bipartite.
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        ensure_finite(matrix.view(), "adjacency matrix")?;
        let kind = if matrix.nrows() != matrix.ncols() {
            NetworkKind::Bipartite
        } else if is_symmetric(matrix.view(), 0.0) {
            NetworkKind::Undirected
        } else {
            NetworkKind::Directed
        };
        Ok(AdjacencyMatrix { matrix, kind })
    }

    pub fn undirected(matrix: Array2<f64>) -> Result<Self> {
        ensure_finite(matrix.view(), "adjacency matrix")?;
        if !is_symmetric(matrix.view(), 0.0) {
            return Err(Error::Asymmetric);
        }
        Ok(AdjacencyMatrix {
            matrix,
            kind: NetworkKind::Undirected,
        })
    }

    pub fn directed(matrix: Array2<f64>) -> Result<Self> {
        ensure_finite(matrix.view(), "adjacency matrix")?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "directed adjacency must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(AdjacencyMatrix {
            matrix,
            kind: NetworkKind::Directed,
        })
    }

    pub fn bipartite(matrix: Array2<f64>) -> Result<Self> {
        ensure_finite(matrix.view(), "adjacency matrix")?;
        Ok(AdjacencyMatrix {
            matrix,
            kind: NetworkKind::Bipartite,
        })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Sets self-loops to zero. No-op for bipartite matrices.
    pub fn zero_diagonal(&mut self) {
        if self.kind != NetworkKind::Bipartite {
            self.matrix.diag_mut().fill(0.0);
        }
    }
}
