//! Multigraphs, frequency matrices and null models.
//!
//! Counts are kept as integers next to the normalized matrix so that the
//! null model can be formed from exact integer numerators.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdiv::DistributionMatrix;
use crate::Matrix;

/// Integer biadjacency matrix: `counts[(u, v)]` edges between `u` and `v`.
pub type CountMatrix = DMatrix<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub count: u64,
}

/// Bipartite multigraph `⟨U, V, E⟩` with edges stored as `(u, v, multiplicity)`.
/// The same pair may appear more than once; multiplicities add.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteMultigraph {
    u_count: usize,
    v_count: usize,
    edges: Vec<Edge>,
}

impl BipartiteMultigraph {
    pub fn new(u_count: usize, v_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if u_count == 0 || v_count == 0 {
            return Err(Error::invalid(
                "graph needs at least one vertex on each side",
            ));
        }
        for e in &edges {
            if e.u >= u_count || e.v >= v_count {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) out of bounds for {}x{} graph",
                    e.u, e.v, u_count, v_count
                )));
            }
            if e.count == 0 {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) has zero multiplicity",
                    e.u, e.v
                )));
            }
        }
        if edges.is_empty() {
            return Err(Error::invalid("graph has no edges"));
        }
        Ok(BipartiteMultigraph {
            u_count,
            v_count,
            edges,
        })
    }

    pub fn u_count(&self) -> usize {
        self.u_count
    }

    pub fn v_count(&self) -> usize {
        self.v_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Total number of edges `N`, counting multiplicity.
    pub fn edge_count(&self) -> u64 {
        self.edges.iter().map(|e| e.count).sum()
    }

    pub fn biadjacency(&self) -> CountMatrix {
        let mut b = CountMatrix::zeros(self.u_count, self.v_count);
        for e in &self.edges {
            b[(e.u, e.v)] += e.count;
        }
        b
    }
}

/// `F = B / N` together with the integer counts `B` and edge total `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    counts: CountMatrix,
    freq: Matrix,
    total: u64,
}

impl FrequencyMatrix {
    pub fn from_counts(counts: CountMatrix) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("count matrix is empty"));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("graph has no edges"));
        }
        let n = total as f64;
        let freq = counts.map(|c| c as f64 / n);
        Ok(FrequencyMatrix {
            counts,
            freq,
            total,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.freq
    }

    pub fn counts(&self) -> &CountMatrix {
        &self.counts
    }

    /// Number of edges `N`.
    pub fn edge_count(&self) -> u64 {
        self.total
    }

    pub fn shape(&self) -> (usize, usize) {
        self.freq.shape()
    }

    pub fn row_counts(&self) -> Vec<u64> {
        self.counts.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_counts(&self) -> Vec<u64> {
        self.counts.column_iter().map(|c| c.iter().sum()).collect()
    }

    /// Normalized degrees `deg(u) = Σ_v F[u, v]`.
    pub fn row_degrees(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.row_counts()
            .into_iter()
            .map(|c| c as f64 / n)
            .collect()
    }

    pub fn col_degrees(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.col_counts()
            .into_iter()
            .map(|c| c as f64 / n)
            .collect()
    }

    pub fn transpose(&self) -> Self {
        FrequencyMatrix {
            counts: self.counts.transpose(),
            freq: self.freq.transpose(),
            total: self.total,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.counts.is_square() && self.counts == self.counts.transpose()
    }

    pub fn to_distribution(&self) -> Result<DistributionMatrix> {
        DistributionMatrix::new(self.freq.clone())
    }
}

pub fn frequency_from_graph(g: &BipartiteMultigraph) -> Result<FrequencyMatrix> {
    FrequencyMatrix::from_counts(g.biadjacency())
}

/// Reads a (possibly non-bipartite) adjacency matrix as a biadjacency
/// matrix: vertex `i` becomes `u_i` on one side and `v_i` on the other.
/// An undirected edge therefore contributes two edges, `(u_i, v_j)` and
/// `(u_j, v_i)`.
pub fn induce_bipartite(adjacency: &DMatrix<i64>, undirected: bool) -> Result<BipartiteMultigraph> {
    if !adjacency.is_square() {
        return Err(Error::invalid(format!(
            "adjacency matrix must be square, got {:?}",
            adjacency.shape()
        )));
    }
    if adjacency.iter().any(|&a| a < 0) {
        return Err(Error::invalid("adjacency matrix has a negative entry"));
    }
    if undirected && adjacency != &adjacency.transpose() {
        return Err(Error::invalid(
            "adjacency matrix of an undirected graph must be symmetric",
        ));
    }
    let n = adjacency.nrows();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let a = adjacency[(u, v)];
            if a > 0 {
                edges.push(Edge {
                    u,
                    v,
                    count: a as u64,
                });
            }
        }
    }
    BipartiteMultigraph::new(n, n, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullVariant {
    /// `J = (deg(u)deg(v) − F/N)·N/(N − 1)`, unbiased for `Pr(u)Pr(v)`.
    #[default]
    Unbiased,
    /// `J′ = deg(u)deg(v)`, the configuration-model expectation.
    Newman,
}

impl fmt::Display for NullVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullVariant::Unbiased => "unbiased",
            NullVariant::Newman => "newman",
        })
    }
}

impl FromStr for NullVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(NullVariant::Unbiased),
            "newman" => Ok(NullVariant::Newman),
            other => Err(Error::invalid(format!("unknown null model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModelMatrix {
    j: Matrix,
    variant: NullVariant,
}

impl NullModelMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.j
    }

    pub fn into_matrix(self) -> Matrix {
        self.j
    }

    pub fn variant(&self) -> NullVariant {
        self.variant
    }

    pub fn to_distribution(&self) -> Result<DistributionMatrix> {
        DistributionMatrix::new(self.j.clone())
    }
}

/// Unbiased null model. Evaluated as `(c_u·c_v − B[u,v]) / (N(N − 1))` with
/// integer row/column counts, which is nonnegative without rounding since
/// `c_u·c_v ≥ B[u,v]² ≥ B[u,v]`.
pub fn null_model(fm: &FrequencyMatrix) -> Result<NullModelMatrix> {
    let n = fm.edge_count();
    if n < 2 {
        return Err(Error::NullModelUndefined(format!(
            "needs at least 2 edges, graph has {n}"
        )));
    }
    let rows = fm.row_counts();
    let cols = fm.col_counts();
    let denom = n as f64 * (n - 1) as f64;
    let counts = fm.counts();
    let j = Matrix::from_fn(rows.len(), cols.len(), |u, v| {
        let numer = rows[u] as u128 * cols[v] as u128 - counts[(u, v)] as u128;
        numer as f64 / denom
    });
    Ok(NullModelMatrix {
        j,
        variant: NullVariant::Unbiased,
    })
}

/// Newman's `J′ = deg(u)·deg(v)`.
pub fn newman_null(fm: &FrequencyMatrix) -> NullModelMatrix {
    let rows = fm.row_counts();
    let cols = fm.col_counts();
    let n = fm.edge_count() as f64;
    let denom = n * n;
    let j = Matrix::from_fn(rows.len(), cols.len(), |u, v| {
        (rows[u] as u128 * cols[v] as u128) as f64 / denom
    });
    NullModelMatrix {
        j,
        variant: NullVariant::Newman,
    }
}

pub fn null_model_of(fm: &FrequencyMatrix, variant: NullVariant) -> Result<NullModelMatrix> {
    match variant {
        NullVariant::Unbiased => null_model(fm),
        NullVariant::Newman => Ok(newman_null(fm)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::matrix_sum;

    fn graph(u: usize, v: usize, edges: &[(usize, usize, u64)]) -> BipartiteMultigraph {
        let edges = edges
            .iter()
            .map(|&(u, v, count)| Edge { u, v, count })
            .collect();
        BipartiteMultigraph::new(u, v, edges).unwrap()
    }

    #[test]
    fn frequency_examples() {
        let fm = frequency_from_graph(&graph(1, 1, &[(0, 0, 1)])).unwrap();
        assert_eq!(fm.matrix(), &Matrix::from_element(1, 1, 1.0));
        assert_eq!(fm.edge_count(), 1);

        let fm = frequency_from_graph(&graph(1, 2, &[(0, 0, 1), (0, 1, 1)])).unwrap();
        assert_eq!(fm.matrix(), &Matrix::from_row_slice(1, 2, &[0.5, 0.5]));
        assert_eq!(fm.edge_count(), 2);

        let fm = frequency_from_graph(&graph(2, 2, &[(0, 0, 1), (1, 1, 1)])).unwrap();
        assert_eq!(
            fm.matrix(),
            &Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])
        );
    }

    #[test]
    fn repeated_pairs_accumulate() {
        let g = graph(2, 2, &[(0, 1, 2), (0, 1, 1), (1, 0, 1)]);
        assert_eq!(g.edge_count(), 4);
        let fm = frequency_from_graph(&g).unwrap();
        assert_eq!(fm.counts()[(0, 1)], 3);
        assert_eq!(fm.matrix()[(0, 1)], 0.75);
    }

    #[test]
    fn graph_validation() {
        assert!(BipartiteMultigraph::new(2, 2, vec![]).is_err());
        assert!(BipartiteMultigraph::new(
            2,
            2,
            vec![Edge {
                u: 2,
                v: 0,
                count: 1
            }]
        )
        .is_err());
        assert!(BipartiteMultigraph::new(
            2,
            2,
            vec![Edge {
                u: 0,
                v: 0,
                count: 0
            }]
        )
        .is_err());
    }

    #[test]
    fn induction_keeps_the_matrix() {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(5, 5, &[
            0, 1, 1, 0, 0,
            1, 0, 1, 1, 0,
            1, 1, 0, 0, 1,
            0, 1, 0, 0, 1,
            0, 0, 1, 1, 0,
        ]);
        let g = induce_bipartite(&a, true).unwrap();
        assert_eq!(g.u_count(), 5);
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.biadjacency(), a.map(|x| x as u64));

        let pair = DMatrix::from_row_slice(2, 2, &[0, 1, 1, 0]);
        let g = induce_bipartite(&pair, true).unwrap();
        assert_eq!(
            g.edges(),
            &[
                Edge {
                    u: 0,
                    v: 1,
                    count: 1
                },
                Edge {
                    u: 1,
                    v: 0,
                    count: 1
                }
            ]
        );
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn induction_errors() {
        assert!(induce_bipartite(&DMatrix::zeros(3, 3), true).is_err());
        assert!(induce_bipartite(&DMatrix::from_row_slice(1, 2, &[1, 1]), false).is_err());
        assert!(induce_bipartite(&DMatrix::from_row_slice(2, 2, &[0, -1, -1, 0]), true).is_err());
        let directed = DMatrix::from_row_slice(2, 2, &[0, 1, 0, 0]);
        assert!(induce_bipartite(&directed, true).is_err());
        assert!(induce_bipartite(&directed, false).is_ok());
    }

    #[test]
    fn unbiased_null_examples() {
        let fm = frequency_from_graph(&graph(1, 2, &[(0, 0, 1), (0, 1, 1)])).unwrap();
        let j = null_model(&fm).unwrap();
        assert_eq!(j.matrix(), &Matrix::from_row_slice(1, 2, &[0.5, 0.5]));
        assert_eq!(j.variant(), NullVariant::Unbiased);

        let fm = frequency_from_graph(&graph(2, 2, &[(0, 0, 1), (1, 1, 1)])).unwrap();
        let j = null_model(&fm).unwrap();
        assert_eq!(
            j.matrix(),
            &Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])
        );

        let single = frequency_from_graph(&graph(1, 1, &[(0, 0, 1)])).unwrap();
        assert!(matches!(
            null_model(&single),
            Err(Error::NullModelUndefined(_))
        ));
    }

    #[test]
    fn newman_null_examples() {
        let fm = frequency_from_graph(&graph(1, 2, &[(0, 0, 1), (0, 1, 1)])).unwrap();
        assert_eq!(
            newman_null(&fm).matrix(),
            &Matrix::from_row_slice(1, 2, &[0.5, 0.5])
        );

        let fm = frequency_from_graph(&graph(2, 2, &[(0, 0, 1), (1, 1, 1)])).unwrap();
        assert_eq!(newman_null(&fm).matrix(), &Matrix::from_element(2, 2, 0.25));

        let uniform = FrequencyMatrix::from_counts(CountMatrix::from_element(3, 3, 7)).unwrap();
        let j = newman_null(&uniform);
        for x in j.matrix().iter() {
            assert!((x - 1.0 / 9.0).abs() < 1e-16);
        }
        assert!((matrix_sum(j.matrix()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_rows_sum_to_degrees() {
        let fm = frequency_from_graph(&graph(
            3,
            4,
            &[
                (0, 0, 3),
                (0, 3, 1),
                (1, 1, 2),
                (2, 2, 5),
                (2, 0, 1),
                (1, 3, 4),
            ],
        ))
        .unwrap();
        let j = null_model(&fm).unwrap();
        for (row, deg) in j.matrix().row_iter().zip(fm.row_degrees()) {
            assert!((row.sum() - deg).abs() < 1e-12);
        }
        for (col, deg) in j.matrix().column_iter().zip(fm.col_degrees()) {
            assert!((col.sum() - deg).abs() < 1e-12);
        }
    }
}
