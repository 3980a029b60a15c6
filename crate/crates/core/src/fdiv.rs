//! Divergence families, f-divergence and f-mutual information.
//!
//! Every family is a convex `f` with `f(1) = 0`, together with the two
//! closed forms the dual objective needs: the distinguisher transform
//! `∂f(D)` and the conjugate composition `f*(∂f(D))`.
//!
//! | family      | f(t)                          | ∂f(D)           | f*(∂f(D))       |
//! |-------------|-------------------------------|-----------------|-----------------|
//! | `tvd`       | \|t − 1\|                     | sgn(log D)      | sgn(log D)      |
//! | `kl`        | t log t                       | log D + 1       | D               |
//! | `pearson`   | (t − 1)²                      | 2(D − 1)        | D² − 1          |
//! | `js`        | −(t+1) log((t+1)/2) + t log t | log(2D/(1+D))   | −log(2/(1+D))   |
//! | `hellinger` | (√t − 1)²                     | 1 − √(1/D)      | √D − 1          |
//!
//! Logarithms are natural. At `t = 0` the right limits are used, so
//! `f(0)` is 1 for `tvd`, `pearson` and `hellinger`, 0 for `kl`, and `log 2`
//! for `js`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::numeric::{matrix_sum, stable_sum};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DivergenceFamily {
    #[serde(rename = "tvd")]
    Tvd,
    #[serde(rename = "kl")]
    Kl,
    #[serde(rename = "pearson")]
    Pearson,
    #[serde(rename = "js", alias = "jensen-shannon")]
    JensenShannon,
    #[serde(rename = "hellinger", alias = "squared-hellinger")]
    SquaredHellinger,
}

impl DivergenceFamily {
    pub const ALL: [DivergenceFamily; 5] = [
        DivergenceFamily::Tvd,
        DivergenceFamily::Kl,
        DivergenceFamily::Pearson,
        DivergenceFamily::JensenShannon,
        DivergenceFamily::SquaredHellinger,
    ];

    /// The four families with a derivative everywhere on `t > 0`.
    pub const DIFFERENTIABLE: [DivergenceFamily; 4] = [
        DivergenceFamily::Kl,
        DivergenceFamily::Pearson,
        DivergenceFamily::JensenShannon,
        DivergenceFamily::SquaredHellinger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DivergenceFamily::Tvd => "tvd",
            DivergenceFamily::Kl => "kl",
            DivergenceFamily::Pearson => "pearson",
            DivergenceFamily::JensenShannon => "js",
            DivergenceFamily::SquaredHellinger => "hellinger",
        }
    }

    pub fn is_differentiable(self) -> bool {
        self != DivergenceFamily::Tvd
    }

    /// Whether the distinguisher transform needs `D > 0`.
    ///
    /// Only Pearson's `2(D − 1)` is defined on the whole real line, so it is
    /// the one family that can consume an unconstrained SVD approximation.
    pub fn requires_positive_distinguisher(self) -> bool {
        self != DivergenceFamily::Pearson
    }

    /// `f(t)` for `t ≥ 0`.
    pub fn f(self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!(
                "{}: f(t) needs a finite t >= 0, got {t}",
                self.name()
            )));
        }
        Ok(match self {
            DivergenceFamily::Tvd => (t - 1.0).abs(),
            DivergenceFamily::Kl => xlogx(t),
            DivergenceFamily::Pearson => (t - 1.0) * (t - 1.0),
            DivergenceFamily::JensenShannon => -(t + 1.0) * ((t + 1.0) / 2.0).ln() + xlogx(t),
            DivergenceFamily::SquaredHellinger => {
                let s = t.sqrt() - 1.0;
                s * s
            }
        })
    }

    /// `∂f(D)`. For `tvd` this is `sgn(log D)` with the tie at `D = 1`
    /// resolved to 0 and `D = 0` mapped to −1.
    pub fn distinguisher(self, d: f64) -> Result<f64> {
        self.check_distinguisher_domain(d)?;
        Ok(match self {
            DivergenceFamily::Tvd => sign_of_log(d),
            DivergenceFamily::Kl => d.ln() + 1.0,
            DivergenceFamily::Pearson => 2.0 * (d - 1.0),
            DivergenceFamily::JensenShannon => (2.0 * d / (1.0 + d)).ln(),
            DivergenceFamily::SquaredHellinger => 1.0 - (1.0 / d).sqrt(),
        })
    }

    /// `f*(∂f(D))`.
    pub fn conjugate(self, d: f64) -> Result<f64> {
        self.check_distinguisher_domain(d)?;
        Ok(match self {
            DivergenceFamily::Tvd => sign_of_log(d),
            DivergenceFamily::Kl => d,
            DivergenceFamily::Pearson => d * d - 1.0,
            DivergenceFamily::JensenShannon => -(2.0 / (1.0 + d)).ln(),
            DivergenceFamily::SquaredHellinger => d.sqrt() - 1.0,
        })
    }

    fn check_distinguisher_domain(self, d: f64) -> Result<()> {
        let ok = d.is_finite()
            && match self {
                DivergenceFamily::Pearson => true,
                DivergenceFamily::Tvd => d >= 0.0,
                _ => d > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{}: distinguisher value {d} outside the domain",
                self.name()
            )))
        }
    }
}

impl fmt::Display for DivergenceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DivergenceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tvd" | "total-variation" => Ok(DivergenceFamily::Tvd),
            "kl" => Ok(DivergenceFamily::Kl),
            "pearson" | "chi2" => Ok(DivergenceFamily::Pearson),
            "js" | "jensen-shannon" => Ok(DivergenceFamily::JensenShannon),
            "hellinger" | "squared-hellinger" => Ok(DivergenceFamily::SquaredHellinger),
            other => Err(Error::invalid(format!(
                "unknown divergence family '{other}'"
            ))),
        }
    }
}

fn xlogx(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

fn sign_of_log(d: f64) -> f64 {
    if d > 1.0 {
        1.0
    } else if d < 1.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn f_value(family: DivergenceFamily, t: f64) -> Result<f64> {
    family.f(t)
}

pub fn distinguisher_transform(family: DivergenceFamily, d: f64) -> Result<f64> {
    family.distinguisher(d)
}

pub fn conjugate_transform(family: DivergenceFamily, d: f64) -> Result<f64> {
    family.conjugate(d)
}

/// A nonnegative matrix whose entries sum to one: a joint distribution
/// over (row, column) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionMatrix(Matrix);

impl DistributionMatrix {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(m: Matrix) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::invalid("distribution matrix is empty"));
        }
        if let Some(bad) = m.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!(
                "distribution entries must be finite and >= 0, found {bad}"
            )));
        }
        let total = matrix_sum(&m);
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "distribution must sum to 1, sums to {total}"
            )));
        }
        Ok(DistributionMatrix(m))
    }

    /// Normalizes nonnegative weights to total mass one.
    pub fn from_weights(weights: Matrix) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!(
                "weights must be finite and >= 0, found {bad}"
            )));
        }
        let total = matrix_sum(&weights);
        if !(total > 0.0) {
            return Err(Error::invalid("weights sum to zero"));
        }
        Self::new(weights / total)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        row_sums(&self.0)
    }

    pub fn col_marginals(&self) -> Vec<f64> {
        col_sums(&self.0)
    }

    pub fn transpose(&self) -> Self {
        DistributionMatrix(self.0.transpose())
    }

    /// The product of the two marginals, `Pr(x)·Pr(y)`.
    pub fn marginal_product(&self) -> Matrix {
        let rows = self.row_marginals();
        let cols = self.col_marginals();
        Matrix::from_fn(rows.len(), cols.len(), |i, j| rows[i] * cols[j])
    }
}

pub(crate) fn row_sums(m: &Matrix) -> Vec<f64> {
    m.row_iter()
        .map(|r| stable_sum(r.iter().copied()))
        .collect()
}

pub(crate) fn col_sums(m: &Matrix) -> Vec<f64> {
    m.column_iter()
        .map(|c| stable_sum(c.iter().copied()))
        .collect()
}

/// `Σ q·f(p/q)` over raw matrices. Cells with `q = 0` contribute 0 when
/// `p = 0` and make the divergence infinite otherwise.
pub fn divergence_between(family: DivergenceFamily, p: &Matrix, q: &Matrix) -> Result<f64> {
    check_shape(p.shape(), q.shape())?;
    let mut terms = Vec::with_capacity(p.len());
    for col in 0..p.ncols() {
        for row in 0..p.nrows() {
            let (pv, qv) = (p[(row, col)], q[(row, col)]);
            if qv == 0.0 {
                if pv != 0.0 {
                    return Err(Error::InfiniteDivergence { row, col, p: pv });
                }
                continue;
            }
            terms.push(qv * family.f(pv / qv)?);
        }
    }
    Ok(stable_sum(terms))
}

pub fn f_divergence(
    family: DivergenceFamily,
    p: &DistributionMatrix,
    q: &DistributionMatrix,
) -> Result<f64> {
    divergence_between(family, p.matrix(), q.matrix())
}

/// f-divergence between a joint distribution and the product of its marginals.
pub fn f_mutual_information(family: DivergenceFamily, joint: &DistributionMatrix) -> Result<f64> {
    divergence_between(family, joint.matrix(), &joint.marginal_product())
}

/// A column-stochastic kernel `K` (each column sums to one) mapping a
/// distribution over `ncols` symbols to one over `nrows` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticChannel {
    kernel: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelSide {
    Rows,
    Cols,
}

impl StochasticChannel {
    pub const COLUMN_TOLERANCE: f64 = 1e-12;

    pub fn new(kernel: Matrix) -> Result<Self> {
        if kernel.is_empty() {
            return Err(Error::invalid("channel kernel is empty"));
        }
        if kernel.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(
                "channel kernel has a negative or non-finite entry",
            ));
        }
        for (j, s) in col_sums(&kernel).into_iter().enumerate() {
            if (s - 1.0).abs() > Self::COLUMN_TOLERANCE {
                return Err(Error::invalid(format!(
                    "channel column {j} sums to {s}, expected 1"
                )));
            }
        }
        Ok(StochasticChannel { kernel })
    }

    pub fn identity(n: usize) -> Self {
        StochasticChannel {
            kernel: Matrix::identity(n, n),
        }
    }

    /// Relabeling channel sending symbol `i` to `perm[i]`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        let mut kernel = Matrix::zeros(n, n);
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || seen[p] {
                return Err(Error::invalid("not a permutation"));
            }
            seen[p] = true;
            kernel[(p, i)] = 1.0;
        }
        Ok(StochasticChannel { kernel })
    }

    /// A channel with columns drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> Self {
        let mut kernel = Matrix::zeros(outputs, inputs);
        for j in 0..inputs {
            // Normalized exponentials are uniform on the simplex.
            let draws: Vec<f64> = (0..outputs)
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let total: f64 = draws.iter().sum();
            for (i, x) in draws.into_iter().enumerate() {
                kernel[(i, j)] = x / total;
            }
        }
        StochasticChannel { kernel }
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }
}

/// Pushes one side of `joint` through `channel`: `K·P` for rows, `P·Kᵀ`
/// for columns.
pub fn apply_channel(
    joint: &DistributionMatrix,
    channel: &StochasticChannel,
    side: ChannelSide,
) -> Result<DistributionMatrix> {
    let p = joint.matrix();
    let k = channel.kernel();
    let out = match side {
        ChannelSide::Rows => {
            if k.ncols() != p.nrows() {
                return Err(Error::ShapeMismatch {
                    expected: (k.nrows(), p.nrows()),
                    actual: k.shape(),
                });
            }
            k * p
        }
        ChannelSide::Cols => {
            if k.ncols() != p.ncols() {
                return Err(Error::ShapeMismatch {
                    expected: (k.nrows(), p.ncols()),
                    actual: k.shape(),
                });
            }
            p * k.transpose()
        }
    };
    DistributionMatrix::new(out.map(|x| x.max(0.0)))
}
