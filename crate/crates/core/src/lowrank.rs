//! Low-rank approximation: truncated SVD, NMF, residual ratios and
//! spectrum-based rank selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::numeric::{frobenius_sq, stable_sum};
use crate::Matrix;

/// Floor for the denominators of the multiplicative updates.
pub const NMF_DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorMethod {
    Svd,
    Nmf,
}

/// `left · rightᵀ`, with `left` of shape `rows × r` and `right` of shape
/// `cols × r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    left: Matrix,
    right: Matrix,
    method: FactorMethod,
}

impl LowRankFactors {
    pub fn left(&self) -> &Matrix {
        &self.left
    }

    pub fn right(&self) -> &Matrix {
        &self.right
    }

    pub fn method(&self) -> FactorMethod {
        self.method
    }

    /// Inner dimension `r`.
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.left * self.right.transpose()
    }
}

/// Singular value decomposition with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    u: Matrix,
    singular: Vec<f64>,
    v: Matrix,
    energy: f64,
}

impl Spectrum {
    pub fn compute(m: &Matrix) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::invalid("cannot decompose an empty matrix"));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("matrix has non-finite entries"));
        }
        let svd = m.clone().svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::domain("singular value decomposition failed")),
        };
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
        let v = Matrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
        let energy = stable_sum(singular.iter().map(|s| s * s));
        Ok(Spectrum {
            u,
            singular,
            v,
            energy,
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    pub fn max_rank(&self) -> usize {
        self.singular.len()
    }

    /// `Σ_{i>k} σ_i² / Σ σ_i²`: the squared-Frobenius residual fraction of the
    /// best rank-`k` approximation.
    pub fn tail_ratio(&self, k: usize) -> f64 {
        if self.energy == 0.0 {
            return 0.0;
        }
        let tail = stable_sum(self.singular.iter().skip(k).map(|s| s * s));
        tail / self.energy
    }

    /// Smallest `k ≥ 1` with `tail_ratio(k) < theta`.
    pub fn select_rank(&self, theta: f64) -> Result<usize> {
        check_theta(theta)?;
        if self.energy == 0.0 {
            return Err(Error::invalid("rank selection on an all-zero matrix"));
        }
        Ok((1..=self.max_rank())
            .find(|&k| self.tail_ratio(k) < theta)
            .unwrap_or(self.max_rank()))
    }

    pub fn truncate(&self, r: usize) -> Result<LowRankFactors> {
        check_rank(r, self.max_rank())?;
        let left = Matrix::from_fn(self.u.nrows(), r, |i, k| self.u[(i, k)] * self.singular[k]);
        let right = self.v.columns(0, r).into_owned();
        Ok(LowRankFactors {
            left,
            right,
            method: FactorMethod::Svd,
        })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "threshold must lie in (0, 1], got {theta}"
        )))
    }
}

fn check_rank(r: usize, max: usize) -> Result<()> {
    if r == 0 || r > max {
        Err(Error::invalid(format!("rank {r} outside 1..={max}")))
    } else {
        Ok(())
    }
}

/// Best rank-`r` approximation in Frobenius norm.
pub fn truncated_svd(m: &Matrix, r: usize) -> Result<LowRankFactors> {
    check_rank(r, m.nrows().min(m.ncols()))?;
    Spectrum::compute(m)?.truncate(r)
}

/// `‖M − M_k‖²_F / ‖M‖²_F`.
pub fn residual_ratio(m: &Matrix, approx: &Matrix) -> Result<f64> {
    check_shape(m.shape(), approx.shape())?;
    let norm = frobenius_sq(m);
    if norm == 0.0 {
        return Err(Error::invalid("residual ratio of an all-zero matrix"));
    }
    Ok(frobenius_sq(&(m - approx)) / norm)
}

pub fn select_rank(m: &Matrix, theta: f64) -> Result<usize> {
    check_theta(theta)?;
    Spectrum::compute(m)?.select_rank(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfParams {
    pub max_iter: usize,
    /// Stop once the relative decrease of the objective falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfParams {
    fn default() -> Self {
        NmfParams {
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

pub fn nmf(m: &Matrix, r: usize, params: &NmfParams) -> Result<LowRankFactors> {
    nmf_traced(m, r, params).map(|(factors, _)| factors)
}

/// Lee–Seung multiplicative updates for `min ‖M − W·Hᵀ‖²_F` over `W, H ≥ 0`.
/// Also returns the objective after initialization and after every sweep.
pub fn nmf_traced(m: &Matrix, r: usize, params: &NmfParams) -> Result<(LowRankFactors, Vec<f64>)> {
    check_rank(r, m.nrows().min(m.ncols()))?;
    if let Some(bad) = m.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!(
            "NMF needs a finite nonnegative matrix, found {bad}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = Matrix::from_fn(m.nrows(), r, |_, _| 1.0 - rng.random::<f64>());
    let mut h = Matrix::from_fn(m.ncols(), r, |_, _| 1.0 - rng.random::<f64>());

    let objective = |w: &Matrix, h: &Matrix| frobenius_sq(&(m - w * h.transpose()));
    let mut history = vec![objective(&w, &h)];
    let m_t = m.transpose();

    for _ in 0..params.max_iter {
        let numer = m * &h;
        let denom = &w * (h.transpose() * &h);
        w.zip_zip_apply(&numer, &denom, |x, n, d| {
            *x *= n / d.max(NMF_DENOMINATOR_FLOOR)
        });

        let numer = &m_t * &w;
        let denom = &h * (w.transpose() * &w);
        h.zip_zip_apply(&numer, &denom, |x, n, d| {
            *x *= n / d.max(NMF_DENOMINATOR_FLOOR)
        });

        let prev = *history.last().expect("history starts non-empty");
        let obj = objective(&w, &h);
        history.push(obj);
        if obj == 0.0 || (prev - obj) / prev < params.tol {
            break;
        }
    }
    Ok((
        LowRankFactors {
            left: w,
            right: h,
            method: FactorMethod::Nmf,
        },
        history,
    ))
}
