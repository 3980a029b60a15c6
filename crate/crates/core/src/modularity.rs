//! f-modularity: the dual objective between a frequency matrix `F` and a
//! null model `J`, maximized over low-rank distinguishers `D`.
//!
//! The estimator follows the plug-in route. The unconstrained maximizer
//! `D* = F / J` is computed entrywise, a rank is chosen from the singular
//! spectrum of `D*`, `D*` is replaced by a rank-`r` approximation `D_r`, and
//! the objective
//!
//! ```text
//! Σ_{u,v} ∂f(D_r[u,v])·F[u,v] − f*(∂f(D_r[u,v]))·J[u,v]
//! ```
//!
//! is reported. Two special cases live here as well: the TVD objective with
//! an unconstrained sign distinguisher, and Newman's modularity as the TVD
//! objective under a rank-one `s·sᵀ` constraint.

use std::sync::OnceLock;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::fdiv::DivergenceFamily;
use crate::lowrank::{nmf, residual_ratio, FactorMethod, NmfParams, Spectrum};
use crate::netcore::{null_model, null_model_of, FrequencyMatrix, NullVariant};
use crate::numeric::stable_sum;
use crate::Matrix;

/// Entries of `D_r` are floored here for families needing `D > 0`.
pub const DISTINGUISHER_FLOOR: f64 = 1e-9;

/// Floor applied to `D_r` for `family`. The Hellinger conjugate `√D − 1`
/// moves by `√δ` at `D = δ`, so its floor is squared to keep the shift at
/// the same scale as for the other families.
pub fn distinguisher_floor(family: DivergenceFamily) -> f64 {
    match family {
        DivergenceFamily::SquaredHellinger => DISTINGUISHER_FLOOR * DISTINGUISHER_FLOOR,
        _ => DISTINGUISHER_FLOOR,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svd,
    Nmf,
    /// NMF for families that need a positive distinguisher, SVD otherwise.
    #[default]
    Auto,
}

impl Method {
    pub fn resolve(self, family: DivergenceFamily) -> FactorMethod {
        match self {
            Method::Svd => FactorMethod::Svd,
            Method::Nmf => FactorMethod::Nmf,
            Method::Auto if family.requires_positive_distinguisher() => FactorMethod::Nmf,
            Method::Auto => FactorMethod::Svd,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" => Ok(Method::Svd),
            "nmf" => Ok(Method::Nmf),
            "auto" => Ok(Method::Auto),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub family: DivergenceFamily,
    pub theta: f64,
    pub epsilon: f64,
    pub rank_override: Option<usize>,
    pub method: Method,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let nmf = NmfParams::default();
        EstimatorConfig {
            family: DivergenceFamily::JensenShannon,
            theta: 0.9,
            epsilon: 1e-9,
            rank_override: None,
            method: Method::Auto,
            nmf_max_iter: nmf.max_iter,
            nmf_tol: nmf.tol,
            seed: nmf.seed,
        }
    }
}

impl EstimatorConfig {
    pub fn for_family(family: DivergenceFamily) -> Self {
        EstimatorConfig {
            family,
            ..Default::default()
        }
    }

    pub fn nmf_params(&self) -> NmfParams {
        NmfParams {
            max_iter: self.nmf_max_iter,
            tol: self.nmf_tol,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.rank_override == Some(0) {
            return Err(Error::invalid("rank override must be positive"));
        }
        if !(self.nmf_tol >= 0.0) {
            return Err(Error::invalid("nmf tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// How the reported distinguisher was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolvedMethod {
    Svd,
    Nmf,
    /// Closed-form sign distinguisher `sgn(F − J)` (TVD only).
    Sign,
}

impl From<FactorMethod> for ResolvedMethod {
    fn from(m: FactorMethod) -> Self {
        match m {
            FactorMethod::Svd => ResolvedMethod::Svd,
            FactorMethod::Nmf => ResolvedMethod::Nmf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl DistinguisherStats {
    fn of(d: &Matrix) -> Self {
        DistinguisherStats {
            min: d.min(),
            max: d.max(),
            mean: stable_sum(d.iter().copied()) / d.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularityReport {
    pub value: f64,
    pub rank_used: usize,
    pub residual_ratio: f64,
    pub family: DivergenceFamily,
    pub method: ResolvedMethod,
    pub distinguisher_stats: DistinguisherStats,
    /// The plug-in objective was negative and the all-ones distinguisher's
    /// score of 0 was reported instead.
    pub fallback_applied: bool,
}

/// `Σ ∂f(D)·F − f*(∂f(D))·J`.
pub fn dual_objective(family: DivergenceFamily, f: &Matrix, j: &Matrix, d: &Matrix) -> Result<f64> {
    check_shape(f.shape(), j.shape())?;
    check_shape(f.shape(), d.shape())?;
    let mut terms = Vec::with_capacity(2 * f.len());
    for ((&fv, &jv), &dv) in f.iter().zip(j.iter()).zip(d.iter()) {
        if family == DivergenceFamily::Tvd {
            terms.push(family.distinguisher(dv)? * (fv - jv));
        } else {
            terms.push(family.distinguisher(dv)? * fv);
            terms.push(-family.conjugate(dv)? * jv);
        }
    }
    Ok(stable_sum(terms))
}

/// `D*[u,v] = F[u,v] / max(J[u,v], ε)`.
pub fn optimal_distinguisher(f: &Matrix, j: &Matrix, epsilon: f64) -> Result<Matrix> {
    check_shape(f.shape(), j.shape())?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(f.zip_map(j, |fv, jv| fv / jv.max(epsilon)))
}

/// `max_S Σ S·(F − J)` over unconstrained sign matrices, i.e. `Σ |F − J|`.
pub fn tvd_modularity_unconstrained(f: &Matrix, j: &Matrix) -> Result<f64> {
    check_shape(f.shape(), j.shape())?;
    Ok(stable_sum(
        f.iter().zip(j.iter()).map(|(a, b)| (a - b).abs()),
    ))
}

/// `F`, its unbiased null model `J` and `D*`, shared by every family
/// evaluated on the same graph. The singular spectrum of `D*` is computed
/// on first use.
#[derive(Debug)]
pub struct PreparedGraph {
    f: Matrix,
    j: Matrix,
    d_star: Matrix,
    epsilon: f64,
    spectrum: OnceLock<Spectrum>,
}

impl PreparedGraph {
    pub fn new(fm: &FrequencyMatrix, epsilon: f64) -> Result<Self> {
        let j = null_model(fm)?.into_matrix();
        let f = fm.matrix().clone();
        let d_star = optimal_distinguisher(&f, &j, epsilon)?;
        Ok(PreparedGraph {
            f,
            j,
            d_star,
            epsilon,
            spectrum: OnceLock::new(),
        })
    }

    pub fn frequency(&self) -> &Matrix {
        &self.f
    }

    pub fn null(&self) -> &Matrix {
        &self.j
    }

    pub fn optimal_distinguisher(&self) -> &Matrix {
        &self.d_star
    }

    fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = Spectrum::compute(&self.d_star)?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    /// Runs the estimator. `cfg.epsilon` must match the one used to build
    /// the prepared graph.
    pub fn evaluate(&self, cfg: &EstimatorConfig) -> Result<ModularityReport> {
        cfg.validate()?;
        if cfg.epsilon != self.epsilon {
            return Err(Error::invalid(
                "config epsilon differs from the prepared graph's",
            ));
        }
        if cfg.family == DivergenceFamily::Tvd {
            return Ok(self.evaluate_tvd());
        }
        let spectrum = self.spectrum()?;
        let rank = match cfg.rank_override {
            Some(r) if r > spectrum.max_rank() => {
                return Err(Error::invalid(format!(
                    "rank override {r} exceeds {}",
                    spectrum.max_rank()
                )))
            }
            Some(r) => r,
            None => spectrum.select_rank(cfg.theta)?,
        };
        let method = cfg.method.resolve(cfg.family);
        let factors = match method {
            FactorMethod::Svd => spectrum.truncate(rank)?,
            FactorMethod::Nmf => nmf(&self.d_star, rank, &cfg.nmf_params())?,
        };
        let mut d_r = factors.reconstruct();
        let residual = residual_ratio(&self.d_star, &d_r)?;
        if cfg.family.requires_positive_distinguisher() {
            let floor = distinguisher_floor(cfg.family);
            d_r.apply(|x| *x = x.max(floor));
        }
        let raw = dual_objective(cfg.family, &self.f, &self.j, &d_r)?;
        Ok(ModularityReport {
            value: raw.max(0.0),
            rank_used: rank,
            residual_ratio: residual,
            family: cfg.family,
            method: method.into(),
            distinguisher_stats: DistinguisherStats::of(&d_r),
            fallback_applied: raw < 0.0,
        })
    }

    fn evaluate_tvd(&self) -> ModularityReport {
        let signs = self.f.zip_map(&self.j, |a, b| {
            if a > b {
                1.0
            } else if a < b {
                -1.0
            } else {
                0.0
            }
        });
        let value = stable_sum(self.f.iter().zip(self.j.iter()).map(|(a, b)| (a - b).abs()));
        ModularityReport {
            value,
            rank_used: self.f.nrows().min(self.f.ncols()),
            residual_ratio: 0.0,
            family: DivergenceFamily::Tvd,
            method: ResolvedMethod::Sign,
            distinguisher_stats: DistinguisherStats::of(&signs),
            fallback_applied: false,
        }
    }
}

pub fn f_modularity(fm: &FrequencyMatrix, cfg: &EstimatorConfig) -> Result<ModularityReport> {
    cfg.validate()?;
    PreparedGraph::new(fm, cfg.epsilon)?.evaluate(cfg)
}

/// Community assignment `g_v` with ids `0..k`, every id in use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    communities: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("partition is empty"));
        }
        let communities = labels.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; communities];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!(
                "community ids must be contiguous from 0; id {missing} is unused"
            )));
        }
        Ok(Partition {
            labels,
            communities,
        })
    }

    /// Renumbers arbitrary labels by order of first appearance.
    pub fn from_raw_labels<T: PartialEq + Clone>(raw: &[T]) -> Result<Self> {
        let mut seen: Vec<T> = Vec::new();
        let labels = raw
            .iter()
            .map(|x| match seen.iter().position(|s| s == x) {
                Some(i) => i,
                None => {
                    seen.push(x.clone());
                    seen.len() - 1
                }
            })
            .collect();
        Partition::new(labels)
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        Partition::from_raw_labels(signs)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn communities(&self) -> usize {
        self.communities
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn square_difference(fm: &FrequencyMatrix, variant: NullVariant) -> Result<Matrix> {
    let (rows, cols) = fm.shape();
    if rows != cols {
        return Err(Error::invalid(format!(
            "expected a square frequency matrix from an induced graph, got {rows}x{cols}"
        )));
    }
    let j = null_model_of(fm, variant)?;
    Ok(fm.matrix() - j.matrix())
}

/// `Q = Σ_{u,v} (F − J)[u,v]·δ(g_u, g_v)`.
pub fn newman_modularity(
    fm: &FrequencyMatrix,
    part: &Partition,
    variant: NullVariant,
) -> Result<f64> {
    let diff = square_difference(fm, variant)?;
    if part.len() != diff.nrows() {
        return Err(Error::invalid(format!(
            "partition covers {} vertices, graph has {}",
            part.len(),
            diff.nrows()
        )));
    }
    let g = part.labels();
    let mut terms = Vec::new();
    for v in 0..diff.ncols() {
        for u in 0..diff.nrows() {
            if g[u] == g[v] {
                terms.push(diff[(u, v)]);
            }
        }
    }
    Ok(stable_sum(terms))
}

/// `sᵀ(F − J)s` for a ±1 vector `s`.
pub fn two_community_objective(
    fm: &FrequencyMatrix,
    signs: &[i8],
    variant: NullVariant,
) -> Result<f64> {
    let diff = square_difference(fm, variant)?;
    check_signs(signs, diff.nrows())?;
    Ok(quadratic_form(&diff, signs))
}

fn check_signs(signs: &[i8], n: usize) -> Result<()> {
    if signs.len() != n {
        return Err(Error::invalid(format!(
            "sign vector has {} entries, expected {n}",
            signs.len()
        )));
    }
    if signs.iter().any(|s| *s != 1 && *s != -1) {
        return Err(Error::invalid("sign vector entries must be +1 or -1"));
    }
    Ok(())
}

fn quadratic_form(m: &Matrix, s: &[i8]) -> f64 {
    let mut terms = Vec::with_capacity(m.len());
    for v in 0..m.ncols() {
        for u in 0..m.nrows() {
            terms.push(m[(u, v)] * f64::from(s[u] * s[v]));
        }
    }
    stable_sum(terms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bipartition {
    /// `+1` / `−1` per vertex, normalized so the first vertex is `+1`.
    pub signs: Vec<i8>,
    pub objective: f64,
}

const SPECTRAL_STARTS: usize = 3;

/// Heuristic maximizer of `sᵀ(F − J)s` over `s ∈ {−1, 1}ⁿ`.
///
/// Starts from the sign patterns of the three leading eigenvectors and from
/// the trivial all-`+1` split. Each start is refined by vertex-moving passes: every
/// vertex is flipped once, always taking the best remaining flip even when
/// it lowers the objective, and the best intermediate state is kept. Passes
/// repeat until one brings no improvement, so the result is also a local
/// optimum under single flips.
pub fn tvd_bipartition(fm: &FrequencyMatrix, variant: NullVariant) -> Result<Bipartition> {
    if !fm.is_symmetric() {
        return Err(Error::invalid(
            "bipartition needs a symmetric (undirected) graph",
        ));
    }
    let diff = square_difference(fm, variant)?;

    let eigen = SymmetricEigen::new(diff.clone());
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut starts: Vec<Vec<i8>> = order
        .iter()
        .take(SPECTRAL_STARTS)
        .map(|&k| {
            eigen
                .eigenvectors
                .column(k)
                .iter()
                .map(|x| if *x >= 0.0 { 1 } else { -1 })
                .collect()
        })
        .collect();
    starts.push(vec![1i8; diff.nrows()]);

    let min_gain = 1e-13 * diff.iter().map(|x| x.abs()).sum::<f64>();
    let mut best: Option<Vec<i8>> = None;
    let mut best_value = f64::NEG_INFINITY;
    for start in starts {
        let s = refine(&diff, start, min_gain);
        let value = quadratic_form(&diff, &s);
        if value > best_value + min_gain {
            best_value = value;
            best = Some(s);
        }
    }
    let mut s = best.expect("at least one start");
    if s[0] < 0 {
        s.iter_mut().for_each(|x| *x = -*x);
    }
    let objective = quadratic_form(&diff, &s);
    Ok(Bipartition {
        signs: s,
        objective,
    })
}

fn refine(diff: &Matrix, mut s: Vec<i8>, min_gain: f64) -> Vec<i8> {
    let n = diff.nrows();
    // field[i] = Σ_j M[i,j]·s_j; flipping i changes the objective by
    // −4·s_i·(field[i] − M[i,i]·s_i).
    let mut field: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| diff[(i, j)] * f64::from(s[j])).sum())
        .collect();
    loop {
        let mut moved = vec![false; n];
        let mut flips = Vec::with_capacity(n);
        let (mut current, mut best, mut best_len) = (0.0, 0.0, 0);
        for _ in 0..n {
            let (i, gain) = (0..n)
                .filter(|&i| !moved[i])
                .map(|i| {
                    let si = f64::from(s[i]);
                    (i, -4.0 * si * (field[i] - diff[(i, i)] * si))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("an unmoved vertex remains");
            flip(diff, &mut s, &mut field, i);
            moved[i] = true;
            flips.push(i);
            current += gain;
            if current > best + min_gain {
                best = current;
                best_len = flips.len();
            }
        }
        for &i in flips[best_len..].iter().rev() {
            flip(diff, &mut s, &mut field, i);
        }
        if best_len == 0 {
            return s;
        }
    }
}

fn flip(diff: &Matrix, s: &mut [i8], field: &mut [f64], i: usize) {
    let old = f64::from(s[i]);
    s[i] = -s[i];
    for (j, fj) in field.iter_mut().enumerate() {
        *fj -= 2.0 * old * diff[(j, i)];
    }
}

/// Both sides of the Pearson rewriting as a weighted least-squares problem:
/// `Σ 2(D − 1)F − (D² − 1)J` and `−1 + Σ −J(D − F/J)² + F²/J`. They agree
/// whenever `F` and `J` each sum to one.
pub fn pearson_weighted_identity(f: &Matrix, j: &Matrix, d: &Matrix) -> Result<(f64, f64)> {
    check_shape(f.shape(), j.shape())?;
    check_shape(f.shape(), d.shape())?;
    if j.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::invalid("weighted form needs J > 0 in every cell"));
    }
    let lhs = dual_objective(DivergenceFamily::Pearson, f, j, d)?;
    let mut terms = vec![-1.0];
    for ((&fv, &jv), &dv) in f.iter().zip(j.iter()).zip(d.iter()) {
        let ratio = fv / jv;
        terms.push(-jv * (dv - ratio) * (dv - ratio));
        terms.push(fv * fv / jv);
    }
    Ok((lhs, stable_sum(terms)))
}
