//! Block-parallel MCD: split the standardized rows into blocks, fit each
//! block, pool the fits that agree best with the entry-wise median fit, and
//! reweight against the pooled raw estimate.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::LocationScatter;
use crate::matrix::{canonical_order, DataMatrix};
use crate::mcd::{
    consistency_factor, detmcd_block, h_from_fraction, reweight, subset_moments, RawEstimate,
    REWEIGHT_QUANTILE,
};
use crate::rng::Rng;
use crate::scale::{destandardize_estimate, fit_standardizer, median, standardize};
use crate::special::chi2_quantile;

/// Upper bound on the automatic block count.
pub const MAX_AUTO_BLOCKS: usize = 8;

/// Smallest block allowed when splitting into more than one block.
pub fn min_block_size(p: usize) -> usize {
    (2 * (p + 1)).max(20)
}

/// Automatic block count: min(8, ⌊n / (20p)⌋), at least 1, and small enough
/// that every block reaches [`min_block_size`].
pub fn default_block_count(n: usize, p: usize) -> usize {
    let q = (n / (20 * p.max(1))).clamp(1, MAX_AUTO_BLOCKS);
    q.min(n / min_block_size(p)).max(1)
}

/// Assignment of (shuffled) rows to contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    order: Vec<usize>,
    ranges: Vec<Range<usize>>,
}

impl BlockPlan {
    pub fn q(&self) -> usize {
        self.ranges.len()
    }

    /// Row indices of block `b`.
    pub fn block(&self, b: usize) -> &[usize] {
        &self.order[self.ranges[b].clone()]
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

/// Shuffles `0..n` with `rng` and cuts it into `q` near-equal contiguous blocks
/// (the first `n mod q` blocks get one extra row).
pub fn split_blocks(n: usize, p: usize, q: usize, rng: &mut Rng) -> Result<BlockPlan> {
    if q == 0 {
        return Err(Error::ConfigError("block count must be at least 1".into()));
    }
    let min = min_block_size(p);
    if (q > 1 && n < q * min) || n < q {
        return Err(Error::BlocksTooSmall { n, q, min });
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let (base, extra) = (n / q, n % q);
    let mut ranges = Vec::with_capacity(q);
    let mut start = 0;
    for b in 0..q {
        let len = base + usize::from(b < extra);
        ranges.push(start..start + len);
        start += len;
    }
    Ok(BlockPlan { order, ranges })
}

/// Entry-wise median of the block locations and scatters.
///
/// The median scatter is symmetric by construction but need not be positive definite.
pub fn median_pool(estimates: &[RawEstimate]) -> (DVector<f64>, DMatrix<f64>) {
    assert!(
        !estimates.is_empty(),
        "median_pool needs at least one estimate"
    );
    let p = estimates[0].loc_scat.dim();
    let mut buf = Vec::with_capacity(estimates.len());
    let mut entry = |f: &dyn Fn(&RawEstimate) -> f64| {
        buf.clear();
        buf.extend(estimates.iter().map(f));
        median(&mut buf)
    };
    let mu = DVector::from_fn(p, |j, _| entry(&|e| e.loc_scat.mu()[j]));
    let mut sigma = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in 0..=j {
            let v = entry(&|e| e.loc_scat.sigma()[(j, k)]);
            sigma[(j, k)] = v;
            sigma[(k, j)] = v;
        }
    }
    (mu, sigma)
}

/// KL deviation of (A, a) from the Gaussian fit `b`:
/// trace(A·B⁻¹ − I) − ln|A·B⁻¹| + (a−b)ᵀB⁻¹(a−b). Infinite when |A·B⁻¹| ≤ 0.
pub(crate) fn kl_deviation_from(
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    b: &LocationScatter,
) -> f64 {
    let p = b.dim();
    let det_a = a_mat.clone().lu().determinant();
    if !(det_a > 0.0) {
        return f64::INFINITY;
    }
    let prec = b.precision();
    let trace: f64 = a_mat
        .iter()
        .zip(prec.iter())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        - p as f64;
    let log_det_ratio = det_a.ln() - b.log_det();
    trace - log_det_ratio + b.mahalanobis_sq(a_vec.as_slice())
}

pub fn kl_deviation(
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    b_mat: &DMatrix<f64>,
    b_vec: &DVector<f64>,
) -> Result<f64> {
    if a_mat.nrows() != b_mat.nrows() || a_vec.len() != b_vec.len() || a_vec.len() != a_mat.nrows()
    {
        return Err(Error::DimensionMismatch {
            expected: b_mat.nrows(),
            found: a_mat.nrows(),
        });
    }
    let b = LocationScatter::new(b_vec.clone(), b_mat.clone())?;
    Ok(kl_deviation_from(a_mat, a_vec, &b))
}

/// Count, mean and centered scatter of a set of rows; merges exactly in one pass.
#[derive(Debug, Clone)]
struct SufficientStats {
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl SufficientStats {
    fn merge(self, other: SufficientStats) -> SufficientStats {
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = &other.mean - &self.mean;
        let mean = &self.mean + &delta * (nb / n as f64);
        let scatter =
            self.scatter + other.scatter + &delta * delta.transpose() * (na * nb / n as f64);
        SufficientStats {
            count: n,
            mean,
            scatter,
        }
    }
}

/// Raw pooled estimate of the selected blocks.
#[derive(Debug, Clone)]
pub struct PooledRaw {
    pub loc_scat: LocationScatter,
    /// Selected block ids (0-based), ascending.
    pub contributing_blocks: Vec<usize>,
    pub pooled_count: usize,
    /// KL deviation of the median fit from each block fit, by block id.
    pub kl: Vec<f64>,
}

/// Selects the ⌊q/2⌋ blocks (at least one) whose fits deviate least from the
/// entry-wise median fit and pools their h-subsets.
///
/// `estimates[b]` must be the fit on `plan.block(b)`, with subset indices local to that block.
pub fn select_and_pool(
    z: &DataMatrix,
    plan: &BlockPlan,
    estimates: &[RawEstimate],
) -> Result<PooledRaw> {
    let q = plan.q();
    if estimates.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: estimates.len(),
        });
    }
    let p = z.n_cols();
    let (mu_med, sigma_med) = median_pool(estimates);
    let kl: Vec<f64> = estimates
        .iter()
        .map(|e| kl_deviation_from(&sigma_med, &mu_med, &e.loc_scat))
        .collect();
    let mut ranked: Vec<usize> = (0..q).collect();
    ranked.sort_by(|&a, &b| kl[a].total_cmp(&kl[b]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = ranked[..(q / 2).max(1)].to_vec();
    selected.sort_unstable();

    let mut pooled: Option<SufficientStats> = None;
    let mut n_total = 0;
    for &b in &selected {
        let rows = plan.block(b);
        n_total += rows.len();
        let global = estimates[b].subset.indices().iter().map(|&i| rows[i]);
        let (count, mean, scatter) = subset_moments(z, global);
        let stats = SufficientStats {
            count,
            mean,
            scatter,
        };
        pooled = Some(match pooled {
            None => stats,
            Some(acc) => acc.merge(stats),
        });
    }
    let stats = pooled.expect("at least one block selected");
    let m = stats.count;
    let c = consistency_factor(m, n_total, p);
    let loc_scat = LocationScatter::new(stats.mean, stats.scatter * (c / (m - 1) as f64))?;
    Ok(PooledRaw {
        loc_scat,
        contributing_blocks: selected,
        pooled_count: m,
        kl,
    })
}

#[derive(Debug, Clone)]
pub struct RtDiagnostics {
    pub q: usize,
    pub block_sizes: Vec<usize>,
    /// ln det of the plain h-subset covariance of each block fit.
    pub block_log_dets: Vec<f64>,
    pub kl: Vec<f64>,
    pub selected: Vec<usize>,
    pub pooled_count: usize,
    pub inliers: usize,
}

#[derive(Debug, Clone)]
pub struct RtDetMcdFit {
    /// Reweighted estimate in original coordinates.
    pub estimate: LocationScatter,
    /// Pooled raw estimate in original coordinates.
    pub raw: LocationScatter,
    /// Final inlier flags (RD² ≤ χ²_{p,0.975} under the reweighted estimate), in input row order.
    pub weights: Vec<bool>,
    pub diagnostics: RtDiagnostics,
}

/// Full pipeline: standardize, split, per-block DetMCD, median pooling,
/// KL-based selection, pooling, reweighting, destandardize.
///
/// Block fits run in parallel; results are merged by block id, so the output
/// depends only on the data, `h_frac`, `q` and the rng state.
pub fn rt_detmcd(x: &DataMatrix, h_frac: f64, q: usize, rng: &mut Rng) -> Result<RtDetMcdFit> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if n <= 2 * p {
        return Err(Error::TooFewObservations { n, p });
    }
    let standardizer = fit_standardizer(x)?;
    let z = standardize(x, &standardizer)?;
    let canon = canonical_order(&z);
    let zc = z.select_rows(&canon);

    let plan = split_blocks(n, p, q, rng)?;
    let estimates: Vec<RawEstimate> = (0..plan.q())
        .into_par_iter()
        .map(|b| {
            let zb = zc.select_rows(plan.block(b));
            let h = h_from_fraction(zb.n_rows(), p, h_frac)?;
            detmcd_block(&zb, h)
        })
        .collect::<Result<_>>()?;

    let pooled = select_and_pool(&zc, &plan, &estimates)?;
    let (rew, _) = reweight(&zc, &pooled.loc_scat)?;

    let cutoff = chi2_quantile(p as u32, REWEIGHT_QUANTILE)?;
    let mut weights = vec![false; n];
    for (i, r) in zc.rows().enumerate() {
        weights[canon[i]] = rew.mahalanobis_sq(r) <= cutoff;
    }
    let inliers = weights.iter().filter(|&&w| w).count();

    Ok(RtDetMcdFit {
        estimate: destandardize_estimate(&rew, &standardizer)?,
        raw: destandardize_estimate(&pooled.loc_scat, &standardizer)?,
        weights,
        diagnostics: RtDiagnostics {
            q: plan.q(),
            block_sizes: plan.block_sizes(),
            block_log_dets: estimates.iter().map(|e| e.log_det_uncorrected).collect(),
            kl: pooled.kl,
            selected: pooled.contributing_blocks,
            pooled_count: pooled.pooled_count,
            inliers,
        },
    })
}
