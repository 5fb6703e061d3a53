//! Screening-quality metrics and the conditional eigenvalue diagnostic.

use alloc::vec::Vec;

use crate::error::{contract, domain, Result};
use crate::screening::{RankBy, ScreenStatistics};

/// Per-replication result of one screening method.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplicationOutcome {
    pub mms: usize,
    /// Set when an active feature failed to converge and `mms` was forced
    /// to `|𝒟|`.
    pub mms_flagged: bool,
    pub selected_pi: Option<Vec<usize>>,
    pub selected_fdr: Option<Vec<usize>>,
    pub active_in_d: Vec<usize>,
}

/// Smallest `k` such that the first `k` entries of `ranking` contain every
/// feature in `active`: the largest 1-based rank among the actives.
pub fn minimum_model_size(ranking: &[usize], active: &[usize]) -> Result<usize> {
    if active.is_empty() {
        return Err(contract!("no active candidate features"));
    }
    let mut worst = 0;
    for &j in active {
        let rank = ranking
            .iter()
            .position(|&r| r == j)
            .ok_or_else(|| contract!("active feature {} is not among the ranked candidates", j))?;
        worst = worst.max(rank + 1);
    }
    Ok(worst)
}

/// MMS from screening statistics. If any active feature did not converge the
/// result is `(|𝒟|, true)`.
pub fn minimum_model_size_from(stats: &ScreenStatistics, by: RankBy, active: &[usize]) -> Result<(usize, bool)> {
    for &j in active {
        match stats.get(j) {
            None => return Err(contract!("active feature {} is not a candidate", j)),
            Some(f) if !f.converged => return Ok((stats.len(), true)),
            Some(_) => {}
        }
    }
    Ok((minimum_model_size(&stats.rank(by), active)?, false))
}

/// Linear-interpolation quantile of sorted values at 1-based position
/// `pos`, clamped to `[1, m]`.
fn interpolate(sorted: &[f64], pos: f64) -> f64 {
    let m = sorted.len();
    let pos = pos.clamp(1.0, m as f64);
    let lo = libm::floor(pos) as usize;
    let frac = pos - lo as f64;
    if lo >= m {
        sorted[m - 1]
    } else {
        sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
    }
}

/// Median and robust standard deviation (IQR / 1.34). Quartiles sit at
/// positions `(m+1)/4` and `3(m+1)/4`, the median at `(m+1)/2`, with linear
/// interpolation between order statistics.
pub fn summarize_mms(values: &[usize]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(contract!("no model sizes to summarize"));
    }
    let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let m1 = (v.len() + 1) as f64;
    let median = interpolate(&v, m1 / 2.0);
    let iqr = interpolate(&v, 0.75 * m1) - interpolate(&v, 0.25 * m1);
    Ok((median, iqr / 1.34))
}

/// `(|selected ∖ active|, |active ∖ selected|)`.
pub fn fp_fn(selected: &[usize], active: &[usize]) -> (usize, usize) {
    let fp = selected.iter().filter(|j| !active.contains(j)).count();
    let fneg = active.iter().filter(|j| !selected.contains(j)).count();
    (fp, fneg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenRatio {
    pub lam_unc: f64,
    pub lam_cond: f64,
    pub ratio: f64,
}

/// Largest eigenvalue of an equicorrelated `d`-block, unconditionally and
/// after conditioning on `q` further equicorrelated variables.
pub fn conditional_eigen_ratio(r: f64, q: usize, d: usize) -> Result<EigenRatio> {
    if !(0.0..1.0).contains(&r) {
        return Err(domain!("correlation must lie in [0, 1), got {}", r));
    }
    if d == 0 {
        return Err(domain!("d must be at least 1"));
    }
    let (q, d) = (q as f64, d as f64);
    let lam_unc = (1.0 - r) + r * d;
    let lam_cond = (1.0 - r) + r * d * ((1.0 - r) / (1.0 - r + r * q));
    Ok(EigenRatio {
        lam_unc,
        lam_cond,
        ratio: lam_unc / lam_cond,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mms_examples() {
        let ranking = vec![4, 2, 9, 8, 7, 6, 5];
        // ranks 3, 1, 7
        assert_eq!(minimum_model_size(&ranking, &[9, 4, 5]).unwrap(), 7);
        assert_eq!(minimum_model_size(&ranking, &[4]).unwrap(), 1);
        assert_eq!(minimum_model_size(&ranking, &ranking).unwrap(), 7);
        assert!(minimum_model_size(&ranking, &[1]).is_err());
        assert!(minimum_model_size(&ranking, &[]).is_err());
    }

    #[test]
    fn summaries() {
        assert_eq!(summarize_mms(&[1; 50]).unwrap(), (1.0, 0.0));
        assert_eq!(summarize_mms(&[1995; 7]).unwrap(), (1995.0, 0.0));
        // quartile positions 1.5 and 4.5 -> 1.5 and 4.5
        let (med, rsd) = summarize_mms(&[5, 3, 1, 4, 2]).unwrap();
        assert_eq!(med, 3.0);
        assert!((rsd - 3.0 / 1.34).abs() < 1e-15);
        assert_eq!(summarize_mms(&[2, 4]).unwrap().0, 3.0);
        assert_eq!(summarize_mms(&[7]).unwrap(), (7.0, 0.0));
        assert!(summarize_mms(&[]).is_err());
    }

    #[test]
    fn fp_fn_examples() {
        let d: Vec<usize> = (0..10).collect();
        let active = [2, 5];
        assert_eq!(fp_fn(&active, &active), (0, 0));
        assert_eq!(fp_fn(&[], &active), (0, 2));
        assert_eq!(fp_fn(&d, &active), (8, 0));
    }

    #[test]
    fn eigen_examples() {
        let e = conditional_eigen_ratio(0.5, 5, 1000).unwrap();
        assert_eq!(e.lam_unc, 500.5);
        assert!((e.lam_cond - (0.5 + 500.0 * (0.5 / 3.0))).abs() < 1e-12);
        let z = conditional_eigen_ratio(0.3, 0, 40).unwrap();
        assert_eq!(z.lam_cond, z.lam_unc);
        let one = conditional_eigen_ratio(0.0, 5, 1000).unwrap();
        assert_eq!((one.lam_unc, one.lam_cond, one.ratio), (1.0, 1.0, 1.0));
        assert!(conditional_eigen_ratio(1.0, 1, 1).is_err());
    }
}
