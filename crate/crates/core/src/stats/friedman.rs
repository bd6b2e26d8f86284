use super::special::chi2_sf;
use super::{average_ranks, TestMethod, TestResult};
use crate::{Error, Result};

/// Friedman test over `blocks` (rows), each holding one value per treatment.
///
/// Ranks within each block (average ranks on ties), then
/// `chi2 = 12 n / (k (k + 1)) * sum_j (mean_rank_j - (k + 1) / 2)^2`
/// with `k - 1` degrees of freedom.
pub fn friedman_test(blocks: &[Vec<f64>]) -> Result<TestResult> {
    let n = blocks.len();
    if n < 2 {
        return Err(Error::invalid("friedman test needs at least 2 blocks"));
    }
    let k = blocks[0].len();
    if k < 2 {
        return Err(Error::invalid("friedman test needs at least 2 treatments"));
    }
    if blocks.iter().any(|b| b.len() != k) {
        return Err(Error::invalid("every block needs one value per treatment"));
    }
    if blocks.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("friedman test values must be finite"));
    }
    let mut rank_sums = vec![0.0; k];
    for b in blocks {
        for (j, r) in average_ranks(b).into_iter().enumerate() {
            rank_sums[j] += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let centre = (kf + 1.0) / 2.0;
    let ss: f64 = rank_sums
        .iter()
        .map(|s| {
            let d = s / nf - centre;
            d * d
        })
        .sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * ss;
    let dof = (k - 1) as u32;
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, dof),
        dof: Some(dof),
        method: TestMethod::Friedman,
        n,
        degenerate: statistic == 0.0,
        zeros_dropped: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_orderings_two_blocks() {
        let r = friedman_test(&[vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-9);
        assert!((r.p_value - 0.1353).abs() < 1e-4);
        assert_eq!(r.dof, Some(2));
    }

    #[test]
    fn constant_blocks_have_no_effect() {
        let r = friedman_test(&[vec![2.0; 4], vec![7.0; 4]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shape_errors() {
        assert!(friedman_test(&[vec![1.0, 2.0]]).is_err());
        assert!(friedman_test(&[vec![1.0], vec![2.0]]).is_err());
        assert!(friedman_test(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }
}
