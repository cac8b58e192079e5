use super::chi2::chi_square_sf;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FriedmanError {
    #[error("need at least 2 blocks and 2 treatments, got {blocks}×{treatments}")]
    Shape { blocks: usize, treatments: usize },
    #[error("block {0} has a different number of treatments")]
    Ragged(usize),
    #[error("non-finite score in block {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Sum of within-block ranks per treatment.
    pub rank_sums: Vec<f64>,
    /// Every block was fully tied; the statistic is reported as 0, p as 1.
    pub degenerate: bool,
}

/// 1-based ranks, tied values sharing their mid-rank.
pub fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman rank test over a blocks × treatments score table. Ties within
/// a block get mid-ranks and the statistic is divided by the usual tie
/// correction; the p-value is the chi-square upper tail with K − 1 df.
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<FriedmanResult, FriedmanError> {
    let b = scores.len();
    let k = scores.first().map_or(0, Vec::len);
    if b < 2 || k < 2 {
        return Err(FriedmanError::Shape {
            blocks: b,
            treatments: k,
        });
    }
    let mut rank_sums = vec![0.0; k];
    let mut tie_sum = 0.0;
    for (i, block) in scores.iter().enumerate() {
        if block.len() != k {
            return Err(FriedmanError::Ragged(i));
        }
        if block.iter().any(|v| !v.is_finite()) {
            return Err(FriedmanError::NonFinite(i));
        }
        let ranks = rank_with_ties(block);
        for (sum, r) in rank_sums.iter_mut().zip(&ranks) {
            *sum += r;
        }
        tie_sum += tie_groups(block)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum::<f64>();
    }
    let (bf, kf) = (b as f64, k as f64);
    let correction = 1.0 - tie_sum / (bf * (kf * kf * kf - kf));
    let df = k - 1;
    if correction <= 0.0 {
        return Ok(FriedmanResult {
            statistic: 0.0,
            df,
            p_value: 1.0,
            rank_sums,
            degenerate: true,
        });
    }
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (bf * kf * (kf + 1.0)) * sum_sq - 3.0 * bf * (kf + 1.0);
    let statistic = (raw / correction).max(0.0);
    Ok(FriedmanResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
        rank_sums,
        degenerate: false,
    })
}

/// Sizes of groups of equal values (singletons included).
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            out.push(run);
            run = 1;
        }
    }
    out.push(run);
    out
}
