//! Small statistics helpers for benchmark comparisons: exact two-sided
//! Wilcoxon signed-rank test for paired samples and a least-squares trend
//! slope.

/// Mean of a slice; 0 for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Slope of the least-squares line through (0, ys[0]), (1, ys[1]), ...
pub fn lsq_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n as f64 - 1.0) / 2.0;
    let ym = mean(ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        num += dx * (y - ym);
        den += dx * dx;
    }
    num / den
}

/// Exact two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped; ties among |d| get average ranks. The
/// p-value is exact under the sign-randomization null: the distribution of
/// the positive rank sum is computed by dynamic programming over all 2^n
/// sign assignments (ranks doubled so average ranks stay integral). Returns
/// p = 1 when every pair is tied.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples must align");
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return 1.0;
    }
    // Rank |d| ascending with average ranks, then double to stay integral.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut ranks2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j share rank (i+1 + j+1)/2; doubled: (i + j + 2).
        let rank2 = (i + j + 2) as u64;
        for &idx in &order[i..=j] {
            ranks2[idx] = rank2;
        }
        i = j + 1;
    }
    let w_pos2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_neg2 = total2 - w_pos2;

    // P(W2 = s) over random signs: dp over achievable doubled rank sums.
    let mut dp = vec![0.0f64; total2 as usize + 1];
    dp[0] = 1.0;
    for &r in &ranks2 {
        for s in (r as usize..dp.len()).rev() {
            dp[s] = 0.5 * (dp[s] + dp[s - r as usize]);
        }
        for s in 0..(r as usize).min(dp.len()) {
            dp[s] *= 0.5;
        }
    }
    let lo = w_pos2.min(w_neg2);
    let hi = w_pos2.max(w_neg2);
    let p: f64 = dp[..=lo as usize].iter().sum::<f64>()
        + dp[hi as usize..].iter().sum::<f64>();
    p.min(1.0)
}
