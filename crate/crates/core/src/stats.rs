//! Rank statistics.

use crate::error::{domain, Error, Result};

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("samples of length {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(domain("correlation needs at least two samples"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(domain("correlation is undefined for a constant sample"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(domain("rank correlation of NaN values"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Rank by counting: r_i = 1 + #{v < x_i} + (#{v == x_i} - 1) / 2.
    fn counting_ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|x| {
                let less = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                1.0 + less + (equal - 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn monotone_maps_give_unit_correlation() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let z: Vec<f64> = x.iter().map(|v| -v * v).collect();
        assert!((spearman(&x, &z).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_ties_closed_form() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 5.0];
        // 1 - 6 * sum d^2 / (n (n^2 - 1)) with sum d^2 = 4.
        assert!((spearman(&x, &y).unwrap() - (1.0 - 24.0 / 120.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(spearman(&[1.0], &[2.0]).is_err());
        assert!(spearman(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[2.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_counting_oracle(pairs in prop::collection::vec((0u8..20, 0u8..20), 3..80)) {
            let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            prop_assert_eq!(average_ranks(&x), counting_ranks(&x));
            if let Ok(r) = spearman(&x, &y) {
                let oracle = pearson(&counting_ranks(&x), &counting_ranks(&y)).unwrap();
                prop_assert!((r - oracle).abs() < 1e-12);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            }
        }
    }
}
