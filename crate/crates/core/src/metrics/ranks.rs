use super::{average_ranks, chi2_survival};
use crate::{Error, Result};

/// Studentised-range critical values `q_0.05 / sqrt(2)` for k = 2..=10.
pub const NEMENYI_Q05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

/// Per-dataset ranks of a metric matrix (rows = datasets, columns = methods).
/// The best value gets rank `k`; ties share their average rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
}

impl RankTable {
    pub fn datasets(&self) -> usize {
        self.ranks.len()
    }

    pub fn methods(&self) -> usize {
        self.mean_ranks.len()
    }
}

pub fn mean_ranks(values: &[Vec<f64>], higher_better: bool) -> Result<RankTable> {
    let n = values.len();
    let k = values.first().map_or(0, Vec::len);
    if n == 0 || k == 0 {
        return Err(Error::Dataset("rank table needs at least one dataset and one method".into()));
    }
    let mut ranks = Vec::with_capacity(n);
    for (i, row) in values.iter().enumerate() {
        if row.len() != k {
            return Err(Error::shape("rank table row", k, format!("{} in row {i}", row.len())));
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite(format!("rank table row {i}")));
        }
        let oriented: Vec<f64> = if higher_better { row.clone() } else { row.iter().map(|v| -v).collect() };
        ranks.push(average_ranks(&oriented));
    }
    let mean_ranks = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    Ok(RankTable { ranks, mean_ranks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub p_value: f64,
    pub df: usize,
}

/// `χ² = 12N / (k(k+1)) · (Σ R̄_j² − k(k+1)²/4)` with `k − 1` degrees of freedom.
pub fn friedman(table: &RankTable) -> Result<FriedmanResult> {
    let n = table.datasets();
    let k = table.methods();
    if n < 2 || k < 3 {
        return Err(Error::Dataset(format!("Friedman test needs N >= 2 and k >= 3, got N = {n}, k = {k}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = table.mean_ranks.iter().map(|r| r * r).sum();
    let chi2 = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    Ok(FriedmanResult {
        chi2,
        p_value: chi2_survival(chi2, k - 1)?,
        df: k - 1,
    })
}

/// Nemenyi critical difference `q_α · sqrt(k(k+1) / (6N))`; only α = 0.05.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if (alpha - 0.05).abs() > 1e-12 {
        return Err(Error::Config(format!("only alpha = 0.05 is tabulated, got {alpha}")));
    }
    if !(2..=10).contains(&k) {
        return Err(Error::Config(format!("Nemenyi constants cover 2 to 10 methods, got {k}")));
    }
    if n == 0 {
        return Err(Error::Config("Nemenyi test needs at least one dataset".into()));
    }
    let (kf, nf) = (k as f64, n as f64);
    Ok(NEMENYI_Q05[k - 2] * (kf * (kf + 1.0) / (6.0 * nf)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn rank_orientation_and_ties() {
        let t = mean_ranks(&[vec![0.5, 0.5, 0.5]], true).unwrap();
        assert_eq!(t.mean_ranks, vec![2.0, 2.0, 2.0]);
        let t = mean_ranks(&[vec![0.9, 0.1], vec![0.8, 0.7]], true).unwrap();
        assert_eq!(t.mean_ranks, vec![2.0, 1.0]);
        let t = mean_ranks(&[vec![0.9, 0.1]], false).unwrap();
        assert_eq!(t.mean_ranks, vec![1.0, 2.0]);
        assert!(mean_ranks(&[vec![1.0, 2.0], vec![1.0]], true).is_err());
    }

    #[test]
    fn friedman_hand_values() {
        let same = mean_ranks(&[vec![0.3; 4], vec![0.7; 4]], true).unwrap();
        let r = friedman(&same).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p_value, 1.0);
        let strict = mean_ranks(&[vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]], true).unwrap();
        let r = friedman(&strict).unwrap();
        assert!((r.chi2 - 4.0).abs() < 1e-12);
        assert!((r.p_value - (-2.0f64).exp()).abs() < 1e-10);
        assert!(friedman(&mean_ranks(&[vec![1.0, 2.0], vec![2.0, 1.0]], true).unwrap()).is_err());
    }

    #[test]
    fn nemenyi_hand_values() {
        assert!((nemenyi_cd(10, 20, 0.05).unwrap() - 3.029).abs() < 0.01);
        assert!((nemenyi_cd(2, 1, 0.05).unwrap() - 1.960).abs() < 1e-12);
        assert!(nemenyi_cd(2, 1_000_000, 0.05).unwrap() < 0.01);
        assert!(nemenyi_cd(11, 5, 0.05).is_err());
        assert!(nemenyi_cd(5, 5, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn rank_invariants(seed in 0u64..500, n in 2usize..8, k in 3usize..8) {
            let mut rng = seeded(seed);
            let values: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| (rng.random::<f64>() * 4.0).round()).collect()).collect();
            let up = mean_ranks(&values, true).unwrap();
            for r in &up.ranks {
                prop_assert!((r.iter().sum::<f64>() - (k * (k + 1)) as f64 / 2.0).abs() < 1e-9);
            }
            let avg = up.mean_ranks.iter().sum::<f64>() / k as f64;
            prop_assert!((avg - (k + 1) as f64 / 2.0).abs() < 1e-9);
            let down = mean_ranks(&values, false).unwrap();
            let a = friedman(&up).unwrap();
            let b = friedman(&down).unwrap();
            prop_assert!((a.chi2 - b.chi2).abs() < 1e-9);
            prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
        }
    }
}
