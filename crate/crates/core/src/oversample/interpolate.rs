use log::warn;
use rand::Rng;

use crate::nn::Matrix;
use crate::{Error, Result};

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` rows of `data` (restricted to `candidates`) nearest to
/// `query`, excluding `exclude`. Ties go to the lower index.
pub fn nearest_neighbours(data: &Matrix, query: &[f64], candidates: &[usize], exclude: Option<usize>, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&i| Some(i) != exclude)
        .map(|&i| (squared_distance(query, data.row(i)), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// `x + λ (x_nn − x)`.
pub fn interpolate(x: &[f64], x_nn: &[f64], lambda: f64) -> Vec<f64> {
    x.iter().zip(x_nn).map(|(a, b)| a + lambda * (b - a)).collect()
}

fn minority_neighbour_table(minority: &Matrix, k: usize) -> Vec<Vec<usize>> {
    let all: Vec<usize> = (0..minority.rows()).collect();
    (0..minority.rows())
        .map(|i| nearest_neighbours(minority, minority.row(i), &all, Some(i), k))
        .collect()
}

fn check_minority(n: usize, k: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::Dataset(format!("interpolation needs at least 2 minority rows, got {n}")));
    }
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    Ok(k.min(n - 1))
}

/// SMOTE: `count` points, each between a uniformly chosen minority row and
/// one of its `k` nearest minority neighbours.
pub fn smote(minority: &Matrix, k: usize, count: usize, rng: &mut impl Rng) -> Result<Matrix> {
    let k = check_minority(minority.rows(), k)?;
    let table = minority_neighbour_table(minority, k);
    let mut out = Vec::with_capacity(count * minority.cols());
    for _ in 0..count {
        let i = rng.random_range(0..minority.rows());
        let nn = table[i][rng.random_range(0..table[i].len())];
        let lambda: f64 = rng.random();
        out.extend(interpolate(minority.row(i), minority.row(nn), lambda));
    }
    Matrix::from_vec(count, minority.cols(), out)
}

/// Splits `count` proportionally to `weights`, rounding by largest remainder
/// (ties to the lower index). The result always sums to `count`.
pub fn largest_remainder(weights: &[f64], count: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * count as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(count.saturating_sub(assigned)) {
        alloc[i] += 1;
    }
    alloc
}

/// Per-minority-row synthetic counts plus whether the uniform fallback was
/// used. `ratios[i]` is the majority fraction among row `i`'s neighbours.
pub fn adasyn_allocation(ratios: &[f64], count: usize) -> (Vec<usize>, bool) {
    if ratios.iter().all(|&r| r == 0.0) {
        warn!("no minority row has majority neighbours; ADASYN falls back to uniform allocation");
        return (largest_remainder(&vec![1.0; ratios.len()], count), true);
    }
    (largest_remainder(ratios, count), false)
}

/// Majority fraction among each minority row's `k` nearest neighbours in the
/// whole training set.
pub fn adasyn_ratios(features: &Matrix, labels: &[bool], k: usize) -> Result<Vec<f64>> {
    if features.rows() != labels.len() {
        return Err(Error::shape("adasyn", features.rows(), labels.len()));
    }
    let all: Vec<usize> = (0..features.rows()).collect();
    let k = k.min(features.rows() - 1);
    Ok((0..features.rows())
        .filter(|&i| labels[i])
        .map(|i| {
            let nn = nearest_neighbours(features, features.row(i), &all, Some(i), k);
            nn.iter().filter(|&&j| !labels[j]).count() as f64 / k as f64
        })
        .collect())
}

/// ADASYN: like SMOTE, but rows with more majority neighbours receive more of
/// the `count` synthetic points.
pub fn adasyn(features: &Matrix, labels: &[bool], k: usize, count: usize, rng: &mut impl Rng) -> Result<Matrix> {
    let minority_idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let minority = features.select_rows(&minority_idx);
    let k_min = check_minority(minority.rows(), k)?;
    let ratios = adasyn_ratios(features, labels, k)?;
    let (alloc, _) = adasyn_allocation(&ratios, count);
    let table = minority_neighbour_table(&minority, k_min);
    let mut out = Vec::with_capacity(count * features.cols());
    for (i, &g) in alloc.iter().enumerate() {
        for _ in 0..g {
            let nn = table[i][rng.random_range(0..table[i].len())];
            let lambda: f64 = rng.random();
            out.extend(interpolate(minority.row(i), minority.row(nn), lambda));
        }
    }
    Matrix::from_vec(count, features.cols(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn interpolation_hand_values() {
        assert_eq!(interpolate(&[0.3, 0.7], &[0.9, 0.1], 0.0), vec![0.3, 0.7]);
        assert_eq!(interpolate(&[0.0, 0.0], &[1.0, 1.0], 0.5), vec![0.5, 0.5]);
    }

    #[test]
    fn neighbours_break_ties_by_index() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![-1.0], vec![2.0]]).unwrap();
        assert_eq!(nearest_neighbours(&m, &[0.0], &[0, 1, 2, 3], Some(0), 2), vec![1, 2]);
    }

    #[test]
    fn smote_needs_two_rows() {
        let one = Matrix::zeros(1, 2);
        assert!(smote(&one, 5, 3, &mut seeded(0)).is_err());
    }

    #[test]
    fn smote_points_lie_on_segments() {
        let mut rng = seeded(1);
        let minority = Matrix::uniform(8, 3, 0.0, 1.0, &mut rng);
        let synth = smote(&minority, 5, 50, &mut rng).unwrap();
        for s in synth.to_rows() {
            let on_segment = (0..8).any(|i| {
                (0..8).filter(|&j| j != i).any(|j| {
                    let (a, b) = (minority.row(i), minority.row(j));
                    let denom: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
                    let lambda = a.iter().zip(b).zip(&s).map(|((x, y), v)| (v - x) * (y - x)).sum::<f64>() / denom;
                    (0.0..=1.0).contains(&lambda)
                        && interpolate(a, b, lambda).iter().zip(&s).all(|(p, v)| (p - v).abs() < 1e-9)
                })
            });
            assert!(on_segment, "{s:?}");
        }
    }

    #[test]
    fn largest_remainder_hand_case() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        // quotas 1.5, 0.75, 0.75: the two larger remainders win
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 3), vec![1, 1, 1]);
        assert_eq!(largest_remainder(&[0.5, 0.3, 0.2], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.0, 2.0], 5), vec![0, 5]);
    }

    #[test]
    fn adasyn_prefers_boundary_rows() {
        // Minority row 0 sits among majority rows; rows 1..4 form a tight cluster.
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.01, 1.0],
            vec![1.0, 1.01],
            vec![1.01, 1.01],
            vec![0.02, 0.0],
            vec![0.0, 0.02],
            vec![-0.02, 0.0],
            vec![0.0, -0.02],
        ];
        let labels = [true, true, true, true, true, false, false, false, false];
        let m = Matrix::from_rows(&rows).unwrap();
        let ratios = adasyn_ratios(&m, &labels, 3).unwrap();
        assert_eq!(ratios[0], 1.0);
        assert!(ratios[1..].iter().all(|&r| r == 0.0));
        let (alloc, fallback) = adasyn_allocation(&ratios, 7);
        assert_eq!(alloc, vec![7, 0, 0, 0, 0]);
        assert!(!fallback);
        let synth = adasyn(&m, &labels, 3, 7, &mut seeded(2)).unwrap();
        assert_eq!(synth.rows(), 7);
    }

    #[test]
    fn adasyn_interior_minority_falls_back() {
        let (alloc, fallback) = adasyn_allocation(&[0.0, 0.0, 0.0], 4);
        assert!(fallback);
        assert_eq!(alloc.iter().sum::<usize>(), 4);
    }

    proptest! {
        #[test]
        fn allocation_sums_and_is_monotone(weights in proptest::collection::vec(0.0f64..1.0, 1..20), count in 0usize..500) {
            let (alloc, _) = adasyn_allocation(&weights, count);
            prop_assert_eq!(alloc.iter().sum::<usize>(), count);
            if weights.iter().any(|&w| w > 0.0) {
                for i in 0..weights.len() {
                    for j in 0..weights.len() {
                        if weights[i] > weights[j] {
                            prop_assert!(alloc[i] >= alloc[j]);
                        }
                    }
                }
            }
        }

        #[test]
        fn smote_stays_in_bounding_box(seed in 0u64..500, n in 2usize..10, count in 0usize..30) {
            let mut rng = seeded(seed);
            let minority = Matrix::uniform(n, 3, 0.0, 1.0, &mut rng);
            let synth = smote(&minority, 5, count, &mut rng).unwrap();
            prop_assert_eq!(synth.rows(), count);
            for j in 0..3 {
                let col = minority.column(j);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for v in synth.column(j) {
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }
}
