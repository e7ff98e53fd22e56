use crate::nn::Matrix;

fn log_posterior_positive(log_pos: f64, log_neg: f64) -> f64 {
    let m = log_pos.max(log_neg);
    let p = (log_pos - m).exp();
    let n = (log_neg - m).exp();
    p / (p + n)
}

fn class_rows(x: &Matrix, y: &[bool], positive: bool) -> Vec<usize> {
    (0..x.rows()).filter(|&i| y[i] == positive).collect()
}

/// Gaussian naive Bayes; every variance is inflated by
/// `var_smoothing · max feature variance`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// Index 0 = negative class, 1 = positive class.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

fn mean_var(x: &Matrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; x.cols()];
    for &i in rows {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; x.cols()];
    for &i in rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    (mean, var)
}

impl GaussianNb {
    pub(super) fn fit(x: &Matrix, y: &[bool], var_smoothing: f64) -> Self {
        let all: Vec<usize> = (0..x.rows()).collect();
        let (_, total_var) = mean_var(x, &all);
        let epsilon = var_smoothing * total_var.iter().cloned().fold(0.0, f64::max);
        // A constant matrix has zero variance everywhere; keep the density finite.
        let epsilon = if epsilon > 0.0 { epsilon } else { f64::MIN_POSITIVE.sqrt() };
        let fit_class = |positive: bool| {
            let rows = class_rows(x, y, positive);
            let (m, v) = mean_var(x, &rows);
            (rows.len() as f64 / x.rows() as f64, m, v.into_iter().map(|v| v + epsilon).collect::<Vec<_>>())
        };
        let (p0, m0, v0) = fit_class(false);
        let (p1, m1, v1) = fit_class(true);
        GaussianNb {
            priors: [p0, p1],
            means: [m0, m1],
            variances: [v0, v1],
        }
    }

    pub fn width(&self) -> usize {
        self.means[0].len()
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let mut s = self.priors[c].ln();
        for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            s -= 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / (2.0 * v);
        }
        s
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        log_posterior_positive(self.log_joint(1, row), self.log_joint(0, row))
    }
}

/// Bernoulli naive Bayes on features binarised as `x > binarize`, with
/// additive (Laplace) smoothing `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliNb {
    pub binarize: f64,
    pub priors: [f64; 2],
    /// `P(feature = 1 | class)`.
    pub rates: [Vec<f64>; 2],
}

impl BernoulliNb {
    pub(super) fn fit(x: &Matrix, y: &[bool], binarize: f64, alpha: f64) -> Self {
        let fit_class = |positive: bool| {
            let rows = class_rows(x, y, positive);
            let n = rows.len() as f64;
            let rates = (0..x.cols())
                .map(|j| {
                    let ones = rows.iter().filter(|&&i| x[(i, j)] > binarize).count() as f64;
                    (ones + alpha) / (n + 2.0 * alpha)
                })
                .collect::<Vec<_>>();
            (n / x.rows() as f64, rates)
        };
        let (p0, r0) = fit_class(false);
        let (p1, r1) = fit_class(true);
        BernoulliNb {
            binarize,
            priors: [p0, p1],
            rates: [r0, r1],
        }
    }

    pub fn width(&self) -> usize {
        self.rates[0].len()
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let mut s = self.priors[c].ln();
        for (x, p) in row.iter().zip(&self.rates[c]) {
            s += if *x > self.binarize { p.ln() } else { (1.0 - p).ln() };
        }
        s
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        log_posterior_positive(self.log_joint(1, row), self.log_joint(0, row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierKind;

    #[test]
    fn bernoulli_hand_posterior() {
        // positives: [1,1], [1,0]; negatives: [0,0], [0,1], [0,0]
        let x = Matrix::from_rows(&[vec![0.9, 0.8], vec![0.7, 0.1], vec![0.2, 0.3], vec![0.4, 0.6], vec![0.0, 0.0]]).unwrap();
        let y = [true, true, false, false, false];
        let model = ClassifierKind::bernoulli_nb().fit(&x, &y).unwrap();
        // P(f1=1|+) = 3/4, P(f2=1|+) = 2/4; P(f1=1|−) = 1/5, P(f2=1|−) = 2/5
        let q = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let pos = 0.4 * 0.75 * 0.5;
        let neg = 0.6 * 0.2 * 0.6;
        let s = model.score(&q).unwrap()[0];
        assert!((s - pos / (pos + neg)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_identical_classes_give_prior() {
        let x = Matrix::from_rows(&[vec![0.1], vec![0.5], vec![0.9], vec![0.1], vec![0.5], vec![0.9], vec![0.1], vec![0.5], vec![0.9]]).unwrap();
        let y = [true, true, true, false, false, false, false, false, false];
        let model = ClassifierKind::gaussian_nb().fit(&x, &y).unwrap();
        for s in model.score(&Matrix::from_rows(&[vec![0.0], vec![0.3], vec![2.0]]).unwrap()).unwrap() {
            assert!((s - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_hand_posterior() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![6.0]]).unwrap();
        let y = [true, true, false, false];
        let kind = ClassifierKind::GaussianNb { var_smoothing: 0.0 };
        let model = match kind.fit(&x, &y).unwrap() {
            crate::classifiers::Classifier::GaussianNb(m) => m,
            _ => unreachable!(),
        };
        // both classes: variance 1, means 1 and 5, equal priors
        let q = 2.5f64;
        let lp = -(q - 1.0).powi(2) / 2.0;
        let ln = -(q - 5.0).powi(2) / 2.0;
        let expected = lp.exp() / (lp.exp() + ln.exp());
        assert!((model.score_row(&[q]) - expected).abs() < 1e-12);
    }
}
