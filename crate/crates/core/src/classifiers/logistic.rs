use crate::nn::{sigmoid_scalar, Matrix};

/// Full-batch gradient descent on the mean log-loss plus `l2/2 · ‖w‖²`,
/// starting from zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub(super) fn fit(x: &Matrix, y: &[bool], lr: f64, iterations: usize, l2: f64) -> Self {
        let (n, d) = x.shape();
        let mut model = LogisticRegression {
            weights: vec![0.0; d],
            bias: 0.0,
        };
        let mut grad_w = vec![0.0; d];
        for _ in 0..iterations {
            grad_w.fill(0.0);
            let mut grad_b = 0.0;
            for i in 0..n {
                let row = x.row(i);
                let err = model.score_row(row) - if y[i] { 1.0 } else { 0.0 };
                for (g, v) in grad_w.iter_mut().zip(row) {
                    *g += err * v / n as f64;
                }
                grad_b += err / n as f64;
            }
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w -= lr * (g + l2 * *w);
            }
            model.bias -= lr * grad_b;
        }
        model
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let z = self.bias + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>();
        sigmoid_scalar(z)
    }
}
