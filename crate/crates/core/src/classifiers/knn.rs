use crate::nn::Matrix;
use crate::oversample::nearest_neighbours;

/// Stores the training set; the score is the positive fraction among the `k`
/// nearest (Euclidean) training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub points: Matrix,
    pub labels: Vec<bool>,
}

impl Knn {
    pub(super) fn fit(x: &Matrix, y: &[bool], k: usize) -> Self {
        Knn {
            k: k.min(x.rows()),
            points: x.clone(),
            labels: y.to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.points.cols()
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.points.rows()).collect();
        let nn = nearest_neighbours(&self.points, row, &all, None, self.k);
        nn.iter().filter(|&&i| self.labels[i]).count() as f64 / nn.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use crate::classifiers::ClassifierKind;
    use crate::nn::Matrix;

    #[test]
    fn one_neighbour_copies_label() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let model = ClassifierKind::Knn { k: 1 }.fit(&x, &[true, false]).unwrap();
        assert_eq!(model.score(&Matrix::from_rows(&[vec![0.1, -0.1]]).unwrap()).unwrap(), vec![1.0]);
    }

    #[test]
    fn fraction_of_neighbours() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![0.3], vec![0.4], vec![5.0]]).unwrap();
        let model = ClassifierKind::knn().fit(&x, &[true, true, false, false, false, true]).unwrap();
        assert_eq!(model.score(&Matrix::from_rows(&[vec![0.2]]).unwrap()).unwrap(), vec![0.4]);
    }
}
