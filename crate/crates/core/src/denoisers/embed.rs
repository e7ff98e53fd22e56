use crate::nn::Matrix;

/// Sinusoidal embedding: entry `2i` is `sin(t / 10000^(2i/d))`, entry `2i+1`
/// the matching cosine.
pub fn timestep_embed(t: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    let t = t as f64;
    for i in (0..d).step_by(2) {
        let freq = 10000f64.powf(i as f64 / d as f64);
        out[i] = (t / freq).sin();
        if i + 1 < d {
            out[i + 1] = (t / freq).cos();
        }
    }
    out
}

pub fn timestep_embed_batch(t: &[usize], d: usize) -> Matrix {
    let mut m = Matrix::zeros(t.len(), d);
    for (i, &step) in t.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&timestep_embed(step, d));
    }
    m
}
