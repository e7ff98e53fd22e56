use rand::Rng;

use crate::nn::{glorot_bound, Layer, Matrix, Mode, Param};
use crate::{Error, Result};

struct Cache {
    tokens: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Attention weights, `[sample][head]` blocks of `n_tokens × n_tokens`.
    weights: Vec<f64>,
    concat: Matrix,
}

/// Multi-head self-attention across the tokens of a single sample.
///
/// Each `d_hidden`-wide row is viewed as `n_tokens` tokens of width
/// `d_tok = d_hidden / n_tokens`. Heads own contiguous `d_head`-wide column
/// blocks of the query/key/value projections; head outputs are concatenated
/// and passed through the output projection. Rows never attend to each other.
pub struct MultiHeadSelfAttention {
    pub n_tokens: usize,
    pub n_heads: usize,
    pub w_q: Param,
    pub w_k: Param,
    pub w_v: Param,
    pub w_o: Param,
    cache: Option<Cache>,
}

impl std::fmt::Debug for MultiHeadSelfAttention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiHeadSelfAttention")
            .field("n_tokens", &self.n_tokens)
            .field("n_heads", &self.n_heads)
            .field("d_tok", &self.d_tok())
            .finish()
    }
}

impl Clone for MultiHeadSelfAttention {
    fn clone(&self) -> Self {
        MultiHeadSelfAttention {
            n_tokens: self.n_tokens,
            n_heads: self.n_heads,
            w_q: self.w_q.clone(),
            w_k: self.w_k.clone(),
            w_v: self.w_v.clone(),
            w_o: self.w_o.clone(),
            cache: None,
        }
    }
}

impl MultiHeadSelfAttention {
    pub fn new(name: &str, d_hidden: usize, n_tokens: usize, n_heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if n_tokens == 0 || d_hidden % n_tokens != 0 {
            return Err(Error::Config(format!("d_hidden {d_hidden} is not divisible by n_tokens {n_tokens}")));
        }
        let d_tok = d_hidden / n_tokens;
        if n_heads == 0 || d_tok % n_heads != 0 {
            return Err(Error::Config(format!("token width {d_tok} is not divisible by n_heads {n_heads}")));
        }
        let bound = glorot_bound(d_tok, d_tok);
        let mut init = |suffix: &str| Param::new(format!("{name}.{suffix}"), Matrix::uniform(d_tok, d_tok, -bound, bound, rng));
        Ok(MultiHeadSelfAttention {
            n_tokens,
            n_heads,
            w_q: init("w_q"),
            w_k: init("w_k"),
            w_v: init("w_v"),
            w_o: init("w_o"),
            cache: None,
        })
    }

    pub fn d_tok(&self) -> usize {
        self.w_q.value.rows()
    }

    pub fn d_head(&self) -> usize {
        self.d_tok() / self.n_heads
    }

    pub fn d_hidden(&self) -> usize {
        self.d_tok() * self.n_tokens
    }

    fn scale(&self) -> f64 {
        1.0 / (self.d_head() as f64).sqrt()
    }
}

impl Layer for MultiHeadSelfAttention {
    fn forward(&mut self, x: &Matrix, _mode: Mode) -> Result<Matrix> {
        if x.cols() != self.d_hidden() {
            return Err(Error::shape("mhsa", self.d_hidden(), x.cols()));
        }
        let (n, nt, dt, dh, nh) = (x.rows(), self.n_tokens, self.d_tok(), self.d_head(), self.n_heads);
        let scale = self.scale();
        // Row-major n × (nt·dt) is bit-identical to (n·nt) × dt.
        let tokens = Matrix::from_vec(n * nt, dt, x.data().to_vec())?;
        let q = tokens.matmul(&self.w_q.value)?;
        let k = tokens.matmul(&self.w_k.value)?;
        let v = tokens.matmul(&self.w_v.value)?;
        let mut weights = vec![0.0; n * nh * nt * nt];
        let mut concat = Matrix::zeros(n * nt, dt);
        for s in 0..n {
            for h in 0..nh {
                let col = h * dh;
                let block = &mut weights[(s * nh + h) * nt * nt..(s * nh + h + 1) * nt * nt];
                for i in 0..nt {
                    let qi = &q.row(s * nt + i)[col..col + dh];
                    let row = &mut block[i * nt..(i + 1) * nt];
                    for (j, w) in row.iter_mut().enumerate() {
                        let kj = &k.row(s * nt + j)[col..col + dh];
                        *w = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                    }
                    crate::nn::softmax_in_place(row);
                    let out = &mut concat.row_mut(s * nt + i)[col..col + dh];
                    for (j, &w) in row.iter().enumerate() {
                        let vj = &v.row(s * nt + j)[col..col + dh];
                        for (o, &vv) in out.iter_mut().zip(vj) {
                            *o += w * vv;
                        }
                    }
                }
            }
        }
        let out = concat.matmul(&self.w_o.value)?;
        let y = Matrix::from_vec(n, nt * dt, out.into_vec())?;
        y.ensure_finite("mhsa output")?;
        self.cache = Some(Cache {
            tokens,
            q,
            k,
            v,
            weights,
            concat,
        });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Config("mhsa backward before forward".into()))?;
        let (nt, dt, dh, nh) = (self.n_tokens, self.d_tok(), self.d_head(), self.n_heads);
        let n = cache.tokens.rows() / nt;
        if grad_out.shape() != (n, nt * dt) {
            return Err(Error::shape("mhsa_backward", format!("{n}x{}", nt * dt), format!("{:?}", grad_out.shape())));
        }
        let scale = self.scale();
        let d_out = Matrix::from_vec(n * nt, dt, grad_out.data().to_vec())?;
        self.w_o.grad.add_assign(&cache.concat.t_matmul(&d_out)?)?;
        let d_concat = d_out.matmul_t(&self.w_o.value)?;

        let mut dq = Matrix::zeros(n * nt, dt);
        let mut dk = Matrix::zeros(n * nt, dt);
        let mut dv = Matrix::zeros(n * nt, dt);
        let mut d_weights = vec![0.0; nt];
        for s in 0..n {
            for h in 0..nh {
                let col = h * dh;
                let block = &cache.weights[(s * nh + h) * nt * nt..(s * nh + h + 1) * nt * nt];
                for i in 0..nt {
                    let p = &block[i * nt..(i + 1) * nt];
                    let da = &d_concat.row(s * nt + i)[col..col + dh];
                    // dP_ij = dA_i · V_j ; dV_j += P_ij dA_i
                    for j in 0..nt {
                        let vj = &cache.v.row(s * nt + j)[col..col + dh];
                        d_weights[j] = da.iter().zip(vj).map(|(a, b)| a * b).sum();
                        let dvj = &mut dv.row_mut(s * nt + j)[col..col + dh];
                        for (o, &a) in dvj.iter_mut().zip(da) {
                            *o += p[j] * a;
                        }
                    }
                    // softmax backward, then through the scaled dot product
                    let dot: f64 = p.iter().zip(&d_weights).map(|(a, b)| a * b).sum();
                    for j in 0..nt {
                        let ds = p[j] * (d_weights[j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let kj: Vec<f64> = cache.k.row(s * nt + j)[col..col + dh].to_vec();
                        let qi: Vec<f64> = cache.q.row(s * nt + i)[col..col + dh].to_vec();
                        for (o, kv) in dq.row_mut(s * nt + i)[col..col + dh].iter_mut().zip(&kj) {
                            *o += ds * kv;
                        }
                        for (o, qv) in dk.row_mut(s * nt + j)[col..col + dh].iter_mut().zip(&qi) {
                            *o += ds * qv;
                        }
                    }
                }
            }
        }
        self.w_q.grad.add_assign(&cache.tokens.t_matmul(&dq)?)?;
        self.w_k.grad.add_assign(&cache.tokens.t_matmul(&dk)?)?;
        self.w_v.grad.add_assign(&cache.tokens.t_matmul(&dv)?)?;
        let mut dx = dq.matmul_t(&self.w_q.value)?;
        dx.add_assign(&dk.matmul_t(&self.w_k.value)?)?;
        dx.add_assign(&dv.matmul_t(&self.w_v.value)?)?;
        Matrix::from_vec(n, nt * dt, dx.into_vec())
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_q, &mut self.w_k, &mut self.w_v, &mut self.w_o]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_q, &self.w_k, &self.w_v, &self.w_o]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::seeded;

    fn unit_attention(n_tokens: usize, d_hidden: usize) -> MultiHeadSelfAttention {
        let mut rng = seeded(0);
        let mut a = MultiHeadSelfAttention::new("a", d_hidden, n_tokens, 1, &mut rng).unwrap();
        let d_tok = d_hidden / n_tokens;
        for p in a.params_mut() {
            p.value = Matrix::identity(d_tok);
        }
        a
    }

    #[test]
    fn two_zero_tokens_give_zero_output() {
        let mut a = unit_attention(2, 2);
        let y = a.forward(&Matrix::row_vector(&[0.0, 0.0]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);
        let w = &a.cache.as_ref().unwrap().weights;
        assert_eq!(w.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn single_token_is_value_projection() {
        let mut rng = seeded(1);
        let mut a = MultiHeadSelfAttention::new("a", 4, 1, 2, &mut rng).unwrap();
        let x = Matrix::randn(3, 4, &mut rng);
        let y = a.forward(&x, Mode::Eval).unwrap();
        let expect = x.matmul(&a.w_v.value).unwrap().matmul(&a.w_o.value).unwrap();
        for (p, q) in y.data().iter().zip(expect.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_tokens_give_identical_outputs() {
        let mut rng = seeded(2);
        let mut a = MultiHeadSelfAttention::new("a", 12, 4, 3, &mut rng).unwrap();
        let tok = [0.3, -1.2, 0.7];
        let x = Matrix::row_vector(&tok.repeat(4));
        let y = a.forward(&x, Mode::Eval).unwrap();
        for t in 1..4 {
            for c in 0..3 {
                assert!((y[(0, t * 3 + c)] - y[(0, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rows_are_processed_independently() {
        let mut rng = seeded(3);
        let mut a = MultiHeadSelfAttention::new("a", 8, 4, 2, &mut rng).unwrap();
        let x = Matrix::randn(5, 8, &mut rng);
        let y = a.forward(&x, Mode::Eval).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let yp = a.forward(&x.select_rows(&perm), Mode::Eval).unwrap();
        assert_eq!(yp, y.select_rows(&perm));
    }

    #[test]
    fn config_divisibility() {
        let mut rng = seeded(0);
        assert!(MultiHeadSelfAttention::new("a", 10, 4, 1, &mut rng).is_err());
        assert!(MultiHeadSelfAttention::new("a", 12, 4, 2, &mut rng).is_err());
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = seeded(4);
        let mut a = MultiHeadSelfAttention::new("a", 8, 4, 2, &mut rng).unwrap();
        let x = Matrix::randn(3, 8, &mut rng);
        let r = Matrix::randn(3, 8, &mut rng);
        let loss = move |y: &Matrix| (y.hadamard(&r).unwrap().sum(), r.clone());
        let report = grad_check(&mut a, &x, Mode::Eval, &loss, 1000).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
