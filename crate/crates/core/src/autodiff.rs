//! Minimal reverse-mode differentiation over row-major matrices.
//!
//! Every value on a [`Tape`] is a 2-D [`Tensor`]; sequences are `T × C`
//! with one row per frame. The op set is exactly what the encoder, decoder
//! and spectral loss need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let av = a.data[i * a.cols + k];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(b.row(k)) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a · bᵀ`
fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor::from_fn(a.rows, b.rows, |i, j| {
        a.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum()
    })
}

/// `aᵀ · b`
fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.cols, b.cols);
    for r in 0..a.rows {
        let brow = b.row(r);
        for i in 0..a.cols {
            let av = a.data[r * a.cols + i];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in out.data[i * b.cols..(i + 1) * b.cols].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Tanh(Var),
    Affine(Var, f64),
    DepthwiseConv(Var, Var, Var),
    MeanRows(Var),
    ConcatBroadcast(Var, Var),
    SpectralLoss(Var, Tensor, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.cols, tb.rows, "matmul shape");
        let out = matmul(ta, tb);
        self.push(out, Op::MatMul(a, b))
    }

    /// `a + b` with the `1 × C` row `b` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(tb.rows == 1 && tb.cols == ta.cols, "add_row shape");
        let mut out = ta.clone();
        for r in 0..out.rows {
            for (o, bv) in out.data[r * out.cols..(r + 1) * out.cols]
                .iter_mut()
                .zip(&tb.data)
            {
                *o += bv;
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        assert_eq!(out.shape(), self.value(b).shape(), "add shape");
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v = v.tanh());
        self.push(out, Op::Tanh(a))
    }

    /// `scale · a + shift` with constant scalars.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v = scale * *v + shift);
        self.push(out, Op::Affine(a, scale))
    }

    /// Per-channel "valid" convolution along rows: `x` is `T × C`, the
    /// kernel `w` is `K × C`, the bias `b` is `1 × C`, and the output is
    /// `(T − K + 1) × C`.
    pub fn depthwise_conv(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (tx, tw, tb) = (self.value(x), self.value(w), self.value(b));
        let (t, c, k) = (tx.rows, tx.cols, tw.rows);
        assert!(
            tw.cols == c && tb.shape() == [1, c] && t >= k,
            "depthwise_conv shape"
        );
        let out = Tensor::from_fn(t - k + 1, c, |r, ch| {
            tb.data[ch]
                + (0..k)
                    .map(|j| tw.get(j, ch) * tx.get(r + j, ch))
                    .sum::<f64>()
        });
        self.push(out, Op::DepthwiseConv(x, w, b))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let n = ta.rows as f64;
        let out = Tensor::from_fn(1, ta.cols, |_, c| {
            (0..ta.rows).map(|r| ta.get(r, c)).sum::<f64>() / n
        });
        self.push(out, Op::MeanRows(a))
    }

    /// `[x_t ⊕ c]` for every row `x_t` of `x`, with `c` a `1 × D` row.
    pub fn concat_broadcast(&mut self, x: Var, c: Var) -> Var {
        let (tx, tc) = (self.value(x), self.value(c));
        assert_eq!(tc.rows, 1, "concat_broadcast shape");
        let f = tx.cols;
        let out = Tensor::from_fn(tx.rows, f + tc.cols, |r, j| {
            if j < f {
                tx.get(r, j)
            } else {
                tc.data[j - f]
            }
        });
        self.push(out, Op::ConcatBroadcast(x, c))
    }

    /// `‖h − ĥ‖₁ + ‖h − ĥ‖² + ‖h − ĥ‖² / ‖h‖²` against the constant target
    /// `h`, over all entries.
    pub fn spectral_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let tp = self.value(pred);
        if tp.shape() != target.shape() {
            return Err(Error::DimensionMismatch {
                expected: target.data.len(),
                actual: tp.data.len(),
            });
        }
        let norm: f64 = target.data.iter().map(|v| v * v).sum();
        if norm == 0.0 {
            return Err(Error::ZeroEnergy("spectral loss target"));
        }
        let (mut l1, mut l2) = (0.0, 0.0);
        for (p, h) in tp.data.iter().zip(&target.data) {
            let e = h - p;
            l1 += e.abs();
            l2 += e * e;
        }
        let out = Tensor::row_vector(vec![l1 + l2 + l2 / norm]);
        Ok(self.push(out, Op::SpectralLoss(pred, target.clone(), norm)))
    }

    /// Gradients of the scalar `out` with respect to every node, indexed
    /// by [`Var`]. Nodes that `out` does not depend on get `None`.
    pub fn backward(&self, out: Var) -> Gradients {
        assert_eq!(
            self.value(out).shape(),
            [1, 1],
            "backward from a non-scalar"
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::row_vector(vec![1.0]));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = matmul_nt(&g, self.value(*b));
                    let gb = matmul_tn(self.value(*a), &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let gb =
                        Tensor::from_fn(1, g.cols, |_, c| (0..g.rows).map(|r| g.get(r, c)).sum());
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Tanh(a) => {
                    let mut ga = g.clone();
                    for (gv, y) in ga.data.iter_mut().zip(&node.value.data) {
                        *gv *= 1.0 - y * y;
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Affine(a, scale) => {
                    let mut ga = g.clone();
                    ga.data.iter_mut().for_each(|v| *v *= scale);
                    acc(&mut grads, *a, ga);
                }
                Op::DepthwiseConv(x, w, b) => {
                    let (tx, tw) = (self.value(*x), self.value(*w));
                    let k = tw.rows;
                    let mut gx = Tensor::zeros(tx.rows, tx.cols);
                    let mut gw = Tensor::zeros(tw.rows, tw.cols);
                    let mut gb = Tensor::zeros(1, tx.cols);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            let gv = g.get(r, c);
                            gb.data[c] += gv;
                            for j in 0..k {
                                gx.data[(r + j) * tx.cols + c] += tw.get(j, c) * gv;
                                gw.data[j * tw.cols + c] += tx.get(r + j, c) * gv;
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *w, gw);
                    acc(&mut grads, *b, gb);
                }
                Op::MeanRows(a) => {
                    let rows = self.value(*a).rows;
                    let ga = Tensor::from_fn(rows, g.cols, |_, c| g.data[c] / rows as f64);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatBroadcast(x, c) => {
                    let f = self.value(*x).cols;
                    let d = self.value(*c).cols;
                    let gx = Tensor::from_fn(g.rows, f, |r, j| g.get(r, j));
                    let gc =
                        Tensor::from_fn(1, d, |_, j| (0..g.rows).map(|r| g.get(r, f + j)).sum());
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *c, gc);
                }
                Op::SpectralLoss(pred, target, norm) => {
                    let seed = g.data[0];
                    let tp = self.value(*pred);
                    let gp = Tensor::from_fn(tp.rows, tp.cols, |r, c| {
                        let e = tp.get(r, c) - target.get(r, c);
                        let sign = if e > 0.0 {
                            1.0
                        } else if e < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        seed * (sign + 2.0 * e + 2.0 * e / norm)
                    });
                    acc(&mut grads, *pred, gp);
                }
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }
}

#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient for `v`, zeros of `shape` if the output does not depend on it.
    pub fn get_or_zeros(&self, v: Var, shape: [usize; 2]) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape[0], shape[1]))
    }
}
