//! Minimal dense-matrix kernel with hand-written backward passes. Everything
//! is f64 and row-major; sizes here are tiny (tens of nodes, hidden dims in
//! the hundreds), so clarity wins over vectorization.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols));
        Mat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mat::zeros(self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }
}

/// y = x w + b, with x (m, in), w (in, out), b (out).
pub fn linear(x: &Mat, w: &Mat, b: &[f64]) -> Mat {
    assert_eq!(w.cols, b.len());
    let mut y = x.matmul(w);
    for r in 0..y.rows {
        for c in 0..y.cols {
            y.data[r * y.cols + c] += b[c];
        }
    }
    y
}

/// Gradients of a linear layer: returns (dx, dw, db) given upstream dy.
pub fn linear_backward(x: &Mat, w: &Mat, dy: &Mat) -> (Mat, Mat, Vec<f64>) {
    let dx = dy.matmul(&w.transpose());
    let dw = x.transpose().matmul(dy);
    let mut db = vec![0.0; dy.cols];
    for r in 0..dy.rows {
        for c in 0..dy.cols {
            db[c] += dy.get(r, c);
        }
    }
    (dx, dw, db)
}

pub fn relu(x: &Mat) -> Mat {
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// dy masked by the sign of the pre-activation (zero subgradient at 0).
pub fn relu_backward(pre: &Mat, dy: &Mat) -> Mat {
    assert_eq!((pre.rows, pre.cols), (dy.rows, dy.cols));
    let mut dx = dy.clone();
    for (d, p) in dx.data.iter_mut().zip(&pre.data) {
        if *p <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// Row-wise softmax, stabilized by subtracting each row's max.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for r in 0..y.rows {
        let row = &mut y.data[r * y.cols..(r + 1) * y.cols];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    y
}

/// Backward through a row-wise softmax: dx = p * (dp - sum(dp * p)) per row.
pub fn softmax_rows_backward(p: &Mat, dp: &Mat) -> Mat {
    assert_eq!((p.rows, p.cols), (dp.rows, dp.cols));
    let mut dx = Mat::zeros(p.rows, p.cols);
    for r in 0..p.rows {
        let dot: f64 = (0..p.cols).map(|c| p.get(r, c) * dp.get(r, c)).sum();
        for c in 0..p.cols {
            dx.set(r, c, p.get(r, c) * (dp.get(r, c) - dot));
        }
    }
    dx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, cfg: &AdamConfig, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}
