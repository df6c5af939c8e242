//! Policy/value network: a shared single-block attention encoder over the
//! customer nodes, mean-pooled and concatenated with the search-state
//! globals, feeding two small MLP heads (operator logits and a state value).
//!
//! Both output layers start at zero, so an untrained net scores every state
//! as 0 and plays the exactly uniform policy; training only ever moves away
//! from that baseline through the PPO updates.

use super::kernel::{
    linear, linear_backward, relu, relu_backward, softmax_rows, softmax_rows_backward, Mat,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const NODE_FEATURES: usize = 16;
pub const GLOBAL_FEATURES: usize = 5;
pub const ACTIONS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub node_features: usize,
    pub global_features: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub decoder_hidden: usize,
    pub actions: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            node_features: NODE_FEATURES,
            global_features: GLOBAL_FEATURES,
            embed_dim: 128,
            heads: 8,
            decoder_hidden: 256,
            actions: ACTIONS,
        }
    }
}

impl ArchConfig {
    /// Small variant for finite-difference tests; same wiring, fewer weights.
    pub fn reduced() -> Self {
        ArchConfig {
            embed_dim: 8,
            heads: 2,
            decoder_hidden: 8,
            ..ArchConfig::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.embed_dim == 0 || self.heads == 0 || self.embed_dim % self.heads != 0 {
            return Err(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            ));
        }
        if self.node_features == 0 || self.actions == 0 || self.decoder_hidden == 0 {
            return Err("feature, action and hidden sizes must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub embed_w: Mat,
    pub embed_b: Vec<f64>,
    pub wq: Vec<Mat>,
    pub wk: Vec<Mat>,
    pub wv: Vec<Mat>,
    pub wo: Mat,
    pub bo: Vec<f64>,
    pub ff_w: Mat,
    pub ff_b: Vec<f64>,
    pub pol_w1: Mat,
    pub pol_b1: Vec<f64>,
    pub pol_w2: Mat,
    pub pol_b2: Vec<f64>,
    pub pol_w3: Mat,
    pub pol_b3: Vec<f64>,
    pub val_w1: Mat,
    pub val_b1: Vec<f64>,
    pub val_w2: Mat,
    pub val_b2: Vec<f64>,
    pub val_w3: Mat,
    pub val_b3: Vec<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-s..s))
}

impl NetParams {
    pub fn init(arch: &ArchConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = arch.embed_dim;
        let h = arch.head_dim();
        let hid = arch.decoder_hidden;
        let ctx = d + arch.global_features;
        NetParams {
            embed_w: glorot(&mut rng, arch.node_features, d),
            embed_b: vec![0.0; d],
            wq: (0..arch.heads).map(|_| glorot(&mut rng, d, h)).collect(),
            wk: (0..arch.heads).map(|_| glorot(&mut rng, d, h)).collect(),
            wv: (0..arch.heads).map(|_| glorot(&mut rng, d, h)).collect(),
            wo: glorot(&mut rng, d, d),
            bo: vec![0.0; d],
            ff_w: glorot(&mut rng, d, d),
            ff_b: vec![0.0; d],
            pol_w1: glorot(&mut rng, ctx, hid),
            pol_b1: vec![0.0; hid],
            pol_w2: glorot(&mut rng, hid, hid),
            pol_b2: vec![0.0; hid],
            // Zero output layers make the untrained policy uniform and the
            // untrained value identically zero.
            pol_w3: Mat::zeros(hid, arch.actions),
            pol_b3: vec![0.0; arch.actions],
            val_w1: glorot(&mut rng, ctx, hid),
            val_b1: vec![0.0; hid],
            val_w2: glorot(&mut rng, hid, hid),
            val_b2: vec![0.0; hid],
            val_w3: Mat::zeros(hid, 1),
            val_b3: vec![0.0; 1],
        }
    }

    pub fn zeros(arch: &ArchConfig) -> Self {
        let mut p = NetParams::init(arch, 0);
        p.for_each_mut(|s| s.fill(0.0));
        p
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embed_w.data, &self.embed_b];
        for m in &self.wq {
            out.push(&m.data);
        }
        for m in &self.wk {
            out.push(&m.data);
        }
        for m in &self.wv {
            out.push(&m.data);
        }
        out.extend([
            self.wo.data.as_slice(),
            &self.bo,
            &self.ff_w.data,
            &self.ff_b,
            &self.pol_w1.data,
            &self.pol_b1,
            &self.pol_w2.data,
            &self.pol_b2,
            &self.pol_w3.data,
            &self.pol_b3,
            &self.val_w1.data,
            &self.val_b1,
            &self.val_w2.data,
            &self.val_b2,
            &self.val_w3.data,
            &self.val_b3,
        ]);
        out
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(&mut self.embed_w.data);
        f(&mut self.embed_b);
        for m in &mut self.wq {
            f(&mut m.data);
        }
        for m in &mut self.wk {
            f(&mut m.data);
        }
        for m in &mut self.wv {
            f(&mut m.data);
        }
        f(&mut self.wo.data);
        f(&mut self.bo);
        f(&mut self.ff_w.data);
        f(&mut self.ff_b);
        f(&mut self.pol_w1.data);
        f(&mut self.pol_b1);
        f(&mut self.pol_w2.data);
        f(&mut self.pol_b2);
        f(&mut self.pol_w3.data);
        f(&mut self.pol_b3);
        f(&mut self.val_w1.data);
        f(&mut self.val_b1);
        f(&mut self.val_w2.data);
        f(&mut self.val_b2);
        f(&mut self.val_w3.data);
        f(&mut self.val_b3);
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in self.slices() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Inverse of [`flatten`]; panics if the length does not match.
    pub fn read_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        self.for_each_mut(|s| {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        });
        assert_eq!(off, flat.len(), "flat parameter length mismatch");
    }
}

/// All intermediate activations needed for the backward pass.
pub struct Forward {
    x: Mat,
    q: Vec<Mat>,
    k: Vec<Mat>,
    v: Vec<Mat>,
    att: Vec<Mat>,
    headcat: Mat,
    e: Mat,
    e2: Mat,
    ff_pre: Mat,
    ctx: Mat,
    pol_pre1: Mat,
    pol_h1: Mat,
    pol_pre2: Mat,
    pol_h2: Mat,
    val_pre1: Mat,
    val_h1: Mat,
    val_pre2: Mat,
    val_h2: Mat,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub value: f64,
}

fn col_block(m: &Mat, start: usize, width: usize) -> Mat {
    Mat::from_fn(m.rows, width, |r, c| m.get(r, start + c))
}

fn add_col_block(dst: &mut Mat, start: usize, src: &Mat) {
    for r in 0..src.rows {
        for c in 0..src.cols {
            let v = dst.get(r, start + c) + src.get(r, c);
            dst.set(r, start + c, v);
        }
    }
}

pub fn forward(arch: &ArchConfig, p: &NetParams, x: &Mat, globals: &[f64]) -> Forward {
    assert_eq!(x.cols, arch.node_features);
    assert_eq!(globals.len(), arch.global_features);
    let n = x.rows;
    let d = arch.embed_dim;
    let h = arch.head_dim();
    let scale = 1.0 / (h as f64).sqrt();

    let e = linear(x, &p.embed_w, &p.embed_b);
    let mut q = Vec::with_capacity(arch.heads);
    let mut k = Vec::with_capacity(arch.heads);
    let mut v = Vec::with_capacity(arch.heads);
    let mut att = Vec::with_capacity(arch.heads);
    let mut headcat = Mat::zeros(n, d);
    for i in 0..arch.heads {
        let qi = e.matmul(&p.wq[i]);
        let ki = e.matmul(&p.wk[i]);
        let vi = e.matmul(&p.wv[i]);
        let mut s = qi.matmul(&ki.transpose());
        s.scale(scale);
        let a = softmax_rows(&s);
        let o = a.matmul(&vi);
        add_col_block(&mut headcat, i * h, &o);
        q.push(qi);
        k.push(ki);
        v.push(vi);
        att.push(a);
    }
    let mha = linear(&headcat, &p.wo, &p.bo);
    let mut e2 = e.clone();
    e2.add_assign(&mha);
    let ff_pre = linear(&e2, &p.ff_w, &p.ff_b);
    let mut e3 = e2.clone();
    e3.add_assign(&relu(&ff_pre));

    let mut ctx = Mat::zeros(1, d + arch.global_features);
    for j in 0..d {
        let mean = (0..n).map(|r| e3.get(r, j)).sum::<f64>() / n as f64;
        ctx.set(0, j, mean);
    }
    for (j, g) in globals.iter().enumerate() {
        ctx.set(0, d + j, *g);
    }

    let pol_pre1 = linear(&ctx, &p.pol_w1, &p.pol_b1);
    let pol_h1 = relu(&pol_pre1);
    let pol_pre2 = linear(&pol_h1, &p.pol_w2, &p.pol_b2);
    let pol_h2 = relu(&pol_pre2);
    let logits_m = linear(&pol_h2, &p.pol_w3, &p.pol_b3);
    let probs_m = softmax_rows(&logits_m);

    let val_pre1 = linear(&ctx, &p.val_w1, &p.val_b1);
    let val_h1 = relu(&val_pre1);
    let val_pre2 = linear(&val_h1, &p.val_w2, &p.val_b2);
    let val_h2 = relu(&val_pre2);
    let value_m = linear(&val_h2, &p.val_w3, &p.val_b3);

    Forward {
        x: x.clone(),
        q,
        k,
        v,
        att,
        headcat,
        e,
        e2,
        ff_pre,
        ctx,
        pol_pre1,
        pol_h1,
        pol_pre2,
        pol_h2,
        val_pre1,
        val_h1,
        val_pre2,
        val_h2,
        logits: logits_m.row(0).to_vec(),
        probs: probs_m.row(0).to_vec(),
        value: value_m.get(0, 0),
    }
}

/// Accumulates parameter gradients for upstream `dlogits` and `dvalue` into
/// `grads` (same shapes as the parameters, start from zeros).
pub fn backward(
    arch: &ArchConfig,
    p: &NetParams,
    fwd: &Forward,
    dlogits: &[f64],
    dvalue: f64,
    grads: &mut NetParams,
) {
    assert_eq!(dlogits.len(), arch.actions);
    let n = fwd.x.rows;
    let d = arch.embed_dim;
    let h = arch.head_dim();
    let scale = 1.0 / (h as f64).sqrt();

    let add_vec = |dst: &mut Vec<f64>, src: &[f64]| {
        for (a, b) in dst.iter_mut().zip(src) {
            *a += b;
        }
    };

    // Policy head.
    let dlogits_m = Mat {
        rows: 1,
        cols: arch.actions,
        data: dlogits.to_vec(),
    };
    let (dh2, dw3, db3) = linear_backward(&fwd.pol_h2, &p.pol_w3, &dlogits_m);
    grads.pol_w3.add_assign(&dw3);
    add_vec(&mut grads.pol_b3, &db3);
    let dpre2 = relu_backward(&fwd.pol_pre2, &dh2);
    let (dh1, dw2, db2) = linear_backward(&fwd.pol_h1, &p.pol_w2, &dpre2);
    grads.pol_w2.add_assign(&dw2);
    add_vec(&mut grads.pol_b2, &db2);
    let dpre1 = relu_backward(&fwd.pol_pre1, &dh1);
    let (mut dctx, dw1, db1) = linear_backward(&fwd.ctx, &p.pol_w1, &dpre1);
    grads.pol_w1.add_assign(&dw1);
    add_vec(&mut grads.pol_b1, &db1);

    // Value head.
    let dvalue_m = Mat {
        rows: 1,
        cols: 1,
        data: vec![dvalue],
    };
    let (dh2v, dw3v, db3v) = linear_backward(&fwd.val_h2, &p.val_w3, &dvalue_m);
    grads.val_w3.add_assign(&dw3v);
    add_vec(&mut grads.val_b3, &db3v);
    let dpre2v = relu_backward(&fwd.val_pre2, &dh2v);
    let (dh1v, dw2v, db2v) = linear_backward(&fwd.val_h1, &p.val_w2, &dpre2v);
    grads.val_w2.add_assign(&dw2v);
    add_vec(&mut grads.val_b2, &db2v);
    let dpre1v = relu_backward(&fwd.val_pre1, &dh1v);
    let (dctx_v, dw1v, db1v) = linear_backward(&fwd.ctx, &p.val_w1, &dpre1v);
    grads.val_w1.add_assign(&dw1v);
    add_vec(&mut grads.val_b1, &db1v);
    dctx.add_assign(&dctx_v);

    // Mean pool: every node row shares the pooled gradient equally.
    let mut de3 = Mat::zeros(n, d);
    for r in 0..n {
        for j in 0..d {
            de3.set(r, j, dctx.get(0, j) / n as f64);
        }
    }

    // Feed-forward block with residual.
    let mut de2 = de3.clone();
    let dff_pre = relu_backward(&fwd.ff_pre, &de3);
    let (de2_ff, dwff, dbff) = linear_backward(&fwd.e2, &p.ff_w, &dff_pre);
    grads.ff_w.add_assign(&dwff);
    add_vec(&mut grads.ff_b, &dbff);
    de2.add_assign(&de2_ff);

    // Attention block with residual.
    let mut de = de2.clone();
    let (dheadcat, dwo, dbo) = linear_backward(&fwd.headcat, &p.wo, &de2);
    grads.wo.add_assign(&dwo);
    add_vec(&mut grads.bo, &dbo);
    for i in 0..arch.heads {
        let do_i = col_block(&dheadcat, i * h, h);
        let da = do_i.matmul(&fwd.v[i].transpose());
        let dv = fwd.att[i].transpose().matmul(&do_i);
        let mut ds = softmax_rows_backward(&fwd.att[i], &da);
        ds.scale(scale);
        let dq = ds.matmul(&fwd.k[i]);
        let dk = ds.transpose().matmul(&fwd.q[i]);
        grads.wq[i].add_assign(&fwd.e.transpose().matmul(&dq));
        grads.wk[i].add_assign(&fwd.e.transpose().matmul(&dk));
        grads.wv[i].add_assign(&fwd.e.transpose().matmul(&dv));
        de.add_assign(&dq.matmul(&p.wq[i].transpose()));
        de.add_assign(&dk.matmul(&p.wk[i].transpose()));
        de.add_assign(&dv.matmul(&p.wv[i].transpose()));
    }

    let (_dx, dwe, dbe) = linear_backward(&fwd.x, &p.embed_w, &de);
    grads.embed_w.add_assign(&dwe);
    add_vec(&mut grads.embed_b, &dbe);
}

/// Samples an index from a probability vector by inverting its cumulative
/// sum; the final index absorbs any floating-point remainder.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// log pi(a) from raw logits, via a stable log-sum-exp.
pub fn log_prob(logits: &[f64], action: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[action] - lse
}
