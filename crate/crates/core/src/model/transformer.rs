//! Pre-norm transformer encoder with learned positional and segment-role
//! embeddings, GELU feed-forward blocks and hand-written backpropagation.
//!
//! One sequence is processed at a time (no padding). Only the pooled `[CLS]`
//! vector leaves the encoder, so the last block computes attention queries and
//! the feed-forward update for position 0 alone; keys and values still cover
//! the whole sequence.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::layout::{Allocator, Init, Span};

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_positions: usize,
    pub n_roles: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(format!("encoder: {m}")));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.n_layers == 0 || self.d_ff == 0 || self.max_positions == 0 || self.n_roles == 0 {
            return bad("layer count, d_ff, max_positions and n_roles must be positive");
        }
        if self.vocab_size < 4 {
            return bad("vocabulary must hold the special tokens");
        }
        Ok(())
    }
}

/// Borrowed view of one input sequence.
#[derive(Debug, Clone, Copy)]
pub struct Sequence<'a> {
    pub tokens: &'a [u32],
    pub roles: &'a [u8],
    /// Positions whose embedding is a passage vector rather than a token.
    pub slot_positions: &'a [usize],
    pub slot_vectors: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub ln1_g: Span,
    pub ln1_b: Span,
    pub w_qkv: Span,
    pub b_qkv: Span,
    pub w_o: Span,
    pub b_o: Span,
    pub ln2_g: Span,
    pub ln2_b: Span,
    pub w_ff1: Span,
    pub b_ff1: Span,
    pub w_ff2: Span,
    pub b_ff2: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerLayout {
    pub config: EncoderConfig,
    pub tok: Span,
    pub pos: Span,
    pub role: Span,
    pub blocks: Vec<BlockLayout>,
    pub lnf_g: Span,
    pub lnf_b: Span,
    /// Width of incoming passage vectors.
    pub passage_dim: usize,
    /// Learned projection applied to passage vectors whose width differs
    /// from `d_model`.
    pub proj: Option<(Span, Span)>,
}

impl TransformerLayout {
    pub fn new(config: &EncoderConfig, passage_dim: usize, alloc: &mut Allocator) -> Self {
        let d = config.d_model;
        let normal = Init::Normal(INIT_STD);
        let tok = alloc.alloc(config.vocab_size, d, normal);
        let pos = alloc.alloc(config.max_positions, d, normal);
        let role = alloc.alloc(config.n_roles, d, normal);
        let proj = (passage_dim != d).then(|| {
            (
                alloc.alloc(passage_dim, d, normal),
                alloc.alloc(1, d, Init::Zeros),
            )
        });
        let blocks = (0..config.n_layers)
            .map(|_| BlockLayout {
                ln1_g: alloc.alloc(1, d, Init::Ones),
                ln1_b: alloc.alloc(1, d, Init::Zeros),
                w_qkv: alloc.alloc(d, 3 * d, normal),
                b_qkv: alloc.alloc(1, 3 * d, Init::Zeros),
                w_o: alloc.alloc(d, d, normal),
                b_o: alloc.alloc(1, d, Init::Zeros),
                ln2_g: alloc.alloc(1, d, Init::Ones),
                ln2_b: alloc.alloc(1, d, Init::Zeros),
                w_ff1: alloc.alloc(d, config.d_ff, normal),
                b_ff1: alloc.alloc(1, config.d_ff, Init::Zeros),
                w_ff2: alloc.alloc(config.d_ff, d, normal),
                b_ff2: alloc.alloc(1, d, Init::Zeros),
            })
            .collect();
        let lnf_g = alloc.alloc(1, d, Init::Ones);
        let lnf_b = alloc.alloc(1, d, Init::Zeros);
        TransformerLayout {
            config: config.clone(),
            tok,
            pos,
            role,
            blocks,
            lnf_g,
            lnf_b,
            passage_dim,
            proj,
        }
    }

    fn check(&self, seq: &Sequence) -> Result<(), String> {
        let cfg = &self.config;
        let n = seq.tokens.len();
        if n == 0 {
            return Err("empty sequence".into());
        }
        if n > cfg.max_positions {
            return Err(format!(
                "sequence length {n} exceeds positional limit {}",
                cfg.max_positions
            ));
        }
        if seq.roles.len() != n {
            return Err("role count differs from token count".into());
        }
        if let Some(t) = seq.tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
            return Err(format!(
                "token id {t} outside vocabulary of {}",
                cfg.vocab_size
            ));
        }
        if let Some(r) = seq.roles.iter().find(|&&r| r as usize >= cfg.n_roles) {
            return Err(format!("role id {r} outside {} roles", cfg.n_roles));
        }
        if seq.slot_positions.len() != seq.slot_vectors.len() {
            return Err("slot positions and vectors differ in count".into());
        }
        for (&p, v) in seq.slot_positions.iter().zip(seq.slot_vectors) {
            if p >= n {
                return Err(format!("slot position {p} outside sequence"));
            }
            if v.len() != self.passage_dim {
                return Err(format!(
                    "passage vector width {} != {}",
                    v.len(),
                    self.passage_dim
                ));
            }
        }
        Ok(())
    }

    /// Pooled `[CLS]` vector plus everything the backward pass needs.
    pub fn forward(
        &self,
        params: &[f64],
        seq: &Sequence,
    ) -> Result<(Array1<f64>, ForwardCache), String> {
        self.check(seq)?;
        let cfg = &self.config;
        let n = seq.tokens.len();
        let d = cfg.d_model;

        let mut x = Array2::<f64>::zeros((n, d));
        let mut slot_of = vec![None; n];
        for (k, &p) in seq.slot_positions.iter().enumerate() {
            slot_of[p] = Some(k);
        }
        for t in 0..n {
            let mut row = x.row_mut(t);
            match slot_of[t] {
                Some(k) => {
                    let v = ArrayView1::from(&seq.slot_vectors[k][..]);
                    match &self.proj {
                        Some((w, b)) => {
                            row.assign(&v.dot(&w.mat(params)));
                            row += &b.vec(params);
                        }
                        None => row.assign(&v),
                    }
                }
                None => row.assign(&ArrayView1::from(
                    self.tok.row(params, seq.tokens[t] as usize),
                )),
            }
            row += &ArrayView1::from(self.pos.row(params, t));
            row += &ArrayView1::from(self.role.row(params, seq.roles[t] as usize));
        }

        let mut blocks = Vec::with_capacity(self.blocks.len());
        let last = self.blocks.len() - 1;
        for (l, block) in self.blocks.iter().enumerate() {
            let q_rows = if l == last { 1 } else { n };
            let (out, cache) = block_forward(block, cfg, params, x, q_rows);
            blocks.push(cache);
            x = out;
        }
        let (y, lnf) = ln_forward(x.view(), self.lnf_g.vec(params), self.lnf_b.vec(params));
        let pooled = y.row(0).to_owned();
        if pooled.iter().any(|v| !v.is_finite()) {
            return Err("non-finite pooled activation".into());
        }
        Ok((
            pooled,
            ForwardCache {
                slot_of,
                blocks,
                lnf,
            },
        ))
    }

    /// Accumulate parameter gradients of `dpooled · pooled` into `grads`.
    pub fn backward(
        &self,
        params: &[f64],
        seq: &Sequence,
        cache: &ForwardCache,
        dpooled: ArrayView1<f64>,
        grads: &mut [f64],
    ) {
        let cfg = &self.config;
        let d = cfg.d_model;
        let dy = dpooled.to_owned().insert_axis(Axis(0));
        let mut dx = ln_backward(dy.view(), &cache.lnf, self.lnf_g, self.lnf_b, params, grads);
        for (block, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = block_backward(block, cfg, params, bc, dx.view(), grads);
        }

        for t in 0..seq.tokens.len() {
            let g = dx.row(t);
            add_row(self.pos.row_mut(grads, t), g);
            add_row(self.role.row_mut(grads, seq.roles[t] as usize), g);
            match cache.slot_of[t] {
                Some(k) => {
                    if let Some((w, b)) = &self.proj {
                        let v = ArrayView1::from(&seq.slot_vectors[k][..]);
                        let mut gw = w.mat_mut(grads);
                        for (i, &vi) in v.iter().enumerate() {
                            gw.row_mut(i).scaled_add(vi, &g);
                        }
                        let mut gb = b.vec_mut(grads);
                        gb += &g;
                    }
                }
                None => add_row(self.tok.row_mut(grads, seq.tokens[t] as usize), g),
            }
        }
        debug_assert_eq!(dx.ncols(), d);
    }
}

fn add_row(dst: &mut [f64], src: ArrayView1<f64>) {
    for (a, b) in dst.iter_mut().zip(src.iter()) {
        *a += b;
    }
}

pub struct ForwardCache {
    slot_of: Vec<Option<usize>>,
    blocks: Vec<BlockCache>,
    lnf: LnCache,
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

struct BlockCache {
    q_rows: usize,
    ln1: LnCache,
    h1: Array2<f64>,
    qkv: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln2: LnCache,
    h2: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
}

fn ln_forward(
    x: ArrayView2<f64>,
    g: ArrayView1<f64>,
    b: ArrayView1<f64>,
) -> (Array2<f64>, LnCache) {
    let (n, d) = x.dim();
    let mut xhat = Array2::zeros((n, d));
    let mut rstd = Array1::zeros(n);
    for i in 0..n {
        let row = x.row(i);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        Zip::from(xhat.row_mut(i))
            .and(row)
            .for_each(|h, &v| *h = (v - mean) * r);
    }
    let y = &xhat * &g + b;
    (y, LnCache { xhat, rstd })
}

fn ln_backward(
    dy: ArrayView2<f64>,
    cache: &LnCache,
    g: Span,
    b: Span,
    params: &[f64],
    grads: &mut [f64],
) -> Array2<f64> {
    let (n, d) = dy.dim();
    {
        let mut gg = g.vec_mut(grads);
        gg += &(&dy * &cache.xhat).sum_axis(Axis(0));
    }
    {
        let mut gb = b.vec_mut(grads);
        gb += &dy.sum_axis(Axis(0));
    }
    let gamma = g.vec(params);
    let mut dx = Array2::zeros((n, d));
    for i in 0..n {
        let dxhat = &dy.row(i) * &gamma;
        let xh = cache.xhat.row(i);
        let mean_d = dxhat.sum() / d as f64;
        let mean_dx = dxhat.dot(&xh) / d as f64;
        let r = cache.rstd[i];
        Zip::from(dx.row_mut(i))
            .and(&dxhat)
            .and(xh)
            .for_each(|o, &a, &h| *o = r * (a - mean_d - h * mean_dx));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

fn block_forward(
    bl: &BlockLayout,
    cfg: &EncoderConfig,
    p: &[f64],
    x: Array2<f64>,
    q_rows: usize,
) -> (Array2<f64>, BlockCache) {
    let n = x.nrows();
    let d = cfg.d_model;
    let dh = d / cfg.n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let (h1, ln1) = ln_forward(x.view(), bl.ln1_g.vec(p), bl.ln1_b.vec(p));
    let qkv = h1.dot(&bl.w_qkv.mat(p)) + bl.b_qkv.vec(p);

    let mut ctx = Array2::zeros((q_rows, d));
    let mut probs = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let q = qkv.slice(s![..q_rows, h * dh..(h + 1) * dh]);
        let k = qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
        let v = qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
        let mut sc = q.dot(&k.t());
        for mut row in sc.rows_mut() {
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b * scale));
            let mut sum = 0.0;
            row.mapv_inplace(|z| {
                let e = (z * scale - max).exp();
                sum += e;
                e
            });
            row /= sum;
        }
        ctx.slice_mut(s![.., h * dh..(h + 1) * dh])
            .assign(&sc.dot(&v));
        probs.push(sc);
    }

    let mut x_mid = x.slice(s![..q_rows, ..]).to_owned();
    general_mat_mul(1.0, &ctx, &bl.w_o.mat(p), 1.0, &mut x_mid);
    x_mid += &bl.b_o.vec(p);

    let (h2, ln2) = ln_forward(x_mid.view(), bl.ln2_g.vec(p), bl.ln2_b.vec(p));
    let ff_pre = h2.dot(&bl.w_ff1.mat(p)) + bl.b_ff1.vec(p);
    let ff_act = ff_pre.mapv(gelu);
    let mut out = x_mid;
    general_mat_mul(1.0, &ff_act, &bl.w_ff2.mat(p), 1.0, &mut out);
    out += &bl.b_ff2.vec(p);

    debug_assert_eq!(out.nrows(), q_rows.min(n));
    (
        out,
        BlockCache {
            q_rows,
            ln1,
            h1,
            qkv,
            probs,
            ctx,
            ln2,
            h2,
            ff_pre,
            ff_act,
        },
    )
}

fn block_backward(
    bl: &BlockLayout,
    cfg: &EncoderConfig,
    p: &[f64],
    c: &BlockCache,
    dout: ArrayView2<f64>,
    g: &mut [f64],
) -> Array2<f64> {
    let d = cfg.d_model;
    let dh = d / cfg.n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let n = c.h1.nrows();
    let q_rows = c.q_rows;

    // feed-forward branch
    general_mat_mul(1.0, &c.ff_act.t(), &dout, 1.0, &mut bl.w_ff2.mat_mut(g));
    {
        let mut gb = bl.b_ff2.vec_mut(g);
        gb += &dout.sum_axis(Axis(0));
    }
    let mut dpre = dout.dot(&bl.w_ff2.mat(p).t());
    Zip::from(&mut dpre)
        .and(&c.ff_pre)
        .for_each(|a, &z| *a *= gelu_grad(z));
    general_mat_mul(1.0, &c.h2.t(), &dpre, 1.0, &mut bl.w_ff1.mat_mut(g));
    {
        let mut gb = bl.b_ff1.vec_mut(g);
        gb += &dpre.sum_axis(Axis(0));
    }
    let dh2 = dpre.dot(&bl.w_ff1.mat(p).t());
    let mut dmid = ln_backward(dh2.view(), &c.ln2, bl.ln2_g, bl.ln2_b, p, g);
    dmid += &dout;

    // attention branch
    general_mat_mul(1.0, &c.ctx.t(), &dmid, 1.0, &mut bl.w_o.mat_mut(g));
    {
        let mut gb = bl.b_o.vec_mut(g);
        gb += &dmid.sum_axis(Axis(0));
    }
    let dctx = dmid.dot(&bl.w_o.mat(p).t());
    let mut dqkv = Array2::<f64>::zeros((n, 3 * d));
    for h in 0..cfg.n_heads {
        let q = c.qkv.slice(s![..q_rows, h * dh..(h + 1) * dh]);
        let k = c.qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
        let v = c.qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
        let pr = &c.probs[h];
        let dctx_h = dctx.slice(s![.., h * dh..(h + 1) * dh]);
        dqkv.slice_mut(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh])
            .assign(&pr.t().dot(&dctx_h));
        let dp = dctx_h.dot(&v.t());
        let mut ds = dp;
        for (mut drow, prow) in ds.rows_mut().into_iter().zip(pr.rows()) {
            let dot = drow.dot(&prow);
            Zip::from(&mut drow)
                .and(prow)
                .for_each(|a, &pv| *a = pv * (*a - dot) * scale);
        }
        dqkv.slice_mut(s![..q_rows, h * dh..(h + 1) * dh])
            .assign(&ds.dot(&k));
        dqkv.slice_mut(s![.., d + h * dh..d + (h + 1) * dh])
            .assign(&ds.t().dot(&q));
    }
    general_mat_mul(1.0, &c.h1.t(), &dqkv, 1.0, &mut bl.w_qkv.mat_mut(g));
    {
        let mut gb = bl.b_qkv.vec_mut(g);
        gb += &dqkv.sum_axis(Axis(0));
    }
    let dh1 = dqkv.dot(&bl.w_qkv.mat(p).t());
    let mut dx = ln_backward(dh1.view(), &c.ln1, bl.ln1_g, bl.ln1_b, p, g);
    {
        let mut top = dx.slice_mut(s![..q_rows, ..]);
        top += &dmid;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
