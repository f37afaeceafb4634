//! Anchor-based multi-head attention with an additive structural bias, and
//! the full pre-norm transformer block around it: forward pass, analytic
//! backward pass, and masking restricted to the receptive field.
//!
//! Per head, node v attends over exactly R(v): score(v,u) =
//! q_v·k_u/sqrt(d_head) + bias_table[spd_bucket(v,u)], softmax over R(v)
//! (max-subtracted), output = Σ α v_u; heads are concatenated and projected.
//! Nodes outside R(v) are never touched, so their contribution is
//! structurally zero rather than masked to -inf.
//!
//! The block is H = MHA(LN(x)) + x, out = FFN(LN(H)) + H, with a ReLU FFN
//! of hidden width d_ff. All accumulation runs in f64 with a fixed order,
//! so repeated runs are bit-identical.

use crate::encoding::ReceptiveField;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::rng::SplitMix64;

const LN_EPS: f64 = 1e-12;

/// All parameters of one transformer layer. `h` must divide `d`; the bias
/// table holds one real per head per spd bucket (the transform F on the
/// structural encoding, realized as a lookup table).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub h: usize,
    pub d: usize,
    pub d_ff: usize,
    pub w_q: Vec<Matrix>,
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_o: Matrix,
    pub bias_table: Vec<Vec<f64>>,
    pub ffn_w1: Matrix,
    pub ffn_b1: Vec<f64>,
    pub ffn_w2: Matrix,
    pub ffn_b2: Vec<f64>,
    pub ln1_scale: Vec<f64>,
    pub ln1_shift: Vec<f64>,
    pub ln2_scale: Vec<f64>,
    pub ln2_shift: Vec<f64>,
}

impl LayerParams {
    pub fn d_head(&self) -> usize {
        self.d / self.h
    }

    fn validate_dims(h: usize, d: usize, buckets: usize) -> Result<()> {
        if h == 0 || d == 0 {
            return Err(Error::Shape("need h >= 1 and d >= 1".into()));
        }
        if d % h != 0 {
            return Err(Error::Shape(format!(
                "head count {h} does not divide width {d}"
            )));
        }
        if buckets == 0 {
            return Err(Error::Shape("bias table needs at least one bucket".into()));
        }
        Ok(())
    }

    /// All-zero parameters except LayerNorm scales, which are 1.
    pub fn zeros(h: usize, d: usize, buckets: usize) -> Result<LayerParams> {
        Self::validate_dims(h, d, buckets)?;
        let d_ff = 2 * d;
        let dh = d / h;
        Ok(LayerParams {
            h,
            d,
            d_ff,
            w_q: (0..h).map(|_| Matrix::zeros(d, dh)).collect(),
            w_k: (0..h).map(|_| Matrix::zeros(d, dh)).collect(),
            w_v: (0..h).map(|_| Matrix::zeros(d, dh)).collect(),
            w_o: Matrix::zeros(d, d),
            bias_table: vec![vec![0.0; buckets]; h],
            ffn_w1: Matrix::zeros(d, d_ff),
            ffn_b1: vec![0.0; d_ff],
            ffn_w2: Matrix::zeros(d_ff, d),
            ffn_b2: vec![0.0; d],
            ln1_scale: vec![1.0; d],
            ln1_shift: vec![0.0; d],
            ln2_scale: vec![1.0; d],
            ln2_shift: vec![0.0; d],
        })
    }

    /// Seeded uniform(-1/sqrt(d), 1/sqrt(d)) weights and bias tables;
    /// LayerNorm starts at scale 1, shift 0. Fill order is fixed (projection
    /// heads, output projection, bias tables, FFN) so a seed pins every
    /// parameter bit-exactly.
    pub fn seeded(h: usize, d: usize, buckets: usize, seed: u64) -> Result<LayerParams> {
        let mut p = Self::zeros(h, d, buckets)?;
        let scale = 1.0 / (d as f64).sqrt();
        let mut rng = SplitMix64::new(seed);
        let fill_mat = |m: &mut Matrix, rng: &mut SplitMix64| {
            for v in m.data_mut() {
                *v = rng.uniform(scale);
            }
        };
        for t in 0..h {
            fill_mat(&mut p.w_q[t], &mut rng);
        }
        for t in 0..h {
            fill_mat(&mut p.w_k[t], &mut rng);
        }
        for t in 0..h {
            fill_mat(&mut p.w_v[t], &mut rng);
        }
        fill_mat(&mut p.w_o, &mut rng);
        for t in 0..h {
            for b in p.bias_table[t].iter_mut() {
                *b = rng.uniform(scale);
            }
        }
        fill_mat(&mut p.ffn_w1, &mut rng);
        for b in p.ffn_b1.iter_mut() {
            *b = rng.uniform(scale);
        }
        fill_mat(&mut p.ffn_w2, &mut rng);
        for b in p.ffn_b2.iter_mut() {
            *b = rng.uniform(scale);
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, _, data)| data.iter().all(|v| v.is_finite()))
    }

    /// Named tensors with shapes, in checkpoint/flattening order.
    fn tensors(&self) -> Vec<(String, usize, usize, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, group) in [("wq", &self.w_q), ("wk", &self.w_k), ("wv", &self.w_v)] {
            for (t, m) in group.iter().enumerate() {
                out.push((format!("{name}{t}"), m.rows(), m.cols(), m.data().to_vec()));
            }
        }
        out.push((
            "wo".into(),
            self.w_o.rows(),
            self.w_o.cols(),
            self.w_o.data().to_vec(),
        ));
        for (t, b) in self.bias_table.iter().enumerate() {
            out.push((format!("bias{t}"), 1, b.len(), b.clone()));
        }
        out.push((
            "ffn_w1".into(),
            self.ffn_w1.rows(),
            self.ffn_w1.cols(),
            self.ffn_w1.data().to_vec(),
        ));
        out.push(("ffn_b1".into(), 1, self.ffn_b1.len(), self.ffn_b1.clone()));
        out.push((
            "ffn_w2".into(),
            self.ffn_w2.rows(),
            self.ffn_w2.cols(),
            self.ffn_w2.data().to_vec(),
        ));
        out.push(("ffn_b2".into(), 1, self.ffn_b2.len(), self.ffn_b2.clone()));
        out.push((
            "ln1_scale".into(),
            1,
            self.ln1_scale.len(),
            self.ln1_scale.clone(),
        ));
        out.push((
            "ln1_shift".into(),
            1,
            self.ln1_shift.len(),
            self.ln1_shift.clone(),
        ));
        out.push((
            "ln2_scale".into(),
            1,
            self.ln2_scale.len(),
            self.ln2_scale.clone(),
        ));
        out.push((
            "ln2_shift".into(),
            1,
            self.ln2_shift.len(),
            self.ln2_shift.clone(),
        ));
        out
    }

    /// Flat parameter vector in checkpoint order; the exact inverse of
    /// `from_flat`. Used by the finite-difference gradient checks.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, _, _, d)| d)
            .collect()
    }

    pub fn from_flat(&self, flat: &[f64]) -> Result<LayerParams> {
        let mut p = self.clone();
        let mut idx = 0usize;
        let take = |len: usize, idx: &mut usize| -> Result<Vec<f64>> {
            if *idx + len > flat.len() {
                return Err(Error::Shape("flat parameter vector too short".into()));
            }
            let s = flat[*idx..*idx + len].to_vec();
            *idx += len;
            Ok(s)
        };
        for t in 0..p.h {
            p.w_q[t] = Matrix::from_vec(p.d, p.d_head(), take(p.d * p.d_head(), &mut idx)?)?;
        }
        for t in 0..p.h {
            p.w_k[t] = Matrix::from_vec(p.d, p.d_head(), take(p.d * p.d_head(), &mut idx)?)?;
        }
        for t in 0..p.h {
            p.w_v[t] = Matrix::from_vec(p.d, p.d_head(), take(p.d * p.d_head(), &mut idx)?)?;
        }
        p.w_o = Matrix::from_vec(p.d, p.d, take(p.d * p.d, &mut idx)?)?;
        for t in 0..p.h {
            p.bias_table[t] = take(p.bias_table[t].len(), &mut idx)?;
        }
        p.ffn_w1 = Matrix::from_vec(p.d, p.d_ff, take(p.d * p.d_ff, &mut idx)?)?;
        p.ffn_b1 = take(p.d_ff, &mut idx)?;
        p.ffn_w2 = Matrix::from_vec(p.d_ff, p.d, take(p.d_ff * p.d, &mut idx)?)?;
        p.ffn_b2 = take(p.d, &mut idx)?;
        p.ln1_scale = take(p.d, &mut idx)?;
        p.ln1_shift = take(p.d, &mut idx)?;
        p.ln2_scale = take(p.d, &mut idx)?;
        p.ln2_shift = take(p.d, &mut idx)?;
        if idx != flat.len() {
            return Err(Error::Shape("flat parameter vector too long".into()));
        }
        Ok(p)
    }

    /// Checkpoint: one metadata line, then one CSV line per named tensor
    /// ("name,rows,cols,values..."). Values use the shortest decimal form
    /// that parses back to the same f64, so the round trip is exact.
    pub fn to_checkpoint_csv(&self) -> String {
        let mut out = format!(
            "# h={} d={} d_ff={} buckets={}\n",
            self.h,
            self.d,
            self.d_ff,
            self.bias_table[0].len()
        );
        for (name, rows, cols, data) in self.tensors() {
            let vals: Vec<String> = data.iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!("{name},{rows},{cols},{}\n", vals.join(",")));
        }
        out
    }

    pub fn from_checkpoint_csv(text: &str) -> Result<LayerParams> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Input("empty checkpoint".into()))?;
        let mut h = None;
        let mut d = None;
        let mut buckets = None;
        for token in header.trim_start_matches('#').split_whitespace() {
            let mut kv = token.split('=');
            match (kv.next(), kv.next()) {
                (Some("h"), Some(v)) => h = v.parse().ok(),
                (Some("d"), Some(v)) => d = v.parse().ok(),
                (Some("buckets"), Some(v)) => buckets = v.parse().ok(),
                _ => {}
            }
        }
        let (h, d, buckets) = match (h, d, buckets) {
            (Some(h), Some(d), Some(b)) => (h, d, b),
            _ => return Err(Error::Input("checkpoint header missing h/d/buckets".into())),
        };
        let mut p = LayerParams::zeros(h, d, buckets)?;
        let mut flat = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut fields = line.split(',');
            let _name = fields.next();
            let _rows = fields.next();
            let _cols = fields.next();
            for f in fields {
                flat.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::Input(format!("bad float {f:?} in checkpoint")))?,
                );
            }
        }
        p = p.from_flat(&flat)?;
        Ok(p)
    }
}

/// Per-layer gradients, same shapes as [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub w_q: Vec<Matrix>,
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_o: Matrix,
    pub bias_table: Vec<Vec<f64>>,
    pub ffn_w1: Matrix,
    pub ffn_b1: Vec<f64>,
    pub ffn_w2: Matrix,
    pub ffn_b2: Vec<f64>,
    pub ln1_scale: Vec<f64>,
    pub ln1_shift: Vec<f64>,
    pub ln2_scale: Vec<f64>,
    pub ln2_shift: Vec<f64>,
}

impl LayerGrads {
    fn zeros_like(p: &LayerParams) -> LayerGrads {
        let z = LayerParams::zeros(p.h, p.d, p.bias_table[0].len()).expect("valid dims");
        LayerGrads {
            w_q: z.w_q.clone(),
            w_k: z.w_k.clone(),
            w_v: z.w_v,
            w_o: z.w_o,
            bias_table: z.bias_table,
            ffn_w1: z.ffn_w1,
            ffn_b1: z.ffn_b1,
            ffn_w2: z.ffn_w2,
            ffn_b2: z.ffn_b2,
            ln1_scale: vec![0.0; p.d],
            ln1_shift: vec![0.0; p.d],
            ln2_scale: vec![0.0; p.d],
            ln2_shift: vec![0.0; p.d],
        }
    }

    /// Flat gradient vector aligned with [`LayerParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for group in [&self.w_q, &self.w_k, &self.w_v] {
            for m in group {
                out.extend_from_slice(m.data());
            }
        }
        out.extend_from_slice(self.w_o.data());
        for b in &self.bias_table {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(self.ffn_w1.data());
        out.extend_from_slice(&self.ffn_b1);
        out.extend_from_slice(self.ffn_w2.data());
        out.extend_from_slice(&self.ffn_b2);
        out.extend_from_slice(&self.ln1_scale);
        out.extend_from_slice(&self.ln1_shift);
        out.extend_from_slice(&self.ln2_scale);
        out.extend_from_slice(&self.ln2_shift);
        out
    }
}

/// Sparse attention coefficients: `alpha(head, v)` is aligned with
/// `rf.entries(v)`.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    alphas: Vec<Vec<Vec<f64>>>,
}

impl AttentionWeights {
    pub fn heads(&self) -> usize {
        self.alphas.len()
    }

    pub fn alpha(&self, head: usize, v: u32) -> &[f64] {
        &self.alphas[head][v as usize]
    }

    /// Flat (head, v, u, alpha) records for inspection.
    pub fn records<'a>(
        &'a self,
        rf: &'a ReceptiveField,
    ) -> impl Iterator<Item = (usize, u32, u32, f64)> + 'a {
        self.alphas
            .iter()
            .enumerate()
            .flat_map(move |(t, per_node)| {
                per_node.iter().enumerate().flat_map(move |(v, alphas)| {
                    rf.entries(v as u32)
                        .iter()
                        .zip(alphas)
                        .map(move |(&(u, _), &a)| (t, v as u32, u, a))
                })
            })
    }
}

fn validate_inputs(x: &Matrix, rf: &ReceptiveField, p: &LayerParams) -> Result<()> {
    if x.cols() != p.d {
        return Err(Error::Shape(format!(
            "input width {} != layer width {}",
            x.cols(),
            p.d
        )));
    }
    if x.rows() != rf.node_count() {
        return Err(Error::Shape(format!(
            "input has {} rows, receptive field covers {} nodes",
            x.rows(),
            rf.node_count()
        )));
    }
    if p.bias_table[0].len() != rf.bucketing().bucket_count() {
        return Err(Error::Shape(format!(
            "bias table has {} buckets, encoding uses {}",
            p.bias_table[0].len(),
            rf.bucketing().bucket_count()
        )));
    }
    if !x.is_finite() {
        return Err(Error::Numeric("input features contain NaN/Inf".into()));
    }
    if !p.is_finite() {
        return Err(Error::Numeric("layer parameters contain NaN/Inf".into()));
    }
    Ok(())
}

struct AttnCache {
    q: Vec<Matrix>,
    k: Vec<Matrix>,
    v: Vec<Matrix>,
    alphas: Vec<Vec<Vec<f64>>>,
    concat: Matrix,
}

fn attention_forward_cached(
    x: &Matrix,
    rf: &ReceptiveField,
    p: &LayerParams,
) -> (Matrix, AttnCache) {
    let n = x.rows();
    let dh = p.d_head();
    let inv_sqrt = 1.0 / (dh as f64).sqrt();
    let mut concat = Matrix::zeros(n, p.d);
    let mut alphas: Vec<Vec<Vec<f64>>> = Vec::with_capacity(p.h);
    let mut qs = Vec::with_capacity(p.h);
    let mut ks = Vec::with_capacity(p.h);
    let mut vs = Vec::with_capacity(p.h);
    for t in 0..p.h {
        let q = x.matmul(&p.w_q[t]);
        let k = x.matmul(&p.w_k[t]);
        let v = x.matmul(&p.w_v[t]);
        let bias = &p.bias_table[t];
        let mut head_alphas: Vec<Vec<f64>> = Vec::with_capacity(n);
        for node in 0..n {
            let entries = rf.entries(node as u32);
            let mut scores: Vec<f64> = entries
                .iter()
                .map(|&(u, bucket)| {
                    dot(q.row(node), k.row(u as usize)) * inv_sqrt + bias[bucket as usize]
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                z += *s;
            }
            let out_row = &mut concat.row_mut(node)[t * dh..(t + 1) * dh];
            for (i, s) in scores.iter_mut().enumerate() {
                *s /= z;
                let vu = v.row(entries[i].0 as usize);
                for (o, &vv) in out_row.iter_mut().zip(vu) {
                    *o += *s * vv;
                }
            }
            head_alphas.push(scores);
        }
        alphas.push(head_alphas);
        qs.push(q);
        ks.push(k);
        vs.push(v);
    }
    let out = concat.matmul(&p.w_o);
    (
        out,
        AttnCache {
            q: qs,
            k: ks,
            v: vs,
            alphas,
            concat,
        },
    )
}

/// Anchor-based multi-head attention over the receptive field. Returns the
/// projected output and the sparse attention coefficients.
pub fn anchor_attention_forward(
    x: &Matrix,
    rf: &ReceptiveField,
    p: &LayerParams,
) -> Result<(Matrix, AttentionWeights)> {
    validate_inputs(x, rf, p)?;
    let (out, cache) = attention_forward_cached(x, rf, p);
    Ok((
        out,
        AttentionWeights {
            alphas: cache.alphas,
        },
    ))
}

/// Exact number of attention score computations per head: Σ_v |R(v)|.
pub fn attention_pair_count(rf: &ReceptiveField) -> usize {
    rf.total_pairs()
}

struct LnCache {
    out: Matrix,
    xhat: Matrix,
    inv_std: Vec<f64>,
}

fn layer_norm_forward(x: &Matrix, scale: &[f64], shift: &[f64]) -> LnCache {
    let (n, d) = (x.rows(), x.cols());
    let mut out = Matrix::zeros(n, d);
    let mut xhat = Matrix::zeros(n, d);
    let mut inv_std = Vec::with_capacity(n);
    for r in 0..n {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + LN_EPS).sqrt();
        inv_std.push(istd);
        for c in 0..d {
            let h = (row[c] - mean) * istd;
            xhat.set(r, c, h);
            out.set(r, c, scale[c] * h + shift[c]);
        }
    }
    LnCache { out, xhat, inv_std }
}

fn layer_norm_backward(
    cache: &LnCache,
    scale: &[f64],
    g_y: &Matrix,
) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (n, d) = (g_y.rows(), g_y.cols());
    let mut g_x = Matrix::zeros(n, d);
    let mut g_scale = vec![0.0; d];
    let mut g_shift = vec![0.0; d];
    for r in 0..n {
        let gy = g_y.row(r);
        let xh = cache.xhat.row(r);
        for c in 0..d {
            g_scale[c] += gy[c] * xh[c];
            g_shift[c] += gy[c];
        }
        let gxhat: Vec<f64> = (0..d).map(|c| gy[c] * scale[c]).collect();
        let mean_g = gxhat.iter().sum::<f64>() / d as f64;
        let mean_gx = gxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let istd = cache.inv_std[r];
        for c in 0..d {
            g_x.set(r, c, istd * (gxhat[c] - mean_g - xh[c] * mean_gx));
        }
    }
    (g_x, g_scale, g_shift)
}

struct BlockCache {
    ln1: LnCache,
    attn: AttnCache,
    ln2: LnCache,
    z1: Matrix,
    a1: Matrix,
}

fn block_forward_cached(x: &Matrix, rf: &ReceptiveField, p: &LayerParams) -> (Matrix, BlockCache) {
    let ln1 = layer_norm_forward(x, &p.ln1_scale, &p.ln1_shift);
    let (attn_out, attn) = attention_forward_cached(&ln1.out, rf, p);
    let mut h_mat = attn_out;
    h_mat.add_assign(x);

    let ln2 = layer_norm_forward(&h_mat, &p.ln2_scale, &p.ln2_shift);
    let mut z1 = ln2.out.matmul(&p.ffn_w1);
    for r in 0..z1.rows() {
        for (c, b) in p.ffn_b1.iter().enumerate() {
            z1.row_mut(r)[c] += b;
        }
    }
    let mut a1 = z1.clone();
    for v in a1.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut out = a1.matmul(&p.ffn_w2);
    for r in 0..out.rows() {
        for (c, b) in p.ffn_b2.iter().enumerate() {
            out.row_mut(r)[c] += b;
        }
    }
    out.add_assign(&h_mat);
    (
        out,
        BlockCache {
            ln1,
            attn,
            ln2,
            z1,
            a1,
        },
    )
}

/// One full transformer block: H = MHA(LN(x)) + x, out = FFN(LN(H)) + H.
pub fn transformer_block_forward(
    x: &Matrix,
    rf: &ReceptiveField,
    p: &LayerParams,
) -> Result<Matrix> {
    validate_inputs(x, rf, p)?;
    Ok(block_forward_cached(x, rf, p).0)
}

/// Analytic gradients of the scalar loss L = Σ upstream ⊙ block(x) with
/// respect to the input features and every layer parameter. The forward
/// intermediates are recomputed internally.
pub fn transformer_block_backward(
    x: &Matrix,
    rf: &ReceptiveField,
    p: &LayerParams,
    upstream: &Matrix,
) -> Result<(Matrix, LayerGrads)> {
    validate_inputs(x, rf, p)?;
    if upstream.rows() != x.rows() || upstream.cols() != x.cols() {
        return Err(Error::Shape(
            "upstream gradient shape != input shape".into(),
        ));
    }
    if !upstream.is_finite() {
        return Err(Error::Numeric("upstream gradient contains NaN/Inf".into()));
    }
    let (_, cache) = block_forward_cached(x, rf, p);
    let mut grads = LayerGrads::zeros_like(p);
    let n = x.rows();
    let dh = p.d_head();
    let inv_sqrt = 1.0 / (dh as f64).sqrt();

    // FFN branch: out = relu(ln2 W1 + b1) W2 + b2 + H.
    let g_ffn_out = upstream;
    for r in 0..n {
        for (c, g) in g_ffn_out.row(r).iter().enumerate() {
            grads.ffn_b2[c] += g;
        }
    }
    grads.ffn_w2 = cache.a1.transpose_matmul(g_ffn_out);
    let mut g_z1 = g_ffn_out.matmul_transpose(&p.ffn_w2);
    for (gz, z) in g_z1.data_mut().iter_mut().zip(cache.z1.data()) {
        if *z <= 0.0 {
            *gz = 0.0;
        }
    }
    for r in 0..n {
        for (c, g) in g_z1.row(r).iter().enumerate() {
            grads.ffn_b1[c] += g;
        }
    }
    grads.ffn_w1 = cache.ln2.out.transpose_matmul(&g_z1);
    let g_ln2_out = g_z1.matmul_transpose(&p.ffn_w1);
    let (g_h_from_ln2, g_ln2_scale, g_ln2_shift) =
        layer_norm_backward(&cache.ln2, &p.ln2_scale, &g_ln2_out);
    grads.ln2_scale = g_ln2_scale;
    grads.ln2_shift = g_ln2_shift;

    // Gradient flowing into H: residual + LayerNorm path.
    let mut g_h = upstream.clone();
    g_h.add_assign(&g_h_from_ln2);

    // H = attn_out + x.
    let mut g_x = g_h.clone();

    // Attention backward: attn_out = concat * W_O.
    grads.w_o = cache.attn.concat.transpose_matmul(&g_h);
    let g_concat = g_h.matmul_transpose(&p.w_o);

    let mut g_ln1_out = Matrix::zeros(n, p.d);
    for t in 0..p.h {
        let q = &cache.attn.q[t];
        let k = &cache.attn.k[t];
        let v = &cache.attn.v[t];
        let mut g_q = Matrix::zeros(n, dh);
        let mut g_k = Matrix::zeros(n, dh);
        let mut g_v = Matrix::zeros(n, dh);
        for node in 0..n {
            let entries = rf.entries(node as u32);
            let alphas = &cache.attn.alphas[t][node];
            let g_head = &g_concat.row(node)[t * dh..(t + 1) * dh];
            // dL/dalpha_i and the softmax Jacobian.
            let g_alpha: Vec<f64> = entries
                .iter()
                .map(|&(u, _)| dot(g_head, v.row(u as usize)))
                .collect();
            let weighted: f64 = alphas.iter().zip(&g_alpha).map(|(a, g)| a * g).sum();
            for (i, &(u, bucket)) in entries.iter().enumerate() {
                let a = alphas[i];
                // Value gradient.
                for (gv, &gh) in g_v.row_mut(u as usize).iter_mut().zip(g_head) {
                    *gv += a * gh;
                }
                let g_score = a * (g_alpha[i] - weighted);
                grads.bias_table[t][bucket as usize] += g_score;
                let scaled = g_score * inv_sqrt;
                for j in 0..dh {
                    g_q.row_mut(node)[j] += scaled * k.get(u as usize, j);
                    g_k.row_mut(u as usize)[j] += scaled * q.get(node, j);
                }
            }
        }
        grads.w_q[t] = cache.ln1.out.transpose_matmul(&g_q);
        grads.w_k[t] = cache.ln1.out.transpose_matmul(&g_k);
        grads.w_v[t] = cache.ln1.out.transpose_matmul(&g_v);
        g_ln1_out.add_assign(&g_q.matmul_transpose(&p.w_q[t]));
        g_ln1_out.add_assign(&g_k.matmul_transpose(&p.w_k[t]));
        g_ln1_out.add_assign(&g_v.matmul_transpose(&p.w_v[t]));
    }

    let (g_x_from_ln1, g_ln1_scale, g_ln1_shift) =
        layer_norm_backward(&cache.ln1, &p.ln1_scale, &g_ln1_out);
    grads.ln1_scale = g_ln1_scale;
    grads.ln1_shift = g_ln1_shift;
    g_x.add_assign(&g_x_from_ln1);

    Ok((g_x, grads))
}
