//! Minimal MLP stack: Xavier init, hand-written backprop, Adam, soft target
//! updates and a binary checkpoint codec.
//!
//! Parameters are stored as `f32` — exactly what the checkpoint format
//! carries, so encode/decode round-trips are bit-identical — while every
//! forward/backward pass widens to `f64` for the arithmetic. The widening
//! keeps finite-difference verification of the analytic gradients sharp and
//! training insensitive to tiny accumulation-order effects.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::rng::{self, ChaCha8Rng};

/// Errors from network construction and parameter updates.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    /// A vector or layer did not have the expected length.
    #[error("dimension mismatch in {context}: expected {want}, got {got}")]
    DimMismatch {
        want: usize,
        got: usize,
        context: &'static str,
    },
    /// A network needs at least one layer (two entries in `dims`).
    #[error("network must have at least one layer")]
    EmptyNetwork,
    /// Two networks disagree on an activation kind at the given layer.
    #[error("activation mismatch at layer {index}")]
    ActivationMismatch { index: usize },
}

/// Errors from decoding checkpoint bytes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes (expected \"IKHM\")")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionUnsupported(u32),
    #[error("checkpoint data ends prematurely")]
    TruncatedFile,
    #[error("unknown activation tag {0}")]
    BadActivationTag(u8),
    #[error("trailing bytes after checkpoint payload")]
    TrailingData,
    #[error("checkpoint describes an invalid network: {0}")]
    InvalidNetwork(NetError),
}

/// Per-neuron nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    /// Stable tag used by the checkpoint format.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    /// Inverse of [`Activation::tag`].
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => math::tanh(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the activation *output*.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }
}

/// Dense row-major `f64` matrix used by the batched forward/backward paths.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: Vec<f64>,
}

impl Mat {
    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub(crate) fn from_row(row: &[f64]) -> Self {
        Mat {
            rows: 1,
            cols: row.len(),
            data: row.to_vec(),
        }
    }

    pub(crate) fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Dot product with four independent accumulators (deterministic order,
/// friendly to autovectorization).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut k = 0;
    while k + 4 <= n {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
        k += 4;
    }
    let mut s = (s0 + s1) + (s2 + s3);
    while k < n {
        s += a[k] * b[k];
        k += 1;
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yk, xk) in y.iter_mut().zip(x) {
        *yk += alpha * xk;
    }
}

/// One dense layer: `out = act(W x + b)` with `W` stored row-major, shape
/// `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f32>,
    biases: Vec<f32>,
    activation: Activation,
}

impl Layer {
    /// Xavier-uniform initialization: weights from
    /// `U(-sqrt(6/(in+out)), sqrt(6/(in+out)))` drawn row-major, biases zero.
    pub fn xavier(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = math::sqrt(6.0 / (in_dim + out_dim) as f64);
        let weights = (0..in_dim * out_dim)
            .map(|_| rng::uniform(rng, -limit, limit) as f32)
            .collect();
        Layer {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    /// Builds a layer from explicit parameters.
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f32>,
        biases: Vec<f32>,
    ) -> Result<Self, NetError> {
        if weights.len() != in_dim * out_dim {
            return Err(NetError::DimMismatch {
                want: in_dim * out_dim,
                got: weights.len(),
                context: "layer weights",
            });
        }
        if biases.len() != out_dim {
            return Err(NetError::DimMismatch {
                want: out_dim,
                got: biases.len(),
                context: "layer biases",
            });
        }
        Ok(Layer {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    fn widened(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.weights.iter().map(|&w| w as f64).collect(),
            self.biases.iter().map(|&b| b as f64).collect(),
        )
    }
}

/// Per-layer parameter gradients produced by a backward pass.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    /// Gradient w.r.t. the weights, same row-major layout as the layer.
    pub dw: Vec<f64>,
    /// Gradient w.r.t. the biases.
    pub db: Vec<f64>,
}

/// Gradients for every layer of an [`Mlp`], in layer order.
#[derive(Debug, Clone)]
pub struct GradientTape {
    pub layers: Vec<LayerGrads>,
}

impl GradientTape {
    pub fn zeros_like(net: &Mlp) -> Self {
        GradientTape {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    dw: vec![0.0; l.weights.len()],
                    db: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }
}

/// Cached per-layer activations from a batched forward pass.
pub(crate) struct ForwardCache {
    input: Mat,
    /// Post-activation outputs of every layer; the last entry is the network
    /// output.
    outs: Vec<Mat>,
}

impl ForwardCache {
    pub(crate) fn output(&self) -> &Mat {
        self.outs.last().expect("cache of a nonempty net")
    }
}

/// A fully connected feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Builds a Xavier-initialized net. `dims` lists layer widths from input
    /// to output, so `&[4, 32, 2]` is one hidden layer of 32 units. All hidden
    /// layers use `hidden`, the last layer uses `output`.
    pub fn new(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NetError> {
        if dims.len() < 2 {
            return Err(NetError::EmptyNetwork);
        }
        if let Some(&bad) = dims.iter().find(|&&d| d == 0) {
            return Err(NetError::DimMismatch {
                want: 1,
                got: bad,
                context: "layer width",
            });
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { hidden };
                Layer::xavier(w[0], w[1], act, rng)
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// Builds a net from explicit layers, validating the chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::EmptyNetwork);
        }
        for i in 1..layers.len() {
            if layers[i].in_dim != layers[i - 1].out_dim {
                return Err(NetError::DimMismatch {
                    want: layers[i - 1].out_dim,
                    got: layers[i].in_dim,
                    context: "layer chain",
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// FNV-1a hash over the serialized network; changes iff architecture or
    /// any parameter bit changes.
    pub fn param_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&encode_checkpoint(self));
        h.finish()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f32]) -> Result<Vec<f32>, NetError> {
        let x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
        let out = self.forward_mat(&Mat::from_row(&x))?;
        Ok(out.data.iter().map(|&v| v as f32).collect())
    }

    /// Batched forward pass; one sample per row.
    pub(crate) fn forward_mat(&self, x: &Mat) -> Result<Mat, NetError> {
        let (out, _) = self.forward_mat_cached_impl(x, false)?;
        Ok(out)
    }

    /// Batched forward pass that also returns the activation cache needed by
    /// [`Mlp::backward_mat`].
    pub(crate) fn forward_mat_cached(&self, x: &Mat) -> Result<(Mat, ForwardCache), NetError> {
        let (out, cache) = self.forward_mat_cached_impl(x, true)?;
        Ok((out, cache.expect("cache requested")))
    }

    fn forward_mat_cached_impl(
        &self,
        x: &Mat,
        keep_cache: bool,
    ) -> Result<(Mat, Option<ForwardCache>), NetError> {
        if x.cols != self.input_dim() {
            return Err(NetError::DimMismatch {
                want: self.input_dim(),
                got: x.cols,
                context: "forward input",
            });
        }
        let rows = x.rows;
        let mut outs: Vec<Mat> = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (w, b) = layer.widened();
            let mut next = Mat::zeros(rows, layer.out_dim);
            for r in 0..rows {
                let a = cur.row(r);
                let out_row = next.row_mut(r);
                for o in 0..layer.out_dim {
                    let z = b[o] + dot(a, &w[o * layer.in_dim..(o + 1) * layer.in_dim]);
                    out_row[o] = layer.activation.apply(z);
                }
            }
            if keep_cache {
                outs.push(next.clone());
            }
            cur = next;
        }
        let cache = keep_cache.then(|| ForwardCache {
            input: x.clone(),
            outs,
        });
        Ok((cur, cache))
    }

    /// Batched backward pass. `upstream` holds dLoss/dOutput per sample; the
    /// returned tape holds parameter gradients summed over the batch, plus the
    /// gradient w.r.t. the input batch when `want_input_grad` is set.
    pub(crate) fn backward_mat(
        &self,
        cache: &ForwardCache,
        upstream: &Mat,
        want_input_grad: bool,
    ) -> Result<(GradientTape, Option<Mat>), NetError> {
        let out = cache.output();
        if upstream.rows != out.rows || upstream.cols != out.cols {
            return Err(NetError::DimMismatch {
                want: out.rows * out.cols,
                got: upstream.rows * upstream.cols,
                context: "backward upstream",
            });
        }
        let rows = upstream.rows;
        let mut tape = GradientTape::zeros_like(self);
        let mut grad = upstream.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let layer_out = &cache.outs[l];
            let layer_in = if l == 0 { &cache.input } else { &cache.outs[l - 1] };
            let (w, _) = layer.widened();
            let lg = &mut tape.layers[l];
            let need_prev = l > 0 || want_input_grad;
            let mut prev = need_prev.then(|| Mat::zeros(rows, layer.in_dim));
            for r in 0..rows {
                let gout = grad.row(r);
                let aout = layer_out.row(r);
                let ain = layer_in.row(r);
                for o in 0..layer.out_dim {
                    let dz = gout[o] * layer.activation.derivative_from_output(aout[o]);
                    if dz == 0.0 {
                        continue;
                    }
                    lg.db[o] += dz;
                    axpy(&mut lg.dw[o * layer.in_dim..(o + 1) * layer.in_dim], dz, ain);
                    if let Some(p) = prev.as_mut() {
                        axpy(p.row_mut(r), dz, &w[o * layer.in_dim..(o + 1) * layer.in_dim]);
                    }
                }
            }
            match prev {
                Some(p) if l > 0 => grad = p,
                Some(p) => return Ok((tape, Some(p))),
                None => return Ok((tape, None)),
            }
        }
        unreachable!("loop returns at layer 0");
    }

    /// Single-sample backward pass: returns parameter gradients and the
    /// gradient w.r.t. the input, for dLoss/dOutput = `upstream`.
    pub fn backward(
        &self,
        input: &[f32],
        upstream: &[f64],
    ) -> Result<(GradientTape, Vec<f64>), NetError> {
        let x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
        let (_, cache) = self.forward_mat_cached(&Mat::from_row(&x))?;
        let (tape, input_grad) =
            self.backward_mat(&cache, &Mat::from_row(upstream), true)?;
        Ok((tape, input_grad.expect("input grad requested").data))
    }
}

/// Adam state for one network. Moments are kept in `f64`.
#[derive(Debug, Clone)]
pub struct OptimState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    /// Per layer: (m_w, v_w, m_b, v_b).
    moments: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl OptimState {
    /// Fresh Adam state with the usual defaults: beta1 = 0.9, beta2 = 0.999,
    /// eps = 1e-8.
    pub fn new(net: &Mlp, lr: f64) -> Self {
        OptimState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: net
                .layers
                .iter()
                .map(|l| {
                    (
                        vec![0.0; l.weights.len()],
                        vec![0.0; l.weights.len()],
                        vec![0.0; l.biases.len()],
                        vec![0.0; l.biases.len()],
                    )
                })
                .collect(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update. Uses the bias-corrected form
/// `p -= lr * m_hat / (sqrt(v_hat) + eps)`, so the very first step moves each
/// parameter by `lr * g / (|g| + eps)`.
pub fn adam_step(net: &mut Mlp, tape: &GradientTape, opt: &mut OptimState) -> Result<(), NetError> {
    if tape.layers.len() != net.layers.len() || opt.moments.len() != net.layers.len() {
        return Err(NetError::DimMismatch {
            want: net.layers.len(),
            got: tape.layers.len(),
            context: "tape layer count",
        });
    }
    opt.step += 1;
    let c1 = 1.0 - libm::pow(opt.beta1, opt.step as f64);
    let c2 = 1.0 - libm::pow(opt.beta2, opt.step as f64);
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let lg = &tape.layers[l];
        if lg.dw.len() != layer.weights.len() || lg.db.len() != layer.biases.len() {
            return Err(NetError::DimMismatch {
                want: layer.weights.len(),
                got: lg.dw.len(),
                context: "tape layer size",
            });
        }
        let hp = (opt.lr, opt.beta1, opt.beta2, opt.eps);
        let (mw, vw, mb, vb) = &mut opt.moments[l];
        adam_update_slice(&mut layer.weights, &lg.dw, mw, vw, hp, c1, c2);
        adam_update_slice(&mut layer.biases, &lg.db, mb, vb, hp, c1, c2);
    }
    Ok(())
}

fn adam_update_slice(
    params: &mut [f32],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (lr, beta1, beta2, eps): (f64, f64, f64, f64),
    c1: f64,
    c2: f64,
) {
    for k in 0..params.len() {
        let g = grads[k];
        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        params[k] = (params[k] as f64 - lr * m_hat / (math::sqrt(v_hat) + eps)) as f32;
    }
}

/// Polyak averaging: `target = tau * online + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), NetError> {
    if target.layers.len() != online.layers.len() {
        return Err(NetError::DimMismatch {
            want: online.layers.len(),
            got: target.layers.len(),
            context: "target layer count",
        });
    }
    for (i, (t, o)) in target.layers.iter_mut().zip(&online.layers).enumerate() {
        if t.in_dim != o.in_dim || t.out_dim != o.out_dim {
            return Err(NetError::DimMismatch {
                want: o.in_dim * o.out_dim,
                got: t.in_dim * t.out_dim,
                context: "target layer shape",
            });
        }
        if t.activation != o.activation {
            return Err(NetError::ActivationMismatch { index: i });
        }
        for (tp, op) in t.weights.iter_mut().zip(&o.weights) {
            *tp = (tau * *op as f64 + (1.0 - tau) * *tp as f64) as f32;
        }
        for (tp, op) in t.biases.iter_mut().zip(&o.biases) {
            *tp = (tau * *op as f64 + (1.0 - tau) * *tp as f64) as f32;
        }
    }
    Ok(())
}

const MAGIC: &[u8; 4] = b"IKHM";
const VERSION: u32 = 1;

/// Serializes a network to the `IKHM` checkpoint layout:
///
/// ```text
/// "IKHM" | u32 version | u32 layer_count
/// per layer: u32 in_dim | u32 out_dim | u8 activation tag
///            f32 weights (out*in, row-major) | f32 biases (out)
/// ```
///
/// All integers and floats are little-endian.
pub fn encode_checkpoint(net: &Mlp) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + net.param_count() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for layer in &net.layers {
        buf.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
        buf.push(layer.activation.tag());
        for w in &layer.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.biases {
            buf.extend_from_slice(&b.to_le_bytes());
        }
    }
    buf
}

/// Parses checkpoint bytes produced by [`encode_checkpoint`].
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Mlp, CheckpointError> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionUnsupported(version));
    }
    let layer_count = rd.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count.min(1024));
    for _ in 0..layer_count {
        let in_dim = rd.u32()? as usize;
        let out_dim = rd.u32()? as usize;
        let tag = rd.u8()?;
        let activation =
            Activation::from_tag(tag).ok_or(CheckpointError::BadActivationTag(tag))?;
        let weights = rd.f32s(in_dim.checked_mul(out_dim).ok_or(CheckpointError::TruncatedFile)?)?;
        let biases = rd.f32s(out_dim)?;
        let layer = Layer::from_parts(in_dim, out_dim, activation, weights, biases)
            .map_err(CheckpointError::InvalidNetwork)?;
        layers.push(layer);
    }
    if rd.pos != bytes.len() {
        return Err(CheckpointError::TrailingData);
    }
    Mlp::from_layers(layers).map_err(CheckpointError::InvalidNetwork)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::TruncatedFile)?;
        if end > self.bytes.len() {
            return Err(CheckpointError::TruncatedFile);
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        let b = self.take(n.checked_mul(4).ok_or(CheckpointError::TruncatedFile)?)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Streaming FNV-1a (64-bit) used for parameter freeze checks.
#[derive(Debug, Clone)]
pub(crate) struct Fnv1a(u64);

impl Fnv1a {
    pub(crate) fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
