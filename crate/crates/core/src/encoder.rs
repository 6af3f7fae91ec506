//! The state encoder `psi` (an MLP), the learned square matrix `A`, and
//! exact reverse-mode gradients for both.
//!
//! The initial-state encoder is `phi(x) = A psi(x)`; the future-state
//! encoder is `psi` itself.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GMC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `h`.
    #[inline]
    fn grad_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// MLP with a shared hidden activation and a linear output layer.
/// `weights[l]` is `layer_sizes[l + 1] x layer_sizes[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
    pub activation: Activation,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(layer_sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must have at least an input and an output and no zeros, got {layer_sizes:?}"
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(Vector::zeros(fan_out));
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated on construction")
    }

    fn num_layers(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::InvalidArgument("inconsistent MLP layer count".into()));
        }
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if w.rows() != o || w.cols() != i || b.dim() != o {
                return Err(Error::dims(
                    "MlpParams",
                    format!("layer {l}: {o}x{i} weights, {o} biases"),
                    format!("{}x{} weights, {} biases", w.rows(), w.cols(), b.dim()),
                ));
            }
        }
        Ok(())
    }

    /// Batched forward pass over the rows of `x`.
    pub fn forward_batch(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::dims("psi_forward", self.input_dim(), x.cols()));
        }
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.matmul_t(w)?;
            let width = b.dim();
            for row in z.data_mut().chunks_exact_mut(width) {
                for (v, bias) in row.iter_mut().zip(b.iter()) {
                    *v += bias;
                    if l != last {
                        *v = self.activation.apply(*v);
                    }
                }
            }
            inputs.push(std::mem::replace(&mut h, z));
        }
        Ok((h, MlpCache { inputs }))
    }

    /// Backpropagates `d_out` (gradient w.r.t. the outputs of
    /// [`MlpParams::forward_batch`]) and accumulates into `weights`/`biases`.
    pub fn backward_batch(
        &self,
        cache: &MlpCache,
        d_out: &Matrix,
        d_weights: &mut [Matrix],
        d_biases: &mut [Vector],
    ) -> Result<()> {
        let mut delta = d_out.clone();
        for l in (0..self.num_layers()).rev() {
            let input = &cache.inputs[l];
            let gw = delta.t_matmul(input)?;
            for (acc, g) in d_weights[l].data_mut().iter_mut().zip(gw.data()) {
                *acc += g;
            }
            let width = delta.cols();
            for row in delta.data().chunks_exact(width) {
                for (acc, g) in d_biases[l].iter_mut().zip(row) {
                    *acc += g;
                }
            }
            if l > 0 {
                let mut d_in = delta.matmul(&self.weights[l])?;
                // the input of layer l is the activation output of layer l-1
                for (d, h) in d_in.data_mut().iter_mut().zip(input.data()) {
                    *d *= self.activation.grad_from_output(*h);
                }
                delta = d_in;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vector> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let (out, _) = self.forward_batch(&m)?;
        Ok(Vector::new(out.data().to_vec()))
    }
}

/// Layer inputs retained for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPair {
    pub psi: MlpParams,
    pub a_matrix: Matrix,
    /// Norm budget: `(1/k) E ||psi(x)||^2 <= c`.
    pub c: f64,
    pub dual_lambda: f64,
    /// Optimizer steps taken so far.
    pub steps: u64,
}

impl EncoderPair {
    /// Fresh encoder: Glorot MLP, `A = I`.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden: &[usize],
        repr_dim: usize,
        activation: Activation,
        c: f64,
        dual_lambda: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(repr_dim);
        let psi = MlpParams::init(&sizes, activation, rng)?;
        let enc = EncoderPair {
            psi,
            a_matrix: Matrix::identity(repr_dim),
            c,
            dual_lambda,
            steps: 0,
        };
        enc.validate()?;
        Ok(enc)
    }

    pub fn repr_dim(&self) -> usize {
        self.a_matrix.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.psi.input_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.psi.validate()?;
        let k = self.psi.output_dim();
        if self.a_matrix.rows() != k || self.a_matrix.cols() != k {
            return Err(Error::dims(
                "EncoderPair",
                format!("{k}x{k} A matrix"),
                format!("{}x{}", self.a_matrix.rows(), self.a_matrix.cols()),
            ));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!("c must be positive, got {}", self.c)));
        }
        if !(self.dual_lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dual lambda must be nonnegative, got {}",
                self.dual_lambda
            )));
        }
        Ok(())
    }

    pub fn psi(&self, x: &[f64]) -> Result<Vector> {
        self.psi.forward(x)
    }

    pub fn phi(&self, x: &[f64]) -> Result<Vector> {
        self.a_matrix.matvec(&self.psi(x)?)
    }

    /// `psi` over many observations at once.
    pub fn psi_many(&self, xs: &[Vector]) -> Result<Vec<Vector>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let d = self.input_dim();
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(1024) {
            let mut flat = Vec::with_capacity(chunk.len() * d);
            for x in chunk {
                if x.dim() != d {
                    return Err(Error::dims("psi_forward", d, x.dim()));
                }
                flat.extend_from_slice(x);
            }
            let (reps, _) = self.psi.forward_batch(&Matrix::from_vec(chunk.len(), d, flat)?)?;
            out.extend((0..chunk.len()).map(|i| Vector::new(reps.row(i).to_vec())));
        }
        Ok(out)
    }

    /// Forward pass over a batch of `(x, x+)` pairs, keeping what the
    /// backward pass needs. Anchors and positives share one MLP pass.
    pub fn forward_pairs(&self, anchors: &Matrix, positives: &Matrix) -> Result<PairForward> {
        if anchors.rows() != positives.rows() {
            return Err(Error::dims("forward_pairs", anchors.rows(), positives.rows()));
        }
        let b = anchors.rows();
        let d = anchors.cols();
        let mut stacked = Vec::with_capacity(2 * b * d);
        stacked.extend_from_slice(anchors.data());
        stacked.extend_from_slice(positives.data());
        let (out, cache) = self.psi.forward_batch(&Matrix::from_vec(2 * b, d, stacked)?)?;
        let k = self.repr_dim();
        let psi_anchor = Matrix::from_vec(b, k, out.data()[..b * k].to_vec())?;
        let psi_pos = Matrix::from_vec(b, k, out.data()[b * k..].to_vec())?;
        let phi = psi_anchor.matmul_t(&self.a_matrix)?;
        Ok(PairForward {
            psi_anchor,
            phi,
            psi_pos,
            cache,
        })
    }

    /// Flat views of every parameter tensor in declaration order
    /// (all weights, all biases, then `A`).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.psi.weights.iter().map(Matrix::data).collect();
        v.extend(self.psi.biases.iter().map(Vector::as_slice));
        v.push(self.a_matrix.data());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.psi.weights.iter_mut().map(Matrix::data_mut).collect();
        v.extend(self.psi.biases.iter_mut().map(|b| &mut b[..]));
        v.push(self.a_matrix.data_mut());
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_checkpoint(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_checkpoint(&bytes)
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = CheckpointHeader {
            layer_sizes: self.psi.layer_sizes.clone(),
            activation: self.psi.activation,
            k: self.repr_dim(),
            c: self.c,
            dual_lambda: self.dual_lambda,
            steps: self.steps,
        };
        w.write_all(CHECKPOINT_MAGIC)?;
        let text = serde_json::to_string(&header).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        for t in self.tensors() {
            for v in t {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Corrupt {
                offset: 0,
                msg: "missing GMC1 magic".into(),
            });
        }
        let nl = bytes[4..].iter().position(|&b| b == b'\n').ok_or(Error::Corrupt {
            offset: bytes.len() as u64,
            msg: "unterminated checkpoint header".into(),
        })?;
        let header_text = std::str::from_utf8(&bytes[4..4 + nl]).map_err(|e| Error::Corrupt {
            offset: 4 + e.valid_up_to() as u64,
            msg: "header is not UTF-8".into(),
        })?;
        let header: CheckpointHeader = serde_json::from_str(header_text).map_err(|e| Error::Corrupt {
            offset: 4,
            msg: format!("bad checkpoint header: {e}"),
        })?;
        if header.layer_sizes.last() != Some(&header.k) {
            return Err(Error::Corrupt {
                offset: 4,
                msg: format!("header k={} disagrees with layer sizes {:?}", header.k, header.layer_sizes),
            });
        }
        let payload_start = 4 + nl + 1;
        let mut enc = EncoderPair {
            psi: MlpParams {
                layer_sizes: header.layer_sizes.clone(),
                weights: header
                    .layer_sizes
                    .windows(2)
                    .map(|w| Matrix::zeros(w[1], w[0]))
                    .collect(),
                biases: header.layer_sizes[1..].iter().map(|&n| Vector::zeros(n)).collect(),
                activation: header.activation,
            },
            a_matrix: Matrix::zeros(header.k, header.k),
            c: header.c,
            dual_lambda: header.dual_lambda,
            steps: header.steps,
        };
        let expected = enc.num_params() * 4;
        let payload = &bytes[payload_start..];
        if payload.len() != expected {
            return Err(Error::Corrupt {
                offset: (payload_start + payload.len().min(expected)) as u64,
                msg: format!("payload is {} bytes, header implies {expected}", payload.len()),
            });
        }
        let mut reader = payload;
        for t in enc.tensors_mut() {
            for v in t.iter_mut() {
                let mut buf = [0u8; 4];
                reader.read_exact(&mut buf)?;
                let x = f32::from_le_bytes(buf);
                if !x.is_finite() {
                    return Err(Error::Corrupt {
                        offset: (payload.len() - reader.len()) as u64 + payload_start as u64 - 4,
                        msg: "non-finite parameter".into(),
                    });
                }
                *v = x as f64;
            }
        }
        enc.validate()?;
        Ok(enc)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    layer_sizes: Vec<usize>,
    activation: Activation,
    k: usize,
    c: f64,
    dual_lambda: f64,
    steps: u64,
}

/// Outputs of [`EncoderPair::forward_pairs`]: `B x k` matrices for
/// `psi(x_i)`, `phi(x_i) = A psi(x_i)` and `psi(x_i+)`.
#[derive(Debug, Clone)]
pub struct PairForward {
    pub psi_anchor: Matrix,
    pub phi: Matrix,
    pub psi_pos: Matrix,
    cache: MlpCache,
}

/// Upstream gradients of a scalar loss w.r.t. the pair outputs, each `B x k`.
#[derive(Debug, Clone)]
pub struct UpstreamGrads {
    pub d_phi: Matrix,
    pub d_psi_anchor: Matrix,
    pub d_psi_pos: Matrix,
}

impl UpstreamGrads {
    pub fn zeros(b: usize, k: usize) -> Self {
        UpstreamGrads {
            d_phi: Matrix::zeros(b, k),
            d_psi_anchor: Matrix::zeros(b, k),
            d_psi_pos: Matrix::zeros(b, k),
        }
    }
}

/// Parameter gradients, shape-congruent with an [`EncoderPair`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
    pub a_matrix: Matrix,
}

impl GradientBundle {
    pub fn zeros_like(enc: &EncoderPair) -> Self {
        GradientBundle {
            weights: enc.psi.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: enc.psi.biases.iter().map(|b| Vector::zeros(b.dim())).collect(),
            a_matrix: Matrix::zeros(enc.repr_dim(), enc.repr_dim()),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.weights.iter().map(Matrix::data).collect();
        v.extend(self.biases.iter().map(Vector::as_slice));
        v.push(self.a_matrix.data());
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl PairForward {
    pub fn batch_size(&self) -> usize {
        self.phi.rows()
    }

    /// Exact reverse-mode gradients. `A` only receives gradient through
    /// the `phi` outputs.
    pub fn backward(&self, enc: &EncoderPair, up: &UpstreamGrads) -> Result<GradientBundle> {
        let (b, k) = (self.phi.rows(), self.phi.cols());
        for (name, m) in [("d_phi", &up.d_phi), ("d_psi_anchor", &up.d_psi_anchor), ("d_psi_pos", &up.d_psi_pos)] {
            if m.rows() != b || m.cols() != k {
                return Err(Error::dims(name, format!("{b}x{k}"), format!("{}x{}", m.rows(), m.cols())));
            }
        }
        let mut grads = GradientBundle::zeros_like(enc);
        // phi_i = A psi_i  =>  dA = sum_i d_phi_i psi_i^T,  d_psi_i += A^T d_phi_i
        grads.a_matrix = up.d_phi.t_matmul(&self.psi_anchor)?;
        let through_a = up.d_phi.matmul(&enc.a_matrix)?;
        let mut d_out = Vec::with_capacity(2 * b * k);
        d_out.extend(through_a.data().iter().zip(up.d_psi_anchor.data()).map(|(a, b)| a + b));
        d_out.extend_from_slice(up.d_psi_pos.data());
        let d_out = Matrix::from_vec(2 * b, k, d_out)?;
        enc.psi
            .backward_batch(&self.cache, &d_out, &mut grads.weights, &mut grads.biases)?;
        Ok(grads)
    }
}

pub fn psi_forward(enc: &EncoderPair, x: &Vector) -> Result<Vector> {
    enc.psi(x)
}

pub fn phi_forward(enc: &EncoderPair, x: &Vector) -> Result<Vector> {
    enc.phi(x)
}

/// Gradients of a scalar loss over a batch of `(x, x+)` pairs given the
/// upstream gradients w.r.t. `phi(x)`, `psi(x)` and `psi(x+)`.
pub fn backward(
    enc: &EncoderPair,
    batch: &[(Vector, Vector)],
    upstream: &UpstreamGrads,
) -> Result<GradientBundle> {
    let d = enc.input_dim();
    let b = batch.len();
    let mut xs = Vec::with_capacity(b * d);
    let mut ps = Vec::with_capacity(b * d);
    for (x, p) in batch {
        if x.dim() != d || p.dim() != d {
            return Err(Error::dims("backward", d, x.dim().max(p.dim())));
        }
        xs.extend_from_slice(x);
        ps.extend_from_slice(p);
    }
    let fwd = enc.forward_pairs(&Matrix::from_vec(b, d, xs)?, &Matrix::from_vec(b, d, ps)?)?;
    fwd.backward(enc, upstream)
}
