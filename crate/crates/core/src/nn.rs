//! Minimal dense networks in double precision: exact reverse-mode gradients,
//! orthogonal initialization, and a little-endian checkpoint format.
//!
//! Parameters live in a flat [`ParamVector`] with a canonical layout: layer by
//! layer, weight matrix row-major (out × in) followed by the bias vector. The
//! flat vector is the unit the consensus layer exchanges.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed parameter data: {0}")]
    Malformed(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// What the raw network output feeds: a softmax over action logits or a bare
/// scalar value estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    Logits,
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub head: OutputHead,
}

impl MlpSpec {
    pub fn single_hidden(input: usize, hidden: usize, output: usize, head: OutputHead) -> Self {
        Self {
            layer_sizes: vec![input, hidden, output],
            activation: Activation::Tanh,
            head,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_sizes.len() < 2 {
            return Err(NnError::InvalidSpec("need at least one layer".into()));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(NnError::InvalidSpec("zero-width layer".into()));
        }
        if self.head == OutputHead::Scalar && self.output_size() != 1 {
            return Err(NnError::InvalidSpec("scalar head needs output size 1".into()));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Total weight + bias count.
    pub fn param_len(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Offset of layer `l`'s weights and biases in the flat layout.
    fn layer_offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut offset = 0;
        for k in 0..l {
            let (inp, out) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            offset += inp * out + out;
        }
        let (inp, out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (offset, offset + inp * out, inp, out)
    }
}

/// Flat parameter (or gradient) vector in the canonical layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// self += a·x.
    pub fn axpy(&mut self, a: f64, x: &ParamVector) {
        assert_eq!(self.len(), x.len(), "axpy dimension mismatch");
        for (s, &v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.0 {
            *s *= a;
        }
    }

    pub fn l2_distance(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len(), "distance dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Component-wise mean of equally sized vectors.
    pub fn mean_of(vectors: &[&ParamVector]) -> ParamVector {
        assert!(!vectors.is_empty());
        let len = vectors[0].len();
        let mut out = vec![0.0; len];
        for v in vectors {
            assert_eq!(v.len(), len, "mean dimension mismatch");
            for (o, &x) in out.iter_mut().zip(&v.0) {
                *o += x;
            }
        }
        let scale = 1.0 / vectors.len() as f64;
        for o in &mut out {
            *o *= scale;
        }
        ParamVector(out)
    }
}

fn activate(x: f64, activation: Activation) -> f64 {
    match activation {
        Activation::Tanh => x.tanh(),
        Activation::Relu => x.max(0.0),
    }
}

/// Derivative expressed through the post-activation value.
fn activate_grad(post: f64, activation: Activation) -> f64 {
    match activation {
        Activation::Tanh => 1.0 - post * post,
        Activation::Relu => {
            if post > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

struct Trace {
    /// activations[0] = input, activations[l+1] = output of layer l
    /// (post-activation on hidden layers, raw on the last).
    activations: Vec<Vec<f64>>,
}

fn check_shapes(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<(), NnError> {
    if params.len() != spec.param_len() {
        return Err(NnError::DimensionMismatch(format!(
            "params has {} values, spec needs {}",
            params.len(),
            spec.param_len()
        )));
    }
    if input.len() != spec.input_size() {
        return Err(NnError::DimensionMismatch(format!(
            "input has {} values, spec needs {}",
            input.len(),
            spec.input_size()
        )));
    }
    Ok(())
}

fn forward_trace(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Trace {
    let p = params.as_slice();
    let mut activations = Vec::with_capacity(spec.num_layers() + 1);
    activations.push(input.to_vec());
    for l in 0..spec.num_layers() {
        let (w0, b0, inp, out) = spec.layer_offsets(l);
        let prev = activations.last().unwrap();
        let mut next = Vec::with_capacity(out);
        for row in 0..out {
            let mut z = p[b0 + row];
            let w_row = &p[w0 + row * inp..w0 + (row + 1) * inp];
            for (wi, ai) in w_row.iter().zip(prev) {
                z += wi * ai;
            }
            if l + 1 < spec.num_layers() {
                z = activate(z, spec.activation);
            }
            next.push(z);
        }
        activations.push(next);
    }
    Trace { activations }
}

/// Raw network output (logits or the scalar estimate, before any head).
pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>, NnError> {
    check_shapes(spec, params, input)?;
    Ok(forward_trace(spec, params, input).activations.pop().unwrap())
}

/// Numerically safe softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Action distribution of a logits-headed network.
pub fn policy_forward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
) -> Result<Vec<f64>, NnError> {
    let logits = forward(spec, params, input)?;
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(NnError::NonFinite("policy logits"));
    }
    Ok(softmax(&logits))
}

/// Scalar estimate of a scalar-headed network.
pub fn value_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<f64, NnError> {
    let out = forward(spec, params, input)?;
    let v = out[0];
    if !v.is_finite() {
        return Err(NnError::NonFinite("value output"));
    }
    Ok(v)
}

/// Gradient of `upstream · output(params, input)` with respect to every
/// parameter, in the canonical layout.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    upstream: &[f64],
) -> Result<ParamVector, NnError> {
    check_shapes(spec, params, input)?;
    if upstream.len() != spec.output_size() {
        return Err(NnError::DimensionMismatch(format!(
            "upstream has {} values, output size is {}",
            upstream.len(),
            spec.output_size()
        )));
    }

    let trace = forward_trace(spec, params, input);
    let p = params.as_slice();
    let mut grad = vec![0.0; spec.param_len()];
    let mut delta = upstream.to_vec();

    for l in (0..spec.num_layers()).rev() {
        let (w0, b0, inp, out) = spec.layer_offsets(l);
        let prev = &trace.activations[l];
        for row in 0..out {
            let d = delta[row];
            grad[b0 + row] = d;
            let g_row = &mut grad[w0 + row * inp..w0 + (row + 1) * inp];
            for (gi, ai) in g_row.iter_mut().zip(prev) {
                *gi = d * ai;
            }
        }
        if l > 0 {
            let mut next_delta = vec![0.0; inp];
            for row in 0..out {
                let d = delta[row];
                let w_row = &p[w0 + row * inp..w0 + (row + 1) * inp];
                for (nd, wi) in next_delta.iter_mut().zip(w_row) {
                    *nd += d * wi;
                }
            }
            for (nd, post) in next_delta.iter_mut().zip(prev) {
                *nd *= activate_grad(*post, spec.activation);
            }
            delta = next_delta;
        }
    }
    Ok(ParamVector(grad))
}

/// Fill one `rows × cols` matrix (row-major) whose smaller-dimension vector
/// family is orthonormal, scaled by `gain`. Two-pass modified Gram-Schmidt on
/// Gaussian draws.
fn orthogonal_matrix(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n_vec = rows.min(cols);
    let dim = rows.max(cols);

    let mut basis: Vec<Vec<f64>> = (0..n_vec)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    for i in 0..n_vec {
        let (done, rest) = basis.split_at_mut(i);
        let v = &mut rest[0];
        // Project out the already-orthonormal vectors twice for stability.
        for _ in 0..2 {
            for u in done.iter() {
                let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-300, "degenerate Gaussian sample");
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }

    let mut w = vec![0.0; rows * cols];
    if rows >= cols {
        // columns orthonormal: W[:, j] = basis[j]
        for (j, v) in basis.iter().enumerate() {
            for (i, &x) in v.iter().enumerate() {
                w[i * cols + j] = gain * x;
            }
        }
    } else {
        // rows orthonormal: W[i, :] = basis[i]
        for (i, v) in basis.iter().enumerate() {
            for (j, &x) in v.iter().enumerate() {
                w[i * cols + j] = gain * x;
            }
        }
    }
    w
}

/// Orthogonally initialized parameters: hidden layers scaled by
/// `hidden_gain`, the output layer by `output_gain`, biases zero.
pub fn init_orthogonal(
    spec: &MlpSpec,
    hidden_gain: f64,
    output_gain: f64,
    seed: u64,
) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; spec.param_len()];
    for l in 0..spec.num_layers() {
        let (w0, _b0, inp, out) = spec.layer_offsets(l);
        let gain = if l + 1 == spec.num_layers() {
            output_gain
        } else {
            hidden_gain
        };
        let w = orthogonal_matrix(out, inp, gain, &mut rng);
        values[w0..w0 + out * inp].copy_from_slice(&w);
    }
    ParamVector(values)
}

const ACTIVATION_TAGS: [(Activation, u8); 2] = [(Activation::Tanh, 0), (Activation::Relu, 1)];
const HEAD_TAGS: [(OutputHead, u8); 2] = [(OutputHead::Logits, 0), (OutputHead::Scalar, 1)];

/// Append the checkpoint encoding of one network: layer count and sizes as
/// u32, activation and head tags as u8, then the raw f64 values, all
/// little-endian.
pub fn write_params(out: &mut Vec<u8>, spec: &MlpSpec, params: &ParamVector) {
    assert_eq!(params.len(), spec.param_len(), "params/spec mismatch");
    out.extend_from_slice(&(spec.layer_sizes.len() as u32).to_le_bytes());
    for &s in &spec.layer_sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.push(
        ACTIVATION_TAGS
            .iter()
            .find(|(a, _)| *a == spec.activation)
            .unwrap()
            .1,
    );
    out.push(HEAD_TAGS.iter().find(|(h, _)| *h == spec.head).unwrap().1);
    for &x in params.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], NnError> {
    if *pos + n > bytes.len() {
        return Err(NnError::Malformed("truncated checkpoint".into()));
    }
    let slice = &bytes[*pos..*pos + n];
    *pos += n;
    Ok(slice)
}

/// Inverse of [`write_params`]; advances `pos` past the consumed bytes.
pub fn read_params(bytes: &[u8], pos: &mut usize) -> Result<(MlpSpec, ParamVector), NnError> {
    let n_sizes = u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()) as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(NnError::Malformed(format!("bad layer count {n_sizes}")));
    }
    let mut layer_sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        let s = u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()) as usize;
        layer_sizes.push(s);
    }
    let activation_tag = take(bytes, pos, 1)?[0];
    let head_tag = take(bytes, pos, 1)?[0];
    let activation = ACTIVATION_TAGS
        .iter()
        .find(|(_, t)| *t == activation_tag)
        .map(|(a, _)| *a)
        .ok_or_else(|| NnError::Malformed(format!("bad activation tag {activation_tag}")))?;
    let head = HEAD_TAGS
        .iter()
        .find(|(_, t)| *t == head_tag)
        .map(|(h, _)| *h)
        .ok_or_else(|| NnError::Malformed(format!("bad head tag {head_tag}")))?;
    let spec = MlpSpec {
        layer_sizes,
        activation,
        head,
    };
    spec.validate().map_err(|e| NnError::Malformed(e.to_string()))?;

    let mut values = Vec::with_capacity(spec.param_len());
    for _ in 0..spec.param_len() {
        let x = f64::from_le_bytes(take(bytes, pos, 8)?.try_into().unwrap());
        values.push(x);
    }
    Ok((spec, ParamVector(values)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn actor_spec() -> MlpSpec {
        MlpSpec::single_hidden(5, 16, 4, OutputHead::Logits)
    }

    fn critic_spec() -> MlpSpec {
        MlpSpec::single_hidden(5, 16, 1, OutputHead::Scalar)
    }

    #[test]
    fn param_len_counts_weights_and_biases() {
        assert_eq!(
            MlpSpec::single_hidden(5, 64, 4, OutputHead::Logits).param_len(),
            5 * 64 + 64 + 64 * 4 + 4
        );
    }

    #[test]
    fn orthogonal_square_layer_is_orthogonal() {
        let spec = MlpSpec {
            layer_sizes: vec![6, 6],
            activation: Activation::Tanh,
            head: OutputHead::Logits,
        };
        let gain = 1.3;
        let p = init_orthogonal(&spec, 1.0, gain, 5);
        let w = &p.as_slice()[..36];
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = (0..6).map(|k| w[k * 6 + i] * w[k * 6 + j]).sum();
                let expect = if i == j { gain * gain } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "WᵀW[{i}][{j}] = {dot}");
            }
        }
    }

    #[test]
    fn orthogonal_tall_and_wide_layers() {
        let spec = actor_spec(); // 16x5 (tall) then 4x16 (wide)
        let p = init_orthogonal(&spec, 1.0, 0.01, 0);
        let w1 = &p.as_slice()[..16 * 5];
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..16).map(|k| w1[k * 5 + i] * w1[k * 5 + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
        let (w0, _, inp, out) = spec.layer_offsets(1);
        let w2 = &p.as_slice()[w0..w0 + out * inp];
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..16).map(|k| w2[i * 16 + k] * w2[j * 16 + k]).sum();
                let expect = if i == j { 0.01 * 0.01 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn init_biases_are_zero_and_seed_deterministic() {
        let spec = actor_spec();
        let a = init_orthogonal(&spec, 1.0, 0.01, 42);
        let b = init_orthogonal(&spec, 1.0, 0.01, 42);
        assert_eq!(a, b);
        let (_, b0, _, out) = spec.layer_offsets(0);
        assert!(a.as_slice()[b0..b0 + out].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_params_give_uniform_policy_and_zero_value() {
        let spec = actor_spec();
        let probs = policy_forward(&spec, &ParamVector::zeros(spec.param_len()), &[0.1; 5]).unwrap();
        assert_eq!(probs, vec![0.25; 4]);

        let cspec = critic_spec();
        let v = value_forward(&cspec, &ParamVector::zeros(cspec.param_len()), &[0.3; 5]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn policy_sums_to_one() {
        let spec = actor_spec();
        let p = init_orthogonal(&spec, 1.0, 1.0, 3);
        let probs = policy_forward(&spec, &p, &[0.5, -1.0, 0.2, 0.0, 1.5]).unwrap();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn crafted_logits_pick_argmax() {
        // Single affine layer, zero weights, bias (10, 0, 0, 0).
        let spec = MlpSpec {
            layer_sizes: vec![5, 4],
            activation: Activation::Tanh,
            head: OutputHead::Logits,
        };
        let mut p = ParamVector::zeros(spec.param_len());
        p.as_mut_slice()[5 * 4] = 10.0;
        let probs = policy_forward(&spec, &p, &[0.0; 5]).unwrap();
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn non_finite_params_are_reported() {
        // NaN propagates through tanh; an Inf in a hidden weight would be
        // squashed, so corruption is signalled at the output.
        let spec = critic_spec();
        let mut p = ParamVector::zeros(spec.param_len());
        p.as_mut_slice()[0] = f64::NAN;
        assert_eq!(
            value_forward(&spec, &p, &[1.0; 5]),
            Err(NnError::NonFinite("value output"))
        );

        let aspec = actor_spec();
        let mut p = ParamVector::zeros(aspec.param_len());
        *p.as_mut_slice().last_mut().unwrap() = f64::INFINITY;
        assert_eq!(
            policy_forward(&aspec, &p, &[1.0; 5]),
            Err(NnError::NonFinite("policy logits"))
        );
    }

    #[test]
    fn backward_matches_finite_differences() {
        let spec = critic_spec();
        let input = [0.3, -0.7, 1.2, 0.05, -0.4];
        for seed in 0..5u64 {
            let p = init_orthogonal(&spec, 1.0, 1.0, seed);
            let grad = backward(&spec, &p, &input, &[1.0]).unwrap();
            let fd = crate::fixtures::finite_difference_oracle(
                |q| value_forward(&spec, q, &input).unwrap(),
                &p,
                1e-5,
            );
            for (g, f) in grad.as_slice().iter().zip(fd.as_slice()) {
                assert!((g - f).abs() < 1e-7, "grad {g} vs fd {f}");
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let spec = actor_spec();
        let p = init_orthogonal(&spec, 1.0, 0.01, 1);
        let grad = backward(&spec, &p, &[0.1; 5], &[0.0; 4]).unwrap();
        assert!(grad.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_checks_dimensions() {
        let spec = actor_spec();
        let p = ParamVector::zeros(spec.param_len());
        assert!(matches!(
            backward(&spec, &p, &[0.1; 5], &[0.0; 3]),
            Err(NnError::DimensionMismatch(_))
        ));
        assert!(matches!(
            backward(&spec, &p, &[0.1; 4], &[0.0; 4]),
            Err(NnError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let spec = actor_spec();
        let p = init_orthogonal(&spec, 1.0, 0.01, 9);
        let mut bytes = Vec::new();
        write_params(&mut bytes, &spec, &p);
        let mut pos = 0;
        let (spec2, p2) = read_params(&bytes, &mut pos).unwrap();
        assert_eq!(pos, bytes.len());
        assert_eq!(spec, spec2);
        assert_eq!(p, p2);
    }

    #[test]
    fn truncated_checkpoint_is_malformed() {
        let spec = critic_spec();
        let p = ParamVector::zeros(spec.param_len());
        let mut bytes = Vec::new();
        write_params(&mut bytes, &spec, &p);
        bytes.truncate(bytes.len() - 3);
        let mut pos = 0;
        assert!(matches!(
            read_params(&bytes, &mut pos),
            Err(NnError::Malformed(_))
        ));
    }

    #[test]
    fn relu_forward_and_backward() {
        let spec = MlpSpec {
            layer_sizes: vec![3, 4, 2],
            activation: Activation::Relu,
            head: OutputHead::Logits,
        };
        let p = init_orthogonal(&spec, 1.0, 1.0, 11);
        // Keep inputs away from ReLU kinks for the finite-difference check.
        let input = [0.37, -0.91, 0.53];
        let out = forward(&spec, &p, &input).unwrap();
        let grad = backward(&spec, &p, &input, &[1.0, -0.5]).unwrap();
        let fd = crate::fixtures::finite_difference_oracle(
            |q| {
                let o = forward(&spec, q, &input).unwrap();
                o[0] - 0.5 * o[1]
            },
            &p,
            1e-6,
        );
        assert_eq!(out.len(), 2);
        for (g, f) in grad.as_slice().iter().zip(fd.as_slice()) {
            assert!((g - f).abs() < 1e-6);
        }
    }
}
