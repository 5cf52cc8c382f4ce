//! Dense feed-forward networks on flat `f64` parameter vectors.
//!
//! Conventions, which the gradient tape and the checkpoint format both rely
//! on: parameters are stored layer by layer, each layer as its weight matrix
//! in row-major `[fan_out x fan_in]` order followed by `fan_out` biases. All
//! arithmetic is plain `f64` with no reordering, so a forward pass is
//! bit-reproducible for fixed weights and input.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => crate::math::tanh(x),
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation input and the produced output.
    #[inline]
    pub fn derivative(self, input: f64, output: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - output * output,
            Activation::Relu => {
                if input > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
}

/// A fully connected network: layer specs plus one flat weight vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    specs: Vec<LayerSpec>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetError {
    NoLayers,
    LayerMismatch { layer: usize, expected: usize, got: usize },
    ZeroWidth { layer: usize },
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::NoLayers => write!(f, "network needs at least one layer"),
            NetError::LayerMismatch { layer, expected, got } => write!(
                f,
                "layer {layer} expects fan_in {expected} but previous layer produces {got}"
            ),
            NetError::ZeroWidth { layer } => write!(f, "layer {layer} has a zero dimension"),
        }
    }
}

impl core::error::Error for NetError {}

fn validate(specs: &[LayerSpec]) -> Result<(), NetError> {
    if specs.is_empty() {
        return Err(NetError::NoLayers);
    }
    for (i, s) in specs.iter().enumerate() {
        if s.fan_in == 0 || s.fan_out == 0 {
            return Err(NetError::ZeroWidth { layer: i });
        }
        if i > 0 && s.fan_in != specs[i - 1].fan_out {
            return Err(NetError::LayerMismatch {
                layer: i,
                expected: s.fan_in,
                got: specs[i - 1].fan_out,
            });
        }
    }
    Ok(())
}

/// Builds the spec list for a plain MLP: `input -> hidden... -> output`.
pub fn mlp_specs(
    input: usize,
    hidden: &[usize],
    output: usize,
    hidden_act: Activation,
    output_act: Activation,
) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = input;
    for &h in hidden {
        specs.push(LayerSpec { fan_in, fan_out: h, activation: hidden_act });
        fan_in = h;
    }
    specs.push(LayerSpec { fan_in, fan_out: output, activation: output_act });
    specs
}

impl DenseNet {
    /// All-zero weights. Mostly useful in tests that craft weights by hand.
    pub fn zeros(specs: Vec<LayerSpec>) -> Result<Self, NetError> {
        validate(&specs)?;
        let count = specs.iter().map(|s| (s.fan_in + 1) * s.fan_out).sum();
        Ok(DenseNet { specs, weights: vec![0.0; count] })
    }

    /// Fan-in-scaled uniform init: each layer's weights and biases are drawn
    /// from `U(-b, b)` with `b = 1/sqrt(fan_in)`. `final_bound` overrides the
    /// bound of the last layer (policy heads use a tiny bound so the initial
    /// policy is near-uniform).
    pub fn init<R: Rng + ?Sized>(
        specs: Vec<LayerSpec>,
        rng: &mut R,
        final_bound: Option<f64>,
    ) -> Result<Self, NetError> {
        let mut net = Self::zeros(specs)?;
        let last = net.specs.len() - 1;
        let mut offset = 0;
        for i in 0..net.specs.len() {
            let s = net.specs[i];
            let mut bound = 1.0 / crate::math::sqrt(s.fan_in as f64);
            if i == last {
                if let Some(b) = final_bound {
                    bound = b;
                }
            }
            let count = (s.fan_in + 1) * s.fan_out;
            for w in &mut net.weights[offset..offset + count] {
                *w = rng.random_range(-bound..bound);
            }
            offset += count;
        }
        Ok(net)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].fan_out
    }

    /// Plain forward pass. Panics if `input` does not match the first fan_in;
    /// that is a caller bug, not a runtime condition.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "forward input length");
        let mut cur = input.to_vec();
        let mut offset = 0;
        for s in &self.specs {
            let w = &self.weights[offset..offset + s.fan_in * s.fan_out];
            let b = &self.weights[offset + s.fan_in * s.fan_out..offset + (s.fan_in + 1) * s.fan_out];
            let mut next = Vec::with_capacity(s.fan_out);
            for o in 0..s.fan_out {
                let row = &w[o * s.fan_in..(o + 1) * s.fan_in];
                let mut acc = b[o];
                for k in 0..s.fan_in {
                    acc += row[k] * cur[k];
                }
                next.push(s.activation.apply(acc));
            }
            cur = next;
            offset += (s.fan_in + 1) * s.fan_out;
        }
        cur
    }
}

/// Exponential moving average of `online` into `target`:
/// `target <- (1 - tau) * target + tau * online`.
///
/// `tau = 1` copies `online` exactly, `tau = 0` is a no-op (both bit-exact).
pub fn soft_update(target: &mut DenseNet, online: &DenseNet, tau: f64) {
    assert_eq!(target.specs, online.specs, "soft_update shape mismatch");
    for (t, o) in target.weights.iter_mut().zip(online.weights.iter()) {
        *t = (1.0 - tau) * *t + tau * *o;
    }
}

pub const CHECKPOINT_MAGIC: &str = "ELASTIC-CKPT-1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckpointError {
    BadMagic,
    Malformed(String),
    Truncated,
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadMagic => {
                write!(f, "checkpoint header does not start with \"{CHECKPOINT_MAGIC}\"")
            }
            CheckpointError::Malformed(what) => write!(f, "malformed checkpoint: {what}"),
            CheckpointError::Truncated => write!(f, "checkpoint payload shorter than header declares"),
        }
    }
}

impl core::error::Error for CheckpointError {}

impl DenseNet {
    /// Serializes as a self-describing container: an ASCII header with the
    /// magic string, layer count and per-layer `fan_in fan_out activation`
    /// lines, then a `data` marker, then every weight as little-endian f64 in
    /// layer order (row-major matrix, then biases). Round-trips bit-exactly.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(alloc::format!("layers {}\n", self.specs.len()).as_bytes());
        for s in &self.specs {
            out.extend_from_slice(
                alloc::format!("layer {} {} {}\n", s.fan_in, s.fan_out, s.activation.tag())
                    .as_bytes(),
            );
        }
        out.extend_from_slice(b"data\n");
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut pos = 0;
        let mut line = |bytes: &[u8]| -> Result<String, CheckpointError> {
            let start = pos;
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            if pos == bytes.len() {
                return Err(CheckpointError::Truncated);
            }
            let s = core::str::from_utf8(&bytes[start..pos])
                .map_err(|_| CheckpointError::Malformed(String::from("non-UTF8 header")))?;
            pos += 1;
            Ok(String::from(s))
        };

        if line(bytes)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let layers_line = line(bytes)?;
        let n: usize = layers_line
            .strip_prefix("layers ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CheckpointError::Malformed(String::from("layers line")))?;
        if n == 0 {
            return Err(CheckpointError::Malformed(String::from("zero layers")));
        }
        let mut specs = Vec::with_capacity(n);
        for _ in 0..n {
            let l = line(bytes)?;
            let mut parts = l
                .strip_prefix("layer ")
                .ok_or_else(|| CheckpointError::Malformed(String::from("layer line")))?
                .split(' ');
            let fan_in: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CheckpointError::Malformed(String::from("layer fan_in")))?;
            let fan_out: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CheckpointError::Malformed(String::from("layer fan_out")))?;
            let activation = parts
                .next()
                .and_then(Activation::from_tag)
                .ok_or_else(|| CheckpointError::Malformed(String::from("activation tag")))?;
            if parts.next().is_some() {
                return Err(CheckpointError::Malformed(String::from("trailing layer fields")));
            }
            specs.push(LayerSpec { fan_in, fan_out, activation });
        }
        if line(bytes)? != "data" {
            return Err(CheckpointError::Malformed(String::from("missing data marker")));
        }
        let mut net = DenseNet::zeros(specs)
            .map_err(|e| CheckpointError::Malformed(alloc::format!("{e}")))?;
        let need = net.weights.len() * 8;
        let payload = &bytes[pos..];
        if payload.len() < need {
            return Err(CheckpointError::Truncated);
        }
        if payload.len() > need {
            return Err(CheckpointError::Malformed(String::from("trailing bytes after weights")));
        }
        for (i, chunk) in payload.chunks_exact(8).enumerate() {
            net.weights[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn tiny_net() -> DenseNet {
        let specs = mlp_specs(2, &[3], 1, Activation::Tanh, Activation::Identity);
        let mut r = rng::stream(7, 0);
        DenseNet::init(specs, &mut r, None).unwrap()
    }

    #[test]
    fn forward_matches_straight_line_evaluation() {
        // Hand-written evaluation of the same weights, no shared code paths.
        let net = tiny_net();
        let x = [0.3, -0.7];
        let w = net.weights();
        let mut h = [0.0; 3];
        for o in 0..3 {
            let mut acc = w[6 + o];
            for k in 0..2 {
                acc += w[o * 2 + k] * x[k];
            }
            h[o] = acc.tanh();
        }
        let mut y = w[9 + 3];
        for k in 0..3 {
            y += w[9 + k] * h[k];
        }
        assert_eq!(net.forward(&x), vec![y]);
    }

    #[test]
    fn param_count_matches_formula() {
        let net = tiny_net();
        assert_eq!(net.param_count(), (2 + 1) * 3 + (3 + 1) * 1);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let specs = mlp_specs(16, &[8], 4, Activation::Relu, Activation::Identity);
        let mut r = rng::stream(3, 0);
        let net = DenseNet::init(specs, &mut r, Some(1e-3)).unwrap();
        let first = (16 + 1) * 8;
        let bound = 1.0 / (16f64).sqrt();
        for &w in &net.weights()[..first] {
            assert!(w.abs() < bound);
        }
        for &w in &net.weights()[first..] {
            assert!(w.abs() < 1e-3, "final layer bound");
        }
    }

    #[test]
    fn mismatched_specs_rejected() {
        let specs = vec![
            LayerSpec { fan_in: 2, fan_out: 3, activation: Activation::Tanh },
            LayerSpec { fan_in: 4, fan_out: 1, activation: Activation::Identity },
        ];
        assert_eq!(
            DenseNet::zeros(specs),
            Err(NetError::LayerMismatch { layer: 1, expected: 4, got: 3 })
        );
    }

    #[test]
    fn soft_update_endpoints_are_exact() {
        let online = tiny_net();
        let mut r = rng::stream(8, 0);
        let specs = online.specs().to_vec();
        let mut target = DenseNet::init(specs, &mut r, None).unwrap();
        let orig = target.clone();

        soft_update(&mut target, &online, 0.0);
        assert_eq!(target, orig);

        soft_update(&mut target, &online, 1.0);
        assert_eq!(target, online);
    }

    #[test]
    fn soft_update_contracts_geometrically() {
        // 1000 applications of tau = 0.005 shrink the gap below 1% of the
        // initial gap: (1 - 0.005)^1000 ~ 0.0067.
        let online = tiny_net();
        let mut target = DenseNet::zeros(online.specs().to_vec()).unwrap();
        let gap0: f64 = online
            .weights()
            .iter()
            .zip(target.weights())
            .map(|(o, t)| (o - t).abs())
            .fold(0.0, f64::max);
        for _ in 0..1000 {
            soft_update(&mut target, &online, 0.005);
        }
        let gap: f64 = online
            .weights()
            .iter()
            .zip(target.weights())
            .map(|(o, t)| (o - t).abs())
            .fold(0.0, f64::max);
        assert!(gap < 0.01 * gap0, "gap {gap} vs initial {gap0}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = tiny_net();
        let bytes = net.encode();
        let back = DenseNet::decode(&bytes).unwrap();
        assert_eq!(net, back);
        let xs = [0.11, -0.42];
        assert_eq!(net.forward(&xs)[0].to_bits(), back.forward(&xs)[0].to_bits());
    }

    #[test]
    fn checkpoint_bad_magic_is_named() {
        let mut bytes = tiny_net().encode();
        bytes[0] = b'X';
        let err = DenseNet::decode(&bytes).unwrap_err();
        assert_eq!(err, CheckpointError::BadMagic);
        assert!(format!("{err}").contains(CHECKPOINT_MAGIC));
    }

    #[test]
    fn checkpoint_truncation_detected() {
        let bytes = tiny_net().encode();
        let err = DenseNet::decode(&bytes[..bytes.len() - 3]).unwrap_err();
        assert_eq!(err, CheckpointError::Truncated);
    }

    #[test]
    fn checkpoint_trailing_garbage_detected() {
        let mut bytes = tiny_net().encode();
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(DenseNet::decode(&bytes), Err(CheckpointError::Malformed(_))));
    }
}
