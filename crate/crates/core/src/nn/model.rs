use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{cnn, linear, lstm, ParamSet, Tensor2D};
use crate::container::Container;
use crate::util::{self, Fingerprint};
use crate::{Error, Result};

const CHECKPOINT_KIND: &str = "mapping-model";

/// How the BiLSTM turns per-step hidden states into one vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Final forward state concatenated with final backward state.
    #[default]
    Final,
    /// Per-direction mean over timesteps.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variant {
    Linear,
    Cnn {
        windows: Vec<usize>,
        feature_maps: usize,
    },
    Bilstm {
        hidden: usize,
        #[serde(default)]
        readout: Readout,
        /// Skip trailing all-zero (padding) rows.
        #[serde(default)]
        mask_padding: bool,
    },
}

impl Variant {
    pub const NAMES: [&'static str; 3] = ["linear", "cnn", "bilstm"];

    /// Variant with default hyperparameters from its name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "linear" => Ok(Variant::Linear),
            "cnn" => Ok(Variant::Cnn {
                windows: vec![1, 2, 3, 5],
                feature_maps: 128,
            }),
            "bilstm" | "bi-lstm" => Ok(Variant::Bilstm {
                hidden: 200,
                readout: Readout::Final,
                mask_padding: false,
            }),
            other => Err(Error::Config(format!(
                "unknown architecture `{other}`; expected one of {}",
                Variant::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Cnn { .. } => "cnn",
            Variant::Bilstm { .. } => "bilstm",
        }
    }
}

/// Input and output shape plus the variant's hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub seq_len: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub variant: Variant,
}

impl Architecture {
    /// 20 tokens of 200-dim word vectors mapped to 128-dim node space.
    pub fn standard(variant: Variant) -> Self {
        Architecture {
            seq_len: 20,
            input_dim: 200,
            output_dim: 128,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        match &self.variant {
            Variant::Linear => {}
            Variant::Cnn { windows, feature_maps } => {
                if windows.is_empty() || *feature_maps == 0 {
                    return Err(Error::Config("CNN needs windows and feature maps".into()));
                }
                if windows.iter().any(|&w| w == 0 || w > self.seq_len) {
                    return Err(Error::Config(format!(
                        "CNN windows {windows:?} must lie in 1..={}",
                        self.seq_len
                    )));
                }
            }
            Variant::Bilstm { hidden, .. } => {
                if *hidden == 0 {
                    return Err(Error::Config("BiLSTM hidden size must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Parameter names and shapes in storage order.
    pub fn parameter_shapes(&self) -> Vec<(String, usize, usize)> {
        let (l, d, o) = (self.seq_len, self.input_dim, self.output_dim);
        match &self.variant {
            Variant::Linear => vec![("weight".into(), o, l * d)],
            Variant::Cnn { windows, feature_maps } => {
                let f = *feature_maps;
                let mut v = Vec::new();
                for &s in windows {
                    v.push((format!("conv{s}.weight"), f, s * d));
                    v.push((format!("conv{s}.bias"), 1, f));
                }
                v.push(("proj.weight".into(), o, windows.len() * f));
                v.push(("proj.bias".into(), 1, o));
                v
            }
            Variant::Bilstm { hidden, .. } => {
                let h = *hidden;
                let mut v = Vec::new();
                for dir in ["fwd", "bwd"] {
                    v.push((format!("{dir}.w_ih"), 4 * h, d));
                    v.push((format!("{dir}.w_hh"), 4 * h, h));
                    v.push((format!("{dir}.bias"), 1, 4 * h));
                }
                v.push(("proj.weight".into(), o, 2 * h));
                v.push(("proj.bias".into(), 1, o));
                v
            }
        }
    }
}

/// Activations cached by a forward pass for the matching backward pass.
pub struct ForwardPass {
    arch: Architecture,
    input: Tensor2D,
    output: Vec<f64>,
    cache: Cache,
}

enum Cache {
    Linear,
    Cnn(cnn::Cache),
    Lstm(lstm::Cache),
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn input(&self) -> &Tensor2D {
        &self.input
    }
}

/// Gradients for every parameter tensor and for the phrase input.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: ParamSet,
    pub input: Tensor2D,
}

/// A trainable map from phrase matrices to node-space points.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingModel {
    arch: Architecture,
    params: ParamSet,
}

impl MappingModel {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero except the LSTM
    /// forget gates, which start at 1.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = util::rng(seed, 0x6d6f64656c);
        let lstm_hidden = match arch.variant {
            Variant::Bilstm { hidden, .. } => Some(hidden),
            _ => None,
        };
        let entries = arch
            .parameter_shapes()
            .into_iter()
            .map(|(name, rows, cols)| {
                let t = if name.ends_with("bias") {
                    let mut t = Tensor2D::zeros(rows, cols);
                    if let (Some(h), true) = (lstm_hidden, name.starts_with("fwd") || name.starts_with("bwd")) {
                        t.data_mut()[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
                    }
                    t
                } else {
                    let limit = 1.0 / (cols as f64).sqrt();
                    Tensor2D::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
                };
                (name, t)
            })
            .collect();
        Ok(MappingModel {
            arch,
            params: ParamSet::new(entries),
        })
    }

    /// Model with explicit parameters; names and shapes must match the
    /// architecture.
    pub fn from_params(arch: Architecture, params: ParamSet) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.parameter_shapes();
        let ok = shapes.len() == params.len()
            && shapes
                .iter()
                .zip(params.iter())
                .all(|((n, r, c), (name, t))| n == name && t.shape() == (*r, *c));
        if !ok {
            return Err(Error::Shape(format!(
                "parameters do not match the {} architecture",
                arch.variant.name()
            )));
        }
        if !params.iter().all(|(_, t)| t.is_finite()) {
            return Err(Error::Validation("model parameters must be finite".into()));
        }
        Ok(MappingModel { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_input(&self, phrase: &Tensor2D) -> Result<()> {
        let want = (self.arch.seq_len, self.arch.input_dim);
        if phrase.shape() != want {
            return Err(Error::Shape(format!(
                "phrase is {}x{}, model expects {}x{}",
                phrase.rows(),
                phrase.cols(),
                want.0,
                want.1
            )));
        }
        Ok(())
    }

    pub fn forward(&self, phrase: &Tensor2D) -> Result<Vec<f64>> {
        Ok(self.forward_cached(phrase)?.output)
    }

    /// Forward pass that keeps the activations needed by
    /// [`MappingModel::backward`].
    pub fn forward_cached(&self, phrase: &Tensor2D) -> Result<ForwardPass> {
        self.check_input(phrase)?;
        let o = self.arch.output_dim;
        let (output, cache) = match &self.arch.variant {
            Variant::Linear => (linear::forward(&self.params, phrase, o), Cache::Linear),
            Variant::Cnn { windows, feature_maps } => {
                let (out, c) = cnn::forward(&self.params, phrase, windows, *feature_maps, o);
                (out, Cache::Cnn(c))
            }
            Variant::Bilstm {
                hidden,
                readout,
                mask_padding,
            } => {
                let (out, c) = lstm::forward(&self.params, phrase, *hidden, *readout, *mask_padding);
                (out, Cache::Lstm(c))
            }
        };
        Ok(ForwardPass {
            arch: self.arch.clone(),
            input: phrase.clone(),
            output,
            cache,
        })
    }

    /// Accumulate `∂(upstream · output)/∂θ` into `grads` and, when given,
    /// the input gradient into `input_grad`.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        upstream: &[f64],
        grads: &mut ParamSet,
        input_grad: Option<&mut Tensor2D>,
    ) -> Result<()> {
        if pass.arch != self.arch {
            return Err(Error::State(
                "backward called with a forward pass from a different model".into(),
            ));
        }
        if upstream.len() != self.arch.output_dim {
            return Err(Error::Shape(format!(
                "upstream gradient has length {}, expected {}",
                upstream.len(),
                self.arch.output_dim
            )));
        }
        if !grads.same_shape(&self.params) {
            return Err(Error::Shape("gradient buffers do not match parameters".into()));
        }
        if let Some(g) = &input_grad {
            if g.shape() != pass.input.shape() {
                return Err(Error::Shape("input gradient buffer has the wrong shape".into()));
            }
        }
        let x = &pass.input;
        match (&self.arch.variant, &pass.cache) {
            (Variant::Linear, Cache::Linear) => {
                linear::backward(&self.params, x, upstream, grads, input_grad)
            }
            (Variant::Cnn { windows, feature_maps }, Cache::Cnn(c)) => cnn::backward(
                &self.params,
                x,
                c,
                windows,
                *feature_maps,
                upstream,
                grads,
                input_grad,
            ),
            (Variant::Bilstm { hidden, readout, .. }, Cache::Lstm(c)) => lstm::backward(
                &self.params,
                x,
                c,
                *hidden,
                *readout,
                upstream,
                grads,
                input_grad,
            ),
            _ => return Err(Error::State("cached activations do not match the model".into())),
        }
        Ok(())
    }

    /// Fresh gradients of `upstream · output` for one forward pass.
    pub fn gradients(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<Gradients> {
        let mut params = self.params.zeros_like();
        let mut input = Tensor2D::zeros(pass.input.rows(), pass.input.cols());
        self.backward(pass, upstream, &mut params, Some(&mut input))?;
        Ok(Gradients { params, input })
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::default();
        fp.str(&serde_json::to_string(&self.arch).unwrap_or_default());
        for (name, t) in self.params.iter() {
            fp.str(name).f64s(t.data());
        }
        fp.finish()
    }

    /// Binary checkpoint: versioned container with the architecture in the
    /// header and little-endian `f64` parameter payloads.
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let meta = serde_json::json!({ "architecture": self.arch });
        Container::new(CHECKPOINT_KIND, meta, self.params.clone().into_entries()).write(w)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let c = Container::read(r)?;
        c.expect_kind(CHECKPOINT_KIND)?;
        let arch: Architecture = serde_json::from_value(c.meta["architecture"].clone())?;
        Self::from_params(arch, ParamSet::new(c.tensors))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(util::open(path)?)
    }
}
