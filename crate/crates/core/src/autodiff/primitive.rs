use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Normalization mode for batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn is_train(self) -> bool {
        matches!(self, Mode::Train)
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Every differentiable operation the engine knows about.
///
/// Input conventions (all row-major, channels last):
///
/// | primitive | inputs | output |
/// |---|---|---|
/// | `matmul` | `[m,k]`, `[k,n]` | `[m,n]` |
/// | `add_bias` | `[..,c]`, `[c]` | `[..,c]` |
/// | `add`, `mul` | two equal shapes | same |
/// | `scale` | any | same |
/// | `relu`, `sigmoid`, `tanh` | any | same |
/// | `concat` | equal rank, equal extents off `axis` | summed along `axis` |
/// | `slice_last` | `[..,c]` | `[..,len]` |
/// | `conv2d` | `[n,h,w,ci]`, `[kh,kw,ci,co]` | `[n,oh,ow,co]` |
/// | `dynamic_conv1x1` | map `[n,h,w,d]`, kernels `[n,k,d]` | `[n,h,w,k]` |
/// | `avg_pool` | `[n,h,w,c]` | `[n,c]` |
/// | `tile_spatial` | `[n,c]` | `[n,h,w,c]` |
/// | `batch_norm` | `[..,c]`, gamma, beta, running mean, running var (each `[c]`) | `[..,c]` |
/// | `dropout` | any | same |
/// | `embedding` | table `[v,e]`, indices `[n]` | `[n,e]` |
/// | `softmax` | `[n,c]` | `[n,c]` |
/// | `weighted_cross_entropy` | logits `[n,c]`, labels `[n]` | `[1]` |
/// | `sum` | any | `[1]` |
/// | `reshape` | any | `shape` |
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    MatMul,
    AddBias,
    Add,
    Mul,
    Scale { factor: f64 },
    Relu,
    Sigmoid,
    Tanh,
    Concat { axis: usize },
    SliceLast { start: usize, len: usize },
    Conv2d { stride: usize, padding: usize },
    DynamicConv1x1,
    AvgPool,
    TileSpatial { height: usize, width: usize },
    BatchNorm { mode: Mode, eps: f64 },
    Dropout { rate: f64, mode: Mode },
    Embedding,
    Softmax,
    WeightedCrossEntropy { weights: Vec<f64> },
    Sum,
    Reshape { shape: Vec<usize> },
}

/// Named numeric attributes for [`Primitive::parse`].
pub type Attrs = BTreeMap<String, Vec<f64>>;

/// All primitive names accepted by [`Primitive::parse`].
pub const PRIMITIVE_NAMES: &[&str] = &[
    "matmul",
    "add_bias",
    "add",
    "mul",
    "scale",
    "relu",
    "sigmoid",
    "tanh",
    "concat",
    "slice_last",
    "conv2d",
    "dynamic_conv1x1",
    "avg_pool",
    "tile_spatial",
    "batch_norm",
    "dropout",
    "embedding",
    "softmax",
    "weighted_cross_entropy",
    "sum",
    "reshape",
];

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::AddBias => "add_bias",
            Primitive::Add => "add",
            Primitive::Mul => "mul",
            Primitive::Scale { .. } => "scale",
            Primitive::Relu => "relu",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Concat { .. } => "concat",
            Primitive::SliceLast { .. } => "slice_last",
            Primitive::Conv2d { .. } => "conv2d",
            Primitive::DynamicConv1x1 => "dynamic_conv1x1",
            Primitive::AvgPool => "avg_pool",
            Primitive::TileSpatial { .. } => "tile_spatial",
            Primitive::BatchNorm { .. } => "batch_norm",
            Primitive::Dropout { .. } => "dropout",
            Primitive::Embedding => "embedding",
            Primitive::Softmax => "softmax",
            Primitive::WeightedCrossEntropy { .. } => "weighted_cross_entropy",
            Primitive::Sum => "sum",
            Primitive::Reshape { .. } => "reshape",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Primitive::MatMul
            | Primitive::AddBias
            | Primitive::Add
            | Primitive::Mul
            | Primitive::Conv2d { .. }
            | Primitive::DynamicConv1x1
            | Primitive::Embedding
            | Primitive::WeightedCrossEntropy { .. } => 2,
            Primitive::BatchNorm { .. } => 5,
            // variadic; checked in the kernel
            Primitive::Concat { .. } => 0,
            _ => 1,
        }
    }

    /// Builds a primitive from its name and attributes.
    ///
    /// Attributes: `factor` (scale), `axis` (concat), `start`/`len` (slice_last),
    /// `stride`/`padding` (conv2d, default 1/0), `height`/`width` (tile_spatial),
    /// `train` (batch_norm, dropout; nonzero means train mode), `eps` (batch_norm),
    /// `rate` (dropout), `weights` (weighted_cross_entropy), `shape` (reshape).
    pub fn parse(name: &str, attrs: &Attrs) -> Result<Self> {
        let a = AttrReader { op: name, attrs };
        let mode = || -> Result<Mode> {
            Ok(if a.opt_scalar("train")?.unwrap_or(0.0) != 0.0 {
                Mode::Train
            } else {
                Mode::Eval
            })
        };
        Ok(match name {
            "matmul" => Primitive::MatMul,
            "add_bias" => Primitive::AddBias,
            "add" => Primitive::Add,
            "mul" => Primitive::Mul,
            "scale" => Primitive::Scale {
                factor: a.scalar("factor")?,
            },
            "relu" => Primitive::Relu,
            "sigmoid" => Primitive::Sigmoid,
            "tanh" => Primitive::Tanh,
            "concat" => Primitive::Concat {
                axis: a.index("axis")?,
            },
            "slice_last" => Primitive::SliceLast {
                start: a.index("start")?,
                len: a.index("len")?,
            },
            "conv2d" => Primitive::Conv2d {
                stride: a.opt_index("stride")?.unwrap_or(1),
                padding: a.opt_index("padding")?.unwrap_or(0),
            },
            "dynamic_conv1x1" => Primitive::DynamicConv1x1,
            "avg_pool" => Primitive::AvgPool,
            "tile_spatial" => Primitive::TileSpatial {
                height: a.index("height")?,
                width: a.index("width")?,
            },
            "batch_norm" => Primitive::BatchNorm {
                mode: mode()?,
                eps: a.opt_scalar("eps")?.unwrap_or(BN_EPS),
            },
            "dropout" => Primitive::Dropout {
                rate: a.scalar("rate")?,
                mode: mode()?,
            },
            "embedding" => Primitive::Embedding,
            "softmax" => Primitive::Softmax,
            "weighted_cross_entropy" => Primitive::WeightedCrossEntropy {
                weights: a.list("weights")?.to_vec(),
            },
            "sum" => Primitive::Sum,
            "reshape" => Primitive::Reshape {
                shape: a
                    .list("shape")?
                    .iter()
                    .map(|&v| to_index(name, "shape", v))
                    .collect::<Result<_>>()?,
            },
            other => return Err(Error::UnknownPrimitive(other.to_string())),
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |detail: String| {
            Err(Error::Attribute {
                op: self.name().to_string(),
                detail,
            })
        };
        match self {
            Primitive::Conv2d { stride, .. } if *stride == 0 => bad("stride must be >= 1".into()),
            Primitive::SliceLast { len, .. } if *len == 0 => bad("len must be >= 1".into()),
            Primitive::TileSpatial { height, width } if *height == 0 || *width == 0 => {
                bad("tile extents must be >= 1".into())
            }
            Primitive::Dropout { rate, .. } if !(0.0..1.0).contains(rate) => {
                bad(format!("rate {rate} outside [0, 1)"))
            }
            Primitive::BatchNorm { eps, .. } if *eps <= 0.0 => bad("eps must be positive".into()),
            Primitive::WeightedCrossEntropy { weights }
                if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) =>
            {
                bad("class weights must be finite and non-negative".into())
            }
            Primitive::Scale { factor } if !factor.is_finite() => bad("factor must be finite".into()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct AttrReader<'a> {
    op: &'a str,
    attrs: &'a Attrs,
}

impl AttrReader<'_> {
    fn missing(&self, key: &str) -> Error {
        Error::Attribute {
            op: self.op.to_string(),
            detail: format!("missing attribute `{key}`"),
        }
    }

    fn list(&self, key: &str) -> Result<&[f64]> {
        self.attrs
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| self.missing(key))
    }

    fn opt_scalar(&self, key: &str) -> Result<Option<f64>> {
        match self.attrs.get(key).map(Vec::as_slice) {
            None => Ok(None),
            Some([v]) => Ok(Some(*v)),
            Some(other) => Err(Error::Attribute {
                op: self.op.to_string(),
                detail: format!("`{key}` must be a single value, got {} values", other.len()),
            }),
        }
    }

    fn scalar(&self, key: &str) -> Result<f64> {
        self.opt_scalar(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_index(&self, key: &str) -> Result<Option<usize>> {
        self.opt_scalar(key)?
            .map(|v| to_index(self.op, key, v))
            .transpose()
    }

    fn index(&self, key: &str) -> Result<usize> {
        self.opt_index(key)?.ok_or_else(|| self.missing(key))
    }
}

fn to_index(op: &str, key: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Attribute {
            op: op.to_string(),
            detail: format!("`{key}` must be a non-negative integer, got {v}"),
        })
    }
}
