//! Model persistence.
//!
//! Two formats behind one entry point, selected by file extension:
//! `.json` is human-readable serde JSON; anything else is the versioned flat
//! binary layout below, which round-trips parameters bit-exactly.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic "NBTM" | format u32 | kind u8
//! kind 0 (generator): feature-layer count u32, layers..., head layer,
//!                     output-head u8, assignment-seed flag u8 [+ u64]
//! kind 1 (ensemble):  method u8, member count u32, members as dense nets
//! kind 2 (dropout):   dense net, p f64
//! dense net: output-head u8, layer count u32, layers...
//! layer: in u32, out u32, activation u8, weights f64 x in*out, bias f64 x out
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{DropoutPredictor, EnsembleMethod, EnsembleOfNets};
use crate::generator::GeneratorNet;
use crate::nn::{Activation, DenseNet, Layer, OutputHead};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"NBTM";
const FORMAT_VERSION: u32 = 1;

/// Any model this crate can persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Generator(GeneratorNet),
    Ensemble(EnsembleOfNets),
    Dropout(DropoutPredictor),
}

impl ModelFile {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelFile::Generator(_) => "generator",
            ModelFile::Ensemble(_) => "ensemble",
            ModelFile::Dropout(_) => "dropout",
        }
    }
}

/// Save to `path`; `.json` selects the JSON encoding.
pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let bytes = if is_json(path) {
        serde_json::to_vec_pretty(model)?
    } else {
        encode_model(model)
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Load from `path`; `.json` selects the JSON encoding.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path)?;
    if is_json(path) {
        Ok(serde_json::from_slice(&bytes)?)
    } else {
        decode_model(&bytes)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("json")
}

/// Encode to the flat binary layout.
pub fn encode_model(model: &ModelFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    match model {
        ModelFile::Generator(g) => {
            out.push(0);
            out.extend_from_slice(&(g.feature_layers().len() as u32).to_le_bytes());
            for layer in g.feature_layers() {
                encode_layer(&mut out, layer);
            }
            encode_layer(&mut out, g.head());
            out.push(head_code(g.output_head()));
            match g.assignment_seed() {
                Some(seed) => {
                    out.push(1);
                    out.extend_from_slice(&seed.to_le_bytes());
                }
                None => out.push(0),
            }
        }
        ModelFile::Ensemble(e) => {
            out.push(1);
            out.push(match e.method() {
                EnsembleMethod::StandardBootstrap => 0,
                EnsembleMethod::Rwb => 1,
                EnsembleMethod::DeepEnsemble => 2,
            });
            out.extend_from_slice(&(e.size() as u32).to_le_bytes());
            for member in e.members() {
                encode_dense(&mut out, member);
            }
        }
        ModelFile::Dropout(d) => {
            out.push(2);
            encode_dense(&mut out, d.net());
            out.extend_from_slice(&d.p().to_le_bytes());
        }
    }
    out
}

fn head_code(h: OutputHead) -> u8 {
    match h {
        OutputHead::Identity => 0,
        OutputHead::Softmax => 1,
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Identity => 2,
    }
}

fn encode_dense(out: &mut Vec<u8>, net: &DenseNet) {
    out.push(head_code(net.output_head()));
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        encode_layer(out, layer);
    }
}

fn encode_layer(out: &mut Vec<u8>, layer: &Layer) {
    out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
    out.push(activation_code(layer.activation()));
    for v in layer.weights().iter().chain(layer.bias()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::ModelFormat(format!(
                "truncated file: needed {} bytes at offset {}",
                n, self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

/// Decode the flat binary layout.
pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version}"
        )));
    }
    let model = match r.u8()? {
        0 => {
            let n_features = r.u32()? as usize;
            let mut feature_layers = Vec::with_capacity(n_features);
            for _ in 0..n_features {
                feature_layers.push(decode_layer(&mut r)?);
            }
            let head = decode_layer(&mut r)?;
            let output_head = decode_head(r.u8()?)?;
            let mut g = GeneratorNet::new(feature_layers, head, output_head)?;
            if r.u8()? == 1 {
                g.set_assignment_seed(Some(r.u64()?));
            }
            ModelFile::Generator(g)
        }
        1 => {
            let method = match r.u8()? {
                0 => EnsembleMethod::StandardBootstrap,
                1 => EnsembleMethod::Rwb,
                2 => EnsembleMethod::DeepEnsemble,
                m => return Err(Error::ModelFormat(format!("unknown ensemble method {m}"))),
            };
            let count = r.u32()? as usize;
            let mut members = Vec::with_capacity(count);
            for _ in 0..count {
                members.push(decode_dense(&mut r)?);
            }
            ModelFile::Ensemble(EnsembleOfNets::new(members, method)?)
        }
        2 => {
            let net = decode_dense(&mut r)?;
            let p = r.f64()?;
            ModelFile::Dropout(DropoutPredictor::new(net, p)?)
        }
        k => return Err(Error::ModelFormat(format!("unknown model kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}

fn decode_head(code: u8) -> Result<OutputHead> {
    match code {
        0 => Ok(OutputHead::Identity),
        1 => Ok(OutputHead::Softmax),
        c => Err(Error::ModelFormat(format!("unknown output head {c}"))),
    }
}

fn decode_dense(r: &mut Reader) -> Result<DenseNet> {
    let head = decode_head(r.u8()?)?;
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        layers.push(decode_layer(r)?);
    }
    DenseNet::new(layers, head)
}

fn decode_layer(r: &mut Reader) -> Result<Layer> {
    let in_dim = r.u32()? as usize;
    let out_dim = r.u32()? as usize;
    if in_dim == 0 || out_dim == 0 || in_dim.saturating_mul(out_dim) > (1 << 28) {
        return Err(Error::ModelFormat(format!(
            "implausible layer shape {in_dim}x{out_dim}"
        )));
    }
    let activation = match r.u8()? {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        2 => Activation::Identity,
        a => return Err(Error::ModelFormat(format!("unknown activation {a}"))),
    };
    let weights = r.f64s(in_dim * out_dim)?;
    let bias = r.f64s(out_dim)?;
    Ok(Layer::from_params(in_dim, out_dim, activation, weights, bias))
}
