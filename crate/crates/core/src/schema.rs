//! Versioned JSON documents for channels, sources, distortion measures,
//! configurations, hybrid schemes and adaptive channel codes.
//!
//! Every document is one object with `"version": "v1"` and a `"kind"` tag.
//! Probability laws are nested arrays indexed like the model
//! (`law[x1][x2][y1][y2]`, `law[s1][s2]`, `table[s][s_hat]`,
//! `pu_given_s[j][s][u]`); the tilde law and the `F`/`G` tables are flat
//! arrays in row-major order over their documented shapes.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::achievability::{HanScheme, HybridScheme};
use crate::coded::{Configuration, Dims};
use crate::error::{Error, Result};
use crate::models::{DistortionMeasure, JointSource, Terminal, TwoWayChannel};
use crate::prob::{ConditionalPmf, JointPmf};

pub const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Channel(ChannelDoc),
    Source(SourceDoc),
    Distortion(DistortionDoc),
    Configuration(ConfigurationDoc),
    Han(HanDoc),
    Hybrid(HybridDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub version: String,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    /// `P(y1, y2 | x1, x2)` as `law[x1][x2][y1][y2]`.
    pub law: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    /// `P(s1, s2)` as `law[s1][s2]`.
    pub law: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionDoc {
    /// `d(s, s_hat)` as `table[s][s_hat]`.
    pub table: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsDoc {
    pub s: [usize; 2],
    pub u: [usize; 2],
    pub x: [usize; 2],
    pub y: [usize; 2],
    pub shat: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationDoc {
    pub dims: DimsDoc,
    /// `[P(u1 | s1), P(u2 | s2)]`, each as `[s][u]`.
    pub pu_given_s: [Value; 2],
    /// Flat law over `(S~1, S~2, U~1, U~2, W~1, W~2)`, `w = x * |Y| + y`.
    #[serde(default)]
    pub p_tilde: Option<Vec<f64>>,
    /// Flat `F_j` over `(s, u, s~, u~, w~)`.
    pub f: [Vec<usize>; 2],
    /// Flat `G_j` over `(u~', s, u, s~, u~, w~, y)`.
    pub g: [Vec<usize>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HanDoc {
    pub pv: [Vec<f64>; 2],
    pub x: [usize; 2],
    pub y: [usize; 2],
    /// Flat `gamma_j` over `(v, v~, w~)`.
    pub gamma: [Vec<usize>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridDoc {
    pub dims: DimsDoc,
    pub pu_given_s: [Value; 2],
    /// Flat `f_j` over `(s, u)`.
    pub f: [Vec<usize>; 2],
    /// Flat `g_j` over `(u_j', s, u, y)`.
    pub g: [Vec<usize>; 2],
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

/// Flattens a rectangular nested array of numbers of the given depth.
pub fn flatten_nested(v: &Value, depth: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    fn walk(
        v: &Value,
        depth: usize,
        level: usize,
        shape: &mut Vec<usize>,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if level == depth {
            let x = v
                .as_f64()
                .ok_or_else(|| schema(format!("expected a number at depth {depth}")))?;
            out.push(x);
            return Ok(());
        }
        let arr = v
            .as_array()
            .ok_or_else(|| schema(format!("expected an array at depth {level}")))?;
        if arr.is_empty() {
            return Err(schema(format!("empty array at depth {level}")));
        }
        if shape.len() == level {
            shape.push(arr.len());
        } else if shape[level] != arr.len() {
            return Err(schema(format!(
                "ragged array at depth {level}: {} vs {}",
                arr.len(),
                shape[level]
            )));
        }
        for x in arr {
            walk(x, depth, level + 1, shape, out)?;
        }
        Ok(())
    }
    let mut shape = Vec::new();
    let mut out = Vec::new();
    walk(v, depth, 0, &mut shape, &mut out)?;
    Ok((shape, out))
}

/// Inverse of [`flatten_nested`].
pub fn nest(shape: &[usize], data: &[f64]) -> Value {
    match shape.split_first() {
        None => serde_json::json!(data[0]),
        Some((&n, rest)) => {
            let stride = data.len() / n;
            Value::Array(
                (0..n)
                    .map(|i| nest(rest, &data[i * stride..(i + 1) * stride]))
                    .collect(),
            )
        }
    }
}

impl ChannelDoc {
    pub fn from_model(ch: &TwoWayChannel) -> Self {
        let shape = [
            ch.x_size(Terminal::One),
            ch.x_size(Terminal::Two),
            ch.y_size(Terminal::One),
            ch.y_size(Terminal::Two),
        ];
        Self {
            law: nest(&shape, ch.law().table()),
        }
    }

    pub fn to_model(&self) -> Result<TwoWayChannel> {
        let (s, t) = flatten_nested(&self.law, 4)?;
        TwoWayChannel::new(ConditionalPmf::from_shape(&s[..2], &s[2..], t)?)
    }
}

impl SourceDoc {
    pub fn from_model(src: &JointSource) -> Self {
        let shape = [src.size(Terminal::One), src.size(Terminal::Two)];
        Self {
            law: nest(&shape, src.law().probs()),
        }
    }

    pub fn to_model(&self) -> Result<JointSource> {
        let (s, t) = flatten_nested(&self.law, 2)?;
        JointSource::from_table(s[0], s[1], t)
    }
}

impl DistortionDoc {
    pub fn from_model(d: &DistortionMeasure) -> Self {
        Self {
            table: nest(&[d.source_size(), d.recon_size()], d.table()),
        }
    }

    pub fn to_model(&self) -> Result<DistortionMeasure> {
        let (s, t) = flatten_nested(&self.table, 2)?;
        DistortionMeasure::new(s[0], s[1], t)
    }
}

impl DimsDoc {
    pub fn from_model(d: &Dims) -> Self {
        Self {
            s: d.s,
            u: d.u,
            x: d.x,
            y: d.y,
            shat: d.shat,
        }
    }

    pub fn to_model(&self) -> Dims {
        Dims {
            s: self.s,
            u: self.u,
            x: self.x,
            y: self.y,
            shat: self.shat,
        }
    }
}

fn pu_doc(c: &ConditionalPmf) -> Value {
    nest(&[c.rows(), c.cols()], c.table())
}

fn pu_model(dims: &Dims, docs: &[Value; 2]) -> Result<[ConditionalPmf; 2]> {
    let pu = Terminal::BOTH.map(|j| {
        let k = j.index();
        let (s, t) = flatten_nested(&docs[k], 2)?;
        if s != [dims.s[k], dims.u[k]] {
            return Err(schema(format!(
                "pu_given_s[{k}] has shape {s:?}, expected [{}, {}]",
                dims.s[k], dims.u[k]
            )));
        }
        ConditionalPmf::from_shape(&s[..1], &s[1..], t)
    });
    let [p1, p2] = pu;
    Ok([p1?, p2?])
}

impl ConfigurationDoc {
    pub fn from_model(cfg: &Configuration) -> Self {
        Self {
            dims: DimsDoc::from_model(cfg.dims()),
            pu_given_s: Terminal::BOTH.map(|j| pu_doc(cfg.pu_given_s(j))),
            p_tilde: cfg.p_tilde().map(|p| p.probs().to_vec()),
            f: Terminal::BOTH.map(|j| cfg.f_table(j).to_vec()),
            g: Terminal::BOTH.map(|j| cfg.g_table(j).to_vec()),
        }
    }

    pub fn to_model(&self) -> Result<Configuration> {
        let dims = self.dims.to_model();
        let pu = pu_model(&dims, &self.pu_given_s)?;
        let p_tilde = self
            .p_tilde
            .as_ref()
            .map(|p| JointPmf::from_shape(&dims.tilde_shape(), p.clone()))
            .transpose()?;
        Configuration::new(dims, pu, p_tilde, self.f.clone(), self.g.clone())
    }
}

impl HybridDoc {
    pub fn from_model(h: &HybridScheme) -> Self {
        Self {
            dims: DimsDoc::from_model(h.dims()),
            pu_given_s: Terminal::BOTH.map(|j| pu_doc(h.pu(j))),
            f: Terminal::BOTH.map(|j| h.f_table(j).to_vec()),
            g: Terminal::BOTH.map(|j| h.g_table(j).to_vec()),
        }
    }

    pub fn to_model(&self) -> Result<HybridScheme> {
        let dims = self.dims.to_model();
        let pu = pu_model(&dims, &self.pu_given_s)?;
        HybridScheme::new(dims, pu, self.f.clone(), self.g.clone())
    }
}

impl HanDoc {
    pub fn from_model(h: &HanScheme) -> Self {
        Self {
            pv: Terminal::BOTH.map(|j| h.pv(j).to_vec()),
            x: h.x_sizes(),
            y: h.y_sizes(),
            gamma: Terminal::BOTH.map(|j| h.gamma_table(j).to_vec()),
        }
    }

    pub fn to_model(&self) -> Result<HanScheme> {
        HanScheme::new(self.pv.clone(), self.x, self.y, self.gamma.clone())
    }
}

impl Document {
    pub fn new(body: Body) -> Self {
        Self {
            version: VERSION.into(),
            body,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            Body::Channel(_) => "channel",
            Body::Source(_) => "source",
            Body::Distortion(_) => "distortion",
            Body::Configuration(_) => "configuration",
            Body::Han(_) => "han",
            Body::Hybrid(_) => "hybrid",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        if doc.version != VERSION {
            return Err(schema(format!(
                "unsupported version {:?}, expected {VERSION:?}",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    fn wrong_kind(&self, want: &str) -> Error {
        schema(format!("expected a {want} document, found {}", self.kind()))
    }

    pub fn into_channel(self) -> Result<TwoWayChannel> {
        match &self.body {
            Body::Channel(c) => c.to_model(),
            _ => Err(self.wrong_kind("channel")),
        }
    }

    pub fn into_source(self) -> Result<JointSource> {
        match &self.body {
            Body::Source(c) => c.to_model(),
            _ => Err(self.wrong_kind("source")),
        }
    }

    pub fn into_distortion(self) -> Result<DistortionMeasure> {
        match &self.body {
            Body::Distortion(c) => c.to_model(),
            _ => Err(self.wrong_kind("distortion")),
        }
    }

    pub fn into_configuration(self) -> Result<Configuration> {
        match &self.body {
            Body::Configuration(c) => c.to_model(),
            _ => Err(self.wrong_kind("configuration")),
        }
    }

    pub fn into_hybrid(self) -> Result<HybridScheme> {
        match &self.body {
            Body::Hybrid(c) => c.to_model(),
            _ => Err(self.wrong_kind("hybrid")),
        }
    }

    pub fn into_han(self) -> Result<HanScheme> {
        match &self.body {
            Body::Han(c) => c.to_model(),
            _ => Err(self.wrong_kind("han")),
        }
    }
}

pub fn channel_json(ch: &TwoWayChannel) -> String {
    Document::new(Body::Channel(ChannelDoc::from_model(ch))).to_json()
}

pub fn source_json(src: &JointSource) -> String {
    Document::new(Body::Source(SourceDoc::from_model(src))).to_json()
}

pub fn distortion_json(d: &DistortionMeasure) -> String {
    Document::new(Body::Distortion(DistortionDoc::from_model(d))).to_json()
}

pub fn configuration_json(cfg: &Configuration) -> String {
    Document::new(Body::Configuration(ConfigurationDoc::from_model(cfg))).to_json()
}

pub fn han_json(h: &HanScheme) -> String {
    Document::new(Body::Han(HanDoc::from_model(h))).to_json()
}

pub fn hybrid_json(h: &HybridScheme) -> String {
    Document::new(Body::Hybrid(HybridDoc::from_model(h))).to_json()
}
