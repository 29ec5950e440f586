//! Monte Carlo block-Markov coding over a two-way channel: random
//! codebooks, typicality encoding and decoding, error-event accounting and
//! empirical distortion.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coded::{Configuration, Dims, FArgs, GArgs};
use crate::error::{Error, Result};
use crate::markov::{build_kernel, StationaryLaw, ZAxis};
use crate::models::{DistortionMeasure, JointSource, Terminal, TwoWayChannel};
use crate::prob::{strides, unflatten, JointPmf, TYPICALITY_SLACK};

pub const MAX_CODEBOOK_EXPONENT: u32 = 16;
pub const MAX_BLOCK_LENGTH: usize = 1024;
/// Default cap on codebook letters held by one trial.
pub const DEFAULT_LETTER_CAP: usize = 1 << 24;
/// Reference cells at or below this mass are treated as impossible.
pub const PRUNE_MASS: f64 = 1e-13;
const DENSE_CHECKER_CELLS: usize = 1 << 20;
const FROZEN_STREAM: u64 = u64::MAX;

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Block length.
    pub n: usize,
    /// Number of source blocks `B`; `B + 1` blocks are transmitted.
    pub blocks: usize,
    /// Decoder typicality parameter.
    pub eps: f64,
    /// Encoder typicality parameter.
    pub eps1: f64,
    pub rates: [f64; 2],
    pub seed: u64,
    pub trials: usize,
    /// Reuse one set of initialization and termination sequences for all
    /// trials instead of drawing them per trial.
    pub freeze_boundary: bool,
    /// Maximum codebook letters (`B * (|C_1| + |C_2|) * n`) per trial.
    pub letter_cap: usize,
}

impl SimParams {
    pub fn new(n: usize, blocks: usize, eps: f64, eps1: f64, rates: [f64; 2]) -> Self {
        Self {
            n,
            blocks,
            eps,
            eps1,
            rates,
            seed: 0,
            trials: 1,
            freeze_boundary: false,
            letter_cap: DEFAULT_LETTER_CAP,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > self.eps1 && self.eps1 > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need eps > eps1 > 0, got eps = {}, eps1 = {}",
                self.eps, self.eps1
            )));
        }
        if self.n == 0 || self.n > MAX_BLOCK_LENGTH {
            return Err(Error::InvalidParameter(format!(
                "block length {} outside 1..={MAX_BLOCK_LENGTH}",
                self.n
            )));
        }
        if self.blocks == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter(
                "blocks and trials must be >= 1".into(),
            ));
        }
        let mut letters = 0usize;
        for j in Terminal::BOTH {
            letters = letters.saturating_add(self.codebook_size(j)?);
        }
        let letters = letters.saturating_mul(self.blocks).saturating_mul(self.n);
        if letters > self.letter_cap {
            return Err(Error::ResourceCap(format!(
                "{letters} codebook letters per trial exceed the cap {}",
                self.letter_cap
            )));
        }
        Ok(())
    }

    /// `ceil(n R_j)`.
    pub fn codebook_exponent(&self, j: Terminal) -> Result<u32> {
        let r = self.rates[j.index()];
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidParameter(format!("rate {r}")));
        }
        // absorb rounding in products such as 64 * (1/32)
        let e = (self.n as f64 * r - 1e-9).ceil().max(0.0);
        if e > MAX_CODEBOOK_EXPONENT as f64 {
            return Err(Error::ResourceCap(format!(
                "codebook size 2^{e} exceeds 2^{MAX_CODEBOOK_EXPONENT}"
            )));
        }
        Ok(e as u32)
    }

    /// `2^ceil(n R_j)`.
    pub fn codebook_size(&self, j: Terminal) -> Result<usize> {
        Ok(1usize << self.codebook_exponent(j)?)
    }

    /// Source symbols per channel use, `B / (B + 1)`.
    pub fn jscc_rate(&self) -> f64 {
        self.blocks as f64 / (self.blocks + 1) as f64
    }
}

/// Robust typicality against a fixed reference, on tuples given as flat
/// cell indices. Equivalent to [`crate::prob::joint_typicality_test`]
/// on the same reference.
#[derive(Debug, Clone)]
pub struct TypicalityChecker {
    shape: Vec<usize>,
    strides: Vec<usize>,
    table: RefTable,
    /// Cells that must occur at least once.
    required: usize,
    eps: f64,
}

#[derive(Debug, Clone)]
enum RefTable {
    Dense(Vec<f64>),
    Sparse(HashMap<usize, f64>),
}

/// Reusable counters for [`TypicalityChecker::check`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    dense: Vec<u32>,
    touched: Vec<usize>,
    sparse: HashMap<usize, u32>,
}

impl TypicalityChecker {
    /// `entries` lists `(flat index, p)`; unlisted cells have mass 0.
    pub fn new(
        shape: &[usize],
        entries: impl IntoIterator<Item = (usize, f64)>,
        eps: f64,
    ) -> Result<Self> {
        Self::build(shape, entries, eps, false)
    }

    /// Like [`TypicalityChecker::new`], always storing the reference in a
    /// hash map.
    pub fn new_sparse(
        shape: &[usize],
        entries: impl IntoIterator<Item = (usize, f64)>,
        eps: f64,
    ) -> Result<Self> {
        Self::build(shape, entries, eps, true)
    }

    fn build(
        shape: &[usize],
        entries: impl IntoIterator<Item = (usize, f64)>,
        eps: f64,
        sparse: bool,
    ) -> Result<Self> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::InvalidParameter(format!("typicality eps {eps}")));
        }
        let cells = shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::ResourceCap("typicality reference too large".into()))?;
        let needs = |p: f64| p > eps * p + TYPICALITY_SLACK;
        let (required, table) = if !sparse && cells <= DENSE_CHECKER_CELLS {
            let mut t = vec![0.0; cells];
            for (i, p) in entries {
                if i >= cells {
                    return Err(Error::Shape(format!("cell {i} outside {cells} cells")));
                }
                t[i] += p;
            }
            (t.iter().filter(|&&p| needs(p)).count(), RefTable::Dense(t))
        } else {
            let mut t = HashMap::new();
            for (i, p) in entries {
                if i >= cells {
                    return Err(Error::Shape(format!("cell {i} outside {cells} cells")));
                }
                *t.entry(i).or_insert(0.0) += p;
            }
            t.retain(|_, p| *p != 0.0);
            (
                t.values().filter(|&&p| needs(p)).count(),
                RefTable::Sparse(t),
            )
        };
        Ok(Self {
            shape: shape.to_vec(),
            strides: strides(shape),
            table,
            required,
            eps,
        })
    }

    pub fn from_pmf(p: &JointPmf, eps: f64) -> Result<Self> {
        let entries = p.probs().iter().copied().enumerate();
        Self::new(&p.shape(), entries, eps)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn p(&self, cell: usize) -> f64 {
        match &self.table {
            RefTable::Dense(t) => t[cell],
            RefTable::Sparse(t) => t.get(&cell).copied().unwrap_or(0.0),
        }
    }

    fn within(&self, count: u32, n: f64, p: f64) -> bool {
        (count as f64 / n - p).abs() <= self.eps * p + TYPICALITY_SLACK
    }

    /// Whether the tuples with flat indices `keys` are typical.
    pub fn check(&self, keys: impl Iterator<Item = usize>, scratch: &mut Scratch) -> bool {
        let mut n = 0usize;
        match &self.table {
            RefTable::Dense(t) => {
                if scratch.dense.len() != t.len() {
                    scratch.dense = vec![0; t.len()];
                }
                scratch.touched.clear();
                for k in keys {
                    n += 1;
                    if scratch.dense[k] == 0 {
                        scratch.touched.push(k);
                    }
                    scratch.dense[k] += 1;
                }
                let nf = n as f64;
                let mut ok = n > 0;
                let mut seen = 0;
                for &k in &scratch.touched {
                    let p = t[k];
                    ok &= self.within(scratch.dense[k], nf, p);
                    if p > self.eps * p + TYPICALITY_SLACK {
                        seen += 1;
                    }
                    scratch.dense[k] = 0;
                }
                ok && seen == self.required
            }
            RefTable::Sparse(_) => {
                scratch.sparse.clear();
                for k in keys {
                    n += 1;
                    *scratch.sparse.entry(k).or_insert(0) += 1;
                }
                let nf = n as f64;
                let mut seen = 0;
                let ok = n > 0
                    && scratch.sparse.iter().all(|(&k, &c)| {
                        let p = self.p(k);
                        if p > self.eps * p + TYPICALITY_SLACK {
                            seen += 1;
                        }
                        self.within(c, nf, p)
                    });
                ok && seen == self.required
            }
        }
    }
}

/// Per-letter sampler of a flat discrete law.
#[derive(Debug, Clone)]
struct Sampler(WeightedIndex<f64>);

impl Sampler {
    fn new(probs: &[f64]) -> Result<Self> {
        WeightedIndex::new(probs)
            .map(Sampler)
            .map_err(|e| Error::InvalidTable(format!("cannot sample law: {e}")))
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        self.0.sample(rng)
    }
}

/// Everything the simulator derives once from a configuration.
#[derive(Debug, Clone)]
pub struct SimModel {
    cfg: Configuration,
    dist: [DistortionMeasure; 2],
    law: StationaryLaw,
    source: Sampler,
    pu: [Sampler; 2],
    u_given_s: [Vec<Sampler>; 2],
    tilde: Sampler,
    fresh: Sampler,
    channel: Vec<Sampler>,
    /// `(S_j, U_j)` at `eps1`.
    encoder: [TypicalityChecker; 2],
    /// `(S_j, U_j, S~_j, U~_j, U~_j', W~_j, X_j, Y_j)` at `eps`.
    decoder: [TypicalityChecker; 2],
    /// All 14 coordinates of `Z` at `eps`.
    full: TypicalityChecker,
}

fn pruned_checker(law: &StationaryLaw, axes: &[ZAxis], eps: f64) -> Result<TypicalityChecker> {
    let d = *law.dims();
    let shape: Vec<usize> = axes.iter().map(|a| a.size(&d)).collect();
    let st = strides(&shape);
    let entries = law
        .sparse_marginal(axes)
        .into_iter()
        .filter(|(_, p)| *p > PRUNE_MASS)
        .map(|(c, p)| (c.iter().zip(&st).map(|(a, b)| a * b).sum(), p));
    TypicalityChecker::new(&shape, entries, eps)
}

fn decoder_axes(j: Terminal) -> [ZAxis; 8] {
    use ZAxis::*;
    match j {
        Terminal::One => [S1, U1, TS1, TU1, TU2, TW1, X1, Y1],
        Terminal::Two => [S2, U2, TS2, TU2, TU1, TW2, X2, Y2],
    }
}

impl SimModel {
    /// Requires a stationary `p_tilde` in `cfg`.
    pub fn new(
        cfg: &Configuration,
        ch: &TwoWayChannel,
        src: &JointSource,
        d1: &DistortionMeasure,
        d2: &DistortionMeasure,
        params: &SimParams,
    ) -> Result<Self> {
        params.validate()?;
        let dims = *cfg.dims();
        if dims.u.iter().any(|&u| u > 256) {
            return Err(Error::ResourceCap(
                "simulation supports |U_j| <= 256".into(),
            ));
        }
        for (k, d) in [d1, d2].iter().enumerate() {
            if d.source_size() != dims.s[k] || d.recon_size() != dims.shat[k] {
                return Err(Error::AlphabetMismatch(format!(
                    "distortion measure {} and configuration",
                    k + 1
                )));
            }
        }
        let sys = build_kernel(cfg, ch, src)?;
        let tilde = cfg.p_tilde().ok_or(Error::MissingTilde)?;
        let law = sys.law_from_tilde(tilde)?;
        if !law.is_stationary() {
            return Err(Error::Infeasible(format!(
                "p_tilde is not stationary (residual {:.3e})",
                law.residual()
            )));
        }
        let fresh = crate::coded::fresh_law(cfg, src)?;
        let encoder = Terminal::BOTH.map(|j| {
            let k = j.index();
            let joint = fresh.marginal(&[k, 2 + k])?;
            TypicalityChecker::from_pmf(&joint, params.eps1)
        });
        let decoder = Terminal::BOTH.map(|j| pruned_checker(&law, &decoder_axes(j), params.eps));
        let u_given_s = Terminal::BOTH.map(|j| {
            let c = cfg.pu_given_s(j);
            (0..c.rows())
                .map(|s| Sampler::new(c.row(s)))
                .collect::<Result<Vec<_>>>()
        });
        let pu = Terminal::BOTH.map(|j| Sampler::new(&cfg.pu(j, src)));
        let channel = (0..dims.x[0] * dims.x[1])
            .map(|i| Sampler::new(ch.row(i / dims.x[1], i % dims.x[1])))
            .collect::<Result<Vec<_>>>()?;
        let [e1, e2] = encoder;
        let [c1, c2] = decoder;
        let [v1, v2] = u_given_s;
        let [p1, p2] = pu;
        Ok(Self {
            cfg: cfg.clone(),
            dist: [d1.clone(), d2.clone()],
            full: pruned_checker(&law, &ZAxis::ALL, params.eps)?,
            law,
            source: Sampler::new(src.law().probs())?,
            pu: [p1?, p2?],
            u_given_s: [v1?, v2?],
            tilde: Sampler::new(tilde.probs())?,
            fresh: Sampler::new(fresh.probs())?,
            channel,
            encoder: [e1?, e2?],
            decoder: [c1?, c2?],
        })
    }

    pub fn dims(&self) -> &Dims {
        self.cfg.dims()
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn law(&self) -> &StationaryLaw {
        &self.law
    }

    pub fn encoder_checker(&self, j: Terminal) -> &TypicalityChecker {
        &self.encoder[j.index()]
    }

    pub fn decoder_checker(&self, j: Terminal) -> &TypicalityChecker {
        &self.decoder[j.index()]
    }

    /// Draws a source block `(s1, s2)`.
    pub fn draw_source(&self, n: usize, rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
        let s2 = self.dims().s[1];
        let mut out = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for _ in 0..n {
            let v = self.source.draw(rng);
            out[0].push(v / s2);
            out[1].push(v % s2);
        }
        out
    }

    /// Draws `U_j` letterwise from `P(u | s)`.
    pub fn draw_u_given_s(&self, j: Terminal, s: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
        s.iter()
            .map(|&v| self.u_given_s[j.index()][v].draw(rng))
            .collect()
    }
}

/// A codebook of `size` length-`n` codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    n: usize,
    letters: Vec<u8>,
}

impl Codebook {
    pub fn from_words(n: usize, words: &[Vec<usize>]) -> Result<Self> {
        let mut letters = Vec::with_capacity(words.len() * n);
        for w in words {
            if w.len() != n || w.iter().any(|&v| v > u8::MAX as usize) {
                return Err(Error::Shape("codeword length or letter".into()));
            }
            letters.extend(w.iter().map(|&v| v as u8));
        }
        if words.is_empty() {
            return Err(Error::Shape("empty codebook".into()));
        }
        Ok(Self { n, letters })
    }

    pub fn len(&self) -> usize {
        self.letters.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn word(&self, m: usize) -> &[u8] {
        &self.letters[m * self.n..(m + 1) * self.n]
    }
}

/// Previous-block state `(s~, u~, w~)` of both terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TildeBlock {
    pub s: [Vec<usize>; 2],
    pub u: [Vec<usize>; 2],
    pub w: [Vec<usize>; 2],
}

/// Initialization and termination sequences plus one codebook per terminal
/// and source block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebooks {
    pub init: TildeBlock,
    /// `(s, u)` for the last transmission block.
    pub termination: ([Vec<usize>; 2], [Vec<usize>; 2]),
    /// `blocks[b - 1][j]` is terminal `j`'s codebook for block `b`.
    pub blocks: Vec<[Codebook; 2]>,
}

/// Initialization block and the per-terminal `(s, u)` termination sequences.
pub type Boundary = (TildeBlock, ([Vec<usize>; 2], [Vec<usize>; 2]));

fn draw_boundary(model: &SimModel, n: usize, rng: &mut ChaCha8Rng) -> Boundary {
    let d = *model.dims();
    let tshape = d.tilde_shape();
    let mut init = TildeBlock {
        s: Default::default(),
        u: Default::default(),
        w: Default::default(),
    };
    let mut c = vec![0; 6];
    for _ in 0..n {
        unflatten(&tshape, model.tilde.draw(rng), &mut c);
        for k in 0..2 {
            init.s[k].push(c[k]);
            init.u[k].push(c[2 + k]);
            init.w[k].push(c[4 + k]);
        }
    }
    let fshape = [d.s[0], d.s[1], d.u[0], d.u[1]];
    let mut s: [Vec<usize>; 2] = Default::default();
    let mut u: [Vec<usize>; 2] = Default::default();
    let mut c = vec![0; 4];
    for _ in 0..n {
        unflatten(&fshape, model.fresh.draw(rng), &mut c);
        for k in 0..2 {
            s[k].push(c[k]);
            u[k].push(c[2 + k]);
        }
    }
    (init, (s, u))
}

fn draw_codebooks(
    model: &SimModel,
    params: &SimParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[Codebook; 2]>> {
    let n = params.n;
    let sizes = [
        params.codebook_size(Terminal::One)?,
        params.codebook_size(Terminal::Two)?,
    ];
    Ok((0..params.blocks)
        .map(|_| {
            Terminal::BOTH.map(|j| {
                let k = j.index();
                let letters = (0..sizes[k] * n)
                    .map(|_| model.pu[k].draw(rng) as u8)
                    .collect();
                Codebook { n, letters }
            })
        })
        .collect())
}

/// Draws boundary sequences and codebooks with letters i.i.d. from
/// `P(u_j)`.
pub fn generate_codebooks(
    model: &SimModel,
    params: &SimParams,
    rng: &mut ChaCha8Rng,
) -> Result<Codebooks> {
    params.validate()?;
    let (init, termination) = draw_boundary(model, params.n, rng);
    Ok(Codebooks {
        init,
        termination,
        blocks: draw_codebooks(model, params, rng)?,
    })
}

/// Channel inputs `x_j,i = F_j(s, u, s~, u~, w~)`.
pub fn channel_input_block(
    model: &SimModel,
    j: Terminal,
    s: &[usize],
    u: &[usize],
    tilde: &TildeBlock,
) -> Vec<usize> {
    let k = j.index();
    (0..s.len())
        .map(|i| {
            model.cfg.f(
                j,
                FArgs {
                    s: s[i],
                    u: u[i],
                    ts: tilde.s[k][i],
                    tu: tilde.u[k][i],
                    tw: tilde.w[k][i],
                },
            )
        })
        .collect()
}

/// Result of encoding one block at one terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub index: usize,
    /// Whether some codeword was `eps1`-typical with the source block.
    pub covered: bool,
    pub u: Vec<usize>,
    pub x: Vec<usize>,
}

fn typical_indices(
    checker: &TypicalityChecker,
    codebook: &Codebook,
    base: &[usize],
    stride: usize,
    scratch: &mut Scratch,
) -> Vec<usize> {
    (0..codebook.len())
        .filter(|&m| {
            let w = codebook.word(m);
            checker.check(
                base.iter().zip(w).map(|(&b, &c)| b + c as usize * stride),
                scratch,
            )
        })
        .collect()
}

/// Encodes source block `s` of terminal `j` against `codebook`: a uniformly
/// random `eps1`-typical index, or a uniformly random index when none is
/// typical.
pub fn encode_block(
    model: &SimModel,
    j: Terminal,
    s: &[usize],
    tilde: &TildeBlock,
    codebook: &Codebook,
    rng: &mut ChaCha8Rng,
) -> Encoded {
    let checker = &model.encoder[j.index()];
    let base: Vec<usize> = s.iter().map(|&v| v * checker.stride(0)).collect();
    let mut scratch = Scratch::default();
    let typical = typical_indices(checker, codebook, &base, checker.stride(1), &mut scratch);
    let covered = !typical.is_empty();
    let index = if covered {
        typical[rng.random_range(0..typical.len())]
    } else {
        rng.random_range(0..codebook.len())
    };
    let u: Vec<usize> = codebook.word(index).iter().map(|&v| v as usize).collect();
    let x = channel_input_block(model, j, s, &u, tilde);
    Encoded {
        index,
        covered,
        u,
        x,
    }
}

/// Terminal `j`'s sequences in the block it decodes in.
#[derive(Debug, Clone, Copy)]
pub struct DecoderView<'a> {
    pub s: &'a [usize],
    pub u: &'a [usize],
    pub ts: &'a [usize],
    pub tu: &'a [usize],
    pub tw: &'a [usize],
    pub x: &'a [usize],
    pub y: &'a [usize],
}

/// Result of decoding the other terminal's previous-block index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub index: usize,
    /// All `eps`-typical candidates, ascending.
    pub typical: Vec<usize>,
    /// Reconstruction of the other terminal's previous source block.
    pub reconstruction: Vec<usize>,
}

/// Reconstruction `G_j(u~', s, u, s~, u~, w~, y)` letter by letter.
pub fn reconstruct(
    model: &SimModel,
    j: Terminal,
    view: &DecoderView<'_>,
    tu_other: &[u8],
) -> Vec<usize> {
    (0..view.s.len())
        .map(|i| {
            model.cfg.g(
                j,
                GArgs {
                    tu_other: tu_other[i] as usize,
                    s: view.s[i],
                    u: view.u[i],
                    ts: view.ts[i],
                    tu: view.tu[i],
                    tw: view.tw[i],
                    y: view.y[i],
                },
            )
        })
        .collect()
}

/// Decodes the other terminal's index from `prev_codebook`: uniform among
/// `eps`-typical candidates, uniform over the codebook when none is typical.
pub fn decode_block(
    model: &SimModel,
    j: Terminal,
    view: &DecoderView<'_>,
    prev_codebook: &Codebook,
    rng: &mut ChaCha8Rng,
) -> Decoded {
    let checker = &model.decoder[j.index()];
    let st = |a: usize| checker.stride(a);
    let base: Vec<usize> = (0..view.s.len())
        .map(|i| {
            view.s[i] * st(0)
                + view.u[i] * st(1)
                + view.ts[i] * st(2)
                + view.tu[i] * st(3)
                + view.tw[i] * st(5)
                + view.x[i] * st(6)
                + view.y[i] * st(7)
        })
        .collect();
    let mut scratch = Scratch::default();
    let typical = typical_indices(checker, prev_codebook, &base, st(4), &mut scratch);
    let index = if typical.is_empty() {
        rng.random_range(0..prev_codebook.len())
    } else {
        typical[rng.random_range(0..typical.len())]
    };
    let reconstruction = reconstruct(model, j, view, prev_codebook.word(index));
    Decoded {
        index,
        typical,
        reconstruction,
    }
}

/// Fixed-length sequences of one transmitted block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTrace {
    pub tilde: TildeBlock,
    pub s: [Vec<usize>; 2],
    pub u: [Vec<usize>; 2],
    pub x: [Vec<usize>; 2],
    pub y: [Vec<usize>; 2],
}

/// Outcome of one trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialOutcome {
    /// Blocks `1..=B` with a covering failure at either terminal.
    pub cover: u64,
    pub cover_by_terminal: [u64; 2],
    /// Blocks `1..=B+1` whose full 14-tuple with true indices is atypical.
    pub typ: u64,
    /// Blocks `2..=B+1` where a wrong index is typical at either decoder.
    pub confuse: u64,
    pub confuse_by_terminal: [u64; 2],
    pub decodes: u64,
    pub correct: u64,
    /// Decodes where the true tuple is typical and no wrong index is; a
    /// violation is such a decode returning a wrong index.
    pub index_check_applicable: u64,
    pub index_check_violations: u64,
    /// Letters differing from the reconstruction with the true index.
    pub wrong_letters: u64,
    /// `sum_i d_j(s_i, s^_i) / n` for each source block.
    pub block_distortion: Vec<[f64; 2]>,
}

impl TrialOutcome {
    pub fn any_event(&self) -> bool {
        self.cover + self.typ + self.confuse > 0
    }
}

fn full_key(checker: &TypicalityChecker, t: &TildeBlock, b: &BlockOut, i: usize) -> usize {
    let v = [
        b.s[0][i], b.s[1][i], b.u[0][i], b.u[1][i], t.s[0][i], t.s[1][i], t.u[0][i], t.u[1][i],
        t.w[0][i], t.w[1][i], b.x[0][i], b.x[1][i], b.y[0][i], b.y[1][i],
    ];
    v.iter()
        .enumerate()
        .map(|(a, &c)| c * checker.stride(a))
        .sum()
}

struct BlockOut {
    s: [Vec<usize>; 2],
    u: [Vec<usize>; 2],
    x: [Vec<usize>; 2],
    y: [Vec<usize>; 2],
}

/// Runs one trial with codebooks drawn from `rng` (boundary sequences from
/// `frozen` when given). Pushes per-block sequences to `trace` when given.
pub fn run_trial(
    model: &SimModel,
    params: &SimParams,
    frozen: Option<&Boundary>,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<BlockTrace>>,
) -> Result<TrialOutcome> {
    let n = params.n;
    let big_b = params.blocks;
    let dims = *model.dims();
    let (init, termination) = match frozen {
        Some(f) => f.clone(),
        None => draw_boundary(model, n, rng),
    };
    let books = draw_codebooks(model, params, rng)?;
    let mut out = TrialOutcome {
        block_distortion: vec![[0.0; 2]; big_b],
        ..Default::default()
    };
    let mut tilde = init;
    let mut true_index = [0usize; 2];
    let mut scratch = Scratch::default();
    for b in 1..=big_b + 1 {
        let (blk, covered, index) = if b <= big_b {
            let s = model.draw_source(n, rng);
            let enc = Terminal::BOTH.map(|j| {
                encode_block(
                    model,
                    j,
                    &s[j.index()],
                    &tilde,
                    &books[b - 1][j.index()],
                    rng,
                )
            });
            let [e1, e2] = enc;
            let covered = [e1.covered, e2.covered];
            let index = [e1.index, e2.index];
            (
                BlockOut {
                    s,
                    u: [e1.u, e2.u],
                    x: [e1.x, e2.x],
                    y: Default::default(),
                },
                covered,
                index,
            )
        } else {
            let (s, u) = termination.clone();
            let x = Terminal::BOTH
                .map(|j| channel_input_block(model, j, &s[j.index()], &u[j.index()], &tilde));
            (
                BlockOut {
                    s,
                    u,
                    x,
                    y: Default::default(),
                },
                [true; 2],
                [0; 2],
            )
        };
        let mut blk = blk;
        let mut y = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for i in 0..n {
            let v = model.channel[blk.x[0][i] * dims.x[1] + blk.x[1][i]].draw(rng);
            y[0].push(v / dims.y[1]);
            y[1].push(v % dims.y[1]);
        }
        blk.y = y;

        if b <= big_b && covered.contains(&false) {
            out.cover += 1;
            for (count, ok) in out.cover_by_terminal.iter_mut().zip(covered) {
                *count += u64::from(!ok);
            }
        }
        let typ_event = !model.full.check(
            (0..n).map(|i| full_key(&model.full, &tilde, &blk, i)),
            &mut scratch,
        );
        out.typ += u64::from(typ_event);

        if b >= 2 {
            let mut confused = false;
            for j in Terminal::BOTH {
                let k = j.index();
                let o = j.other().index();
                let view = DecoderView {
                    s: &blk.s[k],
                    u: &blk.u[k],
                    ts: &tilde.s[k],
                    tu: &tilde.u[k],
                    tw: &tilde.w[k],
                    x: &blk.x[k],
                    y: &blk.y[k],
                };
                let book = &books[b - 2][o];
                let dec = decode_block(model, j, &view, book, rng);
                let truth = true_index[o];
                let f4 = dec.typical.iter().any(|&m| m != truth);
                confused |= f4;
                out.confuse_by_terminal[k] += u64::from(f4);
                out.decodes += 1;
                let correct = dec.index == truth;
                out.correct += u64::from(correct);
                if !typ_event && !f4 {
                    out.index_check_applicable += 1;
                    out.index_check_violations += u64::from(!correct);
                }
                let genie = reconstruct(model, j, &view, book.word(truth));
                out.wrong_letters += genie
                    .iter()
                    .zip(&dec.reconstruction)
                    .filter(|(a, b)| a != b)
                    .count() as u64;
                // tilde s of terminal o is its source block b - 1
                let dm = &model.dist[o];
                let total: f64 = tilde.s[o]
                    .iter()
                    .zip(&dec.reconstruction)
                    .map(|(&s, &r)| dm.d(s, r))
                    .sum();
                out.block_distortion[b - 2][o] = total / n as f64;
            }
            out.confuse += u64::from(confused);
        }

        if let Some(t) = trace.as_deref_mut() {
            t.push(BlockTrace {
                tilde: tilde.clone(),
                s: blk.s.clone(),
                u: blk.u.clone(),
                x: blk.x.clone(),
                y: blk.y.clone(),
            });
        }
        let w = Terminal::BOTH.map(|j| {
            let k = j.index();
            (0..n)
                .map(|i| dims.join_w(j, blk.x[k][i], blk.y[k][i]))
                .collect()
        });
        tilde = TildeBlock {
            s: blk.s,
            u: blk.u,
            w,
        };
        true_index = index;
    }
    Ok(out)
}

/// Aggregated simulation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub params: SimParams,
    /// Source symbols per channel use, `B / (B + 1)`.
    pub jscc_rate: f64,
    pub codebook_sizes: [usize; 2],
    /// Empirical distortion of each source block, averaged over trials.
    pub block_distortions: Vec<[f64; 2]>,
    /// Mean of `block_distortions`.
    pub distortions: [f64; 2],
    /// `(trial, block)` slots with a covering failure at either terminal.
    pub err_cover: u64,
    pub err_cover_by_terminal: [u64; 2],
    /// Slots whose full tuple is atypical.
    pub err_typ: u64,
    /// Slots where a wrong index is typical at either decoder.
    pub err_confuse: u64,
    pub err_confuse_by_terminal: [u64; 2],
    /// Trials in which at least one event fired.
    pub event_trials: u64,
    /// `event_trials / trials`.
    pub error_frequency: f64,
    pub decodes: u64,
    pub correct_decodes: u64,
    pub index_accuracy: f64,
    pub index_check_applicable: u64,
    pub index_check_violations: u64,
    pub wrong_letters: u64,
    /// Wrong letters in trials without any logged event.
    pub unexplained_wrong_letters: u64,
    pub wall_clock_secs: f64,
}

impl SimReport {
    /// Equality ignoring wall-clock time.
    pub fn same_results(&self, other: &SimReport) -> bool {
        let mut a = self.clone();
        a.wall_clock_secs = other.wall_clock_secs;
        a == *other
    }
}

/// Runs `params.trials` independent trials in parallel. Trial `t` uses
/// stream `t` of a generator seeded with `params.seed`.
pub fn run_simulation(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
    params: &SimParams,
) -> Result<SimReport> {
    let start = Instant::now();
    let model = SimModel::new(cfg, ch, src, d1, d2, params)?;
    let frozen = params.freeze_boundary.then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(FROZEN_STREAM);
        draw_boundary(&model, params.n, &mut rng)
    });
    let outcomes: Vec<TrialOutcome> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            run_trial(&model, params, frozen.as_ref(), &mut rng, None)
        })
        .collect::<Result<_>>()?;
    let big_b = params.blocks;
    let trials = params.trials as f64;
    let mut block_distortions = vec![[0.0; 2]; big_b];
    let mut r = SimReport {
        params: *params,
        jscc_rate: params.jscc_rate(),
        codebook_sizes: [
            params.codebook_size(Terminal::One)?,
            params.codebook_size(Terminal::Two)?,
        ],
        block_distortions: Vec::new(),
        distortions: [0.0; 2],
        err_cover: 0,
        err_cover_by_terminal: [0; 2],
        err_typ: 0,
        err_confuse: 0,
        err_confuse_by_terminal: [0; 2],
        event_trials: 0,
        error_frequency: 0.0,
        decodes: 0,
        correct_decodes: 0,
        index_accuracy: 0.0,
        index_check_applicable: 0,
        index_check_violations: 0,
        wrong_letters: 0,
        unexplained_wrong_letters: 0,
        wall_clock_secs: 0.0,
    };
    for o in &outcomes {
        r.err_cover += o.cover;
        r.err_typ += o.typ;
        r.err_confuse += o.confuse;
        for k in 0..2 {
            r.err_cover_by_terminal[k] += o.cover_by_terminal[k];
            r.err_confuse_by_terminal[k] += o.confuse_by_terminal[k];
        }
        r.event_trials += u64::from(o.any_event());
        r.decodes += o.decodes;
        r.correct_decodes += o.correct;
        r.index_check_applicable += o.index_check_applicable;
        r.index_check_violations += o.index_check_violations;
        r.wrong_letters += o.wrong_letters;
        if !o.any_event() {
            r.unexplained_wrong_letters += o.wrong_letters;
        }
        for (acc, d) in block_distortions.iter_mut().zip(&o.block_distortion) {
            acc[0] += d[0] / trials;
            acc[1] += d[1] / trials;
        }
    }
    for k in 0..2 {
        r.distortions[k] = block_distortions.iter().map(|d| d[k]).sum::<f64>() / big_b as f64;
    }
    r.block_distortions = block_distortions;
    r.error_frequency = r.event_trials as f64 / trials;
    r.index_accuracy = r.correct_decodes as f64 / r.decodes.max(1) as f64;
    r.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Sweep table with columns
/// `n,B,eps,eps1,R1,R2,d1_hat,d2_hat,err_cover,err_typ,err_confuse,trials`.
pub fn write_sweep_csv(mut w: impl Write, reports: &[SimReport]) -> std::io::Result<()> {
    writeln!(
        w,
        "n,B,eps,eps1,R1,R2,d1_hat,d2_hat,err_cover,err_typ,err_confuse,trials"
    )?;
    for r in reports {
        let p = &r.params;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.n,
            p.blocks,
            p.eps,
            p.eps1,
            p.rates[0],
            p.rates[1],
            r.distortions[0],
            r.distortions[1],
            r.err_cover,
            r.err_typ,
            r.err_confuse,
            p.trials
        )?;
    }
    Ok(())
}
