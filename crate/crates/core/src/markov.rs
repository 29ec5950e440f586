//! The system Markov chain of a configuration.
//!
//! The chain state is `Z = (S1, S2, U1, U2, S~1, S~2, U~1, U~2, W~1, W~2, X1,
//! X2, Y1, Y2)`. Its tilde block is a copy of the previous fresh block, so the
//! chain is stored on the reduced state `R = (S1, S2, U1, U2, X1, X2, Y1, Y2)`
//! and the law of `Z` is recovered as the law of a consecutive pair of
//! reduced states.

use std::sync::Arc;

use crate::coded::{Configuration, Dims, FArgs, GArgs};
use crate::error::{Error, Result};
use crate::models::{DistortionMeasure, JointSource, Terminal, TwoWayChannel};
use crate::prob::{shape_len, unflatten, Alphabet, JointPmf};

/// Default cap on the number of reduced states.
pub const DEFAULT_STATE_CAP: usize = 1 << 24;
/// Cap on stored kernel entries.
pub const NNZ_CAP: usize = 1 << 26;
/// Stationarity tolerance on `||pi K - pi||_1`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Slack used when comparing distortions with their targets.
pub const DISTORTION_SLACK: f64 = 1e-9;

const POWER_TARGET: f64 = 1e-13;
const MAX_ITERATIONS: usize = 100_000;
const STALL_WINDOW: usize = 500;
const DENSE_LIMIT: usize = 4096;
const DENSE_MARGINAL_CAP: usize = 1 << 22;

/// Coordinates of `Z`, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZAxis {
    S1,
    S2,
    U1,
    U2,
    TS1,
    TS2,
    TU1,
    TU2,
    TW1,
    TW2,
    X1,
    X2,
    Y1,
    Y2,
}

impl ZAxis {
    pub const ALL: [ZAxis; 14] = [
        ZAxis::S1,
        ZAxis::S2,
        ZAxis::U1,
        ZAxis::U2,
        ZAxis::TS1,
        ZAxis::TS2,
        ZAxis::TU1,
        ZAxis::TU2,
        ZAxis::TW1,
        ZAxis::TW2,
        ZAxis::X1,
        ZAxis::X2,
        ZAxis::Y1,
        ZAxis::Y2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ZAxis::S1 => "S1",
            ZAxis::S2 => "S2",
            ZAxis::U1 => "U1",
            ZAxis::U2 => "U2",
            ZAxis::TS1 => "S~1",
            ZAxis::TS2 => "S~2",
            ZAxis::TU1 => "U~1",
            ZAxis::TU2 => "U~2",
            ZAxis::TW1 => "W~1",
            ZAxis::TW2 => "W~2",
            ZAxis::X1 => "X1",
            ZAxis::X2 => "X2",
            ZAxis::Y1 => "Y1",
            ZAxis::Y2 => "Y2",
        }
    }

    pub fn size(self, d: &Dims) -> usize {
        match self {
            ZAxis::S1 | ZAxis::TS1 => d.s[0],
            ZAxis::S2 | ZAxis::TS2 => d.s[1],
            ZAxis::U1 | ZAxis::TU1 => d.u[0],
            ZAxis::U2 | ZAxis::TU2 => d.u[1],
            ZAxis::TW1 => d.w(Terminal::One),
            ZAxis::TW2 => d.w(Terminal::Two),
            ZAxis::X1 => d.x[0],
            ZAxis::X2 => d.x[1],
            ZAxis::Y1 => d.y[0],
            ZAxis::Y2 => d.y[1],
        }
    }

    /// Fresh-block axes of terminal `j`: `S_j, U_j, X_j, Y_j`.
    pub fn fresh(j: Terminal) -> [ZAxis; 4] {
        match j {
            Terminal::One => [ZAxis::S1, ZAxis::U1, ZAxis::X1, ZAxis::Y1],
            Terminal::Two => [ZAxis::S2, ZAxis::U2, ZAxis::X2, ZAxis::Y2],
        }
    }

    fn is_tilde(self) -> bool {
        matches!(
            self,
            ZAxis::TS1 | ZAxis::TS2 | ZAxis::TU1 | ZAxis::TU2 | ZAxis::TW1 | ZAxis::TW2
        )
    }
}

/// Reduced state `(s1, s2, u1, u2, x1, x2, y1, y2)`.
pub type State = [u16; 8];

/// Indexing of the reduced state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedSpace {
    dims: Dims,
    shape: [usize; 8],
}

impl ReducedSpace {
    pub fn new(dims: Dims) -> Self {
        let shape = [
            dims.s[0], dims.s[1], dims.u[0], dims.u[1], dims.x[0], dims.x[1], dims.y[0], dims.y[1],
        ];
        Self { dims, shape }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn shape(&self) -> &[usize; 8] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        shape_len(&self.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encode(&self, r: &[usize; 8]) -> usize {
        r.iter().zip(self.shape).fold(0, |acc, (&c, n)| acc * n + c)
    }

    pub fn decode(&self, idx: usize) -> [usize; 8] {
        let mut c = [0usize; 8];
        unflatten(&self.shape, idx, &mut c);
        c
    }

    /// Reduced index of the tilde-block tuple `(s~1, s~2, u~1, u~2, w~1, w~2)`.
    pub fn from_tilde(&self, t: &[usize; 6]) -> usize {
        let (x1, y1) = self.dims.split_w(Terminal::One, t[4]);
        let (x2, y2) = self.dims.split_w(Terminal::Two, t[5]);
        self.encode(&[t[0], t[1], t[2], t[3], x1, x2, y1, y2])
    }

    pub fn to_tilde(&self, r: &[usize; 8]) -> [usize; 6] {
        [
            r[0],
            r[1],
            r[2],
            r[3],
            self.dims.join_w(Terminal::One, r[4], r[6]),
            self.dims.join_w(Terminal::Two, r[5], r[7]),
        ]
    }
}

/// Value of a `Z` coordinate for the consecutive pair `(prev, cur)`.
#[inline]
pub fn z_value(axis: ZAxis, d: &Dims, prev: &State, cur: &State) -> usize {
    let p = |k: usize| prev[k] as usize;
    let c = |k: usize| cur[k] as usize;
    match axis {
        ZAxis::S1 => c(0),
        ZAxis::S2 => c(1),
        ZAxis::U1 => c(2),
        ZAxis::U2 => c(3),
        ZAxis::TS1 => p(0),
        ZAxis::TS2 => p(1),
        ZAxis::TU1 => p(2),
        ZAxis::TU2 => p(3),
        ZAxis::TW1 => p(4) * d.y[0] + p(6),
        ZAxis::TW2 => p(5) * d.y[1] + p(7),
        ZAxis::X1 => c(4),
        ZAxis::X2 => c(5),
        ZAxis::Y1 => c(6),
        ZAxis::Y2 => c(7),
    }
}

/// Sparse row-stochastic kernel over reduced states (CSR layout).
#[derive(Debug, Clone)]
pub struct Kernel {
    space: ReducedSpace,
    states: Vec<State>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Kernel {
    pub fn space(&self) -> &ReducedSpace {
        &self.space
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, idx: usize) -> &State {
        &self.states[idx]
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(successor, probability)` pairs of a row.
    pub fn row(&self, idx: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[idx]..self.row_ptr[idx + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_len(&self, idx: usize) -> usize {
        self.row_ptr[idx + 1] - self.row_ptr[idx]
    }

    pub fn max_row_deviation(&self) -> f64 {
        (0..self.num_states())
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `out = pi K`.
    pub fn apply(&self, pi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += p * v;
            }
        }
    }

    /// `||pi K - pi||_1`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut next = vec![0.0; pi.len()];
        self.apply(pi, &mut next);
        l1(&next, pi)
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// The system chain of a configuration, optionally with a solved
/// stationary law.
#[derive(Debug, Clone)]
pub struct MarkovSystem {
    kernel: Arc<Kernel>,
    stationary: Option<StationaryLaw>,
}

impl MarkovSystem {
    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    pub fn dims(&self) -> &Dims {
        self.kernel.space.dims()
    }

    pub fn stationary(&self) -> Option<&StationaryLaw> {
        self.stationary.as_ref()
    }

    /// Solves for the stationary law and stores it.
    pub fn solve(&mut self) -> Result<&StationaryLaw> {
        if self.stationary.is_none() {
            self.stationary = Some(stationary_distribution(self)?);
        }
        Ok(self.stationary.as_ref().unwrap())
    }

    /// Law of `Z` when the tilde block is drawn from `p_tilde`.
    pub fn law_from_tilde(&self, p_tilde: &JointPmf) -> Result<StationaryLaw> {
        let space = &self.kernel.space;
        let tshape = space.dims().tilde_shape();
        if p_tilde.shape() != tshape {
            return Err(Error::AlphabetMismatch("tilde law shape".into()));
        }
        let mut pi = vec![0.0; space.len()];
        let mut t = [0usize; 6];
        for (i, &p) in p_tilde.probs().iter().enumerate() {
            unflatten(&tshape, i, &mut t);
            pi[space.from_tilde(&t)] = p;
        }
        let residual = self.kernel.residual(&pi);
        Ok(StationaryLaw {
            kernel: self.kernel.clone(),
            pi,
            residual,
            method: SolveMethod::Supplied,
            unique: None,
        })
    }
}

/// Builds the system chain with the default state cap.
pub fn build_kernel(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<MarkovSystem> {
    build_kernel_capped(cfg, ch, src, DEFAULT_STATE_CAP)
}

pub fn build_kernel_capped(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
    cap: usize,
) -> Result<MarkovSystem> {
    cfg.check_consistent(ch, src)?;
    let dims = *cfg.dims();
    let space = ReducedSpace::new(dims);
    let n = space.len();
    if n > cap || n > u32::MAX as usize {
        return Err(Error::StateSpaceTooLarge {
            states: n,
            cap: cap.min(u32::MAX as usize),
        });
    }
    if dims
        .s
        .iter()
        .chain(&dims.u)
        .chain(&dims.x)
        .chain(&dims.y)
        .any(|&v| v > u16::MAX as usize)
    {
        return Err(Error::InvalidParameter("alphabet sizes above 65535".into()));
    }

    // fresh (s1, s2, u1, u2) with positive probability
    let mut fresh = Vec::new();
    for s1 in 0..dims.s[0] {
        for s2 in 0..dims.s[1] {
            let ps = src.prob(s1, s2);
            if ps == 0.0 {
                continue;
            }
            for u1 in 0..dims.u[0] {
                let p1 = cfg.pu_given_s(Terminal::One).prob(s1, u1);
                if p1 == 0.0 {
                    continue;
                }
                for u2 in 0..dims.u[1] {
                    let p2 = cfg.pu_given_s(Terminal::Two).prob(s2, u2);
                    if p2 > 0.0 {
                        fresh.push(([s1, s2, u1, u2], ps * p1 * p2));
                    }
                }
            }
        }
    }
    let ny2 = dims.y[1];
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut states = Vec::with_capacity(n);
    row_ptr.push(0);
    for idx in 0..n {
        let r = space.decode(idx);
        states.push(r.map(|v| v as u16));
        let tw = [
            dims.join_w(Terminal::One, r[4], r[6]),
            dims.join_w(Terminal::Two, r[5], r[7]),
        ];
        for &(f, pf) in &fresh {
            let x1 = cfg.f(
                Terminal::One,
                FArgs {
                    s: f[0],
                    u: f[2],
                    ts: r[0],
                    tu: r[2],
                    tw: tw[0],
                },
            );
            let x2 = cfg.f(
                Terminal::Two,
                FArgs {
                    s: f[1],
                    u: f[3],
                    ts: r[1],
                    tu: r[3],
                    tw: tw[1],
                },
            );
            for (y, &py) in ch.row(x1, x2).iter().enumerate() {
                if py > 0.0 {
                    let next = space.encode(&[f[0], f[1], f[2], f[3], x1, x2, y / ny2, y % ny2]);
                    cols.push(next as u32);
                    vals.push(pf * py);
                }
            }
        }
        if vals.len() > NNZ_CAP {
            return Err(Error::ResourceCap(format!(
                "kernel exceeds {NNZ_CAP} stored transitions"
            )));
        }
        row_ptr.push(vals.len());
    }
    // successors are sorted by construction only within a fresh tuple; sort rows
    let mut kernel = Kernel {
        space,
        states,
        row_ptr,
        cols,
        vals,
    };
    sort_rows(&mut kernel);
    Ok(MarkovSystem {
        kernel: Arc::new(kernel),
        stationary: None,
    })
}

fn sort_rows(k: &mut Kernel) {
    let mut buf: Vec<(u32, f64)> = Vec::new();
    for i in 0..k.states.len() {
        let span = k.row_ptr[i]..k.row_ptr[i + 1];
        buf.clear();
        buf.extend(
            k.cols[span.clone()]
                .iter()
                .copied()
                .zip(k.vals[span.clone()].iter().copied()),
        );
        buf.sort_by_key(|e| e.0);
        for (o, (c, v)) in span.zip(buf.iter()) {
            k.cols[o] = *c;
            k.vals[o] = *v;
        }
    }
}

/// How a stationary law was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Power,
    Dense,
    Lazy,
    Supplied,
}

/// Law of the consecutive pair `(R_{t-1}, R_t)`: `pi(prev) K(prev, cur)`.
#[derive(Debug, Clone)]
pub struct StationaryLaw {
    kernel: Arc<Kernel>,
    pi: Vec<f64>,
    residual: f64,
    method: SolveMethod,
    /// `Some(false)` when a second independent fixed point was detected.
    unique: Option<bool>,
}

impl StationaryLaw {
    pub fn reduced(&self) -> &[f64] {
        &self.pi
    }

    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_stationary(&self) -> bool {
        self.residual <= STATIONARY_TOL
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn unique(&self) -> Option<bool> {
        self.unique
    }

    pub fn dims(&self) -> &Dims {
        self.kernel.space.dims()
    }

    /// Calls `f(prev, cur, p)` for every consecutive pair of positive mass.
    pub fn for_each_pair(&self, mut f: impl FnMut(&State, &State, f64)) {
        let k = &*self.kernel;
        for (i, &p) in self.pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let prev = &k.states[i];
            for (j, v) in k.row(i) {
                f(prev, &k.states[j], p * v);
            }
        }
    }

    /// Marginal of `Z` on `axes`, in the given order.
    pub fn marginal(&self, axes: &[ZAxis]) -> Result<JointPmf> {
        if axes.is_empty() {
            return Err(Error::EmptyAxisSet);
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::OverlappingAxes(i));
            }
        }
        let d = *self.dims();
        let shape: Vec<usize> = axes.iter().map(|a| a.size(&d)).collect();
        let mut probs = vec![0.0; shape_len(&shape)];
        let index = |prev: &State, cur: &State| {
            axes.iter()
                .zip(&shape)
                .fold(0, |acc, (&a, &n)| acc * n + z_value(a, &d, prev, cur))
        };
        if axes.iter().all(|a| a.is_tilde()) {
            let k = &*self.kernel;
            for (i, &p) in self.pi.iter().enumerate() {
                if p != 0.0 {
                    probs[index(&k.states[i], &k.states[i])] += p;
                }
            }
        } else {
            self.for_each_pair(|prev, cur, p| probs[index(prev, cur)] += p);
        }
        let labels = axes
            .iter()
            .zip(&shape)
            .map(|(a, &n)| Alphabet::new(n, a.label()))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointPmf::from_parts(labels, probs))
    }

    /// Law of the tilde block `(S~1, S~2, U~1, U~2, W~1, W~2)`.
    pub fn tilde(&self) -> JointPmf {
        self.marginal(&[
            ZAxis::TS1,
            ZAxis::TS2,
            ZAxis::TU1,
            ZAxis::TU2,
            ZAxis::TW1,
            ZAxis::TW2,
        ])
        .expect("tilde axes are valid")
    }

    /// Law of the next tilde block, i.e. the fresh `(S, U, (X, Y))` block.
    pub fn next_tilde(&self) -> JointPmf {
        let d = *self.dims();
        let shape = d.tilde_shape();
        let mut probs = vec![0.0; shape_len(&shape)];
        let space = &self.kernel.space;
        self.for_each_pair(|_, cur, p| {
            let r = cur.map(|v| v as usize);
            let t = space.to_tilde(&r);
            let idx = t.iter().zip(shape).fold(0, |acc, (&c, n)| acc * n + c);
            probs[idx] += p;
        });
        let tilde = self.tilde();
        JointPmf::from_parts(tilde.axes().to_vec(), probs)
    }

    /// Largest gap between the tilde-block law and the pushforward of the
    /// fresh block.
    pub fn consecutive_pair_gap(&self) -> f64 {
        let a = self.tilde();
        let b = self.next_tilde();
        a.max_abs_diff(&b).expect("same shape")
    }

    /// Full joint law over the 14 axes of `Z`, if it has at most `cap` cells.
    pub fn to_joint(&self, cap: usize) -> Result<JointPmf> {
        let d = *self.dims();
        let cells: usize = ZAxis::ALL.iter().map(|a| a.size(&d)).product();
        if cells > cap {
            return Err(Error::StateSpaceTooLarge { states: cells, cap });
        }
        self.marginal(&ZAxis::ALL)
    }

    /// Entropy of the `Z` coordinates `axes` (0 for the empty set).
    pub fn entropy_of(&self, axes: &[ZAxis]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        let d = *self.dims();
        let cells = axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.size(&d)));
        match cells {
            Some(c) if c <= DENSE_MARGINAL_CAP => Ok(self.marginal(axes)?.entropy()),
            _ => {
                for (i, a) in axes.iter().enumerate() {
                    if axes[..i].contains(a) {
                        return Err(Error::OverlappingAxes(i));
                    }
                }
                let mut map = std::collections::HashMap::new();
                self.for_each_pair(|prev, cur, p| {
                    let key: Vec<u16> = axes
                        .iter()
                        .map(|&a| z_value(a, &d, prev, cur) as u16)
                        .collect();
                    *map.entry(key).or_insert(0.0) += p;
                });
                Ok(map.values().map(|&p| crate::prob::plogp(p)).sum())
            }
        }
    }

    /// `I(A; B)` under the pair law.
    pub fn mutual_information(&self, a: &[ZAxis], b: &[ZAxis]) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }

    /// `I(A; B | C)` under the pair law, clamped at 0.
    pub fn conditional_mutual_information(
        &self,
        a: &[ZAxis],
        b: &[ZAxis],
        c: &[ZAxis],
    ) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyAxisSet);
        }
        let cat = |x: &[ZAxis], y: &[ZAxis]| [x, y].concat();
        let ac = cat(a, c);
        let bc = cat(b, c);
        let abc = cat(a, &bc);
        let v = self.entropy_of(&ac)? + self.entropy_of(&bc)?
            - self.entropy_of(&abc)?
            - self.entropy_of(c)?;
        Ok(v.max(0.0))
    }

    /// Sparse marginal as `(coords, p)` pairs with positive mass, sorted.
    pub fn sparse_marginal(&self, axes: &[ZAxis]) -> Vec<(Vec<usize>, f64)> {
        let d = *self.dims();
        let mut map = std::collections::BTreeMap::new();
        self.for_each_pair(|prev, cur, p| {
            let key: Vec<usize> = axes.iter().map(|&a| z_value(a, &d, prev, cur)).collect();
            *map.entry(key).or_insert(0.0) += p;
        });
        map.into_iter().filter(|(_, p)| *p > 0.0).collect()
    }
}

/// Solves `pi K = pi`.
///
/// Power iteration from the uniform law first; on a stall, a dense
/// null-space solve for small chains or lazy iteration otherwise.
pub fn stationary_distribution(sys: &MarkovSystem) -> Result<StationaryLaw> {
    let k = &sys.kernel;
    let n = k.num_states();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut last_window = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        k.apply(&pi, &mut next);
        let residual = l1(&next, &pi);
        std::mem::swap(&mut pi, &mut next);
        if residual <= POWER_TARGET {
            break;
        }
        if it % STALL_WINDOW == STALL_WINDOW - 1 {
            if residual > 0.9 * last_window {
                break;
            }
            last_window = residual;
        }
    }
    renormalize(&mut pi);
    let residual = k.residual(&pi);
    if residual <= STATIONARY_TOL {
        return Ok(law(k, pi, residual, SolveMethod::Power, None));
    }

    let mut unique = None;
    if n <= DENSE_LIMIT {
        match dense_null_space(k) {
            NullSpace::Unique(v) => {
                let r = k.residual(&v);
                if r <= STATIONARY_TOL {
                    return Ok(law(k, v, r, SolveMethod::Dense, Some(true)));
                }
            }
            NullSpace::Multiple => unique = Some(false),
            NullSpace::Failed => {}
        }
    }

    // lazy iteration has the same fixed points and no periodicity
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITERATIONS {
        k.apply(&pi, &mut next);
        for (a, b) in next.iter_mut().zip(&pi) {
            *a = 0.5 * (*a + b);
        }
        let step = l1(&next, &pi);
        std::mem::swap(&mut pi, &mut next);
        if step <= 0.5 * POWER_TARGET {
            break;
        }
    }
    renormalize(&mut pi);
    let residual = k.residual(&pi);
    if residual <= STATIONARY_TOL {
        return Ok(law(k, pi, residual, SolveMethod::Lazy, unique));
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn law(
    k: &Arc<Kernel>,
    pi: Vec<f64>,
    residual: f64,
    method: SolveMethod,
    unique: Option<bool>,
) -> StationaryLaw {
    StationaryLaw {
        kernel: k.clone(),
        pi,
        residual,
        method,
        unique,
    }
}

fn renormalize(pi: &mut [f64]) {
    for v in pi.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    if s > 0.0 {
        pi.iter_mut().for_each(|v| *v /= s);
    }
}

enum NullSpace {
    Unique(Vec<f64>),
    Multiple,
    Failed,
}

/// Null space of `K^T - I` by Gaussian elimination with partial pivoting.
fn dense_null_space(k: &Kernel) -> NullSpace {
    let n = k.num_states();
    // a[r][c] = K[c][r] - delta
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        for (j, v) in k.row(i) {
            a[j * n + i] += v;
        }
        a[i * n + i] -= 1.0;
    }
    let tol = 1e-11;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (best, mag) = (row..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((row, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
        if mag <= tol {
            continue;
        }
        if best != row {
            for c in 0..n {
                a.swap(best * n + c, row * n + c);
            }
        }
        let inv = 1.0 / a[row * n + col];
        for c in col..n {
            a[row * n + c] *= inv;
        }
        for r in 0..n {
            if r != row {
                let f = a[r * n + col];
                if f != 0.0 {
                    for c in col..n {
                        a[r * n + c] -= f * a[row * n + c];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let nullity = n - pivots.len();
    if nullity > 1 {
        return NullSpace::Multiple;
    }
    if nullity == 0 {
        return NullSpace::Failed;
    }
    let free = (0..n).find(|c| !pivots.contains(c)).unwrap();
    let mut v = vec![0.0; n];
    v[free] = 1.0;
    for (r, &pc) in pivots.iter().enumerate() {
        v[pc] = -a[r * n + free];
    }
    let s: f64 = v.iter().sum();
    if s.abs() < tol {
        return NullSpace::Failed;
    }
    v.iter_mut().for_each(|x| *x /= s);
    if v.iter().any(|&x| x < -1e-9) {
        return NullSpace::Failed;
    }
    renormalize(&mut v);
    NullSpace::Unique(v)
}

/// Tilde-block law that makes the system chain stationary.
pub fn find_stationary_tilde(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<JointPmf> {
    let sys = build_kernel(cfg, ch, src)?;
    Ok(stationary_distribution(&sys)?.tilde())
}

/// Stationarity residual of `p_tilde`: `||P~ K - P~||_1` in reduced form.
pub fn tilde_residual(sys: &MarkovSystem, p_tilde: &JointPmf) -> Result<f64> {
    Ok(sys.law_from_tilde(p_tilde)?.residual())
}

/// `(E d1(S~1, S^1), E d2(S~2, S^2))` where `S^_j' = G_j(U~_j', ...)`.
pub fn reconstruction_distortions(
    law: &StationaryLaw,
    cfg: &Configuration,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
) -> Result<(f64, f64)> {
    let dims = *cfg.dims();
    if dims != *law.dims() {
        return Err(Error::AlphabetMismatch(
            "configuration and chain differ".into(),
        ));
    }
    check_distortion(&dims, Terminal::One, d1)?;
    check_distortion(&dims, Terminal::Two, d2)?;
    let mut acc = [0.0; 2];
    law.for_each_pair(|prev, cur, p| {
        for j in Terminal::BOTH {
            let o = j.other();
            let shat = cfg.g(j, g_args(&dims, j, prev, cur));
            let target = prev[o.index()] as usize;
            let d = if o == Terminal::One { d1 } else { d2 };
            acc[o.index()] += p * d.d(target, shat);
        }
    });
    Ok((acc[0], acc[1]))
}

fn check_distortion(dims: &Dims, j: Terminal, d: &DistortionMeasure) -> Result<()> {
    let k = j.index();
    if d.source_size() != dims.s[k] || d.recon_size() != dims.shat[k] {
        return Err(Error::AlphabetMismatch(format!(
            "distortion measure {} does not match S{} / reconstruction alphabet",
            k + 1,
            k + 1
        )));
    }
    Ok(())
}

/// Arguments of `G_j` at the consecutive pair `(prev, cur)`, using the true
/// `U~_j'`.
#[inline]
pub fn g_args(dims: &Dims, j: Terminal, prev: &State, cur: &State) -> GArgs {
    let k = j.index();
    let o = j.other().index();
    GArgs {
        tu_other: prev[2 + o] as usize,
        s: cur[k] as usize,
        u: cur[2 + k] as usize,
        ts: prev[k] as usize,
        tu: prev[2 + k] as usize,
        tw: prev[4 + k] as usize * dims.y[k] + prev[6 + k] as usize,
        y: cur[6 + k] as usize,
    }
}

/// Bayes-optimal reconstruction tables under `law`; arguments of zero mass
/// map to symbol 0.
pub fn optimal_reconstruction(
    law: &StationaryLaw,
    cfg: &Configuration,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
) -> Result<[Vec<usize>; 2]> {
    let dims = *cfg.dims();
    check_distortion(&dims, Terminal::One, d1)?;
    check_distortion(&dims, Terminal::Two, d2)?;
    let mut weights =
        Terminal::BOTH.map(|j| vec![0.0; shape_len(&dims.g_shape(j)) * dims.s[j.other().index()]]);
    law.for_each_pair(|prev, cur, p| {
        for j in Terminal::BOTH {
            let o = j.other().index();
            let g = cfg.g_index(j, g_args(&dims, j, prev, cur));
            weights[j.index()][g * dims.s[o] + prev[o] as usize] += p;
        }
    });
    Ok(Terminal::BOTH.map(|j| {
        let o = j.other().index();
        let d = if o == 0 { d1 } else { d2 };
        weights[j.index()]
            .chunks(dims.s[o])
            .map(|w| {
                let mut best = (0, f64::INFINITY);
                for shat in 0..dims.shat[o] {
                    let cost: f64 = w.iter().enumerate().map(|(s, &p)| p * d.d(s, shat)).sum();
                    if cost < best.1 - 1e-15 {
                        best = (shat, cost);
                    }
                }
                best.0
            })
            .collect()
    }))
}

/// Outcome of a membership check for `Pi_Z(D1, D2)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PiZReport {
    pub member: bool,
    pub distortions: (f64, f64),
    pub stationary_residual: f64,
    pub diagnostic: Option<String>,
}

/// Membership of `cfg` (with its own tilde law) in `Pi_Z(D1, D2)`.
#[allow(non_snake_case, clippy::too_many_arguments)]
pub fn in_Pi_Z(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
    D1: f64,
    D2: f64,
) -> PiZReport {
    let fail = |msg: String| PiZReport {
        member: false,
        distortions: (f64::NAN, f64::NAN),
        stationary_residual: f64::INFINITY,
        diagnostic: Some(msg),
    };
    let Some(tilde) = cfg.p_tilde() else {
        return fail(Error::MissingTilde.to_string());
    };
    let sys = match build_kernel(cfg, ch, src) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let law = match sys.law_from_tilde(tilde) {
        Ok(l) => l,
        Err(e) => return fail(e.to_string()),
    };
    let distortions = match reconstruction_distortions(&law, cfg, d1, d2) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let stationary = law.is_stationary();
    let member = stationary
        && distortions.0 <= D1 + DISTORTION_SLACK
        && distortions.1 <= D2 + DISTORTION_SLACK;
    PiZReport {
        member,
        distortions,
        stationary_residual: law.residual(),
        diagnostic: (!stationary).then(|| "tilde law is not stationary".to_string()),
    }
}
