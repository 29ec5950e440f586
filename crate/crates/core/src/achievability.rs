//! Achievability conditions: the general coded-channel conditions, the hybrid
//! and separate (Wyner-Ziv plus adaptive channel code) special cases, and the
//! non-adaptive random-coding bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coded::{Configuration, Dims};
use crate::error::{Error, Result};
use crate::markov::{build_kernel, stationary_distribution, SolveMethod, StationaryLaw, ZAxis};
use crate::models::{DistortionMeasure, JointSource, Terminal, TwoWayChannel};
use crate::prob::{flat_index, shape_len, simplex_grid, Alphabet, ConditionalPmf, JointPmf};

/// Default tolerance for the strict inequalities.
pub const CONDITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Satisfied,
    Boundary,
    Unsatisfied,
}

/// A pair of inequalities `lhs_j < rhs_j`, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    /// `min_j (rhs_j - lhs_j)`.
    pub margin: f64,
    pub satisfied: bool,
    pub status: ConditionStatus,
}

impl ConditionReport {
    pub fn new(lhs1: f64, rhs1: f64, lhs2: f64, rhs2: f64) -> Self {
        Self::with_tol(lhs1, rhs1, lhs2, rhs2, CONDITION_TOL)
    }

    pub fn with_tol(lhs1: f64, rhs1: f64, lhs2: f64, rhs2: f64, tol: f64) -> Self {
        let margin = (rhs1 - lhs1).min(rhs2 - lhs2);
        let status = if margin > tol {
            ConditionStatus::Satisfied
        } else if margin >= -tol {
            ConditionStatus::Boundary
        } else {
            ConditionStatus::Unsatisfied
        };
        Self {
            lhs1,
            rhs1,
            lhs2,
            rhs2,
            margin,
            satisfied: status == ConditionStatus::Satisfied,
            status,
        }
    }

    /// Largest difference over the four quantities.
    pub fn max_abs_diff(&self, other: &ConditionReport) -> f64 {
        [
            self.lhs1 - other.lhs1,
            self.rhs1 - other.rhs1,
            self.lhs2 - other.lhs2,
            self.rhs2 - other.rhs2,
        ]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
    }

    fn shifted(&self, c: [f64; 2]) -> Self {
        Self::new(
            self.lhs1 - c[0],
            self.rhs1 - c[0],
            self.lhs2 - c[1],
            self.rhs2 - c[1],
        )
    }
}

/// Full output of [`eval_theorem1_full`].
#[derive(Debug, Clone)]
pub struct Theorem1Eval {
    pub report: ConditionReport,
    /// Both sides minus `I(U~_j; S~_j', U~_j')`; the margins are unchanged.
    pub reduced: ConditionReport,
    pub offsets: [f64; 2],
    pub law: StationaryLaw,
    /// Whether the configuration's own tilde law was used.
    pub used_supplied_tilde: bool,
}

impl Theorem1Eval {
    pub fn residual(&self) -> f64 {
        self.law.residual()
    }

    pub fn method(&self) -> SolveMethod {
        self.law.method()
    }
}

fn rhs_axes(j: Terminal) -> [ZAxis; 7] {
    match j {
        Terminal::One => [
            ZAxis::S2,
            ZAxis::U2,
            ZAxis::TS2,
            ZAxis::TU2,
            ZAxis::TW2,
            ZAxis::X2,
            ZAxis::Y2,
        ],
        Terminal::Two => [
            ZAxis::S1,
            ZAxis::U1,
            ZAxis::TS1,
            ZAxis::TU1,
            ZAxis::TW1,
            ZAxis::X1,
            ZAxis::Y1,
        ],
    }
}

fn ts(j: Terminal) -> ZAxis {
    [ZAxis::TS1, ZAxis::TS2][j.index()]
}

fn tu(j: Terminal) -> ZAxis {
    [ZAxis::TU1, ZAxis::TU2][j.index()]
}

/// Evaluates the conditions under the stationary law of `cfg`.
///
/// The configuration's tilde law is used when it is stationary; otherwise
/// the chain is solved from the uniform start.
pub fn eval_theorem1_full(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<Theorem1Eval> {
    let sys = build_kernel(cfg, ch, src)?;
    let supplied = match cfg.p_tilde() {
        Some(t) => Some(sys.law_from_tilde(t)?).filter(|l| l.is_stationary()),
        None => None,
    };
    let used_supplied_tilde = supplied.is_some();
    let law = match supplied {
        Some(l) => l,
        None => stationary_distribution(&sys)?,
    };
    let (report, reduced, offsets) = theorem1_from_law(&law)?;
    Ok(Theorem1Eval {
        report,
        reduced,
        offsets,
        law,
        used_supplied_tilde,
    })
}

/// Raw report, reduced report and offsets under a given pair law.
pub fn theorem1_from_law(
    law: &StationaryLaw,
) -> Result<(ConditionReport, ConditionReport, [f64; 2])> {
    let mut q = [[0.0; 2]; 2];
    let mut offsets = [0.0; 2];
    for j in Terminal::BOTH {
        let o = j.other();
        q[j.index()][0] = law.mutual_information(&[ts(j)], &[tu(j)])?;
        q[j.index()][1] = law.mutual_information(&[tu(j)], &rhs_axes(j))?;
        offsets[j.index()] = law.mutual_information(&[tu(j)], &[ts(o), tu(o)])?;
    }
    let report = ConditionReport::new(q[0][0], q[0][1], q[1][0], q[1][1]);
    Ok((report, report.shifted(offsets), offsets))
}

/// `lhs_j = I(S~_j; U~_j)`, `rhs_j = I(U~_j; S_j', U_j', S~_j', U~_j', W~_j',
/// X_j', Y_j')` under the stationary law.
pub fn eval_theorem1(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<ConditionReport> {
    Ok(eval_theorem1_full(cfg, ch, src)?.report)
}

/// The same conditions with the common term `I(U~_j; S~_j', U~_j')` removed
/// from both sides.
pub fn theorem1_reduced(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<ConditionReport> {
    Ok(eval_theorem1_full(cfg, ch, src)?.reduced)
}

/// Single-letter hybrid scheme: `X_j = f_j(S_j, U_j)` and
/// `S^_j' = g_j(U_j', S_j, U_j, Y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridScheme {
    dims: Dims,
    pu: [ConditionalPmf; 2],
    f: [Vec<usize>; 2],
    g: [Vec<usize>; 2],
}

impl HybridScheme {
    pub fn new(
        dims: Dims,
        pu: [ConditionalPmf; 2],
        f: [Vec<usize>; 2],
        g: [Vec<usize>; 2],
    ) -> Result<Self> {
        for j in Terminal::BOTH {
            let k = j.index();
            let o = j.other().index();
            if pu[k].given_shape() != [dims.s[k]] || pu[k].out_shape() != [dims.u[k]] {
                return Err(Error::AlphabetMismatch(format!("P(U{}|S{})", k + 1, k + 1)));
            }
            if f[k].len() != dims.s[k] * dims.u[k] || f[k].iter().any(|&x| x >= dims.x[k]) {
                return Err(Error::InvalidTable(format!("f{}", k + 1)));
            }
            let glen = dims.u[o] * dims.s[k] * dims.u[k] * dims.y[k];
            if g[k].len() != glen || g[k].iter().any(|&s| s >= dims.shat[o]) {
                return Err(Error::InvalidTable(format!("g{}", k + 1)));
            }
        }
        Ok(Self { dims, pu, f, g })
    }

    pub fn from_fns(
        dims: Dims,
        pu: [ConditionalPmf; 2],
        f: impl Fn(Terminal, usize, usize) -> usize,
        g: impl Fn(Terminal, usize, usize, usize, usize) -> usize,
    ) -> Result<Self> {
        let ft = Terminal::BOTH.map(|j| {
            let k = j.index();
            (0..dims.s[k] * dims.u[k])
                .map(|i| f(j, i / dims.u[k], i % dims.u[k]))
                .collect()
        });
        let gt = Terminal::BOTH.map(|j| {
            let k = j.index();
            let shape = [dims.u[j.other().index()], dims.s[k], dims.u[k], dims.y[k]];
            let mut c = [0usize; 4];
            (0..shape_len(&shape))
                .map(|i| {
                    crate::prob::unflatten(&shape, i, &mut c);
                    g(j, c[0], c[1], c[2], c[3])
                })
                .collect()
        });
        Self::new(dims, pu, ft, gt)
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn pu(&self, j: Terminal) -> &ConditionalPmf {
        &self.pu[j.index()]
    }

    pub fn f_table(&self, j: Terminal) -> &[usize] {
        &self.f[j.index()]
    }

    pub fn g_table(&self, j: Terminal) -> &[usize] {
        &self.g[j.index()]
    }

    pub fn f(&self, j: Terminal, s: usize, u: usize) -> usize {
        self.f[j.index()][s * self.dims.u[j.index()] + u]
    }

    /// `g_j(u_j', s_j, u_j, y_j)`.
    pub fn g(&self, j: Terminal, u_other: usize, s: usize, u: usize, y: usize) -> usize {
        let k = j.index();
        let d = &self.dims;
        self.g[k][((u_other * d.s[k] + s) * d.u[k] + u) * d.y[k] + y]
    }

    fn check(&self, ch: &TwoWayChannel, src: &JointSource) -> Result<()> {
        for j in Terminal::BOTH {
            let k = j.index();
            if self.dims.x[k] != ch.x_size(j)
                || self.dims.y[k] != ch.y_size(j)
                || self.dims.s[k] != src.size(j)
            {
                return Err(Error::AlphabetMismatch(
                    "hybrid scheme alphabets differ from the channel or source".into(),
                ));
            }
        }
        Ok(())
    }

    /// One-shot law over `(S1, S2, U1, U2, X1, X2, Y1, Y2)`.
    pub fn one_shot_law(&self, ch: &TwoWayChannel, src: &JointSource) -> Result<JointPmf> {
        self.check(ch, src)?;
        let d = &self.dims;
        let shape = [
            d.s[0], d.s[1], d.u[0], d.u[1], d.x[0], d.x[1], d.y[0], d.y[1],
        ];
        let mut probs = vec![0.0; shape_len(&shape)];
        for s1 in 0..d.s[0] {
            for s2 in 0..d.s[1] {
                let ps = src.prob(s1, s2);
                if ps == 0.0 {
                    continue;
                }
                for u1 in 0..d.u[0] {
                    for u2 in 0..d.u[1] {
                        let p = ps * self.pu[0].prob(s1, u1) * self.pu[1].prob(s2, u2);
                        if p == 0.0 {
                            continue;
                        }
                        let x1 = self.f(Terminal::One, s1, u1);
                        let x2 = self.f(Terminal::Two, s2, u2);
                        for (y, &py) in ch.row(x1, x2).iter().enumerate() {
                            if py > 0.0 {
                                let c = [s1, s2, u1, u2, x1, x2, y / d.y[1], y % d.y[1]];
                                probs[flat_index(&shape, &c)] += p * py;
                            }
                        }
                    }
                }
            }
        }
        let labels = ["S1", "S2", "U1", "U2", "X1", "X2", "Y1", "Y2"];
        let axes = shape
            .iter()
            .zip(labels)
            .map(|(&n, l)| Alphabet::new(n, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointPmf::from_parts(axes, probs))
    }
}

/// Report and reconstruction distortions of a hybrid scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridEval {
    pub report: ConditionReport,
    pub distortions: (f64, f64),
}

/// `I(S_j; U_j | S_j', U_j') < I(U_j; Y_j' | S_j', U_j')` under the one-shot
/// law, with distortions of the `g_j` reconstructions.
pub fn eval_hybrid(
    hs: &HybridScheme,
    ch: &TwoWayChannel,
    src: &JointSource,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
) -> Result<HybridEval> {
    let law = hs.one_shot_law(ch, src)?;
    let dims = hs.dims;
    for (j, d) in [(0, d1), (1, d2)] {
        if d.source_size() != dims.s[j] || d.recon_size() != dims.shat[j] {
            return Err(Error::AlphabetMismatch(format!(
                "distortion measure {}",
                j + 1
            )));
        }
    }
    // axes: S1=0 S2=1 U1=2 U2=3 X1=4 X2=5 Y1=6 Y2=7
    let lhs1 = law.conditional_mutual_information(&[0], &[2], &[1, 3])?;
    let rhs1 = law.conditional_mutual_information(&[2], &[7], &[1, 3])?;
    let lhs2 = law.conditional_mutual_information(&[1], &[3], &[0, 2])?;
    let rhs2 = law.conditional_mutual_information(&[3], &[6], &[0, 2])?;
    let shape = law.shape();
    let mut c = [0usize; 8];
    let mut dist = (0.0, 0.0);
    for (i, &p) in law.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        crate::prob::unflatten(&shape, i, &mut c);
        let [s1, s2, u1, u2, _, _, y1, y2] = c;
        dist.0 += p * d1.d(s1, hs.g(Terminal::Two, u1, s2, u2, y2));
        dist.1 += p * d2.d(s2, hs.g(Terminal::One, u2, s1, u1, y1));
    }
    Ok(HybridEval {
        report: ConditionReport::new(lhs1, rhs1, lhs2, rhs2),
        distortions: dist,
    })
}

/// Lifts a hybrid scheme to a configuration: `F_j = f_j(s~_j, u~_j)` and
/// `G_j = g_j(u~_j', s~_j, u~_j, y_j)` with the current output `y_j`, plus
/// the stationary tilde law.
pub fn lift_hybrid(
    hs: &HybridScheme,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<Configuration> {
    hs.check(ch, src)?;
    let cfg = Configuration::from_fns(
        hs.dims,
        hs.pu.clone(),
        None,
        |j, a| hs.f(j, a.ts, a.tu),
        |j, a| hs.g(j, a.tu_other, a.ts, a.tu, a.y),
    )?;
    let tilde = crate::markov::find_stationary_tilde(&cfg, ch, src)?;
    cfg.with_p_tilde(tilde)
}

/// Adaptive channel code: independent codewords `V_j ~ P_{V_j}` and inputs
/// `X_j = gamma_j(V_j, V~_j, W~_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HanScheme {
    v: [usize; 2],
    pv: [Vec<f64>; 2],
    x: [usize; 2],
    y: [usize; 2],
    gamma: [Vec<usize>; 2],
}

impl HanScheme {
    pub fn new(
        pv: [Vec<f64>; 2],
        x: [usize; 2],
        y: [usize; 2],
        gamma: [Vec<usize>; 2],
    ) -> Result<Self> {
        let v = [pv[0].len(), pv[1].len()];
        for k in 0..2 {
            crate::prob::entropy_of_probs(&pv[k])?;
            let len = v[k] * v[k] * x[k] * y[k];
            if v[k] == 0 || gamma[k].len() != len || gamma[k].iter().any(|&s| s >= x[k]) {
                return Err(Error::InvalidTable(format!("gamma{}", k + 1)));
            }
        }
        Ok(Self { v, pv, x, y, gamma })
    }

    /// `gamma(j, v, v~, w~)` evaluated on every argument.
    pub fn from_fn(
        pv: [Vec<f64>; 2],
        x: [usize; 2],
        y: [usize; 2],
        gamma: impl Fn(Terminal, usize, usize, usize) -> usize,
    ) -> Result<Self> {
        let tables = Terminal::BOTH.map(|j| {
            let k = j.index();
            let (v, w) = (pv[k].len(), x[k] * y[k]);
            (0..v * v * w)
                .map(|i| gamma(j, i / (v * w), (i / w) % v, i % w))
                .collect()
        });
        Self::new(pv, x, y, tables)
    }

    pub fn v_size(&self, j: Terminal) -> usize {
        self.v[j.index()]
    }

    pub fn pv(&self, j: Terminal) -> &[f64] {
        &self.pv[j.index()]
    }

    pub fn x_sizes(&self) -> [usize; 2] {
        self.x
    }

    pub fn y_sizes(&self) -> [usize; 2] {
        self.y
    }

    pub fn gamma_table(&self, j: Terminal) -> &[usize] {
        &self.gamma[j.index()]
    }

    pub fn gamma(&self, j: Terminal, v: usize, tv: usize, tw: usize) -> usize {
        let k = j.index();
        let w = self.x[k] * self.y[k];
        self.gamma[k][(v * self.v[k] + tv) * w + tw]
    }

    fn check(&self, ch: &TwoWayChannel) -> Result<()> {
        for j in Terminal::BOTH {
            if self.x[j.index()] != ch.x_size(j) || self.y[j.index()] != ch.y_size(j) {
                return Err(Error::AlphabetMismatch(
                    "Han scheme alphabets differ from the channel".into(),
                ));
            }
        }
        Ok(())
    }

    /// The scheme as a configuration over single-symbol sources with
    /// `U_j = V_j`.
    pub fn as_configuration(&self) -> Result<Configuration> {
        let dims = Dims {
            s: [1, 1],
            u: self.v,
            x: self.x,
            y: self.y,
            shat: [1, 1],
        };
        let pu = [0, 1].map(|k| ConditionalPmf::from_shape(&[1], &[self.v[k]], self.pv[k].clone()));
        let [p1, p2] = pu;
        Configuration::from_fns(
            dims,
            [p1?, p2?],
            None,
            |j, a| self.gamma(j, a.u, a.tu, a.tw),
            |_, _| 0,
        )
    }

    pub fn trivial_source() -> JointSource {
        JointSource::from_table(1, 1, vec![1.0]).expect("point mass")
    }

    /// Stationary law of `(V~1, V~2, W~1, W~2)`.
    pub fn stationary_tilde(&self, ch: &TwoWayChannel) -> Result<JointPmf> {
        self.check(ch)?;
        let t = crate::markov::find_stationary_tilde(
            &self.as_configuration()?,
            ch,
            &Self::trivial_source(),
        )?;
        t.marginal(&[2, 3, 4, 5])
    }
}

/// Wyner-Ziv test channel for source `which` with decoder side information
/// `S_which'`: `T ~ P(T | S_which)` and `S^_which = h(S_which', T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WZScheme {
    pub which: usize,
    pub s_size: usize,
    pub side_size: usize,
    pub t_size: usize,
    pub recon_size: usize,
    /// Row-major `P(t | s)`.
    pub pt_given_s: Vec<f64>,
    /// Row-major over `(s_side, t)`.
    pub h: Vec<usize>,
}

impl WZScheme {
    pub fn new(
        which: Terminal,
        side_size: usize,
        recon_size: usize,
        pt_given_s: ConditionalPmf,
        h: Vec<usize>,
    ) -> Result<Self> {
        let s_size = pt_given_s.rows();
        let t_size = pt_given_s.cols();
        if h.len() != side_size * t_size || h.iter().any(|&v| v >= recon_size) {
            return Err(Error::InvalidTable("WZ decoder".into()));
        }
        Ok(Self {
            which: which.index() + 1,
            s_size,
            side_size,
            t_size,
            recon_size,
            pt_given_s: pt_given_s.table().to_vec(),
            h,
        })
    }

    pub fn terminal(&self) -> Terminal {
        if self.which == 2 {
            Terminal::Two
        } else {
            Terminal::One
        }
    }

    pub fn pt(&self, s: usize, t: usize) -> f64 {
        self.pt_given_s[s * self.t_size + t]
    }

    pub fn h(&self, side: usize, t: usize) -> usize {
        self.h[side * self.t_size + t]
    }

    fn check(&self, src: &JointSource) -> Result<()> {
        let j = self.terminal();
        if self.s_size != src.size(j) || self.side_size != src.size(j.other()) {
            return Err(Error::AlphabetMismatch("WZ scheme and source".into()));
        }
        Ok(())
    }

    /// Joint law over `(S_which, S_which', T)`.
    pub fn joint(&self, src: &JointSource) -> Result<JointPmf> {
        self.check(src)?;
        let j = self.terminal();
        let shape = [self.s_size, self.side_size, self.t_size];
        let mut probs = vec![0.0; shape_len(&shape)];
        for s in 0..self.s_size {
            for side in 0..self.side_size {
                let p = match j {
                    Terminal::One => src.prob(s, side),
                    Terminal::Two => src.prob(side, s),
                };
                for t in 0..self.t_size {
                    probs[(s * self.side_size + side) * self.t_size + t] = p * self.pt(s, t);
                }
            }
        }
        JointPmf::from_shape(&shape, probs)
    }
}

/// `I(S; T) - I(S'; T)` without clipping.
pub fn wz_scheme_objective(src: &JointSource, wz: &WZScheme) -> Result<f64> {
    let p = wz.joint(src)?;
    Ok(p.mutual_information(&[0], &[2])? - p.mutual_information(&[1], &[2])?)
}

/// `max(0, I(S; T) - I(S'; T))`.
pub fn wz_scheme_rate(src: &JointSource, wz: &WZScheme) -> Result<f64> {
    Ok(wz_scheme_objective(src, wz)?.max(0.0))
}

/// `E d(S, h(S', T))`.
pub fn wz_scheme_distortion(
    src: &JointSource,
    wz: &WZScheme,
    d: &DistortionMeasure,
) -> Result<f64> {
    if d.source_size() != wz.s_size || d.recon_size() != wz.recon_size {
        return Err(Error::AlphabetMismatch("WZ distortion measure".into()));
    }
    let p = wz.joint(src)?;
    let mut acc = 0.0;
    for s in 0..wz.s_size {
        for side in 0..wz.side_size {
            for t in 0..wz.t_size {
                acc += p.prob(&[s, side, t]) * d.d(s, wz.h(side, t));
            }
        }
    }
    Ok(acc)
}

/// `lhs_j` = the supplied WZ rate, `rhs_j = I(V~_j; X_j', Y_j', V~_j', W~_j')`
/// under the stationary law of the Han scheme.
pub fn eval_corollary1(
    han: &HanScheme,
    rate1: f64,
    rate2: f64,
    ch: &TwoWayChannel,
) -> Result<ConditionReport> {
    han.check(ch)?;
    let cfg = han.as_configuration()?;
    let sys = build_kernel(&cfg, ch, &HanScheme::trivial_source())?;
    let law = stationary_distribution(&sys)?;
    let rhs1 = law.mutual_information(
        &[ZAxis::TU1],
        &[ZAxis::X2, ZAxis::Y2, ZAxis::TU2, ZAxis::TW2],
    )?;
    let rhs2 = law.mutual_information(
        &[ZAxis::TU2],
        &[ZAxis::X1, ZAxis::Y1, ZAxis::TU1, ZAxis::TW1],
    )?;
    Ok(ConditionReport::new(rate1, rhs1, rate2, rhs2))
}

/// Lifts a Han scheme and two WZ schemes: `U_j = (T_j, V_j)` flattened as
/// `t * |V_j| + v`, `F_j = gamma_j(v, v~, w~)`, `G_j = h_j'(s~_j, t~_j')`.
pub fn lift_sscc(
    han: &HanScheme,
    wz1: &WZScheme,
    wz2: &WZScheme,
    src: &JointSource,
    ch: &TwoWayChannel,
) -> Result<Configuration> {
    han.check(ch)?;
    let wz = [wz1, wz2];
    for j in Terminal::BOTH {
        if wz[j.index()].terminal() != j {
            return Err(Error::InvalidParameter(format!(
                "WZ scheme {} compresses the wrong source",
                j.index() + 1
            )));
        }
        wz[j.index()].check(src)?;
    }
    let v = han.v;
    let t = [wz1.t_size, wz2.t_size];
    let dims = Dims {
        s: [src.size(Terminal::One), src.size(Terminal::Two)],
        u: [t[0] * v[0], t[1] * v[1]],
        x: han.x,
        y: han.y,
        shat: [wz1.recon_size, wz2.recon_size],
    };
    let pu = Terminal::BOTH.map(|j| {
        let k = j.index();
        let mut table = Vec::with_capacity(dims.s[k] * dims.u[k]);
        for s in 0..dims.s[k] {
            for tt in 0..t[k] {
                for &pv in &han.pv[k] {
                    table.push(wz[k].pt(s, tt) * pv);
                }
            }
        }
        ConditionalPmf::from_shape(&[dims.s[k]], &[dims.u[k]], table)
    });
    let [p1, p2] = pu;
    let han_tilde = han.stationary_tilde(ch)?;
    // tilde axes (S~1, S~2, U~1, U~2, W~1, W~2)
    let tshape = dims.tilde_shape();
    let mut probs = vec![0.0; shape_len(&tshape)];
    let w = [dims.w(Terminal::One), dims.w(Terminal::Two)];
    for s1 in 0..dims.s[0] {
        for s2 in 0..dims.s[1] {
            let ps = src.prob(s1, s2);
            if ps == 0.0 {
                continue;
            }
            for t1 in 0..t[0] {
                for t2 in 0..t[1] {
                    let pst = ps * wz1.pt(s1, t1) * wz2.pt(s2, t2);
                    if pst == 0.0 {
                        continue;
                    }
                    for v1 in 0..v[0] {
                        for v2 in 0..v[1] {
                            for w1 in 0..w[0] {
                                for w2 in 0..w[1] {
                                    let ph = han_tilde.prob(&[v1, v2, w1, w2]);
                                    let idx = flat_index(
                                        &tshape,
                                        &[s1, s2, t1 * v[0] + v1, t2 * v[1] + v2, w1, w2],
                                    );
                                    probs[idx] = pst * ph;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let tilde = JointPmf::from_shape(&tshape, probs)?;
    Configuration::from_fns(
        dims,
        [p1?, p2?],
        Some(tilde),
        |j, a| {
            let vk = v[j.index()];
            han.gamma(j, a.u % vk, a.tu % vk, a.tw)
        },
        |j, a| {
            let o = j.other().index();
            wz[o].h(a.ts, a.tu_other / v[o])
        },
    )
}

/// Grid settings for [`shannon_nonadaptive_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Divisions per probability coordinate (levels minus one).
    pub divisions: usize,
    /// Rounds of 10x local refinement around the incumbent.
    pub refine_rounds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            divisions: 20,
            refine_rounds: 2,
        }
    }
}

/// Default time-sharing cardinality.
pub const DEFAULT_Q_SIZE: usize = 4;

/// One time-sharing component of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputComponent {
    pub weight: f64,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub rates: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShannonBound {
    pub symmetric_max: f64,
    pub q_size: usize,
    /// Weighted-sum maximizers, in increasing weight on `R1`.
    pub frontier: Vec<(f64, f64)>,
    pub optimizer: Vec<InputComponent>,
}

/// Single-user conditional channels for the non-adaptive rates.
struct Links {
    /// `w2[x2][x1][y2]`: the link from terminal 1 to terminal 2.
    w2: Vec<Vec<Vec<f64>>>,
    /// `w1[x1][x2][y1]`.
    w1: Vec<Vec<Vec<f64>>>,
}

impl Links {
    fn new(ch: &TwoWayChannel) -> Self {
        let (nx1, nx2) = (ch.x_size(Terminal::One), ch.x_size(Terminal::Two));
        let (ny1, ny2) = (ch.y_size(Terminal::One), ch.y_size(Terminal::Two));
        let mut w2 = vec![vec![vec![0.0; ny2]; nx1]; nx2];
        let mut w1 = vec![vec![vec![0.0; ny1]; nx2]; nx1];
        for x1 in 0..nx1 {
            for x2 in 0..nx2 {
                for (y, &p) in ch.row(x1, x2).iter().enumerate() {
                    w1[x1][x2][y / ny2] += p;
                    w2[x2][x1][y % ny2] += p;
                }
            }
        }
        Self { w2, w1 }
    }

    /// `[I(X1; Y2 | X2 = x2) for x2]` under input `p1`.
    fn a(&self, p1: &[f64]) -> Vec<f64> {
        self.w2.iter().map(|w| channel_mi(p1, w)).collect()
    }

    /// `[I(X2; Y1 | X1 = x1) for x1]` under input `p2`.
    fn b(&self, p2: &[f64]) -> Vec<f64> {
        self.w1.iter().map(|w| channel_mi(p2, w)).collect()
    }
}

fn channel_mi(p: &[f64], w: &[Vec<f64>]) -> f64 {
    let ny = w[0].len();
    let mut q = vec![0.0; ny];
    for (px, row) in p.iter().zip(w) {
        for (qy, &v) in q.iter_mut().zip(row) {
            *qy += px * v;
        }
    }
    let mut mi = 0.0;
    for (px, row) in p.iter().zip(w) {
        if *px <= 0.0 {
            continue;
        }
        for (&v, &qy) in row.iter().zip(&q) {
            if v > 0.0 {
                mi += px * v * (v / qy).log2();
            }
        }
    }
    mi.max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    r1: f64,
    r2: f64,
    i1: usize,
    i2: usize,
}

/// Pareto-maximal candidates sorted by `r1` ascending.
fn pareto(mut c: Vec<Cand>) -> Vec<Cand> {
    c.sort_by(|a, b| {
        b.r1.total_cmp(&a.r1)
            .then(b.r2.total_cmp(&a.r2))
            .then(a.i1.cmp(&b.i1))
            .then(a.i2.cmp(&b.i2))
    });
    let mut out: Vec<Cand> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for x in c {
        if x.r2 > best {
            best = x.r2;
            out.push(x);
        }
    }
    out.reverse();
    out
}

/// Upper concave hull of a Pareto set sorted by `r1` ascending.
fn upper_hull(p: &[Cand]) -> Vec<Cand> {
    let mut h: Vec<Cand> = Vec::new();
    for &c in p {
        while h.len() >= 2 {
            let a = h[h.len() - 2];
            let b = h[h.len() - 1];
            let cross = (b.r1 - a.r1) * (c.r2 - a.r2) - (b.r2 - a.r2) * (c.r1 - a.r1);
            if cross >= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(c);
    }
    h
}

/// Best `min(r1, r2)` on the hull: a vertex or a convex combination of two
/// adjacent vertices.
fn hull_symmetric(h: &[Cand]) -> (f64, Vec<(f64, Cand)>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for &v in h {
        let m = v.r1.min(v.r2);
        if m > best.0 {
            best = (m, vec![(1.0, v)]);
        }
    }
    for w in h.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (da, db) = (a.r1 - a.r2, b.r1 - b.r2);
        if da * db < 0.0 {
            let t = da / (da - db);
            let v = a.r1 + t * (b.r1 - a.r1);
            if v > best.0 {
                best = (v, vec![(1.0 - t, a), (t, b)]);
            }
        }
    }
    best
}

fn perturbations(p: &[f64], step: f64) -> Vec<Vec<f64>> {
    let k = p.len();
    let mut out = vec![p.to_vec()];
    for a in 0..k {
        for b in a + 1..k {
            for m in -10i32..=10 {
                if m == 0 {
                    continue;
                }
                let delta = m as f64 * step;
                let mut q = p.to_vec();
                q[a] += delta;
                q[b] -= delta;
                if q.iter().all(|&v| v >= -1e-12) {
                    q.iter_mut().for_each(|v| *v = v.max(0.0));
                    let s: f64 = q.iter().sum();
                    q.iter_mut().for_each(|v| *v /= s);
                    out.push(q);
                }
            }
        }
    }
    out
}

/// Maximizes `(I(X1; Y2 | X2, Q), I(X2; Y1 | X1, Q))` over independent inputs
/// given a time-sharing variable with at most `q_size` values.
pub fn shannon_nonadaptive_bound(
    ch: &TwoWayChannel,
    q_size: usize,
    grid: GridSpec,
) -> Result<ShannonBound> {
    if q_size == 0 {
        return Err(Error::InvalidParameter("q_size must be at least 1".into()));
    }
    let links = Links::new(ch);
    let mut in1 = simplex_grid(ch.x_size(Terminal::One), grid.divisions);
    let mut in2 = simplex_grid(ch.x_size(Terminal::Two), grid.divisions);
    let mut a: Vec<Vec<f64>> = in1.par_iter().map(|p| links.a(p)).collect();
    let mut b: Vec<Vec<f64>> = in2.par_iter().map(|p| links.b(p)).collect();

    let rows: Vec<Vec<Cand>> = (0..in1.len())
        .into_par_iter()
        .map(|i1| {
            let row = (0..in2.len())
                .map(|i2| Cand {
                    r1: dot(&in2[i2], &a[i1]),
                    r2: dot(&in1[i1], &b[i2]),
                    i1,
                    i2,
                })
                .collect();
            pareto(row)
        })
        .collect();
    let mut front = pareto(rows.into_iter().flatten().collect());

    let mut step = 1.0 / grid.divisions.max(1) as f64;
    for _ in 0..grid.refine_rounds {
        step /= 10.0;
        let (_, comps) = symmetric(&front, q_size);
        let mut extra = Vec::new();
        for (_, c) in comps {
            let l1 = perturbations(&in1[c.i1], step);
            let l2 = perturbations(&in2[c.i2], step);
            let base1 = in1.len();
            let base2 = in2.len();
            a.extend(l1.iter().map(|p| links.a(p)));
            b.extend(l2.iter().map(|p| links.b(p)));
            in1.extend(l1);
            in2.extend(l2);
            for i1 in base1..in1.len() {
                for i2 in base2..in2.len() {
                    extra.push(Cand {
                        r1: dot(&in2[i2], &a[i1]),
                        r2: dot(&in1[i1], &b[i2]),
                        i1,
                        i2,
                    });
                }
            }
        }
        extra.extend(front);
        front = pareto(extra);
    }
    let (symmetric_max, comps) = symmetric(&front, q_size);
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    for k in 0..=20 {
        let lam = k as f64 / 20.0;
        let best = front
            .iter()
            .max_by(|x, y| {
                (lam * x.r1 + (1.0 - lam) * x.r2).total_cmp(&(lam * y.r1 + (1.0 - lam) * y.r2))
            })
            .expect("nonempty grid");
        if frontier.last() != Some(&(best.r1, best.r2)) {
            frontier.push((best.r1, best.r2));
        }
    }
    Ok(ShannonBound {
        symmetric_max,
        q_size,
        frontier,
        optimizer: comps
            .into_iter()
            .map(|(w, c)| InputComponent {
                weight: w,
                p1: in1[c.i1].clone(),
                p2: in2[c.i2].clone(),
                rates: (c.r1, c.r2),
            })
            .collect(),
    })
}

fn symmetric(front: &[Cand], q_size: usize) -> (f64, Vec<(f64, Cand)>) {
    if q_size == 1 {
        let best = front
            .iter()
            .copied()
            .max_by(|x, y| x.r1.min(x.r2).total_cmp(&y.r1.min(y.r2)))
            .expect("nonempty grid");
        (best.r1.min(best.r2), vec![(1.0, best)])
    } else {
        hull_symmetric(&upper_hull(front))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::*;
    use crate::prob::binary_entropy;

    fn binary_dims(u: [usize; 2]) -> Dims {
        Dims::new([2, 2], u, [2, 2], [2, 2])
    }

    fn copy_scheme() -> HybridScheme {
        // U_j = S_j, X_j = U_j, g reads the other codeword
        let pu = Terminal::BOTH.map(|_| ConditionalPmf::deterministic(&[2], &[2], |s| s));
        HybridScheme::from_fns(binary_dims([2, 2]), pu, |_, _, u| u, |_, uo, _, _, _| uo).unwrap()
    }

    #[test]
    fn report_status() {
        let r = ConditionReport::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(r.status, ConditionStatus::Boundary);
        assert!(!r.satisfied);
        let r = ConditionReport::new(0.2, 0.5, 0.1, 0.15);
        assert_eq!(r.status, ConditionStatus::Satisfied);
        assert!((r.margin - 0.05).abs() < 1e-15);
        let r = ConditionReport::new(0.2, 0.1, 0.1, 0.15);
        assert_eq!(r.status, ConditionStatus::Unsatisfied);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"unsatisfied\""));
    }

    #[test]
    fn hybrid_copy_on_bit_pipes_is_boundary() {
        let ch = preset_crossed_bit_pipes();
        let src = preset_independent_bernoulli(0.3, 0.5).unwrap();
        let h = hamming(2);
        let e = eval_hybrid(&copy_scheme(), &ch, &src, &h, &h).unwrap();
        assert!((e.report.lhs1 - binary_entropy(0.3)).abs() < 1e-12);
        assert!((e.report.rhs1 - binary_entropy(0.3)).abs() < 1e-12);
        assert!((e.report.lhs2 - 1.0).abs() < 1e-12);
        assert_eq!(e.report.status, ConditionStatus::Boundary);
        assert_eq!(e.distortions, (0.0, 0.0));
    }

    fn uncoded_scheme() -> HybridScheme {
        let pu = Terminal::BOTH.map(|_| ConditionalPmf::deterministic(&[2], &[1], |_| 0));
        HybridScheme::from_fns(
            binary_dims([1, 1]),
            pu,
            |_, s, _| s,
            |_, _, s, _, y| if s == 1 { y } else { 1 },
        )
        .unwrap()
    }

    #[test]
    fn uncoded_example2_hybrid() {
        let ch = preset_bmc();
        let src = preset_example2_source();
        let h = hamming(2);
        let e = eval_hybrid(&uncoded_scheme(), &ch, &src, &h, &h).unwrap();
        assert_eq!(
            [e.report.lhs1, e.report.rhs1, e.report.lhs2, e.report.rhs2],
            [0.0; 4]
        );
        assert_eq!(e.distortions, (0.0, 0.0));
        assert_eq!(e.report.status, ConditionStatus::Boundary);
    }

    #[test]
    fn lifted_hybrid_matches_one_shot() {
        let ch = preset_bmc();
        let src = preset_example2_source();
        let pu = [
            ConditionalPmf::from_shape(&[2], &[2], vec![0.9, 0.1, 0.35, 0.65]).unwrap(),
            ConditionalPmf::from_shape(&[2], &[2], vec![0.2, 0.8, 0.6, 0.4]).unwrap(),
        ];
        let hs = HybridScheme::from_fns(
            binary_dims([2, 2]),
            pu,
            |j, s, u| if j == Terminal::One { s | u } else { s ^ u },
            |_, uo, s, u, y| (uo + s * u + y) % 2,
        )
        .unwrap();
        let h = hamming(2);
        let one = eval_hybrid(&hs, &ch, &src, &h, &h).unwrap();
        let cfg = lift_hybrid(&hs, &ch, &src).unwrap();
        let t1 = eval_theorem1_full(&cfg, &ch, &src).unwrap();
        assert!(t1.used_supplied_tilde);
        assert!(t1.reduced.max_abs_diff(&one.report) < 1e-9);
        assert!((t1.report.margin - one.report.margin).abs() < 1e-9);
        let d = crate::markov::reconstruction_distortions(&t1.law, &cfg, &h, &h).unwrap();
        assert!((d.0 - one.distortions.0).abs() < 1e-9);
        assert!((d.1 - one.distortions.1).abs() < 1e-9);
    }

    #[test]
    fn constant_u_theorem1_is_degenerate() {
        let ch = preset_bmc();
        let src = preset_example2_source();
        let cfg = lift_hybrid(&uncoded_scheme(), &ch, &src).unwrap();
        let r = eval_theorem1(&cfg, &ch, &src).unwrap();
        assert_eq!([r.lhs1, r.rhs1, r.lhs2, r.rhs2], [0.0; 4]);
        assert!(!r.satisfied);
    }

    #[test]
    fn copies_on_bit_pipes_theorem1() {
        // U_j = S_j uniform, X_j = U~_j: the previous codeword is sent
        let ch = preset_crossed_bit_pipes();
        let src = preset_independent_bernoulli(0.5, 0.5).unwrap();
        let cfg = lift_hybrid(&copy_scheme(), &ch, &src).unwrap();
        let r = eval_theorem1(&cfg, &ch, &src).unwrap();
        assert!((r.lhs1 - 1.0).abs() < 1e-12);
        assert!((r.rhs1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_monotone_in_conditioning_set() {
        let ch = preset_dueck();
        let src = preset_example2_source();
        let pu = Terminal::BOTH
            .map(|_| ConditionalPmf::from_shape(&[2], &[2], vec![0.7, 0.3, 0.4, 0.6]).unwrap());
        let dims = Dims::for_channel(&src, &ch, [2, 2]);
        let cfg = Configuration::from_fns(
            dims,
            pu,
            None,
            |j, a| (2 * a.tu + (dims.split_w(j, a.tw).1 & 1)) % 4,
            |_, _| 0,
        )
        .unwrap();
        let t = eval_theorem1_full(&cfg, &ch, &src).unwrap();
        let axes = rhs_axes(Terminal::One);
        let mut prev = 0.0;
        for k in 1..=axes.len() {
            let v = t.law.mutual_information(&[ZAxis::TU1], &axes[..k]).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        assert!((prev - t.report.rhs1).abs() < 1e-12);
    }

    fn bit_pipe_han() -> HanScheme {
        // V_j = X_j uniform, memoryless
        HanScheme::from_fn(
            [vec![0.5, 0.5], vec![0.5, 0.5]],
            [2, 2],
            [2, 2],
            |_, v, _, _| v,
        )
        .unwrap()
    }

    #[test]
    fn memoryless_han_on_bit_pipes() {
        let ch = preset_crossed_bit_pipes();
        let r = eval_corollary1(&bit_pipe_han(), 0.0, 0.0, &ch).unwrap();
        assert_eq!(r.lhs1, 0.0);
        // V~1 is the previous input, stored in W~2 as the previous output
        assert!((r.rhs1 - 1.0).abs() < 1e-12);
        assert!((r.rhs2 - 1.0).abs() < 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn example2_wz_rate_against_bmc_bound() {
        let ch = preset_bmc();
        let han = HanScheme::from_fn(
            [vec![0.3, 0.7], vec![0.3, 0.7]],
            [2, 2],
            [2, 2],
            |_, v, _, _| v,
        )
        .unwrap();
        let r = eval_corollary1(&han, 2.0 / 3.0, 2.0 / 3.0, &ch).unwrap();
        assert!(r.rhs1 <= 0.646);
        assert!(!r.satisfied);
    }

    fn lossless_wz(which: Terminal) -> WZScheme {
        let pt = ConditionalPmf::deterministic(&[2], &[2], |s| s);
        WZScheme::new(which, 2, 2, pt, vec![0, 1, 0, 1]).unwrap()
    }

    #[test]
    fn sscc_lift_matches_separation_conditions() {
        let ch = preset_crossed_bit_pipes();
        let src = preset_independent_bernoulli(0.2, 0.4).unwrap();
        let han = bit_pipe_han();
        let (w1, w2) = (lossless_wz(Terminal::One), lossless_wz(Terminal::Two));
        let (r1, r2) = (
            wz_scheme_rate(&src, &w1).unwrap(),
            wz_scheme_rate(&src, &w2).unwrap(),
        );
        assert!((r1 - binary_entropy(0.2)).abs() < 1e-12);
        let cor = eval_corollary1(&han, r1, r2, &ch).unwrap();
        let cfg = lift_sscc(&han, &w1, &w2, &src, &ch).unwrap();
        let t = eval_theorem1_full(&cfg, &ch, &src).unwrap();
        assert!(t.used_supplied_tilde, "residual {}", t.residual());
        assert!(
            t.reduced.max_abs_diff(&cor) < 1e-9,
            "{:?} vs {:?}",
            t.reduced,
            cor
        );
        let h = hamming(2);
        let d = crate::markov::reconstruction_distortions(&t.law, &cfg, &h, &h).unwrap();
        assert!(d.0.abs() < 1e-12 && d.1.abs() < 1e-12);
    }

    #[test]
    fn bmc_symmetric_max() {
        // oracle: max_a a h(a) on a fine grid
        let oracle = (0..=100_000)
            .map(|i| {
                let a = i as f64 / 100_000.0;
                a * binary_entropy(a)
            })
            .fold(0.0, f64::max);
        assert!((oracle - 0.6170).abs() < 1e-3);
        let b = shannon_nonadaptive_bound(&preset_bmc(), 1, GridSpec::default()).unwrap();
        assert!(
            (b.symmetric_max - oracle).abs() < 1e-6,
            "{}",
            b.symmetric_max
        );
        let b4 = shannon_nonadaptive_bound(&preset_bmc(), 4, GridSpec::default()).unwrap();
        assert!(b4.symmetric_max >= b.symmetric_max - 1e-12);
        assert!(b4.symmetric_max < 0.646);
    }

    #[test]
    fn bit_pipe_symmetric_max_is_one() {
        let b =
            shannon_nonadaptive_bound(&preset_crossed_bit_pipes(), 1, GridSpec::default()).unwrap();
        assert!((b.symmetric_max - 1.0).abs() < 1e-12);
        assert_eq!(b.frontier, vec![(1.0, 1.0)]);
    }

    #[test]
    fn time_sharing_reaches_the_chord() {
        // R1 = 1 - R2 trade-off is convexified to the diagonal point (0.5, 0.5)
        let pts: Vec<Cand> = [(0.0, 1.0), (0.2, 0.1), (1.0, 0.0)]
            .iter()
            .map(|&(r1, r2)| Cand {
                r1,
                r2,
                i1: 0,
                i2: 0,
            })
            .collect();
        let (v, comps) = hull_symmetric(&upper_hull(&pareto(pts)));
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(comps.len(), 2);
    }
}
