//! Configurations and the auxiliary two-way coded channel.
//!
//! A [`Configuration`] holds the auxiliary conditionals `P(U_j | S_j)`, the
//! tilde-block law over `(S~1, S~2, U~1, U~2, W~1, W~2)`, the encoders `F_j`
//! and the reconstruction maps `G_j`. A `W~_j` symbol stores a past
//! input/output pair `(x, y)` as `x * |Y_j| + y`.
//!
//! Table layouts (row-major, last argument fastest):
//!
//! * `F_j[s, u, s~, u~, w~]` in `X_j`, shape `(|S_j|, |U_j|, |S_j|, |U_j|, |W_j|)`
//! * `G_j[u~', s, u, s~, u~, w~, y]` in `S^_j'`, shape
//!   `(|U_j'|, |S_j|, |U_j|, |S_j|, |U_j|, |W_j|, |Y_j|)`

use crate::error::{Error, Result};
use crate::models::{JointSource, Terminal, TwoWayChannel};
use crate::prob::{flat_index, shape_len, Alphabet, ConditionalPmf, JointPmf};

/// Largest coded-channel table that [`coded_channel_law`] will materialize.
pub const CODED_TABLE_CAP: usize = 1 << 24;

/// Alphabet sizes of a configuration, indexed by terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub s: [usize; 2],
    pub u: [usize; 2],
    pub x: [usize; 2],
    pub y: [usize; 2],
    /// Reconstruction alphabet of `S_j`, i.e. the output of `G_j'`.
    pub shat: [usize; 2],
}

impl Dims {
    /// Square reconstruction alphabets (`S^_j = S_j`).
    pub fn new(s: [usize; 2], u: [usize; 2], x: [usize; 2], y: [usize; 2]) -> Self {
        Self {
            s,
            u,
            x,
            y,
            shat: s,
        }
    }

    pub fn for_channel(src: &JointSource, ch: &TwoWayChannel, u: [usize; 2]) -> Self {
        let t = Terminal::BOTH;
        Self::new(
            t.map(|j| src.size(j)),
            u,
            t.map(|j| ch.x_size(j)),
            t.map(|j| ch.y_size(j)),
        )
    }

    pub fn w(&self, j: Terminal) -> usize {
        self.x[j.index()] * self.y[j.index()]
    }

    pub fn split_w(&self, j: Terminal, w: usize) -> (usize, usize) {
        let y = self.y[j.index()];
        (w / y, w % y)
    }

    pub fn join_w(&self, j: Terminal, x: usize, y: usize) -> usize {
        x * self.y[j.index()] + y
    }

    pub fn f_shape(&self, j: Terminal) -> [usize; 5] {
        let k = j.index();
        [self.s[k], self.u[k], self.s[k], self.u[k], self.w(j)]
    }

    pub fn g_shape(&self, j: Terminal) -> [usize; 7] {
        let k = j.index();
        let o = j.other().index();
        [
            self.u[o],
            self.s[k],
            self.u[k],
            self.s[k],
            self.u[k],
            self.w(j),
            self.y[k],
        ]
    }

    /// Shape of the tilde block `(S~1, S~2, U~1, U~2, W~1, W~2)`.
    pub fn tilde_shape(&self) -> [usize; 6] {
        [
            self.s[0],
            self.s[1],
            self.u[0],
            self.u[1],
            self.w(Terminal::One),
            self.w(Terminal::Two),
        ]
    }

    fn check(&self) -> Result<()> {
        let all = [self.s, self.u, self.x, self.y, self.shat];
        if all.iter().flatten().any(|&v| v == 0) {
            return Err(Error::InvalidParameter(
                "alphabet sizes must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Arguments of an encoder `F_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FArgs {
    pub s: usize,
    pub u: usize,
    pub ts: usize,
    pub tu: usize,
    pub tw: usize,
}

/// Arguments of a reconstruction map `G_j`; `tu_other` is the decoded
/// `U~_j'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GArgs {
    pub tu_other: usize,
    pub s: usize,
    pub u: usize,
    pub ts: usize,
    pub tu: usize,
    pub tw: usize,
    pub y: usize,
}

/// Parameters of the coded channel and its system Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dims: Dims,
    pu_given_s: [ConditionalPmf; 2],
    p_tilde: Option<JointPmf>,
    f: [Vec<usize>; 2],
    g: [Vec<usize>; 2],
}

impl Configuration {
    pub fn new(
        dims: Dims,
        pu_given_s: [ConditionalPmf; 2],
        p_tilde: Option<JointPmf>,
        f: [Vec<usize>; 2],
        g: [Vec<usize>; 2],
    ) -> Result<Self> {
        dims.check()?;
        for j in Terminal::BOTH {
            let k = j.index();
            let c = &pu_given_s[k];
            if c.given_shape() != [dims.s[k]] || c.out_shape() != [dims.u[k]] {
                return Err(Error::AlphabetMismatch(format!(
                    "P(U{}|S{}) must be {}x{}",
                    k + 1,
                    k + 1,
                    dims.s[k],
                    dims.u[k]
                )));
            }
            check_table(
                &f[k],
                shape_len(&dims.f_shape(j)),
                dims.x[k],
                &format!("F{}", k + 1),
            )?;
            check_table(
                &g[k],
                shape_len(&dims.g_shape(j)),
                dims.shat[j.other().index()],
                &format!("G{}", k + 1),
            )?;
        }
        if let Some(p) = &p_tilde {
            if p.shape() != dims.tilde_shape() {
                return Err(Error::AlphabetMismatch(format!(
                    "tilde law shape {:?}, expected {:?}",
                    p.shape(),
                    dims.tilde_shape()
                )));
            }
        }
        Ok(Self {
            dims,
            pu_given_s,
            p_tilde,
            f,
            g,
        })
    }

    /// Builds the lookup tables by evaluating closures on every argument.
    pub fn from_fns(
        dims: Dims,
        pu_given_s: [ConditionalPmf; 2],
        p_tilde: Option<JointPmf>,
        f: impl Fn(Terminal, FArgs) -> usize,
        g: impl Fn(Terminal, GArgs) -> usize,
    ) -> Result<Self> {
        let mut coords = [0usize; 7];
        let f_tables = Terminal::BOTH.map(|j| {
            let shape = dims.f_shape(j);
            (0..shape_len(&shape))
                .map(|i| {
                    crate::prob::unflatten(&shape, i, &mut coords[..5]);
                    f(
                        j,
                        FArgs {
                            s: coords[0],
                            u: coords[1],
                            ts: coords[2],
                            tu: coords[3],
                            tw: coords[4],
                        },
                    )
                })
                .collect::<Vec<_>>()
        });
        let g_tables = Terminal::BOTH.map(|j| {
            let shape = dims.g_shape(j);
            (0..shape_len(&shape))
                .map(|i| {
                    crate::prob::unflatten(&shape, i, &mut coords);
                    g(
                        j,
                        GArgs {
                            tu_other: coords[0],
                            s: coords[1],
                            u: coords[2],
                            ts: coords[3],
                            tu: coords[4],
                            tw: coords[5],
                            y: coords[6],
                        },
                    )
                })
                .collect::<Vec<_>>()
        });
        Self::new(dims, pu_given_s, p_tilde, f_tables, g_tables)
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn pu_given_s(&self, j: Terminal) -> &ConditionalPmf {
        &self.pu_given_s[j.index()]
    }

    pub fn p_tilde(&self) -> Option<&JointPmf> {
        self.p_tilde.as_ref()
    }

    pub fn f_table(&self, j: Terminal) -> &[usize] {
        &self.f[j.index()]
    }

    pub fn g_table(&self, j: Terminal) -> &[usize] {
        &self.g[j.index()]
    }

    pub fn with_p_tilde(mut self, p: JointPmf) -> Result<Self> {
        if p.shape() != self.dims.tilde_shape() {
            return Err(Error::AlphabetMismatch("tilde law shape".into()));
        }
        self.p_tilde = Some(p);
        Ok(self)
    }

    pub fn with_g(mut self, g: [Vec<usize>; 2]) -> Result<Self> {
        for j in Terminal::BOTH {
            check_table(
                &g[j.index()],
                shape_len(&self.dims.g_shape(j)),
                self.dims.shat[j.other().index()],
                "G",
            )?;
        }
        self.g = g;
        Ok(self)
    }

    /// `F_j(s, u, s~, u~, w~)`.
    #[inline]
    pub fn f(&self, j: Terminal, a: FArgs) -> usize {
        let sh = self.dims.f_shape(j);
        let idx = (((a.s * sh[1] + a.u) * sh[2] + a.ts) * sh[3] + a.tu) * sh[4] + a.tw;
        self.f[j.index()][idx]
    }

    /// `G_j(u~', s, u, s~, u~, w~, y)`.
    #[inline]
    pub fn g(&self, j: Terminal, a: GArgs) -> usize {
        self.g[j.index()][self.g_index(j, a)]
    }

    #[inline]
    pub fn g_index(&self, j: Terminal, a: GArgs) -> usize {
        let sh = self.dims.g_shape(j);
        (((((a.tu_other * sh[1] + a.s) * sh[2] + a.u) * sh[3] + a.ts) * sh[4] + a.tu) * sh[5]
            + a.tw)
            * sh[6]
            + a.y
    }

    /// Marginal law of `U_j`.
    pub fn pu(&self, j: Terminal, src: &JointSource) -> Vec<f64> {
        let ps = src.marginal(j);
        let c = self.pu_given_s(j);
        let mut pu = vec![0.0; self.dims.u[j.index()]];
        for (s, &p) in ps.probs().iter().enumerate() {
            for (u, q) in c.row(s).iter().enumerate() {
                pu[u] += p * q;
            }
        }
        pu
    }

    /// Checks that the alphabets agree with the channel and the source.
    pub fn check_consistent(&self, ch: &TwoWayChannel, src: &JointSource) -> Result<()> {
        for j in Terminal::BOTH {
            let k = j.index();
            if self.dims.x[k] != ch.x_size(j) || self.dims.y[k] != ch.y_size(j) {
                return Err(Error::AlphabetMismatch(format!(
                    "configuration X{n}/Y{n} sizes differ from the channel",
                    n = k + 1
                )));
            }
            if self.dims.s[k] != src.size(j) {
                return Err(Error::AlphabetMismatch(format!(
                    "configuration S{} size differs from the source",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Renders the configuration with a fresh source alphabet check only.
    pub(crate) fn check_source(&self, src: &JointSource) -> Result<()> {
        for j in Terminal::BOTH {
            if self.dims.s[j.index()] != src.size(j) {
                return Err(Error::AlphabetMismatch("source alphabet".into()));
            }
        }
        Ok(())
    }
}

fn check_table(table: &[usize], len: usize, range: usize, name: &str) -> Result<()> {
    if table.len() != len {
        return Err(Error::InvalidTable(format!(
            "{name} needs {len} entries, got {}",
            table.len()
        )));
    }
    if let Some(bad) = table.iter().find(|&&v| v >= range) {
        return Err(Error::InvalidTable(format!(
            "{name} entry {bad} outside an alphabet of size {range}"
        )));
    }
    Ok(())
}

/// Shape of the ten coded-channel inputs
/// `(S1, S2, U1, U2, S~1, S~2, U~1, U~2, W~1, W~2)`.
pub fn coded_input_shape(dims: &Dims) -> [usize; 10] {
    let t = dims.tilde_shape();
    [
        dims.s[0], dims.s[1], dims.u[0], dims.u[1], t[0], t[1], t[2], t[3], t[4], t[5],
    ]
}

/// Channel inputs for one ten-tuple of coded-channel inputs.
pub fn channel_inputs(cfg: &Configuration, inputs: &[usize; 10]) -> (usize, usize) {
    let [s1, s2, u1, u2, ts1, ts2, tu1, tu2, tw1, tw2] = *inputs;
    let x1 = cfg.f(
        Terminal::One,
        FArgs {
            s: s1,
            u: u1,
            ts: ts1,
            tu: tu1,
            tw: tw1,
        },
    );
    let x2 = cfg.f(
        Terminal::Two,
        FArgs {
            s: s2,
            u: u2,
            ts: ts2,
            tu: tu2,
            tw: tw2,
        },
    );
    (x1, x2)
}

/// One row of the coded-channel law, over `y1 * |Y2| + y2`.
pub fn coded_channel_row<'a>(
    cfg: &Configuration,
    ch: &'a TwoWayChannel,
    inputs: &[usize; 10],
) -> &'a [f64] {
    let (x1, x2) = channel_inputs(cfg, inputs);
    ch.row(x1, x2)
}

fn check_channel(cfg: &Configuration, ch: &TwoWayChannel) -> Result<()> {
    for j in Terminal::BOTH {
        let k = j.index();
        if cfg.dims.x[k] != ch.x_size(j) || cfg.dims.y[k] != ch.y_size(j) {
            return Err(Error::AlphabetMismatch(
                "configuration and channel alphabets differ".into(),
            ));
        }
    }
    Ok(())
}

/// Materializes `P(y1, y2 | s1, s2, u1, u2, s~1, s~2, u~1, u~2, w~1, w~2)`.
pub fn coded_channel_law(cfg: &Configuration, ch: &TwoWayChannel) -> Result<ConditionalPmf> {
    check_channel(cfg, ch)?;
    let shape = coded_input_shape(&cfg.dims);
    let rows = shape_len(&shape);
    let cols = cfg.dims.y[0] * cfg.dims.y[1];
    if rows * cols > CODED_TABLE_CAP {
        return Err(Error::StateSpaceTooLarge {
            states: rows * cols,
            cap: CODED_TABLE_CAP,
        });
    }
    let mut table = Vec::with_capacity(rows * cols);
    let mut coords = [0usize; 10];
    for r in 0..rows {
        crate::prob::unflatten(&shape, r, &mut coords);
        table.extend_from_slice(coded_channel_row(cfg, ch, &coords));
    }
    let labels = [
        "S1", "S2", "U1", "U2", "S~1", "S~2", "U~1", "U~2", "W~1", "W~2",
    ];
    let given = shape
        .iter()
        .zip(labels)
        .map(|(&n, l)| Alphabet::new(n, l))
        .collect::<Result<Vec<_>>>()?;
    ConditionalPmf::new(
        given,
        vec![
            Alphabet::new(cfg.dims.y[0], "Y1")?,
            Alphabet::new(cfg.dims.y[1], "Y2")?,
        ],
        table,
    )
}

/// Law of the ten coded-channel inputs:
/// `P(s1, s2) P(u1|s1) P(u2|s2) P~(s~, u~, w~)`.
pub fn input_law(cfg: &Configuration, src: &JointSource) -> Result<JointPmf> {
    cfg.check_source(src)?;
    let tilde = cfg.p_tilde().ok_or(Error::MissingTilde)?;
    fresh_law(cfg, src)?
        .product(tilde)
        .marginal(&(0..10).collect::<Vec<_>>())
}

/// `P(s1, s2) P(u1|s1) P(u2|s2)` over `(S1, S2, U1, U2)`.
pub fn fresh_law(cfg: &Configuration, src: &JointSource) -> Result<JointPmf> {
    cfg.check_source(src)?;
    let d = &cfg.dims;
    let shape = [d.s[0], d.s[1], d.u[0], d.u[1]];
    let mut probs = vec![0.0; shape_len(&shape)];
    for s1 in 0..d.s[0] {
        for s2 in 0..d.s[1] {
            let ps = src.prob(s1, s2);
            if ps == 0.0 {
                continue;
            }
            for u1 in 0..d.u[0] {
                let p1 = cfg.pu_given_s(Terminal::One).prob(s1, u1);
                for u2 in 0..d.u[1] {
                    let p2 = cfg.pu_given_s(Terminal::Two).prob(s2, u2);
                    probs[flat_index(&shape, &[s1, s2, u1, u2])] = ps * p1 * p2;
                }
            }
        }
    }
    let labels = ["S1", "S2", "U1", "U2"];
    let axes = shape
        .iter()
        .zip(labels)
        .map(|(&n, l)| Alphabet::new(n, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointPmf::from_parts(axes, probs))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::models::{preset_bmc, preset_example2_source};

    /// `F_j` outputs the fresh source symbol, `G_j` is constant.
    pub(crate) fn identity_config(src: &JointSource, ch: &TwoWayChannel) -> Configuration {
        let dims = Dims::for_channel(src, ch, [1, 1]);
        let pu = Terminal::BOTH
            .map(|j| ConditionalPmf::deterministic(&[dims.s[j.index()]], &[1], |_| 0));
        Configuration::from_fns(
            dims,
            pu,
            Some(JointPmf::uniform(&dims.tilde_shape())),
            |_, a| a.s,
            |_, _| 0,
        )
        .unwrap()
    }

    #[test]
    fn identity_config_on_bmc() {
        let src = preset_example2_source();
        let ch = preset_bmc();
        let cfg = identity_config(&src, &ch);
        let law = coded_channel_law(&cfg, &ch).unwrap();
        let shape = coded_input_shape(cfg.dims());
        let mut coords = [0usize; 10];
        for r in 0..law.rows() {
            crate::prob::unflatten(&shape, r, &mut coords);
            let row = law.row(r);
            // deterministic channel: point mass everywhere
            assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
            if coords[0] == 1 && coords[1] == 1 {
                assert_eq!(row[3], 1.0);
            }
        }
        assert!(law.max_row_deviation() < 1e-15);
    }

    #[test]
    fn law_ignores_unused_inputs() {
        let src = preset_example2_source();
        let ch = crate::models::preset_dueck();
        let dims = Dims::for_channel(&src, &ch, [2, 2]);
        let pu = Terminal::BOTH
            .map(|_| ConditionalPmf::from_shape(&[2], &[2], vec![0.7, 0.3, 0.1, 0.9]).unwrap());
        // F ignores U~ and S entirely
        let cfg =
            Configuration::from_fns(dims, pu, None, |_, a| (a.u * 2 + a.ts) % 4, |_, _| 0).unwrap();
        let mut a = [1, 0, 1, 1, 0, 1, 0, 0, 3, 7];
        let base = coded_channel_row(&cfg, &ch, &a).to_vec();
        for (k, v) in [(0usize, 0usize), (1, 1), (6, 1), (7, 1)] {
            a[k] = v;
            assert_eq!(coded_channel_row(&cfg, &ch, &a), base.as_slice());
        }
    }

    #[test]
    fn mismatched_alphabets_rejected() {
        let src = preset_example2_source();
        let ch = crate::models::preset_dueck();
        let cfg = identity_config(&src, &preset_bmc());
        assert!(coded_channel_law(&cfg, &ch).is_err());
        assert!(cfg.check_consistent(&ch, &src).is_err());
        // out-of-range F entry
        let dims = Dims::for_channel(&src, &preset_bmc(), [1, 1]);
        let pu = Terminal::BOTH.map(|_| ConditionalPmf::deterministic(&[2], &[1], |_| 0));
        assert!(Configuration::from_fns(dims, pu, None, |_, _| 2, |_, _| 0).is_err());
    }

    #[test]
    fn input_law_structure() {
        let src = preset_example2_source();
        let ch = preset_bmc();
        let dims = Dims::for_channel(&src, &ch, [2, 2]);
        let pu = [
            ConditionalPmf::from_shape(&[2], &[2], vec![0.6, 0.4, 0.25, 0.75]).unwrap(),
            ConditionalPmf::from_shape(&[2], &[2], vec![0.1, 0.9, 0.5, 0.5]).unwrap(),
        ];
        let n = shape_len(&dims.tilde_shape());
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let total: f64 = raw.iter().sum();
        let tilde =
            JointPmf::from_shape(&dims.tilde_shape(), raw.iter().map(|v| v / total).collect())
                .unwrap();
        let cfg = Configuration::from_fns(dims, pu, Some(tilde), |_, a| a.s, |_, _| 0).unwrap();
        let law = input_law(&cfg, &src).unwrap();
        assert!(
            law.mutual_information(&[0, 1, 2, 3], &[4, 5, 6, 7, 8, 9])
                .unwrap()
                .abs()
                < 1e-12
        );
        assert!(
            law.marginal(&[0, 1])
                .unwrap()
                .max_abs_diff(src.law())
                .unwrap()
                < 1e-15
        );
        // U1 independent of (S2, U2) given S1, and symmetrically
        assert!(
            law.conditional_mutual_information(&[2], &[1, 3], &[0])
                .unwrap()
                < 1e-10
        );
        assert!(
            law.conditional_mutual_information(&[3], &[0, 2], &[1])
                .unwrap()
                < 1e-10
        );
        // P(u1, u2 | s1, s2) factorizes
        let m = law.marginal(&[0, 1, 2, 3]).unwrap();
        for (s1, s2, u1, u2) in [(0, 1, 1, 0), (1, 1, 0, 1), (1, 0, 1, 1)] {
            let cond = m.prob(&[s1, s2, u1, u2]) / src.prob(s1, s2);
            let fact = cfg.pu_given_s(Terminal::One).prob(s1, u1)
                * cfg.pu_given_s(Terminal::Two).prob(s2, u2);
            assert!((cond - fact).abs() < 1e-12);
        }
    }

    #[test]
    fn composing_laws_reproduces_channel() {
        let src = preset_example2_source();
        let ch = crate::models::preset_crossed_bit_pipes();
        let noisy = TwoWayChannel::from_fn([2, 2, 2, 2], |a, b| {
            vec![(b, a, 0.7), (1 - b, a, 0.2), (b, 1 - a, 0.1)]
        })
        .unwrap();
        for ch in [ch, noisy] {
            let dims = Dims::for_channel(&src, &ch, [2, 2]);
            let pu = Terminal::BOTH
                .map(|_| ConditionalPmf::from_shape(&[2], &[2], vec![0.3, 0.7, 0.8, 0.2]).unwrap());
            let cfg = Configuration::from_fns(
                dims,
                pu,
                Some(JointPmf::uniform(&dims.tilde_shape())),
                |_, a| (a.s + a.u + a.tw) % 2,
                |_, _| 0,
            )
            .unwrap();
            let inputs = input_law(&cfg, &src).unwrap();
            let law = coded_channel_law(&cfg, &ch).unwrap();
            // accumulate P(x1, x2, y1, y2)
            let mut pxy = [0.0; 16];
            let mut px = [0.0; 4];
            let shape = coded_input_shape(cfg.dims());
            let mut c = [0usize; 10];
            for (r, &p) in inputs.probs().iter().enumerate() {
                crate::prob::unflatten(&shape, r, &mut c);
                let (x1, x2) = channel_inputs(&cfg, &c);
                px[x1 * 2 + x2] += p;
                for (y, &q) in law.row(r).iter().enumerate() {
                    pxy[(x1 * 2 + x2) * 4 + y] += p * q;
                }
            }
            for x in 0..4 {
                if px[x] > 0.0 {
                    for y in 0..4 {
                        let cond = pxy[x * 4 + y] / px[x];
                        assert!((cond - ch.law().prob(x, y)).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
