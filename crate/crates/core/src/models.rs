//! Channels, sources and distortion measures, plus the preset examples.
//!
//! Product alphabets are flattened row-major: a pair `(b1, b2)` of bits maps
//! to `2*b1 + b2`, a triple `(c1, c2, c3)` to `4*c1 + 2*c2 + c3`.

use crate::error::{Error, Result};
use crate::prob::{Alphabet, ConditionalPmf, JointPmf};

/// One of the two terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    One,
    Two,
}

impl Terminal {
    pub const BOTH: [Terminal; 2] = [Terminal::One, Terminal::Two];

    pub fn other(self) -> Terminal {
        match self {
            Terminal::One => Terminal::Two,
            Terminal::Two => Terminal::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Terminal::One => 0,
            Terminal::Two => 1,
        }
    }

    pub fn from_number(n: usize) -> Result<Terminal> {
        match n {
            1 => Ok(Terminal::One),
            2 => Ok(Terminal::Two),
            _ => Err(Error::InvalidParameter(format!(
                "terminal must be 1 or 2, got {n}"
            ))),
        }
    }
}

/// A discrete memoryless two-way channel `P(y1, y2 | x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoWayChannel {
    law: ConditionalPmf,
}

impl TwoWayChannel {
    /// `law` must have given axes `(x1, x2)` and out axes `(y1, y2)`.
    pub fn new(law: ConditionalPmf) -> Result<Self> {
        if law.given_axes().len() != 2 || law.out_axes().len() != 2 {
            return Err(Error::Shape(
                "channel law needs given axes (x1, x2) and out axes (y1, y2)".into(),
            ));
        }
        Ok(Self { law })
    }

    /// Builds a channel from a per-input-pair function returning
    /// `(y1, y2, prob)` outcomes; probabilities of repeated outcomes add.
    pub fn from_fn(
        sizes: [usize; 4],
        outcomes: impl Fn(usize, usize) -> Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let [x1, x2, y1, y2] = sizes;
        let mut table = vec![0.0; x1 * x2 * y1 * y2];
        for a in 0..x1 {
            for b in 0..x2 {
                let row = (a * x2 + b) * y1 * y2;
                for (c, d, p) in outcomes(a, b) {
                    if c >= y1 || d >= y2 {
                        return Err(Error::InvalidTable("channel output out of range".into()));
                    }
                    table[row + c * y2 + d] += p;
                }
            }
        }
        Self::new(ConditionalPmf::new(
            vec![Alphabet::new(x1, "X1")?, Alphabet::new(x2, "X2")?],
            vec![Alphabet::new(y1, "Y1")?, Alphabet::new(y2, "Y2")?],
            table,
        )?)
    }

    pub fn law(&self) -> &ConditionalPmf {
        &self.law
    }

    pub fn x_size(&self, j: Terminal) -> usize {
        self.law.given_axes()[j.index()].size()
    }

    pub fn y_size(&self, j: Terminal) -> usize {
        self.law.out_axes()[j.index()].size()
    }

    /// `|X_j| * |Y_j|`, the size of the stored past input/output alphabet.
    pub fn w_size(&self, j: Terminal) -> usize {
        self.x_size(j) * self.y_size(j)
    }

    /// Output distribution over `y1 * |Y2| + y2`.
    pub fn row(&self, x1: usize, x2: usize) -> &[f64] {
        self.law.row(x1 * self.x_size(Terminal::Two) + x2)
    }

    pub fn prob(&self, x1: usize, x2: usize, y1: usize, y2: usize) -> f64 {
        self.row(x1, x2)[y1 * self.y_size(Terminal::Two) + y2]
    }

    pub fn is_deterministic(&self) -> bool {
        self.law.table().iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// A memoryless pair of correlated sources `P(s1, s2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    law: JointPmf,
}

impl JointSource {
    pub fn new(law: JointPmf) -> Result<Self> {
        if law.num_axes() != 2 {
            return Err(Error::Shape("source law needs axes (s1, s2)".into()));
        }
        Ok(Self { law })
    }

    pub fn from_table(s1: usize, s2: usize, probs: Vec<f64>) -> Result<Self> {
        Self::new(JointPmf::new(
            vec![Alphabet::new(s1, "S1")?, Alphabet::new(s2, "S2")?],
            probs,
        )?)
    }

    pub fn law(&self) -> &JointPmf {
        &self.law
    }

    pub fn size(&self, j: Terminal) -> usize {
        self.law.axes()[j.index()].size()
    }

    pub fn marginal(&self, j: Terminal) -> JointPmf {
        self.law.marginal(&[j.index()]).expect("axis in range")
    }

    pub fn prob(&self, s1: usize, s2: usize) -> f64 {
        self.law.probs()[s1 * self.size(Terminal::Two) + s2]
    }
}

/// A single-letter distortion measure `d(s, s_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMeasure {
    source: usize,
    recon: usize,
    table: Vec<f64>,
}

impl DistortionMeasure {
    pub fn new(source: usize, recon: usize, table: Vec<f64>) -> Result<Self> {
        if source == 0 || recon == 0 || table.len() != source * recon {
            return Err(Error::Shape(format!(
                "distortion table must be {source}x{recon}"
            )));
        }
        if let Some(bad) = table.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidTable(format!("distortion entry {bad}")));
        }
        Ok(Self {
            source,
            recon,
            table,
        })
    }

    /// `d(s, s_hat) = 1{s != s_hat}` on a square alphabet.
    pub fn hamming(size: usize) -> Self {
        let table = (0..size * size)
            .map(|i| if i / size == i % size { 0.0 } else { 1.0 })
            .collect();
        Self {
            source: size,
            recon: size,
            table,
        }
    }

    pub fn source_size(&self) -> usize {
        self.source
    }

    pub fn recon_size(&self) -> usize {
        self.recon
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn d(&self, s: usize, s_hat: usize) -> f64 {
        self.table[s * self.recon + s_hat]
    }

    pub fn d_max(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }
}

/// `E[d(S, S_hat)]` for a joint law over `(S, S_hat)`.
pub fn expected_distortion(joint: &JointPmf, d: &DistortionMeasure) -> Result<f64> {
    if joint.shape() != [d.source_size(), d.recon_size()] {
        return Err(Error::AlphabetMismatch(format!(
            "joint shape {:?} vs distortion {}x{}",
            joint.shape(),
            d.source_size(),
            d.recon_size()
        )));
    }
    Ok(joint
        .probs()
        .iter()
        .zip(d.table())
        .map(|(p, c)| p * c)
        .sum())
}

/// Binary multiplying channel: `Y1 = Y2 = X1 * X2`.
pub fn preset_bmc() -> TwoWayChannel {
    TwoWayChannel::from_fn([2, 2, 2, 2], |a, b| vec![(a * b, a * b, 1.0)]).expect("valid preset")
}

/// Dueck's channel with `X_j = (X_j1, X_j2)` and
/// `Y_j = (X_11 * X_21, N_j xor X_j'2, N_j')`, where `N_1, N_2` are
/// independent fair bits summed out of the law.
pub fn preset_dueck() -> TwoWayChannel {
    TwoWayChannel::from_fn([4, 4, 8, 8], |x1, x2| {
        let (a1, b1) = (x1 >> 1, x1 & 1);
        let (a2, b2) = (x2 >> 1, x2 & 1);
        let and = a1 & a2;
        let mut out = Vec::with_capacity(4);
        for n1 in 0..2 {
            for n2 in 0..2 {
                let y1 = 4 * and + 2 * (n1 ^ b2) + n2;
                let y2 = 4 * and + 2 * (n2 ^ b1) + n1;
                out.push((y1, y2, 0.25));
            }
        }
        out
    })
    .expect("valid preset")
}

/// Two noiseless bit pipes in opposite directions: `Y1 = X2`, `Y2 = X1`.
pub fn preset_crossed_bit_pipes() -> TwoWayChannel {
    TwoWayChannel::from_fn([2, 2, 2, 2], |a, b| vec![(b, a, 1.0)]).expect("valid preset")
}

/// Correlated bits with `P(0,0) = 0` and `1/3` on the other pairs.
pub fn preset_example2_source() -> JointSource {
    let third = 1.0 / 3.0;
    JointSource::from_table(2, 2, vec![0.0, third, third, third]).expect("valid preset")
}

/// Independent `Ber(p1)` and `Ber(p2)` sources.
pub fn preset_independent_bernoulli(p1: f64, p2: f64) -> Result<JointSource> {
    let law = JointPmf::bernoulli(p1)?.product(&JointPmf::bernoulli(p2)?);
    JointSource::from_table(2, 2, law.probs().to_vec())
}

pub fn hamming(size: usize) -> DistortionMeasure {
    DistortionMeasure::hamming(size)
}
