//! Exact discrete probability on ordered finite alphabets.
//!
//! A [`JointPmf`] is a dense tensor stored in row-major order: the last axis
//! varies fastest. Every information measure works in bits and uses the
//! convention `0 log 0 = 0`.

mod typical;

pub use typical::{joint_typicality_test, TYPICALITY_SLACK};

use crate::error::{Error, Result};

/// Normalization tolerance for every constructed distribution.
pub const NORM_TOL: f64 = 1e-12;

/// A finite alphabet `{0, .., size-1}`. The label is for diagnostics only.
#[derive(Debug, Clone)]
pub struct Alphabet {
    size: usize,
    label: String,
}

impl Alphabet {
    pub fn new(size: usize, label: impl Into<String>) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
        }
        Ok(Self {
            size,
            label: label.into(),
        })
    }

    /// Unlabeled alphabet; panics if `size == 0`.
    pub fn of(size: usize) -> Self {
        assert!(size >= 1, "alphabet size must be >= 1");
        Self {
            size,
            label: String::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

// Labels do not take part in equality.
impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
    }
}

impl Eq for Alphabet {}

pub(crate) fn shape_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Row-major flattening of `coords` over `shape`.
pub fn flat_index(shape: &[usize], coords: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), coords.len());
    coords.iter().zip(shape).fold(0, |acc, (&c, &s)| {
        debug_assert!(c < s);
        acc * s + c
    })
}

/// Inverse of [`flat_index`].
pub fn unflatten(shape: &[usize], mut index: usize, coords: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        coords[k] = index % shape[k];
        index /= shape[k];
    }
}

fn validate_probs(probs: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidProbability { index, value });
        }
        sum += value;
    }
    Ok(sum)
}

/// `-p log2 p` with the `0 log 0 = 0` convention.
#[inline]
pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

/// Entropy of a raw probability vector, validating normalization first.
pub fn entropy_of_probs(probs: &[f64]) -> Result<f64> {
    let sum = validate_probs(probs)?;
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(probs.iter().map(|&p| plogp(p)).sum())
}

/// All points of the probability simplex on `k` symbols whose coordinates
/// are multiples of `1 / divisions`, in lexicographic order of the counts.
pub fn simplex_grid(k: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(k, left - c, cur, out);
            cur.pop();
        }
    }
    if k == 0 {
        return Vec::new();
    }
    let divisions = divisions.max(1);
    let mut counts = Vec::new();
    rec(k, divisions, &mut Vec::with_capacity(k), &mut counts);
    counts
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / divisions as f64).collect())
        .collect()
}

/// A joint distribution over an ordered list of finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    axes: Vec<Alphabet>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(axes: Vec<Alphabet>, probs: Vec<f64>) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(Alphabet::size).collect();
        if axes.is_empty() {
            return Err(Error::Shape("a joint pmf needs at least one axis".into()));
        }
        if shape_len(&shape) != probs.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} entries, got {}",
                shape,
                shape_len(&shape),
                probs.len()
            )));
        }
        let sum = validate_probs(&probs)?;
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { axes, probs })
    }

    /// Builds a pmf from sizes alone (unlabeled axes).
    pub fn from_shape(shape: &[usize], probs: Vec<f64>) -> Result<Self> {
        Self::new(shape.iter().map(|&s| Alphabet::of(s)).collect(), probs)
    }

    /// Skips normalization checks; entries must already be a valid pmf up
    /// to accumulated rounding.
    pub(crate) fn from_parts(axes: Vec<Alphabet>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(
            shape_len(&axes.iter().map(Alphabet::size).collect::<Vec<_>>()),
            probs.len()
        );
        Self { axes, probs }
    }

    pub fn uniform(shape: &[usize]) -> Self {
        let len = shape_len(shape);
        Self::from_parts(
            shape.iter().map(|&s| Alphabet::of(s)).collect(),
            vec![1.0 / len as f64; len],
        )
    }

    pub fn point_mass(shape: &[usize], coords: &[usize]) -> Self {
        let mut probs = vec![0.0; shape_len(shape)];
        probs[flat_index(shape, coords)] = 1.0;
        Self::from_parts(shape.iter().map(|&s| Alphabet::of(s)).collect(), probs)
    }

    /// `Ber(p)`: probability `p` on symbol 1.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("Bernoulli parameter {p}")));
        }
        Self::from_shape(&[2], vec![1.0 - p, p])
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Alphabet::size).collect()
    }

    pub fn num_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, coords: &[usize]) -> f64 {
        self.probs[flat_index(&self.shape(), coords)]
    }

    /// Relabels axis `axis`.
    pub fn with_label(mut self, axis: usize, label: impl Into<String>) -> Self {
        self.axes[axis].label = label.into();
        self
    }

    fn check_axes(&self, set: &[usize], seen: &mut [bool]) -> Result<()> {
        for &a in set {
            if a >= self.axes.len() {
                return Err(Error::AxisOutOfRange(a));
            }
            if seen[a] {
                return Err(Error::OverlappingAxes(a));
            }
            seen[a] = true;
        }
        Ok(())
    }

    /// Marginal over `keep`, with the output axes in the order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointPmf> {
        if keep.is_empty() {
            return Err(Error::EmptyAxisSet);
        }
        let mut seen = vec![false; self.axes.len()];
        self.check_axes(keep, &mut seen)?;

        let shape = self.shape();
        let out_shape: Vec<usize> = keep.iter().map(|&a| shape[a]).collect();
        let out_strides = strides(&out_shape);
        // contribution of each source axis to the output flat index
        let mut axis_stride = vec![0usize; shape.len()];
        for (k, &a) in keep.iter().enumerate() {
            axis_stride[a] = out_strides[k];
        }

        let mut out = vec![0.0; shape_len(&out_shape)];
        let mut coords = vec![0usize; shape.len()];
        let mut out_idx = 0usize;
        for &p in &self.probs {
            out[out_idx] += p;
            // odometer increment, keeping out_idx in sync
            for k in (0..shape.len()).rev() {
                coords[k] += 1;
                out_idx += axis_stride[k];
                if coords[k] < shape[k] {
                    break;
                }
                out_idx -= axis_stride[k] * shape[k];
                coords[k] = 0;
            }
        }
        let axes = keep.iter().map(|&a| self.axes[a].clone()).collect();
        Ok(JointPmf::from_parts(axes, out))
    }

    /// Independent product; `other`'s axes follow `self`'s.
    pub fn product(&self, other: &JointPmf) -> JointPmf {
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for &p in &self.probs {
            probs.extend(other.probs.iter().map(|&q| p * q));
        }
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        JointPmf::from_parts(axes, probs)
    }

    /// Shannon entropy of the full joint, in bits.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|&p| plogp(p)).sum()
    }

    /// Entropy of the marginal over `axes`; the empty set has entropy 0.
    pub fn entropy_of(&self, axes: &[usize]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        Ok(self.marginal(axes)?.entropy())
    }

    fn union(sets: &[&[usize]]) -> Vec<usize> {
        sets.iter().flat_map(|s| s.iter().copied()).collect()
    }

    /// `H(target | given)`.
    pub fn conditional_entropy(&self, target: &[usize], given: &[usize]) -> Result<f64> {
        if target.is_empty() {
            return Err(Error::EmptyAxisSet);
        }
        let mut seen = vec![false; self.axes.len()];
        self.check_axes(target, &mut seen)?;
        self.check_axes(given, &mut seen)?;
        let joint = Self::union(&[target, given]);
        Ok((self.entropy_of(&joint)? - self.entropy_of(given)?).max(0.0))
    }

    /// `I(a; b)`, clamped at zero.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }

    /// `I(a; b | c) = H(a,c) + H(b,c) - H(a,b,c) - H(c)`, clamped at zero.
    pub fn conditional_mutual_information(
        &self,
        a: &[usize],
        b: &[usize],
        c: &[usize],
    ) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyAxisSet);
        }
        let mut seen = vec![false; self.axes.len()];
        self.check_axes(a, &mut seen)?;
        self.check_axes(b, &mut seen)?;
        self.check_axes(c, &mut seen)?;
        let value = self.entropy_of(&Self::union(&[a, c]))?
            + self.entropy_of(&Self::union(&[b, c]))?
            - self.entropy_of(&Self::union(&[a, b, c]))?
            - self.entropy_of(c)?;
        Ok(value.max(0.0))
    }

    /// Expectation of `f` over the joint.
    pub fn expect(&self, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
        let shape = self.shape();
        let mut coords = vec![0usize; shape.len()];
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                unflatten(&shape, i, &mut coords);
                acc += p * f(&coords);
            }
        }
        acc
    }

    pub fn total_variation(&self, other: &JointPmf) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape("total variation needs equal shapes".into()));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &JointPmf) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape("comparison needs equal shapes".into()));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }
}

/// Free-function spellings of the information measures.
pub fn entropy(p: &JointPmf) -> f64 {
    p.entropy()
}

pub fn marginalize(p: &JointPmf, keep: &[usize]) -> Result<JointPmf> {
    p.marginal(keep)
}

pub fn product(p: &JointPmf, q: &JointPmf) -> JointPmf {
    p.product(q)
}

pub fn conditional_entropy(p: &JointPmf, target: &[usize], given: &[usize]) -> Result<f64> {
    p.conditional_entropy(target, given)
}

pub fn mutual_information(p: &JointPmf, a: &[usize], b: &[usize]) -> Result<f64> {
    p.mutual_information(a, b)
}

pub fn conditional_mutual_information(
    p: &JointPmf,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    p.conditional_mutual_information(a, b, c)
}

/// A conditional law `P(out | given)`, one row per flattened given-tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPmf {
    given: Vec<Alphabet>,
    out: Vec<Alphabet>,
    table: Vec<f64>,
}

impl ConditionalPmf {
    pub fn new(given: Vec<Alphabet>, out: Vec<Alphabet>, table: Vec<f64>) -> Result<Self> {
        let rows = shape_len(&given.iter().map(Alphabet::size).collect::<Vec<_>>());
        let cols = shape_len(&out.iter().map(Alphabet::size).collect::<Vec<_>>());
        if given.is_empty() || out.is_empty() {
            return Err(Error::Shape(
                "conditional pmf needs given and out axes".into(),
            ));
        }
        if rows * cols != table.len() {
            return Err(Error::Shape(format!(
                "conditional table needs {}x{} entries, got {}",
                rows,
                cols,
                table.len()
            )));
        }
        for (r, row) in table.chunks(cols).enumerate() {
            let sum = validate_probs(row).map_err(|e| match e {
                Error::InvalidProbability { index, value } => Error::InvalidProbability {
                    index: r * cols + index,
                    value,
                },
                other => other,
            })?;
            if (sum - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self { given, out, table })
    }

    pub fn from_shape(given: &[usize], out: &[usize], table: Vec<f64>) -> Result<Self> {
        Self::new(
            given.iter().map(|&s| Alphabet::of(s)).collect(),
            out.iter().map(|&s| Alphabet::of(s)).collect(),
            table,
        )
    }

    /// Deterministic law: row `g` is a point mass on `map(g)`.
    pub fn deterministic(given: &[usize], out: &[usize], map: impl Fn(usize) -> usize) -> Self {
        let rows = shape_len(given);
        let cols = shape_len(out);
        let mut table = vec![0.0; rows * cols];
        for g in 0..rows {
            let o = map(g);
            assert!(o < cols, "deterministic map out of range");
            table[g * cols + o] = 1.0;
        }
        Self {
            given: given.iter().map(|&s| Alphabet::of(s)).collect(),
            out: out.iter().map(|&s| Alphabet::of(s)).collect(),
            table,
        }
    }

    pub fn given_axes(&self) -> &[Alphabet] {
        &self.given
    }

    pub fn out_axes(&self) -> &[Alphabet] {
        &self.out
    }

    pub fn given_shape(&self) -> Vec<usize> {
        self.given.iter().map(Alphabet::size).collect()
    }

    pub fn out_shape(&self) -> Vec<usize> {
        self.out.iter().map(Alphabet::size).collect()
    }

    pub fn rows(&self) -> usize {
        self.table.len() / self.cols()
    }

    pub fn cols(&self) -> usize {
        shape_len(&self.out_shape())
    }

    pub fn row(&self, given: usize) -> &[f64] {
        let cols = self.cols();
        &self.table[given * cols..(given + 1) * cols]
    }

    pub fn prob(&self, given: usize, out: usize) -> f64 {
        self.table[given * self.cols() + out]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Joint law `prior(given) * self(out | given)` with axes `given ++ out`.
    pub fn joint_with(&self, prior: &JointPmf) -> Result<JointPmf> {
        if prior.shape() != self.given_shape() {
            return Err(Error::Shape(
                "prior shape does not match the conditioning axes".into(),
            ));
        }
        let cols = self.cols();
        let mut probs = Vec::with_capacity(self.table.len());
        for (g, &p) in prior.probs().iter().enumerate() {
            probs.extend(self.row(g).iter().map(|&q| p * q));
        }
        debug_assert_eq!(probs.len(), prior.len() * cols);
        let mut axes = prior.axes().to_vec();
        axes.extend(self.out.iter().cloned());
        Ok(JointPmf::from_parts(axes, probs))
    }

    /// Largest row-sum deviation from one.
    pub fn max_row_deviation(&self) -> f64 {
        self.table
            .chunks(self.cols())
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example2() -> JointPmf {
        JointPmf::from_shape(&[2, 2], vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((JointPmf::bernoulli(0.5).unwrap().entropy() - 1.0).abs() < 1e-15);
        let h = JointPmf::bernoulli(0.89).unwrap().entropy();
        assert!((h - 0.4999).abs() < 1e-3, "{h}");
        let u3 = JointPmf::uniform(&[3]).entropy();
        assert!((u3 - 3f64.log2()).abs() < 1e-12);
        assert!((u3 - 1.584963).abs() < 1e-6);
    }

    #[test]
    fn invalid_pmfs_are_rejected() {
        assert!(matches!(
            JointPmf::from_shape(&[2], vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            JointPmf::from_shape(&[2], vec![1.5, -0.5]),
            Err(Error::InvalidProbability { index: 1, .. })
        ));
        assert!(matches!(
            entropy_of_probs(&[0.2, 0.2]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(JointPmf::from_shape(&[2, 2], vec![0.25; 3]).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let p = example2();
        let h12 = p.conditional_entropy(&[0], &[1]).unwrap();
        let h21 = p.conditional_entropy(&[1], &[0]).unwrap();
        assert!((h12 - 2.0 / 3.0).abs() < 1e-9);
        assert!((h21 - 2.0 / 3.0).abs() < 1e-9);

        let indep = JointPmf::bernoulli(0.3)
            .unwrap()
            .product(&JointPmf::bernoulli(0.8).unwrap());
        let target = JointPmf::bernoulli(0.3).unwrap().entropy();
        assert!((indep.conditional_entropy(&[0], &[1]).unwrap() - target).abs() < 1e-12);

        let copy = JointPmf::from_shape(&[2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(copy.conditional_entropy(&[1], &[0]).unwrap().abs() < 1e-15);

        assert_eq!(
            p.conditional_entropy(&[0], &[0]),
            Err(Error::OverlappingAxes(0))
        );
    }

    #[test]
    fn mutual_information_examples() {
        let indep = JointPmf::bernoulli(0.3)
            .unwrap()
            .product(&JointPmf::bernoulli(0.6).unwrap());
        assert!(indep.mutual_information(&[0], &[1]).unwrap().abs() < 1e-12);

        let copy = JointPmf::from_shape(&[2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((copy.mutual_information(&[0], &[1]).unwrap() - 1.0).abs() < 1e-12);

        // analytic oracle: I(S1;S2) = H(S1) - H(S1|S2) = h(1/3) - 2/3
        let oracle = binary_entropy(1.0 / 3.0) - 2.0 / 3.0;
        let mi = example2().mutual_information(&[0], &[1]).unwrap();
        assert!((mi - oracle).abs() < 1e-12);
        assert!((mi - 0.251629).abs() < 1e-6);
        assert!(matches!(
            copy.mutual_information(&[0, 1], &[1]),
            Err(Error::OverlappingAxes(1))
        ));
    }

    #[test]
    fn conditional_mutual_information_examples() {
        let p = example2();
        let a = p.conditional_mutual_information(&[0], &[1], &[]).unwrap();
        assert!((a - p.mutual_information(&[0], &[1]).unwrap()).abs() < 1e-15);

        // p(c) p(a|c) p(b|c) on binary alphabets
        let pc = [0.3, 0.7];
        let pa = [[0.9, 0.1], [0.2, 0.8]];
        let pb = [[0.4, 0.6], [0.75, 0.25]];
        let mut probs = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    probs[flat_index(&[2, 2, 2], &[a, b, c])] = pc[c] * pa[c][a] * pb[c][b];
                }
            }
        }
        let chain = JointPmf::from_shape(&[2, 2, 2], probs).unwrap();
        let cmi = chain
            .conditional_mutual_information(&[0], &[1], &[2])
            .unwrap();
        assert!(cmi.abs() < 1e-12);
        assert!(chain.mutual_information(&[0], &[1]).unwrap() > 1e-3);
    }

    #[test]
    fn simplex_grid_counts() {
        // C(d + k - 1, k - 1) points
        assert_eq!(simplex_grid(2, 20).len(), 21);
        assert_eq!(simplex_grid(4, 20).len(), 1771);
        assert_eq!(simplex_grid(1, 5), vec![vec![1.0]]);
        for p in simplex_grid(3, 7) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_and_product() {
        let p = example2();
        assert_eq!(p.marginal(&[0, 1]).unwrap(), p);
        let m = p.marginal(&[0]).unwrap();
        assert!((m.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.probs()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.marginal(&[]), Err(Error::EmptyAxisSet));

        let a = JointPmf::bernoulli(0.2).unwrap();
        let b = JointPmf::bernoulli(0.7).unwrap();
        let ab = a.product(&b);
        assert!((ab.prob(&[1, 1]) - 0.14).abs() < 1e-15);
        assert!((ab.entropy() - a.entropy() - b.entropy()).abs() < 1e-12);
        assert!(ab.marginal(&[1]).unwrap().max_abs_diff(&b).unwrap() < 1e-15);
        // reordered marginal transposes
        let t = p.marginal(&[1, 0]).unwrap();
        assert_eq!(t.prob(&[1, 0]), p.prob(&[0, 1]));
    }

    #[test]
    fn conditional_rows_validated() {
        assert!(ConditionalPmf::from_shape(&[2], &[2], vec![0.5, 0.5, 0.3, 0.3]).is_err());
        let c = ConditionalPmf::from_shape(&[2], &[2], vec![0.5, 0.5, 0.3, 0.7]).unwrap();
        let j = c.joint_with(&JointPmf::bernoulli(0.5).unwrap()).unwrap();
        assert!((j.prob(&[1, 1]) - 0.35).abs() < 1e-15);
    }
}
