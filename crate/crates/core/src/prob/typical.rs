use super::{shape_len, JointPmf};
use crate::error::{Error, Result};

/// Absolute slack added to the robust-typicality bound so that rational
/// frequencies equal to a rounded reference probability still pass at
/// `eps = 0`.
pub const TYPICALITY_SLACK: f64 = 1e-12;

/// Robust joint typicality: every tuple's empirical frequency lies within
/// `eps * p` of its reference probability `p`. Tuples with `p = 0` must not
/// occur at all.
///
/// `sequences[k]` holds the symbols of reference axis `k`.
pub fn joint_typicality_test(
    sequences: &[&[usize]],
    reference: &JointPmf,
    eps: f64,
) -> Result<bool> {
    if sequences.len() != reference.num_axes() {
        return Err(Error::Shape(format!(
            "{} sequences for a reference with {} axes",
            sequences.len(),
            reference.num_axes()
        )));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("typicality eps {eps}")));
    }
    let n = sequences[0].len();
    if n == 0 {
        return Err(Error::Shape(
            "typicality needs sequences of length >= 1".into(),
        ));
    }
    if let Some(bad) = sequences.iter().find(|s| s.len() != n) {
        return Err(Error::Shape(format!(
            "sequence lengths differ: {} vs {}",
            n,
            bad.len()
        )));
    }
    let shape = reference.shape();
    let mut counts = vec![0u32; shape_len(&shape)];
    for i in 0..n {
        let mut idx = 0usize;
        for (k, seq) in sequences.iter().enumerate() {
            let sym = seq[i];
            if sym >= shape[k] {
                return Err(Error::AlphabetMismatch(format!(
                    "symbol {sym} outside alphabet of size {} on axis {k}",
                    shape[k]
                )));
            }
            idx = idx * shape[k] + sym;
        }
        counts[idx] += 1;
    }
    let n = n as f64;
    Ok(counts
        .iter()
        .zip(reference.probs())
        .all(|(&c, &p)| (c as f64 / n - p).abs() <= eps * p + TYPICALITY_SLACK))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_empirical_match() {
        let seq = [1usize, 1, 1, 0];
        let p = JointPmf::bernoulli(0.75).unwrap();
        assert!(joint_typicality_test(&[&seq], &p, 0.1).unwrap());
        assert!(joint_typicality_test(&[&seq], &p, 0.0).unwrap());
    }

    #[test]
    fn all_zeros_is_atypical_for_skewed_reference() {
        let seq = vec![0usize; 100];
        let p = JointPmf::bernoulli(0.89).unwrap();
        assert!(!joint_typicality_test(&[&seq], &p, 0.1).unwrap());
    }

    #[test]
    fn large_slack_accepts_anything_in_support() {
        let seq = vec![0usize, 0, 0, 0, 0, 1];
        let p = JointPmf::bernoulli(0.89).unwrap();
        // deviations are 0.72 and 0.72; relative to 0.11 and 0.89
        assert!(joint_typicality_test(&[&seq], &p, 7.0).unwrap());
    }

    #[test]
    fn zero_probability_symbols_are_forbidden() {
        let p = JointPmf::bernoulli(1.0).unwrap();
        let seq = vec![1usize, 1, 0];
        assert!(!joint_typicality_test(&[&seq], &p, 1e6).unwrap());
    }

    #[test]
    fn errors() {
        let p = JointPmf::uniform(&[2, 2]);
        let a = [0usize, 1];
        let b = [0usize];
        assert!(joint_typicality_test(&[&a, &b], &p, 0.1).is_err());
        assert!(joint_typicality_test(&[&a], &p, 0.1).is_err());
        let c = [0usize, 2];
        assert!(joint_typicality_test(&[&a, &c], &p, 0.1).is_err());
    }

    #[test]
    fn joint_pair_typicality() {
        let p = JointPmf::from_shape(&[2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let x = [0usize, 1, 0, 1];
        assert!(joint_typicality_test(&[&x, &x], &p, 0.0).unwrap());
        let y = [0usize, 1, 1, 1];
        assert!(!joint_typicality_test(&[&x, &y], &p, 10.0).unwrap());
    }
}
