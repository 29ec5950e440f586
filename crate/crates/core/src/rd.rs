//! Rate-distortion and Wyner-Ziv rate-distortion functions on finite
//! alphabets.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::achievability::WZScheme;
use crate::error::{Error, Result};
use crate::models::{DistortionMeasure, JointSource, Terminal};
use crate::prob::{simplex_grid, ConditionalPmf};

const BA_MAX_ITERATIONS: usize = 200_000;
const BA_TOL: f64 = 1e-14;
const BISECTION_STEPS: usize = 200;
/// Allowed increase of consecutive curve values before clipping is reported.
pub const ISOTONIC_TOL: f64 = 1e-9;
/// Largest auxiliary alphabet used by the Wyner-Ziv solver.
pub const WZ_T_CAP: usize = 8;
const MAX_CLIMB: usize = 200;

/// One evaluated point of a rate-distortion function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub distortion: f64,
    pub rate: f64,
    pub iterations: usize,
    /// Distance between the achieved and the target distortion, or the last
    /// update size of the fixed-point iteration.
    pub residual: f64,
    /// The Lagrangian never increased across iterations.
    pub monotone: bool,
}

fn validate_source(p: &[f64], d: &DistortionMeasure) -> Result<()> {
    crate::prob::entropy_of_probs(p)?;
    if p.len() != d.source_size() {
        return Err(Error::AlphabetMismatch(format!(
            "source of size {} with a distortion over {} symbols",
            p.len(),
            d.source_size()
        )));
    }
    Ok(())
}

/// Smallest achievable distortion `sum_s p(s) min_shat d(s, shat)`.
pub fn min_distortion(p: &[f64], d: &DistortionMeasure) -> f64 {
    p.iter()
        .enumerate()
        .map(|(s, &ps)| {
            ps * (0..d.recon_size())
                .map(|r| d.d(s, r))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Distortion of the best constant reconstruction.
pub fn constant_distortion(p: &[f64], d: &DistortionMeasure) -> f64 {
    (0..d.recon_size())
        .map(|r| {
            p.iter()
                .enumerate()
                .map(|(s, &ps)| ps * d.d(s, r))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

struct BaState {
    q: Vec<f64>,
    rate: f64,
    dist: f64,
    iterations: usize,
    step: f64,
    monotone: bool,
}

/// Blahut-Arimoto at slope `beta` (nats per unit distortion). `mask` limits
/// the support of `Q(shat | s)`; with a mask, `beta` is ignored.
fn blahut_arimoto(
    p: &[f64],
    d: &DistortionMeasure,
    beta: f64,
    mask: Option<&[bool]>,
    q0: &[f64],
) -> BaState {
    let (ns, nr) = (p.len(), d.recon_size());
    let weight = |s: usize, r: usize| match mask {
        Some(m) => {
            if m[s * nr + r] {
                1.0
            } else {
                0.0
            }
        }
        None => (-beta * d.d(s, r)).exp(),
    };
    let w: Vec<f64> = (0..ns * nr).map(|i| weight(i / nr, i % nr)).collect();
    let mut q = q0.to_vec();
    let mut cond = vec![0.0; ns * nr];
    let mut last_obj = f64::INFINITY;
    let mut monotone = true;
    let mut state = BaState {
        q: q.clone(),
        rate: 0.0,
        dist: 0.0,
        iterations: 0,
        step: f64::INFINITY,
        monotone,
    };
    for it in 1..=BA_MAX_ITERATIONS {
        for s in 0..ns {
            let row = &mut cond[s * nr..(s + 1) * nr];
            let mut z = 0.0;
            for r in 0..nr {
                row[r] = q[r] * w[s * nr + r];
                z += row[r];
            }
            if z > 0.0 {
                row.iter_mut().for_each(|v| *v /= z);
            }
        }
        let mut next = vec![0.0; nr];
        for s in 0..ns {
            for r in 0..nr {
                next[r] += p[s] * cond[s * nr + r];
            }
        }
        let (rate, dist) = rate_and_distortion(p, d, &cond, &next);
        let obj = rate
            + if mask.is_some() {
                0.0
            } else {
                beta * dist / std::f64::consts::LN_2
            };
        if obj > last_obj + 1e-12 {
            monotone = false;
        }
        last_obj = obj;
        let step: f64 = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        q = next;
        state = BaState {
            q: q.clone(),
            rate,
            dist,
            iterations: it,
            step,
            monotone,
        };
        if step <= BA_TOL {
            break;
        }
    }
    state
}

fn rate_and_distortion(p: &[f64], d: &DistortionMeasure, cond: &[f64], q: &[f64]) -> (f64, f64) {
    let nr = q.len();
    let mut rate = 0.0;
    let mut dist = 0.0;
    for (s, &ps) in p.iter().enumerate() {
        if ps == 0.0 {
            continue;
        }
        for r in 0..nr {
            let c = cond[s * nr + r];
            if c > 0.0 {
                rate += ps * c * (c / q[r]).log2();
                dist += ps * c * d.d(s, r);
            }
        }
    }
    (rate.max(0.0), dist)
}

/// `R(D)` of a memoryless source with law `p`, with solver metadata.
pub fn rd_point(p: &[f64], d: &DistortionMeasure, target: f64) -> Result<RdPoint> {
    validate_source(p, d)?;
    if target.is_nan() || target < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "distortion target {target}"
        )));
    }
    let dmin = min_distortion(p, d);
    if target < dmin - 1e-12 {
        return Err(Error::Infeasible(format!(
            "distortion {target} is below the minimum {dmin}"
        )));
    }
    if target >= constant_distortion(p, d) {
        return Ok(RdPoint {
            distortion: target,
            rate: 0.0,
            iterations: 0,
            residual: 0.0,
            monotone: true,
        });
    }
    let nr = d.recon_size();
    let uniform = vec![1.0 / nr as f64; nr];
    if target <= dmin + 1e-12 {
        // the slope is unbounded: keep only distortion-minimizing letters
        let mask: Vec<bool> = (0..p.len() * nr)
            .map(|i| {
                let (s, r) = (i / nr, i % nr);
                let best = (0..nr).map(|k| d.d(s, k)).fold(f64::INFINITY, f64::min);
                d.d(s, r) <= best
            })
            .collect();
        let st = blahut_arimoto(p, d, 0.0, Some(&mask), &uniform);
        return Ok(RdPoint {
            distortion: st.dist,
            rate: st.rate,
            iterations: st.iterations,
            residual: st.step,
            monotone: st.monotone,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    let mut monotone = true;
    let mut q = uniform.clone();
    loop {
        let st = blahut_arimoto(p, d, hi, None, &q);
        iterations += st.iterations;
        monotone &= st.monotone;
        if st.dist <= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NonConvergence {
                iterations,
                residual: st.dist - target,
            });
        }
    }
    let mut best = None;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let st = blahut_arimoto(p, d, mid, None, &q);
        iterations += st.iterations;
        monotone &= st.monotone;
        q = st.q.clone();
        if st.dist > target {
            lo = mid;
        } else {
            hi = mid;
        }
        let gap = (st.dist - target).abs();
        if best.as_ref().is_none_or(|b: &(f64, BaState)| gap < b.0) {
            best = Some((gap, st));
        }
        if gap < 1e-13 || hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    let (gap, st) = best.expect("at least one bisection step");
    Ok(RdPoint {
        distortion: st.dist,
        rate: st.rate,
        iterations,
        residual: gap,
        monotone,
    })
}

/// `R(D)` in bits.
pub fn rd_function(p: &[f64], d: &DistortionMeasure, target: f64) -> Result<f64> {
    Ok(rd_point(p, d, target)?.rate)
}

/// Result of [`wz_function`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WzResult {
    pub rate: f64,
    pub distortion: f64,
    pub scheme: WZScheme,
    pub evaluations: usize,
}

/// Precomputed data for evaluating Wyner-Ziv test channels.
struct WzProblem<'a> {
    /// `joint[s][side]`.
    joint: Vec<Vec<f64>>,
    d: &'a DistortionMeasure,
    nt: usize,
}

#[derive(Debug, Clone)]
struct WzEval {
    objective: f64,
    distortion: f64,
    h: Vec<usize>,
}

impl WzProblem<'_> {
    fn ns(&self) -> usize {
        self.joint.len()
    }

    fn nside(&self) -> usize {
        self.joint[0].len()
    }

    /// `rows[s]` is `P(. | s)` over `T`.
    #[allow(clippy::needless_range_loop)]
    fn eval(&self, rows: &[&[f64]]) -> WzEval {
        let (ns, nside, nt) = (self.ns(), self.nside(), self.nt);
        let nr = self.d.recon_size();
        let mut h = vec![0usize; nside * nt];
        let mut distortion = 0.0;
        let mut pst = vec![0.0; ns * nt];
        let mut pside_t = vec![0.0; nside * nt];
        for side in 0..nside {
            for t in 0..nt {
                let mut best = (0, f64::INFINITY);
                for r in 0..nr {
                    let mut cost = 0.0;
                    for s in 0..ns {
                        cost += self.joint[s][side] * rows[s][t] * self.d.d(s, r);
                    }
                    if cost < best.1 - 1e-15 {
                        best = (r, cost);
                    }
                }
                h[side * nt + t] = best.0;
                distortion += best.1;
                for s in 0..ns {
                    let p = self.joint[s][side] * rows[s][t];
                    pst[s * nt + t] += p;
                    pside_t[side * nt + t] += p;
                }
            }
        }
        let mut pt = vec![0.0; nt];
        let mut ps = vec![0.0; ns];
        let mut pside = vec![0.0; nside];
        for s in 0..ns {
            for side in 0..nside {
                ps[s] += self.joint[s][side];
                pside[side] += self.joint[s][side];
            }
            for t in 0..nt {
                pt[t] += pst[s * nt + t];
            }
        }
        let mi = |pxy: &[f64], px: &[f64]| {
            let mut v = 0.0;
            for (x, &pxv) in px.iter().enumerate() {
                for t in 0..nt {
                    let p = pxy[x * nt + t];
                    if p > 0.0 {
                        v += p * (p / (pxv * pt[t])).log2();
                    }
                }
            }
            v
        };
        WzEval {
            objective: mi(&pst, &ps) - mi(&pside_t, &pside),
            distortion,
            h,
        }
    }
}

/// Feasible candidates first, then lower objective, then lower index.
fn better(a: &(WzEval, usize), b: &(WzEval, usize), target: f64) -> bool {
    let fa = a.0.distortion <= target + 1e-12;
    let fb = b.0.distortion <= target + 1e-12;
    match (fa, fb) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => {
            a.0.objective < b.0.objective - 1e-15
                || ((a.0.objective - b.0.objective).abs() <= 1e-15 && a.1 < b.1)
        }
        (false, false) => {
            a.0.distortion < b.0.distortion - 1e-15
                || ((a.0.distortion - b.0.distortion).abs() <= 1e-15 && a.1 < b.1)
        }
    }
}

fn argbest(cands: Vec<(WzEval, usize)>, target: f64) -> (WzEval, usize) {
    cands
        .into_iter()
        .reduce(|a, b| if better(&b, &a, target) { b } else { a })
        .expect("nonempty candidate set")
}

fn row_perturbations(p: &[f64], step: f64) -> Vec<Vec<f64>> {
    let k = p.len();
    let mut out = vec![p.to_vec()];
    for a in 0..k {
        for b in a + 1..k {
            for m in -10i32..=10 {
                if m == 0 {
                    continue;
                }
                let mut q = p.to_vec();
                q[a] += m as f64 * step;
                q[b] -= m as f64 * step;
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

/// Settings of the Wyner-Ziv grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WzGrid {
    /// Divisions per simplex coordinate (levels minus one).
    pub divisions: usize,
    pub refine_rounds: usize,
}

impl Default for WzGrid {
    fn default() -> Self {
        Self {
            divisions: 14,
            refine_rounds: 2,
        }
    }
}

/// `R_WZ(D)` of source `which` with the other source as decoder side
/// information, by a simplex grid search over `P(T | S)` with
/// `|T| = min(|S| + 1, 8)`.
pub fn wz_function(
    src: &JointSource,
    which: Terminal,
    d: &DistortionMeasure,
    target: f64,
) -> Result<WzResult> {
    wz_function_with(src, which, d, target, WzGrid::default())
}

pub fn wz_function_with(
    src: &JointSource,
    which: Terminal,
    d: &DistortionMeasure,
    target: f64,
    grid: WzGrid,
) -> Result<WzResult> {
    let ns = src.size(which);
    let nside = src.size(which.other());
    if d.source_size() != ns {
        return Err(Error::AlphabetMismatch("WZ distortion measure".into()));
    }
    if target.is_nan() || target < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "distortion target {target}"
        )));
    }
    let ps = src.marginal(which);
    let dmin = min_distortion(ps.probs(), d);
    if target < dmin - 1e-12 {
        return Err(Error::Infeasible(format!(
            "distortion {target} is below the minimum {dmin}"
        )));
    }
    let nt = (ns + 1).min(WZ_T_CAP);
    let joint: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            (0..nside)
                .map(|o| match which {
                    Terminal::One => src.prob(s, o),
                    Terminal::Two => src.prob(o, s),
                })
                .collect()
        })
        .collect();
    let prob = WzProblem { joint, d, nt };
    let base = simplex_grid(nt, grid.divisions);
    let mut evaluations = 0;

    let mut rows: Vec<Vec<f64>> = if ns <= 2 {
        // exhaustive over all row combinations
        let combos = base.len().pow(ns as u32);
        evaluations += combos;
        let cands: Vec<(WzEval, usize)> = (0..combos)
            .into_par_iter()
            .map(|i| {
                let r: Vec<&[f64]> = (0..ns)
                    .map(|s| {
                        base[(i / base.len().pow((ns - 1 - s) as u32)) % base.len()].as_slice()
                    })
                    .collect();
                (prob.eval(&r), i)
            })
            .collect();
        let (_, i) = argbest(cands, target);
        (0..ns)
            .map(|s| base[(i / base.len().pow((ns - 1 - s) as u32)) % base.len()].clone())
            .collect()
    } else {
        // block coordinate search from the identity test channel
        let mut rows: Vec<Vec<f64>> = (0..ns)
            .map(|s| (0..nt).map(|t| if t == s { 1.0 } else { 0.0 }).collect())
            .collect();
        for _ in 0..20 {
            let mut changed = false;
            for s in 0..ns {
                let cands: Vec<(WzEval, usize)> = base
                    .par_iter()
                    .enumerate()
                    .map(|(i, cand)| {
                        let r: Vec<&[f64]> = (0..ns)
                            .map(|k| {
                                if k == s {
                                    cand.as_slice()
                                } else {
                                    rows[k].as_slice()
                                }
                            })
                            .collect();
                        (prob.eval(&r), i)
                    })
                    .collect();
                evaluations += base.len();
                let current = {
                    let r: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
                    (prob.eval(&r), usize::MAX)
                };
                let best = argbest(cands, target);
                if better(&best, &current, target) {
                    rows[s] = base[best.1].clone();
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        rows
    };

    let mut step = 1.0 / grid.divisions.max(1) as f64;
    for _ in 0..grid.refine_rounds {
        step /= 10.0;
        // hill-climb at this resolution until the incumbent is stable
        for _ in 0..MAX_CLIMB {
            let before = rows.clone();
            let local: Vec<Vec<Vec<f64>>> =
                rows.iter().map(|r| row_perturbations(r, step)).collect();
            if ns <= 2 {
                let sizes: Vec<usize> = local.iter().map(|l| l.len()).collect();
                let combos: usize = sizes.iter().product();
                evaluations += combos;
                let pick = |mut i: usize| {
                    let mut idx = vec![0usize; ns];
                    for s in (0..ns).rev() {
                        idx[s] = i % sizes[s];
                        i /= sizes[s];
                    }
                    idx
                };
                let cands: Vec<(WzEval, usize)> = (0..combos)
                    .into_par_iter()
                    .map(|i| {
                        let idx = pick(i);
                        let r: Vec<&[f64]> = (0..ns).map(|s| local[s][idx[s]].as_slice()).collect();
                        (prob.eval(&r), i)
                    })
                    .collect();
                let (_, i) = argbest(cands, target);
                let idx = pick(i);
                rows = (0..ns).map(|s| local[s][idx[s]].clone()).collect();
            } else {
                for s in 0..ns {
                    let cands: Vec<(WzEval, usize)> = local[s]
                        .iter()
                        .enumerate()
                        .map(|(i, cand)| {
                            let r: Vec<&[f64]> = (0..ns)
                                .map(|k| {
                                    if k == s {
                                        cand.as_slice()
                                    } else {
                                        rows[k].as_slice()
                                    }
                                })
                                .collect();
                            (prob.eval(&r), i)
                        })
                        .collect();
                    evaluations += local[s].len();
                    let (_, i) = argbest(cands, target);
                    rows[s] = local[s][i].clone();
                }
            }
            if rows == before {
                break;
            }
        }
    }

    let r: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
    let e = prob.eval(&r);
    if e.distortion > target + 1e-12 {
        return Err(Error::Infeasible(format!(
            "no test channel on the grid meets distortion {target}"
        )));
    }
    let pt = ConditionalPmf::from_shape(&[ns], &[nt], rows.concat())?;
    let scheme = WZScheme::new(which, nside, d.recon_size(), pt, e.h)?;
    Ok(WzResult {
        rate: e.objective.max(0.0),
        distortion: e.distortion,
        scheme,
        evaluations,
    })
}

/// Points of a rate-distortion function sorted by distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdCurve {
    pub points: Vec<RdPoint>,
    pub method: String,
    /// Largest increase removed by isotonic clipping.
    pub max_clipped: f64,
}

impl RdCurve {
    fn from_points(mut points: Vec<RdPoint>, method: &str) -> Self {
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
        let mut max_clipped: f64 = 0.0;
        for i in 1..points.len() {
            let prev = points[i - 1].rate;
            if points[i].rate > prev {
                max_clipped = max_clipped.max(points[i].rate - prev);
                points[i].rate = prev;
            }
        }
        Self {
            points,
            method: method.to_string(),
            max_clipped,
        }
    }

    /// Clipping stayed within [`ISOTONIC_TOL`].
    pub fn is_consistent(&self) -> bool {
        self.max_clipped <= ISOTONIC_TOL
    }

    /// CSV with columns `D,R,iterations,residual`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "D,R,iterations,residual")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{}",
                p.distortion, p.rate, p.iterations, p.residual
            )?;
        }
        Ok(())
    }
}

/// `R(D)` on a grid of targets; the reported distortion is the target.
pub fn rd_curve(p: &[f64], d: &DistortionMeasure, grid: &[f64]) -> Result<RdCurve> {
    let pts = grid
        .par_iter()
        .map(|&t| rd_point(p, d, t).map(|r| RdPoint { distortion: t, ..r }))
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::from_points(pts, "blahut-arimoto"))
}

/// `R_WZ(D)` on a grid of targets.
pub fn wz_curve(
    src: &JointSource,
    which: Terminal,
    d: &DistortionMeasure,
    grid: &[f64],
) -> Result<RdCurve> {
    let pts = grid
        .iter()
        .map(|&t| {
            wz_function(src, which, d, t).map(|r| RdPoint {
                distortion: t,
                rate: r.rate,
                iterations: r.evaluations,
                residual: t - r.distortion,
                monotone: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::from_points(pts, "wyner-ziv grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::*;
    use crate::prob::binary_entropy;

    #[test]
    fn binary_symmetric_closed_form() {
        let h = hamming(2);
        for dd in [0.0, 0.05, 0.11, 0.25, 0.4] {
            let p = rd_point(&[0.5, 0.5], &h, dd).unwrap();
            assert!(
                (p.rate - (1.0 - binary_entropy(dd))).abs() < 1e-6,
                "D={dd}: {}",
                p.rate
            );
            assert!(p.monotone);
        }
        assert_eq!(rd_function(&[0.5, 0.5], &h, 0.5).unwrap(), 0.0);
        assert_eq!(rd_function(&[0.5, 0.5], &h, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn skewed_binary_closed_form() {
        // R(D) = h(p) - h(D) for D < min(p, 1 - p)
        let h = hamming(2);
        for dd in [0.02, 0.1, 0.2] {
            let r = rd_function(&[0.7, 0.3], &h, dd).unwrap();
            assert!((r - (binary_entropy(0.3) - binary_entropy(dd))).abs() < 1e-6);
        }
        assert_eq!(rd_function(&[0.7, 0.3], &h, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn lossless_limit_is_entropy() {
        let p = [0.5, 0.25, 0.25];
        let r = rd_function(&p, &hamming(3), 0.0).unwrap();
        assert!((r - 1.5).abs() < 1e-9);
    }

    #[test]
    fn negative_target_rejected() {
        assert!(rd_function(&[0.5, 0.5], &hamming(2), -0.1).is_err());
        let d = DistortionMeasure::new(2, 2, vec![0.1, 1.0, 1.0, 0.1]).unwrap();
        assert!(matches!(
            rd_function(&[0.5, 0.5], &d, 0.05),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn wz_lossless_example2() {
        let src = preset_example2_source();
        let r = wz_function(&src, Terminal::One, &hamming(2), 0.0).unwrap();
        assert!((r.rate - 2.0 / 3.0).abs() < 1e-3, "{}", r.rate);
        assert_eq!(r.distortion, 0.0);
        let r2 = wz_function(&src, Terminal::Two, &hamming(2), 0.0).unwrap();
        assert!((r2.rate - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn wz_independent_side_information_matches_rd() {
        let src = preset_independent_bernoulli(0.3, 0.6).unwrap();
        let h = hamming(2);
        for dd in [0.05, 0.15] {
            let wz = wz_function(&src, Terminal::One, &h, dd).unwrap();
            let rd = rd_function(&[0.7, 0.3], &h, dd).unwrap();
            assert!((wz.rate - rd).abs() < 5e-3, "D={dd}: {} vs {rd}", wz.rate);
            assert!(wz.rate >= rd - 1e-9);
        }
    }

    #[test]
    fn wz_zero_at_large_distortion() {
        let src = preset_example2_source();
        let r = wz_function(&src, Terminal::One, &hamming(2), 1.0).unwrap();
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn wz_ternary_uses_coordinate_search() {
        let src = JointSource::from_table(3, 2, vec![0.2, 0.1, 0.05, 0.25, 0.3, 0.1]).unwrap();
        let h = hamming(3);
        let r = wz_function(&src, Terminal::One, &h, 0.0).unwrap();
        let oracle = src.law().conditional_entropy(&[0], &[1]).unwrap();
        assert!((r.rate - oracle).abs() < 1e-3, "{} vs {oracle}", r.rate);
        let rd = rd_function(src.marginal(Terminal::One).probs(), &h, 0.2).unwrap();
        let wz = wz_function(&src, Terminal::One, &h, 0.2).unwrap();
        assert!(wz.rate <= rd + 1e-3);
    }

    #[test]
    fn curves_are_monotone() {
        let h = hamming(2);
        let grid = [0.0, 0.05, 0.11, 0.25, 0.5];
        let c = rd_curve(&[0.5, 0.5], &h, &grid).unwrap();
        assert!(c.is_consistent());
        for (p, &dd) in c.points.iter().zip(&grid) {
            assert!((p.rate - (1.0 - binary_entropy(dd))).abs() < 1e-4);
        }
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("D,R,iterations,residual\n"));
        assert_eq!(text.lines().count(), 6);
        let w = wz_curve(
            &preset_example2_source(),
            Terminal::One,
            &h,
            &[0.3, 0.0, 0.1],
        )
        .unwrap();
        assert!(w.points.windows(2).all(|p| p[1].rate <= p[0].rate));
        assert_eq!(w.points[0].distortion, 0.0);
    }
}
