//! Seeded search for distortion pairs certified by the coded-channel
//! conditions, and time-sharing convexification.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::achievability::{
    lift_sscc, theorem1_from_law, ConditionReport, ConditionStatus, HanScheme, WZScheme,
};
use crate::coded::{Configuration, Dims};
use crate::error::{Error, Result};
use crate::markov::{
    build_kernel, optimal_reconstruction, reconstruction_distortions, stationary_distribution,
    STATIONARY_TOL,
};
use crate::models::{DistortionMeasure, JointSource, Terminal, TwoWayChannel};
use crate::prob::{shape_len, ConditionalPmf};

/// Origin of a candidate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Uncoded,
    HybridConstantU,
    CopyDelayed,
    CopyFresh,
    Sscc,
    Random,
}

/// A certified distortion pair.
#[derive(Debug, Clone)]
pub struct RegionPoint {
    pub d1: f64,
    pub d2: f64,
    pub certificate: Configuration,
    pub report: ConditionReport,
    /// Index in the candidate stream.
    pub candidate: usize,
    pub origin: Origin,
}

impl RegionPoint {
    pub fn is_boundary(&self) -> bool {
        self.report.status == ConditionStatus::Boundary
    }
}

/// Search settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Total number of candidates, structured ones included.
    pub budget: usize,
    pub seed: u64,
    /// Auxiliary alphabet sizes for random candidates (default `|S_j|`).
    pub u_sizes: Option<[usize; 2]>,
}

impl SearchOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            u_sizes: None,
        }
    }
}

fn constant_u(dims: &Dims) -> [ConditionalPmf; 2] {
    Terminal::BOTH.map(|j| ConditionalPmf::deterministic(&[dims.s[j.index()]], &[1], |_| 0))
}

fn copy_u(dims: &Dims) -> [ConditionalPmf; 2] {
    Terminal::BOTH.map(|j| {
        let n = dims.s[j.index()];
        ConditionalPmf::deterministic(&[n], &[n], |s| s)
    })
}

fn zero_g(dims: &Dims) -> [Vec<usize>; 2] {
    Terminal::BOTH.map(|j| vec![0; shape_len(&dims.g_shape(j))])
}

fn structured(
    ch: &TwoWayChannel,
    src: &JointSource,
    d: [&DistortionMeasure; 2],
) -> Vec<(Origin, Result<Configuration>)> {
    let mut out = Vec::new();
    let base = Dims::for_channel(src, ch, [1, 1]);
    let dims = Dims {
        shat: [d[0].recon_size(), d[1].recon_size()],
        ..base
    };
    let x = dims.x;
    out.push((
        Origin::Uncoded,
        Configuration::from_fns(
            dims,
            constant_u(&dims),
            None,
            |j, a| a.s % x[j.index()],
            |_, _| 0,
        ),
    ));
    out.push((
        Origin::HybridConstantU,
        Configuration::from_fns(
            dims,
            constant_u(&dims),
            None,
            |j, a| a.ts % x[j.index()],
            |_, _| 0,
        ),
    ));
    let cdims = Dims { u: dims.s, ..dims };
    out.push((
        Origin::CopyDelayed,
        Configuration::from_fns(
            cdims,
            copy_u(&cdims),
            None,
            |j, a| a.tu % x[j.index()],
            |_, _| 0,
        ),
    ));
    out.push((
        Origin::CopyFresh,
        Configuration::from_fns(
            cdims,
            copy_u(&cdims),
            None,
            |j, a| a.u % x[j.index()],
            |_, _| 0,
        ),
    ));
    out.push((Origin::Sscc, sscc_candidate(ch, src, d)));
    out
}

/// Lossless WZ compression with a memoryless uniform channel code.
fn sscc_candidate(
    ch: &TwoWayChannel,
    src: &JointSource,
    d: [&DistortionMeasure; 2],
) -> Result<Configuration> {
    let x = [ch.x_size(Terminal::One), ch.x_size(Terminal::Two)];
    let y = [ch.y_size(Terminal::One), ch.y_size(Terminal::Two)];
    let pv = x.map(|n| vec![1.0 / n as f64; n]);
    let han = HanScheme::from_fn(pv, x, y, |_, v, _, _| v)?;
    let wz = Terminal::BOTH.map(|j| {
        let n = src.size(j);
        let r = d[j.index()].recon_size();
        let side = src.size(j.other());
        let pt = ConditionalPmf::deterministic(&[n], &[n], |s| s);
        // reconstruct the best letter for each source symbol
        let h = (0..side * n)
            .map(|i| {
                let s = i % n;
                (0..r)
                    .min_by(|&a, &b| d[j.index()].d(s, a).total_cmp(&d[j.index()].d(s, b)))
                    .unwrap_or(0)
            })
            .collect();
        WZScheme::new(j, side, r, pt, h)
    });
    let [w1, w2] = wz;
    lift_sscc(&han, &w1?, &w2?, src, ch)
}

fn dirichlet_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v = vec![1.0 / n as f64; n];
    }
    v
}

/// Random configuration over `dims`: Dirichlet(1) rows for `P(U_j | S_j)`,
/// uniform `F_j` tables, zero reconstructions and no tilde law.
pub fn random_configuration(dims: &Dims, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    let pu = Terminal::BOTH.map(|j| {
        let k = j.index();
        let table: Vec<f64> = (0..dims.s[k])
            .flat_map(|_| dirichlet_row(rng, dims.u[k]))
            .collect();
        ConditionalPmf::from_shape(&[dims.s[k]], &[dims.u[k]], table)
    });
    let f = Terminal::BOTH.map(|j| {
        let n = shape_len(&dims.f_shape(j));
        let x = dims.x[j.index()];
        (0..n).map(|_| rng.random_range(0..x)).collect::<Vec<_>>()
    });
    let [p1, p2] = pu;
    Configuration::new(*dims, [p1?, p2?], None, f, zero_g(dims))
}

/// Installs the stationary tilde law (when the candidate has none) and the
/// Bayes reconstruction, then evaluates the conditions.
fn evaluate(
    cfg: Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
    d: [&DistortionMeasure; 2],
    keep_g: bool,
) -> Result<(Configuration, ConditionReport, (f64, f64))> {
    let sys = build_kernel(&cfg, ch, src)?;
    let law = match cfg.p_tilde() {
        Some(t) => Some(sys.law_from_tilde(t)?).filter(|l| l.is_stationary()),
        None => None,
    };
    let law = match law {
        Some(l) => l,
        None => stationary_distribution(&sys)?,
    };
    let mut cfg = cfg.with_p_tilde(law.tilde())?;
    if !keep_g {
        let g = optimal_reconstruction(&law, &cfg, d[0], d[1])?;
        cfg = cfg.with_g(g)?;
    }
    let dist = reconstruction_distortions(&law, &cfg, d[0], d[1])?;
    let (report, _, _) = theorem1_from_law(&law)?;
    Ok((cfg, report, dist))
}

/// Uncoded configuration `X_j = S_j mod |X_j|` with constant `U`, the
/// stationary tilde law and Bayes reconstructions.
pub fn uncoded_configuration(
    ch: &TwoWayChannel,
    src: &JointSource,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
) -> Result<Configuration> {
    let d = [d1, d2];
    let (_, cfg) = structured(ch, src, d)
        .into_iter()
        .next()
        .expect("uncoded candidate comes first");
    Ok(evaluate(cfg?, ch, src, d, false)?.0)
}

/// Keeps Pareto-minimal points; ties prefer strict satisfaction, then the
/// earlier candidate.
fn pareto_min(mut pts: Vec<RegionPoint>) -> Vec<RegionPoint> {
    pts.sort_by(|a, b| {
        a.d1.total_cmp(&b.d1)
            .then(a.d2.total_cmp(&b.d2))
            .then(a.is_boundary().cmp(&b.is_boundary()))
            .then(a.candidate.cmp(&b.candidate))
    });
    let mut out: Vec<RegionPoint> = Vec::new();
    let mut best = f64::INFINITY;
    for p in pts {
        if p.d2 < best {
            best = p.d2;
            out.push(p);
        }
    }
    out
}

/// Seeded search over configurations. Structured candidates come first and
/// are always evaluated; the rest of the budget goes to random draws with
/// Dirichlet(1) conditionals, uniform encoder tables and Bayes
/// reconstructions. Candidate `i` draws from its own stream of the seeded
/// generator, so the result does not depend on the worker count.
pub fn search_region(
    ch: &TwoWayChannel,
    src: &JointSource,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
    opts: SearchOptions,
) -> Result<Vec<RegionPoint>> {
    let d = [d1, d2];
    for j in Terminal::BOTH {
        if d[j.index()].source_size() != src.size(j) {
            return Err(Error::AlphabetMismatch(format!(
                "distortion measure {} and source",
                j.index() + 1
            )));
        }
    }
    let fixed = structured(ch, src, d);
    let n_fixed = fixed.len();
    let n_random = opts.budget.saturating_sub(n_fixed);
    let u = opts
        .u_sizes
        .unwrap_or([src.size(Terminal::One), src.size(Terminal::Two)]);
    let dims = Dims {
        shat: [d1.recon_size(), d2.recon_size()],
        ..Dims::for_channel(src, ch, u)
    };

    let mut fixed_results: Vec<Option<RegionPoint>> = fixed
        .into_par_iter()
        .enumerate()
        .map(|(i, (origin, cfg))| {
            let keep_g = origin == Origin::Sscc;
            let (cfg, report, dist) = evaluate(cfg.ok()?, ch, src, d, keep_g).ok()?;
            Some(RegionPoint {
                d1: dist.0,
                d2: dist.1,
                certificate: cfg,
                report,
                candidate: i,
                origin,
            })
        })
        .collect();
    let random_results: Vec<Option<RegionPoint>> = (0..n_random)
        .into_par_iter()
        .map(|r| {
            let i = n_fixed + r;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let cfg = random_configuration(&dims, &mut rng).ok()?;
            let (cfg, report, dist) = evaluate(cfg, ch, src, d, false).ok()?;
            Some(RegionPoint {
                d1: dist.0,
                d2: dist.1,
                certificate: cfg,
                report,
                candidate: i,
                origin: Origin::Random,
            })
        })
        .collect();
    fixed_results.extend(random_results);
    let kept: Vec<RegionPoint> = fixed_results
        .into_iter()
        .flatten()
        .filter(|p| p.report.status != ConditionStatus::Unsatisfied)
        .collect();
    Ok(pareto_min(kept))
}

/// Recomputes a point from its certificate.
pub fn verify_point(
    p: &RegionPoint,
    ch: &TwoWayChannel,
    src: &JointSource,
    d1: &DistortionMeasure,
    d2: &DistortionMeasure,
) -> Result<bool> {
    let sys = build_kernel(&p.certificate, ch, src)?;
    let tilde = p.certificate.p_tilde().ok_or(Error::MissingTilde)?;
    let law = sys.law_from_tilde(tilde)?;
    if law.residual() > STATIONARY_TOL {
        return Ok(false);
    }
    let (report, _, _) = theorem1_from_law(&law)?;
    let dist = reconstruction_distortions(&law, &p.certificate, d1, d2)?;
    Ok(report.status != ConditionStatus::Unsatisfied
        && (report.margin - p.report.margin).abs() <= 1e-9
        && (dist.0 - p.d1).abs() <= 1e-9
        && (dist.1 - p.d2).abs() <= 1e-9)
}

/// Vertices of the lower-left convex hull of `points`, by increasing `d1`.
pub fn convexify(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut pareto: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if pareto.last().is_none_or(|l| p.1 < l.1) {
            pareto.push(p);
        }
    }
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pareto {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Smallest `d2` reachable by time-sharing at `d1`, or `None` left of the
/// hull.
pub fn hull_value(hull: &[(f64, f64)], d1: f64) -> Option<f64> {
    let first = hull.first()?;
    if d1 < first.0 {
        return None;
    }
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if d1 <= b.0 {
            let t = (d1 - a.0) / (b.0 - a.0);
            return Some(a.1 + t * (b.1 - a.1));
        }
    }
    hull.last().map(|p| p.1)
}

/// CSV with columns `d1,d2,margin,boundary_flag,certificate`.
pub fn write_region_csv(
    mut w: impl Write,
    points: &[RegionPoint],
    certificates: &[String],
) -> std::io::Result<()> {
    writeln!(w, "d1,d2,margin,boundary_flag,certificate")?;
    for (i, p) in points.iter().enumerate() {
        let path = certificates.get(i).map(String::as_str).unwrap_or("");
        writeln!(
            w,
            "{},{},{},{},{}",
            p.d1,
            p.d2,
            p.report.margin,
            u8::from(p.is_boundary()),
            path
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::*;

    #[test]
    fn bit_pipes_reach_zero_distortion() {
        let ch = preset_crossed_bit_pipes();
        let src = preset_independent_bernoulli(0.3, 0.8).unwrap();
        let h = hamming(2);
        let pts = search_region(&ch, &src, &h, &h, SearchOptions::new(40, 1)).unwrap();
        let zero = pts
            .iter()
            .find(|p| p.d1 == 0.0 && p.d2 == 0.0)
            .expect("lossless point");
        assert!(verify_point(zero, &ch, &src, &h, &h).unwrap());
        for p in &pts {
            assert!(verify_point(p, &ch, &src, &h, &h).unwrap());
        }
    }

    #[test]
    fn bmc_example2_contains_the_uncoded_point() {
        let ch = preset_bmc();
        let src = preset_example2_source();
        let h = hamming(2);
        let pts = search_region(&ch, &src, &h, &h, SearchOptions::new(10, 3)).unwrap();
        let p = &pts[0];
        assert_eq!((p.d1, p.d2), (0.0, 0.0));
        assert!(p.is_boundary());
        assert_eq!(p.origin, Origin::Uncoded);
    }

    #[test]
    fn same_seed_same_points() {
        let ch = preset_bmc();
        let src = preset_independent_bernoulli(0.4, 0.6).unwrap();
        let h = hamming(2);
        let run = |seed| {
            search_region(&ch, &src, &h, &h, SearchOptions::new(30, seed))
                .unwrap()
                .into_iter()
                .map(|p| (p.d1, p.d2, p.candidate))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn pareto_points_are_not_dominated() {
        let ch = preset_bmc();
        let src = preset_independent_bernoulli(0.4, 0.6).unwrap();
        let h = hamming(2);
        let pts = search_region(&ch, &src, &h, &h, SearchOptions::new(30, 5)).unwrap();
        for a in &pts {
            for b in &pts {
                if a.candidate != b.candidate {
                    assert!(!(b.d1 <= a.d1 && b.d2 <= a.d2));
                }
            }
        }
    }

    #[test]
    fn convexify_examples() {
        let h = convexify(&[(0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(h, vec![(0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(hull_value(&h, 0.5), Some(0.5));
        assert_eq!(convexify(&[(0.3, 0.4)]), vec![(0.3, 0.4)]);
        // dominated and above-chord points removed
        let h = convexify(&[(0.0, 1.0), (0.5, 0.6), (0.6, 0.9), (1.0, 0.0)]);
        assert_eq!(h, vec![(0.0, 1.0), (1.0, 0.0)]);
        let h = convexify(&[(0.0, 1.0), (0.4, 0.2), (1.0, 0.0)]);
        assert_eq!(h.len(), 3);
    }

    #[test]
    fn csv_layout() {
        let ch = preset_bmc();
        let src = preset_example2_source();
        let h = hamming(2);
        let pts = search_region(&ch, &src, &h, &h, SearchOptions::new(5, 0)).unwrap();
        let mut buf = Vec::new();
        let names: Vec<String> = (0..pts.len()).map(|i| format!("c{i}.json")).collect();
        write_region_csv(&mut buf, &pts, &names).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("d1,d2,margin,boundary_flag,certificate\n0,0,0,1,c0.json"));
    }
}
