//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p twoway-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoway_core::achievability::{
    eval_corollary1, eval_hybrid, eval_theorem1_full, lift_hybrid, lift_sscc,
    shannon_nonadaptive_bound, wz_scheme_rate, GridSpec, HanScheme, HybridScheme, WZScheme,
    DEFAULT_Q_SIZE,
};
use twoway_core::coded::{Configuration, Dims};
use twoway_core::markov::{build_kernel, find_stationary_tilde, in_Pi_Z};
use twoway_core::models::*;
use twoway_core::prob::{binary_entropy, ConditionalPmf};
use twoway_core::rd::{rd_function, wz_function};
use twoway_core::region::{random_configuration, uncoded_configuration};
use twoway_core::sim::{run_simulation, SimParams};

struct Suite {
    failures: usize,
}

impl Suite {
    fn record(&mut self, id: &str, what: &str, ok: bool, detail: String, start: Instant) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!(
            "{tag} {id} {what}: {detail} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
        if !ok {
            self.failures += 1;
        }
    }

    /// Runs `f`, turning a library error into a failed line.
    fn run(&mut self, id: &str, what: &str, f: impl FnOnce() -> Result<(bool, String), String>) {
        let start = Instant::now();
        match f() {
            Ok((ok, detail)) => self.record(id, what, ok, detail, start),
            Err(e) => self.record(id, what, false, format!("error: {e}"), start),
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
        .collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ConditionalPmf {
    let table = (0..rows).flat_map(|_| dirichlet(rng, cols)).collect();
    ConditionalPmf::from_shape(&[rows], &[cols], table).expect("normalized rows")
}

/// Binary two-way channel with a random full-support law.
fn random_binary_channel(rng: &mut ChaCha8Rng) -> TwoWayChannel {
    let rows: Vec<Vec<f64>> = (0..4).map(|_| dirichlet(rng, 4)).collect();
    TwoWayChannel::from_fn([2, 2, 2, 2], |x1, x2| {
        let r = &rows[2 * x1 + x2];
        (0..4).map(|k| (k / 2, k % 2, r[k])).collect()
    })
    .expect("valid channel")
}

fn random_binary_source(rng: &mut ChaCha8Rng) -> JointSource {
    JointSource::from_table(2, 2, dirichlet(rng, 4)).expect("valid source")
}

fn table(rng: &mut ChaCha8Rng, len: usize, range: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..range)).collect()
}

fn ac1(suite: &mut Suite) {
    suite.run("AC1", "entropy of Ber(0.89)", || {
        let h = binary_entropy(0.89);
        Ok((
            (h - 0.4999).abs() <= 1e-3,
            format!("H = {h:.6}, target 0.4999 +/- 1e-3"),
        ))
    });
}

fn ac2(suite: &mut Suite) {
    suite.run("AC2", "example2 conditional entropies and WZ at D=0", || {
        let src = preset_example2_source();
        let h12 = src.law().conditional_entropy(&[0], &[1]).map_err(err)?;
        let h21 = src.law().conditional_entropy(&[1], &[0]).map_err(err)?;
        let target = 2.0 / 3.0;
        let wz = wz_function(&src, Terminal::One, &hamming(2), 0.0).map_err(err)?;
        let wz2 = wz_function(&src, Terminal::Two, &hamming(2), 0.0).map_err(err)?;
        let ok = (h12 - target).abs() <= 1e-9
            && (h21 - target).abs() <= 1e-9
            && (wz.rate - 0.6667).abs() <= 1e-3
            && (wz2.rate - 0.6667).abs() <= 1e-3;
        Ok((
            ok,
            format!(
                "H(S1|S2) = {h12:.9}, H(S2|S1) = {h21:.9} (+/- 1e-9); R_WZ(0) = ({:.6}, {:.6}) (+/- 1e-3)",
                wz.rate, wz2.rate
            ),
        ))
    });
}

fn ac3(suite: &mut Suite) {
    suite.run("AC3", "uncoded example2 over the BMC is lossless", || {
        let (cfg, ch, src) = common::uncoded_bmc();
        let h = hamming(2);
        let pz = in_Pi_Z(&cfg, &ch, &src, &h, &h, 0.0, 0.0);
        let params = SimParams::new(64, 3, 0.5, 0.25, [0.0, 0.0])
            .with_seed(2024)
            .with_trials(500);
        let rep = run_simulation(&cfg, &ch, &src, &h, &h, &params).map_err(err)?;
        let ok = pz.member && rep.distortions == [0.0, 0.0];
        Ok((
            ok,
            format!(
                "in_Pi_Z(0,0) = {}; empirical distortions {:?} over {} trials (n=64, B=3), exact",
                pz.member, rep.distortions, params.trials
            ),
        ))
    });
}

/// Golden-section maximum of `a h_b(a)` on `[0, 1]`.
fn bmc_oracle() -> f64 {
    let f = |a: f64| a * binary_entropy(a);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    f((lo + hi) / 2.0)
}

fn ac4(suite: &mut Suite) {
    suite.run("AC4", "non-adaptive symmetric maximum on the BMC", || {
        let b = shannon_nonadaptive_bound(&preset_bmc(), DEFAULT_Q_SIZE, GridSpec::default())
            .map_err(err)?;
        let oracle = bmc_oracle();
        let r = b.symmetric_max;
        let ok = (r - 0.617).abs() <= 2e-3 && (r - oracle).abs() <= 2e-3 && r < 0.646;
        Ok((
            ok,
            format!("max = {r:.6}, oracle max a*h(a) = {oracle:.6}, target 0.617 +/- 0.002, below 0.646"),
        ))
    });
}

fn ac5(suite: &mut Suite) {
    suite.run("AC5", "reductions of hybrid and SSCC schemes", || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = hamming(2);
        let mut worst_hybrid: f64 = 0.0;
        let hybrids = 120;
        for _ in 0..hybrids {
            let ch = random_binary_channel(&mut rng);
            let src = random_binary_source(&mut rng);
            let dims = Dims::new([2, 2], [2, 2], [2, 2], [2, 2]);
            let pu = [random_rows(&mut rng, 2, 2), random_rows(&mut rng, 2, 2)];
            let f = [table(&mut rng, 4, 2), table(&mut rng, 4, 2)];
            let g = [table(&mut rng, 16, 2), table(&mut rng, 16, 2)];
            let hs = HybridScheme::new(dims, pu, f, g).map_err(err)?;
            let one = eval_hybrid(&hs, &ch, &src, &h, &h).map_err(err)?;
            let cfg = lift_hybrid(&hs, &ch, &src).map_err(err)?;
            let t = eval_theorem1_full(&cfg, &ch, &src).map_err(err)?;
            worst_hybrid = worst_hybrid.max(t.reduced.max_abs_diff(&one.report));
        }
        let mut worst_sscc: f64 = 0.0;
        let sscc = 30;
        for _ in 0..sscc {
            let ch = random_binary_channel(&mut rng);
            let src = random_binary_source(&mut rng);
            let han = HanScheme::new(
                [dirichlet(&mut rng, 2), dirichlet(&mut rng, 2)],
                [2, 2],
                [2, 2],
                [table(&mut rng, 16, 2), table(&mut rng, 16, 2)],
            )
            .map_err(err)?;
            let wz = Terminal::BOTH.map(|j| {
                WZScheme::new(j, 2, 2, random_rows(&mut rng, 2, 2), table(&mut rng, 4, 2))
            });
            let [w1, w2] = wz;
            let (w1, w2) = (w1.map_err(err)?, w2.map_err(err)?);
            let r1 = wz_scheme_rate(&src, &w1).map_err(err)?;
            let r2 = wz_scheme_rate(&src, &w2).map_err(err)?;
            let cor = eval_corollary1(&han, r1, r2, &ch).map_err(err)?;
            let cfg = lift_sscc(&han, &w1, &w2, &src, &ch).map_err(err)?;
            let t = eval_theorem1_full(&cfg, &ch, &src).map_err(err)?;
            worst_sscc = worst_sscc.max(t.reduced.max_abs_diff(&cor));
        }
        let ok = worst_hybrid <= 1e-9 && worst_sscc <= 1e-9;
        Ok((
            ok,
            format!(
                "max |diff| {worst_hybrid:.2e} over {hybrids} hybrid, {worst_sscc:.2e} over {sscc} SSCC (tol 1e-9)"
            ),
        ))
    });
}

/// Residual and pair gap of the tilde law returned by the solver.
fn stationarity(
    cfg: &Configuration,
    ch: &TwoWayChannel,
    src: &JointSource,
) -> Result<(f64, f64), String> {
    let tilde = find_stationary_tilde(cfg, ch, src).map_err(err)?;
    let law = build_kernel(cfg, ch, src)
        .map_err(err)?
        .law_from_tilde(&tilde)
        .map_err(err)?;
    Ok((law.residual(), law.consecutive_pair_gap()))
}

fn ac6(suite: &mut Suite) {
    suite.run("AC6", "stationary tilde laws", || {
        let channels = [preset_bmc(), preset_dueck(), preset_crossed_bit_pipes()];
        let sources = [
            preset_example2_source(),
            preset_independent_bernoulli(0.89, 0.89).map_err(err)?,
        ];
        let h = hamming(2);
        let mut cases: Vec<(Configuration, TwoWayChannel, JointSource)> = Vec::new();
        for ch in &channels {
            for src in &sources {
                let cfg = uncoded_configuration(ch, src, &h, &h).map_err(err)?;
                cases.push((cfg, ch.clone(), src.clone()));
            }
        }
        cases.push(common::pipe_config(0.5));
        cases.push(common::copy_pipe_config());
        let presets = cases.len();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in 0..100 {
            let ch = match i % 3 {
                0 => preset_bmc(),
                1 => preset_crossed_bit_pipes(),
                _ => random_binary_channel(&mut rng),
            };
            let src = random_binary_source(&mut rng);
            let u = [rng.random_range(1..=3), rng.random_range(1..=3)];
            let dims = Dims::for_channel(&src, &ch, u);
            let cfg = random_configuration(&dims, &mut rng).map_err(err)?;
            cases.push((cfg, ch, src));
        }
        let (mut res, mut gap): (f64, f64) = (0.0, 0.0);
        for (cfg, ch, src) in &cases {
            let (r, g) = stationarity(cfg, ch, src)?;
            res = res.max(r);
            gap = gap.max(g);
        }
        Ok((
            res <= 1e-10 && gap <= 1e-10,
            format!(
                "{presets} preset and 100 random configurations; max residual {res:.2e}, max pair gap {gap:.2e} (tol 1e-10)"
            ),
        ))
    });
}

fn ac7(suite: &mut Suite) {
    suite.run("AC7", "binary symmetric R(D) against 1 - h(D)", || {
        let mut worst: f64 = 0.0;
        for d in [0.0, 0.05, 0.11, 0.25, 0.5] {
            let r = rd_function(&[0.5, 0.5], &hamming(2), d).map_err(err)?;
            worst = worst.max((r - (1.0 - binary_entropy(d))).abs());
        }
        Ok((
            worst <= 1e-4,
            format!("max |R - (1 - h(D))| = {worst:.2e} (tol 1e-4)"),
        ))
    });
}

fn ac8(suite: &mut Suite) {
    suite.run("AC8", "simulated error frequency decreases with n", || {
        let (cfg, ch, src) = common::pipe_config(0.5);
        let margin = eval_theorem1_full(&cfg, &ch, &src).map_err(err)?.report.margin;
        let h = hamming(2);
        let mut freq = Vec::new();
        let (mut applicable, mut violations) = (0, 0);
        for n in [64, 256] {
            let params = SimParams::new(n, 3, 0.5, 0.25, [1.0 / 32.0, 1.0 / 32.0])
                .with_seed(8)
                .with_trials(500);
            let rep = run_simulation(&cfg, &ch, &src, &h, &h, &params).map_err(err)?;
            freq.push(rep.error_frequency);
            applicable += rep.index_check_applicable;
            violations += rep.index_check_violations;
        }
        let ok = margin >= 0.1 && freq[1] < freq[0] && applicable > 0 && violations == 0;
        Ok((
            ok,
            format!(
                "margin {margin:.3} bits; error frequency {:.3} (n=64) -> {:.3} (n=256), 500 trials each, B=3; \
                 correct-index claim held in {}/{applicable} applicable decodes",
                freq[0],
                freq[1],
                applicable - violations
            ),
        ))
    });
}

fn ac9(suite: &mut Suite) {
    suite.run("AC9", "Dueck channel machinery", || {
        let ch = preset_dueck();
        let bound =
            shannon_nonadaptive_bound(&ch, DEFAULT_Q_SIZE, GridSpec::default()).map_err(err)?;
        // memoryless uniform inputs
        let han = HanScheme::from_fn(
            [vec![0.25; 4], vec![0.25; 4]],
            [4, 4],
            [8, 8],
            |_, v, _, _| v,
        )
        .map_err(err)?;
        let r = eval_corollary1(&han, 0.5, 0.5, &ch).map_err(err)?;
        let finite = [r.lhs1, r.rhs1, r.lhs2, r.rhs2].iter().all(|q| q.is_finite());
        let ok = bound.symmetric_max.is_finite() && bound.symmetric_max > 0.0 && finite;
        Ok((
            ok,
            format!(
                "non-adaptive symmetric max {:.4}; memoryless Han code gives lhs ({:.3}, {:.3}), rhs ({:.4}, {:.4})",
                bound.symmetric_max, r.lhs1, r.lhs2, r.rhs1, r.rhs2
            ),
        ))
    });
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    ac1(&mut suite);
    ac2(&mut suite);
    ac3(&mut suite);
    ac4(&mut suite);
    ac5(&mut suite);
    ac6(&mut suite);
    ac7(&mut suite);
    ac8(&mut suite);
    ac9(&mut suite);
    if suite.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
