#![allow(dead_code)]

use twoway_core::coded::{Configuration, Dims};
use twoway_core::markov::find_stationary_tilde;
use twoway_core::models::*;
use twoway_core::prob::ConditionalPmf;
use twoway_core::region::uncoded_configuration;

/// Crossed bit pipes carrying a fresh `U_j ~ Ber(p1)` independent of a
/// constant source: `X_j = U_j`, reconstruction 0.
pub fn pipe_config(p1: f64) -> (Configuration, TwoWayChannel, JointSource) {
    let ch = preset_crossed_bit_pipes();
    let src = preset_independent_bernoulli(0.0, 0.0).unwrap();
    let dims = Dims::for_channel(&src, &ch, [2, 2]);
    let row = vec![1.0 - p1, p1, 1.0 - p1, p1];
    let pu = [0, 1].map(|_| ConditionalPmf::from_shape(&[2], &[2], row.clone()).unwrap());
    let cfg = Configuration::from_fns(dims, pu, None, |_, a| a.u, |_, _| 0).unwrap();
    let tilde = find_stationary_tilde(&cfg, &ch, &src).unwrap();
    (cfg.with_p_tilde(tilde).unwrap(), ch, src)
}

/// Crossed bit pipes with `U_j` a copy of a `Ber(1/2)` source and
/// `X_j = U_j`; `G` reads the other codeword.
pub fn copy_pipe_config() -> (Configuration, TwoWayChannel, JointSource) {
    let ch = preset_crossed_bit_pipes();
    let src = preset_independent_bernoulli(0.5, 0.5).unwrap();
    let dims = Dims::for_channel(&src, &ch, [2, 2]);
    let pu = [0, 1].map(|_| ConditionalPmf::deterministic(&[2], &[2], |s| s));
    let cfg = Configuration::from_fns(dims, pu, None, |_, a| a.u, |_, a| a.tu_other).unwrap();
    let tilde = find_stationary_tilde(&cfg, &ch, &src).unwrap();
    (cfg.with_p_tilde(tilde).unwrap(), ch, src)
}

/// Uncoded transmission of the `example2` source over the binary
/// multiplying channel.
pub fn uncoded_bmc() -> (Configuration, TwoWayChannel, JointSource) {
    let ch = preset_bmc();
    let src = preset_example2_source();
    let h = hamming(2);
    let cfg = uncoded_configuration(&ch, &src, &h, &h).unwrap();
    (cfg, ch, src)
}
