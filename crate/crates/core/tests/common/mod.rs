//! Oracles and fixtures shared by the integration and acceptance tests. The
//! oracles are independent of the library's kernels: plain f64 arithmetic
//! over the flat weight layout.
#![allow(dead_code)]

use glycemlp::dataset::{split_by_sex, synth_dataset, train_test_split, Signal};
use glycemlp::{Dataset, Network, NetworkConfig, SplitPair, SubsetTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
/// Denominator floor for relative error, so weights whose true gradient is
/// essentially zero are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Squared-error loss of a one-hidden-layer sigmoid net, entirely in f64.
/// Row `j` of a layer holds its input weights followed by the bias.
pub fn oracle_loss(w_ih: &[f64], w_ho: &[f64], n_in: usize, n_hid: usize, x: &[f32], target: f64) -> f64 {
    let hidden: Vec<f64> = (0..n_hid)
        .map(|j| {
            let row = &w_ih[j * (n_in + 1)..(j + 1) * (n_in + 1)];
            let z: f64 = x.iter().zip(row).map(|(&xi, &w)| f64::from(xi) * w).sum::<f64>() + row[n_in];
            sigmoid(z)
        })
        .collect();
    let z: f64 = hidden.iter().zip(w_ho).map(|(h, w)| h * w).sum::<f64>() + w_ho[n_hid];
    0.5 * (target - sigmoid(z)).powi(2)
}

/// Central finite differences for every weight of `net`.
pub fn numeric_gradients(net: &Network, x: &[f32], target: f64) -> (Vec<f64>, Vec<f64>) {
    let (n_in, n_hid) = (net.config().input_dim, net.config().hidden_dim);
    let mut w_ih: Vec<f64> = net.w_ih().iter().map(|&w| f64::from(w)).collect();
    let mut w_ho: Vec<f64> = net.w_ho().iter().map(|&w| f64::from(w)).collect();
    let mut g_ih = vec![0.0; w_ih.len()];
    let mut g_ho = vec![0.0; w_ho.len()];
    for k in 0..w_ih.len() {
        let w = w_ih[k];
        w_ih[k] = w + FD_STEP;
        let up = oracle_loss(&w_ih, &w_ho, n_in, n_hid, x, target);
        w_ih[k] = w - FD_STEP;
        let down = oracle_loss(&w_ih, &w_ho, n_in, n_hid, x, target);
        w_ih[k] = w;
        g_ih[k] = (up - down) / (2.0 * FD_STEP);
    }
    for k in 0..w_ho.len() {
        let w = w_ho[k];
        w_ho[k] = w + FD_STEP;
        let up = oracle_loss(&w_ih, &w_ho, n_in, n_hid, x, target);
        w_ho[k] = w - FD_STEP;
        let down = oracle_loss(&w_ih, &w_ho, n_in, n_hid, x, target);
        w_ho[k] = w;
        g_ho[k] = (up - down) / (2.0 * FD_STEP);
    }
    (g_ih, g_ho)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Worst relative error over every weight for `instances` random
/// (instance, target) pairs on a freshly seeded `n_in`-`n_hid`-1 net.
pub fn gradient_check(n_in: usize, n_hid: usize, seed: u64, instances: usize) -> f64 {
    let net = Network::init(NetworkConfig::new(n_in).with_hidden_dim(n_hid).with_seed(seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let x: Vec<f32> = (0..n_in).map(|_| rng.random::<f32>()).collect();
        let target = if rng.random::<bool>() { 1.0f32 } else { 0.0 };
        let analytic = net.gradients(&x, target).unwrap();
        let (n_ih, n_ho) = numeric_gradients(&net, &x, f64::from(target));
        for (a, n) in analytic.w_ih.iter().zip(&n_ih).chain(analytic.w_ho.iter().zip(&n_ho)) {
            worst = worst.max(relative_error(*a, *n));
        }
    }
    worst
}

/// One sex subset of a synthetic 120-participant table, split 75/25 and
/// normalized. Seed drives generation and the split.
pub fn sex_split(seed: u64, signal: Signal, subset: SubsetTag) -> SplitPair {
    let records = synth_dataset(120, seed, signal).unwrap();
    let (male, female) = split_by_sex(&records);
    let rows = match subset {
        SubsetTag::Male => male,
        SubsetTag::Female => female,
        _ => records,
    };
    let d = Dataset::from_records(&rows, subset).unwrap();
    train_test_split(&d, 0.75, seed).unwrap().normalized().unwrap()
}

pub fn weight_bytes(net: &Network) -> Vec<u8> {
    net.w_ih()
        .iter()
        .chain(net.w_ho())
        .flat_map(|w| w.to_le_bytes())
        .collect()
}
