#![allow(dead_code)]

use hybridrl::data::{Domain, Transition};
use hybridrl::numcore::{Activation, ApproximatorParams};
use hybridrl::ratio::{DiscriminatorPair, RatioConfig};
use hybridrl::SimRng;
use rand::{Rng, SeedableRng};

pub const FD_STEP: f64 = 1e-5;

/// Central differences of `f` around `x`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest componentwise relative error, with components where both sides are
/// below `floor` treated as agreeing.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale < floor {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Randomly initialized relu network with every parameter, biases included,
/// jittered off zero so that no pre-activation sits exactly on a kink.
pub fn net(sizes: &[usize], seed: u64) -> ApproximatorParams {
    let mut r = rng(seed);
    let mut p = ApproximatorParams::init(sizes.to_vec(), Activation::Relu, &mut r).unwrap();
    for v in p.values_mut() {
        *v += r.random_range(-0.2..0.2);
    }
    p
}

/// Random transition with the given dimensions and domain.
pub fn transition(sd: usize, ad: usize, domain: Domain, rng: &mut SimRng) -> Transition {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    Transition {
        s: v(sd),
        a: v(ad),
        r: v(1)[0],
        s_next: v(sd),
        terminal: false,
        domain,
    }
}

/// Discriminators on 1-d states and actions with constant logits.
pub fn constant_pair(logit_sa: f64, logit_sas: f64) -> DiscriminatorPair {
    let mut pair = DiscriminatorPair::new(1, 1, &[3], RatioConfig::default(), &mut rng(50)).unwrap();
    for (net, z) in [(&mut pair.sa_net, logit_sa), (&mut pair.sas_net, logit_sas)] {
        let v = net.params.values_mut();
        v.fill(0.0);
        *v.last_mut().unwrap() = z;
    }
    pair
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
