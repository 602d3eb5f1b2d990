//! Shared generators for randomized integration tests.

use extrap::bound::ErrorBound;
use extrap::data::Dataset;
use extrap::gp::Model;
use extrap::kernel::{Kernel, KernelFamily, KernelSpec, LengthScales};
use rand::rngs::StdRng;
use rand::Rng;

/// Distinct, well-separated points in `(0.05, 1]^d`: sampled from a
/// jittered grid so that Gram matrices stay comfortably factorizable.
pub fn random_points(rng: &mut StdRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let cells_per_axis: usize = if d == 1 { 32 } else { 8 };
    let total = cells_per_axis.pow(d as u32);
    assert!(n <= total);
    let mut chosen = Vec::with_capacity(n);
    while chosen.len() < n {
        let c = rng.random_range(0..total);
        if !chosen.contains(&c) {
            chosen.push(c);
        }
    }
    chosen
        .into_iter()
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let cell = c % cells_per_axis;
                    c /= cells_per_axis;
                    let lo = 0.06 + 0.94 * cell as f64 / cells_per_axis as f64;
                    let width = 0.94 / cells_per_axis as f64;
                    lo + rng.random_range(0.15..0.85) * width
                })
                .collect()
        })
        .collect()
}

pub fn random_values(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn random_model(rng: &mut StdRng, d: usize) -> Model {
    let family = match rng.random_range(0..3) {
        0 => KernelFamily::Matern,
        1 => KernelFamily::Wendland,
        _ => KernelFamily::Gaussian,
    };
    let s = rng.random_range(0..3u32);
    let ell: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let kernel =
        Kernel::radial(KernelSpec::new(family, s, LengthScales::new(ell).unwrap(), d).unwrap());
    let bound = if d == 1 || rng.random_bool(0.5) {
        ErrorBound::Monomial {
            order: *[1.0, 2.0].get(rng.random_range(0..2)).unwrap(),
            axis: rng.random_range(0..d),
        }
    } else {
        ErrorBound::Additive {
            weights: (0..d).map(|_| rng.random_range(0.5..2.0)).collect(),
            orders: (0..d)
                .map(|_| rng.random_range(0..2) as f64 + 1.0)
                .collect(),
        }
    };
    Model::new(bound, kernel)
}

pub fn random_dataset(rng: &mut StdRng, n: usize, d: usize) -> Dataset {
    Dataset::new(random_points(rng, n, d), random_values(rng, n)).unwrap()
}
