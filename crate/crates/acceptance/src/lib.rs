//! Shared generators for the acceptance suite: random but well-separated
//! datasets whose Gram systems double precision can resolve.

use extrap::bound::ErrorBound;
use extrap::data::Dataset;
use extrap::gp::Model;
use extrap::kernel::{Kernel, KernelFamily, KernelSpec, LengthScales};
use rand::rngs::StdRng;
use rand::Rng;

/// Distinct points on a jittered grid over (0.05, 1]^d with generous
/// separation.
pub fn separated_points(rng: &mut StdRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let cells: usize = if d == 1 { 16 } else { 6 };
    let total = cells.pow(d as u32);
    assert!(n <= total);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
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
                    let cell = c % cells;
                    c /= cells;
                    let lo = 0.06 + 0.94 * cell as f64 / cells as f64;
                    let width = 0.94 / cells as f64;
                    lo + rng.random_range(0.3..0.7) * width
                })
                .collect()
        })
        .collect()
}

/// A random model whose Gram matrix stays well-conditioned for the
/// generated point separations: smooth families get shorter length
/// scales and the smoothness stays at or below two.
pub fn tame_model(rng: &mut StdRng, d: usize) -> Model {
    let family = match rng.random_range(0..3) {
        0 => KernelFamily::Matern,
        1 => KernelFamily::Wendland,
        _ => KernelFamily::Gaussian,
    };
    let s = rng.random_range(0..3u32);
    let ell_hi = match family {
        KernelFamily::Gaussian => 0.5,
        _ => 1.2,
    };
    let ell: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..ell_hi)).collect();
    let kernel =
        Kernel::radial(KernelSpec::new(family, s, LengthScales::new(ell).unwrap(), d).unwrap());
    let bound = ErrorBound::Monomial {
        order: if rng.random_bool(0.5) { 1.0 } else { 2.0 },
        axis: rng.random_range(0..d),
    };
    Model::new(bound, kernel)
}

pub fn random_dataset(rng: &mut StdRng, n: usize, d: usize) -> Dataset {
    let points = separated_points(rng, n, d);
    let values = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Dataset::new(points, values).unwrap()
}
