//! Space-filling diagnostics for fidelity designs on the unit box.

use crate::error::{Error, Result};

/// Box fill distance of a point set in `[0,1]^d`: the supremum edge length
/// of an axis-aligned cube `[a, a + ν·1] ⊆ [0,1]^d` containing none of the
/// points.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoxFill {
    pub value: f64,
    /// Exact in one dimension; a lattice-search lower bound otherwise.
    pub exact: bool,
}

/// Compute the box fill distance. One-dimensional inputs are handled
/// exactly as the largest gap between consecutive sorted points, with the
/// domain endpoints 0 and 1 acting as gap boundaries. In higher dimensions
/// a lower bound is computed by maximizing over anchor points on a capped
/// lattice plus seeded random anchors, and flagged as approximate.
pub fn box_fill_distance(points: &[Vec<f64>], dim: usize, seed: u64) -> Result<BoxFill> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim".into(),
            reason: "dimension must be at least 1".into(),
        });
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "box fill distance",
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::InvalidData(format!(
                "point {i} lies outside [0,1]^{dim}"
            )));
        }
    }

    if dim == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        let mut best: f64 = 0.0;
        let mut prev = 0.0;
        for &x in &xs {
            best = best.max(x - prev);
            prev = x;
        }
        best = best.max(1.0 - prev);
        return Ok(BoxFill {
            value: best,
            exact: true,
        });
    }

    // Anchor lattice with at most 64^d sites for small d; per-axis
    // resolution shrinks for larger d to keep the total bounded.
    let per_axis = ((1usize << 18) as f64).powf(1.0 / dim as f64).floor() as usize;
    let per_axis = per_axis.clamp(4, 64);
    let total = per_axis.pow(dim as u32);

    let empty_size = |anchor: &[f64]| -> f64 {
        let cap = 1.0 - anchor.iter().cloned().fold(0.0f64, f64::max);
        let mut nu = cap;
        for p in points {
            if p.iter().zip(anchor).all(|(&c, &a)| c >= a) {
                let reach = p
                    .iter()
                    .zip(anchor)
                    .map(|(&c, &a)| c - a)
                    .fold(0.0f64, f64::max);
                nu = nu.min(reach);
            }
        }
        nu.max(0.0)
    };

    let mut best: f64 = 0.0;
    let mut anchor = vec![0.0; dim];
    for idx in 0..total {
        let mut rem = idx;
        for a in anchor.iter_mut() {
            *a = (rem % per_axis) as f64 / per_axis as f64;
            rem /= per_axis;
        }
        best = best.max(empty_size(&anchor));
    }

    // Seeded random anchors refine the bound near the lattice spacing.
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || -> f64 {
        // splitmix64, keeps the diagnostic deterministic without an RNG
        // dependency in the library.
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..total {
        for a in anchor.iter_mut() {
            *a = next();
        }
        best = best.max(empty_size(&anchor));
    }

    Ok(BoxFill {
        value: best,
        exact: false,
    })
}

/// Constants `γ_d = 2d(1 + γ_{d-1})`, `γ_1 = 2`, appearing in the fill
/// distance threshold `1/(γ_d (r + 2s))` reported alongside fits.
pub fn gamma_constant(d: u32) -> Result<u64> {
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d".into(),
            reason: "dimension must be at least 1".into(),
        });
    }
    let mut gamma: u64 = 2;
    for k in 2..=d as u64 {
        gamma = (2 * k)
            .checked_mul(1 + gamma)
            .ok_or_else(|| Error::InvalidParameter {
                name: "d".into(),
                reason: format!("gamma constant overflows u64 at d = {d}"),
            })?;
    }
    Ok(gamma)
}
