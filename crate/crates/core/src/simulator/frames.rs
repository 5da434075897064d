//! Uniformly random orthonormal frames for flat directions.

use rand::Rng;
use rand_distr::StandardNormal;

/// Orientation and position data of one flat.
///
/// The flat is `distance · offset_direction + span(directions)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatFrame {
    /// `k` orthonormal vectors in `ℝ^d` spanning the direction space.
    pub directions: Vec<Vec<f64>>,
    /// Unit vector orthogonal to every direction.
    pub offset_direction: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

// Project `v` onto the orthogonal complement of `basis` (two passes) and
// normalize; `None` if the remainder is numerically zero.
fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let original = dot(&v, &v).sqrt();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm <= 1e-8 * original.max(1e-300) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Draw a k-frame uniformly from the Stiefel manifold by orthonormalizing
/// Gaussian vectors, plus a uniform unit offset direction in its complement.
/// Rank-deficient draws are redrawn.
pub fn random_frame<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> FlatFrame {
    assert!(
        k < dim,
        "flat dimension must be below the ambient dimension"
    );
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(k);
    while directions.len() < k {
        if let Some(v) = orthonormalize_against(gaussian_vector(dim, rng), &directions) {
            directions.push(v);
        }
    }
    let offset_direction = loop {
        if let Some(v) = orthonormalize_against(gaussian_vector(dim, rng), &directions) {
            break v;
        }
    };
    FlatFrame {
        directions,
        offset_direction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=6 {
            for k in 0..dim {
                for _ in 0..50 {
                    let f = random_frame(dim, k, &mut rng);
                    let mut all = f.directions.clone();
                    all.push(f.offset_direction.clone());
                    for (i, a) in all.iter().enumerate() {
                        assert_eq!(a.len(), dim);
                        for (j, b) in all.iter().enumerate() {
                            let want = if i == j { 1.0 } else { 0.0 };
                            assert!((dot(a, b) - want).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn direction_is_isotropic() {
        // for a uniform line direction u in R^3, E[u_i^2] = 1/3
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut second = [0.0; 3];
        for _ in 0..n {
            let f = random_frame(3, 1, &mut rng);
            for (s, x) in second.iter_mut().zip(&f.directions[0]) {
                *s += x * x / n as f64;
            }
        }
        // Var(u_i^2) = 4/45, so the SE is about 0.0021
        for s in second {
            assert!((s - 1.0 / 3.0).abs() < 0.01, "{s}");
        }
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let basis = vec![vec![1.0, 0.0]];
        assert!(orthonormalize_against(vec![2.0, 0.0], &basis).is_none());
        assert!(orthonormalize_against(vec![0.0, 0.0], &[]).is_none());
    }
}
