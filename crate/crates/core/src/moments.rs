//! Exact and asymptotic moments of `V_{j,k}(B_ρ) = Σ_{E ∈ η_k} V_j(B_ρ ∩ E)`.
//!
//! Since the centred intrinsic volume is a first-order Poisson integral, its
//! cumulants are `γ_m = τ A(B_ρ, j, k, m)` for `m ≥ 2` and its central moments
//! are the partition sums
//!
//! ```text
//! μ_m = Σ_{shapes (m_1,…,m_r)} count · τ^r · ∏ A(B_ρ, j, k, m_i)
//! ```
//!
//! over singleton-free set partitions of `{1, …, m}`. The same moments also
//! satisfy `μ_m = τ Σ_{i=1}^{m−1} C(m−1, i) A_{i+1} μ_{m−1−i}` with `μ_0 = 1`,
//! which [`verify_moment_recursion`] checks against the partition sum.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::combinatorics::{
    binomial, cumulants_from_moments, double_factorial, enumerate_singleton_free_partitions,
    MomentSequence, MAX_PARTITION_ORDER,
};
use crate::error::{Error, Result};
use crate::geometry::{cross_functional_ball, functional_a_ball, ProcessParams};

/// Constant in the Kolmogorov-distance bound of [`berry_esseen_bound`].
pub const BERRY_ESSEEN_CONSTANT: f64 = 42.0;

fn check_order(m: usize) -> Result<()> {
    if m == 0 || m > MAX_PARTITION_ORDER {
        Err(Error::OrderOutOfRange(m))
    } else {
        Ok(())
    }
}

/// `A(B_ρ, j, k, m)` for `m = 1..=max_m`, index `m − 1`.
fn functional_values(p: &ProcessParams, j: usize, max_m: usize) -> Result<Vec<f64>> {
    (1..=max_m)
        .map(|m| functional_a_ball(p, j, m).map(|a| a.value))
        .collect()
}

/// Expected value `E V_{j,k}(B_ρ) = τ A(B_ρ, j, k, 1)`.
pub fn mean_exact(p: &ProcessParams, j: usize) -> Result<f64> {
    Ok(p.intensity() * functional_a_ball(p, j, 1)?.value)
}

/// Variance `τ A(B_ρ, j, k, 2)`.
pub fn variance_exact(p: &ProcessParams, j: usize) -> Result<f64> {
    cumulant_exact(p, j, 2)
}

fn partition_sum(tau: f64, a: &[f64], m: usize) -> Result<f64> {
    let table = enumerate_singleton_free_partitions(m)?;
    Ok(table
        .entries()
        .iter()
        .map(|e| {
            let prod: f64 = e.sizes.iter().map(|&s| a[s - 1]).product();
            e.count as f64 * tau.powi(e.blocks() as i32) * prod
        })
        .sum())
}

/// Central moment `μ_m` of `V_{j,k}(B_ρ)` from the partition sum.
pub fn central_moment_exact(p: &ProcessParams, j: usize, m: usize) -> Result<f64> {
    p.check_j(j)?;
    check_order(m)?;
    if m == 1 {
        return Ok(0.0);
    }
    let a = functional_values(p, j, m)?;
    partition_sum(p.intensity(), &a, m)
}

/// Central moments of orders `1..=max_order`.
pub fn central_moments_exact(
    p: &ProcessParams,
    j: usize,
    max_order: usize,
) -> Result<MomentSequence> {
    p.check_j(j)?;
    check_order(max_order)?;
    let a = functional_values(p, j, max_order)?;
    let mut values = vec![0.0];
    for m in 2..=max_order {
        values.push(partition_sum(p.intensity(), &a, m)?);
    }
    MomentSequence::new(values)
}

/// Cumulant `γ_m = τ A(B_ρ, j, k, m)` (zero for `m = 1`).
pub fn cumulant_exact(p: &ProcessParams, j: usize, m: usize) -> Result<f64> {
    p.check_j(j)?;
    check_order(m)?;
    if m == 1 {
        return Ok(0.0);
    }
    Ok(p.intensity() * functional_a_ball(p, j, m)?.value)
}

pub fn cumulants_exact(p: &ProcessParams, j: usize, max_order: usize) -> Result<MomentSequence> {
    let values = (1..=max_order)
        .map(|m| cumulant_exact(p, j, m))
        .collect::<Result<Vec<_>>>()?;
    MomentSequence::new(values)
}

/// Central moments `μ_0, …, μ_max` generated by the first-order recursion
/// rather than the partition sum.
pub fn moments_by_recursion(p: &ProcessParams, j: usize, max_order: usize) -> Result<Vec<f64>> {
    p.check_j(j)?;
    check_order(max_order)?;
    let tau = p.intensity();
    let a = functional_values(p, j, max_order)?;
    let mut mu = vec![1.0, 0.0];
    for m in 2..=max_order {
        let s: f64 = (1..m)
            .map(|i| binomial(m - 1, i) as f64 * a[i] * mu[m - 1 - i])
            .sum();
        mu.push(tau * s);
    }
    mu.truncate(max_order + 1);
    Ok(mu)
}

/// Relative residuals of the moment recursion evaluated on the partition-sum
/// moments; index `m − 1` holds order `m`.
pub fn verify_moment_recursion(p: &ProcessParams, j: usize, max_order: usize) -> Result<Vec<f64>> {
    let moments = central_moments_exact(p, j, max_order)?;
    let a = functional_values(p, j, max_order)?;
    let tau = p.intensity();
    let mu = |m: usize| if m == 0 { 1.0 } else { moments.get(m) };
    Ok((1..=max_order)
        .map(|m| {
            let rhs: f64 = (1..m)
                .map(|i| binomial(m - 1, i) as f64 * a[i] * mu(m - 1 - i))
                .sum::<f64>()
                * tau;
            (mu(m) - rhs).abs() / mu(m).abs().max(1.0)
        })
        .collect())
}

/// Leading term `coefficient · ρ^rho_exponent` of a moment or cumulant as
/// `ρ → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticTerm {
    pub rho_exponent: f64,
    pub coefficient: f64,
}

fn at_unit_radius(p: &ProcessParams) -> ProcessParams {
    p.with_radius(1.0).expect("unit radius is valid")
}

/// Cumulants are exactly homogeneous: `γ_m(ρ) = τ A(B_1, j, k, m) ρ^{jm+s}`.
pub fn asymptotic_cumulant(p: &ProcessParams, j: usize, m: usize) -> Result<AsymptoticTerm> {
    p.check_j(j)?;
    check_order(m)?;
    let s = p.transverse_exponent() as f64;
    let rho_exponent = (j * m) as f64 + s;
    if m == 1 {
        return Ok(AsymptoticTerm {
            rho_exponent,
            coefficient: 0.0,
        });
    }
    let unit = at_unit_radius(p);
    Ok(AsymptoticTerm {
        rho_exponent,
        coefficient: p.intensity() * functional_a_ball(&unit, j, m)?.value,
    })
}

/// Leading term of `μ_m(ρ)`.
///
/// A partition with `r` blocks contributes `ρ^{jm + r s}`, so the leading
/// terms come from the finest shapes: all pairs for even `m`
/// (`(m−1)!! (τ A_2)^{m/2}`, exponent `jm + m s / 2`), and one triple plus
/// pairs for odd `m` (`C(m,3) (m−4)!! τ A_3 (τ A_2)^{(m−3)/2}`, exponent
/// `jm + (m−1) s / 2`). For odd `m` and even `s` this exponent is smaller
/// than `jm + ⌊m s / 2⌋`; normalizing by the latter would send the ratio to
/// zero, so the exponent returned here is the one with a nonzero limit.
pub fn asymptotic_moment(p: &ProcessParams, j: usize, m: usize) -> Result<AsymptoticTerm> {
    p.check_j(j)?;
    check_order(m)?;
    let s = p.transverse_exponent() as f64;
    let jm = (j * m) as f64;
    if m == 1 {
        return Ok(AsymptoticTerm {
            rho_exponent: jm,
            coefficient: 0.0,
        });
    }
    let unit = at_unit_radius(p);
    let tau = p.intensity();
    let ta2 = tau * functional_a_ball(&unit, j, 2)?.value;
    if m.is_multiple_of(2) {
        let pairs = (m / 2) as i32;
        Ok(AsymptoticTerm {
            rho_exponent: jm + (m / 2) as f64 * s,
            coefficient: double_factorial(m as i64 - 1) as f64 * ta2.powi(pairs),
        })
    } else {
        let ta3 = tau * functional_a_ball(&unit, j, 3)?.value;
        let pairs = ((m - 3) / 2) as i32;
        Ok(AsymptoticTerm {
            rho_exponent: jm + ((m - 1) / 2) as f64 * s,
            coefficient: binomial(m, 3) as f64
                * double_factorial(m as i64 - 4) as f64
                * ta3
                * ta2.powi(pairs),
        })
    }
}

/// Limit of the normalized central moment `μ_m(V*)`: `(m−1)!!` for even `m`,
/// zero for odd `m`.
pub fn normalized_moment_limit(m: usize) -> f64 {
    if m % 2 == 1 {
        0.0
    } else {
        double_factorial(m as i64 - 1) as f64
    }
}

/// Bound on `sup_t |P(V* ≤ t) − Φ(t)|`: `42 · τ A_3 / (τ A_2)^{3/2}`.
///
/// Under the invariant convention this scales as `τ^{−1/2} ρ^{−(d−k)/2}`.
pub fn berry_esseen_bound(p: &ProcessParams, j: usize) -> Result<f64> {
    let g2 = cumulant_exact(p, j, 2)?;
    let g3 = cumulant_exact(p, j, 3)?;
    Ok(BERRY_ESSEEN_CONSTANT * g3 / g2.powf(1.5))
}

/// Correlation matrix of `(V_0, …, V_k)`.
///
/// Covariances are `τ ∫ V_i V_j dΛ`, so the correlations depend on neither `τ`
/// nor `ρ` and coincide with the limiting Gaussian covariance of the
/// normalized vector. For the signed-distance convention the entries equal
/// `Γ(1+(i+j)/2)/Γ(3/2+(i+j)/2) · √(Γ(3/2+i) Γ(3/2+j) / (i! j!))`.
pub fn covariance_matrix(p: &ProcessParams) -> Result<DMatrix<f64>> {
    let n = p.k() + 1;
    let mut c = DMatrix::<f64>::identity(n, n);
    let diag = (0..n)
        .map(|j| cross_functional_ball(p, j, j).map(|a| a.coefficient))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..n {
        for j in (i + 1)..n {
            let cross = cross_functional_ball(p, i, j)?.coefficient;
            let v = cross / (diag[i] * diag[j]).sqrt();
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Everything the exact engine knows about one `V_{j,k}(B_ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub params: ProcessParams,
    pub j: usize,
    pub max_order: usize,
    pub mean: f64,
    /// `A(B_ρ, j, k, m)` for `m = 1..=max_order`.
    pub functionals: Vec<f64>,
    pub central_moments: MomentSequence,
    pub cumulants: MomentSequence,
    pub variance: f64,
    pub asymptotic_moments: Vec<AsymptoticTerm>,
    pub asymptotic_cumulants: Vec<AsymptoticTerm>,
    pub berry_esseen_bound: f64,
}

pub fn moment_report(p: &ProcessParams, j: usize, max_order: usize) -> Result<MomentReport> {
    p.check_j(j)?;
    check_order(max_order)?;
    let central_moments = central_moments_exact(p, j, max_order)?;
    let cumulants = cumulants_exact(p, j, max_order)?;
    let orders = 1..=max_order;
    Ok(MomentReport {
        params: *p,
        j,
        max_order,
        mean: mean_exact(p, j)?,
        functionals: functional_values(p, j, max_order)?,
        variance: cumulant_exact(p, j, 2)?,
        asymptotic_moments: orders
            .clone()
            .map(|m| asymptotic_moment(p, j, m))
            .collect::<Result<_>>()?,
        asymptotic_cumulants: orders
            .map(|m| asymptotic_cumulant(p, j, m))
            .collect::<Result<_>>()?,
        berry_esseen_bound: berry_esseen_bound(p, j)?,
        central_moments,
        cumulants,
    })
}

/// Cumulants recovered from the exact central moments; agrees with
/// [`cumulants_exact`] up to round-off.
pub fn cumulants_via_moments(
    p: &ProcessParams,
    j: usize,
    max_order: usize,
) -> Result<MomentSequence> {
    Ok(cumulants_from_moments(&central_moments_exact(
        p, j, max_order,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{functional_a_quadrature, MeasureConvention};
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn lines(tau: f64, rho: f64) -> ProcessParams {
        ProcessParams::new(2, 1, tau, rho, MeasureConvention::Invariant).unwrap()
    }

    #[test]
    fn line_process_golden_values() {
        let p = lines(1.0, 1.0);
        // oracle A-values from quadrature
        let a2 = functional_a_quadrature(&p, 1, 2).unwrap();
        let a3 = functional_a_quadrature(&p, 1, 3).unwrap();
        let a4 = functional_a_quadrature(&p, 1, 4).unwrap();
        assert!(rel(central_moment_exact(&p, 1, 2).unwrap(), a2) < 1e-11);
        assert!(rel(cumulant_exact(&p, 1, 3).unwrap(), a3) < 1e-11);
        assert!(rel(central_moment_exact(&p, 1, 4).unwrap(), a4 + 3.0 * a2 * a2) < 1e-11);

        assert!(rel(central_moment_exact(&p, 1, 2).unwrap(), 16.0 / 3.0) < 1e-13);
        assert!(rel(cumulant_exact(&p, 1, 3).unwrap(), 3.0 * PI) < 1e-13);
        assert!(rel(central_moment_exact(&p, 1, 4).unwrap(), 102.4) < 1e-13);
        assert!(rel(cumulant_exact(&p, 1, 4).unwrap(), 256.0 / 15.0) < 1e-13);
        assert_eq!(central_moment_exact(&p, 1, 1).unwrap(), 0.0);
        assert_eq!(cumulant_exact(&p, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn hitting_count_is_poisson() {
        let p = lines(2.0, 3.0);
        assert!(rel(cumulant_exact(&p, 0, 5).unwrap(), 12.0) < 1e-13);
        for m in 2..=8 {
            assert!(rel(cumulant_exact(&p, 0, m).unwrap(), p.expected_flat_count()) < 1e-13);
        }
        // Poisson(λ) central moments: μ_2 = λ, μ_3 = λ, μ_4 = λ + 3λ²
        let lam = 12.0;
        assert!(
            rel(
                central_moment_exact(&p, 0, 4).unwrap(),
                lam + 3.0 * lam * lam
            ) < 1e-13
        );
    }

    #[test]
    fn recursion_residuals() {
        let p = ProcessParams::new(3, 2, 0.7, 2.0, MeasureConvention::Invariant).unwrap();
        let res = verify_moment_recursion(&p, 1, 10).unwrap();
        assert_eq!(res.len(), 10);
        assert_eq!(res[0], 0.0);
        assert!(res.iter().all(|&r| r <= 1e-11), "{res:?}");
        let q = lines(1.0, 1.0);
        let res = verify_moment_recursion(&q, 1, 3).unwrap();
        assert!(res[1] < 1e-15 && res[2] < 1e-15);
    }

    #[test]
    fn recursion_and_partition_sum_agree_on_grid() {
        for c in [
            MeasureConvention::SignedDistance,
            MeasureConvention::Invariant,
        ] {
            for d in 1..=4 {
                for k in 0..d {
                    for tau in [0.5, 1.0, 2.0] {
                        for rho in [0.5, 1.0, 3.0] {
                            let p = ProcessParams::new(d, k, tau, rho, c).unwrap();
                            for j in 0..=k {
                                let part = central_moments_exact(&p, j, 12).unwrap();
                                let rec = moments_by_recursion(&p, j, 12).unwrap();
                                for m in 2..=12 {
                                    assert!(rel(rec[m], part.get(m)) <= 1e-11);
                                }
                                let via = cumulants_via_moments(&p, j, 12).unwrap();
                                for m in 2..=12 {
                                    let g = cumulant_exact(&p, j, m).unwrap();
                                    let scale = part.get(m).abs().max(g.abs());
                                    assert!(
                                        (via.get(m) - g).abs() <= 1e-11 * scale,
                                        "d={d} k={k} j={j} m={m}: {} vs {g}",
                                        via.get(m)
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn asymptotic_cumulants_are_exact() {
        let p = lines(1.0, 1.0);
        let t = asymptotic_cumulant(&p, 1, 2).unwrap();
        assert_eq!(t.rho_exponent, 3.0);
        assert!(rel(t.coefficient, 16.0 / 3.0) < 1e-14);
        assert_eq!(asymptotic_cumulant(&p, 1, 1).unwrap().coefficient, 0.0);
        for rho in [0.3, 2.0, 17.0] {
            let q = lines(1.0, rho);
            for m in 2..=6 {
                let t = asymptotic_cumulant(&q, 1, m).unwrap();
                let g = cumulant_exact(&q, 1, m).unwrap();
                assert!(rel(g / rho.powf(t.rho_exponent), t.coefficient) < 1e-13);
            }
        }
    }

    #[test]
    fn asymptotic_moments_line_process() {
        let p = lines(1.0, 1.0);
        let t4 = asymptotic_moment(&p, 1, 4).unwrap();
        assert_eq!(t4.rho_exponent, 6.0);
        assert!(rel(t4.coefficient, 256.0 / 3.0) < 1e-14);
        let t5 = asymptotic_moment(&p, 1, 5).unwrap();
        assert_eq!(t5.rho_exponent, 7.0);
        assert!(rel(t5.coefficient, 10.0 * 3.0 * PI * 16.0 / 3.0) < 1e-14);
        for rho in [1.0, 10.0, 1000.0] {
            let mu4 = central_moment_exact(&lines(1.0, rho), 1, 4).unwrap();
            let expected = 256.0 / 3.0 + 256.0 / 15.0 / rho;
            assert!(rel(mu4 / rho.powi(6), expected) < 1e-13);
        }
    }

    #[test]
    fn asymptotic_moment_ratio_converges() {
        // codimension 2 exercises the odd-order exponent (m−1)(d−k)/2
        let p = ProcessParams::new(3, 1, 1.3, 1.0, MeasureConvention::Invariant).unwrap();
        for m in 2..=9 {
            let t = asymptotic_moment(&p, 1, m).unwrap();
            let rho = 1e5;
            let mu = central_moment_exact(&p.with_radius(rho).unwrap(), 1, m).unwrap();
            assert!(
                rel(mu / rho.powf(t.rho_exponent), t.coefficient) < 1e-4,
                "m = {m}"
            );
        }
    }

    #[test]
    fn normalized_limits() {
        assert_eq!(normalized_moment_limit(4), 3.0);
        assert_eq!(normalized_moment_limit(5), 0.0);
        assert_eq!(normalized_moment_limit(2), 1.0);
        assert_eq!(normalized_moment_limit(1), 0.0);
        assert_eq!(normalized_moment_limit(8), 105.0);
    }

    #[test]
    fn normalized_fourth_moment() {
        for rho in [1.0, 10.0, 100.0, 0.25] {
            let p = lines(1.0, rho);
            let mu = central_moments_exact(&p, 1, 4).unwrap();
            assert!(rel(mu.get(4) / mu.get(2).powi(2), 3.0 + 0.6 / rho) < 1e-12);
        }
        let p = ProcessParams::new(4, 2, 0.8, 1.0, MeasureConvention::Invariant).unwrap();
        let unit4 = functional_a_ball(&p, 1, 4).unwrap().value;
        let unit2 = functional_a_ball(&p, 1, 2).unwrap().value;
        for rho in [0.5, 2.0, 7.0] {
            let mu = central_moments_exact(&p.with_radius(rho).unwrap(), 1, 4).unwrap();
            let expected = 3.0 + unit4 / (0.8 * unit2 * unit2 * rho.powi(2));
            assert!(rel(mu.get(4) / mu.get(2).powi(2), expected) < 1e-12);
        }
    }

    #[test]
    fn berry_esseen_values_and_scaling() {
        let b = berry_esseen_bound(&lines(1.0, 1.0), 1).unwrap();
        assert!(rel(b, 42.0 * 3.0 * PI / (16.0f64 / 3.0).powf(1.5)) < 1e-13);
        assert!((b - 32.14).abs() < 0.01);
        let b4 = berry_esseen_bound(&lines(1.0, 4.0), 1).unwrap();
        assert!(rel(b4 / b, 0.5) < 1e-13);
        let t4 = berry_esseen_bound(&lines(4.0, 1.0), 1).unwrap();
        assert!(rel(t4 / b, 0.5) < 1e-13);
        let p = ProcessParams::new(4, 1, 1.0, 1.0, MeasureConvention::Invariant).unwrap();
        let ratio = berry_esseen_bound(&p.with_radius(9.0).unwrap(), 1).unwrap()
            / berry_esseen_bound(&p, 1).unwrap();
        assert!(rel(ratio, 9.0f64.powf(-1.5)) < 1e-12);
    }

    fn gamma_formula(i: usize, j: usize) -> f64 {
        use statrs::function::gamma::gamma;
        let s = (i + j) as f64 / 2.0;
        gamma(1.0 + s) / gamma(1.5 + s)
            * (gamma(1.5 + i as f64) * gamma(1.5 + j as f64)
                / (gamma(1.0 + i as f64) * gamma(1.0 + j as f64)))
            .sqrt()
    }

    #[test]
    fn covariance_matches_gamma_formula() {
        for d in 2..=6 {
            for k in 0..d {
                let p =
                    ProcessParams::new(d, k, 2.0, 3.0, MeasureConvention::SignedDistance).unwrap();
                let c = covariance_matrix(&p).unwrap();
                for i in 0..=k {
                    assert_eq!(c[(i, i)], 1.0);
                    for j in 0..=k {
                        assert!((c[(i, j)] - gamma_formula(i, j)).abs() < 1e-12);
                        assert_eq!(c[(i, j)], c[(j, i)]);
                    }
                }
                assert!(min_eigenvalue(&c) >= -1e-10);
            }
        }
        let c = covariance_matrix(
            &ProcessParams::new(3, 2, 1.0, 1.0, MeasureConvention::SignedDistance).unwrap(),
        )
        .unwrap();
        assert!((c[(0, 1)] - 0.96191).abs() < 5e-6);
        assert!((c[(0, 2)] - 0.91287).abs() < 5e-6);
    }

    #[test]
    fn covariance_invariant_to_scale() {
        let p = ProcessParams::new(4, 2, 1.0, 1.0, MeasureConvention::Invariant).unwrap();
        let base = covariance_matrix(&p).unwrap();
        let other =
            covariance_matrix(&p.with_radius(5.0).unwrap().with_intensity(0.1).unwrap()).unwrap();
        assert!((base - other).abs().max() < 1e-14);
    }

    #[test]
    fn report_invariants() {
        let p = ProcessParams::new(3, 2, 0.9, 1.4, MeasureConvention::Invariant).unwrap();
        let r = moment_report(&p, 2, 6).unwrap();
        assert_eq!(r.variance, r.cumulants.get(2));
        assert_eq!(r.central_moments.get(2), r.cumulants.get(2));
        for m in 2..=6 {
            assert!(rel(r.cumulants.get(m), 0.9 * r.functionals[m - 1]) < 1e-15);
        }
        assert!(moment_report(&p, 3, 4).is_err());
        assert!(matches!(
            moment_report(&p, 1, 25),
            Err(Error::OrderOutOfRange(25))
        ));
    }
}
