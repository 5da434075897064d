//! Ball volumes, intrinsic volumes of k-balls and the integral-geometric
//! functionals `A(B_ρ, j, k, m) = ∫ V_j(B_ρ ∩ E)^m Λ_k(dE)`.
//!
//! A k-flat at distance `δ` from the origin meets `B_ρ` in a k-ball of radius
//! `√(ρ² − δ²)`, so every functional reduces to a one-dimensional integral
//! over the distance. How that distance is weighted depends on the
//! [`MeasureConvention`]:
//!
//! * [`MeasureConvention::SignedDistance`]: a flat is parametrized by its
//!   direction and one signed offset `p ∈ ℝ`, weighted by Lebesgue measure.
//!   The hitting set of `B_ρ` has measure `2ρ`.
//! * [`MeasureConvention::Invariant`]: the offset lives in the full
//!   `(d−k)`-dimensional orthogonal complement. The hitting set has measure
//!   `κ_{d−k} ρ^{d−k}` and `A` is homogeneous of degree `jm + d − k`.
//!
//! Both agree for hyperplanes (`d − k = 1`). With `n = jm` and `s` the
//! transverse exponent (`1` or `d − k`), the closed form is
//!
//! ```text
//! A(B_ρ, j, k, m) = V_j(B^k)^m · κ_{n+s} / κ_n · ρ^{n+s}
//! ```
//!
//! The radial factor carries `jm`, not `km`: `V_j` is homogeneous of degree
//! `j`. For `j = 0` this gives the hitting measure, as it must.

use libm::lgamma as ln_gamma;
use std::f64::consts::PI;

use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureOptions};

/// Rule assigning measure to sets of k-flats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MeasureConvention {
    /// One-dimensional signed offset parameter, measure `ℓ ⊗ R_k`.
    SignedDistance,
    /// Lebesgue measure on the `(d−k)`-dimensional orthogonal complement.
    #[default]
    Invariant,
}

impl MeasureConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureConvention::SignedDistance => "signed-distance",
            MeasureConvention::Invariant => "invariant",
        }
    }
}

impl std::fmt::Display for MeasureConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MeasureConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed-distance" | "signed_distance" => Ok(MeasureConvention::SignedDistance),
            "invariant" => Ok(MeasureConvention::Invariant),
            other => Err(Error::InvalidParameter(format!(
                "unknown measure convention {other:?}"
            ))),
        }
    }
}

/// Full description of one isotropic Poisson k-flat process observed in `B_ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessParams {
    dim: usize,
    k: usize,
    intensity: f64,
    radius: f64,
    convention: MeasureConvention,
}

impl ProcessParams {
    pub fn new(
        dim: usize,
        k: usize,
        intensity: f64,
        radius: f64,
        convention: MeasureConvention,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "ambient dimension must be at least 1".into(),
            ));
        }
        if k >= dim {
            return Err(Error::Dimension(format!(
                "flat dimension k ({k}) must be smaller than the ambient dimension ({dim})"
            )));
        }
        check_positive("intensity", intensity)?;
        check_positive("radius", radius)?;
        Ok(Self {
            dim,
            k,
            intensity,
            radius,
            convention,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn convention(&self) -> MeasureConvention {
        self.convention
    }

    pub fn with_radius(self, radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Self { radius, ..self })
    }

    pub fn with_intensity(self, intensity: f64) -> Result<Self> {
        check_positive("intensity", intensity)?;
        Ok(Self { intensity, ..self })
    }

    pub fn with_convention(self, convention: MeasureConvention) -> Self {
        Self { convention, ..self }
    }

    /// Codimension `d − k`.
    pub fn codim(&self) -> usize {
        self.dim - self.k
    }

    /// Dimension of the offset parameter: `1` for signed distance, `d − k`
    /// for the invariant measure. The hitting measure scales as `ρ^s`.
    pub fn transverse_exponent(&self) -> usize {
        match self.convention {
            MeasureConvention::SignedDistance => 1,
            MeasureConvention::Invariant => self.codim(),
        }
    }

    /// Measure `Λ_k([B_ρ]_k)` of the flats hitting the window.
    pub fn hitting_measure(&self) -> f64 {
        let s = self.transverse_exponent();
        unit_ball_volume(s) * self.radius.powi(s as i32)
    }

    /// Mean number of flats hitting the window.
    pub fn expected_flat_count(&self) -> f64 {
        self.intensity * self.hitting_measure()
    }

    pub fn check_j(&self, j: usize) -> Result<()> {
        if j > self.k {
            Err(Error::Dimension(format!(
                "intrinsic volume index j ({j}) must not exceed k ({})",
                self.k
            )))
        } else {
            Ok(())
        }
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and positive, got {value}"
        )))
    }
}

/// A value of `A(B_ρ, j, k, m)` split as `coefficient · ρ^rho_exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValue {
    /// Value at `ρ = 1`.
    pub coefficient: f64,
    pub rho_exponent: f64,
    pub value: f64,
}

impl FunctionalValue {
    fn from_log(ln_coefficient: f64, rho_exponent: f64, radius: f64) -> Self {
        Self {
            coefficient: ln_coefficient.exp(),
            rho_exponent,
            value: (ln_coefficient + rho_exponent * radius.ln()).exp(),
        }
    }
}

/// `ln κ_n` for real `n ≥ 0`.
pub fn ln_unit_ball_volume(n: f64) -> f64 {
    0.5 * n * PI.ln() - ln_gamma(1.0 + 0.5 * n)
}

/// Volume `κ_n = π^{n/2} / Γ(1 + n/2)` of the n-dimensional unit ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        _ => ln_unit_ball_volume(n as f64).exp(),
    }
}

fn ln_intrinsic_volume_unit_ball(k: usize, j: usize) -> f64 {
    (binomial(k, j) as f64).ln() + ln_unit_ball_volume(k as f64)
        - ln_unit_ball_volume((k - j) as f64)
}

/// `V_j` of a k-dimensional ball of radius `r`: `C(k,j) κ_k / κ_{k−j} · r^j`.
pub fn intrinsic_volume_ball(k: usize, j: usize, r: f64) -> Result<f64> {
    if j > k {
        return Err(Error::Dimension(format!(
            "intrinsic volume index j ({j}) must not exceed the ball dimension k ({k})"
        )));
    }
    if j == 0 {
        return Ok(1.0);
    }
    Ok(ln_intrinsic_volume_unit_ball(k, j).exp() * r.powi(j as i32))
}

/// Closed form of `A(B_ρ, j, k, m)` under the parameters' convention.
pub fn functional_a_ball(p: &ProcessParams, j: usize, m: usize) -> Result<FunctionalValue> {
    p.check_j(j)?;
    if m == 0 {
        return Err(Error::InvalidParameter(
            "functional order m must be at least 1".into(),
        ));
    }
    let n = (j * m) as f64;
    let s = p.transverse_exponent() as f64;
    let ln_coef = m as f64 * ln_intrinsic_volume_unit_ball(p.k(), j) + ln_unit_ball_volume(n + s)
        - ln_unit_ball_volume(n);
    Ok(FunctionalValue::from_log(ln_coef, n + s, p.radius()))
}

/// Closed form of the cross functional `∫ V_i(B_ρ ∩ E) V_j(B_ρ ∩ E) Λ_k(dE)`.
pub fn cross_functional_ball(p: &ProcessParams, i: usize, j: usize) -> Result<FunctionalValue> {
    p.check_j(i)?;
    p.check_j(j)?;
    let n = (i + j) as f64;
    let s = p.transverse_exponent() as f64;
    let ln_coef = ln_intrinsic_volume_unit_ball(p.k(), i)
        + ln_intrinsic_volume_unit_ball(p.k(), j)
        + ln_unit_ball_volume(n + s)
        - ln_unit_ball_volume(n);
    Ok(FunctionalValue::from_log(ln_coef, n + s, p.radius()))
}

/// Rescale a functional value to the window `factor · B_ρ`.
pub fn homogeneity_scale(a: FunctionalValue, factor: f64) -> FunctionalValue {
    FunctionalValue {
        value: a.value * factor.powf(a.rho_exponent),
        ..a
    }
}

/// Integrate `g(section radius)` over the flats hitting `B_ρ` by adaptive
/// quadrature over the offset parameter.
pub fn flat_integral<G: Fn(f64) -> f64>(p: &ProcessParams, g: G) -> Result<f64> {
    let rho = p.radius();
    let section = |t: f64| ((rho - t) * (rho + t)).max(0.0).sqrt();
    let opts = QuadratureOptions::default();
    match p.convention() {
        MeasureConvention::SignedDistance => integrate(|t| g(section(t)), -rho, rho, opts),
        MeasureConvention::Invariant => {
            let q = p.codim();
            // surface area of the unit sphere in the complement
            let sphere = q as f64 * unit_ball_volume(q);
            let v = integrate(|r| r.powi(q as i32 - 1) * g(section(r)), 0.0, rho, opts)?;
            Ok(sphere * v)
        }
    }
}

/// `A(B_ρ, j, k, m)` by numerical integration of its definition.
pub fn functional_a_quadrature(p: &ProcessParams, j: usize, m: usize) -> Result<f64> {
    p.check_j(j)?;
    if m == 0 {
        return Err(Error::InvalidParameter(
            "functional order m must be at least 1".into(),
        ));
    }
    let k = p.k();
    flat_integral(p, |r| {
        intrinsic_volume_ball(k, j, r)
            .expect("j checked above")
            .powi(m as i32)
    })
}

/// Cross functional by numerical integration of its definition.
pub fn cross_functional_quadrature(p: &ProcessParams, i: usize, j: usize) -> Result<f64> {
    p.check_j(i)?;
    p.check_j(j)?;
    let k = p.k();
    flat_integral(p, |r| {
        intrinsic_volume_ball(k, i, r).expect("i checked above")
            * intrinsic_volume_ball(k, j, r).expect("j checked above")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, k: usize, rho: f64, c: MeasureConvention) -> ProcessParams {
        ProcessParams::new(d, k, 1.0, rho, c).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn unit_ball_volumes() {
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(2), PI);
        assert!(rel(unit_ball_volume(5), 8.0 * PI * PI / 15.0) < 1e-14);
        assert!(rel(unit_ball_volume(3), 4.0 * PI / 3.0) < 1e-14);
    }

    #[test]
    fn unit_ball_recurrence() {
        for n in 2..=40 {
            let lhs = unit_ball_volume(n);
            let rhs = unit_ball_volume(n - 2) * 2.0 * PI / n as f64;
            assert!(rel(lhs, rhs) < 1e-14, "n = {n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn intrinsic_volumes_of_balls() {
        assert!(rel(intrinsic_volume_ball(2, 1, 1.0).unwrap(), PI) < 1e-15);
        assert_eq!(intrinsic_volume_ball(3, 0, 0.5).unwrap(), 1.0);
        assert!(rel(intrinsic_volume_ball(1, 1, 2.0).unwrap(), 4.0) < 1e-15);
        // surface area of the unit 3-ball is 2 V_2
        assert!(rel(2.0 * intrinsic_volume_ball(3, 2, 1.0).unwrap(), 4.0 * PI) < 1e-14);
        assert!(matches!(
            intrinsic_volume_ball(2, 3, 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn line_process_functionals() {
        for c in [
            MeasureConvention::SignedDistance,
            MeasureConvention::Invariant,
        ] {
            let p = params(2, 1, 1.0, c);
            let a2 = functional_a_ball(&p, 1, 2).unwrap();
            assert!(rel(a2.value, 16.0 / 3.0) < 1e-14);
            assert_eq!(a2.rho_exponent, 3.0);
            for m in 1..=8 {
                assert!(rel(functional_a_ball(&p, 0, m).unwrap().value, 2.0) < 1e-14);
            }
        }
    }

    #[test]
    fn lines_in_space_invariant() {
        let p = params(3, 1, 1.0, MeasureConvention::Invariant);
        assert!(rel(functional_a_ball(&p, 1, 2).unwrap().value, 2.0 * PI) < 1e-14);
        // oracle: 4 · 2π ∫_0^1 r (1 − r²) dr
        let oracle = integrate(
            |r| 4.0 * 2.0 * PI * r * (1.0 - r * r),
            0.0,
            1.0,
            Default::default(),
        )
        .unwrap();
        assert!(rel(oracle, 2.0 * PI) < 1e-13);
    }

    #[test]
    fn quadrature_spot_values() {
        let p = params(2, 1, 3.0, MeasureConvention::SignedDistance);
        assert!(rel(functional_a_quadrature(&p, 0, 7).unwrap(), 6.0) < 1e-13);
        let p = params(2, 1, 1.0, MeasureConvention::SignedDistance);
        assert!(rel(functional_a_quadrature(&p, 1, 3).unwrap(), 3.0 * PI) < 1e-11);
    }

    #[test]
    fn closed_form_matches_quadrature_on_grid() {
        for c in [
            MeasureConvention::SignedDistance,
            MeasureConvention::Invariant,
        ] {
            for d in 1..=4 {
                for k in 0..d {
                    let p = params(d, k, 1.0, c);
                    for j in 0..=k {
                        for m in 1..=6 {
                            let exact = functional_a_ball(&p, j, m).unwrap().value;
                            let quad = functional_a_quadrature(&p, j, m).unwrap();
                            assert!(
                                rel(exact, quad) <= 1e-10,
                                "{c} d={d} k={k} j={j} m={m}: {exact} vs {quad}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn conventions_agree_for_hyperplanes() {
        for d in 1..=5 {
            let k = d - 1;
            for j in 0..=k {
                for m in 1..=6 {
                    let a = functional_a_ball(
                        &params(d, k, 1.7, MeasureConvention::SignedDistance),
                        j,
                        m,
                    )
                    .unwrap();
                    let b =
                        functional_a_ball(&params(d, k, 1.7, MeasureConvention::Invariant), j, m)
                            .unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn volume_case_matches_printed_closed_form() {
        // j = k, d − k = 1: [κ_k/κ_0]^m κ_{km+1}/κ_{km} ρ^{km+1}
        for k in 0..=4 {
            let p = params(k + 1, k, 2.0, MeasureConvention::Invariant);
            for m in 1..=6 {
                let km = k * m;
                let printed = unit_ball_volume(k).powi(m as i32) * unit_ball_volume(km + 1)
                    / unit_ball_volume(km)
                    * 2.0f64.powi(km as i32 + 1);
                assert!(rel(functional_a_ball(&p, k, m).unwrap().value, printed) < 1e-13);
            }
        }
    }

    #[test]
    fn homogeneity_in_radius() {
        for c in [
            MeasureConvention::SignedDistance,
            MeasureConvention::Invariant,
        ] {
            for d in 1..=4 {
                for k in 0..d {
                    for j in 0..=k {
                        for m in 1..=6 {
                            let unit = functional_a_ball(&params(d, k, 1.0, c), j, m).unwrap();
                            for rho in [0.5, 1.0, 2.0, 10.0] {
                                let a = functional_a_ball(&params(d, k, rho, c), j, m).unwrap();
                                let expected = rho.powf(unit.rho_exponent) * unit.value;
                                assert!(rel(a.value, expected) < 1e-13);
                                let expected_exp = match c {
                                    MeasureConvention::Invariant => (j * m + d - k) as f64,
                                    MeasureConvention::SignedDistance => (j * m + 1) as f64,
                                };
                                assert_eq!(a.rho_exponent, expected_exp);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_helper() {
        let a = functional_a_ball(&params(2, 1, 1.0, MeasureConvention::Invariant), 1, 2).unwrap();
        let scaled = homogeneity_scale(a, 2.0);
        assert!(rel(scaled.value, 128.0 / 3.0) < 1e-14);
        assert_eq!(scaled.coefficient, a.coefficient);
        assert_eq!(homogeneity_scale(a, 1.0), a);
        let hit =
            functional_a_ball(&params(2, 1, 1.0, MeasureConvention::Invariant), 0, 1).unwrap();
        assert!(rel(homogeneity_scale(hit, 3.5).value, 7.0) < 1e-14);
    }

    #[test]
    fn cross_functional_matches_quadrature() {
        for c in [
            MeasureConvention::SignedDistance,
            MeasureConvention::Invariant,
        ] {
            for d in 2..=4 {
                for k in 0..d {
                    let p = params(d, k, 1.3, c);
                    for i in 0..=k {
                        for j in 0..=k {
                            let exact = cross_functional_ball(&p, i, j).unwrap().value;
                            let quad = cross_functional_quadrature(&p, i, j).unwrap();
                            assert!(rel(exact, quad) < 1e-10);
                        }
                    }
                    for j in 0..=k {
                        let diag = cross_functional_ball(&p, j, j).unwrap().value;
                        let a2 = functional_a_ball(&p, j, 2).unwrap().value;
                        assert!(rel(diag, a2) < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let c = MeasureConvention::Invariant;
        assert!(matches!(
            ProcessParams::new(2, 2, 1.0, 1.0, c),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            ProcessParams::new(0, 0, 1.0, 1.0, c),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            ProcessParams::new(2, 1, 0.0, 1.0, c),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            ProcessParams::new(2, 1, 1.0, -1.0, c),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            ProcessParams::new(2, 1, f64::NAN, 1.0, c),
            Err(Error::InvalidParameter(_))
        ));
        let p = params(3, 1, 1.0, c);
        assert!(matches!(
            functional_a_ball(&p, 2, 1),
            Err(Error::Dimension(_))
        ));
        assert!(functional_a_ball(&p, 1, 0).is_err());
    }

    #[test]
    fn hitting_measures() {
        let p = ProcessParams::new(2, 1, 1.5, 2.0, MeasureConvention::Invariant).unwrap();
        assert!(rel(p.expected_flat_count(), 6.0) < 1e-15);
        let p = ProcessParams::new(3, 1, 1.0, 1.0, MeasureConvention::Invariant).unwrap();
        assert!(rel(p.expected_flat_count(), PI) < 1e-15);
        let p = ProcessParams::new(3, 1, 1.0, 1.0, MeasureConvention::SignedDistance).unwrap();
        assert!(rel(p.expected_flat_count(), 2.0) < 1e-15);
    }
}
