//! Estimators and checks that compare Monte Carlo output with the exact
//! engine: sample moments and cumulants with delta-method standard errors,
//! sample correlations, and Kolmogorov distances to the standard normal.

use nalgebra::DMatrix;
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;

use crate::combinatorics::{binomial, cumulant_jacobian, cumulants_from_moments, MomentSequence};
use crate::error::{Error, Result};
use crate::geometry::ProcessParams;
use crate::moments::{
    berry_esseen_bound, central_moments_exact, covariance_matrix, cumulant_exact, mean_exact,
    variance_exact,
};
use crate::simulator::{
    derive_seed, simulate_vectors, MonteCarloOptions, PooledSums, SampleAccumulator,
};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Sample central moments of one component with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub count: u64,
    pub mean: f64,
    pub mean_se: f64,
    /// Central moments with divisor `n`, orders `1..=max_order`.
    pub central: MomentSequence,
    /// Delta-method standard errors; `None` where order `2m` was not
    /// accumulated.
    pub se: Vec<Option<f64>>,
}

// Central moments about the sample mean, orders 0..=order, from shifted
// power sums.
fn central_from_sums(pooled: &PooledSums, component: usize, order: usize) -> (f64, Vec<f64>) {
    let n = pooled.count() as f64;
    let raw: Vec<f64> = (0..=order)
        .map(|p| pooled.power_sum(component, p) / n)
        .collect();
    let shifted_mean = raw[1];
    let mut central = vec![1.0, 0.0];
    for r in 2..=order {
        let v: f64 = (0..=r)
            .map(|p| binomial(r, p) as f64 * raw[p] * (-shifted_mean).powi((r - p) as i32))
            .sum();
        central.push(v);
    }
    central.truncate(order + 1);
    (pooled.shift(component) + shifted_mean, central)
}

// Asymptotic covariance n·Cov(m_r, m_s) of sample central moments.
fn moment_covariance(mu: &[f64], r: usize, s: usize) -> f64 {
    let (rf, sf) = (r as f64, s as f64);
    mu[r + s] - mu[r] * mu[s] - rf * mu[r - 1] * mu[s + 1] - sf * mu[r + 1] * mu[s - 1]
        + rf * sf * mu[2] * mu[r - 1] * mu[s - 1]
}

fn check_count(pooled: &PooledSums) -> Result<()> {
    if pooled.count() < 2 {
        Err(Error::InsufficientData(format!(
            "need at least 2 samples, have {}",
            pooled.count()
        )))
    } else {
        Ok(())
    }
}

pub fn sample_central_moments(
    acc: &SampleAccumulator,
    component: usize,
    max_order: usize,
) -> Result<SampleMoments> {
    let pooled = acc.pooled();
    check_count(&pooled)?;
    if component >= pooled.components() {
        return Err(Error::InvalidParameter(format!("no component {component}")));
    }
    if max_order == 0 || max_order > pooled.max_order() {
        return Err(Error::InsufficientData(format!(
            "order {max_order} requested, {} accumulated",
            pooled.max_order()
        )));
    }
    let n = pooled.count() as f64;
    let top = pooled.max_order();
    let (mean, mu) = central_from_sums(&pooled, component, top);
    let se = (1..=max_order)
        .map(|r| (2 * r <= top).then(|| (moment_covariance(&mu, r, r).max(0.0) / n).sqrt()))
        .collect();
    Ok(SampleMoments {
        count: pooled.count(),
        mean,
        mean_se: (mu[2].max(0.0) / n).sqrt(),
        central: MomentSequence::new(mu[1..=max_order].to_vec())?,
        se,
    })
}

/// Sample cumulants `γ̂_m` obtained from the sample central moments, with
/// delta-method standard errors.
pub fn sample_cumulants(
    acc: &SampleAccumulator,
    component: usize,
    max_order: usize,
) -> Result<(MomentSequence, Vec<Option<f64>>)> {
    let moments = sample_central_moments(acc, component, max_order)?;
    let pooled = acc.pooled();
    let top = pooled.max_order();
    let (_, mu) = central_from_sums(&pooled, component, top);
    let gamma = cumulants_from_moments(&moments.central);
    let jac = cumulant_jacobian(&moments.central);
    let n = pooled.count() as f64;
    let se = (1..=max_order)
        .map(|m| {
            (2 * m <= top).then(|| {
                let mut var = 0.0;
                for r in 2..=m {
                    for s in 2..=m {
                        var += jac[m - 1][r - 1] * jac[m - 1][s - 1] * moment_covariance(&mu, r, s);
                    }
                }
                (var.max(0.0) / n).sqrt()
            })
        })
        .collect();
    Ok((gamma, se))
}

/// Sample correlation matrix with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub matrix: DMatrix<f64>,
    pub se: DMatrix<f64>,
}

/// Normalized sample covariances of all accumulated components.
///
/// Standard errors use the delta method for a correlation coefficient under
/// an arbitrary joint law, which needs mixed central moments up to order 4.
pub fn sample_covariance_matrix(acc: &SampleAccumulator) -> Result<CorrelationEstimate> {
    let pooled = acc.pooled();
    check_count(&pooled)?;
    if pooled.max_order() < 4 {
        return Err(Error::InsufficientData(
            "correlation errors need power sums up to order 4".into(),
        ));
    }
    let c = pooled.components();
    let n = pooled.count() as f64;
    let means: Vec<f64> = (0..c).map(|i| pooled.power_sum(i, 1) / n).collect();

    // central mixed moment E[(x_i − x̄_i)^a (x_j − x̄_j)^b]
    let central = |i: usize, j: usize, a: u32, b: u32| -> f64 {
        let mut acc = 0.0;
        for p in 0..=a {
            for q in 0..=b {
                acc += binomial(a as usize, p as usize) as f64
                    * binomial(b as usize, q as usize) as f64
                    * pooled.mixed_sum(i, j, p, q)
                    / n
                    * (-means[i]).powi((a - p) as i32)
                    * (-means[j]).powi((b - q) as i32);
            }
        }
        acc
    };

    let variances: Vec<f64> = (0..c)
        .map(|i| {
            let (_, mu) = central_from_sums(&pooled, i, 2);
            mu[2]
        })
        .collect();
    if let Some(i) = variances.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateVariance(i));
    }

    let mut matrix = DMatrix::identity(c, c);
    let mut se = DMatrix::zeros(c, c);
    for i in 0..c {
        for j in (i + 1)..c {
            let (s20, s02) = (variances[i], variances[j]);
            let s11 = central(i, j, 1, 1);
            let r = s11 / (s20 * s02).sqrt();
            let s22 = central(i, j, 2, 2);
            let s31 = central(i, j, 3, 1);
            let s13 = central(i, j, 1, 3);
            let s40 = central(i, j, 4, 0);
            let s04 = central(i, j, 0, 4);
            let var = (s22 / (s20 * s02)
                + 0.25 * r * r * (s40 / (s20 * s20) + s04 / (s02 * s02) + 2.0 * s22 / (s20 * s02))
                - r * (s31 / (s20 * (s20 * s02).sqrt()) + s13 / (s02 * (s20 * s02).sqrt())))
                / n;
            let e = var.max(0.0).sqrt();
            matrix[(i, j)] = r;
            matrix[(j, i)] = r;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    Ok(CorrelationEstimate { matrix, se })
}

/// How samples are centred and scaled before comparison with `Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Standardization {
    None,
    /// Sample mean and standard deviation (divisor `n − 1`).
    Sample,
    Exact {
        mean: f64,
        sd: f64,
    },
}

/// `sup_t |F_n(t) − Φ(t)|` computed exactly over the order statistics.
pub fn kolmogorov_distance_to_normal(samples: &[f64], standardize: Standardization) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "Kolmogorov distance needs at least 2 samples, have {n}"
        )));
    }
    let (center, scale) = match standardize {
        Standardization::None => (0.0, 1.0),
        Standardization::Exact { mean, sd } => (mean, sd),
        Standardization::Sample => {
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, var.sqrt())
        }
    };
    if !(scale > 0.0) {
        return Err(Error::InsufficientData(
            "standardization scale is zero".into(),
        ));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - center) / scale).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    Ok(z.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let phi = normal_cdf(x);
        d.max(((i + 1) as f64 / nf - phi).abs())
            .max((phi - i as f64 / nf).abs())
    }))
}

/// Ordinary least-squares line `y = slope · x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub rho: f64,
    pub distance: f64,
    pub bound: f64,
}

/// Empirical CLT rate: slope of `ln D(ρ)` against `ln ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<RatePoint>,
}

impl RateFit {
    pub fn dominated_by_bound(&self) -> bool {
        self.points.iter().all(|pt| pt.distance <= pt.bound)
    }

    /// Distances decrease in `ρ` except for at most `allowed` inversions.
    pub fn is_monotone(&self, allowed: usize) -> bool {
        self.points
            .windows(2)
            .filter(|w| w[1].distance > w[0].distance)
            .count()
            <= allowed
    }
}

/// Kolmogorov distance of the standardized `V_j` at every radius in `rhos`,
/// with the Berry–Esseen bound and a log–log rate fit.
///
/// With `exact_standardization` the samples are centred and scaled by the
/// exact mean and variance, which isolates distributional convergence from
/// estimation noise. Radius `i` uses master seed `derive_seed(seed, i)`.
pub fn clt_rate_fit(
    p: &ProcessParams,
    j: usize,
    rhos: &[f64],
    reps: u64,
    seed: u64,
    opts: &MonteCarloOptions,
    exact_standardization: bool,
) -> Result<RateFit> {
    let mut distinct = rhos.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidParameter(
            "a rate fit needs at least 3 distinct radii".into(),
        ));
    }
    if let Some(r) = rhos.iter().find(|&&r| !(r >= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "radii must be at least 1, got {r}"
        )));
    }
    if reps < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 replications per radius".into(),
        ));
    }
    let mut points = Vec::with_capacity(rhos.len());
    for (i, &rho) in rhos.iter().enumerate() {
        let q = p.with_radius(rho)?;
        let samples: Vec<f64> = simulate_vectors(&q, j, reps, derive_seed(seed, i as u64), opts)?
            .iter()
            .map(|v| v.get(j))
            .collect();
        let standardize = if exact_standardization {
            Standardization::Exact {
                mean: mean_exact(&q, j)?,
                sd: variance_exact(&q, j)?.sqrt(),
            }
        } else {
            Standardization::Sample
        };
        points.push(RatePoint {
            rho,
            distance: kolmogorov_distance_to_normal(&samples, standardize)?,
            bound: berry_esseen_bound(&q, j)?,
        });
    }
    let xs: Vec<f64> = points.iter().map(|pt| pt.rho.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|pt| pt.distance.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        points,
    })
}

/// One exact-versus-estimate comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub quantity: String,
    pub exact: f64,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
}

impl ValidationRow {
    pub fn new(quantity: impl Into<String>, exact: f64, estimate: f64, se: f64) -> Self {
        let diff = estimate - exact;
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Self {
            quantity: quantity.into(),
            exact,
            estimate,
            se,
            z,
        }
    }

    /// Same estimate compared against a different exact value.
    pub fn with_exact(&self, exact: f64) -> Self {
        Self::new(self.quantity.clone(), exact, self.estimate, self.se)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.z.abs() <= threshold
    }
}

/// Compare a Monte Carlo run against the exact engine: for every
/// accumulated component `j`, central moments of orders `2..=max_order`,
/// cumulants of orders `3..=max_order`, then every off-diagonal correlation.
/// Needs power sums up to `2 · max_order` (and at least 4).
pub fn validate_against_exact(
    p: &ProcessParams,
    acc: &SampleAccumulator,
    max_order: usize,
) -> Result<Vec<ValidationRow>> {
    if max_order < 2 {
        return Err(Error::InvalidParameter(
            "validation needs orders up to at least 2".into(),
        ));
    }
    if acc.max_order() < (2 * max_order).max(4) {
        return Err(Error::InsufficientData(format!(
            "validating order {max_order} needs power sums up to {}",
            (2 * max_order).max(4)
        )));
    }
    let mut rows = Vec::new();
    for j in 0..acc.components() {
        let exact_mu = central_moments_exact(p, j, max_order)?;
        let sample = sample_central_moments(acc, j, max_order)?;
        for m in 2..=max_order {
            rows.push(ValidationRow::new(
                format!("mu{m}(V{j})"),
                exact_mu.get(m),
                sample.central.get(m),
                sample.se[m - 1].expect("order 2m accumulated"),
            ));
        }
        let (gamma, gamma_se) = sample_cumulants(acc, j, max_order)?;
        for m in 3..=max_order {
            rows.push(ValidationRow::new(
                format!("gamma{m}(V{j})"),
                cumulant_exact(p, j, m)?,
                gamma.get(m),
                gamma_se[m - 1].expect("order 2m accumulated"),
            ));
        }
    }
    if acc.components() > 1 {
        let exact = covariance_matrix(p)?;
        let sample = sample_covariance_matrix(acc)?;
        for i in 0..acc.components() {
            for j in (i + 1)..acc.components() {
                rows.push(ValidationRow::new(
                    format!("corr(V{i},V{j})"),
                    exact[(i, j)],
                    sample.matrix[(i, j)],
                    sample.se[(i, j)],
                ));
            }
        }
    }
    Ok(rows)
}
