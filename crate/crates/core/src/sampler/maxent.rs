//! Numerical maximum-entropy derivation of the one-axis short-step kernel.
//!
//! Maximizing `S[P, Q]` under normalization and `<dx> dphi = kappa'` gives the
//! exponential family `P_i = Q_i exp(alpha' dphi dx_i) / Z`. The multiplier
//! `alpha'` is found by monotone root finding on the constraint and the
//! result is compared with the closed-form Gaussian of mean
//! `(alpha'/alpha) dphi` and variance `1/alpha`.

use statrs::function::erf::erfc;

use crate::error::{EdError, Result};

/// Admissible Gaussian mass outside the lattice.
const TAIL_MASS: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntProblem {
    /// Uniform lattice of candidate steps `dx`.
    pub lattice: Vec<f64>,
    /// Prior multiplier `alpha` (prior variance `1/alpha`).
    pub alpha: f64,
    /// Drift-potential slope `dphi`.
    pub slope: f64,
    /// Constraint value `kappa'`.
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution {
    pub probabilities: Vec<f64>,
    /// Root of the discrete constraint.
    pub alpha_prime: f64,
    /// Continuum value `alpha kappa' / dphi^2`.
    pub alpha_prime_closed: f64,
    pub log_partition: f64,
    /// `S[P, Q]`.
    pub entropy: f64,
    /// `KL(P || G)` against the closed-form Gaussian `G` on the lattice.
    pub kl_divergence: f64,
    pub constraint_residual: f64,
    pub iterations: usize,
}

impl MaxEntProblem {
    /// Symmetric lattice `k h` reaching at least `half_width`.
    pub fn new(alpha: f64, slope: f64, kappa: f64, spacing: f64, half_width: f64) -> Result<Self> {
        if !(spacing > 0.0 && half_width > spacing) {
            return Err(EdError::InvalidParameter("lattice needs 0 < spacing < half_width".into()));
        }
        let k = (half_width / spacing).ceil() as i64;
        let lattice = (-k..=k).map(|i| i as f64 * spacing).collect();
        let p = Self { lattice, alpha, slope, kappa };
        p.validate()?;
        Ok(p)
    }

    /// Problem whose continuum multiplier is `alpha_prime`, on a lattice
    /// wide enough for both the prior and the tilted Gaussian.
    pub fn for_multiplier(alpha: f64, slope: f64, alpha_prime: f64, spacing: f64) -> Result<Self> {
        let mean = alpha_prime * slope / alpha;
        let sigma = alpha.recip().sqrt();
        let kappa = alpha_prime * slope * slope / alpha;
        Self::new(alpha, slope, kappa, spacing, mean.abs() + 9.0 * sigma)
    }

    /// Mean of the continuum solution, `kappa' / dphi` (zero when inactive).
    pub fn closed_mean(&self) -> f64 {
        if self.slope == 0.0 { 0.0 } else { self.kappa / self.slope }
    }

    pub fn spacing(&self) -> f64 {
        self.lattice[1] - self.lattice[0]
    }

    /// Full validation: lattice shape plus the tail-mass guard.
    pub fn validate(&self) -> Result<()> {
        self.validate_lattice()?;
        let (lo, hi) = (self.lattice[0], self.lattice[self.lattice.len() - 1]);
        let s = (2.0 / self.alpha).sqrt();
        for mean in [0.0, self.closed_mean()] {
            let tail = 0.5 * erfc((mean - lo) / s) + 0.5 * erfc((hi - mean) / s);
            if !(tail < TAIL_MASS) {
                return Err(EdError::InvalidParameter(format!(
                    "lattice [{lo}, {hi}] leaves Gaussian tail mass {tail:e} around mean {mean}"
                )));
            }
        }
        Ok(())
    }

    fn validate_lattice(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(EdError::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.slope.is_finite() && self.kappa.is_finite()) {
            return Err(EdError::InvalidParameter("slope and kappa must be finite".into()));
        }
        if self.lattice.len() < 3 {
            return Err(EdError::InvalidParameter("lattice needs at least three points".into()));
        }
        let h = self.spacing();
        if !(h > 0.0) || self.lattice.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(EdError::InvalidParameter("lattice must be uniform and increasing".into()));
        }
        Ok(())
    }
}

/// Log-weights, log-partition, mean and variance of the tilted prior with
/// tilt `b = alpha' dphi`.
fn tilted(problem: &MaxEntProblem, b: f64) -> (Vec<f64>, f64, f64, f64) {
    let a = problem.alpha;
    let logw: Vec<f64> = problem.lattice.iter().map(|x| -0.5 * a * x * x + b * x).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logw.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + z.ln();
    let (mut mean, mut sq) = (0.0, 0.0);
    for (l, x) in logw.iter().zip(&problem.lattice) {
        let p = (l - log_z).exp();
        mean += p * x;
        sq += p * x * x;
    }
    (logw, log_z, mean, (sq - mean * mean).max(0.0))
}

pub fn maxent_transition_oracle(problem: &MaxEntProblem) -> Result<MaxEntSolution> {
    problem.validate_lattice()?;
    let target = problem.closed_mean();
    let (lo, hi) = (problem.lattice[0], problem.lattice[problem.lattice.len() - 1]);
    if (problem.slope == 0.0 && problem.kappa != 0.0) || !(target > lo && target < hi) {
        return Err(EdError::InfeasibleConstraint { kappa: problem.kappa });
    }
    problem.validate()?;
    // mean(b) increases monotonically; bracket the root, then Newton
    // safeguarded by bisection
    let f = |b: f64| tilted(problem, b).2 - target;
    let mut b = problem.alpha * target;
    let (mut blo, mut bhi) = (b - 1.0, b + 1.0);
    let mut step = 1.0;
    while f(blo) > 0.0 {
        step *= 2.0;
        blo -= step;
    }
    step = 1.0;
    while f(bhi) < 0.0 {
        step *= 2.0;
        bhi += step;
    }
    let tol = 4.0 * f64::EPSILON * target.abs().max(problem.spacing());
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (_, _, mean, var) = tilted(problem, b);
        let r = mean - target;
        if r.abs() <= tol || iterations >= MAX_ITERATIONS || bhi - blo <= f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        if r > 0.0 { bhi = b } else { blo = b }
        let newton = b - r / var;
        b = if var > 0.0 && newton > blo && newton < bhi { newton } else { 0.5 * (blo + bhi) };
    }
    let (logw, log_z, mean, _) = tilted(problem, b);
    let log_p: Vec<f64> = logw.iter().map(|l| l - log_z).collect();
    let probabilities: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    // prior log-normalizer
    let (prior_logw, prior_log_z, _, _) = tilted(problem, 0.0);
    let entropy = -probabilities
        .iter()
        .zip(&log_p)
        .zip(&prior_logw)
        .map(|((p, lp), lq)| p * (lp - (lq - prior_log_z)))
        .sum::<f64>();
    // closed-form Gaussian restricted to the lattice and normalized there
    let a = problem.alpha;
    let log_g: Vec<f64> = problem.lattice.iter().map(|x| -0.5 * a * (x - target).powi(2)).collect();
    let gmax = log_g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_zg = gmax + log_g.iter().map(|l| (l - gmax).exp()).sum::<f64>().ln();
    let kl_divergence = probabilities
        .iter()
        .zip(&log_p)
        .zip(&log_g)
        .map(|((p, lp), lg)| p * (lp - (lg - log_zg)))
        .sum::<f64>();
    let (alpha_prime, alpha_prime_closed) = if problem.slope == 0.0 {
        (0.0, 0.0)
    } else {
        (b / problem.slope, a * problem.kappa / (problem.slope * problem.slope))
    };
    Ok(MaxEntSolution {
        probabilities,
        alpha_prime,
        alpha_prime_closed,
        log_partition: log_z,
        entropy,
        kl_divergence,
        constraint_residual: (mean * problem.slope - problem.kappa).abs(),
        iterations,
    })
}
