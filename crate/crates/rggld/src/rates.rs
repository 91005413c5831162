//! Rate functions and auxiliary functionals.
//!
//! Everything here is a pure function of finite-support measures. Countable
//! reference laws (Poisson references, the product-Poisson law `Q`) are
//! truncated where the cumulative tail mass drops below [`TAIL_MASS`]; the
//! truncation point is recorded so callers can tighten it. Conventions
//! throughout: `0 log 0 = 0`, `0 log(0/0) = 0`, and a first moment of zero
//! silences the `m log m` style terms.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::geometry::Kernel;
use crate::measures::{
    consistency_check, h_map, Colour, Consistency, CountableMeasure, LocalityVector,
    NeighbourhoodMeasure,
};

/// Cumulative tail mass at which countable series are truncated.
pub const TAIL_MASS: f64 = 1e-14;

/// Absolute bisection tolerance for the scalar fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// A nonnegative rate, with `+inf` as a distinguished variant rather than a
/// large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn from_f64(v: f64) -> Self {
        if v.is_infinite() && v > 0.0 {
            RateValue::Infinite
        } else {
            RateValue::Finite(v)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, RateValue::Infinite)
    }

    /// Finite value, or `f64::INFINITY`.
    pub fn value(&self) -> f64 {
        match self {
            RateValue::Finite(v) => *v,
            RateValue::Infinite => f64::INFINITY,
        }
    }

    /// Panics on the infinite variant; test helper.
    pub fn expect_finite(&self) -> f64 {
        match self {
            RateValue::Finite(v) => *v,
            RateValue::Infinite => panic!("rate value is infinite"),
        }
    }
}

impl std::fmt::Display for RateValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateValue::Finite(v) => write!(f, "{v}"),
            RateValue::Infinite => write!(f, "inf"),
        }
    }
}

/// Euclidean unit-ball volume `pi^{d/2} / Gamma((d+2)/2)`.
pub fn rho(d: u32) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    let d = d as f64;
    Ok(std::f64::consts::PI.powf(d / 2.0) / gamma((d + 2.0) / 2.0))
}

/// `rho(d) * c`, the limiting mean degree; validates both inputs.
pub fn rho_c(d: u32, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid_parameter("c", format!("{c} not in (0,inf)")));
    }
    Ok(rho(d)? * c)
}

/// Poisson law with the pmf tabulated out to tail mass below [`TAIL_MASS`].
#[derive(Debug, Clone)]
pub struct PoissonLaw {
    rate: f64,
    pmf: Vec<f64>,
}

impl PoissonLaw {
    pub fn new(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::invalid_parameter(
                "rate",
                format!("{rate} not in [0,inf)"),
            ));
        }
        if rate > 700.0 {
            // exp(-rate) underflows; enumeration would never terminate
            return Err(Error::invalid_parameter(
                "rate",
                format!("{rate} too large for truncated enumeration"),
            ));
        }
        let mut pmf = Vec::new();
        let mut p = (-rate).exp();
        let mut cum = p;
        pmf.push(p);
        let mut k = 0u32;
        while cum < 1.0 - TAIL_MASS {
            k += 1;
            p *= rate / k as f64;
            cum += p;
            pmf.push(p);
        }
        Ok(PoissonLaw { rate, pmf })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Largest k included in the truncation window.
    pub fn truncation_k(&self) -> u32 {
        (self.pmf.len() - 1) as u32
    }

    /// Exact pmf; falls back to the closed form outside the window.
    pub fn pmf(&self, k: u32) -> f64 {
        self.pmf
            .get(k as usize)
            .copied()
            .unwrap_or_else(|| self.ln_pmf(k).exp())
    }

    /// `-rate + k ln rate - ln k!`, with the rate-zero law a point mass at 0.
    pub fn ln_pmf(&self, k: u32) -> f64 {
        if self.rate == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        -self.rate + k as f64 * self.rate.ln() - ln_gamma(k as f64 + 1.0)
    }

    /// The truncated law as a sparse measure (total `>= 1 - TAIL_MASS`).
    pub fn to_measure(&self) -> CountableMeasure<u32> {
        CountableMeasure::from_entries(
            self.pmf
                .iter()
                .enumerate()
                .map(|(k, &p)| (k as u32, p)),
        )
        .expect("poisson masses nonnegative")
    }
}

/// Relative entropy `sum_k p(k) log(p(k)/q(k))` over p's support.
///
/// Returns `f64::INFINITY` when p charges a point where q vanishes. For
/// probability inputs the result is nonnegative; for general finite
/// measures it may be negative (callers add the mass-correction terms).
pub fn kl<K: Ord + Clone>(p: &CountableMeasure<K>, q: &CountableMeasure<K>) -> f64 {
    let mut acc = 0.0;
    for (k, pm) in p.iter() {
        let qm = q.mass(k);
        if qm <= 0.0 {
            return f64::INFINITY;
        }
        acc += pm * (pm / qm).ln();
    }
    acc
}

/// Relative entropy against a law given by its pointwise log density.
pub fn kl_vs_ln_density<K: Ord + Clone>(
    p: &CountableMeasure<K>,
    ln_q: impl Fn(&K) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for (k, pm) in p.iter() {
        let lq = ln_q(k);
        if lq == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        acc += pm * (pm.ln() - lq);
    }
    acc
}

/// Degree-law argument: finite-support measures always have a finite first
/// moment, so the infinite-mean case is an explicit marker.
#[derive(Debug, Clone, Copy)]
pub enum DegreeLaw<'a> {
    Finite(&'a CountableMeasure<u32>),
    InfiniteMean,
}

impl<'a> From<&'a CountableMeasure<u32>> for DegreeLaw<'a> {
    fn from(m: &'a CountableMeasure<u32>) -> Self {
        DegreeLaw::Finite(m)
    }
}

fn check_probability<K: Ord + Clone>(m: &CountableMeasure<K>, what: &str) -> Result<()> {
    if !m.is_probability(1e-12) {
        return Err(Error::InvalidMeasure(format!(
            "{what} has total mass {}, expected 1",
            m.total()
        )));
    }
    Ok(())
}

/// Degree-distribution rate function
/// `eta1(delta) = m/2 log(m/(rho c)) - m/2 + rho c/2 + H(delta || q_m)`
/// with `m = <delta>`; infinite-mean laws map to `+inf`.
pub fn eta1<'a>(delta: impl Into<DegreeLaw<'a>>, d: u32, c: f64) -> Result<RateValue> {
    let delta = match delta.into() {
        DegreeLaw::InfiniteMean => return Ok(RateValue::Infinite),
        DegreeLaw::Finite(m) => m,
    };
    check_probability(delta, "delta")?;
    let t = rho_c(d, c)?;
    let m = delta.mean();
    let first = if m == 0.0 { 0.0 } else { 0.5 * m * (m / t).ln() };
    let reference = PoissonLaw::new(m)?;
    let divergence = kl_vs_ln_density(delta, |&k| reference.ln_pmf(k));
    Ok(RateValue::from_f64(first - 0.5 * m + 0.5 * t + divergence))
}

/// The expression inside the contraction infimum:
/// `H(delta || q_x) + x/2 log x - x/2 log(rho c) + rho c/2 - x/2`,
/// defined for `x >= <delta>`.
pub fn eta_at_x(delta: &CountableMeasure<u32>, x: f64, d: u32, c: f64) -> Result<RateValue> {
    check_probability(delta, "delta")?;
    let t = rho_c(d, c)?;
    let m = delta.mean();
    if !x.is_finite() || x < m {
        return Err(Error::domain("x", format!("{x} below the mean {m}")));
    }
    let reference = PoissonLaw::new(x)?;
    let divergence = kl_vs_ln_density(delta, |&k| reference.ln_pmf(k));
    let x_log_x = if x == 0.0 { 0.0 } else { x * x.ln() };
    Ok(RateValue::from_f64(
        divergence + 0.5 * x_log_x - 0.5 * x * t.ln() + 0.5 * t - 0.5 * x,
    ))
}

/// Monotone map whose root is the fixed point: `g(a) = a (1 - e^{-a})`.
#[inline]
fn fixed_point_map(a: f64) -> f64 {
    a * (-(-a).exp_m1())
}

/// Unique positive solution of `a (1 - e^{-a}) = rho(d) c (1 - y)`,
/// by bisection on the strictly increasing map.
pub fn solve_a(y: f64, d: u32, c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::domain("y", format!("{y} outside [0,1)")));
    }
    let target = rho_c(d, c)? * (1.0 - y);
    let mut lo = 1e-12;
    let mut hi = target + 1.0;
    while fixed_point_map(hi) < target {
        hi *= 2.0;
    }
    while hi - lo > FIXED_POINT_TOL {
        let mid = 0.5 * (lo + hi);
        if fixed_point_map(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `|a (1 - e^{-a}) - rho(d) c (1 - y)|` for a candidate solution.
pub fn fixed_point_residual(a: f64, y: f64, d: u32, c: f64) -> Result<f64> {
    Ok((fixed_point_map(a) - rho_c(d, c)? * (1.0 - y)).abs())
}

/// Isolated-vertex rate function on `[0,1]`.
///
/// Endpoints follow the analytic limits: `y log y` is dropped at `y = 0`
/// and `xi1(1) = rho(d) c / 2`.
pub fn xi1(y: f64, d: u32, c: f64) -> Result<RateValue> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain("y", format!("{y} outside [0,1]")));
    }
    let t = rho_c(d, c)?;
    if y == 1.0 {
        return Ok(RateValue::Finite(0.5 * t));
    }
    let a = solve_a(y, d, c)?;
    let y_log_y = if y == 0.0 { 0.0 } else { y * y.ln() };
    let gap = a - t * (1.0 - y);
    let bracket = (t / a).ln() - gap * gap / (2.0 * t * (1.0 - y));
    Ok(RateValue::from_f64(
        y_log_y + t * y * (1.0 - y / 2.0) - (1.0 - y) * bracket,
    ))
}

/// The conditional law attaining the contraction infimum at `delta(0) = y`:
/// `delta*(0) = y`, `delta*(k) = (1-y) q_a(k) / (1 - e^{-a})` for `k >= 1`.
pub fn optimal_conditional_delta(y: f64, d: u32, c: f64) -> Result<CountableMeasure<u32>> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain("y", format!("{y} outside [0,1]")));
    }
    if y == 1.0 {
        return Ok(CountableMeasure::point_mass(0));
    }
    let a = solve_a(y, d, c)?;
    let law = PoissonLaw::new(a)?;
    let scale = (1.0 - y) / -(-a).exp_m1();
    let mut entries = vec![(0u32, y)];
    for k in 1..=law.truncation_k() {
        entries.push((k, scale * law.pmf(k)));
    }
    CountableMeasure::from_entries(entries)
}

/// Unnormalized relative entropy
/// `H(varpi || rho C omega x omega) + rho ||C omega x omega|| - ||varpi||`.
///
/// Nonnegative, zero exactly at `varpi = rho(d) C omega x omega`; infinite
/// when `varpi` charges a pair where the reference vanishes.
pub fn hc_d(
    varpi: &CountableMeasure<(Colour, Colour)>,
    omega: &CountableMeasure<Colour>,
    kernel: &Kernel,
    d: u32,
) -> Result<RateValue> {
    check_probability(omega, "omega")?;
    let rho_d = rho(d)?;
    let k = kernel.size();
    for (&(a, b), _) in varpi.iter() {
        if a as usize >= k || b as usize >= k {
            return Err(Error::InvalidKernel(format!(
                "pair ({a},{b}) outside the {k}-colour kernel"
            )));
        }
    }
    for (&a, _) in omega.iter() {
        if a as usize >= k {
            return Err(Error::InvalidKernel(format!(
                "colour {a} outside the {k}-colour kernel"
            )));
        }
    }

    let reference = |a: Colour, b: Colour| rho_d * kernel.at(a, b) * omega.mass(&a) * omega.mass(&b);

    let mut divergence = 0.0;
    for (&(a, b), mass) in varpi.iter() {
        let q = reference(a, b);
        if q <= 0.0 {
            return Ok(RateValue::Infinite);
        }
        divergence += mass * (mass / q).ln();
    }

    let mut reference_total = 0.0;
    for (&a, _) in omega.iter() {
        for (&b, _) in omega.iter() {
            reference_total += reference(a, b);
        }
    }

    Ok(RateValue::from_f64(
        divergence + reference_total - varpi.total(),
    ))
}

/// The product-Poisson reference `rho(d) C nu x nu` of a typical ensemble.
pub fn typical_varpi(
    kernel: &Kernel,
    nu: &[f64],
    d: u32,
) -> Result<CountableMeasure<(Colour, Colour)>> {
    let rho_d = rho(d)?;
    let mut entries = Vec::new();
    for a in 0..kernel.size() {
        for b in 0..kernel.size() {
            entries.push((
                (a as Colour, b as Colour),
                rho_d * kernel.at(a as Colour, b as Colour) * nu[a] * nu[b],
            ));
        }
    }
    CountableMeasure::from_entries(entries)
}

/// Colour-a Poisson rates of `Q[varpi, mu1]` plus the shared bookkeeping.
struct QLaw {
    k: usize,
    mu1: CountableMeasure<Colour>,
    /// dense `k * k` matrix of rates `varpi(a,b) / mu1(a)` (rows by a)
    rates: Vec<f64>,
    /// per-colour `sum_b rates(a,b)`
    rate_sums: Vec<f64>,
}

impl QLaw {
    fn new(
        varpi: &CountableMeasure<(Colour, Colour)>,
        mu1: &CountableMeasure<Colour>,
    ) -> Result<Self> {
        check_probability(mu1, "mu1")?;
        let mut k = 0usize;
        for (&(a, b), _) in varpi.iter() {
            k = k.max(a as usize + 1).max(b as usize + 1);
        }
        for (&a, _) in mu1.iter() {
            k = k.max(a as usize + 1);
        }
        let mut rates = vec![0.0; k * k];
        let mut rate_sums = vec![0.0; k];
        for (&(a, b), mass) in varpi.iter() {
            let m1 = mu1.mass(&a);
            if m1 <= 0.0 {
                if mass > 0.0 {
                    return Err(Error::DegenerateInput(format!(
                        "varpi({a},{b}) = {mass} but mu1({a}) = 0"
                    )));
                }
                continue;
            }
            let rate = mass / m1;
            rates[a as usize * k + b as usize] = rate;
            rate_sums[a as usize] += rate;
        }
        Ok(QLaw {
            k,
            mu1: mu1.clone(),
            rates,
            rate_sums,
        })
    }

    fn rate(&self, a: Colour, b: Colour) -> f64 {
        if (a as usize) < self.k && (b as usize) < self.k {
            self.rates[a as usize * self.k + b as usize]
        } else {
            0.0
        }
    }

    /// Exact pointwise log density, independent of any truncation.
    fn ln_density(&self, a: Colour, locality: &LocalityVector) -> f64 {
        let m1 = self.mu1.mass(&a);
        if m1 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut acc = m1.ln();
        if (a as usize) < self.k {
            acc -= self.rate_sums[a as usize];
        }
        for (b, count) in locality.iter() {
            let rate = self.rate(a, b);
            if rate <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += count as f64 * rate.ln() - ln_gamma(count as f64 + 1.0);
        }
        acc
    }
}

/// Caps the enumerated support of one colour of `Q`.
const MAX_Q_SUPPORT: usize = 4_000_000;

/// The reference law `Q[varpi, mu1]` enumerated as a sparse measure:
/// colour `a` with law `mu1`, then independent Poisson coordinates with
/// rates `varpi(a,b)/mu1(a)`, truncated per colour pair at [`TAIL_MASS`].
pub fn q_measure(
    varpi: &CountableMeasure<(Colour, Colour)>,
    mu1: &CountableMeasure<Colour>,
) -> Result<NeighbourhoodMeasure> {
    let law = QLaw::new(varpi, mu1)?;
    let mut entries: Vec<((Colour, LocalityVector), f64)> = Vec::new();
    for (&a, colour_mass) in mu1.iter() {
        let mut coord_laws: Vec<(Colour, PoissonLaw)> = Vec::new();
        let mut support = 1usize;
        for b in 0..law.k as Colour {
            let rate = law.rate(a, b);
            if rate > 0.0 {
                let poisson = PoissonLaw::new(rate)?;
                support = support.saturating_mul(poisson.truncation_k() as usize + 1);
                coord_laws.push((b, poisson));
            }
        }
        if support > MAX_Q_SUPPORT {
            return Err(Error::invalid_parameter(
                "varpi",
                format!("truncated Q support ({support} points) too large"),
            ));
        }
        let mut counts: Vec<(Colour, u32)> = Vec::new();
        enumerate_product(
            &coord_laws,
            0,
            colour_mass,
            &mut counts,
            &mut |counts, mass| {
                entries.push(((a, LocalityVector::from_counts(counts.iter().copied())), mass));
            },
        );
    }
    CountableMeasure::from_entries(entries)
}

fn enumerate_product(
    laws: &[(Colour, PoissonLaw)],
    idx: usize,
    mass: f64,
    counts: &mut Vec<(Colour, u32)>,
    sink: &mut impl FnMut(&[(Colour, u32)], f64),
) {
    if idx == laws.len() {
        sink(counts, mass);
        return;
    }
    let (colour, law) = &laws[idx];
    for k in 0..=law.truncation_k() {
        let p = law.pmf(k);
        if k > 0 {
            counts.push((*colour, k));
        }
        enumerate_product(laws, idx + 1, mass * p, counts, sink);
        if k > 0 {
            counts.pop();
        }
    }
}

/// The typical neighbourhood law of the ensemble: colour `a ~ nu` and
/// independent Poisson coordinates with rates `rho(d) C(a,b) nu(b)`.
pub fn typical_mu(kernel: &Kernel, nu: &[f64], d: u32) -> Result<NeighbourhoodMeasure> {
    let nu_measure = CountableMeasure::from_entries(
        nu.iter().enumerate().map(|(a, &p)| (a as Colour, p)),
    )?;
    q_measure(&typical_varpi(kernel, nu, d)?, &nu_measure)
}

/// Joint rate for a pair/neighbourhood measure pair:
/// `H(mu || Q[varpi, mu1]) + H(mu1 || nu) + hc_d(varpi || mu1) / 2` when
/// `(varpi, mu)` is consistent, `+inf` otherwise.
pub fn rate_j(
    varpi: &CountableMeasure<(Colour, Colour)>,
    mu: &NeighbourhoodMeasure,
    nu: &CountableMeasure<Colour>,
    kernel: &Kernel,
    d: u32,
) -> Result<RateValue> {
    if !mu.is_probability(1e-9) {
        return Err(Error::InvalidMeasure(format!(
            "mu has total mass {}, expected 1",
            mu.total()
        )));
    }
    check_probability(nu, "nu")?;
    if consistency_check(varpi, mu, 1e-9) != Consistency::Consistent {
        return Ok(RateValue::Infinite);
    }
    let (mu1, _) = h_map(mu);
    let q = QLaw::new(varpi, &mu1)?;
    let against_q = kl_vs_ln_density(mu, |(a, locality)| q.ln_density(*a, locality));
    let colour_term = kl(&mu1, nu);
    let pair_term = match hc_d(varpi, &mu1, kernel, d)? {
        RateValue::Infinite => return Ok(RateValue::Infinite),
        RateValue::Finite(v) => v,
    };
    let total = against_q + colour_term + 0.5 * pair_term;
    Ok(RateValue::from_f64(total))
}

/// Truncated-Poisson degree law used as the zero of `eta1`.
pub fn poisson_measure(rate: f64) -> Result<CountableMeasure<u32>> {
    Ok(PoissonLaw::new(rate)?.to_measure())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    /// (d, c) with rho(d) * c equal to the requested composite parameter.
    fn params_for(t: f64) -> (u32, f64) {
        (2, t / PI)
    }

    #[test]
    fn rho_special_values() {
        assert!((rho(1).unwrap() - 2.0).abs() < 1e-12);
        assert!((rho(2).unwrap() - PI).abs() < 1e-12);
        assert!((rho(3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(rho(0).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = CountableMeasure::from_entries([(0u32, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(kl(&p, &p), 0.0);

        let point = CountableMeasure::from_entries([(0u32, 1.0)]).unwrap();
        let half = CountableMeasure::from_entries([(0u32, 0.5), (1, 0.5)]).unwrap();
        assert!((kl(&point, &half) - std::f64::consts::LN_2).abs() < 1e-15);

        let q = CountableMeasure::from_entries([(0u32, 0.25), (1, 0.75)]).unwrap();
        // 0.5 ln 2 + 0.5 ln(2/3)
        assert!((kl(&p, &q) - 0.14384103622589046).abs() < 1e-15);

        // support escape
        assert_eq!(kl(&half, &point), f64::INFINITY);
    }

    #[test]
    fn poisson_law_normalization() {
        for rate in [0.0, 0.3, 1.0, 5.0, 20.0] {
            let law = PoissonLaw::new(rate).unwrap();
            let total: f64 = law.to_measure().iter().map(|(_, m)| m).sum();
            assert!((total - 1.0).abs() < 1e-12, "rate {rate}: total {total}");
        }
        assert_eq!(PoissonLaw::new(0.0).unwrap().truncation_k(), 0);
        assert!(PoissonLaw::new(-1.0).is_err());
    }

    #[test]
    fn eta1_zero_at_poisson_reference() {
        for t in [0.5, 1.0, 2.0] {
            let (d, c) = params_for(t);
            let delta = poisson_measure(t).unwrap();
            let v = eta1(&delta, d, c).unwrap().expect_finite();
            assert!(v.abs() <= 1e-9, "t {t}: eta1 {v}");
        }
    }

    #[test]
    fn eta1_point_mass_at_zero() {
        let (d, c) = params_for(1.0);
        let delta = CountableMeasure::point_mass(0u32);
        let v = eta1(&delta, d, c).unwrap().expect_finite();
        assert!((v - 0.5).abs() < 1e-12);
        // equals the y = 1 limit of xi1
        assert_eq!(v, xi1(1.0, d, c).unwrap().expect_finite());
    }

    #[test]
    fn eta1_poisson_two_against_unit_mean_degree() {
        let (d, c) = params_for(1.0);
        let delta = poisson_measure(2.0).unwrap();
        let v = eta1(&delta, d, c).unwrap().expect_finite();
        // ln 2 - 1/2
        assert!((v - 0.19314718055994531).abs() < 1e-9);
    }

    #[test]
    fn eta1_infinite_mean_flag() {
        let (d, c) = params_for(1.0);
        assert!(eta1(DegreeLaw::InfiniteMean, d, c).unwrap().is_infinite());
    }

    #[test]
    fn eta1_rejects_non_probability() {
        let (d, c) = params_for(1.0);
        let half = CountableMeasure::from_entries([(0u32, 0.5)]).unwrap();
        assert!(matches!(
            eta1(&half, d, c),
            Err(Error::InvalidMeasure(_))
        ));
    }

    #[test]
    fn eta_at_x_matches_eta1_at_the_mean() {
        let (d, c) = params_for(1.3);
        let delta =
            CountableMeasure::from_entries([(0u32, 0.2), (1, 0.3), (3, 0.5)]).unwrap();
        let at_mean = eta_at_x(&delta, delta.mean(), d, c).unwrap().expect_finite();
        let direct = eta1(&delta, d, c).unwrap().expect_finite();
        assert!((at_mean - direct).abs() < 1e-12);
    }

    #[test]
    fn eta_at_x_closed_form_example() {
        // delta = Poisson(1), x = 2, rho c = 1:
        // KL(q_1 || q_2) = 1 - ln 2, plus ln 2 - 1/2 from the x-terms.
        let (d, c) = params_for(1.0);
        let delta = poisson_measure(1.0).unwrap();
        let v = eta_at_x(&delta, 2.0, d, c).unwrap().expect_finite();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn eta_at_x_domain_error_below_mean() {
        let (d, c) = params_for(1.0);
        let delta = poisson_measure(2.0).unwrap();
        assert!(matches!(
            eta_at_x(&delta, 1.0, d, c),
            Err(Error::Domain { field: "x", .. })
        ));
    }

    #[test]
    fn eta_at_x_strictly_increasing_above_mean_when_mean_dominates() {
        // The one-sided minimizer sits at the mean exactly when
        // <delta> >= rho(d) c; sample in that regime.
        let (d, c) = params_for(0.5);
        let delta = poisson_measure(1.0).unwrap();
        let base = eta_at_x(&delta, delta.mean(), d, c).unwrap().expect_finite();
        for eps in [0.01, 0.1, 1.0] {
            let v = eta_at_x(&delta, delta.mean() + eps, d, c)
                .unwrap()
                .expect_finite();
            assert!(v > base, "eps {eps}: {v} <= {base}");
        }
    }

    #[test]
    fn eta_at_x_interior_minimum_below_mean_threshold() {
        // When <delta> < rho(d) c the map x -> eta_at_x still dips below its
        // value at the mean; frozen counterexample with mean 1, rho c = 4.
        let (d, c) = params_for(4.0);
        let delta = poisson_measure(1.0).unwrap();
        let at_mean = eta_at_x(&delta, delta.mean(), d, c).unwrap().expect_finite();
        let nearby = eta_at_x(&delta, delta.mean() + 0.01, d, c)
            .unwrap()
            .expect_finite();
        let diff = nearby - at_mean;
        assert!(diff < 0.0);
        assert!((diff - -0.006856885577917654).abs() < 1e-9);
    }

    #[test]
    fn solve_a_fixed_point_examples() {
        let (d, c) = params_for(1.0);
        // y = e^{-rho c} makes a = rho c an exact solution
        let y = (-1.0f64).exp();
        let a = solve_a(y, d, c).unwrap();
        assert!((a - 1.0).abs() < 1e-10);

        // frozen bisection oracle value for a (1 - e^{-a}) = 1
        let a0 = solve_a(0.0, d, c).unwrap();
        assert!((a0 - 1.3499764854011254).abs() < 1e-10);

        // target -> 0 forces a -> 0
        let tiny = solve_a(0.999999, d, c).unwrap();
        assert!(tiny < 2e-3);

        for y in [0.0, 0.25, 0.5, 0.9] {
            let a = solve_a(y, d, c).unwrap();
            assert!(fixed_point_residual(a, y, d, c).unwrap() < 1e-10);
        }

        assert!(solve_a(1.0, d, c).is_err());
        assert!(solve_a(-0.1, d, c).is_err());
    }

    #[test]
    fn xi1_zero_at_typical_value() {
        for t in [0.5, 1.0, 2.0] {
            let (d, c) = params_for(t);
            let y = (-t).exp();
            let v = xi1(y, d, c).unwrap().expect_finite();
            assert!(v.abs() <= 1e-8, "t {t}: xi1 {v}");
        }
    }

    #[test]
    fn xi1_endpoints_and_frozen_value() {
        let (d, c) = params_for(1.0);
        assert!((xi1(1.0, d, c).unwrap().expect_finite() - 0.5).abs() < 1e-15);
        // independent high-precision evaluations
        assert!((xi1(0.55, d, c).unwrap().expect_finite() - 0.04025023350084086).abs() < 1e-9);
        assert!((xi1(0.0, d, c).unwrap().expect_finite() - 0.36132894424411263).abs() < 1e-9);
        assert!(xi1(-0.01, d, c).is_err());
        assert!(xi1(1.01, d, c).is_err());
    }

    #[test]
    fn xi1_nonnegative_with_unique_zero() {
        let (d, c) = params_for(1.0);
        let y_star = (-1.0f64).exp();
        let mut y = 0.001;
        while y < 1.0 {
            let v = xi1(y, d, c).unwrap().expect_finite();
            assert!(v >= -1e-12, "xi1({y}) = {v}");
            if (y - y_star).abs() > 1e-3 {
                assert!(v > 1e-8, "xi1({y}) = {v} too close to zero");
            }
            y += 0.001;
        }
    }

    #[test]
    fn optimal_delta_normalization_and_contraction() {
        let (d, c) = params_for(1.0);
        for y in [0.0, 0.3, 0.5, 0.9] {
            let delta = optimal_conditional_delta(y, d, c).unwrap();
            assert!(delta.is_probability(1e-12), "y {y}: {}", delta.total());
            assert_eq!(delta.mass(&0), y);
        }
        let delta = optimal_conditional_delta(0.5, d, c).unwrap();
        let via_eta = eta1(&delta, d, c).unwrap().expect_finite();
        let direct = xi1(0.5, d, c).unwrap().expect_finite();
        assert!((via_eta - direct).abs() < 1e-8);

        let limit = optimal_conditional_delta(1.0, d, c).unwrap();
        assert_eq!(limit.mass(&0), 1.0);
    }

    #[test]
    fn jensen_bound_on_conditioned_tail() {
        // For delta with delta(0) = y and b = a(y):
        // sum_{k>=1} delta(k) log(delta(k)/q_b(k)) >= (1-y) log((1-y)/(1-e^{-b}))
        let (d, c) = params_for(1.0);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let y = 0.05 + 0.9 * next();
            let b = solve_a(y, d, c).unwrap();
            let law = PoissonLaw::new(b).unwrap();
            // random tail masses on {1..6}
            let mut tail: Vec<f64> = (0..6).map(|_| next() + 1e-3).collect();
            let norm: f64 = tail.iter().sum::<f64>();
            for m in &mut tail {
                *m *= (1.0 - y) / norm;
            }
            let lhs: f64 = tail
                .iter()
                .enumerate()
                .map(|(i, &m)| m * (m / law.pmf(i as u32 + 1)).ln())
                .sum();
            let rhs = (1.0 - y) * ((1.0 - y) / -(-b).exp_m1()).ln();
            assert!(lhs >= rhs - 1e-12, "y {y}: {lhs} < {rhs}");
        }
    }

    #[test]
    fn final_algebraic_identity() {
        let (d, c) = params_for(1.0);
        let t = 1.0;
        let mut y = 0.0;
        while y < 1.0 {
            let a = solve_a(y, d, c).unwrap();
            let lhs = (a * a + t * t - 2.0 * t * a * (1.0 - y)) / (2.0 * t);
            let rhs = t * y * (2.0 - y) / 2.0
                + (a - t * (1.0 - y)).powi(2) / (2.0 * t);
            assert!((lhs - rhs).abs() < 1e-10, "y {y}");
            y += 0.05;
        }
    }

    #[test]
    fn hc_d_zero_at_reference_and_frozen_value() {
        let kernel = Kernel::new(vec![vec![1.0, 0.4], vec![0.4, 2.0]]).unwrap();
        let omega = CountableMeasure::from_entries([(0 as Colour, 0.3), (1, 0.7)]).unwrap();
        let varpi = typical_varpi(&kernel, &[0.3, 0.7], 2).unwrap();
        let zero = hc_d(&varpi, &omega, &kernel, 2).unwrap().expect_finite();
        assert!(zero.abs() <= 1e-12, "{zero}");

        // single colour, rho(d) C = 1, ||varpi|| = 2: 2 ln 2 + 1 - 2
        let single = Kernel::constant(1, 1.0 / PI).unwrap();
        let omega = CountableMeasure::point_mass(0 as Colour);
        let varpi = CountableMeasure::from_entries([((0 as Colour, 0 as Colour), 2.0)]).unwrap();
        let v = hc_d(&varpi, &omega, &single, 2).unwrap().expect_finite();
        assert!((v - 0.3862943611198906).abs() < 1e-12);
    }

    #[test]
    fn hc_d_infinite_off_reference_support() {
        let kernel = Kernel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let omega = CountableMeasure::from_entries([(0 as Colour, 0.5), (1, 0.5)]).unwrap();
        let varpi =
            CountableMeasure::from_entries([((0 as Colour, 1 as Colour), 0.5)]).unwrap();
        assert!(hc_d(&varpi, &omega, &kernel, 2).unwrap().is_infinite());
    }

    #[test]
    fn hc_d_nonnegative_on_random_inputs() {
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let k = 1 + (next() * 3.0) as usize;
            let mut rows = vec![vec![0.0; k]; k];
            for a in 0..k {
                for b in a..k {
                    let v = next() * 2.0;
                    rows[a][b] = v;
                    rows[b][a] = v;
                }
            }
            rows[0][0] += 0.1;
            let kernel = Kernel::new(rows).unwrap();
            let mut omega: Vec<f64> = (0..k).map(|_| next() + 0.05).collect();
            let norm: f64 = omega.iter().sum();
            omega.iter_mut().for_each(|p| *p /= norm);
            let omega = CountableMeasure::from_entries(
                omega.iter().enumerate().map(|(a, &p)| (a as Colour, p)),
            )
            .unwrap();
            let mut entries = Vec::new();
            for a in 0..k as Colour {
                for b in a..k as Colour {
                    if kernel.at(a, b) > 0.0 && next() > 0.2 {
                        let m = next() * 1.5;
                        entries.push(((a, b), m));
                        if a != b {
                            entries.push(((b, a), m));
                        }
                    }
                }
            }
            let varpi = CountableMeasure::from_entries(entries).unwrap();
            let v = hc_d(&varpi, &omega, &kernel, 2).unwrap();
            assert!(v.value() >= -1e-12, "hc_d = {v}");
        }
    }

    #[test]
    fn q_measure_single_colour_is_poisson() {
        let mu1 = CountableMeasure::point_mass(0 as Colour);
        let x = 1.7;
        let varpi = CountableMeasure::from_entries([((0 as Colour, 0 as Colour), x)]).unwrap();
        let q = q_measure(&varpi, &mu1).unwrap();
        let law = PoissonLaw::new(x).unwrap();
        assert_eq!(q.mass(&(0, LocalityVector::empty())), law.pmf(0));
        for k in 1..=law.truncation_k() {
            let key = (0, LocalityVector::from_counts([(0, k)]));
            assert!((q.mass(&key) - law.pmf(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn q_measure_zero_varpi_is_colour_law() {
        let mu1 = CountableMeasure::from_entries([(0 as Colour, 0.25), (1, 0.75)]).unwrap();
        let varpi = CountableMeasure::zero();
        let q = q_measure(&varpi, &mu1).unwrap();
        assert_eq!(q.mass(&(0, LocalityVector::empty())), 0.25);
        assert_eq!(q.mass(&(1, LocalityVector::empty())), 0.75);
        assert_eq!(q.support_len(), 2);
    }

    #[test]
    fn q_measure_two_colours_total_mass() {
        let mu1 = CountableMeasure::from_entries([(0 as Colour, 0.5), (1, 0.5)]).unwrap();
        let varpi = CountableMeasure::from_entries([
            ((0 as Colour, 0 as Colour), 0.5),
            ((0, 1), 0.5),
            ((1, 0), 0.5),
            ((1, 1), 0.5),
        ])
        .unwrap();
        let q = q_measure(&varpi, &mu1).unwrap();
        assert!((q.total() - 1.0).abs() < 1e-12);
        // coordinates i.i.d. Poisson(1): mass at (0, {}) is mu1(0) e^{-2}
        let empty = q.mass(&(0, LocalityVector::empty()));
        assert!((empty - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn q_measure_degenerate_colour_rejected() {
        let mu1 = CountableMeasure::point_mass(0 as Colour);
        let varpi = CountableMeasure::from_entries([((1 as Colour, 0 as Colour), 0.5)]).unwrap();
        assert!(matches!(
            q_measure(&varpi, &mu1),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn h_map_of_typical_law_recovers_reference_pair_measure() {
        let kernel = Kernel::new(vec![vec![1.2, 0.6], vec![0.6, 0.9]]).unwrap();
        let nu = [0.4, 0.6];
        let mu = typical_mu(&kernel, &nu, 2).unwrap();
        let (h1, h2) = h_map(&mu);
        let varpi = typical_varpi(&kernel, &nu, 2).unwrap();
        for (key, mass) in varpi.iter() {
            assert!(
                (h2.mass(key) - mass).abs() < 1e-9,
                "{key:?}: {} vs {mass}",
                h2.mass(key)
            );
        }
        for (a, &p) in nu.iter().enumerate() {
            assert!((h1.mass(&(a as Colour)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_j_zero_on_typical_triple() {
        let kernel = Kernel::new(vec![vec![1.0, 0.5], vec![0.5, 1.5]]).unwrap();
        let nu_vec = [0.5, 0.5];
        let nu = CountableMeasure::from_entries(
            nu_vec.iter().enumerate().map(|(a, &p)| (a as Colour, p)),
        )
        .unwrap();
        let varpi = typical_varpi(&kernel, &nu_vec, 2).unwrap();
        let mu = typical_mu(&kernel, &nu_vec, 2).unwrap();
        let v = rate_j(&varpi, &mu, &nu, &kernel, 2).unwrap().expect_finite();
        assert!(v.abs() <= 1e-6, "J = {v}");
    }

    #[test]
    fn rate_j_infinite_on_inconsistent_pair() {
        let kernel = Kernel::constant(2, 1.0).unwrap();
        let nu = CountableMeasure::from_entries([(0 as Colour, 0.5), (1, 0.5)]).unwrap();
        let mu = typical_mu(&kernel, &[0.5, 0.5], 2).unwrap();
        let varpi = typical_varpi(&kernel, &[0.5, 0.5], 2)
            .unwrap()
            .scaled(0.5)
            .unwrap();
        assert!(rate_j(&varpi, &mu, &nu, &kernel, 2).unwrap().is_infinite());
    }

    #[test]
    fn rate_j_single_colour_reduces_to_eta_at_x() {
        // Degree law delta as a one-colour neighbourhood measure; the
        // consistent pair mass is x = <delta>.
        let (d, c) = params_for(1.0);
        let kernel = Kernel::constant(1, c).unwrap();
        let nu = CountableMeasure::point_mass(0 as Colour);
        let delta =
            CountableMeasure::from_entries([(0u32, 0.3), (1, 0.4), (2, 0.2), (4, 0.1)]).unwrap();
        let mu = CountableMeasure::from_entries(delta.iter().map(|(&k, m)| {
            let locality = if k == 0 {
                LocalityVector::empty()
            } else {
                LocalityVector::from_counts([(0, k)])
            };
            ((0 as Colour, locality), m)
        }))
        .unwrap();
        let x = delta.mean();
        let varpi = CountableMeasure::from_entries([((0 as Colour, 0 as Colour), x)]).unwrap();
        let j = rate_j(&varpi, &mu, &nu, &kernel, d).unwrap().expect_finite();
        let eta = eta_at_x(&delta, x, d, c).unwrap().expect_finite();
        assert!((j - eta).abs() < 1e-12, "J {j} vs eta^x {eta}");
    }
}
