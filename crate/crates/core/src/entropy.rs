//! Hartley, smooth Hartley and Shannon entropies of error distributions.
//!
//! The smooth Hartley entropy of a normalized distribution is `log2 k` for the
//! smallest `k` whose `k` largest weights carry mass at least `1 - eps^2`. Two
//! solvers compute it: [`SortedMasses`] sorts an explicit distribution, and
//! [`WeightClassProfile`] works on the `n + 1` Hamming-weight classes of an
//! IID Werner input, which makes `n` in the tens of thousands cheap.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::belldiag::{neumaier_sum, BellDiagonalDistribution, IIDWernerSpec, ZERO_WEIGHT};
use crate::error::{invalid, Error, Result};

/// Slack on the retained-mass constraint, shared by both solvers so that they
/// pick the same `k`.
pub const MASS_TOL: f64 = 1e-12;

/// Up to this pair count string probabilities come from `powi` rather than
/// the log domain.
const EXACT_CLASS_MAX_PAIRS: usize = 60;

/// Boundary counts at or beyond this cannot be held exactly in an `f64`.
const EXACT_COUNT_LIMIT: f64 = 9.007_199_254_740_992e15;

/// The partially retained class of the weight-class solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryClass {
    /// Hamming weight of the class.
    pub weight: usize,
    /// log2 of the number of strings retained from the class.
    pub log2_included: f64,
    /// Fraction of the class retained.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothHartleyResult {
    /// `H0^eps` in bits, equal to `log2 k`.
    pub bits: f64,
    /// Retained string count when it is exactly representable.
    pub k: Option<u128>,
    /// Mass of the retained strings.
    pub retained_mass: f64,
    pub boundary: Option<BoundaryClass>,
}

impl SmoothHartleyResult {
    /// True when a single string is retained.
    pub fn is_rank_one(&self) -> bool {
        self.bits == 0.0
    }
}

/// Anything that can report the (smooth) Hartley entropy of an n-pair input.
pub trait SmoothHartley {
    fn pairs(&self) -> usize;
    fn hartley_bits(&self) -> f64;
    fn smooth_hartley(&self, eps: f64) -> SmoothHartleyResult;
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("{eps} is outside (0, 1)")));
    }
    Ok(())
}

/// log2 of the support size.
pub fn hartley(p: &BellDiagonalDistribution) -> Result<f64> {
    let support = p.iter().filter(|&(_, w)| w > ZERO_WEIGHT).count();
    if support == 0 {
        return Err(Error::EmptyDistribution);
    }
    Ok((support as f64).log2())
}

/// Prefix sums of the weights of an explicit distribution, sorted descending.
#[derive(Debug, Clone)]
pub struct SortedMasses {
    n: usize,
    /// `(index, weight)`, descending weight, ties by ascending index.
    order: Vec<(u64, f64)>,
    /// `prefix[i]` is the mass of the `i + 1` largest weights.
    prefix: Vec<f64>,
}

impl SortedMasses {
    pub fn new(p: &BellDiagonalDistribution) -> Result<Self> {
        let mut order: Vec<(u64, f64)> = p.iter().filter(|&(_, w)| w > ZERO_WEIGHT).collect();
        if order.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut prefix = Vec::with_capacity(order.len());
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for &(_, w) in &order {
            let t = sum + w;
            c += if sum.abs() >= w { (sum - t) + w } else { (w - t) + sum };
            sum = t;
            prefix.push(sum + c);
        }
        Ok(Self {
            n: p.n(),
            order,
            prefix,
        })
    }

    pub fn support(&self) -> usize {
        self.order.len()
    }

    /// Retained strings in inclusion order.
    pub fn ranked(&self) -> &[(u64, f64)] {
        &self.order
    }

    /// Smallest `k` whose top-`k` mass reaches `target` (within [`MASS_TOL`]).
    pub fn smallest_k(&self, target: f64) -> usize {
        let i = self.prefix.partition_point(|&m| m < target - MASS_TOL);
        (i + 1).min(self.prefix.len())
    }
}

impl SmoothHartley for SortedMasses {
    fn pairs(&self) -> usize {
        self.n
    }

    fn hartley_bits(&self) -> f64 {
        (self.support() as f64).log2()
    }

    fn smooth_hartley(&self, eps: f64) -> SmoothHartleyResult {
        let k = self.smallest_k(1.0 - eps * eps);
        SmoothHartleyResult {
            bits: (k as f64).log2(),
            k: Some(k as u128),
            retained_mass: self.prefix[k - 1],
            boundary: None,
        }
    }
}

/// Smooth Hartley entropy of an explicit distribution by sorting its weights.
pub fn smooth_hartley_generic(p: &BellDiagonalDistribution, eps: f64) -> Result<SmoothHartleyResult> {
    check_eps(eps)?;
    Ok(SortedMasses::new(p)?.smooth_hartley(eps))
}

/// Hamming-weight classes of `n` IID Werner pairs.
///
/// Class `w` holds the `C(n, w) 3^w` strings with `w` non-identity labels, each
/// of probability `F^(n-w) ((1-F)/3)^w`. Classes are visited in order of
/// decreasing per-string probability (ascending `w` when `F > 1/4`).
#[derive(Debug, Clone)]
pub struct WeightClassProfile {
    n: usize,
    /// ln of the probability of one string in class `w`.
    ln_string: Vec<f64>,
    /// ln of the class size.
    ln_count: Vec<f64>,
    /// Exact class sizes where they fit a `u128`.
    exact_count: Vec<Option<u128>>,
    class_mass: Vec<f64>,
    /// Classes in decreasing per-string probability.
    order: Vec<usize>,
    /// Inclusive cumulative mass along `order`.
    cumulative: Vec<f64>,
}

impl WeightClassProfile {
    pub fn new(spec: &IIDWernerSpec) -> Self {
        let n = spec.n();
        let ln_f = spec.fidelity().ln();
        let ln_q = spec.error_weight().ln();
        let ln_3 = 3f64.ln();
        let ln_n_fact = ln_gamma(n as f64 + 1.0);

        let mut ln_string = Vec::with_capacity(n + 1);
        let mut ln_count = Vec::with_capacity(n + 1);
        for w in 0..=n {
            let good = if w == n { 0.0 } else { (n - w) as f64 * ln_f };
            let bad = if w == 0 { 0.0 } else { w as f64 * ln_q };
            ln_string.push(good + bad);
            let ln_binom = ln_n_fact - ln_gamma(w as f64 + 1.0) - ln_gamma((n - w) as f64 + 1.0);
            ln_count.push(ln_binom + w as f64 * ln_3);
        }

        // Exact sizes while C(n, w) 3^w fits a u128; None from the first overflow.
        let mut exact_count = Vec::with_capacity(n + 1);
        let mut binom = Some(1u128);
        let mut pow3 = Some(1u128);
        for w in 0..=n {
            exact_count.push(binom.zip(pow3).and_then(|(b, p)| b.checked_mul(p)));
            binom = binom
                .and_then(|b| b.checked_mul((n - w) as u128))
                .map(|b| b / (w as u128 + 1));
            pow3 = pow3.and_then(|p| p.checked_mul(3));
        }
        for (lc, c) in ln_count.iter_mut().zip(&exact_count) {
            if let Some(c) = c {
                *lc = (*c as f64).ln();
            }
        }
        if n <= EXACT_CLASS_MAX_PAIRS {
            let (f, q) = (spec.fidelity(), spec.error_weight());
            for (w, ls) in ln_string.iter_mut().enumerate() {
                *ls = (f.powi((n - w) as i32) * q.powi(w as i32)).ln();
            }
        }

        let class_mass: Vec<f64> = (0..=n)
            .map(|w| match exact_count[w] {
                Some(c) => c as f64 * ln_string[w].exp(),
                None => (ln_count[w] + ln_string[w]).exp(),
            })
            .collect();
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| ln_string[b].total_cmp(&ln_string[a]).then(a.cmp(&b)));

        let mut cumulative = Vec::with_capacity(n + 1);
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for &w in &order {
            let m = class_mass[w];
            let t = sum + m;
            c += if sum.abs() >= m { (sum - t) + m } else { (m - t) + sum };
            sum = t;
            cumulative.push(sum + c);
        }

        Self {
            n,
            ln_string,
            ln_count,
            exact_count,
            class_mass,
            order,
            cumulative,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.class_mass.iter().copied())
    }

    pub fn class_mass(&self, w: usize) -> f64 {
        self.class_mass[w]
    }

    pub fn ln_string_probability(&self, w: usize) -> f64 {
        self.ln_string[w]
    }

    pub fn ln_class_size(&self, w: usize) -> f64 {
        self.ln_count[w]
    }

    pub fn class_order(&self) -> &[usize] {
        &self.order
    }

    fn solve(&self, eps: f64) -> SmoothHartleyResult {
        let threshold = 1.0 - eps * eps - MASS_TOL;
        let pos = self.cumulative.partition_point(|&m| m < threshold).min(self.n);
        // Skip empty classes (F = 1) so the boundary holds at least one string.
        let pos = (0..=pos)
            .rev()
            .find(|&i| self.class_mass[self.order[i]] > 0.0)
            .unwrap_or(0);
        let w = self.order[pos];
        let before = if pos == 0 { 0.0 } else { self.cumulative[pos - 1] };
        let p = self.ln_string[w].exp();
        let need = threshold - before;

        let ln_needed = if need <= 0.0 {
            0.0
        } else {
            need.ln() - self.ln_string[w]
        };
        let (count, ln_included) = if p > 0.0 && ln_needed < EXACT_COUNT_LIMIT.ln() {
            let size = match self.exact_count[w] {
                Some(c) => c as f64,
                None => self.ln_count[w].exp(),
            };
            let mut c = (need / p).ceil().clamp(1.0, size);
            while c > 1.0 && before + (c - 1.0) * p >= threshold {
                c -= 1.0;
            }
            while c < size && before + c * p < threshold {
                c += 1.0;
            }
            (Some(c), c.ln())
        } else {
            (None, ln_needed.min(self.ln_count[w]))
        };

        let exact_k = count.and_then(|c| {
            self.order[..pos]
                .iter()
                .try_fold(c as u128, |acc, &v| acc.checked_add(self.exact_count[v]?))
        });
        let bits = match exact_k {
            Some(k) => (k as f64).log2(),
            None => {
                let ln_k = log_sum_exp(
                    self.order[..pos]
                        .iter()
                        .map(|&v| self.ln_count[v])
                        .chain(std::iter::once(ln_included)),
                );
                ln_k / std::f64::consts::LN_2
            }
        };
        let retained_mass = match count {
            Some(c) => before + c * p,
            None => before + (ln_included + self.ln_string[w]).exp(),
        };

        SmoothHartleyResult {
            bits,
            k: exact_k,
            retained_mass,
            boundary: Some(BoundaryClass {
                weight: w,
                log2_included: ln_included / std::f64::consts::LN_2,
                fraction: (ln_included - self.ln_count[w]).exp(),
            }),
        }
    }
}

impl SmoothHartley for WeightClassProfile {
    fn pairs(&self) -> usize {
        self.n
    }

    fn hartley_bits(&self) -> f64 {
        // Full support is the common case; report it without rounding noise.
        if self.ln_string.iter().all(|l| l.is_finite()) {
            return 2.0 * self.n as f64;
        }
        let ln_support = log_sum_exp(
            (0..=self.n)
                .filter(|&w| self.ln_string[w].is_finite())
                .map(|w| self.ln_count[w]),
        );
        ln_support / std::f64::consts::LN_2
    }

    fn smooth_hartley(&self, eps: f64) -> SmoothHartleyResult {
        self.solve(eps)
    }
}

/// Smooth Hartley entropy of `n` IID Werner pairs via weight classes.
pub fn smooth_hartley_werner(spec: &IIDWernerSpec, eps: f64) -> Result<SmoothHartleyResult> {
    check_eps(eps)?;
    Ok(WeightClassProfile::new(spec).solve(eps))
}

/// Joint Shannon entropy `H(AB)` in bits of one Werner pair and the
/// asymptotic hashing rate `1 - H(AB)`.
pub fn shannon_and_asymptotic_rate(fidelity: f64) -> Result<(f64, f64)> {
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(invalid("fidelity", format!("{fidelity} is outside (0, 1]")));
    }
    let q = (1.0 - fidelity) / 3.0;
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    let h = term(fidelity) + 3.0 * term(q);
    Ok((h, 1.0 - h))
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + neumaier_sum(values.iter().map(|v| (v - max).exp())).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belldiag::{werner_distribution, ErrorString};

    fn werner(f: f64, n: usize) -> IIDWernerSpec {
        IIDWernerSpec::new(f, n).unwrap()
    }

    #[test]
    fn hartley_examples() {
        let point = BellDiagonalDistribution::point_mass(ErrorString::identity(3));
        assert_eq!(hartley(&point).unwrap(), 0.0);
        let d = werner_distribution(&werner(0.9, 2)).unwrap();
        assert_eq!(hartley(&d).unwrap(), 4.0);
        let d = werner_distribution(&werner(1.0, 5)).unwrap();
        assert_eq!(hartley(&d).unwrap(), 0.0);
        let empty = BellDiagonalDistribution::from_sparse(2, []).unwrap();
        assert_eq!(hartley(&empty), Err(Error::EmptyDistribution));
    }

    #[test]
    fn generic_uniform_quarter() {
        let d = BellDiagonalDistribution::uniform(1).unwrap();
        let r = smooth_hartley_generic(&d, 0.5).unwrap();
        assert_eq!(r.k, Some(3));
        assert!((r.bits - 3f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn generic_point_mass() {
        let d = BellDiagonalDistribution::point_mass(ErrorString::identity(4));
        for eps in [0.01, 0.5, 0.99] {
            assert_eq!(smooth_hartley_generic(&d, eps).unwrap().bits, 0.0);
        }
        assert!(smooth_hartley_generic(&d, 0.0).is_err());
        assert!(smooth_hartley_generic(&d, 1.0).is_err());
    }

    #[test]
    fn werner_two_pairs_keeps_six() {
        // 0.81 + 5 * 0.03 = 0.96 >= 0.95 while 0.81 + 4 * 0.03 = 0.93 is not.
        let eps = 0.05f64.sqrt();
        let d = werner_distribution(&werner(0.9, 2)).unwrap();
        let g = smooth_hartley_generic(&d, eps).unwrap();
        assert_eq!(g.k, Some(6));
        assert!((g.bits - 6f64.log2()).abs() < 1e-15);
        let w = smooth_hartley_werner(&werner(0.9, 2), eps).unwrap();
        assert_eq!(w.k, Some(6));
        assert_eq!(w.bits, g.bits);
        let b = w.boundary.unwrap();
        assert_eq!(b.weight, 1);
        assert!((b.fraction - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn werner_noiseless_large_n() {
        let r = smooth_hartley_werner(&werner(1.0, 100), 0.3).unwrap();
        assert_eq!(r.bits, 0.0);
        assert_eq!(r.k, Some(1));
        assert!(r.is_rank_one());
    }

    #[test]
    fn werner_twenty_five_pairs() {
        // Independent evaluation: class masses straight from binomials.
        let (f, n, eps) = (0.99f64, 25usize, 0.07f64);
        let q = (1.0 - f) / 3.0;
        let target = 1.0 - eps * eps;
        let mut cum = 0.0;
        let mut k = 0u128;
        let mut binom = 1u128;
        for w in 0..=n {
            let size = binom * 3u128.pow(w as u32);
            let p = f.powi((n - w) as i32) * q.powi(w as i32);
            if cum + size as f64 * p >= target {
                k += ((target - cum) / p).ceil() as u128;
                break;
            }
            cum += size as f64 * p;
            k += size;
            binom = binom * (n - w) as u128 / (w as u128 + 1);
        }
        // Weight <= 1 carries 0.9742; the boundary lies inside weight 2.
        assert!(k > 76 && k < 2776, "{k}");
        let r = smooth_hartley_werner(&werner(f, n), eps).unwrap();
        assert_eq!(r.k, Some(k));
        // Exact rational evaluation gives the same count.
        assert_eq!(r.k, Some(2442));
        assert!((r.bits - 2442f64.log2()).abs() < 1e-12);
        assert_eq!(r.boundary.unwrap().weight, 2);
        assert!(r.retained_mass >= target);
    }

    #[test]
    fn below_quarter_visits_heavy_classes_first() {
        let spec = werner(0.1, 3);
        let prof = WeightClassProfile::new(&spec);
        assert_eq!(prof.class_order(), &[3, 2, 1, 0]);
        let d = werner_distribution(&spec).unwrap();
        for eps in [0.05, 0.2, 0.5] {
            let g = smooth_hartley_generic(&d, eps).unwrap();
            assert_eq!(prof.smooth_hartley(eps).k, g.k);
        }
    }

    #[test]
    fn class_masses_normalized_at_large_n() {
        for &(f, n) in &[(0.9, 100usize), (0.9, 10_000), (0.99, 100_000), (0.6, 50_000)] {
            let prof = WeightClassProfile::new(&werner(f, n));
            assert!((prof.total_mass() - 1.0).abs() < 1e-9, "f={f} n={n}");
        }
    }

    #[test]
    fn per_string_probability_decreases_above_quarter() {
        let prof = WeightClassProfile::new(&werner(0.3, 40));
        for w in 1..=40 {
            assert!(prof.ln_string_probability(w) < prof.ln_string_probability(w - 1));
        }
    }

    /// Retained count from plain binomial class sums.
    fn oracle_k(f: f64, n: usize, eps: f64) -> u128 {
        let q = (1.0 - f) / 3.0;
        let target = 1.0 - eps * eps;
        let (mut cum, mut k, mut binom) = (0.0, 0u128, 1u128);
        for w in 0..=n {
            let size = binom * 3u128.pow(w as u32);
            let p = f.powi((n - w) as i32) * q.powi(w as i32);
            if cum + size as f64 * p >= target {
                return k + ((target - cum) / p).ceil() as u128;
            }
            cum += size as f64 * p;
            k += size;
            binom = binom * (n - w) as u128 / (w as u128 + 1);
        }
        k
    }

    #[test]
    fn powi_and_log_domain_paths_agree_with_oracle() {
        // n <= 60 takes string probabilities from powi, larger n from logs.
        for &f in &[0.8, 0.95, 0.99] {
            for &n in &[25usize, 60, 61, 63] {
                let expected = (oracle_k(f, n, 0.1) as f64).log2();
                let r = smooth_hartley_werner(&werner(f, n), 0.1).unwrap();
                assert!(
                    (r.bits - expected).abs() < 1e-8,
                    "f={f} n={n}: {} vs {expected}",
                    r.bits
                );
            }
        }
    }

    #[test]
    fn huge_boundary_falls_back_to_log_count() {
        let r = smooth_hartley_werner(&werner(0.9, 5000), 0.1).unwrap();
        assert!(r.k.is_none());
        let (h, _) = shannon_and_asymptotic_rate(0.9).unwrap();
        // Typical-set size: n H(AB) plus an O(sqrt n) correction.
        assert!(r.bits / 5000.0 > h && r.bits / 5000.0 - h < 0.1 * h, "{}", r.bits);
        assert!(r.retained_mass >= 1.0 - 0.01 - 1e-9);
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_and_asymptotic_rate(1.0).unwrap(), (0.0, 1.0));
        let (h, r) = shannon_and_asymptotic_rate(0.25).unwrap();
        assert!((h - 2.0).abs() < 1e-15 && (r + 1.0).abs() < 1e-15);
        let (_, r) = shannon_and_asymptotic_rate(0.9).unwrap();
        // -0.9 log2 0.9 - 0.1 log2(1/30)
        assert!((r - 0.372_508_156_338_603).abs() < 1e-12, "{r}");
    }

    #[test]
    fn werner_hartley_counts_support() {
        let prof = WeightClassProfile::new(&werner(0.9, 7));
        assert!((prof.hartley_bits() - 14.0).abs() < 1e-12);
        let prof = WeightClassProfile::new(&werner(1.0, 7));
        assert_eq!(prof.hartley_bits(), 0.0);
    }
}
