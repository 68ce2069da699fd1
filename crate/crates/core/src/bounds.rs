//! Finite-size yield and rate lower bounds for the hashing method.
//!
//! With `eps1 + eps2 <= eps`, running `r = ceil(H0^eps1 - 2 log2 eps2)`
//! rounds leaves `m = n - r` pairs within purified distance `eps` of perfect
//! Bell pairs. The split of `eps` is a free parameter; the optimizer scans a
//! fine grid and polishes the best cell by golden-section search.

use serde::Serialize;

use crate::belldiag::{BellDiagonalDistribution, IIDWernerSpec};
use crate::entropy::{SmoothHartley, SortedMasses, WeightClassProfile, MASS_TOL};
use crate::error::{invalid, Result};

/// Resolution of the split search in absolute units of `eps1`.
pub const SPLIT_RESOLUTION: f64 = 1e-4;

/// Largest `n` accepted by [`single_pair_threshold`].
pub const THRESHOLD_MAX_PAIRS: usize = 100_000;

/// Purified distance `eps` that guarantees output fidelity `f_out`.
pub fn epsilon_for_output_fidelity(f_out: f64) -> Result<f64> {
    if !(f_out > 0.0 && f_out < 1.0) {
        return Err(invalid("f_out", format!("{f_out} is outside (0, 1)")));
    }
    Ok((1.0 - f_out).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EpsSplit {
    Explicit { eps1: f64, eps2: f64 },
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonTightBound {
    pub h0: f64,
    pub rounds: i64,
    pub m: i64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// `H0^eps1` in bits.
    pub h0_eps1: f64,
    pub rounds: i64,
    /// Guaranteed yield; may be negative.
    pub m: i64,
    pub rate: f64,
    /// False when `m < 1`.
    pub guarantee: bool,
    pub nontight: NonTightBound,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("{eps} is outside (0, 1)")));
    }
    Ok(())
}

/// Rounds needed for a given smoothing entropy and `eps2`. A single retained
/// string needs no hashing at all.
fn rounds_for(h0: f64, eps2: f64) -> i64 {
    if h0 == 0.0 {
        0
    } else {
        (h0 - 2.0 * eps2.log2()).ceil() as i64
    }
}

struct Evaluation {
    eps1: f64,
    h0: f64,
    rounds: i64,
    /// Unrounded round count, used to break ties and drive the polish step.
    relaxed: f64,
}

fn evaluate<S: SmoothHartley + ?Sized>(source: &S, eps: f64, eps1: f64) -> Evaluation {
    let eps2 = eps - eps1;
    let h0 = source.smooth_hartley(eps1).bits;
    let rounds = rounds_for(h0, eps2);
    let relaxed = if h0 == 0.0 { 0.0 } else { h0 - 2.0 * eps2.log2() };
    Evaluation {
        eps1,
        h0,
        rounds,
        relaxed,
    }
}

fn better(a: &Evaluation, b: &Evaluation) -> bool {
    a.rounds < b.rounds || (a.rounds == b.rounds && a.relaxed < b.relaxed)
}

fn optimize<S: SmoothHartley + ?Sized>(source: &S, eps: f64) -> Evaluation {
    // Even cell count so that eps/2 is a grid point.
    let cells = (((eps / SPLIT_RESOLUTION).ceil() as usize).max(2) + 1) & !1;
    let step = eps / cells as f64;
    let mut best = evaluate(source, eps, eps / 2.0);
    for i in 1..cells {
        let candidate = evaluate(source, eps, step * i as f64);
        if better(&candidate, &best) {
            best = candidate;
        }
    }

    // Golden-section polish of the relaxed objective inside the best cell.
    let (mut lo, mut hi) = (
        (best.eps1 - step).max(step * 1e-3),
        (best.eps1 + step).min(eps - step * 1e-3),
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = evaluate(source, eps, x1);
    let mut f2 = evaluate(source, eps, x2);
    for _ in 0..40 {
        if better(&f1, &f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = evaluate(source, eps, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = evaluate(source, eps, x2);
        }
    }
    for candidate in [f1, f2] {
        if candidate.rounds < best.rounds {
            best = candidate;
        }
    }
    best
}

/// Non-tight comparison bound `n - ceil(H0 - 2 log2 eps)`.
pub fn nontight_yield_lower_bound<S: SmoothHartley + ?Sized>(source: &S, eps: f64) -> Result<NonTightBound> {
    check_eps(eps)?;
    let n = source.pairs();
    let h0 = source.hartley_bits();
    let rounds = rounds_for(h0, eps);
    let m = n as i64 - rounds;
    Ok(NonTightBound {
        h0,
        rounds,
        m,
        rate: m as f64 / n as f64,
    })
}

/// Yield lower bound for any source of smooth Hartley entropies.
pub fn yield_lower_bound<S: SmoothHartley + ?Sized>(source: &S, eps: f64, split: EpsSplit) -> Result<BoundReport> {
    check_eps(eps)?;
    let n = source.pairs();
    let best = match split {
        EpsSplit::Explicit { eps1, eps2 } => {
            if !(eps1 > 0.0 && eps2 > 0.0) {
                return Err(invalid("eps_split", "both parts must be positive"));
            }
            if eps1 + eps2 > eps * (1.0 + 1e-12) {
                return Err(invalid("eps_split", format!("{eps1} + {eps2} exceeds eps = {eps}")));
            }
            let h0 = source.smooth_hartley(eps1).bits;
            Evaluation {
                eps1,
                h0,
                rounds: rounds_for(h0, eps2),
                relaxed: 0.0,
            }
        }
        EpsSplit::Optimized => optimize(source, eps),
    };
    let eps2 = match split {
        EpsSplit::Explicit { eps2, .. } => eps2,
        EpsSplit::Optimized => eps - best.eps1,
    };
    let m = n as i64 - best.rounds;
    Ok(BoundReport {
        n,
        eps,
        eps1: best.eps1,
        eps2,
        h0_eps1: best.h0,
        rounds: best.rounds,
        m,
        rate: m as f64 / n as f64,
        guarantee: m >= 1,
        nontight: nontight_yield_lower_bound(source, eps)?,
    })
}

/// Yield bound of an explicit distribution.
pub fn yield_lower_bound_for(p: &BellDiagonalDistribution, eps: f64, split: EpsSplit) -> Result<BoundReport> {
    yield_lower_bound(&SortedMasses::new(p)?, eps, split)
}

/// Yield and rate bound of `n` IID Werner pairs.
pub fn rate_lower_bound(spec: &IIDWernerSpec, eps: f64, split: EpsSplit) -> Result<BoundReport> {
    yield_lower_bound(&WeightClassProfile::new(spec), eps, split)
}

/// Smallest `n <= n_max` whose optimized bound guarantees one pair at output
/// fidelity `f_out`, or `None`.
pub fn single_pair_threshold(f_in: f64, f_out: f64, n_max: usize) -> Result<Option<usize>> {
    if n_max > THRESHOLD_MAX_PAIRS {
        return Err(invalid("n_max", format!("at most {THRESHOLD_MAX_PAIRS}")));
    }
    let eps = epsilon_for_output_fidelity(f_out)?;
    IIDWernerSpec::new(f_in, 1)?;
    // With every string at probability <= 2^-n, keeping 1 - eps1^2 of the
    // mass needs k >= (1 - eps1^2) 2^n strings, which forces m < 1 unless a
    // single string already carries that mass (the rank-one case).
    let p_max = f_in.max((1.0 - f_in) / 3.0);
    let hopeless = p_max <= 0.5;
    for n in 1..=n_max {
        if hopeless && p_max.powi(n as i32) < 1.0 - eps * eps - MASS_TOL {
            return Ok(None);
        }
        let report = rate_lower_bound(&IIDWernerSpec::new(f_in, n)?, eps, EpsSplit::Optimized)?;
        if report.m >= 1 {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub f_in: f64,
    pub n: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub h0_eps1: f64,
    pub m: i64,
    pub rate: f64,
}

impl From<(f64, &BoundReport)> for CurveRow {
    fn from((f_in, r): (f64, &BoundReport)) -> Self {
        Self {
            f_in,
            n: r.n,
            eps1: r.eps1,
            eps2: r.eps2,
            h0_eps1: r.h0_eps1,
            m: r.m,
            rate: r.rate,
        }
    }
}

/// Optimized bounds over a grid, ordered by `f_in` then `n`.
pub fn rate_curve(f_ins: &[f64], f_out: f64, ns: &[usize]) -> Result<Vec<CurveRow>> {
    let eps = epsilon_for_output_fidelity(f_out)?;
    let points: Vec<(f64, usize)> = f_ins.iter().flat_map(|&f| ns.iter().map(move |&n| (f, n))).collect();
    crate::par::try_map(points.len(), |i| {
        let (f, n) = points[i];
        let report = rate_lower_bound(&IIDWernerSpec::new(f, n)?, eps, EpsSplit::Optimized)?;
        Ok(CurveRow::from((f, &report)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belldiag::werner_distribution;
    use crate::entropy::shannon_and_asymptotic_rate;

    fn werner(f: f64, n: usize) -> IIDWernerSpec {
        IIDWernerSpec::new(f, n).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        for (f, e) in [(0.99, 0.1), (0.75, 0.5), (0.9999, 0.01)] {
            assert!((epsilon_for_output_fidelity(f).unwrap() - e).abs() < 1e-12);
        }
        assert!(epsilon_for_output_fidelity(1.0).is_err());
    }

    #[test]
    fn noiseless_input_keeps_every_pair() {
        for n in [1, 5, 40] {
            let r = rate_lower_bound(&werner(1.0, n), 0.1, EpsSplit::Optimized).unwrap();
            assert_eq!((r.rounds, r.m, r.rate), (0, n as i64, 1.0));
            let r = rate_lower_bound(&werner(1.0, n), 0.1, EpsSplit::Explicit { eps1: 0.01, eps2: 0.09 }).unwrap();
            assert_eq!(r.m, n as i64);
        }
    }

    #[test]
    fn two_noisy_pairs_have_no_guarantee() {
        let r = rate_lower_bound(&werner(0.9, 2), 0.1, EpsSplit::Optimized).unwrap();
        assert!(r.m < 0);
        assert!(!r.guarantee);
    }

    #[test]
    fn twenty_five_pairs_fixed_split() {
        let r = rate_lower_bound(&werner(0.99, 25), 0.1, EpsSplit::Explicit { eps1: 0.07, eps2: 0.03 }).unwrap();
        // H0^0.07 = log2 2442, -2 log2 0.03 = 10.118.
        assert!((r.h0_eps1 - 2442f64.log2()).abs() < 1e-12);
        assert_eq!((r.rounds, r.m), (22, 3));
    }

    #[test]
    fn rejects_overspent_split() {
        let spec = werner(0.9, 10);
        assert!(rate_lower_bound(&spec, 0.1, EpsSplit::Explicit { eps1: 0.06, eps2: 0.05 }).is_err());
        assert!(rate_lower_bound(&spec, 0.1, EpsSplit::Explicit { eps1: 0.0, eps2: 0.05 }).is_err());
    }

    #[test]
    fn quarter_fidelity_never_distills() {
        for n in [10, 100, 1000] {
            for eps in [0.1, 0.5] {
                assert!(
                    rate_lower_bound(&werner(0.25, n), eps, EpsSplit::Optimized)
                        .unwrap()
                        .rate
                        < 0.0
                );
            }
        }
        assert_eq!(single_pair_threshold(0.25, 0.99, 1000).unwrap(), None);
        // A lone pair at F = 1/2 is already within eps = 0.775 of a Bell pair.
        assert_eq!(single_pair_threshold(0.5, 0.4, 1000).unwrap(), Some(1));
        assert_eq!(single_pair_threshold(0.5, 0.6, 1000).unwrap(), None);
    }

    #[test]
    fn generic_and_weight_class_sources_agree() {
        let spec = werner(0.95, 6);
        let p = werner_distribution(&spec).unwrap();
        for eps in [0.05, 0.1, 0.3] {
            let a = rate_lower_bound(&spec, eps, EpsSplit::Optimized).unwrap();
            let b = yield_lower_bound_for(&p, eps, EpsSplit::Optimized).unwrap();
            assert_eq!((a.m, a.eps1), (b.m, b.eps1));
        }
    }

    #[test]
    fn optimized_beats_even_split() {
        for f in [0.9, 0.95, 0.99] {
            for n in [10, 50, 200] {
                let spec = werner(f, n);
                let opt = rate_lower_bound(&spec, 0.1, EpsSplit::Optimized).unwrap();
                let even = rate_lower_bound(&spec, 0.1, EpsSplit::Explicit { eps1: 0.05, eps2: 0.05 }).unwrap();
                assert!(opt.m >= even.m);
                assert!(opt.eps1 + opt.eps2 <= 0.1 + 1e-15);
            }
        }
    }

    #[test]
    fn nontight_is_no_better() {
        for n in 2..=8 {
            let r = rate_lower_bound(&werner(0.9, n), 0.1, EpsSplit::Optimized).unwrap();
            assert!(r.nontight.m <= r.m);
            assert_eq!(r.nontight.h0, 2.0 * n as f64);
        }
    }

    #[test]
    fn rate_approaches_asymptote_from_below() {
        let (_, asymptote) = shannon_and_asymptotic_rate(0.9).unwrap();
        let rates: Vec<f64> = [100, 1000, 10_000]
            .iter()
            .map(|&n| {
                rate_lower_bound(&werner(0.9, n), 0.1, EpsSplit::Optimized)
                    .unwrap()
                    .rate
            })
            .collect();
        assert!(rates.windows(2).all(|w| w[0] < w[1]), "{rates:?}");
        assert!(rates.iter().all(|&r| r < asymptote));
        assert!(asymptote - rates[2] < 0.05, "{rates:?}");
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(single_pair_threshold(1.0, 0.99, 10).unwrap(), Some(1));
        let n = single_pair_threshold(0.99, 0.99, 200).unwrap().unwrap();
        assert!((18..=30).contains(&n), "{n}");
        let below = rate_lower_bound(&werner(0.99, n - 1), 0.1, EpsSplit::Optimized).unwrap();
        assert!(below.m < 1);
    }

    #[test]
    fn curve_rows_match_single_bounds() {
        let rows = rate_curve(&[0.95, 0.99], 0.99, &[20, 60]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].f_in, rows[0].n, rows[1].n, rows[2].f_in), (0.95, 20, 60, 0.99));
        let eps = epsilon_for_output_fidelity(0.99).unwrap();
        let single = rate_lower_bound(&werner(0.99, 60), eps, EpsSplit::Optimized).unwrap();
        assert_eq!(rows[3], CurveRow::from((0.99, &single)));
    }
}
