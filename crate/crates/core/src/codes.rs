//! Fixed round strings that make the hashing method act as a small code.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::belldiag::{werner_distribution, ErrorString, IIDWernerSpec};
use crate::error::{invalid, Error, Result};
use crate::protocol::{apply_round, validate_schedule, RoundString, Variant};
use crate::simulator::syndrome_joint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeMode {
    Correct,
    Detect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedSchedule {
    name: String,
    n: usize,
    rounds: Vec<RoundString>,
    mode: CodeMode,
}

pub const BUILTIN_CODES: [&str; 2] = ["n5-correct", "n4-detect"];

/// Prior fidelity used to build MAP decoders for the verification report.
pub const DECODER_PRIOR_FIDELITY: f64 = 0.99;

impl FixedSchedule {
    pub fn new(name: impl Into<String>, n: usize, rounds: Vec<RoundString>, mode: CodeMode) -> Result<Self> {
        if rounds.is_empty() {
            return Err(invalid("rounds", "a fixed schedule needs at least one round"));
        }
        validate_schedule(n, &rounds)?;
        Ok(Self {
            name: name.into(),
            n,
            rounds,
            mode,
        })
    }

    /// Parses one round string per line; blank lines and `#` comments are
    /// skipped.
    pub fn parse(name: impl Into<String>, text: &str, mode: CodeMode) -> Result<Self> {
        let rounds: Vec<RoundString> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        let n = rounds.first().map_or(0, |r| r.len());
        Self::new(name, n, rounds, mode)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rounds(&self) -> &[RoundString] {
        &self.rounds
    }

    pub fn mode(&self) -> CodeMode {
        self.mode
    }

    pub fn survivors(&self) -> usize {
        self.n - self.rounds.len()
    }
}

pub fn builtin(name: &str) -> Result<FixedSchedule> {
    let (n, strings, mode): (usize, &[&str], CodeMode) = match name {
        "n5-correct" => (
            5,
            &["01 01 01 01 00", "10 10 10 00", "01 11 01", "01 10"],
            CodeMode::Correct,
        ),
        "n4-detect" => (4, &["11 11 11 11", "11 11 11"], CodeMode::Detect),
        _ => return Err(Error::UnknownCode(name.into())),
    };
    let rounds = strings.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    FixedSchedule::new(name, n, rounds, mode)
}

/// The identity followed by the `3n` strings with one non-identity label.
pub fn first_order_errors(n: usize) -> Vec<ErrorString> {
    let mut out = vec![ErrorString::identity(n)];
    for j in 0..n {
        for code in 1..4u64 {
            out.push(ErrorString::from_raw(code << (2 * j), n));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyndromeEntry {
    pub error: ErrorString,
    /// Bit `k` is the parity revealed in round `k`.
    pub syndrome: u64,
    /// Error left on the surviving pairs.
    pub residual: ErrorString,
}

pub fn syndrome_text(syndrome: u64, rounds: usize) -> String {
    (0..rounds)
        .map(|k| if (syndrome >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn effective_syndrome_table(
    schedule: &FixedSchedule,
    variant: Variant,
    errors: &[ErrorString],
) -> Result<Vec<SyndromeEntry>> {
    errors
        .iter()
        .map(|&error| {
            if error.len() != schedule.n {
                return Err(Error::LengthMismatch {
                    expected: schedule.n,
                    actual: error.len(),
                });
            }
            let mut y = error;
            let mut syndrome = 0;
            for (k, &s) in schedule.rounds.iter().enumerate() {
                let out = apply_round(y, s, variant)?;
                syndrome |= u64::from(out.parity) << k;
                y = out.survivor;
            }
            Ok(SyndromeEntry {
                error,
                syndrome,
                residual: y,
            })
        })
        .collect()
}

/// Most likely residual for every syndrome under an IID Werner prior; ties go
/// to the lowest residual index.
pub fn map_decoder(schedule: &FixedSchedule, variant: Variant, prior_fidelity: f64) -> Result<Vec<ErrorString>> {
    let prior = werner_distribution(&IIDWernerSpec::new(prior_fidelity, schedule.n)?)?;
    let joint = syndrome_joint(&prior, &schedule.rounds, variant)?;
    let survivors = schedule.survivors();
    joint
        .iter()
        .map(|weights| {
            let (best, _) =
                weights.iter().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc },
                );
            ErrorString::new(best as u64, survivors)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Collision {
    pub syndrome: String,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeReport {
    pub code: String,
    pub variant: Variant,
    pub mode: CodeMode,
    pub n: usize,
    pub rounds: usize,
    /// Errors examined: the identity and every first-order error.
    pub errors: usize,
    pub distinct_syndromes: usize,
    /// First-order errors with a non-zero syndrome.
    pub detected: usize,
    /// Errors whose MAP correction leaves no residual error.
    pub corrected: usize,
    pub collisions: Vec<Collision>,
}

impl CodeReport {
    pub fn first_order(&self) -> usize {
        self.errors - 1
    }

    pub fn detects_all(&self) -> bool {
        self.detected == self.first_order()
    }

    pub fn corrects_all(&self) -> bool {
        self.corrected == self.errors
    }
}

/// Syndrome distinctness, detection and MAP correction over first-order
/// errors.
pub fn analyze(schedule: &FixedSchedule, variant: Variant) -> Result<CodeReport> {
    let errors = first_order_errors(schedule.n);
    let table = effective_syndrome_table(schedule, variant, &errors)?;
    let decoder = map_decoder(schedule, variant, DECODER_PRIOR_FIDELITY)?;

    let mut by_syndrome: BTreeMap<u64, Vec<ErrorString>> = BTreeMap::new();
    for e in &table {
        by_syndrome.entry(e.syndrome).or_default().push(e.error);
    }
    let rounds = schedule.rounds.len();
    let collisions = by_syndrome
        .iter()
        .filter(|(_, errs)| errs.len() > 1)
        .map(|(&s, errs)| Collision {
            syndrome: syndrome_text(s, rounds),
            errors: errs.iter().map(ToString::to_string).collect(),
        })
        .collect();

    Ok(CodeReport {
        code: schedule.name.clone(),
        variant,
        mode: schedule.mode,
        n: schedule.n,
        rounds,
        errors: table.len(),
        distinct_syndromes: by_syndrome.len(),
        detected: table
            .iter()
            .filter(|e| !e.error.is_identity() && e.syndrome != 0)
            .count(),
        corrected: table
            .iter()
            .filter(|e| decoder[e.syndrome as usize] == e.residual)
            .count(),
        collisions,
    })
}

/// Distinct syndromes left when round `k`'s parity is ignored.
pub fn distinct_syndromes_without_round(schedule: &FixedSchedule, variant: Variant, k: usize) -> Result<usize> {
    let errors = first_order_errors(schedule.n);
    let mut seen: Vec<u64> = effective_syndrome_table(schedule, variant, &errors)?
        .iter()
        .map(|e| e.syndrome & !(1u64 << k))
        .collect();
    seen.sort_unstable();
    seen.dedup();
    Ok(seen.len())
}

/// Fidelity of the surviving pairs given an all-zero syndrome, and the
/// probability of that syndrome.
pub fn postselected_fidelity(schedule: &FixedSchedule, f_in: f64, variant: Variant) -> Result<(f64, f64)> {
    let p = werner_distribution(&IIDWernerSpec::new(f_in, schedule.n)?)?;
    let joint = syndrome_joint(&p, &schedule.rounds, variant)?;
    let accept: f64 = joint[0].iter().sum();
    Ok((joint[0][0] / accept, accept))
}

/// Least-squares slope of `ln(1 - F_cond)` against `ln(1 - W)` over
/// `points` log-spaced Werner parameters in `[w_lo, w_hi]`.
pub fn infidelity_slope(
    schedule: &FixedSchedule,
    variant: Variant,
    w_lo: f64,
    w_hi: f64,
    points: usize,
) -> Result<f64> {
    if !(w_lo < w_hi && w_lo > -1.0 / 3.0 && w_hi < 1.0) || points < 2 {
        return Err(invalid("w_range", format!("[{w_lo}, {w_hi}] with {points} points")));
    }
    let (a, b) = ((1.0 - w_hi).ln(), (1.0 - w_lo).ln());
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for i in 0..points {
        let x = a + (b - a) * i as f64 / (points - 1) as f64;
        let w = 1.0 - x.exp();
        let (f, _) = postselected_fidelity(schedule, (1.0 + 3.0 * w) / 4.0, variant)?;
        xs.push(x);
        ys.push((1.0 - f).ln());
    }
    let mx = xs.iter().sum::<f64>() / points as f64;
    let my = ys.iter().sum::<f64>() / points as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::align_schedule;

    #[test]
    fn builtins_match_the_strings() {
        let c = builtin("n5-correct").unwrap();
        assert_eq!(c.rounds()[0].to_string(), "01 01 01 01 00");
        assert_eq!(c.rounds().len(), 4);
        assert_eq!(c.survivors(), 1);
        let d = builtin("n4-detect").unwrap();
        assert_eq!(d.rounds()[1].to_string(), "11 11 11");
        assert_eq!(d.survivors(), 2);
        assert_eq!(builtin("steane"), Err(Error::UnknownCode("steane".into())));
    }

    #[test]
    fn first_order_count() {
        let e = first_order_errors(5);
        assert_eq!(e.len(), 16);
        assert!(e[1..].iter().all(|x| x.weight() == 1));
    }

    #[test]
    fn identity_has_trivial_syndrome() {
        for name in BUILTIN_CODES {
            let c = builtin(name).unwrap();
            for v in Variant::BOTH {
                let t = effective_syndrome_table(&c, v, &[ErrorString::identity(c.n())]).unwrap();
                assert_eq!(t[0].syndrome, 0);
                assert!(t[0].residual.is_identity());
            }
        }
    }

    #[test]
    fn five_pair_code_corrects_first_order_errors() {
        let c = builtin("n5-correct").unwrap();
        for v in Variant::BOTH {
            let r = analyze(&c, v).unwrap();
            assert_eq!(r.distinct_syndromes, 16);
            assert!(r.collisions.is_empty());
            assert!(r.corrects_all(), "{r:?}");
            assert!(r.detects_all());
            for k in 0..4 {
                assert!(distinct_syndromes_without_round(&c, v, k).unwrap() < 16);
            }
        }
    }

    #[test]
    fn four_pair_code_detects_first_order_errors() {
        let c = builtin("n4-detect").unwrap();
        for v in Variant::BOTH {
            let r = analyze(&c, v).unwrap();
            assert!(r.detects_all(), "{r:?}");
        }
    }

    fn all_errors(n: usize) -> Vec<ErrorString> {
        (0..1u64 << (2 * n)).map(|x| ErrorString::new(x, n).unwrap()).collect()
    }

    #[test]
    fn five_pair_tables_agree_across_variants() {
        // No round of n5-correct has a target symbol 11, so both variants
        // keep the same frame and reveal the same parities.
        let c = builtin("n5-correct").unwrap();
        let errors = all_errors(5);
        let a = effective_syndrome_table(&c, Variant::Cnot, &errors).unwrap();
        let b = effective_syndrome_table(&c, Variant::Cz, &errors).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.syndrome == y.syndrome));
    }

    #[test]
    fn four_pair_tables_agree_once_aligned() {
        // Round 1 of n4-detect has target symbol 11, after which the CZ frame
        // differs; the literal second string then measures another parity.
        let c = builtin("n4-detect").unwrap();
        let errors = all_errors(4);
        let cnot = effective_syndrome_table(&c, Variant::Cnot, &errors).unwrap();
        let literal = effective_syndrome_table(&c, Variant::Cz, &errors).unwrap();
        assert!(cnot.iter().zip(&literal).any(|(x, y)| x.syndrome != y.syndrome));

        let aligned = align_schedule(4, c.rounds(), Variant::Cnot, Variant::Cz)
            .unwrap()
            .unwrap();
        let aligned = FixedSchedule::new("n4-detect", 4, aligned, CodeMode::Detect).unwrap();
        let cz = effective_syndrome_table(&aligned, Variant::Cz, &errors).unwrap();
        // Equal up to a fixed relabeling of outcomes, the same for every error.
        let mut relabel = [None; 4];
        for (x, y) in cnot.iter().zip(&cz) {
            assert_eq!(*relabel[x.syndrome as usize].get_or_insert(y.syndrome), y.syndrome);
        }
        let mut images: Vec<u64> = relabel.iter().flatten().copied().collect();
        images.sort_unstable();
        images.dedup();
        assert_eq!(images.len(), 4);
    }

    #[test]
    fn postselection_examples() {
        let c = builtin("n4-detect").unwrap();
        let (f, accept) = postselected_fidelity(&c, 1.0, Variant::Cnot).unwrap();
        assert_eq!((f, accept), (1.0, 1.0));
        let (_, a1) = postselected_fidelity(&c, 0.99, Variant::Cnot).unwrap();
        let (_, a2) = postselected_fidelity(&c, 0.999, Variant::Cnot).unwrap();
        assert!(a1 < a2 && a2 < 1.0);
    }

    #[test]
    fn postselected_infidelity_is_second_order() {
        let c = builtin("n4-detect").unwrap();
        for v in Variant::BOTH {
            let slope = infidelity_slope(&c, v, 0.95, 0.999, 25).unwrap();
            assert!((slope - 2.0).abs() <= 0.1, "{v}: {slope}");
        }
    }

    #[test]
    fn parse_schedule_file() {
        let text = "# n4 detect\n11 11 11 11\n\n11 11 11  # second\n";
        let c = FixedSchedule::parse("custom", text, CodeMode::Detect).unwrap();
        assert_eq!(
            c,
            FixedSchedule {
                name: "custom".into(),
                ..builtin("n4-detect").unwrap()
            }
        );
        assert!(FixedSchedule::parse("bad", "11 11\n11 11", CodeMode::Detect).is_err());
    }
}
