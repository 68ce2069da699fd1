//! One round of the one-way hashing method on error labels.
//!
//! A round string `S = s_1 ... s_m` carries one two-bit symbol per live pair,
//! written `s1 s2` and packed like an [`ErrorString`]: `s1` at bit `2j` pairs
//! with the phase bit, `s2` at bit `2j + 1` with the amplitude bit, so the
//! revealed parity `S·X` is `popcount(S & X) mod 2`.
//!
//! Two variants are modelled. The CNOT variant rotates each pair so that
//! `s_j·x_j` lands in its amplitude bit and collects those bits into the target
//! amplitude with bilateral CNOTs. The CZ variant collects them into the target
//! phase bit with bilateral CZs and swaps phase and amplitude of the target
//! before measuring.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belldiag::{bit_pair_tokens, pair_mask, ErrorString, PauliLabel, MAX_PAIRS};
use crate::error::{invalid, Error, Result};
use crate::gf2::{ByteTables, Gf2Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Cnot,
    Cz,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Cnot, Variant::Cz];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cnot => "cnot",
            Variant::Cz => "cz",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnot" => Ok(Variant::Cnot),
            "cz" => Ok(Variant::Cz),
            _ => Err(Error::Parse {
                input: s.into(),
                reason: "expected `cnot` or `cz`".into(),
            }),
        }
    }
}

/// Random string driving one round; never all-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoundString {
    bits: u64,
    len: usize,
}

impl RoundString {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_PAIRS {
            return Err(invalid("len", format!("{len} is outside 1..={MAX_PAIRS}")));
        }
        if bits & !pair_mask(len) != 0 {
            return Err(invalid("bits", format!("{bits:#x} has bits beyond {len} pairs")));
        }
        if bits == 0 {
            return Err(Error::ZeroRoundString);
        }
        Ok(Self { bits, len })
    }

    pub fn from_symbols(symbols: &[u8]) -> Result<Self> {
        let bits = symbols
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &s)| acc | (u64::from(s & 0b11) << (2 * j)));
        Self::new(bits, symbols.len())
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn len(self) -> usize {
        self.len
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    /// Symbol code `s1 | s2 << 1` of pair `j`.
    pub fn symbol(self, j: usize) -> u8 {
        ((self.bits >> (2 * j)) & 0b11) as u8
    }

    /// Index of the first non-zero symbol.
    pub fn target(self) -> usize {
        (self.bits.trailing_zeros() / 2) as usize
    }
}

impl fmt::Display for RoundString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len {
            if j > 0 {
                f.write_str(" ")?;
            }
            let s = self.symbol(j);
            write!(f, "{}{}", s & 1, s >> 1)?;
        }
        Ok(())
    }
}

impl FromStr for RoundString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = bit_pair_tokens(s).ok_or_else(|| Error::Parse {
            input: s.to_string(),
            reason: "expected two-bit symbols like `01 10 11`".into(),
        })?;
        Self::from_symbols(&symbols)
    }
}

/// Uniform over the `4^live - 1` non-zero strings; zero draws are redrawn.
pub fn sample_round_string<R: Rng + ?Sized>(live_pairs: usize, rng: &mut R) -> Result<RoundString> {
    if live_pairs == 0 || live_pairs > MAX_PAIRS {
        return Err(invalid(
            "live_pairs",
            format!("{live_pairs} is outside 1..={MAX_PAIRS}"),
        ));
    }
    let mask = pair_mask(live_pairs);
    loop {
        let bits = rng.gen::<u64>() & mask;
        if bits != 0 {
            return Ok(RoundString { bits, len: live_pairs });
        }
    }
}

/// `S·X` over GF(2).
pub fn boolean_inner_product(s: RoundString, x: ErrorString) -> Result<bool> {
    if s.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            actual: x.len(),
        });
    }
    Ok((s.bits() & x.bits()).count_ones() % 2 == 1)
}

/// Single-pair label map induced by a bilateral local rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalMap {
    Identity,
    /// `(a, b) -> (b, a)`
    Swap,
    /// `(a, b) -> (a, a ^ b)`
    AmplitudeXor,
    /// `(a, b) -> (a ^ b, b)`
    PhaseXor,
}

impl LocalMap {
    pub fn apply(self, label: PauliLabel) -> PauliLabel {
        let (a, b) = (label.phase(), label.amplitude());
        match self {
            LocalMap::Identity => label,
            LocalMap::Swap => PauliLabel::new(b, a),
            LocalMap::AmplitudeXor => PauliLabel::new(a, a ^ b),
            LocalMap::PhaseXor => PauliLabel::new(a ^ b, b),
        }
    }

    /// Columns of the 2x2 GF(2) matrix on `(phase, amplitude)`.
    fn columns(self) -> [u64; 2] {
        match self {
            LocalMap::Identity => [0b01, 0b10],
            LocalMap::Swap => [0b10, 0b01],
            LocalMap::AmplitudeXor => [0b11, 0b10],
            LocalMap::PhaseXor => [0b01, 0b11],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Rx,
    Ry,
    Rz,
    Cnot,
    Cz,
    Measure,
}

impl Gate {
    pub fn is_rotation(self) -> bool {
        matches!(self, Gate::Rx | Gate::Ry | Gate::Rz)
    }
}

/// A local rotation `exp(-i angle σ / 2)` applied by one or both parties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub party: Party,
    pub axis: Gate,
    pub angle: f64,
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const THREE_HALVES_PI: f64 = 3.0 * std::f64::consts::FRAC_PI_2;

/// Step-2 rotations for a pair with symbol `s` and the label map they induce.
pub fn step2(variant: Variant, symbol: u8, is_target: bool) -> (Vec<Rotation>, LocalMap) {
    let both_y = || {
        vec![Rotation {
            party: Party::Both,
            axis: Gate::Ry,
            angle: HALF_PI,
        }]
    };
    let split = |axis| {
        vec![
            Rotation {
                party: Party::Alice,
                axis,
                angle: THREE_HALVES_PI,
            },
            Rotation {
                party: Party::Bob,
                axis,
                angle: HALF_PI,
            },
        ]
    };
    // symbol codes: 0b01 is "10", 0b10 is "01", 0b11 is "11".
    match (variant, is_target, symbol) {
        (Variant::Cz, true, 0b10) => (both_y(), LocalMap::Swap),
        (Variant::Cz, true, 0b01) => (vec![], LocalMap::Identity),
        (Variant::Cz, true, 0b11) => (split(Gate::Rz), LocalMap::PhaseXor),
        (_, _, 0b01) => (both_y(), LocalMap::Swap),
        (_, _, 0b11) => (split(Gate::Rx), LocalMap::AmplitudeXor),
        _ => (vec![], LocalMap::Identity),
    }
}

/// Step-4 rotations on the target pair and their label map.
pub fn step4(variant: Variant) -> (Vec<Rotation>, LocalMap) {
    match variant {
        Variant::Cnot => (vec![], LocalMap::Identity),
        Variant::Cz => (
            vec![Rotation {
                party: Party::Both,
                axis: Gate::Ry,
                angle: HALF_PI,
            }],
            LocalMap::Swap,
        ),
    }
}

/// Label map of a bilateral two-pair gate: returns `(control', target')`.
pub fn two_pair_map(variant: Variant, control: PauliLabel, target: PauliLabel) -> (PauliLabel, PauliLabel) {
    let (ac, bc) = (control.phase(), control.amplitude());
    let (at, bt) = (target.phase(), target.amplitude());
    match variant {
        Variant::Cnot => (PauliLabel::new(ac ^ at, bc), PauliLabel::new(at, bt ^ bc)),
        Variant::Cz => (PauliLabel::new(ac ^ bt, bc), PauliLabel::new(at ^ bc, bt)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOutcome {
    /// Parity revealed by comparing Alice's and Bob's outcomes.
    pub parity: bool,
    /// Labels of the pairs that remain, in order.
    pub survivor: ErrorString,
    /// `ℓ` with `parity = ℓ·X` for the round's input `X`.
    pub functional: u64,
}

/// Runs one round on a definite error string by applying the label maps.
pub fn apply_round(x: ErrorString, s: RoundString, variant: Variant) -> Result<RoundOutcome> {
    if s.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            actual: x.len(),
        });
    }
    let t = s.target();
    let mut labels: Vec<PauliLabel> = x.labels().collect();
    for (j, label) in labels.iter_mut().enumerate() {
        *label = step2(variant, s.symbol(j), j == t).1.apply(*label);
    }
    for c in (0..s.len()).filter(|&c| c != t && s.symbol(c) != 0) {
        let (lc, lt) = two_pair_map(variant, labels[c], labels[t]);
        labels[c] = lc;
        labels[t] = lt;
    }
    labels[t] = step4(variant).1.apply(labels[t]);
    let parity = labels[t].amplitude();
    labels.remove(t);
    Ok(RoundOutcome {
        parity,
        survivor: ErrorString::from_labels(&labels)?,
        functional: round_linear_maps(s, variant).functional(),
    })
}

/// Linearization of a round: the pre-measurement transform `T`, the parity
/// functional `ℓ`, and the projection that drops the measured pair.
#[derive(Debug, Clone)]
pub struct RoundMaps {
    transform: Gf2Matrix,
    target: usize,
    pairs: usize,
}

impl RoundMaps {
    pub fn transform(&self) -> &Gf2Matrix {
        &self.transform
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// `ℓ` in the frame of the round's input.
    pub fn functional(&self) -> u64 {
        self.transform.row(2 * self.target + 1)
    }

    /// Removes the target pair from a transformed string.
    #[inline]
    pub fn survivor(&self, y: u64) -> u64 {
        drop_pair(y, self.target)
    }

    #[inline]
    pub fn parity_of_transformed(&self, y: u64) -> bool {
        (y >> (2 * self.target + 1)) & 1 == 1
    }

    /// `(parity, survivor)` for an input string.
    pub fn split(&self, x: u64) -> (bool, u64) {
        let y = self.transform.apply(x);
        (self.parity_of_transformed(y), self.survivor(y))
    }

    pub fn fast(&self) -> FastRound {
        FastRound {
            tables: self.transform.tables(),
            target: self.target,
        }
    }
}

/// [`RoundMaps`] with byte lookup tables for the simulator's inner loop.
#[derive(Debug, Clone)]
pub struct FastRound {
    tables: ByteTables,
    target: usize,
}

impl FastRound {
    #[inline]
    pub fn split(&self, x: u64) -> (bool, u64) {
        let y = self.tables.apply(x);
        ((y >> (2 * self.target + 1)) & 1 == 1, drop_pair(y, self.target))
    }
}

#[inline]
fn drop_pair(y: u64, pair: usize) -> u64 {
    let low_bits = 2 * pair;
    let low = y & ((1u64 << low_bits) - 1);
    let high = (y >> (low_bits + 2)) << low_bits;
    low | high
}

/// Builds `T` by composing the per-step GF(2) matrices.
pub fn round_linear_maps(s: RoundString, variant: Variant) -> RoundMaps {
    let n = s.len();
    let t = s.target();
    let dim = 2 * n;

    let mut local = vec![0u64; dim];
    for j in 0..n {
        let [ca, cb] = step2(variant, s.symbol(j), j == t).1.columns();
        local[2 * j] = ca << (2 * j);
        local[2 * j + 1] = cb << (2 * j);
    }
    let mut transform = Gf2Matrix::from_columns(local);

    for c in (0..n).filter(|&c| c != t && s.symbol(c) != 0) {
        let mut cols: Vec<u64> = (0..dim).map(|i| 1u64 << i).collect();
        let (ac, bc, at, bt) = (2 * c, 2 * c + 1, 2 * t, 2 * t + 1);
        match variant {
            Variant::Cnot => {
                cols[at] |= 1 << ac;
                cols[bc] |= 1 << bt;
            }
            Variant::Cz => {
                cols[bc] |= 1 << at;
                cols[bt] |= 1 << ac;
            }
        }
        transform = Gf2Matrix::from_columns(cols).after(&transform);
    }

    let mut last: Vec<u64> = (0..dim).map(|i| 1u64 << i).collect();
    let [ca, cb] = step4(variant).1.columns();
    last[2 * t] = ca << (2 * t);
    last[2 * t + 1] = cb << (2 * t);
    let transform = Gf2Matrix::from_columns(last).after(&transform);

    RoundMaps {
        transform,
        target: t,
        pairs: n,
    }
}

/// One entry of a compiled gate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateScheduleItem {
    pub round: usize,
    pub step: u8,
    pub party: Party,
    pub gate: Gate,
    /// Rotation angle in radians; absent for entangling gates and measurement.
    pub angle: Option<f64>,
    /// Pair ids; `[control, target]` for entangling gates.
    pub pairs: Vec<usize>,
}

/// Gate list for one round, with pairs indexed among the live pairs.
pub fn compile_round(s: RoundString, variant: Variant) -> Vec<GateScheduleItem> {
    let ids: Vec<usize> = (0..s.len()).collect();
    compile_round_on(s, variant, 0, &ids)
}

fn compile_round_on(s: RoundString, variant: Variant, round: usize, ids: &[usize]) -> Vec<GateScheduleItem> {
    let t = s.target();
    let rotation = |step: u8, r: Rotation, pair: usize| GateScheduleItem {
        round,
        step,
        party: r.party,
        gate: r.axis,
        angle: Some(r.angle),
        pairs: vec![ids[pair]],
    };
    let mut items = Vec::new();
    for j in 0..s.len() {
        for r in step2(variant, s.symbol(j), j == t).0 {
            items.push(rotation(2, r, j));
        }
    }
    let entangler = match variant {
        Variant::Cnot => Gate::Cnot,
        Variant::Cz => Gate::Cz,
    };
    for c in (0..s.len()).filter(|&c| c != t && s.symbol(c) != 0) {
        items.push(GateScheduleItem {
            round,
            step: 3,
            party: Party::Both,
            gate: entangler,
            angle: None,
            pairs: vec![ids[c], ids[t]],
        });
    }
    for r in step4(variant).0 {
        items.push(rotation(4, r, t));
    }
    items.push(GateScheduleItem {
        round,
        step: 4,
        party: Party::Both,
        gate: Gate::Measure,
        angle: None,
        pairs: vec![ids[t]],
    });
    items
}

/// Gate list for a multi-round schedule on `n` pairs. Pair ids refer to the
/// original pairs (0-based); rounds are numbered from 0.
pub fn compile_schedule(n: usize, schedule: &[RoundString], variant: Variant) -> Result<Vec<GateScheduleItem>> {
    let mut ids: Vec<usize> = (0..n).collect();
    let mut items = Vec::new();
    for (k, &s) in schedule.iter().enumerate() {
        if s.len() != ids.len() {
            return Err(Error::LengthMismatch {
                expected: ids.len(),
                actual: s.len(),
            });
        }
        items.extend(compile_round_on(s, variant, k, &ids));
        ids.remove(s.target());
    }
    Ok(items)
}

/// Checks that a schedule fits `n` pairs: round `k` spans `n - k` pairs.
pub fn validate_schedule(n: usize, schedule: &[RoundString]) -> Result<()> {
    if !schedule.is_empty() && schedule.len() >= n {
        return Err(invalid(
            "rounds",
            format!("{} rounds leave no pair out of {n}", schedule.len()),
        ));
    }
    for (k, s) in schedule.iter().enumerate() {
        if s.len() != n - k {
            return Err(Error::LengthMismatch {
                expected: n - k,
                actual: s.len(),
            });
        }
    }
    Ok(())
}

/// Re-expresses a schedule written for `from` as the strings `to` must use
/// to measure the same functionals on the same pairs' information.
///
/// The variants leave the surviving pairs in different label frames when the
/// target symbol is `11`: a control's phase bit absorbs the target's phase
/// under CNOT and its amplitude under CZ. Within a parity branch the two
/// frames differ by an invertible linear map plus a constant, and the map
/// does not depend on the outcome, so the translated schedule can be fixed in
/// advance. Returns `None` if some round's frames are not so related.
pub fn align_schedule(
    n: usize,
    schedule: &[RoundString],
    from: Variant,
    to: Variant,
) -> Result<Option<Vec<RoundString>>> {
    validate_schedule(n, schedule)?;
    // `frame` maps `from`-frame labels of the live pairs to `to`-frame labels.
    let mut frame = Gf2Matrix::identity(2 * n);
    let mut out = Vec::with_capacity(schedule.len());
    for &s in schedule {
        let dim = 2 * s.len();
        let Some(inverse) = frame.inverse() else {
            return Ok(None);
        };
        let bits = (0..dim).fold(0u64, |acc, i| {
            acc | (u64::from((s.bits() & inverse.column(i)).count_ones() & 1) << i)
        });
        let translated = RoundString::new(bits, s.len())?;
        let src = round_linear_maps(s, from);
        let dst = round_linear_maps(translated, to);
        let Some(src_inverse) = src.transform().inverse() else {
            return Ok(None);
        };
        let image = |y: u64| dst.survivor(dst.transform().apply(frame.apply(src_inverse.apply(y))));
        // The discarded phase bit of the source target must not leak into
        // the destination survivors.
        if image(1u64 << (2 * src.target())) != 0 {
            return Ok(None);
        }
        let cols = (0..dim - 2)
            .map(|i| image(insert_pair(1u64 << i, src.target())))
            .collect();
        frame = Gf2Matrix::from_columns(cols);
        out.push(translated);
    }
    Ok(Some(out))
}

/// Inverse of `drop_pair`: opens a zero pair at position `pair`.
fn insert_pair(u: u64, pair: usize) -> u64 {
    let low_bits = 2 * pair;
    let low = u & ((1u64 << low_bits) - 1);
    let high = (u >> low_bits) << (low_bits + 2);
    low | high
}

/// Draws a full schedule of `rounds` rounds on `n` pairs.
pub fn sample_schedule<R: Rng + ?Sized>(n: usize, rounds: usize, rng: &mut R) -> Result<Vec<RoundString>> {
    if rounds >= n {
        return Err(invalid("rounds", format!("{rounds} rounds need more than {n} pairs")));
    }
    (0..rounds).map(|k| sample_round_string(n - k, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_round_strings(n: usize) -> impl Iterator<Item = RoundString> {
        (1..1u64 << (2 * n)).map(move |b| RoundString::new(b, n).unwrap())
    }

    fn all_errors(n: usize) -> impl Iterator<Item = ErrorString> {
        (0..1u64 << (2 * n)).map(move |b| ErrorString::new(b, n).unwrap())
    }

    #[test]
    fn round_string_text_form() {
        let s: RoundString = "01 01 01 01 00".parse().unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.target(), 0);
        assert_eq!(s.to_string(), "01 01 01 01 00");
        let s: RoundString = "00 10 11".parse().unwrap();
        assert_eq!(s.target(), 1);
        assert_eq!(s.symbol(1), 0b01);
        assert_eq!("00 00".parse::<RoundString>(), Err(Error::ZeroRoundString));
        assert!("0 1".parse::<RoundString>().is_ok());
        assert!("012".parse::<RoundString>().is_err());
    }

    #[test]
    fn inner_product_examples() {
        let s: RoundString = "00 01 00".parse().unwrap();
        let x: ErrorString = "00 01 00".parse().unwrap();
        assert!(boolean_inner_product(s, x).unwrap());
        let x: ErrorString = "00 10 00".parse().unwrap();
        assert!(!boolean_inner_product(s, x).unwrap());
        let s: RoundString = "11".parse().unwrap();
        assert!(boolean_inner_product(s, "10".parse().unwrap()).unwrap());
        for s in all_round_strings(2) {
            assert!(!boolean_inner_product(s, ErrorString::identity(2)).unwrap());
        }
        assert!(boolean_inner_product(s, ErrorString::identity(2)).is_err());
    }

    #[test]
    fn sampling_single_pair_is_nonzero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; 4];
        for _ in 0..3000 {
            let s = sample_round_string(1, &mut rng).unwrap();
            seen[s.symbol(0) as usize] += 1;
        }
        assert_eq!(seen[0], 0);
        assert!(seen[1..].iter().all(|&c| c > 900));
    }

    #[test]
    fn sampling_is_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..8)
                .map(|k| sample_round_string(10 - k, &mut rng).unwrap().to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn sampling_chi_square_uniform() {
        // 3 pairs: 63 non-zero strings, 10^5 draws; chi-square with 62 dof.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut counts = vec![0f64; 64];
        for _ in 0..draws {
            counts[sample_round_string(3, &mut rng).unwrap().bits() as usize] += 1.0;
        }
        assert_eq!(counts[0], 0.0);
        let expected = draws as f64 / 63.0;
        let chi2: f64 = counts[1..].iter().map(|c| (c - expected).powi(2) / expected).sum();
        // mean 62, sd sqrt(124) ~ 11.1; 3 sigma ~ 95.
        assert!(chi2 < 62.0 + 3.0 * 124f64.sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn error_free_round() {
        for v in Variant::BOTH {
            for s in all_round_strings(3) {
                let out = apply_round(ErrorString::identity(3), s, v).unwrap();
                assert!(!out.parity);
                assert!(out.survivor.is_identity());
            }
        }
    }

    #[test]
    fn cnot_trace_psi_plus_on_second_pair() {
        let s: RoundString = "01 01".parse().unwrap();
        let x: ErrorString = "00 01".parse().unwrap();
        let out = apply_round(x, s, Variant::Cnot).unwrap();
        assert!(out.parity);
        // Control amplitude is untouched; its phase picks up the target phase (0).
        assert_eq!(out.survivor.to_string(), "01");
    }

    #[test]
    fn parity_equals_inner_product_exhaustive() {
        for v in Variant::BOTH {
            for n in 1..=4 {
                for s in all_round_strings(n) {
                    for x in all_errors(n) {
                        let out = apply_round(x, s, v).unwrap();
                        assert_eq!(out.parity, boolean_inner_product(s, x).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn functional_is_round_string_first_round() {
        for v in Variant::BOTH {
            for s in all_round_strings(3) {
                assert_eq!(round_linear_maps(s, v).functional(), s.bits());
            }
        }
    }

    #[test]
    fn transforms_are_invertible() {
        for v in Variant::BOTH {
            for n in 1..=4 {
                for s in all_round_strings(n) {
                    assert!(round_linear_maps(s, v).transform().is_invertible(), "{s} {v}");
                }
            }
        }
    }

    #[test]
    fn linear_maps_reproduce_apply_round() {
        for v in Variant::BOTH {
            for n in 1..=3 {
                for s in all_round_strings(n) {
                    let maps = round_linear_maps(s, v);
                    let fast = maps.fast();
                    for x in all_errors(n) {
                        let out = apply_round(x, s, v).unwrap();
                        assert_eq!(maps.split(x.bits()), (out.parity, out.survivor.bits()));
                        assert_eq!(fast.split(x.bits()), (out.parity, out.survivor.bits()));
                    }
                }
            }
        }
    }

    #[test]
    fn variants_share_the_parity_functional() {
        for n in 1..=4 {
            for s in all_round_strings(n) {
                assert_eq!(
                    round_linear_maps(s, Variant::Cnot).functional(),
                    round_linear_maps(s, Variant::Cz).functional()
                );
            }
        }
    }

    #[test]
    fn aligned_schedules_agree_on_first_round() {
        let schedule: Vec<RoundString> = ["11 01 10 11", "01 11 00"].iter().map(|s| s.parse().unwrap()).collect();
        let aligned = align_schedule(4, &schedule, Variant::Cnot, Variant::Cz)
            .unwrap()
            .unwrap();
        assert_eq!(aligned[0], schedule[0]);
        let back = align_schedule(4, &aligned, Variant::Cz, Variant::Cnot)
            .unwrap()
            .unwrap();
        assert_eq!(back, schedule);
    }

    #[test]
    fn aligned_syndromes_are_in_bijection() {
        // The CZ outcomes of the aligned schedule are a fixed relabeling of
        // the CNOT outcomes, the same for every input string.
        let syndrome = |x: u64, sched: &[RoundString], v| {
            let mut y = ErrorString::new(x, 4).unwrap();
            sched.iter().enumerate().fold(0u8, |acc, (k, &s)| {
                let out = apply_round(y, s, v).unwrap();
                y = out.survivor;
                acc | (u8::from(out.parity) << k)
            })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let schedule = sample_schedule(4, 3, &mut rng).unwrap();
            let aligned = align_schedule(4, &schedule, Variant::Cnot, Variant::Cz)
                .unwrap()
                .unwrap();
            let mut relabel = [None; 8];
            for x in 0..256 {
                let a = syndrome(x, &schedule, Variant::Cnot) as usize;
                let b = syndrome(x, &aligned, Variant::Cz);
                assert_eq!(*relabel[a].get_or_insert(b), b);
            }
            let mut images: Vec<u8> = relabel.iter().flatten().copied().collect();
            images.sort_unstable();
            images.dedup();
            assert_eq!(images.len(), relabel.iter().flatten().count());
        }
    }

    #[test]
    fn compile_single_symbol_has_no_entanglers() {
        let s: RoundString = "00 10 00".parse().unwrap();
        for v in Variant::BOTH {
            let items = compile_round(s, v);
            assert!(items.iter().all(|i| !matches!(i.gate, Gate::Cnot | Gate::Cz)));
            assert_eq!(items.last().unwrap().gate, Gate::Measure);
        }
    }

    #[test]
    fn compile_cz_ends_with_y_rotation_then_measure() {
        let s: RoundString = "11 01 10".parse().unwrap();
        let items = compile_round(s, Variant::Cz);
        let n = items.len();
        assert_eq!(items[n - 2].gate, Gate::Ry);
        assert_eq!(items[n - 2].party, Party::Both);
        assert_eq!(items[n - 2].angle, Some(HALF_PI));
        assert_eq!(items[n - 2].pairs, vec![0]);
        assert_eq!(items[n - 1].gate, Gate::Measure);
        // Target "11" gets z rotations: Alice 3π/2, Bob π/2.
        assert_eq!(items[0].gate, Gate::Rz);
        assert_eq!((items[0].party, items[0].angle), (Party::Alice, Some(THREE_HALVES_PI)));
        assert_eq!((items[1].party, items[1].angle), (Party::Bob, Some(HALF_PI)));
    }

    #[test]
    fn compile_cnot_one_entangler() {
        let s: RoundString = "01 11".parse().unwrap();
        let items = compile_round(s, Variant::Cnot);
        let gates: Vec<_> = items.iter().filter(|i| i.gate == Gate::Cnot).collect();
        assert_eq!(gates.len(), 1);
        assert_eq!(gates[0].pairs, vec![1, 0]);
        let steps: Vec<u8> = items.iter().map(|i| i.step).collect();
        assert!(steps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn compile_schedule_tracks_original_ids() {
        let schedule: Vec<RoundString> = ["00 01 10", "11 01"].iter().map(|s| s.parse().unwrap()).collect();
        let items = compile_schedule(3, &schedule, Variant::Cnot).unwrap();
        let measured: Vec<_> = items
            .iter()
            .filter(|i| i.gate == Gate::Measure)
            .map(|i| (i.round, i.pairs[0]))
            .collect();
        assert_eq!(measured, vec![(0, 1), (1, 0)]);
        assert!(compile_schedule(3, &schedule[1..], Variant::Cnot).is_err());
    }
}
