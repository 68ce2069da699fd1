//! Bell-diagonal states as classical distributions over Pauli error strings.
//!
//! A pair in the Bell state `(Z^a X^b ⊗ 1)|φ+⟩` carries the label `(a, b)`:
//! `a` is the phase bit, `b` the amplitude bit. An n-pair string is packed into
//! a `u64` with pair `j` at bits `(2j, 2j+1) = (phase, amplitude)`, pair 0 in
//! the least significant position. The packed word doubles as the index into
//! dense weight arrays, so `0` is always `|φ+⟩^{⊗n}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest pair count stored as a dense `4^n` array.
pub const DENSE_MAX_PAIRS: usize = 13;

/// Largest pair count representable in a packed error string.
pub const MAX_PAIRS: usize = 32;

/// Weights at or below this value count as zero when measuring support.
pub const ZERO_WEIGHT: f64 = 1e-300;

const MASS_SLACK: f64 = 1e-12;

/// One of the four Bell states, labelled by its phase and amplitude bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel(u8);

impl PauliLabel {
    pub const PHI_PLUS: Self = Self(0b00);
    pub const PHI_MINUS: Self = Self(0b01);
    pub const PSI_PLUS: Self = Self(0b10);
    pub const PSI_MINUS: Self = Self(0b11);

    pub const ALL: [Self; 4] = [Self::PHI_PLUS, Self::PHI_MINUS, Self::PSI_PLUS, Self::PSI_MINUS];

    pub fn new(phase: bool, amplitude: bool) -> Self {
        Self(u8::from(phase) | (u8::from(amplitude) << 1))
    }

    /// Two-bit code `phase | amplitude << 1`.
    pub fn from_code(code: u8) -> Self {
        Self(code & 0b11)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn phase(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn amplitude(self) -> bool {
        self.0 & 2 == 2
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0
    }

    pub fn bell_name(self) -> &'static str {
        match self.0 {
            0 => "phi+",
            1 => "phi-",
            2 => "psi+",
            _ => "psi-",
        }
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", u8::from(self.phase()), u8::from(self.amplitude()))
    }
}

/// Parses a two-character bit pair `"xy"` into the code `x | y << 1`.
pub(crate) fn parse_bit_pair(token: &str) -> Option<u8> {
    let bytes = token.as_bytes();
    if bytes.len() != 2 {
        return None;
    }
    let bit = |c: u8| match c {
        b'0' => Some(0u8),
        b'1' => Some(1u8),
        _ => None,
    };
    Some(bit(bytes[0])? | (bit(bytes[1])? << 1))
}

/// Splits `"01 10 11"` or `"011011"` into two-character tokens.
pub(crate) fn bit_pair_tokens(s: &str) -> Option<Vec<u8>> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.len() & 1 == 1 {
        return None;
    }
    compact
        .as_bytes()
        .chunks(2)
        .map(|c| std::str::from_utf8(c).ok().and_then(parse_bit_pair))
        .collect()
}

/// Packed Pauli error string over `n` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErrorString {
    bits: u64,
    n: usize,
}

impl ErrorString {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n > MAX_PAIRS {
            return Err(invalid("n", format!("at most {MAX_PAIRS} pairs")));
        }
        if bits & !pair_mask(n) != 0 {
            return Err(invalid("bits", format!("{bits:#x} has bits beyond {n} pairs")));
        }
        Ok(Self { bits, n })
    }

    /// Caller guarantees `bits` fits in `n` pairs.
    pub(crate) fn from_raw(bits: u64, n: usize) -> Self {
        debug_assert!(n <= MAX_PAIRS && bits & !pair_mask(n) == 0);
        Self { bits, n }
    }

    pub fn identity(n: usize) -> Self {
        Self { bits: 0, n }
    }

    pub fn from_labels(labels: &[PauliLabel]) -> Result<Self> {
        let bits = labels
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, l)| acc | (u64::from(l.code()) << (2 * j)));
        Self::new(bits, labels.len())
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    /// Index into a dense `4^n` weight array.
    pub fn index(self) -> usize {
        self.bits as usize
    }

    pub fn len(self) -> usize {
        self.n
    }

    pub fn is_empty(self) -> bool {
        self.n == 0
    }

    pub fn label(self, pair: usize) -> PauliLabel {
        PauliLabel::from_code(((self.bits >> (2 * pair)) & 0b11) as u8)
    }

    pub fn labels(self) -> impl Iterator<Item = PauliLabel> {
        (0..self.n).map(move |j| self.label(j))
    }

    /// Number of pairs not in `|φ+⟩`.
    pub fn weight(self) -> usize {
        pair_weight(self.bits)
    }

    pub fn is_identity(self) -> bool {
        self.bits == 0
    }
}

impl fmt::Display for ErrorString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, l) in self.labels().enumerate() {
            if j > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for ErrorString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let codes = bit_pair_tokens(s).ok_or_else(|| Error::Parse {
            input: s.to_string(),
            reason: "expected a sequence of two-bit labels like `00 01 11`".into(),
        })?;
        let labels: Vec<_> = codes.into_iter().map(PauliLabel::from_code).collect();
        Self::from_labels(&labels)
    }
}

pub(crate) fn pair_mask(n: usize) -> u64 {
    if n >= 32 {
        u64::MAX
    } else {
        (1u64 << (2 * n)) - 1
    }
}

/// Count of non-identity pairs in a packed word.
pub(crate) fn pair_weight(bits: u64) -> usize {
    let occupied = (bits | (bits >> 1)) & 0x5555_5555_5555_5555;
    occupied.count_ones() as usize
}

/// Per-pair fidelity and Werner parameter of an IID Werner input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IIDWernerSpec {
    fidelity: f64,
    n: usize,
}

impl IIDWernerSpec {
    pub fn new(fidelity: f64, n: usize) -> Result<Self> {
        if !(fidelity > 0.0 && fidelity <= 1.0) {
            return Err(invalid("fidelity", format!("{fidelity} is outside (0, 1]")));
        }
        if n == 0 {
            return Err(invalid("n", "at least one pair is required"));
        }
        Ok(Self { fidelity, n })
    }

    pub fn from_werner_parameter(w: f64, n: usize) -> Result<Self> {
        if !(w > -1.0 / 3.0 && w <= 1.0) {
            return Err(invalid("W", format!("{w} is outside (-1/3, 1]")));
        }
        Self::new((1.0 + 3.0 * w) / 4.0, n)
    }

    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }

    pub fn werner_parameter(&self) -> f64 {
        (4.0 * self.fidelity - 1.0) / 3.0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of each non-identity label on a single pair.
    pub fn error_weight(&self) -> f64 {
        (1.0 - self.fidelity) / 3.0
    }

    /// Single-pair label distribution indexed by label code.
    pub fn pair_distribution(&self) -> [f64; 4] {
        let q = self.error_weight();
        [self.fidelity, q, q, q]
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.fidelity, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Weights {
    Dense(Vec<f64>),
    /// Sorted by index, no duplicates, no zero entries.
    Sparse(Vec<(u64, f64)>),
}

/// Distribution over error strings; the classical description of a
/// Bell-diagonal state on `n` pairs. Possibly sub-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct BellDiagonalDistribution {
    n: usize,
    weights: Weights,
}

impl BellDiagonalDistribution {
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if n > DENSE_MAX_PAIRS {
            return Err(Error::DenseCapacity {
                pairs: n,
                max: DENSE_MAX_PAIRS,
            });
        }
        if weights.len() != 1usize << (2 * n) {
            return Err(Error::LengthMismatch {
                expected: 1 << (2 * n),
                actual: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            check_weight(i as u64, w)?;
        }
        let dist = Self {
            n,
            weights: Weights::Dense(weights),
        };
        dist.check_mass()?;
        Ok(dist)
    }

    /// Builds a sparse distribution; repeated indices are summed.
    pub fn from_sparse(n: usize, entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        if n > MAX_PAIRS {
            return Err(invalid("n", format!("at most {MAX_PAIRS} pairs")));
        }
        let mask = pair_mask(n);
        let mut entries: Vec<(u64, f64)> = entries.into_iter().collect();
        for &(x, w) in &entries {
            check_weight(x, w)?;
            if x & !mask != 0 {
                return Err(invalid("index", format!("{x:#x} has bits beyond {n} pairs")));
            }
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(entries.len());
        for (x, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        merged.retain(|e| e.1 > 0.0);
        let dist = Self {
            n,
            weights: Weights::Sparse(merged),
        };
        dist.check_mass()?;
        Ok(dist)
    }

    pub fn point_mass(x: ErrorString) -> Self {
        Self {
            n: x.len(),
            weights: Weights::Sparse(vec![(x.bits(), 1.0)]),
        }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let size = dense_len(n)?;
        Self::from_dense(n, vec![1.0 / size as f64; size])
    }

    fn check_mass(&self) -> Result<()> {
        let mass = self.mass();
        if mass > 1.0 + MASS_SLACK {
            return Err(Error::ExcessMass(mass));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> f64 {
        neumaier_sum(self.iter().map(|(_, w)| w))
    }

    pub fn weight(&self, x: ErrorString) -> f64 {
        match &self.weights {
            Weights::Dense(v) => v.get(x.index()).copied().unwrap_or(0.0),
            Weights::Sparse(e) => e
                .binary_search_by_key(&x.bits(), |p| p.0)
                .map(|i| e[i].1)
                .unwrap_or(0.0),
        }
    }

    /// Non-zero entries in increasing index order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u64, f64)> + '_> {
        match &self.weights {
            Weights::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(i, &w)| (i as u64, w)),
            ),
            Weights::Sparse(e) => Box::new(e.iter().copied()),
        }
    }

    pub fn as_dense(&self) -> Option<&[f64]> {
        match &self.weights {
            Weights::Dense(v) => Some(v),
            Weights::Sparse(_) => None,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.weights, Weights::Dense(_))
    }

    /// Dense copy of the weights; fails above [`DENSE_MAX_PAIRS`].
    pub fn to_dense(&self) -> Result<Self> {
        match &self.weights {
            Weights::Dense(_) => Ok(self.clone()),
            Weights::Sparse(e) => {
                let mut v = vec![0.0; dense_len(self.n)?];
                for &(x, w) in e {
                    v[x as usize] = w;
                }
                Ok(Self {
                    n: self.n,
                    weights: Weights::Dense(v),
                })
            }
        }
    }

    pub fn into_dense_vec(self) -> Result<Vec<f64>> {
        match self.to_dense()?.weights {
            Weights::Dense(v) => Ok(v),
            Weights::Sparse(_) => unreachable!(),
        }
    }

    /// Weight of the all-`φ+` string, i.e. the fidelity to `|φ+⟩^{⊗n}`.
    pub fn fidelity_to_target(&self) -> f64 {
        self.weight(ErrorString::identity(self.n))
    }

    /// Generalized fidelity and purified distance to `other`.
    pub fn fidelity_and_purified_distance(&self, other: &Self) -> Result<(f64, f64)> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        // Sparse merge over the union of supports.
        let b: Vec<(u64, f64)> = other.iter().collect();
        let mut overlap = Vec::new();
        let mut j = 0;
        for (x, p) in self.iter() {
            while j < b.len() && b[j].0 < x {
                j += 1;
            }
            if j < b.len() && b[j].0 == x {
                overlap.push((p * b[j].1).sqrt());
            }
        }
        Ok(fidelity_from_parts(neumaier_sum(overlap), self.mass(), other.mass()))
    }
}

fn check_weight(index: u64, w: f64) -> Result<()> {
    if w.is_nan() || w < 0.0 {
        return Err(Error::NegativeWeight { index, weight: w });
    }
    Ok(())
}

pub(crate) fn dense_len(n: usize) -> Result<usize> {
    if n > DENSE_MAX_PAIRS {
        return Err(Error::DenseCapacity {
            pairs: n,
            max: DENSE_MAX_PAIRS,
        });
    }
    Ok(1usize << (2 * n))
}

/// Dense distribution of `n` IID Werner pairs.
pub fn werner_distribution(spec: &IIDWernerSpec) -> Result<BellDiagonalDistribution> {
    let n = spec.n();
    let size = dense_len(n)?;
    let f = spec.fidelity();
    let q = spec.error_weight();
    let f_pow: Vec<f64> = (0..=n as i32).map(|k| f.powi(k)).collect();
    let q_pow: Vec<f64> = (0..=n as i32).map(|k| q.powi(k)).collect();
    let weights = (0..size as u64)
        .map(|x| {
            let w = pair_weight(x);
            f_pow[n - w] * q_pow[w]
        })
        .collect();
    BellDiagonalDistribution::from_dense(n, weights)
}

/// Fidelity of a Bell-diagonal state to `|φ+⟩^{⊗n}`.
pub fn fidelity_to_target(p: &BellDiagonalDistribution) -> f64 {
    p.fidelity_to_target()
}

/// Generalized fidelity and purified distance between two sub-normalized
/// distributions over the same index set.
pub fn classical_fidelity_and_purified_distance(p: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        check_weight(i as u64, a)?;
        check_weight(i as u64, b)?;
    }
    let (mp, mq) = (neumaier_sum(p.iter().copied()), neumaier_sum(q.iter().copied()));
    if mp > 1.0 + MASS_SLACK {
        return Err(Error::ExcessMass(mp));
    }
    if mq > 1.0 + MASS_SLACK {
        return Err(Error::ExcessMass(mq));
    }
    let overlap = neumaier_sum(p.iter().zip(q).map(|(a, b)| (a * b).sqrt()));
    Ok(fidelity_from_parts(overlap, mp, mq))
}

fn fidelity_from_parts(overlap: f64, mass_p: f64, mass_q: f64) -> (f64, f64) {
    let defect = ((1.0 - mass_p).max(0.0) * (1.0 - mass_q).max(0.0)).sqrt();
    let fid = (overlap + defect).powi(2).clamp(0.0, 1.0);
    (fid, (1.0 - fid).max(0.0).sqrt())
}

/// Compensated summation.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
