//! Density-matrix simulation of the literal protocol gates for at most three
//! pairs. Used to check every label map the fast simulator relies on.
//!
//! Qubit `2j` is Alice's half of pair `j` and qubit `2j + 1` is Bob's; qubit
//! `q` is bit `q` of a basis index. Rotations are `exp(-i theta sigma / 2)`.

use num_complex::Complex64 as C;
use serde::Serialize;

use crate::belldiag::{BellDiagonalDistribution, ErrorString, PauliLabel};
use crate::error::{invalid, Result};
use crate::protocol::{step2, step4, two_pair_map, validate_schedule, Gate, Party, Rotation, RoundString, Variant};

pub const MAX_ORACLE_PAIRS: usize = 3;

/// Off-diagonal Bell-basis mass tolerated before a state counts as not
/// Bell-diagonal.
pub const BELL_DIAGONAL_TOL: f64 = 1e-10;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

type Mat2 = [[C; 2]; 2];

fn rotation_matrix(axis: Gate, angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    match axis {
        Gate::Rx => [[C::new(c, 0.0), C::new(0.0, -s)], [C::new(0.0, -s), C::new(c, 0.0)]],
        Gate::Ry => [[C::new(c, 0.0), C::new(-s, 0.0)], [C::new(s, 0.0), C::new(c, 0.0)]],
        Gate::Rz => [[C::new(c, -s), ZERO], [ZERO, C::new(c, s)]],
        _ => panic!("{axis:?} is not a rotation"),
    }
}

const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, C::new(-1.0, 0.0)]];

/// `(Z^a X^b ⊗ I)|φ+⟩` on one pair, indexed by `alice | bob << 1`.
fn bell_pair_vector(label: PauliLabel) -> [C; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = [ZERO; 4];
    for alice in 0..2usize {
        // |φ+⟩ has Bob equal to Alice; X^b then flips Alice.
        let bob = alice;
        let a_out = alice ^ usize::from(label.amplitude());
        let sign = if label.phase() && a_out == 1 { -h } else { h };
        v[a_out | (bob << 1)] = C::new(sign, 0.0);
    }
    v
}

/// Density matrix on `2 * pairs` qubits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPartyState {
    pairs: usize,
    dim: usize,
    rho: Vec<C>,
}

impl TwoPartyState {
    pub fn from_distribution(p: &BellDiagonalDistribution) -> Result<Self> {
        let pairs = p.n();
        if pairs == 0 || pairs > MAX_ORACLE_PAIRS {
            return Err(invalid(
                "n",
                format!("the oracle handles 1..={MAX_ORACLE_PAIRS} pairs, got {pairs}"),
            ));
        }
        let dim = 1usize << (2 * pairs);
        let mut rho = vec![ZERO; dim * dim];
        for (x, w) in p.iter() {
            let v = bell_vector(ErrorString::new(x, pairs)?);
            for r in 0..dim {
                if v[r] == ZERO {
                    continue;
                }
                for c in 0..dim {
                    rho[r * dim + c] += v[r] * v[c].conj() * w;
                }
            }
        }
        Ok(Self { pairs, dim, rho })
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.rho[i * self.dim + i].re).sum()
    }

    fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let (d, bit) = (self.dim, 1usize << q);
        for r0 in (0..d).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            for c in 0..d {
                let (x0, x1) = (self.rho[r0 * d + c], self.rho[r1 * d + c]);
                self.rho[r0 * d + c] = m[0][0] * x0 + m[0][1] * x1;
                self.rho[r1 * d + c] = m[1][0] * x0 + m[1][1] * x1;
            }
        }
        for r in 0..d {
            for c0 in (0..d).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let (y0, y1) = (self.rho[r * d + c0], self.rho[r * d + c1]);
                self.rho[r * d + c0] = y0 * m[0][0].conj() + y1 * m[0][1].conj();
                self.rho[r * d + c1] = y0 * m[1][0].conj() + y1 * m[1][1].conj();
            }
        }
    }

    fn qubits(pair: usize, party: Party) -> Vec<usize> {
        match party {
            Party::Alice => vec![2 * pair],
            Party::Bob => vec![2 * pair + 1],
            Party::Both => vec![2 * pair, 2 * pair + 1],
        }
    }

    pub fn rotate(&mut self, pair: usize, rotation: Rotation) {
        let m = rotation_matrix(rotation.axis, rotation.angle);
        for q in Self::qubits(pair, rotation.party) {
            self.apply_1q(q, &m);
        }
    }

    /// Bilateral CNOT or CZ between pairs `control` and `target`.
    pub fn entangle(&mut self, gate: Gate, control: usize, target: usize) {
        for party in 0..2 {
            let (cb, tb) = (1usize << (2 * control + party), 1usize << (2 * target + party));
            match gate {
                Gate::Cnot => {
                    let perm = |i: usize| if i & cb != 0 { i ^ tb } else { i };
                    let old = self.rho.clone();
                    let d = self.dim;
                    for r in 0..d {
                        for c in 0..d {
                            self.rho[perm(r) * d + perm(c)] = old[r * d + c];
                        }
                    }
                }
                Gate::Cz => {
                    let sign = |i: usize| if i & cb != 0 && i & tb != 0 { -1.0 } else { 1.0 };
                    let d = self.dim;
                    for r in 0..d {
                        for c in 0..d {
                            self.rho[r * d + c] *= sign(r) * sign(c);
                        }
                    }
                }
                _ => panic!("{gate:?} is not an entangling gate"),
            }
        }
    }

    /// Bob applies `Z^a X^b` on pair `pair`, undoing label `(a, b)`.
    pub fn correct(&mut self, pair: usize, label: PauliLabel) {
        if label.amplitude() {
            self.apply_1q(2 * pair + 1, &PAULI_X);
        }
        if label.phase() {
            self.apply_1q(2 * pair + 1, &PAULI_Z);
        }
    }

    /// Computational-basis measurement of both halves of `pair`. Returns the
    /// outcome `(alice, bob)`, its probability and the normalized state of
    /// the other pairs for every outcome with non-zero probability.
    pub fn measure(&self, pair: usize) -> Vec<((bool, bool), f64, TwoPartyState)> {
        let (qa, qb) = (2 * pair, 2 * pair + 1);
        let rest_dim = self.dim / 4;
        let expand = |j: usize, a: usize, b: usize| {
            let low = j & ((1 << qa) - 1);
            let high = (j >> qa) << (qb + 1);
            low | high | (a << qa) | (b << qb)
        };
        let mut out = Vec::new();
        for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let mut rho = vec![ZERO; rest_dim * rest_dim];
            for r in 0..rest_dim {
                for c in 0..rest_dim {
                    rho[r * rest_dim + c] = self.rho[expand(r, a, b) * self.dim + expand(c, a, b)];
                }
            }
            let prob: f64 = (0..rest_dim).map(|i| rho[i * rest_dim + i].re).sum();
            if prob > 1e-15 {
                for v in &mut rho {
                    *v /= prob;
                }
                out.push((
                    (a == 1, b == 1),
                    prob,
                    TwoPartyState {
                        pairs: self.pairs - 1,
                        dim: rest_dim,
                        rho,
                    },
                ));
            }
        }
        out
    }

    /// `⟨B_X|ρ|B_X⟩` for every error string `X`, and the largest
    /// off-diagonal modulus in the Bell basis.
    pub fn bell_decomposition(&self) -> (Vec<f64>, f64) {
        let d = self.dim;
        let basis: Vec<Vec<C>> = (0..d as u64)
            .map(|x| bell_vector(ErrorString::new(x, self.pairs).expect("index fits")))
            .collect();
        // ρ·B_Y for every Y, then project onto B_X.
        let rho_b: Vec<Vec<C>> = basis
            .iter()
            .map(|v| {
                (0..d)
                    .map(|r| (0..d).map(|c| self.rho[r * d + c] * v[c]).sum())
                    .collect()
            })
            .collect();
        let mut diag = vec![0.0; d];
        let mut off = 0.0f64;
        for (x, bx) in basis.iter().enumerate() {
            for (y, col) in rho_b.iter().enumerate() {
                let e: C = bx.iter().zip(col).map(|(a, b)| a.conj() * b).sum();
                if x == y {
                    diag[x] = e.re;
                } else {
                    off = off.max(e.norm());
                }
            }
        }
        (diag, off)
    }

    /// `⟨Φ|ρ|Φ⟩` with `Φ` the all-`φ+` state.
    pub fn fidelity_to_target(&self) -> f64 {
        let v = bell_vector(ErrorString::identity(self.pairs));
        let d = self.dim;
        let mut acc = ZERO;
        for r in 0..d {
            if v[r] == ZERO {
                continue;
            }
            for c in 0..d {
                acc += v[r].conj() * self.rho[r * d + c] * v[c];
            }
        }
        acc.re
    }
}

fn bell_vector(x: ErrorString) -> Vec<C> {
    let per_pair: Vec<[C; 4]> = x.labels().map(bell_pair_vector).collect();
    let dim = 1usize << (2 * x.len());
    (0..dim)
        .map(|i| {
            per_pair
                .iter()
                .enumerate()
                .fold(ONE, |acc, (j, v)| acc * v[(i >> (2 * j)) & 3])
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleBranch {
    /// `(alice, bob)` outcome of every round.
    pub outcomes: Vec<(bool, bool)>,
    pub probability: f64,
    /// Bob's correction, one label per surviving pair.
    pub correction: String,
    /// Fidelity to `Φ` after the correction, conditioned on this branch.
    pub fidelity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRun {
    /// Expected output fidelity over all branches.
    pub fidelity: f64,
    pub branches: Vec<OracleBranch>,
    /// Largest Bell-basis off-diagonal modulus seen after any step.
    pub max_off_diagonal: f64,
}

/// Outcomes so far, their probability, and the normalized post-measurement state.
type Branch = (Vec<(bool, bool)>, f64, TwoPartyState);

/// Applies the physical gates of every round, branches on all measurement
/// outcomes, applies the MAP Pauli correction and averages the fidelity.
pub fn dm_simulate(p: &BellDiagonalDistribution, schedule: &[RoundString], variant: Variant) -> Result<OracleRun> {
    if p.n() > MAX_ORACLE_PAIRS {
        return Err(invalid(
            "n",
            format!("the oracle handles at most {MAX_ORACLE_PAIRS} pairs"),
        ));
    }
    validate_schedule(p.n(), schedule)?;
    let mut max_off = 0.0f64;
    let mut check = |state: &TwoPartyState| {
        max_off = max_off.max(state.bell_decomposition().1);
    };

    let initial = TwoPartyState::from_distribution(p)?;
    check(&initial);
    let mut branches: Vec<Branch> = vec![(Vec::new(), 1.0, initial)];
    let entangler = match variant {
        Variant::Cnot => Gate::Cnot,
        Variant::Cz => Gate::Cz,
    };
    for &s in schedule {
        let t = s.target();
        let mut next = Vec::new();
        for (history, prob, mut state) in branches {
            for j in 0..s.len() {
                for r in step2(variant, s.symbol(j), j == t).0 {
                    state.rotate(j, r);
                }
            }
            check(&state);
            for c in (0..s.len()).filter(|&c| c != t && s.symbol(c) != 0) {
                state.entangle(entangler, c, t);
            }
            check(&state);
            for r in step4(variant).0 {
                state.rotate(t, r);
            }
            check(&state);
            for (outcome, q, child) in state.measure(t) {
                check(&child);
                let mut h = history.clone();
                h.push(outcome);
                next.push((h, prob * q, child));
            }
        }
        branches = next;
    }

    let mut out = Vec::with_capacity(branches.len());
    for (outcomes, probability, mut state) in branches {
        let (diag, _) = state.bell_decomposition();
        let (best, _) = diag.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc },
        );
        let correction = ErrorString::new(best as u64, state.pairs())?;
        for (j, label) in correction.labels().enumerate() {
            state.correct(j, label);
        }
        out.push(OracleBranch {
            outcomes,
            probability,
            correction: correction.to_string(),
            fidelity: state.fidelity_to_target(),
        });
    }
    let fidelity = out.iter().map(|b| b.probability * b.fidelity).sum();
    Ok(OracleRun {
        fidelity,
        branches: out,
        max_off_diagonal: max_off,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelCheck {
    pub stage: String,
    pub input: String,
    pub declared: String,
    /// Bell label(s) the physical gates produced, if the result is a Bell
    /// basis state.
    pub observed: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelMapReport {
    pub variant: Variant,
    pub checks: Vec<LabelCheck>,
}

impl LabelMapReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LabelCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }
}

/// The Bell string a pure state equals, if any.
fn identify(state: &TwoPartyState) -> Option<ErrorString> {
    let (diag, off) = state.bell_decomposition();
    if off > BELL_DIAGONAL_TOL {
        return None;
    }
    let (x, &w) = diag.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    ((1.0 - w).abs() <= BELL_DIAGONAL_TOL).then(|| ErrorString::new(x as u64, state.pairs()).expect("index fits"))
}

fn pure(x: ErrorString) -> TwoPartyState {
    TwoPartyState::from_distribution(&BellDiagonalDistribution::point_mass(x).to_dense().expect("small"))
        .expect("small")
}

/// Runs the physical Step-2, Step-3 and Step-4 gates on every Bell basis
/// input and compares the outcome with the label maps used by the fast
/// simulator. Also checks that the target's outcomes agree exactly when its
/// amplitude bit is 0.
pub fn validate_label_maps(variant: Variant) -> LabelMapReport {
    let mut checks = Vec::new();
    let mut record = |stage: String, input: String, declared: String, observed: Option<String>| {
        let ok = observed.as_deref() == Some(declared.as_str());
        checks.push(LabelCheck {
            stage,
            input,
            declared,
            observed,
            ok,
        });
    };

    let single = |rotations: &[Rotation], label: PauliLabel| {
        let mut state = pure(ErrorString::from_labels(&[label]).expect("one pair"));
        for &r in rotations {
            state.rotate(0, r);
        }
        identify(&state).map(|x| x.to_string())
    };

    for symbol in 0..4u8 {
        for is_target in [false, true] {
            let (rotations, map) = step2(variant, symbol, is_target);
            for label in PauliLabel::ALL {
                record(
                    format!(
                        "step 2, s = {}{}, {}",
                        symbol & 1,
                        symbol >> 1,
                        if is_target { "target" } else { "control" }
                    ),
                    label.to_string(),
                    map.apply(label).to_string(),
                    single(&rotations, label),
                );
            }
        }
    }

    let (rotations, map) = step4(variant);
    for label in PauliLabel::ALL {
        record(
            "step 4".into(),
            label.to_string(),
            map.apply(label).to_string(),
            single(&rotations, label),
        );
    }

    let gate = match variant {
        Variant::Cnot => Gate::Cnot,
        Variant::Cz => Gate::Cz,
    };
    // Both orderings of control and target within the register.
    for (control, target) in [(0usize, 1usize), (1, 0)] {
        for lc in PauliLabel::ALL {
            for lt in PauliLabel::ALL {
                let mut labels = [PauliLabel::PHI_PLUS; 2];
                labels[control] = lc;
                labels[target] = lt;
                let input = ErrorString::from_labels(&labels).expect("two pairs");
                let (dc, dt) = two_pair_map(variant, lc, lt);
                labels[control] = dc;
                labels[target] = dt;
                let declared = ErrorString::from_labels(&labels).expect("two pairs");
                let mut state = pure(input);
                state.entangle(gate, control, target);
                record(
                    format!("step 3, control pair {control}, target pair {target}"),
                    input.to_string(),
                    declared.to_string(),
                    identify(&state).map(|x| x.to_string()),
                );
            }
        }
    }

    for label in PauliLabel::ALL {
        let state = pure(ErrorString::from_labels(&[label]).expect("one pair"));
        let equal_mass: f64 = state
            .measure(0)
            .iter()
            .filter(|((a, b), _, _)| a == b)
            .map(|(_, q, _)| q)
            .sum();
        let observed = if (equal_mass - 1.0).abs() < BELL_DIAGONAL_TOL {
            Some("equal")
        } else if equal_mass.abs() < BELL_DIAGONAL_TOL {
            Some("opposite")
        } else {
            None
        };
        record(
            "measurement".into(),
            label.to_string(),
            if label.amplitude() { "opposite" } else { "equal" }.into(),
            observed.map(str::to_string),
        );
    }

    LabelMapReport { variant, checks }
}

/// Whether each Step-2 rotation product is a Bell-basis permutation.
pub fn step2_is_bell_permutation(variant: Variant, symbol: u8, is_target: bool) -> bool {
    let (rotations, _) = step2(variant, symbol, is_target);
    let images: Option<Vec<u64>> = PauliLabel::ALL
        .iter()
        .map(|&label| {
            let mut state = pure(ErrorString::from_labels(&[label]).expect("one pair"));
            for &r in &rotations {
                state.rotate(0, r);
            }
            identify(&state).map(|x| x.bits())
        })
        .collect();
    images.is_some_and(|mut v| {
        v.sort_unstable();
        v.dedup();
        v.len() == 4
    })
}
