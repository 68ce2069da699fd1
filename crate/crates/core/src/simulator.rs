//! Classical simulation of hashing rounds on Bell-diagonal inputs.
//!
//! A Bell-diagonal input stays Bell-diagonal under every round, so the whole
//! protocol acts on a probability vector over error strings. Each round maps
//! string `x` to `T x`, reads the parity from the target amplitude bit and
//! drops the target pair. Branches are the parity histories; a branch holds
//! unnormalized joint weights, so the expected output fidelity after MAP
//! correction is the sum over branches of the largest entry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belldiag::{neumaier_sum, werner_distribution, BellDiagonalDistribution, IIDWernerSpec};
use crate::error::{invalid, Error, Result};
use crate::protocol::{round_linear_maps, sample_schedule, validate_schedule, RoundString, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Sum over both outcomes of every round.
    ExactBranch,
    /// Draw the true error string and follow the branch it selects.
    SampledSyndrome,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ExactBranch => "exact-branch",
            Mode::SampledSyndrome => "sampled-syndrome",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-branch" | "exact" => Ok(Mode::ExactBranch),
            "sampled-syndrome" | "sampled" => Ok(Mode::SampledSyndrome),
            _ => Err(Error::Parse {
                input: s.into(),
                reason: "expected `exact-branch` or `sampled-syndrome`".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Truncation {
    None,
    /// Keep the `K` largest weights.
    TopK(usize),
    /// Keep the fewest largest weights carrying mass at least `1 - delta`.
    Mass(f64),
}

/// Dense weights of `P` (which must be dense-representable) and a check that
/// the distribution is normalized.
fn dense_weights(p: &BellDiagonalDistribution) -> Result<Vec<f64>> {
    let weights = match p.as_dense() {
        Some(w) => w.to_vec(),
        None => p.to_dense()?.into_dense_vec()?,
    };
    Ok(weights)
}

fn check_rounds(n: usize, schedule: &[RoundString]) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDistribution);
    }
    validate_schedule(n, schedule)
}

/// Expected output fidelity after each prefix of the schedule: entry `k` is
/// the value after `k` rounds, so the result has `schedule.len() + 1` entries.
pub fn exact_branch_profile(
    p: &BellDiagonalDistribution,
    schedule: &[RoundString],
    variant: Variant,
) -> Result<Vec<f64>> {
    check_rounds(p.n(), schedule)?;
    let mut branches = vec![dense_weights(p)?];
    let mut profile = Vec::with_capacity(schedule.len() + 1);
    profile.push(map_fidelity(&branches));
    for &s in schedule {
        let round = round_linear_maps(s, variant).fast();
        let child_len = branches[0].len() / 4;
        let mut next = Vec::with_capacity(2 * branches.len());
        for weights in &branches {
            let mut children = [vec![0.0; child_len], vec![0.0; child_len]];
            for (x, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    let (parity, survivor) = round.split(x as u64);
                    children[usize::from(parity)][survivor as usize] += w;
                }
            }
            for child in children {
                if child.iter().any(|&w| w != 0.0) {
                    next.push(child);
                }
            }
        }
        branches = next;
        profile.push(map_fidelity(&branches));
    }
    Ok(profile)
}

/// `Σ_branch max_x w(x)`: the largest joint weight is the MAP class.
fn map_fidelity(branches: &[Vec<f64>]) -> f64 {
    neumaier_sum(branches.iter().map(|b| b.iter().copied().fold(0.0, f64::max)))
}

/// Expected output fidelity of one schedule, averaged over outcomes.
pub fn run_trial_exact_branch(p: &BellDiagonalDistribution, schedule: &[RoundString], variant: Variant) -> Result<f64> {
    Ok(*exact_branch_profile(p, schedule, variant)?
        .last()
        .expect("profile is non-empty"))
}

/// Posterior MAP fidelity along the branch selected by a sampled error
/// string, after each prefix of the schedule.
pub fn sampled_profile<R: Rng + ?Sized>(
    p: &BellDiagonalDistribution,
    schedule: &[RoundString],
    variant: Variant,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_rounds(p.n(), schedule)?;
    let mut weights = dense_weights(p)?;
    let mut x = sample_index(&weights, rng)?;
    let mut profile = Vec::with_capacity(schedule.len() + 1);
    profile.push(posterior_max(&weights));
    for &s in schedule {
        let round = round_linear_maps(s, variant).fast();
        let (true_parity, survivor) = round.split(x);
        x = survivor;
        let mut child = vec![0.0; weights.len() / 4];
        for (y, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                let (parity, s) = round.split(y as u64);
                if parity == true_parity {
                    child[s as usize] += w;
                }
            }
        }
        weights = child;
        profile.push(posterior_max(&weights));
    }
    Ok(profile)
}

pub fn run_trial_sampled<R: Rng + ?Sized>(
    p: &BellDiagonalDistribution,
    schedule: &[RoundString],
    variant: Variant,
    rng: &mut R,
) -> Result<f64> {
    Ok(*sampled_profile(p, schedule, variant, rng)?
        .last()
        .expect("profile is non-empty"))
}

fn posterior_max(weights: &[f64]) -> f64 {
    let total = neumaier_sum(weights.iter().copied());
    weights.iter().copied().fold(0.0, f64::max) / total
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<u64> {
    let total = neumaier_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return Ok(i as u64);
            }
        }
    }
    Ok(last as u64)
}

/// Keeps the largest weights per `policy` and renormalizes. Returns the new
/// distribution and its purified distance `sqrt(1 - retained)` to `P`.
pub fn truncate(p: &BellDiagonalDistribution, policy: Truncation) -> Result<(BellDiagonalDistribution, f64)> {
    let mut ranked: Vec<(u64, f64)> = p.iter().filter(|&(_, w)| w > 0.0).collect();
    if ranked.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total = neumaier_sum(ranked.iter().map(|e| e.1));
    let keep = match policy {
        Truncation::None => ranked.len(),
        Truncation::TopK(k) => {
            if k == 0 {
                return Err(invalid("top_k", "must keep at least one string"));
            }
            k.min(ranked.len())
        }
        Truncation::Mass(delta) => {
            if !(0.0..1.0).contains(&delta) {
                return Err(invalid("delta", format!("{delta} is outside [0, 1)")));
            }
            if delta == 0.0 {
                ranked.len()
            } else {
                let target = total - delta;
                let mut acc = 0.0;
                ranked
                    .iter()
                    .position(|e| {
                        acc += e.1;
                        acc >= target
                    })
                    .map_or(ranked.len(), |i| i + 1)
            }
        }
    };
    if keep == ranked.len() {
        return Ok((p.clone(), 0.0));
    }
    ranked.truncate(keep);
    let retained = neumaier_sum(ranked.iter().map(|e| e.1));
    let eps = (1.0 - retained / total).max(0.0).sqrt();
    let scaled = ranked.into_iter().map(|(x, w)| (x, w / retained));
    let q = if p.is_dense() {
        let mut dense = vec![0.0; p.as_dense().map_or(0, <[f64]>::len)];
        for (x, w) in scaled {
            dense[x as usize] = w;
        }
        BellDiagonalDistribution::from_dense(p.n(), dense)?
    } else {
        BellDiagonalDistribution::from_sparse(p.n(), scaled)?
    };
    Ok((q, eps))
}

/// Fidelity lower bound for the untruncated input from the triangle
/// inequality of the purified distance.
pub fn fidelity_lower_bound(simulated: f64, eps_trunc: f64) -> f64 {
    if eps_trunc == 0.0 {
        return simulated;
    }
    let d = (1.0 - simulated).max(0.0).sqrt() + eps_trunc;
    if d >= 1.0 {
        0.0
    } else {
        1.0 - d * d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Input {
    Werner { fidelity: f64, n: usize },
    Explicit { distribution: Vec<(u64, f64)>, n: usize },
}

impl Input {
    pub fn werner(spec: &IIDWernerSpec) -> Self {
        Input::Werner {
            fidelity: spec.fidelity(),
            n: spec.n(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Input::Werner { n, .. } | Input::Explicit { n, .. } => *n,
        }
    }

    fn fidelity(&self) -> Option<f64> {
        match self {
            Input::Werner { fidelity, .. } => Some(*fidelity),
            Input::Explicit { .. } => None,
        }
    }

    pub fn distribution(&self) -> Result<BellDiagonalDistribution> {
        match self {
            Input::Werner { fidelity, n } => werner_distribution(&IIDWernerSpec::new(*fidelity, *n)?),
            Input::Explicit { distribution, n } => {
                BellDiagonalDistribution::from_sparse(*n, distribution.iter().copied())?.to_dense()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub input: Input,
    /// Round counts to report; each must be below `n`.
    pub rounds: Vec<usize>,
    pub trials: usize,
    pub variant: Variant,
    pub mode: Mode,
    pub truncation: Truncation,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.input.n();
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.rounds.is_empty() {
            return Err(invalid("rounds", "at least one round count is required"));
        }
        if let Some(&r) = self.rounds.iter().find(|&&r| r >= n) {
            return Err(invalid("rounds", format!("{r} rounds need more than {n} pairs")));
        }
        Ok(())
    }

    fn max_rounds(&self) -> usize {
        self.rounds.iter().copied().max().unwrap_or(0)
    }
}

/// One line of a sweep over round counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub f_in: Option<f64>,
    pub variant: Variant,
    pub mode: Mode,
    pub rounds: usize,
    pub trials: usize,
    pub mean_fidelity: f64,
    pub std_err: f64,
    /// `F_in^(n - r)`: fidelity of `n - r` undistilled pairs.
    pub reference: Option<f64>,
    pub eps_trunc: f64,
    pub f_lb: f64,
    pub seed: u64,
}

impl SweepRow {
    /// True when the distilled pairs beat the same number of raw pairs.
    pub fn beats_reference(&self) -> Option<bool> {
        self.reference.map(|r| self.mean_fidelity > r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub rows: Vec<SweepRow>,
}

impl SimulationResult {
    pub fn row(&self, rounds: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.rounds == rounds)
    }
}

/// Per-trial RNG: stream `trial` of the seed, independent of scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent schedules and aggregates every requested round
/// count from the same trials.
pub fn run_experiment(cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    let n = cfg.input.n();
    let full = cfg.input.distribution()?;
    let (p, eps_trunc) = truncate(&full, cfg.truncation)?;
    let max_r = cfg.max_rounds();

    let trial = |t: usize| -> Result<Vec<f64>> {
        let mut rng = trial_rng(cfg.seed, t as u64);
        let schedule = sample_schedule(n, max_r, &mut rng)?;
        match cfg.mode {
            Mode::ExactBranch => exact_branch_profile(&p, &schedule, cfg.variant),
            Mode::SampledSyndrome => sampled_profile(&p, &schedule, cfg.variant, &mut rng),
        }
    };
    let profiles = crate::par::try_map(cfg.trials, trial)?;

    let mut stats = vec![Welford::default(); max_r + 1];
    for profile in &profiles {
        for (s, &f) in stats.iter_mut().zip(profile) {
            s.push(f);
        }
    }

    let rows = cfg
        .rounds
        .iter()
        .map(|&r| {
            let s = &stats[r];
            let mean = s.mean();
            SweepRow {
                n,
                f_in: cfg.input.fidelity(),
                variant: cfg.variant,
                mode: cfg.mode,
                rounds: r,
                trials: cfg.trials,
                mean_fidelity: mean,
                std_err: s.std_err(),
                reference: cfg.input.fidelity().map(|f| f.powi((n - r) as i32)),
                eps_trunc,
                f_lb: fidelity_lower_bound(mean, eps_trunc),
                seed: cfg.seed,
            }
        })
        .collect();
    Ok(SimulationResult { rows })
}

/// Streaming mean and variance, merged in trial order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Joint weights of `(syndrome, residual)` under a fixed schedule: entry
/// `[syndrome][residual]`, where bit `k` of the syndrome is round `k`'s parity.
pub fn syndrome_joint(
    p: &BellDiagonalDistribution,
    schedule: &[RoundString],
    variant: Variant,
) -> Result<Vec<Vec<f64>>> {
    check_rounds(p.n(), schedule)?;
    let weights = dense_weights(p)?;
    let rounds: Vec<_> = schedule.iter().map(|&s| round_linear_maps(s, variant).fast()).collect();
    let residual_len = 1usize << (2 * (p.n() - schedule.len()));
    let mut joint = vec![vec![0.0; residual_len]; 1 << schedule.len()];
    for (x, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut y = x as u64;
        let mut syndrome = 0usize;
        for (k, round) in rounds.iter().enumerate() {
            let (parity, survivor) = round.split(y);
            syndrome |= usize::from(parity) << k;
            y = survivor;
        }
        joint[syndrome][y as usize] += w;
    }
    Ok(joint)
}
