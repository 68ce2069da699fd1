use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use hashdistill::belldiag::{ErrorString, IIDWernerSpec};
use hashdistill::bounds::{
    epsilon_for_output_fidelity, rate_curve as curve, rate_lower_bound, single_pair_threshold, BoundReport, EpsSplit,
};
use hashdistill::codes::{
    analyze, builtin, effective_syndrome_table, first_order_errors, map_decoder, syndrome_text, CodeMode, CodeReport,
    FixedSchedule, BUILTIN_CODES, DECODER_PRIOR_FIDELITY,
};
use hashdistill::entropy::{shannon_and_asymptotic_rate, smooth_hartley_werner};
use hashdistill::oracle::{dm_simulate, validate_label_maps};
use hashdistill::protocol::{compile_schedule, sample_schedule, RoundString, Variant};
use hashdistill::simulator::{run_experiment, run_trial_exact_branch, trial_rng, Input, Mode, SimulationConfig};
use serde::Serialize;

use crate::args;
use crate::output::{g12, json, opt_g12, Csv, RunManifest};
use crate::{
    BoundsArgs, CompileArgs, EntropyArgs, Format, OracleArgs, RateCurveArgs, SimulateArgs, TableFormat, ThresholdArgs,
    VariantArg, VerifyCodesArgs,
};

const NO_GUARANTEE: &str = "no guarantee";

fn variant(s: &str) -> Result<Variant> {
    Ok(s.parse()?)
}

fn status(m: i64) -> &'static str {
    if m >= 1 {
        "guarantee"
    } else {
        NO_GUARANTEE
    }
}

#[derive(Serialize)]
struct BoundsOutput {
    f_in: f64,
    f_out: f64,
    status: &'static str,
    nontight_status: &'static str,
    report: BoundReport,
}

pub fn bounds(a: &BoundsArgs) -> Result<String> {
    let eps = epsilon_for_output_fidelity(a.f_out)?;
    let split = match args::eps_split(&a.eps_split)? {
        None => EpsSplit::Optimized,
        Some((eps1, eps2)) => EpsSplit::Explicit { eps1, eps2 },
    };
    let report = rate_lower_bound(&IIDWernerSpec::new(a.fidelity, a.n)?, eps, split)?;
    let manifest = RunManifest::new("bounds", a, None);
    Ok(match a.format {
        Format::Json => json(
            manifest,
            &BoundsOutput {
                f_in: a.fidelity,
                f_out: a.f_out,
                status: status(report.m),
                nontight_status: status(report.nontight.m),
                report,
            },
        ),
        Format::Csv => {
            let mut csv = Csv::new(&[
                "n",
                "f_in",
                "f_out",
                "eps",
                "eps1",
                "eps2",
                "h0_eps1",
                "rounds",
                "m",
                "rate",
                "status",
                "nontight_h0",
                "nontight_rounds",
                "nontight_m",
                "nontight_rate",
                "nontight_status",
            ]);
            let t = &report.nontight;
            csv.row(&[
                report.n.to_string(),
                g12(a.fidelity),
                g12(a.f_out),
                g12(report.eps),
                g12(report.eps1),
                g12(report.eps2),
                g12(report.h0_eps1),
                report.rounds.to_string(),
                report.m.to_string(),
                g12(report.rate),
                status(report.m).into(),
                g12(t.h0),
                t.rounds.to_string(),
                t.m.to_string(),
                g12(t.rate),
                status(t.m).into(),
            ]);
            csv.render(manifest)
        }
    })
}

#[derive(Serialize)]
struct CurvePoint {
    f_in: f64,
    n: usize,
    eps1: f64,
    eps2: f64,
    h0_eps1: f64,
    m: i64,
    rate: f64,
    asymptotic_rate: f64,
}

pub fn rate_curve(a: &RateCurveArgs) -> Result<String> {
    let f_ins = args::f64_list(&a.fidelity)?;
    let ns = args::usize_list(&a.n)?;
    let rows: Vec<CurvePoint> = curve(&f_ins, a.f_out, &ns)?
        .into_iter()
        .map(|r| {
            Ok(CurvePoint {
                f_in: r.f_in,
                n: r.n,
                eps1: r.eps1,
                eps2: r.eps2,
                h0_eps1: r.h0_eps1,
                m: r.m,
                rate: r.rate,
                asymptotic_rate: shannon_and_asymptotic_rate(r.f_in)?.1,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = RunManifest::new("rate-curve", a, None);
    Ok(match a.format {
        Format::Json => json(manifest, &rows),
        Format::Csv => {
            let mut csv = Csv::new(&["f_in", "n", "eps1", "eps2", "h0_eps1", "m", "rate", "asymptotic_rate"]);
            for r in &rows {
                csv.row(&[
                    g12(r.f_in),
                    r.n.to_string(),
                    g12(r.eps1),
                    g12(r.eps2),
                    g12(r.h0_eps1),
                    r.m.to_string(),
                    g12(r.rate),
                    g12(r.asymptotic_rate),
                ]);
            }
            csv.render(manifest)
        }
    })
}

#[derive(Serialize)]
struct ThresholdRow {
    f_in: f64,
    f_out: f64,
    n_threshold: Option<usize>,
}

pub fn threshold(a: &ThresholdArgs) -> Result<String> {
    let rows: Vec<ThresholdRow> = args::f64_list(&a.fidelity)?
        .into_iter()
        .map(|f| {
            Ok(ThresholdRow {
                f_in: f,
                f_out: a.f_out,
                n_threshold: single_pair_threshold(f, a.f_out, a.n_max)?,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = RunManifest::new("threshold", a, None);
    Ok(match a.format {
        Format::Json => json(manifest, &rows),
        Format::Csv => {
            let mut csv = Csv::new(&["f_in", "f_out", "n_threshold"]);
            for r in &rows {
                csv.row(&[
                    g12(r.f_in),
                    g12(r.f_out),
                    r.n_threshold.map(|n| n.to_string()).unwrap_or_default(),
                ]);
            }
            csv.render(manifest)
        }
    })
}

#[derive(Serialize)]
struct EntropyRow {
    f_in: f64,
    n: usize,
    eps: f64,
    h0: f64,
    h0_eps: f64,
    k: Option<String>,
    retained_mass: f64,
    shannon_per_pair: f64,
}

pub fn entropy(a: &EntropyArgs) -> Result<String> {
    let mut rows = Vec::new();
    for f in args::f64_list(&a.fidelity)? {
        let (shannon, _) = shannon_and_asymptotic_rate(f)?;
        let q = (1.0 - f) / 3.0;
        let support = f64::from(u8::from(f > 0.0) + 3 * u8::from(q > 0.0));
        for n in args::usize_list(&a.n)? {
            let spec = IIDWernerSpec::new(f, n)?;
            for eps in args::f64_list(&a.eps)? {
                let h = smooth_hartley_werner(&spec, eps)?;
                rows.push(EntropyRow {
                    f_in: f,
                    n,
                    eps,
                    h0: n as f64 * support.log2(),
                    h0_eps: h.bits,
                    k: h.k.map(|k| k.to_string()),
                    retained_mass: h.retained_mass,
                    shannon_per_pair: shannon,
                });
            }
        }
    }
    let manifest = RunManifest::new("entropy", a, None);
    Ok(match a.format {
        Format::Json => json(manifest, &rows),
        Format::Csv => {
            let mut csv = Csv::new(&[
                "f_in",
                "n",
                "eps",
                "h0",
                "h0_eps",
                "k",
                "retained_mass",
                "shannon_per_pair",
            ]);
            for r in &rows {
                csv.row(&[
                    g12(r.f_in),
                    r.n.to_string(),
                    g12(r.eps),
                    g12(r.h0),
                    g12(r.h0_eps),
                    r.k.clone().unwrap_or_default(),
                    g12(r.retained_mass),
                    g12(r.shannon_per_pair),
                ]);
            }
            csv.render(manifest)
        }
    })
}

fn read_distribution(path: &std::path::Path) -> Result<(usize, Vec<(u64, f64)>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut n = None;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (label, weight) = line
            .rsplit_once(char::is_whitespace)
            .with_context(|| format!("line {}: expected `label weight`", i + 1))?;
        let x: ErrorString = label.parse()?;
        let w: f64 = weight.parse().with_context(|| format!("line {}: bad weight", i + 1))?;
        if *n.get_or_insert(x.len()) != x.len() {
            bail!("line {}: label length differs from earlier lines", i + 1);
        }
        entries.push((x.bits(), w));
    }
    Ok((n.context("distribution file has no entries")?, entries))
}

pub fn simulate(a: &SimulateArgs) -> Result<String> {
    let input = match (&a.distribution, a.fidelity) {
        (Some(path), _) => {
            let (n, distribution) = read_distribution(path)?;
            if a.n.is_some_and(|m| m != n) {
                bail!("--n {} disagrees with the {n}-pair distribution file", a.n.unwrap_or(0));
            }
            Input::Explicit { distribution, n }
        }
        (None, Some(f)) => Input::werner(&IIDWernerSpec::new(f, a.n.context("--n is required with --fidelity")?)?),
        (None, None) => bail!("give --fidelity or --distribution"),
    };
    let n = input.n();
    let rounds = match &a.rounds {
        Some(r) => args::usize_list(r)?,
        None => (0..n).collect(),
    };
    let cfg = SimulationConfig {
        input,
        rounds,
        trials: a.trials,
        variant: variant(&a.variant)?,
        mode: a.mode.parse::<Mode>()?,
        truncation: args::truncation(&a.truncation)?,
        seed: a.seed,
    };
    let result = run_experiment(&cfg)?;
    let manifest = RunManifest::new("simulate", a, Some(a.seed));
    Ok(match a.format {
        Format::Json => json(manifest, &result.rows),
        Format::Csv => {
            let mut csv = Csv::new(&[
                "n",
                "f_in",
                "variant",
                "mode",
                "rounds",
                "trials",
                "mean_fidelity",
                "std_err",
                "reference",
                "eps_trunc",
                "f_lb",
                "seed",
            ]);
            for r in &result.rows {
                csv.row(&[
                    r.n.to_string(),
                    opt_g12(r.f_in),
                    r.variant.to_string(),
                    r.mode.name().into(),
                    r.rounds.to_string(),
                    r.trials.to_string(),
                    g12(r.mean_fidelity),
                    g12(r.std_err),
                    opt_g12(r.reference),
                    g12(r.eps_trunc),
                    g12(r.f_lb),
                    r.seed.to_string(),
                ]);
            }
            csv.render(manifest)
        }
    })
}

fn schedules(a: &VerifyCodesArgs) -> Result<Vec<FixedSchedule>> {
    Ok(match (&a.code, &a.file) {
        (Some(name), _) => vec![builtin(name)?],
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mode = if a.mode == "detect" {
                CodeMode::Detect
            } else {
                CodeMode::Correct
            };
            let name = path
                .file_stem()
                .map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            vec![FixedSchedule::parse(name, &text, mode)?]
        }
        (None, None) => BUILTIN_CODES
            .iter()
            .map(|c| builtin(c))
            .collect::<hashdistill::Result<_>>()?,
    })
}

fn syndrome_table(out: &mut String, code: &FixedSchedule, v: Variant) -> Result<()> {
    let table = effective_syndrome_table(code, v, &first_order_errors(code.n()))?;
    let decoder = map_decoder(code, v, DECODER_PRIOR_FIDELITY)?;
    let width = 3 * code.n();
    let _ = writeln!(
        out,
        "  {:<width$} {:<8} {:<10} corrected",
        "error", "syndrome", "residual"
    );
    for e in &table {
        let fixed = decoder[e.syndrome as usize] == e.residual;
        let _ = writeln!(
            out,
            "  {:<width$} {:<8} {:<10} {}",
            e.error.to_string(),
            syndrome_text(e.syndrome, code.rounds().len()),
            e.residual.to_string(),
            if fixed { "yes" } else { "no" }
        );
    }
    Ok(())
}

pub fn verify_codes(a: &VerifyCodesArgs) -> Result<String> {
    let variants: &[Variant] = match a.variant {
        VariantArg::Cnot => &[Variant::Cnot],
        VariantArg::Cz => &[Variant::Cz],
        VariantArg::Both => &Variant::BOTH,
    };
    let codes = schedules(a)?;
    let mut reports: Vec<CodeReport> = Vec::new();
    let mut table = String::new();
    for code in &codes {
        for &v in variants {
            let r = analyze(code, v)?;
            let _ = writeln!(
                table,
                "{} [{}, {} pairs, {} rounds, {v}]: {} distinct syndromes over {} errors, {}/{} detected, {}/{} corrected",
                r.code,
                match r.mode {
                    CodeMode::Correct => "correct",
                    CodeMode::Detect => "detect",
                },
                r.n,
                r.rounds,
                r.distinct_syndromes,
                r.errors,
                r.detected,
                r.first_order(),
                r.corrected,
                r.errors
            );
            syndrome_table(&mut table, code, v)?;
            table.push('\n');
            reports.push(r);
        }
    }
    let doc = json(RunManifest::new("verify-codes", a, None), &reports);
    Ok(match a.format {
        TableFormat::Json => doc,
        TableFormat::Table => table + &doc,
    })
}

#[derive(Serialize)]
struct Compiled {
    variant: Variant,
    n: usize,
    schedule: Vec<String>,
    gates: Vec<hashdistill::protocol::GateScheduleItem>,
}

pub fn compile(a: &CompileArgs) -> Result<String> {
    let v = variant(&a.variant)?;
    let (n, rounds): (usize, Vec<RoundString>) = match (&a.code, &a.file, a.n) {
        (Some(name), _, _) => {
            let c = builtin(name)?;
            (c.n(), c.rounds().to_vec())
        }
        (None, Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let c = FixedSchedule::parse("file", &text, CodeMode::Correct)?;
            (c.n(), c.rounds().to_vec())
        }
        (None, None, Some(n)) => {
            let seed = a.seed.context("--seed is required for a random schedule")?;
            let r = a.rounds.unwrap_or(n.saturating_sub(1));
            (n, sample_schedule(n, r, &mut trial_rng(seed, 0))?)
        }
        _ => bail!("give --code, --file or --n with --seed"),
    };
    let data = Compiled {
        variant: v,
        n,
        schedule: rounds.iter().map(ToString::to_string).collect(),
        gates: compile_schedule(n, &rounds, v)?,
    };
    Ok(json(RunManifest::new("compile", a, a.seed), &data))
}

#[derive(Serialize)]
struct OracleOutput {
    schedule: Vec<String>,
    simulator_fidelity: f64,
    oracle: hashdistill::oracle::OracleRun,
    difference: f64,
    label_maps: Option<hashdistill::oracle::LabelMapReport>,
}

pub fn oracle(a: &OracleArgs) -> Result<String> {
    let v = variant(&a.variant)?;
    let p = hashdistill::belldiag::werner_distribution(&IIDWernerSpec::new(a.fidelity, a.n)?)?;
    let rounds = a.rounds.unwrap_or(a.n.saturating_sub(1));
    let schedule = sample_schedule(a.n, rounds, &mut trial_rng(a.seed, 0))?;
    let sim = run_trial_exact_branch(&p, &schedule, v)?;
    let run = dm_simulate(&p, &schedule, v)?;
    let data = OracleOutput {
        schedule: schedule.iter().map(ToString::to_string).collect(),
        simulator_fidelity: sim,
        difference: (sim - run.fidelity).abs(),
        oracle: run,
        label_maps: a.check_labels.then(|| validate_label_maps(v)),
    };
    Ok(json(RunManifest::new("oracle", a, Some(a.seed)), &data))
}
