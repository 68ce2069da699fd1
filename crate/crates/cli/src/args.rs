//! Value parsers for list and range flags.

use anyhow::{bail, Context, Result};
use hashdistill::simulator::Truncation;

/// Parses `a..b` (inclusive), comma lists, or a mix such as `1..3,10`.
pub fn usize_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a
                .trim()
                .parse()
                .with_context(|| format!("bad range start in `{part}`"))?;
            let b: usize = b.trim().parse().with_context(|| format!("bad range end in `{part}`"))?;
            if a > b {
                bail!("empty range `{part}`");
            }
            out.extend(a..=b);
        } else {
            out.push(
                part.parse()
                    .with_context(|| format!("`{part}` is not a non-negative integer"))?,
            );
        }
    }
    Ok(out)
}

/// Comma list of floats; each item may also be `a..b:step` (inclusive).
pub fn f64_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((range, step)) = part.split_once(':') {
            let (a, b) = range
                .split_once("..")
                .with_context(|| format!("expected `a..b:step`, got `{part}`"))?;
            let (a, b, step) = (float(a)?, float(b)?, float(step)?);
            if step <= 0.0 || a > b {
                bail!("bad range `{part}`");
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            out.extend((0..=count).map(|i| a + step * i as f64));
        } else {
            out.push(float(part)?);
        }
    }
    Ok(out)
}

fn float(s: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().with_context(|| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        bail!("`{s}` is not finite");
    }
    Ok(x)
}

/// `auto` or an explicit `eps1,eps2`.
pub fn eps_split(s: &str) -> Result<Option<(f64, f64)>> {
    if s == "auto" {
        return Ok(None);
    }
    match f64_list(s)?.as_slice() {
        &[a, b] => Ok(Some((a, b))),
        _ => bail!("expected `auto` or `eps1,eps2`, got `{s}`"),
    }
}

/// `none`, `top:K` or `mass:DELTA`.
pub fn truncation(s: &str) -> Result<Truncation> {
    match s.split_once(':') {
        None if s == "none" => Ok(Truncation::None),
        Some(("top", k)) => Ok(Truncation::TopK(k.parse().context("bad K in `top:K`")?)),
        Some(("mass", d)) => Ok(Truncation::Mass(float(d)?)),
        _ => bail!("expected `none`, `top:K` or `mass:DELTA`, got `{s}`"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(usize_list("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(usize_list("5, 1..2,9").unwrap(), vec![5, 1, 2, 9]);
        assert!(usize_list("3..1").is_err());
        assert!(usize_list("x").is_err());
        let f = f64_list("0.9..0.95:0.01").unwrap();
        assert_eq!(f.len(), 6);
        assert!((f[5] - 0.95).abs() < 1e-12);
        assert_eq!(f64_list("0.5,1e-1").unwrap(), vec![0.5, 0.1]);
    }

    #[test]
    fn split_and_truncation() {
        assert_eq!(eps_split("auto").unwrap(), None);
        assert_eq!(eps_split("0.07,0.03").unwrap(), Some((0.07, 0.03)));
        assert!(eps_split("0.1").is_err());
        assert_eq!(truncation("mass:1e-4").unwrap(), Truncation::Mass(1e-4));
        assert_eq!(truncation("top:12").unwrap(), Truncation::TopK(12));
        assert!(truncation("all").is_err());
    }
}
