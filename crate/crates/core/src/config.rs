//! Plain-text key-value configuration for model specs and Monte Carlo
//! designs.
//!
//! Format: one `key = value` per line; `#` starts a comment; keys may repeat
//! where noted. Vectors are space-separated; matrix rows are separated by `|`.
//!
//! Model keys:
//! ```text
//! k = 2                                  # latent blocks
//! pi = 0.5 0.5                           # block probabilities (K values)
//! nu = -1.5 -1.0 | 1.0 0.5               # latent positions, one row per block
//! link = logit                           # identity | logit
//! rho = 1.0                              # sparsity factor
//! beta = 0.5                             # homophily, one value per covariate
//! covariate = bernoulli_per_block 0.5 0.5      # repeatable, in order
//! covariate = bernoulli_pair 0.5 0.5 0.3       # marginals + correlation
//! homophily = differential 0.4 0.9       # alternative to `beta`
//! ```
//!
//! Design keys (in addition to the model keys):
//! ```text
//! name = design1
//! n = 2000 5000
//! replicates = 100
//! estimator = both                       # simple | weighted | both
//! clusterer = gmm                        # gmm | kmeans
//! seed = 1
//! d_hat = 4                              # optional; omit for automatic
//! ```

use crate::error::{Error, Result};
use crate::estimator::{Clusterer, EstimatorKind};
use crate::model::{CovariateLaw, Homophily, LinkFunction, SbmSpec};
use crate::simulate::McDesign;

fn err(msg: impl Into<String>) -> Error {
    Error::ConfigError(msg.into())
}

/// Key-value lines in file order, comments and blanks removed.
fn parse_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.push((key.trim().to_lowercase(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64_list(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| err(format!("{}: `{}` is not a number", key, t)))
        })
        .collect()
}

fn parse_matrix(value: &str, key: &str) -> Result<Vec<Vec<f64>>> {
    value
        .split('|')
        .map(|row| parse_f64_list(row, key))
        .collect()
}

fn parse_covariate(value: &str) -> Result<CovariateLaw> {
    let mut parts = value.split_whitespace();
    let kind = parts.next().ok_or_else(|| err("covariate: missing kind"))?;
    let nums: Vec<f64> = parts
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| err(format!("covariate: `{}` is not a number", t)))
        })
        .collect::<Result<_>>()?;
    match kind {
        "bernoulli_per_block" => {
            if nums.is_empty() {
                return Err(err("bernoulli_per_block needs K probabilities"));
            }
            Ok(CovariateLaw::BernoulliPerBlock(nums))
        }
        "bernoulli_pair" => {
            if nums.len() != 3 {
                return Err(err(
                    "bernoulli_pair needs exactly 3 values: b_z b_w correlation",
                ));
            }
            Ok(CovariateLaw::BernoulliPair {
                b_z: nums[0],
                b_w: nums[1],
                correlation: nums[2],
            })
        }
        other => Err(err(format!("unknown covariate kind `{}`", other))),
    }
}

/// Parses a model specification from config text.
pub fn parse_spec(text: &str) -> Result<SbmSpec> {
    let lines = parse_lines(text)?;
    spec_from_lines(&lines)
}

fn spec_from_lines(lines: &[(String, String)]) -> Result<SbmSpec> {
    let mut k = None;
    let mut pi = None;
    let mut nu = None;
    let mut link = LinkFunction::Identity;
    let mut rho = 1.0;
    let mut beta: Option<Vec<f64>> = None;
    let mut homophily: Option<Homophily> = None;
    let mut covariates = Vec::new();
    for (key, value) in lines {
        match key.as_str() {
            "k" => {
                k = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| err(format!("k: `{}` is not an integer", value)))?,
                )
            }
            "pi" => pi = Some(parse_f64_list(value, "pi")?),
            "nu" => nu = Some(parse_matrix(value, "nu")?),
            "link" => {
                link = match value.as_str() {
                    "identity" => LinkFunction::Identity,
                    "logit" => LinkFunction::Logit,
                    other => return Err(err(format!("unknown link `{}`", other))),
                }
            }
            "rho" => {
                rho = value
                    .parse::<f64>()
                    .map_err(|_| err(format!("rho: `{}` is not a number", value)))?
            }
            "beta" => beta = Some(parse_f64_list(value, "beta")?),
            "homophily" => {
                let mut parts = value.split_whitespace();
                match parts.next() {
                    Some("differential") => {
                        let nums: Vec<f64> = parts
                            .map(|t| {
                                t.parse::<f64>().map_err(|_| {
                                    err(format!("homophily: `{}` is not a number", t))
                                })
                            })
                            .collect::<Result<_>>()?;
                        if nums.len() != 2 {
                            return Err(err("homophily = differential needs 2 values"));
                        }
                        homophily = Some(Homophily::Differential {
                            beta0: nums[0],
                            beta1: nums[1],
                        });
                    }
                    other => {
                        return Err(err(format!(
                            "unknown homophily kind `{}`",
                            other.unwrap_or("")
                        )))
                    }
                }
            }
            "covariate" => covariates.push(parse_covariate(value)?),
            // design keys are ignored here so one file can hold both
            "name" | "n" | "replicates" | "estimator" | "clusterer" | "seed" | "d_hat" => {}
            other => return Err(err(format!("unknown key `{}`", other))),
        }
    }
    let k = k.ok_or_else(|| err("missing key `k`"))?;
    let nu = nu.ok_or_else(|| err("missing key `nu`"))?;
    let pi = pi.unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let beta = match (beta, homophily) {
        (Some(_), Some(_)) => return Err(err("give either `beta` or `homophily`, not both")),
        (Some(b), None) => Homophily::PerCovariate(b),
        (None, Some(h)) => h,
        (None, None) => return Err(err("missing key `beta` (or `homophily`)")),
    };
    let spec = SbmSpec {
        k,
        pi,
        nu,
        covariates,
        beta,
        link,
        rho,
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses a Monte Carlo design (model keys plus design keys) from config text.
pub fn parse_design(text: &str) -> Result<McDesign> {
    let lines = parse_lines(text)?;
    let spec = spec_from_lines(&lines)?;
    let mut name = String::from("design");
    let mut n_values = None;
    let mut replicates = None;
    let mut estimator = EstimatorKind::Both;
    let mut clusterer = Clusterer::Gmm;
    let mut seed = 0u64;
    let mut d_hat = None;
    for (key, value) in &lines {
        match key.as_str() {
            "name" => name = value.clone(),
            "n" => {
                n_values = Some(
                    value
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| err(format!("n: `{}` is not an integer", t)))
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "replicates" => {
                replicates = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| err(format!("replicates: `{}` is not an integer", value)))?,
                )
            }
            "estimator" => {
                estimator = match value.as_str() {
                    "simple" => EstimatorKind::SimpleMean,
                    "weighted" => EstimatorKind::WeightedMean,
                    "both" => EstimatorKind::Both,
                    other => return Err(err(format!("unknown estimator `{}`", other))),
                }
            }
            "clusterer" => {
                clusterer = match value.as_str() {
                    "gmm" => Clusterer::Gmm,
                    "kmeans" => Clusterer::KMeans,
                    other => return Err(err(format!("unknown clusterer `{}`", other))),
                }
            }
            "seed" => {
                seed = value
                    .parse::<u64>()
                    .map_err(|_| err(format!("seed: `{}` is not an integer", value)))?
            }
            "d_hat" => {
                d_hat = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| err(format!("d_hat: `{}` is not an integer", value)))?,
                )
            }
            _ => {}
        }
    }
    let n_values = n_values.ok_or_else(|| err("missing key `n`"))?;
    if n_values.is_empty() {
        return Err(err("`n` must list at least one network size"));
    }
    let replicates = replicates.ok_or_else(|| err("missing key `replicates`"))?;
    if replicates == 0 {
        return Err(err("`replicates` must be positive"));
    }
    Ok(McDesign {
        name,
        spec,
        n_values,
        replicates,
        estimator,
        seed,
        d_hat,
        clusterer,
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{}", x))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serializes a model specification to config text (round-trips with
/// [`parse_spec`]).
pub fn write_spec(spec: &SbmSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("k = {}\n", spec.k));
    out.push_str(&format!("pi = {}\n", fmt_list(&spec.pi)));
    out.push_str(&format!(
        "nu = {}\n",
        spec.nu
            .iter()
            .map(|r| fmt_list(r))
            .collect::<Vec<_>>()
            .join(" | ")
    ));
    out.push_str(&format!(
        "link = {}\n",
        match spec.link {
            LinkFunction::Identity => "identity",
            LinkFunction::Logit => "logit",
        }
    ));
    out.push_str(&format!("rho = {}\n", spec.rho));
    for law in &spec.covariates {
        match law {
            CovariateLaw::BernoulliPerBlock(b) => {
                out.push_str(&format!("covariate = bernoulli_per_block {}\n", fmt_list(b)))
            }
            CovariateLaw::BernoulliPair {
                b_z,
                b_w,
                correlation,
            } => out.push_str(&format!(
                "covariate = bernoulli_pair {} {} {}\n",
                b_z, b_w, correlation
            )),
        }
    }
    match &spec.beta {
        Homophily::PerCovariate(b) => out.push_str(&format!("beta = {}\n", fmt_list(b))),
        Homophily::Differential { beta0, beta1 } => {
            out.push_str(&format!("homophily = differential {} {}\n", beta0, beta1))
        }
    }
    out
}

/// Serializes a design (model plus design keys) to config text.
pub fn write_design(design: &McDesign) -> String {
    let mut out = write_spec(&design.spec);
    out.push_str(&format!("name = {}\n", design.name));
    out.push_str(&format!(
        "n = {}\n",
        design
            .n_values
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));
    out.push_str(&format!("replicates = {}\n", design.replicates));
    out.push_str(&format!(
        "estimator = {}\n",
        match design.estimator {
            EstimatorKind::SimpleMean => "simple",
            EstimatorKind::WeightedMean => "weighted",
            EstimatorKind::Both => "both",
        }
    ));
    out.push_str(&format!(
        "clusterer = {}\n",
        match design.clusterer {
            Clusterer::Gmm => "gmm",
            Clusterer::KMeans => "kmeans",
        }
    ));
    out.push_str(&format!("seed = {}\n", design.seed));
    if let Some(d) = design.d_hat {
        out.push_str(&format!("d_hat = {}\n", d));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
# two blocks, one covariate
k = 2
pi = 0.5 0.5
nu = -1.5 -1.0 | 1.0 0.5
link = logit
rho = 1
covariate = bernoulli_per_block 0.5 0.5
beta = 1.5
";

    #[test]
    fn spec_roundtrip() {
        let spec = parse_spec(EXAMPLE).unwrap();
        assert_eq!(spec.k, 2);
        assert_eq!(spec.nu[0], vec![-1.5, -1.0]);
        assert_eq!(spec.link, LinkFunction::Logit);
        let back = parse_spec(&write_spec(&spec)).unwrap();
        assert_eq!(back.nu, spec.nu);
        assert_eq!(back.pi, spec.pi);
    }

    #[test]
    fn design_roundtrip() {
        let text = format!(
            "{}name = demo\nn = 500 1000\nreplicates = 4\nestimator = simple\nseed = 9\n",
            EXAMPLE
        );
        let d = parse_design(&text).unwrap();
        assert_eq!(d.n_values, vec![500, 1000]);
        assert_eq!(d.replicates, 4);
        let back = parse_design(&write_design(&d)).unwrap();
        assert_eq!(back.name, "demo");
        assert_eq!(back.seed, 9);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(parse_spec("k = 2\nbogus = 1\n").is_err());
    }
}
