//! Scenario configuration: TOML in, fully validated `ScenarioConfig` out.
//! Validation collects every violation instead of failing on the first.

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    a: Option<f64>,
    r: Option<f64>,
    beta: Option<f64>,
    s_interval_offset: Option<f64>,
}

/// Everything optional: presence is part of validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    geometry: Option<RawGeometry>,
    #[serde(rename = "tube_R")]
    tube_r: Option<f64>,
    #[serde(rename = "T")]
    t_cap: Option<f64>,
    epsilon: Option<f64>,
    lambda_grid: Option<Vec<f64>>,
    grid_n: Option<usize>,
    fd_step: Option<f64>,
    seed: Option<u64>,
    output_dir: Option<String>,
    decay_phase: Option<String>,
}

/// Which phase model the `decay` subcommand sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayPhase {
    Product,
    Fold,
    Separable,
    Hyperbolic,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub a: f64,
    pub r: f64,
    pub beta: f64,
    pub s_interval_offset: f64,
    pub tube_r: f64,
    pub t_cap: f64,
    pub epsilon: f64,
    pub lambda_grid: Vec<f64>,
    pub grid_n: usize,
    pub fd_step: f64,
    pub seed: u64,
    pub output_dir: Option<String>,
    pub decay_phase: DecayPhase,
}

/// Parse and validate. Returns the config plus any warning records, or the
/// full list of violations; never a partially constructed config.
pub fn validate_config(raw: &str) -> Result<(ScenarioConfig, Vec<String>)> {
    let raw: RawConfig = toml::from_str(raw)
        .map_err(|e| Error::Config(vec![format!("config parse error: {e}")]))?;
    let mut errs: Vec<String> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    let req = |name: &str, v: Option<f64>, errs: &mut Vec<String>| -> f64 {
        match v {
            Some(x) if x.is_finite() => x,
            Some(x) => {
                errs.push(format!("{name} must be finite, got {x}"));
                f64::NAN
            }
            None => {
                errs.push(format!("missing required field {name}"));
                f64::NAN
            }
        }
    };

    let (a, r, beta, s_off) = match &raw.geometry {
        Some(g) => (
            req("geometry.a", g.a, &mut errs),
            req("geometry.r", g.r, &mut errs),
            req("geometry.beta", g.beta, &mut errs),
            req("geometry.s_interval_offset", g.s_interval_offset, &mut errs),
        ),
        None => {
            errs.push("missing [geometry] table".into());
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        }
    };
    if a.is_finite() && a <= 0.0 {
        errs.push(format!("geometry.a must be > 0, got {a}"));
    }
    if r.is_finite() && r <= 0.0 {
        errs.push(format!("geometry.r must be > 0, got {r}"));
    }
    if beta.is_finite() && !(beta > 0.0 && beta <= std::f64::consts::FRAC_PI_2 + 1e-15) {
        errs.push(format!("beta out of (0, pi/2], got {beta}"));
    }

    let tube_r = req("tube_R", raw.tube_r, &mut errs);
    if tube_r.is_finite() && tube_r <= 0.0 {
        errs.push(format!("tube_R must be > 0, got {tube_r}"));
    }
    let t_cap = req("T", raw.t_cap, &mut errs);
    if t_cap.is_finite() && t_cap < 2.0 {
        errs.push(format!("T must be >= 2, got {t_cap}"));
    }
    let epsilon = req("epsilon", raw.epsilon, &mut errs);
    if epsilon.is_finite() && !(epsilon > 0.0 && epsilon < 0.25) {
        errs.push(format!("epsilon must lie in (0, 1/4), got {epsilon}"));
    }

    let lambda_grid = match raw.lambda_grid {
        Some(g) => {
            if g.is_empty() {
                errs.push("lambda_grid must be nonempty".into());
            }
            for w in g.windows(2) {
                if !(w[1] > w[0]) {
                    errs.push(format!(
                        "lambda_grid must be strictly increasing ({} then {})",
                        w[0], w[1]
                    ));
                    break;
                }
            }
            if g.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                errs.push("lambda_grid entries must be finite and positive".into());
            }
            g
        }
        None => {
            warnings.push("lambda_grid missing; defaulted to {2^6, 2^7, ..., 2^12}".into());
            (6..=12).map(|k| (1u64 << k) as f64).collect()
        }
    };

    let grid_n = match raw.grid_n {
        Some(n) if n >= 8 => n,
        Some(n) => {
            errs.push(format!("grid_n must be >= 8, got {n}"));
            0
        }
        None => {
            errs.push("missing required field grid_n".into());
            0
        }
    };
    let fd_step = req("fd_step", raw.fd_step, &mut errs);
    if fd_step.is_finite() && fd_step <= 0.0 {
        errs.push(format!("fd_step must be > 0, got {fd_step}"));
    }
    let seed = match raw.seed {
        Some(s) => s,
        None => {
            errs.push("missing required field seed".into());
            0
        }
    };
    let decay_phase = match raw.decay_phase.as_deref() {
        None | Some("hyperbolic") => DecayPhase::Hyperbolic,
        Some("product") => DecayPhase::Product,
        Some("fold") => DecayPhase::Fold,
        Some("separable") => DecayPhase::Separable,
        Some(other) => {
            errs.push(format!(
                "decay_phase must be one of product|fold|separable|hyperbolic, got {other:?}"
            ));
            DecayPhase::Hyperbolic
        }
    };

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    Ok((
        ScenarioConfig {
            a,
            r,
            beta,
            s_interval_offset: s_off,
            tube_r,
            t_cap,
            epsilon,
            lambda_grid,
            grid_n,
            fd_step,
            seed,
            output_dir: raw.output_dir,
            decay_phase,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
        tube_R = 1.0
        T = 8.0
        epsilon = 0.05
        lambda_grid = [64.0, 128.0, 256.0]
        grid_n = 64
        fd_step = 0.005
        seed = 7

        [geometry]
        a = 1.55
        r = 0.38
        beta = 1.5707963267948966
        s_interval_offset = -0.5
    "#;

    #[test]
    fn good_config_validates() {
        let (cfg, warnings) = validate_config(GOOD).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cfg.lambda_grid, vec![64.0, 128.0, 256.0]);
        assert_eq!(cfg.decay_phase, DecayPhase::Hyperbolic);
    }

    #[test]
    fn beta_out_of_range() {
        let bad = GOOD.replace("beta = 1.5707963267948966", "beta = 2.0");
        match validate_config(&bad).unwrap_err() {
            Error::Config(errs) => {
                assert!(errs.iter().any(|e| e.contains("beta out of (0, pi/2]")), "{errs:?}")
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn missing_lambda_grid_defaults_with_warning() {
        let cfg = GOOD.replace("lambda_grid = [64.0, 128.0, 256.0]", "");
        let (cfg, warnings) = validate_config(&cfg).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(cfg.lambda_grid.len(), 7);
        assert_eq!(cfg.lambda_grid[0], 64.0);
        assert_eq!(cfg.lambda_grid[6], 4096.0);
    }

    #[test]
    fn all_violations_collected() {
        let bad = GOOD
            .replace("r = 0.38", "r = -1.0")
            .replace("epsilon = 0.05", "epsilon = 0.5")
            .replace("T = 8.0", "T = 1.0");
        match validate_config(&bad).unwrap_err() {
            Error::Config(errs) => {
                assert!(errs.len() >= 3, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("geometry.r")));
                assert!(errs.iter().any(|e| e.contains("epsilon")));
                assert!(errs.iter().any(|e| e.contains("T must be")));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = format!("bogus_key = 1\n{GOOD}");
        assert!(validate_config(&bad).is_err());
    }
}
