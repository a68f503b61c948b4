//! TOML run configuration.
//!
//! Keys mirror the code symbols of the two scenarios (`Lx`, `nelx`,
//! `lambdaMax`, ...). Omitted keys keep their defaults; unknown keys and
//! out-of-range values are rejected with the offending line.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::optimizer::BetaSchedule;
use crate::scenario::{CShapeParams, TopOptParams};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CShapeFile {
    #[serde(rename = "Lx")]
    lx: Option<f64>,
    #[serde(rename = "Ly")]
    ly: Option<f64>,
    thk: Option<f64>,
    #[serde(rename = "E0")]
    e0: Option<f64>,
    nu: Option<f64>,
    kv: Option<f64>,
    alpha: Option<f64>,
    nelx: Option<usize>,
    nely: Option<usize>,
    #[serde(rename = "lambdaMax")]
    lambda_max: Option<f64>,
    #[serde(rename = "nIncr")]
    n_incr: Option<usize>,
    #[serde(rename = "tolRelRes")]
    tol_rel_res: Option<f64>,
    #[serde(rename = "maxIter")]
    max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopOptFile {
    #[serde(rename = "L")]
    l: Option<f64>,
    thk: Option<f64>,
    #[serde(rename = "E0")]
    e0: Option<f64>,
    nu: Option<f64>,
    kv: Option<f64>,
    alpha: Option<f64>,
    load: Option<f64>,
    #[serde(rename = "loadScale")]
    load_scale: Option<f64>,
    nelx: Option<usize>,
    nely: Option<usize>,
    volfrac: Option<f64>,
    rmin: Option<f64>,
    #[serde(rename = "etaB")]
    eta_b: Option<f64>,
    #[serde(rename = "etaD")]
    eta_d: Option<f64>,
    /// Final projection sharpness.
    beta: Option<f64>,
    #[serde(rename = "betaStart")]
    beta_start: Option<f64>,
    #[serde(rename = "betaFirstIter")]
    beta_first_iter: Option<usize>,
    #[serde(rename = "betaEvery")]
    beta_every: Option<usize>,
    #[serde(rename = "qRAMP")]
    q_ramp: Option<f64>,
    /// `Λ_end` of the nonlinear and contact variants.
    #[serde(rename = "lambdaMax")]
    lambda_max: Option<f64>,
    #[serde(rename = "lambdaLinear")]
    lambda_linear: Option<f64>,
    #[serde(rename = "nIncr")]
    n_incr: Option<usize>,
    #[serde(rename = "tolRelRes")]
    tol_rel_res: Option<f64>,
    #[serde(rename = "maxIter")]
    max_iter: Option<usize>,
    #[serde(rename = "maxCuts")]
    max_cuts: Option<usize>,
    #[serde(rename = "maxOuterIter")]
    max_outer_iter: Option<usize>,
    #[serde(rename = "moveLimit")]
    move_limit: Option<f64>,
    #[serde(rename = "changeTol")]
    change_tol: Option<f64>,
}

/// Which scenario a configuration file describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    CShape,
    TopOpt,
}

/// Parsed scenario parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioConfig {
    CShape(CShapeParams),
    TopOpt(TopOptParams),
}

/// Artifact plumbing shared by both scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Load fractions `Λ ∈ [0, 1]` at which field snapshots are written.
    pub snapshots: Vec<f64>,
    /// Assembly worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>, snapshots: Vec<f64>, workers: Option<usize>) -> Result<Self> {
        for &s in &snapshots {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::config(None, format!("snapshot Λ = {s} outside [0, 1]")));
            }
        }
        if workers == Some(0) {
            return Err(Error::config(None, "workers must be at least 1"));
        }
        Ok(Self {
            out_dir: out_dir.into(),
            snapshots,
            workers,
        })
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let probe = self.out_dir.join(".tmcopt_write_probe");
        std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
        std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
    }
}

/// Parses a comma-separated list such as `0.2,0.5,1.0`.
pub fn parse_snapshots(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::config(None, format!("invalid snapshot value `{s}`")))
        })
        .collect()
}

/// Reads and validates the configuration file at `path`.
pub fn parse_config(path: &Path, kind: ScenarioKind) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match kind {
        ScenarioKind::CShape => parse_cshape_str(&text).map(ScenarioConfig::CShape),
        ScenarioKind::TopOpt => parse_topopt_str(&text).map(ScenarioConfig::TopOpt),
    }
}

fn deserialize<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        Error::config(line, e.message().trim().to_string())
    })
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the `key = ...` assignment, if present.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        l.split_once('=')
            .is_some_and(|(k, _)| k.trim().trim_matches(|c| c == '"' || c == '\'') == key)
    })
    .map(|i| i + 1)
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, key: &str, msg: String) -> Error {
        Error::config(key_line(self.text, key), format!("{key}: {msg}"))
    }

    fn positive(&self, key: &str, v: f64) -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(self.fail(key, format!("must be positive and finite (got {v})")))
        }
    }

    fn at_least_one(&self, key: &str, v: usize) -> Result<()> {
        if v >= 1 {
            Ok(())
        } else {
            Err(self.fail(key, "must be at least 1".into()))
        }
    }

    fn within(&self, key: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
        if (lo..=hi).contains(&v) {
            Ok(())
        } else {
            Err(self.fail(key, format!("must lie in [{lo}, {hi}] (got {v})")))
        }
    }

    fn poisson(&self, v: f64) -> Result<()> {
        if v >= 0.5 {
            Err(self.fail(
                "nu",
                format!("{v} makes the material incompressible; the Poisson ratio must be below 0.5"),
            ))
        } else if v <= -1.0 || !v.is_finite() {
            Err(self.fail("nu", format!("must lie in (-1, 0.5) (got {v})")))
        } else {
            Ok(())
        }
    }

    fn nonnegative(&self, key: &str, v: f64) -> Result<()> {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(self.fail(key, format!("must be nonnegative (got {v})")))
        }
    }
}

/// Parses C-shape parameters from TOML text.
pub fn parse_cshape_str(text: &str) -> Result<CShapeParams> {
    let f: CShapeFile = deserialize(text)?;
    let d = CShapeParams::default();
    let p = CShapeParams {
        lx: f.lx.unwrap_or(d.lx),
        ly: f.ly.unwrap_or(d.ly),
        thk: f.thk.unwrap_or(d.thk),
        e0: f.e0.unwrap_or(d.e0),
        nu: f.nu.unwrap_or(d.nu),
        kv: f.kv.unwrap_or(d.kv),
        alpha: f.alpha.unwrap_or(d.alpha),
        nelx: f.nelx.unwrap_or(d.nelx),
        nely: f.nely.unwrap_or(d.nely),
        lambda_max: f.lambda_max.unwrap_or(d.lambda_max),
        n_incr: f.n_incr.unwrap_or(d.n_incr),
        tol_rel_res: f.tol_rel_res.unwrap_or(d.tol_rel_res),
        max_iter: f.max_iter.unwrap_or(d.max_iter),
    };
    let c = Checker { text };
    for (k, v) in [
        ("Lx", p.lx),
        ("Ly", p.ly),
        ("thk", p.thk),
        ("E0", p.e0),
        ("lambdaMax", p.lambda_max),
        ("tolRelRes", p.tol_rel_res),
    ] {
        c.positive(k, v)?;
    }
    c.poisson(p.nu)?;
    c.within("kv", p.kv, f64::MIN_POSITIVE, 1.0)?;
    c.nonnegative("alpha", p.alpha)?;
    for (k, v) in [("nelx", p.nelx), ("nely", p.nely), ("nIncr", p.n_incr), ("maxIter", p.max_iter)] {
        c.at_least_one(k, v)?;
    }
    if 2.0 * p.thk >= p.ly {
        return Err(c.fail("thk", format!("beams of thickness {} do not fit in Ly = {}", p.thk, p.ly)));
    }
    Ok(p)
}

/// Parses design-problem parameters from TOML text.
pub fn parse_topopt_str(text: &str) -> Result<TopOptParams> {
    let f: TopOptFile = deserialize(text)?;
    let d = TopOptParams::default();
    let beta = BetaSchedule {
        start: f.beta_start.unwrap_or(d.beta.start),
        cap: f.beta.unwrap_or(d.beta.cap),
        first_iter: f.beta_first_iter.unwrap_or(d.beta.first_iter),
        every: f.beta_every.unwrap_or(d.beta.every),
        factor: d.beta.factor,
    };
    let p = TopOptParams {
        l: f.l.unwrap_or(d.l),
        thk: f.thk.unwrap_or(d.thk),
        e0: f.e0.unwrap_or(d.e0),
        nu: f.nu.unwrap_or(d.nu),
        kv: f.kv.unwrap_or(d.kv),
        alpha: f.alpha.unwrap_or(d.alpha),
        load: f.load.unwrap_or(d.load),
        load_scale: f.load_scale.unwrap_or(d.load_scale),
        nelx: f.nelx.unwrap_or(d.nelx),
        nely: f.nely.unwrap_or(d.nely),
        volfrac: f.volfrac.unwrap_or(d.volfrac),
        rmin: f.rmin.unwrap_or(d.rmin),
        eta_b: f.eta_b.unwrap_or(d.eta_b),
        eta_d: f.eta_d.unwrap_or(d.eta_d),
        q_ramp: f.q_ramp.unwrap_or(d.q_ramp),
        beta,
        lambda_end: f.lambda_max.unwrap_or(d.lambda_end),
        lambda_end_linear: f.lambda_linear.unwrap_or(d.lambda_end_linear),
        n_incr: f.n_incr.unwrap_or(d.n_incr),
        tol_rel_res: f.tol_rel_res.unwrap_or(d.tol_rel_res),
        max_iter: f.max_iter.unwrap_or(d.max_iter),
        max_cuts: f.max_cuts.unwrap_or(d.max_cuts),
        max_outer_iters: f.max_outer_iter.unwrap_or(d.max_outer_iters),
        move_limit: f.move_limit.unwrap_or(d.move_limit),
        change_tol: f.change_tol.unwrap_or(d.change_tol),
    };
    let c = Checker { text };
    for (k, v) in [
        ("L", p.l),
        ("thk", p.thk),
        ("E0", p.e0),
        ("load", p.load),
        ("loadScale", p.load_scale),
        ("rmin", p.rmin),
        ("qRAMP", p.q_ramp),
        ("lambdaMax", p.lambda_end),
        ("lambdaLinear", p.lambda_end_linear),
        ("tolRelRes", p.tol_rel_res),
        ("moveLimit", p.move_limit),
        ("changeTol", p.change_tol),
        ("beta", p.beta.cap),
        ("betaStart", p.beta.start),
    ] {
        c.positive(k, v)?;
    }
    c.poisson(p.nu)?;
    c.within("kv", p.kv, f64::MIN_POSITIVE, 1.0)?;
    c.nonnegative("alpha", p.alpha)?;
    c.within("volfrac", p.volfrac, 1e-6, 1.0)?;
    c.within("etaB", p.eta_b, 0.0, 1.0)?;
    c.within("etaD", p.eta_d, 0.0, 1.0)?;
    for (k, v) in [
        ("nelx", p.nelx),
        ("nely", p.nely),
        ("nIncr", p.n_incr),
        ("maxIter", p.max_iter),
        ("maxOuterIter", p.max_outer_iters),
        ("betaEvery", p.beta.every),
    ] {
        c.at_least_one(k, v)?;
    }
    if p.beta.start > p.beta.cap {
        return Err(c.fail("betaStart", format!("exceeds beta = {}", p.beta.cap)));
    }
    if 2.0 * p.thk >= p.l {
        return Err(c.fail("thk", format!("void strip {} too thick for L = {}", p.thk, p.l)));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_cshape_str("").unwrap(), CShapeParams::default());
        assert_eq!(parse_topopt_str("").unwrap(), TopOptParams::default());
    }

    #[test]
    fn overrides_apply() {
        let p = parse_cshape_str("nelx = 31\nnely = 15\nlambdaMax = 1.5\n").unwrap();
        assert_eq!((p.nelx, p.nely, p.lambda_max), (31, 15, 1.5));
        let t = parse_topopt_str("beta = 8.0\nvolfrac = 0.3\nlambdaMax = 0.5").unwrap();
        assert_eq!((t.beta.cap, t.volfrac, t.lambda_end), (8.0, 0.3, 0.5));
    }

    #[test]
    fn incompressible_rejected_with_line() {
        let err = parse_cshape_str("E0 = 100.0\nnu = 0.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("incompressible"), "{msg}");
        assert!(matches!(err, Error::Config { line: Some(2), .. }), "{err:?}");
    }

    #[test]
    fn negative_count_rejected_with_line() {
        let err = parse_cshape_str("\n\nnelx = -1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }), "{err:?}");
        let err = parse_topopt_str("nely = 0").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(1), .. }), "{err:?}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_cshape_str("Lx = 100.0\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
        assert!(matches!(err, Error::Config { line: Some(2), .. }), "{err:?}");
        // design-only keys are not part of the analysis schema
        assert!(parse_cshape_str("volfrac = 0.3").is_err());
    }

    #[test]
    fn malformed_rejected() {
        assert!(matches!(parse_cshape_str("Lx = = 3"), Err(Error::Config { line: Some(1), .. })));
        assert!(parse_cshape_str("Lx = \"wide\"").is_err());
    }

    #[test]
    fn snapshots_parsed_and_checked() {
        assert_eq!(parse_snapshots("0.2, 0.5,1.0").unwrap(), vec![0.2, 0.5, 1.0]);
        assert!(parse_snapshots("0.2,x").is_err());
        assert!(RunConfig::new("out", vec![1.5], None).is_err());
        assert!(RunConfig::new("out", vec![0.5], Some(0)).is_err());
    }
}
