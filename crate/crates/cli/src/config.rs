//! Run configuration: one TOML document per run, with leaf overrides given as
//! `dotted.path=value`.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use bsde_core::catalog::{self, ParamValue, Params};
use bsde_core::conditions::{AParams, SamplerConfig};
use bsde_core::inequalities::Modulus;
use bsde_core::solver::SolveConfig;
use bsde_core::stability::FamilySpec;
use bsde_core::{BSDEProblem, Dimensions, TerminalSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub numerics: NumericsBlock,
    pub experiment: ExperimentBlock,
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    pub horizon: f64,
    pub k: usize,
    pub d: usize,
    pub terminal: TerminalSpec,
    pub generator: GeneratorBlock,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        ProblemBlock {
            horizon: 1.0,
            k: 1,
            d: 1,
            terminal: TerminalSpec::Brownian,
            generator: GeneratorBlock::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorBlock {
    pub name: String,
    pub params: Params,
}

impl Default for GeneratorBlock {
    fn default() -> Self {
        GeneratorBlock {
            name: "zero".into(),
            params: Params::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsBlock {
    /// Seed of the path bundle and of the condition sampler.
    pub seed: u64,
    pub solver: SolveConfig,
    pub truncation_ladder: Vec<f64>,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        NumericsBlock {
            seed: 1,
            solver: SolveConfig::default(),
            truncation_ladder: vec![2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

/// Sampler settings; the seed comes from `numerics.seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerBlock {
    pub samples: u64,
    pub t_max: Option<f64>,
    pub scales: Vec<f64>,
    pub heavy_tail_prob: f64,
    pub slack_rel_tol: f64,
}

impl Default for SamplerBlock {
    fn default() -> Self {
        let s = SamplerConfig::default();
        SamplerBlock {
            samples: s.samples,
            t_max: None,
            scales: s.scales,
            heavy_tail_prob: s.heavy_tail_prob,
            slack_rel_tol: s.slack_rel_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BihariBlock {
    pub u0: f64,
    pub tau: f64,
    pub rho: Modulus,
    pub pbar: f64,
}

impl Default for BihariBlock {
    fn default() -> Self {
        BihariBlock {
            u0: 1.0,
            tau: 1.0,
            rho: Modulus::linear(1.0),
            pbar: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVariant {
    L1,
    S1m1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub betas: Vec<f64>,
    /// Thresholds of the class (D) diagnostic.
    pub thresholds: Vec<f64>,
    pub assumptions: Vec<String>,
    /// Order of the `p`-order conditions.
    pub p: f64,
    pub a_params: AParams,
    pub sampler: SamplerBlock,
    pub family: FamilySpec,
    pub ms: Vec<u32>,
    pub variant: StabilityVariant,
    pub bihari: BihariBlock,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            betas: vec![0.25, 0.5, 0.75, 1.0],
            thresholds: vec![1.0, 2.0, 5.0, 10.0],
            assumptions: vec!["H1".into(), "H2".into(), "H3".into()],
            p: 2.0,
            a_params: AParams::default(),
            sampler: SamplerBlock::default(),
            family: FamilySpec::Identity,
            ms: vec![1, 2, 4, 8, 16],
            variant: StabilityVariant::L1,
            bihari: BihariBlock::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Full `(time, path)` field dump of a solve.
    pub field_csv: Option<PathBuf>,
    pub trace_csv: Option<PathBuf>,
    /// Plain-text condition reports.
    pub text: Option<PathBuf>,
}

/// Splits `a.b.c=value` and parses the value as a TOML literal, falling back
/// to a bare string.
fn parse_override(spec: &str) -> anyhow::Result<(Vec<String>, toml::Value)> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form dotted.path=value"))?;
    let keys: Vec<String> = path.trim().split('.').map(str::to_string).collect();
    if keys.iter().any(String::is_empty) {
        bail!("override `{spec}` has an empty key");
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((keys, value))
}

fn apply_override(root: &mut toml::Table, keys: &[String], value: toml::Value) -> anyhow::Result<()> {
    let (last, parents) = keys.split_last().expect("nonempty key path");
    let mut table = root;
    for (i, k) in parents.iter().enumerate() {
        let entry = table
            .entry(k.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{}` is not a table", keys[..=i].join(".")))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Parses a document, applies overrides and validates the result.
    pub fn load(text: &str, overrides: &[String]) -> anyhow::Result<Self> {
        let mut table: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
        for o in overrides {
            let (keys, value) = parse_override(o)?;
            apply_override(&mut table, &keys, value)?;
        }
        let rendered = toml::to_string(&table).context("rendering config")?;
        let cfg: RunConfig = toml::from_str(&rendered).map_err(|e| anyhow!("invalid config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.numerics.solver.validate().context("numerics.solver")?;
        if self.numerics.solver.paths < 2 {
            bail!("numerics.solver.paths must be at least 2");
        }
        if self.experiment.betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            bail!("experiment.betas must lie in (0, 1], got {:?}", self.experiment.betas);
        }
        self.sampler().validate().context("experiment.sampler")?;
        Ok(())
    }

    pub fn sampler(&self) -> SamplerConfig {
        let s = &self.experiment.sampler;
        SamplerConfig {
            samples: s.samples,
            seed: self.numerics.seed,
            t_max: s.t_max.unwrap_or(self.problem.horizon.max(f64::MIN_POSITIVE)),
            scales: s.scales.clone(),
            heavy_tail_prob: s.heavy_tail_prob,
            slack_rel_tol: s.slack_rel_tol,
        }
    }

    /// Builds the generator, filling `k` and `d` from the problem block when
    /// the catalog entry takes them and the parameters leave them out.
    pub fn built(&self) -> anyhow::Result<catalog::Built> {
        let g = &self.problem.generator;
        let entry = catalog::catalog()
            .into_iter()
            .find(|e| e.name == g.name)
            .ok_or_else(|| anyhow!("problem.generator.name: unknown generator `{}`", g.name))?;
        let mut params = g.params.clone();
        for (key, v) in [("k", self.problem.k), ("d", self.problem.d)] {
            if entry.params.iter().any(|p| p.name == key) && !params.contains_key(key) {
                params.insert(key.into(), ParamValue::Number(v as f64));
            }
        }
        let built = catalog::build(&g.name, &params).context("problem.generator.params")?;
        let dims = built.generator.dims();
        if dims != Dimensions::new(self.problem.k, self.problem.d)? {
            bail!(
                "problem dimensions k = {}, d = {} do not match generator `{}` with k = {}, d = {}",
                self.problem.k,
                self.problem.d,
                g.name,
                dims.k,
                dims.d
            );
        }
        let declared = built.generator.declared();
        declared
            .validate()
            .map_err(|e| anyhow!("problem.generator: declared constants invalid: {e}"))?;
        Ok(built)
    }

    pub fn problem(&self, built: &catalog::Built) -> anyhow::Result<BSDEProblem> {
        BSDEProblem::new(
            self.problem.terminal.clone(),
            self.problem.horizon,
            built.generator.clone(),
            Dimensions::new(self.problem.k, self.problem.d)?,
        )
        .context("problem")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::load(&text, &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn overrides_reach_leaves() {
        let cfg = RunConfig::load(
            "",
            &[
                "numerics.solver.paths=500".into(),
                "problem.generator.name=linear".into(),
                "problem.generator.params.a=-1.5".into(),
                "problem.terminal={ kind = \"constant\", value = [1.0] }".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.numerics.solver.paths, 500);
        assert_eq!(cfg.problem.generator.name, "linear");
        assert_eq!(cfg.problem.generator.params["a"], ParamValue::Number(-1.5));
        assert_eq!(cfg.problem.terminal, TerminalSpec::Constant { value: vec![1.0] });
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::load("[numerics]\nseeed = 3\n", &[]).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("seeed"), "{msg}");
        let err = RunConfig::load("", &["numerics.solver.pathz=3".into()]).unwrap_err();
        assert!(format!("{err:#}").contains("pathz"));
        assert!(RunConfig::load("", &["novalue".into()]).is_err());
    }

    #[test]
    fn generator_dimensions_follow_problem() {
        let cfg = RunConfig::load("[problem]\nk = 2\nd = 3\n", &[]).unwrap();
        let b = cfg.built().unwrap();
        assert_eq!(b.generator.dims(), Dimensions::new(2, 3).unwrap());
        let cfg = RunConfig::load("[problem]\nk = 2\n[problem.generator]\nname = \"example1\"\n", &[]).unwrap();
        assert!(cfg.built().is_err());
    }
}
