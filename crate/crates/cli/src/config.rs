use anyhow::{bail, Context, Result};
use listfb_core::channel::AdversarySpec;
use listfb_core::weldon::{Scheme, SchemeParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Plan,
    RunFullFb,
    RunPartialFb,
    ComponentSelftest,
    Sweep,
}

impl Mode {
    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Mode::RunFullFb => Some(Scheme::Full),
            Mode::RunPartialFb => Some(Scheme::Partial),
            _ => None,
        }
    }
}

/// One sweep axis per field; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SchemeParams,
    pub adversary: AdversarySpec,
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
    /// Output directory; nothing is written when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks every parameter web the mode touches, before any trial runs.
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::RunFullFb | Mode::RunPartialFb => {
                self.params.validate(self.mode.scheme().unwrap())?;
                validate_adversary(&self.adversary)?;
            }
            Mode::Sweep => {
                let Some(sweep) = &self.sweep else { bail!("sweep mode needs a `sweep` section") };
                let scheme = sweep.scheme.unwrap_or(Scheme::Full);
                for cell in self.cells()? {
                    cell.params.validate(scheme).with_context(|| format!("sweep cell {}", cell.label))?;
                    validate_adversary(&cell.adversary)?;
                }
            }
            Mode::Plan => {
                self.params.lambda_tilde()?;
            }
            Mode::ComponentSelftest => {}
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes, in n-major order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let ns = if sweep.n.is_empty() { vec![self.params.n] } else { sweep.n.clone() };
        let rhos = if sweep.rho.is_empty() { vec![self.params.rho] } else { sweep.rho.clone() };
        let advs = if sweep.adversaries.is_empty() { vec![self.adversary.clone()] } else { sweep.adversaries.clone() };
        let mut out = Vec::new();
        for &n in &ns {
            for &rho in &rhos {
                for adv in &advs {
                    out.push(Cell {
                        label: format!("n={n} rho={rho} adv={}", adv.label()),
                        params: SchemeParams { n, rho, ..self.params.clone() },
                        adversary: adv.clone(),
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub params: SchemeParams,
    pub adversary: AdversarySpec,
}

fn validate_adversary(a: &AdversarySpec) -> Result<()> {
    match a {
        AdversarySpec::UniformIid { p } if !(0.0..=1.0).contains(p) => bail!("uniform_iid p = {p} outside [0,1]"),
        AdversarySpec::StageGreedy { share } if !(*share > 0.0 && *share <= 1.0) => bail!("stage_greedy share = {share} outside (0,1]"),
        AdversarySpec::GridExtremal { p } if p.iter().any(|x| !(0.0..=1.0).contains(x)) => bail!("grid_extremal fractions must lie in [0,1]"),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig {
            params: presets::full_params(),
            adversary: AdversarySpec::BurstFront,
            trials: 3,
            seed: 1,
            mode: Mode::RunFullFb,
            out: None,
            sweep: None,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_web_is_named() {
        let mut c = RunConfig {
            params: presets::partial_params(),
            adversary: AdversarySpec::Null,
            trials: 1,
            seed: 1,
            mode: Mode::RunPartialFb,
            out: None,
            sweep: None,
        };
        c.params.chunk.eps_d = 0.01;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("eps_d"), "{e}");
        c.params = presets::full_params();
        c.params.rho = 0.4;
        assert!(c.validate().unwrap_err().to_string().contains("rho"));
    }

    #[test]
    fn sweep_cells_cover_the_product() {
        let c = RunConfig {
            params: presets::full_params(),
            adversary: AdversarySpec::Null,
            trials: 1,
            seed: 1,
            mode: Mode::Sweep,
            out: None,
            sweep: Some(SweepSpec { scheme: None, n: vec![1024, 2048], rho: vec![], adversaries: vec![AdversarySpec::Null, AdversarySpec::BurstFront] }),
        };
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[2].params.n, 2048);
    }
}
