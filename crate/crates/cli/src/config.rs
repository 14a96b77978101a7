//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ddro_core::{BallKind, Graph, QuadraticModel, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

const DEFAULT_OUT: &str = "ddro-out";
const DEFAULT_EXTRA_EDGES: f64 = 0.1;
const DEFAULT_DESIGN_BETAS: [f64; 2] = [0.5, 0.75];
const DEFAULT_EVAL_BETAS: [f64; 3] = [0.0, 0.5, 0.75];
const TOY_BOX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BallChoice {
    L2,
    Dr,
    Tv,
    /// Plain expected cost, no ambiguity ball.
    Soc,
}

impl BallChoice {
    pub fn kind(self) -> Option<BallKind> {
        match self {
            Self::L2 => Some(BallKind::WeightedL2),
            Self::Dr => Some(BallKind::DensityRatio),
            Self::Tv => Some(BallKind::TotalVariation),
            Self::Soc => None,
        }
    }
}

/// Everything a command may need. Unset entries fall back to defaults when
/// the command resolves them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub random_nodes: Option<usize>,
    pub random_extra: Option<f64>,
    /// Anchor points of the quadratic toy model `J(x, i) = |x - a_i|^2`.
    pub anchors: Option<Vec<Vec<f64>>>,
    pub ball: Option<BallChoice>,
    pub radius: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub design_betas: Option<Vec<f64>>,
    pub eval_betas: Option<Vec<f64>>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub quick: bool,
    pub solver: SolverConfig<f64>,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Edge-list graph file ("u v" per line, '#' comments).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Use a seeded random connected graph with this many nodes.
    #[arg(long)]
    pub random_nodes: Option<usize>,
    /// Fraction of non-tree node pairs added as extra edges.
    #[arg(long)]
    pub random_extra: Option<f64>,
    /// Quadratic toy anchors: points separated by ';', coordinates by ','.
    #[arg(long)]
    pub anchors: Option<String>,
    #[arg(long, value_enum)]
    pub ball: Option<BallChoice>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated radii for a sweep.
    #[arg(long)]
    pub radii: Option<String>,
    /// Comma-separated design levels for the CVaR table.
    #[arg(long)]
    pub design_betas: Option<String>,
    /// Comma-separated evaluation levels for summaries and the CVaR table.
    #[arg(long)]
    pub eval_betas: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reduced instance counts for `verify`.
    #[arg(long)]
    pub quick: bool,
    /// Test hook: bend the gradients seen by the verifier.
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

pub fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Input(format!("--{flag}: cannot parse '{s}' as a number"))))
        .collect()
}

pub fn parse_anchors(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|point| parse_list("anchors", point))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }

    /// Config file (if any) with every given flag applied on top.
    pub fn resolve(flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        if let Some(v) = &flags.graph {
            cfg.graph = Some(v.clone());
        }
        if let Some(v) = flags.random_nodes {
            cfg.random_nodes = Some(v);
        }
        if let Some(v) = flags.random_extra {
            cfg.random_extra = Some(v);
        }
        if let Some(v) = &flags.anchors {
            cfg.anchors = Some(parse_anchors(v)?);
        }
        if let Some(v) = flags.ball {
            cfg.ball = Some(v);
        }
        if let Some(v) = flags.radius {
            cfg.radius = Some(v);
        }
        if let Some(v) = &flags.radii {
            cfg.radii = Some(parse_list("radii", v)?);
        }
        if let Some(v) = &flags.design_betas {
            cfg.design_betas = Some(parse_list("design-betas", v)?);
        }
        if let Some(v) = &flags.eval_betas {
            cfg.eval_betas = Some(parse_list("eval-betas", v)?);
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = &flags.out {
            cfg.out = Some(v.clone());
        }
        cfg.quick |= flags.quick;
        cfg.solver.validate().map_err(CliError::from)?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn design_betas(&self) -> Vec<f64> {
        self.design_betas.clone().unwrap_or_else(|| DEFAULT_DESIGN_BETAS.to_vec())
    }

    pub fn eval_betas(&self) -> Vec<f64> {
        self.eval_betas.clone().unwrap_or_else(|| DEFAULT_EVAL_BETAS.to_vec())
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let given = [self.graph.is_some(), self.random_nodes.is_some(), self.anchors.is_some()];
        match given.iter().filter(|&&g| g).count() {
            0 => return Err(CliError::Input("no problem given: use --graph, --random-nodes or --anchors".into())),
            1 => {}
            _ => return Err(CliError::Input("give only one of --graph, --random-nodes and --anchors".into())),
        }
        if let Some(path) = &self.graph {
            if !path.exists() {
                return Err(CliError::Input(format!("graph file not found: {}", path.display())));
            }
            return Ok(Problem::Patrol(Graph::from_file(path)?));
        }
        if let Some(n) = self.random_nodes {
            let extra = self.random_extra.unwrap_or(DEFAULT_EXTRA_EDGES);
            return Ok(Problem::Patrol(Graph::random_connected(n, extra, self.seed)?));
        }
        let anchors = self.anchors.clone().unwrap_or_default();
        Ok(Problem::Toy(QuadraticModel::new(anchors, -TOY_BOX, TOY_BOX)?))
    }
}

pub enum Problem {
    Patrol(Graph),
    Toy(QuadraticModel<f64>),
}
