//! Command-line front end. The `netmed` binary only parses arguments, sets up logging and
//! calls [`run`].

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use crate::embedding::{Side, Spectrum};
use crate::error::{Error, Result};
use crate::io::{
    load_column, load_covariates, load_edgelist, write_atomic, write_singular_values, Bindings, CovariateTable,
    EdgeListOptions, Format, PositionTable, Report, SensitivityReport, Symmetrize,
};
use crate::mediation::{mediate, sensitivity_curve, Contrast, MediationOptions};
use crate::network::{AdjacencyMatrix, NetworkKind};
use crate::regression::CovarianceKind;
use crate::sim::{misspecification_sweep, run_scenario, SimScenario};

#[derive(Debug, Parser)]
#[command(name = "netmed", version, about = "Network-mediated direct and indirect effects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral embedding of a network: node positions and singular values.
    Embed(EmbedArgs),
    /// Direct and indirect effects at one embedding dimension.
    Mediate(MediateArgs),
    /// Effects over a range of embedding dimensions.
    Sensitivity(SensitivityArgs),
    /// Monte Carlo study from a scenario file.
    Simulate(SimulateArgs),
    /// Node positions joined with the treatment, for checking overlap.
    PositivityExport(PositivityArgs),
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Edge list `src,dst[,weight]`.
    #[arg(long)]
    pub network: PathBuf,
    /// Number of nodes; ids must be below it.
    #[arg(long)]
    pub n_hint: Option<usize>,
    #[arg(long, default_value = "none", value_parser = parse_from_str::<Symmetrize>)]
    pub symmetrize: Symmetrize,
    #[arg(long)]
    pub weighted: bool,
    #[arg(long)]
    pub one_based: bool,
    /// Drop self-loops.
    #[arg(long)]
    pub zero_diagonal: bool,
    /// Sources and destinations are different node sets.
    #[arg(long)]
    pub bipartite: bool,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Embedding dimension.
    #[arg(short, long)]
    pub d: usize,
    /// `left` (sending), `right` (receiving) or `symmetric`; defaults by network kind.
    #[arg(long, value_parser = parse_from_str::<Side>)]
    pub side: Option<Side>,
    #[arg(long)]
    pub varimax: bool,
}

#[derive(Debug, Args)]
pub struct RoleArgs {
    /// Node covariates, one row per node in network order.
    #[arg(long)]
    pub covariates: PathBuf,
    #[arg(long)]
    pub outcome: String,
    #[arg(long)]
    pub treatment: String,
    /// Comma-separated control columns.
    #[arg(long, value_delimiter = ',')]
    pub controls: Vec<String>,
    /// Node label column.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct EffectArgs {
    /// Treatment levels `t t*`.
    #[arg(long, num_args = 2, value_names = ["T", "T_STAR"], allow_negative_numbers = true, default_values_t = [1.0, 0.0])]
    pub contrast: Vec<f64>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Scale the robust covariances by n/(n − k).
    #[arg(long)]
    pub hc1: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// `json` or `csv`; inferred from the output extension when absent.
    #[arg(long, value_parser = parse_from_str::<Format>)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Where to write `dim,singular_value`; next to the output by default.
    #[arg(long)]
    pub singular_values: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MediateArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub roles: RoleArgs,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub effects: EffectArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub roles: RoleArgs,
    /// Inclusive dimension range `a:b`.
    #[arg(long, value_parser = parse_d_range)]
    pub d_range: (usize, usize),
    #[arg(long, value_parser = parse_from_str::<Side>)]
    pub side: Option<Side>,
    #[arg(long)]
    pub varimax: bool,
    #[command(flatten)]
    pub effects: EffectArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the JSON summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PositivityArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long)]
    pub covariates: PathBuf,
    #[arg(long)]
    pub treatment: String,
    #[arg(long)]
    pub id: Option<String>,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

fn parse_d_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("'{a}' is not a dimension"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("'{b}' is not a dimension"))?;
    if a == 0 {
        return Err("dimensions start at 1".into());
    }
    if a > b {
        return Err(format!("range {a}:{b} is inverted"));
    }
    Ok((a, b))
}

/// Files written so far; removed again unless the command completes.
struct Outputs {
    written: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            written: Vec::new(),
            done: false,
        }
    }

    fn emit<R: Report + ?Sized>(&mut self, report: &R, args: &OutputArgs, default: Format) -> Result<()> {
        match &args.output {
            Some(path) => {
                let format = args.format.unwrap_or_else(|| {
                    if path.extension().is_some() {
                        Format::from_path(path)
                    } else {
                        default
                    }
                });
                self.write(path, |w| match format {
                    Format::Json => report.write_json(w),
                    Format::Csv => report.write_csv(w),
                })
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                match args.format.unwrap_or(default) {
                    Format::Json => report.write_json(&mut lock),
                    Format::Csv => report.write_csv(&mut lock),
                }
                .and_then(|_| lock.flush())
                .map_err(|e| Error::io("<stdout>", e))
            }
        }
    }

    fn write(&mut self, path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
        write_atomic(path, body)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn finish(mut self) {
        self.done = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Embed(args) => cmd_embed(&args),
        Command::Mediate(args) => cmd_mediate(&args),
        Command::Sensitivity(args) => cmd_sensitivity(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::PositivityExport(args) => cmd_positivity_export(&args),
    }
}

fn load_network(args: &NetworkArgs) -> Result<AdjacencyMatrix> {
    let opts = EdgeListOptions {
        n_hint: args.n_hint,
        symmetrize: args.symmetrize,
        weighted: args.weighted,
        one_based: args.one_based,
        bipartite: args.bipartite,
        n_cols: None,
    };
    let mut a = load_edgelist(&args.network, &opts)?;
    if args.zero_diagonal {
        a.zero_diagonal();
    }
    log::info!("loaded {:?} network with {} x {} nodes", a.kind(), a.nrows(), a.ncols());
    Ok(a)
}

fn warn_varimax(e: &EmbeddingArgs) {
    if e.varimax && e.d == 1 {
        log::warn!("varimax has no effect at d = 1; the rotation is the identity");
    }
}

fn options(side: Option<Side>, varimax: bool, effects: &EffectArgs) -> MediationOptions {
    MediationOptions {
        contrast: Contrast::new(effects.contrast[0], effects.contrast[1]),
        alpha: effects.alpha,
        side,
        varimax,
        covariance: if effects.hc1 {
            CovarianceKind::Hc1
        } else {
            CovarianceKind::Hc0
        },
        ..MediationOptions::default()
    }
}

fn load_roles(roles: &RoleArgs) -> Result<CovariateTable> {
    let mut b = Bindings::new(&roles.outcome, &roles.treatment, roles.controls.clone());
    if let Some(id) = &roles.id {
        b = b.with_id(id);
    }
    load_covariates(&roles.covariates, &b)
}

/// Replaces column indices in a collinearity error with the column names.
fn name_columns(e: Error, names: &[String]) -> Error {
    match e {
        Error::Collinear { columns, ratio } => {
            let named: Vec<String> = columns
                .iter()
                .map(|&c| {
                    names
                        .get(c)
                        .cloned()
                        .unwrap_or_else(|| format!("x{}", c + 1 - names.len()))
                })
                .collect();
            Error::Input(format!(
                "design matrix is collinear in columns [{}] (relative smallest singular value {ratio:.3e})",
                named.join(", ")
            ))
        }
        other => other,
    }
}

fn node_labels(count: usize, one_based: bool) -> Vec<String> {
    (0..count).map(|i| (i + usize::from(one_based)).to_string()).collect()
}

fn cmd_embed(args: &EmbedArgs) -> Result<()> {
    let a = load_network(&args.network)?;
    let e = &args.embedding;
    warn_varimax(e);
    let side = e.side.unwrap_or_else(|| crate::embedding::default_side(a.kind()));
    let embedding = Spectrum::compute(&a, e.d)?.embedding(e.d, side, e.varimax)?;
    let table = PositionTable::from_embedding(&embedding, node_labels(embedding.n(), args.network.one_based))?;

    let mut outputs = Outputs::new();
    outputs.emit(&table, &args.output, Format::Csv)?;
    let sv_path = args.singular_values.clone().or_else(|| {
        args.output.output.as_ref().map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            p.with_file_name(format!("{stem}_singular_values.csv"))
        })
    });
    if let Some(path) = sv_path {
        write_singular_values(&path, embedding.singular_values().as_slice().unwrap_or(&[]))?;
        outputs.written.push(path);
    }
    outputs.finish();
    Ok(())
}

fn cmd_mediate(args: &MediateArgs) -> Result<()> {
    let a = load_network(&args.network)?;
    let table = load_roles(&args.roles)?;
    warn_varimax(&args.embedding);
    let opts = options(args.embedding.side, args.embedding.varimax, &args.effects);
    let names = table.design_names();
    let w = table.design();
    let report = mediate(&a, w.view(), table.outcome().view(), args.embedding.d, &opts, &names)
        .map_err(|e| name_columns(e, &names))?;
    log::info!(
        "nde {:.4} [{:.4}, {:.4}], nie {:.4} [{:.4}, {:.4}]",
        report.nde.point,
        report.nde.ci_low,
        report.nde.ci_high,
        report.nie.point,
        report.nie.ci_low,
        report.nie.ci_high
    );
    let mut outputs = Outputs::new();
    outputs.emit(&report, &args.output, Format::Json)?;
    outputs.finish();
    Ok(())
}

fn cmd_sensitivity(args: &SensitivityArgs) -> Result<()> {
    let a = load_network(&args.network)?;
    let table = load_roles(&args.roles)?;
    let opts = options(args.side, args.varimax, &args.effects);
    let (d_min, d_max) = args.d_range;
    let w = table.design();
    let rows = sensitivity_curve(&a, w.view(), table.outcome().view(), d_min, d_max, &opts)?;
    for row in rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("d = {}: {}", row.d, row.error.as_deref().unwrap_or(""));
    }
    let report = SensitivityReport {
        n: a.nrows(),
        side: opts.side_for(&a),
        alpha: opts.alpha,
        contrast: opts.contrast,
        rows,
    };
    let mut outputs = Outputs::new();
    outputs.emit(&report, &args.output, Format::Csv)?;
    outputs.finish();
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (mut scenario, seeded) = SimScenario::from_path_seeded(&args.scenario)?;
    match args.seed {
        Some(seed) => scenario.master_seed = seed,
        None if !seeded => {
            scenario.master_seed = rand::random();
            log::info!("no seed given; using generated seed {}", scenario.master_seed);
        }
        None => {}
    }
    let sweep =
        scenario.d_fit.iter().any(|&d| d < scenario.blocks) && scenario.d_fit.iter().any(|&d| d > scenario.blocks);
    let report = if sweep {
        misspecification_sweep(&scenario)?
    } else {
        run_scenario(&scenario)?
    };
    if !report.failed_draws.is_empty() {
        log::warn!("{} replicate(s) failed and were excluded", report.failed_draws.len());
    }
    let mut outputs = Outputs::new();
    outputs.emit(&report, &args.output, Format::Csv)?;
    if let Some(path) = &args.summary {
        outputs.write(path, |w| report.write_json(w))?;
    }
    outputs.finish();
    Ok(())
}

fn cmd_positivity_export(args: &PositivityArgs) -> Result<()> {
    let a = load_network(&args.network)?;
    let (treatment, labels): (Array1<f64>, Vec<String>) =
        load_column(&args.covariates, &args.treatment, args.id.as_deref())?;
    if a.kind() == NetworkKind::Bipartite && args.embedding.side == Some(Side::Right) {
        return Err(Error::Input(
            "the treatment describes row nodes; use --side left for bipartite networks".into(),
        ));
    }
    if treatment.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "network has {} nodes but the covariate table has {} rows",
            a.nrows(),
            treatment.len()
        )));
    }
    let e = &args.embedding;
    warn_varimax(e);
    let side = e.side.unwrap_or_else(|| crate::embedding::default_side(a.kind()));
    let embedding = Spectrum::compute(&a, e.d)?.embedding(e.d, side, e.varimax)?;
    let table = PositionTable::from_embedding(&embedding, labels)?.with_column("treatment", treatment)?;
    let mut outputs = Outputs::new();
    outputs.emit(&table, &args.output, Format::Csv)?;
    outputs.finish();
    Ok(())
}
