use clap::{Args, Parser, Subcommand, ValueEnum};

/// Numerical laboratory for uniform counting in multiplicative Diophantine
/// approximation.
///
/// Every parameter can also be given in a TOML config file (`--config`),
/// in a section named after the subcommand (or the experiment), or through
/// environment variables `MDAP_<KEY>` and `MDAP_<SECTION>__<KEY>`.
/// Precedence: flags, then environment, then the config file, then defaults.
#[derive(Debug, Parser)]
#[command(name = "mdap", version, about, long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; `.json` selects JSON, anything else CSV. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    /// Output format when writing to stdout.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count Q_T(x), L(x;b) or N(x;b) up to T.
    Count(CountArgs),
    /// Closed-form volumes with a quadrature or Monte Carlo oracle.
    Vol(VolArgs),
    /// Check the tessellation of Ω_T by sampling.
    Tessellate(TessellateArgs),
    /// Successive minima and height of a flowed lattice.
    Height(HeightArgs),
    /// Perturbation sandwich and controlled shells for a Δ-box.
    Controlled(ControlledArgs),
    /// Correlations of shifted box counts and the auxiliary double sum.
    Corr(CorrArgs),
    /// Dyadic covers and the moment pipeline on a synthetic family.
    Schmidt(SchmidtArgs),
    /// Seeded Monte Carlo experiments.
    Experiment(ExperimentArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Count(_) => "count",
            Command::Vol(_) => "vol",
            Command::Tessellate(_) => "tessellate",
            Command::Height(_) => "height",
            Command::Controlled(_) => "controlled",
            Command::Corr(_) => "corr",
            Command::Schmidt(_) => "schmidt",
            Command::Experiment(_) => "experiment",
        }
    }

    /// Flag values given on the command line, as `(key, raw text)`.
    pub fn overrides(&self) -> Vec<(&str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        match self {
            Command::Count(a) => {
                put("x", &a.x);
                put("T", &a.t);
                put("a", &a.a);
                put("b", &a.b);
                put("c", &a.c);
                put("set", &a.set);
                put("random", &a.random);
                put("h", &a.h);
                put("hits", &a.hits.then(|| "true".to_string()));
            }
            Command::Vol(a) => {
                put("query", &a.query);
                put("a", &a.a);
                put("b", &a.b);
                put("c", &a.c);
                put("T", &a.t);
                put("gamma", &a.gamma);
                put("y", &a.y);
                put("k", &a.k);
                put("oracle", &a.oracle);
                put("samples", &a.samples);
                put("tol", &a.tol);
            }
            Command::Tessellate(a) => {
                put("a", &a.a);
                put("b", &a.b);
                put("c", &a.c);
                put("T", &a.t);
                put("samples", &a.samples);
                put("tile_samples", &a.tile_samples);
            }
            Command::Height(a) => {
                put("x", &a.x);
                put("r", &a.r);
                put("t", &a.t);
                put("oracle", &a.oracle.then(|| "true".to_string()));
                put("oracle_box", &a.oracle_box);
            }
            Command::Controlled(a) => {
                put("a", &a.a);
                put("b", &a.b);
                put("u1m", &a.u1m);
                put("u1p", &a.u1p);
                put("u2m", &a.u2m);
                put("u2p", &a.u2p);
                put("gamma", &a.gamma);
                put("delta", &a.delta);
                put("eps", &a.eps);
                put("m", &a.m);
                put("c", &a.c);
                put("matrices", &a.matrices);
                put("target", &a.target);
                put("budget", &a.budget);
            }
            Command::Corr(a) => {
                put("op", &a.op);
                put("d1", &a.d1);
                put("d2", &a.d2);
                put("q", &a.q);
                put("t", &a.t);
                put("m", &a.m);
                put("nodes", &a.nodes);
                put("alpha", &a.alpha);
                put("beta", &a.beta);
            }
            Command::Schmidt(a) => {
                put("s_max", &a.s_max);
                put("family", &a.family);
                put("points", &a.points);
                put("beta", &a.beta);
                put("kappa", &a.kappa);
                put("eps", &a.eps);
                put("level", &a.level);
                put("weight", &a.weight);
            }
            Command::Experiment(a) => {
                for p in &a.params {
                    if let Some((k, v)) = p.split_once('=') {
                        out.push((k.trim(), v.trim().to_string()));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct CountArgs {
    /// Target point `x1,x2`.
    #[arg(long)]
    pub x: Option<String>,
    /// Horizon T (number or expression).
    #[arg(long = "T", id = "T")]
    pub t: Option<String>,
    /// Lower cut a_T (expression in T).
    #[arg(long)]
    pub a: Option<String>,
    /// Upper cut b_T (expression in T).
    #[arg(long)]
    pub b: Option<String>,
    /// Box size c_T (expression in T).
    #[arg(long)]
    pub c: Option<String>,
    /// Q, L or N.
    #[arg(long)]
    pub set: Option<String>,
    /// Count at this many seeded random points instead of `--x`.
    #[arg(long)]
    pub random: Option<String>,
    /// Weight h: one, linear or file:<path> (two-column piecewise-linear).
    #[arg(long)]
    pub h: Option<String>,
    /// Also print the hits, separated by `;`.
    #[arg(long)]
    pub hits: bool,
}

#[derive(Debug, Args)]
pub struct VolArgs {
    /// xi, section, omega or weighted.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long = "T", id = "T")]
    pub t: Option<String>,
    /// γ for `xi`.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Section height for `section`.
    #[arg(long)]
    pub y: Option<String>,
    /// Exponent k of h(u) = u^k for `weighted`.
    #[arg(long)]
    pub k: Option<String>,
    /// quad or mc.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    /// Quadrature tolerance.
    #[arg(long)]
    pub tol: Option<String>,
}

#[derive(Debug, Args)]
pub struct TessellateArgs {
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long = "T", id = "T")]
    pub t: Option<String>,
    /// Sampled Ω_T points.
    #[arg(long)]
    pub samples: Option<String>,
    /// Sampled members per tile.
    #[arg(long = "tile-samples")]
    pub tile_samples: Option<String>,
}

#[derive(Debug, Args)]
pub struct HeightArgs {
    /// Target point `x1,x2`.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub r: Option<String>,
    /// Flow time `t1,t2` (one value means diagonal).
    #[arg(long)]
    pub t: Option<String>,
    /// Also run the brute-force oracle.
    #[arg(long)]
    pub oracle: bool,
    /// Coefficient box of the brute-force oracle.
    #[arg(long = "oracle-box")]
    pub oracle_box: Option<String>,
}

#[derive(Debug, Args)]
pub struct ControlledArgs {
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub u1m: Option<String>,
    #[arg(long)]
    pub u1p: Option<String>,
    #[arg(long)]
    pub u2m: Option<String>,
    #[arg(long)]
    pub u2p: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    /// The constant M.
    #[arg(long)]
    pub m: Option<String>,
    /// Declared control constant C for the shells.
    #[arg(long)]
    pub c: Option<String>,
    /// Sampled matrices g ∈ V_ε.
    #[arg(long)]
    pub matrices: Option<String>,
    /// Points of the symmetric difference sought per matrix.
    #[arg(long)]
    pub target: Option<String>,
    /// Draw budget per matrix.
    #[arg(long)]
    pub budget: Option<String>,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    /// exact, bound or doublesum.
    #[arg(long)]
    pub op: Option<String>,
    /// First set: rectangles `x0,x1,y0,y1` separated by `;`.
    #[arg(long)]
    pub d1: Option<String>,
    /// Second set, same syntax.
    #[arg(long)]
    pub d2: Option<String>,
    /// Coprime pair `q1,q2`.
    #[arg(long)]
    pub q: Option<String>,
    /// Flow time `t1,t2` for the mean bound.
    #[arg(long)]
    pub t: Option<String>,
    /// The constant M.
    #[arg(long)]
    pub m: Option<String>,
    /// Quadrature nodes per axis for `exact`.
    #[arg(long)]
    pub nodes: Option<String>,
    /// Lower end α of the double sum (with `--beta`).
    #[arg(long)]
    pub alpha: Option<String>,
    /// Upper end β of the double sum.
    #[arg(long)]
    pub beta: Option<String>,
}

#[derive(Debug, Args)]
pub struct SchmidtArgs {
    /// Check all dyadic covers for N < 2^s, s ≤ s_max.
    #[arg(long = "s-max")]
    pub s_max: Option<String>,
    /// zero, signs or concentrated.
    #[arg(long)]
    pub family: Option<String>,
    /// Points of the finite probability space.
    #[arg(long)]
    pub points: Option<String>,
    /// β_T.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    /// Level of the concentrated family.
    #[arg(long)]
    pub level: Option<String>,
    /// Weight of the concentrated family.
    #[arg(long)]
    pub weight: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// levelset, heightmoment, l2siegel, thinstrip, asymptotics or equidist.
    #[arg(long)]
    pub name: String,
    /// Parameter override `key=value`, repeatable (e.g. `--param n=500`).
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = key_value)]
    pub params: Vec<String>,
}

fn key_value(s: &str) -> Result<String, String> {
    match s.split_once('=') {
        Some((k, _)) if !k.trim().is_empty() => Ok(s.to_string()),
        _ => Err(format!("expected KEY=VALUE, got {s:?}")),
    }
}
