//! `qmep`: command-line driver for quantized minimum-entropy-pursuit
//! experiments.
//!
//! Every subcommand that takes experiment settings reads an optional
//! `key = value` config file (`--config`) and then applies `--set key=value`
//! overrides in order. Output files go to `--out`, else `$QMEP_OUT_DIR`, else
//! `./qmep-out`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qmep::experiments::{
    self, emit_plot, emit_report, format_convergence_table, run_all_suites, run_convergence_study,
    run_recovery_sweep, run_robustness_sweep, suites, ConfigBuilder, ExperimentConfig, Harness,
    SolverChoice, SuiteOutcome,
};
use qmep::quantization::quantize_sequence;
use qmep::sensing::{generate_matrix, measure, SensingSystem};
use qmep::solvers::{normalized_error, CostSpec, Objective};
use qmep::sources::{estimate_information_dimension, sample_source};
use qmep::tables::{format_matrix, parse_matrix, read_signal, write_signal};
use qmep::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "qmep",
    version,
    about = "Quantized minimum-entropy-pursuit recovery experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override a config key; may be repeated (`--set n=128 --set k=1`).
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (same as `--set seed=...`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn builder(&self) -> Result<ConfigBuilder> {
        let mut builder = match &self.config {
            Some(path) => ConfigBuilder::from_file(path)?,
            None => ConfigBuilder::new(),
        };
        for pair in &self.overrides {
            builder.set_pair(pair)?;
        }
        if let Some(seed) = self.seed {
            builder.set("seed", &seed.to_string())?;
        }
        Ok(builder)
    }

    fn load(&self) -> Result<ExperimentConfig> {
        self.builder()?.build()
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(experiments::output_dir);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the configured source and write `x.txt` and its quantization `xq.txt`.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Draw a Gaussian matrix and write `matrix.txt` and `y.txt` for a signal.
    Sense {
        /// Signal file, one value per line.
        #[arg(long)]
        signal: PathBuf,
        /// Number of measurements.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        matrix_seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Recover one signal from `matrix.txt` and `y.txt` (or from the signal itself).
    Recover {
        #[arg(long)]
        matrix: PathBuf,
        /// Measurements; computed from `--signal` when omitted.
        #[arg(long)]
        y: Option<PathBuf>,
        /// Ground-truth signal, used for the error and for empirical-input weights.
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Write the accepted-move log of the annealer to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the verification suites; exits nonzero if any fails.
    Verify {
        /// Run only these suites (default: all).
        #[arg(long = "suite", value_name = "NAME")]
        suites: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Recovery sweep over the configured rates (and eps_w for robustness).
    Sweep {
        /// Robustness sweep with threshold diagnostics.
        #[arg(long)]
        robustness: bool,
        /// Also write an SVG plot of success fraction against rate.
        #[arg(long)]
        plot: bool,
        /// Report file name inside the output directory.
        #[arg(long, default_value = "sweep.csv")]
        name: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Empirical block-law convergence study.
    Converge {
        /// Comma-separated sample lengths.
        #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 1000, 10_000, 100_000])]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Conditional entropy per bit of the quantized source across resolutions.
    EstimateId {
        /// Comma-separated resolutions.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4u32, 8, 12, 16])]
        bits: Vec<u32>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn generate(cfg: &ConfigArgs) -> Result<()> {
    let exp = cfg.load()?;
    let dir = cfg.out_dir()?;
    let x = sample_source(&exp.source, exp.n, exp.master_seed)?;
    let xq = quantize_sequence(&x, &exp.quant_spec()?)?;
    write_signal(&dir.join("x.txt"), &x)?;
    write_signal(&dir.join("xq.txt"), xq.values())?;
    println!(
        "wrote {n} samples (b = {b}) to {}",
        dir.display(),
        n = exp.n,
        b = exp.resolved_bits()
    );
    Ok(())
}

fn sense(signal: &Path, m: usize, matrix_seed: u64, cfg: &ConfigArgs) -> Result<()> {
    let dir = cfg.out_dir()?;
    let x = read_signal(signal)?;
    let a = generate_matrix(m, x.len(), matrix_seed)?;
    let y = measure(&a, &x)?;
    fs::write(dir.join("matrix.txt"), format_matrix(&a))?;
    write_signal(&dir.join("y.txt"), &y)?;
    println!(
        "wrote a {m}x{} matrix and measurements to {}",
        x.len(),
        dir.display()
    );
    Ok(())
}

fn recover(
    matrix: &Path,
    y: Option<&Path>,
    signal: Option<&Path>,
    trace: Option<&Path>,
    cfg: &ConfigArgs,
) -> Result<()> {
    let a = parse_matrix(&fs::read_to_string(matrix)?)?;
    let mut builder = cfg.builder()?;
    builder.set("n", &a.ncols().to_string())?;
    let mut exp = builder.build()?;
    if let (Some(_), SolverChoice::Anneal(schedule)) = (trace, &mut exp.solver) {
        schedule.record_trace = true;
    }
    let harness = Harness::new(&exp)?;
    let x = signal.map(read_signal).transpose()?;
    let y = match (y, &x) {
        (Some(path), _) => read_signal(path)?,
        (None, Some(x)) => measure(&a, x)?,
        (None, None) => {
            return Err(Error::Config("recover needs --y or --signal".into()));
        }
    };
    let xq = x
        .as_ref()
        .map(|x| quantize_sequence(x, harness.quant()))
        .transpose()?;
    let m = a.nrows();
    let sensing = SensingSystem::from_matrix(a, 0, harness.lambda())?;
    let objective = match harness.weights(xq.as_ref(), exp.eps_w[0], exp.master_seed)? {
        None => Objective::Lmep,
        Some(w) => Objective::Amep(w),
    };
    let mode = objective.name();
    let spec = CostSpec::new(objective, exp.k, sensing, y, *harness.quant())?;
    let result = harness.solve(&spec, exp.master_seed)?;
    let error = x
        .as_ref()
        .map(|x| normalized_error(x, result.xhat.values()))
        .transpose()?;

    let dir = cfg.out_dir()?;
    write_signal(&dir.join("xhat.txt"), result.xhat.values())?;
    if let Some(path) = trace {
        let mut text = String::from("proposal,coordinate,value,cost\n");
        for t in &result.trace {
            text.push_str(&format!(
                "{},{},{},{}\n",
                t.proposal, t.coordinate, t.value, t.cost
            ));
        }
        fs::write(path, text)?;
    }
    println!("seed,m,n,b,k,lambda,mode,cost,residual,normalized_error");
    println!(
        "{},{},{},{},{},{},{},{},{},{}",
        result.seed,
        m,
        exp.n,
        harness.quant().bits(),
        exp.k,
        harness.lambda(),
        mode,
        result.cost,
        result.residual_term,
        error.map_or_else(|| "nan".to_string(), |e| e.to_string())
    );
    Ok(())
}

fn verify(names: &[String], seed: u64) -> Result<bool> {
    let outcomes: Vec<SuiteOutcome> = if names.is_empty() {
        run_all_suites(seed)?
    } else {
        names
            .iter()
            .map(|name| match name.as_str() {
                "minimizer-equivalence" => suites::minimizer_equivalence_suite(100, seed),
                "sandwich" => suites::sandwich_suite(100, 0.25, seed),
                "concavity" => suites::concavity_suite(1000, seed),
                "kl-decomposition" => suites::kl_identity_suite(1000, seed),
                "entropy-identity" => suites::entropy_identity_suite(1000, seed),
                "quantization" => suites::quantization_suite(1000, seed),
                other => Err(Error::Config(format!("unknown suite {other:?}"))),
            })
            .collect::<Result<_>>()?
    };
    for o in &outcomes {
        println!("{o}");
    }
    Ok(outcomes.iter().all(SuiteOutcome::passed))
}

fn sweep(robustness: bool, plot: bool, name: &str, cfg: &ConfigArgs) -> Result<()> {
    let exp = cfg.load()?;
    let report = if robustness {
        run_robustness_sweep(&exp)?
    } else {
        run_recovery_sweep(&exp)?
    };
    let dir = cfg.out_dir()?;
    let path = dir.join(name);
    emit_report(&report, &path)?;
    fs::write(dir.join("config.txt"), exp.to_text())?;
    if plot {
        emit_plot(&report, &path.with_extension("svg"))?;
    }
    for c in &report.cells {
        println!(
            "rate {:<6} eps_w {:<6} success {:.3} mean error {:.4}",
            c.rate, c.eps_w, c.success_fraction, c.mean_error
        );
    }
    for t in &report.thresholds {
        println!(
            "eps_w {:<6} threshold {:?} budget {:?} predicted {:.3}",
            t.eps_w, t.rate, t.budget, t.predicted
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn converge(lengths: &[usize], replicates: usize, cfg: &ConfigArgs) -> Result<()> {
    let exp = cfg.load()?;
    let rows = run_convergence_study(
        &exp.source,
        &exp.quant_spec()?,
        exp.k,
        lengths,
        replicates,
        exp.master_seed,
    )?;
    let dir = cfg.out_dir()?;
    let path = dir.join("convergence.csv");
    fs::write(&path, format_convergence_table(&rows))?;
    for &n in lengths {
        let at_n: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
        let mean = at_n.iter().map(|r| r.l1).sum::<f64>() / at_n.len() as f64;
        println!("n {n:<8} mean L1 deviation {mean:.5}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn estimate_id(bits: &[u32], cfg: &ConfigArgs) -> Result<()> {
    let exp = cfg.load()?;
    let est = estimate_information_dimension(&exp.source, exp.k, bits)?;
    println!("b,ratio");
    for (b, r) in est.b_values.iter().zip(&est.ratios) {
        println!("{b},{r}");
    }
    println!("# estimate at the largest resolution: {}", est.extrapolated);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate { cfg } => generate(cfg)?,
        Command::Sense {
            signal,
            m,
            matrix_seed,
            cfg,
        } => sense(signal, *m, *matrix_seed, cfg)?,
        Command::Recover {
            matrix,
            y,
            signal,
            trace,
            cfg,
        } => recover(
            matrix,
            y.as_deref(),
            signal.as_deref(),
            trace.as_deref(),
            cfg,
        )?,
        Command::Verify { suites, seed } => return verify(suites, *seed),
        Command::Sweep {
            robustness,
            plot,
            name,
            cfg,
        } => sweep(*robustness, *plot, name, cfg)?,
        Command::Converge {
            lengths,
            replicates,
            cfg,
        } => converge(lengths, *replicates, cfg)?,
        Command::EstimateId { bits, cfg } => estimate_id(bits, cfg)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
