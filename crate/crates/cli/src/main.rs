use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use stbc_core::capacity::{
    capacity_sweep, high_snr_decomposition, random_rotation_baseline, write_capacity_csv,
};
use stbc_core::channel::{
    equivalent_channel, profile_statistics, r_profile, sample_channel_seeded, ZERO_TOL,
};
use stbc_core::clifford::{build_generators, certify, SignChoice};
use stbc_core::decoder::{complexity_account, Constellation, DecoderKind};
use stbc_core::design::StbcDesign;
use stbc_core::gain::{
    builtin_rotation, min_determinant, pam_differences, Encoder, RotationSpec, DEFAULT_DET_BUDGET,
};
use stbc_core::sim::{
    build_layered, parse_angle, parse_snr_list, run_error_sweep, run_trials, verify_all,
    verify_design, write_csv, write_trial_csv, SimConfig,
};

#[derive(Parser)]
#[command(
    name = "stbc",
    version,
    about = "Clifford-algebra space-time block codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anticommuting generator matrices
    Clifford {
        #[command(subcommand)]
        action: CliffordCmd,
    },
    /// Build, verify or print a design
    Design {
        #[command(subcommand)]
        action: DesignCmd,
    },
    /// Zero pattern of the R factor over random channels
    Channel {
        #[command(subcommand)]
        action: ChannelCmd,
    },
    /// Decode random codewords at one SNR and print one CSV row per trial
    Decode(DecodeArgs),
    /// Ergodic code capacity
    Capacity {
        #[command(subcommand)]
        action: CapacityCmd,
    },
    /// Coding-gain tools
    Gain {
        #[command(subcommand)]
        action: GainCmd,
    },
    /// Error-rate simulation
    Sim {
        #[command(subcommand)]
        action: SimCmd,
    },
    /// Run every certification for one antenna count and layer count
    VerifyAll {
        #[arg(long, default_value_t = 1)]
        a: u32,
        #[arg(long, default_value_t = 2)]
        layers: usize,
    },
}

#[derive(Subcommand)]
enum CliffordCmd {
    /// Print F_1..F_2a and the algebra residuals
    Dump {
        #[arg(long, default_value_t = 1)]
        a: u32,
        /// Use -1 to negate the last generator
        #[arg(long, default_value = "+1", allow_hyphen_values = true)]
        sign: String,
    },
}

#[derive(Subcommand)]
enum DesignCmd {
    /// Write a design file
    Build {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the group-decoding conditions and rank
    Verify {
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Print labels, groups and weight matrices
    Dump {
        #[command(flatten)]
        design: DesignArgs,
    },
}

#[derive(Subcommand)]
enum ChannelCmd {
    Profile {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 2)]
        nr: usize,
        /// Number of channel draws
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, env = "STBC_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = ZERO_TOL)]
        tol: f64,
        /// CSV of per-entry statistics
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value = "4qam")]
    constellation: String,
    #[arg(long, default_value_t = 2)]
    nr: usize,
    #[arg(long, default_value = "10", allow_hyphen_values = true)]
    snr_db: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, env = "STBC_SEED", default_value_t = 1)]
    seed: u64,
    /// oracle, group, conditional or auto
    #[arg(long, default_value = "auto")]
    decoder: String,
    /// builtin, none or a matrix file
    #[arg(long, default_value = "builtin")]
    rotation: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CapacityCmd {
    Sweep {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 2)]
        nr: usize,
        /// `A:B:STEP` or a comma list
        #[arg(long, default_value = "0:30:5", allow_hyphen_values = true)]
        snr_db: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, env = "STBC_SEED", default_value_t = 1)]
        seed: u64,
        /// Replace the design by a random orthogonal mix of its weights
        #[arg(long)]
        baseline_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact capacity against the R-diagonal high-SNR form
    HighSnr {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 2)]
        nr: usize,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, env = "STBC_SEED", default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GainCmd {
    /// Minimum determinant over single-group differences
    MinDet {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value = "4qam")]
        alphabet: String,
        /// builtin, none or a matrix file
        #[arg(long, default_value = "builtin")]
        rotation: String,
        #[arg(long, default_value_t = 0)]
        group: usize,
        #[arg(long, default_value_t = DEFAULT_DET_BUDGET)]
        budget: u128,
    },
}

#[derive(Subcommand)]
enum SimCmd {
    /// SER/CER sweep; flags override the config file
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Flat `key = value` file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a: Option<u32>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    layer_scalar: Option<String>,
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    constellation: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "STBC_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    rotation: Option<String>,
    #[arg(long)]
    budget: Option<u128>,
    /// Record wall time per point (output is then not reproducible)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A design file, or the builtin construction.
#[derive(Args)]
struct DesignArgs {
    /// Design file; overrides --a/--layers
    #[arg(long)]
    design: Option<PathBuf>,
    /// n_t = 2^a
    #[arg(long, default_value_t = 1)]
    a: u32,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Phase of the scalar on layers after the first, e.g. pi/4
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    layer_scalar: String,
}

impl DesignArgs {
    fn load(&self) -> Result<StbcDesign> {
        match &self.design {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                Ok(StbcDesign::from_text(&text)?)
            }
            None => {
                let phase = parse_angle(&self.layer_scalar)?;
                Ok(build_layered(
                    self.a,
                    self.layers,
                    Complex64::from_polar(1.0, phase),
                )?)
            }
        }
    }
}

fn rotation_for(design: &StbcDesign, choice: &str) -> Result<RotationSpec> {
    let dim = design.n_t() / 2;
    Ok(match choice {
        "builtin" => builtin_rotation(dim)?,
        "none" | "identity" => RotationSpec::identity(dim),
        path => RotationSpec::from_file(path.as_ref())?,
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `false` when a check ran but failed.
fn run(cli: Cli) -> Result<bool> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Clifford {
            action: CliffordCmd::Dump { a, sign },
        } => {
            let sign = match sign.as_str() {
                "+1" | "+" | "1" => SignChoice::Plus,
                "-1" | "-" => SignChoice::Minus,
                other => bail!("sign must be +1 or -1, got '{other}'"),
            };
            let set = build_generators(a, sign)?;
            for (i, f) in set.generators().iter().enumerate() {
                writeln!(stdout, "F{}", i + 1)?;
                write!(stdout, "{}", f.to_text())?;
            }
            if let Some(p) = set.augmented() {
                writeln!(stdout, "augmented")?;
                write!(stdout, "{}", p.to_text())?;
            }
            let r = certify(&set);
            writeln!(
                stdout,
                "anticommutator {:.2e} unitary {:.2e} anti-hermitian {:.2e} exact {}",
                r.max_anticommutator, r.max_unitary, r.max_anti_hermitian, r.exact
            )?;
            Ok(r.passed())
        }
        Command::Design { action } => match action {
            DesignCmd::Build { design, out } => {
                let d = design.load()?;
                output(&out)?.write_all(d.to_text().as_bytes())?;
                Ok(true)
            }
            DesignCmd::Verify { design } => {
                let rep = verify_design(&design.load()?);
                write!(stdout, "{}", rep.to_text())?;
                Ok(rep.passed())
            }
            DesignCmd::Dump { design } => {
                let d = design.load()?;
                writeln!(
                    stdout,
                    "n_t {} T {} rate {} layers {}",
                    d.n_t(),
                    d.t(),
                    d.rate(),
                    d.layers()
                )?;
                for (g, members) in d.layout().groups().iter().enumerate() {
                    let labels: Vec<&str> =
                        members.iter().map(|&i| d.labels()[i].as_str()).collect();
                    writeln!(
                        stdout,
                        "group {g} layer {}: {}",
                        d.layout().layer_of_group(g),
                        labels.join(" ")
                    )?;
                }
                for (i, (w, l)) in d.weights().iter().zip(d.labels()).enumerate() {
                    writeln!(stdout, "A{} = {l}", i + 1)?;
                    write!(stdout, "{}", w.to_text())?;
                }
                Ok(true)
            }
        },
        Command::Channel {
            action:
                ChannelCmd::Profile {
                    design,
                    nr,
                    seeds,
                    seed,
                    tol,
                    out,
                },
        } => {
            let d = design.load()?;
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let first = sample_channel_seeded(d.n_t(), nr, seed, 0);
            let profile = r_profile(&equivalent_channel(&first.h, &d)?, tol)?;
            writeln!(stdout, "zero pattern of R, draw 0 (0 = zero, x = nonzero):")?;
            write!(stdout, "{}", profile.mask_grid())?;
            let stats = profile_statistics(&d, nr, seeds, seed, tol)?;
            writeln!(
                stdout,
                "draws {} mandated-zero violation {:.2e} block form in every layer {}",
                stats.seeds, stats.mandated_violation, stats.all_layers_kron_form
            )?;
            if out.is_some() {
                let mut w = output(&out)?;
                writeln!(w, "i,j,mean_abs,max_abs,zero_fraction")?;
                let n = d.weights().len();
                for i in 0..n {
                    for j in i..n {
                        writeln!(
                            w,
                            "{},{},{:.6e},{:.6e},{}",
                            i + 1,
                            j + 1,
                            stats.mean_abs[(i, j)],
                            stats.max_abs[(i, j)],
                            stats.zero_fraction[(i, j)]
                        )?;
                    }
                }
            }
            Ok(stats.mandated_violation < tol)
        }
        Command::Decode(args) => {
            let d = args.design.load()?;
            let c = Constellation::parse(&args.constellation)?;
            let enc = Encoder::new(&d, &rotation_for(&d, &args.rotation)?, &c)?;
            let kind = DecoderKind::parse(&args.decoder)?.resolve(&d);
            let snr = parse_snr_list(&args.snr_db)?;
            let [snr] = snr[..] else {
                bail!("decode takes a single SNR")
            };
            let outcomes = run_trials(&enc, kind, args.nr, snr, args.trials, args.seed)?;
            write_trial_csv(snr, &outcomes, output(&args.out)?)?;
            let acc = complexity_account(&d, &c);
            eprintln!(
                "decoder {} predicted evaluations {} (order M^{}), oracle {}",
                kind.name(),
                kind.predicted_evaluations(&d, &c),
                acc.order_exponent,
                acc.oracle_evaluations
            );
            Ok(true)
        }
        Command::Capacity { action } => match action {
            CapacityCmd::Sweep {
                design,
                nr,
                snr_db,
                trials,
                seed,
                baseline_seed,
                out,
            } => {
                let mut d = design.load()?;
                if let Some(s) = baseline_seed {
                    d = random_rotation_baseline(&d, s)?;
                }
                let recs = capacity_sweep(&d, nr, &parse_snr_list(&snr_db)?, trials, seed)?;
                write_capacity_csv(&recs, output(&out)?)?;
                Ok(true)
            }
            CapacityCmd::HighSnr {
                design,
                nr,
                snr_db,
                trials,
                seed,
            } => {
                let d = design.load()?;
                let r = high_snr_decomposition(&d, nr, snr_db, trials, seed)?;
                writeln!(
                    stdout,
                    "exact {:.4} ± {:.4} bits, R form {:.4} ± {:.4} bits, gap {:.4} ± {:.4}, square {}, redrawn {}",
                    r.exact.mean,
                    r.exact.std_error,
                    r.via_r.mean,
                    r.via_r.std_error,
                    r.gap.0,
                    r.gap.1,
                    r.square,
                    r.resampled
                )?;
                Ok(true)
            }
        },
        Command::Gain {
            action:
                GainCmd::MinDet {
                    design,
                    alphabet,
                    rotation,
                    group,
                    budget,
                },
        } => {
            let d = design.load()?;
            let c = Constellation::parse(&alphabet)?;
            let enc = Encoder::new(&d, &rotation_for(&d, &rotation)?, &c)?;
            let rep = min_determinant(&enc, group, &pam_differences(c.side()), budget)?;
            writeln!(
                stdout,
                "group {} min det literal {:.6e} closed form {:.6e} at Δs = {:?} ({} evaluations)",
                rep.group, rep.literal, rep.closed_form, rep.argmin, rep.evaluations
            )?;
            Ok(true)
        }
        Command::Sim {
            action: SimCmd::Sweep(args),
        } => {
            let mut cfg = match &args.config {
                Some(p) => SimConfig::load(p)?,
                None => SimConfig::default(),
            };
            let overrides: [(&str, Option<String>); 12] = [
                (
                    "design",
                    args.design.as_ref().map(|p| p.display().to_string()),
                ),
                ("a", args.a.map(|v| v.to_string())),
                ("layers", args.layers.map(|v| v.to_string())),
                ("layer_scalar", args.layer_scalar.clone()),
                ("n_r", args.nr.map(|v| v.to_string())),
                ("constellation", args.constellation.clone()),
                ("snr_db", args.snr_db.clone()),
                ("trials", args.trials.map(|v| v.to_string())),
                ("seed", args.seed.map(|v| v.to_string())),
                ("decoder", args.decoder.clone()),
                ("rotation", args.rotation.clone()),
                ("budget", args.budget.map(|v| v.to_string())),
            ];
            for (key, value) in overrides {
                if let Some(v) = value {
                    cfg.set(key, &v)?;
                }
            }
            if args.timing {
                cfg.timing = true;
            }
            if args.out.is_some() {
                cfg.output = args.out.clone();
            }
            cfg.validate()?;
            let recs = run_error_sweep(&cfg)?;
            write_csv(&recs, output(&cfg.output)?)?;
            Ok(true)
        }
        Command::VerifyAll { a, layers } => {
            let rep = verify_all(a, layers)?;
            write!(stdout, "{}", rep.to_text())?;
            Ok(rep.passed())
        }
    }
}
