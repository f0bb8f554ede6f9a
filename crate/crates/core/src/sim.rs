//! Seeded error-rate sweeps, CSV output and the all-module verification
//! suite.
//!
//! Trial `t` of SNR point `p` draws its channel, info symbols and noise, in
//! that order, from stream `(p << 32) | t` of the master seed. Results are
//! therefore identical for any thread count.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::db_to_linear;
use crate::channel::{
    equivalent_channel, layer_blocks, mandated_zero_mask, mandated_zero_violation, r_profile,
    sample_channel, sample_channel_seeded, ZERO_TOL,
};
use crate::clifford::{
    build_generators, certify, verify_subset_rules, verify_traceless, SignChoice,
};
use crate::decoder::{
    complexity_account, conditional_decode, decode, group_decode, ml_oracle, transmit_amplitude,
    ConditionalOptions, Constellation, DecoderKind, ORACLE_BUDGET,
};
use crate::design::{
    build_rate1_from, codeword, extend_full_rate, real_rank, verify_group_conditions, StbcDesign,
};
use crate::error::{Result, StbcError};
use crate::gain::{
    builtin_rotation, exact_det, extract_w, literal_det, min_determinant, orthogonality_residual,
    pam_differences, Encoder, RotationSpec, DEFAULT_DET_BUDGET,
};
use crate::linalg::ComplexMatrix;
use crate::rng::{complex_gaussian, stream_rng, trial_stream};

/// Default cap on predicted metric evaluations per codeword.
pub const DEFAULT_EVAL_BUDGET: u128 = 1 << 26;

/// Where the design comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignSource {
    /// `build_rate1_4group(a)` extended to `layers` layers, layers after
    /// the first scaled by `e^{j·layer_angle}`.
    Builtin {
        a: u32,
        layers: usize,
        layer_angle: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RotationChoice {
    Builtin,
    None,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub design: DesignSource,
    pub n_r: usize,
    pub constellation: String,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub decoder: DecoderKind,
    pub rotation: RotationChoice,
    pub output: Option<PathBuf>,
    /// Record wall time per point. Off by default so output is
    /// byte-reproducible.
    pub timing: bool,
    pub eval_budget: u128,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            design: DesignSource::Builtin {
                a: 1,
                layers: 2,
                layer_angle: 0.0,
            },
            n_r: 2,
            constellation: "4qam".into(),
            snr_db: vec![0.0, 5.0, 10.0],
            trials: 1000,
            seed: 1,
            decoder: DecoderKind::Auto,
            rotation: RotationChoice::Builtin,
            output: None,
            timing: false,
            eval_budget: DEFAULT_EVAL_BUDGET,
        }
    }
}

/// `pi/4`, `-pi/2`, `pi`, or a number in radians.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || StbcError::Config(format!("bad angle '{s}'"));
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest.to_string()),
        None => (false, t),
    };
    let v = if let Some(rest) = t.strip_prefix("pi") {
        match rest.strip_prefix('/') {
            Some(d) => PI / d.trim().parse::<f64>().map_err(|_| bad())?,
            None if rest.is_empty() => PI,
            None => return Err(bad()),
        }
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    Ok(if neg { -v } else { v })
}

/// `A:B:STEP` (inclusive of `B`), a comma list, or `inf`.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| StbcError::Config(format!("bad SNR list '{s}': {what}"));
    let num = |x: &str| -> Result<f64> {
        match x.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            v => v.parse::<f64>().map_err(|_| bad("not a number")),
        }
    };
    let out = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected A:B:STEP"));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step.is_nan() || step <= 0.0 || !a.is_finite() || !b.is_finite() || b < a {
            return Err(bad("need A <= B and STEP > 0"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + i as f64 * step).collect()
    } else {
        s.split(',')
            .filter(|x| !x.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>>>()?
    };
    if out.is_empty() {
        return Err(bad("empty"));
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(StbcError::Config(format!("bad boolean '{s}'"))),
    }
}

impl SimConfig {
    /// Flat `key = value` text; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| StbcError::Parse {
                line: n + 1,
                message: format!("expected key = value, found '{line}'"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| match e {
                StbcError::Config(message) => StbcError::Parse {
                    line: n + 1,
                    message,
                },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }

    /// Applies one setting; later calls win.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = |v: &str| {
            v.parse::<u64>().map_err(|_| {
                StbcError::Config(format!("'{key}' needs a non-negative integer, got '{v}'"))
            })
        };
        let builtin = |d: &DesignSource| match d {
            DesignSource::Builtin {
                a,
                layers,
                layer_angle,
            } => (*a, *layers, *layer_angle),
            DesignSource::File(_) => (1, 1, 0.0),
        };
        match key {
            "a" => {
                let (_, l, s) = builtin(&self.design);
                self.design = DesignSource::Builtin {
                    a: int(value)? as u32,
                    layers: l,
                    layer_angle: s,
                };
            }
            "layers" => {
                let (a, _, s) = builtin(&self.design);
                self.design = DesignSource::Builtin {
                    a,
                    layers: int(value)? as usize,
                    layer_angle: s,
                };
            }
            "layer_scalar" => {
                let (a, l, _) = builtin(&self.design);
                self.design = DesignSource::Builtin {
                    a,
                    layers: l,
                    layer_angle: parse_angle(value)?,
                };
            }
            "design" => self.design = DesignSource::File(PathBuf::from(value)),
            "n_r" | "nr" => self.n_r = int(value)? as usize,
            "constellation" => self.constellation = value.to_string(),
            "snr_db" => self.snr_db = parse_snr_list(value)?,
            "trials" => self.trials = int(value)? as usize,
            "seed" => self.seed = int(value)?,
            "decoder" => self.decoder = DecoderKind::parse(value)?,
            "rotation" => {
                self.rotation = match value {
                    "builtin" => RotationChoice::Builtin,
                    "none" | "identity" => RotationChoice::None,
                    path => RotationChoice::File(PathBuf::from(path)),
                }
            }
            "output" | "out" => self.output = Some(PathBuf::from(value)),
            "timing" => self.timing = parse_bool(value)?,
            "budget" => self.eval_budget = int(value)? as u128,
            other => return Err(StbcError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(StbcError::Config("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(StbcError::Config("SNR list is empty".into()));
        }
        if self.n_r == 0 {
            return Err(StbcError::Config("n_r must be at least 1".into()));
        }
        Constellation::parse(&self.constellation)?;
        Ok(())
    }

    pub fn build_design(&self) -> Result<StbcDesign> {
        match &self.design {
            DesignSource::Builtin {
                a,
                layers,
                layer_angle,
            } => build_layered(*a, *layers, Complex64::from_polar(1.0, *layer_angle)),
            DesignSource::File(p) => StbcDesign::from_text(&std::fs::read_to_string(p)?),
        }
    }

    pub fn build_encoder(&self, design: &StbcDesign) -> Result<Encoder> {
        let c = Constellation::parse(&self.constellation)?;
        match &self.rotation {
            RotationChoice::None => Encoder::unrotated(design, &c),
            RotationChoice::Builtin => {
                Encoder::new(design, &builtin_rotation(design.n_t() / 2)?, &c)
            }
            RotationChoice::File(p) => Encoder::new(design, &RotationSpec::from_file(p)?, &c),
        }
    }
}

/// Rate-`layers` design for `n_t = 2^a` with the default sign choice.
pub fn build_layered(a: u32, layers: usize, layer_scalar: Complex64) -> Result<StbcDesign> {
    let set = build_generators(a, SignChoice::Plus)?;
    let base = build_rate1_from(&set);
    if layers == 1 {
        return Ok(base);
    }
    extend_full_rate(&base, layers, &set, layer_scalar)
}

/// One SNR point of an error-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub snr_db: f64,
    pub trials: usize,
    pub cer: f64,
    pub ser: f64,
    pub mean_evals: f64,
    pub wall_time_s: f64,
    pub codeword_errors: usize,
    pub symbol_errors: usize,
}

pub const SIM_COLUMNS: [&str; 8] = [
    "snr_db",
    "trials",
    "cer",
    "ser",
    "mean_evals",
    "wall_time_s",
    "codeword_errors",
    "symbol_errors",
];

/// Outcome of a single simulated codeword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub symbol_errors: usize,
    pub evaluations: u128,
    /// Decision metric of the decoded codeword.
    pub metric: f64,
}

/// Transmits and decodes one codeword on its own stream.
pub fn run_trial(
    encoder: &Encoder,
    kind: DecoderKind,
    n_r: usize,
    snr_db: f64,
    seed: u64,
    stream: u64,
) -> Result<TrialOutcome> {
    let design = encoder.design();
    let mut rng = stream_rng(seed, stream);
    let h = sample_channel(design.n_t(), n_r, &mut rng);
    let side = encoder.constellation().side();
    let info: Vec<usize> = (0..encoder.len())
        .map(|_| rng.random_range(0..side))
        .collect();
    let noise = ComplexMatrix::from_fn(n_r, design.t(), |_, _| complex_gaussian(&mut rng));
    // infinite SNR: unit signal scale, no noise
    let (amp, noise_scale) = if snr_db.is_infinite() {
        (transmit_amplitude(1.0, design), 0.0)
    } else {
        (transmit_amplitude(db_to_linear(snr_db), design), 1.0)
    };
    let x = codeword(design, &encoder.encode_indices(&info))?;
    let y =
        &(&h * &x).scale(Complex64::new(amp, 0.0)) + &noise.scale(Complex64::new(noise_scale, 0.0));
    let r = decode(kind, &y, &h, encoder, amp)?;
    let symbol_errors = info
        .chunks_exact(2)
        .zip(r.info.chunks_exact(2))
        .filter(|(a, b)| a != b)
        .count();
    Ok(TrialOutcome {
        symbol_errors,
        evaluations: r.metric_evaluations,
        metric: r.metric,
    })
}

/// Per-trial outcomes for one SNR point, on the streams of point index 0.
pub fn run_trials(
    encoder: &Encoder,
    kind: DecoderKind,
    n_r: usize,
    snr_db: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(encoder, kind, n_r, snr_db, seed, trial_stream(0, t)))
        .collect()
}

/// `trial,snr_db,symbol_errors,codeword_error,evaluations,metric`.
pub fn write_trial_csv<W: std::io::Write>(
    snr_db: f64,
    outcomes: &[TrialOutcome],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "snr_db",
        "symbol_errors",
        "codeword_error",
        "evaluations",
        "metric",
    ])?;
    for (t, o) in outcomes.iter().enumerate() {
        w.write_record([
            t.to_string(),
            snr_db.to_string(),
            o.symbol_errors.to_string(),
            u8::from(o.symbol_errors > 0).to_string(),
            o.evaluations.to_string(),
            format!("{:.12e}", o.metric),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Error rates at each SNR point of `cfg`.
pub fn run_error_sweep(cfg: &SimConfig) -> Result<Vec<SimRecord>> {
    cfg.validate()?;
    let design = cfg.build_design()?;
    let encoder = cfg.build_encoder(&design)?;
    run_error_sweep_with(cfg, &encoder)
}

/// As [`run_error_sweep`] with a prepared encoder.
pub fn run_error_sweep_with(cfg: &SimConfig, encoder: &Encoder) -> Result<Vec<SimRecord>> {
    let design = encoder.design();
    let kind = cfg.decoder.resolve(design);
    let predicted = kind.predicted_evaluations(design, encoder.constellation());
    let limit = if kind == DecoderKind::Oracle {
        cfg.eval_budget.min(ORACLE_BUDGET)
    } else {
        cfg.eval_budget
    };
    if predicted > limit {
        return Err(StbcError::Intractable { predicted });
    }
    let k = design.k();
    cfg.snr_db
        .iter()
        .enumerate()
        .map(|(p, &snr)| {
            let start = Instant::now();
            let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(encoder, kind, cfg.n_r, snr, cfg.seed, trial_stream(p, t)))
                .collect::<Result<_>>()?;
            let symbol_errors: usize = outcomes.iter().map(|o| o.symbol_errors).sum();
            let codeword_errors = outcomes.iter().filter(|o| o.symbol_errors > 0).count();
            let evals: u128 = outcomes.iter().map(|o| o.evaluations).sum();
            let n = cfg.trials as f64;
            Ok(SimRecord {
                snr_db: snr,
                trials: cfg.trials,
                cer: codeword_errors as f64 / n,
                ser: symbol_errors as f64 / (n * k as f64),
                mean_evals: evals as f64 / n,
                wall_time_s: if cfg.timing {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
                codeword_errors,
                symbol_errors,
            })
        })
        .collect()
}

/// Uncoded single-antenna reference: one QAM symbol per channel use over
/// `y = √SNR·h·x + n`, detected by nearest point. Same stream layout as
/// [`run_error_sweep`].
pub fn uncoded_siso_sweep(
    constellation: &Constellation,
    snr_db: &[f64],
    trials: usize,
    seed: u64,
) -> Vec<SimRecord> {
    let points = constellation.points();
    snr_db
        .iter()
        .enumerate()
        .map(|(p, &snr)| {
            let amp = if snr.is_infinite() {
                1.0
            } else {
                db_to_linear(snr).sqrt()
            };
            let noise_scale = if snr.is_infinite() { 0.0 } else { 1.0 };
            let errors: usize = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(seed, trial_stream(p, t));
                    let h = complex_gaussian(&mut rng);
                    let sent = rng.random_range(0..points.len());
                    let y = h * points[sent] * amp + complex_gaussian(&mut rng) * noise_scale;
                    let decided = (0..points.len())
                        .min_by(|&a, &b| {
                            let da = (y - h * points[a] * amp).norm_sqr();
                            let db = (y - h * points[b] * amp).norm_sqr();
                            da.total_cmp(&db)
                        })
                        .expect("non-empty constellation");
                    usize::from(decided != sent)
                })
                .sum();
            let n = trials as f64;
            SimRecord {
                snr_db: snr,
                trials,
                cer: errors as f64 / n,
                ser: errors as f64 / n,
                mean_evals: points.len() as f64,
                wall_time_s: 0.0,
                codeword_errors: errors,
                symbol_errors: errors,
            }
        })
        .collect()
}

pub fn write_csv<W: std::io::Write>(records: &[SimRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(SIM_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[SimRecord], path: &Path) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

pub fn parse_csv<R: std::io::Read>(input: R) -> Result<Vec<SimRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|x| x.map_err(StbcError::from))
        .collect()
}

/// One line of a verification report.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<28} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "overall: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}

/// Structural checks on a design: the decoding conditions and rank.
pub fn verify_design(design: &StbcDesign) -> VerifyReport {
    let mut rep = VerifyReport::default();
    let t1 = verify_group_conditions(design);
    for c in &t1.conditions {
        let detail = match c.witness {
            Some((i, j)) => format!(
                "max residual {:.2e}, witness (A{}, A{})",
                c.max_residual,
                i + 1,
                j + 1
            ),
            None => format!("max residual {:.2e}", c.max_residual),
        };
        rep.push(
            format!("design {} {}", c.id, c.description),
            c.passed,
            detail,
        );
    }
    let rank = real_rank(design);
    rep.push(
        "design real rank",
        rank == design.weights().len(),
        format!("{rank} of {}", design.weights().len()),
    );
    rep
}

/// Runs every module's certification for `n_t = 2^a` and `layers` layers.
pub fn verify_all(a: u32, layers: usize) -> Result<VerifyReport> {
    let mut rep = VerifyReport::default();
    let set = build_generators(a, SignChoice::Plus)?;

    let alg = certify(&set);
    rep.push(
        "clifford algebra",
        alg.passed(),
        format!(
            "anticommutator {:.1e}, unitary {:.1e}, anti-hermitian {:.1e}, exact {}",
            alg.max_anticommutator, alg.max_unitary, alg.max_anti_hermitian, alg.exact
        ),
    );
    if a <= 3 {
        let lem = verify_subset_rules(&set);
        rep.push(
            "clifford subset rules",
            lem.passed(),
            format!(
                "{} subsets, {} commutation pairs",
                lem.subsets, lem.commute_checked
            ),
        );
    } else {
        rep.push(
            "clifford subset rules",
            true,
            "skipped (exhaustive only for a <= 3)",
        );
    }
    let tr = verify_traceless(&set);
    rep.push(
        "clifford traceless",
        tr.passed(),
        format!("{} products", tr.checked),
    );

    let base = build_rate1_from(&set);
    let design = if layers > 1 {
        match extend_full_rate(&base, layers, &set, Complex64::new(1.0, 0.0)) {
            Ok(d) => d,
            Err(e) => {
                rep.push("layer extension", false, e.to_string());
                return Ok(rep);
            }
        }
    } else {
        base.clone()
    };
    rep.push(
        "layer extension",
        true,
        format!("multipliers {}", design.provenance().multipliers.join(", ")),
    );
    rep.checks.extend(verify_design(&design).checks);

    let w = extract_w(&base)?;
    let res = orthogonality_residual(&w);
    rep.push("W orthogonal", res < 1e-12, format!("residual {res:.1e}"));

    // one determinant in exact Gaussian-integer arithmetic
    let group0 = &base.layout().groups()[0];
    let ds: Vec<i64> = (0..group0.len() as i64)
        .map(|i| 2 * (i % 3) - 2 + 4 * (i % 2))
        .collect();
    let dsf: Vec<f64> = ds.iter().map(|&v| v as f64).collect();
    let exact = exact_det(&base, group0, &ds)?.norm_sqr() as f64;
    let float = literal_det(&base, group0, &dsf);
    let gap = (exact - float).abs() / exact.abs().max(1.0);
    rep.push(
        "exact determinant spot check",
        gap < 1e-9,
        format!("Δs {ds:?}: exact {exact:.6e}, floating {float:.6e}"),
    );

    let c4 = Constellation::qam(4)?;
    let rotation = builtin_rotation(base.n_t() / 2)?;
    let enc_base = Encoder::new(&base, &rotation, &c4)?;
    if a <= 3 {
        let md = min_determinant(&enc_base, 0, &pam_differences(2), DEFAULT_DET_BUDGET)?;
        rep.push(
            "rotated min determinant",
            md.literal > 1e-9,
            format!(
                "literal {:.4e}, closed form {:.4e}",
                md.literal, md.closed_form
            ),
        );
    }

    let n_r = layers.max(1);
    let mask = mandated_zero_mask(&design);
    let mut worst: f64 = 0.0;
    let mut kron = true;
    for s in 0..10 {
        let h = sample_channel_seeded(design.n_t(), n_r, 7, s).h;
        let p = r_profile(&equivalent_channel(&h, &design)?, ZERO_TOL)?;
        worst = worst.max(mandated_zero_violation(&p, &mask));
        kron &= layer_blocks(&p, &design)?
            .iter()
            .all(|b| b.kron_identity_form);
    }
    rep.push(
        "R block pattern",
        worst < ZERO_TOL && kron,
        format!("10 channels, n_r = {n_r}, worst mandated entry {worst:.1e}"),
    );

    let enc = Encoder::new(&design, &rotation, &c4)?;
    rep.push_decoder_check(&enc, n_r)?;
    Ok(rep)
}

impl VerifyReport {
    fn push_decoder_check(&mut self, enc: &Encoder, n_r: usize) -> Result<()> {
        let design = enc.design();
        let acc = complexity_account(design, enc.constellation());
        let amp = transmit_amplitude(db_to_linear(4.0), design);
        if acc.oracle_evaluations <= 1 << 16 {
            let trials = 50;
            let mut agree = 0;
            let mut counts = true;
            for t in 0..trials {
                let (y, h) = noisy_observation(enc, n_r, amp, 1.0, 99, t);
                let oracle = ml_oracle(&y, &h, enc, amp)?;
                let fast = if design.layers() == 1 {
                    group_decode(&y, &h, enc, amp)?
                } else {
                    conditional_decode(&y, &h, enc, amp, ConditionalOptions::default())?
                };
                if oracle.info == fast.info && (oracle.metric - fast.metric).abs() < 1e-9 {
                    agree += 1;
                }
                counts &= fast.metric_evaluations == acc.evaluations;
            }
            self.push(
                "decoder matches oracle",
                agree == trials && counts,
                format!(
                    "{agree}/{trials} trials, {} evaluations per codeword",
                    acc.evaluations
                ),
            );
        } else {
            let (y, h) = noisy_observation(enc, n_r, amp, 0.0, 99, 0);
            let r = decode(DecoderKind::Auto, &y, &h, enc, amp)?;
            let ok = r.metric < 1e-18 && r.metric_evaluations == acc.evaluations;
            self.push(
                "decoder noiseless recovery",
                ok,
                format!(
                    "oracle needs {} candidates; fast decoder used {} evaluations (order M^{})",
                    acc.oracle_evaluations, r.metric_evaluations, acc.order_exponent
                ),
            );
        }
        Ok(())
    }
}

/// Random codeword through a random channel, with noise scaled by
/// `noise_scale`.
fn noisy_observation(
    enc: &Encoder,
    n_r: usize,
    amp: f64,
    noise_scale: f64,
    seed: u64,
    trial: u64,
) -> (ComplexMatrix, ComplexMatrix) {
    let design = enc.design();
    let mut rng = stream_rng(seed, trial);
    let h = sample_channel(design.n_t(), n_r, &mut rng);
    let side = enc.constellation().side();
    let info: Vec<usize> = (0..enc.len()).map(|_| rng.random_range(0..side)).collect();
    let x = codeword(design, &enc.encode_indices(&info)).expect("length");
    let noise = ComplexMatrix::from_fn(n_r, design.t(), |_, _| {
        complex_gaussian(&mut rng) * noise_scale
    });
    (&(&h * &x).scale(Complex64::new(amp, 0.0)) + &noise, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_angles() {
        assert_eq!(
            parse_snr_list("0:20:5").unwrap(),
            vec![0., 5., 10., 15., 20.]
        );
        assert_eq!(parse_snr_list("1,2.5").unwrap(), vec![1., 2.5]);
        assert_eq!(parse_snr_list("inf").unwrap(), vec![f64::INFINITY]);
        assert!(parse_snr_list("5:0:1").is_err());
        assert!((parse_angle("pi/4").unwrap() - PI / 4.0).abs() < 1e-15);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!(parse_angle("tau").is_err());
    }

    #[test]
    fn config_file_and_overrides() {
        let mut cfg = SimConfig::from_kv(
            "# sweep\na = 2\nlayers = 1\nsnr_db = 0:10:5\ntrials = 20\nseed = 4\ndecoder = group\n",
        )
        .unwrap();
        assert_eq!(
            cfg.design,
            DesignSource::Builtin {
                a: 2,
                layers: 1,
                layer_angle: 0.0
            }
        );
        assert_eq!(cfg.snr_db.len(), 3);
        cfg.set("trials", "30").unwrap();
        assert_eq!(cfg.trials, 30);
        assert!(SimConfig::from_kv("trials = 0").is_err());
        assert!(matches!(
            SimConfig::from_kv("bogus = 1"),
            Err(StbcError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn sweep_is_deterministic_and_noiseless_is_error_free() {
        let cfg = SimConfig {
            snr_db: vec![0.0, f64::INFINITY],
            trials: 200,
            seed: 3,
            ..SimConfig::default()
        };
        let a = run_error_sweep(&cfg).unwrap();
        let b = run_error_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a[0].ser > 0.0 && a[0].ser < 1.0);
        assert_eq!(a[1].codeword_errors, 0);
        assert!(a[0].symbol_errors <= 4 * a[0].codeword_errors);
        assert!(a[0].cer >= a[0].ser);
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn empty_csv_has_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db,trials,cer,ser,mean_evals,wall_time_s,codeword_errors,symbol_errors\n"
        );
    }

    #[test]
    fn intractable_configurations_are_refused() {
        let cfg = SimConfig {
            design: DesignSource::Builtin {
                a: 3,
                layers: 3,
                layer_angle: 0.0,
            },
            ..SimConfig::default()
        };
        assert!(matches!(
            run_error_sweep(&cfg),
            Err(StbcError::Intractable { .. })
        ));
    }

    #[test]
    fn verify_all_small_cases() {
        for (a, l) in [(1, 2), (2, 1), (2, 2)] {
            let r = verify_all(a, l).unwrap();
            assert!(r.passed(), "a={a} layers={l}\n{}", r.to_text());
        }
    }
}
