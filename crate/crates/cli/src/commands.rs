use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use certrand::boolfn::{random_function, wht as transform, BooleanFunction, HeavinessClass};
use certrand::device::DeviceModel;
use certrand::entropy::{perturb_make_light, stability_experiment};
use certrand::fouriersample::{estimate_pg_pb, gaussian_reference, lattice_reference, tv_distance};
use certrand::llqsv::{llqsv_instance, ListCase};
use certrand::protocol::{argmax_claim, run_protocol, verify_score, ProtocolConfig};
use certrand::rejection::{rhog_score, RhogMode};
use certrand::sqforrelation::{mean_phi_experiment, DistParams, PhiEstimator};
use certrand::stats::{trial_reduce, MeanAccumulator};
use certrand::{Error, Result, StreamRng};

use crate::report::{Check, Report, Table};
use crate::{parse_count, Cli};

fn class_name(class: HeavinessClass) -> &'static str {
    match class {
        HeavinessClass::Light => "light",
        HeavinessClass::SlightlyHeavy => "slightly_heavy",
        HeavinessClass::VeryHeavy => "very_heavy",
    }
}

#[derive(Args, Debug)]
pub struct WhtArgs {
    #[arg(long, default_value_t = 4)]
    n: u32,
    /// Read the function from a BFN1 file instead of drawing one.
    #[arg(long)]
    input: Option<PathBuf>,
}

pub fn wht(args: &WhtArgs, cli: &Cli) -> Result<Report> {
    let f = match &args.input {
        Some(path) => BooleanFunction::read_from(&mut BufReader::new(File::open(path)?))?,
        None => random_function(args.n, &mut StreamRng::new(cli.seed(), 0))?,
    };
    let spec = transform(&f);
    let mut table = Table::new(&["z", "scaled", "coeff", "prob", "class"]);
    for z in 0..spec.len() {
        table.push([
            z.to_string(),
            spec.scaled(z).to_string(),
            spec.coeff(z).to_string(),
            spec.prob(z).to_string(),
            class_name(spec.class_of(z)).to_string(),
        ]);
    }
    let energy = spec.scaled_energy() as f64 / (spec.len() as f64).powi(2);
    Ok(Report {
        command: "wht",
        seed: args.input.is_none().then_some(cli.seed()),
        config: json!({ "n": f.n(), "input": args.input }),
        result: json!({
            "n": f.n(),
            "function": hex::encode(f.to_bytes()),
            "scaled": spec.scaled_coeffs(),
            "argmax": spec.argmax(),
            "max_prob": spec.max_prob(),
            "parseval": energy,
        }),
        table,
        checks: vec![Check::near("parseval", energy, 1.0, cli.tol_or(0.0))],
    })
}

#[derive(Args, Debug)]
pub struct PgpbArgs {
    #[arg(long, default_value_t = 12)]
    n: u32,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    trials: u64,
    #[arg(long, default_value = "honest")]
    device: DeviceModel,
}

pub fn pgpb(args: &PgpbArgs, cli: &Cli) -> Result<Report> {
    pgpb_report(args.n, args.trials, args.device, cli.seed(), cli.tol_or(0.01))
}

fn pgpb_report(n: u32, trials: u64, device: DeviceModel, seed: u64, tol: f64) -> Result<Report> {
    let est = estimate_pg_pb(n, &device, trials, seed)?;
    let gauss = gaussian_reference();
    let lattice = lattice_reference(n);
    let mut table = Table::new(&["quantity", "estimate", "ci_lower", "ci_upper", "gaussian", "lattice"]);
    for (name, ci, g, l) in [
        ("p_b", est.ci_p_b, gauss.p_b, lattice.p_b),
        ("p_light4", est.ci_p_light4, gauss.p_light4, lattice.p_light4),
        ("p_g", est.ci_p_g, gauss.p_g, lattice.p_g),
    ] {
        table.push([
            name.to_string(),
            ci.p.to_string(),
            ci.lower.to_string(),
            ci.upper.to_string(),
            g.to_string(),
            l.to_string(),
        ]);
    }
    let checks = vec![
        Check::near("p_b", est.p_b, gauss.p_b, tol),
        Check::near("p_light4", est.p_light4, gauss.p_light4, tol),
        Check::near("p_g", est.p_g, gauss.p_g, 1.5 * tol),
    ];
    Ok(Report {
        command: "pgpb",
        seed: Some(seed),
        config: json!({ "n": n, "trials": trials, "device": device.to_string() }),
        result: json!({ "estimate": est, "gaussian_reference": gauss, "lattice_reference": lattice }),
        table,
        checks,
    })
}

#[derive(Args, Debug)]
pub struct HogArgs {
    #[arg(long, default_value_t = 8)]
    n: u32,
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    trials: u64,
    #[arg(long, default_value = "honest")]
    device: DeviceModel,
    /// Score threshold on `N · mean f̂(s)²`.
    #[arg(long, default_value_t = 1.5)]
    b: f64,
}

pub fn hog(args: &HogArgs, cli: &Cli) -> Result<Report> {
    random_function(args.n, &mut StreamRng::new(0, 0))?;
    if args.trials == 0 {
        return Err(Error::EmptySamples);
    }
    let device = args.device;
    let n = args.n;
    let acc: MeanAccumulator = trial_reduce(cli.seed(), args.trials, |acc: &mut MeanAccumulator, rng, _| {
        let spec = transform(&random_function(n, rng).expect("validated n"));
        let s = device.sample_spectrum(&spec, rng);
        acc.push(spec.prob(s));
    });
    let domain = (1u64 << n) as f64;
    let score = acc.estimate().scaled(domain);
    let mut table = Table::new(&["n_times_mean", "ci99", "b"]);
    table.push([score.mean.to_string(), score.ci99.to_string(), args.b.to_string()]);
    Ok(Report {
        command: "hog",
        seed: Some(cli.seed()),
        config: json!({ "n": n, "trials": args.trials, "device": device.to_string(), "b": args.b }),
        result: json!({
            "n_times_mean": score.mean,
            "ci99": score.ci99,
            "honest_oracle": 3.0 - 2.0 / domain,
        }),
        table,
        checks: vec![Check::at_least("hog_score", score.mean, args.b, cli.tol_or(0.0))],
    })
}

#[derive(Args, Debug)]
pub struct SqforrArgs {
    #[arg(long, default_value_t = 8)]
    n: u32,
    #[arg(long, default_value_t = certrand::sqforrelation::DEFAULT_C)]
    c: f64,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    trials: u64,
    /// plain, conditional, or uniform (control pairs).
    #[arg(long, default_value = "conditional")]
    estimator: PhiEstimator,
}

pub fn sqforr(args: &SqforrArgs, cli: &Cli) -> Result<Report> {
    let params = DistParams::new(args.n, args.c)?;
    let est = mean_phi_experiment(&params, args.trials, args.estimator, cli.seed())?;
    let eps = params.epsilon();
    let lower_bound = match args.estimator {
        PhiEstimator::Uniform => 0.0,
        _ => eps * eps,
    };
    let check = match args.estimator {
        PhiEstimator::Uniform => Check::near("mean_phi", est.mean, 0.0, cli.tol.unwrap_or(est.ci99)),
        _ => Check::at_least("mean_phi", est.mean, lower_bound, cli.tol_or(0.0)),
    };
    let mut table = Table::new(&["epsilon", "mean_phi", "ci99", "target_lower_bound", "gprime_prediction"]);
    table.push([
        eps.to_string(),
        est.mean.to_string(),
        est.ci99.to_string(),
        lower_bound.to_string(),
        params.gprime_prediction().to_string(),
    ]);
    Ok(Report {
        command: "sqforr",
        seed: Some(cli.seed()),
        config: json!({
            "n": args.n,
            "c": args.c,
            "trials": args.trials,
            "estimator": args.estimator,
            "below_theorem_c": args.c < certrand::sqforrelation::DEFAULT_C,
        }),
        result: json!({
            "epsilon": eps,
            "mean_phi": est.mean,
            "ci99": est.ci99,
            "target_lower_bound": lower_bound,
            "gprime_prediction": params.gprime_prediction(),
        }),
        table,
        checks: vec![check],
    })
}

#[derive(Args, Debug)]
pub struct RhogArgs {
    #[arg(long, default_value_t = 8)]
    n: u32,
    #[arg(long, default_value_t = certrand::sqforrelation::DEFAULT_C)]
    c: f64,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    trials: u64,
    /// honest, uniform-pairs, or cheater.
    #[arg(long, default_value = "honest")]
    mode: RhogMode,
}

pub fn rhog(args: &RhogArgs, cli: &Cli) -> Result<Report> {
    let params = DistParams::new(args.n, args.c)?;
    let report = rhog_score(&params, args.trials, args.mode, cli.seed())?;
    let check = match args.mode {
        RhogMode::Honest => Check::at_least("n_times_mean", report.score.mean, report.target, cli.tol_or(0.0)),
        _ => Check::near(
            "n_times_mean",
            report.score.mean,
            1.0,
            cli.tol.unwrap_or(report.score.ci99),
        ),
    };
    let mut table = Table::new(&["n_times_mean", "ci99", "epsilon", "target"]);
    table.push([
        report.score.mean.to_string(),
        report.score.ci99.to_string(),
        report.epsilon.to_string(),
        report.target.to_string(),
    ]);
    Ok(Report {
        command: "rhog",
        seed: Some(cli.seed()),
        config: json!({ "n": args.n, "c": args.c, "trials": args.trials, "mode": args.mode }),
        result: json!({
            "n_times_mean": report.score.mean,
            "ci99": report.score.ci99,
            "epsilon": report.epsilon,
            "target": report.target,
        }),
        table,
        checks: vec![check],
    })
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[arg(long, default_value_t = 12)]
    n: u32,
    /// Coefficient to lighten; by default the first slightly heavy one of the first
    /// function that has one.
    #[arg(long)]
    z: Option<usize>,
}

pub fn perturb(args: &PerturbArgs, cli: &Cli) -> Result<Report> {
    let mut rng = StreamRng::new(cli.seed(), 0);
    let (f, z) = loop {
        let f = random_function(args.n, &mut rng)?;
        let spec = transform(&f);
        match args.z {
            Some(z) if z < f.len() => break (f, z),
            Some(z) => return Err(Error::InvalidParameter(format!("z = {z} out of range"))),
            None => {
                if let Some(z) = (0..f.len()).find(|&z| spec.class_of(z) == HeavinessClass::SlightlyHeavy) {
                    break (f, z);
                }
            }
        }
    };
    let g = perturb_make_light(&f, z, &mut rng)?;
    let (before, after) = (transform(&f), transform(&g));
    let root = 1i32 << (args.n / 2);
    let k = before.scaled(z);
    let expected = k - k.signum() * root;
    let tv = tv_distance(&before, &after)?;
    let bound = 2.0 * (f.len() as f64).powf(-0.125);
    let mut table = Table::new(&["z", "scaled_before", "scaled_after", "class_before", "class_after"]);
    for w in 0..f.len() {
        table.push([
            w.to_string(),
            before.scaled(w).to_string(),
            after.scaled(w).to_string(),
            class_name(before.class_of(w)).to_string(),
            class_name(after.class_of(w)).to_string(),
        ]);
    }
    Ok(Report {
        command: "perturb",
        seed: Some(cli.seed()),
        config: json!({ "n": args.n, "z": args.z }),
        result: json!({
            "z": z,
            "f": hex::encode(f.to_bytes()),
            "f_prime": hex::encode(g.to_bytes()),
            "coeff_before": before.coeff(z),
            "coeff_after": after.coeff(z),
            "class_before": class_name(before.class_of(z)),
            "class_after": class_name(after.class_of(z)),
            "tv_distance": tv,
            "tv_bound": bound,
        }),
        table,
        checks: vec![
            Check::near("scaled_identity", after.scaled(z) as f64, expected as f64, 0.0),
            Check::at_most("tv_distance", tv, bound, cli.tol_or(0.0)),
        ],
    })
}

#[derive(Args, Debug)]
pub struct DerandomizeArgs {
    /// honest, uniform, argmax, or biased:<p>.
    #[arg(long, default_value = "biased:0.98")]
    device: DeviceModel,
    #[arg(long, default_value_t = 4)]
    n: u32,
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    budget: u64,
    #[arg(long, default_value = "100", value_parser = parse_count)]
    seeds: u64,
    #[arg(long, default_value = "20", value_parser = parse_count)]
    reruns: u64,
    /// Majority frequency that counts as near-deterministic.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

pub fn derandomize(args: &DerandomizeArgs, cli: &Cli) -> Result<Report> {
    if args.reruns == 0 || args.seeds == 0 {
        return Err(Error::InvalidParameter("seeds and reruns must be positive".into()));
    }
    let report = stability_experiment(
        &args.device,
        args.n,
        args.seeds,
        args.reruns,
        args.budget,
        args.level,
        cli.seed(),
    )?;
    let mut table = Table::new(&["constant_fraction", "majority_fraction", "mean_min_entropy"]);
    table.push([
        report.constant_fraction.to_string(),
        report.majority_fraction.to_string(),
        report.mean_min_entropy.to_string(),
    ]);
    Ok(Report {
        command: "derandomize",
        seed: Some(cli.seed()),
        config: json!({
            "device": args.device.to_string(),
            "n": args.n,
            "budget": args.budget,
            "seeds": args.seeds,
            "reruns": args.reruns,
            "level": args.level,
        }),
        result: serde_json::to_value(&report).map_err(|e| Error::Format(e.to_string()))?,
        table,
        checks: vec![Check::at_least(
            "constant_fraction",
            report.constant_fraction,
            0.9,
            cli.tol_or(0.0),
        )],
    })
}

#[derive(Args, Debug)]
pub struct LlqsvArgs {
    #[arg(long, default_value_t = 8)]
    n: u32,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    t: u64,
    /// uniform or fourier.
    #[arg(long = "case", default_value = "fourier")]
    case: ListCase,
}

pub fn llqsv(args: &LlqsvArgs, cli: &Cli) -> Result<Report> {
    let list = llqsv_instance(args.n, args.t, args.case, cli.seed())?;
    if let Some(path) = cli.out() {
        let mut w = BufWriter::new(File::create(path)?);
        list.write_to(&mut w)?;
        w.flush()?;
    }
    let domain = (1u64 << args.n) as f64;
    let oracle = match args.case {
        ListCase::Uniform => 1.0 / domain,
        ListCase::Fourier => (3.0 * domain * domain - 2.0 * domain) / domain.powi(3),
    };
    let (mean, ci) = match list.score_mean() {
        Ok(est) => (est.mean, est.ci99),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let mut table = Table::new(&["t", "mean_score", "ci99", "oracle"]);
    table.push([args.t.to_string(), mean.to_string(), ci.to_string(), oracle.to_string()]);
    let checks = if args.t > 0 {
        vec![Check::near("mean_score", mean, oracle, cli.tol.unwrap_or(ci))]
    } else {
        Vec::new()
    };
    Ok(Report {
        command: "llqsv",
        seed: Some(cli.seed()),
        config: json!({ "n": args.n, "t": args.t, "case": args.case, "out": cli.out() }),
        result: json!({ "entries": list.len(), "mean_score": finite(mean), "ci99": finite(ci), "oracle": oracle }),
        table,
        checks,
    })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[derive(Args, Debug)]
pub struct ProtocolArgs {
    #[arg(long, default_value_t = 6)]
    n: u32,
    #[arg(long, default_value = "262144", value_parser = parse_count)]
    t: u64,
    #[arg(long, default_value_t = 1.5)]
    b: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// honest, uniform, argmax, or biased:<p>.
    #[arg(long, default_value = "honest")]
    device: DeviceModel,
    #[arg(long = "claimed-q", value_enum, default_value_t = ClaimedQ::None)]
    claimed_q: ClaimedQ,
    #[arg(long, default_value_t = 256)]
    extract_bits: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ClaimedQ {
    None,
    Argmax,
}

pub fn protocol(args: &ProtocolArgs, cli: &Cli) -> Result<Report> {
    let config = ProtocolConfig::new(args.n, args.t, args.b, args.eps, args.extract_bits, cli.seed())?;
    let claim = match args.claimed_q {
        ClaimedQ::None => None,
        ClaimedQ::Argmax => Some(&argmax_claim as certrand::protocol::ClaimedMap<'_>),
    };
    let transcript = run_protocol(&config, &args.device, claim)?;
    let mut table = Table::new(&["stream", "sample", "score"]);
    for r in &transcript.records {
        table.push([r.stream.to_string(), r.sample.to_string(), r.score.to_string()]);
    }
    let checks = vec![
        Check::near(
            "s_recomputed",
            transcript.recomputed_s(),
            transcript.s_total,
            cli.tol_or(1e-9),
        ),
        Check::at_least("score", transcript.s_total, config.score_threshold(), 0.0),
    ];
    let pass = verify_score(&transcript, &config);
    let mut result = serde_json::to_value(&transcript).map_err(|e| Error::Format(e.to_string()))?;
    result["score_threshold"] = json!(config.score_threshold());
    result["verify_score"] = json!(pass);
    Ok(Report {
        command: "protocol",
        seed: Some(cli.seed()),
        config: json!({
            "n": args.n,
            "t": args.t,
            "b": args.b,
            "eps": args.eps,
            "delta": config.delta(),
            "device": args.device.to_string(),
            "claimed_q": format!("{:?}", args.claimed_q).to_lowercase(),
            "extract_bits": args.extract_bits,
        }),
        result,
        table,
        checks,
    })
}

/// Scaled-down versions of every check, a few seconds in total.
pub fn check_all(cli: &Cli) -> Result<Report> {
    let seed = cli.seed();
    let mut checks = Vec::new();
    let mut prefixed = |prefix: &str, report: Report| {
        for mut c in report.checks {
            c.name = format!("{prefix}.{}", c.name);
            checks.push(c);
        }
    };

    let wht_report = wht(&WhtArgs { n: 10, input: None }, cli)?;
    prefixed("wht", wht_report);
    prefixed("pgpb", pgpb_report(12, 20_000, DeviceModel::Honest, seed, 0.02)?);

    let params = DistParams::new(8, 1.0)?;
    let phi = mean_phi_experiment(&params, 20_000, PhiEstimator::Conditional, seed)?;
    let eps2 = params.epsilon().powi(2);
    prefixed(
        "sqforr",
        Report {
            command: "sqforr",
            seed: Some(seed),
            config: Value::Null,
            result: Value::Null,
            table: Table::default(),
            checks: vec![
                Check::at_least("mean_phi", phi.lower(), eps2 / 2.0, 0.0),
                Check::near("gprime_ratio", phi.mean / params.gprime_prediction(), 1.0, 0.3),
            ],
        },
    );

    let rhog = rhog_score(&params, 20_000, RhogMode::UniformPairs, seed)?;
    let mut rhog_checks = vec![Check::near("uniform_pairs", rhog.score.mean, 1.0, rhog.score.ci99)];
    let honest = rhog_score(&params, 20_000, RhogMode::Honest, seed)?;
    rhog_checks.push(Check::at_least("honest", honest.score.mean, honest.target, 0.0));
    prefixed(
        "rhog",
        Report {
            command: "rhog",
            seed: Some(seed),
            config: Value::Null,
            result: Value::Null,
            table: Table::default(),
            checks: rhog_checks,
        },
    );

    prefixed("perturb", perturb(&PerturbArgs { n: 12, z: None }, cli)?);
    let stability = stability_experiment(&DeviceModel::Biased(0.98), 4, 20, 20, 10_000, 0.95, seed)?;
    checks.push(Check::at_least(
        "derandomize.constant_fraction",
        stability.constant_fraction,
        0.9,
        0.0,
    ));

    let list = llqsv_instance(2, 50_000, ListCase::Fourier, seed)?.score_mean()?;
    checks.push(Check::near("llqsv.fourier_n2", list.mean, 0.625, list.ci99));

    let config = ProtocolConfig::new(6, 1 << 14, 1.5, 0.5, 64, seed)?;
    let honest = run_protocol(&config, &DeviceModel::Honest, None)?;
    checks.push(Check::at_least(
        "protocol.honest_score",
        honest.s_total,
        config.score_threshold(),
        0.0,
    ));
    let cheat = run_protocol(&config, &DeviceModel::UniformCheat, None)?;
    checks.push(Check::at_most(
        "protocol.uniform_score",
        cheat.s_total,
        config.score_threshold(),
        0.0,
    ));

    let mut table = Table::new(&["check", "value", "target", "tolerance", "pass"]);
    for c in &checks {
        table.push([
            c.name.clone(),
            c.value.to_string(),
            c.target.to_string(),
            c.tolerance.to_string(),
            c.pass.to_string(),
        ]);
    }
    Ok(Report {
        command: "check-all",
        seed: Some(seed),
        config: json!({}),
        result: json!({ "passed": checks.iter().filter(|c| c.pass).count(), "total": checks.len() }),
        table,
        checks,
    })
}
