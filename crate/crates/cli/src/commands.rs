use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use log::info;
use serde::Serialize;

use sparsedag::conditions::{
    check_basic, check_beta_min, check_degree, check_dimension, check_omega_min, check_search,
    cond_edges_alpha, theorem_constants, ConditionReport,
};
use sparsedag::experiments::{
    config_hash, run_experiment, write_gnuplot, write_records_csv, Aggregates, ExperimentConfig,
};
use sparsedag::io::{
    read_covariance_file, read_dataset_file, write_matrix_csv, DagModelJson, EdgeProfileJson,
    FitResultJson,
};
use sparsedag::representation::default_zero_tol;
use sparsedag::scoring::default_max_parents;
use sparsedag::simulate::{ar1_model, random_sparse_dag, sample_covariance, sample_sem, SimConfig};
use sparsedag::{
    covariance_of, edge_profile, fit_exact, fit_greedy, gram_schmidt_representation, Error,
    GreedyOptions, LocalScoreTable, Method, Ordering, Result, ScoreMode,
};

use crate::manifest::{beside, file_name, to_pretty, Manifest};
use crate::{
    CheckArgs, ConstantsArgs, ConstantsFrom, ExperimentArgs, FitArgs, MethodArg, ModeArg,
    ModelKind, RepresentArgs, SimulateArgs,
};

const KNOWN_CONDITIONS: [&str; 6] = ["1", "2", "4", "5", "6", "7"];

/// Writes `value` to `out` with a manifest beside it, or prints it.
fn emit<T: Serialize>(value: &T, out: Option<&Path>, mut manifest: Manifest) -> Result<()> {
    let text = to_pretty(value)?;
    match out {
        Some(path) => {
            fs::write(path, text)?;
            manifest.outputs.push(file_name(path));
            manifest.write(&beside(path))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let model = match args.kind {
        ModelKind::Ar1 => ar1_model(args.p, args.beta0.expect("required by clap"))?,
        ModelKind::Random => {
            let mut config = SimConfig::new(args.p, args.s0.expect("required by clap"), args.seed);
            config.max_parents = args.max_parents;
            random_sparse_dag(&config)?
        }
    };
    let data = sample_sem(&model, args.n, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let header: Vec<String> = (1..=args.p).map(|j| format!("X{j}")).collect();

    fs::write(
        args.out.join("model.json"),
        to_pretty(&DagModelJson::from(&model))?,
    )?;
    write_matrix_csv(
        BufWriter::new(File::create(args.out.join("data.csv"))?),
        data.x(),
        Some(&header),
    )?;
    write_matrix_csv(
        BufWriter::new(File::create(args.out.join("sigma0.csv"))?),
        covariance_of(&model).matrix(),
        None,
    )?;
    fs::write(args.out.join("config.json"), to_pretty(args)?)?;

    let mut manifest = Manifest::new("simulate", Some(args.seed), args)?;
    manifest.outputs = ["model.json", "data.csv", "sigma0.csv", "config.json"]
        .map(String::from)
        .to_vec();
    manifest.write(&args.out.join("manifest.json"))?;
    info!(
        "wrote {} samples of a {}-node model to {}",
        args.n,
        args.p,
        args.out.display()
    );
    Ok(())
}

fn score_mode(m: ModeArg) -> ScoreMode {
    match m {
        ModeArg::Profile => ScoreMode::Profile,
        ModeArg::Equalvar => ScoreMode::EqualVariance,
    }
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let sigma = match (&args.data, &args.sigma) {
        (Some(path), _) => sample_covariance(&read_dataset_file(path)?.0, args.center)?,
        (None, Some(path)) => read_covariance_file(path, args.n)?,
        (None, None) => unreachable!("clap requires an input"),
    };
    let n = sigma.sample_size().expect("empirical input");
    let p = sigma.p();
    let max_parents = args
        .max_parents
        .unwrap_or_else(|| default_max_parents(n, p, args.alpha));
    let mode = score_mode(args.mode);
    info!(
        "fitting p = {p}, n = {n}, lambda2 = {}, max parents = {max_parents}",
        args.lambda2
    );

    let result = match args.method {
        MethodArg::Exact => {
            let table = LocalScoreTable::build(&sigma, args.lambda2, mode, max_parents)?;
            if let Some(path) = &args.dump_table {
                table.write_jsonl(BufWriter::new(File::create(path)?))?;
            }
            fit_exact(&table)?
        }
        MethodArg::Greedy => {
            if args.dump_table.is_some() {
                return Err(Error::InvalidInput(
                    "--dump-table needs --method exact".into(),
                ));
            }
            let opts = GreedyOptions {
                lambda2: args.lambda2,
                mode,
                max_parents,
                restarts: args.restarts,
                seed: args.seed,
            };
            fit_greedy(&sigma, &opts)?
        }
    };
    let seed = (result.method == Method::Greedy).then_some(args.seed);
    emit(
        &FitResultJson::from(&result),
        args.out.as_deref(),
        Manifest::new("fit", seed, args)?,
    )
}

#[derive(Serialize)]
struct Representation {
    pi: Vec<usize>,
    zero_tol: f64,
    model: DagModelJson,
    edge_profile: EdgeProfileJson,
}

pub fn represent(args: &RepresentArgs) -> Result<()> {
    let sigma = read_covariance_file(&args.sigma, None)?;
    let pi = Ordering::parse_one_based(&args.pi)?;
    let zero_tol = args.zero_tol.unwrap_or_else(|| default_zero_tol(&sigma));
    let model = gram_schmidt_representation(&sigma, &pi, zero_tol)?;
    let profile = edge_profile(&sigma, &pi, zero_tol)?;
    let out = Representation {
        pi: pi.to_one_based(),
        zero_tol,
        model: DagModelJson::from(&model),
        edge_profile: EdgeProfileJson::from(&profile),
    };
    emit(
        &out,
        args.out.as_deref(),
        Manifest::new("represent", None, args)?,
    )
}

pub fn check(args: &CheckArgs) -> Result<()> {
    if let Some(bad) = args
        .conditions
        .iter()
        .find(|c| !KNOWN_CONDITIONS.contains(&c.as_str()))
    {
        return Err(Error::InvalidInput(format!(
            "unknown condition {bad:?}; expected a subset of 1,2,4,5,6,7"
        )));
    }
    let wanted = |c: &str| args.conditions.iter().any(|w| w == c);
    let sigma = read_covariance_file(&args.sigma, (!args.population).then_some(args.n))?;
    let (sigma0_sq, lambda_min_sq) = match args.constants_from {
        ConstantsFrom::Sigma => (sigma.max_variance(), sigma.min_eigenvalue()),
        ConstantsFrom::Given => (
            args.sigma0_sq.expect("required by clap"),
            args.lambda_min_sq.expect("required by clap"),
        ),
    };
    let search = check_search(sigma.p());

    let mut report = check_basic(&sigma, sigma0_sq);
    if wanted("4") {
        let alpha_tilde = match args.alpha_tilde {
            Some(a) => a,
            None => cond_edges_alpha(sigma0_sq, lambda_min_sq, args.eta0, args.eta1)?,
        };
        report = report.merge(check_degree(&sigma, args.n, alpha_tilde, search)?);
    }
    if wanted("5") {
        let s0 = args
            .s0
            .ok_or_else(|| Error::InvalidInput("condition 5 needs --s0".into()))?;
        report = report.merge(check_beta_min(
            &sigma, args.n, s0, args.eta0, args.eta1, search,
        )?);
    }
    if wanted("6") {
        report = report.merge(check_omega_min(
            &sigma,
            args.eta_omega,
            args.n,
            args.alpha_star,
            search,
        )?);
    } else if wanted("7") {
        let mut dim = ConditionReport {
            certifying: report.certifying,
            ..Default::default()
        };
        dim.checks
            .push(check_dimension(sigma.p(), args.n, args.alpha_star));
        report = report.merge(dim);
    }
    report.checks.retain(|c| wanted(&c.condition));
    emit(
        &report,
        args.out.as_deref(),
        Manifest::new("check", None, args)?,
    )
}

pub fn constants(args: &ConstantsArgs) -> Result<()> {
    let k = theorem_constants(
        args.sigma0,
        args.lambda_min,
        args.p,
        args.s0,
        args.n,
        args.t,
    )?;
    emit(
        &k,
        args.out.as_deref(),
        Manifest::new("constants", None, args)?,
    )
}

#[derive(Serialize)]
struct AggregateFile<'a> {
    config: &'a ExperimentConfig,
    config_hash: &'a str,
    rng: &'static str,
    aggregates: &'a Aggregates,
}

pub fn experiment(args: &ExperimentArgs) -> Result<()> {
    let config: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)?;
    let report = run_experiment(&config, args.threads)?;
    fs::create_dir_all(&args.out)?;

    write_records_csv(
        BufWriter::new(File::create(args.out.join("records.csv"))?),
        &report.records,
    )?;
    let aggregates = AggregateFile {
        config: &report.config,
        config_hash: &report.config_hash,
        rng: report.rng,
        aggregates: &report.aggregates,
    };
    fs::write(args.out.join("aggregates.json"), to_pretty(&aggregates)?)?;

    let mut manifest = Manifest::with_hash("experiment", Some(config.seed), config_hash(&config));
    manifest.outputs = vec!["records.csv".into(), "aggregates.json".into()];
    if args.gnuplot {
        write_gnuplot(
            File::create(args.out.join("error_vs_n.dat"))?,
            &report.aggregates,
        )?;
        manifest.outputs.push("error_vs_n.dat".into());
    }
    manifest.write(&args.out.join("manifest.json"))?;
    info!(
        "{} records written to {}",
        report.records.len(),
        args.out.display()
    );
    Ok(())
}
