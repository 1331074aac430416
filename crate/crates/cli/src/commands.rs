use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use misinfo_core::abm::{
    compare_steady_state, ensemble_average, run_ensemble, AbmRun, InitialDuped,
};
use misinfo_core::bias::{
    accuracy, aggregate, bootstrap_credibility_with, mcc, partition_homophily, read_records,
    ConfusionMatrix, CredibilityResult, Filter, Metric,
};
use misinfo_core::ensemble::{build_ensemble, degree_marginal, mean_excess_degree, sample_network};
use misinfo_core::experiments::{reproduce_fig4, run_sweep, Fig4Config, SweepSpec};
use misinfo_core::meanfield::{find_invasion_threshold, integrate, seed_initial};
use misinfo_core::ExplicitNetwork;

use crate::config::{validate_config, AbmConfig, EnsembleConfig, MeanfieldConfig};
use crate::manifest::{ensure_dir, write_json, Run};
use crate::{parse_attribute, CompareArgs, Failure, PartitionArgs, RunArgs};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

pub fn ensemble(args: &RunArgs) -> Result<(), Failure> {
    let run = Run::start("ensemble");
    let mut cfg: EnsembleConfig = validate_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    ensure_dir(&args.out)?;
    let dist = build_ensemble(&cfg.network)?;
    let mut outputs = Vec::new();

    let path = args.out.join("ensemble.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["class", "a", "b", "p"]).map_err(csv_err(&path))?;
    for (c, p) in dist.iter() {
        w.write_record([c.class.label().to_string(), c.a.to_string(), c.b.to_string(), p.to_string()])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    outputs.push("ensemble.csv".to_string());

    let path = args.out.join("degree_marginal.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["d", "p"]).map_err(csv_err(&path))?;
    for (d, p) in degree_marginal(&dist) {
        w.write_record([d.to_string(), p.to_string()]).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    outputs.push("degree_marginal.csv".to_string());

    #[derive(Serialize)]
    struct Summary {
        compartments: usize,
        mean_degree: f64,
        mean_neighbor_degree: f64,
    }
    let (mean, neighbor) = mean_excess_degree(&dist);
    write_json(
        &args.out.join("summary.json"),
        &Summary {
            compartments: dist.len(),
            mean_degree: mean,
            mean_neighbor_degree: neighbor,
        },
    )?;
    outputs.push("summary.json".to_string());

    let mut seed = None;
    if let Some(n) = cfg.n_nodes {
        let net = sample_network(&cfg.network, n, cfg.seed)?;
        net.write_csv(&args.out.join("edges.csv"), &args.out.join("classes.csv"))?;
        outputs.push("edges.csv".to_string());
        outputs.push("classes.csv".to_string());
        seed = Some(cfg.seed);
    }
    run.finish(&args.out, &cfg, seed, outputs)
}

pub fn meanfield(args: &RunArgs) -> Result<(), Failure> {
    let run = Run::start("meanfield");
    let cfg: MeanfieldConfig = validate_config(args.config.as_deref())?;
    ensure_dir(&args.out)?;
    let dist = build_ensemble(&cfg.network)?;
    let init = seed_initial(&dist, cfg.solver.seed_eps);
    let traj = integrate(&dist, &cfg.strain, &init, &cfg.solver)?;
    let mut outputs = vec!["trajectory.csv".to_string(), "summary.json".to_string()];
    traj.write_csv(&dist, &args.out.join("trajectory.csv"))?;
    write_json(&args.out.join("summary.json"), &traj.summary(&dist, &cfg.strain))?;
    if let Some([lo, hi]) = cfg.bracket {
        let gamma_c = find_invasion_threshold(&dist, &cfg.strain, &cfg.solver, (lo, hi))?;
        #[derive(Serialize)]
        struct Threshold {
            gamma_c: f64,
            lambda_1: f64,
            lambda_2: f64,
        }
        write_json(
            &args.out.join("threshold.json"),
            &Threshold {
                gamma_c,
                lambda_1: cfg.strain.lambda_1,
                lambda_2: cfg.strain.lambda_2,
            },
        )?;
        outputs.push("threshold.json".to_string());
    }
    run.finish(&args.out, &cfg, None, outputs)
}

pub fn abm(args: &RunArgs) -> Result<(), Failure> {
    let run = Run::start("abm");
    let mut cfg: AbmConfig = validate_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.abm.seed = seed;
    }
    ensure_dir(&args.out)?;
    let network = match (&cfg.edges, &cfg.classes) {
        (Some(e), Some(c)) => ExplicitNetwork::read_csv(e, c, cfg.abm.seed)?,
        _ => sample_network(&cfg.network, cfg.abm.n_nodes, cfg.abm.seed)?,
    };
    let template = AbmRun {
        network: &network,
        strain: cfg.strain,
        initial_duped: InitialDuped::Fraction(cfg.abm.initial_fraction),
        seed: 0,
        t_max: cfg.abm.t_max,
        sample_interval: cfg.abm.sample_interval,
    };
    let runs = run_ensemble(&template, cfg.abm.seed, cfg.replicates)?;
    let mut outputs = vec!["trajectory.csv".to_string(), "summary.json".to_string()];
    runs[0].write_csv(&args.out.join("trajectory.csv"))?;
    let summaries: Vec<_> = runs.iter().map(|r| r.summary()).collect();
    write_json(&args.out.join("summary.json"), &summaries)?;

    if runs.len() >= 2 {
        let avg = ensemble_average(&runs)?;
        avg.write_totals_csv(&args.out.join("average.csv"))?;
        outputs.push("average.csv".to_string());
        if cfg.edges.is_none() {
            let dist = build_ensemble(&cfg.network)?;
            let mf_solver = misinfo_core::SolverConfig {
                sample_interval: cfg.abm.sample_interval,
                ..cfg.solver
            };
            let init = seed_initial(&dist, cfg.abm.initial_fraction.clamp(1e-12, 1.0 - 1e-12));
            let traj = integrate(&dist, &cfg.strain, &init, &mf_solver)?;
            let cmp = compare_steady_state(&avg, &traj, cfg.abm.window_from, cfg.tolerance)?;
            write_json(&args.out.join("comparison.json"), &cmp)?;
            outputs.push("comparison.json".to_string());
        }
    }
    run.finish(&args.out, &cfg, Some(cfg.abm.seed), outputs)
}

pub fn sweep(args: &RunArgs) -> Result<(), Failure> {
    let run = Run::start("sweep");
    let mut spec: SweepSpec = validate_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        spec.abm.seed = seed;
    }
    ensure_dir(&args.out)?;
    let result = run_sweep(&spec)?;
    result.write_csv(&args.out.join("sweep.csv"))?;
    write_json(&args.out.join("sweep.json"), &result)?;
    let seed = (spec.replicates > 0).then_some(spec.abm.seed);
    run.finish(&args.out, &spec, seed, vec!["sweep.csv".into(), "sweep.json".into()])
}

pub fn fig4(args: &RunArgs) -> Result<(), Failure> {
    let run = Run::start("fig4");
    let cfg: Fig4Config = validate_config(args.config.as_deref())?;
    let manifest = reproduce_fig4(&cfg, &args.out)?;
    let mut outputs = manifest.files.clone();
    outputs.push(misinfo_core::experiments::FIG4_MANIFEST.to_string());
    run.finish(&args.out, &cfg, None, outputs)
}

#[derive(Debug, Serialize)]
struct GroupReport {
    source: String,
    filter: Option<String>,
    matrix: ConfusionMatrix,
    mcc: f64,
    accuracy: f64,
}

impl GroupReport {
    fn new(source: &Path, filter: Option<&str>, matrix: ConfusionMatrix) -> Self {
        GroupReport {
            source: source.display().to_string(),
            filter: filter.map(str::to_string),
            matrix,
            mcc: mcc(&matrix),
            accuracy: accuracy(&matrix),
        }
    }
}

#[derive(Debug, Serialize)]
struct CompareReport {
    a: GroupReport,
    b: GroupReport,
    result: CredibilityResult,
}

fn parse_filter(s: Option<&str>) -> Result<Filter, Failure> {
    match s {
        Some(s) => s.parse().map_err(|e: misinfo_core::Error| Failure::Config(vec![e.to_string()])),
        None => Ok(Filter::default()),
    }
}

/// A matrix CSV is recognised by its `tp,fn,fp,tn` header; anything else is
/// read as response records and aggregated through the filter.
fn load_group(path: &Path, filter: Option<&str>) -> Result<ConfusionMatrix, Failure> {
    let file = std::fs::File::open(path).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))?;
    let mut header = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let is_matrix = header.trim().replace(' ', "") == "tp,fn,fp,tn";
    if is_matrix {
        if filter.is_some() {
            return Err(Failure::Config(vec![format!(
                "{}: filters apply only to record files",
                path.display()
            )]));
        }
        return Ok(ConfusionMatrix::read_csv(path)?);
    }
    let f = parse_filter(filter)?;
    let records = read_records(path)?;
    aggregate(&records, |r| f.accepts(r), |_| true)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

pub fn compare(args: &CompareArgs) -> Result<(), Failure> {
    let run = Run::start("stats compare");
    if args.samples == 0 {
        return Err(Failure::Config(vec!["samples = 0: samples must be positive".into()]));
    }
    let a = load_group(&args.a, args.a_filter.as_deref())?;
    let b = load_group(&args.b, args.b_filter.as_deref())?;
    ensure_dir(&args.out)?;
    let metric: Metric = args.metric.into();
    let result = bootstrap_credibility_with(&a, &b, args.samples, args.seed, metric)?;
    let report = CompareReport {
        a: GroupReport::new(&args.a, args.a_filter.as_deref(), a),
        b: GroupReport::new(&args.b, args.b_filter.as_deref(), b),
        result,
    };
    println!(
        "credibility {:.4} (P(A > B) {:.4}), significant: {}",
        report.result.credibility, report.result.p_a_exceeds_b, report.result.significant
    );
    write_json(&args.out.join("compare.json"), &report)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        a: &'a Path,
        b: &'a Path,
        a_filter: Option<&'a str>,
        b_filter: Option<&'a str>,
        samples: usize,
        metric: Metric,
    }
    let resolved = Resolved {
        a: &args.a,
        b: &args.b,
        a_filter: args.a_filter.as_deref(),
        b_filter: args.b_filter.as_deref(),
        samples: args.samples,
        metric,
    };
    run.finish(&args.out, &resolved, Some(args.seed), vec!["compare.json".into()])
}

pub fn partition(args: &PartitionArgs) -> Result<(), Failure> {
    let run = Run::start("stats partition");
    if args.samples == 0 {
        return Err(Failure::Config(vec!["samples = 0: samples must be positive".into()]));
    }
    let attribute = parse_attribute(&args.attribute)?;
    let filter = parse_filter(args.filter.as_deref())?;
    let records: Vec<_> = read_records(&args.records)?
        .into_iter()
        .filter(|r| filter.accepts(r))
        .collect();
    ensure_dir(&args.out)?;
    let part = partition_homophily(&records, attribute);
    let metric: Metric = args.metric.into();
    let comparison = if part.homophilic.total() > 0 && part.heterophilic.total() > 0 {
        Some(bootstrap_credibility_with(
            &part.homophilic,
            &part.heterophilic,
            args.samples,
            args.seed,
            metric,
        )?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct PartitionReport {
        attribute: misinfo_core::bias::Attribute,
        filter: Option<String>,
        excluded: usize,
        homophilic: GroupReport,
        heterophilic: GroupReport,
        comparison: Option<CredibilityResult>,
    }
    let report = PartitionReport {
        attribute,
        filter: args.filter.clone(),
        excluded: part.excluded,
        homophilic: GroupReport::new(&args.records, Some("homophilic"), part.homophilic),
        heterophilic: GroupReport::new(&args.records, Some("heterophilic"), part.heterophilic),
        comparison,
    };
    write_json(&args.out.join("partition.json"), &report)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        records: &'a Path,
        attribute: misinfo_core::bias::Attribute,
        filter: Option<&'a str>,
        samples: usize,
        metric: Metric,
    }
    let resolved = Resolved {
        records: &args.records,
        attribute,
        filter: args.filter.as_deref(),
        samples: args.samples,
        metric,
    };
    run.finish(&args.out, &resolved, Some(args.seed), vec!["partition.json".into()])
}
