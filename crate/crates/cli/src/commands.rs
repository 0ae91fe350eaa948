use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use dmfa::arch::{ArchSpec, Architecture};
use dmfa::data::{
    generate_scenario, load_csv, read_labels, read_trajectories, save_csv, standardize_rows,
    trajectories_to_dataset, write_labels, LabelColumn, LoadOptions, ScenarioSpec,
};
use dmfa::dataset::Dataset;
use dmfa::metrics::{adjusted_mutual_information, adjusted_rand_index, misclassification_rate};
use dmfa::model::assign_clusters;
use dmfa::optim::{fit, fit_from, write_trace_csv, Checkpoint, FitConfig, FitResult};
use dmfa::selection::{
    enumerate_architectures, overfitted_components, prune_components, score_candidates,
    select_model, write_selection_csv, KProposals,
};
use dmfa::variational::{PriorHyperparams, PriorSettings};
use serde::Serialize;
use serde_json::json;

use crate::args::*;

/// Seed offset of a second fit inside one command (the final fit after
/// selection, the refit after pruning). Candidate scoring uses offsets
/// `0..candidates`.
pub const REFIT_SEED_OFFSET: u64 = 1 << 32;

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Fit(a) => fit_command(a, argv),
        Command::Select(a) => select(a, cli.jobs, argv),
        Command::Cluster(a) => cluster(a, argv),
        Command::Evaluate(a) => evaluate(a, argv),
        Command::PruneRefit(a) => prune_refit(a, argv),
        Command::Preprocess(PreprocessCommand::Standardize(a)) => standardize(a, argv),
        Command::Preprocess(PreprocessCommand::Trajectories(a)) => trajectories(a, argv),
    }
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> dmfa::Result<()>,
    ) -> Result<()> {
        let path = self.path(name);
        let mut f = BufWriter::new(
            File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        body(&mut f).with_context(|| format!("writing {}", path.display()))?;
        f.flush()
            .with_context(|| format!("writing {}", path.display()))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |f| {
            serde_json::to_writer_pretty(&mut *f, value)?;
            Ok(f.write_all(b"\n")?)
        })
    }

    /// `<command>.config.json`: the arguments as typed, the parsed flags and
    /// the resolved settings that the run uses.
    fn echo(
        &self,
        command: &str,
        argv: &[String],
        args: &impl Serialize,
        resolved: serde_json::Value,
    ) -> Result<()> {
        self.write_json(
            &format!("{command}.config.json"),
            &json!({
                "command": command,
                "argv": argv,
                "version": env!("CARGO_PKG_VERSION"),
                "args": args,
                "resolved": resolved,
            }),
        )
    }

    fn save_fit(
        &self,
        prefix: &str,
        result: &FitResult,
        prior: &PriorHyperparams,
        config: &FitConfig,
        wall_clock: bool,
    ) -> Result<()> {
        let path = self.path(&format!("{prefix}checkpoint.json"));
        Checkpoint::new(result, prior, config)
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        self.write(&format!("{prefix}trace.csv"), |f| {
            write_trace_csv(f, &result.trace, wall_clock)
        })
    }
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let options = LoadOptions {
        header: !args.no_header,
        label_column: args
            .label_column
            .as_ref()
            .map(|c| match c.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(c.clone()),
            }),
    };
    load_csv(&args.data, &options).with_context(|| format!("reading {}", args.data.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_labels(BufReader::new(f)).with_context(|| format!("reading labels {}", path.display()))
}

fn report_fit(what: &str, arch: &Architecture, result: &FitResult) {
    eprintln!(
        "{what} {} : ELBO {:.6} after {} iterations{}",
        ArchSpec::from(arch),
        result.elbo.total,
        result.trace.iterations,
        if result.trace.converged {
            " (converged)"
        } else {
            ""
        }
    );
}

fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<()> {
    let mut spec = match (a.scenario, &a.spec) {
        (Some(ScenarioName::S1), _) => ScenarioSpec::s1(1000, 0),
        (Some(ScenarioName::S2), _) => ScenarioSpec::s2(1000, 0),
        (None, Some(path)) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            serde_json::from_reader(BufReader::new(f))
                .with_context(|| format!("reading scenario spec {}", path.display()))?
        }
        (None, None) => unreachable!("clap requires a scenario source"),
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let out = Outputs::create(&a.out)?;
    out.echo("simulate", argv, a, json!({ "scenario": spec }))?;
    let data = generate_scenario(&spec)?;
    let labels = data.labels.clone().unwrap_or_default();
    let features = Dataset::new(data.y, None)?;
    out.write("data.csv", |f| save_csv(f, &features))?;
    out.write("labels.csv", |f| write_labels(f, &labels))?;
    out.write_json("scenario.json", &spec)?;
    eprintln!(
        "wrote {} rows of dimension {} to {}",
        features.n(),
        features.dim(),
        out.path("data.csv").display()
    );
    Ok(())
}

fn fit_command(a: &FitArgs, argv: &[String]) -> Result<()> {
    let data = load(&a.data)?;
    let arch = a.arch.with_observed_dim(data.dim())?;
    let prior = a
        .prior
        .settings(PriorHyperparams::KNOWN_K_CONCENTRATION)
        .for_architecture(&arch)?;
    let config = a.optim.config(a.seed);
    let out = Outputs::create(&a.out)?;
    out.echo(
        "fit",
        argv,
        a,
        json!({ "architecture": arch, "prior": prior, "config": config }),
    )?;
    let result = fit(&data, &arch, &prior, &config)?;
    out.save_fit("", &result, &prior, &config, a.optim.wall_clock)?;
    report_fit("fitted", &arch, &result);
    Ok(())
}

fn select(a: &SelectArgs, jobs: Option<u64>, argv: &[String]) -> Result<()> {
    let data = load(&a.data)?;
    let (first, default_rho) = match &a.k {
        Some(k) => (k.clone(), PriorHyperparams::KNOWN_K_CONCENTRATION),
        None => (
            vec![overfitted_components(data.n())],
            PriorHyperparams::OVERFITTED_CONCENTRATION,
        ),
    };
    let proposals = KProposals::new(first, a.deeper_k.clone());
    let candidates = enumerate_architectures(data.dim(), &a.layers, &proposals)?;
    let settings = a.prior.settings(default_rho);
    let base = a.optim.config(a.seed);
    let out = Outputs::create(&a.out)?;
    out.echo(
        "select",
        argv,
        a,
        json!({
            "proposals": proposals,
            "candidates": candidates.iter().map(|c| ArchSpec::from(c).to_string()).collect::<Vec<_>>(),
            "prior": settings,
            "config": base,
            "refit_seed": a.seed.wrapping_add(REFIT_SEED_OFFSET),
        }),
    )?;
    let jobs = jobs.map_or_else(rayon::current_num_threads, |j| j as usize);
    eprintln!("scoring {} candidates on {jobs} threads", candidates.len());
    let scored = score_candidates(&data, &candidates, &settings, &base, a.seed, jobs)?;
    out.write("selection.csv", |f| {
        write_selection_csv(f, &scored, a.optim.wall_clock)
    })?;
    let failed = scored.iter().filter(|c| !c.is_scored()).count();
    let best = select_model(&scored)?;
    let spec = ArchSpec::from(&best.architecture);
    out.write("architecture.txt", |f| Ok(writeln!(f, "{spec}")?))?;
    eprintln!(
        "selected {spec} with score {:.6} ({} candidates, {failed} failed)",
        best.score,
        scored.len()
    );
    if a.no_refit {
        return Ok(());
    }
    let prior = settings.for_architecture(&best.architecture)?;
    let config = FitConfig {
        seed: a.seed.wrapping_add(REFIT_SEED_OFFSET),
        ..base
    };
    let result = fit(&data, &best.architecture, &prior, &config)?;
    out.save_fit("", &result, &prior, &config, a.optim.wall_clock)?;
    report_fit("refitted", &best.architecture, &result);
    Ok(())
}

fn cluster(a: &ClusterArgs, argv: &[String]) -> Result<()> {
    let checkpoint = load_checkpoint(&a.checkpoint)?;
    let data = load(&a.data)?;
    ensure!(
        data.dim() == checkpoint.architecture.observed_dim(),
        "data have {} columns but the checkpoint expects {}",
        data.dim(),
        checkpoint.architecture.observed_dim()
    );
    let out = Outputs::create(&a.out)?;
    out.echo(
        "cluster",
        argv,
        a,
        json!({ "architecture": checkpoint.architecture }),
    )?;
    let labels = assign_clusters(&data, &checkpoint.architecture, &checkpoint.params())?;
    out.write("labels.csv", |f| write_labels(f, &labels))?;
    if let Some(truth) = &data.labels {
        eprintln!(
            "ARI against the label column: {:.6}",
            adjusted_rand_index(&labels, truth)?
        );
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, argv: &[String]) -> Result<()> {
    let pred = load_labels(&a.pred)?;
    let truth = load_labels(&a.truth)?;
    let rows = [
        ("ari", adjusted_rand_index(&pred, &truth)?),
        ("ami", adjusted_mutual_information(&pred, &truth)?),
        ("mr", misclassification_rate(&pred, &truth)?),
    ];
    let table = |w: &mut dyn Write| -> dmfa::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["metric", "value"])?;
        for (name, value) in rows {
            w.write_record([name.to_string(), value.to_string()])?;
        }
        Ok(w.flush()?)
    };
    table(&mut std::io::stdout().lock())?;
    if let Some(dir) = &a.out {
        let out = Outputs::create(dir)?;
        out.echo("evaluate", argv, a, json!({ "rows": pred.len() }))?;
        out.write("metrics.csv", |f| table(f))?;
    }
    Ok(())
}

fn prune_refit(a: &PruneRefitArgs, argv: &[String]) -> Result<()> {
    let data = load(&a.data)?;
    let overfit_settings = a.prior.settings(PriorHyperparams::OVERFITTED_CONCENTRATION);
    let refit_settings = PriorSettings {
        concentration: a.refit_rho,
        ..overfit_settings.clone()
    };
    let overfit_config = a.optim.config(a.seed);
    let refit_config = a.optim.config(a.seed.wrapping_add(REFIT_SEED_OFFSET));
    let start = match (&a.arch, &a.dims) {
        (Some(spec), _) => Some(spec.with_observed_dim(data.dim())?),
        (None, Some(dims)) => {
            let mut components = vec![1; dims.len()];
            if let Some(first) = components.first_mut() {
                *first = overfitted_components(data.n());
            }
            Some(
                ArchSpec {
                    components,
                    latent_dims: dims.clone(),
                }
                .with_observed_dim(data.dim())?,
            )
        }
        (None, None) => None,
    };
    let out = Outputs::create(&a.out)?;
    out.echo(
        "prune-refit",
        argv,
        a,
        json!({
            "overfitted_architecture": start,
            "overfit_prior": overfit_settings,
            "overfit_config": overfit_config,
            "refit_prior": refit_settings,
            "refit_config": refit_config,
        }),
    )?;

    let overfitted = match (&start, &a.checkpoint) {
        (Some(arch), _) => {
            let prior = overfit_settings.for_architecture(arch)?;
            let result = fit(&data, arch, &prior, &overfit_config)?;
            out.save_fit(
                "overfit-",
                &result,
                &prior,
                &overfit_config,
                a.optim.wall_clock,
            )?;
            report_fit("overfitted", arch, &result);
            result.global
        }
        (None, Some(path)) => {
            let checkpoint = load_checkpoint(path)?;
            ensure!(
                data.dim() == checkpoint.architecture.observed_dim(),
                "data have {} columns but the checkpoint expects {}",
                data.dim(),
                checkpoint.architecture.observed_dim()
            );
            checkpoint.global
        }
        (None, None) => unreachable!("clap requires a starting point"),
    };

    let (reports, pruned) = prune_components(&overfitted, a.threshold)?;
    out.write("prune.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["layer", "component", "weight", "kept"])?;
        for r in &reports {
            for (k, weight) in r.weights.iter().enumerate() {
                w.write_record([
                    (r.layer + 1).to_string(),
                    (k + 1).to_string(),
                    weight.to_string(),
                    r.surviving.contains(&k).to_string(),
                ])?;
            }
        }
        Ok(w.flush()?)
    })?;
    for r in &reports {
        eprintln!(
            "layer {}: kept {} of {} components{}",
            r.layer + 1,
            r.surviving.len(),
            r.weights.len(),
            if r.all_below_threshold {
                " (all weights were below the threshold; kept the largest)"
            } else {
                ""
            }
        );
    }

    let arch = pruned.architecture();
    let prior = refit_settings.for_architecture(&arch)?;
    let result = fit_from(&data, &prior, &refit_config, pruned)?;
    out.save_fit("", &result, &prior, &refit_config, a.optim.wall_clock)?;
    report_fit("refitted", &arch, &result);
    Ok(())
}

fn standardize(a: &StandardizeArgs, argv: &[String]) -> Result<()> {
    let data = load(&a.data)?;
    let out = Outputs::create(&a.out)?;
    out.echo(
        "standardize",
        argv,
        a,
        json!({ "variance": "sample, n - 1" }),
    )?;
    let scaled = standardize_rows(&data)?;
    out.write("data.csv", |f| save_csv(f, &scaled))
}

fn trajectories(a: &TrajectoryArgs, argv: &[String]) -> Result<()> {
    let f = File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?;
    let trajs = read_trajectories(BufReader::new(f))
        .with_context(|| format!("reading trajectories {}", a.input.display()))?;
    let out = Outputs::create(&a.out)?;
    out.echo(
        "trajectories",
        argv,
        a,
        json!({ "trajectories": trajs.len() }),
    )?;
    let center = a.center.map(|(x, y)| [x, y]);
    let data = trajectories_to_dataset(&trajs, a.points, center)?;
    out.write("data.csv", |f| save_csv(f, &data))
}
