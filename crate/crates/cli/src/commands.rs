use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use patchwood::analysis::{
    bias_variance, depth_experiment, harmonic_depth, mi_bias_check, mi_bias_expected, scaling_sweep, write_sweep_csv,
    BiasVarianceOptions, Friedman1, LinearGaussian, Problem, SweepAxis, SweepOptions,
};
use patchwood::dataset::{
    gen_friedman1, gen_led, gen_linear_gaussian, joint_from_dataset, load_csv, load_csv_with_schema, load_feature_rows,
    save_csv, CsvOptions, DiscreteJoint,
};
use patchwood::forest::{save_forest, FOREST_FORMAT};
use patchwood::importance::{
    mdi, permutation_importance, tree_mdi, AnalyticEngine, ImportanceMethod, ImportanceReport,
};
use patchwood::rng::{self, Purpose};
use patchwood::tree::TREE_FORMAT;
use patchwood::{Error, FeatureKind, Forest, Prediction, Schema, Task, Tree};
use serde_json::json;

use crate::args::*;
use crate::manifest::Run;
use crate::Usage;

type Result<T> = anyhow::Result<T>;

/// Writes `text` to `out`, or to stdout.
fn emit(text: &str, out: Option<&Path>, run: &mut Run) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(Error::from).with_context(|| format!("writing {}", path.display()))?;
            run.output(path);
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn gen_data(args: &GenDataArgs, seed: u64) -> Result<Run> {
    let mut run = Run::new("gen-data", seed, args)?;
    let ds = match args.kind {
        GeneratorKind::Led => {
            if args.features.is_some() {
                return Err(Usage("led has a fixed set of seven inputs".into()).into());
            }
            gen_led(args.n, seed)?
        }
        GeneratorKind::Friedman1 => gen_friedman1(args.n, args.features.unwrap_or(10), args.noise_sd, seed)?,
        GeneratorKind::LinearGaussian => gen_linear_gaussian(args.n, args.features.unwrap_or(0), seed)?,
    };
    save_csv(&ds, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    run.output(&args.out);
    Ok(run)
}

pub fn train(args: &TrainArgs, seed: u64) -> Result<Run> {
    let mut opts = CsvOptions::new(args.target.clone());
    opts.categorical = args.categorical.clone();
    opts.ordered = args.ordered.clone();
    opts.weight = args.weight.clone();
    opts.classification = match args.task {
        TaskArg::Auto => None,
        TaskArg::Classification => Some(true),
        TaskArg::Regression => Some(false),
    };
    let ds = load_csv(&args.data, &opts).with_context(|| format!("reading {}", args.data.display()))?;
    let cfg = args.forest.resolve(ds.task(), seed)?;
    let mut run = Run::new("train", seed, &json!({ "args": args, "forest": cfg }))?;
    run.input(&args.data);
    let forest = Forest::fit(&ds, &cfg)?;
    save_forest(&forest, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    run.output(&args.out);
    match forest.oob_error(&ds) {
        Ok(r) => println!("oob_error,{}\noob_excluded,{}", r.error, r.n_excluded),
        Err(Error::OobUndefined | Error::NoOobCoverage) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(run)
}

pub enum Model {
    Forest(Forest),
    Tree(Tree),
}

impl Model {
    pub fn load(path: &Path) -> Result<Model> {
        let context = || format!("reading model {}", path.display());
        let text = fs::read_to_string(path).map_err(Error::from).with_context(context)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from).with_context(context)?;
        let model = match value.get("format").and_then(|f| f.as_str()) {
            Some(FOREST_FORMAT) => Model::Forest(Forest::from_json(&text).with_context(context)?),
            Some(TREE_FORMAT) => Model::Tree(Tree::from_json(&text).with_context(context)?),
            other => return Err(Error::Format(format!("not a patchwood model (format {other:?})"))).with_context(context),
        };
        Ok(model)
    }

    fn task(&self) -> Task {
        match self {
            Model::Forest(f) => f.task,
            Model::Tree(t) => t.task,
        }
    }

    fn n_features(&self) -> usize {
        match self {
            Model::Forest(f) => f.n_features,
            Model::Tree(t) => t.n_features,
        }
    }

    /// Stored schema, or generic `x1..xp` names over ordered inputs.
    fn schema(&self) -> Schema {
        let stored = match self {
            Model::Forest(f) => f.schema.clone(),
            Model::Tree(t) => t.schema.clone(),
        };
        stored.unwrap_or_else(|| Schema::generic(&vec![FeatureKind::Ordered; self.n_features()], self.task()))
    }

    fn predict(&self, x: &[f64]) -> patchwood::Result<Prediction> {
        match self {
            Model::Forest(f) => f.predict(x),
            Model::Tree(t) => t.predict(x),
        }
    }
}

pub fn predict(args: &PredictArgs, seed: u64) -> Result<Run> {
    let mut run = Run::new("predict", seed, args)?;
    let model = Model::load(&args.model)?;
    run.input(&args.model);
    let schema = model.schema();
    let rows = load_feature_rows(&args.data, &schema).with_context(|| format!("reading {}", args.data.display()))?;
    run.input(&args.data);

    let labels: Option<Vec<String>> = match schema.class_labels() {
        Some(l) => Some(l.to_vec()),
        None => model.task().n_classes().map(|j| (0..j).map(|c| c.to_string()).collect()),
    };
    let mut text = String::from("prediction");
    for l in labels.iter().flatten() {
        write!(text, ",p_{l}")?;
    }
    text.push('\n');
    for x in &rows {
        match model.predict(x)? {
            Prediction::Class { class, probabilities } => {
                text.push_str(&labels.as_ref().expect("class labels")[class]);
                for p in probabilities {
                    write!(text, ",{p}")?;
                }
            }
            Prediction::Value(v) => write!(text, "{v}")?,
        }
        text.push('\n');
    }
    emit(&text, args.out.as_deref(), &mut run)?;
    Ok(run)
}

fn load_joint(args: &ImportanceArgs, run: &mut Run) -> Result<(DiscreteJoint, Vec<String>)> {
    let generic = |p: usize| (1..=p).map(|j| format!("x{j}")).collect::<Vec<_>>();
    match (&args.joint, &args.data) {
        (Some(_), Some(_)) => Err(Usage("give either --joint or --data, not both".into()).into()),
        (None, None) => Err(Usage(format!("{} needs --joint or --data", method_name(args.method))).into()),
        (Some(j), None) if j == "led" => {
            let ds = gen_led(10, 0)?;
            let names = ds.schema().features.iter().map(|f| f.name.clone()).collect();
            Ok((joint_from_dataset(&ds)?, names))
        }
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {path}"))?;
            let joint: DiscreteJoint = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidDataset(e.to_string()))
                .with_context(|| format!("reading joint {path}"))?;
            run.input(Path::new(path));
            let p = joint.n_vars();
            Ok((joint, generic(p)))
        }
        (None, Some(data)) => {
            let target = args
                .target
                .clone()
                .ok_or_else(|| Usage("--data for an analytic method needs --target".into()))?;
            let mut opts = CsvOptions::new(target);
            opts.classification = Some(true);
            let context = || format!("reading {}", data.display());
            let first = load_csv(data, &opts).with_context(context)?;
            opts.categorical = first.schema().features.iter().map(|f| f.name.clone()).collect();
            let ds = load_csv(data, &opts).with_context(context)?;
            run.input(data);
            let names = ds.schema().features.iter().map(|f| f.name.clone()).collect();
            Ok((joint_from_dataset(&ds)?, names))
        }
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Mdi => "mdi",
        MethodArg::Permutation => "permutation",
        MethodArg::AnalyticTrt => "analytic-trt",
        MethodArg::AnalyticPruned => "analytic-pruned",
        MethodArg::AnalyticSubspace => "analytic-subspace",
    }
}

fn check_importance_flags(args: &ImportanceArgs) -> Result<()> {
    let name = method_name(args.method);
    let model_based = matches!(args.method, MethodArg::Mdi | MethodArg::Permutation);
    if model_based && args.model.is_none() {
        bail!(Usage(format!("{name} needs --model")));
    }
    if !model_based && args.model.is_some() {
        bail!(Usage(format!("{name} works on a joint distribution, not --model")));
    }
    if model_based && (args.joint.is_some() || args.target.is_some()) {
        bail!(Usage(format!("{name} does not take --joint or --target")));
    }
    if args.method == MethodArg::Mdi && args.data.is_some() {
        bail!(Usage("mdi reads the model only; drop --data".into()));
    }
    if args.method == MethodArg::Permutation && args.data.is_none() {
        bail!(Usage("permutation needs --data".into()));
    }
    if args.method == MethodArg::Permutation && args.decompose {
        bail!(Usage("permutation importances have no depth decomposition".into()));
    }
    if (args.method == MethodArg::AnalyticPruned) != args.depth.is_some() {
        bail!(Usage("--depth goes with analytic-pruned, and analytic-pruned needs it".into()));
    }
    if (args.method == MethodArg::AnalyticSubspace) != args.size.is_some() {
        bail!(Usage("--size goes with analytic-subspace, and analytic-subspace needs it".into()));
    }
    Ok(())
}

pub fn importance(args: &ImportanceArgs, seed: u64) -> Result<Run> {
    check_importance_flags(args)?;
    let mut run = Run::new("importance", seed, args)?;
    let (report, names) = match args.method {
        MethodArg::Mdi | MethodArg::Permutation => {
            let path = args.model.as_deref().expect("checked");
            let model = Model::load(path)?;
            run.input(path);
            let names: Vec<String> = model.schema().features.iter().map(|f| f.name.clone()).collect();
            let report = match (&model, args.method) {
                (Model::Forest(f), MethodArg::Mdi) => mdi(f),
                (Model::Tree(t), MethodArg::Mdi) => {
                    let width = t.n_features.max(t.max_depth() + 1);
                    let by_degree = tree_mdi(t, width);
                    ImportanceReport {
                        method: ImportanceMethod::Mdi,
                        totals: by_degree.iter().map(|r| r.iter().sum()).collect(),
                        by_degree,
                        normalized: false,
                    }
                }
                (Model::Forest(f), _) => {
                    let data = args.data.as_deref().expect("checked");
                    let ds = load_csv_with_schema(data, &model.schema())
                        .with_context(|| format!("reading {}", data.display()))?;
                    run.input(data);
                    let mut r = rng::stream(seed, 0, Purpose::Permutation);
                    permutation_importance(f, &ds, args.repeats, &mut r)?
                }
                (Model::Tree(_), _) => bail!(Usage("permutation importance needs a forest model".into())),
            };
            (report, names)
        }
        method => {
            let (joint, names) = load_joint(args, &mut run)?;
            let engine = AnalyticEngine::new(&joint)?;
            let report = match method {
                MethodArg::AnalyticTrt => engine.trt(),
                MethodArg::AnalyticPruned => engine.pruned(args.depth.expect("checked"))?,
                _ => engine.subspace(args.size.expect("checked"))?,
            };
            (report, names)
        }
    };
    let report = if args.normalize { report.normalize()? } else { report };

    let mut text = String::from("feature,importance");
    let width = report.by_degree.first().map_or(0, Vec::len);
    if args.decompose {
        for k in 0..width {
            write!(text, ",depth_{k}")?;
        }
    }
    text.push('\n');
    for (j, total) in report.totals.iter().enumerate() {
        write!(text, "{},{total}", names[j])?;
        if args.decompose {
            for v in &report.by_degree[j] {
                write!(text, ",{v}")?;
            }
        }
        text.push('\n');
    }
    emit(&text, args.out.as_deref(), &mut run)?;
    Ok(run)
}

pub fn biasvar(args: &BiasvarArgs, seed: u64) -> Result<Run> {
    let problem: Box<dyn Problem> = match args.problem {
        ProblemArg::Friedman1 => Box::new(Friedman1 {
            p_total: args.features.unwrap_or(10),
            noise_sd: args.noise_sd,
        }),
        ProblemArg::LinearGaussian => Box::new(LinearGaussian {
            p_noise: args.features.unwrap_or(0),
        }),
    };
    let opts = BiasVarianceOptions {
        n_sets: args.sets,
        n_train: args.train_size,
        n_test: args.test_size,
        models_per_set: args.models_per_set,
        seed,
    };
    let base = args.forest.resolve(Task::Regression, seed)?;
    let mut run = Run::new("biasvar", seed, &json!({ "args": args, "forest": base }))?;
    let ms = if args.ms.is_empty() { vec![args.forest.trees] } else { args.ms.clone() };
    let mut text = String::from(
        "n_trees,noise,bias_sq,variance,total,measured_error,bias_sq_se,variance_se,measured_error_se,rho\n",
    );
    for m in ms {
        if m == 0 {
            bail!(Usage("ensemble sizes must be at least 1".into()));
        }
        let cfg = patchwood::ForestConfig { n_trees: m, ..base.clone() };
        let r = bias_variance(problem.as_ref(), &cfg, &opts)?;
        let rho = r.rho.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            text,
            "{m},{},{},{},{},{},{},{},{},{rho}",
            r.noise, r.bias_sq, r.variance, r.total, r.measured_error, r.bias_sq_se, r.variance_se, r.measured_error_se
        )?;
    }
    emit(&text, args.out.as_deref(), &mut run)?;
    Ok(run)
}

pub fn depth_exp(args: &DepthExpArgs, seed: u64) -> Result<Run> {
    let mut run = Run::new("depth-exp", seed, args)?;
    let mut text = String::from("n,n_trees,mean_leaf_depth,std_err,expected\n");
    for &n in &args.n {
        let r = depth_experiment(n, args.trees, seed)?;
        writeln!(text, "{n},{},{},{},{}", r.n_trees, r.mean_leaf_depth, r.std_err, harmonic_depth(n))?;
    }
    emit(&text, args.out.as_deref(), &mut run)?;
    Ok(run)
}

pub fn mi_bias(args: &MiBiasArgs, seed: u64) -> Result<Run> {
    let mut run = Run::new("mi-bias", seed, args)?;
    let mut text = String::from("card_x,card_y,n,trials,measured,expected\n");
    for &cx in &args.card_x {
        let measured = mi_bias_check(cx, args.card_y, args.n, args.trials, seed)?;
        let expected = mi_bias_expected(cx, args.card_y, args.n);
        writeln!(text, "{cx},{},{},{},{measured},{expected}", args.card_y, args.n, args.trials)?;
    }
    emit(&text, args.out.as_deref(), &mut run)?;
    Ok(run)
}

pub fn sweep(args: &SweepArgs, seed: u64) -> Result<Run> {
    let axis: SweepAxis = args.axis.parse().map_err(|e: Error| Usage(e.to_string()))?;
    let opts = SweepOptions {
        base: args.forest.resolve(Task::Regression, seed)?,
        n_train: args.train_size,
        p_total: args.features,
        n_test: args.test_size,
        noise_sd: args.noise_sd,
        seed,
    };
    let mut run = Run::new("sweep", seed, &json!({ "args": args, "forest": opts.base }))?;
    let rows = scaling_sweep(axis, &args.grid, &opts)?;
    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out)?;
    emit(&String::from_utf8(out)?, args.out.as_deref(), &mut run)?;
    Ok(run)
}
