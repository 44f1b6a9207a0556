use std::fmt::Write as _;
use std::path::Path;

use survsel::bnls::{fit_bnls, DEFAULT_REPLICATES as BNLS_REPLICATES};
use survsel::evaluation::{
    per_split_tsv, repeated_split_experiment, summary_tsv, ExperimentConfig, MethodConfig, MethodSpec, DEFAULT_SPLITS,
};
use survsel::forest::{fit_forest, ForestParams, DEFAULT_NTREE};
use survsel::selection::{
    finalize_model, kappa_lambda_curve, run_selection, InclusionFrequencyTable, SelectionConfig, SelectionMethod,
};
use survsel::tree::{fit_tree, CpChoice, GrowParams, TreeFit};
use survsel::SurvivalDataset;

use crate::config::{parse_grid, Lookup, MethodArgs, Settings};
use crate::{core_err, CliError};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.33;

/// Effective configuration lines, in output order.
pub type Echo = Vec<(String, String)>;

fn push(echo: &mut Echo, key: &str, value: impl ToString) {
    echo.push((key.to_string(), value.to_string()));
}

fn write(out: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = out.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Computation(format!("cannot write {}: {e}", path.display())))
}

/// A method with its parameters resolved.
enum Resolved {
    Cox { selection: SelectionConfig, kappa: Option<f64> },
    Tree { params: GrowParams, cp: CpChoice },
    Bnls { params: GrowParams, replicates: usize, cp: CpChoice },
    Rsf { params: ForestParams },
}

fn method_keys(name: &str) -> Result<&'static [&'static str], CliError> {
    Ok(match name {
        "bss" => &["replicates", "tol", "kappa"],
        "bls" => &["replicates", "tol", "kappa", "lambda"],
        "brls" => &["replicates", "tol", "kappa", "lambda", "alpha", "pw"],
        "tree" => &["min-leaf", "min-events", "max-depth", "cp", "folds"],
        "bnls" => &["min-leaf", "min-events", "max-depth", "cp", "folds", "replicates"],
        "rsf" => &["ntree", "mtry", "min-leaf", "min-events"],
        other => {
            return Err(CliError::Validation(format!(
                "method: unknown method {other:?} (expected bss, bls, brls, tree, bnls or rsf)"
            )))
        }
    })
}

fn grow_params<L: Lookup>(l: &L, echo: &mut Echo) -> Result<GrowParams, CliError> {
    let d = GrowParams::default();
    let params = GrowParams {
        min_leaf: l.or("min-leaf", d.min_leaf)?,
        min_events: l.or("min-events", d.min_events)?,
        max_depth: l.opt("max-depth")?,
    };
    push(echo, "min-leaf", params.min_leaf);
    push(echo, "min-events", params.min_events);
    if let Some(m) = params.max_depth {
        push(echo, "max-depth", m);
    }
    Ok(params)
}

fn cp_choice<L: Lookup>(l: &L, echo: &mut Echo) -> Result<CpChoice, CliError> {
    match (l.opt::<f64>("cp")?, l.opt::<usize>("folds")?) {
        (Some(_), Some(_)) => Err(CliError::Validation(format!(
            "{}: cannot be combined with {}",
            l.path("cp"),
            l.path("folds")
        ))),
        (Some(cp), None) => {
            if !(cp >= 0.0 && cp.is_finite()) {
                return Err(CliError::Validation(format!("{}: must be finite and >= 0", l.path("cp"))));
            }
            push(echo, "cp", cp);
            Ok(CpChoice::Fixed(cp))
        }
        (None, folds) => {
            let folds = folds.unwrap_or(DEFAULT_FOLDS);
            push(echo, "folds", folds);
            Ok(CpChoice::CrossValidate { folds })
        }
    }
}

fn resolve<L: Lookup>(name: &str, l: &L, seed: u64, echo: &mut Echo) -> Result<Resolved, CliError> {
    match name {
        "bss" | "bls" | "brls" => {
            let method: SelectionMethod = name.parse().map_err(core_err)?;
            let mut cfg = SelectionConfig::new(method, seed);
            cfg.replicates = l.or("replicates", cfg.replicates)?;
            push(echo, "replicates", cfg.replicates);
            if method.is_lasso() {
                cfg.lambda = l.opt("lambda")?;
                if let Some(v) = cfg.lambda {
                    push(echo, "lambda", v);
                }
            }
            if method == SelectionMethod::Brls {
                cfg.alpha = l.or("alpha", cfg.alpha)?;
                cfg.p_w = l.or("pw", cfg.p_w)?;
                push(echo, "alpha", cfg.alpha);
                push(echo, "pw", cfg.p_w);
            }
            cfg.tol = l.or("tol", cfg.tol)?;
            push(echo, "tol", cfg.tol);
            let kappa: Option<f64> = l.opt("kappa")?;
            if let Some(k) = kappa {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(CliError::Validation(format!("{}: must be finite and >= 0", l.path("kappa"))));
                }
                push(echo, "kappa", k);
            }
            Ok(Resolved::Cox { selection: cfg, kappa })
        }
        "tree" => {
            let params = grow_params(l, echo)?;
            let cp = cp_choice(l, echo)?;
            Ok(Resolved::Tree { params, cp })
        }
        "bnls" => {
            let params = grow_params(l, echo)?;
            let cp = cp_choice(l, echo)?;
            let replicates = l.or("replicates", BNLS_REPLICATES)?;
            push(echo, "replicates", replicates);
            Ok(Resolved::Bnls { params, replicates, cp })
        }
        "rsf" => {
            let d = ForestParams::default();
            let params = ForestParams {
                ntree: l.or("ntree", DEFAULT_NTREE)?,
                mtry: l.opt("mtry")?,
                min_leaf: l.or("min-leaf", d.min_leaf)?,
                min_events: l.or("min-events", d.min_events)?,
            };
            push(echo, "ntree", params.ntree);
            if let Some(m) = params.mtry {
                push(echo, "mtry", m);
            }
            push(echo, "min-leaf", params.min_leaf);
            push(echo, "min-events", params.min_events);
            Ok(Resolved::Rsf { params })
        }
        other => Err(CliError::Validation(format!("method: unknown method {other:?}"))),
    }
}

fn reject_foreign(s: &Settings, used: &[&str], all: &[&str], method: &str) -> Result<(), CliError> {
    for k in all {
        if !used.contains(k) && s.raw(k).is_some() {
            return Err(CliError::Validation(format!("{k}: not a parameter of {method}")));
        }
    }
    Ok(())
}

fn kappa_tsv(tables: &[InclusionFrequencyTable]) -> String {
    let mut out = InclusionFrequencyTable::tsv_header().to_string();
    for t in tables {
        out.push_str(&t.tsv_rows());
    }
    out
}

pub const SELECT_KEYS: &[&str] = &["method", "replicates", "lambda", "lambda-grid", "alpha", "pw", "kappa", "tol"];
pub const CURVE_KEYS: &[&str] = &["method", "replicates", "lambda-grid", "alpha", "pw", "tol"];

/// Inclusion frequencies at one λ (or for BSS), optional κ-λ curve and the
/// refit at `kappa`.
pub fn select(s: &Settings, ds: &SurvivalDataset, seed: u64, out: &Path, curve_only: bool) -> Result<Echo, CliError> {
    let name: String = s.required::<String>("method")?.to_ascii_lowercase();
    let all = if curve_only { CURVE_KEYS } else { SELECT_KEYS };
    if !["bss", "bls", "brls"].contains(&name.as_str()) {
        return Err(CliError::Validation(format!("method: {name:?} is not bss, bls or brls")));
    }
    let mut used = vec!["method", "lambda-grid"];
    used.extend(method_keys(&name)?);
    reject_foreign(s, &used, all, &name)?;
    let mut echo = Echo::new();
    push(&mut echo, "method", &name);
    let Resolved::Cox { selection: cfg, kappa } = resolve(&name, s, seed, &mut echo)? else {
        unreachable!("selection method")
    };
    let grid_text: Option<String> = s.opt("lambda-grid")?;
    let grid = grid_text.as_deref().map(parse_grid).transpose()?;
    if let Some(g) = &grid_text {
        push(&mut echo, "lambda-grid", g);
    }
    if curve_only && grid.is_none() {
        return Err(CliError::Validation("lambda-grid: required".into()));
    }
    if cfg.method.is_lasso() {
        if cfg.lambda.is_none() && grid.is_none() {
            return Err(CliError::Validation(format!("lambda: {name} needs lambda or lambda-grid")));
        }
        if kappa.is_some() && cfg.lambda.is_none() {
            return Err(CliError::Validation("kappa: a refit needs lambda".into()));
        }
    } else if grid.is_some() {
        return Err(CliError::Validation("lambda-grid: only bls and brls have a penalty".into()));
    }

    if let Some(g) = &grid {
        let tables = kappa_lambda_curve(ds, &cfg, g).map_err(core_err)?;
        write(out, "curve.tsv", &kappa_tsv(&tables))?;
    }
    if curve_only || (cfg.method.is_lasso() && cfg.lambda.is_none()) {
        return Ok(echo);
    }
    cfg.validate().map_err(core_err)?;
    let table = run_selection(ds, &cfg).map_err(core_err)?;
    write(out, "kappa.tsv", &kappa_tsv(std::slice::from_ref(&table)))?;
    if table.failures > 0 {
        eprintln!("{} of {} replicates failed", table.failures, cfg.replicates);
    }
    let gap = match table.suggest_gap() {
        Some(g) => format!("suggested kappa cut\t{}\nupper\t{}\nlower\t{}\n", g.cut, g.upper, g.lower),
        None => "suggested kappa cut\tNA\n".to_string(),
    };
    write(out, "gap.txt", &gap)?;
    match kappa {
        Some(k) => {
            let model = finalize_model(ds, &table, k, &cfg.fit).map_err(core_err)?;
            let mut text = String::from("covariate\tcoefficient\n");
            for (n, b) in model.coefficients() {
                let _ = writeln!(text, "{n}\t{b}");
            }
            write(out, "model.tsv", &text)?;
        }
        None => eprintln!("no kappa given: inclusion frequencies written, no model fitted"),
    }
    Ok(echo)
}

pub const FIT_KEYS: &[&str] = &[
    "method", "min-leaf", "min-events", "max-depth", "cp", "folds", "replicates", "ntree", "mtry", "vimp",
];

fn write_tree(out: &Path, name: &str, fit: &TreeFit) -> Result<(), CliError> {
    write(out, "tree.txt", &fit.tree.to_text())?;
    write(out, "tree.dot", &fit.tree.to_dot())?;
    let mut prune = String::from("cp\tn_leaves\traw_error\n");
    for st in &fit.sequence.steps {
        let _ = writeln!(prune, "{}\t{}\t{}", st.cp, st.n_leaves, st.raw_error);
    }
    write(out, "prune.tsv", &prune)?;
    if let Some(cv) = &fit.cv {
        let mut text = String::from("cp\tn_leaves\terror\n");
        for p in &cv.points {
            let _ = writeln!(text, "{}\t{}\t{}", p.cp, p.n_leaves, p.error);
        }
        write(out, "cv.tsv", &text)?;
    }
    let summary = format!(
        "method\t{name}\ncp\t{}\nleaves\t{}\nfull_tree_leaves\t{}\n",
        fit.cp,
        fit.tree.n_leaves(),
        fit.full.n_leaves()
    );
    write(out, "summary.txt", &summary)
}

/// Single tree, stabilized tree or forest.
pub fn fit(s: &Settings, ds: &SurvivalDataset, seed: u64, out: &Path) -> Result<Echo, CliError> {
    let name: String = s.required::<String>("method")?.to_ascii_lowercase();
    if !["tree", "bnls", "rsf"].contains(&name.as_str()) {
        return Err(CliError::Validation(format!("method: {name:?} is not tree, bnls or rsf")));
    }
    let mut used = vec!["method"];
    used.extend(method_keys(&name)?);
    if name == "rsf" {
        used.push("vimp");
    }
    reject_foreign(s, &used, FIT_KEYS, &name)?;
    let mut echo = Echo::new();
    push(&mut echo, "method", &name);
    match resolve(&name, s, seed, &mut echo)? {
        Resolved::Tree { params, cp } => {
            let fit = fit_tree(ds, &params, cp, seed).map_err(core_err)?;
            write_tree(out, &name, &fit)?;
        }
        Resolved::Bnls { params, replicates, cp } => {
            let fit = fit_bnls(ds, &params, replicates, cp, seed).map_err(core_err)?;
            write_tree(out, &name, &fit)?;
        }
        Resolved::Rsf { params } => {
            let vimp: bool = s.or("vimp", true)?;
            push(&mut echo, "vimp", vimp);
            let forest = fit_forest(ds, &params, seed).map_err(core_err)?;
            let mut summary = forest.summary();
            match forest.oob_error(ds) {
                Ok(e) => {
                    let _ = writeln!(summary, "oob_error\t{e}");
                }
                Err(e) => {
                    let _ = writeln!(summary, "oob_error\tNA\t{e}");
                }
            }
            write(out, "forest.txt", &summary)?;
            if vimp {
                let table = forest.vimp(ds, seed).map_err(core_err)?;
                write(out, "vimp.tsv", &table.to_tsv())?;
            }
        }
        Resolved::Cox { .. } => unreachable!("tree method"),
    }
    Ok(echo)
}

pub const EVALUATE_KEYS: &[&str] = &["method", "splits", "test-fraction"];

/// Parses one `name:key=value,...` spec of `evaluate` into a method and
/// its canonical spec text.
fn evaluate_method(text: &str, position: usize) -> Result<(MethodConfig, String), CliError> {
    let args = MethodArgs::parse(text, position)?;
    let mut keys = vec!["label"];
    keys.extend(method_keys(&args.name)?);
    args.check_keys(&keys)?;
    let label: String = args.or("label", args.name.clone())?;
    if label.is_empty() || label.contains(['\t', '\n', ',']) {
        return Err(CliError::Validation(format!("method[{position}].label: must be nonempty, without tabs or commas")));
    }
    let mut echo = Echo::new();
    let spec = match resolve(&args.name, &args, 0, &mut echo)? {
        Resolved::Cox { selection, kappa } => {
            let kappa = kappa.ok_or_else(|| CliError::Validation(format!("method[{position}].kappa: required")))?;
            if selection.method.is_lasso() && selection.lambda.is_none() {
                return Err(CliError::Validation(format!("method[{position}].lambda: required")));
            }
            selection.validate().map_err(|e| CliError::Validation(format!("method[{position}]: {e}")))?;
            MethodSpec::Cox { selection, kappa }
        }
        Resolved::Tree { params, cp } => MethodSpec::Tree { params, cp },
        Resolved::Bnls { params, replicates, cp } => MethodSpec::Bnls { params, replicates, cp },
        Resolved::Rsf { params } => MethodSpec::Rsf { params },
    };
    let mut canonical = format!("{}:label={label}", args.name);
    for (k, v) in &echo {
        let _ = write!(canonical, ",{k}={v}");
    }
    Ok((MethodConfig { label, spec }, canonical))
}

/// Repeated train/test comparison of several methods. Fails (exit 2) only
/// when every cell failed.
pub fn evaluate(s: &Settings, ds: &SurvivalDataset, seed: u64, out: &Path) -> Result<Echo, CliError> {
    let texts = s.all("method");
    if texts.is_empty() {
        return Err(CliError::Validation("method: at least one method is required".into()));
    }
    let mut methods = Vec::new();
    let mut echo = Echo::new();
    let cfg = ExperimentConfig {
        splits: s.or("splits", DEFAULT_SPLITS)?,
        test_fraction: s.or("test-fraction", DEFAULT_TEST_FRACTION)?,
        seed,
    };
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    push(&mut echo, "splits", cfg.splits);
    push(&mut echo, "test-fraction", cfg.test_fraction);
    for (i, t) in texts.iter().enumerate() {
        let (m, canonical) = evaluate_method(t, i)?;
        if methods.iter().any(|x: &MethodConfig| x.label == m.label) {
            return Err(CliError::Validation(format!("method[{i}].label: {:?} used twice; give each a distinct label=", m.label)));
        }
        methods.push(m);
        push(&mut echo, "method", canonical);
    }
    let reports = repeated_split_experiment(ds, &methods, &cfg).map_err(core_err)?;
    write(out, "summary.tsv", &summary_tsv(&reports))?;
    write(out, "splits.tsv", &per_split_tsv(&reports))?;
    if reports.iter().all(|r| r.failures() == cfg.splits) {
        return Err(CliError::Computation("every method failed on every split".into()));
    }
    Ok(echo)
}
