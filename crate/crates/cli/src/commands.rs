//! One function per subcommand. Data goes to `--out` or stdout, diagnostics
//! to stderr.

use crate::args::{
    AnalyzeArgs, CleanRuleArg, Cli, Command, Common, CvArgs, FeatureArgs, FeatureKind, ModelKind,
    PredictArgs, SelectArgs, ServeArgs, SimulateArgs, TrainArgs, TrainerArgs,
};
use crate::manifest::{default_path, Artifact, RunManifest};
use crate::{server, CliError, EXIT_DATA};
use assassin_core::advisor::{advise, live_feature_spec, AdviceError, AdviceResponse, LoadedModel};
use assassin_core::eval::{
    cross_validate, cross_validate_repeated, error_analysis, holdout, TrainerSpec,
};
use assassin_core::features::{
    build_dataset, write_feature_csv, CleanTeamRule, FeatureSpec, StatSet,
};
use assassin_core::game::{assassin_view, validate_game, AssassinView, GameLog, Violation};
use assassin_core::ingest::{
    filter_assassination_eligible, parse_game_bytes, parse_json_record, write_game_stream,
    GameStream, Strictness,
};
use assassin_core::mlp::MlpConfig;
use assassin_core::model::{checksum, FeatureSchema, Model};
use assassin_core::search::{powerset_search, SearchConfig};
use assassin_core::sim::{simulate_dataset, SimConfig};
use assassin_core::svm::{LinearSvcParams, RbfSvcParams};
use serde_json::json;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Tracks every file read and written for the manifest.
struct Run<'a> {
    common: &'a Common,
    inputs: Vec<Artifact>,
    outputs: Vec<Artifact>,
}

impl<'a> Run<'a> {
    fn new(common: &'a Common) -> Self {
        Self {
            common,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn read_file(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(Artifact::new(path, &bytes));
        Ok(bytes)
    }

    /// Bytes of `--in`, or of stdin when it is absent.
    fn read_input(&mut self) -> Result<(Vec<u8>, String), CliError> {
        match &self.common.input {
            Some(path) => Ok((self.read_file(path)?, path.display().to_string())),
            None => {
                let mut bytes = Vec::new();
                std::io::stdin()
                    .read_to_end(&mut bytes)
                    .map_err(|e| CliError::Data(format!("cannot read stdin: {e}")))?;
                Ok((bytes, "<stdin>".to_string()))
            }
        }
    }

    fn write_file(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(path, bytes)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(Artifact::new(path, bytes));
        Ok(())
    }

    /// Primary output: `--out` if given, else stdout.
    fn emit(&mut self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.common.output {
            Some(path) => self.write_file(path, bytes),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Internal(format!("cannot write stdout: {e}")))
            }
        }
    }

    fn strictness(&self) -> Strictness {
        if self.common.lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        }
    }

    fn load_stream(&mut self) -> Result<GameStream, CliError> {
        let (bytes, source) = self.read_input()?;
        let stream = parse_game_bytes(&bytes, self.strictness(), &source)
            .map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        for err in &stream.parse_errors {
            eprintln!("skipped {source} line {}: {}", err.line, err.message);
        }
        Ok(stream)
    }

    /// Input games restricted to those where the assassination happened.
    fn load_eligible(&mut self) -> Result<GameStream, CliError> {
        let stream = self.load_stream()?;
        let eligible = filter_assassination_eligible(&stream);
        if eligible.len() < stream.len() {
            eprintln!(
                "using {} of {} games (the rest never reached an assassination)",
                eligible.len(),
                stream.len()
            );
        }
        if eligible.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no assassination-eligible games",
                stream.source
            )));
        }
        Ok(eligible)
    }

    fn load_model(&mut self, path: &Path) -> Result<LoadedModel, CliError> {
        let bytes = self.read_file(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Data(format!("{}: not UTF-8: {e}", path.display())))?;
        let model = Model::from_json(text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(LoadedModel {
            model,
            checksum: checksum(&bytes),
        })
    }
}

pub fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Simulate(_) => "simulate",
        Command::Validate => "validate",
        Command::Filter => "filter",
        Command::Featurize(_) => "featurize",
        Command::Train(_) => "train",
        Command::Cv(_) => "cv",
        Command::SelectFeatures(_) => "select-features",
        Command::Predict(_) => "predict",
        Command::Analyze(_) => "analyze",
        Command::Serve(_) => "serve",
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    a == b || matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y)
}

fn check_paths(cli: &Cli) -> Result<(), CliError> {
    let Some(out) = &cli.common.output else {
        return Ok(());
    };
    let mut inputs: Vec<&PathBuf> = cli.common.input.iter().collect();
    match &cli.command {
        Command::Predict(a) => inputs.extend(a.game.iter().chain([&a.model])),
        Command::Analyze(a) => inputs.push(&a.model),
        _ => {}
    }
    if let Some(p) = inputs.iter().find(|p| same_file(p, out)) {
        return Err(CliError::Usage(format!(
            "--out {} would overwrite an input file",
            p.display()
        )));
    }
    Ok(())
}

/// Runs the parsed command line and returns the exit code.
pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // a pool may already exist when called more than once in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    check_paths(cli)?;
    let start = Instant::now();
    let mut run = Run::new(&cli.common);
    let code = match &cli.command {
        Command::Simulate(a) => simulate(&mut run, a),
        Command::Validate => validate(&mut run),
        Command::Filter => filter(&mut run),
        Command::Featurize(a) => featurize(&mut run, a),
        Command::Train(a) => train(&mut run, a),
        Command::Cv(a) => cv(&mut run, a),
        Command::SelectFeatures(a) => select_features(&mut run, a),
        Command::Predict(a) => predict(&mut run, a),
        Command::Analyze(a) => analyze(&mut run, a),
        Command::Serve(a) => return serve(&mut run, a),
    }?;
    let manifest_path = cli
        .common
        .manifest
        .clone()
        .or_else(|| cli.common.output.as_deref().map(default_path));
    if let Some(path) = manifest_path {
        let manifest = RunManifest {
            tool: "assassin".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand_name(&cli.command).into(),
            seed: cli.common.seed,
            args: serde_json::to_value(cli).map_err(CliError::internal)?,
            inputs: run.inputs,
            outputs: run.outputs,
            duration_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        std::fs::write(&path, manifest.to_json())
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(code)
}

fn simulate(run: &mut Run, a: &SimulateArgs) -> Result<i32, CliError> {
    let config = SimConfig {
        seed: run.common.seed,
        num_games: a.games,
        merlin_leak: a.leak,
        spy_sabotage: a.sabotage,
        base_approve: a.approve,
        eligible_only: a.eligible_only,
    };
    let stream = simulate_dataset(&config).map_err(CliError::usage)?;
    let mut bytes = Vec::new();
    write_game_stream(&stream, &mut bytes).map_err(CliError::internal)?;
    run.emit(&bytes)?;
    eprintln!("simulated {} games", stream.len());
    Ok(0)
}

fn validate(run: &mut Run) -> Result<i32, CliError> {
    let (bytes, source) = run.read_input()?;
    let stream = parse_game_bytes(&bytes, Strictness::Lenient, &source).map_err(CliError::data)?;
    let report = json!({
        "source": source,
        "valid": stream.len(),
        "invalid": stream.parse_errors.len(),
        "errors": stream.parse_errors,
    });
    let mut text = serde_json::to_string_pretty(&report).map_err(CliError::internal)?;
    text.push('\n');
    run.emit(text.as_bytes())?;
    eprintln!(
        "{} valid, {} invalid",
        stream.len(),
        stream.parse_errors.len()
    );
    Ok(if stream.parse_errors.is_empty() {
        0
    } else {
        EXIT_DATA
    })
}

fn filter(run: &mut Run) -> Result<i32, CliError> {
    let stream = run.load_stream()?;
    let eligible = filter_assassination_eligible(&stream);
    let mut bytes = Vec::new();
    write_game_stream(&eligible, &mut bytes).map_err(CliError::internal)?;
    run.emit(&bytes)?;
    eprintln!("kept {} of {} games", eligible.len(), stream.len());
    Ok(0)
}

fn clean_rule(arg: CleanRuleArg) -> CleanTeamRule {
    match arg {
        CleanRuleArg::NoSpies => CleanTeamRule::NoSpies,
        CleanRuleArg::FullResistance => CleanTeamRule::FullResistance,
    }
}

fn feature_spec(a: &FeatureArgs) -> Result<FeatureSpec, CliError> {
    Ok(match a.features {
        FeatureKind::Engineered => FeatureSpec::Engineered {
            subset: a
                .subset
                .parse::<StatSet>()
                .map_err(|e| CliError::Usage(format!("--subset: {e}")))?,
            clean_rule: clean_rule(a.clean_rule),
        },
        FeatureKind::General => FeatureSpec::General,
    })
}

fn parse_layers(text: &str) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    if text.is_empty() || text == "none" {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|w| match w.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("--layers: bad width '{w}'"))),
        })
        .collect()
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn linear_params(
    c: f64,
    max_iter: Option<usize>,
    tol: Option<f64>,
    seed: u64,
) -> Result<LinearSvcParams, CliError> {
    let d = LinearSvcParams::default();
    Ok(LinearSvcParams {
        c: positive("--c", c)?,
        max_iter: max_iter.unwrap_or(d.max_iter),
        tol: positive("--tol", tol.unwrap_or(d.tol))?,
        seed,
    })
}

fn trainer_spec(a: &TrainerArgs, seed: u64) -> Result<TrainerSpec, CliError> {
    Ok(match a.model {
        ModelKind::LinearSvc => {
            TrainerSpec::LinearSvc(linear_params(a.c, a.max_iter, a.tol, seed)?)
        }
        ModelKind::RbfSvc => {
            let d = RbfSvcParams::default();
            TrainerSpec::RbfSvc(RbfSvcParams {
                c: positive("--c", a.c)?,
                gamma: a.gamma.map(|g| positive("--gamma", g)).transpose()?,
                tol: positive("--tol", a.tol.unwrap_or(d.tol))?,
                max_iter: a.max_iter.unwrap_or(d.max_iter),
            })
        }
        ModelKind::Mlp => {
            if a.batch == 0 {
                return Err(CliError::Usage("--batch must be at least 1".into()));
            }
            TrainerSpec::Mlp(MlpConfig {
                layer_widths: parse_layers(&a.layers)?,
                batch_size: a.batch,
                learning_rate: positive("--lr", a.lr)?,
                epochs: a.epochs,
                seed,
                ..MlpConfig::default()
            })
        }
    })
}

fn featurize(run: &mut Run, a: &FeatureArgs) -> Result<i32, CliError> {
    let spec = feature_spec(a)?;
    let stream = run.load_stream()?;
    let ds = build_dataset(&stream, &spec).map_err(CliError::data)?;
    let mut bytes = Vec::new();
    write_feature_csv(&ds, &spec, &mut bytes).map_err(CliError::internal)?;
    run.emit(&bytes)?;
    eprintln!("featurized {} games into {} columns", ds.len(), spec.dim());
    Ok(0)
}

fn train(run: &mut Run, a: &TrainArgs) -> Result<i32, CliError> {
    let spec = feature_spec(&a.features)?;
    let trainer = trainer_spec(&a.trainer, run.common.seed)?;
    if a.curve.is_some() && a.trainer.model != ModelKind::Mlp {
        return Err(CliError::Usage(
            "--curve is only available for --model mlp".into(),
        ));
    }
    let stream = run.load_eligible()?;
    let ds = build_dataset(&stream, &spec).map_err(CliError::data)?;
    let model = trainer
        .fit(&ds.x, &ds.labels, FeatureSchema::from_spec(spec))
        .map_err(CliError::data)?;
    let text = model.to_json().map_err(CliError::internal)?;
    run.emit(text.as_bytes())?;
    if let (Some(path), Model::Mlp(m)) = (&a.curve, &model) {
        let mut bytes = Vec::new();
        m.write_curve_csv(&mut bytes).map_err(CliError::internal)?;
        run.write_file(path, &bytes)?;
    }
    eprintln!(
        "trained {} on {} games ({} features)",
        model.model_type(),
        ds.len(),
        spec.dim()
    );
    Ok(0)
}

/// Text report to stdout; JSON document to `--out` when given.
fn report<T: serde::Serialize>(run: &mut Run, text: &str, doc: &T) -> Result<(), CliError> {
    print!("{text}");
    if run.common.output.is_some() {
        let mut json = serde_json::to_string_pretty(doc).map_err(CliError::internal)?;
        json.push('\n');
        run.emit(json.as_bytes())?;
    }
    Ok(())
}

fn cv(run: &mut Run, a: &CvArgs) -> Result<i32, CliError> {
    let spec = feature_spec(&a.features)?;
    let seed = run.common.seed;
    let trainer = trainer_spec(&a.trainer, seed)?;
    let stream = run.load_eligible()?;
    let result = if let Some(frac) = a.holdout {
        holdout(&stream, &spec, &trainer, frac, seed)
    } else {
        let repeats = a.repeats.unwrap_or(if a.trainer.model == ModelKind::Mlp {
            5
        } else {
            1
        });
        if repeats > 1 {
            cross_validate_repeated(&stream, &spec, &trainer, a.folds, seed, repeats)
        } else {
            cross_validate(&stream, &spec, &trainer, a.folds, seed)
        }
    };
    let eval = result.map_err(CliError::data)?;
    report(run, &eval.to_text(), &eval)?;
    Ok(0)
}

fn select_features(run: &mut Run, a: &SelectArgs) -> Result<i32, CliError> {
    let candidates = a
        .candidates
        .parse::<StatSet>()
        .map_err(|e| CliError::Usage(format!("--candidates: {e}")))?;
    let config = SearchConfig {
        candidates,
        folds: a.folds,
        seed: run.common.seed,
        clean_rule: clean_rule(a.clean_rule),
        trainer: TrainerSpec::LinearSvc(linear_params(a.c, a.max_iter, a.tol, run.common.seed)?),
    };
    let stream = run.load_eligible()?;
    let result = powerset_search(&stream, &config).map_err(CliError::data)?;
    let mut bytes = Vec::new();
    result.write_csv(&mut bytes).map_err(CliError::internal)?;
    run.emit(&bytes)?;
    let summary = result.summary(a.top);
    if run.common.output.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(0)
}

fn violation_list(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("\n  {v}")).collect()
}

/// Accepts a full game log (recognized by its `roles` key) or an Assassin view.
pub fn parse_advice_input(text: &str) -> Result<AssassinView, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("malformed JSON: {e}")))?;
    if value.get("roles").is_some() {
        let log: GameLog = parse_json_record(text)
            .map_err(|e| CliError::Data(format!("game log field `{}`: {}", e.field, e.message)))?;
        let violations = validate_game(&log);
        if !violations.is_empty() {
            return Err(CliError::Data(format!(
                "invalid game log:{}",
                violation_list(&violations)
            )));
        }
        Ok(assassin_view(&log))
    } else {
        parse_json_record(text)
            .map_err(|e| CliError::Data(format!("view field `{}`: {}", e.field, e.message)))
    }
}

pub fn advice_error(e: AdviceError) -> CliError {
    match e {
        AdviceError::InvalidView(v) => {
            CliError::Data(format!("invalid view:{}", violation_list(&v)))
        }
        other => CliError::Data(other.to_string()),
    }
}

fn predict(run: &mut Run, a: &PredictArgs) -> Result<i32, CliError> {
    let loaded = run.load_model(&a.model)?;
    let bytes = match &a.game {
        Some(path) => run.read_file(path)?,
        None => run.read_input()?.0,
    };
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Data(format!("game is not UTF-8: {e}")))?;
    let view = parse_advice_input(text)?;
    let response: AdviceResponse = advise(&view, &loaded).map_err(advice_error)?;
    let mut out = server::render_advice(&response);
    out.push('\n');
    run.emit(out.as_bytes())?;
    Ok(0)
}

fn analyze(run: &mut Run, a: &AnalyzeArgs) -> Result<i32, CliError> {
    let loaded = run.load_model(&a.model)?;
    let stream = run.load_eligible()?;
    let analysis = error_analysis(&loaded.model, &stream).map_err(CliError::data)?;
    report(run, &analysis.to_text(), &analysis)?;
    Ok(0)
}

fn serve(run: &mut Run, a: &ServeArgs) -> Result<i32, CliError> {
    let loaded = run.load_model(&a.model)?;
    live_feature_spec(&loaded.model)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    server::serve(loaded, a.port)?;
    Ok(0)
}
