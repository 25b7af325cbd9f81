use crate::failure::{input_error, Classify, Failure};
use crate::{EnrollArgs, EvalArgs, ExtractArgs, FeaturizeArgs, IdentifyArgs, PerturbArgs, SimulateArgs, TrainArgs};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use turnprint_core::classify::{train_with_trees, ModelKind, TrainedModel};
use turnprint_core::config::RunConfig;
use turnprint_core::enroll::{EnrollConfig, ProfileTable};
use turnprint_core::eval::{run_eval_suite, Corpus, EvalOptions, LabeledTrip, P_ERR_LEVELS};
use turnprint_core::features::{read_feature_csv, write_feature_csv, FeatureVector};
use turnprint_core::label::DriverLabel;
use turnprint_core::pipeline::{self, Trigger};
use turnprint_core::simgen::{
    generate_trip_with, population, random_route, DeviceMount, DriverProfile, ProfileRanges, RouteMix, RouteScript,
    TripOptions,
};
use turnprint_core::trace::csv::{read_trace, write_trace};
use turnprint_core::trace::RawTrace;
use turnprint_core::turns::{interpolate_turn, TurnSegment};
use turnprint_core::{seed, Error};

type Outcome = Result<(), Failure>;

pub fn load_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig, Failure> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).config(format!("reading config {}", p.display()))?;
            RunConfig::from_toml_str(&text).config(format!("parsing config {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed_override {
        config.seed = s;
    }
    Ok(config)
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).input(format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).runtime(format!("creating {}", dir.display()))?;
    }
    File::create(path).map(BufWriter::new).runtime(format!("creating {}", path.display()))
}

/// File when given, stdout otherwise.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_reader(open(path)?).input(format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).runtime(format!("writing {}", path.display()))?;
    writeln!(w).and_then(|_| w.flush()).runtime(format!("writing {}", path.display()))
}

fn load_trace(path: &Path, aligned: Option<bool>) -> Result<RawTrace, Failure> {
    read_trace(open(path)?, aligned).input(format!("reading trace {}", path.display()))
}

fn save_trace(path: &Path, trace: &RawTrace) -> Outcome {
    let mut w = create(path)?;
    write_trace(&mut w, trace).runtime(format!("writing {}", path.display()))?;
    w.flush().runtime(format!("writing {}", path.display()))
}

fn load_features(path: &Path) -> Result<Vec<FeatureVector>, Failure> {
    read_feature_csv(open(path)?).input(format!("reading features {}", path.display()))
}

fn trip_options(args: &SimulateArgs, seed: u64) -> Result<TripOptions, Failure> {
    if !(args.rate_hz.is_finite() && args.rate_hz >= 10.0) {
        return Err(input_error(format!("--rate-hz must be at least 10, got {}", args.rate_hz)));
    }
    let mut options = TripOptions::new(1.0 / args.rate_hz, seed);
    if args.noise_free {
        options = options.noise_free();
    }
    if args.mounted {
        options.mount = Some(DeviceMount::default());
    }
    Ok(options)
}

#[derive(Serialize)]
struct CorpusDriver {
    label: DriverLabel,
    profile: DriverProfile,
}

pub fn simulate(config: &RunConfig, args: &SimulateArgs) -> Outcome {
    let Some(n) = args.drivers else {
        let (Some(profile), Some(route)) = (&args.profile, &args.route) else {
            return Err(input_error("simulate needs --profile and --route, or --drivers"));
        };
        let profile: DriverProfile = read_json(profile)?;
        let route: RouteScript = read_json(route)?;
        let options = trip_options(args, config.seed)?;
        let (trace, truth) = generate_trip_with(&profile, &route, &options).input("simulating trip")?;
        save_trace(&args.output, &trace)?;
        if let Some(path) = &args.truth {
            write_json(path, &truth)?;
        }
        return Ok(());
    };
    if n < 1 || args.trips < 1 || args.turns < 1 {
        return Err(input_error("--drivers, --trips and --turns must be at least 1"));
    }
    let profiles = population(n, &ProfileRanges::default(), seed::derive(config.seed, "population"));
    let mut mix = RouteMix { turns: args.turns, ..RouteMix::default() };
    if args.distractors {
        mix = mix.with_distractors();
    }
    let root = seed::derive(config.seed, "corpus");
    let dir = &args.output;
    let mut manifest = csv::Writer::from_writer(create(&dir.join("manifest.csv"))?);
    manifest.write_record(["driver", "trace"]).runtime("writing manifest")?;
    let mut drivers = Vec::with_capacity(n);
    for (d, profile) in profiles.iter().enumerate() {
        let label = DriverLabel::numbered(d + 1);
        for j in 0..args.trips {
            let flat = (d * args.trips + j) as u64;
            let route = random_route(&mix, seed::derive_indexed(root, "corpus-route", flat));
            let options = trip_options(args, seed::derive_indexed(root, "corpus-trip", flat))?;
            let (trace, truth) = generate_trip_with(profile, &route, &options).input("simulating corpus trip")?;
            let name = format!("{label}/trip{:03}", j + 1);
            save_trace(&dir.join(format!("{name}.csv")), &trace)?;
            write_json(&dir.join(format!("{name}.truth.json")), &truth)?;
            manifest.write_record([label.as_str(), &format!("{name}.csv")]).runtime("writing manifest")?;
        }
        drivers.push(CorpusDriver { label, profile: *profile });
    }
    manifest.flush().runtime("writing manifest")?;
    write_json(&dir.join("profiles.json"), &drivers)
}

pub fn extract(config: &RunConfig, args: &ExtractArgs) -> Outcome {
    let trace = load_trace(&args.trace, args.aligned)?;
    let extraction = pipeline::extract(&trace, config).input("extracting turns")?;
    let mut out = sink(args.output.as_deref())?;
    for turn in &extraction.turns {
        let turn = if args.native {
            turn.clone()
        } else {
            interpolate_turn(turn, config.turn_len).input("resampling turn")?
        };
        let line = turn.to_json_line().runtime("encoding turn")?;
        writeln!(out, "{line}").runtime("writing turns")?;
    }
    out.flush().runtime("writing turns")?;
    eprintln!("{} turns kept, {} steering events rejected", extraction.turns.len(), extraction.rejected.len());
    Ok(())
}

fn read_turns(path: &Path) -> Result<Vec<TurnSegment>, Failure> {
    let mut turns = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.input(format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        turns.push(TurnSegment::from_json_line(&line).input(format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(turns)
}

pub fn featurize(config: &RunConfig, args: &FeaturizeArgs) -> Outcome {
    let turns = read_turns(&args.turns)?;
    let label = args.label.clone().map(DriverLabel::new).transpose().input("--label")?;
    let vectors: Vec<FeatureVector> = pipeline::featurize(&turns, config, true)
        .input("computing features")?
        .into_iter()
        .map(|v| match &label {
            Some(l) => v.with_label(l.clone()),
            None => v,
        })
        .collect();
    let mut out = sink(args.output.as_deref())?;
    write_feature_csv(&mut out, &vectors).runtime("writing features")?;
    out.flush().runtime("writing features")
}

pub fn train(config: &RunConfig, args: &TrainArgs) -> Outcome {
    let kind: ModelKind = args.kind.parse().input("--kind")?;
    let data = load_features(&args.features)?;
    let model = train_with_trees(&data, kind, seed::derive(config.seed, "train"), config.trees).input("training")?;
    let mut w = create(&args.output)?;
    let json = model.to_json().runtime("encoding model")?;
    w.write_all(json.as_bytes()).and_then(|_| w.flush()).runtime(format!("writing {}", args.output.display()))?;
    eprintln!("trained {} on {} turns, {} drivers", kind.name(), data.len(), model.classes.len());
    Ok(())
}

#[derive(Serialize)]
struct TurnLine<'a> {
    turn: usize,
    direction: String,
    predicted: &'a DriverLabel,
    actual: Option<&'a DriverLabel>,
    scores: BTreeMap<&'a DriverLabel, f64>,
}

pub fn identify(config: &RunConfig, args: &IdentifyArgs) -> Outcome {
    let text = fs::read_to_string(&args.model).input(format!("reading {}", args.model.display()))?;
    let model = TrainedModel::from_json(&text).input(format!("parsing model {}", args.model.display()))?;
    let turns = load_features(&args.turns)?;
    let mut out = sink(args.output.as_deref())?;
    if args.trip {
        let log_priors = config.log_priors(model.classes.len()).config("priors")?;
        let priors: Option<Vec<f64>> = log_priors.map(|l| l.iter().map(|x| x.exp()).collect());
        let prediction = model.predict_trip_map(&turns, priors.as_deref()).input("trip prediction")?;
        serde_json::to_writer_pretty(&mut out, &prediction).runtime("writing prediction")?;
        writeln!(out).runtime("writing prediction")?;
    } else {
        for (i, v) in turns.iter().enumerate() {
            let p = model.predict_turn(v).input(format!("turn {}", i + 1))?;
            let line = TurnLine {
                turn: i + 1,
                direction: v.direction.to_string(),
                predicted: &p.label,
                actual: v.label.as_ref(),
                scores: model.classes.iter().zip(p.scores.iter().copied()).collect(),
            };
            let json = serde_json::to_string(&line).runtime("encoding prediction")?;
            writeln!(out, "{json}").runtime("writing predictions")?;
        }
    }
    out.flush().runtime("writing predictions")
}

#[derive(Serialize)]
struct EnrollReport<'a> {
    label: &'a DriverLabel,
    created: bool,
    scores: &'a BTreeMap<DriverLabel, f64>,
    drivers: usize,
}

pub fn enroll(config: &RunConfig, args: &EnrollArgs) -> Outcome {
    let mut table = if args.table.exists() {
        ProfileTable::read_jsonl(open(&args.table)?).input(format!("reading table {}", args.table.display()))?
    } else {
        ProfileTable::new()
    };
    let trip = load_features(&args.trip)?;
    let threshold = args.threshold.unwrap_or(config.gate_threshold);
    if !threshold.is_finite() {
        return Err(input_error("--threshold must be finite"));
    }
    let ec = EnrollConfig { components: config.gmm_components, threshold, seed: config.seed };
    let assignment = table.assign_or_new_driver(&trip, &ec).input("enrolling trip")?;
    let target = args.output.as_ref().unwrap_or(&args.table);
    let mut w = create(target)?;
    table.write_jsonl(&mut w).runtime(format!("writing {}", target.display()))?;
    w.flush().runtime(format!("writing {}", target.display()))?;
    let report = EnrollReport {
        label: &assignment.label,
        created: assignment.created,
        scores: &assignment.scores,
        drivers: table.len(),
    };
    println!("{}", serde_json::to_string_pretty(&report).runtime("encoding report")?);
    Ok(())
}

fn load_corpus(config: &RunConfig, manifest: &Path) -> Result<Corpus, Failure> {
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_reader(open(manifest)?);
    let headers = reader.headers().input("manifest header")?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| input_error(format!("manifest lacks a '{name}' column")))
    };
    let (driver_col, trace_col) = (column("driver")?, column("trace")?);
    let mut trips = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.input(format!("manifest row {}", i + 1))?;
        let driver = DriverLabel::new(&row[driver_col]).input(format!("manifest row {}", i + 1))?;
        let path: PathBuf = base.join(&row[trace_col]);
        let trace = load_trace(&path, None)?;
        let turns = pipeline::extract(&trace, config).input(format!("extracting {}", path.display()))?.turns;
        trips.push(LabeledTrip { driver, turns });
    }
    if trips.is_empty() {
        return Err(input_error("manifest lists no trips"));
    }
    Ok(Corpus { trips })
}

pub fn eval(config: &RunConfig, args: &EvalArgs) -> Outcome {
    if args.iterations == 0 || args.max_turns == 0 {
        return Err(input_error("--iterations and --max-turns must be at least 1"));
    }
    let corpus = load_corpus(config, &args.manifest)?;
    let options = EvalOptions {
        curve_iterations: args.iterations,
        max_turns: args.max_turns,
        p_err_levels: P_ERR_LEVELS.to_vec(),
        ablation: !args.no_ablation,
    };
    let report = run_eval_suite(config, &corpus, &options).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure { code: crate::failure::CONFIG_ERROR, error: e.into() },
        other => Failure {
            code: crate::failure::INPUT_ERROR,
            error: anyhow::Error::from(other).context("evaluating corpus"),
        },
    })?;
    report.write_csv(&args.output).runtime(format!("writing {}", args.output.display()))?;
    let summary = report.summary();
    fs::write(args.output.join("summary.txt"), &summary).runtime("writing summary")?;
    print!("{summary}");
    Ok(())
}

pub fn perturb(config: &RunConfig, args: &PerturbArgs) -> Outcome {
    let trigger: Trigger = args.trigger.parse().input("--trigger")?;
    let trace = load_trace(&args.trace, args.aligned)?;
    let noisy =
        pipeline::perturb(&trace, args.noise_sd, trigger, config.delta_bump, config.seed).input("perturbing trace")?;
    save_trace(&args.output, &noisy)
}
