use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use keyheat_core::acoustic::{
    bandpass, detect_keystrokes, energy_vector, features_at, process_recording, AudioClip, DetectorConfig,
    PipelineConfig,
};
use keyheat_core::classify::{self, cross_validate, predict, top_n_accuracy, Hyperparameters, KeyModel, ModelStyle};
use keyheat_core::fusion::{
    dictionary_attack, position_of, rank_passwords, score_space, AdditiveBonus, Dictionary, ScoringMethod,
    SearchSpaceSpec, SpaceMode, TimingBonus, SAME_KEY_THRESHOLD,
};
use keyheat_core::keys::{alphabet, key_name, KeySet};
use keyheat_core::synth::{self, SynthConfig};
use keyheat_core::thermal::{
    extract_hot_keys, keyset_distance, simulate_session, thermal_state_at, CameraModel, ThermalState, TypingStyle,
};
use keyheat_core::{PredictionList, TrainingCorpus};

use crate::formats::{self, FeatureInput, SegmentsFile};
use crate::report::{summarize, BonusSummary, Constants, DictionaryOutput, RankingOutput, Report, TopN};
use crate::scenario::ScenarioConfig;
use crate::{Cli, Command, Format, Global, EXIT_ANALYSIS};

pub fn run(cli: Cli) -> anyhow::Result<u8> {
    let g = &cli.global;
    std::fs::create_dir_all(&g.output_dir).with_context(|| format!("creating {}", g.output_dir.display()))?;
    match &cli.command {
        Command::Simulate(a) => simulate(g, a),
        Command::Segment(a) => segment(g, a),
        Command::Train(a) => train(g, a),
        Command::Predict(a) => predict_cmd(g, a),
        Command::Cv(a) => cv(g, a),
        Command::Fuse(a) => fuse(g, a),
        Command::Report(a) => report(g, a),
    }
}

fn keys_string(keys: &KeySet) -> String {
    keys.iter().collect()
}

fn out_path(g: &Global, name: &str) -> PathBuf {
    g.output_dir.join(name)
}

fn tabular_name(g: &Global, stem: &str) -> PathBuf {
    out_path(
        g,
        &match g.format {
            Format::Json => format!("{stem}.json"),
            Format::Csv => format!("{stem}.csv"),
        },
    )
}

fn write_rows<T: Serialize>(g: &Global, stem: &str, rows: &[T]) -> anyhow::Result<PathBuf> {
    let path = tabular_name(g, stem);
    match g.format {
        Format::Json => formats::write_json(&path, &rows)?,
        Format::Csv => {
            let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(path)
}

fn base_scenario(g: &Global) -> anyhow::Result<ScenarioConfig> {
    match &g.config {
        Some(path) => ScenarioConfig::load(path),
        None => Ok(ScenarioConfig::default()),
    }
}

#[derive(Debug, Args)]
pub struct ScenarioOverrides {
    #[arg(long)]
    pub password: Option<String>,
    /// hp or tt.
    #[arg(long)]
    pub style: Option<TypingStyle>,
    /// Camera preset: flir-one, sc620, a6700sc, x8500sc.
    #[arg(long)]
    pub camera: Option<String>,
    /// Seconds between the last keystroke and the thermal image.
    #[arg(long)]
    pub capture_delay: Option<f64>,
}

fn scenario(g: &Global, o: &ScenarioOverrides) -> anyhow::Result<ScenarioConfig> {
    let mut sc = base_scenario(g)?;
    if let Some(p) = &o.password {
        sc.password = p.clone();
    }
    if let Some(s) = o.style {
        sc.style = s;
    }
    if let Some(c) = &o.camera {
        sc.camera = c.clone();
    }
    if let Some(d) = o.capture_delay {
        sc.capture_delay = d;
    }
    sc.validate()?;
    Ok(sc)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioOverrides,
    /// Also synthesize the typing audio as typing.wav.
    #[arg(long)]
    pub audio: bool,
    /// Also synthesize per-key training recordings under corpus/hp and corpus/tt.
    #[arg(long)]
    pub training_audio: bool,
}

#[derive(Serialize)]
struct RecoveryRow {
    seconds_after_entry: f64,
    distance: usize,
    hot_keys: String,
}

#[derive(Serialize)]
struct SimulationSummary {
    scenario: ScenarioConfig,
    pressed_keys: String,
    capture_time: f64,
    hot_keys: String,
    constants: Constants,
}

fn simulate(g: &Global, a: &SimulateArgs) -> anyhow::Result<u8> {
    let sc = scenario(g, &a.scenario)?;
    let layout = sc.layout()?;
    let camera = sc.camera()?;
    let session = simulate_session(&sc.password, sc.style, &layout, &sc.cadence, &sc.environment)?;
    let end = session.entry_end();
    let capture = end + sc.capture_delay;
    let state = thermal_state_at(&session, &layout, capture, &sc.keycap, &sc.environment)?;
    let hot = extract_hot_keys(&state, &camera);
    let pressed = session.pressed_keys();

    let state_path = tabular_name(g, "thermal_state");
    match g.format {
        Format::Json => formats::write_json(&state_path, &state)?,
        Format::Csv => {
            let file = std::fs::File::create(&state_path).with_context(|| format!("writing {}", state_path.display()))?;
            state.write_csv(file)?;
        }
    }

    let mut rows = Vec::with_capacity(sc.sample_times.len());
    for &t in &sc.sample_times {
        let s = thermal_state_at(&session, &layout, end + t + camera.capture_latency, &sc.keycap, &sc.environment)?;
        let h = extract_hot_keys(&s, &camera);
        rows.push(RecoveryRow {
            seconds_after_entry: t,
            distance: keyset_distance(&pressed, &h),
            hot_keys: keys_string(&h),
        });
    }
    let recovery_path = write_rows(g, "recovery", &rows)?;

    let constants = Constants::new(&sc.keycap, &sc.environment, &camera, &DetectorConfig::default(), SAME_KEY_THRESHOLD)?;
    formats::write_json(
        &out_path(g, "simulation.json"),
        &SimulationSummary {
            scenario: sc.clone(),
            pressed_keys: keys_string(&pressed),
            capture_time: capture,
            hot_keys: keys_string(&hot),
            constants,
        },
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let synth_cfg = SynthConfig::default();
    if a.audio {
        let rec = synth::typing_recording(&sc.password, sc.style, sc.cadence.interval, Some(sc.snr_db), &synth_cfg, &mut rng)?;
        rec.clip.write_wav(out_path(g, "typing.wav"))?;
    }
    if a.training_audio {
        for (style, dir) in [(TypingStyle::HuntAndPeck, "hp"), (TypingStyle::TouchTyping, "tt")] {
            let dir = out_path(g, "corpus").join(dir);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for key in alphabet() {
                let text: String = std::iter::repeat_n(key, sc.training_per_key).collect();
                let rec = synth::typing_recording(&text, style, 0.3, Some(sc.snr_db), &synth_cfg, &mut rng)?;
                rec.clip.write_wav(dir.join(format!("{}.wav", key_name(key))))?;
            }
        }
    }

    println!("pressed keys: {}", keys_string(&pressed));
    println!("hot keys {:.1} s after entry ({}): {}", sc.capture_delay, camera.name, keys_string(&hot));
    println!("wrote {} and {}", state_path.display(), recovery_path.display());
    Ok(0)
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 400.0)]
    pub band_low: f64,
    #[arg(long, default_value_t = 12_000.0)]
    pub band_high: f64,
    /// Normalized energy rise that marks a press.
    #[arg(long, default_value_t = 0.15)]
    pub press_threshold: f64,
    /// Dead time after a press, s.
    #[arg(long, default_value_t = 0.125)]
    pub refractory: f64,
    /// Release level as a fraction of the press peak.
    #[arg(long, default_value_t = 0.3)]
    pub release_threshold: f64,
    /// Audio kept per keystroke, s.
    #[arg(long, default_value_t = 0.1)]
    pub segment_duration: f64,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            band_low: self.band_low,
            band_high: self.band_high,
            detector: DetectorConfig {
                press_threshold: self.press_threshold,
                refractory: self.refractory,
                release_rel_threshold: self.release_threshold,
            },
            segment_duration: self.segment_duration,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub wav: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// CSV of press_time,release_time replacing detected boundaries.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long, default_value = "segments.json")]
    pub out: String,
}

fn segment(g: &Global, a: &SegmentArgs) -> anyhow::Result<u8> {
    let clip = AudioClip::read_wav(&a.wav).with_context(|| format!("reading {}", a.wav.display()))?;
    let pipeline = a.pipeline.config();
    let filtered = bandpass(&clip, pipeline.band_low, pipeline.band_high)?;
    let boundaries = match &a.overrides {
        Some(path) => formats::read_overrides(path)?,
        None => detect_keystrokes(&energy_vector(&filtered)?, &pipeline.detector)?,
    };
    let segments = features_at(&filtered, &boundaries, &pipeline)?;
    let file = SegmentsFile::new(clip.sample_rate(), pipeline, segments);
    let path = out_path(g, &a.out);
    formats::write_json(&path, &file)?;
    println!("{} keystrokes", file.segments.len());
    Ok(0)
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Labelled features JSON, or a directory of <key>.wav recordings.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Touch-typing corpus, combined with --corpus for the hptt style.
    #[arg(long)]
    pub tt_corpus: Option<PathBuf>,
    /// hp, tt or hptt.
    #[arg(long, default_value = "hp")]
    pub style: ModelStyle,
    #[arg(long, default_value = "default")]
    pub keyboard: String,
    /// Inverse L2 regularization strength.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
}

impl CorpusArgs {
    fn load(&self) -> anyhow::Result<TrainingCorpus> {
        formats::load_corpus(
            &self.corpus,
            self.tt_corpus.as_deref(),
            self.style,
            &self.keyboard,
            &PipelineConfig::default(),
        )
    }

    fn hyper(&self, seed: u64) -> Hyperparameters {
        Hyperparameters {
            l2_inverse_strength: self.c,
            max_iterations: self.iterations,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model path; defaults to model.json in the output directory.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

fn train(g: &Global, a: &TrainArgs) -> anyhow::Result<u8> {
    let corpus = a.corpus.load()?;
    let model = classify::train(&corpus, &a.corpus.hyper(g.seed))?;
    let path = a.model.clone().unwrap_or_else(|| out_path(g, "model.json"));
    model.save(&path)?;
    let accuracy = top_n_accuracy(&model, corpus.samples(), 1)?;
    println!(
        "trained on {} samples of {} keys; training top-1 accuracy {accuracy:.4}",
        corpus.samples().len(),
        model.classes.len()
    );
    Ok(0)
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Segments JSON from `segment`, or an array of {features, label?} rows.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "predictions.json")]
    pub out: String,
}

fn predict_cmd(g: &Global, a: &PredictArgs) -> anyhow::Result<u8> {
    let model = KeyModel::load(&a.model)?;
    let input: FeatureInput = formats::read_json(&a.input)?;
    let rows = input.rows();
    let lists = rows
        .iter()
        .map(|r| predict(&model, &r.features))
        .collect::<keyheat_core::Result<Vec<PredictionList>>>()?;
    formats::write_json(&out_path(g, &a.out), &lists)?;
    let guess: String = lists.iter().filter_map(PredictionList::top).collect();
    println!("top guess: {guess}");
    let labelled: Vec<(char, &PredictionList)> = rows.iter().zip(&lists).filter_map(|(r, l)| r.label.map(|c| (c, l))).collect();
    if !labelled.is_empty() {
        let hits = labelled.iter().filter(|(c, l)| l.top() == Some(*c)).count();
        println!("top-1 accuracy {:.4}", hits as f64 / labelled.len() as f64);
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Serialize)]
struct FoldRow {
    fold: usize,
    accuracy: f64,
}

fn cv(g: &Global, a: &CvArgs) -> anyhow::Result<u8> {
    let corpus = a.corpus.load()?;
    let report = cross_validate(&corpus, a.folds, &a.corpus.hyper(g.seed))?;
    let path = match g.format {
        Format::Json => {
            let path = out_path(g, "cv.json");
            formats::write_json(&path, &report)?;
            path
        }
        Format::Csv => {
            let rows: Vec<FoldRow> = report
                .per_fold
                .iter()
                .enumerate()
                .map(|(fold, &accuracy)| FoldRow { fold, accuracy })
                .collect();
            write_rows(g, "cv", &rows)?
        }
    };
    for (i, acc) in report.per_fold.iter().enumerate() {
        println!("fold {i}: {acc:.4}");
    }
    println!("mean top-1 accuracy {:.4} ({})", report.mean, path.display());
    Ok(0)
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Keys seen on the thermal image, e.g. "adprsw0".
    #[arg(long, conflicts_with = "thermal")]
    pub keyset: Option<String>,
    /// Thermal image (CSV or JSON from `simulate`) to extract hot keys from.
    #[arg(long)]
    pub thermal: Option<PathBuf>,
    /// Camera preset used with --thermal.
    #[arg(long)]
    pub camera: Option<String>,
    /// Password length; defaults to the number of predictions or segments.
    #[arg(long)]
    pub length: Option<usize>,
    /// Predictions JSON from `predict`; uniform when absent.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Segments JSON supplying keystroke timings for the same-key bonus.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// sum-prob, mult-prob, sum-ldv or mult-ldv.
    #[arg(long, default_value = "mult-prob")]
    pub method: ScoringMethod,
    /// Reward repeated keys typed within --threshold seconds.
    #[arg(long)]
    pub bonus: bool,
    #[arg(long, default_value_t = SAME_KEY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Allow strings that skip some keys (for key sets larger than the length).
    #[arg(long)]
    pub at_most: bool,
    /// Write every candidate's score to scores.csv.
    #[arg(long)]
    pub all_scores: bool,
    /// Rank this dictionary (one password per line, most popular first) instead.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Typist style for the dictionary target key set: hp or tt.
    #[arg(long, default_value = "hp")]
    pub style: TypingStyle,
}

fn read_thermal(path: &Path, ambient: f64) -> anyhow::Result<ThermalState> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(ThermalState::read_csv(file, 0.0, ambient)?)
    } else {
        formats::read_json(path)
    }
}

fn fuse(g: &Global, a: &FuseArgs) -> anyhow::Result<u8> {
    let sc = base_scenario(g)?;
    let camera = match &a.camera {
        Some(name) => CameraModel::preset(name).with_context(|| format!("unknown camera preset {name:?}"))?,
        None => sc.camera()?,
    };
    let key_set: KeySet = match (&a.keyset, &a.thermal) {
        (Some(k), None) => k.chars().collect(),
        (None, Some(path)) => extract_hot_keys(&read_thermal(path, sc.environment.ambient_temp)?, &camera),
        _ => bail!("give exactly one of --keyset or --thermal"),
    };
    let predictions = a.predictions.as_deref().map(formats::read_predictions).transpose()?;
    let segments: Option<SegmentsFile> = a.segments.as_deref().map(formats::read_json).transpose()?;
    let length = a
        .length
        .or(predictions.as_ref().map(Vec::len))
        .or(segments.as_ref().map(|s| s.segments.len()))
        .context("password length unknown: give --length, --predictions or --segments")?;
    if let Some(p) = &predictions {
        ensure!(p.len() == length, "{} prediction lists for length {length}", p.len());
    }
    let detector = segments.as_ref().map(|s| s.pipeline.detector).unwrap_or_default();
    let constants = Constants::new(&sc.keycap, &sc.environment, &camera, &detector, a.threshold)?;

    let mut report = Report {
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: g.config.as_ref().map(|_| sc.clone()),
        constants,
        thermal_key_set: keys_string(&key_set),
        acoustic_length: length,
        predictions: predictions.as_deref().map(|p| summarize(p, 3)).unwrap_or_default(),
        timings: segments.as_ref().map(|s| s.timings.clone()).unwrap_or_default(),
        method: a.method,
        bonus: None,
        space_mode: if a.at_most { SpaceMode::AtMost } else { SpaceMode::Exact },
        truth: a.truth.clone(),
        truth_in_space: None,
        ranking: None,
        dictionary: None,
    };

    if let Some(path) = &a.dictionary {
        let dict = Dictionary::read(path)?;
        let layout = sc.layout()?;
        let ranked = dictionary_attack(&dict, &key_set, length, a.style, &layout);
        let target = keyheat_core::fusion::attack_target(&key_set, a.style, &layout);
        let truth_position = a.truth.as_deref().and_then(|t| position_of(&ranked, t));
        let top_n = [1, 5, 10, 20, 50, 100]
            .into_iter()
            .map(|n| TopN {
                n,
                hit: truth_position.is_some_and(|p| p <= n),
            })
            .collect();
        report.truth_in_space = a.truth.as_ref().map(|_| truth_position.is_some());
        report.dictionary = Some(DictionaryOutput {
            entries_considered: ranked.len(),
            target_key_set: keys_string(&target),
            truth_position,
            top_n,
            top_k: ranked.into_iter().take(a.top_k).collect(),
        });
        return finish(g, &report, None);
    }

    let predictions = predictions.unwrap_or_else(|| vec![PredictionList::uniform(&alphabet()); length]);
    let bonus = if a.bonus {
        let timings = segments
            .as_ref()
            .map(|s| s.timings.clone())
            .context("--bonus needs keystroke timings from --segments")?;
        let rule = AdditiveBonus::default();
        report.bonus = Some(BonusSummary {
            threshold: a.threshold,
            ldv_increment: rule.ldv_increment,
            probability_increment: rule.probability_increment,
        });
        Some(TimingBonus {
            timings,
            threshold: a.threshold,
            rule: std::sync::Arc::new(rule),
        })
    } else {
        None
    };
    let spec = SearchSpaceSpec::with_mode(key_set, length, report.space_mode)?;
    let truth = a.truth.as_deref().unwrap_or("");
    let ranking = rank_passwords(&spec, &predictions, a.method, bonus.as_ref(), truth, a.top_k)?;
    report.truth_in_space = a.truth.as_ref().map(|_| ranking.truth_in_space());

    if a.all_scores {
        let path = out_path(g, "scores.csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["candidate", "score", "bonus_applied"])?;
        for s in score_space(&spec, &predictions, a.method, bonus.as_ref())? {
            w.write_record([s.candidate, s.score.to_string(), s.bonus_applied.to_string()])?;
        }
        w.flush()?;
    }
    let output = RankingOutput::from(ranking);
    report.ranking = Some(output.clone());
    finish(g, &report, Some(&output))
}

#[derive(Serialize)]
struct TopRow<'a> {
    rank: usize,
    candidate: &'a str,
    score: f64,
    bonus_applied: usize,
}

/// Writes the report (and ranking files) and picks the exit code.
fn finish(g: &Global, report: &Report, ranking: Option<&RankingOutput>) -> anyhow::Result<u8> {
    let path = out_path(g, "report.json");
    std::fs::write(&path, report.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    if let Some(r) = ranking {
        formats::write_json(&out_path(g, "ranking.json"), r)?;
        if g.format == Format::Csv {
            let rows: Vec<TopRow> = r
                .top_k
                .iter()
                .enumerate()
                .map(|(i, s)| TopRow {
                    rank: i + 1,
                    candidate: &s.candidate,
                    score: s.score,
                    bonus_applied: s.bonus_applied,
                })
                .collect();
            write_rows(g, "ranking", &rows)?;
        }
    }
    let mut out = std::io::stdout().lock();
    if let Some(r) = ranking {
        writeln!(out, "search space: {} candidates", r.space_size)?;
        for (i, s) in r.top_k.iter().take(5).enumerate() {
            writeln!(out, "  {:>2}. {} ({})", i + 1, s.candidate, s.score)?;
        }
        if let (Some(rank), Some(reduction)) = (r.rank, r.reduction) {
            writeln!(out, "truth rank {rank}, reduction {reduction:.4}")?;
        }
    }
    if let Some(d) = &report.dictionary {
        writeln!(out, "{} dictionary entries of length {}", d.entries_considered, report.acoustic_length)?;
        for e in d.top_k.iter().take(5) {
            writeln!(out, "  {} (distance {})", e.password, e.distance)?;
        }
        if let Some(p) = d.truth_position {
            writeln!(out, "truth at position {p}")?;
        }
    }
    if report.truth_in_space == Some(false) {
        eprintln!("truth outside the search space");
        return Ok(EXIT_ANALYSIS);
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub scenario: ScenarioOverrides,
    #[arg(long, default_value = "mult-prob")]
    pub method: ScoringMethod,
    #[arg(long)]
    pub bonus: bool,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

fn report(g: &Global, a: &ReportArgs) -> anyhow::Result<u8> {
    let sc = scenario(g, &a.scenario)?;
    let layout = sc.layout()?;
    let camera = sc.camera()?;
    let session = simulate_session(&sc.password, sc.style, &layout, &sc.cadence, &sc.environment)?;
    let state = thermal_state_at(&session, &layout, session.entry_end() + sc.capture_delay, &sc.keycap, &sc.environment)?;
    let key_set = extract_hot_keys(&state, &camera);

    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let synth_cfg = SynthConfig::default();
    let pipeline = PipelineConfig::default();
    let keys = alphabet();
    let snr = Some(sc.snr_db);
    let per_key = sc.training_per_key;
    let hp = synth::keystroke_corpus(&keys, per_key, TypingStyle::HuntAndPeck, snr, &synth_cfg, &pipeline, &sc.layout, &mut rng)?;
    let tt = synth::keystroke_corpus(&keys, per_key, TypingStyle::TouchTyping, snr, &synth_cfg, &pipeline, &sc.layout, &mut rng)?;
    let model = classify::train(
        &TrainingCorpus::combined(hp, tt)?,
        &Hyperparameters {
            seed: g.seed,
            ..Hyperparameters::default()
        },
    )?;

    let rec = synth::typing_recording(&sc.password, sc.style, sc.cadence.interval, snr, &synth_cfg, &mut rng)?;
    let strokes = process_recording(&rec.clip, &pipeline)?;
    let predictions = strokes
        .iter()
        .map(|s| predict(&model, &s.features))
        .collect::<keyheat_core::Result<Vec<_>>>()?;
    let timings: Vec<f64> = strokes.windows(2).map(|w| w[1].press_time - w[0].press_time).collect();

    let mut report = Report {
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: Some(sc.clone()),
        constants: Constants::new(&sc.keycap, &sc.environment, &camera, &pipeline.detector, SAME_KEY_THRESHOLD)?,
        thermal_key_set: keys_string(&key_set),
        acoustic_length: strokes.len(),
        predictions: summarize(&predictions, 3),
        timings: timings.clone(),
        method: a.method,
        bonus: None,
        space_mode: SpaceMode::Exact,
        truth: Some(sc.password.clone()),
        truth_in_space: Some(false),
        ranking: None,
        dictionary: None,
    };
    let bonus = a.bonus.then(|| {
        let rule = AdditiveBonus::default();
        report.bonus = Some(BonusSummary {
            threshold: SAME_KEY_THRESHOLD,
            ldv_increment: rule.ldv_increment,
            probability_increment: rule.probability_increment,
        });
        TimingBonus::new(timings)
    });
    if !key_set.is_empty() && !strokes.is_empty() {
        let spec = SearchSpaceSpec::new(key_set, strokes.len())?;
        let ranking = rank_passwords(&spec, &predictions, a.method, bonus.as_ref(), &sc.password, a.top_k)?;
        report.truth_in_space = Some(ranking.truth_in_space());
        let output = RankingOutput::from(ranking);
        report.ranking = Some(output.clone());
        return finish(g, &report, Some(&output));
    }
    finish(g, &report, None)
}
