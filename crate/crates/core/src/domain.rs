//! CSV domain bundles: a training and a test model set sharing states,
//! actions, initial distribution and discount.
//!
//! A bundle directory holds
//!
//! ```text
//! training.csv, test.csv   idstatefrom,idaction,idstateto,idoutcome,probability,reward
//! initial.csv              idstate,probability
//! parameters.csv           parameter,value
//! ```
//!
//! `idoutcome` is the model id. Rewards attached to transitions are collapsed
//! to expected immediate rewards on load.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Mmdp, Model, ModelError, PROBABILITY_TOLERANCE};

/// Row sums further than this from one are rejected.
pub const LOAD_TOLERANCE: f64 = 1e-6;

const MODEL_COLUMNS: [&str; 6] = [
    "idstatefrom",
    "idaction",
    "idstateto",
    "idoutcome",
    "probability",
    "reward",
];
const INITIAL_COLUMNS: [&str; 2] = ["idstate", "probability"];
const PARAMETER_COLUMNS: [&str; 2] = ["parameter", "value"];

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    Index { path: PathBuf, message: String },
    #[error("{path}: probabilities of (model {model}, state {state}, action {action}) sum to {sum}")]
    Probability {
        path: PathBuf,
        model: usize,
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("{path}: initial distribution sums to {sum}")]
    InitialSum { path: PathBuf, sum: f64 },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

impl LoadError {
    /// Whether the failure is about reaching the files rather than their
    /// contents.
    pub fn is_io(&self) -> bool {
        match self {
            Self::MissingFile(_) | Self::Io { .. } => true,
            Self::Csv { source, .. } => matches!(source.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DomainBundle {
    /// Models used to compute policies.
    pub training: Mmdp,
    /// Held-out models used to evaluate them.
    pub test: Mmdp,
    /// Non-fatal findings such as unknown parameters.
    pub warnings: Vec<String>,
}

struct Table {
    path: PathBuf,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path, columns: &[&str]) -> Result<Table, LoadError> {
    let file = match File::open(path) {
        Ok(file) => file,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(LoadError::MissingFile(path.to_path_buf())),
        Err(source) => {
            return Err(LoadError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let csv_err = |source| LoadError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let schema = |message: String| LoadError::Schema {
        path: path.to_path_buf(),
        message,
    };
    for name in &header {
        if !columns.contains(&name.as_str()) {
            return Err(schema(format!("unknown column '{name}'")));
        }
    }
    let mut order = Vec::with_capacity(columns.len());
    for column in columns {
        match header.iter().position(|h| h == column) {
            Some(i) => order.push(i),
            None => return Err(schema(format!("missing column '{column}'"))),
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((
            line,
            order.iter().map(|&i| record.get(i).unwrap_or("").to_string()).collect(),
        ));
    }
    Ok(Table {
        path: path.to_path_buf(),
        rows,
    })
}

impl Table {
    fn parse_error(&self, line: u64, message: String) -> LoadError {
        LoadError::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn id(&self, line: u64, field: &str, name: &str) -> Result<usize, LoadError> {
        let value: i64 = field
            .parse()
            .map_err(|_| self.parse_error(line, format!("{name} '{field}' is not an integer")))?;
        usize::try_from(value).map_err(|_| LoadError::Index {
            path: self.path.clone(),
            message: format!("line {line}: negative {name} {value}"),
        })
    }

    fn real(&self, line: u64, field: &str, name: &str) -> Result<f64, LoadError> {
        match field.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.parse_error(line, format!("{name} '{field}' is not a finite number"))),
        }
    }
}

struct Entry {
    from: usize,
    action: usize,
    to: usize,
    model: usize,
    prob: f64,
    reward: f64,
}

fn parse_models(table: &Table) -> Result<Vec<Entry>, LoadError> {
    table
        .rows
        .iter()
        .map(|(line, f)| {
            Ok(Entry {
                from: table.id(*line, &f[0], "idstatefrom")?,
                action: table.id(*line, &f[1], "idaction")?,
                to: table.id(*line, &f[2], "idstateto")?,
                model: table.id(*line, &f[3], "idoutcome")?,
                prob: table.real(*line, &f[4], "probability")?,
                reward: table.real(*line, &f[5], "reward")?,
            })
        })
        .collect()
}

fn build_models(path: &Path, entries: &[Entry], n_states: usize, n_actions: usize) -> Result<Vec<Model>, LoadError> {
    let n_models = entries.iter().map(|e| e.model + 1).max().unwrap_or(0);
    if n_models == 0 {
        return Err(LoadError::Schema {
            path: path.to_path_buf(),
            message: "no transitions".into(),
        });
    }
    let mut seen = vec![false; n_models];
    for e in entries {
        seen[e.model] = true;
    }
    if let Some(gap) = seen.iter().position(|s| !s) {
        return Err(LoadError::Index {
            path: path.to_path_buf(),
            message: format!("model ids are not contiguous: {gap} is missing"),
        });
    }

    let width = n_states * n_actions;
    let mut rows = vec![vec![Vec::new(); width]; n_models];
    let mut expected = vec![vec![0.0; width]; n_models];
    for e in entries {
        if e.prob < 0.0 {
            return Err(LoadError::Probability {
                path: path.to_path_buf(),
                model: e.model,
                state: e.from,
                action: e.action,
                sum: e.prob,
            });
        }
        let k = e.from * n_actions + e.action;
        rows[e.model][k].push((e.to, e.prob));
        expected[e.model][k] += e.prob * e.reward;
    }

    let mut models = Vec::with_capacity(n_models);
    for (m, (mut model_rows, mut reward)) in rows.into_iter().zip(expected).enumerate() {
        for (k, row) in model_rows.iter_mut().enumerate() {
            if row.is_empty() {
                continue;
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > LOAD_TOLERANCE {
                return Err(LoadError::Probability {
                    path: path.to_path_buf(),
                    model: m,
                    state: k / n_actions,
                    action: k % n_actions,
                    sum,
                });
            }
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                for (_, p) in row.iter_mut() {
                    *p /= sum;
                }
                reward[k] /= sum;
            }
        }
        let model = Model::from_rows(n_states, n_actions, model_rows, reward).map_err(|source| LoadError::Model {
            path: path.to_path_buf(),
            source: with_model_index(source, m),
        })?;
        models.push(model);
    }
    Ok(models)
}

fn with_model_index(error: ModelError, m: usize) -> ModelError {
    match error {
        ModelError::StateOutOfRange {
            state, action, next, ..
        } => ModelError::StateOutOfRange {
            model: m,
            state,
            action,
            next,
        },
        ModelError::MissingRow { state, action, .. } => ModelError::MissingRow {
            model: m,
            state,
            action,
        },
        other => other,
    }
}

fn parse_initial(table: &Table, n_states: usize) -> Result<Vec<f64>, LoadError> {
    let mut initial = vec![0.0; n_states];
    for (line, f) in &table.rows {
        let s = table.id(*line, &f[0], "idstate")?;
        let p = table.real(*line, &f[1], "probability")?;
        if p < 0.0 {
            return Err(table.parse_error(*line, format!("negative probability {p}")));
        }
        initial[s] += p;
    }
    let sum: f64 = initial.iter().sum();
    if (sum - 1.0).abs() > LOAD_TOLERANCE {
        return Err(LoadError::InitialSum {
            path: table.path.clone(),
            sum,
        });
    }
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        initial.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(initial)
}

fn parse_parameters(table: &Table, warnings: &mut Vec<String>) -> Result<f64, LoadError> {
    let mut discount = None;
    for (line, f) in &table.rows {
        match f[0].as_str() {
            "discount" => {
                let gamma = table.real(*line, &f[1], "discount")?;
                if !(0.0..=1.0).contains(&gamma) {
                    return Err(table.parse_error(*line, format!("discount {gamma} outside [0, 1]")));
                }
                discount = Some(gamma);
            }
            other => {
                let message = format!("{}: ignoring unknown parameter '{other}'", table.path.display());
                log::warn!("{message}");
                warnings.push(message);
            }
        }
    }
    Ok(discount.unwrap_or_else(|| {
        let message = format!("{}: no discount given, using 1", table.path.display());
        log::warn!("{message}");
        warnings.push(message);
        1.0
    }))
}

/// Reads and validates a bundle directory. Model weights are uniform.
/// Probability rows within [`LOAD_TOLERANCE`] of one are renormalized.
pub fn load_domain(dir: &Path, horizon: usize) -> Result<DomainBundle, LoadError> {
    if horizon == 0 {
        return Err(LoadError::Inconsistent("horizon must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let parameters = read_table(&dir.join("parameters.csv"), &PARAMETER_COLUMNS)?;
    let initial_table = read_table(&dir.join("initial.csv"), &INITIAL_COLUMNS)?;
    let training_table = read_table(&dir.join("training.csv"), &MODEL_COLUMNS)?;
    let test_table = read_table(&dir.join("test.csv"), &MODEL_COLUMNS)?;

    let discount = parse_parameters(&parameters, &mut warnings)?;
    let training_entries = parse_models(&training_table)?;
    let test_entries = parse_models(&test_table)?;

    let mut n_states = 0;
    let mut n_actions = 0;
    for e in training_entries.iter().chain(&test_entries) {
        n_states = n_states.max(e.from + 1).max(e.to + 1);
        n_actions = n_actions.max(e.action + 1);
    }
    for (line, f) in &initial_table.rows {
        n_states = n_states.max(initial_table.id(*line, &f[0], "idstate")? + 1);
    }
    if n_states == 0 || n_actions == 0 {
        return Err(LoadError::Inconsistent("no states or actions found".into()));
    }

    let initial = parse_initial(&initial_table, n_states)?;
    let training_models = build_models(&training_table.path, &training_entries, n_states, n_actions)?;
    let test_models = build_models(&test_table.path, &test_entries, n_states, n_actions)?;

    let assemble = |path: &Path, models: Vec<Model>| {
        Mmdp::with_uniform_weights(horizon, models, initial.clone(), discount).map_err(|source| LoadError::Model {
            path: path.to_path_buf(),
            source,
        })
    };
    let training = assemble(&training_table.path, training_models)?;
    let test = assemble(&test_table.path, test_models)?;
    for (name, mmdp) in [("training", &training), ("test", &test)] {
        let report = mmdp.validate();
        if !report.is_empty() {
            return Err(LoadError::Inconsistent(format!("{name} set: {report}")));
        }
    }
    log::info!(
        "loaded {}: S={n_states} A={n_actions} training M={} test M={} discount={discount}",
        dir.display(),
        training.n_models(),
        test.n_models()
    );
    Ok(DomainBundle {
        training,
        test,
        warnings,
    })
}

fn write_models(path: &Path, mmdp: &Mmdp) -> Result<(), LoadError> {
    let csv_err = |source| LoadError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut out = csv::Writer::from_path(path).map_err(csv_err)?;
    out.write_record(MODEL_COLUMNS).map_err(csv_err)?;
    for (m, model) in mmdp.models().iter().enumerate() {
        for s in 0..mmdp.n_states() {
            for a in 0..mmdp.n_actions() {
                let (succ, prob) = model.row(s, a);
                let reward = model.reward(s, a);
                for (next, p) in succ.iter().zip(prob) {
                    out.write_record([
                        s.to_string(),
                        a.to_string(),
                        next.to_string(),
                        m.to_string(),
                        p.to_string(),
                        reward.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    out.flush().map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a bundle in the format [`load_domain`] reads. Every transition
/// out of `(s, a)` carries the expected reward of `(s, a)`, so loading it back
/// gives the same rewards.
pub fn write_domain(dir: &Path, training: &Mmdp, test: &Mmdp) -> Result<(), LoadError> {
    if training.n_states() != test.n_states()
        || training.n_actions() != test.n_actions()
        || training.initial() != test.initial()
        || training.discount() != test.discount()
    {
        return Err(LoadError::Inconsistent(
            "training and test sets must share states, actions, initial distribution and discount".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_models(&dir.join("training.csv"), training)?;
    write_models(&dir.join("test.csv"), test)?;

    let path = dir.join("initial.csv");
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| LoadError::Csv { path, source }
    };
    let mut out = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    out.write_record(INITIAL_COLUMNS).map_err(csv_err(&path))?;
    for (s, p) in training.initial().iter().enumerate() {
        if *p != 0.0 {
            out.write_record([s.to_string(), p.to_string()])
                .map_err(csv_err(&path))?;
        }
    }
    out.flush().map_err(|source| LoadError::Io {
        path: path.clone(),
        source,
    })?;

    let path = dir.join("parameters.csv");
    let mut out = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    out.write_record(PARAMETER_COLUMNS).map_err(csv_err(&path))?;
    out.write_record(["discount".to_string(), training.discount().to_string()])
        .map_err(csv_err(&path))?;
    out.flush().map_err(|source| LoadError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(())
}
