//! Solve on the training models, evaluate on the test models, tabulate.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, monte_carlo_eval, monte_carlo_oracle};
use crate::bandit::{mixts_run_with_prior, LikelihoodModel, MixtsConfig};
use crate::domain::DomainBundle;
use crate::dp::{solve_cadp, solve_mvp, solve_wsu, CadpConfig, SolveReport};
use crate::error::MmdpError;
use crate::gradient::{solve_first_order, FirstOrderConfig};
use crate::model::Mmdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mvp,
    Wsu,
    Cadp,
    Mirror,
    Gradient,
    Mixts,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Mvp,
        Algorithm::Wsu,
        Algorithm::Cadp,
        Algorithm::Mirror,
        Algorithm::Gradient,
        Algorithm::Mixts,
        Algorithm::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mvp => "mvp",
            Self::Wsu => "wsu",
            Self::Cadp => "cadp",
            Self::Mirror => "mirror",
            Self::Gradient => "gradient",
            Self::Mixts => "mixts",
            Self::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub algorithms: Vec<Algorithm>,
    /// Monte-Carlo episodes per row.
    pub episodes: usize,
    pub seed: u64,
    pub cadp: CadpConfig,
    pub mirror: FirstOrderConfig,
    pub gradient: FirstOrderConfig,
    /// Thompson-sampling episodes per test model.
    pub mixts_episodes: usize,
    pub likelihood_floor: f64,
    pub likelihood: LikelihoodModel,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            episodes: 10_000,
            seed: 0,
            cadp: CadpConfig::default(),
            mirror: FirstOrderConfig::mirror(),
            gradient: FirstOrderConfig::projected(),
            mixts_episodes: 20,
            likelihood_floor: 1e-6,
            likelihood: LikelihoodModel::Rewards,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    /// Exact mean return on the test models.
    pub mean_return: Option<f64>,
    /// Monte-Carlo standard deviation of episode returns on the test models.
    pub std_return: Option<f64>,
    /// Time spent solving on the training models.
    pub wall_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Md,
    Json,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "md" => Ok(Self::Md),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format '{other}', expected csv, md or json")),
        }
    }
}

fn cell(x: Option<f64>, precision: usize) -> String {
    x.map_or_else(|| "--".to_string(), |v| format!("{v:.precision$}"))
}

impl ComparisonTable {
    pub fn row(&self, algorithm: Algorithm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }

    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => {
                let mut out = String::from("algorithm,mean_return,std_return,wall_time_s\n");
                for r in &self.rows {
                    let full = |x: Option<f64>| x.map_or_else(|| "--".to_string(), |v| v.to_string());
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        r.algorithm,
                        full(r.mean_return),
                        full(r.std_return),
                        full(r.wall_time_s)
                    );
                }
                out
            }
            TableFormat::Md => {
                let cells: Vec<[String; 4]> = self
                    .rows
                    .iter()
                    .map(|r| {
                        [
                            r.algorithm.to_string(),
                            cell(r.mean_return, 3),
                            cell(r.std_return, 3),
                            cell(r.wall_time_s, 4),
                        ]
                    })
                    .collect();
                let header = ["algorithm", "mean_return", "std_return", "wall_time_s"];
                let mut widths = header.map(str::len);
                for row in &cells {
                    for (w, c) in widths.iter_mut().zip(row) {
                        *w = (*w).max(c.len());
                    }
                }
                let mut out = String::new();
                let _ = writeln!(
                    out,
                    "| {:<w0$} | {:>w1$} | {:>w2$} | {:>w3$} |",
                    header[0],
                    header[1],
                    header[2],
                    header[3],
                    w0 = widths[0],
                    w1 = widths[1],
                    w2 = widths[2],
                    w3 = widths[3]
                );
                let _ = writeln!(
                    out,
                    "|:{}|{}:|{}:|{}:|",
                    "-".repeat(widths[0] + 1),
                    "-".repeat(widths[1] + 1),
                    "-".repeat(widths[2] + 1),
                    "-".repeat(widths[3] + 1)
                );
                for row in &cells {
                    let _ = writeln!(
                        out,
                        "| {:<w0$} | {:>w1$} | {:>w2$} | {:>w3$} |",
                        row[0],
                        row[1],
                        row[2],
                        row[3],
                        w0 = widths[0],
                        w1 = widths[1],
                        w2 = widths[2],
                        w3 = widths[3]
                    );
                }
                out
            }
            TableFormat::Json => serde_json::to_string_pretty(self).expect("table serializes") + "\n",
        }
    }
}

struct RowResult {
    mean: f64,
    std: f64,
    wall: f64,
}

fn policy_row(report: SolveReport, test: &Mmdp, config: &CompareConfig) -> Result<RowResult, MmdpError> {
    let eval = monte_carlo_eval(test, &report.policy, config.episodes, config.seed)?;
    Ok(RowResult {
        mean: eval.mean_return,
        std: eval.mc_std,
        wall: report.wall_time.as_secs_f64(),
    })
}

/// Each test model in turn is the truth; the training models are the
/// hypotheses. The mean is over the exact returns of the policies played,
/// the spread over realized episode returns.
fn mixts_row(training: &Mmdp, test: &Mmdp, config: &CompareConfig) -> Result<RowResult, MmdpError> {
    let started = Instant::now();
    let runs = (0..test.n_models())
        .into_par_iter()
        .map(|m| {
            let mixts = MixtsConfig {
                episodes: config.mixts_episodes,
                seed: config.seed.wrapping_add(m as u64),
                likelihood_floor: config.likelihood_floor,
                likelihood: config.likelihood,
                true_model: Some(m),
            };
            mixts_run_with_prior(training, test, &mixts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let wall = started.elapsed().as_secs_f64();
    let mut mean = 0.0;
    let mut totals = Vec::new();
    for (run, lambda) in runs.iter().zip(test.weights()) {
        let n = run.episodes.len() as f64;
        mean += lambda * run.episodes.iter().map(|e| e.expected_return).sum::<f64>() / n;
        totals.extend(run.episodes.iter().map(|e| e.total));
    }
    Ok(RowResult {
        mean,
        std: mean_std(&totals).1,
        wall,
    })
}

fn run_row(algorithm: Algorithm, training: &Mmdp, test: &Mmdp, config: &CompareConfig) -> Result<RowResult, MmdpError> {
    match algorithm {
        Algorithm::Mvp => policy_row(solve_mvp(training)?, test, config),
        Algorithm::Wsu => policy_row(solve_wsu(training)?, test, config),
        Algorithm::Cadp => policy_row(solve_cadp(training, &config.cadp)?, test, config),
        Algorithm::Mirror => policy_row(solve_first_order(training, &config.mirror)?, test, config),
        Algorithm::Gradient => policy_row(solve_first_order(training, &config.gradient)?, test, config),
        Algorithm::Mixts => mixts_row(training, test, config),
        Algorithm::Oracle => {
            let started = Instant::now();
            let eval = monte_carlo_oracle(test, config.episodes, config.seed)?;
            Ok(RowResult {
                mean: eval.mean_return,
                std: eval.mc_std,
                wall: started.elapsed().as_secs_f64(),
            })
        }
    }
}

/// Runs every requested algorithm at `horizon` with discounting folded into
/// the rewards. A failing row is reported and the others still run.
pub fn compare(bundle: &DomainBundle, horizon: usize, config: &CompareConfig) -> Result<ComparisonTable, MmdpError> {
    let training = bundle.training.with_horizon(horizon)?.fold_discount();
    let test = bundle.test.with_horizon(horizon)?.fold_discount();
    let rows = config
        .algorithms
        .par_iter()
        .map(|&algorithm| match run_row(algorithm, &training, &test, config) {
            Ok(r) => ComparisonRow {
                algorithm,
                mean_return: Some(r.mean),
                std_return: Some(r.std),
                wall_time_s: Some(r.wall),
                error: None,
            },
            Err(e) => {
                log::warn!("{algorithm} failed: {e}");
                ComparisonRow {
                    algorithm,
                    mean_return: None,
                    std_return: None,
                    wall_time_s: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    Ok(ComparisonTable {
        horizon,
        episodes: config.episodes,
        seed: config.seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::fixtures::e1;
    use crate::eval::random_instance;

    fn quick(algorithms: Vec<Algorithm>) -> CompareConfig {
        CompareConfig {
            algorithms,
            episodes: 200,
            ..CompareConfig::default()
        }
    }

    #[test]
    fn e1_bundle_ordering() {
        let bundle = DomainBundle {
            training: e1(),
            test: e1(),
            warnings: Vec::new(),
        };
        let table = compare(&bundle, 2, &quick(Algorithm::ALL.to_vec())).unwrap();
        let mean = |a| table.row(a).unwrap().mean_return.unwrap();
        assert!((mean(Algorithm::Oracle) - 1.9).abs() < 1e-12);
        assert!(mean(Algorithm::Cadp) >= mean(Algorithm::Wsu) - 1e-12);
        assert!(mean(Algorithm::Wsu) >= mean(Algorithm::Mvp) - 1e-12);
        assert!((mean(Algorithm::Cadp) - 1.4).abs() < 1e-12);
        for row in &table.rows {
            assert!(row.mean_return.unwrap() <= mean(Algorithm::Oracle) + 1e-6);
        }
    }

    #[test]
    fn single_model_rows_agree() {
        let mmdp = random_instance(4, 2, 1, 4, 3, 0.8);
        let bundle = DomainBundle {
            training: mmdp.clone(),
            test: mmdp,
            warnings: Vec::new(),
        };
        let table = compare(
            &bundle,
            4,
            &quick(vec![Algorithm::Mvp, Algorithm::Wsu, Algorithm::Cadp, Algorithm::Oracle]),
        )
        .unwrap();
        let first = table.rows[0].mean_return.unwrap();
        for row in &table.rows {
            assert!((row.mean_return.unwrap() - first).abs() < 1e-9);
        }
    }

    #[test]
    fn failed_rows_render_as_dashes() {
        let bundle = DomainBundle {
            training: e1(),
            test: e1(),
            warnings: Vec::new(),
        };
        let mut config = quick(vec![Algorithm::Cadp, Algorithm::Wsu]);
        config.cadp.max_iters = 0;
        let table = compare(&bundle, 2, &config).unwrap();
        assert!(table.rows[0].error.is_some());
        let csv = table.render(TableFormat::Csv);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("algorithm,mean_return,std_return,wall_time_s"));
        assert_eq!(lines.next(), Some("cadp,--,--,--"));
        assert!(lines.next().unwrap().starts_with("wsu,1.4,"));
        assert!(table.render(TableFormat::Md).contains("| cadp"));
        let json: serde_json::Value = serde_json::from_str(&table.render(TableFormat::Json)).unwrap();
        assert_eq!(json["rows"][1]["algorithm"], "wsu");
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("qmdp".parse::<Algorithm>().is_err());
    }
}
