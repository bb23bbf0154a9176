//! Per-game evaluation and table aggregation over many trials.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compiler::{compile, CompiledGame};
use crate::grammar::parse_game;
use crate::orchestrator::{GroupKey, TrialRecord};
use crate::solver::{solve_all_levels, LevelReport, SolveResult, SolverConfig};
use crate::source::SourceText;

/// Both thresholds are strict: a level counts when its solution is longer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalThresholds {
    pub any_solvable_min_length: usize,
    pub all_solvable_min_length: usize,
}

impl Default for EvalThresholds {
    fn default() -> Self {
        Self {
            any_solvable_min_length: 1,
            all_solvable_min_length: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level_index: usize,
    #[serde(flatten)]
    pub result: SolveResult,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvalReport {
    pub compiles: bool,
    /// Grid levels only, in level order.
    pub per_level: Vec<LevelResult>,
    pub any_solvable: bool,
    pub all_solvable: bool,
    /// Sum of nodes explored over solved levels.
    pub complexity: u64,
}

impl GameEvalReport {
    pub fn not_compiled() -> Self {
        Self::default()
    }

    pub fn from_levels(levels: &[LevelReport], thresholds: &EvalThresholds) -> Self {
        let per_level: Vec<LevelResult> = levels
            .iter()
            .filter_map(|l| {
                l.result().map(|r| LevelResult {
                    level_index: l.level_index(),
                    result: r.clone(),
                })
            })
            .collect();
        let solved_longer = |l: &LevelResult, min: usize| {
            l.result.is_solved() && l.result.solution_length > min
        };
        let any_solvable = per_level
            .iter()
            .any(|l| solved_longer(l, thresholds.any_solvable_min_length));
        let all_solvable = !per_level.is_empty()
            && per_level
                .iter()
                .all(|l| solved_longer(l, thresholds.all_solvable_min_length));
        let complexity = per_level
            .iter()
            .filter(|l| l.result.is_solved())
            .map(|l| l.result.nodes_explored)
            .sum();
        Self {
            compiles: true,
            per_level,
            any_solvable,
            all_solvable,
            complexity,
        }
    }

    /// One line per grid level, unsolved levels first.
    pub fn feedback_lines(&self) -> Vec<String> {
        let mut levels: Vec<&LevelResult> = self.per_level.iter().collect();
        levels.sort_by_key(|l| (l.result.is_solved(), l.level_index));
        levels
            .iter()
            .map(|l| {
                let mut line = format!(
                    "level {}: {}, length {}, nodes {}",
                    l.level_index, l.result.status, l.result.solution_length, l.result.nodes_explored
                );
                if let Some(detail) = &l.result.detail {
                    line.push_str(&format!(" ({detail})"));
                }
                line
            })
            .collect()
    }
}

pub fn evaluate_game(
    source: &SourceText,
    thresholds: &EvalThresholds,
    solver_config: &SolverConfig,
) -> GameEvalReport {
    let Some(spec) = parse_game(source).spec else {
        return GameEvalReport::not_compiled();
    };
    match compile(&spec).game {
        Some(game) => evaluate_compiled(&game, thresholds, solver_config),
        None => GameEvalReport::not_compiled(),
    }
}

pub fn evaluate_compiled(
    game: &CompiledGame,
    thresholds: &EvalThresholds,
    solver_config: &SolverConfig,
) -> GameEvalReport {
    GameEvalReport::from_levels(&solve_all_levels(game, solver_config), thresholds)
}

/// `(a + b/2) / b` for non-negative integers.
fn div_round(a: u128, b: u128) -> u128 {
    (2 * a + b) / (2 * b)
}

pub fn percent(count: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    div_round(100 * count as u128, total as u128) as u32
}

/// Mean and population standard deviation, each rounded half-up.
pub fn mean_std(values: &[u64]) -> (u64, u64) {
    if values.is_empty() {
        return (0, 0);
    }
    let n = values.len() as u128;
    let sum: u128 = values.iter().map(|&v| v as u128).sum();
    let squares: u128 = values.iter().map(|&v| (v as u128) * (v as u128)).sum();
    let mean = div_round(sum, n) as u64;

    // variance = num / n^2; round sqrt(variance) without floating error:
    // the answer is the largest r with (2r - 1)^2 * n^2 <= 4 * num.
    let num = n * squares - sum * sum;
    let den = n * n;
    let mut r = ((num as f64 / den as f64).sqrt() + 0.5).floor() as u128;
    let fits = |r: u128| r == 0 || (2 * r - 1) * (2 * r - 1) * den <= 4 * num;
    while !fits(r) {
        r -= 1;
    }
    while fits(r + 1) {
        r += 1;
    }
    (mean, r as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub trials: usize,
    pub compiles_pct: u32,
    pub any_solvable_pct: u32,
    pub all_solvable_pct: u32,
    pub complexity_mean: u64,
    pub complexity_std: u64,
}

impl SummaryRow {
    pub fn complexity(&self) -> String {
        format!("{} ± {}", self.complexity_mean, self.complexity_std)
    }

    fn cells(&self) -> [String; 5] {
        [
            self.group.clone(),
            format!("{}%", self.compiles_pct),
            format!("{}%", self.any_solvable_pct),
            format!("{}%", self.all_solvable_pct),
            self.complexity(),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub group_by: String,
    pub rows: Vec<SummaryRow>,
}

const HEADERS: [&str; 5] = ["", "Compiles", "Any Solvable", "All Solvable", "Sol. Complexity"];
const CSV_HEADERS: [&str; 4] = ["compiles", "any_solvable", "all_solvable", "sol_complexity"];

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let key = if self.group_by.is_empty() { "group" } else { &self.group_by };
        let mut header = vec![key];
        header.extend(CSV_HEADERS);
        writer.write_record(&header).expect("in-memory csv");
        for row in &self.rows {
            writer.write_record(row.cells()).expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    pub fn to_text(&self) -> String {
        let mut header = HEADERS.map(String::from);
        header[0] = if self.group_by.is_empty() {
            "Group".into()
        } else {
            self.group_by.clone()
        };
        let rows: Vec<[String; 5]> = std::iter::once(header)
            .chain(self.rows.iter().map(SummaryRow::cells))
            .collect();
        let mut widths = [0usize; 5];
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(col, (cell, w))| {
                    let pad = w - cell.chars().count();
                    if col == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Rows are ordered by group label.
pub fn aggregate_reports<'a>(
    group_by: &str,
    reports: impl IntoIterator<Item = (String, &'a GameEvalReport)>,
) -> SummaryTable {
    let mut groups: BTreeMap<String, Vec<&GameEvalReport>> = BTreeMap::new();
    for (group, report) in reports {
        groups.entry(group).or_default().push(report);
    }
    let rows = groups
        .into_iter()
        .map(|(group, reports)| {
            let n = reports.len();
            let count = |f: fn(&GameEvalReport) -> bool| reports.iter().filter(|r| f(r)).count();
            let complexities: Vec<u64> = reports.iter().map(|r| r.complexity).collect();
            let (complexity_mean, complexity_std) = mean_std(&complexities);
            SummaryRow {
                group,
                trials: n,
                compiles_pct: percent(count(|r| r.compiles), n),
                any_solvable_pct: percent(count(|r| r.any_solvable), n),
                all_solvable_pct: percent(count(|r| r.all_solvable), n),
                complexity_mean,
                complexity_std,
            }
        })
        .collect();
    SummaryTable {
        group_by: group_by.to_string(),
        rows,
    }
}

/// Each trial contributes the report of its last iteration.
pub fn aggregate(trials: &[TrialRecord], keys: &[GroupKey]) -> SummaryTable {
    let label = keys
        .iter()
        .map(|k| k.name())
        .collect::<Vec<_>>()
        .join("/");
    let fallback = GameEvalReport::not_compiled();
    aggregate_reports(
        &label,
        trials
            .iter()
            .map(|t| (t.group_label(keys), t.final_report().unwrap_or(&fallback))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolveStatus;

    fn solved(level_index: usize, length: usize, nodes: u64) -> LevelReport {
        LevelReport::Grid {
            level_index,
            result: SolveResult {
                status: SolveStatus::Solved,
                solution: vec![crate::engine::Action::Right; length],
                solution_length: length,
                nodes_explored: nodes,
                enqueued: nodes,
                detail: None,
            },
        }
    }

    fn unsolved(level_index: usize, nodes: u64) -> LevelReport {
        LevelReport::Grid {
            level_index,
            result: SolveResult {
                status: SolveStatus::BudgetExceeded,
                solution: Vec::new(),
                solution_length: 0,
                nodes_explored: nodes,
                enqueued: nodes,
                detail: None,
            },
        }
    }

    fn report(compiles: bool, complexity: u64) -> GameEvalReport {
        GameEvalReport {
            compiles,
            complexity,
            ..Default::default()
        }
    }

    #[test]
    fn thresholds_are_strict() {
        let t = EvalThresholds::default();
        let r = GameEvalReport::from_levels(&[solved(0, 4, 10), solved(1, 13, 20)], &t);
        assert!(r.any_solvable && !r.all_solvable);
        assert_eq!(r.complexity, 30);
        let r = GameEvalReport::from_levels(&[solved(0, 13, 1), solved(2, 15, 1)], &t);
        assert!(r.all_solvable);
        let r = GameEvalReport::from_levels(&[solved(0, 1, 1), solved(1, 10, 1)], &t);
        assert!(r.any_solvable && !r.all_solvable);
        let r = GameEvalReport::from_levels(&[solved(0, 1, 1)], &t);
        assert!(!r.any_solvable && !r.all_solvable);
    }

    #[test]
    fn no_grid_levels_is_not_all_solvable() {
        let levels = [LevelReport::Message { level_index: 0 }];
        let r = GameEvalReport::from_levels(&levels, &EvalThresholds::default());
        assert!(r.compiles && !r.any_solvable && !r.all_solvable);
        assert_eq!(r.complexity, 0);
    }

    #[test]
    fn unsolved_levels_add_no_complexity() {
        let r = GameEvalReport::from_levels(
            &[solved(0, 12, 7), unsolved(1, 1000)],
            &EvalThresholds::default(),
        );
        assert_eq!(r.complexity, 7);
        assert!(r.any_solvable && !r.all_solvable);
    }

    #[test]
    fn complexity_ignores_level_order() {
        let t = EvalThresholds::default();
        let a = GameEvalReport::from_levels(&[solved(0, 12, 7), solved(1, 3, 5)], &t);
        let b = GameEvalReport::from_levels(&[solved(1, 3, 5), solved(0, 12, 7)], &t);
        assert_eq!(a.complexity, b.complexity);
        assert_eq!((a.any_solvable, a.all_solvable), (b.any_solvable, b.all_solvable));
    }

    #[test]
    fn feedback_lists_broken_levels_first() {
        let r = GameEvalReport::from_levels(
            &[solved(0, 4, 9), unsolved(2, 100)],
            &EvalThresholds::default(),
        );
        assert_eq!(
            r.feedback_lines(),
            [
                "level 2: budget_exceeded, length 0, nodes 100",
                "level 0: solved, length 4, nodes 9"
            ]
        );
    }

    #[test]
    fn rounding() {
        assert_eq!(percent(16, 20), 80);
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(1, 3), 33);
        assert_eq!(percent(0, 0), 0);
        assert_eq!(mean_std(&[13; 20]), (13, 0));
        assert_eq!(mean_std(&[1, 2]), (2, 1));
        assert_eq!(mean_std(&[]), (0, 0));
    }

    #[test]
    fn table_rendering() {
        let mut complexities = vec![0u64; 19];
        complexities.push(260);
        let reports: Vec<GameEvalReport> = complexities
            .iter()
            .enumerate()
            .map(|(i, &c)| report(i < 16, c))
            .collect();
        let table = aggregate_reports("fewshot/cot", reports.iter().map(|r| ("T/T".into(), r)));
        let row = &table.rows[0];
        assert_eq!(row.compiles_pct, 80);
        assert_eq!(row.complexity(), "13 ± 57");
        let text = table.to_text();
        assert!(text.contains("80%") && text.contains("13 ± 57"));
        let csv = table.to_csv();
        assert_eq!(
            csv.lines().next().unwrap(),
            "fewshot/cot,compiles,any_solvable,all_solvable,sol_complexity"
        );
        assert_eq!(csv.lines().nth(1).unwrap(), "T/T,80%,0%,0%,13 ± 57");
    }

    #[test]
    fn empty_input_gives_empty_table() {
        let table = aggregate_reports("x", std::iter::empty());
        assert!(table.rows.is_empty());
    }
}
