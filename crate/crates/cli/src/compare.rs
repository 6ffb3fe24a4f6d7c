//! The `compare` command: aggregate finished runs into a table grouped by
//! (algorithm, budget), plus an optional best-so-far chart.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::output::{write_atomic, Summary};
use crate::CliError;

struct LoadedRun {
    dir: PathBuf,
    summary: Summary,
}

#[derive(Debug, PartialEq)]
struct GroupRow {
    algorithm: String,
    budget: usize,
    n_runs: usize,
    n_feasible: usize,
    median_best: Option<f64>,
    min_best: Option<f64>,
}

pub fn cmd_compare(run_dirs: &[PathBuf], out: &Path, chart: bool) -> Result<(), CliError> {
    if run_dirs.len() < 2 {
        return Err(CliError::Config(format!(
            "compare needs at least two run directories, got {}",
            run_dirs.len()
        )));
    }
    let runs = load_runs(run_dirs)?;
    let rows = group_rows(&runs);

    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("create {}: {e}", out.display())))?;
    write_atomic(&out.join("comparison.csv"), rows_csv(&rows).as_bytes())?;
    let table = rows_text(&rows);
    write_atomic(&out.join("comparison.txt"), table.as_bytes())?;
    print!("{table}");

    if chart {
        let series = load_series(&runs)?;
        write_atomic(&out.join("convergence.svg"), chart_svg(&series).as_bytes())?;
    }
    Ok(())
}

fn load_runs(run_dirs: &[PathBuf]) -> Result<Vec<LoadedRun>, CliError> {
    let mut missing = Vec::new();
    let mut runs = Vec::new();
    for dir in run_dirs {
        let path = dir.join("summary.json");
        match fs::read_to_string(&path) {
            Ok(text) => {
                let summary: Summary = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("parse {}: {e}", path.display())))?;
                runs.push(LoadedRun { dir: dir.clone(), summary });
            }
            Err(_) => missing.push(path.display().to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Config(format!("missing summaries: {}", missing.join(", "))));
    }
    Ok(runs)
}

/// Median of an unsorted sample; even counts average the middle pair.
fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

fn group_rows(runs: &[LoadedRun]) -> Vec<GroupRow> {
    let mut keys: Vec<(String, usize)> = runs
        .iter()
        .map(|r| (r.summary.algorithm.clone(), r.summary.budget))
        .collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|(algorithm, budget)| {
            let group: Vec<&LoadedRun> = runs
                .iter()
                .filter(|r| &r.summary.algorithm == algorithm && r.summary.budget == *budget)
                .collect();
            let bests: Vec<f64> =
                group.iter().filter_map(|r| r.summary.best_objective).collect();
            GroupRow {
                algorithm: algorithm.clone(),
                budget: *budget,
                n_runs: group.len(),
                n_feasible: bests.len(),
                median_best: median(&bests),
                min_best: bests.iter().copied().reduce(f64::min),
            }
        })
        .collect()
}

fn rows_csv(rows: &[GroupRow]) -> String {
    let mut out = String::from("algorithm,budget,n_runs,n_feasible,median_best,min_best\n");
    for row in rows {
        let median = row.median_best.map(|v| v.to_string()).unwrap_or_default();
        let min = row.min_best.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{median},{min}",
            row.algorithm, row.budget, row.n_runs, row.n_feasible
        );
    }
    out
}

fn rows_text(rows: &[GroupRow]) -> String {
    let headers = ["algorithm", "budget", "n_runs", "n_feasible", "median_best", "min_best"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|row| {
            [
                row.algorithm.clone(),
                row.budget.to_string(),
                row.n_runs.to_string(),
                row.n_feasible.to_string(),
                row.median_best.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string()),
                row.min_best.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string()),
            ]
        })
        .collect();
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| cells.iter().map(|row| row[i].len()).chain([h.len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    for (i, header) in headers.iter().enumerate() {
        let sep = if i + 1 == headers.len() { "\n" } else { "  " };
        let _ = write!(out, "{header:>width$}{sep}", width = widths[i]);
    }
    for row in &cells {
        for (i, cell) in row.iter().enumerate() {
            let sep = if i + 1 == row.len() { "\n" } else { "  " };
            let _ = write!(out, "{cell:>width$}{sep}", width = widths[i]);
        }
    }
    out
}

struct ChartSeries {
    label: String,
    points: Vec<(f64, f64)>,
}

fn load_series(runs: &[LoadedRun]) -> Result<Vec<ChartSeries>, CliError> {
    let mut series = Vec::new();
    for run in runs {
        let path = run.dir.join("convergence.csv");
        let mut reader = csv::Reader::from_path(&path)
            .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
        let mut points = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
            let index: f64 = row
                .get(0)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Config(format!("bad eval_index in {}", path.display())))?;
            if let Some(best) = row.get(4).and_then(|v| v.parse::<f64>().ok()) {
                points.push((index, best));
            }
        }
        series.push(ChartSeries { label: run.dir.display().to_string(), points });
    }
    Ok(series)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

fn fmt_tick(v: f64) -> String {
    let text = format!("{v:.3}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Best-so-far vs evaluation index, one polyline per run. Runs without a
/// feasible point yet draw an empty polyline so every input stays visible
/// in the file.
fn chart_svg(series: &[ChartSeries]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 72.0;
    const RIGHT: f64 = 16.0;
    const TOP: f64 = 16.0;
    const BOTTOM: f64 = 48.0;

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let x_max = xs.fold(1.0f64, f64::max);
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    let (mut y_min, mut y_max) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let to_x = |v: f64| LEFT + v / x_max * (W - LEFT - RIGHT);
    let to_y = |v: f64| H - BOTTOM - (v - y_min) / (y_max - y_min) * (H - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);

    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let vx = frac * x_max;
        let px = to_x(vx);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{}" stroke="#ddd"/>"##,
            H - BOTTOM
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 18.0,
            fmt_tick(vx)
        );
        let vy = y_min + frac * (y_max - y_min);
        let py = to_y(vy);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ddd"/>"##,
            W - RIGHT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py + 4.0,
            fmt_tick(vy)
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#555"/>"##,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">evaluations</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">best so far</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut coords = String::new();
        for (x, y) in &s.points {
            let _ = write!(coords, "{:.1},{:.1} ", to_x(*x), to_y(*y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{}</title></polyline>"#,
            coords.trim_end(),
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(algorithm: &str, budget: usize, best: Option<f64>) -> Summary {
        Summary {
            problem: "simple-turbofan".to_string(),
            algorithm: algorithm.to_string(),
            budget,
            doe_size: 10,
            seed: 1,
            best_objective: best,
            feasible: best.is_some(),
            n_fe: budget,
            n_failed: 0,
            wall_time: 0.0,
        }
    }

    #[test]
    fn medians_follow_the_textbook_rule() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[5.0, 1.0]), Some(3.0));
        assert_eq!(median(&[9.0, 1.0, 5.0]), Some(5.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 8.0]), Some(3.0));
    }

    #[test]
    fn runs_group_by_algorithm_and_budget() {
        let runs = vec![
            LoadedRun { dir: "a".into(), summary: summary("bo", 60, Some(7.0)) },
            LoadedRun { dir: "b".into(), summary: summary("nsga2", 300, Some(11.0)) },
            LoadedRun { dir: "c".into(), summary: summary("bo", 60, Some(8.0)) },
            LoadedRun { dir: "d".into(), summary: summary("bo", 60, None) },
        ];
        let rows = group_rows(&runs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].algorithm, "bo");
        assert_eq!(rows[0].n_runs, 3);
        assert_eq!(rows[0].n_feasible, 2);
        assert_eq!(rows[0].median_best, Some(7.5));
        assert_eq!(rows[0].min_best, Some(7.0));
        assert_eq!(rows[1].algorithm, "nsga2");
        assert_eq!(rows[1].n_runs, 1);
    }

    #[test]
    fn the_text_table_is_aligned() {
        let rows = vec![
            GroupRow {
                algorithm: "bo".to_string(),
                budget: 60,
                n_runs: 10,
                n_feasible: 10,
                median_best: Some(7.25),
                min_best: Some(6.61),
            },
            GroupRow {
                algorithm: "nsga2".to_string(),
                budget: 300,
                n_runs: 10,
                n_feasible: 9,
                median_best: None,
                min_best: None,
            },
        ];
        let text = rows_text(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let width = lines[0].len();
        assert!(lines.iter().all(|l| l.len() == width), "{text}");
        assert!(lines[1].contains("7.2500"));
        assert!(lines[2].contains("-"));
    }

    #[test]
    fn the_chart_has_one_polyline_per_series() {
        let series = vec![
            ChartSeries { label: "a".to_string(), points: vec![(0.0, 9.0), (1.0, 8.0)] },
            ChartSeries { label: "b".to_string(), points: vec![(0.0, 7.0)] },
            ChartSeries { label: "empty".to_string(), points: vec![] },
        ];
        let svg = chart_svg(&series);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
