//! CSV, JSON and text renderings of baseline and settlement results.
//!
//! Money and tonnes use two decimals, percent deltas one signed decimal.
//! Output depends only on the input values, so identical runs are byte-identical.

use serde::Serialize;

use crate::scenario::{BaselineResult, DeltaReport, Direction, SettlementReport, SettlementRow};

pub const SETTLEMENT_HEADER: [&str; 7] =
    ["building", "cost_eur", "cost_delta_pct", "cost_direction", "ghg_t", "ghg_delta_pct", "ghg_direction"];
pub const BASELINE_HEADER: [&str; 3] = ["building", "cost_eur", "ghg_t"];
pub const TRACE_HEADER: [&str; 11] = [
    "ts",
    "price_buy",
    "price_sell",
    "gwp_grid",
    "soc",
    "charge",
    "discharge",
    "baseline_load",
    "lec_load",
    "pv",
    "sold",
];
pub const UNDEFINED: &str = "n/a";

/// Fixed decimals with negative zero printed as zero.
pub fn fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn amount(value: f64) -> String {
    fixed(value, 2)
}

/// Signed percent with one decimal, or the undefined marker.
pub fn delta(value: Option<f64>) -> String {
    match value {
        Some(v) => {
            let s = fixed(v, 1);
            if s.starts_with('-') || s == "0.0" {
                s
            } else {
                format!("+{s}")
            }
        }
        None => UNDEFINED.to_string(),
    }
}

/// Space-separated thousands: `50136.45` becomes `50 136.45`.
pub fn group_thousands(number: &str) -> String {
    let (sign, rest) = match number.strip_prefix('-') {
        Some(r) => ("-", r),
        None => ("", number),
    };
    let (int, frac) = match rest.find('.') {
        Some(i) => rest.split_at(i),
        None => (rest, ""),
    };
    let mut grouped = String::with_capacity(int.len() + int.len() / 3);
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(' ');
        }
        grouped.push(c);
    }
    format!("{sign}{grouped}{frac}")
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn baseline_csv(baseline: &BaselineResult) -> String {
    write_csv(
        &BASELINE_HEADER,
        baseline.rows().map(|f| vec![f.id.clone(), amount(f.cost_eur), amount(f.emissions_t)]),
    )
}

fn settlement_record(r: &SettlementRow) -> Vec<String> {
    vec![
        r.id.clone(),
        amount(r.cost_eur),
        delta(r.cost_delta_pct),
        Direction::of(r.cost_delta_pct).arrow().to_string(),
        amount(r.emissions_t),
        delta(r.emissions_delta_pct),
        Direction::of(r.emissions_delta_pct).arrow().to_string(),
    ]
}

/// Participants then the community totals row.
pub fn settlement_csv(report: &SettlementReport) -> String {
    write_csv(&SETTLEMENT_HEADER, report.rows().map(settlement_record))
}

pub fn delta_csv(report: &DeltaReport) -> String {
    let rows = report.participants.iter().chain(std::iter::once(&report.total)).map(|r| {
        vec![
            r.id.clone(),
            delta(r.cost_delta_pct),
            r.cost_direction.arrow().to_string(),
            delta(r.emissions_delta_pct),
            r.emissions_direction.arrow().to_string(),
        ]
    });
    write_csv(&["building", "cost_delta_pct", "cost_direction", "ghg_delta_pct", "ghg_direction"], rows)
}

/// One row per hour for the price, battery, consumption and generation panels.
pub fn trace_csv(report: &SettlementReport) -> String {
    let rows = report.hours.iter().map(|h| {
        let mut row = vec![h.ts.clone()];
        row.extend(
            [
                h.price_buy,
                h.price_sell,
                h.gwp_grid,
                h.soc,
                h.charge,
                h.discharge,
                h.baseline_load,
                h.lec_load,
                h.pv,
                h.sold,
            ]
            .iter()
            .map(|&v| fixed(v, 4)),
        );
        row
    });
    write_csv(&TRACE_HEADER, rows)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn settlement_from_json(text: &str) -> Result<SettlementReport, serde_json::Error> {
    serde_json::from_str(text)
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let width = |i: usize| {
        rows.iter().map(|r| r[i].chars().count()).chain(std::iter::once(header[i].chars().count())).max().unwrap_or(0)
    };
    let widths: Vec<usize> = (0..header.len()).map(width).collect();
    let line = |cells: &[String]| {
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate() {
            let pad = widths[i] - cell.chars().count();
            if i == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str("  ");
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        out.push('\n');
        out
    };
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)) + "\n";
    let mut out = line(&header);
    out.push_str(&rule);
    let (body, total) = rows.split_at(rows.len().saturating_sub(1));
    for row in body {
        out.push_str(&line(row));
    }
    out.push_str(&rule);
    for row in total {
        out.push_str(&line(row));
    }
    out
}

fn arrowed(value: Option<f64>) -> String {
    match value {
        None => UNDEFINED.to_string(),
        Some(v) => {
            let arrow = Direction::of(Some(v)).arrow();
            format!("{arrow} {}%", fixed(v.abs(), 1))
        }
    }
}

pub fn baseline_table(baseline: &BaselineResult) -> String {
    let rows: Vec<Vec<String>> = baseline
        .rows()
        .map(|f| vec![f.id.clone(), group_thousands(&amount(f.cost_eur)), group_thousands(&amount(f.emissions_t))])
        .collect();
    render_table(&["Building", "Total cost (€)", "Total GHG (t CO2-eq)"], &rows)
}

pub fn settlement_table(report: &SettlementReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows()
        .map(|r| {
            vec![
                r.id.clone(),
                group_thousands(&amount(r.cost_eur)),
                arrowed(r.cost_delta_pct),
                group_thousands(&amount(r.emissions_t)),
                arrowed(r.emissions_delta_pct),
            ]
        })
        .collect();
    let title = format!("{} scenario\n", report.scenario);
    title + &render_table(&["Building", "Total cost (€)", "vs baseline", "Total GHG (t CO2-eq)", "vs baseline"], &rows)
}
