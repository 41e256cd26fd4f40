//! Synthetic 48 h community used by end-to-end tests and the bundled CLI
//! example. Not measured data: loads, PV, prices and mix are smooth
//! closed-form shapes around the case-study building and battery sizes.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};

use crate::domain::TIMESTAMP_FORMAT;

pub const HOURS: usize = 48;
pub const IDS: [&str; 4] = ["B1", "B2", "B3", "B4"];
/// Contracted power, kW.
pub const CONTRACTED: [f64; 4] = [70.0, 43.65, 20.785, 75.0];
pub const SHARING: [f64; 4] = [0.35, 0.15, 0.02, 0.48];
/// Weekday peak load per building, kW; kept below contracted power.
const PEAK: [f64; 4] = [52.0, 30.0, 14.0, 58.0];
const DAY_LOAD: [f64; 2] = [1.0, 0.85];
const DAY_PV: [f64; 2] = [1.0, 0.7];
pub const VAT_RATE: f64 = 0.21;
/// Access tolls and margin added to the spot price before VAT, €/kWh.
const BUY_ADDER: f64 = 0.045;
pub const TARIFF_PERIODS: [u8; 24] = [6, 6, 6, 6, 6, 6, 6, 6, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2];
pub const CONFIG_FILE: &str = "run.toml";

pub fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2022, 3, 3).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date")
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-((h - centre) / width).powi(2)).exp()
}

/// 0 outside `[from, to]`, a half sine raised to `power` inside.
fn arch(h: f64, from: f64, to: f64, power: f64) -> f64 {
    if h <= from || h >= to {
        0.0
    } else {
        (PI * (h - from) / (to - from)).sin().powf(power)
    }
}

pub fn load(p: usize, t: usize) -> f64 {
    let h = (t % 24) as f64;
    let peak = PEAK[p] * DAY_LOAD[t / 24];
    0.25 * peak + 0.75 * peak * arch(h, 6.0, 20.0, 0.7)
}

pub fn pv(t: usize) -> f64 {
    80.0 * DAY_PV[t / 24] * arch((t % 24) as f64, 6.0, 19.0, 1.2)
}

pub fn spot(t: usize) -> f64 {
    let h = (t % 24) as f64;
    let day = (t / 24) as f64;
    0.12 + 0.10 * bump(h, 9.0, 2.0) + 0.14 * bump(h, 20.0, 2.5) - 0.04 * bump(h, 3.0, 3.0) + 0.01 * day
}

/// Generation by source in MWh; `cogeneration` has no factor by default.
pub fn mix(t: usize) -> [(&'static str, f64); 7] {
    let h = (t % 24) as f64;
    let day = (t / 24) as f64;
    [
        ("nuclear", 7000.0),
        ("wind", 3000.0 + 2000.0 * (2.0 * PI * h / 24.0 + day).cos()),
        ("solar pv", 6000.0 * DAY_PV[t / 24] * arch(h, 6.0, 19.0, 1.2)),
        ("hydro", 2500.0 + 1500.0 * bump(h, 20.0, 2.0)),
        ("combined cycle", 3000.0 + 4000.0 * bump(h, 20.0, 3.0) + 1500.0 * bump(h, 9.0, 2.0)),
        ("hard coal", 400.0 + 600.0 * bump(h, 8.0, 3.0)),
        ("cogeneration", 1500.0),
    ]
}

fn ts(t: usize) -> String {
    (start() + Duration::hours(t as i64)).format(TIMESTAMP_FORMAT).to_string()
}

fn table(header: &[&str], row: impl Fn(usize) -> Vec<f64>) -> String {
    let mut out = format!("ts,{}\n", header.join(","));
    for t in 0..HOURS {
        let cells: Vec<String> = row(t).iter().map(|v| format!("{v:.4}")).collect();
        out.push_str(&format!("{},{}\n", ts(t), cells.join(",")));
    }
    out
}

fn config() -> String {
    let mut out = String::from(
        "# Synthetic two-day community; shapes are closed-form, not measured data.\n\
         vat_rate = 0.21\n\n\
         [inputs]\n\
         load = \"load.csv\"\n\
         prices = \"prices.csv\"\n\
         pv = \"pv.csv\"\n\
         mix = \"mix.csv\"\n\n\
         [tariff]\n",
    );
    let periods: Vec<String> = TARIFF_PERIODS.iter().map(u8::to_string).collect();
    out.push_str(&format!("periods = [{}]\n", periods.join(", ")));
    for p in 0..IDS.len() {
        let limits = vec![format!("{}", CONTRACTED[p]); 6].join(", ");
        out.push_str(&format!(
            "\n[[participants]]\nid = \"{}\"\nmax_import = [{limits}]\nsharing = {}\n",
            IDS[p], SHARING[p]
        ));
    }
    out
}

/// File name and contents of every fixture file.
pub fn files() -> Vec<(&'static str, String)> {
    let names: Vec<&str> = mix(0).iter().map(|(n, _)| *n).collect();
    vec![
        (CONFIG_FILE, config()),
        ("load.csv", table(&IDS, |t| (0..IDS.len()).map(|p| load(p, t)).collect())),
        ("prices.csv", table(&["buy", "sell"], |t| vec![spot(t) + BUY_ADDER, spot(t)])),
        ("pv.csv", table(&["pv"], |t| vec![pv(t)])),
        ("mix.csv", table(&names, |t| mix(t).iter().map(|(_, v)| *v).collect())),
    ]
}

/// Writes the fixture into `dir` and returns the config path.
pub fn write(dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    for (name, body) in files() {
        fs::write(dir.join(name), body)?;
    }
    Ok(dir.join(CONFIG_FILE))
}
