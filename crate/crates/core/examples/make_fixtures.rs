//! Regenerates the CSV fixtures under `data/` from the discrete model.
//!
//!     cargo run -p svir-control --example make_fixtures -- data
//!
//! Synthetic fractions are written at full precision so they parse back to
//! the generated values bit for bit.

use std::path::Path;

use chrono::{Days, NaiveDate};
use svir_control::calibration::{discrete_series, ObservedSeries, Rates};

fn fractions(series: &ObservedSeries, start: Option<NaiveDate>) -> String {
    let mut out = String::from("date,S,V,I,R\n");
    for k in 0..series.len() {
        let date = match start {
            Some(d) => (d + Days::new(k as u64)).format("%Y-%m-%d").to_string(),
            None => k.to_string(),
        };
        out.push_str(&format!(
            "{date},{},{},{},{}\n",
            series.s[k], series.v[k], series.i[k], series.r[k]
        ));
    }
    out
}

fn counts(series: &ObservedSeries, start: NaiveDate, population: u64) -> String {
    let mut out = String::from("date,S_count,V_count,I_count,R_count\n");
    for k in 0..series.len() {
        let round = |x: f64| (x * population as f64).round() as u64;
        let (s, v, i) = (round(series.s[k]), round(series.v[k]), round(series.i[k]));
        let r = population - s - v - i;
        let date = (start + Days::new(k as u64)).format("%Y-%m-%d");
        out.push_str(&format!("{date},{s},{v},{i},{r}\n"));
    }
    out
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let dir = Path::new(&dir);
    std::fs::create_dir_all(dir).expect("create output directory");
    let write = |name: &str, text: String| {
        std::fs::write(dir.join(name), text).expect("write fixture");
        println!("wrote {}", dir.join(name).display());
    };
    let sir = |beta: f64, gamma: f64| Rates {
        beta,
        alpha: 0.0,
        gamma1: 0.0,
        gamma,
    };
    let start = NaiveDate::from_ymd_opt(2021, 1, 4).expect("date");

    let table = Rates {
        beta: 0.22,
        alpha: 0.004,
        gamma1: 0.071,
        gamma: 0.095,
    };
    let s = discrete_series(&table, 0.0, 0.078, [0.85, 0.0, 0.15, 0.0], 60, None).expect("svir");
    write("svir_synthetic.csv", fractions(&s, Some(start)));

    let step = |n: usize| if n < 10 { 0.3 } else { 0.1 };
    let s = discrete_series(&sir(0.3, 0.1), 0.0, 0.0, [0.95, 0.0, 0.05, 0.0], 40, Some(&step)).expect("sir");
    write("sir_stepped_beta.csv", fractions(&s, None));

    let s = discrete_series(&sir(0.25, 0.1), 0.0, 0.0, [0.99, 0.0, 0.01, 0.0], 60, None).expect("sir");
    write("sir_constant_beta.csv", fractions(&s, None));

    let controlled = |n: usize| 0.3 * (1.0 - if n < 30 { 0.0 } else { 0.6 });
    let s = discrete_series(
        &sir(0.3, 0.1),
        0.0,
        0.0,
        [0.999, 0.0, 0.001, 0.0],
        80,
        Some(&controlled),
    )
    .expect("sir");
    write("expost_step.csv", fractions(&s, Some(start)));

    // Shaped like a national series: growth, a strict closure from day 21,
    // a partial reopening from day 70.
    let italy_start = NaiveDate::from_ymd_opt(2020, 2, 24).expect("date");
    let level = |n: usize| match n {
        0..=20 => 0.0,
        21..=69 => 0.75,
        _ => 0.68,
    };
    let shaped = |n: usize| 0.3 * (1.0 - level(n));
    let s = discrete_series(
        &sir(0.3, 0.1),
        0.0,
        0.0,
        [1.0 - 3.0e-6, 0.0, 3.0e-6, 0.0],
        150,
        Some(&shaped),
    )
    .expect("shaped");
    write("italy_shaped_counts.csv", counts(&s, italy_start, 60_360_000));
    write(
        "italy_phases.csv",
        "date,label\n2020-02-24,uncontrolled growth\n2020-03-16,strict closure\n2020-05-04,partial reopening\n"
            .to_string(),
    );
}
