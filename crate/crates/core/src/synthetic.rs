//! Synthetic hourly market data with the structure of a day-ahead market:
//! daily, weekly and annual load cycles, solar and wind infeed, a convex
//! merit-order price curve, occasional spikes and negative prices.

use std::f64::consts::PI;
use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{HourlyRecord, HOURS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub start: NaiveDate,
    pub days: usize,
    pub seed: u64,
    /// Probability of a price spike in any hour.
    pub spike_rate: f64,
}

impl SyntheticConfig {
    pub fn new(start: NaiveDate, days: usize, seed: u64) -> Self {
        Self { start, days, seed, spike_rate: 0.004 }
    }
}

struct Ar1 {
    phi: f64,
    sd: f64,
    state: f64,
}

impl Ar1 {
    fn new(phi: f64, sd: f64) -> Self {
        Self { phi, sd, state: 0.0 }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.state = self.phi * self.state + self.sd * (1.0 - self.phi * self.phi).sqrt() * e;
        self.state
    }
}

fn daily_demand_shape(hour: f64) -> f64 {
    // morning and evening peaks over a night trough
    let morning = (-(hour - 9.0).powi(2) / 8.0).exp();
    let evening = (-(hour - 19.0).powi(2) / 6.0).exp();
    let night = (-(hour - 3.0).powi(2) / 10.0).exp();
    0.55 * morning + 0.65 * evening - 0.6 * night
}

fn solar_shape(hour: f64, day_of_year: f64) -> f64 {
    let season = 0.5 - 0.5 * (2.0 * PI * (day_of_year + 10.0) / 365.25).cos();
    let half_width = 4.0 + 3.0 * season;
    let x = (hour + 0.5 - 13.0) / half_width;
    let bell = if x.abs() < 1.0 { (PI * x / 2.0).cos().powi(2) } else { 0.0 };
    bell * (0.25 + 0.75 * season)
}

pub fn generate(config: &SyntheticConfig) -> Vec<HourlyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut wind = Ar1::new(0.985, 1.0);
    let mut cloud = Ar1::new(0.9, 1.0);
    let mut demand_noise = Ar1::new(0.9, 1200.0);
    let mut price_noise = Ar1::new(0.8, 6.0);
    let mut out = Vec::with_capacity(config.days * HOURS_PER_DAY);
    for d in 0..config.days {
        let date = config.start + Duration::days(d as i64);
        let doy = date.ordinal0() as f64;
        let weekday = date.weekday().num_days_from_monday();
        let weekly = match weekday {
            5 => 0.88,
            6 => 0.80,
            _ => 1.0,
        };
        let annual = 1.0 + 0.12 * (2.0 * PI * (doy + 15.0) / 365.25).cos();
        for h in 0..HOURS_PER_DAY {
            let hour = h as f64;
            let demand = 55_000.0 * weekly * annual * (1.0 + 0.18 * daily_demand_shape(hour)) + demand_noise.step(&mut rng);
            let wind_mw = 14_000.0 * (1.0 + 0.2 * (2.0 * PI * (doy + 15.0) / 365.25).cos()) * (0.45 * wind.step(&mut rng)).exp();
            let clear = (1.0 - 0.3 * (0.7 * cloud.step(&mut rng)).tanh()).max(0.0);
            let solar_mw = 30_000.0 * solar_shape(hour, doy) * clear;
            let renewables = wind_mw + solar_mw;
            let residual = demand - renewables;
            let r = residual / 1000.0;
            let mut price = 5.0 + 2.1 * r + 0.018 * (r - 25.0).max(0.0).powi(2) + price_noise.step(&mut rng);
            if rng.random::<f64>() < config.spike_rate {
                price += 80.0 + 120.0 * rng.random::<f64>();
            }
            out.push(HourlyRecord {
                date,
                hour: h,
                price: round(price, 2),
                residual_load: round(residual, 1),
                renewables: round(renewables, 1),
            });
        }
    }
    out
}

fn round(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (x * s).round() / s
}

/// Writes records in the default input schema with a fixed `+01:00` offset.
pub fn write_csv<W: Write>(records: &[HourlyRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "timestamp,price,residual_load,renewables")?;
    for r in records {
        writeln!(
            w,
            "{}T{:02}:00:00+01:00,{},{},{}",
            r.date.format("%Y-%m-%d"),
            r.hour,
            r.price,
            r.residual_load,
            r.renewables
        )?;
    }
    Ok(())
}
