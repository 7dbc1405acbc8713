//! Seeded synthetic panel shaped like the annual house-price dataset.
//!
//! The target `RHP` is
//!
//! * a linear trend `60 + 0.35 t`,
//! * plus an AR(2) cycle `c_t = 1.6 c_{t−1} − 0.8 c_{t−2} + u_t`, `u_t ~ N(0, 1)`
//!   (period about 14 years),
//! * plus white noise with sd 0.5,
//! * plus a boom and bust: a Gaussian bump of height 30 and width 5 centred
//!   nine samples before the end, so the level falls sharply over the final years.
//!
//! The ten predictors carry the schema names and are built from the same pieces:
//!
//! | name | construction |
//! |------|--------------|
//! | `FISPOL` | pure noise |
//! | `RGDPPC` | `40 + 0.5·trend + 1.5·c_{t+1}` + noise (leads the cycle) |
//! | `UNEMPL` | `6 − 0.3·c_t` + noise |
//! | `LTR` | `5 +` random walk with step sd 0.2 |
//! | `STR` | `3 + 0.4·c_{t−1}` + noise (lags the cycle) |
//! | `INFL` | `2 +` noise |
//! | `POP` | `50 + 0.8 t` + small noise |
//! | `RCONSTR` | `20 + c_{t+2} + 0.4·bump` + noise |
//! | `RSP` | `100 +` random walk with step sd 2 |
//! | `ROILP` | `30 +` AR(1) with coefficient 0.7 and innovation sd 3 |
//!
//! The index starts so that the last observation is 2012.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::series::{align, Dataset, TimeSeries};

pub const DEFAULT_LENGTH: usize = 150;
pub const LAST_INDEX: i32 = 2012;

/// Predictor names in generation order.
pub const PREDICTORS: [&str; 10] = [
    "FISPOL", "RGDPPC", "UNEMPL", "LTR", "STR", "INFL", "POP", "RCONSTR", "RSP", "ROILP",
];
pub const TARGET: &str = "RHP";

struct Gauss(ChaCha8Rng);

impl Gauss {
    fn draw(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    fn many(&mut self, n: usize, sd: f64) -> Vec<f64> {
        (0..n).map(|_| sd * self.draw()).collect()
    }
}

pub fn make_fixture(seed: u64, length: usize) -> Result<Dataset> {
    if length < 50 {
        return Err(Error::InsufficientData {
            needed: 50,
            available: length,
        });
    }
    let n = length;
    let mut g = Gauss(ChaCha8Rng::seed_from_u64(seed));

    // cycle runs two steps past the end for the leading predictors, plus burn-in
    let burn = 50;
    let mut cycle = Vec::with_capacity(n + 2 + burn);
    cycle.push(0.0);
    cycle.push(0.0);
    while cycle.len() < n + 2 + burn {
        let k = cycle.len();
        cycle.push(1.6 * cycle[k - 1] - 0.8 * cycle[k - 2] + g.draw());
    }
    let cycle = &cycle[burn - 1..];
    // cycle[t + 1] is c_t; cycle[0] is c_{−1}
    let c = |t: isize| cycle[(t + 1) as usize];

    let trend: Vec<f64> = (0..n).map(|t| 60.0 + 0.35 * t as f64).collect();
    let peak = (n - 9) as f64;
    let bump: Vec<f64> = (0..n)
        .map(|t| 30.0 * libm::exp(-((t as f64 - peak) / 5.0).powi(2)))
        .collect();
    let noise = g.many(n, 0.5);
    let target: Vec<f64> = (0..n)
        .map(|t| trend[t] + c(t as isize) + noise[t] + bump[t])
        .collect();

    let walk = |step: f64, g: &mut Gauss| -> Vec<f64> {
        let mut acc = 0.0;
        (0..n)
            .map(|_| {
                acc += step * g.draw();
                acc
            })
            .collect()
    };
    let fispol = g.many(n, 1.0);
    let rgdppc: Vec<f64> = (0..n)
        .map(|t| 40.0 + 0.5 * trend[t] + 1.5 * c(t as isize + 1) + 0.5 * g.draw())
        .collect();
    let unempl: Vec<f64> = (0..n).map(|t| 6.0 - 0.3 * c(t as isize) + 0.3 * g.draw()).collect();
    let ltr: Vec<f64> = walk(0.2, &mut g).into_iter().map(|v| 5.0 + v).collect();
    let str_: Vec<f64> = (0..n)
        .map(|t| 3.0 + 0.4 * c(t as isize - 1) + 0.3 * g.draw())
        .collect();
    let infl: Vec<f64> = g.many(n, 1.0).into_iter().map(|v| 2.0 + v).collect();
    let pop: Vec<f64> = (0..n).map(|t| 50.0 + 0.8 * t as f64 + 0.1 * g.draw()).collect();
    let rconstr: Vec<f64> = (0..n)
        .map(|t| 20.0 + c(t as isize + 2) + 0.4 * bump[t] + 0.5 * g.draw())
        .collect();
    let rsp: Vec<f64> = walk(2.0, &mut g).into_iter().map(|v| 100.0 + v).collect();
    let mut ar = 0.0;
    let roilp: Vec<f64> = (0..n)
        .map(|_| {
            ar = 0.7 * ar + 3.0 * g.draw();
            30.0 + ar
        })
        .collect();

    let start = LAST_INDEX - n as i32 + 1;
    let columns = [
        (TARGET, target),
        (PREDICTORS[0], fispol),
        (PREDICTORS[1], rgdppc),
        (PREDICTORS[2], unempl),
        (PREDICTORS[3], ltr),
        (PREDICTORS[4], str_),
        (PREDICTORS[5], infl),
        (PREDICTORS[6], pop),
        (PREDICTORS[7], rconstr),
        (PREDICTORS[8], rsp),
        (PREDICTORS[9], roilp),
    ];
    let series = columns
        .into_iter()
        .map(|(name, values)| TimeSeries::new(name, start, values))
        .collect::<Result<Vec<_>>>()?;
    align(series)
}
