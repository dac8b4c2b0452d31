use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Collapsed human-error × LLM-error table.
///
/// Rows: human error, no human error. Columns: LLM error, no LLM error.
/// `a` counts turns with both errors, `d` turns with neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoByTwo {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl TwoByTwo {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn transposed(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    /// Swaps both rows and columns.
    pub fn rotated(&self) -> Self {
        Self::new(self.d, self.c, self.b, self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p: f64,
    pub df: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("degenerate table: {0}")]
    DegenerateTable(String),
}

/// Pearson chi-square test of independence for a 2×2 table, without
/// continuity correction.
pub fn chi_square_2x2(t: &TwoByTwo) -> Result<ChiSquare, StatsError> {
    chi_square_2x2_with(t, false)
}

/// As [`chi_square_2x2`], optionally with Yates' continuity correction.
pub fn chi_square_2x2_with(t: &TwoByTwo, yates: bool) -> Result<ChiSquare, StatsError> {
    let n = t.n();
    if n == 0 {
        return Err(StatsError::DegenerateTable("table is empty".into()));
    }
    let rows = [t.a + t.b, t.c + t.d];
    let cols = [t.a + t.c, t.b + t.d];
    if let Some(i) = rows.iter().position(|&r| r == 0) {
        return Err(StatsError::DegenerateTable(format!("row {} sums to zero", i + 1)));
    }
    if let Some(j) = cols.iter().position(|&c| c == 0) {
        return Err(StatsError::DegenerateTable(format!("column {} sums to zero", j + 1)));
    }
    let observed = [[t.a, t.b], [t.c, t.d]];
    let n = n as f64;
    let mut statistic = 0.0;
    for (i, row) in observed.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / n;
            let mut diff = (o as f64 - expected).abs();
            if yates {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / expected;
        }
    }
    Ok(ChiSquare {
        statistic,
        p: chi_square_sf(statistic, 1),
        df: 1,
    })
}

/// Upper tail P(X ≥ x) of the chi-square distribution with `df` degrees of
/// freedom.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(f64::from(df) / 2.0, x / 2.0)
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 1000;

/// Regularized lower incomplete gamma P(a, x).
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    1.0 - regularized_gamma_q(a, x)
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
///
/// Series expansion below x = a + 1, Lentz continued fraction above.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = f64::MIN_POSITIVE / EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}
