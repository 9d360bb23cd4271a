//! Digamma function by upward recurrence plus the asymptotic series.

use super::EntropyError;

const RECURRENCE_THRESHOLD: f64 = 6.0;

// B_2k / 2k for k = 1..=7
const ASYMPTOTIC: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// ψ(x) for x > 0, accurate to about 2e-13 absolute for x ≥ 1e-3.
pub fn digamma(x: f64) -> Result<f64, EntropyError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(EntropyError::NonPositiveArgument(x));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < RECURRENCE_THRESHOLD {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Horner over x^-2 from the highest term down.
    let mut series = 0.0;
    for c in ASYMPTOTIC.iter().rev() {
        series = series * inv2 + c;
    }
    series *= inv2;
    x.ln() - 0.5 / x - series - shift
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from a 40-digit arbitrary-precision evaluation.
    const REFERENCE: [(f64, f64); 10] = [
        (0.001, -1_000.575_571_931_810_3),
        (0.1, -10.423_754_940_411_078),
        (0.5, -1.963_510_026_021_423_5),
        (1.0, -0.577_215_664_901_532_9),
        (1.5, 0.036_489_973_978_576_52),
        (3.7, 1.167_153_539_361_511_3),
        (6.0, 1.706_117_668_431_800_5),
        (10.0, 2.251_752_589_066_721),
        (123.456, 4.811_829_323_828_985),
        (1.0e6, 13.815_510_057_964_191),
    ];

    #[test]
    fn matches_reference_vectors() {
        for (x, want) in REFERENCE {
            let got = digamma(x).unwrap();
            assert!((got - want).abs() < 1e-12, "psi({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn recurrence_identity() {
        for x in [0.5, 1.0, 3.7, 10.0] {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            assert!(d.abs() < 1e-12, "x={x}: {d}");
        }
    }

    #[test]
    fn rejects_non_positive() {
        for x in [0.0, -1.0, f64::NAN] {
            assert!(matches!(digamma(x), Err(EntropyError::NonPositiveArgument(_))));
        }
    }
}
