/// Result of min-max scaling. `constant` flags a degenerate input whose
/// range is zero; its values are then all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub constant: bool,
}

/// Scales `samples` linearly so the minimum maps to 0 and the maximum to `upper`.
pub fn minmax_normalize(samples: &[f64], upper: f64) -> Normalized {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if samples.is_empty() || hi <= lo {
        return Normalized {
            values: vec![0.0; samples.len()],
            constant: true,
        };
    }
    let scale = upper / (hi - lo);
    let values = samples
        .iter()
        .map(|&x| ((x - lo) * scale).clamp(0.0, upper))
        .collect();
    Normalized {
        values,
        constant: false,
    }
}
