use super::NetworkError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    /// `true` for `x -> y`.
    pub forward: bool,
    /// Signed Pearson correlation of the pair.
    pub weight: f64,
    /// Likelihood-ratio statistic; positive favours `x -> y`.
    pub statistic: f64,
}

/// Orients a pair of series with the tanh approximation of the pairwise
/// likelihood ratio between the models `x -> y` and `y -> x`:
///
/// `R = rho * mean(x * tanh(y) - tanh(x) * y)` on standardized series.
///
/// `R > 0` gives `x -> y`, `R < 0` gives `y -> x`, and `R = 0` falls back to
/// `x -> y` (callers pass the lower-indexed series as `x`).
pub fn orient_edge(x: &[f64], y: &[f64]) -> Result<Orientation, NetworkError> {
    if x.len() != y.len() {
        return Err(NetworkError::DegenerateInput(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(NetworkError::DegenerateInput(format!(
            "need at least 3 observations, got {}",
            x.len()
        )));
    }
    let xs = standardize(x)?;
    let ys = standardize(y)?;
    let n = xs.len() as f64;
    let rho = (xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / n).clamp(-1.0, 1.0);
    let asym = xs
        .iter()
        .zip(&ys)
        .map(|(a, b)| a * b.tanh() - a.tanh() * b)
        .sum::<f64>()
        / n;
    let statistic = rho * asym;
    Ok(Orientation {
        forward: statistic >= 0.0,
        weight: rho,
        statistic,
    })
}

fn standardize(v: &[f64]) -> Result<Vec<f64>, NetworkError> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(NetworkError::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|a| (a - m) / sd).collect())
}
