//! Classical fourth-order Runge–Kutta on flat state vectors.

pub fn rk4_step<E>(
    y: &[f64],
    dt: f64,
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
) -> Result<Vec<f64>, E> {
    let k1 = f(y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k2 = f(&y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k3 = f(&y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = f(&y4)?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Shortens `dt` so that the step lands exactly on the next pending checkpoint.
pub fn clip_to_checkpoint(t: f64, dt: f64, checkpoints: &[f64]) -> f64 {
    checkpoints
        .iter()
        .copied()
        .filter(|&c| c > t * (1.0 + 1e-14) && c < t + dt)
        .fold(dt, |acc, c| acc.min(c - t))
}
