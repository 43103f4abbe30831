use crate::error::{Error, Result};

pub const KDE_GRID: usize = 1000;
pub const KDE_FLOOR: f64 = 1e-12;

/// Scott's rule with the population standard deviation: `σ · n^(−1/5)`.
pub fn scott_bandwidth(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    var.sqrt() * n.powf(-0.2)
}

/// Distinct values with multiplicities, ascending.
fn weighted_support(x: &[f64]) -> Vec<(f64, f64)> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((last, c)) if *last == x => *c += 1.0,
            _ => out.push((x, 1.0)),
        }
    }
    out
}

fn density(support: &[(f64, f64)], n: usize, h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            let s: f64 = support
                .iter()
                .map(|&(x, c)| {
                    let z = (g - x) / h;
                    c * (-0.5 * z * z).exp()
                })
                .sum();
            (s * norm).max(KDE_FLOOR)
        })
        .collect()
}

/// KL(P‖Q) between Gaussian KDEs of the two samples, evaluated on a
/// 1000-point grid over `[min − 3h, max + 3h]` of the pooled data.
pub fn kl_numerical(truth: &[f64], imputed: &[f64]) -> Result<f64> {
    if imputed.is_empty() {
        return Err(Error::Evaluation("numerical KL needs a non-empty imputed column".into()));
    }
    let sp = weighted_support(truth);
    if sp.len() < 2 {
        return Err(Error::Degenerate("numerical KL needs at least two distinct true values".into()));
    }
    let sq = weighted_support(imputed);
    if sp == sq {
        return Ok(0.0);
    }
    let hp = scott_bandwidth(truth);
    let hq = match scott_bandwidth(imputed) {
        h if h > 0.0 => h,
        _ => hp,
    };
    let h = hp.max(hq);
    let lo = sp[0].0.min(sq[0].0) - 3.0 * h;
    let hi = sp[sp.len() - 1].0.max(sq[sq.len() - 1].0) + 3.0 * h;
    let dx = (hi - lo) / (KDE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID).map(|i| lo + i as f64 * dx).collect();
    let mut p = density(&sp, truth.len(), hp, &grid);
    let mut q = density(&sq, imputed.len(), hq, &grid);
    for d in [&mut p, &mut q] {
        let mass: f64 = d.iter().sum::<f64>() * dx;
        d.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(p.iter().zip(&q).map(|(a, b)| a * (a / b).ln() * dx).sum())
}
