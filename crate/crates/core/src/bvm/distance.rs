use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Grid points of the kernel density estimate (odd, for Simpson's rule).
const KDE_GRID: usize = 4097;
/// Kernel support in bandwidths.
const KERNEL_REACH: f64 = 8.0;
/// Half-width of the integration window in reference scales and bandwidths.
const WINDOW: f64 = 6.0;

/// Reference for a Kolmogorov–Smirnov comparison.
pub enum KsReference<'a> {
    Sample(&'a [f64]),
    Cdf(&'a dyn Fn(f64) -> f64),
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::Empty("Kolmogorov-Smirnov sample".into()));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_a(x) - F_b(x)|` between the empirical CDF of `sample` and the
/// reference, by a sorted sweep.
pub fn ks_statistic(sample: &[f64], reference: KsReference<'_>) -> Result<f64> {
    let a = sorted(sample)?;
    let m = a.len() as f64;
    match reference {
        KsReference::Cdf(cdf) => {
            let mut d: f64 = 0.0;
            for (k, &x) in a.iter().enumerate() {
                let f = cdf(x);
                d = d.max((k as f64 + 1.0) / m - f).max(f - k as f64 / m);
            }
            Ok(d.clamp(0.0, 1.0))
        }
        KsReference::Sample(other) => {
            let b = sorted(other)?;
            let n = b.len() as f64;
            let (mut i, mut j) = (0, 0);
            let mut d: f64 = 0.0;
            while i < a.len() && j < b.len() {
                let x = a[i].min(b[j]);
                while i < a.len() && a[i] <= x {
                    i += 1;
                }
                while j < b.len() && b[j] <= x {
                    j += 1;
                }
                d = d.max((i as f64 / m - j as f64 / n).abs());
            }
            Ok(d)
        }
    }
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Gaussian kernel density estimate on a uniform grid, from linearly binned
/// counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) m^{-1/5}`.
fn silverman(xs: &[f64]) -> f64 {
    let (_, sd) = mean_sd(xs);
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let k = pos.floor() as usize;
        let f = pos - k as f64;
        v[k] + f * (v[(k + 1).min(v.len() - 1)] - v[k])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (xs.len() as f64).powf(-0.2)
}

/// KDE of `sample` on `KDE_GRID` points spanning `[lo, hi]`.
pub fn kernel_density(sample: &[f64], lo: f64, hi: f64) -> Result<DensityEstimate> {
    if sample.len() < 2 {
        return Err(Error::Empty("density sample needs at least two points".into()));
    }
    let (_, sd) = mean_sd(sample);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Numerical("sample variance is zero or not finite".into()));
    }
    let h = silverman(sample);
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID).map(|k| lo + step * k as f64).collect();
    let mut weights = vec![0.0; KDE_GRID];
    for &x in sample {
        let pos = ((x - lo) / step).clamp(0.0, (KDE_GRID - 1) as f64);
        let k = (pos.floor() as usize).min(KDE_GRID - 2);
        let f = pos - k as f64;
        weights[k] += 1.0 - f;
        weights[k + 1] += f;
    }
    let reach = (KERNEL_REACH * h / step).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach).map(|d| normal_pdf(d as f64 * step, 0.0, h)).collect();
    let m = sample.len() as f64;
    let mut density = vec![0.0; KDE_GRID];
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let from = k.saturating_sub(reach);
        let to = (k + reach).min(KDE_GRID - 1);
        for (j, d) in density.iter_mut().enumerate().take(to + 1).skip(from) {
            *d += w * kernel[k.abs_diff(j)];
        }
    }
    for d in &mut density {
        *d /= m;
    }
    Ok(DensityEstimate { grid, density, bandwidth: h })
}

fn simpson(step: f64, ys: &[f64]) -> f64 {
    let n = ys.len() - 1;
    let mut s = ys[0] + ys[n];
    for (k, y) in ys.iter().enumerate().take(n).skip(1) {
        s += if k % 2 == 1 { 4.0 * y } else { 2.0 * y };
    }
    s * step / 3.0
}

/// Integration window: the reference `center ± 6 scale` joined with the
/// sample range widened by six bandwidths.
fn window(sample: &[f64], center: f64, scale: f64) -> (f64, f64) {
    let h = silverman(sample);
    let (min, max) = sample.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    ((center - WINDOW * scale).min(min - WINDOW * h), (center + WINDOW * scale).max(max + WINDOW * h))
}

/// `∫ |f̂ - f|` between a Gaussian KDE of `sample` and a reference density
/// `f` with location `center` and scale `scale`, by Simpson's rule.
pub fn l1_density_distance<F: Fn(f64) -> f64>(sample: &[f64], reference: F, center: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("reference scale must be positive, got {scale}")));
    }
    if sample.len() < 2 {
        return Err(Error::Empty("density sample needs at least two points".into()));
    }
    let (_, sd) = mean_sd(sample);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Numerical("sample variance is zero or not finite".into()));
    }
    let (lo, hi) = window(sample, center, scale);
    let kde = kernel_density(sample, lo, hi)?;
    let diffs: Vec<f64> = kde.grid.iter().zip(&kde.density).map(|(&x, &d)| (d - reference(x)).abs()).collect();
    Ok(simpson(kde.grid[1] - kde.grid[0], &diffs).clamp(0.0, 2.0))
}

/// CSV `x,kde,reference` over the same window as [`l1_density_distance`].
pub fn density_csv<F: Fn(f64) -> f64>(sample: &[f64], reference: F, center: f64, scale: f64) -> Result<String> {
    let (lo, hi) = window(sample, center, scale);
    let kde = kernel_density(sample, lo, hi)?;
    let mut out = String::from("x,kde,reference\n");
    for (&x, &d) in kde.grid.iter().zip(&kde.density) {
        out.push_str(&format!("{x},{d},{}\n", reference(x)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn ks_examples() {
        let a = [1.0, 2.0];
        assert_eq!(ks_statistic(&a, KsReference::Sample(&a)).unwrap(), 0.0);
        assert_eq!(ks_statistic(&a, KsReference::Sample(&[1.5, 2.5])).unwrap(), 0.5);
        assert_eq!(ks_statistic(&a, KsReference::Sample(&[3.0, 4.0, 5.0])).unwrap(), 1.0);
        assert!(ks_statistic(&[], KsReference::Sample(&a)).is_err());
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_statistic(&[0.5], KsReference::Cdf(&uniform)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_of_own_reference_is_small() {
        let xs = normals(100_000, 1);
        let d = l1_density_distance(&xs, |x| normal_pdf(x, 0.0, 1.0), 0.0, 1.0).unwrap();
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn l1_of_shifted_normals() {
        let xs = normals(100_000, 2);
        let d = l1_density_distance(&xs, |x| normal_pdf(x, 4.0, 1.0), 4.0, 1.0).unwrap();
        let exact = 2.0 * (2.0 * normal_cdf(2.0, 0.0, 1.0) - 1.0);
        assert!((d - exact).abs() < 0.05, "{d} vs {exact}");
    }

    #[test]
    fn l1_rejects_constant_sample() {
        assert!(l1_density_distance(&[1.0; 200], |x| normal_pdf(x, 0.0, 1.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn density_dump_grid_is_increasing() {
        let xs = normals(500, 3);
        let csv = density_csv(&xs, |x| normal_pdf(x, 0.0, 1.0), 0.0, 1.0).unwrap();
        let xs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }
}
