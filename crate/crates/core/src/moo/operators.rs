//! Simulated binary crossover and polynomial mutation on bounded reals.

use rand::Rng;

/// Bounded SBX. Each variable is recombined with probability 0.5, and the
/// two children swap that variable with probability 0.5.
pub fn sbx_crossover<R: Rng>(
    rng: &mut R,
    p1: &[f64],
    p2: &[f64],
    lower: &[f64],
    upper: &[f64],
    eta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        if rng.random::<f64>() > 0.5 {
            continue;
        }
        let (xl, xu) = (lower[i], upper[i]);
        let (mut y1, mut y2) = (p1[i], p2[i]);
        if (y1 - y2).abs() <= 1e-14 || xu <= xl {
            continue;
        }
        if y1 > y2 {
            std::mem::swap(&mut y1, &mut y2);
        }
        let rand = rng.random::<f64>();
        let spread = |beta: f64| -> f64 {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if rand <= 1.0 / alpha {
                (rand * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - rand * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta_lo = 1.0 + 2.0 * (y1 - xl) / (y2 - y1);
        let a = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
        let beta_hi = 1.0 + 2.0 * (xu - y2) / (y2 - y1);
        let b = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
        let (a, b) = (a.clamp(xl, xu), b.clamp(xl, xu));
        if rng.random::<f64>() <= 0.5 {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Polynomial mutation with per-variable probability `prob`.
pub fn polynomial_mutation<R: Rng>(
    rng: &mut R,
    x: &mut [f64],
    lower: &[f64],
    upper: &[f64],
    eta: f64,
    prob: f64,
) {
    for i in 0..x.len() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let (xl, xu) = (lower[i], upper[i]);
        if xu <= xl {
            continue;
        }
        let y = x[i];
        let range = xu - xl;
        let d1 = (y - xl) / range;
        let d2 = (xu - y) / range;
        let r = rng.random::<f64>();
        let pow = 1.0 / (eta + 1.0);
        let dq = if r < 0.5 {
            let v = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        x[i] = (y + dq * range).clamp(xl, xu);
    }
}
