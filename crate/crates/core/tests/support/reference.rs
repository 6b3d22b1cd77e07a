//! Slow, simple reference computations for the solvers.

/// `0.5 |w|^2 + C * sum max(0, 1 - y (w.x + b))^2`
pub fn squared_hinge_objective(w: &[f64], b: f64, rows: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() * 0.5;
    let loss: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &yi)| {
            let f: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            let slack = (1.0 - yi * f).max(0.0);
            slack * slack
        })
        .sum();
    reg + c * loss
}

/// Gradient of [`squared_hinge_objective`] as `(dw, db)`.
pub fn squared_hinge_gradient(
    w: &[f64],
    b: f64,
    rows: &[Vec<f64>],
    y: &[f64],
    c: f64,
) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (x, &yi) in rows.iter().zip(y) {
        let f: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let slack = 1.0 - yi * f;
        if slack > 0.0 {
            let scale = -2.0 * c * slack * yi;
            for (g, xv) in gw.iter_mut().zip(x) {
                *g += scale * xv;
            }
            gb += scale;
        }
    }
    (gw, gb)
}

fn norm(w: &[f64], b: f64) -> f64 {
    (w.iter().map(|v| v * v).sum::<f64>() + b * b).sqrt()
}

/// Nesterov-accelerated gradient descent with a fixed `1/L` step and
/// function-value restarts. Returns `(w, b, objective)`.
pub fn reference_minimize(
    rows: &[Vec<f64>],
    y: &[f64],
    c: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, f64) {
    let d = rows.first().map_or(0, Vec::len);
    let lipschitz = 1.0
        + 2.0
            * c
            * rows
                .iter()
                .map(|x| 1.0 + x.iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>();
    let step = 1.0 / lipschitz;
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut vw, mut vb) = (w.clone(), b);
    let mut t = 1.0f64;
    let mut f_prev = squared_hinge_objective(&w, b, rows, y, c);
    let (g0w, g0b) = squared_hinge_gradient(&w, b, rows, y, c);
    let g0 = norm(&g0w, g0b).max(1.0);
    for _ in 0..max_iter {
        let (gw, gb) = squared_hinge_gradient(&vw, vb, rows, y, c);
        if norm(&gw, gb) <= 1e-12 * g0 {
            w = vw.clone();
            b = vb;
            break;
        }
        let nw: Vec<f64> = vw.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
        let nb = vb - step * gb;
        let f_new = squared_hinge_objective(&nw, nb, rows, y, c);
        if f_new > f_prev {
            if t == 1.0 {
                // a plain gradient step no longer descends: rounding floor
                break;
            }
            // restart momentum from the last iterate
            t = 1.0;
            vw = w.clone();
            vb = b;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        vw = nw
            .iter()
            .zip(&w)
            .map(|(n, o)| n + momentum * (n - o))
            .collect();
        vb = nb + momentum * (nb - b);
        w = nw;
        b = nb;
        t = t_next;
        f_prev = f_new;
    }
    let f = squared_hinge_objective(&w, b, rows, y, c);
    (w, b, f)
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// Worst KKT violation of a C-SVC dual solution given per-row `alpha`.
/// Also folds in box and equality-constraint violations.
pub fn kkt_violation(
    rows: &[Vec<f64>],
    y: &[f64],
    alpha: &[f64],
    bias: f64,
    gamma: f64,
    c: f64,
) -> f64 {
    let n = rows.len();
    let mut worst: f64 = 0.0;
    let eq: f64 = alpha.iter().zip(y).map(|(a, yi)| a * yi).sum();
    worst = worst.max(eq.abs());
    for i in 0..n {
        worst = worst.max(-alpha[i]).max(alpha[i] - c);
        let f: f64 = (0..n)
            .map(|j| alpha[j] * y[j] * rbf(gamma, &rows[j], &rows[i]))
            .sum::<f64>()
            + bias;
        let margin = y[i] * f;
        if alpha[i] < c {
            worst = worst.max(1.0 - margin);
        }
        if alpha[i] > 0.0 {
            worst = worst.max(margin - 1.0);
        }
    }
    worst
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + h;
    let up = f(&p);
    p[i] = x[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}
