//! Derivative-free simplex minimization.

/// Options for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Relative spread of objective values across the simplex at convergence.
    pub f_tol: f64,
    /// Largest vertex distance from the best vertex at convergence.
    pub x_tol: f64,
    pub initial_step: f64,
    /// Fresh simplices built around the optimum after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iter: 1000, f_tol: 1e-12, x_tol: 1e-9, initial_step: 0.5, restarts: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the dimension-adaptive Nelder–Mead coefficients.
/// Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimResult {
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0);
    let mut total_iter = 0;
    let mut converged = false;
    for round in 0..=opts.restarts {
        let budget = opts.max_iter.saturating_sub(total_iter);
        if budget == 0 {
            break;
        }
        let (x, fx, iters, conv) = run_simplex(&mut eval, &best_x, best_f, opts, budget);
        total_iter += iters;
        let improved = fx < best_f;
        let gain = best_f - fx;
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        converged = conv;
        // A restart that changes nothing confirms the optimum.
        if round > 0 && (!improved || gain <= opts.f_tol * best_f.abs()) {
            break;
        }
    }
    OptimResult { x: best_x, f: best_f, iterations: total_iter, evaluations: evals, converged }
}

fn run_simplex<E: FnMut(&[f64]) -> f64>(
    eval: &mut E,
    x0: &[f64],
    f0: f64,
    opts: &NelderMeadOptions,
    max_iter: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let d = x0.len();
    if d == 0 {
        return (Vec::new(), f0, 0, true);
    }
    let df = d as f64;
    // The adaptive shrink factor vanishes at d = 1, where the standard coefficients are used.
    let (alpha, beta, gamma, delta) =
        if d == 1 { (1.0, 2.0, 0.5, 0.5) } else { (1.0, 1.0 + 2.0 / df, 0.75 - 1.0 / (2.0 * df), 1.0 - 1.0 / df) };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![f0];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        vals.push(eval(&p));
        pts.push(p);
    }
    let mut order: Vec<usize> = (0..=d).collect();
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    for iter in 0..max_iter {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (best, worst, second) = (order[0], order[d], order[d - 1]);
        let spread_f = vals[worst] - vals[best];
        let spread_x = pts
            .iter()
            .map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread_f <= opts.f_tol * vals[best].abs() + f64::MIN_POSITIVE && spread_x <= opts.x_tol {
            return (pts[best].clone(), vals[best], iter, true);
        }
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..d] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / df;
            }
        }
        let point = |t: f64, out: &mut Vec<f64>, pts: &Vec<Vec<f64>>| {
            for k in 0..d {
                out[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
            }
        };
        point(-alpha, &mut trial, &pts);
        let fr = eval(&trial);
        if fr < vals[best] {
            let reflected = trial.clone();
            point(-alpha * beta, &mut trial, &pts);
            let fe = eval(&trial);
            if fe < fr {
                pts[worst].copy_from_slice(&trial);
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
        } else if fr < vals[second] {
            pts[worst].copy_from_slice(&trial);
            vals[worst] = fr;
        } else {
            let outside = fr < vals[worst];
            point(if outside { alpha * gamma } else { -gamma }, &mut trial, &pts);
            let fc = eval(&trial);
            if fc < fr.min(vals[worst]) || (outside && fc <= fr) {
                pts[worst].copy_from_slice(&trial);
                vals[worst] = fc;
            } else {
                let xb = pts[best].clone();
                for &i in &order[1..] {
                    for k in 0..d {
                        pts[i][k] = xb[k] + delta * (pts[i][k] - xb[k]);
                    }
                    vals[i] = eval(&pts[i]);
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best].clone(), vals[best], max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions { max_iter: 5000, ..Default::default() });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn one_dimensional_minimum() {
        let f = |x: &[f64]| (x[0].exp() / 2.0 - 1.83).powi(2);
        let r = nelder_mead(f, &[0.0], &NelderMeadOptions { x_tol: f64::INFINITY, ..Default::default() });
        assert!((r.x[0] - 3.66f64.ln()).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn quadratic_in_four_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - i as f64).powi(2)).sum();
        let r = nelder_mead(f, &[5.0, 5.0, 5.0, 5.0], &NelderMeadOptions { max_iter: 5000, ..Default::default() });
        for (i, v) in r.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-6);
        }
    }
}
