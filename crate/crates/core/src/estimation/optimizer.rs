//! Bounded nonlinear least squares shared by every fit.
//!
//! Each start runs a Nelder-Mead simplex search, restarted once from its own
//! optimum, followed by a Levenberg-Marquardt polish on a finite-difference
//! Jacobian. Parameter uncertainties come from the Gauss-Newton curvature
//! `s²(JᵀJ)⁻¹` at the optimum, with `s² = RSS / (N − p)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LeastSquaresOptions {
    pub names: Vec<String>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Additional starting points tried after the initial guess.
    pub starts: Vec<Vec<f64>>,
    pub max_iterations: usize,
    /// Relative change in the residual sum of squares treated as converged.
    pub tolerance: f64,
    /// Run the Levenberg-Marquardt polish after the simplex search.
    pub refine: bool,
    /// Initial simplex step per parameter.
    pub initial_step: Option<Vec<f64>>,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            lower: None,
            upper: None,
            starts: Vec::new(),
            max_iterations: 10_000,
            tolerance: 1e-10,
            refine: true,
            initial_step: None,
        }
    }
}

impl LeastSquaresOptions {
    pub fn named<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            names: names.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn with_starts(mut self, starts: Vec<Vec<f64>>) -> Self {
        self.starts = starts;
        self
    }
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// One-sigma uncertainties; `f64::INFINITY` for directions the data do
    /// not constrain.
    pub uncertainties: Vec<f64>,
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_points: usize,
    pub message: String,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.values[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.uncertainties[i])
    }

    /// Error out unless the optimizer reported convergence.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                rss: self.rss,
                detail: self.message,
            })
        }
    }
}

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

struct Objective<'a, F> {
    model: &'a F,
    data: &'a [f64],
}

impl<F: Fn(&[f64]) -> Vec<f64>> Objective<'_, F> {
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let pred = (self.model)(x);
        if pred.len() != self.data.len() {
            return None;
        }
        let r: Vec<f64> = pred.iter().zip(self.data).map(|(p, d)| p - d).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn rss(&self, x: &[f64]) -> f64 {
        self.residuals(x)
            .map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum())
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    x: Vec<f64>,
    rss: f64,
    converged: bool,
    iterations: usize,
    message: String,
}

/// Minimize `Σ (model(x)_i − data_i)²` over the box given in `opts`.
///
/// The initial guess and every entry of `opts.starts` are optimized
/// independently; the winner has the lowest residual, then the smallest
/// parameter norm, then the earliest position in the start list.
/// Hitting the iteration limit yields `converged == false`, never an error.
pub fn least_squares<F>(
    model: F,
    initial: &[f64],
    data: &[f64],
    opts: &LeastSquaresOptions,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let p = initial.len();
    if data.is_empty() {
        return Err(Error::domain("least squares needs at least one data point"));
    }
    if p == 0 {
        return Err(Error::domain("least squares needs at least one parameter"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("data contain non-finite values"));
    }
    let starts: Vec<Vec<f64>> = std::iter::once(initial.to_vec())
        .chain(opts.starts.iter().cloned())
        .collect();
    if let Some(s) = starts
        .iter()
        .find(|s| s.len() != p || s.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::domain(format!(
            "starting point {s:?} is not a finite {p}-vector"
        )));
    }
    let bounds = Bounds {
        lower: opts
            .lower
            .clone()
            .unwrap_or_else(|| vec![f64::NEG_INFINITY; p]),
        upper: opts.upper.clone().unwrap_or_else(|| vec![f64::INFINITY; p]),
    };
    if bounds.lower.len() != p
        || bounds.upper.len() != p
        || bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .any(|(l, u)| !(l <= u))
    {
        return Err(Error::domain(
            "bounds must be ordered vectors matching the parameter count",
        ));
    }
    let names = if opts.names.len() == p {
        opts.names.clone()
    } else {
        (0..p).map(|i| format!("p{i}")).collect()
    };

    let objective = Objective {
        model: &model,
        data,
    };
    let floor = 1e-30 * (1.0 + data.iter().map(|v| v * v).sum::<f64>());

    let candidates: Vec<Candidate> = starts
        .par_iter()
        .map(|start| {
            let mut x0 = start.clone();
            bounds.project(&mut x0);
            optimize_from(&objective, x0, &bounds, opts, floor)
        })
        .collect();

    let best = candidates
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
            let tie = 1e-12 * a.rss.abs().max(b.rss.abs()) + floor;
            if (a.rss - b.rss).abs() > tie {
                a.rss.total_cmp(&b.rss)
            } else {
                norm(&a.x).total_cmp(&norm(&b.x)).then(ia.cmp(ib))
            }
        })
        .map(|(_, c)| c)
        .expect("at least one start");

    if !best.rss.is_finite() {
        return Err(Error::NonConvergence {
            iterations: best.iterations,
            rss: best.rss,
            detail: "model produced non-finite predictions at every start".into(),
        });
    }

    let uncertainties = curvature_uncertainties(&objective, &best.x, &bounds, best.rss);
    Ok(FitResult {
        names,
        values: best.x,
        uncertainties,
        rss: best.rss,
        converged: best.converged,
        iterations: best.iterations,
        n_points: data.len(),
        message: best.message,
    })
}

fn optimize_from<F: Fn(&[f64]) -> Vec<f64>>(
    obj: &Objective<'_, F>,
    x0: Vec<f64>,
    bounds: &Bounds,
    opts: &LeastSquaresOptions,
    floor: f64,
) -> Candidate {
    let mut budget = opts.max_iterations;
    let first = nelder_mead(obj, &x0, bounds, opts, floor, budget);
    budget = budget.saturating_sub(first.iterations);
    let second = if first.converged && budget > 0 {
        nelder_mead(obj, &first.x, bounds, opts, floor, budget)
    } else {
        first.clone()
    };
    let mut best = if second.rss <= first.rss {
        second.clone()
    } else {
        first.clone()
    };
    best.iterations = first.iterations
        + if first.converged {
            second.iterations
        } else {
            0
        };
    best.converged = first.converged && (second.converged || budget == 0);

    if opts.refine && best.rss > floor {
        let lm = levenberg_marquardt(obj, &best.x, bounds, opts.tolerance, floor, 200);
        best.iterations += lm.iterations;
        if lm.rss <= best.rss {
            best.x = lm.x;
            best.rss = lm.rss;
        }
        best.converged |= lm.converged;
        if !best.converged {
            best.message = format!(
                "iteration limit reached ({}); {}",
                opts.max_iterations, lm.message
            );
        } else {
            best.message = lm.message;
        }
    } else if !best.converged {
        best.message = format!(
            "simplex search hit the iteration limit ({})",
            opts.max_iterations
        );
    }
    best
}

fn nelder_mead<F: Fn(&[f64]) -> Vec<f64>>(
    obj: &Objective<'_, F>,
    x0: &[f64],
    bounds: &Bounds,
    opts: &LeastSquaresOptions,
    floor: f64,
    max_iter: usize,
) -> Candidate {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let step = match &opts.initial_step {
            Some(s) if s.len() == n && s[i] != 0.0 => s[i],
            _ if x0[i] != 0.0 => 0.1 * x0[i].abs(),
            _ => {
                let width = bounds.upper[i] - bounds.lower[i];
                if width.is_finite() {
                    0.1 * width
                } else {
                    0.01
                }
            }
        };
        let mut v = x0.to_vec();
        v[i] += step;
        bounds.project(&mut v);
        if v[i] == x0[i] {
            v[i] = x0[i] - step;
            bounds.project(&mut v);
        }
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| obj.rss(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fvals = order.iter().map(|&i| fvals[i]).collect();

        let (f_best, f_worst) = (fvals[0], fvals[n]);
        let spread_ok = f_worst - f_best <= opts.tolerance * f_best.abs() + floor;
        let size = simplex[1..]
            .iter()
            .flat_map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-12))
            })
            .fold(0.0, f64::max);
        if (spread_ok && size < 1e-6) || size < 1e-13 {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            bounds.project(&mut v);
            v
        };

        let xr = along(-1.0);
        let fr = obj.rss(&xr);
        if fr < fvals[0] {
            let xe = along(-2.0);
            let fe = obj.rss(&xe);
            if fe < fr {
                simplex[n] = xe;
                fvals[n] = fe;
            } else {
                simplex[n] = xr;
                fvals[n] = fr;
            }
            continue;
        }
        if fr < fvals[n - 1] {
            simplex[n] = xr;
            fvals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fvals[n] {
            let x = along(-0.5);
            let f = obj.rss(&x);
            (x, f)
        } else {
            let x = along(0.5);
            let f = obj.rss(&x);
            (x, f)
        };
        if fc < fvals[n].min(fr) {
            simplex[n] = xc;
            fvals[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let mut v: Vec<f64> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(a, b)| b + 0.5 * (a - b))
                .collect();
            bounds.project(&mut v);
            fvals[i] = obj.rss(&v);
            simplex[i] = v;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| fvals[a].total_cmp(&fvals[b]))
        .unwrap();
    Candidate {
        x: simplex[best].clone(),
        rss: fvals[best],
        converged,
        iterations,
        message: if converged {
            "simplex converged".into()
        } else {
            "simplex iteration limit".into()
        },
    }
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(
    obj: &Objective<'_, F>,
    x: &[f64],
    bounds: &Bounds,
) -> Option<DMatrix<f64>> {
    let base = obj.residuals(x)?;
    let m = base.len();
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1e-3);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] = (x[k] + h).min(bounds.upper[k]);
        xm[k] = (x[k] - h).max(bounds.lower[k]);
        let (rp, rm) = (obj.residuals(&xp)?, obj.residuals(&xm)?);
        let dx = xp[k] - xm[k];
        if dx == 0.0 {
            continue;
        }
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / dx;
        }
    }
    Some(j)
}

fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(
    obj: &Objective<'_, F>,
    x0: &[f64],
    bounds: &Bounds,
    tol: f64,
    floor: f64,
    max_iter: usize,
) -> Candidate {
    let mut x = x0.to_vec();
    let mut rss = obj.rss(&x);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = String::from("gradient refinement iteration limit");
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let (Some(j), Some(r)) = (jacobian(obj, &x, bounds), obj.residuals(&x)) else {
            message = "non-finite model output during refinement".into();
            break;
        };
        let r = DVector::from_vec(r);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &r;
        if grad.amax() <= 1e-14 * (1.0 + rss.sqrt()) {
            converged = true;
            message = "gradient vanished".into();
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            bounds.project(&mut trial);
            let f = obj.rss(&trial);
            if f < rss {
                let rel = (rss - f) / rss.max(floor);
                let step_size = trial
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-12))
                    .fold(0.0, f64::max);
                x = trial;
                rss = f;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < tol || step_size < 1e-14 || rss <= floor {
                    converged = true;
                    message = "converged".into();
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
            message = "converged (no further descent)".into();
            break;
        }
    }
    Candidate {
        x,
        rss,
        converged,
        iterations,
        message,
    }
}

fn curvature_uncertainties<F: Fn(&[f64]) -> Vec<f64>>(
    obj: &Objective<'_, F>,
    x: &[f64],
    bounds: &Bounds,
    rss: f64,
) -> Vec<f64> {
    let n = x.len();
    let Some(j) = jacobian(obj, x, bounds) else {
        return vec![f64::INFINITY; n];
    };
    let m = j.nrows();
    let dof = m as f64 - n as f64;
    let s2 = if dof > 0.0 { rss / dof } else { f64::INFINITY };
    let svd = j.svd(false, true);
    let Some(vt) = svd.v_t else {
        return vec![f64::INFINITY; n];
    };
    let smax = svd.singular_values.max();
    let mut var = vec![0.0; n];
    for (k, &s) in svd.singular_values.iter().enumerate() {
        for i in 0..n {
            let v = vt[(k, i)];
            if s <= 1e-10 * smax || s == 0.0 {
                if v.abs() > 1e-8 {
                    var[i] = f64::INFINITY;
                }
            } else {
                var[i] += v * v / (s * s);
            }
        }
    }
    var.iter()
        .map(|v| {
            if s2 == 0.0 && v.is_finite() {
                0.0
            } else {
                (s2 * v).sqrt()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_model_recovers_centre() {
        let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.25).collect();
        let data: Vec<f64> = xs.iter().map(|x| (x - 3.0f64).powi(2)).collect();
        let model = |p: &[f64]| xs.iter().map(|x| (x - p[0]).powi(2)).collect();
        let fit = least_squares(model, &[1.0], &data, &LeastSquaresOptions::named(["c"])).unwrap();
        assert!(fit.converged);
        assert!((fit.value("c").unwrap() - 3.0).abs() < 1e-8, "{:?}", fit);
    }

    #[test]
    fn empty_data_is_a_domain_error() {
        let model = |_: &[f64]| Vec::new();
        assert!(matches!(
            least_squares(model, &[1.0], &[], &LeastSquaresOptions::default()),
            Err(Error::Domain(_))
        ));
        let model = |_: &[f64]| vec![0.0];
        assert!(
            least_squares(model, &[f64::NAN], &[1.0], &LeastSquaresOptions::default()).is_err()
        );
    }

    #[test]
    fn multi_start_finds_global_minimum() {
        // residual surface in `a` has a local minimum near a = -1.7 and the
        // global one at a = 2
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + i as f64 * 0.1).collect();
        let f = |a: f64, x: f64| (a * x).sin() + 0.1 * a * a;
        let data: Vec<f64> = xs.iter().map(|&x| f(2.0, x)).collect();
        let model = |p: &[f64]| xs.iter().map(|&x| f(p[0], x)).collect::<Vec<f64>>();
        let rss = |a: f64| -> f64 {
            model(&[a])
                .iter()
                .zip(&data)
                .map(|(m, d)| (m - d).powi(2))
                .sum()
        };

        // grid-scan oracle over the interval
        let grid: Vec<f64> = (0..=8000).map(|i| -4.0 + i as f64 * 0.001).collect();
        let oracle = grid
            .iter()
            .copied()
            .min_by(|a, b| rss(*a).total_cmp(&rss(*b)))
            .unwrap();

        let single = least_squares(model, &[-2.0], &data, &LeastSquaresOptions::default()).unwrap();
        let opts = LeastSquaresOptions::default()
            .bounds(vec![-4.0], vec![4.0])
            .with_starts(vec![vec![-3.0], vec![0.5], vec![3.0]]);
        let multi = least_squares(model, &[-2.0], &data, &opts).unwrap();
        assert!(
            (multi.values[0] - oracle).abs() < 2e-3,
            "{} vs {}",
            multi.values[0],
            oracle
        );
        assert!(multi.rss <= single.rss);
    }

    #[test]
    fn bounds_are_respected() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let data: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] * x).collect();
        let opts = LeastSquaresOptions::default().bounds(vec![0.0], vec![1.5]);
        let fit = least_squares(model, &[0.5], &data, &opts).unwrap();
        assert!(fit.values[0] <= 1.5 && fit.values[0] > 1.5 - 1e-6);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let data: Vec<f64> = xs.iter().map(|x| (1.3 * x).exp() + 0.5 * x).collect();
        let model = |p: &[f64]| xs.iter().map(|x| (p[0] * x).exp() + p[1] * x).collect();
        let opts = LeastSquaresOptions {
            max_iterations: 3,
            refine: false,
            ..LeastSquaresOptions::default()
        };
        let fit = least_squares(model, &[0.1, 3.0], &data, &opts).unwrap();
        assert!(!fit.converged);
        assert!(matches!(
            fit.require_converged(),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn linear_fit_uncertainty_matches_closed_form() {
        // y = a x with noise-like residual pattern; var(a) = s² / Σx²
        let xs: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let wiggle = |i: usize| if i.is_multiple_of(2) { 0.3 } else { -0.3 };
        let data: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 1.5 * x + wiggle(i))
            .collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] * x).collect();
        let fit = least_squares(model, &[1.0], &data, &LeastSquaresOptions::default()).unwrap();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let a = xs.iter().zip(&data).map(|(x, y)| x * y).sum::<f64>() / sxx;
        let rss: f64 = xs.iter().zip(&data).map(|(x, y)| (y - a * x).powi(2)).sum();
        let sigma = (rss / 19.0 / sxx).sqrt();
        assert!((fit.values[0] - a).abs() < 1e-10);
        assert!((fit.uncertainties[0] / sigma - 1.0).abs() < 1e-4);
    }

    #[test]
    fn deterministic_given_identical_inputs() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let data: Vec<f64> = xs
            .iter()
            .map(|x| 2.0 * (-0.3 * x).exp() + 0.01 * (7.0 * x).sin())
            .collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] * (-p[1] * x).exp()).collect();
        let opts = LeastSquaresOptions::default().with_starts(vec![vec![1.0, 1.0], vec![3.0, 0.1]]);
        let a = least_squares(model, &[0.5, 0.5], &data, &opts).unwrap();
        let b = least_squares(model, &[0.5, 0.5], &data, &opts).unwrap();
        assert_eq!(a, b);
    }
}
