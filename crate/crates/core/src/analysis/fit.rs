//! Weighted nonlinear least squares for the small closed set of decay and
//! fringe models.
//!
//! The solver is a bound-projected Levenberg-Marquardt iteration with a
//! central-difference Jacobian (relative step 1e-6 per parameter). It stops
//! when the largest relative parameter step drops below 1e-10 or an accepted
//! step lowers the residual by less than 1e-12 relative, and gives up after
//! 500 iterations. Standard errors come from `s^2 (J^T W J)^-1` at the optimum
//! with `s^2` the reduced chi-square.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::noise::ENVELOPE_CONSTANT;

const MAX_ITERATIONS: usize = 500;
const STEP_TOL: f64 = 1e-10;
const DECREASE_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `a exp(-t/tau) + b`, parameters `[a, tau, b]`.
    Exponential,
    /// `a exp(-t^2/tau^2) + b`, parameters `[a, tau, b]`.
    Gaussian,
    /// `a + b (1 + 0.95 (t/tau)^2)^(-3/2)`, parameters `[a, b, tau]`.
    KuhrEnvelope,
    /// `A cos(k x + pi/2) + B`; parameters `[A, B]` when `k` is fixed,
    /// `[A, k, B]` when it is free (`None`).
    CosineFringe { k: Option<f64> },
    /// `m x + c`, parameters `[m, c]`.
    Linear,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Exponential => "exponential",
            ModelKind::Gaussian => "gaussian",
            ModelKind::KuhrEnvelope => "kuhr",
            ModelKind::CosineFringe { .. } => "cosine",
            ModelKind::Linear => "linear",
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::Exponential | ModelKind::Gaussian => &["a", "tau", "b"],
            ModelKind::KuhrEnvelope => &["a", "b", "tau"],
            ModelKind::CosineFringe { k: Some(_) } => &["A", "B"],
            ModelKind::CosineFringe { k: None } => &["A", "k", "B"],
            ModelKind::Linear => &["m", "c"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.parameter_names().len()
    }

    /// Index of the decay time, if the model has one.
    pub fn tau_index(&self) -> Option<usize> {
        match self {
            ModelKind::Exponential | ModelKind::Gaussian => Some(1),
            ModelKind::KuhrEnvelope => Some(2),
            _ => None,
        }
    }

    pub fn evaluate(&self, p: &[f64], x: f64) -> f64 {
        match self {
            ModelKind::Exponential => p[0] * (-x / p[1]).exp() + p[2],
            ModelKind::Gaussian => p[0] * (-(x * x) / (p[1] * p[1])).exp() + p[2],
            ModelKind::KuhrEnvelope => {
                let r = x / p[2];
                p[0] + p[1] * (1.0 + ENVELOPE_CONSTANT * r * r).powf(-1.5)
            }
            ModelKind::CosineFringe { k: Some(k) } => p[0] * (k * x + std::f64::consts::FRAC_PI_2).cos() + p[1],
            ModelKind::CosineFringe { k: None } => p[0] * (p[1] * x + std::f64::consts::FRAC_PI_2).cos() + p[2],
            ModelKind::Linear => p[0] * x + p[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    pub kind: ModelKind,
    /// Derived from the data when absent.
    pub initial_guess: Option<Vec<f64>>,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl FitModel {
    pub fn new(kind: ModelKind) -> Self {
        FitModel { kind, initial_guess: None, bounds: None }
    }

    pub fn with_initial_guess(mut self, guess: Vec<f64>) -> Self {
        self.initial_guess = Some(guess);
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    pub parameters: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Weighted sum of squared residuals.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn tau(&self) -> Option<(f64, f64)> {
        self.kind.tau_index().map(|i| (self.parameters[i], self.std_errors[i]))
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.kind.evaluate(&self.parameters, x)
    }
}

/// Coefficient of determination of a fitted curve.
pub fn r_squared(fit: &FitResult, xs: &[f64], ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - fit.evaluate(x)).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

struct DataScale {
    x_span: f64,
    y_range: f64,
}

impl DataScale {
    fn of(xs: &[f64], ys: &[f64]) -> Self {
        let (xmin, xmax) = min_max(xs);
        let (ymin, ymax) = min_max(ys);
        DataScale {
            x_span: (xmax - xmin).max(xmax.abs().max(xmin.abs()) * 1e-12).max(f64::MIN_POSITIVE),
            y_range: (ymax - ymin).max(ymax.abs().max(ymin.abs()) * 1e-12).max(f64::MIN_POSITIVE),
        }
    }

    /// Characteristic magnitude of each parameter.
    fn typical(&self, kind: &ModelKind) -> Vec<f64> {
        let (xs, ys) = (self.x_span, self.y_range);
        match kind {
            ModelKind::Exponential | ModelKind::Gaussian => vec![ys, xs, ys],
            ModelKind::KuhrEnvelope => vec![ys, ys, xs],
            ModelKind::CosineFringe { k: Some(_) } => vec![ys, ys],
            ModelKind::CosineFringe { k: None } => vec![ys, 1.0 / xs, ys],
            ModelKind::Linear => vec![ys / xs, ys],
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn default_bounds(kind: &ModelKind, scale: &DataScale) -> Vec<(f64, f64)> {
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let tau = (scale.x_span * 1e-9, scale.x_span * 1e9);
    match kind {
        ModelKind::Exponential | ModelKind::Gaussian => vec![free, tau, free],
        ModelKind::KuhrEnvelope => vec![free, free, tau],
        ModelKind::CosineFringe { k: Some(_) } => vec![free, free],
        ModelKind::CosineFringe { k: None } => vec![free, (f64::MIN_POSITIVE, f64::INFINITY), free],
        ModelKind::Linear => vec![free, free],
    }
}

/// Ordinary least squares of `y = c0 * f(x) + c1`.
fn linear_two(xs: &[f64], ys: &[f64], f: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let fx: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mf = fx.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sff: f64 = fx.iter().map(|v| (v - mf).powi(2)).sum();
    let sfy: f64 = fx.iter().zip(ys).map(|(v, y)| (v - mf) * (y - my)).sum();
    if sff <= 0.0 {
        return None;
    }
    let slope = sfy / sff;
    Some((slope, my - slope * mf))
}

/// Starting point from the data: amplitude from the range, decay time from
/// the first crossing of the half-range level.
fn auto_guess(kind: &ModelKind, xs: &[f64], ys: &[f64], scale: &DataScale) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let x0 = xs[order[0]];
    let y_first = ys[order[0]];
    let y_last = ys[*order.last().unwrap()];
    let (lo, hi) = min_max(ys);
    let decreasing = y_first >= y_last;
    let mid = 0.5 * (lo + hi);

    let crossing = order
        .iter()
        .map(|&i| (xs[i], ys[i]))
        .find(|&(_, y)| if decreasing { y <= mid } else { y >= mid })
        .map(|(x, _)| x - x0)
        .filter(|&d| d > 0.0)
        .unwrap_or(scale.x_span);
    let amplitude = if decreasing { hi - lo } else { lo - hi };
    let baseline = if decreasing { lo } else { hi };

    match kind {
        ModelKind::Exponential => {
            let tau = crossing / std::f64::consts::LN_2;
            let a = amplitude * (x0 / tau).exp();
            vec![if a.is_finite() { a } else { amplitude }, tau, baseline]
        }
        ModelKind::Gaussian => {
            let tau = crossing / std::f64::consts::LN_2.sqrt();
            let a = amplitude * (x0 * x0 / (tau * tau)).exp();
            vec![if a.is_finite() { a } else { amplitude }, tau, baseline]
        }
        ModelKind::KuhrEnvelope => {
            // (1 + 0.95 r^2)^(-3/2) = 1/2 at r^2 = (2^(2/3) - 1) / 0.95
            let r_half = ((2f64.powf(2.0 / 3.0) - 1.0) / ENVELOPE_CONSTANT).sqrt();
            let tau = crossing / r_half;
            let r0 = x0 / tau;
            let b = amplitude / (1.0 + ENVELOPE_CONSTANT * r0 * r0).powf(-1.5);
            vec![baseline, if b.is_finite() { b } else { amplitude }, tau]
        }
        ModelKind::CosineFringe { k } => {
            let k0 = k.unwrap_or(1.0);
            let (a, b) =
                linear_two(xs, ys, |x| (k0 * x + std::f64::consts::FRAC_PI_2).cos()).unwrap_or((0.5 * (hi - lo), mid));
            match k {
                Some(_) => vec![a, b],
                None => vec![a, k0, b],
            }
        }
        ModelKind::Linear => {
            let (m, c) = linear_two(xs, ys, |x| x).unwrap_or((0.0, mid));
            vec![m, c]
        }
    }
}

struct Problem<'a> {
    kind: ModelKind,
    xs: &'a [f64],
    ys: &'a [f64],
    sqrt_w: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    typical: Vec<f64>,
}

impl Problem<'_> {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().zip(self.ys).zip(&self.sqrt_w).map(|((&x, &y), &w)| w * (y - self.kind.evaluate(p, x))),
        )
    }

    fn cost(&self, p: &[f64]) -> f64 {
        let r = self.residuals(p);
        let c = r.dot(&r);
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }

    /// Jacobian of the weighted model values.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.xs.len();
        let mut jac = DMatrix::zeros(n, p.len());
        let mut probe = p.to_vec();
        for j in 0..p.len() {
            let h = FD_STEP * p[j].abs().max(1e-3 * self.typical[j]);
            let (lo, hi) = self.bounds[j];
            let up = (p[j] + h).min(hi);
            let down = (p[j] - h).max(lo);
            let width = up - down;
            if width <= 0.0 {
                continue;
            }
            probe[j] = up;
            let f_up: Vec<f64> = self.xs.iter().map(|&x| self.kind.evaluate(&probe, x)).collect();
            probe[j] = down;
            for i in 0..n {
                let f_down = self.kind.evaluate(&probe, self.xs[i]);
                jac[(i, j)] = self.sqrt_w[i] * (f_up[i] - f_down) / width;
            }
            probe[j] = p[j];
        }
        jac
    }

    fn clamp(&self, p: &mut [f64]) {
        for (v, &(lo, hi)) in p.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Gradient norm relative to `|J| |r|`, ignoring components blocked by an
    /// active bound.
    fn scaled_gradient(&self, p: &[f64], jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
        let g = jac.transpose() * r;
        let mut g2 = 0.0;
        for j in 0..p.len() {
            let (lo, hi) = self.bounds[j];
            // cost decreases along +g_j
            let blocked = (g[j] > 0.0 && p[j] >= hi) || (g[j] < 0.0 && p[j] <= lo);
            if !blocked {
                g2 += g[j] * g[j];
            }
        }
        let denom = jac.norm() * r.norm();
        if denom == 0.0 {
            0.0
        } else {
            g2.sqrt() / denom
        }
    }
}

pub fn fit_curve(model: &FitModel, xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    let kind = model.kind;
    let np = kind.n_params();
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("xs has {} points but ys has {}", xs.len(), ys.len())));
    }
    if xs.len() < np + 1 {
        return Err(Error::invalid(format!("{} fit needs at least {} points, got {}", kind.name(), np + 1, xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("data must be finite"));
    }
    let sqrt_w = match weights {
        Some(w) => {
            if w.len() != xs.len() || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("weights must be finite, nonnegative, one per point"));
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
        None => vec![1.0; xs.len()],
    };
    if let ModelKind::CosineFringe { k: Some(k) } = kind {
        if !k.is_finite() {
            return Err(Error::invalid("fixed fringe frequency must be finite"));
        }
    }

    let scale = DataScale::of(xs, ys);
    let bounds = match &model.bounds {
        Some(b) if b.len() != np => {
            return Err(Error::invalid(format!("{} bounds given for {} parameters", b.len(), np)))
        }
        Some(b) => b.clone(),
        None => default_bounds(&kind, &scale),
    };
    if bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::invalid("each bound must satisfy lower <= upper"));
    }
    if let Some(i) = kind.tau_index() {
        if !(bounds[i].0 > 0.0) {
            return Err(Error::invalid("decay-time bounds must be strictly positive"));
        }
    }
    let mut p = match &model.initial_guess {
        Some(g) => {
            if g.len() != np {
                return Err(Error::invalid(format!("initial guess has {} values, model needs {}", g.len(), np)));
            }
            if g.iter().zip(&bounds).any(|(v, (lo, hi))| !(v >= lo && v <= hi)) {
                return Err(Error::invalid("initial guess lies outside the bounds"));
            }
            g.clone()
        }
        None => auto_guess(&kind, xs, ys, &scale),
    };

    let typical = {
        let t = scale.typical(&kind);
        t.iter().zip(&p).map(|(a, b)| a.max(b.abs()).max(f64::MIN_POSITIVE)).collect()
    };
    let problem = Problem { kind, xs, ys, sqrt_w, bounds, typical };
    problem.clamp(&mut p);

    let tiny = 1e-30 * xs.len() as f64 * scale.y_range * scale.y_range;
    let mut cost = problem.cost(&p);
    if !cost.is_finite() {
        return Err(Error::invalid("model is not finite at the initial guess"));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS && !converged {
        iterations += 1;
        if cost <= tiny {
            converged = true;
            break;
        }
        let jac = problem.jacobian(&p);
        let r = problem.residuals(&p);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let max_diag = jtj.diagonal().max();
        // Parameters held at a bound that the descent direction pushes through.
        let free: Vec<usize> = (0..np)
            .filter(|&j| {
                let (lo, hi) = problem.bounds[j];
                !((p[j] <= lo && g[j] < 0.0) || (p[j] >= hi && g[j] > 0.0))
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let jtj_free = jtj.select_rows(&free).select_columns(&free);
        let g_free = g.select_rows(&free);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj_free.clone();
            for j in 0..free.len() {
                a[(j, j)] += lambda * jtj_free[(j, j)].max(1e-12 * max_diag).max(f64::MIN_POSITIVE);
            }
            let Some(step_free) = a.lu().solve(&g_free) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p.clone();
            for (i, &j) in free.iter().enumerate() {
                trial[j] += step_free[i];
            }
            problem.clamp(&mut trial);
            let trial_cost = problem.cost(&trial);
            if trial_cost < cost {
                let rel_step = trial
                    .iter()
                    .zip(&p)
                    .zip(&problem.typical)
                    .map(|((a, b), t)| (a - b).abs() / (b.abs() + 1e-3 * t))
                    .fold(0.0, f64::max);
                let rel_decrease = (cost - trial_cost) / cost;
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_step < STEP_TOL || rel_decrease < DECREASE_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: stationary to working precision.
            let jac = problem.jacobian(&p);
            let r = problem.residuals(&p);
            converged = problem.scaled_gradient(&p, &jac, &r) < GRADIENT_TOL;
            break;
        }
    }

    let jac = problem.jacobian(&p);
    let r = problem.residuals(&p);
    if converged && cost > tiny {
        converged = problem.scaled_gradient(&p, &jac, &r) < GRADIENT_TOL;
    }
    let jtj = jac.transpose() * &jac;
    let cov = jtj.clone().cholesky().map(|c| c.inverse()).filter(|inv| inv.iter().all(|v| v.is_finite()));
    let Some(cov) = cov else {
        return Err(Error::Degenerate(format!("{} fit: normal equations are singular at the solution", kind.name())));
    };
    let dof = xs.len().saturating_sub(np).max(1) as f64;
    let s2 = cost / dof;
    let std_errors = (0..np).map(|j| (s2 * cov[(j, j)]).max(0.0).sqrt()).collect();

    Ok(FitResult { kind, parameters: p, std_errors, residual_norm: cost, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_exponential_recovery() {
        let truth = [0.5, 20e-3, 0.1];
        let xs = grid(60, 0.0, 0.1);
        let ys: Vec<f64> = xs.iter().map(|&x| ModelKind::Exponential.evaluate(&truth, x)).collect();
        let fit = fit_curve(&FitModel::new(ModelKind::Exponential), &xs, &ys, None).unwrap();
        assert!(fit.converged);
        for (a, b) in fit.parameters.iter().zip(truth) {
            assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_linear_recovery() {
        let xs = [540.0, 1000.0, 2000.0, 3000.0, 4333.0, 4800.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.022 * x - 4.86).collect();
        let fit = fit_curve(&FitModel::new(ModelKind::Linear), &xs, &ys, None).unwrap();
        assert!((fit.parameters[0] - 0.022).abs() < 1e-9);
        assert!((fit.parameters[1] + 4.86).abs() < 1e-9);
        assert!((r_squared(&fit, &xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let err = fit_curve(&FitModel::new(ModelKind::Exponential), &[0.0, 1.0, 2.0], &[1.0, 0.5, 0.2], None);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn singular_normal_equations_reported() {
        let xs = [1.0; 6];
        let ys = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let err = fit_curve(&FitModel::new(ModelKind::Linear), &xs, &ys, None);
        assert!(matches!(err, Err(Error::Degenerate(_))), "{err:?}");
    }

    #[test]
    fn guess_outside_bounds_rejected() {
        let xs = grid(10, 0.0, 1.0);
        let model = FitModel::new(ModelKind::Linear)
            .with_initial_guess(vec![5.0, 0.0])
            .with_bounds(vec![(0.0, 1.0), (-1.0, 1.0)]);
        assert!(fit_curve(&model, &xs, &xs, None).is_err());
        let model = FitModel::new(ModelKind::Exponential).with_bounds(vec![(-1.0, 1.0), (0.0, 1.0), (-1.0, 1.0)]);
        assert!(fit_curve(&model, &xs, &xs, None).is_err());
    }

    #[test]
    fn weights_pull_the_fit() {
        let xs = grid(20, 0.0, 1.0);
        let mut ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        ys[0] = 50.0;
        let mut w = vec![1.0; 20];
        w[0] = 0.0;
        let fit = fit_curve(&FitModel::new(ModelKind::Linear), &xs, &ys, Some(&w)).unwrap();
        assert!((fit.parameters[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_fringe_with_fixed_frequency() {
        let xs = grid(16, 0.0, 2.0 * std::f64::consts::PI * 15.0 / 16.0);
        let ys: Vec<f64> = xs.iter().map(|&x| 0.3 * (x + std::f64::consts::FRAC_PI_2).cos() + 0.1).collect();
        let fit = fit_curve(&FitModel::new(ModelKind::CosineFringe { k: Some(1.0) }), &xs, &ys, None).unwrap();
        assert!((fit.parameters[0] - 0.3).abs() < 1e-9);
        assert!((fit.parameters[1] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn bound_active_solution_still_converges() {
        let xs = grid(16, 0.0, 6.0);
        let ys: Vec<f64> = xs.iter().map(|&x| -0.2 * (x + std::f64::consts::FRAC_PI_2).cos()).collect();
        let model = FitModel::new(ModelKind::CosineFringe { k: Some(1.0) }).with_bounds(vec![(0.0, 1.0), (-1.0, 1.0)]);
        let fit = fit_curve(&model, &xs, &ys, None).unwrap();
        assert_eq!(fit.parameters[0], 0.0);
        assert!(fit.converged);
    }
}
