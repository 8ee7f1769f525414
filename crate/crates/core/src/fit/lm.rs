use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One fit parameter: initial guess, box bounds, optional freeze.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub init: f64,
    /// Lower bound; use `f64::NEG_INFINITY` for unbounded.
    pub lower: f64,
    /// Upper bound; use `f64::INFINITY` for unbounded.
    pub upper: f64,
    /// Frozen parameters keep their initial value and get sigma 0.
    pub fixed: bool,
}

impl ParamSpec {
    pub fn free(name: &str, init: f64) -> Self {
        Self::bounded(name, init, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn bounded(name: &str, init: f64, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            init,
            lower,
            upper,
            fixed: false,
        }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            init: value,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            fixed: true,
        }
    }
}

/// Convergence controls for the damped least-squares loop.
#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls below this.
    pub gradient_tol: f64,
    /// Stop when the accepted step is this small relative to the state.
    pub step_tol: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            max_iterations: 200,
            gradient_tol: 1e-12,
            step_tol: 1e-14,
        }
    }
}

/// Residual closure: external parameter values in, one residual per datum
/// out.
pub type ResidualFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;
/// Analytic Jacobian closure: n_residuals x n_params, external space.
pub type JacobianFn<'a> = Box<dyn Fn(&[f64]) -> DMatrix<f64> + 'a>;

/// A weighted nonlinear least-squares problem.
///
/// The residual closure receives external (physical) parameter values and
/// returns one residual per datum; weights multiply squared residuals in
/// the cost. An analytic Jacobian is optional; central finite differences
/// are used when absent.
pub struct FitProblem<'a> {
    residuals: ResidualFn<'a>,
    jacobian: Option<JacobianFn<'a>>,
    params: Vec<ParamSpec>,
    weights: Vec<f64>,
    settings: FitSettings,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        params: Vec<ParamSpec>,
        weights: Vec<f64>,
        residuals: impl Fn(&[f64]) -> Vec<f64> + 'a,
    ) -> Self {
        FitProblem {
            residuals: Box::new(residuals),
            jacobian: None,
            params,
            weights,
            settings: FitSettings::default(),
        }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&[f64]) -> DMatrix<f64> + 'a) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    pub fn with_settings(mut self, settings: FitSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Invalid("fit has no parameters".into()));
        }
        for p in &self.params {
            if !p.fixed && (p.lower.is_nan() || p.upper.is_nan() || p.lower >= p.upper) {
                return Err(Error::Invalid(format!(
                    "parameter `{}`: bounds [{}, {}] are empty",
                    p.name, p.lower, p.upper
                )));
            }
            if !p.fixed && (p.init < p.lower || p.init > p.upper) {
                return Err(Error::Invalid(format!(
                    "parameter `{}`: initial {} outside [{}, {}]",
                    p.name, p.init, p.lower, p.upper
                )));
            }
        }
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::Invalid(format!("weight {i} = {w} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Fitted parameter estimates with 1-sigma uncertainties from the residual
/// covariance at the optimum.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Cost after each accepted step (starting at the initial guess);
    /// non-increasing by construction of the damping loop.
    pub cost_trace: Vec<f64>,
    pub residual_count: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.estimates[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.sigmas[i])
    }
}

/// Bound transform between internal (unconstrained) and external
/// (physical) coordinates.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Free,
    Lower(f64),
    Upper(f64),
    Both { lo: f64, hi: f64 },
}

impl Transform {
    fn for_param(p: &ParamSpec) -> Transform {
        match (p.lower.is_finite(), p.upper.is_finite()) {
            (false, false) => Transform::Free,
            (true, false) => Transform::Lower(p.lower),
            (false, true) => Transform::Upper(p.upper),
            (true, true) => Transform::Both {
                lo: p.lower,
                hi: p.upper,
            },
        }
    }

    fn to_external(self, u: f64) -> f64 {
        match self {
            Transform::Free => u,
            Transform::Lower(lo) => lo - 1.0 + (u * u + 1.0).sqrt(),
            Transform::Upper(hi) => hi + 1.0 - (u * u + 1.0).sqrt(),
            Transform::Both { lo, hi } => lo + 0.5 * (hi - lo) * (u.sin() + 1.0),
        }
    }

    fn to_internal(self, p: f64) -> f64 {
        match self {
            Transform::Free => p,
            Transform::Lower(lo) => ((p - lo + 1.0).powi(2) - 1.0).max(0.0).sqrt(),
            Transform::Upper(hi) => ((hi - p + 1.0).powi(2) - 1.0).max(0.0).sqrt(),
            Transform::Both { lo, hi } => (2.0 * (p - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0).asin(),
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Free => 1.0,
            Transform::Lower(_) => u / (u * u + 1.0).sqrt(),
            Transform::Upper(_) => -u / (u * u + 1.0).sqrt(),
            Transform::Both { lo, hi } => 0.5 * (hi - lo) * u.cos(),
        }
    }

    /// Nudge an initial value strictly inside the box so the transform
    /// derivative is nonzero and the parameter can move.
    fn interior(self, p: f64) -> f64 {
        match self {
            Transform::Free => p,
            Transform::Lower(lo) => {
                let pad = 1e-10 * (1.0 + lo.abs()).max(1.0);
                p.max(lo + pad)
            }
            Transform::Upper(hi) => {
                let pad = 1e-10 * (1.0 + hi.abs()).max(1.0);
                p.min(hi - pad)
            }
            Transform::Both { lo, hi } => {
                let pad = 1e-9 * (hi - lo);
                p.clamp(lo + pad, hi - pad)
            }
        }
    }
}

struct Workspace<'p, 'a> {
    problem: &'p FitProblem<'a>,
    transforms: Vec<Transform>,
    free_idx: Vec<usize>,
    external: Vec<f64>,
    sqrt_w: Vec<f64>,
}

impl<'p, 'a> Workspace<'p, 'a> {
    fn new(problem: &'p FitProblem<'a>) -> Self {
        let transforms: Vec<Transform> =
            problem.params.iter().map(Transform::for_param).collect();
        let free_idx: Vec<usize> = problem
            .params
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.fixed)
            .map(|(i, _)| i)
            .collect();
        let external: Vec<f64> = problem.params.iter().map(|p| p.init).collect();
        let sqrt_w: Vec<f64> = problem.weights.iter().map(|w| w.sqrt()).collect();
        Workspace {
            problem,
            transforms,
            free_idx,
            external,
            sqrt_w,
        }
    }

    fn initial_internal(&mut self) -> DVector<f64> {
        let mut u = DVector::zeros(self.free_idx.len());
        for (k, &i) in self.free_idx.iter().enumerate() {
            let t = self.transforms[i];
            let p0 = t.interior(self.problem.params[i].init);
            self.external[i] = t.to_external(t.to_internal(p0));
            u[k] = t.to_internal(p0);
        }
        u
    }

    fn set_internal(&mut self, u: &DVector<f64>) {
        for (k, &i) in self.free_idx.iter().enumerate() {
            self.external[i] = self.transforms[i].to_external(u[k]);
        }
    }

    /// Weighted residual vector at the current external parameters.
    fn residuals(&self) -> Option<DVector<f64>> {
        let raw = (self.problem.residuals)(&self.external);
        if raw.len() != self.sqrt_w.len() {
            return None;
        }
        let mut r = DVector::zeros(raw.len());
        for (i, v) in raw.iter().enumerate() {
            r[i] = v * self.sqrt_w[i];
        }
        Some(r)
    }

    /// Weighted Jacobian with respect to internal coordinates.
    fn jacobian(&mut self, u: &DVector<f64>) -> DMatrix<f64> {
        let n_res = self.sqrt_w.len();
        let n_free = self.free_idx.len();
        let mut jac = DMatrix::zeros(n_res, n_free);
        if let Some(jfn) = &self.problem.jacobian {
            let j_ext = jfn(&self.external);
            for (k, &i) in self.free_idx.iter().enumerate() {
                let dpdu = self.transforms[i].derivative(u[k]);
                for row in 0..n_res {
                    jac[(row, k)] = j_ext[(row, i)] * dpdu * self.sqrt_w[row];
                }
            }
        } else {
            // central differences in internal coordinates
            let mut u_pert = u.clone();
            for k in 0..n_free {
                let h = (1e-6 * u[k].abs()).max(1e-8);
                u_pert[k] = u[k] + h;
                self.set_internal(&u_pert);
                let plus = self.residuals().expect("residual length is stable");
                u_pert[k] = u[k] - h;
                self.set_internal(&u_pert);
                let minus = self.residuals().expect("residual length is stable");
                u_pert[k] = u[k];
                for row in 0..n_res {
                    jac[(row, k)] = (plus[row] - minus[row]) / (2.0 * h);
                }
            }
            self.set_internal(u);
        }
        jac
    }
}

/// Run Levenberg-Marquardt on the problem. Deterministic: identical inputs
/// produce identical results.
///
/// Failure to converge within the iteration budget is not an error; the
/// partial result is returned with `converged = false`.
pub fn least_squares(problem: &FitProblem<'_>) -> Result<FitResult> {
    problem.validate()?;
    let mut ws = Workspace::new(problem);
    let mut u = ws.initial_internal();
    ws.set_internal(&u);

    let mut r = ws.residuals().ok_or_else(|| {
        Error::Invalid(format!(
            "residual length does not match the {} weights",
            problem.weights.len()
        ))
    })?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResidual);
    }
    let n_res = r.len();
    let n_free = ws.free_idx.len();
    if n_res < n_free {
        return Err(Error::Invalid(format!(
            "{n_res} residuals cannot constrain {n_free} free parameters"
        )));
    }

    let mut cost = r.norm_squared();
    let mut cost_trace = vec![cost];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = ws.jacobian(&u);

    for iter in 0..problem.settings.max_iterations {
        iterations = iter + 1;
        let grad = jac.transpose() * &r;
        if grad.amax() < problem.settings.gradient_tol {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;

        let mut accepted = false;
        for _ in 0..40 {
            // Marquardt scaling: damp proportionally to the curvature diagonal
            let mut damped = jtj.clone();
            for k in 0..n_free {
                let d = jtj[(k, k)];
                damped[(k, k)] = d + lambda * d.max(1e-12);
            }
            let Some(chol) = damped.clone().cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let u_new = &u + &step;
            ws.set_internal(&u_new);
            let Some(r_new) = ws.residuals() else { break };
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new <= cost {
                let step_small = step.norm() <= problem.settings.step_tol * (u.norm() + 1e-30);
                let cost_drop = cost - cost_new;
                u = u_new;
                r = r_new;
                cost = cost_new;
                cost_trace.push(cost);
                lambda = (lambda / 10.0).max(1e-14);
                accepted = true;
                if step_small || cost_drop <= 1e-30 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            // damping exhausted: no downhill step exists at this precision
            ws.set_internal(&u);
            converged = true;
            break;
        }
        if converged {
            break;
        }
        jac = ws.jacobian(&u);
    }

    ws.set_internal(&u);
    let jac = ws.jacobian(&u);
    let dof = (n_res as isize - n_free as isize).max(1) as f64;
    let chi2_reduced = cost / dof;

    // covariance in internal coordinates, scaled to external via dp/du
    let jtj = jac.transpose() * &jac;
    let mut sigmas = vec![0.0; problem.params.len()];
    let cov_scale = if n_res > n_free { chi2_reduced } else { 1.0 };
    if let Some(inv) = invert_spd(&jtj) {
        for (k, &i) in ws.free_idx.iter().enumerate() {
            let dpdu = ws.transforms[i].derivative(u[k]).abs();
            let var = inv[(k, k)].max(0.0) * cov_scale;
            sigmas[i] = var.sqrt() * dpdu;
        }
    }

    Ok(FitResult {
        names: problem.params.iter().map(|p| p.name.clone()).collect(),
        estimates: ws.external.clone(),
        sigmas,
        chi2_reduced,
        converged,
        iterations,
        cost_trace,
        residual_count: n_res,
    })
}

fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.inverse());
    }
    // near-singular information matrix: regularize just enough to invert
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = m.clone();
    for i in 0..n {
        ridge[(i, i)] += 1e-12 * scale;
    }
    ridge.cholesky().map(|c| c.inverse())
}

/// Compare the problem's analytic Jacobian against central finite
/// differences at `point` (external coordinates, h = max(1e-6 |p|, 1e-8)).
/// Returns the maximum elementwise relative deviation; 0 when the problem
/// carries no analytic Jacobian.
pub fn check_jacobian(problem: &FitProblem<'_>, point: &[f64]) -> f64 {
    let Some(jfn) = &problem.jacobian else {
        return 0.0;
    };
    let analytic = jfn(point);
    let n_res = analytic.nrows();
    let n_par = analytic.ncols();
    let mut p = point.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..n_par {
        let h = (1e-6 * p[j].abs()).max(1e-8);
        let orig = p[j];
        p[j] = orig + h;
        let plus = (problem.residuals)(&p);
        p[j] = orig - h;
        let minus = (problem.residuals)(&p);
        p[j] = orig;
        // entries far below the column scale are finite-difference
        // roundoff, not disagreement
        let col_scale = (0..n_res)
            .map(|i| analytic[(i, j)].abs())
            .fold(0.0, f64::max);
        let floor = (1e-6 * col_scale).max(1e-300);
        for i in 0..n_res {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            let an = analytic[(i, j)];
            let scale = an.abs().max(fd.abs());
            if scale > floor {
                worst = worst.max((an - fd).abs() / scale.max(floor));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_model_recovers_slope() {
        let xs: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let problem = FitProblem::new(
            vec![ParamSpec::free("p", 1.0)],
            vec![1.0; xs.len()],
            |p| xs.iter().zip(&ys).map(|(x, y)| y - p[0] * x).collect(),
        );
        let fit = least_squares(&problem).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.get("p").unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn quadratic_with_bounds_and_fixed() {
        // y = a x^2 + b, a in [0, 10], b frozen
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.5 * x * x + 1.0).collect();
        let problem = FitProblem::new(
            vec![ParamSpec::bounded("a", 0.5, 0.0, 10.0), ParamSpec::fixed("b", 1.0)],
            vec![1.0; xs.len()],
            |p| xs.iter().zip(&ys).map(|(x, y)| y - (p[0] * x * x + p[1])).collect(),
        );
        let fit = least_squares(&problem).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.get("a").unwrap(), 3.5, epsilon = 1e-8);
        assert_eq!(fit.get("b").unwrap(), 1.0);
        assert_eq!(fit.sigma("b").unwrap(), 0.0);
    }

    #[test]
    fn exponential_decay_two_params() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let truth = (4.0, 1.3);
        let ys: Vec<f64> = xs.iter().map(|x| truth.0 * (-truth.1 * x).exp()).collect();
        let problem = FitProblem::new(
            vec![
                ParamSpec::bounded("amp", 1.0, 0.0, f64::INFINITY),
                ParamSpec::bounded("rate", 0.5, 0.0, f64::INFINITY),
            ],
            vec![1.0; xs.len()],
            |p| {
                xs.iter()
                    .zip(&ys)
                    .map(|(x, y)| y - p[0] * (-p[1] * x).exp())
                    .collect()
            },
        );
        let fit = least_squares(&problem).unwrap();
        assert_relative_eq!(fit.get("amp").unwrap(), truth.0, epsilon = 1e-7);
        assert_relative_eq!(fit.get("rate").unwrap(), truth.1, epsilon = 1e-7);
    }

    #[test]
    fn cost_trace_monotone_nonincreasing() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (1.5 * x).sin() + 2.0).collect();
        let problem = FitProblem::new(
            vec![ParamSpec::free("w", 0.7), ParamSpec::free("o", 0.0)],
            vec![1.0; xs.len()],
            |p| xs.iter().zip(&ys).map(|(x, y)| y - ((p[0] * x).sin() + p[1])).collect(),
        );
        let fit = least_squares(&problem).unwrap();
        for w in fit.cost_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "cost must not increase: {:?}", w);
        }
    }

    #[test]
    fn non_finite_initial_residual_is_an_error() {
        let problem = FitProblem::new(
            vec![ParamSpec::free("p", 0.0)],
            vec![1.0],
            |_p| vec![f64::NAN],
        );
        assert!(matches!(least_squares(&problem), Err(Error::NonFiniteResidual)));
    }

    #[test]
    fn initial_guess_outside_bounds_rejected() {
        let problem = FitProblem::new(
            vec![ParamSpec::bounded("p", 5.0, 0.0, 1.0)],
            vec![1.0],
            |p| vec![p[0]],
        );
        assert!(least_squares(&problem).is_err());
    }

    #[test]
    fn underdetermined_rejected() {
        let problem = FitProblem::new(
            vec![ParamSpec::free("a", 0.0), ParamSpec::free("b", 0.0)],
            vec![1.0],
            |p| vec![p[0] + p[1]],
        );
        assert!(least_squares(&problem).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_returns_partial_result() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * (-1.3 * x).exp()).collect();
        let problem = FitProblem::new(
            vec![ParamSpec::free("amp", 0.1), ParamSpec::free("rate", 5.0)],
            vec![1.0; xs.len()],
            |p| {
                xs.iter()
                    .zip(&ys)
                    .map(|(x, y)| y - p[0] * (-p[1] * x).exp())
                    .collect()
            },
        )
        .with_settings(FitSettings {
            max_iterations: 2,
            ..FitSettings::default()
        });
        let fit = least_squares(&problem).unwrap();
        assert!(!fit.converged, "two iterations cannot finish this fit");
        assert_eq!(fit.iterations, 2);
        // partial result: cost still improved over the start
        assert!(fit.cost_trace.last().unwrap() < fit.cost_trace.first().unwrap());
    }

    #[test]
    fn deterministic_repeat() {
        let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 * x * x - 0.2 * x + 5.0).collect();
        let run = || {
            let problem = FitProblem::new(
                vec![
                    ParamSpec::free("a", 0.1),
                    ParamSpec::free("b", 0.1),
                    ParamSpec::free("c", 0.1),
                ],
                vec![1.0; xs.len()],
                |p| {
                    xs.iter()
                        .zip(&ys)
                        .map(|(x, y)| y - (p[0] * x * x + p[1] * x + p[2]))
                        .collect()
                },
            );
            least_squares(&problem).unwrap()
        };
        let f1 = run();
        let f2 = run();
        assert_eq!(f1.estimates, f2.estimates);
        assert_eq!(f1.iterations, f2.iterations);
    }

    #[test]
    fn jacobian_check_flags_corruption() {
        let xs: Vec<f64> = (1..=15).map(|i| i as f64 * 0.2).collect();
        let good = FitProblem::new(
            vec![ParamSpec::free("a", 1.1), ParamSpec::free("b", 0.4)],
            vec![1.0; xs.len()],
            {
                let xs = xs.clone();
                move |p: &[f64]| xs.iter().map(|x| p[0] * x * x + p[1] * x).collect()
            },
        )
        .with_jacobian({
            let xs = xs.clone();
            move |_p: &[f64]| {
                DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { xs[i] * xs[i] } else { xs[i] })
            }
        });
        assert!(check_jacobian(&good, &[1.1, 0.4]) < 1e-7);

        let bad = FitProblem::new(
            vec![ParamSpec::free("a", 1.1), ParamSpec::free("b", 0.4)],
            vec![1.0; xs.len()],
            {
                let xs = xs.clone();
                move |p: &[f64]| xs.iter().map(|x| p[0] * x * x + p[1] * x).collect()
            },
        )
        .with_jacobian({
            let xs = xs.clone();
            move |_p: &[f64]| {
                // sign flip on the first column
                DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { -xs[i] * xs[i] } else { xs[i] })
            }
        });
        assert!(check_jacobian(&bad, &[1.1, 0.4]) > 0.5);
    }

    #[test]
    fn weighted_fit_prefers_heavy_points() {
        // two incompatible data points; the heavier one wins
        let problem = FitProblem::new(
            vec![ParamSpec::free("p", 0.0)],
            vec![100.0, 1.0],
            |p| vec![1.0 - p[0], 2.0 - p[0]],
        );
        let fit = least_squares(&problem).unwrap();
        let p = fit.get("p").unwrap();
        // weighted optimum: (100*1 + 1*2) / 101
        assert_relative_eq!(p, 102.0 / 101.0, epsilon = 1e-9);
    }
}
