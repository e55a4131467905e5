//! Damped least squares (Levenberg–Marquardt) over a parameter vector with
//! free, shared and frozen entries.
//!
//! Positive parameters are optimized in log space; other bounded parameters
//! are projected back into their box after each step. The Jacobian is taken
//! by central finite differences in the optimization space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Free,
    /// Free, but entering more than one residual block.
    Shared,
    Frozen,
}

impl ParamRole {
    pub fn is_varied(self) -> bool {
        !matches!(self, ParamRole::Frozen)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub role: ParamRole,
    /// Optimize `ln(x)`; requires `lower >= 0`.
    pub log_scale: bool,
}

impl ParameterSpec {
    pub fn free(name: impl Into<String>, initial: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            role: ParamRole::Free,
            log_scale: false,
        }
    }

    /// Strictly positive parameter, optimized in log space.
    pub fn positive(name: impl Into<String>, initial: f64) -> Self {
        Self { lower: 0.0, log_scale: true, ..Self::free(name, initial) }
    }

    pub fn frozen(name: impl Into<String>, value: f64) -> Self {
        Self { role: ParamRole::Frozen, ..Self::free(name, value) }
    }

    pub fn shared(mut self) -> Self {
        self.role = ParamRole::Shared;
        self
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.initial.is_finite() {
            return Err(Error::InvalidConfiguration(format!("parameter `{}` has non-finite initial value", self.name)));
        }
        if !(self.lower <= self.initial && self.initial <= self.upper) {
            return Err(Error::InvalidConfiguration(format!(
                "parameter `{}` initial value {} outside [{}, {}]",
                self.name, self.initial, self.lower, self.upper
            )));
        }
        if self.log_scale && self.initial <= 0.0 {
            return Err(Error::InvalidConfiguration(format!(
                "log-scaled parameter `{}` needs a positive initial value",
                self.name
            )));
        }
        Ok(())
    }

    fn to_internal(&self, x: f64) -> f64 {
        if self.log_scale {
            x.ln()
        } else {
            x
        }
    }

    fn to_external(&self, u: f64) -> f64 {
        if self.log_scale {
            u.exp().clamp(self.lower.max(f64::MIN_POSITIVE), self.upper)
        } else {
            u.clamp(self.lower, self.upper)
        }
    }

    /// d(external)/d(internal).
    fn chain_factor(&self, x: f64) -> f64 {
        if self.log_scale {
            x
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost change on an accepted step that counts as converged.
    pub ftol: f64,
    /// Infinity norm of the gradient (optimization space) that counts as converged.
    pub gtol: f64,
    /// Relative step size that counts as converged.
    pub xtol: f64,
    pub initial_damping: f64,
    /// Number of starting points (the first is the supplied initial guess).
    pub starts: usize,
    pub fd_relative_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            gtol: 1e-12,
            xtol: 1e-12,
            initial_damping: 1e-3,
            starts: 5,
            fd_relative_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub roles: Vec<ParamRole>,
    pub best_fit: Vec<f64>,
    /// 1σ uncertainties; zero for frozen parameters.
    pub sigma: Vec<f64>,
    /// Residual-variance-scaled `(JᵀJ)⁻¹` in natural units, full size with
    /// zero rows/columns for frozen parameters.
    pub covariance: Vec<Vec<f64>>,
    /// `‖model − data‖₂` at the optimum.
    pub residual_norm: f64,
    pub n_points: usize,
    pub n_iterations: usize,
    pub converged: bool,
    /// Cost `½‖r‖²` after each accepted iteration of the winning start.
    pub cost_history: Vec<f64>,
    /// Identifiability or convergence notes.
    pub diagnostic: Option<String>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|k| self.best_fit[k])
    }

    pub fn sigma_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|k| self.sigma[k])
    }

    pub fn cost(&self) -> f64 {
        0.5 * self.residual_norm * self.residual_norm
    }
}

struct Problem<'a, F> {
    residuals: &'a F,
    specs: &'a [ParameterSpec],
    varied: Vec<usize>,
    opts: &'a LmOptions,
}

impl<'a, F> Problem<'a, F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn external(&self, u: &DVector<f64>) -> Vec<f64> {
        let mut x: Vec<f64> = self.specs.iter().map(|s| s.initial).collect();
        for (j, &k) in self.varied.iter().enumerate() {
            x[k] = self.specs[k].to_external(u[j]);
        }
        x
    }

    fn eval(&self, x: &[f64]) -> Option<DVector<f64>> {
        let r = (self.residuals)(x);
        if r.iter().all(|v| v.is_finite()) {
            Some(DVector::from_vec(r))
        } else {
            None
        }
    }

    fn jacobian(&self, u: &DVector<f64>, m: usize) -> DMatrix<f64> {
        let n = u.len();
        let mut jac = DMatrix::zeros(m, n);
        for j in 0..n {
            let k = self.varied[j];
            let spec = &self.specs[k];
            let typical = if spec.log_scale || spec.initial == 0.0 { 1.0 } else { spec.initial.abs() };
            let h = self.opts.fd_relative_step * u[j].abs().max(typical);
            let mut up = u.clone();
            up[j] += h;
            let mut dn = u.clone();
            dn[j] -= h;
            let (rp, rm) = match (self.eval(&self.external(&up)), self.eval(&self.external(&dn))) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            let step = up[j] - dn[j];
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / step;
            }
        }
        jac
    }

    fn run(&self, u0: DVector<f64>) -> Result<RunOutcome> {
        let mut u = u0;
        let mut r = self
            .eval(&self.external(&u))
            .ok_or_else(|| Error::NonConvergence("residuals are not finite at the starting point".into()))?;
        let m = r.len();
        let mut cost = 0.5 * r.norm_squared();
        let mut lambda = self.opts.initial_damping;
        let mut history = vec![cost];
        let mut converged = false;
        let mut note = None;
        let mut iterations = 0;

        while iterations < self.opts.max_iterations {
            iterations += 1;
            let jac = self.jacobian(&u, m);
            let jt = jac.transpose();
            let a = &jt * &jac;
            let g = &jt * &r;
            if g.amax() < self.opts.gtol || cost == 0.0 {
                converged = true;
                break;
            }
            let mut accepted = false;
            while lambda < 1e16 {
                let mut damped = a.clone();
                for j in 0..u.len() {
                    damped[(j, j)] += lambda * a[(j, j)].max(1e-300);
                }
                let Some(delta) = damped.clone().cholesky().map(|c| c.solve(&(-&g))).or_else(|| damped.lu().solve(&(-&g)))
                else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = &u + &delta;
                let x_trial = self.external(&trial);
                // Re-derive the internal point after projection onto the bounds.
                let trial = DVector::from_iterator(
                    trial.len(),
                    self.varied.iter().map(|&k| self.specs[k].to_internal(x_trial[k])),
                );
                match self.eval(&x_trial) {
                    Some(r_trial) => {
                        let cost_trial = 0.5 * r_trial.norm_squared();
                        if cost_trial < cost {
                            let rel = (cost - cost_trial) / cost;
                            let step = (&trial - &u).norm();
                            u = trial;
                            r = r_trial;
                            cost = cost_trial;
                            history.push(cost);
                            lambda = (lambda / 10.0).max(1e-15);
                            accepted = true;
                            if rel < self.opts.ftol || step <= self.opts.xtol * (u.norm() + self.opts.xtol) {
                                converged = true;
                            }
                            break;
                        }
                    }
                    None => {}
                }
                lambda *= 10.0;
            }
            if converged {
                break;
            }
            if !accepted {
                // No damping level reduces the cost: accept as a minimum only
                // if the undamped model predicts no meaningful reduction.
                let predicted = a
                    .clone()
                    .pseudo_inverse(1e-14)
                    .map(|ai| 0.5 * g.dot(&(&ai * &g)))
                    .unwrap_or(f64::INFINITY);
                if predicted <= self.opts.ftol * cost.max(f64::MIN_POSITIVE) {
                    converged = true;
                } else {
                    note = Some("damping exhausted without cost reduction".to_string());
                }
                break;
            }
        }
        if !converged && note.is_none() {
            note = Some(format!("iteration limit {} reached", self.opts.max_iterations));
        }
        Ok(RunOutcome { u, r, cost, history, iterations, converged, note })
    }
}

struct RunOutcome {
    u: DVector<f64>,
    r: DVector<f64>,
    cost: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
    note: Option<String>,
}

/// Multiplicative perturbation pattern for the extra starting points.
const START_FACTORS: [f64; 5] = [1.0, 1.3, 1.0 / 1.3, 1.7, 1.0 / 1.7];

/// Minimizes `½‖residuals(x)‖²` over the non-frozen entries of `x`.
///
/// `residuals` receives the full parameter vector in the order of `specs`.
pub fn least_squares<F>(residuals: F, specs: &[ParameterSpec], opts: &LmOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    for s in specs {
        s.validate()?;
    }
    let varied: Vec<usize> = (0..specs.len()).filter(|&k| specs[k].role.is_varied()).collect();
    let problem = Problem { residuals: &residuals, specs, varied, opts };
    let x0: Vec<f64> = specs.iter().map(|s| s.initial).collect();
    let m = problem
        .eval(&x0)
        .ok_or_else(|| Error::NonConvergence("residuals are not finite at the initial guess".into()))?
        .len();
    let n = problem.varied.len();
    if m <= n {
        return Err(Error::InsufficientData(format!("{m} residuals for {n} free parameters")));
    }

    let u0 = DVector::from_iterator(n, problem.varied.iter().map(|&k| specs[k].to_internal(specs[k].initial)));
    let mut best: Option<RunOutcome> = None;
    for start in 0..opts.starts.max(1) {
        let mut u = u0.clone();
        if start > 0 {
            for (j, &k) in problem.varied.iter().enumerate() {
                // Alternate the direction of the perturbation across parameters.
                let f = START_FACTORS[start % START_FACTORS.len()];
                let f = if j % 2 == 0 { f } else { 1.0 / f };
                let x = specs[k].initial * f;
                let x = x.clamp(specs[k].lower, specs[k].upper);
                if specs[k].log_scale && x <= 0.0 {
                    continue;
                }
                u[j] = specs[k].to_internal(x);
            }
        }
        let Ok(outcome) = problem.run(u) else { continue };
        let better = match &best {
            None => true,
            Some(b) => (outcome.converged && !b.converged) || (outcome.converged == b.converged && outcome.cost < b.cost),
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.ok_or_else(|| Error::NonConvergence("no starting point produced finite residuals".into()))?;
    Ok(problem.finish(best, m))
}

impl<'a, F> Problem<'a, F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn finish(&self, run: RunOutcome, m: usize) -> FitResult {
        let x = self.external(&run.u);
        let n = self.varied.len();
        let p = self.specs.len();
        let jac_internal = self.jacobian(&run.u, m);
        let mut jac = jac_internal.clone();
        for (j, &k) in self.varied.iter().enumerate() {
            let f = self.specs[k].chain_factor(x[k]);
            // Internal Jacobian is ∂r/∂u; natural one is ∂r/∂x = (∂r/∂u)/(dx/du).
            jac.column_mut(j).scale_mut(1.0 / f);
        }
        let dof = (m - n).max(1) as f64;
        let s2 = run.r.norm_squared() / dof;
        let mut diagnostic = run.note;
        let mut converged = run.converged;

        // Column-normalized SVD exposes identifiability independent of units.
        let norms: Vec<f64> = (0..n).map(|j| jac_internal.column(j).norm()).collect();
        let mut scaled = jac_internal.clone();
        for j in 0..n {
            if norms[j] > 0.0 {
                scaled.column_mut(j).scale_mut(1.0 / norms[j]);
            }
        }
        let svd = scaled.svd(false, true);
        let smax = svd.singular_values.max();
        let (kmin, smin) = svd
            .singular_values
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        let rank_deficient = n > 0 && (smax == 0.0 || smin / smax < 1e-8 || norms.contains(&0.0));
        if rank_deficient {
            converged = false;
            let mut involved = Vec::new();
            if let Some(vt) = &svd.v_t {
                for j in 0..n {
                    if vt[(kmin, j)].abs() > 0.3 || norms[j] == 0.0 {
                        involved.push(self.specs[self.varied[j]].name.clone());
                    }
                }
            }
            let msg = format!("singular Jacobian: parameters not independently identifiable: {}", involved.join(", "));
            diagnostic = Some(match diagnostic {
                Some(note) => format!("{note}; {msg}"),
                None => msg,
            });
        }

        // Covariance in natural units via the column-equilibrated normal matrix.
        let nat_norms: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
        let mut jac_eq = jac.clone();
        for j in 0..n {
            if nat_norms[j] > 0.0 {
                jac_eq.column_mut(j).scale_mut(1.0 / nat_norms[j]);
            }
        }
        let a = jac_eq.transpose() * &jac_eq;
        let inv_eq = if rank_deficient { a.pseudo_inverse(1e-10).ok() } else { a.try_inverse() }
            .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        let inv = DMatrix::from_fn(n, n, |i, j| {
            let d = nat_norms[i] * nat_norms[j];
            if d > 0.0 {
                inv_eq[(i, j)] / d
            } else {
                f64::INFINITY
            }
        });
        let mut covariance = vec![vec![0.0; p]; p];
        for (a_idx, &ka) in self.varied.iter().enumerate() {
            for (b_idx, &kb) in self.varied.iter().enumerate() {
                covariance[ka][kb] = s2 * 0.5 * (inv[(a_idx, b_idx)] + inv[(b_idx, a_idx)]);
            }
        }
        let sigma = (0..p).map(|k| covariance[k][k].max(0.0).sqrt()).collect();

        FitResult {
            names: self.specs.iter().map(|s| s.name.clone()).collect(),
            roles: self.specs.iter().map(|s| s.role).collect(),
            best_fit: x,
            sigma,
            covariance,
            residual_norm: run.r.norm(),
            n_points: m,
            n_iterations: run.iterations,
            converged,
            cost_history: run.history,
            diagnostic,
        }
    }
}

/// Central-difference Jacobian of `f` at `x` in natural coordinates.
pub fn numerical_jacobian<F>(f: F, x: &[f64], relative_step: f64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    for j in 0..x.len() {
        let h = relative_step * x[j].abs().max(1e-12);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (xp[j] - xm[j]);
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_decay(x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|&t| p[0] * (-t / p[1]).exp() + p[2]).collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let truth = [2.5, 1.7, 0.3];
        let y = exp_decay(&t, &truth);
        let specs = [
            ParameterSpec::positive("a", 1.0),
            ParameterSpec::positive("tau", 1.0),
            ParameterSpec::free("c", 0.0),
        ];
        let fit = least_squares(
            |p| exp_decay(&t, p).iter().zip(&y).map(|(m, d)| m - d).collect(),
            &specs,
            &LmOptions::default(),
        )
        .unwrap();
        assert!(fit.converged, "{:?}", fit.diagnostic);
        for (got, want) in fit.best_fit.iter().zip(truth) {
            assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn cost_never_increases() {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        let y: Vec<f64> = exp_decay(&t, &[3.0, 2.0, -1.0])
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.01 * ((i * 7919 % 13) as f64 - 6.0))
            .collect();
        let specs = [
            ParameterSpec::positive("a", 1.5),
            ParameterSpec::positive("tau", 4.0),
            ParameterSpec::free("c", 0.0),
        ];
        let fit = least_squares(
            |p| exp_decay(&t, p).iter().zip(&y).map(|(m, d)| m - d).collect(),
            &specs,
            &LmOptions { starts: 1, ..Default::default() },
        )
        .unwrap();
        assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.sigma.iter().all(|s| s.is_finite() && *s > 0.0));
        for i in 0..3 {
            for j in 0..3 {
                assert!((fit.covariance[i][j] - fit.covariance[j][i]).abs() <= 1e-12 * fit.covariance[i][i].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn frozen_parameters_stay_put() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 0.3).collect();
        let y = exp_decay(&t, &[1.0, 2.0, 0.5]);
        let specs = [
            ParameterSpec::positive("a", 0.7),
            ParameterSpec::frozen("tau", 2.0),
            ParameterSpec::free("c", 0.0),
        ];
        let fit = least_squares(
            |p| exp_decay(&t, p).iter().zip(&y).map(|(m, d)| m - d).collect(),
            &specs,
            &LmOptions::default(),
        )
        .unwrap();
        assert_eq!(fit.best_fit[1], 2.0);
        assert_eq!(fit.sigma[1], 0.0);
        assert!((fit.best_fit[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_product_is_reported() {
        // Only a·b enters the model.
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 6.0 * x).collect();
        let specs = [ParameterSpec::positive("a", 1.0), ParameterSpec::positive("b", 1.0)];
        let fit = least_squares(
            |p| t.iter().zip(&y).map(|(x, d)| p[0] * p[1] * x - d).collect(),
            &specs,
            &LmOptions::default(),
        )
        .unwrap();
        assert!(!fit.converged);
        let diag = fit.diagnostic.unwrap();
        assert!(diag.contains("a") && diag.contains("b"), "{diag}");
    }

    #[test]
    fn too_few_points() {
        let specs = [ParameterSpec::free("a", 1.0), ParameterSpec::free("b", 1.0)];
        let r = least_squares(|p| vec![p[0] - 1.0, p[1]], &specs, &LmOptions::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn initial_outside_bounds_rejected() {
        let specs = [ParameterSpec::free("a", 5.0).bounded(0.0, 1.0)];
        assert!(least_squares(|p| vec![p[0]; 3], &specs, &LmOptions::default()).is_err());
    }

    #[test]
    fn iteration_limit_is_flagged() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let y = exp_decay(&t, &[2.5, 1.7, 0.3]);
        let specs = [
            ParameterSpec::positive("a", 0.1),
            ParameterSpec::positive("tau", 30.0),
            ParameterSpec::free("c", 3.0),
        ];
        let fit = least_squares(
            |p| exp_decay(&t, p).iter().zip(&y).map(|(m, d)| m - d).collect(),
            &specs,
            &LmOptions { max_iterations: 2, starts: 1, ..Default::default() },
        )
        .unwrap();
        assert!(!fit.converged);
        assert!(fit.diagnostic.unwrap().contains("iteration limit"));
    }
}
