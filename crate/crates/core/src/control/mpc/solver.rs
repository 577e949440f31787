use nalgebra::{DMatrix, DVector};

/// A box-constrained nonlinear least-squares problem `min ‖r(x)‖²`.
pub trait LeastSquares {
    /// Residuals and their Jacobian at `x`.
    fn evaluate(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step ends the solve.
    pub tolerance: f64,
    pub initial_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 30,
            tolerance: 1e-10,
            initial_damping: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    /// `‖r(x)‖²`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Variables held at a bound at the solution.
    pub active: usize,
}

fn cost_of(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

/// Projected Levenberg–Marquardt. Variables at a bound whose gradient
/// points outward are frozen for the step; the rest take a damped
/// Gauss–Newton step that is then projected onto the box. Only decreasing
/// steps are accepted, so the cost is monotone. The iteration schedule is
/// fixed, so equal inputs give equal outputs.
pub fn solve_bounded(
    problem: &impl LeastSquares,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    options: &SolverOptions,
) -> SolveReport {
    let n = x0.len();
    let mut x: Vec<f64> = (0..n).map(|i| x0[i].clamp(lo[i], hi[i])).collect();
    let (mut r, mut jac) = problem.evaluate(&x);
    let mut cost = cost_of(&r);
    let mut lambda = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let at_bound = |x: &[f64], g: &DVector<f64>, i: usize| {
        (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) || lo[i] == hi[i]
    };
    while iterations < options.max_iterations {
        iterations += 1;
        let g = jac.transpose() * &r;
        let free: Vec<usize> = (0..n).filter(|&i| !at_bound(&x, &g, i)).collect();
        if free.is_empty() || free.iter().map(|&i| g[i].abs()).fold(0.0, f64::max) < 1e-14 {
            converged = true;
            break;
        }
        let jf = jac.select_columns(&free);
        let h = jf.transpose() * &jf;
        let scale = h.diagonal().max().max(1e-12);
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = h.clone();
            for k in 0..free.len() {
                damped[(k, k)] += lambda * scale;
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&gf))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = x.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = (x[i] + step[k]).clamp(lo[i], hi[i]);
            }
            let (rt, jt) = problem.evaluate(&trial);
            let ct = cost_of(&rt);
            if ct < cost {
                let decrease = cost - ct;
                x = trial;
                r = rt;
                jac = jt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if decrease <= options.tolerance * (1.0 + cost) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent left at any damping: stationary within precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let g = jac.transpose() * &r;
    let active = (0..n).filter(|&i| lo[i] != hi[i] && at_bound(&x, &g, i)).count();
    SolveReport {
        x,
        cost,
        iterations,
        converged,
        active,
    }
}
