//! Damped Gauss–Newton (Levenberg–Marquardt) iteration for small problems.

/// A nonlinear least-squares problem `min ½‖r(p)‖²`.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Writes `r(p)` into `out` (length `n_residuals`).
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Writes the row-major Jacobian `∂r_i/∂p_j` into `out` (`n_residuals × n_params`).
    fn jacobian(&self, params: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when ‖δ‖ ≤ xtol·(‖p‖ + xtol).
    pub xtol: f64,
    /// Stop when every column of J is within this cosine of orthogonal to r.
    pub gtol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, xtol: 1e-10, gtol: 1e-10, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    /// Largest column cosine between J and r at the solution.
    pub gradient_cosine: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `JᵀJ` at the solution, row-major.
    pub jtj: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `JᵀJ` and `Jᵀr`.
fn normal_equations(j: &[f64], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = r.len();
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    for i in 0..m {
        let row = &j[i * n..(i + 1) * n];
        for a in 0..n {
            jtr[a] += row[a] * r[i];
            for b in a..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    (jtj, jtr)
}

/// Cholesky solve of a symmetric positive-definite system. `None` if not SPD.
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = cholesky_solve(a, &e, n)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Some(inv)
}

fn gradient_cosine(j: &[f64], r: &[f64], n: usize) -> f64 {
    let rn = norm(r);
    if rn == 0.0 {
        return 0.0;
    }
    let m = r.len();
    (0..n)
        .map(|a| {
            let (mut dot, mut cn) = (0.0, 0.0);
            for i in 0..m {
                dot += j[i * n + a] * r[i];
                cn += j[i * n + a] * j[i * n + a];
            }
            if cn == 0.0 {
                0.0
            } else {
                dot.abs() / (cn.sqrt() * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimise `½‖r(p)‖²` from `initial`.
pub fn levenberg_marquardt<P: LeastSquaresProblem>(problem: &P, initial: &[f64], opts: &LmOptions) -> LmOutcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    let mut j = vec![0.0; m * n];
    let mut trial_r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut cost = norm(&r);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        problem.jacobian(&p, &mut j);
        if gradient_cosine(&j, &r, n) <= opts.gtol {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&j, &r, n);
        let neg: Vec<f64> = jtr.iter().map(|g| -g).collect();
        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for a in 0..n {
                damped[a * n + a] += lambda * jtj[a * n + a].max(1e-300);
            }
            let Some(delta) = cholesky_solve(&damped, &neg, n) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + d).collect();
            problem.residuals(&trial, &mut trial_r);
            let trial_cost = norm(&trial_r);
            small_step = norm(&delta) <= opts.xtol * (norm(&p) + opts.xtol);
            if trial_cost.is_finite() && trial_cost <= cost {
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            if small_step {
                break;
            }
            lambda *= 10.0;
        }
        if small_step || !accepted {
            converged = small_step;
            break;
        }
    }
    problem.jacobian(&p, &mut j);
    let gcos = gradient_cosine(&j, &r, n);
    let (jtj, _) = normal_equations(&j, &r, n);
    LmOutcome {
        params: p,
        residual_norm: cost,
        gradient_cosine: gcos,
        iterations,
        converged: converged || gcos <= opts.gtol,
        jtj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// r = (x² + y − 11, x + y² − 7), minimum at (3, 2).
    struct Himmelblau;
    impl LeastSquaresProblem for Himmelblau {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            out[0] = p[0] * p[0] + p[1] - 11.0;
            out[1] = p[0] + p[1] * p[1] - 7.0;
        }
        fn jacobian(&self, p: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[2.0 * p[0], 1.0, 1.0, 2.0 * p[1]]);
        }
    }

    #[test]
    fn finds_himmelblau_root() {
        let o = levenberg_marquardt(&Himmelblau, &[1.0, 1.0], &LmOptions::default());
        assert!(o.converged);
        assert!((o.params[0] - 3.0).abs() < 1e-9 && (o.params[1] - 2.0).abs() < 1e-9, "{:?}", o.params);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &[2.0, 1.0], 2).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
        assert!(cholesky_solve(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0], 2).is_none());
        let inv = spd_inverse(&a, 2).unwrap();
        assert!((inv[0] - 0.375).abs() < 1e-15 && (inv[1] + 0.25).abs() < 1e-15);
    }
}
