//! Dense strictly convex QP solver (Goldfarb–Idnani dual active set).
//!
//! Solves `min ½xᵀHx + gᵀx  s.t.  Cx ≤ d` for symmetric positive definite
//! `H`. The method starts from the unconstrained minimiser and adds the
//! most violated constraint at each major iteration while keeping the
//! multipliers of the active set non-negative; the iterate is dual feasible
//! throughout and primal feasible on exit. Ties among equally violated
//! constraints go to the lowest index.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    /// One inequality per row, `C x ≤ d`.
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per inequality; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest KKT violation (stationarity, feasibility, complementarity).
    pub kkt_residual: f64,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

impl QpProblem {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.gradient.dot(x)
    }

    /// Largest violation of the first-order optimality conditions at
    /// `(x, λ)`.
    pub fn kkt_residual(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        let stationarity = (&self.hessian * x + &self.gradient + self.c.transpose() * lambda).amax();
        let slack = &self.d - &self.c * x;
        let primal = slack.iter().fold(0.0f64, |m, s| m.max(-s));
        let dual = lambda.iter().fold(0.0f64, |m, l| m.max(-l));
        let comp = slack.iter().zip(lambda.iter()).fold(0.0f64, |m, (s, l)| m.max((s * l).abs()));
        stationarity.max(primal).max(dual).max(comp)
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        if self.hessian.shape() != (n, n) || self.c.ncols() != n || self.c.nrows() != self.d.len() {
            return Err(Error::Dimension("inconsistent QP dimensions".into()));
        }
        Ok(())
    }
}

/// Rotation `[c s; −s c]` taking `(a, b)` to `(‖(a, b)‖, 0)`.
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * a + s * b;
        m[(r, j)] = -s * a + c * b;
    }
}

pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    problem.check()?;
    let n = problem.dim();
    let m = problem.d.len();
    let chol = Cholesky::new(problem.hessian.clone())
        .ok_or_else(|| Error::Config("QP Hessian is not positive definite".into()))?;
    let l = chol.l();
    // J = L⁻ᵀ, so that Jᵀ H J = I.
    let mut j = l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Config("singular Cholesky factor".into()))?;
    let mut x = -chol.solve(&problem.gradient);
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];
    let mut iterations = 0usize;

    // Constraint i in "≥" form: n_i = −C_i, b_i = −d_i.
    let violation = |x: &DVector<f64>, i: usize| problem.d[i] - problem.c.row(i).dot(&x.transpose());
    let feas_tol = |i: usize| 1e-10 * (1.0 + problem.d[i].abs());

    let fail = |iterations: usize, x: &DVector<f64>, residual: f64| Error::Solver {
        iterations,
        residual,
        last_iterate: x.iter().copied().collect(),
    };

    loop {
        // Most violated constraint, lowest index on ties.
        let mut p = None;
        let mut worst = 0.0;
        for i in 0..m {
            if is_active[i] {
                continue;
            }
            let s = violation(&x, i);
            if s < -feas_tol(i) && s < worst {
                worst = s;
                p = Some(i);
            }
        }
        let Some(p) = p else { break };
        let np = -problem.c.row(p).transpose();
        let mut u_plus: Vec<f64> = u.clone();
        u_plus.push(0.0);

        loop {
            iterations += 1;
            if iterations > settings.max_iter {
                let residual = problem.kkt_residual(&x, &multipliers(m, &active, &u));
                return Err(fail(iterations - 1, &x, residual));
            }
            let q = active.len();
            let dvec = j.transpose() * &np;
            let z = if q < n {
                j.columns(q, n - q) * dvec.rows(q, n - q)
            } else {
                DVector::zeros(n)
            };
            let rvec = if q > 0 {
                r.view((0, 0), (q, q))
                    .into_owned()
                    .solve_upper_triangular(&dvec.rows(0, q).into_owned())
                    .unwrap_or_else(|| DVector::zeros(q))
            } else {
                DVector::zeros(0)
            };
            let mut t1 = f64::INFINITY;
            let mut k = None;
            for (i, &ri) in rvec.iter().enumerate() {
                if ri > 0.0 {
                    let ratio = u_plus[i] / ri;
                    if ratio < t1 {
                        t1 = ratio;
                        k = Some(i);
                    }
                }
            }
            let zn = z.dot(&np);
            // n_pᵀx − b_p, negative while p is violated
            let s_p = violation(&x, p);
            let t2 = if z.amax() > 1e-14 && zn > 0.0 { -s_p / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                let residual = problem.kkt_residual(&x, &multipliers(m, &active, &u));
                log::warn!("QP infeasible: constraint {p} cannot be satisfied");
                return Err(fail(iterations, &x, residual));
            }
            if t2.is_finite() {
                x += t * &z;
            }
            for (ui, ri) in u_plus.iter_mut().zip(rvec.iter()) {
                *ui -= t * ri;
            }
            u_plus[q] += t;

            if t2.is_finite() && t2 <= t1 {
                // Full step: p joins the active set.
                let mut dv = dvec.clone();
                for col in (q + 1..n).rev() {
                    let (c, s, h) = givens(dv[col - 1], dv[col]);
                    if s == 0.0 {
                        continue;
                    }
                    dv[col - 1] = h;
                    dv[col] = 0.0;
                    rotate_columns(&mut j, col - 1, col, c, s);
                }
                for row in 0..=q {
                    r[(row, q)] = dv[row];
                }
                active.push(p);
                is_active[p] = true;
                u = u_plus;
                break;
            }

            // Partial step: drop the blocking constraint and retry p.
            let k = k.expect("partial step has a blocking constraint");
            is_active[active[k]] = false;
            active.remove(k);
            u_plus.remove(k);
            for col in k..q - 1 {
                for row in 0..n {
                    r[(row, col)] = r[(row, col + 1)];
                }
            }
            for row in 0..n {
                r[(row, q - 1)] = 0.0;
            }
            for row in k..q - 1 {
                let (c, s, h) = givens(r[(row, row)], r[(row + 1, row)]);
                r[(row, row)] = h;
                r[(row + 1, row)] = 0.0;
                for col in row + 1..q - 1 {
                    let (a, b) = (r[(row, col)], r[(row + 1, col)]);
                    r[(row, col)] = c * a + s * b;
                    r[(row + 1, col)] = -s * a + c * b;
                }
                rotate_columns(&mut j, row, row + 1, c, s);
            }
            u = u_plus[..u_plus.len() - 1].to_vec();
            u_plus = {
                let mut v = u.clone();
                v.push(*u_plus.last().unwrap());
                v
            };
        }
    }

    let lambda = multipliers(m, &active, &u);
    let kkt_residual = problem.kkt_residual(&x, &lambda);
    if !(kkt_residual < settings.tol) {
        return Err(fail(iterations, &x, kkt_residual));
    }
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        multipliers: lambda,
        iterations,
        kkt_residual,
        active,
    })
}

fn multipliers(m: usize, active: &[usize], u: &[f64]) -> DVector<f64> {
    let mut lambda = DVector::zeros(m);
    for (&i, &ui) in active.iter().zip(u) {
        lambda[i] = ui.max(0.0);
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unconstrained_newton_step() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let g = DVector::from_vec(vec![1.0, -2.0]);
        let problem = QpProblem {
            hessian: h.clone(),
            gradient: g.clone(),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            d: DVector::from_vec(vec![100.0]),
        };
        let sol = solve_qp(&problem, &QpSettings::default()).unwrap();
        let newton = -h.lu().solve(&g).unwrap();
        assert!((sol.x - newton).amax() < 1e-12);
        assert!(sol.active.is_empty());
    }

    #[test]
    fn clipped_scalar() {
        // min (u − 10)² s.t. u ≤ 5
        let problem = QpProblem {
            hessian: DMatrix::from_element(1, 1, 2.0),
            gradient: DVector::from_element(1, -20.0),
            c: DMatrix::from_element(1, 1, 1.0),
            d: DVector::from_element(1, 5.0),
        };
        let sol = solve_qp(&problem, &QpSettings::default()).unwrap();
        assert!((sol.x[0] - 5.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn classic_two_dimensional_example() {
        // min ½x² + ½y² + x  s.t.  x + 2y ≥ 1  →  (−0.6, 0.8)
        let problem = QpProblem {
            hessian: DMatrix::identity(2, 2),
            gradient: DVector::from_vec(vec![1.0, 0.0]),
            c: DMatrix::from_row_slice(1, 2, &[-1.0, -2.0]),
            d: DVector::from_vec(vec![-1.0]),
        };
        let sol = solve_qp(&problem, &QpSettings::default()).unwrap();
        assert!((sol.x[0] + 0.6).abs() < 1e-12 && (sol.x[1] - 0.8).abs() < 1e-12);
    }

    fn random_box_qp(rng: &mut ChaCha8Rng) -> (QpProblem, f64) {
        let n = 4;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let bound = 0.5;
        let mut c = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            c[(2 * i, i)] = 1.0;
            c[(2 * i + 1, i)] = -1.0;
        }
        (
            QpProblem {
                hessian: h,
                gradient: g,
                c,
                d: DVector::from_element(2 * n, bound),
            },
            bound,
        )
    }

    /// Exhaustive search on a 0.01 lattice, refined locally around the best
    /// lattice point.
    fn grid_search(problem: &QpProblem, bound: f64) -> f64 {
        const N: usize = 4;
        let mut h = [[0.0; N]; N];
        let mut g = [0.0; N];
        for i in 0..N {
            g[i] = problem.gradient[i];
            for j in 0..N {
                h[i][j] = problem.hessian[(i, j)];
            }
        }
        let f = |x: &[f64; N]| {
            let mut v = 0.0;
            for i in 0..N {
                let hx: f64 = (0..N).map(|j| h[i][j] * x[j]).sum();
                v += x[i] * (0.5 * hx + g[i]);
            }
            v
        };
        let steps = (2.0 * bound / 0.01).round() as usize;
        let coord = |i: usize| -bound + i as f64 * 0.01;
        let mut best = (f64::INFINITY, [0.0; N]);
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    for d in 0..=steps {
                        let x = [coord(a), coord(b), coord(c), coord(d)];
                        let v = f(&x);
                        if v < best.0 {
                            best = (v, x);
                        }
                    }
                }
            }
        }
        // Coordinate search with shrinking steps inside the box.
        let (mut fbest, mut xbest) = best;
        let mut step = 0.01;
        while step > 1e-9 {
            let mut improved = true;
            while improved {
                improved = false;
                for k in 0..N {
                    for dir in [-1.0, 1.0] {
                        let mut y = xbest;
                        y[k] = (y[k] + dir * step).clamp(-bound, bound);
                        let v = f(&y);
                        if v < fbest - 1e-15 {
                            fbest = v;
                            xbest = y;
                            improved = true;
                        }
                    }
                }
            }
            step *= 0.5;
        }
        fbest
    }

    #[test]
    fn random_box_problems_match_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..3 {
            let (problem, bound) = random_box_qp(&mut rng);
            let sol = solve_qp(&problem, &QpSettings::default()).unwrap();
            let oracle = grid_search(&problem, bound);
            assert!((sol.objective - oracle).abs() < 1e-4, "{} vs {oracle}", sol.objective);
            assert!(sol.kkt_residual < 1e-9);
        }
    }

    #[test]
    fn random_general_constraints_satisfy_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..12);
            let m = rng.gen_range(1..30);
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
            let g = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let c = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            // x = 0 is strictly feasible
            let d = DVector::from_fn(m, |_, _| rng.gen_range(0.1..1.0));
            let problem = QpProblem { hessian: h, gradient: g, c, d };
            let sol = solve_qp(&problem, &QpSettings::default()).unwrap();
            assert!(sol.kkt_residual < 1e-8, "residual {}", sol.kkt_residual);
        }
    }

    #[test]
    fn infeasible_problem_reports_solver_error() {
        // x ≤ −1 and −x ≤ −1 (x ≥ 1)
        let problem = QpProblem {
            hessian: DMatrix::identity(1, 1),
            gradient: DVector::zeros(1),
            c: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            d: DVector::from_vec(vec![-1.0, -1.0]),
        };
        assert!(matches!(solve_qp(&problem, &QpSettings::default()), Err(Error::Solver { .. })));
    }

    #[test]
    fn iteration_cap_returns_last_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (problem, _) = random_box_qp(&mut rng);
        let problem = QpProblem {
            gradient: problem.gradient * 100.0,
            ..problem
        };
        match solve_qp(&problem, &QpSettings { tol: 1e-6, max_iter: 1 }) {
            Err(Error::Solver { last_iterate, .. }) => assert_eq!(last_iterate.len(), 4),
            Ok(sol) => assert!(sol.iterations <= 1),
            Err(e) => panic!("unexpected {e}"),
        }
    }
}
