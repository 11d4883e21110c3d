//! Dense convex QP solver: Mehrotra predictor–corrector interior point.
//!
//! Solves `min ½zᵀHz + cᵀz  s.t.  Ez = f,  Gz ≤ h,  lb ≤ z ≤ ub`
//! with `H` positive semidefinite. Variables with `lb == ub` are substituted
//! out before factorization.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub e: DMatrix<f64>,
    pub f: DVector<f64>,
    pub g: DMatrix<f64>,
    pub hvec: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// Iteration limit reached; the iterate is usable but not certified.
    Inaccurate,
    /// A constraint involving only fixed variables is violated.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: DVector<f64>,
    /// Equality multipliers.
    pub y: DVector<f64>,
    /// Inequality multipliers for the rows of `G` (bounds excluded).
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;
const REG: f64 = 1e-12;

impl QuadraticProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.c.dot(z)
    }

    pub fn solve(&self) -> QpSolution {
        let n = self.num_vars();
        let fixed: Vec<bool> = (0..n).map(|j| self.lb[j] == self.ub[j]).collect();
        let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
        let mut z_full = DVector::from_fn(n, |j, _| if fixed[j] { self.lb[j] } else { 0.0 });
        let zf = z_full.clone();

        // Reduce rows to the free variables.
        let shift_e = &self.e * &zf;
        let shift_g = &self.g * &zf;
        let mut e_rows = Vec::new();
        for r in 0..self.e.nrows() {
            if free.iter().any(|&j| self.e[(r, j)] != 0.0) {
                e_rows.push(r);
            } else if (self.f[r] - shift_e[r]).abs() > 1e-9 * (1.0 + self.f[r].abs()) {
                return self.infeasible(z_full);
            }
        }
        let mut g_rows = Vec::new();
        for r in 0..self.g.nrows() {
            if free.iter().any(|&j| self.g[(r, j)] != 0.0) {
                g_rows.push(r);
            } else if shift_g[r] > self.hvec[r] + 1e-9 * (1.0 + self.hvec[r].abs()) {
                return self.infeasible(z_full);
            }
        }
        let nf = free.len();
        let hr = DMatrix::from_fn(nf, nf, |a, b| self.h[(free[a], free[b])]);
        let hz = &self.h * &zf;
        let cr = DVector::from_fn(nf, |a, _| self.c[free[a]] + hz[free[a]]);
        let er = DMatrix::from_fn(e_rows.len(), nf, |r, a| self.e[(e_rows[r], free[a])]);
        let fr = DVector::from_fn(e_rows.len(), |r, _| self.f[e_rows[r]] - shift_e[e_rows[r]]);

        // Inequalities plus finite bounds as rows.
        let mut bound_rows: Vec<(usize, f64, f64)> = Vec::new();
        for (a, &j) in free.iter().enumerate() {
            if self.ub[j].is_finite() {
                bound_rows.push((a, 1.0, self.ub[j]));
            }
            if self.lb[j].is_finite() {
                bound_rows.push((a, -1.0, -self.lb[j]));
            }
        }
        let q = g_rows.len() + bound_rows.len();
        let mut gr = DMatrix::zeros(q, nf);
        let mut hr_vec = DVector::zeros(q);
        for (r, &row) in g_rows.iter().enumerate() {
            for a in 0..nf {
                gr[(r, a)] = self.g[(row, free[a])];
            }
            hr_vec[r] = self.hvec[row] - shift_g[row];
        }
        for (k, &(a, sign, rhs)) in bound_rows.iter().enumerate() {
            gr[(g_rows.len() + k, a)] = sign;
            hr_vec[g_rows.len() + k] = rhs;
        }

        // Scale the objective and every row to unit infinity norm.
        let kappa = cr.amax().max(hr.amax()).max(1.0);
        let row_scale = |m: &DMatrix<f64>, r: usize| {
            let norm = m.row(r).amax();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        };
        let de: Vec<f64> = (0..er.nrows()).map(|r| row_scale(&er, r)).collect();
        let dg: Vec<f64> = (0..gr.nrows()).map(|r| row_scale(&gr, r)).collect();
        let hs = &hr / kappa;
        let cs = &cr / kappa;
        let es = DMatrix::from_fn(er.nrows(), nf, |r, a| er[(r, a)] * de[r]);
        let fs = DVector::from_fn(er.nrows(), |r, _| fr[r] * de[r]);
        let gs = DMatrix::from_fn(gr.nrows(), nf, |r, a| gr[(r, a)] * dg[r]);
        let hvs = DVector::from_fn(gr.nrows(), |r, _| hr_vec[r] * dg[r]);

        let start = DVector::from_fn(nf, |a, _| {
            let (l, u) = (self.lb[free[a]], self.ub[free[a]]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            }
        });
        let (zr, ys, ls, status, iterations) = mehrotra(&hs, &cs, &es, &fs, &gs, &hvs, start);
        let yr = DVector::from_fn(ys.len(), |r, _| ys[r] * de[r] * kappa);
        let lr = DVector::from_fn(ls.len(), |r, _| ls[r] * dg[r] * kappa);

        for (a, &j) in free.iter().enumerate() {
            z_full[j] = zr[a];
        }
        let mut y = DVector::zeros(self.e.nrows());
        for (r, &row) in e_rows.iter().enumerate() {
            y[row] = yr[r];
        }
        let mut lambda = DVector::zeros(self.g.nrows());
        for (r, &row) in g_rows.iter().enumerate() {
            lambda[row] = lr[r].max(0.0);
        }
        QpSolution {
            status,
            objective: self.objective(&z_full),
            z: z_full,
            y,
            lambda,
            iterations,
        }
    }

    fn infeasible(&self, z: DVector<f64>) -> QpSolution {
        QpSolution {
            status: QpStatus::Infeasible,
            objective: f64::INFINITY,
            z,
            y: DVector::zeros(self.e.nrows()),
            lambda: DVector::zeros(self.g.nrows()),
            iterations: 0,
        }
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

type IpmResult = (DVector<f64>, DVector<f64>, DVector<f64>, QpStatus, usize);

#[allow(clippy::too_many_arguments)]
fn mehrotra(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
    z0: DVector<f64>,
) -> IpmResult {
    let (n, p, q) = (c.len(), e.nrows(), g.nrows());
    let mut z = z0;
    let mut y = DVector::zeros(p);
    let mut s = (hv - g * &z).map(|v| v.max(1.0));
    let mut lam = DVector::from_element(q, 1.0);
    let scale = 1.0 + hv.amax().max(f.amax());

    let mut status = QpStatus::Inaccurate;
    let mut iter = 0;
    while iter < MAX_ITER {
        let rd = h * &z + c + e.transpose() * &y + g.transpose() * &lam;
        let re = e * &z - f;
        let ri = g * &z + &s - hv;
        let mu = if q > 0 { s.dot(&lam) / q as f64 } else { 0.0 };
        let obj = 0.5 * z.dot(&(h * &z)) + c.dot(&z);
        if rd.amax() <= TOL
            && re.amax() <= TOL * scale
            && ri.amax() <= TOL * scale
            && mu <= TOL * (1.0 + obj.abs())
        {
            status = QpStatus::Optimal;
            break;
        }
        iter += 1;

        let w = lam.component_div(&s);
        let mut kkt = DMatrix::zeros(n + p, n + p);
        let gw = DMatrix::from_fn(q, n, |r, j| g[(r, j)] * w[r]);
        let top = h + g.transpose() * gw;
        kkt.view_mut((0, 0), (n, n)).copy_from(&top);
        kkt.view_mut((0, n), (n, p)).copy_from(&e.transpose());
        kkt.view_mut((n, 0), (p, n)).copy_from(e);
        for j in 0..n {
            kkt[(j, j)] += REG;
        }
        for r in 0..p {
            kkt[(n + r, n + r)] -= REG;
        }
        let lu = kkt.lu();

        let solve_dir = |rc: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
            // tmp = S⁻¹(−r_c + Λ r_i)
            let tmp = DVector::from_fn(q, |r, _| (-rc[r] + lam[r] * ri[r]) / s[r]);
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&(-&rd - g.transpose() * &tmp));
            rhs.rows_mut(n, p).copy_from(&(-&re));
            let sol = lu.solve(&rhs)?;
            let dz = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, p).into_owned();
            let gdz = g * &dz;
            let ds = -&ri - &gdz;
            let dl = DVector::from_fn(q, |r, _| tmp[r] + w[r] * gdz[r]);
            Some((dz, dy, ds, dl))
        };

        let rc_aff = s.component_mul(&lam);
        let Some((_, _, ds_a, dl_a)) = solve_dir(&rc_aff) else {
            break;
        };
        let a_aff = max_step(&s, &ds_a).min(max_step(&lam, &dl_a));
        let mu_aff = if q > 0 {
            (&s + &ds_a * a_aff).dot(&(&lam + &dl_a * a_aff)) / q as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };
        let rc = DVector::from_fn(q, |r, _| {
            s[r] * lam[r] + ds_a[r] * dl_a[r] - sigma * mu
        });
        let Some((dz, dy, ds, dl)) = solve_dir(&rc) else {
            break;
        };
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
        z += &dz * alpha;
        y += &dy * alpha;
        s += &ds * alpha;
        lam += &dl * alpha;
        for r in 0..q {
            s[r] = s[r].max(1e-300);
            lam[r] = lam[r].max(1e-300);
        }
    }
    (z, y, lam, status, iter)
}
