//! Dense primal-dual interior-point method for block-diagonal SDPs with one
//! semidefinite block and one diagonal (linear) block:
//!
//! ```text
//! (D)  min  aᵀy   s.t.  Z = Σ yᵢ Aᵢ − C ⪰ 0
//! (P)  max ⟨C,X⟩  s.t.  ⟨Aᵢ,X⟩ = aᵢ,  X ⪰ 0
//! ```
//!
//! Search directions are HKM with Mehrotra predictor-corrector; the Schur
//! complement is factored by dense Cholesky.

use faer::linalg::matmul::matmul;
use faer::prelude::*;
use faer::linalg::solvers::Cholesky;
use faer::{Mat, Parallelism, Side};

/// One constraint matrix `Aᵢ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintMatrix {
    /// Upper-triangle entries `(r, c, v)` with `r <= c`; the matrix is
    /// symmetric.
    pub psd: Vec<(usize, usize, f64)>,
    /// Diagonal entries of the linear block.
    pub lp: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub n: usize,
    pub p: usize,
    pub a: Vec<f64>,
    pub constraints: Vec<ConstraintMatrix>,
    /// Dense symmetric `C` of the semidefinite block.
    pub c: Mat<f64>,
    pub c_lp: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Residual level accepted when progress stalls.
    pub stall_tolerance: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            stall_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Converged,
    /// Stopped early with residuals under the stall tolerance.
    NearlyConverged,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub status: IpmStatus,
    pub y: Vec<f64>,
    pub x: Mat<f64>,
    pub x_lp: Vec<f64>,
    pub z: Mat<f64>,
    pub z_lp: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub gap: f64,
}

struct Prepared<'a> {
    prob: &'a ConicProblem,
    /// Rows touched by each constraint, and the position map scratch.
    rows: Vec<Vec<usize>>,
    /// For each linear row, the constraints touching it.
    lp_cols: Vec<Vec<(usize, f64)>>,
}

impl<'a> Prepared<'a> {
    fn new(prob: &'a ConicProblem) -> Self {
        let rows = prob
            .constraints
            .iter()
            .map(|c| {
                let mut r: Vec<usize> = c.psd.iter().flat_map(|&(i, j, _)| [i, j]).collect();
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        let mut lp_cols = vec![Vec::new(); prob.p];
        for (i, c) in prob.constraints.iter().enumerate() {
            for &(k, v) in &c.lp {
                lp_cols[k].push((i, v));
            }
        }
        Self {
            prob,
            rows,
            lp_cols,
        }
    }

    /// `𝒜(Y)ᵢ = ⟨Aᵢ, Y⟩` for a possibly unsymmetric `Y` and diagonal `y_lp`.
    fn apply(&self, y: &Mat<f64>, y_lp: &[f64]) -> Vec<f64> {
        self.prob
            .constraints
            .iter()
            .map(|c| {
                let mut s = 0.0;
                for &(r, cc, v) in &c.psd {
                    s += if r == cc {
                        v * y.read(r, r)
                    } else {
                        v * (y.read(r, cc) + y.read(cc, r))
                    };
                }
                for &(k, v) in &c.lp {
                    s += v * y_lp[k];
                }
                s
            })
            .collect()
    }

    /// `Σ yᵢ Aᵢ`.
    fn adjoint(&self, y: &[f64]) -> (Mat<f64>, Vec<f64>) {
        let n = self.prob.n;
        let mut m = Mat::<f64>::zeros(n, n);
        let mut lp = vec![0.0; self.prob.p];
        for (c, &yi) in self.prob.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for &(r, cc, v) in &c.psd {
                m.write(r, cc, m.read(r, cc) + yi * v);
                if r != cc {
                    m.write(cc, r, m.read(cc, r) + yi * v);
                }
            }
            for &(k, v) in &c.lp {
                lp[k] += yi * v;
            }
        }
        (m, lp)
    }

    /// Schur complement `Mᵢⱼ = ⟨Aᵢ, X Aⱼ W⟩ + Σₖ Aᵢ[k] (x/z)ₖ Aⱼ[k]`.
    fn schur(&self, x: &Mat<f64>, w: &Mat<f64>, x_lp: &[f64], z_lp: &[f64]) -> Mat<f64> {
        let prob = self.prob;
        let n = prob.n;
        let m = prob.constraints.len();
        let mut out = Mat::<f64>::zeros(m, m);
        let mut pos = vec![usize::MAX; n];
        let mut f = Mat::<f64>::zeros(n, n);
        for i in 0..m {
            let rows = &self.rows[i];
            let k = rows.len();
            if k == 0 {
                continue;
            }
            for (p, &r) in rows.iter().enumerate() {
                pos[r] = p;
            }
            // S = (Aᵢ W)[rows, :]
            let mut s = Mat::<f64>::zeros(k, n);
            for &(r, c, v) in &prob.constraints[i].psd {
                let pr = pos[r];
                for col in 0..n {
                    s.write(pr, col, s.read(pr, col) + v * w.read(c, col));
                }
                if r != c {
                    let pc = pos[c];
                    for col in 0..n {
                        s.write(pc, col, s.read(pc, col) + v * w.read(r, col));
                    }
                }
            }
            let mut xk = Mat::<f64>::zeros(n, k);
            for (p, &r) in rows.iter().enumerate() {
                for row in 0..n {
                    xk.write(row, p, x.read(row, r));
                }
            }
            // F = X Aᵢ W
            matmul(f.as_mut(), xk.as_ref(), s.as_ref(), None, 1.0, Parallelism::None);
            for j in i..m {
                let mut acc = 0.0;
                for &(r, c, v) in &prob.constraints[j].psd {
                    acc += if r == c {
                        v * f.read(r, r)
                    } else {
                        v * (f.read(c, r) + f.read(r, c))
                    };
                }
                out.write(i, j, acc);
            }
            for &r in rows {
                pos[r] = usize::MAX;
            }
        }
        for i in 0..m {
            for j in 0..i {
                out.write(i, j, out.read(j, i));
            }
        }
        for (k, cols) in self.lp_cols.iter().enumerate() {
            let d = x_lp[k] / z_lp[k];
            for &(i, vi) in cols {
                for &(j, vj) in cols {
                    out.write(i, j, out.read(i, j) + vi * vj * d);
                }
            }
        }
        // symmetrize against round-off
        for i in 0..m {
            for j in 0..i {
                let v = 0.5 * (out.read(i, j) + out.read(j, i));
                out.write(i, j, v);
                out.write(j, i, v);
            }
        }
        out
    }
}

fn frob(m: &Mat<f64>) -> f64 {
    m.norm_l2()
}

fn dot(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a.read(i, j) * b.read(i, j);
        }
    }
    s
}

fn vnorm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sym(m: &Mat<f64>) -> Mat<f64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (m.read(i, j) + m.read(j, i)))
}

fn mul(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), a.as_ref(), b.as_ref(), None, 1.0, Parallelism::None);
    out
}

/// Largest step `α` keeping `M + α D ⪰ 0`, given `M ≻ 0`.
fn max_step_psd(m: &Mat<f64>, d: &Mat<f64>) -> Option<f64> {
    let n = m.nrows();
    if n == 0 {
        return Some(f64::INFINITY);
    }
    let chol = m.cholesky(Side::Lower).ok()?;
    let l = chol.compute_l();
    // S = L⁻¹ D L⁻ᵀ
    let mut t = d.clone();
    l.as_ref().solve_lower_triangular_in_place(t.as_mut());
    let mut s = t.transpose().to_owned();
    l.as_ref().solve_lower_triangular_in_place(s.as_mut());
    let s = sym(&s);
    let ev = s.selfadjoint_eigenvalues(Side::Lower);
    let lmin = ev.iter().copied().fold(f64::INFINITY, f64::min);
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn max_step_lp(v: &[f64], d: &[f64]) -> f64 {
    v.iter()
        .zip(d)
        .filter(|(_, &dd)| dd < 0.0)
        .map(|(&vv, &dd)| -vv / dd)
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a symmetric positive (semi)definite matrix, adding a
/// small diagonal shift when the plain factorization breaks down.
fn factor_spd(m: &Mat<f64>) -> Option<Cholesky<f64>> {
    if let Ok(c) = m.cholesky(Side::Lower) {
        return Some(c);
    }
    let k = m.nrows();
    let scale = (0..k).map(|i| m.read(i, i).abs()).fold(0.0, f64::max).max(1.0);
    for reg in [1e-12, 1e-10, 1e-8] {
        let mut r = m.clone();
        for i in 0..k {
            r.write(i, i, r.read(i, i) + reg * scale);
        }
        if let Ok(c) = r.cholesky(Side::Lower) {
            return Some(c);
        }
    }
    None
}

fn solve_with(chol: &Cholesky<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let k = rhs.len();
    let b = Mat::from_fn(k, 1, |i, _| rhs[i]);
    let x = chol.solve(&b);
    let v: Vec<f64> = (0..k).map(|i| x.read(i, 0)).collect();
    v.iter().all(|x| x.is_finite()).then_some(v)
}

/// Iterations without improvement before giving up.
const STALL_WINDOW: usize = 8;

struct Snapshot {
    score: f64,
    iteration: usize,
    y: Vec<f64>,
    x: Mat<f64>,
    x_lp: Vec<f64>,
    z: Mat<f64>,
    z_lp: Vec<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

/// Runs the interior-point method.
pub fn solve(prob: &ConicProblem, opts: &IpmOptions) -> IpmResult {
    let n = prob.n;
    let p = prob.p;
    let m = prob.constraints.len();
    let prep = Prepared::new(prob);
    let nn = (n + p).max(1) as f64;

    let a_norm = vnorm(&prob.a);
    let c_norm = (frob(&prob.c).powi(2) + vnorm(&prob.c_lp).powi(2)).sqrt();
    let con_norms: Vec<f64> = prob
        .constraints
        .iter()
        .map(|c| {
            let s: f64 = c
                .psd
                .iter()
                .map(|&(r, cc, v)| if r == cc { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                + c.lp.iter().map(|&(_, v)| v * v).sum::<f64>();
            s.sqrt()
        })
        .collect();
    let sqrt_n = nn.sqrt();
    let xi = prob
        .a
        .iter()
        .zip(&con_norms)
        .map(|(ai, ni)| sqrt_n * (1.0 + ai.abs()) / (1.0 + ni))
        .fold(10.0f64.max(sqrt_n), f64::max);
    let eta = con_norms
        .iter()
        .copied()
        .fold(10.0f64.max(sqrt_n).max(c_norm), f64::max);

    let mut x = Mat::<f64>::from_fn(n, n, |i, j| if i == j { xi } else { 0.0 });
    let mut x_lp = vec![xi; p];
    let mut z = Mat::<f64>::from_fn(n, n, |i, j| if i == j { eta } else { 0.0 });
    let mut z_lp = vec![eta; p];
    let mut y = vec![0.0; m];

    let mut status: IpmStatus;
    let mut best = Snapshot {
        score: f64::INFINITY,
        iteration: 0,
        y: Vec::new(),
        x: Mat::zeros(0, 0),
        x_lp: Vec::new(),
        z: Mat::zeros(0, 0),
        z_lp: Vec::new(),
        pobj: f64::NAN,
        dobj: f64::NAN,
        pinf: f64::INFINITY,
        dinf: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let mut iterations = 0;
    let (mut pinf, mut dinf, mut gap);
    let (mut pobj, mut dobj);

    loop {
        // residuals
        let ax = prep.apply(&x, &x_lp);
        let r_p: Vec<f64> = prob.a.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let (aty, aty_lp) = prep.adjoint(&y);
        let r_d = Mat::from_fn(n, n, |i, j| aty.read(i, j) - prob.c.read(i, j) - z.read(i, j));
        let r_d_lp: Vec<f64> = (0..p).map(|k| aty_lp[k] - prob.c_lp[k] - z_lp[k]).collect();
        pobj = dot(&prob.c, &x) + prob.c_lp.iter().zip(&x_lp).map(|(a, b)| a * b).sum::<f64>();
        dobj = prob.a.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        pinf = vnorm(&r_p) / (1.0 + a_norm);
        dinf = (frob(&r_d).powi(2) + vnorm(&r_d_lp).powi(2)).sqrt() / (1.0 + c_norm);
        let xz = dot(&x, &z) + x_lp.iter().zip(&z_lp).map(|(a, b)| a * b).sum::<f64>();
        gap = (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
        log::trace!(
            "ipm {iterations}: pobj {pobj:.9e} dobj {dobj:.9e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e}"
        );
        let score = pinf.max(dinf).max(gap);
        if score < best.score {
            best = Snapshot {
                score,
                iteration: iterations,
                y: y.clone(),
                x: x.clone(),
                x_lp: x_lp.clone(),
                z: z.clone(),
                z_lp: z_lp.clone(),
                pobj,
                dobj,
                pinf,
                dinf,
                gap,
            };
        }
        if score < opts.tolerance {
            status = IpmStatus::Converged;
            break;
        }
        if iterations >= best.iteration + STALL_WINDOW {
            status = IpmStatus::NumericalFailure;
            break;
        }
        if iterations >= opts.max_iterations {
            status = IpmStatus::IterationLimit;
            break;
        }
        iterations += 1;
        let mu = xz / nn;

        let Ok(zchol) = z.cholesky(Side::Lower) else {
            status = IpmStatus::NumericalFailure;
            break;
        };
        let w = sym(&zchol.inverse());
        let schur = prep.schur(&x, &w, &x_lp, &z_lp);
        let Some(schur) = factor_spd(&schur) else {
            status = IpmStatus::NumericalFailure;
            break;
        };

        // X R_d W, shared by predictor and corrector
        let xrdw = mul(&mul(&x, &r_d), &w);
        let xrdw_lp: Vec<f64> = (0..p).map(|k| x_lp[k] * r_d_lp[k] / z_lp[k]).collect();

        let direction = |sigma_mu: f64,
                         corr: Option<(&Mat<f64>, &[f64])>|
         -> Option<(Vec<f64>, Mat<f64>, Vec<f64>, Mat<f64>, Vec<f64>)> {
            // right-hand side
            let mut g = Mat::from_fn(n, n, |i, j| sigma_mu * w.read(i, j) - xrdw.read(i, j));
            let mut g_lp: Vec<f64> = (0..p).map(|k| sigma_mu / z_lp[k] - xrdw_lp[k]).collect();
            if let Some((c, c_lp)) = corr {
                g = Mat::from_fn(n, n, |i, j| g.read(i, j) - c.read(i, j));
                for k in 0..p {
                    g_lp[k] -= c_lp[k];
                }
            }
            let ag = prep.apply(&g, &g_lp);
            let rhs: Vec<f64> = (0..m).map(|i| ag[i] - prob.a[i]).collect();
            let dy = solve_with(&schur, &rhs)?;
            let (ady, ady_lp) = prep.adjoint(&dy);
            let dz = Mat::from_fn(n, n, |i, j| ady.read(i, j) + r_d.read(i, j));
            let dz_lp: Vec<f64> = (0..p).map(|k| ady_lp[k] + r_d_lp[k]).collect();
            let xdzw = mul(&mul(&x, &dz), &w);
            let dx_raw = Mat::from_fn(n, n, |i, j| g.read(i, j) + xrdw.read(i, j) - x.read(i, j) - xdzw.read(i, j));
            let dx = sym(&dx_raw);
            let dx_lp: Vec<f64> = (0..p)
                .map(|k| g_lp[k] + xrdw_lp[k] - x_lp[k] - x_lp[k] * dz_lp[k] / z_lp[k])
                .collect();
            Some((dy, dx, dx_lp, dz, dz_lp))
        };

        let Some((_, dxa, dxa_lp, dza, dza_lp)) = direction(0.0, None) else {
            status = IpmStatus::NumericalFailure;
            break;
        };
        let steps = |dx: &Mat<f64>, dx_lp: &[f64], dz: &Mat<f64>, dz_lp: &[f64]| {
            let ap = max_step_psd(&x, dx)
                .unwrap_or(0.0)
                .min(max_step_lp(&x_lp, dx_lp));
            let ad = max_step_psd(&z, dz)
                .unwrap_or(0.0)
                .min(max_step_lp(&z_lp, dz_lp));
            (ap, ad)
        };
        let (ap, ad) = steps(&dxa, &dxa_lp, &dza, &dza_lp);
        let (ap1, ad1) = (ap.min(1.0), ad.min(1.0));
        let x_aff = Mat::from_fn(n, n, |i, j| x.read(i, j) + ap1 * dxa.read(i, j));
        let z_aff = Mat::from_fn(n, n, |i, j| z.read(i, j) + ad1 * dza.read(i, j));
        let mu_aff = (dot(&x_aff, &z_aff)
            + (0..p)
                .map(|k| (x_lp[k] + ap1 * dxa_lp[k]) * (z_lp[k] + ad1 * dza_lp[k]))
                .sum::<f64>())
            / nn;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let corr = mul(&mul(&dxa, &dza), &w);
        let corr_lp: Vec<f64> = (0..p).map(|k| dxa_lp[k] * dza_lp[k] / z_lp[k]).collect();
        let Some((dy, dx, dx_lp, dz, dz_lp)) = direction(sigma * mu, Some((&corr, &corr_lp))) else {
            status = IpmStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = steps(&dx, &dx_lp, &dz, &dz_lp);
        let gamma = 0.9 + 0.09 * (ap.min(ad).min(1.0));
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        x = Mat::from_fn(n, n, |i, j| x.read(i, j) + ap * dx.read(i, j));
        for k in 0..p {
            x_lp[k] += ap * dx_lp[k];
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }
        z = Mat::from_fn(n, n, |i, j| z.read(i, j) + ad * dz.read(i, j));
        for k in 0..p {
            z_lp[k] += ad * dz_lp[k];
        }
        if !(pobj.is_finite() && dobj.is_finite()) {
            status = IpmStatus::NumericalFailure;
            break;
        }
    }
    if status != IpmStatus::Converged && best.score.is_finite() {
        // fall back to the best iterate seen
        if best.score < opts.tolerance {
            status = IpmStatus::Converged;
        } else if best.score < opts.stall_tolerance {
            status = IpmStatus::NearlyConverged;
        }
        return IpmResult {
            status,
            y: best.y,
            x: best.x,
            x_lp: best.x_lp,
            z: best.z,
            z_lp: best.z_lp,
            primal_objective: best.pobj,
            dual_objective: best.dobj,
            iterations,
            primal_infeasibility: best.pinf,
            dual_infeasibility: best.dinf,
            gap: best.gap,
        };
    }
    IpmResult {
        status,
        y,
        x,
        x_lp,
        z,
        z_lp,
        primal_objective: pobj,
        dual_objective: dobj,
        iterations,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        gap,
    }
}
