//! Dense bounded-variable primal simplex.
//!
//! Every row is turned into an equality by a slack whose bounds encode the
//! row sense (`<=`: `[0, inf)`, `>=`: `(-inf, 0]`, `=`: `[0, 0]`). Rows whose
//! starting slack would be out of bounds get an artificial column and phase 1
//! drives the artificial sum to zero. Pricing is Dantzig's rule until a run of
//! degenerate pivots forces Bland's rule for the rest of the solve.

use nalgebra::{DMatrix, DVector};

use super::{LpError, LpInstance, LpSolution, LpStatus, RowSense};

/// Pivots with no objective progress tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 1000;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 128;
const MAX_REFACTOR_RETRIES: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Pricing {
    Dantzig,
    Bland,
}

struct Tableau {
    m: usize,
    /// Total columns: structural, then slack, then artificial.
    ncols: usize,
    n_struct: usize,
    /// Scaled constraint matrix including slack/artificial columns (column major use).
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// B^-1 A, row major m x ncols.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
    degenerate_run: usize,
    pricing: Pricing,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.ncols + j]
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.recompute_reduced();
    }

    fn recompute_reduced(&mut self) {
        let mut d = self.cost.clone();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
                for (dj, tj) in d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
        for r in 0..self.m {
            d[self.basis[r]] = 0.0;
        }
        self.reduced = d;
    }

    /// Rebuild B^-1 A and the basic values from the original scaled data.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            bmat.set_column(r, &self.a.column(j));
        }
        let lu = bmat.lu();
        if !lu.is_invertible() {
            return Err(LpError::Numerical("singular basis during refactorization".into()));
        }
        let binv_a = lu
            .solve(&self.a)
            .ok_or_else(|| LpError::Numerical("basis solve failed".into()))?;
        for r in 0..m {
            for j in 0..self.ncols {
                self.t[r * self.ncols + j] = binv_a[(r, j)];
            }
        }
        // x_B = B^-1 (b - N x_N)
        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                rhs.axpy(-self.x[j], &self.a.column(j), 1.0);
            }
        }
        let xb = lu
            .solve(&rhs)
            .ok_or_else(|| LpError::Numerical("basis solve failed".into()))?;
        for r in 0..m {
            self.x[self.basis[r]] = xb[r];
        }
        for r in 0..m {
            let j = self.basis[r];
            for c in 0..self.ncols {
                let v = &mut self.t[r * self.ncols + c];
                if c == j {
                    *v = 1.0;
                } else if self.is_basic[c] {
                    *v = 0.0;
                }
            }
        }
        self.recompute_reduced();
        self.since_refactor = 0;
        Ok(())
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.is_basic[j] {
                continue;
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == u {
                continue;
            }
            let d = self.reduced[j];
            let xj = self.x[j];
            let can_up = xj < u;
            let can_down = xj > l;
            let dir = if d < -COST_TOL && can_up {
                1.0
            } else if d > COST_TOL && can_down {
                -1.0
            } else {
                continue;
            };
            match self.pricing {
                Pricing::Bland => return Some((j, dir)),
                Pricing::Dantzig => {
                    if best.is_none_or(|(_, _, s)| d.abs() > s) {
                        best = Some((j, dir, d.abs()));
                    }
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// One simplex step. Returns false at optimality.
    fn step(&mut self) -> Result<bool, LpError> {
        let Some((q, dir)) = self.choose_entering() else {
            return Ok(false);
        };
        // Ratio test.
        let own = self.upper[q] - self.lower[q];
        let mut theta = if own.is_finite() { own } else { f64::INFINITY };
        let mut leave: Option<usize> = None;
        let mut leave_alpha = 0.0;
        for r in 0..self.m {
            let alpha = dir * self.at(r, q);
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basis[r];
            let lim = if alpha > 0.0 {
                if self.lower[j].is_finite() {
                    (self.x[j] - self.lower[j]) / alpha
                } else {
                    continue;
                }
            } else if self.upper[j].is_finite() {
                (self.upper[j] - self.x[j]) / (-alpha)
            } else {
                continue;
            };
            let lim = lim.max(0.0);
            let take = if lim < theta - 1e-12 {
                true
            } else if lim <= theta + 1e-12 {
                match leave {
                    // Prefer a pivot over a bound flip at equal step.
                    None => true,
                    Some(cur) => match self.pricing {
                        Pricing::Bland => j < self.basis[cur],
                        Pricing::Dantzig => alpha.abs() > leave_alpha,
                    },
                }
            } else {
                false
            };
            if take {
                theta = lim.min(theta);
                leave = Some(r);
                leave_alpha = alpha.abs();
            }
        }
        if !theta.is_finite() {
            return Err(LpError::Unbounded);
        }
        if theta <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run > DEGENERATE_LIMIT {
                self.pricing = Pricing::Bland;
            }
        } else {
            self.degenerate_run = 0;
        }
        // Update basic values.
        let step = dir * theta;
        if step != 0.0 {
            for r in 0..self.m {
                let tq = self.at(r, q);
                if tq != 0.0 {
                    let j = self.basis[r];
                    self.x[j] -= step * tq;
                }
            }
            self.x[q] += step;
        }
        match leave {
            None => {
                // Bound flip: entering variable moves to its opposite bound.
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some(r) => {
                let out = self.basis[r];
                let alpha = dir * self.at(r, q);
                self.x[out] = if alpha > 0.0 { self.lower[out] } else { self.upper[out] };
                self.pivot(r, q);
            }
        }
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(true)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let piv = self.at(r, q);
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let prow: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f != 0.0 {
                let row = &mut self.t[i * n..(i + 1) * n];
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let dq = self.reduced[q];
        if dq != 0.0 {
            for (v, p) in self.reduced.iter_mut().zip(&prow) {
                *v -= dq * p;
            }
        }
        self.reduced[q] = 0.0;
        let out = self.basis[r];
        self.is_basic[out] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }

    fn run(&mut self, max_iter: usize) -> Result<(), LpError> {
        let mut iters = 0;
        while self.step()? {
            iters += 1;
            if iters > max_iter {
                return Err(LpError::Numerical(format!(
                    "iteration limit {max_iter} reached"
                )));
            }
        }
        Ok(())
    }

    fn max_primal_violation(&self) -> f64 {
        // Bound violations of basic variables, in scaled units.
        let mut worst: f64 = 0.0;
        for &j in &self.basis {
            let v = self.x[j];
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }
}

pub(super) fn solve(inst: &LpInstance) -> Result<LpSolution, LpError> {
    let n = inst.objective.len();
    // Drop all-zero rows, checking that they are satisfied.
    let mut keep = Vec::with_capacity(inst.rows.len());
    for (i, row) in inst.rows.iter().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            let rhs = inst.rhs[i];
            let ok = match inst.senses[i] {
                RowSense::Le => rhs >= -FEAS_TOL,
                RowSense::Ge => rhs <= FEAS_TOL,
                RowSense::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return Ok(LpSolution::infeasible(n));
            }
        } else {
            keep.push((i, norm));
        }
    }
    for j in 0..n {
        if inst.lower[j] > inst.upper[j] + FEAS_TOL {
            return Ok(LpSolution::infeasible(n));
        }
    }
    let m = keep.len();

    // Starting point of structural variables.
    let mut x0 = vec![0.0; n];
    for j in 0..n {
        let (l, u) = (inst.lower[j], inst.upper[j].max(inst.lower[j]));
        x0[j] = if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        };
    }

    // Residuals decide which rows need an artificial.
    let mut art_rows = Vec::new();
    let mut slack_vals = vec![0.0; m];
    let mut art_sign = vec![0.0; m];
    for (r, &(i, norm)) in keep.iter().enumerate() {
        let row = &inst.rows[i];
        let ax: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let s = (inst.rhs[i] - ax) / norm;
        let (sl, su) = slack_bounds(inst.senses[i]);
        let clamped = s.clamp(sl, su);
        if (s - clamped).abs() <= FEAS_TOL {
            slack_vals[r] = s;
        } else {
            slack_vals[r] = clamped;
            art_sign[r] = (s - clamped).signum();
            art_rows.push(r);
        }
    }

    let n_art = art_rows.len();
    let ncols = n + m + n_art;
    let mut a = DMatrix::<f64>::zeros(m.max(1), ncols.max(1));
    let mut b = DVector::<f64>::zeros(m.max(1));
    let mut lower = vec![0.0; ncols];
    let mut upper = vec![0.0; ncols];
    let mut x = vec![0.0; ncols];
    for j in 0..n {
        lower[j] = inst.lower[j];
        upper[j] = inst.upper[j].max(inst.lower[j]);
        x[j] = x0[j];
    }
    for (r, &(i, norm)) in keep.iter().enumerate() {
        for j in 0..n {
            a[(r, j)] = inst.rows[i][j] / norm;
        }
        a[(r, n + r)] = 1.0;
        b[r] = inst.rhs[i] / norm;
        let (sl, su) = slack_bounds(inst.senses[i]);
        lower[n + r] = sl;
        upper[n + r] = su;
        x[n + r] = slack_vals[r];
    }
    let mut basis = Vec::with_capacity(m);
    let mut is_basic = vec![false; ncols];
    let mut art_of_row = vec![None; m];
    for (k, &r) in art_rows.iter().enumerate() {
        art_of_row[r] = Some(n + m + k);
    }
    for r in 0..m {
        let col = match art_of_row[r] {
            Some(c) => {
                let k = c - n - m;
                a[(r, c)] = art_sign[art_rows[k]];
                lower[c] = 0.0;
                upper[c] = f64::INFINITY;
                c
            }
            None => n + r,
        };
        basis.push(col);
        is_basic[col] = true;
    }

    let mut tab = Tableau {
        m,
        ncols,
        n_struct: n,
        a,
        b,
        t: vec![0.0; m * ncols],
        lower,
        upper,
        x,
        basis,
        is_basic,
        cost: vec![0.0; ncols],
        reduced: vec![0.0; ncols],
        pivots: 0,
        since_refactor: 0,
        degenerate_run: 0,
        pricing: Pricing::Dantzig,
    };
    if m > 0 {
        tab.refactor()?;
    }
    let max_iter = 50_000 + 200 * (m + ncols);

    if n_art > 0 {
        let mut c1 = vec![0.0; ncols];
        for c in c1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        tab.set_cost(c1);
        tab.run(max_iter)?;
        tab.refactor()?;
        let infeas: f64 = (n + m..ncols).map(|j| tab.x[j].max(0.0)).sum();
        if infeas > FEAS_TOL {
            return Ok(LpSolution::infeasible(n));
        }
        for j in n + m..ncols {
            tab.upper[j] = 0.0;
            if !tab.is_basic[j] {
                tab.x[j] = 0.0;
            }
        }
        tab.degenerate_run = 0;
        tab.pricing = Pricing::Dantzig;
    }

    let mut c2 = vec![0.0; ncols];
    c2[..n].copy_from_slice(&inst.objective);
    tab.set_cost(c2);

    let mut retries = 0;
    loop {
        match tab.run(max_iter) {
            Ok(()) => {}
            Err(LpError::Unbounded) => return Ok(LpSolution::unbounded(n, tab.pivots)),
            Err(e) => return Err(e),
        }
        if m > 0 {
            tab.refactor()?;
        }
        let viol = tab.max_primal_violation();
        if viol > FEAS_TOL {
            return Err(LpError::Numerical(format!(
                "primal violation {viol:.3e} after refactorization"
            )));
        }
        retries += 1;
        if tab.choose_entering().is_none() || retries > MAX_REFACTOR_RETRIES {
            break;
        }
    }

    let point: Vec<f64> = tab.x[..tab.n_struct].to_vec();
    let value = inst.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    let mut active = Vec::new();
    for (r, &(i, norm)) in keep.iter().enumerate() {
        let slack = tab.x[n + r];
        let tight = match inst.senses[i] {
            RowSense::Eq => true,
            _ => slack.abs() <= FEAS_TOL * norm.max(1.0),
        };
        if tight {
            active.push(i);
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        point,
        active_rows: active,
        pivots: tab.pivots,
    })
}

fn slack_bounds(sense: RowSense) -> (f64, f64) {
    match sense {
        RowSense::Le => (0.0, f64::INFINITY),
        RowSense::Ge => (f64::NEG_INFINITY, 0.0),
        RowSense::Eq => (0.0, 0.0),
    }
}
