//! Grid solver for the matrix-valued Fokker-Planck equation
//! `d rho/dt = 1/2 rho'' - (N rho' + rho' N^dag) - i[H, rho] + L_N(rho)`.
//!
//! Each cell stores the unnormalized Bloch densities `(tau, q1, q2, q3)` of
//! `rho(x) = (tau I + q . s) / 2`. With `N = a s3` the advection acts on
//! `tau +- q3` only, at velocities `+-2a`; `q1, q2` only diffuse. The local
//! rotation/dephasing is integrated exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::{BlochState, ModelParams};

pub const FIELD_HEADER: [&str; 5] = ["x", "p", "q1_density", "q2_density", "q3_density"];

pub const MIN_CELLS: usize = 16;

/// Relative boundary flux above which a step reports a mass leak.
pub const LEAK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dt: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, dt: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(invalid("n_cells", format!("must be at least {MIN_CELLS}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(invalid("x_max", "must exceed x_min"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        Ok(Self { x_min, x_max, n_cells, dt })
    }

    /// Symmetric domain wide enough for the ballistic fronts up to `t_max`,
    /// cell size close to `dx`, and the largest stable step scaled by `safety`.
    pub fn auto(a: f64, t_max: f64, dx: f64, safety: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(invalid("dx", "must be positive"));
        }
        let half = 2.0 * a.abs() * t_max + 8.0 * t_max.sqrt() + 10.0 * dx;
        let n = ((2.0 * half / dx).ceil() as usize).max(MIN_CELLS);
        let mut g = Self::new(-half, half, n, 1.0)?;
        g.dt = safety.clamp(0.0, 1.0) * g.max_dt(a);
        Ok(g)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// `min(dx^2 / 2, dx / 4a)`.
    pub fn max_dt(&self, a: f64) -> f64 {
        let dx = self.dx();
        let diff = 0.5 * dx * dx;
        if a == 0.0 {
            diff
        } else {
            diff.min(dx / (4.0 * a.abs()))
        }
    }

    pub fn check_cfl(&self, a: f64, dt: f64) -> Result<()> {
        let bound = self.max_dt(a);
        if dt > bound * (1.0 + 1e-12) {
            Err(Error::CflViolation { dt, bound })
        } else {
            Ok(())
        }
    }
}

/// Unnormalized Bloch densities on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDensityField {
    pub t: f64,
    pub tau: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub q3: Vec<f64>,
}

impl MatrixDensityField {
    pub fn zeros(n: usize) -> Self {
        Self { t: 0.0, tau: vec![0.0; n], q1: vec![0.0; n], q2: vec![0.0; n], q3: vec![0.0; n] }
    }

    /// `rho0 (x) g(x)` for a normalized Gaussian `g` of the given width,
    /// integrated over each cell.
    pub fn gaussian(grid: &Grid1D, center: f64, width: f64, rho0: BlochState) -> Result<Self> {
        rho0.validate()?;
        if !(width > 0.0) {
            return Err(invalid("width", "must be positive"));
        }
        let rho0 = rho0.normalized();
        let dx = grid.dx();
        let cdf = |x: f64| 0.5 * erfc(-(x - center) / (width * std::f64::consts::SQRT_2));
        let mut f = Self::zeros(grid.n_cells);
        let mut total = 0.0;
        for i in 0..grid.n_cells {
            let lo = grid.x_min + i as f64 * dx;
            let w = (cdf(lo + dx) - cdf(lo)) / dx;
            total += w * dx;
            f.tau[i] = w;
        }
        for i in 0..grid.n_cells {
            let w = f.tau[i] / total;
            f.tau[i] = w;
            f.q1[i] = w * rho0.q1;
            f.q2[i] = w * rho0.q2;
            f.q3[i] = w * rho0.q3;
        }
        Ok(f)
    }

    /// Point-like start: a Gaussian three cells wide.
    pub fn point(grid: &Grid1D, x0: f64, rho0: BlochState) -> Result<Self> {
        Self::gaussian(grid, x0, 3.0 * grid.dx(), rho0)
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn mass(&self, grid: &Grid1D) -> f64 {
        self.tau.iter().sum::<f64>() * grid.dx()
    }

    /// Marginal `p(x) = tr rho(x)`.
    pub fn marginal(&self) -> &[f64] {
        &self.tau
    }

    /// `integral rho(x) dx` in Bloch form (trace is the total mass).
    pub fn mean_state(&self, grid: &Grid1D) -> BlochState {
        let dx = grid.dx();
        BlochState {
            trace: self.tau.iter().sum::<f64>() * dx,
            q1: self.q1.iter().sum::<f64>() * dx,
            q2: self.q2.iter().sum::<f64>() * dx,
            q3: self.q3.iter().sum::<f64>() * dx,
        }
    }

    /// `k`-th raw moment of `p`, normalized by the mass.
    pub fn moment(&self, grid: &Grid1D, k: i32) -> f64 {
        let m: f64 = self.tau.iter().enumerate().map(|(i, p)| p * grid.center(i).powi(k)).sum();
        m / self.tau.iter().sum::<f64>()
    }

    /// Mean, variance, skewness and excess kurtosis of `p`.
    pub fn shape(&self, grid: &Grid1D) -> [f64; 4] {
        let total: f64 = self.tau.iter().sum();
        let mean = self.moment(grid, 1);
        let c = |k: i32| self.tau.iter().enumerate().map(|(i, p)| p * (grid.center(i) - mean).powi(k)).sum::<f64>() / total;
        let var = c(2);
        [mean, var, c(3) / var.powf(1.5), c(4) / (var * var) - 3.0]
    }

    pub fn min_trace(&self) -> f64 {
        self.tau.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, grid: &Grid1D, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(FIELD_HEADER)?;
        for i in 0..self.len() {
            wr.write_record([
                grid.center(i).to_string(),
                self.tau[i].to_string(),
                self.q1[i].to_string(),
                self.q2[i].to_string(),
                self.q3[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Complementary error function (Numerical Recipes `erfcc`, relative error < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806 + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// `exp(M h)` for `M = [[-2a^2, -2w], [2w, 0]]` acting on `(q1, q3)`, and the
/// `q2` factor `exp(-2a^2 h)`.
#[derive(Debug, Clone, Copy)]
pub struct LocalPropagator {
    m: [[f64; 2]; 2],
    q2_factor: f64,
}

impl LocalPropagator {
    pub fn new(p: &ModelParams, h: f64) -> Self {
        let a2 = p.a * p.a;
        let w = p.omega0;
        let gen = [[-2.0 * a2, -2.0 * w], [2.0 * w, 0.0]];
        let mu = -a2;
        // eigenvalues mu +- sqrt(mu^2 - det), det = 4 w^2
        let disc = mu * mu - 4.0 * w * w;
        let (c, s_over) = if disc > 0.0 {
            let s = disc.sqrt();
            ((s * h).cosh(), if s * h == 0.0 { h } else { (s * h).sinh() / s })
        } else if disc < 0.0 {
            let s = (-disc).sqrt();
            ((s * h).cos(), (s * h).sin() / s)
        } else {
            (1.0, h)
        };
        let e = (mu * h).exp();
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                let shifted = gen[i][j] - if i == j { mu } else { 0.0 };
                m[i][j] = e * (c * id + s_over * shifted);
            }
        }
        Self { m, q2_factor: (-2.0 * a2 * h).exp() }
    }

    #[inline]
    pub fn apply(&self, q1: f64, q2: f64, q3: f64) -> (f64, f64, f64) {
        (
            self.m[0][0] * q1 + self.m[0][1] * q3,
            self.q2_factor * q2,
            self.m[1][0] * q1 + self.m[1][1] * q3,
        )
    }

    fn apply_field(&self, f: &mut MatrixDensityField) {
        for i in 0..f.len() {
            let (a, b, c) = self.apply(f.q1[i], f.q2[i], f.q3[i]);
            f.q1[i] = a;
            f.q2[i] = b;
            f.q3[i] = c;
        }
    }
}

/// Conservative explicit update of one component with velocity `v` and
/// diffusion constant 1/2, zero flux at both ends.
fn transport(u: &[f64], v: f64, dt: f64, dx: f64, out: &mut [f64]) {
    let n = u.len();
    let lam = dt / dx;
    let nu = 0.5 * dt / (dx * dx);
    out.copy_from_slice(u);
    for i in 0..n - 1 {
        let adv = if v >= 0.0 { v * u[i] } else { v * u[i + 1] };
        // flux through face i+1/2, moving mass from i to i+1
        let flux = lam * adv - nu * (u[i + 1] - u[i]);
        out[i] -= flux;
        out[i + 1] += flux;
    }
}

/// Advection/diffusion sub-step on the whole field.
fn transport_field(f: &MatrixDensityField, a: f64, dt: f64, dx: f64, scratch: &mut Scratch) -> MatrixDensityField {
    let n = f.len();
    for i in 0..n {
        scratch.wp[i] = f.tau[i] + f.q3[i];
        scratch.wm[i] = f.tau[i] - f.q3[i];
    }
    let mut next = MatrixDensityField::zeros(n);
    next.t = f.t;
    transport(&scratch.wp, 2.0 * a, dt, dx, &mut scratch.out_p);
    transport(&scratch.wm, -2.0 * a, dt, dx, &mut scratch.out_m);
    transport(&f.q1, 0.0, dt, dx, &mut next.q1);
    transport(&f.q2, 0.0, dt, dx, &mut next.q2);
    for i in 0..n {
        next.tau[i] = 0.5 * (scratch.out_p[i] + scratch.out_m[i]);
        next.q3[i] = 0.5 * (scratch.out_p[i] - scratch.out_m[i]);
    }
    next
}

struct Scratch {
    wp: Vec<f64>,
    wm: Vec<f64>,
    out_p: Vec<f64>,
    out_m: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { wp: vec![0.0; n], wm: vec![0.0; n], out_p: vec![0.0; n], out_m: vec![0.0; n] }
    }
}

/// Rate at which mass would cross the boundaries if they were open.
pub fn boundary_flux(f: &MatrixDensityField, a: f64, dx: f64) -> f64 {
    let n = f.len();
    let wp_right = f.tau[n - 1] + f.q3[n - 1];
    let wm_left = f.tau[0] - f.q3[0];
    let adv = a.abs() * (wp_right.abs() + wm_left.abs());
    let diff = 0.5 * (f.tau[0].abs() + f.tau[n - 1].abs()) / dx;
    adv + diff
}

fn check_leak(f: &MatrixDensityField, a: f64, grid: &Grid1D) -> Result<()> {
    let flux = boundary_flux(f, a, grid.dx());
    let mass = f.mass(grid);
    if flux > LEAK_TOL * mass.abs() {
        Err(Error::MassLeak { flux: flux / mass })
    } else {
        Ok(())
    }
}

fn step_with(
    f: &MatrixDensityField,
    p: &ModelParams,
    grid: &Grid1D,
    dt: f64,
    half: &LocalPropagator,
    scratch: &mut Scratch,
) -> Result<MatrixDensityField> {
    grid.check_cfl(p.a, dt)?;
    check_leak(f, p.a, grid)?;
    let mut g = f.clone();
    half.apply_field(&mut g);
    let mut g = transport_field(&g, p.a, dt, grid.dx(), scratch);
    half.apply_field(&mut g);
    g.t = f.t + dt;
    Ok(g)
}

/// One Strang-split step of length `grid.dt`.
pub fn pde_step(field: &MatrixDensityField, p: &ModelParams, grid: &Grid1D) -> Result<MatrixDensityField> {
    if field.len() != grid.n_cells {
        return Err(invalid("field", "size does not match the grid"));
    }
    let half = LocalPropagator::new(p, 0.5 * grid.dt);
    step_with(field, p, grid, grid.dt, &half, &mut Scratch::new(grid.n_cells))
}

/// Integrates to each of `times` (ascending), returning one snapshot per time.
/// The last step before a snapshot is shortened to land on it exactly.
pub fn solve(p: &ModelParams, grid: &Grid1D, initial: MatrixDensityField, times: &[f64]) -> Result<Vec<MatrixDensityField>> {
    if initial.len() != grid.n_cells {
        return Err(invalid("field", "size does not match the grid"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < initial.t) {
        return Err(invalid("times", "must be ascending and not before the initial time"));
    }
    grid.check_cfl(p.a, grid.dt)?;
    let full = LocalPropagator::new(p, 0.5 * grid.dt);
    let mut scratch = Scratch::new(grid.n_cells);
    let mut field = initial;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        loop {
            let remaining = target - field.t;
            if remaining <= 1e-12 * target.abs().max(1.0) {
                break;
            }
            field = if remaining < grid.dt {
                let half = LocalPropagator::new(p, 0.5 * remaining);
                let mut g = step_with(&field, p, grid, remaining, &half, &mut scratch)?;
                g.t = target;
                g
            } else {
                step_with(&field, p, grid, grid.dt, &full, &mut scratch)?
            };
        }
        field.t = target;
        out.push(field.clone());
    }
    Ok(out)
}

/// Exact integral over `[lo, hi]` of the piecewise-constant grid density.
pub fn integrate_cells(grid: &Grid1D, density: &[f64], lo: f64, hi: f64) -> f64 {
    let dx = grid.dx();
    let first = (((lo - grid.x_min) / dx).floor().max(0.0)) as usize;
    let last = ((((hi - grid.x_min) / dx).ceil()) as usize).min(grid.n_cells);
    let mut s = 0.0;
    for (i, d) in density.iter().enumerate().take(last).skip(first) {
        let a = grid.x_min + i as f64 * dx;
        let overlap = (hi.min(a + dx) - lo.max(a)).max(0.0);
        s += d * overlap;
    }
    s
}
