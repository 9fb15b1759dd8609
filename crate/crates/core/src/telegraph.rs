//! Telegraph walker `dX = (-1)^N dt` with a unit-rate Poisson counter `N`:
//! exact event-driven sampling, a two-component transport solver and the
//! expansion of the density in the number of velocity reversals.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fokker_planck::Grid1D;
use crate::rng::seed_stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphState {
    pub x: f64,
    /// `+1` or `-1`.
    pub velocity: i8,
    pub t: f64,
    pub n_flips: u32,
}

/// Exact path on `[0, t_max]` starting at `x = 0` with velocity `v0`.
/// Reversal times are pushed to `events` when given.
pub fn telegraph_path<R: Rng + ?Sized>(rng: &mut R, t_max: f64, v0: i8, mut events: Option<&mut Vec<f64>>) -> TelegraphState {
    let mut s = TelegraphState { x: 0.0, velocity: v0.signum(), t: 0.0, n_flips: 0 };
    loop {
        let wait: f64 = Exp1.sample(rng);
        if s.t + wait >= t_max {
            s.x += f64::from(s.velocity) * (t_max - s.t);
            s.t = t_max;
            return s;
        }
        s.t += wait;
        s.x += f64::from(s.velocity) * wait;
        s.velocity = -s.velocity;
        s.n_flips += 1;
        if let Some(ev) = events.as_deref_mut() {
            ev.push(s.t);
        }
    }
}

/// Path on stream `(seed, index)` with initial velocity `+1`.
pub fn simulate_telegraph(t_max: f64, seed: u64, index: u64) -> TelegraphState {
    telegraph_path(&mut seed_stream(seed, index), t_max, 1, None)
}

/// Densities of right- and left-movers plus the unflipped point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoComponentField {
    pub t: f64,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    /// Weight of walkers that never reversed, all at `dirac_x`.
    pub dirac_weight: f64,
    pub dirac_x: f64,
}

impl TwoComponentField {
    /// Every walker at `x = 0` moving right.
    pub fn start(grid: &Grid1D) -> Self {
        Self { t: 0.0, p_plus: vec![0.0; grid.n_cells], p_minus: vec![0.0; grid.n_cells], dirac_weight: 1.0, dirac_x: 0.0 }
    }

    pub fn continuous_mass(&self, grid: &Grid1D) -> f64 {
        (self.p_plus.iter().sum::<f64>() + self.p_minus.iter().sum::<f64>()) * grid.dx()
    }

    pub fn mass(&self, grid: &Grid1D) -> f64 {
        self.continuous_mass(grid) + self.dirac_weight
    }

    /// Continuous part of the position density, `p+ + p-`.
    pub fn density(&self) -> Vec<f64> {
        self.p_plus.iter().zip(&self.p_minus).map(|(a, b)| a + b).collect()
    }
}

/// Grid of half-width `t_max + 4 dx` whose time step equals the cell size.
pub fn telegraph_grid(t_max: f64, dx: f64) -> Result<Grid1D> {
    let half = t_max + 4.0 * dx;
    let n = (2.0 * half / dx).round() as usize;
    Grid1D::new(-half, half, n, dx)
}

fn deposit(grid: &Grid1D, target: &mut [f64], lo: f64, hi: f64, mass: f64) {
    let dx = grid.dx();
    let density = mass / (hi - lo);
    let first = (((lo - grid.x_min) / dx).floor().max(0.0)) as usize;
    let last = ((((hi - grid.x_min) / dx).ceil()) as usize).min(grid.n_cells);
    for (i, cell) in target.iter_mut().enumerate().take(last).skip(first) {
        let a = grid.x_min + i as f64 * dx;
        let overlap = (hi.min(a + dx) - lo.max(a)).max(0.0);
        *cell += density * overlap / dx;
    }
}

fn shift(u: &[f64], c: f64, out: &mut [f64]) {
    // upwind, zero flux at both ends; c = v dt / dx in [-1, 1]
    out.copy_from_slice(u);
    let n = u.len();
    for i in 0..n - 1 {
        let flux = if c >= 0.0 { c * u[i] } else { c * u[i + 1] };
        out[i] -= flux;
        out[i + 1] += flux;
    }
}

/// One step of length `grid.dt`: upwind transport at `+-1`, exact exchange
/// `exp(-dt [[1,-1],[-1,1]])`, then depletion of the point mass at rate 1
/// into left-movers spread over `[x_d - dt, x_d + dt]`.
pub fn telegraph_fp_step(field: &TwoComponentField, grid: &Grid1D) -> Result<TwoComponentField> {
    let dt = grid.dt;
    let dx = grid.dx();
    if dt > dx * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound: dx });
    }
    if field.p_plus.len() != grid.n_cells || field.p_minus.len() != grid.n_cells {
        return Err(invalid("field", "size does not match the grid"));
    }
    let c = (dt / dx).min(1.0);
    let n = grid.n_cells;
    let mut pp = vec![0.0; n];
    let mut pm = vec![0.0; n];
    shift(&field.p_plus, c, &mut pp);
    shift(&field.p_minus, -c, &mut pm);
    let e = (-2.0 * dt).exp();
    let stay = 0.5 * (1.0 + e);
    let swap = 0.5 * (1.0 - e);
    for i in 0..n {
        let (a, b) = (pp[i], pm[i]);
        pp[i] = stay * a + swap * b;
        pm[i] = swap * a + stay * b;
    }
    let emitted = field.dirac_weight * (1.0 - (-dt).exp());
    deposit(grid, &mut pm, field.dirac_x - dt, field.dirac_x + dt, emitted);
    Ok(TwoComponentField {
        t: field.t + dt,
        p_plus: pp,
        p_minus: pm,
        dirac_weight: field.dirac_weight - emitted,
        dirac_x: field.dirac_x + dt,
    })
}

/// Steps from the initial condition to `t_max` (rounded to whole steps).
pub fn telegraph_fp_solve(grid: &Grid1D, t_max: f64) -> Result<TwoComponentField> {
    let steps = (t_max / grid.dt).round() as u64;
    let mut f = TwoComponentField::start(grid);
    for _ in 0..steps {
        f = telegraph_fp_step(&f, grid)?;
    }
    Ok(f)
}

/// Point-mass weight and continuous density at `(x, t)` truncated after
/// `order` reversals (0, 1 or 2).
pub fn flip_expansion_pdf(x: f64, t: f64, order: u8) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    if x.abs() > t {
        return Err(Error::OutsideSupport { x, t });
    }
    if order > 2 {
        return Err(invalid("order", "at most 2"));
    }
    let e = (-t).exp();
    let mut density = 0.0;
    if order >= 1 {
        density += 0.5 * e;
    }
    if order >= 2 {
        density += two_flip_density(x, t);
    }
    Ok((e, density))
}

/// Density of walkers with exactly two reversals, `e^-t (t + x) / 4`.
pub fn two_flip_density(x: f64, t: f64) -> f64 {
    (-t).exp() * (t + x) / 4.0
}

/// `P(N_t >= 3) = 1 - e^-t (1 + t + t^2/2)`.
pub fn poisson_tail(t: f64) -> f64 {
    1.0 - (-t).exp() * (1.0 + t + 0.5 * t * t)
}
