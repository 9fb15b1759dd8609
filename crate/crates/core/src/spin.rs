//! 2x2 complex algebra for the internal spin, Kraus pairs and Bloch states.
//!
//! Density matrices are written `rho = (trace * I + q1 s1 + q2 s2 + q3 s3) / 2`
//! with the usual Pauli matrices. The noise operator is `N = a s3`; the
//! Hamiltonian is a rotation generator of strength `omega0` in the (q1, q3)
//! plane oriented so that `dq3 = 2 omega0 q1 dt` (see [`hamiltonian`]).

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Residual tolerance for `B+^dag B+ + B-^dag B- = I`.
pub const UNITARITY_TOL: f64 = 1e-12;

/// Branch probabilities below this value are flagged degenerate.
pub const BRANCH_FLOOR: f64 = 1e-14;

/// Row-major 2x2 complex matrix `(a11, a12, a21, a22)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex2x2(pub [Complex64; 4]);

impl Complex2x2 {
    pub const fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Self([a11, a12, a21, a22])
    }

    pub const fn real(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self([
            Complex64::new(a11, 0.0),
            Complex64::new(a12, 0.0),
            Complex64::new(a21, 0.0),
            Complex64::new(a22, 0.0),
        ])
    }

    pub const fn zero() -> Self {
        Self([ZERO; 4])
    }

    pub const fn identity() -> Self {
        Self([ONE, ZERO, ZERO, ONE])
    }

    pub const fn sigma1() -> Self {
        Self([ZERO, ONE, ONE, ZERO])
    }

    pub const fn sigma2() -> Self {
        Self([ZERO, Complex64::new(0.0, -1.0), I, ZERO])
    }

    pub const fn sigma3() -> Self {
        Self([ONE, ZERO, ZERO, Complex64::new(-1.0, 0.0)])
    }

    /// Pauli matrix by index, with `0` the identity.
    pub fn pauli(index: usize) -> Self {
        match index {
            0 => Self::identity(),
            1 => Self::sigma1(),
            2 => Self::sigma2(),
            3 => Self::sigma3(),
            _ => panic!("Pauli index {index} out of range"),
        }
    }

    pub fn adjoint(&self) -> Self {
        let [a, b, c, d] = self.0;
        Self([a.conj(), c.conj(), b.conj(), d.conj()])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0] + self.0[3]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// `self * rho * self^dag`
    pub fn conjugate(&self, rho: &Self) -> Self {
        *self * *rho * self.adjoint()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let [a, b, c, d] = self.0;
        Some(Self([d, -b, -c, a]).scale(det.inv()))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    /// Inverse square root of a Hermitian positive-definite matrix.
    ///
    /// Uses `sqrt(S) = (S + sqrt(det S) I) / sqrt(tr S + 2 sqrt(det S))`.
    pub fn hermitian_inv_sqrt(&self) -> Option<Self> {
        let tr = self.trace().re;
        let det = self.det().re;
        if !(tr > 0.0 && det > 0.0) {
            return None;
        }
        let sd = det.sqrt();
        let sqrt = (*self + Self::identity().scale_re(sd)).scale_re(1.0 / (tr + 2.0 * sd).sqrt());
        sqrt.inverse()
    }
}

impl Add for Complex2x2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.0, rhs.0);
        Self([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl Sub for Complex2x2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let (a, b) = (self.0, rhs.0);
        Self([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
    }
}

impl Neg for Complex2x2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|z| -z))
    }
}

impl Mul for Complex2x2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Self([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

/// Rotation generator `H` of strength `omega0`.
///
/// Equal to `-omega0 s2` in the standard Pauli convention, which yields
/// `dq3 = 2 omega0 q1 dt`, `dq1 = -2 omega0 q3 dt` under `-i[H, rho]` and maps
/// the real Kraus family with `r = -s > 0` onto `omega0 > 0`.
pub fn hamiltonian(omega0: f64) -> Complex2x2 {
    Complex2x2::sigma2().scale_re(-omega0)
}

/// Noise operator `N = a s3`.
pub fn noise_operator(a: f64) -> Complex2x2 {
    Complex2x2::sigma3().scale_re(a)
}

/// Internal density matrix in Bloch form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub trace: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl BlochState {
    pub const fn new(q1: f64, q2: f64, q3: f64) -> Self {
        Self { trace: 1.0, q1, q2, q3 }
    }

    pub const fn maximally_mixed() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub const fn pure_up() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub const fn pure_down() -> Self {
        Self::new(0.0, 0.0, -1.0)
    }

    /// Reads the Bloch components of a Hermitian matrix.
    pub fn from_matrix(m: &Complex2x2) -> Self {
        let [a11, a12, a21, a22] = m.0;
        Self {
            trace: (a11 + a22).re,
            q1: (a12 + a21).re,
            q2: (a21 - a12).im,
            q3: (a11 - a22).re,
        }
    }

    pub fn to_matrix(&self) -> Complex2x2 {
        let h = 0.5;
        Complex2x2::new(
            Complex64::new(h * (self.trace + self.q3), 0.0),
            Complex64::new(h * self.q1, -h * self.q2),
            Complex64::new(h * self.q1, h * self.q2),
            Complex64::new(h * (self.trace - self.q3), 0.0),
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.trace, self.q1, self.q2, self.q3]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { trace: v[0], q1: v[1], q2: v[2], q3: v[3] }
    }

    pub fn bloch_norm_sq(&self) -> f64 {
        self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    pub fn det(&self) -> f64 {
        0.25 * (self.trace * self.trace - self.bloch_norm_sq())
    }

    /// `sqrt(det rho)` with the determinant clamped at zero.
    pub fn sqrt_det(&self) -> f64 {
        self.det().max(0.0).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let t = self.trace;
        Self { trace: 1.0, q1: self.q1 / t, q2: self.q2 / t, q3: self.q3 / t }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Positivity check: `|q|^2 <= trace^2 + 1e-9` and `det >= -1e-12`.
    pub fn is_physical(&self) -> bool {
        self.is_finite()
            && self.trace >= 0.0
            && self.bloch_norm_sq() <= self.trace * self.trace + 1e-9
            && self.det() >= -1e-12
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(invalid("rho", format!("not a density matrix: {self:?}")))
        }
    }
}

/// Real `(u, v, r, s)` parametrization of the Kraus pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrausParamsUvrs {
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub s: f64,
}

impl KrausParamsUvrs {
    pub fn new(u: f64, v: f64, r: f64, s: f64) -> Result<Self> {
        let p = Self { u, v, r, s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.u, self.v, self.r, self.s];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("uvrs", "non-finite entry"));
        }
        if all.iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateKraus);
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.r * self.r + self.s * self.s).sqrt()
    }

    /// Leading-order continuum identification, per unit step:
    /// `(sqrt(eps) a, eps omega0) = ((u - v) / (sqrt 2 delta), (r - s) / (sqrt 2 delta))`.
    ///
    /// Obtained by matching the diagonal and antisymmetric parts of `B+`
    /// against `(I + sqrt(eps) N - i eps H) / sqrt 2`.
    pub fn continuum_rates(&self) -> (f64, f64) {
        let d = self.delta() * std::f64::consts::SQRT_2;
        ((self.u - self.v) / d, (self.r - self.s) / d)
    }

    /// `a^2 / omega0` implied by [`Self::continuum_rates`].
    pub fn continuum_ratio(&self) -> f64 {
        let (sa, eo) = self.continuum_rates();
        sa * sa / eo
    }
}

/// Continuum model parameters: noise coupling `a` and rotation frequency `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub omega0: f64,
}

impl ModelParams {
    pub fn new(a: f64, omega0: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        if !omega0.is_finite() {
            return Err(invalid("omega0", "must be finite"));
        }
        Ok(Self { a, omega0 })
    }

    pub fn ratio(&self) -> f64 {
        self.a * self.a / self.omega0
    }

    /// Long-time diffusion constant `1 + 4 a^4 / omega0^2`.
    pub fn predicted_deff(&self) -> f64 {
        1.0 + 4.0 * self.a.powi(4) / (self.omega0 * self.omega0)
    }

    pub fn hamiltonian(&self) -> Complex2x2 {
        hamiltonian(self.omega0)
    }

    pub fn noise(&self) -> Complex2x2 {
        noise_operator(self.a)
    }
}

/// Scaling-form parameters: model parameters plus the step `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub a: f64,
    pub omega0: f64,
    pub epsilon: f64,
}

impl ScalingParams {
    pub fn new(a: f64, omega0: f64, epsilon: f64) -> Result<Self> {
        ModelParams::new(a, omega0)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", "must be positive and finite"));
        }
        Ok(Self { a, omega0, epsilon })
    }

    pub fn model(&self) -> ModelParams {
        ModelParams { a: self.a, omega0: self.omega0 }
    }
}

/// The pair `(B+, B-)` defining one walk step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausPair {
    b_plus: Complex2x2,
    b_minus: Complex2x2,
}

impl KrausPair {
    pub fn new(b_plus: Complex2x2, b_minus: Complex2x2) -> Result<Self> {
        if !b_plus.is_finite() || !b_minus.is_finite() {
            return Err(invalid("kraus", "non-finite entry"));
        }
        let pair = Self { b_plus, b_minus };
        let residual = pair.unitarity_residual();
        if residual > UNITARITY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Ok(pair)
    }

    /// `B+ = (u r; s v) / delta`, `B- = (-v s; r -u) / delta`.
    pub fn from_uvrs(p: &KrausParamsUvrs) -> Result<Self> {
        p.validate()?;
        let d = p.delta();
        let (u, v, r, s) = (p.u / d, p.v / d, p.r / d, p.s / d);
        Self::new(Complex2x2::real(u, r, s, v), Complex2x2::real(-v, s, r, -u))
    }

    /// Scaling form `B± = [I ± sqrt(eps) N + eps(-i H - N^dag N / 2)] / sqrt 2`,
    /// renormalized by `S^{-1/2}` with `S = B+^dag B+ + B-^dag B-`.
    pub fn from_scaling(p: &ScalingParams) -> Result<Self> {
        let (b_plus, b_minus) = Self::scaling_raw(p);
        let s = b_plus.adjoint() * b_plus + b_minus.adjoint() * b_minus;
        let inv_sqrt = s.hermitian_inv_sqrt().ok_or(Error::EpsilonTooLarge)?;
        Self::new(b_plus * inv_sqrt, b_minus * inv_sqrt).map_err(|_| Error::EpsilonTooLarge)
    }

    /// Scaling-form matrices before renormalization.
    pub fn scaling_raw(p: &ScalingParams) -> (Complex2x2, Complex2x2) {
        let n = noise_operator(p.a);
        let h = hamiltonian(p.omega0);
        let id = Complex2x2::identity();
        let second = (h.scale(-I) - (n.adjoint() * n).scale_re(0.5)).scale_re(p.epsilon);
        let first = n.scale_re(p.epsilon.sqrt());
        let k = std::f64::consts::FRAC_1_SQRT_2;
        ((id + first + second).scale_re(k), (id - first + second).scale_re(k))
    }

    pub fn b_plus(&self) -> &Complex2x2 {
        &self.b_plus
    }

    pub fn b_minus(&self) -> &Complex2x2 {
        &self.b_minus
    }

    pub fn is_real(&self) -> bool {
        self.b_plus.is_real() && self.b_minus.is_real()
    }

    /// `max |B+^dag B+ + B-^dag B- - I|`
    pub fn unitarity_residual(&self) -> f64 {
        let s = self.b_plus.adjoint() * self.b_plus + self.b_minus.adjoint() * self.b_minus;
        (s - Complex2x2::identity()).max_abs()
    }

    /// Real-linear map `rho -> B rho B^dag` acting on `(trace, q1, q2, q3)`.
    pub fn transfer_matrices(&self) -> [[[f64; 4]; 4]; 2] {
        let real = self.is_real();
        [transfer(&self.b_plus, real), transfer(&self.b_minus, real)]
    }
}

fn transfer(b: &Complex2x2, real: bool) -> [[f64; 4]; 4] {
    let bd = b.adjoint();
    let mut t = [[0.0; 4]; 4];
    for (nu, row) in t.iter_mut().enumerate() {
        for (mu, entry) in row.iter_mut().enumerate() {
            *entry = 0.5 * (Complex2x2::pauli(nu) * *b * Complex2x2::pauli(mu) * bd).trace().re;
        }
    }
    if real {
        // q2 decouples exactly for real Kraus operators
        for mu in [0, 1, 3] {
            t[2][mu] = 0.0;
            t[mu][2] = 0.0;
        }
    }
    t
}

/// Result of splitting a state across the two measurement outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSplit {
    pub p_plus: f64,
    pub p_minus: f64,
    /// `None` when the branch probability is below [`BRANCH_FLOOR`].
    pub rho_plus: Option<BlochState>,
    pub rho_minus: Option<BlochState>,
}

pub fn measurement_split(rho: &BlochState, k: &KrausPair) -> MeasurementSplit {
    let m = rho.to_matrix();
    let branch = |b: &Complex2x2| {
        let out = b.conjugate(&m);
        let p = out.trace().re;
        let state = (p >= BRANCH_FLOOR).then(|| BlochState::from_matrix(&out.scale_re(1.0 / p)));
        (p, state)
    };
    let (p_plus, rho_plus) = branch(&k.b_plus);
    let (p_minus, rho_minus) = branch(&k.b_minus);
    MeasurementSplit { p_plus, p_minus, rho_plus, rho_minus }
}

/// `-i[H, rho]`, `L_N(rho)`, `D_N(rho)` and `U_N(rho)` for one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladTerms {
    pub hamiltonian: Complex2x2,
    pub lindbladian: Complex2x2,
    pub backaction: Complex2x2,
    pub drift: f64,
}

impl LindbladTerms {
    /// Deterministic generator `-i[H, rho] + L_N(rho)`.
    pub fn generator(&self) -> Complex2x2 {
        self.hamiltonian + self.lindbladian
    }
}

pub fn lindblad_terms(rho: &BlochState, n_op: &Complex2x2, h_op: &Complex2x2) -> LindbladTerms {
    let m = rho.to_matrix();
    let nd = n_op.adjoint();
    let ndn = nd * *n_op;
    let lindbladian = n_op.conjugate(&m) - ndn.anticommutator(&m).scale_re(0.5);
    let sym = *n_op * m + m * nd;
    let drift = sym.trace().re;
    LindbladTerms {
        hamiltonian: h_op.commutator(&m).scale(-I),
        lindbladian,
        backaction: sym - m.scale_re(drift),
        drift,
    }
}
