use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::{dot, CsrMatrix};
use crate::{Error, Result};

/// `½ xᵀQx + cᵀx + c0` with `Q` stored symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFunction {
    q: CsrMatrix,
    pub c: Vec<f64>,
    pub c0: f64,
}

impl QuadraticFunction {
    /// Asymmetric `Q` is replaced by its symmetric part `(Q+Qᵀ)/2`.
    pub fn new(q: CsrMatrix, c: Vec<f64>, c0: f64) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "quadratic with Q {}x{} and c of length {}",
                q.nrows(),
                q.ncols(),
                c.len()
            )));
        }
        let q = if q.is_symmetric() { q } else { q.symmetrized() };
        Ok(Self { q, c, c0 })
    }

    /// Affine function `cᵀx + c0`.
    pub fn affine(c: Vec<f64>, c0: f64) -> Self {
        let n = c.len();
        Self {
            q: CsrMatrix::zeros(n, n),
            c,
            c0,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &CsrMatrix {
        &self.q
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let qx = self.q.mul_vec(x);
        0.5 * dot(x, &qx) + dot(&self.c, x) + self.c0
    }

    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&self.c);
        self.q.mul_vec_acc(x, g);
    }

    /// Same function of a longer vector whose trailing coordinates it ignores.
    pub fn padded(&self, n: usize) -> Self {
        let mut c = self.c.clone();
        c.resize(n, 0.0);
        Self {
            q: self.q.padded(n, n),
            c,
            c0: self.c0,
        }
    }
}

/// Which half of the complex power balance a [`PowerBalance`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalancePart {
    Real,
    Imag,
}

/// Nodal power balance of bus `i` in polar voltage coordinates:
///
/// ```text
/// Σ_{g ∈ G_i} s_g − load − c_i(V, ϑ) = 0
/// ```
///
/// where `c_i` is the real (`acopf_re`) or imaginary (`acopf_im`) part of the
/// bus injection computed from row `i` of the admittance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBalance {
    pub part: BalancePart,
    pub bus: usize,
    /// Block position of `V_0`; bus `j` lives at `v_offset + j`.
    pub v_offset: usize,
    /// Block position of `ϑ_0`.
    pub theta_offset: usize,
    /// Block positions of the generator outputs injected at this bus.
    pub injections: Vec<usize>,
    pub load: f64,
    /// Row `i` of `Y` as `(column, re, im)`, diagonal included.
    pub admittance: Vec<(usize, f64, f64)>,
    pub neighbors: Vec<usize>,
}

/// Polar bus injection `c_i^{re}`, `c_i^{im}` and their partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BusInjection {
    pub re: f64,
    pub im: f64,
    /// `(bus, ∂c/∂V_bus, ∂c/∂ϑ_bus)` for the real part.
    pub grad_re: Vec<(usize, f64, f64)>,
    pub grad_im: Vec<(usize, f64, f64)>,
}

/// Evaluates the polar injection at bus `i` given `Y_ii` and the
/// `(j, Y_ij)` pairs of its neighbors.
pub fn polar_injection(
    i: usize,
    y_ii: (f64, f64),
    neighbors: &[(usize, f64, f64)],
    v: &dyn Fn(usize) -> f64,
    theta: &dyn Fn(usize) -> f64,
) -> BusInjection {
    let (g_ii, b_ii) = y_ii;
    let vi = v(i);
    let ti = theta(i);
    let mut re = g_ii * vi * vi;
    let mut im = -b_ii * vi * vi;
    let mut dre_dvi = 2.0 * g_ii * vi;
    let mut dim_dvi = -2.0 * b_ii * vi;
    let mut dre_dti = 0.0;
    let mut dim_dti = 0.0;
    let mut grad_re = Vec::with_capacity(neighbors.len() + 1);
    let mut grad_im = Vec::with_capacity(neighbors.len() + 1);
    for &(j, g, b) in neighbors {
        let vj = v(j);
        let d = ti - theta(j);
        let (s, c) = (libm::sin(d), libm::cos(d));
        let p = g * c + b * s;
        let q = g * s - b * c;
        re += vi * vj * p;
        im += vi * vj * q;
        dre_dvi += vj * p;
        dim_dvi += vj * q;
        // ∂p/∂ϑ_i = −q and ∂q/∂ϑ_i = p; ϑ_j enters with the opposite sign
        dre_dti -= vi * vj * q;
        dim_dti += vi * vj * p;
        grad_re.push((j, vi * p, vi * vj * q));
        grad_im.push((j, vi * q, -vi * vj * p));
    }
    grad_re.push((i, dre_dvi, dre_dti));
    grad_im.push((i, dim_dvi, dim_dti));
    BusInjection {
        re,
        im,
        grad_re,
        grad_im,
    }
}

impl PowerBalance {
    fn y_ii(&self) -> (f64, f64) {
        self.admittance
            .iter()
            .find(|(j, _, _)| *j == self.bus)
            .map(|&(_, re, im)| (re, im))
            .unwrap_or((0.0, 0.0))
    }

    fn neighbor_entries(&self) -> Vec<(usize, f64, f64)> {
        self.neighbors
            .iter()
            .map(|&j| {
                self.admittance
                    .iter()
                    .find(|(c, _, _)| *c == j)
                    .copied()
                    .unwrap_or((j, 0.0, 0.0))
            })
            .collect()
    }

    /// Smallest block dimension this constraint can index into.
    pub fn min_dim(&self) -> usize {
        let max_bus = self
            .neighbors
            .iter()
            .copied()
            .chain(core::iter::once(self.bus))
            .max()
            .unwrap_or(0);
        let inj = self.injections.iter().map(|&k| k + 1).max().unwrap_or(0);
        (self.v_offset + max_bus + 1).max(self.theta_offset + max_bus + 1).max(inj)
    }

    fn injection(&self, x: &[f64]) -> BusInjection {
        let v = |j: usize| x[self.v_offset + j];
        let th = |j: usize| x[self.theta_offset + j];
        polar_injection(self.bus, self.y_ii(), &self.neighbor_entries(), &v, &th)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let inj = self.injection(x);
        let c = match self.part {
            BalancePart::Real => inj.re,
            BalancePart::Imag => inj.im,
        };
        let gen: f64 = self.injections.iter().map(|&k| x[k]).sum();
        gen - self.load - c
    }

    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        for &k in &self.injections {
            g[k] += 1.0;
        }
        let inj = self.injection(x);
        let grads = match self.part {
            BalancePart::Real => inj.grad_re,
            BalancePart::Imag => inj.grad_im,
        };
        for (j, dv, dt) in grads {
            g[self.v_offset + j] -= dv;
            g[self.theta_offset + j] -= dt;
        }
    }
}

/// Named built-in smooth functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    PowerBalance(PowerBalance),
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::PowerBalance(pb) => match pb.part {
                BalancePart::Real => "acopf_re",
                BalancePart::Imag => "acopf_im",
            },
        }
    }
}

/// A `C²` scalar function of one block's variables.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothFunction {
    Quadratic(QuadraticFunction),
    Builtin(Builtin),
}

impl SmoothFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFunction::Quadratic(q) => q.value(x),
            SmoothFunction::Builtin(Builtin::PowerBalance(pb)) => pb.value(x),
        }
    }

    /// Writes `∇f(x)` into `g` (which must have the block dimension).
    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        match self {
            SmoothFunction::Quadratic(q) => q.gradient_into(x, g),
            SmoothFunction::Builtin(Builtin::PowerBalance(pb)) => pb.gradient_into(x, g),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticFunction> {
        match self {
            SmoothFunction::Quadratic(q) => Some(q),
            SmoothFunction::Builtin(_) => None,
        }
    }

    /// Checks that the function can be evaluated on vectors of length `n`.
    pub fn check_dim(&self, n: usize) -> core::result::Result<(), String> {
        match self {
            SmoothFunction::Quadratic(q) if q.dim() != n => {
                Err(format!("quadratic of dimension {} in a block of dimension {n}", q.dim()))
            }
            SmoothFunction::Builtin(Builtin::PowerBalance(pb)) if pb.min_dim() > n => Err(format!(
                "builtin {} indexes coordinate {} in a block of dimension {n}",
                Builtin::PowerBalance(pb.clone()).name(),
                pb.min_dim() - 1
            )),
            _ => Ok(()),
        }
    }

    /// Same function viewed on a block padded with trailing coordinates.
    pub fn padded(&self, n: usize) -> Self {
        match self {
            SmoothFunction::Quadratic(q) => SmoothFunction::Quadratic(q.padded(n)),
            other => other.clone(),
        }
    }
}
