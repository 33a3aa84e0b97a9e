//! The size-dependent Gaussian interaction kernel
//!
//! ```text
//! K(r, s, x) = γ(r) γ(s) / (2π (r² + s²)) · exp(-|x|² / (2 (r² + s²)))
//! ```
//!
//! together with its gradient, its spatial integral `Γ(r, s) = γ(r) γ(s)`, the
//! ε-rescaled family `K_ε(r, s, x) = ε⁻² K(r, s, x / ε)`, and the discrete
//! interaction potentials `ξ` used by the finite-volume drivers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::domain::{DensityField, Grid3, SimConfig};
use crate::error::KernelError;

/// Amplitude profile `γ(r)` of the kernel.
#[derive(Clone, Copy, Debug)]
pub enum Amplitude {
    /// `γ(r) = r`.
    Linear,
    /// `γ ≡ 0`: no interaction at all.
    Zero,
    Custom(fn(f64) -> f64),
}

impl PartialEq for Amplitude {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Amplitude::Linear, Amplitude::Linear) | (Amplitude::Zero, Amplitude::Zero) => true,
            (Amplitude::Custom(a), Amplitude::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub amplitude: Amplitude,
    pub dim: usize,
    pub eps: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { amplitude: Amplitude::Linear, dim: 2, eps: 1.0 }
    }
}

impl KernelSpec {
    pub fn new(amplitude: Amplitude, eps: f64) -> Result<Self, KernelError> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(KernelError::BadEps(eps));
        }
        Ok(Self { amplitude, dim: 2, eps })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self, KernelError> {
        Self::new(Amplitude::Linear, config.eps)
    }

    pub fn with_amplitude(self, amplitude: Amplitude) -> Self {
        Self { amplitude, ..self }
    }

    #[inline]
    pub fn gamma(&self, r: f64) -> f64 {
        match self.amplitude {
            Amplitude::Linear => r,
            Amplitude::Zero => 0.0,
            Amplitude::Custom(f) => f(r),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == Amplitude::Zero
    }

    /// Pointwise kernel value at separation `x`.
    pub fn eval(&self, r: f64, s: f64, x: [f64; 2]) -> Result<f64, KernelError> {
        let var = r * r + s * s;
        if var <= 0.0 {
            return Err(KernelError::ZeroVariance);
        }
        Ok(self.eval_var(r, s, var, x[0] * x[0] + x[1] * x[1]))
    }

    #[inline]
    fn eval_var(&self, r: f64, s: f64, var: f64, dist2: f64) -> f64 {
        self.gamma(r) * self.gamma(s) / (2.0 * PI * var) * (-dist2 / (2.0 * var)).exp()
    }

    /// `∇ₓ K(r, s, x) = -x / (r² + s²) · K(r, s, x)`.
    pub fn grad(&self, r: f64, s: f64, x: [f64; 2]) -> Result<[f64; 2], KernelError> {
        let var = r * r + s * s;
        if var <= 0.0 {
            return Err(KernelError::ZeroVariance);
        }
        let k = self.eval_var(r, s, var, x[0] * x[0] + x[1] * x[1]);
        Ok([-x[0] / var * k, -x[1] / var * k])
    }

    /// `Γ(r, s) = ∫ K(r, s, x) dx`; the Gaussian factor has unit mass.
    #[inline]
    pub fn gamma_big(&self, r: f64, s: f64) -> f64 {
        self.gamma(r) * self.gamma(s)
    }

    /// `K_ε(r, s, x) = ε⁻² K(r, s, x / ε)`.
    pub fn eval_eps(&self, r: f64, s: f64, x: [f64; 2]) -> Result<f64, KernelError> {
        if !(self.eps > 0.0) {
            return Err(KernelError::BadEps(self.eps));
        }
        let e = self.eps;
        Ok(self.eval(r, s, [x[0] / e, x[1] / e])? / (e * e))
    }

    /// Standard deviation of the Gaussian factor of `K_ε(r, s, ·)`.
    #[inline]
    pub fn sigma_eps(&self, r: f64, s: f64) -> f64 {
        self.eps * (r * r + s * s).sqrt()
    }
}

/// How a stencil weight represents the kernel over one grid cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StencilQuadrature {
    /// Exact integral of `K_ε` over the offset cell.
    #[default]
    CellAverage,
    /// `K_ε` sampled at the offset cell center times `dx·dy`.
    Midpoint,
}

/// Truncated, separable weights for one radius pair `(k, ℓ)`.
///
/// The weight at offset `(p, q)` is `amplitude · taps[p + half] · taps[q + half]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStencil {
    pub amplitude: f64,
    pub half: usize,
    pub taps: Vec<f64>,
    pub truncation: f64,
}

impl PairStencil {
    #[inline]
    pub fn weight(&self, p: isize, q: isize) -> f64 {
        let h = self.half as isize;
        if p.abs() > h || q.abs() > h {
            return 0.0;
        }
        self.amplitude * self.taps[(p + h) as usize] * self.taps[(q + h) as usize]
    }

    pub fn weight_sum(&self) -> f64 {
        let s: f64 = self.taps.iter().sum();
        self.amplitude * s * s
    }

    pub fn center_weight(&self) -> f64 {
        self.weight(0, 0)
    }
}

/// Sampled kernel weights for every radius pair of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionStencil {
    pub grid: Grid3,
    pairs: Vec<PairStencil>,
}

impl ConvolutionStencil {
    #[inline]
    pub fn pair(&self, k: usize, l: usize) -> &PairStencil {
        &self.pairs[k * self.grid.nr + l]
    }

    #[inline]
    pub fn weight(&self, k: usize, l: usize, p: isize, q: isize) -> f64 {
        self.pair(k, l).weight(p, q)
    }
}

/// `Φ(b) - Φ(a)` for the standard normal CDF, accurate in both tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * (libm::erfc(-a * FRAC_1_SQRT_2) + libm::erfc(b * FRAC_1_SQRT_2))
    }
}

/// Builds the cell-averaged stencil of `K_ε` on `grid`.
pub fn build_stencil(grid: &Grid3, spec: &KernelSpec) -> ConvolutionStencil {
    build_stencil_with(grid, spec, StencilQuadrature::CellAverage)
}

/// Builds the stencil of `K_ε` on `grid`, truncated to the box `|p·dx|, |q·dy| ≤ 5σ·max(ε, 1)`
/// where `σ² = r_k² + r_ℓ²`.
pub fn build_stencil_with(grid: &Grid3, spec: &KernelSpec, quadrature: StencilQuadrature) -> ConvolutionStencil {
    let nr = grid.nr;
    let h = grid.dx;
    let mut pairs = Vec::with_capacity(nr * nr);
    let mut degenerate = 0usize;
    for k in 0..nr {
        for l in 0..nr {
            let (rk, rl) = (grid.r(k), grid.r(l));
            let base = (rk * rk + rl * rl).sqrt();
            let sigma = spec.eps * base;
            let truncation = 5.0 * base * spec.eps.max(1.0);
            if truncation < 0.5 * h {
                degenerate += 1;
            }
            let half = (truncation / h - 0.5).ceil().max(0.0) as usize;
            let taps = (-(half as isize)..=half as isize)
                .map(|p| {
                    let c = p as f64 * h;
                    match quadrature {
                        StencilQuadrature::CellAverage => normal_mass((c - 0.5 * h) / sigma, (c + 0.5 * h) / sigma),
                        StencilQuadrature::Midpoint => {
                            h / (sigma * (2.0 * PI).sqrt()) * (-(c * c) / (2.0 * sigma * sigma)).exp()
                        }
                    }
                })
                .collect();
            pairs.push(PairStencil { amplitude: spec.gamma_big(rk, rl), half, taps, truncation });
        }
    }
    if degenerate > 0 {
        log::warn!(
            "{degenerate} radius pairs have a truncation radius below one cell; their stencils are a single cell"
        );
    }
    ConvolutionStencil { grid: grid.clone(), pairs }
}

/// Nonlocal potential `ξ_{i,j,k} = dr Σ_ℓ Σ_{p,q} w_{k,ℓ,p,q} ū_{i-p,j-q,ℓ}`,
/// evaluated as separable row/column passes. Out-of-domain cells count as zero.
pub fn xi_meso(field: &DensityField, stencil: &ConvolutionStencil) -> Result<Vec<f64>, KernelError> {
    let g = &field.grid;
    if *g != stencil.grid {
        return Err(KernelError::GridMismatch);
    }
    let (nx, ny, nr) = (g.nx, g.ny, g.nr);
    let n2 = nx * ny;
    let mut xi = vec![0.0; g.len()];
    let occupied: Vec<bool> = (0..nr).map(|l| field.slice(l).iter().any(|&v| v != 0.0)).collect();
    let mut rows = vec![0.0; n2];
    for (l, _) in occupied.iter().enumerate().filter(|(_, &o)| o) {
        let src = field.slice(l);
        for k in 0..nr {
            let pair = stencil.pair(k, l);
            if pair.amplitude == 0.0 {
                continue;
            }
            let h = pair.half as isize;
            let taps = &pair.taps;
            // rows: convolve along x
            for j in 0..ny {
                let line = &src[j * nx..(j + 1) * nx];
                let out = &mut rows[j * nx..(j + 1) * nx];
                for (i, o) in out.iter_mut().enumerate() {
                    let lo = (i as isize - h).max(0) as usize;
                    let hi = ((i as isize + h) as usize).min(nx - 1);
                    let mut acc = 0.0;
                    for (m, &u) in line[lo..=hi].iter().enumerate() {
                        // offset p = i - (lo + m), tap index p + h
                        acc += taps[(i as isize - (lo + m) as isize + h) as usize] * u;
                    }
                    *o = acc;
                }
            }
            // columns: convolve along y and accumulate into slice k
            let dst = &mut xi[k * n2..(k + 1) * n2];
            for j in 0..ny {
                let lo = (j as isize - h).max(0) as usize;
                let hi = ((j as isize + h) as usize).min(ny - 1);
                let out = &mut dst[j * nx..(j + 1) * nx];
                for jj in lo..=hi {
                    let w = pair.amplitude * taps[(j as isize - jj as isize + h) as usize];
                    let row = &rows[jj * nx..(jj + 1) * nx];
                    for (o, &t) in out.iter_mut().zip(row) {
                        *o += w * t;
                    }
                }
            }
        }
    }
    let dr = g.dr;
    xi.iter_mut().for_each(|v| *v *= dr);
    Ok(xi)
}

/// Reference direct summation of [`xi_meso`], cell by cell. `O(cells · stencil)`;
/// intended for checking the separable path on small grids.
pub fn xi_meso_direct(field: &DensityField, stencil: &ConvolutionStencil) -> Result<Vec<f64>, KernelError> {
    let g = &field.grid;
    if *g != stencil.grid {
        return Err(KernelError::GridMismatch);
    }
    let mut xi = vec![0.0; g.len()];
    for k in 0..g.nr {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut acc = 0.0;
                for l in 0..g.nr {
                    let pair = stencil.pair(k, l);
                    let h = pair.half as isize;
                    for q in -h..=h {
                        let jj = j as isize - q;
                        if jj < 0 || jj >= g.ny as isize {
                            continue;
                        }
                        for p in -h..=h {
                            let ii = i as isize - p;
                            if ii < 0 || ii >= g.nx as isize {
                                continue;
                            }
                            acc += pair.weight(p, q) * field.at(ii as usize, jj as usize, l);
                        }
                    }
                }
                xi[g.index(i, j, k)] = g.dr * acc;
            }
        }
    }
    Ok(xi)
}

/// Local potential `ξ_{i,j,k} = dr Σ_ℓ Γ(r_k, r_ℓ) ū_{i,j,ℓ}`.
pub fn xi_macro(field: &DensityField, spec: &KernelSpec) -> Vec<f64> {
    let g = &field.grid;
    let n2 = g.slice_len();
    let mut xi = vec![0.0; g.len()];
    for k in 0..g.nr {
        for l in 0..g.nr {
            let w = g.dr * spec.gamma_big(g.r(k), g.r(l));
            if w == 0.0 {
                continue;
            }
            let src = field.slice(l);
            let dst = &mut xi[k * n2..(k + 1) * n2];
            for (d, &u) in dst.iter_mut().zip(src) {
                *d += w * u;
            }
        }
    }
    xi
}
