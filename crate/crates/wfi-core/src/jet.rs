//! Truncated bivariate Taylor arithmetic ("jets"): all mixed partial
//! derivatives of a composed map up to total order 4 in one forward pass,
//! plus the exact reverse pass through that propagation.
//!
//! A truncated power series in the two spatial variables,
//! `p(ξ) = Σ_{|e| ≤ n} c_e ξ₁^{e1} ξ₂^{e2}`, is stored as a flat coefficient
//! array in graded-lexicographic order (degree 0, 1, …; `e2` ascending
//! inside a degree). Affine maps act coefficient-wise; scalar analytic
//! functions g (tanh, softplus) are applied by composing with their Taylor
//! series at the constant term: with `s = p − p₀`,
//! `g(p) = Σ_k a_k s^k`, `a_k = g^{(k)}(p₀)/k!`, evaluated by Horner with
//! truncated multiplications. The series coefficients come from ODE
//! recurrences (`tanh' = 1 − tanh²`, `softplus' = logistic`), so any order
//! is exact to rounding.
//!
//! The reverse pass records the Horner intermediates and uses the adjoint of
//! truncated multiplication (`∂(a·b)_e/∂a_f = b_{e−f}`, a truncated
//! correlation); the constant channel additionally receives
//! `Σ_k ā_k (k+1) a_{k+1}` because the series coefficients themselves move
//! with `p₀` — which is why series are generated to order n+1.
//!
//! Derivative *values* relate to coefficients by `∂^e y = e1!·e2!·c_e`.

use crate::error::{Error, Result};
use crate::signal::MultiIndex;

/// Highest supported total derivative order (the flexural operator needs 4).
pub const MAX_ORDER: usize = 4;

/// Coefficient count for total order ≤ `order` in two variables.
pub const fn coeff_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Largest coefficient block (order 4 → 15).
pub(crate) const NC_MAX: usize = coeff_count(MAX_ORDER);

/// Flat position of `(e1, e2)`: degrees first, `e2` ascending within one.
pub const fn coeff_index(e1: usize, e2: usize) -> usize {
    let d = e1 + e2;
    d * (d + 1) / 2 + e2
}

/// `e1!·e2!` for converting coefficients to derivative values.
pub(crate) fn factorial_product(e1: u8, e2: u8) -> f64 {
    const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
    FACT[e1 as usize] * FACT[e2 as usize]
}

/// Truncated power series in (ξ₁, ξ₂) of total order ≤ `order`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tps {
    order: usize,
    c: [f64; NC_MAX],
}

impl Tps {
    pub fn zero(order: usize) -> Self {
        debug_assert!(order <= MAX_ORDER);
        Tps {
            order,
            c: [0.0; NC_MAX],
        }
    }

    pub fn constant(order: usize, v: f64) -> Self {
        let mut t = Tps::zero(order);
        t.c[0] = v;
        t
    }

    /// `value + ξ_axis` — the seed for a differentiation variable.
    pub fn variable(order: usize, axis: usize, value: f64) -> Self {
        let mut t = Tps::constant(order, value);
        if order >= 1 {
            t.c[if axis == 0 {
                coeff_index(1, 0)
            } else {
                coeff_index(0, 1)
            }] = 1.0;
        }
        t
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        coeff_count(self.order)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len()]
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        let n = self.len();
        &mut self.c[..n]
    }

    pub fn axpy(&mut self, a: f64, other: &Tps) {
        debug_assert_eq!(self.order, other.order);
        for (s, o) in self.coeffs_mut().iter_mut().zip(other.coeffs()) {
            *s += a * o;
        }
    }

    /// Truncated product, `c_e = Σ_{f+g=e} a_f b_g`.
    pub fn mul(&self, other: &Tps) -> Tps {
        debug_assert_eq!(self.order, other.order);
        let n = self.order;
        let mut out = Tps::zero(n);
        for da in 0..=n {
            let base_a = da * (da + 1) / 2;
            for db in 0..=n - da {
                let base_b = db * (db + 1) / 2;
                let base_o = (da + db) * (da + db + 1) / 2;
                for ea in 0..=da {
                    let va = self.c[base_a + ea];
                    if va == 0.0 {
                        continue;
                    }
                    for eb in 0..=db {
                        out.c[base_o + ea + eb] += va * other.c[base_b + eb];
                    }
                }
            }
        }
        out
    }

    /// Adjoint of `mul` in its first argument: given `c̄` and the other
    /// factor `b`, accumulates `ā_f += Σ_g c̄_{f+g}·b_g` into `self`.
    pub fn corr_accumulate(&mut self, cbar: &Tps, b: &Tps) {
        let n = self.order;
        for df in 0..=n {
            let base_f = df * (df + 1) / 2;
            for dg in 0..=n - df {
                let base_g = dg * (dg + 1) / 2;
                let base_c = (df + dg) * (df + dg + 1) / 2;
                for ef in 0..=df {
                    let mut acc = 0.0;
                    for eg in 0..=dg {
                        acc += cbar.c[base_c + ef + eg] * b.c[base_g + eg];
                    }
                    self.c[base_f + ef] += acc;
                }
            }
        }
    }
}

/// Taylor coefficients `a_k = tanh^{(k)}(z)/k!` for `k = 0..=n`, from the
/// recurrence `y' = 1 − y²`.
pub(crate) fn tanh_series(z: f64, n: usize, out: &mut [f64]) {
    out[0] = z.tanh();
    for k in 0..n {
        // coeff of s^k in 1 − y(s)²
        let mut conv = 0.0;
        for i in 0..=k {
            conv += out[i] * out[k - i];
        }
        let rhs = if k == 0 { 1.0 - conv } else { -conv };
        out[k + 1] = rhs / (k + 1) as f64;
    }
}

/// Taylor coefficients of softplus `ln(1 + e^z)`; its derivative is the
/// logistic σ, generated alongside via `σ' = σ(1 − σ)`.
pub(crate) fn softplus_series(z: f64, n: usize, out: &mut [f64]) {
    let mut sig = [0.0f64; MAX_ORDER + 2];
    sig[0] = 1.0 / (1.0 + (-z).exp());
    for k in 0..n {
        let mut conv = 0.0;
        for i in 0..=k {
            conv += sig[i] * sig[k - i];
        }
        sig[k + 1] = (sig[k] - conv) / (k + 1) as f64;
    }
    // Overflow-safe value; strictly positive for all finite z.
    out[0] = z.max(0.0) + (-z.abs()).exp().ln_1p();
    for k in 0..n {
        out[k + 1] = sig[k] / (k + 1) as f64;
    }
}

/// One scalar-function application site recorded for the reverse pass.
#[derive(Debug, Clone)]
pub(crate) struct ComposeTape {
    /// Input series with the constant channel zeroed (the Horner argument).
    pub s: Tps,
    /// Series coefficients a_0..a_{n+1} at the input's constant term.
    pub series: [f64; MAX_ORDER + 2],
    /// Horner intermediates r^{(n)}, …, r^{(1)} (r^{(0)} is the output).
    pub intermediates: Vec<Tps>,
}

/// Compose a scalar series onto a Tps by Horner's rule. `series` must hold
/// coefficients `a_0..=a_{n+1}` at `p₀ = p.c[0]`; when `tape` is supplied
/// the intermediates needed by [`compose_reverse`] are recorded.
pub(crate) fn compose(p: &Tps, series: &[f64; MAX_ORDER + 2], tape: Option<&mut ComposeTape>) -> Tps {
    let n = p.order();
    let mut s = *p;
    s.coeffs_mut()[0] = 0.0;
    let mut r = Tps::constant(n, series[n]);
    let mut intermediates = Vec::new();
    let record = tape.is_some();
    for k in (0..n).rev() {
        if record {
            intermediates.push(r);
        }
        r = r.mul(&s);
        r.coeffs_mut()[0] += series[k];
    }
    if let Some(t) = tape {
        t.s = s;
        t.series = *series;
        t.intermediates = intermediates;
    }
    r
}

/// Reverse through [`compose`]: given `ȳ`, returns `p̄` (gradient with
/// respect to every input coefficient, including the constant channel's
/// series-motion term).
pub(crate) fn compose_reverse(tape: &ComposeTape, ybar: &Tps) -> Tps {
    let n = ybar.order();
    let mut sbar = Tps::zero(n);
    let mut rbar = *ybar;
    let mut series_bar = [0.0f64; MAX_ORDER + 2];
    // Unwind r^{(k)} = r^{(k+1)}·s + a_k for k = 0, 1, …, n−1.
    for (k, r_next) in (0..n).zip(tape.intermediates.iter().rev()) {
        series_bar[k] += rbar.coeffs()[0];
        sbar.corr_accumulate(&rbar, r_next);
        let mut next = Tps::zero(n);
        next.corr_accumulate(&rbar, &tape.s);
        rbar = next;
    }
    series_bar[n] += rbar.coeffs()[0];

    let mut pbar = sbar;
    // s = p − p₀·1 carries no constant-channel sensitivity; p₀ instead moves
    // every series coefficient: da_k/dp₀ = (k+1)·a_{k+1}.
    pbar.coeffs_mut()[0] = 0.0;
    for k in 0..=n {
        pbar.coeffs_mut()[0] += series_bar[k] * (k + 1) as f64 * tape.series[k + 1];
    }
    pbar
}

/// All partial-derivative values of a (multi-output) map at one point, up to
/// a total order ≤ 4 in the first two inputs.
#[derive(Debug, Clone)]
pub struct Jet {
    order: u8,
    point: [f64; 2],
    /// Per output component: derivative values indexed by [`coeff_index`].
    values: Vec<[f64; NC_MAX]>,
}

impl Jet {
    pub(crate) fn from_tps(order: u8, point: [f64; 2], outputs: &[Tps]) -> Self {
        let values = outputs
            .iter()
            .map(|t| {
                let mut v = [0.0; NC_MAX];
                for e1 in 0..=order {
                    for e2 in 0..=(order - e1) {
                        let idx = coeff_index(e1 as usize, e2 as usize);
                        v[idx] = t.coeffs()[idx] * factorial_product(e1, e2);
                    }
                }
                v
            })
            .collect();
        Jet {
            order,
            point,
            values,
        }
    }

    /// Build a jet directly from derivative values, one `[f64; NC_MAX]` per
    /// output component indexed by [`coeff_index`].
    pub(crate) fn from_values(order: u8, point: [f64; 2], values: Vec<[f64; NC_MAX]>) -> Self {
        debug_assert!(order as usize <= MAX_ORDER);
        Jet {
            order,
            point,
            values,
        }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Base point (first two input coordinates).
    pub fn point(&self) -> [f64; 2] {
        self.point
    }

    pub fn output_count(&self) -> usize {
        self.values.len()
    }

    /// Derivative value `∂^{|e|} y_out / ∂ξ₁^{e1} ∂ξ₂^{e2}`.
    pub fn get(&self, output: usize, e: MultiIndex) -> Result<f64> {
        if e.order() > self.order {
            return Err(Error::arg(format!(
                "jet holds orders ≤ {}, requested {e}",
                self.order
            )));
        }
        Ok(self.values[output][coeff_index(e.e1() as usize, e.e2() as usize)])
    }

    /// The function value itself (entry e = (0,0)).
    pub fn value(&self, output: usize) -> f64 {
        self.values[output][0]
    }
}
