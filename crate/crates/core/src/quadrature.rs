//! Adaptive Gauss-Kronrod and Clenshaw-Curtis building blocks used by the
//! coupling integrals.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Result of an adaptive integration of an `N`-component integrand.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    /// Absolute error estimate, summed over components.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl<const N: usize> Integral<N> {
    /// Sum of absolute component values, the scale used by the stopping rule.
    pub fn magnitude(&self) -> f64 {
        self.value.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

/// One G7-K15 panel. The integrand returns its value together with an
/// absolute error already present in that value (zero for closed forms),
/// which is propagated with the Kronrod weights.
fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Panel<N>
where
    F: FnMut(f64) -> ([f64; N], f64),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let mut inner = 0.0;

    let (fc, ec) = f(c);
    for i in 0..N {
        kron[i] = WGK[7] * fc[i];
        gauss[i] = WG[3] * fc[i];
    }
    inner += WGK[7] * ec;

    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, e1) = f(c - dx);
        let (f2, e2) = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
        inner += WGK[j] * (e1 + e2);
    }

    let mut value = [0.0; N];
    let mut error = 0.0;
    for i in 0..N {
        value[i] = kron[i] * h;
        error += ((kron[i] - gauss[i]) * h).abs();
    }
    Panel { a, b, value, error: error + inner * h.abs() }
}

/// Adaptive G7-K15 on `[a, b]`, bisecting the panel with the largest error
/// until the summed error drops below `max(abs_tol, rel_tol * |I|)`.
/// Refinement is deterministic. Stops unconverged after `max_panels`.
pub fn integrate_adaptive<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Integral<N>
where
    F: FnMut(f64) -> ([f64; N], f64),
{
    let mut panels = vec![gk15(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let mut value = [0.0; N];
        let mut error = 0.0;
        for p in &panels {
            for (v, pv) in value.iter_mut().zip(p.value) {
                *v += pv;
            }
            error += p.error;
        }
        let magnitude: f64 = value.iter().map(|v| v.abs()).sum();
        let converged = error <= abs_tol.max(rel_tol * magnitude);
        if converged || panels.len() >= max_panels {
            return Integral { value, error, evaluations, converged };
        }
        let worst =
            panels.iter().enumerate().fold(0, |best, (i, p)| if p.error > panels[best].error { i } else { best });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // panel below floating-point resolution
            return Integral { value, error, evaluations, converged: false };
        }
        panels.push(gk15(&mut f, p.a, mid));
        panels.push(gk15(&mut f, mid, p.b));
        evaluations += 30;
    }
}

/// Scalar convenience wrapper around [`integrate_adaptive`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Integral<1> {
    integrate_adaptive(|x| ([f(x)], 0.0), a, b, rel_tol, 0.0, 4096)
}

/// Chebyshev-Lobatto points `cos(jπ/n)`, `j = 0..=n`, mapped to `[a, b]`.
pub fn lobatto_nodes(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let t = (j as f64 * PI / n as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect()
}

/// Clenshaw-Curtis weights on `[a, b]` for [`lobatto_nodes`] with even `n`.
pub fn clenshaw_curtis_weights(n: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "Clenshaw-Curtis needs an even, positive order");
    let nf = n as f64;
    let half = 0.5 * (b - a);
    (0..=n)
        .map(|j| {
            let theta = j as f64 * PI / nf;
            let mut s = 0.0;
            for k in 0..=n / 2 {
                let bk = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                s += bk / (1.0 - 4.0 * (k * k) as f64) * (2.0 * k as f64 * theta).cos();
            }
            let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
            half * cj * s / nf
        })
        .collect()
}

/// Barycentric interpolant through values at [`lobatto_nodes`].
#[derive(Debug, Clone)]
pub struct ChebyshevInterpolant<const N: usize> {
    nodes: Vec<f64>,
    values: Vec<[f64; N]>,
    weights: Vec<f64>,
}

impl<const N: usize> ChebyshevInterpolant<N> {
    pub fn new(nodes: Vec<f64>, values: Vec<[f64; N]>) -> Self {
        assert_eq!(nodes.len(), values.len());
        let n = nodes.len() - 1;
        let weights = (0..=n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Self { nodes, values, weights }
    }

    pub fn eval(&self, x: f64) -> [f64; N] {
        let mut num = [0.0; N];
        let mut den = 0.0;
        for ((&xj, fj), &wj) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = x - xj;
            if d == 0.0 {
                return *fj;
            }
            let c = wj / d;
            for i in 0..N {
                num[i] += c * fj[i];
            }
            den += c;
        }
        num.map(|v| v / den)
    }
}
