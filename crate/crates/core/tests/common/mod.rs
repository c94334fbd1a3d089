//! Oracles shared by the integration tests.
#![allow(dead_code)]

use splitop::operators::DiscreteHamiltonian;
use splitop::spectral::{Representation, Wavefunction};
use splitop::Complex64 as C;

/// `J_0(x) … J_n(x)` by Miller's backward recurrence, normalised with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    assert!(x > 0.0);
    let start = n.max(x as usize) + 60 + (4.0 * x.cbrt() * 10.0) as usize;
    let mut f = vec![0.0f64; start + 2];
    f[start] = 1e-300;
    for k in (1..=start).rev() {
        f[k - 1] = 2.0 * k as f64 / x * f[k] - f[k + 1];
        if f[k - 1].abs() > 1e250 {
            for v in f[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = f[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * f[k];
    }
    f.truncate(n + 1);
    f.iter().map(|v| v / norm).collect()
}

/// Chebyshev–Bessel expansion of `e^{-itH}ψ` on the interval given by the
/// Hamiltonian's spectral bounds.
pub fn chebyshev_propagate(h: &DiscreteHamiltonian, t: f64, psi: &Wavefunction) -> Wavefunction {
    let (lo, hi) = h.spectral_bounds();
    let a = 0.5 * (hi - lo) * 1.01;
    let b = 0.5 * (hi + lo);
    let x = (t * a).abs();
    let terms = (x + 40.0 + 10.0 * x.cbrt()) as usize;
    let j = bessel_j_sequence(x, terms);
    let n = h.grid().len();
    let apply = |v: &[C], out: &mut [C]| {
        h.apply_slice(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = (*o - vi * b) / a;
        }
    };
    let v0 = psi.to_position().into_values();
    let mut prev = v0.clone();
    let mut cur = vec![C::default(); n];
    apply(&prev, &mut cur);
    let s = t.signum();
    let mut acc: Vec<C> = prev.iter().map(|v| v * j[0]).collect();
    let mut phase = C::new(0.0, -s);
    for (o, v) in acc.iter_mut().zip(&cur) {
        *o += v * (phase * 2.0 * j[1]);
    }
    let mut next = vec![C::default(); n];
    for k in 2..=terms {
        apply(&cur, &mut next);
        for (nx, p) in next.iter_mut().zip(&prev) {
            *nx = *nx * 2.0 - p;
        }
        phase *= C::new(0.0, -s);
        let c = phase * 2.0 * j[k];
        for (o, v) in acc.iter_mut().zip(&next) {
            *o += v * c;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let g = C::from_polar(1.0, -t * b);
    let out = acc.into_iter().map(|v| v * g).collect();
    Wavefunction::new(h.grid(), Representation::Position, out).unwrap()
}
