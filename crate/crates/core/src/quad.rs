//! Composite Gauss-Legendre rule for smooth integrands on short panels.

use crate::scalar::Real;

/// Positive nodes and weights of the 16-point rule on `[-1, 1]`.
const GL16: [(f64, f64); 8] = [
    (0.09501250983763745, 0.18945061045506859),
    (0.2816035507792589, 0.1826034150449236),
    (0.45801677765722737, 0.16915651939500262),
    (0.6178762444026438, 0.14959598881657676),
    (0.755404408355003, 0.12462897125553403),
    (0.8656312023878318, 0.09515851168249259),
    (0.9445750230732326, 0.062253523938647706),
    (0.9894009349916499, 0.027152459411754037),
];

/// Integrates `f` over `[0, t]` split into `panels` equal pieces. `f` returns
/// several integrands at once so that they share node evaluations.
pub(crate) fn gauss_legendre<T: Real, const K: usize>(
    t: T,
    panels: usize,
    mut f: impl FnMut(T) -> [T; K],
) -> [T; K] {
    let panels = panels.max(1);
    let h = t / T::from_usize_lossy(panels);
    let half = h / T::lit(2.0);
    let mut acc = [T::zero(); K];
    for p in 0..panels {
        let mid = (T::from_usize_lossy(p) + T::lit(0.5)) * h;
        for &(x, w) in GL16.iter() {
            let dx = half * T::lit(x);
            let w = T::lit(w) * half;
            let lo = f(mid - dx);
            let hi = f(mid + dx);
            for i in 0..K {
                acc[i] = acc[i] + w * (lo[i] + hi[i]);
            }
        }
    }
    acc
}
