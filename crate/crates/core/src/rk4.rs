//! Fixed-step classical Runge-Kutta stepping on small fixed-size vectors.

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for (o, k) in out.iter_mut().zip(k) {
        *o += h * k;
    }
    out
}

/// One classical 4th-order step of size `h` (negative `h` integrates
/// backwards). `f(stage, y)` evaluates the vector field at stage 0 (start of
/// the step), 1 (midpoint) or 2 (end), so callers can supply stage-dependent
/// data such as interpolated coefficients.
pub fn step<const N: usize, F>(y: &[f64; N], h: f64, mut f: F) -> [f64; N]
where
    F: FnMut(Stage, &[f64; N]) -> [f64; N],
{
    let k1 = f(Stage::Start, y);
    let k2 = f(Stage::Mid, &axpy(y, 0.5 * h, &k1));
    let k3 = f(Stage::Mid, &axpy(y, 0.5 * h, &k2));
    let k4 = f(Stage::End, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Position of a Runge-Kutta stage inside the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Start,
    Mid,
    End,
}
