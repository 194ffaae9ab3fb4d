//! Small numerical kernels shared across modules: adaptive Gauss-Kronrod
//! quadrature for radial profiles and cumulative time quadrature for ledgers.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if err <= tol.max(1e-15 * k.abs()) || depth == 0 {
        return k;
    }
    let c = 0.5 * (a + b);
    adapt(f, a, c, 0.5 * tol, depth - 1) + adapt(f, c, b, 0.5 * tol, depth - 1)
}

/// Adaptive 15-point Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, abs_tol, 40)
}

/// Integral over `[a, b]` of the quadratic through `(x[k], y[k])`, `k = 0..3`.
fn quadratic_piece(x: [f64; 3], y: [f64; 3], a: f64, b: f64) -> f64 {
    // work in coordinates shifted by `a` for conditioning
    let xs = [x[0] - a, x[1] - a, x[2] - a];
    let l = b - a;
    let prim = |p: f64, q: f64| l * l * l / 3.0 - (p + q) * l * l / 2.0 + p * q * l;
    let mut acc = 0.0;
    for j in 0..3 {
        let (p, q) = match j {
            0 => (xs[1], xs[2]),
            1 => (xs[0], xs[2]),
            _ => (xs[0], xs[1]),
        };
        let denom = (xs[j] - p) * (xs[j] - q);
        acc += y[j] * prim(p, q) / denom;
    }
    acc
}

/// Cumulative integral `I[i] = int_{t[0]}^{t[i]} f dt` from samples, using
/// piecewise quadratic interpolation on (possibly non-uniform) nodes.
/// Falls back to the trapezoid rule when fewer than three samples exist.
pub fn cumulative_quadratic(t: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(t.len(), f.len());
    let n = t.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
        }
        return out;
    }
    for i in 1..n {
        let (a, b) = (t[i - 1], t[i]);
        let piece = if b == a {
            0.0
        } else {
            let k = if i + 1 < n { i - 1 } else { i - 2 };
            quadratic_piece([t[k], t[k + 1], t[k + 2]], [f[k], f[k + 1], f[k + 2]], a, b)
        };
        out[i] = out[i - 1] + piece;
    }
    out
}

/// Cumulative trapezoid rule.
pub fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.len()];
    for i in 1..t.len() {
        out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    }
    out
}
