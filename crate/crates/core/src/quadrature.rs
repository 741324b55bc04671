//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

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

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and |Kronrod - Gauss| on one panel.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol` or relative
/// tolerance `rel_tol`, whichever is looser, by recursive bisection.
///
/// Reversed limits return the negated integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, abs_tol, rel_tol);
    }
    let (whole, err) = gk15(&f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    if err <= tol {
        return whole;
    }
    refine(&f, a, b, tol, 48)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (left, el) = gk15(f, a, m);
    let (right, er) = gk15(f, m, b);
    if el + er <= tol || depth == 0 || m <= a || m >= b {
        return left + right;
    }
    let l = if el <= 0.5 * tol {
        left
    } else {
        refine(f, a, m, 0.5 * tol, depth - 1)
    };
    let r = if er <= 0.5 * tol {
        right
    } else {
        refine(f, m, b, 0.5 * tol, depth - 1)
    };
    l + r
}

/// Maximise `f` on `[a, b]` by dense sampling followed by golden-section
/// refinement around the best sample. Returns `(argmax, max)`.
pub fn maximize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, samples: usize) -> (f64, f64) {
    let n = samples.max(3);
    let h = (b - a) / (n - 1) as f64;
    let mut best = (a, f(a));
    for i in 1..n {
        let x = if i == n - 1 { b } else { a + h * i as f64 };
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut lo = (best.0 - h).max(a);
    let mut hi = (best.0 + h).min(b);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..100 {
        if hi - lo <= 1e-14 * (1.0 + best.0.abs()) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}
