//! Fixed-order Gauss–Legendre rules used for kernel moments and discrete weights.

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// 8-point Gauss–Legendre on `[a, b]`. Exact for polynomials of degree ≤ 15.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Gauss–Legendre over `[a, b]` split at every breakpoint falling strictly inside.
/// `breaks` need not be sorted.
pub fn gauss_legendre_split<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(|p, q| p.total_cmp(q));
    let mut acc = 0.0;
    let mut lo = a;
    for c in cuts {
        acc += gauss_legendre(f, lo, c);
        lo = c;
    }
    acc + gauss_legendre(f, lo, b)
}

/// Composite Gauss–Legendre with `pieces` equal panels.
pub fn gauss_legendre_composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize) -> f64 {
    let n = pieces.max(1);
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| gauss_legendre(f, a + k as f64 * h, a + (k + 1) as f64 * h))
        .sum()
}
