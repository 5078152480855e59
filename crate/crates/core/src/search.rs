//! One-dimensional minimizers shared by the projection and the constrained solver.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`. Returns `(x_min, f_min)`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    // the midpoint can lose to an interior probe when f is flat-bottomed
    [(x1, f1), (x2, f2), (mid, fm)]
        .into_iter()
        .fold((mid, fm), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Uniform scan of `[lo, hi]` with spacing at most `step`, followed by golden-section
/// refinement inside the cells adjacent to the best sample.
///
/// Ties in the scan go to the smallest abscissa.
pub fn scan_then_golden(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    step: f64,
    tol: f64,
) -> (f64, f64) {
    let cells = (((hi - lo) / step).ceil() as usize).max(1);
    let h = (hi - lo) / cells as f64;
    let mut best = (lo, f(lo));
    for i in 1..=cells {
        let x = lo + h * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    if !best.1.is_finite() {
        return best;
    }
    let a = (best.0 - h).max(lo);
    let b = (best.0 + h).min(hi);
    let refined = golden_section(&f, a, b, tol);
    if refined.1 <= best.1 {
        refined
    } else {
        best
    }
}
