//! Spherical Bessel functions of the first kind.

/// j_0(x) .. j_{n_max}(x) for x >= 0.
pub fn spherical_bessel_j(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x > n_max as f64 {
        // upward recurrence is stable once x exceeds the order
        let (s, c) = x.sin_cos();
        out[0] = s / x;
        if n_max >= 1 {
            out[1] = s / (x * x) - c / x;
        }
        for m in 1..n_max {
            out[m + 1] = (2 * m + 1) as f64 / x * out[m] - out[m - 1];
        }
        return out;
    }
    // Miller's downward recurrence, normalised by sum (2m+1) j_m^2 = 1
    let start = n_max + 16 + (40.0 * (n_max as f64 + x)).sqrt() as usize;
    let mut buf = vec![0.0; start + 2];
    buf[start] = 1e-30;
    for m in (1..=start).rev() {
        buf[m - 1] = (2 * m + 1) as f64 / x * buf[m] - buf[m + 1];
        if buf[m - 1].abs() > 1e100 {
            for v in buf.iter_mut().skip(m - 1) {
                *v *= 1e-100;
            }
        }
    }
    let norm: f64 = buf
        .iter()
        .enumerate()
        .map(|(m, v)| (2 * m + 1) as f64 * v * v)
        .sum::<f64>()
        .sqrt();
    // fix the overall sign from whichever low order is well conditioned
    let j0 = if x < 1e-3 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    let sign = if j0.abs() > 0.1 {
        j0.signum() * buf[0].signum()
    } else {
        let j1 = x.sin() / (x * x) - x.cos() / x;
        j1.signum() * buf[1].signum()
    };
    for m in 0..=n_max {
        out[m] = sign * buf[m] / norm;
    }
    out
}
