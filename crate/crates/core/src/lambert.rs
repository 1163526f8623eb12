//! Principal branch of the Lambert W function on `[0, inf)`.

const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 64;

/// `W(x)` for `x >= 0`: the unique `w >= 0` with `w * e^w = x`.
///
/// Halley iteration started from `ln(1 + x)`. The equation is solved in the
/// form `w - x * e^{-w} = 0`, which is free of overflow for every finite `x`.
/// Returns NaN for negative or NaN input and `inf` for `inf`.
pub fn lambert_w0(x: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }

    let mut w = x.ln_1p();
    for _ in 0..MAX_ITER {
        let xe = x * (-w).exp();
        let g = w - xe;
        let g1 = 1.0 + xe;
        let g2 = -xe;
        let step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
        w -= step;
        if step.abs() <= REL_TOL * w.abs() {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values from an independent implementation (scipy.special.lambertw)
    const REFERENCE: &[(f64, f64)] = &[
        (1e-10, 9.999999999e-11),
        (0.5, 0.35173371124919584),
        (1.0, 0.5671432904097838),
        (std::f64::consts::E, 1.0),
        (10.0, 1.7455280027406994),
        (1e6, 11.383358086140053),
        (1099511627776.0, 24.526147431829628),
        (1e100, 224.8431064451185),
        (1e300, 684.2472086297608),
    ];

    #[test]
    fn matches_reference_values() {
        for &(x, expected) in REFERENCE {
            let w = lambert_w0(x);
            assert!(
                ((w - expected) / expected).abs() <= 1e-12,
                "W({x}) = {w}, expected {expected}"
            );
        }
    }

    #[test]
    fn inverts_x_exp_x() {
        for i in -30..=60 {
            let x = 2f64.powi(i);
            let w = lambert_w0(x);
            let back = w * w.exp();
            assert!(((back - x) / x).abs() <= 1e-12, "x = {x}: w e^w = {back}");
        }
    }

    #[test]
    fn edge_inputs() {
        assert_eq!(lambert_w0(0.0), 0.0);
        assert!(lambert_w0(-1.0).is_nan());
        assert_eq!(lambert_w0(f64::INFINITY), f64::INFINITY);
        assert!(lambert_w0(f64::MIN_POSITIVE) > 0.0);
    }
}
