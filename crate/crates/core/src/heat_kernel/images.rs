//! Short-time representation of the interval kernel by reflections.
//!
//! Each endpoint contributes the half-line Robin kernel
//! `Γ(x + y) - β e^{-(x+y)²/2t} erfcx((x + y + βt)/√(2t))`. Repeated
//! reflections are dropped; their size is `O(exp(-1/(2t)))`.

use crate::scalar::Real;
use crate::special::{erf, erfcx};

fn gauss<T: Real>(t: T, d: T) -> T {
    (-(d * d) / (T::lit(2.0) * t)).exp() / (T::lit(2.0) * T::PI() * t).sqrt()
}

fn wall<T: Real>(t: T, s: T, beta: T) -> T {
    let z = (s + beta * t) / (T::lit(2.0) * t).sqrt();
    gauss(t, s) - beta * (-(s * s) / (T::lit(2.0) * t)).exp() * erfcx(z)
}

/// Short-time Robin kernel on the unit interval.
pub fn interval_images<T: Real>(t: T, x: T, y: T, beta: T) -> T {
    let two = T::lit(2.0);
    gauss(t, x - y) + wall(t, x + y, beta) + wall(t, two - x - y, beta)
}

/// Antiderivative in `s` of the wall term.
fn wall_primitive<T: Real>(t: T, s: T, beta: T) -> T {
    let r = (T::lit(2.0) * t).sqrt();
    // ∫ Γ(s) ds = ½ erf(s/√2t); ∫ β e^{-s²/2t} erfcx(z) ds = e^{-s²/2t} erfcx(z) + erf(s/√2t)
    let robin = (-(s * s) / (T::lit(2.0) * t)).exp() * erfcx((s + beta * t) / r) + erf(s / r);
    T::lit(0.5) * erf(s / r) - robin
}

/// `∫_a^b` of [`interval_images`] in `y`, in closed form.
pub fn interval_images_segment<T: Real>(t: T, x: T, a: T, b: T, beta: T) -> T {
    let r = (T::lit(2.0) * t).sqrt();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let direct = half * (erf((b - x) / r) - erf((a - x) / r));
    let left = wall_primitive(t, x + b, beta) - wall_primitive(t, x + a, beta);
    let right = wall_primitive(t, two - x - a, beta) - wall_primitive(t, two - x - b, beta);
    direct + left + right
}
