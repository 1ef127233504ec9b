#![allow(dead_code, clippy::excessive_precision)]

/// (t, n1, n2, bf10) from a 40-digit arbitrary-precision quadrature with r = 0.707.
pub const FROZEN_BF10: [(f64, usize, Option<usize>, f64); 20] = [
    (0.0, 30, None, 0.19441111069605646),
    (0.5, 10, None, 0.34353370172595421),
    (1.0, 20, None, 0.36131171178707402),
    (2.0, 28, None, 1.1285070952003893),
    (4.0, 28, None, 69.43250610265353),
    (2.549, 29, None, 2.9812210628365152),
    (3.0, 15, None, 5.7841417095675884),
    (-2.5, 40, None, 2.6348170073311937),
    (6.0, 12, None, 318.27079736768103),
    (1.5, 100, None, 0.32699054310323577),
    (8.0, 50, None, 54369695.248176842),
    (0.25, 5, None, 0.40792506431121184),
    (1.33, 30, Some(25), 0.56625510795852716),
    (-1.404, 20, Some(18), 0.67988049215233228),
    (2.14, 26, Some(30), 1.7514436333544783),
    (0.0, 15, Some(15), 0.34438655933817075),
    (3.67, 40, Some(35), 59.329970919215359),
    (5.0, 10, Some(12), 274.4405434449581),
    (-0.91, 50, Some(40), 0.3193595076383323),
    (2.0, 3, Some(4), 1.3170280152092128),
];

/// Independent route: composite Simpson over s in (0, 1) with g = s / (1 - s).
pub fn simpson_oracle(t: f64, n1: usize, n2: Option<usize>, r: f64) -> f64 {
    let (n, nu) = match n2 {
        None => (n1 as f64, n1 as f64 - 1.0),
        Some(n2) => ((n1 * n2) as f64 / (n1 + n2) as f64, (n1 + n2 - 2) as f64),
    };
    let f = |s: f64| -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            // g -> inf: integrand ~ (2 pi)^-1/2 g^-2 (n r^2)^-1/2 (1 + g)^2 / null
            let null = (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0);
            return (2.0 * std::f64::consts::PI).powf(-0.5) / (n * r * r).sqrt() / null;
        }
        let g = s / (1.0 - s);
        let a = 1.0 + n * g * r * r;
        let log_num = -0.5 * a.ln() - (nu + 1.0) / 2.0 * (t * t / (a * nu)).ln_1p()
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - 1.5 * g.ln()
            - 0.5 / g;
        let log_null = -(nu + 1.0) / 2.0 * (t * t / nu).ln_1p();
        (log_num - log_null).exp() / ((1.0 - s) * (1.0 - s))
    };
    let panels = 400_000;
    let h = 1.0 / panels as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..panels {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}
