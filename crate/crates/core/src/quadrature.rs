//! Globally adaptive 21-point Gauss-Kronrod integration and Gauss-Legendre
//! rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077841765025812,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Integral estimate with its error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One Gauss-Kronrod 21 panel on `[a, b]` with the usual error heuristic.
pub fn gk21(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut fv = [0.0; 21];
    fv[10] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    (value, err)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Tolerances and budget for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn absolute(tol: f64) -> Self {
        Self {
            absolute: tol,
            relative: 0.0,
            max_panels: 20_000,
        }
    }

    pub fn relative(tol: f64) -> Self {
        Self {
            absolute: 0.0,
            relative: tol,
            max_panels: 20_000,
        }
    }
}

/// Adaptive integration over consecutive `breakpoints`, bisecting the panel
/// with the largest error until the total error meets the tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, breakpoints: &[f64], tol: Tolerance) -> Result<Estimate> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidInput("integration needs at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (value, error) = gk21(&f, w[0], w[1]);
        evaluations += 21;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.error).sum();
        let target = tol.absolute.max(tol.relative * total.abs());
        if err <= target || heap.is_empty() {
            // Sum in position order so the result does not depend on heap layout.
            let mut panels = heap.into_vec();
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            let value = panels.iter().map(|p| p.value).sum();
            return Ok(Estimate {
                value,
                error: err,
                evaluations,
            });
        }
        if heap.len() >= tol.max_panels {
            return Err(Error::Quadrature {
                achieved: err,
                requested: target,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature {
                achieved: err,
                requested: target,
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk21(&f, a, b);
            evaluations += 21;
            heap.push(Panel { a, b, value, error });
        }
    }
}

/// Breakpoints splitting `[a, b]` into `count` equal panels.
pub fn uniform_breakpoints(a: f64, b: f64, count: usize) -> Vec<f64> {
    let count = count.max(1);
    (0..=count)
        .map(|i| a + (b - a) * i as f64 / count as f64)
        .collect()
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Gauss-Legendre needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map from [-1, 1] to [0, 1].
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
