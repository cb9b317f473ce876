//! Smearing profiles rho and their radial Fourier transforms.

use crate::error::{Error, Result};
use crate::quad::{adaptive_real, gl_rule};
use crate::radial::{KGrid, RadialField, Tail, FT3};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

/// Natural cubic spline through (x_i, y_i).
#[derive(Debug, Clone)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal solve for the second derivatives
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (r - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Spline { x, y, m }
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// A radial profile read from (x, rho) samples; its transform is tabulated once.
#[derive(Debug, Clone)]
pub struct TabulatedProfile {
    profile: Spline,
    hat_table: Spline,
    k_table_end: f64,
    /// rho^ continues as hat_end * exp(-decay (k^2 - k_end^2)) past the table
    tail_decay: f64,
    hat_end: f64,
    /// factor applied to the raw samples so that int rho = 1
    pub normalisation: f64,
    /// sqrt(<r^2> / 3), the Gaussian-equivalent width
    pub width: f64,
}

impl TabulatedProfile {
    pub fn from_samples(x: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if x.len() != rho.len() || x.len() < 4 {
            return Err(Error::InvalidParameter("profile table needs 4+ (x, rho) rows".into()));
        }
        if x[0] < 0.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("profile x values must be non-negative and increasing".into()));
        }
        if x.iter().chain(&rho).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("profile table has non-finite entries".into()));
        }
        if rho.iter().all(|&r| r == 0.0) {
            return Err(Error::InvalidParameter("profile table is identically zero".into()));
        }
        let sp = Spline::new(x.clone(), rho);
        let moment = |p: i32| -> f64 {
            let rule = gl_rule(8);
            let mut acc = 0.0;
            for w in x.windows(2) {
                let (a, b) = (w[0], w[1]);
                for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let r = 0.5 * (a + b) + 0.5 * (b - a) * t;
                    acc += 0.5 * (b - a) * wt * r.powi(p) * sp.eval(r);
                }
            }
            4.0 * PI * acc
        };
        let mass = moment(2);
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("profile has non-positive total mass".into()));
        }
        let r2 = moment(4) / mass;
        let width = (r2 / 3.0).sqrt();
        if !(width > 0.0) {
            return Err(Error::InvalidParameter("profile has no spatial extent".into()));
        }
        let normalisation = 1.0 / mass;
        let profile = Spline::new(x.clone(), sp.y.iter().map(|v| v * normalisation).collect());

        // rho^(k) = sqrt(2/pi) int x rho(x) sin(kx)/k dx
        let transform = |k: f64| -> f64 {
            let rule = gl_rule(12);
            let mut acc = 0.0;
            for w in profile.x.windows(2) {
                let (a, b) = (w[0], w[1]);
                let sub = (((b - a) * k / 2.0).ceil() as usize).max(1);
                let h = (b - a) / sub as f64;
                for s in 0..sub {
                    let lo = a + s as f64 * h;
                    for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                        let r = lo + 0.5 * h * (1.0 + t);
                        let sinc = if k * r < 1e-8 { r } else { (k * r).sin() / k };
                        acc += 0.5 * h * wt * r * profile.eval(r) * sinc;
                    }
                }
            }
            (2.0 / PI).sqrt() * acc
        };
        let k_table_end = 14.0 / width;
        let m = 1024;
        let ks: Vec<f64> = (0..=m).map(|i| k_table_end * i as f64 / m as f64).collect();
        let hs: Vec<f64> = ks.iter().map(|&k| transform(k)).collect();
        let (h1, h2) = (hs[m - 1], hs[m]);
        let (k1, k2) = (ks[m - 1], ks[m]);
        let (tail_decay, hat_end) = if h1 > 0.0 && h2 > 0.0 && h2 < h1 {
            ((h1 / h2).ln() / (k2 * k2 - k1 * k1), h2)
        } else {
            (0.0, 0.0)
        };
        Ok(TabulatedProfile {
            profile,
            hat_table: Spline::new(ks, hs),
            k_table_end,
            tail_decay,
            hat_end,
            normalisation,
            width,
        })
    }

    /// Two-column CSV `x,rho`; a header row is skipped when present.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let (mut xs, mut rs) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Parse("profile rows need two columns".into()));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(x), Ok(r)) => {
                    xs.push(x);
                    rs.push(r);
                }
                _ if xs.is_empty() => continue,
                _ => return Err(Error::Parse(format!("bad profile row: {:?}", rec))),
            }
        }
        Self::from_samples(xs, rs)
    }

    pub fn rho(&self, x: f64) -> f64 {
        if x > *self.profile.x.last().unwrap() {
            0.0
        } else {
            self.profile.eval(x)
        }
    }

    fn hat(&self, k: f64) -> f64 {
        if k <= self.k_table_end {
            self.hat_table.eval(k)
        } else if self.tail_decay > 0.0 {
            self.hat_end * (-self.tail_decay * (k * k - self.k_table_end * self.k_table_end)).exp()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub enum FormFactor {
    Gaussian { sigma: f64 },
    Table(Arc<TabulatedProfile>),
}

/// rho(x) = (2 pi sigma^2)^{-3/2} e^{-x^2 / 2 sigma^2}, rho^(k) = (2pi)^{-3/2} e^{-sigma^2 k^2 / 2}.
pub fn make_gaussian(sigma: f64) -> Result<FormFactor> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(FormFactor::Gaussian { sigma })
}

impl FormFactor {
    pub fn from_table(profile: TabulatedProfile) -> Self {
        FormFactor::Table(Arc::new(profile))
    }

    /// rho^(k).
    pub fn hat(&self, k: f64) -> f64 {
        match self {
            FormFactor::Gaussian { sigma } => FT3 * (-0.5 * sigma * sigma * k * k).exp(),
            FormFactor::Table(t) => t.hat(k),
        }
    }

    pub fn hat0(&self) -> f64 {
        self.hat(0.0)
    }

    /// Gaussian width, or the Gaussian-equivalent width of a table.
    pub fn width(&self) -> f64 {
        match self {
            FormFactor::Gaussian { sigma } => *sigma,
            FormFactor::Table(t) => t.width,
        }
    }

    pub fn gaussian_sigma(&self) -> Option<f64> {
        match self {
            FormFactor::Gaussian { sigma } => Some(*sigma),
            FormFactor::Table(_) => None,
        }
    }

    /// Beyond this k, rho^(k)^2 < 1e-16 rho^(0)^2.
    pub fn k_cut(&self) -> f64 {
        match self {
            FormFactor::Gaussian { sigma } => (16.0 * 10f64.ln()).sqrt() / sigma,
            FormFactor::Table(t) => {
                let h0 = t.hat(0.0).abs();
                let ks = &t.hat_table.x;
                let hs = &t.hat_table.y;
                let mut cut = t.k_table_end;
                for i in (0..ks.len()).rev() {
                    if hs[i].abs() >= 1e-8 * h0 {
                        cut = ks[(i + 1).min(ks.len() - 1)];
                        break;
                    }
                }
                if t.tail_decay > 0.0 && cut >= t.k_table_end {
                    // extend through the Gaussian continuation
                    let need = (t.hat_end / (1e-8 * h0)).ln().max(0.0) / t.tail_decay;
                    cut = (t.k_table_end.powi(2) + need).sqrt();
                }
                cut
            }
        }
    }
}

/// ell = int rho^(k)^2 / k^2 d^3k = 4 pi int_0^inf rho^(k)^2 dk.
pub fn compute_ell(ff: &FormFactor) -> Result<f64> {
    let kc = ff.k_cut();
    let v = adaptive_real(|k| ff.hat(k).powi(2), 0.0, kc, 1e-300, 1e-14);
    if !(v > 0.0) {
        return Err(Error::InvalidParameter("form factor has zero transform".into()));
    }
    Ok(4.0 * PI * v)
}

/// Closed form of ell for a Gaussian.
pub fn gaussian_ell(sigma: f64) -> f64 {
    1.0 / (4.0 * PI.powf(1.5) * sigma)
}

/// rho_eps * G on the grid: rho^(eps k) / k^2. At eps = 0 this is the bare Green function.
pub fn smeared_green(ff: &FormFactor, eps: f64, grid: Arc<KGrid>) -> RadialField {
    let tail = if eps == 0.0 { Tail::green(C64::new(1.0, 0.0)) } else { Tail::none() };
    RadialField::from_fn(grid, |k| C64::new(ff.hat(eps * k) / (k * k), 0.0), tail)
}

/// rho_eps on the grid.
pub fn smeared_profile(ff: &FormFactor, eps: f64, grid: Arc<KGrid>) -> RadialField {
    RadialField::from_fn(grid, |k| C64::new(ff.hat(eps * k), 0.0), Tail::none())
}
