//! Radial momentum-space fields sampled on panels of Gauss–Legendre nodes.
//!
//! A field stores its unitary Fourier transform f^(k) at the grid nodes; beyond the
//! last node it may continue as (2pi)^{-3/2} (green / k^2 + quartic / k^4).

use crate::error::{Error, Result};
use crate::quad::gl_rule;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// (2pi)^{-3/2}
pub const FT3: f64 = 0.063_493_635_934_240_97;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// smallest smearing width that must be resolved
    pub eps_min: f64,
    /// form-factor length scale
    pub sigma: f64,
    /// longest evolution time whose phases must be resolved
    pub t_max: f64,
    /// upper end of the phase-resolved band
    pub k_osc: f64,
    pub order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { eps_min: 0.025, sigma: 1.0, t_max: 1.0, k_osc: 40.0, order: 16 }
    }
}

/// Panels [edge_i, edge_{i+1}] with `order` Gauss–Legendre nodes each.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    edges: Vec<f64>,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridDescriptor {
    edges: Vec<f64>,
    order: usize,
}

impl KGrid {
    pub fn from_edges(edges: Vec<f64>, order: usize) -> Result<Self> {
        if edges.len() < 2 || order == 0 {
            return Err(Error::InvalidParameter("grid needs at least one panel".into()));
        }
        if edges[0] < 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("grid edges must be finite, increasing, non-negative".into()));
        }
        let rule = gl_rule(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = 0.5 * (b - a);
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(0.5 * (a + b) + h * x);
                weights.push(h * wt);
            }
        }
        Ok(KGrid { edges, order, nodes, weights })
    }

    /// One panel [0, k_min], then `n_panels - 1` geometrically growing panels up to k_max.
    pub fn geometric(n_panels: usize, order: usize, k_min: f64, k_max: f64) -> Result<Self> {
        if n_panels < 2 || !(k_min > 0.0) || !(k_max > k_min) {
            return Err(Error::InvalidParameter("geometric grid needs 0 < k_min < k_max and 2+ panels".into()));
        }
        let ratio = (k_max / k_min).powf(1.0 / (n_panels - 1) as f64);
        let mut edges = vec![0.0, k_min];
        for i in 1..n_panels {
            edges.push(if i + 1 == n_panels { k_max } else { k_min * ratio.powi(i as i32) });
        }
        Self::from_edges(edges, order)
    }

    /// Composite grid: geometric grading towards k = 0, panels narrow enough to follow
    /// the phase e^{-i k^2 t_max} up to `k_osc`, then geometric panels out to
    /// k_max = max(40, 40 / (eps_min sigma)).
    pub fn for_problem(spec: &GridSpec) -> Result<Self> {
        if !(spec.eps_min > 0.0) || !(spec.sigma > 0.0) || !(spec.t_max >= 0.0) {
            return Err(Error::InvalidParameter("grid spec needs eps_min, sigma > 0 and t_max >= 0".into()));
        }
        let k_max = (40.0 / (spec.eps_min * spec.sigma)).max(40.0);
        let k_feature = 1.0 / (spec.eps_min * spec.sigma);
        let mut edges = vec![0.0];
        let mut k = 1e-6;
        while k < 0.5 {
            edges.push(k);
            k *= 2.5;
        }
        k = 0.5;
        let k_osc = spec.k_osc.min(k_max);
        while k < k_osc {
            edges.push(k);
            let mut h = 0.25f64.max(0.1 * k).min(0.25 * k_feature.max(1.0));
            if spec.t_max > 0.0 {
                // phase of e^{-i k^2 t_max} changes by at most 4 rad per panel
                h = h.min(2.0 / (k * spec.t_max));
            }
            k += h;
        }
        k = k_osc;
        while k < k_max {
            edges.push(k);
            k *= 1.2;
        }
        edges.push(k_max);
        Self::from_edges(edges, spec.order)
    }

    /// Every panel split in two.
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for w in self.edges.windows(2) {
            edges.push(w[0]);
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(*self.edges.last().unwrap());
        Self::from_edges(edges, self.order).expect("refining a valid grid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn n_panels(&self) -> usize {
        self.edges.len() - 1
    }
    pub fn k_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn descriptor_json(&self) -> serde_json::Value {
        serde_json::to_value(GridDescriptor { edges: self.edges.clone(), order: self.order }).unwrap()
    }
}

/// Asymptotic continuation beyond k_max, in units of (2pi)^{-3/2}.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tail {
    pub green: C64,
    pub quartic: C64,
}

impl Tail {
    pub fn none() -> Self {
        Tail::default()
    }
    pub fn green(c: C64) -> Self {
        Tail { green: c, quartic: C64::new(0.0, 0.0) }
    }
    pub fn is_none(&self) -> bool {
        self.green == C64::new(0.0, 0.0) && self.quartic == C64::new(0.0, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct RadialField {
    pub grid: Arc<KGrid>,
    pub values: Vec<C64>,
    pub tail: Tail,
}

/// k^power v(k) on the first node dominating the next few nodes by a clear margin signals a
/// singular integrand. A single node is not enough: a field may pass through zero near k_1.
fn origin_blows_up(k: &[f64], v: &[f64], power: i32) -> bool {
    if k.len() < 5 || k[0] <= 0.0 {
        return false;
    }
    let s0 = k[0].powi(power) * v[0];
    let next = (1..5).map(|i| k[i].powi(power) * v[i]).fold(0.0, f64::max);
    s0 > 2.0 * next && s0 > 1e-300
}

fn same_grid(a: &Arc<KGrid>, b: &Arc<KGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::InvalidParameter("fields live on different grids".into()))
    }
}

impl RadialField {
    pub fn new(grid: Arc<KGrid>, values: Vec<C64>, tail: Tail) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(RadialField { grid, values, tail })
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: Arc<KGrid>, f: F, tail: Tail) -> Self {
        let values = grid.nodes().iter().map(|&k| f(k)).collect();
        RadialField { grid, values, tail }
    }

    pub fn zeros(grid: Arc<KGrid>) -> Self {
        let n = grid.len();
        RadialField { grid, values: vec![C64::new(0.0, 0.0); n], tail: Tail::none() }
    }

    pub fn scale(&self, c: C64) -> Self {
        RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            tail: Tail { green: self.tail.green * c, quartic: self.tail.quartic * c },
        }
    }

    /// self + c * other
    pub fn axpy(&self, c: C64, other: &RadialField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
            tail: Tail {
                green: self.tail.green + c * other.tail.green,
                quartic: self.tail.quartic + c * other.tail.quartic,
            },
        })
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// k^p |f|^2 at the two smallest nodes must shrink towards k = 0.
    fn check_origin(&self, power: i32, what: &str) -> Result<()> {
        let k = self.grid.nodes();
        let v: Vec<f64> = self.values.iter().map(|z| z.norm_sqr()).collect();
        if origin_blows_up(k, &v, power) {
            return Err(Error::NotSquareIntegrable(format!(
                "{what}: integrand grows like a negative power of k at the origin"
            )));
        }
        Ok(())
    }

    pub fn l2_norm_sqr(&self) -> Result<f64> {
        self.check_origin(3, "l2_norm")?;
        let g = self.grid.nodes();
        let w = self.grid.weights();
        let mut acc = 0.0;
        for i in 0..g.len() {
            acc += w[i] * g[i] * g[i] * self.values[i].norm_sqr();
        }
        let kk = self.grid.k_max();
        let t = self.tail;
        let tail = (t.green.norm_sqr() / kk
            + 2.0 * (t.green.conj() * t.quartic).re / (3.0 * kk.powi(3))
            + t.quartic.norm_sqr() / (5.0 * kk.powi(5)))
            / (2.0 * PI * PI);
        Ok(4.0 * PI * acc + tail)
    }

    pub fn l2_norm(&self) -> Result<f64> {
        Ok(self.l2_norm_sqr()?.max(0.0).sqrt())
    }

    /// (f, g) = int conj(f^) g^ d^3k, linear in the second slot.
    pub fn inner(&self, other: &RadialField) -> Result<C64> {
        same_grid(&self.grid, &other.grid)?;
        let g = self.grid.nodes();
        let v: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| (a * b).norm()).collect();
        if origin_blows_up(g, &v, 3) {
            return Err(Error::NotSquareIntegrable("inner: integrand grows like a negative power of k at the origin".into()));
        }
        let w = self.grid.weights();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..g.len() {
            acc += self.values[i].conj() * other.values[i] * (w[i] * g[i] * g[i]);
        }
        let kk = self.grid.k_max();
        let (a, b) = (self.tail, other.tail);
        let tail = (a.green.conj() * b.green / kk
            + (a.green.conj() * b.quartic + a.quartic.conj() * b.green) / (3.0 * kk.powi(3))
            + a.quartic.conj() * b.quartic / (5.0 * kk.powi(5)))
            / (2.0 * PI * PI);
        Ok(acc * (4.0 * PI) + tail)
    }

    /// ||grad f||^2 = 4 pi int k^4 |f^|^2 dk.
    pub fn grad_norm_sqr(&self) -> Result<f64> {
        if self.tail.green != C64::new(0.0, 0.0) {
            return Err(Error::NonIntegrableTail("gradient of a field with a k^-2 tail".into()));
        }
        self.check_origin(5, "grad_norm")?;
        let g = self.grid.nodes();
        let w = self.grid.weights();
        let mut acc = 0.0;
        for i in 0..g.len() {
            acc += w[i] * g[i].powi(4) * self.values[i].norm_sqr();
        }
        let kk = self.grid.k_max();
        let tail = self.tail.quartic.norm_sqr() / (3.0 * kk.powi(3)) / (2.0 * PI * PI);
        Ok(4.0 * PI * acc + tail)
    }

    pub fn grad_norm(&self) -> Result<f64> {
        Ok(self.grad_norm_sqr()?.max(0.0).sqrt())
    }

    /// f(0) = (2pi)^{-3/2} 4 pi int k^2 f^(k) dk.
    pub fn value_at_origin(&self) -> Result<C64> {
        if self.tail.green != C64::new(0.0, 0.0) {
            return Err(Error::NonIntegrableTail("value at the origin of a field with a k^-2 tail".into()));
        }
        let g = self.grid.nodes();
        let w = self.grid.weights();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..g.len() {
            acc += self.values[i] * (w[i] * g[i] * g[i]);
        }
        let tail = self.tail.quartic / (2.0 * PI * PI * self.grid.k_max());
        Ok(acc * (FT3 * 4.0 * PI) + tail)
    }

    /// CSV with a leading `# {json}` header line carrying the grid and the tail.
    pub fn to_csv_string(&self) -> String {
        let header = serde_json::json!({
            "grid": self.grid.descriptor_json(),
            "tail": self.tail,
        });
        let mut s = format!("# {}\nk,re,im\n", header);
        for (k, v) in self.grid.nodes().iter().zip(&self.values) {
            s.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", k, v.re, v.im));
        }
        s
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
        let json = first
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing `# {json}` header".into()))?;
        let header: serde_json::Value = serde_json::from_str(json.trim())?;
        let desc: GridDescriptor = serde_json::from_value(header["grid"].clone())?;
        let tail: Tail = serde_json::from_value(header["tail"].clone())?;
        let grid = Arc::new(KGrid::from_edges(desc.edges, desc.order)?);
        let body: String = lines.collect::<Vec<_>>().join("\n");
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let mut values = Vec::with_capacity(grid.len());
        for rec in rdr.records() {
            let rec = rec?;
            let re: f64 = rec[1].trim().parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let im: f64 = rec[2].trim().parse().map_err(|e| Error::Parse(format!("{e}")))?;
            values.push(C64::new(re, im));
        }
        RadialField::new(grid, values, tail)
    }
}
