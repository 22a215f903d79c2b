//! Degeneration instants: location on dense output and shape classification.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{dense_eval, Trajectory};
use crate::linalg::{pseudo_svd, ON_SIGMA_REL_TOL};
use crate::reduction::{reduce, FullConfiguration, MassSystem};
use crate::{Error, Result};

/// `|S|` below this fraction of the configuration scale at a local minimum
/// without a sign change is reported as a grazing contact.
pub const GRAZING_REL_TOL: f64 = 1e-9;
/// Refined roots are accepted as degenerate up to this fraction of scale.
pub const ROOT_REL_TOL: f64 = 1e-9;
/// Loosest `|S| / scale` that `classify_shape` accepts as degenerate.
pub const CLASSIFY_REL_TOL: f64 = 1e-6;
/// Relative area below which three projected points count as collinear.
pub const COLLINEAR_REL_TOL: f64 = 1e-8;

/// Shape of a degenerate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeSymbol {
    /// Three bodies on a line; the 1-based label of the middle one.
    Syzygy(u8),
    /// Four coplanar bodies in convex position; the label opposite body 1.
    Convex(u8),
    /// Four coplanar bodies with one inside the triangle of the others.
    Interior(u8),
    NonGeneric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alphabet {
    D2Syzygy,
    D3Coplanar,
}

impl ShapeSymbol {
    pub fn alphabet(&self) -> Option<Alphabet> {
        match self {
            Self::Syzygy(_) => Some(Alphabet::D2Syzygy),
            Self::Convex(_) | Self::Interior(_) => Some(Alphabet::D3Coplanar),
            Self::NonGeneric => None,
        }
    }

    pub fn is_generic(&self) -> bool {
        !matches!(self, Self::NonGeneric)
    }
}

impl fmt::Display for ShapeSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Syzygy(k) => write!(f, "{k}"),
            Self::Convex(k) => write!(f, "X{k}"),
            Self::Interior(k) => write!(f, "I{k}"),
            Self::NonGeneric => f.write_str("?"),
        }
    }
}

impl FromStr for ShapeSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown shape symbol {s:?}"));
        let digit = |t: &str, lo: u8, hi: u8| {
            t.parse::<u8>()
                .ok()
                .filter(|k| (lo..=hi).contains(k))
                .ok_or_else(bad)
        };
        match s {
            "?" => Ok(Self::NonGeneric),
            _ if s.starts_with('X') => Ok(Self::Convex(digit(&s[1..], 2, 4)?)),
            _ if s.starts_with('I') => Ok(Self::Interior(digit(&s[1..], 1, 4)?)),
            _ => Ok(Self::Syzygy(digit(s, 1, 3)?)),
        }
    }
}

impl Serialize for ShapeSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ShapeSymbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerationEvent {
    pub t_star: f64,
    pub symbol: ShapeSymbol,
    /// `|det|` of the reduced configuration at `t_star`.
    pub residual: f64,
    pub bracket: (f64, f64),
    /// Touches the locus without changing orientation.
    pub grazing: bool,
}

/// Anything that yields a configuration at each time of a span.
pub trait ConfigurationPath: Sync {
    fn span(&self) -> (f64, f64);
    /// Scan nodes in increasing order.
    fn nodes(&self) -> Vec<f64>;
    fn configuration(&self, t: f64) -> Result<FullConfiguration>;
}

impl ConfigurationPath for Trajectory {
    fn span(&self) -> (f64, f64) {
        (self.t_start(), self.t_end())
    }

    fn nodes(&self) -> Vec<f64> {
        self.times()
    }

    fn configuration(&self, t: f64) -> Result<FullConfiguration> {
        Ok(dense_eval(self, t)?.q)
    }
}

/// A path given by a closure sampled on explicit nodes.
pub struct FnPath<F> {
    nodes: Vec<f64>,
    f: F,
}

impl<F> FnPath<F>
where
    F: Fn(f64) -> Result<FullConfiguration> + Sync,
{
    pub fn new(nodes: Vec<f64>, f: F) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "path nodes must be strictly increasing with at least two entries".into(),
            ));
        }
        Ok(Self { nodes, f })
    }
}

impl<F> ConfigurationPath for FnPath<F>
where
    F: Fn(f64) -> Result<FullConfiguration> + Sync,
{
    fn span(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    fn nodes(&self) -> Vec<f64> {
        self.nodes.clone()
    }

    fn configuration(&self, t: f64) -> Result<FullConfiguration> {
        (self.f)(t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    t: f64,
    s: f64,
    det: f64,
    scale: f64,
}

fn probe<P: ConfigurationPath>(path: &P, m: &MassSystem, t: f64) -> Result<Probe> {
    let r = reduce(&path.configuration(t)?, m)?;
    let svd = pseudo_svd(&r);
    Ok(Probe {
        t,
        s: svd.signed_distance(),
        det: svd.determinant(),
        scale: r.norm(),
    })
}

fn on_sigma(p: &Probe) -> bool {
    p.s.abs() <= ON_SIGMA_REL_TOL * p.scale
}

fn sign(p: &Probe) -> i8 {
    if on_sigma(p) {
        0
    } else if p.s > 0.0 {
        1
    } else {
        -1
    }
}

fn time_tol(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

enum Task {
    Root(Probe, Probe),
    Node(Probe, bool),
    Graze(Probe, Probe, Probe),
}

/// Locates every degeneration instant along `path`.
///
/// Orientation changes between consecutive nodes are refined on
/// `det(reduce(q(t)))`; nodes lying on the locus are events themselves;
/// local minima of `|S|` without a sign change are searched for tangential
/// contacts (or for pairs of crossings hidden between two nodes).
pub fn scan_degenerations<P: ConfigurationPath>(
    path: &P,
    m: &MassSystem,
) -> Result<Vec<DegenerationEvent>> {
    let nodes = path.nodes();
    let probes = nodes
        .par_iter()
        .map(|&t| probe(path, m, t))
        .collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::new();
    let n = probes.len();
    for i in 0..n {
        let p = probes[i];
        if sign(&p) == 0 {
            let prev = (0..i).rev().map(|j| sign(&probes[j])).find(|s| *s != 0);
            let next = (i + 1..n).map(|j| sign(&probes[j])).find(|s| *s != 0);
            let grazing = matches!((prev, next), (Some(a), Some(b)) if a == b);
            tasks.push(Task::Node(p, grazing));
            continue;
        }
        if i + 1 < n {
            let q = probes[i + 1];
            if sign(&q) == -sign(&p) {
                tasks.push(Task::Root(p, q));
            }
        }
        if i > 0 && i + 1 < n {
            let (a, c) = (probes[i - 1], probes[i + 1]);
            if sign(&a) == sign(&p)
                && sign(&c) == sign(&p)
                && p.s.abs() < a.s.abs()
                && p.s.abs() <= c.s.abs()
            {
                tasks.push(Task::Graze(a, p, c));
            }
        }
    }

    let found: Vec<Vec<DegenerationEvent>> = tasks
        .par_iter()
        .map(|task| match *task {
            Task::Root(a, b) => Ok(vec![refine_root(path, m, a, b)?]),
            Task::Node(p, grazing) => Ok(vec![event_at(path, m, p, (p.t, p.t), grazing)?]),
            Task::Graze(a, p, c) => graze(path, m, a, p, c),
        })
        .collect::<Result<_>>()?;
    let mut events: Vec<DegenerationEvent> = found.into_iter().flatten().collect();
    events.sort_by(|a, b| a.t_star.total_cmp(&b.t_star));
    events.dedup_by(|b, a| (b.t_star - a.t_star).abs() <= time_tol(a.t_star));
    Ok(events)
}

fn event_at<P: ConfigurationPath>(
    path: &P,
    m: &MassSystem,
    p: Probe,
    bracket: (f64, f64),
    grazing: bool,
) -> Result<DegenerationEvent> {
    let q = path.configuration(p.t)?;
    let symbol = match classify_shape(&q, m.dim()) {
        Ok(s) => s,
        Err(Error::NotDegenerate { .. }) => ShapeSymbol::NonGeneric,
        Err(e) => return Err(e),
    };
    Ok(DegenerationEvent {
        t_star: p.t,
        symbol,
        residual: p.det.abs(),
        bracket,
        grazing,
    })
}

/// Illinois-modified regula falsi with bisection safeguard on `det`.
fn refine_root<P: ConfigurationPath>(
    path: &P,
    m: &MassSystem,
    a: Probe,
    b: Probe,
) -> Result<DegenerationEvent> {
    let bracket = (a.t, b.t);
    let (mut lo, mut hi) = (a, b);
    let (mut flo, mut fhi) = (lo.det, hi.det);
    let mut side = 0i8;
    let mut best = if lo.s.abs() < hi.s.abs() { lo } else { hi };
    for it in 0..200 {
        if hi.t - lo.t <= time_tol(0.5 * (lo.t + hi.t)) {
            break;
        }
        let mut t = if it % 3 == 2 || flo == fhi {
            0.5 * (lo.t + hi.t)
        } else {
            (lo.t * fhi - hi.t * flo) / (fhi - flo)
        };
        if !(t > lo.t && t < hi.t) {
            t = 0.5 * (lo.t + hi.t);
        }
        let p = probe(path, m, t)?;
        if p.s.abs() < best.s.abs() {
            best = p;
        }
        if p.det == 0.0 {
            break;
        }
        if (p.det > 0.0) == (lo.det > 0.0) {
            lo = p;
            flo = p.det;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = p;
            fhi = p.det;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    event_at(path, m, best, bracket, false)
}

/// Golden-section search for the minimum of `|S|` around a node-local
/// minimum. A sign change met on the way splits into two crossings.
fn graze<P: ConfigurationPath>(
    path: &P,
    m: &MassSystem,
    a: Probe,
    mid: Probe,
    c: Probe,
) -> Result<Vec<DegenerationEvent>> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let s0 = sign(&mid);
    let (mut lo, mut hi) = (a.t, c.t);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut p1 = probe(path, m, x1)?;
    let mut p2 = probe(path, m, x2)?;
    let mut best = mid;
    for _ in 0..200 {
        for p in [p1, p2] {
            if sign(&p) == -s0 {
                let left = refine_root(path, m, a, p)?;
                let right = refine_root(path, m, p, c)?;
                return Ok(vec![left, right]);
            }
            if p.s.abs() < best.s.abs() {
                best = p;
            }
        }
        if hi - lo <= time_tol(best.t) {
            break;
        }
        if p1.s.abs() < p2.s.abs() {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - INV_PHI * (hi - lo);
            p1 = probe(path, m, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + INV_PHI * (hi - lo);
            p2 = probe(path, m, x2)?;
        }
    }
    if sign(&best) == 0 || best.s.abs() <= GRAZING_REL_TOL * best.scale {
        Ok(vec![event_at(path, m, best, (a.t, c.t), true)?])
    } else {
        Ok(Vec::new())
    }
}

/// Shape of a degenerate configuration of `d + 1` bodies in `ℝ^d`.
///
/// For `d = 2` the symbol names the middle body on the common line. For
/// `d = 3` the points are projected to their common plane: a point inside
/// the triangle of the others gives `I_j`; otherwise the hull is a
/// quadrilateral and `X_k` names the label opposite body 1. Coincident or
/// collinear triples give `NonGeneric`, as does any other dimension.
pub fn classify_shape(q: &FullConfiguration, d: usize) -> Result<ShapeSymbol> {
    if q.dim() != d || q.bodies() != d + 1 {
        return Err(Error::Dimension(format!(
            "{}x{} configuration for d = {d}",
            q.dim(),
            q.bodies()
        )));
    }
    let n = d + 1;
    let mut x = q.matrix().clone();
    let centroid = x.column_mean();
    for mut col in x.column_iter_mut() {
        col -= &centroid;
    }
    let scale = x.norm();
    if scale == 0.0 {
        return Ok(ShapeSymbol::NonGeneric);
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let thickness = svd.singular_values[order[d - 1]];
    if thickness > CLASSIFY_REL_TOL * scale {
        return Err(Error::NotDegenerate {
            s: thickness,
            scale,
        });
    }
    // coordinates in the span of the leading d − 1 principal directions
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            order[..d - 1]
                .iter()
                .map(|&k| u.column(k).dot(&x.column(a)))
                .collect()
        })
        .collect();

    match d {
        2 => {
            let line: Vec<f64> = coords.iter().map(|c| c[0]).collect();
            let mut idx: Vec<usize> = (0..3).collect();
            idx.sort_by(|&a, &b| line[a].total_cmp(&line[b]));
            let gap = (line[idx[1]] - line[idx[0]]).min(line[idx[2]] - line[idx[1]]);
            if gap <= COLLINEAR_REL_TOL * scale {
                return Ok(ShapeSymbol::NonGeneric);
            }
            Ok(ShapeSymbol::Syzygy(idx[1] as u8 + 1))
        }
        3 => Ok(classify_planar(&coords, scale)),
        _ => Ok(ShapeSymbol::NonGeneric),
    }
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn classify_planar(p: &[Vec<f64>], scale: f64) -> ShapeSymbol {
    let tol = COLLINEAR_REL_TOL * scale * scale;
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if cross(&p[i], &p[j], &p[k]).abs() <= tol {
            return ShapeSymbol::NonGeneric;
        }
    }
    for j in 0..4 {
        let o: Vec<usize> = (0..4).filter(|&k| k != j).collect();
        let s = [
            cross(&p[o[0]], &p[o[1]], &p[j]),
            cross(&p[o[1]], &p[o[2]], &p[j]),
            cross(&p[o[2]], &p[o[0]], &p[j]),
        ];
        if s.iter().all(|v| *v > 0.0) || s.iter().all(|v| *v < 0.0) {
            return ShapeSymbol::Interior(j as u8 + 1);
        }
    }
    let cx = p.iter().map(|c| c[0]).sum::<f64>() / 4.0;
    let cy = p.iter().map(|c| c[1]).sum::<f64>() / 4.0;
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| {
        let ta = (p[a][1] - cy).atan2(p[a][0] - cx);
        let tb = (p[b][1] - cy).atan2(p[b][0] - cx);
        ta.total_cmp(&tb)
    });
    let pos = idx.iter().position(|&k| k == 0).expect("body 1 present");
    ShapeSymbol::Convex(idx[(pos + 2) % 4] as u8 + 1)
}

/// Time-ordered word of event symbols; grazing events carry a `~` prefix
/// and non-generic shapes appear as `?`.
pub fn symbol_sequence(events: &[DegenerationEvent]) -> String {
    let mut out = String::new();
    for e in events {
        if e.grazing {
            out.push('~');
        }
        out.push_str(&e.symbol.to_string());
    }
    out
}

/// Builds the configuration `embed(r(t))` path used in synthetic checks.
pub fn reduced_path<F>(
    m: MassSystem,
    nodes: Vec<f64>,
    r: F,
) -> Result<FnPath<impl Fn(f64) -> Result<FullConfiguration> + Sync>>
where
    F: Fn(f64) -> DMatrix<f64> + Sync,
{
    FnPath::new(nodes, move |t| {
        crate::reduction::embed(&crate::linalg::SquareMatrix::new(r(t))?, &m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation2, Rotation3, Unit, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planar(points: &[[f64; 2]]) -> FullConfiguration {
        FullConfiguration::from_columns(
            &points.iter().map(|p| vec![p[0], p[1], 0.0]).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn unit_square_is_x3() {
        let q = planar(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(classify_shape(&q, 3).unwrap(), ShapeSymbol::Convex(3));
        let q = planar(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(classify_shape(&q, 3).unwrap(), ShapeSymbol::Convex(2));
    }

    #[test]
    fn centroid_point_is_interior() {
        let q = planar(&[[0.0, 0.0], [1.0, 0.0], [0.3, 0.9], [1.3 / 3.0, 0.3]]);
        assert_eq!(classify_shape(&q, 3).unwrap(), ShapeSymbol::Interior(4));
        let q = planar(&[[1.3 / 3.0, 0.3], [0.0, 0.0], [1.0, 0.0], [0.3, 0.9]]);
        assert_eq!(classify_shape(&q, 3).unwrap(), ShapeSymbol::Interior(1));
    }

    #[test]
    fn middle_mass_names_the_syzygy() {
        let q = FullConfiguration::from_columns(&[vec![0.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0]])
            .unwrap();
        assert_eq!(classify_shape(&q, 2).unwrap(), ShapeSymbol::Syzygy(1));
    }

    #[test]
    fn collinear_triples_and_other_dimensions_are_nongeneric() {
        let q = planar(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]);
        assert_eq!(classify_shape(&q, 3).unwrap(), ShapeSymbol::NonGeneric);
        let q = FullConfiguration::from_columns(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]])
            .unwrap();
        assert_eq!(classify_shape(&q, 2).unwrap(), ShapeSymbol::NonGeneric);
        let q = FullConfiguration::new(DMatrix::from_fn(4, 5, |i, a| if i == 3 { 0.0 } else { (i * 7 + a * 3) as f64 % 5.0 }))
            .unwrap();
        assert_eq!(classify_shape(&q, 4).unwrap(), ShapeSymbol::NonGeneric);
    }

    #[test]
    fn nondegenerate_input_is_rejected() {
        let q = FullConfiguration::from_columns(&[
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(classify_shape(&q, 3), Err(Error::NotDegenerate { .. })));
    }

    #[test]
    fn classification_survives_rigid_motion_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            let pts: Vec<[f64; 2]> = (0..4)
                .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let q = planar(&pts);
            let base = classify_shape(&q, 3).unwrap();
            seen.insert(base);
            let axis = Unit::new_normalize(Vector3::new(rng.gen(), rng.gen(), rng.gen::<f64>() + 0.1));
            let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..6.0));
            let rot = DMatrix::from_column_slice(3, 3, rot.matrix().as_slice());
            let moved = FullConfiguration::new(rot * q.matrix() * rng.gen_range(0.1..10.0))
                .unwrap()
                .translated(&[rng.gen(), rng.gen(), rng.gen()]);
            assert_eq!(classify_shape(&moved, 3).unwrap(), base);
        }
        // all seven generic shapes are reachable
        assert_eq!(seen.iter().filter(|s| s.is_generic()).count(), 7);

        let line = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        let rot = Rotation2::new(0.7);
        let rot = DMatrix::from_column_slice(2, 2, rot.matrix().as_slice());
        let moved = FullConfiguration::new(rot * line * 3.0).unwrap();
        assert_eq!(classify_shape(&moved, 2).unwrap(), ShapeSymbol::Syzygy(1));
    }

    #[test]
    fn symbols_round_trip_through_strings() {
        for s in [
            ShapeSymbol::Syzygy(2),
            ShapeSymbol::Convex(4),
            ShapeSymbol::Interior(1),
            ShapeSymbol::NonGeneric,
        ] {
            assert_eq!(s.to_string().parse::<ShapeSymbol>().unwrap(), s);
        }
        assert!("X1".parse::<ShapeSymbol>().is_err());
        assert!("7".parse::<ShapeSymbol>().is_err());
    }

    #[test]
    fn symbol_sequence_examples() {
        assert_eq!(symbol_sequence(&[]), "");
        let ev = |s, g| DegenerationEvent {
            t_star: 0.0,
            symbol: s,
            residual: 0.0,
            bracket: (0.0, 0.0),
            grazing: g,
        };
        let word = symbol_sequence(&[
            ev(ShapeSymbol::Convex(2), false),
            ev(ShapeSymbol::Interior(3), true),
            ev(ShapeSymbol::NonGeneric, false),
        ]);
        assert_eq!(word, "X2~I3?");
    }

    #[test]
    fn linear_determinant_path_has_one_event_at_zero() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let path = reduced_path(m.clone(), linspace(-1.0, 1.0, 20), |t| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, t]))
        })
        .unwrap();
        let events = scan_degenerations(&path, &m).unwrap();
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert!(e.t_star.abs() <= 1e-12);
        assert!(!e.grazing);
        assert!(e.bracket.0 <= e.t_star && e.t_star <= e.bracket.1);
    }

    #[test]
    fn node_on_the_locus_is_reported_once() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let path = reduced_path(m.clone(), linspace(-1.0, 1.0, 21), |t| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, t]))
        })
        .unwrap();
        let events = scan_degenerations(&path, &m).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].t_star, 0.0);
        assert!(!events[0].grazing);
    }

    #[test]
    fn tangency_is_flagged_as_grazing() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let path = reduced_path(m.clone(), linspace(-1.0, 1.3, 17), |t| {
            let x = (t - 0.1) * (t - 0.1);
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, x]))
        })
        .unwrap();
        let events = scan_degenerations(&path, &m).unwrap();
        assert_eq!(events.len(), 1, "{events:?}");
        assert!(events[0].grazing);
        assert!((events[0].t_star - 0.1).abs() < 1e-4);
        assert!(symbol_sequence(&events).starts_with('~'));
    }

    #[test]
    fn two_crossings_between_nodes_are_both_found() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        // roots at 0.45 and 0.55 with nodes every 0.25
        let path = reduced_path(m.clone(), linspace(-1.0, 1.0, 9), |t| {
            let x = (t - 0.45) * (t - 0.55);
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, x]))
        })
        .unwrap();
        let events = scan_degenerations(&path, &m).unwrap();
        let times: Vec<f64> = events.iter().map(|e| e.t_star).collect();
        assert_eq!(times.len(), 2, "{times:?}");
        assert!((times[0] - 0.45).abs() < 1e-10 && (times[1] - 0.55).abs() < 1e-10);
    }

    fn scenario_events(name: &str, periods: f64, dt: f64) -> Vec<DegenerationEvent> {
        use crate::dynamics::{integrate_refined, IntegratorConfig};
        use crate::potentials::PairPotentialSpec;
        let s = crate::scenarios::scenario(name, 0).unwrap();
        let mut cfg = IntegratorConfig::adaptive(periods * s.period.unwrap(), dt);
        cfg.precision = s.precision;
        let traj = integrate_refined(
            &s.state,
            s.correction.as_deref(),
            &s.mass,
            &PairPotentialSpec::Newtonian,
            &cfg,
        )
        .unwrap();
        scan_degenerations(&traj, &s.mass).unwrap()
    }

    #[test]
    fn rotating_triangle_never_degenerates() {
        assert!(scenario_events("lagrange_rotating", 1.0, 0.05).is_empty());
    }

    #[test]
    fn figure_eight_visits_every_syzygy_type() {
        let coarse = scenario_events("figure_eight", 1.0, 0.05);
        let fine = scenario_events("figure_eight", 1.0, 0.025);
        assert_eq!(coarse.len(), fine.len());
        for e in &coarse {
            assert!(e.residual <= 1e-9, "{e:?}");
            assert!(!e.grazing);
        }
        let word = symbol_sequence(&coarse);
        for k in ["1", "2", "3"] {
            assert!(word.contains(k), "{word}");
        }
    }
}
