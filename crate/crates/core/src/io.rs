//! Reading and writing models, labels and meshes.
//!
//! Model files are plain text: `key = value` lines and blocks introduced by
//! `[name] rows cols` followed by that many comma-separated rows. Numbers are
//! written in shortest round-trip form, so reading back is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::{PointCloud, Side};
use crate::error::{Error, Result};
use crate::gluing::{ClosedFit, Glue, GlueJunction, PieceInfo};
use crate::hdmde::{Waj, ZReport};
use crate::interior::{regular_grid, GridLabels, Provenance};
use crate::pme::FitResult;
use crate::points::Points;
use crate::projection::ProjectionOptions;
use crate::spline::SplineMap;

/// Scalars and numeric blocks of one model file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sections {
    pub scalars: BTreeMap<String, String>,
    pub blocks: BTreeMap<String, DMatrix<f64>>,
}

impl Sections {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.scalars.insert(key.to_string(), value.to_string());
    }

    pub fn block(&mut self, name: &str, m: DMatrix<f64>) {
        self.blocks.insert(name.to_string(), m);
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .scalars
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing key '{key}'")))?;
        v.parse()
            .map_err(|_| Error::Format(format!("bad value for '{key}': {v:?}")))
    }

    pub fn get_block(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing block '{name}'")))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.scalars {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (name, m) in &self.blocks {
            let _ = writeln!(s, "[{name}] {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
                let _ = writeln!(s, "{}", row.join(","));
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Sections::default();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((i, raw)) = lines.next() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let (name, dims) = rest.split_once(']').ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: "unterminated block name".into(),
                })?;
                let dims: Vec<usize> = dims
                    .split_whitespace()
                    .map(|v| v.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: "block size must be two integers".into(),
                    })?;
                let [rows, cols] = dims[..] else {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "block size must be two integers".into(),
                    });
                };
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (j, row) = lines.next().ok_or_else(|| Error::Format(format!("block '{name}' is truncated")))?;
                    let vals: Vec<f64> = if cols == 0 {
                        Vec::new()
                    } else {
                        row.trim()
                            .split(',')
                            .map(|v| v.trim().parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| Error::Parse {
                                line: j + 1,
                                msg: format!("bad number in block '{name}'"),
                            })?
                    };
                    if vals.len() != cols {
                        return Err(Error::Format(format!(
                            "line {}: block '{name}' row has {} values, expected {cols}",
                            j + 1,
                            vals.len()
                        )));
                    }
                    data.extend(vals);
                }
                out.blocks.insert(name.to_string(), DMatrix::from_row_slice(rows, cols, &data));
            } else {
                let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: format!("expected 'key = value', got {line:?}"),
                })?;
                out.scalars.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_text())?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn points_block(p: &Points) -> DMatrix<f64> {
    DMatrix::from_row_slice(p.len(), p.dim(), p.as_slice())
}

fn check_kind(s: &Sections, kind: &str) -> Result<()> {
    let k: String = s.get("kind")?;
    if k != kind {
        return Err(Error::Format(format!("expected a {kind} file, found {k}")));
    }
    Ok(())
}

pub fn spline_sections(f: &SplineMap) -> Sections {
    let mut s = Sections::default();
    s.set("kind", "spline");
    s.set("d", f.intrinsic_dim());
    s.set("D", f.ambient_dim());
    s.set("nu", f.nu());
    s.block("knots", points_block(f.centers()));
    s.block("s", f.kernel_coefficients());
    s.block("a", f.affine_coefficients());
    s
}

pub fn spline_from_sections(s: &Sections) -> Result<SplineMap> {
    check_kind(s, "spline")?;
    let d: usize = s.get("d")?;
    let dim: usize = s.get("D")?;
    let knots = s.get_block("knots")?;
    if knots.ncols() != d {
        return Err(Error::Format("knot block width differs from d".into()));
    }
    let centers = Points::new(d, knots.transpose().as_slice().to_vec())?;
    let sm = s.get_block("s")?;
    let a = s.get_block("a")?;
    if sm.ncols() != dim || a.ncols() != dim {
        return Err(Error::Format("coefficient block width differs from D".into()));
    }
    let f = SplineMap::new(centers, sm, a)?;
    let nu: u32 = s.get("nu")?;
    if nu != f.nu() {
        return Err(Error::Format(format!("kernel order {nu} does not match d = {d}")));
    }
    Ok(f)
}

pub fn write_spline(f: &SplineMap, path: impl AsRef<Path>) -> Result<()> {
    spline_sections(f).write(path)
}

pub fn read_spline(path: impl AsRef<Path>) -> Result<SplineMap> {
    spline_from_sections(&Sections::read(path)?)
}

/// A fitted map with its run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredFit {
    pub f: SplineMap,
    pub lambda: f64,
    pub msd: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub fn write_fit(fit: &FitResult, path: impl AsRef<Path>) -> Result<()> {
    let mut s = spline_sections(&fit.f);
    s.set("kind", "fit");
    s.set("lambda", fit.lambda);
    s.set("msd", fit.msd);
    s.set("n_iter", fit.n_iter);
    s.set("converged", fit.converged);
    s.set("returned_iterate", fit.returned_iterate);
    if let Some(n) = &fit.note {
        s.set("note", n.replace('\n', " "));
    }
    let trace = &fit.weighted_msd_trace;
    s.block("weighted_msd_trace", DMatrix::from_column_slice(trace.len(), 1, trace));
    s.write(path)
}

pub fn read_fit(path: impl AsRef<Path>) -> Result<StoredFit> {
    let mut s = Sections::read(path)?;
    check_kind(&s, "fit")?;
    s.set("kind", "spline");
    Ok(StoredFit {
        f: spline_from_sections(&s)?,
        lambda: s.get("lambda")?,
        msd: s.get("msd")?,
        n_iter: s.get("n_iter")?,
        converged: s.get("converged")?,
        trace: s.get_block("weighted_msd_trace")?.iter().copied().collect(),
    })
}

/// Header values stored with a weighted average joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WajHeader {
    pub alpha: f64,
    pub n0: usize,
}

/// CSV with `# key = value` header lines and rows `μ_1, …, μ_D, θ`.
pub fn write_waj(w: &Waj, header: WajHeader, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# N = {}", w.n());
    let _ = writeln!(s, "# sigma = {}", w.sigma);
    let _ = writeln!(s, "# alpha = {}", header.alpha);
    let _ = writeln!(s, "# n0 = {}", header.n0);
    for (row, t) in w.nodes.rows().zip(&w.theta) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(t.to_string());
        let _ = writeln!(s, "{}", fields.join(","));
    }
    Ok(fs::write(path, s)?)
}

pub fn read_waj(path: impl AsRef<Path>) -> Result<(Waj, WajHeader)> {
    let text = fs::read_to_string(path)?;
    let mut header = Sections::default();
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.set(k.trim(), v.trim());
            }
        }
    }
    let cloud = crate::dataset::parse_point_cloud(&text, Default::default())?;
    let width = cloud.dim();
    if width < 2 {
        return Err(Error::Format("a WAJ row needs coordinates and a weight".into()));
    }
    let dim = width - 1;
    let mut nodes = Vec::with_capacity(cloud.len() * dim);
    let mut theta = Vec::with_capacity(cloud.len());
    for row in cloud.points.rows() {
        nodes.extend_from_slice(&row[..dim]);
        theta.push(row[dim]);
    }
    let n: usize = header.get("N")?;
    if n != theta.len() {
        return Err(Error::Format(format!("header says N = {n}, file has {} rows", theta.len())));
    }
    Ok((
        Waj {
            nodes: Points::new(dim, nodes)?,
            theta,
            sigma: header.get("sigma")?,
        },
        WajHeader {
            alpha: header.get("alpha")?,
            n0: header.get("n0")?,
        },
    ))
}

pub fn write_z_trace(trace: &[ZReport], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("# n,z,delta_bar,s_hat\n");
    for r in trace {
        let _ = writeln!(s, "{},{},{},{}", r.n, r.z, r.delta_bar, r.s_hat);
    }
    Ok(fs::write(path, s)?)
}

/// Points as CSV, with the slice id as an extra column when present.
pub fn write_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    for (i, row) in cloud.points.rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(sl) = &cloud.slice {
            fields.push(sl[i].to_string());
        }
        let _ = writeln!(s, "{}", fields.join(","));
    }
    Ok(fs::write(path, s)?)
}

pub fn write_points(p: &Points, path: impl AsRef<Path>) -> Result<()> {
    write_point_cloud(&PointCloud::new(p.clone())?, path)
}

fn junction_sections(j: &GlueJunction) -> Sections {
    let mut s = Sections::default();
    s.set("kind", "junction");
    s.set("d", j.d);
    s.set("g", j.g);
    s.block("R", j.r.clone());
    s.block(
        "bounds",
        DMatrix::from_fn(j.bounds.len(), 2, |r, c| if c == 0 { j.bounds[r].0 } else { j.bounds[r].1 }),
    );
    s.block("anchors", DMatrix::from_fn(2, j.xi1.len(), |r, c| if r == 0 { j.xi1[c] } else { j.xi2[c] }));
    s.block("rotated", points_block(&j.rotated));
    s
}

fn junction_from_sections(s: &Sections) -> Result<GlueJunction> {
    check_kind(s, "junction")?;
    let b = s.get_block("bounds")?;
    let a = s.get_block("anchors")?;
    let rot = s.get_block("rotated")?;
    let j = GlueJunction {
        r: s.get_block("R")?.clone(),
        d: s.get("d")?,
        g: s.get("g")?,
        bounds: (0..b.nrows()).map(|r| (b[(r, 0)], b[(r, 1)])).collect(),
        xi1: a.row(0).iter().copied().collect(),
        xi2: a.row(1).iter().copied().collect(),
        rotated: Points::new(rot.ncols(), rot.transpose().as_slice().to_vec())?,
    };
    if j.g >= j.d || j.bounds.len() != j.d || j.r.nrows() != j.r.ncols() || j.rotated.dim() != j.r.nrows() {
        return Err(Error::Format("inconsistent junction file".into()));
    }
    Ok(j)
}

/// Writes `ring.txt`, `piece_<k>.txt` and `junction_<k>.txt` into `dir`.
pub fn write_closed_fit(cf: &ClosedFit, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let n = cf.len();
    let mut ring = Sections::default();
    ring.set("kind", "ring");
    ring.set("pieces", n);
    ring.block(
        "info",
        DMatrix::from_fn(n, 5, |k, c| {
            let i = &cf.info[k];
            match c {
                0 => i.lambda,
                1 => i.msd,
                2 => i.n_iter as f64,
                3 => i.converged as u8 as f64,
                _ => i.points as f64,
            }
        }),
    );
    let dim = cf.sector_boxes.first().map_or(0, |b| b.len());
    ring.block(
        "sector_boxes",
        DMatrix::from_fn(n, 2 * dim, |k, c| {
            let (lo, hi) = cf.sector_boxes[k][c / 2];
            if c % 2 == 0 { lo } else { hi }
        }),
    );
    ring.block(
        "partition",
        DMatrix::from_iterator(cf.partition.len(), 1, cf.partition.iter().map(|&p| p as f64)),
    );
    ring.write(dir.join("ring.txt"))?;
    for k in 0..n {
        write_spline(&cf.pieces[k], dir.join(format!("piece_{k}.txt")))?;
        junction_sections(&cf.junctions[k]).write(dir.join(format!("junction_{k}.txt")))?;
    }
    Ok(())
}

pub fn read_closed_fit(dir: impl AsRef<Path>) -> Result<ClosedFit> {
    let dir = dir.as_ref();
    let ring = Sections::read(dir.join("ring.txt"))?;
    check_kind(&ring, "ring")?;
    let n: usize = ring.get("pieces")?;
    let info = ring.get_block("info")?;
    let boxes = ring.get_block("sector_boxes")?;
    if info.nrows() != n || boxes.nrows() != n {
        return Err(Error::Format("ring manifest rows differ from the piece count".into()));
    }
    let mut pieces = Vec::with_capacity(n);
    let mut junctions = Vec::with_capacity(n);
    for k in 0..n {
        pieces.push(read_spline(dir.join(format!("piece_{k}.txt")))?);
        junctions.push(junction_from_sections(&Sections::read(dir.join(format!("junction_{k}.txt")))?)?);
    }
    Ok(ClosedFit {
        pieces,
        junctions,
        partition: ring.get_block("partition")?.iter().map(|&v| v as usize).collect(),
        sector_boxes: (0..n)
            .map(|k| (0..boxes.ncols() / 2).map(|a| (boxes[(k, 2 * a)], boxes[(k, 2 * a + 1)])).collect())
            .collect(),
        info: (0..n)
            .map(|k| PieceInfo {
                lambda: info[(k, 0)],
                msd: info[(k, 1)],
                n_iter: info[(k, 2)] as usize,
                converged: info[(k, 3)] != 0.0,
                points: info[(k, 4)] as usize,
            })
            .collect(),
    })
}

/// CSV rows `ξ_1, …, ξ_D, label, provenance`.
pub fn write_labels(labels: &GridLabels, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    for i in 0..labels.len() {
        let mut fields: Vec<String> = labels.points.row(i).iter().map(|v| v.to_string()).collect();
        fields.push(labels.labels[i].as_str().to_string());
        fields.push(labels.provenance[i].as_str().to_string());
        let _ = writeln!(s, "{}", fields.join(","));
    }
    Ok(fs::write(path, s)?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<GridLabels> {
    let text = fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut provenance = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 || *dim.get_or_insert(fields.len() - 2) != fields.len() - 2 {
            return Err(Error::Format(format!("line {}: unexpected field count", i + 1)));
        }
        for f in &fields[..fields.len() - 2] {
            data.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("not a number: {f:?}"),
            })?);
        }
        labels.push(fields[fields.len() - 2].parse::<Side>()?);
        provenance.push(fields[fields.len() - 1].parse::<Provenance>()?);
    }
    let dim = dim.ok_or_else(|| Error::Format("no data rows".into()))?;
    Ok(GridLabels {
        points: Points::new(dim, data)?,
        labels,
        provenance,
    })
}

/// A triangle mesh in 3-D.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// 0-based vertex indices.
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Triangulates a `nu × nv` vertex grid (row-major, `v` fastest); a quad
    /// with any missing corner is skipped.
    fn from_grid(values: Vec<Option<[f64; 3]>>, nu: usize, nv: usize) -> Self {
        let mut index = vec![usize::MAX; values.len()];
        let mut vertices = Vec::new();
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                index[i] = vertices.len();
                vertices.push(*v);
            }
        }
        let mut faces = Vec::new();
        for a in 0..nu.saturating_sub(1) {
            for b in 0..nv.saturating_sub(1) {
                let q = [a * nv + b, a * nv + b + 1, (a + 1) * nv + b, (a + 1) * nv + b + 1];
                if q.iter().any(|&i| index[i] == usize::MAX) {
                    continue;
                }
                faces.push([index[q[0]], index[q[2]], index[q[1]]]);
                faces.push([index[q[1]], index[q[2]], index[q[3]]]);
            }
        }
        Mesh { vertices, faces }
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }

    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut m = Mesh::default();
        for (i, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let bad = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            match it.next() {
                Some("v") => {
                    let v: Vec<f64> = it.map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad vertex"))?;
                    let [x, y, z] = v[..] else { return Err(bad("vertex needs 3 coordinates")) };
                    m.vertices.push([x, y, z]);
                }
                Some("f") => {
                    let f: Vec<usize> = it.map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad face"))?;
                    let [a, b, c] = f[..] else { return Err(bad("face needs 3 indices")) };
                    if [a, b, c].iter().any(|&k| k == 0 || k > m.vertices.len()) {
                        return Err(bad("face index out of range"));
                    }
                    m.faces.push([a - 1, b - 1, c - 1]);
                }
                None => {}
                Some(t) if t.starts_with('#') => {}
                Some(t) => return Err(bad(&format!("unknown record '{t}'"))),
            }
        }
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_obj())?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_obj(&fs::read_to_string(path)?)
    }
}

/// `f` on a `res × res` grid over its knot bounding box.
pub fn spline_mesh(f: &SplineMap, res: usize) -> Result<Mesh> {
    if f.intrinsic_dim() != 2 || f.ambient_dim() != 3 {
        return Err(Error::Unsupported(format!(
            "meshes need d = 2 and D = 3, got d = {} and D = {}",
            f.intrinsic_dim(),
            f.ambient_dim()
        )));
    }
    let b = f.knot_bounds().ok_or_else(|| Error::invalid("map has no knots to bound the mesh"))?;
    spline_mesh_over(f, &b, res)
}

pub fn spline_mesh_over(f: &SplineMap, bounds: &[(f64, f64)], res: usize) -> Result<Mesh> {
    if f.intrinsic_dim() != 2 || f.ambient_dim() != 3 {
        return Err(Error::Unsupported("meshes need d = 2 and D = 3".into()));
    }
    if res < 2 {
        return Err(Error::invalid("mesh resolution must be at least 2"));
    }
    let grid = regular_grid(bounds, &[res, res])?;
    let values = grid
        .rows()
        .map(|t| {
            let v = f.eval(t);
            Some([v[0], v[1], v[2]])
        })
        .collect();
    Ok(Mesh::from_grid(values, res, res))
}

/// One mesh per junction of a closed fit: the glued map on a `res × res`
/// grid over the junction's chart box. Grid nodes where a chart cannot be
/// inverted are left out.
pub fn closed_fit_meshes(cf: &ClosedFit, res: usize, opts: &ProjectionOptions) -> Result<Vec<Mesh>> {
    let n = cf.len();
    (0..n)
        .map(|k| {
            let j = &cf.junctions[k];
            if j.d != 2 || j.ambient_dim() != 3 {
                return Err(Error::Unsupported("meshes need d = 2 and D = 3".into()));
            }
            if res < 2 {
                return Err(Error::invalid("mesh resolution must be at least 2"));
            }
            let glue = Glue::new(&cf.pieces[k], &cf.pieces[(k + 1) % n], j, opts)?;
            let grid = regular_grid(&j.bounds, &[res, res])?;
            let values = grid
                .rows()
                .map(|z| glue.eval(z).ok().map(|v| [v[0], v[1], v[2]]))
                .collect();
            Ok(Mesh::from_grid(values, res, res))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_round_trip() {
        let mut s = Sections::default();
        s.set("kind", "x");
        s.set("lambda", 0.1f64 + 0.2);
        s.block("m", DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, -2.5e-300, f64::MAX, 0.0]));
        let back = Sections::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get::<f64>("lambda").unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn truncated_block_is_an_error() {
        let e = Sections::parse("[m] 2 2\n1,2\n").unwrap_err();
        assert!(matches!(e, Error::Format(_)));
        let e = Sections::parse("[m] 1 2\n1,x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn affine_mesh_on_two_by_two_grid() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let f = SplineMap::affine(&a).unwrap();
        let m = spline_mesh_over(&f, &[(0.0, 1.0), (0.0, 1.0)], 2).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.faces.len(), 2);
        assert_eq!(Mesh::parse_obj(&m.to_obj()).unwrap(), m);
    }

    #[test]
    fn mesh_needs_a_surface() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let f = SplineMap::affine(&a).unwrap();
        assert!(matches!(spline_mesh_over(&f, &[(0.0, 1.0)], 3), Err(Error::Unsupported(_))));
    }
}
