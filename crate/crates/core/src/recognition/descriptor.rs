use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use super::lrf::frame_from_neighbors;
use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud, Vec3};
use crate::perception::NormalField;

pub const LOCAL_BINS: usize = 352;
pub const GLOBAL_BINS: usize = 308;

const AZIMUTH: usize = 8;
const ELEVATION: usize = 2;
const RADIAL: usize = 2;
const COS_BINS: usize = 11;
const ANGLE_BINS: usize = 45;
const DISTANCE_BINS: usize = 45;
const VIEW_BINS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    Local,
    Global,
}

impl DescriptorKind {
    pub fn len(self) -> usize {
        match self {
            DescriptorKind::Local => LOCAL_BINS,
            DescriptorKind::Global => GLOBAL_BINS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorKind::Local => "local",
            DescriptorKind::Global => "global",
        }
    }
}

/// A non-negative histogram that sums to one, or is all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    kind: DescriptorKind,
    bins: Vec<f64>,
}

impl Descriptor {
    /// Validates length and sign, then L1-normalizes.
    pub fn new(kind: DescriptorKind, mut bins: Vec<f64>) -> Result<Self> {
        if bins.len() != kind.len() {
            return Err(Error::DescriptorMismatch(format!(
                "{} descriptor needs {} bins, got {}",
                kind.as_str(),
                kind.len(),
                bins.len()
            )));
        }
        if bins.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidArgument("descriptor bins must be finite and non-negative".into()));
        }
        normalize(&mut bins);
        Ok(Self { kind, bins })
    }

    pub fn zeros(kind: DescriptorKind) -> Self {
        Self {
            kind,
            bins: vec![0.0; kind.len()],
        }
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn is_zero(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }

    /// Histogram intersection `Σ min(aᵢ, bᵢ)`, in `[0, 1]`.
    pub fn intersection(&self, other: &Descriptor) -> Result<f64> {
        if self.kind != other.kind || self.bins.len() != other.bins.len() {
            return Err(Error::DescriptorMismatch(format!(
                "cannot compare {} ({}) with {} ({})",
                self.kind.as_str(),
                self.bins.len(),
                other.kind.as_str(),
                other.bins.len()
            )));
        }
        Ok(self.bins.iter().zip(&other.bins).map(|(a, b)| a.min(*b)).sum())
    }

    /// `1 - intersection`.
    pub fn distance(&self, other: &Descriptor) -> Result<f64> {
        Ok(1.0 - self.intersection(other)?)
    }
}

fn normalize(bins: &mut [f64]) {
    let total: f64 = bins.iter().sum();
    if total > 0.0 {
        bins.iter_mut().for_each(|b| *b /= total);
    }
}

/// Splits unit weight between the two bins whose centers bracket `u`,
/// where `u` is measured in bin widths from the start of the range.
/// Values beyond the outer centers go wholly to the edge bin, unless
/// `circular`.
fn soft_bin(u: f64, n: usize, circular: bool) -> [(usize, f64); 2] {
    let x = u - 0.5;
    let lo = x.floor();
    let frac = x - lo;
    let lo = lo as i64;
    let n_i = n as i64;
    if circular {
        let a = lo.rem_euclid(n_i) as usize;
        let b = (lo + 1).rem_euclid(n_i) as usize;
        [(a, 1.0 - frac), (b, frac)]
    } else if lo < 0 {
        [(0, 1.0), (0, 0.0)]
    } else if lo >= n_i - 1 {
        [(n - 1, 1.0), (n - 1, 0.0)]
    } else {
        [(lo as usize, 1.0 - frac), (lo as usize + 1, frac)]
    }
}

/// Local descriptor computation sharing one neighbor index across keypoints.
pub(crate) struct LocalDescriber<'a> {
    cloud: &'a PointCloud,
    normals: &'a NormalField,
    index: NeighborIndex,
}

impl<'a> LocalDescriber<'a> {
    pub(crate) fn new(cloud: &'a PointCloud, normals: &'a NormalField) -> Result<Self> {
        if normals.len() != cloud.len() {
            return Err(Error::InvalidArgument(format!(
                "{} normals for {} points",
                normals.len(),
                cloud.len()
            )));
        }
        Ok(Self {
            cloud,
            normals,
            index: NeighborIndex::new(cloud.points()),
        })
    }

    pub(crate) fn describe(&self, keypoint: &Vec3, radius: f64) -> Result<Descriptor> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("support radius must be positive, got {radius}")));
        }
        let neighbors = self.index.radius_search(keypoint, radius);
        if neighbors.is_empty() {
            return Ok(Descriptor::zeros(DescriptorKind::Local));
        }
        let points = self.cloud.points();
        let frame = frame_from_neighbors(points, &neighbors, keypoint, radius, self.cloud.viewpoint())?;
        let z = frame.axes[2];
        let mut bins = vec![0.0; LOCAL_BINS];
        for &i in &neighbors {
            if self.normals.is_degenerate(i) {
                continue;
            }
            let q = frame.to_local(&points[i]);
            let r = q.norm();
            let cos = self.normals.normals()[i].dot(&z).clamp(-1.0, 1.0);
            let azimuth = q.y.atan2(q.x);
            let elevation = if r > 0.0 { (q.z / r).clamp(-1.0, 1.0).asin() } else { 0.0 };
            let az = soft_bin((azimuth + PI) / (2.0 * PI) * AZIMUTH as f64, AZIMUTH, true);
            let el = soft_bin((elevation + PI / 2.0) / PI * ELEVATION as f64, ELEVATION, false);
            let rad = soft_bin(r / radius * RADIAL as f64, RADIAL, false);
            let cb = soft_bin((cos + 1.0) / 2.0 * COS_BINS as f64, COS_BINS, false);
            for (a, wa) in az {
                for (e, we) in el {
                    for (s, ws) in rad {
                        let sector = (a * ELEVATION + e) * RADIAL + s;
                        for (k, wk) in cb {
                            bins[sector * COS_BINS + k] += wa * we * ws * wk;
                        }
                    }
                }
            }
        }
        Descriptor::new(DescriptorKind::Local, bins)
    }
}

/// Signature-of-histograms descriptor at `keypoint`: the support sphere is
/// split into 8 azimuth × 2 elevation × 2 radial sectors of the local frame,
/// each holding an 11-bin histogram of the cosine between point normals
/// and the frame's z axis. Every point's unit weight is spread linearly over
/// neighboring sectors and cosine bins. Degenerate normals are skipped.
pub fn local_descriptor(c: &PointCloud, normals: &NormalField, keypoint: &Vec3, radius: f64) -> Result<Descriptor> {
    LocalDescriber::new(c, normals)?.describe(keypoint, radius)
}

/// Viewpoint feature histogram of a whole cluster.
///
/// Relative to a frame at the centroid whose u axis is the mean normal,
/// each point contributes three angular features (45 bins each), its
/// normalized distance from the centroid (45 bins), and the cosine between
/// its normal and the centroid-to-viewpoint direction (128 bins). Each
/// block is normalized separately before the whole is L1-normalized.
pub fn global_descriptor(c: &PointCloud, normals: &NormalField) -> Result<Descriptor> {
    if c.is_empty() {
        return Err(Error::Empty("cannot describe an empty cloud"));
    }
    if normals.len() != c.len() {
        return Err(Error::InvalidArgument(format!("{} normals for {} points", normals.len(), c.len())));
    }
    let valid: Vec<usize> = (0..c.len()).filter(|&i| !normals.is_degenerate(i)).collect();
    if valid.is_empty() {
        return Ok(Descriptor::zeros(DescriptorKind::Global));
    }
    let points = c.points();
    let ns = normals.normals();
    let n = valid.len() as f64;
    let centroid = valid.iter().fold(Vec3::zeros(), |a, &i| a + points[i]) / n;
    let to_view = c.viewpoint() - centroid;
    let view_dir = to_view.try_normalize(1e-12).unwrap_or_else(Vec3::z);
    let u = (valid.iter().fold(Vec3::zeros(), |a, &i| a + ns[i]) / n)
        .try_normalize(1e-9)
        .unwrap_or(view_dir);
    let max_dist = valid
        .iter()
        .map(|&i| (points[i] - centroid).norm())
        .fold(0.0, f64::max);

    let mut alpha = vec![0.0; ANGLE_BINS];
    let mut phi = vec![0.0; ANGLE_BINS];
    let mut theta = vec![0.0; ANGLE_BINS];
    let mut dist = vec![0.0; DISTANCE_BINS];
    let mut view = vec![0.0; VIEW_BINS];
    let add = |hist: &mut [f64], u: f64| {
        for (b, w) in soft_bin(u * hist.len() as f64, hist.len(), false) {
            hist[b] += w;
        }
    };
    for &i in &valid {
        let nrm = ns[i];
        let d = points[i] - centroid;
        let len = d.norm();
        let dir = if len > 0.0 { d / len } else { Vec3::zeros() };
        let v = dir.cross(&u).try_normalize(1e-12).unwrap_or_else(|| any_perpendicular(&u));
        let w = u.cross(&v);
        add(&mut alpha, (v.dot(&nrm).clamp(-1.0, 1.0) + 1.0) / 2.0);
        add(&mut phi, (u.dot(&dir).clamp(-1.0, 1.0) + 1.0) / 2.0);
        add(&mut theta, (w.dot(&nrm).atan2(u.dot(&nrm)) + PI) / (2.0 * PI));
        add(&mut dist, if max_dist > 0.0 { len / max_dist } else { 0.0 });
        add(&mut view, (nrm.dot(&view_dir).clamp(-1.0, 1.0) + 1.0) / 2.0);
    }
    let mut bins = Vec::with_capacity(GLOBAL_BINS);
    for mut block in [alpha, phi, theta, dist, view] {
        normalize(&mut block);
        bins.extend(block);
    }
    Descriptor::new(DescriptorKind::Global, bins)
}

fn any_perpendicular(u: &Vec3) -> Vec3 {
    let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    u.cross(&helper).normalize()
}

/// `descriptor v1 kind=<local|global> bins=<n>` followed by one value per line.
pub fn format_descriptor(d: &Descriptor) -> String {
    let mut s = format!("descriptor v1 kind={} bins={}\n", d.kind.as_str(), d.bins.len());
    for b in &d.bins {
        let _ = writeln!(s, "{b}");
    }
    s
}

pub fn parse_descriptor(text: &str) -> Result<Descriptor> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing descriptor header"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let kind = match tokens.as_slice() {
        ["descriptor", "v1", kind, bins] => {
            let kind = match *kind {
                "kind=local" => DescriptorKind::Local,
                "kind=global" => DescriptorKind::Global,
                _ => return Err(Error::parse(1, format!("unknown descriptor `{kind}`"))),
            };
            if bins.strip_prefix("bins=") != Some(&kind.len().to_string()) {
                return Err(Error::parse(1, format!("{} descriptor must have bins={}", kind.as_str(), kind.len())));
            }
            kind
        }
        _ => return Err(Error::parse(1, "expected `descriptor v1 kind=<kind> bins=<n>`")),
    };
    let values = lines
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::parse(i + 1, format!("bad bin value `{}`", l.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != kind.len() {
        return Err(Error::parse(1, format!("expected {} values, found {}", kind.len(), values.len())));
    }
    // Stored values are already normalized; keep them bit-exact.
    Ok(Descriptor { kind, bins: values })
}

pub fn read_descriptor(path: impl AsRef<Path>) -> Result<Descriptor> {
    let path = path.as_ref();
    parse_descriptor(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_descriptor(path: impl AsRef<Path>, d: &Descriptor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_descriptor(d)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_bin_weights() {
        // Centers sit at 0.5, 1.5, ...
        assert_eq!(soft_bin(0.5, 4, false), [(0, 1.0), (1, 0.0)]);
        assert_eq!(soft_bin(1.0, 4, false), [(0, 0.5), (1, 0.5)]);
        assert_eq!(soft_bin(0.1, 4, false), [(0, 1.0), (0, 0.0)]);
        assert_eq!(soft_bin(3.9, 4, false), [(3, 1.0), (3, 0.0)]);
        assert_eq!(soft_bin(0.0, 4, true), [(3, 0.5), (0, 0.5)]);
        assert_eq!(soft_bin(4.0, 4, true), [(3, 0.5), (0, 0.5)]);
    }

    #[test]
    fn intersection_rules() {
        let mut a = vec![0.0; GLOBAL_BINS];
        a[0] = 3.0;
        a[1] = 1.0;
        let a = Descriptor::new(DescriptorKind::Global, a).unwrap();
        assert_eq!(a.bins()[0], 0.75);
        assert_eq!(a.intersection(&a).unwrap(), 1.0);
        let z = Descriptor::zeros(DescriptorKind::Global);
        assert_eq!(a.intersection(&z).unwrap(), 0.0);
        let l = Descriptor::zeros(DescriptorKind::Local);
        assert!(matches!(a.intersection(&l), Err(Error::DescriptorMismatch(_))));
        assert!(Descriptor::new(DescriptorKind::Local, vec![1.0; 10]).is_err());
    }

    #[test]
    fn descriptor_file_round_trip() {
        let bins: Vec<f64> = (0..GLOBAL_BINS).map(|i| (i % 7) as f64).collect();
        let d = Descriptor::new(DescriptorKind::Global, bins).unwrap();
        assert_eq!(parse_descriptor(&format_descriptor(&d)).unwrap(), d);
        assert!(parse_descriptor("descriptor v1 kind=global bins=5\n1\n").is_err());
        assert!(parse_descriptor("descriptor v1 kind=local bins=352\n1\n").is_err());
    }
}
