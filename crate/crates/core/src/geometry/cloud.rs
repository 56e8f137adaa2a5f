use super::{Frame, RigidTransform, Vec3};
use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// An unorganized point cloud with optional per-point color and the sensor
/// origin it was captured from, all expressed in `frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    colors: Option<Vec<Rgb>>,
    viewpoint: Vec3,
    frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, viewpoint: Vec3, frame: Frame) -> Result<Self> {
        Self::build(points, None, viewpoint, frame)
    }

    pub fn with_colors(
        points: Vec<Vec3>,
        colors: Vec<Rgb>,
        viewpoint: Vec3,
        frame: Frame,
    ) -> Result<Self> {
        Self::build(points, Some(colors), viewpoint, frame)
    }

    pub fn build(
        points: Vec<Vec3>,
        colors: Option<Vec<Rgb>>,
        viewpoint: Vec3,
        frame: Frame,
    ) -> Result<Self> {
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} colors for {} points",
                    c.len(),
                    points.len()
                )));
            }
        }
        if let Some(i) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidArgument(format!("point {i} is not finite")));
        }
        if !is_finite(&viewpoint) {
            return Err(Error::InvalidArgument("viewpoint is not finite".into()));
        }
        Ok(Self {
            points,
            colors,
            viewpoint,
            frame,
        })
    }

    pub fn empty(viewpoint: Vec3, frame: Frame) -> Self {
        Self {
            points: Vec::new(),
            colors: None,
            viewpoint,
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn viewpoint(&self) -> &Vec3 {
        &self.viewpoint
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    /// Sub-cloud of the given indices, in the given order. Panics on an
    /// out-of-bounds index; callers validate first.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            viewpoint: self.viewpoint,
            frame: self.frame.clone(),
        }
    }

    /// Maps every point and the viewpoint through `t`. The cloud must be in
    /// `t`'s source frame.
    pub fn transformed(&self, t: &RigidTransform) -> Result<PointCloud> {
        if t.from_frame() != &self.frame {
            return Err(Error::FrameMismatch {
                expected: t.from_frame().clone(),
                found: self.frame.clone(),
            });
        }
        Ok(PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            colors: self.colors.clone(),
            viewpoint: t.apply(&self.viewpoint),
            frame: t.to_frame().clone(),
        })
    }

    /// Same points under a different frame label.
    pub fn relabeled(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Option<Vec<Rgb>>, Vec3, Frame) {
        (self.points, self.colors, self.viewpoint, self.frame)
    }
}

fn is_finite(p: &Vec3) -> bool {
    p.iter().all(|x| x.is_finite())
}
