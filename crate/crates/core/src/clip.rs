//! Cosmetic clipping of tract geometries to the state outline.
//!
//! Census tract polygons extend over water; trimming them to the state
//! shapefile keeps bays and shorelines legible on a map. Clipping never
//! feeds back into statistics: land areas always come from the attribute
//! table.

use geo::{BooleanOps, BoundingRect, Contains, Distance, Euclidean, Intersects};
use geo_types::{MultiPolygon, Point, Rect};
use thiserror::Error;

use crate::census::StateBoundary;

#[derive(Debug, Error)]
pub enum ClipError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// A state outline with precomputed edge boxes for the inland fast path.
pub struct PreparedBoundary {
    geometry: MultiPolygon<f64>,
    bbox: Rect<f64>,
    edge_boxes: Vec<Rect<f64>>,
}

impl PreparedBoundary {
    pub fn new(boundary: &StateBoundary) -> Result<Self, ClipError> {
        Self::from_geometry(boundary.geometry.clone())
    }

    pub fn from_geometry(geometry: MultiPolygon<f64>) -> Result<Self, ClipError> {
        let bbox = geometry
            .bounding_rect()
            .ok_or_else(|| ClipError::InvalidGeometry("empty boundary".to_string()))?;
        let mut edge_boxes = Vec::new();
        for polygon in &geometry {
            for ring in std::iter::once(polygon.exterior()).chain(polygon.interiors()) {
                for line in ring.lines() {
                    edge_boxes.push(line.bounding_rect());
                }
            }
        }
        Ok(PreparedBoundary {
            geometry,
            bbox,
            edge_boxes,
        })
    }

    pub fn geometry(&self) -> &MultiPolygon<f64> {
        &self.geometry
    }

    /// True when some boundary edge passes through `rect`. If none does,
    /// everything inside `rect` is uniformly inside or outside the state.
    fn crosses(&self, rect: &Rect<f64>) -> bool {
        self.edge_boxes.iter().any(|edge| edge.intersects(rect))
    }

    pub fn contains_point(&self, point: Point<f64>) -> bool {
        self.geometry.contains(&point)
    }
}

/// Intersect a tract geometry with the state outline.
///
/// Returns `None` when the tract lies entirely outside (the feature is
/// dropped downstream). Tracts whose bounding box no boundary edge touches
/// skip the intersection entirely: a point test settles which side they are
/// on, and fully inland ones are returned unchanged.
pub fn clip_to_state(
    geometry: &MultiPolygon<f64>,
    boundary: &PreparedBoundary,
) -> Result<Option<MultiPolygon<f64>>, ClipError> {
    let bbox = geometry
        .bounding_rect()
        .ok_or_else(|| ClipError::InvalidGeometry("empty tract geometry".to_string()))?;
    if !bbox.intersects(&boundary.bbox) {
        return Ok(None);
    }
    if !boundary.crosses(&bbox) {
        let sample = geometry.0[0].exterior().0[0];
        return Ok(if boundary.contains_point(sample.into()) {
            Some(geometry.clone())
        } else {
            None
        });
    }
    let clipped = boundary.geometry.intersection(geometry);
    Ok(if clipped.0.is_empty() {
        None
    } else {
        Some(clipped)
    })
}

/// Planar area of `part` relative to `whole` (1.0 when nothing was cut).
///
/// Computed in coordinate units; both shapes share the same distortion, so
/// the ratio is meaningful even unprojected.
pub fn area_fraction(part: &MultiPolygon<f64>, whole: &MultiPolygon<f64>) -> f64 {
    use geo::Area;
    let whole_area = whole.unsigned_area();
    if whole_area == 0.0 {
        return 0.0;
    }
    (part.unsigned_area() / whole_area).min(1.0)
}

/// Area of the symmetric difference; zero iff the shapes cover the same
/// region.
pub fn symmetric_difference_area(a: &MultiPolygon<f64>, b: &MultiPolygon<f64>) -> f64 {
    use geo::Area;
    a.xor(b).unsigned_area()
}

/// True when `point` is inside `geometry` or within `tolerance` of it.
pub fn point_within(geometry: &MultiPolygon<f64>, point: Point<f64>, tolerance: f64) -> bool {
    geometry.contains(&point) || Euclidean.distance(geometry, &point) <= tolerance
}
