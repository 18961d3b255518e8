//! Piecewise-constant bath topography: two two-cavity subsystems joined
//! through a shallow central cavity.
//!
//! Positions are in cm from the left end wall. The standard layout, left to
//! right, is
//!
//! ```text
//! outer_A | detector_A | inner_A | coupling_L | central | coupling_R | inner_B | detector_B | outer_B
//! ```
//!
//! The fluid depth over `detector_A` is the left setting α and over
//! `detector_B` the right setting β.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    OuterCavity,
    DetectorBarrier,
    InnerCavity,
    CouplingBarrier,
    CentralCavity,
}

/// Which subsystem a droplet or region belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn label(self) -> char {
        match self {
            Side::A => 'A',
            Side::B => 'B',
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// Coarse region label used by the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    OuterA,
    InnerA,
    OuterB,
    InnerB,
    Barrier,
    Central,
}

impl Region {
    pub fn is_cavity(self) -> bool {
        matches!(self, Region::OuterA | Region::InnerA | Region::OuterB | Region::InnerB)
    }

    /// The corresponding region on the other side of the bath.
    pub fn mirrored(self) -> Region {
        match self {
            Region::OuterA => Region::OuterB,
            Region::InnerA => Region::InnerB,
            Region::OuterB => Region::OuterA,
            Region::InnerB => Region::InnerA,
            other => other,
        }
    }

    fn cavity(kind: SegmentKind, side: Side) -> Region {
        match (kind, side) {
            (SegmentKind::OuterCavity, Side::A) => Region::OuterA,
            (SegmentKind::OuterCavity, Side::B) => Region::OuterB,
            (SegmentKind::InnerCavity, Side::A) => Region::InnerA,
            (SegmentKind::InnerCavity, Side::B) => Region::InnerB,
            (SegmentKind::CentralCavity, _) => Region::Central,
            _ => Region::Barrier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Side of the bath, `None` for the central cavity.
    pub side: Option<Side>,
    /// cm
    pub start: f64,
    /// cm
    pub length: f64,
    /// cm
    pub fluid_depth: f64,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    pub fn center(&self) -> f64 {
        self.start + 0.5 * self.length
    }
}

/// Lengths and depths of the standard layout. All values in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    /// Length L of each of the four (outer and inner) cavities.
    pub cavity_length: f64,
    pub cavity_depth: f64,
    /// Width shared by all four barriers.
    pub barrier_width: f64,
    /// Depth over the two barriers flanking the central cavity.
    pub coupling_depth: f64,
    pub central_length: f64,
    /// Central cavity depth d_c.
    pub central_depth: f64,
    /// Replace the coupling with a solid wall at the bath midpoint, giving two
    /// wave-isolated half-baths.
    #[serde(default)]
    pub decoupled: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            cavity_length: 1.0,
            cavity_depth: 0.5,
            barrier_width: 0.4,
            coupling_depth: 0.045,
            central_length: 0.4,
            central_depth: 0.5,
            decoupled: false,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("cavity_length", self.cavity_length),
            ("cavity_depth", self.cavity_depth),
            ("barrier_width", self.barrier_width),
            ("coupling_depth", self.coupling_depth),
            ("central_length", self.central_length),
            ("central_depth", self.central_depth),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {value}")));
            }
        }
        if self.coupling_depth > self.cavity_depth {
            return Err(Error::config(
                "coupling_depth",
                format!("{} exceeds the cavity depth {}", self.coupling_depth, self.cavity_depth),
            ));
        }
        Ok(())
    }
}

/// The four candidate barrier depths (a, a') on the left and (b, b') on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl BellSettings {
    pub fn validate(&self, layout: &LayoutConfig) -> Result<()> {
        for (field, value) in [("a", self.a), ("a_prime", self.a_prime), ("b", self.b), ("b_prime", self.b_prime)] {
            check_setting(field, value, layout)?;
        }
        Ok(())
    }

    /// Setting pairs in the order (a,b), (a',b), (a,b'), (a',b').
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [(self.a, self.b), (self.a_prime, self.b), (self.a, self.b_prime), (self.a_prime, self.b_prime)]
    }
}

impl Default for BellSettings {
    fn default() -> Self {
        Self { a: 0.099, a_prime: 0.075, b: 0.099, b_prime: 0.075 }
    }
}

fn check_setting(field: &str, value: f64, layout: &LayoutConfig) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::config(field, format!("barrier depth must be positive, got {value}")));
    }
    if value >= layout.cavity_depth {
        return Err(Error::config(
            field,
            format!("barrier depth {value} is not smaller than the cavity depth {}", layout.cavity_depth),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topography {
    segments: Vec<Segment>,
    total_length: f64,
    decoupled: bool,
}

/// Builds the nine-segment bath with detector depths `alpha` (left) and `beta` (right).
pub fn build_bath(alpha: f64, beta: f64, layout: &LayoutConfig) -> Result<Topography> {
    layout.validate()?;
    check_setting("alpha", alpha, layout)?;
    check_setting("beta", beta, layout)?;

    use SegmentKind::*;
    let l = layout;
    let plan = [
        (OuterCavity, Some(Side::A), l.cavity_length, l.cavity_depth),
        (DetectorBarrier, Some(Side::A), l.barrier_width, alpha),
        (InnerCavity, Some(Side::A), l.cavity_length, l.cavity_depth),
        (CouplingBarrier, Some(Side::A), l.barrier_width, l.coupling_depth),
        (CentralCavity, None, l.central_length, l.central_depth),
        (CouplingBarrier, Some(Side::B), l.barrier_width, l.coupling_depth),
        (InnerCavity, Some(Side::B), l.cavity_length, l.cavity_depth),
        (DetectorBarrier, Some(Side::B), l.barrier_width, beta),
        (OuterCavity, Some(Side::B), l.cavity_length, l.cavity_depth),
    ];
    let mut start = 0.0;
    let mut segments = Vec::with_capacity(plan.len());
    for (kind, side, length, fluid_depth) in plan {
        segments.push(Segment { kind, side, start, length, fluid_depth });
        start += length;
    }
    Ok(Topography { segments, total_length: start, decoupled: layout.decoupled })
}

impl Topography {
    /// Same nine-segment layout with a uniform depth everywhere; used for
    /// calibration against flat-bottom theory.
    pub fn flat(depth: f64, layout: &LayoutConfig) -> Result<Topography> {
        layout.validate()?;
        if !(depth.is_finite() && depth > 0.0) {
            return Err(Error::config("depth", format!("must be positive, got {depth}")));
        }
        let mut topo = build_bath(0.5 * layout.cavity_depth, 0.5 * layout.cavity_depth, layout)?;
        for seg in &mut topo.segments {
            seg.fluid_depth = depth;
        }
        Ok(topo)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * self.total_length
    }

    /// True when a solid wall separates the two halves of the bath.
    pub fn is_decoupled(&self) -> bool {
        self.decoupled
    }

    pub fn alpha(&self) -> f64 {
        self.segments[1].fluid_depth
    }

    pub fn beta(&self) -> f64 {
        self.segments[7].fluid_depth
    }

    pub fn outer_cavity(&self, side: Side) -> &Segment {
        match side {
            Side::A => &self.segments[0],
            Side::B => &self.segments[8],
        }
    }

    pub fn inner_cavity(&self, side: Side) -> &Segment {
        match side {
            Side::A => &self.segments[2],
            Side::B => &self.segments[6],
        }
    }

    /// Shallowest fluid depth anywhere in the bath.
    pub fn min_depth(&self) -> f64 {
        self.segments.iter().map(|s| s.fluid_depth).fold(f64::INFINITY, f64::min)
    }

    pub fn max_depth(&self) -> f64 {
        self.segments.iter().map(|s| s.fluid_depth).fold(0.0, f64::max)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x.is_finite() && (0.0..=self.total_length).contains(&x) {
            Ok(())
        } else {
            Err(Error::Domain { x, lo: 0.0, hi: self.total_length })
        }
    }

    /// Segment containing `x`, using half-open `[start, end)` intervals; the
    /// right wall belongs to the last segment.
    pub fn segment_at(&self, x: f64) -> Result<&Segment> {
        self.check_domain(x)?;
        let idx = self.segments.iter().position(|s| x < s.end()).unwrap_or(self.segments.len() - 1);
        Ok(&self.segments[idx])
    }

    pub fn depth_at(&self, x: f64) -> Result<f64> {
        Ok(self.segment_at(x)?.fluid_depth)
    }

    pub fn mirror(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.total_length - x)
    }

    pub fn classify(&self, x: f64) -> Result<Region> {
        let seg = self.segment_at(x)?;
        Ok(Region::cavity(seg.kind, seg.side.unwrap_or(Side::A)))
    }

    /// Classification by offset from the bath midpoint. Both signs of the
    /// offset are resolved on the left half of the layout, so `xi` and `-xi`
    /// give mirrored labels bit-for-bit.
    pub fn classify_offset(&self, xi: f64) -> Result<Region> {
        let half = self.midpoint();
        if !(xi.is_finite() && xi.abs() <= half) {
            return Err(Error::Domain { x: half + xi, lo: 0.0, hi: self.total_length });
        }
        let side = if xi < 0.0 { Side::A } else { Side::B };
        let left = half - xi.abs();
        let seg = self.segment_at(left)?;
        Ok(Region::cavity(seg.kind, side))
    }

    /// True when the depth profile is exactly symmetric about the midpoint.
    pub fn is_mirror_symmetric(&self) -> bool {
        let n = self.segments.len();
        (0..n / 2).all(|i| {
            let (l, r) = (&self.segments[i], &self.segments[n - 1 - i]);
            l.length == r.length && l.fluid_depth == r.fluid_depth
        })
    }
}
