//! Discrete "colors" that quantise a continuous material gradient, their
//! machine command states, traversal orders and zipper bands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::FractionVector;
use crate::profile::{MachineProfile, Syntax};

#[derive(Debug, Error, PartialEq)]
pub enum PaletteError {
    #[error("palette needs at least one color")]
    InvalidCount,
    #[error("{0} base materials are not supported (at most 3)")]
    Unsupported(usize),
    #[error("zipper overlap {beta} must be smaller than the interval width {alpha}")]
    BandOverlap { beta: f64, alpha: f64 },
    #[error("three-material palettes need a mixing machine, not {0:?}")]
    SyntaxMismatch(Syntax),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaletteKind {
    /// Two materials: one gradient coordinate split into N intervals.
    Line,
    /// Three materials: a barycentric triangle split into n² cells.
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub n: usize,
    pub materials: Vec<String>,
    pub kind: PaletteKind,
}

/// Machine state that realises one color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CommandState {
    Mix(Vec<f64>),
    Tool(usize),
    Temperature(f64),
}

/// Overlap bands centred on each interior palette boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipperSpec {
    pub beta: f64,
    pub bands: Vec<(f64, f64)>,
}

impl ZipperSpec {
    pub fn disabled() -> Self {
        Self { beta: 0.0, bands: Vec::new() }
    }

    pub fn is_active(&self) -> bool {
        self.beta > 0.0 && !self.bands.is_empty()
    }

    /// Iso-values that bound the bands.
    pub fn iso_values(&self) -> Vec<f64> {
        if !self.is_active() {
            return Vec::new();
        }
        self.bands.iter().flat_map(|&(lo, hi)| [lo, hi]).collect()
    }

    /// Band index `k` (between colors `k` and `k + 1`) containing `g`.
    pub fn band_of(&self, g: f64) -> Option<usize> {
        if !self.is_active() {
            return None;
        }
        self.bands.iter().position(|&(lo, hi)| g >= lo && g < hi)
    }
}

pub fn build_palette(n: usize, materials: &[String]) -> Result<Palette, PaletteError> {
    if n == 0 {
        return Err(PaletteError::InvalidCount);
    }
    let kind = match materials.len() {
        0..=2 => PaletteKind::Line,
        3 => PaletteKind::Triangle,
        k => return Err(PaletteError::Unsupported(k)),
    };
    Ok(Palette { n, materials: materials.to_vec(), kind })
}

impl Palette {
    pub fn color_count(&self) -> usize {
        match self.kind {
            PaletteKind::Line => self.n,
            PaletteKind::Triangle => self.n * self.n,
        }
    }

    /// Interval bandwidth in fraction space.
    pub fn alpha(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn boundaries(&self) -> Vec<f64> {
        (1..self.n).map(|k| k as f64 / self.n as f64).collect()
    }

    /// Gradient-coordinate midpoint of a color (line palettes).
    pub fn midpoint(&self, color: usize) -> f64 {
        match self.kind {
            PaletteKind::Line => (color as f64 + 0.5) / self.n as f64,
            PaletteKind::Triangle => {
                let c = self.composition(color);
                c[1] + c[2] / 2.0
            }
        }
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.color_count()).map(|k| self.midpoint(k)).collect()
    }

    /// Material fractions of a color, ordered like `materials`.
    pub fn composition(&self, color: usize) -> Vec<f64> {
        match self.kind {
            PaletteKind::Line => {
                let m = self.midpoint(color);
                if self.materials.len() < 2 {
                    vec![1.0]
                } else {
                    vec![1.0 - m, m]
                }
            }
            PaletteKind::Triangle => {
                let (r, i, up) = self.triangle_cell(color);
                let n = self.n as f64;
                let third = if up { 1.0 / 3.0 } else { 2.0 / 3.0 };
                let fa = (r as f64 + third) / n;
                let fb = (i as f64 + third) / n;
                vec![fa, fb, 1.0 - fa - fb]
            }
        }
    }

    /// Gradient coordinate of a fraction vector: the second material's share.
    pub fn gradient_coordinate(&self, f: &FractionVector) -> f64 {
        match self.materials.get(1) {
            Some(m) => f.get(m),
            None => 0.0,
        }
    }

    /// Half-open interval `[k/N, (k+1)/N)`, the last one closed.
    pub fn interval_of(&self, g: f64) -> usize {
        let k = (g * self.n as f64).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.n - 1)
        }
    }

    pub fn classify(&self, f: &FractionVector) -> usize {
        match self.kind {
            PaletteKind::Line => self.interval_of(self.gradient_coordinate(f)),
            PaletteKind::Triangle => {
                let v: Vec<f64> = self.materials.iter().map(|m| f.get(m)).collect();
                self.classify_barycentric(v[0], v[1], v[2])
            }
        }
    }

    /// Fractions whose iso-lines bound the palette cells, one list per
    /// contoured material. Line palettes contour the second material only.
    pub fn iso_lines(&self) -> Vec<(usize, Vec<f64>)> {
        match self.kind {
            PaletteKind::Line if self.materials.len() >= 2 => vec![(1, self.boundaries())],
            PaletteKind::Line => Vec::new(),
            PaletteKind::Triangle => (0..3).map(|m| (m, self.boundaries())).collect(),
        }
    }

    fn row_len(&self, r: usize) -> usize {
        2 * (self.n - r) - 1
    }

    fn row_offset(&self, r: usize) -> usize {
        (0..r).map(|s| self.row_len(s)).sum()
    }

    /// Row, column and orientation of a triangle cell.
    fn triangle_cell(&self, color: usize) -> (usize, usize, bool) {
        let mut r = 0;
        while color >= self.row_offset(r) + self.row_len(r) {
            r += 1;
        }
        let mut q = color - self.row_offset(r);
        if r % 2 == 1 {
            q = self.row_len(r) - 1 - q;
        }
        (r, q / 2, q % 2 == 0)
    }

    fn classify_barycentric(&self, fa: f64, fb: f64, fc: f64) -> usize {
        let n = self.n;
        let cap = |v: f64| ((v * n as f64).floor().max(0.0) as usize).min(n - 1);
        let (mut a, mut b, mut c) = (cap(fa), cap(fb), cap(fc));
        // Lattice points belong to the cell below them in the last coordinate.
        while a + b + c > n - 1 {
            if c > 0 {
                c -= 1;
            } else if b > 0 {
                b -= 1;
            } else {
                a -= 1;
            }
        }
        while a + b + c < n.saturating_sub(2) {
            c += 1;
        }
        let up = a + b + c == n - 1;
        let q = if up { 2 * b } else { 2 * b + 1 };
        let q = q.min(self.row_len(a) - 1);
        let pos = if a % 2 == 1 { self.row_len(a) - 1 - q } else { q };
        self.row_offset(a) + pos
    }

    /// Print order for a layer: ascending on even layers, reversed on odd ones.
    pub fn traversal_order(&self, layer_index: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.color_count()).collect();
        if layer_index % 2 == 1 {
            order.reverse();
        }
        order
    }

    pub fn map_color(&self, color: usize, profile: &MachineProfile) -> Result<CommandState, PaletteError> {
        if self.kind == PaletteKind::Triangle && profile.syntax != Syntax::Mix {
            return Err(PaletteError::SyntaxMismatch(profile.syntax));
        }
        let m = self.midpoint(color);
        Ok(match profile.syntax {
            Syntax::Mix => {
                let mut c = self.composition(color);
                while c.len() < profile.extruder_count.max(1) {
                    c.push(0.0);
                }
                CommandState::Mix(c)
            }
            Syntax::Multitool => {
                let tools = profile.tool_count.max(1);
                CommandState::Tool(((m * (tools - 1) as f64).round() as usize).min(tools - 1))
            }
            Syntax::Temperature => {
                let (lo, hi) = profile.temperature_range;
                CommandState::Temperature(lo + m * (hi - lo))
            }
        })
    }

    pub fn zipper_bands(&self, beta: f64) -> Result<ZipperSpec, PaletteError> {
        let alpha = self.alpha();
        if !(beta >= 0.0) || beta >= alpha {
            return Err(PaletteError::BandOverlap { beta, alpha });
        }
        Ok(ZipperSpec {
            beta,
            bands: self.boundaries().into_iter().map(|b| (b - beta / 2.0, b + beta / 2.0)).collect(),
        })
    }
}

impl CommandState {
    /// Position of the state along the 0..1 gradient used for previews.
    pub fn components(&self, profile: &MachineProfile) -> Vec<f64> {
        match self {
            CommandState::Mix(v) => v.clone(),
            CommandState::Tool(t) => {
                let m = if profile.tool_count > 1 { *t as f64 / (profile.tool_count - 1) as f64 } else { 0.0 };
                vec![1.0 - m, m]
            }
            CommandState::Temperature(t) => {
                let (lo, hi) = profile.temperature_range;
                let m = if hi > lo { ((t - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
                vec![1.0 - m, m]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two() -> Vec<String> {
        vec!["blue".into(), "yellow".into()]
    }

    fn frac(g: f64) -> FractionVector {
        FractionVector { entries: vec![("blue".into(), 1.0 - g), ("yellow".into(), g)] }
    }

    #[test]
    fn four_color_boundaries_and_midpoints() {
        let p = build_palette(4, &two()).unwrap();
        assert_eq!(p.boundaries(), vec![0.25, 0.5, 0.75]);
        assert_eq!(p.midpoints(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(p.alpha() * 4.0, 1.0);
    }

    #[test]
    fn single_color() {
        let p = build_palette(1, &two()).unwrap();
        assert!(p.boundaries().is_empty());
        assert_eq!(p.midpoints(), vec![0.5]);
        assert_eq!(p.traversal_order(0), vec![0]);
        assert_eq!(p.traversal_order(1), vec![0]);
        assert_eq!(build_palette(0, &two()), Err(PaletteError::InvalidCount));
    }

    #[test]
    fn half_open_intervals() {
        let p = build_palette(4, &two()).unwrap();
        assert_eq!(p.classify(&frac(0.25)), 1);
        assert_eq!(p.classify(&frac(0.0)), 0);
        assert_eq!(p.classify(&frac(1.0)), 3);
        assert_eq!(p.classify(&frac(0.7499999)), 2);
    }

    #[test]
    fn command_states() {
        let p = build_palette(2, &two()).unwrap();
        let mut prof = MachineProfile::temperature();
        prof.temperature_range = (190.0, 225.0);
        // n=2 -> midpoints 0.25 / 0.75; use n=1 for the 0.5 midpoint.
        let one = build_palette(1, &two()).unwrap();
        assert_eq!(one.map_color(0, &prof).unwrap(), CommandState::Temperature(207.5));
        let mix = MachineProfile::mixing();
        assert_eq!(p.map_color(1, &mix).unwrap(), CommandState::Mix(vec![0.25, 0.75]));
        let mut tools = MachineProfile::multitool();
        tools.tool_count = 5;
        // A single interval whose top is 1.0: midpoint 1.0 is reached as N grows; use n large.
        let fine = build_palette(1000, &two()).unwrap();
        assert_eq!(fine.map_color(999, &tools).unwrap(), CommandState::Tool(4));
        assert_eq!(fine.map_color(0, &tools).unwrap(), CommandState::Tool(0));
    }

    #[test]
    fn traversal_orders() {
        let p = build_palette(10, &two()).unwrap();
        assert_eq!(p.traversal_order(0), (0..10).collect::<Vec<_>>());
        assert_eq!(p.traversal_order(1), (0..10).rev().collect::<Vec<_>>());
        let four = vec!["a".to_string(), "b".into(), "c".into(), "d".into()];
        assert_eq!(build_palette(4, &four), Err(PaletteError::Unsupported(4)));
    }

    #[test]
    fn zipper_band_layout() {
        let p = build_palette(4, &two()).unwrap();
        let z = p.zipper_bands(0.1).unwrap();
        let expect = [(0.2, 0.3), (0.45, 0.55), (0.7, 0.8)];
        for (b, e) in z.bands.iter().zip(expect) {
            assert!((b.0 - e.0).abs() < 1e-12 && (b.1 - e.1).abs() < 1e-12);
        }
        let z0 = p.zipper_bands(0.0).unwrap();
        assert_eq!(z0.bands.len(), 3);
        assert!(z0.bands.iter().all(|b| b.0 == b.1));
        assert!(!z0.is_active());
        let two_colors = build_palette(2, &two()).unwrap().zipper_bands(0.15).unwrap();
        assert!((two_colors.bands[0].0 - 0.425).abs() < 1e-12 && (two_colors.bands[0].1 - 0.575).abs() < 1e-12);
        assert!(matches!(p.zipper_bands(0.25), Err(PaletteError::BandOverlap { .. })));
    }

    #[test]
    fn triangle_cells_round_trip() {
        let three = vec!["a".to_string(), "b".into(), "c".into()];
        for n in 1..7 {
            let p = build_palette(n, &three).unwrap();
            assert_eq!(p.color_count(), n * n);
            for k in 0..p.color_count() {
                let c = p.composition(k);
                assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(c.iter().all(|&v| v > 0.0));
                assert_eq!(p.classify_barycentric(c[0], c[1], c[2]), k, "n={n} k={k} c={c:?}");
            }
            for (a, b, c) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)] {
                assert!(p.classify_barycentric(a, b, c) < p.color_count());
            }
        }
    }

    #[test]
    fn triangle_serpentine_steps_are_neighbours() {
        let three = vec!["a".to_string(), "b".into(), "c".into()];
        let p = build_palette(5, &three).unwrap();
        let order = p.traversal_order(0);
        for w in order.windows(2) {
            let (a, b) = (p.composition(w[0]), p.composition(w[1]));
            let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(d <= 2.0 / 5.0 + 1e-12, "{a:?} -> {b:?}");
        }
        assert!(p.map_color(0, &MachineProfile::temperature()).is_err());
    }

    proptest! {
        #[test]
        fn map_color_is_monotone(n in 1usize..64, tools in 2usize..8) {
            let p = build_palette(n, &two()).unwrap();
            let mut t = MachineProfile::multitool();
            t.tool_count = tools;
            let temp = MachineProfile::temperature();
            let mix = MachineProfile::mixing();
            let mut last = (-1i64, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for k in 0..n {
                let CommandState::Tool(tool) = p.map_color(k, &t).unwrap() else { unreachable!() };
                let CommandState::Temperature(deg) = p.map_color(k, &temp).unwrap() else { unreachable!() };
                let CommandState::Mix(r) = p.map_color(k, &mix).unwrap() else { unreachable!() };
                prop_assert!(tool as i64 >= last.0 && deg >= last.1 && r[1] >= last.2);
                last = (tool as i64, deg, r[1]);
            }
        }

        #[test]
        fn traversal_visits_each_color_once_with_alpha_steps(n in 1usize..64, layer in 0usize..10) {
            let p = build_palette(n, &two()).unwrap();
            let order = p.traversal_order(layer);
            let mut seen = order.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            for w in order.windows(2) {
                prop_assert!(((p.midpoint(w[0]) - p.midpoint(w[1])).abs() - p.alpha()).abs() < 1e-12);
            }
            let next = p.traversal_order(layer + 1);
            prop_assert!((p.midpoint(*order.last().unwrap()) - p.midpoint(next[0])).abs() <= p.alpha() + 1e-12);
        }

        #[test]
        fn classification_matches_interval(n in 1usize..50, g in 0.0f64..=1.0) {
            let p = build_palette(n, &two()).unwrap();
            let k = p.classify(&frac(g));
            let lo = k as f64 / n as f64;
            let hi = (k + 1) as f64 / n as f64;
            prop_assert!(g >= lo - 1e-12 && (g < hi || k == n - 1));
        }
    }
}
