//! Dividing sets on a marked rectangle and bypass rewriting.
//!
//! Chord endpoints live on the bottom and top edges. Positions run
//! counterclockwise: bottom edge left to right (`B0 … B(k−1)`), then top edge
//! right to left (`T(m−1) … T0`). Gap `g` is the stretch of boundary between
//! positions `g − 1` and `g`; gap 0 contains the left side and gap `k` the
//! right side. Regions of the complement are identified by the gaps they
//! touch, and closed loops are anchored at a gap of the region holding them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Slice2D;

/// Sign of a region: R₊ or R₋.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// A closed dividing curve with the loops it encloses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopTree {
    pub children: Vec<LoopTree>,
}

impl LoopTree {
    pub fn leaf() -> Self {
        LoopTree { children: Vec::new() }
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(LoopTree::count).sum::<usize>()
    }

    /// Parenthesized encoding with children in sorted order.
    pub fn canonical(&self) -> String {
        let mut kids: Vec<String> = self.children.iter().map(LoopTree::canonical).collect();
        kids.sort();
        format!("({})", kids.concat())
    }

    fn parse(s: &str) -> Result<Vec<LoopTree>> {
        let mut stack: Vec<Vec<LoopTree>> = vec![Vec::new()];
        for ch in s.chars() {
            match ch {
                '(' => stack.push(Vec::new()),
                ')' => {
                    let children = stack.pop().filter(|_| !stack.is_empty());
                    let children = children.ok_or_else(|| Error::Parse("unbalanced loop tree".into()))?;
                    stack
                        .last_mut()
                        .ok_or_else(|| Error::Parse("unbalanced loop tree".into()))?
                        .push(LoopTree { children });
                }
                c if c.is_whitespace() => {}
                c => return Err(Error::Parse(format!("unexpected {c:?} in loop tree"))),
            }
        }
        if stack.len() != 1 {
            return Err(Error::Parse("unbalanced loop tree".into()));
        }
        Ok(stack.pop().unwrap())
    }
}

/// Which way bypass rewiring turns. Mirroring the rectangle flips it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Handed {
    Positive,
    Negative,
}

impl Handed {
    pub fn flip(self) -> Handed {
        match self {
            Handed::Positive => Handed::Negative,
            Handed::Negative => Handed::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DividingSet {
    bottom: usize,
    top: usize,
    /// partner[i] is the position joined to position i.
    partner: Vec<usize>,
    loops: Vec<(usize, LoopTree)>,
    /// Sign of the region containing gap 0.
    color: Sign,
    handed: Handed,
}

/// An arc from the region at one gap to the region at another, crossing
/// only the chords that separate them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttachingArc {
    pub from_gap: usize,
    pub to_gap: usize,
}

impl AttachingArc {
    pub fn new(from_gap: usize, to_gap: usize) -> Self {
        AttachingArc { from_gap, to_gap }
    }
}

/// Label of a boundary position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Bottom(usize),
    Top(usize),
}

impl Endpoint {
    fn rank(self) -> (u8, usize) {
        match self {
            Endpoint::Top(i) => (0, i),
            Endpoint::Bottom(i) => (1, i),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Bottom(i) => write!(f, "B{i}"),
            Endpoint::Top(i) => write!(f, "T{i}"),
        }
    }
}

impl std::str::FromStr for Endpoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, num) = s.split_at(1.min(s.len()));
        let i: usize = num.parse().map_err(|_| Error::Parse(format!("bad endpoint {s:?}")))?;
        match kind {
            "B" | "b" => Ok(Endpoint::Bottom(i)),
            "T" | "t" => Ok(Endpoint::Top(i)),
            _ => Err(Error::Parse(format!("bad endpoint {s:?}"))),
        }
    }
}

impl DividingSet {
    /// Builds a dividing set from chords given by endpoint labels.
    pub fn new(bottom: usize, top: usize, chords: &[(Endpoint, Endpoint)]) -> Result<Self> {
        let n = bottom + top;
        let mut partner = vec![usize::MAX; n];
        let pos = |e: Endpoint| -> Result<usize> {
            match e {
                Endpoint::Bottom(i) if i < bottom => Ok(i),
                Endpoint::Top(i) if i < top => Ok(n - 1 - i),
                _ => Err(Error::InvalidDividingSet(format!("endpoint {e} out of range"))),
            }
        };
        for &(a, b) in chords {
            let (i, j) = (pos(a)?, pos(b)?);
            if i == j || partner[i] != usize::MAX || partner[j] != usize::MAX {
                return Err(Error::InvalidDividingSet(format!("endpoint reused in chord {a}–{b}")));
            }
            partner[i] = j;
            partner[j] = i;
        }
        Self::from_partner(bottom, top, partner, Vec::new(), Sign::Plus, Handed::Positive)
    }

    pub fn from_partner(
        bottom: usize,
        top: usize,
        partner: Vec<usize>,
        loops: Vec<(usize, LoopTree)>,
        color: Sign,
        handed: Handed,
    ) -> Result<Self> {
        let ds = DividingSet { bottom, top, partner, loops, color, handed };
        ds.validate()?;
        Ok(ds)
    }

    /// `k` parallel vertical chords Ti–Bi.
    pub fn parallel(k: usize) -> Self {
        let chords: Vec<_> = (0..k).map(|i| (Endpoint::Top(i), Endpoint::Bottom(i))).collect();
        DividingSet::new(k, k, &chords).expect("parallel chords are valid")
    }

    /// The three vertical traces of the standard slab.
    pub fn standard() -> Self {
        Self::parallel(3)
    }

    pub fn with_loop(mut self, anchor_gap: usize, tree: LoopTree) -> Result<Self> {
        self.loops.push((anchor_gap, tree));
        self.validate()?;
        Ok(self)
    }

    pub fn with_color(mut self, color: Sign) -> Self {
        self.color = color;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.partner.len() != n {
            return Err(Error::InvalidDividingSet("partner table has the wrong length".into()));
        }
        if n == 0 && self.loops.is_empty() {
            return Err(Error::InvalidDividingSet("dividing set is empty".into()));
        }
        for (i, &j) in self.partner.iter().enumerate() {
            if j >= n || self.partner[j] != i || i == j {
                return Err(Error::InvalidDividingSet(format!("position {i} is not matched")));
            }
        }
        for i in 0..n {
            let j = self.partner[i];
            if j < i {
                continue;
            }
            for k in i + 1..j {
                let l = self.partner[k];
                if l < i || l > j {
                    return Err(Error::InvalidDividingSet(format!("chords at {i} and {k} cross")));
                }
            }
        }
        for (g, _) in &self.loops {
            if *g >= n.max(1) {
                return Err(Error::InvalidDividingSet(format!("loop anchored at missing gap {g}")));
            }
        }
        Ok(())
    }

    /// Number of chord endpoints.
    pub fn len(&self) -> usize {
        self.bottom + self.top
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0 && self.loops.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.len().max(1)
    }

    pub fn chord_count(&self) -> usize {
        self.len() / 2
    }

    pub fn loop_count(&self) -> usize {
        self.loops.iter().map(|(_, t)| t.count()).sum()
    }

    pub fn handed(&self) -> Handed {
        self.handed
    }

    pub fn endpoint(&self, pos: usize) -> Endpoint {
        if pos < self.bottom {
            Endpoint::Bottom(pos)
        } else {
            Endpoint::Top(self.len() - 1 - pos)
        }
    }

    /// Chords as position pairs (i < j), sorted.
    pub fn chords(&self) -> Vec<(usize, usize)> {
        (0..self.len()).filter(|&i| i < self.partner[i]).map(|i| (i, self.partner[i])).collect()
    }

    /// Chords by label, top endpoints first.
    pub fn labeled_chords(&self) -> Vec<(Endpoint, Endpoint)> {
        let mut out: Vec<_> = self
            .chords()
            .into_iter()
            .map(|(i, j)| {
                let (a, b) = (self.endpoint(i), self.endpoint(j));
                if b.rank() < a.rank() {
                    (b, a)
                } else {
                    (a, b)
                }
            })
            .collect();
        out.sort_by_key(|(a, _)| a.rank());
        out
    }

    fn separates(chord: (usize, usize), g: usize, h: usize) -> bool {
        let inside = |x: usize| chord.0 < x && x <= chord.1;
        inside(g) != inside(h)
    }

    /// Chords separating gaps `g` and `h`.
    pub fn separating_chords(&self, g: usize, h: usize) -> Vec<(usize, usize)> {
        self.chords().into_iter().filter(|&c| Self::separates(c, g, h)).collect()
    }

    /// Region label of every gap: the smallest gap in the same region.
    pub fn regions(&self) -> Vec<usize> {
        let n = self.gap_count();
        let chords = self.chords();
        let mut label = vec![usize::MAX; n];
        for g in 0..n {
            if label[g] != usize::MAX {
                continue;
            }
            for h in g..n {
                if label[h] == usize::MAX && chords.iter().all(|&c| !Self::separates(c, g, h)) {
                    label[h] = g;
                }
            }
        }
        label
    }

    /// Sign of the region at each gap; adjacent gaps differ.
    pub fn gap_colors(&self) -> Vec<Sign> {
        (0..self.gap_count()).map(|g| if g % 2 == 0 { self.color } else { self.color.flip() }).collect()
    }

    /// Checks the two-colouring: every region has a single sign.
    pub fn is_dividing(&self) -> bool {
        let colors = self.gap_colors();
        let regions = self.regions();
        (0..self.gap_count()).all(|g| colors[g] == colors[regions[g]])
    }

    pub fn normal_form(&self) -> NormalForm {
        let regions = self.regions();
        let mut loops: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (g, t) in &self.loops {
            loops.entry(regions[*g]).or_default().push(t.canonical());
        }
        let loops = loops
            .into_iter()
            .map(|(r, mut v)| {
                v.sort();
                (r, v.concat())
            })
            .collect();
        NormalForm {
            bottom: self.bottom,
            top: self.top,
            chords: self.chords(),
            loops,
            color: self.color,
        }
    }

    /// Reflection of the rectangle in a vertical line.
    pub fn mirror(&self) -> DividingSet {
        let (k, n) = (self.bottom, self.len());
        let mpos = |p: usize| if p < k { k - 1 - p } else { 2 * k + self.top - 1 - p };
        let mut partner = vec![0; n];
        for i in 0..n {
            partner[mpos(i)] = mpos(self.partner[i]);
        }
        let loops = self.loops.iter().map(|(g, t)| (self.mirror_gap(*g), t.clone())).collect();
        let color = self.gap_colors()[self.mirror_gap(0)];
        DividingSet { bottom: k, top: self.top, partner, loops, color, handed: self.handed.flip() }
    }

    pub fn mirror_gap(&self, g: usize) -> usize {
        let n = self.gap_count() as i64;
        (self.bottom as i64 - g as i64).rem_euclid(n) as usize
    }

    pub fn mirror_arc(&self, arc: AttachingArc) -> AttachingArc {
        AttachingArc::new(self.mirror_gap(arc.from_gap), self.mirror_gap(arc.to_gap))
    }

    /// Crossed chords in order of travel, as (S1 endpoint, S2 endpoint)
    /// where S1 holds the positions from `from_gap` counterclockwise to `to_gap`.
    fn crossings(&self, arc: AttachingArc) -> Result<[(usize, usize); 3]> {
        let n = self.gap_count();
        if arc.from_gap >= n || arc.to_gap >= n {
            return Err(Error::InvalidDividingSet("arc endpoint gap out of range".into()));
        }
        let crossed = self.separating_chords(arc.from_gap, arc.to_gap);
        if crossed.len() != 3 {
            return Err(Error::ArcCrossingCount(crossed.len()));
        }
        let s = arc.from_gap;
        let offset = |p: usize| (p + n - s) % n;
        let span = (arc.to_gap + n - s) % n;
        let mut pairs: Vec<(usize, usize)> = crossed
            .into_iter()
            .map(|(i, j)| if offset(i) < span { (i, j) } else { (j, i) })
            .collect();
        pairs.sort_by_key(|&(e, _)| offset(e));
        Ok([pairs[0], pairs[1], pairs[2]])
    }

    /// Replaces the three strands crossed by `arc` with the bypass pattern.
    pub fn attach_bypass(&self, arc: AttachingArc) -> Result<DividingSet> {
        let [(e1, f1), (e2, f2), (e3, f3)] = self.crossings(arc)?;
        let mut partner = self.partner.clone();
        let mut join = |a: usize, b: usize| {
            partner[a] = b;
            partner[b] = a;
        };
        match self.handed {
            Handed::Positive => {
                join(f1, e3);
                join(e1, e2);
                join(f2, f3);
            }
            Handed::Negative => {
                join(e1, f3);
                join(f1, f2);
                join(e2, e3);
            }
        }
        let out = DividingSet { partner, ..self.clone() };
        out.validate()?;
        debug_assert!(out.is_dividing());
        Ok(out)
    }

    /// The second and third arcs of the bypass triangle started along `arc`.
    pub fn induced_arcs(&self, arc: AttachingArc) -> Result<(AttachingArc, AttachingArc)> {
        let n = self.gap_count();
        let step = |ds: &DividingSet, a: AttachingArc| -> Result<AttachingArc> {
            let [(e1, f1), _, (e3, f3)] = ds.crossings(a)?;
            Ok(match ds.handed {
                Handed::Positive => AttachingArc::new((e1 + 1) % n, (f3 + 1) % n),
                Handed::Negative => AttachingArc::new(e3, f1),
            })
        };
        let second = step(self, arc)?;
        let third = step(&self.attach_bypass(arc)?, second)?;
        Ok((second, third))
    }

    /// Three bypasses along α, α′, α″. Returns the result and the grading change.
    pub fn attach_triangle(&self, arc: AttachingArc) -> Result<(DividingSet, i64)> {
        let (second, third) = self.induced_arcs(arc)?;
        let out = self.attach_bypass(arc)?.attach_bypass(second)?.attach_bypass(third)?;
        Ok((out, -1))
    }

    /// Reads the dividing set of a horizontal face: the curves where the
    /// field is horizontal, with R₊ where its z-component is positive.
    /// Endpoints must lie on the y = min and y = max edges.
    pub fn from_trace(trace: &Slice2D) -> Result<DividingSet> {
        let [nx, ny] = trace.resolution;
        let plus = |i: usize, j: usize| trace.at(i, j).z > 0.0;
        // Counterclockwise boundary walk from the lower left corner.
        let mut walk: Vec<(usize, usize, char)> = Vec::new();
        walk.extend((0..nx).map(|i| (i, 0, 'b')));
        walk.extend((0..ny).map(|j| (nx, j, 'r')));
        walk.extend((1..=nx).rev().map(|i| (i, ny, 't')));
        walk.extend((1..=ny).rev().map(|j| (0, j, 'l')));
        let mut gap_of = vec![0usize; walk.len()];
        let (mut bottom, mut top, mut changes) = (0, 0, 0);
        for w in 0..walk.len() {
            let (a, b) = (walk[w], walk[(w + 1) % walk.len()]);
            gap_of[w] = changes;
            if plus(a.0, a.1) != plus(b.0, b.1) {
                match (a.2, b.2) {
                    ('b', 'b') => bottom += 1,
                    ('t', 't') => top += 1,
                    _ => {
                        return Err(Error::InvalidDividingSet(format!(
                            "dividing curve meets a side near ({}, {})",
                            a.0, a.1
                        )))
                    }
                }
                changes += 1;
            }
        }
        let n = changes;
        if n == 0 {
            return Err(Error::InvalidDividingSet("no dividing curve meets the boundary".into()));
        }
        // The last run wraps into gap 0.
        for g in gap_of.iter_mut() {
            *g %= n;
        }
        let comp = sign_components(trace);
        let mut region_gaps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (w, &(i, j, _)) in walk.iter().enumerate() {
            region_gaps.entry(comp[i + (nx + 1) * j]).or_default().push(gap_of[w]);
        }
        let mut partner = vec![usize::MAX; n];
        for gaps in region_gaps.values_mut() {
            gaps.sort();
            gaps.dedup();
            for (idx, &g) in gaps.iter().enumerate() {
                let next = gaps[(idx + 1) % gaps.len()];
                let (a, b) = (g, (next + n - 1) % n);
                if partner[a] != usize::MAX && partner[a] != b {
                    return Err(Error::InvalidDividingSet("inconsistent regions in trace".into()));
                }
                partner[a] = b;
                partner[b] = a;
            }
        }
        let color = if plus(0, 0) { Sign::Plus } else { Sign::Minus };
        let mut ds = DividingSet::from_partner(bottom, top, partner, Vec::new(), color, Handed::Positive)?;
        let boundary_regions = region_gaps.len();
        let total = comp.iter().copied().max().map_or(0, |m| m + 1);
        for _ in boundary_regions..total {
            ds.loops.push((0, LoopTree::leaf()));
        }
        Ok(ds)
    }

    pub const FORMAT_VERSION: u32 = 1;

    pub fn to_text(&self) -> String {
        let mut s = format!("dividing {}\n", Self::FORMAT_VERSION);
        s += &format!("bottom {}\ntop {}\n", self.bottom, self.top);
        s += &format!("color {}\n", self.color.symbol());
        s += &format!("handed {}\n", if self.handed == Handed::Positive { '+' } else { '-' });
        for (a, b) in self.labeled_chords() {
            s += &format!("chord {a} {b}\n");
        }
        for (g, t) in &self.loops {
            s += &format!("loop {g} {}\n", t.canonical());
        }
        s
    }

    pub fn parse(text: &str) -> Result<DividingSet> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        if head != format!("dividing {}", Self::FORMAT_VERSION) {
            return Err(Error::Parse(format!("bad header {head:?}")));
        }
        let (mut bottom, mut top) = (None, None);
        let (mut color, mut handed) = (Sign::Plus, Handed::Positive);
        let mut chords = Vec::new();
        let mut loops = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let rest: Vec<&str> = it.collect();
            let num = |s: Option<&&str>| -> Result<usize> {
                s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("bad line {line:?}")))
            };
            match key {
                "bottom" => bottom = Some(num(rest.first())?),
                "top" => top = Some(num(rest.first())?),
                "color" | "handed" => {
                    let plus = match rest.first() {
                        Some(&"+") => true,
                        Some(&"-") => false,
                        _ => return Err(Error::Parse(format!("bad line {line:?}"))),
                    };
                    if key == "color" {
                        color = if plus { Sign::Plus } else { Sign::Minus };
                    } else {
                        handed = if plus { Handed::Positive } else { Handed::Negative };
                    }
                }
                "chord" => {
                    if rest.len() != 2 {
                        return Err(Error::Parse(format!("bad line {line:?}")));
                    }
                    chords.push((rest[0].parse::<Endpoint>()?, rest[1].parse::<Endpoint>()?));
                }
                "loop" => {
                    let g = num(rest.first())?;
                    for t in LoopTree::parse(&rest[1..].concat())? {
                        loops.push((g, t));
                    }
                }
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        let bottom = bottom.ok_or_else(|| Error::Parse("missing bottom".into()))?;
        let top = top.ok_or_else(|| Error::Parse("missing top".into()))?;
        let base = DividingSet::new(bottom, top, &chords)?;
        Self::from_partner(bottom, top, base.partner, loops, color, handed)
    }

    /// Text picture: endpoints along both edges, chords, loops and region signs.
    pub fn render(&self) -> String {
        let colors = self.gap_colors();
        let mut top_row = String::from("  ");
        for t in 0..self.top {
            let g = self.len() - t;
            top_row += &format!("{}  T{t}  ", colors[g % self.gap_count()].symbol());
        }
        top_row += &format!("{}", colors[self.bottom % self.gap_count()].symbol());
        let mut bottom_row = String::from("  ");
        for b in 0..self.bottom {
            bottom_row += &format!("{}  B{b}  ", colors[b].symbol());
        }
        bottom_row += &format!("{}", colors[self.bottom % self.gap_count()].symbol());
        let chords: Vec<String> = self.labeled_chords().iter().map(|(a, b)| format!("{a}-{b}")).collect();
        let mut body = vec![top_row, String::new()];
        body.push(format!("  chords: {}", if chords.is_empty() { "none".into() } else { chords.join(" ") }));
        if !self.loops.is_empty() {
            let loops: Vec<String> = self.loops.iter().map(|(g, t)| format!("{}@gap{g}", t.canonical())).collect();
            body.push(format!("  loops:  {}", loops.join(" ")));
        }
        body.push(String::new());
        body.push(bottom_row);
        let width = body.iter().map(|l| l.chars().count() + 1).max().unwrap_or(0).max(12);
        let edge = format!("+{}+", "-".repeat(width));
        let mut out = vec![edge.clone()];
        out.extend(body.iter().map(|s| format!("|{s:<width$}|")));
        out.push(edge);
        out.join("\n") + "\n"
    }
}

impl fmt::Display for DividingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let chords: Vec<String> = self.labeled_chords().iter().map(|(a, b)| format!("({a} {b})")).collect();
        write!(f, "{}", chords.join(""))?;
        for (g, t) in &self.loops {
            write!(f, " {}@{g}", t.canonical())?;
        }
        Ok(())
    }
}

/// Canonical encoding of an isotopy class rel boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalForm {
    pub bottom: usize,
    pub top: usize,
    pub chords: Vec<(usize, usize)>,
    /// Region label → concatenated canonical loop trees.
    pub loops: Vec<(usize, String)>,
    pub color: Sign,
}

pub fn isotopy_equal(a: &DividingSet, b: &DividingSet) -> bool {
    a.normal_form() == b.normal_form()
}

/// A dividing set together with the running grading shift.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedDividingSet {
    pub set: DividingSet,
    pub grading: i64,
}

impl GradedDividingSet {
    pub fn new(set: DividingSet) -> Self {
        GradedDividingSet { set, grading: 0 }
    }

    pub fn attach_triangle(&self, arc: AttachingArc) -> Result<GradedDividingSet> {
        let (set, delta) = self.set.attach_triangle(arc)?;
        Ok(GradedDividingSet { set, grading: self.grading + delta })
    }
}

/// Every non-crossing matching with `bottom` + `top` endpoints.
pub fn all_diagrams(bottom: usize, top: usize) -> Vec<DividingSet> {
    let n = bottom + top;
    if n % 2 == 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for partner in matchings(n) {
        if let Ok(ds) = DividingSet::from_partner(bottom, top, partner, Vec::new(), Sign::Plus, Handed::Positive) {
            out.push(ds);
        }
    }
    out
}

fn matchings(n: usize) -> Vec<Vec<usize>> {
    fn rec(lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
        if lo >= hi {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        let mut j = lo + 1;
        while j < hi {
            for inner in rec(lo + 1, j) {
                for outer in rec(j + 1, hi) {
                    let mut v = Vec::with_capacity(inner.len() + outer.len() + 1);
                    v.push((lo, j));
                    v.extend_from_slice(&inner);
                    v.extend_from_slice(&outer);
                    out.push(v);
                }
            }
            j += 2;
        }
        out
    }
    rec(0, n)
        .into_iter()
        .map(|pairs| {
            let mut p = vec![0; n];
            for (a, b) in pairs {
                p[a] = b;
                p[b] = a;
            }
            p
        })
        .collect()
}

/// All arcs (as unordered gap pairs) crossing exactly three chords.
pub fn valid_arcs(ds: &DividingSet) -> Vec<AttachingArc> {
    let n = ds.gap_count();
    let mut out = Vec::new();
    for s in 0..n {
        for t in s + 1..n {
            if ds.separating_chords(s, t).len() == 3 {
                out.push(AttachingArc::new(s, t));
            }
        }
    }
    out
}

/// Component label per lattice vertex; R₊ is 4-connected and R₋ 8-connected.
fn sign_components(trace: &Slice2D) -> Vec<usize> {
    let [nx, ny] = trace.resolution;
    let idx = |i: usize, j: usize| i + (nx + 1) * j;
    let mut label = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut next = 0;
    for start in 0..label.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let sign = trace.values[start].z > 0.0;
        label[start] = next;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let (i, j) = ((v % (nx + 1)) as i64, (v / (nx + 1)) as i64);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if (di, dj) == (0, 0) || (sign && di != 0 && dj != 0) {
                        continue;
                    }
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a > nx as i64 || b > ny as i64 {
                        continue;
                    }
                    let w = idx(a as usize, b as usize);
                    if label[w] == usize::MAX && (trace.values[w].z > 0.0) == sign {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
        }
        next += 1;
    }
    label
}
