//! Honeycomb graph geometry.
//!
//! Sites are addressed by a unit cell `(n1, n2)` and a sublattice. Every
//! A site at cell `n` is joined to `B(n)`, `B(n + e1)` and `B(n + e2)`; the
//! last bond carries the Landau-gauge Harper phase `exp(-i n1 phi)`. With this
//! gauge the oriented phase exponents around every hexagonal face sum to `-1`
//! when the face is traversed as `A(n) -> B(n+e1) -> A(n+e1) -> B(n+e1+e2) ->
//! A(n+e2) -> B(n+e2) -> A(n)`, so the flux through each face is `-phi` in that
//! orientation (magnitude `|phi|` for every face).

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn label(self) -> &'static str {
        match self {
            Sublattice::A => "A",
            Sublattice::B => "B",
        }
    }
}

/// A vertex of the honeycomb graph. The derived ordering is lexicographic in
/// `(n1, n2)` with A before B, which is the enumeration order of a [`Region`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub n1: i64,
    pub n2: i64,
    pub sub: Sublattice,
}

impl Site {
    pub const fn a(n1: i64, n2: i64) -> Self {
        Site {
            n1,
            n2,
            sub: Sublattice::A,
        }
    }

    pub const fn b(n1: i64, n2: i64) -> Self {
        Site {
            n1,
            n2,
            sub: Sublattice::B,
        }
    }

    pub fn translate(self, d1: i64, d2: i64) -> Self {
        Site {
            n1: self.n1 + d1,
            n2: self.n2 + d2,
            sub: self.sub,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.sub.label(), self.n1, self.n2)
    }
}

/// A bond leaving a site. The hop amplitude is `exp(i * phase * phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub site: Site,
    pub phase: i64,
}

/// The three bonds of `s`. Reversed bonds carry negated exponents.
pub fn neighbors(s: Site) -> [Bond; 3] {
    let (n1, n2) = (s.n1, s.n2);
    match s.sub {
        Sublattice::A => [
            Bond {
                site: Site::b(n1, n2),
                phase: 0,
            },
            Bond {
                site: Site::b(n1 + 1, n2),
                phase: 0,
            },
            Bond {
                site: Site::b(n1, n2 + 1),
                phase: -n1,
            },
        ],
        Sublattice::B => [
            Bond {
                site: Site::a(n1, n2),
                phase: 0,
            },
            Bond {
                site: Site::a(n1 - 1, n2),
                phase: 0,
            },
            Bond {
                site: Site::a(n1, n2 - 1),
                phase: n1,
            },
        ],
    }
}

pub fn are_adjacent(x: Site, y: Site) -> bool {
    neighbors(x).iter().any(|b| b.site == y)
}

/// Phase exponent of the bond `x -> y`, if the sites are adjacent.
pub fn bond_phase(x: Site, y: Site) -> Option<i64> {
    neighbors(x).iter().find(|b| b.site == y).map(|b| b.phase)
}

/// Order-3 rotation of the graph about `A(0,0)`:
/// `A(n) -> A(Ln)`, `B(n) -> B(Ln + e1)` with `L(n1, n2) = (-n1 - n2, n1)`.
/// It cycles the neighbours `B(0,0) -> B(1,0) -> B(0,1) -> B(0,0)`.
pub fn rotation_map(s: Site) -> Site {
    let (m1, m2) = (-s.n1 - s.n2, s.n1);
    match s.sub {
        Sublattice::A => Site::a(m1, m2),
        Sublattice::B => Site::b(m1 + 1, m2),
    }
}

/// Rotation about an arbitrary A site, obtained by conjugating
/// [`rotation_map`] with the lattice translation to `center`.
pub fn rotate_about(center: Site, s: Site) -> Result<Site> {
    if center.sub != Sublattice::A {
        return Err(Error::InvalidParameter(format!(
            "rotation center {center} must be an A site"
        )));
    }
    let moved = rotation_map(s.translate(-center.n1, -center.n2));
    Ok(moved.translate(center.n1, center.n2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    /// Cells with `|n1| <= N` and `|n2| <= N`.
    Box { half_width: i64 },
    /// Sites within `radius` hops of `center`.
    Ball { center: Site, radius: usize },
}

/// A finite set of sites with a fixed linear enumeration.
#[derive(Debug, Clone)]
pub struct Region {
    kind: RegionKind,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl Region {
    pub fn new(kind: RegionKind) -> Result<Self> {
        let mut sites = match kind {
            RegionKind::Box { half_width } => {
                if half_width <= 0 {
                    return Err(Error::InvalidParameter(format!(
                        "box half-width must be >= 1, got {half_width}"
                    )));
                }
                let n = half_width;
                let mut sites = Vec::with_capacity((2 * (2 * n + 1) * (2 * n + 1)) as usize);
                for n1 in -n..=n {
                    for n2 in -n..=n {
                        sites.push(Site::a(n1, n2));
                        sites.push(Site::b(n1, n2));
                    }
                }
                sites
            }
            RegionKind::Ball { center, radius } => {
                if radius == 0 {
                    return Err(Error::InvalidParameter("ball radius must be >= 1".into()));
                }
                let mut dist = HashMap::new();
                dist.insert(center, 0usize);
                let mut queue = VecDeque::from([center]);
                while let Some(s) = queue.pop_front() {
                    let d = dist[&s];
                    if d == radius {
                        continue;
                    }
                    for b in neighbors(s) {
                        if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(b.site) {
                            e.insert(d + 1);
                            queue.push_back(b.site);
                        }
                    }
                }
                dist.into_keys().collect()
            }
        };
        sites.sort_unstable();
        let index = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(Region { kind, sites, index })
    }

    pub fn cube(half_width: i64) -> Result<Self> {
        Self::new(RegionKind::Box { half_width })
    }

    pub fn ball(center: Site, radius: usize) -> Result<Self> {
        Self::new(RegionKind::Ball { center, radius })
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn lookup(&self, s: Site) -> Option<usize> {
        self.index.get(&s).copied()
    }

    pub fn contains(&self, s: Site) -> bool {
        self.index.contains_key(&s)
    }

    pub fn site(&self, i: usize) -> Site {
        self.sites[i]
    }

    /// Hop distance from `center` to every site, walking only through the
    /// region. Unreachable sites get `None`.
    pub fn hop_distances(&self, center: Site) -> Result<Vec<Option<usize>>> {
        let start = self
            .lookup(center)
            .ok_or_else(|| Error::SiteNotInRegion(center.to_string()))?;
        let mut dist = vec![None; self.len()];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap_or(0);
            for b in neighbors(self.sites[i]) {
                if let Some(j) = self.lookup(b.site) {
                    if dist[j].is_none() {
                        dist[j] = Some(d + 1);
                        queue.push_back(j);
                    }
                }
            }
        }
        Ok(dist)
    }

    /// Number of hops from `s` to the nearest site outside the region.
    pub fn distance_to_exterior(&self, s: Site) -> Result<usize> {
        if !self.contains(s) {
            return Err(Error::SiteNotInRegion(s.to_string()));
        }
        let mut seen = HashMap::from([(s, 0usize)]);
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            let d = seen[&x];
            for b in neighbors(x) {
                if seen.contains_key(&b.site) {
                    continue;
                }
                if !self.contains(b.site) {
                    return Ok(d + 1);
                }
                seen.insert(b.site, d + 1);
                queue.push_back(b.site);
            }
        }
        unreachable!("finite region always has an exterior")
    }
}
