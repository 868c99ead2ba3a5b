//! Bit-exact serialization of sketches.
//!
//! The stream is a single LSB-first bit sequence: a byte-aligned header
//! (`"NNSK"`, version, engine tag, parameters) followed by sections written
//! one after another. Varints are LEB128 groups of 8 bits placed at arbitrary
//! bit offsets. Decoding rejects non-minimal varints, nonzero padding and
//! trailing bytes, so `encode(decode(b)) == b` for every accepted `b`.

use thiserror::Error;

use crate::distance::{DistanceBundle, RootDistance, ScalePayload};
use crate::geometry::Params;
use crate::hash::{HashSpec, MAX_WIDTH};
use crate::jl::JlProjection;
use crate::quadtree::{QtNode, QuadtreeSketch};
use crate::tree::{ExactSketch, Node};
use crate::Sketch;

pub const MAGIC: &[u8; 4] = b"NNSK";
pub const VERSION: u16 = 1;
const ENGINE_EXACT: u8 = 0;
const ENGINE_QUADTREE: u8 = 1;
const FLAG_DISTANCES: u64 = 1;
const FLAG_JL: u64 = 2;
/// Largest sign matrix a decoder will regenerate.
const MAX_MATRIX: usize = 1 << 28;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated stream")]
    Truncated,
    #[error("varint overflow")]
    VarintOverflow,
    #[error("invalid sketch: {0}")]
    Invalid(String),
}

fn invalid<T>(m: impl Into<String>) -> Result<T, DecodeError> {
    Err(DecodeError::Invalid(m.into()))
}

/// Bits spent per section of the blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeBreakdown {
    pub header: u64,
    pub topology: u64,
    pub centers: u64,
    pub ingresses: u64,
    pub precisions: u64,
    pub displacements: u64,
    pub edge_bits: u64,
    pub hashes: u64,
    pub distance: u64,
    pub padding: u64,
}

impl SizeBreakdown {
    pub fn total(&self) -> u64 {
        self.header + self.tree() + self.hashes + self.distance + self.padding
    }

    /// Bits describing the tree itself.
    pub fn tree(&self) -> u64 {
        self.topology + self.centers + self.ingresses + self.precisions + self.displacements + self.edge_bits
    }

    pub fn rows(&self) -> [(&'static str, u64); 10] {
        [
            ("header", self.header),
            ("topology", self.topology),
            ("centers", self.centers),
            ("ingresses", self.ingresses),
            ("precisions", self.precisions),
            ("displacements", self.displacements),
            ("edge_bits", self.edge_bits),
            ("hashes", self.hashes),
            ("distance", self.distance),
            ("padding", self.padding),
        ]
    }
}

#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.len
    }

    pub fn write_bits(&mut self, mut value: u64, mut n: u32) {
        debug_assert!(n == 64 || value >> n == 0, "value wider than {n} bits");
        while n > 0 {
            let offset = (self.len % 8) as u32;
            if offset == 0 {
                self.bytes.push(0);
            }
            let take = (8 - offset).min(n);
            let chunk = (value & ((1u64 << take) - 1)) as u8;
            *self.bytes.last_mut().unwrap() |= chunk << offset;
            value = if take == 64 { 0 } else { value >> take };
            n -= take;
            self.len += take as u64;
        }
    }

    pub fn write_bool(&mut self, b: bool) {
        self.write_bits(b as u64, 1);
    }

    pub fn write_varint(&mut self, mut v: u64) {
        loop {
            let group = v & 0x7f;
            v >>= 7;
            if v == 0 {
                self.write_bits(group, 8);
                return;
            }
            self.write_bits(group | 0x80, 8);
        }
    }

    pub fn write_zigzag(&mut self, v: i64) {
        self.write_varint(((v << 1) ^ (v >> 63)) as u64);
    }

    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64, DecodeError> {
        if (n as u64) > self.remaining() {
            return Err(DecodeError::Truncated);
        }
        let mut out = 0u64;
        let mut done = 0u32;
        while done < n {
            let byte = self.bytes[(self.pos / 8) as usize];
            let offset = (self.pos % 8) as u32;
            let take = (8 - offset).min(n - done);
            let chunk = ((byte >> offset) as u64) & ((1u64 << take) - 1);
            out |= chunk << done;
            done += take;
            self.pos += take as u64;
        }
        Ok(out)
    }

    pub fn read_bool(&mut self) -> Result<bool, DecodeError> {
        Ok(self.read_bits(1)? == 1)
    }

    pub fn read_varint(&mut self) -> Result<u64, DecodeError> {
        let mut v = 0u64;
        for i in 0..10 {
            let g = self.read_bits(8)?;
            let data = g & 0x7f;
            if i == 9 && data > 1 {
                return Err(DecodeError::VarintOverflow);
            }
            v |= data << (7 * i);
            if g & 0x80 == 0 {
                if i > 0 && data == 0 {
                    return invalid("non-minimal varint");
                }
                return Ok(v);
            }
        }
        Err(DecodeError::VarintOverflow)
    }

    pub fn read_zigzag(&mut self) -> Result<i64, DecodeError> {
        let u = self.read_varint()?;
        Ok(((u >> 1) as i64) ^ -((u & 1) as i64))
    }

    /// Reads a count and checks it against a lower bound on the bits each
    /// item will consume, so corrupt counts cannot trigger huge allocations.
    fn read_count(&mut self, min_bits_each: u64) -> Result<usize, DecodeError> {
        let c = self.read_varint()?;
        if c.saturating_mul(min_bits_each.max(1)) > self.remaining() {
            return Err(DecodeError::Truncated);
        }
        Ok(c as usize)
    }

    fn finish(self) -> Result<(), DecodeError> {
        let pad = self.remaining();
        if pad >= 8 {
            return invalid("trailing bytes");
        }
        if pad > 0 {
            let last = *self.bytes.last().unwrap();
            if last >> (8 - pad) != 0 {
                return invalid("nonzero padding");
            }
        }
        Ok(())
    }
}

fn bits_for(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

struct Sections {
    w: BitWriter,
    sizes: SizeBreakdown,
    mark: u64,
}

impl Sections {
    fn close(&mut self, field: fn(&mut SizeBreakdown) -> &mut u64) {
        let now = self.w.bit_len();
        *field(&mut self.sizes) += now - self.mark;
        self.mark = now;
    }
}

fn write_header(w: &mut BitWriter, engine: u8, p: &Params) {
    for &b in MAGIC {
        w.write_bits(b as u64, 8);
    }
    w.write_bits(VERSION as u64, 16);
    w.write_bits(engine as u64, 8);
    w.write_bits(p.n as u64, 64);
    w.write_bits(p.d as u64, 32);
    w.write_bits(p.phi.trailing_zeros() as u64, 8);
    w.write_bits(p.eps.to_bits(), 64);
    w.write_bits(p.delta.to_bits(), 64);
    w.write_bits(p.q as u64, 64);
    w.write_bits(p.seed, 64);
}

/// Child counts in preorder; a lone child carries a long-edge flag and length.
fn write_topology<N>(w: &mut BitWriter, nodes: &[N], children: impl Fn(&N) -> &[u32], long: impl Fn(u32) -> Option<u32>) {
    w.write_varint(nodes.len() as u64);
    for n in nodes {
        let ch = children(n);
        w.write_varint(ch.len() as u64);
        if ch.len() == 1 {
            match long(ch[0]) {
                Some(len) => {
                    w.write_bool(true);
                    w.write_varint(len as u64);
                }
                None => w.write_bool(false),
            }
        }
    }
}

struct Topology {
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    long_edge: Vec<Option<u32>>,
}

fn read_topology(r: &mut BitReader) -> Result<Topology, DecodeError> {
    let count = r.read_count(8)?;
    if count == 0 {
        return invalid("empty tree");
    }
    let mut parent = vec![None; count];
    let mut children = vec![Vec::new(); count];
    let mut long_edge = vec![None; count];
    let mut stack: Vec<(u32, u64)> = Vec::new();
    for i in 0..count {
        if i > 0 {
            while let Some(&(_, 0)) = stack.last() {
                stack.pop();
            }
            let Some(top) = stack.last_mut() else {
                return invalid("node outside the tree");
            };
            top.1 -= 1;
            parent[i] = Some(top.0);
            children[top.0 as usize].push(i as u32);
        }
        let c = r.read_varint()?;
        if c >= count as u64 {
            return invalid("child count exceeds node count");
        }
        if c == 1 && r.read_bool()? {
            let len = r.read_varint()?;
            if len == 0 || len > u32::MAX as u64 {
                return invalid("bad long-edge length");
            }
            if i + 1 < count {
                long_edge[i + 1] = Some(len as u32);
            }
        }
        if c > 0 {
            stack.push((i as u32, c));
        }
    }
    if stack.iter().any(|&(_, rem)| rem > 0) {
        return invalid("children missing from the node list");
    }
    Ok(Topology {
        parent,
        children,
        long_edge,
    })
}

/// Serializes a sketch and reports the bits spent per section.
pub fn encode(sketch: &Sketch) -> (Vec<u8>, SizeBreakdown) {
    let mut s = Sections {
        w: BitWriter::new(),
        sizes: SizeBreakdown::default(),
        mark: 0,
    };
    match sketch {
        Sketch::Exact(e) => encode_exact(&mut s, e),
        Sketch::Quadtree(q) => encode_quadtree(&mut s, q),
    }
    let bits = s.w.bit_len();
    s.sizes.padding = bits.div_ceil(8) * 8 - bits;
    (s.w.finish(), s.sizes)
}

fn local_index(ids: &[u32], id: u32) -> u64 {
    ids.binary_search(&id).expect("node in subtree") as u64
}

fn encode_exact(s: &mut Sections, sk: &ExactSketch) {
    let input = sk.input_params();
    write_header(&mut s.w, ENGINE_EXACT, &input);
    let flags = if sk.distances.is_some() { FLAG_DISTANCES } else { 0 } | if sk.jl.is_some() { FLAG_JL } else { 0 };
    s.w.write_bits(flags, 8);
    s.w.write_bits(sk.hash.width as u64, 8);
    s.w.write_bits(sk.hash.seed, 64);
    if let Some(jl) = &sk.jl {
        s.w.write_bits(jl.c.to_bits(), 64);
        s.w.write_bits(jl.seed, 64);
        s.w.write_bits(jl.d_out() as u64, 32);
    }
    s.close(|z| &mut z.header);

    let nodes = &sk.nodes;
    write_topology(&mut s.w, nodes, |n| &n.children, |c| nodes[c as usize].long_edge);
    s.close(|z| &mut z.topology);

    let width = bits_for(sk.params.n);
    for n in nodes.iter().filter(|n| n.children.is_empty()) {
        s.w.write_bits(n.center as u64, width);
    }
    s.close(|z| &mut z.centers);

    let mut subtree_ids: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
    for (id, n) in nodes.iter().enumerate() {
        subtree_ids[n.subtree as usize].push(id as u32);
    }
    for (id, n) in nodes.iter().enumerate() {
        if let Some(g) = n.ingress {
            let ids = &subtree_ids[n.subtree as usize];
            s.w.write_varint(local_index(ids, id as u32) - local_index(ids, g));
        }
    }
    s.close(|z| &mut z.ingresses);

    for n in nodes.iter().filter(|n| !n.is_subtree_root()) {
        s.w.write_varint(n.spread);
    }
    s.close(|z| &mut z.precisions);

    for n in nodes.iter().filter(|n| !n.is_subtree_root()) {
        for &e in &n.eta {
            s.w.write_zigzag(e);
        }
    }
    s.close(|z| &mut z.displacements);

    for n in nodes {
        if let Some(h) = n.root_hash {
            s.w.write_bits(h, sk.hash.width);
        }
    }
    s.close(|z| &mut z.hashes);

    if let Some(b) = &sk.distances {
        s.w.write_bits(b.c.to_bits(), 64);
        s.w.write_bits(b.seed, 64);
        for root in &b.roots {
            for &v in &root.projected {
                s.w.write_zigzag(v);
            }
            let width = b.scale(nodes[root.node as usize].level).width();
            for &c in &root.range.cells {
                s.w.write_bits(c as u64, width);
            }
        }
        s.close(|z| &mut z.distance);
    }
}

fn encode_quadtree(s: &mut Sections, sk: &QuadtreeSketch) {
    write_header(&mut s.w, ENGINE_QUADTREE, &sk.params);
    s.w.write_varint(sk.lambda as u64);
    for &v in &sk.sigma {
        s.w.write_zigzag(v);
    }
    s.close(|z| &mut z.header);
    let nodes = &sk.nodes;
    write_topology(&mut s.w, nodes, |n| &n.children, |c| nodes[c as usize].long_edge);
    s.close(|z| &mut z.topology);
    for n in nodes {
        for &b in &n.bits {
            s.w.write_bool(b);
        }
    }
    s.close(|z| &mut z.edge_bits);
    let width = bits_for(sk.params.n);
    for n in nodes.iter().filter(|n| n.children.is_empty()) {
        s.w.write_bits(n.center as u64, width);
    }
    s.close(|z| &mut z.centers);
}

fn read_header(r: &mut BitReader) -> Result<(u8, Params), DecodeError> {
    for &b in MAGIC {
        if r.read_bits(8)? != b as u64 {
            return Err(DecodeError::BadMagic);
        }
    }
    let version = r.read_bits(16)? as u16;
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let engine = r.read_bits(8)? as u8;
    let n = r.read_bits(64)?;
    let d = r.read_bits(32)?;
    let phi_log = r.read_bits(8)?;
    let eps = f64::from_bits(r.read_bits(64)?);
    let delta = f64::from_bits(r.read_bits(64)?);
    let q = r.read_bits(64)?;
    let seed = r.read_bits(64)?;
    if phi_log > 40 || n > u32::MAX as u64 || q > n {
        return invalid("parameters out of range");
    }
    let params = Params::new(n as usize, d as usize, 1i64 << phi_log, eps, delta, q as usize, seed)
        .or_else(|e| invalid(e.to_string()))?;
    Ok((engine, params))
}

/// Parses a blob produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<Sketch, DecodeError> {
    let mut r = BitReader::new(bytes);
    let (engine, params) = read_header(&mut r)?;
    let sketch = match engine {
        ENGINE_EXACT => Sketch::Exact(decode_exact(&mut r, params)?),
        ENGINE_QUADTREE => Sketch::Quadtree(decode_quadtree(&mut r, params)?),
        t => return invalid(format!("unknown engine tag {t}")),
    };
    r.finish()?;
    Ok(sketch)
}

fn decode_exact(r: &mut BitReader, input: Params) -> Result<ExactSketch, DecodeError> {
    let flags = r.read_bits(8)?;
    if flags & !(FLAG_DISTANCES | FLAG_JL) != 0 || flags == FLAG_DISTANCES | FLAG_JL {
        return invalid("unknown flags");
    }
    let width = r.read_bits(8)? as u32;
    if !(1..=MAX_WIDTH).contains(&width) {
        return invalid("hash width out of range");
    }
    let hash = HashSpec::new(width, r.read_bits(64)?);
    let mut params = input;
    let mut jl = None;
    if flags & FLAG_JL != 0 {
        let c = f64::from_bits(r.read_bits(64)?);
        let seed = r.read_bits(64)?;
        let d_out = r.read_bits(32)? as usize;
        if !(c.is_finite() && c > 0.0) || d_out == 0 || d_out.saturating_mul(input.d) > MAX_MATRIX {
            return invalid("bad projection description");
        }
        let p = JlProjection::with_dimension(input.d, input.phi, c, d_out, input.eps, seed)
            .or_else(|e| invalid(e.to_string()))?;
        params = Params::new_unchecked_dims(input.n, d_out, p.phi_out, input.eps, input.delta, input.q, input.seed)
            .or_else(|e| invalid(e.to_string()))?;
        jl = Some(p);
    }
    let d = params.d;
    let topo = read_topology(r)?;
    let count = topo.parent.len();
    let is_root = |i: usize| topo.parent[i].is_none() || topo.long_edge[i].is_some();
    let leaves: Vec<usize> = (0..count).filter(|&i| topo.children[i].is_empty()).collect();
    if leaves.len() != params.n {
        return invalid("leaf count differs from n");
    }
    let mut subtree = vec![0u32; count];
    let mut subtree_ids: Vec<Vec<u32>> = vec![Vec::new(); count];
    for i in 0..count {
        subtree[i] = if is_root(i) { i as u32 } else { subtree[topo.parent[i].unwrap() as usize] };
        subtree_ids[subtree[i] as usize].push(i as u32);
    }

    let mut centers = vec![0u32; count];
    let cw = bits_for(params.n);
    for &i in &leaves {
        let c = r.read_bits(cw)?;
        if c >= params.n as u64 {
            return invalid("center out of range");
        }
        centers[i] = c as u32;
    }
    let mut ingress = vec![None; count];
    for i in 0..count {
        if is_root(i) {
            continue;
        }
        let ids = &subtree_ids[subtree[i] as usize];
        let local = ids.binary_search(&(i as u32)).unwrap() as u64;
        let delta = r.read_varint()?;
        if delta == 0 || delta > local {
            return invalid("ingress does not precede its node");
        }
        ingress[i] = Some(ids[(local - delta) as usize]);
    }
    let mut spread = vec![0u64; count];
    for (i, s) in spread.iter_mut().enumerate() {
        if !is_root(i) {
            *s = r.read_varint()?;
        }
    }
    let non_roots = (0..count).filter(|&i| !is_root(i)).count();
    if (non_roots as u64).saturating_mul((d as u64).saturating_mul(8)) > r.remaining() {
        return Err(DecodeError::Truncated);
    }
    let mut eta = vec![Vec::new(); count];
    for (i, e) in eta.iter_mut().enumerate() {
        if !is_root(i) {
            *e = (0..d).map(|_| r.read_zigzag()).collect::<Result<_, _>>()?;
        }
    }
    let mut hashes = vec![None; count];
    for (i, h) in hashes.iter_mut().enumerate() {
        if is_root(i) && !topo.children[i].is_empty() {
            *h = Some(r.read_bits(width)?);
        }
    }
    let mut nodes = Vec::with_capacity(count);
    for i in 0..count {
        nodes.push(Node {
            parent: topo.parent[i],
            children: topo.children[i].clone(),
            long_edge: topo.long_edge[i],
            center: centers[i],
            ingress: ingress[i],
            spread: spread[i],
            eta: std::mem::take(&mut eta[i]),
            root_hash: hashes[i],
            level: 0,
            subtree: 0,
            subtree_leaf: false,
            end: 0,
            eta_exponent: 0,
        });
    }
    let mut sketch = ExactSketch::from_parts(params, hash, nodes, None, jl).or_else(|e| invalid(e.0))?;

    if flags & FLAG_DISTANCES != 0 {
        let c = f64::from_bits(r.read_bits(64)?);
        let seed = r.read_bits(64)?;
        if !(c.is_finite() && c > 0.0) {
            return invalid("bad projection constant");
        }
        let roots: Vec<u32> = sketch.subtree_roots().collect();
        let top = params.top_level();
        let d_proj = crate::distance::target_dimension(c, params.eps, params.delta / params.q as f64);
        let d_range = crate::distance::target_dimension(c, params.eps, params.delta / (params.q as f64 * (top + 1) as f64));
        let min_bits = (d_proj as u64).saturating_mul(8).saturating_add(d_range as u64);
        if d_proj.saturating_mul(d) > MAX_MATRIX
            || d_range.saturating_mul(d).saturating_mul(top as usize + 1) > MAX_MATRIX
            || (roots.len() as u64).saturating_mul(min_bits) > r.remaining()
        {
            return Err(DecodeError::Truncated);
        }
        let mut bundle = DistanceBundle::sample(c, seed, params.eps, params.delta, params.q, d, top);
        for &node in &roots {
            let projected = (0..d_proj).map(|_| r.read_zigzag()).collect::<Result<_, _>>()?;
            let level = sketch.node(node).level;
            let scale = bundle.scale(level);
            let w = scale.width();
            let cells = (0..scale.dim())
                .map(|_| r.read_bits(w).map(|v| v as u32))
                .collect::<Result<_, _>>()?;
            bundle.roots.push(RootDistance {
                node,
                projected,
                range: ScalePayload {
                    seed: scale.seed(),
                    level,
                    cells,
                },
            });
        }
        sketch.distances = Some(bundle);
    }
    Ok(sketch)
}

fn decode_quadtree(r: &mut BitReader, params: Params) -> Result<QuadtreeSketch, DecodeError> {
    let lambda = r.read_varint()?;
    if lambda > 64 {
        return invalid("Λ out of range");
    }
    if (params.d as u64).saturating_mul(8) > r.remaining() {
        return Err(DecodeError::Truncated);
    }
    let sigma: Vec<i64> = (0..params.d).map(|_| r.read_zigzag()).collect::<Result<_, _>>()?;
    if sigma.iter().any(|s| s.abs() > params.phi) {
        return invalid("shift out of range");
    }
    let topo = read_topology(r)?;
    let count = topo.parent.len();
    let is_root = |i: usize| topo.parent[i].is_none() || topo.long_edge[i].is_some();
    let with_bits = (0..count).filter(|&i| !is_root(i)).count();
    if (with_bits as u64).saturating_mul(params.d as u64) > r.remaining() {
        return Err(DecodeError::Truncated);
    }
    let mut bits = vec![Vec::new(); count];
    for (i, b) in bits.iter_mut().enumerate() {
        if !is_root(i) {
            *b = (0..params.d).map(|_| r.read_bool()).collect::<Result<_, _>>()?;
        }
    }
    let cw = bits_for(params.n);
    let mut nodes = Vec::with_capacity(count);
    for i in 0..count {
        let center = if topo.children[i].is_empty() {
            let c = r.read_bits(cw)?;
            if c >= params.n as u64 {
                return invalid("center out of range");
            }
            c as u32
        } else {
            0
        };
        nodes.push(QtNode {
            parent: topo.parent[i],
            children: topo.children[i].clone(),
            long_edge: topo.long_edge[i],
            bits: std::mem::take(&mut bits[i]),
            center,
            level: 0,
            subtree: 0,
            subtree_leaf: false,
            end: 0,
        });
    }
    QuadtreeSketch::from_parts(params, lambda as u32, sigma, nodes).or_else(|e| invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_roundtrip() {
        let mut w = BitWriter::new();
        w.write_bits(5, 3);
        w.write_varint(300);
        w.write_zigzag(-17);
        w.write_bits(u64::MAX, 64);
        w.write_bool(true);
        let bytes = w.finish();
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read_bits(3).unwrap(), 5);
        assert_eq!(r.read_varint().unwrap(), 300);
        assert_eq!(r.read_zigzag().unwrap(), -17);
        assert_eq!(r.read_bits(64).unwrap(), u64::MAX);
        assert!(r.read_bool().unwrap());
        assert_eq!(r.read_bits(8), Err(DecodeError::Truncated));
    }

    #[test]
    fn varint_limits() {
        let mut w = BitWriter::new();
        w.write_varint(u64::MAX);
        let bytes = w.finish();
        assert_eq!(bytes.len(), 10);
        assert_eq!(BitReader::new(&bytes).read_varint().unwrap(), u64::MAX);
        let over = [0xffu8; 11];
        assert_eq!(BitReader::new(&over).read_varint(), Err(DecodeError::VarintOverflow));
        let padded = [0x80u8, 0x00];
        assert!(matches!(BitReader::new(&padded).read_varint(), Err(DecodeError::Invalid(_))));
    }

    #[test]
    fn zigzag_extremes() {
        for v in [0i64, 1, -1, i64::MAX, i64::MIN, 1 << 40] {
            let mut w = BitWriter::new();
            w.write_zigzag(v);
            let b = w.finish();
            assert_eq!(BitReader::new(&b).read_zigzag().unwrap(), v);
        }
    }

    #[test]
    fn center_width() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(256), 8);
        assert_eq!(bits_for(257), 9);
    }
}
