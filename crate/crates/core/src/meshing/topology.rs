use std::collections::HashMap;

use super::MeshingError;

#[inline]
fn undirected(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Faces incident to every undirected edge.
pub fn edge_faces(tris: &[[usize; 3]]) -> HashMap<(usize, usize), Vec<usize>> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, t) in tris.iter().enumerate() {
        for e in 0..3 {
            map.entry(undirected(t[e], t[(e + 1) % 3])).or_default().push(f);
        }
    }
    map
}

/// Edge-connected face components, each listed in ascending face order.
pub fn face_components(tris: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let edges = edge_faces(tris);
    let mut label = vec![usize::MAX; tris.len()];
    let mut comps = Vec::new();
    for start in 0..tris.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut comp = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(f) = stack.pop() {
            let t = tris[f];
            for e in 0..3 {
                for &g in &edges[&undirected(t[e], t[(e + 1) % 3])] {
                    if label[g] == usize::MAX {
                        label[g] = id;
                        comp.push(g);
                        stack.push(g);
                    }
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Duplicates vertices whose incident faces form several edge-connected fans
/// so every vertex neighbourhood is a single disk or half-disk. Returns new
/// triangles and, per output vertex, the input vertex it copies.
pub fn split_pinched_vertices(n_vertices: usize, tris: &[[usize; 3]]) -> (Vec<[usize; 3]>, Vec<usize>) {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
    for (f, t) in tris.iter().enumerate() {
        for &v in t {
            incident[v].push(f);
        }
    }
    let mut out = tris.to_vec();
    let mut origin: Vec<usize> = (0..n_vertices).collect();
    for v in 0..n_vertices {
        let faces = &incident[v];
        if faces.len() < 2 {
            continue;
        }
        // union faces around v that share an edge (v, w)
        let mut fan = vec![usize::MAX; faces.len()];
        let mut n_fans = 0;
        for i in 0..faces.len() {
            if fan[i] != usize::MAX {
                continue;
            }
            fan[i] = n_fans;
            let mut stack = vec![i];
            while let Some(a) = stack.pop() {
                let ta = tris[faces[a]];
                for b in 0..faces.len() {
                    if fan[b] != usize::MAX {
                        continue;
                    }
                    let tb = tris[faces[b]];
                    let shared = ta.iter().filter(|&&w| w != v && tb.contains(&w)).count();
                    if shared > 0 {
                        fan[b] = n_fans;
                        stack.push(b);
                    }
                }
            }
            n_fans += 1;
        }
        for k in 1..n_fans {
            let copy = origin.len();
            origin.push(v);
            for (i, &f) in faces.iter().enumerate() {
                if fan[i] == k {
                    for slot in out[f].iter_mut() {
                        if *slot == v {
                            *slot = copy;
                        }
                    }
                }
            }
        }
    }
    (out, origin)
}

/// Boundary loops from half-edges without a twin, in face orientation order.
pub fn boundary_loops(tris: &[[usize; 3]]) -> Result<Vec<Vec<usize>>, MeshingError> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for t in tris {
        for e in 0..3 {
            *directed.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for (&(a, b), &count) in &directed {
        if count > 1 {
            return Err(MeshingError::NonManifold(format!("half-edge ({a}, {b}) repeated")));
        }
        if !directed.contains_key(&(b, a)) && next.insert(a, b).is_some() {
            return Err(MeshingError::NonManifold(format!("vertex {a} has two boundary successors")));
        }
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut lp = vec![s];
        seen.insert(s);
        let mut v = next[&s];
        while v != s {
            if !seen.insert(v) {
                return Err(MeshingError::NonManifold(format!("boundary revisits vertex {v}")));
            }
            lp.push(v);
            v = *next
                .get(&v)
                .ok_or_else(|| MeshingError::NonManifold(format!("open boundary at vertex {v}")))?;
        }
        loops.push(lp);
    }
    Ok(loops)
}

/// V - E + F over the vertices referenced by `tris`.
pub fn euler_characteristic(tris: &[[usize; 3]]) -> i64 {
    let edges = edge_faces(tris).len() as i64;
    let mut verts: Vec<usize> = tris.iter().flatten().copied().collect();
    verts.sort_unstable();
    verts.dedup();
    verts.len() as i64 - edges + tris.len() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_two_triangles() {
        let t = [[0, 1, 2], [0, 2, 3]];
        assert_eq!(euler_characteristic(&t), 1);
        assert_eq!(boundary_loops(&t).unwrap(), vec![vec![0, 1, 2, 3]]);
        assert_eq!(face_components(&t), vec![vec![0, 1]]);
    }

    #[test]
    fn bowtie_vertex_split() {
        // two triangles sharing only vertex 2
        let t = [[0, 1, 2], [2, 3, 4]];
        assert_eq!(face_components(&t).len(), 2);
        assert!(boundary_loops(&t).is_err());
        let (split, origin) = split_pinched_vertices(5, &t);
        assert_eq!(origin.len(), 6);
        assert_eq!(origin[5], 2);
        assert_eq!(boundary_loops(&split).unwrap().len(), 2);
    }

    #[test]
    fn annulus_has_two_loops() {
        // 3x3 grid of quads with the middle one missing; euler 0
        let idx = |x: usize, y: usize| y * 4 + x;
        let mut t = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                if (x, y) == (1, 1) {
                    continue;
                }
                t.push([idx(x, y), idx(x + 1, y), idx(x + 1, y + 1)]);
                t.push([idx(x, y), idx(x + 1, y + 1), idx(x, y + 1)]);
            }
        }
        assert_eq!(euler_characteristic(&t), 0);
        assert_eq!(boundary_loops(&t).unwrap().len(), 2);
    }
}
