// Mutual nearest-neighbor matching in descriptor space, plus the
// descriptor-map downsampling rule applied before matching.

import { Match } from './formats.js'
import { Keypoint } from './stub.js'

const MAX_MAP_SIDE = 256

function cosine(a: Float64Array, b: Float64Array): number {
  let dot = 0
  let na = 0
  let nb = 0
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i]
    na += a[i] * a[i]
    nb += b[i] * b[i]
  }
  return dot / (Math.sqrt(na) * Math.sqrt(nb) || 1)
}

/** Reciprocal nearest neighbors; ties break to the lowest index. */
export function mutualNearestNeighbors(a: Keypoint[], b: Keypoint[]): Match[] {
  if (a.length === 0 || b.length === 0) return []
  const nnAB = new Array<number>(a.length)
  const simAB = new Array<number>(a.length).fill(-Infinity)
  const nnBA = new Array<number>(b.length).fill(0)
  const simBA = new Array<number>(b.length).fill(-Infinity)
  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < b.length; j++) {
      const s = cosine(a[i].descriptor, b[j].descriptor)
      if (s > simAB[i]) {
        simAB[i] = s
        nnAB[i] = j
      }
      if (s > simBA[j]) {
        simBA[j] = s
        nnBA[j] = i
      }
    }
  }
  const matches: Match[] = []
  for (let i = 0; i < a.length; i++) {
    const j = nnAB[i]
    if (nnBA[j] === i) {
      matches.push([a[i].x, a[i].y, b[j].x, b[j].y])
    }
  }
  return matches
}

/**
 * Bilinear 2x reduction of a dense descriptor map until both sides fit the
 * matching budget. Dense matchers hand over (H, W, D) grids; grids at or
 * below 256x256 are matched at native resolution.
 */
export function downsampleDescriptorMap(
  map: Float64Array[][],
): Float64Array[][] {
  let grid = map
  while (grid.length > MAX_MAP_SIDE || grid[0].length > MAX_MAP_SIDE) {
    const h = Math.floor(grid.length / 2)
    const w = Math.floor(grid[0].length / 2)
    const dim = grid[0][0].length
    const next: Float64Array[][] = []
    for (let y = 0; y < h; y++) {
      const row: Float64Array[] = []
      for (let x = 0; x < w; x++) {
        const acc = new Float64Array(dim)
        for (const [dy, dx] of [[0, 0], [0, 1], [1, 0], [1, 1]]) {
          const src = grid[2 * y + dy][2 * x + dx]
          for (let d = 0; d < dim; d++) acc[d] += 0.25 * src[d]
        }
        row.push(acc)
      }
      next.push(row)
    }
    grid = next
  }
  return grid
}
